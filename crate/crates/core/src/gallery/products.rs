//! Products of (possibly ellipsoidal) spheres Sᵏ × Sⁿ⁻ᵏ ⊂ ℝᵏ⁺¹ × ℝⁿ⁻ᵏ⁺¹.

use serde::Serialize;
use serde_json::json;

use crate::error::{GeomError, Result};
use crate::gallery::{hemisphere, stereo};
use crate::immersion::{Atlas, Chart, ExampleMetadata, Factor, Region};
use crate::jetcalc::Jet;

#[derive(Clone, Debug, Serialize)]
pub struct ProductParams {
    pub k: usize,
    pub n: usize,
    pub r1: f64,
    pub r2: f64,
    /// Relative stretch of the ellipsoid semi-axes: axis i is scaled by 1 + i·perturbation.
    pub perturbation: f64,
}

impl Default for ProductParams {
    fn default() -> Self {
        ProductParams { k: 2, n: 4, r1: 1.0, r2: 1.0, perturbation: 0.0 }
    }
}

fn ellipsoid(u: &[Jet], sign: f64, radius: f64, pert: f64) -> Vec<Jet> {
    stereo(u, sign).iter().enumerate().map(|(i, c)| c.scale(radius * (1.0 + i as f64 * pert))).collect()
}

pub fn product_spheres(p: &ProductParams) -> Result<Atlas> {
    let (k, n) = (p.k, p.n);
    if k == 0 || k >= n || n > 6 {
        return Err(GeomError::InvalidInput(format!("need 1 <= k < n <= 6, got k={k}, n={n}")));
    }
    if !(p.r1 > 0.0 && p.r2 > 0.0) || p.perturbation.abs() >= 0.5 / n as f64 {
        return Err(GeomError::InvalidInput("radii must be positive and the perturbation small".into()));
    }
    let grid = if n <= 3 {
        16
    } else if n == 4 {
        10
    } else {
        6
    };
    let (r1, r2, pert) = (p.r1, p.r2, p.perturbation);
    let mut charts = Vec::new();
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            let (l1, c1) = hemisphere(s1);
            let (l2, c2) = hemisphere(s2);
            let region = Region::new(vec![Factor::ball(k, 1.0, c1), Factor::ball(n - k, 1.0, c2)]);
            let chart = Chart::new(&format!("{l1}-{l2}"), n, n + 2, vec![(-1.6, 1.6); n], region, move |u| {
                let mut out = ellipsoid(&u[..k], s1, r1, pert);
                out.extend(ellipsoid(&u[k..], s2, r2, pert));
                out
            })
            .with_seed_grid(vec![grid; n]);
            charts.push(chart);
        }
    }
    let mut betti = vec![0u32; n + 1];
    betti[0] += 1;
    betti[k] += 1;
    betti[n - k] += 1;
    betti[n] += 1;
    let tau: Vec<f64> = betti.iter().map(|&b| b as f64).collect();
    Ok(Atlas {
        name: format!("product-s{k}s{}", n - k),
        n,
        probes: Atlas::default_probes(&charts),
        charts,
        meta: ExampleMetadata {
            betti,
            field: "Q".into(),
            expected_tau: Some(tau),
            expected_strata: "U2 with complementary kernels, w = 0".into(),
            orientable: true,
            tight_target: 4.0,
            tight_convention: "sum of Betti numbers".into(),
            expected_wide: true,
        },
        leaf_slices: Vec::new(),
        params: json!(p),
    })
}
