//! Round n-sphere in a hyperplane of ℝⁿ⁺².

use serde_json::json;

use crate::error::{GeomError, Result};
use crate::gallery::{hemisphere, stereo};
use crate::immersion::{Atlas, Chart, ExampleMetadata, Factor, Region};

/// Stereographic charts on the closed northern and open southern unit balls.
pub fn round_sphere(n: usize, radius: f64) -> Result<Atlas> {
    if !(2..=6).contains(&n) {
        return Err(GeomError::InvalidInput(format!("sphere dimension must be 2..=6, got {n}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(GeomError::InvalidInput(format!("radius must be positive, got {radius}")));
    }
    let grid = match n {
        2 | 3 => 16,
        4 => 10,
        _ => 6,
    };
    let charts: Vec<Chart> = [1.0, -1.0]
        .into_iter()
        .map(|sign| {
            let (label, closed) = hemisphere(sign);
            Chart::new(label, n, n + 2, vec![(-1.6, 1.6); n], Region::new(vec![Factor::ball(n, 1.0, closed)]), move |u| {
                let mut p: Vec<_> = stereo(u, sign).iter().map(|c| c.scale(radius)).collect();
                p.push(u[0].scale(0.0));
                p
            })
            .with_seed_grid(vec![grid; n])
        })
        .collect();
    let mut betti = vec![0; n + 1];
    betti[0] = 1;
    betti[n] = 1;
    let tau: Vec<f64> = betti.iter().map(|&b| b as f64).collect();
    Ok(Atlas {
        name: format!("round-s{n}"),
        n,
        probes: Atlas::default_probes(&charts),
        charts,
        meta: ExampleMetadata {
            betti,
            field: "Q".into(),
            expected_tau: Some(tau),
            expected_strata: "umbilic, U0-like everywhere".into(),
            orientable: true,
            tight_target: 2.0,
            tight_convention: "sum of Betti numbers".into(),
            expected_wide: false,
        },
        leaf_slices: Vec::new(),
        params: json!({ "n": n, "radius": radius }),
    })
}
