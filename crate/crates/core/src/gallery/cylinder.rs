//! (S² × ℝ)/ℤ with a screw-motion deck map, immersed in ℝ⁵ by wrapping the ℝ
//! factor around a circle while counter-rotating the spheroid.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;

use crate::error::{GeomError, Result};
use crate::gallery::{hemisphere, stereo};
use crate::immersion::{Atlas, Chart, DeckMap, ExampleMetadata, Factor, LeafSlice, Region};
use crate::jetcalc::Jet;

#[derive(Clone, Debug, Serialize)]
pub struct CylinderParams {
    /// Spheroid semi-axes; the first two must agree so the rotation is an isometry.
    pub semi_axes: [f64; 3],
    /// Rotation angle of the deck map about the spheroid axis.
    pub angle: f64,
    /// Translation length of the deck map along ℝ.
    pub period: f64,
}

impl Default for CylinderParams {
    fn default() -> Self {
        CylinderParams { semi_axes: [1.0, 1.0, 0.8], angle: PI / 3.0, period: 2.0 * PI }
    }
}

/// f(u, t) = (G(R_{−αt/a} u), R_c cos(t/R_c), R_c sin(t/R_c)) with R_c = a/2π.
/// Stereographic coordinates commute with rotations about the pole axis, so
/// rotating u rotates the spheroid point. The deck (u, t) ↦ (R_α u, t + a)
/// leaves f unchanged.
pub fn cylinder_quotient(p: &CylinderParams) -> Result<Atlas> {
    let [a1, a2, a3] = p.semi_axes;
    if !(a1 > 0.0 && a2 > 0.0 && a3 > 0.0 && p.period > 0.0 && p.angle.is_finite()) {
        return Err(GeomError::InvalidInput("semi-axes and period must be positive".into()));
    }
    let (period, alpha) = (p.period, p.angle);
    let rc = period / (2.0 * PI);
    let mut charts = Vec::new();
    for sign in [1.0, -1.0] {
        let (label, closed) = hemisphere(sign);
        let region = Region::new(vec![Factor::ball(2, 1.0, closed), Factor::interval(0.0, period)]);
        let (c, s) = (alpha.cos(), alpha.sin());
        let linear = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let deck = DeckMap::affine("screw", linear, DVector::from_vec(vec![0.0, 0.0, period]), 2);
        let chart = Chart::new(label, 3, 5, vec![(-1.6, 1.6), (-1.6, 1.6), (-2.0 * period, 3.0 * period)], region, move |x| {
            let phi = &x[2] * (-alpha / period);
            let (cp, sp) = (phi.cos(), phi.sin());
            let v0 = &(&cp * &x[0]) - &(&sp * &x[1]);
            let v1 = &(&sp * &x[0]) + &(&cp * &x[1]);
            let y = stereo(&[v0, v1], sign);
            let t = &x[2] * (1.0 / rc);
            vec![&y[0] * a1, &y[1] * a2, &y[2] * a3, t.cos() * rc, t.sin() * rc]
        })
        .with_decks(vec![deck])
        .with_seed_grid(vec![16, 16, 24]);
        charts.push(chart);
    }
    let leaf_slices = (0..2)
        .map(|i| LeafSlice { chart: i, axis: 2, value: 0.0, region: Region::new(vec![Factor::ball(2, 1.0, i == 0)]), period, component: "S2".into() })
        .collect();
    let atlas = Atlas {
        name: "cylinder-quotient".into(),
        n: 3,
        probes: Atlas::default_probes(&charts),
        charts,
        meta: ExampleMetadata {
            betti: vec![1, 1, 1, 1],
            field: "Q".into(),
            expected_tau: Some(vec![1.0; 4]),
            expected_strata: "U1 everywhere".into(),
            orientable: true,
            tight_target: 4.0,
            tight_convention: "sum of Betti numbers".into(),
            expected_wide: true,
        },
        leaf_slices,
        params: json!(p),
    };
    // f∘τ = f holds for any section, so τ*g = g is automatic; the rotation
    // must in addition be an isometry of the section itself.
    let defect = section_rotation_defect(p.semi_axes, alpha).max(atlas.deck_isometry_defect(64, 11)?);
    if defect > 1e-9 {
        return Err(GeomError::DeckNotIsometric { defect });
    }
    Ok(atlas)
}

/// max ‖LᵀG*(Lu)L − G*(u)‖ over sample points, for the section metric G* in
/// stereographic coordinates and L the deck rotation.
fn section_rotation_defect(axes: [f64; 3], alpha: f64) -> f64 {
    let (c, s) = (alpha.cos(), alpha.sin());
    let metric = |u: [f64; 2]| -> [[f64; 2]; 2] {
        let x = Jet::seed(&u, 1);
        let y = stereo(&x, 1.0);
        let mut g = [[0.0; 2]; 2];
        for (k, yk) in y.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    g[i][j] += axes[k] * axes[k] * yk.d1(i) * yk.d1(j);
                }
            }
        }
        g
    };
    let l = [[c, -s], [s, c]];
    let mut q = crate::sampling::ShiftedHalton::new(2, 29);
    let mut worst = 0.0f64;
    for _ in 0..64 {
        let t = q.next_point();
        let u = [2.0 * t[0] - 1.0, 2.0 * t[1] - 1.0];
        let lu = [c * u[0] - s * u[1], s * u[0] + c * u[1]];
        let (g0, g1) = (metric(u), metric(lu));
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        v += l[a][i] * g1[a][b] * l[b][j];
                    }
                }
                worst = worst.max((v - g0[i][j]).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn screw_deck_preserves_the_map() {
        let atlas = cylinder_quotient(&CylinderParams::default()).unwrap();
        assert!(atlas.deck_equivariance(300, 5).unwrap() < 1e-12);
    }

    #[test]
    fn triaxial_section_is_rejected() {
        let p = CylinderParams { semi_axes: [1.0, 0.7, 0.8], ..Default::default() };
        assert!(matches!(cylinder_quotient(&p), Err(GeomError::DeckNotIsometric { .. })));
    }
}
