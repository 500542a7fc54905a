//! A cone over a round 2-sphere in ℝ⁵, whose splitting tensor is known in
//! closed form. Used as a fixture; it is not a closed manifold.

use serde_json::json;

use crate::error::{GeomError, Result};
use crate::gallery::stereo;
use crate::immersion::{Atlas, Chart, ExampleMetadata, Factor, Region};

/// f(t, u) = t·(r·y(u), √(1−r²), 0) with y the stereographic sphere.
/// The radial lines are the nullity leaves and C = −(1/t)·I on T⊥.
pub fn synthetic_cone(r: f64) -> Result<Atlas> {
    if !(r > 0.0 && r < 1.0) {
        return Err(GeomError::InvalidInput(format!("cone aperture must lie in (0, 1), got {r}")));
    }
    let h = (1.0 - r * r).sqrt();
    let region = Region::new(vec![Factor::interval(0.5, 2.0), Factor::ball(2, 1.0, true)]);
    let chart = Chart::new("cone", 3, 5, vec![(0.1, 4.0), (-1.6, 1.6), (-1.6, 1.6)], region, move |x| {
        let t = &x[0];
        let y = stereo(&x[1..3], 1.0);
        let mut out: Vec<_> = y.iter().map(|c| (t * c).scale(r)).collect();
        out.push(t.scale(h));
        out.push(t.scale(0.0));
        out
    });
    let charts = vec![chart];
    Ok(Atlas {
        name: "cone".into(),
        n: 3,
        probes: Atlas::default_probes(&charts),
        charts,
        meta: ExampleMetadata {
            betti: vec![],
            field: "Q".into(),
            expected_tau: None,
            expected_strata: "U1 with C = -I/t".into(),
            orientable: true,
            tight_target: 0.0,
            tight_convention: "not applicable".into(),
            expected_wide: false,
        },
        leaf_slices: Vec::new(),
        params: json!({ "r": r }),
    })
}
