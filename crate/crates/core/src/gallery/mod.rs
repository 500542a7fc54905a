//! Explicit immersions with known invariants.

pub mod cone;
pub mod cylinder;
pub mod moebius;
pub mod products;
pub mod sphere;
pub mod switched;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{GeomError, Result};
use crate::immersion::Atlas;
use crate::jetcalc::Jet;

pub use cone::synthetic_cone;
pub use cylinder::{cylinder_quotient, CylinderParams};
pub use moebius::{band_defects, moebius_composition, BandKind, MoebiusParams};
pub use products::{product_spheres, ProductParams};
pub use sphere::round_sphere;
pub use switched::{switched_sphere, Profile, ProfileSpec, SwitchedParams};

/// Names accepted by [`build`].
pub const EXAMPLES: [&str; 6] = ["round-s3", "product-s2s2", "moebius", "moebius-cyl", "switched-s3", "cylinder-quotient"];

/// Serialized reference to a gallery constructor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtlasDescriptor {
    pub example: String,
    #[serde(default)]
    pub params: Value,
}

fn get_f64(params: &Value, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => v.as_f64().ok_or_else(|| GeomError::InvalidInput(format!("parameter `{key}` must be a number"))),
    }
}

fn get_vec3(params: &Value, key: &str, default: [f64; 3]) -> Result<[f64; 3]> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(Value::Array(a)) if a.len() == 3 => {
            let mut out = [0.0; 3];
            for (o, v) in out.iter_mut().zip(a) {
                *o = v.as_f64().ok_or_else(|| GeomError::InvalidInput(format!("`{key}` entries must be numbers")))?;
            }
            Ok(out)
        }
        _ => Err(GeomError::InvalidInput(format!("parameter `{key}` must be an array of three numbers"))),
    }
}

/// Builds a gallery atlas by name. Unknown parameters are ignored; missing
/// ones take the documented defaults.
pub fn build(name: &str, params: &Value) -> Result<Atlas> {
    match name {
        "round-s3" => round_sphere(3, get_f64(params, "radius", 1.0)?),
        "product-s2s2" => {
            let d = ProductParams::default();
            product_spheres(&ProductParams {
                k: d.k,
                n: d.n,
                r1: get_f64(params, "r1", d.r1)?,
                r2: get_f64(params, "r2", d.r2)?,
                perturbation: get_f64(params, "perturbation", d.perturbation)?,
            })
        }
        "moebius" | "moebius-cyl" => moebius_composition(&moebius_params(name, params)?),
        "switched-s3" => {
            let d = SwitchedParams::default();
            switched_sphere(&SwitchedParams {
                epsilon: get_f64(params, "epsilon", d.epsilon)?,
                profile: ProfileSpec { flatness: get_f64(params, "flatness", d.profile.flatness)?, blend: get_f64(params, "blend", d.profile.blend)? },
            })
        }
        "cylinder-quotient" => {
            let d = CylinderParams::default();
            cylinder_quotient(&CylinderParams {
                semi_axes: get_vec3(params, "semi_axes", d.semi_axes)?,
                angle: get_f64(params, "angle", d.angle)?,
                period: get_f64(params, "period", d.period)?,
            })
        }
        "cone" => synthetic_cone(get_f64(params, "r", 0.5)?),
        other => Err(GeomError::InvalidInput(format!("unknown example `{other}`"))),
    }
}

/// Möbius-family parameters from a name and a parameter object.
pub fn moebius_params(name: &str, params: &Value) -> Result<MoebiusParams> {
    let d = MoebiusParams::default();
    let band = match name {
        "moebius" => BandKind::Moebius,
        "moebius-cyl" => BandKind::Cylinder,
        other => return Err(GeomError::InvalidInput(format!("`{other}` is not a band example"))),
    };
    Ok(MoebiusParams { epsilon: get_f64(params, "epsilon", d.epsilon)?, band, semi_axes: get_vec3(params, "semi_axes", d.semi_axes)? })
}

pub fn from_descriptor(desc: &AtlasDescriptor) -> Result<Atlas> {
    build(&desc.example, &desc.params)
}

/// Inverse stereographic projection onto Sᵏ ⊂ ℝᵏ⁺¹ from the pole −sign·e_{k+1};
/// `u = 0` maps to sign·e_{k+1}.
pub fn stereo(u: &[Jet], sign: f64) -> Vec<Jet> {
    let mut q = &u[0] * &u[0];
    for x in &u[1..] {
        q += &(x * x);
    }
    let den = (&q + 1.0).recip();
    let mut out: Vec<Jet> = u.iter().map(|x| (x * &den).scale(2.0)).collect();
    out.push((&(1.0 - &q) * &den).scale(sign));
    out
}

/// Labels for the two stereographic hemispheres.
pub(crate) fn hemisphere(sign: f64) -> (&'static str, bool) {
    if sign > 0.0 {
        ("north", true)
    } else {
        ("south", false)
    }
}
