//! Chen gap, wideness and tightness from a τ vector, and the JSON report.

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChenVerdict {
    /// τ_0 + τ_n − Σ_{0<k<n} τ_k.
    pub gap: f64,
    pub wide: bool,
    pub tight: bool,
}

/// Wide means the gap vanishes within three combined error bars. Tight means
/// Σ τ_k matches the target within the same bars plus a small absolute slack.
pub fn chen_and_wide(tau: &[f64], err: &[f64], target: f64) -> ChenVerdict {
    let n = tau.len().saturating_sub(1);
    let ends = tau.first().copied().unwrap_or(0.0) + if n > 0 { tau[n] } else { 0.0 };
    let middle: f64 = tau.iter().take(n).skip(1).sum();
    let gap = ends - middle;
    let bar: f64 = 3.0 * err.iter().map(|e| e.abs()).sum::<f64>();
    let total: f64 = tau.iter().sum();
    ChenVerdict { gap, wide: gap.abs() <= bar, tight: (total - target).abs() <= bar + 0.05 }
}

#[derive(Clone, Debug, Serialize)]
pub struct TypeNumberReport {
    pub example: String,
    pub params: Value,
    pub tau: Vec<f64>,
    pub stderr: Vec<f64>,
    pub chen_gap: f64,
    pub wide: bool,
    pub tight: bool,
    pub method: String,
    pub runtime_s: f64,
    pub version: String,
    pub config: Value,
}

impl TypeNumberReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(example: &str, params: Value, method: &str, tau: Vec<f64>, stderr: Vec<f64>, target: f64, runtime_s: f64, config: Value) -> Self {
        let v = chen_and_wide(&tau, &stderr, target);
        TypeNumberReport {
            example: example.into(),
            params,
            tau,
            stderr,
            chen_gap: v.gap,
            wide: v.wide,
            tight: v.tight,
            method: method.into(),
            runtime_s,
            version: crate::VERSION.into(),
            config,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_numbers_are_tight_but_not_wide() {
        let v = chen_and_wide(&[1.0, 0.0, 0.0, 1.0], &[0.01; 4], 2.0);
        assert_eq!(v.gap, 2.0);
        assert!(!v.wide && v.tight);
    }

    #[test]
    fn product_numbers_are_wide() {
        let v = chen_and_wide(&[1.0, 0.0, 2.0, 0.0, 1.0], &[0.0; 5], 4.0);
        assert_eq!(v.gap, 0.0);
        assert!(v.wide && v.tight);
    }
}
