//! Critical points of height functions h_v = ⟨f, v⟩ and their Monte Carlo average.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::immersion::{fundamental_forms, Atlas, Chart};
use crate::linalg::{inertia, sym_eigenvalues};
use crate::sampling::{rng, unit_vector};

#[derive(Clone, Debug, Serialize)]
pub struct MorseOptions {
    /// Multiplier on each chart's seed grid resolution.
    pub density: f64,
    /// Newton stops once the coordinate gradient is below this.
    pub newton_tol: f64,
    /// Hessians with condition number above this are refused.
    pub condition_cap: f64,
    /// Fraction of each seed grid, lowest |P_T v|² first, also used as
    /// Newton seeds. Grid minima alone merge critical points that share a
    /// shallow valley.
    pub sweep: f64,
}

impl Default for MorseOptions {
    fn default() -> Self {
        MorseOptions { density: 1.0, newton_tol: 1e-11, condition_cap: 1e8, sweep: 0.005 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPoint {
    pub chart: usize,
    pub u: Vec<f64>,
    pub point: Vec<f64>,
    pub value: f64,
    pub index: usize,
    pub condition: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MorseProfile {
    pub v: Vec<f64>,
    /// μ_k = number of critical points of index k.
    pub mu: Vec<usize>,
    pub points: Vec<CriticalPoint>,
    /// Whether Σ(−1)^k μ_k equals the Euler characteristic.
    pub euler_ok: bool,
    /// Whether the wider seed sweep was needed.
    pub retried: bool,
}

/// Seed grid of one chart with orthonormal tangent frames at the nodes.
#[derive(Clone, Debug)]
struct ChartGrid {
    chart: usize,
    dims: Vec<usize>,
    nodes: Vec<Vec<f64>>,
    tangents: Vec<DMatrix<f64>>,
}

/// Tangent frames on the seed grids, reusable across directions.
#[derive(Clone, Debug)]
pub struct SeedCache {
    grids: Vec<ChartGrid>,
}

/// The region's bounding box widened by 10% per side, clipped to the domain.
fn seed_box(chart: &Chart) -> Vec<(f64, f64)> {
    chart
        .region
        .bounds()
        .iter()
        .zip(&chart.domain)
        .map(|(&(lo, hi), &(dlo, dhi))| {
            let pad = 0.1 * (hi - lo);
            ((lo - pad).max(dlo), (hi + pad).min(dhi))
        })
        .collect()
}

impl SeedCache {
    pub fn new(atlas: &Atlas, density: f64) -> Result<Self> {
        let mut grids = Vec::new();
        for (ci, chart) in atlas.charts.iter().enumerate().filter(|(_, c)| c.tiles) {
            let dims: Vec<usize> = chart.seed_grid.iter().map(|&k| ((k as f64 * density).ceil() as usize).max(3)).collect();
            let bx = seed_box(chart);
            let total: usize = dims.iter().product();
            let nodes: Vec<Vec<f64>> = (0..total)
                .map(|mut idx| {
                    let mut u = vec![0.0; chart.n];
                    for (a, &d) in dims.iter().enumerate() {
                        let i = idx % d;
                        idx /= d;
                        let (lo, hi) = bx[a];
                        u[a] = lo + (i as f64 + 0.5) * (hi - lo) / d as f64;
                    }
                    u
                })
                .collect();
            let tangents: Vec<DMatrix<f64>> = nodes
                .par_iter()
                .map(|u| {
                    let jets = chart.eval_unchecked(u, 1);
                    let jac = DMatrix::from_fn(chart.ambient, chart.n, |c, i| jets[c].d1(i));
                    // Degenerate metric at a node only spoils that seed.
                    jac.qr().q()
                })
                .collect();
            grids.push(ChartGrid { chart: ci, dims, nodes, tangents });
        }
        Ok(SeedCache { grids })
    }

    /// Grid minima of |P_T v|², at most `cap`, followed by the `sweep` lowest
    /// remaining nodes.
    fn seeds(&self, grid: &ChartGrid, v: &DVector<f64>, cap: usize, sweep: usize) -> Vec<Vec<f64>> {
        let vals: Vec<f64> = grid.tangents.iter().map(|q| (q.transpose() * v).norm_squared()).collect();
        let n = grid.dims.len();
        let mut stride = vec![1usize; n];
        for a in 1..n {
            stride[a] = stride[a - 1] * grid.dims[a - 1];
        }
        let mut minima: Vec<(f64, usize)> = Vec::new();
        'node: for (idx, &val) in vals.iter().enumerate() {
            let mut rest = idx;
            for a in 0..n {
                let i = rest % grid.dims[a];
                rest /= grid.dims[a];
                for nb in [i.wrapping_sub(1), i + 1] {
                    if nb >= grid.dims[a] {
                        continue;
                    }
                    let j = idx - i * stride[a] + nb * stride[a];
                    if vals[j] < val {
                        continue 'node;
                    }
                }
            }
            minima.push((val, idx));
        }
        minima.sort_by(|a, b| a.0.total_cmp(&b.0));
        minima.truncate(cap);
        if sweep > 0 {
            let mut taken = vec![false; vals.len()];
            minima.iter().for_each(|&(_, i)| taken[i] = true);
            let mut rest: Vec<(f64, usize)> = vals.iter().copied().enumerate().filter(|&(i, _)| !taken[i]).map(|(i, x)| (x, i)).collect();
            let k = sweep.min(rest.len());
            if k > 0 {
                rest.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
                rest.truncate(k);
                rest.sort_by(|a, b| a.0.total_cmp(&b.0));
                minima.extend(rest);
            }
        }
        minima.into_iter().map(|(_, i)| grid.nodes[i].clone()).collect()
    }
}

fn gradient_hessian(chart: &Chart, u: &[f64], v: &DVector<f64>, order: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let jets = chart.eval(u, order)?;
    let n = chart.n;
    let g = DVector::from_fn(n, |i, _| jets.iter().zip(v.iter()).map(|(f, c)| c * f.d1(i)).sum());
    let h = if order >= 2 { DMatrix::from_fn(n, n, |i, j| jets.iter().zip(v.iter()).map(|(f, c)| c * f.d2(i, j)).sum()) } else { DMatrix::zeros(n, n) };
    Ok((g, h))
}

/// Damped Newton on ∇h_v = 0 with a per-axis trust box; `None` if it leaves the domain or stalls.
fn newton(chart: &Chart, u0: &[f64], v: &DVector<f64>, tol: f64, trust: &[f64]) -> Option<Vec<f64>> {
    let mut u = u0.to_vec();
    for _ in 0..80 {
        let (g, h) = gradient_hessian(chart, &u, v, 2).ok()?;
        let gn = g.norm();
        if gn <= tol {
            return Some(u);
        }
        let svd = crate::linalg::svd(&h, true, true)?;
        let smax = svd.singular_values.max();
        let mut d = svd.solve(&(-&g), 1e-14 * smax.max(1e-300)).ok()?;
        let over = d.iter().zip(trust).map(|(x, t)| x.abs() / t).fold(0.0, f64::max);
        if over > 1.0 {
            d /= over;
        }
        let mut step = 1.0;
        loop {
            let cand: Vec<f64> = u.iter().zip(d.iter()).map(|(a, b)| a + step * b).collect();
            if chart.in_domain(&cand) {
                if let Ok((gc, _)) = gradient_hessian(chart, &cand, v, 1) {
                    if gc.norm() < (1.0 - 1e-4 * step) * gn || step < 1e-3 {
                        u = cand;
                        break;
                    }
                }
            }
            step *= 0.5;
            if step < 1e-6 {
                return None;
            }
        }
    }
    let (g, _) = gradient_hessian(chart, &u, v, 1).ok()?;
    (g.norm() <= tol * 10.0).then_some(u)
}

/// Index and condition of the Hessian in an orthonormal frame, checked against
/// the shape operator in the normal component of v.
fn classify_critical(chart: &Chart, u: &[f64], v: &DVector<f64>) -> Result<(usize, f64)> {
    let (_, h) = gradient_hessian(chart, u, v, 2)?;
    let forms = fundamental_forms(chart, u)?;
    let e = &forms.metric.frame;
    let hon = e.transpose() * &h * e;
    let hon = (&hon + hon.transpose()) * 0.5;
    let ev = sym_eigenvalues(&hon);
    let amax = ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let amin = ev.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let condition = if amin > 0.0 { amax / amin } else { f64::INFINITY };
    let index = ev.iter().filter(|&&x| x < 0.0).count();
    // At a critical point v is normal, so Hess h_v = ⟨α, v⟩ = A_{v_N}.
    let shape = forms.shape_along(v);
    let (neg, _, _) = inertia(&shape, 1e-12 * amax.max(1e-300));
    if neg != index {
        return Err(GeomError::DegenerateCritical { condition });
    }
    Ok((index, condition))
}

/// Sweep fraction of the retry after an Euler characteristic mismatch.
const FALLBACK_SWEEP: f64 = 0.02;

/// Largest Newton step per axis, in seed-grid cells.
const TRUST_CELLS: f64 = 6.0;

/// Seeds per chart kept after sorting grid minima by |P_T v|².
const SEED_CAP: usize = 96;

fn find_critical(atlas: &Atlas, cache: &SeedCache, v: &DVector<f64>, opts: &MorseOptions, sweep: f64) -> Result<Vec<CriticalPoint>> {
    let mut found: Vec<CriticalPoint> = Vec::new();
    for grid in &cache.grids {
        let chart = &atlas.charts[grid.chart];
        let bx = seed_box(chart);
        // A few cells per axis, so each seed settles on the critical point of its own basin.
        let trust: Vec<f64> = bx.iter().zip(&grid.dims).map(|((a, b), &d)| TRUST_CELLS * (b - a) / d as f64).collect();
        let extra = (sweep * grid.nodes.len() as f64) as usize;
        for seed in cache.seeds(grid, v, SEED_CAP, extra) {
            let Some(u) = newton(chart, &seed, v, opts.newton_tol, &trust) else { continue };
            let Some(u) = chart.reduce(&u) else { continue };
            let point = chart.point(&u)?;
            if found.iter().any(|c| c.point.iter().zip(&point).map(|(a, b)| (a - b).powi(2)).sum::<f64>() < 1e-12) {
                continue;
            }
            let (index, condition) = classify_critical(chart, &u, v)?;
            if condition > opts.condition_cap {
                return Err(GeomError::DegenerateCritical { condition });
            }
            let value = point.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            found.push(CriticalPoint { chart: grid.chart, u, point, value, index, condition });
        }
    }
    Ok(found)
}

fn counts(atlas: &Atlas, pts: &[CriticalPoint]) -> (Vec<usize>, bool) {
    let mut mu = vec![0usize; atlas.n + 1];
    for p in pts {
        mu[p.index] += 1;
    }
    let chi: i64 = mu.iter().enumerate().map(|(k, &m)| if k % 2 == 0 { m as i64 } else { -(m as i64) }).sum();
    (mu, chi == atlas.meta.euler_characteristic())
}

/// Critical points of h_v. Seeds come from grid minima of |P_T v|² and the
/// lowest nodes; if the counts contradict the Euler characteristic the search
/// is repeated once with a wider sweep.
pub fn morse_profile(atlas: &Atlas, v: &[f64], opts: &MorseOptions) -> Result<MorseProfile> {
    let cache = SeedCache::new(atlas, opts.density)?;
    morse_profile_cached(atlas, &cache, v, opts)
}

pub fn morse_profile_cached(atlas: &Atlas, cache: &SeedCache, v: &[f64], opts: &MorseOptions) -> Result<MorseProfile> {
    if v.len() != atlas.ambient() {
        return Err(GeomError::InvalidInput(format!("direction has {} entries, expected {}", v.len(), atlas.ambient())));
    }
    let vv = DVector::from_column_slice(v).normalize();
    let pts = find_critical(atlas, cache, &vv, opts, opts.sweep)?;
    let (mu, ok) = counts(atlas, &pts);
    if ok {
        return Ok(MorseProfile { v: vv.iter().copied().collect(), mu, points: pts, euler_ok: true, retried: false });
    }
    let pts = find_critical(atlas, cache, &vv, opts, FALLBACK_SWEEP)?;
    let (mu, ok) = counts(atlas, &pts);
    Ok(MorseProfile { v: vv.iter().copied().collect(), mu, points: pts, euler_ok: ok, retried: true })
}

#[derive(Clone, Debug, Serialize)]
pub struct MorseEstimate {
    pub tau: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Antithetic pairs averaged.
    pub pairs: usize,
    pub rejected: usize,
}

/// Largest fraction of rejected directions before the estimate is refused.
pub const REJECTION_CAP: f64 = 0.01;

fn pair_seed(seed: u64, pair: usize, attempt: usize) -> u64 {
    seed ^ (pair as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (attempt as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// Monte Carlo average of μ_k over uniform directions, using antithetic
/// pairs (v, −v). Directions with degenerate or miscounted critical sets are
/// redrawn; more than 1% of redraws is an error.
pub fn tau_by_morse(atlas: &Atlas, samples: usize, seed: u64, opts: &MorseOptions) -> Result<MorseEstimate> {
    let pairs = samples.div_ceil(2).max(1);
    let cache = SeedCache::new(atlas, opts.density)?;
    let max_attempts = 8;
    let results: Vec<(Option<Vec<f64>>, usize)> = crate::parallel::install(|| {
        (0..pairs)
            .into_par_iter()
            .map(|i| {
                let mut rejected = 0;
                for attempt in 0..max_attempts {
                    let mut r = rng(pair_seed(seed, i, attempt));
                    let v = unit_vector(&mut r, atlas.ambient());
                    let w: Vec<f64> = v.iter().map(|x| -x).collect();
                    let a = morse_profile_cached(atlas, &cache, &v, opts);
                    let b = morse_profile_cached(atlas, &cache, &w, opts);
                    match (a, b) {
                        (Ok(a), Ok(b)) if a.euler_ok && b.euler_ok => {
                            let mean = a.mu.iter().zip(&b.mu).map(|(x, y)| 0.5 * (*x as f64 + *y as f64)).collect();
                            return (Some(mean), rejected);
                        }
                        _ => rejected += 2,
                    }
                }
                (None, rejected)
            })
            .collect()
    });
    let rejected: usize = results.iter().map(|r| r.1).sum();
    if results.iter().any(|r| r.0.is_none()) || rejected as f64 > REJECTION_CAP * (2 * pairs) as f64 {
        return Err(GeomError::TooManyRejections { rejected, requested: 2 * pairs });
    }
    let means: Vec<Vec<f64>> = results.into_iter().filter_map(|r| r.0).collect();
    let n1 = atlas.n + 1;
    let p = means.len() as f64;
    let tau: Vec<f64> = (0..n1).map(|k| means.iter().map(|m| m[k]).sum::<f64>() / p).collect();
    let stderr = (0..n1)
        .map(|k| {
            if means.len() < 2 {
                return 0.0;
            }
            let var = means.iter().map(|m| (m[k] - tau[k]).powi(2)).sum::<f64>() / (p - 1.0);
            (var / p).sqrt()
        })
        .collect();
    Ok(MorseEstimate { tau, stderr, pairs: means.len(), rejected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::round_sphere;

    #[test]
    fn round_sphere_height_has_two_critical_points() {
        let atlas = round_sphere(3, 1.0).unwrap();
        let mp = morse_profile(&atlas, &[0.3, -0.5, 0.6, 0.2, 0.4], &MorseOptions::default()).unwrap();
        assert_eq!(mp.mu, vec![1, 0, 0, 1]);
        assert!(mp.euler_ok);
        // Critical values are ±|v_T| with v_T the component inside the sphere's hyperplane.
        let vt = (0.09f64 + 0.25 + 0.36 + 0.04).sqrt() / (0.09f64 + 0.25 + 0.36 + 0.04 + 0.16).sqrt();
        let mut vals: Vec<f64> = mp.points.iter().map(|p| p.value).collect();
        vals.sort_by(f64::total_cmp);
        assert!((vals[0] + vt).abs() < 1e-10 && (vals[1] - vt).abs() < 1e-10);
    }
}
