//! Constrained minimization of the free energy over fields with fixed mean
//! and values in the clip band.
//!
//! Projected gradient descent: the raw gradient F'(m) + m - J⋆m loses its
//! spatial mean (the constraint tangent), the step is backtracked under an
//! Armijo test, and every iterate is projected back onto
//! {mean = n} ∩ {|m| <= 1 - ε}. The projection is the exact least-squares
//! one: clip(m + λ) with the scalar λ found by bisection (water filling),
//! plus a final mean correction spread over unsaturated cells.

use rayon::prelude::*;
use thiserror::Error;

use crate::field::{
    energy_with_conv, gradient_with_conv, EnergyBreakdown, Field, FieldError, ModelParams,
    EPS_BAND,
};
use crate::kernel::{convolve, DiscreteKernel, KernelError};
use crate::numeric::{bisect, compensated_sum};
use crate::reduced::{mean_from_excess, minimize_phi, ReducedError};
use crate::thermo::{DoubleWell, ThermoError};
use crate::trial::{build_trial, TrialError, TrialSpec, WallProfile};

#[derive(Debug, Error)]
pub enum MinimizeError {
    #[error("target mean n = {0} infeasible (|n| > 1 - eps)")]
    Infeasible(f64),
    #[error("no usable starts")]
    NoStarts,
    #[error("no start converged; best partial result from '{label}' at energy {energy}")]
    DidNotConverge { label: String, energy: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Reduced(#[from] ReducedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradTol,
    EnergyStall,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct MinimizerConfig {
    pub max_iters: usize,
    /// sup-norm threshold on the projected gradient
    pub grad_tol: f64,
    /// relative per-step energy decrease below which the run stalls out
    pub energy_tol: f64,
    /// Armijo sufficient-decrease factor
    pub armijo: f64,
    pub step_init: f64,
    pub seed: u64,
    /// extra randomized starts: (count, amplitude), opt-in
    pub perturb: Option<(usize, f64)>,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 4000,
            grad_tol: 1e-5,
            energy_tol: 1e-14,
            armijo: 1e-4,
            step_init: 1.0,
            seed: 0,
            perturb: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub field: Field,
    pub energy: EnergyBreakdown,
    pub iterations: usize,
    /// true only when the projected-gradient sup-norm dropped below grad_tol
    pub converged: bool,
    pub reason: StopReason,
    pub start_label: String,
    pub grad_sup: f64,
    /// accepted-iterate energies, for monotonicity checks
    pub energy_trace: Vec<f64>,
}

/// Exact least-squares projection onto {mean = n, |m| <= 1 - ε}: the
/// KKT solution is clip(m + λ); λ is bisected, then the leftover mean
/// residual is spread uniformly over unsaturated cells.
pub fn project(field: &Field, n: f64) -> Result<Field, MinimizeError> {
    let lo = -1.0 + EPS_BAND;
    let hi = 1.0 - EPS_BAND;
    if !(lo..=hi).contains(&n) {
        return Err(MinimizeError::Infeasible(n));
    }
    let cells = field.cells() as f64;
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &field.values {
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    let mean = field.mean();
    let mut out: Vec<f64>;
    if vmin + (n - mean) >= lo && vmax + (n - mean) <= hi {
        // no clipping active: plain shift
        let shift = n - mean;
        out = field.values.iter().map(|&v| v + shift).collect();
    } else {
        let mean_clip = |lambda: f64| -> f64 {
            compensated_sum(field.values.iter().map(|&v| (v + lambda).clamp(lo, hi))) / cells
        };
        let lam = bisect(
            |lambda| mean_clip(lambda) - n,
            lo - vmax,
            hi - vmin,
            1e-17,
        );
        out = field.values.iter().map(|&v| (v + lam).clamp(lo, hi)).collect();
    }
    // pin the mean exactly, adjusting only unsaturated cells
    let res = n - compensated_sum(out.iter().copied()) / cells;
    if res != 0.0 {
        let margin = 1e-12;
        let free = out
            .iter()
            .filter(|v| **v > lo + margin && **v < hi - margin)
            .count();
        if free > 0 {
            let add = res * cells / free as f64;
            for v in out.iter_mut() {
                if *v > lo + margin && *v < hi - margin {
                    *v = (*v + add).clamp(lo, hi);
                }
            }
        }
    }
    Ok(field.with_values(out))
}

fn sup_projected_gradient(field: &Field, pg: &[f64]) -> f64 {
    let lo = -1.0 + EPS_BAND;
    let hi = 1.0 - EPS_BAND;
    let tiny = 1e-14;
    field
        .values
        .iter()
        .zip(pg)
        .map(|(&m, &g)| {
            let blocked = (m >= hi - tiny && g < 0.0) || (m <= lo + tiny && g > 0.0);
            if blocked {
                0.0
            } else {
                g.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// One descent run from a single start.
///
/// Backtracking (halving) line search with Armijo factor `config.armijo`;
/// the initial trial step of each iteration is the Barzilai-Borwein
/// estimate <s,s>/<s,y>, which keeps iteration counts low on these smooth
/// landscapes while the Armijo test preserves monotonicity.
pub fn descend(
    start: &Field,
    kernel: &DiscreteKernel,
    beta: f64,
    n: f64,
    label: &str,
    config: &MinimizerConfig,
) -> Result<MinimizeResult, MinimizeError> {
    let well = DoubleWell::new(beta)?;
    let mut m = project(start, n)?;
    let hv = m.cell_volume();
    let mut conv = convolve(kernel, &m)?;
    let mut energy = energy_with_conv(&m, &conv, &well);
    let mut trace = vec![energy.total];
    let mut step = config.step_init;
    let mut reason = StopReason::MaxIters;
    let mut grad_sup = f64::INFINITY;
    let mut iterations = 0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None; // (m, pg) of last iterate

    for it in 1..=config.max_iters {
        iterations = it;
        let g = gradient_with_conv(&m, &conv, &well);
        let gbar = compensated_sum(g.values.iter().copied()) / g.cells() as f64;
        let pg: Vec<f64> = g.values.iter().map(|&v| v - gbar).collect();
        grad_sup = sup_projected_gradient(&m, &pg);
        if grad_sup < config.grad_tol {
            reason = StopReason::GradTol;
            break;
        }
        let gnorm2 = hv * compensated_sum(pg.iter().map(|&v| v * v));
        step = match &prev {
            Some((pm, ppg)) => {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for i in 0..pg.len() {
                    let s = m.values[i] - pm[i];
                    let y = pg[i] - ppg[i];
                    ss += s * s;
                    sy += s * y;
                }
                if sy > 1e-300 {
                    (ss / sy).clamp(1e-4, 1e3)
                } else {
                    (2.0 * step).min(4.0)
                }
            }
            None => config.step_init,
        };
        prev = Some((m.values.clone(), pg.clone()));
        let mut accepted = None;
        while step > 1e-16 {
            let candidate: Vec<f64> = m
                .values
                .iter()
                .zip(&pg)
                .map(|(&v, &g)| v - step * g)
                .collect();
            let trial = project(&m.with_values(candidate), n)?;
            let tconv = convolve(kernel, &trial)?;
            let tenergy = energy_with_conv(&trial, &tconv, &well);
            if tenergy.total <= energy.total - config.armijo * step * gnorm2 {
                accepted = Some((trial, tconv, tenergy));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, tconv, tenergy)) = accepted else {
            reason = StopReason::EnergyStall;
            break;
        };
        let drop = energy.total - tenergy.total;
        m = trial;
        conv = tconv;
        energy = tenergy;
        trace.push(energy.total);
        if drop < config.energy_tol * energy.total.abs().max(1.0) {
            reason = StopReason::EnergyStall;
            break;
        }
    }
    Ok(MinimizeResult {
        field: m,
        energy,
        iterations,
        converged: reason == StopReason::GradTol,
        reason,
        start_label: label.to_string(),
        grad_sup,
        energy_trace: trace,
    })
}

/// Descend from every start (in parallel) and keep the lowest final energy.
/// Errors with the best partial result only if no start converged.
pub fn minimize(
    starts: &[(String, Field)],
    kernel: &DiscreteKernel,
    beta: f64,
    n: f64,
    config: &MinimizerConfig,
) -> Result<(MinimizeResult, Vec<MinimizeResult>), MinimizeError> {
    if starts.is_empty() {
        return Err(MinimizeError::NoStarts);
    }
    let runs: Vec<Result<MinimizeResult, MinimizeError>> = starts
        .par_iter()
        .map(|(label, f)| descend(f, kernel, beta, n, label, config))
        .collect();
    let mut results = Vec::with_capacity(runs.len());
    for r in runs {
        results.push(r?);
    }
    let best_idx = results
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.energy
                .total
                .partial_cmp(&b.energy.total)
                .unwrap()
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .unwrap();
    let best = results[best_idx].clone();
    if !results.iter().any(|r| r.converged) {
        return Err(MinimizeError::DidNotConverge {
            label: best.start_label,
            energy: best.energy.total,
        });
    }
    Ok((best, results))
}

/// Default droplet fractions tried by the sweep.
pub const DEFAULT_ETAS: [f64; 5] = [0.0, 0.2, 2.0 / 3.0, 0.8, 1.0];

/// Starts = uniform n, the trial family at each η (plus the reduced-model
/// prediction when it is a positive interior fraction), and optional seeded
/// perturbations of the uniform start.
pub fn build_starts(
    params: &ModelParams,
    wall: &WallProfile,
    k: f64,
    etas: &[f64],
    eta_pred: Option<f64>,
    config: &MinimizerConfig,
) -> Result<Vec<(String, Field)>, MinimizeError> {
    let n = mean_from_excess(k, params.l, params.d, wall.m_beta);
    let mut starts: Vec<(String, Field)> = Vec::new();
    starts.push((
        "uniform".to_string(),
        Field::uniform(params.d, params.n, params.l, n).map_err(MinimizeError::Field)?,
    ));
    let mut all_etas: Vec<f64> = etas.to_vec();
    if let Some(ep) = eta_pred {
        if ep > 0.0 && all_etas.iter().all(|&e| (e - ep).abs() > 1e-6) {
            all_etas.push(ep);
        }
    }
    for &eta in &all_etas {
        let spec = TrialSpec {
            eta,
            k,
            center: None,
        };
        match build_trial(params, wall, &spec, n) {
            Ok(t) => starts.push((format!("eta={eta:.4}"), t.field)),
            Err(TrialError::Geometry { .. }) | Err(TrialError::CollarTooSmall(_)) => {
                // droplet too large for this torus; skip the start
            }
            Err(TrialError::Field(e)) => return Err(MinimizeError::Field(e)),
            Err(TrialError::Reduced(e)) => return Err(MinimizeError::Reduced(e)),
            Err(_) => {}
        }
    }
    if let Some((count, amplitude)) = config.perturb {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
        for p in 0..count {
            let vals: Vec<f64> = (0..params.n.pow(params.d as u32))
                .map(|_| n + rng.gen_range(-amplitude..amplitude))
                .collect();
            let f = Field::new_unchecked(params.d, params.n, params.l, vals);
            let f = project(&f, n)?;
            starts.push((format!("perturb{p}"), f));
        }
    }
    Ok(starts)
}

/// Outcome of one excess amplitude K in a sweep.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub k: f64,
    pub n: f64,
    pub best: MinimizeResult,
    pub records: Vec<MinimizeResult>,
    /// reduced-model optimal fraction at C(K)
    pub eta_predicted: f64,
}

/// Multi-start minimization at one K: uniform plus the trial family.
pub fn multi_start_sweep(
    params: &ModelParams,
    wall: &WallProfile,
    kernel: &DiscreteKernel,
    k: f64,
    etas: &[f64],
    chi: f64,
    surface_tension: f64,
    config: &MinimizerConfig,
) -> Result<SweepOutcome, MinimizeError> {
    let n = mean_from_excess(k, params.l, params.d, wall.m_beta);
    let c = crate::reduced::c_of_k(k, params.d, wall.m_beta, chi, surface_tension)?;
    let eta_predicted = minimize_phi(c, params.d)?.eta_c;
    let starts = build_starts(params, wall, k, etas, Some(eta_predicted), config)?;
    let (best, records) = minimize(&starts, kernel, params.beta, n, config)?;
    Ok(SweepOutcome {
        k,
        n,
        best,
        records,
        eta_predicted,
    })
}
