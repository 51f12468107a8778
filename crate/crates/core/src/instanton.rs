//! Planar-front profile and surface tension.
//!
//! The 1-D transition profile between the two phases minimizes
//!
//!   ∫ F(m(z)) dz + (1/4) ∬ (m(z) - m(z'))² J̄(z-z') dz dz'
//!
//! over profiles with m(∓∞) = ±m_β; the minimal value is the surface
//! tension S. The first variation with a unit-mass marginal J̄ reduces to
//! m = tanh(β (J̄ ⋆ m)), solved here by fixed-point iteration from the sign
//! step with ±m_β padding outside the window and recentering of the zero
//! crossing.

use thiserror::Error;

use crate::kernel::{marginal_kernel, KernelError, KernelSpec, MarginalKernel};
use crate::numeric::compensated_sum;
use crate::thermo::{DoubleWell, ThermoError};

#[derive(Debug, Error)]
pub enum InstantonError {
    #[error("no front: beta = {0} <= 1")]
    NoFront(f64),
    #[error("window half-width Z = {0} too small (need Z >= 8)")]
    WindowTooSmall(f64),
    #[error("grid too coarse: h = {0} (need h <= 1/16)")]
    TooCoarse(f64),
    #[error("fixed point not converged after {iters} iterations (residual {residual})")]
    NotConverged { iters: usize, residual: f64 },
    #[error("front tails not settled: |m(±Z) ∓ m_β| = {0} > 1e-8; enlarge Z")]
    TailNotSettled(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
}

/// Converged front profile on the symmetric grid z_k = -Z + k h.
#[derive(Debug, Clone)]
pub struct InstantonProfile {
    pub beta: f64,
    pub spec: KernelSpec,
    pub m_beta: f64,
    /// window half-width
    pub z_max: f64,
    pub h: f64,
    pub values: Vec<f64>,
    pub kernel: MarginalKernel,
    /// (pst)-energy of the profile
    pub surface_tension: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl InstantonProfile {
    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let (z0, h) = (-self.z_max, self.h);
        (0..self.values.len()).map(move |k| z0 + h * k as f64)
    }

    /// Linear interpolation with ±m_β extension beyond the window.
    pub fn sample(&self, z: f64) -> f64 {
        if z <= -self.z_max {
            return self.m_beta;
        }
        if z >= self.z_max {
            return -self.m_beta;
        }
        let t = (z + self.z_max) / self.h;
        let k = (t.floor() as usize).min(self.values.len() - 2);
        let frac = t - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }
}

/// One sweep of the fixed-point map m <- tanh(β (J̄ ⋆ m)) with ±m_β padding.
/// Public so monotonicity of the raw iteration can be exercised directly.
pub fn fixed_point_step(
    values: &[f64],
    kernel: &MarginalKernel,
    beta: f64,
    m_beta: f64,
) -> Vec<f64> {
    let r = kernel.range_cells;
    let pad = |i: i64| -> f64 {
        if i < 0 {
            m_beta
        } else if i >= values.len() as i64 {
            -m_beta
        } else {
            values[i as usize]
        }
    };
    (0..values.len() as i64)
        .map(|k| {
            let mut acc = 0.0;
            for (j, w) in kernel.weights.iter().enumerate() {
                let off = j as i64 - r as i64;
                acc += w * pad(k - off);
            }
            (beta * kernel.h * acc).tanh()
        })
        .collect()
}

fn zero_crossing(values: &[f64], z0: f64, h: f64) -> Option<f64> {
    for k in 0..values.len() - 1 {
        let (a, b) = (values[k], values[k + 1]);
        if a == 0.0 {
            return Some(z0 + h * k as f64);
        }
        if a > 0.0 && b < 0.0 {
            return Some(z0 + h * (k as f64 + a / (a - b)));
        }
    }
    None
}

/// Shift the profile by `shift` via linear interpolation, padding with ±m_β.
fn recenter(values: &[f64], shift: f64, m_beta: f64) -> Vec<f64> {
    if shift == 0.0 {
        return values.to_vec();
    }
    let n = values.len();
    let at = |i: i64| -> f64 {
        if i < 0 {
            m_beta
        } else if i >= n as i64 {
            -m_beta
        } else {
            values[i as usize]
        }
    };
    (0..n)
        .map(|k| {
            let t = k as f64 + shift;
            let base = t.floor();
            let frac = t - base;
            at(base as i64) * (1.0 - frac) + at(base as i64 + 1) * frac
        })
        .collect()
}

pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iters: 50_000,
        }
    }
}

/// Solve the front equation on [-Z, Z] with n_per_unit grid points per
/// kernel range (h = 1/n_per_unit). Defaults: Z = 12, n_per_unit = 32.
pub fn solve_instanton(
    beta: f64,
    spec: &KernelSpec,
    z_max: f64,
    n_per_unit: u32,
    opts: &SolveOptions,
) -> Result<InstantonProfile, InstantonError> {
    if !(beta > 1.0) {
        return Err(InstantonError::NoFront(beta));
    }
    if z_max < 8.0 {
        return Err(InstantonError::WindowTooSmall(z_max));
    }
    if n_per_unit < 16 {
        return Err(InstantonError::TooCoarse(1.0 / n_per_unit as f64));
    }
    let well = DoubleWell::new(beta)?;
    let m_beta = well.m_beta;
    let kernel = marginal_kernel(spec, n_per_unit)?;
    let h = kernel.h;
    let half = (z_max * n_per_unit as f64).round() as usize;
    let count = 2 * half + 1;
    let z0 = -(half as f64) * h;
    let z_max = -z0;

    let mut m: Vec<f64> = (0..count)
        .map(|k| -m_beta * ((z0 + h * k as f64).signum()))
        .collect();
    m[half] = 0.0;

    let mut residual = f64::INFINITY;
    let mut iters = 0;
    for it in 1..=opts.max_iters {
        let mut next = fixed_point_step(&m, &kernel, beta, m_beta);
        if let Some(zc) = zero_crossing(&next, z0, h) {
            let shift = zc / h;
            if shift.abs() > 1e-13 {
                next = recenter(&next, shift, m_beta);
            }
        }
        residual = m
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        m = next;
        iters = it;
        if residual < opts.tol {
            break;
        }
    }
    if residual >= opts.tol {
        return Err(InstantonError::NotConverged { iters, residual });
    }
    let tail = (m[0] - m_beta).abs().max((m[count - 1] + m_beta).abs());
    if tail > 1e-8 {
        return Err(InstantonError::TailNotSettled(tail));
    }
    let surface_tension = front_energy(&m, &kernel, beta, m_beta)?;
    Ok(InstantonProfile {
        beta,
        spec: *spec,
        m_beta,
        z_max,
        h,
        values: m,
        kernel,
        surface_tension,
        iterations: iters,
        residual,
    })
}

/// (pst)-energy of an arbitrary windowed profile, with ±m_β continuation:
/// h Σ F(m_k) + (1/4) h² Σ_{k,j} w_j (m_k - m_{k-j})², the pair sum running
/// over every pair with at least one index inside the window.
pub fn front_energy(
    values: &[f64],
    kernel: &MarginalKernel,
    beta: f64,
    m_beta: f64,
) -> Result<f64, InstantonError> {
    let well = DoubleWell::new(beta)?;
    let h = kernel.h;
    let r = kernel.range_cells as i64;
    let n = values.len() as i64;
    let at = |i: i64| -> f64 {
        if i < 0 {
            m_beta
        } else if i >= n {
            -m_beta
        } else {
            values[i as usize]
        }
    };
    let local = h * compensated_sum(values.iter().map(|&v| well.f(v)));
    let mut pair_terms = Vec::with_capacity(((n + 2 * r) * (2 * r + 1)) as usize);
    for k in -r..n + r {
        for (j, w) in kernel.weights.iter().enumerate() {
            let off = j as i64 - r;
            let d = at(k) - at(k - off);
            pair_terms.push(w * d * d);
        }
    }
    let interaction = 0.25 * h * h * compensated_sum(pair_terms);
    Ok(local + interaction)
}

/// Surface tension of a converged profile (its (pst)-energy).
pub fn surface_tension(profile: &InstantonProfile) -> Result<f64, InstantonError> {
    front_energy(&profile.values, &profile.kernel, profile.beta, profile.m_beta)
}

/// CSV rows "z,m" followed by a trailing "# S=<value>" comment.
pub fn export_csv<W: std::io::Write>(
    w: &mut W,
    profile: &InstantonProfile,
) -> std::io::Result<()> {
    writeln!(w, "z,m")?;
    for (z, v) in profile.grid().zip(&profile.values) {
        writeln!(w, "{:.16e},{:.16e}", z, v)?;
    }
    writeln!(w, "# S={:.16e}", profile.surface_tension)?;
    Ok(())
}
