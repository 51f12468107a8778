//! Interaction kernels J, their 1-D marginals J̄, and periodic stencils.
//!
//! Admissible kernels are radial, supported in the unit ball, bounded below
//! on |x| <= 1/2, and integrate to 1. The discrete stencil samples the radial
//! profile at cell centers and is renormalized so its discrete mass h^d Σw
//! is exactly 1; that makes the algebraic identity between the raw GLP form
//! and the tilted form hold exactly on the grid.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::fft;
use crate::field::Field;
use crate::numeric::{adaptive_simpson, compensated_sum};
use crate::reduced::sigma_d;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("grid spacing h = {0} too coarse: need h <= 1/4 (>= 4 cells per kernel range)")]
    Resolution(f64),
    #[error("unsupported dimension d = {0} (need 1 <= d <= 3)")]
    BadDimension(usize),
    #[error("kernel/field mismatch: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// Normalized indicator of the unit ball: J = (d/σ_d) 1_{|x| <= 1}.
    Indicator,
    /// Smooth bump A (1 + cos π|x|)/2 on |x| <= 1, A fixed by unit mass.
    CosineBump,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Indicator => "indicator",
            KernelFamily::CosineBump => "bump",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "indicator" => Some(KernelFamily::Indicator),
            "bump" | "cosine-bump" => Some(KernelFamily::CosineBump),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub d: usize,
    amplitude: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, d: usize) -> Result<Self, KernelError> {
        if d == 0 || d > 3 {
            return Err(KernelError::BadDimension(d));
        }
        let sd = sigma_d(d).expect("validated dimension");
        let amplitude = match family {
            KernelFamily::Indicator => d as f64 / sd,
            KernelFamily::CosineBump => {
                let df = d as f64;
                let mass =
                    adaptive_simpson(&|r: f64| bump_profile(r) * r.powf(df - 1.0), 0.0, 1.0, 1e-14);
                1.0 / (sd * mass)
            }
        };
        Ok(Self {
            family,
            d,
            amplitude,
        })
    }

    fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Normalized radial profile J(r); zero for r > 1.
    pub fn radial(&self, r: f64) -> f64 {
        if r > 1.0 {
            return 0.0;
        }
        match self.family {
            KernelFamily::Indicator => self.amplitude(),
            KernelFamily::CosineBump => self.amplitude() * bump_profile(r),
        }
    }

    /// Lower bound a = J(1/2) > 0 on the half-range ball.
    pub fn lower_bound(&self) -> f64 {
        self.radial(0.5)
    }
}

fn bump_profile(r: f64) -> f64 {
    0.5 * (1.0 + (std::f64::consts::PI * r).cos())
}

/// 1-D marginal J̄(z) = ∫_{R^{d-1}} J(y, z) dy; even, supported on [-1, 1],
/// unit mass. Closed form for the indicator family, adaptive quadrature for
/// the bump.
pub fn jbar(spec: &KernelSpec, z: f64) -> f64 {
    let z = z.abs();
    if z >= 1.0 {
        return 0.0;
    }
    let d = spec.d;
    if d == 1 {
        return spec.radial(z);
    }
    let s = (1.0 - z * z).sqrt();
    match spec.family {
        KernelFamily::Indicator => {
            // chord volume: J * vol_{d-1}(ball of radius sqrt(1-z^2))
            let vol = sigma_d(d - 1).expect("validated") / (d as f64 - 1.0) * s.powi(d as i32 - 1);
            spec.radial(0.0) * vol
        }
        KernelFamily::CosineBump => {
            let sd1 = sigma_d(d - 1).expect("validated");
            let f = |rho: f64| {
                let r = (rho * rho + z * z).sqrt();
                spec.radial(r) * rho.powi(d as i32 - 2)
            };
            sd1 * adaptive_simpson(&f, 0.0, s, 1e-13)
        }
    }
}

/// J̄ sampled on a 1-D grid with exact discrete unit mass; feeds the
/// instanton solver and the planar-front energies.
#[derive(Debug, Clone)]
pub struct MarginalKernel {
    pub h: f64,
    /// weights at offsets -r..=r, indexed by j + r
    pub weights: Vec<f64>,
    pub range_cells: usize,
}

pub fn marginal_kernel(spec: &KernelSpec, n_per_unit: u32) -> Result<MarginalKernel, KernelError> {
    if n_per_unit < 4 {
        return Err(KernelError::Resolution(1.0 / n_per_unit as f64));
    }
    let h = 1.0 / n_per_unit as f64;
    let r = n_per_unit as usize;
    let mut weights: Vec<f64> = (-(r as i64)..=r as i64)
        .map(|j| jbar(spec, j as f64 * h))
        .collect();
    renormalize(&mut weights, h, r);
    Ok(MarginalKernel {
        h,
        weights,
        range_cells: r,
    })
}

/// Rescale to unit discrete mass, then pin the center weight so the
/// compensated sum h^d Σ w is exactly 1.
fn renormalize(weights: &mut [f64], cell_measure: f64, center: usize) -> f64 {
    let raw = compensated_sum(weights.iter().map(|&w| w * cell_measure));
    for w in weights.iter_mut() {
        *w /= raw;
    }
    let mass = compensated_sum(weights.iter().map(|&w| w * cell_measure));
    weights[center] += (1.0 - mass) / cell_measure;
    raw
}

/// Periodic convolution stencil: nonnegative weights on grid offsets within
/// the unit radius, discrete mass exactly 1.
#[derive(Debug)]
pub struct DiscreteKernel {
    pub spec: KernelSpec,
    pub h: f64,
    pub radius_cells: usize,
    /// nonzero (offset, weight) pairs; offsets in cells, |offset| h <= 1
    entries: Vec<([i64; 3], f64)>,
    /// discrete mass before renormalization (continuum-vs-grid correction)
    pub raw_mass: f64,
    spectra: RwLock<HashMap<usize, Arc<Vec<Complex64>>>>,
}

impl Clone for DiscreteKernel {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec,
            h: self.h,
            radius_cells: self.radius_cells,
            entries: self.entries.clone(),
            raw_mass: self.raw_mass,
            spectra: RwLock::new(HashMap::new()),
        }
    }
}

/// Samples the radial profile at cell centers and renormalizes to exact
/// discrete unit mass.
pub fn make_kernel(spec: &KernelSpec, n_per_unit: u32) -> Result<DiscreteKernel, KernelError> {
    if n_per_unit < 4 {
        return Err(KernelError::Resolution(1.0 / n_per_unit as f64));
    }
    let d = spec.d;
    let h = 1.0 / n_per_unit as f64;
    let r = n_per_unit as i64;
    let side = (2 * r + 1) as usize;
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    let mut center_idx = 0usize;
    let total = side.pow(d as u32);
    for lin in 0..total {
        let mut rem = lin;
        let mut off = [0i64; 3];
        for ax in (0..d).rev() {
            off[ax] = (rem % side) as i64 - r;
            rem /= side;
        }
        let dist = (off[..d].iter().map(|&o| (o * o) as f64).sum::<f64>()).sqrt() * h;
        if dist > 1.0 {
            continue;
        }
        let w = spec.radial(dist);
        if w > 0.0 {
            if off[..d].iter().all(|&o| o == 0) {
                center_idx = weights.len();
            }
            offsets.push(off);
            weights.push(w);
        }
    }
    let raw_mass = renormalize(&mut weights, h.powi(d as i32), center_idx);
    let entries = offsets.into_iter().zip(weights).collect();
    Ok(DiscreteKernel {
        spec: *spec,
        h,
        radius_cells: n_per_unit as usize,
        entries,
        raw_mass,
        spectra: RwLock::new(HashMap::new()),
    })
}

impl DiscreteKernel {
    pub fn d(&self) -> usize {
        self.spec.d
    }

    /// Discrete mass h^d Σ w (exactly 1 after construction).
    pub fn discrete_mass(&self) -> f64 {
        let hm = self.h.powi(self.d() as i32);
        compensated_sum(self.entries.iter().map(|(_, w)| w * hm))
    }

    pub fn entries(&self) -> &[([i64; 3], f64)] {
        &self.entries
    }

    /// Marginal of the stencil along the last axis: transverse sums times
    /// h^{d-1}. Matches the quadrature J̄ to O(h^2) for smooth kernels.
    pub fn stencil_marginal(&self) -> Vec<f64> {
        let r = self.radius_cells as i64;
        let d = self.d();
        let mut out = vec![0.0; (2 * r + 1) as usize];
        let hm = self.h.powi(d as i32 - 1);
        for (off, w) in &self.entries {
            out[(off[0] + r) as usize] += w * hm;
        }
        out
    }

    fn check_compatible(&self, field: &Field) -> Result<(), KernelError> {
        if field.d != self.d() {
            return Err(KernelError::Mismatch(format!(
                "kernel d = {} vs field d = {}",
                self.d(),
                field.d
            )));
        }
        let hf = field.h();
        if (hf - self.h).abs() > 1e-12 * self.h {
            return Err(KernelError::Mismatch(format!(
                "kernel spacing {} vs field spacing {}",
                self.h, hf
            )));
        }
        Ok(())
    }

    fn spectrum(&self, n: usize) -> Arc<Vec<Complex64>> {
        if let Some(s) = self.spectra.read().unwrap().get(&n) {
            return s.clone();
        }
        let d = self.d();
        let hm = self.h.powi(d as i32);
        let mut grid = vec![0.0f64; n.pow(d as u32)];
        for (off, w) in &self.entries {
            let mut idx = 0usize;
            for ax in 0..d {
                let wrapped = off[ax].rem_euclid(n as i64) as usize;
                idx = idx * n + wrapped;
            }
            grid[idx] += w * hm;
        }
        let spec = Arc::new(fft::forward_real(&grid, d, n));
        self.spectra.write().unwrap().insert(n, spec.clone());
        spec
    }
}

/// (J ⋆ m) on the torus. Uses the spectral path except on tiny grids; both
/// paths agree to better than 1e-12 and the direct path stays available as
/// an oracle.
pub fn convolve(kernel: &DiscreteKernel, field: &Field) -> Result<Field, KernelError> {
    kernel.check_compatible(field)?;
    if field.cells() <= 4096 {
        convolve_direct(kernel, field)
    } else {
        convolve_fft(kernel, field)
    }
}

/// Direct stencil summation, O(cells × stencil).
pub fn convolve_direct(kernel: &DiscreteKernel, field: &Field) -> Result<Field, KernelError> {
    kernel.check_compatible(field)?;
    let d = field.d;
    let n = field.n as i64;
    let hm = kernel.h.powi(d as i32);
    let mut out = vec![0.0f64; field.cells()];
    let mut coords = [0i64; 3];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut rem = i;
        for ax in (0..d).rev() {
            coords[ax] = (rem % field.n) as i64;
            rem /= field.n;
        }
        let mut acc = 0.0;
        for (off, w) in &kernel.entries {
            let mut idx = 0usize;
            for ax in 0..d {
                let c = (coords[ax] - off[ax]).rem_euclid(n) as usize;
                idx = idx * field.n + c;
            }
            acc += w * field.values[idx];
        }
        *slot = acc * hm;
    }
    Ok(field.with_values(out))
}

/// Spectral path: cyclic FFT convolution.
pub fn convolve_fft(kernel: &DiscreteKernel, field: &Field) -> Result<Field, KernelError> {
    kernel.check_compatible(field)?;
    let spec = kernel.spectrum(field.n);
    let mut fs = fft::forward_real(&field.values, field.d, field.n);
    let out = fft::convolve_spectra(&mut fs, &spec, field.d, field.n);
    Ok(field.with_values(out))
}
