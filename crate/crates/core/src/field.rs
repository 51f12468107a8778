//! Discretized order-parameter fields on the torus and the energy surface.
//!
//! A field stores cell-center samples of m: T_L -> [-1, 1], row-major, with
//! midpoint quadrature for every integral. Energies come in two algebraically
//! equivalent forms:
//!
//!   raw GLP:  ∫ f(m) - (1/2) ∬ m J m,      f = -s/β
//!   tilted:   ∫ F(m) + (1/4) ∬ (m(x)-m(y))² J(x-y)
//!
//! With the unit-mass discrete kernel, raw - tilted = L^d (f(m_β) - m_β²/2)
//! exactly, independent of the field.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::kernel::{convolve, DiscreteKernel, KernelError};
use crate::numeric::compensated_sum;
use crate::thermo::{DoubleWell, ThermoError};

/// Clip band: admissible fields keep |m| <= 1 - EPS_BAND so F' stays finite.
pub const EPS_BAND: f64 = 1e-7;

const FILE_MAGIC: &[u8; 4] = b"GLPF";
const FILE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("unsupported dimension d = {0} (need 1 <= d <= 3)")]
    BadDimension(usize),
    #[error("torus side L = {0} too small (need L > 2)")]
    BadLength(f64),
    #[error("value count {got} does not match N^d = {want}")]
    BadShape { got: usize, want: usize },
    #[error("non-finite value at cell {0}")]
    NonFinite(usize),
    #[error("field saturated at cell {idx}: |{value}| >= 1")]
    Saturated { idx: usize, value: f64 },
    #[error("field leaves the clip band at cell {idx}: |{value}| > 1 - {band}")]
    OutsideBand { idx: usize, value: f64, band: f64 },
    #[error("mean {mean} violates the zero-mean precondition (|mean| > {tol})")]
    NonzeroMean { mean: f64, tol: f64 },
    #[error("shifted value {0} outside the admissible range")]
    ShiftOutOfRange(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error("field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Full problem statement: dimension, temperature, torus and kernel choice.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    pub beta: f64,
    pub d: usize,
    pub l: f64,
    /// cells per axis
    pub n: usize,
    pub kernel: crate::kernel::KernelSpec,
}

impl ModelParams {
    pub fn new(
        beta: f64,
        d: usize,
        l: f64,
        n: usize,
        kernel: crate::kernel::KernelSpec,
    ) -> Result<Self, FieldError> {
        if d == 0 || d > 3 {
            return Err(FieldError::BadDimension(d));
        }
        if !(l > 2.0) {
            return Err(FieldError::BadLength(l));
        }
        let npu = n as f64 / l;
        if (npu - npu.round()).abs() > 1e-9 || npu.round() < 4.0 {
            return Err(FieldError::Format(format!(
                "N/L = {npu} must be an integer >= 4 (h <= 1/4, cells aligned to the kernel range)"
            )));
        }
        if kernel.d != d {
            return Err(FieldError::BadDimension(kernel.d));
        }
        Ok(Self { beta, d, l, n, kernel })
    }

    pub fn cells_per_unit(&self) -> u32 {
        (self.n as f64 / self.l).round() as u32
    }

    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn build_kernel(&self) -> Result<DiscreteKernel, KernelError> {
        crate::kernel::make_kernel(&self.kernel, self.cells_per_unit())
    }
}

/// Cell-center samples of the order parameter, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub d: usize,
    /// cells per axis
    pub n: usize,
    pub l: f64,
    pub values: Vec<f64>,
}

impl Field {
    pub fn uniform(d: usize, n: usize, l: f64, value: f64) -> Result<Self, FieldError> {
        Self::from_values(d, n, l, vec![value; n.pow(d as u32)])
    }

    pub fn from_values(d: usize, n: usize, l: f64, values: Vec<f64>) -> Result<Self, FieldError> {
        if d == 0 || d > 3 {
            return Err(FieldError::BadDimension(d));
        }
        if !(l > 2.0) {
            return Err(FieldError::BadLength(l));
        }
        let want = n.pow(d as u32);
        if values.len() != want {
            return Err(FieldError::BadShape {
                got: values.len(),
                want,
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(idx));
        }
        Ok(Self { d, n, l, values })
    }

    /// Same shape, new values; for internal plumbing that preserves shape.
    pub(crate) fn new_unchecked(d: usize, n: usize, l: f64, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n.pow(d as u32));
        Self { d, n, l, values }
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        Self::new_unchecked(self.d, self.n, self.l, values)
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Cell measure h^d.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    pub fn volume(&self) -> f64 {
        self.l.powi(self.d as i32)
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) / self.cells() as f64
    }

    /// Checks the clip-band invariant |m| <= 1 - EPS_BAND.
    pub fn check_admissible(&self) -> Result<(), FieldError> {
        for (idx, &v) in self.values.iter().enumerate() {
            if v.abs() > 1.0 - EPS_BAND {
                return Err(FieldError::OutsideBand {
                    idx,
                    value: v,
                    band: EPS_BAND,
                });
            }
        }
        Ok(())
    }

    fn check_unsaturated(&self) -> Result<(), FieldError> {
        for (idx, &v) in self.values.iter().enumerate() {
            if v.abs() >= 1.0 {
                return Err(FieldError::Saturated { idx, value: v });
            }
        }
        Ok(())
    }

    /// Decompose a linear index into per-axis coordinates.
    pub fn coords(&self, mut idx: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        for ax in (0..self.d).rev() {
            c[ax] = idx % self.n;
            idx /= self.n;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        let mut idx = 0usize;
        for ax in 0..self.d {
            idx = idx * self.n + coords[ax];
        }
        idx
    }

    /// Cyclic shift by whole cells along each axis.
    pub fn shifted(&self, shift: &[i64]) -> Field {
        let n = self.n as i64;
        let mut out = vec![0.0; self.cells()];
        for (i, slot) in out.iter_mut().enumerate() {
            let c = self.coords(i);
            let mut src = 0usize;
            for ax in 0..self.d {
                let s = (c[ax] as i64 - shift[ax]).rem_euclid(n) as usize;
                src = src * self.n + s;
            }
            *slot = self.values[src];
        }
        self.with_values(out)
    }

    /// Minimum-image distance between two cell centers.
    pub fn torus_distance(&self, a: &[usize], b: &[usize]) -> f64 {
        let h = self.h();
        let n = self.n as i64;
        let mut acc = 0.0;
        for ax in 0..self.d {
            let raw = (a[ax] as i64 - b[ax] as i64).rem_euclid(n);
            let wrapped = raw.min(n - raw) as f64 * h;
            acc += wrapped * wrapped;
        }
        acc.sqrt()
    }
}

/// Energy of one field, split into its contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// ∫ F(m)
    pub local: f64,
    /// (1/4) ∬ (m(x)-m(y))² J(x-y)
    pub interaction: f64,
    /// local + interaction
    pub total: f64,
    /// raw GLP form ∫ f(m) - (1/2) ∬ m J m
    pub glp_raw: f64,
}

/// Interaction energy (1/4)∬(m(x)-m(y))² J(x-y) via the quadratic form
/// (1/2)∫m² - (1/2)∫m·(J⋆m); nonnegative up to roundoff.
pub fn interaction_energy(field: &Field, kernel: &DiscreteKernel) -> Result<f64, FieldError> {
    let conv = convolve(kernel, field)?;
    Ok(interaction_from_conv(field, &conv))
}

fn interaction_from_conv(field: &Field, conv: &Field) -> f64 {
    let hv = field.cell_volume();
    let quad = compensated_sum(
        field
            .values
            .iter()
            .zip(&conv.values)
            .map(|(&m, &jm)| m * (m - jm)),
    );
    0.5 * hv * quad
}

/// Full energy breakdown of an admissible field.
pub fn glp_energy(
    field: &Field,
    kernel: &DiscreteKernel,
    beta: f64,
) -> Result<EnergyBreakdown, FieldError> {
    let well = DoubleWell::new(beta)?;
    field.check_unsaturated().ok(); // F is finite on [-1,1]; saturation only matters for F'
    let conv = convolve(kernel, field)?;
    Ok(energy_with_conv(field, &conv, &well))
}

pub(crate) fn energy_with_conv(field: &Field, conv: &Field, well: &DoubleWell) -> EnergyBreakdown {
    let hv = field.cell_volume();
    let local = hv * compensated_sum(field.values.iter().map(|&m| well.f(m)));
    let interaction = interaction_from_conv(field, conv);
    let raw_local = hv * compensated_sum(field.values.iter().map(|&m| well.f_local(m)));
    let cross = hv
        * compensated_sum(
            field
                .values
                .iter()
                .zip(&conv.values)
                .map(|(&m, &jm)| m * jm),
        );
    EnergyBreakdown {
        local,
        interaction,
        total: local + interaction,
        glp_raw: raw_local - 0.5 * cross,
    }
}

/// First variation of the tilted energy: F'(m) + m - J⋆m, scaled so that
/// d/dt total(m + t v) = <gradient, v> h^d at t = 0.
pub fn gradient(field: &Field, kernel: &DiscreteKernel, beta: f64) -> Result<Field, FieldError> {
    let well = DoubleWell::new(beta)?;
    field.check_unsaturated()?;
    let conv = convolve(kernel, field)?;
    Ok(gradient_with_conv(field, &conv, &well))
}

pub(crate) fn gradient_with_conv(field: &Field, conv: &Field, well: &DoubleWell) -> Field {
    let vals = field
        .values
        .iter()
        .zip(&conv.values)
        .map(|(&m, &jm)| well.f_prime(m) + m - jm)
        .collect();
    field.with_values(vals)
}

/// Shifted functional 𝒢(ω) = (1/4)∬(ω(x)-ω(y))²J + ∫G(ω) with
/// G(ω) = F(n+ω) - F(n) - F'(n)ω. Requires mean(ω) = 0 (to 1e-12) and
/// |n + ω| <= 1 - EPS_BAND; then ℱ(n+ω) - ℱ(n·1) = 𝒢(ω).
pub fn g_functional(
    omega: &Field,
    kernel: &DiscreteKernel,
    beta: f64,
    n: f64,
) -> Result<f64, FieldError> {
    let well = DoubleWell::new(beta)?;
    let mean = omega.mean();
    if mean.abs() > 1e-12 {
        return Err(FieldError::NonzeroMean {
            mean,
            tol: 1e-12,
        });
    }
    for (idx, &w) in omega.values.iter().enumerate() {
        let m = n + w;
        if m.abs() > 1.0 - EPS_BAND {
            return Err(FieldError::OutsideBand {
                idx,
                value: m,
                band: EPS_BAND,
            });
        }
    }
    let inter = interaction_energy(omega, kernel)?;
    let hv = omega.cell_volume();
    let local = hv * compensated_sum(omega.values.iter().map(|&w| well.tilted(w, n)));
    Ok(inter + local)
}

/// Binary field file: 32-byte header (magic "GLPF", version u32, d u32,
/// N u32, L f64, beta f64, little-endian) then N^d f64 values row-major.
pub fn save_field(path: &Path, field: &Field, beta: f64) -> Result<(), FieldError> {
    let mut buf = Vec::with_capacity(32 + 8 * field.cells());
    buf.extend_from_slice(FILE_MAGIC);
    buf.extend_from_slice(&FILE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(field.d as u32).to_le_bytes());
    buf.extend_from_slice(&(field.n as u32).to_le_bytes());
    buf.extend_from_slice(&field.l.to_le_bytes());
    buf.extend_from_slice(&beta.to_le_bytes());
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &buf)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<(Field, f64), FieldError> {
    let mut file = std::fs::File::open(path)?;
    let mut header = [0u8; 32];
    file.read_exact(&mut header)?;
    if &header[0..4] != FILE_MAGIC {
        return Err(FieldError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FILE_VERSION {
        return Err(FieldError::Format(format!("unsupported version {version}")));
    }
    let d = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let l = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let beta = f64::from_le_bytes(header[24..32].try_into().unwrap());
    let cells = n
        .checked_pow(d as u32)
        .ok_or_else(|| FieldError::Format("size overflow".into()))?;
    let mut data = Vec::with_capacity(cells * 8);
    file.read_to_end(&mut data)?;
    if data.len() != cells * 8 {
        return Err(FieldError::Format(format!(
            "payload {} bytes, expected {}",
            data.len(),
            cells * 8
        )));
    }
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((Field::from_values(d, n, l, values)?, beta))
}

/// CSV export: one "i,j,...,m" line per cell after a header row.
pub fn export_csv<W: Write>(w: &mut W, field: &Field) -> Result<(), FieldError> {
    let axes: Vec<String> = (0..field.d).map(|a| format!("i{a}")).collect();
    writeln!(w, "{},m", axes.join(","))?;
    for i in 0..field.cells() {
        let c = field.coords(i);
        for ax in 0..field.d {
            write!(w, "{},", c[ax])?;
        }
        writeln!(w, "{:.16e}", field.values[i])?;
    }
    Ok(())
}
