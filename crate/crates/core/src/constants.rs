//! Derived-constants pipeline: from (β, d, kernel) to every scalar the
//! droplet predictions need.

use thiserror::Error;

use crate::instanton::{solve_instanton, InstantonError, InstantonProfile, SolveOptions};
use crate::kernel::KernelSpec;
use crate::reduced::{c_star, eta_star, k_star, mean_from_excess, ReducedError};
use crate::thermo::{DoubleWell, ThermoError};

#[derive(Debug, Error)]
pub enum ConstantsError {
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Instanton(#[from] InstantonError),
    #[error(transparent)]
    Reduced(#[from] ReducedError),
}

/// Everything downstream of one (β, d, kernel) choice.
#[derive(Debug, Clone)]
pub struct ModelConstants {
    pub beta: f64,
    pub d: usize,
    pub kernel: KernelSpec,
    pub m_beta: f64,
    pub chi: f64,
    pub surface_tension: f64,
    pub c_star: f64,
    pub eta_star: f64,
    pub k_star: f64,
    pub instanton: InstantonProfile,
}

impl ModelConstants {
    /// Runs the 1-D front solve (defaults Z = 12, h = 1/32) and assembles
    /// the critical constants.
    pub fn compute(beta: f64, kernel: KernelSpec) -> Result<Self, ConstantsError> {
        Self::compute_with(beta, kernel, 12.0, 32)
    }

    pub fn compute_with(
        beta: f64,
        kernel: KernelSpec,
        z_max: f64,
        n_per_unit: u32,
    ) -> Result<Self, ConstantsError> {
        let d = kernel.d;
        let well = DoubleWell::new(beta)?;
        let instanton = solve_instanton(beta, &kernel, z_max, n_per_unit, &SolveOptions::default())?;
        let s = instanton.surface_tension;
        let chi = well.chi();
        Ok(Self {
            beta,
            d,
            kernel,
            m_beta: well.m_beta,
            chi,
            surface_tension: s,
            c_star: c_star(d)?,
            eta_star: eta_star(d)?,
            k_star: k_star(d, well.m_beta, chi, s)?,
            instanton,
        })
    }

    /// Critical density curve value n_c(L) = -m_β + K⋆ L^{-d/(d+1)}.
    pub fn n_critical(&self, l: f64) -> f64 {
        mean_from_excess(self.k_star, l, self.d, self.m_beta)
    }
}
