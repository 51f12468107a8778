//! Closed-form analytics of the volume-fraction ansatz.
//!
//! The excess magnetization above the low-density phase is split: a fraction
//! η goes into a round droplet, the rest is smeared over the background. The
//! reduced free energy per droplet-scale unit is
//!
//!   Φ(η) = η^{1-1/d} + C (1-η)²,
//!
//! where C collects surface tension S, compressibility χ and geometry. The
//! global minimizer jumps from η = 0 (no droplet) to η ≥ η⋆ = 2/(d+1) as C
//! crosses C⋆ = (1/d)((d+1)/2)^{(d+1)/d}; on the critical curve
//! n = -m_β + K L^{-d/(d+1)} this happens at K = K⋆.

use thiserror::Error;

use crate::numeric::bisect;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReducedError {
    #[error("dimension d = {0} unsupported (need d >= 1)")]
    BadDimension(usize),
    #[error("mean n = {n} outside the phase gap (-{m_beta}, {m_beta})")]
    OutsidePhaseGap { n: f64, m_beta: f64 },
    #[error("parameter {name} = {value} must be positive")]
    NonPositive { name: &'static str, value: f64 },
}

fn check_positive(name: &'static str, value: f64) -> Result<(), ReducedError> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(ReducedError::NonPositive { name, value })
    }
}

/// Surface area of the unit sphere in R^d: σ_d = 2 π^{d/2} / Γ(d/2).
pub fn sigma_d(d: usize) -> Result<f64, ReducedError> {
    if d == 0 {
        return Err(ReducedError::BadDimension(d));
    }
    let pi = std::f64::consts::PI;
    // Γ(d/2) for integer d
    let gamma_half = if d % 2 == 0 {
        (1..d / 2).map(|k| k as f64).product::<f64>()
    } else {
        let mut g = pi.sqrt();
        for i in 1..=(d - 1) / 2 {
            g *= i as f64 - 0.5;
        }
        g
    };
    Ok(2.0 * pi.powf(d as f64 / 2.0) / gamma_half)
}

/// Volume of the unit ball, σ_d / d.
pub fn unit_ball_volume(d: usize) -> Result<f64, ReducedError> {
    Ok(sigma_d(d)? / d as f64)
}

/// Torus geometry: dimension, side length, and the sphere-area constant.
#[derive(Debug, Clone, Copy)]
pub struct GeometryParams {
    pub d: usize,
    pub l: f64,
    pub sigma_d: f64,
}

impl GeometryParams {
    pub fn new(d: usize, l: f64) -> Result<Self, ReducedError> {
        if !(l > 2.0) {
            return Err(ReducedError::NonPositive {
                name: "L - 2",
                value: l - 2.0,
            });
        }
        Ok(Self {
            d,
            l,
            sigma_d: sigma_d(d)?,
        })
    }
}

/// Equimolar volume and radius: the droplet absorbing the whole excess at
/// sharp ±m_β values. D0 = ((n + m_β)/(2 m_β)) L^d, (σ_d/d) r0^d = D0.
pub fn equimolar(n: f64, l: f64, d: usize, m_beta: f64) -> Result<(f64, f64), ReducedError> {
    if !(n > -m_beta && n < m_beta) {
        return Err(ReducedError::OutsidePhaseGap { n, m_beta });
    }
    let sd = sigma_d(d)?;
    let d0 = (n + m_beta) / (2.0 * m_beta) * l.powi(d as i32);
    let r0 = (d as f64 * d0 / sd).powf(1.0 / d as f64);
    Ok((d0, r0))
}

/// Bulk/surface ratio C(D0, L) of the reduced model.
pub fn c_of_d0(
    d0: f64,
    l: f64,
    d: usize,
    m_beta: f64,
    chi: f64,
    s: f64,
) -> Result<f64, ReducedError> {
    check_positive("chi", chi)?;
    check_positive("S", s)?;
    if d0 < 0.0 {
        return Err(ReducedError::NonPositive { name: "D0", value: d0 });
    }
    let sd = sigma_d(d)?;
    let df = d as f64;
    let gap = 2.0 * m_beta;
    Ok(gap * gap / (2.0 * df * chi * s)
        * (df / sd).powf(1.0 / df)
        * d0.powf(1.0 + 1.0 / df)
        / l.powi(d as i32))
}

/// C(K): the same ratio on the critical curve n = -m_β + K L^{-d/(d+1)},
/// where the L dependence cancels.
pub fn c_of_k(k: f64, d: usize, m_beta: f64, chi: f64, s: f64) -> Result<f64, ReducedError> {
    check_positive("chi", chi)?;
    check_positive("S", s)?;
    if k < 0.0 {
        return Err(ReducedError::NonPositive { name: "K", value: k });
    }
    let sd = sigma_d(d)?;
    let df = d as f64;
    Ok(2.0 * m_beta * m_beta / (df * chi * s)
        * (df / sd).powf(1.0 / df)
        * (k / (2.0 * m_beta)).powf(1.0 + 1.0 / df))
}

/// Critical ratio C⋆ = (1/d)((d+1)/2)^{(d+1)/d}.
pub fn c_star(d: usize) -> Result<f64, ReducedError> {
    if d == 0 {
        return Err(ReducedError::BadDimension(d));
    }
    let df = d as f64;
    Ok((1.0 / df) * ((df + 1.0) / 2.0).powf((df + 1.0) / df))
}

/// Universal minimal droplet fraction η⋆ = 2/(d+1).
pub fn eta_star(d: usize) -> Result<f64, ReducedError> {
    if d == 0 {
        return Err(ReducedError::BadDimension(d));
    }
    Ok(2.0 / (d as f64 + 1.0))
}

fn surface_term(eta: f64, d: usize) -> f64 {
    if eta == 0.0 {
        0.0
    } else {
        eta.powf(1.0 - 1.0 / d as f64)
    }
}

/// Reduced free energy Φ(η) = η^{1-1/d} + C (1-η)², normalized form.
pub fn phi(eta: f64, c: f64, d: usize) -> f64 {
    surface_term(eta, d) + c * (1.0 - eta) * (1.0 - eta)
}

/// Result of minimizing Φ over [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PhiMinimum {
    /// The droplet branch value on ties; 0 when no droplet forms.
    pub eta_c: f64,
    pub phi_min: f64,
    /// One entry, or two (0 and the interior point) at the tie C = C⋆.
    pub minimizers: Vec<f64>,
}

/// Global minimum of Φ on [0, 1].
///
/// Φ'(η) = (1-1/d) η^{-1/d} - 2C(1-η) is convex increasing past its single
/// inflection, so the interior stationary minimum (when it exists) is
/// bracketed between the inflection point and 1 and found by bisection.
pub fn minimize_phi(c: f64, d: usize) -> Result<PhiMinimum, ReducedError> {
    if d == 0 {
        return Err(ReducedError::BadDimension(d));
    }
    if c < 0.0 {
        return Err(ReducedError::NonPositive { name: "C", value: c });
    }
    let tie_tol = 1e-12 * c.max(1.0);
    if d == 1 {
        // Surface cost is size-independent in d = 1: Phi = 1 + C(1-eta)^2
        // for eta > 0, so the interior minimum sits at eta = 1.
        let interior = 1.0;
        return Ok(pick(c, interior, 1.0, tie_tol));
    }
    let df = d as f64;
    if c == 0.0 {
        return Ok(PhiMinimum {
            eta_c: 0.0,
            phi_min: 0.0,
            minimizers: vec![0.0],
        });
    }
    let dphi = |eta: f64| (1.0 - 1.0 / df) * eta.powf(-1.0 / df) - 2.0 * c * (1.0 - eta);
    // Phi'' = 0 at eta_infl; Phi' is minimal there.
    let eta_infl = ((df - 1.0) / (2.0 * c * df * df)).powf(df / (df + 1.0));
    if eta_infl >= 1.0 || dphi(eta_infl) >= 0.0 {
        return Ok(PhiMinimum {
            eta_c: 0.0,
            phi_min: c,
            minimizers: vec![0.0],
        });
    }
    let mut eta_int = bisect(dphi, eta_infl, 1.0, 1e-16);
    // Newton polish on the stationarity equation.
    for _ in 0..3 {
        let d2 = (1.0 / df) * (1.0 - 1.0 / df) * eta_int.powf(-1.0 / df - 1.0) + 2.0 * c;
        eta_int = (eta_int - dphi(eta_int) / d2).clamp(eta_infl, 1.0);
    }
    Ok(pick(c, eta_int, phi(eta_int, c, d), tie_tol))
}

fn pick(phi0: f64, eta_int: f64, phi_int: f64, tie_tol: f64) -> PhiMinimum {
    if (phi_int - phi0).abs() <= tie_tol {
        PhiMinimum {
            eta_c: eta_int,
            phi_min: phi_int,
            minimizers: vec![0.0, eta_int],
        }
    } else if phi_int < phi0 {
        PhiMinimum {
            eta_c: eta_int,
            phi_min: phi_int,
            minimizers: vec![eta_int],
        }
    } else {
        PhiMinimum {
            eta_c: 0.0,
            phi_min: phi0,
            minimizers: vec![0.0],
        }
    }
}

/// Critical excess amplitude K⋆: the unique K with C(K) = C⋆.
///
/// Solved from C(K) = C⋆ in closed form, which fixes the prefactor to
/// (d+1) m_β (χS/2m_β²)^{d/(d+1)} (σ_d/d)^{1/(d+1)}.
pub fn k_star(d: usize, m_beta: f64, chi: f64, s: f64) -> Result<f64, ReducedError> {
    check_positive("chi", chi)?;
    check_positive("S", s)?;
    let sd = sigma_d(d)?;
    let df = d as f64;
    Ok((df + 1.0)
        * m_beta
        * (chi * s / (2.0 * m_beta * m_beta)).powf(df / (df + 1.0))
        * (sd / df).powf(1.0 / (df + 1.0)))
}

/// Critical density curve n_c(L) = -m_β + K⋆ L^{-d/(d+1)}.
pub fn n_critical(l: f64, d: usize, m_beta: f64, chi: f64, s: f64) -> Result<f64, ReducedError> {
    let ks = k_star(d, m_beta, chi, s)?;
    Ok(mean_from_excess(ks, l, d, m_beta))
}

/// n = -m_β + K L^{-d/(d+1)} (the critical scaling parametrization).
pub fn mean_from_excess(k: f64, l: f64, d: usize, m_beta: f64) -> f64 {
    let df = d as f64;
    -m_beta + k * l.powf(-df / (df + 1.0))
}

/// K = (n + m_β) L^{d/(d+1)}.
pub fn excess_from_mean(n: f64, l: f64, d: usize, m_beta: f64) -> f64 {
    let df = d as f64;
    (n + m_beta) * l.powf(df / (df + 1.0))
}

/// Droplet-scale energy prefactor S σ_d (Kd / 2m_β σ_d)^{1-1/d}; multiplied
/// by Φ(η) it gives the L-normalized reduced-model energy of the fraction η.
pub fn scaling_prefactor(k: f64, d: usize, m_beta: f64, s: f64) -> Result<f64, ReducedError> {
    check_positive("K", k)?;
    check_positive("S", s)?;
    let sd = sigma_d(d)?;
    let df = d as f64;
    Ok(s * sd * (k * df / (2.0 * m_beta * sd)).powf(1.0 - 1.0 / df))
}

/// Reduced-model prediction for the constrained minimum free energy at
/// n = -m_β + K L^{-d/(d+1)}, leading order in L.
pub fn predicted_min_energy(
    k: f64,
    l: f64,
    d: usize,
    m_beta: f64,
    chi: f64,
    s: f64,
) -> Result<f64, ReducedError> {
    let df = d as f64;
    Ok(l.powf((df * df - df) / (df + 1.0)) * predicted_min_energy_limit(k, d, m_beta, chi, s)?)
}

/// The same prediction normalized by L^{(d²-d)/(d+1)} (its large-L limit).
pub fn predicted_min_energy_limit(
    k: f64,
    d: usize,
    m_beta: f64,
    chi: f64,
    s: f64,
) -> Result<f64, ReducedError> {
    let c = c_of_k(k, d, m_beta, chi, s)?;
    let phi_min = minimize_phi(c, d)?.phi_min;
    Ok(scaling_prefactor(k, d, m_beta, s)? * phi_min)
}

/// Reduced-model energy of holding the fraction η (not the minimum): the
/// prefactor times Φ(η; C(K)) times L^{(d²-d)/(d+1)}.
pub fn predicted_energy_at(
    eta: f64,
    k: f64,
    l: f64,
    d: usize,
    m_beta: f64,
    chi: f64,
    s: f64,
) -> Result<f64, ReducedError> {
    let df = d as f64;
    let c = c_of_k(k, d, m_beta, chi, s)?;
    Ok(l.powf((df * df - df) / (df + 1.0)) * scaling_prefactor(k, d, m_beta, s)? * phi(eta, c, d))
}

/// Reduced model bundle for one (n, L) problem.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub d0: f64,
    pub r0: f64,
    pub c: f64,
    pub s: f64,
    pub eta_c: f64,
    pub phi_min: f64,
}

impl ReducedModel {
    pub fn from_mean(
        n: f64,
        l: f64,
        d: usize,
        m_beta: f64,
        chi: f64,
        s: f64,
    ) -> Result<Self, ReducedError> {
        let (d0, r0) = equimolar(n, l, d, m_beta)?;
        let c = c_of_d0(d0, l, d, m_beta, chi, s)?;
        let min = minimize_phi(c, d)?;
        Ok(Self {
            d0,
            r0,
            c,
            s,
            eta_c: min.eta_c,
            phi_min: min.phi_min,
        })
    }
}
