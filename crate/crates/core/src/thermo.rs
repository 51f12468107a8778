//! Scalar thermodynamics of the local double-well free energy.
//!
//! The local free energy is f(m) = -s(m)/β with the lattice-gas entropy
//!
//!   s(m) = -((1-m)/2) log((1-m)/2) - ((1+m)/2) log((1+m)/2),
//!
//! and the tilted double well
//!
//!   F(m) = [-s(m)/β - m²/2] - [-s(m_β)/β - m_β²/2],
//!
//! which is nonnegative and vanishes exactly at ±m_β, the positive root of
//! m = tanh(βm) (β > 1). Derivatives carry the 1/β factor consistently:
//! F'(m) = atanh(m)/β - m, F''(m) = 1/(β(1-m²)) - 1.
//!
//! The tilted potential G(ω) = F(n+ω) - F(n) - F'(n)ω drives the droplet
//! truncation map: for n between -m_β and the spinodal -√(1-1/β), G has a
//! single negative dip to the right of 0, bottoming at ω⋆.

use thiserror::Error;

use crate::numeric::bisect;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermoError {
    #[error("magnetization {0} outside [-1, 1]")]
    OutOfDomain(f64),
    #[error("derivative undefined at saturation |m| = 1 (m = {0})")]
    Saturated(f64),
    #[error("no double well: beta = {0} (requires beta > 1)")]
    NoDoubleWell(f64),
    #[error("invalid beta = {0} (requires beta > 0)")]
    InvalidBeta(f64),
    #[error("invalid kappa = {0}: requires 0 < kappa < m_beta")]
    InvalidKappa(f64),
    #[error("F'' not positive at h = {h}: level inside the spinodal region")]
    ConvexityLoss { h: f64 },
    #[error("n = {n} outside the dip regime ({lo} < n < {hi}): tilted potential has no droplet dip")]
    NoDip { n: f64, lo: f64, hi: f64 },
    #[error("tilted potential still negative at saturation (delta = {delta}): omega_plus undefined")]
    DipReachesSaturation { delta: f64 },
    #[error("root finder did not reach requested residual")]
    RootFind,
}

/// Inverse temperature; the droplet regime additionally needs `beta > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoParams {
    pub beta: f64,
}

impl ThermoParams {
    pub fn new(beta: f64) -> Result<Self, ThermoError> {
        if !(beta > 0.0) {
            return Err(ThermoError::InvalidBeta(beta));
        }
        Ok(Self { beta })
    }
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Lattice-gas entropy s(m); endpoints evaluate by the continuous limit.
pub fn entropy(m: f64) -> Result<f64, ThermoError> {
    if !(-1.0..=1.0).contains(&m) {
        return Err(ThermoError::OutOfDomain(m));
    }
    Ok(entropy_unchecked(m))
}

pub(crate) fn entropy_unchecked(m: f64) -> f64 {
    -xlogx((1.0 - m) / 2.0) - xlogx((1.0 + m) / 2.0)
}

/// Positive fixed point of m = tanh(βm), |residual| < 1e-13.
pub fn solve_m_beta(beta: f64) -> Result<f64, ThermoError> {
    if !(beta > 1.0) {
        return Err(ThermoError::NoDoubleWell(beta));
    }
    // m - tanh(beta m) is negative near 0+ and positive at 1: one sign change.
    let g = |m: f64| m - (beta * m).tanh();
    let mut m = bisect(g, 1e-300, 1.0, 1e-13);
    for _ in 0..3 {
        let t = (beta * m).tanh();
        let dg = 1.0 - beta * (1.0 - t * t);
        if dg.abs() > 1e-12 {
            let step = (m - t) / dg;
            if (m - step) > 0.0 && (m - step) < 1.0 {
                m -= step;
            }
        }
    }
    if (m - (beta * m).tanh()).abs() < 1e-13 {
        Ok(m)
    } else {
        Err(ThermoError::RootFind)
    }
}

/// Double well F with its equilibrium data precomputed. The hot-path
/// evaluators skip domain checks; energy loops guarantee admissible values.
#[derive(Debug, Clone, Copy)]
pub struct DoubleWell {
    pub beta: f64,
    pub m_beta: f64,
    /// f(m_β) - m_β²/2, the tilt subtracted so F(±m_β) = 0.
    tilt: f64,
}

impl DoubleWell {
    pub fn new(beta: f64) -> Result<Self, ThermoError> {
        let m_beta = solve_m_beta(beta)?;
        let tilt = -entropy_unchecked(m_beta) / beta - 0.5 * m_beta * m_beta;
        Ok(Self { beta, m_beta, tilt })
    }

    /// F(m) for |m| <= 1.
    #[inline]
    pub fn f(&self, m: f64) -> f64 {
        debug_assert!(m.abs() <= 1.0);
        (-entropy_unchecked(m) / self.beta - 0.5 * m * m) - self.tilt
    }

    /// f(m) = -s(m)/β, the untitled local free energy of the GLP form.
    #[inline]
    pub fn f_local(&self, m: f64) -> f64 {
        -entropy_unchecked(m) / self.beta
    }

    /// F'(m) = atanh(m)/β - m, |m| < 1.
    #[inline]
    pub fn f_prime(&self, m: f64) -> f64 {
        debug_assert!(m.abs() < 1.0);
        m.atanh() / self.beta - m
    }

    /// F''(m) = 1/(β(1-m²)) - 1.
    #[inline]
    pub fn f_double_prime(&self, m: f64) -> f64 {
        debug_assert!(m.abs() < 1.0);
        1.0 / (self.beta * (1.0 - m * m)) - 1.0
    }

    /// Compressibility χ = 1/F''(m_β).
    pub fn chi(&self) -> f64 {
        1.0 / self.f_double_prime(self.m_beta)
    }

    /// Spinodal magnetization √(1 - 1/β): F'' > 0 only for |m| above it.
    pub fn spinodal(&self) -> f64 {
        (1.0 - 1.0 / self.beta).sqrt()
    }

    /// Constant offset L^d·(f(m_β) - m_β²/2) between the raw GLP energy and
    /// the tilted form, per unit volume.
    pub fn glp_offset_density(&self) -> f64 {
        self.tilt
    }

    /// G(ω) = F(n+ω) - F(n) - F'(n)ω.
    #[inline]
    pub fn tilted(&self, omega: f64, n: f64) -> f64 {
        self.f(n + omega) - self.f(n) - self.f_prime(n) * omega
    }
}

/// Local excess free energy F(m); F(±m_β) = 0.
pub fn free_energy(m: f64, beta: f64) -> Result<f64, ThermoError> {
    if !(-1.0..=1.0).contains(&m) {
        return Err(ThermoError::OutOfDomain(m));
    }
    Ok(DoubleWell::new(beta)?.f(m))
}

/// F'(m) = (1/2β)log((1+m)/(1-m)) - m.
pub fn free_energy_prime(m: f64, beta: f64) -> Result<f64, ThermoError> {
    if !(beta > 0.0) {
        return Err(ThermoError::InvalidBeta(beta));
    }
    if m.abs() >= 1.0 {
        return Err(ThermoError::Saturated(m));
    }
    Ok(m.atanh() / beta - m)
}

/// F''(m) = 1/(β(1-m²)) - 1.
pub fn free_energy_double_prime(m: f64, beta: f64) -> Result<f64, ThermoError> {
    if !(beta > 0.0) {
        return Err(ThermoError::InvalidBeta(beta));
    }
    if m.abs() >= 1.0 {
        return Err(ThermoError::Saturated(m));
    }
    Ok(1.0 / (beta * (1.0 - m * m)) - 1.0)
}

/// Compressibility χ = 1/F''(m_β) (> 0 for β > 1).
pub fn chi(beta: f64) -> Result<f64, ThermoError> {
    Ok(DoubleWell::new(beta)?.chi())
}

/// Bulk compressibility χ₋ = 1/F''(h₋) at the slicing level h₋ = -m_β + κ.
pub fn chi_minus(beta: f64, kappa: f64) -> Result<f64, ThermoError> {
    let well = DoubleWell::new(beta)?;
    if !(kappa > 0.0 && kappa < well.m_beta) {
        return Err(ThermoError::InvalidKappa(kappa));
    }
    let h = -well.m_beta + kappa;
    let fpp = well.f_double_prime(h);
    if fpp <= 0.0 {
        return Err(ThermoError::ConvexityLoss { h });
    }
    Ok(1.0 / fpp)
}

/// Tilted potential G(ω) = F(n+ω) - F(n) - F'(n)ω; G(0) = G'(0) = 0.
pub fn tilted_potential(omega: f64, beta: f64, n: f64) -> Result<f64, ThermoError> {
    let well = DoubleWell::new(beta)?;
    if !(n > -well.m_beta && n < well.m_beta) {
        return Err(ThermoError::NoDip {
            n,
            lo: -well.m_beta,
            hi: well.m_beta,
        });
    }
    let m = n + omega;
    if !(-1.0..=1.0).contains(&m) {
        return Err(ThermoError::OutOfDomain(m));
    }
    Ok(well.tilted(omega, n))
}

/// Zeros and minimizer of the droplet dip of G.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedRoots {
    /// First positive zero: G > 0 on (0, ω₋).
    pub omega_minus: f64,
    /// Second positive zero: G < 0 exactly on (ω₋, ω₊).
    pub omega_plus: f64,
    /// Global minimizer, the unique nonzero solution of F'(n+ω) = F'(n).
    pub omega_star: f64,
}

/// Locates ω₋ < ω⋆ < ω₊ for n in the dip regime (-m_β, -spinodal).
///
/// All brackets are analytic: ω⋆ comes from F'(m) = F'(n) on (m_β, 1), the
/// local max of G from the same equation on the concave stretch, and the two
/// zeros from sign changes of G on either side of ω⋆. Errors with
/// `DipReachesSaturation` when G is still negative at ω = 1 - n, in which
/// case ω₊ does not exist inside the physical domain (large δ).
pub fn tilted_roots(beta: f64, n: f64) -> Result<TiltedRoots, ThermoError> {
    let well = DoubleWell::new(beta)?;
    let spin = well.spinodal();
    if !(n > -well.m_beta && n < -spin) {
        return Err(ThermoError::NoDip {
            n,
            lo: -well.m_beta,
            hi: -spin,
        });
    }
    let fp_n = well.f_prime(n);
    let g = |w: f64| well.tilted(w, n);
    let gp = |w: f64| well.f_prime(n + w) - fp_n;

    // Dip bottom: F' increasing on (m_beta, 1), crosses F'(n) > 0 once.
    let m_star = bisect(|m| well.f_prime(m) - fp_n, well.m_beta, 1.0 - 1e-15, 1e-15);
    let omega_star = newton_polish(m_star - n, gp, |w| well.f_double_prime(n + w));
    if gp(omega_star).abs() > 1e-12 {
        return Err(ThermoError::RootFind);
    }

    // Local max of G: F' decreasing across the spinodal region.
    let m_hump = bisect(|m| fp_n - well.f_prime(m), -spin, spin, 1e-15);
    let omega_hump = m_hump - n;

    let omega_minus = {
        let w = bisect(g, omega_hump, omega_star, 1e-15);
        newton_polish(w, g, gp)
    };
    if g(omega_minus).abs() > 1e-12 {
        return Err(ThermoError::RootFind);
    }

    let omega_sat = 1.0 - n;
    if g(omega_sat) <= 0.0 {
        return Err(ThermoError::DipReachesSaturation {
            delta: n + well.m_beta,
        });
    }
    let omega_plus = {
        let w = bisect(g, omega_star, omega_sat, 1e-15);
        newton_polish(w, g, gp)
    };
    if g(omega_plus).abs() > 1e-12 {
        return Err(ThermoError::RootFind);
    }

    Ok(TiltedRoots {
        omega_minus,
        omega_plus,
        omega_star,
    })
}

fn newton_polish(mut x: f64, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..3 {
        let d = df(x);
        if d.abs() > 1e-14 {
            let step = f(x) / d;
            if step.is_finite() {
                x -= step;
            }
        }
    }
    x
}

/// Derived scalars of one (β, κ, n) problem instance.
#[derive(Debug, Clone, Copy)]
pub struct ThermoConstants {
    pub m_beta: f64,
    pub chi: f64,
    pub chi_minus: f64,
    pub omega_minus: f64,
    pub omega_plus: f64,
    pub omega_star: f64,
}

impl ThermoConstants {
    pub fn compute(beta: f64, kappa: f64, n: f64) -> Result<Self, ThermoError> {
        let well = DoubleWell::new(beta)?;
        let roots = tilted_roots(beta, n)?;
        Ok(Self {
            m_beta: well.m_beta,
            chi: well.chi(),
            chi_minus: chi_minus(beta, kappa)?,
            omega_minus: roots.omega_minus,
            omega_plus: roots.omega_plus,
            omega_star: roots.omega_star,
        })
    }
}
