//! Fractional-droplet trial fields.
//!
//! A trial field places the fraction η of the excess magnetization in a
//! round droplet of radius r_η = η^{1/d} r₀ and smears the rest:
//!
//!   m_(η)(x) = m₀(|x - center| - r_η) + α(η),
//!
//! with m₀ the front profile flattened to ∓m_β outside a collar so it is
//! well defined on the torus, and α fixed by the exact discrete constraint
//! mean(m_(η)) = n. The collar lives on [W, 2W] with W = L^{(d-1)/(d+1)},
//! which is large compared to the kernel range and small compared to r₀ in
//! the critical regime.

use thiserror::Error;

use crate::field::{Field, FieldError, ModelParams, EPS_BAND};
use crate::instanton::InstantonProfile;
use crate::numeric::compensated_sum;
use crate::reduced::{equimolar, sigma_d, ReducedError};

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("collar does not fit: need L^((d-1)/(d+1)) >= 2, got {0}")]
    CollarTooSmall(f64),
    #[error("front window Z = {z} shorter than the collar 2W = {need}")]
    WindowTooShort { z: f64, need: f64 },
    #[error("droplet of radius {radius} plus collar {collar} does not fit in L = {l}")]
    Geometry { radius: f64, collar: f64, l: f64 },
    #[error("constraint shift alpha = {alpha} drives values out of [-1+eps, 1-eps]")]
    Saturation { alpha: f64 },
    #[error("volume fraction eta = {0} outside [0, 1]")]
    BadEta(f64),
    #[error(transparent)]
    Reduced(#[from] ReducedError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Volume fraction, excess amplitude and droplet placement of one trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialSpec {
    pub eta: f64,
    pub k: f64,
    /// droplet center in cell coordinates; defaults to the torus center
    pub center: Option<[usize; 3]>,
}

/// The 1-D droplet wall: the front inside |z| < W, hard ∓m_β beyond 2W, and
/// a cubic-smoothstep blend in between.
#[derive(Debug, Clone)]
pub struct WallProfile {
    pub h: f64,
    pub half: usize,
    pub values: Vec<f64>,
    pub m_beta: f64,
    pub blend_start: f64,
    pub blend_end: f64,
}

impl WallProfile {
    /// Linear interpolation with ∓m_β continuation.
    pub fn sample(&self, z: f64) -> f64 {
        let z_max = self.half as f64 * self.h;
        if z <= -z_max {
            return self.m_beta;
        }
        if z >= z_max {
            return -self.m_beta;
        }
        let t = (z + z_max) / self.h;
        let k = (t.floor() as usize).min(self.values.len() - 2);
        let frac = t - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Flatten the front to ∓m_β outside the collar [W, 2W], W = L^{(d-1)/(d+1)}.
pub fn build_m0(instanton: &InstantonProfile, l: f64) -> Result<WallProfile, TrialError> {
    let d = instanton.spec.d as f64;
    let w = l.powf((d - 1.0) / (d + 1.0));
    if w < 2.0 {
        return Err(TrialError::CollarTooSmall(w));
    }
    if instanton.z_max < 2.0 * w {
        return Err(TrialError::WindowTooShort {
            z: instanton.z_max,
            need: 2.0 * w,
        });
    }
    let h = instanton.h;
    let half = ((2.0 * w + 1.0) / h).ceil() as usize;
    let m_beta = instanton.m_beta;
    let values = (0..=2 * half)
        .map(|k| {
            let z = (k as f64 - half as f64) * h;
            let az = z.abs();
            if az <= w {
                instanton.sample(z)
            } else {
                let t = smoothstep((az - w) / w);
                let limit = -m_beta * z.signum();
                let front = instanton.sample(z);
                front + (limit - front) * t
            }
        })
        .collect();
    Ok(WallProfile {
        h,
        half,
        values,
        m_beta,
        blend_start: w,
        blend_end: 2.0 * w,
    })
}

/// Asymptotic constraint shift 2 m_β (σ_d/d) (r₀/L)^d (1-η).
pub fn alpha_asymptotic(m_beta: f64, d: usize, r0: f64, l: f64, eta: f64) -> f64 {
    let sd = sigma_d(d).expect("valid d");
    2.0 * m_beta * (sd / d as f64) * (r0 / l).powi(d as i32) * (1.0 - eta)
}

/// A constructed trial with its constraint bookkeeping.
#[derive(Debug, Clone)]
pub struct TrialField {
    pub field: Field,
    pub eta: f64,
    /// droplet radius η^{1/d} r₀
    pub radius: f64,
    pub r0: f64,
    /// exact discrete constraint shift
    pub alpha: f64,
    /// closed-form leading value of α, reported for comparison
    pub alpha_asymptotic: f64,
    pub n_mean: f64,
}

/// Build m_(η) for the mean value n; the droplet sits at `center` (cell
/// coordinates, default the torus center). The constraint is enforced from
/// the discrete integral, exactly.
pub fn build_trial(
    params: &ModelParams,
    wall: &WallProfile,
    spec: &TrialSpec,
    n_mean: f64,
) -> Result<TrialField, TrialError> {
    if !(0.0..=1.0).contains(&spec.eta) {
        return Err(TrialError::BadEta(spec.eta));
    }
    let d = params.d;
    let (_, r0) = equimolar(n_mean, params.l, d, wall.m_beta)?;
    let radius = spec.eta.powf(1.0 / d as f64) * r0;
    if 2.0 * (radius + wall.blend_end) >= params.l {
        return Err(TrialError::Geometry {
            radius,
            collar: wall.blend_end,
            l: params.l,
        });
    }
    let center_cells = spec.center.unwrap_or([params.n / 2; 3]);
    let shape = Field::uniform(d, params.n, params.l, 0.0)?;
    let mut values = vec![0.0f64; shape.cells()];
    for (i, slot) in values.iter_mut().enumerate() {
        let c = shape.coords(i);
        let dist = shape.torus_distance(&c, &center_cells[..d]);
        *slot = wall.sample(dist - radius);
    }
    let mean = compensated_sum(values.iter().copied()) / values.len() as f64;
    let alpha = n_mean - mean;
    for v in values.iter_mut() {
        *v += alpha;
        if v.abs() > 1.0 - EPS_BAND {
            return Err(TrialError::Saturation { alpha });
        }
    }
    let field = Field::from_values(d, params.n, params.l, values)?;
    Ok(TrialField {
        field,
        eta: spec.eta,
        radius,
        r0,
        alpha,
        alpha_asymptotic: alpha_asymptotic(wall.m_beta, d, r0, params.l, spec.eta),
        n_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instanton::{solve_instanton, SolveOptions};
    use crate::kernel::{KernelFamily, KernelSpec};
    use crate::reduced::mean_from_excess;

    fn front(z: f64) -> InstantonProfile {
        let spec = KernelSpec::new(KernelFamily::Indicator, 2).unwrap();
        solve_instanton(2.0, &spec, z, 32, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn wall_profile_shape() {
        let inst = front(16.0);
        let wall = build_m0(&inst, 40.0).unwrap();
        let w = 40f64.powf(1.0 / 3.0);
        assert!((wall.blend_start - w).abs() < 1e-12);
        assert!(wall.sample(0.0).abs() < 1e-10, "inherits centering");
        assert_eq!(wall.sample(2.0 * w + 0.5), -inst.m_beta);
        assert_eq!(wall.sample(-2.0 * w - 0.5), inst.m_beta);
        // inside the front window the wall is the front
        for &z in &[0.5, -1.0, 2.0] {
            assert!((wall.sample(z) - inst.sample(z)).abs() < 1e-12);
        }
        // continuous first differences: second difference stays O(h^2)
        let mut max2 = 0.0f64;
        for k in 1..wall.values.len() - 1 {
            max2 = max2.max((wall.values[k + 1] - 2.0 * wall.values[k] + wall.values[k - 1]).abs());
        }
        assert!(max2 < 0.01, "second-difference jump {max2}");
    }

    #[test]
    fn wall_approaches_front_as_l_grows() {
        let inst = front(24.0);
        let mut sups = Vec::new();
        for &l in &[20.0, 40.0, 80.0] {
            let wall = build_m0(&inst, l).unwrap();
            let w = wall.blend_start;
            let mut sup = 0.0f64;
            let mut z = w;
            while z <= 2.0 * w {
                sup = sup.max((wall.sample(z) - inst.sample(z)).abs());
                sup = sup.max((wall.sample(-z) - inst.sample(-z)).abs());
                z += wall.h;
            }
            sups.push(sup);
        }
        assert!(
            sups[1] < sups[0] && sups[2] < sups[1],
            "blend defect not shrinking: {sups:?}"
        );
    }

    #[test]
    fn collar_requires_room() {
        let inst = front(12.0);
        assert!(matches!(
            build_m0(&inst, 7.9),
            Err(TrialError::CollarTooSmall(_))
        ));
        // L = 300 needs 2W = 2*300^(1/3) ≈ 13.4 > Z = 12
        assert!(matches!(
            build_m0(&inst, 300.0),
            Err(TrialError::WindowTooShort { .. })
        ));
    }

    #[test]
    fn trial_constraint_is_exact() {
        let inst = front(12.0);
        let spec2 = KernelSpec::new(KernelFamily::Indicator, 2).unwrap();
        let params = ModelParams::new(2.0, 2, 40.0, 320, spec2).unwrap();
        let wall = build_m0(&inst, params.l).unwrap();
        let n = mean_from_excess(0.5, params.l, 2, inst.m_beta);
        for eta in [0.0, 0.3, 2.0 / 3.0, 1.0] {
            let t = build_trial(
                &params,
                &wall,
                &TrialSpec {
                    eta,
                    k: 0.5,
                    center: None,
                },
                n,
            )
            .unwrap();
            assert!(
                (t.field.mean() - n).abs() < 1e-14,
                "eta={eta}: mean off by {}",
                (t.field.mean() - n).abs()
            );
            t.field.check_admissible().unwrap();
        }
    }

    #[test]
    fn eta_zero_is_uniform_like() {
        let inst = front(12.0);
        let spec2 = KernelSpec::new(KernelFamily::Indicator, 2).unwrap();
        let params = ModelParams::new(2.0, 2, 40.0, 320, spec2).unwrap();
        let wall = build_m0(&inst, params.l).unwrap();
        let n = mean_from_excess(0.5, params.l, 2, inst.m_beta);
        let t = build_trial(
            &params,
            &wall,
            &TrialSpec {
                eta: 0.0,
                k: 0.5,
                center: None,
            },
            n,
        )
        .unwrap();
        assert_eq!(t.radius, 0.0);
        let close = t
            .field
            .values
            .iter()
            .filter(|v| (**v - n).abs() < 0.02)
            .count();
        assert!(close as f64 > 0.99 * t.field.cells() as f64);
    }

    #[test]
    fn moving_the_center_preserves_energy() {
        let inst = front(12.0);
        let spec2 = KernelSpec::new(KernelFamily::Indicator, 2).unwrap();
        let params = ModelParams::new(2.0, 2, 40.0, 320, spec2).unwrap();
        let kernel = params.build_kernel().unwrap();
        let wall = build_m0(&inst, params.l).unwrap();
        let n = mean_from_excess(0.6, params.l, 2, inst.m_beta);
        let spec = |center| TrialSpec {
            eta: 0.8,
            k: 0.6,
            center,
        };
        let a = build_trial(&params, &wall, &spec(None), n).unwrap();
        let b = build_trial(&params, &wall, &spec(Some([37, 251, 0])), n).unwrap();
        let ea = crate::field::glp_energy(&a.field, &kernel, 2.0).unwrap().total;
        let eb = crate::field::glp_energy(&b.field, &kernel, 2.0).unwrap().total;
        assert!((ea - eb).abs() < 1e-10 * ea.max(1.0), "{ea} vs {eb}");
    }

    #[test]
    fn alpha_matches_asymptotic_formula_in_trend() {
        let inst = front(24.0);
        let spec2 = KernelSpec::new(KernelFamily::Indicator, 2).unwrap();
        let mut errs = Vec::new();
        for &l in &[40.0, 80.0, 160.0] {
            let params = ModelParams::new(2.0, 2, l, (8.0 * l) as usize, spec2).unwrap();
            let wall = build_m0(&inst, l).unwrap();
            let n = mean_from_excess(0.4, l, 2, inst.m_beta);
            let t = build_trial(
                &params,
                &wall,
                &TrialSpec {
                    eta: 0.5,
                    k: 0.4,
                    center: None,
                },
                n,
            )
            .unwrap();
            errs.push((t.alpha - t.alpha_asymptotic).abs());
            // alpha itself is O(L^{-d/(d+1)}), same order as the closed form
            assert!(t.alpha > 0.0 && t.alpha < 2.0 * t.alpha_asymptotic);
        }
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "errs={errs:?}");
    }

    #[test]
    fn trial_energy_tracks_reduced_model_envelope() {
        // F(trial(eta)) = L^{2/3} prefactor Phi(eta) + correction, and the
        // correction is O(L^{(d^2-2d)/(d+1)}) = O(1) in d = 2: the fitted
        // constant stays bounded across L.
        use crate::field::glp_energy;
        use crate::reduced::{c_of_k, phi, scaling_prefactor};
        let inst = front(24.0);
        let spec2 = KernelSpec::new(KernelFamily::Indicator, 2).unwrap();
        let (k, chi, s) = (0.5, 0.19957595625962497, inst.surface_tension);
        let c = c_of_k(k, 2, inst.m_beta, chi, s).unwrap();
        let mut fitted = Vec::new();
        for &l in &[40.0, 80.0, 160.0] {
            let params = ModelParams::new(2.0, 2, l, (8.0 * l) as usize, spec2).unwrap();
            let kernel = params.build_kernel().unwrap();
            let wall = build_m0(&inst, l).unwrap();
            let n = mean_from_excess(k, l, 2, inst.m_beta);
            let prefactor = l.powf(2.0 / 3.0) * scaling_prefactor(k, 2, inst.m_beta, s).unwrap();
            let mut worst = 0.0f64;
            for eta in [0.3, 2.0 / 3.0, 0.9] {
                let t = build_trial(
                    &params,
                    &wall,
                    &TrialSpec {
                        eta,
                        k,
                        center: None,
                    },
                    n,
                )
                .unwrap();
                let e = glp_energy(&t.field, &kernel, 2.0).unwrap().total;
                let lead = prefactor * phi(eta, c, 2);
                worst = worst.max((e - lead).abs());
            }
            println!("L={l}: envelope constant {worst:.4}");
            fitted.push(worst);
        }
        let lo = fitted.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = fitted.iter().cloned().fold(0.0f64, f64::max);
        assert!(hi < 4.0 * lo.max(0.05), "envelope constant unstable: {fitted:?}");
    }

    #[test]
    fn oversized_droplet_is_rejected() {
        let inst = front(12.0);
        let spec2 = KernelSpec::new(KernelFamily::Indicator, 2).unwrap();
        let params = ModelParams::new(2.0, 2, 20.0, 160, spec2).unwrap();
        let wall = build_m0(&inst, params.l).unwrap();
        // huge excess -> r0 comparable to L
        let n = -inst.m_beta + 1.2;
        let res = build_trial(
            &params,
            &wall,
            &TrialSpec {
                eta: 1.0,
                k: 0.0,
                center: None,
            },
            n,
        );
        assert!(matches!(res, Err(TrialError::Geometry { .. })));
    }
}
