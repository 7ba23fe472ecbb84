//! Interlaced gradient + DREM + LMS estimator for `𝒴 = ψᵀθ`.
//!
//! ```text
//! θ̂̇_g = γ_g ψ (𝒴 − ψᵀθ̂_g),     θ̂_g(0) = θ_g0
//! Ω̇   = −γ_g ψψᵀ Ω,             Ω(0)   = I
//! θ̂̇   = γ Δ (Y − Δ θ̂),          θ̂(0)   = θ₀
//! ```
//!
//! with `D = I − Ω`, `Δ = det D` and `Y = adj(D)(θ̂_g − Ω θ_g0)`. The gradient
//! error satisfies `θ̂_g − θ = Ω(θ_g0 − θ)`, i.e. `Dθ = θ̂_g − Ωθ_g0`, and
//! multiplying by `adj D` yields `n` decoupled scalar regressions `Y = Δθ`.
//! Each LMS error component then obeys `θ̃̇ᵢ = −γΔ²θ̃ᵢ`.
//!
//! Only interval excitation of `ψ` is needed: once `∫ψψᵀ` is positive
//! definite, `Δ` stays away from zero for good.

use crate::error::{Error, Result};
use crate::gpebo::RegressorSample;
use crate::numerics::{det_and_adjugate, dot, rk4_step, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct GdConfig {
    pub gamma_g: f64,
    pub gamma: f64,
    pub theta_g0: Vec<f64>,
    pub theta0: Vec<f64>,
}

pub const DEFAULT_GAMMA_G: f64 = 1.0;
pub const DEFAULT_GAMMA: f64 = 10.0;

impl GdConfig {
    /// Default gains `γ_g = 1`, `γ = 10` and zero initial estimates.
    pub fn with_defaults(n: usize) -> Self {
        GdConfig {
            gamma_g: DEFAULT_GAMMA_G,
            gamma: DEFAULT_GAMMA,
            theta_g0: vec![0.0; n],
            theta0: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.theta0.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_g > 0.0 && self.gamma_g.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma_g must be positive, got {}", self.gamma_g)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.theta_g0.len() != self.theta0.len() {
            return Err(Error::DimensionMismatch {
                what: "theta_g0",
                expected: self.theta0.len(),
                found: self.theta_g0.len(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GdState {
    pub theta_g_hat: Vec<f64>,
    pub omega: Matrix,
    pub theta_hat: Vec<f64>,
    pub t: f64,
}

impl GdState {
    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    fn flatten(&self) -> Vec<f64> {
        let mut z = self.theta_g_hat.clone();
        z.extend_from_slice(self.omega.as_slice());
        z.extend_from_slice(&self.theta_hat);
        z
    }

    fn unflatten(n: usize, z: &[f64], t: f64) -> GdState {
        GdState {
            theta_g_hat: z[..n].to_vec(),
            omega: Matrix::from_vec(n, n, z[n..n + n * n].to_vec()),
            theta_hat: z[n + n * n..].to_vec(),
            t,
        }
    }
}

/// Output of the mixing step: `D = I − Ω`, `Δ = det D`, `Y = adj(D)(θ̂_g − Ωθ_g0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedSample {
    pub delta: f64,
    pub y_mix: Vec<f64>,
    pub d_mat: Matrix,
}

pub fn gd_init(cfg: &GdConfig, n: usize, t0: f64) -> GdState {
    assert_eq!(cfg.dim(), n, "config dimension");
    GdState {
        theta_g_hat: cfg.theta_g0.clone(),
        omega: Matrix::identity(n),
        theta_hat: cfg.theta0.clone(),
        t: t0,
    }
}

/// `γ_g ψ (𝒴 − ψᵀθ̂_g)`
pub fn gradient_rhs(state: &GdState, sample: &RegressorSample, cfg: &GdConfig) -> Vec<f64> {
    let err = sample.y_cal - dot(&sample.psi, &state.theta_g_hat);
    sample.psi.iter().map(|p| cfg.gamma_g * p * err).collect()
}

/// `−γ_g ψψᵀ Ω`
pub fn omega_rhs(state: &GdState, sample: &RegressorSample, cfg: &GdConfig) -> Matrix {
    let n = state.dim();
    // ψψᵀΩ = ψ (Ωᵀψ)ᵀ
    let row = state.omega.tr_matvec(&sample.psi);
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let s = -cfg.gamma_g * sample.psi[i];
        if s == 0.0 {
            continue;
        }
        for j in 0..n {
            out[(i, j)] = s * row[j];
        }
    }
    out
}

pub fn mix(state: &GdState, cfg: &GdConfig) -> MixedSample {
    let n = state.dim();
    let d_mat = Matrix::identity(n).sub(&state.omega);
    let (delta, adj) = det_and_adjugate(&d_mat);
    let omega_theta = state.omega.matvec(&cfg.theta_g0);
    let rhs: Vec<f64> = state
        .theta_g_hat
        .iter()
        .zip(&omega_theta)
        .map(|(g, o)| g - o)
        .collect();
    MixedSample {
        delta,
        y_mix: adj.matvec(&rhs),
        d_mat,
    }
}

/// `γ Δ (Y − Δ θ̂)`
pub fn lms_rhs(state: &GdState, mixed: &MixedSample, cfg: &GdConfig) -> Vec<f64> {
    let d = mixed.delta;
    mixed
        .y_mix
        .iter()
        .zip(&state.theta_hat)
        .map(|(y, th)| cfg.gamma * d * (y - d * th))
        .collect()
}

/// `γ Δ² dt`; above 1 the per-step contraction of the LMS error is no longer
/// monotone-safe.
pub fn step_size_ratio(mixed: &MixedSample, cfg: &GdConfig, dt: f64) -> f64 {
    cfg.gamma * mixed.delta * mixed.delta * dt
}

/// One RK4 step of the augmented system `(θ̂_g, Ω, θ̂)`.
///
/// `(𝒴, ψ)` are held at the sample values over the step; `Δ` and `Y` are
/// recomputed from each Runge-Kutta stage.
pub fn gd_step(
    state: &GdState,
    sample: &RegressorSample,
    cfg: &GdConfig,
    dt: f64,
) -> Result<GdState> {
    let n = state.dim();
    if sample.psi.len() != n {
        return Err(Error::DimensionMismatch {
            what: "regressor",
            expected: n,
            found: sample.psi.len(),
        });
    }
    let tol = 1e-9 * state.t.abs().max(1.0);
    if (sample.t - state.t).abs() > tol {
        return Err(Error::InvalidGrid(format!(
            "regressor sample at t = {} does not match estimator time {}",
            sample.t, state.t
        )));
    }

    let z = rk4_step(
        |t, z| {
            let stage = GdState::unflatten(n, z, t);
            let mut dz = gradient_rhs(&stage, sample, cfg);
            dz.extend(omega_rhs(&stage, sample, cfg).into_vec());
            dz.extend(lms_rhs(&stage, &mix(&stage, cfg), cfg));
            dz
        },
        state.t,
        &state.flatten(),
        dt,
    )?;
    Ok(GdState::unflatten(n, &z, state.t + dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpebo::{gpebo_init, gpebo_step, make_regressor, true_theta};
    use crate::ltv_system::{finite_window_rotor, simulate_plant, LtvSystem, FINITE_WINDOW_END};
    use crate::numerics::{max_abs_diff, spectral_norm, OdeGrid};

    fn sample(t: f64, y_cal: f64, psi: Vec<f64>) -> RegressorSample {
        RegressorSample { t, y_cal, psi }
    }

    #[test]
    fn init_has_zero_delta() {
        let cfg = GdConfig::with_defaults(3);
        let s = gd_init(&cfg, 3, 0.0);
        assert_eq!(mix(&s, &cfg).delta, 0.0);

        let cfg = GdConfig {
            theta0: vec![4.0],
            ..GdConfig::with_defaults(1)
        };
        let s = gd_init(&cfg, 1, 0.0);
        assert_eq!(
            (s.theta_g_hat.clone(), s.omega.clone(), s.theta_hat.clone()),
            (vec![0.0], Matrix::identity(1), vec![4.0])
        );
        let m = mix(&s, &cfg);
        assert_eq!((m.delta, m.y_mix), (0.0, vec![0.0]));
    }

    #[test]
    fn gradient_examples() {
        let cfg = GdConfig::with_defaults(2);
        let s = gd_init(&cfg, 2, 0.0);
        assert_eq!(gradient_rhs(&s, &sample(0.0, 3.0, vec![0.0, 0.0]), &cfg), vec![0.0, 0.0]);

        let theta = [0.7, -1.2];
        let exact = GdState {
            theta_g_hat: theta.to_vec(),
            ..s.clone()
        };
        let psi = vec![0.3, 0.9];
        let y = dot(&psi, &theta);
        assert_eq!(gradient_rhs(&exact, &sample(0.0, y, psi), &cfg), vec![0.0, 0.0]);

        let cfg1 = GdConfig::with_defaults(1);
        let s1 = gd_init(&cfg1, 1, 0.0);
        assert_eq!(gradient_rhs(&s1, &sample(0.0, 2.0, vec![1.0]), &cfg1), vec![2.0]);
    }

    #[test]
    fn omega_frozen_without_excitation() {
        let cfg = GdConfig::with_defaults(2);
        let s = gd_init(&cfg, 2, 0.0);
        assert_eq!(omega_rhs(&s, &sample(0.0, 0.0, vec![0.0; 2]), &cfg), Matrix::zeros(2, 2));
    }

    #[test]
    fn omega_scalar_decay() {
        // ψ ≡ 1, γ_g = 1: Ω = e^{-t}, so Ω(ln 2) = 1/2 and Δ(ln 2) = 1/2.
        let cfg = GdConfig::with_defaults(1);
        let grid = OdeGrid::covering(0.0, 2f64.ln(), 1e-3).unwrap();
        let mut s = gd_init(&cfg, 1, 0.0);
        for _ in 0..grid.steps() {
            s = gd_step(&s, &sample(s.t, 0.0, vec![1.0]), &cfg, grid.dt()).unwrap();
        }
        assert!((s.omega[(0, 0)] - 0.5).abs() < 1e-8);
        assert!((mix(&s, &cfg).delta - 0.5).abs() < 1e-8);
    }

    #[test]
    fn mixing_on_scalar_drift_regression() {
        // S1: θ = 2, ψ ≡ 1, 𝒴 ≡ 2. θ̂_g = 2(1 − e^{-t}) so at t = ln 2
        // θ̂_g = 1, Δ = 1/2 and Y = 1 = Δθ.
        let cfg = GdConfig::with_defaults(1);
        let grid = OdeGrid::covering(0.0, 2f64.ln(), 1e-3).unwrap();
        let mut s = gd_init(&cfg, 1, 0.0);
        for _ in 0..grid.steps() {
            s = gd_step(&s, &sample(s.t, 2.0, vec![1.0]), &cfg, grid.dt()).unwrap();
        }
        let m = mix(&s, &cfg);
        assert!((s.theta_g_hat[0] - 1.0).abs() < 1e-8);
        assert!((m.delta - 0.5).abs() < 1e-8);
        assert!((m.y_mix[0] - 1.0).abs() < 1e-8);
        assert!((m.y_mix[0] - m.delta * 2.0).abs() < 1e-12);
    }

    #[test]
    fn lms_examples() {
        let cfg = GdConfig::with_defaults(2);
        let s = gd_init(&cfg, 2, 0.0);
        let quiet = MixedSample {
            delta: 0.0,
            y_mix: vec![1.0, 1.0],
            d_mat: Matrix::zeros(2, 2),
        };
        assert_eq!(lms_rhs(&s, &quiet, &cfg), vec![0.0, 0.0]);

        let theta = [1.5, -0.5];
        let exact = GdState {
            theta_hat: theta.to_vec(),
            ..s
        };
        let consistent = MixedSample {
            delta: 0.8,
            y_mix: theta.iter().map(|t| 0.8 * t).collect(),
            d_mat: Matrix::identity(2),
        };
        assert_eq!(lms_rhs(&exact, &consistent, &cfg), vec![0.0, 0.0]);
    }

    #[test]
    fn lms_unit_delta_closed_form() {
        // Δ ≡ 1 and Y = θ: θ̂(t) = θ + (θ₀ − θ)e^{-γt}. With γ = 1, Δ ≡ 1 is
        // produced by Ω ≡ 0 and ψ = 0 (Ω frozen).
        let theta = [2.0, -1.0];
        let cfg = GdConfig {
            gamma: 1.0,
            theta0: vec![0.5, 0.5],
            theta_g0: vec![0.0, 0.0],
            ..GdConfig::with_defaults(2)
        };
        let mut s = GdState {
            theta_g_hat: theta.to_vec(),
            omega: Matrix::zeros(2, 2),
            theta_hat: cfg.theta0.clone(),
            t: 0.0,
        };
        for _ in 0..2000 {
            s = gd_step(&s, &sample(s.t, 0.0, vec![0.0, 0.0]), &cfg, 1e-3).unwrap();
        }
        for i in 0..2 {
            let expected = theta[i] + (cfg.theta0[i] - theta[i]) * (-s.t).exp();
            assert!((s.theta_hat[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_without_excitation() {
        let cfg = GdConfig {
            theta0: vec![0.3, 0.1],
            theta_g0: vec![1.0, 2.0],
            ..GdConfig::with_defaults(2)
        };
        let mut s = gd_init(&cfg, 2, 0.0);
        let s0 = s.clone();
        for _ in 0..100 {
            s = gd_step(&s, &sample(s.t, 5.0, vec![0.0, 0.0]), &cfg, 1e-2).unwrap();
        }
        assert_eq!(s.theta_g_hat, s0.theta_g_hat);
        assert_eq!(s.omega, s0.omega);
        assert_eq!(s.theta_hat, s0.theta_hat);
    }

    #[test]
    fn scalar_drift_converges() {
        // Δ = 1 − e^{-t}, and θ̃(10) = θ̃(0) exp(−γ ∫₀¹⁰ Δ²) ≈ 2 e^{-85}.
        let cfg = GdConfig::with_defaults(1);
        let mut s = gd_init(&cfg, 1, 0.0);
        for _ in 0..10_000 {
            s = gd_step(&s, &sample(s.t, 2.0, vec![1.0]), &cfg, 1e-3).unwrap();
        }
        assert!((s.theta_hat[0] - 2.0).abs() <= 1e-4);
    }

    #[test]
    fn rejects_mismatched_sample() {
        let cfg = GdConfig::with_defaults(2);
        let s = gd_init(&cfg, 2, 0.0);
        assert!(gd_step(&s, &sample(0.0, 0.0, vec![1.0]), &cfg, 1e-3).is_err());
        assert!(gd_step(&s, &sample(0.5, 0.0, vec![1.0, 0.0]), &cfg, 1e-3).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = GdConfig::with_defaults(2);
        assert!(cfg.validate().is_ok());
        cfg.gamma = 0.0;
        assert!(cfg.validate().is_err());
        cfg.gamma = 1.0;
        cfg.gamma_g = -1.0;
        assert!(cfg.validate().is_err());
    }

    /// Drives the estimator with the S3 regression and checks the structural
    /// invariants at every grid point.
    #[test]
    fn finite_window_invariants() {
        let sys = finite_window_rotor();
        let x0 = [1.0, -0.4];
        let xi0 = [0.0, 0.0];
        let theta = true_theta(&x0, &xi0);
        let cfg = GdConfig {
            theta_g0: vec![0.3, 0.2],
            ..GdConfig::with_defaults(2)
        };
        let grid = OdeGrid::new(0.0, 12.0, 1e-3).unwrap();
        let traj = simulate_plant(&sys, &x0, &grid).unwrap();
        let mut g = gpebo_init(2, &xi0, 0.0);
        let mut s = gd_init(&cfg, 2, 0.0);
        let mut prev_norm = 1.0;
        let mut prev_err: Vec<f64> = (0..2).map(|i| (s.theta_hat[i] - theta.0[i]).abs()).collect();
        let mut delta_at_window_end = None;

        for k in 0..grid.len() {
            let m = mix(&s, &cfg);
            // D θ = θ̂_g − Ω θ_g0
            let lhs = m.d_mat.matvec(theta.as_slice());
            let rhs: Vec<f64> = s
                .theta_g_hat
                .iter()
                .zip(s.omega.matvec(&cfg.theta_g0))
                .map(|(a, b)| a - b)
                .collect();
            assert!(max_abs_diff(&lhs, &rhs) <= 1e-7);
            let target: Vec<f64> = theta.0.iter().map(|t| m.delta * t).collect();
            assert!(max_abs_diff(&m.y_mix, &target) <= 1e-7);

            let norm = spectral_norm(&s.omega);
            assert!(norm <= 1.0 + 1e-6);
            assert!(norm <= prev_norm + 1e-6);
            prev_norm = norm;

            for i in 0..2 {
                let e = (s.theta_hat[i] - theta.0[i]).abs();
                assert!(e <= prev_err[i] + 1e-9);
                prev_err[i] = e;
            }

            if s.t > FINITE_WINDOW_END {
                let frozen = *delta_at_window_end.get_or_insert(m.delta);
                assert_eq!(m.delta, frozen);
            }

            if k + 1 < grid.len() {
                let smp = make_regressor(&g, &sys, traj.outputs[k]);
                s = gd_step(&s, &smp, &cfg, grid.dt()).unwrap();
                g = gpebo_step(&g, &sys, grid.dt()).unwrap();
            }
        }
        assert!(delta_at_window_end.unwrap() > 0.5);
        assert_eq!(sys.dim(), 2);
    }
}
