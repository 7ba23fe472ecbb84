//! GPEBO extension: a copy `ξ` of the plant driven by the same `A(t)`, `b(t)`,
//! and the fundamental matrix `Φ_A` of `ẋ = A(t)x`.
//!
//! Since `e = x − ξ` obeys `ė = A(t)e`, we have `x = ξ + Φ_A θ` with the
//! constant `θ = x(0) − ξ(0)`, and the measured output gives the scalar
//! regression `𝒴 = ψᵀθ` with `𝒴 = y − C(t)ᵀξ` and `ψ = Φ_Aᵀ C(t)`.

use crate::error::{Error, Result};
use crate::ltv_system::LtvSystem;
use crate::numerics::{dot, rk4_step, vsub, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct GpeboState {
    pub xi: Vec<f64>,
    pub phi_a: Matrix,
    pub t: f64,
}

impl GpeboState {
    pub fn dim(&self) -> usize {
        self.xi.len()
    }
}

/// One point of the linear regression `𝒴 = ψᵀθ`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressorSample {
    pub t: f64,
    pub y_cal: f64,
    pub psi: Vec<f64>,
}

/// Ground-truth `θ = x(0) − ξ(0)`. Only tests and reports use it; the
/// observer never sees it.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaTruth(pub Vec<f64>);

impl ThetaTruth {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `𝒴 − ψᵀθ` for a sample.
    pub fn residual(&self, sample: &RegressorSample) -> f64 {
        sample.y_cal - dot(&sample.psi, &self.0)
    }
}

pub fn gpebo_init(n: usize, xi0: &[f64], t0: f64) -> GpeboState {
    assert_eq!(xi0.len(), n, "xi0 dimension");
    GpeboState {
        xi: xi0.to_vec(),
        phi_a: Matrix::identity(n),
        t: t0,
    }
}

/// Advances `(ξ, Φ_A)` by one RK4 step.
pub fn gpebo_step<S: LtvSystem + ?Sized>(
    state: &GpeboState,
    sys: &S,
    dt: f64,
) -> Result<GpeboState> {
    let n = state.dim();
    if sys.dim() != n {
        return Err(Error::DimensionMismatch {
            what: "gpebo state",
            expected: sys.dim(),
            found: n,
        });
    }
    let mut z = state.xi.clone();
    z.extend_from_slice(state.phi_a.as_slice());

    let z = rk4_step(
        |t, z| {
            let a = sys.a(t);
            let mut dz = a.matvec(&z[..n]);
            for (d, bi) in dz.iter_mut().zip(sys.b(t)) {
                *d += bi;
            }
            let phi = Matrix::from_vec(n, n, z[n..].to_vec());
            dz.extend(a.matmul(&phi).into_vec());
            dz
        },
        state.t,
        &z,
        dt,
    )?;

    Ok(GpeboState {
        xi: z[..n].to_vec(),
        phi_a: Matrix::from_vec(n, n, z[n..].to_vec()),
        t: state.t + dt,
    })
}

/// Forms `(𝒴, ψ)` from the extension state and the plant output at `state.t`.
pub fn make_regressor<S: LtvSystem + ?Sized>(
    state: &GpeboState,
    sys: &S,
    y: f64,
) -> RegressorSample {
    let c = sys.c(state.t);
    RegressorSample {
        t: state.t,
        y_cal: y - dot(&c, &state.xi),
        psi: state.phi_a.tr_matvec(&c),
    }
}

/// `x̂ = ξ + Φ_A θ̂`.
pub fn reconstruct_state(state: &GpeboState, theta_hat: &[f64]) -> Vec<f64> {
    assert_eq!(theta_hat.len(), state.dim(), "theta_hat dimension");
    let mut x = state.phi_a.matvec(theta_hat);
    for (xi, s) in x.iter_mut().zip(&state.xi) {
        *xi += s;
    }
    x
}

pub fn true_theta(x0: &[f64], xi0: &[f64]) -> ThetaTruth {
    ThetaTruth(vsub(x0, xi0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltv_system::{
        finite_window_rotor, rotor, scalar_drift, simulate_plant, transition_matrix, FnSystem,
    };
    use crate::numerics::{max_abs_diff, OdeGrid};
    use std::f64::consts::PI;

    /// Runs plant and extension side by side, returning the largest
    /// `|x − ξ − Φ_Aθ|` and `|𝒴 − ψᵀθ|`.
    fn identity_residuals<S: LtvSystem>(sys: &S, x0: &[f64], xi0: &[f64], t_final: f64) -> (f64, f64) {
        let grid = OdeGrid::new(0.0, t_final, 1e-3).unwrap();
        let traj = simulate_plant(sys, x0, &grid).unwrap();
        let theta = true_theta(x0, xi0);
        let mut g = gpebo_init(sys.dim(), xi0, 0.0);
        let (mut state_res, mut lre_res) = (0.0f64, 0.0f64);
        for k in 0..grid.len() {
            let x_rec = reconstruct_state(&g, theta.as_slice());
            state_res = state_res.max(max_abs_diff(&x_rec, &traj.states[k]));
            let sample = make_regressor(&g, sys, traj.outputs[k]);
            lre_res = lre_res.max(theta.residual(&sample).abs());
            if k + 1 < grid.len() {
                g = gpebo_step(&g, sys, grid.dt()).unwrap();
            }
        }
        (state_res, lre_res)
    }

    #[test]
    fn init_sets_identity() {
        let g = gpebo_init(2, &[0.0, 0.0], 0.0);
        assert_eq!(g.phi_a, Matrix::identity(2));
        let g = gpebo_init(1, &[5.0], 0.0);
        assert_eq!((g.xi.clone(), g.phi_a.clone()), (vec![5.0], Matrix::identity(1)));
        let g = gpebo_init(3, &[0.3, -7.0, 2.5], 1.0);
        assert_eq!(g.phi_a, Matrix::identity(3));
        assert_eq!(g.t, 1.0);
    }

    #[test]
    fn zero_system_only_advances_time() {
        let sys = FnSystem::constant("zero", Matrix::zeros(2, 2), vec![0.0; 2], vec![1.0, 0.0]);
        let g0 = gpebo_init(2, &[1.0, 2.0], 0.0);
        let g1 = gpebo_step(&g0, &sys, 0.1).unwrap();
        assert_eq!(g1.xi, g0.xi);
        assert_eq!(g1.phi_a, g0.phi_a);
        assert_eq!(g1.t, 0.1);
    }

    #[test]
    fn scalar_drift_extension() {
        let sys = scalar_drift();
        let mut g = gpebo_init(1, &[0.0], 0.0);
        for _ in 0..5000 {
            g = gpebo_step(&g, &sys, 1e-3).unwrap();
        }
        assert!((g.xi[0] - g.t.sin()).abs() < 1e-8);
        assert_eq!(g.phi_a, Matrix::identity(1));
    }

    #[test]
    fn rotor_phi_matches_transition_matrix() {
        let sys = rotor();
        let mut g = gpebo_init(2, &[0.0, 0.0], 0.0);
        for _ in 0..3000 {
            g = gpebo_step(&g, &sys, 1e-3).unwrap();
        }
        let phi = transition_matrix(&sys, 0.0, 3.0, 1e-3).unwrap();
        assert!(g.phi_a.max_abs_diff(&phi) < 1e-12);
    }

    #[test]
    fn regressor_examples() {
        let silent = FnSystem::constant("silent", Matrix::zeros(2, 2), vec![1.0; 2], vec![0.0; 2]);
        let s = make_regressor(&gpebo_init(2, &[3.0, 4.0], 0.0), &silent, 0.0);
        assert_eq!((s.y_cal, s.psi), (0.0, vec![0.0, 0.0]));

        // S1 with x0 = 2: y = 2 + sin t, ξ = sin t, so 𝒴 = 2 and ψ = 1.
        let sys = scalar_drift();
        let mut g = gpebo_init(1, &[0.0], 0.0);
        for _ in 0..2000 {
            g = gpebo_step(&g, &sys, 1e-3).unwrap();
        }
        let s = make_regressor(&g, &sys, 2.0 + g.t.sin());
        assert!((s.y_cal - 2.0).abs() < 1e-8);
        assert_eq!(s.psi, vec![1.0]);

        // S2 with x0 = (1,0): 𝒴 = cos t and ψ = (cos t, sin t).
        let sys = rotor();
        let mut g = gpebo_init(2, &[0.0, 0.0], 0.0);
        for _ in 0..1234 {
            g = gpebo_step(&g, &sys, 1e-3).unwrap();
        }
        let t = g.t;
        let s = make_regressor(&g, &sys, t.cos());
        assert!((s.y_cal - t.cos()).abs() < 1e-12);
        assert!(max_abs_diff(&s.psi, &[t.cos(), t.sin()]) < 1e-10);
    }

    #[test]
    fn reconstruction_examples() {
        let g = gpebo_init(2, &[0.5, -0.5], 0.0);
        assert_eq!(reconstruct_state(&g, &[0.0, 0.0]), g.xi);
        let x0 = [1.5, 2.0];
        let theta = true_theta(&x0, &g.xi);
        assert_eq!(reconstruct_state(&g, theta.as_slice()), x0.to_vec());

        let sys = rotor();
        let grid = OdeGrid::covering(0.0, PI / 2.0, 1e-3).unwrap();
        let traj = simulate_plant(&sys, &[1.0, 0.0], &grid).unwrap();
        let mut g = gpebo_init(2, &[0.0, 0.0], 0.0);
        for _ in 0..grid.steps() {
            g = gpebo_step(&g, &sys, grid.dt()).unwrap();
        }
        let xr = reconstruct_state(&g, &[1.0, 0.0]);
        assert!(max_abs_diff(&xr, traj.states.last().unwrap()) < 1e-8);
    }

    #[test]
    fn theta_truth_examples() {
        assert_eq!(true_theta(&[1.0, 2.0], &[1.0, 2.0]).0, vec![0.0, 0.0]);
        assert_eq!(true_theta(&[1.0, 0.0], &[0.0, 0.0]).0, vec![1.0, 0.0]);
    }

    #[test]
    fn algebraic_identities_on_builtin_scenarios() {
        let cases: [(Box<dyn Fn() -> FnSystem>, Vec<f64>, Vec<f64>); 3] = [
            (Box::new(scalar_drift), vec![2.0], vec![0.0]),
            (Box::new(rotor), vec![1.0, -0.5], vec![0.2, 0.1]),
            (Box::new(finite_window_rotor), vec![1.0, 0.0], vec![0.0, 0.0]),
        ];
        for (make, x0, xi0) in cases {
            let (state_res, lre_res) = identity_residuals(&make(), &x0, &xi0, 20.0);
            assert!(state_res <= 1e-7, "state residual {state_res}");
            assert!(lre_res <= 1e-7, "LRE residual {lre_res}");
        }
    }

    #[test]
    fn regressor_bounded_by_stability_constant() {
        // Rotations have c₁ = 1, so |ψ| ≤ |C|.
        let sys = finite_window_rotor();
        let mut g = gpebo_init(2, &[0.0, 0.0], 0.0);
        for _ in 0..10_000 {
            let s = make_regressor(&g, &sys, 0.0);
            let c = sys.c(g.t);
            assert!(crate::numerics::norm(&s.psi) <= crate::numerics::norm(&c) * (1.0 + 1e-9));
            g = gpebo_step(&g, &sys, 1e-3).unwrap();
        }
    }
}
