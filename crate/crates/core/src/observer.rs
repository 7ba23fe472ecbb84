//! The composed 2G+D observer and a Kalman-Bucy baseline.

use crate::error::{Error, Result};
use crate::gd_estimator::{gd_init, gd_step, GdConfig, GdState};
use crate::gpebo::{gpebo_init, gpebo_step, make_regressor, reconstruct_state, GpeboState, RegressorSample};
use crate::ltv_system::LtvSystem;
use crate::numerics::{dot, rk4_step, Matrix};

/// Observer state `χ = (ξ, Φ_A, θ̂_g, Ω, θ̂)` with output `x̂ = ξ + Φ_A θ̂`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observer2GD {
    pub gpebo: GpeboState,
    pub gd: GdState,
    pub cfg: GdConfig,
    pub n: usize,
}

impl Observer2GD {
    /// Dimension of the dynamic state, `(3 + 2n)·n`.
    pub fn state_dim(&self) -> usize {
        (3 + 2 * self.n) * self.n
    }

    /// All dynamic states in the order `ξ, Φ_A, θ̂_g, Ω, θ̂`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut chi = self.gpebo.xi.clone();
        chi.extend_from_slice(self.gpebo.phi_a.as_slice());
        chi.extend_from_slice(&self.gd.theta_g_hat);
        chi.extend_from_slice(self.gd.omega.as_slice());
        chi.extend_from_slice(&self.gd.theta_hat);
        chi
    }

    pub fn t(&self) -> f64 {
        self.gpebo.t
    }
}

pub fn observer_init<S: LtvSystem + ?Sized>(
    sys: &S,
    cfg: &GdConfig,
    xi0: &[f64],
    t0: f64,
) -> Result<Observer2GD> {
    let n = sys.dim();
    for (what, len) in [("xi0", xi0.len()), ("theta0", cfg.theta0.len()), ("theta_g0", cfg.theta_g0.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    cfg.validate()?;
    Ok(Observer2GD {
        gpebo: gpebo_init(n, xi0, t0),
        gd: gd_init(cfg, n, t0),
        cfg: cfg.clone(),
        n,
    })
}

/// Advances the observer by one grid step given the plant output `y` at the
/// current observer time.
pub fn observer_step<S: LtvSystem + ?Sized>(
    obs: &Observer2GD,
    sys: &S,
    y: f64,
    dt: f64,
) -> Result<Observer2GD> {
    observer_step_disturbed(obs, sys, y, 0.0, dt).map(|(next, _)| next)
}

/// Like [`observer_step`], with `d` added to `𝒴` before it reaches the
/// estimator. Returns the regressor sample actually fed to the estimator.
pub fn observer_step_disturbed<S: LtvSystem + ?Sized>(
    obs: &Observer2GD,
    sys: &S,
    y: f64,
    d: f64,
    dt: f64,
) -> Result<(Observer2GD, RegressorSample)> {
    let mut sample = make_regressor(&obs.gpebo, sys, y);
    sample.y_cal += d;
    let gd = gd_step(&obs.gd, &sample, &obs.cfg, dt)?;
    let gpebo = gpebo_step(&obs.gpebo, sys, dt)?;
    Ok((
        Observer2GD {
            gpebo,
            gd,
            cfg: obs.cfg.clone(),
            n: obs.n,
        },
        sample,
    ))
}

pub fn observer_output(obs: &Observer2GD) -> Vec<f64> {
    reconstruct_state(&obs.gpebo, &obs.gd.theta_hat)
}

/// Kalman-Bucy filter state for the comparison baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanBucyState {
    pub x_hat: Vec<f64>,
    pub p: Matrix,
    /// Process-noise intensity (`Q = q·I`).
    pub q: f64,
    /// Measurement-noise intensity.
    pub r: f64,
    pub t: f64,
    /// Set once `P` has failed a positive-definiteness check.
    pub lost_definiteness: bool,
}

pub fn kalman_bucy_init(
    x_hat0: &[f64],
    p0_scale: f64,
    q: f64,
    r: f64,
    t0: f64,
) -> Result<KalmanBucyState> {
    if !(r > 0.0) {
        return Err(Error::InvalidConfig(format!("measurement intensity r must be positive, got {r}")));
    }
    if !(p0_scale > 0.0) || q < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "need P0 scale > 0 and q >= 0, got {p0_scale} and {q}"
        )));
    }
    let n = x_hat0.len();
    Ok(KalmanBucyState {
        x_hat: x_hat0.to_vec(),
        p: Matrix::identity(n).scale(p0_scale),
        q,
        r,
        t: t0,
        lost_definiteness: false,
    })
}

/// One RK4 step of
///
/// ```text
/// x̂̇ = A x̂ + b + P C r⁻¹ (y − Cᵀx̂)
/// Ṗ  = A P + P Aᵀ + q I − P C r⁻¹ Cᵀ P
/// ```
///
/// with `y` held over the step. `P` is re-symmetrized afterwards; loss of
/// definiteness is flagged on the state rather than returned as an error.
pub fn kalman_bucy_step<S: LtvSystem + ?Sized>(
    kb: &KalmanBucyState,
    sys: &S,
    y: f64,
    dt: f64,
) -> Result<KalmanBucyState> {
    let n = kb.x_hat.len();
    let mut z = kb.x_hat.clone();
    z.extend_from_slice(kb.p.as_slice());

    let z = rk4_step(
        |t, z| {
            let a = sys.a(t);
            let c = sys.c(t);
            let x = &z[..n];
            let p = Matrix::from_vec(n, n, z[n..].to_vec());
            let pc = p.matvec(&c);
            let innovation = (y - dot(&c, x)) / kb.r;
            let mut dx = a.matvec(x);
            for ((d, bi), g) in dx.iter_mut().zip(sys.b(t)).zip(&pc) {
                *d += bi + g * innovation;
            }
            let ap = a.matmul(&p);
            let mut dp = ap.add(&ap.transpose());
            for i in 0..n {
                dp[(i, i)] += kb.q;
                for j in 0..n {
                    dp[(i, j)] -= pc[i] * pc[j] / kb.r;
                }
            }
            dx.extend(dp.into_vec());
            dx
        },
        kb.t,
        &z,
        dt,
    )?;

    let mut p = Matrix::from_vec(n, n, z[n..].to_vec());
    p.symmetrize();
    let lost = kb.lost_definiteness || !is_positive_definite(&p);
    Ok(KalmanBucyState {
        x_hat: z[..n].to_vec(),
        p,
        q: kb.q,
        r: kb.r,
        t: kb.t + dt,
        lost_definiteness: lost,
    })
}

/// Cholesky-based definiteness test.
fn is_positive_definite(p: &Matrix) -> bool {
    let n = p.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = p[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = p[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    true
}
