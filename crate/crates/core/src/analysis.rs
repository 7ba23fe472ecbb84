//! Numerical checks of the hypotheses behind the observer: observability
//! (Grammian rank), uniform complete observability, interval excitation and
//! identifiability of the regression, their equivalence, and convergence
//! metrics for error traces.
//!
//! Every boolean verdict comes with the margin it was decided on, so
//! borderline systems can be judged by the caller.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::exec::Exec;
use crate::gpebo::{gpebo_init, gpebo_step, make_regressor, RegressorSample};
use crate::ltv_system::{accumulate_outer, observability_grammian, LtvSystem, TabulatedSystem};
use crate::numerics::{
    default_rel_tol, norm, rank_with_tolerance, singular_values, smallest_singular_value,
    symmetric_eigenvalues, Matrix, OdeGrid,
};

/// Rank decision for a matrix, with the relative margin `σ_min / σ_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankVerdict {
    pub full_rank: bool,
    pub rank: usize,
    pub margin: f64,
}

impl RankVerdict {
    fn of(m: &Matrix, n: usize, rel_tol: f64) -> Self {
        let sv = singular_values(m);
        let top = sv.first().copied().unwrap_or(0.0);
        let rank = rank_with_tolerance(m, rel_tol);
        let margin = if top > 0.0 && sv.len() == n {
            sv[n - 1] / top
        } else {
            0.0
        };
        RankVerdict {
            full_rank: rank == n,
            rank,
            margin,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationReport {
    /// First sample time at which `∫ψψᵀ` clears the tolerance, if any.
    pub t_d: Option<f64>,
    /// Smallest eigenvalue of `∫₀^{t_d} ψψᵀ` (zero when `t_d` is absent).
    pub c_d: f64,
    /// Smallest eigenvalue of the integral over all samples.
    pub final_min_eig: f64,
    /// `(T, δ)` when the plant passed a UCO check; filled by callers that
    /// have the system at hand.
    pub uco_margin: Option<(f64, f64)>,
    pub grammian_rank: usize,
    pub identifiability_times: Option<Vec<f64>>,
}

/// Observability on `[0, T]`: numerical rank of `W(0, T)`.
pub fn check_observability<S: LtvSystem + ?Sized>(
    sys: &S,
    horizon: f64,
    dt: f64,
    rel_tol: f64,
) -> Result<RankVerdict> {
    let w = observability_grammian(sys, 0.0, horizon, dt)?;
    Ok(RankVerdict::of(&w, sys.dim(), rel_tol))
}

/// Window starts per `T` of span in [`check_uco`].
pub const UCO_WINDOWS_PER_LENGTH: usize = 16;

/// Uniform complete observability over `[0, horizon]` with window length `T`.
///
/// `δ` is the smallest eigenvalue of `W(t₀, t₀ + T)` minimised over window
/// starts `t₀` spaced `T / 16` apart on `[0, horizon − T]`. Returns `None` when
/// `δ` does not clear `n·10⁻¹⁰` times the largest Grammian norm seen.
pub fn check_uco<S: LtvSystem + ?Sized>(
    sys: &S,
    window: f64,
    horizon: f64,
    dt: f64,
) -> Result<Option<(f64, f64)>> {
    check_uco_with(sys, window, horizon, dt, Exec::default())
}

pub fn check_uco_with<S: LtvSystem + ?Sized>(
    sys: &S,
    window: f64,
    horizon: f64,
    dt: f64,
    exec: Exec,
) -> Result<Option<(f64, f64)>> {
    if !(window > 0.0) || horizon < window {
        return Err(crate::Error::InvalidGrid(format!(
            "UCO check needs 0 < T <= horizon (T = {window}, horizon = {horizon})"
        )));
    }
    let span = horizon - window;
    let stride = window / UCO_WINDOWS_PER_LENGTH as f64;
    let count = (span / stride * (1.0 - 1e-12)).floor() as usize;
    let mut starts: Vec<f64> = (0..=count).map(|j| j as f64 * stride).collect();
    if span - starts.last().copied().unwrap_or(0.0) > 1e-12 * horizon.max(1.0) {
        starts.push(span);
    }

    let windows = exec.map(&starts, |&t0| -> Result<(f64, f64)> {
        let w = observability_grammian(sys, t0, t0 + window, dt)?;
        let min_eig = symmetric_eigenvalues(&w).first().copied().unwrap_or(0.0);
        Ok((min_eig, singular_values(&w).first().copied().unwrap_or(0.0)))
    });
    let mut delta = f64::INFINITY;
    let mut scale: f64 = 0.0;
    for w in windows {
        let (min_eig, top) = w?;
        delta = delta.min(min_eig);
        scale = scale.max(top);
    }
    let tol = default_rel_tol(sys.dim()) * scale;
    Ok(if delta > tol { Some((window, delta)) } else { None })
}

/// Trapezoid integral of `ψψᵀ` over the samples.
pub fn regressor_gramian(samples: &[RegressorSample]) -> Matrix {
    let n = samples.first().map_or(0, |s| s.psi.len());
    let mut acc = Matrix::zeros(n, n);
    for pair in samples.windows(2) {
        let h = 0.5 * (pair[1].t - pair[0].t);
        accumulate_outer(&mut acc, &pair[0].psi, h);
        accumulate_outer(&mut acc, &pair[1].psi, h);
    }
    acc.symmetrize();
    acc
}

/// Interval excitation: running trapezoid accumulation of `ψψᵀ`.
///
/// `t_d` is the first sample time where the smallest eigenvalue of the
/// accumulated matrix exceeds `rel_tol · trace`; `c_d` is that eigenvalue.
pub fn check_interval_excitation(samples: &[RegressorSample], rel_tol: f64) -> ExcitationReport {
    let n = samples.first().map_or(0, |s| s.psi.len());
    let mut acc = Matrix::zeros(n, n);
    let mut t_d = None;
    let mut c_d = 0.0;
    for pair in samples.windows(2) {
        let h = 0.5 * (pair[1].t - pair[0].t);
        accumulate_outer(&mut acc, &pair[0].psi, h);
        accumulate_outer(&mut acc, &pair[1].psi, h);
        if t_d.is_none() {
            let tr = acc.trace();
            if tr > 0.0 {
                let min_eig = symmetric_eigenvalues(&acc)[0];
                if min_eig > rel_tol * tr {
                    t_d = Some(pair[1].t);
                    c_d = min_eig;
                }
            }
        }
    }
    acc.symmetrize();
    let final_min_eig = if n > 0 {
        symmetric_eigenvalues(&acc)[0]
    } else {
        0.0
    };
    ExcitationReport {
        t_d,
        c_d,
        final_min_eig,
        uco_margin: None,
        grammian_rank: rank_with_tolerance(&acc, rel_tol),
        identifiability_times: check_identifiability(samples, rel_tol),
    }
}

/// Sample times whose regressors form a full-rank `n × n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentifiabilityCertificate {
    pub times: Vec<f64>,
    pub columns: Matrix,
    /// `σ_min / σ_max` of `columns`.
    pub margin: f64,
}

/// Greedy search for `n` sample times with `rank [ψ(t₁)|…|ψ(t_n)] = n`.
pub fn check_identifiability(samples: &[RegressorSample], rel_tol: f64) -> Option<Vec<f64>> {
    identifiability_certificate(samples, rel_tol).map(|c| c.times)
}

pub fn identifiability_certificate(
    samples: &[RegressorSample],
    rel_tol: f64,
) -> Option<IdentifiabilityCertificate> {
    let n = samples.first()?.psi.len();
    // Earliest sample whose regressor norm is within round-off of the largest.
    let norms: Vec<f64> = samples.iter().map(|s| norm(&s.psi)).collect();
    let peak = norms.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return None;
    }
    let first = norms.iter().position(|&v| v >= peak * (1.0 - 1e-9))?;
    greedy_from(samples, first, n, rel_tol)
}

/// Greedy search followed, on failure, by `restarts` randomized restarts from
/// random first columns.
pub fn identifiability_with_restarts(
    samples: &[RegressorSample],
    rel_tol: f64,
    restarts: usize,
    seed: u64,
) -> Option<IdentifiabilityCertificate> {
    if let Some(cert) = identifiability_certificate(samples, rel_tol) {
        return Some(cert);
    }
    let n = samples.first()?.psi.len();
    let nonzero: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].psi.iter().any(|&v| v != 0.0))
        .collect();
    if nonzero.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..restarts).find_map(|_| {
        let first = nonzero[rng.random_range(0..nonzero.len())];
        greedy_from(samples, first, n, rel_tol)
    })
}

fn greedy_from(
    samples: &[RegressorSample],
    first: usize,
    n: usize,
    rel_tol: f64,
) -> Option<IdentifiabilityCertificate> {
    let mut chosen = vec![first];
    while chosen.len() < n {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in samples.iter().enumerate() {
            if chosen.contains(&i) || s.psi.iter().all(|&v| v == 0.0) {
                continue;
            }
            let mut cols: Vec<&[f64]> = chosen.iter().map(|&j| samples[j].psi.as_slice()).collect();
            cols.push(&s.psi);
            let score = smallest_singular_value(&Matrix::from_columns(&cols));
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        chosen.push(best?.0);
    }
    let cols: Vec<&[f64]> = chosen.iter().map(|&j| samples[j].psi.as_slice()).collect();
    let columns = Matrix::from_columns(&cols);
    if rank_with_tolerance(&columns, rel_tol) != n {
        return None;
    }
    let sv = singular_values(&columns);
    Some(IdentifiabilityCertificate {
        times: chosen.iter().map(|&j| samples[j].t).collect(),
        margin: sv[n - 1] / sv[0],
        columns,
    })
}

/// Regressor samples `ψ(t) = Φ_A(t)ᵀ C(t)` on the covering grid of `[0, T]`.
/// `𝒴` is not needed by the rank checks and is left at zero.
pub fn regressor_samples<S: LtvSystem + ?Sized>(
    sys: &S,
    horizon: f64,
    dt: f64,
) -> Result<Vec<RegressorSample>> {
    sys.check_span(0.0, horizon)?;
    let grid = OdeGrid::covering(0.0, horizon, dt)?;
    let n = sys.dim();
    let mut g = gpebo_init(n, &vec![0.0; n], 0.0);
    let mut out = Vec::with_capacity(grid.len());
    for k in 0..=grid.steps() {
        g.t = grid.time(k);
        let mut s = make_regressor(&g, sys, 0.0);
        s.y_cal = 0.0;
        out.push(s);
        if k < grid.steps() {
            g = gpebo_step(&g, sys, grid.dt())?;
        }
    }
    Ok(out)
}

/// Side-by-side observability and identifiability verdicts.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub descriptor: String,
    pub horizon: f64,
    pub rel_tol: f64,
    pub observability: RankVerdict,
    pub identifiable: bool,
    pub identifiability_times: Option<Vec<f64>>,
    /// `σ_min / σ_max` of the certificate matrix (zero when none was found).
    pub identifiability_margin: f64,
    /// Whether the randomized restarts were needed.
    pub used_restarts: bool,
}

impl EquivalenceReport {
    pub fn agree(&self) -> bool {
        self.observability.full_rank == self.identifiable
    }
}

pub const IDENTIFIABILITY_RESTARTS: usize = 16;

/// Observability of the plant on `[0, T]` next to identifiability of the
/// regression it induces, at the same relative tolerance.
///
/// A disagreement is reported, never reconciled; before reporting one for a
/// full-rank Grammian the greedy search gets randomized restarts.
pub fn equivalence_report<S: LtvSystem + ?Sized>(
    sys: &S,
    horizon: f64,
    dt: f64,
    rel_tol: f64,
) -> Result<EquivalenceReport> {
    let observability = check_observability(sys, horizon, dt, rel_tol)?;
    let samples = regressor_samples(sys, horizon, dt)?;
    let mut cert = identifiability_certificate(&samples, rel_tol);
    let mut used_restarts = false;
    if cert.is_none() && observability.full_rank {
        used_restarts = true;
        cert = identifiability_with_restarts(&samples, rel_tol, IDENTIFIABILITY_RESTARTS, 0);
    }
    Ok(EquivalenceReport {
        descriptor: sys.descriptor().to_string(),
        horizon,
        rel_tol,
        observability,
        identifiable: cert.is_some(),
        identifiability_margin: cert.as_ref().map_or(0.0, |c| c.margin),
        identifiability_times: cert.map(|c| c.times),
        used_restarts,
    })
}

/// [`equivalence_report`] over many systems.
pub fn equivalence_fleet<S: LtvSystem + Sync>(
    systems: &[S],
    horizon: f64,
    dt: f64,
    rel_tol: f64,
    exec: Exec,
) -> Vec<Result<EquivalenceReport>> {
    exec.map(systems, |sys| equivalence_report(sys, horizon, dt, rel_tol))
}

/// Seeded random tabulated plant on `[0, horizon]`.
///
/// `A(t) = K(t) − 0.1·M(t)ᵀM(t)` with `K` skew-symmetric, so `A + Aᵀ ≤ 0` at
/// every sample and along the linear interpolation between them, which keeps
/// `‖Φ(t, τ)‖ ≤ 1`. With `observable = false` the last state is decoupled
/// from the others and hidden from the output.
pub fn random_tabulated_system(
    seed: u64,
    n: usize,
    observable: bool,
    horizon: f64,
) -> TabulatedSystem {
    const TABLE_STEP: f64 = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (horizon / TABLE_STEP).ceil() as usize + 1;
    let times: Vec<f64> = (0..rows)
        .map(|k| (k as f64 * TABLE_STEP).min(horizon))
        .collect();
    let (mut a, mut b, mut c) = (vec![], vec![], vec![]);
    for _ in 0..rows {
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.random_range(-1.5..1.5);
                k[(i, j)] = v;
                k[(j, i)] = -v;
            }
        }
        let m = Matrix::from_vec(n, n, (0..n * n).map(|_| rng.random_range(-0.5..0.5)).collect());
        let mut am = k.sub(&m.transpose().matmul(&m).scale(0.1));
        let bv: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut cv: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if !observable {
            let last = n - 1;
            for j in 0..last {
                am[(last, j)] = 0.0;
                am[(j, last)] = 0.0;
            }
            cv[last] = 0.0;
        }
        a.push(am);
        b.push(bv);
        c.push(cv);
    }
    let kind = if observable { "observable" } else { "unobservable" };
    TabulatedSystem::new(format!("random-{seed} n={n} {kind}"), times, a, b, c)
        .expect("generated table is well-formed")
}

/// Summary of an error trace.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceMetrics {
    /// Least-squares slope of `ln(error)` over the fit window;
    /// `-∞` for traces that are (or immediately become) exactly zero.
    pub rate: f64,
    pub final_error: f64,
    /// First time the error is at most half its initial value.
    pub t_half: Option<f64>,
}

/// A trace whose final-quarter median is at or below this fraction of its
/// largest error is treated as having bottomed out at round-off.
pub const RESOLUTION_FLOOR: f64 = 1e-12;

/// Rate fitted over the final quarter of the resolvable part of the trace.
///
/// When the trace ends on a round-off plateau (see [`RESOLUTION_FLOOR`]) the
/// resolvable part stops at the first sample within a decade of the plateau
/// level; past that point the logarithm carries no rate information.
/// Otherwise the whole trace is resolvable.
pub fn convergence_metrics(trace: &[(f64, f64)]) -> ConvergenceMetrics {
    let end = resolvable_end(trace);
    let start = match (trace.first(), end) {
        (Some(&(t0, _)), Some(t_end)) => t0 + 0.75 * (t_end - t0),
        _ => f64::NEG_INFINITY,
    };
    convergence_metrics_from(trace, start)
}

/// Like [`convergence_metrics`] with the fit window starting at
/// `window_start` and running to the end of the resolvable part.
pub fn convergence_metrics_from(trace: &[(f64, f64)], window_start: f64) -> ConvergenceMetrics {
    let final_error = trace.last().map_or(0.0, |&(_, e)| e);
    let t_half = trace.first().and_then(|&(_, e0)| {
        trace
            .iter()
            .find(|&&(_, e)| e <= 0.5 * e0)
            .map(|&(t, _)| t)
    });
    let rate = match resolvable_end(trace) {
        None => f64::NEG_INFINITY,
        Some(t_end) => {
            let pts: Vec<(f64, f64)> = trace
                .iter()
                .filter(|&&(t, _)| t >= window_start && t <= t_end)
                .map(|&(t, e)| (t, e.ln()))
                .collect();
            least_squares_slope(&pts).unwrap_or(f64::NEG_INFINITY)
        }
    };
    ConvergenceMetrics {
        rate,
        final_error,
        t_half,
    }
}

/// Last time before the error first reaches the round-off floor (or the
/// last sample time); `None` when nothing is resolvable.
fn resolvable_end(trace: &[(f64, f64)]) -> Option<f64> {
    let peak = trace.iter().fold(0.0f64, |m, &(_, e)| m.max(e));
    if !(peak > 0.0) {
        return None;
    }
    let (t0, t1) = (trace[0].0, trace[trace.len() - 1].0);
    let tail_start = t0 + 0.75 * (t1 - t0);
    let mut tail: Vec<f64> = trace
        .iter()
        .filter(|&&(t, _)| t >= tail_start)
        .map(|&(_, e)| e)
        .collect();
    tail.sort_by(f64::total_cmp);
    let plateau = tail[tail.len() / 2];
    let floor = if plateau <= RESOLUTION_FLOOR * peak {
        10.0 * plateau
    } else {
        0.0
    };
    let mut last = None;
    for &(t, e) in trace {
        if e <= floor {
            break;
        }
        last = Some(t);
    }
    last
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltv_system::{finite_window_rotor, rotor, scalar_drift, FnSystem};
    use crate::numerics::max_abs_diff;
    use std::f64::consts::PI;

    fn still() -> FnSystem {
        FnSystem::constant("still", Matrix::zeros(2, 2), vec![0.0; 2], vec![1.0, 0.0])
    }

    #[test]
    fn observability_examples() {
        let v = check_observability(&rotor(), 2.0 * PI, 1e-3, 1e-10).unwrap();
        assert_eq!((v.full_rank, v.rank), (true, 2));
        assert!((v.margin - 1.0).abs() < 1e-6);
        let v = check_observability(&finite_window_rotor(), 2.0 * PI, 1e-3, 1e-10).unwrap();
        assert_eq!((v.full_rank, v.rank), (true, 2));
        let v = check_observability(&still(), 3.0, 1e-3, 1e-10).unwrap();
        assert_eq!((v.full_rank, v.rank), (false, 1));
        assert_eq!(v.margin, 0.0);
    }

    #[test]
    fn uco_examples() {
        let (t, delta) = check_uco(&rotor(), 2.0 * PI, 8.0 * PI, 1e-3).unwrap().unwrap();
        assert_eq!(t, 2.0 * PI);
        assert!((delta - PI).abs() < 1e-4);
        assert!(check_uco(&finite_window_rotor(), 2.0 * PI, 8.0 * PI, 1e-3)
            .unwrap()
            .is_none());
        let silent = FnSystem::constant("silent", Matrix::zeros(2, 2), vec![0.0; 2], vec![0.0; 2]);
        assert!(check_uco(&silent, 1.0, 3.0, 1e-3).unwrap().is_none());
        assert!(check_uco(&rotor(), 2.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn uco_modes_agree() {
        let seq = check_uco_with(&rotor(), 2.0, 6.0, 1e-2, Exec::Sequential).unwrap();
        let par = check_uco_with(&rotor(), 2.0, 6.0, 1e-2, Exec::Parallel).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn uco_implies_observability() {
        let systems = [rotor(), finite_window_rotor(), still()];
        for sys in &systems {
            if let Some((_, delta)) = check_uco(sys, 2.0 * PI, 6.0 * PI, 1e-2).unwrap() {
                assert!(delta > 0.0);
                assert!(check_observability(sys, 2.0 * PI, 1e-2, 1e-10).unwrap().full_rank);
            }
        }
    }

    fn constant_samples(psi: Vec<f64>, count: usize, dt: f64) -> Vec<RegressorSample> {
        (0..count)
            .map(|k| RegressorSample {
                t: k as f64 * dt,
                y_cal: 0.0,
                psi: psi.clone(),
            })
            .collect()
    }

    #[test]
    fn excitation_examples() {
        let r = check_interval_excitation(&constant_samples(vec![0.0, 0.0], 100, 0.01), 1e-10);
        assert_eq!((r.t_d, r.c_d, r.grammian_rank), (None, 0.0, 0));
        assert!(r.identifiability_times.is_none());

        let r = check_interval_excitation(&constant_samples(vec![1.0], 100, 0.01), 1e-10);
        assert_eq!(r.t_d, Some(0.01));
        assert!((r.c_d - 0.01).abs() < 1e-15);
        assert!((r.final_min_eig - 0.99).abs() < 1e-12);

        let samples = regressor_samples(&rotor(), 2.0 * PI, 1e-3).unwrap();
        let r = check_interval_excitation(&samples, 1e-10);
        assert!(r.t_d.unwrap() < 0.1);
        assert!((r.final_min_eig - PI).abs() < 1e-6);
        assert!(regressor_gramian(&samples).max_abs_diff(&Matrix::identity(2).scale(PI)) < 1e-6);
        assert_eq!(r.grammian_rank, 2);
    }

    #[test]
    fn scalar_excitation_grows_linearly() {
        let samples = regressor_samples(&scalar_drift(), 3.0, 1e-3).unwrap();
        let r = check_interval_excitation(&samples, 1e-10);
        assert!((r.final_min_eig - 3.0).abs() < 1e-12);
        assert_eq!(r.t_d, Some(samples[1].t));
    }

    #[test]
    fn identifiability_examples() {
        assert!(check_identifiability(&constant_samples(vec![0.0, 0.0], 10, 0.1), 1e-10).is_none());

        let samples = regressor_samples(&rotor(), 2.0 * PI, 1e-3).unwrap();
        let cert = identifiability_certificate(&samples, 1e-10).unwrap();
        assert_eq!(cert.times[0], 0.0);
        assert!((cert.times[1] - PI / 2.0).abs() < 1e-3 || (cert.times[1] - 1.5 * PI).abs() < 1e-3);
        assert!(max_abs_diff(&cert.columns.column(0), &[1.0, 0.0]) < 1e-12);
        assert!(cert.margin > 0.99);

        let times = check_identifiability(&constant_samples(vec![1.0], 5, 0.1), 1e-10).unwrap();
        assert_eq!(times.len(), 1);
    }

    #[test]
    fn rank_one_regressor_is_not_identifiable() {
        let samples: Vec<RegressorSample> = (0..50)
            .map(|k| RegressorSample {
                t: k as f64 * 0.1,
                y_cal: 0.0,
                psi: vec![(k as f64).sin(), 2.0 * (k as f64).sin()],
            })
            .collect();
        assert!(check_identifiability(&samples, 1e-8).is_none());
        assert!(identifiability_with_restarts(&samples, 1e-8, 16, 1).is_none());
    }

    #[test]
    fn equivalence_examples() {
        let r = equivalence_report(&rotor(), 2.0 * PI, 1e-3, 1e-8).unwrap();
        assert!(r.observability.full_rank && r.identifiable && r.agree());

        let r = equivalence_report(&still(), 5.0, 1e-3, 1e-8).unwrap();
        assert!(!r.observability.full_rank && !r.identifiable && r.agree());

        let r = equivalence_report(&finite_window_rotor(), 4.0 * PI, 1e-3, 1e-8).unwrap();
        assert!(r.observability.full_rank && r.identifiable && r.agree());
        assert!(r.identifiability_times.unwrap().iter().all(|&t| t <= 2.0 * PI));
    }

    #[test]
    fn regressor_gramian_equals_observability_grammian() {
        for seed in 0..3 {
            let sys = random_tabulated_system(seed, 3, true, 4.0);
            let w = observability_grammian(&sys, 0.0, 4.0, 1e-3).unwrap();
            let samples = regressor_samples(&sys, 4.0, 1e-3).unwrap();
            assert!(regressor_gramian(&samples).max_abs_diff(&w) < 1e-6);
        }
    }

    #[test]
    fn random_systems_are_uniformly_stable() {
        for seed in 0..4 {
            let sys = random_tabulated_system(seed, 3, seed % 2 == 0, 5.0);
            let c1 = crate::ltv_system::uniform_stability_bound(&sys, 5.0, 1e-2).unwrap();
            assert!(c1 <= 1.0 + 1e-9, "c1 = {c1}");
        }
    }

    #[test]
    fn fleet_modes_agree() {
        let systems: Vec<TabulatedSystem> =
            (0..4).map(|s| random_tabulated_system(s, 2, s != 3, 3.0)).collect();
        let seq = equivalence_fleet(&systems, 3.0, 1e-2, 1e-8, Exec::Sequential);
        let par = equivalence_fleet(&systems, 3.0, 1e-2, 1e-8, Exec::Parallel);
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.as_ref().unwrap(), b.as_ref().unwrap());
        }
        assert!(!seq[3].as_ref().unwrap().observability.full_rank);
    }

    #[test]
    fn metrics_examples() {
        let exp: Vec<(f64, f64)> = (0..=1000).map(|k| {
            let t = k as f64 * 0.01;
            (t, (-2.0 * t).exp())
        }).collect();
        let m = convergence_metrics(&exp);
        assert!((m.rate + 2.0).abs() < 0.02);
        assert!((m.t_half.unwrap() - 2f64.ln() / 2.0).abs() < 0.01);

        let flat: Vec<(f64, f64)> = (0..100).map(|k| (k as f64, 0.3)).collect();
        let m = convergence_metrics(&flat);
        assert_eq!(m.rate, 0.0);
        assert_eq!(m.final_error, 0.3);

        let zero: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 0.0)).collect();
        assert_eq!(convergence_metrics(&zero).rate, f64::NEG_INFINITY);
    }

    #[test]
    fn metrics_follow_deep_decay() {
        let trace: Vec<(f64, f64)> = (0..=1000).map(|k| {
            let t = k as f64 * 0.01;
            (t, (-10.0 * t).exp())
        }).collect();
        assert!((convergence_metrics(&trace).rate + 10.0).abs() < 1e-6);
    }

    #[test]
    fn metrics_ignore_round_off_plateau() {
        // Exponential decay that bottoms out at a round-off plateau.
        let trace: Vec<(f64, f64)> = (0..=3000).map(|k| {
            let t = k as f64 * 0.01;
            (t, (-3.0 * t).exp().max(5e-15))
        }).collect();
        let m = convergence_metrics(&trace);
        assert!((m.rate + 3.0).abs() < 0.03, "rate {}", m.rate);
        let m = convergence_metrics_from(&trace, 2.0);
        assert!((m.rate + 3.0).abs() < 0.03);
    }
}
