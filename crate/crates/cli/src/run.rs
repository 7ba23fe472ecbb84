//! Plant + observer simulation for one scenario, with optional disturbance
//! and Kalman-Bucy baseline, followed by the excitation and equivalence
//! analyses.

use std::f64::consts::PI;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use affobs_core::analysis::{
    check_interval_excitation, check_uco, convergence_metrics, convergence_metrics_from,
    equivalence_report,
};
use affobs_core::gd_estimator::{mix, step_size_ratio};
use affobs_core::gpebo::{make_regressor, true_theta};
use affobs_core::ltv_system::{simulate_plant, uniform_stability_bound};
use affobs_core::numerics::{default_rel_tol, norm, vsub};
use affobs_core::observer::{
    kalman_bucy_init, kalman_bucy_step, observer_init, observer_output, observer_step_disturbed,
};
use affobs_core::OdeGrid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::config::{ConfigError, Disturbance, DisturbanceKind, ScenarioConfig};
use crate::report::{
    BaselineSummary, EquivalenceSummary, ExcitationSummary, RunReport, UcoSummary,
};
use crate::trace::{Trace, TraceRow};

/// Relative tolerance shared by the observability and identifiability checks.
pub const EQUIVALENCE_REL_TOL: f64 = 1e-8;

pub const STABILITY_WARN: f64 = 1e3;
pub const STATE_NORM_WARN: f64 = 1e6;
pub const WEAK_DELTA_WARN: f64 = 1e-6;

/// Relative band around the final `Δ` that counts as settled.
pub const DELTA_SETTLE_TOL: f64 = 1e-3;

/// Earliest time from which `Δ` stays within [`DELTA_SETTLE_TOL`] of its
/// final value.
pub fn delta_settle_time(trace: &Trace) -> Option<f64> {
    let last = trace.rows.last()?.delta;
    if last == 0.0 {
        return None;
    }
    let band = DELTA_SETTLE_TOL * last.abs();
    let mut settle = None;
    for row in trace.rows.iter().rev() {
        if (row.delta - last).abs() > band {
            break;
        }
        settle = Some(row.t);
    }
    settle
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Numerics(affobs_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<affobs_core::Error> for RunError {
    fn from(e: affobs_core::Error) -> Self {
        match e {
            affobs_core::Error::Io(io) => RunError::Io(io),
            other => RunError::Numerics(other),
        }
    }
}

impl RunError {
    /// 2 for configuration problems, 3 for numerical blow-up, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerics(affobs_core::Error::NonFinite { .. }) => 3,
            RunError::Numerics(_) => 2,
            RunError::Io(_) => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub trace: Trace,
}

/// `d` at every grid point.
pub fn disturbance_samples(d: Option<&Disturbance>, grid: &OdeGrid) -> Vec<f64> {
    let Some(d) = d else {
        return vec![0.0; grid.len()];
    };
    match d.kind {
        DisturbanceKind::Sinusoid { frequency } => grid
            .times()
            .map(|t| d.amplitude * (2.0 * PI * frequency * t).sin())
            .collect(),
        DisturbanceKind::Gaussian { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, d.amplitude).expect("amplitude validated");
            (0..grid.len()).map(|_| normal.sample(&mut rng)).collect()
        }
    }
}

fn describe(d: &Disturbance) -> String {
    match d.kind {
        DisturbanceKind::Gaussian { seed } => format!("gaussian amplitude {:e} seed {seed}", d.amplitude),
        DisturbanceKind::Sinusoid { frequency } => {
            format!("sinusoid amplitude {:e} frequency {:e}", d.amplitude, frequency)
        }
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    let sys = cfg.scenario.system();
    let sys = &*sys;
    let n = cfg.n();
    let grid = OdeGrid::covering(0.0, cfg.t_final, cfg.dt)?;
    let dt = grid.dt();
    let traj = simulate_plant(sys, &cfg.x0, &grid)?;
    let theta = true_theta(&cfg.x0, &cfg.xi0);
    let dist = disturbance_samples(cfg.disturbance.as_ref(), &grid);

    let mut obs = observer_init(sys, &cfg.gd, &cfg.xi0, 0.0)?;
    let mut kb = match &cfg.baseline {
        Some(b) => Some(kalman_bucy_init(&observer_output(&obs), b.p0_scale, b.q, b.r, 0.0)?),
        None => None,
    };

    let mut rows = Vec::with_capacity(grid.len());
    let mut samples = Vec::with_capacity(grid.len());
    let (mut delta_sup, mut max_ratio, mut max_value) = (0.0f64, 0.0f64, 0.0f64);
    let mut max_gradient_ratio = 0.0f64;
    for k in 0..grid.len() {
        let x = &traj.states[k];
        let y = traj.outputs[k];
        let x_hat = observer_output(&obs);
        let mut sample = make_regressor(&obs.gpebo, sys, y);
        sample.y_cal += dist[k];
        let mixed = mix(&obs.gd, &cfg.gd);
        delta_sup = delta_sup.max(mixed.delta.abs());
        max_ratio = max_ratio.max(step_size_ratio(&mixed, &cfg.gd, dt));
        let psi_sq: f64 = sample.psi.iter().map(|p| p * p).sum();
        max_gradient_ratio = max_gradient_ratio.max(cfg.gd.gamma_g * psi_sq * dt);

        let row = TraceRow {
            t: grid.time(k),
            state_err: norm(&vsub(&x_hat, x)),
            x: x.clone(),
            x_hat,
            theta_hat: obs.gd.theta_hat.clone(),
            theta_g_hat: obs.gd.theta_g_hat.clone(),
            param_err: norm(&vsub(&obs.gd.theta_hat, theta.as_slice())),
            delta: mixed.delta,
            y_cal: sample.y_cal,
            psi: sample.psi.clone(),
            kb_err: kb.as_ref().map(|s| norm(&vsub(&s.x_hat, x))),
        };
        max_value = row.values().iter().fold(max_value, |m, v| m.max(v.abs()));
        rows.push(row);
        samples.push(sample);

        if k < grid.steps() {
            obs = observer_step_disturbed(&obs, sys, y, dist[k], dt)?.0;
            if let Some(s) = &kb {
                kb = Some(kalman_bucy_step(s, sys, y + dist[k], dt)?);
            }
        }
    }
    let trace = Trace {
        n,
        baseline: kb.is_some(),
        rows,
    };

    let errors = trace.state_errors();
    let metrics = convergence_metrics(&errors);
    let settle = delta_settle_time(&trace);
    let settled_rate = settle
        .map(|t| convergence_metrics_from(&errors, t).rate)
        .filter(|r| r.is_finite());
    let excitation = check_interval_excitation(&samples, default_rel_tol(n));
    let uco = check_uco(sys, cfg.uco_window, cfg.t_final, cfg.dt)?;
    let equivalence = equivalence_report(sys, cfg.t_final, cfg.dt, EQUIVALENCE_REL_TOL)?;
    let stability_bound = uniform_stability_bound(sys, cfg.t_final, cfg.dt)?;

    let first = &trace.rows[0];
    let last = trace.rows.last().expect("grid has points");
    let mut warnings = Vec::new();
    if stability_bound > STABILITY_WARN {
        warnings.push(format!(
            "uniform stability bound {stability_bound:e} exceeds {STABILITY_WARN:e}; the plant may not be uniformly stable"
        ));
    }
    if max_value > STATE_NORM_WARN {
        warnings.push(format!("trace magnitude reached {max_value:e}"));
    }
    if delta_sup < WEAK_DELTA_WARN {
        warnings.push(format!(
            "sup |Delta| = {delta_sup:e} is below {WEAK_DELTA_WARN:e}; the regressor is too weakly excited for the parameter estimate to move"
        ));
    }
    if max_ratio > 1.0 {
        warnings.push(format!(
            "gamma * Delta^2 * dt reached {max_ratio:e}; reduce dt or gamma"
        ));
    }
    if max_gradient_ratio > 1.0 {
        warnings.push(format!(
            "gamma_g * |psi|^2 * dt reached {max_gradient_ratio:e}; the gradient estimator is stiff at this step"
        ));
    }
    if excitation.t_d.is_none() {
        warnings.push("interval excitation not reached on the run horizon".into());
    }
    if equivalence.observability.full_rank != equivalence.identifiable {
        warnings.push("observability and identifiability verdicts disagree".into());
    }
    if kb.as_ref().is_some_and(|s| s.lost_definiteness) {
        warnings.push("baseline covariance lost positive definiteness".into());
    }

    let report = RunReport {
        scenario: cfg.scenario.id().into(),
        descriptor: sys.descriptor().into(),
        n,
        dt,
        t_final: cfg.t_final,
        steps: grid.steps(),
        disturbance: cfg.disturbance.as_ref().map(describe),
        initial_state_error: first.state_err,
        final_state_error: last.state_err,
        final_param_error: last.param_err,
        fitted_rate: Some(metrics.rate).filter(|r| r.is_finite()),
        t_half: metrics.t_half,
        delta_settle_time: settle,
        settled_rate,
        target_rate: -cfg.gd.gamma * last.delta * last.delta,
        delta_final: last.delta,
        delta_sup,
        max_step_ratio: max_ratio,
        stability_bound,
        excitation: ExcitationSummary {
            t_d: excitation.t_d,
            c_d: excitation.c_d,
            final_min_eig: excitation.final_min_eig,
            uco: uco.map(|(window, delta)| UcoSummary { window, delta }),
            grammian_rank: excitation.grammian_rank,
            identifiability_times: excitation.identifiability_times,
        },
        equivalence: EquivalenceSummary {
            rel_tol: equivalence.rel_tol,
            observable: equivalence.observability.full_rank,
            observability_rank: equivalence.observability.rank,
            observability_margin: equivalence.observability.margin,
            identifiable: equivalence.identifiable,
            identifiability_margin: equivalence.identifiability_margin,
            agree: equivalence.agree(),
            used_restarts: equivalence.used_restarts,
        },
        baseline: kb.as_ref().map(|s| BaselineSummary {
            initial_state_error: first.kb_err.unwrap_or(0.0),
            final_state_error: last.kb_err.unwrap_or(0.0),
            lost_definiteness: s.lost_definiteness,
        }),
        warnings,
    };
    Ok(RunOutput { report, trace })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

/// Writes `trace.csv` and `report.json` / `report.txt` into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path, format: ReportFormat) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let f = fs::File::create(dir.join("trace.csv"))?;
    out.trace.write_csv(BufWriter::new(f))?;
    match format {
        ReportFormat::Json => fs::write(dir.join("report.json"), out.report.to_json()),
        ReportFormat::Text => fs::write(dir.join("report.txt"), out.report.to_text()),
    }
}
