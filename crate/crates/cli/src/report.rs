//! Run summary and its JSON / text renderings.

use std::fmt::Write as _;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UcoSummary {
    pub window: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcitationSummary {
    pub t_d: Option<f64>,
    pub c_d: f64,
    pub final_min_eig: f64,
    pub uco: Option<UcoSummary>,
    pub grammian_rank: usize,
    pub identifiability_times: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceSummary {
    pub rel_tol: f64,
    pub observable: bool,
    pub observability_rank: usize,
    pub observability_margin: f64,
    pub identifiable: bool,
    pub identifiability_margin: f64,
    pub agree: bool,
    pub used_restarts: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineSummary {
    pub initial_state_error: f64,
    pub final_state_error: f64,
    pub lost_definiteness: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub descriptor: String,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    pub disturbance: Option<String>,
    pub initial_state_error: f64,
    pub final_state_error: f64,
    pub final_param_error: f64,
    /// Slope of `ln |x̂ − x|` over the tail; absent when the error vanished.
    pub fitted_rate: Option<f64>,
    pub t_half: Option<f64>,
    /// Time after which `Δ` no longer moves appreciably.
    pub delta_settle_time: Option<f64>,
    /// Slope of `ln |x̂ − x|` from `delta_settle_time` on.
    pub settled_rate: Option<f64>,
    /// `−γ Δ²` at the final time.
    pub target_rate: f64,
    pub delta_final: f64,
    pub delta_sup: f64,
    pub max_step_ratio: f64,
    pub stability_bound: f64,
    pub excitation: ExcitationSummary,
    pub equivalence: EquivalenceSummary,
    pub baseline: Option<BaselineSummary>,
    pub warnings: Vec<String>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x:e}"))
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k:<28}{v}");
        };
        kv("scenario", format!("{} ({})", self.scenario, self.descriptor));
        kv("n", self.n.to_string());
        kv("dt", format!("{:e}", self.dt));
        kv("t_final", format!("{:e}", self.t_final));
        kv("steps", self.steps.to_string());
        kv("disturbance", self.disturbance.clone().unwrap_or_else(|| "none".into()));
        kv("initial_state_error", format!("{:e}", self.initial_state_error));
        kv("final_state_error", format!("{:e}", self.final_state_error));
        kv("final_param_error", format!("{:e}", self.final_param_error));
        kv("fitted_rate", opt(self.fitted_rate));
        kv("t_half", opt(self.t_half));
        kv("delta_settle_time", opt(self.delta_settle_time));
        kv("settled_rate", opt(self.settled_rate));
        kv("target_rate", format!("{:e}", self.target_rate));
        kv("delta_final", format!("{:e}", self.delta_final));
        kv("delta_sup", format!("{:e}", self.delta_sup));
        kv("max_step_ratio", format!("{:e}", self.max_step_ratio));
        kv("stability_bound", format!("{:e}", self.stability_bound));
        let e = &self.excitation;
        kv("excitation.t_d", opt(e.t_d));
        kv("excitation.c_d", format!("{:e}", e.c_d));
        kv("excitation.final_min_eig", format!("{:e}", e.final_min_eig));
        kv(
            "excitation.uco",
            e.uco
                .as_ref()
                .map_or_else(|| "absent".into(), |u| format!("T = {:e}, delta = {:e}", u.window, u.delta)),
        );
        kv("excitation.grammian_rank", e.grammian_rank.to_string());
        kv(
            "excitation.ident_times",
            e.identifiability_times.as_ref().map_or_else(
                || "none".into(),
                |ts| ts.iter().map(|t| format!("{t:e}")).collect::<Vec<_>>().join(" "),
            ),
        );
        let q = &self.equivalence;
        kv("equivalence.rel_tol", format!("{:e}", q.rel_tol));
        kv(
            "equivalence.observable",
            format!("{} (rank {}, margin {:e})", q.observable, q.observability_rank, q.observability_margin),
        );
        kv(
            "equivalence.identifiable",
            format!("{} (margin {:e})", q.identifiable, q.identifiability_margin),
        );
        kv("equivalence.agree", q.agree.to_string());
        if let Some(b) = &self.baseline {
            kv("baseline.initial_error", format!("{:e}", b.initial_state_error));
            kv("baseline.final_error", format!("{:e}", b.final_state_error));
            kv("baseline.lost_definiteness", b.lost_definiteness.to_string());
        }
        kv("warnings", self.warnings.len().to_string());
        for w in &self.warnings {
            let _ = writeln!(s, "  - {w}");
        }
        s
    }
}
