//! Session state machine. Sessions are rebuilt from their input log, so every
//! transition here must be a pure function of the log and the engine.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use verispace_core::optimize::state_seed;
use verispace_core::presets::PRESET_NAMES;
use verispace_core::treespace::{Action, FvtNode, ValuatorPool};
use verispace_core::{
    Error, ForesightTree, Money, PtConfig, PtOptimizer, PtOutcome, Scenario, VerificationState,
};

use crate::error::ApiError;
use crate::scenario_ref::ScenarioRef;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Active,
    /// Posterior reached `H_u`.
    Deployed,
    /// A stop recommendation was accepted.
    Stopped,
    /// Horizon or activity scope exhausted below `H_u`.
    Completed,
}

/// One line of a session's event log. Only inputs are stored; costs,
/// posteriors and statuses are recomputed on replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
// A log has one `Created` line; boxing it would only complicate matching.
#[allow(clippy::large_enum_variant)]
pub enum LogRecord {
    Created {
        id: String,
        scenario: ScenarioRef,
        config: PtConfig,
        seed: u64,
    },
    Result {
        activity: Action,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        result: Option<bool>,
        #[serde(rename = "override", default)]
        override_: bool,
    },
}

/// A history entry as shown to clients.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Event {
    pub seq: usize,
    /// Interval in which the activity ran.
    pub t: usize,
    pub activity: Action,
    pub result: Option<bool>,
    pub rework: bool,
    pub cost: Money,
    /// `base * penalty[t]` when rework was triggered, else zero.
    pub rework_cost: Money,
    /// Target posterior after the event.
    pub posterior: f64,
    #[serde(rename = "override")]
    pub overridden: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    /// Terminal session, nothing to recommend.
    Idle,
    Computing,
    Ready,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Recommendation {
    pub status: JobStatus,
    /// State the recommendation is for.
    pub state: VerificationState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fvt_expected_value: Option<Money>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub fvt: Option<Arc<ForesightTree>>,
}

impl Recommendation {
    fn with_status(status: JobStatus, state: VerificationState) -> Self {
        Recommendation {
            status,
            state,
            action: None,
            fvt_expected_value: None,
            iterations: None,
            error: None,
            fvt: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Totals {
    pub activity_cost: Money,
    pub rework_cost: Money,
    /// `B * P` once deployed above `H_u`.
    pub revenue: Money,
    pub net: Money,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionView {
    pub id: String,
    pub scenario: ScenarioRef,
    pub config: PtConfig,
    pub seed: u64,
    pub status: Status,
    pub state: VerificationState,
    pub activities: Vec<String>,
    pub posterior: f64,
    /// `H_l(t)` for the current interval; absent once the horizon is reached.
    pub lower_threshold: Option<f64>,
    pub upper_threshold: f64,
    pub history: Vec<Event>,
    pub totals: Totals,
    pub recommendation: Recommendation,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TreeView {
    pub status: JobStatus,
    pub state: VerificationState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_value: Option<Money>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<FvtNode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A pending optimization for one state. Runs without holding the session.
pub struct Job {
    pub generation: u64,
    scenario: Arc<Scenario>,
    state: VerificationState,
    seed: u64,
    config: PtConfig,
    cancel: Arc<AtomicBool>,
}

impl Job {
    /// Same seed derivation as the batch tools, so a session and `fvt` on
    /// the same seed agree.
    pub fn run(&self) -> verispace_core::Result<PtOutcome> {
        let opt = PtOptimizer {
            config: PtConfig {
                log_windows: false,
                ..self.config.clone()
            },
            cancel: Some(self.cancel.clone()),
        };
        let mut pool = ValuatorPool::new(&self.scenario);
        opt.run(&self.state, state_seed(self.seed, &self.state), &mut pool)
    }
}

pub struct Session {
    pub id: String,
    pub spec: ScenarioRef,
    pub config: PtConfig,
    pub seed: u64,
    pub scenario: Arc<Scenario>,
    pub state: VerificationState,
    pub posterior: f64,
    pub status: Status,
    pub history: Vec<Event>,
    pub recommendation: Recommendation,
    log: Vec<LogRecord>,
    generation: u64,
    cancel: Option<Arc<AtomicBool>>,
}

impl Session {
    pub fn create(
        id: String,
        spec: ScenarioRef,
        config: PtConfig,
        seed: u64,
    ) -> Result<Self, ApiError> {
        config.validate()?;
        if let Some(p) = spec.preset.as_deref().filter(|p| !PRESET_NAMES.contains(p)) {
            return Err(ApiError::bad_request(
                "unknown_scenario",
                format!("unknown preset `{p}`; see /scenarios"),
            ));
        }
        let scenario = spec.resolve()?;
        let state = scenario.initial_state();
        let posterior = scenario.posterior(&state)?;
        let status = status_for(&scenario, &state, posterior);
        let log = vec![LogRecord::Created {
            id: id.clone(),
            scenario: spec.clone(),
            config: config.clone(),
            seed,
        }];
        Ok(Session {
            id,
            spec,
            config,
            seed,
            scenario: Arc::new(scenario),
            state,
            posterior,
            status,
            history: Vec::new(),
            recommendation: Recommendation::with_status(JobStatus::Idle, state),
            log,
            generation: 0,
            cancel: None,
        })
    }

    /// Rebuilds a session from its log without running any optimization.
    pub fn replay(records: &[LogRecord]) -> Result<Self, ApiError> {
        let Some(LogRecord::Created {
            id,
            scenario,
            config,
            seed,
        }) = records.first()
        else {
            return Err(ApiError::internal(
                "event log does not start with a creation record",
            ));
        };
        let mut s = Session::create(id.clone(), scenario.clone(), config.clone(), *seed)?;
        for r in &records[1..] {
            let LogRecord::Result {
                activity,
                result,
                override_,
            } = r
            else {
                return Err(ApiError::internal("duplicate creation record"));
            };
            s.apply(activity, *result, *override_)?;
        }
        Ok(s)
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    /// Preconditions of a live submission beyond those `apply` enforces.
    pub fn check_recommended(&self, activity: &Action, override_: bool) -> Result<(), ApiError> {
        self.check_active()?;
        if override_ {
            return Ok(());
        }
        match (self.recommendation.status, &self.recommendation.action) {
            (JobStatus::Ready, Some(a)) if a == activity => Ok(()),
            (JobStatus::Ready, Some(a)) => Err(ApiError::conflict(
                "not_recommended",
                format!("recommended action is `{a}`; set override to run `{activity}`"),
            )),
            (JobStatus::Computing, _) => Err(ApiError::conflict(
                "recommendation_pending",
                "recommendation is still computing; poll it or set override",
            )),
            _ => Err(ApiError::conflict(
                "no_recommendation",
                "no recommendation is available; set override",
            )),
        }
    }

    fn check_active(&self) -> Result<(), ApiError> {
        if self.status != Status::Active {
            return Err(ApiError::conflict(
                "terminal_session",
                format!("session is {:?}", self.status).to_lowercase(),
            ));
        }
        Ok(())
    }

    /// Applies one result (or a stop) and appends it to the log. State is
    /// untouched on error.
    pub fn apply(
        &mut self,
        activity: &Action,
        result: Option<bool>,
        override_: bool,
    ) -> Result<(), ApiError> {
        self.check_active()?;
        let scn = &self.scenario;
        let t = self.state.time();
        let event = match activity {
            Action::Stop => Event {
                seq: self.history.len(),
                t,
                activity: Action::Stop,
                result: None,
                rework: false,
                cost: Money::ZERO,
                rework_cost: Money::ZERO,
                posterior: self.posterior,
                overridden: override_,
            },
            Action::Activity(id) => {
                let passed = result.ok_or_else(|| {
                    ApiError::bad_request("missing_result", "an activity submission needs `result`")
                })?;
                let k = scn.activity_index(id)?;
                let mut next = scn.apply_result(&self.state, id, passed)?;
                let mut post = scn.posterior(&next)?;
                let mut rework_cost = Money::ZERO;
                // Threshold of the interval the activity ran in.
                let reworked = !passed && post < scn.lower_threshold(t);
                if reworked {
                    next = scn.apply_rework(&next, id)?;
                    post = scn.posterior(&next)?;
                    rework_cost = scn.rework_cost_at(k, t);
                }
                let event = Event {
                    seq: self.history.len(),
                    t,
                    activity: activity.clone(),
                    result: Some(passed),
                    rework: reworked,
                    cost: scn.activity_cost(k),
                    rework_cost,
                    posterior: post,
                    overridden: override_,
                };
                self.state = next;
                self.posterior = post;
                event
            }
        };
        self.status = match activity {
            Action::Stop => Status::Stopped,
            Action::Activity(_) => status_for(scn, &self.state, self.posterior),
        };
        self.history.push(event);
        self.log.push(LogRecord::Result {
            activity: activity.clone(),
            result,
            override_,
        });
        self.cancel_job();
        self.recommendation = Recommendation::with_status(JobStatus::Idle, self.state);
        Ok(())
    }

    /// Cancels any running job and returns a new one if the session is active.
    pub fn begin_job(&mut self) -> Option<Job> {
        self.cancel_job();
        if self.status != Status::Active {
            return None;
        }
        self.generation += 1;
        let cancel = Arc::new(AtomicBool::new(false));
        self.cancel = Some(cancel.clone());
        self.recommendation = Recommendation::with_status(JobStatus::Computing, self.state);
        Some(Job {
            generation: self.generation,
            scenario: self.scenario.clone(),
            state: self.state,
            seed: self.seed,
            config: self.config.clone(),
            cancel,
        })
    }

    fn cancel_job(&mut self) {
        if let Some(c) = self.cancel.take() {
            c.store(true, Ordering::Relaxed);
        }
    }

    /// Stores a job result unless the job has been superseded.
    pub fn finish_job(&mut self, generation: u64, outcome: verispace_core::Result<PtOutcome>) {
        if generation != self.generation || self.recommendation.status != JobStatus::Computing {
            return;
        }
        self.cancel = None;
        let mut rec = Recommendation::with_status(JobStatus::Ready, self.state);
        match outcome {
            Ok(out) => {
                rec.action = Some(out.fvt.root_action().clone());
                rec.fvt_expected_value = Some(out.fvt.expected_value);
                rec.iterations = Some(out.iterations);
                rec.fvt = Some(Arc::new(out.fvt));
            }
            Err(Error::Cancelled) => return,
            Err(e) => {
                rec.status = JobStatus::Failed;
                rec.error = Some(e.to_string());
            }
        }
        self.recommendation = rec;
    }

    pub fn totals(&self) -> Totals {
        let activity_cost = self.history.iter().fold(Money::ZERO, |a, e| a + e.cost);
        let rework_cost = self
            .history
            .iter()
            .fold(Money::ZERO, |a, e| a + e.rework_cost);
        let revenue = if self.status == Status::Deployed {
            self.scenario.revenue_for(self.posterior)
        } else {
            Money::ZERO
        };
        Totals {
            activity_cost,
            rework_cost,
            revenue,
            net: revenue - activity_cost - rework_cost,
        }
    }

    pub fn view(&self) -> SessionView {
        let scn = &self.scenario;
        SessionView {
            id: self.id.clone(),
            scenario: self.spec.clone(),
            config: self.config.clone(),
            seed: self.seed,
            status: self.status,
            state: self.state,
            activities: (0..scn.n_activities())
                .map(|k| scn.activity_id(k).to_string())
                .collect(),
            posterior: self.posterior,
            lower_threshold: (self.state.time() < scn.horizon())
                .then(|| scn.lower_threshold(self.state.time())),
            upper_threshold: scn.upper_threshold(),
            history: self.history.clone(),
            totals: self.totals(),
            recommendation: self.recommendation.clone(),
        }
    }

    pub fn tree(&self) -> TreeView {
        let rec = &self.recommendation;
        TreeView {
            status: rec.status,
            state: rec.state,
            kind: rec.fvt.as_ref().map(|_| "fvt"),
            expected_value: rec.fvt_expected_value,
            root: rec.fvt.as_ref().map(|f| f.root.clone()),
            error: rec.error.clone(),
        }
    }
}

fn status_for(scn: &Scenario, state: &VerificationState, posterior: f64) -> Status {
    if posterior >= scn.upper_threshold() {
        Status::Deployed
    } else if state.time() >= scn.horizon() || state.unverified().next().is_none() {
        Status::Completed
    } else {
        Status::Active
    }
}
