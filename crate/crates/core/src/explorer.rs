//! Hindsight-tree assembly and diagnostics.
//!
//! States are expanded breadth-first and optimized once each; a state is keyed by
//! its result vector and time, so different activity orders reaching the same
//! results share one node. Terminal states (horizon reached, or posterior at the
//! deployment threshold) never call the optimizer. A state whose optimal tree
//! starts with `NA` becomes a stop endpoint, classified `Unrecoverable` when its
//! posterior is below the current rework threshold.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Money;
use crate::optimize::{state_seed, PtOptimizer, StateOptimizer};
use crate::pt::PtConfig;
use crate::scenario::{Scenario, VerificationState};
use crate::treespace::{Action, HindsightTree, HvtBranch, HvtNode, StopReason, ValuatorPool};

#[derive(Clone, Debug)]
pub struct Explored {
    pub hvt: HindsightTree,
    /// States passed to the optimizer.
    pub optimized_states: usize,
    /// Sum of optimizer iteration counts.
    pub iterations: u64,
}

/// Builds the hindsight tree from the initial state.
pub fn build_hvt(
    scenario: &Scenario,
    optimizer: &dyn StateOptimizer,
    seed: u64,
) -> Result<HindsightTree> {
    let mut pool = ValuatorPool::new(scenario);
    Ok(explore(&scenario.initial_state(), optimizer, seed, &mut pool)?.hvt)
}

/// Builds the hindsight tree rooted at `origin`. The optimizer at state `s`
/// runs with seed `state_seed(seed, s)`.
pub fn explore(
    origin: &VerificationState,
    optimizer: &dyn StateOptimizer,
    seed: u64,
    pool: &mut ValuatorPool<'_>,
) -> Result<Explored> {
    let scenario = pool.scenario();
    let mut nodes: BTreeMap<VerificationState, HvtNode> = BTreeMap::new();
    let mut queue = VecDeque::from([*origin]);
    let mut queued = std::collections::BTreeSet::from([*origin]);
    let mut optimized_states = 0;
    let mut iterations = 0;

    while let Some(s) = queue.pop_front() {
        let posterior = pool.first().posterior(&s)?;
        let terminal = if posterior >= scenario.upper_threshold() {
            Some(StopReason::Deployed)
        } else if s.time() >= scenario.horizon() {
            Some(StopReason::HorizonEnd)
        } else {
            None
        };
        if let Some(stop) = terminal {
            nodes.insert(s, stop_node(scenario, s, posterior, stop, None));
            continue;
        }

        let out = optimizer
            .optimize(&s, state_seed(seed, &s), pool)
            .map_err(|e| Error::OptimizerFailed {
                state: s,
                source: Box::new(e),
            })?;
        optimized_states += 1;
        iterations += out.iterations;
        let fvt_value = Some(out.fvt.expected_value);
        let id = match out.fvt.root_action() {
            Action::Stop => {
                let stop = if posterior < scenario.lower_threshold(s.time()) {
                    StopReason::Unrecoverable
                } else {
                    StopReason::NaStop
                };
                nodes.insert(s, stop_node(scenario, s, posterior, stop, fvt_value));
                continue;
            }
            Action::Activity(id) => id.clone(),
        };
        let k = scenario.activity_index(&id)?;
        let val = pool.first();
        let p_state = val.state_probability(&s);
        let pass = s.with_result(k, true);
        let fail = s.with_result(k, false);
        let post_pass = val.posterior(&pass).unwrap_or(0.0);
        let mut branches = Vec::new();

        let p_pass = val.state_probability(&pass) / p_state;
        if p_pass > 0.0 {
            branches.push(HvtBranch {
                result: true,
                probability: p_pass,
                posterior: post_pass,
                rework: None,
                child: pass,
            });
        }
        let p_fail = val.state_probability(&fail) / p_state;
        if p_fail > 0.0 {
            let post_fail = val.posterior(&fail)?;
            branches.push(if post_fail < scenario.lower_threshold(s.time()) {
                HvtBranch {
                    result: false,
                    probability: p_fail,
                    posterior: post_pass,
                    rework: Some(scenario.rework_cost_at(k, s.time())),
                    child: pass,
                }
            } else {
                HvtBranch {
                    result: false,
                    probability: p_fail,
                    posterior: post_fail,
                    rework: None,
                    child: fail,
                }
            });
        }
        for b in &branches {
            if queued.insert(b.child) {
                queue.push_back(b.child);
            }
        }
        nodes.insert(
            s,
            HvtNode {
                state: s,
                posterior,
                action: Action::Activity(id),
                stop: None,
                cost: scenario.activity_cost(k),
                revenue: Money::ZERO,
                fvt_value,
                branches,
            },
        );
    }

    Ok(Explored {
        hvt: HindsightTree::new(*origin, nodes)?,
        optimized_states,
        iterations,
    })
}

fn stop_node(
    scenario: &Scenario,
    state: VerificationState,
    posterior: f64,
    stop: StopReason,
    fvt_value: Option<Money>,
) -> HvtNode {
    HvtNode {
        state,
        posterior,
        action: Action::Stop,
        stop: Some(stop),
        cost: Money::ZERO,
        revenue: scenario.revenue_for(posterior),
        fvt_value,
        branches: Vec::new(),
    }
}

/// Value trajectory of one hindsight-tree path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotPath {
    pub id: usize,
    pub probability: f64,
    /// One value per interval boundary `t0..=T`, in $1,000 units.
    pub values: Vec<f64>,
    /// Final value at or above the expected value.
    pub above: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValuePlot {
    pub times: Vec<usize>,
    /// Root expected value in $1,000 units.
    pub expected: f64,
    pub paths: Vec<PlotPath>,
}

/// For every path and boundary `t`: costs paid so far, negated, plus the
/// expected continuation value of the state at `t`. After a path ends its value
/// stays at the realized path value.
pub fn value_plot_data(hvt: &HindsightTree, scenario: &Scenario) -> Result<ValuePlot> {
    let v = hvt.state_values()?;
    let t0 = hvt.root().time();
    let times: Vec<usize> = (t0..=scenario.horizon()).collect();
    let expected = hvt.expected_value().units();
    let paths = hvt
        .paths()?
        .into_iter()
        .enumerate()
        .map(|(id, p)| {
            let mut paid = 0.0;
            let mut values = Vec::with_capacity(times.len());
            for step in 0..times.len() {
                if step < p.states.len() {
                    if step > 0 {
                        paid += p.arc_costs[step - 1].ticks() as f64;
                    }
                    values.push((v[&p.states[step]] - paid) / 1000.0);
                } else {
                    values.push(p.value.units());
                }
            }
            PlotPath {
                id,
                probability: p.probability,
                values,
                above: p.value.units() >= expected,
            }
        })
        .collect();
    Ok(ValuePlot {
        times,
        expected,
        paths,
    })
}

impl ValuePlot {
    /// `path,t,value,probability,position` with `position` in {above, below}.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,t,value,probability,position\n");
        for p in &self.paths {
            let pos = if p.above { "above" } else { "below" };
            for (t, v) in self.times.iter().zip(&p.values) {
                let _ = writeln!(out, "{},{t},{v:.6},{},{pos}", p.id, p.probability);
            }
        }
        out
    }

    /// Probability-weighted mean of the path values at each boundary.
    pub fn mean_series(&self) -> Vec<f64> {
        (0..self.times.len())
            .map(|i| self.paths.iter().map(|p| p.probability * p.values[i]).sum())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub convergence_length: usize,
    pub expected_value: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Smallest swept `L` after which the value no longer changes.
    pub plateau: Option<usize>,
    /// Iterations of the underlying run.
    pub iterations: usize,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("convergenceLength,expectedValue\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{}", r.convergence_length, r.expected_value);
        }
        out
    }
}

/// The grid `step, 2 step, ..., max`.
pub fn length_grid(step: usize, max: usize) -> Vec<usize> {
    (1..=max / step.max(1)).map(|i| i * step).collect()
}

/// Root foresight-tree value as a function of the convergence length.
///
/// One run with the largest `L` is made; a run with a shorter `L` and the same
/// seed follows the identical trajectory until its stall first reaches `L`, so
/// every row is read off that single trajectory.
pub fn convergence_sweep(
    scenario: &Scenario,
    cfg: &PtConfig,
    lengths: &[usize],
    seed: u64,
) -> Result<SweepReport> {
    let max = *lengths
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidConfig("no convergence lengths given".into()))?;
    if let Some(l) = lengths.iter().find(|&&l| l == 0 || l % cfg.n_it != 0) {
        return Err(Error::InvalidConfig(format!(
            "convergence length {l} is not a positive multiple of n_it = {}",
            cfg.n_it
        )));
    }
    let opt = PtOptimizer::new(PtConfig {
        convergence_length: max,
        log_windows: false,
        ..cfg.clone()
    });
    let mut pool = ValuatorPool::new(scenario);
    let origin = scenario.initial_state();
    let out = opt.run(&origin, state_seed(seed, &origin), &mut pool)?;
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let rows: Vec<SweepRow> = sorted
        .iter()
        .map(|&l| SweepRow {
            convergence_length: l,
            expected_value: out.value_at_convergence(l),
        })
        .collect();
    let last = rows.last().map(|r| r.expected_value);
    let plateau = rows
        .iter()
        .rposition(|r| Some(r.expected_value) != last)
        .map_or(rows.first(), |i| rows.get(i + 1))
        .map(|r| r.convergence_length);
    Ok(SweepReport {
        rows,
        plateau,
        iterations: out.iterations,
    })
}
