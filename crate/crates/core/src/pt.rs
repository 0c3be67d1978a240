//! Replica-exchange search over raw trees.
//!
//! `M` replicas run at fixed temperatures. Each window, every replica performs
//! `n_it` propose/evaluate steps with Metropolis acceptance at its own
//! temperature, then neighbouring replicas `m, m + 1` (ascending) attempt to
//! exchange their trees with probability `min(1, exp(-(1/Ψm - 1/Ψm+1)(Em - Em+1)))`.
//! The incumbent is the best tree evaluated so far, rejected proposals included.
//! The search stops once the incumbent value has not strictly improved for `L`
//! iterations, or at the iteration cap.
//!
//! Energies are expected values in $1,000 units and are maximized.
//!
//! Replica `m` draws from ChaCha8 stream `m + 1` of the configured seed and the
//! swap sweep from stream 0, so results do not depend on how rayon schedules the
//! replica windows.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Money;
use crate::sampler::{propose, random_tree, EXCHANGE_PROBABILITY};
use crate::scenario::VerificationState;
use crate::treespace::{ForesightTree, RawTree, Valuator};

/// Fifteen-temperature ladder of the reference experiments.
pub const REFERENCE_LADDER: [f64; 15] = [
    10.0, 20.0, 39.0, 78.0, 156.0, 312.0, 625.0, 1250.0, 2500.0, 5000.0, 10000.0, 20000.0, 40000.0,
    80000.0, 160000.0,
];

/// Swap attempts per pair averaged into one acceptance datum.
pub const ACCEPTANCE_BLOCK: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderSpec {
    /// Temperatures used as given (checked against the admissible interval
    /// with warnings only).
    Explicit(Vec<f64>),
    /// `base * c3^m`, extended until the hottest neighbour gap reaches the
    /// lower end of the admissible interval. Without a base, the coldest gap is
    /// placed at the upper end.
    Geometric { base: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PtConfig {
    /// Iterations per window `N_it`.
    pub n_it: usize,
    /// Convergence length `L`, a multiple of `n_it`.
    pub convergence_length: usize,
    pub max_iterations: usize,
    pub c1: f64,
    pub c2: f64,
    /// Temperature ratio of generated ladders.
    pub c3: f64,
    pub delta_e_thres: f64,
    pub delta_e_max: f64,
    pub exchange_prob: f64,
    pub ladder: LadderSpec,
    /// Truncates the ladder, or extends it geometrically by `c3`.
    pub replicas: Option<usize>,
    pub seed: u64,
    pub log_windows: bool,
}

impl Default for PtConfig {
    fn default() -> Self {
        PtConfig {
            n_it: 50,
            convergence_length: 1000,
            max_iterations: 1_000_000,
            c1: 0.05,
            c2: 0.05,
            c3: 2.0,
            delta_e_thres: 100.0,
            delta_e_max: 3.8e5,
            exchange_prob: EXCHANGE_PROBABILITY,
            ladder: LadderSpec::Explicit(REFERENCE_LADDER.to_vec()),
            replicas: None,
            seed: 0,
            log_windows: true,
        }
    }
}

impl PtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.n_it == 0 {
            return bad("n_it must be at least 1");
        }
        if self.convergence_length == 0 || !self.convergence_length.is_multiple_of(self.n_it) {
            return bad("convergence length must be a positive multiple of n_it");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.c1 > 0.0 && self.c1 < 1.0 && self.c2 > 0.0 && self.c2 < 1.0) {
            return bad("c1 and c2 must lie in (0, 1)");
        }
        if self.c3.is_nan() || self.c3 <= 1.0 {
            return bad("c3 must exceed 1");
        }
        if !(self.delta_e_thres > 0.0 && self.delta_e_max > 0.0) {
            return bad("energy scales must be positive");
        }
        if !(0.0..=1.0).contains(&self.exchange_prob) {
            return bad("exchange probability outside [0, 1]");
        }
        if self.replicas == Some(0) {
            return bad("at least one replica is required");
        }
        Ok(())
    }
}

/// Ladder plus the admissible neighbour gap interval it was checked against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub temperatures: Vec<f64>,
    /// `[-ln c1 / ΔE_max, -ln c2 / ΔE_thres]`.
    pub interval: (f64, f64),
    pub warnings: Vec<String>,
}

pub fn delta_beta_interval(cfg: &PtConfig) -> Result<(f64, f64)> {
    let lo = -cfg.c1.ln() / cfg.delta_e_max;
    let hi = -cfg.c2.ln() / cfg.delta_e_thres;
    if lo >= hi {
        return Err(Error::Infeasible(format!(
            "empty temperature gap interval [{lo:.3e}, {hi:.3e}]"
        )));
    }
    Ok((lo, hi))
}

pub fn build_ladder(cfg: &PtConfig) -> Result<LadderReport> {
    cfg.validate()?;
    let (lo, hi) = delta_beta_interval(cfg)?;
    let ratio = 1.0 - 1.0 / cfg.c3;
    let mut temps = match &cfg.ladder {
        LadderSpec::Explicit(t) => t.clone(),
        LadderSpec::Geometric { base } => {
            let mut t = vec![base.unwrap_or(ratio / hi)];
            if t[0].is_nan() || t[0] <= 0.0 {
                return Err(Error::InvalidConfig("ladder base must be positive".into()));
            }
            // The smallest neighbor gap belongs to the last pair; grow until it
            // reaches the lower end of the interval.
            while t.len() < 2 || ratio / t[t.len() - 2] > lo {
                t.push(t[t.len() - 1] * cfg.c3);
            }
            t
        }
    };
    if let Some(m) = cfg.replicas {
        if temps.is_empty() {
            return Err(Error::InvalidConfig("empty ladder".into()));
        }
        while temps.len() < m {
            temps.push(temps[temps.len() - 1] * cfg.c3);
        }
        temps.truncate(m);
    }
    if temps.is_empty() || temps.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidConfig(
            "temperatures must be positive and finite".into(),
        ));
    }
    if temps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "temperatures must be strictly increasing".into(),
        ));
    }
    let mut warnings = Vec::new();
    for w in temps.windows(2) {
        let db = 1.0 / w[0] - 1.0 / w[1];
        if db > hi || db < lo {
            warnings.push(format!(
                "gap {}-{} has Δβ = {db:.3e} outside [{lo:.3e}, {hi:.3e}]",
                w[0], w[1]
            ));
        }
    }
    Ok(LadderReport {
        temperatures: temps,
        interval: (lo, hi),
        warnings,
    })
}

/// Probability of exchanging the trees of a colder (`t_low`) and a hotter
/// replica.
pub fn swap_accept_prob(e_low: Money, e_high: Money, t_low: f64, t_high: f64) -> f64 {
    let db = 1.0 / t_low - 1.0 / t_high;
    (-db * (e_low.units() - e_high.units())).exp().min(1.0)
}

/// Metropolis acceptance of a move from `e_old` to `e_new` at temperature `temp`.
pub fn metropolis_accept_prob(e_old: Money, e_new: Money, temp: f64) -> f64 {
    ((e_new.units() - e_old.units()) / temp).exp().min(1.0)
}

/// One Metropolis decision. Improvements are accepted without drawing.
pub fn metropolis_step<R: Rng + ?Sized>(
    e_old: Money,
    e_new: Money,
    temp: f64,
    rng: &mut R,
) -> bool {
    e_new >= e_old || rng.random::<f64>() < metropolis_accept_prob(e_old, e_new, temp)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// Nothing to search: no unverified activity, or already deployable.
    Trivial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WindowLog {
    pub iter: usize,
    pub best_value: f64,
    pub per_replica_energy: Vec<f64>,
    pub swap_accepts: Vec<bool>,
    /// Swap acceptance probability per neighbour pair.
    pub swap_probs: Vec<f64>,
}

/// Average swap acceptance probability of one neighbour pair per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSeries {
    /// `"Ψm-Ψm+1"`, e.g. `"10-20"`.
    pub pair: String,
    pub averages: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtOutcome {
    pub fvt: ForesightTree,
    pub best_value: Money,
    /// Iterations run per replica.
    pub iterations: usize,
    /// `(iteration, value)` at the start, at every strict improvement and at
    /// the final iteration.
    pub incumbent_trace: Vec<(usize, Money)>,
    pub temperatures: Vec<f64>,
    pub termination: Termination,
    /// Empty when window logging is disabled.
    pub windows: Vec<WindowLog>,
    pub logged: bool,
}

impl PtOutcome {
    pub fn acceptance_log(&self) -> Result<Vec<AcceptanceSeries>> {
        if !self.logged {
            return Err(Error::LoggingDisabled);
        }
        let pairs = self.temperatures.len().saturating_sub(1);
        Ok((0..pairs)
            .map(|m| AcceptanceSeries {
                pair: format!("{}-{}", self.temperatures[m], self.temperatures[m + 1]),
                averages: self
                    .windows
                    .chunks_exact(ACCEPTANCE_BLOCK)
                    .map(|block| {
                        block.iter().map(|w| w.swap_probs[m]).sum::<f64>() / ACCEPTANCE_BLOCK as f64
                    })
                    .collect(),
            })
            .collect())
    }

    /// Long-format CSV: `block,pair,average`.
    pub fn acceptance_csv(&self) -> Result<String> {
        let mut out = String::from("block,pair,average\n");
        for s in self.acceptance_log()? {
            for (b, a) in s.averages.iter().enumerate() {
                let _ = writeln!(out, "{b},{},{a}", s.pair);
            }
        }
        Ok(out)
    }

    /// `{"windows": [...]}`.
    pub fn windows_json(&self) -> Result<String> {
        if !self.logged {
            return Err(Error::LoggingDisabled);
        }
        let mut s = serde_json::to_string_pretty(&serde_json::json!({ "windows": self.windows }))
            .expect("window log serializes");
        s.push('\n');
        Ok(s)
    }

    /// Value a run with convergence length `l` would have returned: the
    /// incumbent at the first window whose stall reaches `l`. Valid for every
    /// `l` not larger than the length this run used.
    pub fn value_at_convergence(&self, l: usize) -> Money {
        for pair in self.incumbent_trace.windows(2) {
            if pair[1].0 - pair[0].0 > l {
                return pair[0].1;
            }
        }
        self.best_value
    }
}

struct Replica {
    temp: f64,
    raw: RawTree,
    energy: Money,
    rng: ChaCha8Rng,
}

impl Replica {
    /// Runs one window; returns the best tree evaluated in it.
    fn window(
        &mut self,
        val: &mut Valuator<'_>,
        n_it: usize,
        exchange_prob: f64,
    ) -> Result<(RawTree, Money)> {
        let mut best: Option<(RawTree, Money)> = None;
        for _ in 0..n_it {
            let (cand, _) = propose(&self.raw, &mut self.rng, exchange_prob);
            let e = if cand == self.raw {
                self.energy
            } else {
                val.value(&cand)?
            };
            if best.as_ref().is_none_or(|b| e > b.1) {
                best = Some((cand.clone(), e));
            }
            if metropolis_step(self.energy, e, self.temp, &mut self.rng) {
                self.raw = cand;
                self.energy = e;
            }
        }
        Ok(best.expect("n_it >= 1"))
    }
}

/// Seeded ChaCha8 generator on an independent stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Evaluation of the all-`NA` tree, used when there is nothing to search.
pub(crate) fn trivial_fvt(
    origin: &VerificationState,
    val: &mut Valuator<'_>,
) -> Result<Option<ForesightTree>> {
    let scenario = val.scenario();
    if origin.time() >= scenario.horizon() {
        return Err(Error::HorizonReached(origin.time()));
    }
    let depth = RawTree::depth_for(scenario, origin);
    if origin.unverified_mask() == 0 || val.posterior(origin)? >= scenario.upper_threshold() {
        return Ok(Some(val.evaluate(&RawTree::all_na(*origin, depth))?));
    }
    Ok(None)
}

/// Runs the search from `origin`. Needs one valuator per temperature.
pub fn run(
    origin: &VerificationState,
    cfg: &PtConfig,
    valuators: &mut [Valuator<'_>],
    cancel: Option<&AtomicBool>,
) -> Result<PtOutcome> {
    let ladder = build_ladder(cfg)?.temperatures;
    let m = ladder.len();
    if valuators.len() < m {
        return Err(Error::InvalidConfig(format!(
            "{m} temperatures but {} valuators",
            valuators.len()
        )));
    }
    let valuators = &mut valuators[..m];
    let scenario = valuators[0].scenario();

    if let Some(fvt) = trivial_fvt(origin, &mut valuators[0])? {
        return Ok(PtOutcome {
            best_value: fvt.expected_value,
            fvt,
            iterations: 0,
            incumbent_trace: Vec::new(),
            temperatures: ladder,
            termination: Termination::Trivial,
            windows: Vec::new(),
            logged: cfg.log_windows,
        });
    }
    let depth = RawTree::depth_for(scenario, origin);

    let mut replicas = Vec::with_capacity(m);
    for (i, (&temp, val)) in ladder.iter().zip(valuators.iter_mut()).enumerate() {
        let mut rng = stream_rng(cfg.seed, i as u64 + 1);
        let raw = random_tree(*origin, depth, &mut rng);
        let energy = val.value(&raw)?;
        replicas.push(Replica {
            temp,
            raw,
            energy,
            rng,
        });
    }
    let mut swap_rng = stream_rng(cfg.seed, 0);

    let first = (0..m).fold(0, |b, i| {
        if replicas[i].energy > replicas[b].energy {
            i
        } else {
            b
        }
    });
    let mut best_raw = replicas[first].raw.clone();
    let mut best_value = replicas[first].energy;
    let mut trace = vec![(0, best_value)];
    let mut windows = Vec::new();
    let mut iter = 0;
    let mut stall = 0;

    let termination = loop {
        if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Err(Error::Cancelled);
        }
        let bests: Vec<Result<(RawTree, Money)>> = replicas
            .par_iter_mut()
            .zip(valuators.par_iter_mut())
            .map(|(r, v)| r.window(v, cfg.n_it, cfg.exchange_prob))
            .collect();
        iter += cfg.n_it;

        let mut swap_accepts = Vec::with_capacity(m.saturating_sub(1));
        let mut swap_probs = Vec::with_capacity(m.saturating_sub(1));
        for k in 0..m.saturating_sub(1) {
            let p = swap_accept_prob(
                replicas[k].energy,
                replicas[k + 1].energy,
                replicas[k].temp,
                replicas[k + 1].temp,
            );
            let accepted = swap_rng.random::<f64>() < p;
            if accepted {
                let (lo, hi) = replicas.split_at_mut(k + 1);
                std::mem::swap(&mut lo[k].raw, &mut hi[0].raw);
                std::mem::swap(&mut lo[k].energy, &mut hi[0].energy);
            }
            swap_accepts.push(accepted);
            swap_probs.push(p);
        }
        #[cfg(debug_assertions)]
        for (r, v) in replicas.iter().zip(valuators.iter_mut()) {
            debug_assert_eq!(v.value(&r.raw)?, r.energy, "replica energy out of sync");
        }

        let mut improved = false;
        for b in bests {
            let (raw, value) = b?;
            if value > best_value {
                best_value = value;
                best_raw = raw;
                improved = true;
            }
        }
        if improved {
            stall = 0;
            trace.push((iter, best_value));
        } else {
            stall += cfg.n_it;
        }
        if cfg.log_windows {
            windows.push(WindowLog {
                iter,
                best_value: best_value.units(),
                per_replica_energy: replicas.iter().map(|r| r.energy.units()).collect(),
                swap_accepts,
                swap_probs,
            });
        }
        if stall >= cfg.convergence_length {
            break Termination::Converged;
        }
        if iter >= cfg.max_iterations {
            break Termination::MaxIterations;
        }
    };
    trace.push((iter, best_value));

    let fvt = valuators[0].evaluate(&best_raw)?;
    debug_assert_eq!(fvt.expected_value, best_value);
    Ok(PtOutcome {
        fvt,
        best_value,
        iterations: iter,
        incumbent_trace: trace,
        temperatures: ladder,
        termination,
        windows,
        logged: cfg.log_windows,
    })
}
