//! Design of dynamic verification strategies for engineered systems.
//!
//! Verification confidence is modelled as a binary Bayesian network over system
//! parameters and verification activities. A strategy is a decision tree over the
//! remaining time intervals; a raw tree is valued by walking its outcome paths under
//! the rework and deployment threshold rules, and the space of trees is searched with
//! a modified parallel tempering sampler. Per-state optima are stitched into a
//! hindsight tree that describes the full dynamic strategy.
//!
//! Module map:
//!
//! * [`bayesnet`]: networks, CPTs, exact inference and network generation.
//! * [`scenario`]: costs, rework/deployment rules, verification states.
//! * [`treespace`]: raw, foresight and hindsight trees and their valuation.
//! * [`sampler`]: exchange/replacement moves over raw trees.
//! * [`pt`]: the replica-exchange search engine.
//! * [`baselines`]: fixed path, Monte Carlo, dynamic Monte Carlo and static FVT.
//! * [`explorer`]: hindsight tree assembly, value plots, convergence sweeps.

pub mod baselines;
pub mod bayesnet;
mod error;
pub mod explorer;
pub mod money;
pub mod optimize;
pub mod presets;
pub mod pt;
pub mod sampler;
pub mod scenario;
pub mod treespace;

pub use bayesnet::{BayesNetwork, BayesNode, Cpt, Evidence, NodeId, NodeKind};
pub use error::{Error, Result};
pub use money::Money;
pub use optimize::{ExhaustiveOptimizer, McConfig, McOptimizer, PtOptimizer, StateOptimizer};
pub use pt::{PtConfig, PtOutcome};
pub use scenario::{CostModel, DeploymentRule, ReworkRule, Scenario, VerificationState};
pub use treespace::{ForesightTree, HindsightTree, Label, Path, RawTree, StopReason, Valuator};
