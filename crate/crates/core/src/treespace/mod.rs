//! Raw, foresight and hindsight verification trees and their valuation.

mod fvt;
mod hvt;
mod raw;
mod valuation;

pub use fvt::{
    expected_value, path_value, Action, CostKind, ForesightTree, FvtBranch, FvtNode, LedgerEntry,
    Path, Step, StopReason,
};
pub use hvt::{hvt_expected_value, HindsightTree, HvtBranch, HvtNode, HvtPath};
pub use raw::{Label, RawTree};
pub use valuation::{Valuator, ValuatorPool};

pub(crate) use raw::level_of;
