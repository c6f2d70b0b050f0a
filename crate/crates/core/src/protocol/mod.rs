//! The joint sensing-and-transmission cycle.
//!
//! Every cycle runs mode selection at the UAVs, resource allocation at the
//! BS, one sensing trial per link and then `F` transmission frames. The
//! per-cycle sensing and transmission outcomes form the outer and inner
//! states of [`chain`].

pub mod chain;
mod cycle;
mod mode;

pub use chain::{inner_distribution, outer_transition, ChainTracker, InnerState, OuterState};
pub use cycle::{
    isolated_transmission_prob, run_cycle, transmission_success_prob, valid_prob, CycleOutput, CycleReport,
    DataBuffer, FixedGrants, FrameOutcome, Grant, IterativeRrm, ResourceManager, RrmDecision,
};
pub use mode::{candidate_modes, select_mode, Framework, ModeChoice, TransmissionMode, WorldView};
