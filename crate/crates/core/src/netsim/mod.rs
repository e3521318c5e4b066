//! Slot-level simulation of GNSS-framed superframes with clock offsets,
//! propagation delay and half-duplex collisions.

mod audit;
mod compare;
mod config;
mod scenario;
mod sim;
mod timing;

pub use audit::{adversarial_search, check_block_free, frame_offset_audit, AdversarialOutcome, BlockFreeReport, FrameCount};
pub use compare::{baseline_compare, BaselineRow, Comparison};
pub use config::{Padding, PlanSource, ScenarioConfig, SequenceSource};
pub use scenario::{distance, max_users_in_disk, place_users, Scenario, SuperframeState, User};
pub use sim::{neighbors, run_superframe, simulate, simulate_states, Reception, SimLog, OVERLAP_EPS};
pub use timing::{delta_p, TimingModel, SPEED_OF_LIGHT};
