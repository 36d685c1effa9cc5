//! Deterministic social-deduction game engine with replayable event logs
//! and a three-tier evaluation framework built around a statement
//! verification pipeline: agent trajectories are reconstructed from the log
//! and every discussion claim is audited against them.

pub mod agents;
pub mod claims;
pub mod engine;
pub mod eventlog;
pub mod map;
pub mod metrics;
pub mod observation;
pub mod verifier;

pub use engine::{GameConfig, PlayerId, Role, Team, WinReason};
pub use eventlog::{parse_log, GameLog};
pub use map::{Map, RoomId};
