//! Append-only, tick-stamped event records: serialization, parsing, and
//! exact replay of a game from its log.
//!
//! Wire format: one JSON object per line, UTF-8. The first line is the
//! header, every following line one event, in canonical key order. Logs
//! produced by this crate round-trip byte-identically through
//! `parse_log` / `serialize`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    self, GameConfig, GameState, MeetingTrigger, Phase, PlayerId, Role, Team, WinReason,
};
use crate::map::{Map, MapConfig, RoomId};

pub const SCHEMA_VERSION: &str = "quack-log/1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub tick: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    GameStart { players: Vec<PlayerId>, n_ducks: u32 },
    RoleAssigned { player: PlayerId, role: Role },
    TaskAssigned { player: PlayerId, task_id: String, room: RoomId, fake: bool },
    /// Placement by the engine: initial spawn at tick 0 and post-meeting
    /// redistribution. Carries the explicit destination so replay never
    /// consults an RNG.
    Respawned { player: PlayerId, room: RoomId },
    MoveStarted { actor: PlayerId, from: RoomId, to: RoomId, duration: u32 },
    /// Emitted on every transit tick so occupancy reconstruction is a pure
    /// fold with no arithmetic on corridor weights.
    MoveProgressed { actor: PlayerId, from: RoomId, to: RoomId, remaining: u32 },
    Arrived { actor: PlayerId, from: RoomId, room: RoomId },
    Waited { actor: PlayerId, room: RoomId },
    TaskProgressed { actor: PlayerId, task_id: String, room: RoomId, progress: u32, required: u32 },
    TaskCompleted { actor: PlayerId, task_id: String, room: RoomId },
    Said { actor: PlayerId, room: RoomId, text: String },
    Killed { actor: PlayerId, victim: PlayerId, room: RoomId },
    CooldownTick { actor: PlayerId, remaining: u32 },
    BodyReported { reporter: PlayerId, victim: PlayerId, room: RoomId },
    MeetingCalled { caller: PlayerId, room: RoomId },
    PhaseChanged { phase: Phase },
    SpeakingOrderFixed { order: Vec<PlayerId> },
    Utterance { speaker: PlayerId, round: u32, text: String },
    VoteCast { voter: PlayerId, target: Option<PlayerId> },
    Ejected { player: PlayerId },
    NoEjection,
    GameOver { winner: Team, reason: WinReason, digest: String },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::GameStart { .. } => "GameStart",
            EventKind::RoleAssigned { .. } => "RoleAssigned",
            EventKind::TaskAssigned { .. } => "TaskAssigned",
            EventKind::Respawned { .. } => "Respawned",
            EventKind::MoveStarted { .. } => "MoveStarted",
            EventKind::MoveProgressed { .. } => "MoveProgressed",
            EventKind::Arrived { .. } => "Arrived",
            EventKind::Waited { .. } => "Waited",
            EventKind::TaskProgressed { .. } => "TaskProgressed",
            EventKind::TaskCompleted { .. } => "TaskCompleted",
            EventKind::Said { .. } => "Said",
            EventKind::Killed { .. } => "Killed",
            EventKind::CooldownTick { .. } => "CooldownTick",
            EventKind::BodyReported { .. } => "BodyReported",
            EventKind::MeetingCalled { .. } => "MeetingCalled",
            EventKind::PhaseChanged { .. } => "PhaseChanged",
            EventKind::SpeakingOrderFixed { .. } => "SpeakingOrderFixed",
            EventKind::Utterance { .. } => "Utterance",
            EventKind::VoteCast { .. } => "VoteCast",
            EventKind::Ejected { .. } => "Ejected",
            EventKind::NoEjection => "NoEjection",
            EventKind::GameOver { .. } => "GameOver",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema: String,
    pub seed: u64,
    pub config: GameConfig,
    /// Full map description; logs are self-contained for replay.
    pub map: MapConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameLog {
    pub header: LogHeader,
    pub events: Vec<Event>,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("empty log")]
    Empty,
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("unsupported schema version `{0}` (expected major {SCHEMA_VERSION})")]
    SchemaVersion(String),
    #[error("sequence gap: expected seq {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("tick went backwards at seq {seq}")]
    TickRegression { seq: u64 },
    #[error("log does not begin with GameStart")]
    MissingGameStart,
    #[error("incomplete log: no GameOver event")]
    Incomplete,
    #[error("events found after GameOver at seq {seq}")]
    EventsAfterGameOver { seq: u64 },
    #[error("write failure: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Map(#[from] crate::map::MapError),
    #[error("replay failed: {0}")]
    Replay(#[from] engine::EngineError),
}

impl GameLog {
    pub fn new(header: LogHeader) -> GameLog {
        GameLog { header, events: Vec::new() }
    }

    pub fn seed(&self) -> u64 {
        self.header.seed
    }

    pub fn map(&self) -> Result<Map, crate::map::MapError> {
        Map::from_config(&self.header.map)
    }

    /// Appends an event, enforcing gapless sequence numbers.
    pub fn append(&mut self, event: Event) -> Result<(), LogError> {
        let expected = self.events.len() as u64;
        if event.seq != expected {
            return Err(LogError::SequenceGap { expected, got: event.seq });
        }
        if let Some(last) = self.events.last() {
            if event.tick < last.tick {
                return Err(LogError::TickRegression { seq: event.seq });
            }
        }
        self.events.push(event);
        Ok(())
    }

    /// Canonical line-delimited serialization (ends with a newline).
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&serde_json::to_string(&self.header).expect("header serializes"));
        out.push('\n');
        for event in &self.events {
            out.push_str(&serde_json::to_string(event).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    /// True when the log is structurally complete (starts with GameStart,
    /// ends with GameOver).
    pub fn is_complete(&self) -> bool {
        matches!(self.events.first(), Some(Event { kind: EventKind::GameStart { .. }, .. }))
            && matches!(self.events.last(), Some(Event { kind: EventKind::GameOver { .. }, .. }))
    }

    pub fn game_over(&self) -> Option<(Team, WinReason, &str)> {
        self.events.iter().rev().find_map(|e| match &e.kind {
            EventKind::GameOver { winner, reason, digest } => Some((*winner, *reason, digest.as_str())),
            _ => None,
        })
    }

    pub fn final_tick(&self) -> u64 {
        self.events.last().map(|e| e.tick).unwrap_or(0)
    }
}

/// Parses the documented line-delimited format and validates log structure.
pub fn parse_log(text: &str) -> Result<GameLog, LogError> {
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or(LogError::Empty)?;
    let header: LogHeader = serde_json::from_str(header_line)
        .map_err(|e| LogError::Malformed { line: 1, message: e.to_string() })?;
    let major = header.schema.split('.').next().unwrap_or("");
    if major != SCHEMA_VERSION.split('.').next().unwrap() {
        return Err(LogError::SchemaVersion(header.schema.clone()));
    }

    let mut log = GameLog::new(header);
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(line)
            .map_err(|e| LogError::Malformed { line: idx + 1, message: e.to_string() })?;
        log.append(event)?;
    }

    match log.events.first() {
        Some(Event { kind: EventKind::GameStart { .. }, .. }) => {}
        _ => return Err(LogError::MissingGameStart),
    }
    if let Some(pos) = log.events.iter().position(|e| matches!(e.kind, EventKind::GameOver { .. })) {
        if pos + 1 != log.events.len() {
            return Err(LogError::EventsAfterGameOver { seq: log.events[pos + 1].seq });
        }
    } else {
        return Err(LogError::Incomplete);
    }
    Ok(log)
}

/// Where in the game a replay snapshot was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SnapshotPoint {
    /// After game setup (tick 0).
    Setup,
    /// After the free-roam portion of a tick.
    Roam(u64),
    /// After a meeting resolved at the given tick.
    Meeting(u64),
}

/// Replays a log by folding events in order, without any RNG or policy.
/// The callback observes the state at every snapshot point (end of setup,
/// end of each free-roam tick, end of each meeting).
pub fn replay_with(
    log: &GameLog,
    mut observe: impl FnMut(SnapshotPoint, &GameState),
) -> Result<GameState, LogError> {
    let map = log.map()?;
    let config = &log.header.config;
    let mut state = GameState::empty();
    let events = &log.events;
    let mut in_meeting_block = false;
    for (i, event) in events.iter().enumerate() {
        engine::apply_event(&mut state, &map, config, event)
            .map_err(|e| engine::EngineError::BadEvent { seq: event.seq, reason: e.to_string() })?;
        if matches!(event.kind, EventKind::SpeakingOrderFixed { .. }) {
            in_meeting_block = true;
        }
        let boundary = match events.get(i + 1) {
            None => true,
            Some(next) => {
                next.tick > event.tick || matches!(next.kind, EventKind::SpeakingOrderFixed { .. })
            }
        };
        if boundary {
            let point = if event.tick == 0 {
                SnapshotPoint::Setup
            } else if in_meeting_block {
                SnapshotPoint::Meeting(event.tick)
            } else {
                SnapshotPoint::Roam(event.tick)
            };
            observe(point, &state);
        }
        if matches!(event.kind, EventKind::PhaseChanged { phase: Phase::FreeRoam }) {
            in_meeting_block = false;
        }
    }
    Ok(state)
}

/// Replays a complete log to its final state.
pub fn replay(log: &GameLog) -> Result<GameState, LogError> {
    replay_with(log, |_, _| {})
}

/// The meeting trigger event seq and tick pairs, in order. Used to segment
/// free-roam play for claim verification.
pub fn meeting_triggers(log: &GameLog) -> Vec<(u64, u64, MeetingTrigger)> {
    let mut out = Vec::new();
    let mut pending: Option<(u64, u64, MeetingTrigger)> = None;
    for event in &log.events {
        match &event.kind {
            EventKind::BodyReported { reporter, victim, .. } => {
                if pending.is_none() {
                    pending = Some((
                        event.seq,
                        event.tick,
                        MeetingTrigger::BodyReport { reporter: reporter.clone(), victim: victim.clone() },
                    ));
                }
            }
            EventKind::MeetingCalled { caller, .. } => {
                if pending.is_none() {
                    pending =
                        Some((event.seq, event.tick, MeetingTrigger::Emergency { caller: caller.clone() }));
                }
            }
            EventKind::SpeakingOrderFixed { .. } => {
                if let Some(t) = pending.take() {
                    out.push(t);
                }
            }
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::Map;

    fn tiny_header() -> LogHeader {
        LogHeader {
            schema: SCHEMA_VERSION.to_string(),
            seed: 7,
            config: GameConfig { n_agents: 2, n_ducks: 1, tasks_per_goose: 0, ..GameConfig::default() },
            map: Map::default_map().to_config(),
        }
    }

    #[test]
    fn append_enforces_sequence() {
        let mut log = GameLog::new(tiny_header());
        let ev = |seq| Event {
            seq,
            tick: 0,
            kind: EventKind::Waited { actor: PlayerId::new("Alice"), room: RoomId::new("cafeteria") },
        };
        log.append(ev(0)).unwrap();
        log.append(ev(1)).unwrap();
        let err = log.append(ev(3)).unwrap_err();
        assert!(matches!(err, LogError::SequenceGap { expected: 2, got: 3 }));
    }

    #[test]
    fn structurally_equal_events_serialize_identically() {
        let a = Event {
            seq: 4,
            tick: 2,
            kind: EventKind::Killed {
                actor: PlayerId::new("Eve"),
                victim: PlayerId::new("Bob"),
                room: RoomId::new("medbay"),
            },
        };
        let b = a.clone();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn incomplete_log_is_distinct_from_parse_error() {
        let mut log = GameLog::new(tiny_header());
        log.append(Event {
            seq: 0,
            tick: 0,
            kind: EventKind::GameStart { players: vec![PlayerId::new("Alice")], n_ducks: 1 },
        })
        .unwrap();
        let text = log.serialize();
        assert!(matches!(parse_log(&text), Err(LogError::Incomplete)));
        assert!(matches!(
            parse_log("{not json"),
            Err(LogError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn schema_major_version_is_enforced() {
        let mut header = tiny_header();
        header.schema = "quack-log/2.0".to_string();
        let log = GameLog::new(header);
        assert!(matches!(parse_log(&log.serialize()), Err(LogError::SchemaVersion(_))));
    }
}
