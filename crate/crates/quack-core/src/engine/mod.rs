//! Game state machine: tick loop, phases, action legality, meetings, voting,
//! respawn and win conditions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::{Map, RoomId};

mod apply;
mod run;

pub use apply::apply_event;
pub use run::{run_game, run_game_observed, scripted_seats, Engine, Seat, SeatFactory, Seats};

/// Player display name; unique within a game.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(String);

impl PlayerId {
    pub fn new(name: &str) -> Self {
        PlayerId(name.trim().to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Goose,
    Duck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Team {
    Geese,
    Ducks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WinReason {
    TasksComplete,
    AllDucksEjected,
    Parity,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    FreeRoam,
    Discussion,
    Voting,
    Ejection,
    GameOver,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub n_agents: u32,
    pub n_ducks: u32,
    pub tasks_per_goose: u32,
    pub kill_cooldown: u32,
    pub task_duration: u32,
    pub tick_budget: u64,
    pub discussion_rounds: u32,
    pub meeting_budget: u32,
    /// Seat names; padded from the default roster when shorter than n_agents.
    #[serde(default)]
    pub players: Vec<String>,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            n_agents: 6,
            n_ducks: 1,
            tasks_per_goose: 5,
            kill_cooldown: 5,
            task_duration: 2,
            tick_budget: 60,
            discussion_rounds: 2,
            meeting_budget: 3,
            players: Vec::new(),
        }
    }
}

const DEFAULT_ROSTER: [&str; 10] =
    ["Alice", "Bob", "Carol", "Dave", "Eve", "Frank", "Grace", "Heidi", "Ivan", "Judy"];

impl GameConfig {
    /// Resolved seat names in roster order.
    pub fn roster(&self) -> Vec<PlayerId> {
        let mut names: Vec<PlayerId> = self
            .players
            .iter()
            .take(self.n_agents as usize)
            .map(|n| PlayerId::new(n))
            .collect();
        let mut i = 0;
        while names.len() < self.n_agents as usize {
            let candidate = if i < DEFAULT_ROSTER.len() {
                DEFAULT_ROSTER[i].to_string()
            } else {
                format!("Player{}", i + 1)
            };
            let id = PlayerId::new(&candidate);
            if !names.contains(&id) {
                names.push(id);
            }
            i += 1;
        }
        names
    }

    pub fn validate(&self, map: &Map) -> Result<(), EngineError> {
        if self.n_agents < 2 {
            return Err(EngineError::InvalidConfig("n_agents must be >= 2".into()));
        }
        if self.n_ducks == 0 || self.n_ducks >= self.n_agents {
            return Err(EngineError::InvalidConfig(
                "n_ducks must satisfy 1 <= n_ducks < n_agents".into(),
            ));
        }
        if self.tick_budget < 1 {
            return Err(EngineError::InvalidConfig("tick_budget must be >= 1".into()));
        }
        if self.discussion_rounds < 1 {
            return Err(EngineError::InvalidConfig("discussion_rounds must be >= 1".into()));
        }
        if self.task_duration < 1 {
            return Err(EngineError::InvalidConfig("task_duration must be >= 1".into()));
        }
        if self.tasks_per_goose as usize > map.task_room_count() {
            return Err(EngineError::UnplaceableTasks {
                requested: self.tasks_per_goose,
                task_rooms: map.task_room_count(),
            });
        }
        let roster = self.roster();
        let unique: BTreeSet<&PlayerId> = roster.iter().collect();
        if unique.len() != roster.len() {
            return Err(EngineError::InvalidConfig("duplicate player names".into()));
        }
        for p in &roster {
            if p.as_str().is_empty() || p.as_str().eq_ignore_ascii_case("skip") {
                return Err(EngineError::InvalidConfig(format!("invalid player name `{p}`")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskState {
    pub id: String,
    pub room: RoomId,
    pub progress: u32,
    pub required: u32,
    pub completed: bool,
    pub fake: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentLocation {
    Room(RoomId),
    Transit { from: RoomId, to: RoomId, remaining: u32 },
}

impl AgentLocation {
    pub fn room(&self) -> Option<&RoomId> {
        match self {
            AgentLocation::Room(r) => Some(r),
            AgentLocation::Transit { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: PlayerId,
    pub role: Role,
    pub alive: bool,
    /// None only during game setup, before the initial placement event.
    pub location: Option<AgentLocation>,
    pub tasks: Vec<TaskState>,
    pub visited_rooms: BTreeSet<RoomId>,
    pub kill_cooldown_remaining: u32,
}

impl AgentState {
    pub fn current_room(&self) -> Option<&RoomId> {
        self.location.as_ref().and_then(|l| l.room())
    }

    pub fn in_transit(&self) -> bool {
        matches!(self.location, Some(AgentLocation::Transit { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BodyRecord {
    pub victim: PlayerId,
    pub room: RoomId,
    pub death_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatEntry {
    pub speaker: PlayerId,
    pub room: RoomId,
    pub text: String,
    /// Agents in the room at the instant of speaking (includes the speaker).
    pub listeners: BTreeSet<PlayerId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveDirection {
    Departed,
    Arrived,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessedMove {
    pub mover: PlayerId,
    pub direction: MoveDirection,
    /// Room the move was witnessed in (departure origin or arrival destination).
    pub room: RoomId,
    /// Other end of the corridor used.
    pub via: RoomId,
    /// Agents in `room` at the instant of the move, excluding the mover.
    pub witnesses: BTreeSet<PlayerId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickBuffers {
    pub proximity_chat: Vec<ChatEntry>,
    pub witnessed_moves: Vec<WitnessedMove>,
}

impl TickBuffers {
    pub fn clear(&mut self) {
        self.proximity_chat.clear();
        self.witnessed_moves.clear();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeetingTrigger {
    BodyReport { reporter: PlayerId, victim: PlayerId },
    Emergency { caller: PlayerId },
}

impl MeetingTrigger {
    pub fn agent(&self) -> &PlayerId {
        match self {
            MeetingTrigger::BodyReport { reporter, .. } => reporter,
            MeetingTrigger::Emergency { caller } => caller,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub speaker: PlayerId,
    pub round: u32,
    pub text: String,
}

/// Vote target: a living player or an abstention.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VoteChoice {
    Skip,
    Player(PlayerId),
}

/// Meeting in progress (set when a trigger fires; dropped on return to free roam).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveMeeting {
    pub trigger: MeetingTrigger,
    pub meeting_tick: u64,
    pub speaking_order: Vec<PlayerId>,
    pub transcript: Vec<TranscriptEntry>,
    pub votes: BTreeMap<PlayerId, VoteChoice>,
    pub ejected: Option<PlayerId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingRecord {
    pub trigger: MeetingTrigger,
    pub meeting_tick: u64,
    pub speaking_order: Vec<PlayerId>,
    pub transcript: Vec<TranscriptEntry>,
    pub votes: BTreeMap<PlayerId, VoteChoice>,
    pub ejected: Option<PlayerId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub winner: Team,
    pub reason: WinReason,
}

/// Full engine state. Everything serialized here is reconstructible from the
/// event log alone; the RNG is engine-private and excluded from snapshots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameState {
    pub tick: u64,
    pub phase: Phase,
    pub agents: Vec<AgentState>,
    pub bodies: BTreeMap<PlayerId, BodyRecord>,
    pub buffers: TickBuffers,
    pub meetings_used: u32,
    pub meeting: Option<ActiveMeeting>,
    pub outcome: Option<GameOutcome>,
    #[serde(skip)]
    pub(crate) rng: Option<ChaCha8Rng>,
}

impl GameState {
    pub fn empty() -> GameState {
        GameState {
            tick: 0,
            phase: Phase::FreeRoam,
            agents: Vec::new(),
            bodies: BTreeMap::new(),
            buffers: TickBuffers::default(),
            meetings_used: 0,
            meeting: None,
            outcome: None,
            rng: None,
        }
    }

    pub fn agent(&self, id: &PlayerId) -> Option<&AgentState> {
        self.agents.iter().find(|a| &a.id == id)
    }

    pub(crate) fn agent_mut(&mut self, id: &PlayerId) -> Option<&mut AgentState> {
        self.agents.iter_mut().find(|a| &a.id == id)
    }

    pub fn living(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.iter().filter(|a| a.alive)
    }

    pub fn living_ids(&self) -> Vec<PlayerId> {
        self.living().map(|a| a.id.clone()).collect()
    }

    /// Living agents currently in `room`.
    pub fn occupants(&self, room: &RoomId) -> Vec<PlayerId> {
        self.agents
            .iter()
            .filter(|a| a.alive && a.current_room() == Some(room))
            .map(|a| a.id.clone())
            .collect()
    }

    pub fn is_over(&self) -> bool {
        self.phase == Phase::GameOver
    }

    /// Canonical JSON snapshot; excludes the RNG. Used for determinism and
    /// replay-equivalence checks and for the final-state digest.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }

    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json().as_bytes());
        let out = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in out {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

/// A free-roam action; `say` may accompany any action while in a room.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Wait,
    Move(RoomId),
    DoTask,
    Report,
    CallMeeting,
    Kill(PlayerId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub say: Option<String>,
}

impl Action {
    pub fn of(kind: ActionKind) -> Action {
        Action { kind, say: None }
    }

    pub fn with_say(kind: ActionKind, text: impl Into<String>) -> Action {
        Action { kind, say: Some(text.into()) }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("cannot place {requested} tasks: map has only {task_rooms} task rooms")]
    UnplaceableTasks { requested: u32, task_rooms: usize },
    #[error("unknown player `{0}`")]
    UnknownPlayer(PlayerId),
    #[error("player `{0}` is dead")]
    DeadPlayer(PlayerId),
    #[error("illegal action {action:?} by `{actor}`: {reason}")]
    IllegalAction { actor: PlayerId, action: ActionKind, reason: String },
    #[error("operation requires phase {expected:?}, current phase is {actual:?}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("vote by or for dead/unknown player `{0}`")]
    InvalidVote(PlayerId),
    #[error("event {seq} illegal in reconstructed state: {reason}")]
    BadEvent { seq: u64, reason: String },
    #[error(transparent)]
    Map(#[from] crate::map::MapError),
}

/// Legal free-roam actions for a living agent, deterministically ordered.
pub fn legal_actions(
    state: &GameState,
    map: &Map,
    config: &GameConfig,
    agent_id: &PlayerId,
) -> Result<Vec<ActionKind>, EngineError> {
    if state.phase != Phase::FreeRoam {
        return Err(EngineError::WrongPhase { expected: Phase::FreeRoam, actual: state.phase });
    }
    let agent = state.agent(agent_id).ok_or_else(|| EngineError::UnknownPlayer(agent_id.clone()))?;
    if !agent.alive {
        return Err(EngineError::DeadPlayer(agent_id.clone()));
    }
    let mut actions = BTreeSet::from([ActionKind::Wait]);
    if let Some(room) = agent.current_room() {
        for (next, _) in map.adjacent(room)? {
            actions.insert(ActionKind::Move(next.clone()));
        }
        if agent.tasks.iter().any(|t| !t.completed && &t.room == room) {
            actions.insert(ActionKind::DoTask);
        }
        if state.bodies.values().any(|b| &b.room == room) {
            actions.insert(ActionKind::Report);
        }
        if room == map.emergency_room() && state.meetings_used < config.meeting_budget {
            actions.insert(ActionKind::CallMeeting);
        }
        if agent.role == Role::Duck && agent.kill_cooldown_remaining == 0 {
            for other in &state.agents {
                if other.alive && other.role == Role::Goose && other.current_room() == Some(room) {
                    actions.insert(ActionKind::Kill(other.id.clone()));
                }
            }
        }
    }
    Ok(actions.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TallyOutcome {
    Ejected(PlayerId),
    NoEjection,
}

/// Plurality tally: the unique player with strictly more votes than every
/// other player and more than the skip count is ejected.
pub fn tally_votes(
    votes: &BTreeMap<PlayerId, VoteChoice>,
    living: &BTreeSet<PlayerId>,
) -> Result<TallyOutcome, EngineError> {
    if votes.len() != living.len() || votes.keys().any(|v| !living.contains(v)) {
        let bad = votes.keys().find(|v| !living.contains(*v)).cloned().unwrap_or_else(|| {
            living.iter().find(|l| !votes.contains_key(*l)).cloned().unwrap_or_else(|| PlayerId::new("?"))
        });
        return Err(EngineError::InvalidVote(bad));
    }
    let mut counts: BTreeMap<&PlayerId, u32> = BTreeMap::new();
    let mut skips = 0u32;
    for choice in votes.values() {
        match choice {
            VoteChoice::Skip => skips += 1,
            VoteChoice::Player(p) => {
                if !living.contains(p) {
                    return Err(EngineError::InvalidVote(p.clone()));
                }
                *counts.entry(p).or_insert(0) += 1;
            }
        }
    }
    let top = counts.values().copied().max().unwrap_or(0);
    if top == 0 || top <= skips {
        return Ok(TallyOutcome::NoEjection);
    }
    let leaders: Vec<&PlayerId> = counts.iter().filter(|(_, c)| **c == top).map(|(p, _)| *p).collect();
    if leaders.len() == 1 {
        Ok(TallyOutcome::Ejected(leaders[0].clone()))
    } else {
        Ok(TallyOutcome::NoEjection)
    }
}

/// Termination check, run after every phase. Priority when several
/// conditions hold on the same tick: parity, then ejection sweep, then task
/// completion, then timeout.
pub fn check_win(state: &GameState, config: &GameConfig) -> Option<GameOutcome> {
    let living_ducks = state.living().filter(|a| a.role == Role::Duck).count();
    let living_geese = state.living().filter(|a| a.role == Role::Goose).count();
    if living_ducks > 0 && living_ducks >= living_geese {
        return Some(GameOutcome { winner: Team::Ducks, reason: WinReason::Parity });
    }
    if living_ducks == 0 {
        return Some(GameOutcome { winner: Team::Geese, reason: WinReason::AllDucksEjected });
    }
    let real_tasks: Vec<&TaskState> =
        state.agents.iter().flat_map(|a| a.tasks.iter()).filter(|t| !t.fake).collect();
    if !real_tasks.is_empty() && real_tasks.iter().all(|t| t.completed) {
        return Some(GameOutcome { winner: Team::Geese, reason: WinReason::TasksComplete });
    }
    if state.tick >= config.tick_budget && living_geese > 0 {
        return Some(GameOutcome { winner: Team::Geese, reason: WinReason::Timeout });
    }
    None
}
