//! The game driver: seeded setup, the free-roam tick loop, meetings, and
//! the retry/fallback shim between the engine and agent policies.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{AgentMemory, Policy, PolicyCtx, ScriptedKind};
use crate::eventlog::{Event, EventKind, GameLog, LogHeader, SnapshotPoint, SCHEMA_VERSION};
use crate::map::{Map, RoomId};
use crate::observation::{build_observation, Observation};

use super::apply::apply_event;
use super::{
    check_win, legal_actions, tally_votes, Action, ActionKind, AgentLocation, EngineError,
    GameConfig, GameOutcome, GameState, MeetingRecord, Phase, PlayerId, Role, TallyOutcome,
    VoteChoice,
};

/// Retries granted to a policy that returns an illegal or failed decision
/// before the engine substitutes the deterministic fallback.
const RETRY_BUDGET: u32 = 2;

pub struct Seat {
    pub policy: Box<dyn Policy>,
    pub memory: AgentMemory,
    /// Times the engine had to substitute a fallback decision for this seat.
    pub fallbacks: u32,
}

/// Per-player policies and memories, with the action-resolution shim: ask,
/// re-ask on illegal/unparseable output, then fall back to wait/empty/skip.
pub struct Seats {
    inner: BTreeMap<PlayerId, Seat>,
}

impl Seats {
    pub fn new() -> Seats {
        Seats { inner: BTreeMap::new() }
    }

    pub fn insert(&mut self, player: PlayerId, policy: Box<dyn Policy>) {
        let memory = AgentMemory::new(player.clone());
        self.inner.insert(player, Seat { policy, memory, fallbacks: 0 });
    }

    pub fn seat(&self, player: &PlayerId) -> Option<&Seat> {
        self.inner.get(player)
    }

    pub fn memory(&self, player: &PlayerId) -> Option<&AgentMemory> {
        self.inner.get(player).map(|s| &s.memory)
    }

    pub fn total_fallbacks(&self) -> u32 {
        self.inner.values().map(|s| s.fallbacks).sum()
    }

    /// Decision for an in-room agent. The returned action's kind is always
    /// in `legal`.
    fn act(&mut self, map: &Map, obs: &Observation, legal: &[ActionKind]) -> Action {
        let seat = self.inner.get_mut(&obs.viewer).expect("seat exists");
        let mut chosen: Option<Action> = None;
        for _ in 0..=RETRY_BUDGET {
            let ctx = PolicyCtx { map, observation: obs, memory: &seat.memory, legal };
            match seat.policy.act(&ctx) {
                Ok(action) if legal.contains(&action.kind) => {
                    chosen = Some(action);
                    break;
                }
                Ok(action) => {
                    log::warn!("{}: illegal action {:?}, retrying", obs.viewer, action.kind);
                }
                Err(e) => {
                    log::warn!("{}: policy failure ({e}), retrying", obs.viewer);
                }
            }
        }
        let action = chosen.unwrap_or_else(|| {
            seat.fallbacks += 1;
            log::warn!("PolicyFallback: {} defaults to wait at tick {}", obs.viewer, obs.tick);
            Action::of(ActionKind::Wait)
        });
        seat.memory.update(obs);
        action
    }

    /// Forced poll for an in-transit agent: the policy sees its observation
    /// (and may update memory) but the only legal action is wait.
    fn transit_poll(&mut self, map: &Map, obs: &Observation) {
        let seat = self.inner.get_mut(&obs.viewer).expect("seat exists");
        let legal = [ActionKind::Wait];
        let ctx = PolicyCtx { map, observation: obs, memory: &seat.memory, legal: &legal };
        let _ = seat.policy.act(&ctx);
        seat.memory.update(obs);
    }

    fn speak(&mut self, map: &Map, obs: &Observation) -> String {
        let seat = self.inner.get_mut(&obs.viewer).expect("seat exists");
        let mut text: Option<String> = None;
        for _ in 0..=RETRY_BUDGET {
            let ctx = PolicyCtx { map, observation: obs, memory: &seat.memory, legal: &[] };
            match seat.policy.speak(&ctx) {
                Ok(t) => {
                    text = Some(t);
                    break;
                }
                Err(e) => log::warn!("{}: utterance failure ({e}), retrying", obs.viewer),
            }
        }
        let text = text.unwrap_or_else(|| {
            seat.fallbacks += 1;
            log::warn!("PolicyFallback: {} speaks empty utterance", obs.viewer);
            String::new()
        });
        seat.memory.update(obs);
        text
    }

    fn vote(&mut self, map: &Map, obs: &Observation, living: &BTreeSet<PlayerId>) -> VoteChoice {
        let seat = self.inner.get_mut(&obs.viewer).expect("seat exists");
        let mut choice: Option<VoteChoice> = None;
        for _ in 0..=RETRY_BUDGET {
            let ctx = PolicyCtx { map, observation: obs, memory: &seat.memory, legal: &[] };
            match seat.policy.vote(&ctx) {
                Ok(VoteChoice::Skip) => {
                    choice = Some(VoteChoice::Skip);
                    break;
                }
                Ok(VoteChoice::Player(p)) if living.contains(&p) => {
                    choice = Some(VoteChoice::Player(p));
                    break;
                }
                Ok(VoteChoice::Player(p)) => {
                    log::warn!("{}: vote for non-living {p}, retrying", obs.viewer);
                }
                Err(e) => log::warn!("{}: vote failure ({e}), retrying", obs.viewer),
            }
        }
        let choice = choice.unwrap_or_else(|| {
            seat.fallbacks += 1;
            log::warn!("PolicyFallback: {} abstains", obs.viewer);
            VoteChoice::Skip
        });
        seat.memory.update(obs);
        choice
    }

    /// Memory-only pass (end of tick, meeting outcome).
    fn observe(&mut self, obs: &Observation) {
        if let Some(seat) = self.inner.get_mut(&obs.viewer) {
            seat.memory.update(obs);
        }
    }
}

impl Default for Seats {
    fn default() -> Self {
        Seats::new()
    }
}

/// A single game instance: owns the state, the seeded RNG, and the log.
pub struct Engine<'a> {
    map: &'a Map,
    config: &'a GameConfig,
    pub state: GameState,
    pub log: GameLog,
    pub meetings: Vec<MeetingRecord>,
}

impl<'a> Engine<'a> {
    /// Seeds the RNG, samples roles, tasks and spawn rooms, and emits the
    /// setup events.
    pub fn new_game(map: &'a Map, config: &'a GameConfig, seed: u64) -> Result<Engine<'a>, EngineError> {
        config.validate(map)?;
        let roster = config.roster();
        let header = LogHeader {
            schema: SCHEMA_VERSION.to_string(),
            seed,
            config: config.clone(),
            map: map.to_config(),
        };
        let mut engine = Engine {
            map,
            config,
            state: GameState::empty(),
            log: GameLog::new(header),
            meetings: Vec::new(),
        };
        engine.state.rng = Some(ChaCha8Rng::seed_from_u64(seed));

        engine.emit(EventKind::GameStart { players: roster.clone(), n_ducks: config.n_ducks })?;

        // Roles: sample exactly n_ducks seats uniformly.
        let mut rng = engine.state.rng.take().expect("engine rng");
        let duck_seats: BTreeSet<usize> =
            rand::seq::index::sample(&mut rng, roster.len(), config.n_ducks as usize)
                .into_iter()
                .collect();

        // Tasks: every agent draws the same way; Duck tasks are fake but
        // identical in form.
        let task_rooms: Vec<RoomId> = map.task_rooms().cloned().collect();
        let mut assignments: Vec<(PlayerId, Role, Vec<RoomId>)> = Vec::new();
        for (idx, player) in roster.iter().enumerate() {
            let role = if duck_seats.contains(&idx) { Role::Duck } else { Role::Goose };
            let rooms: Vec<RoomId> = if config.tasks_per_goose == 0 {
                Vec::new()
            } else {
                rand::seq::index::sample(&mut rng, task_rooms.len(), config.tasks_per_goose as usize)
                    .into_iter()
                    .map(|i| task_rooms[i].clone())
                    .collect()
            };
            assignments.push((player.clone(), role, rooms));
        }
        let all_rooms: Vec<RoomId> = map.rooms().cloned().collect();
        let spawns: Vec<RoomId> =
            roster.iter().map(|_| all_rooms[rng.gen_range(0..all_rooms.len())].clone()).collect();
        engine.state.rng = Some(rng);

        for (player, role, _) in &assignments {
            engine.emit(EventKind::RoleAssigned { player: player.clone(), role: *role })?;
        }
        for (player, role, rooms) in &assignments {
            for (i, room) in rooms.iter().enumerate() {
                engine.emit(EventKind::TaskAssigned {
                    player: player.clone(),
                    task_id: format!("{player}-t{}", i + 1),
                    room: room.clone(),
                    fake: *role == Role::Duck,
                })?;
            }
        }
        for (player, room) in roster.iter().zip(&spawns) {
            engine.emit(EventKind::Respawned { player: player.clone(), room: room.clone() })?;
        }

        if let Some(win) = check_win(&engine.state, config) {
            engine.emit_game_over(win)?;
        }
        Ok(engine)
    }

    pub fn into_log(self) -> GameLog {
        self.log
    }

    fn emit(&mut self, kind: EventKind) -> Result<(), EngineError> {
        let event = Event { seq: self.log.events.len() as u64, tick: self.state.tick, kind };
        apply_event(&mut self.state, self.map, self.config, &event)?;
        self.log.append(event).expect("engine maintains the sequence");
        Ok(())
    }

    fn emit_game_over(&mut self, outcome: GameOutcome) -> Result<(), EngineError> {
        // The digest covers the final state, so compute it against a probe
        // that has already absorbed the GameOver transition.
        let mut probe = self.state.clone();
        probe.rng = None;
        let probe_event = Event {
            seq: self.log.events.len() as u64,
            tick: self.state.tick,
            kind: EventKind::GameOver {
                winner: outcome.winner,
                reason: outcome.reason,
                digest: String::new(),
            },
        };
        apply_event(&mut probe, self.map, self.config, &probe_event)?;
        let digest = probe.digest();
        self.emit(EventKind::GameOver { winner: outcome.winner, reason: outcome.reason, digest })
    }

    fn observation(&self, viewer: &PlayerId) -> Result<Observation, EngineError> {
        build_observation(self.map, &self.state, viewer)
    }

    /// One free-roam tick: advance transits, tick down cooldowns, poll the
    /// living agents in seeded-random order applying each action
    /// immediately, then evaluate win conditions and phase transitions.
    pub fn step_free_roam(&mut self, seats: &mut Seats) -> Result<(), EngineError> {
        if self.state.phase != Phase::FreeRoam {
            return Err(EngineError::WrongPhase { expected: Phase::FreeRoam, actual: self.state.phase });
        }
        if self.state.outcome.is_some() {
            return Err(EngineError::InvalidConfig("game is already over".into()));
        }

        self.state.tick += 1;
        self.state.buffers.clear();

        // Stage 1: transits advance and arrivals commit.
        let transits: Vec<(PlayerId, RoomId, RoomId, u32)> = self
            .state
            .agents
            .iter()
            .filter(|a| a.alive)
            .filter_map(|a| match &a.location {
                Some(AgentLocation::Transit { from, to, remaining }) => {
                    Some((a.id.clone(), from.clone(), to.clone(), *remaining))
                }
                _ => None,
            })
            .collect();
        for (actor, from, to, remaining) in transits {
            if remaining == 1 {
                self.emit(EventKind::Arrived { actor, from, room: to })?;
            } else {
                self.emit(EventKind::MoveProgressed { actor, from, to, remaining: remaining - 1 })?;
            }
        }

        // Stage 2: Duck cooldowns tick down (floor at zero).
        let cooling: Vec<(PlayerId, u32)> = self
            .state
            .agents
            .iter()
            .filter(|a| a.alive && a.role == Role::Duck && a.kill_cooldown_remaining > 0)
            .map(|a| (a.id.clone(), a.kill_cooldown_remaining - 1))
            .collect();
        for (actor, remaining) in cooling {
            self.emit(EventKind::CooldownTick { actor, remaining })?;
        }

        // Stage 3: poll living agents in seeded-random order; each action is
        // applied immediately, so later agents see earlier effects.
        let mut order = self.state.living_ids();
        let mut rng = self.state.rng.take().expect("engine rng");
        order.shuffle(&mut rng);
        self.state.rng = Some(rng);

        for actor in order {
            let agent = match self.state.agent(&actor) {
                Some(a) if a.alive => a,
                _ => continue, // killed earlier this tick
            };
            let in_transit = agent.in_transit();
            let obs = self.observation(&actor)?;
            if in_transit {
                seats.transit_poll(self.map, &obs);
                continue;
            }
            let legal = legal_actions(&self.state, self.map, self.config, &actor)?;
            let action = seats.act(self.map, &obs, &legal);
            debug_assert!(legal.contains(&action.kind));
            let room = self
                .state
                .agent(&actor)
                .and_then(|a| a.current_room().cloned())
                .expect("in-room actor");
            if let Some(text) = &action.say {
                self.emit(EventKind::Said { actor: actor.clone(), room: room.clone(), text: text.clone() })?;
            }
            match action.kind {
                ActionKind::Wait => {
                    self.emit(EventKind::Waited { actor: actor.clone(), room })?;
                }
                ActionKind::Move(to) => {
                    let duration = self.map.weight(&room, &to).expect("legal move uses a corridor");
                    self.emit(EventKind::MoveStarted { actor: actor.clone(), from: room, to, duration })?;
                }
                ActionKind::DoTask => {
                    let agent = self.state.agent(&actor).expect("actor exists");
                    let task = agent
                        .tasks
                        .iter()
                        .find(|t| !t.completed && t.room == room)
                        .expect("legal do_task has a task here");
                    let (task_id, progress, required) =
                        (task.id.clone(), task.progress + 1, task.required);
                    self.emit(EventKind::TaskProgressed {
                        actor: actor.clone(),
                        task_id: task_id.clone(),
                        room: room.clone(),
                        progress,
                        required,
                    })?;
                    if progress == required {
                        self.emit(EventKind::TaskCompleted { actor: actor.clone(), task_id, room })?;
                    }
                }
                ActionKind::Report => {
                    let victim = self
                        .state
                        .bodies
                        .values()
                        .filter(|b| b.room == room)
                        .min_by_key(|b| (b.death_tick, b.victim.clone()))
                        .map(|b| b.victim.clone())
                        .expect("legal report has a body here");
                    self.emit(EventKind::BodyReported { reporter: actor.clone(), victim, room })?;
                }
                ActionKind::CallMeeting => {
                    self.emit(EventKind::MeetingCalled { caller: actor.clone(), room })?;
                }
                ActionKind::Kill(victim) => {
                    self.emit(EventKind::Killed { actor: actor.clone(), victim, room })?;
                }
            }
        }

        // End-of-tick memory pass: complete chat and witness buffers reach
        // every living agent, not just those polled before the activity.
        for viewer in self.state.living_ids() {
            let obs = self.observation(&viewer)?;
            seats.observe(&obs);
        }

        // Stage 4: termination first, then the meeting transition.
        if let Some(win) = check_win(&self.state, self.config) {
            self.emit_game_over(win)?;
        } else if self.state.meeting.is_some() {
            self.emit(EventKind::PhaseChanged { phase: Phase::Discussion })?;
        }
        Ok(())
    }

    /// Runs a meeting to completion: fixed speaking order, discussion
    /// rounds, simultaneous voting, the tally, and (if the game continues)
    /// respawn and return to free roam.
    pub fn run_meeting(&mut self, seats: &mut Seats) -> Result<MeetingRecord, EngineError> {
        if self.state.phase != Phase::Discussion {
            return Err(EngineError::WrongPhase {
                expected: Phase::Discussion,
                actual: self.state.phase,
            });
        }
        let trigger_agent =
            self.state.meeting.as_ref().expect("discussion has a meeting").trigger.agent().clone();

        let mut rest: Vec<PlayerId> =
            self.state.living_ids().into_iter().filter(|p| p != &trigger_agent).collect();
        let mut rng = self.state.rng.take().expect("engine rng");
        rest.shuffle(&mut rng);
        self.state.rng = Some(rng);
        let mut order = vec![trigger_agent];
        order.extend(rest);
        self.emit(EventKind::SpeakingOrderFixed { order: order.clone() })?;

        for round in 1..=self.config.discussion_rounds {
            for speaker in &order {
                let obs = self.observation(speaker)?;
                let text = seats.speak(self.map, &obs);
                self.emit(EventKind::Utterance { speaker: speaker.clone(), round, text })?;
            }
        }

        self.emit(EventKind::PhaseChanged { phase: Phase::Voting })?;
        let living: BTreeSet<PlayerId> = self.state.living_ids().into_iter().collect();
        for voter in &order {
            let obs = self.observation(voter)?;
            let choice = seats.vote(self.map, &obs, &living);
            let target = match choice {
                VoteChoice::Skip => None,
                VoteChoice::Player(p) => Some(p),
            };
            self.emit(EventKind::VoteCast { voter: voter.clone(), target })?;
        }

        self.emit(EventKind::PhaseChanged { phase: Phase::Ejection })?;
        let votes = self.state.meeting.as_ref().expect("meeting").votes.clone();
        match tally_votes(&votes, &living)? {
            TallyOutcome::Ejected(player) => self.emit(EventKind::Ejected { player })?,
            TallyOutcome::NoEjection => self.emit(EventKind::NoEjection)?,
        }

        // Outcome pass: survivors remember the transcript and the result.
        for viewer in self.state.living_ids() {
            let obs = self.observation(&viewer)?;
            seats.observe(&obs);
        }

        let meeting = self.state.meeting.as_ref().expect("meeting").clone();
        let record = MeetingRecord {
            trigger: meeting.trigger,
            meeting_tick: meeting.meeting_tick,
            speaking_order: meeting.speaking_order,
            transcript: meeting.transcript,
            votes: meeting.votes,
            ejected: meeting.ejected,
        };

        if let Some(win) = check_win(&self.state, self.config) {
            self.emit_game_over(win)?;
        } else {
            let survivors = self.state.living_ids();
            let all_rooms: Vec<RoomId> = self.map.rooms().cloned().collect();
            let mut rng = self.state.rng.take().expect("engine rng");
            let destinations: Vec<RoomId> = survivors
                .iter()
                .map(|_| all_rooms[rng.gen_range(0..all_rooms.len())].clone())
                .collect();
            self.state.rng = Some(rng);
            for (player, room) in survivors.into_iter().zip(destinations) {
                self.emit(EventKind::Respawned { player, room })?;
            }
            self.emit(EventKind::PhaseChanged { phase: Phase::FreeRoam })?;
        }

        self.meetings.push(record.clone());
        Ok(record)
    }

    /// Alternates free roam and meetings until the game ends.
    pub fn run_to_completion(
        &mut self,
        seats: &mut Seats,
        mut observer: impl FnMut(SnapshotPoint, &GameState),
    ) -> Result<(), EngineError> {
        observer(SnapshotPoint::Setup, &self.state);
        while !self.state.is_over() {
            match self.state.phase {
                Phase::FreeRoam => {
                    self.step_free_roam(seats)?;
                    observer(SnapshotPoint::Roam(self.state.tick), &self.state);
                }
                Phase::Discussion => {
                    self.run_meeting(seats)?;
                    observer(SnapshotPoint::Meeting(self.state.tick), &self.state);
                }
                other => {
                    return Err(EngineError::WrongPhase { expected: Phase::FreeRoam, actual: other })
                }
            }
        }
        Ok(())
    }
}

/// Builds one policy per seat once roles are known.
pub type SeatFactory<'f> = dyn FnMut(&PlayerId, Role) -> Box<dyn Policy> + 'f;

/// Plays a full game and returns its event log.
pub fn run_game(
    map: &Map,
    config: &GameConfig,
    seed: u64,
    factory: &mut SeatFactory,
) -> Result<GameLog, EngineError> {
    run_game_observed(map, config, seed, factory, |_, _| {}).map(|(log, _)| log)
}

/// As `run_game`, also exposing per-tick snapshots and the seats (for
/// fallback accounting and memory inspection).
pub fn run_game_observed(
    map: &Map,
    config: &GameConfig,
    seed: u64,
    factory: &mut SeatFactory,
    observer: impl FnMut(SnapshotPoint, &GameState),
) -> Result<(GameLog, Seats), EngineError> {
    let mut engine = Engine::new_game(map, config, seed)?;
    let mut seats = Seats::new();
    for agent in &engine.state.agents {
        seats.insert(agent.id.clone(), factory(&agent.id, agent.role));
    }
    engine.run_to_completion(&mut seats, observer)?;
    Ok((engine.into_log(), seats))
}

/// Seat factory mapping roles to scripted baselines: task-focused Geese, a
/// stalking Duck. This is the reference scripted lineup.
pub fn scripted_seats(seed: u64) -> impl FnMut(&PlayerId, Role) -> Box<dyn Policy> {
    move |player, role| {
        let kind = match role {
            Role::Goose => ScriptedKind::TaskGoose,
            Role::Duck => ScriptedKind::StalkerDuck,
        };
        crate::agents::scripted_policy(kind, seed, player)
    }
}
