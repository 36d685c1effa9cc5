//! Pure event application. The engine decides events (using its RNG and the
//! agent policies) and then mutates state exclusively through this function;
//! replay folds the same function over a parsed log, which is what makes
//! replay exact by construction.

use std::collections::BTreeSet;

use crate::eventlog::{Event, EventKind};
use crate::map::Map;

use super::{
    ActiveMeeting, AgentLocation, AgentState, BodyRecord, ChatEntry, EngineError, GameConfig,
    GameOutcome, GameState, MeetingTrigger, MoveDirection, Phase, PlayerId, Role, TaskState,
    VoteChoice, WitnessedMove,
};

fn bad(seq: u64, reason: impl Into<String>) -> EngineError {
    EngineError::BadEvent { seq, reason: reason.into() }
}

/// Applies one event to the state, validating that it is legal in the
/// reconstructed state. Tick buffers are cleared whenever the event tick
/// advances past the state tick.
pub fn apply_event(
    state: &mut GameState,
    map: &Map,
    config: &GameConfig,
    event: &Event,
) -> Result<(), EngineError> {
    let seq = event.seq;
    if event.tick < state.tick {
        return Err(bad(seq, "tick regression"));
    }
    if event.tick > state.tick {
        state.tick = event.tick;
        state.buffers.clear();
    }

    match &event.kind {
        EventKind::GameStart { players, n_ducks } => {
            if !state.agents.is_empty() {
                return Err(bad(seq, "duplicate GameStart"));
            }
            if players.len() != config.n_agents as usize || *n_ducks != config.n_ducks {
                return Err(bad(seq, "GameStart does not match config"));
            }
        }
        EventKind::RoleAssigned { player, role } => {
            if state.agent(player).is_some() {
                return Err(bad(seq, format!("role already assigned to {player}")));
            }
            state.agents.push(AgentState {
                id: player.clone(),
                role: *role,
                alive: true,
                location: None,
                tasks: Vec::new(),
                visited_rooms: BTreeSet::new(),
                kill_cooldown_remaining: if *role == Role::Duck { config.kill_cooldown } else { 0 },
            });
        }
        EventKind::TaskAssigned { player, task_id, room, fake } => {
            if !map.contains(room) {
                return Err(bad(seq, format!("task room {room} not on map")));
            }
            let required = config.task_duration;
            let agent =
                state.agent_mut(player).ok_or_else(|| bad(seq, format!("unknown player {player}")))?;
            if *fake != (agent.role == Role::Duck) {
                return Err(bad(seq, "fake flag does not match role"));
            }
            agent.tasks.push(TaskState {
                id: task_id.clone(),
                room: room.clone(),
                progress: 0,
                required,
                completed: false,
                fake: *fake,
            });
        }
        EventKind::Respawned { player, room } => {
            if !map.contains(room) {
                return Err(bad(seq, format!("respawn room {room} not on map")));
            }
            let agent =
                state.agent_mut(player).ok_or_else(|| bad(seq, format!("unknown player {player}")))?;
            if !agent.alive {
                return Err(bad(seq, format!("respawn of dead player {player}")));
            }
            agent.location = Some(AgentLocation::Room(room.clone()));
            agent.visited_rooms.insert(room.clone());
            reset_partial_progress(agent);
        }
        EventKind::MoveStarted { actor, from, to, duration } => {
            let weight = map
                .weight(from, to)
                .ok_or_else(|| bad(seq, format!("no corridor {from}-{to}")))?;
            if *duration != weight {
                return Err(bad(seq, "duration does not match corridor weight"));
            }
            let witnesses = co_located(state, actor, from);
            let agent = living_agent(state, actor, seq)?;
            if agent.current_room() != Some(from) {
                return Err(bad(seq, format!("{actor} is not in {from}")));
            }
            reset_partial_progress(agent);
            agent.location =
                Some(AgentLocation::Transit { from: from.clone(), to: to.clone(), remaining: *duration });
            state.buffers.witnessed_moves.push(WitnessedMove {
                mover: actor.clone(),
                direction: MoveDirection::Departed,
                room: from.clone(),
                via: to.clone(),
                witnesses,
            });
        }
        EventKind::MoveProgressed { actor, from, to, remaining } => {
            let agent = living_agent(state, actor, seq)?;
            let consistent = *remaining >= 1
                && matches!(
                    &agent.location,
                    Some(AgentLocation::Transit { from: f, to: t, remaining: r })
                        if f == from && t == to && *r == remaining + 1
                );
            if !consistent {
                return Err(bad(seq, format!("{actor} transit state mismatch")));
            }
            agent.location = Some(AgentLocation::Transit {
                from: from.clone(),
                to: to.clone(),
                remaining: *remaining,
            });
        }
        EventKind::Arrived { actor, from, room } => {
            let witnesses = co_located(state, actor, room);
            let agent = living_agent(state, actor, seq)?;
            match &agent.location {
                Some(AgentLocation::Transit { from: f, to: t, remaining: 1 })
                    if f == from && t == room => {}
                _ => return Err(bad(seq, format!("{actor} was not arriving in {room}"))),
            }
            agent.location = Some(AgentLocation::Room(room.clone()));
            agent.visited_rooms.insert(room.clone());
            state.buffers.witnessed_moves.push(WitnessedMove {
                mover: actor.clone(),
                direction: MoveDirection::Arrived,
                room: room.clone(),
                via: from.clone(),
                witnesses,
            });
        }
        EventKind::Waited { actor, room } => {
            let agent = living_agent(state, actor, seq)?;
            if agent.current_room() != Some(room) {
                return Err(bad(seq, format!("{actor} is not in {room}")));
            }
            reset_partial_progress(agent);
        }
        EventKind::TaskProgressed { actor, task_id, room, progress, required } => {
            let agent = living_agent(state, actor, seq)?;
            if agent.current_room() != Some(room) {
                return Err(bad(seq, format!("{actor} is not in {room}")));
            }
            let task = agent
                .tasks
                .iter_mut()
                .find(|t| &t.id == task_id)
                .ok_or_else(|| bad(seq, format!("unknown task {task_id}")))?;
            if task.completed || task.room != *room || task.required != *required {
                return Err(bad(seq, format!("task {task_id} not progressable in {room}")));
            }
            if *progress != task.progress + 1 || *progress > task.required {
                return Err(bad(seq, format!("task {task_id} progress out of order")));
            }
            task.progress = *progress;
        }
        EventKind::TaskCompleted { actor, task_id, room } => {
            let agent = living_agent(state, actor, seq)?;
            let task = agent
                .tasks
                .iter_mut()
                .find(|t| &t.id == task_id)
                .ok_or_else(|| bad(seq, format!("unknown task {task_id}")))?;
            if task.completed || task.progress != task.required || task.room != *room {
                return Err(bad(seq, format!("task {task_id} not completable")));
            }
            task.completed = true;
        }
        EventKind::Said { actor, room, text } => {
            let mut listeners: BTreeSet<PlayerId> = co_located(state, actor, room);
            listeners.insert(actor.clone());
            let agent = living_agent(state, actor, seq)?;
            if agent.current_room() != Some(room) {
                return Err(bad(seq, format!("{actor} cannot speak in {room}")));
            }
            state.buffers.proximity_chat.push(ChatEntry {
                speaker: actor.clone(),
                room: room.clone(),
                text: text.clone(),
                listeners,
            });
        }
        EventKind::Killed { actor, victim, room } => {
            let tick = state.tick;
            {
                let killer = living_agent(state, actor, seq)?;
                if killer.role != Role::Duck {
                    return Err(bad(seq, format!("{actor} is not a Duck")));
                }
                if killer.kill_cooldown_remaining != 0 {
                    return Err(bad(seq, format!("{actor} kill cooldown not elapsed")));
                }
                if killer.current_room() != Some(room) {
                    return Err(bad(seq, format!("{actor} is not in {room}")));
                }
                reset_partial_progress(killer);
                killer.kill_cooldown_remaining = config.kill_cooldown;
            }
            {
                let target = living_agent(state, victim, seq)?;
                if target.role != Role::Goose {
                    return Err(bad(seq, format!("kill target {victim} is not a Goose")));
                }
                if target.current_room() != Some(room) {
                    return Err(bad(seq, format!("victim {victim} is not in {room}")));
                }
                target.alive = false;
            }
            state
                .bodies
                .insert(victim.clone(), BodyRecord { victim: victim.clone(), room: room.clone(), death_tick: tick });
        }
        EventKind::CooldownTick { actor, remaining } => {
            let agent = living_agent(state, actor, seq)?;
            if agent.role != Role::Duck || agent.kill_cooldown_remaining != remaining + 1 {
                return Err(bad(seq, format!("cooldown tick mismatch for {actor}")));
            }
            agent.kill_cooldown_remaining = *remaining;
        }
        EventKind::BodyReported { reporter, victim, room } => {
            let rep = state
                .agent(reporter)
                .ok_or_else(|| bad(seq, format!("unknown player {reporter}")))?;
            if !rep.alive || rep.current_room() != Some(room) {
                return Err(bad(seq, format!("{reporter} cannot report from {room}")));
            }
            match state.bodies.get(victim) {
                Some(body) if body.room == *room => {}
                _ => return Err(bad(seq, format!("no body of {victim} in {room}"))),
            }
            if state.meeting.is_none() {
                state.meeting = Some(ActiveMeeting {
                    trigger: MeetingTrigger::BodyReport {
                        reporter: reporter.clone(),
                        victim: victim.clone(),
                    },
                    meeting_tick: state.tick,
                    speaking_order: Vec::new(),
                    transcript: Vec::new(),
                    votes: std::collections::BTreeMap::new(),
                    ejected: None,
                });
            }
        }
        EventKind::MeetingCalled { caller, room } => {
            if room != map.emergency_room() {
                return Err(bad(seq, format!("{room} is not the emergency room")));
            }
            if state.meetings_used >= config.meeting_budget {
                return Err(bad(seq, "meeting budget exhausted"));
            }
            let agent =
                state.agent(caller).ok_or_else(|| bad(seq, format!("unknown player {caller}")))?;
            if !agent.alive || agent.current_room() != Some(room) {
                return Err(bad(seq, format!("{caller} cannot call a meeting from {room}")));
            }
            state.meetings_used += 1;
            if state.meeting.is_none() {
                state.meeting = Some(ActiveMeeting {
                    trigger: MeetingTrigger::Emergency { caller: caller.clone() },
                    meeting_tick: state.tick,
                    speaking_order: Vec::new(),
                    transcript: Vec::new(),
                    votes: std::collections::BTreeMap::new(),
                    ejected: None,
                });
            }
        }
        EventKind::PhaseChanged { phase } => match phase {
            Phase::Discussion => {
                if state.meeting.is_none() {
                    return Err(bad(seq, "discussion without a pending trigger"));
                }
                state.phase = Phase::Discussion;
                // All in-transit movement is cancelled; travellers return to
                // their origin room. Partial task progress does not survive
                // the interruption.
                for agent in state.agents.iter_mut().filter(|a| a.alive) {
                    if let Some(AgentLocation::Transit { from, .. }) = &agent.location {
                        agent.location = Some(AgentLocation::Room(from.clone()));
                    }
                    reset_partial_progress(agent);
                }
            }
            Phase::Voting => {
                require_phase(state, Phase::Discussion, seq)?;
                state.phase = Phase::Voting;
            }
            Phase::Ejection => {
                require_phase(state, Phase::Voting, seq)?;
                state.phase = Phase::Ejection;
            }
            Phase::FreeRoam => {
                require_phase(state, Phase::Ejection, seq)?;
                state.phase = Phase::FreeRoam;
                state.bodies.clear();
                state.meeting = None;
            }
            Phase::GameOver => {
                return Err(bad(seq, "GameOver is signalled by its own event"));
            }
        },
        EventKind::SpeakingOrderFixed { order } => {
            require_phase(state, Phase::Discussion, seq)?;
            let living: BTreeSet<PlayerId> =
                state.agents.iter().filter(|a| a.alive).map(|a| a.id.clone()).collect();
            let ordered: BTreeSet<PlayerId> = order.iter().cloned().collect();
            if living != ordered || order.len() != ordered.len() {
                return Err(bad(seq, "speaking order must contain exactly the living players"));
            }
            let meeting =
                state.meeting.as_mut().ok_or_else(|| bad(seq, "no meeting in progress"))?;
            if order.first() != Some(meeting.trigger.agent()) {
                return Err(bad(seq, "trigger agent must speak first"));
            }
            meeting.speaking_order = order.clone();
        }
        EventKind::Utterance { speaker, round, text } => {
            require_phase(state, Phase::Discussion, seq)?;
            let meeting =
                state.meeting.as_mut().ok_or_else(|| bad(seq, "no meeting in progress"))?;
            meeting.transcript.push(super::TranscriptEntry {
                speaker: speaker.clone(),
                round: *round,
                text: text.clone(),
            });
        }
        EventKind::VoteCast { voter, target } => {
            require_phase(state, Phase::Voting, seq)?;
            let alive = |p: &PlayerId| state.agent(p).map(|a| a.alive).unwrap_or(false);
            if !alive(voter) {
                return Err(bad(seq, format!("vote by dead/unknown player {voter}")));
            }
            if let Some(t) = target {
                if !alive(t) {
                    return Err(bad(seq, format!("vote for dead/unknown player {t}")));
                }
            }
            let meeting =
                state.meeting.as_mut().ok_or_else(|| bad(seq, "no meeting in progress"))?;
            let choice = match target {
                Some(t) => VoteChoice::Player(t.clone()),
                None => VoteChoice::Skip,
            };
            if meeting.votes.insert(voter.clone(), choice).is_some() {
                return Err(bad(seq, format!("duplicate vote by {voter}")));
            }
        }
        EventKind::Ejected { player } => {
            require_phase(state, Phase::Ejection, seq)?;
            let agent = living_agent(state, player, seq)?;
            agent.alive = false;
            if let Some(meeting) = state.meeting.as_mut() {
                meeting.ejected = Some(player.clone());
            }
        }
        EventKind::NoEjection => {
            require_phase(state, Phase::Ejection, seq)?;
        }
        EventKind::GameOver { winner, reason, .. } => {
            if state.outcome.is_some() {
                return Err(bad(seq, "duplicate GameOver"));
            }
            state.phase = Phase::GameOver;
            state.outcome = Some(GameOutcome { winner: *winner, reason: *reason });
        }
    }
    Ok(())
}

fn require_phase(state: &GameState, expected: Phase, seq: u64) -> Result<(), EngineError> {
    if state.phase != expected {
        return Err(bad(seq, format!("expected phase {expected:?}, state is {:?}", state.phase)));
    }
    Ok(())
}

fn living_agent<'a>(
    state: &'a mut GameState,
    id: &PlayerId,
    seq: u64,
) -> Result<&'a mut AgentState, EngineError> {
    let agent = state
        .agents
        .iter_mut()
        .find(|a| &a.id == id)
        .ok_or_else(|| bad(seq, format!("unknown player {id}")))?;
    if !agent.alive {
        return Err(bad(seq, format!("{id} is dead")));
    }
    Ok(agent)
}

/// Living agents currently in `room`, excluding `except`. Evaluated at the
/// instant an event applies, which is what makes witnessing precise under
/// immediate action application.
fn co_located(state: &GameState, except: &PlayerId, room: &crate::map::RoomId) -> BTreeSet<PlayerId> {
    state
        .agents
        .iter()
        .filter(|a| a.alive && &a.id != except && a.current_room() == Some(room))
        .map(|a| a.id.clone())
        .collect()
}

// Consecutive-tick task semantics: any action other than do_task, or any
// engine-forced relocation, zeroes unfinished progress.
fn reset_partial_progress(agent: &mut AgentState) {
    for task in agent.tasks.iter_mut().filter(|t| !t.completed) {
        task.progress = 0;
    }
}
