//! Deterministic baseline agents. All of them speak through the structured
//! claim DSL so the verification pipeline is testable without any model:
//! they describe their true memory, except the stalker duck, which plants
//! one false location claim per meeting.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{Action, ActionKind, PlayerId, Role, VoteChoice};
use crate::map::RoomId;
use crate::observation::LocationView;

use super::{AgentMemory, Policy, PolicyCtx, PolicyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptedKind {
    RandomWalker,
    TaskGoose,
    BuddyGoose,
    StalkerDuck,
}

impl ScriptedKind {
    pub fn by_name(name: &str) -> Option<ScriptedKind> {
        match name {
            "random_walker" => Some(ScriptedKind::RandomWalker),
            "task_goose" => Some(ScriptedKind::TaskGoose),
            "buddy_goose" => Some(ScriptedKind::BuddyGoose),
            "stalker_duck" => Some(ScriptedKind::StalkerDuck),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScriptedKind::RandomWalker => "random_walker",
            ScriptedKind::TaskGoose => "task_goose",
            ScriptedKind::BuddyGoose => "buddy_goose",
            ScriptedKind::StalkerDuck => "stalker_duck",
        }
    }

    pub fn all() -> [ScriptedKind; 4] {
        [
            ScriptedKind::RandomWalker,
            ScriptedKind::TaskGoose,
            ScriptedKind::BuddyGoose,
            ScriptedKind::StalkerDuck,
        ]
    }
}

/// Builds a scripted policy with its own RNG stream derived from the game
/// seed and the seat name, so batch runs stay reproducible per seat.
pub fn scripted_policy(kind: ScriptedKind, seed: u64, player: &PlayerId) -> Box<dyn Policy> {
    let rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(player.as_str().as_bytes()));
    match kind {
        ScriptedKind::RandomWalker => Box::new(RandomWalker { rng }),
        ScriptedKind::TaskGoose => Box::new(TaskGoose { rng, did_task: Vec::new() }),
        ScriptedKind::BuddyGoose => Box::new(BuddyGoose { rng, did_task: Vec::new() }),
        ScriptedKind::StalkerDuck => {
            Box::new(StalkerDuck { rng, did_task: Vec::new(), just_killed: false })
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

struct RandomWalker {
    rng: ChaCha8Rng,
}

impl Policy for RandomWalker {
    fn act(&mut self, ctx: &PolicyCtx) -> Result<Action, PolicyError> {
        let choices: Vec<&ActionKind> =
            ctx.legal.iter().filter(|k| !matches!(k, ActionKind::Kill(_))).collect();
        let kind = (*choices.choose(&mut self.rng).expect("wait is always legal")).clone();
        let say = if matches!(kind, ActionKind::Move(_)) && self.rng.gen_bool(0.2) {
            Some("passing through".to_string())
        } else {
            None
        };
        Ok(Action { kind, say })
    }

    fn speak(&mut self, ctx: &PolicyCtx) -> Result<String, PolicyError> {
        Ok(honest_statement(ctx.memory, &ctx.observation.viewer, 1))
    }

    fn vote(&mut self, ctx: &PolicyCtx) -> Result<VoteChoice, PolicyError> {
        let mut options = vec![VoteChoice::Skip];
        if let Some(meeting) = &ctx.observation.summary.meeting {
            for p in &meeting.speaking_order {
                if p != &ctx.observation.viewer {
                    options.push(VoteChoice::Player(p.clone()));
                }
            }
        }
        Ok(options.choose(&mut self.rng).cloned().unwrap_or(VoteChoice::Skip))
    }
}

struct TaskGoose {
    rng: ChaCha8Rng,
    did_task: Vec<(u64, RoomId)>,
}

impl Policy for TaskGoose {
    fn act(&mut self, ctx: &PolicyCtx) -> Result<Action, PolicyError> {
        goose_roam(ctx, &mut self.rng, &mut self.did_task, false)
    }

    fn speak(&mut self, ctx: &PolicyCtx) -> Result<String, PolicyError> {
        Ok(goose_statement(ctx, &self.did_task))
    }

    fn vote(&mut self, ctx: &PolicyCtx) -> Result<VoteChoice, PolicyError> {
        Ok(vote_against_contradicted_claims(ctx))
    }
}

struct BuddyGoose {
    rng: ChaCha8Rng,
    did_task: Vec<(u64, RoomId)>,
}

impl Policy for BuddyGoose {
    fn act(&mut self, ctx: &PolicyCtx) -> Result<Action, PolicyError> {
        goose_roam(ctx, &mut self.rng, &mut self.did_task, true)
    }

    fn speak(&mut self, ctx: &PolicyCtx) -> Result<String, PolicyError> {
        Ok(goose_statement(ctx, &self.did_task))
    }

    fn vote(&mut self, ctx: &PolicyCtx) -> Result<VoteChoice, PolicyError> {
        Ok(vote_against_contradicted_claims(ctx))
    }
}

/// Shared goose free-roam rule: report, finish the task under way, otherwise
/// head for the nearest incomplete task. The buddy variant detours toward
/// the most recently seen player when it has no one nearby.
fn goose_roam(
    ctx: &PolicyCtx,
    rng: &mut ChaCha8Rng,
    did_task: &mut Vec<(u64, RoomId)>,
    buddy_up: bool,
) -> Result<Action, PolicyError> {
    let obs = &ctx.observation;
    if ctx.legal.contains(&ActionKind::Report) {
        return Ok(Action::of(ActionKind::Report));
    }
    if ctx.legal.contains(&ActionKind::DoTask) {
        if let LocationView::Room(room) = &obs.summary.location {
            did_task.push((obs.tick, room.clone()));
        }
        return Ok(Action::of(ActionKind::DoTask));
    }

    let here = match &obs.summary.location {
        LocationView::Room(r) => r.clone(),
        LocationView::Transit { .. } => return Ok(Action::of(ActionKind::Wait)),
    };

    // Buddy rule: stick with company; chase the last player seen elsewhere.
    if buddy_up {
        if !obs.summary.co_located.is_empty() && !obs.summary.tasks.iter().any(|t| !t.completed) {
            return Ok(Action::of(ActionKind::Wait));
        }
        if obs.summary.co_located.is_empty() {
            let seen = ctx.memory.seen_since(ctx.memory.segment_first_tick());
            let latest =
                seen.values().filter_map(|(t, r)| r.clone().map(|room| (*t, room))).max_by_key(|(t, _)| *t);
            if let Some((_, room)) = latest {
                if room != here {
                    if let Ok((path, _)) = ctx.map.shortest_travel(&here, &room) {
                        if path.len() >= 2 && ctx.legal.contains(&ActionKind::Move(path[1].clone())) {
                            return Ok(Action::of(ActionKind::Move(path[1].clone())));
                        }
                    }
                }
            }
        }
    }

    // Route to the nearest room with an incomplete task.
    let mut best: Option<(u32, RoomId)> = None;
    for task in obs.summary.tasks.iter().filter(|t| !t.completed) {
        if let Ok((_, cost)) = ctx.map.shortest_travel(&here, &task.room) {
            let candidate = (cost, task.room.clone());
            if best.as_ref().map(|b| candidate < *b).unwrap_or(true) {
                best = Some(candidate);
            }
        }
    }
    if let Some((_, target)) = best {
        if let Ok((path, _)) = ctx.map.shortest_travel(&here, &target) {
            if path.len() >= 2 {
                let hop = ActionKind::Move(path[1].clone());
                if ctx.legal.contains(&hop) {
                    return Ok(Action::of(hop));
                }
            }
        }
    }

    // Everything done: wander.
    let moves: Vec<&ActionKind> =
        ctx.legal.iter().filter(|k| matches!(k, ActionKind::Move(_))).collect();
    match moves.choose(rng) {
        Some(kind) => Ok(Action::of((*kind).clone())),
        None => Ok(Action::of(ActionKind::Wait)),
    }
}

struct StalkerDuck {
    rng: ChaCha8Rng,
    did_task: Vec<(u64, RoomId)>,
    just_killed: bool,
}

impl Policy for StalkerDuck {
    fn act(&mut self, ctx: &PolicyCtx) -> Result<Action, PolicyError> {
        let obs = &ctx.observation;

        // Leave the scene first; the body can be found without us.
        if self.just_killed {
            self.just_killed = false;
            let mut moves: Vec<RoomId> = ctx
                .legal
                .iter()
                .filter_map(|k| match k {
                    ActionKind::Move(r) => Some(r.clone()),
                    _ => None,
                })
                .collect();
            moves.sort();
            if let Some(room) = moves.first() {
                return Ok(Action::of(ActionKind::Move(room.clone())));
            }
        }

        let mut kills: Vec<PlayerId> = ctx
            .legal
            .iter()
            .filter_map(|k| match k {
                ActionKind::Kill(p) => Some(p.clone()),
                _ => None,
            })
            .collect();
        kills.sort();
        if let Some(victim) = kills.first() {
            self.just_killed = true;
            return Ok(Action::of(ActionKind::Kill(victim.clone())));
        }

        // Fake tasks to build the alibi, half the time.
        if ctx.legal.contains(&ActionKind::DoTask) && self.rng.gen_bool(0.5) {
            if let LocationView::Room(room) = &obs.summary.location {
                self.did_task.push((obs.tick, room.clone()));
            }
            return Ok(Action::of(ActionKind::DoTask));
        }

        let here = match &obs.summary.location {
            LocationView::Room(r) => r.clone(),
            LocationView::Transit { .. } => return Ok(Action::of(ActionKind::Wait)),
        };

        // Stalk the most recently seen player.
        let seen = ctx.memory.seen_since(ctx.memory.segment_first_tick());
        if let Some((room, _)) = seen
            .values()
            .filter_map(|(t, r)| r.clone().map(|room| (room, *t)))
            .max_by_key(|(_, t)| *t)
        {
            if room != here {
                if let Ok((path, _)) = ctx.map.shortest_travel(&here, &room) {
                    if path.len() >= 2 && ctx.legal.contains(&ActionKind::Move(path[1].clone())) {
                        return Ok(Action::of(ActionKind::Move(path[1].clone())));
                    }
                }
            }
        }

        let mut moves: Vec<RoomId> = ctx
            .legal
            .iter()
            .filter_map(|k| match k {
                ActionKind::Move(r) => Some(r.clone()),
                _ => None,
            })
            .collect();
        moves.sort();
        match moves.choose(&mut self.rng) {
            Some(room) => Ok(Action::of(ActionKind::Move(room.clone()))),
            None => Ok(Action::of(ActionKind::Wait)),
        }
    }

    fn speak(&mut self, ctx: &PolicyCtx) -> Result<String, PolicyError> {
        let me = &ctx.observation.viewer;
        let seg = ctx.memory.segment_first_tick();
        let mut text = honest_statement(ctx.memory, me, 0);

        // One planted false location claim per meeting: a route through rooms
        // this duck never entered this segment, so the lie is flatly
        // falsifiable against the log.
        let visited = ctx.memory.rooms_since(seg);
        let unvisited: Vec<&RoomId> = ctx.map.rooms().filter(|r| !visited.contains(r)).collect();
        if unvisited.len() >= 2 {
            text.push_str(&format!(
                " I spent a while over in {} and {} too. @claim{{type=location;subject={me};route={},{};temporal=this round}}",
                unvisited[0], unvisited[1], unvisited[0], unvisited[1]
            ));
        } else if let Some(room) = unvisited.first() {
            text.push_str(&format!(
                " I was in {room} for a bit. @claim{{type=location;subject={me};room={room};temporal=this round}}"
            ));
        }

        // Deflect onto whoever spoke first that is not us.
        if let Some(meeting) = &ctx.observation.summary.meeting {
            if let Some(target) = meeting.speaking_order.iter().find(|p| *p != me) {
                text.push_str(&format!(
                    " Honestly this feels like {target} to me. @claim{{type=accusation;accuser={me};target={target};confidence=weak}}"
                ));
            }
        }
        Ok(text)
    }

    fn vote(&mut self, ctx: &PolicyCtx) -> Result<VoteChoice, PolicyError> {
        let me = &ctx.observation.viewer;
        let teammates = &ctx.observation.summary.teammates;
        if let Some(meeting) = &ctx.observation.summary.meeting {
            if let Some(target) =
                meeting.speaking_order.iter().find(|p| *p != me && !teammates.contains(p))
            {
                return Ok(VoteChoice::Player(target.clone()));
            }
        }
        Ok(VoteChoice::Skip)
    }
}

/// True claims about the speaker's own segment: its route and whom it saw.
fn honest_statement(memory: &AgentMemory, me: &PlayerId, max_sightings: usize) -> String {
    let seg = memory.segment_first_tick();
    let route = memory.route_since(seg);
    let mut text = String::new();
    match route.len() {
        0 => text.push_str("I do not remember moving at all."),
        1 => {
            let room = &route[0];
            text.push_str(&format!(
                "I stayed in {room}. @claim{{type=location;subject={me};room={room};temporal=this round}}"
            ));
        }
        _ => {
            let shown: Vec<&str> = route.iter().take(4).map(|r| r.as_str()).collect();
            text.push_str(&format!(
                "My route was {}. @claim{{type=location;subject={me};route={};temporal=this round}}",
                shown.join(" then "),
                shown.join(",")
            ));
        }
    }
    let seen = memory.seen_since(seg);
    for (player, (_, room)) in seen.iter().take(max_sightings) {
        if let Some(room) = room {
            text.push_str(&format!(
                " I saw {player} in {room}. @claim{{type=sighting;subject={me};target={player};room={room};temporal=this round}}"
            ));
        }
    }
    text
}

/// Goose meeting statement: honest route and sightings, plus a task alibi.
fn goose_statement(ctx: &PolicyCtx, did_task: &[(u64, RoomId)]) -> String {
    let me = &ctx.observation.viewer;
    let seg = ctx.memory.segment_first_tick();
    let mut text = honest_statement(ctx.memory, me, 2);
    if let Some((_, room)) = did_task.iter().rev().find(|(t, _)| *t >= seg) {
        text.push_str(&format!(
            " I was working on a task in {room}. @claim{{type=activity;subject={me};activity=task;room={room};temporal=this round}}"
        ));
    }
    text
}

/// Memory-grounded vote: suspect any speaker whose claimed location this
/// segment is a room we occupied without ever seeing them there.
fn vote_against_contradicted_claims(ctx: &PolicyCtx) -> VoteChoice {
    let me = &ctx.observation.viewer;
    let seg = ctx.memory.segment_first_tick();
    let my_rooms = ctx.memory.rooms_since(seg);
    let meeting = match &ctx.observation.summary.meeting {
        Some(m) => m,
        None => return VoteChoice::Skip,
    };

    for speaker in &meeting.speaking_order {
        if speaker == me {
            continue;
        }
        let mut claimed_rooms: Vec<RoomId> = Vec::new();
        for entry in meeting.transcript.iter().filter(|e| &e.speaker == speaker) {
            for ann in crate::claims::dsl::scan_annotations(&entry.text) {
                if ann.get("subject").map(|s| s.eq_ignore_ascii_case(speaker.as_str())) != Some(true) {
                    continue;
                }
                if ann.get("type").map(String::as_str) != Some("location") {
                    continue;
                }
                if let Some(room) = ann.get("room") {
                    claimed_rooms.push(RoomId::new(room));
                }
                if let Some(route) = ann.get("route") {
                    claimed_rooms.extend(route.split(',').map(RoomId::new));
                }
            }
        }
        for room in claimed_rooms {
            if my_rooms.contains(&room)
                && !ctx.memory.seen_in_room(&room, seg).contains(speaker)
            {
                return VoteChoice::Player(speaker.clone());
            }
        }
    }
    VoteChoice::Skip
}
