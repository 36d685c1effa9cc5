//! Ground-truth trajectory reconstruction and claim verification.
//!
//! Trajectories are rebuilt from the event log as a pure fold; every verdict
//! cites the event seqs or occupancy facts that entail it, so each judgment
//! can be audited against the log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::{
    resolve_temporal, segments, ActivityKind, Claim, ClaimKind, Segment, TemporalConfig,
    TemporalResolution,
};
use crate::engine::{self, GameState, MoveDirection, PlayerId, Role};
use crate::eventlog::{EventKind, GameLog, LogError};
use crate::map::RoomId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OccLocation {
    Room(RoomId),
    Corridor(RoomId, RoomId),
    Dead,
}

impl OccLocation {
    pub fn room(&self) -> Option<&RoomId> {
        match self {
            OccLocation::Room(r) => Some(r),
            _ => None,
        }
    }
}

/// A location-changing moment: entered a room, entered a corridor, died.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccFact {
    pub tick: u64,
    pub seq: u64,
    pub location: OccLocation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskEventRecord {
    pub tick: u64,
    pub seq: u64,
    pub room: RoomId,
    pub task_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaitRecord {
    pub tick: u64,
    pub seq: u64,
    pub room: RoomId,
}

/// A movement this agent witnessed (it was in `room` when `mover` moved).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessRecord {
    pub tick: u64,
    pub seq: u64,
    pub mover: PlayerId,
    pub direction: MoveDirection,
    pub room: RoomId,
    pub via: RoomId,
}

/// Tick-by-tick ground truth for one agent, total over the whole game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub player: PlayerId,
    pub role: Role,
    /// Ordered by (tick, seq).
    pub facts: Vec<OccFact>,
    pub task_events: Vec<TaskEventRecord>,
    pub waits: Vec<WaitRecord>,
    pub witnessed: Vec<WitnessRecord>,
    pub death: Option<(u64, u64)>,
}

impl Trajectory {
    /// Location at the end of `tick`, considering only facts with seq <=
    /// `seq_hi`. Death is absorbing.
    pub fn state_at(&self, tick: u64, seq_hi: u64) -> Option<&OccLocation> {
        self.facts
            .iter()
            .rev()
            .find(|f| (f.tick, f.seq) <= (tick, seq_hi))
            .map(|f| &f.location)
    }

    /// True when the agent touches `room` at `tick`, including rooms entered
    /// only briefly while passing through, restricted to the seq range.
    pub fn occupies_room_at(&self, room: &RoomId, tick: u64, lo_seq: u64, hi_seq: u64) -> bool {
        if self
            .facts
            .iter()
            .any(|f| f.tick == tick && f.seq >= lo_seq && f.seq <= hi_seq && f.location.room() == Some(room))
        {
            return true;
        }
        matches!(self.state_at(tick, hi_seq), Some(OccLocation::Room(r)) if r == room)
    }

    /// The corridor (if any) the agent occupies at the end of `tick`.
    pub fn corridor_at(&self, tick: u64, seq_hi: u64) -> Option<(&RoomId, &RoomId)> {
        match self.state_at(tick, seq_hi) {
            Some(OccLocation::Corridor(a, b)) => Some((a, b)),
            _ => None,
        }
    }

    /// The room occupied at the end of `tick`, if the agent is in one.
    pub fn room_at(&self, tick: u64, seq_hi: u64) -> Option<&RoomId> {
        self.state_at(tick, seq_hi).and_then(|l| l.room())
    }

    pub fn dead_by(&self, tick: u64) -> bool {
        self.death.map(|(t, _)| t <= tick).unwrap_or(false)
    }

    /// Facts inside a tick/seq window, in order.
    fn facts_in(&self, seg: &WindowBounds) -> impl Iterator<Item = &OccFact> + '_ {
        let seg = *seg;
        self.facts.iter().filter(move |f| {
            f.tick >= seg.start_tick && f.tick <= seg.end_tick && f.seq >= seg.lo_seq && f.seq <= seg.hi_seq
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct WindowBounds {
    start_tick: u64,
    end_tick: u64,
    lo_seq: u64,
    hi_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySet {
    pub players: BTreeMap<PlayerId, Trajectory>,
    pub final_tick: u64,
}

impl TrajectorySet {
    pub fn get(&self, player: &PlayerId) -> Option<&Trajectory> {
        self.players.get(player)
    }
}

/// Rebuilds every agent's trajectory from the log: a pure fold over events,
/// with transit ticks as corridor occupancy and pass-through rooms on their
/// arrival ticks.
pub fn reconstruct_trajectories(log: &GameLog) -> Result<TrajectorySet, LogError> {
    let map = log.map()?;
    let config = &log.header.config;
    let mut state = GameState::empty();
    let mut players: BTreeMap<PlayerId, Trajectory> = BTreeMap::new();

    for event in &log.events {
        let (tick, seq) = (event.tick, event.seq);
        // Pre-apply inspection: meeting transitions snap travellers home.
        let mut snapped: Vec<(PlayerId, RoomId)> = Vec::new();
        if matches!(event.kind, EventKind::PhaseChanged { phase: engine::Phase::Discussion }) {
            for agent in state.agents.iter().filter(|a| a.alive) {
                if let Some(engine::AgentLocation::Transit { from, .. }) = &agent.location {
                    snapped.push((agent.id.clone(), from.clone()));
                }
            }
        }

        engine::apply_event(&mut state, &map, config, event)
            .map_err(|e| engine::EngineError::BadEvent { seq, reason: e.to_string() })?;

        match &event.kind {
            EventKind::RoleAssigned { player, role } => {
                players.insert(
                    player.clone(),
                    Trajectory {
                        player: player.clone(),
                        role: *role,
                        facts: Vec::new(),
                        task_events: Vec::new(),
                        waits: Vec::new(),
                        witnessed: Vec::new(),
                        death: None,
                    },
                );
            }
            EventKind::Respawned { player, room } => {
                players.get_mut(player).expect("known player").facts.push(OccFact {
                    tick,
                    seq,
                    location: OccLocation::Room(room.clone()),
                });
            }
            EventKind::MoveStarted { actor, from, to, .. } => {
                players.get_mut(actor).expect("known player").facts.push(OccFact {
                    tick,
                    seq,
                    location: OccLocation::Corridor(from.clone(), to.clone()),
                });
                record_witnesses(&mut players, &state, tick, seq);
            }
            EventKind::Arrived { actor, room, .. } => {
                players.get_mut(actor).expect("known player").facts.push(OccFact {
                    tick,
                    seq,
                    location: OccLocation::Room(room.clone()),
                });
                record_witnesses(&mut players, &state, tick, seq);
            }
            EventKind::Waited { actor, room } => {
                players
                    .get_mut(actor)
                    .expect("known player")
                    .waits
                    .push(WaitRecord { tick, seq, room: room.clone() });
            }
            EventKind::TaskProgressed { actor, task_id, room, .. } => {
                players.get_mut(actor).expect("known player").task_events.push(TaskEventRecord {
                    tick,
                    seq,
                    room: room.clone(),
                    task_id: task_id.clone(),
                });
            }
            EventKind::Killed { victim, .. } => {
                let t = players.get_mut(victim).expect("known player");
                t.death = Some((tick, seq));
                t.facts.push(OccFact { tick, seq, location: OccLocation::Dead });
            }
            EventKind::Ejected { player } => {
                let t = players.get_mut(player).expect("known player");
                t.death = Some((tick, seq));
                t.facts.push(OccFact { tick, seq, location: OccLocation::Dead });
            }
            EventKind::PhaseChanged { phase: engine::Phase::Discussion } => {
                for (player, room) in snapped {
                    players.get_mut(&player).expect("known player").facts.push(OccFact {
                        tick,
                        seq,
                        location: OccLocation::Room(room),
                    });
                }
            }
            _ => {}
        }
    }

    Ok(TrajectorySet { players, final_tick: log.final_tick() })
}

// The freshly applied move pushed its witness set into the tick buffers;
// mirror it into each witness's trajectory.
fn record_witnesses(
    players: &mut BTreeMap<PlayerId, Trajectory>,
    state: &GameState,
    tick: u64,
    seq: u64,
) {
    let entry = state.buffers.witnessed_moves.last().expect("move pushed a buffer entry");
    for witness in &entry.witnesses {
        players.get_mut(witness).expect("known player").witnessed.push(WitnessRecord {
            tick,
            seq,
            mover: entry.mover.clone(),
            direction: entry.direction,
            room: entry.room.clone(),
            via: entry.via.clone(),
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictResult {
    True,
    False,
    WrongRoom,
    NearMiss,
    Unverifiable,
}

impl VerdictResult {
    pub fn is_verifiable(&self) -> bool {
        !matches!(self, VerdictResult::Unverifiable)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    Event { seq: u64 },
    Occupancy { player: PlayerId, tick: u64, room: Option<RoomId> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingRecord {
    pub accuser: PlayerId,
    pub target: PlayerId,
    pub co_location_ticks: Vec<u64>,
    pub witnessed_seqs: Vec<u64>,
    pub supporting_claims: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub claim_id: String,
    pub result: VerdictResult,
    pub evidence: Vec<Evidence>,
    /// Accusations only: did the accusation hit an actual Duck.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome_correct: Option<bool>,
    /// Accusations and defenses: could the speaker have observed evidence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grounded: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grounding: Option<GroundingRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierConfig {
    /// Duration claims true on some but less than this fraction of the
    /// window are near misses.
    pub near_miss_threshold: f64,
    /// Whether witnessed-movement records satisfy sighting claims.
    pub witnessed_sightings: bool,
    pub temporal: TemporalConfig,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            near_miss_threshold: 0.8,
            witnessed_sightings: true,
            temporal: TemporalConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("claim {0} references meeting {1} which the log does not contain")]
    UnknownMeeting(String, usize),
    #[error("unknown player `{0}` in claim")]
    UnknownPlayer(PlayerId),
    #[error(transparent)]
    Log(#[from] LogError),
}

/// Verifies every claim of a log. Non-accusation claims are verified first;
/// accusation/defense grounding may then cite verified-true claims from the
/// same meeting.
pub fn verify_log(
    log: &GameLog,
    claims: &[Claim],
    config: &VerifierConfig,
) -> Result<Vec<Verdict>, VerifyError> {
    let trajectories = reconstruct_trajectories(log)?;
    let segs = segments(log);

    let mut verdicts: BTreeMap<String, Verdict> = BTreeMap::new();
    // Pass 1: claims checked directly against trajectories.
    for claim in claims {
        if matches!(claim.kind, ClaimKind::Accusation { .. } | ClaimKind::Defense { .. }) {
            continue;
        }
        let segment = segment_for(&segs, claim)?;
        let verdict = verify_claim(claim, segment, &trajectories, config)?;
        verdicts.insert(claim.claim_id.clone(), verdict);
    }
    // Pass 2: accusations and defenses, on their two axes.
    for claim in claims {
        let (target, is_accusation) = match &claim.kind {
            ClaimKind::Accusation { target, .. } => (target, true),
            ClaimKind::Defense { defended, .. } => (defended, false),
            _ => continue,
        };
        let segment = segment_for(&segs, claim)?;
        let speaker_traj = trajectories
            .get(&claim.speaker)
            .ok_or_else(|| VerifyError::UnknownPlayer(claim.speaker.clone()))?;
        let target_traj =
            trajectories.get(target).ok_or_else(|| VerifyError::UnknownPlayer(target.clone()))?;
        let grounding = is_grounded(speaker_traj, target_traj, segment, claims, &verdicts);
        let outcome_correct = if is_accusation {
            Some(target_traj.role == Role::Duck)
        } else {
            None
        };
        verdicts.insert(
            claim.claim_id.clone(),
            Verdict {
                claim_id: claim.claim_id.clone(),
                result: VerdictResult::Unverifiable,
                evidence: Vec::new(),
                outcome_correct,
                grounded: Some(grounding.is_some()),
                grounding,
                window: Some((segment.start_tick, segment.end_tick)),
            },
        );
    }

    Ok(claims.iter().map(|c| verdicts.remove(&c.claim_id).expect("verdict per claim")).collect())
}

fn segment_for<'a>(segs: &'a [Segment], claim: &Claim) -> Result<&'a Segment, VerifyError> {
    segs.get(claim.meeting_index)
        .ok_or_else(|| VerifyError::UnknownMeeting(claim.claim_id.clone(), claim.meeting_index))
}

/// Verifies one non-accusation claim against the reconstructed trajectories.
pub fn verify_claim(
    claim: &Claim,
    segment: &Segment,
    trajectories: &TrajectorySet,
    config: &VerifierConfig,
) -> Result<Verdict, VerifyError> {
    let resolution = resolve_temporal(claim.temporal.as_deref(), segment, &config.temporal);
    let window = match resolution {
        TemporalResolution::Unresolvable => {
            return Ok(unverifiable(claim, None));
        }
        TemporalResolution::Window(w) => w,
    };
    let bounds = WindowBounds {
        start_tick: window.start_tick,
        end_tick: window.end_tick,
        lo_seq: segment.lo_seq,
        hi_seq: segment.hi_seq,
    };
    let subject = claim.kind.subject();
    let traj = trajectories
        .get(subject)
        .ok_or_else(|| VerifyError::UnknownPlayer(subject.clone()))?;

    // A subject dead before the window has no trajectory to check.
    if traj.dead_by(window.start_tick.saturating_sub(1)) {
        let mut v = unverifiable(claim, Some((window.start_tick, window.end_tick)));
        if let Some((_, seq)) = traj.death {
            v.evidence.push(Evidence::Event { seq });
        }
        return Ok(v);
    }

    let mut verdict = Verdict {
        claim_id: claim.claim_id.clone(),
        result: VerdictResult::False,
        evidence: Vec::new(),
        outcome_correct: None,
        grounded: None,
        grounding: None,
        window: Some((window.start_tick, window.end_tick)),
    };

    match &claim.kind {
        ClaimKind::Location { room, .. } => {
            let occupied_ticks: Vec<u64> = (bounds.start_tick..=bounds.end_tick)
                .filter(|t| traj.occupies_room_at(room, *t, bounds.lo_seq, bounds.hi_seq))
                .collect();
            if window.duration_claim && !occupied_ticks.is_empty() {
                let fraction = occupied_ticks.len() as f64
                    / (bounds.end_tick - bounds.start_tick + 1) as f64;
                verdict.result = if fraction >= config.near_miss_threshold {
                    VerdictResult::True
                } else {
                    VerdictResult::NearMiss
                };
                cite_occupancy(&mut verdict, traj, subject, &occupied_ticks, room);
            } else if !occupied_ticks.is_empty() {
                verdict.result = VerdictResult::True;
                cite_occupancy(&mut verdict, traj, subject, &occupied_ticks, room);
            } else if let Some(ev) = stationary_elsewhere(traj, room, &bounds) {
                verdict.result = VerdictResult::WrongRoom;
                verdict.evidence.push(ev);
            } else {
                verdict.result = VerdictResult::False;
                cite_window_facts(&mut verdict, traj, subject, &bounds);
            }
        }
        ClaimKind::Route { route, .. } => {
            // Ordered occupancy: the claimed rooms must appear as a
            // subsequence of the room facts in the window.
            let mut matched: Vec<&OccFact> = Vec::new();
            let mut next = 0usize;
            for fact in traj.facts_in(&bounds) {
                if next < route.len() && fact.location.room() == Some(&route[next]) {
                    matched.push(fact);
                    next += 1;
                }
            }
            // The window's first room may predate the window's first fact.
            if next < route.len() && matched.is_empty() {
                if let Some(r) = traj.room_at(bounds.start_tick, bounds.hi_seq) {
                    if r == &route[0] {
                        next = 1;
                        let mut rest: Vec<&OccFact> = Vec::new();
                        for fact in traj.facts_in(&bounds) {
                            if next < route.len() && fact.location.room() == Some(&route[next]) {
                                rest.push(fact);
                                next += 1;
                            }
                        }
                        matched = rest;
                    }
                }
            }
            if next == route.len() {
                verdict.result = VerdictResult::True;
                for fact in matched {
                    verdict.evidence.push(Evidence::Event { seq: fact.seq });
                }
            } else {
                verdict.result = VerdictResult::False;
                cite_window_facts(&mut verdict, traj, subject, &bounds);
            }
        }
        ClaimKind::Sighting { target, room, .. } => {
            let target_traj = trajectories
                .get(target)
                .ok_or_else(|| VerifyError::UnknownPlayer(target.clone()))?;
            if target_traj.dead_by(window.start_tick.saturating_sub(1)) {
                // Sighting someone who was already dead is flatly false.
                verdict.result = VerdictResult::False;
                if let Some((_, seq)) = target_traj.death {
                    verdict.evidence.push(Evidence::Event { seq });
                }
                return Ok(verdict);
            }
            let mut in_claimed_room: Vec<u64> = Vec::new();
            let mut elsewhere: Vec<(u64, RoomId)> = Vec::new();
            for t in bounds.start_tick..=bounds.end_tick {
                let a = traj.room_at(t, bounds.hi_seq);
                let b = target_traj.room_at(t, bounds.hi_seq);
                if let (Some(a), Some(b)) = (a, b) {
                    if a == b {
                        if a == room {
                            in_claimed_room.push(t);
                        } else {
                            elsewhere.push((t, a.clone()));
                        }
                    }
                }
            }
            let witness_hits: Vec<&WitnessRecord> = if config.witnessed_sightings {
                traj.witnessed
                    .iter()
                    .filter(|w| {
                        &w.mover == target
                            && w.tick >= bounds.start_tick
                            && w.tick <= bounds.end_tick
                            && w.seq >= bounds.lo_seq
                            && w.seq <= bounds.hi_seq
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let witnessed_in_claimed: Vec<&&WitnessRecord> =
                witness_hits.iter().filter(|w| &w.room == room).collect();
            if !in_claimed_room.is_empty() {
                verdict.result = VerdictResult::True;
                for t in in_claimed_room.iter().take(3) {
                    verdict.evidence.push(Evidence::Occupancy {
                        player: target.clone(),
                        tick: *t,
                        room: Some(room.clone()),
                    });
                }
            } else if !witnessed_in_claimed.is_empty() {
                verdict.result = VerdictResult::True;
                for w in witnessed_in_claimed.iter().take(3) {
                    verdict.evidence.push(Evidence::Event { seq: w.seq });
                }
            } else if !elsewhere.is_empty() || !witness_hits.is_empty() {
                verdict.result = VerdictResult::WrongRoom;
                for (t, r) in elsewhere.iter().take(3) {
                    verdict.evidence.push(Evidence::Occupancy {
                        player: target.clone(),
                        tick: *t,
                        room: Some(r.clone()),
                    });
                }
                for w in witness_hits.iter().take(3) {
                    verdict.evidence.push(Evidence::Event { seq: w.seq });
                }
            } else {
                verdict.result = VerdictResult::False;
                cite_window_facts(&mut verdict, traj, subject, &bounds);
            }
        }
        ClaimKind::Activity { activity, room, .. } => {
            let (here, elsewhere): (Vec<Evidence>, Vec<Evidence>) = match activity {
                ActivityKind::Task => split_events(
                    traj.task_events.iter().filter(|e| in_bounds(e.tick, e.seq, &bounds)),
                    |e| (&e.room, e.seq),
                    room,
                ),
                ActivityKind::Waiting => split_events(
                    traj.waits.iter().filter(|e| in_bounds(e.tick, e.seq, &bounds)),
                    |e| (&e.room, e.seq),
                    room,
                ),
                ActivityKind::Traveling => {
                    // Satisfied by corridor occupancy whose endpoints include
                    // the claimed room.
                    let mut here = Vec::new();
                    let mut elsewhere = Vec::new();
                    for fact in traj.facts_in(&bounds) {
                        if let OccLocation::Corridor(a, b) = &fact.location {
                            if a == room || b == room {
                                here.push(Evidence::Event { seq: fact.seq });
                            } else {
                                elsewhere.push(Evidence::Event { seq: fact.seq });
                            }
                        }
                    }
                    (here, elsewhere)
                }
            };
            if !here.is_empty() {
                verdict.result = VerdictResult::True;
                verdict.evidence.extend(here.into_iter().take(3));
            } else if !elsewhere.is_empty() {
                verdict.result = VerdictResult::WrongRoom;
                verdict.evidence.extend(elsewhere.into_iter().take(3));
            } else {
                verdict.result = VerdictResult::False;
                cite_window_facts(&mut verdict, traj, subject, &bounds);
            }
        }
        ClaimKind::Accusation { .. } | ClaimKind::Defense { .. } => {
            unreachable!("accusations are verified in the grounding pass")
        }
    }
    Ok(verdict)
}

fn in_bounds(tick: u64, seq: u64, b: &WindowBounds) -> bool {
    tick >= b.start_tick && tick <= b.end_tick && seq >= b.lo_seq && seq <= b.hi_seq
}

fn split_events<'e, T: 'e>(
    events: impl Iterator<Item = &'e T>,
    project: impl Fn(&T) -> (&RoomId, u64),
    room: &RoomId,
) -> (Vec<Evidence>, Vec<Evidence>) {
    let mut here = Vec::new();
    let mut elsewhere = Vec::new();
    for event in events {
        let (r, seq) = project(event);
        if r == room {
            here.push(Evidence::Event { seq });
        } else {
            elsewhere.push(Evidence::Event { seq });
        }
    }
    (here, elsewhere)
}

fn unverifiable(claim: &Claim, window: Option<(u64, u64)>) -> Verdict {
    Verdict {
        claim_id: claim.claim_id.clone(),
        result: VerdictResult::Unverifiable,
        evidence: Vec::new(),
        outcome_correct: None,
        grounded: None,
        grounding: None,
        window,
    }
}

fn cite_occupancy(
    verdict: &mut Verdict,
    traj: &Trajectory,
    subject: &PlayerId,
    ticks: &[u64],
    room: &RoomId,
) {
    for t in ticks.iter().take(3) {
        verdict.evidence.push(Evidence::Occupancy {
            player: subject.clone(),
            tick: *t,
            room: Some(room.clone()),
        });
    }
    if let Some(fact) = traj
        .facts
        .iter()
        .find(|f| ticks.contains(&f.tick) && f.location.room() == Some(room))
    {
        verdict.evidence.push(Evidence::Event { seq: fact.seq });
    }
}

/// Evidence that a false claim is false: where the subject actually was over
/// the window.
fn cite_window_facts(verdict: &mut Verdict, traj: &Trajectory, subject: &PlayerId, b: &WindowBounds) {
    if let Some(fact) = traj
        .facts
        .iter()
        .rev()
        .find(|f| (f.tick, f.seq) <= (b.start_tick, b.hi_seq))
    {
        verdict.evidence.push(Evidence::Event { seq: fact.seq });
    }
    for fact in traj.facts_in(b).take(3) {
        verdict.evidence.push(Evidence::Event { seq: fact.seq });
    }
    if verdict.evidence.is_empty() {
        verdict.evidence.push(Evidence::Occupancy {
            player: subject.clone(),
            tick: b.start_tick,
            room: traj.room_at(b.start_tick, b.hi_seq).cloned(),
        });
    }
}

/// Wrong-room support for location claims: the subject never entered the
/// claimed room but was idle or tasking in some other room in the window.
fn stationary_elsewhere(
    traj: &Trajectory,
    claimed: &RoomId,
    b: &WindowBounds,
) -> Option<Evidence> {
    let task = traj
        .task_events
        .iter()
        .find(|e| in_bounds(e.tick, e.seq, b) && &e.room != claimed);
    if let Some(e) = task {
        return Some(Evidence::Event { seq: e.seq });
    }
    let wait = traj.waits.iter().find(|e| in_bounds(e.tick, e.seq, b) && &e.room != claimed);
    wait.map(|e| Evidence::Event { seq: e.seq })
}

/// Grounding check for accusations and defenses: co-location in the segment,
/// a witnessed movement of the target, or a verified-true claim about the
/// target in the same meeting.
pub fn is_grounded(
    accuser: &Trajectory,
    target: &Trajectory,
    segment: &Segment,
    claims: &[Claim],
    verdicts: &BTreeMap<String, Verdict>,
) -> Option<GroundingRecord> {
    let mut co_location_ticks = Vec::new();
    for t in segment.start_tick..=segment.end_tick {
        let a = accuser.room_at(t, segment.hi_seq);
        let b = target.room_at(t, segment.hi_seq);
        if a.is_some() && a == b {
            co_location_ticks.push(t);
        }
    }
    let witnessed_seqs: Vec<u64> = accuser
        .witnessed
        .iter()
        .filter(|w| {
            w.mover == target.player
                && w.tick >= segment.start_tick
                && w.tick <= segment.end_tick
                && w.seq >= segment.lo_seq
                && w.seq <= segment.hi_seq
        })
        .map(|w| w.seq)
        .collect();
    let supporting_claims: Vec<String> = claims
        .iter()
        .filter(|c| {
            c.speaker == accuser.player
                && c.meeting_index == segment.meeting_index
                && claim_is_about(&c.kind, &target.player)
                && verdicts
                    .get(&c.claim_id)
                    .map(|v| v.result == VerdictResult::True)
                    .unwrap_or(false)
        })
        .map(|c| c.claim_id.clone())
        .collect();

    if co_location_ticks.is_empty() && witnessed_seqs.is_empty() && supporting_claims.is_empty() {
        return None;
    }
    Some(GroundingRecord {
        accuser: accuser.player.clone(),
        target: target.player.clone(),
        co_location_ticks,
        witnessed_seqs,
        supporting_claims,
    })
}

fn claim_is_about(kind: &ClaimKind, target: &PlayerId) -> bool {
    match kind {
        ClaimKind::Location { subject, .. } | ClaimKind::Route { subject, .. } => subject == target,
        ClaimKind::Sighting { subject, target: seen, .. } => subject == target || seen == target,
        ClaimKind::Activity { subject, .. } => subject == target,
        ClaimKind::Accusation { .. } | ClaimKind::Defense { .. } => false,
    }
}

/// Serializes verdicts as the line-delimited sidecar format.
pub fn serialize_verdicts(verdicts: &[Verdict]) -> String {
    let mut out = String::new();
    for v in verdicts {
        out.push_str(&serde_json::to_string(v).expect("verdict serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_verdicts(text: &str) -> Result<Vec<Verdict>, serde_json::Error> {
    text.lines().filter(|l| !l.is_empty()).map(serde_json::from_str).collect()
}

/// Serializes claims as the line-delimited sidecar format.
pub fn serialize_claims(claims: &[Claim]) -> String {
    let mut out = String::new();
    for c in claims {
        out.push_str(&serde_json::to_string(c).expect("claim serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_claims(text: &str) -> Result<Vec<Claim>, serde_json::Error> {
    text.lines().filter(|l| !l.is_empty()).map(serde_json::from_str).collect()
}
