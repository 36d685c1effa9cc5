//! The decision interface: per-agent memory, response parsing, scripted
//! baseline policies, and the remote chat-model adapter.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::engine::{
    Action, ActionKind, MeetingTrigger, PlayerId, TranscriptEntry, VoteChoice,
};
use crate::map::{Map, RoomId};
use crate::observation::{LocationView, MeetingOutcomeView, Observation, WitnessedView};

mod model;
mod scripted;

pub use model::{
    compose_system_prompt, ChatRequest, ChatTransport, EndpointConfig, HttpChatTransport,
    ModelPolicy,
};
pub use scripted::{scripted_policy, ScriptedKind};

/// What one agent remembers of one tick: where it was, what movement it
/// witnessed, and whom it encountered.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TickRecall {
    pub locations: Vec<LocationView>,
    pub witnessed: Vec<WitnessedView>,
    pub encountered: BTreeSet<PlayerId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeetingRecall {
    pub meeting_tick: u64,
    pub trigger: MeetingTrigger,
    pub transcript: Vec<TranscriptEntry>,
    pub known_dead: Vec<PlayerId>,
    pub outcome: Option<MeetingOutcomeView>,
}

/// Append-only recollection of an agent's own trajectory. Every fact comes
/// from one of the agent's past observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentMemory {
    pub player: PlayerId,
    pub ticks: BTreeMap<u64, TickRecall>,
    pub meetings: Vec<MeetingRecall>,
}

impl AgentMemory {
    pub fn new(player: PlayerId) -> AgentMemory {
        AgentMemory { player, ticks: BTreeMap::new(), meetings: Vec::new() }
    }

    /// Folds one observation into memory. Called at every decision point and
    /// at the end of every tick, so repeated updates for the same tick merge.
    pub fn update(&mut self, obs: &Observation) {
        debug_assert_eq!(obs.viewer, self.player, "observation belongs to this agent");
        let entry = self.ticks.entry(obs.tick).or_default();
        if entry.locations.last() != Some(&obs.summary.location) {
            entry.locations.push(obs.summary.location.clone());
        }
        for w in &obs.summary.witnessed {
            if !entry.witnessed.contains(w) {
                entry.witnessed.push(w.clone());
                entry.encountered.insert(w.mover.clone());
            }
        }
        for p in &obs.summary.co_located {
            entry.encountered.insert(p.clone());
        }

        if let Some(meeting) = &obs.summary.meeting {
            let recall = match self.meetings.iter_mut().find(|m| m.meeting_tick == meeting.meeting_tick)
            {
                Some(existing) => existing,
                None => {
                    self.meetings.push(MeetingRecall {
                        meeting_tick: meeting.meeting_tick,
                        trigger: meeting.trigger.clone(),
                        transcript: Vec::new(),
                        known_dead: Vec::new(),
                        outcome: None,
                    });
                    self.meetings.last_mut().unwrap()
                }
            };
            if meeting.transcript.len() > recall.transcript.len() {
                recall.transcript = meeting.transcript.clone();
            }
            recall.known_dead = meeting.known_dead.clone();
            if meeting.outcome.is_some() {
                recall.outcome = meeting.outcome.clone();
            }
        }
    }

    /// First tick of the current free-roam segment (after the last meeting).
    pub fn segment_first_tick(&self) -> u64 {
        self.meetings.last().map(|m| m.meeting_tick + 1).unwrap_or(0)
    }

    /// Rooms this agent occupied at or after `from_tick`.
    pub fn rooms_since(&self, from_tick: u64) -> BTreeSet<RoomId> {
        self.ticks
            .range(from_tick..)
            .flat_map(|(_, recall)| recall.locations.iter())
            .filter_map(|loc| match loc {
                LocationView::Room(r) => Some(r.clone()),
                LocationView::Transit { .. } => None,
            })
            .collect()
    }

    /// Room sequence (consecutive duplicates collapsed) at or after `from_tick`.
    pub fn route_since(&self, from_tick: u64) -> Vec<RoomId> {
        let mut route: Vec<RoomId> = Vec::new();
        for (_, recall) in self.ticks.range(from_tick..) {
            for loc in &recall.locations {
                if let LocationView::Room(r) = loc {
                    if route.last() != Some(r) {
                        route.push(r.clone());
                    }
                }
            }
        }
        route
    }

    /// Players seen (co-located or witnessed) at or after `from_tick`, with
    /// the latest tick and the viewer's room at that tick.
    pub fn seen_since(&self, from_tick: u64) -> BTreeMap<PlayerId, (u64, Option<RoomId>)> {
        let mut seen = BTreeMap::new();
        for (tick, recall) in self.ticks.range(from_tick..) {
            let here = recall.locations.iter().find_map(|l| match l {
                LocationView::Room(r) => Some(r.clone()),
                LocationView::Transit { .. } => None,
            });
            for p in &recall.encountered {
                seen.insert(p.clone(), (*tick, here.clone()));
            }
        }
        seen
    }

    /// Players this agent saw in `room` at or after `from_tick`.
    pub fn seen_in_room(&self, room: &RoomId, from_tick: u64) -> BTreeSet<PlayerId> {
        let mut seen = BTreeSet::new();
        for (_, recall) in self.ticks.range(from_tick..) {
            let was_here = recall
                .locations
                .iter()
                .any(|l| matches!(l, LocationView::Room(r) if r == room));
            if was_here {
                seen.extend(recall.encountered.iter().cloned());
            }
            for w in &recall.witnessed {
                if &w.room == room {
                    seen.insert(w.mover.clone());
                }
            }
        }
        seen
    }

    /// Chronological plain-text digest, fed to model agents.
    pub fn digest(&self, tick_window: Option<u64>) -> String {
        let mut out = String::new();
        let first = match tick_window {
            Some(window) => self.ticks.keys().last().copied().unwrap_or(0).saturating_sub(window),
            None => 0,
        };
        for (tick, recall) in self.ticks.range(first..) {
            for loc in &recall.locations {
                match loc {
                    LocationView::Room(r) => {
                        out.push_str(&format!("tick {tick}: in {r}"));
                    }
                    LocationView::Transit { from, to, .. } => {
                        out.push_str(&format!("tick {tick}: in transit {from} -> {to}"));
                    }
                }
                out.push('\n');
            }
            for w in &recall.witnessed {
                let verb = match w.direction {
                    crate::engine::MoveDirection::Departed => "depart toward",
                    crate::engine::MoveDirection::Arrived => "arrive from",
                };
                out.push_str(&format!("tick {tick}: saw {} {verb} {} (in {})\n", w.mover, w.via, w.room));
            }
            if !recall.encountered.is_empty() {
                let names: Vec<&str> = recall.encountered.iter().map(|p| p.as_str()).collect();
                out.push_str(&format!("tick {tick}: with {}\n", names.join(", ")));
            }
        }
        for m in &self.meetings {
            let reason = match &m.trigger {
                MeetingTrigger::BodyReport { reporter, victim } => {
                    format!("{reporter} reported {victim}'s body")
                }
                MeetingTrigger::Emergency { caller } => format!("{caller} called a meeting"),
            };
            out.push_str(&format!("meeting at tick {}: {reason}\n", m.meeting_tick));
            match &m.outcome {
                Some(MeetingOutcomeView { ejected: Some(p) }) => {
                    out.push_str(&format!("  outcome: {p} ejected\n"));
                }
                Some(MeetingOutcomeView { ejected: None }) => {
                    out.push_str("  outcome: no ejection\n");
                }
                None => {}
            }
        }
        out
    }
}

/// Spec surface: returns the extended memory.
pub fn update_memory(mut memory: AgentMemory, observation: &Observation) -> AgentMemory {
    memory.update(observation);
    memory
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("unparseable reply: {0}")]
    Parse(String),
}

/// Everything a policy may condition on at one decision point.
pub struct PolicyCtx<'a> {
    pub map: &'a Map,
    pub observation: &'a Observation,
    pub memory: &'a AgentMemory,
    pub legal: &'a [ActionKind],
}

/// A decision callback set: free-roam action, discussion utterance, vote.
pub trait Policy: Send {
    fn act(&mut self, ctx: &PolicyCtx) -> Result<Action, PolicyError>;
    fn speak(&mut self, ctx: &PolicyCtx) -> Result<String, PolicyError>;
    fn vote(&mut self, ctx: &PolicyCtx) -> Result<VoteChoice, PolicyError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplyMode {
    Action,
    Utterance,
    Vote,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedReply {
    Action(Action),
    Utterance(String),
    Vote(VoteChoice),
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("reply contains multiple actions: {0}")]
    MultipleActions(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown or illegal target `{0}`")]
    IllegalTarget(String),
    #[error("vote must be a living player name or `skip`, got `{0}`")]
    UnknownVote(String),
    #[error("malformed reply: {0}")]
    Malformed(String),
}

const ACTION_VERBS: [&str; 6] = ["wait", "move", "do_task", "report", "call_meeting", "kill"];

/// Parses a model reply according to the response format contract.
pub fn parse_response(
    mode: ReplyMode,
    text: &str,
    roster: &[PlayerId],
    map: &Map,
) -> Result<ParsedReply, ParseError> {
    match mode {
        ReplyMode::Utterance => Ok(ParsedReply::Utterance(text.trim().to_string())),
        ReplyMode::Vote => parse_vote(text, roster).map(ParsedReply::Vote),
        ReplyMode::Action => parse_action(text, roster, map).map(ParsedReply::Action),
    }
}

fn parse_vote(text: &str, roster: &[PlayerId]) -> Result<VoteChoice, ParseError> {
    let cleaned = text.trim().trim_matches(|c: char| c == '"' || c == '\'' || c == '.').trim();
    if cleaned.eq_ignore_ascii_case("skip") {
        return Ok(VoteChoice::Skip);
    }
    roster
        .iter()
        .find(|p| p.as_str().eq_ignore_ascii_case(cleaned))
        .map(|p| VoteChoice::Player(p.clone()))
        .ok_or_else(|| ParseError::UnknownVote(cleaned.to_string()))
}

fn parse_action(text: &str, roster: &[PlayerId], map: &Map) -> Result<Action, ParseError> {
    let trimmed = text.trim();
    let (action_part, say) = match trimmed.find("| say(") {
        Some(idx) => {
            let after = &trimmed[idx + "| say(".len()..];
            let close = after.rfind(')').ok_or_else(|| {
                ParseError::Malformed("say(...) is missing its closing parenthesis".to_string())
            })?;
            (trimmed[..idx].trim(), Some(after[..close].to_string()))
        }
        None => {
            if trimmed.contains('|') {
                return Err(ParseError::Malformed("unexpected `|` separator".to_string()));
            }
            (trimmed, None)
        }
    };

    let (verb_raw, arg) = split_call(action_part)?;
    let verb = verb_raw.to_ascii_lowercase();
    let kind = match verb.as_str() {
        "wait" => ActionKind::Wait,
        "do_task" => ActionKind::DoTask,
        "report" => ActionKind::Report,
        "call_meeting" => ActionKind::CallMeeting,
        "move" => {
            let raw = arg.ok_or_else(|| ParseError::Malformed("move requires a room".to_string()))?;
            let room =
                map.resolve_room(&raw).ok_or_else(|| ParseError::IllegalTarget(raw.clone()))?;
            ActionKind::Move(room)
        }
        "kill" => {
            let raw = arg.ok_or_else(|| ParseError::Malformed("kill requires a target".to_string()))?;
            let target = roster
                .iter()
                .find(|p| p.as_str().eq_ignore_ascii_case(raw.trim()))
                .ok_or_else(|| ParseError::IllegalTarget(raw.clone()))?;
            ActionKind::Kill(target.clone())
        }
        other => return Err(ParseError::UnknownAction(other.to_string())),
    };
    Ok(Action { kind, say })
}

/// Splits `verb`, `verb()` or `verb(arg)`; rejects trailing content, calling
/// out a second action verb specifically.
fn split_call(part: &str) -> Result<(String, Option<String>), ParseError> {
    let part = part.trim();
    if part.is_empty() {
        return Err(ParseError::Malformed("empty action".to_string()));
    }
    let (head, rest) = match part.find('(') {
        Some(open) => {
            let close = part[open..]
                .find(')')
                .map(|i| open + i)
                .ok_or_else(|| ParseError::Malformed("missing closing parenthesis".to_string()))?;
            let arg = part[open + 1..close].trim();
            let rest = part[close + 1..].trim();
            let arg = if arg.is_empty() { None } else { Some(arg.to_string()) };
            ((part[..open].trim().to_string(), arg), rest)
        }
        None => match part.split_once(char::is_whitespace) {
            Some((head, rest)) => ((head.to_string(), None), rest.trim()),
            None => ((part.to_string(), None), ""),
        },
    };
    if !rest.is_empty() {
        let lowered = rest.to_ascii_lowercase();
        if ACTION_VERBS.iter().any(|v| lowered.starts_with(v)) {
            return Err(ParseError::MultipleActions(part.to_string()));
        }
        return Err(ParseError::Malformed(format!("trailing content `{rest}`")));
    }
    Ok(head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::Map;

    fn roster() -> Vec<PlayerId> {
        ["Alice", "Bob", "Eve"].iter().map(|n| PlayerId::new(n)).collect()
    }

    #[test]
    fn parses_plain_actions() {
        let map = Map::default_map();
        let r = roster();
        assert_eq!(
            parse_response(ReplyMode::Action, "wait", &r, &map).unwrap(),
            ParsedReply::Action(Action::of(ActionKind::Wait))
        );
        assert_eq!(
            parse_response(ReplyMode::Action, "do_task()", &r, &map).unwrap(),
            ParsedReply::Action(Action::of(ActionKind::DoTask))
        );
        assert_eq!(
            parse_response(ReplyMode::Action, "move(medbay)", &r, &map).unwrap(),
            ParsedReply::Action(Action::of(ActionKind::Move(RoomId::new("medbay"))))
        );
        // Aliased room names normalize.
        assert_eq!(
            parse_response(ReplyMode::Action, "move(Med Bay)", &r, &map).unwrap(),
            ParsedReply::Action(Action::of(ActionKind::Move(RoomId::new("medbay"))))
        );
    }

    #[test]
    fn parses_say_attachment() {
        let map = Map::default_map();
        let parsed =
            parse_response(ReplyMode::Action, "move(medbay) | say(heading to scan)", &roster(), &map)
                .unwrap();
        assert_eq!(
            parsed,
            ParsedReply::Action(Action::with_say(
                ActionKind::Move(RoomId::new("medbay")),
                "heading to scan"
            ))
        );
    }

    #[test]
    fn rejects_bad_actions() {
        let map = Map::default_map();
        let r = roster();
        assert!(matches!(
            parse_response(ReplyMode::Action, "dance()", &r, &map),
            Err(ParseError::UnknownAction(_))
        ));
        assert!(matches!(
            parse_response(ReplyMode::Action, "move(bridge)", &r, &map),
            Err(ParseError::IllegalTarget(_))
        ));
        assert!(matches!(
            parse_response(ReplyMode::Action, "kill(Zoe)", &r, &map),
            Err(ParseError::IllegalTarget(_))
        ));
        assert!(matches!(
            parse_response(ReplyMode::Action, "wait move(medbay)", &r, &map),
            Err(ParseError::MultipleActions(_))
        ));
    }

    #[test]
    fn parses_votes() {
        let r = roster();
        let map = Map::default_map();
        assert_eq!(
            parse_response(ReplyMode::Vote, " skip ", &r, &map).unwrap(),
            ParsedReply::Vote(VoteChoice::Skip)
        );
        assert_eq!(
            parse_response(ReplyMode::Vote, "bob", &r, &map).unwrap(),
            ParsedReply::Vote(VoteChoice::Player(PlayerId::new("Bob")))
        );
        assert!(matches!(
            parse_response(ReplyMode::Vote, "I think Bob", &r, &map),
            Err(ParseError::UnknownVote(_))
        ));
    }
}
