//! Per-agent partial observations: global map render, local view render, and
//! the structured textual summary.
//!
//! Everything here is a pure function of (state, viewer); the same state
//! renders to byte-identical documents.

use serde::Serialize;

use crate::engine::{
    AgentLocation, EngineError, GameState, MeetingTrigger, MoveDirection, Phase, PlayerId, Role,
    TranscriptEntry,
};
use crate::map::{Map, RoomId};

mod layout;
mod render;

pub use layout::MapLayout;
pub use render::render_views;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub tick: u64,
    pub viewer: PlayerId,
    pub global_view: RenderedView,
    pub local_view: RenderedView,
    pub summary: StructuredSummary,
}

/// A rendered vector-image document (SVG), dimensions in abstract units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderedView {
    pub width: u32,
    pub height: u32,
    pub svg: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LocationView {
    Room(RoomId),
    Transit { from: RoomId, to: RoomId, remaining: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessedView {
    pub mover: PlayerId,
    pub direction: MoveDirection,
    /// The viewer's room at the time of the move.
    pub room: RoomId,
    /// Other end of the corridor the mover used.
    pub via: RoomId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskView {
    pub id: String,
    pub room: RoomId,
    pub progress: u32,
    pub required: u32,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeetingView {
    pub trigger: MeetingTrigger,
    pub meeting_tick: u64,
    pub speaking_order: Vec<PlayerId>,
    pub transcript: Vec<TranscriptEntry>,
    pub known_dead: Vec<PlayerId>,
    /// Present once votes are resolved (ejection phase).
    pub outcome: Option<MeetingOutcomeView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeetingOutcomeView {
    pub ejected: Option<PlayerId>,
}

/// Symbolic encoding of the viewer's perceptual state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuredSummary {
    pub tick: u64,
    pub phase: Phase,
    pub viewer: PlayerId,
    pub role: Role,
    /// Fellow Ducks; empty for Geese.
    pub teammates: Vec<PlayerId>,
    pub location: LocationView,
    /// Adjacent rooms with per-corridor travel costs; empty while in transit.
    pub adjacent: Vec<(RoomId, u32)>,
    /// Living players sharing the viewer's room (excludes the viewer).
    pub co_located: Vec<PlayerId>,
    pub bodies_here: Vec<PlayerId>,
    pub witnessed: Vec<WitnessedView>,
    pub tasks: Vec<TaskView>,
    pub chat_heard: Vec<(PlayerId, String)>,
    pub kill_cooldown: Option<u32>,
    pub meeting: Option<MeetingView>,
}

/// Builds the viewer's observation for the current state.
pub fn build_observation(
    map: &Map,
    state: &GameState,
    viewer: &PlayerId,
) -> Result<Observation, EngineError> {
    let agent = state.agent(viewer).ok_or_else(|| EngineError::UnknownPlayer(viewer.clone()))?;
    if !agent.alive {
        return Err(EngineError::DeadPlayer(viewer.clone()));
    }

    let location = match agent.location.as_ref().expect("placed agent") {
        AgentLocation::Room(r) => LocationView::Room(r.clone()),
        AgentLocation::Transit { from, to, remaining } => LocationView::Transit {
            from: from.clone(),
            to: to.clone(),
            remaining: *remaining,
        },
    };

    let current_room = agent.current_room().cloned();
    let adjacent = match &current_room {
        Some(room) => map.adjacent(room)?.to_vec(),
        None => Vec::new(),
    };

    let co_located = match &current_room {
        Some(room) => {
            state.occupants(room).into_iter().filter(|p| p != viewer).collect()
        }
        None => Vec::new(),
    };

    let bodies_here = match &current_room {
        Some(room) => state
            .bodies
            .values()
            .filter(|b| &b.room == room)
            .map(|b| b.victim.clone())
            .collect(),
        None => Vec::new(),
    };

    let witnessed = state
        .buffers
        .witnessed_moves
        .iter()
        .filter(|w| w.witnesses.contains(viewer))
        .map(|w| WitnessedView {
            mover: w.mover.clone(),
            direction: w.direction,
            room: w.room.clone(),
            via: w.via.clone(),
        })
        .collect();

    let chat_heard = state
        .buffers
        .proximity_chat
        .iter()
        .filter(|c| c.listeners.contains(viewer))
        .map(|c| (c.speaker.clone(), c.text.clone()))
        .collect();

    let tasks = agent
        .tasks
        .iter()
        .map(|t| TaskView {
            id: t.id.clone(),
            room: t.room.clone(),
            progress: t.progress,
            required: t.required,
            completed: t.completed,
        })
        .collect();

    let teammates = if agent.role == Role::Duck {
        state
            .agents
            .iter()
            .filter(|a| a.role == Role::Duck && &a.id != viewer)
            .map(|a| a.id.clone())
            .collect()
    } else {
        Vec::new()
    };

    let meeting = match (state.phase, &state.meeting) {
        (Phase::Discussion | Phase::Voting | Phase::Ejection, Some(m)) => Some(MeetingView {
            trigger: m.trigger.clone(),
            meeting_tick: m.meeting_tick,
            speaking_order: m.speaking_order.clone(),
            transcript: m.transcript.clone(),
            known_dead: state
                .agents
                .iter()
                .filter(|a| !a.alive)
                .map(|a| a.id.clone())
                .collect(),
            outcome: if state.phase == Phase::Ejection {
                Some(MeetingOutcomeView { ejected: m.ejected.clone() })
            } else {
                None
            },
        }),
        _ => None,
    };

    let summary = StructuredSummary {
        tick: state.tick,
        phase: state.phase,
        viewer: viewer.clone(),
        role: agent.role,
        teammates,
        location,
        adjacent,
        co_located,
        bodies_here,
        witnessed,
        tasks,
        chat_heard,
        kill_cooldown: if agent.role == Role::Duck { Some(agent.kill_cooldown_remaining) } else { None },
        meeting,
    };

    let (global_view, local_view) = render_views(map, state, viewer)?;

    Ok(Observation {
        tick: state.tick,
        viewer: viewer.clone(),
        global_view,
        local_view,
        summary,
    })
}

impl StructuredSummary {
    /// Deterministic plain-text rendering, used verbatim in agent prompts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let push = |out: &mut String, line: String| {
            out.push_str(&line);
            out.push('\n');
        };
        push(&mut out, format!("tick: {}", self.tick));
        push(&mut out, format!("phase: {:?}", self.phase));
        push(&mut out, format!("you: {} ({:?})", self.viewer, self.role));
        if !self.teammates.is_empty() {
            let names: Vec<&str> = self.teammates.iter().map(|p| p.as_str()).collect();
            push(&mut out, format!("your fellow Ducks: {}", names.join(", ")));
        }
        match &self.location {
            LocationView::Room(r) => push(&mut out, format!("location: {r}")),
            LocationView::Transit { from, to, remaining } => push(
                &mut out,
                format!("location: in transit {from} -> {to}, {remaining} tick(s) remaining"),
            ),
        }
        if !self.adjacent.is_empty() {
            let parts: Vec<String> =
                self.adjacent.iter().map(|(r, w)| format!("{r} ({w} ticks)")).collect();
            push(&mut out, format!("adjacent rooms: {}", parts.join(", ")));
        }
        if self.co_located.is_empty() {
            push(&mut out, "players here: none".to_string());
        } else {
            let names: Vec<&str> = self.co_located.iter().map(|p| p.as_str()).collect();
            push(&mut out, format!("players here: {}", names.join(", ")));
        }
        if !self.bodies_here.is_empty() {
            let names: Vec<&str> = self.bodies_here.iter().map(|p| p.as_str()).collect();
            push(&mut out, format!("bodies here: {}", names.join(", ")));
        }
        for w in &self.witnessed {
            let verb = match w.direction {
                MoveDirection::Departed => "departed",
                MoveDirection::Arrived => "arrived in",
            };
            let link = match w.direction {
                MoveDirection::Departed => format!("toward {}", w.via),
                MoveDirection::Arrived => format!("from {}", w.via),
            };
            push(&mut out, format!("witnessed: {} {verb} {} {link}", w.mover, w.room));
        }
        for (speaker, text) in &self.chat_heard {
            push(&mut out, format!("heard ({speaker}): {text}"));
        }
        if self.tasks.is_empty() {
            push(&mut out, "tasks: none".to_string());
        } else {
            for t in &self.tasks {
                let status = if t.completed {
                    "done".to_string()
                } else {
                    format!("{}/{}", t.progress, t.required)
                };
                push(&mut out, format!("task {} @ {}: {status}", t.id, t.room));
            }
        }
        if let Some(cd) = self.kill_cooldown {
            push(&mut out, format!("kill cooldown: {cd}"));
        }
        if let Some(m) = &self.meeting {
            let reason = match &m.trigger {
                MeetingTrigger::BodyReport { reporter, victim } => {
                    format!("{reporter} reported the body of {victim}")
                }
                MeetingTrigger::Emergency { caller } => {
                    format!("{caller} called an emergency meeting")
                }
            };
            push(&mut out, format!("meeting (tick {}): {reason}", m.meeting_tick));
            let order: Vec<&str> = m.speaking_order.iter().map(|p| p.as_str()).collect();
            push(&mut out, format!("speaking order: {}", order.join(", ")));
            if m.known_dead.is_empty() {
                push(&mut out, "known dead: none".to_string());
            } else {
                let dead: Vec<&str> = m.known_dead.iter().map(|p| p.as_str()).collect();
                push(&mut out, format!("known dead: {}", dead.join(", ")));
            }
            for entry in &m.transcript {
                push(&mut out, format!("[round {}] {}: {}", entry.round, entry.speaker, entry.text));
            }
            if let Some(outcome) = &m.outcome {
                match &outcome.ejected {
                    Some(p) => push(&mut out, format!("outcome: {p} was ejected")),
                    None => push(&mut out, "outcome: no one was ejected".to_string()),
                }
            }
        }
        out
    }
}
