//! Temporal-reference resolution: maps a claim's free-text time reference to
//! a window of ticks inside the free-roam segment preceding its meeting.

use serde::{Deserialize, Serialize};

use crate::eventlog::{EventKind, GameLog};

/// Constants of the rule table, exposed in config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalConfig {
    /// Ticks covered by "at the start".
    pub start_window: u64,
    /// Ticks covered by "just now" / "right before the report".
    pub recent_window: u64,
    /// Tolerance around explicit tick references.
    pub tick_tolerance: u64,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        TemporalConfig { start_window: 3, recent_window: 3, tick_tolerance: 1 }
    }
}

/// Inclusive tick window, with the rule that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickWindow {
    pub start_tick: u64,
    pub end_tick: u64,
    /// Set for "the whole time"-class references; feeds the near-miss rule.
    pub duration_claim: bool,
    pub resolution_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TemporalResolution {
    Window(TickWindow),
    Unresolvable,
}

/// One free-roam segment, delimited by game start / the previous meeting's
/// respawn and this meeting's trigger. Sequence bounds pin the segment in
/// event order so boundary-tick facts never leak across meetings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub meeting_index: usize,
    pub start_tick: u64,
    /// The meeting trigger tick.
    pub end_tick: u64,
    pub lo_seq: u64,
    /// Seq of the trigger event; facts after it belong to the meeting.
    pub hi_seq: u64,
}

/// The free-roam segment preceding each meeting, in meeting order.
pub fn segments(log: &GameLog) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut pending_trigger: Option<(u64, u64)> = None;
    let mut segment_open: (u64, u64) = (0, 0); // (start_tick, lo_seq)
    let mut in_meeting = false;
    for event in &log.events {
        match &event.kind {
            EventKind::BodyReported { .. } | EventKind::MeetingCalled { .. } => {
                if !in_meeting && pending_trigger.is_none() {
                    pending_trigger = Some((event.seq, event.tick));
                }
            }
            EventKind::SpeakingOrderFixed { .. } => {
                if let Some((trigger_seq, trigger_tick)) = pending_trigger.take() {
                    out.push(Segment {
                        meeting_index: out.len(),
                        start_tick: segment_open.0,
                        end_tick: trigger_tick,
                        lo_seq: segment_open.1,
                        hi_seq: trigger_seq,
                    });
                    in_meeting = true;
                }
            }
            EventKind::Ejected { .. } | EventKind::NoEjection => {
                if in_meeting {
                    // Respawn events follow; the next segment starts with them.
                    segment_open = (event.tick, event.seq + 1);
                    in_meeting = false;
                }
            }
            _ => {}
        }
    }
    out
}

/// Applies the fixed rule table. `Unresolvable` is a value, not an error; it
/// yields the unverifiable verdict downstream.
pub fn resolve_temporal(
    temporal: Option<&str>,
    segment: &Segment,
    config: &TemporalConfig,
) -> TemporalResolution {
    let raw = match temporal {
        Some(t) => t,
        None => return TemporalResolution::Unresolvable,
    };
    let text = normalize(raw);
    let full = |note: &str, duration| {
        TemporalResolution::Window(TickWindow {
            start_tick: segment.start_tick,
            end_tick: segment.end_tick,
            duration_claim: duration,
            resolution_note: note.to_string(),
        })
    };

    if let Some((a, b)) = explicit_ticks(&text) {
        let start = a.saturating_sub(config.tick_tolerance).max(segment.start_tick);
        let end = (b + config.tick_tolerance).min(segment.end_tick);
        if start > end || b < a {
            return TemporalResolution::Unresolvable;
        }
        return TemporalResolution::Window(TickWindow {
            start_tick: start,
            end_tick: end,
            duration_claim: false,
            resolution_note: format!("explicit tick reference {a}..{b} with tolerance"),
        });
    }

    match text.as_str() {
        "this round" | "since the last meeting" | "since last meeting" => full("whole segment", false),
        "the whole time" => full("whole segment, duration claim", true),
        "at the start" => {
            let end = (segment.start_tick + config.start_window - 1).min(segment.end_tick);
            TemporalResolution::Window(TickWindow {
                start_tick: segment.start_tick,
                end_tick: end,
                duration_claim: false,
                resolution_note: format!("first {} ticks of segment", config.start_window),
            })
        }
        "just now" | "right before the report" | "when i found the body" | "when the body was found" => {
            let start =
                segment.end_tick.saturating_sub(config.recent_window - 1).max(segment.start_tick);
            TemporalResolution::Window(TickWindow {
                start_tick: start,
                end_tick: segment.end_tick,
                duration_claim: false,
                resolution_note: format!("last {} ticks before the trigger", config.recent_window),
            })
        }
        _ => TemporalResolution::Unresolvable,
    }
}

fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !out.ends_with(' ') && !out.is_empty() {
                out.push(' ');
            }
        } else {
            out.extend(ch.to_lowercase());
        }
    }
    out.trim_end_matches([' ', '.', '!']).to_string()
}

/// Extracts "tick 12" / "ticks 2-3" / "around tick 5" style references.
fn explicit_ticks(text: &str) -> Option<(u64, u64)> {
    let idx = text.find("tick")?;
    let after = &text[idx..];
    let digits_start = after.find(|c: char| c.is_ascii_digit())?;
    let tail = &after[digits_start..];
    let first: String = tail.chars().take_while(|c| c.is_ascii_digit()).collect();
    let a: u64 = first.parse().ok()?;
    let rest = tail[first.len()..].trim_start();
    for sep in ["-", "to", "through"] {
        if let Some(stripped) = rest.strip_prefix(sep) {
            let stripped = stripped.trim_start();
            let second: String = stripped.chars().take_while(|c| c.is_ascii_digit()).collect();
            if let Ok(b) = second.parse::<u64>() {
                return Some((a, b));
            }
        }
    }
    Some((a, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment() -> Segment {
        Segment { meeting_index: 0, start_tick: 10, end_tick: 18, lo_seq: 100, hi_seq: 220 }
    }

    fn window(res: TemporalResolution) -> TickWindow {
        match res {
            TemporalResolution::Window(w) => w,
            TemporalResolution::Unresolvable => panic!("expected a window"),
        }
    }

    #[test]
    fn whole_segment_rules() {
        let cfg = TemporalConfig::default();
        let w = window(resolve_temporal(Some("this round"), &segment(), &cfg));
        assert_eq!((w.start_tick, w.end_tick, w.duration_claim), (10, 18, false));
        let w = window(resolve_temporal(Some("The Whole Time"), &segment(), &cfg));
        assert_eq!((w.start_tick, w.end_tick, w.duration_claim), (10, 18, true));
    }

    #[test]
    fn boundary_rules() {
        let cfg = TemporalConfig::default();
        let w = window(resolve_temporal(Some("at the start"), &segment(), &cfg));
        assert_eq!((w.start_tick, w.end_tick), (10, 12));
        let w = window(resolve_temporal(Some("just now"), &segment(), &cfg));
        assert_eq!((w.start_tick, w.end_tick), (16, 18));
        let w = window(resolve_temporal(Some("when I found the body"), &segment(), &cfg));
        assert_eq!((w.start_tick, w.end_tick), (16, 18));
    }

    #[test]
    fn explicit_tick_references() {
        let cfg = TemporalConfig::default();
        let w = window(resolve_temporal(Some("at tick 12"), &segment(), &cfg));
        assert_eq!((w.start_tick, w.end_tick), (11, 13));
        let w = window(resolve_temporal(Some("at ticks 12-14"), &segment(), &cfg));
        assert_eq!((w.start_tick, w.end_tick), (11, 15));
        // Clipped to the segment.
        let w = window(resolve_temporal(Some("tick 10"), &segment(), &cfg));
        assert_eq!((w.start_tick, w.end_tick), (10, 11));
        // Entirely outside the segment.
        assert_eq!(
            resolve_temporal(Some("tick 40"), &segment(), &cfg),
            TemporalResolution::Unresolvable
        );
    }

    #[test]
    fn unknown_references_are_unresolvable() {
        let cfg = TemporalConfig::default();
        assert_eq!(
            resolve_temporal(Some("before the cows came home"), &segment(), &cfg),
            TemporalResolution::Unresolvable
        );
        assert_eq!(resolve_temporal(None, &segment(), &cfg), TemporalResolution::Unresolvable);
    }
}
