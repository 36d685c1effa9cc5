//! Structured, individually checkable claims extracted from meeting
//! utterances: a deterministic DSL channel, a model-backed extractor with a
//! persistent cache, and temporal-reference resolution.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{ChatRequest, ChatTransport};
use crate::engine::PlayerId;
use crate::eventlog::{EventKind, GameLog};
use crate::map::{Map, RoomId};

pub mod dsl;
pub mod temporal;

pub use temporal::{resolve_temporal, segments, Segment, TemporalConfig, TemporalResolution, TickWindow};

pub const EXTRACTION_PROMPT_TEMPLATE: &str = include_str!("../../assets/prompts/extraction.txt");
pub const EXTRACTION_PROMPT_VERSION: &str = "extraction-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityKind {
    Task,
    Traveling,
    Waiting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    Strong,
    Moderate,
    Weak,
}

/// The checkable content of a claim. A route is the ordered multi-room form
/// of a location claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClaimKind {
    Location { subject: PlayerId, room: RoomId },
    Route { subject: PlayerId, route: Vec<RoomId> },
    Sighting { subject: PlayerId, target: PlayerId, room: RoomId },
    Activity { subject: PlayerId, activity: ActivityKind, room: RoomId },
    Accusation { accuser: PlayerId, target: PlayerId, confidence: Option<Confidence> },
    Defense { defender: PlayerId, defended: PlayerId, basis: Option<String> },
}

impl ClaimKind {
    pub fn type_name(&self) -> &'static str {
        match self {
            ClaimKind::Location { .. } => "location",
            ClaimKind::Route { .. } => "route",
            ClaimKind::Sighting { .. } => "sighting",
            ClaimKind::Activity { .. } => "activity",
            ClaimKind::Accusation { .. } => "accusation",
            ClaimKind::Defense { .. } => "defense",
        }
    }

    /// The player whose trajectory resolves the claim.
    pub fn subject(&self) -> &PlayerId {
        match self {
            ClaimKind::Location { subject, .. }
            | ClaimKind::Route { subject, .. }
            | ClaimKind::Sighting { subject, .. }
            | ClaimKind::Activity { subject, .. } => subject,
            ClaimKind::Accusation { accuser, .. } => accuser,
            ClaimKind::Defense { defender, .. } => defender,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub claim_id: String,
    pub speaker: PlayerId,
    pub meeting_index: usize,
    pub meeting_tick: u64,
    /// Event seq of the source utterance.
    pub utterance_seq: u64,
    #[serde(flatten)]
    pub kind: ClaimKind,
    pub temporal: Option<String>,
}

#[derive(Debug, Error)]
pub enum ClaimError {
    #[error(transparent)]
    Dsl(#[from] dsl::DslError),
    #[error("annotation at byte {position}: missing field `{field}` for type `{claim_type}`")]
    MissingField { position: usize, claim_type: String, field: &'static str },
    #[error("annotation at byte {position}: unknown claim type `{claim_type}`")]
    UnknownType { position: usize, claim_type: String },
    #[error("annotation at byte {position}: unknown player `{name}`")]
    UnknownPlayer { position: usize, name: String },
    #[error("annotation at byte {position}: unknown room `{name}`")]
    UnknownRoom { position: usize, name: String },
    #[error("annotation at byte {position}: {message}")]
    BadValue { position: usize, message: String },
    #[error("model reply is not a JSON array: {0}")]
    BadModelReply(String),
    #[error("extraction transport failure: {0}")]
    Transport(String),
    #[error("cache I/O failure: {0}")]
    CacheIo(#[from] std::io::Error),
}

/// Everything extraction needs to know about the utterance being parsed.
#[derive(Debug, Clone)]
pub struct ExtractionContext<'a> {
    pub map: &'a Map,
    pub roster: &'a [PlayerId],
    pub speaker: PlayerId,
    pub meeting_index: usize,
    pub meeting_tick: u64,
    pub utterance_seq: u64,
}

impl<'a> ExtractionContext<'a> {
    fn resolve_player(&self, raw: &str, position: usize) -> Result<PlayerId, ClaimError> {
        self.roster
            .iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(raw.trim()))
            .cloned()
            .ok_or_else(|| ClaimError::UnknownPlayer { position, name: raw.to_string() })
    }

    fn resolve_room(&self, raw: &str, position: usize) -> Result<RoomId, ClaimError> {
        self.map
            .resolve_room(raw)
            .ok_or_else(|| ClaimError::UnknownRoom { position, name: raw.to_string() })
    }
}

/// Deterministic extraction channel: parses every `@claim{...}` annotation,
/// validates it against the type schemas, normalizes rooms and player names,
/// and de-duplicates exact duplicates within the utterance.
pub fn extract_structured(
    utterance: &str,
    ctx: &ExtractionContext,
) -> Result<Vec<Claim>, ClaimError> {
    let annotations = dsl::parse_annotations(utterance)?;
    let mut claims: Vec<Claim> = Vec::new();
    for ann in annotations {
        let kind = kind_from_fields(&ann.fields, ann.position, ctx)?;
        let temporal = ann.fields.get("temporal").cloned();
        if claims.iter().any(|c| c.kind == kind && c.temporal == temporal) {
            continue; // de-duplicated within the utterance
        }
        claims.push(Claim {
            claim_id: format!("u{}c{}", ctx.utterance_seq, claims.len()),
            speaker: ctx.speaker.clone(),
            meeting_index: ctx.meeting_index,
            meeting_tick: ctx.meeting_tick,
            utterance_seq: ctx.utterance_seq,
            kind,
            temporal,
        });
    }
    Ok(claims)
}

fn kind_from_fields(
    fields: &BTreeMap<String, String>,
    position: usize,
    ctx: &ExtractionContext,
) -> Result<ClaimKind, ClaimError> {
    let claim_type = fields
        .get("type")
        .ok_or(ClaimError::MissingField { position, claim_type: "?".into(), field: "type" })?
        .to_ascii_lowercase();
    let require = |field: &'static str| {
        fields.get(field).ok_or(ClaimError::MissingField {
            position,
            claim_type: claim_type.clone(),
            field,
        })
    };
    match claim_type.as_str() {
        "location" => {
            let subject = ctx.resolve_player(require("subject")?, position)?;
            match (fields.get("room"), fields.get("route")) {
                (Some(_), Some(_)) => Err(ClaimError::BadValue {
                    position,
                    message: "location claim carries both room and route".into(),
                }),
                (Some(room), None) => {
                    Ok(ClaimKind::Location { subject, room: ctx.resolve_room(room, position)? })
                }
                (None, Some(route)) => {
                    let rooms: Vec<RoomId> = route
                        .split(',')
                        .map(|r| ctx.resolve_room(r, position))
                        .collect::<Result<_, _>>()?;
                    if rooms.len() < 2 {
                        return Err(ClaimError::BadValue {
                            position,
                            message: "route must list at least two rooms".into(),
                        });
                    }
                    Ok(ClaimKind::Route { subject, route: rooms })
                }
                (None, None) => Err(ClaimError::MissingField {
                    position,
                    claim_type,
                    field: "room",
                }),
            }
        }
        "sighting" => Ok(ClaimKind::Sighting {
            subject: ctx.resolve_player(require("subject")?, position)?,
            target: ctx.resolve_player(require("target")?, position)?,
            room: ctx.resolve_room(require("room")?, position)?,
        }),
        "activity" => {
            let activity = match require("activity")?.to_ascii_lowercase().as_str() {
                "task" => ActivityKind::Task,
                "traveling" | "travelling" => ActivityKind::Traveling,
                "waiting" => ActivityKind::Waiting,
                other => {
                    return Err(ClaimError::BadValue {
                        position,
                        message: format!("unknown activity `{other}`"),
                    })
                }
            };
            Ok(ClaimKind::Activity {
                subject: ctx.resolve_player(require("subject")?, position)?,
                activity,
                room: ctx.resolve_room(require("room")?, position)?,
            })
        }
        "accusation" => {
            let confidence = match fields.get("confidence").map(|c| c.to_ascii_lowercase()) {
                None => None,
                Some(c) => Some(match c.as_str() {
                    "strong" => Confidence::Strong,
                    "moderate" => Confidence::Moderate,
                    "weak" => Confidence::Weak,
                    other => {
                        return Err(ClaimError::BadValue {
                            position,
                            message: format!("unknown confidence `{other}`"),
                        })
                    }
                }),
            };
            Ok(ClaimKind::Accusation {
                accuser: ctx.resolve_player(require("accuser")?, position)?,
                target: ctx.resolve_player(require("target")?, position)?,
                confidence,
            })
        }
        "defense" => Ok(ClaimKind::Defense {
            defender: ctx.resolve_player(require("defender")?, position)?,
            defended: ctx.resolve_player(require("defended")?, position)?,
            basis: fields.get("basis").cloned(),
        }),
        other => Err(ClaimError::UnknownType { position, claim_type: other.to_string() }),
    }
}

/// Persistent extraction cache keyed by (utterance, prompt version); rerunning
/// an evaluation reproduces the same claim set with zero remote calls.
pub struct ExtractionCache {
    path: Option<PathBuf>,
    entries: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    reply: String,
}

impl ExtractionCache {
    pub fn in_memory() -> ExtractionCache {
        ExtractionCache { path: None, entries: BTreeMap::new() }
    }

    pub fn load(path: &Path) -> Result<ExtractionCache, ClaimError> {
        let mut entries = BTreeMap::new();
        if path.exists() {
            for line in std::fs::read_to_string(path)?.lines() {
                if line.is_empty() {
                    continue;
                }
                let parsed: CacheLine = serde_json::from_str(line)
                    .map_err(|e| ClaimError::BadModelReply(format!("corrupt cache line: {e}")))?;
                entries.insert(parsed.key, parsed.reply);
            }
        }
        Ok(ExtractionCache { path: Some(path.to_path_buf()), entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn key(utterance: &str) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(EXTRACTION_PROMPT_VERSION.as_bytes());
        hasher.update([0]);
        hasher.update(utterance.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn get(&self, utterance: &str) -> Option<&String> {
        self.entries.get(&Self::key(utterance))
    }

    fn insert(&mut self, utterance: &str, reply: String) -> Result<(), ClaimError> {
        let key = Self::key(utterance);
        if let Some(path) = &self.path {
            let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
            let line = serde_json::to_string(&CacheLine { key: key.clone(), reply: reply.clone() })
                .expect("cache line serializes");
            writeln!(file, "{line}")?;
        }
        self.entries.insert(key, reply);
        Ok(())
    }
}

/// Fills the extraction prompt for one utterance. With the bundled default
/// map this reproduces the documented prompt text exactly.
pub fn extraction_prompt(utterance: &str, ctx: &ExtractionContext) -> String {
    let rooms: Vec<&str> = ctx.map.rooms().map(|r| r.as_str()).collect();
    let players: Vec<&str> = ctx.roster.iter().map(|p| p.as_str()).collect();
    EXTRACTION_PROMPT_TEMPLATE
        .replace("{room_count}", &rooms.len().to_string())
        .replace("{room_names}", &rooms.join(", "))
        .replace("{speaker_name}", ctx.speaker.as_str())
        .replace("{meeting_tick}", &ctx.meeting_tick.to_string())
        .replace("{player_names}", &players.join(", "))
        .replace("{message}", utterance)
}

/// Model-backed extraction channel. Schema-invalid items are dropped (and
/// logged), not repaired; replies are cached.
pub fn extract_model(
    utterance: &str,
    ctx: &ExtractionContext,
    transport: &mut dyn ChatTransport,
    cache: &mut ExtractionCache,
) -> Result<Vec<Claim>, ClaimError> {
    let reply = match cache.get(utterance) {
        Some(hit) => hit.clone(),
        None => {
            let request = ChatRequest {
                system: "You extract structured claims from game discussion statements.".to_string(),
                user_text: extraction_prompt(utterance, ctx),
                images: Vec::new(),
            };
            let reply = transport
                .complete(&request)
                .map_err(|e| ClaimError::Transport(e.to_string()))?;
            cache.insert(utterance, reply.clone())?;
            reply
        }
    };
    parse_model_reply(&reply, ctx)
}

/// Parses the extractor's JSON array into validated claims.
pub fn parse_model_reply(reply: &str, ctx: &ExtractionContext) -> Result<Vec<Claim>, ClaimError> {
    let body = strip_fences(reply);
    let items: Vec<serde_json::Value> =
        serde_json::from_str(body.trim()).map_err(|e| ClaimError::BadModelReply(e.to_string()))?;
    let mut claims: Vec<Claim> = Vec::new();
    for item in items {
        let fields = match flatten_item(&item) {
            Some(f) => f,
            None => {
                log::warn!("dropping non-object extraction item: {item}");
                continue;
            }
        };
        match kind_from_fields(&fields, 0, ctx) {
            Ok(kind) => {
                let temporal = fields.get("temporal").cloned();
                if claims.iter().any(|c| c.kind == kind && c.temporal == temporal) {
                    continue;
                }
                claims.push(Claim {
                    claim_id: format!("u{}c{}", ctx.utterance_seq, claims.len()),
                    speaker: ctx.speaker.clone(),
                    meeting_index: ctx.meeting_index,
                    meeting_tick: ctx.meeting_tick,
                    utterance_seq: ctx.utterance_seq,
                    kind,
                    temporal,
                });
            }
            Err(e) => log::warn!("dropping schema-invalid extraction item: {e}"),
        }
    }
    Ok(claims)
}

fn strip_fences(reply: &str) -> &str {
    let trimmed = reply.trim();
    if let Some(rest) = trimmed.strip_prefix("```") {
        let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphabetic());
        if let Some(end) = rest.rfind("```") {
            return &rest[..end];
        }
    }
    trimmed
}

fn flatten_item(item: &serde_json::Value) -> Option<BTreeMap<String, String>> {
    let obj = item.as_object()?;
    let mut fields = BTreeMap::new();
    for (key, value) in obj {
        let rendered = match value {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Array(parts) => parts
                .iter()
                .filter_map(|p| p.as_str())
                .collect::<Vec<_>>()
                .join(","),
            serde_json::Value::Number(n) => n.to_string(),
            _ => continue,
        };
        fields.insert(key.clone(), rendered);
    }
    Some(fields)
}

/// Every utterance event of the log with its extraction context, in order.
pub fn utterances<'a>(
    log: &'a GameLog,
    map: &'a Map,
    roster: &'a [PlayerId],
) -> Vec<(String, ExtractionContext<'a>)> {
    let mut out = Vec::new();
    let mut meeting_index = 0usize;
    let mut meeting_tick = 0u64;
    let mut seen_meeting = false;
    for event in &log.events {
        match &event.kind {
            EventKind::SpeakingOrderFixed { .. } => {
                if seen_meeting {
                    meeting_index += 1;
                }
                seen_meeting = true;
                meeting_tick = event.tick;
            }
            EventKind::Utterance { speaker, text, .. } => {
                out.push((
                    text.clone(),
                    ExtractionContext {
                        map,
                        roster,
                        speaker: speaker.clone(),
                        meeting_index,
                        meeting_tick,
                        utterance_seq: event.seq,
                    },
                ));
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

    fn test_ctx(map: &Map, roster: &[PlayerId]) -> ExtractionContext<'_> {
        ExtractionContext {
            map,
            roster,
            speaker: PlayerId::new("Alice"),
            meeting_index: 0,
            meeting_tick: 12,
            utterance_seq: 40,
        }
    }

    fn roster() -> Vec<PlayerId> {
        ["Alice", "Bob", "Eve"].iter().map(|n| PlayerId::new(n)).collect()
    }

    #[test]
    fn extracts_location_claim() {
        let map = Map::default_map();
        let r = roster();
        let ctx = test_ctx(&map, &r);
        let claims = extract_structured(
            "@claim{type=location;subject=Alice;room=medbay;temporal=this round}",
            &ctx,
        )
        .unwrap();
        assert_eq!(claims.len(), 1);
        assert_eq!(
            claims[0].kind,
            ClaimKind::Location { subject: PlayerId::new("Alice"), room: RoomId::new("medbay") }
        );
        assert_eq!(claims[0].temporal.as_deref(), Some("this round"));
        assert_eq!(claims[0].claim_id, "u40c0");
    }

    #[test]
    fn duplicate_annotations_deduplicate() {
        let map = Map::default_map();
        let r = roster();
        let ctx = test_ctx(&map, &r);
        let text = "@claim{type=location;subject=Alice;room=medbay;temporal=this round} again \
                    @claim{type=location;subject=Alice;room=medbay;temporal=this round}";
        let claims = extract_structured(text, &ctx).unwrap();
        assert_eq!(claims.len(), 1);
    }

    #[test]
    fn route_claims_preserve_order() {
        let map = Map::default_map();
        let r = roster();
        let ctx = test_ctx(&map, &r);
        let claims = extract_structured(
            "@claim{type=location;subject=Alice;route=storage,medbay;temporal=this round}",
            &ctx,
        )
        .unwrap();
        assert_eq!(
            claims[0].kind,
            ClaimKind::Route {
                subject: PlayerId::new("Alice"),
                route: vec![RoomId::new("storage"), RoomId::new("medbay")]
            }
        );
    }

    #[test]
    fn unknown_player_and_room_are_errors() {
        let map = Map::default_map();
        let r = roster();
        let ctx = test_ctx(&map, &r);
        assert!(matches!(
            extract_structured("@claim{type=location;subject=Zoe;room=medbay;temporal=t}", &ctx),
            Err(ClaimError::UnknownPlayer { .. })
        ));
        assert!(matches!(
            extract_structured("@claim{type=location;subject=Alice;room=bridge;temporal=t}", &ctx),
            Err(ClaimError::UnknownRoom { .. })
        ));
    }

    #[test]
    fn model_reply_parses_and_normalizes() {
        let map = Map::default_map();
        let r = roster();
        let ctx = test_ctx(&map, &r);
        let reply = r#"[
            {"type":"accusation","accuser":"Eve","target":"Bob","confidence":"strong"},
            {"type":"sighting","subject":"Alice","target":"Bob","room":"Med Bay","temporal":"this round"},
            {"type":"mystery","subject":"Alice"}
        ]"#;
        let claims = parse_model_reply(reply, &ctx).unwrap();
        assert_eq!(claims.len(), 2, "schema-invalid item is dropped");
        assert_eq!(
            claims[1].kind,
            ClaimKind::Sighting {
                subject: PlayerId::new("Alice"),
                target: PlayerId::new("Bob"),
                room: RoomId::new("medbay"),
            }
        );
        // Empty array is zero claims, not an error.
        assert_eq!(parse_model_reply("[]", &ctx).unwrap().len(), 0);
        // Fenced replies are tolerated.
        assert_eq!(parse_model_reply("```json\n[]\n```", &ctx).unwrap().len(), 0);
    }

    #[test]
    fn cache_round_trips_and_prevents_remote_calls() {
        struct CountingTransport {
            calls: usize,
        }
        impl ChatTransport for CountingTransport {
            fn complete(
                &mut self,
                _request: &ChatRequest,
            ) -> Result<String, crate::agents::PolicyError> {
                self.calls += 1;
                Ok("[]".to_string())
            }
        }
        let map = Map::default_map();
        let r = roster();
        let ctx = test_ctx(&map, &r);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut transport = CountingTransport { calls: 0 };
        {
            let mut cache = ExtractionCache::load(&path).unwrap();
            extract_model("nothing to see", &ctx, &mut transport, &mut cache).unwrap();
            extract_model("nothing to see", &ctx, &mut transport, &mut cache).unwrap();
        }
        assert_eq!(transport.calls, 1);
        // A fresh load hits the persisted entry.
        let mut cache = ExtractionCache::load(&path).unwrap();
        assert_eq!(cache.len(), 1);
        extract_model("nothing to see", &ctx, &mut transport, &mut cache).unwrap();
        assert_eq!(transport.calls, 1);
    }
}
