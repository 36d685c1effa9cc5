//! Chat-model agent adapter: composes prompts from the bundled templates,
//! drives a chat-completions endpoint, and parses replies into engine
//! decisions.

use std::time::Duration;

use base64::Engine as _;
use serde::Deserialize;
use serde_json::json;

use crate::engine::{Action, PlayerId, Role, VoteChoice};
use crate::observation::Observation;

use super::{parse_response, ParsedReply, Policy, PolicyCtx, PolicyError, ReplyMode};

pub const SYSTEM_PROMPT_TEMPLATE: &str = include_str!("../../assets/prompts/system.txt");
pub const GOOSE_STRATEGY: &str = include_str!("../../assets/prompts/strategy_goose.txt");
pub const DUCK_STRATEGY: &str = include_str!("../../assets/prompts/strategy_duck.txt");

/// Remote endpoint description. The credential is looked up from the named
/// environment variable, never stored in run configs or logs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    pub model: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_true")]
    pub supports_images: bool,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_api_key_env() -> String {
    "QUACK_API_KEY".to_string()
}

fn default_true() -> bool {
    true
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub system: String,
    pub user_text: String,
    /// SVG documents to attach as images, when the endpoint supports them.
    pub images: Vec<String>,
}

/// Transport boundary, separated so the policy logic is testable without a
/// network.
pub trait ChatTransport: Send {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, PolicyError>;
}

pub struct HttpChatTransport {
    endpoint: EndpointConfig,
    client: reqwest::blocking::Client,
    api_key: String,
}

impl HttpChatTransport {
    pub fn new(endpoint: EndpointConfig) -> Result<HttpChatTransport, PolicyError> {
        let api_key = std::env::var(&endpoint.api_key_env).map_err(|_| {
            PolicyError::Transport(format!(
                "credential env var {} is not set",
                endpoint.api_key_env
            ))
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| PolicyError::Transport(e.to_string()))?;
        Ok(HttpChatTransport { endpoint, client, api_key })
    }

    fn body(&self, request: &ChatRequest) -> serde_json::Value {
        let user_content = if self.endpoint.supports_images && !request.images.is_empty() {
            let mut parts = vec![json!({"type": "text", "text": request.user_text})];
            for svg in &request.images {
                let encoded = base64::engine::general_purpose::STANDARD.encode(svg.as_bytes());
                parts.push(json!({
                    "type": "image_url",
                    "image_url": {"url": format!("data:image/svg+xml;base64,{encoded}")}
                }));
            }
            json!(parts)
        } else {
            json!(request.user_text)
        };
        json!({
            "model": self.endpoint.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": user_content},
            ],
        })
    }
}

impl ChatTransport for HttpChatTransport {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, PolicyError> {
        let body = self.body(request);
        let mut last_err = String::new();
        for attempt in 0..3 {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(250 * attempt as u64));
            }
            let sent = self
                .client
                .post(&self.endpoint.url)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send();
            match sent {
                Err(e) => last_err = e.to_string(),
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_server_error() || status.as_u16() == 429 {
                        last_err = format!("endpoint returned {status}");
                        continue;
                    }
                    if !status.is_success() {
                        return Err(PolicyError::Transport(format!("endpoint returned {status}")));
                    }
                    let value: serde_json::Value =
                        resp.json().map_err(|e| PolicyError::Transport(e.to_string()))?;
                    return extract_reply_text(&value);
                }
            }
        }
        Err(PolicyError::Transport(last_err))
    }
}

/// Pulls the assistant text out of a chat-completions response; tolerates
/// both plain-string and multi-part content.
pub fn extract_reply_text(value: &serde_json::Value) -> Result<String, PolicyError> {
    let content = value
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .ok_or_else(|| PolicyError::Transport("reply has no message content".to_string()))?;
    match content {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Array(parts) => {
            let mut out = String::new();
            for part in parts {
                if let Some(text) = part.get("text").and_then(|t| t.as_str()) {
                    out.push_str(text);
                }
            }
            Ok(out)
        }
        other => Err(PolicyError::Transport(format!("unexpected content shape: {other}"))),
    }
}

/// Fills the shared system-prompt template for one seat.
pub fn compose_system_prompt(
    player: &PlayerId,
    role: Role,
    roster: &[PlayerId],
    n_geese: u32,
    n_ducks: u32,
    teammates: &[PlayerId],
) -> String {
    let (role_text, objective, strategy) = match role {
        Role::Goose => (
            "Goose (Innocent)",
            "complete tasks and identify the Ducks",
            GOOSE_STRATEGY,
        ),
        Role::Duck => (
            "Duck (Impostor)",
            "eliminate Geese until Ducks reach voting parity",
            DUCK_STRATEGY,
        ),
    };
    let all_players: Vec<&str> = roster.iter().map(|p| p.as_str()).collect();
    let teammates_clause = if role == Role::Duck && !teammates.is_empty() {
        let names: Vec<&str> = teammates.iter().map(|p| p.as_str()).collect();
        format!("Your Duck teammates: {}. Protect them.", names.join(", "))
    } else {
        String::new()
    };
    SYSTEM_PROMPT_TEMPLATE
        .replace("{player_name}", player.as_str())
        .replace("{role}", role_text)
        .replace("{objective}", objective)
        .replace("{total_geese}", &n_geese.to_string())
        .replace("{total_ducks}", &n_ducks.to_string())
        .replace("{all_players}", &all_players.join(", "))
        .replace("{teammates_clause}", &teammates_clause)
        .replace("{strategy}", strategy)
}

/// A seat driven by a remote chat model. Parse failures are re-prompted up
/// to twice with corrective feedback before surfacing an error; the engine
/// then falls back to a legal default.
pub struct ModelPolicy {
    transport: Box<dyn ChatTransport>,
    supports_images: bool,
    roster: Vec<PlayerId>,
    n_geese: u32,
    n_ducks: u32,
}

const REPROMPT_BUDGET: u32 = 2;

impl ModelPolicy {
    pub fn new(
        transport: Box<dyn ChatTransport>,
        supports_images: bool,
        roster: Vec<PlayerId>,
        n_geese: u32,
        n_ducks: u32,
    ) -> ModelPolicy {
        ModelPolicy { transport, supports_images, roster, n_geese, n_ducks }
    }

    pub fn over_http(
        endpoint: EndpointConfig,
        roster: Vec<PlayerId>,
        n_geese: u32,
        n_ducks: u32,
    ) -> Result<ModelPolicy, PolicyError> {
        let supports_images = endpoint.supports_images;
        Ok(ModelPolicy::new(
            Box::new(HttpChatTransport::new(endpoint)?),
            supports_images,
            roster,
            n_geese,
            n_ducks,
        ))
    }

    fn request(&self, ctx: &PolicyCtx, instruction: &str) -> ChatRequest {
        let obs = &ctx.observation;
        let system = compose_system_prompt(
            &obs.viewer,
            obs.summary.role,
            &self.roster,
            self.n_geese,
            self.n_ducks,
            &obs.summary.teammates,
        );
        let mut user_text = String::new();
        user_text.push_str("== your memory ==\n");
        user_text.push_str(&ctx.memory.digest(None));
        user_text.push_str("\n== current observation ==\n");
        user_text.push_str(&obs.summary.to_text());
        user_text.push('\n');
        user_text.push_str(instruction);
        let images = if self.supports_images {
            vec![obs.global_view.svg.clone(), obs.local_view.svg.clone()]
        } else {
            Vec::new()
        };
        ChatRequest { system, user_text, images }
    }

    fn ask(
        &mut self,
        ctx: &PolicyCtx,
        mode: ReplyMode,
        instruction: String,
    ) -> Result<ParsedReply, PolicyError> {
        let mut request = self.request(ctx, &instruction);
        let vote_roster: Vec<PlayerId> = ctx
            .observation
            .summary
            .meeting
            .as_ref()
            .map(|m| m.speaking_order.clone())
            .unwrap_or_else(|| self.roster.clone());
        let roster = match mode {
            ReplyMode::Vote => &vote_roster,
            _ => &self.roster,
        };
        let mut last_parse_error = String::new();
        for _ in 0..=REPROMPT_BUDGET {
            let reply = self.transport.complete(&request)?;
            match parse_response(mode, &reply, roster, ctx.map) {
                Ok(parsed) => return Ok(parsed),
                Err(e) => {
                    last_parse_error = e.to_string();
                    request.user_text.push_str(&format!(
                        "\nYour previous reply `{}` was invalid ({}). Answer again following the RESPONSE FORMAT exactly.",
                        reply.trim(),
                        e
                    ));
                }
            }
        }
        Err(PolicyError::Parse(last_parse_error))
    }
}

impl Policy for ModelPolicy {
    fn act(&mut self, ctx: &PolicyCtx) -> Result<Action, PolicyError> {
        let legal: Vec<String> = ctx.legal.iter().map(action_syntax).collect();
        let instruction = format!(
            "== decision ==\nChoose your next free-roam action.\nAvailable actions: {}\nRespond with EXACTLY one action from the list, optionally followed by ' | say(your message)'.",
            legal.join(", ")
        );
        match self.ask(ctx, ReplyMode::Action, instruction)? {
            ParsedReply::Action(a) => Ok(a),
            _ => unreachable!("mode fixes the variant"),
        }
    }

    fn speak(&mut self, ctx: &PolicyCtx) -> Result<String, PolicyError> {
        let instruction = "== decision ==\nIt is your turn to speak in the meeting. Respond with your statement only.".to_string();
        match self.ask(ctx, ReplyMode::Utterance, instruction)? {
            ParsedReply::Utterance(text) => Ok(text),
            _ => unreachable!("mode fixes the variant"),
        }
    }

    fn vote(&mut self, ctx: &PolicyCtx) -> Result<VoteChoice, PolicyError> {
        let instruction =
            "== decision ==\nVoting time. Respond with EXACTLY one living player's name to vote them out, or 'skip' to abstain."
                .to_string();
        match self.ask(ctx, ReplyMode::Vote, instruction)? {
            ParsedReply::Vote(v) => Ok(v),
            _ => unreachable!("mode fixes the variant"),
        }
    }
}

fn action_syntax(kind: &crate::engine::ActionKind) -> String {
    use crate::engine::ActionKind::*;
    match kind {
        Wait => "wait()".to_string(),
        DoTask => "do_task()".to_string(),
        Report => "report()".to_string(),
        CallMeeting => "call_meeting()".to_string(),
        Move(room) => format!("move({room})"),
        Kill(player) => format!("kill({player})"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ActionKind;

    #[test]
    fn reply_text_extraction_handles_both_shapes() {
        let plain = json!({"choices":[{"message":{"content":"move(medbay)"}}]});
        assert_eq!(extract_reply_text(&plain).unwrap(), "move(medbay)");
        let parts = json!({"choices":[{"message":{"content":[
            {"type":"text","text":"mo"}, {"type":"text","text":"ve(medbay)"}
        ]}}]});
        assert_eq!(extract_reply_text(&parts).unwrap(), "move(medbay)");
        assert!(extract_reply_text(&json!({"choices":[]})).is_err());
    }

    #[test]
    fn system_prompt_substitutes_all_placeholders() {
        let roster: Vec<PlayerId> = ["Alice", "Bob"].iter().map(|n| PlayerId::new(n)).collect();
        let prompt = compose_system_prompt(&roster[0], Role::Duck, &roster, 1, 1, &[]);
        assert!(prompt.contains("You are Alice"));
        assert!(prompt.contains("Duck (Impostor)"));
        assert!(prompt.contains("STRATEGY GUIDE (Duck / Impostor)"));
        assert!(!prompt.contains('{'), "unsubstituted placeholder left in prompt");
    }

    #[test]
    fn action_syntax_matches_response_format() {
        assert_eq!(action_syntax(&ActionKind::Wait), "wait()");
        assert_eq!(
            action_syntax(&ActionKind::Kill(PlayerId::new("Eve"))),
            "kill(Eve)"
        );
    }
}
