use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::{extract_code, ChatRequest, GatewayError, ModelGateway};

pub const DEFAULT_INTENT_TEMPLATE: &str = include_str!("../../config/intent_prompt.txt");

/// Sub-queries for the three example indexes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentTriple {
    pub access_query: String,
    pub preprocess_query: String,
    pub visualize_query: String,
}

impl IntentTriple {
    /// Every field set to the whole prompt.
    pub fn fallback(prompt: &str) -> Self {
        Self {
            access_query: prompt.to_string(),
            preprocess_query: prompt.to_string(),
            visualize_query: prompt.to_string(),
        }
    }
}

fn find_object(reply: &str) -> Option<serde_json::Map<String, Value>> {
    let mut candidates = vec![reply.trim().to_string()];
    if let Ok(script) = extract_code(reply) {
        candidates.push(script.source);
    }
    if let (Some(start), Some(end)) = (reply.find('{'), reply.rfind('}')) {
        if start < end {
            candidates.push(reply[start..=end].to_string());
        }
    }
    candidates
        .iter()
        .find_map(|c| match serde_json::from_str::<Value>(c) {
            Ok(Value::Object(map)) => Some(map),
            _ => None,
        })
}

/// Reads the three queries out of a model reply. Missing, empty, or
/// non-string fields fall back to the whole prompt.
pub fn parse_intent_reply(reply: &str, prompt: &str) -> IntentTriple {
    let Some(map) = find_object(reply) else {
        return IntentTriple::fallback(prompt);
    };
    let field = |key: &str| {
        map.get(key)
            .and_then(Value::as_str)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .unwrap_or(prompt)
            .to_string()
    };
    IntentTriple {
        access_query: field("access"),
        preprocess_query: field("preprocess"),
        visualize_query: field("visualize"),
    }
}

/// Asks the model to split a prompt into access, preprocessing, and
/// visualization intents. Only transport failures are errors.
pub fn decompose_intent(
    prompt: &str,
    gateway: &dyn ModelGateway,
    model: &str,
    template: &str,
) -> Result<IntentTriple, GatewayError> {
    let req = ChatRequest::single_turn(model, None, &template.replace("{prompt}", prompt));
    let reply = gateway.chat(&req)?;
    Ok(parse_intent_reply(&reply, prompt))
}
