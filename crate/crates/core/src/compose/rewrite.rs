//! Optional LLM rephrasing with a content guard and template fallback.

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::Instruction;
use crate::types::Direction;

pub const DEFAULT_REWRITE_TIMEOUT: Duration = Duration::from_millis(300);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteFacts {
    pub class: String,
    pub direction: Direction,
    pub distance_m: Option<f64>,
    pub hazard: bool,
}

impl RewriteFacts {
    pub fn of(i: &Instruction) -> Self {
        RewriteFacts {
            class: i.sign_class.code().to_string(),
            direction: i.direction,
            distance_m: i.distance_m,
            hazard: i.hazard,
        }
    }
}

#[derive(Debug, Serialize)]
struct RewriteRequest<'a> {
    template: &'a str,
    facts: &'a RewriteFacts,
}

#[derive(Debug, Deserialize)]
struct RewriteReply {
    text: String,
}

fn words_lower(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// True when `text` keeps every required term and names no direction other
/// than the instruction's own.
pub fn guard_accepts(instruction: &Instruction, text: &str) -> bool {
    if text.trim().is_empty() {
        return false;
    }
    let lower = text.to_lowercase();
    let words = words_lower(text);
    let has_word = |w: &str| words.iter().any(|x| x == w);
    for term in &instruction.required_terms {
        let term = term.to_lowercase();
        let present = if term.contains(' ') {
            lower.contains(&term)
        } else {
            has_word(&term)
        };
        if !present {
            return false;
        }
    }
    let foreign = Direction::ALL
        .into_iter()
        .filter(|d| *d != instruction.direction && *d != Direction::Ahead)
        .any(|d| has_word(d.as_str()));
    !foreign
}

#[async_trait]
pub trait Rewriter: Send + Sync {
    /// Never fails: on any problem the template instruction comes back
    /// unchanged with `rewritten = false`.
    async fn rewrite(&self, instruction: Instruction) -> Instruction;
}

/// `POST {base}/v1/rewrite` client.
#[derive(Debug, Clone)]
pub struct HttpRewriter {
    http: reqwest::Client,
    url: String,
    timeout: Duration,
}

impl HttpRewriter {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        HttpRewriter {
            http: reqwest::Client::new(),
            url: format!("{}/v1/rewrite", base_url.trim_end_matches('/')),
            timeout,
        }
    }

    async fn call(&self, instruction: &Instruction) -> Option<String> {
        let facts = RewriteFacts::of(instruction);
        let body = RewriteRequest {
            template: &instruction.text,
            facts: &facts,
        };
        let send = self.http.post(&self.url).json(&body).send();
        let resp = tokio::time::timeout(self.timeout, async {
            let resp = send.await.ok()?;
            if !resp.status().is_success() {
                return None;
            }
            resp.json::<RewriteReply>().await.ok()
        })
        .await
        .ok()??;
        Some(resp.text)
    }
}

#[async_trait]
impl Rewriter for HttpRewriter {
    async fn rewrite(&self, mut instruction: Instruction) -> Instruction {
        match self.call(&instruction).await {
            Some(text) if guard_accepts(&instruction, &text) => {
                instruction.text = text;
                instruction.rewritten = true;
            }
            Some(text) => {
                tracing::debug!(template = %instruction.text, reply = %text, "rewrite rejected by guard");
            }
            None => {}
        }
        instruction
    }
}
