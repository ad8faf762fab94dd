//! Client for an external prompt-rephrasing service.
//!
//! The wire format is JSON over HTTP: the request is
//! `{"prompt": ..., "n": ..., "wrapper": ...}` and the response must be
//! `{"rephrasings": ["...", ...]}`. The API key is read from an
//! environment variable at call time and never logged or printed.

use std::time::Duration;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::{Prompt, Provenance};
use crate::seed;

/// Instruction sent along with every prompt.
pub const REPHRASE_WRAPPER: &str = "Rephrase the following prompt 5 times, as natural as possible. \
Keep every sound source and every editing action; do not add new ones.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RephraseError {
    #[error("no rephrase endpoint configured")]
    Disabled,
    #[error("network error: {0}")]
    NetworkError(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

pub trait Rephraser: Send + Sync {
    /// `n` alternative wordings of `prompt`, tagged as external rephrasings.
    fn rephrase(&self, prompt: &Prompt, n: usize) -> Result<Vec<Prompt>, RephraseError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RephraseConfig {
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub n: usize,
    pub max_concurrency: usize,
    pub timeout_s: u64,
}

impl Default for RephraseConfig {
    fn default() -> Self {
        RephraseConfig {
            endpoint: None,
            api_key_env: "MIXEDIT_REPHRASE_API_KEY".to_string(),
            n: 5,
            max_concurrency: 4,
            timeout_s: 30,
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    prompt: &'a str,
    n: usize,
    wrapper: &'a str,
}

#[derive(Deserialize)]
struct Response {
    rephrasings: Vec<String>,
}

pub struct HttpRephraser {
    endpoint: String,
    api_key_env: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpRephraser {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpRephraser")
            .field("endpoint", &self.endpoint)
            .field("api_key_env", &self.api_key_env)
            .finish_non_exhaustive()
    }
}

impl HttpRephraser {
    pub fn new(config: &RephraseConfig) -> Result<Self, RephraseError> {
        let endpoint = config.endpoint.clone().filter(|e| !e.trim().is_empty()).ok_or(RephraseError::Disabled)?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_s.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpRephraser { endpoint, api_key_env: config.api_key_env.clone(), agent })
    }

    fn parse(status: u16, body: &str) -> Result<Vec<String>, RephraseError> {
        if !(200..300).contains(&status) {
            return Err(RephraseError::NetworkError(format!("HTTP status {status}")));
        }
        let r: Response =
            serde_json::from_str(body).map_err(|e| RephraseError::MalformedResponse(e.to_string()))?;
        Ok(r.rephrasings)
    }
}

/// Keeps non-empty sentences, adding a full stop when the service left the
/// terminator off.
fn to_prompts(texts: Vec<String>, n: usize) -> Result<Vec<Prompt>, RephraseError> {
    let prompts: Vec<Prompt> = texts
        .into_iter()
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .map(|t| if t.ends_with(['.', '?']) { t } else { format!("{t}.") })
        .filter_map(|t| Prompt::new(t, Provenance::ExternalRephrase).ok())
        .take(n)
        .collect();
    if prompts.is_empty() {
        return Err(RephraseError::MalformedResponse("no usable rephrasings".into()));
    }
    Ok(prompts)
}

impl Rephraser for HttpRephraser {
    fn rephrase(&self, prompt: &Prompt, n: usize) -> Result<Vec<Prompt>, RephraseError> {
        let body = Request { prompt: &prompt.text, n, wrapper: REPHRASE_WRAPPER };
        let mut req = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Ok(key) = std::env::var(&self.api_key_env) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let payload = serde_json::to_string(&body).map_err(|e| RephraseError::NetworkError(e.to_string()))?;
        let mut resp = req.send(payload.as_str()).map_err(|e| RephraseError::NetworkError(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| RephraseError::NetworkError(e.to_string()))?;
        to_prompts(Self::parse(status, &text)?, n)
    }
}

/// Offline stand-in: the prompt itself plus variants with a different
/// opening phrase, shuffled deterministically per prompt.
#[derive(Clone, Debug, Default)]
pub struct MockRephraser;

const OPENERS: &[&str] = &["Please", "I want to", "Can you", "Could you", "I would like to", "I need to"];

impl Rephraser for MockRephraser {
    fn rephrase(&self, prompt: &Prompt, n: usize) -> Result<Vec<Prompt>, RephraseError> {
        let text = prompt.text.trim();
        let body = text.trim_end_matches(['.', '?']);
        let lower = body.to_ascii_lowercase();
        let rest = OPENERS
            .iter()
            .find(|o| lower.starts_with(&o.to_ascii_lowercase()))
            .map_or(body, |o| body[o.len()..].trim_start());
        let mut variants: Vec<String> = OPENERS
            .iter()
            .map(|o| {
                let end = if matches!(*o, "Can you" | "Could you") { '?' } else { '.' };
                format!("{o} {rest}{end}")
            })
            .filter(|v| v != text)
            .collect();
        variants.shuffle(&mut seed::rng(seed::fnv1a64(text.as_bytes())));
        let mut all = vec![text.to_string()];
        all.extend(variants);
        to_prompts(all, n)
    }
}

/// Rephrases many prompts with at most `max_concurrency` requests in
/// flight. Results keep the input order.
pub fn rephrase_all(
    client: &dyn Rephraser,
    prompts: &[Prompt],
    n: usize,
    max_concurrency: usize,
) -> Vec<Result<Vec<Prompt>, RephraseError>> {
    let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(max_concurrency.max(1)).build() else {
        return prompts.iter().map(|p| client.rephrase(p, n)).collect();
    };
    pool.install(|| prompts.par_iter().map(|p| client.rephrase(p, n)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    fn prompt(t: &str) -> Prompt {
        Prompt::new(t, Provenance::Template).unwrap()
    }

    #[test]
    fn mock_gives_five_distinct_sentences() {
        let out = MockRephraser.rephrase(&prompt("Please remove the rain sound."), 5).unwrap();
        assert_eq!(out.len(), 5);
        let mut texts: Vec<&str> = out.iter().map(|p| p.text.as_str()).collect();
        texts.sort();
        texts.dedup();
        assert_eq!(texts.len(), 5);
        assert!(out.iter().all(|p| p.provenance == Provenance::ExternalRephrase));
        assert_eq!(out[0].text, "Please remove the rain sound.");
    }

    #[test]
    fn missing_endpoint_is_disabled() {
        assert_eq!(HttpRephraser::new(&RephraseConfig::default()).unwrap_err(), RephraseError::Disabled);
    }

    /// Serves one canned HTTP response and returns the request it received.
    fn serve_once(body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            let mut buf = vec![0u8; 65536];
            let mut got = Vec::new();
            loop {
                let n = s.read(&mut buf).unwrap();
                got.extend_from_slice(&buf[..n]);
                let text = String::from_utf8_lossy(&got).to_string();
                if let Some(h) = text.find("\r\n\r\n") {
                    let len = text[..h]
                        .lines()
                        .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                        .unwrap_or(0);
                    if got.len() >= h + 4 + len {
                        break;
                    }
                }
                if n == 0 {
                    break;
                }
            }
            let resp = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            s.write_all(resp.as_bytes()).unwrap();
            String::from_utf8_lossy(&got).to_string()
        });
        (format!("http://{addr}/rephrase"), handle)
    }

    #[test]
    fn http_client_round_trip_and_malformed_response() {
        let (url, h) = serve_once(r#"{"rephrasings": ["Get rid of the rain.", "Remove the rain sound", ""]}"#);
        let cfg = RephraseConfig { endpoint: Some(url), api_key_env: "MIXEDIT_TEST_NO_SUCH_KEY".into(), ..Default::default() };
        let client = HttpRephraser::new(&cfg).unwrap();
        let out = client.rephrase(&prompt("Please remove the rain sound."), 5).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].text, "Remove the rain sound.");
        let req = h.join().unwrap();
        assert!(req.contains("\"wrapper\""));
        assert!(req.contains("Please remove the rain sound."));

        let (url, h) = serve_once(r#"{"text": "nope"}"#);
        let client = HttpRephraser::new(&RephraseConfig { endpoint: Some(url), ..Default::default() }).unwrap();
        assert!(matches!(
            client.rephrase(&prompt("Please remove the rain sound."), 5),
            Err(RephraseError::MalformedResponse(_))
        ));
        h.join().unwrap();
    }

    #[test]
    fn debug_output_has_no_key() {
        let cfg = RephraseConfig { endpoint: Some("http://localhost:1/x".into()), ..Default::default() };
        let s = format!("{:?}", HttpRephraser::new(&cfg).unwrap());
        assert!(s.contains("api_key_env") && !s.to_lowercase().contains("bearer"));
    }
}
