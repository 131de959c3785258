//! Pairwise ranking through a chat-completion endpoint.
//!
//! Pairs are rendered into a prompt in batches, and the model is asked to
//! reply with CSV rows under the header `molecule_a, molecule_b, is_a_greater`.
//! Molecule A is always the query, so `is_a_greater = 1` maps to
//! `query_above = true`. Rows that do not parse, that name a pair not in the
//! batch, or that contradict each other are dropped; their pairs are
//! resubmitted up to `max_retries` times and then reported as failures.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::ComparisonOutcome;

pub const RESPONSE_HEADER: [&str; 3] = ["molecule_a", "molecule_b", "is_a_greater"];

const PLACEHOLDERS: [&str; 3] = ["{property}", "{examples}", "{pairs}"];

pub const DEFAULT_PROMPT_TEMPLATE: &str = "\
# Identity

You are an expert in chemistry and biology. Given a short description of a
molecular property and two molecular SMILES, you can determine if Molecule A
has greater property value than Molecule B or not.

# Instructions

* The list of molecule pairs is given below as CSV. The first line is the header.
* You cannot use external cheminformatics library to directly predict the property.
* You can design your own heuristics, comparing atom types, bonds,
and other important information to make your predictions.
* Make sure your heuristics are aligned with the given examples. Pay attention
to the examples, especially because some properties have greater effects when
their values are lower.
* Output one CSV block with the header \"molecule_a, molecule_b, is_a_greater\"
and one row per input pair, in the input order.
* Only output 0 or 1 for \"is_a_greater\". 0 means that the property value of
molecule A is less than that of Molecule B. 1 means that the property value of
molecule A is greater than that of Molecule B.

# Examples

<user_query>
The property of interest is {property}
Examples:
{examples}
</user_query>

# Pairs

{pairs}
";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub a: String,
    pub b: String,
    pub a_greater: bool,
}

/// Deserializes from partial JSON; missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmRankerConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub prompt_template: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env_var: String,
    pub max_retries: usize,
    pub batch_size: usize,
    /// Upper bound on concurrently submitted batches.
    pub max_in_flight: usize,
    pub property_description: String,
    pub examples: Vec<FewShotExample>,
}

impl Default for LlmRankerConfig {
    fn default() -> Self {
        LlmRankerConfig {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o".into(),
            prompt_template: DEFAULT_PROMPT_TEMPLATE.into(),
            api_key_env_var: "OPENAI_API_KEY".into(),
            max_retries: 2,
            batch_size: 20,
            max_in_flight: 4,
            property_description: String::new(),
            examples: Vec::new(),
        }
    }
}

impl LlmRankerConfig {
    pub fn validate(&self) -> Result<()> {
        for p in PLACEHOLDERS {
            if !self.prompt_template.contains(p) {
                return Err(Error::invalid(format!("prompt template lacks placeholder {p}")));
            }
        }
        if self.batch_size == 0 || self.max_in_flight == 0 {
            return Err(Error::invalid("batch_size and max_in_flight must be at least 1"));
        }
        if self.model_name.trim().is_empty() {
            return Err(Error::invalid("model name is empty"));
        }
        Ok(())
    }
}

/// One pair to rank; `query_text` is presented as molecule A.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LlmPair {
    pub query_id: String,
    pub ref_id: String,
    pub query_text: String,
    pub ref_text: String,
}

/// Sends a chat-completion request body and returns the decoded JSON reply.
pub trait ChatTransport: Sync {
    fn send(&self, request: &Value) -> Result<Value>;
}

impl<T: ChatTransport + ?Sized> ChatTransport for &T {
    fn send(&self, request: &Value) -> Result<Value> {
        (**self).send(request)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LlmRankOutput {
    /// Resolved outcomes, in input order.
    pub outcomes: Vec<ComparisonOutcome>,
    /// Input indices of pairs that never received a usable answer.
    pub failures: Vec<usize>,
    /// Number of requests actually sent.
    pub requests: usize,
}

fn csv_line(fields: &[&str]) -> String {
    fields.join(",")
}

pub fn render_prompt(template: &str, property: &str, examples: &[FewShotExample], pairs: &[&LlmPair]) -> String {
    let mut example_rows = vec![csv_line(&RESPONSE_HEADER)];
    example_rows.extend(
        examples
            .iter()
            .map(|e| csv_line(&[&e.a, &e.b, if e.a_greater { "1" } else { "0" }])),
    );
    let mut pair_rows = vec![csv_line(&RESPONSE_HEADER[..2])];
    pair_rows.extend(pairs.iter().map(|p| csv_line(&[&p.query_text, &p.ref_text])));
    template
        .replace("{property}", property)
        .replace("{examples}", &example_rows.join("\n"))
        .replace("{pairs}", &pair_rows.join("\n"))
}

fn clean_field(s: &str) -> &str {
    s.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim()
}

fn is_header(line: &str) -> bool {
    let fields: Vec<String> = line.split(',').map(|f| clean_field(f).to_ascii_lowercase()).collect();
    fields.len() == 3 && fields.iter().zip(RESPONSE_HEADER).all(|(f, h)| f == h)
}

/// Extracts `(molecule_a, molecule_b, is_a_greater)` rows from a model reply.
///
/// Rows are read from the first header line until a blank line or code
/// fence. Rows whose last field is not exactly `0` or `1`, or that do not
/// have three fields, are reported as `None`.
pub fn parse_response_rows(content: &str) -> Result<Vec<Option<(String, String, bool)>>> {
    let mut lines = content.lines();
    lines
        .by_ref()
        .find(|l| is_header(l))
        .ok_or_else(|| Error::MalformedResponse("no `molecule_a, molecule_b, is_a_greater` header".into()))?;
    let mut rows = Vec::new();
    for line in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("```") {
            break;
        }
        let fields: Vec<&str> = trimmed.split(',').map(clean_field).collect();
        let row = match fields.as_slice() {
            [a, b, flag] if !a.is_empty() && !b.is_empty() => match *flag {
                "1" => Some((a.to_string(), b.to_string(), true)),
                "0" => Some((a.to_string(), b.to_string(), false)),
                _ => None,
            },
            _ => None,
        };
        rows.push(row);
    }
    Ok(rows)
}

fn extract_content(response: &Value) -> Result<&str> {
    response
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::MalformedResponse("reply has no choices[0].message.content".into()))
}

/// Batched LLM ranker with an in-memory answer cache keyed by model,
/// property and pair texts.
pub struct LlmRanker {
    config: LlmRankerConfig,
    cache: Mutex<HashMap<[u8; 32], bool>>,
}

impl LlmRanker {
    pub fn new(config: LlmRankerConfig) -> Result<Self> {
        config.validate()?;
        Ok(LlmRanker {
            config,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &LlmRankerConfig {
        &self.config
    }

    fn cache_key(&self, pair: &LlmPair) -> [u8; 32] {
        let mut h = Sha256::new();
        for part in [
            &self.config.model_name,
            &self.config.property_description,
            &pair.query_text,
            &pair.ref_text,
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        h.finalize().into()
    }

    fn request_body(&self, batch: &[&LlmPair]) -> Value {
        let prompt = render_prompt(
            &self.config.prompt_template,
            &self.config.property_description,
            &self.config.examples,
            batch,
        );
        json!({
            "model": self.config.model_name,
            "temperature": 0,
            "messages": [{ "role": "user", "content": prompt }],
        })
    }

    /// Resolves whichever pairs of `batch` the reply answers unambiguously.
    fn resolve(batch: &[&LlmPair], content: &str) -> Vec<Option<bool>> {
        let rows = match parse_response_rows(content) {
            Ok(rows) => rows,
            Err(e) => {
                log::warn!("discarding reply: {e}");
                return vec![None; batch.len()];
            }
        };
        let mut answers: HashMap<(&str, &str), Vec<bool>> = HashMap::new();
        for (a, b, v) in rows.iter().flatten() {
            answers.entry((a.as_str(), b.as_str())).or_default().push(*v);
        }
        batch
            .iter()
            .map(|p| {
                let given = answers.get(&(p.query_text.as_str(), p.ref_text.as_str()))?;
                let first = given[0];
                given.iter().all(|&v| v == first).then_some(first)
            })
            .collect()
    }

    pub fn rank_pairs<T: ChatTransport + ?Sized>(&self, pairs: &[LlmPair], transport: &T) -> Result<LlmRankOutput> {
        if let Some(p) = pairs
            .iter()
            .find(|p| p.query_text.trim().is_empty() || p.ref_text.trim().is_empty())
        {
            return Err(Error::invalid(format!(
                "empty text in pair ({}, {})",
                p.query_id, p.ref_id
            )));
        }
        if pairs
            .iter()
            .any(|p| p.query_text.contains([',', '\n']) || p.ref_text.contains([',', '\n']))
        {
            return Err(Error::invalid("pair texts must not contain commas or newlines"));
        }
        let mut answers: Vec<Option<bool>> = {
            let cache = self.cache.lock().expect("cache lock");
            pairs.iter().map(|p| cache.get(&self.cache_key(p)).copied()).collect()
        };
        let mut pending: Vec<usize> = (0..pairs.len()).filter(|&i| answers[i].is_none()).collect();
        let mut requests = 0;

        for attempt in 0..=self.config.max_retries {
            if pending.is_empty() {
                break;
            }
            if attempt > 0 {
                log::info!(
                    "resubmitting {} unresolved pair(s), attempt {}",
                    pending.len(),
                    attempt + 1
                );
            }
            let batches: Vec<Vec<usize>> = pending.chunks(self.config.batch_size).map(<[usize]>::to_vec).collect();
            for wave in batches.chunks(self.config.max_in_flight) {
                let replies: Vec<Result<Value>> = std::thread::scope(|scope| {
                    let handles: Vec<_> = wave
                        .iter()
                        .map(|batch| {
                            let body = self.request_body(&batch.iter().map(|&i| &pairs[i]).collect::<Vec<_>>());
                            scope.spawn(move || transport.send(&body))
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| {
                            h.join()
                                .unwrap_or_else(|_| Err(Error::Transport("transport panicked".into())))
                        })
                        .collect()
                });
                requests += wave.len();
                for (batch, reply) in wave.iter().zip(replies) {
                    let reply = reply?;
                    let resolved = match extract_content(&reply) {
                        Ok(content) => Self::resolve(&batch.iter().map(|&i| &pairs[i]).collect::<Vec<_>>(), content),
                        Err(e) => {
                            log::warn!("{e}");
                            vec![None; batch.len()]
                        }
                    };
                    for (&i, answer) in batch.iter().zip(resolved) {
                        answers[i] = answer;
                    }
                }
            }
            pending.retain(|&i| answers[i].is_none());
        }

        {
            let mut cache = self.cache.lock().expect("cache lock");
            for (p, a) in pairs.iter().zip(&answers) {
                if let Some(v) = a {
                    cache.insert(self.cache_key(p), *v);
                }
            }
        }
        if !pending.is_empty() {
            log::warn!(
                "{} pair(s) unresolved after {} retries",
                pending.len(),
                self.config.max_retries
            );
        }
        let outcomes = pairs
            .iter()
            .zip(&answers)
            .filter_map(|(p, a)| a.map(|v| ComparisonOutcome::new(&*p.query_id, &*p.ref_id, v)))
            .collect();
        Ok(LlmRankOutput {
            outcomes,
            failures: pending,
            requests,
        })
    }
}

/// One-shot convenience wrapper around [`LlmRanker::rank_pairs`].
pub fn llm_rank_batch<T: ChatTransport + ?Sized>(
    pairs: &[LlmPair],
    config: &LlmRankerConfig,
    transport: &T,
) -> Result<LlmRankOutput> {
    LlmRanker::new(config.clone())?.rank_pairs(pairs, transport)
}

/// Serves recorded replies keyed by the exact request body.
///
/// Fixture format: JSON lines `{"request": {...}, "response": {...}}`.
#[derive(Debug, Clone, Default)]
pub struct ReplayTransport {
    replies: HashMap<String, Value>,
}

impl ReplayTransport {
    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut replies = HashMap::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<replay fixture>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: "<replay fixture>".into(),
                line: n as u64 + 1,
                message: e.to_string(),
            })?;
            let (Some(req), Some(resp)) = (entry.get("request"), entry.get("response")) else {
                return Err(Error::Parse {
                    path: "<replay fixture>".into(),
                    line: n as u64 + 1,
                    message: "expected `request` and `response` fields".into(),
                });
            };
            replies.insert(req.to_string(), resp.clone());
        }
        Ok(ReplayTransport { replies })
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

impl ChatTransport for ReplayTransport {
    fn send(&self, request: &Value) -> Result<Value> {
        self.replies
            .get(&request.to_string())
            .cloned()
            .ok_or_else(|| Error::Transport("no recorded reply for request".into()))
    }
}

/// Wraps a transport and keeps every exchange for later replay.
pub struct RecordingTransport<T> {
    inner: T,
    log: Mutex<Vec<(Value, Value)>>,
}

impl<T: ChatTransport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    /// Writes the exchanges in a stable order (sorted by request text).
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        let mut entries: Vec<(String, String)> = self
            .log
            .lock()
            .expect("log lock")
            .iter()
            .map(|(req, resp)| (req.to_string(), json!({ "request": req, "response": resp }).to_string()))
            .collect();
        entries.sort();
        for (_, line) in entries {
            writeln!(writer, "{line}").map_err(|e| Error::io("<replay fixture>", e))?;
        }
        Ok(())
    }
}

impl<T: ChatTransport> ChatTransport for RecordingTransport<T> {
    fn send(&self, request: &Value) -> Result<Value> {
        let reply = self.inner.send(request)?;
        self.log
            .lock()
            .expect("log lock")
            .push((request.clone(), reply.clone()));
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;

    struct FnTransport<F>(F);

    impl<F: Fn(&Value) -> Result<Value> + Sync> ChatTransport for FnTransport<F> {
        fn send(&self, request: &Value) -> Result<Value> {
            (self.0)(request)
        }
    }

    fn reply(content: &str) -> Value {
        json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] })
    }

    fn pairs(n: usize) -> Vec<LlmPair> {
        (0..n)
            .map(|i| LlmPair {
                query_id: "q".into(),
                ref_id: format!("r{i}"),
                query_text: "CCO".into(),
                ref_text: format!("C{}", "C".repeat(i)),
            })
            .collect()
    }

    /// Reads the pair rows back out of a rendered prompt.
    fn prompt_pairs(request: &Value) -> Vec<(String, String)> {
        let prompt = request["messages"][0]["content"].as_str().unwrap();
        let tail = prompt.split("molecule_a,molecule_b\n").last().unwrap();
        tail.lines()
            .take_while(|l| !l.trim().is_empty())
            .map(|l| {
                let mut it = l.split(',');
                (it.next().unwrap().to_string(), it.next().unwrap().to_string())
            })
            .collect()
    }

    fn config() -> LlmRankerConfig {
        LlmRankerConfig {
            property_description: "lipophilicity".into(),
            batch_size: 3,
            ..LlmRankerConfig::default()
        }
    }

    #[test]
    fn template_placeholders_required() {
        let mut cfg = config();
        cfg.prompt_template = "{property} {pairs}".into();
        assert!(cfg.validate().is_err());
        assert!(config().validate().is_ok());
    }

    #[test]
    fn all_ones_means_query_above() {
        let t = FnTransport(|req: &Value| {
            let rows: Vec<String> = prompt_pairs(req).iter().map(|(a, b)| format!("{a}, {b}, 1")).collect();
            Ok(reply(&format!(
                "molecule_a, molecule_b, is_a_greater\n{}",
                rows.join("\n")
            )))
        });
        let out = llm_rank_batch(&pairs(7), &config(), &t).unwrap();
        assert_eq!(out.outcomes.len(), 7);
        assert!(out.outcomes.iter().all(|o| o.query_above));
        assert!(out.failures.is_empty());
        assert_eq!(out.requests, 3);
    }

    #[test]
    fn malformed_row_is_resubmitted() {
        let calls = AtomicUsize::new(0);
        let t = FnTransport(|req: &Value| {
            let first = calls.fetch_add(1, Ordering::SeqCst) == 0;
            let rows: Vec<String> = prompt_pairs(req)
                .iter()
                .enumerate()
                .map(|(i, (a, b))| {
                    if first && i == 1 {
                        format!("{a}, {b}, maybe")
                    } else {
                        format!("{a}, {b}, 0")
                    }
                })
                .collect();
            Ok(reply(&format!(
                "Sure!\n```csv\nmolecule_a, molecule_b, is_a_greater\n{}\n```",
                rows.join("\n")
            )))
        });
        let cfg = LlmRankerConfig {
            max_in_flight: 1,
            ..config()
        };
        let out = llm_rank_batch(&pairs(3), &cfg, &t).unwrap();
        assert_eq!(out.outcomes.len(), 3);
        assert_eq!(out.requests, 2);
        assert!(out.outcomes.iter().all(|o| !o.query_above));
        assert_eq!(out.outcomes[1].ref_id, "r1");
    }

    #[test]
    fn persistent_garbage_becomes_failure() {
        let t = FnTransport(|_: &Value| Ok(reply("I cannot help with that.")));
        let out = llm_rank_batch(&pairs(2), &config(), &t).unwrap();
        assert!(out.outcomes.is_empty());
        assert_eq!(out.failures, vec![0, 1]);
        assert_eq!(out.requests, 1 + config().max_retries);
    }

    #[test]
    fn contradictory_rows_are_dropped() {
        let t = FnTransport(|_: &Value| Ok(reply("molecule_a,molecule_b,is_a_greater\nCCO,C,1\nCCO,C,0\nCCO,CC,1")));
        let cfg = LlmRankerConfig {
            max_retries: 0,
            ..config()
        };
        let out = llm_rank_batch(&pairs(2), &cfg, &t).unwrap();
        assert_eq!(out.outcomes, vec![ComparisonOutcome::new("q", "r1", true)]);
        assert_eq!(out.failures, vec![0]);
    }

    #[test]
    fn auth_and_transport_errors_propagate() {
        let t = FnTransport(|_: &Value| Err(Error::Auth("401".into())));
        assert!(matches!(llm_rank_batch(&pairs(2), &config(), &t), Err(Error::Auth(_))));
        let t = FnTransport(|_: &Value| Err(Error::Transport("connection reset".into())));
        assert!(matches!(
            llm_rank_batch(&pairs(2), &config(), &t),
            Err(Error::Transport(_))
        ));
    }

    #[test]
    fn reply_without_content_is_retried() {
        let calls = AtomicUsize::new(0);
        let t = FnTransport(|req: &Value| {
            if calls.fetch_add(1, Ordering::SeqCst) == 0 {
                return Ok(json!({ "error": "overloaded" }));
            }
            let rows: Vec<String> = prompt_pairs(req).iter().map(|(a, b)| format!("{a},{b},1")).collect();
            Ok(reply(&format!(
                "molecule_a,molecule_b,is_a_greater\n{}",
                rows.join("\n")
            )))
        });
        let out = llm_rank_batch(&pairs(2), &config(), &t).unwrap();
        assert_eq!(out.outcomes.len(), 2);
    }

    #[test]
    fn cache_avoids_repeat_requests() {
        let calls = AtomicUsize::new(0);
        let t = FnTransport(|req: &Value| {
            calls.fetch_add(1, Ordering::SeqCst);
            let rows: Vec<String> = prompt_pairs(req).iter().map(|(a, b)| format!("{a},{b},1")).collect();
            Ok(reply(&format!(
                "molecule_a,molecule_b,is_a_greater\n{}",
                rows.join("\n")
            )))
        });
        let ranker = LlmRanker::new(config()).unwrap();
        ranker.rank_pairs(&pairs(3), &t).unwrap();
        let again = ranker.rank_pairs(&pairs(3), &t).unwrap();
        assert_eq!(again.requests, 0);
        assert_eq!(again.outcomes.len(), 3);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn rejects_texts_that_break_csv() {
        let mut p = pairs(1);
        p[0].ref_text = "a,b".into();
        let t = FnTransport(|_: &Value| Ok(reply("")));
        assert!(llm_rank_batch(&p, &config(), &t).is_err());
        p[0].ref_text = "  ".into();
        assert!(llm_rank_batch(&p, &config(), &t).is_err());
    }

    #[test]
    fn record_then_replay_is_identical() {
        let live = FnTransport(|req: &Value| {
            let rows: Vec<String> = prompt_pairs(req)
                .iter()
                .map(|(a, b)| format!("{a},{b},{}", (b.len() % 2)))
                .collect();
            Ok(reply(&format!(
                "molecule_a,molecule_b,is_a_greater\n{}",
                rows.join("\n")
            )))
        });
        let recorder = RecordingTransport::new(live);
        let first = llm_rank_batch(&pairs(8), &config(), &recorder).unwrap();
        let mut fixture = Vec::new();
        recorder.write_jsonl(&mut fixture).unwrap();
        let replay = ReplayTransport::from_jsonl(fixture.as_slice()).unwrap();
        assert_eq!(replay.len(), 3);
        let second = llm_rank_batch(&pairs(8), &config(), &replay).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn parse_rows_requires_header() {
        assert!(parse_response_rows("a,b,1").is_err());
        let rows =
            parse_response_rows("x\n\"molecule_a\", \"molecule_b\", \"is_a_greater\"\n\"A\",\"B\",\"1\"\nA,B\n\nC,D,0")
                .unwrap();
        assert_eq!(rows, vec![Some(("A".into(), "B".into(), true)), None]);
    }
}
