//! ABX listening-test bookkeeping: manifest, stored responses and tallies.
//!
//! A session directory holds `manifest.json`, `trials/<id>/{x,a,b}.wav` and an
//! append-only `responses.jsonl`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESPONSES_FILE: &str = "responses.jsonl";
pub const DEFAULT_LISTENER: &str = "P1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    UnbiasedFirst,
    BiasedFirst,
}

impl Order {
    /// Which button holds the unbiased stimulus.
    pub fn unbiased_choice(self) -> Choice {
        match self {
            Order::UnbiasedFirst => Choice::A,
            Order::BiasedFirst => Choice::B,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stimulus {
    X,
    A,
    B,
}

impl Stimulus {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "x" => Some(Stimulus::X),
            "a" => Some(Stimulus::A),
            "b" => Some(Stimulus::B),
            _ => None,
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Stimulus::X => "x.wav",
            Stimulus::A => "a.wav",
            Stimulus::B => "b.wav",
        }
    }
}

/// One trial with its ground truth, as stored in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbxTrial {
    pub trial_id: String,
    pub clip_id: String,
    pub order: Order,
    pub theta_used: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<Choice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

impl AbxTrial {
    pub fn is_correct(&self, choice: Choice) -> bool {
        choice == self.order.unbiased_choice()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbxManifest {
    pub seed: u64,
    pub trials: Vec<AbxTrial>,
}

pub fn trial_id(index: usize) -> String {
    format!("t{index:04}")
}

/// One line of `responses.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResponse {
    pub listener: String,
    pub trial_id: String,
    pub choice: Choice,
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyCounts {
    pub true_count: usize,
    pub false_count: usize,
}

impl TallyCounts {
    pub fn answered(&self) -> usize {
        self.true_count + self.false_count
    }

    fn add(&mut self, correct: bool) {
        if correct {
            self.true_count += 1;
        } else {
            self.false_count += 1;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbxTally {
    pub listeners: BTreeMap<String, TallyCounts>,
    pub total: TallyCounts,
}

impl AbxTally {
    pub fn from_responses<'a>(responses: impl IntoIterator<Item = &'a StoredResponse>) -> Self {
        let mut t = AbxTally::default();
        for r in responses {
            t.listeners.entry(r.listener.clone()).or_default().add(r.correct);
            t.total.add(r.correct);
        }
        t
    }

    /// Listener columns with True/False rows and percentages.
    pub fn table(&self) -> String {
        let pct = |c: &TallyCounts, v: usize| {
            if c.answered() == 0 {
                "-".to_string()
            } else {
                format!("{v} ({:.2}%)", 100.0 * v as f64 / c.answered() as f64)
            }
        };
        let cols: Vec<(&str, &TallyCounts)> = self
            .listeners
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .chain([("Total", &self.total)])
            .collect();
        let mut out = String::new();
        let _ = write!(out, "{:<6}", "");
        for (name, _) in &cols {
            let _ = write!(out, "  {name:>16}");
        }
        out.push('\n');
        for (label, pick) in [("True", true), ("False", false)] {
            let _ = write!(out, "{label:<6}");
            for (_, c) in &cols {
                let v = if pick { c.true_count } else { c.false_count };
                let _ = write!(out, "  {:>16}", pct(c, v));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("unknown trial {0:?}")]
    UnknownTrial(String),
    #[error("listener {0:?} has not fetched the session yet")]
    SessionNotFetched(String),
    #[error("listener {listener:?} already answered trial {trial_id:?}")]
    DuplicateResponse { listener: String, trial_id: String },
    #[error("listener {0:?} has not finished the session")]
    Incomplete(String),
    #[error("response store: {0}")]
    Store(String),
}

/// Trial as shown to a listener: no order, no θ, no correctness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialView {
    pub trial_id: String,
    pub audio: StimulusUrls,
    pub answered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<Choice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusUrls {
    pub x: String,
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub listener: String,
    pub total: usize,
    pub answered: usize,
    pub trials: Vec<TrialView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseAck {
    pub trial_id: String,
    pub answered: usize,
    pub total: usize,
}

/// In-memory session state backed by the append-only response file.
#[derive(Debug)]
pub struct Session {
    dir: PathBuf,
    manifest: AbxManifest,
    index: BTreeMap<String, usize>,
    responses: Vec<StoredResponse>,
    fetched: BTreeSet<String>,
}

impl Session {
    pub fn open(dir: &Path) -> anyhow::Result<Self> {
        let manifest: AbxManifest = crate::report::read_json(&dir.join(MANIFEST_FILE))?;
        let index = manifest
            .trials
            .iter()
            .enumerate()
            .map(|(i, t)| (t.trial_id.clone(), i))
            .collect();
        let mut responses = Vec::new();
        let path = dir.join(RESPONSES_FILE);
        if path.exists() {
            for (i, line) in std::fs::read_to_string(&path)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let r: StoredResponse = serde_json::from_str(line)
                    .map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), i + 1))?;
                responses.push(r);
            }
        }
        Ok(Session {
            dir: dir.to_path_buf(),
            manifest,
            index,
            responses,
            fetched: BTreeSet::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &AbxManifest {
        &self.manifest
    }

    pub fn responses(&self) -> &[StoredResponse] {
        &self.responses
    }

    pub fn trial(&self, trial_id: &str) -> Option<&AbxTrial> {
        self.index.get(trial_id).map(|i| &self.manifest.trials[*i])
    }

    fn response_of(&self, listener: &str, trial_id: &str) -> Option<&StoredResponse> {
        self.responses
            .iter()
            .find(|r| r.listener == listener && r.trial_id == trial_id)
    }

    fn answered_by(&self, listener: &str) -> usize {
        self.responses.iter().filter(|r| r.listener == listener).count()
    }

    /// Marks `listener` as started and returns the sanitized trial list.
    pub fn view(&mut self, listener: &str) -> SessionView {
        self.fetched.insert(listener.to_string());
        let trials = self
            .manifest
            .trials
            .iter()
            .map(|t| {
                let r = self.response_of(listener, &t.trial_id);
                let id = &t.trial_id;
                TrialView {
                    trial_id: id.clone(),
                    audio: StimulusUrls {
                        x: format!("/audio/{id}/x"),
                        a: format!("/audio/{id}/a"),
                        b: format!("/audio/{id}/b"),
                    },
                    answered: r.is_some(),
                    choice: r.map(|r| r.choice),
                }
            })
            .collect();
        SessionView {
            listener: listener.to_string(),
            total: self.manifest.trials.len(),
            answered: self.answered_by(listener),
            trials,
        }
    }

    pub fn respond(&mut self, listener: &str, trial_id: &str, choice: Choice) -> Result<ResponseAck, SessionError> {
        if !self.fetched.contains(listener) {
            return Err(SessionError::SessionNotFetched(listener.to_string()));
        }
        let trial = self
            .trial(trial_id)
            .ok_or_else(|| SessionError::UnknownTrial(trial_id.to_string()))?;
        if self.response_of(listener, trial_id).is_some() {
            return Err(SessionError::DuplicateResponse {
                listener: listener.to_string(),
                trial_id: trial_id.to_string(),
            });
        }
        let stored = StoredResponse {
            listener: listener.to_string(),
            trial_id: trial_id.to_string(),
            choice,
            correct: trial.is_correct(choice),
        };
        let mut line = serde_json::to_string(&stored).map_err(|e| SessionError::Store(e.to_string()))?;
        line.push('\n');
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join(RESPONSES_FILE))
            .and_then(|mut f| f.write_all(line.as_bytes()))
            .map_err(|e| SessionError::Store(e.to_string()))?;
        self.responses.push(stored);
        Ok(ResponseAck {
            trial_id: trial_id.to_string(),
            answered: self.answered_by(listener),
            total: self.manifest.trials.len(),
        })
    }

    /// Listeners who fetched the session but have not answered every trial.
    pub fn unfinished(&self) -> Vec<String> {
        let total = self.manifest.trials.len();
        self.fetched
            .iter()
            .filter(|l| self.answered_by(l) < total)
            .cloned()
            .collect()
    }

    /// Tally over all stored responses. Refused while any listener who
    /// started in this process is still mid-session, since counts reveal
    /// correctness.
    pub fn tally(&self) -> Result<AbxTally, SessionError> {
        if let Some(l) = self.unfinished().into_iter().next() {
            return Err(SessionError::Incomplete(l));
        }
        Ok(AbxTally::from_responses(&self.responses))
    }
}
