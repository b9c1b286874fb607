use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chat::{ChatEngine, CitationRef, Message, SessionId};
use crate::ingest::{ChunkId, DocId};
use crate::store::CourseId;

/// The five conversational step kinds: establish, follow up, deepen, break, revisit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StepLabel {
    A,
    B,
    C,
    D,
    E,
}

impl StepLabel {
    pub const ALL: [StepLabel; 5] = [StepLabel::A, StepLabel::B, StepLabel::C, StepLabel::D, StepLabel::E];

    fn checks_retention(self) -> bool {
        matches!(self, StepLabel::B | StepLabel::C | StepLabel::E)
    }
}

impl fmt::Display for StepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextStep {
    pub label: StepLabel,
    pub question: String,
}

fn default_repetitions() -> u32 {
    5
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextScript {
    pub course_id: CourseId,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    pub steps: Vec<ContextStep>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid script: {0}")]
    Invalid(String),
}

impl ContextScript {
    pub fn validate(&self) -> Result<(), ScriptError> {
        if self.repetitions == 0 {
            return Err(ScriptError::Invalid("repetitions must be at least 1".into()));
        }
        if self.steps.is_empty() {
            return Err(ScriptError::Invalid("script has no steps".into()));
        }
        let mut seen_a = false;
        for (i, step) in self.steps.iter().enumerate() {
            if step.question.trim().is_empty() {
                return Err(ScriptError::Invalid(format!("step {} has an empty question", i + 1)));
            }
            match step.label {
                StepLabel::A => seen_a = true,
                l if l.checks_retention() && !seen_a => {
                    return Err(ScriptError::Invalid(format!(
                        "step {} ({l}) comes before any A step",
                        i + 1
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let script: ContextScript =
            serde_json::from_str(text).map_err(|e| ScriptError::Invalid(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

pub type TargetError = Box<dyn std::error::Error + Send + Sync>;

/// Anything that can hold a conversation about a course.
pub trait ChatTarget {
    fn start_session(&self, course_id: &CourseId) -> Result<String, TargetError>;
    fn ask(&self, session_id: &str, question: &str) -> Result<Message, TargetError>;
}

impl ChatTarget for ChatEngine {
    fn start_session(&self, course_id: &CourseId) -> Result<String, TargetError> {
        Ok(ChatEngine::start_session(self, course_id)?.to_string())
    }

    fn ask(&self, session_id: &str, question: &str) -> Result<Message, TargetError> {
        Ok(self.answer(&SessionId::new(session_id), question)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnTranscript {
    pub label: StepLabel,
    pub question: String,
    pub answer: String,
    pub citations: Vec<CitationRef>,
    pub retrieved_chunk_ids: Vec<ChunkId>,
    /// Distinct source documents of the retrieved chunks, sorted.
    pub sources: Vec<DocId>,
    /// B/C/E: whether any source matches the latest A step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retention: Option<bool>,
    /// D: whether the sources are disjoint from the latest A step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context_break: Option<bool>,
}

impl TurnTranscript {
    /// The machine check for this step, if it has one.
    pub fn signal(&self) -> Option<bool> {
        self.retention.or(self.context_break)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepetitionTranscript {
    pub repetition: u32,
    pub turns: Vec<TurnTranscript>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RepetitionTranscript {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSummary {
    pub label: StepLabel,
    pub answered: u32,
    /// Repetitions in which the step's signal was true.
    pub signal_true: u32,
    pub signal_checked: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextReport {
    pub course_id: CourseId,
    pub repetitions: Vec<RepetitionTranscript>,
}

fn sources_of(ids: &[ChunkId]) -> BTreeSet<DocId> {
    ids.iter().map(ChunkId::doc_id).collect()
}

/// Runs every repetition in a fresh session, one after another.
///
/// A failed turn ends its repetition; later repetitions still run.
pub fn run_context_script(script: &ContextScript, target: &dyn ChatTarget) -> Result<ContextReport, ScriptError> {
    script.validate()?;
    let mut repetitions = Vec::new();
    for rep in 1..=script.repetitions {
        let mut transcript = RepetitionTranscript {
            repetition: rep,
            turns: Vec::new(),
            error: None,
        };
        let session = match target.start_session(&script.course_id) {
            Ok(s) => s,
            Err(e) => {
                transcript.error = Some(format!("could not start a session: {e}"));
                repetitions.push(transcript);
                continue;
            }
        };
        let mut anchor: Option<BTreeSet<DocId>> = None;
        for step in &script.steps {
            let message = match target.ask(&session, &step.question) {
                Ok(m) => m,
                Err(e) => {
                    transcript.error = Some(format!("step {} failed: {e}", step.label));
                    break;
                }
            };
            let sources = sources_of(&message.retrieved_chunk_ids);
            let (retention, context_break) = match (step.label, &anchor) {
                (StepLabel::A, _) => (None, None),
                (StepLabel::D, Some(a)) => (None, Some(a.is_disjoint(&sources))),
                (l, Some(a)) if l.checks_retention() => (Some(!a.is_disjoint(&sources)), None),
                _ => (None, None),
            };
            if step.label == StepLabel::A {
                anchor = Some(sources.clone());
            }
            transcript.turns.push(TurnTranscript {
                label: step.label,
                question: step.question.clone(),
                answer: message.text,
                citations: message.citations,
                retrieved_chunk_ids: message.retrieved_chunk_ids,
                sources: sources.into_iter().collect(),
                retention,
                context_break,
            });
        }
        repetitions.push(transcript);
    }
    Ok(ContextReport {
        course_id: script.course_id.clone(),
        repetitions,
    })
}

impl ContextReport {
    pub fn total_turns(&self) -> usize {
        self.repetitions.iter().map(|r| r.turns.len()).sum()
    }

    /// Per-label tallies across repetitions, in A..E order.
    pub fn summary(&self) -> Vec<StepSummary> {
        StepLabel::ALL
            .iter()
            .filter_map(|&label| {
                let turns: Vec<&TurnTranscript> = self
                    .repetitions
                    .iter()
                    .flat_map(|r| r.turns.iter())
                    .filter(|t| t.label == label)
                    .collect();
                if turns.is_empty() {
                    return None;
                }
                let signals: Vec<bool> = turns.iter().filter_map(|t| t.signal()).collect();
                Some(StepSummary {
                    label,
                    answered: turns.len() as u32,
                    signal_true: signals.iter().filter(|&&s| s).count() as u32,
                    signal_checked: signals.len() as u32,
                })
            })
            .collect()
    }

    pub fn render_markdown(&self) -> String {
        let cell = |t: &str| t.replace('|', "\\|").replace('\n', "<br>");
        let mut out = format!("# Context script: course {}\n\n", self.course_id);
        out.push_str("| Step | Answered | Signal | True |\n|---|---|---|---|\n");
        for s in self.summary() {
            let kind = match s.label {
                StepLabel::A => "n/a",
                StepLabel::D => "break",
                _ => "retention",
            };
            let tally = if s.signal_checked == 0 {
                "n/a".to_string()
            } else {
                format!("{} / {}", s.signal_true, s.signal_checked)
            };
            out.push_str(&format!("| {} | {} | {kind} | {tally} |\n", s.label, s.answered));
        }
        for rep in &self.repetitions {
            out.push_str(&format!("\n## Repetition {}\n\n", rep.repetition));
            out.push_str("| Number | Question | Actual Response | Signal |\n|---|---|---|---|\n");
            for (i, t) in rep.turns.iter().enumerate() {
                let mut response = t.answer.clone();
                for c in &t.citations {
                    response.push('\n');
                    response.push_str(&c.to_string());
                }
                let signal = match t.signal() {
                    Some(true) => "yes",
                    Some(false) => "no",
                    None => "",
                };
                out.push_str(&format!(
                    "| {} ({}) | {} | {} | {signal} |\n",
                    i + 1,
                    t.label,
                    cell(&t.question),
                    cell(&response)
                ));
            }
            if let Some(e) = &rep.error {
                out.push_str(&format!("\nAborted: {}\n", cell(e)));
            }
        }
        out
    }

    pub fn render_json(&self) -> String {
        let value = serde_json::json!({
            "course_id": self.course_id,
            "summary": self.summary(),
            "repetitions": self.repetitions,
        });
        let mut s = serde_json::to_string_pretty(&value).expect("serializable");
        s.push('\n');
        s
    }
}
