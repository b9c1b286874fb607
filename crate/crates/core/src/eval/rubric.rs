use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// The fifteen named sub-criteria, five per criterion.
pub const SUB_CRITERIA: [&str; 15] = [
    "Directness",
    "Conciseness",
    "Contextual Awareness",
    "Detail Tailoring",
    "Topic Alignment",
    "Factual Correctness",
    "Acknowledgment of Limitations",
    "Logical Consistency",
    "Completeness",
    "Information Source",
    "Clarity",
    "Empathy and Tone",
    "Follow-Up",
    "Error Correction",
    "Source Citation",
];

const REQUIRED_COLUMNS: [&str; 5] = ["question_id", "system", "relevance", "accuracy", "helpfulness"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Relevance,
    Accuracy,
    Helpfulness,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Relevance, Criterion::Accuracy, Criterion::Helpfulness];

    /// Row label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Criterion::Relevance => "Relevancy",
            Criterion::Accuracy => "Accuracy",
            Criterion::Helpfulness => "Helpfulness",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Criterion::Relevance => "relevance",
            Criterion::Accuracy => "accuracy",
            Criterion::Helpfulness => "helpfulness",
        }
    }

    pub fn sub_criteria(self) -> &'static [&'static str] {
        match self {
            Criterion::Relevance => &SUB_CRITERIA[0..5],
            Criterion::Accuracy => &SUB_CRITERIA[5..10],
            Criterion::Helpfulness => &SUB_CRITERIA[10..15],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RubricError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("line {line}: {criterion} score {value} for question {question_id} is outside 1..=5")]
    OutOfRange {
        line: u64,
        question_id: String,
        criterion: &'static str,
        value: i64,
    },
    #[error("line {line}: unknown sub-criterion {key:?}")]
    UnknownSubCriterion { line: u64, key: String },
    #[error("duplicate score for question {question_id} and system {system}")]
    Duplicate { question_id: String, system: String },
    #[error("no scores for system {0}")]
    NoScores(String),
    #[error("the comparison system has no scores")]
    EmptySystem,
    #[error("unsupported score file {0}: expected .csv or .jsonl")]
    UnsupportedFormat(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricScore {
    pub question_id: String,
    pub system: String,
    pub relevance: u8,
    pub accuracy: u8,
    pub helpfulness: u8,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
}

impl RubricScore {
    pub fn score(&self, c: Criterion) -> u8 {
        match c {
            Criterion::Relevance => self.relevance,
            Criterion::Accuracy => self.accuracy,
            Criterion::Helpfulness => self.helpfulness,
        }
    }

    /// `relevance / accuracy / helpfulness`, e.g. `5 / 5 / 4`.
    pub fn rating(&self) -> String {
        format!("{} / {} / {}", self.relevance, self.accuracy, self.helpfulness)
    }
}

fn check_score(line: u64, question_id: &str, criterion: Criterion, value: i64) -> Result<u8, RubricError> {
    if (1..=5).contains(&value) {
        Ok(value as u8)
    } else {
        Err(RubricError::OutOfRange {
            line,
            question_id: question_id.to_string(),
            criterion: criterion.key(),
            value,
        })
    }
}

fn check_notes(line: u64, notes: &BTreeMap<String, String>) -> Result<(), RubricError> {
    match notes.keys().find(|k| !SUB_CRITERIA.contains(&k.as_str())) {
        Some(key) => Err(RubricError::UnknownSubCriterion {
            line,
            key: key.clone(),
        }),
        None => Ok(()),
    }
}

fn reject_duplicates(rows: &[RubricScore]) -> Result<(), RubricError> {
    let mut seen = HashSet::new();
    for r in rows {
        if !seen.insert((r.question_id.as_str(), r.system.as_str())) {
            return Err(RubricError::Duplicate {
                question_id: r.question_id.clone(),
                system: r.system.clone(),
            });
        }
    }
    Ok(())
}

/// Parses `question_id,system,relevance,accuracy,helpfulness` plus optional
/// `question`, `response` and sub-criterion note columns.
pub fn parse_csv(text: &str) -> Result<Vec<RubricScore>, RubricError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| RubricError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut required = [0usize; 5];
    for (slot, name) in required.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = column(name).ok_or_else(|| RubricError::MissingColumn(name.to_string()))?;
    }
    let question_col = column("question");
    let response_col = column("response");
    let mut note_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if required.contains(&i) || Some(i) == question_col || Some(i) == response_col {
            continue;
        }
        if !SUB_CRITERIA.contains(&h) {
            return Err(RubricError::UnknownSubCriterion {
                line: 1,
                key: h.to_string(),
            });
        }
        note_cols.push((i, h.to_string()));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| RubricError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let question_id = field(required[0]).to_string();
        let number = |i: usize, c: Criterion| -> Result<u8, RubricError> {
            let raw = field(i);
            let value: i64 = raw.parse().map_err(|_| RubricError::Parse {
                line,
                message: format!("{} score {raw:?} is not an integer", c.key()),
            })?;
            check_score(line, &question_id, c, value)
        };
        let score = RubricScore {
            relevance: number(required[2], Criterion::Relevance)?,
            accuracy: number(required[3], Criterion::Accuracy)?,
            helpfulness: number(required[4], Criterion::Helpfulness)?,
            system: field(required[1]).to_string(),
            notes: note_cols
                .iter()
                .filter(|(i, _)| !field(*i).is_empty())
                .map(|(i, name)| (name.clone(), field(*i).to_string()))
                .collect(),
            question: question_col.map(field).filter(|s| !s.is_empty()).map(str::to_string),
            response: response_col.map(field).filter(|s| !s.is_empty()).map(str::to_string),
            question_id,
        };
        if score.question_id.is_empty() || score.system.is_empty() {
            return Err(RubricError::Parse {
                line,
                message: "question_id and system must not be empty".into(),
            });
        }
        rows.push(score);
    }
    reject_duplicates(&rows)?;
    Ok(rows)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    question_id: String,
    system: String,
    relevance: i64,
    accuracy: i64,
    helpfulness: i64,
    #[serde(default)]
    notes: BTreeMap<String, String>,
    #[serde(default)]
    question: Option<String>,
    #[serde(default)]
    response: Option<String>,
}

/// One JSON object per line with the same fields as the CSV form.
pub fn parse_jsonl(text: &str) -> Result<Vec<RubricScore>, RubricError> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(raw).map_err(|e| RubricError::Parse {
            line,
            message: e.to_string(),
        })?;
        check_notes(line, &row.notes)?;
        rows.push(RubricScore {
            relevance: check_score(line, &row.question_id, Criterion::Relevance, row.relevance)?,
            accuracy: check_score(line, &row.question_id, Criterion::Accuracy, row.accuracy)?,
            helpfulness: check_score(line, &row.question_id, Criterion::Helpfulness, row.helpfulness)?,
            question_id: row.question_id,
            system: row.system,
            notes: row.notes,
            question: row.question,
            response: row.response,
        });
    }
    reject_duplicates(&rows)?;
    Ok(rows)
}

/// Loads a `.csv` or `.jsonl` score file.
pub fn load_scores(path: &Path) -> Result<Vec<RubricScore>, RubricError> {
    let text = std::fs::read_to_string(path).map_err(|source| RubricError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("csv") => parse_csv(&text),
        Some("jsonl") | Some("ndjson") => parse_jsonl(&text),
        _ => Err(RubricError::UnsupportedFormat(path.display().to_string())),
    }
}

/// An exact mean of integer scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mean {
    pub sum: u64,
    pub count: u64,
}

impl Mean {
    /// The mean in hundredths, rounded half up.
    pub fn hundredths(&self) -> u64 {
        (200 * self.sum + self.count) / (2 * self.count)
    }

    pub fn value(&self) -> f64 {
        self.hundredths() as f64 / 100.0
    }
}

/// Two decimals, e.g. `4.19`.
impl fmt::Display for Mean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.hundredths();
        write!(f, "{}.{:02}", h / 100, h % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemMeans {
    pub system: String,
    pub count: u64,
    pub means: BTreeMap<Criterion, Mean>,
}

impl SystemMeans {
    pub fn mean(&self, c: Criterion) -> Mean {
        self.means[&c]
    }
}

/// Per-criterion means over every score for `system`.
pub fn aggregate(scores: &[RubricScore], system: &str) -> Result<SystemMeans, RubricError> {
    let rows: Vec<&RubricScore> = scores.iter().filter(|s| s.system == system).collect();
    if rows.is_empty() {
        return Err(RubricError::NoScores(system.to_string()));
    }
    let count = rows.len() as u64;
    let means = Criterion::ALL
        .iter()
        .map(|&c| {
            let sum = rows.iter().map(|r| u64::from(r.score(c))).sum();
            (c, Mean { sum, count })
        })
        .collect();
    Ok(SystemMeans {
        system: system.to_string(),
        count,
        means,
    })
}

/// System labels in first-appearance order.
pub fn systems(scores: &[RubricScore]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in scores {
        if !out.contains(&s.system) {
            out.push(s.system.clone());
        }
    }
    out
}
