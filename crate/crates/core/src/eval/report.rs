use serde::Serialize;

use super::rubric::{aggregate, systems, Criterion, Mean, RubricError, RubricScore, SystemMeans};

/// Aggregated scores for one or more systems plus per-question ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct RubricReport {
    pub systems: Vec<SystemMeans>,
    pub questions: Vec<QuestionRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionRow {
    pub question_id: String,
    pub question: Option<String>,
    /// One entry per system, aligned with [`RubricReport::systems`].
    pub ratings: Vec<Option<RubricScore>>,
}

/// Builds a side-by-side report. `baseline`, when given, must be non-empty.
pub fn compare_report(
    primary: &[RubricScore],
    baseline: Option<&[RubricScore]>,
) -> Result<RubricReport, RubricError> {
    if primary.is_empty() {
        return Err(RubricError::NoScores("primary".into()));
    }
    let mut all: Vec<RubricScore> = primary.to_vec();
    if let Some(b) = baseline {
        if b.is_empty() {
            return Err(RubricError::EmptySystem);
        }
        all.extend_from_slice(b);
    }
    // catches the same pair appearing once in each input
    let mut seen = std::collections::HashSet::new();
    for s in &all {
        if !seen.insert((&s.question_id, &s.system)) {
            return Err(RubricError::Duplicate {
                question_id: s.question_id.clone(),
                system: s.system.clone(),
            });
        }
    }

    let labels = systems(&all);
    let means = labels
        .iter()
        .map(|l| aggregate(&all, l))
        .collect::<Result<Vec<_>, _>>()?;

    let mut questions: Vec<QuestionRow> = Vec::new();
    for s in &all {
        let idx = labels.iter().position(|l| *l == s.system).expect("label collected");
        let row = match questions.iter_mut().position(|q| q.question_id == s.question_id) {
            Some(i) => &mut questions[i],
            None => {
                questions.push(QuestionRow {
                    question_id: s.question_id.clone(),
                    question: None,
                    ratings: vec![None; labels.len()],
                });
                questions.last_mut().expect("just pushed")
            }
        };
        if row.question.is_none() {
            row.question = s.question.clone();
        }
        row.ratings[idx] = Some(s.clone());
    }

    Ok(RubricReport {
        systems: means,
        questions,
    })
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace("\r\n", "<br>").replace('\n', "<br>")
}

impl RubricReport {
    pub fn render_markdown(&self) -> String {
        let mut out = String::new();
        let header = if self.systems.len() == 1 {
            vec![format!("{} Avg. Score", self.systems[0].system)]
        } else {
            self.systems.iter().map(|s| format!("{} Score", s.system)).collect()
        };
        out.push_str("| Criteria | ");
        out.push_str(&header.iter().map(|h| cell(h)).collect::<Vec<_>>().join(" | "));
        out.push_str(" |\n|---|");
        out.push_str(&"---|".repeat(self.systems.len()));
        out.push('\n');
        for c in Criterion::ALL {
            out.push_str("| ");
            out.push_str(c.label());
            for s in &self.systems {
                out.push_str(" | ");
                out.push_str(&s.mean(c).to_string());
            }
            out.push_str(" |\n");
        }
        out.push('\n');
        let counts: Vec<String> = self
            .systems
            .iter()
            .map(|s| format!("{}: {} questions", s.system, s.count))
            .collect();
        out.push_str(&counts.join(", "));
        out.push('\n');

        out.push_str("\n## Per-question ratings\n\n| Question |");
        for s in &self.systems {
            out.push_str(&format!(" {} Response | Rating |", cell(&s.system)));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|---|".repeat(self.systems.len()));
        out.push('\n');
        for q in &self.questions {
            let question = match &q.question {
                Some(text) => format!("{}: {}", q.question_id, text),
                None => q.question_id.clone(),
            };
            out.push_str("| ");
            out.push_str(&cell(&question));
            out.push_str(" |");
            for r in &q.ratings {
                match r {
                    Some(r) => out.push_str(&format!(
                        " {} | {} |",
                        cell(r.response.as_deref().unwrap_or("")),
                        r.rating()
                    )),
                    None => out.push_str("  | n/a |"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct JsonMean {
            mean: f64,
            display: String,
            sum: u64,
            count: u64,
        }
        let mean = |m: Mean| JsonMean {
            mean: m.value(),
            display: m.to_string(),
            sum: m.sum,
            count: m.count,
        };
        let systems: Vec<serde_json::Value> = self
            .systems
            .iter()
            .map(|s| {
                let mut criteria = serde_json::Map::new();
                for c in Criterion::ALL {
                    criteria.insert(
                        c.label().to_string(),
                        serde_json::to_value(mean(s.mean(c))).expect("serializable"),
                    );
                }
                serde_json::json!({
                    "system": s.system,
                    "count": s.count,
                    "criteria": criteria,
                })
            })
            .collect();
        let questions: Vec<serde_json::Value> = self
            .questions
            .iter()
            .map(|q| {
                let ratings: Vec<serde_json::Value> = q
                    .ratings
                    .iter()
                    .zip(&self.systems)
                    .filter_map(|(r, s)| {
                        r.as_ref().map(|r| {
                            serde_json::json!({
                                "system": s.system,
                                "relevance": r.relevance,
                                "accuracy": r.accuracy,
                                "helpfulness": r.helpfulness,
                                "rating": r.rating(),
                                "response": r.response,
                                "notes": r.notes,
                            })
                        })
                    })
                    .collect();
                serde_json::json!({
                    "question_id": q.question_id,
                    "question": q.question,
                    "ratings": ratings,
                })
            })
            .collect();
        serde_json::json!({ "systems": systems, "questions": questions })
    }

    pub fn render_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("serializable");
        s.push('\n');
        s
    }
}
