//! Rubric aggregation and the five-step context protocol.
//!
//! Human scores are inputs; this module only validates, aggregates and
//! renders them. Context runs are scored by retrieved-source overlap.

mod context;
mod report;
mod rubric;

pub use context::{
    run_context_script, ChatTarget, ContextReport, ContextScript, ContextStep, RepetitionTranscript,
    ScriptError, StepLabel, StepSummary, TargetError, TurnTranscript,
};
pub use report::{compare_report, QuestionRow, RubricReport};
pub use rubric::{
    aggregate, load_scores, parse_csv, parse_jsonl, systems, Criterion, Mean, RubricError, RubricScore,
    SystemMeans, SUB_CRITERIA,
};
