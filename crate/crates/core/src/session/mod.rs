//! Standard views, acquisition grading, session logs, questionnaires and study statistics.

mod grading;
mod log;
mod questionnaire;
mod report;
mod stats;
mod views;

pub use grading::{
    format_percent, grade_acquisition, grade_errors, summarize_grades, Grade, GradeCounts,
    GradeRecord, GradeSummary, Operator, FORCE_SLACK,
};
pub use log::{append_event, load_session, EventKind, SessionEvent, SessionLog, SessionWriter};
pub use questionnaire::{
    summarize_questionnaire, AnswerStats, Question, QuestionnaireResponse, QuestionnaireSchema,
    QuestionnaireSummary, RobotVersion, ScaleAnchor, MAX_ANSWER, QUESTIONNAIRE_TOML,
    QUESTION_COUNT,
};
pub use report::{CommandLine, Comparison, GradeTable, SafetyLine, SessionReport};
pub use stats::{compare_proportions, ProportionTest};
pub use views::{load_views, standard_views, Region, StandardView, ViewName, VIEWS_TOML};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("event tick {got} is earlier than the last logged tick {last}")]
    TickRegression { last: u64, got: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Io(String),
    #[error("volunteer {volunteer}: Q{question} answer {value} is outside 0..=4")]
    InvalidAnswer {
        volunteer: String,
        question: usize,
        value: u8,
    },
    #[error("a row or column of the 2x2 table is empty")]
    DegenerateTable,
    #[error("invalid view: {0}")]
    InvalidView(String),
    #[error("{0}")]
    InvalidArgument(String),
}
