use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SessionError;

pub const QUESTIONNAIRE_TOML: &str = include_str!("../../assets/session/questionnaire.toml");

pub const QUESTION_COUNT: usize = 7;
pub const MAX_ANSWER: u8 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleAnchor {
    pub value: u8,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Question {
    pub id: String,
    pub topic: String,
    #[serde(default)]
    pub text: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionnaireSchema {
    pub scale: Vec<ScaleAnchor>,
    #[serde(rename = "question")]
    pub questions: Vec<Question>,
}

impl QuestionnaireSchema {
    pub fn bundled() -> Self {
        Self::from_toml_str(QUESTIONNAIRE_TOML).expect("bundled questionnaire is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SessionError> {
        let schema: Self =
            toml::from_str(text).map_err(|e| SessionError::InvalidArgument(e.to_string()))?;
        if schema.questions.len() != QUESTION_COUNT {
            return Err(SessionError::InvalidArgument(format!(
                "questionnaire needs {QUESTION_COUNT} questions, has {}",
                schema.questions.len()
            )));
        }
        let values: Vec<u8> = schema.scale.iter().map(|a| a.value).collect();
        if values != (0..=MAX_ANSWER).collect::<Vec<_>>() {
            return Err(SessionError::InvalidArgument(format!(
                "scale must list values 0..={MAX_ANSWER} in order"
            )));
        }
        Ok(schema)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobotVersion {
    V2,
    V3,
}

impl RobotVersion {
    pub fn as_str(self) -> &'static str {
        match self {
            RobotVersion::V2 => "v2",
            RobotVersion::V3 => "v3",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireResponse {
    pub volunteer: String,
    pub robot: RobotVersion,
    /// Answers to Q1..Q7, each 0..=4.
    pub answers: [u8; QUESTION_COUNT],
}

impl QuestionnaireResponse {
    pub fn validate(&self) -> Result<(), SessionError> {
        for (i, &a) in self.answers.iter().enumerate() {
            if a > MAX_ANSWER {
                return Err(SessionError::InvalidAnswer {
                    volunteer: self.volunteer.clone(),
                    question: i + 1,
                    value: a,
                });
            }
        }
        Ok(())
    }
}

/// Order statistics of one question's answers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerStats {
    pub n: usize,
    pub min: u8,
    /// Nearest-rank 25th percentile.
    pub q1: u8,
    /// Lower median for even counts.
    pub median: u8,
    /// Nearest-rank 75th percentile.
    pub q3: u8,
    pub max: u8,
    /// How many answered 0, 1, 2, 3, 4.
    pub counts: [usize; 5],
}

impl AnswerStats {
    /// `None` for an empty set.
    pub fn of(answers: &[u8]) -> Option<Self> {
        if answers.is_empty() {
            return None;
        }
        let mut sorted = answers.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let rank = |p: usize| sorted[(p * n).div_ceil(100).max(1) - 1];
        let mut counts = [0; 5];
        for &a in &sorted {
            counts[a as usize] += 1;
        }
        Some(Self {
            n,
            min: sorted[0],
            q1: rank(25),
            median: sorted[(n - 1) / 2],
            q3: rank(75),
            max: sorted[n - 1],
            counts,
        })
    }

    pub fn iqr(&self) -> u8 {
        self.q3 - self.q1
    }
}

/// Per robot version, one entry per question (Q1 first).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireSummary {
    pub versions: BTreeMap<RobotVersion, Vec<AnswerStats>>,
}

pub fn summarize_questionnaire<'a>(
    responses: impl IntoIterator<Item = &'a QuestionnaireResponse>,
) -> Result<QuestionnaireSummary, SessionError> {
    let mut grouped: BTreeMap<RobotVersion, Vec<Vec<u8>>> = BTreeMap::new();
    for r in responses {
        r.validate()?;
        let cols = grouped
            .entry(r.robot)
            .or_insert_with(|| vec![Vec::new(); QUESTION_COUNT]);
        for (col, &a) in cols.iter_mut().zip(&r.answers) {
            col.push(a);
        }
    }
    let versions = grouped
        .into_iter()
        .map(|(v, cols)| {
            let stats = cols
                .iter()
                .map(|c| AnswerStats::of(c).expect("non-empty group"))
                .collect();
            (v, stats)
        })
        .collect();
    Ok(QuestionnaireSummary { versions })
}
