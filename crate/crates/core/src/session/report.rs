use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::grading::{format_percent, summarize_grades, GradeCounts, GradeRecord, GradeSummary, Operator};
use super::log::{EventKind, SessionLog};
use super::questionnaire::{summarize_questionnaire, QuestionnaireSchema, QuestionnaireSummary};
use super::stats::{compare_proportions, ProportionTest};
use super::views::{Region, ViewName};
use super::SessionError;

/// Sonographer vs robot on one proportion; `None` for a degenerate table (p = 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub test: Option<ProportionTest>,
}

impl Comparison {
    pub fn p_value(&self) -> f64 {
        self.test.map_or(1.0, |t| t.p_value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradeTable {
    pub summary: GradeSummary,
    /// Good-or-acceptable over total.
    pub adequate: Option<Comparison>,
    /// Good over good-or-acceptable.
    pub good_given_adequate: Option<Comparison>,
}

impl GradeTable {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a GradeRecord>) -> Self {
        let summary = summarize_grades(records);
        let s = summary.get(Operator::Sonographer);
        let r = summary.get(Operator::Robot);
        let compare = |a: (usize, usize), b: (usize, usize)| -> Option<Comparison> {
            match compare_proportions(a.0 as u64, a.1 as u64, b.0 as u64, b.1 as u64) {
                Ok(t) => Some(Comparison { test: Some(t) }),
                Err(SessionError::DegenerateTable) => Some(Comparison { test: None }),
                Err(_) => None,
            }
        };
        Self {
            adequate: compare((s.adequate(), s.total), (r.adequate(), r.total)),
            good_given_adequate: compare((s.good, s.adequate()), (r.good, r.adequate())),
            summary,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandLine {
    pub tick: u64,
    pub kind: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetyLine {
    pub tick: u64,
    pub state: String,
    pub cause: String,
}

/// Everything `report` prints, also written as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub events: usize,
    pub first_tick: Option<u64>,
    pub last_tick: Option<u64>,
    pub telemetry_frames: usize,
    pub commands: Vec<CommandLine>,
    pub safety: Vec<SafetyLine>,
    pub grades: Vec<GradeRecord>,
    pub all_views: GradeTable,
    /// Liver, pancreas and aorta views only.
    pub upper_views: GradeTable,
    pub per_view: BTreeMap<ViewName, BTreeMap<Operator, GradeCounts>>,
    pub questionnaire: QuestionnaireSummary,
    pub questionnaire_answers: Vec<(String, String, Vec<u8>)>,
}

impl SessionReport {
    pub fn from_log(log: &SessionLog) -> Result<Self, SessionError> {
        let grades = log.grades()?;
        let responses = log.questionnaires()?;
        let text = |v: &serde_json::Value, key: &str| {
            v.get(key).and_then(|s| s.as_str()).unwrap_or("").to_string()
        };
        let commands = log
            .of_kind(EventKind::Command)
            .map(|e| CommandLine {
                tick: e.tick,
                kind: text(&e.payload, "kind"),
            })
            .collect();
        let safety = log
            .of_kind(EventKind::Safety)
            .map(|e| SafetyLine {
                tick: e.tick,
                state: text(&e.payload, "state"),
                cause: text(&e.payload, "cause"),
            })
            .collect();
        let mut per_view: BTreeMap<ViewName, BTreeMap<Operator, GradeCounts>> = BTreeMap::new();
        for g in &grades {
            per_view
                .entry(g.view)
                .or_default()
                .entry(g.operator)
                .or_default()
                .add(g.grade);
        }
        Ok(Self {
            events: log.len(),
            first_tick: log.events().first().map(|e| e.tick),
            last_tick: log.last_tick(),
            telemetry_frames: log.of_kind(EventKind::Telemetry).count(),
            commands,
            safety,
            all_views: GradeTable::from_records(&grades),
            upper_views: GradeTable::from_records(
                grades.iter().filter(|g| g.view.region() == Region::Upper),
            ),
            per_view,
            questionnaire: summarize_questionnaire(&responses)?,
            questionnaire_answers: responses
                .iter()
                .map(|r| (r.volunteer.clone(), r.robot.as_str().to_string(), r.answers.to_vec()))
                .collect(),
            grades,
        })
    }

    /// Plain-text rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let ticks = match (self.first_tick, self.last_tick) {
            (Some(a), Some(b)) => format!("ticks {a}..{b}"),
            _ => "no ticks".into(),
        };
        let _ = writeln!(out, "session: {} events, {ticks}, {} telemetry frames", self.events, self.telemetry_frames);

        let mut kinds: BTreeMap<&str, usize> = BTreeMap::new();
        for c in &self.commands {
            *kinds.entry(c.kind.as_str()).or_default() += 1;
        }
        let list: Vec<String> = kinds.iter().map(|(k, n)| format!("{k} {n}")).collect();
        if list.is_empty() {
            let _ = writeln!(out, "commands: 0");
        } else {
            let _ = writeln!(out, "commands: {} ({})", self.commands.len(), list.join(", "));
        }
        for c in &self.commands {
            let _ = writeln!(out, "  tick {:>6}  {}", c.tick, c.kind);
        }
        let _ = writeln!(out, "safety transitions: {}", self.safety.len());
        for s in &self.safety {
            let _ = writeln!(out, "  tick {:>6}  {:<14} {}", s.tick, s.state, s.cause);
        }

        if !self.grades.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "grades:");
            for g in &self.grades {
                let _ = writeln!(
                    out,
                    "  tick {:>6}  {:<11} {:<34} {:<10} pos {:.4} m  ori {:.4} rad  force {:.2} N",
                    g.tick, g.operator.as_str(), g.view.label(), g.grade.as_str(),
                    g.position_error, g.orientation_error, g.normal_force
                );
            }
        }
        render_table(&mut out, "image quality, all views", &self.all_views);
        render_table(&mut out, "image quality, liver/pancreas/aorta views", &self.upper_views);

        let schema = QuestionnaireSchema::bundled();
        for (version, stats) in &self.questionnaire.versions {
            let n = stats.first().map_or(0, |s| s.n);
            let _ = writeln!(out);
            let _ = writeln!(out, "questionnaire {} (N={n})", version.as_str());
            let _ = writeln!(out, "  {:<18} {:>3} {:>3} {:>6} {:>3} {:>3}  counts 0/1/2/3/4", "question", "min", "q1", "median", "q3", "max");
            for (q, s) in schema.questions.iter().zip(stats) {
                let counts: Vec<String> = s.counts.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(
                    out,
                    "  {:<18} {:>3} {:>3} {:>6} {:>3} {:>3}  {}",
                    format!("{} {}", q.id, q.topic), s.min, s.q1, s.median, s.q3, s.max, counts.join("/")
                );
            }
        }
        if !self.questionnaire_answers.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "questionnaire answers (Q1..Q7):");
            for (volunteer, robot, answers) in &self.questionnaire_answers {
                let a: Vec<String> = answers.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "  {volunteer:<12} {robot}  {}", a.join(" "));
            }
        }
        out
    }
}

fn render_table(out: &mut String, title: &str, table: &GradeTable) {
    let _ = writeln!(out);
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "  {:<12} {:>5} {:>5} {:>10} {:>5} {:>16} {:>23}",
        "operator", "total", "good", "acceptable", "poor", "good+acceptable", "good/(good+acceptable)"
    );
    for op in Operator::ALL {
        let c = table.summary.get(op);
        let _ = writeln!(
            out,
            "  {:<12} {:>5} {:>5} {:>10} {:>5} {:>16} {:>23}",
            op.as_str(),
            c.total,
            c.good,
            c.acceptable,
            c.poor,
            format_percent(c.adequate_fraction()),
            format_percent(c.good_fraction())
        );
    }
    for (label, cmp) in [
        ("good+acceptable", &table.adequate),
        ("good/(good+acceptable)", &table.good_given_adequate),
    ] {
        match cmp {
            Some(Comparison { test: Some(t) }) => {
                let _ = writeln!(out, "  {label}: chi-square {:.6}, p = {:.3e}", t.chi_square, t.p_value);
            }
            Some(Comparison { test: None }) => {
                let _ = writeln!(out, "  {label}: degenerate table, p = 1");
            }
            None => {}
        }
    }
}
