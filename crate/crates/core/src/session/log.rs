use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::grading::GradeRecord;
use super::questionnaire::QuestionnaireResponse;
use super::SessionError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Command,
    Telemetry,
    Grade,
    Safety,
    Questionnaire,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Command => "command",
            EventKind::Telemetry => "telemetry",
            EventKind::Grade => "grade",
            EventKind::Safety => "safety",
            EventKind::Questionnaire => "questionnaire",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEvent {
    pub tick: u64,
    pub kind: EventKind,
    pub payload: Value,
}

impl SessionEvent {
    pub fn new(tick: u64, kind: EventKind, payload: impl Serialize) -> Self {
        Self {
            tick,
            kind,
            payload: serde_json::to_value(payload).expect("payload serializes"),
        }
    }

    pub fn grade(record: &GradeRecord) -> Self {
        Self::new(record.tick, EventKind::Grade, record)
    }

    pub fn questionnaire(tick: u64, response: &QuestionnaireResponse) -> Self {
        Self::new(tick, EventKind::Questionnaire, response)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

/// Append-only event log with non-decreasing ticks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionLog {
    events: Vec<SessionEvent>,
}

impl SessionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_tick(&self) -> Option<u64> {
        self.events.last().map(|e| e.tick)
    }

    pub fn append(&mut self, event: SessionEvent) -> Result<(), SessionError> {
        if let Some(last) = self.last_tick() {
            if event.tick < last {
                return Err(SessionError::TickRegression {
                    last,
                    got: event.tick,
                });
            }
        }
        self.events.push(event);
        Ok(())
    }

    pub fn write_ndjson<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.events {
            out.write_all(e.to_line().as_bytes())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    /// Parse NDJSON, enforcing tick order. Blank lines are skipped.
    pub fn read_ndjson<R: BufRead>(input: R) -> Result<Self, SessionError> {
        let mut log = Self::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| SessionError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let event = serde_json::from_str(&line).map_err(|e| SessionError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            log.append(event)?;
        }
        Ok(log)
    }

    pub fn from_ndjson(text: &str) -> Result<Self, SessionError> {
        Self::read_ndjson(text.as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), SessionError> {
        let file = std::fs::File::create(path).map_err(|e| SessionError::Io(format!("{}: {e}", path.display())))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_ndjson(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| SessionError::Io(e.to_string()))
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &SessionEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Grade records, in log order.
    pub fn grades(&self) -> Result<Vec<GradeRecord>, SessionError> {
        self.decode(EventKind::Grade)
    }

    /// Questionnaire responses, in log order.
    pub fn questionnaires(&self) -> Result<Vec<QuestionnaireResponse>, SessionError> {
        self.decode(EventKind::Questionnaire)
    }

    fn decode<T: serde::de::DeserializeOwned>(&self, kind: EventKind) -> Result<Vec<T>, SessionError> {
        self.of_kind(kind)
            .map(|e| {
                serde_json::from_value(e.payload.clone()).map_err(|err| SessionError::Parse {
                    line: 0,
                    message: format!("{kind} payload at tick {}: {err}", e.tick),
                })
            })
            .collect()
    }
}

/// Functional append: the log with `event` added.
pub fn append_event(mut log: SessionLog, event: SessionEvent) -> Result<SessionLog, SessionError> {
    log.append(event)?;
    Ok(log)
}

pub fn load_session(path: &Path) -> Result<SessionLog, SessionError> {
    let file = std::fs::File::open(path).map_err(|e| SessionError::Io(format!("{}: {e}", path.display())))?;
    SessionLog::read_ndjson(std::io::BufReader::new(file))
}

/// Streams events to a writer as they are appended, with the same tick check.
pub struct SessionWriter<W: Write> {
    out: W,
    last: Option<u64>,
    count: usize,
}

impl<W: Write> SessionWriter<W> {
    pub fn new(out: W) -> Self {
        Self {
            out,
            last: None,
            count: 0,
        }
    }

    pub fn append(&mut self, event: &SessionEvent) -> Result<(), SessionError> {
        if let Some(last) = self.last {
            if event.tick < last {
                return Err(SessionError::TickRegression {
                    last,
                    got: event.tick,
                });
            }
        }
        writeln!(self.out, "{}", event.to_line()).map_err(|e| SessionError::Io(e.to_string()))?;
        self.last = Some(event.tick);
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn flush(&mut self) -> Result<(), SessionError> {
        self.out.flush().map_err(|e| SessionError::Io(e.to_string()))
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
