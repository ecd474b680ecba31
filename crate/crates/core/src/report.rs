//! Structured check reports: ordered clauses with verdicts and exact values.

use std::fmt;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "SKIPPED",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Clause {
    /// Which construction the clause belongs to, e.g. `kernel` or `filtration`.
    pub anchor: String,
    pub clause: String,
    pub verdict: Verdict,
    /// Exact values and serialized objects, in insertion order.
    pub values: Vec<(String, String)>,
}

impl Clause {
    pub fn new(anchor: &str, clause: impl Into<String>, verdict: Verdict) -> Self {
        Clause {
            anchor: anchor.to_string(),
            clause: clause.into(),
            verdict,
            values: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.values.push((key.to_string(), value.into()));
        self
    }

    pub fn add(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.values.push((key.to_string(), value.into()));
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Report {
    pub clauses: Vec<Clause>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, clause: Clause) {
        self.clauses.push(clause);
    }

    pub fn pass(&mut self, anchor: &str, clause: impl Into<String>) -> &mut Clause {
        self.clauses
            .push(Clause::new(anchor, clause, Verdict::Pass));
        self.clauses.last_mut().unwrap()
    }

    pub fn fail(&mut self, anchor: &str, clause: impl Into<String>) -> &mut Clause {
        self.clauses
            .push(Clause::new(anchor, clause, Verdict::Fail));
        self.clauses.last_mut().unwrap()
    }

    pub fn check(&mut self, anchor: &str, clause: impl Into<String>, ok: bool) -> &mut Clause {
        let verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        self.clauses.push(Clause::new(anchor, clause, verdict));
        self.clauses.last_mut().unwrap()
    }

    pub fn extend(&mut self, other: Report) {
        self.clauses.extend(other.clauses);
    }

    pub fn is_ok(&self) -> bool {
        self.clauses.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| c.verdict == Verdict::Fail)
    }

    /// One JSON object per clause, one clause per line.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for clause in &self.clauses {
            let values: serde_json::Map<String, serde_json::Value> = clause
                .values
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect();
            let line = serde_json::json!({
                "anchor": clause.anchor,
                "clause": clause.clause,
                "verdict": clause.verdict,
                "values": values,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for clause in &self.clauses {
            writeln!(
                f,
                "{}: {} - {}",
                clause.anchor, clause.clause, clause.verdict
            )?;
            for (key, value) in &clause.values {
                if value.contains('\n') {
                    writeln!(f, "    {key}:")?;
                    for line in value.lines() {
                        writeln!(f, "      {line}")?;
                    }
                } else {
                    writeln!(f, "    {key} = {value}")?;
                }
            }
        }
        Ok(())
    }
}
