//! Text and JSON rendering of a checklist run, and the exit code.
//!
//! JSON objects are emitted with sorted keys so identical runs give
//! byte-identical output.

use std::fmt::Write as _;

use serde::Serialize;

use crate::checklist::{ChecklistReport, ClaimResult, Verdict};
use crate::search::{render_survivors, SearchReport};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_OPEN: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

const SHOWN_SURVIVORS: usize = 12;

/// How a verdict-affecting discrepancy maps to the exit code.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyPolicy {
    Fail,
    #[default]
    Open,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Policy {
    pub strict: bool,
    pub discrepancy: DiscrepancyPolicy,
}

impl Policy {
    fn discrepancy_fails(&self) -> bool {
        self.strict || self.discrepancy == DiscrepancyPolicy::Fail
    }
}

pub fn exit_code(r: &ChecklistReport, p: Policy) -> i32 {
    r.conditions
        .iter()
        .map(|c| match c.verdict {
            Verdict::Pass => EXIT_PASS,
            Verdict::Fail => EXIT_FAIL,
            Verdict::Open => EXIT_OPEN,
            Verdict::Discrepancy if p.discrepancy_fails() => EXIT_FAIL,
            Verdict::Discrepancy => EXIT_OPEN,
        })
        .max_by_key(|c| match *c {
            EXIT_FAIL => 2,
            EXIT_OPEN => 1,
            _ => 0,
        })
        .unwrap_or(EXIT_PASS)
}

/// Canonical JSON: sorted keys, two-space indent, trailing newline.
pub fn to_canonical_json<T: Serialize>(v: &T) -> String {
    // serde_json's map is ordered by key unless `preserve_order` is enabled
    let value = serde_json::to_value(v).expect("report types serialize");
    let mut s = serde_json::to_string_pretty(&value).expect("values serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct Envelope<'a> {
    report: &'a ChecklistReport,
    policy: Policy,
    exit_code: i32,
    discrepancies: Vec<&'a ClaimResult>,
}

pub fn render_json(r: &ChecklistReport, p: Policy) -> String {
    to_canonical_json(&Envelope { report: r, policy: p, exit_code: exit_code(r, p), discrepancies: r.discrepancies().collect() })
}

fn claim_line(out: &mut String, indent: &str, c: &ClaimResult) {
    let mark = match c.agrees {
        Some(true) => "agrees",
        Some(false) if c.affects_verdict => "DISCREPANCY",
        Some(false) => "differs (informational)",
        None => "undetermined",
    };
    let _ = write!(out, "{indent}{}: claimed {}, derived {} [{mark}]", c.quantity, c.claimed, c.derived);
    if !c.note.is_empty() {
        let _ = write!(out, "; {}", c.note);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{indent}  quote: \"{}\"", c.quote);
}

pub fn render_text(r: &ChecklistReport, p: Policy) -> String {
    let mut out = String::new();
    let name = if r.scene.is_empty() { "(unnamed)" } else { &r.scene };
    let _ = writeln!(out, "scene {name} on {} over {}", r.threefold, r.surface);
    let checks: Vec<&str> = r.checks.iter().map(|c| c.name()).collect();
    let _ = writeln!(out, "checks: {}", if checks.is_empty() { "none".into() } else { checks.join(" ") });
    for c in &r.conditions {
        let _ = writeln!(out);
        let _ = writeln!(out, "{} {:<11} {}", c.id, c.verdict.to_string(), c.title);
        for s in &c.summary {
            let _ = writeln!(out, "    {s}");
        }
        for cl in &c.claims {
            claim_line(&mut out, "    ", cl);
        }
        let steps: usize = c.certificates.iter().map(|x| x.steps.len()).sum();
        let _ = writeln!(
            out,
            "    {} certificates, {steps} steps, {}",
            c.certificates.len(),
            if c.replayed { "replayed" } else { "REPLAY FAILED" }
        );
    }
    if !r.ledger_claims.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "cohomology claims");
        for cl in &r.ledger_claims {
            claim_line(&mut out, "    ", cl);
        }
    }
    if let Some(s) = &r.search {
        let _ = writeln!(out);
        out.push_str(&render_search(s));
    }
    let disc: Vec<&ClaimResult> = r.discrepancies().collect();
    let _ = writeln!(out);
    if !disc.is_empty() {
        let _ = writeln!(out, "discrepancies");
        for d in disc {
            let _ = writeln!(
                out,
                "    {}: claimed {} / derived {}{}",
                d.quantity,
                d.claimed,
                d.derived,
                if d.affects_verdict { "" } else { " (informational)" }
            );
        }
    }
    let code = exit_code(r, p);
    let _ = writeln!(
        out,
        "worst verdict: {}, exit {code}",
        r.worst().map_or("none".to_string(), |v| v.to_string())
    );
    out
}

pub fn render_search(s: &SearchReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "search for F with c2(F) = {}", s.target);
    let _ = writeln!(out, "    rank <= {}, box |parameter| <= {}", s.rank_max, s.box_size);
    for t in &s.completion.templates {
        let _ = writeln!(
            out,
            "    {}: {} parameters, {} of {} enumerated",
            t.template, t.parameters, t.enumerated, t.cardinality
        );
    }
    let _ = writeln!(
        out,
        "    {} of {} candidates enumerated ({})",
        s.completion.enumerated,
        s.completion.box_cardinality,
        if s.completion.complete { "complete" } else { "partial" }
    );
    let rej: Vec<String> = s.rejected.iter().map(|(k, v)| format!("{k} {v}")).collect();
    let _ = writeln!(out, "    rejected: {}", rej.join(", "));
    let _ = writeln!(out, "    Bogomolov value c2(F).Omega = {}", s.bogomolov_target);
    let _ = writeln!(out, "    {} survivors, {} certified stable", s.survivors.len(), s.certified_stable);
    let all = render_survivors(s);
    for line in all.lines().take(SHOWN_SURVIVORS) {
        let _ = writeln!(out, "      {line}");
    }
    if s.survivors.len() > SHOWN_SURVIVORS {
        let _ = writeln!(out, "      ... {} more (--emit-survivors writes the full list)", s.survivors.len() - SHOWN_SURVIVORS);
    }
    out
}
