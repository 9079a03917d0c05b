//! The conditions on a rank-4 bundle `E = A' + B'` on a torus-fibred
//! threefold, each with a verdict and certificates.
//!
//! C1 `X` not simply connected, C2 `det E` trivial, C3 `chi(E) = 3`, C4
//! polystability, C5 untwisted pairings nonzero, C6 twisted pairings zero,
//! C7 the same for `E*`, C8 the `End E` pairing, C9 the anomaly class.

pub mod end;
pub mod pairing;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::Signed;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ledger::{Certificate, Interval, Ledger, Rule};
use crate::ring::{fmt_q_short, q, Geometry, GradedClass};
use crate::scene::{Check, ClaimDecl, Loaded, Quantity};
use crate::search::{self, nef_test, NefTest, SearchConfig, SearchReport};
use crate::sheaf::{parse_sheaf, twist_chern, Character, ChernData, LineBundle, SheafExpr};
use crate::stability::{self, check_polystable_sum, check_stable, hom_vanishing, slope, StabilityCertificate};

use self::end::{analyse_end, EndReport};
use self::pairing::{analyse, PairingReport, PairingValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Open,
    Discrepancy,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Open => "open",
            Verdict::Discrepancy => "discrepancy",
            Verdict::Fail => "fail",
        })
    }
}

/// A claimed value next to the derived one.
#[derive(Clone, Debug, Serialize)]
pub struct ClaimResult {
    pub quantity: String,
    pub claimed: String,
    pub derived: String,
    pub agrees: Option<bool>,
    pub quote: String,
    /// Characteristic-class claims decide verdicts; dimension claims are informational.
    pub affects_verdict: bool,
    pub note: String,
    pub certificate: Option<Certificate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionEntry {
    pub id: String,
    pub title: String,
    pub check: Check,
    pub verdict: Verdict,
    pub summary: Vec<String>,
    pub quotes: Vec<String>,
    pub claims: Vec<ClaimResult>,
    pub certificates: Vec<Certificate>,
    /// Every certificate above replays against the ledger.
    pub replayed: bool,
    pub detail: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChecklistReport {
    pub scene: String,
    pub surface: String,
    pub threefold: String,
    pub checks: Vec<Check>,
    pub conditions: Vec<ConditionEntry>,
    /// Claims not attached to a condition (cohomology dimensions).
    pub ledger_claims: Vec<ClaimResult>,
    pub search: Option<SearchReport>,
}

impl ChecklistReport {
    pub fn condition(&self, id: &str) -> Option<&ConditionEntry> {
        self.conditions.iter().find(|c| c.id == id)
    }

    /// Every claim that disagrees with the engine.
    pub fn discrepancies(&self) -> impl Iterator<Item = &ClaimResult> {
        self.conditions
            .iter()
            .flat_map(|c| c.claims.iter())
            .chain(&self.ledger_claims)
            .filter(|c| c.agrees == Some(false))
    }

    pub fn worst(&self) -> Option<Verdict> {
        self.conditions.iter().map(|c| c.verdict).max()
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Overrides the scene's check list.
    pub checks: Option<Vec<Check>>,
    pub stability_box: u32,
    pub search: Option<SearchConfig>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { checks: None, stability_box: stability::DEFAULT_BOX, search: None }
    }
}

pub const PI1_QUOTE: &str = "$X$ is not simply-connected";
pub const DET_QUOTE: &str = "$c_1(E)=0$; in fact $\\Lambda^4E\\cong\\OO_X$";
pub const CHI_QUOTE: &str = "the holomorphic Euler characteristic $\\chi(E)$ of $E$ equals 3";
pub const POLY_QUOTE: &str = "$E$ is slope-polystable";
pub const PAIRING_QUOTE: &str = "should be non-zero";
pub const TWISTED_QUOTE: &str = "vanishes for $\\alpha,\\,\\beta$ and $\\gamma$ non-trivial";
pub const DUAL_QUOTE: &str = "the last two conditions also hold with $E$ replaced by $E^*$";
pub const END_QUOTE: &str = "one can analyse the pairings";
pub const ANOMALY_QUOTE: &str = "$c_2(X)-c_2(E)$ is $c_2(F)$ for some slope-polystable bundle";
pub const OPEN_QUOTE: &str = "the last condition still eludes me";

/// `det` of a sheaf as a line bundle with its flat part.
pub fn det_line(e: &SheafExpr) -> Result<LineBundle> {
    let g = e.geometry();
    let trivial = || LineBundle::new(g.zero(1));
    let pow = |l: LineBundle, n: i64| LineBundle {
        c1: l.c1.scale(q(n)),
        character: l.character.pow(n),
    };
    Ok(match e {
        SheafExpr::Structure(_) | SheafExpr::Skyscraper { .. } | SheafExpr::End(_) => trivial(),
        SheafExpr::Line(l) => l.clone(),
        SheafExpr::Serre(s) => s.det.clone(),
        SheafExpr::Ideal { twist, .. } => det_line(twist)?,
        SheafExpr::Dual(a) => det_line(a)?.dual(),
        SheafExpr::DirectSum(a, b) => det_line(a)?.tensor(&det_line(b)?),
        SheafExpr::Tensor(a, b) => pow(det_line(a)?, b.rank()).tensor(&pow(det_line(b)?, a.rank())),
        SheafExpr::Lambda2(a) => pow(det_line(a)?, a.rank() - 1),
        SheafExpr::Pullback { inner, target } => {
            let d = det_line(inner)?;
            LineBundle {
                c1: target.pullback(&d.c1)?,
                character: Character::new_on(target, 0, 0, d.character.gamma_part())?,
            }
        }
        SheafExpr::SectionTwist(a, n) | SheafExpr::EllipticTwist(a, n) => {
            let label = if matches!(e, SheafExpr::SectionTwist(..)) { "S" } else { "wT" };
            let m = g.labelled(label).ok_or_else(|| Error::Input(format!("{label} twist on {}", g.name)))?;
            let d = det_line(a)?;
            LineBundle { c1: &d.c1 + &m.scale(q(n * a.rank())), character: d.character }
        }
    })
}

fn fmt_line(l: &LineBundle) -> String {
    let c = if l.c1.is_zero() { "O".to_string() } else { format!("O({})", l.c1) };
    if l.character.is_trivial() {
        c
    } else {
        format!("{c} (x) flat{}", l.character)
    }
}

fn entry(id: &str, title: &str, check: Check, quote: &str) -> ConditionEntry {
    ConditionEntry {
        id: id.into(),
        title: title.into(),
        check,
        verdict: Verdict::Open,
        summary: vec![],
        quotes: vec![quote.into()],
        claims: vec![],
        certificates: vec![],
        replayed: true,
        detail: serde_json::Value::Null,
    }
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Compares two classes coefficientwise and describes sign-only differences.
fn sign_note(claimed: &GradedClass, derived: &GradedClass) -> String {
    let x = claimed.geometry();
    let mut flipped = Vec::new();
    for k in 0..=x.dim() {
        for ((a, b), l) in claimed.part(k).iter().zip(derived.part(k)).zip(x.basis_labels(k)) {
            if a == b {
                continue;
            }
            if a.abs() != b.abs() {
                return String::new();
            }
            flipped.push(l);
        }
    }
    if flipped.is_empty() {
        String::new()
    } else {
        format!("same magnitudes; the sign differs on {}", flipped.join(", "))
    }
}

fn class_claim(c: &ClaimDecl, derived: &GradedClass, cert: Option<Certificate>) -> Result<ClaimResult> {
    let claimed = derived.geometry().parse_class(&c.value)?;
    let agrees = claimed == *derived;
    Ok(ClaimResult {
        quantity: c.quantity.to_string(),
        claimed: claimed.to_string(),
        derived: derived.to_string(),
        agrees: Some(agrees),
        quote: c.quote.clone(),
        affects_verdict: true,
        note: if agrees { String::new() } else { sign_note(&claimed, derived) },
        certificate: cert,
    })
}

fn int_claim(c: &ClaimDecl, derived: Option<String>, affects: bool, cert: Option<Certificate>) -> ClaimResult {
    let agrees = derived.as_ref().map(|d| *d == c.value);
    ClaimResult {
        quantity: c.quantity.to_string(),
        claimed: c.value.clone(),
        derived: derived.unwrap_or_else(|| "undetermined".into()),
        agrees,
        quote: c.quote.clone(),
        affects_verdict: affects,
        note: String::new(),
        certificate: cert,
    }
}

fn interval_text(i: &Interval) -> Option<String> {
    i.value().map(|v| v.to_string())
}

/// Applies a claim's outcome to a verdict that would otherwise be `base`.
fn with_claims(base: Verdict, claims: &[ClaimResult]) -> Verdict {
    if base == Verdict::Fail {
        return base;
    }
    if claims.iter().any(|c| c.affects_verdict && c.agrees == Some(false)) {
        return Verdict::Discrepancy;
    }
    base
}

struct Run<'a> {
    loaded: &'a mut Loaded,
    opts: &'a RunOptions,
    e: SheafExpr,
    pieces: [SheafExpr; 2],
    omega: GradedClass,
    stable: BTreeMap<String, StabilityCertificate>,
}

/// Runs the requested checks in dependency order.
pub fn run_checklist(loaded: &mut Loaded, opts: &RunOptions) -> Result<ChecklistReport> {
    let mut checks = opts.checks.clone().unwrap_or_else(|| loaded.scene.checks.clone());
    checks.sort();
    checks.dedup();
    let mut report = ChecklistReport {
        scene: loaded.scene.name.clone(),
        surface: loaded.surface.name.clone(),
        threefold: loaded.threefold.name.clone(),
        checks: checks.clone(),
        conditions: vec![],
        ledger_claims: vec![],
        search: None,
    };
    if checks.is_empty() {
        return Ok(report);
    }
    let e = loaded.e().ok_or_else(|| Error::Input("the scene declares no summands".into()))?;
    let pieces = match loaded.summands.as_slice() {
        [(_, a), (_, b)] => [a.clone(), b.clone()],
        _ => return Err(Error::Input("the checklist needs exactly two summands".into())),
    };
    let omega = loaded.omega.clone().ok_or_else(|| Error::Input("the scene declares no omega".into()))?;
    let mut run = Run { loaded, opts, e, pieces, omega, stable: BTreeMap::new() };
    report.conditions.push(run.pi1());
    for c in &checks {
        match c {
            Check::Det => report.conditions.push(run.det()?),
            Check::Chi => report.conditions.push(run.chi()?),
            Check::Stability => report.conditions.push(run.stability()?),
            Check::Pairings => report.conditions.extend(run.pairings()?),
            Check::DualPairings => report.conditions.push(run.dual_pairings()?),
            Check::EndPairing => report.conditions.push(run.end_pairing()?),
            Check::Anomaly | Check::Search => {}
        }
    }
    if checks.contains(&Check::Search) {
        report.search = Some(run.search()?);
    }
    if checks.contains(&Check::Anomaly) || checks.contains(&Check::Search) {
        report.conditions.push(run.anomaly(report.search.as_ref(), checks.contains(&Check::Anomaly))?);
    }
    report.ledger_claims = run.ledger_claims()?;
    for c in report.conditions.iter_mut() {
        let ok = c.certificates.iter().all(|cert| run.loaded.ledger.replay(cert).is_ok());
        c.replayed = ok;
        if !ok && c.verdict == Verdict::Pass {
            c.verdict = Verdict::Fail;
            c.summary.push("a certificate failed to replay".into());
        }
    }
    Ok(report)
}

impl Run<'_> {
    fn claims(&self, pick: impl Fn(&Quantity) -> bool) -> Vec<ClaimDecl> {
        self.loaded.scene.claims.iter().filter(|c| pick(&c.quantity)).cloned().collect()
    }

    fn pi1(&self) -> ConditionEntry {
        let x = &self.loaded.threefold;
        let mut c = entry("C1", "X is not simply connected", Check::Det, PI1_QUOTE);
        let mut cert = Certificate::new(format!("H_1({}) = {}", x.name, x.h1));
        cert.axiom(Rule::Geometry, &format!("abelianised fundamental group of {} is {}", x.name, x.h1));
        cert.conclude(Rule::Geometry, "a nonzero abelianisation means a nontrivial fundamental group");
        c.verdict = if x.h1 == "0" { Verdict::Fail } else { Verdict::Pass };
        c.summary.push(format!("H_1({}) = {}", x.name, x.h1));
        c.certificates.push(cert);
        c
    }

    fn det(&self) -> Result<ConditionEntry> {
        let mut c = entry("C2", "det E is trivial", Check::Det, DET_QUOTE);
        let mut cert = Certificate::new(format!("det {}", self.e.label()));
        let mut total = LineBundle::new(self.loaded.threefold.zero(1));
        for p in &self.pieces {
            let d = det_line(p)?;
            cert.axiom(Rule::Axiom, &format!("det {} = {}", p.label(), fmt_line(&d)));
            total = total.tensor(&d);
        }
        let c1 = self.e.chern()?.c1();
        cert.conclude(Rule::Derived, &format!("det E = {}, c1(E) = {}", fmt_line(&total), c1));
        c.summary.push(format!("c1(E) = {c1}"));
        if total.is_trivial() {
            c.verdict = Verdict::Pass;
            c.summary.push("the determinant factors cancel, torsion included".into());
        } else {
            c.verdict = Verdict::Fail;
            c.summary.push(format!("residual determinant {}", fmt_line(&total)));
        }
        c.detail = serde_json::json!({ "residual": fmt_line(&total), "c1": c1.to_string() });
        c.certificates.push(cert);
        Ok(c)
    }

    fn chi(&self) -> Result<ConditionEntry> {
        let mut c = entry("C3", "chi(E) = 3", Check::Chi, CHI_QUOTE);
        let chi = self.e.hrr_chi()?;
        let mut cert = Certificate::new(format!("chi({}) = {}", self.e.label(), fmt_q_short(&chi)));
        for p in &self.pieces {
            cert.axiom(Rule::R3, &format!("chi({}) = {}", p.label(), fmt_q_short(&p.hrr_chi()?)));
        }
        cert.conclude(Rule::Additivity, &format!("chi(E) = {}", fmt_q_short(&chi)));
        c.summary.push(format!("chi(E) = {}", fmt_q_short(&chi)));
        c.claims = self
            .claims(|q| *q == Quantity::Chi)
            .iter()
            .map(|cl| int_claim(cl, Some(fmt_q_short(&chi)), true, None))
            .collect();
        c.verdict = with_claims(if chi == q(3) { Verdict::Pass } else { Verdict::Fail }, &c.claims);
        c.certificates.push(cert);
        Ok(c)
    }

    /// Stability of a surface bundle, cached by label.
    fn stable(&mut self, b: &SheafExpr) -> Result<StabilityCertificate> {
        if let Some(c) = self.stable.get(&b.label()) {
            return Ok(c.clone());
        }
        let pol = self.loaded.ledger.ctx.polarization.clone();
        let c = check_stable(&mut self.loaded.ledger, b, &pol, self.opts.stability_box)?;
        self.stable.insert(b.label(), c.clone());
        Ok(c)
    }

    /// Surface bundles under the summands.
    fn bases(&self) -> Result<Vec<SheafExpr>> {
        let mut out = Vec::new();
        for p in &self.pieces {
            match crate::ledger::threefold::split(p)?.as_slice() {
                [t] => out.push(t.base.clone()),
                _ => return Err(Error::Unsupported(format!("{} is not a twisted pullback", p.label()))),
            }
        }
        Ok(out)
    }

    fn stability(&mut self) -> Result<ConditionEntry> {
        let mut c = entry("C4", "E is slope-polystable", Check::Stability, POLY_QUOTE);
        let mut declared = Vec::new();
        let names: Vec<(String, SheafExpr)> = self
            .loaded
            .bundles
            .iter()
            .filter(|(_, b)| matches!(b, SheafExpr::Serre(_)))
            .map(|(n, b)| (n.clone(), b.clone()))
            .collect();
        for (n, b) in &names {
            let s = self.stable(b)?;
            c.summary.push(format!("{n}: {} (box {}, {} twists)", s.verdict, s.box_size, s.box_cardinality));
            declared.push(s);
        }
        let (e, omega, bx) = (self.e.clone(), self.omega.clone(), self.opts.stability_box);
        let mut slopes = Vec::new();
        for p in &self.pieces {
            slopes.push(format!("slope({}) = {}", p.label(), fmt_q_short(&slope(p, &omega)?)));
        }
        c.summary.extend(slopes.iter().cloned());
        let poly = match check_polystable_sum(&mut self.loaded.ledger, &e, &omega, bx) {
            Ok(r) => r,
            Err(Error::Precondition(m)) => {
                c.verdict = Verdict::Fail;
                c.summary.push(m);
                c.detail = serde_json::json!({ "declared": declared.iter().map(stability_json).collect::<Vec<_>>() });
                return Ok(c);
            }
            Err(e) => return Err(e),
        };
        c.summary.push(format!("polystable: {} ({})", poly.polystable, poly.reduction));
        let mut homs = Vec::new();
        if poly.polystable {
            homs = self.hom_vanishings()?;
        }
        c.verdict = if poly.polystable {
            Verdict::Pass
        } else if poly.summands.iter().any(|s| matches!(s.certificate.verdict, stability::Verdict::Unstable { .. })) {
            Verdict::Fail
        } else {
            Verdict::Open
        };
        for h in &homs {
            c.summary.push(h.claim.clone());
        }
        c.certificates.extend(homs.iter().cloned());
        c.detail = serde_json::json!({
            "declared": declared.iter().map(stability_json).collect::<Vec<_>>(),
            "polystability": {
                "bundle": poly.bundle,
                "polarization": poly.polarization,
                "base_polarization": poly.base_polarization,
                "reduction": poly.reduction,
                "polystable": poly.polystable,
                "summands": poly.summands.iter().map(|s| serde_json::json!({
                    "summand": s.summand,
                    "slope": s.slope,
                    "base": s.base,
                    "certificate": stability_json(&s.certificate),
                })).collect::<Vec<_>>(),
            },
            "slopes": slopes,
        });
        Ok(c)
    }

    /// `Hom(P, Q) = 0` for stable bases and duals of equal slope.
    fn hom_vanishings(&mut self) -> Result<Vec<Certificate>> {
        let bases = self.bases()?;
        let mut all = Vec::new();
        for b in &bases {
            all.push(b.clone());
            all.push(b.clone().dual());
        }
        let pol = self.loaded.ledger.ctx.polarization.clone();
        let mut out = Vec::new();
        for (i, p) in all.iter().enumerate() {
            for (j, qe) in all.iter().enumerate().skip(i + 1) {
                if i / 2 == j / 2 {
                    continue;
                }
                if slope(p, &pol)? != slope(qe, &pol)? || p.chern()? == qe.chern()? {
                    continue;
                }
                let (pc, qc) = (self.stable(p)?, self.stable(qe)?);
                if !pc.is_stable() || !qc.is_stable() {
                    continue;
                }
                out.push(hom_vanishing(&mut self.loaded.ledger, p, qe, &pc, &qc)?);
                out.push(hom_vanishing(&mut self.loaded.ledger, qe, p, &qc, &pc)?);
            }
        }
        Ok(out)
    }

    fn ensure_stability(&mut self) -> Result<()> {
        if self.stable.is_empty() {
            let bases = self.bases()?;
            for b in &bases {
                self.stable(b)?;
            }
            self.hom_vanishings()?;
        }
        Ok(())
    }

    fn pairings(&mut self) -> Result<Vec<ConditionEntry>> {
        self.ensure_stability()?;
        let [a, b] = self.pieces.clone();
        let l = &mut self.loaded.ledger;
        let r = analyse(l, "E", [&a, &b])?;
        let d = analyse(l, "E*", [&a.clone().dual(), &b.clone().dual()])?;
        let mut c5 = entry("C5", "the cubic pairings are nonzero", Check::Pairings, PAIRING_QUOTE);
        let mut c6 = entry("C6", "the twisted pairings vanish", Check::Pairings, TWISTED_QUOTE);
        for (side, rep) in [("E", &r), ("E*", &d)] {
            c5.summary.push(format!("{side}: untwisted pairing {}", rep.untwisted));
            if let Some(t) = rep.triples.iter().find(|t| t.branch == pairing::Branch::Untwisted) {
                c5.certificates.push(t.certificate.clone());
            }
        }
        c5.verdict = match (r.untwisted, d.untwisted) {
            (PairingValue::Nonzero, PairingValue::Nonzero) => Verdict::Pass,
            (PairingValue::Zero, _) | (_, PairingValue::Zero) => Verdict::Fail,
            _ => Verdict::Open,
        };
        c6.summary.push(format!(
            "E: {} character triples, {} with trivial product, {:?}",
            r.enumerated, r.constrained, r.branch_counts
        ));
        let nontrivial: Vec<_> = r.triples.iter().filter(|t| t.nontrivial == 3).collect();
        c6.summary.push(format!(
            "E: {} triples of nontrivial characters, all zero: {}",
            nontrivial.len(),
            r.all_nontrivial_zero
        ));
        c6.certificates.extend(nontrivial.iter().map(|t| t.certificate.clone()));
        for (side, rep) in [("E", &r), ("E*", &d)] {
            for m in &rep.gamma_toggled {
                c6.summary.push(format!(
                    "{side}: with gamma toggled, H^0({}) (x) H^1({}) is {} ({})",
                    m.section,
                    m.source,
                    m.property.map_or(m.value.to_string(), |p| format!("{p:?}").to_lowercase()),
                    m.reason
                ));
                c6.certificates.push(m.certificate.clone());
            }
        }
        let any_nonzero = nontrivial.iter().any(|t| t.value == PairingValue::Nonzero);
        let toggled_bad = r
            .gamma_toggled
            .iter()
            .chain(&d.gamma_toggled)
            .any(|m| m.property.is_some() && m.property != Some(crate::ledger::MapProperty::Zero) && m.value != PairingValue::Zero);
        c6.verdict = if any_nonzero || toggled_bad {
            Verdict::Fail
        } else if r.all_nontrivial_zero && r.toggled_zero() && d.toggled_zero() {
            Verdict::Pass
        } else {
            Verdict::Open
        };
        c5.detail = serde_json::json!({ "E": summary_json(&r), "E*": summary_json(&d) });
        c6.detail = serde_json::json!({
            "E": summary_json(&r),
            "E*_gamma_toggled": d.gamma_toggled.iter().map(|m| m.certificate.claim.clone()).collect::<Vec<_>>(),
        });
        Ok(vec![c5, c6])
    }

    fn dual_pairings(&mut self) -> Result<ConditionEntry> {
        self.ensure_stability()?;
        let [a, b] = self.pieces.clone();
        let duals = [a.dual(), b.dual()];
        let mut c = entry("C7", "the pairing conditions hold for E*", Check::DualPairings, DUAL_QUOTE);
        let d = analyse(&mut self.loaded.ledger, "E*", [&duals[0], &duals[1]])?;
        let verdict = |r: &PairingReport| {
            if r.untwisted == PairingValue::Zero || r.triples.iter().any(|t| t.nontrivial == 3 && t.value == PairingValue::Nonzero) {
                Verdict::Fail
            } else if r.passes() {
                Verdict::Pass
            } else {
                Verdict::Open
            }
        };
        let declared = verdict(&d);
        c.summary.push(format!(
            "declared incidence: untwisted {}, all nontrivial zero: {}",
            d.untwisted, d.all_nontrivial_zero
        ));
        if let Some(t) = d.triples.iter().find(|t| t.branch == pairing::Branch::Untwisted) {
            c.certificates.push(t.certificate.clone());
        }
        c.certificates.extend(d.triples.iter().filter(|t| t.nontrivial == 3 && t.value == PairingValue::Zero).map(|t| t.certificate.clone()));
        if declared == Verdict::Open {
            let undecided: Vec<String> = d
                .triples
                .iter()
                .filter(|t| t.nontrivial == 3 && t.value == PairingValue::Undetermined)
                .map(|t| t.characters.join(" "))
                .collect();
            c.summary.push(format!("undetermined nontrivial triples: {}", undecided.join(", ")));
        }
        let mut other = serde_json::Value::Null;
        if let Some((big, small)) = self.loaded.scene.branch.clone() {
            let mut pts = self.loaded.ledger.ctx.points.clone();
            let contained = pts.is_subset(&small, &big);
            if contained {
                pts.contains.retain(|(l, s)| !(l == &big && s == &small));
            } else {
                pts.add_containment(&big, &small)?;
            }
            let mut alt = self.loaded.ledger.with_points(pts)?;
            let ad = analyse(&mut alt, "E*", [&duals[0], &duals[1]])?;
            let rank = untwisted_rank(&mut alt, &ad)?;
            c.summary.push(format!(
                "other incidence ({small} {} {big}): untwisted {}, all nontrivial zero: {}{}",
                if contained { "not in" } else { "in" },
                ad.untwisted,
                ad.all_nontrivial_zero,
                rank.map_or(String::new(), |r| format!(", reduced map rank {r}"))
            ));
            let replays = ad.triples.iter().all(|t| alt.replay(&t.certificate).is_ok());
            other = serde_json::json!({
                "contained": !contained,
                "verdict": verdict(&ad),
                "replayed": replays,
                "report": summary_json(&ad),
            });
        }
        if let Some(r) = untwisted_rank(&mut self.loaded.ledger, &d)? {
            c.summary.push(format!("declared incidence: reduced map rank {r}"));
        }
        c.verdict = declared;
        c.detail = serde_json::json!({ "declared": summary_json(&d), "other_incidence": other });
        Ok(c)
    }

    fn end_pairing(&mut self) -> Result<ConditionEntry> {
        self.ensure_stability()?;
        let [a, b] = self.pieces.clone();
        let mut c = entry("C8", "the End E pairing", Check::EndPairing, END_QUOTE);
        let r: EndReport = match analyse_end(&mut self.loaded.ledger, [&a, &b]) {
            Ok(r) => r,
            Err(Error::Unsupported(m)) => {
                c.summary.push(m);
                return Ok(c);
            }
            Err(e) => return Err(e),
        };
        for s in &r.summands {
            c.summary.push(format!("H^1({}): {} on the surface, {} on the threefold", s.name, s.surface, s.threefold));
        }
        c.summary.push(format!("surface total {}, threefold total {}", r.surface_total, r.threefold_total));
        for comp in &r.components {
            c.summary.push(format!("{}: {}", comp.name, comp.value));
            c.certificates.push(comp.certificate.clone());
        }
        for i in &r.injections {
            c.summary.push(format!(
                "{}: C^{} (x) C^{} -> C^{} {}",
                i.map,
                i.sections,
                i.source,
                i.target,
                if i.is_injective() { "injective" } else { "not shown injective" }
            ));
            c.certificates.push(i.certificate.clone());
        }
        for cl in self.claims(|q| *q == Quantity::End) {
            let derived: Option<Vec<String>> = r.summands.iter().map(|s| s.surface.value().map(|v| v.to_string())).collect();
            let mut res = int_claim(&cl, derived.map(|d| d.join(" ")), false, None);
            let claimed_total: i64 = cl.value.split(' ').filter_map(|v| v.parse::<i64>().ok()).sum();
            res.note = format!("totals: claimed {claimed_total}, derived {}", r.surface_total);
            c.claims.push(res);
        }
        c.verdict = if r.passes() {
            Verdict::Pass
        } else if r.components.iter().any(|x| x.value == PairingValue::Undetermined) {
            Verdict::Open
        } else {
            Verdict::Fail
        };
        c.detail = json(&r);
        Ok(c)
    }

    fn target(&self) -> Result<GradedClass> {
        search::required_c2(&self.e)
    }

    fn search(&mut self) -> Result<SearchReport> {
        let target = self.target()?;
        let mut cfg = self.opts.search.clone().unwrap_or_default();
        if self.opts.search.is_none() {
            if let Some(d) = self.loaded.scene.search {
                cfg.rank_max = d.rank_max;
                cfg.box_size = d.box_size;
            }
        }
        search::run_search(&target, &self.omega, Some(&mut self.loaded.ledger), &cfg, None, false)
    }

    fn anomaly(&mut self, found: Option<&SearchReport>, claims: bool) -> Result<ConditionEntry> {
        let mut c = entry("C9", "c2(X) - c2(E) is c2 of a polystable F", Check::Anomaly, ANOMALY_QUOTE);
        c.quotes.push(OPEN_QUOTE.into());
        let x = self.loaded.threefold.clone();
        let ce = self.e.chern()?;
        let c2e = ce.c2();
        let target = self.target()?;
        let bog = search::bogomolov_value(&target, &self.omega)?;
        let nef_e = nef_test(&c2e)?;
        let nef_t = nef_test(&target)?;
        let mut cert = Certificate::new(format!("c2(X) - c2(E) = {target}"));
        cert.axiom(Rule::Geometry, &format!("c2(X) = {}", x.c2_tangent()));
        cert.axiom(Rule::Derived, &format!("c2(E) = {c2e} (Whitney formula over the summands)"));
        cert.conclude(Rule::Derived, &format!("c2(F) = {target}, c2(F).Omega = {}", fmt_q_short(&bog)));
        c.summary.push(format!("c2(E) = {c2e}"));
        c.summary.push(format!("c2(X) - c2(E) = {target}"));
        c.summary.push(format!("Bogomolov: c2(F).Omega = {} with Omega = {}", fmt_q_short(&bog), self.omega));
        c.summary.push(nef_line("c2(E)", &nef_e));
        c.summary.push(nef_line("c2(F)", &nef_t));
        let mut twisted = Vec::new();
        if claims {
            for cl in self.claims(|_| true) {
                let res = match &cl.quantity {
                    Quantity::C2 => class_claim(&cl, &c2e, None)?,
                    Quantity::Anomaly => class_claim(&cl, &target, Some(cert.clone()))?,
                    Quantity::Twisted { rank, twist } => {
                        let m = x.parse_class(twist)?;
                        let f = ChernData { rank: *rank, total: &x.one() + &target };
                        let tw = twist_chern(&f, &m)?.c2();
                        twisted.push(serde_json::json!({ "rank": rank, "twist": twist, "c2": tw.to_string() }));
                        let mut r = class_claim(&cl, &tw, None)?;
                        if r.agrees == Some(true) {
                            r.note = "holds with the derived anomaly class".into();
                        } else {
                            let tc = claimed_target(&self.loaded.scene.claims, &x)?;
                            if let Some(tc) = tc {
                                let alt = twist_chern(&ChernData { rank: *rank, total: &x.one() + &tc }, &m)?.c2();
                                r.note = format!("with the claimed anomaly class this is {alt}");
                            }
                        }
                        r
                    }
                    Quantity::Pair { divisor } => {
                        let d = x.parse_class(divisor)?;
                        let v = c2e.pair(&d)?;
                        let mut r = int_claim(&cl, Some(fmt_q_short(&v)), true, None);
                        let claimed: i64 = cl.value.parse().unwrap_or(0);
                        if v.is_negative() || claimed < 0 {
                            r.note = format!("either value exhibits a negative nef pairing; engine witness {}", nef_line("c2(E)", &nef_e));
                        }
                        r
                    }
                    Quantity::Bogomolov => int_claim(&cl, Some(fmt_q_short(&bog)), true, None),
                    _ => continue,
                };
                c.claims.push(res);
            }
        }
        let base = if bog.is_negative() {
            c.summary.push("the Bogomolov inequality fails, so no polystable F exists".into());
            Verdict::Fail
        } else if let Some(cand) = found.and_then(|s| s.survivors.iter().find(|x| matches!(x.status, search::Status::Polystable { .. }))) {
            c.summary.push(format!("search found a polystable candidate: {} {:?}", cand.template, cand.params));
            Verdict::Pass
        } else {
            if let Some(s) = found {
                c.summary.push(format!(
                    "search: {} of {} candidates enumerated, {} survivors, {} certified stable",
                    s.completion.enumerated,
                    s.completion.box_cardinality,
                    s.survivors.len(),
                    s.certified_stable
                ));
            }
            c.summary.push("no polystable F is known".into());
            Verdict::Open
        };
        c.verdict = with_claims(base, &c.claims);
        c.certificates.push(cert);
        c.detail = serde_json::json!({
            "c2_E": c2e.to_string(),
            "target": target.to_string(),
            "bogomolov": fmt_q_short(&bog),
            "nef_c2_E": json(&nef_e),
            "nef_target": json(&nef_t),
            "twisted": twisted,
        });
        Ok(c)
    }

    fn ledger_claims(&mut self) -> Result<Vec<ClaimResult>> {
        let mut out = Vec::new();
        for cl in self.claims(|q| matches!(q, Quantity::H { .. })) {
            let Quantity::H { degree, sheaf } = &cl.quantity else { unreachable!() };
            let e = parse_sheaf(sheaf, &self.loaded.parse_context())?;
            let k = self.loaded.ledger.ctx.key(&e)?;
            self.loaded.ledger.register(&k)?;
            self.loaded.ledger.propagate()?;
            let f = self.loaded.ledger.query(&k, *degree)?;
            let mut r = int_claim(&cl, interval_text(&f.value), false, Some(f.certificate));
            if f.value.value().is_none() {
                r.note = format!("bounds {}", f.value);
            }
            r.quantity = format!("h{degree}({})", e.label());
            out.push(r);
        }
        Ok(out)
    }
}

fn claimed_target(claims: &[ClaimDecl], x: &Arc<Geometry>) -> Result<Option<GradedClass>> {
    for c in claims {
        if c.quantity == Quantity::Anomaly {
            return Ok(Some(x.parse_class(&c.value)?));
        }
    }
    Ok(None)
}

fn nef_line(what: &str, n: &NefTest) -> String {
    let pairs: Vec<String> = n.pairings.iter().map(|(g, v)| format!("{g}: {v}")).collect();
    match &n.witness {
        Some((g, v)) => format!("{what} pairs negatively with the nef class {g} ({v}); all pairings {}", pairs.join(", ")),
        None => format!("{what} pairs nonnegatively with every nef generator ({})", pairs.join(", ")),
    }
}

/// Ranks of the section maps behind the untwisted pairing, when known.
fn untwisted_rank(l: &mut Ledger, r: &PairingReport) -> Result<Option<String>> {
    let Some(t) = r.triples.iter().find(|t| t.branch == pairing::Branch::Untwisted) else { return Ok(None) };
    let mut ranks = Vec::new();
    for c in t.combos.iter().filter(|c| c.value == PairingValue::Nonzero) {
        let Some((v, w)) = &c.map else { continue };
        match pairing::section_map(l, v, w)?.rank {
            Some(r) => ranks.push(r.to_string()),
            None => return Ok(None),
        }
    }
    Ok(if ranks.is_empty() { None } else { Some(ranks.join(", ")) })
}

/// The pairing report without per-triple certificates.
/// A box certificate with its candidates grouped by the shape of their
/// derivations; each group keeps one full derivation as an example.
fn stability_json(c: &StabilityCertificate) -> serde_json::Value {
    let mut groups: BTreeMap<(String, String), (usize, &stability::Candidate)> = BTreeMap::new();
    for k in &c.candidates {
        let rules: Vec<&str> = k.certificate.steps.iter().map(|s| s.rule.as_str()).collect();
        let h0 = serde_json::to_string(&k.h0).expect("intervals serialize");
        groups.entry((h0, rules.join(" "))).or_insert((0, k)).0 += 1;
    }
    serde_json::json!({
        "bundle": c.bundle,
        "polarization": c.polarization,
        "slope": c.slope,
        "reductions": c.reductions,
        "family": c.family,
        "box_size": c.box_size,
        "box_cardinality": c.box_cardinality,
        "candidates": c.candidates.len(),
        "candidate_groups": groups.into_iter().map(|((h0, rules), (n, k))| serde_json::json!({
            "count": n,
            "h0": serde_json::from_str::<serde_json::Value>(&h0).expect("round trip"),
            "rules": rules,
            "example": json(k),
        })).collect::<Vec<_>>(),
        "tail": c.tail,
        "verdict": c.verdict,
    })
}

fn summary_json(r: &PairingReport) -> serde_json::Value {
    serde_json::json!({
        "side": r.side,
        "enumerated": r.enumerated,
        "constrained": r.constrained,
        "branch_counts": r.branch_counts,
        "untwisted": r.untwisted,
        "all_nontrivial_zero": r.all_nontrivial_zero,
        "first_nontrivial_zero": r.first_nontrivial_zero,
        "nonzero_twisted": r.nonzero_twisted,
        "triples": r.triples.iter().map(|t| serde_json::json!({
            "characters": t.characters,
            "branch": t.branch,
            "value": t.value,
        })).collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests;
