//! Interval variables tied together by integer linear equalities, narrowed
//! to a bounds-consistent fixed point. Every bound change is an [`Event`]
//! recording the constraint and the premise events that forced it.

use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

pub type VarId = usize;
pub type EventId = usize;

const EVENT_LIMIT: usize = 2_000_000;

/// Closed interval of natural numbers; `hi = None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub lo: u64,
    pub hi: Option<u64>,
}

impl Interval {
    pub const UNKNOWN: Interval = Interval { lo: 0, hi: None };

    pub fn exact(v: u64) -> Interval {
        Interval { lo: v, hi: Some(v) }
    }

    pub fn value(&self) -> Option<u64> {
        (self.hi == Some(self.lo)).then_some(self.lo)
    }

    pub fn is_zero(&self) -> bool {
        self.hi == Some(0)
    }

    pub fn is_positive(&self) -> bool {
        self.lo > 0
    }

    pub fn add(&self, o: &Interval) -> Interval {
        Interval { lo: self.lo + o.lo, hi: self.hi.zip(o.hi).map(|(a, b)| a + b) }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let hi = match (self.hi, o.hi) {
            (Some(0), _) | (_, Some(0)) => Some(0),
            (Some(a), Some(b)) => Some(a * b),
            _ => None,
        };
        Interval { lo: self.lo * o.lo, hi }
    }

    pub fn scale(&self, k: u64) -> Interval {
        self.mul(&Interval::exact(k))
    }

    /// `self` is at least as tight as `o`.
    pub fn within(&self, o: &Interval) -> bool {
        self.lo >= o.lo && o.hi.is_none_or(|h| self.hi.is_some_and(|x| x <= h))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(h) if h == self.lo => write!(f, "{h}"),
            Some(h) => write!(f, "[{}, {h}]", self.lo),
            None => write!(f, "[{}, inf]", self.lo),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Side {
    Lo,
    Hi,
}

/// Rule identifiers used in certificates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rule {
    Axiom,
    Assumption,
    Geometry,
    /// Long exact sequence of a short exact sequence.
    R1,
    /// Exactness: dimension of a term is the sum of the adjacent ranks.
    R2,
    /// Hirzebruch-Riemann-Roch.
    R3,
    R4,
    /// Serre duality.
    R5,
    R6,
    R7,
    R8,
    /// Degree rules on a polarized surface.
    R9,
    /// Ideal-sheaf sequence and skyscraper facts.
    R10,
    /// Incidence of declared sections and point sets.
    R11,
    /// Homs between stable bundles.
    R12,
    /// Additivity over direct sums.
    Additivity,
    /// An endomorphism bundle has the identity section.
    Identity,
    /// Structural steps assembled outside the linear system.
    Derived,
}

impl Rule {
    pub fn id(&self) -> &'static str {
        match self {
            Rule::Axiom => "axiom",
            Rule::Assumption => "assumption",
            Rule::Geometry => "geometry",
            Rule::R1 => "R1",
            Rule::R2 => "R2",
            Rule::R3 => "R3",
            Rule::R4 => "R4",
            Rule::R5 => "R5",
            Rule::R6 => "R6",
            Rule::R7 => "R7",
            Rule::R8 => "R8",
            Rule::R9 => "R9",
            Rule::R10 => "R10",
            Rule::R11 => "R11",
            Rule::R12 => "R12",
            Rule::Additivity => "additivity",
            Rule::Identity => "identity",
            Rule::Derived => "derived",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Var {
    pub label: String,
    pub lo: u64,
    pub hi: Option<u64>,
    pub lo_event: Option<EventId>,
    pub hi_event: Option<EventId>,
}

impl Var {
    pub fn interval(&self) -> Interval {
        Interval { lo: self.lo, hi: self.hi }
    }
}

/// `sum(coef * var) = constant`.
#[derive(Clone, Debug, Serialize)]
pub struct Constraint {
    pub terms: Vec<(VarId, i64)>,
    pub constant: i64,
    pub rule: Rule,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Origin {
    /// A bound asserted directly (axiom, geometry fact or structural rule).
    Direct { rule: Rule, note: String },
    /// A bound forced through a linear constraint.
    Constraint { id: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct Event {
    pub id: EventId,
    pub var: VarId,
    pub side: Side,
    pub value: u64,
    pub origin: Origin,
    pub premises: Vec<EventId>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Store {
    pub vars: Vec<Var>,
    pub constraints: Vec<Constraint>,
    pub events: Vec<Event>,
    #[serde(skip)]
    watch: Vec<Vec<usize>>,
    #[serde(skip)]
    queue: VecDeque<usize>,
    #[serde(skip)]
    queued: Vec<bool>,
}

/// Picks the next queued constraint; the default is first-in first-out.
pub type Scheduler<'a> = &'a mut dyn FnMut(usize) -> usize;

impl Store {
    pub fn new_var(&mut self, label: impl Into<String>) -> VarId {
        self.vars.push(Var { label: label.into(), lo: 0, hi: None, lo_event: None, hi_event: None });
        self.watch.push(Vec::new());
        self.vars.len() - 1
    }

    pub fn interval(&self, v: VarId) -> Interval {
        self.vars[v].interval()
    }

    /// Adds `sum(coef * var) = constant`; repeated variables are merged.
    /// Returns `None` when the constraint is trivially satisfied.
    pub fn add_constraint(
        &mut self,
        raw: Vec<(VarId, i64)>,
        constant: i64,
        rule: Rule,
        note: impl Into<String>,
    ) -> Result<Option<usize>> {
        let mut terms: Vec<(VarId, i64)> = Vec::new();
        for (v, c) in raw {
            match terms.iter_mut().find(|(w, _)| *w == v) {
                Some(t) => t.1 += c,
                None => terms.push((v, c)),
            }
        }
        terms.retain(|(_, c)| *c != 0);
        let note = note.into();
        if terms.is_empty() {
            return if constant == 0 {
                Ok(None)
            } else {
                Err(Error::Contradiction {
                    fact: note,
                    first: format!("{} reduces to 0 = {constant}", rule.id()),
                    second: "identity".into(),
                })
            };
        }
        let id = self.constraints.len();
        for (v, _) in &terms {
            self.watch[*v].push(id);
        }
        self.constraints.push(Constraint { terms, constant, rule, note });
        self.queued.push(false);
        self.enqueue(id);
        Ok(Some(id))
    }

    fn enqueue(&mut self, c: usize) {
        if !self.queued[c] {
            self.queued[c] = true;
            self.queue.push_back(c);
        }
    }

    /// Records a bound; returns the event when it tightens the variable.
    pub fn tighten(
        &mut self,
        var: VarId,
        side: Side,
        value: u64,
        origin: Origin,
        premises: Vec<EventId>,
    ) -> Result<Option<EventId>> {
        let v = &self.vars[var];
        let improves = match side {
            Side::Lo => value > v.lo,
            Side::Hi => v.hi.is_none_or(|h| value < h),
        };
        if !improves {
            return Ok(None);
        }
        if self.events.len() >= EVENT_LIMIT {
            return Err(Error::Undetermined("propagation did not converge".into()));
        }
        let id = self.events.len();
        self.events.push(Event { id, var, side, value, origin, premises });
        let v = &mut self.vars[var];
        match side {
            Side::Lo => {
                v.lo = value;
                v.lo_event = Some(id);
            }
            Side::Hi => {
                v.hi = Some(value);
                v.hi_event = Some(id);
            }
        }
        if let Some(h) = v.hi {
            if v.lo > h {
                let (lo_e, hi_e) = (v.lo_event, v.hi_event);
                return Err(Error::Contradiction {
                    fact: v.label.clone(),
                    first: self.render_event_chain(lo_e),
                    second: self.render_event_chain(hi_e),
                });
            }
        }
        for c in self.watch[var].clone() {
            self.enqueue(c);
        }
        Ok(Some(id))
    }

    pub fn assert_direct(&mut self, var: VarId, iv: Interval, rule: Rule, note: &str, premises: Vec<EventId>) -> Result<Vec<EventId>> {
        let mut out = Vec::new();
        let origin = Origin::Direct { rule, note: note.to_string() };
        if iv.lo > 0 {
            out.extend(self.tighten(var, Side::Lo, iv.lo, origin.clone(), premises.clone())?);
        }
        if let Some(h) = iv.hi {
            out.extend(self.tighten(var, Side::Hi, h, origin, premises)?);
        }
        Ok(out)
    }

    /// Bound on `terms[j]` implied by constraint `c` and the current bounds
    /// of the other variables, with the events it relies on.
    fn implied(&self, c: &Constraint, j: usize, side: Side) -> Option<(i128, Vec<EventId>)> {
        let (_, cj) = c.terms[j];
        // need the RHS bound on the side that maps to `side` after dividing by cj
        let want_rhs_lo = (side == Side::Lo) == (cj > 0);
        let mut acc: i128 = c.constant as i128;
        let mut prem = Vec::new();
        for (k, &(v, ck)) in c.terms.iter().enumerate() {
            if k == j {
                continue;
            }
            let var = &self.vars[v];
            // RHS = K - sum(ck xk); RHS lower bound uses max(ck xk)
            let use_hi = (ck > 0) == want_rhs_lo;
            if use_hi {
                let h = var.hi?;
                acc -= ck as i128 * h as i128;
                prem.extend(var.hi_event);
            } else {
                acc -= ck as i128 * var.lo as i128;
                prem.extend(var.lo_event);
            }
        }
        let cj = cj as i128;
        let bound = match side {
            Side::Lo => div_ceil(acc, cj),
            Side::Hi => div_floor(acc, cj),
        };
        Some((bound, prem))
    }

    fn run_constraint(&mut self, cid: usize) -> Result<()> {
        let c = self.constraints[cid].clone();
        for j in 0..c.terms.len() {
            let var = c.terms[j].0;
            for side in [Side::Lo, Side::Hi] {
                if let Some((b, prem)) = self.implied(&c, j, side) {
                    let value = match side {
                        Side::Lo if b <= 0 => continue,
                        Side::Hi if b < 0 => {
                            // an upper bound below zero is a contradiction
                            let label = self.vars[var].label.clone();
                            return Err(Error::Contradiction {
                                fact: label,
                                first: format!("constraint {} forces a negative dimension", c.note),
                                second: self.render_event_chain(prem.first().copied()),
                            });
                        }
                        _ => b as u64,
                    };
                    self.tighten(var, side, value, Origin::Constraint { id: cid }, prem)?;
                }
            }
        }
        Ok(())
    }

    pub fn propagate(&mut self) -> Result<()> {
        self.propagate_with(&mut |_| 0)
    }

    /// Runs to the fixed point, taking queued constraints in the order
    /// chosen by `pick` (an index into the current queue).
    pub fn propagate_with(&mut self, pick: Scheduler) -> Result<()> {
        while !self.queue.is_empty() {
            let i = pick(self.queue.len()).min(self.queue.len() - 1);
            let c = self.queue.remove(i).expect("index in range");
            self.queued[c] = false;
            self.run_constraint(c)?;
        }
        Ok(())
    }

    /// Events reachable from `roots`, premises first.
    pub fn closure(&self, roots: &[EventId]) -> Vec<EventId> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        fn visit(s: &Store, e: EventId, seen: &mut std::collections::HashSet<EventId>, out: &mut Vec<EventId>) {
            if !seen.insert(e) {
                return;
            }
            for p in &s.events[e].premises {
                visit(s, *p, seen, out);
            }
            out.push(e);
        }
        for r in roots {
            visit(self, *r, &mut seen, &mut out);
        }
        out
    }

    pub fn describe(&self, e: EventId) -> String {
        let ev = &self.events[e];
        let var = &self.vars[ev.var].label;
        let rel = match ev.side {
            Side::Lo => ">=",
            Side::Hi => "<=",
        };
        let why = match &ev.origin {
            Origin::Direct { rule, note } => format!("{} {}", rule.id(), note),
            Origin::Constraint { id } => {
                let c = &self.constraints[*id];
                format!("{} {}", c.rule.id(), c.note)
            }
        };
        format!("{var} {rel} {}  [{why}]", ev.value)
    }

    fn render_event_chain(&self, e: Option<EventId>) -> String {
        match e {
            None => "initial bound".into(),
            Some(e) => self
                .closure(&[e])
                .iter()
                .map(|x| format!("#{x} {}", self.describe(*x)))
                .collect::<Vec<_>>()
                .join("; "),
        }
    }

    /// Re-derives an event from its origin and the values of its premises.
    pub fn replay_event(&self, e: EventId) -> Result<()> {
        let ev = &self.events[e];
        match &ev.origin {
            Origin::Direct { .. } => Ok(()),
            Origin::Constraint { id } => {
                let c = &self.constraints[*id];
                let j = c
                    .terms
                    .iter()
                    .position(|(v, _)| *v == ev.var)
                    .ok_or_else(|| Error::Precondition(format!("event #{e} not on its constraint")))?;
                let cj = c.terms[j].1;
                let want_rhs_lo = (ev.side == Side::Lo) == (cj > 0);
                let mut acc: i128 = c.constant as i128;
                let mut used = ev.premises.iter();
                for (k, &(v, ck)) in c.terms.iter().enumerate() {
                    if k == j {
                        continue;
                    }
                    let use_hi = (ck > 0) == want_rhs_lo;
                    let want_side = if use_hi { Side::Hi } else { Side::Lo };
                    // premises were recorded in term order, skipping initial bounds
                    let value = match used.clone().next().map(|p| &self.events[*p]) {
                        Some(p) if p.var == v && p.side == want_side => {
                            used.next();
                            p.value
                        }
                        _ if !use_hi => 0,
                        _ => {
                            return Err(Error::Precondition(format!(
                                "event #{e}: missing upper bound premise for {}",
                                self.vars[v].label
                            )))
                        }
                    };
                    acc -= ck as i128 * value as i128;
                }
                let b = match ev.side {
                    Side::Lo => div_ceil(acc, cj as i128),
                    Side::Hi => div_floor(acc, cj as i128),
                };
                if b == ev.value as i128 {
                    Ok(())
                } else {
                    Err(Error::Precondition(format!(
                        "event #{e} replays to {b}, recorded {}",
                        ev.value
                    )))
                }
            }
        }
    }
}

fn div_floor(a: i128, b: i128) -> i128 {
    let d = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        d - 1
    } else {
        d
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -div_floor(-a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_exact_sequence_of_vector_spaces() {
        // 0 -> A -> B -> C -> 0 with dim A = 2, dim C = 3
        let mut s = Store::default();
        let (a, b, c) = (s.new_var("A"), s.new_var("B"), s.new_var("C"));
        let (r0, r1) = (s.new_var("r0"), s.new_var("r1"));
        s.add_constraint(vec![(a, 1), (r0, -1)], 0, Rule::R2, "at A").unwrap();
        s.add_constraint(vec![(b, 1), (r0, -1), (r1, -1)], 0, Rule::R2, "at B").unwrap();
        s.add_constraint(vec![(c, 1), (r1, -1)], 0, Rule::R2, "at C").unwrap();
        s.assert_direct(a, Interval::exact(2), Rule::Axiom, "", vec![]).unwrap();
        s.assert_direct(c, Interval::exact(3), Rule::Axiom, "", vec![]).unwrap();
        s.propagate().unwrap();
        assert_eq!(s.interval(b), Interval::exact(5));
        for e in 0..s.events.len() {
            s.replay_event(e).unwrap();
        }
    }

    #[test]
    fn contradiction_names_both_sides() {
        let mut s = Store::default();
        let (x, y) = (s.new_var("x"), s.new_var("y"));
        s.add_constraint(vec![(x, 1), (y, 1)], 1, Rule::R3, "x + y = 1").unwrap();
        s.assert_direct(x, Interval::exact(1), Rule::Axiom, "x is one", vec![]).unwrap();
        s.propagate().unwrap();
        let err = s.assert_direct(y, Interval { lo: 1, hi: None }, Rule::Axiom, "y positive", vec![]);
        match err {
            Err(Error::Contradiction { fact, first, second }) => {
                assert_eq!(fact, "y");
                assert!(first.contains("y positive"));
                assert!(second.contains("x is one"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rounding_helpers() {
        assert_eq!(div_floor(-3, 2), -2);
        assert_eq!(div_ceil(-3, 2), -1);
        assert_eq!(div_ceil(3, 2), 2);
        assert_eq!(div_floor(3, -2), -2);
    }

    #[test]
    fn interval_arithmetic() {
        let u = Interval::UNKNOWN;
        assert!(Interval::exact(0).mul(&u).is_zero());
        assert_eq!(Interval::exact(2).add(&Interval::exact(3)), Interval::exact(5));
        assert_eq!(u.scale(2).hi, None);
        assert_eq!(Interval { lo: 1, hi: Some(4) }.to_string(), "[1, 4]");
    }
}
