//! Certificates: derivation DAGs flattened premises-first.

use std::collections::BTreeMap;

use serde::Serialize;

use super::store::{EventId, Origin, Rule, Store};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step {
    pub id: usize,
    pub rule: String,
    pub statement: String,
    pub premises: Vec<usize>,
    /// Ledger event this step records, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<EventId>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub claim: String,
    pub steps: Vec<Step>,
    /// Steps the claim rests on directly.
    pub roots: Vec<usize>,
}

impl Certificate {
    pub fn new(claim: impl Into<String>) -> Certificate {
        Certificate { claim: claim.into(), steps: vec![], roots: vec![] }
    }

    pub fn from_events(store: &Store, claim: impl Into<String>, roots: &[EventId]) -> Certificate {
        let mut c = Certificate::new(claim);
        let r = c.absorb_events(store, roots);
        c.roots = r;
        c
    }

    /// Adds the events behind `roots`, returning their step ids.
    pub fn absorb_events(&mut self, store: &Store, roots: &[EventId]) -> Vec<usize> {
        let mut map: BTreeMap<EventId, usize> =
            self.steps.iter().filter_map(|s| s.event.map(|e| (e, s.id))).collect();
        for e in store.closure(roots) {
            if map.contains_key(&e) {
                continue;
            }
            let ev = &store.events[e];
            let rule = match &ev.origin {
                Origin::Direct { rule, .. } => rule.id(),
                Origin::Constraint { id } => store.constraints[*id].rule.id(),
            };
            let id = self.steps.len();
            self.steps.push(Step {
                id,
                rule: rule.to_string(),
                statement: store.describe(e),
                premises: ev.premises.iter().map(|p| map[p]).collect(),
                event: Some(e),
            });
            map.insert(e, id);
        }
        roots.iter().map(|e| map[e]).collect()
    }

    /// Adds a premise-free step (an axiom or assumption with its quote).
    pub fn axiom(&mut self, rule: Rule, statement: &str) -> usize {
        let id = self.steps.len();
        self.steps.push(Step { id, rule: rule.id().into(), statement: statement.into(), premises: vec![], event: None });
        self.roots.push(id);
        id
    }

    /// Adds a step resting on the current roots and makes it the only root.
    pub fn conclude(&mut self, rule: Rule, statement: &str) -> usize {
        let id = self.steps.len();
        let premises = std::mem::take(&mut self.roots);
        self.steps.push(Step { id, rule: rule.id().into(), statement: statement.into(), premises, event: None });
        self.roots = vec![id];
        id
    }

    /// Appends another certificate's steps; its roots join ours.
    pub fn merge(&mut self, other: &Certificate) {
        let mut map: BTreeMap<usize, usize> = BTreeMap::new();
        let by_event: BTreeMap<EventId, usize> =
            self.steps.iter().filter_map(|s| s.event.map(|e| (e, s.id))).collect();
        for s in &other.steps {
            if let Some(e) = s.event {
                if let Some(&mine) = by_event.get(&e) {
                    map.insert(s.id, mine);
                    continue;
                }
            }
            let id = self.steps.len();
            self.steps.push(Step {
                id,
                rule: s.rule.clone(),
                statement: s.statement.clone(),
                premises: s.premises.iter().map(|p| map[p]).collect(),
                event: s.event,
            });
            map.insert(s.id, id);
        }
        for r in &other.roots {
            let r = map[r];
            if !self.roots.contains(&r) {
                self.roots.push(r);
            }
        }
    }

    /// A certificate concluding `claim` from several others.
    pub fn combine(claim: impl Into<String>, parts: &[&Certificate], rule: Rule, statement: &str) -> Certificate {
        let mut c = Certificate::new(claim);
        for p in parts {
            c.merge(p);
        }
        c.conclude(rule, statement);
        c
    }

    /// Checks the DAG is premises-first and re-derives each ledger event.
    pub fn replay(&self, store: &Store) -> Result<()> {
        for s in &self.steps {
            if s.premises.iter().any(|p| *p >= s.id) {
                return Err(Error::Precondition(format!("step {} cites a later step", s.id)));
            }
            if let Some(e) = s.event {
                let ev = store
                    .events
                    .get(e)
                    .ok_or_else(|| Error::Precondition(format!("step {} cites unknown event #{e}", s.id)))?;
                let cited: Vec<EventId> = s.premises.iter().filter_map(|p| self.steps[*p].event).collect();
                if cited != ev.premises {
                    return Err(Error::Precondition(format!("step {} premises differ from event #{e}", s.id)));
                }
                if store.describe(e) != s.statement {
                    return Err(Error::Precondition(format!("step {} statement differs from event #{e}", s.id)));
                }
                store.replay_event(e)?;
            }
        }
        if self.roots.iter().any(|r| *r >= self.steps.len()) {
            return Err(Error::Precondition("root outside the certificate".into()));
        }
        Ok(())
    }

    /// Human-readable proof log, one rule per line.
    pub fn render(&self) -> String {
        let mut out = format!("claim: {}\n", self.claim);
        for s in &self.steps {
            let prem = if s.premises.is_empty() {
                String::new()
            } else {
                let p: Vec<String> = s.premises.iter().map(|p| p.to_string()).collect();
                format!("  <- {}", p.join(", "))
            };
            out.push_str(&format!("  [{}] {}: {}{}\n", s.id, s.rule, s.statement, prem));
        }
        out
    }
}
