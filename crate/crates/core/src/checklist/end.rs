//! `H^1(End E) (x) H^1(E) (x) H^1(E*) -> C` for `E = P0 + P1`.
//!
//! `H^1(End E)` splits into `End P0`, `End P1`, `P0* (x) P1` and `P1* (x) P0`,
//! each pairing with one component of `H^1(E) (x) H^1(E*)`.

use std::collections::BTreeMap;

use serde::Serialize;

use super::pairing::{component, section_map, ComboReport, PairingValue};
use crate::error::{Error, Result};
use crate::ledger::threefold;
use crate::ledger::{Certificate, ExactSeq, Interval, Key, Ledger, MapProperty, Rule};
use crate::sheaf::SheafExpr;

pub const COMMUTES_QUOTE: &str = "It is easy to check that the diagram commutes";

#[derive(Clone, Debug, Serialize)]
pub struct EndSummand {
    pub name: String,
    pub threefold: Interval,
    /// Without the `H^0_S (x) H^1_T(O_T)` pieces.
    pub surface: Interval,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, Serialize)]
pub struct EndComponent {
    pub name: String,
    pub value: PairingValue,
    pub reason: String,
    pub combos: Vec<ComboReport>,
    pub certificate: Certificate,
}

/// `H^0(W) (x) H^1(V) -> H^1(V (x) W)` behind a nonzero component.
#[derive(Clone, Debug, Serialize)]
pub struct Injection {
    pub map: String,
    pub sections: Interval,
    pub source: Interval,
    pub target: Interval,
    pub property: Option<MapProperty>,
    pub rank: Option<Interval>,
    pub certificate: Certificate,
}

impl Injection {
    pub fn is_injective(&self) -> bool {
        matches!(self.property, Some(MapProperty::Injective | MapProperty::Isomorphism))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EndReport {
    pub summands: Vec<EndSummand>,
    pub surface_total: Interval,
    pub threefold_total: Interval,
    pub components: Vec<EndComponent>,
    pub injections: Vec<Injection>,
}

impl EndReport {
    /// The diagonal components are injections and the cross ones vanish.
    pub fn passes(&self) -> bool {
        self.components.len() == 4
            && self.components[..2].iter().all(|c| c.value == PairingValue::Nonzero)
            && self.components[2..].iter().all(|c| c.value == PairingValue::Zero)
            && !self.injections.is_empty()
            && self.injections.iter().all(Injection::is_injective)
    }
}

fn sub(a: Interval, b: Interval) -> Interval {
    match (a.value(), b.value()) {
        (Some(x), Some(y)) if x >= y => Interval::exact(x - y),
        _ => Interval::UNKNOWN,
    }
}

pub fn analyse_end(l: &mut Ledger, pieces: [&SheafExpr; 2]) -> Result<EndReport> {
    let x = pieces[0].geometry();
    if x.is_surface() {
        return Err(Error::Unsupported("the End pairing is evaluated on the threefold".into()));
    }
    let (p0, p1) = (pieces[0].clone(), pieces[1].clone());
    let (d0, d1) = (p0.clone().dual(), p1.clone().dual());
    let groups = [
        (format!("End {}", p0.label()), SheafExpr::End(Box::new(p0.clone()))),
        (format!("End {}", p1.label()), SheafExpr::End(Box::new(p1.clone()))),
        (format!("{} (x) {}", d0.label(), p1.label()), d0.clone().tensor(p1.clone())),
        (format!("{} (x) {}", d1.label(), p0.label()), d1.clone().tensor(p0.clone())),
    ];
    let mut summands = Vec::new();
    let (mut surface_total, mut threefold_total) = (Interval::exact(0), Interval::exact(0));
    for (name, e) in &groups {
        let f = threefold::h3(l, e, 1)?;
        let mut fibre_o = Interval::exact(0);
        for (c, v) in &f.contributions {
            if c.n == 0 && c.fibre_degree == 1 && c.degree == 0 {
                fibre_o = fibre_o.add(&v.scale(c.mult));
            }
        }
        let surface = sub(f.value, fibre_o);
        surface_total = surface_total.add(&surface);
        threefold_total = threefold_total.add(&f.value);
        summands.push(EndSummand { name: name.clone(), threefold: f.value, surface, certificate: f.certificate });
    }
    let triples: [(&SheafExpr, &SheafExpr, &SheafExpr); 4] =
        [(&groups[0].1, &p0, &d0), (&groups[1].1, &p1, &d1), (&groups[2].1, &p0, &d1), (&groups[3].1, &p1, &d0)];
    let mut cache = BTreeMap::new();
    let mut components = Vec::new();
    let mut injections = Vec::new();
    for (i, (a, b, c)) in triples.iter().enumerate() {
        let comp = component(l, [a, b, c], &mut cache)?;
        let mut value = comp.value;
        let mut cert = comp.certificate;
        let mut reason = comp.combos.iter().map(|c| c.reason.clone()).collect::<Vec<_>>().join("; ");
        if comp.combos.is_empty() {
            reason = match value {
                PairingValue::Zero => "no surviving Kunneth summands".into(),
                _ => "no combination determined".into(),
            };
        }
        if value == PairingValue::Undetermined {
            for combo in &comp.combos {
                if combo.value != PairingValue::Undetermined {
                    continue;
                }
                if let Some(z) = composite_zero(l, combo)? {
                    cert.merge(&z.1);
                    reason = z.0;
                    value = PairingValue::Zero;
                } else {
                    value = PairingValue::Undetermined;
                    break;
                }
            }
            if value == PairingValue::Zero && comp.combos.iter().any(|c| c.value == PairingValue::Nonzero) {
                value = PairingValue::Nonzero;
            }
        }
        if i < 2 {
            for combo in comp.combos.iter().filter(|c| c.value == PairingValue::Nonzero) {
                let Some((v, w)) = combo.map.clone() else { continue };
                injections.push(injection(l, &v, &w)?);
            }
        }
        components.push(EndComponent {
            name: format!("H^1({}) (x) H^1({}) (x) H^1({})", groups[i].0, b.label(), c.label()),
            value,
            reason,
            combos: comp.combos,
            certificate: cert,
        });
    }
    Ok(EndReport { summands, surface_total, threefold_total, components, injections })
}

fn injection(l: &mut Ledger, v: &Key, w: &Key) -> Result<Injection> {
    let m = section_map(l, v, w)?;
    let vw = v.tensor(w, &l.ctx.points)?;
    Ok(Injection {
        map: format!("H^0({w}) (x) H^1({v}) -> H^1({vw})"),
        sections: l.h(w, 0)?,
        source: l.h(v, 1)?,
        target: l.h(&vw, 1)?,
        property: m.property,
        rank: m.rank,
        certificate: m.certificate,
    })
}

/// A combination `H^0(W) (x) H^1(V) (x) H^1(U)` with `W = F (x) G` where the
/// section of `W` is the product of the sections of two Serre bundles: the
/// pairing is dual to `H^1(U) -> H^1(I_Z) -> H^1(F)`, wedging with the section
/// of `G` and then multiplying by the section of `F`. Zero when the second map
/// is zero in a declared sequence `0 -> I_Z -> F -> ...`.
fn composite_zero(l: &mut Ledger, combo: &ComboReport) -> Result<Option<(String, Certificate)>> {
    let Some((_, w)) = &combo.map else { return Ok(None) };
    let Key::Bundle { factors, .. } = w else { return Ok(None) };
    if factors.len() != 2 {
        return Ok(None);
    }
    let fw = l.query(w, 0)?;
    if fw.value != Interval::exact(1) {
        return Ok(None);
    }
    // U is the slot of degree 1 other than V; its key is in the group label
    let seqs = l.seqs.clone();
    for (si, s) in seqs.iter().enumerate() {
        // 0 -> line -> U -> I_Z -> 0, the defining sequence of G twisted by its dual determinant
        let (u, iz) = (&s.terms[1], &s.terms[2]);
        let Key::Bundle { factors: uf, .. } = u else { continue };
        let Key::Bundle { factors: zf, line: zl, gamma: 0, ideal } = iz else { continue };
        if uf.len() != 1 || !zf.is_empty() || ideal.len() != 1 || zl.iter().any(|x| *x != 0) {
            continue;
        }
        if !combo.groups.iter().any(|g| g == &format!("H^1({u})")) || !factors.contains(&uf[0]) {
            continue;
        }
        let other = if factors[0] == uf[0] { &factors[1] } else { &factors[0] };
        let Some(ti) = seqs.iter().position(|t| {
            &t.terms[0] == iz && matches!(&t.terms[1], Key::Bundle { factors: f, ideal: i, .. } if f == &vec![other.clone()] && i.is_empty())
        }) else {
            continue;
        };
        let wedge = l.derive_map_property(si, ExactSeq::position(1, 1))?;
        if wedge.property != MapProperty::Isomorphism {
            continue;
        }
        let mult = l.derive_map_property(ti, ExactSeq::position(1, 0))?;
        if mult.property != MapProperty::Zero {
            continue;
        }
        let f = &seqs[ti].terms[1];
        let mut c = Certificate::new(format!("{} is zero", combo.groups.join(" (x) ")));
        c.merge(&fw.certificate);
        c.merge(&wedge.certificate);
        c.merge(&mult.certificate);
        c.axiom(Rule::Axiom, &format!("assumption: {COMMUTES_QUOTE} ({} factors through {} and {})", w, wedge.map, mult.map));
        let reason = format!(
            "H^0({w}) is spanned by the product of the sections; it acts as {} followed by {}, and the second map is zero",
            wedge.map, mult.map
        );
        c.conclude(Rule::Derived, &format!("H^1({u}) -> H^1({f}) is zero, so by Serre duality the pairing vanishes"));
        return Ok(Some((reason, c)));
    }
    Ok(None)
}
