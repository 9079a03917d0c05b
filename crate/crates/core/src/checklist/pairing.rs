//! The cubic pairing `H^1(L2 E (x) a) (x) H^1(E (x) b) (x) H^1(E (x) c) -> C`.
//!
//! `E = P0 + P1` with rank-2 summands, so the pairing splits into the four
//! components landing in `L2 P0 (x) L2 P1`. Each group is expanded into
//! surface groups through Kunneth or Leray; a triple of surface groups can
//! pair nontrivially only when the fibre degrees add up to 1 and the surface
//! degrees to 2. A surviving `H^1(U) (x) H^1(V) (x) H^0(W)` is Serre dual to
//! multiplication `H^0(W) (x) H^1(V) -> H^1(V (x) W)`, read off the sequence
//! defining the section of `W`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ledger::threefold::{self, Contribution};
use crate::ledger::{Certificate, ExactSeq, Interval, Key, Ledger, MapProperty, Rule};
use crate::ring::Geometry;
use crate::sheaf::{Character, LineBundle, SheafExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingValue {
    Zero,
    Nonzero,
    Undetermined,
}

impl fmt::Display for PairingValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairingValue::Zero => "zero",
            PairingValue::Nonzero => "nonzero",
            PairingValue::Undetermined => "undetermined",
        })
    }
}

/// Which case of the character analysis a triple falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Untwisted,
    /// Some character is nontrivial along the fibres.
    FibreNontrivial,
    /// Only characters pulled back from the surface.
    SurfaceTwist,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComboReport {
    pub groups: [String; 3],
    pub value: PairingValue,
    pub reason: String,
    /// `(V, W)` of the section multiplication the combo reduces to.
    #[serde(skip)]
    pub(crate) map: Option<(Key, Key)>,
}

/// A reduced map of the untwisted pairing evaluated with `g` toggled on its source.
#[derive(Clone, Debug, Serialize)]
pub struct ToggledMap {
    pub source: String,
    pub section: String,
    /// Multiplication by the declared section.
    pub property: Option<MapProperty>,
    /// The pairing, which also needs the other sections when `h^0 > 1`.
    pub value: PairingValue,
    pub reason: String,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, Serialize)]
pub struct TripleReport {
    pub characters: [String; 3],
    pub nontrivial: usize,
    pub branch: Branch,
    pub value: PairingValue,
    pub combos: Vec<ComboReport>,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingReport {
    pub side: String,
    /// All character triples looked at.
    pub enumerated: usize,
    /// Triples with trivial product.
    pub constrained: usize,
    pub branch_counts: BTreeMap<String, usize>,
    pub untwisted: PairingValue,
    /// Every triple of nontrivial characters gives zero.
    pub all_nontrivial_zero: bool,
    /// Every triple with nontrivial first character gives zero.
    pub first_nontrivial_zero: bool,
    /// Nonzero triples with some trivial character, other than the untwisted one.
    pub nonzero_twisted: Vec<String>,
    /// On quotients: the reduced maps of the untwisted pairing with `g` toggled.
    pub gamma_toggled: Vec<ToggledMap>,
    pub triples: Vec<TripleReport>,
}

impl PairingReport {
    /// Every reduced map with `g` toggled is zero.
    pub fn toggled_zero(&self) -> bool {
        self.gamma_toggled.iter().all(|m| m.property == Some(MapProperty::Zero) || m.value == PairingValue::Zero)
    }

    /// Untwisted nonzero, and zero whenever every character is nontrivial.
    pub fn passes(&self) -> bool {
        self.untwisted == PairingValue::Nonzero && self.all_nontrivial_zero
    }
}

impl PairingReport {
    pub fn triple(&self, chars: [&str; 3]) -> Option<&TripleReport> {
        self.triples.iter().find(|t| t.characters.iter().zip(chars).all(|(a, b)| a == b))
    }
}

/// Section multiplication `H^0(W) (x) H^1(V) -> H^1(V (x) W)`.
#[derive(Clone, Debug, Serialize)]
pub struct SectionMap {
    pub value: PairingValue,
    pub property: Option<MapProperty>,
    pub rank: Option<Interval>,
    pub reason: String,
    pub certificate: Certificate,
}

pub fn section_map(l: &mut Ledger, v: &Key, w: &Key) -> Result<SectionMap> {
    let fv = l.query(v, 1)?;
    let fw = l.query(w, 0)?;
    let mut c = Certificate::new(format!("H^0({w}) (x) H^1({v}) -> H^1({v} (x) {w})"));
    if fv.value.is_zero() || fw.value.is_zero() {
        let f = if fv.value.is_zero() { &fv } else { &fw };
        c.merge(&f.certificate);
        let reason = format!("h^{}({}) = 0", f.degree, f.sheaf);
        c.conclude(Rule::Derived, &format!("the map is zero: {reason}"));
        return Ok(SectionMap { value: PairingValue::Zero, property: None, rank: None, reason, certificate: c });
    }
    let Some(sec) = l.ctx.sections.iter().find(|s| &s.bundle == w).cloned() else {
        return Ok(SectionMap {
            value: PairingValue::Undetermined,
            property: None,
            rank: None,
            reason: format!("no declared section of {w}"),
            certificate: c,
        });
    };
    let vw = v.tensor(w, &l.ctx.points)?;
    l.register(&vw)?;
    l.propagate()?;
    let Some(seq) = l.seq_from(v, &vw) else {
        return Ok(SectionMap {
            value: PairingValue::Undetermined,
            property: None,
            rank: None,
            reason: format!("no sequence 0 -> {v} -> {vw} through {}", sec.name),
            certificate: c,
        });
    };
    let m = match l.derive_map_property(seq, ExactSeq::position(1, 0)) {
        Ok(m) => m,
        Err(Error::Undetermined(why)) => {
            return Ok(SectionMap { value: PairingValue::Undetermined, property: None, rank: None, reason: why, certificate: c })
        }
        Err(e) => return Err(e),
    };
    c.merge(&m.certificate);
    c.merge(&fw.certificate);
    let (value, reason) = match m.property {
        MapProperty::Zero if fw.value == Interval::exact(1) => {
            (PairingValue::Zero, format!("{} = {} is zero and spans H^0({w})", m.map, sec.name))
        }
        MapProperty::Zero => (
            PairingValue::Undetermined,
            format!("{} is zero but h^0({w}) = {}", sec.name, fw.value),
        ),
        p => (PairingValue::Nonzero, format!("multiplication by {} on H^1({v}) is {p:?} (rank {})", sec.name, m.rank)),
    };
    c.conclude(Rule::R4, &reason);
    Ok(SectionMap { value, property: Some(m.property), rank: Some(m.rank), reason, certificate: c })
}

pub fn flat(x: &Arc<Geometry>, ch: Character) -> SheafExpr {
    SheafExpr::Line(LineBundle::new(x.zero(1)).with_character(ch))
}

fn twisted(e: &SheafExpr, x: &Arc<Geometry>, ch: Character) -> SheafExpr {
    if ch.is_trivial() {
        e.clone()
    } else {
        e.clone().tensor(flat(x, ch))
    }
}

pub(crate) struct Group {
    label: String,
    value: Interval,
    parts: Vec<(Contribution, Interval)>,
    certificate: Certificate,
}

/// Evaluates the cubic pairing on `E = pieces[0] + pieces[1]` for every
/// triple of characters with trivial product.
pub fn analyse(l: &mut Ledger, side: &str, pieces: [&SheafExpr; 2]) -> Result<PairingReport> {
    let x = pieces[0].geometry();
    if x.is_surface() {
        return Err(Error::Unsupported("pairings are evaluated on the threefold".into()));
    }
    for p in pieces {
        if p.rank() != 2 {
            return Err(Error::Unsupported(format!("summand {} has rank {}", p.label(), p.rank())));
        }
    }
    let (p0, p1) = (pieces[0].clone(), pieces[1].clone());
    let comps: [(SheafExpr, &SheafExpr, &SheafExpr); 4] = [
        (SheafExpr::Lambda2(Box::new(p0.clone())), &p1, &p1),
        (p0.clone().tensor(p1.clone()), &p0, &p1),
        (p0.clone().tensor(p1.clone()), &p1, &p0),
        (SheafExpr::Lambda2(Box::new(p1.clone())), &p0, &p0),
    ];
    let chars = Character::all_on(&x);
    let mut cache: BTreeMap<String, Group> = BTreeMap::new();
    let mut triples = Vec::new();
    let mut enumerated = 0;
    for a in &chars {
        for b in &chars {
            for c in &chars {
                enumerated += 1;
                if !a.mul(b).mul(c).is_trivial() {
                    continue;
                }
                triples.push(triple(l, &x, &comps, [*a, *b, *c], &mut cache)?);
            }
        }
    }
    let mut branch_counts = BTreeMap::new();
    for t in &triples {
        *branch_counts.entry(format!("{:?}", t.branch).to_lowercase()).or_insert(0) += 1;
    }
    let untwisted = triples.iter().find(|t| t.branch == Branch::Untwisted).map_or(PairingValue::Undetermined, |t| t.value);
    let mut gamma_toggled = Vec::new();
    if l.ctx.geom.torsion_canonical {
        let maps: std::collections::BTreeSet<(Key, Key)> = triples
            .iter()
            .filter(|t| t.branch == Branch::Untwisted)
            .flat_map(|t| t.combos.iter().filter(|c| c.value == PairingValue::Nonzero).filter_map(|c| c.map.clone()))
            .collect();
        for (v, w) in maps {
            let rank = l.ctx.geom.lattice.rank();
            let v2 = v.twist(&vec![0; rank], 1);
            l.register(&v2)?;
            l.propagate()?;
            let m = section_map(l, &v2, &w)?;
            gamma_toggled.push(ToggledMap {
                source: v2.to_string(),
                section: w.to_string(),
                property: m.property,
                value: m.value,
                reason: m.reason,
                certificate: m.certificate,
            });
        }
    }
    Ok(PairingReport {
        side: side.into(),
        enumerated,
        constrained: triples.len(),
        branch_counts,
        untwisted,
        all_nontrivial_zero: triples.iter().filter(|t| t.nontrivial == 3).all(|t| t.value == PairingValue::Zero),
        first_nontrivial_zero: triples
            .iter()
            .filter(|t| t.characters[0] != "1")
            .all(|t| t.value == PairingValue::Zero),
        nonzero_twisted: triples
            .iter()
            .filter(|t| t.branch != Branch::Untwisted && t.nontrivial < 3 && t.value == PairingValue::Nonzero)
            .map(|t| t.characters.join(" "))
            .collect(),
        gamma_toggled,
        triples,
    })
}

pub(crate) fn group(l: &mut Ledger, e: &SheafExpr, cache: &mut BTreeMap<String, Group>) -> Result<()> {
    let label = e.label();
    if cache.contains_key(&label) {
        return Ok(());
    }
    let f = threefold::h3(l, e, 1)?;
    cache.insert(label.clone(), Group { label, value: f.value, parts: f.contributions, certificate: f.certificate });
    Ok(())
}

/// One component `H^1(e1) (x) H^1(e2) (x) H^1(e3) -> C`.
pub struct Component {
    pub value: PairingValue,
    pub combos: Vec<ComboReport>,
    pub certificate: Certificate,
}

pub(crate) fn component(l: &mut Ledger, es: [&SheafExpr; 3], cache: &mut BTreeMap<String, Group>) -> Result<Component> {
    for e in es {
        group(l, e, cache)?;
    }
    let gs: Vec<&Group> = es.iter().map(|e| &cache[&e.label()]).collect();
    let mut cert = Certificate::new(format!("H^1({}) (x) H^1({}) (x) H^1({}) -> C", gs[0].label, gs[1].label, gs[2].label));
    if let Some(z) = gs.iter().find(|g| g.value.is_zero()) {
        cert.merge(&z.certificate);
        cert.conclude(Rule::Derived, &format!("zero: h^1({}) = 0", z.label));
        return Ok(Component { value: PairingValue::Zero, combos: vec![], certificate: cert });
    }
    let mut value = PairingValue::Zero;
    let mut combos = Vec::new();
    for (c1, v1) in &gs[0].parts {
        for (c2, v2) in &gs[1].parts {
            for (c3, v3) in &gs[2].parts {
                if c1.fibre_degree + c2.fibre_degree + c3.fibre_degree != 1 || c1.degree + c2.degree + c3.degree != 2 {
                    continue;
                }
                if v1.is_zero() || v2.is_zero() || v3.is_zero() {
                    continue;
                }
                let groups = [
                    format!("H^{}({})", c1.degree, c1.surface),
                    format!("H^{}({})", c2.degree, c2.surface),
                    format!("H^{}({})", c3.degree, c3.surface),
                ];
                let cs = [c1, c2, c3];
                let mut map = None;
                let (v, reason) = match cs.iter().position(|c| c.degree == 0) {
                    Some(wi) if cs.iter().filter(|c| c.degree == 1).count() == 2 => {
                        // V is a factor of the last two slots other than W
                        let vi = if wi == 0 { 1 } else { 3 - wi };
                        let m = section_map(l, &cs[vi].surface, &cs[wi].surface)?;
                        cert.merge(&m.certificate);
                        map = Some((cs[vi].surface.clone(), cs[wi].surface.clone()));
                        (m.value, m.reason)
                    }
                    _ => (PairingValue::Undetermined, "surface degrees other than (1, 1, 0)".to_string()),
                };
                value = value.max(v);
                combos.push(ComboReport { groups, value: v, reason, map });
            }
        }
    }
    for g in &gs {
        cert.merge(&g.certificate);
    }
    if combos.is_empty() {
        cert.axiom(
            Rule::Derived,
            &format!(
                "{} (x) {} (x) {}: no summands with fibre degrees adding to 1 and surface degrees adding to 2",
                gs[0].label, gs[1].label, gs[2].label
            ),
        );
    }
    cert.conclude(Rule::Derived, &format!("the component is {value}"));
    Ok(Component { value, combos, certificate: cert })
}

fn triple(
    l: &mut Ledger,
    x: &Arc<Geometry>,
    comps: &[(SheafExpr, &SheafExpr, &SheafExpr); 4],
    ch: [Character; 3],
    cache: &mut BTreeMap<String, Group>,
) -> Result<TripleReport> {
    let labels = ch.map(|c| c.to_string());
    let nontrivial = ch.iter().filter(|c| !c.is_trivial()).count();
    let branch = if nontrivial == 0 {
        Branch::Untwisted
    } else if ch.iter().any(|c| c.is_fibre_nontrivial()) {
        Branch::FibreNontrivial
    } else {
        Branch::SurfaceTwist
    };
    let mut cert = Certificate::new(format!("pairing twisted by ({})", labels.join(", ")));
    let mut combos = Vec::new();
    let mut values = Vec::new();
    for (g1, g2, g3) in comps {
        let es = [twisted(g1, x, ch[0]), twisted(g2, x, ch[1]), twisted(g3, x, ch[2])];
        let c = component(l, [&es[0], &es[1], &es[2]], cache)?;
        cert.merge(&c.certificate);
        combos.extend(c.combos);
        values.push(c.value);
    }
    let value = if values.contains(&PairingValue::Nonzero) {
        PairingValue::Nonzero
    } else if values.iter().all(|v| *v == PairingValue::Zero) {
        PairingValue::Zero
    } else {
        PairingValue::Undetermined
    };
    cert.conclude(Rule::Derived, &format!("the pairing twisted by ({}) is {value}", labels.join(", ")));
    Ok(TripleReport { characters: labels, nontrivial, branch, value, combos, certificate: cert })
}
