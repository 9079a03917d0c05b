//! Cohomology ledger for sheaves on the base surfaces.
//!
//! Dimensions `h^i` and the ranks of maps in long exact sequences are
//! interval variables. Registering a sheaf adds the standing relations for
//! it (Riemann-Roch, Serre duality, the defining sequences of its factors,
//! degree vanishing); [`Ledger::propagate`] then narrows everything to a
//! fixed point. Threefold cohomology is read off the surface facts through
//! Kunneth and Leray, see [`threefold`].

pub mod cert;
pub mod key;
pub mod store;
pub mod threefold;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ring::{degree, q, Geometry, GeometryId, GradedClass, Q};
use crate::sheaf::{chern_to_ch, tensor_chern, ChernData, PointConfig, SerreBundle, SheafExpr};

pub use cert::{Certificate, Step};
pub use key::{Key, SerreTable};
pub use store::{EventId, Interval, Origin, Rule, Side, Store, VarId};

/// A section of a bundle with a declared zero locus.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectionDecl {
    pub name: String,
    pub bundle: Key,
    pub zeros: ZeroLocus,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ZeroLocus {
    Points(String),
    Curve(String),
}

/// Everything the rules need to know about the surface.
#[derive(Clone, Debug)]
pub struct SurfaceContext {
    pub geom: Arc<Geometry>,
    /// Ample class used by the degree rules.
    pub polarization: GradedClass,
    pub points: PointConfig,
    pub serre: SerreTable,
    /// Lattice labels of smooth rational curves.
    pub curves: Vec<String>,
    pub sections: Vec<SectionDecl>,
}

impl SurfaceContext {
    pub fn new(geom: Arc<Geometry>, polarization: GradedClass) -> Result<SurfaceContext> {
        if !geom.is_surface() {
            return Err(Error::Input(format!("{} is not a surface", geom.name)));
        }
        if !polarization.is_homogeneous(1) || !polarization.geometry().same(&geom) {
            return Err(Error::Input(format!("polarization {polarization} is not a divisor on {}", geom.name)));
        }
        Ok(SurfaceContext {
            geom,
            polarization,
            points: PointConfig::default(),
            serre: SerreTable::default(),
            curves: vec![],
            sections: vec![],
        })
    }

    fn rank(&self) -> usize {
        self.geom.lattice.rank()
    }

    pub fn key(&self, e: &SheafExpr) -> Result<Key> {
        Key::of(e, &self.serre, &self.points)
    }

    /// Canonical bundle as a twist `(line, gamma)`.
    fn canonical(&self) -> (Vec<i64>, u8) {
        (vec![0; self.rank()], u8::from(self.geom.torsion_canonical))
    }

    fn class(&self, line: &[i64]) -> GradedClass {
        self.geom.divisor_i(line)
    }

    fn curve_coords(&self, label: &str) -> Option<Vec<i64>> {
        let i = self.geom.lattice.labels.iter().position(|l| l == label)?;
        let mut v = vec![0; self.rank()];
        v[i] = 1;
        Some(v)
    }

    fn chern(&self, k: &Key) -> Result<ChernData> {
        match k {
            Key::Bundle { factors, line, .. } => {
                let mut c = ChernData { rank: 1, total: &self.geom.one() + &self.class(line) };
                for f in factors {
                    let p = SheafExpr::Serre(self.serre.get(f)?.clone()).chern()?;
                    c = tensor_chern(&c, &p)?;
                }
                Ok(c)
            }
            _ => Err(Error::Unsupported(format!("Chern data of {k}"))),
        }
    }

    /// Holomorphic Euler characteristic of a key.
    pub fn chi(&self, k: &Key) -> Result<i64> {
        let v: Q = match k {
            Key::Bundle { ideal, .. } => {
                let c = self.chern(k)?;
                let td = &self.geom.one() + &self.geom.todd2();
                let chi = chern_to_ch(&c).try_mul(&td)?.integrate();
                let mut n = 0i64;
                for z in ideal {
                    n += self.points.size(z)? as i64;
                }
                chi - q(c.rank * n)
            }
            Key::Sky { points, mult } => q(self.points.size(points)? as i64 * *mult as i64),
            Key::Curve { degree, .. } => q(degree + 1),
            Key::Sum(v) => {
                let mut s = 0;
                for p in v {
                    s += self.chi(p)?;
                }
                q(s)
            }
        };
        if !v.is_integer() {
            return Err(Error::Precondition(format!("non-integral Euler characteristic {v} for {k}")));
        }
        Ok(*v.numer())
    }

    fn related(&self, a: &str, b: &str) -> bool {
        self.points.is_subset(a, b) || self.points.is_subset(b, a)
    }

    fn contained_in(&self, z: &str, locus: &ZeroLocus) -> bool {
        match locus {
            ZeroLocus::Points(w) => self.points.is_subset(z, w),
            ZeroLocus::Curve(c) => self.points.lies_on(z, c),
        }
    }
}

/// A registered short exact sequence `0 -> A -> B -> C -> 0`.
#[derive(Clone, Debug, Serialize)]
pub struct ExactSeq {
    pub terms: [Key; 3],
    /// Labels of `A -> B` and `B -> C`.
    pub labels: [String; 2],
    pub rule: Rule,
    pub quote: String,
    /// Rank variables of the long exact sequence, position `p` mapping
    /// `H^(p/3)` of term `p%3` to the next entry.
    #[serde(skip)]
    pub ranks: Vec<VarId>,
}

impl ExactSeq {
    /// Position of the map leaving `H^degree(term)`.
    pub fn position(degree: usize, term: usize) -> usize {
        3 * degree + term
    }

    pub fn map_label(&self, p: usize) -> String {
        let (i, t) = (p / 3, p % 3);
        match t {
            0 | 1 => format!("H^{i}({}) -{}-> H^{i}({})", self.terms[t], self.labels[t], self.terms[t + 1]),
            _ => format!("H^{i}({}) -delta-> H^{}({})", self.terms[2], i + 1, self.terms[0]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MapProperty {
    Zero,
    Injective,
    Surjective,
    Isomorphism,
    Nonzero,
}

/// A map in a long exact sequence with its certified property.
#[derive(Clone, Debug, Serialize)]
pub struct MapFact {
    pub map: String,
    pub property: MapProperty,
    pub rank: Interval,
    pub source: Interval,
    pub target: Interval,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, Serialize)]
pub struct Fact {
    pub sheaf: Key,
    pub degree: usize,
    pub value: Interval,
    pub certificate: Certificate,
}

#[derive(Clone, Debug)]
pub struct Ledger {
    pub ctx: SurfaceContext,
    pub store: Store,
    keys: BTreeMap<Key, Vec<VarId>>,
    pub seqs: Vec<ExactSeq>,
    seq_index: HashMap<[Key; 3], usize>,
    chi_cache: HashMap<Key, i64>,
    /// `(rank, ch (x) td)` of a product of Serre factors.
    td_cache: HashMap<Vec<String>, (i64, GradedClass)>,
    pending: Vec<Key>,
    /// Keys with one ideal factor whose incidence rule has not fired.
    incidence: BTreeSet<Key>,
    /// Incidence keys to look at on the next pass.
    incidence_todo: BTreeSet<Key>,
    /// `h^0` variable of a base bundle, to the incidence keys over it.
    incidence_watch: HashMap<VarId, Vec<Key>>,
    /// Events already scanned for incidence.
    incidence_seen: usize,
    /// Scene input, kept so the ledger can be rebuilt on other point data.
    axioms: Vec<AxiomRecord>,
}

#[derive(Clone, Debug)]
enum AxiomRecord {
    Section { name: String, bundle: SheafExpr, curve: String },
    Serre(SerreBundle),
    Seq { terms: [SheafExpr; 3], labels: [String; 2], quote: String },
    Fact { key: Key, degree: usize, value: Interval, quote: String, assumption: bool },
    Stability { key: Key, note: String },
}

impl Ledger {
    pub fn new(ctx: SurfaceContext) -> Result<Ledger> {
        let mut l = Ledger {
            ctx,
            store: Store::default(),
            keys: BTreeMap::new(),
            seqs: vec![],
            seq_index: HashMap::new(),
            chi_cache: HashMap::new(),
            td_cache: HashMap::new(),
            pending: vec![],
            incidence: BTreeSet::new(),
            incidence_todo: BTreeSet::new(),
            incidence_watch: HashMap::new(),
            incidence_seen: 0,
            axioms: vec![],
        };
        let serre: Vec<Arc<SerreBundle>> = l.ctx.serre.bundles.values().cloned().collect();
        for s in serre {
            let bundle = l.ctx.key(&SheafExpr::Serre(s.clone()))?;
            l.ctx.sections.push(SectionDecl {
                name: s.section.clone(),
                bundle,
                zeros: ZeroLocus::Points(s.points.clone()),
            });
        }
        let o = Key::structure(l.ctx.rank());
        l.register(&o)?;
        let (h, note) = match l.ctx.geom.id {
            GeometryId::S1 => ([1, 0, 1], "K3: h^i(O) = 1, 0, 1"),
            _ => ([1, 0, 0], "Enriques: h^i(O) = 1, 0, 0"),
        };
        for (i, v) in h.iter().enumerate() {
            let var = l.keys[&o][i];
            l.store.assert_direct(var, Interval::exact(*v), Rule::Geometry, note, vec![])?;
        }
        Ok(l)
    }

    /// Adds a bundle constructed by the Serre construction after checking
    /// `h^2(det*) = 0`.
    pub fn add_serre(&mut self, s: SerreBundle) -> Result<Arc<SerreBundle>> {
        if self.ctx.serre.bundles.contains_key(&s.name) {
            return Err(Error::Input(format!("duplicate bundle {}", s.name)));
        }
        let (d, g) = (s.det.coords()?, s.det.character.g);
        let dual_det = Key::line(d.iter().map(|x| -x).collect(), g);
        let h2 = self.h(&dual_det, 2)?;
        let built = SerreBundle::construct(&s.name, s.det, &s.points, s.n_points, &s.section, (h2.lo, h2.hi))?;
        let built = Arc::new(built);
        self.axioms.push(AxiomRecord::Serre((*built).clone()));
        self.ctx.serre.bundles.insert(built.name.clone(), built.clone());
        let bundle = self.ctx.key(&SheafExpr::Serre(built.clone()))?;
        self.ctx.sections.push(SectionDecl {
            name: built.section.clone(),
            bundle,
            zeros: ZeroLocus::Points(built.points.clone()),
        });
        // sections may now apply to keys registered earlier
        let keys: Vec<Key> = self.keys.keys().cloned().collect();
        self.incidence = keys.iter().filter(|k| k.ideal().len() == 1).cloned().collect();
        self.incidence_todo = self.incidence.clone();
        for k in keys {
            self.static_sections(&k)?;
        }
        Ok(built)
    }

    pub fn add_section(&mut self, name: &str, bundle: &SheafExpr, curve: &str) -> Result<()> {
        if !self.ctx.curves.iter().any(|c| c == curve) {
            return Err(Error::Input(format!("section {name}: {curve} is not a declared curve")));
        }
        let key = self.ctx.key(bundle)?;
        self.axioms.push(AxiomRecord::Section { name: name.into(), bundle: bundle.clone(), curve: curve.into() });
        self.ctx.sections.push(SectionDecl { name: name.into(), bundle: key, zeros: ZeroLocus::Curve(curve.into()) });
        self.incidence_todo = self.incidence.clone();
        let keys: Vec<Key> = self.keys.keys().cloned().collect();
        for k in keys {
            self.static_sections(&k)?;
        }
        Ok(())
    }

    pub fn known_keys(&self) -> impl Iterator<Item = &Key> {
        self.keys.keys()
    }

    pub fn vars_of(&self, k: &Key) -> Option<&[VarId]> {
        self.keys.get(k).map(Vec::as_slice)
    }

    /// Registers a key and everything its closure rules mention.
    pub fn register(&mut self, k: &Key) -> Result<()> {
        if self.keys.contains_key(k) {
            return Ok(());
        }
        self.alloc(k);
        while let Some(next) = self.pending.pop() {
            self.close(&next)?;
        }
        Ok(())
    }

    fn alloc(&mut self, k: &Key) {
        if self.keys.contains_key(k) {
            return;
        }
        let vars = (0..=2).map(|i| self.store.new_var(format!("h^{i}({k})"))).collect();
        self.keys.insert(k.clone(), vars);
        if k.ideal().len() == 1 {
            self.incidence.insert(k.clone());
            self.incidence_todo.insert(k.clone());
        }
        self.pending.push(k.clone());
    }

    fn chi(&mut self, k: &Key) -> Result<i64> {
        if let Some(c) = self.chi_cache.get(k) {
            return Ok(*c);
        }
        let Key::Bundle { factors, line, ideal, .. } = k else {
            return self.ctx.chi(k);
        };
        if !self.td_cache.contains_key(factors) {
            let r = self.ctx.rank();
            let bare = Key::Bundle { factors: factors.clone(), line: vec![0; r], gamma: 0, ideal: vec![] };
            let c = self.ctx.chern(&bare)?;
            let td = &self.ctx.geom.one() + &self.ctx.geom.todd2();
            self.td_cache.insert(factors.clone(), (c.rank, chern_to_ch(&c).try_mul(&td)?));
        }
        let (rank, t) = &self.td_cache[factors];
        // chi = int ch(P) td e^D
        let d = self.ctx.class(line);
        let e = &(&self.ctx.geom.one() + &d) + &d.try_mul(&d)?.scale(Q::new(1, 2));
        let mut n = 0i64;
        for z in ideal {
            n += self.ctx.points.size(z)? as i64;
        }
        let v = t.try_mul(&e)?.integrate() - q(rank * n);
        if !v.is_integer() {
            return Err(Error::Precondition(format!("non-integral Euler characteristic {v} for {k}")));
        }
        let c = *v.numer();
        debug_assert_eq!(Some(c), self.ctx.chi(k).ok());
        self.chi_cache.insert(k.clone(), c);
        Ok(c)
    }

    fn var(&mut self, k: &Key, i: usize) -> VarId {
        self.alloc(k);
        self.keys[k][i]
    }

    fn close(&mut self, k: &Key) -> Result<()> {
        let chi = self.chi(k)?;
        let v: Vec<VarId> = (0..=2).map(|i| self.var(k, i)).collect();
        match k {
            Key::Sky { points, mult } => {
                let n = self.ctx.points.size(points)? as u64 * *mult as u64;
                let note = format!("skyscraper on {} points", n / (*mult).max(1) as u64);
                for (i, val) in [n, 0, 0].iter().enumerate() {
                    self.store.assert_direct(v[i], Interval::exact(*val), Rule::R10, &note, vec![])?;
                }
                return Ok(());
            }
            Key::Curve { degree: d, curve } => {
                let h0 = (d + 1).max(0) as u64;
                let h1 = (-d - 1).max(0) as u64;
                let note = format!("O({d}) on the rational curve {curve}");
                for (i, val) in [h0, h1, 0].iter().enumerate() {
                    self.store.assert_direct(v[i], Interval::exact(*val), Rule::R8, &note, vec![])?;
                }
                return Ok(());
            }
            Key::Sum(parts) => {
                for i in 0..=2 {
                    let mut terms = vec![(v[i], 1)];
                    for p in parts {
                        terms.push((self.var(p, i), -1));
                    }
                    self.store.add_constraint(terms, 0, Rule::Additivity, format!("h^{i} of {k}"))?;
                }
                return Ok(());
            }
            Key::Bundle { .. } => {}
        }
        self.store.add_constraint(
            vec![(v[0], 1), (v[1], -1), (v[2], 1)],
            chi,
            Rule::R3,
            format!("chi({k}) = {chi}"),
        )?;
        let (factors, line, gamma, ideal) = match k {
            Key::Bundle { factors, line, gamma, ideal } => (factors.clone(), line.clone(), *gamma, ideal.clone()),
            _ => unreachable!(),
        };
        if let Some(z) = ideal.last() {
            // 0 -> K (x) I_Z -> K -> K|_Z -> 0
            let mut rest = ideal.clone();
            rest.pop();
            let big = Key::Bundle { factors: factors.clone(), line: line.clone(), gamma, ideal: rest };
            let sky = Key::Sky { points: z.clone(), mult: k.rank() as u32 };
            self.add_seq([k.clone(), big, sky], ["incl".into(), "restr".into()], Rule::R10, "ideal sheaf sequence")?;
        } else {
            let (kl, kg) = self.ctx.canonical();
            let dual = k.dual(&self.ctx.serre)?.twist(&kl, kg);
            for i in 0..=2 {
                let d = self.var(&dual, 2 - i);
                self.store.add_constraint(
                    vec![(v[i], 1), (d, -1)],
                    0,
                    Rule::R5,
                    format!("h^{i}({k}) = h^{}({dual})", 2 - i),
                )?;
            }
        }
        // defining sequence of each distinct factor
        let mut seen = BTreeSet::new();
        for (idx, f) in factors.iter().enumerate() {
            if !seen.insert(f.clone()) {
                continue;
            }
            let s = self.ctx.serre.get(f)?.clone();
            if ideal.iter().any(|z| self.ctx.related(z, &s.points)) {
                continue;
            }
            let mut rest_f = factors.clone();
            rest_f.remove(idx);
            let rest = Key::Bundle { factors: rest_f, line: line.clone(), gamma, ideal: ideal.clone() };
            let (d, dg) = (s.det.coords()?, s.det.character.g);
            let quot = rest.twist(&d, dg).with_ideal(&s.points)?;
            self.add_seq(
                [rest, k.clone(), quot],
                [s.section.clone(), "wedge".into()],
                Rule::R1,
                &format!("defining sequence of {f}"),
            )?;
        }
        if factors.is_empty() && ideal.is_empty() {
            for c in self.ctx.curves.clone() {
                let cc = self.ctx.curve_coords(&c).expect("declared curve");
                if cc == line {
                    let self_int = self.ctx.class(&cc).try_mul(&self.ctx.class(&cc))?.integrate();
                    let sub = Key::line(vec![0; cc.len()], gamma);
                    let res = Key::Curve { curve: c.clone(), degree: *self_int.numer() };
                    self.add_seq(
                        [sub, k.clone(), res],
                        [format!("s_{c}"), "restr".into()],
                        Rule::R10,
                        &format!("0 -> O -> O({c}) -> O_{c}({c}) -> 0"),
                    )?;
                }
            }
        }
        if factors.is_empty() {
            self.degree_rule(k, &line, gamma, &ideal, v[0])?;
        }
        if factors.len() == 2 && factors[0] == factors[1] && ideal.is_empty() {
            let (d, dg) = self.ctx.serre.det_line(&factors[0])?;
            if line.iter().zip(&d).all(|(a, b)| a + b == 0) && gamma == dg % 2 {
                self.store.assert_direct(
                    v[0],
                    Interval { lo: 1, hi: None },
                    Rule::Identity,
                    &format!("identity endomorphism of {}", factors[0]),
                    vec![],
                )?;
            }
        }
        self.static_sections(k)
    }

    /// R9: vanishing of sections for line bundles (possibly with ideals).
    fn degree_rule(&mut self, k: &Key, line: &[i64], gamma: u8, ideal: &[String], h0: VarId) -> Result<()> {
        let c1 = self.ctx.class(line);
        let deg = degree(&c1, &self.ctx.polarization)?;
        let mut why = None;
        if deg < q(0) {
            why = Some(format!("deg {k} = {deg} < 0"));
        } else {
            for n in self.ctx.geom.nef_generators() {
                let p = c1.pair(&n)?;
                if p < q(0) {
                    why = Some(format!("{c1} . {n} = {p} < 0 against a nef class"));
                    break;
                }
            }
        }
        if why.is_none() && deg == q(0) {
            if !c1.is_zero() || gamma != 0 {
                why = Some(format!("{k} is a nontrivial line bundle of degree 0"));
            } else if !ideal.is_empty() {
                why = Some(format!("a degree-0 section has no zeros, so I[{}] kills it", ideal.join(",")));
            }
        }
        if let Some(w) = why {
            self.store.assert_direct(h0, Interval::exact(0), Rule::R9, &w, vec![])?;
        }
        Ok(())
    }

    /// R11a: a section whose zero locus contains `Z` is a section of `V (x) I_Z`.
    fn static_sections(&mut self, k: &Key) -> Result<()> {
        let Key::Bundle { ideal, .. } = k else { return Ok(()) };
        if ideal.len() != 1 {
            return Ok(());
        }
        let base = k.without_ideal();
        let z = &ideal[0];
        for s in self.ctx.sections.clone() {
            if s.bundle == base && self.ctx.contained_in(z, &s.zeros) {
                let h0 = self.keys[k][0];
                self.store.assert_direct(
                    h0,
                    Interval { lo: 1, hi: None },
                    Rule::R11,
                    &format!("{} vanishes on {z}", s.name),
                    vec![],
                )?;
            }
        }
        Ok(())
    }

    /// R11b: if `H^0(V)` is spanned by one section not vanishing on all of
    /// `Z` then `H^0(V (x) I_Z) = 0`.
    fn dynamic_sections(&mut self) -> Result<bool> {
        let mut todo = std::mem::take(&mut self.incidence_todo);
        for e in self.incidence_seen..self.store.events.len() {
            if let Some(ks) = self.incidence_watch.get(&self.store.events[e].var) {
                todo.extend(ks.iter().cloned());
            }
        }
        self.incidence_seen = self.store.events.len();
        let mut changed = false;
        for k in todo {
            if !self.incidence.contains(&k) {
                continue;
            }
            let Key::Bundle { ideal, .. } = &k else { continue };
            let base = k.without_ideal();
            let z = ideal[0].clone();
            let Some(bv) = self.keys.get(&base).map(|v| v[0]) else {
                self.incidence_todo.insert(k.clone());
                continue;
            };
            let watched = self.incidence_watch.entry(bv).or_default();
            if !watched.contains(&k) {
                watched.push(k.clone());
            }
            let b = self.store.vars[bv].clone();
            if b.lo != 1 || b.hi != Some(1) {
                continue;
            }
            for s in self.ctx.sections.clone() {
                if s.bundle != base || self.ctx.contained_in(&z, &s.zeros) {
                    continue;
                }
                let prem: Vec<EventId> = b.lo_event.into_iter().chain(b.hi_event).collect();
                let h0 = self.keys[&k][0];
                self.store.assert_direct(
                    h0,
                    Interval::exact(0),
                    Rule::R11,
                    &format!("H^0({base}) is spanned by {}, which does not vanish on all of {z}", s.name),
                    prem,
                )?;
                self.incidence.remove(&k);
                changed = true;
                break;
            }
        }
        Ok(changed)
    }

    /// Registers `0 -> A -> B -> C -> 0` and its long exact sequence.
    pub fn add_seq(&mut self, terms: [Key; 3], labels: [String; 2], rule: Rule, quote: &str) -> Result<usize> {
        if let Some(i) = self.seq_index.get(&terms) {
            return Ok(*i);
        }
        let chis: Vec<i64> = terms.iter().map(|t| self.chi(t)).collect::<Result<_>>()?;
        if chis[1] != chis[0] + chis[2] {
            return Err(Error::Input(format!(
                "sequence 0 -> {} -> {} -> {} -> 0 violates chi additivity ({} != {} + {})",
                terms[0], terms[1], terms[2], chis[1], chis[0], chis[2]
            )));
        }
        let id = self.seqs.len();
        let mut dims = Vec::new();
        for i in 0..=2 {
            for t in &terms {
                dims.push(self.var(t, i));
            }
        }
        let ranks: Vec<VarId> = (0..dims.len() - 1)
            .map(|p| self.store.new_var(format!("rank(seq{id}:{p})")))
            .collect();
        for (p, d) in dims.iter().enumerate() {
            let mut t = vec![(*d, 1)];
            if p > 0 {
                t.push((ranks[p - 1], -1));
            }
            if p < ranks.len() {
                t.push((ranks[p], -1));
            }
            let note = format!("exactness at H^{}({}) in seq{id} ({quote})", p / 3, terms[p % 3]);
            self.store.add_constraint(t, 0, Rule::R2, note)?;
        }
        self.seq_index.insert(terms.clone(), id);
        self.seqs.push(ExactSeq { terms, labels, rule, quote: quote.to_string(), ranks });
        while let Some(next) = self.pending.pop() {
            self.close(&next)?;
        }
        Ok(id)
    }

    /// Registers a sequence given by expressions (an axiom of the scene).
    pub fn assert_seq(&mut self, terms: [&SheafExpr; 3], labels: [&str; 2], quote: &str) -> Result<usize> {
        let keys = [self.ctx.key(terms[0])?, self.ctx.key(terms[1])?, self.ctx.key(terms[2])?];
        for k in &keys {
            self.register(k)?;
        }
        self.axioms.push(AxiomRecord::Seq {
            terms: [terms[0].clone(), terms[1].clone(), terms[2].clone()],
            labels: [labels[0].into(), labels[1].into()],
            quote: quote.into(),
        });
        self.add_seq(keys, [labels[0].into(), labels[1].into()], Rule::Axiom, quote)
    }

    /// Asserts `h^i(sheaf) in iv` as an axiom carrying a quote.
    pub fn assert_fact(&mut self, k: &Key, i: usize, iv: Interval, quote: &str, assumption: bool) -> Result<()> {
        self.register(k)?;
        let var = self.keys[k][i];
        let rule = if assumption { Rule::Assumption } else { Rule::Axiom };
        self.axioms.push(AxiomRecord::Fact { key: k.clone(), degree: i, value: iv, quote: quote.into(), assumption });
        self.store.assert_direct(var, iv, rule, quote, vec![])?;
        Ok(())
    }

    /// Records `h^0 = 0` for a Hom space between stable bundles.
    pub fn assert_stability_vanishing(&mut self, k: &Key, note: &str) -> Result<()> {
        self.register(k)?;
        let var = self.keys[k][0];
        self.axioms.push(AxiomRecord::Stability { key: k.clone(), note: note.into() });
        self.store.assert_direct(var, Interval::exact(0), Rule::R12, note, vec![])?;
        Ok(())
    }

    pub fn propagate(&mut self) -> Result<()> {
        self.propagate_with(&mut |_| 0)
    }

    pub fn propagate_with(&mut self, pick: store::Scheduler) -> Result<()> {
        loop {
            self.store.propagate_with(pick)?;
            if !self.dynamic_sections()? {
                return Ok(());
            }
        }
    }

    /// Current bounds for `h^i(k)`, registering and propagating if needed.
    pub fn h(&mut self, k: &Key, i: usize) -> Result<Interval> {
        if i > 2 {
            return Ok(Interval::exact(0));
        }
        self.register(k)?;
        self.propagate()?;
        Ok(self.store.interval(self.keys[k][i]))
    }

    pub fn h_expr(&mut self, e: &SheafExpr, i: usize) -> Result<Interval> {
        let k = self.ctx.key(e)?;
        self.h(&k, i)
    }

    /// Best known value with its certificate.
    pub fn query(&mut self, k: &Key, i: usize) -> Result<Fact> {
        let value = self.h(k, i)?;
        let var = self.keys[k][i];
        let v = &self.store.vars[var];
        let roots: Vec<EventId> = v.lo_event.into_iter().chain(v.hi_event).collect();
        let certificate = Certificate::from_events(&self.store, format!("h^{i}({k}) = {value}"), &roots);
        Ok(Fact { sheaf: k.clone(), degree: i, value, certificate })
    }

    /// The same scene input evaluated on other point data.
    pub fn with_points(&self, points: PointConfig) -> Result<Ledger> {
        let mut ctx = self.ctx.clone();
        ctx.points = points;
        ctx.serre = SerreTable::default();
        ctx.sections.clear();
        let mut l = Ledger::new(ctx)?;
        for a in &self.axioms {
            match a.clone() {
                AxiomRecord::Section { name, bundle, curve } => l.add_section(&name, &bundle, &curve)?,
                AxiomRecord::Serre(s) => {
                    l.add_serre(s)?;
                }
                AxiomRecord::Seq { terms, labels, quote } => {
                    l.assert_seq([&terms[0], &terms[1], &terms[2]], [&labels[0], &labels[1]], &quote)?;
                }
                AxiomRecord::Fact { key, degree, value, quote, assumption } => {
                    l.assert_fact(&key, degree, value, &quote, assumption)?
                }
                AxiomRecord::Stability { key, note } => l.assert_stability_vanishing(&key, &note)?,
            }
        }
        l.propagate()?;
        Ok(l)
    }

    /// A registered sequence starting `0 -> first -> middle`.
    pub fn seq_from(&self, first: &Key, middle: &Key) -> Option<usize> {
        self.seqs.iter().position(|s| &s.terms[0] == first && &s.terms[1] == middle)
    }

    pub fn seq_id(&self, terms: &[Key; 3]) -> Option<usize> {
        self.seq_index.get(terms).copied()
    }

    /// Property of the map at `position` of a registered sequence.
    pub fn derive_map_property(&self, seq: usize, position: usize) -> Result<MapFact> {
        let s = self
            .seqs
            .get(seq)
            .ok_or_else(|| Error::Input(format!("no sequence {seq}")))?;
        let r = *s
            .ranks
            .get(position)
            .ok_or_else(|| Error::Input(format!("no map at position {position}")))?;
        let dim = |p: usize| self.keys[&s.terms[p % 3]][p / 3];
        let (src, tgt) = (dim(position), dim(position + 1));
        let (rank, source, target) = (self.store.interval(r), self.store.interval(src), self.store.interval(tgt));
        let label = s.map_label(position);
        let ev = |v: VarId, side: Side| {
            let x = &self.store.vars[v];
            match side {
                Side::Lo => x.lo_event,
                Side::Hi => x.hi_event,
            }
        };
        let (property, roots): (MapProperty, Vec<Option<EventId>>) = if rank.hi == Some(0) {
            (MapProperty::Zero, vec![ev(r, Side::Hi)])
        } else if rank.lo >= 1 {
            let inj = source.hi == Some(rank.lo);
            let sur = target.hi == Some(rank.lo);
            let base = vec![ev(r, Side::Lo)];
            match (inj, sur) {
                (true, true) => (MapProperty::Isomorphism, [base, vec![ev(src, Side::Hi), ev(tgt, Side::Hi)]].concat()),
                (true, false) => (MapProperty::Injective, [base, vec![ev(src, Side::Hi)]].concat()),
                (false, true) => (MapProperty::Surjective, [base, vec![ev(tgt, Side::Hi)]].concat()),
                _ => (MapProperty::Nonzero, base),
            }
        } else {
            return Err(Error::Undetermined(format!("{label}: rank {rank}, source {source}, target {target}")));
        };
        let roots: Vec<EventId> = roots.into_iter().flatten().collect();
        let mut certificate = Certificate::from_events(&self.store, format!("{label} is {property:?} (rank {rank})"), &roots);
        certificate.conclude(Rule::R4, &format!("{label}: rank {rank}, source {source}, target {target}"));
        Ok(MapFact { map: label, property, rank, source, target, certificate })
    }

    /// Position of the map `H^degree(term) -> ...` in the sequence whose
    /// terms are given.
    pub fn map_in(&self, terms: &[Key; 3], degree: usize, term: usize) -> Result<MapFact> {
        let seq = self
            .seq_id(terms)
            .ok_or_else(|| Error::Input(format!("sequence 0 -> {} -> {} -> {} -> 0 is not registered", terms[0], terms[1], terms[2])))?;
        self.derive_map_property(seq, ExactSeq::position(degree, term))
    }

    /// Replays every event behind a certificate.
    pub fn replay(&self, c: &Certificate) -> Result<()> {
        c.replay(&self.store)
    }
}

#[cfg(test)]
pub(crate) mod tests;
