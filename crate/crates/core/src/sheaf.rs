//! Expression language for the sheaves and bundles built on the four
//! geometries, with Chern classes, Chern characters and Hirzebruch-Riemann-Roch.
//!
//! Flat (torsion) line bundles carry no rational Chern data; they only matter
//! to the cohomology rules in [`crate::ledger`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ring::{q, Fibration, Geometry, GeometryId, GradedClass, Q};

/// Order of the finite family of fibre characters modelled on `S1 x T`.
pub const X1_FIBRE_ORDER: u8 = 3;

/// A flat line bundle. On `X2` this is an element of `Z2^3 = <a, b, g>`
/// with `g` the pull-back of the Enriques canonical bundle; on the Enriques
/// surface only `g` is present; on `X1` the fibre part is a point of order
/// dividing [`X1_FIBRE_ORDER`] on the dual torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Character {
    pub a: u8,
    pub b: u8,
    pub g: u8,
    /// Modulus of the fibre components (`0` when there is no fibre).
    pub fibre_order: u8,
    pub has_gamma: bool,
}

impl Character {
    pub fn trivial_on(geom: &Geometry) -> Character {
        let (fibre_order, has_gamma) = match geom.id {
            GeometryId::S1 => (0, false),
            GeometryId::S2 => (0, true),
            GeometryId::X1 => (X1_FIBRE_ORDER, false),
            GeometryId::X2 => (2, true),
        };
        Character { a: 0, b: 0, g: 0, fibre_order, has_gamma }
    }

    pub fn new_on(geom: &Geometry, a: u8, b: u8, g: u8) -> Result<Character> {
        let t = Self::trivial_on(geom);
        if (t.fibre_order == 0 && (a != 0 || b != 0))
            || (t.fibre_order != 0 && (a >= t.fibre_order || b >= t.fibre_order))
            || (!t.has_gamma && g != 0)
            || g > 1
        {
            return Err(Error::Input(format!(
                "character ({a},{b},{g}) does not exist on {}",
                geom.name
            )));
        }
        Ok(Character { a, b, g, ..t })
    }

    pub fn gamma_on(geom: &Geometry) -> Result<Character> {
        Self::new_on(geom, 0, 0, 1)
    }

    pub fn is_trivial(&self) -> bool {
        self.a == 0 && self.b == 0 && self.g == 0
    }

    /// Nontrivial restriction to the torus fibres.
    pub fn is_fibre_nontrivial(&self) -> bool {
        self.a != 0 || self.b != 0
    }

    pub fn mul(&self, o: &Character) -> Character {
        let m = |x: u8, y: u8| if self.fibre_order == 0 { 0 } else { (x + y) % self.fibre_order };
        Character {
            a: m(self.a, o.a),
            b: m(self.b, o.b),
            g: (self.g + o.g) % 2,
            ..*self
        }
    }

    pub fn inv(&self) -> Character {
        let m = |x: u8| if self.fibre_order == 0 { 0 } else { (self.fibre_order - x) % self.fibre_order };
        Character { a: m(self.a), b: m(self.b), ..*self }
    }

    pub fn pow(&self, n: i64) -> Character {
        let mut acc = Character { a: 0, b: 0, g: 0, ..*self };
        let base = if n < 0 { self.inv() } else { *self };
        for _ in 0..n.unsigned_abs() {
            acc = acc.mul(&base);
        }
        acc
    }

    /// Every character on the geometry.
    pub fn all_on(geom: &Geometry) -> Vec<Character> {
        let t = Self::trivial_on(geom);
        let fo = t.fibre_order.max(1);
        let gs = if t.has_gamma { 2 } else { 1 };
        let mut out = Vec::new();
        for a in 0..fo {
            for b in 0..fo {
                for g in 0..gs {
                    out.push(Character { a, b, g, ..t });
                }
            }
        }
        out
    }

    /// Restriction of a threefold character to the base surface section:
    /// keeps the `g` component.
    pub fn gamma_part(&self) -> u8 {
        self.g
    }
}

impl fmt::Display for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            return write!(f, "1");
        }
        let mut parts = Vec::new();
        if self.a != 0 {
            parts.push(if self.a == 1 { "a".to_string() } else { format!("a^{}", self.a) });
        }
        if self.b != 0 {
            parts.push(if self.b == 1 { "b".to_string() } else { format!("b^{}", self.b) });
        }
        if self.g != 0 {
            parts.push("g".to_string());
        }
        write!(f, "{}", parts.join(""))
    }
}

/// A named set of points on the base surface.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PointSet {
    pub name: String,
    pub size: u32,
    /// Curve label the points are declared to lie on.
    pub on_curve: Option<String>,
}

/// Point sets with declared containments. Sets not related by a chain of
/// containments are in general position (disjoint, off every curve unless
/// declared).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PointConfig {
    pub sets: BTreeMap<String, PointSet>,
    /// `(larger, smaller)` pairs.
    pub contains: Vec<(String, String)>,
}

impl PointConfig {
    pub fn add_set(&mut self, name: &str, size: u32, on_curve: Option<&str>) -> Result<()> {
        if size == 0 {
            return Err(Error::Input(format!("point set {name} must be non-empty")));
        }
        if self.sets.contains_key(name) {
            return Err(Error::Input(format!("duplicate point set {name}")));
        }
        self.sets.insert(
            name.to_string(),
            PointSet { name: name.to_string(), size, on_curve: on_curve.map(str::to_string) },
        );
        Ok(())
    }

    pub fn add_containment(&mut self, larger: &str, smaller: &str) -> Result<()> {
        let (l, s) = (self.set(larger)?, self.set(smaller)?);
        if s.size > l.size {
            return Err(Error::Input(format!(
                "{smaller} ({}) cannot lie in {larger} ({})",
                s.size, l.size
            )));
        }
        if let Some(c) = &l.on_curve {
            if s.on_curve.as_ref() != Some(c) {
                return Err(Error::Input(format!("{smaller} must lie on {c} like {larger}")));
            }
        }
        self.contains.push((larger.to_string(), smaller.to_string()));
        Ok(())
    }

    pub fn set(&self, name: &str) -> Result<&PointSet> {
        self.sets
            .get(name)
            .ok_or_else(|| Error::Input(format!("unknown point set {name}")))
    }

    /// Size of a named set; `#n` names an anonymous set of `n` points in
    /// general position.
    pub fn size(&self, name: &str) -> Result<u32> {
        if let Some(n) = name.strip_prefix('#') {
            return n
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Error::Input(format!("bad anonymous point set {name}")));
        }
        Ok(self.set(name)?.size)
    }

    /// `smaller` is a subscheme of `larger`.
    pub fn is_subset(&self, smaller: &str, larger: &str) -> bool {
        if smaller == larger {
            return true;
        }
        self.contains
            .iter()
            .filter(|(l, _)| l == larger)
            .any(|(_, s)| self.is_subset(smaller, s))
    }

    pub fn lies_on(&self, points: &str, curve: &str) -> bool {
        self.sets
            .get(points)
            .and_then(|p| p.on_curve.as_deref()) == Some(curve)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LineBundle {
    pub c1: GradedClass,
    pub character: Character,
}

impl LineBundle {
    pub fn new(c1: GradedClass) -> LineBundle {
        let character = Character::trivial_on(c1.geometry());
        LineBundle { c1, character }
    }

    pub fn with_character(mut self, ch: Character) -> LineBundle {
        self.character = ch;
        self
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        self.c1.geometry()
    }

    pub fn dual(&self) -> LineBundle {
        LineBundle { c1: -&self.c1, character: self.character.inv() }
    }

    pub fn tensor(&self, o: &LineBundle) -> LineBundle {
        LineBundle { c1: &self.c1 + &o.c1, character: self.character.mul(&o.character) }
    }

    pub fn is_trivial(&self) -> bool {
        self.c1.is_zero() && self.character.is_trivial()
    }

    /// Integer coordinates of `c1` on the degree-2 basis.
    pub fn coords(&self) -> Result<Vec<i64>> {
        self.c1
            .part(1)
            .iter()
            .map(|x| {
                if x.is_integer() {
                    Ok(*x.numer())
                } else {
                    Err(Error::Input(format!("non-integral line bundle class {}", self.c1)))
                }
            })
            .collect()
    }
}

/// A rank-2 bundle `P` produced by the Serre construction:
/// `0 -> O -> P -> I_Z (x) det P -> 0` with section `section` vanishing on `Z`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SerreBundle {
    pub name: String,
    pub det: LineBundle,
    pub points: String,
    pub n_points: u32,
    pub section: String,
}

impl SerreBundle {
    /// Builds the bundle once the obstruction space `H^2(det*)` is known to
    /// vanish; `h2_dual_det` is the caller's best bound `[lo, hi]`.
    pub fn construct(
        name: &str,
        det: LineBundle,
        points: &str,
        n_points: u32,
        section: &str,
        h2_dual_det: (u64, Option<u64>),
    ) -> Result<SerreBundle> {
        if !det.geometry().is_surface() {
            return Err(Error::Unsupported(format!(
                "Serre construction of {name} is only modelled on surfaces"
            )));
        }
        match h2_dual_det {
            (_, Some(0)) => Ok(SerreBundle {
                name: name.to_string(),
                det,
                points: points.to_string(),
                n_points,
                section: section.to_string(),
            }),
            (lo, _) if lo > 0 => Err(Error::SerreObstructed {
                name: name.to_string(),
                reason: format!(">= {lo}"),
            }),
            (lo, hi) => Err(Error::SerreObstructed {
                name: name.to_string(),
                reason: format!(
                    "not known to vanish (bounds [{lo}, {}])",
                    hi.map_or("inf".to_string(), |h| h.to_string())
                ),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SheafExpr {
    Structure(Arc<Geometry>),
    Line(LineBundle),
    /// `I_Z (x) twist` for a locally free `twist` on a surface.
    Ideal { points: String, n: u32, twist: Box<SheafExpr> },
    Skyscraper { geom: Arc<Geometry>, points: String, n: u32 },
    Serre(Arc<SerreBundle>),
    Dual(Box<SheafExpr>),
    DirectSum(Box<SheafExpr>, Box<SheafExpr>),
    Tensor(Box<SheafExpr>, Box<SheafExpr>),
    Lambda2(Box<SheafExpr>),
    End(Box<SheafExpr>),
    Pullback { inner: Box<SheafExpr>, target: Arc<Geometry> },
    /// `(x) O(nS)` on the quotient threefold.
    SectionTwist(Box<SheafExpr>, i64),
    /// `(x) O_T(n)` on the product threefold.
    EllipticTwist(Box<SheafExpr>, i64),
}

/// Rank and total Chern class `1 + c1 + c2 (+ c3)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChernData {
    pub rank: i64,
    pub total: GradedClass,
}

impl ChernData {
    pub fn c(&self, i: usize) -> GradedClass {
        self.total.component(i)
    }

    pub fn c1(&self) -> GradedClass {
        self.c(1)
    }

    pub fn c2(&self) -> GradedClass {
        self.c(2)
    }

    pub fn c3(&self) -> GradedClass {
        let g = self.total.geometry();
        if g.dim() >= 3 {
            self.c(3)
        } else {
            g.zero(0)
        }
    }
}

fn binom(n: i64, k: i64) -> i64 {
    if k < 0 || n < 0 || k > n {
        return 0;
    }
    let mut r = 1i64;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

fn alternate(total: &GradedClass) -> GradedClass {
    let g = total.geometry();
    let mut out = g.zero(0);
    for k in 0..=g.dim() {
        let s = if k % 2 == 1 { -q(1) } else { q(1) };
        out = &out + &total.component(k).scale(s);
    }
    out
}

impl SheafExpr {
    pub fn structure(geom: &Arc<Geometry>) -> SheafExpr {
        SheafExpr::Structure(geom.clone())
    }

    pub fn line(c1: GradedClass) -> SheafExpr {
        SheafExpr::Line(LineBundle::new(c1))
    }

    pub fn dual(self) -> SheafExpr {
        SheafExpr::Dual(Box::new(self))
    }

    pub fn tensor(self, o: SheafExpr) -> SheafExpr {
        SheafExpr::Tensor(Box::new(self), Box::new(o))
    }

    pub fn sum(self, o: SheafExpr) -> SheafExpr {
        SheafExpr::DirectSum(Box::new(self), Box::new(o))
    }

    pub fn pullback(self, target: &Arc<Geometry>) -> SheafExpr {
        SheafExpr::Pullback { inner: Box::new(self), target: target.clone() }
    }

    pub fn geometry(&self) -> Arc<Geometry> {
        match self {
            SheafExpr::Structure(g) | SheafExpr::Skyscraper { geom: g, .. } => g.clone(),
            SheafExpr::Line(l) => l.geometry().clone(),
            SheafExpr::Serre(s) => s.det.geometry().clone(),
            SheafExpr::Ideal { twist, .. } => twist.geometry(),
            SheafExpr::Dual(e)
            | SheafExpr::Lambda2(e)
            | SheafExpr::End(e)
            | SheafExpr::SectionTwist(e, _)
            | SheafExpr::EllipticTwist(e, _) => e.geometry(),
            SheafExpr::DirectSum(a, _) | SheafExpr::Tensor(a, _) => a.geometry(),
            SheafExpr::Pullback { target, .. } => target.clone(),
        }
    }

    pub fn rank(&self) -> i64 {
        match self {
            SheafExpr::Structure(_) | SheafExpr::Line(_) | SheafExpr::Lambda2(_) => 1,
            SheafExpr::Skyscraper { .. } => 0,
            SheafExpr::Serre(_) => 2,
            SheafExpr::Ideal { twist, .. } => twist.rank(),
            SheafExpr::Dual(e)
            | SheafExpr::SectionTwist(e, _)
            | SheafExpr::EllipticTwist(e, _)
            | SheafExpr::Pullback { inner: e, .. } => e.rank(),
            SheafExpr::DirectSum(a, b) => a.rank() + b.rank(),
            SheafExpr::Tensor(a, b) => a.rank() * b.rank(),
            SheafExpr::End(e) => e.rank() * e.rank(),
        }
    }

    /// Chern data by structural recursion.
    pub fn chern(&self) -> Result<ChernData> {
        let g = self.geometry();
        let one = g.one();
        Ok(match self {
            SheafExpr::Structure(_) => ChernData { rank: 1, total: one },
            SheafExpr::Line(l) => ChernData { rank: 1, total: &one + &l.c1 },
            SheafExpr::Serre(s) => ChernData {
                rank: 2,
                total: &(&one + &s.det.c1) + &g.point().scale(q(s.n_points as i64)),
            },
            SheafExpr::Ideal { n, twist, .. } => {
                if !g.is_surface() {
                    return Err(Error::Unsupported("ideal sheaves of points on a threefold".into()));
                }
                let t = twist.chern()?;
                ChernData {
                    rank: t.rank,
                    total: &t.total + &g.point().scale(q(t.rank * *n as i64)),
                }
            }
            SheafExpr::Skyscraper { n, .. } => {
                if !g.is_surface() {
                    return Err(Error::Unsupported("skyscrapers on a threefold".into()));
                }
                ChernData { rank: 0, total: &one - &g.point().scale(q(*n as i64)) }
            }
            SheafExpr::Dual(e) => {
                let c = e.chern()?;
                ChernData { rank: c.rank, total: alternate(&c.total) }
            }
            SheafExpr::DirectSum(a, b) => {
                let (ca, cb) = (a.chern()?, b.chern()?);
                ChernData { rank: ca.rank + cb.rank, total: ca.total.try_mul(&cb.total)? }
            }
            SheafExpr::Tensor(a, b) => tensor_chern(&a.chern()?, &b.chern()?)?,
            SheafExpr::Lambda2(e) => {
                let c = e.chern()?;
                if c.rank != 2 {
                    return Err(Error::Input(format!("lambda2 of a rank-{} sheaf", c.rank)));
                }
                ChernData { rank: 1, total: &one + &c.c1() }
            }
            SheafExpr::End(e) => {
                let c = e.chern()?;
                if c.rank != 2 {
                    return Err(Error::Input(format!("end of a rank-{} sheaf", c.rank)));
                }
                let c1 = c.c1();
                ChernData { rank: 4, total: &one + &(&c.c2().scale(q(4)) - &(&c1 * &c1)) }
            }
            SheafExpr::Pullback { inner, target } => {
                let c = inner.chern()?;
                ChernData { rank: c.rank, total: target.pullback(&c.total)? }
            }
            SheafExpr::SectionTwist(e, n) | SheafExpr::EllipticTwist(e, n) => {
                let want = match self {
                    SheafExpr::SectionTwist(..) => Fibration::Section,
                    _ => Fibration::Product,
                };
                if g.fibration != Some(want) {
                    return Err(Error::Input(format!(
                        "{} twist on {}",
                        want.divisor_label(),
                        g.name
                    )));
                }
                let m = g.labelled(want.divisor_label()).expect("fibre divisor").scale(q(*n));
                twist_chern(&e.chern()?, &m)?
            }
        })
    }

    /// Chern character `(ch0, ch1, ch2, ch3)` as a single mixed-degree class.
    pub fn chern_character(&self) -> Result<GradedClass> {
        Ok(chern_to_ch(&self.chern()?))
    }

    /// Holomorphic Euler characteristic by Hirzebruch-Riemann-Roch.
    pub fn hrr_chi(&self) -> Result<Q> {
        let g = self.geometry();
        let td = &g.one() + &g.todd2();
        Ok(self.chern_character()?.try_mul(&td)?.integrate())
    }

    /// Canonical prefix serialization.
    pub fn render(&self) -> String {
        match self {
            SheafExpr::Structure(g) => {
                if g.is_surface() {
                    "O".into()
                } else {
                    "OX".into()
                }
            }
            SheafExpr::Line(l) => render_line(l),
            SheafExpr::Ideal { points, twist, .. } => format!("ideal({}, {})", pt(points), twist.render()),
            SheafExpr::Skyscraper { points, .. } => format!("sky({})", pt(points)),
            SheafExpr::Serre(s) => format!(
                "serre2(name={}, det={}, pts={}, section={})",
                s.name,
                render_line(&s.det),
                pt(&s.points),
                s.section
            ),
            SheafExpr::Dual(e) => format!("dual({})", e.render()),
            SheafExpr::DirectSum(a, b) => format!("sum({}, {})", a.render(), b.render()),
            SheafExpr::Tensor(a, b) => format!("tensor({}, {})", a.render(), b.render()),
            SheafExpr::Lambda2(e) => format!("lambda2({})", e.render()),
            SheafExpr::End(e) => format!("end({})", e.render()),
            SheafExpr::Pullback { inner, .. } => format!("pullback({})", inner.render()),
            SheafExpr::SectionTwist(e, n) => format!("stwist({}, {n})", e.render()),
            SheafExpr::EllipticTwist(e, n) => format!("etwist({}, {n})", e.render()),
        }
    }

    /// Short human-readable form using bundle names.
    pub fn label(&self) -> String {
        match self {
            SheafExpr::Structure(_) => "O".into(),
            SheafExpr::Line(l) => render_line(l),
            SheafExpr::Ideal { points, twist, .. } => format!("I[{points}]({})", twist.label()),
            SheafExpr::Skyscraper { points, .. } => format!("O[{points}]"),
            SheafExpr::Serre(s) => s.name.clone(),
            SheafExpr::Dual(e) => format!("{}*", e.label()),
            SheafExpr::DirectSum(a, b) => format!("({} + {})", a.label(), b.label()),
            SheafExpr::Tensor(a, b) => format!("{}.{}", a.label(), b.label()),
            SheafExpr::Lambda2(e) => format!("L2({})", e.label()),
            SheafExpr::End(e) => format!("End({})", e.label()),
            SheafExpr::Pullback { inner, .. } => format!("pi^{}", inner.label()),
            SheafExpr::SectionTwist(e, n) => format!("{}(({n})S)", e.label()),
            SheafExpr::EllipticTwist(e, n) => format!("{}.OT({n})", e.label()),
        }
    }
}

/// `c(E (x) M)` for a line class `m`: `c_k = sum_i C(r-i, k-i) c_i m^(k-i)`.
impl fmt::Display for SheafExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn twist_chern(c: &ChernData, m: &GradedClass) -> Result<ChernData> {
    let g = c.total.geometry().clone();
    let mut total = g.zero(0);
    for k in 0..=g.dim() {
        for i in 0..=k {
            let coef = binom(c.rank - i as i64, (k - i) as i64);
            if coef == 0 {
                continue;
            }
            let term = c.c(i).try_mul(&m.pow((k - i) as u32))?.scale(q(coef));
            total = total.try_add(&term)?;
        }
    }
    Ok(ChernData { rank: c.rank, total })
}

pub fn tensor_chern(a: &ChernData, b: &ChernData) -> Result<ChernData> {
    let g = a.total.geometry().clone();
    // rank-1 factor with no c2: plain twist, valid on every geometry
    for (x, y) in [(a, b), (b, a)] {
        if y.rank == 1 && y.c2().is_zero() && (g.dim() < 3 || y.c3().is_zero()) {
            return twist_chern(x, &y.c1());
        }
    }
    if g.dim() != 2 {
        return Err(Error::Unsupported(
            "tensor products of higher-rank sheaves are only modelled on surfaces".into(),
        ));
    }
    let (ra, rb) = (a.rank, b.rank);
    let (c1a, c1b) = (a.c1(), b.c1());
    let c1 = &c1a.scale(q(rb)) + &c1b.scale(q(ra));
    let c2 = [
        a.c2().scale(q(rb)),
        b.c2().scale(q(ra)),
        (&c1a * &c1a).scale(q(binom(rb, 2))),
        (&c1b * &c1b).scale(q(binom(ra, 2))),
        (&c1a * &c1b).scale(q(ra * rb - 1)),
    ]
    .iter()
    .fold(g.zero(0), |acc, t| &acc + t);
    Ok(ChernData { rank: ra * rb, total: &(&g.one() + &c1) + &c2 })
}

/// Newton's identities: `ch = r + c1 + (c1^2 - 2c2)/2 + (c1^3 - 3c1c2 + 3c3)/6`.
pub fn chern_to_ch(c: &ChernData) -> GradedClass {
    let g = c.total.geometry().clone();
    let (c1, c2) = (c.c1(), c.c2());
    let mut ch = &g.one().scale(q(c.rank)) + &c1;
    ch = &ch + &(&(&c1 * &c1) - &c2.scale(q(2))).scale(Q::new(1, 2));
    if g.dim() >= 3 {
        let c3 = c.c3();
        let t = &(&c1.pow(3) - &(&c1 * &c2).scale(q(3))) + &c3.scale(q(3));
        ch = &ch + &t.scale(Q::new(1, 6));
    }
    ch
}

/// Inverse of [`chern_to_ch`] (used by tests as an independent route).
pub fn ch_to_chern(ch: &GradedClass) -> ChernData {
    let g = ch.geometry().clone();
    let rank = *ch.part(0)[0].numer();
    let c1 = ch.component(1);
    let ch2 = ch.component(2);
    // c2 = c1^2/2 - ch2
    let c2 = &(&c1 * &c1).scale(Q::new(1, 2)) - &ch2;
    let mut total = &(&g.one() + &c1) + &c2;
    if g.dim() >= 3 {
        // c3 = 2 ch3 - c1^3/3 + c1 c2
        let ch3 = ch.component(3);
        let c3 = &(&ch3.scale(q(2)) - &c1.pow(3).scale(Q::new(1, 3))) + &(&c1 * &c2);
        total = &total + &c3;
    }
    ChernData { rank, total }
}

fn pt(points: &str) -> &str {
    points.strip_prefix('#').unwrap_or(points)
}

fn render_line(l: &LineBundle) -> String {
    let g = l.geometry();
    let coords: Vec<String> = l
        .c1
        .part(1)
        .iter()
        .map(|x| if x.is_integer() { x.numer().to_string() } else { format!("{}/{}", x.numer(), x.denom()) })
        .collect();
    let head = if g.is_surface() { "line" } else { "xline" };
    let ch = &l.character;
    let tors = if ch.is_trivial() {
        String::new()
    } else if g.is_surface() {
        ";g".to_string()
    } else {
        format!(";{},{},{}", ch.a, ch.b, ch.g)
    };
    format!("{head}({}{tors})", coords.join(","))
}

/// Name resolution and geometry context for [`parse_sheaf`].
pub struct ParseContext<'a> {
    pub surface: Arc<Geometry>,
    pub threefold: Option<Arc<Geometry>>,
    pub points: &'a PointConfig,
    pub names: &'a BTreeMap<String, SheafExpr>,
}

struct Parser<'s> {
    src: &'s [u8],
    pos: usize,
}

impl<'s> Parser<'s> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Positioned { line: 1, column: self.pos + 1, message: msg.into() })
    }

    fn ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_alphanumeric() || c == b'_' || c == b'\'' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos {
            return self.err("expected identifier");
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn int(&mut self) -> Result<i64> {
        self.ws();
        let start = self.pos;
        if self.pos < self.src.len() && (self.src[self.pos] == b'-' || self.src[self.pos] == b'+') {
            self.pos += 1;
        }
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let s = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        match s.parse() {
            Ok(v) => Ok(v),
            Err(_) => self.err(format!("expected integer, found `{s}`")),
        }
    }

    fn int_list(&mut self) -> Result<Vec<i64>> {
        let mut out = vec![self.int()?];
        while self.peek() == Some(b',') {
            self.pos += 1;
            out.push(self.int()?);
        }
        Ok(out)
    }
}

/// Parses the canonical text syntax (see [`SheafExpr::render`]).
pub fn parse_sheaf(text: &str, ctx: &ParseContext) -> Result<SheafExpr> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = parse_expr(&mut p, ctx)?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(e)
}

fn parse_line_body(p: &mut Parser, ctx: &ParseContext, geom: &Arc<Geometry>) -> Result<LineBundle> {
    let coords = p.int_list()?;
    if coords.len() != geom.basis_len(1) {
        return p.err(format!(
            "line bundle on {} needs {} coordinates",
            geom.name,
            geom.basis_len(1)
        ));
    }
    let mut lb = LineBundle::new(geom.divisor_i(&coords));
    if p.peek() == Some(b';') {
        p.pos += 1;
        if geom.is_surface() {
            let t = p.ident()?;
            if t != "g" {
                return p.err("surface torsion must be `g`");
            }
            lb.character = Character::gamma_on(geom)?;
        } else {
            let v = p.int_list()?;
            if v.len() != 3 || v.iter().any(|x| *x < 0) {
                return p.err("threefold character needs three components");
            }
            lb.character = Character::new_on(geom, v[0] as u8, v[1] as u8, v[2] as u8)?;
        }
    }
    let _ = ctx;
    p.eat(b')')?;
    Ok(lb)
}

fn point_ref(p: &mut Parser) -> Result<String> {
    let id = p.ident()?;
    Ok(if id.bytes().all(|b| b.is_ascii_digit()) { format!("#{id}") } else { id })
}

fn parse_expr(p: &mut Parser, ctx: &ParseContext) -> Result<SheafExpr> {
    p.ws();
    let start = p.pos;
    let head = p.ident()?;
    let threefold = || {
        ctx.threefold
            .clone()
            .ok_or_else(|| Error::Parse(format!("`{head}` needs a threefold geometry")))
    };
    if p.peek() != Some(b'(') {
        return match head.as_str() {
            "O" => Ok(SheafExpr::structure(&ctx.surface)),
            "OX" => Ok(SheafExpr::structure(&threefold()?)),
            "gamma" => Ok(SheafExpr::Line(
                LineBundle::new(ctx.surface.zero(1)).with_character(Character::gamma_on(&ctx.surface)?),
            )),
            name => ctx
                .names
                .get(name)
                .cloned()
                .ok_or_else(|| Error::Parse(format!("unknown bundle name `{name}`"))),
        };
    }
    p.eat(b'(')?;
    let e = match head.as_str() {
        "line" => return Ok(SheafExpr::Line(parse_line_body(p, ctx, &ctx.surface)?)),
        "xline" => return Ok(SheafExpr::Line(parse_line_body(p, ctx, &threefold()?)?)),
        "flat" => {
            let g = threefold()?;
            let v = p.int_list()?;
            if v.len() != 3 || v.iter().any(|x| *x < 0) {
                return p.err("flat(a,b,g) needs three components");
            }
            let ch = Character::new_on(&g, v[0] as u8, v[1] as u8, v[2] as u8)?;
            SheafExpr::Line(LineBundle::new(g.zero(1)).with_character(ch))
        }
        "ideal" => {
            let points = point_ref(p)?;
            let n = ctx.points.size(&points)?;
            p.eat(b',')?;
            let twist = parse_expr(p, ctx)?;
            SheafExpr::Ideal { points, n, twist: Box::new(twist) }
        }
        "sky" => {
            let points = point_ref(p)?;
            let n = ctx.points.size(&points)?;
            SheafExpr::Skyscraper { geom: ctx.surface.clone(), points, n }
        }
        "serre2" => {
            let mut fields: BTreeMap<String, String> = BTreeMap::new();
            let mut det = None;
            loop {
                let key = p.ident()?;
                p.eat(b'=')?;
                if key == "det" {
                    let d = parse_expr(p, ctx)?;
                    match d {
                        SheafExpr::Line(l) if l.geometry().is_surface() => det = Some(l),
                        _ => return p.err("serre2 det must be a surface line bundle"),
                    }
                } else {
                    let v = p.ident()?;
                    fields.insert(key, v);
                }
                if p.peek() == Some(b',') {
                    p.pos += 1;
                } else {
                    break;
                }
            }
            let det = det.ok_or_else(|| Error::Parse("serre2 needs det=".into()))?;
            let points = fields
                .remove("pts")
                .map(|v| if v.bytes().all(|b| b.is_ascii_digit()) { format!("#{v}") } else { v })
                .ok_or_else(|| Error::Parse("serre2 needs pts=".into()))?;
            let n = ctx.points.size(&points)?;
            let name = fields.remove("name").unwrap_or_else(|| format!("P[{points}]"));
            let section = fields.remove("section").unwrap_or_else(|| format!("s_{name}"));
            if let Some(k) = fields.keys().next() {
                return p.err(format!("unknown serre2 field `{k}`"));
            }
            SheafExpr::Serre(Arc::new(SerreBundle { name, det, points, n_points: n, section }))
        }
        "dual" | "lambda2" | "end" | "pullback" => {
            let inner = Box::new(parse_expr(p, ctx)?);
            match head.as_str() {
                "dual" => SheafExpr::Dual(inner),
                "lambda2" => SheafExpr::Lambda2(inner),
                "end" => SheafExpr::End(inner),
                _ => SheafExpr::Pullback { inner, target: threefold()? },
            }
        }
        "sum" | "tensor" => {
            let a = parse_expr(p, ctx)?;
            p.eat(b',')?;
            let b = parse_expr(p, ctx)?;
            if head == "sum" {
                a.sum(b)
            } else {
                a.tensor(b)
            }
        }
        "stwist" | "etwist" => {
            let inner = Box::new(parse_expr(p, ctx)?);
            p.eat(b',')?;
            let n = p.int()?;
            if head == "stwist" {
                SheafExpr::SectionTwist(inner, n)
            } else {
                SheafExpr::EllipticTwist(inner, n)
            }
        }
        other => {
            p.pos = start;
            return p.err(format!("unknown constructor `{other}`"));
        }
    };
    p.eat(b')')?;
    Ok(e)
}

/// Checks that an expression is well formed: ranks for `lambda2`/`end`,
/// geometry of twists, supported tensor products.
pub fn validate(e: &SheafExpr) -> Result<()> {
    e.chern().map(|_| ())
}

impl Zero for Character {
    fn zero() -> Self {
        Character { a: 0, b: 0, g: 0, fibre_order: 0, has_gamma: false }
    }
    fn is_zero(&self) -> bool {
        self.is_trivial()
    }
}

impl std::ops::Add for Character {
    type Output = Character;
    fn add(self, o: Character) -> Character {
        self.mul(&o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s1_setup() -> (Arc<Geometry>, SheafExpr, SheafExpr) {
        let s = Geometry::k3();
        let lstar = LineBundle::new(s.divisor_i(&[1, -1]));
        let astar = SerreBundle {
            name: "Astar".into(),
            det: lstar.clone(),
            points: "ZA".into(),
            n_points: 2,
            section: "sA".into(),
        };
        let b = SerreBundle {
            name: "B".into(),
            det: lstar,
            points: "ZB".into(),
            n_points: 3,
            section: "sB".into(),
        };
        (s, SheafExpr::Serre(Arc::new(astar)), SheafExpr::Serre(Arc::new(b)))
    }

    #[test]
    fn serre_chern_data() {
        let (s, astar, b) = s1_setup();
        let c = astar.chern().unwrap();
        assert_eq!(c.rank, 2);
        assert_eq!(c.c1(), s.parse_class("w1 - w2").unwrap());
        assert_eq!(c.c2(), s.point().scale(q(2)));
        let a = astar.clone().dual().chern().unwrap();
        assert_eq!(a.c1(), s.parse_class("w2 - w1").unwrap());
        assert_eq!(a.c2(), s.point().scale(q(2)));
        assert_eq!(b.chern().unwrap().c2(), s.point().scale(q(3)));
    }

    #[test]
    fn chern_character_examples() {
        let (s, astar, _) = s1_setup();
        let ch = astar.dual().chern_character().unwrap();
        assert_eq!(ch, s.parse_class("2 + w2 - w1 - 4*pt").unwrap());
        assert_eq!(SheafExpr::structure(&s).chern_character().unwrap(), s.one());
        let l = SheafExpr::line(s.divisor_i(&[-1, 1]));
        let sum = l.clone().sum(l.dual());
        assert_eq!(sum.chern_character().unwrap(), s.parse_class("2 - 4*pt").unwrap());
    }

    #[test]
    fn euler_characteristics_on_k3() {
        let (s, astar, b) = s1_setup();
        assert_eq!(SheafExpr::structure(&s).hrr_chi().unwrap(), q(2));
        assert_eq!(astar.dual().hrr_chi().unwrap(), q(0));
        assert_eq!(b.hrr_chi().unwrap(), q(-1));
    }

    #[test]
    fn end_and_lambda2() {
        let (s, astar, _) = s1_setup();
        let end = SheafExpr::End(Box::new(astar.clone()));
        let c = end.chern().unwrap();
        assert_eq!(c.rank, 4);
        assert!(c.c1().is_zero());
        // 4 c2 - c1^2 = 8 + 4
        assert_eq!(c.c2(), s.point().scale(q(12)));
        let via_tensor = astar.clone().tensor(astar.clone().dual()).chern().unwrap();
        assert_eq!(via_tensor, c);
        let l2 = SheafExpr::Lambda2(Box::new(astar.clone())).chern().unwrap();
        assert_eq!(l2.c1(), astar.chern().unwrap().c1());
        let bad = SheafExpr::Lambda2(Box::new(SheafExpr::structure(&s)));
        assert!(matches!(bad.chern(), Err(Error::Input(_))));
    }

    #[test]
    fn ideal_sheaf_chi() {
        let s = Geometry::k3();
        let i = SheafExpr::Ideal {
            points: "Z".into(),
            n: 3,
            twist: Box::new(SheafExpr::line(s.divisor_i(&[1, -1]))),
        };
        // chi(L*) - 3 = 0 - 3
        assert_eq!(i.hrr_chi().unwrap(), q(-3));
    }

    #[test]
    fn character_group_laws() {
        let x2 = Geometry::enriques_quotient();
        let all = Character::all_on(&x2);
        assert_eq!(all.len(), 8);
        for a in &all {
            assert!(a.mul(&a.inv()).is_trivial());
            assert!(a.mul(a).is_trivial());
            for b in &all {
                assert_eq!(a.mul(b), b.mul(a));
            }
        }
        let x1 = Geometry::k3_times_elliptic();
        assert_eq!(Character::all_on(&x1).len(), 9);
        assert!(Character::new_on(&x1, 0, 0, 1).is_err());
    }

    #[test]
    fn point_config_incidence() {
        let mut pc = PointConfig::default();
        pc.add_set("ZB", 2, None).unwrap();
        pc.add_set("ZA", 1, None).unwrap();
        pc.add_set("ZC", 3, None).unwrap();
        pc.add_containment("ZB", "ZA").unwrap();
        assert!(pc.is_subset("ZA", "ZB"));
        assert!(!pc.is_subset("ZB", "ZA"));
        assert!(!pc.is_subset("ZA", "ZC"));
        assert!(pc.add_containment("ZA", "ZC").is_err());
    }

    #[test]
    fn parse_render_round_trip() {
        let s = Geometry::k3();
        let x = Geometry::fibred_over(&s);
        let mut pc = PointConfig::default();
        pc.add_set("ZA", 2, None).unwrap();
        let names = BTreeMap::new();
        let ctx = ParseContext { surface: s, threefold: Some(x), points: &pc, names: &names };
        for t in [
            "etwist(pullback(dual(serre2(name=Astar, det=line(1,-1), pts=ZA, section=sA))), 3)",
            "sum(O, line(0,1))",
            "tensor(ideal(ZA, line(1,-1)), sky(ZA))",
            "xline(0,0,1;1,2,0)",
        ] {
            let e = parse_sheaf(t, &ctx).unwrap();
            assert_eq!(e.render(), t);
            assert_eq!(parse_sheaf(&e.render(), &ctx).unwrap(), e);
        }
        assert!(parse_sheaf("line(1)", &ctx).is_err());
        assert!(parse_sheaf("frob(O)", &ctx).is_err());
    }
}
