//! Finite-basis models of the even rational cohomology rings of the two
//! surfaces (a K3 and an Enriques surface) and the two elliptic threefolds
//! fibred over them.
//!
//! A threefold here is always a torus fibration `X -> S` over one of the
//! surfaces with a distinguished fibre-direction divisor `F` (the pulled-back
//! top class `wT` of the curve factor on `S x T`, or the zero-section `S` on
//! the quotient). The ring is generated by the pulled-back surface lattice and
//! `F` subject to `F^2 = 0`, `F . [T] = [pt]`, `D_i . D_j = (D_i . D_j)_S [T]`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

pub type Q = Rational64;

pub fn q(n: i64) -> Q {
    Q::from_integer(n)
}

/// Renders a rational as `p/q` (integers as `p/1`), the format used in
/// fixtures and reports.
pub fn fmt_q(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Renders a rational compactly: `3`, `-1/2`.
pub fn fmt_q_short(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().ok()?;
            let d: i64 = d.trim().parse().ok()?;
            if d == 0 {
                None
            } else {
                Some(Q::new(n, d))
            }
        }
        None => s.parse::<i64>().ok().map(Q::from_integer),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum GeometryId {
    /// K3 surface, a (2,3)-divisor in P1 x P2.
    S1,
    /// S1 x T.
    X1,
    /// Enriques surface.
    S2,
    /// (K3 x T)/Z2, torus-fibred over S2 with a section.
    X2,
}

impl GeometryId {
    pub fn dim(self) -> usize {
        match self {
            GeometryId::S1 | GeometryId::S2 => 2,
            GeometryId::X1 | GeometryId::X2 => 3,
        }
    }
}

impl fmt::Display for GeometryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

/// Which kind of torus fibration a threefold is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Fibration {
    /// Product `S x T`; fibre-direction divisor is `wT`.
    Product,
    /// Quotient `(K3 x T)/Z2` with zero-section `S`, normal bundle 2-torsion.
    Section,
}

impl Fibration {
    pub fn divisor_label(self) -> &'static str {
        match self {
            Fibration::Product => "wT",
            Fibration::Section => "S",
        }
    }
}

/// Intersection form on the (rational) Picard lattice of a surface.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurfaceLattice {
    pub labels: Vec<String>,
    pub gram: Vec<Vec<Q>>,
}

impl SurfaceLattice {
    pub fn new(labels: &[&str], gram: Vec<Vec<i64>>) -> Self {
        SurfaceLattice {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            gram: gram
                .into_iter()
                .map(|row| row.into_iter().map(q).collect())
                .collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn pair(&self, a: &[Q], b: &[Q]) -> Q {
        let mut s = Q::zero();
        for (i, ai) in a.iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            for (j, bj) in b.iter().enumerate() {
                s += ai * bj * self.gram[i][j];
            }
        }
        s
    }

    pub fn is_integral(&self) -> bool {
        self.gram.iter().flatten().all(|x| x.is_integer())
    }
}

#[derive(Debug, PartialEq, Serialize)]
pub struct Geometry {
    pub id: GeometryId,
    pub name: String,
    pub lattice: SurfaceLattice,
    pub fibration: Option<Fibration>,
    /// Holomorphic Euler characteristic of the structure sheaf.
    pub chi_o: Q,
    /// Canonical class is the 2-torsion character `g` (Enriques-type).
    pub torsion_canonical: bool,
    /// Topological Euler number of the base surface (24 for K3, 12 for Enriques).
    pub base_euler: Q,
    /// Abelianised fundamental group, documentation only.
    pub h1: &'static str,
    #[serde(skip)]
    base: Option<Arc<Geometry>>,
}

impl Geometry {
    fn surface(id: GeometryId, name: &str, lattice: SurfaceLattice) -> Geometry {
        let (chi_o, torsion_canonical, base_euler, h1) = match id {
            GeometryId::S1 => (q(2), false, q(24), "0"),
            GeometryId::S2 => (q(1), true, q(12), "Z2"),
            _ => unreachable!("not a surface"),
        };
        Geometry {
            id,
            name: name.to_string(),
            lattice,
            fibration: None,
            chi_o,
            torsion_canonical,
            base_euler,
            h1,
            base: None,
        }
    }

    fn over(base: Arc<Geometry>) -> Geometry {
        let (id, fibration, h1) = match base.id {
            GeometryId::S1 => (GeometryId::X1, Fibration::Product, "Z^2"),
            GeometryId::S2 => (GeometryId::X2, Fibration::Section, "Z2^3"),
            _ => unreachable!("base must be a surface"),
        };
        let name = base.name.replacen(if base.id == GeometryId::S1 { "S1" } else { "S2" }, &id.to_string(), 1);
        Geometry {
            id,
            name,
            lattice: base.lattice.clone(),
            fibration: Some(fibration),
            chi_o: q(0),
            torsion_canonical: false,
            base_euler: base.base_euler,
            h1,
            base: Some(base),
        }
    }

    /// Generic K3 `(2,3)`-divisor in `P1 x P2`: `w1^2 = 0, w1 w2 = 3, w2^2 = 2`.
    pub fn k3() -> Arc<Geometry> {
        Arc::new(Self::surface(
            GeometryId::S1,
            "S1",
            SurfaceLattice::new(&["w1", "w2"], vec![vec![0, 3], vec![3, 2]]),
        ))
    }

    /// Enriques surface covered by the double cover of `P1 x P1`; the two
    /// descended Fubini-Study classes meet once.
    pub fn enriques() -> Arc<Geometry> {
        Arc::new(Self::surface(
            GeometryId::S2,
            "S2",
            SurfaceLattice::new(&["w1", "w2"], vec![vec![0, 1], vec![1, 0]]),
        ))
    }

    /// Enriques surface with an extra `-2`-curve class `C`.
    pub fn enriques_with_sphere(c_w1: i64, c_w2: i64) -> Arc<Geometry> {
        Arc::new(Self::surface(
            GeometryId::S2,
            "S2[C]",
            SurfaceLattice::new(
                &["w1", "w2", "C"],
                vec![vec![0, 1, c_w1], vec![1, 0, c_w2], vec![c_w1, c_w2, -2]],
            ),
        ))
    }

    /// Torus fibration over a surface: `S1 -> X1`, `S2 -> X2`.
    pub fn fibred_over(base: &Arc<Geometry>) -> Arc<Geometry> {
        Arc::new(Self::over(base.clone()))
    }

    pub fn k3_times_elliptic() -> Arc<Geometry> {
        Self::fibred_over(&Self::k3())
    }

    pub fn enriques_quotient() -> Arc<Geometry> {
        Self::fibred_over(&Self::enriques())
    }

    pub fn by_name(name: &str) -> Option<Arc<Geometry>> {
        match name {
            "S1" => Some(Self::k3()),
            "X1" => Some(Self::k3_times_elliptic()),
            "S2" => Some(Self::enriques()),
            "X2" => Some(Self::enriques_quotient()),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.id.dim()
    }

    pub fn is_surface(&self) -> bool {
        self.dim() == 2
    }

    /// The base surface of a threefold (`None` for surfaces).
    pub fn base(&self) -> Option<&Arc<Geometry>> {
        self.base.as_ref()
    }

    pub fn same(&self, other: &Geometry) -> bool {
        self.name == other.name && self.lattice == other.lattice
    }

    fn rank(&self) -> usize {
        self.lattice.rank()
    }

    /// Number of basis elements in real degree `2k`.
    pub fn basis_len(&self, k: usize) -> usize {
        match (self.dim(), k) {
            (_, 0) => 1,
            (2, 1) => self.rank(),
            (2, 2) => 1,
            (3, 1) | (3, 2) => self.rank() + 1,
            (3, 3) => 1,
            _ => 0,
        }
    }

    pub fn basis_labels(&self, k: usize) -> Vec<String> {
        let lat = &self.lattice.labels;
        match (self.fibration, k) {
            (_, 0) => vec!["1".into()],
            (None, 1) => lat.clone(),
            (None, 2) => vec!["pt".into()],
            (Some(f), 1) => {
                let mut v = lat.clone();
                v.push(f.divisor_label().into());
                v
            }
            (Some(f), 2) => {
                let mut v = vec!["T".to_string()];
                v.extend(lat.iter().map(|l| format!("{}.{}", f.divisor_label(), l)));
                v
            }
            (Some(_), 3) => vec!["pt".into()],
            _ => vec![],
        }
    }

    /// Product of two basis elements, as a coefficient vector in degree
    /// `k1 + k2`; `None` when the degree exceeds the dimension.
    pub fn basis_mul(&self, k1: usize, i: usize, k2: usize, j: usize) -> Option<Vec<Q>> {
        let k = k1 + k2;
        if k > self.dim() {
            return None;
        }
        let mut out = vec![Q::zero(); self.basis_len(k)];
        if k1 == 0 {
            out[j] = Q::one();
            return Some(out);
        }
        if k2 == 0 {
            out[i] = Q::one();
            return Some(out);
        }
        let g = &self.lattice.gram;
        let n = self.rank();
        match self.fibration {
            None => {
                // only (1,1) survives on a surface
                out[0] = g[i][j];
            }
            Some(_) => match (k1, k2) {
                (1, 1) => match (i < n, j < n) {
                    (true, true) => out[0] = g[i][j],
                    (true, false) => out[1 + i] = Q::one(),
                    (false, true) => out[1 + j] = Q::one(),
                    (false, false) => {}
                },
                (1, 2) | (2, 1) => {
                    let (d, c) = if k1 == 1 { (i, j) } else { (j, i) };
                    match (d < n, c) {
                        (true, 0) => {}
                        (true, c) => out[0] = g[d][c - 1],
                        (false, 0) => out[0] = Q::one(),
                        (false, _) => {}
                    }
                }
                _ => unreachable!(),
            },
        }
        Some(out)
    }

    pub fn zero(self: &Arc<Self>, k: usize) -> GradedClass {
        let mut c = GradedClass::empty(self);
        c.parts[k] = vec![Q::zero(); self.basis_len(k)];
        c
    }

    pub fn one(self: &Arc<Self>) -> GradedClass {
        let mut c = GradedClass::empty(self);
        c.parts[0][0] = Q::one();
        c
    }

    pub fn basis_class(self: &Arc<Self>, k: usize, i: usize) -> GradedClass {
        let mut c = GradedClass::empty(self);
        c.parts[k][i] = Q::one();
        c
    }

    pub fn point(self: &Arc<Self>) -> GradedClass {
        self.basis_class(self.dim(), 0)
    }

    /// Divisor class with the given coefficients on the degree-2 basis
    /// (lattice labels, then the fibre divisor on threefolds).
    pub fn divisor(self: &Arc<Self>, coeffs: &[Q]) -> GradedClass {
        let mut c = GradedClass::empty(self);
        for (i, x) in coeffs.iter().enumerate() {
            c.parts[1][i] = *x;
        }
        c
    }

    pub fn divisor_i(self: &Arc<Self>, coeffs: &[i64]) -> GradedClass {
        let v: Vec<Q> = coeffs.iter().map(|&x| q(x)).collect();
        self.divisor(&v)
    }

    /// Looks up a basis element by label (`w1`, `wT`, `T`, `S.w2`, `pt`, `1`).
    pub fn labelled(self: &Arc<Self>, label: &str) -> Option<GradedClass> {
        for k in 0..=self.dim() {
            if let Some(i) = self.basis_labels(k).iter().position(|l| l == label) {
                return Some(self.basis_class(k, i));
            }
        }
        None
    }

    /// Parses a rational linear combination of basis labels, e.g.
    /// `w2 + 6*wT`, `-w1+w2`, `12*S + w1 + 2*w2`, `15*T - 6*wT.w1`.
    pub fn parse_class(self: &Arc<Self>, text: &str) -> Result<GradedClass> {
        let mut acc: Option<GradedClass> = None;
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(Error::Parse(format!("empty class expression on {}", self.name)));
        }
        let mut terms = Vec::new();
        let mut cur = String::new();
        for ch in s.chars() {
            if (ch == '+' || ch == '-') && !cur.is_empty() && !cur.ends_with('*') {
                terms.push(std::mem::take(&mut cur));
            }
            cur.push(ch);
        }
        terms.push(cur);
        for t in terms {
            let (sign, body) = match t.strip_prefix('-') {
                Some(b) => (-Q::one(), b),
                None => (Q::one(), t.strip_prefix('+').unwrap_or(&t)),
            };
            let (coef, label) = match body.split_once('*') {
                Some((c, l)) => (
                    parse_q(c).ok_or_else(|| Error::Parse(format!("bad coefficient `{c}`")))?,
                    l,
                ),
                None => match parse_q(body) {
                    Some(c) => (c, "1"),
                    None => (Q::one(), body),
                },
            };
            let basis = self
                .labelled(label)
                .ok_or_else(|| Error::Parse(format!("unknown class label `{label}` on {}", self.name)))?;
            let term = basis.scale(sign * coef);
            acc = Some(match acc {
                None => term,
                Some(a) => &a + &term,
            });
        }
        Ok(acc.expect("non-empty"))
    }

    /// Pulls a class back from the base surface along the fibration.
    pub fn pullback(self: &Arc<Self>, c: &GradedClass) -> Result<GradedClass> {
        let base = self
            .base()
            .ok_or_else(|| Error::Input(format!("{} is not fibred", self.name)))?;
        if !c.geom.same(base) {
            return Err(Error::MixedGeometry(c.geom.name.clone(), base.name.clone()));
        }
        let mut out = GradedClass::empty(self);
        out.parts[0][0] = c.parts[0][0];
        for (i, x) in c.parts[1].iter().enumerate() {
            out.parts[1][i] = *x;
        }
        out.parts[2][0] = c.parts[2][0];
        Ok(out)
    }

    /// Second Chern class of the tangent bundle.
    pub fn c2_tangent(self: &Arc<Self>) -> GradedClass {
        match self.fibration {
            None => self.point().scale(self.base_euler),
            Some(_) => self.labelled("T").expect("T").scale(self.base_euler),
        }
    }

    /// Degree-2 part of the Todd class (`c2/12`, first Chern class being
    /// rationally zero on all four spaces).
    pub fn todd2(self: &Arc<Self>) -> GradedClass {
        self.c2_tangent().scale(Q::new(1, 12))
    }

    /// Nef divisor classes used for the necessary effectivity test:
    /// the lattice generators `w1, w2` and the fibre divisor.
    pub fn nef_generators(self: &Arc<Self>) -> Vec<GradedClass> {
        let mut out: Vec<GradedClass> = ["w1", "w2"]
            .iter()
            .filter_map(|l| self.labelled(l))
            .collect();
        if let Some(f) = self.fibration {
            out.push(self.labelled(f.divisor_label()).expect("fibre divisor"));
        }
        out
    }

    /// Plain-text multiplication table: basis labels per degree followed by
    /// every product of positive-degree basis elements, coefficients `p/q`.
    pub fn table_fixture(self: &Arc<Self>) -> String {
        let mut out = format!("geometry {}\n", self.name);
        for k in 1..=self.dim() {
            out.push_str(&format!("basis {}: {}\n", 2 * k, self.basis_labels(k).join(" ")));
        }
        let elems: Vec<(usize, usize)> = (1..=self.dim())
            .flat_map(|k| (0..self.basis_len(k)).map(move |i| (k, i)))
            .collect();
        for (a, &(k1, i)) in elems.iter().enumerate() {
            for &(k2, j) in &elems[a..] {
                let Some(v) = self.basis_mul(k1, i, k2, j) else { continue };
                let labels = self.basis_labels(k1 + k2);
                let terms: Vec<String> = v
                    .iter()
                    .zip(&labels)
                    .filter(|(x, _)| !x.is_zero())
                    .map(|(x, l)| format!("{} {}", fmt_q(x), l))
                    .collect();
                out.push_str(&format!(
                    "{} * {} = {}\n",
                    self.basis_labels(k1)[i],
                    self.basis_labels(k2)[j],
                    if terms.is_empty() { "0".to_string() } else { terms.join(" + ") }
                ));
            }
        }
        out
    }
}

/// An even-degree rational class on a fixed geometry. `parts[k]` holds the
/// coefficients in real degree `2k`.
#[derive(Clone)]
pub struct GradedClass {
    geom: Arc<Geometry>,
    parts: Vec<Vec<Q>>,
}

impl GradedClass {
    fn empty(geom: &Arc<Geometry>) -> Self {
        let parts = (0..=geom.dim()).map(|k| vec![Q::zero(); geom.basis_len(k)]).collect();
        GradedClass { geom: geom.clone(), parts }
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geom
    }

    pub fn part(&self, k: usize) -> &[Q] {
        &self.parts[k]
    }

    /// Keeps only the degree-`2k` component.
    pub fn component(&self, k: usize) -> GradedClass {
        let mut c = GradedClass::empty(&self.geom);
        c.parts[k] = self.parts[k].clone();
        c
    }

    pub fn is_zero(&self) -> bool {
        self.parts.iter().flatten().all(|x| x.is_zero())
    }

    /// True when every nonzero coefficient sits in degree `2k`.
    pub fn is_homogeneous(&self, k: usize) -> bool {
        self.parts
            .iter()
            .enumerate()
            .all(|(d, p)| d == k || p.iter().all(|x| x.is_zero()))
    }

    pub fn scale(&self, s: Q) -> GradedClass {
        GradedClass {
            geom: self.geom.clone(),
            parts: self
                .parts
                .iter()
                .map(|p| p.iter().map(|x| x * s).collect())
                .collect(),
        }
    }

    pub fn try_add(&self, other: &GradedClass) -> Result<GradedClass> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (p, o) in out.parts.iter_mut().zip(&other.parts) {
            for (x, y) in p.iter_mut().zip(o) {
                *x += y;
            }
        }
        Ok(out)
    }

    fn check_same(&self, other: &GradedClass) -> Result<()> {
        if self.geom.same(&other.geom) {
            Ok(())
        } else {
            Err(Error::MixedGeometry(self.geom.name.clone(), other.geom.name.clone()))
        }
    }

    /// Ring product; components above the top degree are dropped.
    pub fn try_mul(&self, other: &GradedClass) -> Result<GradedClass> {
        self.check_same(other)?;
        let g = &self.geom;
        let mut out = GradedClass::empty(g);
        for (k1, p1) in self.parts.iter().enumerate() {
            for (i, a) in p1.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (k2, p2) in other.parts.iter().enumerate() {
                    for (j, b) in p2.iter().enumerate() {
                        if b.is_zero() {
                            continue;
                        }
                        if let Some(v) = g.basis_mul(k1, i, k2, j) {
                            let ab = a * b;
                            for (t, x) in v.iter().enumerate() {
                                if !x.is_zero() {
                                    out.parts[k1 + k2][t] += ab * x;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn pow(&self, n: u32) -> GradedClass {
        let mut acc = self.geom.one();
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Coefficient of `[pt]`; zero for every lower-degree component.
    pub fn integrate(&self) -> Q {
        self.parts[self.geom.dim()][0]
    }

    pub fn coefficient(&self, label: &str) -> Option<Q> {
        for k in 0..=self.geom.dim() {
            if let Some(i) = self.geom.basis_labels(k).iter().position(|l| l == label) {
                return Some(self.parts[k][i]);
            }
        }
        None
    }

    /// Pairing with a divisor: `integral(self . d)` for 4-classes on a
    /// threefold or 2-classes on a surface.
    pub fn pair(&self, d: &GradedClass) -> Result<Q> {
        Ok(self.try_mul(d)?.integrate())
    }
}

/// `degree(c1, polarization)`: `c1 . w` on a surface, `c1 . w^2` on a
/// threefold.
pub fn degree(c1: &GradedClass, polarization: &GradedClass) -> Result<Q> {
    let g = c1.geometry();
    let w = match g.dim() {
        2 => polarization.clone(),
        _ => polarization.try_mul(polarization)?,
    };
    Ok(c1.try_mul(&w)?.integrate())
}

impl PartialEq for GradedClass {
    fn eq(&self, other: &Self) -> bool {
        self.geom.same(&other.geom) && self.parts == other.parts
    }
}

impl fmt::Display for GradedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for k in 0..=self.geom.dim() {
            for (x, l) in self.parts[k].iter().zip(self.geom.basis_labels(k)) {
                if x.is_zero() {
                    continue;
                }
                let neg = x.is_negative();
                let a = x.abs();
                let sign = match (first, neg) {
                    (true, true) => "-",
                    (true, false) => "",
                    (false, true) => " - ",
                    (false, false) => " + ",
                };
                let body = if l == "1" {
                    fmt_q_short(&a)
                } else if a.is_one() {
                    l.clone()
                } else {
                    format!("{}*{}", fmt_q_short(&a), l)
                };
                write!(f, "{sign}{body}")?;
                first = false;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for GradedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.geom.name, self)
    }
}

impl Serialize for GradedClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl Add for &GradedClass {
    type Output = GradedClass;
    fn add(self, rhs: &GradedClass) -> GradedClass {
        self.try_add(rhs).expect("classes on different geometries")
    }
}

impl Sub for &GradedClass {
    type Output = GradedClass;
    fn sub(self, rhs: &GradedClass) -> GradedClass {
        self.try_add(&rhs.scale(-Q::one())).expect("classes on different geometries")
    }
}

impl Mul for &GradedClass {
    type Output = GradedClass;
    fn mul(self, rhs: &GradedClass) -> GradedClass {
        self.try_mul(rhs).expect("classes on different geometries")
    }
}

impl Neg for &GradedClass {
    type Output = GradedClass;
    fn neg(self) -> GradedClass {
        self.scale(-Q::one())
    }
}
