//! Scene files: a geometry, the bundles on it, axioms, claims to compare
//! against, and the checks to run.
//!
//! One declaration per line, `#` starts a comment:
//!
//! ```text
//! scene k3-product
//! geometry k3
//! polarization w2
//! points ZA 2
//! points ZB 3
//! bundle Astar = serre2(det=line(1,-1), pts=ZA, section=sA)
//! bundle B = serre2(det=line(1,-1), pts=ZB, section=sB)
//! summand A' = etwist(pullback(dual(Astar)), 3)
//! summand B' = etwist(pullback(B), -3)
//! omega w2 + 6*wT
//! claim chi = 3 "=3, as required"
//! check det chi stability
//! ```
//!
//! Keys: `scene`, `geometry` (`k3` or `enriques`), `curve NAME w1=a w2=b`
//! (a `-2`-curve, enriques only), `polarization CLASS`, `points NAME N [on
//! CURVE]`, `contain LARGER SMALLER`, `branch LARGER SMALLER` (the incidence
//! toggled for the dual pairing), `section NAME = LINE on CURVE`, `bundle NAME
//! = SHEAF`, `summand NAME = SHEAF` (on the threefold), `omega CLASS`,
//! `sequence S1 -> S2 -> S3 by f, g "QUOTE"`, `claim QUANTITY = VALUE
//! "QUOTE"`, `check CHECK...` and `search rank_max=R box=B`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ledger::{Ledger, SurfaceContext};
use crate::ring::{Geometry, GradedClass};
use crate::sheaf::{parse_sheaf, ParseContext, PointConfig, SheafExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Det,
    Chi,
    Stability,
    Pairings,
    DualPairings,
    EndPairing,
    Anomaly,
    Search,
}

impl Check {
    pub const ALL: [Check; 8] = [
        Check::Det,
        Check::Chi,
        Check::Stability,
        Check::Pairings,
        Check::DualPairings,
        Check::EndPairing,
        Check::Anomaly,
        Check::Search,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Det => "det",
            Check::Chi => "chi",
            Check::Stability => "stability",
            Check::Pairings => "pairings",
            Check::DualPairings => "dual-pairings",
            Check::EndPairing => "end-pairing",
            Check::Anomaly => "anomaly",
            Check::Search => "search",
        }
    }

    pub fn parse(s: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What a claim is about.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantity {
    /// `chi(E)`.
    Chi,
    /// `c2(E)`.
    C2,
    /// `c2(X) - c2(E)`.
    Anomaly,
    /// `c2(F (x) M)` for `F` of rank `rank` with `c1 = 0` and `c2` the anomaly class.
    Twisted { rank: i64, twist: String },
    /// `c2(E) . D`.
    Pair { divisor: String },
    /// `c2(X) - c2(E)` against `omega`.
    Bogomolov,
    /// `h^i` of a sheaf on the surface.
    H { degree: usize, sheaf: String },
    /// Dimensions of the four summands of `H^1(End E)` on the surface.
    End,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Chi => write!(f, "chi"),
            Quantity::C2 => write!(f, "c2"),
            Quantity::Anomaly => write!(f, "anomaly"),
            Quantity::Twisted { rank, twist } => write!(f, "twisted({rank}, {twist})"),
            Quantity::Pair { divisor } => write!(f, "pair({divisor})"),
            Quantity::Bogomolov => write!(f, "bogomolov"),
            Quantity::H { degree, sheaf } => write!(f, "h{degree}({sheaf})"),
            Quantity::End => write!(f, "end"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClaimDecl {
    pub quantity: Quantity,
    /// Normalized value text: a class, an integer or a list of integers.
    pub value: String,
    pub quote: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PointDecl {
    pub name: String,
    pub size: u32,
    pub on: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CurveDecl {
    pub name: String,
    pub w1: i64,
    pub w2: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SectionLine {
    pub name: String,
    pub bundle: String,
    pub curve: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SeqDecl {
    pub terms: [String; 3],
    pub maps: [String; 2],
    pub quote: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SearchDecl {
    pub rank_max: u32,
    pub box_size: u32,
}

/// Normalized scene: every sheaf and class is stored in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Scene {
    pub name: String,
    pub geometry: String,
    pub curve: Option<CurveDecl>,
    pub polarization: String,
    pub points: Vec<PointDecl>,
    pub contains: Vec<(String, String)>,
    pub branch: Option<(String, String)>,
    pub sections: Vec<SectionLine>,
    pub bundles: Vec<(String, String)>,
    pub summands: Vec<(String, String)>,
    pub omega: Option<String>,
    pub sequences: Vec<SeqDecl>,
    pub claims: Vec<ClaimDecl>,
    pub checks: Vec<Check>,
    pub search: Option<SearchDecl>,
}

/// Where a piece of text sits in the file.
#[derive(Clone, Copy)]
struct Span {
    line: usize,
    column: usize,
}

fn at(sp: Span, e: Error) -> Error {
    match e {
        Error::Positioned { column, message, .. } => {
            Error::Positioned { line: sp.line, column: sp.column + column - 1, message }
        }
        other => Error::Positioned { line: sp.line, column: sp.column, message: strip(&other) },
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Parse(m) | Error::Input(m) | Error::Unsupported(m) => m.clone(),
        e => e.to_string(),
    }
}

fn fail<T>(sp: Span, msg: impl Into<String>) -> Result<T> {
    Err(Error::Positioned { line: sp.line, column: sp.column, message: msg.into() })
}

/// Geometry of a scene before any bundles: the surface, its threefold and the point data.
pub struct Frame {
    pub surface: Arc<Geometry>,
    pub threefold: Arc<Geometry>,
    pub points: PointConfig,
}

fn surface_of(geometry: &str, curve: Option<&CurveDecl>) -> Option<Arc<Geometry>> {
    match (geometry, curve) {
        ("k3", None) => Some(Geometry::k3()),
        ("enriques", None) => Some(Geometry::enriques()),
        ("enriques", Some(c)) => Some(Geometry::enriques_with_sphere(c.w1, c.w2)),
        _ => None,
    }
}

/// Splits `text` at the first `=` outside parentheses.
fn split_eq(text: &str) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            '=' if depth == 0 => return Some((&text[..i], &text[i + 1..])),
            _ => {}
        }
    }
    None
}

/// A trailing `"..."`.
fn split_quote(text: &str) -> Option<(&str, String)> {
    let start = text.find('"')?;
    let rest = text[start..].trim_end();
    if rest.len() < 2 || !rest.ends_with('"') {
        return None;
    }
    Some((&text[..start], rest[1..rest.len() - 1].to_string()))
}

/// Column (1-based) of `part` inside `line`, where `part` is a subslice.
fn col(line: &str, part: &str) -> usize {
    let off = part.as_ptr() as usize - line.as_ptr() as usize;
    line[..off].chars().count() + 1 + (part.len() - part.trim_start().len())
}

struct Builder {
    scene: Scene,
    frame: Option<Frame>,
    names: BTreeMap<String, SheafExpr>,
    seen: BTreeMap<&'static str, usize>,
}

impl Builder {
    fn frame(&mut self, sp: Span) -> Result<&Frame> {
        if self.frame.is_none() {
            let s = surface_of(&self.scene.geometry, self.scene.curve.as_ref())
                .ok_or_else(|| Error::Positioned { line: sp.line, column: 1, message: "declare `geometry` first".into() })?;
            let t = Geometry::fibred_over(&s);
            self.frame = Some(Frame { surface: s, threefold: t, points: PointConfig::default() });
        }
        Ok(self.frame.as_ref().unwrap())
    }

    fn sheaf(&mut self, sp: Span, text: &str, threefold: bool) -> Result<SheafExpr> {
        self.frame(sp)?;
        let f = self.frame.as_ref().unwrap();
        let ctx = ParseContext {
            surface: f.surface.clone(),
            threefold: Some(f.threefold.clone()),
            points: &f.points,
            names: &self.names,
        };
        let e = parse_sheaf(text.trim(), &ctx).map_err(|e| at(sp, e))?;
        crate::sheaf::validate(&e).map_err(|e| at(sp, e))?;
        if e.geometry().is_surface() == threefold {
            return fail(sp, format!("`{}` must live on the {}", text.trim(), if threefold { "threefold" } else { "surface" }));
        }
        Ok(e)
    }

    fn class(&mut self, sp: Span, text: &str, threefold: bool) -> Result<GradedClass> {
        let f = self.frame(sp)?;
        let g = if threefold { f.threefold.clone() } else { f.surface.clone() };
        g.parse_class(text).map_err(|e| at(sp, e))
    }

    fn name(&mut self, sp: Span, name: &str) -> Result<String> {
        let name = name.trim();
        let ok = !name.is_empty()
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
            && name.chars().next().is_some_and(|c| c.is_ascii_alphabetic());
        if !ok {
            return fail(sp, format!("bad name `{name}`"));
        }
        if self.names.contains_key(name) || ["O", "OX", "gamma"].contains(&name) {
            return fail(sp, format!("duplicate bundle name `{name}`"));
        }
        Ok(name.to_string())
    }

    fn once(&mut self, sp: Span, key: &'static str) -> Result<()> {
        if let Some(prev) = self.seen.insert(key, sp.line) {
            return fail(sp, format!("`{key}` already given on line {prev}"));
        }
        Ok(())
    }

    fn frozen(&self, sp: Span, what: &str) -> Result<()> {
        if self.frame.is_some() {
            return fail(sp, format!("`{what}` must come before anything that uses the geometry"));
        }
        Ok(())
    }

    fn line(&mut self, lno: usize, raw: &str) -> Result<()> {
        let body = match raw.find('#') {
            Some(i) if !raw[..i].contains('"') => &raw[..i],
            _ => raw,
        };
        let t = body.trim();
        if t.is_empty() {
            return Ok(());
        }
        let (key, rest) = t.split_once(char::is_whitespace).unwrap_or((t, ""));
        let sp = Span { line: lno, column: col(raw, rest) };
        let kp = Span { line: lno, column: col(raw, key) };
        match key {
            "scene" => {
                self.once(kp, "scene")?;
                self.scene.name = rest.trim().to_string();
            }
            "geometry" => {
                self.once(kp, "geometry")?;
                self.frozen(kp, "geometry")?;
                let g = rest.trim();
                if !["k3", "enriques"].contains(&g) {
                    return fail(sp, format!("unknown geometry `{g}` (k3 or enriques)"));
                }
                self.scene.geometry = g.to_string();
            }
            "curve" => {
                self.once(kp, "curve")?;
                self.frozen(kp, "curve")?;
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let parse = |p: &str, k: &str| p.strip_prefix(k).and_then(|v| v.parse::<i64>().ok());
                match parts.as_slice() {
                    [n, a, b] => match (parse(a, "w1="), parse(b, "w2=")) {
                        (Some(w1), Some(w2)) => {
                            self.scene.curve = Some(CurveDecl { name: n.to_string(), w1, w2 })
                        }
                        _ => return fail(sp, "expected `curve NAME w1=A w2=B`"),
                    },
                    _ => return fail(sp, "expected `curve NAME w1=A w2=B`"),
                }
                if self.scene.geometry != "enriques" {
                    return fail(kp, "curves can only be added to the enriques lattice");
                }
                if self.scene.curve.as_ref().is_some_and(|c| c.name != "C") {
                    return fail(sp, "the extra curve class is labelled `C`");
                }
            }
            "polarization" => {
                self.once(kp, "polarization")?;
                let c = self.class(sp, rest, false)?;
                if !c.is_homogeneous(1) {
                    return fail(sp, "polarization must be a divisor class");
                }
                self.scene.polarization = c.to_string();
            }
            "omega" => {
                self.once(kp, "omega")?;
                let c = self.class(sp, rest, true)?;
                if !c.is_homogeneous(1) {
                    return fail(sp, "omega must be a divisor class");
                }
                self.scene.omega = Some(c.to_string());
            }
            "points" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let (name, n, on) = match parts.as_slice() {
                    [name, n] => (*name, *n, None),
                    [name, n, "on", c] => (*name, *n, Some(c.to_string())),
                    _ => return fail(sp, "expected `points NAME N [on CURVE]`"),
                };
                let size: u32 = n.parse().map_err(|_| at(sp, Error::Parse(format!("bad point count `{n}`"))))?;
                if let Some(c) = &on {
                    if self.scene.curve.as_ref().map(|d| &d.name) != Some(c) {
                        return fail(sp, format!("unknown curve `{c}`"));
                    }
                }
                self.frame(sp)?;
                self.frame.as_mut().unwrap().points.add_set(name, size, on.as_deref()).map_err(|e| at(sp, e))?;
                self.scene.points.push(PointDecl { name: name.into(), size, on });
            }
            "contain" | "branch" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let [a, b] = parts.as_slice() else { return fail(sp, format!("expected `{key} LARGER SMALLER`")) };
                let pair = (a.to_string(), b.to_string());
                self.frame(sp)?;
                if key == "branch" {
                    self.once(kp, "branch")?;
                }
                let pts = &mut self.frame.as_mut().unwrap().points;
                if key == "contain" {
                    pts.add_containment(a, b).map_err(|e| at(sp, e))?;
                    self.scene.contains.push(pair);
                } else {
                    pts.clone().add_containment(a, b).map_err(|e| at(sp, e))?;
                    self.scene.branch = Some(pair);
                }
            }
            "section" => {
                let Some((name, rhs)) = split_eq(rest) else { return fail(sp, "expected `section NAME = LINE on CURVE`") };
                let Some((expr, curve)) = rhs.rsplit_once(" on ") else {
                    return fail(sp, "expected `section NAME = LINE on CURVE`");
                };
                let curve = curve.trim();
                if self.scene.curve.as_ref().map(|c| c.name.as_str()) != Some(curve) {
                    return fail(sp, format!("unknown curve `{curve}`"));
                }
                let esp = Span { line: lno, column: col(raw, expr) };
                let e = self.sheaf(esp, expr, false)?;
                if !matches!(e, SheafExpr::Line(_)) {
                    return fail(esp, "a curve section must be a section of a line bundle");
                }
                let name = name.trim();
                if self.scene.sections.iter().any(|s| s.name == name) {
                    return fail(sp, format!("duplicate section `{name}`"));
                }
                self.scene.sections.push(SectionLine { name: name.into(), bundle: e.render(), curve: curve.into() });
            }
            "bundle" | "summand" => {
                let Some((name, expr)) = split_eq(rest) else { return fail(sp, format!("expected `{key} NAME = SHEAF`")) };
                let name = self.name(sp, name)?;
                let esp = Span { line: lno, column: col(raw, expr) };
                let mut e = self.sheaf(esp, expr, key == "summand")?;
                if let SheafExpr::Serre(s) = &e {
                    if !s.name.starts_with("P[") && s.name != name {
                        return fail(esp, format!("serre2 name `{}` differs from `{name}`", s.name));
                    }
                    let mut s = (**s).clone();
                    if s.section.starts_with("s_P[") {
                        s.section = format!("s_{name}");
                    }
                    s.name = name.clone();
                    e = SheafExpr::Serre(Arc::new(s));
                }
                self.names.insert(name.clone(), e.clone());
                let list = if key == "bundle" { &mut self.scene.bundles } else { &mut self.scene.summands };
                list.push((name, e.render()));
            }
            "sequence" => {
                let Some((head, quote)) = split_quote(rest) else { return fail(sp, "sequence needs a quote") };
                let Some((terms, maps)) = head.rsplit_once(" by ") else {
                    return fail(sp, "expected `sequence S1 -> S2 -> S3 by f, g \"QUOTE\"`");
                };
                let parts: Vec<&str> = terms.split("->").collect();
                if parts.len() != 3 {
                    return fail(sp, "a sequence has three terms");
                }
                let mut out = Vec::new();
                for p in parts {
                    let e = self.sheaf(Span { line: lno, column: col(raw, p) }, p, false)?;
                    out.push(e.render());
                }
                let m: Vec<&str> = maps.split(',').map(str::trim).collect();
                let [f, g] = m.as_slice() else { return fail(sp, "a sequence names two maps") };
                self.scene.sequences.push(SeqDecl {
                    terms: [out[0].clone(), out[1].clone(), out[2].clone()],
                    maps: [f.to_string(), g.to_string()],
                    quote,
                });
            }
            "claim" => {
                let Some((head, quote)) = split_quote(rest) else { return fail(sp, "claim needs a quote") };
                let Some((lhs, rhs)) = split_eq(head) else { return fail(sp, "expected `claim QUANTITY = VALUE \"QUOTE\"`") };
                let lsp = Span { line: lno, column: col(raw, lhs) };
                let vsp = Span { line: lno, column: col(raw, rhs) };
                let claim = self.claim(lsp, vsp, lhs.trim(), rhs.trim(), quote)?;
                if self.scene.claims.iter().any(|c| c.quantity == claim.quantity) {
                    return fail(lsp, format!("duplicate claim on {}", claim.quantity));
                }
                self.scene.claims.push(claim);
            }
            "check" => {
                let mut pos = rest;
                for w in rest.split_whitespace() {
                    let wsp = Span { line: lno, column: col(raw, &pos[pos.find(w).unwrap()..]) };
                    pos = &pos[pos.find(w).unwrap() + w.len()..];
                    let c = Check::parse(w).ok_or_else(|| {
                        at(wsp, Error::Parse(format!("unknown check `{w}`")))
                    })?;
                    if !self.scene.checks.contains(&c) {
                        self.scene.checks.push(c);
                    }
                }
            }
            "search" => {
                self.once(kp, "search")?;
                let mut d = SearchDecl { rank_max: crate::search::DEFAULT_RANK_MAX, box_size: crate::search::DEFAULT_BOX };
                for w in rest.split_whitespace() {
                    match w.split_once('=') {
                        Some(("rank_max", v)) if v.parse::<u32>().is_ok() => d.rank_max = v.parse().unwrap(),
                        Some(("box", v)) if v.parse::<u32>().is_ok() => d.box_size = v.parse().unwrap(),
                        _ => return fail(sp, format!("bad search option `{w}`")),
                    }
                }
                self.scene.search = Some(d);
            }
            other => return fail(kp, format!("unknown key `{other}`")),
        }
        Ok(())
    }

    fn claim(&mut self, lsp: Span, vsp: Span, lhs: &str, rhs: &str, quote: String) -> Result<ClaimDecl> {
        let (head, arg) = match lhs.split_once('(') {
            Some((h, a)) => match a.trim_end().strip_suffix(')') {
                Some(a) => (h.trim(), Some(a)),
                None => return fail(lsp, "unbalanced parenthesis"),
            },
            None => (lhs, None),
        };
        let int = |v: &str| v.parse::<i64>().map_err(|_| at(vsp, Error::Parse(format!("expected an integer, found `{v}`"))));
        let (quantity, value) = match (head, arg) {
            ("chi", None) => (Quantity::Chi, int(rhs)?.to_string()),
            ("c2", None) | ("anomaly", None) => {
                let c = self.class(vsp, rhs, true)?;
                (if head == "c2" { Quantity::C2 } else { Quantity::Anomaly }, c.to_string())
            }
            ("twisted", Some(a)) => {
                let Some((r, m)) = a.split_once(',') else { return fail(lsp, "expected `twisted(RANK, CLASS)`") };
                let rank = r.trim().parse::<i64>().ok().filter(|r| *r >= 1).ok_or_else(|| at(lsp, Error::Parse("bad rank".into())))?;
                let m = self.class(lsp, m, true)?;
                let v = self.class(vsp, rhs, true)?;
                (Quantity::Twisted { rank, twist: m.to_string() }, v.to_string())
            }
            ("pair", Some(d)) => {
                let d = self.class(lsp, d, true)?;
                (Quantity::Pair { divisor: d.to_string() }, int(rhs)?.to_string())
            }
            ("bogomolov", None) => (Quantity::Bogomolov, int(rhs)?.to_string()),
            ("end", None) => {
                let v: Vec<String> = rhs.split_whitespace().map(|x| int(x).map(|i| i.to_string())).collect::<Result<_>>()?;
                if v.len() != 4 {
                    return fail(vsp, "`end` takes the four summand dimensions");
                }
                (Quantity::End, v.join(" "))
            }
            (h, Some(s)) if h.len() == 2 && h.starts_with('h') && h[1..].parse::<usize>().is_ok_and(|d| d <= 2) => {
                let e = self.sheaf(lsp, s, false)?;
                (Quantity::H { degree: h[1..].parse().unwrap(), sheaf: e.render() }, int(rhs)?.to_string())
            }
            _ => return fail(lsp, format!("unknown quantity `{lhs}`")),
        };
        Ok(ClaimDecl { quantity, value, quote })
    }
}

/// Parses and normalizes a scene. Semantic checks that need the ledger
/// (Serre existence, axioms) happen in [`Scene::load`].
pub fn parse_scene(text: &str) -> Result<Scene> {
    let mut b = Builder {
        scene: Scene {
            name: String::new(),
            geometry: String::new(),
            curve: None,
            polarization: String::new(),
            points: vec![],
            contains: vec![],
            branch: None,
            sections: vec![],
            bundles: vec![],
            summands: vec![],
            omega: None,
            sequences: vec![],
            claims: vec![],
            checks: vec![],
            search: None,
        },
        frame: None,
        names: BTreeMap::new(),
        seen: BTreeMap::new(),
    };
    let mut last = 0;
    for (i, raw) in text.lines().enumerate() {
        b.line(i + 1, raw)?;
        last = i + 1;
    }
    let end = Span { line: last.max(1), column: 1 };
    if b.scene.geometry.is_empty() {
        return fail(end, "missing `geometry`");
    }
    if b.scene.polarization.is_empty() {
        return fail(end, "missing `polarization`");
    }
    b.scene.checks.sort();
    Ok(b.scene)
}

/// Canonical text of a scene; `parse_scene(&render_scene(s)) == s`.
pub fn render_scene(s: &Scene) -> String {
    let mut out = String::new();
    let mut push = |l: String| {
        out.push_str(&l);
        out.push('\n');
    };
    if !s.name.is_empty() {
        push(format!("scene {}", s.name));
    }
    push(format!("geometry {}", s.geometry));
    if let Some(c) = &s.curve {
        push(format!("curve {} w1={} w2={}", c.name, c.w1, c.w2));
    }
    push(format!("polarization {}", s.polarization));
    for p in &s.points {
        match &p.on {
            Some(c) => push(format!("points {} {} on {c}", p.name, p.size)),
            None => push(format!("points {} {}", p.name, p.size)),
        }
    }
    for (a, b) in &s.contains {
        push(format!("contain {a} {b}"));
    }
    if let Some((a, b)) = &s.branch {
        push(format!("branch {a} {b}"));
    }
    for x in &s.sections {
        push(format!("section {} = {} on {}", x.name, x.bundle, x.curve));
    }
    for (n, e) in &s.bundles {
        push(format!("bundle {n} = {e}"));
    }
    for (n, e) in &s.summands {
        push(format!("summand {n} = {e}"));
    }
    if let Some(o) = &s.omega {
        push(format!("omega {o}"));
    }
    for q in &s.sequences {
        push(format!(
            "sequence {} -> {} -> {} by {}, {} \"{}\"",
            q.terms[0], q.terms[1], q.terms[2], q.maps[0], q.maps[1], q.quote
        ));
    }
    for c in &s.claims {
        push(format!("claim {} = {} \"{}\"", c.quantity, c.value, c.quote));
    }
    if !s.checks.is_empty() {
        let cs: Vec<&str> = s.checks.iter().map(|c| c.name()).collect();
        push(format!("check {}", cs.join(" ")));
    }
    if let Some(d) = &s.search {
        push(format!("search rank_max={} box={}", d.rank_max, d.box_size));
    }
    out
}

/// A scene with its ledger built and axioms registered.
pub struct Loaded {
    pub scene: Scene,
    pub surface: Arc<Geometry>,
    pub threefold: Arc<Geometry>,
    pub ledger: Ledger,
    pub bundles: BTreeMap<String, SheafExpr>,
    pub summands: Vec<(String, SheafExpr)>,
    pub omega: Option<GradedClass>,
}

impl Loaded {
    /// `E`, the sum of the summands.
    pub fn e(&self) -> Option<SheafExpr> {
        let mut it = self.summands.iter().map(|(_, e)| e.clone());
        let first = it.next()?;
        Some(it.fold(first, |a, b| a.sum(b)))
    }

    pub fn parse_context(&self) -> ParseContext<'_> {
        ParseContext {
            surface: self.surface.clone(),
            threefold: Some(self.threefold.clone()),
            points: &self.ledger.ctx.points,
            names: &self.bundles,
        }
    }
}

impl Scene {
    /// Builds the ledger: point data, curve sections, Serre bundles (refused
    /// when `h^2(det*)` is not known to vanish) and asserted sequences.
    pub fn load(&self) -> Result<Loaded> {
        let surface = surface_of(&self.geometry, self.curve.as_ref())
            .ok_or_else(|| Error::Input(format!("unknown geometry {}", self.geometry)))?;
        let threefold = Geometry::fibred_over(&surface);
        let pol = surface.parse_class(&self.polarization)?;
        let mut ctx = SurfaceContext::new(surface.clone(), pol)?;
        if let Some(c) = &self.curve {
            ctx.curves.push(c.name.clone());
        }
        for p in &self.points {
            ctx.points.add_set(&p.name, p.size, p.on.as_deref())?;
        }
        for (a, b) in &self.contains {
            ctx.points.add_containment(a, b)?;
        }
        let points = ctx.points.clone();
        let mut ledger = Ledger::new(ctx)?;
        let mut names = BTreeMap::new();
        let parse = |text: &str, names: &BTreeMap<String, SheafExpr>| {
            parse_sheaf(
                text,
                &ParseContext { surface: surface.clone(), threefold: Some(threefold.clone()), points: &points, names },
            )
        };
        for s in &self.sections {
            let e = parse(&s.bundle, &names)?;
            ledger.add_section(&s.name, &e, &s.curve)?;
        }
        for (n, text) in &self.bundles {
            let mut e = parse(text, &names)?;
            if let SheafExpr::Serre(s) = &e {
                e = SheafExpr::Serre(ledger.add_serre((**s).clone())?);
            }
            names.insert(n.clone(), e);
        }
        let mut summands = Vec::new();
        for (n, text) in &self.summands {
            let e = parse(text, &names)?;
            summands.push((n.clone(), e));
        }
        for q in &self.sequences {
            let t: Vec<SheafExpr> = q.terms.iter().map(|t| parse(t, &names)).collect::<Result<_>>()?;
            ledger.assert_seq([&t[0], &t[1], &t[2]], [&q.maps[0], &q.maps[1]], &q.quote)?;
        }
        ledger.propagate()?;
        let omega = self.omega.as_deref().map(|o| threefold.parse_class(o)).transpose()?;
        Ok(Loaded { scene: self.clone(), surface, threefold, ledger, bundles: names, summands, omega })
    }
}

/// `parse_scene` followed by [`Scene::load`].
pub fn load_scene(text: &str) -> Result<Loaded> {
    parse_scene(text)?.load()
}

/// The scenes shipped with the crate.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "k3-product" => Some(include_str!("../scenes/k3-product.scene")),
        "enriques-quotient" => Some(include_str!("../scenes/enriques-quotient.scene")),
        "enriques-sphere" => Some(include_str!("../scenes/enriques-sphere.scene")),
        _ => None,
    }
}

pub const BUNDLED: [&str; 3] = ["k3-product", "enriques-quotient", "enriques-sphere"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenes_round_trip() {
        for n in BUNDLED {
            let s = parse_scene(bundled(n).unwrap()).unwrap();
            assert_eq!(parse_scene(&render_scene(&s)).unwrap(), s, "{n}");
        }
    }

    #[test]
    fn empty_check_list_is_valid() {
        let s = parse_scene("geometry k3\npolarization w2\n").unwrap();
        assert!(s.checks.is_empty());
        assert!(s.load().is_ok());
    }

    #[test]
    fn obstructed_serre_bundle_is_refused_at_load() {
        let text = "geometry k3\npolarization w2\nbundle P = serre2(det=line(0,1), pts=1)\n";
        let s = parse_scene(text).unwrap();
        assert!(matches!(s.load(), Err(Error::SerreObstructed { .. })));
    }

    #[test]
    fn positioned_errors() {
        let e = parse_scene("geometry k3\npolarization w2\nbundle X = line(1)\n").unwrap_err();
        assert!(matches!(e, Error::Positioned { line: 3, .. }), "{e}");
        let e = parse_scene("geometry k3\npolarization w2\nbundle X = frob(O)\n").unwrap_err();
        assert!(matches!(e, Error::Positioned { line: 3, column: 12, .. }), "{e}");
        let e = parse_scene("geometry k3\nfrobnicate 3\n").unwrap_err();
        assert!(matches!(e, Error::Positioned { line: 2, column: 1, .. }), "{e}");
        let e = parse_scene("geometry k3\npolarization w2\nbundle X = O\nbundle X = O\n").unwrap_err();
        assert!(e.to_string().contains("duplicate bundle name"), "{e}");
        let e = parse_scene("geometry k3\npolarization w2\ncheck det frob\n").unwrap_err();
        assert!(matches!(e, Error::Positioned { line: 3, column: 11, .. }), "{e}");
    }

    #[test]
    fn normalization() {
        let a = parse_scene("geometry k3\npolarization  w2+0*w1\ncheck chi det\ncheck det\n").unwrap();
        let b = parse_scene("geometry k3\npolarization w2\ncheck det chi\n").unwrap();
        assert_eq!(a, b);
    }
}
