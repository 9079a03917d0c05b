//! Exhaustive search for an auxiliary bundle `F` with `c1 = 0` and
//! `c2 = c2(X) - c2(E)`, over a few construction templates with integer
//! twist parameters in a box.
//!
//! Only necessary conditions are checked. A survivor is `open` unless the
//! template itself settles stability (line sums).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_traits::Signed;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ledger::threefold::h3;
use crate::ledger::Ledger;
use crate::ring::{fmt_q_short, q, Geometry, GradedClass, Q};
use crate::sheaf::{LineBundle, SheafExpr};

pub const DEFAULT_RANK_MAX: u32 = 3;
pub const DEFAULT_BOX: u32 = 8;
/// Larger boxes are refused rather than left running.
pub const MAX_CANDIDATES: u128 = 400_000_000;
const CHUNK: u64 = 1 << 16;
const CHECKPOINT_HEADER: &str = "cyverify-search-checkpoint 1";

/// `c2(X) - c2(E)`; `E` must have `c1 = 0`.
pub fn required_c2(e: &SheafExpr) -> Result<GradedClass> {
    let x = e.geometry();
    if x.is_surface() {
        return Err(Error::Unsupported("the anomaly class lives on a threefold".into()));
    }
    let c = e.chern()?;
    if !c.c1().is_zero() {
        return Err(Error::Precondition(format!("c1({}) = {} is not zero", e.label(), c.c1())));
    }
    x.c2_tangent().try_add(&c.c2().scale(q(-1)))
}

/// `c2 . Omega`.
pub fn bogomolov_value(c2: &GradedClass, omega: &GradedClass) -> Result<Q> {
    c2.pair(omega)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NefTest {
    pub class: String,
    /// Pairing with each nef generator.
    pub pairings: Vec<(String, String)>,
    /// First generator pairing negatively.
    pub witness: Option<(String, String)>,
    pub passes: bool,
}

/// Necessary condition for a curve class: nonnegative against every nef
/// generator.
pub fn nef_test(c: &GradedClass) -> Result<NefTest> {
    let x = c.geometry().clone();
    let mut pairings = Vec::new();
    let mut witness = None;
    for n in x.nef_generators() {
        let v = c.pair(&n)?;
        let entry = (n.to_string(), fmt_q_short(&v));
        if v.is_negative() && witness.is_none() {
            witness = Some(entry.clone());
        }
        pairings.push(entry);
    }
    Ok(NefTest { class: c.to_string(), passes: witness.is_none(), pairings, witness })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    /// `O(D) + O(-D)`.
    LineSum2,
    /// `G (x) N` with `G` from a curve `C` and `det G = -2N`.
    Serre2,
    /// `O(D1) + O(D2) + O(-D1-D2)`.
    LineSum3,
    /// `G (x) N + O(D)` with `det G = -D - 2N`.
    Serre2Line,
}

impl Template {
    pub const ALL: [Template; 4] = [Template::LineSum2, Template::Serre2, Template::LineSum3, Template::Serre2Line];

    pub fn rank(self) -> u32 {
        match self {
            Template::LineSum2 | Template::Serre2 => 2,
            Template::LineSum3 | Template::Serre2Line => 3,
        }
    }

    /// Number of divisors among the parameters.
    fn divisors(self) -> usize {
        match self {
            Template::LineSum2 | Template::Serre2 => 1,
            Template::LineSum3 | Template::Serre2Line => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Template::LineSum2 => "linesum-2",
            Template::Serre2 => "serre2",
            Template::LineSum3 => "linesum-3",
            Template::Serre2Line => "serre2+line",
        }
    }

    pub fn parse(s: &str) -> Option<Template> {
        Template::ALL.into_iter().find(|t| t.name() == s)
    }

    fn is_serre(self) -> bool {
        matches!(self, Template::Serre2 | Template::Serre2Line)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Flags {
    pub c2_match: Option<bool>,
    pub bogomolov: Option<bool>,
    pub nef_effectivity: Option<bool>,
    pub serre_existence: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    /// Passes every filter; stability is not decided.
    Open,
    Unstable { witness: String },
    /// A sum of degree-0 line bundles, not all trivial.
    Polystable { reason: String },
    /// A sum of trivial bundles.
    Trivial,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FCandidate {
    pub template: Template,
    pub params: Vec<i64>,
    pub rank: u32,
    pub c2: String,
    /// Curve class of the Serre construction, for the Serre templates.
    pub curve: Option<String>,
    pub flags: Flags,
    pub notes: Vec<String>,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TemplateCount {
    pub template: Template,
    pub parameters: usize,
    /// `(2 box + 1)^parameters`.
    pub cardinality: u64,
    pub enumerated: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Completion {
    pub templates: Vec<TemplateCount>,
    pub box_cardinality: u64,
    pub enumerated: u64,
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchReport {
    pub target: String,
    pub polarization: String,
    pub bogomolov_target: String,
    pub rank_max: u32,
    pub box_size: u32,
    pub completion: Completion,
    /// Candidates dropped at each filter.
    pub rejected: BTreeMap<String, u64>,
    pub survivors: Vec<FCandidate>,
    pub certified_stable: usize,
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub rank_max: u32,
    pub box_size: u32,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Stop after this many candidates (for interrupted runs).
    pub limit: Option<u64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { rank_max: DEFAULT_RANK_MAX, box_size: DEFAULT_BOX, workers: None, limit: None }
    }
}

/// Integer intersection tables on the threefold.
struct Arith {
    x: Arc<Geometry>,
    n: usize,
    /// `D_i D_j` in the degree-4 basis.
    dd: Vec<Vec<Vec<i64>>>,
    /// Degree-4 basis against each nef generator.
    nef: Vec<Vec<i64>>,
    target: Option<Vec<i64>>,
}

fn integral(v: &Q, what: &str) -> Result<i64> {
    if v.is_integer() {
        Ok(*v.numer())
    } else {
        Err(Error::Unsupported(format!("non-integral {what} {v}")))
    }
}

impl Arith {
    fn new(x: &Arc<Geometry>, target: &GradedClass) -> Result<Arith> {
        let n = x.basis_len(1);
        let m = x.basis_len(2);
        let mut dd = vec![vec![vec![0; m]; n]; n];
        for (i, row) in dd.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let v = x.basis_mul(1, i, 1, j).expect("degree 4 exists on a threefold");
                for (k, c) in v.iter().enumerate() {
                    cell[k] = integral(c, "intersection number")?;
                }
            }
        }
        let mut nef = Vec::new();
        for g in x.nef_generators() {
            let mut row = vec![0; m];
            for (k, cell) in row.iter_mut().enumerate() {
                *cell = integral(&x.basis_class(2, k).pair(&g)?, "intersection number")?;
            }
            nef.push(row);
        }
        let t = target.part(2);
        let target = if t.iter().all(|c| c.is_integer()) { Some(t.iter().map(|c| *c.numer()).collect()) } else { None };
        Ok(Arith { x: x.clone(), n, dd, nef, target })
    }

    fn mul(&self, a: &[i64], b: &[i64]) -> Vec<i64> {
        let mut out = vec![0; self.dd[0][0].len()];
        for (i, ai) in a.iter().enumerate() {
            if *ai == 0 {
                continue;
            }
            for (j, bj) in b.iter().enumerate() {
                if *bj == 0 {
                    continue;
                }
                for (k, c) in self.dd[i][j].iter().enumerate() {
                    out[k] += ai * bj * c;
                }
            }
        }
        out
    }

    fn nef_ok(&self, c: &[i64]) -> bool {
        self.nef.iter().all(|row| row.iter().zip(c).map(|(a, b)| a * b).sum::<i64>() >= 0)
    }

    fn class(&self, c: &[i64]) -> GradedClass {
        let mut out = self.x.zero(2);
        for (k, v) in c.iter().enumerate() {
            out = &out + &self.x.basis_class(2, k).scale(q(*v));
        }
        out
    }

    fn divisor(&self, d: &[i64]) -> GradedClass {
        self.x.divisor_i(d)
    }
}

fn add(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn neg(a: &[i64]) -> Vec<i64> {
    a.iter().map(|x| -x).collect()
}

/// Parameters of the `index`-th point of the box, in lexicographic order.
fn decode(index: u64, params: usize, b: i64) -> Vec<i64> {
    let side = (2 * b + 1) as u64;
    let mut out = vec![0; params];
    let mut r = index;
    for slot in out.iter_mut().rev() {
        *slot = (r % side) as i64 - b;
        r /= side;
    }
    out
}

/// Stage at which a candidate stops, if it does.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    C2,
    Bogomolov,
    Nef,
    Pass,
}

struct Ctx<'a> {
    arith: &'a Arith,
    bogomolov_ok: bool,
}

/// The cheap filters, run in parallel.
fn screen(c: &Ctx, t: Template, p: &[i64]) -> Stage {
    let a = c.arith;
    let n = a.n;
    let (c2_match, curve) = match t {
        Template::LineSum2 => {
            let d = &p[..n];
            (a.target.as_ref().is_some_and(|tg| neg(&a.mul(d, d)) == *tg), None)
        }
        Template::LineSum3 => {
            let (d1, d2) = (&p[..n], &p[n..]);
            let s = add(&add(&a.mul(d1, d1), &a.mul(d1, d2)), &a.mul(d2, d2));
            (a.target.as_ref().is_some_and(|tg| neg(&s) == *tg), None)
        }
        Template::Serre2 => {
            let nn = &p[..n];
            (true, a.target.as_ref().map(|tg| add(tg, &a.mul(nn, nn))))
        }
        Template::Serre2Line => {
            let (nn, d) = (&p[..n], &p[n..]);
            let s = add(&add(&a.mul(d, d), &a.mul(d, nn)), &a.mul(nn, nn));
            (true, a.target.as_ref().map(|tg| add(tg, &s)))
        }
    };
    if !c2_match {
        return Stage::C2;
    }
    if !c.bogomolov_ok {
        return Stage::Bogomolov;
    }
    if t.is_serre() {
        match curve {
            Some(cv) if a.nef_ok(&cv) => {}
            _ => return Stage::Nef,
        }
    }
    Stage::Pass
}

struct Searcher<'a> {
    arith: Arith,
    target: GradedClass,
    omega: GradedClass,
    ledger: Option<&'a mut Ledger>,
    h2_cache: HashMap<Vec<i64>, Option<bool>>,
}

impl Searcher<'_> {
    /// `h^2(X, L) = 0` for the line bundle `L = O(d)`.
    fn h2_vanishes(&mut self, d: &[i64]) -> Result<Option<bool>> {
        if let Some(v) = self.h2_cache.get(d) {
            return Ok(*v);
        }
        let Some(l) = self.ledger.as_deref_mut() else { return Ok(None) };
        let e = SheafExpr::Line(LineBundle::new(self.arith.divisor(d)));
        let v = match h3(l, &e, 2) {
            Ok(f) => f.value.value().map(|x| x == 0),
            Err(Error::Undetermined(_)) => None,
            Err(e) => return Err(e),
        };
        self.h2_cache.insert(d.to_vec(), v);
        Ok(v)
    }

    fn degree(&self, d: &[i64]) -> Result<Q> {
        let o2 = self.omega.try_mul(&self.omega)?;
        self.arith.divisor(d).pair(&o2)
    }

    /// Full record for a candidate past the cheap filters.
    fn finish(&mut self, t: Template, p: Vec<i64>) -> Result<Option<FCandidate>> {
        let n = self.arith.n;
        let mut flags = Flags { c2_match: Some(true), bogomolov: Some(true), ..Flags::default() };
        let mut notes = Vec::new();
        let mut curve = None;
        let (summands, det_g): (Vec<Vec<i64>>, Option<Vec<i64>>) = match t {
            Template::LineSum2 => (vec![p[..n].to_vec(), neg(&p[..n])], None),
            Template::LineSum3 => {
                let (d1, d2) = (p[..n].to_vec(), p[n..].to_vec());
                let d3 = neg(&add(&d1, &d2));
                (vec![d1, d2, d3], None)
            }
            Template::Serre2 => (vec![], Some(neg(&add(&p[..n], &p[..n])))),
            Template::Serre2Line => {
                let (nn, d) = (&p[..n], &p[n..]);
                (vec![d.to_vec()], Some(neg(&add(&add(d, nn), nn))))
            }
        };
        if let Some(det) = &det_g {
            let nn = &p[..n];
            let tg = self.arith.target.clone().expect("screened");
            let extra = match t {
                Template::Serre2 => self.arith.mul(nn, nn),
                _ => {
                    let d = &p[n..];
                    add(&add(&self.arith.mul(d, d), &self.arith.mul(d, nn)), &self.arith.mul(nn, nn))
                }
            };
            let cv = self.arith.class(&add(&tg, &extra));
            flags.nef_effectivity = Some(true);
            curve = Some(cv.to_string());
            // a locally free extension needs h^2(det G^-1) = 0
            match self.h2_vanishes(&neg(det))? {
                Some(false) => return Ok(None),
                Some(true) => flags.serre_existence = Some(true),
                None => notes.push(format!("h^2(O({})) not determined", self.arith.divisor(&neg(det)))),
            }
        }
        let mut status = Status::Open;
        let mut degs = Vec::new();
        for d in &summands {
            degs.push((d.clone(), self.degree(d)?));
        }
        if let Some((d, deg)) = degs.iter().find(|(_, g)| g.is_positive()) {
            status = Status::Unstable {
                witness: format!("O({}) has degree {} > 0", self.arith.divisor(d), fmt_q_short(deg)),
            };
        } else if let Some((d, deg)) = degs.iter().find(|(_, g)| g.is_negative()) {
            // the complementary part has positive degree
            status = Status::Unstable {
                witness: format!("O({}) has degree {}, so its complement has positive degree", self.arith.divisor(d), fmt_q_short(deg)),
            };
        } else if !summands.is_empty() && det_g.is_none() {
            status = if summands.iter().all(|d| d.iter().all(|x| *x == 0)) {
                Status::Trivial
            } else {
                Status::Polystable { reason: "a sum of line bundles of degree 0".into() }
            };
        }
        Ok(Some(FCandidate {
            template: t,
            params: p,
            rank: t.rank(),
            c2: self.target.to_string(),
            curve,
            flags,
            notes,
            status,
        }))
    }
}

struct Progress {
    next: u64,
    enumerated: u64,
    rejected: BTreeMap<String, u64>,
    survivors: Vec<(Template, Vec<i64>)>,
}

fn write_checkpoint(path: &Path, head: &str, p: &Progress) -> Result<()> {
    let mut s = format!("{CHECKPOINT_HEADER}\n{head}next {}\nenumerated {}\n", p.next, p.enumerated);
    for (k, v) in &p.rejected {
        s.push_str(&format!("rejected {k} {v}\n"));
    }
    for (t, params) in &p.survivors {
        let ps: Vec<String> = params.iter().map(|x| x.to_string()).collect();
        s.push_str(&format!("survivor {t} {}\n", ps.join(" ")));
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, s)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_checkpoint(path: &Path, head: &str) -> Result<Progress> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CHECKPOINT_HEADER) {
        return Err(Error::Input(format!("{}: not a search checkpoint", path.display())));
    }
    let mut p = Progress { next: 0, enumerated: 0, rejected: BTreeMap::new(), survivors: vec![] };
    let mut got_head = String::new();
    for line in lines {
        let (k, rest) = line.split_once(' ').unwrap_or((line, ""));
        let bad = || Error::Input(format!("{}: bad checkpoint line `{line}`", path.display()));
        match k {
            "target" | "polarization" | "rank_max" | "box" => got_head.push_str(&format!("{line}\n")),
            "next" => p.next = rest.parse().map_err(|_| bad())?,
            "enumerated" => p.enumerated = rest.parse().map_err(|_| bad())?,
            "rejected" => {
                let (name, v) = rest.split_once(' ').ok_or_else(bad)?;
                p.rejected.insert(name.into(), v.parse().map_err(|_| bad())?);
            }
            "survivor" => {
                let mut it = rest.split(' ');
                let t = it.next().and_then(Template::parse).ok_or_else(bad)?;
                let params = it.map(|x| x.parse().map_err(|_| bad())).collect::<Result<Vec<i64>>>()?;
                p.survivors.push((t, params));
            }
            _ => return Err(bad()),
        }
    }
    if got_head != head {
        return Err(Error::Input(format!("{}: checkpoint was written for another search", path.display())));
    }
    Ok(p)
}

/// Enumerates every template of rank at most `rank_max` over the box.
///
/// `ledger` is the base surface ledger, used for the Serre existence test;
/// `checkpoint` is rewritten after every chunk and read back when `resume` is set.
pub fn run_search(
    target: &GradedClass,
    omega: &GradedClass,
    ledger: Option<&mut Ledger>,
    cfg: &SearchConfig,
    checkpoint: Option<&Path>,
    resume: bool,
) -> Result<SearchReport> {
    let x = target.geometry().clone();
    if x.is_surface() {
        return Err(Error::Unsupported("the search runs on a threefold".into()));
    }
    let arith = Arith::new(&x, target)?;
    let n = arith.n;
    let b = cfg.box_size as i64;
    let templates: Vec<Template> = Template::ALL.into_iter().filter(|t| t.rank() <= cfg.rank_max).collect();
    let mut counts = Vec::new();
    let mut total: u128 = 0;
    for t in &templates {
        let params = t.divisors() * n;
        let card = (2 * b as u128 + 1).pow(params as u32);
        total += card;
        counts.push(TemplateCount { template: *t, parameters: params, cardinality: card as u64, enumerated: 0 });
    }
    if total > MAX_CANDIDATES {
        return Err(Error::Input(format!(
            "the box holds {total} candidates (more than {MAX_CANDIDATES}); lower --box or --rank-max"
        )));
    }
    let bog = bogomolov_value(target, omega)?;
    let head = format!(
        "target {target}\npolarization {omega}\nrank_max {}\nbox {}\n",
        cfg.rank_max, cfg.box_size
    );
    let mut progress = match (checkpoint, resume) {
        (Some(p), true) if p.exists() => read_checkpoint(p, &head)?,
        _ => Progress { next: 0, enumerated: 0, rejected: BTreeMap::new(), survivors: vec![] },
    };
    for k in ["c2_match", "bogomolov", "nef_effectivity", "serre_existence"] {
        progress.rejected.entry(k.into()).or_insert(0);
    }
    let ctx = Ctx { arith: &arith, bogomolov_ok: !bog.is_negative() };
    let pool = match cfg.workers {
        Some(w) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Input(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    let mut searcher = Searcher { arith: Arith::new(&x, target)?, target: target.clone(), omega: omega.clone(), ledger, h2_cache: HashMap::new() };
    let total = total as u64;
    let stop = cfg.limit.map_or(total, |l| (progress.next + l).min(total));
    while progress.next < stop {
        let end = (progress.next + CHUNK).min(stop);
        let locate = |g: u64| -> (Template, Vec<i64>) {
            let mut g = g;
            for c in &counts {
                if g < c.cardinality {
                    return (c.template, decode(g, c.parameters, b));
                }
                g -= c.cardinality;
            }
            unreachable!("index inside the box")
        };
        let work = || -> Vec<(u64, Stage)> {
            (progress.next..end)
                .into_par_iter()
                .map(|g| {
                    let (t, p) = locate(g);
                    (g, screen(&ctx, t, &p))
                })
                .filter(|(_, s)| *s != Stage::C2)
                .collect()
        };
        let passed = match &pool {
            Some(pool) => pool.install(work),
            None => work(),
        };
        let mut c2_rejected = end - progress.next;
        for (g, stage) in passed {
            c2_rejected -= 1;
            let key = match stage {
                Stage::Bogomolov => "bogomolov",
                Stage::Nef => "nef_effectivity",
                Stage::Pass => {
                    let (t, p) = locate(g);
                    match searcher.finish(t, p.clone())? {
                        Some(_) => progress.survivors.push((t, p)),
                        None => *progress.rejected.get_mut("serre_existence").unwrap() += 1,
                    }
                    continue;
                }
                Stage::C2 => unreachable!("filtered"),
            };
            *progress.rejected.get_mut(key).unwrap() += 1;
        }
        *progress.rejected.get_mut("c2_match").unwrap() += c2_rejected;
        progress.enumerated += end - progress.next;
        progress.next = end;
        if let Some(path) = checkpoint {
            write_checkpoint(path, &head, &progress)?;
        }
    }
    let mut survivors = Vec::new();
    for (t, p) in &progress.survivors {
        if let Some(c) = searcher.finish(*t, p.clone())? {
            survivors.push(c);
        }
    }
    survivors.sort_by(|a, b| (a.template, &a.params).cmp(&(b.template, &b.params)));
    let mut g = 0u64;
    for c in counts.iter_mut() {
        c.enumerated = progress.next.saturating_sub(g).min(c.cardinality);
        g += c.cardinality;
    }
    Ok(SearchReport {
        target: target.to_string(),
        polarization: omega.to_string(),
        bogomolov_target: fmt_q_short(&bog),
        rank_max: cfg.rank_max,
        box_size: cfg.box_size,
        completion: Completion {
            box_cardinality: total,
            enumerated: progress.enumerated,
            complete: progress.enumerated == total,
            templates: counts,
        },
        rejected: progress.rejected,
        certified_stable: 0,
        survivors,
    })
}

/// Plain-text survivor list, one candidate per line.
pub fn render_survivors(r: &SearchReport) -> String {
    let mut out = String::new();
    for c in &r.survivors {
        let ps: Vec<String> = c.params.iter().map(|x| x.to_string()).collect();
        let status = match &c.status {
            Status::Open => "open".to_string(),
            Status::Unstable { witness } => format!("unstable ({witness})"),
            Status::Polystable { reason } => format!("polystable ({reason})"),
            Status::Trivial => "trivial".to_string(),
        };
        out.push_str(&format!("{} [{}] {}\n", c.template, ps.join(" "), status));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::tests::k3_ledger;

    fn k3_product() -> (Ledger, GradedClass, GradedClass) {
        let (l, a, b) = k3_ledger(false);
        let x = Geometry::fibred_over(&a.geometry());
        let e = SheafExpr::EllipticTwist(Box::new(a.dual().pullback(&x)), 3)
            .sum(SheafExpr::EllipticTwist(Box::new(b.pullback(&x)), -3));
        let t = required_c2(&e).unwrap();
        (l, t, x.parse_class("w2 + 6*wT").unwrap())
    }

    #[test]
    fn anomaly_primitives() {
        let (_, t, omega) = k3_product();
        let x = t.geometry().clone();
        assert_eq!(t, x.parse_class("15*T - 6*wT.w1 + 6*wT.w2").unwrap());
        assert_eq!(bogomolov_value(&t, &omega).unwrap(), q(84));
        let n = nef_test(&x.parse_class("11*T").unwrap()).unwrap();
        assert!(n.passes);
        assert!(nef_test(&x.zero(2)).unwrap().passes);
        assert!(bogomolov_value(&x.parse_class("-T").unwrap(), &omega).unwrap().is_negative());
    }

    #[test]
    fn decode_is_lexicographic() {
        assert_eq!(decode(0, 2, 1), vec![-1, -1]);
        assert_eq!(decode(1, 2, 1), vec![-1, 0]);
        assert_eq!(decode(8, 2, 1), vec![1, 1]);
    }

    #[test]
    fn empty_box() {
        let (mut l, t, omega) = k3_product();
        let cfg = SearchConfig { rank_max: 2, box_size: 0, ..SearchConfig::default() };
        let r = run_search(&t, &omega, Some(&mut l), &cfg, None, false).unwrap();
        assert_eq!(r.completion.box_cardinality, 2);
        assert!(r.completion.complete);
        assert!(r.survivors.is_empty());
    }

    #[test]
    fn partitions_agree_and_resume() {
        let (mut l, t, omega) = k3_product();
        let cfg = SearchConfig { rank_max: 2, box_size: 3, workers: Some(1), limit: None };
        let one = run_search(&t, &omega, Some(&mut l), &cfg, None, false).unwrap();
        let many = run_search(&t, &omega, Some(&mut l), &SearchConfig { workers: Some(4), ..cfg.clone() }, None, false).unwrap();
        assert_eq!(one, many);
        assert_eq!(one.completion.enumerated, 2 * 7u64.pow(3));
        let dir = tempfile::tempdir().unwrap();
        let ck = dir.path().join("ck.txt");
        let part = SearchConfig { limit: Some(100), ..cfg.clone() };
        let first = run_search(&t, &omega, Some(&mut l), &part, Some(&ck), false).unwrap();
        assert!(!first.completion.complete);
        let rest = run_search(&t, &omega, Some(&mut l), &cfg, Some(&ck), true).unwrap();
        assert_eq!(rest, one);
    }

    #[test]
    fn zero_target_finds_the_trivial_sum() {
        let (mut l, t, omega) = k3_product();
        let zero = t.geometry().zero(2);
        let cfg = SearchConfig { rank_max: 2, box_size: 1, ..SearchConfig::default() };
        let r = run_search(&zero, &omega, Some(&mut l), &cfg, None, false).unwrap();
        let triv = r.survivors.iter().find(|c| c.template == Template::LineSum2 && c.params.iter().all(|x| *x == 0)).unwrap();
        assert_eq!(triv.status, Status::Trivial);
    }
}
