//! Randomized invariants shared by the property suite and the acceptance run.
#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use cyverify::checklist::{run_checklist, RunOptions};
use cyverify::ledger::key::Key;
use cyverify::ledger::Ledger;
use cyverify::report::{render_json, Policy};
use cyverify::ring::{GradedClass, Geometry};
use cyverify::scene::{bundled, load_scene, parse_scene, render_scene, BUNDLED};
use cyverify::sheaf::{ch_to_chern, chern_to_ch, Character, LineBundle, SheafExpr};

pub const CASES: u32 = 1000;

pub struct Fixture {
    pub surface: Arc<Geometry>,
    pub threefold: Arc<Geometry>,
    pub serre: Vec<SheafExpr>,
    pub serre_names: Vec<String>,
    pub points: Vec<String>,
    pub ledger: Ledger,
}

/// The three bundled scenes, loaded once.
pub fn fixtures() -> &'static [Fixture] {
    static F: OnceLock<Vec<Fixture>> = OnceLock::new();
    F.get_or_init(|| {
        BUNDLED
            .iter()
            .map(|n| {
                let l = load_scene(bundled(n).unwrap()).unwrap();
                Fixture {
                    surface: l.surface.clone(),
                    threefold: l.threefold.clone(),
                    serre: l.bundles.values().cloned().collect(),
                    serre_names: l.ledger.ctx.serre.bundles.keys().cloned().collect(),
                    points: l.ledger.ctx.points.sets.keys().cloned().collect(),
                    ledger: l.ledger,
                }
            })
            .collect()
    })
}

/// A sheaf on the base surface built from lines and the scene's Serre bundles.
#[derive(Clone, Debug)]
pub enum Surf {
    Line([i64; 3], bool),
    Serre(usize),
    Dual(Box<Surf>),
    Sum(Box<Surf>, Box<Surf>),
    Tensor(Box<Surf>, Box<Surf>),
}

pub fn surf() -> impl Strategy<Value = Surf> {
    let leaf = prop_oneof![
        (prop::array::uniform3(-3i64..=3), any::<bool>()).prop_map(|(c, g)| Surf::Line(c, g)),
        (0usize..2).prop_map(Surf::Serre),
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Surf::Dual(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Surf::Sum(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Surf::Tensor(Box::new(a), Box::new(b))),
        ]
    })
}

fn line_on(g: &Arc<Geometry>, c: &[i64], gamma: bool) -> SheafExpr {
    let n = g.basis_len(1);
    let mut l = LineBundle::new(g.divisor_i(&c[..n]));
    if gamma && g.torsion_canonical {
        l = l.with_character(Character::gamma_on(g).unwrap());
    }
    SheafExpr::Line(l)
}

impl Surf {
    pub fn build(&self, f: &Fixture) -> SheafExpr {
        match self {
            Surf::Line(c, g) => line_on(&f.surface, c, *g),
            Surf::Serre(i) => f.serre[i % f.serre.len()].clone(),
            Surf::Dual(a) => a.build(f).dual(),
            Surf::Sum(a, b) => a.build(f).sum(b.build(f)),
            Surf::Tensor(a, b) => a.build(f).tensor(b.build(f)),
        }
    }
}

/// A sheaf on the surface or on the threefold over it.
#[derive(Clone, Debug)]
pub struct Sheaf {
    pub scene: usize,
    pub base: Surf,
    /// Fibre twist, threefold line bundle and character index of the lift.
    pub lift: Option<(i64, [i64; 4], usize)>,
}

fn lift() -> impl Strategy<Value = (i64, [i64; 4], usize)> {
    (-3i64..=3, prop::array::uniform4(-2i64..=2), 0usize..9)
}

pub fn sheaf_in(scene: usize, lifted: bool) -> impl Strategy<Value = Sheaf> {
    let l = if lifted { lift().prop_map(Some).boxed() } else { Just(None).boxed() };
    (surf(), l).prop_map(move |(base, lift)| Sheaf { scene, base, lift })
}

pub fn sheaf() -> impl Strategy<Value = Sheaf> {
    (0usize..3, any::<bool>()).prop_flat_map(|(s, l)| sheaf_in(s, l))
}

/// Two sheaves on the same space.
pub fn sheaf_pair() -> impl Strategy<Value = (Sheaf, Sheaf)> {
    (0usize..3, any::<bool>()).prop_flat_map(|(s, l)| (sheaf_in(s, l), sheaf_in(s, l)))
}

impl Sheaf {
    pub fn fixture(&self) -> &'static Fixture {
        &fixtures()[self.scene]
    }

    pub fn build(&self) -> SheafExpr {
        let f = self.fixture();
        let e = self.base.build(f);
        let Some((n, c, ch)) = self.lift else { return e };
        let x = &f.threefold;
        let e = e.pullback(x);
        let e = if self.scene == 0 {
            SheafExpr::EllipticTwist(Box::new(e), n)
        } else {
            SheafExpr::SectionTwist(Box::new(e), n)
        };
        let mut l = LineBundle::new(x.divisor_i(&c[..x.basis_len(1)]));
        let chars = Character::all_on(x);
        l = l.with_character(chars[ch % chars.len()]);
        e.tensor(SheafExpr::Line(l))
    }
}

fn alternate(c: &GradedClass) -> GradedClass {
    let g = c.geometry().clone();
    let mut out = g.zero(0);
    for k in 0..=g.dim() {
        let part = c.component(k);
        out = &out + &if k % 2 == 0 { part } else { -&part };
    }
    out
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(what()))
    }
}

/// `c(A + B) = c(A) c(B)`, with the right side also reached through Chern characters.
pub fn whitney(a: &Sheaf, b: &Sheaf) -> Result<(), TestCaseError> {
    let (ea, eb) = (a.build(), b.build());
    let (ca, cb) = (ea.chern().unwrap(), eb.chern().unwrap());
    let s = ea.clone().sum(eb.clone()).chern().unwrap();
    check(s.rank == ca.rank + cb.rank, || "rank is additive".into())?;
    check(s.total == &ca.total * &cb.total, || format!("c({ea} + {eb}) = {} != c(A)c(B)", s.total))?;
    let via_ch = ch_to_chern(&(&chern_to_ch(&ca) + &chern_to_ch(&cb)));
    check(via_ch == s, || format!("ch route disagrees for {ea} + {eb}"))
}

/// `ch` is additive, multiplicative and inverts `ch_to_chern`.
pub fn ch_ring_map(a: &Sheaf, b: &Surf) -> Result<(), TestCaseError> {
    let f = a.fixture();
    let ea = a.build();
    let eb = match a.lift {
        None => b.build(f),
        Some(_) => b.build(f).pullback(&f.threefold),
    };
    let (cha, chb) = (ea.chern_character().unwrap(), eb.chern_character().unwrap());
    check(ch_to_chern(&cha) == ea.chern().unwrap(), || format!("ch_to_chern(ch({ea}))"))?;
    let sum = ea.clone().sum(eb.clone()).chern_character().unwrap();
    check(sum == &cha + &chb, || format!("ch({ea} + {eb})"))?;
    match ea.clone().tensor(eb.clone()).chern_character() {
        Ok(t) => check(t == &cha * &chb, || format!("ch({ea} (x) {eb}) = {t} != {}", &cha * &chb)),
        // higher-rank tensor products are only modelled on the surface
        Err(_) => check(a.lift.is_some(), || format!("tensor {ea} (x) {eb} refused on a surface")),
    }
}

/// `E** = E` and `c_i(E*) = (-1)^i c_i(E)`.
pub fn dual_involution(a: &Sheaf) -> Result<(), TestCaseError> {
    let e = a.build();
    let c = e.chern().unwrap();
    let d = e.clone().dual().chern().unwrap();
    check(d.total == alternate(&c.total), || format!("c({e}*)"))?;
    check(e.clone().dual().dual().chern().unwrap() == c, || format!("c({e}**)"))?;
    if a.lift.is_none() {
        let f = a.fixture();
        if let Ok(k) = f.ledger.ctx.key(&e) {
            let kk = f.ledger.ctx.key(&e.clone().dual().dual()).unwrap();
            check(k == kk, || format!("key of {e}** is {kk}, not {k}"))?;
        }
    }
    Ok(())
}

/// A random ledger key: Serre factors, a line twist, maybe one ideal.
#[derive(Clone, Debug)]
pub struct KeySpec {
    pub factors: Vec<usize>,
    pub line: [i64; 3],
    pub gamma: bool,
    pub ideal: Option<usize>,
}

pub fn key_spec() -> impl Strategy<Value = KeySpec> {
    (
        prop::collection::vec(0usize..2, 0..=2),
        prop::array::uniform3(-3i64..=3),
        any::<bool>(),
        prop::option::of(0usize..2),
    )
        .prop_map(|(factors, line, gamma, ideal)| KeySpec { factors, line, gamma, ideal })
}

impl KeySpec {
    pub fn key(&self, f: &Fixture) -> Key {
        let n = f.surface.basis_len(1);
        let mut factors: Vec<String> = self.factors.iter().map(|i| f.serre_names[i % f.serre_names.len()].clone()).collect();
        factors.sort();
        let ideal = match (self.ideal, factors.len()) {
            (Some(i), 0) => vec![f.points[i % f.points.len()].clone()],
            _ => vec![],
        };
        Key::Bundle {
            factors,
            line: self.line[..n].to_vec(),
            gamma: u8::from(self.gamma && f.surface.torsion_canonical),
            ideal,
        }
    }
}

/// Registers the keys; `None` when the ledger does not model one of them.
fn registered(l: &mut Ledger, keys: &[Key]) -> Option<()> {
    for k in keys {
        l.register(k).ok()?;
    }
    Some(())
}

/// `chi(B) = chi(A) + chi(C)` for every short exact sequence the ledger holds.
pub fn chi_additivity(scene: usize, specs: &[KeySpec]) -> Result<(), TestCaseError> {
    let f = &fixtures()[scene];
    let mut l = f.ledger.clone();
    let keys: Vec<Key> = specs.iter().map(|s| s.key(f)).collect();
    if registered(&mut l, &keys).is_none() {
        return Ok(());
    }
    l.propagate().unwrap();
    for s in &l.seqs {
        let [a, b, c] = &s.terms;
        let chi = |k: &Key| l.ctx.chi(k).unwrap();
        check(chi(b) == chi(a) + chi(c), || format!("chi along {a} -> {b} -> {c} ({})", s.quote))?;
    }
    Ok(())
}

/// `E -> E* (x) K` is an involution on keys and swaps `h^i` with `h^(2-i)`.
pub fn serre_duality(scene: usize, spec: &KeySpec) -> Result<(), TestCaseError> {
    let f = &fixtures()[scene];
    let spec = KeySpec { ideal: None, ..spec.clone() };
    let k = spec.key(f);
    let n = f.surface.basis_len(1);
    let kg = u8::from(f.surface.torsion_canonical);
    let serre = &f.ledger.ctx.serre;
    let d = k.dual(serre).unwrap().twist(&vec![0; n], kg);
    let dd = d.dual(serre).unwrap().twist(&vec![0; n], kg);
    check(dd == k, || format!("({k})* (x) K twice gives {dd}"))?;
    let mut l = f.ledger.clone();
    for i in 0..=2 {
        let (a, b) = (l.h(&k, i).unwrap(), l.h(&d, 2 - i).unwrap());
        check(a == b, || format!("h^{i}({k}) = {a:?} but h^{}({d}) = {b:?}", 2 - i))?;
    }
    Ok(())
}

/// The fixed point reached by propagation does not depend on the queue order.
pub fn propagation_order(scene: usize, specs: &[KeySpec], seed: u64) -> Result<(), TestCaseError> {
    let f = &fixtures()[scene];
    let keys: Vec<Key> = specs.iter().map(|s| s.key(f)).collect();
    let (mut a, mut b) = (f.ledger.clone(), f.ledger.clone());
    if registered(&mut a, &keys).is_none() || registered(&mut b, &keys).is_none() {
        return Ok(());
    }
    a.propagate().unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    b.propagate_with(&mut |n| rng.gen_range(0..n)).unwrap();
    let known: Vec<Key> = a.known_keys().cloned().collect();
    check(known.len() == b.known_keys().count(), || "different key sets".into())?;
    for k in &known {
        for i in 0..=2 {
            let (x, y) = (a.h(k, i).unwrap(), b.h(k, i).unwrap());
            check(x == y, || format!("h^{i}({k}): {x:?} vs {y:?}"))?;
        }
    }
    Ok(())
}

/// A small line-bundle scene with a random determinant, twist and claim.
#[derive(Clone, Debug)]
pub struct TinyScene {
    pub enriques: bool,
    pub line: [i64; 2],
    pub pol: [i64; 2],
    pub fibre: i64,
    pub chi_claim: i64,
}

pub fn tiny_scene() -> impl Strategy<Value = TinyScene> {
    (any::<bool>(), prop::array::uniform2(-4i64..=4), prop::array::uniform2(1i64..=4), 1i64..=12, -3i64..=6)
        .prop_map(|(enriques, line, pol, fibre, chi_claim)| TinyScene { enriques, line, pol, fibre, chi_claim })
}

impl TinyScene {
    pub fn text(&self) -> String {
        let (geom, fib) = if self.enriques { ("enriques", "S") } else { ("k3", "wT") };
        let [a, b] = self.line;
        let [p, r] = self.pol;
        format!(
            "scene tiny\ngeometry {geom}\npolarization {p}*w1 + {r}*w2\n\
             summand P = pullback(line({a},{b}))\nsummand Q = pullback(line({},{}))\n\
             omega {p}*w1 + {r}*w2 + {}*{fib}\nclaim chi = {} \"chi\"\ncheck det chi\n",
            -a,
            -b,
            self.fibre,
            self.chi_claim
        )
    }
}

/// Two independent runs give byte-identical JSON, and the scene survives a render round trip.
pub fn report_determinism(t: &TinyScene) -> Result<(), TestCaseError> {
    let text = t.text();
    let run = |src: &str| {
        let mut l = load_scene(src).unwrap();
        let r = run_checklist(&mut l, &RunOptions::default()).unwrap();
        render_json(&r, Policy::default())
    };
    let (x, y) = (run(&text), run(&text));
    check(x == y, || format!("two runs of\n{text}differ"))?;
    let scene = parse_scene(&text).unwrap();
    let again = parse_scene(&render_scene(&scene)).unwrap();
    check(again == scene, || format!("round trip of\n{text}"))?;
    check(run(&render_scene(&scene)) == x, || "rendered scene reports differently".into())?;
    let v: serde_json::Value = serde_json::from_str(&x).unwrap();
    let mut canon = serde_json::to_string_pretty(&v).unwrap();
    canon.push('\n');
    check(canon == x, || "report is not in canonical key order".into())
}

/// Runs `prop` on `CASES` inputs with a fixed seed; returns the number of cases run.
pub fn run<S: Strategy>(name: &str, strategy: S, prop: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<u32, String> {
    let cfg = Config { cases: CASES, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(cfg, proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha));
    runner.run(&strategy, prop).map(|_| CASES).map_err(|e| format!("{name}: {e}"))
}

/// Names and runners of every suite, for the acceptance target.
pub fn all() -> Vec<(&'static str, Box<dyn Fn() -> Result<u32, String>>)> {
    vec![
        ("whitney", Box::new(|| run("whitney", sheaf_pair(), |(a, b)| whitney(&a, &b)))),
        ("ch ring map", Box::new(|| run("ch ring map", (sheaf(), surf()), |(a, b)| ch_ring_map(&a, &b)))),
        ("dual involution", Box::new(|| run("dual involution", sheaf(), |a| dual_involution(&a)))),
        (
            "chi additivity",
            Box::new(|| {
                run("chi additivity", (0usize..3, prop::collection::vec(key_spec(), 1..4)), |(s, k)| chi_additivity(s, &k))
            }),
        ),
        ("serre duality", Box::new(|| run("serre duality", (0usize..3, key_spec()), |(s, k)| serre_duality(s, &k)))),
        (
            "propagation order",
            Box::new(|| {
                run("propagation order", (0usize..3, prop::collection::vec(key_spec(), 1..4), any::<u64>()), |(s, k, seed)| {
                    propagation_order(s, &k, seed)
                })
            }),
        ),
        ("report determinism", Box::new(|| run("report determinism", tiny_scene(), |t| report_determinism(&t)))),
    ]
}
