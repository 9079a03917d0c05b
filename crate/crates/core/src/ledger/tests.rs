use super::*;
use crate::sheaf::LineBundle;

pub(crate) fn k3_ledger(contained: bool) -> (Ledger, SheafExpr, SheafExpr) {
    let s = Geometry::k3();
    let pol = s.parse_class("w2").unwrap();
    let mut ctx = SurfaceContext::new(s.clone(), pol).unwrap();
    ctx.points.add_set("ZA", 2, None).unwrap();
    ctx.points.add_set("ZB", 3, None).unwrap();
    if contained {
        ctx.points.add_containment("ZB", "ZA").unwrap();
    }
    let mut l = Ledger::new(ctx).unwrap();
    let lstar = LineBundle::new(s.divisor_i(&[1, -1]));
    let mk = |name: &str, pts: &str, n: u32, sec: &str| SerreBundle {
        name: name.into(),
        det: lstar.clone(),
        points: pts.into(),
        n_points: n,
        section: sec.into(),
    };
    let a = l.add_serre(mk("Astar", "ZA", 2, "sA")).unwrap();
    let b = l.add_serre(mk("B", "ZB", 3, "sB")).unwrap();
    (l, SheafExpr::Serre(a), SheafExpr::Serre(b))
}

fn h(l: &mut Ledger, e: &SheafExpr, i: usize) -> Interval {
    l.h_expr(e, i).unwrap()
}

#[test]
fn k3_sections_of_the_serre_bundles() {
    let (mut l, a, b) = k3_ledger(false);
    assert_eq!(h(&mut l, &a, 0), Interval::exact(1));
    assert_eq!(h(&mut l, &a.clone().dual(), 0), Interval::exact(0));
    assert_eq!(h(&mut l, &b, 0), Interval::exact(1));
    assert_eq!(h(&mut l, &b.clone().dual(), 0), Interval::exact(0));
    assert_eq!(h(&mut l, &b.clone().dual(), 1), Interval::exact(2));
    assert_eq!(h(&mut l, &a.clone().tensor(b.clone()), 0), Interval::exact(1));
}

#[test]
fn k3_ideal_sheaves() {
    let (mut l, a, _) = k3_ledger(false);
    let s = a.geometry();
    let i = |z: &str, n| SheafExpr::Ideal { points: z.into(), n, twist: Box::new(SheafExpr::structure(&s)) };
    assert_eq!(h(&mut l, &i("ZA", 2), 1), Interval::exact(1));
    assert_eq!(h(&mut l, &i("ZB", 3), 1), Interval::exact(2));
    assert_eq!(h(&mut l, &i("ZB", 3), 0), Interval::exact(0));
}

#[test]
fn k3_endomorphisms() {
    let (mut l, a, b) = k3_ledger(false);
    let end_a = SheafExpr::End(Box::new(a.clone().dual()));
    let end_b = SheafExpr::End(Box::new(b.clone()));
    assert_eq!(h(&mut l, &end_a, 0), Interval::exact(1));
    assert_eq!(h(&mut l, &end_a, 1), Interval::exact(6));
    assert_eq!(h(&mut l, &end_b, 1), Interval::exact(10));
    let cross = b.clone().dual().tensor(a.clone().dual());
    assert_eq!(h(&mut l, &cross, 0), Interval::exact(0));
    assert_eq!(h(&mut l, &cross, 1), Interval::exact(15));
}

#[test]
fn incidence_branches() {
    for (contained, expect) in [(false, 0), (true, 1)] {
        let (mut l, _, b) = k3_ledger(contained);
        let s = b.geometry();
        let e = SheafExpr::Ideal { points: "ZA".into(), n: 2, twist: Box::new(b.clone()) };
        assert_eq!(h(&mut l, &e, 0), Interval::exact(expect), "contained = {contained}");
        let _ = s;
    }
}

#[test]
fn certificates_replay() {
    let (mut l, a, _) = k3_ledger(false);
    let k = l.ctx.key(&SheafExpr::End(Box::new(a))).unwrap();
    let f = l.query(&k, 1).unwrap();
    assert_eq!(f.value, Interval::exact(6));
    assert!(!f.certificate.steps.is_empty());
    l.replay(&f.certificate).unwrap();
    for e in 0..l.store.events.len() {
        l.store.replay_event(e).unwrap();
    }
}

#[test]
fn pairing_maps() {
    let (mut l, a, b) = k3_ledger(false);
    // H^1(A) -s_B-> H^1(A (x) B) from the sequence of B twisted by A
    let a_ = a.clone().dual();
    let k_a = l.ctx.key(&a_).unwrap();
    let k_ab = l.ctx.key(&a_.clone().tensor(b.clone())).unwrap();
    l.register(&k_ab).unwrap();
    l.propagate().unwrap();
    let seq = l
        .seqs
        .iter()
        .position(|s| s.terms[0] == k_a && s.terms[1] == k_ab)
        .expect("sequence registered");
    let m = l.derive_map_property(seq, ExactSeq::position(1, 0)).unwrap();
    assert_eq!(m.property, MapProperty::Injective);
    assert_eq!(m.rank, Interval::exact(1));
    l.replay(&m.certificate).unwrap();
}

#[test]
fn obstructed_serre_construction_is_refused() {
    let (mut l, _, _) = k3_ledger(false);
    let s = l.ctx.geom.clone();
    let bad = SerreBundle {
        name: "P".into(),
        det: LineBundle::new(s.divisor_i(&[0, 1])),
        points: "#1".into(),
        n_points: 1,
        section: "sP".into(),
    };
    assert!(matches!(l.add_serre(bad), Err(Error::SerreObstructed { .. })));
}

/// Enriques surface; with `sphere` the lattice carries a `-2`-curve `C`,
/// `L = O(-C)` and the points lie on `C`.
pub(crate) fn enriques_ledger(sphere: bool) -> (Ledger, SheafExpr, SheafExpr) {
    let (s, pol, lstar, on) = if sphere {
        let s = Geometry::enriques_with_sphere(0, 1);
        let pol = s.parse_class("2*w1 + w2").unwrap();
        (s.clone(), pol, s.divisor_i(&[0, 0, 1]), Some("C"))
    } else {
        let s = Geometry::enriques();
        let pol = s.parse_class("w1 + 2*w2").unwrap();
        (s.clone(), pol, s.divisor_i(&[1, -1]), None)
    };
    let mut ctx = SurfaceContext::new(s.clone(), pol).unwrap();
    if sphere {
        ctx.curves.push("C".into());
    }
    ctx.points.add_set("Z1", 1, on).unwrap();
    ctx.points.add_set("Z2", 2, on).unwrap();
    ctx.points.add_containment("Z2", "Z1").unwrap();
    let mut l = Ledger::new(ctx).unwrap();
    if sphere {
        l.add_section("sC", &SheafExpr::line(lstar.clone()), "C").unwrap();
    }
    let det = LineBundle::new(lstar);
    let mk = |name: &str, pts: &str, n: u32, sec: &str| SerreBundle {
        name: name.into(),
        det: det.clone(),
        points: pts.into(),
        n_points: n,
        section: sec.into(),
    };
    let a = l.add_serre(mk("Astar", "Z1", 1, "sA")).unwrap();
    let b = l.add_serre(mk("B", "Z2", 2, "sB")).unwrap();
    (l, SheafExpr::Serre(a), SheafExpr::Serre(b))
}

fn gamma(l: &Ledger) -> SheafExpr {
    SheafExpr::Line(
        LineBundle::new(l.ctx.geom.zero(1)).with_character(crate::sheaf::Character::gamma_on(&l.ctx.geom).unwrap()),
    )
}

#[test]
fn enriques_values() {
    let (mut l, astar, b) = enriques_ledger(false);
    let g = gamma(&l);
    let a = astar.clone().dual();
    let bs = b.clone().dual();
    assert_eq!(h(&mut l, &a.clone().tensor(g.clone()), 1), Interval::exact(1));
    assert_eq!(h(&mut l, &a, 1), Interval::exact(0));
    assert_eq!(h(&mut l, &bs.clone().tensor(g.clone()), 1), Interval::exact(2));
    assert_eq!(h(&mut l, &bs, 1), Interval::exact(1));
    assert_eq!(h(&mut l, &astar.clone().tensor(bs.clone()), 0), Interval::exact(0));
    let bi = SheafExpr::Ideal { points: "Z1".into(), n: 1, twist: Box::new(b.clone()) };
    assert_eq!(h(&mut l, &bi, 0), Interval::exact(1));
    assert_eq!(h(&mut l, &bi.tensor(g.clone()), 0), Interval::exact(0));
    assert_eq!(h(&mut l, &a.clone().tensor(b.clone()), 0), Interval::exact(0));
    assert_eq!(h(&mut l, &a.tensor(b).tensor(g), 0), Interval::exact(0));
}

#[test]
fn sphere_tables() {
    let (mut l, astar, b) = enriques_ledger(true);
    let g = gamma(&l);
    let s = l.ctx.geom.clone();
    let lstar = SheafExpr::line(s.divisor_i(&[0, 0, 1]));
    let lg = lstar.clone().dual().tensor(g.clone());
    for (i, v) in [1, 1, 0].iter().enumerate() {
        assert_eq!(h(&mut l, &lstar, i), Interval::exact(*v), "h^{i}(L*)");
    }
    for (i, v) in [0, 1, 1].iter().enumerate() {
        assert_eq!(h(&mut l, &lg, i), Interval::exact(*v), "h^{i}(L g)");
    }
    for i in 0..3 {
        assert_eq!(h(&mut l, &lstar.clone().dual(), i), Interval::exact(0));
        assert_eq!(h(&mut l, &lstar.clone().tensor(g.clone()), i), Interval::exact(0));
    }
    assert_eq!(h(&mut l, &b, 0), Interval::exact(2));
    assert_eq!(h(&mut l, &astar, 0), Interval::exact(2));
    let a = astar.clone().dual();
    assert_eq!(h(&mut l, &a.clone().tensor(g.clone()), 1), Interval::exact(2));
    assert_eq!(h(&mut l, &a, 1), Interval::exact(0));
    let bs = b.clone().dual();
    assert_eq!(h(&mut l, &bs.clone().tensor(g.clone()), 1), Interval::exact(3));
    assert_eq!(h(&mut l, &bs, 1), Interval::exact(1));
}
