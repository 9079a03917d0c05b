use super::pairing::{analyse, PairingValue};
use crate::ledger::tests::{enriques_ledger, k3_ledger};
use crate::ring::Geometry;
use crate::sheaf::SheafExpr;

fn x1_pieces(a: &SheafExpr, b: &SheafExpr) -> [SheafExpr; 2] {
    let x = Geometry::fibred_over(&a.geometry());
    [
        SheafExpr::EllipticTwist(Box::new(a.clone().dual().pullback(&x)), 3),
        SheafExpr::EllipticTwist(Box::new(b.clone().pullback(&x)), -3),
    ]
}

fn x2_pieces(a: &SheafExpr, b: &SheafExpr) -> [SheafExpr; 2] {
    let x = Geometry::fibred_over(&a.geometry());
    let g = super::pairing::flat(&x, crate::sheaf::Character::gamma_on(&x).unwrap());
    [
        SheafExpr::SectionTwist(Box::new(a.clone().dual().pullback(&x)), 3).tensor(g.clone()),
        SheafExpr::SectionTwist(Box::new(b.clone().pullback(&x)), -3).tensor(g),
    ]
}

#[test]
fn product_pairings() {
    let (mut l, a, b) = k3_ledger(false);
    let [ap, bp] = x1_pieces(&a, &b);
    let r = analyse(&mut l, "E", [&ap, &bp]).unwrap();
    assert_eq!((r.enumerated, r.constrained), (729, 81));
    assert_eq!(r.untwisted, PairingValue::Nonzero);
    assert!(r.all_nontrivial_zero);
    assert!(r.first_nontrivial_zero);
    assert!(!r.nonzero_twisted.is_empty());
    let d = analyse(&mut l, "E*", [&ap.clone().dual(), &bp.clone().dual()]).unwrap();
    assert_eq!(d.untwisted, PairingValue::Nonzero);
    assert!(d.all_nontrivial_zero);
    let t = r.triple(["1", "1", "1"]).unwrap();
    l.replay(&t.certificate).unwrap();
}

#[test]
fn quotient_pairings() {
    let (mut l, a, b) = enriques_ledger(false);
    let [ap, bp] = x2_pieces(&a, &b);
    let r = analyse(&mut l, "E", [&ap, &bp]).unwrap();
    assert_eq!((r.enumerated, r.constrained), (512, 64));
    assert_eq!(r.untwisted, PairingValue::Nonzero);
    assert!(r.all_nontrivial_zero);
    for t in [["g", "g", "1"], ["g", "1", "g"]] {
        assert_eq!(r.triple(t).unwrap().value, PairingValue::Zero, "{t:?}");
    }
    let d = analyse(&mut l, "E*", [&ap.clone().dual(), &bp.clone().dual()]).unwrap();
    assert_eq!(d.untwisted, PairingValue::Nonzero);
    assert!(d.all_nontrivial_zero);
    for t in [["g", "g", "1"], ["g", "1", "g"]] {
        assert_eq!(d.triple(t).unwrap().value, PairingValue::Zero, "{t:?}");
    }
}

#[test]
fn sphere_pairings() {
    use crate::stability::{check_stable, hom_vanishing};
    let (mut l, a, b) = enriques_ledger(true);
    let pol = l.ctx.polarization.clone();
    let (a_, bs) = (a.clone().dual(), b.clone().dual());
    let ca = check_stable(&mut l, &a_, &pol, 10).unwrap();
    let cb = check_stable(&mut l, &bs, &pol, 10).unwrap();
    hom_vanishing(&mut l, &a_, &bs, &ca, &cb).unwrap();
    let [ap, bp] = x2_pieces(&a, &b);
    let r = analyse(&mut l, "E", [&ap, &bp]).unwrap();
    assert!(r.passes());
    assert!(r.toggled_zero());
    let d = analyse(&mut l, "E*", [&ap.dual(), &bp.dual()]).unwrap();
    assert_eq!(d.untwisted, PairingValue::Nonzero);
    // the twisted L2 pieces pick up H^0(L*) and A* has two sections, so
    // the full table is not settled by the reduced maps
    assert!(!d.all_nontrivial_zero);
    assert!(d.triples.iter().all(|t| t.value != PairingValue::Nonzero || t.nontrivial < 3));
    assert_eq!(d.gamma_toggled.len(), 1);
    assert!(d.toggled_zero());
    let m = &d.gamma_toggled[0];
    assert_eq!(m.property, Some(crate::ledger::MapProperty::Zero), "{}", m.reason);
    l.replay(&m.certificate).unwrap();
}

/// The scene axiom `0 -> I_ZB -> A* -> I_ZA (x) L* + O_ZB -> 0`.
fn assert_end_sequence(l: &mut crate::ledger::Ledger, a: &SheafExpr) {
    let s = a.geometry();
    let lstar = SheafExpr::line(s.divisor_i(&[1, -1]));
    let izb = SheafExpr::Ideal { points: "ZB".into(), n: 3, twist: Box::new(SheafExpr::structure(&s)) };
    let q = SheafExpr::Ideal { points: "ZA".into(), n: 2, twist: Box::new(lstar) }
        .sum(SheafExpr::Skyscraper { geom: s.clone(), points: "ZB".into(), n: 3 });
    l.assert_seq([&izb, a, &q], ["sA", "q"], "whose cohomology gives the exact sequence").unwrap();
}

#[test]
fn end_pairing_on_the_product() {
    use super::end::analyse_end;
    let (mut l, a, b) = k3_ledger(false);
    assert_end_sequence(&mut l, &a);
    let [ap, bp] = x1_pieces(&a, &b);
    let r = analyse_end(&mut l, [&ap, &bp]).unwrap();
    let dims: Vec<_> = r.summands.iter().map(|s| (s.surface.value(), s.threefold.value())).collect();
    assert_eq!(
        dims,
        vec![(Some(6), Some(7)), (Some(10), Some(11)), (Some(6), Some(6)), (Some(90), Some(90))]
    );
    assert_eq!(r.surface_total, crate::ledger::Interval::exact(112));
    assert!(r.passes());
    let shapes: Vec<_> = r.injections.iter().map(|i| (i.sections.value(), i.source.value(), i.target.value())).collect();
    assert_eq!(shapes, vec![(Some(1), Some(1), Some(6)), (Some(1), Some(2), Some(10))]);
    for c in &r.components {
        l.replay(&c.certificate).unwrap();
    }
}

mod scenes {
    use super::super::*;
    use crate::scene::{bundled, load_scene};

    fn run(name: &str, checks: &[Check]) -> ChecklistReport {
        let mut l = load_scene(bundled(name).unwrap()).unwrap();
        let opts = RunOptions { checks: Some(checks.to_vec()), ..RunOptions::default() };
        run_checklist(&mut l, &opts).unwrap()
    }

    #[test]
    fn k3_product_cheap_checks() {
        let r = run("k3-product", &[Check::Det, Check::Chi, Check::Anomaly]);
        assert_eq!(r.condition("C1").unwrap().verdict, Verdict::Pass);
        assert_eq!(r.condition("C2").unwrap().verdict, Verdict::Pass);
        assert_eq!(r.condition("C3").unwrap().verdict, Verdict::Pass);
        assert_eq!(r.condition("C9").unwrap().verdict, Verdict::Discrepancy);
    }
}
