//! Intersection numbers on the base surfaces and their threefolds.

use cyverify::ring::{degree, Geometry};

fn main() -> cyverify::Result<()> {
    let s1 = Geometry::k3();
    print!("{}", s1.table_fixture());
    let l = s1.parse_class("w2 - w1")?;
    println!("c1(L)^2 = {}", (&l * &l).integrate());

    let s2 = Geometry::enriques();
    let l = s2.parse_class("w2 - w1")?;
    println!("on {}: c1(L)^2 = {}, deg_w = {}", s2.name, (&l * &l).integrate(), degree(&l, &s2.parse_class("w1 + 2*w2")?)?);

    for x in [Geometry::fibred_over(&s1), Geometry::fibred_over(&s2)] {
        let nef: Vec<String> = x.nef_generators().iter().map(|c| c.to_string()).collect();
        println!("{}: c2 = {}, nef generators {}", x.name, x.c2_tangent(), nef.join(", "));
    }
    Ok(())
}
