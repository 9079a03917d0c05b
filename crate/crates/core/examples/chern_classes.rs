//! Chern data and Euler characteristics of the k3-product bundle.

use cyverify::scene::{bundled, load_scene};

fn main() -> cyverify::Result<()> {
    let l = load_scene(bundled("k3-product").unwrap())?;
    for (name, e) in &l.summands {
        let c = e.chern()?;
        println!("{name} = {e}: rank {}, c1 = {}, c2 = {}, chi = {}", c.rank, c.c1(), c.c2(), e.hrr_chi()?);
    }
    let e = l.e().unwrap();
    let c = e.chern()?;
    println!("E: c1 = {}, c2 = {}, c3 = {}", c.c1(), c.c2(), c.c3());
    let target = &l.threefold.c2_tangent() - &c.c2();
    println!("c2(X) - c2(E) = {target}");
    Ok(())
}
