//! Stability of the Serre bundles on the K3 surface by a line-bundle box.

use cyverify::scene::{bundled, load_scene};
use cyverify::stability::{check_polystable_sum, check_stable, DEFAULT_BOX};

fn main() -> cyverify::Result<()> {
    let mut l = load_scene(bundled("k3-product").unwrap())?;
    let pol = l.ledger.ctx.polarization.clone();
    for name in ["Astar", "B"] {
        let e = l.bundles[name].clone();
        let c = check_stable(&mut l.ledger, &e, &pol, DEFAULT_BOX)?;
        println!("{name}: {} (slope {}, {} candidates in the box)", c.verdict, c.slope, c.candidates.len());
        println!("    tail: {}", c.tail);
    }
    let (e, omega) = (l.e().unwrap(), l.omega.clone().unwrap());
    let p = check_polystable_sum(&mut l.ledger, &e, &omega, DEFAULT_BOX)?;
    println!("E polystable: {} ({})", p.polystable, p.reduction);
    Ok(())
}
