//! Cohomology dimensions on the K3 surface with their derivations.

use cyverify::scene::{bundled, load_scene};
use cyverify::sheaf::parse_sheaf;

fn main() -> cyverify::Result<()> {
    let mut l = load_scene(bundled("k3-product").unwrap())?;
    let exprs: Vec<_> = ["Astar", "ideal(ZB, O)", "end(B)", "tensor(dual(B), dual(Astar))"]
        .iter()
        .map(|t| parse_sheaf(t, &l.parse_context()))
        .collect::<cyverify::Result<_>>()?;
    for e in &exprs {
        let k = l.ledger.ctx.key(e)?;
        let h: Vec<String> = (0..3).map(|i| l.ledger.h(&k, i).map(|v| v.to_string())).collect::<cyverify::Result<_>>()?;
        println!("h^*({e}) = ({})", h.join(", "));
    }
    let k = l.ledger.ctx.key(&exprs[0])?;
    let fact = l.ledger.query(&k, 0)?;
    l.ledger.replay(&fact.certificate)?;
    print!("{}", fact.certificate.render());
    Ok(())
}
