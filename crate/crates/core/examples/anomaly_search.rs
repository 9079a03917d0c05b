//! Searches a small box for F with the c2 the anomaly asks for, stopping
//! half way and resuming from the checkpoint.

use cyverify::scene::{bundled, load_scene};
use cyverify::search::{required_c2, run_search, SearchConfig};

fn main() -> cyverify::Result<()> {
    let mut l = load_scene(bundled("k3-product").unwrap())?;
    let target = required_c2(&l.e().unwrap())?;
    let omega = l.omega.clone().unwrap();
    let dir = std::env::temp_dir().join(format!("cyverify-search-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let ck = dir.join("checkpoint");

    let mut cfg = SearchConfig { rank_max: 2, box_size: 4, limit: Some(700), ..SearchConfig::default() };
    let partial = run_search(&target, &omega, Some(&mut l.ledger), &cfg, Some(&ck), true)?;
    println!("first run: {} of {}", partial.completion.enumerated, partial.completion.box_cardinality);
    cfg.limit = None;
    let r = run_search(&target, &omega, Some(&mut l.ledger), &cfg, Some(&ck), true)?;
    println!("resumed: {} of {}, complete {}", r.completion.enumerated, r.completion.box_cardinality, r.completion.complete);
    println!("Bogomolov c2(F).Omega = {}, rejected {:?}", r.bogomolov_target, r.rejected);
    println!("{} survivors, {} certified stable", r.survivors.len(), r.certified_stable);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
