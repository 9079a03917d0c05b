//! The condition list on the Enriques quotient, as a text report.

use cyverify::checklist::{run_checklist, RunOptions};
use cyverify::report::{exit_code, render_text, Policy};
use cyverify::scene::{bundled, load_scene, Check};

fn main() -> cyverify::Result<()> {
    let mut l = load_scene(bundled("enriques-quotient").unwrap())?;
    let opts = RunOptions { checks: Some(vec![Check::Det, Check::Chi, Check::Pairings]), ..RunOptions::default() };
    let r = run_checklist(&mut l, &opts)?;
    print!("{}", render_text(&r, Policy::default()));
    println!("exit code {}", exit_code(&r, Policy::default()));
    Ok(())
}
