//! Parses a scene, prints its normal form and the canonical JSON report.

use cyverify::checklist::{run_checklist, RunOptions};
use cyverify::report::{render_json, Policy};
use cyverify::scene::{parse_scene, render_scene};

const SCENE: &str = "\
scene example
geometry k3
polarization w1 + w2
points Z 2
bundle V = serre2(det = line(1,-1), pts = Z, section = s)
summand P = pullback(line(1, -2))
summand Q = pullback(line(-1,2))
omega w1 + w2 + 3*wT
claim chi = 0 \"index\"
check det chi
";

fn main() -> cyverify::Result<()> {
    let scene = parse_scene(SCENE)?;
    print!("{}", render_scene(&scene));
    let mut l = scene.load()?;
    let r = run_checklist(&mut l, &RunOptions::default())?;
    print!("{}", render_json(&r, Policy::default()));
    Ok(())
}
