//! The bundled scenes' JSON reports must match the committed files byte for byte.
//!
//! Regenerate with `cargo run -- verify NAME --report json > crates/core/tests/golden/NAME.json` for each bundled scene.

use cyverify::checklist::{run_checklist, RunOptions};
use cyverify::report::{render_json, Policy};
use cyverify::scene::{bundled, load_scene, BUNDLED};

fn report(name: &str) -> String {
    let mut l = load_scene(bundled(name).unwrap()).unwrap();
    let r = run_checklist(&mut l, &RunOptions::default()).unwrap();
    render_json(&r, Policy::default())
}

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}.json", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn first_difference(a: &str, b: &str) -> String {
    for (i, (x, y)) in a.lines().zip(b.lines()).enumerate() {
        if x != y {
            return format!("line {}:\n  golden: {x}\n  actual: {y}", i + 1);
        }
    }
    format!("lengths differ: {} vs {} lines", a.lines().count(), b.lines().count())
}

#[test]
fn bundled_reports_match_golden_files() {
    for name in BUNDLED {
        let (want, got) = (golden(name), report(name));
        assert!(want == got, "{name}: {}", first_difference(&want, &got));
    }
}
