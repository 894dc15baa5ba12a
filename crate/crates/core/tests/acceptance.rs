//! Runs every acceptance criterion at its stated tolerance, one line each.

use canon_core::acceptance;

fn main() {
    let seed = std::env::var("CANON_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let mut failed = 0;
    for id in 1..=acceptance::NAMES.len() {
        let outcome = acceptance::run(id, seed);
        println!("{outcome}");
        if !outcome.passed {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        acceptance::NAMES.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
