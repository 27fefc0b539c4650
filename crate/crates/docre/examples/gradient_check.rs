//! Finite-difference verification of the autodiff substrate: every
//! operator plus the full training loss on a two-document batch, compared
//! against central differences at step 1e-5.
//!
//! Run: cargo run --release --example gradient_check

use docre::gradsuite::run_suite;

fn main() {
    let seeds: Vec<u64> = (0..5).collect();
    let entries = run_suite(&seeds, 20).expect("suite runs");
    let width = entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
    let mut all_ok = true;
    for e in &entries {
        let status = if e.passed() { "ok" } else { "FAIL" };
        println!("{:width$}  max rel err {:>9.3e}  {status}", e.name, e.max_rel_err);
        all_ok &= e.passed();
    }
    if !all_ok {
        std::process::exit(1);
    }
    println!("all {} checks under the 1e-4 tolerance over {} seeds", entries.len(), seeds.len());
}
