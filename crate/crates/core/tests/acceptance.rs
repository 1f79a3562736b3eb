//! Runs every acceptance suite and prints one verdict line per criterion.
//!
//! `cargo test --test acceptance -- 2 5` restricts the run to criteria 2 and 5.

use std::process::ExitCode;

use lcesim::harness::{presets, verify_preset};

fn main() -> ExitCode {
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for p in presets::all() {
        if !only.is_empty() && !only.contains(&p.criterion) {
            continue;
        }
        match verify_preset(&p) {
            Ok(r) => {
                println!("{}  [{:.1}s]", r.summary_line(), r.seconds);
                for flag in &r.flags {
                    println!("             flag: {flag}");
                }
                if !r.passed {
                    failed.push(p.criterion);
                }
            }
            Err(e) => {
                println!("criterion {:>2} {:<24} FAIL  error: {e}", p.criterion, p.name);
                failed.push(p.criterion);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
