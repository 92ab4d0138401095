//! Runs the acceptance criteria and prints one line per criterion.

use std::process::ExitCode;

fn main() -> ExitCode {
    let mut failed = 0;
    for id in 1..=8 {
        let res = carnot::acceptance::run_criterion(id).expect("known criterion");
        println!("{}", res.line());
        for c in &res.checks {
            println!("    {}", c.describe());
        }
        for n in &res.notes {
            println!("    note: {n}");
        }
        if !res.pass() {
            failed += 1;
        }
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
