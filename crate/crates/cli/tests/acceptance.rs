use std::path::PathBuf;
use std::process::ExitCode;

use gaussblab_cli::commands::load_constants;
use gaussblab_cli::verify::{run_criterion, VerifyOptions, CRITERIA};

fn main() -> ExitCode {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../constants/calibrated.json");
    let constants = match load_constants(&path) {
        Ok(c) => c,
        Err(e) => {
            println!("[FAIL] constants {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let opts = VerifyOptions {
        seed: 1,
        partitions: 1,
        constants,
    };
    let mut failed = 0;
    for (id, _) in CRITERIA {
        let r = run_criterion(id, &opts);
        println!("{}", r.line());
        if !r.passed {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
