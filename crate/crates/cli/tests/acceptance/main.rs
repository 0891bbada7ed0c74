use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Duration;

mod collab;
mod gen;
mod interchange;
mod revision;
mod scenario;

pub(crate) type Outcome = Result<String, String>;

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(outcome) => outcome,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            Err(format!("panicked: {msg}"))
        }
    }
}

fn main() -> ExitCode {
    let fuzz = std::thread::spawn(|| interchange::fuzz(Duration::from_secs(60)));

    let mut results: Vec<(&str, Outcome)> = vec![
        ("A1", guarded(interchange::a1_round_trip)),
        ("A3", guarded(collab::a3_majority_oracle)),
        ("A4", guarded(collab::a4_diff)),
        ("A5", guarded(revision::a5_replay)),
        ("A6", guarded(collab::a6_grading)),
        ("A7", guarded(scenario::a7_end_to_end)),
    ];
    let a2 = match fuzz.join() {
        Ok(stats) => guarded(|| interchange::a2_fragments(stats)),
        Err(_) => Err("fuzz thread panicked".into()),
    };
    results.insert(1, ("A2", a2));

    let mut failed = false;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("{name} PASS {detail}"),
            Err(reason) => {
                failed = true;
                println!("{name} FAIL {reason}");
            }
        }
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
