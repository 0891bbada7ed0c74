use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use hyvid_core::fragment::{
    parse_fragment_bytes, parse_fragment_string, serialize_fragment, FragmentDirective,
    TemporalRange,
};
use hyvid_core::interchange::{export_set_json, import_set_json};
use hyvid_core::model::validate_set_structure;
use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::gen::{self, Rng};
use crate::Outcome;

pub fn a1_round_trip() -> Outcome {
    let mut rng = gen::rng(0xA1);
    let start = Instant::now();
    for n in 0..1000 {
        let (set, video) = gen::set(&mut rng, n);
        let violations = validate_set_structure(&set, &video);
        if !violations.is_empty() {
            return Err(format!(
                "generator produced an invalid set #{n}: {}",
                violations[0]
            ));
        }
        let bytes = export_set_json(&set, &video).map_err(|e| format!("export #{n}: {e}"))?;
        let again = export_set_json(&set, &video).map_err(|e| format!("export #{n}: {e}"))?;
        if bytes != again {
            return Err(format!("set #{n}: export is not deterministic"));
        }
        let imported = import_set_json(&bytes).map_err(|e| format!("import #{n}: {e}"))?;
        if imported.set != set || imported.video != video {
            return Err(format!("set #{n}: import(export(s)) != s"));
        }
        if export_set_json(&imported.set, &imported.video).unwrap() != bytes {
            return Err(format!("set #{n}: re-export differs"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(10) {
        return Err(format!(
            "1000 sets took {:.2} s (limit 10 s)",
            elapsed.as_secs_f64()
        ));
    }
    Ok(format!(
        "1000 sets round-trip exactly, deterministic bytes, {:.2} s (limit 10 s)",
        elapsed.as_secs_f64()
    ))
}

fn directive(rng: &mut Rng) -> FragmentDirective {
    let temporal = |rng: &mut Rng| {
        let begin = rng.random_range(0..=1_000_000_000);
        if rng.random_bool(0.3) {
            TemporalRange::open(begin)
        } else {
            TemporalRange::closed(begin, rng.random_range(begin..=1_000_000_000))
        }
    };
    match rng.random_range(0..3) {
        0 => FragmentDirective {
            temporal: Some(temporal(rng)),
            spatial: None,
        },
        1 => FragmentDirective {
            temporal: None,
            spatial: Some(gen::region(rng)),
        },
        _ => FragmentDirective {
            temporal: Some(temporal(rng)),
            spatial: Some(gen::region(rng)),
        },
    }
}

/// serialize(parse(s)) is a fixed point of serialize∘parse.
fn check_idempotent(s: &str) -> Result<(), String> {
    let Ok(d) = parse_fragment_string(s) else {
        return Ok(());
    };
    let once = serialize_fragment(&d);
    let d2 = parse_fragment_string(&once)
        .map_err(|e| format!("{s:?} -> {once:?} no longer parses: {e}"))?;
    if d2 != d {
        return Err(format!("{s:?} -> {once:?} parses to a different directive"));
    }
    let twice = serialize_fragment(&d2);
    if twice != once {
        return Err(format!("{s:?}: {once:?} then {twice:?}"));
    }
    Ok(())
}

const TOKENS: &[&str] = &[
    "t",
    "=",
    ",",
    "&",
    ":",
    ".",
    "npt:",
    "xywh",
    "pixel",
    "percent",
    "0",
    "1",
    "9",
    "59",
    "60",
    "99",
    "-",
    "+",
    "e",
    "%20",
    "#",
    " ",
    "00:",
    "1:02:03.5",
    "0.0005",
    "999999999999999999999",
    "\u{e9}",
    "\0",
    "id=x",
];

fn fuzz_input(rng: &mut Rng, seeds: &[String]) -> Vec<u8> {
    match rng.random_range(0..3) {
        0 => (0..rng.random_range(0..48)).map(|_| rng.random()).collect(),
        1 => (0..rng.random_range(0..12))
            .map(|_| *TOKENS.choose(rng).unwrap())
            .collect::<String>()
            .into_bytes(),
        _ => {
            let mut bytes = seeds.choose(rng).unwrap().clone().into_bytes();
            for _ in 0..rng.random_range(1..4) {
                let at = rng.random_range(0..=bytes.len());
                match rng.random_range(0..3) {
                    0 if at < bytes.len() => {
                        bytes.remove(at);
                    }
                    1 if at < bytes.len() => bytes[at] = rng.random(),
                    _ => {
                        let tok = TOKENS.choose(rng).unwrap().as_bytes();
                        bytes.splice(at..at, tok.iter().copied());
                    }
                }
            }
            bytes
        }
    }
}

pub struct FuzzStats {
    pub elapsed: Duration,
    pub inputs: u64,
    pub accepted: u64,
    pub failure: Option<String>,
}

/// Feeds the parser generated inputs for `budget`. Any panic, or a violation
/// of idempotence on an accepted input, is a failure.
pub fn fuzz(budget: Duration) -> FuzzStats {
    let mut rng = gen::rng(0xF022);
    let seeds: Vec<String> = (0..200)
        .map(|_| serialize_fragment(&directive(&mut rng)))
        .collect();
    let mut stats = FuzzStats {
        elapsed: Duration::ZERO,
        inputs: 0,
        accepted: 0,
        failure: None,
    };
    let start = Instant::now();
    while start.elapsed() < budget {
        for _ in 0..256 {
            let input = fuzz_input(&mut rng, &seeds);
            stats.inputs += 1;
            let outcome = catch_unwind(AssertUnwindSafe(|| {
                let parsed = parse_fragment_bytes(&input);
                let idem = std::str::from_utf8(&input).map_or(Ok(()), check_idempotent);
                (parsed.is_ok(), idem)
            }));
            match outcome {
                Ok((ok, Ok(()))) => stats.accepted += u64::from(ok),
                Ok((_, Err(e))) => {
                    stats.failure = Some(format!("idempotence: {e}"));
                    return stats;
                }
                Err(_) => {
                    stats.failure = Some(format!(
                        "parser panicked on {:?}",
                        String::from_utf8_lossy(&input)
                    ));
                    return stats;
                }
            }
        }
    }
    stats.elapsed = start.elapsed();
    stats
}

pub fn a2_fragments(fuzz: FuzzStats) -> Outcome {
    let mut rng = gen::rng(0xA2);
    for n in 0..10_000 {
        let d = directive(&mut rng);
        let s = serialize_fragment(&d);
        let back = parse_fragment_string(&s)
            .map_err(|e| format!("directive #{n} {s:?} does not parse: {e}"))?;
        if back != d {
            return Err(format!("directive #{n} {s:?} round-trips to {back:?}"));
        }
        check_idempotent(&s)?;
    }
    let noncanonical = [
        "t=npt:10,20",
        "t=00:01:02.5",
        "t=,5",
        "t=1:00:00",
        "t=0.0005",
        "t=10&xywh=pixel:1,2,3,4&z=1",
        "xywh=percent:0.5,0,99.5,100",
        "foo=bar&t=3",
        "t=5.10,6.100",
    ];
    for s in noncanonical {
        if parse_fragment_string(s).is_err() {
            return Err(format!("{s:?} should be accepted"));
        }
        check_idempotent(s)?;
    }
    if let Some(f) = fuzz.failure {
        return Err(f);
    }
    Ok(format!(
        "10000 directives round-trip, idempotent; fuzzed {} inputs for {:.1} s ({} accepted), no crash",
        fuzz.inputs,
        fuzz.elapsed.as_secs_f64(),
        fuzz.accepted
    ))
}
