#![allow(dead_code)]

pub mod reference;
pub mod specgen;

use lolaviz::lang::parse_spec;
use lolaviz::Monitor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use reference::{compare, Reference};
use specgen::{random_spec, random_trace, to_events};

/// Runs `n` random accepted specifications; returns how many were rejected
/// by the checker along the way.
pub fn oracle_runs(seed: u64, n: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut accepted, mut rejected) = (0, 0);
    while accepted < n {
        let src = random_spec(&mut rng);
        let Ok(mut monitor) = Monitor::from_source(&src) else {
            rejected += 1;
            assert!(rejected < 10 * n, "too many rejected specs, last:\n{src}");
            continue;
        };
        accepted += 1;
        let spec = parse_spec(&src).unwrap();
        let trace = random_trace(&mut rng, 50);
        let mut verdicts = Vec::new();
        for e in to_events(&trace) {
            verdicts.extend(monitor.accept_event(&e).unwrap());
        }
        let reference = Reference::run(&spec, &trace);
        if let Err(diff) = compare(&verdicts, &reference, 1e-9) {
            panic!("{diff}\nspec:\n{src}\ntrace: {trace:?}");
        }
    }
    rejected
}
