mod support;

use lolaviz::lang::parse_spec;
use lolaviz::Monitor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::oracle_runs;
use support::reference::{compare, Reference};
use support::specgen::{random_spec, random_trace, to_events};

#[test]
fn engine_matches_reference() {
    assert_eq!(oracle_runs(11, 200), 0);
}

#[test]
fn engine_matches_reference_on_long_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let src = random_spec(&mut rng);
        let mut monitor = Monitor::from_source(&src).unwrap();
        let spec = parse_spec(&src).unwrap();
        let trace = random_trace(&mut rng, 400);
        let mut verdicts = Vec::new();
        for e in to_events(&trace) {
            verdicts.extend(monitor.accept_event(&e).unwrap());
        }
        compare(&verdicts, &Reference::run(&spec, &trace), 1e-9).unwrap_or_else(|d| panic!("{d}\n{src}"));
    }
}
