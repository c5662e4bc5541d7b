use proptest::prelude::*;

use cdc_core::bounds::{count_a_profile, l_coded, lower_bound_lemma1};
use cdc_core::codec::{decode_log, encode_log};
use cdc_core::combinatorics::binomial;
use cdc_core::engine::{
    run_job, suggest_value_bits, synthetic_inputs, PlacementKind, RunConfig, Strategy as Shuffle,
    SyntheticJob,
};
use cdc_core::placement::{assign_map_tasks, JobSpec};
use cdc_core::rational::integer;
use cdc_core::sortapp::{run_coded_sort, RecordFormat, SortConfig};

fn small_job() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (2usize..=5).prop_flat_map(|k| (Just(k), 1..=k, 1..=k, 1usize..=2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn canonical_coded_load_is_exact((k, r, s, eta) in small_job(), seed: u64) {
        let n = binomial(k, r) as usize * eta;
        let q = binomial(k, s) as usize;
        let mut spec = JobSpec::new(k, q, n, r, s, 1).unwrap();
        spec.value_bits = suggest_value_bits(&spec).unwrap();
        let job = SyntheticJob::new(q, spec.value_bits);
        let inputs = synthetic_inputs(n, 8, seed);
        let out = run_job(&spec, &job, &inputs, &RunConfig::new(Shuffle::Coded)).unwrap();
        prop_assert!(out.oracle.unwrap().passed());
        prop_assert!(out.report.is_consistent());
        prop_assert_eq!(out.report.load(), l_coded(r, s, k).unwrap());
        let log = encode_log(&out.messages).unwrap();
        let back = decode_log(&log).unwrap();
        prop_assert_eq!(encode_log(&back).unwrap(), log);
        for (m, orig) in back.iter().zip(&out.messages) {
            prop_assert_eq!(&m.payload[..orig.payload.len()], &orig.payload[..]);
        }
    }

    #[test]
    fn every_file_is_mapped_r_times((k, r, _s, eta) in small_job()) {
        let n = binomial(k, r) as usize * eta;
        let spec = JobSpec::new(k, k, n, r, 1, 8).unwrap();
        let fa = assign_map_tasks(&spec).unwrap();
        for file in 1..=n {
            prop_assert_eq!(fa.holders(file).len(), r);
        }
        for node in 1..=k {
            prop_assert_eq!(fa.files_of(node).len() * k, r * n);
        }
        prop_assert_eq!(fa.computation_load(), integer(r));
    }

    #[test]
    fn random_placements_stay_above_the_bound(k in 2usize..=5, r_seed: usize, files in 2usize..10, seed: u64) {
        let r = 1 + r_seed % k;
        let spec = JobSpec::new(k, k, files, r, 1, 8).unwrap();
        let job = SyntheticJob::new(k, 8);
        let inputs = synthetic_inputs(files, 8, seed);
        let mut config = RunConfig::new(Shuffle::RandomPlacementCoded);
        config.placement = PlacementKind::Random(seed);
        let out = run_job(&spec, &job, &inputs, &config).unwrap();
        prop_assert!(out.oracle.unwrap().passed());
        prop_assert!(out.report.load() >= lower_bound_lemma1(&count_a_profile(&out.map_assignment)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sort_output_is_an_ordered_permutation(records in 0usize..300, r in 1usize..=3, seed: u64) {
        let mut config = SortConfig::new(4, r, records, seed);
        config.format = RecordFormat::new(2, 3).unwrap();
        let out = run_coded_sort(&config).unwrap();
        for run in &out.runs {
            prop_assert!(run.matches_oracle);
            prop_assert_eq!(run.sorted.len(), records * 5);
            let keys: Vec<&[u8]> = run.sorted.chunks(5).map(|c| &c[..2]).collect();
            prop_assert!(keys.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
