use std::collections::BTreeMap;

use proptest::prelude::*;

use seqdepth::experiment::{read_results_csv, read_summary_csv, emit_outputs, PlotOptions, SweepConfig, SweepResult, TrialRecord};
use seqdepth::ingest::{
    build_population, load_population, read_counts, read_matrix_market, save_population, write_counts_csv, write_counts_mtx, CountsMatrix,
    Format, PopulationSpec,
};
use seqdepth::sequencing::ScenarioKind;
use seqdepth::{DiscreteDistribution, ExpressionProfile};

fn counts_strategy() -> impl Strategy<Value = Vec<Vec<u64>>> {
    (1usize..8).prop_flat_map(|genes| proptest::collection::vec(proptest::collection::vec(0u64..1000, genes), 1..12))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn counts_roundtrip_through_csv_and_mtx(rows in counts_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let counts = CountsMatrix::from_dense(&rows).unwrap();
        let csv = dir.path().join("c.csv");
        write_counts_csv(&csv, &counts).unwrap();
        let back = read_counts(&csv, Format::Csv).unwrap();
        prop_assert_eq!(back.to_dense(), rows.clone());
        prop_assert_eq!(back.gene_ids(), counts.gene_ids());
        prop_assert_eq!(back.cell_ids(), counts.cell_ids());

        let mtx = dir.path().join("c.mtx");
        write_counts_mtx(&mtx, &counts).unwrap();
        prop_assert_eq!(read_matrix_market(&mtx, None, None).unwrap().to_dense(), rows);
    }

    #[test]
    fn populations_roundtrip_bit_exactly(seed in any::<u64>(), atoms in 1usize..10, d in 1usize..12) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let profiles: Vec<ExpressionProfile> = (0..atoms)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-9).collect();
                ExpressionProfile::from_dense(&v).unwrap()
            })
            .collect();
        let w: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>() + 0.01).collect();
        let s: f64 = w.iter().sum();
        let mu = DiscreteDistribution::new(profiles, w.iter().map(|x| x / s).collect()).unwrap();
        let spec = PopulationSpec::from_distribution(mu);
        let dir = tempfile::tempdir().unwrap();
        save_population(dir.path(), &spec, None, None, BTreeMap::new()).unwrap();
        let back = load_population(dir.path()).unwrap();
        prop_assert_eq!(back.mu, spec.mu);
    }
}

#[test]
fn counts_population_keeps_scenario_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let counts = CountsMatrix::from_dense(&[vec![3, 0, 1], vec![0, 2, 2], vec![1, 1, 1]]).unwrap();
    let spec = build_population(&counts, ScenarioKind::Independent).unwrap();
    save_population(dir.path(), &spec, Some(&counts), None, BTreeMap::new()).unwrap();
    for f in ["counts.mtx", "genes.txt", "cells.txt", "population.json", "provenance.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let back = load_population(dir.path()).unwrap();
    assert_eq!(back.mu, spec.mu);
    assert_eq!(back.scenario, spec.scenario);
    assert_eq!(back.provenance, spec.provenance);
}

#[test]
fn sweep_tables_read_back() {
    let records: Vec<TrialRecord> = [(100u64, 2usize), (100, 4), (1000, 2), (1000, 4)]
        .iter()
        .flat_map(|&(m, n)| {
            (0..3).map(move |t| TrialRecord {
                m,
                n,
                trial: t,
                w_noisy_vs_mu: 0.1 + 1.0 / (m as f64) + 0.001 * t as f64 + 0.01 * n as f64,
                w_noisy_vs_mun: 0.05 / 3.0,
                w_mun_vs_mu: 1.0 / 7.0,
            })
        })
        .collect();
    let config = SweepConfig {
        m_grid: vec![100, 1000],
        n_grid: vec![2, 4],
        trials: 3,
        ..SweepConfig::default()
    };
    let result = SweepResult::from_records(config, records.clone());
    let dir = tempfile::tempdir().unwrap();
    let files = emit_outputs(&result, dir.path(), &PlotOptions::default()).unwrap();
    assert_eq!(read_results_csv(&files.results).unwrap(), records);
    let summary = read_summary_csv(&files.summary).unwrap();
    assert_eq!(summary.len(), 4);
    for (row, cell) in summary.iter().zip(&result.cells) {
        assert_eq!(row.mean_w, cell.mean_w);
        assert_eq!(row.std_w, cell.std_w);
    }
}
