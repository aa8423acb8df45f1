mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqdepth::ingest::{build_population, CountsMatrix};
use seqdepth::sequencing::{allocate_reads, sample_cells, shallow_sequence, ScenarioKind, UnseenPolicy, WeightModel};
use seqdepth::simplex::lq_distance;
use seqdepth::wasserstein::{cost_matrix, emd, transport, wasserstein_p};
use seqdepth::{DiscreteDistribution, ExpressionProfile};

fn random_distribution(rng: &mut ChaCha8Rng, atoms: usize, d: usize, uniform: bool) -> DiscreteDistribution {
    let profiles: Vec<ExpressionProfile> = (0..atoms)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() }).collect();
            if v.iter().all(|&x| x == 0.0) {
                ExpressionProfile::basis(d, rng.random_range(0..d))
            } else {
                ExpressionProfile::from_dense(&v).unwrap()
            }
        })
        .collect();
    if uniform {
        DiscreteDistribution::uniform(profiles).unwrap()
    } else {
        let w: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>() + 0.01).collect();
        let s: f64 = w.iter().sum();
        DiscreteDistribution::new(profiles, w.iter().map(|x| x / s).collect()).unwrap()
    }
}

fn order() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(f64::INFINITY), 1.0f64..4.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transport_plans_are_feasible_and_optimal(seed in any::<u64>(), na in 1usize..25, nb in 1usize..25, d in 1usize..8,
                                                p in 1.0f64..3.0, q in order(), uniform in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_distribution(&mut rng, na, d, uniform);
        let b = random_distribution(&mut rng, nb, d, !uniform);
        let (cost, sol) = transport(&a, &b, p, q).unwrap();
        let cert = sol.certify(a.weights(), b.weights(), &cost);
        prop_assert!(cert.max_marginal_error <= 1e-9, "{cert:?}");
        prop_assert!(cert.duality_gap <= 1e-7, "{cert:?}");
        prop_assert!(cert.min_reduced_cost >= -1e-9, "{cert:?}");
        prop_assert!((sol.plan.total_cost(&cost) - sol.value).abs() <= 1e-9);
    }

    #[test]
    fn wasserstein_is_a_metric(seed in any::<u64>(), n in 1usize..10, d in 2usize..6, p in 1.0f64..3.0, q in order()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_distribution(&mut rng, n, d, false);
        let b = random_distribution(&mut rng, n + 1, d, true);
        let c = random_distribution(&mut rng, n + 2, d, false);
        let ab = wasserstein_p(&a, &b, p, q).unwrap();
        let ba = wasserstein_p(&b, &a, p, q).unwrap();
        let bc = wasserstein_p(&b, &c, p, q).unwrap();
        let ac = wasserstein_p(&a, &c, p, q).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-9);
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!(wasserstein_p(&a, &a, p, q).unwrap() <= 1e-9);
        prop_assert!(ab <= 2.0 + 1e-12);
    }

    #[test]
    fn wasserstein_orders_are_monotone(seed in any::<u64>(), n in 1usize..12, d in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_distribution(&mut rng, n, d, true);
        let b = random_distribution(&mut rng, n + 3, d, false);
        let w1 = wasserstein_p(&a, &b, 1.0, 2.0).unwrap();
        let w2 = wasserstein_p(&a, &b, 2.0, 2.0).unwrap();
        let w1_l1 = wasserstein_p(&a, &b, 1.0, 1.0).unwrap();
        prop_assert!(w1 <= w2 + 1e-9);
        prop_assert!(w1 <= w1_l1 + 1e-9);
    }

    #[test]
    fn permuting_atoms_gives_zero(seed in any::<u64>(), n in 1usize..20, d in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_distribution(&mut rng, n, d, false);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        let b = DiscreteDistribution::new(
            idx.iter().map(|&i| a.atoms()[i].clone()).collect(),
            idx.iter().map(|&i| a.weights()[i]).collect(),
        ).unwrap();
        prop_assert!(wasserstein_p(&a, &b, 1.0, 2.0).unwrap() <= 1e-9);
    }

    #[test]
    fn read_allocation_conserves_reads(seed in any::<u64>(), n in 1usize..30, m in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = w.iter().sum();
        let u: Vec<f64> = w.iter().map(|x| x / s).collect();
        let alloc = allocate_reads(&u, m, &mut rng);
        prop_assert_eq!(alloc.counts.len(), n);
        prop_assert_eq!(alloc.counts.iter().sum::<u64>(), m);
        prop_assert_eq!(alloc.total, m);
    }

    #[test]
    fn noisy_profiles_stay_on_the_support(seed in any::<u64>(), n in 1usize..15, d in 2usize..20, m in 0u64..5000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_distribution(&mut rng, 8, d, false);
        let sample = sample_cells(&mu, n, &WeightModel::Uniform, &mut rng).unwrap();
        let run = shallow_sequence(&sample.cells, &sample.raw_weights, m, &UnseenPolicy::Uniform, &mut rng).unwrap();
        prop_assert!(run.weights.iter().all(|&u| (u * n as f64 - 1.0).abs() < 1e-12));
        prop_assert!((run.c_star() - 1.0).abs() < 1e-12);
        for (i, (noisy, cell)) in run.noisy_profiles.iter().zip(&run.sampled_cells).enumerate() {
            prop_assert!((noisy.sum() - 1.0).abs() < 1e-9);
            prop_assert!(noisy.values().iter().all(|&v| v > 0.0));
            if run.allocation.counts[i] > 0 {
                prop_assert!(noisy.support_within(cell));
            } else {
                prop_assert!(lq_distance(noisy, &ExpressionProfile::uniform(d), 1.0).unwrap() == 0.0);
            }
        }
    }

    #[test]
    fn populations_sum_to_one_and_share_atoms(rows in proptest::collection::vec(proptest::collection::vec(0u64..6, 6), 1..15)) {
        prop_assume!(rows.iter().any(|r| r.iter().any(|&c| c > 0)));
        let counts = CountsMatrix::from_dense(&rows).unwrap();
        let coupled = build_population(&counts, ScenarioKind::Coupled).unwrap();
        let independent = build_population(&counts, ScenarioKind::Independent).unwrap();
        let nonzero = rows.iter().filter(|r| r.iter().any(|&c| c > 0)).count();
        prop_assert_eq!(coupled.mu.len(), nonzero);
        prop_assert_eq!(&coupled.mu, &independent.mu);
        for a in coupled.mu.atoms() {
            prop_assert!((a.sum() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn duality_gap_at_five_hundred_by_five_thousand() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let a = random_distribution(&mut rng, 500, 10, true);
    let b = random_distribution(&mut rng, 5000, 10, false);
    let cost = cost_matrix(&a, &b, 1.0, 2.0).unwrap();
    let sol = emd(a.weights(), b.weights(), &cost).unwrap();
    let cert = sol.certify(a.weights(), b.weights(), &cost);
    assert!(cert.duality_gap <= 1e-7, "{cert:?}");
    assert!(cert.max_marginal_error <= 1e-9, "{cert:?}");
    assert!(cert.min_reduced_cost >= -1e-9, "{cert:?}");
}

#[test]
fn pair_population_moments() {
    let mu = common::pair_population(20);
    let s = seqdepth::simplex::population_stats(&mu);
    assert_eq!(s.atom_count, 190);
    assert!((s.mean_l0 - 2.0).abs() < 1e-12);
    assert!((s.mean_sq_l2 - 0.5).abs() < 1e-12);
}
