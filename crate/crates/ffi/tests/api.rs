use std::ffi::{CStr, CString};
use std::ptr;

use seqdepth_ffi::*;

fn last_error() -> String {
    let p = sd_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn dist(rows: &[f64], n: usize, d: usize) -> *mut SdDistribution {
    let mut out = ptr::null_mut();
    assert_eq!(sd_distribution_from_dense(rows.as_ptr(), n, d, ptr::null(), &mut out), SdStatus::Ok);
    out
}

#[test]
fn wasserstein_between_point_masses() {
    unsafe {
        let a = dist(&[1.0, 0.0, 0.0], 1, 3);
        let b = dist(&[0.0, 1.0, 0.0], 1, 3);
        let mut w = 0.0;
        assert_eq!(sd_wasserstein(a, b, 1.0, 1.0, &mut w), SdStatus::Ok);
        assert!((w - 2.0).abs() < 1e-12);
        assert!(sd_last_error_message().is_null());
        assert_eq!(sd_wasserstein(a, b, 1.0, f64::INFINITY, &mut w), SdStatus::Ok);
        assert!((w - 1.0).abs() < 1e-12);
        sd_distribution_free(a);
        sd_distribution_free(b);
    }
}

#[test]
fn stats_of_toy_rows() {
    unsafe {
        let d = dist(&[1.0, 0.0, 2.0, 0.0, 0.0, 5.0], 2, 3);
        let mut s = SdStats::default();
        assert_eq!(sd_distribution_stats(d, &mut s), SdStatus::Ok);
        assert_eq!((s.atom_count, s.ambient_dim), (2, 3));
        assert!((s.mean_l0 - 1.5).abs() < 1e-15);
        sd_distribution_free(d);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut out = ptr::null_mut();
        let zero = [0.0, 0.0];
        assert_eq!(sd_distribution_from_dense(zero.as_ptr(), 1, 2, ptr::null(), &mut out), SdStatus::InvalidArgument);
        assert!(out.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(sd_distribution_from_dense(ptr::null(), 1, 2, ptr::null(), &mut out), SdStatus::NullPointer);
        assert!(last_error().contains("values"));

        let a = dist(&[1.0, 0.0], 1, 2);
        let b = dist(&[1.0, 0.0, 0.0], 1, 3);
        let mut w = 0.0;
        assert_eq!(sd_wasserstein(a, b, 1.0, 1.0, &mut w), SdStatus::DimensionMismatch);
        assert_eq!(sd_wasserstein(a, a, 1.0, 1.0, ptr::null_mut()), SdStatus::NullPointer);
        sd_distribution_free(a);
        sd_distribution_free(b);
        sd_distribution_free(ptr::null_mut());
        sd_population_free(ptr::null_mut());
    }
}

#[test]
fn allocation_example() {
    unsafe {
        let mut params = std::mem::zeroed::<SdAllocationParams>();
        assert_eq!(sd_allocation_params_default(&mut params), SdStatus::Ok);
        params.mean_l0 = 175.0;
        params.k = 83.0;
        params.c_alloc = 0.5;
        let mut n = 0.0;
        assert_eq!(sd_optimal_cells(3.5e6, &params, &mut n), SdStatus::Ok);
        assert!((n - 8051.603).abs() < 1e-3);
        let mut a = SdAllocation::default();
        assert_eq!(sd_allocate(3.5e6, &params, &mut a), SdStatus::Ok);
        assert_eq!(a.n_cells, 8052);
        assert_eq!(a.below_m0, 0);

        params.alpha = 1.5;
        assert_eq!(sd_optimal_cells(3.5e6, &params, &mut n), SdStatus::InvalidArgument);
        assert!(last_error().contains("alpha"));
    }
}

#[test]
fn simulate_is_seeded_and_convex() {
    unsafe {
        let rows: Vec<f64> = (0..40).map(|i| ((i * 7) % 5) as f64 + 0.5).collect();
        let d = dist(&rows, 8, 5);
        let mut pop = ptr::null_mut();
        assert_eq!(sd_population_from_distribution(d, &mut pop), SdStatus::Ok);
        let mut s = SdStats::default();
        assert_eq!(sd_population_stats(pop, &mut s), SdStatus::Ok);
        assert_eq!(s.atom_count, 8);

        let run = |seed| {
            let mut t = SdTrial::default();
            let st = sd_simulate(pop, 6, 300, SdScenario::Uniform, SdUnseen::Uniform, 1.0, 1.0, seed, &mut t);
            assert_eq!(st, SdStatus::Ok);
            t
        };
        let (a, b) = (run(11), run(11));
        assert_eq!(a.w_noisy_vs_mu.to_bits(), b.w_noisy_vs_mu.to_bits());
        assert_eq!(a.w_noisy_vs_mun.to_bits(), b.w_noisy_vs_mun.to_bits());
        assert!(a.w_noisy_vs_mun > 0.0 && a.w_mun_vs_mu >= 0.0);

        let mut t = SdTrial::default();
        assert_eq!(
            sd_simulate(pop, 0, 300, SdScenario::Uniform, SdUnseen::Uniform, 1.0, 1.0, 1, &mut t),
            SdStatus::InvalidArgument
        );
        sd_population_free(pop);
        sd_distribution_free(d);
    }
}

#[test]
fn pca_dimension_of_a_segment() {
    unsafe {
        let rows: Vec<f64> = (0..10)
            .flat_map(|i| {
                let t = i as f64 / 9.0;
                [0.2 + 0.3 * t, 0.5 - 0.3 * t, 0.3, 0.0]
            })
            .collect();
        let d = dist(&rows, 10, 4);
        let mut k = 99;
        assert_eq!(sd_pca_dim(d, 0.95, &mut k), SdStatus::Ok);
        assert_eq!(k, 1);
        sd_distribution_free(d);
    }
}

#[test]
fn population_load_reads_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.csv");
    std::fs::write(&path, "cell,g1,g2,g3\nc1,1,0,2\nc2,0,0,5\n").unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut pop = ptr::null_mut();
        assert_eq!(sd_population_load(c.as_ptr(), &mut pop), SdStatus::Ok);
        let mut s = SdStats::default();
        assert_eq!(sd_population_stats(pop, &mut s), SdStatus::Ok);
        assert!((s.mean_l0 - 1.5).abs() < 1e-15);
        sd_population_free(pop);

        let missing = CString::new(dir.path().join("none.csv").to_str().unwrap()).unwrap();
        assert_ne!(sd_population_load(missing.as_ptr(), &mut pop), SdStatus::Ok);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(sd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
