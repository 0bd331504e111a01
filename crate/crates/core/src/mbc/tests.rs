use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::benchmarks::{himmelblau, rastrigin2, shekel2};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cfg(dims: usize) -> MbcConfig {
    MbcConfig {
        n_best: 1,
        m_persp: 2,
        half_widths: vec![1.0; dims],
        delta: 1.0,
        sb: 50,
        abb: 10,
        abp: 5,
        stop_fail: 3,
        epsilon: 1e-8,
        max_iter: 200,
        seed: 11,
    }
}

fn region_at(center: &[f64], value: f64, hw: &[f64]) -> Region {
    form_regions(
        &[Sample { point: center.to_vec(), value }],
        1.0,
        1,
        0,
        hw,
    )
    .unwrap()
    .remove(0)
}

struct Counting<F> {
    f: F,
    calls: AtomicUsize,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for Counting<F> {
    fn evaluate(&self, p: &[f64]) -> Result<f64, ObjectiveError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok((self.f)(p))
    }
}

// Steepest descent on a fixed lattice: an independent way to tell which
// basin a point belongs to.
fn lattice_descent(f: fn(&[f64]) -> f64, start: &[f64], h: f64) -> Vec<f64> {
    let mut p = start.to_vec();
    loop {
        let mut best = (f(&p), p.clone());
        for dx in [-1.0, 0.0, 1.0] {
            for dy in [-1.0, 0.0, 1.0] {
                let q = vec![p[0] + dx * h, p[1] + dy * h];
                let v = f(&q);
                if v < best.0 {
                    best = (v, q);
                }
            }
        }
        if best.1 == p {
            return p;
        }
        p = best.1;
    }
}

#[test]
fn scouts_sorted_and_counted() {
    let domain = SearchDomain::cube(2, -5.0, 5.0).unwrap();
    let f = Counting { f: rastrigin2, calls: AtomicUsize::new(0) };
    let scouts = scout_phase(&f, &domain, 20, &mut rng(3), &Evaluator::sequential()).unwrap();
    assert_eq!(scouts.len(), 20);
    assert!(scouts.windows(2).all(|w| w[0].value <= w[1].value));
    assert!(scouts[0].value <= scouts[19].value);
    assert_eq!(f.calls.load(Ordering::SeqCst), 20);
    assert!(scouts.iter().all(|s| domain.contains(&s.point)));

    let single = scout_phase(&f, &domain, 1, &mut rng(3), &Evaluator::sequential()).unwrap();
    assert_eq!(single.len(), 1);
}

#[test]
fn shekel_scouts_reach_a_basin() {
    let domain = SearchDomain::cube(2, 0.0, 20.0).unwrap();

    // Monte-Carlo oracle: area fraction where shekel <= -0.3
    let mut r = rng(999);
    let n = 1_000_000;
    let hits = (0..n)
        .filter(|_| {
            let p = [20.0 * r.gen::<f64>(), 20.0 * r.gen::<f64>()];
            shekel2(&p) <= -0.3
        })
        .count();
    let frac = hits as f64 / n as f64;
    let miss_prob = (1.0 - frac).powi(200);
    assert!(miss_prob < 1e-3, "fraction {frac}, miss probability {miss_prob}");

    let scouts = scout_phase(&shekel2, &domain, 200, &mut rng(7), &Evaluator::sequential()).unwrap();
    assert!(scouts[0].value <= -0.3, "{}", scouts[0].value);
}

#[test]
fn scout_phase_reports_non_finite_point() {
    let domain = SearchDomain::cube(1, 0.0, 1.0).unwrap();
    let f = |_: &[f64]| f64::INFINITY;
    let err = scout_phase(&f, &domain, 3, &mut rng(1), &Evaluator::sequential()).unwrap_err();
    assert!(matches!(err, MbcError::NonFinite { .. }));
}

#[test]
fn close_scout_is_absorbed() {
    let scouts = vec![
        Sample { point: vec![0.0, 0.0], value: 1.0 },
        Sample { point: vec![0.1, 0.0], value: 2.0 },
    ];
    let regions = form_regions(&scouts, 1.0, 1, 2, &[1.0, 1.0]).unwrap();
    assert_eq!(regions.len(), 1);
    assert_eq!(regions[0].center, vec![0.0, 0.0]);
}

#[test]
fn founding_order_assigns_kinds() {
    let scouts = vec![
        Sample { point: vec![0.0, 0.0], value: 1.0 },
        Sample { point: vec![5.0, 5.0], value: 2.0 },
        Sample { point: vec![-5.0, 5.0], value: 3.0 },
    ];
    let regions = form_regions(&scouts, 1.0, 1, 1, &[1.0, 1.0]).unwrap();
    assert_eq!(regions.len(), 2);
    assert_eq!(regions[0].kind, RegionKind::Best);
    assert_eq!(regions[1].kind, RegionKind::Perspective);
    assert_eq!(regions[1].value, 2.0);
}

#[test]
fn empty_scouts_rejected() {
    assert!(matches!(form_regions(&[], 1.0, 1, 1, &[1.0]), Err(MbcError::NoRegions)));
}

fn basin_of(center: &[f64]) -> usize {
    let minima = [[2.0, 10.0], [10.0, 15.0], [18.0, 4.0]];
    let bottom = lattice_descent(shekel2, center, 0.01);
    let k = minima
        .iter()
        .position(|m| euclidean(m, &bottom) < 0.1)
        .unwrap_or_else(|| panic!("descent from {center:?} ended at {bottom:?}"));
    assert!(euclidean(&minima[k], center) < 2.0, "{center:?}");
    k
}

#[test]
fn shekel_regions_sit_in_basins() {
    let domain = SearchDomain::cube(2, 0.0, 20.0).unwrap();
    let scouts = scout_phase(&shekel2, &domain, 200, &mut rng(7), &Evaluator::sequential()).unwrap();

    let regions = form_regions(&scouts, 1.0, 1, 2, &[1.0, 1.0]).unwrap();
    assert_eq!(regions.len(), 3);
    for r in &regions {
        basin_of(&r.center);
    }

    // a radius wider than the basins separates all three
    let regions = form_regions(&scouts, 3.0, 1, 2, &[1.0, 1.0]).unwrap();
    let mut basins: Vec<usize> = regions.iter().map(|r| basin_of(&r.center)).collect();
    basins.sort();
    assert_eq!(basins, vec![0, 1, 2]);
}

#[test]
fn himmelblau_region_refines_to_root() {
    let domain = SearchDomain::cube(2, -10.0, 10.0).unwrap();
    let config = MbcConfig {
        n_best: 1,
        m_persp: 0,
        half_widths: vec![0.5, 0.5],
        abb: 20,
        abp: 0,
        stop_fail: 3,
        epsilon: 1e-8,
        max_iter: 500,
        ..cfg(2)
    };
    let start = [3.2, 1.8];
    let region = region_at(&start, himmelblau(&start), &config.half_widths);
    let mut progress = Progress::new(config.max_iter);
    let out = refine_region(
        region,
        &himmelblau,
        &domain,
        &config,
        &mut rng(5),
        &mut progress,
        &Evaluator::sequential(),
        None,
    )
    .unwrap();
    assert!(euclidean(&out.center, &[3.0, 2.0]) < 0.05, "{:?}", out.center);
    assert!(out.value <= 0.01);
    assert_eq!(out.value, himmelblau(&out.center));
}

#[test]
fn constant_objective_never_moves() {
    let domain = SearchDomain::cube(2, -1.0, 1.0).unwrap();
    let config = MbcConfig { stop_fail: 3, max_iter: 3, ..cfg(2) };
    let region = region_at(&[0.2, 0.3], 1.0, &[0.5, 0.5]);
    let f = |_: &[f64]| 1.0;
    let mut progress = Progress::new(config.max_iter);
    let out = refine_region(
        region,
        &f,
        &domain,
        &config,
        &mut rng(1),
        &mut progress,
        &Evaluator::sequential(),
        None,
    )
    .unwrap();
    assert_eq!(out.divider, 2);
    assert_eq!(out.cur_half_widths, vec![0.25, 0.25]);
    assert_eq!(out.center, vec![0.2, 0.3]);
    assert_eq!(out.shrink_history.len(), 1);
    assert!(!out.converged);

    // a second shrink with no movement converges
    let config = MbcConfig { max_iter: 100, ..config };
    let mut progress = Progress::new(config.max_iter);
    let region = region_at(&[0.2, 0.3], 1.0, &[0.5, 0.5]);
    let out = refine_region(
        region,
        &f,
        &domain,
        &config,
        &mut rng(1),
        &mut progress,
        &Evaluator::sequential(),
        None,
    )
    .unwrap();
    assert!(out.converged);
    assert_eq!(out.iterations, 6);
    assert_eq!(out.divider, 4);
}

#[test]
fn quadratic_bowl_converges_to_origin() {
    let bowl = |p: &[f64]| p[0] * p[0] + p[1] * p[1];
    let domain = SearchDomain::cube(2, -2.0, 2.0).unwrap();

    // dense-grid oracle for the minimizer location
    let n = 401;
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for i in 0..n {
        for j in 0..n {
            let p = [-2.0 + 4.0 * i as f64 / (n - 1) as f64, -2.0 + 4.0 * j as f64 / (n - 1) as f64];
            if bowl(&p) < best.0 {
                best = (bowl(&p), p);
            }
        }
    }
    assert_eq!(best.1, [0.0, 0.0]);

    let config = MbcConfig {
        m_persp: 0,
        half_widths: vec![0.5, 0.5],
        abb: 20,
        max_iter: 2000,
        ..cfg(2)
    };
    let region = region_at(&[1.0, 1.0], 2.0, &config.half_widths);
    let mut progress = Progress::new(config.max_iter);
    let out = refine_region(
        region,
        &bowl,
        &domain,
        &config,
        &mut rng(2),
        &mut progress,
        &Evaluator::sequential(),
        None,
    )
    .unwrap();
    assert!(out.converged);
    assert!(euclidean(&out.center, &best.1) < 1e-2, "{:?}", out.center);
}

#[test]
fn sample_box_clamps_at_corner() {
    let domain = SearchDomain::cube(2, 0.0, 1.0).unwrap();
    let mut r = rng(4);
    for _ in 0..1000 {
        let p = sample_box(&[0.0, 1.0], &[0.3, 0.3], &domain, &mut r);
        assert!(domain.contains(&p));
    }
}

#[test]
fn sample_box_degenerate_width() {
    let domain = SearchDomain::cube(2, 0.0, 1.0).unwrap();
    let p = sample_box(&[1.5, 0.25], &[1e-300, 1e-300], &domain, &mut rng(4));
    assert_eq!(p, vec![1.0, 0.25]);
}

#[test]
fn sample_box_mean_is_center() {
    let domain = SearchDomain::cube(2, -10.0, 10.0).unwrap();
    let mut r = rng(8);
    let n = 100_000;
    let center = [1.0, -2.0];
    let hw = [0.5, 0.25];
    let mut sum = [0.0; 2];
    for _ in 0..n {
        let p = sample_box(&center, &hw, &domain, &mut r);
        for k in 0..2 {
            assert!((p[k] - center[k]).abs() <= hw[k]);
            sum[k] += p[k];
        }
    }
    for k in 0..2 {
        let mean = sum[k] / n as f64;
        assert!((mean - center[k]).abs() <= 0.01 * center[k].abs(), "axis {k}: {mean}");
    }
}

#[test]
fn single_iteration_budget() {
    let domain = SearchDomain::cube(2, -5.0, 5.0).unwrap();
    let config = MbcConfig { max_iter: 1, ..cfg(2) };
    let f = Counting { f: rastrigin2, calls: AtomicUsize::new(0) };
    let res = run(&f, &domain, &config).unwrap();
    assert_eq!(res.iterations, 1);
    assert_eq!(res.nfe, config.sb + config.abb);
    assert_eq!(f.calls.load(Ordering::SeqCst), res.nfe);
    // unrefined regions are still reported
    assert_eq!(res.extrema.len(), 3);

    let zero = MbcConfig { max_iter: 0, ..cfg(2) };
    assert!(matches!(run(&rastrigin2, &domain, &zero), Err(MbcError::InvalidConfig(_))));
}

#[test]
fn shekel_run_finds_all_three() {
    let domain = SearchDomain::cube(2, 0.0, 20.0).unwrap();
    let config = MbcConfig {
        n_best: 1,
        m_persp: 2,
        half_widths: vec![0.5, 0.5],
        delta: 3.0,
        sb: 200,
        abb: 50,
        abp: 40,
        stop_fail: 5,
        epsilon: 1e-8,
        max_iter: 1000,
        seed: 7,
    };
    let res = run(&shekel2, &domain, &config).unwrap();
    assert_eq!(res.extrema.len(), 3);
    let expected = [-1.01439037, -0.5165, -0.5088];
    for (e, want) in res.extrema.iter().zip(expected) {
        assert!((e.value - want).abs() < 1e-3, "{} vs {want}", e.value);
    }
}

#[test]
fn rastrigin_run_finds_global() {
    let bench = crate::benchmarks::lookup("rastrigin").unwrap();
    let res = run(&rastrigin2, &bench.domain, &bench.default_config()).unwrap();
    let best = res.best();
    assert!(best.value <= 0.01, "{best:?}");
    assert!(euclidean(&best.point, &[0.0, 0.0]) < 0.05);
    // local minima are reported alongside
    assert!(res.extrema.len() > 1);
}

#[test]
fn objective_failure_aborts_run() {
    struct Failing;
    impl Objective for Failing {
        fn evaluate(&self, p: &[f64]) -> Result<f64, ObjectiveError> {
            if p[0] > 0.9 {
                Err("solver blew up".into())
            } else {
                Ok(p[0])
            }
        }
    }
    let domain = SearchDomain::cube(1, 0.0, 1.0).unwrap();
    let config = MbcConfig { sb: 100, ..cfg(1) };
    let err = run(&Failing, &domain, &config).unwrap_err();
    assert!(err.to_string().contains("solver blew up"));
}

#[test]
fn trace_csv_shape() {
    let domain = SearchDomain::cube(2, -5.0, 5.0).unwrap();
    let res = run(&rastrigin2, &domain, &MbcConfig { max_iter: 4, ..cfg(2) }).unwrap();
    let csv = res.trace_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("region_id,iteration,value,center0,center1"));
    assert_eq!(lines.count(), 4);
}

fn arb_config() -> impl Strategy<Value = (MbcConfig, u64)> {
    (
        1usize..3,
        0usize..3,
        0.05f64..2.0,
        0.1f64..3.0,
        1usize..30,
        1usize..8,
        1usize..6,
        1usize..4,
        1usize..60,
        any::<u64>(),
    )
        .prop_map(|(n, m, hw, delta, sb, abb, abp, stop_fail, max_iter, seed)| {
            (
                MbcConfig {
                    n_best: n,
                    m_persp: m,
                    half_widths: vec![hw, hw * 0.5],
                    delta,
                    sb,
                    abb,
                    abp,
                    stop_fail,
                    epsilon: 1e-8,
                    max_iter,
                    seed,
                },
                seed,
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn run_invariants((config, _seed) in arb_config()) {
        let domain = SearchDomain::new(vec![-5.0, -3.0], vec![5.0, 4.0]).unwrap();
        let outside = AtomicUsize::new(0);
        let calls = AtomicUsize::new(0);
        let f = |p: &[f64]| {
            calls.fetch_add(1, Ordering::SeqCst);
            if !domain.contains(p) {
                outside.fetch_add(1, Ordering::SeqCst);
            }
            himmelblau(p)
        };
        let res = run(&f, &domain, &config).unwrap();

        // determinism
        let again = run(&himmelblau, &domain, &config).unwrap();
        prop_assert_eq!(&res, &again);

        // accounting
        prop_assert_eq!(res.nfe, calls.load(Ordering::SeqCst));
        prop_assert!(res.iterations <= config.max_iter);
        prop_assert_eq!(outside.load(Ordering::SeqCst), 0);
        prop_assert!(res.extrema.windows(2).all(|w| w[0].value <= w[1].value));

        let mut dispatched = 0;
        for e in &res.extrema {
            let per_wave = match e.kind { RegionKind::Best => config.abb, RegionKind::Perspective => config.abp };
            dispatched += per_wave * e.iterations;
            prop_assert_eq!(e.divider % 2, 0);
            prop_assert_eq!(e.value, himmelblau(&e.point));
        }
        prop_assert_eq!(res.nfe, config.sb + dispatched);

        // monotone improvement per region
        for id in 0..res.extrema.len() {
            let vals: Vec<f64> = res.per_region_trace.iter().filter(|r| r.region == id).map(|r| r.value).collect();
            prop_assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn formed_regions_are_separated(seed in any::<u64>(), delta in 0.1f64..4.0, sb in 1usize..100) {
        let domain = SearchDomain::cube(2, -5.0, 5.0).unwrap();
        let scouts = scout_phase(&rastrigin2, &domain, sb, &mut rng(seed), &Evaluator::sequential()).unwrap();
        let regions = form_regions(&scouts, delta, 2, 3, &[1.0, 1.0]).unwrap();
        prop_assert!(regions.len() <= 5);
        for (i, a) in regions.iter().enumerate() {
            for b in &regions[i + 1..] {
                prop_assert!(euclidean(&a.center, &b.center) > delta);
            }
        }
    }

    #[test]
    fn shrink_widths_track_divider(stop_fail in 1usize..4, iters in 1usize..40) {
        let domain = SearchDomain::cube(2, -1.0, 1.0).unwrap();
        let config = MbcConfig { stop_fail, max_iter: iters, ..cfg(2) };
        let init = [0.8, 0.4];
        let region = region_at(&[0.0, 0.0], 0.0, &init);
        let f = |p: &[f64]| p[0].abs() + p[1].abs();
        let mut progress = Progress::new(config.max_iter);
        let out = refine_region(region, &f, &domain, &config, &mut rng(9), &mut progress, &Evaluator::sequential(), None).unwrap();
        prop_assert!(out.fail_count < stop_fail);
        if out.divider > 0 {
            for (w, w0) in out.cur_half_widths.iter().zip(&init) {
                prop_assert!((w * out.divider as f64 - w0).abs() < 1e-12);
            }
        } else {
            prop_assert_eq!(out.cur_half_widths.clone(), init.to_vec());
        }
    }
}

#[test]
fn worker_count_does_not_change_result() {
    let domain = SearchDomain::cube(2, 0.0, 20.0).unwrap();
    let config = MbcConfig { sb: 60, max_iter: 50, ..cfg(2) };
    let a = run_with(&shekel2, &domain, &config, RunOptions { workers: 1, on_iteration: None }).unwrap();
    let b = run_with(&shekel2, &domain, &config, RunOptions { workers: 3, on_iteration: None }).unwrap();
    assert_eq!(a, b);
}
