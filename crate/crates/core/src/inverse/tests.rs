use super::*;
use crate::transport::TransportParams;

fn henry_sim() -> TransportParams {
    TransportParams { t_end: 20.0, dt: 0.2, ..TransportParams::henry_reference() }
}

fn henry_problem(truth: [f64; 2]) -> IdentificationProblem {
    let sim = henry_sim();
    let truth_params = TransportParams { da_a: truth[0], da_d: truth[1], ..sim.clone() };
    IdentificationProblem {
        reference: ReferenceCurve::synthetic(&truth_params, 0.0, 0).unwrap(),
        isotherm: Isotherm::Henry,
        bounds: SearchDomain::new(vec![0.0, 0.0], vec![0.01, 0.1]).unwrap(),
        fixed_pe: 10.0,
        sim,
        mbc: MbcConfig {
            n_best: 1,
            m_persp: 1,
            half_widths: vec![0.0005, 0.005],
            delta: 0.002,
            sb: 8,
            abb: 4,
            abp: 3,
            stop_fail: 2,
            epsilon: 1e-8,
            max_iter: 6,
            seed: 3,
        },
    }
}

fn flat_curve(n: usize, value: f64) -> BreakthroughCurve {
    BreakthroughCurve { times: (1..=n).map(|k| k as f64).collect(), values: vec![value; n] }
}

#[test]
fn residual_vanishes_at_truth() {
    let problem = henry_problem([0.005, 0.05]);
    problem.validate().unwrap();
    assert!(residual_j(&[0.005, 0.05], &problem).unwrap() <= 1e-12);
}

#[test]
fn residual_grows_away_from_truth() {
    let problem = henry_problem([0.005, 0.05]);
    let near = residual_j(&[0.0050001, 0.049995], &problem).unwrap();
    let far = residual_j(&[0.0095, 0.05], &problem).unwrap();
    assert!(far > 0.0);
    assert!(near >= 0.0 && near < 1e-3 * far, "near {near}, far {far}");
}

#[test]
fn residual_is_left_rectangle_sum() {
    let a = flat_curve(4, 0.5);
    let b = flat_curve(4, 0.25);
    assert!((curve_residual(&a, &b, 0.5).unwrap() - 4.0 * 0.0625 * 0.5).abs() < 1e-15);
    assert!(matches!(curve_residual(&a, &flat_curve(3, 0.0), 1.0), Err(InverseError::Length(4, 3))));
}

#[test]
fn residual_rejects_points_outside_bounds() {
    let problem = henry_problem([0.005, 0.05]);
    assert!(matches!(residual_j(&[0.02, 0.05], &problem), Err(InverseError::OutOfBounds { .. })));
    assert!(matches!(residual_j(&[0.005], &problem), Err(InverseError::OutOfBounds { .. })));
}

#[test]
fn relative_error_identities() {
    let reference = BreakthroughCurve { times: vec![1.0, 2.0, 3.0], values: vec![0.1, 0.5, 0.9] };
    assert_eq!(relative_error(&reference, &reference).unwrap(), 0.0);
    let scaled = BreakthroughCurve {
        times: reference.times.clone(),
        values: reference.values.iter().map(|v| 1.01 * v).collect(),
    };
    assert!((relative_error(&scaled, &reference).unwrap() - 0.01).abs() < 1e-12);
    assert!((relative_error(&flat_curve(3, 0.0), &reference).unwrap() - 1.0).abs() < 1e-15);
    assert!(matches!(relative_error(&flat_curve(3, 1.0), &flat_curve(3, 0.0)), Err(InverseError::ZeroReference)));
    assert!(relative_error(&reference, &flat_curve(2, 1.0)).is_err());
}

#[test]
fn noise_free_is_identity() {
    let c = flat_curve(10, 0.3);
    assert_eq!(add_noise(&c, 0.0, 9).unwrap(), c);
    assert!(add_noise(&c, -0.1, 9).is_err());
    assert!(add_noise(&c, f64::NAN, 9).is_err());
}

#[test]
fn noise_statistics() {
    let clean = flat_curve(4000, 0.5);
    let noisy = add_noise(&clean, 0.01, 11).unwrap();
    let diffs: Vec<f64> = noisy.values.iter().map(|v| v - 0.5).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (diffs.len() - 1) as f64;
    assert!((var.sqrt() - 0.01).abs() < 0.001, "sample sigma {}", var.sqrt());
    assert!(mean.abs() < 0.001);
    assert_eq!(noisy, add_noise(&clean, 0.01, 11).unwrap());
    assert_ne!(noisy, add_noise(&clean, 0.01, 12).unwrap());
    assert_eq!(noisy.times, clean.times);
}

#[test]
fn noise_is_clamped_at_zero() {
    let noisy = add_noise(&flat_curve(1000, 0.0), 0.1, 5).unwrap();
    assert!(noisy.values.iter().all(|&v| v >= 0.0));
    assert!(noisy.values.iter().any(|&v| v > 0.0));
}

#[test]
fn cadence_must_match() {
    let mut problem = henry_problem([0.005, 0.05]);
    problem.sim.dt = 0.1;
    assert!(matches!(problem.validate(), Err(InverseError::Cadence(_))));

    let mut problem = henry_problem([0.005, 0.05]);
    problem.reference.curve.times[3] += 0.01;
    assert!(matches!(problem.validate(), Err(InverseError::Cadence(_))));

    let mut problem = henry_problem([0.005, 0.05]);
    problem.reference.curve.times.pop();
    problem.reference.curve.values.pop();
    assert!(matches!(problem.validate(), Err(InverseError::Cadence(_))));
}

#[test]
fn problem_validation() {
    let mut problem = henry_problem([0.005, 0.05]);
    problem.isotherm = Isotherm::Langmuir;
    assert!(matches!(problem.validate(), Err(InverseError::Invalid(_))));

    let mut problem = henry_problem([0.005, 0.05]);
    problem.fixed_pe = 0.0;
    assert!(problem.validate().is_err());

    let mut problem = henry_problem([0.005, 0.05]);
    problem.mbc.half_widths = vec![0.1];
    assert!(matches!(problem.validate(), Err(InverseError::Mbc(_))));
}

#[test]
fn params_at_overrides_template() {
    let mut problem = henry_problem([0.005, 0.05]);
    problem.sim.pe = 1.0;
    let p = problem.params_at(&[0.002, 0.03]);
    assert_eq!((p.pe, p.da_a, p.da_d, p.isotherm), (10.0, 0.002, 0.03, Isotherm::Henry));
    assert_eq!(p.dt, problem.sim.dt);
}

#[test]
fn smallest_scan() {
    let problem = henry_problem([0.005, 0.05]);
    let scan = grid_scan(&problem, None, (2, 2), &Evaluator::sequential()).unwrap();
    assert_eq!(scan.evaluations, 4);
    assert_eq!(scan.shape(), (2, 2));
    assert_eq!(scan.axis1, vec![0.0, 0.01]);
    assert_eq!(scan.axis2, vec![0.0, 0.1]);
    assert!(scan.failures.is_empty());
    let best = scan.argmin.clone().unwrap();
    let min = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| scan.get(i, j).unwrap()).fold(f64::INFINITY, f64::min);
    assert!(min >= 0.0);
    assert_eq!(best.value, min);
    assert_eq!(residual_j(&best.point, &problem).unwrap(), best.value);
    let csv = scan.to_csv();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("p1,p2,J\n"));
}

#[test]
fn scan_locates_truth_cell() {
    let problem = henry_problem([0.005, 0.05]);
    // truth sits exactly on the 5 x 5 grid
    let scan = grid_scan(&problem, None, (5, 5), &Evaluator::sequential()).unwrap();
    let best = scan.argmin.unwrap();
    assert_eq!((best.i, best.j), (2, 2));
    assert!(best.value <= 1e-12);
}

#[test]
fn scan_records_failures_as_gaps() {
    let names = ParamName::for_isotherm(Isotherm::Henry);
    let bounds = SearchDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let objective = |p: &[f64]| {
        if p[0] > 0.6 && p[1] > 0.6 {
            Err(InverseError::Invalid("injected".into()))
        } else {
            Ok(p[0] + p[1])
        }
    };
    let scan = scan_with(names, &bounds, None, (3, 3), &Evaluator::sequential(), &objective).unwrap();
    assert_eq!(scan.failures.len(), 1);
    assert_eq!((scan.failures[0].i, scan.failures[0].j), (2, 2));
    assert_eq!(scan.get(2, 2), None);
    assert_eq!(scan.get(0, 0), Some(0.0));
    assert!(scan.to_csv().trim_end().ends_with(",NaN"));
    assert_eq!(scan.argmin.unwrap().point, vec![0.0, 0.0]);
}

#[test]
fn scan_fixing_rules() {
    let henry = ParamName::for_isotherm(Isotherm::Henry);
    let langmuir = ParamName::for_isotherm(Isotherm::Langmuir);
    let b2 = SearchDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let b3 = SearchDomain::new(vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 2.0]).unwrap();
    let f = |p: &[f64]| Ok(p.iter().sum());
    let ev = Evaluator::sequential();
    let fix_m = Some(FixedParam { name: ParamName::MCap, value: 1.5 });
    assert!(scan_with(henry, &b2, fix_m, (2, 2), &ev, &f).is_err());
    assert!(scan_with(langmuir, &b3, None, (2, 2), &ev, &f).is_err());
    assert!(scan_with(henry, &b2, None, (1, 2), &ev, &f).is_err());
    let outside = Some(FixedParam { name: ParamName::MCap, value: 2.5 });
    assert!(scan_with(langmuir, &b3, outside, (2, 2), &ev, &f).is_err());
    let scan = scan_with(langmuir, &b3, fix_m, (2, 3), &ev, &f).unwrap();
    assert_eq!(scan.free, [ParamName::DaA, ParamName::DaD]);
    assert_eq!(scan.argmin.unwrap().point, vec![0.0, 0.0, 1.5]);
    let fix_a = Some(FixedParam { name: ParamName::DaA, value: 0.25 });
    let scan = scan_with(langmuir, &b3, fix_a, (2, 2), &ev, &f).unwrap();
    assert_eq!(scan.free, [ParamName::DaD, ParamName::MCap]);
    assert_eq!(scan.axis2, vec![1.0, 2.0]);
}

#[test]
fn parallel_scan_matches_sequential() {
    let problem = henry_problem([0.004, 0.06]);
    let a = grid_scan(&problem, None, (3, 2), &Evaluator::sequential()).unwrap();
    let b = grid_scan(&problem, None, (3, 2), &Evaluator::with_workers(3).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn identify_counts_simulations() {
    let problem = henry_problem([0.005, 0.05]);
    let counter = ResidualObjective::new(&problem);
    let direct = mbc::run(&counter, &problem.bounds, &problem.mbc).unwrap();
    let found = identify(&problem, RunOptions::default()).unwrap();
    assert_eq!(counter.simulations(), direct.nfe);
    assert_eq!(found.nfe, direct.nfe);
    assert_eq!(found.result, direct);
    assert_eq!(found.extrema.len(), direct.extrema.len());
    for e in &found.extrema {
        assert!(e.relative_error >= 0.0);
    }
    // extrema are sorted, so the first carries the smallest J
    assert!(found.extrema.windows(2).all(|w| w[0].extremum.value <= w[1].extremum.value));
}

#[test]
fn identify_stays_inside_bounds_at_a_corner() {
    let problem = henry_problem([0.01, 0.1]);
    let found = identify(&problem, RunOptions::default()).unwrap();
    for e in &found.extrema {
        assert!(problem.bounds.contains(&e.extremum.point), "{:?}", e.extremum.point);
    }
}

#[test]
fn identify_surfaces_simulation_failures() {
    let mut problem = henry_problem([0.005, 0.05]);
    // negative rates are rejected by the direct solver
    problem.bounds = SearchDomain::new(vec![-0.01, -0.1], vec![-0.005, -0.05]).unwrap();
    let err = identify(&problem, RunOptions::default()).unwrap_err();
    assert!(matches!(err, InverseError::Mbc(MbcError::Objective { .. })), "{err}");
}

#[test]
fn external_reference_round_trip() {
    let problem = henry_problem([0.005, 0.05]);
    let dir = std::env::temp_dir().join(format!("bee-ident-ref-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ref.csv");
    std::fs::write(&path, problem.reference.curve.to_csv()).unwrap();
    let loaded = ReferenceCurve::from_file(&path).unwrap();
    assert_eq!(loaded.curve, problem.reference.curve);
    assert!(matches!(loaded.provenance, Provenance::External { .. }));
    assert!(ReferenceCurve::from_file(&dir.join("missing.csv")).is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}
