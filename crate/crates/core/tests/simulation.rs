mod common;

use growthmix::simulation::{run_rep, summarize, FiveNumber};
use growthmix::{ols_fit, preset_config, run_study, simulate, FitConfig, KRange, Preset, SearchKind, SelectionConfig, TimepointSet};

/// OLS slope with its standard error.
fn slope_and_se(y: &[f64], x: &[f64]) -> (f64, f64) {
    let fit = ols_fit(y, &[x]).unwrap();
    let n = y.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let s2 = fit.rss / (n - 2.0);
    (fit.coefficients[1], (s2 / sxx).sqrt())
}

#[test]
fn presets_match_the_reference_designs() {
    let t1 = preset_config(Preset::T1);
    assert_eq!(t1.slopes, vec![vec![1.0, 3.0, -2.0], vec![1.0, 2.5, -0.5]]);
    assert_eq!(t1.clustering_timepoints.one_based(), vec![5, 15]);
    let t3 = preset_config(Preset::T3);
    assert_eq!(t3.slopes[0], t3.slopes[1]);
    assert_eq!(t3.slopes[0], vec![1.0, 3.0, -2.0]);
    let t4 = preset_config(Preset::T4);
    assert_eq!(t4.weights, vec![0.7, 0.15, 0.15]);
    for p in [Preset::T1, Preset::T2, Preset::T3, Preset::T4] {
        let c = preset_config(p);
        assert_eq!((c.n_subjects, c.n_timepoints, c.noise_sd), (400, 20, 0.5));
        c.validate().unwrap();
    }
}

#[test]
fn group_frequencies_stay_within_the_multinomial_bound() {
    for seed in 0..10 {
        let mut cfg = preset_config(Preset::T4);
        cfg.seed = seed;
        let sim = simulate(&cfg).unwrap();
        let s = cfg.n_subjects as f64;
        for (g, &w) in cfg.weights.iter().enumerate() {
            let freq = sim.true_labels.iter().filter(|&&l| l == g).count() as f64 / s;
            assert!((freq - w).abs() <= 3.0 * (w * (1.0 - w) / s).sqrt(), "seed {seed} group {g}: {freq}");
        }
    }
}

#[test]
fn group_slopes_at_a_clustering_point_match_the_design() {
    let mut cfg = preset_config(Preset::T1);
    cfg.n_subjects = 3000;
    cfg.seed = 4;
    let sim = simulate(&cfg).unwrap();
    let n = 4;
    for (g, &truth) in cfg.slopes[0].iter().enumerate() {
        let members: Vec<usize> = (0..cfg.n_subjects).filter(|&s| sim.true_labels[s] == g).collect();
        let y: Vec<f64> = members.iter().map(|&s| sim.dataset.outcome(s, n)).collect();
        let x: Vec<f64> = members.iter().map(|&s| sim.dataset.covariates(s, n)[0]).collect();
        let (b, se) = slope_and_se(&y, &x);
        assert!((b - truth).abs() <= 3.0 * se, "group {g}: {b} vs {truth} (se {se})");
    }
}

#[test]
fn noise_points_have_unit_slope_and_zero_intercept() {
    let mut cfg = preset_config(Preset::T2);
    cfg.seed = 12;
    let sim = simulate(&cfg).unwrap();
    let y = sim.dataset.outcome_column(0);
    let x = sim.dataset.covariate_column(0, 0);
    let (b, se) = slope_and_se(&y, &x);
    assert!((b - 1.0).abs() <= 3.0 * se);
    let fit = ols_fit(&y, &[&x]).unwrap();
    let a_se = (fit.rss / (y.len() as f64 - 2.0) / y.len() as f64).sqrt();
    assert!(fit.coefficients[0].abs() <= 3.5 * a_se);
}

#[test]
fn zero_noise_reproduces_the_means_and_degenerate_weights() {
    let mut cfg = preset_config(Preset::T1);
    cfg.noise_sd = 0.0;
    cfg.weights = vec![1.0, 0.0, 0.0];
    cfg.n_subjects = 50;
    let sim = simulate(&cfg).unwrap();
    assert!(sim.true_labels.iter().all(|&l| l == 0));
    for s in 0..50 {
        for n in 0..20 {
            assert_eq!(sim.dataset.outcome(s, n), sim.true_means.get(s, n));
        }
    }
}

#[test]
fn same_seed_same_dataset_and_different_seed_differs() {
    let cfg = preset_config(Preset::T2);
    assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
    let other = growthmix::SimulationConfig { seed: 1, ..cfg.clone() };
    assert_ne!(simulate(&cfg).unwrap().dataset, simulate(&other).unwrap().dataset);
}

fn small_design() -> (growthmix::SimulationConfig, SelectionConfig) {
    let mut cfg = preset_config(Preset::T3);
    cfg.n_subjects = 150;
    cfg.n_timepoints = 5;
    cfg.clustering_timepoints = TimepointSet::new(vec![1, 3]).unwrap();
    let sel = SelectionConfig {
        k_range: KRange::new(1, 3).unwrap(),
        fit: FitConfig {
            n_restarts: 5,
            use_covariates: true,
            ..FitConfig::default()
        },
        ..SelectionConfig::default()
    };
    (cfg, sel)
}

#[test]
fn study_aggregates_match_its_rows() {
    let (cfg, sel) = small_design();
    let report = run_study(&cfg, 3, SearchKind::Backward, &sel, 99).unwrap();
    assert_eq!(report.rows.len() + report.failures.len(), 3);
    assert_eq!(report.summary.n_completed, report.rows.len());
    assert_eq!(report.rows_csv().lines().count(), 1 + report.rows.len());
    let again = summarize(&cfg, &report.rows, 3);
    assert_eq!(again, report.summary);
    // A rep run on its own is identical to the same rep inside the study.
    let solo = run_rep(&cfg, SearchKind::Backward, &sel, 99, 1).unwrap();
    assert_eq!(report.rows.iter().find(|r| r.rep == 1), Some(&solo));
}

#[test]
fn study_is_reproducible() {
    let (cfg, sel) = small_design();
    let a = run_study(&cfg, 2, SearchKind::Monotone, &sel, 5).unwrap();
    let b = run_study(&cfg, 2, SearchKind::Monotone, &sel, 5).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn zero_reps_is_rejected() {
    let (cfg, sel) = small_design();
    assert!(run_study(&cfg, 0, SearchKind::Backward, &sel, 0).is_err());
}

#[test]
fn five_number_summary() {
    let f = FiveNumber::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
    assert_eq!((f.min, f.max, f.mean), (1.0, 4.0, 2.5));
    assert_eq!((f.q1, f.median, f.q3), (1.75, 2.5, 3.25));
    assert!(FiveNumber::of(&[]).is_none());
}
