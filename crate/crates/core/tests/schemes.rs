use leo_apass::harness::{ExperimentConfig, Profile, Scenario};
use leo_apass::linkmodel::PowerMatrix;
use leo_apass::rng::SeedTree;
use leo_apass::schemes::{
    apass_step, predict_gains, run_apass, run_equal_power, run_sts, run_water_filling, ApassState, PredictionModel,
    SchemeConfig,
};

fn small(k: usize, n: usize, seed: u64) -> Scenario {
    let mut cfg = ExperimentConfig::profile(Profile::Desk);
    cfg.system.n_users = k;
    cfg.system.n_slots = n;
    cfg.campaign.master_seed = seed;
    cfg.campaign.workers = 1;
    Scenario::new(&cfg).unwrap()
}

#[test]
fn apass_not_worse_than_sts_with_perfect_prediction() {
    let sc = small(3, 5, 41);
    let cfg = sc.cfg.scheme_config();
    for trial in 0..4 {
        let r = sc.realization(trial).unwrap();
        let seeds = sc.trial_seeds(trial);
        let a = run_apass(&r, &PredictionModel::perfect(), sc.p_total, sc.sigma2, &cfg, &seeds).unwrap();
        let s = run_sts(&r, &PredictionModel::perfect(), sc.p_total, sc.sigma2, &cfg, &seeds).unwrap();
        assert!(a.report.min_rate >= s.report.min_rate - 1e-3, "trial {trial}: {} < {}", a.report.min_rate, s.report.min_rate);
    }
}

#[test]
fn every_scheme_respects_the_budget() {
    let sc = small(4, 6, 5);
    let cfg = sc.cfg.scheme_config();
    let r = sc.realization(0).unwrap();
    let seeds = sc.trial_seeds(0);
    let model = PredictionModel { error_variance_normalized: 0.25 };
    let results = [
        run_apass(&r, &model, sc.p_total, sc.sigma2, &cfg, &seeds).unwrap(),
        run_sts(&r, &model, sc.p_total, sc.sigma2, &cfg, &seeds).unwrap(),
        run_equal_power(&r, sc.p_total, sc.sigma2).unwrap(),
        run_water_filling(&r, sc.p_total, sc.sigma2).unwrap(),
    ];
    for res in &results {
        for n in 0..6 {
            assert!(res.power.slot_sum(n) <= sc.p_total * (1.0 + 1e-9), "{}", res.scheme_name);
        }
        assert!(res.power.p.iter().flatten().all(|v| *v >= 0.0));
    }
}

#[test]
fn large_prediction_error_stays_feasible() {
    let sc = small(3, 6, 9);
    let r = sc.realization(2).unwrap();
    let model = PredictionModel { error_variance_normalized: 4.0 };
    let out = run_apass(&r, &model, sc.p_total, sc.sigma2, &sc.cfg.scheme_config(), &sc.trial_seeds(2)).unwrap();
    assert!(out.report.min_rate.is_finite());
    assert!((0..6).all(|n| out.power.slot_sum(n) <= sc.p_total * (1.0 + 1e-9)));
}

#[test]
fn committed_slots_never_change() {
    let sc = small(3, 5, 77);
    let r = sc.realization(0).unwrap();
    let cfg = SchemeConfig::default();
    let seeds = SeedTree::new(3);
    let model = PredictionModel { error_variance_normalized: 0.1 };
    let mut state = ApassState::new(3, 5, sc.p_total);
    let mut snapshots: Vec<Vec<Vec<f64>>> = Vec::new();
    for slot in 0..5 {
        let current: Vec<f64> = r.g.iter().map(|row| row[slot]).collect();
        assert!(state.commit(vec![0.0; 3]).is_err());
        state.observe(&current).unwrap();
        assert!(state.observe(&current).is_err());
        let preds = predict_gains(&r.h, slot, &model, &seeds);
        assert!(preds.iter().all(|row| row.len() == 4 - slot));
        let step = apass_step(&state, &preds, sc.sigma2, &cfg, None).unwrap();
        assert_eq!(step.plan.n_slots(), 5 - slot);
        assert!(state.commit(vec![sc.p_total; 3]).is_err());
        state.commit(step.slot_power).unwrap();
        for old in &snapshots {
            assert_eq!(old[..], state.committed()[..old.len()]);
        }
        snapshots.push(state.committed().to_vec());
    }
    assert_eq!(state.committed().len(), 5);
}

#[test]
fn decisions_ignore_future_actual_gains() {
    let sc = small(3, 6, 13);
    let r = sc.realization(1).unwrap();
    let seeds = sc.trial_seeds(1);
    let model = PredictionModel { error_variance_normalized: 0.1 };
    let cfg = sc.cfg.scheme_config();
    let base = run_apass(&r, &model, sc.p_total, sc.sigma2, &cfg, &seeds).unwrap();
    // perturb the realised gains of the last slot only
    let mut altered = r.clone();
    for k in 0..3 {
        altered.g[k][5] *= 3.0;
    }
    let out = run_apass(&altered, &model, sc.p_total, sc.sigma2, &cfg, &seeds).unwrap();
    for n in 0..5 {
        assert_eq!(base.power.slot(n), out.power.slot(n), "slot {n}");
    }
}

#[test]
fn perfect_prediction_step_objectives_do_not_drop() {
    let sc = small(3, 5, 19);
    let mut cfg = sc.cfg.scheme_config();
    cfg.uniform_horizon_weights = true;
    for trial in 0..3 {
        let r = sc.realization(trial).unwrap();
        let out = run_apass(&r, &PredictionModel::perfect(), sc.p_total, sc.sigma2, &cfg, &sc.trial_seeds(trial)).unwrap();
        for w in out.step_objectives.windows(2) {
            assert!(w[1] >= w[0] * (1.0 - 1e-4), "{:?}", out.step_objectives);
        }
    }
}

#[test]
fn equal_power_splits_evenly() {
    let sc = small(4, 3, 1);
    let r = sc.realization(0).unwrap();
    let out = run_equal_power(&r, sc.p_total, sc.sigma2).unwrap();
    assert_eq!(out.power, PowerMatrix::equal(4, 3, sc.p_total));
}
