//! End-to-end acceptance checks. Prints one PASS/FAIL/INFO line per check
//! and exits non-zero if any gating check fails.
//!
//! Run a subset with `cargo test --test acceptance -- 1 4 9`.
//! `APASS_PAPER_TRIALS=<n>` enables the Table-I-scale ratio run (check 8).

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use leo_apass::channel::{channel_gain, sos_fading, sos_frequencies, FadingConfig, LinkState, SosPhases};
use leo_apass::geometry::{slant_range, OrbitConfig};
use leo_apass::harness::{run_campaign, write_outputs, ExperimentConfig, Profile, Scenario};
use leo_apass::linkmodel::{rate_report_from_gains, PowerMatrix};
use leo_apass::maxmin_gp::posynomial::{agm_weights, condense_zeta, zeta};
use leo_apass::maxmin_gp::{sca_maxmin, solve_gp, GpInstance, MaxMinProblem, ScaOutcome, SolverConfig};
use leo_apass::schemes::Scheme;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Info,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn gate(ok: bool, detail: String) -> Self {
        Self { status: if ok { Status::Pass } else { Status::Fail }, detail }
    }

    fn info(detail: String) -> Self {
        Self { status: Status::Info, detail }
    }
}

fn desk(k: usize, n: usize, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::profile(Profile::Desk);
    cfg.system.n_users = k;
    cfg.system.n_slots = n;
    cfg.campaign.master_seed = seed;
    cfg.campaign.workers = 1;
    cfg
}

/// Every SCA run of checks 1 and 2, replayed by check 4. The flag marks the
/// run the genie solver keeps.
struct Traces(Vec<(String, ScaOutcome, bool)>);

fn genie_runs(problem: &MaxMinProblem, cfg: &SolverConfig, label: &str, traces: &mut Traces) -> f64 {
    let equal = sca_maxmin(problem, cfg, None).expect("equal-power start");
    let sched = sca_maxmin(problem, cfg, Some(&problem.scheduled_start())).expect("scheduled start");
    let best = equal.min_rate.max(sched.min_rate);
    let keep_sched = sched.min_rate > equal.min_rate;
    traces.0.push((format!("{label}/equal"), equal, !keep_sched));
    traces.0.push((format!("{label}/scheduled"), sched, keep_sched));
    best
}

fn check_1(traces: &mut Traces) -> Outcome {
    let mut cfg = desk(3, 5, 101);
    cfg.campaign.uniform_horizon_weights = true;
    let sc = Scenario::new(&cfg).unwrap();
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for trial in 0..20 {
        let r = sc.realization(trial).unwrap();
        let problem = MaxMinProblem::genie(r.g.clone(), MaxMinProblem::uniform_noise(3, 5, sc.sigma2), sc.p_total);
        let genie = genie_runs(&problem, &cfg.solver, &format!("c1-{trial}"), traces);
        let apass = sc.run_scheme(Scheme::Apass, &r, 0.0, trial).unwrap().report.min_rate;
        let rel = (apass - genie).abs() / genie;
        if rel > 1e-3 {
            lines.push(format!("trial {trial}: apass {apass:.6} genie {genie:.6}"));
        }
        worst = worst.max(rel);
    }
    Outcome::gate(worst <= 1e-3, format!("max relative gap {worst:.2e} over 20 instances {}", lines.join("; ")))
}

fn min_rate(g: &[Vec<f64>], p: [[f64; 2]; 2], p_total: f64, sigma2: f64) -> f64 {
    let power = PowerMatrix { p: vec![vec![p[0][0], p[0][1]], vec![p[1][0], p[1][1]]], p_total };
    rate_report_from_gains(&power, g, sigma2).unwrap().min_rate
}

fn check_2(traces: &mut Traces) -> Outcome {
    let cfg = desk(2, 2, 202);
    let sc = Scenario::new(&cfg).unwrap();
    let p = sc.p_total;
    let mut worst: f64 = 0.0;
    for trial in 0..10 {
        let r = sc.realization(trial).unwrap();
        let problem = MaxMinProblem::genie(r.g.clone(), MaxMinProblem::uniform_noise(2, 2, sc.sigma2), p);
        let sca = genie_runs(&problem, &cfg.solver, &format!("c2-{trial}"), traces);

        // full simplex grid, 21 levels per variable
        let levels = 20;
        let mut oracle: f64 = 0.0;
        let mut slot_points = Vec::new();
        for a in 0..=levels {
            for b in 0..=levels - a {
                slot_points.push([a as f64 * p / levels as f64, b as f64 * p / levels as f64]);
            }
        }
        for s0 in &slot_points {
            for s1 in &slot_points {
                oracle = oracle.max(min_rate(&r.g, [[s0[0], s1[0]], [s0[1], s1[1]]], p, sc.sigma2));
            }
        }
        // fine grid on the saturated budget face
        let fine = 400;
        for a in 0..=fine {
            for b in 0..=fine {
                let (x, y) = (a as f64 / fine as f64 * p, b as f64 / fine as f64 * p);
                oracle = oracle.max(min_rate(&r.g, [[x, y], [p - x, p - y]], p, sc.sigma2));
            }
        }
        worst = worst.max((sca - oracle).abs() / oracle);
    }
    Outcome::gate(worst <= 0.01, format!("max relative deviation from grid search {worst:.2e} over 10 instances"))
}

fn check_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_gap: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=5);
        let n = rng.random_range(1..=4);
        let g: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect()).collect();
        let s2: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect()).collect();
        let draw = |rng: &mut ChaCha8Rng| PowerMatrix {
            p: (0..k).map(|_| (0..n).map(|_| 10f64.powf(rng.random_range(-4.0..1.0))).collect()).collect(),
            p_total: 10.0 * k as f64,
        };
        let anchor = draw(&mut rng);
        let p = draw(&mut rng);
        let kk = rng.random_range(0..k);
        let nn = rng.random_range(0..n);
        let w = agm_weights(&anchor, &g, &s2, kk, nn).unwrap();
        let exact_anchor = zeta(&anchor, &g, &s2, kk, nn);
        worst_gap = worst_gap.max((condense_zeta(&anchor, &w, &g, &s2, kk, nn) - exact_anchor).abs() / exact_anchor);
        if condense_zeta(&p, &w, &g, &s2, kk, nn) > zeta(&p, &g, &s2, kk, nn) * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    Outcome::gate(
        worst_gap <= 1e-10 && violations == 0,
        format!("1000 pairs: {violations} bound violations, max anchor gap {worst_gap:.2e}"),
    )
}

fn check_4(traces: &Traces) -> Outcome {
    let cfg = SolverConfig::default();
    let mut worst_rise: f64 = f64::NEG_INFINITY;
    let mut kept_unconverged = Vec::new();
    let mut other_unconverged = Vec::new();
    let mut max_iters = 0;
    for (label, run, kept) in &traces.0 {
        for pair in run.trace.windows(2) {
            worst_rise = worst_rise.max(pair[1].b.ln() - pair[0].b.ln());
        }
        if *kept {
            max_iters = max_iters.max(run.iterations);
        }
        if !run.converged {
            if *kept {
                kept_unconverged.push(label.clone());
            } else {
                other_unconverged.push(label.clone());
            }
        }
    }
    let monotone = worst_rise <= cfg.inner_tol;
    let instances = traces.0.iter().filter(|t| t.2).count();
    let detail = format!(
        "{} runs: largest rise of ln b {worst_rise:.2e} (tolerance {:.0e}); {instances} instances, kept runs took at most {max_iters} iterations, {} kept runs unconverged {:?}; discarded starts unconverged {:?}",
        traces.0.len(),
        cfg.inner_tol,
        kept_unconverged.len(),
        kept_unconverged,
        other_unconverged
    );
    Outcome::gate(monotone && kept_unconverged.is_empty(), detail)
}

fn check_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(2..=4);
        let n = rng.random_range(1..=3);
        let g: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| 10f64.powf(rng.random_range(-1.0..2.0))).collect()).collect();
        let problem = MaxMinProblem::genie(g, MaxMinProblem::uniform_noise(k, n, 1.0), 1.0);
        let anchor = PowerMatrix {
            p: (0..k).map(|_| (0..n).map(|_| rng.random_range(0.05..1.0) / k as f64).collect()).collect(),
            p_total: 1.0,
        };
        let prog = GpInstance::new(&problem, anchor).log_program(1e-12).unwrap();
        let d = prog.dim();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..0.0)).collect();

        let mut compare = |analytic: &[f64], f: &dyn Fn(&[f64]) -> f64| {
            let numeric: Vec<f64> = (0..d)
                .map(|i| {
                    let mut a = y.clone();
                    let mut b = y.clone();
                    a[i] += h;
                    b[i] -= h;
                    (f(&a) - f(&b)) / (2.0 * h)
                })
                .collect();
            let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            worst = worst.max(diff / scale);
        };
        for user in 0..k {
            let mut grad = vec![0.0; d];
            prog.user_constraint(user, &y, Some(&mut grad), None);
            compare(&grad, &|z| prog.user_constraint(user, z, None, None));
        }
        for slot in 0..n {
            let grad = prog.budget_gradient(slot, &y);
            compare(&grad, &|z| prog.budget_constraint(slot, z, None));
        }
    }
    Outcome::gate(worst <= 1e-5, format!("100 points: max relative gradient error {worst:.2e}"))
}

/// `J0(x) = (1/pi) int_0^pi cos(x sin t) dt`, composite Simpson.
fn bessel_j0(x: f64) -> f64 {
    let m = 2000;
    let h = PI / m as f64;
    let f = |t: f64| (x * t.sin()).cos();
    let mut s = f(0.0) + f(PI);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0 / PI
}

fn check_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let cfg = FadingConfig::default();
    let nu = 50.0;

    // per-quadrature power over a long horizon, per phase set
    let mut worst_power: f64 = 0.0;
    for _ in 0..20 {
        let phases = SosPhases::draw(cfg.n_sinusoids, &mut rng);
        let samples = 200_000;
        let (mut p1, mut p2) = (0.0, 0.0);
        for i in 0..samples {
            let a = sos_fading(i as f64 * 1e-3, nu, &cfg, &phases).unwrap();
            p1 += a.re * a.re;
            p2 += a.im * a.im;
        }
        worst_power = worst_power.max((p1 / samples as f64 - 1.0).abs()).max((p2 / samples as f64 - 1.0).abs());
    }

    // autocorrelation of the in-phase quadrature
    let lags: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05 / nu).collect();
    let mut acf = vec![0.0; lags.len()];
    let draws = 4000;
    for _ in 0..draws {
        let phases = SosPhases::draw(cfg.n_sinusoids, &mut rng);
        let t0 = rng.random_range(0.0..100.0);
        let a0 = sos_fading(t0, nu, &cfg, &phases).unwrap().re;
        for (j, tau) in lags.iter().enumerate() {
            acf[j] += a0 * sos_fading(t0 + tau, nu, &cfg, &phases).unwrap().re;
        }
    }
    let worst_acf = lags
        .iter()
        .zip(&acf)
        .map(|(tau, r)| (r / draws as f64 - bessel_j0(2.0 * PI * nu * tau)).abs())
        .fold(0.0, f64::max);
    let _ = sos_frequencies(nu, cfg.n_sinusoids, 0);

    // Rician K-factor by the moment method
    let kappa = 10.0;
    let fc = FadingConfig { rician_k: kappa, normalize_unit_power: true, ..cfg };
    let samples = 10_000;
    let gains: Vec<f64> = (0..samples)
        .map(|_| {
            let phases = SosPhases::draw(fc.n_sinusoids, &mut rng);
            let t = rng.random_range(0.0..10.0);
            let a = sos_fading(t, nu, &fc, &phases).unwrap();
            let phi = rng.random_range(0.0..2.0 * PI);
            let h: Complex64 = channel_gain(t, LinkState::Los, 0.0, nu, kappa, a, phi).unwrap();
            h.norm_sqr()
        })
        .collect();
    let m1 = gains.iter().sum::<f64>() / samples as f64;
    let var = gains.iter().map(|g| (g - m1).powi(2)).sum::<f64>() / samples as f64;
    let root = (1.0 - var / (m1 * m1)).sqrt();
    let k_hat = root / (1.0 - root);
    let k_err = (k_hat - kappa).abs() / kappa;

    let orbit = OrbitConfig::default();
    let zenith = slant_range(90.0, &orbit).unwrap();

    Outcome::gate(
        worst_power <= 0.05 && worst_acf <= 0.05 && k_err <= 0.15 && zenith == orbit.altitude_km,
        format!(
            "quadrature power error {worst_power:.3}, autocorrelation error {worst_acf:.3}, K estimate {k_hat:.2} ({:.1}% off), zenith range {zenith} km",
            100.0 * k_err
        ),
    )
}

fn check_7() -> Outcome {
    let mut cfg = ExperimentConfig::profile(Profile::Desk);
    cfg.campaign.n_trials = 200;
    let started = Instant::now();
    let s = run_campaign(&cfg).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let mut ok = s.failed_rows == 0;
    let mut parts = Vec::new();
    for &sig in &cfg.campaign.sigma_e2 {
        let a = s.point(Scheme::Apass, sig).unwrap();
        let st = s.point(Scheme::Sts, sig).unwrap();
        let ep = s.point(Scheme::EqualPower, sig).unwrap();
        ok &= a.mean_min_rate > st.mean_min_rate && st.mean_min_rate > ep.mean_min_rate && a.mean_fairness > 0.99;
        if sig == 0.25 {
            ok &= a.mean_genie_fraction > 0.70;
        }
        parts.push(format!(
            "sigma_e2 {sig}: apass {:.3} (fairness {:.4}, {:.1}% of genie) sts {:.3} equal {:.3}",
            a.mean_min_rate,
            a.mean_fairness,
            100.0 * a.mean_genie_fraction,
            st.mean_min_rate,
            ep.mean_min_rate
        ));
    }
    ok &= secs < 1800.0;
    Outcome::gate(ok, format!("{}; {} failed rows; {secs:.0} s", parts.join("; "), s.failed_rows))
}

fn check_8() -> Outcome {
    let trials: usize = match std::env::var("APASS_PAPER_TRIALS").ok().and_then(|v| v.parse().ok()) {
        Some(t) if t > 0 => t,
        _ => return Outcome::info("skipped; set APASS_PAPER_TRIALS to run the K=20, N=30 corridor".into()),
    };
    let mut cfg = ExperimentConfig::profile(Profile::Paper);
    cfg.campaign.n_trials = trials;
    cfg.campaign.sigma_e2 = vec![0.25];
    let s = run_campaign(&cfg).unwrap();
    let r = |d: Scheme| s.ratio(Scheme::Apass, d, 0.25).ratio.unwrap_or(f64::NAN);
    let (ep, sts, wf) = (r(Scheme::EqualPower), r(Scheme::Sts), r(Scheme::WaterFilling));
    let inside = (2.0..=4.0).contains(&ep) && (1.5..=3.5).contains(&sts) && (2.5..=5.5).contains(&wf);
    Outcome::info(format!(
        "{trials} trials: apass/equal {ep:.2} apass/sts {sts:.2} apass/water-filling {wf:.2} ({} corridor)",
        if inside { "inside" } else { "outside" }
    ))
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn check_9() -> Outcome {
    let mut cfg = desk(4, 6, 909);
    cfg.campaign.n_trials = 4;
    cfg.campaign.dump_allocations = true;
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (i, d) in dirs.iter().enumerate() {
        cfg.campaign.workers = i + 1;
        let s = run_campaign(&cfg).unwrap();
        let ratios = leo_apass::harness::ratio_table(&s, &cfg.campaign.schemes, &cfg.campaign.sigma_e2);
        write_outputs(&s, &ratios, d.path(), true).unwrap();
    }
    let a = read_dir_bytes(dirs[0].path());
    let b = read_dir_bytes(dirs[1].path());
    Outcome::gate(!a.is_empty() && a == b, format!("{} files compared across two runs", a.len()))
}

fn check_10() -> Outcome {
    let ks = [2usize, 4, 8, 16];
    let n = 6;
    let reps = 5;
    let solver = SolverConfig::default();
    let mut per_rep = vec![Vec::new(); reps];
    let mut medians = Vec::new();
    for &k in &ks {
        let sc = Scenario::new(&desk(k, n, 1010)).unwrap();
        let mut times = Vec::new();
        for (rep, slot) in per_rep.iter_mut().enumerate() {
            let r = sc.realization(rep).unwrap();
            let problem = MaxMinProblem::genie(r.g.clone(), MaxMinProblem::uniform_noise(k, n, sc.sigma2), sc.p_total);
            let inst = GpInstance::new(&problem, problem.equal_power());
            let t0 = Instant::now();
            let sol = solve_gp(&inst, &solver).unwrap();
            let secs = t0.elapsed().as_secs_f64();
            // time per interior-point step
            let per_step = secs / sol.newton_steps.max(1) as f64;
            slot.push(per_step.ln());
            times.push(per_step);
        }
        times.sort_by(f64::total_cmp);
        medians.push(times[reps / 2]);
    }
    let lx: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let slope = |ly: &[f64]| {
        let mx = lx.iter().sum::<f64>() / lx.len() as f64;
        let my = ly.iter().sum::<f64>() / ly.len() as f64;
        let num: f64 = lx.iter().zip(ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
        num / den
    };
    let mut slopes: Vec<f64> = per_rep.iter().map(|ly| slope(ly)).collect();
    slopes.sort_by(f64::total_cmp);
    let med: Vec<f64> = medians.iter().map(|t| t.ln()).collect();
    let s = slope(&med);
    Outcome::info(format!(
        "per-step solve time at N={n}: {} ; log-log slope in K {s:.2} (replicate range {:.2}..{:.2}, expected 2..4)",
        ks.iter().zip(&medians).map(|(k, t)| format!("K={k} {:.3} ms", t * 1e3)).collect::<Vec<_>>().join(", "),
        slopes[0],
        slopes[reps - 1]
    ))
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |i: usize| selected.is_empty() || selected.contains(&i);
    let mut traces = Traces(Vec::new());
    let mut failed = false;
    let names = [
        "receding horizon matches genie bound with perfect prediction",
        "genie SCA against exhaustive grid, K=2 N=2",
        "AM-GM condensation bound and tightness",
        "SCA monotone objective and convergence",
        "log-domain constraint gradients",
        "channel statistics",
        "scheme ordering at desk scale",
        "full-scale ratio corridor (soft)",
        "campaign determinism",
        "per-step solve time scaling (informational)",
    ];
    for (i, name) in names.iter().enumerate() {
        let id = i + 1;
        // check 4 replays the traces of checks 1 and 2
        let needed = want(id) || (id <= 2 && want(4));
        if !needed {
            continue;
        }
        let started = Instant::now();
        let out = match id {
            1 => check_1(&mut traces),
            2 => check_2(&mut traces),
            3 => check_3(),
            4 => check_4(&traces),
            5 => check_5(),
            6 => check_6(),
            7 => check_7(),
            8 => check_8(),
            9 => check_9(),
            _ => check_10(),
        };
        if !want(id) {
            continue;
        }
        let tag = match out.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed = true;
                "FAIL"
            }
            Status::Info => "INFO",
        };
        println!("{tag} [{id}] {name}: {} ({:.1} s)", out.detail, started.elapsed().as_secs_f64());
    }
    if failed {
        std::process::exit(1);
    }
}
