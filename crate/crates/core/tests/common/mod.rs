//! Oracles and check suites shared by the integration tests and the
//! acceptance runner. Each `check_*` returns a one-line summary on success.

#![allow(dead_code)]

use ivcox::beran::{beran_cdf, smooth_cdf, SmoothSubCdf, StepCdf};
use ivcox::coxph::{fit_cox, log_partial_likelihood, score, CoxData, CoxOptions};
use ivcox::phi::{
    generalized_residual, solve_general, solve_triangular, CellCdfBundle, GeneralOptions, LevelOrder,
};
use ivcox::pipeline::{build_map, estimate, PipelineConfig};
use ivcox::proxy::{draw_u_tilde, u_tilde_cdf, ProxyConfig};
use ivcox::rng::{derive_seed, stream_rng};
use ivcox::sim::{generate_design, run_monte_carlo, Censoring, MonteCarloOptions, SimDesign};
use ivcox::{Dataset, KernelSpec, Observation};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, 99)
}

/// Single-cell binary dataset; durations rounded to `resolution` so ties occur.
pub fn single_cell(rng: &mut ChaCha8Rng, n: usize, resolution: f64) -> Dataset<f64> {
    let obs = (0..n)
        .map(|_| {
            let t: f64 = rng.random_range(0.05..5.0);
            Observation { y: (t / resolution).round() * resolution, delta: rng.random_bool(0.7), z: 0, x: 0.0, w: 0 }
        })
        .collect();
    Dataset::binary(obs).unwrap()
}

/// Textbook Kaplan–Meier: `(time, 1 - S(time))` at each distinct event time.
pub fn kaplan_meier(data: &Dataset<f64>) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> =
        data.observations().iter().filter(|o| o.delta).map(|o| o.y).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let mut s = 1.0;
    let mut out = Vec::new();
    for t in times {
        let at_risk = data.observations().iter().filter(|o| o.y >= t).count() as f64;
        let deaths = data.observations().iter().filter(|o| o.y == t && o.delta).count() as f64;
        s *= 1.0 - deaths / at_risk;
        out.push((t, 1.0 - s));
    }
    out
}

pub fn beran_matches_km(data: &Dataset<f64>) -> Result<(), String> {
    let km = kaplan_meier(data);
    let f = beran_cdf(data, 0, 0, 0.0, 1e6, &KernelSpec::epanechnikov(), 10.0).map_err(|e| e.to_string())?;
    if f.jump_times().len() != km.len() {
        return Err(format!("{} jumps, Kaplan–Meier has {}", f.jump_times().len(), km.len()));
    }
    for ((&t, &v), &(tk, vk)) in f.jump_times().iter().zip(f.values()).zip(&km) {
        if t != tk || (v - vk).abs() > 1e-12 {
            return Err(format!("({t}, {v}) vs Kaplan–Meier ({tk}, {vk})"));
        }
    }
    Ok(())
}

pub fn check_beran_km() -> Check {
    let mut r = rng(1);
    for k in 0..50 {
        let n = r.random_range(5..120);
        let resolution = if k % 2 == 0 { 0.25 } else { 1e-9 };
        let data = single_cell(&mut r, n, resolution);
        beran_matches_km(&data).map_err(|e| format!("dataset {k}: {e}"))?;
    }
    Ok("50 datasets".into())
}

/// Composite Simpson on `[-1, 1]`.
pub fn simpson(f: impl Fn(f64) -> f64) -> f64 {
    let m = 4000;
    let h = 2.0 / m as f64;
    let mut s = f(-1.0) + f(1.0);
    for i in 1..m {
        s += f(-1.0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn kernel_moments_ok(k: &KernelSpec<f64>) -> Result<(), String> {
    let nu = k.order();
    for j in 0..nu {
        let m = simpson(|u| u.powi(j as i32) * k.eval(u));
        let want = if j == 0 { 1.0 } else { 0.0 };
        if (m - want).abs() > 1e-6 {
            return Err(format!("order {nu}: moment {j} = {m}"));
        }
    }
    let lead = simpson(|u| u.powi(nu as i32) * k.eval(u));
    if lead.abs() < 1e-6 {
        return Err(format!("order {nu}: moment {nu} vanishes"));
    }
    Ok(())
}

pub fn check_kernel_moments() -> Check {
    kernel_moments_ok(&KernelSpec::epanechnikov())?;
    kernel_moments_ok(&KernelSpec::constructed_order4())?;
    Ok("orders 2 and 4".into())
}

pub fn random_cox_data(rng: &mut ChaCha8Rng, n: usize, p: usize, ties: bool) -> CoxData<f64> {
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
    let times = (0..n)
        .map(|_| {
            let t: f64 = rng.random_range(0.01..3.0);
            if ties { (t * 4.0).round() / 4.0 + 0.25 } else { t }
        })
        .collect();
    let events = (0..n).map(|_| rng.random_bool(0.75)).collect();
    CoxData::new(times, events, x).unwrap()
}

/// Central differences of the log partial likelihood against the analytic score.
pub fn score_matches_fd(data: &CoxData<f64>, beta: &[f64]) -> Result<(), String> {
    let s = score(data, beta).map_err(|e| e.to_string())?;
    let h = 1e-5;
    for j in 0..beta.len() {
        let mut up = beta.to_vec();
        let mut dn = beta.to_vec();
        up[j] += h;
        dn[j] -= h;
        let fd = (log_partial_likelihood(data, &up).unwrap() - log_partial_likelihood(data, &dn).unwrap()) / (2.0 * h);
        if (fd - s[j]).abs() > 1e-6 * s[j].abs().max(1.0) {
            return Err(format!("component {j}: analytic {} vs difference {fd}", s[j]));
        }
    }
    Ok(())
}

pub fn check_score_fd() -> Check {
    let mut r = rng(3);
    for d in 0..20 {
        let p = 1 + d % 3;
        let n = r.random_range(20..150);
        let data = random_cox_data(&mut r, n, p, d % 2 == 0);
        for k in 0..20 {
            let beta: Vec<f64> = (0..p).map(|_| r.random_range(-1.5..1.5)).collect();
            score_matches_fd(&data, &beta).map_err(|e| format!("dataset {d}, point {k}: {e}"))?;
        }
    }
    Ok("20 datasets x 20 points".into())
}

/// Finite population with rank invariance: every instrument arm holds the
/// same ranks `(i + 1/2)/m`, arm `w` only reaches treatments `0..=w`, and a
/// unit's treatment may depend on its rank. The sub-distributions it implies
/// satisfy the moment system exactly, and the system is triangular.
pub fn triangular_population(rng: &mut ChaCha8Rng, levels: usize, m: usize) -> CellCdfBundle<f64> {
    let tbar = 50.0;
    let scale: Vec<f64> = (0..levels).map(|_| rng.random_range(0.3..2.0)).collect();
    let mut entries: Vec<Vec<SmoothSubCdf<f64>>> = vec![Vec::new(); levels];
    for w in 0..levels {
        let lean: f64 = rng.random_range(-2.0..2.0);
        let mut cells: Vec<Vec<f64>> = vec![Vec::new(); levels];
        for i in 0..m {
            let u = (i as f64 + 0.5) / m as f64;
            let z = if w == 0 {
                0
            } else {
                let pull = 1.0 / (1.0 + (-lean * (u - 0.5) * 4.0).exp());
                if rng.random_bool(pull) { rng.random_range(1..=w) } else { rng.random_range(0..=w) }
            };
            cells[z].push(-(1.0 - u).ln() * scale[z]);
        }
        for (z, times) in cells.iter_mut().enumerate() {
            let kernel = KernelSpec::epanechnikov();
            if times.is_empty() {
                entries[z].push(SmoothSubCdf::zero(tbar, kernel));
                continue;
            }
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let k = times.len() as f64;
            let values = (1..=times.len()).map(|i| i as f64 / k).collect();
            let step = StepCdf::new(times.clone(), values, tbar).unwrap();
            entries[z].push(smooth_cdf(step, k / m as f64, 0.0, &kernel));
        }
    }
    CellCdfBundle::new(entries, 0.9, tbar, 0.0).unwrap()
}

/// `Ok(false)` when the recursion has no exact solution at `u`, so there is
/// nothing to compare.
pub fn general_matches_triangular(bundle: &CellCdfBundle<f64>, u: f64) -> Result<bool, String> {
    let order = LevelOrder::identity(bundle.levels());
    let Ok(tri) = solve_triangular(bundle, &order, u) else { return Ok(false) };
    if generalized_residual(&tri, bundle, u).iter().any(|r| *r != 0.0) {
        return Ok(false);
    }
    let gen = solve_general(bundle, u, &GeneralOptions::default(), None).map_err(|e| e.to_string())?;
    for (a, g) in tri.iter().zip(&gen.theta) {
        if (a - g).abs() > 1e-6 {
            return Err(format!("u = {u}: triangular {tri:?}, general {:?}", gen.theta));
        }
    }
    Ok(true)
}

const INSTANCES: usize = 60;

pub fn check_general_vs_triangular() -> Check {
    let mut r = rng(4);
    let (mut points, mut skipped) = (0, 0);
    for k in 0..INSTANCES {
        let levels = if k % 3 == 2 { 3 } else { 2 };
        let m = r.random_range(15..60);
        let bundle = triangular_population(&mut r, levels, m);
        for _ in 0..8 {
            let u = r.random_range(0.0..0.9);
            if general_matches_triangular(&bundle, u).map_err(|e| format!("instance {k}: {e}"))? {
                points += 1;
            } else {
                skipped += 1;
            }
        }
    }
    Ok(format!("{points} points on {INSTANCES} instances ({skipped} without an exact recursion)"))
}

/// Kolmogorov–Smirnov distance between draws of `Ũ` and its closed-form law,
/// using both one-sided limits at each order statistic.
pub fn u_tilde_ks(cfg: &ProxyConfig, draws: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut u: Vec<f64> = (0..draws).map(|_| draw_u_tilde(cfg, &mut r).0).collect();
    u.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = draws as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < u.len() {
        let mut j = i;
        while j + 1 < u.len() && u[j + 1] == u[i] {
            j += 1;
        }
        let below = u_tilde_cdf(u[i] - 1e-12, cfg).0;
        let at = u_tilde_cdf(u[i], cfg).0;
        d = d.max((i as f64 / n - below).abs()).max(((j + 1) as f64 / n - at).abs());
        i = j + 1;
    }
    d
}

pub fn check_u_tilde_law() -> Check {
    let mut worst: f64 = 0.0;
    for (k, tau) in [0.0, 0.2, 0.5].into_iter().enumerate() {
        let cfg = ProxyConfig::new(0.9, tau, 0).unwrap();
        let d = u_tilde_ks(&cfg, 100_000, 10 + k as u64);
        if d >= 0.01 {
            return Err(format!("τ = {tau}: KS {d:.4}"));
        }
        worst = worst.max(d);
    }
    Ok(format!("max KS {worst:.4}"))
}

pub fn check_phi_monotone() -> Check {
    let cfg = PipelineConfig::<f64>::default();
    for (k, design) in [SimDesign::DiscreteBernoulli, SimDesign::ContinuousUniform, SimDesign::ThreeArm].into_iter().enumerate() {
        let data = generate_design(design, Censoring::Forty, 400, 30 + k as u64).unwrap();
        let (map, _, _) = build_map(&data, &cfg, 5).map_err(|e| e.to_string())?;
        for x in [-0.3, 0.0, 0.2, 0.5, 1.0] {
            for z in 0..data.levels() {
                let mut prev = f64::NEG_INFINITY;
                for i in 0..=900 {
                    let u = i as f64 / 1000.0;
                    let Ok(v) = map.phi_hat(z, x, u) else { break };
                    if v < prev {
                        return Err(format!("{design}: φ̂({z}, {x}, {u}) = {v} < {prev}"));
                    }
                    prev = v;
                }
            }
        }
    }
    Ok("3 designs".into())
}

pub fn check_determinism() -> Check {
    let cfg = PipelineConfig::<f64>::default();
    let data = generate_design(SimDesign::ContinuousBeta, Censoring::Twenty, 500, 77).unwrap();
    let again = generate_design(SimDesign::ContinuousBeta, Censoring::Twenty, 500, 77).unwrap();
    if data != again {
        return Err("generated data differ".into());
    }
    let a = estimate(&data, &cfg, 5).map_err(|e| e.to_string())?;
    let b = estimate(&data, &cfg, 5).map_err(|e| e.to_string())?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    if bits(&a.beta) != bits(&b.beta) {
        return Err("estimate differs between runs".into());
    }
    let opts = MonteCarloOptions { reps: 6, seed: 8, warp_speed: true, ..Default::default() };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_monte_carlo(SimDesign::DiscreteBernoulli, Censoring::Twenty, 200, &cfg, &opts))
    };
    let one = run(1).map_err(|e| e.to_string())?;
    let four = run(4).map_err(|e| e.to_string())?;
    if one != four {
        return Err("Monte Carlo output depends on the thread count".into());
    }
    Ok("bitwise equal across runs and thread counts".into())
}

/// Frozen reference fits, one per dataset.
pub struct CoxFixture {
    pub data: CoxData<f64>,
    pub beta: Vec<f64>,
}

pub fn cox_fixtures() -> Vec<CoxFixture> {
    let data = include_str!("../data/cox_parity_data.csv");
    let betas = include_str!("../data/cox_parity_beta.csv");
    let parse = |line: &str| -> Vec<f64> { line.split(',').map(|v| v.parse().unwrap()).collect() };
    let mut rows: Vec<Vec<Vec<f64>>> = Vec::new();
    for line in data.lines().skip(1) {
        let v = parse(line);
        let k = v[0] as usize;
        if rows.len() <= k {
            rows.resize(k + 1, Vec::new());
        }
        rows[k].push(v);
    }
    betas
        .lines()
        .skip(1)
        .map(|line| {
            let b = parse(line);
            let (k, p) = (b[0] as usize, b[1] as usize);
            let r = &rows[k];
            let data = CoxData::new(
                r.iter().map(|v| v[2]).collect(),
                r.iter().map(|v| v[3] == 1.0).collect(),
                r.iter().map(|v| v[4..4 + p].to_vec()).collect(),
            )
            .unwrap();
            CoxFixture { data, beta: b[2..2 + p].to_vec() }
        })
        .collect()
}

pub fn check_cox_parity() -> Check {
    let fixtures = cox_fixtures();
    let mut worst_beta: f64 = 0.0;
    let mut worst_score: f64 = 0.0;
    for (k, f) in fixtures.iter().enumerate() {
        let fit = fit_cox(&f.data, None, &CoxOptions::default()).map_err(|e| format!("dataset {k}: {e}"))?;
        let diff = fit.beta.iter().zip(&f.beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let s = score(&f.data, &fit.beta).unwrap().iter().map(|v| v.abs()).fold(0.0, f64::max);
        if diff > 1e-6 || s > 1e-8 {
            return Err(format!("dataset {k}: |Δβ| {diff:.2e}, ‖score‖∞ {s:.2e}"));
        }
        worst_beta = worst_beta.max(diff);
        worst_score = worst_score.max(s);
    }
    Ok(format!("{} datasets, max |Δβ| {worst_beta:.1e}, max ‖score‖∞ {worst_score:.1e}", fixtures.len()))
}

pub fn seed_for(base: u64, k: usize) -> u64 {
    derive_seed(base, k as u64)
}
