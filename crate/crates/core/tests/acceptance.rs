//! End-to-end acceptance criteria A1-A11.
//!
//! Runs without the libtest harness and prints one `A<n> PASS|FAIL` line per
//! criterion. Positional arguments select criteria by name (`A3`, `a10`);
//! with none, all eleven run. Exits non-zero if any selected criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use torus_ma::ensemble::{log_permanent, Background, EnsembleSpec};
use torus_ma::sampler::{
    marginal_phi_exact, mcmc_sample, mean_empirical, mgf_zero_temp, ChainParams, SampleSet,
};
use torus_ma::solver::{gamma_density, minimize_f, ode_oracle_1d, uniqueness_probe};
use torus_ma::theta::{
    fourier_permanent, gram_identity, theta_constant_fit, theta_gamma_density_check, verify_detperm,
};
use torus_ma::torus::{DiscreteMeasure, GridField, TorusPoint};
use torus_ma::transport::{
    circle_w1, duality_gap_trace, rate_function, relative_entropy, wasserstein_cost,
};
use torus_ma::verify::{run_suite, Suite, VerifyOptions};

struct Outcome {
    passed: bool,
    detail: String,
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn bump(res: usize) -> DiscreteMeasure<f64> {
    DiscreteMeasure::grid_normalized(
        GridField::from_fn(1, res, |x: &[f64]| 1.0 + 0.5 * (2.0 * PI * x[0]).cos()).unwrap(),
    )
    .unwrap()
}

fn bump_density(res: usize) -> GridField<f64> {
    GridField::from_fn(1, res, |x: &[f64]| 1.0 + 0.5 * (2.0 * PI * x[0]).cos()).unwrap()
}

fn a1() -> Outcome {
    let mu0 = DiscreteMeasure::uniform_grid(1, 256).unwrap();
    let r = minimize_f(1.0, &mu0, 256, 1e-9, 500, None).unwrap();
    let sup = r.phi.sup_norm();
    outcome(
        sup <= 1e-6 && r.residual <= 1e-6,
        format!("sup|φ*| = {sup:.3e}, residual = {:.3e}", r.residual),
    )
}

fn a2() -> Outcome {
    let res = 512;
    let dens = bump_density(res);
    let mu0 = DiscreteMeasure::grid_normalized(dens.clone()).unwrap();
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for beta in [0.5, 1.0, 2.0] {
        let r = minimize_f(beta, &mu0, res, 1e-9, 500, None).unwrap();
        let o = ode_oracle_1d(beta, &dens, res).unwrap();
        let d = r.phi.sup_distance(&o.phi.zero_mean()).unwrap();
        worst = worst.max(d);
        parts.push(format!("β={beta}: {d:.3e}"));
    }
    outcome(worst <= 1e-3, format!("sup deviation {}", parts.join(", ")))
}

/// `mean_empirical` of the samples from the given chains only.
fn chain_subset(s: &SampleSet<f64>, chains: &[usize], res: usize) -> DiscreteMeasure<f64> {
    let mut sub = s.clone();
    let keep: Vec<bool> = s.origin.iter().map(|(c, _)| chains.contains(c)).collect();
    let mut it = keep.iter();
    sub.configurations.retain(|_| *it.next().unwrap());
    sub.origin.retain(|(c, _)| chains.contains(c));
    mean_empirical(&sub, res).unwrap()
}

fn a3() -> Outcome {
    let res = 256;
    let mu0 = bump(res);
    let star = minimize_f(1.0, &mu0, res, 1e-9, 500, None).unwrap();
    let ma = star.ma_measure().unwrap();
    let mut w = Vec::new();
    for k in [4usize, 8, 16] {
        let spec =
            EnsembleSpec::lattice(1, k, 1.0, Background::from_measure(&mu0).unwrap()).unwrap();
        let params =
            ChainParams::new(200_000, 20_000, k, ChainParams::default_sigma(k), 2024, 4).unwrap();
        let s = mcmc_sample(&spec, &params).unwrap();
        let me = mean_empirical(&s, res).unwrap();
        // Monte Carlo noise level: distance between two halves of the chains
        let split = circle_w1(
            &chain_subset(&s, &[0, 1], res),
            &chain_subset(&s, &[2, 3], res),
        )
        .unwrap();
        w.push((k, circle_w1(&me, &ma).unwrap(), split, s.acceptance_rate));
    }
    let monotone = w.windows(2).all(|p| p[1].1 <= p[0].1);
    let last = w.last().unwrap().1;
    let detail = w
        .iter()
        .map(|(k, d, sp, a)| format!("k={k}: W1={d:.4e} (split-chain W1 {sp:.2e}, acc {a:.3})"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(
        monotone && last <= 0.05,
        format!(
            "{detail}; W1(μ₀, MA(φ*)) = {:.4e}",
            circle_w1(&mu0, &ma).unwrap()
        ),
    )
}

// The exact marginal potentials are below 1e-17 for N >= 2, so the computed
// values are rounding noise; consecutive values are compared up to this floor.
const A4_ROUNDING_FLOOR: f64 = 1e-14;

fn a4() -> Outcome {
    let mut sups = Vec::new();
    for n in [2usize, 3, 4] {
        let spec = EnsembleSpec::lattice(1, n, 1.0, Background::Uniform).unwrap();
        sups.push(marginal_phi_exact(&spec, 64).unwrap().sup_norm());
    }
    let monotone = sups.windows(2).all(|p| p[1] <= p[0] + A4_ROUNDING_FLOOR);
    outcome(
        monotone && sups[2] <= 0.2,
        format!(
            "sup|φ_N| for N=2,3,4: {:.3e}, {:.3e}, {:.3e} (rounding floor {A4_ROUNDING_FLOOR:.0e})",
            sups[0], sups[1], sups[2]
        ),
    )
}

type NamedFn = (&'static str, fn(f64) -> f64);

fn a5() -> Outcome {
    let res = 512;
    let mu0 = DiscreteMeasure::uniform_grid(1, res).unwrap();
    let phis: [NamedFn; 2] = [("0", |_| 0.0), ("0.2cos", |x| 0.2 * (2.0 * PI * x).cos())];
    let mut ok = true;
    let mut parts = Vec::new();
    let mut k8 = f64::NAN;
    for (name, f) in phis {
        let phi = GridField::from_fn(1, res, |x: &[f64]| f(x[0])).unwrap();
        let target = torus_ma::ctransform::xi(&phi.scale(-1.0));
        let mut gaps = Vec::new();
        for k in [8usize, 16, 32, 64] {
            let m = mgf_zero_temp(k, &phi, &mu0).unwrap();
            if k == 8 && name == "0" {
                k8 = m;
            }
            gaps.push((m - target).abs());
        }
        ok &= gaps.windows(2).all(|p| p[1] < p[0]) && gaps[3] <= 0.05;
        parts.push(format!(
            "φ={name}: gaps {}",
            gaps.iter()
                .map(|g| format!("{g:.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        ));
    }
    ok &= (k8 - 0.1506).abs() <= 1e-3;
    parts.push(format!("k=8 φ=0 value {k8:.5}"));
    outcome(ok, parts.join("; "))
}

// primal and dual are summed in different orders
const WEAK_DUALITY_ROUNDING: f64 = 1e-12;

fn a6() -> Outcome {
    let mut worst_gap = 0.0f64;
    let mut worst_weak = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<TorusPoint<f64>> = (0..8)
            .map(|_| TorusPoint::wrap(&[rng.random::<f64>()]).unwrap())
            .collect();
        let trace = duality_gap_trace(&DiscreteMeasure::uniform_atoms(xs).unwrap(), 40).unwrap();
        worst_gap = worst_gap.max(*trace.gaps.last().unwrap());
        for &g in &trace.gaps {
            worst_weak = worst_weak.max(-g);
        }
    }
    outcome(
        worst_gap <= 1e-6 && worst_weak <= WEAK_DUALITY_ROUNDING,
        format!("max gap {worst_gap:.3e}, max dual excess {worst_weak:.3e}"),
    )
}

fn a7() -> Outcome {
    let (mut dp, mut fp, mut gr) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..20u64 {
        for n in 1..=3 {
            dp = dp.max(verify_detperm::<f64>(n, 4 * n + 2, seed).unwrap().rel_error);
            gr = gr.max(gram_identity::<f64>(n, seed, 4 * n + 2).unwrap().rel_error);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in 1..=4 {
            let a = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..3.0));
            let q = fourier_permanent(&a, 4 * n + 2).unwrap();
            let exact = log_permanent(&a.mapv(f64::ln)).unwrap().exp();
            fp = fp.max((q - exact).abs() / exact);
        }
    }
    outcome(
        dp.max(fp).max(gr) <= 1e-9,
        format!("max rel error: detperm {dp:.3e}, fourier {fp:.3e}, gram {gr:.3e}"),
    )
}

fn a8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut consts = Vec::new();
    for k in 1..=2 {
        let ys: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..k).map(|_| rng.random::<f64>()).collect())
            .collect();
        let r = theta_constant_fit(k, &ys, 64).unwrap();
        worst = worst.max(r.rel_error);
        consts.push(format!(
            "N={k}: {:.10} vs {:.10}",
            r.fitted_constant.unwrap(),
            (4.0 * PI).powi(k as i32)
        ));
    }
    let dens = theta_gamma_density_check::<f64>(64, 64).unwrap();
    outcome(
        worst <= 1e-6 && dens <= 1e-8,
        format!(
            "{}; fit rel error {worst:.3e}; density rel error {dens:.3e}",
            consts.join(", ")
        ),
    )
}

fn a9() -> Outcome {
    let res = 256;
    let a = uniqueness_probe(1.0, &bump(res), res, 10, 9, 1e-9, 500).unwrap();
    let b = uniqueness_probe(-1.0, &gamma_density(1, res).unwrap(), res, 10, 9, 1e-9, 500).unwrap();
    outcome(
        a.spread <= 1e-3 && b.spread <= 1e-3,
        format!(
            "spread β=1: {:.3e}, β=-1 (γ): {:.3e}, all converged: {}",
            a.spread,
            b.spread,
            a.all_converged && b.all_converged
        ),
    )
}

fn a10() -> Outcome {
    let res = 256;
    let mu0 = bump(res);
    let r = minimize_f(1.0, &mu0, res, 1e-9, 500, None).unwrap();
    let star = r.ma_measure().unwrap();
    let g_star = rate_function(&star, 1.0, &mu0, &star).unwrap().g_value;
    let base = star.as_grid().unwrap().clone();
    let mut worst = f64::INFINITY;
    for i in 0..50 {
        let s = 0.01 + 0.02 * i as f64;
        let mode = (1 + i % 4) as f64;
        let shift = 0.13 * i as f64;
        let p = GridField::from_fn(1, res, |x: &[f64]| {
            (s * (2.0 * PI * mode * x[0] + shift).sin()).exp()
        })
        .unwrap();
        let mu = DiscreteMeasure::grid_normalized(base.zip_map(&p, |a, b| a * b).unwrap()).unwrap();
        worst = worst.min(rate_function(&mu, 1.0, &mu0, &star).unwrap().g_value);
    }
    let dx = DiscreteMeasure::uniform_grid(1, res).unwrap();
    let w2 = wasserstein_cost(&star, &dx, 2).unwrap();
    let ent = relative_entropy(&star, &mu0).unwrap();
    let dual = (w2 + ent + r.f_value).abs();
    outcome(
        g_star.abs() <= 1e-12 && worst >= -1e-6 && dual <= 2e-2,
        format!("G(μ*) = {g_star:.3e}, min G over 50 perturbations {worst:.3e}, |βW²+Ent+βF| = {dual:.3e}"),
    )
}

fn a11() -> Outcome {
    let mut failures = Vec::new();
    let mut checks = 0;
    for seed in 0..20u64 {
        let opts = VerifyOptions {
            seed,
            fixed_checks: seed == 0,
            ..VerifyOptions::default()
        };
        let report = run_suite(Suite::All, &opts).unwrap();
        checks += report.checks.len();
        failures.extend(
            report
                .failures()
                .map(|c| format!("seed {seed} {} = {:.3e}", c.name, c.value)),
        );
    }
    let detail = if failures.is_empty() {
        format!("{checks} checks over 20 seeds")
    } else {
        format!(
            "{} of {checks} failed: {}",
            failures.len(),
            failures.join("; ")
        )
    };
    outcome(failures.is_empty(), detail)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("A1", Duration::from_secs(10), a1),
        ("A2", Duration::from_secs(60), a2),
        ("A3", Duration::from_secs(15 * 60), a3),
        ("A4", Duration::from_secs(5 * 60), a4),
        ("A5", Duration::from_secs(30), a5),
        ("A6", Duration::from_secs(30), a6),
        ("A7", Duration::from_secs(30), a7),
        ("A8", Duration::from_secs(60), a8),
        ("A9", Duration::from_secs(10 * 60), a9),
        ("A10", Duration::from_secs(5 * 60), a10),
        ("A11", Duration::from_secs(10 * 60), a11),
    ];
    let wanted: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .map(|a| a.to_uppercase())
        .collect();
    let mut all_ok = true;
    for (name, budget, run) in criteria {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == name) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let el = t.elapsed();
        let ok = o.passed && el <= budget;
        all_ok &= ok;
        println!(
            "{name} {}: {} [{:.2} s, budget {} s]",
            if ok { "PASS" } else { "FAIL" },
            o.detail,
            el.as_secs_f64(),
            budget.as_secs()
        );
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
