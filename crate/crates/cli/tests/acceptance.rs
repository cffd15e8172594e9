//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits non-zero only when a criterion cannot be evaluated at all (a
//! panic), or when `CRZF_ACCEPTANCE_STRICT=1` is set and some criterion
//! fails.

use std::time::{Duration, Instant};

use crzf_cli::{load_study, run_to_dir, Study};
use crzf_core::analytics::{
    noncoord_factor, perfect_terms, rvq_terms, AnalyticsContext, LinkBudget, WishartMoments, M_MAX,
};
use crzf_core::bits::{adaptive_bits, adaptive_bits_real, exhaustive_model, AllocationInput, Rounding};
use crzf_core::cell::sample_channel;
use crzf_core::oracle::eigen_oracle_grid;
use crzf_core::rvq::{generate_codebook, quantization_variance, quantize_cdi};
use crzf_core::sim::{run_experiment, ExperimentConfig, ExperimentResult, SweepPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

struct Paired {
    mean: f64,
    stderr: f64,
}

/// Per-trial paired difference of mean cell SE, `a - b`. Both runs share
/// drops and fading because they share the seed.
fn paired_se(a: &SweepPoint, b: &SweepPoint) -> Paired {
    let d: Vec<f64> = a.per_trial.iter().zip(&b.per_trial).map(|(x, y)| x.mean_se - y.mean_se).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Paired {
        mean,
        stderr: (var / n).sqrt(),
    }
}

fn series(study: &Study, name: &str) -> ExperimentConfig {
    study
        .series
        .iter()
        .find(|s| s.name == name)
        .unwrap_or_else(|| panic!("preset has no series `{name}`"))
        .config
        .clone()
}

fn run(cfg: &ExperimentConfig) -> ExperimentResult {
    run_experiment(cfg).unwrap_or_else(|e| panic!("simulation failed: {e}"))
}

fn within(elapsed: Duration, limit_s: u64) -> (bool, String) {
    (elapsed.as_secs() < limit_s, format!("{:.1}s of {limit_s}s", elapsed.as_secs_f64()))
}

fn closed_form_vs_oracle() -> Outcome {
    let start = Instant::now();
    let alphas = [0.01, 0.1, 1.0, 10.0];
    let (mut worst, mut worst_at, mut checks) = (0.0f64, String::new(), 0);
    for m in [2usize, 4, 6, 8] {
        let est = eigen_oracle_grid(m, &alphas, 1_000_000, 1000 + m as u64).expect("oracle");
        for (&alpha, e) in alphas.iter().zip(&est) {
            let c = WishartMoments::evaluate(m, alpha).expect("closed form");
            for (name, value, s) in [("D1", c.d1, e.d1), ("D2", c.d2, e.d2), ("F", c.f, e.f)] {
                checks += 1;
                let z = s.z_score(value);
                if z > worst {
                    worst = z;
                    worst_at = format!("{name} at M={m}, alpha={alpha}");
                }
            }
        }
    }
    let (fast, time) = within(start.elapsed(), 120);
    (
        worst <= 3.0 && fast,
        format!("{checks} checks, largest |z| = {worst:.2} ({worst_at}), {time}"),
    )
}

fn analytic_identities() -> Outcome {
    let mut worst_identity = 0.0f64;
    for m in 2..=M_MAX {
        for alpha in [1e-3, 1e-2, 0.1, 1.0, 10.0, 30.0] {
            let c = AnalyticsContext::build(m, alpha).expect("context");
            worst_identity = worst_identity.max((c.delta + (m as f64 - 1.0) * c.psi - c.xi).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_sum = 0.0f64;
    for _ in 0..10_000 {
        let k = rng.random_range(1..=3);
        let input = AllocationInput {
            b_total: rng.random_range(0..=40),
            weights: (0..k).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect(),
            m: rng.random_range(2..=8),
        };
        let real = adaptive_bits_real(&input).expect("allocation");
        worst_sum = worst_sum.max((real.iter().sum::<f64>() - f64::from(input.b_total)).abs());
    }
    let ctx = AnalyticsContext::build(4, 0.2).expect("context");
    let mut upsilon_exact = true;
    for l in 1..=4usize {
        let budget = LinkBudget {
            p_serving: 9.0,
            p_interf: vec![],
            p_noncoord: vec![0.7, 1.3, 2.9],
            users_per_cell: l,
        };
        let ctx_l = AnalyticsContext::build(l, 0.2).unwrap_or(ctx);
        let expected = l as f64 * (0.7 + 1.3 + 2.9);
        upsilon_exact &= noncoord_factor(l) == l as f64;
        if l >= 2 {
            upsilon_exact &= perfect_terms(&ctx_l, &[], &budget).map(|t| t.noncoord) == Ok(expected);
            upsilon_exact &= rvq_terms(&ctx_l, &[], &budget, &[7]).map(|t| t.noncoord) == Ok(expected);
        }
    }
    (
        worst_identity <= 1e-12 && worst_sum <= 1e-10 && upsilon_exact,
        format!(
            "delta + (M-1) psi - xi up to {worst_identity:.1e}, real split sum error up to {worst_sum:.1e}, non-coordinated term = L * sum P exactly: {upsilon_exact}"
        ),
    )
}

fn overlay_tightness() -> Outcome {
    let start = Instant::now();
    let study = load_study("fig3").expect("fig3 preset");
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    let mut above = Vec::new();
    for name in ["B10", "B15", "B20"] {
        let cfg = ExperimentConfig {
            trials: 20_000,
            ..series(&study, name)
        };
        for p in &run(&cfg).points {
            let gap = p.analytic_sinr_db.expect("overlay") - p.mean_sinr_db;
            if p.rho0_db <= 15.0 {
                if gap.abs() > worst {
                    worst = gap.abs();
                    worst_at = format!("{name} at {} dB", p.rho0_db);
                }
            } else {
                above.push(format!("{name}@{}dB {gap:+.2}", p.rho0_db));
            }
        }
    }
    let (fast, time) = within(start.elapsed(), 300);
    (
        worst <= 1.5 && fast,
        format!(
            "largest |analytic - simulated| for rho0 <= 15 dB = {worst:.2} dB ({worst_at}); above 15 dB (not scored): {}; {time}",
            above.join(", ")
        ),
    )
}

fn scheme_ordering() -> Outcome {
    let start = Instant::now();
    let study = load_study("fig4").expect("fig4 preset");
    let names = ["single_cell", "coord_rzf_opt", "coord_rzf", "coord_zf", "noncoord_rzf"];
    let points: Vec<SweepPoint> = names
        .iter()
        .map(|n| {
            let cfg = ExperimentConfig {
                rho0_db: vec![15.0],
                trials: 10_000,
                ..series(&study, n)
            };
            run(&cfg).points.remove(0)
        })
        .collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, pair) in points.windows(2).enumerate() {
        let d = paired_se(&pair[0], &pair[1]);
        let pass = d.mean > 2.0 * d.stderr;
        ok &= pass;
        parts.push(format!(
            "{} - {} = {:+.3} ({:.1} SE){}",
            names[i],
            names[i + 1],
            d.mean,
            d.mean / d.stderr,
            if pass { "" } else { " FAIL" }
        ));
    }
    let means: Vec<String> = names.iter().zip(&points).map(|(n, p)| format!("{n} {:.3}", p.mean_se)).collect();
    let (fast, time) = within(start.elapsed(), 600);
    (ok && fast, format!("SE at 15 dB: {}; gaps: {}; {time}", means.join(", "), parts.join("; ")))
}

fn instantaneous_schemes_close() -> Outcome {
    let study = load_study("table1").expect("table1 preset");
    let a = run(&series(&study, "inst_se"));
    let b = run(&series(&study, "inst_int"));
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, q) in a.points.iter().zip(&b.points) {
        let gap = p.mean_se - q.mean_se;
        ok &= gap.abs() <= 0.3;
        parts.push(format!("{} dB: {:.3} vs {:.3} ({gap:+.3})", p.rho0_db, p.mean_se, q.mean_se));
    }
    (ok, parts.join("; "))
}

fn adaptive_allocation_gains() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (preset, trials) in [("fig8", 10_000), ("fig9", 4_000)] {
        let study = load_study(preset).expect("preset");
        let run_series = |n: &str| run(&ExperimentConfig { trials, ..series(&study, n) });
        let adaptive = run_series("rzf_adaptive");
        let uniform = run_series("rzf_uniform");
        let zf = run_series("zf_adaptive");
        for ((a, u), z) in adaptive.points.iter().zip(&uniform.points).zip(&zf.points) {
            let du = paired_se(a, u);
            let dz = paired_se(a, z);
            let duz = paired_se(u, z);
            let vs_uniform = du.mean >= 0.0 && (a.rho0_db < 5.0 || du.mean >= 2.0 * du.stderr);
            let vs_zf = dz.mean > 2.0 * dz.stderr && duz.mean > 2.0 * duz.stderr;
            ok &= vs_uniform && vs_zf;
            parts.push(format!(
                "{preset}@{}dB adaptive-uniform {:+.3} ({:.1} SE), adaptive-ZF {:+.3} ({:.1} SE), uniform-ZF {:+.3} ({:.1} SE){}",
                a.rho0_db,
                du.mean,
                du.mean / du.stderr,
                dz.mean,
                dz.mean / dz.stderr,
                duz.mean,
                duz.mean / duz.stderr,
                if vs_uniform && vs_zf { "" } else { " FAIL" }
            ));
        }
    }
    (ok, parts.join("; "))
}

fn allocation_optimality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut within_gap, mut exact) = (0, 0);
    let n = 1000;
    for _ in 0..n {
        let k = rng.random_range(1..=3);
        let input = AllocationInput {
            b_total: rng.random_range(0..=12),
            weights: (0..k).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect(),
            m: rng.random_range(2..=8),
        };
        let ours = adaptive_bits(&input, Rounding::FloorRepair).expect("allocation");
        let best = exhaustive_model(&input).expect("exhaustive");
        let excess = input.objective(&ours.bits) - input.objective(&best.bits);
        let gap = (0..k).map(|i| input.marginal_gain(i, best.bits[i])).fold(0.0, f64::max);
        if excess <= gap + 1e-12 {
            within_gap += 1;
        }
        if excess <= 1e-12 * input.objective(&best.bits).max(1e-300) {
            exact += 1;
        }
    }
    let (fast, time) = within(start.elapsed(), 60);
    (
        within_gap == n && fast,
        format!("{within_gap}/{n} within one marginal gap, {exact}/{n} exactly optimal, {time}"),
    )
}

fn rvq_bound() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [2usize, 4] {
        for bits in [4u32, 8, 12] {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + bits as u64 * 10 + m as u64);
            let n = 10_000;
            let d: Vec<f64> = (0..n)
                .map(|_| {
                    let h = sample_channel(m, &mut rng).expect("channel");
                    let cb = generate_codebook(bits, m, &mut rng).expect("codebook");
                    quantize_cdi(&h, &cb).expect("quantize").chordal_distance_sq()
                })
                .collect();
            let mean = d.iter().sum::<f64>() / n as f64;
            let se = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
            let bound = quantization_variance(bits, m);
            ok &= mean <= bound;
            // For M = 2 the exact expectation is 1 / (2^B + 1).
            let exact = if m == 2 {
                format!(", exact {:.3e}", 1.0 / (2f64.powi(bits as i32) + 1.0))
            } else {
                String::new()
            };
            parts.push(format!(
                "M={m} B={bits}: {mean:.3e} vs bound {bound:.3e} ({:+.1} SE{exact})",
                (mean - bound) / se
            ));
        }
    }
    let (fast, time) = within(start.elapsed(), 120);
    (ok && fast, format!("{}; {time}", parts.join(", ")))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut ok = true;
    let mut compared = 0;
    for preset in crzf_cli::presets::NAMES {
        let study = load_study(preset).expect("preset").with_trials(24);
        let a = dir.path().join(format!("{preset}-1"));
        let b = dir.path().join(format!("{preset}-3"));
        run_to_dir(preset, &study, &a, Some(1)).expect("run");
        run_to_dir(preset, &study, &b, Some(3)).expect("run");
        for file in ["results.csv", "overlay.csv", "se_grid.csv"] {
            let (pa, pb) = (a.join(file), b.join(file));
            if pa.exists() || pb.exists() {
                compared += 1;
                ok &= std::fs::read(&pa).ok() == std::fs::read(&pb).ok();
            }
        }
    }
    (ok, format!("{compared} CSV files from all presets compared between 1 and 3 workers"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("closed forms agree with the eigenvalue oracle", closed_form_vs_oracle),
        ("analytic identities", analytic_identities),
        ("closed-form SINR overlay within 1.5 dB", overlay_tightness),
        ("scheme ordering at 15 dB", scheme_ordering),
        ("instantaneous bit schemes within 0.3 bps/Hz", instantaneous_schemes_close),
        ("adaptive bits beat uniform; both RZF splits beat the ZF baseline", adaptive_allocation_gains),
        ("integer allocation optimality", allocation_optimality),
        ("RVQ distortion bound", rvq_bound),
        ("byte-identical CSVs across worker counts", determinism),
    ];
    // CRZF_ACCEPTANCE_ONLY=3,8 runs a subset.
    let only: Option<Vec<usize>> = std::env::var("CRZF_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let (mut failed, mut ran) = (0, 0);
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        let (pass, detail) = check();
        failed += usize::from(!pass);
        println!("criterion {} {}: {name}: {detail}", i + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var("CRZF_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
