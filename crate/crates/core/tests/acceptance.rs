//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p sphere-lrd --test acceptance`.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sphere_lrd::harness::{
    run_consistency_experiment, run_power_experiment, run_size_experiment, ExperimentConfig,
    RunOptions, Scenario, SieveRule,
};
use sphere_lrd::observe::{observe, sample_uniform_sphere};
use sphere_lrd::reconstruct::reconstruct_series;
use sphere_lrd::simulate::{null_spharma11_model, simulate_series, SpectralModel};
use sphere_lrd::spectra::{fdft, fejer, fourier_frequency, FourierCache, WeightKernel};
use sphere_lrd::stats::{ks_pvalue, ks_statistic, normal_cdf};
use sphere_lrd::{CoefficientSeries, HarmonicIndex, SieveBasis};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn fmt(xs: &[f64]) -> String {
    let v: Vec<String> = xs.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", v.join(", "))
}

fn size_under_null() -> Verdict {
    let cfg = ExperimentConfig {
        len: 500,
        gamma: 0.45,
        beta: 0.25,
        sigma2: 0.5,
        reps: 200,
        seed: 20_240_501,
        ..ExperimentConfig::size_defaults()
    };
    let t = run_size_experiment(&cfg, &RunOptions::default()).expect("size study");
    let rates = &t.rows[0].values;
    let pass = rates.iter().all(|r| (r - 0.05).abs() <= 0.03 + 1e-12);
    verdict(pass, format!("rates {} within 0.05 ± 0.03", fmt(rates)))
}

fn power_example(id: u8, len: usize, reps: usize, level: f64, needed: usize) -> Verdict {
    let cfg = ExperimentConfig {
        len,
        gamma: 0.3704,
        scenario: Scenario::Example(id),
        reps,
        seed: 20_240_502 + id as u64,
        ..ExperimentConfig::power_defaults()
    };
    let t = run_power_experiment(&cfg, &RunOptions::default()).expect("power study");
    let rates = &t.rows[0].values;
    let hits = rates.iter().filter(|&&r| r >= level).count();
    verdict(
        hits >= needed,
        format!("rates {}; {hits} of 6 ≥ {level} (need {needed})", fmt(rates)),
    )
}

fn consistency() -> Verdict {
    let cfg = ExperimentConfig {
        t_grid: vec![1000, 5000, 10_000],
        reps: 20,
        seed: 20_240_504,
        ..ExperimentConfig::consistency_defaults()
    };
    assert_eq!(cfg.sieve, SieveRule::Budget(15));
    let t = run_consistency_experiment(&cfg, &RunOptions::default()).expect("consistency study");
    let norms: Vec<f64> = t.rows.iter().map(|r| r.values[0]).collect();
    let increasing = norms.windows(2).all(|w| w[1] > w[0]);
    let anchor = 1.8669e5;
    let magnitude = norms[0] >= anchor / 10.0 && norms[0] <= anchor * 10.0;
    let ratio = norms[2] / norms[0];
    verdict(
        increasing && magnitude && ratio >= 50.0,
        format!(
            "medians {:?}; increasing={increasing}, T=1000 within 10x of 1.8669e5={magnitude}, ratio {ratio:.2} (need ≥ 50)",
            norms.iter().map(|n| format!("{n:.4e}")).collect::<Vec<_>>()
        ),
    )
}

fn reconstruction() -> Verdict {
    // Noiseless recovery of a series living in the sieve.
    let sieve = SieveBasis::new(2);
    let model = null_spharma11_model(sieve);
    let truth = simulate_series(&model, 50, 500, 1).unwrap();
    let locs = sample_uniform_sphere(200, 2).unwrap();
    let obs = observe(&truth, &locs, 0.0, 3).unwrap();
    let rec = reconstruct_series(&obs, sieve).unwrap();
    let exact = (rec.values() - truth.values()).amax();

    // Noisy recovery of a process spanned by the k = 9 sieve.
    let sigma2 = 0.125;
    let k = sieve.size();
    let len = 50;
    let reps = 200;
    let mut mse = Vec::new();
    for m in [200usize, 800, 3200] {
        let mut acc = 0.0;
        for r in 0..reps {
            let seed = 10_000 * m as u64 + r;
            let truth = simulate_series(&model, len, 500, seed).unwrap();
            let locs = sample_uniform_sphere(m, seed + 1).unwrap();
            let obs = observe(&truth, &locs, sigma2, seed + 2).unwrap();
            let rec = reconstruct_series(&obs, sieve).unwrap();
            acc += (rec.values() - truth.values()).norm_squared() / len as f64;
        }
        mse.push(acc / reps as f64);
    }
    let decreasing = mse.windows(2).all(|w| w[1] < w[0]);
    let prediction = sigma2 * k as f64 / 800.0;
    let bounded = mse[2] <= 4.0 * prediction;
    verdict(
        exact < 1e-8 && decreasing && bounded,
        format!(
            "noiseless max error {exact:.2e}; MSE along M=200,800,3200 {} decreasing={decreasing}; at M=3200 {:.3e} ≤ 4·σ²k/800 = {:.3e}",
            fmt(&mse),
            mse[2],
            4.0 * prediction
        ),
    )
}

fn random_series(len: usize, n: usize, seed: u64) -> CoefficientSeries {
    let sieve = SieveBasis::new(n);
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let vals = DMatrix::from_fn(len, sieve.size(), |_, _| r.sample(StandardNormal));
    CoefficientSeries::new(sieve, vals).unwrap()
}

fn spectral_invariants() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;

    // Parseval against the time-domain energy.
    let s = random_series(257, 2, 11);
    let lhs: f64 = (0..257)
        .map(|j| fdft(&s, fourier_frequency(257, j)).norm_sqr())
        .sum();
    let rhs = s.values().norm_squared() / (2.0 * PI);
    let parseval = (lhs / rhs - 1.0).abs();
    ok &= parseval < 1e-8;
    notes.push(format!("parseval {parseval:.1e}"));

    // Closed-form Fejér kernel against the brute-force sum.
    let mut r = ChaCha8Rng::seed_from_u64(12);
    let mut fej = 0.0f64;
    for _ in 0..100 {
        let w: f64 = r.random_range(-PI..PI);
        let sum: Complex64 = (0..32).map(|t| Complex64::from_polar(1.0, -w * t as f64)).sum();
        fej = fej.max((fejer(32, w) - sum.norm_sqr() / 32.0).abs());
    }
    ok &= fej < 1e-10;
    notes.push(format!("fejer {fej:.1e}"));

    // Normalization of the Fejér kernel by trapezoid quadrature.
    let nodes = 1 << 16;
    let h = 2.0 * PI / nodes as f64;
    let mut mass = 0.0f64;
    for t in [1usize, 4, 16] {
        let q: f64 = (0..=nodes)
            .map(|i| {
                let w = if i == 0 || i == nodes { 0.5 } else { 1.0 };
                w * fejer(t, -PI + i as f64 * h)
            })
            .sum::<f64>()
            * h
            / (2.0 * PI);
        mass = mass.max((q - 1.0).abs());
    }
    ok &= mass < 1e-6;
    notes.push(format!("fejer mass {mass:.1e}"));

    // Weighted periodogram: Hermitian and positive semidefinite.
    let s = random_series(400, 2, 13);
    let cache = FourierCache::new(&s);
    let wk = WeightKernel::for_length(400, 0.25).unwrap();
    let mut herm = 0.0f64;
    let mut neg = 0.0f64;
    for w in [0.0, 0.3, 1.0, 2.5] {
        let f = cache.weighted_periodogram(w, &wk);
        let tr = f.trace().re;
        herm = herm.max(f.hermitian_defect() / tr);
        neg = neg.max(-f.hermitian_eigenvalues()[0] / tr);
    }
    ok &= herm <= 1e-12 && neg <= 1e-12;
    notes.push(format!("hermitian {herm:.1e}, negative eig {neg:.1e} (relative to trace)"));

    // Conjugate symmetry of the transform.
    let mut sym = 0.0f64;
    for w in [0.1, 0.9, 2.2, 3.1] {
        let a = fdft(&s, w);
        let b = fdft(&s, -w);
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            sym = sym.max((x - y.conj()).norm());
        }
    }
    ok &= sym < 1e-12;
    notes.push(format!("conjugate symmetry {sym:.1e}"));
    verdict(ok, notes.join("; "))
}

fn simulation_oracle() -> Verdict {
    // Low-frequency slope of a pure fractional channel.
    let alpha = 0.4;
    let model = SpectralModel::new(0, vec![vec![]], vec![vec![]], vec![1.0], vec![alpha]).unwrap();
    let len = 1 << 16;
    let top = ((len / 2) as f64 * 0.02) as i64;
    let reps = 8;
    let mut logp = vec![0.0; top as usize];
    for r in 0..reps {
        let s = simulate_series(&model, len, 500, 700 + r).unwrap();
        let cache = FourierCache::new(&s);
        for j in 1..=top {
            logp[(j - 1) as usize] += cache.coefficient(j, 0).norm_sqr().ln() / reps as f64;
        }
    }
    let xs: Vec<f64> = (1..=top).map(|j| fourier_frequency(len, j).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = logp.iter().sum::<f64>() / n;
    let slope = xs.iter().zip(&logp).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let slope_ok = (slope + alpha).abs() <= 0.15;

    // Short-memory channels against the SPHARMA(1,1) spectra.
    let sieve = SieveBasis::new(2);
    let model = null_spharma11_model(sieve);
    let len = 1 << 14;
    let wk = WeightKernel::for_length(len, 0.25).unwrap();
    let freqs = [0.5, 1.0, 1.5, 2.0, 2.5];
    let reps = 200;
    let mut avg = DMatrix::<f64>::zeros(freqs.len(), sieve.size());
    for r in 0..reps {
        let s = simulate_series(&model, len, 500, 9000 + r).unwrap();
        let cache = FourierCache::new(&s);
        for (i, &w) in freqs.iter().enumerate() {
            let f = cache.weighted_periodogram(w, &wk);
            for c in 0..sieve.size() {
                avg[(i, c)] += f.entries[(c, c)].re / reps as f64;
            }
        }
    }
    let mut worst = 0.0f64;
    for (i, &w) in freqs.iter().enumerate() {
        for c in 0..sieve.size() {
            let f = model.theoretical_spectrum(HarmonicIndex::from_flat(c), w).unwrap();
            worst = worst.max((avg[(i, c)] / f - 1.0).abs());
        }
    }
    verdict(
        slope_ok && worst <= 0.10,
        format!("slope {slope:.4} (target -0.4 ± 0.15); worst relative spectral error {worst:.4} (≤ 0.10)"),
    )
}

fn null_gaussianity() -> Verdict {
    let cfg = ExperimentConfig {
        len: 2000,
        gamma: 0.45,
        sigma2: 0.5,
        reps: 200,
        seed: 20_240_508,
        ..ExperimentConfig::size_defaults()
    };
    let t = run_size_experiment(&cfg, &RunOptions::default()).expect("size study");
    let z: Vec<f64> = t.rows[0].replicates.iter().map(|z| z[0]).collect();
    let d = ks_statistic(&z, normal_cdf);
    let p = ks_pvalue(d, z.len());
    verdict(p > 0.01, format!("KS distance {d:.4}, p-value {p:.4} (> 0.01)"))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("C1 size under SPHARMA(1,1) null, T=500", size_under_null),
        ("C2 power, example 1, T=500", || power_example(1, 500, 200, 0.90, 5)),
        ("C3 power, example 3, T=1000", || power_example(3, 1000, 100, 0.95, 6)),
        ("C4 consistency divergence, example 1", consistency),
        ("C5 reconstruction rate", reconstruction),
        ("C6 spectral invariants", spectral_invariants),
        ("C7 simulation oracle", simulation_oracle),
        ("C8 null Gaussianity, T=2000", null_gaussianity),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let status = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failed += 1;
        }
        println!("{status} {name}: {} [{:.1}s]", v.detail, start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
