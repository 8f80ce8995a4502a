//! Independent oracles for values that have no closed form in the library.

use std::f64::consts::PI;

use gibbsflow::field_sampler::{sample_ensemble, OuPrior, PeriodicSampler};
use gibbsflow::flow::{evolve, pushforward_ensemble, FlowConfig};
use gibbsflow::gibbs::CutoffProfile;
use gibbsflow::spaces::{norm_time_holder, norm_x, norm_x_eps, norm_z_parts, NormParams, WeightSpec};
use gibbsflow::spectral::{build_operator, mehler_consistency_reports, mehler_kernel, PotentialKind, TargetGrid};
use gibbsflow::suite::invariance::compare_sections;
use gibbsflow::suite::moments::reference_moment;
use gibbsflow::{Grid1D, LatticeField, SeedStream};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn bracket_integral(power: f64) -> f64 {
    simpson(|x| (1.0 + x * x).powf(-power / 2.0), -200.0, 200.0, 400_000)
}

#[test]
fn wallis_integral_quadrature() {
    let q = bracket_integral(12.0);
    assert!((q - 63.0 * PI / 256.0).abs() < 1e-10, "{q}");
}

#[test]
fn periodic_covariance_is_the_discrete_mode_sum() {
    let c0 = 0.5;
    let l = 100.0;
    let n = 1 << 16;
    let grid = Grid1D::periodic(-PI * l, PI * l, n).unwrap();
    let k_max = n / 2;
    let sampler = PeriodicSampler::new(grid, k_max, OuPrior::new(c0).unwrap()).unwrap();
    for lag in [0.0, 0.25, 0.5, 1.0, 2.0, 3.0] {
        let sum: f64 = (-(k_max as i64)..=k_max as i64)
            .map(|k| {
                let w = if k.unsigned_abs() as usize == k_max { 0.5 } else { 1.0 };
                let kl = k as f64 / l;
                w * (kl * lag).cos() / (l * (1.0 + kl * kl))
            })
            .sum();
        let discrete = c0 / PI * sum;
        assert!((sampler.covariance(lag) - discrete).abs() < 1e-12);
        // Continuum: ∫ cos(n r) / (1 + n²) dn = π e^{-r}; the discarded tail is
        // at most 2 / (π K/L) relative to c0.
        let tail = 2.0 / (PI * k_max as f64 / l) * c0;
        let continuum = c0 * (-lag).exp();
        assert!((discrete - continuum).abs() < tail, "lag {lag}: {discrete} vs {continuum}");
    }
}

#[test]
fn mehler_at_ln2_origin() {
    let v = mehler_kernel(2f64.ln(), 0.0, 0.0).unwrap();
    assert!((v - 0.651_470_015_870_559_9).abs() < 1e-14, "{v}");
}

#[test]
fn grid_semigroup_matches_mehler_at_half() {
    let reports = mehler_consistency_reports(8.0, 399, &[0.5], 4.0).unwrap();
    for r in &reports {
        assert!(r.passed(), "{r:?}");
    }
}

#[test]
fn quartic_2d_energy_under_double_resolution() {
    let g = TargetGrid::new(4.5, 501, 2).unwrap();
    let coarse = build_operator(g, PotentialKind::HarmonicPlusQuartic, None).unwrap();
    let fine = build_operator(g.refined(), PotentialKind::HarmonicPlusQuartic, None).unwrap();
    let diff = (coarse.ground_energy - fine.ground_energy).abs();
    assert!(diff < 1e-4, "{} vs {}", coarse.ground_energy, fine.ground_energy);
}

#[test]
fn harmonic_second_moment_is_one() {
    let m = reference_moment(0.5, 2).unwrap();
    assert!((m - 1.0).abs() < 1e-5, "{m}");
}

#[test]
fn constant_field_norms_tend_to_wallis() {
    let grid = Grid1D::periodic(-400.0, 400.0, 1 << 15).unwrap();
    let one = LatticeField::from_fn(grid, |_| Complex64::new(1.0, 0.0)).unwrap();
    let params = NormParams::default();
    let wallis = 63.0 * PI / 256.0;
    let x = norm_x(&one, &WeightSpec::zero(), &params).unwrap();
    assert!((x * x - wallis).abs() < 1e-8, "{}", x * x);
    let (_, l6) = norm_z_parts(&one, &WeightSpec::zero(), &params).unwrap();
    assert!((l6 - wallis.powf(1.0 / 6.0)).abs() < 1e-8, "{l6}");
}

#[test]
fn high_mode_ratio_is_the_multiplier() {
    let n = 4096;
    let grid = Grid1D::periodic(-200.0, 200.0, n).unwrap();
    let k = grid.wavenumbers()[n / 4];
    let wave = LatticeField::from_fn(grid, |x| Complex64::from_polar(1.0, k * x)).unwrap();
    let params = NormParams::default();
    let ratio = norm_x_eps(&wave, &WeightSpec::zero(), &params).unwrap()
        / norm_x(&wave, &WeightSpec::zero(), &params).unwrap();
    let s = 1.0 + params.epsilon;
    let multiplier = (1.0 + k * k).sqrt().powf(params.sigma * params.epsilon);
    let spatial = (bracket_integral(2.0 * params.x_decay * s) / bracket_integral(2.0 * params.x_decay)).sqrt();
    assert!((ratio - multiplier * spatial).abs() < 1e-8 * ratio, "{ratio} vs {}", multiplier * spatial);
    assert!(ratio < 1.0);
}

#[test]
fn time_holder_norm_is_stable_under_snapshot_doubling() {
    let grid = Grid1D::periodic(-20.0, 20.0, 256).unwrap();
    let u0 = LatticeField::from_fn(grid, |x| Complex64::from_polar((-x * x).exp(), x)).unwrap();
    let params = NormParams::default();
    let holder = |count: usize| {
        let times: Vec<f64> = (0..=count).map(|j| j as f64 / count as f64).collect();
        let cfg = FlowConfig::new(1e-3, 1.0, CutoffProfile::constant(grid, 0.0)).with_dealias(1.0).with_snapshots(times);
        norm_time_holder(&evolve(&u0, &cfg).unwrap().snapshots, &WeightSpec::zero(), &params).unwrap()
    };
    let (a, b) = (holder(16), holder(32));
    assert!(a.is_finite() && a > 0.0);
    assert!((a - b).abs() / b < 0.05, "{a} vs {b}");
}

fn spectrum_moduli(u: &LatticeField) -> Vec<f64> {
    let mut buf = u.values().to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter().map(|c| c.norm()).collect()
}

#[test]
fn linear_flow_preserves_the_gaussian_prior() {
    let grid = Grid1D::periodic(-16.0, 16.0, 256).unwrap();
    let sampler = PeriodicSampler::new(grid, 128, OuPrior::default()).unwrap();
    let initial = sample_ensemble(&sampler, 1000, SeedStream::new(7, 0));
    let cfg = FlowConfig::new(0.004, 1.0, CutoffProfile::constant(grid, 0.0)).with_dealias(1.0);
    let push = pushforward_ensemble(&initial, &cfg).unwrap();
    let later = push.section(1.0);
    assert_eq!(later.len(), initial.len());

    for (a, b) in initial.iter().zip(&later) {
        let (ma, mb) = (spectrum_moduli(a), spectrum_moduli(b));
        let scale = ma.iter().fold(0.0f64, |m, v| m.max(*v));
        assert!(ma.iter().zip(&mb).all(|(x, y)| (x - y).abs() < 1e-10 * scale));
    }

    let cmp = compare_sections(&initial, &later, &[0.0, 4.0, 8.0], 0.01, true).unwrap();
    assert!(cmp.passed(0.01), "{cmp:?}");

    // Complex Gaussian: E|u|^4 = 2 (E|u|^2)^2 and E|u|^2 = 2 * covariance(0).
    let pooled = |p: i32| later.iter().flat_map(|u| u.values().iter().map(move |v| v.norm().powi(p))).sum::<f64>()
        / (later.len() * grid.n_points) as f64;
    let (m2, m4) = (pooled(2), pooled(4));
    assert!((m2 - 2.0 * sampler.covariance(0.0)).abs() < 0.05, "{m2}");
    assert!((m4 / (m2 * m2) - 2.0).abs() < 0.15, "{}", m4 / (m2 * m2));
}
