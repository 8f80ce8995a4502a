use std::collections::BTreeMap;

use gibbsflow::cli::config::{parse_config_text, ExperimentConfig, Preset, KNOWN_KEYS};
use gibbsflow::field_sampler::{sample_ou_line, sample_ou_periodic};
use gibbsflow::flow::{evolve, FlowConfig};
use gibbsflow::gibbs::CutoffProfile;
use gibbsflow::report::{write_reports_csv, StatReport};
use gibbsflow::spaces::{fractional_derivative, norm_x, norm_z, NormParams, WeightSpec};
use gibbsflow::spectral::{build_operator, mehler_kernel, semigroup_kernel, PotentialKind, TargetGrid};
use gibbsflow::stats::{ks_one_sample, ks_two_sample};
use gibbsflow::{Grid1D, LatticeField, SeedStream};
use num_complex::Complex64;
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

fn smooth_field(grid: Grid1D, coeffs: &[(f64, f64)]) -> LatticeField {
    let l = grid.length();
    LatticeField::from_fn(grid, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(m, (a, b))| {
                let k = 2.0 * std::f64::consts::PI * m as f64 / l;
                Complex64::new(*a, *b) * Complex64::from_polar(1.0, k * x)
            })
            .sum()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn sampler_is_bit_reproducible(seed in any::<u64>(), stream in 0u64..1000, n in 8usize..200) {
        let grid = Grid1D::line(-4.0, 4.0, n).unwrap();
        let a = sample_ou_line(grid, SeedStream::new(seed, stream)).unwrap();
        let b = sample_ou_line(grid, SeedStream::new(seed, stream)).unwrap();
        prop_assert_eq!(a.values(), b.values());
        let c = sample_ou_line(grid, SeedStream::new(seed, stream + 1)).unwrap();
        prop_assert_ne!(a.values(), c.values());
        let p = Grid1D::periodic(-4.0, 4.0, 64).unwrap();
        let d = sample_ou_periodic(p, 32, SeedStream::new(seed, stream)).unwrap();
        let e = sample_ou_periodic(p, 32, SeedStream::new(seed, stream)).unwrap();
        prop_assert_eq!(d.values(), e.values());
    }

    #[test]
    fn norms_are_homogeneous_and_subadditive(
        seed in any::<u64>(),
        scale in -5.0f64..5.0,
        phase in 0.0f64..6.3,
    ) {
        let grid = Grid1D::periodic(-8.0, 8.0, 128).unwrap();
        let u = sample_ou_periodic(grid, 64, SeedStream::new(seed, 0)).unwrap();
        let v = sample_ou_periodic(grid, 64, SeedStream::new(seed, 1)).unwrap();
        let w = WeightSpec::power_law(2.0).unwrap();
        let p = NormParams::default();
        let c = Complex64::from_polar(scale, phase);
        for norm in [norm_x, norm_z] {
            let nu = norm(&u, &w, &p).unwrap();
            let nv = norm(&v, &w, &p).unwrap();
            let ncu = norm(&u.scaled(c), &w, &p).unwrap();
            prop_assert!((ncu - scale.abs() * nu).abs() <= 1e-10 * (1.0 + nu));
            let sum = LatticeField::new(grid, u.values().iter().zip(v.values()).map(|(a, b)| a + b).collect()).unwrap();
            prop_assert!(norm(&sum, &w, &p).unwrap() <= nu + nv + 1e-10);
        }
    }

    #[test]
    fn multiplier_scales_fourier_modes(m in -20i32..20, order in -3.0f64..3.0) {
        let grid = Grid1D::periodic(-4.0, 4.0, 64).unwrap();
        let k = 2.0 * std::f64::consts::PI * m as f64 / grid.length();
        let f = LatticeField::from_fn(grid, |x| Complex64::from_polar(1.0, k * x)).unwrap();
        let d = fractional_derivative(&f, order).unwrap();
        let factor = (1.0 + k * k).powf(order / 2.0);
        for (a, b) in d.iter().zip(f.values()) {
            prop_assert!((a - b * factor).norm() <= 1e-12 * factor.max(1.0));
        }
    }

    #[test]
    fn eigenpairs_are_orthonormal(n_u in 16usize..80, u_max in 4.0f64..8.0, quartic in any::<bool>()) {
        let kind = if quartic { PotentialKind::HarmonicPlusQuartic } else { PotentialKind::Harmonic };
        let op = build_operator(TargetGrid::new(u_max, n_u, 1).unwrap(), kind, None).unwrap();
        let n = op.n_modes().min(10);
        prop_assert!(op.orthonormality_defect(n) < 1e-10);
        prop_assert!(op.residual(n) < 1e-8);
        prop_assert!(op.ground_state.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn semigroup_fixes_the_ground_state(s in 0.05f64..2.0, quartic in any::<bool>()) {
        let kind = if quartic { PotentialKind::HarmonicPlusQuartic } else { PotentialKind::Harmonic };
        let op = build_operator(TargetGrid::new(6.0, 61, 1).unwrap(), kind, None).unwrap();
        let k = semigroup_kernel(&op, s, op.n_modes()).unwrap();
        let out = k.apply(&op.ground_state);
        for (a, b) in out.iter().zip(&op.ground_state) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        prop_assert!(k.symmetry_defect() < 1e-12);
    }

    #[test]
    fn mehler_kernel_is_symmetric_and_positive(x in 0.01f64..10.0, a in -6.0f64..6.0, b in -6.0f64..6.0) {
        let q = mehler_kernel(x, a, b).unwrap();
        prop_assert!(q >= 0.0);
        prop_assert!((q - mehler_kernel(x, b, a).unwrap()).abs() <= 1e-13 * q);
        // Ground state π^{-1/4} e^{-u²/2} is fixed: ∫ Q_x(a, u) Ω(u) du = Ω(a).
        let omega = |u: f64| std::f64::consts::PI.powf(-0.25) * (-0.5 * u * u).exp();
        let integral = gibbsflow::numerics::integrate(|u| mehler_kernel(x, a, u).unwrap() * omega(u), -14.0, 14.0, 20, 200);
        prop_assert!((integral - omega(a)).abs() < 1e-9);
    }

    #[test]
    fn flow_conserves_mass_and_reverses(
        coeffs in prop::collection::vec((-0.5f64..0.5, -0.5f64..0.5), 1..5),
        g in 0.0f64..3.0,
    ) {
        let grid = Grid1D::periodic(-std::f64::consts::PI, std::f64::consts::PI, 64).unwrap();
        let u0 = smooth_field(grid, &coeffs);
        let chi = CutoffProfile::smooth(1.5, 0.5, grid).unwrap();
        let fwd = evolve(&u0, &FlowConfig::new(1e-3, 0.2, chi.clone()).with_coupling(g).with_dealias(1.0)).unwrap();
        prop_assert!(fwd.max_mass_drift() < 1e-10);
        let u1 = fwd.at(0.2).unwrap().clone();
        let back = evolve(&u1, &FlowConfig::new(1e-3, 0.2, chi).with_coupling(g).with_dealias(1.0).with_snapshots(vec![-0.2])).unwrap();
        let err = back.at(-0.2).unwrap().sub(&u0).unwrap().values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-6);
    }

    #[test]
    fn plane_waves_are_exact(m in -6i32..6, amp in 0.0f64..1.0, g in -2.0f64..2.0) {
        let grid = Grid1D::periodic(-std::f64::consts::PI, std::f64::consts::PI, 32).unwrap();
        let k = m as f64;
        let u0 = LatticeField::from_fn(grid, |x| Complex64::from_polar(amp, k * x)).unwrap();
        let t = 0.3;
        let cfg = FlowConfig::new(1e-3, t, CutoffProfile::constant(grid, 1.0)).with_coupling(g).with_dealias(1.0);
        let u = evolve(&u0, &cfg).unwrap();
        let w = k * k + g * amp * amp;
        for (x, v) in grid.points().iter().zip(u.at(t).unwrap().values()) {
            prop_assert!((v - Complex64::from_polar(amp, k * x - w * t)).norm() < 1e-9);
        }
    }

    #[test]
    fn ks_statistics_are_bounded(a in prop::collection::vec(-3.0f64..3.0, 1..60), b in prop::collection::vec(-3.0f64..3.0, 1..60)) {
        let two = ks_two_sample(&a, &b);
        prop_assert!((0.0..=1.0).contains(&two.statistic));
        prop_assert!((0.0..=1.0).contains(&two.p_value));
        let self_test = ks_two_sample(&a, &a);
        prop_assert_eq!(self_test.statistic, 0.0);
        let one = ks_one_sample(&a, |x| ((x + 3.0) / 6.0).clamp(0.0, 1.0));
        prop_assert!((0.0..=1.0).contains(&one.statistic));
    }

    #[test]
    fn unknown_config_keys_are_rejected(section in "[a-z]{1,8}", key in "[a-z_]{1,12}", value in "[0-9.]{1,6}") {
        let full = format!("{section}.{key}");
        let text = format!("[{section}]\n{key} = {value}\n");
        let parsed = parse_config_text(&text);
        if KNOWN_KEYS.contains(&full.as_str()) {
            prop_assert!(parsed.is_ok());
        } else {
            let err = parsed.unwrap_err().to_string();
            prop_assert!(err.contains(&full));
        }
    }

    #[test]
    fn config_hash_depends_only_on_content(seed_a in any::<u64>(), seed_b in any::<u64>(), dt in 1e-4f64..1e-2) {
        let mut o = BTreeMap::new();
        o.insert("numerics.dt".to_string(), format!("{dt}"));
        let a = ExperimentConfig::new(Preset::Invariance, "a", seed_a).with_overrides(o.clone()).unwrap();
        let b = ExperimentConfig::new(Preset::Invariance, "b", seed_b).with_overrides(o).unwrap();
        prop_assert_eq!(a.config_hash(), b.config_hash());
        let reparsed = parse_config_text(&a.canonical_text().replace("preset = invariance\n", "")).unwrap();
        prop_assert_eq!(&reparsed, &a.overrides);
    }

    #[test]
    fn report_csv_round_trips(name in "[a-z_]{1,10}", obs in "[ -~]{0,20}", est in -1e6f64..1e6, seed in any::<u64>()) {
        let r = StatReport::new(name.clone(), obs.clone()).param("N", 2).values(est, 0.5, 1.0).verdict(true);
        let mut buf = Vec::new();
        write_reports_csv(&[r], Some((seed, "abc")), &mut buf).unwrap();
        let mut reader = csv::Reader::from_reader(buf.as_slice());
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        prop_assert_eq!(rows.len(), 1);
        prop_assert_eq!(&rows[0][0], name.as_str());
        prop_assert_eq!(&rows[0][1], obs.as_str());
        prop_assert_eq!(rows[0][3].parse::<f64>().unwrap(), est);
        let seed_text = seed.to_string();
        prop_assert_eq!(&rows[0][10], seed_text.as_str());
        prop_assert_eq!(&rows[0][11], "abc");
    }
}
