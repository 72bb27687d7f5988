//! Invariants over randomly drawn parameters.

use proptest::prelude::*;
use ris_secrecy::analysis::{
    equivalent_stats, phase_charfun, product_pdf_detailed, total_phase_error_pdf, HopFading, Receiver,
    DEFAULT_MIXTURE_ORDER,
};
use ris_secrecy::channel::{sample_realization, trial_rng, ErrorMode, PhaseErrorModel, SystemParams};
use ris_secrecy::linalg::ComplexVector;
use ris_secrecy::montecarlo::{mc_esr, PhasePolicy};
use ris_secrecy::optimize::{discretize_phases, extract_rank_one, solve_sdp, SdpOptions, SdrProblem};
use std::f64::consts::PI;

fn error_model() -> impl Strategy<Value = PhaseErrorModel> {
    (prop::option::of(1u32..=4), 0.5f64..20.0, any::<bool>()).prop_map(|(bits, kappa, p2)| {
        let mode = if p2 { ErrorMode::P2 } else { ErrorMode::P1 };
        PhaseErrorModel::new(bits, kappa, mode).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn product_densities_are_nonnegative(
        n in 2usize..120,
        su in 0.05f64..0.3,
        se in 0.05f64..0.3,
        frac in 0.02f64..6.0,
        bits in 1u32..=3,
    ) {
        let cfg = SystemParams { elements: n, sigma_j_u: su, sigma_j_e: se, bits: Some(bits), ..SystemParams::default() }
            .build()
            .unwrap();
        let stats = equivalent_stats(n, &cfg.phase_error).unwrap();
        let fu = HopFading::new(&cfg.turbulence_u, &cfg.pointing_u, DEFAULT_MIXTURE_ORDER).unwrap();
        let fe = HopFading::new(&cfg.turbulence_e, &cfg.pointing_e, DEFAULT_MIXTURE_ORDER).unwrap();
        let zu = frac * fu.mean() * stats.phi1;
        let ze = frac * fe.mean() * stats.var_ec.sqrt();
        let du = product_pdf_detailed(zu, &fu, &stats, Receiver::User).unwrap().value;
        let de = product_pdf_detailed(ze, &fe, &stats, Receiver::Eavesdropper).unwrap().value;
        prop_assert!(du >= 0.0 && du.is_finite());
        prop_assert!(de >= 0.0 && de.is_finite());
    }

    #[test]
    fn characteristic_function_is_bounded(model in error_model(), p in 1u32..=2) {
        let phi = phase_charfun(&model, p).unwrap();
        prop_assert!(phi.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn phase_error_density_is_nonnegative(bits in 1u32..=4, kappa in 0.5f64..20.0, x in -5.0f64..5.0) {
        let model = PhaseErrorModel::new(Some(bits), kappa, ErrorMode::P2).unwrap();
        let f = total_phase_error_pdf(x, &model).unwrap();
        prop_assert!(f >= 0.0 && f.is_finite());
    }

    #[test]
    fn discretized_phases_lie_on_the_grid(phases in prop::collection::vec(-10.0f64..10.0, 1..12), bits in 1u32..=4) {
        let t = ComplexVector::from_phases(&phases).unwrap();
        let (v, p) = discretize_phases(&t, Some(bits)).unwrap();
        let step = 2.0 * PI / f64::from(1u32 << bits);
        for (z, &ph) in v.entries().iter().zip(&p) {
            prop_assert!((z.norm() - 1.0).abs() < 1e-12);
            let k = ph / step;
            prop_assert!((k - k.round()).abs() < 1e-9, "phase {ph} is not a multiple of {step}");
            prop_assert!((0.0..2.0 * PI).contains(&ph));
        }
    }

    #[test]
    fn relaxation_is_scale_invariant(
        n in 2usize..6,
        seed in any::<u64>(),
        gu in 0.1f64..50.0,
        ge in 0.1f64..50.0,
        scale in 0.05f64..20.0,
    ) {
        use rand::Rng;
        let mut rng = trial_rng(seed, 0);
        let mut draw = || ComplexVector::from_phases(&(0..n).map(|_| 2.0 * PI * rng.gen::<f64>()).collect::<Vec<_>>()).unwrap();
        let (u, e) = (draw(), draw());
        let a = SdrProblem::new(u, e, gu, ge).unwrap();
        let mut b = a.clone();
        b.lambda_u = a.lambda_u.scaled(scale);
        b.lambda_e = a.lambda_e.scaled(scale);
        let sa = solve_sdp(&a, SdpOptions::default()).unwrap();
        let sb = solve_sdp(&b, SdpOptions::default()).unwrap();
        prop_assert!((sa.objective - sb.objective).abs() <= 1e-6 * sa.objective);
        let ra = a.ratio(&extract_rank_one(&sa).unwrap()).unwrap();
        let rb = a.ratio(&extract_rank_one(&sb).unwrap()).unwrap();
        prop_assert!((ra - rb).abs() <= 1e-6 * ra, "{ra} vs {rb}");
    }
}

#[test]
fn monte_carlo_is_independent_of_worker_count() {
    let cfg = SystemParams { elements: 16, ..SystemParams::default() }.build().unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_esr(&cfg, PhasePolicy::Baseline, 2000, 42).unwrap())
    };
    let one = run(1);
    for threads in [2, 3, 7] {
        let other = run(threads);
        assert_eq!(one.mean.to_bits(), other.mean.to_bits());
        assert_eq!(one.standard_error.to_bits(), other.standard_error.to_bits());
    }
}

#[test]
fn realizations_depend_only_on_seed_and_trial() {
    let cfg = SystemParams { elements: 8, mode: ErrorMode::P2, ..SystemParams::default() }.build().unwrap();
    let a = sample_realization(&cfg, &mut trial_rng(9, 3));
    let b = sample_realization(&cfg, &mut trial_rng(9, 3));
    let c = sample_realization(&cfg, &mut trial_rng(9, 4));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn standard_error_shrinks_as_inverse_root_of_trials() {
    let cfg = SystemParams { elements: 20, ..SystemParams::default() }.build().unwrap();
    let se: Vec<f64> = [1_000, 10_000, 100_000]
        .iter()
        .map(|&t| mc_esr(&cfg, PhasePolicy::Baseline, t, 5).unwrap().standard_error)
        .collect();
    for w in se.windows(2) {
        let ratio = w[0] / w[1];
        let expected = 10f64.sqrt();
        assert!((ratio / expected - 1.0).abs() < 0.2, "ratio {ratio} vs {expected}");
    }
}
