mod common;

use common::{dense, dense_ll, dense_op, max_diff, random_counts, random_state, rng};
use mpo_tomo::mle::{
    self, log_likelihood, log_likelihood_pure, mixed_step, pure_step, reconstruct, Estimate, Mode, Outcome,
    ReconstructionConfig,
};
use mpo_tomo::oracle;
use mpo_tomo::povm::{MeasurementRecord, PovmKind, PovmSet, SettingRecord, Shots};
use mpo_tomo::sim::State;
use mpo_tomo::states::ghz_mps;
use mpo_tomo::tensor_net::{Mpo, Mps};
use mpo_tomo::TomoError;
use proptest::prelude::*;

/// A bond cap that never truncates an `n`-site operator.
fn lossless(n: usize) -> ReconstructionConfig {
    ReconstructionConfig {
        dmax: 4usize.pow((n / 2) as u32),
        prob_floor: 0.0,
        ..ReconstructionConfig::default()
    }
}

#[test]
fn log_likelihood_of_completely_mixed_state() {
    // Every outcome of an N=2, R=1 setting has probability 1/2.
    let povm = PovmSet::local(2, 1).unwrap();
    let settings = povm
        .settings()
        .into_iter()
        .map(|label| SettingRecord {
            label,
            shots: None,
            counts: Some(vec![3, 1]),
            probabilities: None,
        })
        .collect();
    let rec = MeasurementRecord {
        n_sites: 2,
        block_len: 1,
        povm: PovmKind::Local,
        shots: Shots::Finite(4),
        settings,
    };
    let ll = log_likelihood(&rec, &povm, &Mpo::completely_mixed(2).unwrap(), 0.0).unwrap();
    assert!((ll - 24.0 * 0.5f64.ln()).abs() < 1e-12);
}

#[test]
fn log_likelihood_matches_dense() {
    let mut r = rng(30);
    let povm = PovmSet::local_with_ghz(4, 2).unwrap();
    for _ in 0..5 {
        let rho = random_state(4, 2, &mut r);
        let rec = random_counts(&povm, 40, &mut r);
        let got = log_likelihood(&rec, &povm, &rho, 0.0).unwrap();
        let want = dense_ll(&dense(&rho), &rec, &povm);
        assert!((got - want).abs() < 1e-10 * want.abs());

        let psi = common::random_mps(4, 2, &mut r);
        let got = log_likelihood_pure(&rec, &povm, &psi, 0.0).unwrap();
        let want = dense_ll(&oracle::outer(&psi.to_dense()), &rec, &povm);
        assert!((got - want).abs() < 1e-10 * want.abs());
    }
}

#[test]
fn pure_state_log_likelihood_with_zero_probability_uses_floor() {
    // |00> cannot produce Z- outcomes; observing one is -inf without a floor.
    let psi = Mps::basis_state(&[0, 0], 2).unwrap();
    let povm = PovmSet::local(2, 1).unwrap();
    let mut rec = common::sampled_record(State::Pure(&psi), &povm, 10, 0);
    let z = rec.settings.len() - 1;
    rec.settings[z].counts = Some(vec![9, 1]);
    assert_eq!(log_likelihood_pure(&rec, &povm, &psi, 0.0).unwrap(), f64::NEG_INFINITY);
    let floored = log_likelihood_pure(&rec, &povm, &psi, 1e-6).unwrap();
    assert!(floored.is_finite() && floored < 1e-6f64.ln() + 1e-9);
}

#[test]
fn mixed_step_matches_dense_oracle() {
    let mut r = rng(31);
    for (n, blk, ghz) in [(2, 1, false), (3, 2, false), (4, 2, true), (4, 3, false)] {
        let povm = if ghz {
            PovmSet::local_with_ghz(n, blk).unwrap()
        } else {
            PovmSet::local(n, blk).unwrap()
        };
        let rho = random_state(n, 2, &mut r);
        let rec = random_counts(&povm, 25, &mut r);
        let (next, rep) = mixed_step(&rho, &rec, &povm, &lossless(n)).unwrap();
        let want = oracle::dense_mle_step(&dense_op(&rho), &rec, &povm).unwrap();
        assert!(max_diff(&dense(&next), &want.matrix) < 1e-9, "n={n}");
        assert!((rep.log_likelihood - dense_ll(&dense(&rho), &rec, &povm)).abs() < 1e-9);
    }
}

#[test]
fn pure_step_matches_dense_oracle() {
    let mut r = rng(32);
    for (n, ghz) in [(2, false), (4, false), (4, true), (6, true)] {
        let povm = if ghz {
            PovmSet::local_with_ghz(n, 2).unwrap()
        } else {
            PovmSet::local(n, 2).unwrap()
        };
        let psi = common::random_mps(n, 2, &mut r);
        let rec = random_counts(&povm, 25, &mut r);
        let cfg = ReconstructionConfig {
            dmax: 2usize.pow((n / 2) as u32),
            ..lossless(n)
        };
        let (next, _) = pure_step(&psi, &rec, &povm, &cfg).unwrap();
        let want = oracle::dense_pure_step(&psi.to_dense(), &rec, &povm).unwrap();
        let f = oracle::fidelity_pure_pure(&next.to_dense(), &want);
        assert!((f - 1.0).abs() < 1e-10, "n={n}: {f}");
        assert!((next.norm_sq() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn true_state_is_a_fixed_point_of_exact_data() {
    let mut r = rng(33);
    let povm = PovmSet::local(3, 2).unwrap();
    for _ in 0..5 {
        let rho = random_state(3, 2, &mut r);
        let rec = common::exact_record(State::Mixed(&rho), &povm);
        let (next, _) = mixed_step(&rho, &rec, &povm, &lossless(3)).unwrap();
        assert!(max_diff(&dense(&next), &dense(&rho)) < 1e-8);
    }
}

#[test]
fn completely_mixed_data_converges_after_one_step() {
    let povm = PovmSet::local(4, 2).unwrap();
    let cm = Mpo::completely_mixed(4).unwrap();
    let rec = common::exact_record(State::Mixed(&cm), &povm);
    let out = reconstruct(&rec, &povm, &ReconstructionConfig::default()).unwrap();
    assert_eq!(out.outcome, Outcome::Converged);
    assert_eq!(out.trace.len(), 1);
    let Estimate::Mixed(est) = out.estimate else {
        panic!("expected a mixed estimate");
    };
    assert!(max_diff(&dense(&est), &dense(&cm)) < 1e-12);
}

#[test]
fn steps_stay_positive_with_unit_trace() {
    let mut r = rng(34);
    let povm = PovmSet::local(4, 2).unwrap();
    let rec = random_counts(&povm, 20, &mut r);
    let mut rho = Mpo::completely_mixed(4).unwrap();
    for _ in 0..10 {
        rho = mixed_step(&rho, &rec, &povm, &lossless(4)).unwrap().0;
        let d = dense(&rho);
        assert!((rho.trace() - 1.0).norm() < 1e-12);
        assert!(mpo_tomo::linalg::hermiticity_defect(d.view()) < 1e-12);
        assert!(common::min_eigenvalue(&d) > -1e-12);
    }
}

#[test]
fn diluted_iteration_increases_the_likelihood() {
    let mut r = rng(35);
    let povm = PovmSet::local(3, 2).unwrap();
    let truth = random_state(3, 2, &mut r);
    let rec = common::sampled_record(State::Mixed(&truth), &povm, 50, 1);
    let cfg = ReconstructionConfig {
        dilution: Some(0.05),
        max_iterations: 100,
        loglik_tol: 0.0,
        ..lossless(3)
    };
    let out = reconstruct(&rec, &povm, &cfg).unwrap();
    let mut prev = out.trace.initial_log_likelihood;
    for ll in out.trace.log_likelihoods() {
        assert!(ll >= prev - 1e-9 * prev.abs(), "{ll} < {prev}");
        prev = ll;
    }
}

#[test]
fn iterations_track_the_dense_oracle() {
    let mut r = rng(36);
    for (n, ghz) in [(2, false), (3, false), (4, true)] {
        let povm = if ghz {
            PovmSet::local_with_ghz(n, 2).unwrap()
        } else {
            PovmSet::local(n, 2).unwrap()
        };
        let truth = random_state(n, 2, &mut r);
        let rec = common::sampled_record(State::Mixed(&truth), &povm, 200, 7);
        let cfg = ReconstructionConfig {
            max_iterations: 50,
            loglik_tol: 0.0,
            ..lossless(n)
        };
        let out = reconstruct(&rec, &povm, &cfg).unwrap();
        let Estimate::Mixed(est) = out.estimate else {
            panic!("expected a mixed estimate");
        };
        let mut d = dense_op(&Mpo::completely_mixed(n).unwrap());
        for _ in 0..out.trace.len() {
            d = oracle::dense_mle_step(&d, &rec, &povm).unwrap();
        }
        assert!(max_diff(&dense(&est), &d.matrix) < 1e-6, "n={n}");
        let last = *out.trace.log_likelihoods().last().unwrap();
        assert!((last - dense_ll(&d.matrix, &rec, &povm)).abs() < 1e-6 * last.abs());
    }
}

#[test]
fn pure_mode_recovers_a_product_state() {
    let psi = Mps::basis_state(&[0, 1, 1, 0], 2).unwrap();
    let povm = PovmSet::local(4, 2).unwrap();
    let rec = common::exact_record(State::Pure(&psi), &povm);
    let cfg = ReconstructionConfig {
        mode: Mode::Pure,
        dmax: 2,
        max_iterations: 300,
        seed: 5,
        ..ReconstructionConfig::default()
    };
    let out = reconstruct(&rec, &povm, &cfg).unwrap();
    let Estimate::Pure(est) = out.estimate else {
        panic!("expected a pure estimate");
    };
    assert!(mpo_tomo::metrics::fidelity_pure_pure(&psi, &est).unwrap() > 0.99);
    // The start is reproducible from the seed.
    let a = mle::pure_initial_state(4, 5).unwrap();
    let b = mle::pure_initial_state(4, 5).unwrap();
    assert_eq!(a.sites(), b.sites());
}

#[test]
fn ghz_with_bond_one_aborts() {
    let psi = ghz_mps(4, 0.3).unwrap();
    let povm = PovmSet::local_with_ghz(4, 2).unwrap();
    let rec = common::exact_record(State::Pure(&psi), &povm);
    let cfg = ReconstructionConfig {
        dmax: 1,
        max_iterations: 5,
        ..ReconstructionConfig::default()
    };
    let out = reconstruct(&rec, &povm, &cfg).unwrap();
    let Outcome::Aborted {
        relative_error,
        threshold,
    } = out.outcome
    else {
        panic!("expected an abort, got {:?}", out.outcome);
    };
    assert!(relative_error > threshold);
    assert!(matches!(out.estimate, Estimate::Mixed(_)));
}

#[test]
fn budget_and_trace_export() {
    let mut r = rng(37);
    let povm = PovmSet::local(3, 2).unwrap();
    let rec = random_counts(&povm, 20, &mut r);
    let cfg = ReconstructionConfig {
        max_iterations: 7,
        loglik_tol: 0.0,
        ..lossless(3)
    };
    let out = reconstruct(&rec, &povm, &cfg).unwrap();
    assert_eq!(out.outcome, Outcome::BudgetExhausted);
    assert_eq!(out.trace.len(), 7);
    let csv = out.trace.to_csv();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 8);
    assert!(lines[0].starts_with("iter,log_likelihood"));
    assert!(lines[1].starts_with("1,"));
    for rec in &out.trace.records {
        assert!(rec.trace_deviation < 1e-12);
        assert!(rec.compression_error.unwrap() < 1e-12);
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    let povm = PovmSet::local(3, 2).unwrap();
    let rec = common::exact_record(State::Mixed(&Mpo::completely_mixed(3).unwrap()), &povm);
    for cfg in [
        ReconstructionConfig {
            dmax: 0,
            ..Default::default()
        },
        ReconstructionConfig {
            max_iterations: 0,
            ..Default::default()
        },
        ReconstructionConfig {
            dilution: Some(0.0),
            ..Default::default()
        },
    ] {
        assert!(matches!(reconstruct(&rec, &povm, &cfg), Err(TomoError::Parameter(_))));
    }
    let other = PovmSet::local(4, 2).unwrap();
    assert!(reconstruct(&rec, &other, &ReconstructionConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn diluted_steps_never_decrease_likelihood(seed in any::<u64>()) {
        let mut r = rng(seed);
        let povm = PovmSet::local(3, 2).unwrap();
        let rec = random_counts(&povm, 10, &mut r);
        let cfg = ReconstructionConfig { dilution: Some(0.01), ..lossless(3) };
        let mut rho = random_state(3, 2, &mut r);
        let mut ll = log_likelihood(&rec, &povm, &rho, 0.0).unwrap();
        for _ in 0..5 {
            rho = mixed_step(&rho, &rec, &povm, &cfg).unwrap().0;
            let next = log_likelihood(&rec, &povm, &rho, 0.0).unwrap();
            prop_assert!(next >= ll - 1e-9 * ll.abs());
            ll = next;
        }
    }

    #[test]
    fn steps_preserve_trace_and_positivity(seed in any::<u64>(), dmax in 1usize..5) {
        let mut r = rng(seed);
        let povm = PovmSet::local(4, 2).unwrap();
        let rec = random_counts(&povm, 10, &mut r);
        let cfg = ReconstructionConfig {
            dmax,
            compress: mpo_tomo::tensor_net::CompressOptions { abort_threshold: None, ..Default::default() },
            ..lossless(4)
        };
        let rho = random_state(4, 2, &mut r);
        let (next, _) = mixed_step(&rho, &rec, &povm, &cfg).unwrap();
        prop_assert!((next.trace() - 1.0).norm() < 1e-12);
        prop_assert!(next.max_bond() <= dmax);
    }
}
