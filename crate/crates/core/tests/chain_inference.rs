mod common;

use bayeslens_core::chain::{
    build_hmm_expr, build_trace_expr, posterior_parameters, posterior_parameters_hmm, sticky_transition,
    trace_index, HmmModel, MarkovChainModel, Method,
};
use bayeslens_core::{evaluate, normalize, Error, FinStoch, StochasticMatrix};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn random_model(r: &mut impl Rng, s: usize, th: usize) -> MarkovChainModel {
    MarkovChainModel::new(
        random_kernel(r, s * th, s, 0.25),
        random_state(r, s, 0.3),
        random_state(r, th, 0.2),
    )
    .unwrap()
}

/// All traces of length `n` over `card` symbols, in row-major order.
fn all_traces(card: usize, n: usize) -> Vec<Vec<usize>> {
    (0..card.pow(n as u32))
        .map(|mut i| {
            let mut t = vec![0; n];
            for k in (0..n).rev() {
                t[k] = i % card;
                i /= card;
            }
            t
        })
        .collect()
}

/// `P(θ | trace)` by summing the joint over `Θ`.
fn oracle_posterior(m: &MarkovChainModel, trace: &[usize]) -> Option<Vec<f64>> {
    let joint: Vec<f64> = (0..m.theta_card()).map(|th| m.prior.get(0, th) * m.likelihood(trace, th)).collect();
    let z: f64 = joint.iter().sum();
    (z > 1e-12).then(|| joint.iter().map(|v| v / z).collect())
}

/// `P(θ | observations)` by summing over hidden paths.
fn oracle_hmm(m: &HmmModel, obs: &[usize]) -> Vec<f64> {
    let s = m.chain.state_card();
    let joint: Vec<f64> = (0..m.chain.theta_card())
        .map(|th| {
            all_traces(s, obs.len())
                .iter()
                .map(|path| {
                    let emit: f64 = path.iter().zip(obs).map(|(&x, &o)| m.observation.get(x, o)).product();
                    m.chain.likelihood(path, th) * emit
                })
                .sum::<f64>()
                * m.chain.prior.get(0, th)
        })
        .collect();
    let z: f64 = joint.iter().sum();
    joint.iter().map(|v| v / z).collect()
}

fn sticky() -> MarkovChainModel {
    MarkovChainModel::new(
        sticky_transition(2, &[0.9, 0.5]).unwrap(),
        StochasticMatrix::dirac(2, 0).unwrap(),
        StochasticMatrix::uniform(2),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn trace_kernel_factorizes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (s, th, n) = (r.gen_range(1..=4), r.gen_range(1..=5), r.gen_range(1..=5));
        let m = random_model(&mut r, s, th);
        let f = evaluate(&build_trace_expr(&m, n).unwrap(), &FinStoch, &m.bindings()).unwrap();
        prop_assert_eq!(f.dom_card(), th);
        prop_assert!(f.row_sum_residual() <= 1e-12);
        for trace in all_traces(s, n) {
            let col = trace_index(&trace, s).unwrap();
            for theta in 0..th {
                prop_assert!((f.get(theta, col) - m.likelihood(&trace, theta)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn methods_agree_with_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (s, th, n) = (r.gen_range(1..=4), r.gen_range(1..=5), r.gen_range(1..=6));
        let m = random_model(&mut r, s, th);
        let trace: Vec<usize> = (0..n).map(|_| r.gen_range(0..s)).collect();
        match oracle_posterior(&m, &trace) {
            Some(want) => {
                let c = posterior_parameters(&m, &trace, Method::Compositional).unwrap();
                let mono = posterior_parameters(&m, &trace, Method::Monolithic).unwrap();
                for (k, w) in want.iter().enumerate() {
                    prop_assert!((c.on_base()[k] - w).abs() <= 1e-9);
                    prop_assert!((mono.on_base()[k] - w).abs() <= 1e-9);
                }
                prop_assert!((c.state.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                prop_assert_eq!(c.support, mono.support);
            }
            None => {
                let is_zero = matches!(
                    posterior_parameters(&m, &trace, Method::Compositional),
                    Err(Error::ZeroMassObservation { .. })
                );
                prop_assert!(is_zero);
            }
        }
    }
}

#[test]
fn sticky_chain_posterior() {
    let want: f64 = 0.729 / (0.729 + 0.125);
    assert!((want - 0.853629).abs() < 1e-6);
    for method in [Method::Compositional, Method::Monolithic] {
        let post = posterior_parameters(&sticky(), &[0, 0, 0, 0], method).unwrap();
        assert!((post.on_base()[0] - want).abs() <= 1e-9);
        assert_eq!(post.support.indices(), &[0, 1]);
    }
}

#[test]
fn four_step_diagram_has_seven_layers() {
    let m = sticky();
    let nf = normalize(&build_trace_expr(&m, 4).unwrap(), &m.signature()).unwrap();
    assert_eq!(nf.len(), 7);
}

#[test]
fn evidence_grows_with_repeats() {
    let mut last = 0.5;
    for n in 2..=6 {
        let post = posterior_parameters(&sticky(), &vec![0; n], Method::Compositional).unwrap();
        let p0 = post.on_base()[0];
        assert!(p0 > last, "n = {n}: {p0} <= {last}");
        last = p0;
    }
}

#[test]
fn trace_impossible_under_one_parameter() {
    // θ₁ never stays in place
    let m = MarkovChainModel::new(
        sticky_transition(2, &[0.9, 0.0]).unwrap(),
        StochasticMatrix::dirac(2, 0).unwrap(),
        StochasticMatrix::uniform(2),
    )
    .unwrap();
    for method in [Method::Compositional, Method::Monolithic] {
        let post = posterior_parameters(&m, &[0, 0, 0], method).unwrap();
        assert_eq!(post.on_base(), vec![1.0, 0.0]);
        assert_eq!(post.posterior_support(1e-12).unwrap().indices(), &[0]);
    }
}

#[test]
fn trace_impossible_everywhere() {
    assert!(matches!(
        posterior_parameters(&sticky(), &[1, 0], Method::Monolithic),
        Err(Error::ZeroMassObservation { .. })
    ));
}

#[test]
fn hmm_with_identity_observation_is_the_chain() {
    let h = HmmModel::new(sticky(), StochasticMatrix::identity(2)).unwrap();
    let a = posterior_parameters_hmm(&h, &[0, 0, 1, 1], Method::Compositional).unwrap();
    let b = posterior_parameters(&sticky(), &[0, 0, 1, 1], Method::Compositional).unwrap();
    for (x, y) in a.on_base().iter().zip(b.on_base()) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn uninformative_observation_keeps_the_prior() {
    let mut chain = sticky();
    chain.prior = StochasticMatrix::state(vec![0.3, 0.7]).unwrap();
    let h = HmmModel::new(chain, StochasticMatrix::constant(2, &StochasticMatrix::uniform(3))).unwrap();
    let post = posterior_parameters_hmm(&h, &[2, 0, 1], Method::Compositional).unwrap();
    assert!((post.on_base()[0] - 0.3).abs() <= 1e-12);
}

#[test]
fn noisy_observation_matches_enumeration() {
    let noisy = StochasticMatrix::from_rows(vec![vec![0.8, 0.2], vec![0.2, 0.8]]).unwrap();
    let h = HmmModel::new(sticky(), noisy).unwrap();
    let want = oracle_hmm(&h, &[0, 0, 0, 0]);
    for method in [Method::Compositional, Method::Monolithic] {
        let post = posterior_parameters_hmm(&h, &[0, 0, 0, 0], method).unwrap();
        for (x, y) in post.on_base().iter().zip(&want) {
            assert!((x - y).abs() <= 1e-9);
        }
    }
    let nf = normalize(&build_hmm_expr(&h, 4).unwrap(), &h.signature()).unwrap();
    assert!(nf.len() >= 7);
}

#[test]
fn zero_length_trace_is_rejected() {
    assert!(build_trace_expr(&sticky(), 0).is_err());
}
