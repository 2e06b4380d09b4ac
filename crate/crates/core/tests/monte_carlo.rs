use gaussblab::bineq::deficit;
use gaussblab::corpus::{closed_form_corpus, polytope_ellipsoid_corpus};
use gaussblab::gauss::{closed_form_measure, measure, moments, Engine};
use gaussblab::mgm::{log_concavity_probe, mgm_solve, MgmOptions};
use gaussblab::corpus::random_traceless;
use gaussblab::{SampleConfig, SymmetricBody};

#[test]
fn monte_carlo_matches_closed_forms() {
    for (i, e) in closed_form_corpus(16, 2).iter().enumerate() {
        let exact = closed_form_measure(&e.body).unwrap();
        let mc = measure(&e.body, Engine::MonteCarlo(SampleConfig::new(i as u64, 100_000))).unwrap();
        assert!((mc.value - exact).abs() <= 4.0 * mc.std_error.max(1e-12), "{}: {} vs {exact}", e.label, mc.value);
    }
}

#[test]
fn monte_carlo_moments_match() {
    let b = SymmetricBody::boxed(&[0.7, 1.5, 2.0]).unwrap();
    let exact = moments(&b, Engine::ClosedForm).unwrap();
    let mc = moments(&b, Engine::MonteCarlo(SampleConfig::new(3, 200_000))).unwrap();
    for i in 0..3 {
        let err = mc.second_moment_error[(i, i)];
        assert!((mc.second_moment[(i, i)] - exact.second_moment[(i, i)]).abs() <= 4.0 * err);
    }
}

#[test]
fn deficits_are_nonnegative_on_random_bodies() {
    for (i, e) in polytope_ellipsoid_corpus(6, 9).iter().enumerate() {
        let d = deficit(&e.body, 0.5, 2.0, Engine::Auto(SampleConfig::new(i as u64, 100_000))).unwrap();
        assert!(d.epsilon >= -3.0 * d.epsilon_error, "{}: {} ± {}", e.label, d.epsilon, d.epsilon_error);
    }
}

#[test]
fn same_seed_same_estimate() {
    let b = polytope_ellipsoid_corpus(1, 4).remove(0).body;
    let c = SampleConfig::new(5, 20_000).with_partitions(4);
    assert_eq!(measure(&b, Engine::MonteCarlo(c)).unwrap(), measure(&b, Engine::MonteCarlo(c)).unwrap());
}

#[test]
fn probe_and_ascent_on_a_planar_polytope() {
    let b = polytope_ellipsoid_corpus(1, 4).remove(0).body;
    assert_eq!(b.dim(), 2);
    let run = mgm_solve(&b, &MgmOptions::new(SampleConfig::new(1, 10_000))).unwrap();
    assert!(run.converged);
    let p = log_concavity_probe(&b, &random_traceless(2, 3), &[0.0, 0.25, 0.5, 0.75, 1.0], Engine::Auto(SampleConfig::new(1, 10_000))).unwrap();
    assert!(p.holds, "{p:?}");
}
