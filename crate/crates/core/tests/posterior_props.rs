use linkage_core::gaussian::segment_projection;
use linkage_core::model::{CostFunction, Family, GeneralParams, LinkageKind, Scenario};
use linkage_core::posterior::{
    mu_quadrature, mv_quadrature, OutcomeProfile, PosteriorModel, QuadratureConfig,
    DEFAULT_DELTA,
};
use linkage_core::GaussianParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matched(family: Family, kind: LinkageKind) -> Scenario {
    Scenario::general(
        kind,
        GeneralParams::matched(family, 1.0, 1.0, 1.0, 0.5, 0.5),
        CostFunction::quadratic(1.0),
        0.0,
        2,
    )
}

fn random_profile(rng: &mut ChaCha8Rng, n: usize) -> OutcomeProfile {
    let values = (0..n).map(|_| rng.random_range(-3.0..5.0)).collect();
    let actions = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    OutcomeProfile::new(values, actions).unwrap()
}

#[test]
fn gaussian_components_reproduce_linear_posterior() {
    let cfg = QuadratureConfig::default();
    let params = GaussianParams::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for kind in [LinkageKind::Quality, LinkageKind::Circumstance] {
        let model = PosteriorModel::new(&matched(Family::Gaussian, kind), &cfg).unwrap();
        for _ in 0..20 {
            let n = rng.random_range(1..=4);
            let effort = rng.random_range(0.0..1.0);
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..4.0)).collect();
            let profile = OutcomeProfile::uniform_effort(values.clone(), effort).unwrap();
            let quad = model.posterior_mean(&profile, 0).unwrap();
            let exact = segment_projection(&params, kind, n, effort)
                .unwrap()
                .posterior_mean(&values)
                .unwrap();
            assert!((quad - exact).abs() <= 1e-6, "{kind:?} {values:?}: {quad} vs {exact}");
        }
    }
}

#[test]
fn symmetric_profiles_return_the_prior_mean() {
    let cfg = QuadratureConfig::default();
    let gq = PosteriorModel::new(&matched(Family::Gaussian, LinkageKind::Quality), &cfg).unwrap();
    let at_mean = OutcomeProfile::uniform_effort(vec![1.4, 1.4], 0.4).unwrap();
    assert!((gq.posterior_mean(&at_mean, 0).unwrap() - 1.0).abs() < 1e-9);

    let lq = PosteriorModel::new(&matched(Family::Logistic, LinkageKind::Quality), &cfg).unwrap();
    let single = OutcomeProfile::uniform_effort(vec![1.7], 0.7).unwrap();
    assert!((lq.posterior_mean(&single, 0).unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn gaussian_sensitivity_is_constant() {
    let cfg = QuadratureConfig::default();
    let s = matched(Family::Gaussian, LinkageKind::Quality);
    let model = PosteriorModel::new(&s, &cfg).unwrap();
    for v in [-2.0, 0.3, 4.5] {
        let p = OutcomeProfile::uniform_effort(vec![v], 0.2).unwrap();
        let d = model.forecast_sensitivity(&p, 0, 0, 1e-4).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-6, "{v}: {d}");
    }
    let a = OutcomeProfile::uniform_effort(vec![0.5, 1.5, -0.2], 0.0).unwrap();
    let b = OutcomeProfile::uniform_effort(vec![1.5, 1.5, -0.2], 0.0).unwrap();
    for wrt in 0..3 {
        let da = model.forecast_sensitivity(&a, 0, wrt, 1e-4).unwrap();
        let db = model.forecast_sensitivity(&b, 0, wrt, 1e-4).unwrap();
        assert!((da - db).abs() < 1e-8);
    }
}

#[test]
fn logistic_sensitivity_signs() {
    let cfg = QuadratureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (kind, sign) in [(LinkageKind::Quality, 1.0), (LinkageKind::Circumstance, -1.0)] {
        let model = PosteriorModel::new(&matched(Family::Logistic, kind), &cfg).unwrap();
        for _ in 0..15 {
            let n = rng.random_range(2..=4);
            let p = random_profile(&mut rng, n);
            let step = model.default_step(&p);
            let own = model.forecast_sensitivity(&p, 0, 0, step).unwrap();
            assert!(own > 0.0 && own < 1.0, "{kind:?} own {own}");
            let wrt = rng.random_range(1..n);
            let cross = model.forecast_sensitivity(&p, 0, wrt, step).unwrap();
            assert!(sign * cross > 0.0, "{kind:?} cross {cross}");
        }
    }
}

#[test]
fn translation_invariance() {
    let cfg = QuadratureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for kind in [LinkageKind::Quality, LinkageKind::Circumstance] {
        let model = PosteriorModel::new(&matched(Family::Logistic, kind), &cfg).unwrap();
        for _ in 0..10 {
            let p = random_profile(&mut rng, 3);
            let c = rng.random_range(-1.0..2.0);
            let shifted = OutcomeProfile::new(
                p.values.iter().map(|v| v + c).collect(),
                p.conjectured_actions.iter().map(|a| a + c).collect(),
            )
            .unwrap();
            let a = model.posterior_mean(&p, 0).unwrap();
            let b = model.posterior_mean(&shifted, 0).unwrap();
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}

#[test]
fn quadrature_marginal_value_matches_closed_form() {
    let cfg = QuadratureConfig::default();
    let s = matched(Family::Gaussian, LinkageKind::Quality);
    let mv = mv_quadrature(&s, 2, &cfg, DEFAULT_DELTA).unwrap();
    assert!((mv.value - 0.625).abs() < 1e-4, "{mv:?}");
    let (mu, se) = mu_quadrature(&s, 2, &cfg, 0.0).unwrap();
    assert!((mu - 1.0).abs() <= 3.0 * se + 1e-9, "{mu} ± {se}");
}

#[test]
fn rejects_bad_inputs() {
    let cfg = QuadratureConfig::default();
    let s = matched(Family::Logistic, LinkageKind::Quality);
    assert!(mv_quadrature(&s, 13, &cfg, DEFAULT_DELTA).is_err());
    assert!(OutcomeProfile::new(vec![1.0, 2.0], vec![0.0]).is_err());
    let model = PosteriorModel::new(&s, &cfg).unwrap();
    let p = OutcomeProfile::uniform_effort(vec![1.0], 0.0).unwrap();
    assert!(model.posterior_mean(&p, 1).is_err());
    let bad = QuadratureConfig {
        nodes: 8,
        ..cfg
    };
    assert!(PosteriorModel::new(&s, &bad).is_err());
}
