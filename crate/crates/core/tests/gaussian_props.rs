use linkage_core::gaussian::{
    mv_closed_circumstance, mv_closed_quality, mv_closed_real, mv_limit, mv_multilink,
    mv_projection, segment_projection, FocalAgent, LinkSegment, MultiLinkSpec,
    ProjectionProblem,
};
use linkage_core::model::{GaussianParams, LinkageKind};
use linkage_core::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn log_uniform(rng: &mut ChaCha8Rng) -> f64 {
    10f64.powf(rng.random_range(-1.0..1.0))
}

fn random_params(rng: &mut ChaCha8Rng) -> GaussianParams {
    let mu = rng.random_range(1e-3..5.0);
    GaussianParams::new(
        mu,
        log_uniform(rng),
        log_uniform(rng),
        log_uniform(rng),
        log_uniform(rng),
    )
    .unwrap()
}

/// Agent-0 coefficient from the full outcome covariance, built entry by
/// entry from the component variances and solved with a dense LU.
fn dense_oracle(p: &GaussianParams, kind: LinkageKind, n: usize) -> f64 {
    let (tb, tp, eb, ep) = match kind {
        LinkageKind::Quality => (p.var_common_type, p.var_idio_type, 0.0, p.var_shock()),
        _ => (0.0, p.var_type(), p.var_common_shock, p.var_idio_shock),
    };
    let cov = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            tb + tp + eb + ep
        } else {
            tb + eb
        }
    });
    let target = DVector::from_fn(n, |i, _| if i == 0 { tb + tp } else { tb });
    cov.lu().solve(&target).unwrap()[0]
}

#[test]
fn closed_forms_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let p = random_params(&mut rng);
        for n in [1usize, 2, 3, 7, 25, 80, 200] {
            let q = mv_closed_quality(&p, n as u64).unwrap();
            let c = mv_closed_circumstance(&p, n as u64).unwrap();
            assert!((q - dense_oracle(&p, LinkageKind::Quality, n)).abs() < 1e-10);
            assert!((c - dense_oracle(&p, LinkageKind::Circumstance, n)).abs() < 1e-10);
            for (kind, closed) in [(LinkageKind::Quality, q), (LinkageKind::Circumstance, c)] {
                let proj = segment_projection(&p, kind, n, 0.3).unwrap();
                assert!((mv_projection(&proj, 0).unwrap() - closed).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn marginal_values_are_monotone_and_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let p = random_params(&mut rng);
        let q1 = mv_closed_quality(&p, 1).unwrap();
        assert_eq!(q1, mv_closed_circumstance(&p, 1).unwrap());
        let (lq, lc) = (mv_limit(&p, LinkageKind::Quality), mv_limit(&p, LinkageKind::Circumstance));
        assert!(0.0 < lq && lc < 1.0);
        // N·|MV(N) − limit| is monotone in N, so its sup is at an end point
        let far = 1e9;
        let kq = (q1 - lq).max((mv_closed_quality(&p, far as u64).unwrap() - lq) * far);
        let kc = (lc - q1).max((lc - mv_closed_circumstance(&p, far as u64).unwrap()) * far);
        let (mut prev_q, mut prev_c) = (q1, q1);
        for n in 2..=50 {
            let q = mv_closed_quality(&p, n).unwrap();
            let c = mv_closed_circumstance(&p, n).unwrap();
            assert!(prev_q - q > 1e-12, "quality at {n}");
            assert!(c - prev_c > 1e-12, "circumstance at {n}");
            assert!(q > lq && c < lc);
            assert!((q - lq) * n as f64 <= kq * (1.0 + 1e-6));
            assert!((lc - c) * n as f64 <= kc * (1.0 + 1e-6));
            prev_q = q;
            prev_c = c;
        }
    }
}

#[test]
fn closed_form_examples() {
    let p = GaussianParams::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap();
    assert!((mv_closed_quality(&p, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!((mv_closed_quality(&p, 2).unwrap() - 0.625).abs() < 1e-15);
    assert!((mv_closed_quality(&p, 10).unwrap() - 13.0 / 24.0).abs() < 1e-15);
    assert!((mv_closed_quality(&p, 1_000_000).unwrap() - 0.5).abs() < 1e-5);
    assert!((mv_closed_circumstance(&p, 3).unwrap() - 0.7).abs() < 1e-15);
    assert!((mv_closed_circumstance(&p, 1_000_000).unwrap() - 0.8).abs() < 1e-5);
    assert!(matches!(mv_closed_quality(&p, 0), Err(Error::Domain(_))));
    assert!(matches!(
        mv_closed_real(&p, LinkageKind::Circumstance, 0.5),
        Err(Error::Domain(_))
    ));
}

#[test]
fn projection_rejects_singular_covariance() {
    let pp = ProjectionProblem::new(vec![1.0, 1.0, 1.0, 1.0], vec![1.0, 1.0], 0.0, vec![0.0; 2])
        .unwrap();
    assert!(matches!(
        mv_projection(&pp, 0),
        Err(Error::IllConditioned { .. })
    ));
    let pp = ProjectionProblem::new(vec![3.0], vec![2.0], 0.0, vec![0.0]).unwrap();
    assert!((mv_projection(&pp, 0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
}

fn two_segment_example() -> MultiLinkSpec {
    let seg = LinkSegment {
        var_common: 0.5,
        segment_size: 1,
        var_idio_type: 1.0,
        var_idio_shock: 1.0,
    };
    MultiLinkSpec {
        segments: vec![seg, seg],
        observed_m: 0,
        agent0: FocalAgent {
            var_idio_type: 1.0,
            var_idio_shock: 1.0,
        },
    }
}

#[test]
fn multilink_worked_example() {
    let spec = two_segment_example();
    let expect = [2.0 / 3.0, 4.75 / 7.25, 1.8 / 2.8];
    for (m, want) in expect.iter().enumerate() {
        let got = mv_multilink(&spec.with_observed(m), LinkageKind::Quality).unwrap();
        assert!((got - want).abs() < 1e-12, "m = {m}: {got}");
    }
}

fn random_spec(rng: &mut ChaCha8Rng) -> MultiLinkSpec {
    let j = rng.random_range(1..=4);
    let segments = (0..j)
        .map(|_| LinkSegment {
            var_common: log_uniform(rng),
            segment_size: rng.random_range(1..=5),
            var_idio_type: log_uniform(rng),
            var_idio_shock: log_uniform(rng),
        })
        .collect();
    MultiLinkSpec {
        segments,
        observed_m: 0,
        agent0: FocalAgent {
            var_idio_type: log_uniform(rng),
            var_idio_shock: log_uniform(rng),
        },
    }
}

#[test]
fn multilink_monotone_in_observed_links() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let spec = random_spec(&mut rng);
        for (kind, sign) in [(LinkageKind::Quality, -1.0), (LinkageKind::Circumstance, 1.0)] {
            let vals: Vec<f64> = (0..=spec.segments.len())
                .map(|m| mv_multilink(&spec.with_observed(m), kind).unwrap())
                .collect();
            for w in vals.windows(2) {
                assert!(sign * (w[1] - w[0]) > 0.0, "{kind:?} {vals:?}");
            }
        }
    }
}
