//! Exact marginal values for Gaussian scenarios.
//!
//! With Gaussian components the principal's forecast is linear in the
//! outcomes, so the marginal value of effort is the coefficient on the
//! agent's own outcome in `E[θ | S]`. Two routes compute it: closed forms for
//! the symmetric segment, and a general covariance projection.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{fabs, sqrt};
use crate::model::{GaussianParams, LinkageKind};
use crate::{Error, MvMethod, MvResult, Result};

/// Relative eigenvalue floor below which a covariance is treated as singular.
pub const CONDITION_THRESHOLD: f64 = 1e-12;

/// A linear projection `E[θ | S] = mean_target + βᵀ(S − mean_signals)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionProblem {
    dim: usize,
    /// Row-major `dim × dim`.
    cov_signals: Vec<f64>,
    cov_target_signals: Vec<f64>,
    pub mean_target: f64,
    pub mean_signals: Vec<f64>,
}

impl ProjectionProblem {
    pub fn new(
        cov_signals: Vec<f64>,
        cov_target_signals: Vec<f64>,
        mean_target: f64,
        mean_signals: Vec<f64>,
    ) -> Result<Self> {
        let dim = cov_target_signals.len();
        if dim == 0 || cov_signals.len() != dim * dim || mean_signals.len() != dim {
            return Err(Error::structural("projection problem dimensions disagree"));
        }
        if cov_signals
            .iter()
            .chain(&cov_target_signals)
            .chain(&mean_signals)
            .any(|x| !x.is_finite())
            || !mean_target.is_finite()
        {
            return Err(Error::structural("projection problem has non-finite entries"));
        }
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (cov_signals[i * dim + j], cov_signals[j * dim + i]);
                if fabs(a - b) > 1e-12 * (fabs(a) + fabs(b)).max(1.0) {
                    return Err(Error::structural("signal covariance is not symmetric"));
                }
            }
        }
        Ok(Self {
            dim,
            cov_signals,
            cov_target_signals,
            mean_target,
            mean_signals,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.cov_signals[i * self.dim + j]
    }

    pub fn cov_target(&self, i: usize) -> f64 {
        self.cov_target_signals[i]
    }

    /// All projection coefficients `β`.
    pub fn coefficients(&self) -> Result<Vec<f64>> {
        let chol = Cholesky::factor(&self.cov_signals, self.dim)?;
        Ok(chol.solve(&self.cov_target_signals))
    }

    pub fn posterior_mean(&self, signals: &[f64]) -> Result<f64> {
        if signals.len() != self.dim {
            return Err(Error::domain("signal vector has the wrong length"));
        }
        let beta = self.coefficients()?;
        Ok(self.mean_target
            + beta
                .iter()
                .zip(signals.iter().zip(&self.mean_signals))
                .map(|(b, (s, m))| b * (s - m))
                .sum::<f64>())
    }
}

/// Coefficient on signal `target_signal_index` in the linear posterior mean.
pub fn mv_projection(problem: &ProjectionProblem, target_signal_index: usize) -> Result<f64> {
    if target_signal_index >= problem.dim {
        return Err(Error::domain(format!(
            "signal index {target_signal_index} out of range for dimension {}",
            problem.dim
        )));
    }
    Ok(problem.coefficients()?[target_signal_index])
}

/// Lower-triangular factor of a symmetric positive-definite matrix.
#[derive(Clone, Debug)]
struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    fn factor(a: &[f64], dim: usize) -> Result<Self> {
        let trace: f64 = (0..dim).map(|i| a[i * dim + i]).sum();
        let threshold = CONDITION_THRESHOLD * fabs(trace).max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; dim * dim];
        for j in 0..dim {
            let mut d = a[j * dim + j];
            for k in 0..j {
                d -= l[j * dim + k] * l[j * dim + k];
            }
            // every pivot bounds the smallest eigenvalue from above
            if !(d > threshold) {
                return Err(Error::IllConditioned {
                    min_eigenvalue: d,
                    threshold,
                });
            }
            let d = sqrt(d);
            l[j * dim + j] = d;
            for i in j + 1..dim {
                let mut s = a[i * dim + j];
                for k in 0..j {
                    s -= l[i * dim + k] * l[j * dim + k];
                }
                l[i * dim + j] = s / d;
            }
        }
        let chol = Self { dim, l };
        let min_eig = chol.smallest_eigenvalue();
        if !(min_eig > threshold) {
            return Err(Error::IllConditioned {
                min_eigenvalue: min_eig,
                threshold,
            });
        }
        Ok(chol)
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = y[i] - row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum::<f64>();
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for (k, v) in y.iter().enumerate().skip(i + 1) {
                s -= self.l[k * n + i] * v;
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Inverse power iteration for the smallest eigenvalue.
    fn smallest_eigenvalue(&self) -> f64 {
        let n = self.dim;
        if n == 1 {
            return self.l[0] * self.l[0];
        }
        // deterministic start with no special alignment to structured matrices
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * sqrt(i as f64 + 1.0)).collect();
        normalize(&mut v);
        let mut estimate = f64::INFINITY;
        for _ in 0..200 {
            let w = self.solve(&v);
            let rq: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
            v = w;
            normalize(&mut v);
            let next = 1.0 / rq;
            if fabs(next - estimate) <= 1e-8 * fabs(next) {
                return next;
            }
            estimate = next;
        }
        estimate
    }
}

fn normalize(v: &mut [f64]) {
    let norm = sqrt(v.iter().map(|x| x * x).sum());
    v.iter_mut().for_each(|x| *x /= norm);
}

fn check_n(n: f64) -> Result<()> {
    if n.is_nan() || n < 1.0 {
        Err(Error::domain(format!("segment size must be at least 1, got {n}")))
    } else {
        Ok(())
    }
}

/// `MV_Q(N)` for the quality reading of `p`.
pub fn mv_closed_quality(p: &GaussianParams, n: u64) -> Result<f64> {
    mv_closed_quality_real(p, n as f64)
}

/// `MV_C(N)` for the circumstance reading of `p`.
pub fn mv_closed_circumstance(p: &GaussianParams, n: u64) -> Result<f64> {
    mv_closed_circumstance_real(p, n as f64)
}

/// Quality closed form with the segment size treated as a real number.
pub fn mv_closed_quality_real(p: &GaussianParams, n: f64) -> Result<f64> {
    check_n(n)?;
    if n == 1.0 {
        // bit-identical start for both kinds
        return Ok(mv_single(p));
    }
    let noise = p.var_shock();
    let residual = p.var_idio_type + noise;
    let post_common =
        p.var_common_type * residual / ((n - 1.0) * p.var_common_type + residual);
    Ok((post_common + p.var_idio_type) / (post_common + p.var_idio_type + noise))
}

/// Circumstance closed form with the segment size treated as a real number.
pub fn mv_closed_circumstance_real(p: &GaussianParams, n: f64) -> Result<f64> {
    check_n(n)?;
    if n == 1.0 {
        // bit-identical start for both kinds
        return Ok(mv_single(p));
    }
    let vt = p.var_type();
    let residual = p.var_idio_shock + vt;
    let post_common =
        p.var_common_shock * residual / ((n - 1.0) * p.var_common_shock + residual);
    Ok(vt / (vt + post_common + p.var_idio_shock))
}

/// Single-agent signal-to-noise ratio, the no-linkage marginal value.
pub fn mv_single(p: &GaussianParams) -> f64 {
    let vt = p.var_type();
    vt / (vt + p.var_shock())
}

/// Closed-form marginal value for any kind, real-valued `n`.
pub fn mv_closed_real(p: &GaussianParams, kind: LinkageKind, n: f64) -> Result<f64> {
    match kind {
        LinkageKind::Quality => mv_closed_quality_real(p, n),
        LinkageKind::Circumstance => mv_closed_circumstance_real(p, n),
        LinkageKind::NoLinkage => {
            check_n(n)?;
            Ok(mv_single(p))
        }
    }
}

pub fn mv_closed(p: &GaussianParams, kind: LinkageKind, n: u64) -> Result<MvResult> {
    Ok(MvResult::exact(
        mv_closed_real(p, kind, n as f64)?,
        MvMethod::ClosedForm,
    ))
}

/// `lim_{N→∞} MV(N)`.
pub fn mv_limit(p: &GaussianParams, kind: LinkageKind) -> f64 {
    match kind {
        LinkageKind::Quality => p.var_idio_type / (p.var_idio_type + p.var_shock()),
        LinkageKind::Circumstance => p.var_type() / (p.var_type() + p.var_idio_shock),
        LinkageKind::NoLinkage => mv_single(p),
    }
}

/// Equicorrelated form of a symmetric segment: signal covariance
/// `diag·I + common·11ᵀ` and target covariances `(own, other, …, other)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetricSegment {
    pub diag: f64,
    pub common: f64,
    pub own: f64,
    pub other: f64,
}

impl SymmetricSegment {
    pub fn new(p: &GaussianParams, kind: LinkageKind) -> Self {
        match kind {
            LinkageKind::Quality => Self {
                diag: p.var_idio_type + p.var_shock(),
                common: p.var_common_type,
                own: p.var_type(),
                other: p.var_common_type,
            },
            LinkageKind::Circumstance => Self {
                diag: p.var_type() + p.var_idio_shock,
                common: p.var_common_shock,
                own: p.var_type(),
                other: 0.0,
            },
            LinkageKind::NoLinkage => Self {
                diag: p.var_type() + p.var_shock(),
                common: 0.0,
                own: p.var_type(),
                other: 0.0,
            },
        }
    }

    /// `(β_own, β_other)` for a segment of `n` agents, via Sherman–Morrison.
    pub fn coefficients(&self, n: f64) -> (f64, f64) {
        if n <= 1.0 {
            return (self.own / (self.diag + self.common), 0.0);
        }
        let total = self.own + (n - 1.0) * self.other;
        let s = total / (self.diag + n * self.common);
        (
            (self.own - self.common * s) / self.diag,
            (self.other - self.common * s) / self.diag,
        )
    }

    /// Dense projection problem for the first agent of an `n`-agent segment.
    pub fn projection(&self, n: usize, mean_target: f64, mean_signal: f64) -> Result<ProjectionProblem> {
        let mut cov = vec![self.common; n * n];
        for i in 0..n {
            cov[i * n + i] += self.diag;
        }
        let mut target = vec![self.other; n];
        target[0] = self.own;
        ProjectionProblem::new(cov, target, mean_target, vec![mean_signal; n])
    }
}

/// Projection problem for agent 0 of an `n`-agent segment with all agents at
/// conjectured effort `effort`. Under no linkage only the own outcome is used.
pub fn segment_projection(
    p: &GaussianParams,
    kind: LinkageKind,
    n: usize,
    effort: f64,
) -> Result<ProjectionProblem> {
    p.check()?;
    if n == 0 {
        return Err(Error::domain("segment size must be at least 1"));
    }
    let n = if kind == LinkageKind::NoLinkage { 1 } else { n };
    SymmetricSegment::new(p, kind).projection(n, p.mu, p.mu + effort)
}

/// One observed or unobserved linkage of agent 0.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinkSegment {
    pub var_common: f64,
    /// Number of other agents in the segment.
    pub segment_size: u64,
    pub var_idio_type: f64,
    pub var_idio_shock: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FocalAgent {
    pub var_idio_type: f64,
    pub var_idio_shock: f64,
}

/// Agent 0 belongs to several segments; the principal sees the first
/// `observed_m` of them.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultiLinkSpec {
    pub segments: Vec<LinkSegment>,
    pub observed_m: usize,
    pub agent0: FocalAgent,
}

impl MultiLinkSpec {
    pub fn check(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::structural("multilink spec needs at least one segment"));
        }
        if self.observed_m > self.segments.len() {
            return Err(Error::structural("observed_m exceeds the number of segments"));
        }
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.agent0.var_idio_type) || !pos(self.agent0.var_idio_shock) {
            return Err(Error::structural("agent 0 idiosyncratic variances must be positive"));
        }
        for s in &self.segments {
            if !(s.var_common.is_finite() && s.var_common >= 0.0)
                || !pos(s.var_idio_type)
                || !pos(s.var_idio_shock)
                || s.segment_size < 1
            {
                return Err(Error::structural("invalid multilink segment"));
            }
        }
        Ok(())
    }

    pub fn with_observed(&self, observed_m: usize) -> Self {
        Self {
            observed_m,
            ..self.clone()
        }
    }

    /// Projection problem for agent 0 when segment `j` has linkage `kinds[j]`.
    pub fn projection(&self, kinds: &[LinkageKind]) -> Result<ProjectionProblem> {
        self.check()?;
        if kinds.len() != self.segments.len()
            || kinds.contains(&LinkageKind::NoLinkage)
        {
            return Err(Error::structural(
                "each segment needs a quality or circumstance kind",
            ));
        }
        let quality_common: f64 = self
            .segments
            .iter()
            .zip(kinds)
            .filter(|(_, k)| **k == LinkageKind::Quality)
            .map(|(s, _)| s.var_common)
            .sum();
        let shock_common: f64 = self
            .segments
            .iter()
            .zip(kinds)
            .filter(|(_, k)| **k == LinkageKind::Circumstance)
            .map(|(s, _)| s.var_common)
            .sum();
        let var_theta0 = self.agent0.var_idio_type + quality_common;
        let observed = &self.segments[..self.observed_m];
        let dim = 1 + observed.iter().map(|s| s.segment_size as usize).sum::<usize>();
        let mut cov = vec![0.0; dim * dim];
        let mut target = vec![0.0; dim];
        cov[0] = var_theta0 + shock_common + self.agent0.var_idio_shock;
        target[0] = var_theta0;
        let mut start = 1;
        for (seg, kind) in observed.iter().zip(kinds) {
            let size = seg.segment_size as usize;
            for i in start..start + size {
                target[i] = if *kind == LinkageKind::Quality {
                    seg.var_common
                } else {
                    0.0
                };
                cov[i] = seg.var_common;
                cov[i * dim] = seg.var_common;
                for j in start..start + size {
                    cov[i * dim + j] = seg.var_common;
                }
                cov[i * dim + i] += seg.var_idio_type + seg.var_idio_shock;
            }
            start += size;
        }
        ProjectionProblem::new(cov, target, 0.0, vec![0.0; dim])
    }
}

/// Agent 0's marginal value when every segment has the same kind.
pub fn mv_multilink(spec: &MultiLinkSpec, kind: LinkageKind) -> Result<f64> {
    let kinds = vec![kind; spec.segments.len()];
    mv_multilink_mixed(spec, &kinds)
}

/// Marginal value with a separate kind per segment. Monotonicity in
/// `observed_m` is only established for a single kind.
pub fn mv_multilink_mixed(spec: &MultiLinkSpec, kinds: &[LinkageKind]) -> Result<f64> {
    mv_projection(&spec.projection(kinds)?, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> GaussianParams {
        GaussianParams::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let p = canonical();
        assert!((mv_closed_quality(&p, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((mv_closed_quality(&p, 2).unwrap() - 0.625).abs() < 1e-15);
        assert!((mv_closed_quality(&p, 10).unwrap() - 13.0 / 24.0).abs() < 1e-15);
        assert!((mv_closed_quality(&p, 1_000_000).unwrap() - 0.5).abs() < 1e-5);
        assert!((mv_closed_circumstance(&p, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((mv_closed_circumstance(&p, 3).unwrap() - 0.7).abs() < 1e-15);
        assert!((mv_limit(&p, LinkageKind::Circumstance) - 0.8).abs() < 1e-15);
        assert!(matches!(mv_closed_real(&p, LinkageKind::Quality, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn scalar_projection() {
        let prob = ProjectionProblem::new(vec![3.0], vec![2.0], 0.0, vec![0.0]).unwrap();
        assert!((mv_projection(&prob, 0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn singular_covariance_is_reported() {
        let prob =
            ProjectionProblem::new(vec![1.0, 1.0, 1.0, 1.0], vec![1.0, 0.0], 0.0, vec![0.0; 2])
                .unwrap();
        assert!(matches!(
            mv_projection(&prob, 0),
            Err(Error::IllConditioned { .. })
        ));
        let near = ProjectionProblem::new(
            vec![1.0, 1.0 - 1e-14, 1.0 - 1e-14, 1.0],
            vec![1.0, 0.0],
            0.0,
            vec![0.0; 2],
        )
        .unwrap();
        assert!(matches!(
            mv_projection(&near, 0),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn sherman_morrison_matches_closed_forms() {
        let p = canonical();
        for kind in [LinkageKind::Quality, LinkageKind::Circumstance] {
            let seg = SymmetricSegment::new(&p, kind);
            for n in 1..30 {
                let (own, _) = seg.coefficients(n as f64);
                let closed = mv_closed_real(&p, kind, n as f64).unwrap();
                assert!((own - closed).abs() < 1e-14, "{kind:?} {n}");
            }
        }
    }

    #[test]
    fn multilink_worked_example() {
        let seg = LinkSegment {
            var_common: 0.5,
            segment_size: 1,
            var_idio_type: 1.0,
            var_idio_shock: 1.0,
        };
        let spec = MultiLinkSpec {
            segments: vec![seg, seg],
            observed_m: 0,
            agent0: FocalAgent {
                var_idio_type: 1.0,
                var_idio_shock: 1.0,
            },
        };
        let q = |m| mv_multilink(&spec.with_observed(m), LinkageKind::Quality).unwrap();
        assert!((q(0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((q(1) - 4.75 / 7.25).abs() < 1e-12);
        assert!((q(2) - 1.8 / 2.8).abs() < 1e-12);
        let c = |m| mv_multilink(&spec.with_observed(m), LinkageKind::Circumstance).unwrap();
        assert!(c(0) < c(1) && c(1) < c(2));
    }
}
