//! Posterior means for non-Gaussian components by nested quadrature.
//!
//! Conditional on the common latent `z`, outcomes are independent, so
//!
//! ```text
//! E[θ_i | S] = ∫ w(z) (z·[quality] + g(S_i − a_i − z)) dz
//! w(z) ∝ f_z(z) Π_j f_U(S_j − a_j − z)
//! ```
//!
//! where `U = A + B` is the idiosyncratic sum of type part `A` and shock part
//! `B`, and `g(x) = E[A | U = x]`. `f_U` and `g` are tabulated once per
//! scenario on a convolution grid; the outer integral uses Gauss–Legendre
//! nodes on the truncated support of `z` with node doubling.

mod grid;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{exp, fabs, log, sqrt, GaussLegendre};
use crate::model::{ComponentDist, Latent, Scenario, Structure};
use crate::qmc::Sobol;
use crate::{Error, MvMethod, MvResult, Result};

use grid::{Interpolant, Sampler, UniformGrid};

/// Largest segment for which quadrature marginal values are computed.
pub const MAX_QUADRATURE_N: u64 = 12;

/// How many times the outer node count is doubled before giving up.
const DOUBLINGS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadratureConfig {
    /// Initial outer Gauss–Legendre node count.
    pub nodes: usize,
    /// Half-width of the outer interval in standard deviations of `z`.
    pub truncation_sd: f64,
    pub target_rel_tol: f64,
    /// Low-discrepancy outcome points per replicate in [`mv_quadrature`].
    pub outcome_points: u32,
    /// Independently shifted replicates, used for the error estimate.
    pub replicates: usize,
    pub shift_seed: u64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            nodes: 96,
            truncation_sd: 8.0,
            target_rel_tol: 1e-6,
            outcome_points: 4096,
            replicates: 8,
            shift_seed: 0,
        }
    }
}

impl QuadratureConfig {
    pub fn check(&self) -> Result<()> {
        if self.nodes < 16 {
            return Err(Error::structural("quadrature needs at least 16 nodes"));
        }
        if !(self.truncation_sd >= 4.0) {
            return Err(Error::structural("truncation_sd must be at least 4"));
        }
        if !(self.target_rel_tol > 0.0) {
            return Err(Error::structural("target_rel_tol must be positive"));
        }
        if self.outcome_points == 0 || self.replicates < 2 {
            return Err(Error::structural(
                "need at least one outcome point and two replicates",
            ));
        }
        Ok(())
    }
}

/// Observed outcomes together with the efforts the principal conjectures.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeProfile {
    pub values: Vec<f64>,
    pub conjectured_actions: Vec<f64>,
}

impl OutcomeProfile {
    pub fn new(values: Vec<f64>, conjectured_actions: Vec<f64>) -> Result<Self> {
        if values.len() != conjectured_actions.len() || values.is_empty() {
            return Err(Error::structural(
                "outcomes and conjectured actions must have equal nonzero length",
            ));
        }
        if values
            .iter()
            .chain(&conjectured_actions)
            .any(|v| !v.is_finite())
        {
            return Err(Error::structural("outcome profile has non-finite entries"));
        }
        Ok(Self {
            values,
            conjectured_actions,
        })
    }

    /// Every agent at the same conjectured effort.
    pub fn uniform_effort(values: Vec<f64>, effort: f64) -> Result<Self> {
        let n = values.len();
        Self::new(values, vec![effort; n])
    }

    fn residuals(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.conjectured_actions)
            .map(|(s, a)| s - a)
            .collect()
    }
}

/// Outer nodes with the log prior of `z` and the log quadrature weight folded
/// together.
#[derive(Clone, Debug)]
struct OuterLevel {
    z: Vec<f64>,
    log_prior_weight: Vec<f64>,
}

/// Tabulated posterior machinery for one scenario. Construction does all the
/// convolution work; evaluation is read-only and may be shared.
#[derive(Clone, Debug)]
pub struct PosteriorModel {
    cfg: QuadratureConfig,
    common: Latent,
    common_is_type: bool,
    /// Mean of the type part `A`.
    type_mean: f64,
    log_density_u: Interpolant,
    cond_type: Interpolant,
    sampler_u: Sampler,
    sampler_z: Option<Sampler>,
    levels: Vec<OuterLevel>,
    theta_scale: f64,
}

impl PosteriorModel {
    pub fn new(s: &Scenario, cfg: &QuadratureConfig) -> Result<Self> {
        s.check_structure()?;
        cfg.check()?;
        Self::from_structure(&s.structure(), cfg)
    }

    pub fn from_structure(st: &Structure, cfg: &QuadratureConfig) -> Result<Self> {
        if st.type_parts.is_empty() || st.shock_parts.is_empty() {
            return Err(Error::structural(
                "idiosyncratic type and shock parts are required",
            ));
        }
        let var = |parts: &[ComponentDist]| parts.iter().map(ComponentDist::variance).sum::<f64>();
        let (var_a, var_b) = (var(&st.type_parts), var(&st.shock_parts));
        let sd_u = sqrt(var_a + var_b);
        let sd_c = match st.common {
            Latent::Fixed(_) => 0.0,
            Latent::Random(d) => d.std_dev(),
        };
        let type_mean: f64 = st.type_parts.iter().map(ComponentDist::mean).sum();

        let half_width = 16.0 * sd_u + 2.0 * cfg.truncation_sd * sd_c;
        let grid = UniformGrid::with_half_width(half_width, 0.0);
        let f_a = grid::sum_density(&st.type_parts, &grid);
        let f_b = grid::sum_density(&st.shock_parts, &grid);
        let f_u = grid::convolve(&f_a, &f_b, grid.h);
        let t_f_a: Vec<f64> = f_a
            .iter()
            .enumerate()
            .map(|(k, v)| grid.x(k) * v)
            .collect();
        let num = grid::convolve(&t_f_a, &f_b, grid.h);

        let (lo_bound, hi_bound) = grid::inner_bounds(0.75);
        let (lo, hi) = grid::valid_range(&f_u, lo_bound, hi_bound);
        if hi < lo + 8 {
            return Err(Error::Unsupported(
                "idiosyncratic density underflows on the convolution grid".into(),
            ));
        }
        let cond: Vec<f64> = num
            .iter()
            .zip(&f_u)
            .map(|(n, d)| if *d > 0.0 { n / d } else { 0.0 })
            .collect();
        // U's tabulation is centred on A's mean; shift the grid accordingly
        let shifted = UniformGrid {
            h: grid.h,
            offset: type_mean,
        };
        let log_density_u = Interpolant::new(shifted, grid::log_values(&f_u), lo, hi);
        let cond_type = Interpolant::new(
            shifted,
            cond.iter().map(|g| g + type_mean).collect(),
            lo,
            hi,
        );
        let sampler_u = Sampler::new(shifted, f_u);

        let (sampler_z, levels) = match st.common {
            Latent::Fixed(_) => (None, Vec::new()),
            Latent::Random(d) => {
                let zgrid = UniformGrid::with_half_width(
                    (cfg.truncation_sd + 8.0) * sd_c,
                    d.location(),
                );
                let sampler = Sampler::new(zgrid, zgrid.tabulate(&d));
                let lo = d.location() - cfg.truncation_sd * sd_c;
                let hi = d.location() + cfg.truncation_sd * sd_c;
                let levels = (0..=DOUBLINGS)
                    .map(|k| {
                        let (z, w) = GaussLegendre::new(cfg.nodes << k).mapped(lo, hi);
                        let log_prior_weight =
                            z.iter().zip(&w).map(|(z, w)| log(*w) + d.ln_pdf(*z)).collect();
                        OuterLevel {
                            z,
                            log_prior_weight,
                        }
                    })
                    .collect();
                (Some(sampler), levels)
            }
        };
        Ok(Self {
            cfg: *cfg,
            common: st.common,
            common_is_type: st.common_is_type,
            type_mean,
            log_density_u,
            cond_type,
            sampler_u,
            sampler_z,
            levels,
            theta_scale: sqrt(var_a + if st.common_is_type { sd_c * sd_c } else { 0.0 }),
        })
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.cfg
    }

    /// Prior mean of a type.
    pub fn prior_mean(&self) -> f64 {
        self.type_mean
            + if self.common_is_type {
                self.common.mean()
            } else {
                0.0
            }
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.cfg.target_rel_tol * fabs(value).max(self.theta_scale)
    }

    /// `E[θ_agent | residuals]` at one outer level.
    fn mean_at_level(&self, r: &[f64], agent: usize, level: usize) -> f64 {
        match self.common {
            Latent::Fixed(m) => {
                let base = if self.common_is_type { m } else { 0.0 };
                base + self.cond_type.eval(r[agent] - m)
            }
            Latent::Random(_) => {
                let lvl = &self.levels[level];
                let mut logw = Vec::with_capacity(lvl.z.len());
                let mut max = f64::NEG_INFINITY;
                for (z, lp) in lvl.z.iter().zip(&lvl.log_prior_weight) {
                    let mut lw = *lp;
                    for rj in r {
                        lw += self.log_density_u.eval(rj - z);
                    }
                    max = max.max(lw);
                    logw.push(lw);
                }
                let (mut total, mut acc) = (0.0, 0.0);
                for (z, lw) in lvl.z.iter().zip(&logw) {
                    let w = exp(lw - max);
                    if w == 0.0 {
                        continue;
                    }
                    let base = if self.common_is_type { *z } else { 0.0 };
                    total += w;
                    acc += w * (base + self.cond_type.eval(r[agent] - z));
                }
                acc / total
            }
        }
    }

    /// Runs node doubling on a vector-valued evaluation. Returns the values
    /// and the level at which they settled.
    fn settle<const K: usize>(
        &self,
        mut eval: impl FnMut(usize) -> [f64; K],
    ) -> Result<([f64; K], usize)> {
        if self.levels.is_empty() {
            return Ok((eval(0), 0));
        }
        let mut prev = eval(0);
        let mut worst = 0.0;
        for level in 1..self.levels.len() {
            let cur = eval(level);
            worst = 0.0f64;
            let mut ok = true;
            for (c, p) in cur.iter().zip(&prev) {
                let ratio = fabs(c - p) / self.tolerance(*c);
                worst = worst.max(ratio);
                ok &= ratio <= 1.0;
            }
            if ok {
                return Ok((cur, level));
            }
            prev = cur;
        }
        if worst <= 10.0 {
            Ok((prev, self.levels.len() - 1))
        } else {
            Err(Error::Accuracy {
                change: worst * self.cfg.target_rel_tol,
                tolerance: self.cfg.target_rel_tol,
            })
        }
    }

    fn check_profile(&self, profile: &OutcomeProfile, agent: usize) -> Result<()> {
        if agent >= profile.values.len() {
            return Err(Error::domain(format!(
                "agent {agent} out of range for {} outcomes",
                profile.values.len()
            )));
        }
        Ok(())
    }

    /// Posterior mean from outcome residuals `S_j − a_j`.
    pub(crate) fn posterior_mean_residuals(&self, r: &[f64], agent: usize) -> Result<f64> {
        Ok(self.settle(|lvl| [self.mean_at_level(r, agent, lvl)])?.0[0])
    }

    pub fn posterior_mean(&self, profile: &OutcomeProfile, agent: usize) -> Result<f64> {
        self.check_profile(profile, agent)?;
        let r = profile.residuals();
        Ok(self.settle(|lvl| [self.mean_at_level(&r, agent, lvl)])?.0[0])
    }

    /// Central difference of the posterior mean of `agent` in outcome `wrt`.
    /// Both evaluations share one outer node set.
    pub fn forecast_sensitivity(
        &self,
        profile: &OutcomeProfile,
        agent: usize,
        wrt: usize,
        step: f64,
    ) -> Result<f64> {
        self.check_profile(profile, agent)?;
        self.check_profile(profile, wrt)?;
        if !(step > 0.0) {
            return Err(Error::domain("finite-difference step must be positive"));
        }
        let mut up = profile.residuals();
        let mut down = up.clone();
        up[wrt] += step;
        down[wrt] -= step;
        let ([p, m], _) = self.settle(|lvl| {
            [
                self.mean_at_level(&up, agent, lvl),
                self.mean_at_level(&down, agent, lvl),
            ]
        })?;
        Ok((p - m) / (2.0 * step))
    }

    /// Default finite-difference step: `1e-4` times the outcome scale.
    pub fn default_step(&self, profile: &OutcomeProfile) -> f64 {
        let scale = profile
            .values
            .iter()
            .fold(self.theta_scale, |m, v| m.max(fabs(*v)));
        1e-4 * scale
    }

    /// Outcome residuals `z + U_j` at one low-discrepancy point.
    fn draw_residuals(&self, u: &[f64], n: usize, out: &mut [f64]) {
        let (z, rest) = match (&self.common, &self.sampler_z) {
            (Latent::Random(_), Some(s)) => (s.inverse_cdf(u[0]), &u[1..]),
            (Latent::Fixed(m), _) => (*m, u),
            (Latent::Random(_), None) => unreachable!("random latent always has a sampler"),
        };
        for j in 0..n {
            out[j] = z + self.sampler_u.inverse_cdf(rest[j]);
        }
    }

    /// Replicated randomized-QMC average of `stat` over the outcome
    /// distribution of an `n`-agent segment at zero conjectured effort.
    fn outcome_average(
        &self,
        n: usize,
        mut stat: impl FnMut(&mut [f64]) -> Result<f64>,
    ) -> Result<(f64, f64)> {
        let dim = n + usize::from(self.sampler_z.is_some());
        let sobol = Sobol::new(dim)?;
        let shifts = sobol.shifts(self.cfg.replicates, self.cfg.shift_seed);
        let mut u = vec![0.0; dim];
        let mut r = vec![0.0; n];
        let mut means = Vec::with_capacity(shifts.len());
        for shift in &shifts {
            let mut sum = 0.0;
            for i in 0..self.cfg.outcome_points {
                sobol.point(i, shift, &mut u);
                self.draw_residuals(&u, n, &mut r);
                sum += stat(&mut r)?;
            }
            means.push(sum / self.cfg.outcome_points as f64);
        }
        let reps = means.len() as f64;
        let mean = means.iter().sum::<f64>() / reps;
        let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (reps - 1.0);
        Ok((mean, sqrt(var / reps)))
    }

    /// `μ_N(δ)`: the expected forecast of agent 0 when it deviates by `delta`.
    /// Returns `(estimate, standard error)`.
    pub fn mu(&self, n: u64, delta: f64) -> Result<(f64, f64)> {
        let n = check_segment(n)?;
        self.outcome_average(n, |r| {
            r[0] += delta;
            let ([v], _) = self.settle(|lvl| [self.mean_at_level(r, 0, lvl)])?;
            Ok(v)
        })
    }

    /// `(μ_N(δ) − μ_N(−δ)) / 2δ` with common outcome points and outer nodes.
    pub fn mv(&self, n: u64, delta: f64) -> Result<MvResult> {
        let n = check_segment(n)?;
        if !(delta > 0.0) {
            return Err(Error::domain("delta must be positive"));
        }
        let mut down = vec![0.0; n];
        let (value, se) = self.outcome_average(n, |r| {
            down.copy_from_slice(r);
            r[0] += delta;
            down[0] -= delta;
            let ([p, m], _) = self.settle(|lvl| {
                [
                    self.mean_at_level(r, 0, lvl),
                    self.mean_at_level(&down, 0, lvl),
                ]
            })?;
            Ok((p - m) / (2.0 * delta))
        })?;
        Ok(MvResult {
            value,
            std_error: Some(se),
            method: MvMethod::Quadrature,
        })
    }
}

fn check_segment(n: u64) -> Result<usize> {
    if n < 1 {
        return Err(Error::domain("segment size must be at least 1"));
    }
    if n > MAX_QUADRATURE_N {
        return Err(Error::unsupported(format!(
            "quadrature marginal values are limited to N <= {MAX_QUADRATURE_N}"
        )));
    }
    Ok(n as usize)
}

pub fn posterior_mean(
    s: &Scenario,
    profile: &OutcomeProfile,
    agent: usize,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    PosteriorModel::new(s, cfg)?.posterior_mean(profile, agent)
}

/// Pass `step = None` for the default relative step.
pub fn forecast_sensitivity(
    s: &Scenario,
    profile: &OutcomeProfile,
    agent: usize,
    wrt: usize,
    cfg: &QuadratureConfig,
    step: Option<f64>,
) -> Result<f64> {
    let model = PosteriorModel::new(s, cfg)?;
    let step = step.unwrap_or_else(|| model.default_step(profile));
    model.forecast_sensitivity(profile, agent, wrt, step)
}

/// Default differencing step for [`mv_quadrature`].
pub const DEFAULT_DELTA: f64 = 1e-3;

pub fn mv_quadrature(s: &Scenario, n: u64, cfg: &QuadratureConfig, delta: f64) -> Result<MvResult> {
    PosteriorModel::new(s, cfg)?.mv(n, delta)
}

/// `μ_N(δ)` estimate and standard error; `delta = 0` recovers the prior mean.
pub fn mu_quadrature(s: &Scenario, n: u64, cfg: &QuadratureConfig, delta: f64) -> Result<(f64, f64)> {
    PosteriorModel::new(s, cfg)?.mu(n, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostFunction, Family, GaussianParams, GeneralParams, LinkageKind};

    fn gaussian_general(kind: LinkageKind) -> Scenario {
        Scenario::general(
            kind,
            GeneralParams::matched(Family::Gaussian, 1.0, 1.0, 1.0, 0.5, 0.5),
            CostFunction::quadratic(1.0),
            0.0,
            2,
        )
    }

    #[test]
    fn symmetric_profile_recovers_prior_mean() {
        let s = gaussian_general(LinkageKind::Quality);
        let m = PosteriorModel::new(&s, &QuadratureConfig::default()).unwrap();
        let p = OutcomeProfile::uniform_effort(vec![1.6, 1.6], 0.6).unwrap();
        assert!((m.posterior_mean(&p, 0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_components_match_linear_forecast() {
        let params = GaussianParams::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap();
        for kind in [LinkageKind::Quality, LinkageKind::Circumstance] {
            let s = gaussian_general(kind);
            let m = PosteriorModel::new(&s, &QuadratureConfig::default()).unwrap();
            let prob = crate::gaussian::segment_projection(&params, kind, 3, 0.4).unwrap();
            let values = vec![2.1, 0.3, 1.9];
            let exact = prob.posterior_mean(&values).unwrap();
            let p = OutcomeProfile::uniform_effort(values, 0.4).unwrap();
            let got = m.posterior_mean(&p, 0).unwrap();
            assert!((got - exact).abs() < 1e-6, "{kind:?}: {got} vs {exact}");
        }
    }

    #[test]
    fn bad_config_is_rejected() {
        let cfg = QuadratureConfig {
            nodes: 8,
            ..Default::default()
        };
        assert!(cfg.check().unwrap_err().is_structural());
    }
}
