//! Brute-force Monte Carlo estimates of the agent's expected forecast.
//!
//! Every component of every outcome is drawn from its own distribution, the
//! deviating agent's outcome is shifted by `Δ`, and the principal's forecast
//! is evaluated at the conjectured efforts. Nothing here relies on the closed
//! forms: Gaussian forecasts come from a dense covariance solve and
//! non-Gaussian ones from the quadrature engine.
//!
//! Draws are split into fixed-size chunks. Chunk `i` uses a ChaCha8 stream
//! keyed by `(seed, i)`, and chunk statistics are merged in index order, so
//! results do not depend on how chunks are scheduled.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::gaussian::segment_projection;
use crate::math::{sqrt, RunningStats};
use crate::model::{Latent, Scenario, Structure};
use crate::posterior::{PosteriorModel, QuadratureConfig, MAX_QUADRATURE_N};
use crate::{Error, LinkageKind, MvMethod, MvResult, Result};

/// Per-draw statistic of the outcomes, with two scratch buffers.
type Statistic<'a> = dyn Fn(&[f64], &mut Vec<f64>, &mut Vec<f64>) -> Result<f64> + Sync + 'a;

/// Samples (or antithetic pairs) per RNG chunk.
const CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleConfig {
    pub draws: u64,
    pub seed: u64,
    /// Differencing step for [`estimate_mv`].
    pub delta: f64,
    /// Pair each draw with one that reflects the deviating agent's
    /// idiosyncratic shock.
    pub antithetic: bool,
    /// Effort the principal conjectures for every agent.
    pub conjectured_effort: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            draws: 1_000_000,
            seed: 0,
            delta: 1e-2,
            antithetic: true,
            conjectured_effort: 0.0,
        }
    }
}

impl OracleConfig {
    pub fn check(&self) -> Result<()> {
        if self.draws < 10_000 {
            return Err(Error::structural("oracle needs at least 10^4 draws"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::structural("oracle delta must be positive"));
        }
        if !(self.conjectured_effort >= 0.0 && self.conjectured_effort.is_finite()) {
            return Err(Error::structural("conjectured effort must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleEstimate {
    pub value: f64,
    pub std_error: f64,
    pub draws_used: u64,
}

impl OracleEstimate {
    pub fn into_mv(self) -> MvResult {
        MvResult {
            value: self.value,
            std_error: Some(self.std_error),
            method: MvMethod::MonteCarlo,
        }
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        crate::math::fabs(self.value - target) <= k * self.std_error
    }
}

enum Forecaster {
    Linear {
        mean_target: f64,
        mean_signal: f64,
        beta: Vec<f64>,
    },
    Quadrature(Box<PosteriorModel>),
}

impl Forecaster {
    fn new(s: &Scenario, n: usize, effort: f64) -> Result<Self> {
        match &s.gaussian {
            Some(p) => {
                let prob = segment_projection(p, s.kind, n, effort)?;
                let mut beta = prob.coefficients()?;
                beta.resize(n, 0.0);
                Ok(Self::Linear {
                    mean_target: prob.mean_target,
                    mean_signal: prob.mean_signals[0],
                    beta,
                })
            }
            None => {
                if n as u64 > MAX_QUADRATURE_N {
                    return Err(Error::unsupported(alloc::format!(
                        "non-Gaussian oracle is limited to N <= {MAX_QUADRATURE_N}"
                    )));
                }
                let model = PosteriorModel::new(s, &QuadratureConfig::default())?;
                Ok(Self::Quadrature(Box::new(model)))
            }
        }
    }

    /// Forecast of agent 0 from outcomes `s`, all conjectured at `effort`.
    fn forecast(&self, s: &[f64], effort: f64, scratch: &mut Vec<f64>, no_linkage: bool) -> Result<f64> {
        match self {
            Self::Linear {
                mean_target,
                mean_signal,
                beta,
            } => Ok(mean_target
                + beta
                    .iter()
                    .zip(s)
                    .map(|(b, x)| b * (x - mean_signal))
                    .sum::<f64>()),
            Self::Quadrature(model) => {
                let used = if no_linkage { &s[..1] } else { s };
                scratch.clear();
                scratch.extend(used.iter().map(|x| x - effort));
                model.posterior_mean_residuals(scratch, 0)
            }
        }
    }
}

/// Draws one segment's outcomes (before effort) into `out`; returns agent 0's
/// last shock part so the antithetic partner can reflect it.
fn draw_outcomes(st: &Structure, rng: &mut ChaCha8Rng, out: &mut [f64]) -> f64 {
    let z = match st.common {
        Latent::Fixed(m) => m,
        Latent::Random(d) => d.sample(rng),
    };
    let mut own_shock = 0.0;
    for (j, slot) in out.iter_mut().enumerate() {
        let mut u = z;
        for p in &st.type_parts {
            u += p.sample(rng);
        }
        for p in &st.shock_parts {
            let e = p.sample(rng);
            if j == 0 {
                own_shock = e;
            }
            u += e;
        }
        *slot = u;
    }
    own_shock
}

struct Sim<'a> {
    st: Structure,
    forecaster: Forecaster,
    n: usize,
    cfg: &'a OracleConfig,
    no_linkage: bool,
}

impl Sim<'_> {
    fn new<'a>(s: &Scenario, n: u64, cfg: &'a OracleConfig) -> Result<Sim<'a>> {
        s.check_structure()?;
        cfg.check()?;
        if n < 1 {
            return Err(Error::domain("segment size must be at least 1"));
        }
        let n = n as usize;
        Ok(Sim {
            st: s.structure(),
            forecaster: Forecaster::new(s, n, cfg.conjectured_effort)?,
            n,
            cfg,
            no_linkage: s.kind == LinkageKind::NoLinkage,
        })
    }

    /// Mean of `stat(outcomes)` with antithetic pairing on agent 0's last
    /// shock part. `stat` receives outcomes including effort.
    fn run(
        &self,
        stream_offset: u64,
        stat: &Statistic<'_>,
    ) -> Result<OracleEstimate> {
        let per_sample = if self.cfg.antithetic { 2 } else { 1 };
        let samples = self.cfg.draws.div_ceil(per_sample);
        let chunks = samples.div_ceil(CHUNK);
        let effort = self.cfg.conjectured_effort;
        let shock_center = self.st.shock_parts.last().map_or(0.0, |d| d.location());

        let chunk_stats = |c: u64| -> Result<RunningStats> {
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
            rng.set_stream(stream_offset + c);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut stats = RunningStats::default();
            let mut out = vec![0.0; self.n];
            let mut buf = Vec::with_capacity(self.n);
            let mut scratch = Vec::with_capacity(self.n);
            for _ in 0..count {
                let last = draw_outcomes(&self.st, &mut rng, &mut out);
                out.iter_mut().for_each(|x| *x += effort);
                let mut v = stat(&out, &mut buf, &mut scratch)?;
                if self.cfg.antithetic {
                    out[0] += 2.0 * (shock_center - last);
                    v = 0.5 * (v + stat(&out, &mut buf, &mut scratch)?);
                }
                stats.push(v);
            }
            Ok(stats)
        };

        #[cfg(feature = "std")]
        let per_chunk: Vec<Result<RunningStats>> = {
            use rayon::prelude::*;
            (0..chunks).into_par_iter().map(chunk_stats).collect()
        };
        #[cfg(not(feature = "std"))]
        let per_chunk: Vec<Result<RunningStats>> = (0..chunks).map(chunk_stats).collect();

        let mut total = RunningStats::default();
        for s in per_chunk {
            total.merge(&s?);
        }
        Ok(OracleEstimate {
            value: total.mean,
            std_error: total.std_error(),
            draws_used: samples * per_sample,
        })
    }

    fn forecast(&self, s: &[f64], scratch: &mut Vec<f64>) -> Result<f64> {
        self.forecaster
            .forecast(s, self.cfg.conjectured_effort, scratch, self.no_linkage)
    }
}

/// `μ_N(Δ)`: expected forecast of agent 0 when it deviates by `delta`.
pub fn simulate_mu(s: &Scenario, n: u64, delta: f64, cfg: &OracleConfig) -> Result<OracleEstimate> {
    let sim = Sim::new(s, n, cfg)?;
    sim.run(0, &|out, buf, scratch| {
        buf.clear();
        buf.extend_from_slice(out);
        buf[0] += delta;
        sim.forecast(buf, scratch)
    })
}

/// Central difference of `μ_N` at zero with common draws for `±δ`.
pub fn estimate_mv(s: &Scenario, n: u64, cfg: &OracleConfig) -> Result<OracleEstimate> {
    let sim = Sim::new(s, n, cfg)?;
    let d = cfg.delta;
    sim.run(0, &|out, buf, scratch| {
        buf.clear();
        buf.extend_from_slice(out);
        buf[0] += d;
        let up = sim.forecast(buf, scratch)?;
        buf[0] -= 2.0 * d;
        let down = sim.forecast(buf, scratch)?;
        Ok((up - down) / (2.0 * d))
    })
}

/// Central difference with independent draws for `+δ` and `−δ`; only useful
/// as a benchmark for the variance reduction of [`estimate_mv`].
pub fn estimate_mv_independent(
    s: &Scenario,
    n: u64,
    cfg: &OracleConfig,
) -> Result<OracleEstimate> {
    let sim = Sim::new(s, n, cfg)?;
    let d = cfg.delta;
    let half = |sign: f64, offset: u64| {
        sim.run(offset, &|out, buf, scratch| {
            buf.clear();
            buf.extend_from_slice(out);
            buf[0] += sign * d;
            sim.forecast(buf, scratch)
        })
    };
    let up = half(1.0, 0)?;
    let down = half(-1.0, 1 << 32)?;
    Ok(OracleEstimate {
        value: (up.value - down.value) / (2.0 * d),
        std_error: sqrt(up.std_error * up.std_error + down.std_error * down.std_error) / (2.0 * d),
        draws_used: up.draws_used + down.draws_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostFunction, GaussianParams};

    fn canonical(kind: LinkageKind) -> Scenario {
        Scenario::gaussian(
            kind,
            GaussianParams::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap(),
            CostFunction::quadratic(1.0),
            0.0,
            2,
        )
    }

    fn small() -> OracleConfig {
        OracleConfig {
            draws: 50_000,
            ..Default::default()
        }
    }

    #[test]
    fn martingale_and_linear_shift() {
        let s = canonical(LinkageKind::Quality);
        let m0 = simulate_mu(&s, 2, 0.0, &small()).unwrap();
        assert!(m0.covers(1.0, 3.0), "{m0:?}");
        let m = simulate_mu(&s, 2, 0.5, &small()).unwrap();
        assert!(m.covers(1.3125, 3.0), "{m:?}");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let s = canonical(LinkageKind::Circumstance);
        let a = simulate_mu(&s, 3, 0.2, &small()).unwrap();
        let b = simulate_mu(&s, 3, 0.2, &small()).unwrap();
        assert_eq!(a, b);
        let other = simulate_mu(&s, 3, 0.2, &OracleConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.value, other.value);
    }

    #[test]
    fn too_few_draws_is_structural() {
        let s = canonical(LinkageKind::Quality);
        let cfg = OracleConfig {
            draws: 10,
            ..Default::default()
        };
        assert!(estimate_mv(&s, 2, &cfg).unwrap_err().is_structural());
    }
}
