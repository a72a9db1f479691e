//! Entry-and-effort equilibria.
//!
//! Agents first decide whether to opt in, then choose effort. With full
//! entry each agent exerts `C'^{-1}(MV(N))`. Under a circumstance linkage a
//! large segment can make full entry unprofitable; agents then mix, entering
//! with probability `p` at an effort `a**` pinned down by indifference
//! `R + μ = C(a**)`, and `p` equates the binomial-expected `MV` with
//! `C'(a**)`.

use alloc::format;
use alloc::vec::Vec;

use crate::gaussian::{mv_closed_real, mv_limit};
use crate::math::{binomial_expectation, bisect};
use crate::model::{CostFunction, GaussianParams, LinkageKind, Scenario};
use crate::posterior::{PosteriorModel, QuadratureConfig, DEFAULT_DELTA, MAX_QUADRATURE_N};
use crate::{Error, Result};

/// Bracket width for entry-probability bisection.
const P_TOL: f64 = 1e-15;

/// Largest `N` probed by the exponential search before the limit comparison
/// is trusted.
const SEARCH_CAP: u64 = 1 << 30;

/// `N ↦ MV(N)` for one scenario.
#[derive(Clone, Debug, PartialEq)]
pub enum MvCurve {
    Closed {
        params: GaussianParams,
        kind: LinkageKind,
    },
    /// `values[k]` is `MV(k + 1)`; real arguments interpolate linearly.
    Tabulated { kind: LinkageKind, values: Vec<f64> },
}

impl MvCurve {
    /// Closed forms for Gaussian scenarios; otherwise quadrature values for
    /// `N = 1..=n_max` (at most [`MAX_QUADRATURE_N`]).
    pub fn for_scenario(s: &Scenario, n_max: u64) -> Result<Self> {
        s.check_structure()?;
        if let Some(p) = s.gaussian {
            return Ok(Self::Closed {
                params: p,
                kind: s.kind,
            });
        }
        let n_max = n_max.clamp(1, MAX_QUADRATURE_N);
        let model = PosteriorModel::new(s, &QuadratureConfig::default())?;
        let values = if s.kind == LinkageKind::NoLinkage {
            let v = model.mv(1, DEFAULT_DELTA)?.value;
            alloc::vec![v; n_max as usize]
        } else {
            (1..=n_max)
                .map(|n| model.mv(n, DEFAULT_DELTA).map(|r| r.value))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self::Tabulated {
            kind: s.kind,
            values,
        })
    }

    pub fn kind(&self) -> LinkageKind {
        match self {
            Self::Closed { kind, .. } | Self::Tabulated { kind, .. } => *kind,
        }
    }

    /// Largest tabulated `N`, if the curve is tabulated.
    pub fn max_n(&self) -> Option<u64> {
        match self {
            Self::Closed { .. } => None,
            Self::Tabulated { values, .. } => Some(values.len() as u64),
        }
    }

    pub fn mv(&self, n: u64) -> Result<f64> {
        self.mv_real(n as f64)
    }

    /// `MV` at a real segment size (closed form, or linear interpolation).
    pub fn mv_real(&self, x: f64) -> Result<f64> {
        match self {
            Self::Closed { params, kind } => mv_closed_real(params, *kind, x),
            Self::Tabulated { values, .. } => {
                if x.is_nan() || x < 1.0 {
                    return Err(Error::domain(format!("segment size must be at least 1, got {x}")));
                }
                let top = values.len() as f64;
                if x > top {
                    return Err(Error::unsupported(format!(
                        "marginal value tabulated only up to N = {top}"
                    )));
                }
                let i = (x as usize).min(values.len()) - 1;
                let frac = x - (i + 1) as f64;
                if frac == 0.0 || i + 1 == values.len() {
                    Ok(values[i])
                } else {
                    Ok(values[i] + frac * (values[i + 1] - values[i]))
                }
            }
        }
    }

    /// `lim_{N→∞} MV(N)`, known only for closed forms.
    pub fn limit(&self) -> Option<f64> {
        match self {
            Self::Closed { params, kind } => Some(mv_limit(params, *kind)),
            Self::Tabulated { .. } => None,
        }
    }

    /// `a*(1) = C'^{-1}(MV(1))`, which is shared by every linkage kind.
    pub fn single_agent_effort(s: &Scenario) -> Result<f64> {
        let curve = Self::for_scenario(&s.with_kind(LinkageKind::NoLinkage), 1)?;
        s.cost.deriv_inverse(curve.mv(1)?)
    }
}

/// Largest population that sustains full entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NStar {
    Finite(u64),
    Infinite,
}

impl NStar {
    pub fn admits(self, n: u64) -> bool {
        match self {
            Self::Finite(k) => n <= k,
            Self::Infinite => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Regime {
    FullEntry,
    MixedEntry,
    Benchmark,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FullEntry => "full_entry",
            Self::MixedEntry => "mixed_entry",
            Self::Benchmark => "benchmark",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Equilibrium {
    pub regime: Regime,
    pub entry_prob: f64,
    pub effort: f64,
    /// Circumstance linkage only.
    pub n_star: Option<NStar>,
    /// Mixed entry only.
    pub a_double_star: Option<f64>,
    pub population: u64,
    /// Marginal value the agents respond to: `MV(N)` under full entry, the
    /// binomial expectation under mixed entry.
    pub marginal_value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FirstBest {
    pub effort: f64,
}

/// A scenario together with its `MV` curve.
#[derive(Clone, Debug)]
pub struct Game {
    scenario: Scenario,
    curve: MvCurve,
}

impl Game {
    /// Builds the curve needed for segments up to `n_max`.
    ///
    /// Non-Gaussian games are restricted to log-concave components and
    /// quadratic costs with `κ ≥ 1`, where the first-order approach is safe.
    pub fn new(s: &Scenario, n_max: u64) -> Result<Self> {
        s.check_structure()?;
        if !s.is_gaussian() {
            if !s.structure().is_log_concave() {
                return Err(Error::unsupported(
                    "equilibria need log-concave components",
                ));
            }
            if !matches!(s.cost, CostFunction::Quadratic { kappa } if kappa >= 1.0) {
                return Err(Error::unsupported(
                    "non-Gaussian equilibria need a quadratic cost with kappa >= 1",
                ));
            }
        }
        Ok(Self {
            scenario: s.clone(),
            curve: MvCurve::for_scenario(s, n_max)?,
        })
    }

    pub fn with_curve(s: &Scenario, curve: MvCurve) -> Self {
        Self {
            scenario: s.clone(),
            curve,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn curve(&self) -> &MvCurve {
        &self.curve
    }

    fn cost(&self) -> &CostFunction {
        &self.scenario.cost
    }

    fn mu(&self) -> f64 {
        self.scenario.mu()
    }

    pub fn mv(&self, n: u64) -> Result<f64> {
        self.curve.mv(n)
    }

    /// `a*(N) = C'^{-1}(MV(N))`; the benchmark uses `N = 1` whatever `n`.
    pub fn effort_full_entry(&self, n: u64) -> Result<f64> {
        if n < 1 {
            return Err(Error::domain("segment size must be at least 1"));
        }
        self.cost().deriv_inverse(self.curve.mv(n)?)
    }

    pub fn single_agent_effort(&self) -> Result<f64> {
        self.effort_full_entry(1)
    }

    /// `E[MV(1 + K)]` with `K ~ Bin(N − 1, p)`.
    pub fn mv_mixed(&self, n: u64, p: f64) -> Result<f64> {
        if n < 1 {
            return Err(Error::domain("segment size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("entry probability {p} outside [0, 1]")));
        }
        if let Some(top) = self.curve.max_n() {
            if n > top {
                return Err(Error::unsupported(format!(
                    "marginal value tabulated only up to N = {top}"
                )));
            }
        }
        let mut err = None;
        let v = binomial_expectation(n - 1, p, |k| match self.curve.mv(1 + k) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// `a** = C^{-1}(R + μ)`.
    pub fn a_double_star(&self) -> Result<f64> {
        let level = self.scenario.reward + self.mu();
        if !(level > 0.0) {
            return Err(Error::domain(format!(
                "R + mu = {level} is not positive; no effort makes entry worthwhile"
            )));
        }
        self.cost().inverse(level)
    }

    /// Largest `N` with `MV_C(N) ≤ C'(a**)` (ties sustain full entry).
    pub fn n_star(&self) -> Result<NStar> {
        if self.scenario.kind != LinkageKind::Circumstance {
            return Err(Error::domain("N* is defined for circumstance linkages only"));
        }
        let target = self.cost().marginal(self.a_double_star()?);
        let holds = |n: u64| self.curve.mv(n).map(|v| v <= target);
        if let Some(limit) = self.curve.limit() {
            if target >= limit {
                return Ok(NStar::Infinite);
            }
        }
        if !holds(1)? {
            return Ok(NStar::Finite(0));
        }
        if let Some(top) = self.curve.max_n() {
            // tabulated curves cannot certify anything past their range
            let mut last = 1;
            for n in 2..=top {
                if !holds(n)? {
                    return Ok(NStar::Finite(last));
                }
                last = n;
            }
            return Err(Error::unsupported(format!(
                "full entry holds up to the tabulated N = {top}; N* is not determined"
            )));
        }
        let mut lo = 1;
        let mut hi = 2;
        while holds(hi)? {
            lo = hi;
            if hi >= SEARCH_CAP {
                return Ok(NStar::Infinite);
            }
            hi *= 2;
        }
        // holds(lo) and !holds(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if holds(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(NStar::Finite(lo))
    }

    /// Whether `R ≥ C(a*(1)) − μ`.
    pub fn individual_entry_holds(&self) -> Result<bool> {
        let a1 = self.single_agent_effort()?;
        Ok(self.scenario.reward >= self.cost().value(a1) - self.mu())
    }

    /// Equilibrium for a segment of `n` agents.
    pub fn solve(&self, n: u64) -> Result<Equilibrium> {
        if n < 1 {
            return Err(Error::domain("segment size must be at least 1"));
        }
        if !self.individual_entry_holds()? {
            return Err(Error::domain(
                "R is below C(a*(1)) - mu: no agent opts in even alone",
            ));
        }
        let full = |regime: Regime, mv_n: u64, n_star: Option<NStar>| -> Result<Equilibrium> {
            let mv = self.curve.mv(mv_n)?;
            Ok(Equilibrium {
                regime,
                entry_prob: 1.0,
                effort: self.cost().deriv_inverse(mv)?,
                n_star,
                a_double_star: None,
                population: n,
                marginal_value: mv,
            })
        };
        match self.scenario.kind {
            LinkageKind::Quality => full(Regime::FullEntry, n, None),
            LinkageKind::NoLinkage => full(Regime::Benchmark, 1, None),
            LinkageKind::Circumstance => {
                let n_star = match self.n_star() {
                    Ok(k) => k,
                    // a short table that sustains full entry throughout still
                    // decides every population it covers
                    Err(Error::Unsupported(_)) if self.curve.max_n().is_some_and(|m| n <= m) => {
                        return full(Regime::FullEntry, n, None);
                    }
                    Err(e) => return Err(e),
                };
                if n_star.admits(n) {
                    return full(Regime::FullEntry, n, Some(n_star));
                }
                let a2 = self.a_double_star()?;
                let target = self.cost().marginal(a2);
                let p = self.mixing_probability(n, target)?;
                Ok(Equilibrium {
                    regime: Regime::MixedEntry,
                    entry_prob: p,
                    effort: a2,
                    n_star: Some(n_star),
                    a_double_star: Some(a2),
                    population: n,
                    marginal_value: self.mv_mixed(n, p)?,
                })
            }
        }
    }

    /// `p` with `mv_mixed(n, p) = target`, given that `target` lies between
    /// `MV(1)` and `MV(n)`.
    pub fn mixing_probability(&self, n: u64, target: f64) -> Result<f64> {
        let f0 = self.mv_mixed(n, 0.0)? - target;
        let f1 = self.mv_mixed(n, 1.0)? - target;
        if f0 == 0.0 {
            return Ok(0.0);
        }
        if f1 == 0.0 {
            return Ok(1.0);
        }
        if (f0 < 0.0) == (f1 < 0.0) {
            return Err(Error::domain(format!(
                "C'(a) = {target} lies outside the range of the mixed marginal value"
            )));
        }
        let mut err = None;
        let p = bisect(0.0, 1.0, P_TOL, |p| match self.mv_mixed(n, p) {
            Ok(v) => v - target,
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(p),
        }
    }

    /// Entry probability solving `MV(1 + p(N − 1)) = C'(a**)`, i.e. the
    /// analogue of the mixing probability if the number of co-entrants were
    /// its mean rather than binomial.
    pub fn deterministic_entry_probability(&self, n: u64) -> Result<f64> {
        if self.scenario.kind != LinkageKind::Circumstance {
            return Err(Error::domain(
                "entry is never mixed outside a circumstance linkage",
            ));
        }
        if n < 1 {
            return Err(Error::domain("segment size must be at least 1"));
        }
        let n_star = self.n_star()?;
        if n_star.admits(n) {
            return Ok(1.0);
        }
        let target = self.cost().marginal(self.a_double_star()?);
        let nf = (n - 1) as f64;
        let at = |p: f64| self.curve.mv_real(1.0 + p * nf).map(|v| v - target);
        let (f0, f1) = (at(0.0)?, at(1.0)?);
        if (f0 < 0.0) == (f1 < 0.0) && f0 != 0.0 && f1 != 0.0 {
            return Err(Error::domain("no deterministic entry probability solves the condition"));
        }
        let mut err = None;
        let p = bisect(0.0, 1.0, P_TOL, |p| match at(p) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(p),
        }
    }

    pub fn first_best(&self) -> FirstBest {
        first_best(&self.scenario)
    }
}

pub fn effort_full_entry(s: &Scenario, n: u64) -> Result<f64> {
    Game::new(s, n)?.effort_full_entry(n)
}

pub fn mv_mixed(s: &Scenario, n: u64, p: f64) -> Result<f64> {
    Game::new(s, n)?.mv_mixed(n, p)
}

pub fn solve_n_star(s: &Scenario) -> Result<NStar> {
    Game::new(s, MAX_QUADRATURE_N)?.n_star()
}

pub fn solve_equilibrium(s: &Scenario, n: u64) -> Result<Equilibrium> {
    let needed = if s.kind == LinkageKind::Circumstance {
        MAX_QUADRATURE_N
    } else {
        n
    };
    Game::new(s, needed)?.solve(n)
}

pub fn deterministic_entry_probability(s: &Scenario, n: u64) -> Result<f64> {
    Game::new(s, MAX_QUADRATURE_N)?.deterministic_entry_probability(n)
}

/// `C'^{-1}(1)`: the effort maximising `a − C(a)`.
pub fn first_best(s: &Scenario) -> FirstBest {
    FirstBest {
        effort: s.cost.effort_for_marginal(1.0),
    }
}
