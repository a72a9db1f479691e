//! Game primitives: linkage structure, distributions, costs, scenarios.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::math::{exp, fabs, lgamma, log, log1p, pow, sqrt, PI};
use crate::{Error, Result};

/// How the agents of a segment are related.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LinkageKind {
    /// Types share a common component; shocks are independent.
    Quality,
    /// Shocks share a common component; types are independent.
    Circumstance,
    /// The principal forecasts from the agent's own outcome only.
    NoLinkage,
}

impl LinkageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Quality => "quality",
            Self::Circumstance => "circumstance",
            Self::NoLinkage => "no_linkage",
        }
    }
}

/// Variances of the four outcome components in the Gaussian model.
///
/// One parameter set describes a matched pair of models. A quality linkage
/// treats the shock components as independent across agents, and a
/// circumstance linkage does the same for the type components. Either way
/// the marginal variances of `θ_i` and `ε_i` are identical.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianParams {
    pub mu: f64,
    pub var_common_type: f64,
    pub var_idio_type: f64,
    pub var_common_shock: f64,
    pub var_idio_shock: f64,
}

impl GaussianParams {
    pub fn new(
        mu: f64,
        var_common_type: f64,
        var_idio_type: f64,
        var_common_shock: f64,
        var_idio_shock: f64,
    ) -> Result<Self> {
        let p = Self {
            mu,
            var_common_type,
            var_idio_type,
            var_common_shock,
            var_idio_shock,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::structural("prior mean mu must be finite and positive"));
        }
        for (name, v) in [
            ("var_common_type", self.var_common_type),
            ("var_common_shock", self.var_common_shock),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::structural(format!("{name} must be finite and nonnegative")));
            }
        }
        for (name, v) in [
            ("var_idio_type", self.var_idio_type),
            ("var_idio_shock", self.var_idio_shock),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::structural(format!("{name} must be finite and positive")));
            }
        }
        Ok(())
    }

    /// Marginal variance of an agent's type.
    pub fn var_type(&self) -> f64 {
        self.var_common_type + self.var_idio_type
    }

    /// Marginal variance of an agent's shock.
    pub fn var_shock(&self) -> f64 {
        self.var_common_shock + self.var_idio_shock
    }
}

/// A one-dimensional component distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum ComponentDist {
    Gaussian { location: f64, scale: f64 },
    Logistic { location: f64, scale: f64 },
    /// Heavy tailed and not log-concave; admitted for density and quadrature
    /// work only.
    StudentT { location: f64, scale: f64, dof: f64 },
}

impl ComponentDist {
    pub fn gaussian_with_variance(location: f64, variance: f64) -> Self {
        Self::Gaussian {
            location,
            scale: sqrt(variance),
        }
    }

    /// Logistic scale chosen so the variance `π²s²/3` matches `variance`.
    pub fn logistic_with_variance(location: f64, variance: f64) -> Self {
        Self::Logistic {
            location,
            scale: sqrt(3.0 * variance) / PI,
        }
    }

    pub fn student_t_with_variance(location: f64, variance: f64, dof: f64) -> Self {
        Self::StudentT {
            location,
            scale: sqrt(variance * (dof - 2.0) / dof),
            dof,
        }
    }

    pub fn check(&self) -> Result<()> {
        let (loc, scale) = (self.location(), self.scale());
        if !loc.is_finite() || !(scale.is_finite() && scale > 0.0) {
            return Err(Error::structural(
                "component location must be finite and scale positive",
            ));
        }
        if let Self::StudentT { dof, .. } = self {
            if !(dof.is_finite() && *dof > 2.0) {
                return Err(Error::structural("student_t dof must exceed 2"));
            }
        }
        Ok(())
    }

    pub fn location(&self) -> f64 {
        match *self {
            Self::Gaussian { location, .. }
            | Self::Logistic { location, .. }
            | Self::StudentT { location, .. } => location,
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            Self::Gaussian { scale, .. }
            | Self::Logistic { scale, .. }
            | Self::StudentT { scale, .. } => scale,
        }
    }

    /// All three families are symmetric, so the location is the mean.
    pub fn mean(&self) -> f64 {
        self.location()
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Gaussian { scale, .. } => scale * scale,
            Self::Logistic { scale, .. } => PI * PI * scale * scale / 3.0,
            Self::StudentT { scale, dof, .. } => scale * scale * dof / (dof - 2.0),
        }
    }

    pub fn std_dev(&self) -> f64 {
        sqrt(self.variance())
    }

    pub fn is_log_concave(&self) -> bool {
        !matches!(self, Self::StudentT { .. })
    }

    /// The same distribution shifted to location zero.
    pub fn centered(&self) -> Self {
        match *self {
            Self::Gaussian { scale, .. } => Self::Gaussian {
                location: 0.0,
                scale,
            },
            Self::Logistic { scale, .. } => Self::Logistic {
                location: 0.0,
                scale,
            },
            Self::StudentT { scale, dof, .. } => Self::StudentT {
                location: 0.0,
                scale,
                dof,
            },
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { location, scale } => {
                let y = (x - location) / scale;
                -0.5 * y * y - log(scale) - 0.5 * log(2.0 * PI)
            }
            Self::Logistic { location, scale } => {
                let y = fabs((x - location) / scale);
                -y - 2.0 * log1p(exp(-y)) - log(scale)
            }
            Self::StudentT {
                location,
                scale,
                dof,
            } => {
                let y = (x - location) / scale;
                lgamma(0.5 * (dof + 1.0))
                    - lgamma(0.5 * dof)
                    - 0.5 * log(dof * PI)
                    - log(scale)
                    - 0.5 * (dof + 1.0) * log1p(y * y / dof)
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        exp(self.ln_pdf(x))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Gaussian { location, scale } => {
                let z: f64 = StandardNormal.sample(rng);
                location + scale * z
            }
            Self::Logistic { location, scale } => {
                // open interval keeps the logit finite
                let u = (rng.random::<u64>() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
                    + 0.5 / (1u64 << 53) as f64;
                location + scale * log(u / (1.0 - u))
            }
            Self::StudentT {
                location,
                scale,
                dof,
            } => {
                let t = StudentT::new(dof).expect("dof checked positive");
                location + scale * t.sample(rng)
            }
        }
    }

    /// Reflection about the location, used for antithetic pairing.
    pub fn reflect(&self, x: f64) -> f64 {
        2.0 * self.location() - x
    }
}

/// Convex effort cost with closed-form derivative and inverses.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum CostFunction {
    /// `C(a) = κ a² / 2`.
    Quadratic { kappa: f64 },
    /// `C(a) = κ a^γ` with `γ > 1`.
    Power { kappa: f64, gamma: f64 },
}

impl CostFunction {
    pub fn quadratic(kappa: f64) -> Self {
        Self::Quadratic { kappa }
    }

    pub fn power(kappa: f64, gamma: f64) -> Self {
        Self::Power { kappa, gamma }
    }

    pub fn check(&self) -> Result<()> {
        match *self {
            Self::Quadratic { kappa } if kappa.is_finite() && kappa > 0.0 => Ok(()),
            Self::Power { kappa, gamma }
                if kappa.is_finite() && kappa > 0.0 && gamma.is_finite() && gamma > 1.0 =>
            {
                Ok(())
            }
            _ => Err(Error::structural(
                "cost needs kappa > 0 (and gamma > 1 for the power family)",
            )),
        }
    }

    pub fn kappa(&self) -> f64 {
        match *self {
            Self::Quadratic { kappa } | Self::Power { kappa, .. } => kappa,
        }
    }

    /// Exponent of the cost curve (2 for the quadratic family).
    pub fn exponent(&self) -> f64 {
        match *self {
            Self::Quadratic { .. } => 2.0,
            Self::Power { gamma, .. } => gamma,
        }
    }

    /// `C(a)`.
    pub fn eval(&self, a: f64) -> Result<f64> {
        nonneg(a, "effort")?;
        Ok(self.value(a))
    }

    /// `C'(a)`.
    pub fn deriv(&self, a: f64) -> Result<f64> {
        nonneg(a, "effort")?;
        Ok(self.marginal(a))
    }

    /// `C'^{-1}(m)`: the effort whose marginal cost is `m`.
    pub fn deriv_inverse(&self, m: f64) -> Result<f64> {
        nonneg(m, "marginal cost")?;
        Ok(self.effort_for_marginal(m))
    }

    /// `C^{-1}(v)`: the effort whose total cost is `v`.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        nonneg(v, "cost level")?;
        Ok(self.effort_for_cost(v))
    }

    pub(crate) fn value(&self, a: f64) -> f64 {
        match *self {
            Self::Quadratic { kappa } => 0.5 * kappa * a * a,
            Self::Power { kappa, gamma } => kappa * pow(a, gamma),
        }
    }

    pub(crate) fn marginal(&self, a: f64) -> f64 {
        match *self {
            Self::Quadratic { kappa } => kappa * a,
            Self::Power { kappa, gamma } => kappa * gamma * pow(a, gamma - 1.0),
        }
    }

    pub(crate) fn effort_for_marginal(&self, m: f64) -> f64 {
        match *self {
            Self::Quadratic { kappa } => m / kappa,
            Self::Power { kappa, gamma } => pow(m / (kappa * gamma), 1.0 / (gamma - 1.0)),
        }
    }

    pub(crate) fn effort_for_cost(&self, v: f64) -> f64 {
        match *self {
            Self::Quadratic { kappa } => sqrt(2.0 * v / kappa),
            Self::Power { kappa, gamma } => pow(v / kappa, 1.0 / gamma),
        }
    }
}

fn nonneg(x: f64, what: &str) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::domain(format!("{what} must be nonnegative, got {x}")))
    } else {
        Ok(())
    }
}

/// Component distributions for the non-Gaussian parameterisation.
///
/// As with [`GaussianParams`], the same four components serve both linkage
/// kinds; the kind decides which pair is shared across agents. Shock
/// components must be centred at zero. The prior mean of a type is the sum of
/// the two type locations.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneralParams {
    pub common_type: ComponentDist,
    pub idio_type: ComponentDist,
    pub common_shock: ComponentDist,
    pub idio_shock: ComponentDist,
}

impl GeneralParams {
    /// All four components from one family with the given variances.
    pub fn matched(
        family: Family,
        mu: f64,
        var_common_type: f64,
        var_idio_type: f64,
        var_common_shock: f64,
        var_idio_shock: f64,
    ) -> Self {
        let make = |loc: f64, var: f64| match family {
            Family::Gaussian => ComponentDist::gaussian_with_variance(loc, var),
            Family::Logistic => ComponentDist::logistic_with_variance(loc, var),
            Family::StudentT { dof } => ComponentDist::student_t_with_variance(loc, var, dof),
        };
        Self {
            common_type: make(mu, var_common_type),
            idio_type: make(0.0, var_idio_type),
            common_shock: make(0.0, var_common_shock),
            idio_shock: make(0.0, var_idio_shock),
        }
    }

    pub fn check(&self) -> Result<()> {
        for c in [
            &self.common_type,
            &self.idio_type,
            &self.common_shock,
            &self.idio_shock,
        ] {
            c.check()?;
        }
        if self.common_shock.location() != 0.0 || self.idio_shock.location() != 0.0 {
            return Err(Error::structural("shock components must have location 0"));
        }
        let mu = self.mu();
        if !(mu > 0.0) {
            return Err(Error::structural("prior mean of the type must be positive"));
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        self.common_type.location() + self.idio_type.location()
    }

    pub fn components(&self) -> [ComponentDist; 4] {
        [
            self.common_type,
            self.idio_type,
            self.common_shock,
            self.idio_shock,
        ]
    }
}

/// Distribution family selector for [`GeneralParams::matched`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Gaussian,
    Logistic,
    StudentT { dof: f64 },
}

/// A full game description.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub kind: LinkageKind,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub gaussian: Option<GaussianParams>,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub general: Option<GeneralParams>,
    pub cost: CostFunction,
    pub reward: f64,
    pub population: u64,
}

impl Scenario {
    pub fn gaussian(
        kind: LinkageKind,
        params: GaussianParams,
        cost: CostFunction,
        reward: f64,
        population: u64,
    ) -> Self {
        Self {
            kind,
            gaussian: Some(params),
            general: None,
            cost,
            reward,
            population,
        }
    }

    pub fn general(
        kind: LinkageKind,
        params: GeneralParams,
        cost: CostFunction,
        reward: f64,
        population: u64,
    ) -> Self {
        Self {
            kind,
            gaussian: None,
            general: Some(params),
            cost,
            reward,
            population,
        }
    }

    /// Structural validation; anything that fails here is not a game.
    pub fn check_structure(&self) -> Result<()> {
        match (&self.gaussian, &self.general) {
            (Some(g), None) => g.check()?,
            (None, Some(g)) => g.check()?,
            (Some(_), Some(_)) => {
                return Err(Error::structural(
                    "scenario has both gaussian and general parameters",
                ))
            }
            (None, None) => {
                return Err(Error::structural(
                    "scenario has neither gaussian nor general parameters",
                ))
            }
        }
        self.cost.check()?;
        if !self.reward.is_finite() {
            return Err(Error::structural("reward must be finite"));
        }
        if self.population < 1 {
            return Err(Error::structural("population must be at least 1"));
        }
        Ok(())
    }

    pub fn is_gaussian(&self) -> bool {
        self.gaussian.is_some()
    }

    /// Prior mean `μ` of an agent's type.
    pub fn mu(&self) -> f64 {
        match (&self.gaussian, &self.general) {
            (Some(g), _) => g.mu,
            (None, Some(g)) => g.mu(),
            (None, None) => f64::NAN,
        }
    }

    pub fn with_kind(&self, kind: LinkageKind) -> Self {
        Self {
            kind,
            ..self.clone()
        }
    }

    pub fn with_reward(&self, reward: f64) -> Self {
        Self {
            reward,
            ..self.clone()
        }
    }

    pub fn with_population(&self, population: u64) -> Self {
        Self {
            population,
            ..self.clone()
        }
    }

    /// Marginal variances `(Var θ_i, Var ε_i)` implied for this kind.
    pub fn marginal_variances(&self) -> (f64, f64) {
        if let Some(g) = &self.gaussian {
            // every kind reads the same four variances; only the sharing differs
            return (g.var_type(), g.var_shock());
        }
        let s = self.structure();
        let common_var = match s.common {
            Latent::Fixed(_) => 0.0,
            Latent::Random(d) => d.variance(),
        };
        let types: f64 = s.type_parts.iter().map(ComponentDist::variance).sum();
        let shocks: f64 = s.shock_parts.iter().map(ComponentDist::variance).sum();
        if s.common_is_type {
            (types + common_var, shocks)
        } else {
            (types, shocks + common_var)
        }
    }

    /// Latent decomposition of the outcomes under this scenario's linkage.
    ///
    /// Gaussian components with zero variance are dropped (a zero-variance
    /// common component becomes a fixed latent).
    pub fn structure(&self) -> Structure {
        let comps: [Option<ComponentDist>; 4] = match (&self.gaussian, &self.general) {
            (Some(g), _) => {
                let mk = |loc: f64, var: f64| {
                    (var > 0.0).then(|| ComponentDist::gaussian_with_variance(loc, var))
                };
                [
                    mk(g.mu, g.var_common_type),
                    mk(0.0, g.var_idio_type),
                    mk(0.0, g.var_common_shock),
                    mk(0.0, g.var_idio_shock),
                ]
            }
            (None, Some(g)) => [
                Some(g.common_type),
                Some(g.idio_type),
                Some(g.common_shock),
                Some(g.idio_shock),
            ],
            (None, None) => [None; 4],
        };
        let [common_type, idio_type, common_shock, idio_shock] = comps;
        // a dropped common type still carries the prior mean
        let type_mean = match (&self.gaussian, common_type) {
            (Some(g), None) => g.mu,
            _ => 0.0,
        };
        let parts = |xs: &[Option<ComponentDist>]| xs.iter().flatten().copied().collect::<Vec<_>>();
        match self.kind {
            LinkageKind::Quality => Structure {
                common: common_type
                    .map(Latent::Random)
                    .unwrap_or(Latent::Fixed(type_mean)),
                common_is_type: true,
                type_parts: parts(&[idio_type]),
                shock_parts: parts(&[common_shock, idio_shock]),
            },
            LinkageKind::Circumstance => Structure {
                common: common_shock
                    .map(Latent::Random)
                    .unwrap_or(Latent::Fixed(0.0)),
                common_is_type: false,
                type_parts: with_offset(parts(&[common_type, idio_type]), type_mean),
                shock_parts: parts(&[idio_shock]),
            },
            LinkageKind::NoLinkage => Structure {
                common: Latent::Fixed(0.0),
                common_is_type: false,
                type_parts: with_offset(parts(&[common_type, idio_type]), type_mean),
                shock_parts: parts(&[common_shock, idio_shock]),
            },
        }
    }
}

fn with_offset(mut parts: Vec<ComponentDist>, offset: f64) -> Vec<ComponentDist> {
    if offset != 0.0 {
        if let Some(first) = parts.first_mut() {
            *first = match *first {
                ComponentDist::Gaussian { location, scale } => ComponentDist::Gaussian {
                    location: location + offset,
                    scale,
                },
                ComponentDist::Logistic { location, scale } => ComponentDist::Logistic {
                    location: location + offset,
                    scale,
                },
                ComponentDist::StudentT {
                    location,
                    scale,
                    dof,
                } => ComponentDist::StudentT {
                    location: location + offset,
                    scale,
                    dof,
                },
            };
        }
    }
    parts
}

/// The component shared by every agent of the segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Latent {
    Fixed(f64),
    Random(ComponentDist),
}

impl Latent {
    pub fn mean(&self) -> f64 {
        match self {
            Self::Fixed(m) => *m,
            Self::Random(d) => d.mean(),
        }
    }
}

/// Outcome decomposition `S_j = a_j + z + Σ type_parts + Σ shock_parts` where
/// `z` is the common latent.
#[derive(Clone, Debug, PartialEq)]
pub struct Structure {
    pub common: Latent,
    /// Whether `z` is part of every agent's type (quality) or of the shock.
    pub common_is_type: bool,
    pub type_parts: Vec<ComponentDist>,
    pub shock_parts: Vec<ComponentDist>,
}

impl Structure {
    pub fn is_log_concave(&self) -> bool {
        let common = match &self.common {
            Latent::Fixed(_) => true,
            Latent::Random(d) => d.is_log_concave(),
        };
        common
            && self
                .type_parts
                .iter()
                .chain(&self.shock_parts)
                .all(ComponentDist::is_log_concave)
    }
}

/// Outcome of one assumption check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not numerically checkable; holds for the supported families.
    Assumed,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    fn push(&mut self, name: &'static str, status: CheckStatus, detail: impl Into<String>) {
        self.checks.push(AssumptionCheck {
            name,
            status,
            detail: detail.into(),
        });
    }
}

/// Reports the model assumptions for a scenario.
///
/// Only structural problems are errors. Entry and profitability conditions
/// are reported so that regimes which deliberately violate them (a
/// monopolist setting `R` freely) can still be studied.
pub fn validate_scenario(s: &Scenario) -> Result<ValidationReport> {
    use CheckStatus::*;
    s.check_structure()?;
    let mut report = ValidationReport::default();
    let structure = s.structure();

    report.push(
        "density_regularity",
        Pass,
        "supported families have strictly positive smooth densities",
    );
    let (vt, ve) = s.marginal_variances();
    let (qt, qe) = s.with_kind(LinkageKind::Quality).marginal_variances();
    let (ct, ce) = s.with_kind(LinkageKind::Circumstance).marginal_variances();
    let same = |a: f64, b: f64| fabs(a - b) <= 1e-12 * a.max(b).max(1.0);
    report.push(
        "marginal_invariance",
        if same(qt, ct) && same(qe, ce) { Pass } else { Fail },
        format!("var(theta) = {vt}, var(eps) = {ve}"),
    );
    report.push(
        "posterior_regularity",
        Assumed,
        "assumed for supported families",
    );
    report.push(
        "finite_fisher_information",
        Assumed,
        "assumed for supported families",
    );
    let log_concave = structure.is_log_concave();
    report.push(
        "log_concavity",
        if log_concave { Pass } else { Fail },
        if log_concave {
            "all components log-concave"
        } else {
            "student_t components are not log-concave"
        },
    );
    let convex_ok = s.is_gaussian()
        || matches!(s.cost, CostFunction::Quadratic { kappa } if kappa >= 1.0);
    report.push(
        "sufficient_convexity",
        if convex_ok { Pass } else { Fail },
        if s.is_gaussian() {
            "linear Gaussian forecasts: any convex cost"
        } else {
            "non-Gaussian scenarios are supported for quadratic cost with kappa >= 1"
        },
    );

    let a1 = crate::equilibrium::MvCurve::single_agent_effort(s)?;
    let mu = s.mu();
    let entry_bound = s.cost.value(a1) - mu;
    report.push(
        "individual_entry",
        if s.reward >= entry_bound { Pass } else { Fail },
        format!("R = {} vs C(a*(1)) - mu = {entry_bound}", s.reward),
    );
    report.push(
        "profitable_market",
        if a1 + mu > s.reward { Pass } else { Fail },
        format!("a*(1) + mu = {} vs R = {}", a1 + mu, s.reward),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn canonical() -> GaussianParams {
        GaussianParams::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap()
    }

    #[test]
    fn quadratic_cost_examples() {
        let c = CostFunction::quadratic(1.0);
        assert_eq!(c.deriv_inverse(0.625).unwrap(), 0.625);
        assert!((c.inverse(0.48).unwrap() - sqrt(0.96)).abs() < 1e-15);
        assert!((c.inverse(0.48).unwrap() - 0.9798).abs() < 5e-5);
    }

    #[test]
    fn power_cost_examples() {
        let c = CostFunction::power(1.0, 3.0);
        assert_eq!(c.deriv(2.0).unwrap(), 12.0);
        assert!((c.deriv_inverse(1.0).unwrap() - 1.0 / sqrt(3.0)).abs() < 1e-15);
    }

    #[test]
    fn cost_inverse_agrees_with_bisection() {
        let c = CostFunction::power(0.7, 2.6);
        for v in [1e-4, 0.3, 2.0, 40.0] {
            let bis = crate::math::bisect(0.0, 100.0, 1e-14, |a| c.value(a) - v);
            assert!((c.inverse(v).unwrap() - bis).abs() < 1e-12 * bis.max(1.0));
        }
    }

    #[test]
    fn negative_arguments_are_domain_errors() {
        let c = CostFunction::quadratic(1.0);
        assert!(matches!(c.eval(-1.0), Err(Error::Domain(_))));
        assert!(matches!(c.deriv(-0.1), Err(Error::Domain(_))));
        assert!(matches!(c.deriv_inverse(-0.1), Err(Error::Domain(_))));
        assert!(matches!(c.inverse(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn cost_boundary_conditions() {
        for c in [CostFunction::quadratic(2.0), CostFunction::power(1.5, 1.3)] {
            assert_eq!(c.value(0.0), 0.0);
            assert_eq!(c.marginal(0.0), 0.0);
            assert!(c.marginal(1e6) > 1.0);
        }
    }

    #[test]
    fn log_concave_families_pass_midpoint_test() {
        let dists = [
            ComponentDist::gaussian_with_variance(0.3, 2.0),
            ComponentDist::logistic_with_variance(-1.0, 0.7),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for d in dists {
            assert!(d.is_log_concave());
            let sd = d.std_dev();
            for _ in 0..1000 {
                let x = d.location() + sd * (rng.random::<f64>() * 16.0 - 8.0);
                let gap = sd * (0.01 + rng.random::<f64>());
                let (lo, hi) = (x - gap, x + gap);
                let mid = d.ln_pdf(x);
                let chord = 0.5 * (d.ln_pdf(lo) + d.ln_pdf(hi));
                // strict concavity: midpoint exceeds the chord by a curvature-scaled margin
                let margin = match d {
                    ComponentDist::Gaussian { scale, .. } => 0.5 * gap * gap / (scale * scale),
                    _ => 0.0,
                };
                assert!(mid - chord > 0.5 * margin && mid > chord, "{d:?} at {x}");
            }
        }
        let t = ComponentDist::student_t_with_variance(0.0, 1.0, 4.0);
        assert!(!t.is_log_concave());
        // far in the tail the chord lies above the log density
        assert!(t.ln_pdf(10.0) < 0.5 * (t.ln_pdf(6.0) + t.ln_pdf(14.0)));
    }

    #[test]
    fn densities_integrate_to_one_with_right_variance() {
        let gl = crate::math::GaussLegendre::new(400);
        for d in [
            ComponentDist::gaussian_with_variance(0.5, 1.3),
            ComponentDist::logistic_with_variance(0.5, 1.3),
            ComponentDist::student_t_with_variance(0.5, 1.3, 30.0),
        ] {
            let m = gl.integrate(-60.0, 60.0, |x| d.pdf(x));
            let v = gl.integrate(-60.0, 60.0, |x| (x - 0.5) * (x - 0.5) * d.pdf(x));
            assert!((m - 1.0).abs() < 1e-7, "{d:?} mass {m}");
            assert!((v - 1.3).abs() < 1e-3, "{d:?} variance {v}");
        }
    }

    #[test]
    fn marginal_variances_are_invariant_across_kinds() {
        let s = Scenario::gaussian(
            LinkageKind::Quality,
            canonical(),
            CostFunction::quadratic(1.0),
            0.0,
            2,
        );
        let q = s.marginal_variances();
        let c = s.with_kind(LinkageKind::Circumstance).marginal_variances();
        let n = s.with_kind(LinkageKind::NoLinkage).marginal_variances();
        assert_eq!(q, c);
        assert_eq!(q, n);
        assert_eq!(q, (2.0, 1.0));
    }

    #[test]
    fn validation_examples() {
        let p = GaussianParams::new(1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        let s = Scenario::gaussian(
            LinkageKind::Quality,
            p,
            CostFunction::quadratic(1.0),
            0.0,
            2,
        );
        let report = validate_scenario(&s).unwrap();
        assert!(report.all_pass());
        assert_eq!(
            report.get("individual_entry").unwrap().status,
            CheckStatus::Pass
        );

        let low = validate_scenario(&s.with_reward(-2.0)).unwrap();
        assert_eq!(
            low.get("individual_entry").unwrap().status,
            CheckStatus::Fail
        );

        let mut bad = s.clone();
        bad.gaussian = Some(GaussianParams {
            var_idio_type: 0.0,
            ..p
        });
        assert!(validate_scenario(&bad).unwrap_err().is_structural());
    }

    #[test]
    fn both_or_neither_parameterisation_is_structural() {
        let mut s = Scenario::gaussian(
            LinkageKind::Quality,
            canonical(),
            CostFunction::quadratic(1.0),
            0.0,
            2,
        );
        s.general = Some(GeneralParams::matched(
            Family::Logistic,
            1.0,
            1.0,
            1.0,
            0.5,
            0.5,
        ));
        assert!(s.check_structure().unwrap_err().is_structural());
        s.gaussian = None;
        s.general = None;
        assert!(s.check_structure().unwrap_err().is_structural());
    }

    #[test]
    fn student_t_flags_log_concavity() {
        let g = GeneralParams::matched(Family::StudentT { dof: 5.0 }, 1.0, 1.0, 1.0, 0.5, 0.5);
        let s = Scenario::general(
            LinkageKind::Quality,
            g,
            CostFunction::quadratic(1.0),
            0.0,
            2,
        );
        assert!(!s.structure().is_log_concave());
    }
}
