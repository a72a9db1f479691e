//! Welfare accounting and policy comparisons.
//!
//! Every participating agent generates `a + 2μ − C(a)` of surplus. The
//! transfer `R` splits it: consumers keep `R + μ − C(a)` and the principal
//! keeps `a + μ − R`.

use alloc::format;
use alloc::vec::Vec;

use crate::equilibrium::{Equilibrium, Game, Regime};
use crate::math::{bisect, fabs, golden_max};
use crate::model::{LinkageKind, Scenario};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WelfareReport {
    pub total: f64,
    pub consumer: f64,
    pub profit: f64,
    pub per_agent_surplus: f64,
    pub regime: Equilibrium,
}

/// Surplus split of `eq` under the scenario's transfer.
pub fn welfare(s: &Scenario, eq: &Equilibrium) -> WelfareReport {
    welfare_at(s, s.reward, eq)
}

fn welfare_at(s: &Scenario, reward: f64, eq: &Equilibrium) -> WelfareReport {
    let mu = s.mu();
    let mass = eq.entry_prob * eq.population as f64;
    let cost = s.cost.value(eq.effort);
    let per_agent_surplus = eq.effort + 2.0 * mu - cost;
    WelfareReport {
        total: mass * per_agent_surplus,
        consumer: mass * (reward + mu - cost),
        profit: mass * (eq.effort + mu - reward),
        per_agent_surplus,
        regime: *eq,
    }
}

/// Full-entry welfare `N·(a + 2μ − C(a))` at effort `a`.
fn full_entry_welfare(s: &Scenario, n: u64, a: f64) -> f64 {
    n as f64 * (a + 2.0 * s.mu() - s.cost.value(a))
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonRow {
    pub n: u64,
    pub linked: f64,
    pub benchmark: f64,
    /// Sign of `linked − benchmark`.
    pub sign: i8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Threshold {
    /// Smallest `N` at which linked welfare falls below the benchmark.
    Found(u64),
    NotFound { n_max: u64 },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoLinkageComparison {
    pub rows: Vec<ComparisonRow>,
    pub threshold: Threshold,
}

impl NoLinkageComparison {
    /// Number of sign changes along the rows, ignoring exact ties.
    pub fn sign_changes(&self) -> usize {
        let signs: Vec<i8> = self.rows.iter().map(|r| r.sign).filter(|s| *s != 0).collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// Linked equilibrium welfare against the no-linkage benchmark for
/// `N = 2..=n_max`.
pub fn compare_no_linkage(s: &Scenario, n_max: u64) -> Result<NoLinkageComparison> {
    let game = Game::new(s, n_max)?;
    let bench = Game::with_curve(
        &s.with_kind(LinkageKind::NoLinkage),
        crate::equilibrium::MvCurve::for_scenario(&s.with_kind(LinkageKind::NoLinkage), 1)?,
    );
    let a1 = bench.single_agent_effort()?;
    let mut rows = Vec::new();
    let mut threshold = Threshold::NotFound { n_max };
    for n in 2..=n_max {
        let eq = game.solve(n)?;
        let linked = welfare(s, &eq).total;
        let benchmark = full_entry_welfare(s, n, a1);
        let sign = if linked > benchmark {
            1
        } else if linked < benchmark {
            -1
        } else {
            0
        };
        if sign < 0 && threshold == (Threshold::NotFound { n_max }) {
            threshold = Threshold::Found(n);
        }
        rows.push(ComparisonRow {
            n,
            linked,
            benchmark,
            sign,
        });
    }
    Ok(NoLinkageComparison { rows, threshold })
}

/// Transfers tried by [`monopoly_optimize`].
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardGrid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl RewardGrid {
    /// Grid from `lo` to `hi` with spacing at most `step`.
    pub fn with_step(lo: f64, hi: f64, step: f64) -> Self {
        let steps = libm::ceil((hi - lo) / step).max(1.0) as usize;
        Self { lo, hi, steps }
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.steps as f64
    }

    fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.spacing();
        (0..=self.steps).map(move |i| if i == self.steps { self.hi } else { self.lo + i as f64 * h })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MonopolyMode {
    FullEntryInduced,
    PartialEntryInduced,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonopolyOutcome {
    pub optimal_r: f64,
    pub entry_prob: f64,
    pub effort: f64,
    pub profit: f64,
    pub welfare: f64,
    pub consumer_surplus: f64,
    pub mode: MonopolyMode,
    /// Closed-form optimum when one is known (circumstance and no linkage).
    pub analytic_r: Option<f64>,
}

/// Best equilibrium for the principal at transfer `reward`, ignoring the
/// individual-entry condition. `None` when nobody opts in.
pub fn principal_optimal_equilibrium(
    game: &Game,
    n: u64,
    reward: f64,
) -> Result<Option<(Equilibrium, MonopolyMode)>> {
    let s = game.scenario();
    let mu = s.mu();
    let kind = s.kind;
    let full_mv_n = if kind == LinkageKind::NoLinkage { 1 } else { n };
    let a_full = game.effort_full_entry(full_mv_n)?;
    let profit = |eq: &Equilibrium| eq.entry_prob * n as f64 * (eq.effort + mu - reward);
    let mut best: Option<(Equilibrium, MonopolyMode)> = None;

    if reward + mu >= s.cost.value(a_full) {
        let mv = game.mv(full_mv_n)?;
        best = Some((
            Equilibrium {
                regime: if kind == LinkageKind::NoLinkage {
                    Regime::Benchmark
                } else {
                    Regime::FullEntry
                },
                entry_prob: 1.0,
                effort: a_full,
                n_star: None,
                a_double_star: None,
                population: n,
                marginal_value: mv,
            },
            MonopolyMode::FullEntryInduced,
        ));
    }

    if kind != LinkageKind::NoLinkage && n > 1 && reward + mu > 0.0 {
        let a = s.cost.effort_for_cost(reward + mu);
        let target = s.cost.marginal(a);
        let (m1, mn) = (game.mv(1)?, game.mv(n)?);
        if (target - m1) * (target - mn) < 0.0 {
            let p = game.mixing_probability(n, target)?;
            let eq = Equilibrium {
                regime: Regime::MixedEntry,
                entry_prob: p,
                effort: a,
                n_star: None,
                a_double_star: Some(a),
                population: n,
                marginal_value: target,
            };
            let better = match &best {
                Some((b, _)) => profit(&eq) > profit(b),
                None => true,
            };
            if better {
                best = Some((eq, MonopolyMode::PartialEntryInduced));
            }
        }
    }
    Ok(best)
}

/// Profit-maximising transfer for a monopolist principal facing `n` agents.
///
/// Grid search over `grid`, plus the two transfers at which full entry
/// starts or single-agent entry stops, then golden-section refinement on the
/// best bracket. Ties go to the smaller `R`.
pub fn monopoly_optimize(s: &Scenario, n: u64, grid: &RewardGrid) -> Result<MonopolyOutcome> {
    let game = Game::new(s, n)?;
    monopoly_optimize_game(&game, n, grid)
}

pub fn monopoly_optimize_game(game: &Game, n: u64, grid: &RewardGrid) -> Result<MonopolyOutcome> {
    if n < 1 {
        return Err(Error::domain("segment size must be at least 1"));
    }
    if !(grid.hi > grid.lo) || grid.steps == 0 {
        return Err(Error::domain("reward grid is empty"));
    }
    let s = game.scenario();
    let mu = s.mu();
    let evaluate = |r: f64| -> Result<Option<(f64, Equilibrium, MonopolyMode)>> {
        Ok(principal_optimal_equilibrium(game, n, r)?.map(|(eq, mode)| {
            (eq.entry_prob * n as f64 * (eq.effort + mu - r), eq, mode)
        }))
    };

    let kind = s.kind;
    let a_n = game.effort_full_entry(if kind == LinkageKind::NoLinkage { 1 } else { n })?;
    let a_1 = game.single_agent_effort()?;
    let full_start = s.cost.value(a_n) - mu;
    let solo_stop = s.cost.value(a_1) - mu;

    type Best = Option<(f64, f64, Equilibrium, MonopolyMode)>;
    let mut best: Best = None;
    let mut best_index = 0usize;
    let consider = |r: f64, best: &mut Best| -> Result<bool> {
        if let Some((profit, eq, mode)) = evaluate(r)? {
            let take = match best {
                None => true,
                Some((bp, br, ..)) => profit > *bp || (profit == *bp && r < *br),
            };
            if take {
                *best = Some((profit, r, eq, mode));
                return Ok(true);
            }
        }
        Ok(false)
    };
    for (i, r) in grid.points().enumerate() {
        if consider(r, &mut best)? {
            best_index = i;
        }
    }
    for r in [full_start, solo_stop] {
        if r >= grid.lo && r <= grid.hi {
            consider(r, &mut best)?;
        }
    }
    let Some(_) = best else {
        return Err(Error::domain("no transfer in the grid induces entry"));
    };

    // refine inside the grid bracket around the best grid point
    let h = grid.spacing();
    let centre = grid.lo + best_index as f64 * h;
    let (lo, hi) = ((centre - h).max(grid.lo), (centre + h).min(grid.hi));
    let mut failure = None;
    let (r_gold, _) = golden_max(lo, hi, 60, |r| match evaluate(r) {
        Ok(Some((p, ..))) => p,
        Ok(None) => f64::NEG_INFINITY,
        Err(e) => {
            failure = Some(e);
            f64::NEG_INFINITY
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    consider(r_gold, &mut best)?;

    let (profit, r, eq, mode) = best.expect("checked above");
    let w = welfare_at(s, r, &eq);
    let analytic_r = match kind {
        LinkageKind::Circumstance | LinkageKind::NoLinkage => Some(full_start),
        LinkageKind::Quality => None,
    };
    Ok(MonopolyOutcome {
        optimal_r: r,
        entry_prob: eq.entry_prob,
        effort: eq.effort,
        profit,
        welfare: w.total,
        consumer_surplus: w.consumer,
        mode,
        analytic_r,
    })
}

/// Competitive and monopolist transfers for a firm serving `n` agents.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransferPair {
    /// `a*(n) + μ`: the principal breaks even.
    pub competitive: f64,
    /// `C(a*(n)) − μ`: consumers break even.
    pub monopolist: f64,
}

pub fn transfers(s: &Scenario, n: u64) -> Result<TransferPair> {
    let game = Game::new(s, n)?;
    transfers_game(&game, n)
}

pub fn transfers_game(game: &Game, n: u64) -> Result<TransferPair> {
    let s = game.scenario();
    let m = if s.kind == LinkageKind::NoLinkage { 1 } else { n };
    let a = game.effort_full_entry(m)?;
    Ok(TransferPair {
        competitive: a + s.mu(),
        monopolist: s.cost.value(a) - s.mu(),
    })
}

/// Consumer surplus when every firm sees all `n` outcomes and transfers are
/// competitive.
pub fn data_sharing_cs(s: &Scenario, n: u64) -> Result<f64> {
    let game = Game::new(s, n)?;
    data_sharing_cs_game(&game, n)
}

pub fn data_sharing_cs_game(game: &Game, n: u64) -> Result<f64> {
    let s = game.scenario();
    let m = if s.kind == LinkageKind::NoLinkage { 1 } else { n };
    Ok(full_entry_welfare(s, n, game.effort_full_entry(m)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProprietaryBound {
    pub value: f64,
    /// False for multi-firm partitions under a quality linkage, where only a
    /// single firm can attract consumers.
    pub admissible: bool,
}

/// Upper bound on consumer surplus when each firm sees only its own
/// customers: every firm at its competitive transfer.
pub fn proprietary_cs_bound(s: &Scenario, n: u64, partition: &[u64]) -> Result<ProprietaryBound> {
    let largest = partition.iter().copied().max().unwrap_or(1);
    let game = Game::new(s, largest)?;
    proprietary_cs_bound_game(&game, n, partition)
}

pub fn proprietary_cs_bound_game(
    game: &Game,
    n: u64,
    partition: &[u64],
) -> Result<ProprietaryBound> {
    if partition.is_empty() || partition.contains(&0) {
        return Err(Error::domain("partition needs positive firm sizes"));
    }
    let total: u64 = partition.iter().sum();
    if total > n {
        return Err(Error::domain(format!(
            "partition covers {total} agents but the population is {n}"
        )));
    }
    let mut value = 0.0;
    for &size in partition {
        value += data_sharing_cs_game(game, size)?;
    }
    Ok(ProprietaryBound {
        value,
        admissible: !(game.scenario().kind == LinkageKind::Quality && partition.len() > 1),
    })
}

/// Finitely supported distribution of segment sizes.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SizeDistribution {
    pub support: Vec<(u64, f64)>,
}

impl SizeDistribution {
    pub fn degenerate(n: u64) -> Self {
        Self {
            support: alloc::vec![(n, 1.0)],
        }
    }

    /// Uniform on `1..=max`.
    pub fn uniform_up_to(max: u64) -> Self {
        let max = max.max(1);
        let w = 1.0 / max as f64;
        Self {
            support: (1..=max).map(|n| (n, w)).collect(),
        }
    }

    /// Every size moved up by `by`: a first-order dominating distribution.
    pub fn shifted(&self, by: u64) -> Self {
        Self {
            support: self.support.iter().map(|(n, w)| (n + by, *w)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|(n, w)| *n as f64 * w).sum()
    }

    pub fn max(&self) -> u64 {
        self.support.iter().map(|(n, _)| *n).max().unwrap_or(1)
    }

    fn check(&self) -> Result<()> {
        if self.support.is_empty() || self.support.iter().any(|(n, w)| *n < 1 || !(*w >= 0.0)) {
            return Err(Error::domain("size distribution needs sizes >= 1 and nonnegative weights"));
        }
        let total: f64 = self.support.iter().map(|(_, w)| w).sum();
        if fabs(total - 1.0) > 1e-9 {
            return Err(Error::domain(format!("size weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// One possible segment an agent may find itself in.
#[derive(Clone, Debug)]
pub struct UncertainSegment {
    pub game: Game,
    pub prob: f64,
    pub sizes: SizeDistribution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UncertainMv {
    pub value: f64,
    /// Direction in which a first-order shift of sizes moves the value;
    /// `None` when segments mix linkage kinds.
    pub direction: Option<Direction>,
}

/// Expected marginal value over segment, size, and `Bin(N − 1, p)` entrants.
pub fn uncertainty_expected_mv(segments: &[UncertainSegment], p: f64) -> Result<UncertainMv> {
    if segments.is_empty() {
        return Err(Error::domain("no segments given"));
    }
    let total: f64 = segments.iter().map(|s| s.prob).sum();
    if segments.iter().any(|s| !(s.prob >= 0.0)) || fabs(total - 1.0) > 1e-9 {
        return Err(Error::domain("segment probabilities must be nonnegative and sum to 1"));
    }
    let mut value = 0.0;
    for seg in segments {
        seg.sizes.check()?;
        for (n, w) in &seg.sizes.support {
            value += seg.prob * w * seg.game.mv_mixed(*n, p)?;
        }
    }
    let kinds = |k: LinkageKind| segments.iter().all(|s| s.game.scenario().kind == k);
    let direction = if kinds(LinkageKind::Circumstance) {
        Some(Direction::Increasing)
    } else if kinds(LinkageKind::Quality) {
        Some(Direction::Decreasing)
    } else {
        None
    };
    Ok(UncertainMv { value, direction })
}

/// Symmetric equilibrium when agents know their segment's linkage but not
/// its size.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UncertainOutcome {
    pub regime: Regime,
    pub entry_prob: f64,
    pub effort: f64,
    pub marginal_value: f64,
    pub expected_population: f64,
    pub welfare: f64,
    pub consumer_surplus: f64,
    pub profit: f64,
}

pub fn solve_uncertain(game: &Game, sizes: &SizeDistribution) -> Result<UncertainOutcome> {
    sizes.check()?;
    if !game.individual_entry_holds()? {
        return Err(Error::domain(
            "R is below C(a*(1)) - mu: no agent opts in even alone",
        ));
    }
    let s = game.scenario();
    let expected = |p: f64| -> Result<f64> {
        let mut v = 0.0;
        for (n, w) in &sizes.support {
            let n = if s.kind == LinkageKind::NoLinkage { 1 } else { *n };
            v += w * game.mv_mixed(n, p)?;
        }
        Ok(v)
    };
    let mv_full = expected(1.0)?;
    let a_full = s.cost.deriv_inverse(mv_full)?;
    let mu = s.mu();
    let (regime, p, a, mv) = if s.kind == LinkageKind::NoLinkage {
        (Regime::Benchmark, 1.0, a_full, mv_full)
    } else if s.reward + mu >= s.cost.value(a_full) {
        (Regime::FullEntry, 1.0, a_full, mv_full)
    } else {
        let a2 = game.a_double_star()?;
        let target = s.cost.marginal(a2);
        let mut err = None;
        let p = bisect(0.0, 1.0, 1e-15, |p| match expected(p) {
            Ok(v) => v - target,
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        (Regime::MixedEntry, p, a2, target)
    };
    let mass = p * sizes.mean();
    let cost = s.cost.value(a);
    Ok(UncertainOutcome {
        regime,
        entry_prob: p,
        effort: a,
        marginal_value: mv,
        expected_population: sizes.mean(),
        welfare: mass * (a + 2.0 * mu - cost),
        consumer_surplus: mass * (s.reward + mu - cost),
        profit: mass * (a + mu - s.reward),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostFunction, GaussianParams};

    fn canonical(kind: LinkageKind, reward: f64) -> Scenario {
        Scenario::gaussian(
            kind,
            GaussianParams::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap(),
            CostFunction::quadratic(1.0),
            reward,
            2,
        )
    }

    #[test]
    fn welfare_examples() {
        let s = canonical(LinkageKind::Quality, 0.0);
        let eq = Game::new(&s, 2).unwrap().solve(2).unwrap();
        let w = welfare(&s, &eq);
        assert!((w.total - 4.859375).abs() < 1e-12);
        assert!((w.consumer - 1.609375).abs() < 1e-12);
        assert!((w.profit - 3.25).abs() < 1e-12);
        let b = canonical(LinkageKind::NoLinkage, 0.0);
        let eq = Game::new(&b, 2).unwrap().solve(2).unwrap();
        assert!((welfare(&b, &eq).total - 44.0 / 9.0).abs() < 1e-12);
        let zero = Equilibrium {
            entry_prob: 0.0,
            ..eq
        };
        let w = welfare(&b, &zero);
        assert_eq!((w.total, w.consumer, w.profit), (0.0, 0.0, 0.0));
    }

    #[test]
    fn transfer_examples() {
        let t = transfers(&canonical(LinkageKind::Quality, 0.0), 2).unwrap();
        assert!((t.competitive - 1.625).abs() < 1e-12);
        assert!((t.monopolist + 0.8046875).abs() < 1e-12);
        let t = transfers(&canonical(LinkageKind::Circumstance, 0.0), 3).unwrap();
        assert!((t.competitive - 1.7).abs() < 1e-12);
        assert!((t.monopolist + 0.755).abs() < 1e-12);
    }

    #[test]
    fn proprietary_examples() {
        let s = canonical(LinkageKind::Circumstance, 0.0);
        let b = proprietary_cs_bound(&s, 4, &[2, 2]).unwrap();
        assert!((b.value - 9.8024489796).abs() < 1e-9);
        assert!(b.admissible);
        assert!(b.value <= data_sharing_cs(&s, 4).unwrap());
        let single = proprietary_cs_bound(&s, 4, &[4]).unwrap();
        assert_eq!(single.value, data_sharing_cs(&s, 4).unwrap());
        assert!(matches!(proprietary_cs_bound(&s, 4, &[3, 2]), Err(Error::Domain(_))));
        let q = canonical(LinkageKind::Quality, 0.0);
        assert!(!proprietary_cs_bound(&q, 4, &[2, 2]).unwrap().admissible);
    }

    #[test]
    fn uncertainty_example() {
        let s = canonical(LinkageKind::Circumstance, 0.0);
        let game = Game::new(&s, 5).unwrap();
        let seg = |n| UncertainSegment {
            game: game.clone(),
            prob: 0.5,
            sizes: SizeDistribution::degenerate(n),
        };
        let v = uncertainty_expected_mv(&[seg(2), seg(4)], 1.0).unwrap();
        assert!((v.value - 0.6984126984).abs() < 1e-9);
        assert_eq!(v.direction, Some(Direction::Increasing));
        let up = uncertainty_expected_mv(&[seg(3), seg(5)], 1.0).unwrap();
        assert!(up.value > v.value);
    }

    #[test]
    fn monopoly_circumstance_matches_analytic() {
        let s = canonical(LinkageKind::Circumstance, 0.0);
        let out = monopoly_optimize(&s, 3, &RewardGrid::with_step(-1.5, 0.5, 1e-3)).unwrap();
        assert!((out.optimal_r + 0.755).abs() < 1e-9);
        assert!((out.profit - 7.365).abs() < 1e-9);
        assert_eq!(out.mode, MonopolyMode::FullEntryInduced);
        assert!(out.consumer_surplus.abs() < 1e-12);
    }
}
