//! The invariant suite behind `linkage verify`.
//!
//! Every check runs on the loaded scenario (and on its quality, circumstance
//! and no-linkage variants where a comparison needs them). Output order and
//! formatting are fixed so that reruns are byte-identical.

use std::fmt::Write as _;

use linkage_core::equilibrium::{first_best, Game, NStar, Regime};
use linkage_core::gaussian::{
    mv_closed_circumstance, mv_closed_quality, mv_closed_real, mv_limit, mv_multilink,
    mv_projection, segment_projection,
};
use linkage_core::model::validate_scenario;
use linkage_core::oracle::{estimate_mv, OracleConfig};
use linkage_core::posterior::{OutcomeProfile, PosteriorModel, QuadratureConfig, DEFAULT_DELTA};
use linkage_core::welfare::{
    compare_no_linkage, data_sharing_cs_game, monopoly_optimize_game, proprietary_cs_bound_game,
    transfers_game, welfare, RewardGrid,
};
use linkage_core::{GaussianParams, LinkageKind, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::scenario_file::ScenarioFile;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skip,
    Note,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Check {
    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

pub fn render(checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
            Status::Note => "NOTE",
        };
        let _ = writeln!(out, "{tag} {}: {}", c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| c.failed()).count();
    let _ = writeln!(out, "{} checks, {failed} failed", checks.len());
    out
}

/// Oracle sample size inside the suite.
const SUITE_DRAWS: u64 = 100_000;
const POPULATIONS: u64 = 50;

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn record(&mut self, name: &str, ok: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        });
    }

    fn skip(&mut self, name: &str, why: &str) {
        self.checks.push(Check {
            name: name.into(),
            status: Status::Skip,
            detail: why.into(),
        });
    }

    fn note(&mut self, name: &str, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            status: Status::Note,
            detail,
        });
    }

    /// Records a solver error as a failure of `name`.
    fn guard(&mut self, name: &str, f: impl FnOnce(&mut Self) -> linkage_core::Result<()>) {
        if let Err(e) = f(self) {
            self.record(name, false, format!("error: {e}"));
        }
    }
}

pub fn run_suite(file: &ScenarioFile, seed: u64) -> Result<Vec<Check>, CliError> {
    let s = &file.scenario;
    let mut suite = Suite { checks: Vec::new() };
    for a in validate_scenario(s)?.checks {
        suite.note(
            &format!("assumption.{}", a.name),
            format!("{:?}: {}", a.status, a.detail).to_lowercase(),
        );
    }
    match &s.gaussian {
        Some(p) => gaussian_suite(&mut suite, s, p, seed),
        None => general_suite(&mut suite, s, seed),
    }
    if let Some(spec) = &file.multilink {
        suite.guard("multilink_monotone", |suite| {
            for (kind, sign) in [(LinkageKind::Quality, -1.0), (LinkageKind::Circumstance, 1.0)] {
                let vals = (0..=spec.segments.len())
                    .map(|m| mv_multilink(&spec.with_observed(m), kind))
                    .collect::<linkage_core::Result<Vec<_>>>()?;
                let ok = vals.windows(2).all(|w| sign * (w[1] - w[0]) > 0.0);
                suite.record(
                    &format!("multilink_monotone.{}", kind.as_str()),
                    ok,
                    format!("mv by observed_m {vals:?}"),
                );
            }
            Ok(())
        });
    }
    Ok(suite.checks)
}

fn variant(s: &Scenario, kind: LinkageKind) -> Scenario {
    s.with_kind(kind)
}

const KINDS: [LinkageKind; 3] = [
    LinkageKind::Quality,
    LinkageKind::Circumstance,
    LinkageKind::NoLinkage,
];

fn gaussian_suite(suite: &mut Suite, s: &Scenario, p: &GaussianParams, seed: u64) {
    suite.guard("closed_form_matches_projection", |suite| {
        let mut worst = 0.0f64;
        for kind in [LinkageKind::Quality, LinkageKind::Circumstance] {
            for n in 1..=POPULATIONS {
                let closed = mv_closed_real(p, kind, n as f64)?;
                let proj = mv_projection(&segment_projection(p, kind, n as usize, 0.0)?, 0)?;
                worst = worst.max((closed - proj).abs());
            }
        }
        suite.record(
            "closed_form_matches_projection",
            worst <= 1e-10,
            format!("max |closed - projection| = {worst:e} over N = 1..{POPULATIONS}"),
        );
        Ok(())
    });

    suite.guard("mv_monotone", |suite| {
        let q: Vec<f64> = (1..=POPULATIONS)
            .map(|n| mv_closed_quality(p, n))
            .collect::<linkage_core::Result<_>>()?;
        let c: Vec<f64> = (1..=POPULATIONS)
            .map(|n| mv_closed_circumstance(p, n))
            .collect::<linkage_core::Result<_>>()?;
        let q_ok = q.windows(2).all(|w| w[1] < w[0]);
        let c_ok = c.windows(2).all(|w| w[1] > w[0]);
        suite.record(
            "mv_monotone.quality_decreasing",
            q_ok,
            format!("MV(1) = {}, MV({POPULATIONS}) = {}", q[0], q[q.len() - 1]),
        );
        suite.record(
            "mv_monotone.circumstance_increasing",
            c_ok,
            format!("MV(1) = {}, MV({POPULATIONS}) = {}", c[0], c[c.len() - 1]),
        );
        Ok(())
    });

    suite.guard("mv_limit", |suite| {
        for kind in [LinkageKind::Quality, LinkageKind::Circumstance] {
            let far = mv_closed_real(p, kind, 1e4)?;
            let lim = mv_limit(p, kind);
            suite.record(
                &format!("mv_limit.{}", kind.as_str()),
                (far - lim).abs() <= 1e-3 && lim > 0.0 && lim < 1.0,
                format!("MV(10^4) = {far}, limit = {lim}"),
            );
        }
        Ok(())
    });

    equilibrium_checks(suite, s, POPULATIONS);

    suite.guard("mixed_entry", |suite| {
        let c = variant(s, LinkageKind::Circumstance);
        let game = Game::new(&c, 200)?;
        if !game.individual_entry_holds()? {
            suite.skip("mixed_entry", "a lone agent would not enter at this R");
            return Ok(());
        }
        let n_star = match game.n_star()? {
            NStar::Infinite => {
                suite.skip("mixed_entry", "full entry at every population (N* infinite)");
                return Ok(());
            }
            NStar::Finite(k) => k,
        };
        let a2 = game.a_double_star()?;
        let mut prev = 1.0;
        let mut ok = true;
        let mut worst_residual = 0.0f64;
        for n in (n_star + 1).max(1)..=200 {
            let eq = game.solve(n)?;
            let indiff = (c.cost.eval(eq.effort)? - c.reward - c.mu()).abs();
            worst_residual = worst_residual.max(indiff);
            ok &= eq.regime == Regime::MixedEntry
                && eq.effort == a2
                && eq.entry_prob < prev
                && indiff <= 1e-10;
            prev = eq.entry_prob;
        }
        suite.record(
            "mixed_entry",
            ok,
            format!(
                "N* = {n_star}, a** = {a2}, p(200) = {prev}, max indifference residual {worst_residual:e}"
            ),
        );
        Ok(())
    });

    suite.guard("welfare_vs_no_linkage", |suite| {
        for (kind, n_max) in [(LinkageKind::Quality, 60), (LinkageKind::Circumstance, 200)] {
            let v = variant(s, kind);
            let name = format!("welfare_vs_no_linkage.{}", kind.as_str());
            if !Game::new(&v, 1)?.individual_entry_holds()? {
                suite.skip(&name, "a lone agent would not enter at this R");
                continue;
            }
            let cmp = compare_no_linkage(&v, n_max)?;
            let ok = match kind {
                LinkageKind::Quality => cmp.rows.iter().all(|r| r.sign < 0),
                _ => {
                    // positive then negative, at most one switch
                    cmp.sign_changes() <= 1
                        && cmp.rows.windows(2).all(|w| !(w[0].sign < 0 && w[1].sign > 0))
                }
            };
            suite.record(
                &name,
                ok,
                format!("N = 2..{n_max}, sign changes {}, threshold {:?}", cmp.sign_changes(), cmp.threshold),
            );
        }
        Ok(())
    });

    suite.guard("monopoly_ordering", |suite| {
        let games = [LinkageKind::Quality, LinkageKind::NoLinkage, LinkageKind::Circumstance]
            .map(|k| Game::new(&variant(s, k), 20));
        let [q, ndl, c] = games;
        let (q, ndl, c) = (q?, ndl?, c?);
        let mu = s.mu();
        let fb = first_best(s).effort;
        let grid = RewardGrid::with_step(-mu, s.cost.eval(fb)? - mu, 1e-3);
        let mut ok = true;
        let mut worst_cs = 0.0f64;
        for n in 2..=20 {
            let [wq, wn, wc] = [&q, &ndl, &c].map(|g| monopoly_optimize_game(g, n, &grid));
            let (wq, wn, wc) = (wq?, wn?, wc?);
            ok &= wq.welfare < wn.welfare - 1e-6 && wn.welfare < wc.welfare - 1e-6;
            for w in [&wq, &wn, &wc] {
                worst_cs = worst_cs.max(w.consumer_surplus.abs());
                // slack: one grid step of transfer per entrant
                ok &= w.consumer_surplus.abs() <= n as f64 * grid.spacing() + 1e-9;
            }
        }
        suite.record(
            "monopoly_ordering",
            ok,
            format!("quality < no-linkage < circumstance for N = 2..20, max |CS| {worst_cs:e}"),
        );
        Ok(())
    });

    suite.guard("sharing_vs_proprietary", |suite| {
        for kind in [LinkageKind::Quality, LinkageKind::Circumstance] {
            let game = Game::new(&variant(s, kind), 20)?;
            let mut ok = true;
            let mut count = 0;
            for n in 4..=20u64 {
                let sharing = data_sharing_cs_game(&game, n)?;
                let mut partitions: Vec<Vec<u64>> = (1..n).map(|k| vec![k, n - k]).collect();
                partitions.extend((1..=n).map(|k| vec![k]));
                partitions.push(vec![1; n as usize]);
                for part in &partitions {
                    // under quality only one firm can serve the segment
                    let bound = proprietary_cs_bound_game(&game, n, part)?;
                    if bound.admissible {
                        ok &= sharing >= bound.value - 1e-12 * sharing.abs();
                        count += 1;
                    }
                }
            }
            suite.record(
                &format!("sharing_vs_proprietary.{}", kind.as_str()),
                ok,
                format!("{count} admissible partitions, N = 4..20"),
            );
        }
        Ok(())
    });

    suite.guard("transfers_ordered", |suite| {
        let mut ok = true;
        for kind in KINDS {
            let game = Game::new(&variant(s, kind), 20)?;
            for n in 1..=20 {
                let t = transfers_game(&game, n)?;
                ok &= t.competitive > t.monopolist;
            }
        }
        suite.record("transfers_ordered", ok, "competitive > monopolist, N = 1..20".into());
        Ok(())
    });

    suite.guard("oracle_agreement", |suite| {
        let cfg = OracleConfig {
            draws: SUITE_DRAWS,
            seed,
            ..OracleConfig::default()
        };
        for kind in [LinkageKind::Quality, LinkageKind::Circumstance] {
            let v = variant(s, kind);
            for n in [1, 2, 3] {
                let est = estimate_mv(&v, n, &cfg)?;
                let exact = mv_closed_real(p, kind, n as f64)?;
                // the Gaussian differenced statistic is nearly constant,
                // so allow a floating-point floor under the SE band
                let ok = (est.value - exact).abs() <= 3.0 * est.std_error + 1e-9;
                suite.record(
                    &format!("oracle_agreement.{}.n{n}", kind.as_str()),
                    ok,
                    format!("estimate {} (se {:e}) vs closed form {exact}", est.value, est.std_error),
                );
            }
        }
        Ok(())
    });
}

/// Effort below first best and surplus additivity for every kind that can
/// be solved at this transfer.
fn equilibrium_checks(suite: &mut Suite, s: &Scenario, n_max: u64) {
    for kind in KINDS {
        let name = format!("equilibrium.{}", kind.as_str());
        suite.guard(&name.clone(), |suite| {
            let v = variant(s, kind);
            let game = match Game::new(&v, n_max) {
                Ok(g) => g,
                Err(linkage_core::Error::Unsupported(why)) => {
                    suite.skip(&name, &why);
                    return Ok(());
                }
                Err(e) => return Err(e),
            };
            if !game.individual_entry_holds()? {
                suite.skip(&name, "a lone agent would not enter at this R");
                return Ok(());
            }
            let fb = first_best(&v).effort;
            let mut below_fb = true;
            let mut worst_gap = f64::INFINITY;
            let mut worst_split = 0.0f64;
            let mut monotone = true;
            let mut prev: Option<f64> = None;
            for n in 1..=n_max {
                let eq = game.solve(n)?;
                below_fb &= eq.effort < fb - 1e-9;
                worst_gap = worst_gap.min(fb - eq.effort);
                let w = welfare(&v, &eq);
                worst_split = worst_split.max((w.total - w.consumer - w.profit).abs());
                if eq.regime == Regime::FullEntry {
                    if let Some(a) = prev {
                        monotone &= match kind {
                            LinkageKind::Quality => eq.effort < a,
                            _ => eq.effort > a,
                        };
                    }
                    prev = Some(eq.effort);
                }
            }
            suite.record(
                &format!("{name}.effort_below_first_best"),
                below_fb,
                format!("min a_FB - a* = {worst_gap:e} over N = 1..{n_max}"),
            );
            suite.record(
                &format!("{name}.welfare_adds_up"),
                worst_split <= 1e-10,
                format!("max |W - CS - profit| = {worst_split:e}"),
            );
            if kind != LinkageKind::NoLinkage {
                suite.record(
                    &format!("{name}.full_entry_effort_monotone"),
                    monotone,
                    format!("{} in N while entry is full", if kind == LinkageKind::Quality { "decreasing" } else { "increasing" }),
                );
            }
            Ok(())
        });
    }
}

fn general_suite(suite: &mut Suite, s: &Scenario, seed: u64) {
    let cfg = QuadratureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    suite.guard("posterior_sensitivity", |suite| {
        for kind in [LinkageKind::Quality, LinkageKind::Circumstance] {
            let model = PosteriorModel::new(&variant(s, kind), &cfg)?;
            let (mut own_ok, mut cross_ok) = (true, true);
            let (mut own_range, mut cross_extreme) = ((f64::INFINITY, f64::NEG_INFINITY), 0.0f64);
            let sign = if kind == LinkageKind::Quality { 1.0 } else { -1.0 };
            for _ in 0..20 {
                let n = rng.random_range(2..=4usize);
                let values = (0..n).map(|_| model.prior_mean() + rng.random_range(-3.0..3.0)).collect();
                let actions = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
                let profile = OutcomeProfile::new(values, actions)?;
                let step = model.default_step(&profile);
                let own = model.forecast_sensitivity(&profile, 0, 0, step)?;
                own_ok &= own > 0.0 && own < 1.0;
                own_range = (own_range.0.min(own), own_range.1.max(own));
                let wrt = rng.random_range(1..n);
                let cross = model.forecast_sensitivity(&profile, 0, wrt, step)?;
                cross_ok &= sign * cross > 0.0;
                if cross_extreme == 0.0 || (sign * cross) < (sign * cross_extreme) {
                    cross_extreme = cross;
                }
            }
            suite.record(
                &format!("posterior_sensitivity.{}.own_in_unit_interval", kind.as_str()),
                own_ok,
                format!("own sensitivity in [{}, {}]", own_range.0, own_range.1),
            );
            suite.record(
                &format!("posterior_sensitivity.{}.cross_sign", kind.as_str()),
                cross_ok,
                format!("cross sensitivity closest to zero {cross_extreme}"),
            );
        }
        Ok(())
    });

    suite.guard("quadrature_mv", |suite| {
        let ocfg = OracleConfig {
            draws: SUITE_DRAWS,
            seed,
            ..OracleConfig::default()
        };
        for kind in [LinkageKind::Quality, LinkageKind::Circumstance] {
            let v = variant(s, kind);
            let model = PosteriorModel::new(&v, &cfg)?;
            let mut mvs = Vec::new();
            for n in 1..=3 {
                let q = model.mv(n, DEFAULT_DELTA)?;
                let o = estimate_mv(&v, n, &ocfg)?;
                let se = (q.std_error.unwrap_or(0.0).powi(2) + o.std_error.powi(2)).sqrt();
                suite.record(
                    &format!("quadrature_matches_oracle.{}.n{n}", kind.as_str()),
                    (q.value - o.value).abs() <= 3.0 * se,
                    format!("quadrature {} vs oracle {} (combined se {se:e})", q.value, o.value),
                );
                mvs.push(q.value);
            }
            let ok = match kind {
                LinkageKind::Quality => mvs[0] > mvs[1] && mvs[1] > mvs[2],
                _ => mvs[0] < mvs[1] && mvs[1] < mvs[2],
            };
            suite.record(
                &format!("mv_ordering.{}", kind.as_str()),
                ok,
                format!("MV(1..3) = {mvs:?}"),
            );
        }
        Ok(())
    });

    equilibrium_checks(suite, s, 3);
}
