//! Adversarial deviation search.
//!
//! A grid stage evaluates every search point (rival bids included, so the
//! discontinuities of step rules are always visited). A golden-section
//! stage then polishes the best grid point inside its neighbouring grid
//! interval. The refined point replaces the grid point only on a strict
//! improvement.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MechError, Result};
use crate::golden;
use crate::grid::{ProfileSampler, SearchGrid};
use crate::mechanism::Mechanism;
use crate::payment::{coalition_utility, utility_of, QuadratureConfig};
use crate::types::{AgentId, BidProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    Misreport,
    Sybil,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub kind: DeviationKind,
    pub deviator: AgentId,
    /// Truthful profile; the deviator's entry is its true value.
    pub profile: BidProfile,
    pub misreport_bid: Option<f64>,
    pub sybil_ids: Vec<AgentId>,
    pub sybil_bids: Vec<f64>,
    pub truthful_utility: f64,
    pub deviant_utility: f64,
    pub gain: f64,
    /// Best gain of the grid stage, before refinement.
    pub grid_gain: f64,
}

impl Deviation {
    /// Bid the search varied: the misreport, or the common sybil bid.
    pub fn searched_bid(&self) -> f64 {
        match self.kind {
            DeviationKind::Misreport => self.misreport_bid.unwrap_or(f64::NAN),
            DeviationKind::Sybil => self.sybil_bids.first().copied().unwrap_or(f64::NAN),
        }
    }

    /// The profile actually submitted when deviating.
    pub fn deviant_profile(&self) -> Result<BidProfile> {
        match self.kind {
            DeviationKind::Misreport => {
                let bid = self.misreport_bid.ok_or_else(|| {
                    MechError::Precondition("misreport deviation without a bid".into())
                })?;
                self.profile.with_bid(self.deviator, bid)
            }
            DeviationKind::Sybil => {
                let mut p = self.profile.clone();
                for (&id, &bid) in self.sybil_ids.iter().zip(&self.sybil_bids) {
                    p = p.extend(id, bid)?;
                }
                Ok(p)
            }
        }
    }

    /// Re-evaluates the deviant utility through the mechanism.
    pub fn replay(&self, mech: &Mechanism, quad: &QuadratureConfig) -> Result<f64> {
        let value = self
            .profile
            .bid(self.deviator)
            .ok_or(MechError::UnknownAgent(self.deviator))?;
        let submitted = self.deviant_profile()?;
        let mut accounts = vec![self.deviator];
        accounts.extend(&self.sybil_ids);
        Ok(coalition_utility(mech, &submitted, &accounts, value, quad)?.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    /// Golden-section iterations after the grid stage; 0 disables it.
    pub refine_iters: usize,
    /// Cap on `k · |grid|` for multi-sybil searches.
    pub eval_cap: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            refine_iters: 40,
            eval_cap: 1_000_000,
        }
    }
}

/// Improvements smaller than this are rounding noise, not a better bid.
pub(crate) const TIE_MARGIN: f64 = 1e-12;

/// Grid maximisation of `deviant` followed by golden-section refinement.
/// Returns `(bid, deviant utility, grid-stage deviant utility)`.
fn search<F>(points: &[f64], refine_iters: usize, deviant: F) -> Result<(f64, f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut best: Option<(usize, f64)> = None;
    for (j, &u) in points.iter().enumerate() {
        let d = deviant(u)?;
        // ascending points: strict improvement keeps the smallest bid on ties
        if best.is_none_or(|(_, bd)| d > bd + TIE_MARGIN) {
            best = Some((j, d));
        }
    }
    let (j, grid_best) = best.ok_or_else(|| MechError::Precondition("empty search grid".into()))?;
    let mut bid = points[j];
    let mut value = grid_best;
    if refine_iters > 0 && points.len() > 1 {
        let lo = points[j.saturating_sub(1)];
        let hi = points[(j + 1).min(points.len() - 1)];
        let (x, fx) = golden::maximize(&deviant, lo, hi, refine_iters)?;
        if fx > value + TIE_MARGIN {
            bid = x;
            value = fx;
        }
    }
    Ok((bid, value, grid_best))
}

/// Best single misreport of `agent` against the other bids in `profile`.
pub fn best_misreport(
    mech: &Mechanism,
    profile: &BidProfile,
    agent: AgentId,
    grid: &SearchGrid,
    opts: &SearchOptions,
    quad: &QuadratureConfig,
) -> Result<Deviation> {
    let value = profile.bid(agent).ok_or(MechError::UnknownAgent(agent))?;
    let truthful = utility_of(mech, profile, agent, value, quad)?.value;
    let points: Vec<f64> = grid
        .points_for(profile)
        .into_iter()
        .filter(|&u| u != value)
        .collect();
    let (bid, deviant, grid_best) = search(&points, opts.refine_iters, |u| {
        Ok(utility_of(mech, &profile.with_bid(agent, u)?, agent, value, quad)?.value)
    })?;
    Ok(Deviation {
        kind: DeviationKind::Misreport,
        deviator: agent,
        profile: profile.clone(),
        misreport_bid: Some(bid),
        sybil_ids: Vec::new(),
        sybil_bids: Vec::new(),
        truthful_utility: truthful,
        deviant_utility: deviant,
        gain: deviant - truthful,
        grid_gain: grid_best - truthful,
    })
}

fn sybil_search(
    mech: &Mechanism,
    profile: &BidProfile,
    agent: AgentId,
    k: usize,
    grid: &SearchGrid,
    opts: &SearchOptions,
    quad: &QuadratureConfig,
) -> Result<Deviation> {
    if k == 0 {
        return Err(MechError::InvalidParameter {
            name: "k",
            reason: "need at least one sybil".into(),
        });
    }
    let value = profile.bid(agent).ok_or(MechError::UnknownAgent(agent))?;
    let truthful = utility_of(mech, profile, agent, value, quad)?.value;
    let points = grid.points_for(profile);
    let evaluations = k.saturating_mul(points.len());
    if evaluations > opts.eval_cap {
        return Err(MechError::SearchBudgetExceeded {
            evaluations,
            cap: opts.eval_cap,
        });
    }
    let first = profile.fresh_id().0;
    let ids: Vec<AgentId> = (0..k as u64).map(|j| AgentId(first + j)).collect();
    let mut accounts = vec![agent];
    accounts.extend(&ids);
    let (bid, deviant, grid_best) = search(&points, opts.refine_iters, |u| {
        let mut ext = profile.clone();
        for &id in &ids {
            ext = ext.extend(id, u)?;
        }
        Ok(coalition_utility(mech, &ext, &accounts, value, quad)?.value)
    })?;
    Ok(Deviation {
        kind: DeviationKind::Sybil,
        deviator: agent,
        profile: profile.clone(),
        misreport_bid: None,
        sybil_bids: vec![bid; k],
        sybil_ids: ids,
        truthful_utility: truthful,
        deviant_utility: deviant,
        gain: deviant - truthful,
        grid_gain: grid_best - truthful,
    })
}

/// Best one-sybil attack: `agent` keeps bidding truthfully and adds one
/// fresh identity.
pub fn best_sybil_response(
    mech: &Mechanism,
    profile: &BidProfile,
    agent: AgentId,
    grid: &SearchGrid,
    opts: &SearchOptions,
    quad: &QuadratureConfig,
) -> Result<Deviation> {
    sybil_search(mech, profile, agent, 1, grid, opts, quad)
}

/// `k` fresh identities, all bidding the same value.
pub fn multi_sybil_response(
    mech: &Mechanism,
    profile: &BidProfile,
    agent: AgentId,
    k: usize,
    grid: &SearchGrid,
    opts: &SearchOptions,
    quad: &QuadratureConfig,
) -> Result<Deviation> {
    sybil_search(mech, profile, agent, k, grid, opts, quad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum AttackTarget {
    Misreport,
    Sybil,
    MultiSybil { k: usize },
}

impl AttackTarget {
    pub fn run(
        &self,
        mech: &Mechanism,
        profile: &BidProfile,
        agent: AgentId,
        grid: &SearchGrid,
        opts: &SearchOptions,
        quad: &QuadratureConfig,
    ) -> Result<Deviation> {
        match *self {
            AttackTarget::Misreport => best_misreport(mech, profile, agent, grid, opts, quad),
            AttackTarget::Sybil => best_sybil_response(mech, profile, agent, grid, opts, quad),
            AttackTarget::MultiSybil { k } => {
                multi_sybil_response(mech, profile, agent, k, grid, opts, quad)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            AttackTarget::Misreport => "misreport".into(),
            AttackTarget::Sybil => "sybil".into(),
            AttackTarget::MultiSybil { k } => format!("multi_sybil_k{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainStats {
    pub count: usize,
    /// Cases with gain above the threshold.
    pub profitable: usize,
    pub threshold: f64,
    pub max: f64,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

impl GainStats {
    pub fn from_gains(gains: &[f64], threshold: f64) -> Self {
        let mut sorted = gains.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            if sorted.is_empty() {
                0.0
            } else {
                // nearest-rank quantile
                let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
                sorted[rank - 1]
            }
        };
        let count = sorted.len();
        GainStats {
            count,
            profitable: sorted.iter().filter(|&&g| g > threshold).count(),
            threshold,
            max: sorted.last().copied().unwrap_or(0.0),
            mean: if count == 0 {
                0.0
            } else {
                sorted.iter().sum::<f64>() / count as f64
            },
            p50: q(0.5),
            p90: q(0.9),
            p99: q(0.99),
        }
    }
}

/// One (profile, agent) search result of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub profile_index: usize,
    pub deviation: Deviation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScan {
    pub target: AttackTarget,
    pub worst: Option<Deviation>,
    pub stats: GainStats,
    pub rows: Vec<ScanRow>,
}

fn worse(a: &ScanRow, b: &ScanRow) -> Ordering {
    // larger gain first, then smaller bid, smaller agent id, earlier profile
    b.deviation
        .gain
        .total_cmp(&a.deviation.gain)
        .then_with(|| {
            a.deviation
                .searched_bid()
                .total_cmp(&b.deviation.searched_bid())
        })
        .then_with(|| a.deviation.deviator.cmp(&b.deviation.deviator))
        .then_with(|| a.profile_index.cmp(&b.profile_index))
}

/// Runs `target` for every agent of every profile.
pub fn scan_profiles(
    mech: &Mechanism,
    profiles: &[BidProfile],
    target: AttackTarget,
    grid: &SearchGrid,
    opts: &SearchOptions,
    quad: &QuadratureConfig,
    threshold: f64,
) -> Result<TargetScan> {
    let per_profile: Vec<Vec<ScanRow>> = profiles
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            p.agents()
                .map(|a| {
                    Ok(ScanRow {
                        profile_index: k,
                        deviation: target.run(mech, p, a, grid, opts, quad)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ScanRow> = per_profile.into_iter().flatten().collect();
    let gains: Vec<f64> = rows.iter().map(|r| r.deviation.gain).collect();
    let worst = rows
        .iter()
        .min_by(|a, b| worse(a, b))
        .map(|r| r.deviation.clone());
    Ok(TargetScan {
        target,
        worst,
        stats: GainStats::from_gains(&gains, threshold),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploitScan {
    pub sampler: ProfileSampler,
    pub budget: usize,
    pub misreport: TargetScan,
    pub sybil: TargetScan,
}

/// Samples `budget` profiles and runs both the misreport and the one-sybil
/// search for every agent. `tol_num` sets the reporting thresholds
/// (`tol_num + 2·tol_quad` for misreports, `tol_num + 4·tol_quad` for sybils).
pub fn exploit_scan(
    mech: &Mechanism,
    sampler: &ProfileSampler,
    budget: usize,
    grid: &SearchGrid,
    opts: &SearchOptions,
    quad: &QuadratureConfig,
    tol_num: f64,
) -> Result<ExploitScan> {
    if budget == 0 {
        return Err(MechError::InvalidParameter {
            name: "budget",
            reason: "need at least one profile".into(),
        });
    }
    let profiles = sampler.sample(budget);
    let misreport = scan_profiles(
        mech,
        &profiles,
        AttackTarget::Misreport,
        grid,
        opts,
        quad,
        tol_num + 2.0 * quad.tol_quad,
    )?;
    let sybil = scan_profiles(
        mech,
        &profiles,
        AttackTarget::Sybil,
        grid,
        opts,
        quad,
        tol_num + 4.0 * quad.tol_quad,
    )?;
    Ok(ExploitScan {
        sampler: sampler.clone(),
        budget,
        misreport,
        sybil,
    })
}
