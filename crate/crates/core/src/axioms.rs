//! Executable axiom checkers.
//!
//! Each checker searches a finite scope (a profile list and a bid grid) and
//! returns an [`AxiomReport`]. A pass only means that no violation was found
//! within that scope. Failures carry self-contained witnesses that can be
//! replayed against the mechanism.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::TIE_MARGIN;
use crate::error::{MechError, Result};
use crate::grid::SearchGrid;
use crate::mechanism::Mechanism;
use crate::payment::{coalition_utility, payment_of, utility_of, QuadratureConfig};
use crate::types::{AgentId, BidProfile, Permutation, ToleranceConfig};

pub const SCOPE_NOTE: &str =
    "pass means no violation was found within the declared search scope; it is not a proof";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    NonWastefulness,
    Symmetry,
    Monotonicity,
    ZeroBidPayment,
    IncentiveCompatibility,
    SybilProofness,
    IndividualRationality,
}

impl Axiom {
    pub const ALL: [Axiom; 7] = [
        Axiom::NonWastefulness,
        Axiom::Symmetry,
        Axiom::Monotonicity,
        Axiom::ZeroBidPayment,
        Axiom::IncentiveCompatibility,
        Axiom::SybilProofness,
        Axiom::IndividualRationality,
    ];

    /// The four axioms of the characterization.
    pub const CHARACTERIZING: [Axiom; 4] = [
        Axiom::NonWastefulness,
        Axiom::Symmetry,
        Axiom::IncentiveCompatibility,
        Axiom::SybilProofness,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Axiom::NonWastefulness => "non_wastefulness",
            Axiom::Symmetry => "symmetry",
            Axiom::Monotonicity => "monotonicity",
            Axiom::ZeroBidPayment => "zero_bid_payment",
            Axiom::IncentiveCompatibility => "incentive_compatibility",
            Axiom::SybilProofness => "sybil_proofness",
            Axiom::IndividualRationality => "individual_rationality",
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

/// What was violated, with enough data to re-evaluate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessDetail {
    AllocationSum {
        sum: f64,
    },
    /// `x_agent(v)` against `x_{π(agent)}` of the relabelled profile.
    Relabeling {
        mapping: Vec<(AgentId, AgentId)>,
        agent: AgentId,
        share_before: f64,
        share_after: f64,
    },
    BidSweep {
        agent: AgentId,
        low_bid: f64,
        high_bid: f64,
        low_share: f64,
        high_share: f64,
    },
    /// The profile already has `agent`'s bid set to zero.
    ZeroBidPayment {
        agent: AgentId,
        payment: f64,
    },
    Misreport {
        agent: AgentId,
        misreport: f64,
        truthful_utility: f64,
        deviant_utility: f64,
    },
    Sybil {
        agent: AgentId,
        sybil: AgentId,
        sybil_bid: f64,
        truthful_utility: f64,
        deviant_utility: f64,
    },
    NegativeUtility {
        agent: AgentId,
        utility: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// Index into the profile list the checker was given.
    pub profile_index: usize,
    pub profile: BidProfile,
    pub detail: WitnessDetail,
    /// Size of the violation; always above the checker's threshold.
    pub magnitude: f64,
}

impl Witness {
    /// Recomputes the violation magnitude from scratch.
    pub fn replay(&self, mech: &Mechanism, quad: &QuadratureConfig) -> Result<f64> {
        let p = &self.profile;
        match &self.detail {
            WitnessDetail::AllocationSum { .. } => Ok((mech.allocate(p).total() - 1.0).abs()),
            WitnessDetail::Relabeling { mapping, agent, .. } => {
                let perm = Permutation::new(mapping.clone())?;
                let before = mech.share(p, *agent);
                let after = mech.share(&p.relabel(&perm)?, perm.apply(*agent));
                Ok((before - after).abs())
            }
            WitnessDetail::BidSweep {
                agent,
                low_bid,
                high_bid,
                ..
            } => {
                let lo = mech.share(&p.with_bid(*agent, *low_bid)?, *agent);
                let hi = mech.share(&p.with_bid(*agent, *high_bid)?, *agent);
                Ok(lo - hi)
            }
            WitnessDetail::ZeroBidPayment { agent, .. } => {
                Ok(payment_of(mech, p, *agent, quad)?.value.abs())
            }
            WitnessDetail::Misreport {
                agent, misreport, ..
            } => {
                let value = p.bid(*agent).ok_or(MechError::UnknownAgent(*agent))?;
                let truthful = utility_of(mech, p, *agent, value, quad)?.value;
                let moved = p.with_bid(*agent, *misreport)?;
                let deviant = utility_of(mech, &moved, *agent, value, quad)?.value;
                Ok(deviant - truthful)
            }
            WitnessDetail::Sybil {
                agent,
                sybil,
                sybil_bid,
                ..
            } => {
                let value = p.bid(*agent).ok_or(MechError::UnknownAgent(*agent))?;
                let truthful = utility_of(mech, p, *agent, value, quad)?.value;
                let ext = p.extend(*sybil, *sybil_bid)?;
                let deviant = coalition_utility(mech, &ext, &[*agent, *sybil], value, quad)?.value;
                Ok(deviant - truthful)
            }
            WitnessDetail::NegativeUtility { agent, .. } => {
                let value = p.bid(*agent).ok_or(MechError::UnknownAgent(*agent))?;
                Ok(-utility_of(mech, p, *agent, value, quad)?.value)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub verdict: Verdict,
    /// First `max_witnesses` violations in canonical (profile, agent) order.
    pub witnesses: Vec<Witness>,
    /// Total number of violating (profile, agent) cases found.
    pub violations: usize,
    pub worst_magnitude: f64,
    pub threshold: f64,
    pub profiles_tested: usize,
    pub search_config: String,
    pub scope_note: String,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Search scope and tolerances shared by every checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckContext {
    pub tol: ToleranceConfig,
    pub quad: QuadratureConfig,
    pub grid: SearchGrid,
    /// Seeds permutation sampling for large profiles.
    pub seed: u64,
    /// Profiles with at most this many agents get every permutation.
    pub full_permutation_cutoff: usize,
    pub sampled_permutations: usize,
    pub max_witnesses: usize,
}

impl Default for CheckContext {
    fn default() -> Self {
        CheckContext {
            tol: ToleranceConfig::default(),
            quad: QuadratureConfig {
                tol_quad: ToleranceConfig::default().tol_quad,
                ..Default::default()
            },
            grid: SearchGrid::default(),
            seed: 42,
            full_permutation_cutoff: 5,
            sampled_permutations: 50,
            max_witnesses: 64,
        }
    }
}

impl CheckContext {
    pub fn ic_threshold(&self) -> f64 {
        self.tol.tol_num + 2.0 * self.quad.tol_quad
    }

    pub fn sybil_threshold(&self) -> f64 {
        self.tol.tol_num + 4.0 * self.quad.tol_quad
    }

    pub fn ir_threshold(&self) -> f64 {
        self.tol.tol_num + 2.0 * self.quad.tol_quad
    }

    pub fn threshold(&self, axiom: Axiom) -> f64 {
        match axiom {
            Axiom::NonWastefulness => self.tol.tol_alloc,
            Axiom::Symmetry | Axiom::Monotonicity | Axiom::ZeroBidPayment => self.tol.tol_num,
            Axiom::IncentiveCompatibility => self.ic_threshold(),
            Axiom::SybilProofness => self.sybil_threshold(),
            Axiom::IndividualRationality => self.ir_threshold(),
        }
    }

    fn grid_scope(&self) -> String {
        format!("grid {} augmented with 0, hi and profile bids", self.grid)
    }
}

fn assemble(
    axiom: Axiom,
    per_profile: Vec<Vec<Witness>>,
    profiles_tested: usize,
    search_config: String,
    ctx: &CheckContext,
) -> AxiomReport {
    let all: Vec<Witness> = per_profile.into_iter().flatten().collect();
    let violations = all.len();
    let worst_magnitude = all.iter().map(|w| w.magnitude).fold(0.0, f64::max);
    let witnesses: Vec<Witness> = all.into_iter().take(ctx.max_witnesses.max(1)).collect();
    AxiomReport {
        axiom,
        verdict: if violations == 0 {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        witnesses,
        violations,
        worst_magnitude,
        threshold: ctx.threshold(axiom),
        profiles_tested,
        search_config,
        scope_note: SCOPE_NOTE.to_string(),
    }
}

/// Runs `check` on every profile in parallel; results stay in input order.
fn per_profile<F>(profiles: &[BidProfile], check: F) -> Result<Vec<Vec<Witness>>>
where
    F: Fn(usize, &BidProfile) -> Result<Vec<Witness>> + Sync,
{
    profiles
        .par_iter()
        .enumerate()
        .map(|(k, p)| check(k, p))
        .collect()
}

pub fn check_non_wastefulness(
    mech: &Mechanism,
    profiles: &[BidProfile],
    ctx: &CheckContext,
) -> AxiomReport {
    let found = per_profile(profiles, |k, p| {
        let sum = mech.allocate(p).total();
        let gap = (sum - 1.0).abs();
        Ok(if gap > ctx.tol.tol_alloc {
            vec![Witness {
                profile_index: k,
                profile: p.clone(),
                detail: WitnessDetail::AllocationSum { sum },
                magnitude: gap,
            }]
        } else {
            vec![]
        })
    })
    .expect("allocation checks cannot fail");
    assemble(
        Axiom::NonWastefulness,
        found,
        profiles.len(),
        format!("{} profiles, |sum - 1| <= tol_alloc", profiles.len()),
        ctx,
    )
}

/// Every ordering of `0..n`, lexicographic.
fn all_orders(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                go(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

fn permutations_for(profile: &BidProfile, index: usize, ctx: &CheckContext) -> Vec<Permutation> {
    let agents: Vec<AgentId> = profile.agents().collect();
    let n = agents.len();
    let orders = if n <= ctx.full_permutation_cutoff {
        all_orders(n)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(
            ctx.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        (0..ctx.sampled_permutations)
            .map(|_| {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                order
            })
            .collect()
    };
    orders
        .iter()
        .map(|o| Permutation::from_order(&agents, o).expect("orders are bijections"))
        .filter(|perm| !perm.is_identity())
        .collect()
}

/// Relabelling covariance: if agent `a`'s bid moves to agent `π(a)`, so must
/// its share.
pub fn check_symmetry(
    mech: &Mechanism,
    profiles: &[BidProfile],
    ctx: &CheckContext,
) -> AxiomReport {
    let found = per_profile(profiles, |k, p| {
        let base = mech.allocate(p);
        let mut worst: Option<Witness> = None;
        for perm in permutations_for(p, k, ctx) {
            let moved = mech.allocate(&p.relabel(&perm)?);
            for &(agent, before) in base.shares() {
                let after = moved.share(perm.apply(agent)).unwrap_or(0.0);
                let gap = (before - after).abs();
                if gap > ctx.tol.tol_num && worst.as_ref().is_none_or(|w| gap > w.magnitude) {
                    worst = Some(Witness {
                        profile_index: k,
                        profile: p.clone(),
                        detail: WitnessDetail::Relabeling {
                            mapping: perm.mapping().to_vec(),
                            agent,
                            share_before: before,
                            share_after: after,
                        },
                        magnitude: gap,
                    });
                }
            }
        }
        Ok(worst.into_iter().collect())
    })
    .expect("relabelling a valid profile cannot fail");
    assemble(
        Axiom::Symmetry,
        found,
        profiles.len(),
        format!(
            "{} profiles; all permutations for n <= {}, {} sampled otherwise (seed {})",
            profiles.len(),
            ctx.full_permutation_cutoff,
            ctx.sampled_permutations,
            ctx.seed
        ),
        ctx,
    )
}

/// Own-bid sweeps: `x_i` may not drop between consecutive grid points.
pub fn check_monotonicity(
    mech: &Mechanism,
    profiles: &[BidProfile],
    ctx: &CheckContext,
) -> AxiomReport {
    let found = per_profile(profiles, |k, p| {
        let points = ctx.grid.points_for(p);
        let mut out = Vec::new();
        for agent in p.agents() {
            let shares = points
                .iter()
                .map(|&z| Ok(mech.share(&p.with_bid(agent, z)?, agent)))
                .collect::<Result<Vec<f64>>>()?;
            let worst = (1..points.len())
                .map(|j| (j, shares[j - 1] - shares[j]))
                .filter(|&(_, drop)| drop > ctx.tol.tol_num)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((j, drop)) = worst {
                out.push(Witness {
                    profile_index: k,
                    profile: p.clone(),
                    detail: WitnessDetail::BidSweep {
                        agent,
                        low_bid: points[j - 1],
                        high_bid: points[j],
                        low_share: shares[j - 1],
                        high_share: shares[j],
                    },
                    magnitude: drop,
                });
            }
        }
        Ok(out)
    })
    .expect("grid points are valid bids");
    assemble(
        Axiom::Monotonicity,
        found,
        profiles.len(),
        format!("{} profiles; {}", profiles.len(), ctx.grid_scope()),
        ctx,
    )
}

pub fn check_zero_bid_payment(
    mech: &Mechanism,
    profiles: &[BidProfile],
    ctx: &CheckContext,
) -> Result<AxiomReport> {
    let found = per_profile(profiles, |k, p| {
        let mut out = Vec::new();
        for agent in p.agents() {
            let zeroed = p.with_bid(agent, 0.0)?;
            let pay = payment_of(mech, &zeroed, agent, &ctx.quad)?.value;
            if pay.abs() > ctx.tol.tol_num {
                out.push(Witness {
                    profile_index: k,
                    profile: zeroed,
                    detail: WitnessDetail::ZeroBidPayment {
                        agent,
                        payment: pay,
                    },
                    magnitude: pay.abs(),
                });
            }
        }
        Ok(out)
    })?;
    Ok(assemble(
        Axiom::ZeroBidPayment,
        found,
        profiles.len(),
        format!(
            "{} profiles, each agent's bid set to 0 in turn",
            profiles.len()
        ),
        ctx,
    ))
}

/// Truthful bidding against every grid misreport.
pub fn check_ic(
    mech: &Mechanism,
    profiles: &[BidProfile],
    ctx: &CheckContext,
) -> Result<AxiomReport> {
    let threshold = ctx.ic_threshold();
    let found = per_profile(profiles, |k, p| {
        let points = ctx.grid.points_for(p);
        let mut out = Vec::new();
        for &(agent, value) in p.entries() {
            let truthful = utility_of(mech, p, agent, value, &ctx.quad)?.value;
            let mut best: Option<(f64, f64)> = None;
            for &u in &points {
                if u == value {
                    continue;
                }
                let deviant =
                    utility_of(mech, &p.with_bid(agent, u)?, agent, value, &ctx.quad)?.value;
                if best.is_none_or(|(_, d)| deviant > d + TIE_MARGIN) {
                    best = Some((u, deviant));
                }
            }
            if let Some((u, deviant)) = best {
                let gain = deviant - truthful;
                if gain > threshold {
                    out.push(Witness {
                        profile_index: k,
                        profile: p.clone(),
                        detail: WitnessDetail::Misreport {
                            agent,
                            misreport: u,
                            truthful_utility: truthful,
                            deviant_utility: deviant,
                        },
                        magnitude: gain,
                    });
                }
            }
        }
        Ok(out)
    })?;
    Ok(assemble(
        Axiom::IncentiveCompatibility,
        found,
        profiles.len(),
        format!(
            "{} profiles; misreports on {}",
            profiles.len(),
            ctx.grid_scope()
        ),
        ctx,
    ))
}

/// One fresh identity (id = max + 1) bidding each grid value while the
/// original account stays truthful.
pub fn check_sybil_proofness(
    mech: &Mechanism,
    profiles: &[BidProfile],
    ctx: &CheckContext,
) -> Result<AxiomReport> {
    let threshold = ctx.sybil_threshold();
    let found = per_profile(profiles, |k, p| {
        let points = ctx.grid.points_for(p);
        let sybil = p.fresh_id();
        let mut out = Vec::new();
        for &(agent, value) in p.entries() {
            let truthful = utility_of(mech, p, agent, value, &ctx.quad)?.value;
            let mut best: Option<(f64, f64)> = None;
            for &u in &points {
                let ext = p.extend(sybil, u)?;
                let deviant =
                    coalition_utility(mech, &ext, &[agent, sybil], value, &ctx.quad)?.value;
                if best.is_none_or(|(_, d)| deviant > d + TIE_MARGIN) {
                    best = Some((u, deviant));
                }
            }
            let (u, deviant) = best.expect("grid always contains 0");
            let gain = deviant - truthful;
            if gain > threshold {
                out.push(Witness {
                    profile_index: k,
                    profile: p.clone(),
                    detail: WitnessDetail::Sybil {
                        agent,
                        sybil,
                        sybil_bid: u,
                        truthful_utility: truthful,
                        deviant_utility: deviant,
                    },
                    magnitude: gain,
                });
            }
        }
        Ok(out)
    })?;
    Ok(assemble(
        Axiom::SybilProofness,
        found,
        profiles.len(),
        format!(
            "{} profiles; one sybil bidding on {}",
            profiles.len(),
            ctx.grid_scope()
        ),
        ctx,
    ))
}

pub fn check_ir(
    mech: &Mechanism,
    profiles: &[BidProfile],
    ctx: &CheckContext,
) -> Result<AxiomReport> {
    let threshold = ctx.ir_threshold();
    let found = per_profile(profiles, |k, p| {
        let mut out = Vec::new();
        for &(agent, value) in p.entries() {
            let u = utility_of(mech, p, agent, value, &ctx.quad)?.value;
            if u < -threshold {
                out.push(Witness {
                    profile_index: k,
                    profile: p.clone(),
                    detail: WitnessDetail::NegativeUtility { agent, utility: u },
                    magnitude: -u,
                });
            }
        }
        Ok(out)
    })?;
    Ok(assemble(
        Axiom::IndividualRationality,
        found,
        profiles.len(),
        format!("{} profiles, truthful utilities", profiles.len()),
        ctx,
    ))
}

/// All seven checks, in [`Axiom::ALL`] order.
pub fn check_all(
    mech: &Mechanism,
    profiles: &[BidProfile],
    ctx: &CheckContext,
) -> Result<Vec<AxiomReport>> {
    Axiom::ALL
        .iter()
        .map(|&axiom| check_axiom(axiom, mech, profiles, ctx))
        .collect()
}

pub fn check_axiom(
    axiom: Axiom,
    mech: &Mechanism,
    profiles: &[BidProfile],
    ctx: &CheckContext,
) -> Result<AxiomReport> {
    match axiom {
        Axiom::NonWastefulness => Ok(check_non_wastefulness(mech, profiles, ctx)),
        Axiom::Symmetry => Ok(check_symmetry(mech, profiles, ctx)),
        Axiom::Monotonicity => Ok(check_monotonicity(mech, profiles, ctx)),
        Axiom::ZeroBidPayment => check_zero_bid_payment(mech, profiles, ctx),
        Axiom::IncentiveCompatibility => check_ic(mech, profiles, ctx),
        Axiom::SybilProofness => check_sybil_proofness(mech, profiles, ctx),
        Axiom::IndividualRationality => check_ir(mech, profiles, ctx),
    }
}

/// The five mechanisms of the independence demonstration.
pub fn independence_mechanisms(c: f64, reserve: f64) -> Vec<Mechanism> {
    vec![
        Mechanism::second_price(),
        Mechanism::reserve_second_price(reserve),
        Mechanism::lottery(),
        Mechanism::asymmetric_second_price(),
        Mechanism::proportional(c),
    ]
}

/// Which of the four characterizing axioms each built-in is expected to
/// violate; `None` for mechanisms without an expectation.
pub fn expected_failures(mechanism: &str) -> Option<Vec<Axiom>> {
    match mechanism {
        "spa" => Some(vec![]),
        "spa-reserve" => Some(vec![Axiom::NonWastefulness]),
        "lottery" => Some(vec![Axiom::SybilProofness]),
        "asymmetric-spa" => Some(vec![Axiom::Symmetry]),
        "proportional" => Some(vec![Axiom::IncentiveCompatibility]),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub mechanism: String,
    pub description: String,
    pub verdicts: Vec<(Axiom, Verdict)>,
    pub expected_failures: Option<Vec<Axiom>>,
    /// `None` when the row has no expectation.
    pub matches_expected: Option<bool>,
    pub reports: Vec<AxiomReport>,
}

impl MatrixRow {
    pub fn verdict(&self, axiom: Axiom) -> Option<Verdict> {
        self.verdicts
            .iter()
            .find(|(a, _)| *a == axiom)
            .map(|&(_, v)| v)
    }

    /// Failed axioms among the four characterizing ones.
    pub fn characterizing_failures(&self) -> Vec<Axiom> {
        Axiom::CHARACTERIZING
            .into_iter()
            .filter(|&a| self.verdict(a) == Some(Verdict::Fail))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceMatrix {
    pub axioms: Vec<Axiom>,
    pub rows: Vec<MatrixRow>,
    pub profiles_tested: usize,
    /// Every row with an expectation matches it.
    pub matches_expected: bool,
}

impl IndependenceMatrix {
    pub fn row(&self, mechanism: &str) -> Option<&MatrixRow> {
        self.rows.iter().find(|r| r.mechanism == mechanism)
    }

    /// Aligned text table, one row per mechanism.
    pub fn render_table(&self) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| r.mechanism.len())
            .max()
            .unwrap_or(9)
            .max("mechanism".len());
        let mut out = format!("{:<name_w$}", "mechanism");
        for a in &self.axioms {
            out.push_str(&format!("  {:>w$}", a.as_str(), w = a.as_str().len()));
        }
        out.push_str("  expected\n");
        for row in &self.rows {
            out.push_str(&format!("{:<name_w$}", row.mechanism));
            for a in &self.axioms {
                let cell = row.verdict(*a).map_or("-".to_string(), |v| v.to_string());
                out.push_str(&format!("  {:>w$}", cell, w = a.as_str().len()));
            }
            let tag = match row.matches_expected {
                Some(true) => "match",
                Some(false) => "MISMATCH",
                None => "n/a",
            };
            out.push_str(&format!("  {tag}\n"));
        }
        out
    }
}

/// Runs every checker on every mechanism and compares the rows with the
/// expected failure pattern on the four characterizing axioms.
pub fn independence_matrix(
    mechanisms: &[Mechanism],
    profiles: &[BidProfile],
    ctx: &CheckContext,
) -> Result<IndependenceMatrix> {
    let rows = mechanisms
        .iter()
        .map(|mech| {
            let reports = check_all(mech, profiles, ctx)?;
            let verdicts: Vec<(Axiom, Verdict)> =
                reports.iter().map(|r| (r.axiom, r.verdict)).collect();
            let expected = expected_failures(mech.name());
            let mut row = MatrixRow {
                mechanism: mech.name().to_string(),
                description: mech.describe(),
                verdicts,
                expected_failures: expected.clone(),
                matches_expected: None,
                reports,
            };
            row.matches_expected = expected.map(|e| row.characterizing_failures() == e);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let matches_expected = rows.iter().all(|r| r.matches_expected != Some(false));
    Ok(IndependenceMatrix {
        axioms: Axiom::ALL.to_vec(),
        rows,
        profiles_tested: profiles.len(),
        matches_expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{FnPayment, FnRule};
    use crate::types::{Allocation, PaymentVector};

    fn prof(bids: &[f64]) -> BidProfile {
        BidProfile::from_bids(bids).unwrap()
    }

    fn ctx() -> CheckContext {
        CheckContext::default()
    }

    #[test]
    fn permutation_enumeration_sizes() {
        assert_eq!(all_orders(3).len(), 6);
        assert_eq!(all_orders(5).len(), 120);
        let c = ctx();
        assert_eq!(permutations_for(&prof(&[1.0; 4]), 0, &c).len(), 23);
        let big = prof(&[1.0; 7]);
        let sampled = permutations_for(&big, 3, &c);
        assert!(sampled.len() <= 50 && sampled.len() >= 45);
        assert_eq!(sampled, permutations_for(&big, 3, &c));
    }

    #[test]
    fn non_wastefulness_examples() {
        let c = ctx();
        let r = check_non_wastefulness(
            &Mechanism::reserve_second_price(4.0),
            &[prof(&[2.0, 3.0])],
            &c,
        );
        assert_eq!(r.verdict, Verdict::Fail);
        match &r.witnesses[0].detail {
            WitnessDetail::AllocationSum { sum } => assert_eq!(*sum, 0.0),
            other => panic!("{other:?}"),
        }
        let lot = check_non_wastefulness(&Mechanism::lottery(), &[prof(&[2.0, 3.0, 9.0])], &c);
        assert!(lot.passed());
    }

    #[test]
    fn symmetry_examples() {
        let c = ctx();
        let tie = [prof(&[4.0, 4.0])];
        assert!(check_symmetry(&Mechanism::second_price(), &tie, &c).passed());
        let asym = check_symmetry(&Mechanism::asymmetric_second_price(), &tie, &c);
        assert_eq!(asym.verdict, Verdict::Fail);
        assert_eq!(asym.witnesses[0].magnitude, 1.0);
    }

    #[test]
    fn spa_passes_cyclic_relabelling() {
        // a 3-cycle is where reading the permutation the wrong way round
        // would fail a symmetric rule
        let c = ctx();
        let r = check_symmetry(&Mechanism::second_price(), &[prof(&[5.0, 3.0, 1.0])], &c);
        assert!(r.passed());
    }

    #[test]
    fn monotonicity_negative_control() {
        let broken = Mechanism::myerson(
            "broken",
            FnRule::new("1 - clamp(bid)", |p: &BidProfile| {
                Allocation::aligned(p, p.bids().map(|b| 1.0 - b.clamp(0.0, 1.0)).collect())
            }),
        );
        let c = CheckContext {
            grid: SearchGrid::new(0.0, 2.0, 0.25).unwrap(),
            ..ctx()
        };
        let r = check_monotonicity(&broken, &[prof(&[0.5])], &c);
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(
            check_monotonicity(&Mechanism::proportional(0.5), &[prof(&[1.0, 3.0])], &c).passed()
        );
    }

    #[test]
    fn zero_bid_negative_control() {
        let c = ctx();
        let fee = Mechanism::explicit(
            "entry-fee",
            crate::mechanism::Lottery,
            FnPayment::new("p = 1", |p: &BidProfile| {
                PaymentVector::aligned(p, vec![1.0; p.len()])
            }),
        );
        let r = check_zero_bid_payment(&fee, &[prof(&[3.0, 2.0])], &c).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.violations, 2);
        let prop = check_zero_bid_payment(&Mechanism::proportional(0.5), &[prof(&[3.0, 2.0])], &c)
            .unwrap();
        assert!(prop.passed());
    }

    #[test]
    fn ic_examples() {
        let c = CheckContext {
            grid: SearchGrid::new(0.0, 10.0, 0.25).unwrap(),
            ..ctx()
        };
        let r = check_ic(&Mechanism::proportional(0.5), &[prof(&[4.0, 4.0])], &c).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        // U(b) = 4b/(b+4) − b/2 over the 0.25 grid peaks at b = 1.75
        match &r.witnesses[0].detail {
            WitnessDetail::Misreport { misreport, .. } => assert_eq!(*misreport, 1.75),
            other => panic!("{other:?}"),
        }
        assert!(check_ic(&Mechanism::lottery(), &[prof(&[4.0, 1.0])], &c)
            .unwrap()
            .passed());
        assert!(
            check_ic(&Mechanism::second_price(), &[prof(&[4.0, 1.0, 7.5])], &c)
                .unwrap()
                .passed()
        );
    }

    #[test]
    fn sybil_lottery_example() {
        let c = ctx();
        let r = check_sybil_proofness(&Mechanism::lottery(), &[prof(&[5.0, 1.0])], &c).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let w = r
            .witnesses
            .iter()
            .find(|w| {
                matches!(
                    w.detail,
                    WitnessDetail::Sybil {
                        agent: AgentId(1),
                        ..
                    }
                )
            })
            .unwrap();
        assert!((w.magnitude - 5.0 / 6.0).abs() < 1e-12);
        assert!(
            check_sybil_proofness(&Mechanism::second_price(), &[prof(&[5.0, 1.0])], &c)
                .unwrap()
                .passed()
        );
    }

    #[test]
    fn ir_examples() {
        let c = ctx();
        let r = check_ir(&Mechanism::proportional(0.5), &[prof(&[0.1, 10.0])], &c).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let expected = 0.1 * (0.1 / 10.1) - 0.05;
        match r.witnesses[0].detail {
            WitnessDetail::NegativeUtility { agent, utility } => {
                assert_eq!(agent, AgentId(1));
                assert!((utility - expected).abs() < 1e-15);
            }
            ref other => panic!("{other:?}"),
        }
        assert!(check_ir(&Mechanism::lottery(), &[prof(&[0.1, 10.0])], &c)
            .unwrap()
            .passed());
    }

    #[test]
    fn witnesses_replay() {
        let c = ctx();
        let profiles = [prof(&[5.0, 1.0]), prof(&[4.0, 4.0, 2.0])];
        for mech in independence_mechanisms(0.5, 4.0) {
            for report in check_all(&mech, &profiles, &c).unwrap() {
                for w in &report.witnesses {
                    let again = w.replay(&mech, &c.quad).unwrap();
                    assert!(
                        (again - w.magnitude).abs() < 1e-12,
                        "{} {:?}",
                        mech.name(),
                        w
                    );
                }
            }
        }
    }

    #[test]
    fn table_renders_every_row() {
        let c = ctx();
        let m = independence_matrix(
            &[Mechanism::second_price(), Mechanism::lottery()],
            &[prof(&[5.0, 1.0])],
            &c,
        )
        .unwrap();
        let table = m.render_table();
        assert_eq!(table.lines().count(), 3);
        assert!(table.contains("sybil_proofness"));
        assert!(m.matches_expected);
    }
}
