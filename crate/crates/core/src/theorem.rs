//! Step-by-step numerical traces of the characterization argument.
//!
//! Each function evaluates one step of the argument against a candidate
//! mechanism and reports where the mechanism is consistent with it and
//! where it breaks. Limit statements are only ever checked on finite
//! truncations, and every trace says so.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attack::{best_sybil_response, Deviation, DeviationKind, SearchOptions};
use crate::error::{MechError, Result};
use crate::grid::SearchGrid;
use crate::mechanism::Mechanism;
use crate::payment::{coalition_utility, utility_of, QuadratureConfig};
use crate::types::{AgentId, BidProfile, ToleranceConfig};

const FINITE_NOTE: &str =
    "finite evidence only: limits and almost-sure statements are checked on truncations and grids";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    /// Share of a lone higher bidder among many equal bids tends to 1.
    Lemma1,
    /// Per-n inequality implied by one sybil joining the replicated profile.
    Eqn2,
    /// `U₁(u, v) ≥ u − v`.
    Lemma2,
    /// `v ↦ U₁(u, v)` is non-increasing on `[0, u]`.
    Lemma3,
    /// `(1/u)∫₀^u U₁(u, v) dv = u/2`.
    Averaging,
    /// The one-sybil attack of the induction step.
    Induction,
}

impl Lemma {
    pub const ALL: [Lemma; 6] = [
        Lemma::Lemma1,
        Lemma::Eqn2,
        Lemma::Lemma2,
        Lemma::Lemma3,
        Lemma::Averaging,
        Lemma::Induction,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Lemma::Lemma1 => "lemma1",
            Lemma::Eqn2 => "eqn2",
            Lemma::Lemma2 => "lemma2",
            Lemma::Lemma3 => "lemma3",
            Lemma::Averaging => "averaging",
            Lemma::Induction => "induction",
        }
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Lemma {
    type Err = MechError;

    fn from_str(s: &str) -> Result<Self> {
        Lemma::ALL
            .into_iter()
            .find(|l| l.as_str() == s.trim())
            .ok_or_else(|| MechError::InvalidParameter {
                name: "lemma",
                reason: format!("unknown lemma `{s}`"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceVerdict {
    Consistent,
    Violated,
}

/// One row of a trace: the abscissa (`n`, `v` or `u`), the computed
/// quantity, what it is compared with, and `computed − reference` style
/// slack (negative means the reference was not met).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub x: f64,
    pub computed: f64,
    pub reference: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideCheck {
    pub label: String,
    pub max_error: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaTrace {
    pub lemma: Lemma,
    pub mechanism: String,
    pub u: f64,
    pub v: Option<f64>,
    pub n_max: Option<usize>,
    /// Name of the abscissa column: `n`, `v` or `u`.
    pub x_label: String,
    pub samples: Vec<TraceSample>,
    pub side_checks: Vec<SideCheck>,
    pub verdict: TraceVerdict,
    pub worst_slack: f64,
    pub tolerance: f64,
    pub note: String,
}

impl LemmaTrace {
    pub fn consistent(&self) -> bool {
        self.verdict == TraceVerdict::Consistent
    }
}

/// Tolerances and search settings for the proof harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremContext {
    pub tol: ToleranceConfig,
    pub quad: QuadratureConfig,
    /// Rival-bid grid for the monotonicity trace and the induction fallback
    /// search.
    pub grid: SearchGrid,
    pub search: SearchOptions,
    /// Outer trapezoid intervals of the averaging integral.
    pub averaging_intervals: usize,
}

impl Default for TheoremContext {
    fn default() -> Self {
        TheoremContext {
            tol: ToleranceConfig::default(),
            quad: QuadratureConfig::default(),
            grid: SearchGrid::default(),
            search: SearchOptions::default(),
            averaging_intervals: 2000,
        }
    }
}

impl TheoremContext {
    fn one_utility_stack(&self) -> f64 {
        self.tol.tol_num + 2.0 * self.quad.tol_quad
    }

    fn two_utility_stack(&self) -> f64 {
        self.tol.tol_num + 4.0 * self.quad.tol_quad
    }

    /// Allowed error of the averaging identity.
    pub fn averaging_tolerance(&self) -> f64 {
        10.0 * self.quad.tol_quad
    }
}

fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(MechError::Precondition(msg.into()))
    }
}

const BIDDER: AgentId = AgentId(1);

/// `U₁` for agent 1 bidding its value.
fn u1(mech: &Mechanism, profile: &BidProfile, ctx: &TheoremContext) -> Result<f64> {
    let value = profile.bid(BIDDER).ok_or(MechError::UnknownAgent(BIDDER))?;
    Ok(utility_of(mech, profile, BIDDER, value, &ctx.quad)?.value)
}

/// `x₁(u, v₍₂,ₙ₎)` for `n = 2..=n_max`, with the running maximum as slack
/// against the limit 1.
pub fn lemma1_trace(
    mech: &Mechanism,
    u: f64,
    v: f64,
    n_max: usize,
    ctx: &TheoremContext,
) -> Result<LemmaTrace> {
    require(
        u > v && v >= 0.0,
        format!("need u > v >= 0, got u={u} v={v}"),
    )?;
    require(n_max >= 2, "n_max must be at least 2")?;
    let mut running = f64::NEG_INFINITY;
    let mut samples = Vec::with_capacity(n_max - 1);
    for n in 2..=n_max {
        let x = mech.share(&BidProfile::replicate(u, v, n)?, BIDDER);
        running = running.max(x);
        samples.push(TraceSample {
            x: n as f64,
            computed: x,
            reference: 1.0,
            slack: running - 1.0,
        });
    }
    let worst_slack = running - 1.0;
    let consistent = worst_slack >= -ctx.tol.tol_num;
    Ok(LemmaTrace {
        lemma: Lemma::Lemma1,
        mechanism: mech.name().to_string(),
        u,
        v: Some(v),
        n_max: Some(n_max),
        x_label: "n".into(),
        samples,
        side_checks: vec![],
        verdict: if consistent {
            TraceVerdict::Consistent
        } else {
            TraceVerdict::Violated
        },
        worst_slack,
        tolerance: ctx.tol.tol_num,
        note: format!(
            "slack column is the running max of x1 minus 1 up to n = {n_max}; {FINITE_NOTE}"
        ),
    })
}

/// `x₂(u, v₍₂,ₙ₊₁₎)` against `(1/n)[1 − x₁(u, v₍₂,ₙ₊₁₎)]`: the sybil's share
/// among `n` equal bidders. Returns the absolute gap.
pub fn sybil_share_identity_gap(mech: &Mechanism, u: f64, v: f64, n: usize) -> Result<f64> {
    require(n >= 1, "n must be at least 1")?;
    let p = BidProfile::replicate(u, v, n + 1)?;
    let alloc = mech.allocate(&p);
    let x1 = alloc.share(BIDDER).unwrap_or(0.0);
    let x2 = alloc.share(AgentId(2)).unwrap_or(0.0);
    Ok((x2 - (1.0 - x1) / n as f64).abs())
}

/// `U₁(u, v₍₂,ₙ₎) ≥ U₁(u, v₍₂,ₙ₊₁₎) + (u − v)(1/n)[1 − x₁(u, v₍₂,ₙ₊₁₎)]`
/// for each `n = 2..=n_max`.
pub fn eqn2_chain_check(
    mech: &Mechanism,
    u: f64,
    v: f64,
    n_max: usize,
    ctx: &TheoremContext,
) -> Result<LemmaTrace> {
    require(
        u > v && v >= 0.0,
        format!("need u > v >= 0, got u={u} v={v}"),
    )?;
    require(n_max >= 2, "n_max must be at least 2")?;
    let tolerance = ctx.two_utility_stack();
    let mut samples = Vec::with_capacity(n_max - 1);
    let mut identity_gap: f64 = 0.0;
    let mut next = BidProfile::replicate(u, v, 2)?;
    let mut lhs = u1(mech, &next, ctx)?;
    for n in 2..=n_max {
        next = BidProfile::replicate(u, v, n + 1)?;
        let u_next = u1(mech, &next, ctx)?;
        let x1_next = mech.share(&next, BIDDER);
        let rhs = u_next + (u - v) * (1.0 - x1_next) / n as f64;
        samples.push(TraceSample {
            x: n as f64,
            computed: lhs,
            reference: rhs,
            slack: lhs - rhs,
        });
        identity_gap = identity_gap.max(sybil_share_identity_gap(mech, u, v, n)?);
        lhs = u_next;
    }
    let worst_slack = samples
        .iter()
        .map(|s| s.slack)
        .fold(f64::INFINITY, f64::min);
    let identity_ok = identity_gap <= ctx.tol.tol_num;
    let consistent = worst_slack >= -tolerance && identity_ok;
    Ok(LemmaTrace {
        lemma: Lemma::Eqn2,
        mechanism: mech.name().to_string(),
        u,
        v: Some(v),
        n_max: Some(n_max),
        x_label: "n".into(),
        samples,
        side_checks: vec![SideCheck {
            label: "x2(u,v[2,n+1]) = (1 - x1(u,v[2,n+1]))/n".into(),
            max_error: identity_gap,
            ok: identity_ok,
        }],
        verdict: if consistent {
            TraceVerdict::Consistent
        } else {
            TraceVerdict::Violated
        },
        worst_slack,
        tolerance,
        note: format!("computed = U1 with n bidders, reference = sybil lower bound; {FINITE_NOTE}"),
    })
}

/// `U₁(u, v) − (u − v)` in the two-bidder profile.
pub fn lemma2_gap(mech: &Mechanism, u: f64, v: f64, ctx: &TheoremContext) -> Result<f64> {
    require(
        u >= v && v >= 0.0,
        format!("need u >= v >= 0, got u={u} v={v}"),
    )?;
    Ok(u1(mech, &BidProfile::from_bids(&[u, v])?, ctx)? - (u - v))
}

/// [`lemma2_gap`] at fixed `u` for each rival bid in `vs` (those above `u`
/// are skipped).
pub fn lemma2_trace(
    mech: &Mechanism,
    u: f64,
    vs: &[f64],
    ctx: &TheoremContext,
) -> Result<LemmaTrace> {
    require(u >= 0.0, "u must be nonnegative")?;
    let tolerance = ctx.one_utility_stack();
    let samples = vs
        .iter()
        .filter(|&&v| v <= u)
        .map(|&v| {
            let gap = lemma2_gap(mech, u, v, ctx)?;
            Ok(TraceSample {
                x: v,
                computed: gap + (u - v),
                reference: u - v,
                slack: gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    require(!samples.is_empty(), "no rival bid v <= u to evaluate")?;
    let worst_slack = samples
        .iter()
        .map(|s| s.slack)
        .fold(f64::INFINITY, f64::min);
    Ok(LemmaTrace {
        lemma: Lemma::Lemma2,
        mechanism: mech.name().to_string(),
        u,
        v: (samples.len() == 1).then(|| samples[0].x),
        n_max: None,
        x_label: "v".into(),
        samples,
        side_checks: vec![],
        verdict: if worst_slack >= -tolerance {
            TraceVerdict::Consistent
        } else {
            TraceVerdict::Violated
        },
        worst_slack,
        tolerance,
        note: format!("computed = U1(u,v), reference = u - v; {FINITE_NOTE}"),
    })
}

/// `U₁(u, v)` over the grid points of `v_grid` within `[0, u]`; consecutive
/// increases beyond tolerance are violations.
pub fn lemma3_monotone(
    mech: &Mechanism,
    u: f64,
    v_grid: &SearchGrid,
    ctx: &TheoremContext,
) -> Result<LemmaTrace> {
    require(u >= 0.0, "u must be nonnegative")?;
    let tolerance = ctx.one_utility_stack();
    let vs = v_grid.points_up_to(u);
    let mut samples = Vec::with_capacity(vs.len());
    let mut prev: Option<f64> = None;
    for v in vs {
        let value = u1(mech, &BidProfile::from_bids(&[u, v])?, ctx)?;
        let reference = prev.unwrap_or(value);
        samples.push(TraceSample {
            x: v,
            computed: value,
            reference,
            slack: reference - value,
        });
        prev = Some(value);
    }
    let worst_slack = samples
        .iter()
        .map(|s| s.slack)
        .fold(f64::INFINITY, f64::min);
    Ok(LemmaTrace {
        lemma: Lemma::Lemma3,
        mechanism: mech.name().to_string(),
        u,
        v: None,
        n_max: None,
        x_label: "v".into(),
        samples,
        side_checks: vec![],
        verdict: if worst_slack >= -tolerance {
            TraceVerdict::Consistent
        } else {
            TraceVerdict::Violated
        },
        worst_slack,
        tolerance,
        note: format!("computed = U1(u,v), reference = previous grid value; {FINITE_NOTE}"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragingResult {
    pub u: f64,
    /// `(1/u)∫₀^u U₁(u, v) dv` at full resolution.
    pub value: f64,
    pub reference: f64,
    /// Same integral with half as many intervals.
    pub half_resolution: f64,
    pub resolution_gap: f64,
    pub resolution_ok: bool,
}

/// Checks, on a coarse pair grid, the two properties the averaging identity
/// relies on: full allocation and symmetry in the two-bidder case.
fn averaging_preconditions(mech: &Mechanism, u: f64, ctx: &TheoremContext) -> Result<()> {
    let steps = 10;
    for a in 0..=steps {
        for b in 0..=steps {
            let z = u * a as f64 / steps as f64;
            let v = u * b as f64 / steps as f64;
            let alloc = mech.allocate(&BidProfile::from_bids(&[z, v])?);
            let x1 = alloc.share(AgentId(1)).unwrap_or(0.0);
            let x2 = alloc.share(AgentId(2)).unwrap_or(0.0);
            if (x1 + x2 - 1.0).abs() > ctx.tol.tol_alloc {
                return Err(MechError::Precondition(format!(
                    "averaging identity needs a non-wasteful rule: x1+x2 = {} at ({z}, {v})",
                    x1 + x2
                )));
            }
            let swapped = mech.share(&BidProfile::from_bids(&[v, z])?, AgentId(2));
            if (x1 - swapped).abs() > ctx.tol.tol_num {
                return Err(MechError::Precondition(format!(
                    "averaging identity needs a symmetric rule: x1({z},{v}) = {x1} but x2({v},{z}) = {swapped}"
                )));
            }
        }
    }
    Ok(())
}

/// `(1/u)∫₀^u U₁(u, v) dv` by the composite trapezoid rule, compared with
/// `u/2`. The identity holds for every non-wasteful symmetric rule under
/// Myerson payments, so it cross-checks the whole payment engine.
pub fn averaging_identity(
    mech: &Mechanism,
    u: f64,
    ctx: &TheoremContext,
) -> Result<AveragingResult> {
    require(
        u > 0.0 && u.is_finite(),
        format!("u must be positive, got {u}"),
    )?;
    let intervals = ctx.averaging_intervals.max(2) & !1; // even, so halving is exact
    averaging_preconditions(mech, u, ctx)?;
    let h = u / intervals as f64;
    let values = (0..=intervals)
        .map(|k| {
            let v = if k == intervals { u } else { k as f64 * h };
            u1(mech, &BidProfile::from_bids(&[u, v])?, ctx)
        })
        .collect::<Result<Vec<f64>>>()?;
    let trapezoid = |stride: usize| {
        let pts: Vec<f64> = values.iter().step_by(stride).copied().collect();
        let inner: f64 = pts[1..pts.len() - 1].iter().sum();
        let width = h * stride as f64;
        width * (inner + 0.5 * (pts[0] + pts[pts.len() - 1]))
    };
    let value = trapezoid(1) / u;
    let half = trapezoid(2) / u;
    let gap = (value - half).abs();
    Ok(AveragingResult {
        u,
        value,
        reference: u / 2.0,
        half_resolution: half,
        resolution_gap: gap,
        resolution_ok: gap <= ctx.averaging_tolerance(),
    })
}

/// [`averaging_identity`] for each `u` in `us`.
pub fn averaging_trace(mech: &Mechanism, us: &[f64], ctx: &TheoremContext) -> Result<LemmaTrace> {
    require(!us.is_empty(), "need at least one u")?;
    let tolerance = ctx.averaging_tolerance();
    let results = us
        .iter()
        .map(|&u| averaging_identity(mech, u, ctx))
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<TraceSample> = results
        .iter()
        .map(|r| TraceSample {
            x: r.u,
            computed: r.value,
            reference: r.reference,
            slack: -(r.value - r.reference).abs(),
        })
        .collect();
    let worst_slack = samples
        .iter()
        .map(|s| s.slack)
        .fold(f64::INFINITY, f64::min);
    let worst_gap = results.iter().map(|r| r.resolution_gap).fold(0.0, f64::max);
    let resolution_ok = results.iter().all(|r| r.resolution_ok);
    Ok(LemmaTrace {
        lemma: Lemma::Averaging,
        mechanism: mech.name().to_string(),
        u: us[0],
        v: None,
        n_max: None,
        x_label: "u".into(),
        samples,
        side_checks: vec![SideCheck {
            label: "full vs half resolution trapezoid".into(),
            max_error: worst_gap,
            ok: resolution_ok,
        }],
        verdict: if worst_slack >= -tolerance && resolution_ok {
            TraceVerdict::Consistent
        } else {
            TraceVerdict::Violated
        },
        worst_slack,
        tolerance,
        note: format!(
            "computed = (1/u) * integral of U1(u,v) over v in [0,u], reference = u/2; slack = -|error|; {FINITE_NOTE}"
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// The deviator bids the top rival value and one sybil copies the
    /// removed bidder's bid.
    Explicit,
    /// The explicit attack did not pay; a grid search over the sybil bid did.
    GridSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum InductionOutcome {
    /// The low bidder gets nothing: no attack to build.
    NotApplicable { share: f64 },
    Witness {
        construction: Construction,
        /// Share the low bidder receives in the original profile.
        share: f64,
        /// `(u − v)·x₁ + U_sybil`, the bound used to show the attack pays.
        chain_lower_bound: f64,
        deviation: Deviation,
    },
    /// Neither construction found a profitable attack.
    NoProfitableDeviation { share: f64, best: Deviation },
}

impl InductionOutcome {
    pub fn witness(&self) -> Option<&Deviation> {
        match self {
            InductionOutcome::Witness { deviation, .. } => Some(deviation),
            _ => None,
        }
    }
}

/// Induction-step attack for a profile whose first agent (lowest id) bids
/// `v` below `u`, the highest rival bid. When that agent still receives a
/// positive share, a bidder of value `u` facing the remaining rivals gains
/// by adding one sybil that copies the removed rival's bid.
pub fn induction_witness(
    mech: &Mechanism,
    profile: &BidProfile,
    ctx: &TheoremContext,
) -> Result<InductionOutcome> {
    require(profile.len() >= 3, "induction step needs at least 3 agents")?;
    let (low_agent, v) = profile.entries()[0];
    let u = profile
        .max_bid_excluding(low_agent)
        .expect("at least two rivals");
    require(
        v < u,
        format!("first agent must bid below the top rival: v={v}, u={u}"),
    )?;

    let share = mech.share(profile, low_agent);
    if share <= ctx.tol.tol_num {
        return Ok(InductionOutcome::NotApplicable { share });
    }

    // the sybil copies the lowest rival bid (ties: highest id), so the top
    // rival stays among the remaining bidders
    let &(removed, sybil_bid) = profile.entries()[1..]
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .expect("at least two rivals");
    let base = profile.without(removed)?.with_bid(low_agent, u)?;
    let sybil = base.fresh_id();
    let attacked = base.extend(sybil, sybil_bid)?;

    let truthful = utility_of(mech, &base, low_agent, u, &ctx.quad)?.value;
    let deviant = coalition_utility(mech, &attacked, &[low_agent, sybil], u, &ctx.quad)?.value;
    let sybil_surplus = utility_of(mech, &attacked, sybil, sybil_bid, &ctx.quad)?.value;
    let chain_lower_bound = (u - v) * share + sybil_surplus;
    let explicit = Deviation {
        kind: DeviationKind::Sybil,
        deviator: low_agent,
        profile: base.clone(),
        misreport_bid: None,
        sybil_ids: vec![sybil],
        sybil_bids: vec![sybil_bid],
        truthful_utility: truthful,
        deviant_utility: deviant,
        gain: deviant - truthful,
        grid_gain: deviant - truthful,
    };
    let threshold = ctx.two_utility_stack();
    if explicit.gain > threshold {
        return Ok(InductionOutcome::Witness {
            construction: Construction::Explicit,
            share,
            chain_lower_bound,
            deviation: explicit,
        });
    }

    let searched = best_sybil_response(mech, &base, low_agent, &ctx.grid, &ctx.search, &ctx.quad)?;
    if searched.gain > threshold {
        return Ok(InductionOutcome::Witness {
            construction: Construction::GridSearch,
            share,
            chain_lower_bound,
            deviation: searched,
        });
    }
    let best = if searched.gain > explicit.gain {
        searched
    } else {
        explicit
    };
    Ok(InductionOutcome::NoProfitableDeviation { share, best })
}

/// Which steps of the argument a mechanism trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofLocalization {
    pub lemma1_flagged: bool,
    pub eqn2_violated: bool,
    pub lemma2_violated: bool,
    pub induction_witness: bool,
}

impl ProofLocalization {
    pub fn any(&self) -> bool {
        self.lemma1_flagged || self.eqn2_violated || self.lemma2_violated || self.induction_witness
    }
}

pub fn localize(
    mech: &Mechanism,
    u: f64,
    v: f64,
    n_max: usize,
    induction_profile: &BidProfile,
    ctx: &TheoremContext,
) -> Result<ProofLocalization> {
    Ok(ProofLocalization {
        lemma1_flagged: !lemma1_trace(mech, u, v, n_max, ctx)?.consistent(),
        eqn2_violated: !eqn2_chain_check(mech, u, v, n_max, ctx)?.consistent(),
        lemma2_violated: lemma2_gap(mech, u, v, ctx)? < -ctx.one_utility_stack(),
        induction_witness: induction_witness(mech, induction_profile, ctx)?
            .witness()
            .is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> TheoremContext {
        TheoremContext::default()
    }

    #[test]
    fn lemma1_examples() {
        let c = ctx();
        let spa = lemma1_trace(&Mechanism::second_price(), 7.0, 3.0, 50, &c).unwrap();
        assert!(spa.samples.iter().all(|s| s.computed == 1.0));
        assert!(spa.consistent());

        let lot = lemma1_trace(&Mechanism::lottery(), 7.0, 3.0, 50, &c).unwrap();
        assert!(!lot.consistent());
        assert_eq!(lot.worst_slack, -0.5);
        for s in &lot.samples {
            assert_eq!(s.computed, 1.0 / s.x);
        }

        let prop = lemma1_trace(&Mechanism::proportional_myerson(), 7.0, 3.0, 50, &c).unwrap();
        assert!(!prop.consistent());
        assert!(prop.samples.last().unwrap().computed < 0.05);
        assert!(lemma1_trace(&Mechanism::lottery(), 3.0, 3.0, 5, &c).is_err());
    }

    #[test]
    fn eqn2_examples() {
        let c = ctx();
        let spa = eqn2_chain_check(&Mechanism::second_price(), 7.0, 3.0, 20, &c).unwrap();
        assert!(spa.consistent());
        for s in &spa.samples {
            assert_eq!(s.computed, 4.0);
            assert_eq!(s.reference, 4.0);
        }
        let lot = eqn2_chain_check(&Mechanism::lottery(), 7.0, 3.0, 20, &c).unwrap();
        assert!(!lot.consistent());
        // n = 2: 3.5 against 7/3 + 4·(1/2)·(2/3)
        assert!(lot.samples[0].slack < 0.0);
        assert!((lot.samples[0].reference - (7.0 / 3.0 + 4.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn sybil_share_identity_on_ties() {
        let spa = Mechanism::second_price();
        for n in 1..10 {
            assert!(sybil_share_identity_gap(&spa, 4.0, 4.0, n).unwrap() < 1e-15);
        }
        let asym = Mechanism::asymmetric_second_price();
        assert!(sybil_share_identity_gap(&asym, 3.0, 5.0, 2).unwrap() > 0.1);
    }

    #[test]
    fn lemma2_examples() {
        let c = ctx();
        let spa = Mechanism::second_price();
        assert_eq!(lemma2_gap(&spa, 7.0, 3.0, &c).unwrap(), 0.0);
        assert_eq!(lemma2_gap(&spa, 5.0, 5.0, &c).unwrap(), 0.0);
        assert_eq!(
            lemma2_gap(&Mechanism::lottery(), 7.0, 3.0, &c).unwrap(),
            -0.5
        );
        assert!(lemma2_gap(&spa, 3.0, 7.0, &c).is_err());
    }

    #[test]
    fn lemma3_examples() {
        let c = ctx();
        let grid = SearchGrid::new(0.0, 7.0, 0.5).unwrap();
        let spa = lemma3_monotone(&Mechanism::second_price(), 7.0, &grid, &c).unwrap();
        assert!(spa.consistent());
        for s in &spa.samples {
            assert_eq!(s.computed, 7.0 - s.x);
        }
        let lot = lemma3_monotone(&Mechanism::lottery(), 7.0, &grid, &c).unwrap();
        assert!(lot.consistent());
        assert!(lot.samples.iter().all(|s| s.computed == 3.5));
        let prop = lemma3_monotone(&Mechanism::proportional_myerson(), 7.0, &grid, &c).unwrap();
        assert!(prop.consistent());
    }

    #[test]
    fn averaging_examples() {
        let c = ctx();
        for mech in [
            Mechanism::second_price(),
            Mechanism::lottery(),
            Mechanism::proportional_myerson(),
        ] {
            let r = averaging_identity(&mech, 2.0, &c).unwrap();
            assert!((r.value - 1.0).abs() < 1e-5, "{} {r:?}", mech.name());
        }
        let err = averaging_identity(&Mechanism::reserve_second_price(4.0), 2.0, &c).unwrap_err();
        assert!(matches!(err, MechError::Precondition(_)));
        let err = averaging_identity(&Mechanism::asymmetric_second_price(), 2.0, &c).unwrap_err();
        assert!(matches!(err, MechError::Precondition(_)));
    }

    #[test]
    fn induction_examples() {
        let c = ctx();
        let p = BidProfile::from_bids(&[2.0, 7.0, 5.0]).unwrap();
        assert!(matches!(
            induction_witness(&Mechanism::second_price(), &p, &c).unwrap(),
            InductionOutcome::NotApplicable { .. }
        ));
        match induction_witness(&Mechanism::lottery(), &p, &c).unwrap() {
            InductionOutcome::Witness {
                construction,
                deviation,
                ..
            } => {
                assert_eq!(construction, Construction::Explicit);
                // {7,7}: 3.5 truthful; with a sybil at 5: 7·(2/3)
                assert!((deviation.gain - (14.0 / 3.0 - 3.5)).abs() < 1e-12);
                assert_eq!(deviation.sybil_bids, vec![5.0]);
            }
            other => panic!("{other:?}"),
        }
        let prop = induction_witness(&Mechanism::proportional_myerson(), &p, &c).unwrap();
        assert!(prop.witness().unwrap().gain > 0.0);
        assert!(induction_witness(
            &Mechanism::lottery(),
            &BidProfile::from_bids(&[8.0, 7.0, 5.0]).unwrap(),
            &c
        )
        .is_err());
    }
}
