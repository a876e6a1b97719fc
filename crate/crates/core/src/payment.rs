//! Payment engine: Myerson payments `p_i = b_i·x_i(b) − ∫₀^{b_i} x_i(z, b₋ᵢ) dz`
//! and the truthful utility integral.
//!
//! When a rule supplies a closed-form integral it is used directly.
//! Otherwise the integral of the (monotone) share curve is enclosed between
//! its lower and upper Riemann sums. Subintervals are bisected, widest
//! bracket first, until the enclosure is narrower than `tol_quad`. Step
//! functions therefore cost a few dozen evaluations per jump.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{MechError, Result};
use crate::mechanism::{Mechanism, PaymentRule};
use crate::types::{utility, AgentId, BidProfile, Outcome, PaymentVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Cap on the number of subintervals held at once.
    pub max_subdivisions: usize,
    /// Target width of the enclosing bracket.
    pub tol_quad: f64,
    /// Slack allowed before a decrease of the integrand counts as a
    /// monotonicity violation.
    pub monotone_slack: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            max_subdivisions: 1 << 20,
            tol_quad: 1e-6,
            monotone_slack: 1e-9,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_subdivisions < 2 {
            return Err(MechError::InvalidParameter {
                name: "max_subdivisions",
                reason: format!("must be at least 2, got {}", self.max_subdivisions),
            });
        }
        if !(self.tol_quad.is_finite() && self.tol_quad > 0.0) {
            return Err(MechError::InvalidParameter {
                name: "tol_quad",
                reason: format!("must be strictly positive, got {}", self.tol_quad),
            });
        }
        Ok(())
    }
}

/// A value known to lie within `width / 2` of `value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracketed {
    pub value: f64,
    pub width: f64,
}

impl Bracketed {
    pub fn exact(value: f64) -> Self {
        Bracketed { value, width: 0.0 }
    }

    pub fn lower(&self) -> f64 {
        self.value - self.width / 2.0
    }

    pub fn upper(&self) -> f64 {
        self.value + self.width / 2.0
    }
}

struct Piece {
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
}

impl Piece {
    fn width(&self) -> f64 {
        (self.b - self.a) * (self.fb - self.fa)
    }
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.width()
            .total_cmp(&other.width())
            // older (leftmost) pieces first among equals keeps the run deterministic
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Integral of a non-decreasing `f` over `[0, upper]`, enclosed by Riemann
/// sums. A decrease larger than `monotone_slack` is reported as an error
/// naming the offending pair of points.
pub fn monotone_integral<F>(f: F, upper: f64, cfg: &QuadratureConfig) -> Result<Bracketed, Decrease>
where
    F: Fn(f64) -> f64,
{
    if upper <= 0.0 {
        return Ok(Bracketed::exact(0.0));
    }
    let slack = cfg.monotone_slack;
    let check = |a: f64, fa: f64, b: f64, fb: f64| {
        if fa > fb + slack {
            Err(Decrease::Violation {
                low: a,
                high: b,
                low_value: fa,
                high_value: fb,
            })
        } else {
            Ok(())
        }
    };

    let (fa, fb) = (f(0.0), f(upper));
    check(0.0, fa, upper, fb)?;
    let mut heap = BinaryHeap::new();
    let first = Piece {
        a: 0.0,
        b: upper,
        fa,
        fb,
    };
    let mut total = first.width();
    heap.push(first);

    loop {
        if total <= cfg.tol_quad {
            // the running total drifts; confirm on the exact sum
            let exact: f64 = heap.iter().map(Piece::width).sum();
            if exact <= cfg.tol_quad {
                break;
            }
            total = exact;
            continue;
        }
        if heap.len() >= cfg.max_subdivisions {
            return Err(Decrease::Budget { width: total });
        }
        let piece = heap.pop().expect("heap is never empty");
        let m = 0.5 * (piece.a + piece.b);
        if m <= piece.a || m >= piece.b {
            // interval cannot be split further in floating point
            return Err(Decrease::Budget { width: total });
        }
        let fm = f(m);
        check(piece.a, piece.fa, m, fm)?;
        check(m, fm, piece.b, piece.fb)?;
        let left = Piece {
            a: piece.a,
            b: m,
            fa: piece.fa,
            fb: fm,
        };
        let right = Piece {
            a: m,
            b: piece.b,
            fa: fm,
            fb: piece.fb,
        };
        total += left.width() + right.width() - piece.width();
        heap.push(left);
        heap.push(right);
    }

    let (lower, upper_sum) = heap.iter().fold((0.0, 0.0), |(lo, hi), p| {
        (lo + (p.b - p.a) * p.fa, hi + (p.b - p.a) * p.fb)
    });
    Ok(Bracketed {
        value: 0.5 * (lower + upper_sum),
        width: upper_sum - lower,
    })
}

/// Failure modes of [`monotone_integral`], before they are tied to an agent.
#[derive(Debug, Clone, PartialEq)]
pub enum Decrease {
    Violation {
        low: f64,
        high: f64,
        low_value: f64,
        high_value: f64,
    },
    Budget {
        width: f64,
    },
}

impl Decrease {
    fn into_error(self, agent: AgentId, cfg: &QuadratureConfig) -> MechError {
        match self {
            Decrease::Violation {
                low,
                high,
                low_value,
                high_value,
            } => MechError::MonotonicityViolation {
                agent,
                low,
                high,
                low_share: low_value,
                high_share: high_value,
            },
            Decrease::Budget { width } => MechError::QuadratureBudgetExhausted {
                max_subdivisions: cfg.max_subdivisions,
                width,
                target: cfg.tol_quad,
            },
        }
    }
}

/// `∫₀^upper x_agent(z, b₋agent) dz`, other bids held at their values in
/// `profile`.
pub fn share_integral(
    mech: &Mechanism,
    profile: &BidProfile,
    agent: AgentId,
    upper: f64,
    quad: &QuadratureConfig,
) -> Result<Bracketed> {
    if !profile.contains(agent) {
        return Err(MechError::UnknownAgent(agent));
    }
    if upper <= 0.0 {
        return Ok(Bracketed::exact(0.0));
    }
    if let Some(v) = mech.exact_integral(profile, agent, upper) {
        return Ok(Bracketed::exact(v));
    }
    let curve = |z: f64| {
        let moved = profile
            .with_bid(agent, z)
            .expect("quadrature nodes are finite and nonnegative");
        mech.share(&moved, agent)
    };
    monotone_integral(curve, upper, quad).map_err(|e| e.into_error(agent, quad))
}

/// Myerson payment of `agent` at `profile`. A zero bid pays exactly 0.
pub fn myerson_payment(
    mech: &Mechanism,
    profile: &BidProfile,
    agent: AgentId,
    quad: &QuadratureConfig,
) -> Result<Bracketed> {
    let bid = profile.bid(agent).ok_or(MechError::UnknownAgent(agent))?;
    if bid == 0.0 {
        return Ok(Bracketed::exact(0.0));
    }
    let share = mech.share(profile, agent);
    let integral = share_integral(mech, profile, agent, bid, quad)?;
    Ok(Bracketed {
        value: bid * share - integral.value,
        width: integral.width,
    })
}

/// Utility of a truthful bidder under Myerson payments,
/// `U_i(v) = ∫₀^{v_i} x_i(z, v₋ᵢ) dz`.
///
/// This is the integral identity only; for mechanisms with explicit
/// payments use [`utility_of`].
pub fn truthful_utility(
    mech: &Mechanism,
    profile: &BidProfile,
    agent: AgentId,
    quad: &QuadratureConfig,
) -> Result<Bracketed> {
    let bid = profile.bid(agent).ok_or(MechError::UnknownAgent(agent))?;
    share_integral(mech, profile, agent, bid, quad)
}

/// Payment of `agent` under the mechanism's own payment rule.
pub fn payment_of(
    mech: &Mechanism,
    profile: &BidProfile,
    agent: AgentId,
    quad: &QuadratureConfig,
) -> Result<Bracketed> {
    match mech.payment_rule() {
        PaymentRule::Myerson => myerson_payment(mech, profile, agent, quad),
        PaymentRule::Explicit(rule) => rule
            .payments(profile)
            .payment(agent)
            .map(Bracketed::exact)
            .ok_or(MechError::UnknownAgent(agent)),
    }
}

/// Utility of `agent`, whose true value is `value`, when the reported
/// bids are `profile`.
pub fn utility_of(
    mech: &Mechanism,
    profile: &BidProfile,
    agent: AgentId,
    value: f64,
    quad: &QuadratureConfig,
) -> Result<Bracketed> {
    let share = mech.share(profile, agent);
    let pay = payment_of(mech, profile, agent, quad)?;
    Ok(Bracketed {
        value: utility(value, share, pay.value),
        width: pay.width,
    })
}

/// Combined utility of a deviator with true value `value` who controls all
/// of `accounts`: `value · Σ x − Σ p`.
pub fn coalition_utility(
    mech: &Mechanism,
    profile: &BidProfile,
    accounts: &[AgentId],
    value: f64,
    quad: &QuadratureConfig,
) -> Result<Bracketed> {
    let alloc = mech.allocate(profile);
    let mut share = 0.0;
    let mut paid = 0.0;
    let mut width = 0.0;
    for &a in accounts {
        share += alloc.share(a).ok_or(MechError::UnknownAgent(a))?;
        let p = payment_of(mech, profile, a, quad)?;
        paid += p.value;
        width += p.width;
    }
    Ok(Bracketed {
        value: utility(value, share, paid),
        width,
    })
}

/// Payments of every agent of `profile`.
pub fn payments(
    mech: &Mechanism,
    profile: &BidProfile,
    quad: &QuadratureConfig,
) -> Result<PaymentVector> {
    if let Some(explicit) = mech.explicit_payments(profile) {
        return Ok(explicit);
    }
    let values = profile
        .agents()
        .map(|a| myerson_payment(mech, profile, a, quad).map(|b| b.value))
        .collect::<Result<Vec<_>>>()?;
    Ok(PaymentVector::aligned(profile, values))
}

/// Full outcome when every agent reports truthfully.
pub fn truthful_outcome(
    mech: &Mechanism,
    profile: &BidProfile,
    quad: &QuadratureConfig,
) -> Result<Outcome> {
    let alloc = mech.allocate(profile);
    let pay = payments(mech, profile, quad)?;
    Ok(Outcome::new(profile, alloc, pay))
}
