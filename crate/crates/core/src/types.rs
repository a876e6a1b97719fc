//! Domain values shared by every module: agents, bid profiles, allocations,
//! payments and the tolerances used to compare them.
//!
//! All of these are plain immutable values. Entries are always kept in
//! canonical order (ascending agent id) so that reports are reproducible.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{MechError, Result};

/// Identifier of an agent. Ids are positive and unique within a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for AgentId {
    fn from(id: u64) -> Self {
        AgentId(id)
    }
}

/// A finite set of agents, each with one nonnegative bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(AgentId, f64)>", into = "Vec<(AgentId, f64)>")]
pub struct BidProfile {
    entries: Vec<(AgentId, f64)>,
}

impl BidProfile {
    pub fn new(mut entries: Vec<(AgentId, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(MechError::EmptyProfile);
        }
        for &(agent, bid) in &entries {
            check_bid(agent, bid)?;
        }
        entries.sort_by_key(|&(agent, _)| agent);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(MechError::DuplicateAgent(w[0].0));
        }
        Ok(BidProfile { entries })
    }

    /// Agents `1..=bids.len()` bidding `bids` in order.
    pub fn from_bids(bids: &[f64]) -> Result<Self> {
        Self::new(
            bids.iter()
                .enumerate()
                .map(|(k, &b)| (AgentId(k as u64 + 1), b))
                .collect(),
        )
    }

    /// The `(u, v, v, ..., v)` profile with `n` agents in total: agent 1
    /// bids `u`, agents `2..=n` bid `v`.
    pub fn replicate(u: f64, v: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(MechError::TooFewAgents(n));
        }
        let mut bids = vec![v; n];
        bids[0] = u;
        Self::from_bids(&bids)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(AgentId, f64)] {
        &self.entries
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.entries.iter().map(|&(a, _)| a)
    }

    pub fn bids(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|&(_, b)| b)
    }

    pub fn position(&self, agent: AgentId) -> Option<usize> {
        self.entries.binary_search_by_key(&agent, |&(a, _)| a).ok()
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        self.position(agent).is_some()
    }

    pub fn bid(&self, agent: AgentId) -> Option<f64> {
        self.position(agent).map(|k| self.entries[k].1)
    }

    pub fn max_id(&self) -> AgentId {
        self.entries.last().map(|&(a, _)| a).unwrap_or(AgentId(0))
    }

    /// Smallest id not yet used that is larger than every id in the profile.
    pub fn fresh_id(&self) -> AgentId {
        AgentId(self.max_id().0 + 1)
    }

    /// Highest bid among all agents except `agent`, if any remain.
    pub fn max_bid_excluding(&self, agent: AgentId) -> Option<f64> {
        self.entries
            .iter()
            .filter(|&&(a, _)| a != agent)
            .map(|&(_, b)| b)
            .reduce(f64::max)
    }

    /// Same agents, with `agent` bidding `bid` instead.
    pub fn with_bid(&self, agent: AgentId, bid: f64) -> Result<Self> {
        check_bid(agent, bid)?;
        let k = self.position(agent).ok_or(MechError::UnknownAgent(agent))?;
        let mut entries = self.entries.clone();
        entries[k].1 = bid;
        Ok(BidProfile { entries })
    }

    /// The profile over `N ∪ {new_agent}`; `self` is left untouched.
    pub fn extend(&self, new_agent: AgentId, bid: f64) -> Result<Self> {
        if self.contains(new_agent) {
            return Err(MechError::DuplicateAgent(new_agent));
        }
        check_bid(new_agent, bid)?;
        let mut entries = self.entries.clone();
        let at = entries.partition_point(|&(a, _)| a < new_agent);
        entries.insert(at, (new_agent, bid));
        Ok(BidProfile { entries })
    }

    pub fn without(&self, agent: AgentId) -> Result<Self> {
        let k = self.position(agent).ok_or(MechError::UnknownAgent(agent))?;
        let mut entries = self.entries.clone();
        entries.remove(k);
        Self::new(entries)
    }

    /// Relabel agents: agent `a` of `self` becomes agent `perm.apply(a)`,
    /// carrying its bid along.
    pub fn relabel(&self, perm: &Permutation) -> Result<Self> {
        Self::new(
            self.entries
                .iter()
                .map(|&(a, b)| (perm.apply(a), b))
                .collect(),
        )
    }
}

impl TryFrom<Vec<(AgentId, f64)>> for BidProfile {
    type Error = MechError;

    fn try_from(entries: Vec<(AgentId, f64)>) -> Result<Self> {
        BidProfile::new(entries)
    }
}

impl From<BidProfile> for Vec<(AgentId, f64)> {
    fn from(p: BidProfile) -> Self {
        p.entries
    }
}

impl fmt::Display for BidProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, (a, b)) in self.entries.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}:{b}")?;
        }
        write!(f, "}}")
    }
}

fn check_bid(agent: AgentId, bid: f64) -> Result<()> {
    if bid.is_finite() && bid >= 0.0 {
        Ok(())
    } else {
        Err(MechError::InvalidBid { agent, bid })
    }
}

/// A bijection of a profile's agent set onto itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    mapping: Vec<(AgentId, AgentId)>,
}

impl Permutation {
    pub fn new(mut mapping: Vec<(AgentId, AgentId)>) -> Result<Self> {
        mapping.sort();
        let mut targets: Vec<AgentId> = mapping.iter().map(|&(_, t)| t).collect();
        targets.sort();
        let sources: Vec<AgentId> = mapping.iter().map(|&(s, _)| s).collect();
        if sources.windows(2).any(|w| w[0] == w[1]) || sources != targets {
            return Err(MechError::Precondition(
                "permutation must be a bijection of the agent set".into(),
            ));
        }
        Ok(Permutation { mapping })
    }

    /// Maps the k-th agent of `agents` (sorted) to `agents[order[k]]`.
    pub fn from_order(agents: &[AgentId], order: &[usize]) -> Result<Self> {
        Self::new(
            agents
                .iter()
                .zip(order)
                .map(|(&a, &k)| (a, agents[k]))
                .collect(),
        )
    }

    pub fn apply(&self, agent: AgentId) -> AgentId {
        self.mapping
            .binary_search_by_key(&agent, |&(s, _)| s)
            .map(|k| self.mapping[k].1)
            .unwrap_or(agent)
    }

    pub fn mapping(&self) -> &[(AgentId, AgentId)] {
        &self.mapping
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().all(|&(s, t)| s == t)
    }
}

/// Shares of the unit, one per agent of the profile it was computed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    shares: Vec<(AgentId, f64)>,
}

impl Allocation {
    /// Builds an allocation aligned with `profile`'s canonical order.
    pub fn aligned(profile: &BidProfile, shares: Vec<f64>) -> Self {
        assert_eq!(profile.len(), shares.len(), "one share per agent");
        Allocation {
            shares: profile.agents().zip(shares).collect(),
        }
    }

    /// Unchecked constructor; use [`validate_allocation`] before trusting it.
    pub fn from_pairs(mut shares: Vec<(AgentId, f64)>) -> Self {
        shares.sort_by_key(|&(a, _)| a);
        Allocation { shares }
    }

    pub fn share(&self, agent: AgentId) -> Option<f64> {
        self.shares
            .binary_search_by_key(&agent, |&(a, _)| a)
            .ok()
            .map(|k| self.shares[k].1)
    }

    pub fn shares(&self) -> &[(AgentId, f64)] {
        &self.shares
    }

    pub fn total(&self) -> f64 {
        self.shares.iter().map(|&(_, x)| x).sum()
    }
}

/// Payments, one per agent of the profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentVector {
    payments: Vec<(AgentId, f64)>,
}

impl PaymentVector {
    pub fn aligned(profile: &BidProfile, payments: Vec<f64>) -> Self {
        assert_eq!(profile.len(), payments.len(), "one payment per agent");
        PaymentVector {
            payments: profile.agents().zip(payments).collect(),
        }
    }

    pub fn payment(&self, agent: AgentId) -> Option<f64> {
        self.payments
            .binary_search_by_key(&agent, |&(a, _)| a)
            .ok()
            .map(|k| self.payments[k].1)
    }

    pub fn payments(&self) -> &[(AgentId, f64)] {
        &self.payments
    }
}

/// Allocation, payments and the resulting linear utilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub allocation: Allocation,
    pub payments: PaymentVector,
    pub utilities: Vec<(AgentId, f64)>,
}

impl Outcome {
    /// Utilities are computed against `values` (true values, aligned with
    /// the allocation's agents).
    pub fn new(values: &BidProfile, allocation: Allocation, payments: PaymentVector) -> Self {
        let utilities = values
            .entries()
            .iter()
            .map(|&(a, v)| {
                let x = allocation.share(a).unwrap_or(0.0);
                let p = payments.payment(a).unwrap_or(0.0);
                (a, utility(v, x, p))
            })
            .collect();
        Outcome {
            allocation,
            payments,
            utilities,
        }
    }

    pub fn utility(&self, agent: AgentId) -> Option<f64> {
        self.utilities
            .binary_search_by_key(&agent, |&(a, _)| a)
            .ok()
            .map(|k| self.utilities[k].1)
    }
}

/// Linear utility `value · share − payment`.
#[inline]
pub fn utility(value: f64, share: f64, payment: f64) -> f64 {
    value * share - payment
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Slack on `Σ shares ≤ 1`.
    pub tol_alloc: f64,
    /// Equality comparisons.
    pub tol_num: f64,
    /// Error budget of a single quadrature evaluation.
    pub tol_quad: f64,
    /// Two bids closer than this are a tie.
    pub eps_tie: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            tol_alloc: 1e-9,
            tol_num: 1e-9,
            tol_quad: 1e-6,
            eps_tie: 1e-12,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tol_alloc", self.tol_alloc),
            ("tol_num", self.tol_num),
            ("tol_quad", self.tol_quad),
            ("eps_tie", self.eps_tie),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(MechError::InvalidParameter {
                    name,
                    reason: format!("must be strictly positive, got {value}"),
                });
            }
        }
        Ok(())
    }
}

/// Outcome of [`validate_allocation`].
#[derive(Debug, Clone, PartialEq)]
pub enum AllocationVerdict {
    Ok,
    Violation(AllocationViolation),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AllocationViolation {
    KeyMismatch {
        missing: Vec<AgentId>,
        unexpected: Vec<AgentId>,
    },
    NegativeShare {
        agent: AgentId,
        share: f64,
    },
    NotFinite {
        agent: AgentId,
    },
    SumExceedsOne {
        sum: f64,
        excess: f64,
    },
}

impl fmt::Display for AllocationViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::KeyMismatch {
                missing,
                unexpected,
            } => write!(
                f,
                "agent sets differ: missing {missing:?}, unexpected {unexpected:?}"
            ),
            Self::NegativeShare { agent, share } => {
                write!(f, "negative share {share} for agent {agent}")
            }
            Self::NotFinite { agent } => write!(f, "share of agent {agent} is not finite"),
            Self::SumExceedsOne { sum, excess } => {
                write!(f, "sum {sum} > 1 (excess {excess:e})")
            }
        }
    }
}

impl AllocationVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, AllocationVerdict::Ok)
    }
}

/// Checks that `alloc` lies in the simplex Δ(N) of `profile`'s agent set.
pub fn validate_allocation(
    alloc: &Allocation,
    profile: &BidProfile,
    tol: &ToleranceConfig,
) -> AllocationVerdict {
    let keys: Vec<AgentId> = alloc.shares().iter().map(|&(a, _)| a).collect();
    let expected: Vec<AgentId> = profile.agents().collect();
    if keys != expected {
        let missing = expected
            .iter()
            .filter(|a| !keys.contains(a))
            .copied()
            .collect();
        let unexpected = keys
            .iter()
            .filter(|a| !expected.contains(a))
            .copied()
            .collect();
        return AllocationVerdict::Violation(AllocationViolation::KeyMismatch {
            missing,
            unexpected,
        });
    }
    for &(agent, share) in alloc.shares() {
        if !share.is_finite() {
            return AllocationVerdict::Violation(AllocationViolation::NotFinite { agent });
        }
        if share < -tol.tol_num {
            return AllocationVerdict::Violation(AllocationViolation::NegativeShare {
                agent,
                share,
            });
        }
    }
    let sum = alloc.total();
    if sum > 1.0 + tol.tol_alloc {
        return AllocationVerdict::Violation(AllocationViolation::SumExceedsOne {
            sum,
            excess: sum - 1.0,
        });
    }
    AllocationVerdict::Ok
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(pairs: &[(u64, f64)]) -> BidProfile {
        BidProfile::new(pairs.iter().map(|&(a, b)| (AgentId(a), b)).collect()).unwrap()
    }

    #[test]
    fn utility_examples() {
        assert_eq!(utility(5.0, 1.0, 3.0), 2.0);
        assert_eq!(utility(7.0, 0.0, 0.0), 0.0);
        assert!((utility(5.0, 1.0 / 3.0, 0.0) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn allocation_validation() {
        let tol = ToleranceConfig::default();
        let prof = p(&[(1, 1.0), (2, 2.0)]);
        let ok = Allocation::aligned(&prof, vec![0.5, 0.5]);
        assert!(validate_allocation(&ok, &prof, &tol).is_ok());

        let over = Allocation::aligned(&prof, vec![0.7, 0.7]);
        match validate_allocation(&over, &prof, &tol) {
            AllocationVerdict::Violation(AllocationViolation::SumExceedsOne { sum, .. }) => {
                assert!((sum - 1.4).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }

        let neg = Allocation::aligned(&prof, vec![-0.1, 1.1]);
        assert!(matches!(
            validate_allocation(&neg, &prof, &tol),
            AllocationVerdict::Violation(AllocationViolation::NegativeShare {
                agent: AgentId(1),
                ..
            })
        ));

        let wrong_keys = Allocation::from_pairs(vec![(AgentId(1), 0.5), (AgentId(3), 0.5)]);
        assert!(matches!(
            validate_allocation(&wrong_keys, &prof, &tol),
            AllocationVerdict::Violation(AllocationViolation::KeyMismatch { .. })
        ));
    }

    #[test]
    fn extend_profile_examples() {
        let base = p(&[(1, 5.0)]);
        let ext = base.extend(AgentId(2), 3.0).unwrap();
        assert_eq!(ext, p(&[(1, 5.0), (2, 3.0)]));
        assert_eq!(base, p(&[(1, 5.0)]));

        let ext2 = ext.extend(AgentId(3), 0.0).unwrap();
        assert_eq!(ext2, p(&[(1, 5.0), (2, 3.0), (3, 0.0)]));

        assert_eq!(
            base.extend(AgentId(1), 3.0),
            Err(MechError::DuplicateAgent(AgentId(1)))
        );
    }

    #[test]
    fn replicate_profile_examples() {
        assert_eq!(
            BidProfile::replicate(7.0, 3.0, 4).unwrap(),
            p(&[(1, 7.0), (2, 3.0), (3, 3.0), (4, 3.0)])
        );
        assert_eq!(
            BidProfile::replicate(5.0, 5.0, 2).unwrap(),
            p(&[(1, 5.0), (2, 5.0)])
        );
        assert_eq!(
            BidProfile::replicate(1.0, 0.0, 3).unwrap(),
            p(&[(1, 1.0), (2, 0.0), (3, 0.0)])
        );
        assert_eq!(
            BidProfile::replicate(1.0, 0.0, 1),
            Err(MechError::TooFewAgents(1))
        );
    }

    #[test]
    fn profile_rejects_bad_input() {
        assert_eq!(BidProfile::new(vec![]), Err(MechError::EmptyProfile));
        assert!(matches!(
            BidProfile::from_bids(&[1.0, -0.5]),
            Err(MechError::InvalidBid { .. })
        ));
        assert!(matches!(
            BidProfile::from_bids(&[f64::NAN]),
            Err(MechError::InvalidBid { .. })
        ));
        assert_eq!(
            BidProfile::new(vec![(AgentId(2), 1.0), (AgentId(2), 3.0)]),
            Err(MechError::DuplicateAgent(AgentId(2)))
        );
    }

    #[test]
    fn canonical_order_and_relabel() {
        let prof = p(&[(7, 1.0), (2, 4.0), (5, 2.0)]);
        let ids: Vec<u64> = prof.agents().map(|a| a.0).collect();
        assert_eq!(ids, vec![2, 5, 7]);
        assert_eq!(prof.fresh_id(), AgentId(8));

        let perm = Permutation::new(vec![
            (AgentId(2), AgentId(5)),
            (AgentId(5), AgentId(7)),
            (AgentId(7), AgentId(2)),
        ])
        .unwrap();
        let moved = prof.relabel(&perm).unwrap();
        assert_eq!(moved.bid(AgentId(5)), Some(4.0));
        assert_eq!(moved.bid(AgentId(7)), Some(2.0));
        assert_eq!(moved.bid(AgentId(2)), Some(1.0));

        assert!(
            Permutation::new(vec![(AgentId(1), AgentId(2)), (AgentId(2), AgentId(2))]).is_err()
        );
    }

    #[test]
    fn profile_conversion_round_trip() {
        let prof = p(&[(2, 3.0), (1, 5.0)]);
        let raw: Vec<(AgentId, f64)> = prof.clone().into();
        assert_eq!(raw, vec![(AgentId(1), 5.0), (AgentId(2), 3.0)]);
        assert_eq!(BidProfile::try_from(raw).unwrap(), prof);
        assert!(BidProfile::try_from(vec![(AgentId(1), 1.0), (AgentId(1), 2.0)]).is_err());
    }

    #[test]
    fn outcome_utilities() {
        let prof = p(&[(1, 5.0), (2, 3.0)]);
        let alloc = Allocation::aligned(&prof, vec![1.0, 0.0]);
        let pay = PaymentVector::aligned(&prof, vec![3.0, 0.0]);
        let out = Outcome::new(&prof, alloc, pay);
        assert_eq!(out.utility(AgentId(1)), Some(2.0));
        assert_eq!(out.utility(AgentId(2)), Some(0.0));
    }

    #[test]
    fn tolerance_validation() {
        assert!(ToleranceConfig::default().validate().is_ok());
        let bad = ToleranceConfig {
            tol_quad: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
