use std::sync::Arc;

use super::AllocationRule;
use crate::types::{AgentId, Allocation, BidProfile};

pub const DEFAULT_EPS_TIE: f64 = 1e-12;

/// Highest bid wins the whole unit; ties share it equally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondPrice {
    pub eps_tie: f64,
}

impl Default for SecondPrice {
    fn default() -> Self {
        SecondPrice {
            eps_tie: DEFAULT_EPS_TIE,
        }
    }
}

/// Equal split among the agents whose bid is within `eps_tie` of the top
/// bid, restricted to `eligible` agents.
fn split_top(profile: &BidProfile, eps_tie: f64, eligible: impl Fn(f64) -> bool) -> Vec<f64> {
    let top = profile
        .bids()
        .filter(|&b| eligible(b))
        .fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return vec![0.0; profile.len()];
    }
    let winners: Vec<bool> = profile
        .bids()
        .map(|b| eligible(b) && b >= top - eps_tie)
        .collect();
    let k = winners.iter().filter(|&&w| w).count() as f64;
    winners
        .into_iter()
        .map(|w| if w { 1.0 / k } else { 0.0 })
        .collect()
}

/// `∫₀^upper 𝟙[z > threshold] dz`.
fn step_integral(upper: f64, threshold: f64) -> f64 {
    (upper - threshold).max(0.0)
}

impl AllocationRule for SecondPrice {
    fn describe(&self) -> String {
        "second-price auction, symmetric tie-breaking".into()
    }

    fn allocate(&self, profile: &BidProfile) -> Allocation {
        Allocation::aligned(profile, split_top(profile, self.eps_tie, |_| true))
    }

    fn exact_integral(&self, profile: &BidProfile, agent: AgentId, upper: f64) -> Option<f64> {
        let rival = profile.max_bid_excluding(agent).unwrap_or(0.0);
        Some(step_integral(upper, rival))
    }
}

/// Second-price auction among bids at or above a fixed reserve; nobody is
/// served when every bid is below it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReserveSecondPrice {
    pub reserve: f64,
    pub eps_tie: f64,
}

impl ReserveSecondPrice {
    pub fn new(reserve: f64) -> Self {
        ReserveSecondPrice {
            reserve,
            eps_tie: DEFAULT_EPS_TIE,
        }
    }
}

impl AllocationRule for ReserveSecondPrice {
    fn describe(&self) -> String {
        format!("second-price auction with reserve {}", self.reserve)
    }

    fn allocate(&self, profile: &BidProfile) -> Allocation {
        let r = self.reserve - self.eps_tie;
        Allocation::aligned(profile, split_top(profile, self.eps_tie, |b| b >= r))
    }

    fn exact_integral(&self, profile: &BidProfile, agent: AgentId, upper: f64) -> Option<f64> {
        let threshold = profile
            .max_bid_excluding(agent)
            .map_or(self.reserve, |m| m.max(self.reserve));
        Some(step_integral(upper, threshold))
    }
}

/// Second-price auction where ties go entirely to the lowest agent id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymmetricSecondPrice {
    pub eps_tie: f64,
}

impl Default for AsymmetricSecondPrice {
    fn default() -> Self {
        AsymmetricSecondPrice {
            eps_tie: DEFAULT_EPS_TIE,
        }
    }
}

impl AllocationRule for AsymmetricSecondPrice {
    fn describe(&self) -> String {
        "second-price auction, ties to lowest agent id".into()
    }

    fn allocate(&self, profile: &BidProfile) -> Allocation {
        let top = profile.bids().fold(f64::NEG_INFINITY, f64::max);
        // entries are in ascending id order, so the first top bidder wins
        let winner = profile
            .bids()
            .position(|b| b >= top - self.eps_tie)
            .expect("profile is nonempty");
        let shares = (0..profile.len())
            .map(|k| if k == winner { 1.0 } else { 0.0 })
            .collect();
        Allocation::aligned(profile, shares)
    }

    fn exact_integral(&self, profile: &BidProfile, agent: AgentId, upper: f64) -> Option<f64> {
        let rival = profile.max_bid_excluding(agent).unwrap_or(0.0);
        Some(step_integral(upper, rival))
    }
}

/// Every agent gets `1/n` regardless of bids.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Lottery;

impl AllocationRule for Lottery {
    fn describe(&self) -> String {
        "uniform lottery".into()
    }

    fn allocate(&self, profile: &BidProfile) -> Allocation {
        let n = profile.len() as f64;
        Allocation::aligned(profile, vec![1.0 / n; profile.len()])
    }

    fn exact_integral(&self, profile: &BidProfile, _agent: AgentId, upper: f64) -> Option<f64> {
        Some(upper / profile.len() as f64)
    }
}

/// Shares proportional to bids; the all-zero profile splits uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Proportional;

impl AllocationRule for Proportional {
    fn describe(&self) -> String {
        "proportional shares".into()
    }

    fn allocate(&self, profile: &BidProfile) -> Allocation {
        let total: f64 = profile.bids().sum();
        let shares = if total > 0.0 {
            profile.bids().map(|b| b / total).collect()
        } else {
            vec![1.0 / profile.len() as f64; profile.len()]
        };
        Allocation::aligned(profile, shares)
    }

    fn exact_integral(&self, profile: &BidProfile, agent: AgentId, upper: f64) -> Option<f64> {
        let rest: f64 = profile
            .entries()
            .iter()
            .filter(|&&(a, _)| a != agent)
            .map(|&(_, b)| b)
            .sum();
        // ∫₀^b z/(z+S) dz = b − S·ln(1 + b/S); with S = 0 the share is 1 for z > 0
        if rest > 0.0 {
            Some(upper - rest * (upper / rest).ln_1p())
        } else {
            Some(upper)
        }
    }
}

/// Hides the wrapped rule's closed-form integral.
#[derive(Clone)]
pub struct QuadratureOnly {
    inner: Arc<dyn AllocationRule>,
}

impl QuadratureOnly {
    pub fn new(inner: Arc<dyn AllocationRule>) -> Self {
        QuadratureOnly { inner }
    }
}

impl AllocationRule for QuadratureOnly {
    fn describe(&self) -> String {
        format!("{} (quadrature only)", self.inner.describe())
    }

    fn allocate(&self, profile: &BidProfile) -> Allocation {
        self.inner.allocate(profile)
    }
}

type IntegralFn = Box<dyn Fn(&BidProfile, AgentId, f64) -> f64 + Send + Sync>;

/// Allocation rule backed by a closure, optionally with a closed-form
/// integral. This is the hook for registering custom rules.
pub struct FnRule<F> {
    label: String,
    f: F,
    integral: Option<IntegralFn>,
}

impl<F> FnRule<F>
where
    F: Fn(&BidProfile) -> Allocation + Send + Sync,
{
    pub fn new(label: impl Into<String>, f: F) -> Self {
        FnRule {
            label: label.into(),
            f,
            integral: None,
        }
    }

    pub fn with_integral(
        mut self,
        integral: impl Fn(&BidProfile, AgentId, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.integral = Some(Box::new(integral));
        self
    }
}

impl<F> AllocationRule for FnRule<F>
where
    F: Fn(&BidProfile) -> Allocation + Send + Sync,
{
    fn describe(&self) -> String {
        self.label.clone()
    }

    fn allocate(&self, profile: &BidProfile) -> Allocation {
        (self.f)(profile)
    }

    fn exact_integral(&self, profile: &BidProfile, agent: AgentId, upper: f64) -> Option<f64> {
        self.integral.as_ref().map(|g| g(profile, agent, upper))
    }
}
