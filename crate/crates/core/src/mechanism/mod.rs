//! Mechanisms: an allocation rule defined for every finite agent set, paired
//! with a payment rule.
//!
//! Allocation rules are trait objects so that the built-ins and any
//! user-registered rule are interchangeable everywhere (checkers, attacks,
//! proof traces). They are looked up by name through [`Registry`].

mod registry;
mod rules;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::types::{AgentId, Allocation, BidProfile, PaymentVector};

pub use registry::{Factory, MechanismParams, Registry, RegistryEntry};
pub use rules::{
    AsymmetricSecondPrice, FnRule, Lottery, Proportional, QuadratureOnly, ReserveSecondPrice,
    SecondPrice,
};

/// An allocation rule `x^N`, evaluable for any finite agent set.
pub trait AllocationRule: Send + Sync {
    /// Short human-readable description, used in reports.
    fn describe(&self) -> String;

    fn allocate(&self, profile: &BidProfile) -> Allocation;

    /// Closed form of `∫₀^upper x_agent(z, v₋agent) dz`, when the rule has
    /// one. `None` makes the payment engine fall back to quadrature.
    fn exact_integral(&self, _profile: &BidProfile, _agent: AgentId, _upper: f64) -> Option<f64> {
        None
    }
}

/// An explicit payment rule `p^N`.
pub trait PaymentFn: Send + Sync {
    fn describe(&self) -> String;

    fn payments(&self, profile: &BidProfile) -> PaymentVector;
}

/// `p_i(u) = c · u_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerUnitBid {
    pub c: f64,
}

impl PaymentFn for PerUnitBid {
    fn describe(&self) -> String {
        format!("p_i = {} * bid_i", self.c)
    }

    fn payments(&self, profile: &BidProfile) -> PaymentVector {
        PaymentVector::aligned(profile, profile.bids().map(|b| self.c * b).collect())
    }
}

/// Explicit payments given by a closure.
pub struct FnPayment<F> {
    label: String,
    f: F,
}

impl<F> FnPayment<F>
where
    F: Fn(&BidProfile) -> PaymentVector + Send + Sync,
{
    pub fn new(label: impl Into<String>, f: F) -> Self {
        FnPayment {
            label: label.into(),
            f,
        }
    }
}

impl<F> PaymentFn for FnPayment<F>
where
    F: Fn(&BidProfile) -> PaymentVector + Send + Sync,
{
    fn describe(&self) -> String {
        self.label.clone()
    }

    fn payments(&self, profile: &BidProfile) -> PaymentVector {
        (self.f)(profile)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentMode {
    Myerson,
    Explicit,
}

impl fmt::Display for PaymentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PaymentMode::Myerson => f.write_str("myerson"),
            PaymentMode::Explicit => f.write_str("explicit"),
        }
    }
}

#[derive(Clone)]
pub enum PaymentRule {
    /// Payments that make the allocation rule truthful, normalised so that a
    /// zero bid pays nothing.
    Myerson,
    Explicit(Arc<dyn PaymentFn>),
}

/// Allocation rule plus payment rule.
#[derive(Clone)]
pub struct Mechanism {
    name: String,
    rule: Arc<dyn AllocationRule>,
    payment: PaymentRule,
}

impl Mechanism {
    pub fn myerson(name: impl Into<String>, rule: impl AllocationRule + 'static) -> Self {
        Mechanism {
            name: name.into(),
            rule: Arc::new(rule),
            payment: PaymentRule::Myerson,
        }
    }

    pub fn explicit(
        name: impl Into<String>,
        rule: impl AllocationRule + 'static,
        payment: impl PaymentFn + 'static,
    ) -> Self {
        Mechanism {
            name: name.into(),
            rule: Arc::new(rule),
            payment: PaymentRule::Explicit(Arc::new(payment)),
        }
    }

    pub fn from_parts(
        name: impl Into<String>,
        rule: Arc<dyn AllocationRule>,
        payment: PaymentRule,
    ) -> Self {
        Mechanism {
            name: name.into(),
            rule,
            payment,
        }
    }

    pub fn second_price() -> Self {
        Self::myerson("spa", SecondPrice::default())
    }

    pub fn reserve_second_price(reserve: f64) -> Self {
        Self::myerson("spa-reserve", ReserveSecondPrice::new(reserve))
    }

    pub fn asymmetric_second_price() -> Self {
        Self::myerson("asymmetric-spa", AsymmetricSecondPrice::default())
    }

    /// Equal shares, no payments (Myerson payments of a constant rule are 0).
    pub fn lottery() -> Self {
        Self::myerson("lottery", Lottery)
    }

    /// Proportional shares with `p_i = c · u_i`.
    pub fn proportional(c: f64) -> Self {
        Self::explicit("proportional", Proportional, PerUnitBid { c })
    }

    pub fn proportional_myerson() -> Self {
        Self::myerson("proportional-myerson", Proportional)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn describe(&self) -> String {
        let pay = match &self.payment {
            PaymentRule::Myerson => "Myerson payments".to_string(),
            PaymentRule::Explicit(p) => p.describe(),
        };
        format!("{}; {}", self.rule.describe(), pay)
    }

    pub fn rule(&self) -> &Arc<dyn AllocationRule> {
        &self.rule
    }

    pub fn payment_rule(&self) -> &PaymentRule {
        &self.payment
    }

    pub fn payment_mode(&self) -> PaymentMode {
        match self.payment {
            PaymentRule::Myerson => PaymentMode::Myerson,
            PaymentRule::Explicit(_) => PaymentMode::Explicit,
        }
    }

    pub fn allocate(&self, profile: &BidProfile) -> Allocation {
        self.rule.allocate(profile)
    }

    /// Share of `agent`, or 0 when the rule left it out.
    pub fn share(&self, profile: &BidProfile, agent: AgentId) -> f64 {
        self.allocate(profile).share(agent).unwrap_or(0.0)
    }

    pub fn exact_integral(&self, profile: &BidProfile, agent: AgentId, upper: f64) -> Option<f64> {
        self.rule.exact_integral(profile, agent, upper)
    }

    pub fn explicit_payments(&self, profile: &BidProfile) -> Option<PaymentVector> {
        match &self.payment {
            PaymentRule::Myerson => None,
            PaymentRule::Explicit(p) => Some(p.payments(profile)),
        }
    }

    /// Same mechanism with the closed-form integral hidden, forcing every
    /// Myerson payment through quadrature.
    pub fn opaque(&self) -> Self {
        Mechanism {
            name: format!("{}-opaque", self.name),
            rule: Arc::new(QuadratureOnly::new(Arc::clone(&self.rule))),
            payment: self.payment.clone(),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl fmt::Debug for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mechanism")
            .field("name", &self.name)
            .field("rule", &self.rule.describe())
            .field("payment_mode", &self.payment_mode())
            .finish()
    }
}
