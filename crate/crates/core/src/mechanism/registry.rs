use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    AsymmetricSecondPrice, Mechanism, PaymentMode, PerUnitBid, Proportional, ReserveSecondPrice,
    SecondPrice,
};
use crate::error::{MechError, Result};

/// Parameters a factory may read. Unused fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MechanismParams {
    /// Per-unit-bid price of the proportional rule.
    pub c: f64,
    /// Reserve price.
    pub r: f64,
    /// Overrides the mechanism's default payment rule.
    pub payment: Option<PaymentMode>,
    pub eps_tie: f64,
}

impl Default for MechanismParams {
    fn default() -> Self {
        MechanismParams {
            c: 0.5,
            r: 4.0,
            payment: None,
            eps_tie: super::rules::DEFAULT_EPS_TIE,
        }
    }
}

pub type Factory = Box<dyn Fn(&MechanismParams) -> Result<Mechanism> + Send + Sync>;

pub struct RegistryEntry {
    pub description: String,
    pub builtin: bool,
    factory: Factory,
}

/// Name → mechanism factory.
pub struct Registry {
    entries: BTreeMap<String, RegistryEntry>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

fn myerson_only(name: &str, params: &MechanismParams) -> Result<()> {
    if params.payment == Some(PaymentMode::Explicit) {
        return Err(MechError::MissingPaymentRule {
            mechanism: name.to_string(),
        });
    }
    Ok(())
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.insert(
            "spa",
            "second-price auction with symmetric tie-breaking",
            true,
            Box::new(|p| {
                myerson_only("spa", p)?;
                Ok(Mechanism::myerson(
                    "spa",
                    SecondPrice { eps_tie: p.eps_tie },
                ))
            }),
        );
        reg.insert(
            "spa-reserve",
            "second-price auction with reserve price r",
            true,
            Box::new(|p| {
                myerson_only("spa-reserve", p)?;
                if !(p.r.is_finite() && p.r >= 0.0) {
                    return Err(MechError::InvalidParameter {
                        name: "r",
                        reason: format!("reserve must be finite and nonnegative, got {}", p.r),
                    });
                }
                Ok(Mechanism::myerson(
                    "spa-reserve",
                    ReserveSecondPrice {
                        reserve: p.r,
                        eps_tie: p.eps_tie,
                    },
                ))
            }),
        );
        reg.insert(
            "lottery",
            "equal shares for every participant, no payments",
            true,
            Box::new(|p| {
                myerson_only("lottery", p)?;
                Ok(Mechanism::lottery())
            }),
        );
        reg.insert(
            "asymmetric-spa",
            "second-price auction, ties broken toward the lowest agent id",
            true,
            Box::new(|p| {
                myerson_only("asymmetric-spa", p)?;
                Ok(Mechanism::myerson(
                    "asymmetric-spa",
                    AsymmetricSecondPrice { eps_tie: p.eps_tie },
                ))
            }),
        );
        reg.insert(
            "proportional",
            "shares proportional to bids; pays c per unit bid (or Myerson payments)",
            true,
            Box::new(|p| match p.payment.unwrap_or(PaymentMode::Explicit) {
                PaymentMode::Explicit => {
                    if !(p.c.is_finite() && p.c > 0.0) {
                        return Err(MechError::InvalidParameter {
                            name: "c",
                            reason: format!("per-unit price must be positive, got {}", p.c),
                        });
                    }
                    Ok(Mechanism::explicit(
                        "proportional",
                        Proportional,
                        PerUnitBid { c: p.c },
                    ))
                }
                PaymentMode::Myerson => Ok(Mechanism::proportional_myerson()),
            }),
        );
        reg
    }

    fn insert(&mut self, name: &str, description: &str, builtin: bool, factory: Factory) {
        self.entries.insert(
            name.to_string(),
            RegistryEntry {
                description: description.to_string(),
                builtin,
                factory,
            },
        );
    }

    /// Registers a custom mechanism. Names of existing entries are refused.
    pub fn register(
        &mut self,
        name: &str,
        description: &str,
        factory: impl Fn(&MechanismParams) -> Result<Mechanism> + Send + Sync + 'static,
    ) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(MechError::Precondition(format!(
                "mechanism `{name}` is already registered"
            )));
        }
        self.insert(name, description, false, Box::new(factory));
        Ok(())
    }

    pub fn build(&self, name: &str, params: &MechanismParams) -> Result<Mechanism> {
        let entry = self
            .entries
            .get(name)
            .ok_or_else(|| MechError::UnknownMechanism(name.to_string()))?;
        (entry.factory)(params)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn is_builtin(&self, name: &str) -> bool {
        self.entries.get(name).is_some_and(|e| e.builtin)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &RegistryEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}
