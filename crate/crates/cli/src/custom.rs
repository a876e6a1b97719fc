//! Mechanisms compiled into the binary on top of the built-ins.
//!
//! To add one, register a factory here: give it a name, a description and
//! a closure that builds a [`Mechanism`] from [`MechanismParams`]. Rules
//! without a closed-form integral are priced by quadrature.

use mechlab::mechanism::FnRule;
use mechlab::{AgentId, Allocation, BidProfile, MechError, Mechanism, MechanismParams, Registry};

pub fn registry() -> Registry {
    let mut reg = Registry::with_builtins();
    reg.register(
        "tullock2",
        "shares proportional to squared bids, Myerson payments",
        tullock2,
    )
    .expect("custom names do not clash with built-ins");
    reg
}

fn tullock2(params: &MechanismParams) -> mechlab::Result<Mechanism> {
    if params.payment == Some(mechlab::PaymentMode::Explicit) {
        return Err(MechError::MissingPaymentRule {
            mechanism: "tullock2".into(),
        });
    }
    let rule = FnRule::new("x_i = b_i^2 / sum b_j^2", |p: &BidProfile| {
        let total: f64 = p.bids().map(|b| b * b).sum();
        let n = p.len() as f64;
        let shares = p
            .bids()
            .map(|b| if total > 0.0 { b * b / total } else { 1.0 / n })
            .collect();
        Allocation::aligned(p, shares)
    })
    .with_integral(|p: &BidProfile, agent: AgentId, upper: f64| {
        let rest: f64 = p
            .entries()
            .iter()
            .filter(|(a, _)| *a != agent)
            .map(|(_, b)| b * b)
            .sum();
        if rest == 0.0 {
            return upper;
        }
        let s = rest.sqrt();
        upper - s * (upper / s).atan()
    });
    Ok(Mechanism::myerson("tullock2", rule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mechlab::payment::QuadratureConfig;

    #[test]
    fn closed_form_matches_quadrature() {
        let mech = registry()
            .build("tullock2", &MechanismParams::default())
            .unwrap();
        let opaque = mech.opaque();
        let p = BidProfile::from_bids(&[3.0, 2.0, 4.5]).unwrap();
        let quad = QuadratureConfig {
            tol_quad: 1e-5,
            ..Default::default()
        };
        for a in p.agents() {
            let exact = mechlab::payment::payment_of(&mech, &p, a, &quad)
                .unwrap()
                .value;
            let approx = mechlab::payment::payment_of(&opaque, &p, a, &quad)
                .unwrap()
                .value;
            assert!((exact - approx).abs() <= 1e-5, "{a}: {exact} vs {approx}");
        }
    }
}
