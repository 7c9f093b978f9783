//! Poisson fault splits and the stochastic outcomes of actions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envmodel::Scenario;
use crate::error::{Error, Result};
use crate::roverdyn::{self, Action, Effect, RoverState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultParams {
    /// Expected faults per metre driven.
    pub rate: f64,
    /// Time spent resolving one fault, s.
    pub recovery_duration: f64,
}

impl FaultParams {
    /// One fault every 5000 m, ten hours to recover.
    pub fn medium() -> Self {
        FaultParams {
            rate: 1.0 / 5000.0,
            recovery_duration: 36000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "fault rate must be non-negative, got {}",
                self.rate
            )));
        }
        if !(self.recovery_duration > 0.0 && self.recovery_duration.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "fault recovery duration must be positive, got {}",
                self.recovery_duration
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeLabel {
    Nominal,
    FaultH1,
    FaultH2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub label: OutcomeLabel,
    pub probability: f64,
    pub state: RoverState,
}

/// `(p_nom, p_h1, p_h2)` for a drive of `rho` metres at `alpha` faults per metre.
pub fn fault_probabilities(rho: f64, alpha: f64) -> Result<(f64, f64, f64)> {
    if !(rho >= 0.0) || !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fault probabilities need rho >= 0 and alpha >= 0, got rho = {rho}, alpha = {alpha}"
        )));
    }
    Ok(split(alpha * rho))
}

pub(crate) fn split(lambda: f64) -> (f64, f64, f64) {
    let half = lambda / 2.0;
    let q = (-half).exp();
    let p_h1 = -(-half).exp_m1();
    let p_h2 = q * p_h1;
    (q * q, p_h1, p_h2)
}

/// Energy-independent effects of the two fault branches of a move taken at
/// `(cell, t)` with nominal effect `nominal`. Each is applied to the
/// pre-move state; the second includes the drive itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultEffects {
    pub p_nom: f64,
    pub p_h1: f64,
    pub p_h2: f64,
    pub h1: Effect,
    /// Delay at the destination, applied after `nominal`.
    pub h2_delay: Effect,
}

pub(crate) fn fault_effects(s: &Scenario, x_cell: crate::envmodel::Cell, t: f64, nominal: &Effect) -> FaultEffects {
    let (p_nom, p_h1, p_h2) = split(s.fault().rate * nominal.distance);
    let dt = s.fault().recovery_duration;
    let p_fault = s.rover().p_fault;
    let h1 = roverdyn::static_effect(s, x_cell, t, nominal.next_wp, dt, p_fault);
    let h2_delay = roverdyn::static_effect(s, nominal.cell, t + nominal.duration, nominal.next_wp, dt, p_fault);
    FaultEffects {
        p_nom,
        p_h1,
        p_h2,
        h1,
        h2_delay,
    }
}

impl FaultEffects {
    pub fn h1_state(&self, x: &RoverState, capacity: f64) -> RoverState {
        let mut y = self.h1.apply(x, capacity);
        y.next_wp = x.next_wp;
        y
    }

    pub fn h2_state(&self, x: &RoverState, nominal: &Effect, capacity: f64) -> RoverState {
        let mid = nominal.apply(x, capacity);
        self.h2_delay.apply(&mid, capacity)
    }
}

/// All outcomes of `a` from `x`, in the order FaultH1, FaultH2, Nominal for
/// moves with a non-zero fault probability; a single Nominal otherwise.
pub fn enumerate_outcomes(x: &RoverState, a: Action, s: &Scenario) -> Result<Vec<Outcome>> {
    let nominal = roverdyn::effect(s, x.cell, x.time, x.next_wp, a)?;
    let cap = s.rover().capacity;
    let nominal_state = nominal.apply(x, cap);
    if nominal.distance == 0.0 || s.fault().rate == 0.0 {
        return Ok(vec![Outcome {
            label: OutcomeLabel::Nominal,
            probability: 1.0,
            state: nominal_state,
        }]);
    }
    let fe = fault_effects(s, x.cell, x.time, &nominal);
    Ok(vec![
        Outcome {
            label: OutcomeLabel::FaultH1,
            probability: fe.p_h1,
            state: fe.h1_state(x, cap),
        },
        Outcome {
            label: OutcomeLabel::FaultH2,
            probability: fe.p_h2,
            state: fe.h2_state(x, &nominal, cap),
        },
        Outcome {
            label: OutcomeLabel::Nominal,
            probability: fe.p_nom,
            state: nominal_state,
        },
    ])
}

/// Draws one outcome by inverse CDF over [FaultH1, FaultH2, Nominal].
/// Consumes exactly one uniform draw for moves and none otherwise.
pub fn sample_outcome<R: Rng + ?Sized>(x: &RoverState, a: Action, s: &Scenario, rng: &mut R) -> Result<Outcome> {
    let outcomes = enumerate_outcomes(x, a, s)?;
    if !a.is_move() {
        return Ok(outcomes[0]);
    }
    let u: f64 = rng.random();
    Ok(pick(&outcomes, u))
}

fn pick(outcomes: &[Outcome], u: f64) -> Outcome {
    let mut acc = 0.0;
    for o in outcomes {
        acc += o.probability;
        if u < acc {
            return *o;
        }
    }
    *outcomes.last().expect("outcome list is never empty")
}
