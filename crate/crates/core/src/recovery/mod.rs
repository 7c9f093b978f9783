//! Safe-recovery value function and greedy fallback policy on a state lattice.

mod build;
mod io;
mod lattice;

pub use build::{build_recovery, SweepMode, HALT};
pub use lattice::{shortest_action, LatticeIndex, StateLattice};

use crate::envmodel::Scenario;
use crate::error::{Error, Result};
use crate::roverdyn::{Action, RoverState};

/// Probability of reaching the safe set from every lattice point, with the
/// maximizing action. Values are laid out as `[time][cell][energy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryPolicy {
    pub lattice: StateLattice,
    pub scenario_hash: String,
    pub values: Vec<f64>,
    pub actions: Vec<u8>,
}

impl RecoveryPolicy {
    pub fn index(&self, x: &RoverState, s: &Scenario) -> LatticeIndex {
        self.lattice.conservative_index(x, s)
    }

    /// Probability of reaching safety from `x` under the policy.
    pub fn value(&self, x: &RoverState, s: &Scenario) -> f64 {
        match self.index(x, s) {
            LatticeIndex::Safe => 1.0,
            LatticeIndex::Fail => 0.0,
            LatticeIndex::Point { cell, k, j } => self.values[self.lattice.flat(cell, k, j)],
        }
    }

    /// `1 - V` at the conservative lattice point of `x`.
    pub fn risk(&self, x: &RoverState, s: &Scenario) -> f64 {
        1.0 - self.value(x, s)
    }

    /// Stored action at the conservative lattice point; `None` means halt.
    pub fn greedy_action(&self, x: &RoverState, s: &Scenario) -> Option<Action> {
        match self.index(x, s) {
            LatticeIndex::Point { cell, k, j } => action_from_code(self.actions[self.lattice.flat(cell, k, j)]),
            _ => None,
        }
    }

    pub fn value_at(&self, cell: usize, k: usize, j: usize) -> f64 {
        self.values[self.lattice.flat(cell, k, j)]
    }

    pub fn action_at(&self, cell: usize, k: usize, j: usize) -> Option<Action> {
        action_from_code(self.actions[self.lattice.flat(cell, k, j)])
    }

    pub fn check_scenario(&self, s: &Scenario) -> Result<()> {
        let found = s.content_hash();
        if found != self.scenario_hash {
            return Err(Error::HashMismatch {
                expected: self.scenario_hash.clone(),
                found,
            });
        }
        Ok(())
    }
}

pub fn action_from_code(code: u8) -> Option<Action> {
    Action::RECOVERY.get(code as usize).copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::{Cell, Haven, IlluminationSeries, OperationalBounds, TerrainGrid};
    use crate::error::Error;
    use crate::faultmodel::FaultParams;
    use crate::roverdyn::RoverParams;

    /// 3x1 strip, haven at the east end, moves of 1800 s.
    fn strip(fraction: f64, rate: f64) -> Scenario {
        let terrain = TerrainGrid::flat(3, 2, 90.0).unwrap();
        let illum = IlluminationSeries::constant(3, 2, 0.0, 1800.0, 8, fraction).unwrap();
        let rover = RoverParams {
            velocity: 0.05,
            ..RoverParams::medium()
        };
        Scenario::new(
            terrain,
            illum,
            vec![],
            vec![Haven {
                cell: Cell::new(2, 0),
                deadline: 14400.0,
                min_energy: 200.0,
            }],
            OperationalBounds {
                t_min: 0.0,
                t_max: 14400.0,
                b_min: 100.0,
                b_max: 7000.0,
            },
            rover,
            FaultParams {
                rate,
                recovery_duration: 3600.0,
            },
            RoverState::new(Cell::new(0, 0), 0.0, 1000.0, 0),
        )
        .unwrap()
    }

    #[test]
    fn lattice_mapping() {
        let s = strip(0.0, 0.0);
        let lat = StateLattice::new(&s, 1800.0, 150.0).unwrap();
        assert_eq!(lat.n_time, 9);
        assert_eq!(lat.n_energy, 47);
        assert_eq!(lat.energy_at(46), 7000.0);
        let x = RoverState::new(Cell::new(0, 0), 3600.0, 400.0, 0);
        assert_eq!(
            lat.conservative_index(&x, &s),
            LatticeIndex::Point { cell: 0, k: 2, j: 2 }
        );
        let later = RoverState { time: 3601.0, ..x };
        assert!(matches!(
            lat.conservative_index(&later, &s),
            LatticeIndex::Point { k: 3, .. }
        ));
        let low = RoverState { energy: 99.9, ..x };
        assert_eq!(lat.conservative_index(&low, &s), LatticeIndex::Fail);
        let mid = RoverState { energy: 399.0, ..x };
        assert!(matches!(
            lat.conservative_index(&mid, &s),
            LatticeIndex::Point { j: 1, .. }
        ));
    }

    #[test]
    fn coarse_lattice_is_rejected() {
        let s = strip(0.0, 0.0);
        assert!(matches!(
            StateLattice::new(&s, 1801.0, 150.0),
            Err(Error::LatticeTooCoarse { shortest, .. }) if shortest == 1800.0
        ));
    }

    #[test]
    fn values_on_a_strip() {
        let s = strip(0.0, 0.0);
        let lat = StateLattice::new(&s, 1800.0, 50.0).unwrap();
        let pol = build_recovery(&s, &lat, SweepMode::Exact).unwrap();
        assert!(pol.values.iter().all(|v| *v == 0.0 || *v == 1.0));
        // Haven with enough energy: safe.
        let h = RoverState::new(Cell::new(2, 0), 0.0, 1000.0, 0);
        assert_eq!(pol.risk(&h, &s), 0.0);
        assert_eq!(pol.greedy_action(&h, &s), None);
        // Two cells west with plenty of energy: drive east.
        let x = RoverState::new(Cell::new(0, 0), 0.0, 1000.0, 0);
        assert_eq!(pol.risk(&x, &s), 0.0);
        assert_eq!(
            pol.greedy_action(&x, &s),
            Some(Action::Move(crate::envmodel::Direction::E))
        );
        // Too late to get there.
        let late = RoverState { time: 12600.0, ..x };
        assert_eq!(pol.risk(&late, &s), 1.0);
        assert_eq!(pol.greedy_action(&late, &s), None);
        // Outside the region.
        assert_eq!(pol.risk(&RoverState { energy: 50.0, ..x }, &s), 1.0);
    }

    #[test]
    fn iterative_mode_agrees_with_single_sweep() {
        let s = strip(0.3, 1.0 / 500.0);
        let lat = StateLattice::new(&s, 1800.0, 50.0).unwrap();
        let exact = build_recovery(&s, &lat, SweepMode::Exact).unwrap();
        let iter = build_recovery(
            &s,
            &lat,
            SweepMode::Iterative {
                tol: 1e-12,
                max_sweeps: 100,
            },
        )
        .unwrap();
        for (a, b) in exact.values.iter().zip(&iter.values) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(exact.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
