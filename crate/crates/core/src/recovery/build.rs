use rayon::prelude::*;

use super::lattice::StateLattice;
use super::RecoveryPolicy;
use crate::envmodel::{Cell, Scenario};
use crate::error::Result;
use crate::faultmodel;
use crate::roverdyn::{self, Action, Effect};

/// Action code stored for lattice points where no action helps.
pub const HALT: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    /// One exact backward pass over the time points.
    Exact,
    /// Repeated full sweeps until no value moves by more than `tol`.
    Iterative { tol: f64, max_sweeps: usize },
}

/// One outcome of an action from a fixed `(cell, time)`, independent of energy.
#[derive(Debug, Clone, Copy)]
struct Branch {
    probability: f64,
    /// Net energy changes applied in sequence, each followed by the clamp.
    nets: [f64; 2],
    cell: usize,
    /// Lattice time point of the landing state, `None` past `t_max`.
    k: Option<usize>,
    /// Least energy that makes the landing state safe.
    safe_from: Option<f64>,
}

impl Branch {
    fn landing_energy(&self, b: f64, cap: f64) -> f64 {
        let e = (b + self.nets[0]).min(cap);
        (e + self.nets[1]).min(cap)
    }
}

fn branch(s: &Scenario, lat: &StateLattice, p: f64, nets: [f64; 2], cell: Cell, t: f64) -> Branch {
    Branch {
        probability: p,
        nets,
        cell: s.terrain().index(cell),
        k: lat.time_up(t),
        safe_from: roverdyn::min_safe_energy(cell, t, s),
    }
}

/// Energy-independent outcome sets for every legal recovery action at `(c, t)`.
fn action_branches(s: &Scenario, lat: &StateLattice, c: Cell, t: f64) -> Vec<(u8, Vec<Branch>)> {
    let mut out = Vec::with_capacity(9);
    for (code, &a) in Action::RECOVERY.iter().enumerate() {
        let Ok(e) = roverdyn::effect(s, c, t, 0, a) else {
            continue;
        };
        out.push((code as u8, outcome_branches(s, lat, c, t, &e)));
    }
    out
}

fn outcome_branches(s: &Scenario, lat: &StateLattice, c: Cell, t: f64, e: &Effect) -> Vec<Branch> {
    let t_nom = t + e.duration;
    if e.distance == 0.0 || s.fault().rate == 0.0 {
        return vec![branch(s, lat, 1.0, [e.net, 0.0], e.cell, t_nom)];
    }
    let fe = faultmodel::fault_effects(s, c, t, e);
    vec![
        branch(s, lat, fe.p_h1, [fe.h1.net, 0.0], c, t + fe.h1.duration),
        branch(
            s,
            lat,
            fe.p_h2,
            [e.net, fe.h2_delay.net],
            e.cell,
            t_nom + fe.h2_delay.duration,
        ),
        branch(s, lat, fe.p_nom, [e.net, 0.0], e.cell, t_nom),
    ]
}

/// Value of landing with energy `b` on branch `br`, given the values of
/// later time points.
fn landing_value(br: &Branch, b: f64, lat: &StateLattice, cap: f64, values: &dyn Fn(usize) -> f64) -> f64 {
    let e = br.landing_energy(b, cap);
    if br.safe_from.is_some_and(|thr| e >= thr) {
        return 1.0;
    }
    match (br.k, lat.energy_down(e)) {
        (Some(k), Some(j)) => values(lat.flat(br.cell, k, j)),
        _ => 0.0,
    }
}

/// Values and actions of one `(cell, k)` column over all energy levels.
fn solve_column(
    s: &Scenario,
    lat: &StateLattice,
    cell: usize,
    k: usize,
    values: &dyn Fn(usize) -> f64,
    out_v: &mut [f64],
    out_a: &mut [u8],
) {
    let c = s.terrain().cell(cell);
    let t = lat.time_at(k);
    let cap = s.rover().capacity;
    if !s.terrain().is_traversable(c) {
        out_v.fill(0.0);
        out_a.fill(HALT);
        return;
    }
    let safe_from = roverdyn::min_safe_energy(c, t, s);
    let actions = action_branches(s, lat, c, t);
    for j in 0..lat.n_energy {
        let b = lat.energy_at(j);
        if safe_from.is_some_and(|thr| b >= thr) {
            out_v[j] = 1.0;
            out_a[j] = HALT;
            continue;
        }
        let mut best = 0.0;
        let mut best_a = HALT;
        for (code, branches) in &actions {
            let v: f64 = branches
                .iter()
                .map(|br| br.probability * landing_value(br, b, lat, cap, values))
                .sum();
            if v > best {
                best = v;
                best_a = *code;
            }
        }
        out_v[j] = best.min(1.0);
        out_a[j] = best_a;
    }
}

pub fn build_recovery(s: &Scenario, lat: &StateLattice, mode: SweepMode) -> Result<RecoveryPolicy> {
    let layer = lat.n_cells * lat.n_energy;
    let mut values = vec![0.0f64; lat.len()];
    let mut actions = vec![HALT; lat.len()];
    match mode {
        SweepMode::Exact => {
            for k in (0..lat.n_time).rev() {
                let (head, later) = values.split_at_mut((k + 1) * layer);
                let current = &mut head[k * layer..];
                let later: &[f64] = later;
                let offset = (k + 1) * layer;
                let lookup = |idx: usize| later[idx - offset];
                current
                    .par_chunks_mut(lat.n_energy)
                    .zip(actions[k * layer..(k + 1) * layer].par_chunks_mut(lat.n_energy))
                    .enumerate()
                    .for_each(|(cell, (v, a))| solve_column(s, lat, cell, k, &lookup, v, a));
            }
        }
        SweepMode::Iterative { tol, max_sweeps } => {
            for _ in 0..max_sweeps {
                let prev = values.clone();
                let lookup = |idx: usize| prev[idx];
                values
                    .par_chunks_mut(lat.n_energy)
                    .zip(actions.par_chunks_mut(lat.n_energy))
                    .enumerate()
                    .for_each(|(i, (v, a))| solve_column(s, lat, i % lat.n_cells, i / lat.n_cells, &lookup, v, a));
                let change = values.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if change < tol {
                    break;
                }
            }
        }
    }
    Ok(RecoveryPolicy {
        lattice: *lat,
        scenario_hash: s.content_hash(),
        values,
        actions,
    })
}
