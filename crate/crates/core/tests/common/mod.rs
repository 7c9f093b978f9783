#![allow(dead_code)]

use ccplan::envmodel::{Cell, Haven, IlluminationSeries, OperationalBounds, Scenario, TerrainGrid, Waypoint};
use ccplan::faultmodel::FaultParams;
use ccplan::oracle::MicroInstance;
use ccplan::recovery::{build_recovery, RecoveryPolicy, StateLattice, SweepMode};
use ccplan::roverdyn::{self, RoverParams, RoverState};
use ccplan::treeplan::{PartialPolicyTree, Planner, PlannerConfig};

pub const RES: f64 = 1800.0;

/// Small rover: 90 m cells give 1800 s cardinal moves, a full-sun move nets
/// about -14 Wh and a dark one -55 Wh.
pub fn micro_rover() -> RoverParams {
    RoverParams {
        panel_area: 0.2,
        panel_eff: 0.3,
        velocity: 0.05,
        p_drive: 110.0,
        p_fault: 60.0,
        p_wait: 20.0,
        p_hibernate: 10.0,
        capacity: 800.0,
        wait_duration: 1800.0,
    }
}

pub struct MicroSpec {
    pub width: usize,
    pub height: usize,
    pub light: fn(Cell, usize) -> f64,
    pub havens: Vec<(u32, u32)>,
    pub waypoints: Vec<((u32, u32), f64, f64)>,
    pub start: ((u32, u32), f64),
    pub rate: f64,
    pub recovery_duration: f64,
    pub rover: RoverParams,
}

pub fn build(spec: &MicroSpec) -> Scenario {
    let (w, h) = (spec.width, spec.height);
    let t_max = 7.0 * RES;
    let terrain = TerrainGrid::flat(w, h, 90.0).unwrap();
    let light = spec.light;
    let illum = IlluminationSeries::from_fn(w, h, 0.0, RES, 16, |i, f| {
        light(Cell::new((i % w) as u32, (i / w) as u32), f)
    })
    .unwrap();
    let havens = spec
        .havens
        .iter()
        .map(|&(x, y)| Haven {
            cell: Cell::new(x, y),
            deadline: t_max,
            min_energy: 200.0,
        })
        .collect();
    let waypoints = spec
        .waypoints
        .iter()
        .map(|&((x, y), d, e)| Waypoint::new(Cell::new(x, y), d, e))
        .collect();
    let ((sx, sy), b0) = spec.start;
    Scenario::new(
        terrain,
        illum,
        waypoints,
        havens,
        OperationalBounds {
            t_min: 0.0,
            t_max,
            b_min: 100.0,
            b_max: 800.0,
        },
        spec.rover.clone(),
        FaultParams {
            rate: spec.rate,
            recovery_duration: spec.recovery_duration,
        },
        RoverState::new(Cell::new(sx, sy), 0.0, b0, 0),
    )
    .unwrap()
}

fn west_lit(c: Cell, _: usize) -> f64 {
    if c.x == 0 {
        1.0
    } else {
        0.0
    }
}

fn dusk(c: Cell, f: usize) -> f64 {
    if c.y == 0 && f < 4 {
        1.0
    } else if c.x + c.y <= 1 {
        0.5
    } else {
        0.0
    }
}

fn dawn(c: Cell, f: usize) -> f64 {
    if f >= 3 && c.x >= 2 {
        1.0
    } else {
        0.0
    }
}

/// Haven in the lit west column, one shadowed waypoint next to the start.
pub fn micro_a() -> Scenario {
    build(&MicroSpec {
        width: 3,
        height: 3,
        light: west_lit,
        havens: vec![(0, 0)],
        waypoints: vec![((1, 1), 1800.0, 40.0)],
        start: ((0, 1), 350.0),
        rate: 1.0 / 400.0,
        recovery_duration: 1800.0,
        rover: micro_rover(),
    })
}

/// Light fading in time, two waypoints, two havens.
pub fn micro_b() -> Scenario {
    build(&MicroSpec {
        width: 4,
        height: 3,
        light: dusk,
        havens: vec![(0, 0), (3, 2)],
        waypoints: vec![((2, 0), 1800.0, 30.0), ((3, 1), 1800.0, 30.0)],
        start: ((0, 1), 350.0),
        rate: 1.0 / 300.0,
        recovery_duration: 3600.0,
        rover: micro_rover(),
    })
}

/// Dark start with sunrise on the east side.
pub fn micro_c() -> Scenario {
    build(&MicroSpec {
        width: 4,
        height: 2,
        light: dawn,
        havens: vec![(3, 0)],
        waypoints: vec![((1, 1), 1800.0, 20.0)],
        start: ((0, 0), 450.0),
        rate: 1.0 / 500.0,
        recovery_duration: 1800.0,
        rover: micro_rover(),
    })
}

pub fn micros() -> Vec<(&'static str, Scenario)> {
    vec![("micro_a", micro_a()), ("micro_b", micro_b()), ("micro_c", micro_c())]
}

pub fn micro_instance(s: &Scenario) -> MicroInstance {
    MicroInstance::new(s.clone(), RES, 100.0).unwrap()
}

pub fn recovery(s: &Scenario) -> RecoveryPolicy {
    let lat = StateLattice::new(s, RES, 100.0).unwrap();
    build_recovery(s, &lat, SweepMode::Exact).unwrap()
}

fn full_sun(_: Cell, _: usize) -> f64 {
    1.0
}

/// Fault-free 4x4 world in full sun with a large panel, so energy never
/// binds and every requirement sits at the floor.
pub fn alpha0(start: (u32, u32), waypoints: Vec<(u32, u32)>, haven: (u32, u32)) -> Scenario {
    build(&MicroSpec {
        width: 4,
        height: 4,
        light: full_sun,
        havens: vec![haven],
        waypoints: waypoints.into_iter().map(|c| (c, 1800.0, 40.0)).collect(),
        start: (start, 400.0),
        rate: 0.0,
        recovery_duration: 1800.0,
        rover: RoverParams {
            panel_area: 1.5,
            ..micro_rover()
        },
    })
}

/// 7x3 world whose east plateau (x >= 5) is cut off by a cliff. The last
/// waypoint sits on the plateau and can never be reached.
pub fn island(rate: f64) -> Scenario {
    let (w, h) = (7, 3);
    let elevation = (0..w * h).map(|i| if i % w >= 4 { 1000.0 } else { 0.0 }).collect();
    let terrain = TerrainGrid::new(w, h, 90.0, elevation, 25.0).unwrap();
    let illum = IlluminationSeries::constant(w, h, 0.0, RES, 16, 1.0).unwrap();
    Scenario::new(
        terrain,
        illum,
        vec![
            Waypoint::new(Cell::new(2, 1), 1800.0, 40.0),
            Waypoint::new(Cell::new(5, 1), 1800.0, 40.0),
        ],
        vec![Haven {
            cell: Cell::new(0, 0),
            deadline: 7.0 * RES,
            min_energy: 200.0,
        }],
        OperationalBounds {
            t_min: 0.0,
            t_max: 7.0 * RES,
            b_min: 100.0,
            b_max: 800.0,
        },
        micro_rover(),
        FaultParams {
            rate,
            recovery_duration: 1800.0,
        },
        RoverState::new(Cell::new(1, 1), 0.0, 500.0, 0),
    )
    .unwrap()
}

/// Fault-free replay of `plan` from its root requirement. Checks that every
/// arrival meets the next node's requirement, that times line up, that
/// waypoints advance only at science nodes and that the end state is safe.
pub fn check_forward(plan: &PartialPolicyTree, s: &Scenario) -> std::result::Result<(), String> {
    let first = &plan.nodes[0];
    let mut x = RoverState::new(first.cell, first.time, first.min_energy_req, first.next_wp);
    for pair in plan.nodes.windows(2) {
        let (node, next) = (&pair[0], &pair[1]);
        let a = node.action.ok_or("interior node without action")?;
        if (x.time - node.time).abs() > 1e-6 || x.cell != node.cell {
            return Err(format!("drifted from node {node:?} to {x:?}"));
        }
        if x.energy + 1e-6 < node.min_energy_req {
            return Err(format!(
                "energy {} below requirement {} at {:?}",
                x.energy, node.min_energy_req, node.cell
            ));
        }
        if !roverdyn::in_operational(&x, s) {
            return Err(format!("left the operational region at {x:?}"));
        }
        let y = roverdyn::nominal_transition(&x, a, s).map_err(|e| e.to_string())?;
        let expected_wp = if a.is_science() { x.next_wp + 1 } else { x.next_wp };
        if y.next_wp != expected_wp || next.next_wp != expected_wp {
            return Err(format!("waypoint index jumped at {a}"));
        }
        if y.energy + 1e-6 < next.min_energy_req {
            return Err(format!(
                "arrival energy {} below successor requirement {} after {a}",
                y.energy, next.min_energy_req
            ));
        }
        if y.time <= x.time {
            return Err("time did not advance".into());
        }
        x = y;
    }
    let last = plan.terminal();
    if (x.time - last.time).abs() > 1e-6 || x.cell != last.cell {
        return Err(format!("ended at {x:?}, plan ends at {last:?}"));
    }
    if !roverdyn::is_safe(&x, s) {
        return Err(format!("end state {x:?} is not safe"));
    }
    Ok(())
}

pub fn planner<'a>(s: &'a Scenario, pol: &'a RecoveryPolicy, beta: f64) -> Planner<'a> {
    let mut cfg = PlannerConfig::new(beta);
    cfg.time_class_res = RES;
    Planner::new(s, pol, cfg).unwrap()
}
