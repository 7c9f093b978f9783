use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{PartialPolicyTree, PlanStatus};
use crate::envmodel::Cell;
use crate::error::{Error, Result};
use crate::faultmodel::OutcomeLabel;
use crate::roverdyn::RoverState;

#[derive(Debug, Clone, Serialize)]
pub struct BranchRecord {
    pub label: OutcomeLabel,
    pub probability: f64,
    pub state: RoverState,
    pub risk: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanRecord {
    pub cell: Cell,
    pub departure_time: f64,
    pub action: Option<String>,
    pub min_energy_req: f64,
    pub exec_risk: f64,
    pub next_wp: usize,
    pub fault_branches: Vec<BranchRecord>,
}

#[derive(Serialize)]
struct PlanFile<'a> {
    scenario_hash: &'a str,
    beta: f64,
    status: PlanStatus,
    start: RoverState,
    root_risk: Option<f64>,
    waypoints_covered: usize,
    nodes: Vec<PlanRecord>,
}

fn records(plan: &PartialPolicyTree) -> Vec<PlanRecord> {
    plan.nodes
        .iter()
        .map(|n| PlanRecord {
            cell: n.cell,
            departure_time: n.time,
            action: n.action.map(|a| a.to_string()),
            min_energy_req: n.min_energy_req,
            exec_risk: n.exec_risk,
            next_wp: n.next_wp,
            fault_branches: n
                .fault_branches
                .iter()
                .map(|b| BranchRecord {
                    label: b.label,
                    probability: b.probability,
                    state: b.state,
                    risk: b.risk,
                })
                .collect(),
        })
        .collect()
}

pub fn plan_to_json(
    plan: Option<&PartialPolicyTree>,
    status: PlanStatus,
    start: &RoverState,
    beta: f64,
    scenario_hash: &str,
) -> String {
    let file = PlanFile {
        scenario_hash,
        beta,
        status,
        start: *start,
        root_risk: plan.map(|p| p.root_risk),
        waypoints_covered: plan.map_or(0, |p| p.waypoints_covered),
        nodes: plan.map(records).unwrap_or_default(),
    };
    serde_json::to_string_pretty(&file).expect("plan serializes") + "\n"
}

pub fn write_plan(path: &Path, json: &str) -> Result<()> {
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Writes `energy_profile.csv` and `risk_profile.csv` into `dir`.
pub fn write_profiles(plan: &PartialPolicyTree, dir: &Path) -> Result<()> {
    let mut energy = String::from("time,min_energy_req\n");
    let mut risk = String::from("time,exec_risk\n");
    for n in &plan.nodes {
        let _ = writeln!(energy, "{},{}", n.time, n.min_energy_req);
        let _ = writeln!(risk, "{},{}", n.time, n.exec_risk);
    }
    let e = dir.join("energy_profile.csv");
    fs::write(&e, energy).map_err(|err| Error::io(&e, err))?;
    let r = dir.join("risk_profile.csv");
    fs::write(&r, risk).map_err(|err| Error::io(&r, err))
}
