//! Kinodynamic search against the grid A* baseline on random endpoint
//! pairs.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::output::{path_metrics, write_atomic, write_json, RunReport};
use super::{RunStatus, Scenario, ScenarioError};
use crate::baseline::GridAstarPlanner;
use crate::costmap::Costmap;
use crate::kinodynamic::KinodynamicAstar;
use crate::planner::{PlanError, PlannerRegistry};
use crate::primitives::State;
use crate::synth::sample_clear_point;
use crate::Vec2;

const SAMPLE_TRIES: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub trial: usize,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub method: &'static str,
    /// `ok`, `no_path` or `invalid_endpoint`.
    pub status: &'static str,
    pub duration_s: Option<f64>,
    pub effort: Option<f64>,
    pub path_length_m: Option<f64>,
    pub min_clearance_m: Option<f64>,
    pub expansions: usize,
    /// Wall-clock planning time; kept out of `bench.csv`.
    #[serde(skip)]
    pub plan_ms: f64,
}

/// Seeded start/goal pairs with the configured clearance and separation.
pub fn sample_pairs(sc: &Scenario, cm: &Costmap, seed: u64) -> Result<Vec<(Vec2, Vec2)>, ScenarioError> {
    let b = &sc.bench;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(b.trials);
    let fail = || ScenarioError::Config("cannot sample bench endpoints with the requested clearance".into());
    for _ in 0..b.trials {
        let start = sample_clear_point(&mut rng, cm, b.min_clearance_m, SAMPLE_TRIES).ok_or_else(fail)?;
        let mut goal = None;
        for _ in 0..SAMPLE_TRIES {
            let g = sample_clear_point(&mut rng, cm, b.min_clearance_m, SAMPLE_TRIES).ok_or_else(fail)?;
            if (g - start).norm() >= b.min_separation_m {
                goal = Some(g);
                break;
            }
        }
        pairs.push((start, goal.ok_or_else(fail)?));
    }
    Ok(pairs)
}

/// Runs both planners on every sampled pair; failures become rows too.
pub fn run_bench(sc: &Scenario, cm: &Costmap, seed: u64) -> Result<Vec<BenchRow>, ScenarioError> {
    let registry = PlannerRegistry::with_builtins();
    let methods = [KinodynamicAstar::NAME, GridAstarPlanner::NAME];
    let planners = methods
        .iter()
        .map(|m| registry.create(m, &sc.planner_settings).map_err(|e| ScenarioError::Config(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (trial, (a, b)) in sample_pairs(sc, cm, seed)?.into_iter().enumerate() {
        for (method, planner) in methods.iter().zip(&planners) {
            let clock = Instant::now();
            let result = planner.plan(&State::at_rest(a), &State::at_rest(b), cm);
            let plan_ms = clock.elapsed().as_secs_f64() * 1e3;
            let mut row = BenchRow {
                trial,
                start: [a.x, a.y],
                goal: [b.x, b.y],
                method,
                status: "ok",
                duration_s: None,
                effort: None,
                path_length_m: None,
                min_clearance_m: None,
                expansions: 0,
                plan_ms,
            };
            match result {
                Ok(out) => {
                    let m = path_metrics(&*out.path, cm);
                    row.duration_s = Some(out.path.duration());
                    row.effort = Some(out.path.effort());
                    row.path_length_m = Some(m.path_length);
                    row.min_clearance_m = Some(m.min_clearance);
                    row.expansions = out.expansions;
                }
                Err(PlanError::InvalidConfig(m)) => return Err(ScenarioError::Config(m)),
                Err(PlanError::NoPath { expansions, .. }) => {
                    row.status = "no_path";
                    row.expansions = expansions;
                }
                Err(_) => row.status = "invalid_endpoint",
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(
        "trial,start_x,start_y,goal_x,goal_y,method,status,duration_s,effort,path_length_m,min_clearance_m,expansions\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.4},{:.4},{:.4},{:.4},{},{},{},{},{},{},{}",
            r.trial,
            r.start[0],
            r.start[1],
            r.goal[0],
            r.goal[1],
            r.method,
            r.status,
            opt(r.duration_s),
            opt(r.effort),
            opt(r.path_length_m),
            opt(r.min_clearance_m),
            r.expansions
        );
    }
    s
}

/// Trials where the kinodynamic search found a path with lower effort
/// than the baseline, and trials where both succeeded.
pub fn effort_wins(rows: &[BenchRow]) -> (usize, usize) {
    let mut wins = 0;
    let mut both = 0;
    for pair in rows.chunks(2) {
        if let [k, b] = pair {
            if let (Some(ek), Some(eb)) = (k.effort, b.effort) {
                both += 1;
                if ek < eb {
                    wins += 1;
                }
            }
        }
    }
    (wins, both)
}

#[derive(Serialize)]
struct BenchTiming<'a> {
    trial: usize,
    method: &'a str,
    plan_ms: f64,
}

/// Writes `bench.csv`, a summary `report.json` and per-plan wall times in
/// `timing.json`.
pub fn cmd_bench(sc: &Scenario, out: &Path, seed: Option<u64>) -> Result<RunReport, ScenarioError> {
    std::fs::create_dir_all(out).map_err(|source| ScenarioError::Write { path: out.to_path_buf(), source })?;
    let cm = sc.costmap()?;
    let rows = run_bench(sc, &cm, seed.unwrap_or(sc.bench.seed))?;
    write_atomic(&out.join("bench.csv"), bench_csv(&rows).as_bytes())?;
    let (wins, both) = effort_wins(&rows);
    let mut report = RunReport::new("bench", &sc.name, "kinodynamic_astar,grid_astar", RunStatus::Ok);
    report.message = Some(format!("kinodynamic effort lower in {wins} of {both} trials where both planners succeeded"));
    report.legs = sc.bench.trials;
    report.expansions = rows.iter().map(|r| r.expansions).sum();
    write_json(&out.join("report.json"), &report)?;
    let timing: Vec<BenchTiming> =
        rows.iter().map(|r| BenchTiming { trial: r.trial, method: r.method, plan_ms: r.plan_ms }).collect();
    write_json(&out.join("timing.json"), &timing)?;
    Ok(report)
}
