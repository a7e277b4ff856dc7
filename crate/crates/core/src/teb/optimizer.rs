//! Outer resize loop around inner Levenberg iterations.

use serde::{Deserialize, Serialize};

use super::residuals::{num_vars, read_vars, write_vars, TebProblem};
use super::solver::{damped_step, normal_equations};
use super::{Band, Pose, TebError};
use crate::geometry::wrap_angle;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TebConfig {
    #[serde(rename = "dt_ref_s")]
    pub dt_ref: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub max_poses: usize,
    /// Relative objective decrease below which the inner loop stops.
    pub tolerance: f64,
}

impl Default for TebConfig {
    fn default() -> Self {
        Self { dt_ref: 0.3, outer_iterations: 50, inner_iterations: 10, max_poses: 400, tolerance: 1e-6 }
    }
}

impl TebConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt_ref > super::MIN_DT) || !self.dt_ref.is_finite() {
            return Err("dt_ref_s must exceed the minimum interval".into());
        }
        if self.max_poses < 2 || self.inner_iterations == 0 {
            return Err("max_poses must be at least 2 and inner_iterations positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeReport {
    pub band: Band,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub outer_iterations: usize,
    pub accepted_steps: usize,
    /// Objective after each accepted step, tagged with its outer iteration.
    pub history: Vec<(usize, f64)>,
    pub converged: bool,
}

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e10;

/// Splits intervals longer than `1.5 dt_ref` and merges those shorter
/// than `0.5 dt_ref` into a neighbour. Returns whether anything changed.
pub fn resize(band: &mut Band, dt_ref: f64, max_poses: usize) -> bool {
    let mut changed = false;
    let mut i = 0;
    while i < band.dts.len() {
        let dt = band.dts[i];
        if dt > 1.5 * dt_ref && band.len() < max_poses {
            let (a, b) = (band.poses[i], band.poses[i + 1]);
            let mid = Pose::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y), a.theta + 0.5 * wrap_angle(b.theta - a.theta));
            band.poses.insert(i + 1, mid);
            band.dts[i] = 0.5 * dt;
            band.dts.insert(i + 1, 0.5 * dt);
            changed = true;
            i += 2;
            continue;
        }
        if dt < 0.5 * dt_ref && band.len() > 2 {
            if i + 2 < band.len() && dt + band.dts[i + 1] <= 1.5 * dt_ref {
                band.poses.remove(i + 1);
                band.dts[i] += band.dts.remove(i + 1);
                changed = true;
                i += 1;
                continue;
            }
            if i >= 1 && i + 1 == band.len() - 1 && dt + band.dts[i - 1] <= 1.5 * dt_ref {
                band.poses.remove(i);
                band.dts[i - 1] += band.dts.remove(i);
                changed = true;
                continue;
            }
        }
        i += 1;
    }
    changed
}

/// Levenberg iterations on a fixed band topology. Returns the number of
/// accepted steps and whether the relative decrease fell below `tol`.
fn inner_loop(
    problem: &TebProblem,
    band: &mut Band,
    assignment: &[usize],
    iterations: usize,
    tol: f64,
    lambda: &mut f64,
    history: &mut Vec<(usize, f64)>,
    outer: usize,
) -> Result<(usize, bool), TebError> {
    let n = num_vars(band.len());
    let mut rows = problem.evaluate(band, assignment)?;
    let mut f: f64 = rows.iter().map(|r| r.value * r.value).sum();
    let mut accepted = 0;
    for _ in 0..iterations {
        let (h, g) = normal_equations(&rows, n);
        let x = read_vars(band);
        let mut step_taken = None;
        while *lambda <= LAMBDA_MAX {
            let Some(delta) = damped_step(&h, &g, *lambda) else {
                *lambda *= 4.0;
                continue;
            };
            let trial_x: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
            let trial = write_vars(band, &trial_x);
            match problem.evaluate(&trial, assignment) {
                Ok(trial_rows) => {
                    let ft: f64 = trial_rows.iter().map(|r| r.value * r.value).sum();
                    if ft < f {
                        *lambda = (*lambda / 3.0).max(1e-9);
                        step_taken = Some((trial, trial_rows, ft));
                        break;
                    }
                }
                Err(TebError::NonFinite { .. }) => {}
                Err(e) => return Err(e),
            }
            *lambda *= 4.0;
        }
        let Some((trial, trial_rows, ft)) = step_taken else {
            *lambda = LAMBDA_INIT;
            return Ok((accepted, true));
        };
        let rel = (f - ft) / f.max(f64::MIN_POSITIVE);
        *band = trial;
        rows = trial_rows;
        f = ft;
        accepted += 1;
        history.push((outer, f));
        if rel < tol {
            return Ok((accepted, true));
        }
    }
    Ok((accepted, false))
}

/// Deforms `band` to minimise the problem objective.
///
/// The first and last poses are never modified. Each outer iteration
/// resizes the band, reassigns via points to their nearest poses and runs
/// up to `inner_iterations` damped Gauss-Newton steps; only steps that
/// lower the objective are accepted. The loop ends once an inner run
/// converges and resizing has nothing left to do.
pub fn optimize(problem: &TebProblem, band: &Band, config: &TebConfig) -> Result<OptimizeReport, TebError> {
    let mut band = band.clone();
    if band.len() < 2 || band.dts.len() + 1 != band.len() {
        return Err(TebError::Malformed);
    }
    let initial_objective = problem.objective(&band, &problem.assign_via_points(&band))?;
    let mut lambda = LAMBDA_INIT;
    let mut history = Vec::new();
    let mut accepted_steps = 0;
    let mut converged = false;
    let mut outer = 0;
    let mut inner_converged = false;
    while outer < config.outer_iterations {
        let changed = resize(&mut band, config.dt_ref, config.max_poses);
        if inner_converged && !changed {
            converged = true;
            break;
        }
        let assignment = problem.assign_via_points(&band);
        let (steps, done) = inner_loop(
            problem,
            &mut band,
            &assignment,
            config.inner_iterations,
            config.tolerance,
            &mut lambda,
            &mut history,
            outer,
        )?;
        accepted_steps += steps;
        inner_converged = done;
        outer += 1;
    }
    let final_objective = problem.objective(&band, &problem.assign_via_points(&band))?;
    Ok(OptimizeReport {
        band,
        initial_objective,
        final_objective,
        outer_iterations: outer,
        accepted_steps,
        history,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::{Costmap, InflationParams, OccupancyGrid};
    use crate::teb::tests::random_band;
    use crate::teb::{band_kinematics, limit_excess, OmniLimits, TebWeights, MIN_DT};
    use crate::Vec2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn open_map() -> Costmap {
        Costmap::new(OccupancyGrid::new(200, 100, 0.1, Vec2::new(-5.0, -5.0)).unwrap(), InflationParams::default())
            .unwrap()
    }

    fn straight(n: usize, length: f64, dt: f64) -> Band {
        let poses = (0..n).map(|i| Pose::new(length * i as f64 / (n - 1) as f64, 0.0, 0.0)).collect();
        Band::new(poses, vec![dt; n - 1]).unwrap()
    }

    #[test]
    fn resize_splits_and_merges() {
        let mut b = straight(3, 2.0, 1.0);
        assert!(resize(&mut b, 0.3, 100));
        assert_eq!(b.dts, vec![0.5; 4]);
        assert!((b.total_time() - 2.0).abs() < 1e-12);
        let mut c = straight(6, 1.0, 0.1);
        assert!(resize(&mut c, 0.3, 100));
        assert!(c.len() < 6);
        assert!((c.total_time() - 0.5).abs() < 1e-12);
        assert_eq!(c.poses[0], Pose::new(0.0, 0.0, 0.0));
        assert_eq!(c.poses.last().unwrap().x, 1.0);
        let mut d = straight(3, 2.0, 1.0);
        assert!(!resize(&mut d, 0.3, 3));
    }

    #[test]
    fn straight_band_speeds_up_to_the_limit() {
        let cm = open_map();
        let lim = OmniLimits::default();
        let band = straight(21, 4.0, 0.6);
        let prob = TebProblem::new(&cm, lim, TebWeights::default());
        let out = optimize(&prob, &band, &TebConfig::default()).unwrap();
        let t = out.band.total_time();
        let t_min = 4.0 / lim.v_x_max;
        assert!(t < band.total_time());
        assert!(t >= t_min * (1.0 - 1e-3), "{t} vs {t_min}");
        assert!(t < 1.15 * t_min, "{t} vs {t_min}");
        assert!(limit_excess(&out.band, &lim) < 1e-3);
    }

    #[test]
    fn time_only_weights_hit_the_interval_floor() {
        let cm = open_map();
        let w = TebWeights {
            gamma_obstacle: 0.0,
            gamma_viapoint: 0.0,
            gamma_vel_x: 0.0,
            gamma_vel_y: 0.0,
            gamma_vel_theta: 0.0,
            gamma_acc: 0.0,
            gamma_yaw: 0.0,
            ..TebWeights::default()
        };
        let out = optimize(&TebProblem::new(&cm, OmniLimits::default(), w), &straight(8, 2.0, 0.3), &TebConfig::default())
            .unwrap();
        assert!(out.band.dts.iter().all(|&d| d == MIN_DT), "{:?}", out.band.dts);
    }

    #[test]
    fn endpoints_pinned_and_objective_monotone() {
        let cm = open_map();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let n = rng.gen_range(2..12);
            let band = random_band(&mut rng, n);
            let via = vec![Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))];
            let prob = TebProblem::new(&cm, OmniLimits::default(), TebWeights::default()).with_via_points(via);
            let out = optimize(&prob, &band, &TebConfig::default()).unwrap();
            let (a, b) = (band.poses[0], *band.poses.last().unwrap());
            assert_eq!(out.band.poses[0], a);
            assert_eq!(*out.band.poses.last().unwrap(), b);
            assert_eq!(out.band.poses[0].theta.to_bits(), a.theta.to_bits());
            for w in out.history.windows(2) {
                if w[0].0 == w[1].0 {
                    assert!(w[1].1 < w[0].1);
                }
            }
            assert!(out.band.dts.iter().all(|&d| d >= MIN_DT));
        }
    }

    #[test]
    fn violating_band_is_repaired() {
        let cm = open_map();
        let lim = OmniLimits::default();
        let band = straight(11, 4.0, 0.2);
        assert!(band_kinematics(&band).0[0].v_x > 1.5);
        let out = optimize(&TebProblem::new(&cm, lim, TebWeights::default()), &band, &TebConfig::default()).unwrap();
        assert!(limit_excess(&out.band, &lim) < 1e-3);
    }

    #[test]
    fn nonomni_mode_suppresses_lateral_motion() {
        let cm = open_map();
        let lim = OmniLimits { v_y_max: 0.001, ..OmniLimits::default() };
        let heading = |i: usize| if i == 0 || i == 10 { 0.0 } else { FRAC_PI_2 };
        let poses = (0..11).map(|i| Pose::new(0.0, 0.2 * i as f64, heading(i))).collect();
        let band = Band::new(poses, vec![1.0; 10]).unwrap();
        let out = optimize(&TebProblem::new(&cm, lim, TebWeights::default()), &band, &TebConfig::default()).unwrap();
        let (v, _) = band_kinematics(&out.band);
        let worst = v.iter().map(|t| t.v_y.abs()).fold(0.0, f64::max);
        assert!(worst <= 0.001 + 1e-3, "{worst}");
    }

    fn rotate_grid(g: &OccupancyGrid) -> OccupancyGrid {
        let (w, h, r, o) = (g.width(), g.height(), g.resolution(), g.origin());
        let mut out = OccupancyGrid::new(h, w, r, Vec2::new(-o.y - h as f64 * r, o.x)).unwrap();
        for iy in 0..h {
            for ix in 0..w {
                out.set(h - 1 - iy, ix, g.is_occupied(ix, iy));
            }
        }
        out
    }

    #[test]
    fn quarter_turn_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let n = rng.gen_range(3..10);
            let band = random_band(&mut rng, n);
            let mut g = OccupancyGrid::new(50, 40, 0.1, Vec2::new(-2.0, -1.5)).unwrap();
            let mut placed = 0;
            while placed < 6 {
                let c = Vec2::new(rng.gen_range(-2.0..3.0), rng.gen_range(-1.5..2.5));
                if band.poses.iter().all(|p| (p.position() - c).norm() > 0.6) {
                    g.stamp_disc(c, rng.gen_range(0.05..0.2));
                    placed += 1;
                }
            }
            let gr = rotate_grid(&g);
            let (cm, cmr) = (
                Costmap::new(g, InflationParams::default()).unwrap(),
                Costmap::new(gr, InflationParams::default()).unwrap(),
            );
            let via = vec![Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))];
            let quarter = |v: Vec2| Vec2::new(-v.y, v.x);
            let cfg = TebConfig::default();
            let a = optimize(
                &TebProblem::new(&cm, OmniLimits::default(), TebWeights::default()).with_via_points(via.clone()),
                &band,
                &cfg,
            )
            .unwrap();
            let b = optimize(
                &TebProblem::new(&cmr, OmniLimits::default(), TebWeights::default())
                    .with_via_points(via.iter().map(|v| quarter(*v)).collect()),
                &band.transformed(FRAC_PI_2, Vec2::zeros()),
                &cfg,
            )
            .unwrap();
            let expect = a.band.transformed(FRAC_PI_2, Vec2::zeros());
            assert_eq!(expect.len(), b.band.len());
            for (p, q) in expect.poses.iter().zip(&b.band.poses) {
                assert!((p.position() - q.position()).norm() < 1e-6);
                assert!(wrap_angle(p.theta - q.theta).abs() < 1e-6);
            }
            for (s, t) in expect.dts.iter().zip(&b.band.dts) {
                assert!((s - t).abs() < 1e-6);
            }
        }
    }
}
