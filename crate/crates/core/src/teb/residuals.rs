//! Weighted residual blocks of the band objective and their Jacobians.
//!
//! Free variables are interleaved as
//! `[dt_0, x_1, y_1, th_1, dt_1, x_2, ..., th_{n-2}, dt_{n-2}]`; the first and
//! last poses are fixed. Every block touches at most three consecutive
//! poses and the intervals between them, which spans at most
//! [`MAX_VARS`] consecutive variables. Each row therefore stores its
//! derivatives as a dense window starting at `lo`.

use crate::costmap::Costmap;
use crate::Vec2;

use super::dual::{Dual, MAX_VARS};
use super::{Band, OmniLimits, Pose, TebError, TebWeights, Twist, MIN_DT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Time,
    Obstacle,
    ViaPoint,
    Velocity,
    Acceleration,
    Yaw,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Time => "time",
            BlockKind::Obstacle => "obstacle",
            BlockKind::ViaPoint => "viapoint",
            BlockKind::Velocity => "velocity",
            BlockKind::Acceleration => "acceleration",
            BlockKind::Yaw => "yaw",
        }
    }
}

/// One weighted residual row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub kind: BlockKind,
    /// Pose, interval or via-point index the row belongs to.
    pub index: usize,
    pub value: f64,
    /// First free variable covered by `jac`.
    pub lo: usize,
    pub jac: [f64; MAX_VARS],
}

pub fn num_vars(poses: usize) -> usize {
    4 * poses - 7
}

pub fn pose_var(poses: usize, i: usize, component: usize) -> Option<usize> {
    (i > 0 && i + 1 < poses).then(|| 4 * i - 3 + component)
}

pub fn dt_var(j: usize) -> usize {
    4 * j
}

/// Free variables of `band` in interleaved order.
pub fn read_vars(band: &Band) -> Vec<f64> {
    let n = band.len();
    let mut x = vec![0.0; num_vars(n)];
    for (j, dt) in band.dts.iter().enumerate() {
        x[dt_var(j)] = *dt;
    }
    for i in 1..n - 1 {
        let p = band.poses[i];
        x[4 * i - 3] = p.x;
        x[4 * i - 2] = p.y;
        x[4 * i - 1] = p.theta;
    }
    x
}

/// Band with free variables replaced by `x`; intervals are clamped to
/// [`MIN_DT`] and headings wrapped. Endpoint poses are copied unchanged.
pub fn write_vars(band: &Band, x: &[f64]) -> Band {
    let n = band.len();
    let mut out = band.clone();
    for j in 0..n - 1 {
        out.dts[j] = x[dt_var(j)].max(MIN_DT);
    }
    for i in 1..n - 1 {
        out.poses[i] = Pose::new(x[4 * i - 3], x[4 * i - 2], x[4 * i - 1]);
    }
    out
}

/// Dual-number view of a band restricted to one window of variables.
struct Window<'a> {
    band: &'a Band,
    lo: usize,
}

impl<'a> Window<'a> {
    fn covering(band: &'a Band, vars: impl IntoIterator<Item = Option<usize>>) -> Self {
        let lo = vars.into_iter().flatten().min().unwrap_or(0);
        Self { band, lo }
    }

    fn var(&self, g: Option<usize>, v: f64) -> Dual {
        match g {
            Some(g) => Dual::variable(v, g - self.lo),
            None => Dual::constant(v),
        }
    }

    fn pose(&self, i: usize) -> [Dual; 3] {
        let n = self.band.len();
        let p = self.band.poses[i];
        [self.var(pose_var(n, i, 0), p.x), self.var(pose_var(n, i, 1), p.y), self.var(pose_var(n, i, 2), p.theta)]
    }

    fn dt(&self, j: usize) -> Dual {
        self.var(Some(dt_var(j)), self.band.dts[j])
    }

    /// Body-frame velocity over interval `j` as `[v_x, v_y, omega]`.
    fn velocity(&self, j: usize) -> [Dual; 3] {
        let [x0, y0, t0] = self.pose(j);
        let [x1, y1, t1] = self.pose(j + 1);
        let (dx, dy) = (x1 - x0, y1 - y0);
        let (s, c) = (t0.sin(), t0.cos());
        let dt = self.dt(j);
        [(dx * c + dy * s) / dt, (dy * c - dx * s) / dt, (t1 - t0).wrapped() / dt]
    }

    fn vars_of_interval(n: usize, j: usize) -> impl Iterator<Item = Option<usize>> {
        (0..3).flat_map(move |c| [pose_var(n, j, c), pose_var(n, j + 1, c)]).chain([Some(dt_var(j))])
    }
}

/// Relative limit violation `max(0, q / bound - 1 + eps)`. Normalising by
/// the bound keeps tiny limits (a near-zero lateral speed) as stiff as
/// large ones.
fn limit_penalty(q: Dual, bound: f64, eps: f64) -> Dual {
    (q.scale(1.0 / bound) - 1.0).hinge(eps)
}

/// Everything the objective depends on besides the band itself.
#[derive(Clone, Debug)]
pub struct TebProblem<'a> {
    pub costmap: &'a Costmap,
    pub via_points: Vec<Vec2>,
    pub limits: OmniLimits,
    pub weights: TebWeights,
    /// Body-frame velocity the band must start from, if constrained.
    pub start_velocity: Option<Twist>,
    /// Body-frame velocity the band must end with, if constrained.
    pub goal_velocity: Option<Twist>,
}

impl<'a> TebProblem<'a> {
    pub fn new(costmap: &'a Costmap, limits: OmniLimits, weights: TebWeights) -> Self {
        Self { costmap, via_points: Vec::new(), limits, weights, start_velocity: None, goal_velocity: None }
    }

    pub fn with_via_points(mut self, via: Vec<Vec2>) -> Self {
        self.via_points = via;
        self
    }

    pub fn with_boundary_velocities(mut self, start: Option<Twist>, goal: Option<Twist>) -> Self {
        self.start_velocity = start;
        self.goal_velocity = goal;
        self
    }

    /// Index of the band pose nearest to each via point (first on ties).
    pub fn assign_via_points(&self, band: &Band) -> Vec<usize> {
        self.via_points
            .iter()
            .map(|v| {
                let mut best = (f64::INFINITY, 0);
                for (i, p) in band.poses.iter().enumerate() {
                    let d = (p.position() - v).norm_squared();
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                best.1
            })
            .collect()
    }

    /// Sum of squared residuals.
    pub fn objective(&self, band: &Band, via_assignment: &[usize]) -> Result<f64, TebError> {
        Ok(self.evaluate(band, via_assignment)?.iter().map(|r| r.value * r.value).sum())
    }

    /// All residual rows with their Jacobians. Fails on the first
    /// non-finite value or derivative.
    pub fn evaluate(&self, band: &Band, via_assignment: &[usize]) -> Result<Vec<Residual>, TebError> {
        let n = band.len();
        if n < 2 || band.dts.len() + 1 != n {
            return Err(TebError::Malformed);
        }
        let w = &self.weights;
        let lim = &self.limits;
        let eps = w.penalty_epsilon;
        let mut rows = Vec::with_capacity(20 * n);
        let mut push = |kind: BlockKind, index: usize, lo: usize, r: Dual| -> Result<(), TebError> {
            if !r.v.is_finite() || r.d.iter().any(|d| !d.is_finite()) {
                return Err(TebError::NonFinite { block: kind.name(), index });
            }
            rows.push(Residual { kind, index, value: r.v, lo, jac: r.d });
            Ok(())
        };

        let s_time = w.gamma_time.sqrt();
        for j in 0..n - 1 {
            let win = Window::covering(band, [Some(dt_var(j))]);
            push(BlockKind::Time, j, win.lo, win.dt(j) * s_time)?;
        }

        let s_obs = w.gamma_obstacle.sqrt();
        for i in 1..n - 1 {
            let win = Window::covering(band, (0..3).map(|c| pose_var(n, i, c)));
            let [x, y, _] = win.pose(i);
            let pos = band.poses[i].position();
            let mut q = self.costmap.distance_at(pos);
            if !pos.iter().all(|v| v.is_finite()) {
                q.distance = f64::NAN;
            }
            let dist = if !q.distance.is_infinite() {
                let mut d = Dual::constant(q.distance);
                for k in 0..MAX_VARS {
                    d.d[k] = q.gradient.x * x.d[k] + q.gradient.y * y.d[k];
                }
                d
            } else {
                Dual::constant(q.distance)
            };
            let r = if !q.distance.is_infinite() {
                (-(dist - w.obstacle_min_dist)).hinge(eps) * s_obs
            } else {
                Dual::constant(0.0)
            };
            push(BlockKind::Obstacle, i, win.lo, r)?;
        }

        let s_via = w.gamma_viapoint.sqrt();
        for (k, (v, &i)) in self.via_points.iter().zip(via_assignment).enumerate() {
            let win = Window::covering(band, (0..3).map(|c| pose_var(n, i, c)));
            let [x, y, _] = win.pose(i);
            push(BlockKind::ViaPoint, k, win.lo, (x - v.x) * s_via)?;
            push(BlockKind::ViaPoint, k, win.lo, (y - v.y) * s_via)?;
        }

        let sv = [w.gamma_vel_x.sqrt(), w.gamma_vel_y.sqrt(), w.gamma_vel_theta.sqrt()];
        let upper = [lim.v_x_max, lim.v_y_max, lim.omega_max];
        let lower = [lim.v_x_min, lim.v_y_max, lim.omega_max];
        for j in 0..n - 1 {
            let win = Window::covering(band, Window::vars_of_interval(n, j));
            let v = win.velocity(j);
            for c in 0..3 {
                push(BlockKind::Velocity, j, win.lo, limit_penalty(v[c], upper[c], eps) * sv[c])?;
                push(BlockKind::Velocity, j, win.lo, limit_penalty(-v[c], lower[c], eps) * sv[c])?;
            }
        }

        let s_acc = w.gamma_acc.sqrt();
        let amax = [lim.a_x_max, lim.a_y_max, lim.alpha_max];
        let mut push_acc = |index: usize, lo: usize, a: [Dual; 3]| -> Result<(), TebError> {
            for c in 0..3 {
                push(BlockKind::Acceleration, index, lo, limit_penalty(a[c], amax[c], eps) * s_acc)?;
                push(BlockKind::Acceleration, index, lo, limit_penalty(-a[c], amax[c], eps) * s_acc)?;
            }
            Ok(())
        };
        if let Some(vs) = self.start_velocity {
            let win = Window::covering(band, Window::vars_of_interval(n, 0));
            let v = win.velocity(0);
            let dt = win.dt(0);
            let vs = [vs.v_x, vs.v_y, vs.omega];
            push_acc(0, win.lo, std::array::from_fn(|c| (v[c] - vs[c]) / dt))?;
        }
        for j in 0..n.saturating_sub(2) {
            let win = Window::covering(
                band,
                Window::vars_of_interval(n, j).chain(Window::vars_of_interval(n, j + 1)),
            );
            let (v0, v1) = (win.velocity(j), win.velocity(j + 1));
            let mid = (win.dt(j) + win.dt(j + 1)).scale(0.5);
            push_acc(j, win.lo, std::array::from_fn(|c| (v1[c] - v0[c]) / mid))?;
        }
        if let Some(vg) = self.goal_velocity {
            let j = n - 2;
            let win = Window::covering(band, Window::vars_of_interval(n, j));
            let v = win.velocity(j);
            let dt = win.dt(j);
            let vg = [vg.v_x, vg.v_y, vg.omega];
            push_acc(j + 1, win.lo, std::array::from_fn(|c| (Dual::constant(vg[c]) - v[c]) / dt))?;
        }

        let s_yaw = w.gamma_yaw.sqrt();
        for j in 0..n - 1 {
            let win = Window::covering(band, Window::vars_of_interval(n, j));
            let t0 = win.pose(j)[2];
            let t1 = win.pose(j + 1)[2];
            push(BlockKind::Yaw, j, win.lo, (t1 - t0).wrapped() * s_yaw)?;
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::{InflationParams, OccupancyGrid};
    use crate::teb::tests::random_band;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn open_map() -> Costmap {
        Costmap::new(OccupancyGrid::new(100, 100, 0.1, Vec2::new(-5.0, -5.0)).unwrap(), InflationParams::default())
            .unwrap()
    }

    fn walled_map() -> Costmap {
        let mut g = OccupancyGrid::new(60, 60, 0.1, Vec2::new(-3.0, -3.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..12 {
            let c = Vec2::new(rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5));
            g.stamp_disc(c, rng.gen_range(0.1..0.3));
        }
        Costmap::new(g, InflationParams::default()).unwrap()
    }

    #[test]
    fn layout_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..7 {
            let b = random_band(&mut rng, n);
            let x = read_vars(&b);
            assert_eq!(x.len(), num_vars(n));
            assert_eq!(write_vars(&b, &x), b);
        }
    }

    #[test]
    fn stationary_band_only_pays_for_time() {
        let cm = open_map();
        let p = Pose::new(0.0, 0.0, 0.0);
        let band = Band::new(vec![p; 4], vec![0.3; 3]).unwrap();
        let prob = TebProblem::new(&cm, OmniLimits::default(), TebWeights::default());
        let rows = prob.evaluate(&band, &[]).unwrap();
        for r in &rows {
            if r.kind == BlockKind::Time {
                assert!((r.value - 0.1f64.sqrt() * 0.3).abs() < 1e-15);
            } else {
                assert_eq!(r.value, 0.0, "{:?}", r.kind);
            }
        }
    }

    #[test]
    fn obstacle_residual_at_half_clearance() {
        let mut g = OccupancyGrid::new(40, 40, 0.1, Vec2::zeros()).unwrap();
        g.set(20, 20, true);
        let cm = Costmap::new(g, InflationParams::default()).unwrap();
        let w = TebWeights::default();
        let site = cm.grid().cell_center(20, 20);
        let half = w.obstacle_min_dist / 2.0;
        let band = Band::new(
            vec![Pose::new(0.5, 0.5, 0.0), Pose::new(site.x + half, site.y, 0.0), Pose::new(3.5, 3.5, 0.0)],
            vec![10.0, 10.0],
        )
        .unwrap();
        let rows = TebProblem::new(&cm, OmniLimits::default(), w).evaluate(&band, &[]).unwrap();
        let obs: Vec<_> = rows.iter().filter(|r| r.kind == BlockKind::Obstacle).collect();
        assert_eq!(obs.len(), 1);
        let expect = w.gamma_obstacle.sqrt() * (half + w.penalty_epsilon);
        assert!((obs[0].value - expect).abs() < 1e-12);
    }

    /// Central differences over every free variable, compared entry by
    /// entry with the dual-number Jacobian.
    pub(crate) fn max_jacobian_error(prob: &TebProblem, band: &Band) -> f64 {
        let assign = prob.assign_via_points(band);
        let rows = prob.evaluate(band, &assign).unwrap();
        let x = read_vars(band);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let rp = prob.evaluate(&write_vars(band, &xp), &assign).unwrap();
            let rm = prob.evaluate(&write_vars(band, &xm), &assign).unwrap();
            for (r, (a, b)) in rows.iter().zip(rp.iter().zip(&rm)) {
                let fd = (a.value - b.value) / (2.0 * h);
                let an = if k >= r.lo && k < r.lo + MAX_VARS { r.jac[k - r.lo] } else { 0.0 };
                worst = worst.max((fd - an).abs() / fd.abs().max(1.0));
            }
        }
        worst
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let cm = walled_map();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(2..9);
            let band = random_band(&mut rng, n);
            let via = (0..2).map(|_| Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let prob = TebProblem::new(&cm, OmniLimits::default(), TebWeights::default())
                .with_via_points(via)
                .with_boundary_velocities(Some(Twist::default()), Some(Twist { v_x: 0.2, v_y: 0.0, omega: 0.1 }));
            let e = max_jacobian_error(&prob, &band);
            assert!(e < 1e-4, "n = {n}: {e}");
        }
    }

    #[test]
    fn non_finite_is_reported_by_block() {
        let cm = open_map();
        let band = Band::new(vec![Pose::new(0.0, 0.0, 0.0), Pose::new(f64::NAN, 0.0, 0.0), Pose::new(1.0, 0.0, 0.0)], vec![
            0.3, 0.3,
        ])
        .unwrap();
        let prob = TebProblem::new(&cm, OmniLimits::default(), TebWeights::default());
        let err = prob.evaluate(&band, &[]).unwrap_err();
        assert!(matches!(err, TebError::NonFinite { block: "obstacle", index: 1 }), "{err:?}");
    }
}
