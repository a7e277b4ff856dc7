//! Constant-acceleration motion primitives of the planar double integrator.
//!
//! Within a primitive the input is held constant, so position is the exact
//! quadratic `p(t) = p0 + v0 t + u t^2 / 2` per axis and velocity is affine.

use serde::{Deserialize, Serialize};

use crate::costmap::Costmap;
use crate::Vec2;

/// Slack allowed on velocity/input bounds to absorb rounding.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct State {
    pub pos: Vec2,
    pub vel: Vec2,
}

impl State {
    pub fn new(px: f64, py: f64, vx: f64, vy: f64) -> Self {
        Self { pos: Vec2::new(px, py), vel: Vec2::new(vx, vy) }
    }

    pub fn at_rest(pos: Vec2) -> Self {
        Self { pos, vel: Vec2::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.pos.iter().chain(self.vel.iter()).all(|v| v.is_finite())
    }
}

/// Constant acceleration applied over one primitive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlInput(pub Vec2);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinoLimits {
    /// Per-axis acceleration bound, m/s^2.
    #[serde(rename = "u_max_mps2")]
    pub u_max: f64,
    /// Per-axis velocity bound, m/s.
    #[serde(rename = "v_max_mps")]
    pub v_max: f64,
}

impl Default for KinoLimits {
    fn default() -> Self {
        Self { u_max: 1.0, v_max: 0.75 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionPrimitive {
    pub start: State,
    pub input: ControlInput,
    pub duration: f64,
}

impl MotionPrimitive {
    pub fn new(start: State, input: ControlInput, duration: f64) -> Self {
        Self { start, input, duration }
    }

    pub fn state_at(&self, t: f64) -> State {
        propagate(&self.start, &self.input, t)
    }

    pub fn end_state(&self) -> State {
        self.state_at(self.duration)
    }

    /// Upper bound of the speed norm over the primitive. `|v(t)|^2` is a
    /// convex quadratic in `t`, so the peak sits at an endpoint.
    pub fn peak_speed(&self) -> f64 {
        self.start.vel.norm().max(self.end_state().vel.norm())
    }
}

/// The `(2 mu + 1)^2` lattice of constant inputs, ordered by `ux` then `uy`
/// ascending.
pub fn control_lattice(u_max: f64, mu: u32) -> Vec<ControlInput> {
    assert!(mu >= 1, "lattice needs at least one sample per half-axis");
    let m = mu as i64;
    let levels: Vec<f64> = (-m..=m).map(|k| k as f64 / m as f64 * u_max).collect();
    let mut out = Vec::with_capacity(levels.len() * levels.len());
    for &ux in &levels {
        for &uy in &levels {
            out.push(ControlInput(Vec2::new(ux, uy)));
        }
    }
    out
}

pub fn propagate(x0: &State, u: &ControlInput, t: f64) -> State {
    State {
        pos: x0.pos + x0.vel * t + u.0 * (0.5 * t * t),
        vel: x0.vel + u.0 * t,
    }
}

/// `(|u|^2 + rho) * tau`: control effort plus weighted duration.
pub fn primitive_cost(u: &ControlInput, tau: f64, rho: f64) -> f64 {
    (u.0.norm_squared() + rho) * tau
}

/// Per-axis velocity and input bounds hold over the whole primitive.
/// Velocity is affine in time, so checking both endpoints is exact.
pub fn dynamic_feasible(mp: &MotionPrimitive, lim: &KinoLimits) -> bool {
    let within = |v: Vec2, bound: f64| v.x.abs() <= bound + BOUND_TOL && v.y.abs() <= bound + BOUND_TOL;
    within(mp.input.0, lim.u_max) && within(mp.start.vel, lim.v_max) && within(mp.end_state().vel, lim.v_max)
}

/// Number of sampling intervals so adjacent samples along a path of the
/// given duration and speed bound are at most `resolution` apart.
pub fn sample_intervals(duration: f64, speed_bound: f64, resolution: f64) -> usize {
    ((duration * speed_bound / resolution).ceil() as usize).max(1)
}

/// Checks samples `p(t_i)`, `t_i = i * duration / n` (endpoints included),
/// plus every grid cell crossed by the chord between consecutive samples.
pub fn path_collision_free<F>(position: F, duration: f64, intervals: usize, cm: &Costmap) -> bool
where
    F: Fn(f64) -> Vec2,
{
    let mut prev = position(0.0);
    if cm.is_lethal(prev) {
        return false;
    }
    for i in 1..=intervals {
        let t = duration * i as f64 / intervals as f64;
        let p = position(t);
        if cm.is_lethal(p) || !segment_clear(cm, prev, p) {
            return false;
        }
        prev = p;
    }
    true
}

/// Hard collision check: no sample (spaced at most one resolution apart)
/// and no chord cell between samples is lethal.
pub fn collision_free(mp: &MotionPrimitive, cm: &Costmap, lim: &KinoLimits) -> bool {
    let speed = lim.v_max.max(mp.peak_speed());
    let n = sample_intervals(mp.duration, speed, cm.resolution());
    path_collision_free(|t| mp.state_at(t).pos, mp.duration, n, cm)
}

/// Walks the grid cells crossed by the segment `a -> b` and reports whether
/// none of them is lethal.
pub fn segment_clear(cm: &Costmap, a: Vec2, b: Vec2) -> bool {
    let g = cm.grid();
    let r = g.resolution();
    let o = g.origin();
    let (ax, ay) = ((a.x - o.x) / r, (a.y - o.y) / r);
    let (bx, by) = ((b.x - o.x) / r, (b.y - o.y) / r);
    let (mut ix, mut iy) = (ax.floor() as i64, ay.floor() as i64);
    let (ex, ey) = (bx.floor() as i64, by.floor() as i64);
    let (dx, dy) = (bx - ax, by - ay);
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    let t_delta_x = if dx != 0.0 { (1.0 / dx).abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { (1.0 / dy).abs() } else { f64::INFINITY };
    let mut t_max_x = if dx > 0.0 {
        (ix as f64 + 1.0 - ax) / dx
    } else if dx < 0.0 {
        (ax - ix as f64) / -dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        (iy as f64 + 1.0 - ay) / dy
    } else if dy < 0.0 {
        (ay - iy as f64) / -dy
    } else {
        f64::INFINITY
    };
    let max_steps = (ix - ex).abs() + (iy - ey).abs() + 2;
    for _ in 0..=max_steps {
        if cm.is_cell_lethal_signed(ix, iy) {
            return false;
        }
        if ix == ex && iy == ey {
            return true;
        }
        if t_max_x < t_max_y {
            if t_max_x > 1.0 {
                break;
            }
            ix += step_x;
            t_max_x += t_delta_x;
        } else {
            if t_max_y > 1.0 {
                break;
            }
            iy += step_y;
            t_max_y += t_delta_y;
        }
    }
    !cm.is_cell_lethal_signed(ex, ey)
}

/// Trapezoid-rule approximation of `int F(s) ds` along a sampled path
/// with `samples` points (endpoints included) spaced `duration / (samples-1)`.
/// `F` is the inflation cost at the continuous obstacle distance.
pub fn soft_cost_along<F>(state: F, duration: f64, samples: usize, cm: &Costmap) -> f64
where
    F: Fn(f64) -> State,
{
    debug_assert!(samples >= 2);
    let dt = duration / (samples - 1) as f64;
    let mut sum = 0.0;
    for i in 0..samples {
        let s = state(i as f64 * dt);
        let w = if i == 0 || i + 1 == samples { 0.5 } else { 1.0 };
        sum += w * cm.inflation_cost_at(s.pos) * s.vel.norm();
    }
    sum * dt
}

/// Number of soft-cost samples: `max(2, ceil(v_max * tau / R))`.
pub fn soft_cost_samples(duration: f64, v_max: f64, resolution: f64) -> usize {
    ((v_max * duration / resolution).ceil() as usize).max(2)
}

/// Discretised line integral of the inflation cost along a primitive.
pub fn soft_cost(mp: &MotionPrimitive, cm: &Costmap, lim: &KinoLimits) -> f64 {
    let n = soft_cost_samples(mp.duration, lim.v_max, cm.resolution());
    soft_cost_along(|t| mp.state_at(t), mp.duration, n, cm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::{InflationParams, OccupancyGrid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rk4(x0: &State, u: Vec2, t: f64, steps: usize) -> State {
        // state [px, py, vx, vy], xdot = A x + B u
        let f = |x: [f64; 4]| [x[2], x[3], u.x, u.y];
        let mut x = [x0.pos.x, x0.pos.y, x0.vel.x, x0.vel.y];
        let h = t / steps as f64;
        let add = |a: [f64; 4], b: [f64; 4], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]];
        for _ in 0..steps {
            let k1 = f(x);
            let k2 = f(add(x, k1, h / 2.0));
            let k3 = f(add(x, k2, h / 2.0));
            let k4 = f(add(x, k3, h));
            for i in 0..4 {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        State::new(x[0], x[1], x[2], x[3])
    }

    fn empty_costmap(w: usize, h: usize, r: f64) -> Costmap {
        Costmap::new(OccupancyGrid::new(w, h, r, Vec2::zeros()).unwrap(), InflationParams::default()).unwrap()
    }

    #[test]
    fn lattice_shapes() {
        let l1 = control_lattice(1.0, 1);
        assert_eq!(l1.len(), 9);
        let vals: Vec<(f64, f64)> = l1.iter().map(|u| (u.0.x, u.0.y)).collect();
        assert_eq!(vals[0], (-1.0, -1.0));
        assert_eq!(vals[1], (-1.0, 0.0));
        assert_eq!(vals[8], (1.0, 1.0));
        let l2 = control_lattice(1.0, 2);
        assert_eq!(l2.len(), 25);
        assert!(l2.iter().any(|u| u.0 == Vec2::new(-0.5, 0.5)));
        for mu in 1..5 {
            let l = control_lattice(0.7, mu);
            assert_eq!(l.len(), ((2 * mu + 1) * (2 * mu + 1)) as usize);
            for u in &l {
                assert!(l.iter().any(|w| w.0 == -u.0));
            }
        }
    }

    #[test]
    fn propagate_examples() {
        let s = propagate(&State::new(0.0, 0.0, 1.0, 0.0), &ControlInput(Vec2::zeros()), 0.5);
        assert_eq!(s, State::new(0.5, 0.0, 1.0, 0.0));
        let s = propagate(&State::new(0.0, 0.0, 0.0, 0.0), &ControlInput(Vec2::new(1.0, 0.0)), 1.0);
        assert_eq!(s, State::new(0.5, 0.0, 1.0, 0.0));
    }

    #[test]
    fn propagate_matches_rk4() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x0 = State::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let u = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let t = rng.gen_range(0.0..2.0);
            let a = propagate(&x0, &ControlInput(u), t);
            let b = rk4(&x0, u, t, 64);
            assert!((a.pos - b.pos).norm() < 1e-9 && (a.vel - b.vel).norm() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn propagate_semigroup(px in -10.0..10.0f64, vx in -1.0..1.0f64, vy in -1.0..1.0f64,
                               ux in -1.0..1.0f64, uy in -1.0..1.0f64, s in 0.0..2.0f64, t in 0.0..2.0f64) {
            let x = State::new(px, -px, vx, vy);
            let u = ControlInput(Vec2::new(ux, uy));
            let a = propagate(&propagate(&x, &u, s), &u, t);
            let b = propagate(&x, &u, s + t);
            prop_assert!((a.pos - b.pos).norm() < 1e-12 * (1.0 + b.pos.norm()) + 1e-12);
            prop_assert!((a.vel - b.vel).norm() < 1e-12);
        }

        #[test]
        fn propagate_translation_equivariant(dx in -10.0..10.0f64, dy in -10.0..10.0f64,
                                              vx in -1.0..1.0f64, ux in -1.0..1.0f64, t in 0.0..2.0f64) {
            let x = State::new(0.3, 0.1, vx, 0.2);
            let u = ControlInput(Vec2::new(ux, -ux));
            let shift = Vec2::new(dx, dy);
            let a = propagate(&State { pos: x.pos + shift, vel: x.vel }, &u, t);
            let b = propagate(&x, &u, t);
            prop_assert!((a.pos - (b.pos + shift)).norm() < 1e-12 * (1.0 + shift.norm()));
        }

        #[test]
        fn primitive_cost_lower_bound(ux in -1.0..1.0f64, uy in -1.0..1.0f64, tau in 0.01..2.0f64, rho in 0.0..5.0f64) {
            let u = ControlInput(Vec2::new(ux, uy));
            let c = primitive_cost(&u, tau, rho);
            prop_assert!(c >= rho * tau);
            if ux != 0.0 || uy != 0.0 {
                prop_assert!(c > rho * tau);
            }
        }
    }

    #[test]
    fn primitive_cost_examples() {
        assert_eq!(primitive_cost(&ControlInput(Vec2::zeros()), 0.5, 1.0), 0.5);
        assert_eq!(primitive_cost(&ControlInput(Vec2::new(1.0, 1.0)), 0.5, 1.0), 1.5);
        assert_eq!(primitive_cost(&ControlInput(Vec2::new(1.0, 1.0)), 0.5, 0.0), 1.0);
        assert_eq!(primitive_cost(&ControlInput(Vec2::zeros()), 0.5, 0.0), 0.0);
    }

    #[test]
    fn dynamic_feasible_examples() {
        let lim = KinoLimits { u_max: 1.0, v_max: 0.5 };
        let mp = MotionPrimitive::new(State::new(0.0, 0.0, 0.5, 0.0), ControlInput(Vec2::new(-1.0, 0.0)), 1.0);
        assert!(dynamic_feasible(&mp, &lim));
        let lim = KinoLimits { u_max: 1.0, v_max: 0.75 };
        let mp = MotionPrimitive::new(State::new(0.0, 0.0, 0.5, 0.0), ControlInput(Vec2::new(1.0, 0.0)), 1.0);
        assert!(!dynamic_feasible(&mp, &lim));
        let mp = MotionPrimitive::new(State::new(0.0, 0.0, 0.0, 0.0), ControlInput(Vec2::new(1.5, 0.0)), 0.1);
        assert!(!dynamic_feasible(&mp, &lim));
    }

    #[test]
    fn dynamic_feasible_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lim = KinoLimits { u_max: 1.0, v_max: 0.75 };
        let mut disagreements = 0;
        for _ in 0..1000 {
            let x0 = State::new(0.0, 0.0, rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8));
            let u = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let mp = MotionPrimitive::new(x0, ControlInput(u), rng.gen_range(0.1..1.5));
            let oracle = (0..=10_000).all(|k| {
                let v = mp.state_at(mp.duration * k as f64 / 10_000.0).vel;
                v.x.abs() <= lim.v_max + BOUND_TOL && v.y.abs() <= lim.v_max + BOUND_TOL
            });
            if oracle != dynamic_feasible(&mp, &lim) {
                disagreements += 1;
            }
        }
        assert_eq!(disagreements, 0);
    }

    #[test]
    fn collision_examples() {
        let lim = KinoLimits::default();
        let cm = empty_costmap(100, 100, 0.05);
        let mp = MotionPrimitive::new(State::new(2.0, 2.0, 0.5, 0.2), ControlInput(Vec2::new(0.5, -0.5)), 0.5);
        assert!(collision_free(&mp, &cm, &lim));

        let mut grid = OccupancyGrid::new(100, 100, 0.05, Vec2::zeros()).unwrap();
        // occupied column at x in [2.5, 2.55): the primitive below crosses it
        for iy in 0..100 {
            grid.set(50, iy, true);
        }
        let cm = Costmap::new(grid, InflationParams::default()).unwrap();
        let mp = MotionPrimitive::new(State::new(2.3, 2.0, 0.5, 0.0), ControlInput(Vec2::new(1.0, 0.0)), 0.5);
        assert!(!collision_free(&mp, &cm, &lim));
        // leaving the map is a collision
        let cm = empty_costmap(20, 20, 0.05);
        let mp = MotionPrimitive::new(State::new(0.9, 0.5, 0.75, 0.0), ControlInput(Vec2::zeros()), 0.5);
        assert!(!collision_free(&mp, &cm, &lim));
    }

    fn random_map(rng: &mut ChaCha8Rng, n: usize, r: f64, density: f64) -> OccupancyGrid {
        let mut grid = OccupancyGrid::new(n, n, r, Vec2::zeros()).unwrap();
        for iy in 0..n {
            for ix in 0..n {
                if rng.gen_bool(density) {
                    grid.set(ix, iy, true);
                }
            }
        }
        grid
    }

    #[test]
    fn collision_free_agrees_with_oversampled_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lim = KinoLimits::default();
        let params = InflationParams { inscribed_radius: 0.15, inflation_radius: 0.5, ..Default::default() };
        let mut compared = 0;
        for _ in 0..40 {
            let grid = random_map(&mut rng, 40, 0.1, 0.02);
            let cm = Costmap::new(grid, params).unwrap();
            for _ in 0..50 {
                let x0 = State::new(rng.gen_range(0.5..3.5), rng.gen_range(0.5..3.5), rng.gen_range(-0.75..0.75), rng.gen_range(-0.75..0.75));
                let u = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let mp = MotionPrimitive::new(x0, ControlInput(u), 0.5);
                let fine = 10 * sample_intervals(mp.duration, lim.v_max.max(mp.peak_speed()), cm.resolution());
                // margin guard: every oracle sample is well inside or well
                // outside the lethal set
                let clear_margin = (0..=fine).all(|k| {
                    let p = mp.state_at(mp.duration * k as f64 / fine as f64).pos;
                    let d = cm.distance_at(p).distance;
                    (d - params.inscribed_radius).abs() >= cm.resolution() / 2.0 + cm.resolution()
                });
                if !clear_margin {
                    continue;
                }
                let oracle = (0..=fine).all(|k| !cm.is_lethal(mp.state_at(mp.duration * k as f64 / fine as f64).pos));
                assert_eq!(oracle, collision_free(&mp, &cm, &lim));
                compared += 1;
            }
        }
        assert!(compared > 200, "only {compared} guarded cases");
    }

    #[test]
    fn collision_free_is_monotone_in_obstacles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lim = KinoLimits::default();
        for _ in 0..30 {
            let grid = random_map(&mut rng, 40, 0.1, 0.01);
            let mut more = grid.clone();
            for _ in 0..10 {
                more.set(rng.gen_range(0..40), rng.gen_range(0..40), true);
            }
            let a = Costmap::new(grid, InflationParams::default()).unwrap();
            let b = Costmap::new(more, InflationParams::default()).unwrap();
            for _ in 0..50 {
                let x0 = State::new(rng.gen_range(0.5..3.5), rng.gen_range(0.5..3.5), rng.gen_range(-0.75..0.75), 0.0);
                let mp = MotionPrimitive::new(x0, ControlInput(Vec2::new(rng.gen_range(-1.0..1.0), 0.3)), 0.5);
                if collision_free(&mp, &b, &lim) {
                    assert!(collision_free(&mp, &a, &lim));
                }
            }
        }
    }

    #[test]
    fn soft_cost_zero_cases() {
        let lim = KinoLimits::default();
        let cm = empty_costmap(100, 100, 0.05);
        let mp = MotionPrimitive::new(State::new(2.0, 2.0, 0.5, 0.0), ControlInput(Vec2::new(0.5, 0.5)), 0.5);
        assert_eq!(soft_cost(&mp, &cm, &lim), 0.0);
        let mut grid = OccupancyGrid::new(100, 100, 0.05, Vec2::zeros()).unwrap();
        grid.set(42, 40, true);
        let cm = Costmap::new(grid, InflationParams::default()).unwrap();
        let still = MotionPrimitive::new(State::new(2.0, 2.0, 0.0, 0.0), ControlInput(Vec2::zeros()), 0.5);
        assert!(cm.cost_at(still.start.pos) > 0.0);
        assert_eq!(soft_cost(&still, &cm, &lim), 0.0);
    }

    fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
        }
        rec(f, a, b, fa, fm, fb, whole, eps, depth)
    }

    #[test]
    fn soft_cost_matches_quadrature_oracle() {
        // a wall along x = 0; primitives cross the inflation band obliquely
        let mut grid = OccupancyGrid::new(120, 120, 0.05, Vec2::new(-1.0, -3.0)).unwrap();
        for iy in 0..120 {
            grid.set(20, iy, true);
        }
        let cm = Costmap::new(grid, InflationParams::default()).unwrap();
        let lim = KinoLimits::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut checked = 0;
        while checked < 50 {
            let x0 = State::new(rng.gen_range(0.4..1.2), rng.gen_range(-1.0..1.0), rng.gen_range(-0.75..0.75), rng.gen_range(-0.75..0.75));
            let mp = MotionPrimitive::new(x0, ControlInput(Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))), 0.5);
            let n = soft_cost_samples(mp.duration, lim.v_max, cm.resolution());
            let integrand = |t: f64| {
                let s = mp.state_at(t);
                cm.inflation_cost_at(s.pos) * s.vel.norm()
            };
            let oracle = adaptive_simpson(&integrand, 0.0, mp.duration, 1e-9, 30);
            if n < 4 || oracle < 1.0 {
                continue;
            }
            let approx = soft_cost(&mp, &cm, &lim);
            assert!((approx - oracle).abs() <= 0.1 * oracle, "approx {approx} oracle {oracle}");
            checked += 1;
        }
    }

    #[test]
    fn soft_cost_scales_with_c_max() {
        let mut grid = OccupancyGrid::new(80, 80, 0.05, Vec2::zeros()).unwrap();
        grid.set(40, 40, true);
        let lim = KinoLimits::default();
        let base = InflationParams::default();
        let scaled = InflationParams { c_max: 300.0, lethal_cost: 300.0, ..base };
        let a = Costmap::new(grid.clone(), base).unwrap();
        let b = Costmap::new(grid, scaled).unwrap();
        let mp = MotionPrimitive::new(State::new(1.5, 1.8, 0.6, 0.1), ControlInput(Vec2::new(0.5, 0.5)), 0.5);
        let (ca, cb) = (soft_cost(&mp, &a, &lim), soft_cost(&mp, &b, &lim));
        assert!(ca > 0.0);
        assert!((cb - 3.0 * ca).abs() < 1e-9 * cb);
    }
}
