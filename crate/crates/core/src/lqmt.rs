//! Linear-quadratic minimum-time connection between two double-integrator
//! states, ignoring obstacles and input/velocity bounds.
//!
//! For a fixed duration `T` the effort-optimal connection is a cubic per
//! axis, `p(t) = alpha t^3/6 + beta t^2/2 + v_c t + p_c`. Its effort
//! `J*(T)` plus `rho * T` is minimised over `T` by solving the quartic
//! stationarity condition, which gives the search heuristic.

use crate::primitives::State;
use crate::Vec2;

/// Duration returned for identical boundary states.
pub const DEGENERATE_DURATION: f64 = 1e-3;

/// Reference speed for the golden-section fallback bracket.
const FALLBACK_SPEED: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPair {
    pub current: State,
    pub goal: State,
}

impl BoundaryPair {
    pub fn new(current: State, goal: State) -> Self {
        Self { current, goal }
    }

    fn is_degenerate(&self) -> bool {
        self.current == self.goal
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalConnection {
    pub start: State,
    pub alpha: Vec2,
    pub beta: Vec2,
    pub duration: f64,
    /// `J*(T)`, the integrated squared acceleration.
    pub control_cost: f64,
    /// `J*(T) + rho * T`.
    pub total_cost: f64,
}

impl OptimalConnection {
    pub fn state_at(&self, t: f64) -> State {
        let (t2, t3) = (t * t, t * t * t);
        State {
            pos: self.alpha * (t3 / 6.0) + self.beta * (t2 / 2.0) + self.start.vel * t + self.start.pos,
            vel: self.alpha * (t2 / 2.0) + self.beta * t + self.start.vel,
        }
    }

    pub fn accel_at(&self, t: f64) -> Vec2 {
        self.alpha * t + self.beta
    }

    /// Largest per-axis `|v|` on `[0, T]` (endpoints and the vertex of the
    /// quadratic velocity profile).
    pub fn peak_axis_speed(&self) -> Vec2 {
        let mut peak = Vec2::zeros();
        for d in 0..2 {
            let mut best = self.start.vel[d].abs().max(self.state_at(self.duration).vel[d].abs());
            if self.alpha[d] != 0.0 {
                let tv = -self.beta[d] / self.alpha[d];
                if tv > 0.0 && tv < self.duration {
                    best = best.max(self.state_at(tv).vel[d].abs());
                }
            }
            peak[d] = best;
        }
        peak
    }

    /// Largest per-axis `|a|`; acceleration is affine so endpoints suffice.
    pub fn peak_axis_accel(&self) -> Vec2 {
        let a0 = self.accel_at(0.0);
        let a1 = self.accel_at(self.duration);
        Vec2::new(a0.x.abs().max(a1.x.abs()), a0.y.abs().max(a1.y.abs()))
    }
}

/// Effort-optimal connection for a fixed duration `duration > 0`.
pub fn connection_for_duration(bp: &BoundaryPair, duration: f64, rho: f64) -> OptimalConnection {
    assert!(duration > 0.0, "connection duration must be positive");
    let t = duration;
    let t3 = t * t * t;
    let mut alpha = Vec2::zeros();
    let mut beta = Vec2::zeros();
    let mut cost = 0.0;
    for d in 0..2 {
        let dp = bp.goal.pos[d] - bp.current.pos[d] - bp.current.vel[d] * t;
        let dv = bp.goal.vel[d] - bp.current.vel[d];
        let a = (-12.0 * dp + 6.0 * t * dv) / t3;
        let b = (6.0 * t * dp - 2.0 * t * t * dv) / t3;
        alpha[d] = a;
        beta[d] = b;
        cost += a * a * t3 / 3.0 + a * b * t * t + b * b * t;
    }
    OptimalConnection {
        start: bp.current,
        alpha,
        beta,
        duration,
        control_cost: cost,
        total_cost: cost + rho * duration,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DurationSolution {
    pub duration: f64,
    /// Set when start and goal coincide; `duration` is then
    /// [`DEGENERATE_DURATION`].
    pub degenerate: bool,
}

/// Coefficients of `rho T^4 + a T^2 + b T + c`, the stationarity condition
/// of `J*(T) + rho T` multiplied by `T^4`.
fn stationarity_quartic(bp: &BoundaryPair, rho: f64) -> [f64; 4] {
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for d in 0..2 {
        let dp = bp.goal.pos[d] - bp.current.pos[d];
        let (vc, vg) = (bp.current.vel[d], bp.goal.vel[d]);
        s0 += dp * dp;
        s1 += (vc + vg) * dp;
        s2 += vc * vc + vc * vg + vg * vg;
    }
    [rho, -4.0 * s2, 24.0 * s1, -36.0 * s0]
}

/// Root of `f` on a sign-changing bracket `[lo, hi]` by the Illinois
/// variant of regula falsi.
/// Root of `f` on a sign-changing bracket `[lo, hi]`: Newton steps that
/// fall back to bisection whenever they leave the shrinking bracket.
fn bracketed_root<F, D>(f: &F, df: &D, mut lo: f64, mut hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let lo_negative = f(lo) < 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / df(x);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 1e-15 * x.abs() || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Sign-change roots of `f` on the monotone pieces delimited by `breaks`.
fn roots_on_pieces<F, D>(f: &F, df: &D, breaks: &[f64]) -> Vec<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut roots = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (fa, fb) = (f(a), f(b));
        if fa == 0.0 {
            roots.push(a);
        } else if (fa < 0.0) != (fb < 0.0) && fb != 0.0 {
            roots.push(bracketed_root(f, df, a, b));
        } else if fb == 0.0 {
            roots.push(b);
        }
    }
    roots
}

/// Positive real roots of `rho T^4 + a T^2 + b T + c`.
fn positive_quartic_roots(q: [f64; 4]) -> Vec<f64> {
    let [r, a, b, c] = q;
    let poly = |t: f64| ((r * t * t + a) * t + b) * t + c;
    let dpoly = |t: f64| (4.0 * r * t * t + 2.0 * a) * t + b;
    let ddpoly = |t: f64| 12.0 * r * t * t + 2.0 * a;
    // Fujiwara's bound on the magnitude of every root
    let upper = 2.0 * (a.abs() / r).sqrt().max((b.abs() / r).cbrt()).max((c.abs() / (2.0 * r)).powf(0.25)) + 1e-9;
    let lower = upper * 1e-15;
    // p'' = 12 r t^2 + 2 a has at most one positive root, so p' is
    // monotone on each side of it
    let mut breaks = vec![lower];
    if a < 0.0 {
        let t = (-a / (6.0 * r)).sqrt();
        if t > lower && t < upper {
            breaks.push(t);
        }
    }
    breaks.push(upper);
    let mut crit = roots_on_pieces(&dpoly, &ddpoly, &breaks);
    crit.retain(|&t| t > lower && t < upper);
    let mut pieces = vec![lower];
    pieces.extend(crit);
    pieces.push(upper);
    pieces.sort_by(f64::total_cmp);
    pieces.dedup();
    let mut roots = roots_on_pieces(&poly, &dpoly, &pieces);
    roots.retain(|&t| t > lower);
    roots.dedup();
    roots
}

fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    0.5 * (a + b)
}

/// Duration minimising `J*(T) + rho T`. Ties between stationary points are
/// broken towards the smaller duration.
pub fn optimal_duration(bp: &BoundaryPair, rho: f64) -> DurationSolution {
    assert!(rho > 0.0, "time weight must be positive");
    if bp.is_degenerate() {
        return DurationSolution { duration: DEGENERATE_DURATION, degenerate: true };
    }
    let total = |t: f64| connection_for_duration(bp, t, rho).total_cost;
    let roots = positive_quartic_roots(stationarity_quartic(bp, rho));
    let mut best: Option<(f64, f64)> = None;
    for t in roots {
        let c = total(t);
        if !c.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, bc)| c < bc) {
            best = Some((t, c));
        }
    }
    let duration = match best {
        Some((t, _)) => t,
        None => {
            let dp = (bp.goal.pos - bp.current.pos).norm();
            let ub = 10.0 * (dp / FALLBACK_SPEED + 1.0);
            golden_section(&total, DEGENERATE_DURATION, ub)
        }
    };
    DurationSolution { duration, degenerate: false }
}

/// `min_T J*(T) + rho T`, or only the effort part at the same optimum when
/// `include_time` is false.
pub fn heuristic_value(bp: &BoundaryPair, rho: f64, include_time: bool) -> f64 {
    let sol = optimal_duration(bp, rho);
    if sol.degenerate {
        return if include_time { rho * sol.duration } else { 0.0 };
    }
    let c = connection_for_duration(bp, sol.duration, rho);
    if include_time {
        c.total_cost
    } else {
        c.control_cost
    }
}

/// `min J*(T) + rho T` over `T >= min_duration`.
///
/// When every admissible trajectory between the two states lasts at least
/// `min_duration` (for instance because of a velocity bound), this is a
/// tighter lower bound than [`heuristic`]. The objective grows without
/// bound in `T`, so the minimum sits at a stationary point beyond the
/// bound or at the bound itself.
pub fn bounded_heuristic(bp: &BoundaryPair, rho: f64, min_duration: f64) -> f64 {
    if bp.is_degenerate() || min_duration <= 0.0 {
        return heuristic(bp, rho);
    }
    let total = |t: f64| connection_for_duration(bp, t, rho).total_cost;
    positive_quartic_roots(stationarity_quartic(bp, rho))
        .into_iter()
        .filter(|&t| t > min_duration)
        .map(total)
        .fold(total(min_duration), f64::min)
}

/// The admissible search heuristic, `J*(T_h) + rho T_h`.
pub fn heuristic(bp: &BoundaryPair, rho: f64) -> f64 {
    heuristic_value(bp, rho, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng) -> State {
        State::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    /// Composite Simpson integral of the cubic's squared acceleration.
    fn numeric_effort(c: &OptimalConnection, n: usize) -> f64 {
        let h = c.duration / n as f64;
        let f = |t: f64| c.accel_at(t).norm_squared();
        let mut s = f(0.0) + f(c.duration);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    fn scan_argmin(bp: &BoundaryPair, rho: f64, hi: f64, step: f64) -> (f64, f64) {
        let mut best = (f64::NAN, f64::INFINITY);
        let mut t = step;
        while t <= hi {
            let c = connection_for_duration(bp, t, rho).total_cost;
            if c < best.1 {
                best = (t, c);
            }
            t += step;
        }
        best
    }

    #[test]
    fn coasting_goal_has_zero_effort() {
        let cur = State::new(1.0, 2.0, 0.5, -0.25);
        let goal = State { pos: cur.pos + cur.vel * 2.0, vel: cur.vel };
        let c = connection_for_duration(&BoundaryPair::new(cur, goal), 2.0, 1.0);
        assert!(c.alpha.norm() < 1e-12 && c.beta.norm() < 1e-12);
        assert!(c.control_cost.abs() < 1e-12);
    }

    #[test]
    fn rest_to_rest_effort() {
        let bp = BoundaryPair::new(State::new(0.0, 0.0, 0.0, 0.0), State::new(1.0, 0.0, 0.0, 0.0));
        let c = connection_for_duration(&bp, 2.0, 1.0);
        assert!((c.control_cost - 1.5).abs() < 1e-12);
        assert!((numeric_effort(&c, 2000) - 1.5).abs() < 1e-10);
    }

    #[test]
    fn boundary_conditions_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let bp = BoundaryPair::new(random_state(&mut rng), random_state(&mut rng));
            let t = rng.gen_range(0.2..10.0);
            let c = connection_for_duration(&bp, t, 1.0);
            let end = c.state_at(t);
            assert!((end.pos - bp.goal.pos).norm() < 1e-9);
            assert!((end.vel - bp.goal.vel).norm() < 1e-9);
            assert_eq!(c.state_at(0.0), bp.current);
        }
    }

    #[test]
    fn rest_to_rest_optimal_duration() {
        let bp = BoundaryPair::new(State::new(0.0, 0.0, 0.0, 0.0), State::new(1.0, 0.0, 0.0, 0.0));
        let sol = optimal_duration(&bp, 1.0);
        // oracle: scan cost(T) over (0, 20] with step 1e-4
        let (t_scan, c_scan) = scan_argmin(&bp, 1.0, 20.0, 1e-4);
        assert!((sol.duration - t_scan).abs() < 1e-3);
        assert!((sol.duration - 36f64.powf(0.25)).abs() < 1e-9);
        let h = heuristic(&bp, 1.0);
        assert!((h - c_scan).abs() < 1e-6);
        assert!((h - 8.0 / 6f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn coasting_goal_heuristic_is_bounded_by_coast_time() {
        // p: 0 -> 1 at constant unit speed. The coast takes 1 s at zero
        // effort, but a slightly shorter connection trades a little effort
        // for less time, so h < rho * T0 and T_h < T0.
        let bp = BoundaryPair::new(State::new(0.0, 0.0, 1.0, 0.0), State::new(1.0, 0.0, 1.0, 0.0));
        let sol = optimal_duration(&bp, 1.0);
        let (t_scan, c_scan) = scan_argmin(&bp, 1.0, 5.0, 1e-5);
        assert!((sol.duration - t_scan).abs() < 1e-3);
        assert!(sol.duration < 1.0);
        let h = heuristic(&bp, 1.0);
        assert!(h <= 1.0);
        assert!((h - c_scan).abs() < 1e-8);
        // with a vanishing time weight the coast is recovered
        let rho = 1e-6;
        let sol = optimal_duration(&bp, rho);
        assert!((sol.duration - 1.0).abs() < 1e-2);
    }

    #[test]
    fn degenerate_identical_states() {
        let s = State::new(1.0, 1.0, 0.3, 0.0);
        let bp = BoundaryPair::new(s, s);
        let sol = optimal_duration(&bp, 1.0);
        assert!(sol.degenerate);
        assert_eq!(sol.duration, DEGENERATE_DURATION);
        assert!(heuristic(&bp, 1.0) <= DEGENERATE_DURATION + 1e-15);
    }

    #[test]
    fn same_position_different_velocity() {
        let bp = BoundaryPair::new(State::new(0.0, 0.0, 0.5, 0.0), State::new(0.0, 0.0, -0.5, 0.0));
        let sol = optimal_duration(&bp, 1.0);
        let (t_scan, _) = scan_argmin(&bp, 1.0, 10.0, 1e-4);
        assert!(!sol.degenerate);
        assert!((sol.duration - t_scan).abs() < 1e-3);
    }

    #[test]
    fn farther_goal_costs_more() {
        for d in [0.5, 1.0, 2.0, 4.0] {
            let a = heuristic(&BoundaryPair::new(State::new(0.0, 0.0, 0.0, 0.0), State::new(d, d / 2.0, 0.0, 0.0)), 1.0);
            let b = heuristic(&BoundaryPair::new(State::new(0.0, 0.0, 0.0, 0.0), State::new(2.0 * d, d, 0.0, 0.0)), 1.0);
            assert!(b > a);
        }
    }

    #[test]
    fn axis_separability() {
        let x_only = BoundaryPair::new(State::new(0.0, 0.0, 0.2, 0.0), State::new(3.0, 0.0, -0.1, 0.0));
        let shifted = BoundaryPair::new(State::new(0.0, 7.0, 0.2, 0.0), State::new(3.0, 7.0, -0.1, 0.0));
        assert!((heuristic(&x_only, 1.0) - heuristic(&shifted, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn effort_only_variant_is_smaller() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let bp = BoundaryPair::new(random_state(&mut rng), random_state(&mut rng));
            assert!(heuristic_value(&bp, 1.0, false) < heuristic_value(&bp, 1.0, true));
        }
    }

    #[test]
    fn bounded_variant_matches_constrained_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let bp = BoundaryPair::new(random_state(&mut rng), random_state(&mut rng));
            let rho = rng.gen_range(0.2..3.0);
            let t_min = rng.gen_range(0.0..8.0);
            let b = bounded_heuristic(&bp, rho, t_min);
            assert!(b >= heuristic(&bp, rho) - 1e-9);
            let mut scan = f64::INFINITY;
            let mut t = t_min.max(1e-3);
            while t < 60.0 {
                scan = scan.min(connection_for_duration(&bp, t, rho).total_cost);
                t += 1e-3;
            }
            assert!(b <= scan + 1e-9, "{b} vs {scan}");
            assert!(b >= scan - 1e-2 * scan.max(1.0), "{b} vs {scan}");
        }
    }

    #[test]
    fn peak_speed_and_accel() {
        let bp = BoundaryPair::new(State::new(0.0, 0.0, 0.0, 0.0), State::new(1.0, 0.0, 0.0, 0.0));
        let c = connection_for_duration(&bp, 2.0, 1.0);
        // rest to rest: peak speed 1.5 d / T, peak acceleration 6 d / T^2
        assert!((c.peak_axis_speed().x - 0.75).abs() < 1e-12);
        assert!((c.peak_axis_accel().x - 1.5).abs() < 1e-12);
    }
}
