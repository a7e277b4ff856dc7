//! Occupancy grids, obstacle distance fields and inflation costs.
//!
//! A [`Costmap`] is built once from an [`OccupancyGrid`] and is immutable
//! afterwards, so it can be shared across concurrent planner queries.
//!
//! The per-cell cost follows the inscribed/inflation radius profile:
//! `C_max` below the inscribed radius `l1`, an exponential decay
//! `C_max * exp(-lambda_c * (l - l1))` up to the inflation radius `l2`, and
//! zero beyond. The profile is allowed to step down to zero at `l2`.

mod edt;
pub mod pgm;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::Vec2;

pub use pgm::{load_pgm, write_pgm, PgmEncoding, PgmError};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CostmapError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid inflation parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Pgm(#[from] PgmError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Vec2,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    /// An all-free grid.
    pub fn new(width: usize, height: usize, resolution: f64, origin: Vec2) -> Result<Self, CostmapError> {
        Self::from_cells(width, height, resolution, origin, vec![false; width * height])
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Vec2,
        cells: Vec<bool>,
    ) -> Result<Self, CostmapError> {
        if width == 0 || height == 0 {
            return Err(CostmapError::InvalidGrid(format!("size {width}x{height}")));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(CostmapError::InvalidGrid(format!("resolution {resolution}")));
        }
        if cells.len() != width * height {
            return Err(CostmapError::InvalidGrid(format!(
                "{} cells for a {width}x{height} grid",
                cells.len()
            )));
        }
        Ok(Self { width, height, resolution, origin, cells })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn with_origin(mut self, origin: Vec2) -> Self {
        self.origin = origin;
        self
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    pub fn is_occupied(&self, ix: usize, iy: usize) -> bool {
        self.cells[self.index(ix, iy)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, occupied: bool) {
        let i = self.index(ix, iy);
        self.cells[i] = occupied;
    }

    /// Cell containing a world position, or `None` outside the map.
    pub fn world_to_cell(&self, p: Vec2) -> Option<(usize, usize)> {
        let gx = ((p.x - self.origin.x) / self.resolution).floor();
        let gy = ((p.y - self.origin.y) / self.resolution).floor();
        if gx < 0.0 || gy < 0.0 || gx >= self.width as f64 || gy >= self.height as f64 {
            return None;
        }
        Some((gx as usize, gy as usize))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    /// World-space extent `(width_m, height_m)`.
    pub fn extent(&self) -> (f64, f64) {
        (self.width as f64 * self.resolution, self.height as f64 * self.resolution)
    }

    /// Marks every cell whose center lies within `radius` of `center`.
    pub fn stamp_disc(&mut self, center: Vec2, radius: f64) {
        let r = self.resolution;
        let lo_x = (((center.x - radius - self.origin.x) / r).floor() as i64).max(0);
        let hi_x = (((center.x + radius - self.origin.x) / r).ceil() as i64).min(self.width as i64 - 1);
        let lo_y = (((center.y - radius - self.origin.y) / r).floor() as i64).max(0);
        let hi_y = (((center.y + radius - self.origin.y) / r).ceil() as i64).min(self.height as i64 - 1);
        for iy in lo_y..=hi_y {
            for ix in lo_x..=hi_x {
                let c = self.cell_center(ix as usize, iy as usize);
                if (c - center).norm() <= radius {
                    self.set(ix as usize, iy as usize, true);
                }
            }
        }
    }

    /// Marks every cell whose center lies inside the axis-aligned box.
    pub fn fill_rect(&mut self, min: Vec2, max: Vec2) {
        for iy in 0..self.height {
            for ix in 0..self.width {
                let c = self.cell_center(ix, iy);
                if c.x >= min.x && c.x <= max.x && c.y >= min.y && c.y <= max.y {
                    self.set(ix, iy, true);
                }
            }
        }
    }
}

/// Distances this close to the inscribed radius count as inside it, so
/// cells whose center distance rounds just above `l1` keep the full cost.
const INSCRIBED_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InflationParams {
    /// Inscribed radius `l1`, meters.
    #[serde(rename = "inscribed_radius_m")]
    pub inscribed_radius: f64,
    /// Inflation radius `l2`, meters.
    #[serde(rename = "inflation_radius_m")]
    pub inflation_radius: f64,
    /// Exponential decay rate `lambda_c`, 1/m.
    #[serde(rename = "decay_rate_per_m")]
    pub decay_rate: f64,
    pub c_max: f64,
    pub lethal_cost: f64,
}

impl Default for InflationParams {
    fn default() -> Self {
        Self {
            inscribed_radius: 0.3,
            inflation_radius: 1.0,
            decay_rate: 10.0,
            c_max: 100.0,
            lethal_cost: 100.0,
        }
    }
}

impl InflationParams {
    pub fn validate(&self) -> Result<(), CostmapError> {
        let bad = |m: &str| Err(CostmapError::InvalidParams(m.to_owned()));
        if !(self.inscribed_radius > 0.0 && self.inscribed_radius < self.inflation_radius) {
            return bad("require 0 < inscribed_radius < inflation_radius");
        }
        if !(self.decay_rate > 0.0) {
            return bad("require decay_rate > 0");
        }
        if !(self.c_max > 0.0) {
            return bad("require c_max > 0");
        }
        if !(self.lethal_cost > 0.0 && self.lethal_cost <= self.c_max) {
            return bad("require 0 < lethal_cost <= c_max");
        }
        Ok(())
    }

    /// Cost as a function of obstacle distance.
    pub fn cost_for_distance(&self, dist: f64) -> f64 {
        if dist >= self.inflation_radius {
            0.0
        } else if dist > self.inscribed_radius + INSCRIBED_TOL {
            self.c_max * (-self.decay_rate * (dist - self.inscribed_radius)).exp()
        } else {
            self.c_max
        }
    }
}

#[derive(Clone, Debug)]
pub struct Costmap {
    grid: OccupancyGrid,
    params: InflationParams,
    dist: Vec<f64>,
    cost: Vec<f64>,
    site: Vec<u32>,
}

/// Nearest-obstacle distance at a continuous position together with its
/// gradient. `gradient` is zero when the map has no obstacles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceQuery {
    pub distance: f64,
    pub gradient: Vec2,
}

impl Costmap {
    pub fn new(grid: OccupancyGrid, params: InflationParams) -> Result<Self, CostmapError> {
        params.validate()?;
        let (sq, site) = edt::transform(grid.width, grid.height, &grid.cells);
        let r = grid.resolution;
        let dist: Vec<f64> = sq.iter().map(|&d| d.sqrt() * r).collect();
        let cost = dist.iter().map(|&d| params.cost_for_distance(d)).collect();
        Ok(Self { grid, params, dist, cost, site })
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn params(&self) -> &InflationParams {
        &self.params
    }

    pub fn resolution(&self) -> f64 {
        self.grid.resolution
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    /// Row-major cell-center distances in meters (`inf` without obstacles).
    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    pub fn cell_distance(&self, ix: usize, iy: usize) -> f64 {
        self.dist[self.grid.index(ix, iy)]
    }

    pub fn cell_cost(&self, ix: usize, iy: usize) -> f64 {
        self.cost[self.grid.index(ix, iy)]
    }

    pub fn is_cell_lethal(&self, ix: usize, iy: usize) -> bool {
        self.cell_cost(ix, iy) >= self.params.lethal_cost
    }

    /// Same as [`Self::is_cell_lethal`] but accepts signed indices; cells
    /// outside the map are lethal.
    pub fn is_cell_lethal_signed(&self, ix: i64, iy: i64) -> bool {
        if ix < 0 || iy < 0 || ix >= self.grid.width as i64 || iy >= self.grid.height as i64 {
            return true;
        }
        self.is_cell_lethal(ix as usize, iy as usize)
    }

    /// Cost of the containing cell; positions outside the map are lethal.
    pub fn cost_at(&self, p: Vec2) -> f64 {
        match self.grid.world_to_cell(p) {
            Some((ix, iy)) => self.cell_cost(ix, iy),
            None => self.params.lethal_cost,
        }
    }

    /// Inflation cost at the continuous obstacle distance of `p` (see
    /// [`Costmap::distance_at`]). Smooth inside the map, unlike the
    /// cell-quantised [`Costmap::cost_at`].
    pub fn inflation_cost_at(&self, p: Vec2) -> f64 {
        self.params.cost_for_distance(self.distance_at(p).distance)
    }

    pub fn is_lethal(&self, p: Vec2) -> bool {
        self.cost_at(p) >= self.params.lethal_cost
    }

    /// Euclidean distance from `p` to the nearest occupied cell center.
    ///
    /// Candidate sites are the nearest sites of the 3x3 cells around `p`,
    /// so the result is continuous and differentiable away from Voronoi
    /// boundaries. Positions outside the map use the closest border cells.
    pub fn distance_at(&self, p: Vec2) -> DistanceQuery {
        let g = &self.grid;
        let fx = ((p.x - g.origin.x) / g.resolution).floor() as i64;
        let fy = ((p.y - g.origin.y) / g.resolution).floor() as i64;
        let cx = fx.clamp(0, g.width as i64 - 1);
        let cy = fy.clamp(0, g.height as i64 - 1);
        let mut best: Option<(f64, Vec2)> = None;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (ix, iy) = (cx + dx, cy + dy);
                if ix < 0 || iy < 0 || ix >= g.width as i64 || iy >= g.height as i64 {
                    continue;
                }
                let s = self.site[g.index(ix as usize, iy as usize)];
                if s == edt::NO_SITE {
                    continue;
                }
                let (sx, sy) = (s as usize % g.width, s as usize / g.width);
                let d = p - g.cell_center(sx, sy);
                let n2 = d.norm_squared();
                if best.is_none_or(|(b, _)| n2 < b) {
                    best = Some((n2, d));
                }
            }
        }
        match best {
            None => DistanceQuery { distance: f64::INFINITY, gradient: Vec2::zeros() },
            Some((n2, d)) => {
                let n = n2.sqrt();
                let gradient = if n > 0.0 { d / n } else { Vec2::zeros() };
                DistanceQuery { distance: n, gradient }
            }
        }
    }

    /// Writes the distance field as CSV, one grid row per line.
    pub fn write_distance_csv<W: Write>(&self, out: W) -> io::Result<()> {
        write_matrix_csv(out, &self.dist, self.grid.width)
    }

    pub fn write_cost_csv<W: Write>(&self, out: W) -> io::Result<()> {
        write_matrix_csv(out, &self.cost, self.grid.width)
    }
}

fn write_matrix_csv<W: Write>(mut out: W, values: &[f64], width: usize) -> io::Result<()> {
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(|&v| format_sig6(v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// `%g`-style formatting with six significant digits.
pub fn format_sig6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let s = if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let mut s = format!("{v:.decimals$}");
        if s.contains('.') {
            s = s.trim_end_matches('0').trim_end_matches('.').to_owned();
        }
        s
    } else {
        format!("{v:.5e}")
    };
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(grid: &OccupancyGrid) -> Vec<f64> {
        let occ: Vec<(usize, usize)> = (0..grid.height())
            .flat_map(|y| (0..grid.width()).map(move |x| (x, y)))
            .filter(|&(x, y)| grid.is_occupied(x, y))
            .collect();
        let mut out = Vec::new();
        for y in 0..grid.height() {
            for x in 0..grid.width() {
                let best = occ
                    .iter()
                    .map(|&(ox, oy)| {
                        let dx = ox as f64 - x as f64;
                        let dy = oy as f64 - y as f64;
                        (dx * dx + dy * dy).sqrt() * grid.resolution()
                    })
                    .fold(f64::INFINITY, f64::min);
                out.push(best);
            }
        }
        out
    }

    fn grid_from(width: usize, height: usize, cells: Vec<bool>) -> OccupancyGrid {
        OccupancyGrid::from_cells(width, height, 0.1, Vec2::zeros(), cells).unwrap()
    }

    proptest! {
        #[test]
        fn edt_matches_brute_force(
            (w, h, cells) in (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
                (Just(w), Just(h), proptest::collection::vec(proptest::bool::weighted(0.1), w * h))
            })
        ) {
            let grid = grid_from(w, h, cells);
            let cm = Costmap::new(grid.clone(), InflationParams::default()).unwrap();
            prop_assert_eq!(cm.distances().to_vec(), brute_force(&grid));
        }

        #[test]
        fn cost_is_monotone_in_distance(a in 0.0f64..2.0, b in 0.0f64..2.0) {
            let p = InflationParams::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(p.cost_for_distance(lo) >= p.cost_for_distance(hi));
        }
    }

    #[test]
    fn cost_profile_points() {
        let p = InflationParams::default();
        assert_eq!(p.cost_for_distance(p.inscribed_radius), p.c_max);
        assert_eq!(p.cost_for_distance(p.inflation_radius), 0.0);
        assert_eq!(p.cost_for_distance(5.0), 0.0);
        assert_eq!(p.cost_for_distance(0.0), p.c_max);
        let half = p.inscribed_radius + std::f64::consts::LN_2 / p.decay_rate;
        assert!(half < p.inflation_radius);
        assert!((p.cost_for_distance(half) - p.c_max / 2.0).abs() < 1e-12);
        // the value just inside l2 follows the exponential exactly
        let eps = 1e-9;
        let inside = p.cost_for_distance(p.inflation_radius - eps);
        let expected = p.c_max * (-p.decay_rate * (p.inflation_radius - eps - p.inscribed_radius)).exp();
        assert!((inside - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_map_has_infinite_distance_and_zero_cost() {
        let cm = Costmap::new(grid_from(5, 4, vec![false; 20]), InflationParams::default()).unwrap();
        assert!(cm.distances().iter().all(|d| d.is_infinite()));
        assert!(cm.costs().iter().all(|&c| c == 0.0));
        assert_eq!(cm.distance_at(Vec2::new(0.2, 0.2)).distance, f64::INFINITY);
    }

    #[test]
    fn queries() {
        let mut grid = OccupancyGrid::new(40, 40, 0.1, Vec2::new(-1.0, -1.0)).unwrap();
        grid.set(5, 5, true);
        let cm = Costmap::new(grid, InflationParams::default()).unwrap();
        // occupied cell
        let occ = cm.grid().cell_center(5, 5);
        assert_eq!(cm.cost_at(occ), 100.0);
        assert!(cm.is_lethal(occ));
        // far away
        let far = cm.grid().cell_center(35, 35);
        assert_eq!(cm.cost_at(far), 0.0);
        assert!(!cm.is_lethal(far));
        // outside by one cell
        assert_eq!(cm.cost_at(Vec2::new(-1.05, 0.0)), 100.0);
        assert_eq!(cm.cost_at(Vec2::new(0.0, 3.05)), 100.0);
        // exactly l1 away: lethal when lethal_cost = c_max
        let at_l1 = cm.grid().cell_center(8, 5);
        assert!((cm.cell_distance(8, 5) - 0.3).abs() < 1e-12);
        assert!(cm.is_lethal(at_l1));
        // continuous distance and gradient
        let q = cm.distance_at(occ + Vec2::new(0.3, 0.4));
        assert!((q.distance - 0.5).abs() < 1e-12);
        assert!((q.gradient - Vec2::new(0.6, 0.8)).norm() < 1e-12);
    }

    #[test]
    fn invalid_params() {
        let mut p = InflationParams::default();
        p.inflation_radius = 0.2;
        assert!(p.validate().is_err());
        let mut p = InflationParams::default();
        p.lethal_cost = 150.0;
        assert!(p.validate().is_err());
        assert!(OccupancyGrid::new(0, 3, 0.1, Vec2::zeros()).is_err());
        assert!(OccupancyGrid::new(3, 3, 0.0, Vec2::zeros()).is_err());
    }

    #[test]
    fn csv_export() {
        let mut grid = OccupancyGrid::new(3, 2, 0.1, Vec2::zeros()).unwrap();
        grid.set(0, 0, true);
        let cm = Costmap::new(grid, InflationParams::default()).unwrap();
        let mut buf = Vec::new();
        cm.write_distance_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0,0.1,0.2\n0.1,0.141421,0.223607\n");
        assert_eq!(format_sig6(123456789.0), "1.23457e8");
        assert_eq!(format_sig6(f64::INFINITY), "inf");
        assert_eq!(format_sig6(2.0), "2");
    }

    #[test]
    fn stamp_disc_marks_centers_within_radius() {
        let mut grid = OccupancyGrid::new(20, 20, 0.1, Vec2::zeros()).unwrap();
        grid.stamp_disc(Vec2::new(1.0, 1.0), 0.2);
        for iy in 0..20 {
            for ix in 0..20 {
                let inside = (grid.cell_center(ix, iy) - Vec2::new(1.0, 1.0)).norm() <= 0.2;
                assert_eq!(grid.is_occupied(ix, iy), inside);
            }
        }
    }
}
