//! Seeded random maps and endpoint sampling for tests and benchmarks.

use rand::Rng;

use crate::costmap::{Costmap, OccupancyGrid};
use crate::Vec2;

/// Star-shaped polygon: vertices at sorted random angles around a center.
pub fn random_polygon<R: Rng>(rng: &mut R, center: Vec2, r_min: f64, r_max: f64, vertices: usize) -> Vec<Vec2> {
    let mut angles: Vec<f64> = (0..vertices).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles
        .into_iter()
        .map(|a| {
            let r = rng.gen_range(r_min..r_max);
            center + Vec2::new(a.cos(), a.sin()) * r
        })
        .collect()
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Marks every cell whose center lies inside `poly`.
pub fn fill_polygon(grid: &mut OccupancyGrid, poly: &[Vec2]) {
    let (lo, hi) = poly.iter().fold((Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY)), |(lo, hi), p| {
        (lo.inf(p), hi.sup(p))
    });
    let (r, o) = (grid.resolution(), grid.origin());
    let ix0 = (((lo.x - o.x) / r).floor().max(0.0)) as usize;
    let iy0 = (((lo.y - o.y) / r).floor().max(0.0)) as usize;
    let ix1 = (((hi.x - o.x) / r).ceil().max(0.0) as usize).min(grid.width());
    let iy1 = (((hi.y - o.y) / r).ceil().max(0.0) as usize).min(grid.height());
    for iy in iy0..iy1 {
        for ix in ix0..ix1 {
            if point_in_polygon(grid.cell_center(ix, iy), poly) {
                grid.set(ix, iy, true);
            }
        }
    }
}

/// Irregular polygon obstacles scattered over a `size_m` square map.
pub fn polygon_map<R: Rng>(rng: &mut R, size_m: f64, resolution: f64, obstacles: usize) -> OccupancyGrid {
    let n = (size_m / resolution).round() as usize;
    let mut grid = OccupancyGrid::new(n, n, resolution, Vec2::zeros()).expect("positive map size");
    for _ in 0..obstacles {
        let c = Vec2::new(rng.gen_range(1.0..size_m - 1.0), rng.gen_range(1.0..size_m - 1.0));
        let r_max = rng.gen_range(0.8..2.5);
        let k = rng.gen_range(5..9);
        let poly = random_polygon(rng, c, 0.4 * r_max, r_max, k);
        fill_polygon(&mut grid, &poly);
    }
    grid
}

/// Axis-aligned blocks added until at least `density` of the cells are
/// occupied.
pub fn block_map<R: Rng>(rng: &mut R, cells: usize, resolution: f64, density: f64, max_block: usize) -> OccupancyGrid {
    let mut grid = OccupancyGrid::new(cells, cells, resolution, Vec2::zeros()).expect("positive map size");
    let target = (density * (cells * cells) as f64).ceil() as usize;
    let mut occupied = 0;
    while occupied < target {
        let (w, h) = (rng.gen_range(1..=max_block), rng.gen_range(1..=max_block));
        let (x0, y0) = (rng.gen_range(0..cells), rng.gen_range(0..cells));
        for iy in y0..(y0 + h).min(cells) {
            for ix in x0..(x0 + w).min(cells) {
                if !grid.is_occupied(ix, iy) {
                    grid.set(ix, iy, true);
                    occupied += 1;
                }
            }
        }
    }
    grid
}

/// Uniform position whose cell distance to obstacles is at least
/// `clearance`, or `None` after `tries` rejections.
pub fn sample_clear_point<R: Rng>(rng: &mut R, cm: &Costmap, clearance: f64, tries: usize) -> Option<Vec2> {
    let (w, h) = cm.grid().extent();
    let o = cm.grid().origin();
    (0..tries).find_map(|_| {
        let p = o + Vec2::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        let (ix, iy) = cm.grid().world_to_cell(p)?;
        (cm.cell_distance(ix, iy) >= clearance && !cm.is_lethal(p)).then_some(p)
    })
}
