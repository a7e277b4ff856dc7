//! Exact Euclidean distance transform between cell centers.
//!
//! Two separable passes: a per-column nearest-site scan followed by a
//! per-row lower envelope of parabolas. The nearest occupied cell is kept
//! alongside each squared distance so continuous distance queries can use
//! the true site geometry.

pub(crate) const NO_SITE: u32 = u32::MAX;

/// Returns `(squared distance in cells, nearest site index)` per cell,
/// row-major. Cells of a map without obstacles get `(inf, NO_SITE)`.
pub(crate) fn transform(width: usize, height: usize, occupied: &[bool]) -> (Vec<f64>, Vec<u32>) {
    // column pass: nearest occupied row in the same column
    let mut col_row = vec![NO_SITE; width * height];
    for x in 0..width {
        let mut last: Option<usize> = None;
        for y in 0..height {
            if occupied[y * width + x] {
                last = Some(y);
            }
            if let Some(l) = last {
                col_row[y * width + x] = l as u32;
            }
        }
        let mut next: Option<usize> = None;
        for y in (0..height).rev() {
            if occupied[y * width + x] {
                next = Some(y);
            }
            if let Some(n) = next {
                let cur = col_row[y * width + x];
                if cur == NO_SITE || (n - y) < (y - cur as usize) {
                    col_row[y * width + x] = n as u32;
                }
            }
        }
    }

    let mut sq = vec![f64::INFINITY; width * height];
    let mut site = vec![NO_SITE; width * height];
    let mut v: Vec<usize> = Vec::with_capacity(width);
    let mut z: Vec<f64> = Vec::with_capacity(width + 1);
    let mut f = vec![f64::INFINITY; width];
    for y in 0..height {
        for (x, fx) in f.iter_mut().enumerate() {
            let r = col_row[y * width + x];
            *fx = if r == NO_SITE {
                f64::INFINITY
            } else {
                let d = r as f64 - y as f64;
                d * d
            };
        }
        v.clear();
        z.clear();
        for q in 0..width {
            if !f[q].is_finite() {
                continue;
            }
            loop {
                match v.last() {
                    None => {
                        v.push(q);
                        z.push(f64::NEG_INFINITY);
                        break;
                    }
                    Some(&p) => {
                        let (qf, pf) = (q as f64, p as f64);
                        let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
                        if s <= *z.last().unwrap() {
                            v.pop();
                            z.pop();
                        } else {
                            v.push(q);
                            z.push(s);
                            break;
                        }
                    }
                }
            }
        }
        if v.is_empty() {
            continue;
        }
        let mut k = 0;
        for x in 0..width {
            let xf = x as f64;
            while k + 1 < v.len() && z[k + 1] < xf {
                k += 1;
            }
            let q = v[k];
            let dx = xf - q as f64;
            sq[y * width + x] = dx * dx + f[q];
            site[y * width + x] = col_row[y * width + q] * width as u32 + q as u32;
        }
    }
    (sq, site)
}
