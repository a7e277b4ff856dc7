//! PGM (P2 ASCII / P5 binary) occupancy-map reader and writer.
//!
//! Image row 0 maps to grid row 0, i.e. the first row of the file is the
//! row closest to the map origin. Dark pixels are obstacles.

use super::{CostmapError, OccupancyGrid};
use crate::Vec2;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("bad magic number at byte {offset}: expected P2 or P5")]
    BadMagic { offset: usize },
    #[error("malformed header at byte {offset}: {reason}")]
    Header { offset: usize, reason: &'static str },
    #[error("truncated payload at byte {offset}: expected {expected} samples, got {got}")]
    Truncated { offset: usize, expected: usize, got: usize },
    #[error("malformed sample at byte {offset}")]
    Sample { offset: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmEncoding {
    Ascii,
    Binary,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Reads an unsigned decimal integer, returning it and its start offset.
    fn uint(&mut self) -> Option<(u32, usize)> {
        self.skip_ws_and_comments();
        let start = self.pos;
        let mut value: u32 = 0;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            value = value
                .checked_mul(10)?
                .checked_add(u32::from(self.bytes[self.pos] - b'0'))?;
            self.pos += 1;
        }
        (self.pos > start).then_some((value, start))
    }
}

/// Decodes a PGM image into `(width, height, gray)` with gray values
/// rescaled to 0..=255.
pub fn decode(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), PgmError> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'2' || bytes[1] == b'5') {
        return Err(PgmError::BadMagic { offset: 0 });
    }
    let binary = bytes[1] == b'5';
    let mut cur = Cursor { bytes, pos: 2 };
    let header_field = |cur: &mut Cursor, reason| {
        cur.skip_ws_and_comments();
        let offset = cur.pos;
        cur.uint().ok_or(PgmError::Header { offset, reason })
    };
    let (width, w_off) = header_field(&mut cur, "missing width")?;
    let (height, h_off) = header_field(&mut cur, "missing height")?;
    let (maxval, m_off) = header_field(&mut cur, "missing maxval")?;
    if width == 0 {
        return Err(PgmError::Header { offset: w_off, reason: "zero width" });
    }
    if height == 0 {
        return Err(PgmError::Header { offset: h_off, reason: "zero height" });
    }
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::Header { offset: m_off, reason: "maxval must be in 1..=255" });
    }
    let n = width as usize * height as usize;
    let scale = |v: u32| -> u8 { ((v * 255 + maxval / 2) / maxval) as u8 };
    let mut gray = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates maxval from the raster
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(PgmError::Header { offset: cur.pos, reason: "missing raster separator" });
        }
        let start = cur.pos + 1;
        let avail = bytes.len().saturating_sub(start);
        if avail < n {
            return Err(PgmError::Truncated { offset: bytes.len(), expected: n, got: avail });
        }
        for (i, &b) in bytes[start..start + n].iter().enumerate() {
            if u32::from(b) > maxval {
                return Err(PgmError::Sample { offset: start + i });
            }
            gray.push(scale(u32::from(b)));
        }
    } else {
        for _ in 0..n {
            cur.skip_ws_and_comments();
            if cur.pos >= bytes.len() {
                return Err(PgmError::Truncated { offset: cur.pos, expected: n, got: gray.len() });
            }
            let offset = cur.pos;
            match cur.uint() {
                Some((v, _)) if v <= maxval => gray.push(scale(v)),
                _ => return Err(PgmError::Sample { offset }),
            }
        }
    }
    Ok((width as usize, height as usize, gray))
}

/// Parses a PGM image into an occupancy grid. A cell is occupied iff its
/// gray level is `<= occupied_threshold`. Origin defaults to `(0, 0)`.
pub fn load_pgm(
    bytes: &[u8],
    occupied_threshold: u8,
    resolution: f64,
) -> Result<OccupancyGrid, CostmapError> {
    let (width, height, gray) = decode(bytes)?;
    let cells = gray.iter().map(|&g| g <= occupied_threshold).collect();
    OccupancyGrid::from_cells(width, height, resolution, Vec2::zeros(), cells)
}

/// Encodes an occupancy grid as PGM (occupied = 0, free = 255).
pub fn write_pgm(grid: &OccupancyGrid, encoding: PgmEncoding) -> Vec<u8> {
    let (w, h) = (grid.width(), grid.height());
    let magic = match encoding {
        PgmEncoding::Ascii => "P2",
        PgmEncoding::Binary => "P5",
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    let px = |occ: bool| if occ { 0u8 } else { 255u8 };
    match encoding {
        PgmEncoding::Binary => out.extend(grid.cells().iter().map(|&o| px(o))),
        PgmEncoding::Ascii => {
            for row in grid.cells().chunks(w) {
                let line: Vec<String> = row.iter().map(|&o| px(o).to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}
