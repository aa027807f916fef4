//! Gridded inputs: traffic density maps and imported pathloss maps.
//!
//! Both formats are whitespace-separated UTF-8 text. A density file is
//!
//! ```text
//! DENSITY v1 <width> <height> <origin_x_m> <origin_y_m> <pixel_m>
//! <height rows of width non-negative decimals>
//! ```
//!
//! and a pathloss file is
//!
//! ```text
//! PLRASTER v1 <n_cells> <width> <height> <origin_x_m> <origin_y_m> <pixel_m>
//! CELL <id>
//! <height rows of width decimals, dB>
//! ...
//! ```
//!
//! Row 0 is the southernmost row (smallest y), column 0 the westernmost.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scenario::{Area, CellId, Point};

/// Geometry shared by every raster: lower-left origin, square pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Point,
    pub pixel_size: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.pixel_size.is_finite() && self.pixel_size > 0.0) {
            return Err(Error::invalid(field, "pixel size must be positive and finite"));
        }
        if !(self.origin.x.is_finite() && self.origin.y.is_finite()) {
            return Err(Error::invalid(field, "origin must be finite"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid(field, "grid must have at least one pixel"));
        }
        if self.width.checked_mul(self.height).is_none_or(|n| n > MAX_PIXELS) {
            return Err(Error::invalid(field, "grid too large"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent(&self) -> Area {
        Area {
            min: self.origin,
            max: Point::new(
                self.origin.x + self.width as f64 * self.pixel_size,
                self.origin.y + self.height as f64 * self.pixel_size,
            ),
        }
    }

    pub fn covers(&self, area: &Area) -> bool {
        let ext = self.extent();
        ext.min.x <= area.min.x
            && ext.min.y <= area.min.y
            && ext.max.x >= area.max.x
            && ext.max.y >= area.max.y
    }

    /// Pixel bounds as an area.
    pub fn pixel_area(&self, col: usize, row: usize) -> Area {
        let min = Point::new(
            self.origin.x + col as f64 * self.pixel_size,
            self.origin.y + row as f64 * self.pixel_size,
        );
        Area {
            min,
            max: Point::new(min.x + self.pixel_size, min.y + self.pixel_size),
        }
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> Point {
        Point::new(
            self.origin.x + (col as f64 + 0.5) * self.pixel_size,
            self.origin.y + (row as f64 + 0.5) * self.pixel_size,
        )
    }

    /// Nearest pixel containing `p`; points on the outer edge snap inward.
    pub fn locate(&self, p: Point) -> Option<(usize, usize)> {
        let fx = (p.x - self.origin.x) / self.pixel_size;
        let fy = (p.y - self.origin.y) / self.pixel_size;
        if !(fx.is_finite() && fy.is_finite()) {
            return None;
        }
        let w = self.width as f64;
        let h = self.height as f64;
        if fx < 0.0 || fy < 0.0 || fx > w || fy > h {
            return None;
        }
        let col = (fx.floor() as usize).min(self.width - 1);
        let row = (fy.floor() as usize).min(self.height - 1);
        Some((col, row))
    }
}

const MAX_PIXELS: usize = 1 << 24;

/// Non-negative traffic weights used to place UEs.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRaster {
    pub grid: GridSpec,
    /// Row-major, `grid.height` rows of `grid.width`.
    pub weights: Vec<f64>,
}

impl DensityRaster {
    pub fn uniform(area: &Area, pixel_size: f64) -> Self {
        let grid = grid_over(area, pixel_size);
        DensityRaster {
            weights: vec![1.0; grid.len()],
            grid,
        }
    }

    /// Uniform floor plus a sum of isotropic Gaussian bumps, sampled at
    /// pixel centres.
    pub fn hotspots(area: &Area, pixel_size: f64, floor: f64, bumps: &[Hotspot]) -> Self {
        let grid = grid_over(area, pixel_size);
        let mut weights = Vec::with_capacity(grid.len());
        for row in 0..grid.height {
            for col in 0..grid.width {
                let c = grid.pixel_center(col, row);
                let w = bumps.iter().fold(floor, |acc, h| {
                    let d2 = (c.x - h.center.x).powi(2) + (c.y - h.center.y).powi(2);
                    acc + h.weight * (-d2 / (2.0 * h.sigma * h.sigma)).exp()
                });
                weights.push(w);
            }
        }
        DensityRaster { grid, weights }
    }

    pub fn weight(&self, col: usize, row: usize) -> f64 {
        self.weights[row * self.grid.width + col]
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate("traffic.raster")?;
        if self.weights.len() != self.grid.len() {
            return Err(Error::invalid("traffic.raster", "weight count does not match grid"));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(
                "traffic.raster",
                "weights must be finite and non-negative",
            ));
        }
        if !self.weights.iter().any(|w| *w > 0.0) {
            return Err(Error::invalid(
                "traffic.raster",
                "at least one weight must be strictly positive",
            ));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let (ln, header) = lines.next_content().ok_or_else(|| Error::parse(1, "empty raster"))?;
        let mut tok = header.split_whitespace();
        expect_word(&mut tok, "DENSITY", ln)?;
        expect_word(&mut tok, "v1", ln)?;
        let width = parse_count(tok.next(), "width", ln)?;
        let height = parse_count(tok.next(), "height", ln)?;
        let ox = parse_f64(tok.next(), "origin_x", ln)?;
        let oy = parse_f64(tok.next(), "origin_y", ln)?;
        let pixel = parse_f64(tok.next(), "pixel size", ln)?;
        if tok.next().is_some() {
            return Err(Error::parse(ln, "trailing tokens in header"));
        }
        let grid = GridSpec {
            origin: Point::new(ox, oy),
            pixel_size: pixel,
            width,
            height,
        };
        grid.validate("traffic.raster")?;
        let weights = read_grid(&mut lines, &grid)?;
        if let Some((ln, _)) = lines.next_content() {
            return Err(Error::parse(ln, "unexpected data after last row"));
        }
        let raster = DensityRaster { grid, weights };
        raster.validate()?;
        Ok(raster)
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut out = format!(
            "DENSITY v1 {} {} {} {} {}\n",
            g.width, g.height, g.origin.x, g.origin.y, g.pixel_size
        );
        write_rows(&mut out, &self.weights, g.width);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hotspot {
    pub center: Point,
    pub sigma: f64,
    pub weight: f64,
}

fn grid_over(area: &Area, pixel_size: f64) -> GridSpec {
    let width = ((area.width() / pixel_size).ceil() as usize).max(1);
    let height = ((area.height() / pixel_size).ceil() as usize).max(1);
    GridSpec {
        origin: area.min,
        pixel_size,
        width,
        height,
    }
}

/// Externally computed per-cell pathloss maps, looked up by nearest pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PathlossRaster {
    pub grid: GridSpec,
    pub cells: BTreeMap<CellId, Vec<f64>>,
}

impl PathlossRaster {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let (ln, header) = lines.next_content().ok_or_else(|| Error::parse(1, "empty raster"))?;
        let mut tok = header.split_whitespace();
        expect_word(&mut tok, "PLRASTER", ln)?;
        expect_word(&mut tok, "v1", ln)?;
        let n_cells = parse_count(tok.next(), "n_cells", ln)?;
        let width = parse_count(tok.next(), "width", ln)?;
        let height = parse_count(tok.next(), "height", ln)?;
        let ox = parse_f64(tok.next(), "origin_x", ln)?;
        let oy = parse_f64(tok.next(), "origin_y", ln)?;
        let pixel = parse_f64(tok.next(), "pixel size", ln)?;
        if tok.next().is_some() {
            return Err(Error::parse(ln, "trailing tokens in header"));
        }
        let grid = GridSpec {
            origin: Point::new(ox, oy),
            pixel_size: pixel,
            width,
            height,
        };
        grid.validate("propagation.raster")?;
        if n_cells == 0 {
            return Err(Error::parse(ln, "raster must describe at least one cell"));
        }
        if n_cells.saturating_mul(grid.len()) > MAX_PIXELS {
            return Err(Error::parse(ln, "raster too large"));
        }

        let mut cells = BTreeMap::new();
        for _ in 0..n_cells {
            let (ln, line) = lines
                .next_content()
                .ok_or_else(|| Error::parse(lines.line, "missing CELL block (grid size mismatch)"))?;
            let mut tok = line.split_whitespace();
            expect_word(&mut tok, "CELL", ln)?;
            let id = tok
                .next()
                .ok_or_else(|| Error::parse(ln, "missing cell id"))?
                .parse::<u32>()
                .map_err(|_| Error::parse(ln, "cell id must be a non-negative integer"))?;
            if tok.next().is_some() {
                return Err(Error::parse(ln, "trailing tokens after cell id"));
            }
            let values = read_grid(&mut lines, &grid)?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(ln, "pathloss values must be finite"));
            }
            if cells.insert(CellId(id), values).is_some() {
                return Err(Error::parse(ln, format!("duplicate CELL {id}")));
            }
        }
        if let Some((ln, _)) = lines.next_content() {
            return Err(Error::parse(ln, "unexpected data after last cell (grid size mismatch)"));
        }
        Ok(PathlossRaster { grid, cells })
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut out = format!(
            "PLRASTER v1 {} {} {} {} {} {}\n",
            self.cells.len(),
            g.width,
            g.height,
            g.origin.x,
            g.origin.y,
            g.pixel_size
        );
        for (id, values) in &self.cells {
            let _ = writeln!(out, "CELL {}", id.0);
            write_rows(&mut out, values, g.width);
        }
        out
    }

    /// Nearest-pixel pathloss in dB.
    pub fn lookup(&self, cell: CellId, at: Point) -> Result<f64> {
        let values = self
            .cells
            .get(&cell)
            .ok_or_else(|| Error::invalid("propagation.raster", format!("no map for cell {}", cell.0)))?;
        let (col, row) = self
            .grid
            .locate(at)
            .ok_or(Error::OutsideRaster { x: at.x, y: at.y })?;
        Ok(values[row * self.grid.width + col])
    }
}

fn write_rows(out: &mut String, values: &[f64], width: usize) {
    for row in values.chunks(width) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
}

/// Line iterator skipping blank lines and `#` comments, tracking line numbers.
struct Lines<'a> {
    inner: std::str::Lines<'a>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines(),
            line: 0,
        }
    }

    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for l in self.inner.by_ref() {
            self.line += 1;
            let t = l.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Some((self.line, t));
            }
        }
        None
    }
}

fn read_grid(lines: &mut Lines<'_>, grid: &GridSpec) -> Result<Vec<f64>> {
    // grow with the data rather than trusting the header
    let mut values = Vec::with_capacity(grid.len().min(1 << 16));
    for _ in 0..grid.height {
        let (ln, row) = lines
            .next_content()
            .ok_or_else(|| Error::parse(lines.line, "missing rows (grid size mismatch)"))?;
        let before = values.len();
        for t in row.split_whitespace() {
            let v: f64 = t
                .parse()
                .map_err(|_| Error::parse(ln, format!("bad number `{t}`")))?;
            values.push(v);
        }
        if values.len() - before != grid.width {
            return Err(Error::parse(
                ln,
                format!("expected {} values, found {}", grid.width, values.len() - before),
            ));
        }
    }
    Ok(values)
}

fn expect_word<'a>(tok: &mut impl Iterator<Item = &'a str>, word: &str, ln: usize) -> Result<()> {
    match tok.next() {
        Some(w) if w == word => Ok(()),
        Some(w) => Err(Error::parse(ln, format!("expected `{word}`, found `{w}`"))),
        None => Err(Error::parse(ln, format!("expected `{word}`"))),
    }
}

fn parse_count(t: Option<&str>, what: &str, ln: usize) -> Result<usize> {
    t.ok_or_else(|| Error::parse(ln, format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::parse(ln, format!("{what} must be a non-negative integer")))
}

fn parse_f64(t: Option<&str>, what: &str, ln: usize) -> Result<f64> {
    let v: f64 = t
        .ok_or_else(|| Error::parse(ln, format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::parse(ln, format!("{what} must be a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(ln, format!("{what} must be finite")));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_parses_and_round_trips() {
        let text = "DENSITY v1 3 2 0 0 10\n1 0 2\n0 0 0.5\n";
        let r = DensityRaster::parse(text).unwrap();
        assert_eq!(r.grid.width, 3);
        assert_eq!(r.weight(2, 0), 2.0);
        assert_eq!(r.weight(2, 1), 0.5);
        assert_eq!(DensityRaster::parse(&r.to_text()).unwrap(), r);
    }

    #[test]
    fn density_rejects_bad_input() {
        assert!(DensityRaster::parse("").is_err());
        assert!(DensityRaster::parse("DENSITY v2 1 1 0 0 1\n1\n").is_err());
        // short row
        assert!(DensityRaster::parse("DENSITY v1 2 1 0 0 1\n1\n").is_err());
        // all zero
        assert!(DensityRaster::parse("DENSITY v1 1 1 0 0 1\n0\n").is_err());
        assert!(DensityRaster::parse("DENSITY v1 1 1 0 0 1\n-1\n").is_err());
        assert!(DensityRaster::parse("DENSITY v1 1 1 0 0 0\n1\n").is_err());
        assert!(DensityRaster::parse("DENSITY v1 1 1 0 0 1\n1\n1\n").is_err());
        assert!(DensityRaster::parse("DENSITY v1 1 1 0 0 1\nNaN\n").is_err());
    }

    #[test]
    fn pathloss_constant_map() {
        let r = PathlossRaster::parse("PLRASTER v1 1 1 1 0 0 1000\nCELL 4\n80\n").unwrap();
        for p in [Point::new(0.0, 0.0), Point::new(999.0, 1.0), Point::new(1000.0, 1000.0)] {
            assert_eq!(r.lookup(CellId(4), p).unwrap(), 80.0);
        }
        assert!(matches!(
            r.lookup(CellId(4), Point::new(-1.0, 0.0)),
            Err(Error::OutsideRaster { .. })
        ));
        assert!(r.lookup(CellId(5), Point::new(1.0, 1.0)).is_err());
    }

    #[test]
    fn pathloss_rejects_size_mismatch() {
        // declares 2 cells, provides 1
        let e = PathlossRaster::parse("PLRASTER v1 2 1 1 0 0 10\nCELL 0\n80\n").unwrap_err();
        assert!(e.to_string().contains("mismatch"), "{e}");
        // too many rows
        assert!(PathlossRaster::parse("PLRASTER v1 1 1 1 0 0 10\nCELL 0\n80\n81\n").is_err());
        // duplicate id
        assert!(PathlossRaster::parse("PLRASTER v1 2 1 1 0 0 10\nCELL 0\n80\nCELL 0\n80\n").is_err());
    }

    #[test]
    fn locate_snaps_outer_edge() {
        let g = GridSpec {
            origin: Point::new(0.0, 0.0),
            pixel_size: 10.0,
            width: 2,
            height: 2,
        };
        assert_eq!(g.locate(Point::new(20.0, 20.0)), Some((1, 1)));
        assert_eq!(g.locate(Point::new(9.99, 10.0)), Some((0, 1)));
        assert_eq!(g.locate(Point::new(20.01, 0.0)), None);
    }
}
