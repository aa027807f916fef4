//! Deployment description and UE drops.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Poisson;

use crate::association::UlMetric;
use crate::error::{Error, Result};
use crate::powerctl::PowerControlParams;
use crate::propagation::PowerLawModel;
use crate::raster::{DensityRaster, PathlossRaster};
use crate::scheduler::LinkParams;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UeId(pub u32);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for UeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned bounding box in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Area {
    pub min: Point,
    pub max: Point,
}

impl Area {
    pub fn square(side: f64) -> Self {
        Area {
            min: Point::new(0.0, 0.0),
            max: Point::new(side, side),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn intersect(&self, other: &Area) -> Option<Area> {
        let min = Point::new(self.min.x.max(other.min.x), self.min.y.max(other.min.y));
        let max = Point::new(self.max.x.min(other.max.x), self.max.y.min(other.max.y));
        (min.x < max.x && min.y < max.y).then_some(Area { min, max })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    Macro,
    Pico,
}

impl Layer {
    pub fn as_str(&self) -> &'static str {
        match self {
            Layer::Macro => "macro",
            Layer::Pico => "pico",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: CellId,
    pub layer: Layer,
    pub position: Point,
    pub tx_power_dbm: f64,
    pub antenna_gain_dbi: f64,
    pub active: bool,
}

impl Cell {
    pub fn eirp_dbm(&self) -> f64 {
        self.tx_power_dbm + self.antenna_gain_dbi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ue {
    pub id: UeId,
    pub position: Point,
    pub max_tx_power_dbm: f64,
    pub antenna_gain_dbi: f64,
    pub tx_power_dbm: f64,
}

/// Per-UE uplink throughput demand in bit/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandProfile {
    pub r_min: f64,
    pub r_max: f64,
}

impl DemandProfile {
    pub fn new(r_min: f64, r_max: f64) -> Result<Self> {
        let d = DemandProfile { r_min, r_max };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min.is_finite() && self.r_min > 0.0) {
            return Err(Error::invalid("demand.r_min_bps", "must be positive"));
        }
        if !(self.r_max.is_finite() && self.r_max >= self.r_min) {
            return Err(Error::invalid("demand.r_max_bps", "must be finite and >= r_min"));
        }
        Ok(())
    }
}

impl Default for DemandProfile {
    fn default() -> Self {
        DemandProfile {
            r_min: 200e3,
            r_max: 20e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub bandwidth_hz: f64,
    pub n_rb: usize,
    pub rb_bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub noise_figure_db: f64,
    pub ue_max_tx_dbm: f64,
    pub ue_antenna_gain_dbi: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            bandwidth_hz: 20e6,
            n_rb: 100,
            rb_bandwidth_hz: 180e3,
            carrier_hz: 2.6e9,
            noise_figure_db: 5.0,
            ue_max_tx_dbm: 20.0,
            ue_antenna_gain_dbi: 0.0,
        }
    }
}

/// Where link pathloss comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PathlossSource {
    PowerLaw,
    Raster(Arc<PathlossRaster>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationConfig {
    pub model: PowerLawModel,
    pub source: PathlossSource,
    pub ul_metric: UlMetric,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            model: PowerLawModel::default(),
            source: PathlossSource::PowerLaw,
            ul_metric: UlMetric::CouplingGain,
        }
    }
}

pub const MACRO_TX_DBM: f64 = 46.0;
pub const MACRO_GAIN_DBI: f64 = 17.8;
pub const PICO_HP_TX_DBM: f64 = 30.0;
pub const PICO_LP_TX_DBM: f64 = 20.0;
pub const PICO_GAIN_DBI: f64 = 4.0;

/// Immutable deployment description shared by all snapshot workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub cells: Vec<Cell>,
    pub area: Area,
    pub traffic_density: DensityRaster,
    pub mean_ue_count: f64,
    /// Drop exactly `round(mean_ue_count)` UEs instead of a Poisson count.
    pub fixed_count: bool,
    pub demand: DemandProfile,
    pub radio: RadioParams,
    pub propagation: PropagationConfig,
    pub power_control: PowerControlParams,
    pub link: LinkParams,
}

impl Scenario {
    /// Scenario with defaults everywhere except cells and area; traffic is uniform.
    pub fn new(cells: Vec<Cell>, area: Area, mean_ue_count: f64) -> Result<Self> {
        let s = Scenario {
            traffic_density: DensityRaster::uniform(&area, (area.width().max(area.height()) / 100.0).max(1.0)),
            cells,
            area,
            mean_ue_count,
            fixed_count: false,
            demand: DemandProfile::default(),
            radio: RadioParams::default(),
            propagation: PropagationConfig::default(),
            power_control: PowerControlParams::default(),
            link: LinkParams::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.area;
        if !(a.min.x.is_finite() && a.min.y.is_finite() && a.max.x.is_finite() && a.max.y.is_finite())
            || a.width() <= 0.0
            || a.height() <= 0.0
        {
            return Err(Error::invalid("area", "must be a finite box with positive extent"));
        }
        let mut ids = BTreeSet::new();
        for c in &self.cells {
            if !ids.insert(c.id) {
                return Err(Error::invalid(format!("cells.{}", c.id), "duplicate cell id"));
            }
            if !(-40.0..=60.0).contains(&c.tx_power_dbm) {
                return Err(Error::invalid(
                    format!("cells.{}.tx_dbm", c.id),
                    "must lie within [-40, 60] dBm",
                ));
            }
            if !(-10.0..=30.0).contains(&c.antenna_gain_dbi) {
                return Err(Error::invalid(
                    format!("cells.{}.gain_dbi", c.id),
                    "must lie within [-10, 30] dBi",
                ));
            }
            if !(c.position.x.is_finite() && c.position.y.is_finite()) {
                return Err(Error::invalid(format!("cells.{}.position", c.id), "must be finite"));
            }
        }
        if !self.cells.iter().any(|c| c.active) {
            return Err(Error::invalid("cells", "at least one active cell is required"));
        }
        if !(self.mean_ue_count.is_finite() && self.mean_ue_count >= 0.0) {
            return Err(Error::invalid("traffic.mean_ue_count", "must be finite and >= 0"));
        }
        self.demand.validate()?;

        let r = &self.radio;
        if r.n_rb == 0 {
            return Err(Error::invalid("radio.n_rb", "must be at least 1"));
        }
        if !(r.rb_bandwidth_hz > 0.0 && r.rb_bandwidth_hz.is_finite()) {
            return Err(Error::invalid("radio.rb_bandwidth_hz", "must be positive"));
        }
        if !(r.bandwidth_hz.is_finite() && r.n_rb as f64 * r.rb_bandwidth_hz <= r.bandwidth_hz * (1.0 + 1e-12)) {
            return Err(Error::invalid(
                "radio.bandwidth_hz",
                "n_rb x rb_bandwidth_hz exceeds the carrier bandwidth",
            ));
        }
        if !(r.carrier_hz > 0.0 && r.carrier_hz.is_finite()) {
            return Err(Error::invalid("radio.carrier_hz", "must be positive"));
        }
        if !r.noise_figure_db.is_finite() {
            return Err(Error::invalid("radio.noise_figure_db", "must be finite"));
        }
        if !(-40.0..=40.0).contains(&r.ue_max_tx_dbm) {
            return Err(Error::invalid("radio.ue_tx_dbm", "must lie within [-40, 40] dBm"));
        }
        if !(-10.0..=30.0).contains(&r.ue_antenna_gain_dbi) {
            return Err(Error::invalid("radio.ue_gain_dbi", "must lie within [-10, 30] dBi"));
        }

        self.traffic_density.validate()?;
        let g = &self.traffic_density.grid;
        if !g.covers(&self.area) {
            return Err(Error::invalid("traffic.raster", "density raster does not cover the area"));
        }
        let usable = (0..g.height).any(|row| {
            (0..g.width).any(|col| {
                self.traffic_density.weight(col, row) > 0.0 && g.pixel_area(col, row).intersect(&self.area).is_some()
            })
        });
        if !usable {
            return Err(Error::invalid(
                "traffic.raster",
                "no positive weight inside the area",
            ));
        }

        self.propagation.model.validate()?;
        if let PathlossSource::Raster(raster) = &self.propagation.source {
            if !raster.grid.covers(&self.area) {
                return Err(Error::invalid("propagation.raster", "pathloss raster does not cover the area"));
            }
            for c in self.cells.iter().filter(|c| c.active) {
                if !raster.cells.contains_key(&c.id) {
                    return Err(Error::invalid(
                        "propagation.raster",
                        format!("no pathloss map for cell {}", c.id),
                    ));
                }
            }
        }
        self.power_control.validate(r.ue_max_tx_dbm)?;
        self.link.validate()?;
        Ok(())
    }

    pub fn active_cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.active)
    }

    pub fn cell(&self, id: CellId) -> Option<&Cell> {
        self.cells.iter().find(|c| c.id == id)
    }

    pub fn pico_ids(&self) -> Vec<CellId> {
        self.cells.iter().filter(|c| c.layer == Layer::Pico).map(|c| c.id).collect()
    }

    pub fn count_active(&self, layer: Layer) -> usize {
        self.active_cells().filter(|c| c.layer == layer).count()
    }

    /// Copy with every pico transmitting at `dbm`.
    pub fn with_pico_power(&self, dbm: f64) -> Result<Self> {
        let mut s = self.clone();
        for c in s.cells.iter_mut().filter(|c| c.layer == Layer::Pico) {
            c.tx_power_dbm = dbm;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn with_demand(&self, demand: DemandProfile) -> Result<Self> {
        demand.validate()?;
        let mut s = self.clone();
        s.demand = demand;
        Ok(s)
    }

    /// Probe UE at `position` with the scenario's UE radio parameters.
    pub fn probe_ue(&self, id: UeId, position: Point) -> Ue {
        Ue {
            id,
            position,
            max_tx_power_dbm: self.radio.ue_max_tx_dbm,
            antenna_gain_dbi: self.radio.ue_antenna_gain_dbi,
            tx_power_dbm: self.radio.ue_max_tx_dbm,
        }
    }
}

/// Drops UEs for one snapshot: Poisson count (or fixed), positions by
/// weighted pixel choice then uniform jitter inside the pixel.
pub fn generate_ues(s: &Scenario, seed: u64) -> Vec<Ue> {
    let mut rng = seed::rng(seed, &[seed::TAG_UES]);
    let count = if s.fixed_count {
        s.mean_ue_count.round() as usize
    } else if s.mean_ue_count > 0.0 {
        // Poisson::new only fails for non-positive or non-finite means.
        Poisson::new(s.mean_ue_count)
            .map(|p| p.sample(&mut rng) as usize)
            .unwrap_or(0)
    } else {
        0
    };
    if count == 0 {
        return Vec::new();
    }

    let grid = &s.traffic_density.grid;
    let mut rects = Vec::new();
    let mut weights = Vec::new();
    for row in 0..grid.height {
        for col in 0..grid.width {
            let w = s.traffic_density.weight(col, row);
            if w <= 0.0 {
                continue;
            }
            if let Some(r) = grid.pixel_area(col, row).intersect(&s.area) {
                rects.push(r);
                weights.push(w);
            }
        }
    }
    // validate() guarantees a positive weight inside the area
    let Ok(pick) = WeightedIndex::new(&weights) else {
        return Vec::new();
    };

    (0..count)
        .map(|i| {
            let r = rects[pick.sample(&mut rng)];
            let x = r.min.x + rng.random::<f64>() * r.width();
            let y = r.min.y + rng.random::<f64>() * r.height();
            s.probe_ue(UeId(i as u32), Point::new(x, y))
        })
        .collect()
}

/// Copy of `s` with exactly the first `active_pico_count` picos of `order`
/// active and every other pico switched off. Macros stay active.
pub fn activate_cells(s: &Scenario, active_pico_count: usize, order: &[CellId]) -> Result<Scenario> {
    if active_pico_count > order.len() {
        return Err(Error::invalid(
            "active_pico_count",
            format!("{active_pico_count} exceeds activation order length {}", order.len()),
        ));
    }
    for id in order {
        match s.cell(*id) {
            None => return Err(Error::invalid("order", format!("unknown cell id {id}"))),
            Some(c) if c.layer != Layer::Pico => {
                return Err(Error::invalid("order", format!("cell {id} is not a pico")))
            }
            _ => {}
        }
    }
    let on: BTreeSet<CellId> = order[..active_pico_count].iter().copied().collect();
    let mut out = s.clone();
    for c in out.cells.iter_mut().filter(|c| c.layer == Layer::Pico) {
        c.active = on.contains(&c.id);
    }
    out.validate()?;
    Ok(out)
}
