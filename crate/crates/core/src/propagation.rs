//! Link gains between cells and UEs.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::PathlossRaster;
use crate::scenario::{Cell, CellId, Layer, PathlossSource, Point, Scenario, Ue, UeId};
use crate::seed;

/// Close-in distance below which pathloss is held constant.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// `ref_loss + 10 * exponent * log10(max(d, 1 m))`.
pub fn pathloss_powerlaw(d: f64, exponent: f64, ref_loss_db: f64) -> f64 {
    ref_loss_db + 10.0 * exponent * d.max(MIN_DISTANCE_M).log10()
}

/// Log-distance model with a per-layer exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawModel {
    pub exponent_macro: f64,
    pub exponent_pico: f64,
    /// Loss at 1 m.
    pub ref_loss_db: f64,
    /// Log-normal shadowing standard deviation; 0 disables shadowing.
    pub shadowing_sigma_db: f64,
}

impl Default for PowerLawModel {
    fn default() -> Self {
        PowerLawModel {
            exponent_macro: 4.0,
            exponent_pico: 3.6,
            ref_loss_db: 0.0,
            shadowing_sigma_db: 0.0,
        }
    }
}

impl PowerLawModel {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("propagation.exponent_macro", self.exponent_macro),
            ("propagation.exponent_pico", self.exponent_pico),
        ] {
            if !(2.0..=6.0).contains(&v) {
                return Err(Error::invalid(field, "must lie within [2, 6]"));
            }
        }
        if !(self.ref_loss_db.is_finite() && self.ref_loss_db >= 0.0) {
            return Err(Error::invalid("propagation.ref_loss_db", "must be finite and >= 0"));
        }
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return Err(Error::invalid("propagation.shadowing_sigma_db", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn exponent(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Macro => self.exponent_macro,
            Layer::Pico => self.exponent_pico,
        }
    }
}

/// Deterministic (shadowing-free) pathloss from a cell to a point.
pub trait PathlossProvider: Sync {
    fn pathloss_db(&self, cell: &Cell, at: Point) -> Result<f64>;
}

impl PathlossProvider for PowerLawModel {
    fn pathloss_db(&self, cell: &Cell, at: Point) -> Result<f64> {
        Ok(pathloss_powerlaw(
            cell.position.distance(&at),
            self.exponent(cell.layer),
            self.ref_loss_db,
        ))
    }
}

impl PathlossProvider for PathlossRaster {
    fn pathloss_db(&self, cell: &Cell, at: Point) -> Result<f64> {
        self.lookup(cell.id, at)
    }
}

pub fn load_pathloss_raster(text: &str) -> Result<PathlossRaster> {
    PathlossRaster::parse(text)
}

/// The provider configured in the scenario.
pub fn scenario_provider(s: &Scenario) -> &dyn PathlossProvider {
    match &s.propagation.source {
        PathlossSource::PowerLaw => &s.propagation.model,
        PathlossSource::Raster(r) => r.as_ref(),
    }
}

/// Coupling gain for every (active cell, UE) pair. Rows follow the
/// scenario's active-cell order, columns the UE order. The same entry
/// serves uplink and downlink.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGainMatrix {
    cells: Vec<CellId>,
    ues: Vec<UeId>,
    /// `G_cell + G_ue - pathloss`, row-major by cell.
    gains: Vec<f64>,
    /// Total loss including shadowing, row-major by cell.
    pathloss: Vec<f64>,
}

impl CouplingGainMatrix {
    pub fn cell_ids(&self) -> &[CellId] {
        &self.cells
    }

    pub fn ue_ids(&self) -> &[UeId] {
        &self.ues
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_ues(&self) -> usize {
        self.ues.len()
    }

    #[inline]
    pub fn gain(&self, cell: usize, ue: usize) -> f64 {
        self.gains[cell * self.ues.len() + ue]
    }

    #[inline]
    pub fn pathloss(&self, cell: usize, ue: usize) -> f64 {
        self.pathloss[cell * self.ues.len() + ue]
    }

    pub fn cell_index(&self, id: CellId) -> Option<usize> {
        self.cells.iter().position(|c| *c == id)
    }
}

/// Shadowing draw for one link, independent of evaluation order.
fn shadowing_db(sigma: f64, seed: u64, cell: CellId, ue: UeId) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let mut rng = seed::rng(seed, &[seed::TAG_SHADOWING, cell.0 as u64, ue.0 as u64]);
    // sigma was validated finite and positive
    Normal::new(0.0, sigma).map(|n| n.sample(&mut rng)).unwrap_or(0.0)
}

pub fn build_gain_matrix(
    s: &Scenario,
    ues: &[Ue],
    provider: &dyn PathlossProvider,
    seed: u64,
) -> Result<CouplingGainMatrix> {
    let cells: Vec<&Cell> = s.active_cells().collect();
    let sigma = s.propagation.model.shadowing_sigma_db;

    // column per UE, computed in parallel, then transposed
    let columns: Vec<Vec<(f64, f64)>> = ues
        .par_iter()
        .map(|u| {
            cells
                .iter()
                .map(|c| {
                    let pl = provider.pathloss_db(c, u.position)? + shadowing_db(sigma, seed, c.id, u.id);
                    Ok((c.antenna_gain_dbi + u.antenna_gain_dbi - pl, pl))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let n = ues.len();
    let mut gains = vec![0.0; cells.len() * n];
    let mut pathloss = vec![0.0; cells.len() * n];
    for (u, col) in columns.iter().enumerate() {
        for (c, &(g, pl)) in col.iter().enumerate() {
            gains[c * n + u] = g;
            pathloss[c * n + u] = pl;
        }
    }
    Ok(CouplingGainMatrix {
        cells: cells.iter().map(|c| c.id).collect(),
        ues: ues.iter().map(|u| u.id).collect(),
        gains,
        pathloss,
    })
}
