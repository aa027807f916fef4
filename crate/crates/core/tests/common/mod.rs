#![allow(dead_code)]

use dudesim::raster::DensityRaster;
use dudesim::scenario::{Area, Cell, CellId, Layer, Point, Scenario, MACRO_GAIN_DBI, MACRO_TX_DBM, PICO_GAIN_DBI};
use proptest::prelude::*;

pub fn cell(id: u32, layer: Layer, x: f64, y: f64, tx: f64, gain: f64) -> Cell {
    Cell {
        id: CellId(id),
        layer,
        position: Point::new(x, y),
        tx_power_dbm: tx,
        antenna_gain_dbi: gain,
        active: true,
    }
}

pub fn macro_at(id: u32, x: f64, y: f64) -> Cell {
    cell(id, Layer::Macro, x, y, MACRO_TX_DBM, MACRO_GAIN_DBI)
}

pub fn pico_at(id: u32, x: f64, y: f64, tx: f64) -> Cell {
    cell(id, Layer::Pico, x, y, tx, PICO_GAIN_DBI)
}

/// Scenario on a 1 km square with a coarse uniform traffic raster.
pub fn scenario(cells: Vec<Cell>, mean_ues: f64) -> Scenario {
    let area = Area::square(1000.0);
    let mut s = Scenario::new(cells, area, mean_ues).unwrap();
    s.traffic_density = DensityRaster::uniform(&area, 50.0);
    s
}

/// One or two macros plus up to five picos at random positions.
pub fn arb_hetnet() -> impl Strategy<Value = Vec<Cell>> {
    (
        1usize..=2,
        prop::collection::vec((50.0..950.0f64, 50.0..950.0f64, 10.0..36.0f64), 0..=5),
    )
        .prop_map(|(n_macro, picos)| {
            let mut cells: Vec<Cell> = (0..n_macro)
                .map(|i| macro_at(i as u32, 250.0 + 500.0 * i as f64, 500.0))
                .collect();
            for (i, (x, y, tx)) in picos.into_iter().enumerate() {
                cells.push(pico_at(10 + i as u32, x, y, tx));
            }
            cells
        })
}
