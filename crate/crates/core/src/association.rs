//! Downlink and uplink serving-cell selection.
//!
//! Downlink always follows the strongest received power. The uplink follows
//! the policy: the same cell as the downlink (`Coupled`), the best coupling
//! gain irrespective of transmit power (`Dude`), or a coupled choice with a
//! dB bias added to every pico (`RangeExtension`).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::propagation::CouplingGainMatrix;
use crate::scenario::{Cell, CellId, Layer, UeId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AssociationPolicy {
    Coupled,
    Dude,
    RangeExtension { offset_db: f64 },
}

impl fmt::Display for AssociationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssociationPolicy::Coupled => f.write_str("coupled"),
            AssociationPolicy::Dude => f.write_str("dude"),
            AssociationPolicy::RangeExtension { offset_db } => write!(f, "re:{offset_db}"),
        }
    }
}

impl FromStr for AssociationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupled" => Ok(AssociationPolicy::Coupled),
            "dude" => Ok(AssociationPolicy::Dude),
            _ => {
                let offset = s
                    .strip_prefix("re:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::invalid("policy", format!("`{s}` is not one of coupled, dude, re:<offset_db>"))
                    })?;
                if !(offset.is_finite() && offset >= 0.0) {
                    return Err(Error::invalid("policy", "range-extension offset must be >= 0 dB"));
                }
                Ok(AssociationPolicy::RangeExtension { offset_db: offset })
            }
        }
    }
}

/// Uplink selection metric used by [`AssociationPolicy::Dude`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UlMetric {
    /// Pathloss net of both antenna gains.
    #[default]
    CouplingGain,
    /// Bare pathloss, antenna gains ignored.
    RawPathloss,
}

impl FromStr for UlMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupling_gain" => Ok(UlMetric::CouplingGain),
            "raw_pathloss" => Ok(UlMetric::RawPathloss),
            _ => Err(Error::invalid(
                "propagation.ul_metric",
                format!("`{s}` is not coupling_gain or raw_pathloss"),
            )),
        }
    }
}

/// Per-UE serving cells, in the gain matrix's UE order.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub policy: AssociationPolicy,
    pub ue_ids: Vec<UeId>,
    pub dl: Vec<CellId>,
    pub ul: Vec<CellId>,
}

impl Association {
    pub fn len(&self) -> usize {
        self.ue_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ue_ids.is_empty()
    }
}

/// Resolves the matrix rows to scenario cells once.
fn row_cells<'a>(gains: &CouplingGainMatrix, cells: &'a [Cell]) -> Vec<&'a Cell> {
    gains
        .cell_ids()
        .iter()
        .map(|id| {
            cells
                .iter()
                .find(|c| c.id == *id)
                .expect("gain matrix row refers to a cell not in the scenario")
        })
        .collect()
}

/// Argmax over rows, ties to the lowest cell id.
fn argmax(rows: &[&Cell], mut metric: impl FnMut(usize, &Cell) -> f64) -> CellId {
    let mut best: Option<(f64, CellId)> = None;
    for (i, c) in rows.iter().enumerate() {
        if !c.active {
            continue;
        }
        let v = metric(i, c);
        best = match best {
            Some((bv, bid)) if bv > v || (bv == v && bid < c.id) => Some((bv, bid)),
            _ => Some((v, c.id)),
        };
    }
    best.expect("association requires at least one active cell").1
}

fn pico_bias(c: &Cell, offset_db: f64) -> f64 {
    if c.layer == Layer::Pico {
        offset_db
    } else {
        0.0
    }
}

/// Downlink serving cell of UE column `ue`: maximum RSRP.
pub fn associate_dl(ue: usize, gains: &CouplingGainMatrix, cells: &[Cell]) -> CellId {
    let rows = row_cells(gains, cells);
    argmax(&rows, |i, c| c.tx_power_dbm + gains.gain(i, ue))
}

/// Uplink serving cell of UE column `ue` under `policy`.
pub fn associate_ul(
    ue: usize,
    gains: &CouplingGainMatrix,
    cells: &[Cell],
    policy: AssociationPolicy,
    metric: UlMetric,
) -> CellId {
    let rows = row_cells(gains, cells);
    ul_for(&rows, ue, gains, policy, metric)
}

fn ul_for(
    rows: &[&Cell],
    ue: usize,
    gains: &CouplingGainMatrix,
    policy: AssociationPolicy,
    metric: UlMetric,
) -> CellId {
    match policy {
        AssociationPolicy::Coupled => argmax(rows, |i, c| c.tx_power_dbm + gains.gain(i, ue)),
        AssociationPolicy::Dude => match metric {
            UlMetric::CouplingGain => argmax(rows, |i, _| gains.gain(i, ue)),
            UlMetric::RawPathloss => argmax(rows, |i, _| -gains.pathloss(i, ue)),
        },
        AssociationPolicy::RangeExtension { offset_db } => {
            argmax(rows, |i, c| c.tx_power_dbm + gains.gain(i, ue) + pico_bias(c, offset_db))
        }
    }
}

/// Associates every UE column of `gains`.
pub fn associate(
    gains: &CouplingGainMatrix,
    cells: &[Cell],
    policy: AssociationPolicy,
    metric: UlMetric,
) -> Association {
    let rows = row_cells(gains, cells);
    let n = gains.n_ues();
    let mut dl = Vec::with_capacity(n);
    let mut ul = Vec::with_capacity(n);
    for u in 0..n {
        // range extension biases both directions
        let d = match policy {
            AssociationPolicy::RangeExtension { offset_db } => {
                argmax(&rows, |i, c| c.tx_power_dbm + gains.gain(i, u) + pico_bias(c, offset_db))
            }
            _ => argmax(&rows, |i, c| c.tx_power_dbm + gains.gain(i, u)),
        };
        let up = match policy {
            AssociationPolicy::Dude => ul_for(&rows, u, gains, policy, metric),
            _ => d,
        };
        dl.push(d);
        ul.push(up);
    }
    Association {
        policy,
        ue_ids: gains.ue_ids().to_vec(),
        dl,
        ul,
    }
}

/// UEs whose uplink and downlink serving cells differ.
pub fn decoupled_set(a: &Association) -> Vec<UeId> {
    a.ue_ids
        .iter()
        .zip(a.dl.iter().zip(&a.ul))
        .filter(|(_, (d, u))| d != u)
        .map(|(id, _)| *id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::build_gain_matrix;
    use crate::scenario::{Area, Point, Scenario};

    /// Two-cell axis: small cell at x=0 (23 dBm, exponent 3.6), macro at
    /// x=100 (46 dBm, exponent 4), no antenna gains, no reference loss.
    fn axis_scenario() -> Scenario {
        let cells = vec![
            Cell {
                id: CellId(0),
                layer: Layer::Pico,
                position: Point::new(0.0, 0.0),
                tx_power_dbm: 23.0,
                antenna_gain_dbi: 0.0,
                active: true,
            },
            Cell {
                id: CellId(1),
                layer: Layer::Macro,
                position: Point::new(100.0, 0.0),
                tx_power_dbm: 46.0,
                antenna_gain_dbi: 0.0,
                active: true,
            },
        ];
        let mut s = Scenario::new(cells, Area::square(100.0), 1.0).unwrap();
        s.propagation.model.exponent_pico = 3.6;
        s.propagation.model.exponent_macro = 4.0;
        s
    }

    fn gains_at(s: &Scenario, xs: &[f64]) -> CouplingGainMatrix {
        let ues: Vec<_> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| s.probe_ue(UeId(i as u32), Point::new(*x, 0.0)))
            .collect();
        build_gain_matrix(s, &ues, &s.propagation.model, 0).unwrap()
    }

    #[test]
    fn two_cell_axis_at_forty() {
        let s = axis_scenario();
        let g = gains_at(&s, &[40.0]);
        // oracle: direct RSRP / pathloss evaluation
        let rsrp_s = 23.0 - 36.0 * 40f64.log10();
        let rsrp_m = 46.0 - 40.0 * 60f64.log10();
        assert!((rsrp_s - -34.67).abs() < 0.01 && (rsrp_m - -25.13).abs() < 0.01);
        assert_eq!(associate_dl(0, &g, &s.cells), CellId(1));
        let pl_s = 36.0 * 40f64.log10();
        let pl_m = 40.0 * 60f64.log10();
        assert!((pl_s - 57.67).abs() < 0.01 && (pl_m - 71.13).abs() < 0.01);
        assert_eq!(
            associate_ul(0, &g, &s.cells, AssociationPolicy::Dude, UlMetric::CouplingGain),
            CellId(0)
        );
        assert_eq!(
            associate_ul(0, &g, &s.cells, AssociationPolicy::Coupled, UlMetric::CouplingGain),
            CellId(1)
        );
    }

    #[test]
    fn decoupled_region_on_axis() {
        let s = axis_scenario();
        let g = gains_at(&s, &[10.0, 40.0, 90.0]);
        let a = associate(&g, &s.cells, AssociationPolicy::Dude, UlMetric::CouplingGain);
        assert_eq!(decoupled_set(&a), vec![UeId(1)]);
        let c = associate(&g, &s.cells, AssociationPolicy::Coupled, UlMetric::CouplingGain);
        assert!(decoupled_set(&c).is_empty());
        assert_eq!(c.ul, c.dl);
    }

    #[test]
    fn tie_goes_to_lowest_id() {
        let mut s = axis_scenario();
        for c in &mut s.cells {
            c.id = CellId(if c.id.0 == 0 { 7 } else { 3 });
            c.tx_power_dbm = 30.0;
            c.layer = Layer::Macro;
        }
        s.propagation.model.exponent_pico = 4.0;
        let g = gains_at(&s, &[50.0]);
        assert_eq!(associate_dl(0, &g, &s.cells), CellId(3));
        assert_eq!(
            associate_ul(0, &g, &s.cells, AssociationPolicy::Dude, UlMetric::CouplingGain),
            CellId(3)
        );
    }

    #[test]
    fn zero_offset_range_extension_is_coupled() {
        let s = axis_scenario();
        let xs: Vec<f64> = (1..100).map(|x| x as f64).collect();
        let g = gains_at(&s, &xs);
        let re = associate(&g, &s.cells, AssociationPolicy::RangeExtension { offset_db: 0.0 }, UlMetric::CouplingGain);
        let co = associate(&g, &s.cells, AssociationPolicy::Coupled, UlMetric::CouplingGain);
        assert_eq!(re.dl, co.dl);
        assert_eq!(re.ul, co.ul);
        // a large offset pushes UEs onto the small cell in both directions
        let big = associate(&g, &s.cells, AssociationPolicy::RangeExtension { offset_db: 40.0 }, UlMetric::CouplingGain);
        assert!(decoupled_set(&big).is_empty());
        let on_small = |a: &Association| a.dl.iter().filter(|c| **c == CellId(0)).count();
        assert!(on_small(&big) > on_small(&co));
    }

    #[test]
    fn single_cell_never_decouples() {
        let mut s = axis_scenario();
        s.cells.truncate(1);
        let g = gains_at(&s, &[10.0, 50.0, 99.0]);
        let a = associate(&g, &s.cells, AssociationPolicy::Dude, UlMetric::CouplingGain);
        assert!(decoupled_set(&a).is_empty());
    }

    #[test]
    fn raw_pathloss_metric_ignores_antenna_gain() {
        let mut s = axis_scenario();
        // give the macro a large receive gain; equal exponents
        s.cells[1].antenna_gain_dbi = 20.0;
        s.propagation.model.exponent_pico = 4.0;
        let g = gains_at(&s, &[45.0]);
        assert_eq!(
            associate_ul(0, &g, &s.cells, AssociationPolicy::Dude, UlMetric::RawPathloss),
            CellId(0)
        );
        assert_eq!(
            associate_ul(0, &g, &s.cells, AssociationPolicy::Dude, UlMetric::CouplingGain),
            CellId(1)
        );
    }

    #[test]
    fn policy_names() {
        assert_eq!("coupled".parse::<AssociationPolicy>().unwrap(), AssociationPolicy::Coupled);
        assert_eq!("dude".parse::<AssociationPolicy>().unwrap(), AssociationPolicy::Dude);
        assert_eq!(
            "re:6".parse::<AssociationPolicy>().unwrap(),
            AssociationPolicy::RangeExtension { offset_db: 6.0 }
        );
        assert!("re:-1".parse::<AssociationPolicy>().is_err());
        assert!("rsrp".parse::<AssociationPolicy>().is_err());
        let p = AssociationPolicy::RangeExtension { offset_db: 4.5 };
        assert_eq!(p.to_string().parse::<AssociationPolicy>().unwrap(), p);
    }
}
