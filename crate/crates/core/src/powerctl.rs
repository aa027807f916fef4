//! Interference-cap uplink power control.
//!
//! Each cell has an interference ceiling per resource block. While any cell
//! measures interference above its ceiling on some RB, the UEs of *other*
//! cells that hit that RB above a contribution floor back off by one step.
//! Rounds are synchronous: all measurements in a round use the previous
//! round's powers.

use std::ops::Range;

use crate::association::Association;
use crate::error::{Error, Result};
use crate::propagation::CouplingGainMatrix;
use crate::units::{db_to_lin, lin_to_db};

/// Slack for comparing measured interference against the ceiling.
const LIMIT_TOL_DB: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerControlParams {
    /// Interference ceiling per RB.
    pub interference_limit_dbm: f64,
    pub step_db: f64,
    pub p_min_dbm: f64,
    pub max_iterations: usize,
    /// Contributions below `limit - floor_offset` never trigger a reduction.
    pub floor_offset_db: f64,
}

impl Default for PowerControlParams {
    fn default() -> Self {
        PowerControlParams {
            interference_limit_dbm: -105.0,
            step_db: 1.0,
            p_min_dbm: -40.0,
            max_iterations: 20,
            floor_offset_db: 10.0,
        }
    }
}

impl PowerControlParams {
    pub fn validate(&self, ue_max_dbm: f64) -> Result<()> {
        if !self.interference_limit_dbm.is_finite() {
            return Err(Error::invalid("power_control.interference_limit_dbm", "must be finite"));
        }
        if !(self.step_db.is_finite() && self.step_db > 0.0) {
            return Err(Error::invalid("power_control.step_db", "must be positive"));
        }
        if !(self.p_min_dbm.is_finite() && self.p_min_dbm < ue_max_dbm) {
            return Err(Error::invalid("power_control.p_min_dbm", "must be below the UE max power"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("power_control.max_iterations", "must be at least 1"));
        }
        if !(self.floor_offset_db.is_finite() && self.floor_offset_db >= 0.0) {
            return Err(Error::invalid("power_control.floor_offset_db", "must be >= 0"));
        }
        Ok(())
    }

    pub fn contribution_floor_dbm(&self) -> f64 {
        self.interference_limit_dbm - self.floor_offset_db
    }
}

/// Contiguous RB block per UE column. Empty blocks mean no transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RbOccupancy {
    pub n_rb: usize,
    pub blocks: Vec<Range<usize>>,
}

impl RbOccupancy {
    pub fn idle(n_rb: usize, n_ues: usize) -> Self {
        RbOccupancy {
            n_rb,
            blocks: vec![0..0; n_ues],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// No cell above its ceiling.
    NoViolation,
    /// Violations remain but every offending UE is already at the floor.
    NoChange,
    /// Hit `max_iterations`.
    IterationCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerState {
    pub tx_power_dbm: Vec<f64>,
    /// Highest per-RB interference over all cells, measured at the start of
    /// every round (including the final, non-reducing one).
    pub iteration_log: Vec<f64>,
    /// Number of reduction rounds applied.
    pub iterations: usize,
    pub stop: StopReason,
    /// Power trajectory, one entry per reduction round plus the start.
    pub history: Vec<Vec<f64>>,
}

impl PowerState {
    pub fn converged(&self) -> bool {
        self.stop != StopReason::IterationCap
    }
}

/// Serving-cell matrix row for every UE column.
pub fn serving_rows(assoc: &Association, gains: &CouplingGainMatrix) -> Vec<usize> {
    assoc
        .ul
        .iter()
        .map(|c| gains.cell_index(*c).expect("serving cell missing from gain matrix"))
        .collect()
}

/// Linear (mW) interference per matrix row and RB from all UEs served by
/// other cells.
pub fn interference_map(
    serving: &[usize],
    gains: &CouplingGainMatrix,
    occupancy: &RbOccupancy,
    tx_power_dbm: &[f64],
) -> Vec<Vec<f64>> {
    let mut map = vec![vec![0.0; occupancy.n_rb]; gains.n_cells()];
    for (cell, row) in map.iter_mut().enumerate() {
        for (ue, block) in occupancy.blocks.iter().enumerate() {
            if block.is_empty() || serving[ue] == cell {
                continue;
            }
            let p = db_to_lin(tx_power_dbm[ue] + gains.gain(cell, ue));
            for v in &mut row[block.clone()] {
                *v += p;
            }
        }
    }
    map
}

/// UEs that must back off given the current powers.
fn offenders(
    serving: &[usize],
    gains: &CouplingGainMatrix,
    occupancy: &RbOccupancy,
    tx_power_dbm: &[f64],
    params: &PowerControlParams,
) -> (bool, f64, Vec<bool>) {
    let map = interference_map(serving, gains, occupancy, tx_power_dbm);
    let limit = params.interference_limit_dbm + LIMIT_TOL_DB;
    let floor = params.contribution_floor_dbm();
    let mut any_violation = false;
    let mut peak = f64::NEG_INFINITY;
    let mut mark = vec![false; serving.len()];
    for (cell, row) in map.iter().enumerate() {
        let violated: Vec<bool> = row.iter().map(|i| lin_to_db(*i) > limit).collect();
        peak = row.iter().fold(peak, |m, i| m.max(lin_to_db(*i)));
        if !violated.iter().any(|v| *v) {
            continue;
        }
        any_violation = true;
        for (ue, block) in occupancy.blocks.iter().enumerate() {
            if serving[ue] == cell || block.is_empty() {
                continue;
            }
            let hits = violated[block.clone()].iter().any(|v| *v);
            if hits && tx_power_dbm[ue] + gains.gain(cell, ue) >= floor {
                mark[ue] = true;
            }
        }
    }
    (any_violation, peak, mark)
}

/// Runs the back-off rounds starting from `start_dbm` (normally every UE at
/// its maximum power).
pub fn control_uplink_power(
    assoc: &Association,
    gains: &CouplingGainMatrix,
    occupancy: &RbOccupancy,
    start_dbm: &[f64],
    params: &PowerControlParams,
) -> PowerState {
    let serving = serving_rows(assoc, gains);
    let mut power = start_dbm.to_vec();
    let mut log = Vec::new();
    let mut history = vec![power.clone()];
    let mut iterations = 0;
    let stop = loop {
        let (violation, peak, mark) = offenders(&serving, gains, occupancy, &power, params);
        log.push(peak);
        if !violation {
            break StopReason::NoViolation;
        }
        if iterations == params.max_iterations {
            break StopReason::IterationCap;
        }
        let mut changed = false;
        for (p, m) in power.iter_mut().zip(&mark) {
            if *m {
                let next = (*p - params.step_db).max(params.p_min_dbm);
                if next < *p {
                    *p = next;
                    changed = true;
                }
            }
        }
        if !changed {
            break StopReason::NoChange;
        }
        iterations += 1;
        history.push(power.clone());
    };
    log::trace!("power control stopped after {iterations} rounds: {stop:?}");
    PowerState {
        tx_power_dbm: power,
        iteration_log: log,
        iterations,
        stop,
        history,
    }
}

/// True when every cell is either within its ceiling on all RBs or every
/// external UE contributing above the floor to a violated RB is at `p_min`.
pub fn terminal_condition_holds(
    assoc: &Association,
    gains: &CouplingGainMatrix,
    occupancy: &RbOccupancy,
    state: &PowerState,
    params: &PowerControlParams,
) -> bool {
    let serving = serving_rows(assoc, gains);
    let (_, _, mark) = offenders(&serving, gains, occupancy, &state.tx_power_dbm, params);
    mark.iter()
        .zip(&state.tx_power_dbm)
        .all(|(m, p)| !*m || *p <= params.p_min_dbm)
}
