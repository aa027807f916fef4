//! Monte Carlo snapshot loop, campaign aggregation, coverage maps and the
//! pico activation sweep.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::association::{associate, decoupled_set, AssociationPolicy};
use crate::error::{Error, Result};
use crate::metrics::percentile_sorted;
use crate::powerctl::{control_uplink_power, interference_map, serving_rows, RbOccupancy};
use crate::propagation::{build_gain_matrix, scenario_provider};
use crate::raster::GridSpec;
use crate::scenario::{activate_cells, generate_ues, CellId, Layer, Point, Scenario, UeId};
use crate::scheduler::{per_rb_rate, schedule_cell, Candidate};
use crate::seed;
use crate::units::{db_to_lin, lin_to_db, noise_power_dbm};

/// Cap on interference/scheduling rounds per snapshot.
pub const MAX_ROUNDS: usize = 10;
/// Rounds stop once no cell's interference level moves by this much.
pub const CONVERGENCE_DB: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct UeOutcome {
    pub id: UeId,
    pub position: Point,
    pub dl_cell: CellId,
    pub ul_cell: CellId,
    pub ul_layer: Layer,
    pub tx_power_dbm: f64,
    pub sinr_db: f64,
    pub rbs: usize,
    pub throughput_bps: f64,
    pub outage: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub id: CellId,
    pub layer: Layer,
    pub ul_ues: usize,
    pub dl_ues: usize,
    pub rbs_used: usize,
    /// Mean interference-plus-noise per RB.
    pub interference_dbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotResult {
    pub seed: u64,
    pub ues: Vec<UeOutcome>,
    /// Active cells in scenario order.
    pub cells: Vec<CellOutcome>,
    pub rounds: usize,
    pub converged: bool,
    /// Per-round interference level of every active cell.
    pub level_history: Vec<Vec<f64>>,
}

impl SnapshotResult {
    pub fn decoupled_count(&self) -> usize {
        self.ues.iter().filter(|u| u.dl_cell != u.ul_cell).count()
    }
}

/// One snapshot: drop, associate, then alternate power control and
/// scheduling until the per-cell interference levels settle.
pub fn run_snapshot(s: &Scenario, policy: AssociationPolicy, seed: u64) -> Result<SnapshotResult> {
    s.validate()?;
    let noise_dbm = noise_power_dbm(s.radio.rb_bandwidth_hz, s.radio.noise_figure_db);
    let noise = db_to_lin(noise_dbm);
    let active: Vec<_> = s.active_cells().collect();

    let ues = generate_ues(s, seed);
    if ues.is_empty() {
        return Ok(SnapshotResult {
            seed,
            ues: Vec::new(),
            cells: active
                .iter()
                .map(|c| CellOutcome {
                    id: c.id,
                    layer: c.layer,
                    ul_ues: 0,
                    dl_ues: 0,
                    rbs_used: 0,
                    interference_dbm: noise_dbm,
                })
                .collect(),
            rounds: 0,
            converged: true,
            level_history: Vec::new(),
        });
    }

    let gains = build_gain_matrix(s, &ues, scenario_provider(s), seed)?;
    let assoc = associate(&gains, &s.cells, policy, s.propagation.ul_metric);
    let serving = serving_rows(&assoc, &gains);
    let n_cells = gains.n_cells();
    let n_rb = s.radio.n_rb;

    // per-cell UE order for RB placement, fixed for the snapshot
    let members: Vec<Vec<usize>> = (0..n_cells)
        .map(|c| {
            let mut m: Vec<usize> = (0..ues.len()).filter(|u| serving[*u] == c).collect();
            let mut rng = seed::rng(seed, &[seed::TAG_OCCUPANCY, gains.cell_ids()[c].0 as u64]);
            m.shuffle(&mut rng);
            m
        })
        .collect();

    let max_power: Vec<f64> = ues.iter().map(|u| u.max_tx_power_dbm).collect();
    let mut occupancy = RbOccupancy::idle(n_rb, ues.len());
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;

    let mut power = max_power.clone();
    let mut sinr = vec![0.0; ues.len()];
    let mut rbs = vec![0usize; ues.len()];
    let mut tput = vec![0.0; ues.len()];
    let mut outage = vec![false; ues.len()];
    let mut levels = vec![noise_dbm; n_cells];

    for round in 0..MAX_ROUNDS {
        // powers carry over between rounds, so they only ever decrease
        if round > 0 {
            power = control_uplink_power(&assoc, &gains, &occupancy, &power, &s.power_control).tx_power_dbm;
        }
        let map = interference_map(&serving, &gains, &occupancy, &power);
        levels = map
            .iter()
            .map(|row| lin_to_db(row.iter().sum::<f64>() / n_rb as f64 + noise))
            .collect();

        for u in 0..ues.len() {
            let c = serving[u];
            let block = &occupancy.blocks[u];
            let row = &map[c];
            let mean_i = if block.is_empty() {
                row.iter().sum::<f64>() / n_rb as f64
            } else {
                row[block.clone()].iter().sum::<f64>() / block.len() as f64
            };
            sinr[u] = power[u] + gains.gain(c, u) - lin_to_db(mean_i + noise);
        }

        let mut next = RbOccupancy::idle(n_rb, ues.len());
        for (c, order) in members.iter().enumerate() {
            let candidates: Vec<Candidate> = order
                .iter()
                .map(|&u| Candidate {
                    ue: UeId(u as u32),
                    per_rb_rate: per_rb_rate(sinr[u], s.radio.rb_bandwidth_hz, &s.link),
                })
                .collect();
            let alloc = schedule_cell(&candidates, n_rb, &s.demand);
            let mut start = 0;
            for (cand, &u) in candidates.iter().zip(order) {
                let n = alloc.rb_count(cand.ue);
                rbs[u] = n;
                next.blocks[u] = start..start + n;
                start += n;
                outage[u] = alloc.outage.contains(&cand.ue);
            }
            for (id, t) in &alloc.throughput {
                tput[id.0 as usize] = *t;
            }
            debug_assert!(start <= n_rb, "cell {c} over-allocated");
        }

        let settled = history.last().is_some_and(|prev: &Vec<f64>| {
            prev.iter()
                .zip(&levels)
                .all(|(a, b)| (a - b).abs() < CONVERGENCE_DB)
        });
        history.push(levels.clone());
        occupancy = next;
        if settled {
            converged = true;
            break;
        }
    }
    if !converged {
        log::debug!("snapshot {seed}: interference did not settle in {MAX_ROUNDS} rounds");
    }

    let mut cells: Vec<CellOutcome> = active
        .iter()
        .enumerate()
        .map(|(i, c)| CellOutcome {
            id: c.id,
            layer: c.layer,
            ul_ues: 0,
            dl_ues: 0,
            rbs_used: 0,
            interference_dbm: levels[i],
        })
        .collect();
    for u in 0..ues.len() {
        cells[serving[u]].ul_ues += 1;
        cells[serving[u]].rbs_used += rbs[u];
        let dl = gains.cell_index(assoc.dl[u]).expect("dl cell in matrix");
        cells[dl].dl_ues += 1;
    }
    let outcomes = ues
        .iter()
        .enumerate()
        .map(|(u, ue)| UeOutcome {
            id: ue.id,
            position: ue.position,
            dl_cell: assoc.dl[u],
            ul_cell: assoc.ul[u],
            ul_layer: active[serving[u]].layer,
            tx_power_dbm: power[u],
            sinr_db: sinr[u],
            rbs: rbs[u],
            throughput_bps: tput[u],
            outage: outage[u],
        })
        .collect();
    debug_assert_eq!(decoupled_set(&assoc).len(), assoc.dl.iter().zip(&assoc.ul).filter(|(d, u)| d != u).count());

    Ok(SnapshotResult {
        seed,
        ues: outcomes,
        cells,
        rounds: history.len(),
        converged,
        level_history: history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignMetrics {
    pub snapshots: usize,
    pub p5_bps: f64,
    pub p50_bps: f64,
    pub p90_bps: f64,
    pub p98_bps: f64,
    pub outage_macro: f64,
    pub outage_pico: f64,
    pub mean_ues_macro: f64,
    pub mean_ues_pico: f64,
    pub decoupled_fraction: f64,
    pub total_ues: usize,
    pub unconverged_snapshots: usize,
}

impl CampaignMetrics {
    /// Pools per-UE samples over snapshots; order of `snapshots` matters
    /// only through the (sorted) pooled sample, so any execution order of
    /// the producers gives the same result.
    pub fn aggregate(snapshots: &[SnapshotResult]) -> Self {
        let mut tput: Vec<f64> = Vec::new();
        let mut on_layer = [0usize; 2];
        let mut out_layer = [0usize; 2];
        let mut cells_layer = [0usize; 2];
        let mut decoupled = 0;
        for snap in snapshots {
            for u in &snap.ues {
                tput.push(u.throughput_bps);
                let l = u.ul_layer as usize;
                on_layer[l] += 1;
                if u.outage {
                    out_layer[l] += 1;
                }
            }
            for c in &snap.cells {
                cells_layer[c.layer as usize] += 1;
            }
            decoupled += snap.decoupled_count();
        }
        tput.sort_by(f64::total_cmp);
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        CampaignMetrics {
            snapshots: snapshots.len(),
            p5_bps: percentile_sorted(&tput, 5.0),
            p50_bps: percentile_sorted(&tput, 50.0),
            p90_bps: percentile_sorted(&tput, 90.0),
            p98_bps: percentile_sorted(&tput, 98.0),
            outage_macro: ratio(out_layer[Layer::Macro as usize], on_layer[Layer::Macro as usize]),
            outage_pico: ratio(out_layer[Layer::Pico as usize], on_layer[Layer::Pico as usize]),
            mean_ues_macro: ratio(on_layer[Layer::Macro as usize], cells_layer[Layer::Macro as usize]),
            mean_ues_pico: ratio(on_layer[Layer::Pico as usize], cells_layer[Layer::Pico as usize]),
            decoupled_fraction: ratio(decoupled, tput.len()),
            total_ues: tput.len(),
            unconverged_snapshots: snapshots.iter().filter(|s| !s.converged).count(),
        }
    }
}

pub fn snapshot_seed(master_seed: u64, index: usize) -> u64 {
    seed::derive(master_seed, &[seed::TAG_SNAPSHOT, index as u64])
}

/// Runs all snapshots on the current rayon pool.
pub fn run_snapshots(
    s: &Scenario,
    policy: AssociationPolicy,
    n_snapshots: usize,
    master_seed: u64,
) -> Result<Vec<SnapshotResult>> {
    if n_snapshots == 0 {
        return Err(Error::invalid("snapshots", "must be at least 1"));
    }
    (0..n_snapshots)
        .into_par_iter()
        .map(|i| run_snapshot(s, policy, snapshot_seed(master_seed, i)))
        .collect()
}

pub fn run_campaign(
    s: &Scenario,
    policy: AssociationPolicy,
    n_snapshots: usize,
    master_seed: u64,
) -> Result<CampaignMetrics> {
    let snaps = run_snapshots(s, policy, n_snapshots, master_seed)?;
    Ok(CampaignMetrics::aggregate(&snaps))
}

/// [`run_campaign`] on a dedicated pool of `workers` threads.
pub fn run_campaign_with_workers(
    s: &Scenario,
    policy: AssociationPolicy,
    n_snapshots: usize,
    master_seed: u64,
    workers: usize,
) -> Result<CampaignMetrics> {
    with_workers(workers, || run_campaign(s, policy, n_snapshots, master_seed))
}

pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    pool.install(f)
}

/// Per-prefix campaigns with identical snapshot seeds across prefixes.
pub fn sweep_pico_activation(
    s: &Scenario,
    policy: AssociationPolicy,
    order: &[CellId],
    n_snapshots: usize,
    master_seed: u64,
) -> Result<Vec<(usize, CampaignMetrics)>> {
    (0..=order.len())
        .map(|k| {
            let sk = activate_cells(s, k, order)?;
            Ok((k, run_campaign(&sk, policy, n_snapshots, master_seed)?))
        })
        .collect()
}

/// Uplink serving layer at every pixel centre.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRaster {
    pub grid: GridSpec,
    /// Row-major from the southern row.
    pub labels: Vec<Layer>,
    pub macro_fraction: f64,
    pub pico_fraction: f64,
}

impl CoverageRaster {
    /// Plain PGM, 0 = macro and 255 = pico, northern row first.
    pub fn to_pgm(&self) -> String {
        let g = &self.grid;
        let mut out = format!("P2\n{} {}\n255\n", g.width, g.height);
        for row in (0..g.height).rev() {
            let line: Vec<&str> = self.labels[row * g.width..(row + 1) * g.width]
                .iter()
                .map(|l| match l {
                    Layer::Macro => "0",
                    Layer::Pico => "255",
                })
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn sidecar(&self) -> String {
        format!("pico_fraction={:.4}\n", self.pico_fraction)
    }
}

pub fn coverage_raster(s: &Scenario, policy: AssociationPolicy, pixel: f64) -> Result<CoverageRaster> {
    if !(pixel.is_finite() && pixel > 0.0) {
        return Err(Error::invalid("pixel", "must be positive"));
    }
    let mut probe_s = s.clone();
    probe_s.propagation.model.shadowing_sigma_db = 0.0;
    probe_s.validate()?;
    let grid = GridSpec {
        origin: s.area.min,
        pixel_size: pixel,
        width: ((s.area.width() / pixel).ceil() as usize).max(1),
        height: ((s.area.height() / pixel).ceil() as usize).max(1),
    };
    grid.validate("pixel")?;
    let probes: Vec<_> = (0..grid.height)
        .flat_map(|row| (0..grid.width).map(move |col| (col, row)))
        .enumerate()
        .map(|(i, (col, row))| {
            let c = grid.pixel_center(col, row);
            // keep probes inside the area on partial edge pixels
            let p = Point::new(c.x.min(s.area.max.x), c.y.min(s.area.max.y));
            probe_s.probe_ue(UeId(i as u32), p)
        })
        .collect();
    let gains = build_gain_matrix(&probe_s, &probes, scenario_provider(&probe_s), 0)?;
    let assoc = associate(&gains, &probe_s.cells, policy, probe_s.propagation.ul_metric);
    let layer_of = |id: CellId| probe_s.cell(id).map(|c| c.layer).unwrap_or(Layer::Macro);
    let labels: Vec<Layer> = assoc.ul.iter().map(|c| layer_of(*c)).collect();
    let picos = labels.iter().filter(|l| **l == Layer::Pico).count();
    let pico_fraction = picos as f64 / labels.len() as f64;
    Ok(CoverageRaster {
        grid,
        labels,
        macro_fraction: 1.0 - pico_fraction,
        pico_fraction,
    })
}
