//! Snapshot-based system-level simulator for heterogeneous cellular networks
//! with decoupled uplink/downlink cell association.
//!
//! The uplink serving cell of a UE is chosen by minimum coupling loss while the
//! downlink serving cell is chosen by maximum received power. The crate
//! compares that rule against conventional coupled association on the same
//! deployments, with an exact two-cell analytic model used as an oracle.

pub mod analytic;
pub mod association;
pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod powerctl;
pub mod presets;
pub mod propagation;
pub mod raster;
pub mod scenario;
pub mod scheduler;
pub mod seed;
pub mod units;

pub use association::{Association, AssociationPolicy, UlMetric};
pub use engine::{CampaignMetrics, CoverageRaster, SnapshotResult};
pub use error::{Error, Result};
pub use scenario::{Cell, CellId, DemandProfile, Layer, Point, Scenario, Ue, UeId};
