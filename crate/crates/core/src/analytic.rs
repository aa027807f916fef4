//! Two-cell uplink model on a line: a small cell at x = 0 and a macro cell
//! at x = separation, no fading or shadowing, normalised quantities.
//!
//! Used as an oracle for the simulator. Rates are `bw * log2(1 + ratio)`,
//! with the ratio an SNR (noise-limited single UE) or an SIR (three UEs,
//! noise neglected).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::units::db_to_lin;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticParams {
    pub p_ue_dbm: f64,
    pub noise_dbm: f64,
    pub p_macro_dbm: f64,
    pub p_small_dbm: f64,
    pub alpha_macro: f64,
    pub alpha_small: f64,
    /// Small-cell to macro-cell distance.
    pub separation: f64,
    pub bw: f64,
}

impl Default for AnalyticParams {
    fn default() -> Self {
        AnalyticParams {
            p_ue_dbm: 20.0,
            noise_dbm: 0.0,
            p_macro_dbm: 46.0,
            p_small_dbm: 23.0,
            alpha_macro: 4.0,
            alpha_small: 3.6,
            separation: 100.0,
            bw: 1.0,
        }
    }
}

impl AnalyticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err(Error::invalid("separation", "must be positive"));
        }
        if !(self.alpha_macro > 0.0 && self.alpha_small > 0.0) {
            return Err(Error::invalid("alpha", "exponents must be positive"));
        }
        Ok(())
    }

    fn alpha(&self, cell: Site) -> f64 {
        match cell {
            Site::Small => self.alpha_small,
            Site::Macro => self.alpha_macro,
        }
    }

    /// Pathloss in dB at distance `d` from `cell`.
    fn pathloss_db(&self, cell: Site, d: f64) -> f64 {
        10.0 * self.alpha(cell) * d.log10()
    }

    fn rsrp_dbm(&self, cell: Site, d: f64) -> f64 {
        let p = match cell {
            Site::Small => self.p_small_dbm,
            Site::Macro => self.p_macro_dbm,
        };
        p - self.pathloss_db(cell, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Small,
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Uplink by minimum pathloss.
    Pathloss,
    /// Uplink follows downlink received power.
    ReceivedPower,
}

/// Serving cell for a UE at `x` on the axis.
pub fn serving_cell(p: &AnalyticParams, x: f64, mode: Mode) -> Site {
    let ds = x;
    let dm = p.separation - x;
    let small_wins = match mode {
        Mode::Pathloss => p.pathloss_db(Site::Small, ds) <= p.pathloss_db(Site::Macro, dm),
        Mode::ReceivedPower => p.rsrp_dbm(Site::Small, ds) >= p.rsrp_dbm(Site::Macro, dm),
    };
    if small_wins {
        Site::Small
    } else {
        Site::Macro
    }
}

/// Noise-limited uplink rate of a single UE at `x` (0 < x < separation).
pub fn rate_vs_position(p: &AnalyticParams, x: f64, mode: Mode) -> f64 {
    let (site, d) = match serving_cell(p, x, mode) {
        Site::Small => (Site::Small, x),
        Site::Macro => (Site::Macro, p.separation - x),
    };
    let snr = db_to_lin(p.p_ue_dbm) / (db_to_lin(p.noise_dbm) * d.powf(p.alpha(site)));
    p.bw * snr.ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBorders {
    /// Equal downlink received power.
    pub dl_border: f64,
    /// Equal pathloss.
    pub ul_border: f64,
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, what: &str) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::NoDecouplingRegion(format!("{what} has no sign change on the axis")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * mid.abs().max(1e-300) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Borders by bisection on the open axis.
pub fn cell_borders(p: &AnalyticParams) -> Result<CellBorders> {
    p.validate()?;
    let eps = p.separation * 1e-9;
    let (lo, hi) = (eps, p.separation - eps);
    let dl = bisect(
        lo,
        hi,
        |x| p.rsrp_dbm(Site::Small, x) - p.rsrp_dbm(Site::Macro, p.separation - x),
        "downlink received-power difference",
    )?;
    let ul = bisect(
        lo,
        hi,
        |x| p.pathloss_db(Site::Macro, p.separation - x) - p.pathloss_db(Site::Small, x),
        "pathloss difference",
    )?;
    Ok(CellBorders {
        dl_border: dl,
        ul_border: ul,
    })
}

/// A distance label in the three-UE layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Link {
    Ue1Small,
    Ue1Macro,
    Ue2Small,
    Ue2Macro,
    Ue3Small,
    Ue3Macro,
    InterSite,
}

impl Link {
    pub const ALL: [Link; 7] = [
        Link::Ue1Small,
        Link::Ue1Macro,
        Link::Ue2Small,
        Link::Ue2Macro,
        Link::Ue3Small,
        Link::Ue3Macro,
        Link::InterSite,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Link::Ue1Small => "ue1-small",
            Link::Ue1Macro => "ue1-macro",
            Link::Ue2Small => "ue2-small",
            Link::Ue2Macro => "ue2-macro",
            Link::Ue3Small => "ue3-small",
            Link::Ue3Macro => "ue3-macro",
            Link::InterSite => "inter-site",
        }
    }

    pub fn from_name(s: &str) -> Option<Link> {
        Link::ALL.into_iter().find(|l| l.name() == s)
    }

    fn of(ue: usize, site: Site) -> Link {
        match (ue, site) {
            (0, Site::Small) => Link::Ue1Small,
            (0, Site::Macro) => Link::Ue1Macro,
            (1, Site::Small) => Link::Ue2Small,
            (1, Site::Macro) => Link::Ue2Macro,
            (2, Site::Small) => Link::Ue3Small,
            _ => Link::Ue3Macro,
        }
    }
}

/// Which link each of the four given distances measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interpretation {
    pub labels: [Link; 4],
}

/// How cross-cell interference enters the SIR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Sum of all cross-cell UEs.
    Sum,
    /// Strongest cross-cell UE only.
    Dominant,
}

/// How co-served UEs share a cell's band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandSharing {
    /// Every UE uses the full band.
    Full,
    /// Each of n UEs gets 1/n of the band, interference unchanged.
    EqualSplit,
    /// Each of n UEs gets an aligned 1/n sub-band; each sub-band sees only
    /// the cross-cell UE occupying the same sub-band.
    AlignedSubbands,
}

/// Pathloss exponent applied to an interfering link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentRule {
    /// Exponent of the receiving cell.
    Receiver,
    /// Exponent of the transmitting UE's serving cell.
    ServingCell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterferenceModel {
    pub aggregation: Aggregation,
    pub sharing: BandSharing,
    pub exponent: ExponentRule,
}

impl InterferenceModel {
    /// All distinct conventions. Aligned sub-bands have a single interferer
    /// per sub-band, so aggregation is irrelevant there.
    pub fn all() -> Vec<InterferenceModel> {
        let mut out = Vec::new();
        for aggregation in [Aggregation::Sum, Aggregation::Dominant] {
            for sharing in [BandSharing::Full, BandSharing::EqualSplit, BandSharing::AlignedSubbands] {
                if sharing == BandSharing::AlignedSubbands && aggregation == Aggregation::Dominant {
                    continue;
                }
                for exponent in [ExponentRule::Receiver, ExponentRule::ServingCell] {
                    out.push(InterferenceModel {
                        aggregation,
                        sharing,
                        exponent,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeUeGeometry {
    pub distances: [f64; 4],
    pub interpretation: Interpretation,
}

impl ThreeUeGeometry {
    /// Distances for all six UE-cell links. A UE with only one labelled
    /// distance sits on the segment between the cells; a UE with both is
    /// off-axis and must satisfy the triangle inequality. An unlabelled
    /// inter-site distance falls back to `separation`.
    pub fn resolve(&self, separation: f64) -> Result<[[f64; 2]; 3]> {
        let mut known: [Option<f64>; 7] = [None; 7];
        for (label, d) in self.interpretation.labels.iter().zip(self.distances) {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Geometry(format!("{} must be positive", label.name())));
            }
            let slot = &mut known[*label as usize];
            if slot.is_some() {
                return Err(Error::Geometry(format!("{} labelled twice", label.name())));
            }
            *slot = Some(d);
        }
        let site_d = known[Link::InterSite as usize].unwrap_or(separation);
        let mut out = [[0.0; 2]; 3];
        for (ue, pair) in out.iter_mut().enumerate() {
            let s = known[Link::of(ue, Site::Small) as usize];
            let m = known[Link::of(ue, Site::Macro) as usize];
            let (ds, dm) = match (s, m) {
                (Some(s), Some(m)) => {
                    let tol = 1e-9 * site_d;
                    if (s - m).abs() > site_d + tol || s + m < site_d - tol {
                        return Err(Error::Geometry(format!(
                            "UE{} distances {s}/{m} violate the triangle inequality",
                            ue + 1
                        )));
                    }
                    (s, m)
                }
                (Some(s), None) => (s, site_d - s),
                (None, Some(m)) => (site_d - m, m),
                (None, None) => {
                    return Err(Error::Geometry(format!("UE{} has no labelled distance", ue + 1)));
                }
            };
            if !(ds > 0.0 && dm > 0.0) {
                return Err(Error::Geometry(format!("UE{} does not lie between the cells", ue + 1)));
            }
            *pair = [ds, dm];
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBreakdown {
    pub r_m: f64,
    pub r_s: f64,
    pub r_t: f64,
}

impl RateBreakdown {
    fn max_abs_diff(&self, other: &RateBreakdown) -> f64 {
        (self.r_m - other.r_m)
            .abs()
            .max((self.r_s - other.r_s).abs())
            .max((self.r_t - other.r_t).abs())
    }
}

/// Unnormalised per-cell uplink rates for one mode.
fn raw_rates(
    p: &AnalyticParams,
    links: &[[f64; 2]; 3],
    model: InterferenceModel,
    mode: Mode,
) -> Result<[f64; 2]> {
    // UE1 on the small cell, UE3 on the macro, UE2 switches
    let serve = [
        Site::Small,
        match mode {
            Mode::Pathloss => Site::Small,
            Mode::ReceivedPower => Site::Macro,
        },
        Site::Macro,
    ];
    let p_ue = db_to_lin(p.p_ue_dbm);
    let received = |ue: usize, at: Site| -> f64 {
        let alpha = match model.exponent {
            ExponentRule::Receiver => p.alpha(at),
            ExponentRule::ServingCell => p.alpha(serve[ue]),
        };
        let d = links[ue][at as usize];
        p_ue / d.powf(alpha)
    };
    let log2_1p = |x: f64| x.ln_1p() / std::f64::consts::LN_2;

    let mut rates = [0.0; 2];
    for site in [Site::Small, Site::Macro] {
        let users: Vec<usize> = (0..3).filter(|u| serve[*u] == site).collect();
        let others: Vec<usize> = (0..3).filter(|u| serve[*u] != site).collect();
        let rate = &mut rates[site as usize];
        match model.sharing {
            BandSharing::AlignedSubbands => {
                let other_site = match site {
                    Site::Small => Site::Macro,
                    Site::Macro => Site::Small,
                };
                let other_users: Vec<usize> = (0..3).filter(|u| serve[*u] == other_site).collect();
                // breakpoints of both partitions of [0, 1)
                let mut cuts: Vec<f64> = (0..=users.len())
                    .map(|i| i as f64 / users.len() as f64)
                    .chain((0..=other_users.len()).map(|i| i as f64 / other_users.len() as f64))
                    .collect();
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                for w in cuts.windows(2) {
                    let mid = 0.5 * (w[0] + w[1]);
                    let me = users[(mid * users.len() as f64) as usize];
                    let it = other_users[(mid * other_users.len() as f64) as usize];
                    let interference = received(it, site);
                    if !(interference > 0.0) {
                        return Err(Error::ZeroInterference);
                    }
                    *rate += (w[1] - w[0]) * log2_1p(received(me, site) / interference);
                }
            }
            _ => {
                let contributions = others.iter().map(|o| received(*o, site));
                let interference = match model.aggregation {
                    Aggregation::Sum => contributions.sum::<f64>(),
                    Aggregation::Dominant => contributions.fold(0.0, f64::max),
                };
                if !(interference > 0.0) {
                    return Err(Error::ZeroInterference);
                }
                let share = match model.sharing {
                    BandSharing::EqualSplit => 1.0 / users.len() as f64,
                    _ => 1.0,
                };
                for u in &users {
                    *rate += share * log2_1p(received(*u, site) / interference);
                }
            }
        }
        *rate *= p.bw;
    }
    if rates.iter().any(|r| !r.is_finite()) {
        return Err(Error::ZeroInterference);
    }
    Ok(rates)
}

/// Uplink rates of the three-UE layout, normalised so that the
/// pathloss-mode total equals 1 (the same constant scales both modes).
pub fn three_ue_total_rate(
    p: &AnalyticParams,
    g: &ThreeUeGeometry,
    model: InterferenceModel,
    mode: Mode,
) -> Result<RateBreakdown> {
    p.validate()?;
    let links = g.resolve(p.separation)?;
    let reference = raw_rates(p, &links, model, Mode::Pathloss)?;
    let norm = reference[0] + reference[1];
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::ZeroInterference);
    }
    let r = if mode == Mode::Pathloss {
        reference
    } else {
        raw_rates(p, &links, model, mode)?
    };
    let (r_s, r_m) = (r[0] / norm, r[1] / norm);
    Ok(RateBreakdown {
        r_m,
        r_s,
        r_t: r_m + r_s,
    })
}

/// Target breakdowns for the two modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets {
    pub pathloss: RateBreakdown,
    pub received_power: RateBreakdown,
}

impl Targets {
    /// Totals of 1 (pathloss mode) and 0.67 (received-power mode) split as
    /// (0.46 macro, 0.54 small) and (0.34 macro, 0.33 small).
    pub fn reported() -> Self {
        Targets {
            pathloss: RateBreakdown {
                r_m: 0.46,
                r_s: 0.54,
                r_t: 1.0,
            },
            received_power: RateBreakdown {
                r_m: 0.34,
                r_s: 0.33,
                r_t: 0.67,
            },
        }
    }
}

/// Best-fitting layout interpretation and interference convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recovery {
    pub geometry: ThreeUeGeometry,
    pub model: InterferenceModel,
    /// Max absolute error over all six breakdown fields.
    pub residual: f64,
    pub candidates: usize,
}

impl Recovery {
    pub fn evaluate(&self, p: &AnalyticParams) -> Result<(RateBreakdown, RateBreakdown)> {
        Ok((
            three_ue_total_rate(p, &self.geometry, self.model, Mode::Pathloss)?,
            three_ue_total_rate(p, &self.geometry, self.model, Mode::ReceivedPower)?,
        ))
    }
}

/// Every ordered choice of 4 distinct labels out of 7, lexicographic.
fn label_assignments() -> Vec<[Link; 4]> {
    let mut out = Vec::new();
    for a in Link::ALL {
        for b in Link::ALL {
            for c in Link::ALL {
                for d in Link::ALL {
                    let l = [a, b, c, d];
                    let distinct = (0..4).all(|i| (i + 1..4).all(|j| l[i] != l[j]));
                    if distinct {
                        out.push(l);
                    }
                }
            }
        }
    }
    out
}

/// Exhaustive search over layout interpretations and interference
/// conventions for the candidate whose breakdowns best match `targets`.
/// Ties keep the earliest candidate in enumeration order.
pub fn recover_geometry(p: &AnalyticParams, distances: [f64; 4], targets: &Targets) -> Result<Recovery> {
    p.validate()?;
    let models = InterferenceModel::all();
    let mut best: Option<Recovery> = None;
    let mut candidates = 0;
    for labels in label_assignments() {
        let geometry = ThreeUeGeometry {
            distances,
            interpretation: Interpretation { labels },
        };
        if geometry.resolve(p.separation).is_err() {
            continue;
        }
        for model in &models {
            let Ok(pl) = three_ue_total_rate(p, &geometry, *model, Mode::Pathloss) else {
                continue;
            };
            let Ok(rp) = three_ue_total_rate(p, &geometry, *model, Mode::ReceivedPower) else {
                continue;
            };
            candidates += 1;
            let residual = pl
                .max_abs_diff(&targets.pathloss)
                .max(rp.max_abs_diff(&targets.received_power));
            if best.as_ref().is_none_or(|b| residual < b.residual) {
                best = Some(Recovery {
                    geometry,
                    model: *model,
                    residual,
                    candidates: 0,
                });
            }
        }
    }
    let mut best = best.ok_or_else(|| Error::Geometry("no valid layout interpretation".into()))?;
    best.candidates = candidates;
    Ok(best)
}

/// Paper-scale layout distances.
pub const REPORTED_DISTANCES: [f64; 4] = [10.0, 25.0, 80.0, 100.0];

/// Recovered layout shipped with the crate.
pub const DEFAULT_FIXTURE: &str = include_str!("../data/case2.geom");

/// `GEOM v1` fixture text for a recovery.
pub fn write_fixture(r: &Recovery) -> String {
    let g = &r.geometry;
    let mut out = String::from("GEOM v1\n");
    let labels: Vec<&str> = g.interpretation.labels.iter().map(Link::name).collect();
    let _ = writeln!(out, "labels {}", labels.join(" "));
    let ds: Vec<String> = g.distances.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "distances {}", ds.join(" "));
    let _ = writeln!(
        out,
        "aggregation {}",
        match r.model.aggregation {
            Aggregation::Sum => "sum",
            Aggregation::Dominant => "dominant",
        }
    );
    let _ = writeln!(
        out,
        "sharing {}",
        match r.model.sharing {
            BandSharing::Full => "full",
            BandSharing::EqualSplit => "split",
            BandSharing::AlignedSubbands => "aligned",
        }
    );
    let _ = writeln!(
        out,
        "exponent {}",
        match r.model.exponent {
            ExponentRule::Receiver => "receiver",
            ExponentRule::ServingCell => "serving",
        }
    );
    let _ = writeln!(out, "residual {:.6}", r.residual);
    let _ = writeln!(out, "candidates {}", r.candidates);
    out
}

/// Parses a `GEOM v1` fixture. Unknown keys are rejected; `candidates` is
/// optional.
pub fn parse_fixture(text: &str) -> Result<Recovery> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, "GEOM v1")) => {}
        Some((ln, _)) => return Err(Error::parse(ln, "expected `GEOM v1` header")),
        None => return Err(Error::parse(1, "empty fixture")),
    }
    let mut labels = None;
    let mut distances = None;
    let mut aggregation = None;
    let mut sharing = None;
    let mut exponent = None;
    let mut residual = None;
    let mut candidates = 0usize;
    for (ln, line) in lines {
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match key {
            "labels" => {
                let v: Vec<Link> = rest
                    .split_whitespace()
                    .map(|t| Link::from_name(t).ok_or_else(|| Error::parse(ln, format!("unknown label `{t}`"))))
                    .collect::<Result<_>>()?;
                let arr: [Link; 4] = v
                    .try_into()
                    .map_err(|_| Error::parse(ln, "expected exactly 4 labels"))?;
                labels = Some(arr);
            }
            "distances" => {
                let v: Vec<f64> = rest
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad distance `{t}`"))))
                    .collect::<Result<_>>()?;
                let arr: [f64; 4] = v
                    .try_into()
                    .map_err(|_| Error::parse(ln, "expected exactly 4 distances"))?;
                distances = Some(arr);
            }
            "aggregation" => {
                aggregation = Some(match rest {
                    "sum" => Aggregation::Sum,
                    "dominant" => Aggregation::Dominant,
                    _ => return Err(Error::parse(ln, format!("unknown aggregation `{rest}`"))),
                })
            }
            "sharing" => {
                sharing = Some(match rest {
                    "full" => BandSharing::Full,
                    "split" => BandSharing::EqualSplit,
                    "aligned" => BandSharing::AlignedSubbands,
                    _ => return Err(Error::parse(ln, format!("unknown sharing `{rest}`"))),
                })
            }
            "exponent" => {
                exponent = Some(match rest {
                    "receiver" => ExponentRule::Receiver,
                    "serving" => ExponentRule::ServingCell,
                    _ => return Err(Error::parse(ln, format!("unknown exponent rule `{rest}`"))),
                })
            }
            "residual" => {
                let v: f64 = rest
                    .parse()
                    .map_err(|_| Error::parse(ln, "residual must be a number"))?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::parse(ln, "residual must be finite and >= 0"));
                }
                residual = Some(v)
            }
            "candidates" => {
                candidates = rest
                    .parse()
                    .map_err(|_| Error::parse(ln, "candidates must be an integer"))?
            }
            _ => return Err(Error::parse(ln, format!("unknown key `{key}`"))),
        }
    }
    let missing = |k: &str| Error::parse(0, format!("missing `{k}`"));
    let geometry = ThreeUeGeometry {
        distances: distances.ok_or_else(|| missing("distances"))?,
        interpretation: Interpretation {
            labels: labels.ok_or_else(|| missing("labels"))?,
        },
    };
    let l = geometry.interpretation.labels;
    if (0..4).any(|i| (i + 1..4).any(|j| l[i] == l[j])) {
        return Err(Error::parse(0, "labels must be distinct"));
    }
    Ok(Recovery {
        geometry,
        model: InterferenceModel {
            aggregation: aggregation.ok_or_else(|| missing("aggregation"))?,
            sharing: sharing.ok_or_else(|| missing("sharing"))?,
            exponent: exponent.ok_or_else(|| missing("exponent"))?,
        },
        residual: residual.ok_or_else(|| missing("residual"))?,
        candidates,
    })
}
