//! Scenario configuration files.
//!
//! Line-oriented UTF-8: `[section]` headers, `key = value` pairs and, in
//! list sections, bare item lines. `#` starts a comment.
//!
//! ```text
//! [area]
//! max_x = 1000
//! max_y = 1000
//!
//! [cells]
//! cell 0 macro 250 500 46 17.8
//! cell 1 pico 310 420            # power and gain from [radio] defaults
//!
//! [traffic]
//! mean_ue_count = 150
//! hotspot 300 400 60 4.0         # x y sigma weight
//! ```
//!
//! Sections: `[area]`, `[radio]`, `[demand]`, `[cells]`, `[traffic]`,
//! `[propagation]`, `[power_control]`, `[link]`. Every key is optional and
//! falls back to the macro 46 dBm / 17.8 dBi, pico 30 dBm / 4 dBi,
//! UE 20 dBm / 0 dBi, 100 x 180 kHz RB defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::association::UlMetric;
use crate::error::{Error, Result};
use crate::powerctl::PowerControlParams;
use crate::propagation::PowerLawModel;
use crate::raster::{DensityRaster, Hotspot, PathlossRaster};
use crate::scenario::{
    Area, Cell, CellId, DemandProfile, Layer, PathlossSource, Point, PropagationConfig, RadioParams, Scenario,
    MACRO_GAIN_DBI, MACRO_TX_DBM, PICO_GAIN_DBI, PICO_HP_TX_DBM,
};
use crate::scheduler::LinkParams;

/// Reference loss at 1 m used for full simulations at 2.6 GHz.
pub const DEFAULT_REF_LOSS_DB: f64 = 38.5;
pub const DEFAULT_MEAN_UES: f64 = 560.0;
const DEFAULT_TRAFFIC_PIXEL_M: f64 = 10.0;

const SECTIONS: [&str; 8] = [
    "area",
    "radio",
    "demand",
    "cells",
    "traffic",
    "propagation",
    "power_control",
    "link",
];

#[derive(Debug, Clone, PartialEq)]
struct Value {
    text: String,
    line: usize,
}

#[derive(Debug, Default)]
struct Section {
    keys: BTreeMap<String, Value>,
    items: Vec<(usize, Vec<String>)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.keys.remove(key)
    }

    fn f64(&mut self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => parse_number(&v.text, v.line, &format!("{section}.{key}")),
        }
    }

    fn usize(&mut self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .text
                .parse()
                .map_err(|_| Error::parse(v.line, format!("{section}.{key}: expected a non-negative integer"))),
        }
    }

    fn bool(&mut self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => match v.text.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::parse(v.line, format!("{section}.{key}: expected true or false"))),
            },
        }
    }

    fn finish(self, section: &str) -> Result<()> {
        if let Some((k, v)) = self.keys.into_iter().next() {
            return Err(Error::parse(v.line, format!("unknown key `{section}.{k}`")));
        }
        if let Some((line, words)) = self.items.into_iter().next() {
            return Err(Error::parse(
                line,
                format!("unexpected item `{}` in [{section}]", words.join(" ")),
            ));
        }
        Ok(())
    }
}

fn parse_number(text: &str, line: usize, field: &str) -> Result<f64> {
    let v: f64 = text
        .parse()
        .map_err(|_| Error::parse(line, format!("{field}: `{text}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{field}: must be finite")));
    }
    Ok(v)
}

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::parse(line, "unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::parse(line, format!("unknown section [{name}]")));
            }
            if sections.contains_key(name) {
                return Err(Error::parse(line, format!("duplicate section [{name}]")));
            }
            sections.insert(name.to_string(), Section::default());
            current = Some(name.to_string());
            continue;
        }
        let name = current
            .as_ref()
            .ok_or_else(|| Error::parse(line, "content before the first section header"))?;
        let section = sections.get_mut(name).expect("current section exists");
        if let Some((k, v)) = content.split_once('=') {
            let key = k.trim();
            let value = v.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::parse(line, format!("malformed key `{key}`")));
            }
            if value.is_empty() {
                return Err(Error::parse(line, format!("{name}.{key}: missing value")));
            }
            let prev = section.keys.insert(
                key.to_string(),
                Value {
                    text: value.to_string(),
                    line,
                },
            );
            if prev.is_some() {
                return Err(Error::parse(line, format!("duplicate key `{name}.{key}`")));
            }
        } else {
            section
                .items
                .push((line, content.split_whitespace().map(str::to_string).collect()));
        }
    }
    Ok(sections)
}

/// Reads files referenced from a config document.
pub trait FileSource {
    fn read(&self, name: &str) -> Result<String>;
}

/// Resolves file names relative to a directory.
pub struct DirSource(pub PathBuf);

impl FileSource for DirSource {
    fn read(&self, name: &str) -> Result<String> {
        let path = self.0.join(name);
        std::fs::read_to_string(&path).map_err(|source| Error::Io { path, source })
    }
}

/// Refuses every file reference; for self-contained documents.
pub struct NoFiles;

impl FileSource for NoFiles {
    fn read(&self, name: &str) -> Result<String> {
        Err(Error::invalid("file", format!("`{name}`: file references are not allowed here")))
    }
}

/// Parses and validates a scenario from config text; referenced rasters
/// are fetched through `files`.
pub fn parse_scenario(text: &str, files: &dyn FileSource) -> Result<Scenario> {
    let mut sections = split_sections(text)?;
    let mut section = |name: &str| sections.remove(name).unwrap_or_default();

    let mut area_s = section("area");
    let area = Area {
        min: Point::new(area_s.f64("area", "min_x", 0.0)?, area_s.f64("area", "min_y", 0.0)?),
        max: Point::new(
            area_s.f64("area", "max_x", 1000.0)?,
            area_s.f64("area", "max_y", 1000.0)?,
        ),
    };
    area_s.finish("area")?;

    let mut radio_s = section("radio");
    let d = RadioParams::default();
    let radio = RadioParams {
        bandwidth_hz: radio_s.f64("radio", "bandwidth_hz", d.bandwidth_hz)?,
        n_rb: radio_s.usize("radio", "n_rb", d.n_rb)?,
        rb_bandwidth_hz: radio_s.f64("radio", "rb_bandwidth_hz", d.rb_bandwidth_hz)?,
        carrier_hz: radio_s.f64("radio", "carrier_hz", d.carrier_hz)?,
        noise_figure_db: radio_s.f64("radio", "noise_figure_db", d.noise_figure_db)?,
        ue_max_tx_dbm: radio_s.f64("radio", "ue_tx_dbm", d.ue_max_tx_dbm)?,
        ue_antenna_gain_dbi: radio_s.f64("radio", "ue_gain_dbi", d.ue_antenna_gain_dbi)?,
    };
    let macro_tx = radio_s.f64("radio", "macro_tx_dbm", MACRO_TX_DBM)?;
    let macro_gain = radio_s.f64("radio", "macro_gain_dbi", MACRO_GAIN_DBI)?;
    let pico_tx = radio_s.f64("radio", "pico_tx_dbm", PICO_HP_TX_DBM)?;
    let pico_gain = radio_s.f64("radio", "pico_gain_dbi", PICO_GAIN_DBI)?;
    radio_s.finish("radio")?;

    let mut demand_s = section("demand");
    let dd = DemandProfile::default();
    let demand = DemandProfile {
        r_min: demand_s.f64("demand", "r_min_bps", dd.r_min)?,
        r_max: demand_s.f64("demand", "r_max_bps", dd.r_max)?,
    };
    demand_s.finish("demand")?;

    let mut cells_s = section("cells");
    let mut cells = Vec::new();
    for (line, words) in std::mem::take(&mut cells_s.items) {
        cells.push(parse_cell(line, &words, (macro_tx, macro_gain), (pico_tx, pico_gain))?);
    }
    cells_s.finish("cells")?;

    let mut traffic_s = section("traffic");
    let mean_ue_count = traffic_s.f64("traffic", "mean_ue_count", DEFAULT_MEAN_UES)?;
    let fixed_count = traffic_s.bool("traffic", "fixed_count", false)?;
    let pixel = traffic_s.f64("traffic", "pixel_m", DEFAULT_TRAFFIC_PIXEL_M)?;
    let floor = traffic_s.f64("traffic", "floor", 1.0)?;
    let raster_file = traffic_s.take("raster");
    let mut hotspots = Vec::new();
    for (line, words) in std::mem::take(&mut traffic_s.items) {
        hotspots.push(parse_hotspot(line, &words)?);
    }
    traffic_s.finish("traffic")?;
    if !(pixel > 0.0) {
        return Err(Error::invalid("traffic.pixel_m", "must be positive"));
    }
    if !(floor >= 0.0) {
        return Err(Error::invalid("traffic.floor", "must be >= 0"));
    }
    if area.width() / pixel * area.height() / pixel > 1.0e7 {
        return Err(Error::invalid("traffic.pixel_m", "too small for the area"));
    }
    let traffic_density = match raster_file {
        Some(v) => {
            if !hotspots.is_empty() {
                return Err(Error::parse(v.line, "traffic.raster cannot be combined with hotspot lines"));
            }
            DensityRaster::parse(&files.read(&v.text)?)?
        }
        None if area.width() > 0.0 && area.height() > 0.0 => {
            DensityRaster::hotspots(&area, pixel, floor, &hotspots)
        }
        None => return Err(Error::invalid("area", "must be a finite box with positive extent")),
    };

    let mut prop_s = section("propagation");
    let dm = PowerLawModel::default();
    let model = PowerLawModel {
        exponent_macro: prop_s.f64("propagation", "exponent_macro", dm.exponent_macro)?,
        exponent_pico: prop_s.f64("propagation", "exponent_pico", dm.exponent_pico)?,
        ref_loss_db: prop_s.f64("propagation", "ref_loss_db", DEFAULT_REF_LOSS_DB)?,
        shadowing_sigma_db: prop_s.f64("propagation", "shadowing_sigma_db", dm.shadowing_sigma_db)?,
    };
    let ul_metric = match prop_s.take("ul_metric") {
        None => UlMetric::CouplingGain,
        Some(v) => v.text.parse()?,
    };
    let source = match prop_s.take("raster") {
        None => PathlossSource::PowerLaw,
        Some(v) => PathlossSource::Raster(Arc::new(PathlossRaster::parse(&files.read(&v.text)?)?)),
    };
    prop_s.finish("propagation")?;

    let mut pc_s = section("power_control");
    let dp = PowerControlParams::default();
    let power_control = PowerControlParams {
        interference_limit_dbm: pc_s.f64("power_control", "interference_limit_dbm", dp.interference_limit_dbm)?,
        step_db: pc_s.f64("power_control", "step_db", dp.step_db)?,
        p_min_dbm: pc_s.f64("power_control", "p_min_dbm", dp.p_min_dbm)?,
        max_iterations: pc_s.usize("power_control", "max_iterations", dp.max_iterations)?,
        floor_offset_db: pc_s.f64("power_control", "floor_offset_db", dp.floor_offset_db)?,
    };
    pc_s.finish("power_control")?;

    let mut link_s = section("link");
    let dl = LinkParams::default();
    let link = LinkParams {
        min_sinr_db: link_s.f64("link", "min_sinr_db", dl.min_sinr_db)?,
        se_cap: link_s.f64("link", "se_cap", dl.se_cap)?,
    };
    link_s.finish("link")?;

    let s = Scenario {
        cells,
        area,
        traffic_density,
        mean_ue_count,
        fixed_count,
        demand,
        radio,
        propagation: PropagationConfig {
            model,
            source,
            ul_metric,
        },
        power_control,
        link,
    };
    s.validate()?;
    Ok(s)
}

fn parse_cell(line: usize, words: &[String], macro_d: (f64, f64), pico_d: (f64, f64)) -> Result<Cell> {
    if words.first().map(String::as_str) != Some("cell") {
        return Err(Error::parse(line, "expected `cell <id> <macro|pico> <x_m> <y_m> [tx_dbm] [gain_dbi]`"));
    }
    if !(5..=7).contains(&words.len()) {
        return Err(Error::parse(line, "cell line takes 4 to 6 fields"));
    }
    let id: u32 = words[1]
        .parse()
        .map_err(|_| Error::parse(line, format!("cell id `{}` is not a non-negative integer", words[1])))?;
    let (layer, (tx_d, gain_d)) = match words[2].as_str() {
        "macro" => (Layer::Macro, macro_d),
        "pico" => (Layer::Pico, pico_d),
        other => return Err(Error::parse(line, format!("cells.{id}.layer: `{other}` is not macro or pico"))),
    };
    let field = |name: &str| format!("cells.{id}.{name}");
    let x = parse_number(&words[3], line, &field("x_m"))?;
    let y = parse_number(&words[4], line, &field("y_m"))?;
    let opt = |i: usize, name: &str, d: f64| match words.get(i).map(String::as_str) {
        None | Some("-") => Ok(d),
        Some(t) => parse_number(t, line, &field(name)),
    };
    Ok(Cell {
        id: CellId(id),
        layer,
        position: Point::new(x, y),
        tx_power_dbm: opt(5, "tx_dbm", tx_d)?,
        antenna_gain_dbi: opt(6, "gain_dbi", gain_d)?,
        active: true,
    })
}

fn parse_hotspot(line: usize, words: &[String]) -> Result<Hotspot> {
    if words.first().map(String::as_str) != Some("hotspot") || words.len() != 5 {
        return Err(Error::parse(line, "expected `hotspot <x_m> <y_m> <sigma_m> <weight>`"));
    }
    let n = |i: usize, name: &str| parse_number(&words[i], line, &format!("traffic.hotspot.{name}"));
    let h = Hotspot {
        center: Point::new(n(1, "x_m")?, n(2, "y_m")?),
        sigma: n(3, "sigma_m")?,
        weight: n(4, "weight")?,
    };
    if !(h.sigma > 0.0) || h.weight < 0.0 {
        return Err(Error::parse(line, "hotspot sigma must be positive and weight non-negative"));
    }
    Ok(h)
}

/// Loads a scenario file; raster references resolve against its directory.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario(&text, &DirSource(dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_takes_defaults() {
        let s = parse_scenario("[cells]\ncell 0 macro 500 500 46\n", &NoFiles).unwrap();
        assert_eq!(s.radio.n_rb, 100);
        assert_eq!(s.radio.rb_bandwidth_hz, 180e3);
        assert_eq!(s.radio.ue_max_tx_dbm, 20.0);
        assert_eq!(s.cells[0].antenna_gain_dbi, 17.8);
        assert_eq!(s.cells[0].tx_power_dbm, 46.0);
        assert_eq!(s.propagation.model.ref_loss_db, DEFAULT_REF_LOSS_DB);
    }

    #[test]
    fn zero_cells_fails_validation() {
        let e = parse_scenario("[area]\nmax_x = 100\nmax_y = 100\n", &NoFiles).unwrap_err();
        assert!(e.to_string().contains("at least one active cell"), "{e}");
    }

    #[test]
    fn pico_power_default_applies_to_all_picos() {
        let text = "[radio]\npico_tx_dbm = 30\n[cells]\ncell 0 macro 0 0\ncell 1 pico 10 10\ncell 2 pico 20 20 - 5\n";
        let s = parse_scenario(text, &NoFiles).unwrap();
        let picos: Vec<_> = s.cells.iter().filter(|c| c.layer == Layer::Pico).collect();
        assert!(picos.iter().all(|c| c.tx_power_dbm == 30.0));
        assert_eq!(picos[1].antenna_gain_dbi, 5.0);
        assert_eq!(picos[0].antenna_gain_dbi, 4.0);
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse_scenario("[radio]\nn_rb = lots\n[cells]\ncell 0 macro 0 0\n", &NoFiles).unwrap_err();
        assert!(e.to_string().contains("radio.n_rb"), "{e}");
        let e = parse_scenario("[radio]\nfoo = 1\n", &NoFiles).unwrap_err();
        assert!(e.to_string().contains("radio.foo"), "{e}");
        let e = parse_scenario("[cells]\ncell 0 femto 0 0\n", &NoFiles).unwrap_err();
        assert!(e.to_string().contains("cells.0.layer"), "{e}");
        let e = parse_scenario("[cells]\ncell 0 macro 0 0 99\n", &NoFiles).unwrap_err();
        assert!(e.to_string().contains("cells.0.tx_dbm"), "{e}");
        let e = parse_scenario("[demand]\nr_min_bps = 5e6\nr_max_bps = 1e6\n[cells]\ncell 0 macro 0 0\n", &NoFiles)
            .unwrap_err();
        assert!(e.to_string().contains("r_max"), "{e}");
    }

    #[test]
    fn structural_errors() {
        assert!(parse_scenario("cell 0 macro 0 0\n", &NoFiles).is_err());
        assert!(parse_scenario("[cells\n", &NoFiles).is_err());
        assert!(parse_scenario("[bogus]\n", &NoFiles).is_err());
        assert!(parse_scenario("[cells]\n[cells]\n", &NoFiles).is_err());
        assert!(parse_scenario("[radio]\nn_rb = 1\nn_rb = 2\n", &NoFiles).is_err());
        assert!(parse_scenario("[radio]\nn_rb =\n", &NoFiles).is_err());
        assert!(parse_scenario("[radio]\nwhat is this\n", &NoFiles).is_err());
    }

    #[test]
    fn raster_references_need_a_source() {
        let text = "[traffic]\nraster = d.txt\n[cells]\ncell 0 macro 0 0\n";
        assert!(parse_scenario(text, &NoFiles).is_err());

        struct Mem;
        impl FileSource for Mem {
            fn read(&self, name: &str) -> Result<String> {
                match name {
                    "d.txt" => Ok("DENSITY v1 1 1 0 0 1000\n1\n".into()),
                    _ => Err(Error::invalid("file", name.to_string())),
                }
            }
        }
        let s = parse_scenario(text, &Mem).unwrap();
        assert_eq!(s.traffic_density.grid.width, 1);
    }

    #[test]
    fn hotspots_and_flags() {
        let text = "[traffic]\nmean_ue_count = 42\nfixed_count = true\nfloor = 0.5\npixel_m = 50\nhotspot 100 100 30 2\n[cells]\ncell 0 macro 0 0\n";
        let s = parse_scenario(text, &NoFiles).unwrap();
        assert!(s.fixed_count);
        assert_eq!(s.mean_ue_count, 42.0);
        assert_eq!(s.traffic_density.grid.width, 20);
        let near = s.traffic_density.weight(2, 2);
        let far = s.traffic_density.weight(19, 19);
        assert!(near > 1.0 && (far - 0.5).abs() < 1e-9);
    }
}
