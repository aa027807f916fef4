use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dudesim::analytic::{
    cell_borders, parse_fixture, rate_vs_position, recover_geometry, AnalyticParams, Mode, RateBreakdown, Recovery,
    Targets, DEFAULT_FIXTURE, REPORTED_DISTANCES,
};
use dudesim::config::load_scenario;
use dudesim::engine::{coverage_raster, run_campaign_with_workers, sweep_pico_activation, with_workers};
use dudesim::metrics::{csv_row, CSV_HEADER};
use dudesim::presets::{scenario_preset, Case};
use dudesim::{AssociationPolicy, DemandProfile, Error, Layer, Scenario};

#[derive(Parser, Debug)]
#[command(name = "dudesim", version, about = "Uplink/downlink decoupling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Two-cell analytic model: rate curves (case 1) or the three-UE table (case 2).
    Simplified(SimplifiedArgs),
    /// Monte Carlo campaign for one policy.
    Run(CampaignArgs),
    /// Campaign per pico-activation prefix 0..=N.
    Sweep(CampaignArgs),
    /// Uplink serving-layer rasters for dl-lp, dl-hp and dude.
    Coverage(CoverageArgs),
}

#[derive(Args, Debug)]
struct SimplifiedArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    case: u8,
    /// Geometry fixture for case 2; the built-in one is used otherwise.
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Ignore any fixture and rerun the geometry search.
    #[arg(long)]
    search: bool,
    /// Number of curve samples for case 1.
    #[arg(long, default_value_t = 1000)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Config file or built-in preset name (testbed-mini).
    #[arg(long, default_value = "testbed-mini")]
    scenario: String,
    /// Overrides the pico transmit power set by the scenario or case.
    #[arg(long)]
    pico_power: Option<f64>,
    #[arg(long)]
    rmin: Option<f64>,
    #[arg(long)]
    rmax: Option<f64>,
}

#[derive(Args, Debug)]
struct CampaignArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// coupled, dude or re:<offset_db>
    #[arg(long, conflicts_with = "case")]
    policy: Option<AssociationPolicy>,
    /// dl-lp, dl-hp or dude (sets policy and pico power)
    #[arg(long)]
    case: Option<Case>,
    #[arg(long, default_value_t = 20)]
    snapshots: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory; CSV goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CoverageArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Pixel edge in metres.
    #[arg(long, default_value_t = 10.0)]
    pixel: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("DUDESIM_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simplified(a) => simplified(&a),
        Command::Run(a) => run(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Coverage(a) => coverage(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn load(args: &ScenarioArgs) -> Result<Scenario, Error> {
    let mut s = match scenario_preset(&args.scenario) {
        Some(s) => s?,
        None => load_scenario(Path::new(&args.scenario))?,
    };
    if args.rmin.is_some() || args.rmax.is_some() {
        let d = DemandProfile::new(
            args.rmin.unwrap_or(s.demand.r_min),
            args.rmax.unwrap_or(s.demand.r_max),
        )?;
        s = s.with_demand(d)?;
    }
    Ok(s)
}

/// Scenario with case/pico overrides applied, plus the policy and its label.
fn prepare(a: &CampaignArgs) -> Result<(Scenario, AssociationPolicy, String), Error> {
    let mut s = load(&a.scenario)?;
    let (policy, label) = match (a.case, a.policy) {
        (Some(c), _) => {
            s = c.apply(&s)?;
            (c.policy(), c.name().to_string())
        }
        (None, Some(p)) => (p, p.to_string()),
        (None, None) => (AssociationPolicy::Dude, AssociationPolicy::Dude.to_string()),
    };
    if let Some(p) = a.scenario.pico_power {
        s = s.with_pico_power(p)?;
    }
    Ok((s, policy, label))
}

fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<(), Error> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(dir) => write_file(dir, name, text),
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), Error> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(io(&path))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn run(a: &CampaignArgs) -> Result<(), Error> {
    let (s, policy, label) = prepare(a)?;
    let picos = s.count_active(Layer::Pico);
    let m = run_campaign_with_workers(&s, policy, a.snapshots, a.seed, a.workers)?;
    if m.unconverged_snapshots > 0 {
        log::warn!("{} snapshots hit the round cap", m.unconverged_snapshots);
    }
    let text = format!("{CSV_HEADER}\n{}\n", csv_row(&label, picos, &m));
    emit(a.out.as_deref(), "metrics.csv", &text)
}

fn sweep(a: &CampaignArgs) -> Result<(), Error> {
    let (s, policy, label) = prepare(a)?;
    let order = s.pico_ids();
    let rows = with_workers(a.workers, || {
        sweep_pico_activation(&s, policy, &order, a.snapshots, a.seed)
    })?;
    let mut text = format!("{CSV_HEADER}\n");
    for (k, m) in &rows {
        let _ = writeln!(text, "{}", csv_row(&label, *k, m));
    }
    emit(a.out.as_deref(), "sweep.csv", &text)
}

fn coverage(a: &CoverageArgs) -> Result<(), Error> {
    let base = load(&a.scenario)?;
    for case in Case::ALL {
        let mut s = case.apply(&base)?;
        if let Some(p) = a.scenario.pico_power {
            s = s.with_pico_power(p)?;
        }
        let r = coverage_raster(&s, case.policy(), a.pixel)?;
        write_file(&a.out, &format!("coverage_{case}.pgm"), &r.to_pgm())?;
        write_file(&a.out, &format!("coverage_{case}.txt"), &r.sidecar())?;
        println!("{case} pico_fraction={:.4}", r.pico_fraction);
    }
    Ok(())
}

fn simplified(a: &SimplifiedArgs) -> Result<(), Error> {
    let p = AnalyticParams::default();
    if a.case == 1 {
        return case_one(&p, a);
    }
    let recovery = if a.search {
        recover_geometry(&p, REPORTED_DISTANCES, &Targets::reported())?
    } else if let Some(path) = &a.fixture {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        parse_fixture(&text)?
    } else {
        parse_fixture(DEFAULT_FIXTURE)?
    };
    let text = case_two_table(&p, &recovery)?;
    emit(a.out.as_deref(), "case2.txt", &text)
}

fn case_one(p: &AnalyticParams, a: &SimplifiedArgs) -> Result<(), Error> {
    if a.points < 2 {
        return Err(Error::Validation {
            field: "points".into(),
            message: "need at least 2".into(),
        });
    }
    let b = cell_borders(p)?;
    let xs: Vec<f64> = (1..=a.points)
        .map(|i| p.separation * i as f64 / (a.points + 1) as f64)
        .collect();
    let pl: Vec<f64> = xs.iter().map(|x| rate_vs_position(p, *x, Mode::Pathloss)).collect();
    let rp: Vec<f64> = xs.iter().map(|x| rate_vs_position(p, *x, Mode::ReceivedPower)).collect();
    let peak = pl.iter().chain(&rp).fold(0.0f64, |m, v| m.max(*v));
    let mut text = format!("# dl_border={:.4} ul_border={:.4}\nx,rate_pl,rate_rp\n", b.dl_border, b.ul_border);
    for i in 0..xs.len() {
        let _ = writeln!(text, "{:.4},{:.6e},{:.6e}", xs[i], pl[i] / peak, rp[i] / peak);
    }
    emit(a.out.as_deref(), "case1.csv", &text)
}

fn case_two_table(p: &AnalyticParams, r: &Recovery) -> Result<String, Error> {
    let (pl, rp) = r.evaluate(p)?;
    let row = |name: &str, b: &RateBreakdown| format!("{name:<4} {:>6.2} {:>6.2} {:>6.2}\n", b.r_m, b.r_s, b.r_t);
    let mut text = String::from("mode    R_M    R_S    R_T\n");
    text.push_str(&row("PL", &pl));
    text.push_str(&row("RP", &rp));
    let _ = writeln!(text, "ratio {:.3}", pl.r_t / rp.r_t);
    let _ = writeln!(text, "residual {:.6}", r.residual);
    Ok(text)
}
