use std::fmt;
use std::fs;
use std::path::Path;

use fxlv::calibrator::{calibrate as run_calibration, initial_surface, CalibrationProblem, SolverStatus};
use fxlv::market_data::io::{read_deals, read_market};
use fxlv::market_data::{validate_market, Deal, InstrumentSelection, MarketSnapshot};
use fxlv::study::{
    check_unique_ids, convergence_prices_csv, convergence_study, convergence_summary_csv, price_deals, prices_csv,
};
use fxlv::vol_surface::LocalVolSurface;

use crate::config::RunConfig;

/// Exit code 2 for unreadable or malformed inputs, 1 for everything that
/// fails after the inputs loaded.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Domain(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Domain(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Domain(m) => f.write_str(m),
        }
    }
}

fn input<E: fmt::Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn domain<E: fmt::Display>(e: E) -> Failure {
    Failure::Domain(e.to_string())
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Domain(format!("writing {}: {e}", path.display())))
}

pub fn write_resolved_config(config: &RunConfig) -> Result<(), Failure> {
    let dir = &config.output.dir;
    fs::create_dir_all(dir).map_err(|e| Failure::Domain(format!("creating {}: {e}", dir.display())))?;
    write(&dir.join("resolved_config.toml"), &config.to_toml())
}

fn load_market(config: &RunConfig) -> Result<MarketSnapshot, Failure> {
    read_market(&config.inputs.forward, &config.inputs.discount, &config.inputs.vols).map_err(input)
}

fn load_deals(config: &RunConfig, market: &MarketSnapshot) -> Result<Vec<Deal>, Failure> {
    let path = config
        .inputs
        .deals
        .as_ref()
        .ok_or_else(|| Failure::Input("config has no inputs.deals file".into()))?;
    let deals = read_deals(path, market.valuation).map_err(input)?;
    check_unique_ids(&deals).map_err(input)?;
    Ok(deals)
}

fn load_surface(config: &RunConfig, market: &MarketSnapshot) -> Result<LocalVolSurface, Failure> {
    let path = config.surface_path();
    LocalVolSurface::load(&path, market.forward.clone()).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

pub fn validate(config: &RunConfig, _force: bool) -> Result<(), Failure> {
    let market = load_market(config)?;
    let report = validate_market(&market);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write(&config.output.dir.join("validation.json"), &json)?;
    for v in &report.violations {
        println!("{:?} violated at {}: {}", v.condition, v.tenor, v.detail);
    }
    if report.passed {
        println!("market passes both checks ({} tenors)", report.atm_chain.len());
        Ok(())
    } else {
        Err(Failure::Domain(format!(
            "market failed validation with {} violation(s)",
            report.violations.len()
        )))
    }
}

pub fn calibrate(config: &RunConfig, force: bool) -> Result<(), Failure> {
    let market = load_market(config)?;
    let validation = validate_market(&market);
    if !validation.passed {
        if force {
            eprintln!("warning: market failed validation, calibrating anyway (--force)");
        } else {
            return Err(Failure::Domain(format!(
                "market failed validation with {} violation(s); rerun with --force to calibrate anyway",
                validation.violations.len()
            )));
        }
    }
    let selection = InstrumentSelection::excluding(config.selection.exclude.iter().cloned());
    let initial = initial_surface(
        &market,
        config.calibration.time_pillars,
        config.calibration.state_pillars,
    )
    .map_err(domain)?;
    let problem =
        CalibrationProblem::from_market(&market, &selection, config.calibration.backend(), initial).map_err(domain)?;
    let report = run_calibration(&problem, &config.solver).map_err(domain)?;

    let dir = &config.output.dir;
    let surface = LocalVolSurface::from_file(report.surface.clone(), market.forward.clone()).map_err(domain)?;
    write(&dir.join("surface.json"), &surface.to_json())?;
    write(&dir.join("calibration_report.json"), &report.to_json())?;
    write(&dir.join("calibration_trace.csv"), &report.trace_csv())?;
    println!(
        "instruments {}, parameters {}, iterations {}, status {:?}",
        report.errors.len(),
        report.params.len(),
        report.iterations,
        report.status
    );
    println!("AvgError {:.6e}", report.avg_error);
    if report.status == SolverStatus::Stalled {
        return Err(Failure::Domain("solver stalled; best point so far was written".into()));
    }
    Ok(())
}

pub fn price(config: &RunConfig, _force: bool) -> Result<(), Failure> {
    let market = load_market(config)?;
    let deals = load_deals(config, &market)?;
    let surface = load_surface(config, &market)?;
    let prices = price_deals(&surface, &market.discount, &deals, &config.pricing).map_err(domain)?;
    let dir = &config.output.dir;
    let csv = prices_csv(&prices);
    write(&dir.join("prices.csv"), &csv)?;
    write(
        &dir.join("prices.json"),
        &serde_json::to_string_pretty(&prices).expect("prices serialize"),
    )?;
    print!("{csv}");
    Ok(())
}

pub fn converge(config: &RunConfig, _force: bool) -> Result<(), Failure> {
    let market = load_market(config)?;
    let deals = load_deals(config, &market)?;
    let surface = load_surface(config, &market)?;
    let rows = convergence_study(
        &surface,
        &market.discount,
        &deals,
        &config.pricing,
        &config.convergence.grid_resolutions,
        &config.convergence.path_counts,
    )
    .map_err(domain)?;
    let dir = &config.output.dir;
    write(&dir.join("convergence_prices.csv"), &convergence_prices_csv(&rows))?;
    let summary = convergence_summary_csv(&rows);
    write(&dir.join("convergence_summary.csv"), &summary)?;
    write(
        &dir.join("convergence.json"),
        &serde_json::to_string_pretty(&rows).expect("rows serialize"),
    )?;
    print!("{summary}");
    Ok(())
}
