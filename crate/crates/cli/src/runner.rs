//! Command implementations.
//!
//! Each command resolves its configuration, does its work through the
//! engine crate, writes outputs incrementally (so a late failure leaves
//! the earlier files in place for inspection), and finishes with a
//! `run.json` manifest. Summaries go to stdout; errors bubble up to the
//! binary, which maps them onto the exit-code contract.

use std::path::{Path, PathBuf};

use shiftshare_core::dgp::{simulate_panel, ScenarioConfig};
use shiftshare_core::panel::{SchemaConfig, Year, PRE_TREND_LONG_LAG};
use shiftshare_core::pipeline::{
    build_irf_sample, build_kind_instrument, default_base_periods, IrfSettings, LoadedData,
};
use shiftshare_core::regress::{binscatter, local_projection_irf};
use shiftshare_core::{Error, Result};

use crate::args::{BinscatterArgs, Cli, EstimateArgs};
use crate::config::RunConfig;
use crate::manifest::RunManifest;
use crate::output;

/// The config file is mandatory for every command.
fn require_config(cli: &Cli) -> Result<&Path> {
    cli.config.as_deref().ok_or_else(|| {
        Error::Config(
            "no configuration file: pass --config or set SHIFTSHARE_CONFIG".to_string(),
        )
    })
}

fn ensure_out_dir(cli: &Cli) -> Result<&Path> {
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| Error::io(cli.out_dir.display().to_string(), e))?;
    Ok(&cli.out_dir)
}

/// Writes one output file and records it in the manifest.
fn emit(out_dir: &Path, manifest: &mut RunManifest, name: &str, text: &str) -> Result<()> {
    let path = out_dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    manifest.add_output(name);
    Ok(())
}

fn config_json<T: serde::Serialize>(config: &T) -> Result<serde_json::Value> {
    serde_json::to_value(config)
        .map_err(|e| Error::Invariant(format!("config serialization: {e}")))
}

fn format_path(path: &[f64]) -> String {
    path.iter()
        .map(|v| format!("{v:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn cmd_simulate(cli: &Cli) -> Result<()> {
    let config_path = require_config(cli)?;
    let mut scenario = ScenarioConfig::from_path(config_path)?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    let sim = simulate_panel(&scenario)?;
    let out_dir = ensure_out_dir(cli)?;

    let mut manifest = RunManifest::new("simulate", config_json(&scenario)?);
    manifest.add_input(config_path)?;
    emit(out_dir, &mut manifest, "panel.csv", &sim.panel_csv())?;
    emit(out_dir, &mut manifest, "exports.csv", &sim.exports_csv())?;
    emit(
        out_dir,
        &mut manifest,
        "world_exports.csv",
        &sim.world_exports_csv(),
    )?;
    emit(out_dir, &mut manifest, "dest_gdp.csv", &sim.dest_gdp_csv())?;
    emit(
        out_dir,
        &mut manifest,
        "dest_shares.csv",
        &sim.dest_shares_csv(),
    )?;
    emit(out_dir, &mut manifest, "truth.json", &sim.truth_json())?;
    emit(out_dir, &mut manifest, "schema.toml", &sim.schema_toml())?;
    if let Some(text) = sim.informal_csv() {
        emit(out_dir, &mut manifest, "informal_panel.csv", &text)?;
    }
    if let Some(text) = sim.classification_csv() {
        emit(out_dir, &mut manifest, "classification.csv", &text)?;
    }

    let truth = &sim.truth;
    manifest.diagnostics = serde_json::json!({
        "home_share_of_world_exports": truth.home_share_of_world_exports,
        "instrument_relevance": truth.instrument_relevance,
    });
    manifest.write(out_dir)?;

    let last_year = truth.start_year + truth.periods as Year - 1;
    println!(
        "scenario seed {}: {} regions, {} industries, {} destinations, {} periods ({}..{})",
        truth.seed,
        truth.regions,
        truth.industries,
        truth.destinations,
        truth.periods,
        truth.start_year,
        last_year
    );
    println!("employment path: {}", format_path(&truth.employment_path));
    println!("wage path: {}", format_path(&truth.wage_path));
    if sim.informal.is_some() {
        println!(
            "informal path (substitution {}): {}",
            truth.informal_substitution,
            format_path(&truth.informal_path)
        );
    }
    if sim.classification.is_some() {
        println!(
            "risky path: {}\nsustainable path: {}",
            format_path(&truth.risky_path),
            format_path(&truth.sustainable_path)
        );
    }
    println!(
        "home share of world exports: {:.4}",
        truth.home_share_of_world_exports
    );
    let relevance = &truth.instrument_relevance;
    println!(
        "instrument relevance: corr {:.3}, first-stage slope {:.3} over {} pairs",
        relevance.correlation, relevance.first_stage_slope, relevance.n_obs
    );
    println!(
        "wrote {} files to {}",
        manifest.outputs.len() + 1,
        out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// shared estimation plumbing
// ---------------------------------------------------------------------------

struct Prepared {
    run: RunConfig,
    data: LoadedData,
    manifest: RunManifest,
    /// Rows dropped during file loading, summed over files.
    load_dropped: u64,
}

/// Loads the run config and data directory; fills the manifest's inputs.
fn prepare(cli: &Cli, command: &str, run: RunConfig) -> Result<Prepared> {
    let config_path = require_config(cli)?;
    let schema_path = run.schema_path();
    let schema = SchemaConfig::from_path(&schema_path)?;
    let (data, reports) = LoadedData::from_dir(&run.data_dir, &schema)?;
    let load_dropped: u64 = reports.iter().map(|r| r.dropped.len() as u64).sum();

    let mut manifest = RunManifest::new(command, config_json(&run)?);
    manifest.add_input(config_path)?;
    manifest.add_input(&schema_path)?;
    for name in [
        shiftshare_core::pipeline::PANEL_FILE,
        shiftshare_core::pipeline::EXPORTS_FILE,
        shiftshare_core::pipeline::WORLD_EXPORTS_FILE,
        shiftshare_core::pipeline::DEST_GDP_FILE,
        shiftshare_core::pipeline::DEST_SHARES_FILE,
        shiftshare_core::pipeline::INFORMAL_FILE,
        shiftshare_core::pipeline::CLASSIFICATION_FILE,
    ] {
        let path = run.data_dir.join(name);
        if path.exists() {
            manifest.add_input(&path)?;
        }
    }
    Ok(Prepared {
        run,
        data,
        manifest,
        load_dropped,
    })
}

fn irf_settings(run: &RunConfig) -> Result<IrfSettings> {
    Ok(IrfSettings {
        kind: run.instrument_kind()?,
        horizons: run.horizon_range()?,
        base_periods: run.base_period_range(),
        cluster: run.cluster_key()?,
        policy: run.policy()?,
    })
}

/// Long-difference window: configured, or the widest the panel supports.
fn long_window(run: &RunConfig, data: &LoadedData) -> Result<(Year, Year)> {
    if let Some([t0, t1]) = run.long_window {
        return Ok((t0, t1));
    }
    let years = data.panel.years();
    // Controls sit at t0 + 1 and need a pre-trend lag behind them.
    let t0 = *years.start() + PRE_TREND_LONG_LAG - 1;
    let t1 = *years.end();
    if t1 <= t0 {
        return Err(Error::Config(format!(
            "panel years {}..={} are too short for a long-difference window",
            years.start(),
            years.end()
        )));
    }
    Ok((t0, t1))
}

fn print_irf_table(irf: &shiftshare_core::regress::IrfResult) {
    println!(
        "impulse response: outcome={} instrument={} cluster={}",
        irf.outcome,
        irf.instrument_kind.token(),
        irf.cluster_key
    );
    println!("{:>4} {:>10} {:>9} {:>10} {:>7} {:>9}", "h", "beta", "se", "F", "n", "clusters");
    for e in &irf.estimates {
        println!(
            "{:>4} {:>10.4} {:>9.4} {:>10.2} {:>7} {:>9}",
            e.horizon, e.beta, e.se, e.first_stage_f, e.n_obs, e.n_clusters
        );
    }
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

pub fn cmd_estimate(cli: &Cli, args: &EstimateArgs) -> Result<()> {
    let run = RunConfig::from_path(require_config(cli)?)?.with_estimate_args(args)?;
    let mut prepared = prepare(cli, "estimate", run)?;
    let settings = irf_settings(&prepared.run)?;
    let outcome = prepared.data.outcome(&prepared.run.outcome)?;
    let out_dir = ensure_out_dir(cli)?;

    // Impulse responses first; the files land before the long-difference
    // stage runs, so a weak-instrument failure there preserves them.
    let sample = build_irf_sample(&prepared.data, &outcome, &settings)?;
    let irf = local_projection_irf(&sample)?;
    emit(out_dir, &mut prepared.manifest, "irf.csv", &output::irf_csv(&irf))?;
    if prepared.run.figures {
        let title = format!("{} response to export growth", irf.outcome);
        emit(
            out_dir,
            &mut prepared.manifest,
            "irf.svg",
            &output::irf_svg(&irf, &title),
        )?;
    }
    print_irf_table(&irf);
    println!(
        "sample exclusions: {} (rows dropped on load: {})",
        sample.exclusions().len(),
        prepared.load_dropped
    );

    let window = long_window(&prepared.run, &prepared.data)?;
    let mut rows = Vec::new();
    for name in prepared.run.long_outcome_names() {
        let series = prepared.data.outcome(&name)?;
        let row = shiftshare_core::pipeline::run_long_difference(
            &prepared.data,
            &series,
            window,
            None,
            "all",
            &settings.cluster,
            settings.policy,
        )?;
        println!(
            "long difference {}..{}: outcome={} beta={:.4} se={:.4} F={:.2} n={}",
            window.0, window.1, row.outcome, row.beta, row.se, row.first_stage_f, row.n_obs
        );
        rows.push(row);
    }
    emit(
        out_dir,
        &mut prepared.manifest,
        "longrun.csv",
        &output::longrun_csv(&rows),
    )?;

    prepared.manifest.diagnostics = serde_json::json!({
        "sample_exclusions": sample.exclusions().len(),
        "rows_dropped_on_load": prepared.load_dropped,
        "per_horizon_counts": sample.per_horizon_counts(),
        "first_stage_f": irf.estimates.iter()
            .map(|e| (e.horizon, e.first_stage_f))
            .collect::<Vec<_>>(),
    });
    prepared.manifest.write(out_dir)?;
    println!("wrote {} files to {}", prepared.manifest.outputs.len() + 1, out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// balance
// ---------------------------------------------------------------------------

pub fn cmd_balance(cli: &Cli, args: &EstimateArgs) -> Result<()> {
    let run = RunConfig::from_path(require_config(cli)?)?.with_estimate_args(args)?;
    let mut prepared = prepare(cli, "balance", run)?;
    let mut settings = irf_settings(&prepared.run)?;
    let h_lo = *settings.horizons.start();
    if h_lo > -1 {
        return Err(Error::Config(format!(
            "balance needs pre-shock horizons; window starts at {h_lo}"
        )));
    }
    // Pre-shock horizons only; h = -1 is the differencing anchor.
    settings.horizons = h_lo..=-1;
    let outcome = prepared.data.outcome(&prepared.run.outcome)?;
    let out_dir = ensure_out_dir(cli)?;

    let sample = build_irf_sample(&prepared.data, &outcome, &settings)?;
    let irf = local_projection_irf(&sample)?;
    emit(
        out_dir,
        &mut prepared.manifest,
        "balance.csv",
        &output::irf_csv(&irf),
    )?;
    if prepared.run.figures {
        let title = format!("{} pre-shock balance", irf.outcome);
        emit(
            out_dir,
            &mut prepared.manifest,
            "balance.svg",
            &output::irf_svg(&irf, &title),
        )?;
    }
    print_irf_table(&irf);

    prepared.manifest.diagnostics = serde_json::json!({
        "sample_exclusions": sample.exclusions().len(),
        "rows_dropped_on_load": prepared.load_dropped,
        "max_abs_beta": irf.estimates.iter().map(|e| e.beta.abs()).fold(0.0_f64, f64::max),
    });
    prepared.manifest.write(out_dir)?;
    println!("wrote {} files to {}", prepared.manifest.outputs.len() + 1, out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// instrument
// ---------------------------------------------------------------------------

pub fn cmd_instrument(cli: &Cli) -> Result<()> {
    let run = RunConfig::from_path(require_config(cli)?)?;
    let mut prepared = prepare(cli, "instrument", run)?;
    let kind = prepared.run.instrument_kind()?;
    let horizons = prepared.run.horizon_range()?;
    let base_periods = match prepared.run.base_period_range() {
        Some(range) => range,
        None => default_base_periods(prepared.data.panel.years(), &horizons)?,
    };
    let series = build_kind_instrument(&prepared.data, kind, base_periods.clone())?;
    let out_dir = ensure_out_dir(cli)?;
    emit(
        out_dir,
        &mut prepared.manifest,
        "instrument.csv",
        &series.to_csv_string(),
    )?;

    prepared.manifest.diagnostics = serde_json::json!({
        "kind": kind.token(),
        "base_periods": [*base_periods.start(), *base_periods.end()],
        "values": series.len(),
        "exclusions": series.exclusions().len(),
    });
    prepared.manifest.write(out_dir)?;
    println!(
        "instrument {}: {} region-year values over {}..{} ({} exclusions)",
        kind.token(),
        series.len(),
        base_periods.start(),
        base_periods.end(),
        series.exclusions().len()
    );
    println!("wrote {} files to {}", prepared.manifest.outputs.len() + 1, out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// binscatter
// ---------------------------------------------------------------------------

pub fn cmd_binscatter(cli: &Cli, args: &BinscatterArgs) -> Result<()> {
    let run = RunConfig::from_path(require_config(cli)?)?.with_binscatter_args(args)?;
    let mut prepared = prepare(cli, "binscatter", run)?;
    let mut settings = irf_settings(&prepared.run)?;
    // The first stage lives at horizon zero; the sample restricts to
    // complete cases there so the plot matches the estimation exactly.
    settings.horizons = 0..=0;
    let outcome = prepared.data.outcome(&prepared.run.outcome)?;
    let sample = build_irf_sample(&prepared.data, &outcome, &settings)?;
    let cases = sample.complete_cases(0);
    let x: Vec<f64> = cases.iter().map(|o| o.instrument).collect();
    let y: Vec<f64> = cases.iter().map(|o| o.endogenous).collect();
    let result = binscatter(&x, &y, prepared.run.bins)?;

    let out_dir = ensure_out_dir(cli)?;
    emit(
        out_dir,
        &mut prepared.manifest,
        "binscatter.csv",
        &result.to_csv_string(),
    )?;
    if prepared.run.figures {
        emit(
            out_dir,
            &mut prepared.manifest,
            "binscatter.svg",
            &output::binscatter_svg(&result, "shift-share instrument", "export growth"),
        )?;
    }
    prepared.manifest.diagnostics = serde_json::json!({
        "bins": result.bins.len(),
        "slope": result.slope,
        "t_stat": result.t_stat,
        "n_obs": result.n_obs,
    });
    prepared.manifest.write(out_dir)?;
    println!(
        "first-stage binscatter: slope {:.4} (t = {:.2}) over {} observations in {} bins",
        result.slope,
        result.t_stat,
        result.n_obs,
        result.bins.len()
    );
    println!("wrote {} files to {}", prepared.manifest.outputs.len() + 1, out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// taxonomy-shares
// ---------------------------------------------------------------------------

pub fn cmd_taxonomy_shares(cli: &Cli) -> Result<()> {
    let run = RunConfig::from_path(require_config(cli)?)?;
    let mut prepared = prepare(cli, "taxonomy-shares", run)?;
    let annotated = prepared.data.annotated()?;
    let out_dir = ensure_out_dir(cli)?;
    emit(
        out_dir,
        &mut prepared.manifest,
        "taxonomy_shares.csv",
        &output::taxonomy_shares_csv(&annotated)?,
    )?;

    let (risky, sustainable, total) = annotated.flag_counts();
    prepared.manifest.diagnostics = serde_json::json!({
        "risky_codes": risky,
        "sustainable_codes": sustainable,
        "classified_codes": total,
    });
    prepared.manifest.write(out_dir)?;
    println!(
        "taxonomy: {risky} risky and {sustainable} sustainable of {total} classified activity codes"
    );
    println!("wrote {} files to {}", prepared.manifest.outputs.len() + 1, out_dir.display());
    Ok(())
}

/// Reads a previously written manifest; used by tests and tooling.
pub fn read_manifest(out_dir: &Path) -> Result<serde_json::Value> {
    let path: PathBuf = out_dir.join("run.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Invariant(format!("run.json: {e}")))
}
