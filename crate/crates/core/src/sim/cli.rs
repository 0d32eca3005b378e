//! Command-line entry points.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::{Config, ExperimentConfig, DEFAULT_L_MAX};
use super::sweep::run_sweep;
use crate::code::save_generator;
use crate::error::{Error, Result};
use crate::numfmt::sig6;
use crate::osd::asymptotic_order;
use crate::predictor::{generate_dataset, load_dataset, save_dataset, split_dataset, train, MlpModel, OutputMode, TrainConfig};
use crate::selection::{calibrate_table, calibrate_threshold};

pub const VERSION: &str = concat!("osd-core v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(name = "osd", version, about = "Ordered statistics decoding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or inspect generator matrices.
    Code {
        #[command(subcommand)]
        action: CodeAction,
    },
    /// Sweep order-selection policies over Eb/N0.
    Simulate(Common),
    /// Generate a labelled dataset for the order predictor.
    Dataset(Common),
    /// Train an order predictor on a dataset.
    Train(Common),
    /// Estimate the (Eb/N0, order) -> CER table for the SNR baselines.
    CalibrateTable(Common),
    /// Pick the success-threshold tau on the validation split.
    CalibrateThreshold(Common),
}

#[derive(Debug, Subcommand)]
enum CodeAction {
    /// Write a built-in generator matrix to a file.
    Build(Common),
    /// Print code parameters.
    Inspect(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set code=NAME`.
    #[arg(long)]
    code: Option<String>,
    /// Shorthand for `--set matrix_path=PATH`.
    #[arg(long)]
    matrix: Option<String>,
    /// Shorthand for `--set output=PATH`.
    #[arg(long, short)]
    output: Option<String>,
}

impl Common {
    fn resolve(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        for (key, val) in [("code", &self.code), ("matrix_path", &self.matrix), ("output", &self.output)] {
            if let Some(v) = val {
                cfg.set(key, v);
            }
        }
        Ok(cfg)
    }
}

/// Runs the CLI; returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Code { action: CodeAction::Build(c) } => code_build(&c.resolve()?, out),
        Command::Code { action: CodeAction::Inspect(c) } => code_inspect(&c.resolve()?, out),
        Command::Simulate(c) => simulate(&c.resolve()?, out),
        Command::Dataset(c) => dataset(&c.resolve()?, out),
        Command::Train(c) => train_cmd(&c.resolve()?, out),
        Command::CalibrateTable(c) => table_cmd(&c.resolve()?, out),
        Command::CalibrateThreshold(c) => threshold_cmd(&c.resolve()?, out),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn write_manifest(output: &Path, command: &str, cfg: &Config, extra: &[String]) -> Result<()> {
    let mut m = String::new();
    m.push_str(&format!("version = {VERSION}\n"));
    m.push_str(&format!("command = {command}\n"));
    m.push_str(&format!("seed = {}\n", cfg.get("seed").unwrap_or("1")));
    for line in extra {
        m.push_str(line);
        m.push('\n');
    }
    m.push_str("[config]\n");
    m.push_str(&cfg.echo());
    write_file(&manifest_path(output), &m)
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn code_build(cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let code = cfg.code()?;
    let output = PathBuf::from(cfg.require("output")?);
    save_generator(&output, &code.generator)?;
    writeln!(out, "wrote {} ({}x{}) to {}", code.spec.name, code.spec.k, code.spec.n, output.display())
        .map_err(io_err)
}

fn code_inspect(cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let code = cfg.code()?;
    let s = &code.spec;
    writeln!(
        out,
        "{} N={} K={} declared d_min={} rank={} asymptotic_order={}",
        s.name,
        s.n,
        s.k,
        s.d_min,
        code.generator.rank(),
        asymptotic_order(s.d_min, s.k)
    )
    .map_err(io_err)
}

fn simulate(cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let exp = ExperimentConfig::from_config(cfg)?;
    let result = run_sweep(&exp)?;
    let csv = result.to_csv();
    match &exp.output {
        Some(path) => {
            write_file(path, &csv)?;
            let mut extra = vec![
                format!("code = {}", exp.code.spec.name),
                "stream_index = snr_index * trials + trial".to_string(),
            ];
            if exp.policies.iter().any(|p| p.needs_table()) {
                extra.push("baseline = Monte Carlo SNR/order table surrogate".to_string());
            }
            write_manifest(path, "simulate", cfg, &extra)?;
            writeln!(out, "wrote {} points to {}", result.points.len(), path.display()).map_err(io_err)
        }
        None => out.write_all(csv.as_bytes()).map_err(io_err),
    }
}

fn dataset(cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let code = cfg.code()?;
    let l_max = cfg.parse_or("l_max", DEFAULT_L_MAX)?;
    let records: usize = cfg.parse_or("records", 80_000)?;
    let snrs = match cfg.get("ebn0_db") {
        Some(_) => cfg.snr_list("ebn0_db")?,
        None => super::config::parse_snr_list("-3:4:1")?,
    };
    let seed = cfg.parse_or("seed", 1u64)?;
    let output = PathBuf::from(cfg.require("output")?);
    let data = generate_dataset(&code, l_max, records, &snrs, seed)?;
    save_dataset(&output, &data)?;
    write_manifest(
        &output,
        "dataset",
        cfg,
        &[
            format!("code = {}", code.spec.name),
            "stream_index = record index".to_string(),
        ],
    )?;
    writeln!(out, "wrote {} records to {}", data.len(), output.display()).map_err(io_err)
}

fn train_cmd(cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let code = cfg.code()?;
    let data = load_dataset(cfg.require("dataset_path")?)?;
    let mode: OutputMode = cfg.parse_required("mode")?;
    let seed = cfg.parse_or("seed", 1u64)?;
    let config = TrainConfig {
        epochs: cfg.parse_or("epochs", 30)?,
        batch_size: cfg.parse_or("batch_size", 128)?,
        learning_rate: cfg.parse_or("learning_rate", 0.01)?,
        seed,
    };
    let (train_set, _) = split_dataset(&data, cfg.parse_or("split_seed", seed)?);
    if train_set.first().is_some_and(|r| r.features.len() != 2 * code.spec.n) {
        return Err(Error::Config(format!(
            "dataset features do not match code length {}",
            code.spec.n
        )));
    }
    let (model, report) = train(&train_set, mode, code.spec.n, code.spec.k, &config)?;
    let output = PathBuf::from(cfg.require("output")?);
    model.save(&output)?;

    let mut loss_csv = String::from("epoch,loss\n");
    loss_csv.push_str(&format!("0,{}\n", sig6(report.initial_loss)));
    for (i, l) in report.epoch_losses.iter().enumerate() {
        loss_csv.push_str(&format!("{},{}\n", i + 1, sig6(*l)));
    }
    let mut loss_path = output.as_os_str().to_owned();
    loss_path.push(".loss.csv");
    write_file(Path::new(&loss_path), &loss_csv)?;
    write_manifest(
        &output,
        "train",
        cfg,
        &[
            format!("training_records = {}", train_set.len()),
            format!("initial_loss = {}", sig6(report.initial_loss)),
            format!("final_loss = {}", sig6(report.final_loss)),
        ],
    )?;
    writeln!(
        out,
        "trained {mode} model: loss {} -> {}",
        sig6(report.initial_loss),
        sig6(report.final_loss)
    )
    .map_err(io_err)
}

fn table_cmd(cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let code = cfg.code()?;
    let snrs = match cfg.get("ebn0_db") {
        Some(_) => cfg.snr_list("ebn0_db")?,
        None => super::config::parse_snr_list("-3:4:1")?,
    };
    let l_max = cfg.parse_or("l_max", DEFAULT_L_MAX)?;
    let trials: usize = cfg.parse_or("trials", 1000)?;
    let target: f64 = cfg.parse_or("target_cer", 0.01)?;
    let seed = cfg.parse_or("seed", 1u64)?;
    let output = PathBuf::from(cfg.require("output")?);
    let table = calibrate_table(&code, &snrs, l_max, trials, target, seed)?;
    table.save(&output)?;
    write_manifest(
        &output,
        "calibrate-table",
        cfg,
        &["stream_index = snr_index * trials + trial".to_string()],
    )?;
    writeln!(out, "wrote {} rows to {}", table.rows().len(), output.display()).map_err(io_err)
}

fn threshold_cmd(cfg: &Config, out: &mut dyn Write) -> Result<()> {
    let model = MlpModel::load(cfg.require("model_path")?)?;
    let data = load_dataset(cfg.require("dataset_path")?)?;
    let seed = cfg.parse_or("seed", 1u64)?;
    let (_, validation) = split_dataset(&data, cfg.parse_or("split_seed", seed)?);
    let target: f64 = cfg.parse_or("target_cer", 0.01)?;
    let tau = calibrate_threshold(&model, &validation, target)?;
    if let Some(path) = cfg.get("output") {
        let path = PathBuf::from(path);
        write_file(&path, &format!("tau = {tau}\n"))?;
        write_manifest(
            &path,
            "calibrate-threshold",
            cfg,
            &[format!("validation_records = {}", validation.len())],
        )?;
    }
    writeln!(out, "tau = {tau}").map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("osd").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn missing_config_names_the_file() {
        let (code, _, err) = run_args(&["simulate", "--config", "missing.cfg"]);
        assert_ne!(code, 0);
        assert!(err.contains("missing.cfg"), "{err}");
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, _, err) = run_args(&["frobnicate"]);
        assert_eq!(code, 2);
        assert!(err.to_lowercase().contains("usage"));
    }

    #[test]
    fn inspect_ebch() {
        let (code, out, _) = run_args(&["code", "inspect", "--code", "ebch128"]);
        assert_eq!(code, 0);
        assert!(out.contains("N=128 K=64 declared d_min=22"), "{out}");
    }

    #[test]
    fn build_then_inspect_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.txt");
        let p = path.to_str().unwrap();
        assert_eq!(run_args(&["code", "build", "--code", "hamming84", "-o", p]).0, 0);
        let (code, out, _) = run_args(&["code", "inspect", "--matrix", p]);
        assert_eq!(code, 0);
        assert!(out.contains("N=8 K=4 declared d_min=4"), "{out}");
    }

    #[test]
    fn simulate_high_snr_order0_has_no_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        let csv = dir.path().join("out.csv");
        fs::write(
            &cfg,
            format!(
                "code = ebch128\nebn0_db = 20\ntrials = 100\npolicy = fixed:0\nseed = 3\noutput = {}\n",
                csv.display()
            ),
        )
        .unwrap();
        let (code, _, err) = run_args(&["simulate", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        let text = fs::read_to_string(&csv).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[1], "fixed(0)");
        assert_eq!(row[3], "0");
        assert_eq!(row[6], "1.00000");
        let manifest = fs::read_to_string(manifest_path(&csv)).unwrap();
        assert!(manifest.contains(VERSION));
        assert!(manifest.contains("seed = 3"));
    }

    #[test]
    fn bad_override_is_rejected() {
        let (code, _, err) = run_args(&["simulate", "--set", "trials"]);
        assert_eq!(code, 1);
        assert!(err.contains("key=value"));
    }
}
