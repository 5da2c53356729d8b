use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::caputo::FractionalParams;
use crate::error::{Error, Result};
use crate::stepper::SchemeState;

use super::config::{parse_list, FileConfig};
use super::output::{write_convergence_csv, write_run_csv, write_verify_csv, Header};
use super::presets::{BoundaryKind, PresetName, ProblemPreset};
use super::study::{convergence_study, halving_list, StudyConfig};
use super::verify::{verify_all, DEFAULT_SEED};

#[derive(Debug, Parser)]
#[command(
    name = "fracscheme",
    version,
    about = "Monotone time-fractional scheme: runs, convergence studies, verification"
)]
pub struct Cli {
    /// Flat key = value settings file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single solve; writes every level to CSV.
    Run(RunArgs),
    /// Refinement study against an exact solution.
    Converge(ConvergeArgs),
    /// Full invariant suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct ConvergeArgs {
    #[arg(long)]
    pub problem: Option<String>,
    /// Comma-separated orders, e.g. 0.3,0.5,0.7.
    #[arg(long)]
    pub alphas: Option<String>,
    /// Comma-separated, strictly decreasing time steps.
    #[arg(long, conflicts_with_all = ["h0", "levels"])]
    pub h_list: Option<String>,
    #[arg(long)]
    pub h0: Option<f64>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const DEFAULT_ALPHA: f64 = 0.5;
const DEFAULT_RUN_H: f64 = 1.0 / 256.0;
const DEFAULT_STEPS: usize = 64;
const DEFAULT_H0: f64 = 1.0 / 64.0;
const DEFAULT_LEVELS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub problem: PresetName,
    pub alpha: f64,
    pub h: f64,
    pub steps: usize,
    pub nx: usize,
    pub dim: usize,
    pub tol: Option<f64>,
    pub boundary: BoundaryKind,
    pub out: Option<PathBuf>,
}

impl RunSettings {
    /// Flags over file over defaults.
    pub fn resolve(args: &RunArgs, file: &FileConfig) -> Result<Self> {
        let problem: PresetName = args
            .problem
            .clone()
            .or_else(|| file.problem.clone())
            .map(|s| s.parse())
            .transpose()?
            .unwrap_or(PresetName::FracHeat);
        let dim = args.dim.or(file.dim).unwrap_or(1);
        Ok(RunSettings {
            problem,
            alpha: args.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA),
            h: args.h.or(file.h).unwrap_or(DEFAULT_RUN_H),
            steps: args.steps.or(file.steps).unwrap_or(DEFAULT_STEPS),
            nx: args
                .nx
                .or(file.nx)
                .unwrap_or_else(|| problem.default_nx(dim)),
            dim,
            tol: args.tol.or(file.tol),
            boundary: parse_boundary(args.boundary.as_deref().or(file.boundary.as_deref()))?,
            out: args.out.clone().or_else(|| file.out.clone()),
        })
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        vec![
            ("command".into(), "run".into()),
            ("problem".into(), self.problem.to_string()),
            ("alpha".into(), self.alpha.to_string()),
            ("h".into(), self.h.to_string()),
            ("steps".into(), self.steps.to_string()),
            ("nx".into(), self.nx.to_string()),
            ("dim".into(), self.dim.to_string()),
            (
                "tol".into(),
                self.tol
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "default".into()),
            ),
            ("boundary".into(), self.boundary.to_string()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeSettings {
    pub problem: PresetName,
    pub alphas: Vec<f64>,
    pub hs: Vec<f64>,
    pub nx: usize,
    pub dim: usize,
    pub boundary: BoundaryKind,
    pub tol: Option<f64>,
    pub tmax: f64,
    pub out: Option<PathBuf>,
}

impl ConvergeSettings {
    pub fn resolve(args: &ConvergeArgs, file: &FileConfig) -> Result<Self> {
        let problem: PresetName = args
            .problem
            .clone()
            .or_else(|| file.problem.clone())
            .map(|s| s.parse())
            .transpose()?
            .unwrap_or(PresetName::FracHeat);
        let dim = args.dim.or(file.dim).unwrap_or(1);
        let alphas = match (&args.alphas, &file.alphas) {
            (Some(s), _) => parse_list(s)?,
            (None, Some(list)) => list.values()?,
            (None, None) => vec![DEFAULT_ALPHA],
        };
        let halving = |h0: Option<f64>, levels: Option<usize>| {
            halving_list(
                h0.or(file.h0).unwrap_or(DEFAULT_H0),
                levels.or(file.levels).unwrap_or(DEFAULT_LEVELS),
            )
        };
        let hs = if let Some(s) = &args.h_list {
            parse_list(s)?
        } else if args.h0.is_some() || args.levels.is_some() {
            halving(args.h0, args.levels)
        } else if let Some(list) = &file.h_list {
            list.values()?
        } else {
            halving(None, None)
        };
        let default_tmax = if problem == PresetName::FracHeat {
            0.25
        } else {
            1.0
        };
        Ok(ConvergeSettings {
            problem,
            alphas,
            hs,
            nx: args.nx.or(file.nx).unwrap_or_else(|| match problem {
                PresetName::FracHeat if dim == 1 => 512,
                _ => problem.default_nx(dim),
            }),
            dim,
            boundary: parse_boundary(args.boundary.as_deref().or(file.boundary.as_deref()))?,
            tol: args.tol.or(file.tol),
            tmax: args.tmax.or(file.tmax).unwrap_or(default_tmax),
            out: args.out.clone().or_else(|| file.out.clone()),
        })
    }

    pub fn study(&self) -> StudyConfig {
        let mut cfg = StudyConfig::new(
            self.problem,
            self.alphas.clone(),
            self.hs.clone(),
            self.nx,
            self.tmax,
        );
        cfg.dim = self.dim;
        cfg.boundary = self.boundary;
        cfg.tol = self.tol;
        cfg
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        vec![
            ("command".into(), "converge".into()),
            ("problem".into(), self.problem.to_string()),
            ("alphas".into(), join(&self.alphas)),
            ("h_list".into(), join(&self.hs)),
            ("nx".into(), self.nx.to_string()),
            ("dim".into(), self.dim.to_string()),
            ("boundary".into(), self.boundary.to_string()),
            (
                "tol".into(),
                self.tol
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "default".into()),
            ),
            ("tmax".into(), self.tmax.to_string()),
        ]
    }
}

fn parse_boundary(s: Option<&str>) -> Result<BoundaryKind> {
    s.map(str::parse)
        .transpose()
        .map(|b| b.unwrap_or(BoundaryKind::Periodic))
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Runs the parsed command; returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let seed = file.seed.unwrap_or(DEFAULT_SEED);
    match cli.command {
        Command::Run(args) => {
            let s = RunSettings::resolve(&args, &file)?;
            let preset = ProblemPreset::new(s.problem, s.alpha, s.dim, s.boundary)?;
            let grid = preset.grid(s.nx)?;
            let horizon = s.steps as f64 * s.h;
            let params = FractionalParams::new(s.alpha, s.h)?.with_horizon(horizon)?;
            let mut state = SchemeState::new(
                preset.spec.clone(),
                grid.clone(),
                preset.initial(&grid)?,
                params,
            )?;
            if let Some(tol) = s.tol {
                state = state.with_tol(tol)?;
            }
            let state = crate::stepper::advance(state, s.steps)?;
            let mut out = open_out(&s.out)?;
            write_run_csv(&mut out, &Header::new(seed, s.pairs()), &state)?;
            out.flush()?;
            if let Some(exact) = preset.exact_on(&grid, horizon)? {
                eprintln!(
                    "{}: {} levels, sup error at t = {horizon} is {:e}",
                    s.problem,
                    s.steps,
                    state.current().sup_distance(&exact)
                );
            }
            Ok(0)
        }
        Command::Converge(args) => {
            let s = ConvergeSettings::resolve(&args, &file)?;
            let outcome = convergence_study(&s.study())?;
            let mut out = open_out(&s.out)?;
            write_convergence_csv(
                &mut out,
                &Header::new(seed, s.pairs()),
                &outcome.rows,
                outcome.failure.as_ref(),
            )?;
            out.flush()?;
            if let Some(f) = &outcome.failure {
                eprintln!(
                    "study failed at alpha = {}, h = {}: {}",
                    f.alpha, f.h, f.message
                );
                return Ok(1);
            }
            Ok(0)
        }
        Command::Verify(args) => {
            let seed = args.seed.unwrap_or(seed);
            let out_path = args.out.clone().or_else(|| file.out.clone());
            let report = verify_all(seed);
            let pairs = vec![("command".to_string(), "verify".to_string())];
            let mut out = open_out(&out_path)?;
            write_verify_csv(&mut out, &Header::new(seed, pairs), &report)?;
            out.flush()?;
            for c in report.failures() {
                eprintln!("FAILED {} ({}): margin {:e}", c.name, c.statement, c.margin);
            }
            Ok(if report.all_passed() { 0 } else { 1 })
        }
    }
}

/// Parses `argv` and maps errors to exit code 2.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Config(_)) {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let file =
            FileConfig::parse("alpha = 0.3\nh = 0.01\nproblem = \"eikonal_const\"\n").unwrap();
        let args = RunArgs {
            alpha: Some(0.7),
            ..Default::default()
        };
        let s = RunSettings::resolve(&args, &file).unwrap();
        assert_eq!(s.alpha, 0.7);
        assert_eq!(s.h, 0.01);
        assert_eq!(s.problem, PresetName::EikonalConst);
        assert_eq!(s.steps, DEFAULT_STEPS);
        assert_eq!(s.boundary, BoundaryKind::Periodic);
    }

    #[test]
    fn step_lists() {
        let file = FileConfig::parse("h_list = [0.5, 0.25]\n").unwrap();
        let s = ConvergeSettings::resolve(&ConvergeArgs::default(), &file).unwrap();
        assert_eq!(s.hs, vec![0.5, 0.25]);
        let args = ConvergeArgs {
            h0: Some(0.5),
            levels: Some(3),
            ..Default::default()
        };
        let s = ConvergeSettings::resolve(&args, &file).unwrap();
        assert_eq!(s.hs, vec![0.5, 0.25, 0.125]);
        let s =
            ConvergeSettings::resolve(&ConvergeArgs::default(), &FileConfig::default()).unwrap();
        assert_eq!(s.hs.len(), DEFAULT_LEVELS);
        assert_eq!((s.nx, s.tmax), (512, 0.25));
    }

    #[test]
    fn bad_values_are_config_errors() {
        let args = RunArgs {
            boundary: Some("neumann".into()),
            ..Default::default()
        };
        assert!(matches!(
            RunSettings::resolve(&args, &FileConfig::default()),
            Err(Error::Config(_))
        ));
        assert_eq!(
            main_with_args(["fracscheme", "run", "--problem", "nope"]),
            2
        );
    }
}
