//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{info, warn};

use crate::analytic::{critical_coupling, energy_level, HulthenParams};
use crate::basis::{build_decay_rates, BasisSpec};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fss::{self, CollapseSign, SurfaceInterpolant};
use crate::sweep::{fmt_float, load_surface, run_sweep, save_surface, write_table, EnergySurface, Precision, Status};
use crate::validate::run_validation;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hulthen-fss", version, about = "Hulthén ground-state spectra and finite-size scaling")]
pub struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 = one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Arithmetic for assembly and eigensolves (overrides `numerics.extended_precision`).
    #[arg(long, global = true)]
    pub precision: Option<Precision>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the decay-rate grid of every basis size.
    Rates,
    /// Solve the (λ, N) grid and write the energy surface and its analytic errors.
    Sweep,
    /// Γ curves, crossings and extrapolated critical parameters.
    Fss {
        /// Reuse a saved surface instead of sweeping.
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Scaled curves and the collapse spread.
    Collapse {
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Run the oracle suite.
    Validate,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Done,
    ChecksFailed,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::ChecksFailed) => EXIT_VALIDATION,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(p) = cli.precision {
        cfg.numerics.extended_precision = p == Precision::Extended;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let cfg = resolve_config(cli)?;
    if let Some(k) = cli.threads {
        if rayon::ThreadPoolBuilder::new().num_threads(k).build_global().is_err() {
            warn!("thread pool already initialized; --threads ignored");
        }
    }
    match &cli.command {
        Command::Rates => cmd_rates(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Fss { surface } => cmd_fss(&cfg, surface.as_deref()),
        Command::Collapse { surface } => cmd_collapse(&cfg, surface.as_deref()),
        Command::Validate => cmd_validate(&cfg),
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn cmd_rates(cfg: &RunConfig) -> Result<Outcome> {
    let mut rows = Vec::new();
    for &n in &cfg.sweep.n_list {
        let grid = build_decay_rates(&BasisSpec::new(n, cfg.sweep.d_s, cfg.sweep.d_e))?;
        for (i, b) in grid.rates().iter().enumerate() {
            rows.push(format!("{n},{},{}", i + 1, fmt_float(*b)));
        }
    }
    let path = out_path(cfg, "rates.csv");
    write_table(&path, "n_basis,n,beta", &cfg.metadata(), &rows)?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(Outcome::Done)
}

fn sweep_and_save(cfg: &RunConfig) -> Result<EnergySurface> {
    let surface = run_sweep(&cfg.sweep, &cfg.numerics.solver_options())?;
    let path = out_path(cfg, "surface.csv");
    save_surface(&surface, &path, &cfg.metadata())?;
    let failed = surface.rows.iter().filter(|r| r.status == Status::Failed).count();
    println!("wrote {} ({} rows, {failed} failed)", path.display(), surface.rows.len());
    Ok(surface)
}

fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let surface = sweep_and_save(cfg)?;
    let lc = critical_coupling(1)?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for r in surface.rows.iter().filter(|r| r.has_values() && r.lambda > lc) {
        let exact = energy_level(&HulthenParams::new(r.lambda, cfg.sweep.a, 1))?;
        let e = r.e0.unwrap_or(f64::NAN);
        let err = ((e - exact) / exact).abs();
        worst = worst.max(err);
        rows.push(format!(
            "{},{},{},{},{}",
            fmt_float(r.lambda),
            r.n_basis,
            fmt_float(e),
            fmt_float(exact),
            fmt_float(err)
        ));
    }
    let path = out_path(cfg, "errors.csv");
    write_table(&path, "lambda,n_basis,E0,E_exact,relative_error", &cfg.metadata(), &rows)?;
    println!("wrote {} (max relative error {worst:.3e})", path.display());
    Ok(Outcome::Done)
}

fn obtain_surface(cfg: &RunConfig, surface: Option<&Path>) -> Result<EnergySurface> {
    match surface {
        Some(p) => {
            info!("loading surface from {}", p.display());
            load_surface(p)
        }
        None => sweep_and_save(cfg),
    }
}

fn lambda_grid(surface: &EnergySurface) -> Vec<f64> {
    let mut l: Vec<f64> = surface.rows.iter().map(|r| r.lambda).collect();
    l.sort_by(f64::total_cmp);
    l.dedup();
    l
}

fn cmd_fss(cfg: &RunConfig, surface: Option<&Path>) -> Result<Outcome> {
    let surface = obtain_surface(cfg, surface)?;
    let meta = cfg.metadata();
    let triples = fss::consecutive_triples(&surface.n_values());
    if triples.len() < 2 {
        return Err(Error::Config("finite-size scaling needs at least four basis sizes".into()));
    }
    let lambdas = lambda_grid(&surface);

    let mut rows = Vec::new();
    for t in &triples {
        for &l in &lambdas {
            if let Ok(g) = fss::gamma_alpha(&surface, l, t) {
                rows.push(format!("{},{},{}", fmt_float(l), t.label(), fmt_float(g)));
            }
        }
    }
    let path = out_path(cfg, "gamma.csv");
    write_table(&path, "lambda,triple_label,gamma", &meta, &rows)?;
    println!("wrote {} ({} defined points)", path.display(), rows.len());

    let est = fss::analyze(&surface, &cfg.fss.bracket())?;
    let rows: Vec<String> = est
        .crossings
        .iter()
        .map(|c| {
            format!(
                "{},{},{},{}",
                c.pair,
                fmt_float(c.lambda),
                fmt_float(c.alpha),
                c.nu.map(fmt_float).unwrap_or_default()
            )
        })
        .collect();
    let path = out_path(cfg, "crossings.csv");
    write_table(&path, "triple_pair,lambda_N,alpha_N,nu_N", &meta, &rows)?;
    println!("wrote {} ({} crossings)", path.display(), rows.len());
    for (pair, why) in &est.failures {
        println!("  no crossing for {pair}: {why}");
    }

    let interp = SurfaceInterpolant::new(&surface)?;
    let at_critical: Vec<String> = triples
        .iter()
        .map(|t| match interp.gamma(critical_coupling(1).unwrap_or(0.5), t) {
            Ok(g) => format!("{}={g:.6}", t.label()),
            Err(_) => format!("{}=undefined", t.label()),
        })
        .collect();

    let mut rows = Vec::new();
    let mut complete = true;
    for (name, fit) in [("lambda_c", est.lambda_c), ("alpha", est.alpha), ("nu", est.nu)] {
        match fit {
            Some(f) => {
                println!("{name:>8} = {:.6}  (slope {:.4e}, fit residual {:.3e})", f.value, f.slope, f.residual);
                rows.push(format!(
                    "{name},{},{},{}",
                    fmt_float(f.value),
                    fmt_float(f.slope),
                    fmt_float(f.residual)
                ));
            }
            None => {
                println!("{name:>8} = unavailable (fewer than two crossings)");
                rows.push(format!("{name},,,"));
                complete = false;
            }
        }
    }
    let path = out_path(cfg, "fss_summary.csv");
    let meta = format!(
        "{meta}\ntriples: consecutive (N, N+2, N+4); adjacent curves crossed; n_eff = smallest N of the first triple\n\
         gamma at lambda = 0.5: {}",
        at_critical.join(" ")
    );
    write_table(&path, "quantity,estimate,slope,fit_residual", &meta, &rows)?;
    println!("wrote {}", path.display());
    if !complete {
        return Err(Error::Undefined("critical parameters could not be extrapolated".into()));
    }
    Ok(Outcome::Done)
}

fn cmd_collapse(cfg: &RunConfig, surface: Option<&Path>) -> Result<Outcome> {
    let surface = obtain_surface(cfg, surface)?;
    let [lo, hi] = cfg.fss.collapse_window;
    if !surface.rows.iter().any(|r| r.has_values() && r.lambda >= lo && r.lambda <= hi) {
        return Err(Error::Config(format!("collapse window [{lo}, {hi}] contains no usable rows")));
    }
    let f = &cfg.fss;
    let (lambda_c, alpha, nu) = match (f.collapse_lambda_c, f.collapse_alpha, f.collapse_nu) {
        (Some(l), Some(a), Some(n)) => (l, a, n),
        (l, a, n) => {
            let est = fss::analyze(&surface, &f.bracket())?;
            let need = |v: Option<f64>, fit: Option<fss::Extrapolation>, name: &str| {
                v.or(fit.map(|e| e.value))
                    .ok_or_else(|| Error::Undefined(format!("no {name} estimate from the crossing fit")))
            };
            (
                need(l, est.lambda_c, "λ_c")?,
                need(a, est.alpha, "α")?,
                need(n, est.nu, "ν")?,
            )
        }
    };
    let primary = f.collapse_sign_convention;
    let other = match primary {
        CollapseSign::Printed => CollapseSign::Standard,
        CollapseSign::Standard => CollapseSign::Printed,
    };
    let c = fss::data_collapse(&surface, lambda_c, alpha, nu, (lo, hi), primary)?;
    let alt = fss::data_collapse(&surface, lambda_c, alpha, nu, (lo, hi), other)?;
    let meta = cfg.metadata();
    let rows: Vec<String> = c
        .points
        .iter()
        .map(|p| format!("{},{},{}", p.n_basis, fmt_float(p.x), fmt_float(p.y)))
        .collect();
    let path = out_path(cfg, "collapse.csv");
    write_table(&path, "n_basis,x_scaled,y_scaled", &format!("{meta}\nsign_convention={primary:?}"), &rows)?;
    println!("wrote {} ({} points)", path.display(), rows.len());
    let rows = vec![
        format!("{primary:?},{},{},{},{}", fmt_float(lambda_c), fmt_float(alpha), fmt_float(nu), fmt_float(c.spread)),
        format!("{other:?},{},{},{},{}", fmt_float(lambda_c), fmt_float(alpha), fmt_float(nu), fmt_float(alt.spread)),
    ];
    let path = out_path(cfg, "collapse_summary.csv");
    write_table(&path, "sign_convention,lambda_c,alpha,nu,spread", &meta, &rows)?;
    println!("spread {:.3e} ({primary:?}), {:.3e} ({other:?})", c.spread, alt.spread);
    Ok(Outcome::Done)
}

fn cmd_validate(cfg: &RunConfig) -> Result<Outcome> {
    let report = run_validation(cfg)?;
    let text = report.to_string();
    println!("{text}");
    let rows: Vec<String> = report
        .checks
        .iter()
        .map(|c| {
            format!(
                "{},{},{},{}",
                c.name,
                if c.passed() { "pass" } else { "fail" },
                fmt_float(c.deviation),
                fmt_float(c.tolerance)
            )
        })
        .collect();
    let path = out_path(cfg, "validate_report.csv");
    write_table(&path, "check,status,max_deviation,tolerance", &cfg.metadata(), &rows)?;
    Ok(if report.passed() {
        Outcome::Done
    } else {
        Outcome::ChecksFailed
    })
}
