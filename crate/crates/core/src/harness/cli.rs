use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::{cmd_compare, cmd_orbits, cmd_spectrum, cmd_weyl, Context, RunConfig};
use crate::error::{Error, Result};
use crate::par::{init_threads, Execution};

#[derive(Debug, Parser)]
#[command(name = "symtrace", version, about = "Sector spectra, twisted orbits and trace-formula comparisons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Replaces every RNG seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the parallel paths.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Dotted `key=value` override, repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Run every stage on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sector-resolved eigenvalues for each h.
    Spectrum,
    /// Twisted periodic orbit database.
    Orbits,
    /// Quantum vs semiclassical G_χ(h) and the fitted error exponent.
    Compare,
    /// Exact sector counts vs the Weyl prediction.
    Weyl,
}

fn run(cli: &Cli) -> Result<()> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path, &cli.overrides)?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.reseed(seed);
    }
    if let Some(n) = cli.threads {
        init_threads(n);
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let ctx = Context::new(cfg)?;
    match cli.command {
        Command::Spectrum => {
            let art = cmd_spectrum(&ctx, exec)?;
            println!("h\tchi\tdegree\tlevels\tstates\tnon_multiples\ttrace_defect");
            for a in art.audit() {
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{:.1e}",
                    a.h, a.chi, a.degree, a.levels, a.states, a.non_multiples, a.max_trace_defect
                );
            }
        }
        Command::Orbits => {
            let art = cmd_orbits(&ctx, exec)?;
            let db = &art.database;
            println!("{} orbits, {} failed searches", db.orbits.len(), db.failures);
            for o in &db.orbits {
                println!(
                    "g={} t0={:.10} S={:.10} sigma={} T*={:.10} |Stab|={} D_red={:?} residual={:.1e}",
                    o.g, o.t0, o.action, o.sigma, o.primitive_period, o.stab_order(), o.d_red, o.residual
                );
            }
            for w in &db.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Compare => {
            let out = cmd_compare(&ctx, exec)?;
            for r in &out.report.rows {
                println!("h={} chi={} quantum={:.6} semi={:.6} rel_err={:.3e}", r.h, r.chi, r.quantum, r.semi, r.rel_err);
            }
            for s in &out.summaries {
                if s.degenerate {
                    println!("chi={} degenerate ({} usable rows)", s.chi, s.rows_used);
                } else {
                    let verdict = if s.pass { "PASS" } else { "FAIL" };
                    println!(
                        "chi={} exponent={:.3} r2={:.3} expected>={} {verdict}",
                        s.chi, s.exponent, s.r_squared, s.expected
                    );
                }
            }
        }
        Command::Weyl => {
            for r in cmd_weyl(&ctx, exec)? {
                println!(
                    "h={} chi={} exact={} predicted={:.2}±{:.2} rel_err={:.3} share={:.3}",
                    r.h, r.chi, r.exact, r.predicted, r.std_err, r.rel_err, r.share
                );
            }
        }
    }
    eprintln!("outputs in {} (config_hash {})", ctx.config.out_dir.display(), ctx.hash);
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
