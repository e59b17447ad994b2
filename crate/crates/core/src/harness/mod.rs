//! Experiment pipelines behind the CLI: `spectrum`, `orbits`, `compare` and
//! `weyl`. Every artifact carries the hash of the resolved configuration.

mod cli;
mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use cli::{run_cli, Cli, Command};
pub use config::{
    CompareMode, GridConfig, GroupConfig, ModelConfig, OrbitConfig, RunConfig, Tolerances, WeylConfig, WindowConfig,
};

use crate::cdyn::{find_twisted_orbits, OrbitDatabase, OrbitSearchSpec};
use crate::error::{Error, Result};
use crate::models::{check_invariance, ModelHamiltonian, ModelSpec};
use crate::par::Execution;
use crate::qspec::{
    build_grid, build_windows, classify_sectors, discretize, eigensolve, grid_actions, spectral_density,
    SectorSpectrum, WindowPair,
};
use crate::symgroup::{catalog_group, custom_group, FiniteGroupRep};
use crate::trace::{assemble_density, weyl_counting, LiouvilleOptions, Mode, TraceReport, TraceRow, WeylTerms};

/// Model and group resolved from a configuration.
pub struct Context {
    pub config: RunConfig,
    pub hash: String,
    pub model: ModelHamiltonian,
    pub group: FiniteGroupRep,
    /// Largest invariance defect seen on the sample.
    pub invariance_residual: f64,
}

impl Context {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let model = crate::models::catalog(&ModelSpec {
            name: config.model.name.clone(),
            dim: config.model.dim,
            params: config.model.params.clone(),
        })?;
        let group = match (&config.group.custom, &config.group.name) {
            (Some(spec), _) => custom_group(spec)?,
            (None, Some(name)) => catalog_group(name, model.dim)?,
            (None, None) => catalog_group(&model.group_name, model.dim)?,
        };
        let radius = 0.5 * config.grid.half_width;
        let invariance_residual = check_invariance(&model, &group, 2000, radius, config.tolerances.invariance_tol)?;
        let hash = config.hash();
        Ok(Self { config, hash, model, group, invariance_residual })
    }

    fn out(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.config.out_dir)?;
        Ok(self.config.out_dir.join(name))
    }

    pub fn windows(&self) -> Result<WindowPair> {
        let w = self.config.windows.as_ref().ok_or_else(|| Error::Config("missing [windows] section".into()))?;
        let step = w.quad_step.unwrap_or(w.tau / 400.0);
        Ok(build_windows(self.config.energy, w.plateau, self.config.delta_e, w.t_c, w.tau, step)?.with_mirror(w.mirror))
    }

    fn orbit_spec(&self) -> Result<OrbitSearchSpec> {
        let o = self.config.orbits.as_ref().ok_or_else(|| Error::Config("missing [orbits] section".into()))?;
        Ok(OrbitSearchSpec {
            energy: self.config.energy,
            t_window: o.t_window,
            seed_count: o.seed_count,
            rng_seed: o.rng_seed,
            tol: o.tol,
        })
    }

    /// Eigenvalues in `window` split into sectors, for one `h`.
    pub fn sectors(&self, h: f64, window: (f64, f64), confine: f64, exec: Execution) -> Result<Vec<SectorSpectrum>> {
        let g = &self.config.grid;
        let grid = build_grid(self.model.dim, g.half_width, g.n)?;
        let op = discretize(&self.model, &grid, h, g.order, Some(confine))?;
        let pairs = eigensolve(&op, window.0, window.1, exec)?;
        let actions = grid_actions(&self.group, &grid)?;
        classify_sectors(&pairs, &self.group, &actions, self.config.tolerances.degen_tol, window, h)
    }
}

/// Writes `# config_hash: …` followed by CSV records.
fn write_csv<S: Serialize>(path: &Path, hash: &str, rows: &[S]) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "# config_hash: {hash}")?;
    let mut w = csv::Writer::from_writer(f);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Everything needed to rerun a command bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub version: String,
    pub execution: String,
    pub outputs: Vec<PathBuf>,
    pub notes: Vec<String>,
}

fn write_manifest(ctx: &Context, command: &str, exec: Execution, outputs: Vec<PathBuf>, notes: Vec<String>) -> Result<()> {
    let m = Manifest {
        command: command.into(),
        config_hash: ctx.hash.clone(),
        config: ctx.config.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        execution: if exec.is_parallel() { "parallel" } else { "sequential" }.into(),
        outputs,
        notes,
    };
    write_json(&ctx.out(&format!("manifest_{command}.json"))?, &m)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumArtifact {
    pub config_hash: String,
    /// Per `h` (in schedule order), one spectrum per character.
    pub runs: Vec<Vec<SectorSpectrum>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpectrumRow {
    h: f64,
    chi: usize,
    degree: usize,
    energy: f64,
    multiplicity: usize,
    residual: f64,
}

/// Per-sector multiplicity audit.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SectorAudit {
    pub h: f64,
    pub chi: usize,
    pub degree: usize,
    pub levels: usize,
    pub states: usize,
    pub non_multiples: usize,
    pub max_trace_defect: f64,
}

impl SpectrumArtifact {
    pub fn audit(&self) -> Vec<SectorAudit> {
        self.runs
            .iter()
            .flatten()
            .map(|s| SectorAudit {
                h: s.h,
                chi: s.chi,
                degree: s.degree,
                levels: s.levels.len(),
                states: s.levels.iter().map(|l| l.multiplicity).sum(),
                non_multiples: s.non_multiples,
                max_trace_defect: s.max_trace_defect,
            })
            .collect()
    }
}

fn density_window(cfg: &RunConfig) -> (f64, f64) {
    let m = cfg.tolerances.window_margin;
    (cfg.energy - cfg.delta_e - m, cfg.energy + cfg.delta_e + m)
}

fn compute_spectrum(ctx: &Context, exec: Execution) -> Result<SpectrumArtifact> {
    let cfg = &ctx.config;
    let window = density_window(cfg);
    let mut runs = Vec::new();
    for &h in &cfg.h {
        runs.push(ctx.sectors(h, window, window.1, exec)?);
    }
    Ok(SpectrumArtifact { config_hash: ctx.hash.clone(), runs })
}

pub fn cmd_spectrum(ctx: &Context, exec: Execution) -> Result<SpectrumArtifact> {
    let art = compute_spectrum(ctx, exec)?;
    let rows: Vec<SpectrumRow> = art
        .runs
        .iter()
        .flatten()
        .flat_map(|s| {
            s.levels.iter().map(move |l| SpectrumRow {
                h: s.h,
                chi: s.chi,
                degree: s.degree,
                energy: l.energy,
                multiplicity: l.multiplicity,
                residual: l.residual,
            })
        })
        .collect();
    let csv = ctx.out("spectrum.csv")?;
    let json = ctx.out("spectrum.json")?;
    write_csv(&csv, &ctx.hash, &rows)?;
    write_json(&json, &art)?;
    let audit = art.audit();
    let bad = audit.iter().filter(|a| a.non_multiples > 0).count();
    let notes = vec![format!("sectors with non-multiple multiplicities: {bad}")];
    write_manifest(ctx, "spectrum", exec, vec![csv, json], notes)?;
    Ok(art)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitArtifact {
    pub config_hash: String,
    pub database: OrbitDatabase,
}

pub fn cmd_orbits(ctx: &Context, exec: Execution) -> Result<OrbitArtifact> {
    let spec = ctx.orbit_spec()?;
    let database = find_twisted_orbits(&ctx.model, &ctx.group, &spec, exec)?;
    let art = OrbitArtifact { config_hash: ctx.hash.clone(), database };
    let json = ctx.out("orbits.json")?;
    write_json(&json, &art)?;
    write_manifest(ctx, "orbits", exec, vec![json], art.database.warnings.clone())?;
    Ok(art)
}

/// Least-squares slope of `log rel_err` against `log h` per character.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConvergenceSummary {
    pub chi: usize,
    pub exponent: f64,
    pub r_squared: f64,
    pub rows_used: usize,
    pub expected: f64,
    pub pass: bool,
    /// Fewer than two usable rows.
    pub degenerate: bool,
}

pub fn convergence_summary(rows: &[TraceRow], chi: usize, expected: f64) -> ConvergenceSummary {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.chi == chi && r.semi.norm() > 0.0 && r.rel_err > 0.0)
        .map(|r| (r.h.ln(), r.rel_err.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return ConvergenceSummary {
            chi,
            exponent: f64::NAN,
            r_squared: f64::NAN,
            rows_used: n,
            expected,
            pass: false,
            degenerate: true,
        };
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    ConvergenceSummary { chi, exponent: slope, r_squared, rows_used: n, expected, pass: slope >= expected, degenerate: false }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CompareRow {
    h: f64,
    #[serde(rename = "E")]
    e: f64,
    chi: usize,
    g_quantum: f64,
    g_quantum_im: f64,
    g_semi_re: f64,
    g_semi_im: f64,
    weyl: f64,
    osc_re: f64,
    osc_im: f64,
    abs_err: f64,
    rel_err: f64,
}

fn load_or<T, F>(path: &Path, hash: &str, get_hash: fn(&T) -> &str, compute: F) -> Result<T>
where
    T: for<'de> Deserialize<'de>,
    F: FnOnce() -> Result<T>,
{
    if path.exists() {
        let art: T = read_json(path)?;
        let found = get_hash(&art);
        if found != hash {
            return Err(Error::HashMismatch { expected: hash.into(), found: found.into() });
        }
        return Ok(art);
    }
    compute()
}

pub struct CompareOutcome {
    pub report: TraceReport,
    pub summaries: Vec<ConvergenceSummary>,
}

pub fn cmd_compare(ctx: &Context, exec: Execution) -> Result<CompareOutcome> {
    let cfg = &ctx.config;
    let windows = ctx.windows()?;
    let spectrum = load_or(&ctx.out("spectrum.json")?, &ctx.hash, |a: &SpectrumArtifact| &a.config_hash, || {
        compute_spectrum(ctx, exec)
    })?;
    let needs_orbits = cfg.mode == CompareMode::Oscillating || cfg.orbits.is_some();
    let orbits = if needs_orbits {
        Some(load_or(&ctx.out("orbits.json")?, &ctx.hash, |a: &OrbitArtifact| &a.config_hash, || {
            let spec = ctx.orbit_spec()?;
            Ok(OrbitArtifact { config_hash: ctx.hash.clone(), database: find_twisted_orbits(&ctx.model, &ctx.group, &spec, exec)? })
        })?)
    } else {
        None
    };
    let empty = OrbitDatabase {
        model: ctx.model.name.clone(),
        group: ctx.group.name.clone(),
        spec: OrbitSearchSpec::new(cfg.energy, (0.0, 0.0)),
        orbits: vec![],
        failures: 0,
        warnings: vec![],
    };
    let db = orbits.as_ref().map(|a| &a.database).unwrap_or(&empty);
    let (mode, weyl_terms) = match cfg.mode {
        CompareMode::Oscillating => (Mode::Oscillating, None),
        CompareMode::Weyl => {
            let w = cfg.weyl.as_ref();
            let opts = LiouvilleOptions {
                mc_samples: w.map_or(LiouvilleOptions::default().mc_samples, |w| w.mc_samples),
                shell: w.map_or(LiouvilleOptions::default().shell, |w| w.shell),
                rng_seed: w.map_or(LiouvilleOptions::default().rng_seed, |w| w.rng_seed),
            };
            let terms = WeylTerms::compute(&ctx.model, &ctx.group, &windows, cfg.energy, orbits.as_ref().map(|a| &a.database), &opts, exec)?;
            (Mode::Weyl, Some(terms))
        }
    };
    let mut rows = Vec::new();
    for (k, &h) in cfg.h.iter().enumerate() {
        let sectors = spectrum.runs.get(k).ok_or_else(|| Error::Config("spectrum artifact lacks an h value".into()))?;
        for s in sectors {
            let q = spectral_density(s, &windows, cfg.energy, h)?;
            let d = assemble_density(&ctx.group, s.chi, cfg.energy, h, &windows, db, mode, weyl_terms.as_ref())?;
            rows.push(TraceRow::new(h, cfg.energy, s.chi, q, d));
        }
    }
    let mut meta = BTreeMap::new();
    meta.insert("model".into(), ctx.model.name.clone());
    meta.insert("group".into(), ctx.group.name.clone());
    meta.insert("config_hash".into(), ctx.hash.clone());
    meta.insert("windows".into(), format!("{windows:?}"));
    meta.insert("orbit_count".into(), db.orbits.len().to_string());
    if let Some(o) = &cfg.orbits {
        meta.insert("orbit_rng_seed".into(), o.rng_seed.to_string());
    }
    let report = TraceReport::new(rows, meta);
    let summaries: Vec<ConvergenceSummary> = (0..ctx.group.characters.len())
        .map(|chi| convergence_summary(&report.rows, chi, cfg.tolerances.min_exponent))
        .collect();
    let csv_rows: Vec<CompareRow> = report
        .rows
        .iter()
        .map(|r| CompareRow {
            h: r.h,
            e: r.e,
            chi: r.chi,
            g_quantum: r.quantum.re,
            g_quantum_im: r.quantum.im,
            g_semi_re: r.semi.re,
            g_semi_im: r.semi.im,
            weyl: r.weyl.re,
            osc_re: r.oscillating.re,
            osc_im: r.oscillating.im,
            abs_err: r.abs_err,
            rel_err: r.rel_err,
        })
        .collect();
    let csv = ctx.out("compare.csv")?;
    let json = ctx.out("summary.json")?;
    write_csv(&csv, &ctx.hash, &csv_rows)?;
    write_json(&json, &serde_json::json!({ "config_hash": ctx.hash, "summaries": summaries, "metadata": report.metadata }))?;
    let notes = db.warnings.clone();
    write_manifest(ctx, "compare", exec, vec![csv, json], notes)?;
    Ok(CompareOutcome { report, summaries })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WeylRow {
    pub h: f64,
    pub chi: usize,
    pub exact: usize,
    pub predicted: f64,
    pub std_err: f64,
    pub rel_err: f64,
    /// Exact sector count over the total count.
    pub share: f64,
}

pub fn cmd_weyl(ctx: &Context, exec: Execution) -> Result<Vec<WeylRow>> {
    let cfg = &ctx.config;
    let w = cfg.weyl.as_ref().ok_or_else(|| Error::Config("missing [weyl] section".into()))?;
    let interval = w.interval;
    let nchi = ctx.group.characters.len();
    // prediction at h = 1, rescaled by h^{−d}
    let unit: Vec<_> = (0..nchi)
        .map(|chi| weyl_counting(&ctx.model, &ctx.group, chi, interval, 1.0, w.mc_samples, w.rng_seed, exec))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &h in &cfg.h {
        let sectors = ctx.sectors(h, interval, interval.1, exec)?;
        let counts: Vec<usize> = sectors.iter().map(|s| s.levels.iter().map(|l| l.multiplicity).sum()).collect();
        let total: usize = counts.iter().sum();
        let scale = h.powi(-(ctx.model.dim as i32));
        for chi in 0..nchi {
            let predicted = unit[chi].value * scale;
            let exact = counts[chi];
            let rel_err = if predicted > 0.0 { (exact as f64 - predicted).abs() / predicted } else { 0.0 };
            rows.push(WeylRow {
                h,
                chi,
                exact,
                predicted,
                std_err: unit[chi].std_err * scale,
                rel_err,
                share: if total > 0 { exact as f64 / total as f64 } else { 0.0 },
            });
        }
    }
    let csv = ctx.out("weyl.csv")?;
    write_csv(&csv, &ctx.hash, &rows)?;
    write_manifest(ctx, "weyl", exec, vec![csv], vec![])?;
    Ok(rows)
}
