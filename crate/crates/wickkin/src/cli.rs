//! The `wickkin` command line: argument parsing, the experiment runner and
//! the kinetic convergence check.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use wickkin_core::{
    hierarchy::hierarchy_rhs_table, moments_from_cumulants, wick_cumulant_expansion, wick_from_cumulants,
    CumulantSource, CumulantTable, HierarchyState, Key, LabeledSeq, OracleCumulants, Provenance,
};

use crate::config::{ConvertTarget, Experiment, RunConfig, SystemConfig, W0Config};
use crate::dnls::{estimate_w, sample_initial, Dnls, Family, Spectrum};
use crate::error::{Error, Result};
use crate::io::{self, MomentTable, RunManifest, TableDoc, TableKind, TrajectorySummary, WickDoc, SCHEMA_VERSION};
use crate::kinetic::{bp_solve, collision_operator, prelimit_kernel, CollisionConfig, DeltaModel};
use crate::lattice::Lattice;
use crate::stats::mean_stderr;

#[derive(Debug, Parser)]
#[command(name = "wickkin", version, about = "Wick polynomials, cumulant hierarchies and lattice kinetic theory")]
pub struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Wick polynomials.
    #[command(subcommand)]
    Wick(WickCmd),
    /// Cumulant and moment tables.
    #[command(subcommand)]
    Cumulant(CumulantCmd),
    /// Cumulant hierarchy.
    #[command(subcommand)]
    Hierarchy(HierarchyCmd),
    /// Lattice nonlinear Schrödinger ensembles.
    #[command(subcommand)]
    Dnls(DnlsCmd),
    /// Spectrum of a stored ensemble.
    EstimateW {
        #[arg(long)]
        ensemble: PathBuf,
    },
    /// Kinetic equation.
    #[command(subcommand)]
    Bp(BpCmd),
    /// Monte Carlo short-time increments against the collision operator.
    KineticCheck(KineticCheckArgs),
    /// Run a configuration file or replay a run manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum WickCmd {
    /// Expand `⟨⟨y_{i₁}…y_{iₙ}⟩⟩` over a cumulant table.
    Expand {
        /// Comma-separated variable ids.
        #[arg(long, value_delimiter = ',', required = true)]
        vars: Vec<u32>,
        #[arg(long)]
        cumulants: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum CumulantCmd {
    /// Moments to cumulants or back.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        to: ConvertArg,
        #[arg(long)]
        max_order: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ConvertArg {
    Cumulant,
    Moment,
}

#[derive(Debug, Subcommand)]
pub enum HierarchyCmd {
    /// Right-hand side of the closed hierarchy at the given order.
    Rhs {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        order: usize,
        #[arg(long)]
        state: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum DnlsCmd {
    /// Sample and evolve an ensemble; parameters come from a JSON file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum BpCmd {
    /// Integrate the kinetic equation from a spectrum file.
    Solve {
        #[arg(long)]
        w0: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Pre-limit kernel against the collision operator for several couplings.
    Compare {
        #[arg(long)]
        w0: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda_list: Vec<f64>,
    },
}

#[derive(Debug, Args)]
pub struct KineticCheckArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `lambdas` in the config.
    #[arg(long, value_delimiter = ',')]
    pub lambda_list: Option<Vec<f64>>,
}

fn abs_path(p: &Path) -> Result<PathBuf> {
    Ok(std::path::absolute(p)?)
}

/// Parameter file of a subcommand: an experiment block without `kind`.
fn experiment_from_file(kind: &str, path: &Path, extra: &[(&str, Value)]) -> Result<Experiment> {
    let mut v: Value = io::read_json(path)?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("{} must hold a JSON object", path.display())))?;
    obj.remove("schema");
    obj.insert("kind".into(), Value::String(kind.into()));
    for (k, x) in extra {
        obj.insert((*k).into(), x.clone());
    }
    let mut e: Experiment = serde_json::from_value(v)?;
    let base = std::path::absolute(path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")))?;
    let mut tmp = RunConfig::new(e, PathBuf::new());
    tmp.resolve_paths(&base);
    e = tmp.experiment;
    Ok(e)
}

fn csv_w0(path: &Path) -> Result<Value> {
    Ok(serde_json::to_value(W0Config::Csv { path: abs_path(path)? })?)
}

impl Cli {
    /// The run configuration this invocation describes.
    pub fn to_config(&self) -> Result<RunConfig> {
        let experiment = match &self.command {
            Command::Run { config } => {
                let mut c = RunConfig::load(config)?;
                if let Some(s) = self.seed {
                    c.seed = s;
                }
                if self.threads.is_some() {
                    c.threads = self.threads;
                }
                if let Some(o) = &self.out {
                    c.out = abs_path(o)?;
                }
                c.validate()?;
                return Ok(c);
            }
            Command::Wick(WickCmd::Expand { vars, cumulants }) => Experiment::WickExpand {
                vars: vars.clone(),
                cumulants: abs_path(cumulants)?,
            },
            Command::Cumulant(CumulantCmd::Convert { input, to, max_order }) => Experiment::CumulantConvert {
                input: abs_path(input)?,
                to: match to {
                    ConvertArg::Cumulant => ConvertTarget::Cumulant,
                    ConvertArg::Moment => ConvertTarget::Moment,
                },
                max_order: *max_order,
            },
            Command::Hierarchy(HierarchyCmd::Rhs { model, order, state }) => Experiment::HierarchyRhs {
                model: abs_path(model)?,
                state: state.as_deref().map(abs_path).transpose()?,
                order: *order,
            },
            Command::Dnls(DnlsCmd::Simulate { config }) => experiment_from_file("dnls-simulate", config, &[])?,
            Command::EstimateW { ensemble } => Experiment::EstimateW {
                ensemble: abs_path(ensemble)?,
            },
            Command::Bp(BpCmd::Solve { w0, config }) => experiment_from_file("bp-solve", config, &[("w0", csv_w0(w0)?)])?,
            Command::Bp(BpCmd::Compare { w0, config, lambda_list }) => experiment_from_file(
                "bp-compare",
                config,
                &[("w0", csv_w0(w0)?), ("lambdas", serde_json::to_value(lambda_list)?)],
            )?,
            Command::KineticCheck(a) => {
                let extra: Vec<(&str, Value)> = match &a.lambda_list {
                    Some(l) => vec![("lambdas", serde_json::to_value(l)?)],
                    None => Vec::new(),
                };
                experiment_from_file("kinetic-check", &a.config, &extra)?
            }
        };
        let out = abs_path(self.out.as_deref().unwrap_or(Path::new("wickkin-out")))?;
        let mut c = RunConfig::new(experiment, out);
        c.seed = self.seed.unwrap_or(0);
        c.threads = self.threads;
        c.validate()?;
        Ok(c)
    }
}

/// Result files of a run, relative to its output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub outputs: Vec<String>,
    pub manifest: PathBuf,
}

/// Execute a configuration on a pool of `config.threads` workers (or the
/// global pool) and write its results plus `manifest.json`.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    match config.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| run_inner(config))
        }
        None => run_inner(config),
    }
}

fn run_inner(config: &RunConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let out = config.out.clone();
    fs::create_dir_all(&out)?;
    let mut timings = BTreeMap::new();
    let outputs = execute(config, &out, &mut timings)?;
    timings.insert("total".to_string(), start.elapsed().as_secs_f64() * 1e3);
    let manifest = RunManifest {
        schema: SCHEMA_VERSION,
        tool: "wickkin".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(config)?,
        outputs: outputs.clone(),
        timings_ms: timings,
    };
    let manifest = io::write_run_manifest(&out, &manifest)?;
    Ok(RunOutcome { out, outputs, manifest })
}

fn collision_config(system: &SystemConfig, delta: Option<DeltaModel>) -> Result<(Lattice, CollisionConfig)> {
    let lat = system.lattice()?;
    let omega = system.omega()?;
    let cfg = match delta {
        Some(d) => CollisionConfig::new(lat, omega, d)?,
        None => CollisionConfig::with_default_delta(lat, omega)?,
    };
    Ok((lat, cfg))
}

fn execute(config: &RunConfig, out: &Path, timings: &mut BTreeMap<String, f64>) -> Result<Vec<String>> {
    let seed = config.seed;
    let mut files = Vec::new();
    let mut emit = |name: &str| -> PathBuf {
        files.push(name.to_string());
        out.join(name)
    };
    match &config.experiment {
        Experiment::WickExpand { vars, cumulants } => {
            let table = io::read_table(cumulants)?.to_table()?;
            let seq = LabeledSeq::from_ids(vars);
            let w = wick_from_cumulants(&table, &seq)?;
            let ex = wick_cumulant_expansion(&table, &seq)?;
            io::write_wick(&emit("wick.json"), &WickDoc::new(&w, Some(&ex)))?;
        }
        Experiment::CumulantConvert { input, to, max_order } => {
            let doc = io::read_table(input)?;
            let order = max_order.unwrap_or(usize::MAX);
            let keys: Vec<Key> = doc.to_table()?.iter().map(|(k, _)| k.clone()).filter(|k| k.len() <= order).collect();
            let out_doc = match (doc.kind, to) {
                (TableKind::Moment, ConvertTarget::Cumulant) => {
                    let m = doc.to_moments()?;
                    let src = OracleCumulants::new(&m);
                    let mut t = CumulantTable::new(Provenance::RecursiveFromMoments);
                    for k in &keys {
                        t.insert(k.vars(), src.cumulant(k.vars())?);
                    }
                    TableDoc::from_table(TableKind::Cumulant, &t)
                }
                (TableKind::Cumulant, ConvertTarget::Moment) => {
                    let t = doc.to_table()?;
                    let mut m = MomentTable::default();
                    for k in keys {
                        let v = moments_from_cumulants(&t, &LabeledSeq::from_vars(k.vars()))?;
                        m.entries.insert(k, v);
                    }
                    TableDoc::from_moments(&m)
                }
                (TableKind::Cumulant, ConvertTarget::Cumulant) | (TableKind::Moment, ConvertTarget::Moment) => doc,
                (TableKind::CumulantRate, _) => {
                    return Err(Error::Config("a cumulant-rate table cannot be converted".into()));
                }
            };
            io::write_table(&emit("table.json"), &out_doc)?;
        }
        Experiment::HierarchyRhs { model, state, order } => {
            let mdoc = io::read_model(model)?;
            let m = mdoc.to_model()?;
            let initial = match state {
                Some(p) => io::read_table(p)?,
                None => mdoc
                    .initial
                    .clone()
                    .ok_or_else(|| Error::Config("hierarchy rhs needs --state or an `initial` table in the model".into()))?,
            };
            let mut table = initial.to_table()?;
            table.provenance = Provenance::Analytic;
            let st = HierarchyState::new(table, *order, mdoc.t);
            let rhs = hierarchy_rhs_table(&m, &st)?;
            io::write_table(&emit("rhs.json"), &TableDoc::from_table(TableKind::CumulantRate, &rhs))?;
        }
        Experiment::DnlsSimulate {
            system,
            w0,
            realizations,
            dt,
            steps,
            family,
            snapshots,
            precision,
        } => {
            let lat = system.lattice()?;
            let model = Dnls::new(lat, &system.dispersion()?, system.lambda)?;
            model.check_step(*dt)?;
            let w = w0.spectrum(lat, model.omega())?;
            let t0 = Instant::now();
            let mut ens = sample_initial(lat, &w, *realizations, seed, *family)?;
            ens.evolve(&model, *dt, *steps)?;
            timings.insert("evolve".into(), t0.elapsed().as_secs_f64() * 1e3);
            io::write_spectrum_csv(&emit("spectrum.csv"), &estimate_w(&ens)?)?;
            let mut hw = csv::Writer::from_path(emit("history.csv"))?;
            hw.write_record(["t", "R"])?;
            for (t, r) in &ens.history {
                hw.write_record([t.to_string(), r.to_string()])?;
            }
            hw.flush()?;
            if *snapshots {
                io::write_ensemble(&emit("ensemble"), &ens, system.lambda, *family, *precision)?;
            }
        }
        Experiment::EstimateW { ensemble } => {
            let (_, ens) = io::read_ensemble(ensemble)?;
            io::write_spectrum_csv(&emit("spectrum.csv"), &estimate_w(&ens)?)?;
        }
        Experiment::BpSolve {
            system,
            w0,
            delta,
            tau_end,
            dtau,
        } => {
            let (lat, cfg) = collision_config(system, *delta)?;
            let w = w0.spectrum(lat, cfg.omega())?;
            let t0 = Instant::now();
            let traj = bp_solve(&w, &cfg, *tau_end, *dtau)?;
            timings.insert("solve".into(), t0.elapsed().as_secs_f64() * 1e3);
            io::write_trajectory_csv(&emit("trajectory.csv"), &lat, &traj)?;
            io::write_json(&emit("summary.json"), &TrajectorySummary::new(lat, &traj))?;
        }
        Experiment::BpCompare {
            system,
            w0,
            lambdas,
            tau,
            delta,
        } => {
            let (lat, cfg) = collision_config(system, *delta)?;
            let w = w0.spectrum(lat, cfg.omega())?;
            let rows = bp_compare(&w, &cfg, lambdas, *tau)?;
            let mut cw = csv::Writer::from_path(emit("compare.csv"))?;
            cw.write_record(["lambda", "T", "sup_gap", "rel_l2_gap"])?;
            for r in &rows.summary {
                cw.write_record([r.lambda.to_string(), r.t.to_string(), r.sup_gap.to_string(), r.rel_l2_gap.to_string()])?;
            }
            cw.flush()?;
            let mut mw = csv::Writer::from_path(emit("compare_modes.csv"))?;
            let mut head: Vec<String> = (1..=lat.d).map(|i| format!("k{i}")).collect();
            head.push("collision".into());
            head.extend(lambdas.iter().map(|l| format!("prelimit_{l}")));
            mw.write_record(&head)?;
            for k in 0..lat.volume() {
                let kk = lat.momentum(k);
                let mut rec: Vec<String> = (0..lat.d).map(|a| kk[a].to_string()).collect();
                rec.push(rows.collision.values[k].to_string());
                rec.extend(rows.prelimit.iter().map(|p| p.values[k].to_string()));
                mw.write_record(&rec)?;
            }
            mw.flush()?;
        }
        Experiment::KineticCheck {
            system,
            w0,
            lambdas,
            tau,
            realizations,
            dt,
            delta,
        } => {
            let (lat, cfg) = collision_config(system, *delta)?;
            let w = w0.spectrum(lat, cfg.omega())?;
            let t0 = Instant::now();
            let report = kinetic_check(system, &w, &cfg, lambdas, *tau, *realizations, *dt, seed)?;
            timings.insert("check".into(), t0.elapsed().as_secs_f64() * 1e3);
            let mut cw = csv::Writer::from_path(emit("check.csv"))?;
            let mut head = vec!["lambda".to_string()];
            head.extend((1..=lat.d).map(|i| format!("k{i}")));
            head.extend(["mc_increment", "mc_stderr", "collision", "prelimit"].map(String::from));
            cw.write_record(&head)?;
            for c in &report.columns {
                for k in 0..lat.volume() {
                    let kk = lat.momentum(k);
                    let mut rec = vec![c.lambda.to_string()];
                    rec.extend((0..lat.d).map(|a| kk[a].to_string()));
                    rec.push(c.mc_increment[k].to_string());
                    rec.push(c.mc_stderr[k].to_string());
                    rec.push(report.collision[k].to_string());
                    rec.push(c.prelimit[k].to_string());
                    cw.write_record(&rec)?;
                }
            }
            cw.flush()?;
            let summary: Vec<CheckSummary> = report.columns.iter().map(CheckColumn::summary).collect();
            io::write_json(&emit("check_summary.json"), &summary)?;
        }
    }
    Ok(files)
}

/// One row of the pre-limit convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub lambda: f64,
    /// Kinetic time window `τ/λ²`.
    pub t: f64,
    /// `max_k |prelimit/τ − 𝒞|`
    pub sup_gap: f64,
    /// `‖prelimit/τ − 𝒞‖₂ / ‖𝒞‖₂`
    pub rel_l2_gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareTable {
    pub collision: Spectrum,
    /// `prelimit_kernel / τ` per coupling.
    pub prelimit: Vec<Spectrum>,
    pub summary: Vec<CompareRow>,
}

/// `prelimit_kernel(W, λ, τ)/τ` against `𝒞(W)` for each `λ`.
pub fn bp_compare(w: &Spectrum, cfg: &CollisionConfig, lambdas: &[f64], tau: f64) -> Result<CompareTable> {
    let c = collision_operator(w, cfg)?;
    let norm = c.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut prelimit = Vec::with_capacity(lambdas.len());
    let mut summary = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut p = prelimit_kernel(w, lambda, tau, cfg)?;
        p.values.iter_mut().for_each(|x| *x /= tau);
        let gaps: Vec<f64> = p.values.iter().zip(&c.values).map(|(a, b)| a - b).collect();
        summary.push(CompareRow {
            lambda,
            t: tau / (lambda * lambda),
            sup_gap: gaps.iter().map(|g| g.abs()).fold(0.0, f64::max),
            rel_l2_gap: gaps.iter().map(|g| g * g).sum::<f64>().sqrt() / norm.max(f64::MIN_POSITIVE),
        });
        prelimit.push(p);
    }
    Ok(CompareTable {
        collision: c,
        prelimit,
        summary,
    })
}

/// Monte Carlo and analytic columns for one coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckColumn {
    pub lambda: f64,
    pub steps: usize,
    /// Mean of `(|ψ̂_t(k)|² − |ψ̂₀(k)|²)/(L^d τ)` over realizations.
    pub mc_increment: Vec<f64>,
    pub mc_stderr: Vec<f64>,
    /// `prelimit_kernel / τ`
    pub prelimit: Vec<f64>,
    /// `𝒞(W₀)`, repeated for convenience.
    pub collision: Vec<f64>,
}

/// Modes where `|𝒞(W₀)|` exceeds three Monte Carlo standard errors, and how many
/// of those have an increment of the same sign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub lambda: f64,
    pub steps: usize,
    pub resolved: usize,
    pub sign_agree: usize,
}

impl CheckColumn {
    pub fn summary(&self) -> CheckSummary {
        let mut resolved = 0;
        let mut sign_agree = 0;
        for ((m, e), c) in self.mc_increment.iter().zip(&self.mc_stderr).zip(&self.collision) {
            if c.abs() > 3.0 * e {
                resolved += 1;
                if m.signum() == c.signum() {
                    sign_agree += 1;
                }
            }
        }
        CheckSummary {
            lambda: self.lambda,
            steps: self.steps,
            resolved,
            sign_agree,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub collision: Vec<f64>,
    pub columns: Vec<CheckColumn>,
}

/// For each `λ`: evolve `n` Gaussian realizations of `W₀` to `t = τ/λ²`
/// and compare the paired increment per unit `τ` with `𝒞(W₀)` and with the
/// pre-limit kernel.
#[allow(clippy::too_many_arguments)]
pub fn kinetic_check(
    system: &SystemConfig,
    w0: &Spectrum,
    cfg: &CollisionConfig,
    lambdas: &[f64],
    tau: f64,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<CheckReport> {
    if n < 2 {
        return Err(Error::DegenerateEnsemble(n));
    }
    let lat = cfg.lattice();
    let vol = lat.volume() as f64;
    let collision = collision_operator(w0, cfg)?.values;
    let disp = system.dispersion()?;
    let mut columns = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let model = Dnls::new(lat, &disp, lambda)?;
        let t = tau / (lambda * lambda);
        let steps = ((t / dt).round() as usize).max(1);
        let h = t / steps as f64;
        let mut ens = sample_initial(lat, w0, n, seed, Family::Gaussian)?;
        let before: Vec<Vec<f64>> = ens
            .fourier_fields()
            .into_iter()
            .map(|f| f.iter().map(|z| z.norm_sqr()).collect())
            .collect();
        ens.evolve(&model, h, steps)?;
        let after = ens.fourier_fields();
        let mut inc = vec![0.0; lat.volume()];
        let mut err = vec![0.0; lat.volume()];
        let mut col = vec![0.0; n];
        for k in 0..lat.volume() {
            for (r, c) in col.iter_mut().enumerate() {
                *c = (after[r][k].norm_sqr() - before[r][k]) / (vol * tau);
            }
            let (m, e) = mean_stderr(&col);
            inc[k] = m;
            err[k] = e;
        }
        let mut pre = prelimit_kernel(w0, lambda, tau, cfg)?.values;
        pre.iter_mut().for_each(|x| *x /= tau);
        columns.push(CheckColumn {
            lambda,
            steps,
            mc_increment: inc,
            mc_stderr: err,
            prelimit: pre,
            collision: collision.clone(),
        });
    }
    Ok(CheckReport { collision, columns })
}

/// Structured error report written to stderr on failure.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorReport {
    pub error: String,
    pub exit_code: i32,
}

impl ErrorReport {
    pub fn new(e: &Error) -> Self {
        ErrorReport {
            error: e.to_string(),
            exit_code: e.exit_code(),
        }
    }
}

/// Parse-free entry used by the binary: returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    match cli.to_config().and_then(|c| run(&c)) {
        Ok(o) => {
            for f in &o.outputs {
                println!("{}", o.out.join(f).display());
            }
            println!("{}", o.manifest.display());
            0
        }
        Err(e) => {
            let r = ErrorReport::new(&e);
            eprintln!("{}", serde_json::to_string(&r).unwrap_or_else(|_| e.to_string()));
            r.exit_code
        }
    }
}
