//! Run orchestration and output files.
//!
//! Every artifact carries the manifest hash in its name:
//! `manifest-<h>.json`, `pcurve-<h>.csv`, `tau-<h>.csv`,
//! `single_pair-<h>.csv`, `fit-<h>.json`, `dump-<h>/`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Experiment, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::coherence::{coherence_point, CoherencePoint, TauBound};
use crate::experiments::fit::{entropic_parameters, fit, gradient_vs_beta, FitReport, GradientReport, Model};
use crate::experiments::single_pair::{single_pair_logged, SinglePairRow};
use crate::kmc::EventLog;
use crate::lattice::{validate_degeneracy, AlgebraAudit, Lattice};

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "GRIDMEM_OUT";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Write the stabilizer, incidence and cocycle matrices (validate only).
    pub dump: bool,
    /// CSV log of every event of the first single-pair sample.
    pub event_log: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    /// A failure interrupted the run; files hold what finished before it.
    Partial,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_hash: String,
    pub code_version: String,
    pub experiment: Experiment,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub validation: Vec<SizeReport>,
    pub config: RunConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SizeReport {
    pub l: usize,
    pub vertical_lines: usize,
    pub horizontal_lines: usize,
    pub degeneracy: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditSummary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditSummary {
    pub rank_incidence: usize,
    pub rank_stabilizers: usize,
    pub logical_dimension: usize,
    pub passed: bool,
}

impl From<&AlgebraAudit> for AuditSummary {
    fn from(a: &AlgebraAudit) -> Self {
        Self {
            rank_incidence: a.rank_w,
            rank_stabilizers: a.rank_b,
            logical_dimension: a.logical_dimension,
            passed: a.passed(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitOutput {
    pub manifest_hash: String,
    pub input: PathBuf,
    pub reports: Vec<FitReport<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<GradientReport<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropic: Option<Entropic>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Entropic {
    pub dimension: f64,
    pub delta: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub manifest: PathBuf,
    pub files: Vec<PathBuf>,
    pub status: RunStatus,
}

/// Output directory: config value, else `$GRIDMEM_OUT`, else `out`.
pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Validate `cfg` and execute it. Config problems surface before anything
/// is written.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let dir = output_dir(cfg);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let hash = cfg.manifest_hash();
    let mut out = Outputs {
        dir,
        hash,
        files: Vec::new(),
    };
    let mut validation = Vec::new();
    let result = pool.install(|| match cfg.experiment {
        Experiment::Validate => run_validate(cfg, opts, &mut out, &mut validation),
        Experiment::Coherence => run_coherence(cfg, &mut out),
        Experiment::SinglePair => run_single_pair(cfg, opts, &mut out),
        Experiment::Fit => run_fit(cfg, &mut out),
    });
    let (status, error) = match &result {
        Ok(()) => (RunStatus::Complete, None),
        Err(e) => (RunStatus::Partial, Some(e.to_string())),
    };
    let manifest = Manifest {
        manifest_hash: out.hash.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment,
        seed: cfg.seed,
        status: status.clone(),
        error,
        files: out
            .files
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
        validation,
        config: cfg.clone(),
    };
    let manifest_path = out.path("manifest", "json");
    write_json(&manifest_path, &manifest)?;
    result?;
    Ok(RunSummary {
        manifest: manifest_path,
        files: out.files,
        status,
    })
}

struct Outputs {
    dir: PathBuf,
    hash: String,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn path(&self, stem: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{stem}-{}.{ext}", self.hash))
    }

    fn create(&mut self, stem: &str, ext: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let p = self.path(stem, ext);
        let f = File::create(&p).map_err(|e| Error::io(&p, e))?;
        self.files.push(p.clone());
        Ok((p, BufWriter::new(f)))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn run_validate(
    cfg: &RunConfig,
    opts: &RunOptions,
    out: &mut Outputs,
    reports: &mut Vec<SizeReport>,
) -> Result<()> {
    let audit_max = cfg.validate.as_ref().map_or(16, |v| v.audit_max_l);
    for l in cfg.sizes() {
        let spec = cfg.lattice.spec(l);
        let degeneracy = validate_degeneracy(&spec)?.to_string();
        let lat = Lattice::build(spec)?;
        let audit = (l <= audit_max).then(|| lat.audit());
        if let Some(a) = &audit {
            if !a.passed() {
                return Err(Error::InvalidSpec(format!("algebra audit failed at L = {l}: {a:?}")));
            }
        }
        if opts.dump {
            let d = out.dir.join(format!("dump-{}", out.hash)).join(format!("L{l}"));
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
            lat.write_debug_dump(&d)?;
            out.files.push(d);
        }
        reports.push(SizeReport {
            l,
            vertical_lines: lat.spec().vertical.len(),
            horizontal_lines: lat.spec().horizontal.len(),
            degeneracy,
            audit: audit.as_ref().map(AuditSummary::from),
        });
    }
    Ok(())
}

/// `inf` above the longest checkpoint, `nan` below the first one.
fn tau_field(t: TauBound) -> String {
    match t {
        TauBound::Estimate { tau } => fmt_f(tau),
        TauBound::AboveMaxTime { .. } => "inf".into(),
        TauBound::BelowFirstCheckpoint { .. } => "nan".into(),
    }
}

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn write_pcurve_rows<W: Write>(w: &mut csv::Writer<W>, pt: &CoherencePoint) -> Result<()> {
    for c in &pt.curve {
        w.write_record([
            fmt_f(pt.beta),
            pt.l.to_string(),
            fmt_f(c.t),
            fmt_f(c.p),
            fmt_f(c.wilson_lo),
            fmt_f(c.wilson_hi),
            c.n_trials.to_string(),
        ])?;
    }
    Ok(())
}

fn write_tau_row<W: Write>(w: &mut csv::Writer<W>, pt: &CoherencePoint) -> Result<()> {
    w.write_record([
        fmt_f(pt.beta),
        pt.l.to_string(),
        tau_field(pt.estimate.tau),
        fmt_f(pt.estimate.ci_lo),
        fmt_f(pt.estimate.ci_hi),
    ])?;
    Ok(())
}

fn run_coherence(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let cc = cfg.coherence_config()?;
    let (pp, pf) = out.create("pcurve", "csv")?;
    let (tp, tf) = out.create("tau", "csv")?;
    let mut pcurve = csv::Writer::from_writer(pf);
    let mut tau = csv::Writer::from_writer(tf);
    pcurve.write_record(["beta", "L", "t", "p", "wilson_lo", "wilson_hi", "n_trials"])?;
    tau.write_record(["beta", "L", "tau", "ci_lo", "ci_hi"])?;
    let mut failure = None;
    'sweep: for &beta in &cc.betas {
        for &l in &cc.sizes {
            log::info!("coherence: beta = {beta}, L = {l}");
            let res = catch_unwind(AssertUnwindSafe(|| coherence_point(&cc, beta, l)));
            let pt = match res {
                Ok(Ok(pt)) => pt,
                Ok(Err(e)) => {
                    failure = Some(e);
                    break 'sweep;
                }
                Err(panic) => {
                    let msg = panic
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "trial panicked".into());
                    failure = Some(Error::Runtime(format!(
                        "trial panic at beta = {beta}, L = {l}: {msg}"
                    )));
                    break 'sweep;
                }
            };
            write_pcurve_rows(&mut pcurve, &pt)?;
            write_tau_row(&mut tau, &pt)?;
            pcurve.flush().map_err(|e| Error::io(&pp, e))?;
            tau.flush().map_err(|e| Error::io(&tp, e))?;
        }
    }
    pcurve.flush().map_err(|e| Error::io(&pp, e))?;
    tau.flush().map_err(|e| Error::io(&tp, e))?;
    failure.map_or(Ok(()), Err)
}

pub fn write_single_pair_csv<W: Write>(w: W, rows: &[SinglePairRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["t", "mean_mass", "sem_mass", "mean_spread", "sem_spread"])?;
    for r in rows {
        w.write_record([
            fmt_f(r.t),
            fmt_f(r.mean_mass),
            fmt_f(r.sem_mass),
            fmt_f(r.mean_spread),
            fmt_f(r.sem_spread),
        ])?;
    }
    w.flush().map_err(|e| Error::io("single-pair csv", e))
}

fn run_single_pair(cfg: &RunConfig, opts: &RunOptions, out: &mut Outputs) -> Result<()> {
    let sc = cfg.single_pair_config()?;
    let mut log = match &opts.event_log {
        Some(p) => {
            let f = File::create(p).map_err(|e| Error::io(p, e))?;
            Some(EventLog::new(BufWriter::new(f))?)
        }
        None => None,
    };
    let mut log_err = None;
    let res = single_pair_logged(&sc, |rec, _| {
        if let Some(l) = log.as_mut() {
            if let Err(e) = l.record(rec) {
                log_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = log_err {
        return Err(e);
    }
    if let Some(l) = log {
        l.finish()?;
    }
    if res.creations != 0 {
        log::warn!("{} vacuum pair creations in restricted mode", res.creations);
    }
    let (_, f) = out.create("single_pair", "csv")?;
    write_single_pair_csv(f, &res.rows)
}

/// `(beta, L, tau)` rows with finite `tau` from a coherence-time CSV.
pub fn read_tau_csv(path: &Path) -> Result<Vec<(f64, usize, f64)>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(f);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("{}: missing column {name}", path.display())))
    };
    let (cb, cl, ct) = (col("beta")?, col("L")?, col("tau")?);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: bad number {:?}: {e}", path.display(), &rec[i])))
        };
        let (beta, l, tau) = (parse(cb)?, parse(cl)?, parse(ct)?);
        if tau.is_finite() && tau > 0.0 {
            rows.push((beta, l as usize, tau));
        }
    }
    Ok(rows)
}

/// Fit every configured model to the rows of a coherence-time table.
pub fn fit_table(
    rows: &[(f64, usize, f64)],
    models: &[Model],
    size: Option<usize>,
    dimension: f64,
) -> Result<(Vec<FitReport<f64>>, Option<GradientReport<f64>>, Option<Entropic>)> {
    let mut reports = Vec::new();
    let size = size.or_else(|| rows.iter().map(|r| r.1).max());
    for &model in models {
        match model {
            Model::Arrhenius | Model::SuperExp => {
                let sel: Vec<_> = rows.iter().filter(|r| Some(r.1) == size).collect();
                let x: Vec<f64> = sel.iter().map(|r| r.0).collect();
                let tau: Vec<f64> = sel.iter().map(|r| r.2).collect();
                reports.push(fit(model, &x, &tau)?);
            }
            Model::PowerLaw => {
                let mut betas: Vec<f64> = rows.iter().map(|r| r.0).collect();
                betas.sort_by(f64::total_cmp);
                betas.dedup();
                for beta in betas {
                    let sel: Vec<_> = rows.iter().filter(|r| r.0 == beta).collect();
                    if sel.len() < 3 {
                        continue;
                    }
                    let x: Vec<f64> = sel.iter().map(|r| r.1 as f64).collect();
                    let tau: Vec<f64> = sel.iter().map(|r| r.2).collect();
                    let mut rep = fit(model, &x, &tau)?;
                    rep.beta = Some(beta);
                    reports.push(rep);
                }
            }
        }
    }
    let power: Vec<FitReport<f64>> = reports.iter().filter(|r| r.model == Model::PowerLaw).cloned().collect();
    let gradient = if power.len() >= 3 { Some(gradient_vs_beta(&power)?) } else { None };
    let quadratic = reports
        .iter()
        .find(|r| r.model == Model::SuperExp)
        .and_then(|r| r.coefficient("a"));
    let entropic = match (&gradient, quadratic) {
        (Some(g), Some(a)) => {
            let (delta, kappa) = entropic_parameters(a, g.slope, dimension);
            Some(Entropic { dimension, delta, kappa })
        }
        _ => None,
    };
    Ok((reports, gradient, entropic))
}

fn run_fit(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let f = cfg.fit.as_ref().ok_or_else(|| Error::Config("missing [fit] section".into()))?;
    let input = f.input.clone().ok_or_else(|| Error::Config("fit needs an input".into()))?;
    let rows = read_tau_csv(&input)?;
    let (reports, gradient, entropic) = fit_table(&rows, &f.models, f.size, f.dimension)?;
    let output = FitOutput {
        manifest_hash: out.hash.clone(),
        input,
        reports,
        gradient,
        entropic,
    };
    let (p, w) = out.create("fit", "json")?;
    drop(w);
    write_json(&p, &output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CoherenceSection, FitSection, SinglePairSection, ValidateSection};
    use crate::experiments::LatticeFamily;

    fn base(exp: Experiment, dir: &Path) -> RunConfig {
        let mut cfg = RunConfig::with_defaults(exp);
        cfg.output_dir = Some(dir.to_path_buf());
        cfg
    }

    #[test]
    fn validate_writes_manifest_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base(Experiment::Validate, dir.path());
        cfg.lattice = LatticeFamily::pattern(5, 2, &[1, 2]);
        cfg.validate = Some(ValidateSection {
            sizes: vec![6, 12],
            audit_max_l: 8,
        });
        let s = run(&cfg, &RunOptions::default()).unwrap();
        assert!(s.files.is_empty());
        assert_eq!(s.status, RunStatus::Complete);
        let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&s.manifest).unwrap()).unwrap();
        assert_eq!(m["validation"][0]["audit"]["passed"], true);
        assert!(m["validation"][1].get("audit").is_none());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn validate_dump_writes_matrices() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base(Experiment::Validate, dir.path());
        cfg.validate = Some(ValidateSection {
            sizes: vec![4],
            audit_max_l: 8,
        });
        let s = run(
            &cfg,
            &RunOptions {
                dump: true,
                event_log: None,
            },
        )
        .unwrap();
        assert!(s.files[0].join("phi.txt").exists());
    }

    #[test]
    fn coherence_outputs_have_schema_and_monotone_times() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base(Experiment::Coherence, dir.path());
        cfg.coherence = Some(CoherenceSection {
            betas: vec![6.0],
            sizes: vec![8],
            trials: 100,
            max_time: 200.0,
            bootstrap: 20,
            ..Default::default()
        });
        let s = run(&cfg, &RunOptions::default()).unwrap();
        let hash = cfg.manifest_hash();
        assert!(s.files.iter().all(|p| p.to_string_lossy().contains(&hash)));
        let pc = std::fs::read_to_string(&s.files[0]).unwrap();
        let mut lines = pc.lines();
        assert_eq!(lines.next().unwrap(), "beta,L,t,p,wilson_lo,wilson_hi,n_trials");
        let ts: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
        assert!(!ts.is_empty());
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        let tau = std::fs::read_to_string(&s.files[1]).unwrap();
        assert!(tau.starts_with("beta,L,tau,ci_lo,ci_hi\n"));
    }

    #[test]
    fn single_pair_and_event_log() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base(Experiment::SinglePair, dir.path());
        cfg.masses = vec![0.4, 1.0, 1.0, 0.4];
        cfg.single_pair = Some(SinglePairSection {
            beta: 8.0,
            l: 8,
            t_max: 20.0,
            points: 4,
            samples: 10,
            mode: crate::kmc::Mode::Restricted,
        });
        let log = dir.path().join("events.csv");
        let s = run(
            &cfg,
            &RunOptions {
                dump: false,
                event_log: Some(log.clone()),
            },
        )
        .unwrap();
        let text = std::fs::read_to_string(&s.files[0]).unwrap();
        assert!(text.starts_with("t,mean_mass,sem_mass,mean_spread,sem_spread\n"));
        assert_eq!(text.lines().count(), 6);
        assert!(std::fs::read_to_string(log).unwrap().starts_with("time,edge,power,omega\n"));
    }

    #[test]
    fn fit_reads_tau_table() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("tau.csv");
        let mut text = String::from("beta,L,tau,ci_lo,ci_hi\n");
        for b in [6.0, 6.5, 7.0, 7.5, 8.0] {
            for l in [8usize, 12, 16, 24] {
                let g: f64 = 0.11 * b - 0.15;
                let tau = (0.028 * b * b + 0.54 * b - 2.5 + g * (l as f64).ln()).exp();
                text.push_str(&format!("{b},{l},{tau},nan,nan\n"));
            }
        }
        text.push_str("9,24,inf,nan,nan\n");
        std::fs::write(&input, text).unwrap();
        let mut cfg = base(Experiment::Fit, dir.path());
        cfg.fit = Some(FitSection {
            input: Some(input),
            ..Default::default()
        });
        let s = run(&cfg, &RunOptions::default()).unwrap();
        let out: FitOutput = serde_json::from_str(&std::fs::read_to_string(&s.files[0]).unwrap()).unwrap();
        let g = out.gradient.unwrap();
        assert!((g.slope - 0.11).abs() < 1e-9);
        // β fits at L = 24 absorb the L term into the intercept
        let sup = out.reports.iter().find(|r| r.model == Model::SuperExp).unwrap();
        assert!((sup.coefficients[0] - 0.028).abs() < 1e-9);
        assert!(out.entropic.is_some());
    }

    #[test]
    fn manifest_marks_runtime_failure() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base(Experiment::Fit, dir.path());
        cfg.fit = Some(FitSection {
            input: Some(dir.path().join("missing.csv")),
            ..Default::default()
        });
        assert!(run(&cfg, &RunOptions::default()).is_err());
        let m = std::fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(m).unwrap()).unwrap();
        assert_eq!(v["status"], "partial");
    }
}
