//! Experiment runner behind the `qite` binary.
//!
//! A run reads one TOML experiment file, validates it completely, and only
//! then creates its output directory, which receives `manifest.json`, one CSV
//! per result series, and `summary.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{maxcut_optimum, maxcut_success, mutual_information, qite_measurement_count, CostQuery, SpectralDecomposition};
use crate::error::{Error, Result};
use crate::hamiltonians::{Hamiltonian, ModelSpec};
use crate::pauli::PauliString;
use crate::qite::{qite_evolve_observed, QiteConfig};
use crate::qlanczos::{qlanczos_from_ledger, KrylovLedger, Parity, QlanczosConfig};
use crate::qmetts::{block_error, energy_observable, metts_chain, BasisSchedule, MettsConfig};
use crate::statevector::{ProductLabel, StateVector, DEFAULT_MAX_QUBITS};

/// Environment variable holding the worker-thread count for batch runs.
pub const THREADS_ENV: &str = "QITE_THREADS";

/// Bumped whenever a CSV column set changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Systems up to this size get a dense ground state for the fidelity column.
const FIDELITY_MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Qite,
    Qlanczos,
    Qmetts,
    Mutualinfo,
    Count,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QlanczosSection {
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_parity")]
    pub parity: Parity,
    /// Gaussian noise on ledger energies (absolute) and norms (relative).
    #[serde(default)]
    pub ledger_noise: f64,
}

fn default_s() -> f64 {
    QlanczosConfig::exact().s
}

fn default_eps() -> f64 {
    QlanczosConfig::exact().eps
}

fn default_parity() -> Parity {
    Parity::Even
}

impl Default for QlanczosSection {
    fn default() -> Self {
        QlanczosSection { s: default_s(), eps: default_eps(), parity: default_parity(), ledger_noise: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MettsSection {
    pub beta: f64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_n_warmup")]
    pub n_warmup: usize,
    #[serde(default = "default_schedule")]
    pub schedule: BasisSchedule,
    /// Observable as `[[coefficient, "label"], ...]`; the energy when absent.
    #[serde(default)]
    pub observable: Option<Vec<(f64, String)>>,
}

fn default_n_samples() -> usize {
    MettsConfig::default().n_samples
}

fn default_n_warmup() -> usize {
    MettsConfig::default().n_warmup
}

fn default_schedule() -> BasisSchedule {
    BasisSchedule::Alternating
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutualInfoSection {
    pub betas: Vec<f64>,
    /// Qubit pairs; all pairs when absent.
    #[serde(default)]
    pub pairs: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    /// Product-state label (`0`, `1`, `+`, `-` per qubit, qubit 0 first),
    /// or one of `zero`, `plus`, `neel`.
    #[serde(default)]
    pub initial_state: Option<String>,
    #[serde(default)]
    pub qite: Option<QiteConfig>,
    #[serde(default)]
    pub qlanczos: Option<QlanczosSection>,
    #[serde(default)]
    pub metts: Option<MettsSection>,
    #[serde(default)]
    pub mutualinfo: Option<MutualInfoSection>,
    #[serde(default)]
    pub count: Option<CostQuery>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Largest register accepted by the runner and its dense oracles.
    #[serde(default)]
    pub max_qubits: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn max_qubits(&self) -> usize {
        self.max_qubits.unwrap_or(DEFAULT_MAX_QUBITS)
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian> {
        let model = self.model.as_ref().ok_or_else(|| Error::Config("missing [model] section".into()))?;
        if model.n_qubits() > self.max_qubits() {
            return Err(Error::Resource(format!("model needs {} qubits, limit is {}", model.n_qubits(), self.max_qubits())));
        }
        model.build()
    }

    pub fn qite_config(&self) -> QiteConfig {
        let mut cfg = match (&self.qite, self.algorithm) {
            (Some(q), _) => q.clone(),
            (None, Algorithm::Qmetts) => MettsConfig::default().qite,
            (None, _) => QiteConfig::default(),
        };
        cfg.noise_seed = self.seed;
        if let Some(m) = self.max_qubits {
            cfg.max_qubits = m;
        }
        cfg
    }

    pub fn initial_state(&self, n: usize) -> Result<StateVector> {
        let spec = self.initial_state.as_deref().ok_or_else(|| Error::Config("missing initial_state".into()))?;
        let label = match spec {
            "zero" => "0".repeat(n),
            "plus" => "+".repeat(n),
            "neel" => (0..n).map(|q| if q % 2 == 0 { '0' } else { '1' }).collect(),
            other => other.to_string(),
        };
        let parsed = ProductLabel::parse(&label).map_err(|e| Error::Config(e.to_string()))?;
        if parsed.n_qubits() != n {
            return Err(Error::Config(format!("initial_state has {} qubits, the model has {n}", parsed.n_qubits())));
        }
        StateVector::product(&parsed)
    }

    pub fn metts_config(&self) -> Result<MettsConfig> {
        let m = self.metts.as_ref().ok_or_else(|| Error::Config("missing [metts] section".into()))?;
        Ok(MettsConfig {
            beta: m.beta,
            qite: self.qite_config(),
            n_samples: m.n_samples,
            n_warmup: m.n_warmup,
            schedule: m.schedule,
            seed: self.seed,
        })
    }

    /// Checks everything that can be checked without running the experiment.
    pub fn validate(&self) -> Result<()> {
        match self.algorithm {
            Algorithm::Count => {
                let q = self.count.as_ref().ok_or_else(|| Error::Config("missing [count] section".into()))?;
                qite_measurement_count(q)?;
            }
            Algorithm::Qite | Algorithm::Qlanczos => {
                let h = self.hamiltonian()?;
                self.qite_config().validate(&h)?;
                self.initial_state(h.n_qubits())?;
                if self.algorithm == Algorithm::Qlanczos {
                    let q = self.qlanczos.clone().unwrap_or_default();
                    if !(q.s > 0.0 && q.s < 1.0) || !(q.eps > 0.0) || !(q.ledger_noise >= 0.0) {
                        return Err(Error::Config("qlanczos needs 0 < s < 1, eps > 0, ledger_noise >= 0".into()));
                    }
                }
            }
            Algorithm::Qmetts => {
                let h = self.hamiltonian()?;
                self.metts_config()?.validate(&h)?;
                self.metts_observable(&h)?;
            }
            Algorithm::Mutualinfo => {
                let h = self.hamiltonian()?;
                self.initial_state(h.n_qubits())?;
                let mi = self.mutualinfo.as_ref().ok_or_else(|| Error::Config("missing [mutualinfo] section".into()))?;
                if mi.betas.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
                    return Err(Error::Config("mutualinfo betas must be non-negative".into()));
                }
                for &(i, j) in mi.pairs.iter().flatten() {
                    if i == j || i >= h.n_qubits() || j >= h.n_qubits() {
                        return Err(Error::Config(format!("invalid qubit pair ({i}, {j})")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn metts_observable(&self, h: &Hamiltonian) -> Result<crate::pauli::PauliSum> {
        match self.metts.as_ref().and_then(|m| m.observable.as_ref()) {
            None => energy_observable(h),
            Some(terms) => {
                let mut out = Vec::new();
                for (c, label) in terms {
                    let s = PauliString::from_label(label).map_err(|e| Error::Config(e.to_string()))?;
                    if s.n_qubits() != h.n_qubits() {
                        return Err(Error::Config(format!("observable string {label} does not match {} qubits", h.n_qubits())));
                    }
                    out.push((*c, s));
                }
                Ok(crate::pauli::PauliSum::new(out))
            }
        }
    }
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Model(_) | Error::Domain(_) | Error::InvalidPool(_) => 2,
        Error::Resource(_) | Error::Io(_) => 3,
        Error::Numerical(_) | Error::NonHermitian(_) | Error::Dimension(_) => 4,
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Serialize)]
struct Phase {
    name: String,
    seconds: f64,
}

struct Manifest {
    path: PathBuf,
    config: Value,
    started_unix: u64,
    phases: Vec<Phase>,
}

impl Manifest {
    fn start(dir: &Path, config: &ExperimentConfig) -> Result<Self> {
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let config = serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?;
        let m = Manifest { path: dir.join("manifest.json"), config, started_unix, phases: Vec::new() };
        m.write("running", None)?;
        Ok(m)
    }

    fn write(&self, status: &str, error: Option<&str>) -> Result<()> {
        let body = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "csv_schema_version": CSV_SCHEMA_VERSION,
            "status": status,
            "error": error,
            "started_unix": self.started_unix,
            "phases": self.phases,
            "config": self.config,
        });
        fs::write(&self.path, serde_json::to_string_pretty(&body).map_err(|e| Error::Config(e.to_string()))? + "\n")?;
        Ok(())
    }

    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        log::info!("phase {name} started");
        let t = Instant::now();
        let out = f();
        log::info!("phase {name} finished in {:.3}s", t.elapsed().as_secs_f64());
        self.phases.push(Phase { name: name.to_string(), seconds: t.elapsed().as_secs_f64() });
        out
    }
}

/// Validates `config`, creates `out`, and runs the experiment into it.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<Value> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let mut manifest = Manifest::start(out, config)?;
    let result = execute(config, out, &mut manifest);
    match &result {
        Ok(_) => manifest.write("complete", None)?,
        Err(e) => manifest.write("failed", Some(&e.to_string()))?,
    }
    result
}

fn write_summary(out: &Path, summary: &Value) -> Result<()> {
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(summary).map_err(|e| Error::Config(e.to_string()))? + "\n")?;
    Ok(())
}

fn execute(config: &ExperimentConfig, out: &Path, manifest: &mut Manifest) -> Result<Value> {
    let summary = match config.algorithm {
        Algorithm::Count => {
            let q = config.count.as_ref().ok_or_else(|| Error::Config("missing [count] section".into()))?;
            let p_total = qite_measurement_count(q)?;
            json!({ "algorithm": "count", "k": q.k, "t": q.t, "d": q.d, "odd_y": q.odd_y, "p_total": p_total })
        }
        Algorithm::Qite => run_qite(config, out, manifest)?,
        Algorithm::Qlanczos => run_qlanczos(config, out, manifest)?,
        Algorithm::Qmetts => run_qmetts(config, out, manifest)?,
        Algorithm::Mutualinfo => run_mutualinfo(config, out, manifest)?,
    };
    write_summary(out, &summary)?;
    Ok(summary)
}

fn ground_reference(h: &Hamiltonian, limit: usize) -> Result<Option<(f64, StateVector)>> {
    if h.n_qubits() > FIDELITY_MAX_QUBITS.min(limit) {
        return Ok(None);
    }
    let spec = SpectralDecomposition::with_limit(h, limit)?;
    Ok(Some((spec.eigenvalues[0], spec.eigenvector(0)?)))
}

fn run_qite(config: &ExperimentConfig, out: &Path, manifest: &mut Manifest) -> Result<Value> {
    let h = config.hamiltonian()?;
    let qcfg = config.qite_config();
    let psi0 = config.initial_state(h.n_qubits())?;
    let reference = manifest.time("oracle", || ground_reference(&h, config.max_qubits()))?;
    let maxcut = match h.model() {
        ModelSpec::Maxcut { n_vertices, edges } => Some((edges.clone(), maxcut_optimum(edges, *n_vertices))),
        _ => None,
    };
    let mut fidelities = Vec::new();
    let mut successes = Vec::new();
    let traj = manifest.time("qite", || {
        qite_evolve_observed(&psi0, &h, &qcfg, |_, s| {
            if let Some((_, g)) = &reference {
                fidelities.push(s.fidelity(g).ok());
            }
            if let Some((edges, c_max)) = &maxcut {
                successes.push(maxcut_success(s, edges, *c_max));
            }
        })
    })?;

    let mut csv = String::from("sweep,beta,energy,fidelity_opt\n");
    for l in 0..traj.energies.len() {
        let fid = fidelities.get(l).copied().flatten().map(fmt_f64).unwrap_or_default();
        let _ = writeln!(csv, "{l},{},{},{fid}", fmt_f64(traj.betas[l]), fmt_f64(traj.energies[l]));
    }
    fs::write(out.join("qite.csv"), csv)?;
    if maxcut.is_some() {
        let mut csv = String::from("sweep,beta,success_probability\n");
        for (l, p) in successes.iter().enumerate() {
            let _ = writeln!(csv, "{l},{},{}", fmt_f64(traj.betas[l]), fmt_f64(*p));
        }
        fs::write(out.join("maxcut.csv"), csv)?;
    }
    let final_energy = *traj.energies.last().unwrap_or(&f64::NAN);
    Ok(json!({
        "algorithm": "qite",
        "n_qubits": h.n_qubits(),
        "final_beta": traj.betas.last(),
        "final_energy": final_energy,
        "exact_ground_energy": reference.as_ref().map(|r| r.0),
        "final_fidelity": fidelities.last().copied().flatten(),
        "final_maxcut_success": successes.last(),
    }))
}

fn run_qlanczos(config: &ExperimentConfig, out: &Path, manifest: &mut Manifest) -> Result<Value> {
    let h = config.hamiltonian()?;
    let qcfg = config.qite_config();
    let psi0 = config.initial_state(h.n_qubits())?;
    let section = config.qlanczos.clone().unwrap_or_default();
    let traj = manifest.time("qite", || qite_evolve_observed(&psi0, &h, &qcfg, |_, _| {}))?;
    let mut ledger = KrylovLedger::from_trajectory(&traj)?;
    if section.ledger_noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        ledger = ledger.with_noise(section.ledger_noise, &mut rng)?;
    }
    let lcfg = QlanczosConfig { s: section.s, eps: section.eps, parity: section.parity };
    let points = manifest.time("qlanczos", || qlanczos_from_ledger(&ledger, &lcfg))?;
    let mut csv = String::from("beta,e_qite,e_qlanczos,n_retained\n");
    for p in &points {
        let _ = writeln!(csv, "{},{},{},{}", fmt_f64(traj.betas[p.step]), fmt_f64(p.e_qite), fmt_f64(p.e_qlanczos), p.n_retained);
    }
    fs::write(out.join("qlanczos.csv"), csv)?;
    let last = points.last();
    Ok(json!({
        "algorithm": "qlanczos",
        "n_qubits": h.n_qubits(),
        "final_e_qite": last.map(|p| p.e_qite),
        "final_e_qlanczos": last.map(|p| p.e_qlanczos),
    }))
}

fn run_qmetts(config: &ExperimentConfig, out: &Path, manifest: &mut Manifest) -> Result<Value> {
    let h = config.hamiltonian()?;
    let mcfg = config.metts_config()?;
    let obs = config.metts_observable(&h)?;
    let samples = manifest.time("qmetts", || metts_chain(&h, &obs, &mcfg))?;
    let mut csv = String::from("sample,label,value\n");
    for s in &samples {
        let _ = writeln!(csv, "{},{},{}", s.step, s.label, fmt_f64(s.value));
    }
    fs::write(out.join("qmetts.csv"), csv)?;
    let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
    let (mean, stderr) = block_error(&values, mcfg.n_warmup)?;
    Ok(json!({
        "algorithm": "qmetts",
        "beta": mcfg.beta,
        "n_samples": mcfg.n_samples,
        "n_warmup": mcfg.n_warmup,
        "mean": mean,
        "stderr_block": stderr,
    }))
}

fn run_mutualinfo(config: &ExperimentConfig, out: &Path, manifest: &mut Manifest) -> Result<Value> {
    let h = config.hamiltonian()?;
    let psi0 = config.initial_state(h.n_qubits())?;
    let section = config.mutualinfo.as_ref().ok_or_else(|| Error::Config("missing [mutualinfo] section".into()))?;
    let n = h.n_qubits();
    let pairs: Vec<(usize, usize)> =
        section.pairs.clone().unwrap_or_else(|| (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect());
    let spec = manifest.time("oracle", || SpectralDecomposition::with_limit(&h, config.max_qubits()))?;
    let ground = spec.eigenvector(0)?;
    let mut csv = String::from("beta,i,j,mutual_information\n");
    let mut fid = String::from("beta,fidelity_ground\n");
    let mut last_fidelity = None;
    manifest.time("mutualinfo", || {
        for &beta in &section.betas {
            let state = spec.propagate(&psi0, beta)?;
            for &(i, j) in &pairs {
                let _ = writeln!(csv, "{},{i},{j},{}", fmt_f64(beta), fmt_f64(mutual_information(&state, i, j)?));
            }
            let f = state.fidelity(&ground)?;
            let _ = writeln!(fid, "{},{}", fmt_f64(beta), fmt_f64(f));
            last_fidelity = Some(f);
        }
        Ok(())
    })?;
    fs::write(out.join("mutualinfo.csv"), csv)?;
    fs::write(out.join("fidelity.csv"), fid)?;
    Ok(json!({
        "algorithm": "mutualinfo",
        "n_qubits": n,
        "entropy_log_base": "e",
        "final_fidelity": last_fidelity,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    /// Dense exact imaginary-time evolution of the run's model and initial state.
    Oracle,
    /// The first run directory.
    First,
}

/// One line of a comparison report.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub run: String,
    pub beta: f64,
    pub value: f64,
    pub reference: f64,
    pub delta: f64,
    /// Variational bound for QITE series, `E_QL ≤ E_QITE` for QLanczos series.
    pub check: bool,
}

#[derive(Debug, Clone, Deserialize)]
struct ManifestFile {
    config: ExperimentConfig,
}

fn read_series(dir: &Path) -> Result<(ExperimentConfig, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: ManifestFile =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: bad manifest: {e}", dir.display())))?;
    let file = match manifest.config.algorithm {
        Algorithm::Qite => "qite.csv",
        Algorithm::Qlanczos => "qlanczos.csv",
        other => return Err(Error::Config(format!("{}: cannot compare {other:?} runs", dir.display()))),
    };
    let csv = fs::read_to_string(dir.join(file))?;
    let mut rows = Vec::new();
    for line in csv.lines().skip(1) {
        let row: Vec<f64> =
            line.split(',').map(|f| if f.is_empty() { Ok(f64::NAN) } else { f.parse::<f64>() }).collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("{}: {e}", dir.join(file).display())))?;
        rows.push(row);
    }
    Ok((manifest.config, rows))
}

/// `(beta, value)` pairs of the main series: QITE energy or QLanczos energy.
fn main_series(config: &ExperimentConfig, rows: &[Vec<f64>]) -> Vec<(f64, f64, Option<f64>)> {
    match config.algorithm {
        Algorithm::Qite => rows.iter().map(|r| (r[1], r[2], None)).collect(),
        _ => rows.iter().map(|r| (r[0], r[2], Some(r[1]))).collect(),
    }
}

/// Per-β deltas of each run against the chosen baseline.
pub fn compare(dirs: &[PathBuf], baseline: Baseline) -> Result<Vec<CompareRow>> {
    let runs: Vec<(PathBuf, ExperimentConfig, Vec<Vec<f64>>)> =
        dirs.iter().map(|d| read_series(d).map(|(c, r)| (d.clone(), c, r))).collect::<Result<_>>()?;
    let Some((_, first_cfg, first_rows)) = runs.first() else {
        return Err(Error::Config("compare needs at least one run directory".into()));
    };
    for (d, c, _) in &runs {
        if c.model != first_cfg.model {
            return Err(Error::Config(format!("{} uses a different model than {}", d.display(), dirs[0].display())));
        }
    }
    let first_series = main_series(first_cfg, first_rows);
    let mut out = Vec::new();
    for (dir, cfg, rows) in &runs {
        let h = cfg.hamiltonian()?;
        let series = main_series(cfg, rows);
        let oracle = match baseline {
            Baseline::Oracle => {
                let spec = SpectralDecomposition::with_limit(&h, cfg.max_qubits())?;
                let psi0 = cfg.initial_state(h.n_qubits())?;
                Some((spec.eigenvalues[0], spec, psi0))
            }
            Baseline::First => None,
        };
        for &(beta, value, e_qite) in &series {
            let reference = match &oracle {
                Some((_, spec, psi0)) => h.energy(&spec.propagate(psi0, beta)?)?,
                None => first_series
                    .iter()
                    .find(|(b, _, _)| (b - beta).abs() <= 1e-12 * beta.abs().max(1.0))
                    .map(|s| s.1)
                    .ok_or_else(|| Error::Config(format!("{}: no β = {beta} in the first run", dir.display())))?,
            };
            let check = match (e_qite, &oracle) {
                (Some(eq), _) => value <= eq + 1e-9,
                (None, Some((e0, _, _))) => value >= e0 - 1e-9,
                (None, None) => true,
            };
            out.push(CompareRow { run: dir.display().to_string(), beta, value, reference, delta: value - reference, check });
        }
    }
    Ok(out)
}

pub fn format_compare(rows: &[CompareRow]) -> String {
    let mut s = String::from("run,beta,value,reference,delta,check\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.run, fmt_f64(r.beta), fmt_f64(r.value), fmt_f64(r.reference), fmt_f64(r.delta), r.check);
    }
    s
}

#[derive(Debug, Parser)]
#[command(name = "qite", version, about = "Quantum imaginary-time evolution emulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one or more experiment files.
    Run {
        /// Experiment file; repeat for a batch.
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Output directory (batch runs get one subdirectory per file).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
        #[arg(long)]
        max_qubits: Option<usize>,
    },
    /// Compare run directories against the oracle or the first run.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "oracle")]
        baseline: Baseline,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pauli measurement count of second-order-Trotter QITE.
    Count {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        t: u64,
        #[arg(long)]
        d: u32,
        #[arg(long)]
        odd_y: bool,
    },
}

fn output_dir(config: &ExperimentConfig, path: &Path, out: Option<&Path>, batch: bool) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    match (out, batch) {
        (Some(o), true) => o.join(stem),
        (Some(o), false) => o.to_path_buf(),
        (None, _) => config.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(stem)),
    }
}

fn run_one(path: &Path, out: Option<&Path>, batch: bool, seed: Option<u64>, max_qubits: Option<usize>) -> Result<PathBuf> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(m) = max_qubits {
        config.max_qubits = Some(m);
    }
    config.validate()?;
    let dir = output_dir(&config, path, out, batch);
    run_experiment(&config, &dir)?;
    Ok(dir)
}

/// Runs the command line and returns the process exit status.
pub fn run_cli(cli: Cli) -> i32 {
    match cli.command {
        Command::Run { configs, out, seed_override, max_qubits } => {
            if let Ok(v) = std::env::var(THREADS_ENV) {
                if let Ok(n) = v.parse::<usize>() {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
            let batch = configs.len() > 1;
            let results: Vec<(PathBuf, Result<PathBuf>)> = configs
                .par_iter()
                .map(|p| (p.clone(), run_one(p, out.as_deref(), batch, seed_override, max_qubits)))
                .collect();
            let mut status = 0;
            for (path, r) in results {
                match r {
                    Ok(dir) => println!("{}: wrote {}", path.display(), dir.display()),
                    Err(e) => {
                        eprintln!("error: {e}");
                        status = status.max(exit_code(&e));
                    }
                }
            }
            status
        }
        Command::Compare { runs, baseline, out } => match compare(&runs, baseline) {
            Ok(rows) => {
                let report = format_compare(&rows);
                match out {
                    Some(p) => {
                        if let Err(e) = fs::write(&p, report) {
                            eprintln!("error: {e}");
                            return 3;
                        }
                    }
                    None => print!("{report}"),
                }
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Command::Count { k, t, d, odd_y } => match qite_measurement_count(&CostQuery { k, t, d, odd_y }) {
            Ok(n) => {
                println!("{n}");
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected_with_position() {
        let err = ExperimentConfig::from_toml("algorithm = \"count\"\nbogus = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn model_section_parses() {
        let cfg = ExperimentConfig::from_toml(
            "algorithm = \"qite\"\ninitial_state = \"neel\"\n[model]\nname = \"heisenberg\"\nn = 4\nj = 1.0\nb = 0.0\n[qite]\ndomain_size = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.model, Some(ModelSpec::Heisenberg { n: 4, j: 1.0, b: 0.0 }));
        cfg.validate().unwrap();
        assert_eq!(cfg.initial_state(4).unwrap(), StateVector::product(&ProductLabel::parse("0101").unwrap()).unwrap());
    }

    #[test]
    fn validation_errors_are_classified() {
        let too_big = ExperimentConfig::from_toml(
            "algorithm = \"qite\"\ninitial_state = \"zero\"\nmax_qubits = 4\n[model]\nname = \"tfi\"\nn = 6\nj = 1.0\nh = 1.0\n",
        )
        .unwrap();
        assert_eq!(exit_code(&too_big.validate().unwrap_err()), 3);
        let no_state = ExperimentConfig::from_toml("algorithm = \"qite\"\n[model]\nname = \"tfi\"\nn = 2\nj = 1.0\nh = 1.0\n").unwrap();
        assert_eq!(exit_code(&no_state.validate().unwrap_err()), 2);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
