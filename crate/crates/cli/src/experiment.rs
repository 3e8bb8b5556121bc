//! Task runners. Each writes its artifacts under the output directory and returns their
//! relative paths; `run` adds the manifest.

use crate::config::{AnsatzSpec, Experiment, LoadedConfig, Task};
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;
use vps_core::ansatz::{build_hea, build_thermal_ansatz};
use vps_core::autodiff::Objective;
use vps_core::eigensolver::{ground_energy, MAX_ED_QUBITS};
use vps_core::hamiltonian::{Pauli, PauliString, PauliSum};
use vps_core::neural::Reweighter;
use vps_core::objectives::{gibbs_free_energy_exact, ObjectiveSpec, ThermalObjective, VqeObjective};
use vps_core::optimize::{percentile, run_campaign, CampaignResult, OptimizerConfig};
use vps_core::parallel::Execution;
use vps_core::thermal::{
    exact_gibbs, exact_renyi2, fidelity, sample_correlation, trace_distance, DensityMatrix, PreprocessingObjective,
};

pub const TABLE_FILE: &str = "table.csv";
pub const FIDELITY_FILE: &str = "fidelity.csv";
pub const CORRELATIONS_FILE: &str = "correlations.csv";
pub const ORACLE_FILE: &str = "oracle.json";
pub const BENCH_FILE: &str = "bench.csv";
pub const GROUPS_FILE: &str = "groups.csv";

/// Seed offset between the (β, layers, scheme) groups of a thermal sweep.
pub const GIBBS_SEED_STRIDE: u64 = 10_000;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub artifacts: Vec<String>,
    pub manifest: Manifest,
}

/// Collects artifact writes relative to a campaign directory.
pub struct ArtifactWriter {
    root: PathBuf,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn new(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(ArtifactWriter {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn target(&mut self, rel: &str) -> CliResult<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        self.written.push(rel.to_string());
        Ok(path)
    }

    pub fn bytes(&mut self, rel: &str, data: &[u8]) -> CliResult<()> {
        let path = self.target(rel)?;
        std::fs::write(&path, data).map_err(|e| CliError::io(&path, e))
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Artifact {
            path: self.root.join(rel),
            msg: e.to_string(),
        })?;
        text.push('\n');
        self.bytes(rel, text.as_bytes())
    }

    pub fn csv(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let data = csv_bytes(header, rows);
        self.bytes(rel, &data)
    }

    pub fn density(&mut self, rel: &str, rho: &DensityMatrix) -> CliResult<()> {
        self.bytes(rel, &rho.to_bytes())
    }

    pub fn into_list(self) -> Vec<String> {
        self.written
    }
}

pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Worker threads available to campaign execution.
pub fn thread_count(exec: Execution) -> usize {
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => rayon::current_num_threads(),
        _ => 1,
    }
}

/// Runs the configured task and writes `manifest.json` last.
pub fn run(loaded: &LoadedConfig, exp: &Experiment, exec: Execution) -> CliResult<RunOutput> {
    let mut w = ArtifactWriter::new(&exp.output_dir)?;
    match exp.task {
        Task::Vqe => run_vqe(exp, exec, &mut w)?,
        Task::Gibbs => run_gibbs(exp, exec, &mut w)?,
        Task::Oracle => run_oracle(exp, &mut w)?,
        Task::Bench => run_bench(exp, &mut w)?,
    }
    let artifacts = w.into_list();
    let manifest = Manifest::new(loaded, exp.task.name(), exp.optimizer.seed, thread_count(exec), artifacts.clone());
    manifest.write(&exp.output_dir)?;
    Ok(RunOutput {
        dir: exp.output_dir.clone(),
        artifacts,
        manifest,
    })
}

/// Per-trial rows without timings, so reruns reproduce the file byte for byte.
fn summary_rows(c: &CampaignResult) -> Vec<Vec<String>> {
    c.trials
        .iter()
        .map(|t| {
            vec![
                t.trial.to_string(),
                t.seed.to_string(),
                t.best_value.to_string(),
                t.steps.to_string(),
                t.converged.to_string(),
                opt(t.success_prob_final()),
            ]
        })
        .collect()
}

const SUMMARY_HEADER: [&str; 6] = ["trial", "seed", "best_value", "steps", "converged", "success_prob_final"];

fn write_campaign(w: &mut ArtifactWriter, group: &str, c: &CampaignResult) -> CliResult<()> {
    for t in &c.trials {
        w.json(&format!("trials/{group}/trial_{:03}.json", t.trial), t)?;
    }
    w.csv(&format!("summary/{group}.csv"), &SUMMARY_HEADER, &summary_rows(c))?;
    let timing: Vec<Vec<String>> = c
        .trials
        .iter()
        .map(|t| vec![t.trial.to_string(), format!("{:.3}", t.wall_time)])
        .collect();
    w.csv(&format!("timing/{group}.csv"), &["trial", "wall_time"], &timing)?;
    if !c.failures.is_empty() {
        let rows: Vec<Vec<String>> = c.failures.iter().map(|(k, m)| vec![k.to_string(), m.clone()]).collect();
        w.csv(&format!("failures/{group}.csv"), &["trial", "error"], &rows)?;
    }
    Ok(())
}

/// One row of `table.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct VqeRow {
    pub group: String,
    pub layers: usize,
    pub scheme: String,
    pub n_params: usize,
    /// Lowest energy over the trials' best-parameter snapshots.
    pub best: f64,
    pub percentile_25: f64,
    pub exact: Option<f64>,
    pub best_success_prob: Option<f64>,
    pub best_trial: usize,
}

impl VqeRow {
    pub fn relative_error(&self) -> Option<f64> {
        self.exact.map(|e| ((self.best - e) / e).abs())
    }
}

fn vqe_schemes(a: &AnsatzSpec, compare: bool) -> Vec<AnsatzSpec> {
    let mut v = vec![a.clone()];
    if compare {
        v.extend(a.reference());
    }
    v
}

/// Energy campaigns for every layer count and scheme.
pub fn vqe_rows(exp: &Experiment, exec: Execution, mut w: Option<&mut ArtifactWriter>) -> CliResult<Vec<VqeRow>> {
    let a = exp.ansatz.as_ref().ok_or_else(|| CliError::Usage("vqe task needs an ansatz".into()))?;
    let h = &exp.hamiltonian;
    let exact = if h.n_qubits() <= MAX_ED_QUBITS {
        Some(ground_energy(h)?)
    } else {
        None
    };
    let spec = exp.objective.spec(h, None)?;
    let energy_spec = ObjectiveSpec::energy(h.clone());
    let mut rows = Vec::new();
    for &p in &a.layers {
        for scheme in vqe_schemes(a, exp.compare) {
            let circuit = scheme.build(exp.n_sys(), p)?;
            let objective = VqeObjective::new(circuit.clone(), &spec)?;
            let campaign = run_campaign(&objective, &exp.optimizer, exec)?;
            let group = format!("p{p}_{}", scheme.scheme());
            if let Some(w) = w.as_deref_mut() {
                write_campaign(w, &group, &campaign)?;
            }
            let energy = VqeObjective::new(circuit.clone(), &energy_spec)?;
            let evals = campaign
                .trials
                .iter()
                .map(|t| energy.evaluate(&t.param_snapshot.values).map(|e| (e.value, e.success_prob, t.trial)))
                .collect::<vps_core::Result<Vec<_>>>()?;
            let energies: Vec<f64> = evals.iter().map(|e| e.0).collect();
            let best = evals
                .iter()
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .copied()
                .expect("campaign has trials");
            rows.push(VqeRow {
                group,
                layers: p,
                scheme: scheme.scheme().to_string(),
                n_params: circuit.n_params(),
                best: best.0,
                percentile_25: percentile(&energies, 0.25)?,
                exact,
                best_success_prob: best.1,
                best_trial: best.2,
            });
        }
    }
    Ok(rows)
}

fn run_vqe(exp: &Experiment, exec: Execution, w: &mut ArtifactWriter) -> CliResult<()> {
    let rows = vqe_rows(exp, exec, Some(w))?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                exp.model.clone(),
                exp.lattice.clone(),
                r.layers.to_string(),
                r.scheme.clone(),
                r.n_params.to_string(),
                r.best.to_string(),
                r.percentile_25.to_string(),
                opt(r.exact),
                opt(r.relative_error()),
                opt(r.best_success_prob),
            ]
        })
        .collect();
    w.csv(
        TABLE_FILE,
        &[
            "model",
            "lattice",
            "layers",
            "scheme",
            "n_params",
            "best",
            "percentile_25",
            "exact",
            "relative_error",
            "best_success_prob",
        ],
        &table,
    )?;
    let groups: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.group.clone(), r.layers.to_string(), r.scheme.clone(), r.best_trial.to_string()])
        .collect();
    w.csv(GROUPS_FILE, &["group", "layers", "scheme", "best_trial"], &groups)
}

/// Observables reported by the thermal sweep, restricted to the wires that exist.
pub fn correlation_observables(n: usize) -> CliResult<Vec<(String, PauliString)>> {
    let mut out = Vec::new();
    if n >= 3 {
        out.push(("Z1Z2".to_string(), PauliString::new(n, &[(1, Pauli::Z), (2, Pauli::Z)])?));
    }
    if n >= 4 {
        out.push(("X3".to_string(), PauliString::new(n, &[(3, Pauli::X)])?));
    }
    if n >= 8 {
        out.push(("Z0Z7".to_string(), PauliString::new(n, &[(0, Pauli::Z), (7, Pauli::Z)])?));
    }
    Ok(out)
}

/// A prepared state of one thermal scheme at one checkpoint.
#[derive(Debug, Clone)]
pub struct ThermalPoint {
    pub beta: f64,
    pub layers: usize,
    pub scheme: &'static str,
    pub checkpoint: &'static str,
    pub rho: DensityMatrix,
    pub free_energy: f64,
    pub fidelity_gibbs: f64,
    pub fidelity_renyi: f64,
    pub trace_distance: f64,
    /// Reweighted circuit state, for shot-based estimates.
    pub sampler: Option<(vps_core::ansatz::CircuitIR, Vec<f64>, Reweighter)>,
}

impl ThermalPoint {
    pub fn group(&self) -> String {
        format!("b{}_p{}_{}", self.beta, self.layers, self.scheme)
    }
}

struct References {
    gibbs: DensityMatrix,
    renyi: DensityMatrix,
}

fn point(
    refs: &References,
    beta: f64,
    layers: usize,
    scheme: &'static str,
    checkpoint: &'static str,
    rho: DensityMatrix,
    free_energy: f64,
) -> CliResult<ThermalPoint> {
    Ok(ThermalPoint {
        beta,
        layers,
        scheme,
        checkpoint,
        fidelity_gibbs: fidelity(&rho, &refs.gibbs)?,
        fidelity_renyi: fidelity(&rho, &refs.renyi)?,
        trace_distance: trace_distance(&rho, &refs.gibbs)?,
        rho,
        free_energy,
        sampler: None,
    })
}

fn offset_cfg(cfg: &OptimizerConfig, group_index: u64) -> OptimizerConfig {
    let mut c = cfg.clone();
    c.seed = cfg.seed.wrapping_add(GIBBS_SEED_STRIDE * group_index);
    c
}

/// Thermal campaigns for every β and layer count: the reweighted ancilla scheme ("post") and,
/// when configured, the classical-input baseline ("pre"). Each yields an early-stop and a
/// converged point taken from its best trial.
pub fn gibbs_points(exp: &Experiment, exec: Execution, mut w: Option<&mut ArtifactWriter>) -> CliResult<Vec<ThermalPoint>> {
    let a = exp.ansatz.as_ref().ok_or_else(|| CliError::Usage("gibbs task needs an ansatz".into()))?;
    let h = &exp.hamiltonian;
    let n = exp.n_sys();
    let mut points = Vec::new();
    let mut index = 0u64;
    for &beta in &exp.beta_grid {
        let refs = References {
            gibbs: exact_gibbs(h, beta)?,
            renyi: exact_renyi2(h, beta)?.rho,
        };
        let spec = exp.objective.spec(h, Some(beta))?;
        for &p in &a.layers {
            let cfg = offset_cfg(&exp.optimizer, 2 * index);
            let circuit = build_thermal_ansatz(n, p)?;
            let r = exp.reweighter(circuit.ancilla_wires().len())?;
            let objective = ThermalObjective::new(circuit.clone(), &spec, Some(r.clone()))?;
            let campaign = run_campaign(&objective, &cfg, exec)?;
            let best = campaign.best_result();
            let early = best.early_stop(&cfg).unwrap_or(&best.final_params);
            let mut group_points = Vec::new();
            for (label, params) in [("early", early), ("converged", &best.final_params)] {
                let rho = objective.mixed_state(&params.values)?;
                let f = objective.value(&params.values)?;
                let mut pt = point(&refs, beta, p, "post", label, rho, f)?;
                let mut rw = r.clone();
                rw.set_weights(params.neural())?;
                pt.sampler = Some((circuit.clone(), params.circuit().to_vec(), rw));
                group_points.push(pt);
            }
            if let Some(w) = w.as_deref_mut() {
                write_campaign(w, &group_points[0].group(), &campaign)?;
            }
            points.extend(group_points);

            if let Some(b) = &exp.baseline {
                let cfg = offset_cfg(&exp.optimizer, 2 * index + 1);
                let circuit = build_hea(n, b.layers, b.extra_ry)?;
                let mut sizes = vec![n];
                sizes.extend(&exp.reweighting.hidden);
                sizes.push(1);
                let model = Reweighter::new(sizes, false)?;
                let objective = PreprocessingObjective::new(circuit, h.clone(), beta, model)?;
                let campaign = run_campaign(&objective, &cfg, exec)?;
                let best = campaign.best_result();
                let early = best.early_stop(&cfg).unwrap_or(&best.final_params);
                let mut group_points = Vec::new();
                for (label, params) in [("early", early), ("converged", &best.final_params)] {
                    let (rho, f) = objective.state(&params.values)?;
                    group_points.push(point(&refs, beta, b.layers, "pre", label, rho, f)?);
                }
                if let Some(w) = w.as_deref_mut() {
                    write_campaign(w, &group_points[0].group(), &campaign)?;
                }
                points.extend(group_points);
            }
            index += 1;
        }
    }
    Ok(points)
}

fn run_gibbs(exp: &Experiment, exec: Execution, w: &mut ArtifactWriter) -> CliResult<()> {
    let points = gibbs_points(exp, exec, Some(w))?;
    let h = &exp.hamiltonian;
    let n = exp.n_sys();
    let observables = correlation_observables(n)?;
    let mut fid_rows = Vec::new();
    let mut corr_rows = Vec::new();
    let mut gibbs_cache: Vec<(f64, DensityMatrix)> = Vec::new();
    for (k, pt) in points.iter().enumerate() {
        fid_rows.push(vec![
            pt.beta.to_string(),
            pt.layers.to_string(),
            pt.scheme.to_string(),
            pt.checkpoint.to_string(),
            pt.fidelity_gibbs.to_string(),
            pt.fidelity_renyi.to_string(),
            pt.trace_distance.to_string(),
            pt.free_energy.to_string(),
        ]);
        w.density(&format!("rho/{}_{}.bin", pt.group(), pt.checkpoint), &pt.rho)?;
        if !gibbs_cache.iter().any(|(b, _)| *b == pt.beta) {
            gibbs_cache.push((pt.beta, exact_gibbs(h, pt.beta)?));
        }
        let gibbs = &gibbs_cache.iter().find(|(b, _)| *b == pt.beta).expect("cached").1;
        for (j, (name, obs)) in observables.iter().enumerate() {
            let op = PauliSum::from_terms(n, [(1.0, obs.clone())])?;
            let exact = gibbs.expectation(&op)?;
            let model = pt.rho.expectation(&op)?;
            let sampled = match (&pt.sampler, exp.shots) {
                (Some((c, theta, r)), shots) if shots > 0 => {
                    let seed = exp.optimizer.seed.wrapping_add((k * observables.len() + j) as u64);
                    Some(sample_correlation(c, theta, r, obs, shots, seed)?)
                }
                _ => None,
            };
            corr_rows.push(vec![
                pt.beta.to_string(),
                pt.layers.to_string(),
                pt.scheme.to_string(),
                pt.checkpoint.to_string(),
                name.clone(),
                exact.to_string(),
                model.to_string(),
                opt(sampled),
                (model - exact).abs().to_string(),
            ]);
        }
    }
    w.csv(
        FIDELITY_FILE,
        &[
            "beta",
            "layers",
            "scheme",
            "checkpoint",
            "fidelity_gibbs",
            "fidelity_renyi",
            "trace_distance",
            "free_energy",
        ],
        &fid_rows,
    )?;
    w.csv(
        CORRELATIONS_FILE,
        &[
            "beta",
            "layers",
            "scheme",
            "checkpoint",
            "observable",
            "gibbs",
            "state",
            "sampled",
            "abs_error",
        ],
        &corr_rows,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermalReference {
    pub beta: f64,
    pub gibbs_free_energy: f64,
    pub renyi2_free_energy: f64,
    pub renyi2_ebar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub model: String,
    pub lattice: String,
    pub n_qubits: usize,
    pub n_terms: usize,
    pub ground_energy: f64,
    pub thermal: Vec<ThermalReference>,
}

pub fn thermal_reference(h: &PauliSum, beta: f64) -> CliResult<ThermalReference> {
    let gibbs = exact_gibbs(h, beta)?;
    let renyi = exact_renyi2(h, beta)?;
    Ok(ThermalReference {
        beta,
        gibbs_free_energy: gibbs_free_energy_exact(&gibbs, h, beta)?,
        renyi2_free_energy: renyi.free_energy,
        renyi2_ebar: renyi.ebar,
    })
}

pub fn oracle_report(h: &PauliSum, model: &str, lattice: &str, betas: &[f64]) -> CliResult<OracleReport> {
    Ok(OracleReport {
        model: model.to_string(),
        lattice: lattice.to_string(),
        n_qubits: h.n_qubits(),
        n_terms: h.len(),
        ground_energy: ground_energy(h)?,
        thermal: betas.iter().map(|&b| thermal_reference(h, b)).collect::<CliResult<_>>()?,
    })
}

fn run_oracle(exp: &Experiment, w: &mut ArtifactWriter) -> CliResult<()> {
    let report = oracle_report(&exp.hamiltonian, &exp.model, &exp.lattice, &exp.beta_grid)?;
    w.json(ORACLE_FILE, &report)
}

/// Times the first configured campaign with sequential and parallel trial execution.
fn run_bench(exp: &Experiment, w: &mut ArtifactWriter) -> CliResult<()> {
    let a = exp.ansatz.as_ref().ok_or_else(|| CliError::Usage("bench task needs an ansatz".into()))?;
    let circuit = a.build(exp.n_sys(), a.layers[0])?;
    let objective = VqeObjective::new(circuit, &exp.objective.spec(&exp.hamiltonian, None)?)?;
    let mut rows = Vec::new();
    let mut bests = Vec::new();
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        let start = Instant::now();
        let c = run_campaign(&objective, &exp.optimizer, exec)?;
        let secs = start.elapsed().as_secs_f64();
        bests.push(c.best);
        rows.push(vec![
            name.to_string(),
            thread_count(exec).to_string(),
            exp.optimizer.trials.to_string(),
            format!("{secs:.4}"),
            c.best.to_string(),
        ]);
    }
    if bests[0] != bests[1] {
        return Err(CliError::Artifact {
            path: exp.output_dir.join(BENCH_FILE),
            msg: format!("sequential best {} differs from parallel best {}", bests[0], bests[1]),
        });
    }
    w.csv(BENCH_FILE, &["mode", "threads", "trials", "seconds", "best"], &rows)
}
