//! Experiment configuration: TOML (sections with `key = value`) or JSON with the same shape.
//! A run manifest is also accepted and replays the configuration embedded in it.

use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use vps_core::ansatz::{build_hea, build_hea_postselect, build_su2_ansatz, build_thermal_ansatz, build_u1_ansatz, CircuitIR};
use vps_core::eigensolver::MAX_ED_QUBITS;
use vps_core::hamiltonian::{build_heisenberg, build_tfim, parse_pauli_file, PauliSum};
use vps_core::neural::{Reweighter, DEFAULT_HIDDEN};
use vps_core::objectives::{default_lambda, ObjectiveKind, ObjectiveSpec, DEFAULT_P0};
use vps_core::optimize::OptimizerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: String,
    pub output_dir: PathBuf,
    pub hamiltonian: HamiltonianConfig,
    #[serde(default)]
    pub ansatz: Option<AnsatzConfig>,
    #[serde(default)]
    pub objective: Option<ObjectiveConfig>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub beta_grid: Vec<f64>,
    #[serde(default)]
    pub reweighting: ReweightConfig,
    #[serde(default)]
    pub baseline: Option<BaselineConfig>,
    /// Also run the reference variant of the ansatz (see [`AnsatzSpec::reference`]).
    #[serde(default)]
    pub compare: bool,
    /// Shots for the sampled correlation estimates of the gibbs task; 0 disables them.
    #[serde(default)]
    pub shots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    /// tfim | heisenberg | file
    pub model: String,
    #[serde(default)]
    pub rows: Option<usize>,
    #[serde(default)]
    pub cols: Option<usize>,
    #[serde(default)]
    pub periodic: bool,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Layers {
    One(usize),
    Many(Vec<usize>),
}

impl Layers {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            Layers::One(p) => vec![*p],
            Layers::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    /// hea | hea_postselect | su2 | u1 | thermal
    pub builder: String,
    pub layers: Layers,
    #[serde(default)]
    pub extra_ry: bool,
    #[serde(default = "yes")]
    pub symmetric: bool,
    #[serde(default)]
    pub electrons: Option<usize>,
    #[serde(default = "yes")]
    pub ancilla: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    /// energy | obj1 | obj2 | renyi2 | truncated_gibbs | gibbs_exact
    pub kind: String,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub p0: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReweightConfig {
    #[serde(default = "yes")]
    pub bounded: bool,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub bound: Option<f64>,
}

fn default_hidden() -> Vec<usize> {
    DEFAULT_HIDDEN.to_vec()
}

impl Default for ReweightConfig {
    fn default() -> Self {
        ReweightConfig {
            bounded: true,
            hidden: default_hidden(),
            bound: None,
        }
    }
}

/// Classical-input comparison scheme for the gibbs task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub layers: usize,
    #[serde(default = "yes")]
    pub extra_ry: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Vqe,
    Gibbs,
    Oracle,
    Bench,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Vqe => "vqe",
            Task::Gibbs => "gibbs",
            Task::Oracle => "oracle",
            Task::Bench => "bench",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builder {
    Hea,
    HeaPostselect,
    Su2,
    U1,
    Thermal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzSpec {
    pub builder: Builder,
    pub layers: Vec<usize>,
    pub extra_ry: bool,
    pub symmetric: bool,
    pub electrons: usize,
    pub ancilla: bool,
}

impl AnsatzSpec {
    pub fn build(&self, n_sys: usize, p: usize) -> vps_core::Result<CircuitIR> {
        match self.builder {
            Builder::Hea => build_hea(n_sys, p, self.extra_ry),
            Builder::HeaPostselect => build_hea_postselect(n_sys, p),
            Builder::Su2 => build_su2_ansatz(n_sys, p, self.symmetric),
            Builder::U1 => build_u1_ansatz(n_sys, p, self.electrons, self.ancilla),
            Builder::Thermal => build_thermal_ansatz(n_sys, p),
        }
    }

    /// Scheme label used in artifact names.
    pub fn scheme(&self) -> &'static str {
        match (self.builder, self.symmetric, self.ancilla) {
            (Builder::Hea, ..) => "plain",
            (Builder::HeaPostselect, ..) => "postselect",
            (Builder::Su2, true, _) => "singlet",
            (Builder::Su2, false, _) => "broken",
            (Builder::U1, _, true) => "u1_ancilla",
            (Builder::U1, _, false) => "u1_plain",
            (Builder::Thermal, ..) => "post",
        }
    }

    /// The variant compared against when `compare = true`: plain HEA for the all-to-one layout,
    /// the |↓↓⟩ selection for the singlet ansatz and the ancilla-free circuit for U(1).
    pub fn reference(&self) -> Option<AnsatzSpec> {
        let mut r = self.clone();
        match self.builder {
            Builder::HeaPostselect => {
                r.builder = Builder::Hea;
                r.extra_ry = false;
            }
            Builder::Su2 => r.symmetric = !self.symmetric,
            Builder::U1 => r.ancilla = !self.ancilla,
            Builder::Hea | Builder::Thermal => return None,
        }
        Some(r)
    }
}

/// Validated objective parameters; `h` is attached per run.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSettings {
    pub kind: ObjectiveKind,
    pub lambda: Option<f64>,
    pub p0: f64,
    pub beta: Option<f64>,
}

impl ObjectiveSettings {
    pub fn spec(&self, h: &PauliSum, beta: Option<f64>) -> vps_core::Result<ObjectiveSpec> {
        let lambda = self.lambda.unwrap_or_else(|| default_lambda(h));
        match self.kind {
            ObjectiveKind::Energy => Ok(ObjectiveSpec::energy(h.clone())),
            ObjectiveKind::Obj1 => ObjectiveSpec::obj1(h.clone(), lambda),
            ObjectiveKind::Obj2 => ObjectiveSpec::obj2(h.clone(), lambda, self.p0),
            k => ObjectiveSpec::thermal(k, h.clone(), beta.or(self.beta).unwrap_or(1.0)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub task: Task,
    pub output_dir: PathBuf,
    pub hamiltonian: PauliSum,
    pub model: String,
    /// `RxC pbc|obc`, or the Pauli file path.
    pub lattice: String,
    pub ansatz: Option<AnsatzSpec>,
    pub objective: ObjectiveSettings,
    pub optimizer: OptimizerConfig,
    pub beta_grid: Vec<f64>,
    pub reweighting: ReweightConfig,
    pub baseline: Option<BaselineConfig>,
    pub compare: bool,
    pub shots: usize,
}

impl Experiment {
    pub fn n_sys(&self) -> usize {
        self.hamiltonian.n_qubits()
    }

    pub fn reweighter(&self, n_inputs: usize) -> vps_core::Result<Reweighter> {
        let mut sizes = vec![n_inputs];
        sizes.extend(&self.reweighting.hidden);
        sizes.push(1);
        let r = Reweighter::new(sizes, self.reweighting.bounded)?;
        match self.reweighting.bound {
            Some(b) => r.with_bound(b),
            None => Ok(r),
        }
    }
}

/// Raw configuration plus the text it was read from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub text: String,
    pub format: ConfigFormat,
    pub path: PathBuf,
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfigFormat {
    Toml,
    Json,
}

fn cfg_err(path: &Path, field: &str, msg: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_path_buf(),
        field: field.to_string(),
        msg: msg.into(),
    }
}

pub fn parse_config(text: &str, format: ConfigFormat, path: &Path) -> CliResult<ExperimentConfig> {
    match format {
        ConfigFormat::Toml => toml::from_str(text).map_err(|e| cfg_err(path, "<parse>", e.message().to_string())),
        ConfigFormat::Json => serde_json::from_str(text).map_err(|e| cfg_err(path, "<parse>", e.to_string())),
    }
}

/// Reads a config file, or the configuration recorded in a run manifest.
pub fn load(path: &Path) -> CliResult<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => cfg_err(path, "<file>", "config file not found"),
        _ => CliError::io(path, e),
    })?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if is_json {
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| cfg_err(path, "<parse>", e.to_string()))?;
        if value.get("config_text").is_some() {
            let m: crate::manifest::Manifest =
                serde_json::from_value(value).map_err(|e| cfg_err(path, "<manifest>", e.to_string()))?;
            let config = parse_config(&m.config_text, m.config_format, path)?;
            return Ok(LoadedConfig {
                config,
                text: m.config_text,
                format: m.config_format,
                path: path.to_path_buf(),
                base_dir: m.base_dir,
            });
        }
    }
    let format = if is_json { ConfigFormat::Json } else { ConfigFormat::Toml };
    let config = parse_config(&text, format, path)?;
    Ok(LoadedConfig {
        config,
        text,
        format,
        path: path.to_path_buf(),
        base_dir,
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn positive_finite(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

/// Checks every field and builds the Hamiltonian; errors name the offending field.
pub fn validate(loaded: &LoadedConfig) -> CliResult<Experiment> {
    let c = &loaded.config;
    let path = loaded.path.as_path();
    let err = |field: &str, msg: String| cfg_err(path, field, msg);

    let task = match c.task.as_str() {
        "vqe" => Task::Vqe,
        "gibbs" => Task::Gibbs,
        "oracle" => Task::Oracle,
        "bench" => Task::Bench,
        other => return Err(err("task", format!("unknown task `{other}` (expected vqe, gibbs, oracle or bench)"))),
    };
    if c.output_dir.as_os_str().is_empty() {
        return Err(err("output_dir", "must not be empty".into()));
    }

    let hc = &c.hamiltonian;
    let dims = |field_rows: &str| -> CliResult<(usize, usize)> {
        let rows = hc.rows.ok_or_else(|| err(field_rows, "required for lattice models".into()))?;
        let cols = hc.cols.ok_or_else(|| err("hamiltonian.cols", "required for lattice models".into()))?;
        if rows * cols < 2 {
            return Err(err("hamiltonian.rows", format!("{rows}x{cols} lattice has fewer than 2 sites")));
        }
        Ok((rows, cols))
    };
    let bc = if hc.periodic { "pbc" } else { "obc" };
    let (hamiltonian, (model, lattice)) = match hc.model.as_str() {
        "tfim" => {
            let (r, k) = dims("hamiltonian.rows")?;
            let h = build_tfim(r, k, hc.periodic, r == 1 || k == 1).map_err(|e| err("hamiltonian", e.to_string()))?;
            (h, ("tfim".to_string(), format!("{r}x{k} {bc}")))
        }
        "heisenberg" => {
            let (r, k) = dims("hamiltonian.rows")?;
            let h = build_heisenberg(r, k, hc.periodic).map_err(|e| err("hamiltonian", e.to_string()))?;
            (h, ("heisenberg".to_string(), format!("{r}x{k} {bc}")))
        }
        "file" => {
            let p = hc.path.as_ref().ok_or_else(|| err("hamiltonian.path", "required when model = \"file\"".into()))?;
            let full = resolve(&loaded.base_dir, p);
            let text = std::fs::read_to_string(&full).map_err(|e| err("hamiltonian.path", format!("{}: {e}", full.display())))?;
            let h = parse_pauli_file(&text).map_err(|e| err("hamiltonian.path", e.to_string()))?;
            (h, ("file".to_string(), p.display().to_string()))
        }
        other => return Err(err("hamiltonian.model", format!("unknown model `{other}` (expected tfim, heisenberg or file)"))),
    };

    let ansatz = match &c.ansatz {
        None => None,
        Some(a) => {
            let builder = match a.builder.as_str() {
                "hea" => Builder::Hea,
                "hea_postselect" => Builder::HeaPostselect,
                "su2" => Builder::Su2,
                "u1" => Builder::U1,
                "thermal" => Builder::Thermal,
                other => {
                    return Err(err(
                        "ansatz.builder",
                        format!("unknown builder `{other}` (expected hea, hea_postselect, su2, u1 or thermal)"),
                    ))
                }
            };
            let layers = a.layers.to_vec();
            if layers.is_empty() || layers.contains(&0) {
                return Err(err("ansatz.layers", "layer counts must be at least 1".into()));
            }
            let electrons = match (builder, a.electrons) {
                (Builder::U1, None) => return Err(err("ansatz.electrons", "required for the u1 builder".into())),
                (_, e) => e.unwrap_or(0),
            };
            let spec = AnsatzSpec {
                builder,
                layers,
                extra_ry: a.extra_ry,
                symmetric: a.symmetric,
                electrons,
                ancilla: a.ancilla,
            };
            for &p in &spec.layers {
                spec.build(hamiltonian.n_qubits(), p).map_err(|e| err("ansatz", e.to_string()))?;
            }
            Some(spec)
        }
    };

    let default_kind = if task == Task::Gibbs { "renyi2" } else { "energy" };
    let oc = c.objective.clone().unwrap_or(ObjectiveConfig {
        kind: default_kind.into(),
        lambda: None,
        p0: None,
        beta: None,
    });
    let kind = ObjectiveKind::from_name(&oc.kind)
        .ok_or_else(|| err("objective.kind", format!("unknown objective `{}`", oc.kind)))?;
    if let Some(l) = oc.lambda {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(err("objective.lambda", format!("must be non-negative, got {l}")));
        }
    }
    let p0 = oc.p0.unwrap_or(DEFAULT_P0);
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(err("objective.p0", format!("must lie in (0, 1), got {p0}")));
    }
    if let Some(b) = oc.beta {
        if !positive_finite(b) {
            return Err(err("objective.beta", format!("must be positive, got {b}")));
        }
    }
    for (i, &b) in c.beta_grid.iter().enumerate() {
        if !positive_finite(b) {
            return Err(err(&format!("beta_grid[{i}]"), format!("must be positive, got {b}")));
        }
    }
    let objective = ObjectiveSettings {
        kind,
        lambda: oc.lambda,
        p0,
        beta: oc.beta,
    };
    c.optimizer.validate().map_err(|e| err("optimizer", e.to_string()))?;
    if c.reweighting.hidden.contains(&0) {
        return Err(err("reweighting.hidden", "hidden layer widths must be at least 1".into()));
    }
    if let Some(b) = c.reweighting.bound {
        if !positive_finite(b) {
            return Err(err("reweighting.bound", format!("must be positive, got {b}")));
        }
    }

    match task {
        Task::Vqe | Task::Bench => {
            let a = ansatz.as_ref().ok_or_else(|| err("ansatz", "required for this task".into()))?;
            if a.builder == Builder::Thermal {
                return Err(err("ansatz.builder", "the thermal builder belongs to the gibbs task".into()));
            }
            if kind.is_thermal() {
                return Err(err("objective.kind", format!("`{}` needs the gibbs task", kind.name())));
            }
        }
        Task::Gibbs => {
            let a = ansatz.as_ref().ok_or_else(|| err("ansatz", "required for this task".into()))?;
            if a.builder != Builder::Thermal {
                return Err(err("ansatz.builder", "the gibbs task uses the thermal builder".into()));
            }
            if !kind.is_thermal() {
                return Err(err("objective.kind", "the gibbs task needs renyi2, truncated_gibbs or gibbs_exact".into()));
            }
            if c.beta_grid.is_empty() && oc.beta.is_none() {
                return Err(err("beta_grid", "give beta_grid or objective.beta".into()));
            }
            if hamiltonian.n_qubits() > MAX_ED_QUBITS {
                return Err(err("hamiltonian", format!("exact thermal references need at most {MAX_ED_QUBITS} qubits")));
            }
            if let Some(b) = &c.baseline {
                if b.layers == 0 {
                    return Err(err("baseline.layers", "must be at least 1".into()));
                }
            }
        }
        Task::Oracle => {
            if hamiltonian.n_qubits() > MAX_ED_QUBITS {
                return Err(err("hamiltonian", format!("exact diagonalization needs at most {MAX_ED_QUBITS} qubits")));
            }
        }
    }

    let beta_grid = if c.beta_grid.is_empty() {
        oc.beta.into_iter().collect()
    } else {
        c.beta_grid.clone()
    };
    Ok(Experiment {
        task,
        output_dir: resolve(&loaded.base_dir, &c.output_dir),
        hamiltonian,
        model,
        lattice,
        ansatz,
        objective,
        optimizer: c.optimizer.clone(),
        beta_grid,
        reweighting: c.reweighting.clone(),
        baseline: c.baseline.clone(),
        compare: c.compare,
        shots: c.shots,
    })
}
