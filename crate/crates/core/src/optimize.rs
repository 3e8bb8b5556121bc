//! Adam with grouped learning rates, the trial loop and multi-trial campaigns.

use crate::autodiff::{Objective, ParamLayout, ParamVector};
use crate::error::{Result, VpsError};
use crate::parallel::{map_indexed, Execution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub circuit_lr_base: f64,
    pub circuit_lr_halflife: f64,
    pub neural_lr: f64,
    pub circuit_init_sigma: f64,
    pub neural_init_sigma: f64,
    pub max_steps: usize,
    pub early_stop_steps: usize,
    pub converge_eps: f64,
    pub converge_count: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            circuit_lr_base: 0.08,
            circuit_lr_halflife: 1200.0,
            neural_lr: 0.015,
            circuit_init_sigma: 0.02,
            neural_init_sigma: 0.005,
            max_steps: 2600,
            early_stop_steps: 300,
            converge_eps: 1e-7,
            converge_count: 100,
            trials: 50,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("circuit_lr_base", self.circuit_lr_base),
            ("circuit_lr_halflife", self.circuit_lr_halflife),
            ("neural_lr", self.neural_lr),
            ("converge_eps", self.converge_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(VpsError::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("circuit_init_sigma", self.circuit_init_sigma), ("neural_init_sigma", self.neural_init_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(VpsError::InvalidArgument(format!("{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [
            ("max_steps", self.max_steps),
            ("early_stop_steps", self.early_stop_steps),
            ("converge_count", self.converge_count),
            ("trials", self.trials),
        ] {
            if v == 0 {
                return Err(VpsError::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// base · 0.5^(step/halflife)
    pub fn circuit_lr(&self, step: usize) -> f64 {
        self.circuit_lr_base * 0.5f64.powf(step as f64 / self.circuit_lr_halflife)
    }

    pub fn group_rates(&self, step: usize) -> GroupRates {
        GroupRates {
            circuit: self.circuit_lr(step),
            neural: self.neural_lr,
        }
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupRates {
    pub circuit: f64,
    pub neural: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// One update at zero-based `step`. Circuit entries use `rates.circuit`, neural entries `rates.neural`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], step: usize, layout: ParamLayout, rates: GroupRates) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() || layout.total() != self.m.len() {
            return Err(VpsError::DimensionMismatch(grads.len(), self.m.len()));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(VpsError::NonFinite { step });
        }
        let t = step as i32 + 1;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let lr = if i < layout.n_circuit { rates.circuit } else { rates.neural };
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub best_value: f64,
    pub param_snapshot: ParamVector,
    pub final_params: ParamVector,
    pub history: Vec<f64>,
    pub checkpoints: BTreeMap<usize, ParamVector>,
    pub success_prob_history: Option<Vec<f64>>,
    /// Parameter updates applied.
    pub steps: usize,
    pub converged: bool,
    /// Seconds; not serialized.
    #[serde(skip)]
    pub wall_time: f64,
}

impl TrialResult {
    pub fn success_prob_final(&self) -> Option<f64> {
        self.success_prob_history.as_ref().and_then(|h| h.last().copied())
    }

    /// Checkpoint taken at `early_stop_steps`, if any.
    pub fn early_stop(&self, cfg: &OptimizerConfig) -> Option<&ParamVector> {
        self.checkpoints.get(&cfg.early_stop_steps)
    }
}

/// Initial parameters: circuit entries ~ N(0, circuit σ), neural entries ~ N(0, neural σ).
pub fn initial_params(layout: ParamLayout, cfg: &OptimizerConfig, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bad = |e: rand_distr::NormalError| VpsError::InvalidArgument(e.to_string());
    let nc = Normal::new(0.0, cfg.circuit_init_sigma).map_err(bad)?;
    let nn = Normal::new(0.0, cfg.neural_init_sigma).map_err(bad)?;
    let mut p: Vec<f64> = (0..layout.n_circuit).map(|_| nc.sample(&mut rng)).collect();
    p.extend((0..layout.n_neural).map(|_| nn.sample(&mut rng)));
    Ok(p)
}

/// Runs Adam from a seeded random start until `converge_count` successive-value changes fall
/// below `converge_eps` (counted cumulatively) or `max_steps` updates are spent.
pub fn run_trial(objective: &dyn Objective, cfg: &OptimizerConfig, trial: usize, seed: u64) -> Result<TrialResult> {
    cfg.validate()?;
    let layout = objective.layout();
    let start = Instant::now();
    let mut params = initial_params(layout, cfg, seed)?;
    let mut adam = AdamState::new(layout.total());
    let mut history: Vec<f64> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    let mut checkpoints = BTreeMap::new();
    let mut best = (f64::INFINITY, params.clone());
    let mut small = 0usize;
    let mut converged = false;
    let mut step = 0usize;
    loop {
        let ev = objective.evaluate(&params)?;
        if !ev.value.is_finite() || ev.gradient.iter().any(|g| !g.is_finite()) {
            return Err(VpsError::NonFinite { step });
        }
        if let Some(p) = ev.success_prob {
            probs.push(p);
        }
        if let Some(&prev) = history.last() {
            if (ev.value - prev).abs() < cfg.converge_eps {
                small += 1;
            }
        }
        history.push(ev.value);
        if ev.value < best.0 {
            best = (ev.value, params.clone());
        }
        if step == cfg.early_stop_steps {
            checkpoints.insert(step, ParamVector::new(params.clone(), layout)?);
        }
        if small >= cfg.converge_count {
            converged = true;
            break;
        }
        if step == cfg.max_steps {
            break;
        }
        adam.step(&mut params, &ev.gradient, step, layout, cfg.group_rates(step))?;
        step += 1;
    }
    let final_params = ParamVector::new(params, layout)?;
    if step < cfg.early_stop_steps && cfg.max_steps >= cfg.early_stop_steps {
        checkpoints.insert(cfg.early_stop_steps, final_params.clone());
    }
    checkpoints.insert(step, final_params.clone());
    Ok(TrialResult {
        trial,
        seed,
        best_value: best.0,
        param_snapshot: ParamVector::new(best.1, layout)?,
        final_params,
        history,
        checkpoints,
        success_prob_history: (!probs.is_empty()).then_some(probs),
        steps: step,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Linear interpolation at rank q·(n−1) of the sorted values.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(VpsError::InvalidArgument("percentile of an empty set".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(VpsError::InvalidArgument(format!("quantile {q} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = q * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (rank - lo as f64))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignResult {
    pub best: f64,
    pub best_trial: usize,
    pub percentile_25_best: f64,
    pub trials: Vec<TrialResult>,
    /// (trial index, error message)
    pub failures: Vec<(usize, String)>,
}

impl CampaignResult {
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("trial,best_value,steps,success_prob_final,wall_time\n");
        for t in &self.trials {
            let p = t.success_prob_final().map(|p| p.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{:.3}", t.trial, t.best_value, t.steps, p, t.wall_time);
        }
        out
    }

    pub fn best_result(&self) -> &TrialResult {
        self.trials.iter().find(|t| t.trial == self.best_trial).expect("best trial is present")
    }
}

/// `cfg.trials` independent trials seeded `cfg.seed + index`.
pub fn run_campaign(objective: &dyn Objective, cfg: &OptimizerConfig, exec: Execution) -> Result<CampaignResult> {
    cfg.validate()?;
    let outcomes = map_indexed(cfg.trials, exec, |k| run_trial(objective, cfg, k, cfg.trial_seed(k)));
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (k, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok(t) => trials.push(t),
            Err(e) => failures.push((k, e.to_string())),
        }
    }
    if trials.is_empty() {
        return Err(VpsError::AllTrialsFailed(cfg.trials));
    }
    let values: Vec<f64> = trials.iter().map(|t| t.best_value).collect();
    let best_idx = (0..trials.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty");
    Ok(CampaignResult {
        best: values[best_idx],
        best_trial: trials[best_idx].trial,
        percentile_25_best: percentile(&values, 0.25)?,
        trials,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Evaluation;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Value drops by 1 per call for the first 41 calls, then stays flat.
    struct Plateau {
        calls: AtomicUsize,
    }

    impl Objective for Plateau {
        fn layout(&self) -> ParamLayout {
            ParamLayout::circuit_only(1)
        }
        fn evaluate(&self, _: &[f64]) -> Result<Evaluation> {
            let k = self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(Evaluation {
                value: -(k.min(40) as f64),
                gradient: vec![1.0],
                success_prob: None,
            })
        }
    }

    struct Bowl {
        centre: Vec<f64>,
        n_neural: usize,
    }

    impl Objective for Bowl {
        fn layout(&self) -> ParamLayout {
            ParamLayout {
                n_circuit: self.centre.len() - self.n_neural,
                n_neural: self.n_neural,
            }
        }
        fn evaluate(&self, p: &[f64]) -> Result<Evaluation> {
            let d: Vec<f64> = p.iter().zip(&self.centre).map(|(a, b)| a - b).collect();
            Ok(Evaluation {
                value: d.iter().map(|x| x * x).sum(),
                gradient: d.iter().map(|x| 2.0 * x).collect(),
                success_prob: Some(0.5),
            })
        }
    }

    struct Broken;

    impl Objective for Broken {
        fn layout(&self) -> ParamLayout {
            ParamLayout::circuit_only(2)
        }
        fn evaluate(&self, _: &[f64]) -> Result<Evaluation> {
            Ok(Evaluation {
                value: f64::NAN,
                gradient: vec![0.0; 2],
                success_prob: None,
            })
        }
    }

    fn bowl() -> Bowl {
        Bowl {
            centre: vec![0.3, -0.7, 1.1, 0.2],
            n_neural: 1,
        }
    }

    #[test]
    fn learning_rate_schedule() {
        let cfg = OptimizerConfig::default();
        assert_eq!(cfg.circuit_lr(0), 0.08);
        assert!((cfg.circuit_lr(1200) - 0.04).abs() < 1e-15);
        assert_eq!(cfg.group_rates(5000).neural, 0.015);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let layout = ParamLayout { n_circuit: 2, n_neural: 1 };
        let mut adam = AdamState::new(3);
        let mut p = vec![0.5, -1.0, 2.0];
        adam.step(&mut p, &[0.0; 3], 0, layout, OptimizerConfig::default().group_rates(0)).unwrap();
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
        assert!(matches!(
            adam.step(&mut p, &[f64::NAN, 0.0, 0.0], 1, layout, OptimizerConfig::default().group_rates(1)),
            Err(VpsError::NonFinite { step: 1 })
        ));
    }

    #[test]
    fn groups_get_separate_rates() {
        // The first bias-corrected Adam step moves each entry by lr·sign(g).
        let layout = ParamLayout { n_circuit: 1, n_neural: 1 };
        let cfg = OptimizerConfig::default();
        let mut adam = AdamState::new(2);
        let mut p = vec![0.0, 0.0];
        adam.step(&mut p, &[3.0, 3.0], 2400, layout, cfg.group_rates(2400)).unwrap();
        let mut fresh = AdamState::new(2);
        let mut q = vec![0.0, 0.0];
        fresh.step(&mut q, &[3.0, 3.0], 0, layout, cfg.group_rates(2400)).unwrap();
        assert!((q[0] + 0.02).abs() < 1e-9);
        assert!((q[1] + 0.015).abs() < 1e-9);
        assert!(p[1] != p[0]);
    }

    #[test]
    fn plateau_stops_at_step_140() {
        let obj = Plateau { calls: AtomicUsize::new(0) };
        let cfg = OptimizerConfig {
            max_steps: 10_000,
            ..Default::default()
        };
        let r = run_trial(&obj, &cfg, 0, 1).unwrap();
        assert!(r.converged);
        assert_eq!(r.steps, 140);
        assert_eq!(r.history.len(), 141);
        assert_eq!(r.best_value, -40.0);
        assert!(r.checkpoints.contains_key(&140));
        assert!(r.checkpoints.contains_key(&300));
    }

    #[test]
    fn bowl_converges() {
        let cfg = OptimizerConfig {
            circuit_lr_base: 0.05,
            neural_lr: 0.05,
            max_steps: 5000,
            converge_eps: 1e-14,
            ..Default::default()
        };
        let b = bowl();
        let r = run_trial(&b, &cfg, 0, 9).unwrap();
        assert!(r.best_value < 1e-10, "{}", r.best_value);
        for (x, c) in r.param_snapshot.values.iter().zip(&b.centre) {
            assert!((x - c).abs() < 1e-5);
        }
        assert_eq!(r.best_value, r.history.iter().copied().fold(f64::INFINITY, f64::min));
        assert!(r.early_stop(&cfg).is_some());
        assert_eq!(r.success_prob_final(), Some(0.5));
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = OptimizerConfig {
            max_steps: 400,
            ..Default::default()
        };
        let a = run_trial(&bowl(), &cfg, 0, 17).unwrap();
        let b = run_trial(&bowl(), &cfg, 0, 17).unwrap();
        assert_eq!(a.best_value.to_bits(), b.best_value.to_bits());
        assert_eq!(a.history, b.history);
        let c = run_trial(&bowl(), &cfg, 0, 18).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn percentile_rule() {
        assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 0.25).unwrap(), 1.75);
        assert_eq!(percentile(&[2.5], 0.25).unwrap(), 2.5);
        assert!(percentile(&[], 0.25).is_err());
    }

    #[test]
    fn campaign_aggregation() {
        let cfg = OptimizerConfig {
            max_steps: 50,
            trials: 6,
            seed: 100,
            ..Default::default()
        };
        let seq = run_campaign(&bowl(), &cfg, Execution::Sequential).unwrap();
        let par = run_campaign(&bowl(), &cfg, Execution::Parallel).unwrap();
        assert_eq!(seq.trials.len(), 6);
        assert_eq!(seq.best.to_bits(), par.best.to_bits());
        assert_eq!(seq.percentile_25_best.to_bits(), par.percentile_25_best.to_bits());
        assert_eq!(seq.trials[3].seed, 103);
        let csv = seq.summary_csv();
        assert!(csv.starts_with("trial,best_value,steps,success_prob_final,wall_time\n"));
        assert_eq!(csv.lines().count(), 7);

        let one = run_campaign(&bowl(), &OptimizerConfig { trials: 1, max_steps: 20, ..Default::default() }, Execution::Sequential).unwrap();
        assert_eq!(one.best, one.percentile_25_best);
    }

    #[test]
    fn failing_trials() {
        let cfg = OptimizerConfig {
            trials: 3,
            ..Default::default()
        };
        assert!(matches!(run_trial(&Broken, &cfg, 0, 0), Err(VpsError::NonFinite { step: 0 })));
        assert!(matches!(run_campaign(&Broken, &cfg, Execution::Sequential), Err(VpsError::AllTrialsFailed(3))));
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        assert!(OptimizerConfig { neural_lr: 0.0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { trials: 0, ..Default::default() }.validate().is_err());
    }
}
