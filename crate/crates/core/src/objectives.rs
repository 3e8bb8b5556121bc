//! Scalar losses: post-selected energy, penalty objectives and the three free energies.

use crate::ansatz::CircuitIR;
use crate::autodiff::{backward, Evaluation, Objective, ParamLayout};
use crate::eigensolver::eigh;
use crate::error::{Result, VpsError};
use crate::hamiltonian::PauliSum;
use crate::linalg::{self, CMatrix};
use crate::neural::Reweighter;
use crate::statevec::{WireSplit, DEGENERATE_PROB};
use crate::thermal::{assemble_parts, DensityMatrix, PSD_TOL};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Filter center of the sigmoid-penalized objective.
pub const DEFAULT_P0: f64 = 0.78;

/// Gradient evaluation refuses projections below this probability.
pub const GRADIENT_DEGENERATE_PROB: f64 = 1e-10;

const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Energy,
    Obj1,
    Obj2,
    Renyi2,
    TruncatedGibbs,
    GibbsExact,
}

impl ObjectiveKind {
    pub fn is_thermal(self) -> bool {
        matches!(self, ObjectiveKind::Renyi2 | ObjectiveKind::TruncatedGibbs | ObjectiveKind::GibbsExact)
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Energy => "energy",
            ObjectiveKind::Obj1 => "obj1",
            ObjectiveKind::Obj2 => "obj2",
            ObjectiveKind::Renyi2 => "renyi2",
            ObjectiveKind::TruncatedGibbs => "truncated_gibbs",
            ObjectiveKind::GibbsExact => "gibbs_exact",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            ObjectiveKind::Energy,
            ObjectiveKind::Obj1,
            ObjectiveKind::Obj2,
            ObjectiveKind::Renyi2,
            ObjectiveKind::TruncatedGibbs,
            ObjectiveKind::GibbsExact,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

/// Penalty weight used when none is configured: a tenth of the Hamiltonian's l1 norm.
pub fn default_lambda(h: &PauliSum) -> f64 {
    0.1 * h.l1_norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub h: PauliSum,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub p0: Option<f64>,
}

impl ObjectiveSpec {
    pub fn energy(h: PauliSum) -> Self {
        ObjectiveSpec {
            kind: ObjectiveKind::Energy,
            h,
            beta: None,
            lambda: None,
            p0: None,
        }
    }

    pub fn obj1(h: PauliSum, lambda: f64) -> Result<Self> {
        let s = ObjectiveSpec {
            kind: ObjectiveKind::Obj1,
            lambda: Some(lambda),
            ..Self::energy(h)
        };
        s.validate()?;
        Ok(s)
    }

    pub fn obj2(h: PauliSum, lambda: f64, p0: f64) -> Result<Self> {
        let s = ObjectiveSpec {
            kind: ObjectiveKind::Obj2,
            lambda: Some(lambda),
            p0: Some(p0),
            ..Self::energy(h)
        };
        s.validate()?;
        Ok(s)
    }

    pub fn thermal(kind: ObjectiveKind, h: PauliSum, beta: f64) -> Result<Self> {
        let s = ObjectiveSpec {
            kind,
            beta: Some(beta),
            ..Self::energy(h)
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(VpsError::InvalidArgument(format!("{}: {m}", self.kind.name())));
        if self.kind.is_thermal() {
            match self.beta {
                Some(b) if b > 0.0 && b.is_finite() => {}
                _ => return bad("beta must be a positive number"),
            }
        }
        if matches!(self.kind, ObjectiveKind::Obj1 | ObjectiveKind::Obj2) {
            match self.lambda {
                Some(l) if l >= 0.0 && l.is_finite() => {}
                _ => return bad("lambda must be a non-negative number"),
            }
        }
        if self.kind == ObjectiveKind::Obj2 {
            match self.p0 {
                Some(p) if p > 0.0 && p < 1.0 => {}
                _ => return bad("p0 must lie in (0, 1)"),
            }
        }
        Ok(())
    }

    fn beta(&self) -> f64 {
        self.beta.unwrap_or(f64::NAN)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn obj1(value: f64, success_prob: f64, lambda: f64) -> f64 {
    value - lambda * success_prob
}

pub fn obj2(value: f64, success_prob: f64, lambda: f64, p0: f64) -> f64 {
    value - lambda * sigmoid(success_prob - p0)
}

/// (⟨H⟩ on the post-selected system state, success probability).
pub fn energy_post_selected(circuit: &CircuitIR, params: &[f64], h: &PauliSum) -> Result<(f64, f64)> {
    let sel = circuit
        .post_selection()
        .ok_or_else(|| VpsError::InvalidCircuit("circuit has no post-selection".into()))?;
    let psi = circuit.simulate(params)?;
    let (sys, prob) = psi.post_select(sel)?;
    Ok((sys.expectation(h)?, prob))
}

fn check_rho(rho: &DensityMatrix, h: &PauliSum, beta: f64) -> Result<()> {
    if rho.n_qubits() != h.n_qubits() {
        return Err(VpsError::QubitMismatch {
            expected: rho.n_qubits(),
            got: h.n_qubits(),
        });
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(VpsError::InvalidArgument(format!("beta {beta} must be positive")));
    }
    Ok(())
}

/// Tr(Hρ) + ln Tr(ρ²) / β
pub fn renyi2_free_energy(rho: &DensityMatrix, h: &PauliSum, beta: f64) -> Result<f64> {
    check_rho(rho, h, beta)?;
    let p2 = rho.purity();
    if p2 <= 0.0 {
        return Err(VpsError::InvalidState(format!("Tr ρ² = {p2}")));
    }
    Ok(rho.expectation(h)? + p2.ln() / beta)
}

/// Second-order entropy (1 − Tr ρ²) + ½(1 − 2 Tr ρ² + Tr ρ³).
pub fn truncated_entropy(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    let m2 = m.matmul(m);
    let t2 = m2.trace().re;
    let t3 = m2.trace_product(m).re;
    1.5 - 2.0 * t2 + 0.5 * t3
}

pub fn truncated_gibbs_free_energy(rho: &DensityMatrix, h: &PauliSum, beta: f64) -> Result<f64> {
    check_rho(rho, h, beta)?;
    Ok(rho.expectation(h)? - truncated_entropy(rho) / beta)
}

/// −Tr ρ ln ρ with 0·ln 0 = 0.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let lams = rho.eigenvalues()?;
    entropy_of(&lams)
}

fn entropy_of(lams: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in lams {
        if l < -PSD_TOL {
            return Err(VpsError::InvalidState(format!("negative eigenvalue {l:e}")));
        }
        if l > 0.0 {
            s -= l * l.ln();
        }
    }
    Ok(s)
}

pub fn gibbs_free_energy_exact(rho: &DensityMatrix, h: &PauliSum, beta: f64) -> Result<f64> {
    check_rho(rho, h, beta)?;
    Ok(rho.expectation(h)? - von_neumann_entropy(rho)? / beta)
}

/// Free energy of `rho` and its derivative G with dF = Re Tr(G dρ).
pub(crate) fn free_energy_and_gradient(
    kind: ObjectiveKind,
    rho: &CMatrix,
    h: &CMatrix,
    beta: f64,
) -> Result<(f64, CMatrix)> {
    let energy = h.trace_product(rho).re;
    match kind {
        ObjectiveKind::Renyi2 => {
            let p2 = rho.trace_product(rho).re;
            if p2 <= 0.0 {
                return Err(VpsError::InvalidState(format!("Tr ρ² = {p2}")));
            }
            let g = h.add(&rho.scale(2.0 / (beta * p2)));
            Ok((energy + p2.ln() / beta, g))
        }
        ObjectiveKind::TruncatedGibbs => {
            let r2 = rho.matmul(rho);
            let t2 = r2.trace().re;
            let t3 = r2.trace_product(rho).re;
            let s2 = 1.5 - 2.0 * t2 + 0.5 * t3;
            let g = h.add(&rho.scale(4.0 / beta).sub(&r2.scale(1.5 / beta)));
            Ok((energy - s2 / beta, g))
        }
        ObjectiveKind::GibbsExact => {
            let mut sym = rho.clone();
            sym.symmetrize();
            let e = eigh(&sym)?;
            let s = entropy_of(&e.eigenvalues)?;
            let logm = e.map(|l| l.max(LOG_FLOOR).ln() + 1.0);
            Ok((energy - s / beta, h.add(&logm.scale(1.0 / beta))))
        }
        other => Err(VpsError::InvalidArgument(format!("{} is not a free energy", other.name()))),
    }
}

/// Energy-type objective over a (possibly post-selected) circuit.
#[derive(Debug, Clone)]
pub struct VqeObjective {
    circuit: CircuitIR,
    kind: ObjectiveKind,
    lambda: f64,
    p0: f64,
    h: PauliSum,
    selection: Option<(WireSplit, Vec<Complex64>)>,
}

impl VqeObjective {
    pub fn new(circuit: CircuitIR, spec: &ObjectiveSpec) -> Result<Self> {
        spec.validate()?;
        if spec.kind.is_thermal() {
            return Err(VpsError::InvalidArgument(format!(
                "{} needs a thermal objective",
                spec.kind.name()
            )));
        }
        let n_sys = circuit.system_wires().len();
        if spec.h.n_qubits() != n_sys {
            return Err(VpsError::QubitMismatch {
                expected: n_sys,
                got: spec.h.n_qubits(),
            });
        }
        let (h, selection) = match circuit.post_selection() {
            Some(sel) => {
                let split = WireSplit::new(circuit.n_qubits(), &sel.wires)?;
                if split.kept != circuit.system_wires() {
                    return Err(VpsError::InvalidCircuit(
                        "post-selection must leave exactly the system wires, in ascending order".into(),
                    ));
                }
                let target = sel.target_vector();
                (spec.h.clone(), Some((split, target)))
            }
            None => (spec.h.embed(circuit.system_wires(), circuit.n_qubits())?, None),
        };
        Ok(VqeObjective {
            circuit,
            kind: spec.kind,
            lambda: spec.lambda.unwrap_or(0.0),
            p0: spec.p0.unwrap_or(DEFAULT_P0),
            h,
            selection,
        })
    }

    pub fn circuit(&self) -> &CircuitIR {
        &self.circuit
    }

    fn combine(&self, energy: f64, prob: f64) -> (f64, f64) {
        match self.kind {
            ObjectiveKind::Obj1 => (obj1(energy, prob, self.lambda), -self.lambda),
            ObjectiveKind::Obj2 => {
                let s = sigmoid(prob - self.p0);
                (obj2(energy, prob, self.lambda, self.p0), -self.lambda * s * (1.0 - s))
            }
            _ => (energy, 0.0),
        }
    }
}

impl Objective for VqeObjective {
    fn layout(&self) -> ParamLayout {
        ParamLayout::circuit_only(self.circuit.n_params())
    }

    fn evaluate(&self, params: &[f64]) -> Result<Evaluation> {
        let psi = self.circuit.simulate(params)?;
        let mut grad = vec![0.0; params.len()];
        match &self.selection {
            Some((split, target)) => {
                let chi = split.project(psi.amps(), target);
                let prob = linalg::norm_sqr(&chi);
                if prob < GRADIENT_DEGENERATE_PROB.max(DEGENERATE_PROB) {
                    return Err(VpsError::DegenerateProjection { prob });
                }
                let hchi = self.h.apply(&chi);
                let energy = linalg::inner(&chi, &hchi).re / prob;
                let (value, dprob) = self.combine(energy, prob);
                let g_chi: Vec<Complex64> = hchi
                    .iter()
                    .zip(&chi)
                    .map(|(hc, c)| (hc - c * energy) * (2.0 / prob) + c * (2.0 * dprob))
                    .collect();
                let cot = split.lift(&g_chi, target);
                backward(&self.circuit, params, psi, cot, &mut grad)?;
                Ok(Evaluation {
                    value,
                    gradient: grad,
                    success_prob: Some(prob),
                })
            }
            None => {
                let hpsi = self.h.apply(psi.amps());
                let energy = linalg::inner(psi.amps(), &hpsi).re;
                let (value, _) = self.combine(energy, 1.0);
                let cot = hpsi.into_iter().map(|z| z * 2.0).collect();
                backward(&self.circuit, params, psi, cot, &mut grad)?;
                Ok(Evaluation {
                    value,
                    gradient: grad,
                    success_prob: None,
                })
            }
        }
    }
}

/// Free-energy objective on the reweighted mixed state of a thermal circuit.
/// Without a reweighter every ancilla outcome gets equal weight.
#[derive(Debug, Clone)]
pub struct ThermalObjective {
    circuit: CircuitIR,
    kind: ObjectiveKind,
    beta: f64,
    h_dense: CMatrix,
    split: WireSplit,
    reweighter: Option<Reweighter>,
}

impl ThermalObjective {
    pub fn new(circuit: CircuitIR, spec: &ObjectiveSpec, reweighter: Option<Reweighter>) -> Result<Self> {
        spec.validate()?;
        if !spec.kind.is_thermal() {
            return Err(VpsError::InvalidArgument(format!(
                "{} is not a free-energy objective",
                spec.kind.name()
            )));
        }
        if circuit.post_selection().is_some() || circuit.ancilla_wires().is_empty() {
            return Err(VpsError::InvalidCircuit(
                "thermal objective needs ancilla wires and no post-selection".into(),
            ));
        }
        let split = WireSplit::new(circuit.n_qubits(), circuit.ancilla_wires())?;
        if split.kept != circuit.system_wires() {
            return Err(VpsError::InvalidCircuit("system wires must be listed in ascending order".into()));
        }
        if spec.h.n_qubits() != split.kept.len() {
            return Err(VpsError::QubitMismatch {
                expected: split.kept.len(),
                got: spec.h.n_qubits(),
            });
        }
        if let Some(r) = &reweighter {
            if r.n_inputs() != split.selected.len() {
                return Err(VpsError::DimensionMismatch(r.n_inputs(), split.selected.len()));
            }
        }
        Ok(ThermalObjective {
            h_dense: spec.h.to_dense()?,
            kind: spec.kind,
            beta: spec.beta(),
            circuit,
            split,
            reweighter,
        })
    }

    pub fn circuit(&self) -> &CircuitIR {
        &self.circuit
    }

    pub fn reweighter(&self) -> Option<&Reweighter> {
        self.reweighter.as_ref()
    }

    fn weights(&self, params: &[f64]) -> Result<Vec<f64>> {
        let layout = self.layout();
        match &self.reweighter {
            Some(r) => r.probabilities_with(&params[layout.neural()]),
            None => Ok(vec![1.0 / self.split.sel_dim() as f64; self.split.sel_dim()]),
        }
    }

    /// Normalized mixed state for `params`.
    pub fn mixed_state(&self, params: &[f64]) -> Result<DensityMatrix> {
        let f = self.weights(params)?;
        let parts = assemble_parts(&self.circuit, &self.split, &params[..self.circuit.n_params()], &f)?;
        DensityMatrix::new(parts.rho)
    }
}

impl Objective for ThermalObjective {
    fn layout(&self) -> ParamLayout {
        ParamLayout {
            n_circuit: self.circuit.n_params(),
            n_neural: self.reweighter.as_ref().map_or(0, Reweighter::n_weights),
        }
    }

    fn evaluate(&self, params: &[f64]) -> Result<Evaluation> {
        let layout = self.layout();
        if params.len() != layout.total() {
            return Err(VpsError::DimensionMismatch(params.len(), layout.total()));
        }
        let f = self.weights(params)?;
        let theta = &params[layout.circuit()];
        let parts = assemble_parts(&self.circuit, &self.split, theta, &f)?;
        let (value, g) = free_energy_and_gradient(self.kind, &parts.rho, &self.h_dense, self.beta)?;

        // ρ = A / Tr A  ⇒  ∂L/∂A = (G − Tr(Gρ)·I) / Tr A
        let shift = g.trace_product(&parts.rho).re;
        let sd = parts.sys_dim;
        let ad = parts.anc_dim;
        let mut ga = g;
        for i in 0..sd {
            ga[(i, i)] -= shift;
        }
        let ga = ga.scale(1.0 / parts.tau);

        let mut gpsi = vec![Complex64::new(0.0, 0.0); sd * ad];
        for i in 0..sd {
            let row = ga.row(i);
            for (j, gij) in row.iter().enumerate() {
                if gij.norm_sqr() == 0.0 {
                    continue;
                }
                let src = &parts.mat[j * ad..(j + 1) * ad];
                let dst = &mut gpsi[i * ad..(i + 1) * ad];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += gij * s;
                }
            }
        }
        let mut dl_df = vec![0.0; ad];
        for i in 0..sd {
            for m in 0..ad {
                dl_df[m] += (parts.mat[i * ad + m].conj() * gpsi[i * ad + m]).re;
            }
        }
        let cot_mat: Vec<Complex64> = gpsi
            .iter()
            .enumerate()
            .map(|(k, z)| z * (2.0 * f[k % ad]))
            .collect();
        let cot = self.split.unshape(&cot_mat);

        let mut grad = vec![0.0; layout.total()];
        backward(&self.circuit, theta, parts.psi, cot, &mut grad[layout.circuit()])?;
        if let Some(r) = &self.reweighter {
            let gw = r.backward_with(&params[layout.neural()], &dl_df)?;
            grad[layout.neural()].copy_from_slice(&gw);
        }
        Ok(Evaluation {
            value,
            gradient: grad,
            success_prob: None,
        })
    }
}
