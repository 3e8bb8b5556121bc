//! Reverse-mode gradients through the simulator and a finite-difference oracle.

use crate::ansatz::CircuitIR;
use crate::error::{Result, VpsError};
use crate::statevec::{Primitive, StateVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Circuit slots (θ followed by φ) come first, then neural weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub n_circuit: usize,
    pub n_neural: usize,
}

impl ParamLayout {
    pub fn circuit_only(n_circuit: usize) -> Self {
        ParamLayout { n_circuit, n_neural: 0 }
    }
    pub fn total(&self) -> usize {
        self.n_circuit + self.n_neural
    }
    pub fn circuit(&self) -> Range<usize> {
        0..self.n_circuit
    }
    pub fn neural(&self) -> Range<usize> {
        self.n_circuit..self.total()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: ParamLayout,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: ParamLayout) -> Result<Self> {
        if values.len() != layout.total() {
            return Err(VpsError::DimensionMismatch(values.len(), layout.total()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(VpsError::InvalidArgument("parameter vector has non-finite entries".into()));
        }
        Ok(ParamVector { values, layout })
    }

    pub fn zeros(layout: ParamLayout) -> Self {
        ParamVector {
            values: vec![0.0; layout.total()],
            layout,
        }
    }

    pub fn circuit(&self) -> &[f64] {
        &self.values[self.layout.circuit()]
    }

    pub fn neural(&self) -> &[f64] {
        &self.values[self.layout.neural()]
    }
}

/// Value, gradient and (for post-selected circuits) the success probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub success_prob: Option<f64>,
}

/// Differentiable scalar objective over a flat parameter vector.
pub trait Objective: Sync {
    fn layout(&self) -> ParamLayout;

    fn evaluate(&self, params: &[f64]) -> Result<Evaluation>;

    fn value(&self, params: &[f64]) -> Result<f64> {
        Ok(self.evaluate(params)?.value)
    }
}

/// Gradient of `objective` at `p`, rejecting non-finite results.
pub fn gradient(objective: &dyn Objective, p: &ParamVector) -> Result<Vec<f64>> {
    if p.layout != objective.layout() {
        return Err(VpsError::DimensionMismatch(p.layout.total(), objective.layout().total()));
    }
    let ev = objective.evaluate(&p.values)?;
    if !ev.value.is_finite() || ev.gradient.iter().any(|g| !g.is_finite()) {
        return Err(VpsError::NonFinite { step: 0 });
    }
    Ok(ev.gradient)
}

/// Central differences with step `step` in every coordinate.
pub fn finite_difference(f: impl Fn(&[f64]) -> Result<f64>, p: &[f64], step: f64) -> Result<Vec<f64>> {
    if step <= 0.0 || !step.is_finite() {
        return Err(VpsError::InvalidArgument(format!("finite-difference step {step} must be positive")));
    }
    let mut x = p.to_vec();
    let mut out = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = x[i];
        x[i] = orig + step;
        let up = f(&x)?;
        x[i] = orig - step;
        let down = f(&x)?;
        x[i] = orig;
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Adjoint pass. `final_state` is the circuit output for `params`, `cotangent` satisfies
/// dL = Re⟨cotangent|dψ⟩. Accumulates ∂L/∂params[slot] into `grad`.
pub fn backward(
    circuit: &CircuitIR,
    params: &[f64],
    final_state: StateVector,
    cotangent: Vec<Complex64>,
    grad: &mut [f64],
) -> Result<()> {
    if cotangent.len() != final_state.dim() {
        return Err(VpsError::DimensionMismatch(cotangent.len(), final_state.dim()));
    }
    if grad.len() < circuit.n_params() {
        return Err(VpsError::DimensionMismatch(grad.len(), circuit.n_params()));
    }
    let mut phi = final_state;
    let mut lam = StateVector::from_raw(cotangent, phi.n_qubits());
    for gate in circuit.gates().iter().rev() {
        for prim in gate.primitives().into_iter().rev() {
            if let Primitive::Rot(g, slot) = prim {
                // d/dθ e^{iθG}φ = iGφ  ⇒  dL/dθ = Re⟨λ|iGφ⟩ = −Im⟨λ|Gφ⟩
                grad[slot] -= phi.generator_overlap(lam.amps(), g).im;
            }
            phi.apply_primitive(prim, params, true);
            lam.apply_primitive(prim, params, true);
        }
    }
    Ok(())
}
