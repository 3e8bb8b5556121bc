//! Mixed states: assembly from reweighted circuits, distances, exact thermal oracles and the
//! classical-input baseline.

use crate::ansatz::{basis_rotation_suffix, CircuitIR};
use crate::autodiff::{backward, Evaluation, Objective, ParamLayout};
use crate::eigensolver::{eigh, eigvalsh};
use crate::error::{Result, VpsError};
use crate::hamiltonian::{PauliString, PauliSum};
use crate::linalg::{self, CMatrix, C0};
use crate::neural::{classical_entropy, reweight_all, Reweighter};
use crate::statevec::{Bitstring, StateVector, WireSplit};
use num_complex::Complex64;
use std::path::Path;

/// Slack for trace, Hermiticity and eigenvalue checks.
pub const PSD_TOL: f64 = 1e-8;
const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
    n_qubits: usize,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(mut mat: CMatrix) -> Result<Self> {
        let dim = mat.dim();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(VpsError::InvalidState(format!("dimension {dim} is not a power of two")));
        }
        let defect = mat.hermiticity_defect();
        if !(defect <= HERMITIAN_TOL) {
            return Err(VpsError::NotHermitian(defect));
        }
        mat.symmetrize();
        let tr = mat.trace().re;
        if (tr - 1.0).abs() > PSD_TOL {
            return Err(VpsError::InvalidState(format!("trace {tr} != 1")));
        }
        let lo = eigvalsh(&mat)?[0];
        if lo < -PSD_TOL {
            return Err(VpsError::InvalidState(format!("negative eigenvalue {lo:e}")));
        }
        Ok(DensityMatrix {
            n_qubits: dim.trailing_zeros() as usize,
            mat,
        })
    }

    pub fn from_pure(amps: &[Complex64]) -> Result<Self> {
        let norm = linalg::norm_sqr(amps);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(VpsError::InvalidState(format!("state norm² {norm} != 1")));
        }
        Self::new(CMatrix::outer(amps))
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        Self::new(CMatrix::identity(dim).scale(1.0 / dim as f64))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    pub fn dim(&self) -> usize {
        self.mat.dim()
    }
    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }
    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Tr ρ²
    pub fn purity(&self) -> f64 {
        self.mat.trace_product(&self.mat).re
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigvalsh(&self.mat)
    }

    /// Tr(Hρ); observables on fewer qubits act on the leading wires.
    pub fn expectation(&self, h: &PauliSum) -> Result<f64> {
        let padded;
        let h = match h.n_qubits().cmp(&self.n_qubits) {
            std::cmp::Ordering::Equal => h,
            std::cmp::Ordering::Less => {
                padded = h.pad_to(self.n_qubits)?;
                &padded
            }
            std::cmp::Ordering::Greater => {
                return Err(VpsError::QubitMismatch {
                    expected: self.n_qubits,
                    got: h.n_qubits(),
                })
            }
        };
        let mut acc = C0;
        for (c, s) in h.terms() {
            let m = s.masks();
            let mut t = C0;
            for b in 0..self.dim() {
                t += self.mat[(b, b ^ m.flip)] * m.sign_of(b);
            }
            acc += t * m.global_phase() * *c;
        }
        Ok(acc.re)
    }

    /// Little-endian u64 dimension, then row-major (re, im) f64 pairs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 16 * self.dim() * self.dim());
        out.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        for z in self.mat.as_slice() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| VpsError::InvalidState(format!("density checkpoint: {m}"));
        let head: [u8; 8] = bytes.get(..8).ok_or_else(|| bad("truncated header"))?.try_into().unwrap();
        let dim = u64::from_le_bytes(head) as usize;
        if dim > crate::eigensolver::MAX_DIM {
            return Err(bad("dimension too large"));
        }
        let body = &bytes[8..];
        if body.len() != 16 * dim * dim {
            return Err(bad("payload length does not match dimension"));
        }
        let data = body
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Self::new(CMatrix::from_vec(dim, data))
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Intermediate products of mixed-state assembly.
pub(crate) struct MixedParts {
    pub psi: StateVector,
    /// System × ancilla amplitude matrix, row-major.
    pub mat: Vec<Complex64>,
    pub sys_dim: usize,
    pub anc_dim: usize,
    /// Σ_m f_m ψ_m ψ_m† / τ
    pub rho: CMatrix,
    pub tau: f64,
}

pub(crate) fn assemble_parts(circuit: &CircuitIR, split: &WireSplit, theta: &[f64], f: &[f64]) -> Result<MixedParts> {
    let psi = circuit.simulate(theta)?;
    let sd = split.kept_dim();
    let ad = split.sel_dim();
    if f.len() != ad {
        return Err(VpsError::DimensionMismatch(f.len(), ad));
    }
    let mat = split.reshape(psi.amps());
    let mut a = CMatrix::zeros(sd);
    for i in 0..sd {
        let ri = &mat[i * ad..(i + 1) * ad];
        for j in i..sd {
            let rj = &mat[j * ad..(j + 1) * ad];
            let mut z = C0;
            for m in 0..ad {
                z += ri[m] * rj[m].conj() * f[m];
            }
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    let tau = a.trace().re;
    if !(tau > 0.0) {
        return Err(VpsError::InvalidState(format!("mixed-state trace {tau}")));
    }
    Ok(MixedParts {
        psi,
        mat,
        sys_dim: sd,
        anc_dim: ad,
        rho: a.scale(1.0 / tau),
        tau,
    })
}

fn thermal_split(circuit: &CircuitIR) -> Result<WireSplit> {
    if circuit.ancilla_wires().is_empty() || circuit.post_selection().is_some() {
        return Err(VpsError::InvalidCircuit(
            "mixed-state assembly needs ancilla wires and no post-selection".into(),
        ));
    }
    let split = WireSplit::new(circuit.n_qubits(), circuit.ancilla_wires())?;
    if split.kept != circuit.system_wires() {
        return Err(VpsError::InvalidCircuit("system wires must be listed in ascending order".into()));
    }
    Ok(split)
}

/// ρ ∝ Σ_m f(m) ψ_m ψ_m†, normalized to unit trace.
pub fn assemble_mixed_state(circuit: &CircuitIR, theta: &[f64], r: &Reweighter) -> Result<DensityMatrix> {
    let split = thermal_split(circuit)?;
    if r.n_inputs() != split.selected.len() {
        return Err(VpsError::DimensionMismatch(r.n_inputs(), split.selected.len()));
    }
    let f = reweight_all(r)?;
    DensityMatrix::new(assemble_parts(circuit, &split, theta, &f)?.rho)
}

/// Weighted sample mean ⟨f(a)·C(s)⟩ / ⟨f(a)⟩. Each sample covers the full register; `observable`
/// is indexed by position in `system_wires` and every non-identity factor counts as ±1 on the
/// measured bit (the rotation into its eigenbasis happened before sampling).
pub fn reweighted_correlation(
    samples: &[Bitstring],
    system_wires: &[usize],
    ancilla_wires: &[usize],
    r: &Reweighter,
    observable: &PauliString,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(VpsError::InvalidArgument("no samples".into()));
    }
    if r.n_inputs() != ancilla_wires.len() {
        return Err(VpsError::DimensionMismatch(r.n_inputs(), ancilla_wires.len()));
    }
    let wires: Vec<usize> = observable
        .ops()
        .iter()
        .map(|&(q, _)| {
            system_wires.get(q).copied().ok_or(VpsError::WireOutOfRange {
                wire: q,
                n_qubits: system_wires.len(),
            })
        })
        .collect::<Result<_>>()?;
    let f = reweight_all(r)?;
    let (mut num, mut den) = (0.0, 0.0);
    for s in samples {
        let w = f[s.gather(ancilla_wires)];
        let parity = wires.iter().filter(|&&q| s.bit(q)).count() % 2;
        let c = if parity == 0 { 1.0 } else { -1.0 };
        num += w * c;
        den += w;
    }
    if den <= 0.0 {
        return Err(VpsError::InvalidArgument("reweighting sums to zero".into()));
    }
    Ok(num / den)
}

/// Shot-based estimate of Tr(ρ·observable): rotates into the observable's eigenbasis,
/// samples `shots` bitstrings and applies [`reweighted_correlation`].
pub fn sample_correlation(
    circuit: &CircuitIR,
    theta: &[f64],
    r: &Reweighter,
    observable: &PauliString,
    shots: usize,
    seed: u64,
) -> Result<f64> {
    thermal_split(circuit)?;
    let (suffix, angles) = basis_rotation_suffix(observable, circuit.system_wires(), circuit.n_params())?;
    let rotated = circuit.with_suffix(&suffix, angles.len())?;
    let mut params = theta[..circuit.n_params()].to_vec();
    params.extend(angles);
    let psi = rotated.simulate(&params)?;
    let samples = psi.sample_bitstrings(shots, seed)?;
    reweighted_correlation(&samples, circuit.system_wires(), circuit.ancilla_wires(), r, observable)
}

fn check_pair(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(VpsError::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

/// Eigenvalues at or below round-off relative to the largest are zeroed.
fn clamp_floor(eigs: &[f64]) -> f64 {
    let top = eigs.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    64.0 * f64::EPSILON * top.max(f64::MIN_POSITIVE) * eigs.len() as f64
}

/// √M for a positive semidefinite Hermitian M, clamping negative eigenvalues to zero.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let e = eigh(m)?;
    let floor = clamp_floor(&e.eigenvalues);
    Ok(e.map(|l| if l > floor { l.sqrt() } else { 0.0 }))
}

/// (Tr √(√σ ρ √σ))²
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_pair(rho, sigma)?;
    let s = psd_sqrt(sigma.matrix())?;
    let mut inner = s.matmul(rho.matrix()).matmul(&s);
    inner.symmetrize();
    let eigs = eigvalsh(&inner)?;
    let floor = clamp_floor(&eigs);
    let root: f64 = eigs.iter().filter(|&&l| l > floor).map(|l| l.sqrt()).sum();
    Ok(root * root)
}

/// ½ Σ |eig(ρ − σ)|
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_pair(rho, sigma)?;
    let mut d = rho.matrix().sub(sigma.matrix());
    d.symmetrize();
    Ok(0.5 * eigvalsh(&d)?.iter().map(|l| l.abs()).sum::<f64>())
}

/// e^{−βH}/Z
pub fn exact_gibbs(h: &PauliSum, beta: f64) -> Result<DensityMatrix> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(VpsError::InvalidArgument(format!("beta {beta} must be positive")));
    }
    let e = eigh(&h.to_dense()?)?;
    let e0 = e.eigenvalues[0];
    let w: Vec<f64> = e.eigenvalues.iter().map(|&x| (-beta * (x - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    let p: Vec<f64> = w.into_iter().map(|x| x / z).collect();
    DensityMatrix::new(e.with_weights(&p))
}

#[derive(Debug, Clone)]
pub struct ThermalOracleResult {
    pub rho: DensityMatrix,
    pub ebar: Option<f64>,
    /// Weights over eigenstates in ascending-energy order.
    pub distribution: Vec<f64>,
    pub energies: Vec<f64>,
    pub free_energy: f64,
}

/// p_i ∝ max(0, 1 − β/2·(E_i − Ē)); `None` when every weight vanishes.
pub fn renyi2_distribution(energies: &[f64], beta: f64, ebar: f64) -> Option<Vec<f64>> {
    let raw: Vec<f64> = energies.iter().map(|&e| (1.0 - 0.5 * beta * (e - ebar)).max(0.0)).collect();
    let z: f64 = raw.iter().sum();
    (z > 0.0).then(|| raw.into_iter().map(|x| x / z).collect())
}

fn renyi2_of_distribution(energies: &[f64], p: &[f64], beta: f64) -> f64 {
    let e: f64 = energies.iter().zip(p).map(|(a, b)| a * b).sum();
    let p2: f64 = p.iter().map(|x| x * x).sum();
    e + p2.ln() / beta
}

/// Minimizer of the Renyi-2 free energy over the linear family above.
pub fn exact_renyi2(h: &PauliSum, beta: f64) -> Result<ThermalOracleResult> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(VpsError::InvalidArgument(format!("beta {beta} must be positive")));
    }
    let e = eigh(&h.to_dense()?)?;
    let energies = e.eigenvalues.clone();
    let objective = |ebar: f64| -> f64 {
        renyi2_distribution(&energies, beta, ebar)
            .map(|p| renyi2_of_distribution(&energies, &p, beta))
            .unwrap_or(f64::INFINITY)
    };

    // Weights switch on at Ē = E_i − 2/β; F₂ is smooth between these kinks.
    let lo = energies[0] - 2.0 / beta;
    let hi = *energies.last().unwrap();
    let span = (hi - lo).max(1e-12);
    let mut cands: Vec<f64> = energies.iter().map(|&x| x - 2.0 / beta).filter(|&x| x > lo).collect();
    cands.extend((1..=512).map(|k| lo + span * k as f64 / 512.0));
    cands.push(hi);
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let (best_k, _) = cands
        .iter()
        .enumerate()
        .map(|(k, &x)| (k, objective(x)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty candidate list");

    let mut a = if best_k == 0 { lo } else { cands[best_k - 1] };
    let mut b = cands.get(best_k + 1).copied().unwrap_or(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    while b - a > 1e-10 * span.max(1.0) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2);
        }
    }
    let refined = 0.5 * (a + b);
    let scan_best = cands[best_k];
    let ebar = if objective(refined) <= objective(scan_best) { refined } else { scan_best };
    let p = renyi2_distribution(&energies, beta, ebar).expect("minimizer has support");
    let free_energy = renyi2_of_distribution(&energies, &p, beta);
    Ok(ThermalOracleResult {
        rho: DensityMatrix::new(e.with_weights(&p))?,
        ebar: Some(ebar),
        distribution: p,
        energies,
        free_energy,
    })
}

fn baseline_states(circuit: &CircuitIR, theta: &[f64]) -> Result<Vec<StateVector>> {
    if !circuit.ancilla_wires().is_empty() || circuit.post_selection().is_some() {
        return Err(VpsError::InvalidCircuit("baseline circuit must not use ancillas".into()));
    }
    let n = circuit.n_qubits();
    if n > crate::neural::MAX_INPUTS {
        return Err(VpsError::Capacity {
            what: "baseline input bits",
            size: n,
            limit: crate::neural::MAX_INPUTS,
        });
    }
    (0..1usize << n)
        .map(|s| circuit.simulate_from(StateVector::basis(n, s)?, theta))
        .collect()
}

/// ρ = Σ_s P(s)·U|s⟩⟨s|U† together with Tr(Hρ) − H(P)/β, where H(P) is the Shannon entropy of P.
pub fn preprocessing_baseline(
    circuit: &CircuitIR,
    theta: &[f64],
    model: &Reweighter,
    h: &PauliSum,
    beta: f64,
) -> Result<(DensityMatrix, f64)> {
    if model.n_inputs() != circuit.n_qubits() {
        return Err(VpsError::DimensionMismatch(model.n_inputs(), circuit.n_qubits()));
    }
    let p = reweight_all(model)?;
    let states = baseline_states(circuit, theta)?;
    let dim = 1usize << circuit.n_qubits();
    let mut m = CMatrix::zeros(dim);
    for (ps, psi) in p.iter().zip(&states) {
        let a = psi.amps();
        for i in 0..dim {
            let ai = a[i] * *ps;
            for j in 0..dim {
                m[(i, j)] += ai * a[j].conj();
            }
        }
    }
    let rho = DensityMatrix::new(m)?;
    let f = rho.expectation(h)? - classical_entropy(&p) / beta;
    Ok((rho, f))
}

/// Gibbs free energy of the classical-input scheme as a differentiable objective over
/// circuit angles followed by model weights.
#[derive(Debug, Clone)]
pub struct PreprocessingObjective {
    circuit: CircuitIR,
    h: PauliSum,
    beta: f64,
    model: Reweighter,
}

impl PreprocessingObjective {
    pub fn new(circuit: CircuitIR, h: PauliSum, beta: f64, model: Reweighter) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(VpsError::InvalidArgument(format!("beta {beta} must be positive")));
        }
        if h.n_qubits() != circuit.n_qubits() {
            return Err(VpsError::QubitMismatch {
                expected: circuit.n_qubits(),
                got: h.n_qubits(),
            });
        }
        if model.n_inputs() != circuit.n_qubits() {
            return Err(VpsError::DimensionMismatch(model.n_inputs(), circuit.n_qubits()));
        }
        baseline_states(&circuit, &vec![0.0; circuit.n_params()])?;
        Ok(PreprocessingObjective { circuit, h, beta, model })
    }

    pub fn circuit(&self) -> &CircuitIR {
        &self.circuit
    }

    pub fn model(&self) -> &Reweighter {
        &self.model
    }

    /// Mixed state and free energy at `params`.
    pub fn state(&self, params: &[f64]) -> Result<(DensityMatrix, f64)> {
        let layout = self.layout();
        let mut m = self.model.clone();
        m.set_weights(&params[layout.neural()])?;
        preprocessing_baseline(&self.circuit, &params[layout.circuit()], &m, &self.h, self.beta)
    }
}

impl Objective for PreprocessingObjective {
    fn layout(&self) -> ParamLayout {
        ParamLayout {
            n_circuit: self.circuit.n_params(),
            n_neural: self.model.n_weights(),
        }
    }

    fn evaluate(&self, params: &[f64]) -> Result<Evaluation> {
        let layout = self.layout();
        if params.len() != layout.total() {
            return Err(VpsError::DimensionMismatch(params.len(), layout.total()));
        }
        let theta = &params[layout.circuit()];
        let w = &params[layout.neural()];
        let p = self.model.probabilities_with(w)?;
        let states = baseline_states(&self.circuit, theta)?;
        let mut grad = vec![0.0; layout.total()];
        let mut dl_dp = Vec::with_capacity(p.len());
        let mut energy = 0.0;
        for (ps, psi) in p.iter().zip(states) {
            let hpsi = self.h.apply(psi.amps());
            let e = linalg::inner(psi.amps(), &hpsi).re;
            energy += ps * e;
            dl_dp.push(e + (ps.ln() + 1.0) / self.beta);
            let cot = hpsi.into_iter().map(|z| z * (2.0 * ps)).collect();
            backward(&self.circuit, theta, psi, cot, &mut grad[layout.circuit()])?;
        }
        let value = energy - classical_entropy(&p) / self.beta;
        let gw = self.model.backward_with(w, &dl_dp)?;
        grad[layout.neural()].copy_from_slice(&gw);
        Ok(Evaluation {
            value,
            gradient: grad,
            success_prob: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{build_hea, build_thermal_ansatz};
    use crate::autodiff::finite_difference;
    use crate::hamiltonian::{build_tfim, Pauli};
    use crate::objectives::{gibbs_free_energy_exact, renyi2_free_energy, von_neumann_entropy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ket(bits: &[f64]) -> Vec<Complex64> {
        bits.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    fn random_rho(n: usize, seed: u64) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 1 << n;
        let rank = rng.random_range(1..=dim);
        let mut m = CMatrix::zeros(dim);
        for _ in 0..rank {
            let v: Vec<Complex64> = (0..dim).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            m = m.add(&CMatrix::outer(&v));
        }
        let t = m.trace().re;
        DensityMatrix::new(m.scale(1.0 / t)).unwrap()
    }

    fn random_hamiltonian(n: usize, seed: u64) -> PauliSum {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = PauliSum::new(n);
        for _ in 0..8 {
            let ops: Vec<(usize, Pauli)> = (0..n)
                .filter_map(|q| match rng.random_range(0..4) {
                    0 => None,
                    1 => Some((q, Pauli::X)),
                    2 => Some((q, Pauli::Y)),
                    _ => Some((q, Pauli::Z)),
                })
                .collect();
            h.add_term(rng.random_range(-1.0..1.0), PauliString::new(n, &ops).unwrap()).unwrap();
        }
        h
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(CMatrix::identity(2)).is_err());
        assert!(DensityMatrix::new(CMatrix::diagonal(&[1.5, -0.5])).is_err());
        assert!(DensityMatrix::new(CMatrix::identity(3).scale(1.0 / 3.0)).is_err());
        let mut m = CMatrix::diagonal(&[0.5, 0.5]);
        m[(0, 1)] = Complex64::new(0.0, 0.1);
        assert!(matches!(DensityMatrix::new(m), Err(VpsError::NotHermitian(_))));
    }

    #[test]
    fn binary_round_trip() {
        let rho = random_rho(2, 3);
        let bytes = rho.to_bytes();
        assert_eq!(bytes.len(), 8 + 16 * 16);
        assert_eq!(&bytes[..8], &4u64.to_le_bytes());
        assert_eq!(DensityMatrix::from_bytes(&bytes).unwrap(), rho);
        assert!(DensityMatrix::from_bytes(&bytes[..20]).is_err());
    }

    #[test]
    fn fidelity_unit_cases() {
        let zero = DensityMatrix::from_pure(&ket(&[1.0, 0.0])).unwrap();
        let one = DensityMatrix::from_pure(&ket(&[0.0, 1.0])).unwrap();
        let mixed = DensityMatrix::maximally_mixed(1).unwrap();
        let r = random_rho(3, 1);
        let frr = fidelity(&r, &r).unwrap();
        assert!((frr - 1.0).abs() < 1e-8, "{frr} {:?}", r.eigenvalues().unwrap());
        assert!(fidelity(&zero, &one).unwrap().abs() < 1e-12);
        assert!((fidelity(&zero, &mixed).unwrap() - 0.5).abs() < 1e-12);
        assert!(fidelity(&zero, &random_rho(2, 1)).is_err());
    }

    #[test]
    fn trace_distance_unit_cases_and_sandwich() {
        let zero = DensityMatrix::from_pure(&ket(&[1.0, 0.0])).unwrap();
        let one = DensityMatrix::from_pure(&ket(&[0.0, 1.0])).unwrap();
        let r = random_rho(2, 5);
        assert!(trace_distance(&r, &r).unwrap().abs() < 1e-12);
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-12);
        for seed in 0..100 {
            let a = random_rho(2, 1000 + seed);
            let b = random_rho(2, 2000 + seed);
            let f = fidelity(&a, &b).unwrap();
            let t = trace_distance(&a, &b).unwrap();
            assert!(1.0 - f.sqrt() <= t + 1e-9 && t <= (1.0 - f).max(0.0).sqrt() + 1e-9);
        }
    }

    #[test]
    fn uniform_reweighting_is_partial_trace() {
        let c = build_thermal_ansatz(2, 1).unwrap();
        let theta: Vec<f64> = (0..c.n_params()).map(|k| 0.2 * k as f64 - 0.5).collect();
        let r = Reweighter::with_default_arch(2, false).unwrap();
        let rho = assemble_mixed_state(&c, &theta, &r).unwrap();
        let pt = c.simulate(&theta).unwrap().reduced_density_matrix(&[0, 2]).unwrap();
        assert!(rho.matrix().sub(pt.matrix()).frobenius_norm() < 1e-12);
    }

    #[test]
    fn delta_reweighting_selects_branch() {
        let c = build_thermal_ansatz(2, 1).unwrap();
        let theta: Vec<f64> = (0..c.n_params()).map(|k| 0.3 * k as f64 + 0.1).collect();
        // Single-layer net with huge bound: only ancilla outcome 00 survives.
        let mut r = Reweighter::new(vec![2, 1], true).unwrap().with_bound(200.0).unwrap();
        r.set_weights(&[1e3, 1e3, -1e3]).unwrap();
        let rho = assemble_mixed_state(&c, &theta, &r).unwrap();
        let psi = c.simulate(&theta).unwrap();
        let sel = crate::statevec::PostSelection::bits(vec![1, 3], vec![false, false]).unwrap();
        let (branch, _) = psi.post_select(&sel).unwrap();
        let proj = CMatrix::outer(branch.amps());
        assert!(rho.matrix().sub(&proj).frobenius_norm() < 1e-10);
    }

    #[test]
    fn assembly_matches_projector_oracle() {
        let c = build_thermal_ansatz(2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let theta: Vec<f64> = (0..c.n_params()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut r = Reweighter::new(vec![2, 3, 1], false).unwrap();
        r.init_normal(1.0, &mut rng).unwrap();
        let f = reweight_all(&r).unwrap();
        let psi = c.simulate(&theta).unwrap();
        // Wires are ordered s0 a0 s1 a1; collect (|a⟩⟨a| ⊗ I) branches by explicit index arithmetic.
        let mut m = CMatrix::zeros(4);
        for a in 0..4usize {
            let (a0, a1) = (a >> 1, a & 1);
            let branch: Vec<Complex64> = (0..4usize)
                .map(|s| {
                    let (s0, s1) = (s >> 1, s & 1);
                    psi.amps()[(s0 << 3) | (a0 << 2) | (s1 << 1) | a1]
                })
                .collect();
            m = m.add(&CMatrix::outer(&branch).scale(f[a]));
        }
        let t = m.trace().re;
        let oracle = m.scale(1.0 / t);
        let rho = assemble_mixed_state(&c, &theta, &r).unwrap();
        assert!(rho.matrix().sub(&oracle).frobenius_norm() < 1e-10);
    }

    #[test]
    fn correlation_estimator_cases() {
        let r = Reweighter::new(vec![1, 1], false).unwrap();
        let s = |i| Bitstring { index: i, width: 2 };
        let obs = PauliString::new(1, &[(0, Pauli::Z)]).unwrap();
        let samples = [s(0b00), s(0b10), s(0b11), s(0b01)];
        assert_eq!(reweighted_correlation(&samples, &[0], &[1], &r, &obs).unwrap(), 0.0);
        let mut skew = Reweighter::new(vec![1, 1], false).unwrap();
        skew.set_weights(&[0.7, -0.2]).unwrap();
        let same = [s(0b10); 5];
        assert_eq!(reweighted_correlation(&same, &[0], &[1], &skew, &obs).unwrap(), -1.0);
    }

    #[test]
    fn shot_estimate_converges_to_exact() {
        let c = build_thermal_ansatz(2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta: Vec<f64> = (0..c.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut r = Reweighter::new(vec![2, 4, 1], true).unwrap();
        r.init_normal(0.8, &mut rng).unwrap();
        let rho = assemble_mixed_state(&c, &theta, &r).unwrap();
        for ops in [vec![(0, Pauli::Z), (1, Pauli::Z)], vec![(1, Pauli::X)], vec![(0, Pauli::Y)]] {
            let obs = PauliString::new(2, &ops).unwrap();
            let exact = rho.expectation(&PauliSum::from_terms(2, [(1.0, obs.clone())]).unwrap()).unwrap();
            let est = sample_correlation(&c, &theta, &r, &obs, 1_000_000, 77).unwrap();
            assert!((est - exact).abs() < 5e-3, "{obs}: {est} vs {exact}");
        }
    }

    #[test]
    fn gibbs_limits() {
        let h = build_tfim(1, 3, true, true).unwrap();
        let hot = exact_gibbs(&h, 1e-8).unwrap();
        let flat = DensityMatrix::maximally_mixed(3).unwrap();
        assert!(hot.matrix().sub(flat.matrix()).frobenius_norm() < 1e-6);
        let cold = exact_gibbs(&h, 1e3).unwrap();
        let e = eigh(&h.to_dense().unwrap()).unwrap();
        let ground = DensityMatrix::from_pure(&e.eigenvector(0)).unwrap();
        assert!(fidelity(&cold, &ground).unwrap() > 1.0 - 1e-6);
        let fg = gibbs_free_energy_exact(&exact_gibbs(&h, 0.7).unwrap(), &h, 0.7).unwrap();
        for seed in 0..100 {
            assert!(fg < gibbs_free_energy_exact(&random_rho(3, seed), &h, 0.7).unwrap());
        }
    }

    /// Closed-form Renyi minimizer: on a support of the k lowest levels, u_i = μ − E_i with
    /// Σu = (β/2)Σu² at the stationary point, i.e. μ solves a quadratic.
    fn renyi_closed_form(energies: &[f64], beta: f64) -> f64 {
        let mut best = f64::INFINITY;
        for k in 1..=energies.len() {
            let es = &energies[..k];
            let kf = k as f64;
            let s1: f64 = es.iter().sum();
            let s2: f64 = es.iter().map(|e| e * e).sum();
            // (β/2)(kμ² − 2μ s1 + s2) − (kμ − s1) = 0
            let (a, b, c) = (0.5 * beta * kf, -beta * s1 - kf, 0.5 * beta * s2 + s1);
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                continue;
            }
            for mu in [(-b + disc.sqrt()) / (2.0 * a), (-b - disc.sqrt()) / (2.0 * a)] {
                let u: Vec<f64> = es.iter().map(|e| mu - e).collect();
                if u.iter().any(|&x| x <= 0.0) || energies.get(k).is_some_and(|&e| mu - e > 0.0) {
                    continue;
                }
                let z: f64 = u.iter().sum();
                let p: Vec<f64> = u.iter().map(|x| x / z).collect();
                let f = renyi2_of_distribution(es, &p, beta);
                best = best.min(f);
            }
        }
        best
    }

    #[test]
    fn renyi_oracle_matches_closed_form_and_limits() {
        let h = build_tfim(1, 4, true, true).unwrap();
        for beta in [0.3, 1.0, 3.0] {
            let r = exact_renyi2(&h, beta).unwrap();
            let oracle = renyi_closed_form(&r.energies, beta);
            assert!((r.free_energy - oracle).abs() < 1e-9, "β={beta}: {} vs {oracle}", r.free_energy);
            let recomputed = renyi2_free_energy(&r.rho, &h, beta).unwrap();
            assert!((recomputed - r.free_energy).abs() < 1e-7);
        }
        let hot = exact_renyi2(&h, 1e-6).unwrap();
        assert!(trace_distance(&hot.rho, &DensityMatrix::maximally_mixed(4).unwrap()).unwrap() < 1e-4);
        let cold = exact_renyi2(&h, 1e3).unwrap();
        assert!((cold.distribution[0] - 1.0).abs() < 1e-9 || cold.energies[1] - cold.energies[0] < 1e-9);
    }

    #[test]
    fn renyi_oracle_is_minimal() {
        for seed in 0..3 {
            let h = random_hamiltonian(4, seed);
            for beta in [0.3, 1.0, 3.0] {
                let r = exact_renyi2(&h, beta).unwrap();
                let g = exact_gibbs(&h, beta).unwrap();
                assert!(r.free_energy <= renyi2_free_energy(&g, &h, beta).unwrap() + 1e-9);
                for k in 0..20 {
                    let rho = random_rho(4, seed * 100 + k);
                    assert!(r.free_energy <= renyi2_free_energy(&rho, &h, beta).unwrap() + 1e-9);
                }
            }
        }
    }

    #[test]
    fn baseline_cases() {
        let c = build_hea(2, 1, true).unwrap();
        let h = build_tfim(1, 2, false, true).unwrap();
        let uniform = Reweighter::with_default_arch(2, false).unwrap();
        // H layer then zero angles: U maps the computational basis onto the X basis.
        let (rho, _) = preprocessing_baseline(&c, &vec![0.0; c.n_params()], &uniform, &h, 1.0).unwrap();
        assert!(rho.matrix().sub(DensityMatrix::maximally_mixed(2).unwrap().matrix()).frobenius_norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = Reweighter::new(vec![2, 3, 1], false).unwrap();
        model.init_normal(1.5, &mut rng).unwrap();
        let theta: Vec<f64> = (0..c.n_params()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (rho, f) = preprocessing_baseline(&c, &theta, &model, &h, 0.6).unwrap();
        let p = reweight_all(&model).unwrap();
        assert!((classical_entropy(&p) - von_neumann_entropy(&rho).unwrap()).abs() < 1e-8);
        assert!((f - gibbs_free_energy_exact(&rho, &h, 0.6).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn baseline_objective_gradient() {
        let c = build_hea(2, 2, true).unwrap();
        let h = build_tfim(1, 2, false, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut model = Reweighter::new(vec![2, 3, 1], false).unwrap();
        model.init_normal(0.9, &mut rng).unwrap();
        let obj = PreprocessingObjective::new(c.clone(), h, 0.8, model.clone()).unwrap();
        let mut p: Vec<f64> = (0..c.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        p.extend_from_slice(model.weights());
        let ev = obj.evaluate(&p).unwrap();
        assert!((ev.value - obj.state(&p).unwrap().1).abs() < 1e-12);
        let fd = finite_difference(|x| obj.value(x), &p, 1e-4).unwrap();
        for (a, b) in ev.gradient.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5f64.max(1e-4 * b.abs()), "{a} vs {b}");
        }
    }
}
