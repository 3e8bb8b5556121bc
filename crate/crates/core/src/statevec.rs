//! Dense statevector simulation.
//!
//! Rotation conventions follow e^{iθG} with G ∈ {X, Y, Z, Z⊗Z, SWAP}; every
//! generator squares to the identity, so each rotation is cos θ·I + i sin θ·G.

use crate::error::{Result, VpsError};
use crate::hamiltonian::PauliSum;
use crate::linalg::{self, CMatrix, C0, C1};
use crate::thermal::DensityMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 20;

/// Below this success probability a projection is treated as a dead branch.
pub const DEGENERATE_PROB: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    X,
    Rx,
    Ry,
    Rz,
    Rzz,
    Rswap,
    /// Rz(a) · Ry(b) · Rz(c), applied in slot order.
    Su2,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Rzz | GateKind::Rswap => 2,
            _ => 1,
        }
    }

    pub fn n_slots(self) -> usize {
        match self {
            GateKind::H | GateKind::X => 0,
            GateKind::Su2 => 3,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::Rzz => "RZZ",
            GateKind::Rswap => "RSWAP",
            GateKind::Su2 => "SU2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "H" => GateKind::H,
            "X" => GateKind::X,
            "RX" => GateKind::Rx,
            "RY" => GateKind::Ry,
            "RZ" => GateKind::Rz,
            "RZZ" => GateKind::Rzz,
            "RSWAP" => GateKind::Rswap,
            "SU2" => GateKind::Su2,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub wires: Vec<usize>,
    pub slots: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, wires: Vec<usize>, slots: Vec<usize>) -> Result<Self> {
        if wires.len() != kind.arity() {
            return Err(VpsError::InvalidGate(format!(
                "{} takes {} wire(s), got {}",
                kind.name(),
                kind.arity(),
                wires.len()
            )));
        }
        if wires.len() == 2 && wires[0] == wires[1] {
            return Err(VpsError::InvalidGate(format!(
                "{} on repeated wire {}",
                kind.name(),
                wires[0]
            )));
        }
        if slots.len() != kind.n_slots() {
            return Err(VpsError::InvalidGate(format!(
                "{} takes {} parameter slot(s), got {}",
                kind.name(),
                kind.n_slots(),
                slots.len()
            )));
        }
        Ok(Gate { kind, wires, slots })
    }

    pub fn h(w: usize) -> Self {
        Gate::new(GateKind::H, vec![w], vec![]).unwrap()
    }
    pub fn x(w: usize) -> Self {
        Gate::new(GateKind::X, vec![w], vec![]).unwrap()
    }
    pub fn rx(w: usize, slot: usize) -> Self {
        Gate::new(GateKind::Rx, vec![w], vec![slot]).unwrap()
    }
    pub fn ry(w: usize, slot: usize) -> Self {
        Gate::new(GateKind::Ry, vec![w], vec![slot]).unwrap()
    }
    pub fn rz(w: usize, slot: usize) -> Self {
        Gate::new(GateKind::Rz, vec![w], vec![slot]).unwrap()
    }
    /// Panics if `a == b`.
    pub fn rzz(a: usize, b: usize, slot: usize) -> Self {
        Gate::new(GateKind::Rzz, vec![a, b], vec![slot]).unwrap()
    }
    /// Panics if `a == b`.
    pub fn rswap(a: usize, b: usize, slot: usize) -> Self {
        Gate::new(GateKind::Rswap, vec![a, b], vec![slot]).unwrap()
    }
    pub fn su2(w: usize, slots: [usize; 3]) -> Self {
        Gate::new(GateKind::Su2, vec![w], slots.to_vec()).unwrap()
    }

    pub(crate) fn check(&self, n_qubits: usize, n_params: usize) -> Result<()> {
        for &w in &self.wires {
            if w >= n_qubits {
                return Err(VpsError::WireOutOfRange { wire: w, n_qubits });
            }
        }
        for &s in &self.slots {
            if s >= n_params {
                return Err(VpsError::MissingParameter {
                    slot: s,
                    available: n_params,
                });
            }
        }
        Ok(())
    }

    /// Decomposition into fixed gates and single-generator rotations.
    pub(crate) fn primitives(&self) -> Vec<Primitive> {
        let w = &self.wires;
        let s = &self.slots;
        match self.kind {
            GateKind::H => vec![Primitive::Hadamard(w[0])],
            GateKind::X => vec![Primitive::Flip(w[0])],
            GateKind::Rx => vec![Primitive::Rot(Generator::X(w[0]), s[0])],
            GateKind::Ry => vec![Primitive::Rot(Generator::Y(w[0]), s[0])],
            GateKind::Rz => vec![Primitive::Rot(Generator::Z(w[0]), s[0])],
            GateKind::Rzz => vec![Primitive::Rot(Generator::ZZ(w[0], w[1]), s[0])],
            GateKind::Rswap => vec![Primitive::Rot(Generator::Swap(w[0], w[1]), s[0])],
            GateKind::Su2 => vec![
                Primitive::Rot(Generator::Z(w[0]), s[0]),
                Primitive::Rot(Generator::Y(w[0]), s[1]),
                Primitive::Rot(Generator::Z(w[0]), s[2]),
            ],
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        for w in &self.wires {
            write!(f, " {w}")?;
        }
        if !self.slots.is_empty() {
            write!(f, " :")?;
            for s in &self.slots {
                write!(f, " {s}")?;
            }
        }
        Ok(())
    }
}

/// Hermitian involution generating a rotation e^{iθG}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Generator {
    X(usize),
    Y(usize),
    Z(usize),
    ZZ(usize, usize),
    Swap(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Primitive {
    Hadamard(usize),
    Flip(usize),
    Rot(Generator, usize),
}

/// Ancilla post-selection target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SelectionTarget {
    /// Computational basis outcome, one bit per selected wire.
    Bits(Vec<bool>),
    /// Normalized state over the selected wires (first wire most significant).
    State(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostSelection {
    pub wires: Vec<usize>,
    pub target: SelectionTarget,
}

impl PostSelection {
    pub fn bits(wires: Vec<usize>, bits: Vec<bool>) -> Result<Self> {
        let sel = PostSelection {
            wires,
            target: SelectionTarget::Bits(bits),
        };
        sel.validate()?;
        Ok(sel)
    }

    /// Projection onto (|01⟩ − |10⟩)/√2 on the pair `(a, b)`.
    pub fn singlet(a: usize, b: usize) -> Result<Self> {
        let sel = PostSelection {
            wires: vec![a, b],
            target: SelectionTarget::State(singlet_amplitudes().to_vec()),
        };
        sel.validate()?;
        Ok(sel)
    }

    pub fn validate(&self) -> Result<()> {
        let mut sorted = self.wires.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.wires.len() {
            return Err(VpsError::InvalidPostSelection("repeated wire".into()));
        }
        match &self.target {
            SelectionTarget::Bits(b) if b.len() != self.wires.len() => Err(VpsError::InvalidPostSelection(format!(
                "{} bits for {} wires",
                b.len(),
                self.wires.len()
            ))),
            SelectionTarget::State(v) => {
                if v.len() != 1 << self.wires.len() {
                    return Err(VpsError::InvalidPostSelection(format!(
                        "target dimension {} for {} wires",
                        v.len(),
                        self.wires.len()
                    )));
                }
                let norm = linalg::norm_sqr(v).sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(VpsError::InvalidPostSelection(format!("target norm {norm}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Target as a dense vector over the selected wires.
    pub fn target_vector(&self) -> Vec<Complex64> {
        match &self.target {
            SelectionTarget::State(v) => v.clone(),
            SelectionTarget::Bits(bits) => {
                let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
                let mut v = vec![C0; 1 << bits.len()];
                v[idx] = C1;
                v
            }
        }
    }
}

pub(crate) fn singlet_amplitudes() -> [Complex64; 4] {
    [
        C0,
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(-FRAC_1_SQRT_2, 0.0),
        C0,
    ]
}

/// Splits a register into kept wires (ascending) and a selected wire list, and maps
/// every full index to its (kept, selected) sub-indices.
#[derive(Debug, Clone)]
pub struct WireSplit {
    pub n_qubits: usize,
    pub kept: Vec<usize>,
    pub selected: Vec<usize>,
    kept_of: Vec<u32>,
    sel_of: Vec<u32>,
}

impl WireSplit {
    pub fn new(n_qubits: usize, selected: &[usize]) -> Result<Self> {
        for &w in selected {
            if w >= n_qubits {
                return Err(VpsError::WireOutOfRange { wire: w, n_qubits });
            }
        }
        let kept: Vec<usize> = (0..n_qubits).filter(|w| !selected.contains(w)).collect();
        let dim = 1usize << n_qubits;
        let gather = |b: usize, wires: &[usize]| -> u32 {
            wires
                .iter()
                .fold(0u32, |acc, &w| (acc << 1) | ((b >> (n_qubits - 1 - w)) & 1) as u32)
        };
        let kept_of = (0..dim).map(|b| gather(b, &kept)).collect();
        let sel_of = (0..dim).map(|b| gather(b, selected)).collect();
        Ok(WireSplit {
            n_qubits,
            kept,
            selected: selected.to_vec(),
            kept_of,
            sel_of,
        })
    }

    #[inline]
    pub fn kept_dim(&self) -> usize {
        1 << self.kept.len()
    }

    #[inline]
    pub fn sel_dim(&self) -> usize {
        1 << self.selected.len()
    }

    #[inline]
    pub fn split(&self, b: usize) -> (usize, usize) {
        (self.kept_of[b] as usize, self.sel_of[b] as usize)
    }

    /// Amplitudes reshaped to a kept × selected matrix (row-major).
    pub fn reshape(&self, amps: &[Complex64]) -> Vec<Complex64> {
        let cols = self.sel_dim();
        let mut m = vec![C0; amps.len()];
        for (b, a) in amps.iter().enumerate() {
            let (r, c) = self.split(b);
            m[r * cols + c] = *a;
        }
        m
    }

    /// Inverse of [`WireSplit::reshape`].
    pub fn unshape(&self, m: &[Complex64]) -> Vec<Complex64> {
        let cols = self.sel_dim();
        (0..m.len())
            .map(|b| {
                let (r, c) = self.split(b);
                m[r * cols + c]
            })
            .collect()
    }

    /// χ_r = Σ_a conj(t_a) ψ_{r,a}
    pub fn project(&self, amps: &[Complex64], target: &[Complex64]) -> Vec<Complex64> {
        let mut chi = vec![C0; self.kept_dim()];
        for (b, a) in amps.iter().enumerate() {
            let (r, c) = self.split(b);
            let t = target[c];
            if t != C0 {
                chi[r] += t.conj() * a;
            }
        }
        chi
    }

    /// Lifts a kept-register vector back to the full register as χ ⊗ t.
    pub fn lift(&self, chi: &[Complex64], target: &[Complex64]) -> Vec<Complex64> {
        (0..1usize << self.n_qubits)
            .map(|b| {
                let (r, c) = self.split(b);
                chi[r] * target[c]
            })
            .collect()
    }
}

/// Computational-basis measurement outcome; wire 0 is the leftmost character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bitstring {
    pub index: usize,
    pub width: usize,
}

impl Bitstring {
    pub fn bit(&self, wire: usize) -> bool {
        (self.index >> (self.width - 1 - wire)) & 1 == 1
    }

    /// Bits on `wires`, packed with the first listed wire most significant.
    pub fn gather(&self, wires: &[usize]) -> usize {
        wires.iter().fold(0, |acc, &w| (acc << 1) | self.bit(w) as usize)
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for w in 0..self.width {
            write!(f, "{}", if self.bit(w) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    n_qubits: usize,
}

impl StateVector {
    fn check_size(n_qubits: usize) -> Result<()> {
        if n_qubits == 0 {
            return Err(VpsError::InvalidArgument("state needs at least one qubit".into()));
        }
        if n_qubits > MAX_QUBITS {
            return Err(VpsError::Capacity {
                what: "statevector qubits",
                size: n_qubits,
                limit: MAX_QUBITS,
            });
        }
        Ok(())
    }

    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        Self::check_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(VpsError::InvalidArgument(format!("basis index {index} >= {dim}")));
        }
        let mut amps = vec![C0; dim];
        amps[index] = C1;
        Ok(StateVector { amps, n_qubits })
    }

    /// Wraps amplitudes, rejecting vectors whose norm is off by more than 1e-9.
    pub fn from_amps(amps: Vec<Complex64>) -> Result<Self> {
        let n = amps.len().trailing_zeros() as usize;
        if !amps.len().is_power_of_two() {
            return Err(VpsError::InvalidArgument(format!(
                "amplitude count {} is not a power of two",
                amps.len()
            )));
        }
        Self::check_size(n)?;
        let norm = linalg::norm_sqr(&amps);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(VpsError::InvalidArgument(format!("state norm² {norm} != 1")));
        }
        Ok(StateVector { amps, n_qubits: n })
    }

    /// Unchecked wrapper for internal buffers such as adjoint cotangents.
    pub(crate) fn from_raw(amps: Vec<Complex64>, n_qubits: usize) -> Self {
        debug_assert_eq!(amps.len(), 1 << n_qubits);
        StateVector { amps, n_qubits }
    }

    /// Normalizes arbitrary non-zero amplitudes.
    pub fn normalized(mut amps: Vec<Complex64>) -> Result<Self> {
        let norm = linalg::norm_sqr(&amps).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(VpsError::InvalidArgument("cannot normalize zero vector".into()));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Self::from_amps(amps)
    }

    /// Product of singlets (|01⟩ − |10⟩)/√2 on each listed pair; other wires in |0⟩.
    pub fn singlet_pairs(n_qubits: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut state = Self::zero(n_qubits)?;
        for &(a, b) in pairs {
            for w in [a, b] {
                if w >= n_qubits {
                    return Err(VpsError::WireOutOfRange { wire: w, n_qubits });
                }
            }
            // |00⟩ → X_b → |01⟩ → H_a ⊗ ... built directly on amplitudes.
            let ba = 1usize << (n_qubits - 1 - a);
            let bb = 1usize << (n_qubits - 1 - b);
            let mut next = vec![C0; state.amps.len()];
            for (idx, amp) in state.amps.iter().enumerate() {
                if *amp == C0 {
                    continue;
                }
                if idx & (ba | bb) != 0 {
                    return Err(VpsError::InvalidArgument(format!("singlet pair ({a}, {b}) overlaps another pair")));
                }
                next[idx | bb] += amp * FRAC_1_SQRT_2;
                next[idx | ba] -= amp * FRAC_1_SQRT_2;
            }
            state.amps = next;
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        linalg::norm_sqr(&self.amps)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    #[inline]
    fn bit(&self, wire: usize) -> usize {
        1usize << (self.n_qubits - 1 - wire)
    }

    /// Applies `gate` in place, reading angles from `params`.
    pub fn apply(&mut self, gate: &Gate, params: &[f64]) -> Result<()> {
        gate.check(self.n_qubits, params.len())?;
        for p in gate.primitives() {
            self.apply_primitive(p, params, false);
        }
        Ok(())
    }

    pub(crate) fn apply_primitive(&mut self, p: Primitive, params: &[f64], inverse: bool) {
        match p {
            Primitive::Hadamard(w) => self.apply_h(w),
            Primitive::Flip(w) => self.apply_x(w),
            Primitive::Rot(g, slot) => {
                let theta = if inverse { -params[slot] } else { params[slot] };
                self.apply_rotation(g, theta);
            }
        }
    }

    fn apply_h(&mut self, w: usize) {
        let bit = self.bit(w);
        let dim = self.amps.len();
        for base in (0..dim).step_by(2 * bit) {
            for i in base..base + bit {
                let a = self.amps[i];
                let b = self.amps[i + bit];
                self.amps[i] = (a + b) * FRAC_1_SQRT_2;
                self.amps[i + bit] = (a - b) * FRAC_1_SQRT_2;
            }
        }
    }

    fn apply_x(&mut self, w: usize) {
        let bit = self.bit(w);
        let dim = self.amps.len();
        for base in (0..dim).step_by(2 * bit) {
            for i in base..base + bit {
                self.amps.swap(i, i + bit);
            }
        }
    }

    /// ψ ← e^{iθG} ψ
    pub(crate) fn apply_rotation(&mut self, g: Generator, theta: f64) {
        let (s, c) = theta.sin_cos();
        let dim = self.amps.len();
        let amps = &mut self.amps;
        match g {
            Generator::X(w) => {
                let bit = 1usize << (self.n_qubits - 1 - w);
                let is = Complex64::new(0.0, s);
                for base in (0..dim).step_by(2 * bit) {
                    for i in base..base + bit {
                        let a = amps[i];
                        let b = amps[i + bit];
                        amps[i] = a * c + is * b;
                        amps[i + bit] = is * a + b * c;
                    }
                }
            }
            Generator::Y(w) => {
                let bit = 1usize << (self.n_qubits - 1 - w);
                for base in (0..dim).step_by(2 * bit) {
                    for i in base..base + bit {
                        let a = amps[i];
                        let b = amps[i + bit];
                        amps[i] = a * c + b * s;
                        amps[i + bit] = b * c - a * s;
                    }
                }
            }
            Generator::Z(w) => {
                let bit = 1usize << (self.n_qubits - 1 - w);
                let plus = Complex64::new(c, s);
                let minus = plus.conj();
                for base in (0..dim).step_by(2 * bit) {
                    for i in base..base + bit {
                        amps[i] *= plus;
                        amps[i + bit] *= minus;
                    }
                }
            }
            Generator::ZZ(a, b) => {
                let mask = (1usize << (self.n_qubits - 1 - a)) | (1usize << (self.n_qubits - 1 - b));
                let plus = Complex64::new(c, s);
                let minus = plus.conj();
                for (i, amp) in amps.iter_mut().enumerate() {
                    if (i & mask).count_ones() & 1 == 0 {
                        *amp *= plus;
                    } else {
                        *amp *= minus;
                    }
                }
            }
            Generator::Swap(a, b) => {
                let ba = 1usize << (self.n_qubits - 1 - a);
                let bb = 1usize << (self.n_qubits - 1 - b);
                let plus = Complex64::new(c, s);
                let is = Complex64::new(0.0, s);
                for i in 0..dim {
                    let ha = i & ba != 0;
                    let hb = i & bb != 0;
                    if ha == hb {
                        amps[i] *= plus;
                    } else if ha {
                        // pair (i, j) with wire a set, wire b clear
                        let j = i ^ ba ^ bb;
                        let x = amps[i];
                        let y = amps[j];
                        amps[i] = x * c + is * y;
                        amps[j] = is * x + y * c;
                    }
                }
            }
        }
    }

    /// ⟨λ|G|ψ⟩
    pub(crate) fn generator_overlap(&self, lambda: &[Complex64], g: Generator) -> Complex64 {
        let n = self.n_qubits;
        let psi = &self.amps;
        let mut acc = C0;
        match g {
            Generator::X(w) => {
                let bit = 1usize << (n - 1 - w);
                for (i, l) in lambda.iter().enumerate() {
                    acc += l.conj() * psi[i ^ bit];
                }
            }
            Generator::Y(w) => {
                let bit = 1usize << (n - 1 - w);
                let mut lo = C0;
                let mut hi = C0;
                for (i, l) in lambda.iter().enumerate() {
                    if i & bit == 0 {
                        lo += l.conj() * psi[i | bit];
                    } else {
                        hi += l.conj() * psi[i & !bit];
                    }
                }
                // (Yψ)_{b=0} = −i ψ_{b=1};  (Yψ)_{b=1} = i ψ_{b=0}
                acc = Complex64::new(0.0, -1.0) * lo + Complex64::new(0.0, 1.0) * hi;
            }
            Generator::Z(w) => {
                let bit = 1usize << (n - 1 - w);
                for (i, (l, p)) in lambda.iter().zip(psi).enumerate() {
                    let v = l.conj() * p;
                    if i & bit == 0 {
                        acc += v;
                    } else {
                        acc -= v;
                    }
                }
            }
            Generator::ZZ(a, b) => {
                let mask = (1usize << (n - 1 - a)) | (1usize << (n - 1 - b));
                for (i, (l, p)) in lambda.iter().zip(psi).enumerate() {
                    let v = l.conj() * p;
                    if (i & mask).count_ones() & 1 == 0 {
                        acc += v;
                    } else {
                        acc -= v;
                    }
                }
            }
            Generator::Swap(a, b) => {
                let ba = 1usize << (n - 1 - a);
                let bb = 1usize << (n - 1 - b);
                for (i, l) in lambda.iter().enumerate() {
                    let j = if ((i & ba) != 0) != ((i & bb) != 0) { i ^ ba ^ bb } else { i };
                    acc += l.conj() * psi[j];
                }
            }
        }
        acc
    }

    /// ⟨ψ|H|ψ⟩. Observables on fewer qubits act on the leading wires.
    pub fn expectation(&self, h: &PauliSum) -> Result<f64> {
        let padded;
        let h = if h.n_qubits() == self.n_qubits {
            h
        } else if h.n_qubits() < self.n_qubits {
            padded = h.pad_to(self.n_qubits)?;
            &padded
        } else {
            return Err(VpsError::QubitMismatch {
                expected: self.n_qubits,
                got: h.n_qubits(),
            });
        };
        let z = h.expectation_raw(&self.amps);
        if z.im.abs() > 1e-9 {
            return Err(VpsError::InvalidArgument(format!(
                "expectation has imaginary residue {:e}",
                z.im
            )));
        }
        Ok(z.re)
    }

    /// Projects `sel.wires` onto the target and renormalizes the rest.
    /// Returns the state on the remaining wires (ascending order) and ω_k.
    pub fn post_select(&self, sel: &PostSelection) -> Result<(StateVector, f64)> {
        sel.validate()?;
        if sel.wires.is_empty() {
            return Ok((self.clone(), 1.0));
        }
        if sel.wires.len() >= self.n_qubits {
            return Err(VpsError::InvalidPostSelection(
                "post-selection must leave at least one wire".into(),
            ));
        }
        let split = WireSplit::new(self.n_qubits, &sel.wires)?;
        let chi = split.project(&self.amps, &sel.target_vector());
        let prob = linalg::norm_sqr(&chi);
        if prob < DEGENERATE_PROB {
            return Err(VpsError::DegenerateProjection { prob });
        }
        let scale = 1.0 / prob.sqrt();
        let amps = chi.into_iter().map(|a| a * scale).collect();
        Ok((
            StateVector {
                amps,
                n_qubits: split.kept.len(),
            },
            prob,
        ))
    }

    /// Partial trace keeping `keep` (listed order defines the output qubit order).
    pub fn reduced_density_matrix(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(VpsError::InvalidArgument("keep list is empty".into()));
        }
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != keep.len() {
            return Err(VpsError::InvalidArgument("keep list repeats a wire".into()));
        }
        for &w in keep {
            if w >= self.n_qubits {
                return Err(VpsError::WireOutOfRange {
                    wire: w,
                    n_qubits: self.n_qubits,
                });
            }
        }
        let traced: Vec<usize> = (0..self.n_qubits).filter(|w| !keep.contains(w)).collect();
        let kd = 1usize << keep.len();
        let td = 1usize << traced.len();
        // rows indexed by kept bits in `keep` order
        let mut psi = vec![C0; kd * td];
        let n = self.n_qubits;
        for (b, a) in self.amps.iter().enumerate() {
            let r = keep.iter().fold(0, |acc, &w| (acc << 1) | ((b >> (n - 1 - w)) & 1));
            let c = traced.iter().fold(0, |acc, &w| (acc << 1) | ((b >> (n - 1 - w)) & 1));
            psi[r * td + c] = *a;
        }
        let mat = CMatrix::from_fn(kd, |i, j| {
            let ri = &psi[i * td..(i + 1) * td];
            let rj = &psi[j * td..(j + 1) * td];
            ri.iter().zip(rj).map(|(x, y)| x * y.conj()).sum()
        });
        DensityMatrix::new(mat)
    }

    /// i.i.d. computational-basis samples, deterministic for a fixed seed.
    pub fn sample_bitstrings(&self, shots: usize, seed: u64) -> Result<Vec<Bitstring>> {
        if shots == 0 {
            return Err(VpsError::InvalidArgument("shots must be at least 1".into()));
        }
        let mut cdf = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        let total = acc;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = self.n_qubits;
        Ok((0..shots)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * total;
                let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                Bitstring { index: idx, width }
            })
            .collect())
    }
}

/// Functional form of [`StateVector::apply`].
pub fn apply_gate(state: &StateVector, gate: &Gate, params: &[f64]) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply(gate, params)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_tfim, Pauli, PauliString};
    use rand::Rng;
    use std::f64::consts::PI;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    pub(crate) fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..1usize << n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        StateVector::normalized(amps).unwrap()
    }

    /// Dense single-gate unitary via Kronecker products (independent of the kernels).
    fn dense_gate(n: usize, gate: &Gate, params: &[f64]) -> CMatrix {
        let i = Complex64::new(0.0, 1.0);
        let one = |w: usize, m: [Complex64; 4]| -> CMatrix {
            let mut out = CMatrix::identity(1);
            for q in 0..n {
                let f = if q == w { CMatrix::from_vec(2, m.to_vec()) } else { CMatrix::identity(2) };
                out = kron(&out, &f);
            }
            out
        };
        let rot = |axis: Pauli, w: usize, t: f64| -> CMatrix {
            let (s, c) = t.sin_cos();
            let m = match axis {
                Pauli::X => [c.into(), i * s, i * s, c.into()],
                Pauli::Y => [c.into(), Complex64::from(s), Complex64::from(-s), c.into()],
                Pauli::Z => [Complex64::new(c, s), C0, C0, Complex64::new(c, -s)],
            };
            one(w, m)
        };
        let p = |k: usize| params[gate.slots[k]];
        match gate.kind {
            GateKind::H => {
                let h = Complex64::from(FRAC_1_SQRT_2);
                one(gate.wires[0], [h, h, h, -h])
            }
            GateKind::X => one(gate.wires[0], [C0, C1, C1, C0]),
            GateKind::Rx => rot(Pauli::X, gate.wires[0], p(0)),
            GateKind::Ry => rot(Pauli::Y, gate.wires[0], p(0)),
            GateKind::Rz => rot(Pauli::Z, gate.wires[0], p(0)),
            GateKind::Su2 => {
                let w = gate.wires[0];
                rot(Pauli::Z, w, p(2))
                    .matmul(&rot(Pauli::Y, w, p(1)))
                    .matmul(&rot(Pauli::Z, w, p(0)))
            }
            GateKind::Rzz | GateKind::Rswap => {
                let (a, b) = (gate.wires[0], gate.wires[1]);
                let g = if gate.kind == GateKind::Rzz {
                    let s = PauliString::new(n, &[(a, Pauli::Z), (b, Pauli::Z)]).unwrap();
                    PauliSum::from_terms(n, [(1.0, s)]).unwrap().to_dense().unwrap()
                } else {
                    // SWAP = (I + XX + YY + ZZ)/2
                    let mut terms = vec![(0.5, PauliString::identity(n))];
                    for q in [Pauli::X, Pauli::Y, Pauli::Z] {
                        terms.push((0.5, PauliString::new(n, &[(a, q), (b, q)]).unwrap()));
                    }
                    PauliSum::from_terms(n, terms).unwrap().to_dense().unwrap()
                };
                let (s, c) = p(0).sin_cos();
                CMatrix::identity(1 << n)
                    .scale(c)
                    .add(&CMatrix::from_fn(1 << n, |r, col| g[(r, col)] * i * s))
            }
        }
    }

    fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
        let (da, db) = (a.dim(), b.dim());
        CMatrix::from_fn(da * db, |r, c| a[(r / db, c / db)] * b[(r % db, c % db)])
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply(&Gate::h(0), &[]).unwrap();
        let h = Complex64::from(FRAC_1_SQRT_2);
        assert!(close(s.amps()[0], h) && close(s.amps()[1], h));
    }

    #[test]
    fn rzz_phase_on_00() {
        let theta = 0.37;
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&Gate::rzz(0, 1, 0), &[theta]).unwrap();
        assert!(close(s.amps()[0], Complex64::new(theta.cos(), theta.sin())));
    }

    #[test]
    fn rswap_on_01() {
        let theta = 0.81;
        let mut s = StateVector::basis(2, 0b01).unwrap();
        s.apply(&Gate::rswap(0, 1, 0), &[theta]).unwrap();
        assert!(close(s.amps()[0b01], Complex64::from(theta.cos())));
        assert!(close(s.amps()[0b10], Complex64::new(0.0, theta.sin())));
        assert!(close(s.amps()[0b00], C0) && close(s.amps()[0b11], C0));
    }

    #[test]
    fn kernels_match_dense_unitaries() {
        let n = 3;
        let params = [0.3, -1.1, 2.4];
        let gates = vec![
            Gate::h(1),
            Gate::x(2),
            Gate::rx(0, 0),
            Gate::ry(1, 1),
            Gate::rz(2, 2),
            Gate::rzz(2, 0, 1),
            Gate::rswap(1, 2, 0),
            Gate::rswap(2, 0, 2),
            Gate::su2(1, [0, 1, 2]),
        ];
        for g in gates {
            let psi = random_state(n, 11);
            let mut fast = psi.clone();
            fast.apply(&g, &params).unwrap();
            let slow = dense_gate(n, &g, &params).matvec(psi.amps());
            for (a, b) in fast.amps().iter().zip(&slow) {
                assert!((a - b).norm() < 1e-12, "{g}");
            }
        }
    }

    #[test]
    fn generator_overlap_matches_explicit_product() {
        let n = 3;
        let lam = random_state(n, 1);
        let psi = random_state(n, 2);
        let gens = [
            (Generator::X(1), vec![(1, Pauli::X)]),
            (Generator::Y(0), vec![(0, Pauli::Y)]),
            (Generator::Z(2), vec![(2, Pauli::Z)]),
            (Generator::ZZ(0, 2), vec![(0, Pauli::Z), (2, Pauli::Z)]),
        ];
        for (g, ops) in gens {
            let h = PauliSum::from_terms(n, [(1.0, PauliString::new(n, &ops).unwrap())]).unwrap();
            let expected = linalg::inner(lam.amps(), &h.apply(psi.amps()));
            assert!((psi.generator_overlap(lam.amps(), g) - expected).norm() < 1e-12);
        }
        // SWAP via (I + XX + YY + ZZ)/2
        let mut terms = vec![(0.5, PauliString::identity(n))];
        for q in [Pauli::X, Pauli::Y, Pauli::Z] {
            terms.push((0.5, PauliString::new(n, &[(0, q), (2, q)]).unwrap()));
        }
        let swap = PauliSum::from_terms(n, terms).unwrap();
        let expected = linalg::inner(lam.amps(), &swap.apply(psi.amps()));
        assert!((psi.generator_overlap(lam.amps(), Generator::Swap(0, 2)) - expected).norm() < 1e-12);
    }

    #[test]
    fn invalid_gates_are_rejected() {
        assert!(Gate::new(GateKind::Rzz, vec![1, 1], vec![0]).is_err());
        assert!(Gate::new(GateKind::Su2, vec![0], vec![0]).is_err());
        assert!(Gate::new(GateKind::H, vec![0, 1], vec![]).is_err());
        let mut s = StateVector::zero(2).unwrap();
        assert!(matches!(s.apply(&Gate::h(2), &[]), Err(VpsError::WireOutOfRange { .. })));
        assert!(matches!(s.apply(&Gate::rx(0, 3), &[0.1]), Err(VpsError::MissingParameter { .. })));
    }

    #[test]
    fn capacity_limit() {
        assert!(matches!(StateVector::zero(21), Err(VpsError::Capacity { .. })));
    }

    #[test]
    fn unitarity_over_many_random_gates() {
        let n = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = random_state(n, 3);
        let params: Vec<f64> = (0..8).map(|_| rng.random_range(-PI..PI)).collect();
        for _ in 0..50 {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n);
            while b == a {
                b = rng.random_range(0..n);
            }
            let slot = rng.random_range(0..6);
            let g = match rng.random_range(0..8) {
                0 => Gate::h(a),
                1 => Gate::x(a),
                2 => Gate::rx(a, slot),
                3 => Gate::ry(a, slot),
                4 => Gate::rz(a, slot),
                5 => Gate::rzz(a, b, slot),
                6 => Gate::rswap(a, b, slot),
                _ => Gate::su2(a, [slot, slot + 1, slot + 2]),
            };
            s.apply(&g, &params).unwrap();
        }
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn expectation_examples() {
        let grid = build_tfim(4, 3, true, false).unwrap();
        let zero = StateVector::zero(12).unwrap();
        assert!((zero.expectation(&grid).unwrap() - 24.0).abs() < 1e-12);

        let ring = build_tfim(1, 8, true, true).unwrap();
        let mut plus = StateVector::zero(8).unwrap();
        for w in 0..8 {
            plus.apply(&Gate::h(w), &[]).unwrap();
        }
        assert!((plus.expectation(&ring).unwrap() + 8.0).abs() < 1e-12);
    }

    #[test]
    fn expectation_matches_dense_oracle() {
        let h = crate::hamiltonian::build_heisenberg(2, 2, false).unwrap();
        let mut h = h;
        h.add_term(0.4, PauliString::new(4, &[(1, Pauli::Y), (3, Pauli::X)]).unwrap()).unwrap();
        h.add_term(-0.7, PauliString::new(4, &[(2, Pauli::X)]).unwrap()).unwrap();
        let psi = random_state(4, 9);
        let dense = h.to_dense().unwrap();
        let oracle = linalg::inner(psi.amps(), &dense.matvec(psi.amps())).re;
        assert!((psi.expectation(&h).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn expectation_pads_system_observables() {
        let h = build_tfim(1, 2, false, true).unwrap();
        let psi = StateVector::zero(3).unwrap();
        assert!((psi.expectation(&h).unwrap() - 1.0).abs() < 1e-12);
        let big = build_tfim(1, 4, false, true).unwrap();
        assert!(matches!(psi.expectation(&big), Err(VpsError::QubitMismatch { .. })));
    }

    #[test]
    fn post_select_bell_marginal() {
        let mut bell = StateVector::zero(2).unwrap();
        bell.amps[0] = Complex64::from(FRAC_1_SQRT_2);
        bell.amps[3] = Complex64::from(FRAC_1_SQRT_2);
        let sel = PostSelection::bits(vec![1], vec![false]).unwrap();
        let (out, p) = bell.post_select(&sel).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert_eq!(out.n_qubits(), 1);
        assert!(close(out.amps()[0], C1));

        let empty = PostSelection::bits(vec![], vec![]).unwrap();
        let (same, p) = bell.post_select(&empty).unwrap();
        assert_eq!(same, bell);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn post_select_matches_projector_oracle() {
        let psi = random_state(3, 21);
        // |1⟩⟨1| on wire 2 as a dense projector.
        let proj = CMatrix::from_fn(8, |r, c| if r == c && r & 1 == 1 { C1 } else { C0 });
        let projected = proj.matvec(psi.amps());
        let prob = linalg::norm_sqr(&projected);
        let sel = PostSelection::bits(vec![2], vec![true]).unwrap();
        let (out, p) = psi.post_select(&sel).unwrap();
        assert!((p - prob).abs() < 1e-12);
        for r in 0..4 {
            let expected = projected[(r << 1) | 1] / prob.sqrt();
            assert!((out.amps()[r] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn post_select_singlet_and_degenerate() {
        let s = StateVector::singlet_pairs(2, &[(0, 1)]).unwrap();
        assert!(s.post_select(&PostSelection::singlet(0, 1).unwrap()).is_err());
        let s3 = StateVector::singlet_pairs(3, &[(1, 2)]).unwrap();
        let (rest, p) = s3.post_select(&PostSelection::singlet(1, 2).unwrap()).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!(close(rest.amps()[0], C1));
        let zero = StateVector::zero(2).unwrap();
        let sel = PostSelection::bits(vec![0], vec![true]).unwrap();
        assert!(matches!(zero.post_select(&sel), Err(VpsError::DegenerateProjection { .. })));
    }

    #[test]
    fn reduced_density_examples() {
        let bell = StateVector::singlet_pairs(2, &[(0, 1)]).unwrap();
        let rho = bell.reduced_density_matrix(&[0]).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((rho.matrix()[(1, 1)].re - 0.5).abs() < 1e-12);
        assert!(rho.matrix()[(0, 1)].norm() < 1e-12);

        let mut prod = StateVector::zero(2).unwrap();
        prod.apply(&Gate::ry(0, 0), &[0.4]).unwrap();
        let rho = prod.reduced_density_matrix(&[0]).unwrap();
        let (s, c) = 0.4f64.sin_cos();
        let q = [Complex64::from(c), Complex64::from(-s)];
        let expected = CMatrix::outer(&q);
        assert!(rho.matrix().sub(&expected).frobenius_norm() < 1e-12);
        assert!(bell.reduced_density_matrix(&[]).is_err());
    }

    #[test]
    fn reduced_density_matches_kron_trace_oracle() {
        let psi = random_state(4, 5);
        let full = CMatrix::outer(psi.amps());
        // Trace out wires 1 and 3 from the 16×16 projector by explicit index sums.
        let mut oracle = CMatrix::zeros(4);
        for r in 0..4 {
            for c in 0..4 {
                let mut acc = C0;
                for t in 0..4 {
                    let idx = |k: usize| ((k >> 1) << 3) | ((t >> 1) << 2) | ((k & 1) << 1) | (t & 1);
                    acc += full[(idx(r), idx(c))];
                }
                oracle[(r, c)] = acc;
            }
        }
        let rho = psi.reduced_density_matrix(&[0, 2]).unwrap();
        assert!(rho.matrix().sub(&oracle).frobenius_norm() < 1e-10);
    }

    #[test]
    fn sampling_examples() {
        let one = StateVector::basis(1, 1).unwrap();
        assert!(one.sample_bitstrings(100, 3).unwrap().iter().all(|b| b.to_string() == "1"));

        let mut plus = StateVector::zero(1).unwrap();
        plus.apply(&Gate::h(0), &[]).unwrap();
        let samples = plus.sample_bitstrings(100_000, 17).unwrap();
        let zeros = samples.iter().filter(|b| b.index == 0).count() as f64 / 1e5;
        assert!((0.49..=0.51).contains(&zeros));
        assert_eq!(samples, plus.sample_bitstrings(100_000, 17).unwrap());
        assert!(plus.sample_bitstrings(0, 1).is_err());
    }

    #[test]
    fn sampling_total_variation() {
        let psi = random_state(3, 77);
        let shots = 1_000_000;
        let samples = psi.sample_bitstrings(shots, 4).unwrap();
        let mut counts = [0usize; 8];
        for s in samples {
            counts[s.index] += 1;
        }
        let tv: f64 = psi
            .probabilities()
            .iter()
            .zip(counts)
            .map(|(p, c)| (p - c as f64 / shots as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 5e-3, "tv = {tv}");
    }

    #[test]
    fn bitstring_formatting() {
        let b = Bitstring { index: 0b0110, width: 4 };
        assert_eq!(b.to_string(), "0110");
        assert!(b.bit(1) && !b.bit(0));
        assert_eq!(b.gather(&[2, 0]), 0b10);
    }
}
