//! Circuit builders and the shared circuit representation.
//!
//! Text form (one directive per line, `#` comments allowed):
//!
//! ```text
//! circuit v1
//! qubits 13
//! params 53
//! system 0 1 2 3 4 5 6 7 8 9 10 11
//! ancilla 12
//! init zero                # or: init singlets 0-1 2-3
//! postselect bits 12 : 0   # or: postselect singlet 12 13
//! gate H 0
//! gate RZZ 0 12 : 0
//! gate SU2 12 : 50 51 52
//! ```

use crate::error::{Result, VpsError};
use crate::hamiltonian::PauliString;
use crate::hamiltonian::Pauli;
use crate::statevec::{Gate, GateKind, PostSelection, SelectionTarget, StateVector};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialState {
    Zero,
    /// (|01⟩ − |10⟩)/√2 on each listed pair, |0⟩ elsewhere.
    Singlets(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitIR {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
    system_wires: Vec<usize>,
    ancilla_wires: Vec<usize>,
    init: InitialState,
    post_selection: Option<PostSelection>,
}

impl CircuitIR {
    pub fn new(
        n_qubits: usize,
        gates: Vec<Gate>,
        n_params: usize,
        system_wires: Vec<usize>,
        ancilla_wires: Vec<usize>,
        init: InitialState,
        post_selection: Option<PostSelection>,
    ) -> Result<Self> {
        let c = CircuitIR {
            n_qubits,
            gates,
            n_params,
            system_wires,
            ancilla_wires,
            init,
            post_selection,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(VpsError::InvalidCircuit(m));
        if self.n_qubits == 0 {
            return bad("circuit has no wires".into());
        }
        let mut seen = vec![0u8; self.n_qubits];
        for &w in self.system_wires.iter().chain(&self.ancilla_wires) {
            if w >= self.n_qubits {
                return Err(VpsError::WireOutOfRange {
                    wire: w,
                    n_qubits: self.n_qubits,
                });
            }
            seen[w] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            return bad("system and ancilla wires must partition the register".into());
        }
        let mut used = vec![false; self.n_params];
        for g in &self.gates {
            g.check(self.n_qubits, self.n_params)?;
            for &s in &g.slots {
                used[s] = true;
            }
        }
        if let Some(s) = used.iter().position(|u| !u) {
            return bad(format!("parameter slot {s} is never used"));
        }
        if let InitialState::Singlets(pairs) = &self.init {
            let mut taken = vec![false; self.n_qubits];
            for &(a, b) in pairs {
                for w in [a, b] {
                    if w >= self.n_qubits || taken[w] {
                        return bad(format!("singlet pair ({a}, {b}) is invalid"));
                    }
                    taken[w] = true;
                }
            }
        }
        if let Some(sel) = &self.post_selection {
            sel.validate()?;
            for w in &sel.wires {
                if !self.ancilla_wires.contains(w) {
                    return bad(format!("post-selection wire {w} is not an ancilla"));
                }
            }
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }
    pub fn n_params(&self) -> usize {
        self.n_params
    }
    pub fn system_wires(&self) -> &[usize] {
        &self.system_wires
    }
    pub fn ancilla_wires(&self) -> &[usize] {
        &self.ancilla_wires
    }
    pub fn init(&self) -> &InitialState {
        &self.init
    }
    pub fn post_selection(&self) -> Option<&PostSelection> {
        self.post_selection.as_ref()
    }

    /// Number of distinct parameter slots referenced by gates.
    pub fn distinct_slots(&self) -> usize {
        let mut s: Vec<usize> = self.gates.iter().flat_map(|g| g.slots.iter().copied()).collect();
        s.sort_unstable();
        s.dedup();
        s.len()
    }

    pub fn count_kind(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    pub fn initial_state(&self) -> Result<StateVector> {
        match &self.init {
            InitialState::Zero => StateVector::zero(self.n_qubits),
            InitialState::Singlets(pairs) => StateVector::singlet_pairs(self.n_qubits, pairs),
        }
    }

    pub fn simulate(&self, params: &[f64]) -> Result<StateVector> {
        self.simulate_from(self.initial_state()?, params)
    }

    pub fn simulate_from(&self, mut state: StateVector, params: &[f64]) -> Result<StateVector> {
        if state.n_qubits() != self.n_qubits {
            return Err(VpsError::QubitMismatch {
                expected: self.n_qubits,
                got: state.n_qubits(),
            });
        }
        if params.len() < self.n_params {
            return Err(VpsError::MissingParameter {
                slot: self.n_params - 1,
                available: params.len(),
            });
        }
        for g in &self.gates {
            state.apply(g, params)?;
        }
        Ok(state)
    }

    /// Copy with extra gates appended; extra parameter slots extend `n_params`.
    pub fn with_suffix(&self, gates: &[Gate], extra_params: usize) -> Result<CircuitIR> {
        let mut c = self.clone();
        c.gates.extend_from_slice(gates);
        c.n_params += extra_params;
        c.validate()?;
        Ok(c)
    }

    /// Copy without post-selection.
    pub fn without_post_selection(&self) -> CircuitIR {
        CircuitIR {
            post_selection: None,
            ..self.clone()
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("circuit v1\n");
        let list = |ws: &[usize]| ws.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "qubits {}", self.n_qubits);
        let _ = writeln!(out, "params {}", self.n_params);
        let _ = writeln!(out, "system {}", list(&self.system_wires));
        let _ = writeln!(out, "ancilla {}", list(&self.ancilla_wires));
        match &self.init {
            InitialState::Zero => out.push_str("init zero\n"),
            InitialState::Singlets(pairs) => {
                let p: Vec<String> = pairs.iter().map(|(a, b)| format!("{a}-{b}")).collect();
                let _ = writeln!(out, "init singlets {}", p.join(" "));
            }
        }
        if let Some(sel) = &self.post_selection {
            match &sel.target {
                SelectionTarget::Bits(bits) => {
                    let b: String = bits.iter().map(|&x| if x { '1' } else { '0' }).collect();
                    let _ = writeln!(out, "postselect bits {} : {}", list(&sel.wires), b);
                }
                SelectionTarget::State(_) => {
                    let _ = writeln!(out, "postselect singlet {}", list(&sel.wires));
                }
            }
        }
        for g in &self.gates {
            let _ = writeln!(out, "gate {g}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<CircuitIR> {
        let mut n_qubits = None;
        let mut n_params = None;
        let mut system = None;
        let mut ancilla = Vec::new();
        let mut init = InitialState::Zero;
        let mut post = None;
        let mut gates = Vec::new();
        let mut header = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |msg: String| VpsError::Parse { line: line_no, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let nums = |ts: &[&str]| -> Result<Vec<usize>> {
                ts.iter()
                    .map(|t| t.parse::<usize>().map_err(|_| err(format!("expected integer, got '{t}'"))))
                    .collect()
            };
            match toks[0] {
                "circuit" => {
                    if toks.get(1) != Some(&"v1") {
                        return Err(err("unsupported circuit version".into()));
                    }
                    header = true;
                }
                "qubits" => n_qubits = Some(*nums(&toks[1..])?.first().ok_or_else(|| err("missing count".into()))?),
                "params" => n_params = Some(*nums(&toks[1..])?.first().ok_or_else(|| err("missing count".into()))?),
                "system" => system = Some(nums(&toks[1..])?),
                "ancilla" => ancilla = nums(&toks[1..])?,
                "init" => match toks.get(1) {
                    Some(&"zero") => init = InitialState::Zero,
                    Some(&"singlets") => {
                        let mut pairs = Vec::new();
                        for t in &toks[2..] {
                            let (a, b) = t.split_once('-').ok_or_else(|| err(format!("bad pair '{t}'")))?;
                            let a = a.parse().map_err(|_| err(format!("bad pair '{t}'")))?;
                            let b = b.parse().map_err(|_| err(format!("bad pair '{t}'")))?;
                            pairs.push((a, b));
                        }
                        init = InitialState::Singlets(pairs);
                    }
                    _ => return Err(err("unknown init".into())),
                },
                "postselect" => match toks.get(1) {
                    Some(&"bits") => {
                        let colon = toks.iter().position(|t| *t == ":").ok_or_else(|| err("missing ':'".into()))?;
                        let wires = nums(&toks[2..colon])?;
                        let bits: Vec<bool> = toks
                            .get(colon + 1)
                            .unwrap_or(&"")
                            .chars()
                            .map(|c| match c {
                                '0' => Ok(false),
                                '1' => Ok(true),
                                _ => Err(err(format!("bad bit '{c}'"))),
                            })
                            .collect::<Result<_>>()?;
                        post = Some(PostSelection::bits(wires, bits).map_err(|e| err(e.to_string()))?);
                    }
                    Some(&"singlet") => {
                        let w = nums(&toks[2..])?;
                        if w.len() != 2 {
                            return Err(err("singlet needs two wires".into()));
                        }
                        post = Some(PostSelection::singlet(w[0], w[1]).map_err(|e| err(e.to_string()))?);
                    }
                    _ => return Err(err("unknown postselect form".into())),
                },
                "gate" => {
                    let kind = toks
                        .get(1)
                        .and_then(|t| GateKind::from_name(t))
                        .ok_or_else(|| err("unknown gate".into()))?;
                    let colon = toks.iter().position(|t| *t == ":").unwrap_or(toks.len());
                    let wires = nums(&toks[2..colon])?;
                    let slots = if colon < toks.len() { nums(&toks[colon + 1..])? } else { vec![] };
                    gates.push(Gate::new(kind, wires, slots).map_err(|e| err(e.to_string()))?);
                }
                other => return Err(err(format!("unknown directive '{other}'"))),
            }
        }
        if !header {
            return Err(VpsError::Parse {
                line: 1,
                msg: "missing 'circuit v1' header".into(),
            });
        }
        let missing = |what: &str| VpsError::Parse {
            line: 0,
            msg: format!("missing '{what}' line"),
        };
        let n_qubits = n_qubits.ok_or_else(|| missing("qubits"))?;
        CircuitIR::new(
            n_qubits,
            gates,
            n_params.ok_or_else(|| missing("params"))?,
            system.ok_or_else(|| missing("system"))?,
            ancilla,
            init,
            post,
        )
    }
}

struct Slots(usize);

impl Slots {
    fn next(&mut self) -> usize {
        self.0 += 1;
        self.0 - 1
    }
}

fn ring_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + 1) % n)).collect()
}

/// Hadamard layer, then `p` blocks of [ring Rzz, Rx on all wires, optional Ry on all wires].
pub fn build_hea(n: usize, p: usize, extra_ry: bool) -> Result<CircuitIR> {
    if n < 2 || p < 1 {
        return Err(VpsError::InvalidCircuit(format!("hea needs n >= 2 and P >= 1 (got n={n}, P={p})")));
    }
    let mut s = Slots(0);
    let mut gates: Vec<Gate> = (0..n).map(Gate::h).collect();
    for _ in 0..p {
        for (a, b) in ring_pairs(n) {
            gates.push(Gate::rzz(a, b, s.next()));
        }
        for w in 0..n {
            gates.push(Gate::rx(w, s.next()));
        }
        if extra_ry {
            for w in 0..n {
                gates.push(Gate::ry(w, s.next()));
            }
        }
    }
    CircuitIR::new(n, gates, s.0, (0..n).collect(), vec![], InitialState::Zero, None)
}

/// System wires `0..n_sys` plus one ancilla on wire `n_sys` coupled all-to-one, with a
/// trailing SU2 rotation on the ancilla and post-selection of |0⟩.
pub fn build_hea_postselect(n_sys: usize, p: usize) -> Result<CircuitIR> {
    if n_sys < 2 || p < 1 {
        return Err(VpsError::InvalidCircuit(format!(
            "hea_postselect needs n_sys >= 2 and P >= 1 (got n_sys={n_sys}, P={p})"
        )));
    }
    let anc = n_sys;
    let mut s = Slots(0);
    let mut gates: Vec<Gate> = (0..n_sys).map(Gate::h).collect();
    for _ in 0..p {
        for i in 0..n_sys {
            gates.push(Gate::rzz(i, anc, s.next()));
        }
        for w in 0..=n_sys {
            gates.push(Gate::rx(w, s.next()));
        }
    }
    gates.push(Gate::su2(anc, [s.next(), s.next(), s.next()]));
    CircuitIR::new(
        n_sys + 1,
        gates,
        s.0,
        (0..n_sys).collect(),
        vec![anc],
        InitialState::Zero,
        Some(PostSelection::bits(vec![anc], vec![false])?),
    )
}

/// Singlet-paired initial state with Rswap couplings. Ancillas sit on wires `n_sys` and
/// `n_sys + 1`; only the first couples to the system.
pub fn build_su2_ansatz(n_sys: usize, p: usize, symmetric_sel: bool) -> Result<CircuitIR> {
    if n_sys < 2 || !n_sys.is_multiple_of(2) || p < 1 {
        return Err(VpsError::InvalidCircuit(format!(
            "su2 ansatz needs an even n_sys >= 2 and P >= 1 (got n_sys={n_sys}, P={p})"
        )));
    }
    let (a0, a1) = (n_sys, n_sys + 1);
    let mut pairs: Vec<(usize, usize)> = (0..n_sys / 2).map(|k| (2 * k, 2 * k + 1)).collect();
    pairs.push((a0, a1));
    let mut s = Slots(0);
    let mut gates = Vec::new();
    for _ in 0..p {
        for i in 0..n_sys {
            gates.push(Gate::rswap(i, a0, s.next()));
        }
        gates.push(Gate::rswap(a0, a1, s.next()));
    }
    let sel = if symmetric_sel {
        PostSelection::singlet(a0, a1)?
    } else {
        PostSelection::bits(vec![a0, a1], vec![true, true])?
    };
    CircuitIR::new(
        n_sys + 2,
        gates,
        s.0,
        (0..n_sys).collect(),
        vec![a0, a1],
        InitialState::Singlets(pairs),
        Some(sel),
    )
}

/// Particle-number conserving circuit: X on the first `electrons` wires, then `p` blocks of
/// [Rswap ladder, Rzz ladder, Rz on every system wire]. With an ancilla (wire `n_sys`), each
/// block ends with Rswap couplings (i, n_sys) and the circuit ends with Rz on the ancilla.
pub fn build_u1_ansatz(n_sys: usize, p: usize, electrons: usize, with_ancilla: bool) -> Result<CircuitIR> {
    if n_sys < 2 || p < 1 {
        return Err(VpsError::InvalidCircuit(format!(
            "u1 ansatz needs n_sys >= 2 and P >= 1 (got n_sys={n_sys}, P={p})"
        )));
    }
    if electrons == 0 || electrons > n_sys {
        return Err(VpsError::InvalidCircuit(format!(
            "electron count {electrons} outside 1..={n_sys}"
        )));
    }
    let anc = n_sys;
    let mut s = Slots(0);
    let mut gates: Vec<Gate> = (0..electrons).map(Gate::x).collect();
    for _ in 0..p {
        for i in 0..n_sys - 1 {
            gates.push(Gate::rswap(i, i + 1, s.next()));
        }
        for i in 0..n_sys - 1 {
            gates.push(Gate::rzz(i, i + 1, s.next()));
        }
        for w in 0..n_sys {
            gates.push(Gate::rz(w, s.next()));
        }
        if with_ancilla {
            for i in 0..n_sys {
                gates.push(Gate::rswap(i, anc, s.next()));
            }
        }
    }
    if with_ancilla {
        gates.push(Gate::rz(anc, s.next()));
        CircuitIR::new(
            n_sys + 1,
            gates,
            s.0,
            (0..n_sys).collect(),
            vec![anc],
            InitialState::Zero,
            Some(PostSelection::bits(vec![anc], vec![false])?),
        )
    } else {
        CircuitIR::new(n_sys, gates, s.0, (0..n_sys).collect(), vec![], InitialState::Zero, None)
    }
}

/// `build_hea(2·n_sys, p)` with system on even wires and ancillas on odd wires.
pub fn build_thermal_ansatz(n_sys: usize, p: usize) -> Result<CircuitIR> {
    if n_sys < 2 {
        return Err(VpsError::InvalidCircuit(format!("thermal ansatz needs n_sys >= 2 (got {n_sys})")));
    }
    let hea = build_hea(2 * n_sys, p, false)?;
    CircuitIR::new(
        2 * n_sys,
        hea.gates,
        hea.n_params,
        (0..n_sys).map(|k| 2 * k).collect(),
        (0..n_sys).map(|k| 2 * k + 1).collect(),
        InitialState::Zero,
        None,
    )
}

/// Gates rotating the eigenbasis of `obs` (given on system wire indices) onto the computational
/// basis. X uses H; Y uses Rx(−π/4) on a fresh slot. Returns the gates (on the circuit's wires),
/// and the angle values for the new slots starting at `first_slot`.
pub fn basis_rotation_suffix(
    obs: &PauliString,
    system_wires: &[usize],
    first_slot: usize,
) -> Result<(Vec<Gate>, Vec<f64>)> {
    let mut gates = Vec::new();
    let mut angles = Vec::new();
    for &(q, p) in obs.ops() {
        let w = *system_wires.get(q).ok_or(VpsError::WireOutOfRange {
            wire: q,
            n_qubits: system_wires.len(),
        })?;
        match p {
            Pauli::Z => {}
            Pauli::X => gates.push(Gate::h(w)),
            Pauli::Y => {
                gates.push(Gate::rx(w, first_slot + angles.len()));
                angles.push(-std::f64::consts::FRAC_PI_4);
            }
        }
    }
    Ok((gates, angles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{total_spin_squared, total_z, PauliSum};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
    }

    #[test]
    fn hea_parameter_counts() {
        assert_eq!(build_hea(8, 2, false).unwrap().n_params(), 32);
        assert_eq!(build_hea(16, 2, false).unwrap().n_params(), 64);
        assert_eq!(build_hea(8, 4, true).unwrap().n_params(), 96);
        assert!(build_hea(1, 2, false).is_err());
    }

    #[test]
    fn hea_postselect_layout() {
        let c = build_hea_postselect(12, 2).unwrap();
        assert_eq!(c.n_qubits(), 13);
        // Walk the gate list: per block 12 couplings + 13 Rx, plus 3 for the ancilla rotation.
        let walked: usize = c.gates().iter().map(|g| g.slots.len()).sum();
        assert_eq!(walked, 53);
        assert_eq!(c.n_params(), 53);
        let sel = c.post_selection().unwrap();
        assert_eq!(sel.wires, vec![12]);
        assert_eq!(sel.target, SelectionTarget::Bits(vec![false]));

        let small = build_hea_postselect(2, 1).unwrap();
        let psi = small.simulate(&random_params(small.n_params(), 3)).unwrap();
        let (_, prob) = psi.post_select(small.post_selection().unwrap()).unwrap();
        assert!(prob > 0.0 && prob <= 1.0);
    }

    #[test]
    fn su2_layout_and_spin() {
        let c = build_su2_ansatz(12, 2, true).unwrap();
        assert_eq!(c.count_kind(GateKind::Rswap), 26);
        assert_eq!(c.n_params(), 26);
        match &c.post_selection().unwrap().target {
            SelectionTarget::State(v) => assert_eq!(v, &crate::statevec::singlet_amplitudes().to_vec()),
            _ => panic!("expected singlet target"),
        }
        assert!(build_su2_ansatz(5, 1, true).is_err());

        let small = build_su2_ansatz(4, 2, false).unwrap();
        let j2 = total_spin_squared(6).unwrap();
        for seed in 0..5 {
            let psi = small.simulate(&random_params(small.n_params(), seed)).unwrap();
            assert!(psi.expectation(&j2).unwrap().abs() < 1e-8);
        }
        assert_eq!(
            small.post_selection().unwrap().target,
            SelectionTarget::Bits(vec![true, true])
        );
    }

    #[test]
    fn u1_conserves_particle_number() {
        let c = build_u1_ansatz(6, 2, 3, true).unwrap();
        let nz = total_z(c.n_qubits(), &(0..c.n_qubits()).collect::<Vec<_>>()).unwrap();
        let hf = {
            let mut s = StateVector::zero(c.n_qubits()).unwrap();
            for w in 0..3 {
                s.apply(&Gate::x(w), &[]).unwrap();
            }
            s.expectation(&nz).unwrap()
        };
        let sys_z = total_z(6, &(0..6).collect::<Vec<_>>()).unwrap();
        for seed in 0..20 {
            let psi = c.simulate(&random_params(c.n_params(), seed)).unwrap();
            assert!((psi.expectation(&nz).unwrap() - hf).abs() < 1e-9);
            let (sys, _) = psi.post_select(c.post_selection().unwrap()).unwrap();
            assert!((sys.expectation(&sys_z).unwrap() - hf + 1.0).abs() < 1e-9);
        }
        assert!(build_u1_ansatz(4, 1, 0, false).is_err());
        assert!(build_u1_ansatz(4, 1, 5, false).is_err());
    }

    #[test]
    fn u1_large_instance_runs() {
        let c = build_u1_ansatz(8, 8, 4, true).unwrap();
        assert_eq!(c.n_qubits(), 9);
        c.simulate(&random_params(c.n_params(), 1)).unwrap();
    }

    #[test]
    fn thermal_layout() {
        let c = build_thermal_ansatz(8, 2).unwrap();
        assert_eq!(c.n_qubits(), 16);
        assert_eq!(c.n_params(), 64);
        assert_eq!(c.ancilla_wires(), &[1, 3, 5, 7, 9, 11, 13, 15]);
        assert!(c.post_selection().is_none());
    }

    #[test]
    fn every_builder_uses_every_slot() {
        let all = [
            build_hea(5, 3, true).unwrap(),
            build_hea_postselect(4, 2).unwrap(),
            build_su2_ansatz(4, 3, true).unwrap(),
            build_u1_ansatz(4, 2, 2, true).unwrap(),
            build_u1_ansatz(4, 2, 2, false).unwrap(),
            build_thermal_ansatz(3, 2).unwrap(),
        ];
        for c in all {
            assert_eq!(c.distinct_slots(), c.n_params());
        }
    }

    #[test]
    fn text_round_trip() {
        for c in [
            build_hea_postselect(3, 2).unwrap(),
            build_su2_ansatz(4, 1, true).unwrap(),
            build_su2_ansatz(2, 1, false).unwrap(),
            build_thermal_ansatz(2, 1).unwrap(),
        ] {
            let back = CircuitIR::from_text(&c.to_text()).unwrap();
            assert_eq!(back, c);
        }
        assert!(matches!(
            CircuitIR::from_text("circuit v1\nqubits 2\nparams 0\nsystem 0 1\ngate FOO 0\n"),
            Err(VpsError::Parse { line: 5, .. })
        ));
    }

    #[test]
    fn basis_rotation_measures_x_and_y() {
        let c = build_hea(3, 1, true).unwrap();
        let params = random_params(c.n_params(), 8);
        let psi = c.simulate(&params).unwrap();
        for (p, idx) in [(Pauli::X, 1usize), (Pauli::Y, 2)] {
            let obs = PauliString::new(3, &[(0, Pauli::Z), (idx, p)]).unwrap();
            let exact = psi
                .expectation(&PauliSum::from_terms(3, [(1.0, obs.clone())]).unwrap())
                .unwrap();
            let (gates, angles) = basis_rotation_suffix(&obs, c.system_wires(), c.n_params()).unwrap();
            let rotated = c.with_suffix(&gates, angles.len()).unwrap();
            let mut all = params.clone();
            all.extend(angles);
            let out = rotated.simulate(&all).unwrap();
            let zz = PauliString::new(3, &[(0, Pauli::Z), (idx, Pauli::Z)]).unwrap();
            let measured = out.expectation(&PauliSum::from_terms(3, [(1.0, zz)]).unwrap()).unwrap();
            assert!((measured - exact).abs() < 1e-12, "{p:?}");
        }
    }
}
