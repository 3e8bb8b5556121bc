//! Hamiltonians as weighted sums of Pauli strings.
//!
//! Qubit 0 is the most significant bit of a computational-basis index, so the
//! bit for wire `w` on `n` qubits is `1 << (n - 1 - w)`.

use crate::error::{Result, VpsError};
use crate::linalg::{CMatrix, C0};
use num_complex::Complex64;
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    fn symbol(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis; identity on every wire not listed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    ops: Vec<(usize, Pauli)>,
    n_qubits: usize,
}

impl PauliString {
    pub fn new(n_qubits: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        if n_qubits == 0 {
            return Err(VpsError::InvalidArgument("n_qubits must be positive".into()));
        }
        let mut sorted = ops.to_vec();
        sorted.sort_by_key(|&(q, _)| q);
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(VpsError::InvalidArgument(format!(
                    "qubit {} appears twice in one Pauli string",
                    w[0].0
                )));
            }
        }
        if let Some(&(q, _)) = sorted.last() {
            if q >= n_qubits {
                return Err(VpsError::WireOutOfRange { wire: q, n_qubits });
            }
        }
        Ok(PauliString { ops: sorted, n_qubits })
    }

    pub fn identity(n_qubits: usize) -> Self {
        PauliString {
            ops: Vec::new(),
            n_qubits,
        }
    }

    pub fn ops(&self) -> &[(usize, Pauli)] {
        &self.ops
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn is_identity(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn is_diagonal(&self) -> bool {
        self.ops.iter().all(|&(_, p)| p == Pauli::Z)
    }

    pub(crate) fn masks(&self) -> PauliMasks {
        let n = self.n_qubits;
        let mut m = PauliMasks::default();
        for &(q, p) in &self.ops {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::X => m.flip |= bit,
                Pauli::Y => {
                    m.flip |= bit;
                    m.sign |= bit;
                    m.n_y += 1;
                }
                Pauli::Z => m.sign |= bit,
            }
        }
        m
    }
}

/// Bit-level action of a Pauli string: P|b⟩ = i^{n_y} (-1)^{|b & sign|} |b ^ flip⟩.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PauliMasks {
    pub flip: usize,
    pub sign: usize,
    pub n_y: u32,
}

impl PauliMasks {
    #[inline]
    pub fn global_phase(&self) -> Complex64 {
        match self.n_y % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    #[inline]
    pub fn sign_of(&self, b: usize) -> f64 {
        if (b & self.sign).count_ones() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ops.is_empty() {
            return write!(f, "I");
        }
        for (k, (q, p)) in self.ops.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}{}", p.symbol(), q)?;
        }
        Ok(())
    }
}

/// Real-weighted sum of Pauli strings on a fixed register. Identical strings are
/// merged on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    terms: Vec<(f64, PauliString)>,
    n_qubits: usize,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Self {
        PauliSum {
            terms: Vec::new(),
            n_qubits,
        }
    }

    pub fn from_terms(n_qubits: usize, terms: impl IntoIterator<Item = (f64, PauliString)>) -> Result<Self> {
        let mut sum = PauliSum::new(n_qubits);
        let mut index = HashMap::new();
        for (c, s) in terms {
            sum.push_indexed(c, s, &mut index)?;
        }
        Ok(sum)
    }

    fn push_indexed(&mut self, coeff: f64, s: PauliString, index: &mut HashMap<PauliString, usize>) -> Result<()> {
        if !coeff.is_finite() {
            return Err(VpsError::InvalidArgument(format!("non-finite coefficient {coeff}")));
        }
        if s.n_qubits != self.n_qubits {
            return Err(VpsError::QubitMismatch {
                expected: self.n_qubits,
                got: s.n_qubits,
            });
        }
        match index.get(&s) {
            Some(&k) => self.terms[k].0 += coeff,
            None => {
                index.insert(s.clone(), self.terms.len());
                self.terms.push((coeff, s));
            }
        }
        Ok(())
    }

    /// Adds a term, merging with an existing identical string.
    pub fn add_term(&mut self, coeff: f64, s: PauliString) -> Result<()> {
        let mut index: HashMap<PauliString, usize> =
            self.terms.iter().enumerate().map(|(k, (_, s))| (s.clone(), k)).collect();
        self.push_indexed(coeff, s, &mut index)
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Σ|c| over all terms.
    pub fn l1_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    /// True when no term carries an odd number of Y factors (real matrix).
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|(_, s)| s.masks().n_y % 2 == 0)
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|(_, s)| s.is_diagonal())
    }

    /// Maps wire `q` of this sum onto wire `wire_map[q]` of an `n_total`-qubit register.
    pub fn embed(&self, wire_map: &[usize], n_total: usize) -> Result<PauliSum> {
        if wire_map.len() != self.n_qubits {
            return Err(VpsError::QubitMismatch {
                expected: self.n_qubits,
                got: wire_map.len(),
            });
        }
        let terms = self
            .terms
            .iter()
            .map(|(c, s)| {
                let ops: Vec<_> = s.ops.iter().map(|&(q, p)| (wire_map[q], p)).collect();
                PauliString::new(n_total, &ops).map(|s| (*c, s))
            })
            .collect::<Result<Vec<_>>>()?;
        PauliSum::from_terms(n_total, terms)
    }

    /// Pads with identities on wires `n_qubits..n_total`.
    pub fn pad_to(&self, n_total: usize) -> Result<PauliSum> {
        if n_total < self.n_qubits {
            return Err(VpsError::QubitMismatch {
                expected: self.n_qubits,
                got: n_total,
            });
        }
        let map: Vec<usize> = (0..self.n_qubits).collect();
        self.embed(&map, n_total)
    }

    /// Conjugation by a Hadamard on every wire: X ↔ Z, Y → −Y.
    pub fn hadamard_rotated(&self) -> PauliSum {
        let terms = self.terms.iter().map(|(c, s)| {
            let mut sign = 1.0;
            let ops: Vec<_> = s
                .ops
                .iter()
                .map(|&(q, p)| match p {
                    Pauli::X => (q, Pauli::Z),
                    Pauli::Z => (q, Pauli::X),
                    Pauli::Y => {
                        sign = -sign;
                        (q, Pauli::Y)
                    }
                })
                .collect();
            (c * sign, PauliString { ops, n_qubits: s.n_qubits })
        });
        PauliSum::from_terms(self.n_qubits, terms).expect("rotation preserves validity")
    }

    /// out += H·ψ
    pub fn apply_add(&self, psi: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(psi.len(), 1 << self.n_qubits);
        for (c, s) in &self.terms {
            let m = s.masks();
            let ph = m.global_phase() * *c;
            if m.flip == 0 && m.sign == 0 {
                for (o, p) in out.iter_mut().zip(psi) {
                    *o += ph * p;
                }
                continue;
            }
            for (b, p) in psi.iter().enumerate() {
                out[b ^ m.flip] += ph * (m.sign_of(b) * p);
            }
        }
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![C0; psi.len()];
        self.apply_add(psi, &mut out);
        out
    }

    /// ⟨ψ|H|ψ⟩ for a vector on exactly `n_qubits` wires (not necessarily normalized).
    pub fn expectation_raw(&self, psi: &[Complex64]) -> Complex64 {
        let mut acc = C0;
        for (c, s) in &self.terms {
            let m = s.masks();
            let mut t = C0;
            for (b, p) in psi.iter().enumerate() {
                t += psi[b ^ m.flip].conj() * (m.sign_of(b) * p);
            }
            acc += t * m.global_phase() * *c;
        }
        acc
    }

    /// Dense 2^n × 2^n matrix (n ≤ 12).
    pub fn to_dense(&self) -> Result<CMatrix> {
        if self.n_qubits > 12 {
            return Err(VpsError::Capacity {
                what: "dense Hamiltonian qubits",
                size: self.n_qubits,
                limit: 12,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = CMatrix::zeros(dim);
        for (c, s) in &self.terms {
            let pm = s.masks();
            let ph = pm.global_phase() * *c;
            for b in 0..dim {
                m[(b ^ pm.flip, b)] += ph * pm.sign_of(b);
            }
        }
        Ok(m)
    }

    /// Line-oriented text form accepted by [`parse_pauli_file`].
    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.n_qubits);
        for (c, s) in &self.terms {
            if s.is_identity() {
                out.push_str(&format!("{c:?}\n"));
            } else {
                out.push_str(&format!("{c:?} {s}\n"));
            }
        }
        out
    }
}

/// Undirected nearest-neighbour bonds; periodic wraps may repeat a bond on short
/// dimensions, which callers merge.
pub fn lattice_edges(rows: usize, cols: usize, periodic: bool, one_dimensional: bool) -> Result<Vec<(usize, usize)>> {
    let n = rows * cols;
    if n < 2 {
        return Err(VpsError::InvalidLattice(format!(
            "{rows}x{cols} lattice has fewer than 2 sites"
        )));
    }
    let mut edges = Vec::new();
    let mut push = |a: usize, b: usize| {
        if a != b {
            edges.push((a.min(b), a.max(b)));
        }
    };
    if one_dimensional {
        for i in 0..n - 1 {
            push(i, i + 1);
        }
        if periodic {
            push(n - 1, 0);
        }
        return Ok(edges);
    }
    for r in 0..rows {
        for c in 0..cols {
            let site = r * cols + c;
            if c + 1 < cols {
                push(site, r * cols + c + 1);
            } else if periodic {
                push(site, r * cols);
            }
            if r + 1 < rows {
                push(site, (r + 1) * cols + c);
            } else if periodic {
                push(site, c);
            }
        }
    }
    Ok(edges)
}

/// H = Σ_⟨ij⟩ Z_i Z_j − Σ_i X_i
pub fn build_tfim(rows: usize, cols: usize, periodic: bool, one_dimensional: bool) -> Result<PauliSum> {
    let edges = lattice_edges(rows, cols, periodic, one_dimensional)?;
    let n = rows * cols;
    let mut terms = Vec::with_capacity(edges.len() + n);
    for (a, b) in edges {
        terms.push((1.0, PauliString::new(n, &[(a, Pauli::Z), (b, Pauli::Z)])?));
    }
    for i in 0..n {
        terms.push((-1.0, PauliString::new(n, &[(i, Pauli::X)])?));
    }
    PauliSum::from_terms(n, terms)
}

/// H = Σ_⟨ij⟩ X_iX_j + Y_iY_j + Z_iZ_j on a square lattice (chain when rows or cols is 1).
pub fn build_heisenberg(rows: usize, cols: usize, periodic: bool) -> Result<PauliSum> {
    let edges = lattice_edges(rows, cols, periodic, false)?;
    let n = rows * cols;
    let mut terms = Vec::with_capacity(3 * edges.len());
    for (a, b) in edges {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            terms.push((1.0, PauliString::new(n, &[(a, p), (b, p)])?));
        }
    }
    PauliSum::from_terms(n, terms)
}

/// J_tot² = (Σ_i σ_i / 2)² = 3n/4 + ½ Σ_{i<j} (X_iX_j + Y_iY_j + Z_iZ_j).
pub fn total_spin_squared(n: usize) -> Result<PauliSum> {
    let mut terms = vec![(0.75 * n as f64, PauliString::identity(n))];
    for i in 0..n {
        for j in i + 1..n {
            for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                terms.push((0.5, PauliString::new(n, &[(i, p), (j, p)])?));
            }
        }
    }
    PauliSum::from_terms(n, terms)
}

/// Σ_{i ∈ wires} Z_i on an `n`-qubit register.
pub fn total_z(n: usize, wires: &[usize]) -> Result<PauliSum> {
    let terms = wires
        .iter()
        .map(|&w| PauliString::new(n, &[(w, Pauli::Z)]).map(|s| (1.0, s)))
        .collect::<Result<Vec<_>>>()?;
    PauliSum::from_terms(n, terms)
}

/// Parses the line-oriented Pauli-sum format:
///
/// ```text
/// # comment
/// qubits 9          (optional; otherwise 1 + max index)
/// -0.81 Z0 Z1
/// 0.7137            (identity term)
/// ```
pub fn parse_pauli_file(text: &str) -> Result<PauliSum> {
    let mut declared: Option<(usize, usize)> = None;
    let mut raw: Vec<(usize, f64, Vec<(usize, Pauli)>)> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tokens = body.split_whitespace();
        let head = tokens.next().expect("non-empty line");
        if head == "qubits" {
            let n = tokens
                .next()
                .and_then(|t| t.parse::<usize>().ok())
                .filter(|&n| n > 0)
                .ok_or_else(|| perr(lineno, "expected `qubits <positive integer>`"))?;
            if tokens.next().is_some() {
                return Err(perr(lineno, "trailing tokens after qubit count"));
            }
            if declared.is_some() {
                return Err(perr(lineno, "duplicate `qubits` header"));
            }
            declared = Some((n, lineno));
            continue;
        }
        let coeff: f64 = head
            .parse()
            .map_err(|_| perr(lineno, &format!("invalid coefficient `{head}`")))?;
        if !coeff.is_finite() {
            return Err(perr(lineno, "coefficient must be finite"));
        }
        let mut ops: Vec<(usize, Pauli)> = Vec::new();
        for tok in tokens {
            let mut chars = tok.chars();
            let p = match chars.next() {
                Some('X') => Pauli::X,
                Some('Y') => Pauli::Y,
                Some('Z') => Pauli::Z,
                _ => return Err(perr(lineno, &format!("malformed token `{tok}`"))),
            };
            let idx_str = chars.as_str();
            if idx_str.is_empty() || !idx_str.bytes().all(|b| b.is_ascii_digit()) {
                return Err(perr(lineno, &format!("malformed token `{tok}`")));
            }
            let q: usize = idx_str
                .parse()
                .map_err(|_| perr(lineno, &format!("malformed token `{tok}`")))?;
            if ops.iter().any(|&(other, _)| other == q) {
                return Err(perr(lineno, &format!("qubit {q} appears twice")));
            }
            ops.push((q, p));
        }
        raw.push((lineno, coeff, ops));
    }

    let max_index = raw.iter().flat_map(|(_, _, ops)| ops.iter().map(|&(q, _)| q)).max();
    let n = match (declared, max_index) {
        (Some((n, _)), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => {
            return Err(perr(
                text.lines().count().max(1),
                "identity-only file needs a `qubits <n>` header",
            ))
        }
    };
    let mut sum = PauliSum::new(n);
    let mut index = HashMap::new();
    for (lineno, coeff, ops) in raw {
        if let Some(&(q, _)) = ops.iter().find(|&&(q, _)| q >= n) {
            return Err(perr(lineno, &format!("qubit index {q} >= declared qubit count {n}")));
        }
        let s = PauliString::new(n, &ops).map_err(|e| perr(lineno, &e.to_string()))?;
        sum.push_indexed(coeff, s, &mut index)?;
    }
    Ok(sum)
}

fn perr(line: usize, msg: &str) -> VpsError {
    VpsError::Parse {
        line,
        msg: msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn count_kind(h: &PauliSum, len: usize) -> usize {
        h.terms().iter().filter(|(_, s)| s.ops().len() == len).count()
    }

    #[test]
    fn tfim_ring_and_grid_counts() {
        let ring = build_tfim(1, 8, true, true).unwrap();
        assert_eq!(count_kind(&ring, 2), 8);
        assert_eq!(count_kind(&ring, 1), 8);

        let grid = build_tfim(4, 3, true, false).unwrap();
        assert_eq!(count_kind(&grid, 2), 24);
        assert_eq!(count_kind(&grid, 1), 12);

        let pair = build_tfim(1, 2, false, true).unwrap();
        assert_eq!(count_kind(&pair, 2), 1);
        assert_eq!(count_kind(&pair, 1), 2);
    }

    #[test]
    fn pbc_grid_edges_match_brute_force() {
        // Oracle: enumerate every site pair and test grid adjacency modulo the lattice size.
        for (rows, cols) in [(4, 3), (3, 3), (3, 5), (2, 4), (2, 2)] {
            let mut expected = std::collections::BTreeSet::new();
            for a in 0..rows * cols {
                for b in a + 1..rows * cols {
                    let (ra, ca) = (a / cols, a % cols);
                    let (rb, cb) = (b / cols, b % cols);
                    let dr = (ra + rows - rb) % rows;
                    let dc = (ca + cols - cb) % cols;
                    let vert = ca == cb && (dr == 1 || dr == rows - 1);
                    let horiz = ra == rb && (dc == 1 || dc == cols - 1);
                    if vert || horiz {
                        expected.insert((a, b));
                    }
                }
            }
            let h = build_tfim(rows, cols, true, false).unwrap();
            let got: std::collections::BTreeSet<_> = h
                .terms()
                .iter()
                .filter(|(_, s)| s.ops().len() == 2)
                .map(|(_, s)| (s.ops()[0].0, s.ops()[1].0))
                .collect();
            assert_eq!(got, expected, "{rows}x{cols}");
            if rows >= 3 && cols >= 3 {
                assert_eq!(got.len(), 2 * rows * cols);
            }
        }
    }

    #[test]
    fn short_periodic_dimension_merges_duplicates() {
        let h = build_tfim(2, 2, true, false).unwrap();
        let zz: Vec<_> = h.terms().iter().filter(|(_, s)| s.ops().len() == 2).collect();
        assert_eq!(zz.len(), 4);
        assert!(zz.iter().all(|(c, _)| *c == 2.0));
    }

    #[test]
    fn heisenberg_counts() {
        assert_eq!(build_heisenberg(1, 2, false).unwrap().len(), 3);
        assert_eq!(build_heisenberg(4, 3, true).unwrap().len(), 72);
        assert_eq!(build_heisenberg(2, 2, false).unwrap().len(), 12);
    }

    #[test]
    fn lattice_rejects_single_site() {
        assert!(matches!(build_tfim(1, 1, true, true), Err(VpsError::InvalidLattice(_))));
        assert!(matches!(build_heisenberg(1, 1, false), Err(VpsError::InvalidLattice(_))));
    }

    #[test]
    fn parse_basic_and_identity() {
        let h = parse_pauli_file("0.5 Z0 Z1\n-1.0 X0").unwrap();
        assert_eq!(h.n_qubits(), 2);
        assert_eq!(h.len(), 2);
        assert_eq!(h.terms()[0].0, 0.5);

        let id = parse_pauli_file("qubits 9\n0.7137").unwrap();
        assert_eq!(id.n_qubits(), 9);
        assert_eq!(id.len(), 1);
        assert!(id.terms()[0].1.is_identity());
    }

    #[test]
    fn parse_merges_and_handles_comments() {
        let h = parse_pauli_file("# header\n0.25 Z0 Z1  # bond\n0.5 Z1 Z0\n\n").unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.terms()[0].0, 0.75);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("0.5 Z0\n1.0 Q1", 2),
            ("0.5 Z0 X0", 1),
            ("qubits 2\n0.1 Z0\n0.2 X2", 3),
            ("abc Z0", 1),
            ("1.0 Z", 1),
            ("1.0 Z-1", 1),
        ];
        for (text, line) in cases {
            match parse_pauli_file(text) {
                Err(VpsError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} -> {other:?}"),
            }
        }
    }

    #[test]
    fn dense_matrix_is_hermitian() {
        let h = build_heisenberg(2, 3, false).unwrap();
        let m = h.to_dense().unwrap();
        assert!(m.hermiticity_defect() < 1e-12);
        let mut with_y = PauliSum::new(3);
        with_y
            .add_term(0.3, PauliString::new(3, &[(0, Pauli::Y), (2, Pauli::X)]).unwrap())
            .unwrap();
        with_y
            .add_term(-1.1, PauliString::new(3, &[(1, Pauli::Y)]).unwrap())
            .unwrap();
        assert!(with_y.to_dense().unwrap().hermiticity_defect() < 1e-12);
        assert!(!with_y.is_real());
    }

    #[test]
    fn hadamard_rotation_preserves_spectrum_trace() {
        let h = build_tfim(1, 4, true, true).unwrap();
        let r = h.hadamard_rotated();
        let a = h.to_dense().unwrap();
        let b = r.to_dense().unwrap();
        // Tr H² is basis independent.
        let ta = a.trace_product(&a).re;
        let tb = b.trace_product(&b).re;
        assert!((ta - tb).abs() < 1e-9);
    }

    fn arb_sum() -> impl Strategy<Value = PauliSum> {
        (1usize..7).prop_flat_map(|n| {
            let term = (
                -5.0f64..5.0,
                proptest::collection::vec(proptest::option::of(0u8..3), n),
            );
            proptest::collection::vec(term, 1..8).prop_map(move |terms| {
                let terms = terms.into_iter().map(|(c, ops)| {
                    let ops: Vec<_> = ops
                        .iter()
                        .enumerate()
                        .filter_map(|(q, p)| p.map(|p| (q, [Pauli::X, Pauli::Y, Pauli::Z][p as usize])))
                        .collect();
                    (c, PauliString::new(n, &ops).unwrap())
                });
                PauliSum::from_terms(n, terms).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn text_round_trip(sum in arb_sum()) {
            let text = sum.to_text();
            let parsed = parse_pauli_file(&text).unwrap();
            prop_assert_eq!(&parsed, &sum);
            prop_assert_eq!(parsed.to_text(), text);
        }

        #[test]
        fn merging_adds_coefficients(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let s = PauliString::new(3, &[(0, Pauli::X), (2, Pauli::Y)]).unwrap();
            let sum = PauliSum::from_terms(3, [(a, s.clone()), (b, s)]).unwrap();
            prop_assert_eq!(sum.len(), 1);
            prop_assert_eq!(sum.terms()[0].0, a + b);
        }
    }
}
