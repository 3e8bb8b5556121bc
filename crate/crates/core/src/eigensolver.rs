//! Dense Hermitian eigendecomposition (Householder tridiagonalization + implicit QL)
//! and the exact ground-energy oracle.

use crate::error::{Result, VpsError};
use crate::hamiltonian::{PauliMasks, PauliSum};
use crate::linalg::{CMatrix, C0, C1};
use crate::parallel::{map_indexed, Execution};
use num_complex::Complex64;

/// Largest matrix dimension accepted by [`eigh`].
pub const MAX_DIM: usize = 4096;

/// Largest register handled by [`ground_energy`].
pub const MAX_ED_QUBITS: usize = 12;

const HERMITIAN_TOL: f64 = 1e-8;
const MAX_QL_SWEEPS: usize = 60;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column k is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        (0..self.dim()).map(|r| self.eigenvectors[(r, k)]).collect()
    }

    /// V·diag(f(λ))·V†
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        self.with_weights(&weights)
    }

    /// V·diag(w)·V†
    pub fn with_weights(&self, weights: &[f64]) -> CMatrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let mut out = CMatrix::zeros(n);
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = v[(i, k)] * w;
                if vi == C0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vi * v[(j, k)].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.with_weights(&self.eigenvalues)
    }
}

fn check_input(mat: &CMatrix) -> Result<()> {
    let n = mat.dim();
    if n == 0 {
        return Err(VpsError::InvalidArgument("empty matrix".into()));
    }
    if n > MAX_DIM {
        return Err(VpsError::Capacity {
            what: "eigensolver dimension",
            size: n,
            limit: MAX_DIM,
        });
    }
    if mat.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(VpsError::InvalidArgument("matrix has non-finite entries".into()));
    }
    let defect = mat.hermiticity_defect();
    if defect > HERMITIAN_TOL * mat.max_abs().max(1.0) {
        return Err(VpsError::NotHermitian(defect));
    }
    Ok(())
}

/// Full eigendecomposition of a Hermitian matrix.
pub fn eigh(mat: &CMatrix) -> Result<EigenDecomposition> {
    check_input(mat)?;
    let n = mat.dim();
    let mut a = mat.clone();
    a.symmetrize();

    let (d, e, q) = tridiagonalize(a);

    // Rotate the complex off-diagonal onto the positive reals.
    let mut phase = vec![C1; n];
    let mut off = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let mag = e[k].norm();
        off[k] = mag;
        phase[k + 1] = if mag > 0.0 { phase[k] * (e[k] / mag) } else { phase[k] };
    }

    let mut diag = d;
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql(&mut diag, &mut off, Some(&mut z))?;

    // V = Q·D·Z
    let mut qd = q;
    for r in 0..n {
        for k in 0..n {
            qd[(r, k)] *= phase[k];
        }
    }
    let mut v = CMatrix::zeros(n);
    for r in 0..n {
        let qrow = qd.row(r);
        let vrow = &mut v.as_mut_slice()[r * n..(r + 1) * n];
        for (k, qk) in qrow.iter().enumerate() {
            if *qk == C0 {
                continue;
            }
            let zrow = &z[k * n..(k + 1) * n];
            for (out, zk) in vrow.iter_mut().zip(zrow) {
                *out += qk * zk;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let eigenvalues = order.iter().map(|&k| diag[k]).collect();
    let eigenvectors = CMatrix::from_fn(n, |r, c| v[(r, order[c])]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(mat: &CMatrix) -> Result<Vec<f64>> {
    check_input(mat)?;
    let mut a = mat.clone();
    a.symmetrize();
    let n = a.dim();
    let (mut d, e, _) = tridiagonalize(a);
    let mut off: Vec<f64> = e.iter().map(|z| z.norm()).collect();
    off.resize(n, 0.0);
    tql(&mut d, &mut off, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Reduces a Hermitian matrix to tridiagonal form T = Q†AQ.
/// Returns (diag(T), subdiag(T) with e[k] = T[k+1,k], Q).
fn tridiagonalize(mut a: CMatrix) -> (Vec<f64>, Vec<Complex64>, CMatrix) {
    let n = a.dim();
    let mut q = CMatrix::identity(n);
    let mut v = vec![C0; n];
    let mut p = vec![C0; n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let xnorm = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let ph = if x0.norm() > 0.0 { x0 / x0.norm() } else { C1 };
        let alpha = -ph * xnorm;
        for i in 0..m {
            v[i] = a[(k + 1 + i, k)];
        }
        v[0] -= alpha;
        let vn = v[..m].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for z in &mut v[..m] {
            *z /= vn;
        }
        a[(k + 1, k)] = alpha;
        a[(k, k + 1)] = alpha.conj();
        for i in k + 2..n {
            a[(i, k)] = C0;
            a[(k, i)] = C0;
        }

        // Trailing block: B ← B − 2(v w† + w v†), w = Bv − (v†Bv) v
        let dim = n;
        let data = a.as_mut_slice();
        for i in 0..m {
            let row = &data[(k + 1 + i) * dim + k + 1..(k + 1 + i) * dim + n];
            p[i] = row.iter().zip(&v[..m]).map(|(b, x)| b * x).sum();
        }
        let kk: f64 = v[..m].iter().zip(&p[..m]).map(|(x, y)| (x.conj() * y).re).sum();
        for i in 0..m {
            p[i] -= v[i] * kk;
        }
        for i in 0..m {
            let vi2 = v[i] * 2.0;
            let wi2 = p[i] * 2.0;
            let row = &mut data[(k + 1 + i) * dim + k + 1..(k + 1 + i) * dim + n];
            for (j, b) in row.iter_mut().enumerate() {
                *b -= vi2 * p[j].conj() + wi2 * v[j].conj();
            }
        }

        // Q ← Q·(I − 2 v v†) on columns k+1..n
        let qd = q.as_mut_slice();
        for r in 0..n {
            let row = &mut qd[r * n + k + 1..r * n + n];
            let s: Complex64 = row.iter().zip(&v[..m]).map(|(x, y)| x * y).sum::<Complex64>() * 2.0;
            for (x, y) in row.iter_mut().zip(&v[..m]) {
                *x -= s * y.conj();
            }
        }
    }
    let d = (0..n).map(|i| a[(i, i)].re).collect();
    let e = (0..n.saturating_sub(1)).map(|k| a[(k + 1, k)]).collect();
    (d, e, q)
}

/// Implicit QL on a real symmetric tridiagonal matrix. `e[k]` couples k and k+1;
/// `z` (row-major n×n) accumulates the rotations when present.
fn tql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    if e.len() < n {
        return Err(VpsError::DimensionMismatch(e.len(), n));
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_SWEEPS {
                return Err(VpsError::InvalidArgument("QL iteration did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let row = &mut z[k * n..k * n + n];
                        let fz = row[i + 1];
                        row[i + 1] = s * row[i] + c * fz;
                        row[i] = c * row[i] - s * fz;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvalues of a real symmetric matrix given row-major; consumes the buffer.
fn real_symmetric_eigenvalues(mut a: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let xnorm = (k + 1..n).map(|i| a[i * n + k].powi(2)).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let alpha = if x0 >= 0.0 { -xnorm } else { xnorm };
        for i in 0..m {
            v[i] = a[(k + 1 + i) * n + k];
        }
        v[0] -= alpha;
        let vn = v[..m].iter().map(|x| x * x).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for x in &mut v[..m] {
            *x /= vn;
        }
        a[(k + 1) * n + k] = alpha;
        a[k * n + k + 1] = alpha;
        for i in k + 2..n {
            a[i * n + k] = 0.0;
            a[k * n + i] = 0.0;
        }
        for i in 0..m {
            let row = &a[(k + 1 + i) * n + k + 1..(k + 2 + i) * n];
            p[i] = row.iter().zip(&v[..m]).map(|(b, x)| b * x).sum();
        }
        let kk: f64 = v[..m].iter().zip(&p[..m]).map(|(x, y)| x * y).sum();
        for i in 0..m {
            p[i] -= kk * v[i];
        }
        for i in 0..m {
            let vi2 = 2.0 * v[i];
            let wi2 = 2.0 * p[i];
            let row = &mut a[(k + 1 + i) * n + k + 1..(k + 2 + i) * n];
            for (j, b) in row.iter_mut().enumerate() {
                *b -= vi2 * p[j] + wi2 * v[j];
            }
        }
    }
    for i in 0..n {
        d[i] = a[i * n + i];
        if i + 1 < n {
            e[i] = a[(i + 1) * n + i];
        }
    }
    tql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Connected components of the basis-state graph linked by the Hamiltonian's off-diagonal terms.
fn basis_blocks(h: &PauliSum) -> Vec<Vec<usize>> {
    let dim = 1usize << h.n_qubits();
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    // Terms sharing a flip mask can cancel (XX + YY on |00⟩), so couple b to b^f only when the
    // summed matrix element is nonzero.
    let mut by_flip: std::collections::BTreeMap<usize, Vec<(Complex64, PauliMasks)>> = Default::default();
    for (c, s) in h.terms() {
        let m = s.masks();
        if *c != 0.0 && m.flip != 0 {
            by_flip.entry(m.flip).or_default().push((m.global_phase() * *c, m));
        }
    }
    for (f, group) in by_flip {
        for b in 0..dim {
            let amp: Complex64 = group.iter().map(|(c, m)| *c * m.sign_of(b)).sum();
            if amp.norm() <= 1e-14 {
                continue;
            }
            let (ra, rb) = (find(&mut parent, b), find(&mut parent, b ^ f));
            if ra != rb {
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent[hi] = lo;
            }
        }
    }
    let mut slot = vec![usize::MAX; dim];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for b in 0..dim {
        let r = find(&mut parent, b);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(b);
    }
    blocks
}

/// `owner[b]` is the block index of basis state b; couplings leaving the block cancel in sum.
fn block_min_eigenvalue(h: &PauliSum, block: &[usize], pos: &[usize], owner: &[usize]) -> Result<f64> {
    let me = owner[block[0]];
    let m = block.len();
    let masks: Vec<_> = h.terms().iter().map(|(c, s)| (*c, s.masks())).collect();
    if h.is_real() {
        let mut a = vec![0.0; m * m];
        for (c, pm) in &masks {
            let ph = pm.global_phase().re * c;
            for (col, &b) in block.iter().enumerate() {
                if owner[b ^ pm.flip] != me {
                    continue;
                }
                let row = pos[b ^ pm.flip];
                a[row * m + col] += ph * pm.sign_of(b);
            }
        }
        Ok(real_symmetric_eigenvalues(a, m)?[0])
    } else {
        let mut a = CMatrix::zeros(m);
        for (c, pm) in &masks {
            let ph = pm.global_phase() * *c;
            for (col, &b) in block.iter().enumerate() {
                if owner[b ^ pm.flip] != me {
                    continue;
                }
                let row = pos[b ^ pm.flip];
                a[(row, col)] += ph * pm.sign_of(b);
            }
        }
        Ok(eigvalsh(&a)?[0])
    }
}

/// Lowest eigenvalue of `h` by exact diagonalization.
pub fn ground_energy(h: &PauliSum) -> Result<f64> {
    let n = h.n_qubits();
    if n > MAX_ED_QUBITS {
        return Err(VpsError::Capacity {
            what: "exact-diagonalization qubits",
            size: n,
            limit: MAX_ED_QUBITS,
        });
    }
    let rotated = h.hadamard_rotated();
    let z_blocks = basis_blocks(h);
    let x_blocks = basis_blocks(&rotated);
    let largest = |bs: &[Vec<usize>]| bs.iter().map(Vec::len).max().unwrap_or(0);
    let (op, blocks) = if largest(&x_blocks) < largest(&z_blocks) {
        (&rotated, x_blocks)
    } else {
        (h, z_blocks)
    };
    let mut pos = vec![0usize; 1 << n];
    let mut owner = vec![0usize; 1 << n];
    for (k, block) in blocks.iter().enumerate() {
        for (i, &b) in block.iter().enumerate() {
            pos[b] = i;
            owner[b] = k;
        }
    }
    let mins = map_indexed(blocks.len(), Execution::default(), |k| block_min_eigenvalue(op, &blocks[k], &pos, &owner));
    let mut best = f64::INFINITY;
    for m in mins {
        best = best.min(m?);
    }
    Ok(best)
}
