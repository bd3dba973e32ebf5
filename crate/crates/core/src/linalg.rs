//! Dense Hermitian operators, spectral calculus and validated quantum states.
//!
//! [`HermitianOperator`] is the universal carrier: states, tests and
//! observables are all stored as a dense complex matrix together with the
//! dimensions of the tensor factors it acts on. [`DensityMatrix`] adds the
//! positivity and unit-trace invariants.

use faer::complex_native::c64;
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::tolerance::{Limits, CLIP_TOL, DEGENERACY_GAP, HERMITIAN_TOL, SUPPORT_TOL, TRACE_TOL};

pub use faer::complex_native::c64 as Complex;

/// Dense complex matrix type used throughout the crate.
pub type Matrix = Mat<c64>;

#[inline]
pub(crate) fn cplx(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

#[inline]
pub(crate) fn conj(z: c64) -> c64 {
    c64::new(z.re, -z.im)
}

#[inline]
pub(crate) fn abs2(z: c64) -> f64 {
    z.re * z.re + z.im * z.im
}

/// Scalar function applied to the spectrum of a Hermitian operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixFunction {
    /// Natural logarithm; requires a strictly positive spectrum.
    Log,
    /// Natural logarithm on the support, zero on the kernel.
    SupportLog,
    Exp,
    /// `λ ↦ λ^r` on the clipped spectrum. Negative exponents act as
    /// pseudo-inverse powers (kernel mapped to 0); `r = 0` gives the support
    /// projector.
    Power(f64),
    Abs,
}

/// Eigendecomposition `A = V diag(λ) V†` with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(λ)) V†`.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let weights: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        weighted_outer(self.vectors.as_ref(), &weights)
    }

    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Vec<c64> {
        (0..self.dim()).map(|i| self.vectors.read(i, k)).collect()
    }

    /// `⟨v_k| M |v_k⟩` for every eigenvector, real part.
    pub fn diagonal_in_basis(&self, m: MatRef<'_, c64>) -> Vec<f64> {
        let mv = m * self.vectors.as_ref();
        let n = self.dim();
        (0..n)
            .map(|k| {
                let mut acc = 0.0;
                for i in 0..n {
                    let v = self.vectors.read(i, k);
                    let w = mv.read(i, k);
                    acc += v.re * w.re + v.im * w.im;
                }
                acc
            })
            .collect()
    }
}

/// Eigenvalues of `S^a Y S^a` for PSD `S = U diag(s) U†` and `Y = V diag(y) V†`.
///
/// Forms `G = diag(s^a) (U†V) diag(√y)` and orthogonalizes its columns with
/// one-sided Jacobi rotations. Right rotations keep each row's scale, so the
/// small eigenvalues keep their relative accuracy even when `s^a` spans many
/// orders of magnitude. Returned unsorted.
pub(crate) fn graded_sandwich_eigenvalues(s: &Spectrum, a: f64, y: &Spectrum) -> Vec<f64> {
    let n = s.dim();
    let row_scale: Vec<f64> = s.values.iter().map(|&v| if v > 0.0 { v.powf(a) } else { 0.0 }).collect();
    let col_scale: Vec<f64> = y.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let w = s.vectors.adjoint() * &y.vectors;
    let mut g = Matrix::from_fn(n, n, |i, j| w.read(i, j) * cplx(row_scale[i] * col_scale[j], 0.0));
    for _ in 0..80 {
        let mut rotated = false;
        for j in 0..n {
            for k in j + 1..n {
                let (mut alpha, mut beta) = (0.0, 0.0);
                let mut gamma = cplx(0.0, 0.0);
                for i in 0..n {
                    let (x, z) = (g.read(i, j), g.read(i, k));
                    alpha += abs2(x);
                    beta += abs2(z);
                    gamma += conj(x) * z;
                }
                let mag = abs2(gamma).sqrt();
                if mag <= 1e-16 * (alpha * beta).sqrt() || mag == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = cplx(gamma.re / mag, -gamma.im / mag);
                let zeta = (beta - alpha) / (2.0 * mag);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for i in 0..n {
                    let x = g.read(i, j);
                    let z = g.read(i, k) * phase;
                    g.write(i, j, x * cplx(c, 0.0) - z * cplx(sn, 0.0));
                    g.write(i, k, x * cplx(sn, 0.0) + z * cplx(c, 0.0));
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (0..n).map(|j| (0..n).map(|i| abs2(g.read(i, j))).sum()).collect()
}

/// `V diag(w) V†` for a matrix `V` with orthonormal columns.
pub(crate) fn weighted_outer(v: MatRef<'_, c64>, weights: &[f64]) -> Matrix {
    let n = v.nrows();
    let mut scaled = v.to_owned();
    for (j, &w) in weights.iter().enumerate() {
        for i in 0..n {
            let z = scaled.read(i, j);
            scaled.write(i, j, z * w);
        }
    }
    let out = scaled.as_ref() * v.adjoint();
    hermitize(out)
}

/// Averages a matrix with its adjoint and zeroes the imaginary diagonal.
pub(crate) fn hermitize(m: Matrix) -> Matrix {
    let n = m.nrows();
    let mut out = m;
    for i in 0..n {
        let d = out.read(i, i);
        out.write(i, i, cplx(d.re, 0.0));
        for j in (i + 1)..n {
            let a = out.read(i, j);
            let b = conj(out.read(j, i));
            let avg = cplx(0.5 * (a.re + b.re), 0.5 * (a.im + b.im));
            out.write(i, j, avg);
            out.write(j, i, conj(avg));
        }
    }
    out
}

fn hermitian_deviation(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let a = m.read(i, j);
            let b = conj(m.read(j, i));
            dev = dev.max(abs2(a - b).sqrt());
        }
    }
    dev
}

/// Deterministic eigendecomposition of a Hermitian matrix.
///
/// Eigenvectors are phase-normalized so their first non-negligible entry is
/// real positive, and within a degenerate cluster columns are ordered by a
/// lexicographic comparison of their entries.
pub(crate) fn eigh(m: MatRef<'_, c64>) -> Spectrum {
    let n = m.nrows();
    if n == 0 {
        return Spectrum { values: vec![], vectors: Matrix::zeros(0, 0) };
    }
    let evd = m.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s().column_vector();
    let u = evd.u();
    let mut cols: Vec<(f64, Vec<c64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<c64> = (0..n).map(|i| u.read(i, k)).collect();
            normalize_phase(&mut v);
            (s.read(k).re, v)
        })
        .collect();
    cols.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Reorder inside clusters of nearly equal eigenvalues.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && cols[end].0 - cols[end - 1].0 < DEGENERACY_GAP {
            end += 1;
        }
        if end - start > 1 {
            cols[start..end].sort_by(|a, b| lexicographic(&a.1, &b.1));
        }
        start = end;
    }
    let values = cols.iter().map(|c| c.0).collect();
    let vectors = Matrix::from_fn(n, n, |i, k| cols[k].1[i]);
    Spectrum { values, vectors }
}

fn normalize_phase(v: &mut [c64]) {
    let pivot = v.iter().find(|z| abs2(**z) > 1e-18).copied();
    if let Some(p) = pivot {
        let r = abs2(p).sqrt();
        let phase = cplx(p.re / r, -p.im / r);
        for z in v.iter_mut() {
            *z = *z * phase;
        }
    }
}

fn lexicographic(a: &[c64], b: &[c64]) -> std::cmp::Ordering {
    // Quantized keys keep the comparison a total order.
    let key = |z: &c64| ((z.re * 1e9).round() as i64, (z.im * 1e9).round() as i64);
    for (x, y) in a.iter().zip(b) {
        let ord = key(y).cmp(&key(x));
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}

/// Dense Hermitian matrix acting on a tensor product of factors.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    mat: Matrix,
    dims: Vec<usize>,
}

impl HermitianOperator {
    /// Validates Hermiticity (symmetrizing deviations up to
    /// [`HERMITIAN_TOL`]) and the subsystem layout.
    pub fn new(mat: Matrix, dims: Vec<usize>) -> Result<Self> {
        Self::with_limits(mat, dims, &Limits::default())
    }

    pub fn with_limits(mat: Matrix, dims: Vec<usize>, limits: &Limits) -> Result<Self> {
        let n = mat.nrows();
        if mat.ncols() != n {
            return Err(Error::Dimension(format!("matrix is {}x{}, not square", n, mat.ncols())));
        }
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!("invalid subsystem dims {dims:?}")));
        }
        let prod: usize = dims.iter().product();
        if prod != n {
            return Err(Error::Dimension(format!(
                "subsystem dims {dims:?} multiply to {prod}, matrix dim is {n}"
            )));
        }
        if n > limits.max_dim {
            return Err(Error::ResourceCap(format!(
                "operator dimension {n} exceeds cap {}",
                limits.max_dim
            )));
        }
        let deviation = hermitian_deviation(mat.as_ref());
        if deviation > HERMITIAN_TOL || deviation.is_nan() {
            return Err(Error::NotHermitian { deviation, tolerance: HERMITIAN_TOL });
        }
        Ok(HermitianOperator { mat: hermitize(mat), dims })
    }

    /// Single-factor operator.
    pub fn from_matrix(mat: Matrix) -> Result<Self> {
        let n = mat.nrows();
        Self::new(mat, vec![n.max(1)])
    }

    /// Builds from row-major complex entries `(re, im)`.
    pub fn from_rows(rows: &[Vec<(f64, f64)>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("rows have unequal length".into()));
        }
        let mat = Matrix::from_fn(n, n, |i, j| cplx(rows[i][j].0, rows[i][j].1));
        Self::from_matrix(mat)
    }

    /// Real symmetric matrix from row-major entries.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("rows have unequal length".into()));
        }
        Self::from_matrix(Matrix::from_fn(n, n, |i, j| cplx(rows[i][j], 0.0)))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mat = Matrix::from_fn(n, n, |i, j| if i == j { cplx(values[i], 0.0) } else { cplx(0.0, 0.0) });
        HermitianOperator { mat, dims: vec![n] }
    }

    pub fn identity(dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        HermitianOperator { mat: Matrix::identity(n, n), dims: dims.to_vec() }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        HermitianOperator { mat: Matrix::zeros(n, n), dims: dims.to_vec() }
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn outer(psi: &[c64]) -> Self {
        let n = psi.len();
        let mat = Matrix::from_fn(n, n, |i, j| psi[i] * conj(psi[j]));
        HermitianOperator { mat, dims: vec![n] }
    }

    /// Wraps a matrix already known to be Hermitian; only symmetrizes.
    pub(crate) fn from_parts(mat: Matrix, dims: Vec<usize>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), mat.nrows());
        HermitianOperator { mat: hermitize(mat), dims }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn subsystem_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.mat.as_ref()
    }

    pub fn entry(&self, i: usize, j: usize) -> c64 {
        self.mat.read(i, j)
    }

    /// Same entries, new subsystem layout.
    pub fn with_dims(&self, dims: Vec<usize>) -> Result<Self> {
        let prod: usize = dims.iter().product();
        if prod != self.dim() || dims.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!(
                "dims {dims:?} incompatible with dimension {}",
                self.dim()
            )));
        }
        Ok(HermitianOperator { mat: self.mat.clone(), dims })
    }

    pub fn eig(&self) -> Spectrum {
        eigh(self.mat.as_ref())
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .mat
            .selfadjoint_eigenvalues(Side::Lower)
            .into_iter()
            .collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat.read(i, i).re).sum()
    }

    /// `Re tr(A B)`, computed entrywise.
    pub fn trace_product(&self, other: &HermitianOperator) -> f64 {
        trace_product(self.matrix(), other.matrix())
    }

    pub fn apply(&self, f: MatrixFunction) -> Result<HermitianOperator> {
        let spec = self.eig();
        let mat = apply_spectral(&spec, f)?;
        Ok(HermitianOperator { mat, dims: self.dims.clone() })
    }

    pub fn scale(&self, k: f64) -> HermitianOperator {
        let n = self.dim();
        let mat = Matrix::from_fn(n, n, |i, j| self.mat.read(i, j) * k);
        HermitianOperator { mat, dims: self.dims.clone() }
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        self.check_same_dim(other)?;
        Ok(HermitianOperator { mat: &self.mat + &other.mat, dims: self.dims.clone() })
    }

    pub fn sub(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        self.check_same_dim(other)?;
        Ok(HermitianOperator { mat: &self.mat - &other.mat, dims: self.dims.clone() })
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &HermitianOperator, b: f64) -> Result<HermitianOperator> {
        self.check_same_dim(other)?;
        let n = self.dim();
        let mat = Matrix::from_fn(n, n, |i, j| self.mat.read(i, j) * a + other.mat.read(i, j) * b);
        Ok(HermitianOperator { mat, dims: self.dims.clone() })
    }

    /// `B self B` for Hermitian `B`.
    pub fn sandwich(&self, b: &HermitianOperator) -> Result<HermitianOperator> {
        self.check_same_dim(b)?;
        let m = &(&b.mat * &self.mat) * &b.mat;
        Ok(HermitianOperator::from_parts(m, self.dims.clone()))
    }

    /// Matrix product `self · other` (not Hermitian in general).
    pub fn product(&self, other: &HermitianOperator) -> Result<Matrix> {
        self.check_same_dim(other)?;
        Ok(&self.mat * &other.mat)
    }

    pub fn max_abs_diff(&self, other: &HermitianOperator) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        let n = self.dim();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                m = m.max(abs2(self.mat.read(i, j) - other.mat.read(i, j)).sqrt());
            }
        }
        m
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, &l| acc.max(l.abs()))
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    fn check_same_dim(&self, other: &HermitianOperator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "operators of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }

    /// Kronecker product with concatenated subsystem dims.
    pub fn tensor(&self, other: &HermitianOperator) -> HermitianOperator {
        let mat = kron(self.matrix(), other.matrix());
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        HermitianOperator { mat, dims }
    }

    /// Tensor product of a list of operators.
    pub fn tensor_all(ops: &[&HermitianOperator]) -> Result<HermitianOperator> {
        let (first, rest) = ops
            .split_first()
            .ok_or_else(|| Error::Dimension("empty tensor product".into()))?;
        let mut acc = (*first).clone();
        for op in rest {
            acc = acc.tensor(op);
        }
        Ok(acc)
    }

    /// Traces out every subsystem not listed in `keep`.
    ///
    /// `keep` must be strictly increasing; the result keeps the subsystems
    /// in their original order. An empty `keep` returns the 1×1 total trace.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<HermitianOperator> {
        let k = self.dims.len();
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&i| i >= k) {
            return Err(Error::Dimension(format!(
                "invalid subsystem selection {keep:?} for {k} subsystems"
            )));
        }
        if keep.is_empty() {
            let t = self.trace();
            return Ok(HermitianOperator { mat: Matrix::from_fn(1, 1, |_, _| cplx(t, 0.0)), dims: vec![1] });
        }
        let traced: Vec<usize> = (0..k).filter(|i| !keep.contains(i)).collect();
        let kept_dims: Vec<usize> = keep.iter().map(|&i| self.dims[i]).collect();
        let traced_dims: Vec<usize> = traced.iter().map(|&i| self.dims[i]).collect();
        let dk: usize = kept_dims.iter().product();
        let dt: usize = traced_dims.iter().product();
        let strides = strides(&self.dims);

        // Offsets of every kept / traced multi-index in the full index.
        let kept_offsets = offsets(&kept_dims, keep, &strides);
        let traced_offsets = offsets(&traced_dims, &traced, &strides);

        let mut out = Matrix::zeros(dk, dk);
        for (a, &ra) in kept_offsets.iter().enumerate() {
            for (b, &rb) in kept_offsets.iter().enumerate() {
                let mut acc = cplx(0.0, 0.0);
                for &t in traced_offsets.iter() {
                    acc += self.mat.read(ra + t, rb + t);
                }
                out.write(a, b, acc);
            }
        }
        let _ = dt;
        Ok(HermitianOperator::from_parts(out, kept_dims))
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Flat offsets of all multi-indices over `sub_dims` placed at `positions`.
fn offsets(sub_dims: &[usize], positions: &[usize], strides: &[usize]) -> Vec<usize> {
    let total: usize = sub_dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; sub_dims.len()];
    for _ in 0..total {
        out.push(idx.iter().zip(positions).map(|(&i, &p)| i * strides[p]).sum());
        for pos in (0..idx.len()).rev() {
            idx[pos] += 1;
            if idx[pos] < sub_dims[pos] {
                break;
            }
            idx[pos] = 0;
        }
    }
    out
}

pub(crate) fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Matrix {
    let (m, n) = (a.nrows(), b.nrows());
    Matrix::from_fn(m * n, m * n, |r, c| a.read(r / n, c / n) * b.read(r % n, c % n))
}

/// `Re tr(A B)` without forming the product.
pub(crate) fn trace_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a.read(i, j);
            let y = b.read(j, i);
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

fn clip(l: f64) -> Result<f64> {
    if l < -CLIP_TOL {
        Err(Error::Domain(format!("negative eigenvalue {l:.3e} below -{CLIP_TOL:.0e}")))
    } else {
        Ok(l.max(0.0))
    }
}

pub(crate) fn apply_spectral(spec: &Spectrum, f: MatrixFunction) -> Result<Matrix> {
    let weights: Vec<f64> = match f {
        MatrixFunction::Exp => spec.values.iter().map(|l| l.exp()).collect(),
        MatrixFunction::Abs => spec.values.iter().map(|l| l.abs()).collect(),
        MatrixFunction::Log => {
            if let Some(&l) = spec.values.iter().find(|&&l| l <= SUPPORT_TOL) {
                return Err(Error::Domain(format!(
                    "logarithm of operator with eigenvalue {l:.3e} <= {SUPPORT_TOL:.0e}"
                )));
            }
            spec.values.iter().map(|l| l.ln()).collect()
        }
        MatrixFunction::SupportLog => {
            let clipped = spec.values.iter().map(|&l| clip(l)).collect::<Result<Vec<_>>>()?;
            if clipped.iter().all(|&l| l <= SUPPORT_TOL) {
                return Err(Error::Domain("logarithm of the zero operator".into()));
            }
            clipped
                .iter()
                .map(|&l| if l > SUPPORT_TOL { l.ln() } else { 0.0 })
                .collect()
        }
        MatrixFunction::Power(r) => {
            let clipped = spec.values.iter().map(|&l| clip(l)).collect::<Result<Vec<_>>>()?;
            clipped.iter().map(|&l| spectral_power(l, r)).collect()
        }
    };
    Ok(weighted_outer(spec.vectors.as_ref(), &weights))
}

#[inline]
pub(crate) fn spectral_power(l: f64, r: f64) -> f64 {
    if l > SUPPORT_TOL {
        if r == 0.0 {
            1.0
        } else {
            l.powf(r)
        }
    } else {
        0.0
    }
}

/// Positive semidefinite operator with unit trace.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    op: HermitianOperator,
    min_eig: f64,
}

impl DensityMatrix {
    /// Checks positivity (eigenvalues ≥ −1e−10, clipped to zero) and unit trace.
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let trace = op.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {trace:.12} differs from 1")));
        }
        let spec = op.eig();
        let min = spec.values.first().copied().unwrap_or(0.0);
        if min < -CLIP_TOL {
            return Err(Error::InvalidState(format!(
                "eigenvalue {min:.3e} below -{CLIP_TOL:.0e}"
            )));
        }
        let op = if min < 0.0 {
            let mat = spec.reconstruct(|l| l.max(0.0));
            HermitianOperator { mat, dims: op.dims }
        } else {
            op
        };
        Ok(DensityMatrix { op, min_eig: min.max(0.0) })
    }

    /// Normalizes a PSD operator by its trace.
    pub fn normalized(op: &HermitianOperator) -> Result<Self> {
        let t = op.trace();
        if t <= 0.0 {
            return Err(Error::InvalidState(format!("nonpositive trace {t:.3e}")));
        }
        let scaled = op.scale(1.0 / t);
        DensityMatrix::new(scaled)
    }

    pub fn from_rows(rows: &[Vec<(f64, f64)>]) -> Result<Self> {
        DensityMatrix::new(HermitianOperator::from_rows(rows)?)
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        DensityMatrix::new(HermitianOperator::diagonal(probs))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let p = vec![1.0 / dim as f64; dim];
        DensityMatrix { op: HermitianOperator::diagonal(&p), min_eig: 1.0 / dim as f64 }
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
    pub fn pure(psi: &[c64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| abs2(*z)).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let s = 1.0 / norm2.sqrt();
        let v: Vec<c64> = psi.iter().map(|z| *z * s).collect();
        DensityMatrix::new(HermitianOperator::outer(&v))
    }

    /// Computational basis state `|k⟩⟨k|` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut p = vec![0.0; dim];
        p[k] = 1.0;
        DensityMatrix { op: HermitianOperator::diagonal(&p), min_eig: 0.0 }
    }

    pub(crate) fn from_trusted(op: HermitianOperator) -> Self {
        let min_eig = op.min_eigenvalue().max(0.0);
        DensityMatrix { op, min_eig }
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_op(self) -> HermitianOperator {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn min_eig(&self) -> f64 {
        self.min_eig
    }

    pub fn is_full_rank(&self) -> bool {
        self.min_eig > SUPPORT_TOL
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { op: self.op.tensor(&other.op), min_eig: self.min_eig * other.min_eig }
    }

    pub fn tensor_power(&self, n: usize) -> DensityMatrix {
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.tensor(self);
        }
        acc
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_trusted(self.op.partial_trace(keep)?))
    }

    /// Convex combination `Σ wᵢ ρᵢ`; weights must be a distribution.
    pub fn mixture(weights: &[f64], states: &[&DensityMatrix]) -> Result<DensityMatrix> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::Dimension("mixture weights and states differ in length".into()));
        }
        let n = states[0].dim();
        if states.iter().any(|s| s.dim() != n) {
            return Err(Error::Dimension("mixture of states with different dimensions".into()));
        }
        let mut mat = Matrix::zeros(n, n);
        for (w, s) in weights.iter().zip(states) {
            if *w != 0.0 {
                mat = &mat + &(faer::scale(cplx(*w, 0.0)) * s.op.matrix());
            }
        }
        DensityMatrix::new(HermitianOperator::from_parts(mat, states[0].op.dims.clone()))
    }
}

impl AsRef<HermitianOperator> for DensityMatrix {
    fn as_ref(&self) -> &HermitianOperator {
        &self.op
    }
}

/// Weighted sum `Σ wᵢ Aᵢ` of operators of equal dimension.
pub(crate) fn weighted_sum(weights: &[f64], ops: &[&HermitianOperator]) -> Matrix {
    let n = ops[0].dim();
    let mut mat = Matrix::zeros(n, n);
    for (w, op) in weights.iter().zip(ops) {
        if *w == 0.0 {
            continue;
        }
        for j in 0..n {
            for i in 0..n {
                let z = mat.read(i, j) + op.mat.read(i, j) * *w;
                mat.write(i, j, z);
            }
        }
    }
    mat
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> HermitianOperator {
        HermitianOperator::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn pauli_z() -> HermitianOperator {
        HermitianOperator::diagonal(&[1.0, -1.0])
    }

    #[test]
    fn tensor_identity_and_diagonal() {
        let i2 = HermitianOperator::identity(&[2]);
        let i4 = i2.tensor(&i2);
        assert_eq!(i4.subsystem_dims(), &[2, 2]);
        assert!(i4.max_abs_diff(&HermitianOperator::identity(&[4])) == 0.0);

        let a = HermitianOperator::diagonal(&[1.0, 0.0]);
        let b = HermitianOperator::diagonal(&[0.5, 0.5]);
        let ab = a.tensor(&b);
        assert!(ab.max_abs_diff(&HermitianOperator::diagonal(&[0.5, 0.5, 0.0, 0.0])) == 0.0);
    }

    #[test]
    fn tensor_pauli_index_formula() {
        let xz = pauli_x().tensor(&pauli_z());
        assert_eq!(xz.entry(0, 2).re, 1.0);
        assert_eq!(xz.entry(1, 3).re, -1.0);
        assert_eq!(xz.entry(0, 0).re, 0.0);
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityMatrix::pure(&[cplx(s, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(s, 0.0)])
            .unwrap()
            .into_op()
            .with_dims(vec![2, 2])
            .unwrap();
        let a = bell.partial_trace(&[0]).unwrap();
        assert!(a.max_abs_diff(&HermitianOperator::diagonal(&[0.5, 0.5])) < 1e-15);
        let b = bell.partial_trace(&[1]).unwrap();
        assert!(b.max_abs_diff(&HermitianOperator::diagonal(&[0.5, 0.5])) < 1e-15);
    }

    #[test]
    fn partial_trace_total_and_bad_index() {
        let op = HermitianOperator::diagonal(&[1.0, 2.0, 3.0, 4.0]).with_dims(vec![2, 2]).unwrap();
        let t = op.partial_trace(&[]).unwrap();
        assert_eq!(t.dim(), 1);
        assert_eq!(t.trace(), 10.0);
        assert!(matches!(op.partial_trace(&[2]), Err(Error::Dimension(_))));
        assert!(matches!(op.partial_trace(&[1, 0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn partial_trace_middle_factor() {
        // diag over (2,3,2); tracing the middle factor sums groups of 3.
        let vals: Vec<f64> = (0..12).map(|k| k as f64).collect();
        let op = HermitianOperator::diagonal(&vals).with_dims(vec![2, 3, 2]).unwrap();
        let r = op.partial_trace(&[0, 2]).unwrap();
        // index (a, m, c) -> 6a + 2m + c
        let expect = [0.0 + 2.0 + 4.0, 1.0 + 3.0 + 5.0, 6.0 + 8.0 + 10.0, 7.0 + 9.0 + 11.0];
        assert!(r.max_abs_diff(&HermitianOperator::diagonal(&expect)) < 1e-12);
    }

    #[test]
    fn eig_examples() {
        let e = HermitianOperator::diagonal(&[3.0, 1.0]).eig();
        assert_eq!(e.values, vec![1.0, 3.0]);
        let e = pauli_x().eig();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        let e = HermitianOperator::identity(&[3]).eig();
        assert!(e.values.iter().all(|&l| (l - 1.0).abs() < 1e-14));
    }

    #[test]
    fn eig_is_deterministic_on_degenerate_input() {
        let op = HermitianOperator::identity(&[4]).scale(0.25);
        let a = op.eig();
        let b = op.eig();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a.vectors.read(i, j), b.vectors.read(i, j));
            }
        }
    }

    #[test]
    fn matrix_function_examples() {
        let z = HermitianOperator::zeros(&[2]);
        let e = z.apply(MatrixFunction::Exp).unwrap();
        assert!(e.max_abs_diff(&HermitianOperator::identity(&[2])) < 1e-15);

        let d = HermitianOperator::diagonal(&[1f64.exp(), 2f64.exp()]);
        let l = d.apply(MatrixFunction::Log).unwrap();
        assert!(l.max_abs_diff(&HermitianOperator::diagonal(&[1.0, 2.0])) < 1e-14);

        let s = HermitianOperator::diagonal(&[4.0, 9.0]).apply(MatrixFunction::Power(0.5)).unwrap();
        assert!(s.max_abs_diff(&HermitianOperator::diagonal(&[2.0, 3.0])) < 1e-14);
    }

    #[test]
    fn matrix_function_domain_errors() {
        let z = HermitianOperator::zeros(&[2]);
        assert!(matches!(z.apply(MatrixFunction::Log), Err(Error::Domain(_))));
        assert!(matches!(z.apply(MatrixFunction::SupportLog), Err(Error::Domain(_))));
        let neg = HermitianOperator::diagonal(&[1.0, -1e-6]);
        assert!(matches!(neg.apply(MatrixFunction::Power(0.5)), Err(Error::Domain(_))));
        let tiny = HermitianOperator::diagonal(&[1.0, -1e-11]);
        let r = tiny.apply(MatrixFunction::Power(0.5)).unwrap();
        assert_eq!(r.entry(1, 1).re, 0.0);
        let sl = HermitianOperator::diagonal(&[1f64.exp(), 0.0]).apply(MatrixFunction::SupportLog).unwrap();
        assert!(sl.max_abs_diff(&HermitianOperator::diagonal(&[1.0, 0.0])) < 1e-14);
    }

    #[test]
    fn hermiticity_tolerance() {
        let ok = HermitianOperator::from_rows(&[
            vec![(1.0, 0.0), (0.5, 1e-11)],
            vec![(0.5, 0.0), (1.0, 0.0)],
        ])
        .unwrap();
        assert_eq!(ok.entry(0, 1).im, -ok.entry(1, 0).im);
        let bad = HermitianOperator::from_rows(&[
            vec![(1.0, 0.0), (0.5, 1e-6)],
            vec![(0.5, 0.0), (1.0, 0.0)],
        ]);
        assert!(matches!(bad, Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn dimension_cap() {
        let limits = Limits { max_dim: 4, ..Limits::default() };
        let r = HermitianOperator::with_limits(Matrix::identity(8, 8), vec![8], &limits);
        assert!(matches!(r, Err(Error::ResourceCap(_))));
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::diagonal(&[0.5, 0.4]).is_err());
        assert!(DensityMatrix::diagonal(&[1.1, -0.1]).is_err());
        let r = DensityMatrix::diagonal(&[1.0 + 5e-11, -5e-11]).unwrap();
        assert_eq!(r.min_eig(), 0.0);
        assert!(r.op().min_eigenvalue() >= 0.0);
    }
}
