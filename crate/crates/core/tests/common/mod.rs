//! Reference implementations on an independent dense backend (nalgebra).

#![allow(dead_code)]

use cqbound::linalg::{DensityMatrix, HermitianOperator};
use nalgebra::{Complex, DMatrix};

pub type CMat = DMatrix<Complex<f64>>;

pub fn to_na(op: &HermitianOperator) -> CMat {
    let d = op.dim();
    CMat::from_fn(d, d, |i, j| {
        let z = op.entry(i, j);
        Complex::new(z.re, z.im)
    })
}

pub fn rows(entries: &[&[(f64, f64)]]) -> Vec<Vec<(f64, f64)>> {
    entries.iter().map(|r| r.to_vec()).collect()
}

/// Hermitian `A + iB` as the real symmetric `[[A, −B], [B, A]]`, whose
/// spectrum is that of `A + iB` with every eigenvalue doubled.
fn embed(m: &CMat) -> DMatrix<f64> {
    let d = m.nrows();
    DMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let z = m[(i % d, j % d)];
        match (i < d, j < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Eigenvalues, each once, in ascending order.
pub fn eigh(m: &CMat) -> (Vec<f64>, ()) {
    let mut w: Vec<f64> = embed(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    w.sort_by(f64::total_cmp);
    (w.into_iter().step_by(2).collect(), ())
}

pub fn funm(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let d = m.nrows();
    let e = embed(m).symmetric_eigen();
    let fw = DMatrix::from_diagonal(&e.eigenvalues.map(|l| f(l)));
    let r = &e.eigenvectors * fw * e.eigenvectors.transpose();
    CMat::from_fn(d, d, |i, j| Complex::new(r[(i, j)], r[(i + d, j)]))
}

pub fn entropy(m: &CMat) -> f64 {
    eigh(m).0.iter().filter(|&&l| l > 1e-15).map(|&l| -l * l.ln()).sum()
}

/// `tr ρ(ln ρ − ln σ)` for full-rank `σ`.
pub fn relative_entropy(rho: &CMat, sigma: &CMat) -> f64 {
    let log_rho = funm(rho, |l| if l > 1e-15 { l.ln() } else { 0.0 });
    let log_sigma = funm(sigma, f64::ln);
    (rho * (log_rho - log_sigma)).trace().re
}

/// `sup_{λ ≥ 0} λ(1−ε) − tr(λρ₀ − ρ₁)₊`: log-spaced scan then golden section.
pub fn np_dual_beta(rho0: &CMat, rho1: &CMat, eps: f64) -> f64 {
    let f = |lam: f64| -> f64 {
        let pos: f64 = eigh(&(rho0 * Complex::new(lam, 0.0) - rho1)).0.iter().filter(|&&l| l > 0.0).sum();
        lam * (1.0 - eps) - pos
    };
    let grid: Vec<f64> = (0..400).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 399.0)).collect();
    let vals: Vec<f64> = grid.iter().map(|&l| f(l)).collect();
    let (i, _) = vals.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    let mut lo = if i == 0 { 0.0 } else { grid[i - 1] };
    let mut hi = grid[(i + 1).min(grid.len() - 1)];
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) >= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f(0.5 * (lo + hi)).max(vals[i]).max(0.0)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn density(rows: &[&[(f64, f64)]]) -> DensityMatrix {
    DensityMatrix::from_rows(&self::rows(rows)).expect("valid density")
}
