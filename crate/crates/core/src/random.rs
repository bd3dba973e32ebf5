//! Seeded random instances: states, unitaries, channels and tests.
//!
//! Everything is driven by `ChaCha8Rng`, so a seed fixes the output on every
//! platform and thread count.

use faer::complex_native::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{abs2, conj, cplx, weighted_outer, DensityMatrix, HermitianOperator, Matrix};

pub type InstanceRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a stream tag and an instance index.
pub fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    let mut h = splitmix(base ^ 0x9e37_79b9_7f4a_7c15);
    for b in tag.bytes() {
        h = splitmix(h ^ b as u64);
    }
    splitmix(h ^ index.wrapping_mul(0xbf58_476d_1ce4_e5b9))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn gaussian_complex(rng: &mut impl Rng) -> c64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    cplx(re, im)
}

/// Haar-random unitary via Gram-Schmidt on a complex Ginibre matrix.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> Matrix {
    random_isometry_columns(dim, dim, rng)
}

/// `dim × cols` matrix with orthonormal columns.
pub fn random_isometry_columns(dim: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let mut vs: Vec<Vec<c64>> = Vec::with_capacity(cols);
    while vs.len() < cols {
        let mut v: Vec<c64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
        for _ in 0..2 {
            for u in &vs {
                let mut ip = cplx(0.0, 0.0);
                for (a, b) in u.iter().zip(&v) {
                    ip += conj(*a) * *b;
                }
                for (x, a) in v.iter_mut().zip(u) {
                    *x -= *a * ip;
                }
            }
        }
        let norm = v.iter().map(|z| abs2(*z)).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        for x in v.iter_mut() {
            *x = *x * (1.0 / norm);
        }
        vs.push(v);
    }
    Matrix::from_fn(dim, cols, |i, j| vs[j][i])
}

/// Uniform (flat Dirichlet) distribution on the `k`-simplex.
pub fn random_distribution(k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= s;
    }
    w
}

/// Full-rank random density matrix with smallest eigenvalue ≥ `floor`.
pub fn random_density(dim: usize, seed: u64, floor: f64) -> Result<DensityMatrix> {
    let mut rng = rng_from_seed(seed);
    random_density_with(dim, floor, &mut rng)
}

pub fn random_density_with(dim: usize, floor: f64, rng: &mut impl Rng) -> Result<DensityMatrix> {
    if dim == 0 {
        return Err(Error::Dimension("dimension must be positive".into()));
    }
    if !(0.0..1.0 / dim as f64).contains(&floor) {
        return Err(Error::Domain(format!(
            "eigenvalue floor {floor} infeasible for dimension {dim} (must be in [0, {}))",
            1.0 / dim as f64
        )));
    }
    if dim == 1 {
        return DensityMatrix::diagonal(&[1.0]);
    }
    let p = random_distribution(dim, rng);
    let slack = 1.0 - dim as f64 * floor;
    let spectrum: Vec<f64> = p.iter().map(|x| floor + slack * x).collect();
    let u = random_unitary(dim, rng);
    let m = weighted_outer(u.as_ref(), &spectrum);
    DensityMatrix::normalized(&HermitianOperator::from_matrix(m)?)
}

pub fn random_pure_state(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    let v: Vec<c64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
    DensityMatrix::pure(&v).expect("gaussian vector is nonzero")
}

/// GUE-like Hermitian matrix.
pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> HermitianOperator {
    let g = Matrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    let h = &g + g.adjoint();
    HermitianOperator::from_matrix(h).expect("symmetrized matrix")
}

/// Positive operator with eigenvalues uniform in `[floor, floor + scale]`.
pub fn random_positive(dim: usize, floor: f64, scale: f64, rng: &mut impl Rng) -> HermitianOperator {
    let spectrum: Vec<f64> = (0..dim).map(|_| floor + scale * rng.gen::<f64>()).collect();
    let u = random_unitary(dim, rng);
    HermitianOperator::from_matrix(weighted_outer(u.as_ref(), &spectrum)).expect("hermitian")
}

/// Random PSD matrix of the given rank (Wishart).
pub fn random_psd(dim: usize, rank: usize, rng: &mut impl Rng) -> HermitianOperator {
    let g = Matrix::from_fn(dim, rank, |_, _| gaussian_complex(rng));
    let m = &g * g.adjoint();
    HermitianOperator::from_matrix(m).expect("hermitian")
}

/// Test operator `0 ≤ T ≤ 𝟙` with eigenvalues uniform in `[0, 1]`.
pub fn random_test(dim: usize, rng: &mut impl Rng) -> HermitianOperator {
    random_positive(dim, 0.0, 1.0, rng)
}

/// Random rank-`rank` orthogonal projector.
pub fn random_projector(dim: usize, rank: usize, rng: &mut impl Rng) -> HermitianOperator {
    let v = random_isometry_columns(dim, rank, rng);
    let w = vec![1.0; rank];
    HermitianOperator::from_matrix(weighted_outer(v.as_ref(), &w)).expect("hermitian")
}

/// Channel `ρ ↦ tr_E(V ρ V†)` with a random isometry `V: ℂ^{d_in} → ℂ^{d_out} ⊗ ℂ^{env}`.
#[derive(Debug, Clone)]
pub struct IsometricChannel {
    isometry: Matrix,
    d_in: usize,
    d_out: usize,
    env: usize,
}

impl IsometricChannel {
    pub fn random(d_in: usize, d_out: usize, env: usize, rng: &mut impl Rng) -> Self {
        assert!(d_out * env >= d_in, "isometry needs d_out * env >= d_in");
        let isometry = random_isometry_columns(d_out * env, d_in, rng);
        IsometricChannel { isometry, d_in, d_out, env }
    }

    pub fn input_dim(&self) -> usize {
        self.d_in
    }

    pub fn apply(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        if x.dim() != self.d_in {
            return Err(Error::Dimension(format!(
                "channel input dimension {} but operator has {}",
                self.d_in,
                x.dim()
            )));
        }
        let big = &(&self.isometry * x.matrix()) * self.isometry.adjoint();
        let op = HermitianOperator::new(big, vec![self.d_out, self.env])?;
        let out = op.partial_trace(&[0])?;
        out.with_dims(vec![self.d_out])
    }

    pub fn apply_state(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        DensityMatrix::new(self.apply(rho.op())?)
    }
}
