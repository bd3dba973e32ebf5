//! Numerical tolerances shared across the crate.
//!
//! Every threshold used to classify spectra, validate inputs or cap
//! enumeration lives here so that the checks in different modules agree.

/// Maximum entrywise deviation from Hermiticity accepted (and symmetrized away).
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues in `[-CLIP_TOL, 0)` are treated as zero.
pub const CLIP_TOL: f64 = 1e-10;

/// Eigenvalues at or below this value are outside the support.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Squared overlap with a kernel above which a relative entropy is infinite.
pub const KERNEL_OVERLAP_TOL: f64 = 1e-9;

/// Allowed deviation of a density matrix trace from one.
pub const TRACE_TOL: f64 = 1e-10;

/// Row sums of stochastic kernels must be within this of one.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Probability vectors (source distributions) must sum to one within this.
pub const DISTRIBUTION_TOL: f64 = 1e-10;

/// Messages or posterior rows with smaller probability are dropped.
pub const NEGLIGIBLE_MASS: f64 = 1e-14;

/// Gap below which adjacent eigenvalues are considered degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Smallest eigenvalue required of a semigroup invariant state.
pub const INVARIANT_STATE_FLOOR: f64 = 1e-8;

/// Smallest eigenvalue of a strictly positive operator (negative-p norms, logs of tests).
pub const POSITIVE_FLOOR: f64 = 1e-12;

/// Lower bound on the modified log-Sobolev constant of the depolarizing semigroups.
pub const MLSI_LOWER_BOUND: f64 = 0.25;

/// Resource caps applied to dense constructions and enumerations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    /// Largest total Hilbert-space dimension of a single operator.
    pub max_dim: usize,
    /// Largest joint size `|X|^n * d^n` of a product source.
    pub max_joint_dim: usize,
    /// Largest number of deterministic encoders enumerated.
    pub max_encoders: u64,
    /// Largest number of sequences enumerated for typical sets.
    pub max_sequences: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_dim: 1024,
            max_joint_dim: 1024,
            max_encoders: 2_000_000,
            max_sequences: 1_000_000,
        }
    }
}
