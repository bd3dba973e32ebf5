//! Weighted `L_p` pseudo-norms, generalized depolarizing semigroups and
//! signed-margin checks of the associated functional inequalities.

use faer::complex_native::c64;
use faer::MatRef;

use crate::error::{Error, Result};
use crate::linalg::{cplx, graded_sandwich_eigenvalues, DensityMatrix, HermitianOperator, Matrix, MatrixFunction, Spectrum};
use crate::tolerance::{CLIP_TOL, INVARIANT_STATE_FLOOR, MLSI_LOWER_BOUND, POSITIVE_FLOOR};

/// Slack on the exponent relations and the time threshold.
const PARAMETER_SLACK: f64 = 1e-12;

/// Depolarizing semigroup with a full-rank invariant state.
#[derive(Debug, Clone)]
pub struct SemigroupSpec {
    invariant_state: DensityMatrix,
    mlsi_lower_bound: f64,
}

impl SemigroupSpec {
    pub fn new(invariant_state: DensityMatrix) -> Result<Self> {
        let m = invariant_state.min_eig();
        if m < INVARIANT_STATE_FLOOR {
            return Err(Error::InvalidState(format!(
                "invariant state has eigenvalue {m:.3e} below {INVARIANT_STATE_FLOOR:.0e}"
            )));
        }
        Ok(SemigroupSpec { invariant_state, mlsi_lower_bound: MLSI_LOWER_BOUND })
    }

    pub fn invariant_state(&self) -> &DensityMatrix {
        &self.invariant_state
    }

    pub fn mlsi_lower_bound(&self) -> f64 {
        self.mlsi_lower_bound
    }

    /// Smallest time at which the reverse hypercontractive bound from `q` to `p` applies.
    pub fn time_threshold(&self, p: f64, q: f64) -> f64 {
        ((p - 1.0) / (q - 1.0)).ln() / (4.0 * self.mlsi_lower_bound)
    }
}

/// Signed outcome of an inequality check: `margin = lhs − rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityMargin {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub instance_digest: String,
}

impl InequalityMargin {
    pub fn new(lhs: f64, rhs: f64, instance_digest: impl Into<String>) -> Self {
        InequalityMargin { lhs, rhs, margin: lhs - rhs, instance_digest: instance_digest.into() }
    }

    /// Margin divided by `max(|lhs|, |rhs|)`, or the raw margin when both vanish.
    pub fn relative_margin(&self) -> f64 {
        let scale = self.lhs.abs().max(self.rhs.abs());
        if scale > 0.0 && scale.is_finite() {
            self.margin / scale
        } else {
            self.margin
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.instance_digest = format!("seed={seed};{}", self.instance_digest);
        self
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("time {t} must be finite and nonnegative")));
    }
    Ok(())
}

/// `‖X‖_{p,σ} = (tr|σ^{1/(2p)} X σ^{1/(2p)}|^p)^{1/p}`.
///
/// For `p < 0` the value is computed as `(tr[(σ^{−1/(2p)} X^{−1} σ^{−1/(2p)})^{−p}])^{1/p}`
/// and `X` must be strictly positive.
pub fn weighted_lp_norm(x: &HermitianOperator, p: f64, sigma: &DensityMatrix) -> Result<f64> {
    if p == 0.0 || !p.is_finite() {
        return Err(Error::Domain(format!("norm exponent {p} must be finite and nonzero")));
    }
    if x.dim() != sigma.dim() {
        return Err(Error::Dimension(format!(
            "operator dimension {} but weight state dimension {}",
            x.dim(),
            sigma.dim()
        )));
    }
    let xs = x.eig();
    let min = xs.values.first().copied().unwrap_or(0.0);
    let inner = if p > 0.0 {
        if min < -CLIP_TOL {
            return Err(Error::Domain(format!("operator has negative eigenvalue {min:.3e}")));
        }
        xs
    } else {
        if min <= POSITIVE_FLOOR {
            return Err(Error::Domain(format!(
                "negative exponent needs a positive operator, smallest eigenvalue {min:.3e}"
            )));
        }
        Spectrum { values: xs.values.iter().map(|v| 1.0 / v).collect(), vectors: xs.vectors }
    };
    let r = p.abs();
    let eig = graded_sandwich_eigenvalues(&sigma.op().eig(), 1.0 / (2.0 * r), &inner);
    let tr: f64 = eig.iter().map(|l| l.abs().powf(r)).sum();
    Ok(tr.powf(1.0 / p))
}

/// `a·X + b·(tr_site[(w)_site X] ⊗ 𝟙_site)` on the subsystem `site`.
fn site_affine(x: MatRef<'_, c64>, dims: &[usize], site: usize, a: f64, b: f64, w: MatRef<'_, c64>) -> Matrix {
    let left: usize = dims[..site].iter().product();
    let d = dims[site];
    let right: usize = dims[site + 1..].iter().product();
    let n = left * d * right;
    let idx = |l: usize, j: usize, r: usize| (l * d + j) * right + r;
    let reduced_dim = left * right;
    let reduced = Matrix::from_fn(reduced_dim, reduced_dim, |row, col| {
        let (l, r) = (row / right, row % right);
        let (l2, r2) = (col / right, col % right);
        let mut acc = cplx(0.0, 0.0);
        for j in 0..d {
            for j2 in 0..d {
                acc += w.read(j2, j) * x.read(idx(l, j, r), idx(l2, j2, r2));
            }
        }
        acc
    });
    Matrix::from_fn(n, n, |row, col| {
        let l = row / (d * right);
        let j = (row / right) % d;
        let r = row % right;
        let l2 = col / (d * right);
        let j2 = (col / right) % d;
        let r2 = col % right;
        let mut v = x.read(row, col) * a;
        if j == j2 {
            v += reduced.read(l * right + r, l2 * right + r2) * b;
        }
        v
    })
}

fn sitewise(x: &HermitianOperator, weights: &[&DensityMatrix], a: f64, b: f64) -> Result<HermitianOperator> {
    let dims = x.subsystem_dims().to_vec();
    if dims.len() != weights.len() || dims.iter().zip(weights).any(|(&d, w)| d != w.dim()) {
        return Err(Error::Dimension(format!(
            "operator subsystems {:?} do not match site states {:?}",
            dims,
            weights.iter().map(|w| w.dim()).collect::<Vec<_>>()
        )));
    }
    let mut m = x.matrix().to_owned();
    for (site, w) in weights.iter().enumerate() {
        m = site_affine(m.as_ref(), &dims, site, a, b, w.op().matrix());
    }
    HermitianOperator::new(m, dims)
}

/// Heisenberg-picture map `X ↦ e^{−t}X + (1−e^{−t}) tr(σX) 𝟙`.
pub fn depolarize_heisenberg(x: &HermitianOperator, t: f64, spec: &SemigroupSpec) -> Result<HermitianOperator> {
    check_time(t)?;
    let sigma = spec.invariant_state();
    if x.dim() != sigma.dim() {
        return Err(Error::Dimension("operator and invariant state differ in dimension".into()));
    }
    let e = (-t).exp();
    let shift = (1.0 - e) * sigma.op().trace_product(x);
    let id = HermitianOperator::identity(x.subsystem_dims());
    x.combine(e, &id, shift)
}

/// Schrödinger-picture map `ρ ↦ e^{−t}ρ + (1−e^{−t}) σ`.
pub fn depolarize_schrodinger(rho: &DensityMatrix, t: f64, spec: &SemigroupSpec) -> Result<DensityMatrix> {
    check_time(t)?;
    let sigma = spec.invariant_state();
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension("state and invariant state differ in dimension".into()));
    }
    let e = (-t).exp();
    DensityMatrix::mixture(&[e, 1.0 - e], &[rho, sigma])
}

/// Tensor product of depolarizing maps, one invariant state per site.
pub fn tensor_depolarize(x: &HermitianOperator, t: f64, site_states: &[DensityMatrix]) -> Result<HermitianOperator> {
    check_time(t)?;
    let e = (-t).exp();
    let refs: Vec<&DensityMatrix> = site_states.iter().collect();
    sitewise(x, &refs, e, 1.0 - e)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("gamma {gamma} must be at least 1")));
    }
    Ok(())
}

/// `T ↦ e^{−t} T + γ(1−e^{−t}) tr[ρ_Y T] 𝟙`.
pub fn psi_map(x: &HermitianOperator, t: f64, gamma: f64, rho_y: &DensityMatrix) -> Result<HermitianOperator> {
    check_time(t)?;
    check_gamma(gamma)?;
    if x.dim() != rho_y.dim() {
        return Err(Error::Dimension("operator and reference state differ in dimension".into()));
    }
    let e = (-t).exp();
    let shift = gamma * (1.0 - e) * rho_y.op().trace_product(x);
    x.combine(e, &HermitianOperator::identity(x.subsystem_dims()), shift)
}

/// `psi_map` applied on every site of an `n`-fold system with the same `ρ_Y`.
pub fn tensor_psi_map(x: &HermitianOperator, t: f64, gamma: f64, rho_y: &DensityMatrix) -> Result<HermitianOperator> {
    check_time(t)?;
    check_gamma(gamma)?;
    let e = (-t).exp();
    let refs = vec![rho_y; x.subsystem_dims().len()];
    sitewise(x, &refs, e, gamma * (1.0 - e))
}

fn product_state(site_states: &[DensityMatrix]) -> Result<DensityMatrix> {
    let (first, rest) = site_states
        .split_first()
        .ok_or_else(|| Error::Dimension("no site states given".into()))?;
    Ok(rest.iter().fold(first.clone(), |acc, s| acc.tensor(s)))
}

/// Reverse hypercontractivity: `‖Φ_{t}(G)‖_{p} ≥ ‖G‖_{q}` for the tensor
/// depolarizing semigroup, weighted by the product of the site states.
pub fn check_rhc(
    g: &HermitianOperator,
    site_states: &[DensityMatrix],
    p: f64,
    q: f64,
    t: f64,
) -> Result<InequalityMargin> {
    if !(p < 1.0) || !(q >= p && q < 1.0) || p == 0.0 || q == 0.0 {
        return Err(Error::Domain(format!("exponents need p <= q < 1, both nonzero; got p={p}, q={q}")));
    }
    let threshold = ((p - 1.0) / (q - 1.0)).ln();
    if t < threshold - PARAMETER_SLACK {
        return Err(Error::Precondition(format!("time {t} below threshold {threshold}")));
    }
    let min = g.min_eigenvalue();
    if min <= POSITIVE_FLOOR {
        return Err(Error::Domain(format!("G must be positive, smallest eigenvalue {min:.3e}")));
    }
    let sigma = product_state(site_states)?;
    let evolved = tensor_depolarize(g, t, site_states)?;
    let lhs = weighted_lp_norm(&evolved, p, &sigma)?;
    let rhs = weighted_lp_norm(g, q, &sigma)?;
    Ok(InequalityMargin::new(lhs, rhs, format!("rhc;n={};p={p};q={q};t={t}", site_states.len())))
}

fn check_psd(a: &HermitianOperator, name: &str) -> Result<()> {
    let m = a.min_eigenvalue();
    if m < -CLIP_TOL {
        return Err(Error::Domain(format!("{name} has negative eigenvalue {m:.3e}")));
    }
    Ok(())
}

fn power_trace(a: &HermitianOperator, r: f64) -> Result<f64> {
    Ok(a.apply(MatrixFunction::Power(r))?.trace())
}

/// Araki-Lieb-Thirring: `tr[(B^{1/2}AB^{1/2})^r] ≥ tr[B^{r/2}A^rB^{r/2}]` for `r ∈ [0,1]`.
pub fn check_alt(a: &HermitianOperator, b: &HermitianOperator, r: f64) -> Result<InequalityMargin> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("exponent {r} outside [0,1]")));
    }
    check_psd(a, "A")?;
    check_psd(b, "B")?;
    let b_half = b.apply(MatrixFunction::Power(0.5))?;
    let lhs = power_trace(&a.sandwich(&b_half)?, r)?;
    let a_r = a.apply(MatrixFunction::Power(r))?;
    let b_r2 = b.apply(MatrixFunction::Power(r / 2.0))?;
    let rhs = a_r.sandwich(&b_r2)?.trace();
    Ok(InequalityMargin::new(lhs, rhs, format!("alt;dim={};r={r}", a.dim())))
}

/// Reverse Hölder: `tr[σ^{1/2}Aσ^{1/2}B] ≥ ‖A‖_{p,σ}‖B‖_{p̂,σ}` with `p̂ = 1/(1−1/p)`.
pub fn check_reverse_holder(
    a: &HermitianOperator,
    b: &HermitianOperator,
    p: f64,
    sigma: &DensityMatrix,
) -> Result<InequalityMargin> {
    if p == 0.0 || !(p < 1.0) {
        return Err(Error::Domain(format!("exponent {p} must be nonzero and below 1")));
    }
    check_psd(a, "A")?;
    let mb = b.min_eigenvalue();
    if mb <= POSITIVE_FLOOR {
        return Err(Error::Domain(format!("B must be positive, smallest eigenvalue {mb:.3e}")));
    }
    let p_hat = 1.0 / (1.0 - 1.0 / p);
    let s_half = sigma.op().apply(MatrixFunction::Power(0.5))?;
    let lhs = a.sandwich(&s_half)?.trace_product(b);
    let rhs = weighted_lp_norm(a, p, sigma)? * weighted_lp_norm(b, p_hat, sigma)?;
    Ok(InequalityMargin::new(lhs, rhs, format!("reverse_holder;dim={};p={p}", a.dim())))
}

/// Unweighted Schatten norm of a PSD operator given by its eigenvalues.
fn schatten(values: &[f64], a: f64) -> f64 {
    let abs = values.iter().map(|l| l.abs());
    if a.is_infinite() {
        abs.fold(0.0, f64::max)
    } else {
        abs.map(|l| l.powf(a)).sum::<f64>().powf(1.0 / a)
    }
}

/// Reverse Araki-Lieb-Thirring:
/// `(tr B^{r/2}A^rB^{r/2})^r ‖A^{(1−r)/2}‖_a^{2r} ‖B^{(1−r)/2}‖_b^{2r} ≥ (tr B^{1/2}AB^{1/2})^r`
/// with `1/(2r) = 1/2 + 1/a + 1/b`; `a` and `b` may be infinite.
pub fn check_reverse_alt(
    a_op: &HermitianOperator,
    b_op: &HermitianOperator,
    r: f64,
    a: f64,
    b: f64,
) -> Result<InequalityMargin> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("exponent {r} outside (0,1]")));
    }
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::Domain(format!("Schatten indices must be positive, got a={a}, b={b}")));
    }
    let relation = 0.5 + 1.0 / a + 1.0 / b - 1.0 / (2.0 * r);
    if relation.abs() > PARAMETER_SLACK {
        return Err(Error::Precondition(format!(
            "indices violate 1/(2r) = 1/2 + 1/a + 1/b by {relation:.3e}"
        )));
    }
    check_psd(a_op, "A")?;
    check_psd(b_op, "B")?;
    let a_r = a_op.apply(MatrixFunction::Power(r))?;
    let b_r2 = b_op.apply(MatrixFunction::Power(r / 2.0))?;
    let core = a_r.sandwich(&b_r2)?.trace().max(0.0);
    let na = schatten(&a_op.apply(MatrixFunction::Power((1.0 - r) / 2.0))?.eigenvalues(), a);
    let nb = schatten(&b_op.apply(MatrixFunction::Power((1.0 - r) / 2.0))?.eigenvalues(), b);
    let lhs = core.powf(r) * na.powf(2.0 * r) * nb.powf(2.0 * r);
    let rhs = a_op.trace_product(b_op).max(0.0).powf(r);
    Ok(InequalityMargin::new(lhs, rhs, format!("reverse_alt;dim={};r={r};a={a};b={b}", a_op.dim())))
}
