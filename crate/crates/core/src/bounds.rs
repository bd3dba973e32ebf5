//! Evaluators for the converse bounds: rate-constrained exponents, the
//! second-order strong-converse bound, the key inequality, image-size and
//! source-coding bounds.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::bottleneck::{delta_star, delta_star_with, delta_with, product_states, DeltaInstance, DeltaOptions, KernelOptions};
use crate::entropy::{classical_mutual_information, relative_entropy, relative_entropy_psd, von_neumann_entropy};
use crate::error::{Error, Result};
use crate::hypothesis::{
    message_count, output_ratio_constant, product_source_with_limits, sequence_digits, validate_test, CQSource,
    StochasticChannel,
};
use crate::linalg::{weighted_sum, DensityMatrix, HermitianOperator};
use crate::semigroup::{tensor_psi_map, InequalityMargin};
use crate::tolerance::{Limits, NEGLIGIBLE_MASS};

/// A bound split into first-, second- and third-order contributions (nats).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub name: String,
    pub first_order: f64,
    pub second_order: f64,
    pub third_order: f64,
    pub total: f64,
    pub constants: BTreeMap<String, f64>,
    pub witnesses: BTreeMap<String, String>,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, first_order: f64, second_order: f64, third_order: f64) -> Self {
        BoundReport {
            name: name.into(),
            first_order,
            second_order,
            third_order,
            total: first_order + second_order + third_order,
            constants: BTreeMap::new(),
            witnesses: BTreeMap::new(),
        }
    }

    pub fn with_constant(mut self, key: impl Into<String>, value: f64) -> Self {
        self.constants.insert(key.into(), value);
        self
    }

    pub fn with_witness(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.witnesses.insert(key.into(), value.into());
        self
    }
}

/// Step of the Lagrange-multiplier grid `c ∈ {1, 1.25, …, 16}`.
const MULTIPLIER_STEP: f64 = 0.25;
const MULTIPLIER_MAX: f64 = 16.0;
const GOLDEN_ITERATIONS: usize = 24;

/// `(1/n) D(σ_{W Y^n} ‖ σ̃_{W Y^n})` maximized over deterministic encoders
/// `𝒳^n → 𝒲` with `|𝒲| = max(1, ⌊e^{n r₁}⌋)`.
///
/// The alternative has the same letter distribution as `src` and outputs
/// `alt_states`. Only an unconstrained receiver (`r2_infinite`) is supported.
pub fn theta_n_lower(src: &CQSource, alt_states: &[DensityMatrix], n: usize, r1: f64, r2_infinite: bool) -> Result<BoundReport> {
    theta_n_lower_with_limits(src, alt_states, n, r1, r2_infinite, &Limits::default())
}

pub fn theta_n_lower_with_limits(
    src: &CQSource,
    alt_states: &[DensityMatrix],
    n: usize,
    r1: f64,
    r2_infinite: bool,
    limits: &Limits,
) -> Result<BoundReport> {
    if !r2_infinite {
        return Err(Error::Precondition("finite receiver rate needs quantum compression, which is not evaluated".into()));
    }
    if alt_states.len() != src.size() {
        return Err(Error::Dimension(format!("{} alternative states for {} letters", alt_states.len(), src.size())));
    }
    if alt_states.iter().any(|s| s.dim() != src.d_y()) {
        return Err(Error::Dimension("alternative states differ in dimension from the source".into()));
    }
    if n == 0 {
        return Err(Error::Domain("block length must be positive".into()));
    }
    if !(r1 >= 0.0) {
        return Err(Error::Domain(format!("rate {r1} must be nonnegative")));
    }
    let src_n = product_source_with_limits(src, n, limits)?;
    let alt_n = product_states(alt_states, n);
    let seqs = src_n.size();
    let w = message_count(n, r1);
    let dims = src_n.rho_y().op().subsystem_dims().to_vec();
    let null_refs: Vec<&HermitianOperator> = src_n.states().iter().map(|s| s.op()).collect();
    let alt_refs: Vec<&HermitianOperator> = alt_n.iter().map(|s| s.op()).collect();

    let evaluate = |map: &[usize], w_size: usize| -> Result<f64> {
        let mut total = 0.0;
        for m in 0..w_size {
            let weights: Vec<f64> = (0..seqs).map(|x| if map[x] == m { src_n.q_x()[x] } else { 0.0 }).collect();
            if weights.iter().sum::<f64>() <= NEGLIGIBLE_MASS {
                continue;
            }
            let a = HermitianOperator::new(weighted_sum(&weights, &null_refs), dims.clone())?;
            let b = HermitianOperator::new(weighted_sum(&weights, &alt_refs), dims.clone())?;
            total += relative_entropy_psd(&a, &b)?.nats;
        }
        Ok(total)
    };

    let (best, count, label) = if w >= seqs {
        let map: Vec<usize> = (0..seqs).collect();
        (evaluate(&map, seqs)?, 1u64, "identity".to_string())
    } else {
        let count = (w as f64).powi(seqs as i32);
        if count > limits.max_encoders as f64 {
            return Err(Error::ResourceCap(format!(
                "{count} deterministic encoders exceed cap {}; need max_encoders >= {count}",
                limits.max_encoders
            )));
        }
        let count = count as u64;
        let values: Vec<Result<f64>> =
            (0..count).into_par_iter().map(|e| evaluate(&sequence_digits(e as usize, w, seqs), w)).collect();
        let mut best: Option<(u64, f64)> = None;
        for (e, v) in values.into_iter().enumerate() {
            let v = v?;
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((e as u64, v));
            }
        }
        let (idx, v) = best.expect("at least one encoder");
        let label = sequence_digits(idx as usize, w, seqs).iter().map(|m| m.to_string()).collect::<String>();
        (v, count, label)
    };
    Ok(BoundReport::new("theta_n_lower", best / n as f64, 0.0, 0.0)
        .with_constant("messages", w as f64)
        .with_constant("encoders_searched", count as f64)
        .with_witness("encoder_map", label))
}

/// `(I(U;Y), I(U;X))` for `U` produced from `X` by a classical channel.
pub fn stein_independence_objective(src: &CQSource, chan: &StochasticChannel) -> Result<(f64, f64)> {
    if chan.in_size() != src.size() {
        return Err(Error::Dimension(format!(
            "channel has {} inputs for {} source letters",
            chan.in_size(),
            src.size()
        )));
    }
    let refs: Vec<&DensityMatrix> = src.states().iter().collect();
    let mut joint = vec![vec![0.0; chan.out_size()]; src.size()];
    let mut cond = 0.0;
    for u in 0..chan.out_size() {
        let weights: Vec<f64> = (0..src.size()).map(|x| src.q_x()[x] * chan.kernel()[x][u]).collect();
        for (x, w) in weights.iter().enumerate() {
            joint[x][u] = *w;
        }
        let pu: f64 = weights.iter().sum();
        if pu <= NEGLIGIBLE_MASS {
            continue;
        }
        let post: Vec<f64> = weights.iter().map(|w| w / pu).collect();
        cond += pu * von_neumann_entropy(&DensityMatrix::mixture(&post, &refs)?).nats;
    }
    let i_uy = von_neumann_entropy(src.rho_y()).nats - cond;
    let i_ux = classical_mutual_information(&joint).nats;
    Ok((i_uy, i_ux))
}

/// Lagrangian relaxation `inf_{c ≥ 1} (Δ*(Q, Λ, ν, c) + r)/c`.
///
/// The grid values of `Δ*` do not depend on `r`, so one curve serves every
/// rate. The limit `c → ∞` equals `Σ Q(x) D(ρ^x‖ν)`, attained by `U = X`,
/// and is included as a candidate.
#[derive(Debug, Clone)]
pub struct DualCurve {
    q: Vec<f64>,
    states: Vec<DensityMatrix>,
    nu: HermitianOperator,
    u_size: usize,
    opts: KernelOptions,
    /// `(c, Δ*(c))` on the multiplier grid.
    grid: Vec<(f64, f64)>,
    limit: f64,
}

impl DualCurve {
    pub fn new(q: &[f64], states: &[DensityMatrix], nu: &HermitianOperator, u_size: usize, opts: &KernelOptions) -> Result<Self> {
        let steps = ((MULTIPLIER_MAX - 1.0) / MULTIPLIER_STEP).round() as usize;
        let cs: Vec<f64> = (0..=steps).map(|i| 1.0 + i as f64 * MULTIPLIER_STEP).collect();
        let values: Vec<Result<f64>> = cs.par_iter().map(|&c| Ok(delta_star_with(q, states, nu, c, u_size, opts)?.0)).collect();
        let mut grid = Vec::with_capacity(cs.len());
        for (c, v) in cs.iter().zip(values) {
            grid.push((*c, v?));
        }
        let mut limit = 0.0;
        for (p, s) in q.iter().zip(states) {
            limit += p * relative_entropy(s, nu)?.nats;
        }
        Ok(DualCurve { q: q.to_vec(), states: states.to_vec(), nu: nu.clone(), u_size, opts: *opts, grid, limit })
    }

    /// Curve for `ν = ρ_Y`, whose infimum is the rate-constrained bottleneck value.
    pub fn for_source(src: &CQSource, u_size: usize) -> Result<Self> {
        DualCurve::new(src.q_x(), src.states(), src.rho_y().op(), u_size, &KernelOptions::default())
    }

    /// The infimum at rate `r` and the grid curve `(c, (Δ*(c) + r)/c)`.
    pub fn infimum(&self, r: f64) -> Result<(f64, Vec<(f64, f64)>)> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("rate {r} must be nonnegative")));
        }
        let f = |c: f64| -> Result<f64> {
            Ok((delta_star_with(&self.q, &self.states, &self.nu, c, self.u_size, &self.opts)?.0 + r) / c)
        };
        let curve: Vec<(f64, f64)> = self.grid.iter().map(|&(c, d)| (c, (d + r) / c)).collect();
        let (i_best, mut best) = curve
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &(_, v))| if v < acc.1 { (i, v) } else { acc });

        let mut lo = curve[i_best.saturating_sub(1)].0;
        let mut hi = curve[(i_best + 1).min(curve.len() - 1)].0;
        if hi > lo {
            let g = (5f64.sqrt() - 1.0) / 2.0;
            let mut a = hi - g * (hi - lo);
            let mut b = lo + g * (hi - lo);
            let (mut fa, mut fb) = (f(a)?, f(b)?);
            for _ in 0..GOLDEN_ITERATIONS {
                if fa <= fb {
                    hi = b;
                    b = a;
                    fb = fa;
                    a = hi - g * (hi - lo);
                    fa = f(a)?;
                } else {
                    lo = a;
                    a = b;
                    fa = fb;
                    b = lo + g * (hi - lo);
                    fb = f(b)?;
                }
            }
            best = best.min(fa).min(fb);
        }
        Ok((best.min(self.limit), curve))
    }
}

/// `sup { I(U;Y) : I(U;X) ≤ r }` over classical channels with `u_size` outputs,
/// evaluated through its Lagrangian dual `inf_{c ≥ 1} (Δ*(c) + r)/c`.
pub fn bottleneck_sup_constrained(src: &CQSource, r: f64, u_size: usize) -> Result<(f64, Vec<(f64, f64)>)> {
    bottleneck_sup_constrained_with(src, r, u_size, &KernelOptions::default())
}

pub fn bottleneck_sup_constrained_with(
    src: &CQSource,
    r: f64,
    u_size: usize,
    opts: &KernelOptions,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("rate {r} must be nonnegative")));
    }
    DualCurve::new(src.q_x(), src.states(), src.rho_y().op(), u_size, opts)?.infimum(r)
}

/// `K_ε = 2 ln(γη)·√(3η ln(4|𝒳|/(1−ε))) + 2√(2γ ln(4/(1−ε)))`.
pub fn k_eps(eta: f64, gamma: f64, x_size: usize, eps: f64) -> Result<f64> {
    check_unit(eps, "eps")?;
    let l = (4.0 / (1.0 - eps)).ln();
    Ok(2.0 * (gamma * eta).ln() * (3.0 * eta * (4.0 * x_size as f64 / (1.0 - eps)).ln()).sqrt()
        + 2.0 * (2.0 * gamma * l).sqrt())
}

/// `A = ln(γ^c η^{c+1})·√(3η ln(|𝒳|/ε)) + 2c√((γ−1) ln(1/δ))`.
pub fn a_const(eta: f64, gamma: f64, x_size: usize, c: f64, eps: f64, delta: f64) -> Result<f64> {
    check_unit(eps, "eps")?;
    check_unit(delta, "delta")?;
    let lead = c * gamma.ln() + (c + 1.0) * eta.ln();
    Ok(lead * (3.0 * eta * (x_size as f64 / eps).ln()).sqrt()
        + 2.0 * c * ((gamma - 1.0).max(0.0) * (1.0 / delta).ln()).sqrt())
}

fn check_unit(v: f64, name: &str) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {v} outside (0,1)")))
    }
}

/// Block length below which the strong-converse bound does not apply.
pub fn stein_threshold(eta: f64, x_size: usize, eps: f64) -> f64 {
    3.0 * eta * (4.0 * x_size as f64 / (1.0 - eps)).ln()
}

/// Second-order strong-converse bound on the rate-constrained Stein exponent.
pub fn sc_bound_stein(src: &CQSource, r: f64, eps: f64, n: usize, u_size: usize) -> Result<BoundReport> {
    check_unit(eps, "eps")?;
    let threshold = stein_threshold(src.eta(), src.size(), eps);
    if !(n as f64 > threshold) {
        return Err(Error::Precondition(format!("n = {n} must exceed 3η ln(4|X|/(1-ε)) = {threshold:.4}")));
    }
    sc_bound_stein_formal(src, r, eps, n, u_size)
}

/// Same expression as [`sc_bound_stein`] without the block-length guard.
pub fn sc_bound_stein_formal(src: &CQSource, r: f64, eps: f64, n: usize, u_size: usize) -> Result<BoundReport> {
    check_unit(eps, "eps")?;
    if n == 0 {
        return Err(Error::Domain("block length must be positive".into()));
    }
    src.require_full_rank_output()?;
    sc_bound_stein_on_curve(&DualCurve::for_source(src, u_size)?, src, r, eps, n)
}

/// [`sc_bound_stein_formal`] reusing a precomputed [`DualCurve::for_source`].
pub fn sc_bound_stein_on_curve(curve: &DualCurve, src: &CQSource, r: f64, eps: f64, n: usize) -> Result<BoundReport> {
    check_unit(eps, "eps")?;
    if n == 0 {
        return Err(Error::Domain("block length must be positive".into()));
    }
    src.require_full_rank_output()?;
    let (first, _) = curve.infimum(r)?;
    let k = k_eps(src.eta(), src.gamma(), src.size(), eps)?;
    let nf = n as f64;
    Ok(BoundReport::new("sc_bound_stein", first, k / nf.sqrt(), 2.0 / nf * (4.0 / (1.0 - eps)).ln())
        .with_constant("eta", src.eta())
        .with_constant("gamma", src.gamma())
        .with_constant("k_eps", k)
        .with_constant("threshold", stein_threshold(src.eta(), src.size(), eps)))
}

fn block_length(mu_n: &[f64], k: usize) -> Result<usize> {
    if k < 2 {
        return if mu_n.len() == 1 { Ok(1) } else { Err(Error::Dimension("single-letter alphabet has one sequence".into())) };
    }
    let mut n = 0;
    let mut size = 1usize;
    while size < mu_n.len() {
        size = size.saturating_mul(k);
        n += 1;
    }
    if size != mu_n.len() || n == 0 {
        return Err(Error::Dimension(format!("measure of length {} is not indexed by sequences over {k} letters", mu_n.len())));
    }
    Ok(n)
}

/// `tr[ρ^x T]` for every sequence `x`.
fn sequence_traces(src: &CQSource, n: usize, t: &HermitianOperator) -> Result<Vec<f64>> {
    if t.dim() != src.d_y().pow(n as u32) {
        return Err(Error::Dimension(format!("test has dimension {} for block length {n}", t.dim())));
    }
    Ok(product_states(src.states(), n).iter().map(|s| s.op().trace_product(t)).collect())
}

fn best_delta(inst: &DeltaInstance) -> Result<f64> {
    let sol = delta_with(inst, &DeltaOptions::default())?;
    Ok(sol.grid_value.map_or(sol.value, |g| g.max(sol.value)))
}

/// Key inequality: `(tr[ρ_Y^{⊗n} Ψ_t^{⊗n}(T)])^c e^{Δ} ≥ Σ μ(x)(tr[ρ^x T])^{c(1+1/t)}`
/// with `Δ = Δ(μ, Λ^{⊗n}, ρ_Y^{⊗n}, c)`.
pub fn verify_key_inequality(mu_n: &[f64], src: &CQSource, t_n: &HermitianOperator, c: f64, t: f64) -> Result<InequalityMargin> {
    if !(c > 1.0) {
        return Err(Error::Domain(format!("c = {c} must exceed 1")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    src.require_full_rank_output()?;
    let t_n = validate_test(t_n)?;
    let n = block_length(mu_n, src.size())?;
    let traces = sequence_traces(src, n, &t_n)?;
    let rho_n = src.rho_y().tensor_power(n);
    let psi = tensor_psi_map(&t_n.with_dims(vec![src.d_y(); n])?, t, src.gamma(), src.rho_y())?;
    let inst = DeltaInstance::product(mu_n.to_vec(), src.states(), n, rho_n.op().clone(), c)?;
    let d = best_delta(&inst)?;
    let base = rho_n.op().trace_product(&psi).max(0.0);
    let lhs = base.powf(c) * d.exp();
    let power = c * (1.0 + 1.0 / t);
    let rhs: f64 = mu_n.iter().zip(&traces).map(|(m, v)| m * v.max(0.0).powf(power)).sum();
    Ok(InequalityMargin::new(lhs, rhs, format!("key;n={n};c={c};t={t}")))
}

/// Image-size bound for a fixed test: `rhs − lhs` with
/// `lhs = ln P_μ(tr[ρ^X T] ≥ δ) − c ln tr[σ^{⊗n} T]`.
///
/// The reported margin is `rhs − lhs`; a test with no covered sequence is
/// vacuous (`lhs = −∞`).
pub fn image_size_bound_i(
    mu_n: &[f64],
    src: &CQSource,
    sigma: &DensityMatrix,
    t_n: &HermitianOperator,
    c: f64,
    delta: f64,
) -> Result<InequalityMargin> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("c = {c} must be positive")));
    }
    check_unit(delta, "delta")?;
    if sigma.dim() != src.d_y() {
        return Err(Error::Dimension("reference state differs in dimension from the source".into()));
    }
    let t_n = validate_test(t_n)?;
    let n = block_length(mu_n, src.size())?;
    let traces = sequence_traces(src, n, &t_n)?;
    let gamma = output_ratio_constant(src.states(), sigma)?;
    let sigma_n = sigma.tensor_power(n);
    let inst = DeltaInstance::product(mu_n.to_vec(), src.states(), n, sigma_n.op().clone(), c)?;
    let d = best_delta(&inst)?;
    let l = (1.0 / delta).ln();
    let rhs = d + 2.0 * c * l.sqrt() * (n as f64 * (gamma - 1.0).max(0.0)).sqrt() + c * l;
    let digest = format!("image;n={n};c={c};delta={delta}");

    let covered: f64 = mu_n.iter().zip(&traces).filter(|(_, &v)| v >= delta).map(|(m, _)| m).sum();
    if covered <= 0.0 {
        return Ok(InequalityMargin { lhs: f64::NEG_INFINITY, rhs, margin: f64::INFINITY, instance_digest: digest });
    }
    let mass = sigma_n.op().trace_product(&t_n);
    if mass <= 0.0 {
        return Err(Error::Numerical("covered sequences under a test with zero reference mass".into()));
    }
    let lhs = covered.ln() - c * mass.ln();
    Ok(InequalityMargin { lhs, rhs, margin: rhs - lhs, instance_digest: digest })
}

/// `n Δ*(Q, Λ, σ, c) + A√n + c ln(1/δ)`, valid for `n > 3η ln(|𝒳|/ε)`.
pub fn image_size_bound_ii(
    q: &[f64],
    src: &CQSource,
    sigma: &DensityMatrix,
    c: f64,
    delta: f64,
    eps: f64,
    n: usize,
    u_size: usize,
) -> Result<BoundReport> {
    check_unit(eps, "eps")?;
    check_unit(delta, "delta")?;
    if q.len() != src.size() {
        return Err(Error::Dimension(format!("distribution of length {} for {} letters", q.len(), src.size())));
    }
    let eta = q.iter().map(|p| 1.0 / p).fold(0.0, f64::max);
    let threshold = 3.0 * eta * (src.size() as f64 / eps).ln();
    if !(n as f64 > threshold) {
        return Err(Error::Precondition(format!("n = {n} must exceed 3η ln(|X|/ε) = {threshold:.4}")));
    }
    let gamma = output_ratio_constant(src.states(), sigma)?;
    let (star, _) = delta_star(q, src.states(), sigma.op(), c, u_size)?;
    let a = a_const(eta, gamma, src.size(), c, eps, delta)?;
    let nf = n as f64;
    Ok(BoundReport::new("image_size_bound", nf * star, a * nf.sqrt(), c * (1.0 / delta).ln())
        .with_constant("delta_star", star)
        .with_constant("a", a)
        .with_constant("eta", eta)
        .with_constant("gamma", gamma)
        .with_constant("threshold", threshold))
}

/// Lower bound on the helper-free rate `(1/n) ln|𝒲₂|` of a source code whose
/// side-information rate is `log_w1` nats per letter.
///
/// The first-order term `inf {H(Y|U) : I(U;X) ≤ log_w1}` is evaluated as
/// `ln d − inf_c (Δ*(Q, Λ, 𝟙/d, c) + log_w1)/c`.
pub fn source_coding_bound(src: &CQSource, eps: f64, n: usize, log_w1: f64, u_size: usize) -> Result<BoundReport> {
    check_unit(eps, "eps")?;
    if !(log_w1 >= 0.0) {
        return Err(Error::Domain(format!("rate {log_w1} must be nonnegative")));
    }
    let eta = src.eta();
    let threshold = stein_threshold(eta, src.size(), eps);
    if !(n as f64 > threshold) {
        return Err(Error::Precondition(format!("n = {n} must exceed 3η ln(4|X|/(1-ε)) = {threshold:.4}")));
    }
    let d = src.d_y() as f64;
    let mixed = DensityMatrix::maximally_mixed(src.d_y());
    let (inf, _) = DualCurve::new(src.q_x(), src.states(), mixed.op(), u_size, &KernelOptions::default())?.infimum(log_w1)?;
    let first = d.ln() - inf;
    let nf = n as f64;
    let k = 2.0 * (d * eta).ln() * (3.0 * eta * (4.0 * src.size() as f64 / (1.0 - eps)).ln()).sqrt()
        + 2.0 * (d * (2.0 / (1.0 - eps)).ln()).sqrt();
    Ok(BoundReport::new("source_coding_bound", first, -k / nf.sqrt(), -2.0 * (4.0 / (1.0 - eps)).ln() / nf)
        .with_constant("eta", eta)
        .with_constant("k", k)
        .with_constant("threshold", threshold))
}

/// Budget check `I(U;X) ≤ r_budget` and objective `2H(Y) − I(U;Y)` at one channel.
pub fn fq_point(src: &CQSource, chan: &StochasticChannel, r_budget: f64) -> Result<(bool, f64)> {
    let (i_uy, i_ux) = stein_independence_objective(src, chan)?;
    let h_y = von_neumann_entropy(src.rho_y()).nats;
    Ok((i_ux <= r_budget, 2.0 * h_y - i_uy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{conditional_entropy, shannon_entropy};

    fn qubit_source() -> CQSource {
        let s0 = DensityMatrix::diagonal(&[0.95, 0.05]).unwrap();
        let s1 = DensityMatrix::from_rows(&[vec![(0.1, 0.0), (0.2, 0.0)], vec![(0.2, 0.0), (0.9, 0.0)]]).unwrap();
        CQSource::unlabelled(vec![0.5, 0.5], vec![s0, s1]).unwrap()
    }

    fn independence(src: &CQSource) -> f64 {
        relative_entropy(&src.joint_state().unwrap(), src.product_of_marginals().unwrap().op()).unwrap().nats
    }

    #[test]
    fn k_eps_closed_form() {
        let expected = 2.0 * 4f64.ln() * (6.0 * 16f64.ln()).sqrt() + 2.0 * (4.0 * 8f64.ln()).sqrt();
        assert!((k_eps(2.0, 2.0, 2, 0.5).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn a_const_closed_form() {
        let expected = 8f64.ln() * (6.0 * 4f64.ln()).sqrt() + 2.0 * 2f64.ln().sqrt();
        assert!((a_const(2.0, 2.0, 2, 1.0, 0.5, 0.5).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn theta_identity_and_trivial_encoder() {
        let src = qubit_source();
        let alt = vec![src.rho_y().clone(); 2];
        let full = theta_n_lower(&src, &alt, 1, 10.0, true).unwrap();
        assert!((full.first_order - independence(&src)).abs() < 1e-9);
        let none = theta_n_lower(&src, &alt, 1, 0.0, true).unwrap();
        assert!(none.first_order.abs() < 1e-12);
        assert!(theta_n_lower(&src, &alt, 1, 0.0, false).is_err());
    }

    #[test]
    fn theta_superadditive_on_pairs() {
        let src = qubit_source();
        let alt = vec![src.rho_y().clone(); 2];
        let r = 2f64.ln();
        let one = theta_n_lower(&src, &alt, 1, r * 0.5, true).unwrap().first_order;
        let two = theta_n_lower(&src, &alt, 2, r * 0.5, true).unwrap().first_order;
        assert!(one <= two + 1e-9, "{one} > {two}");
    }

    #[test]
    fn stein_objective_extremes() {
        let src = qubit_source();
        let (iuy, iux) = stein_independence_objective(&src, &StochasticChannel::identity(src.alphabet())).unwrap();
        assert!((iuy - independence(&src)).abs() < 1e-10);
        assert!((iux - 2f64.ln()).abs() < 1e-12);
        let constant = StochasticChannel::constant(src.alphabet(), &[0.3, 0.7]).unwrap();
        let (iuy, iux) = stein_independence_objective(&src, &constant).unwrap();
        assert!(iuy.abs() < 1e-10 && iux.abs() < 1e-12);
    }

    #[test]
    fn bottleneck_endpoints() {
        let src = qubit_source();
        let (zero, _) = bottleneck_sup_constrained(&src, 0.0, 3).unwrap();
        assert!(zero.abs() < 1e-6, "{zero}");
        let (high, curve) = bottleneck_sup_constrained(&src, 2f64.ln(), 3).unwrap();
        assert!((high - independence(&src)).abs() < 1e-5);
        assert_eq!(curve.len(), 61);
    }

    #[test]
    fn sc_bound_threshold_guard() {
        let src = qubit_source();
        assert!(matches!(sc_bound_stein(&src, 0.3, 0.5, 5, 3), Err(Error::Precondition(_))));
        let threshold = stein_threshold(2.0, 2, 0.5);
        assert!((threshold - 6.0 * 16f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn key_inequality_trivial_tests() {
        let src = qubit_source();
        let mu = vec![0.25; 4];
        let id = HermitianOperator::identity(&[2, 2]);
        let m = verify_key_inequality(&mu, &src, &id, 1.5, 0.5).unwrap();
        let e = (-0.5f64).exp();
        let base = (e + src.gamma() * (1.0 - e)).powf(3.0);
        assert!((m.rhs - 1.0).abs() < 1e-12);
        assert!(m.lhs >= base * (1.0 - 1e-9), "{} < {base}", m.lhs);
        let zero = HermitianOperator::zeros(&[2, 2]);
        let m = verify_key_inequality(&mu, &src, &zero, 1.5, 0.5).unwrap();
        assert_eq!((m.lhs, m.rhs), (0.0, 0.0));
    }

    #[test]
    fn image_size_trivial_tests() {
        let src = qubit_source();
        let sigma = src.rho_y().clone();
        let mu = vec![0.25; 4];
        let zero = HermitianOperator::zeros(&[4]);
        let m = image_size_bound_i(&mu, &src, &sigma, &zero, 1.0, 0.5).unwrap();
        assert!(m.margin.is_infinite() && m.margin > 0.0);
        let id = HermitianOperator::identity(&[4]);
        let m = image_size_bound_i(&mu, &src, &sigma, &id, 1.0, 0.5).unwrap();
        assert!(m.lhs.abs() < 1e-12);
        assert!(m.margin >= -1e-6);
    }

    #[test]
    fn source_coding_endpoints() {
        let src = qubit_source();
        let n = 40;
        let zero = source_coding_bound(&src, 0.5, n, 0.0, 3).unwrap();
        let h_y = von_neumann_entropy(src.rho_y()).nats;
        assert!((zero.first_order - h_y).abs() < 1e-6, "{} vs {h_y}", zero.first_order);
        let full = source_coding_bound(&src, 0.5, n, 2f64.ln(), 3).unwrap();
        let h_y_x = conditional_entropy(&src.joint_state().unwrap(), 0).unwrap().nats;
        assert!((full.first_order - h_y_x).abs() < 1e-6, "{} vs {h_y_x}", full.first_order);
        assert!(source_coding_bound(&src, 0.5, 5, 0.0, 3).is_err());
    }

    #[test]
    fn fq_point_extremes() {
        let src = qubit_source();
        let h_y = von_neumann_entropy(src.rho_y()).nats;
        let id = StochasticChannel::identity(src.alphabet());
        let (ok, v) = fq_point(&src, &id, 1.0).unwrap();
        assert!(ok && (v - (2.0 * h_y - independence(&src))).abs() < 1e-10);
        let (ok, _) = fq_point(&src, &id, shannon_entropy(src.q_x()).nats - 1e-9).unwrap();
        assert!(!ok);
        let constant = StochasticChannel::constant(src.alphabet(), &[1.0]).unwrap();
        let (_, v) = fq_point(&src, &constant, 0.0).unwrap();
        assert!((v - 2.0 * h_y).abs() < 1e-10);
    }
}
