//! Information-bottleneck functionals.
//!
//! `Δ(μ, Λ, ν, c) = max_γ c·D(σ_γ‖ν) − D(γ‖μ)` over distributions `γ ≪ μ`
//! with `σ_γ = Σ γ(x) ρ^x`, and its channel form
//! `Δ*(Q, Λ, ν, c) = sup_{P_{U|X}} Σ_u P_U(u) [c·D(σ_u‖ν) − D(P_{X|U=u}‖Q)]`.
//!
//! Both are non-concave maximizations solved by multistart ascent; small
//! alphabets are cross-checked against simplex grids.

use rand::Rng;
use rayon::prelude::*;

use crate::bounds::BoundReport;
use crate::entropy::{classical_kl, von_neumann_entropy};
use crate::error::{Error, Result};
use crate::hypothesis::{sequence_digits, StochasticChannel};
use faer::complex_native::c64;
use faer::MatRef;

use crate::linalg::{kron, trace_product, weighted_sum, DensityMatrix, HermitianOperator, Matrix, MatrixFunction, Spectrum};
use crate::random::{derive_seed, random_distribution, rng_from_seed};
use crate::semigroup::InequalityMargin;
use crate::tolerance::{Limits, KERNEL_OVERLAP_TOL, NEGLIGIBLE_MASS, SUPPORT_TOL};

/// Smallest eigenvalue accepted for the reference operator `ν`.
const REFERENCE_FLOOR: f64 = 1e-10;

/// Instance of `Δ`: measure `μ` (possibly unnormalized), channel outputs, reference `ν`, weight `c`.
#[derive(Debug, Clone)]
pub struct DeltaInstance {
    mu: Vec<f64>,
    channel: Outputs,
    nu: HermitianOperator,
    c: f64,
}

/// Channel outputs, either listed or as `n`-fold tensor products of site outputs
/// indexed lexicographically (first site most significant).
#[derive(Debug, Clone)]
enum Outputs {
    Dense(Vec<HermitianOperator>),
    Product { sites: Vec<HermitianOperator>, n: usize },
}

impl Outputs {
    fn len(&self) -> usize {
        match self {
            Outputs::Dense(v) => v.len(),
            Outputs::Product { sites, n } => sites.len().pow(*n as u32),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Outputs::Dense(v) => v.first().map_or(0, |s| s.dim()),
            Outputs::Product { sites, n } => sites.first().map_or(0, |s| s.dim().pow(*n as u32)),
        }
    }

    /// `Σ w(x) ρ^x`.
    fn mixture(&self, w: &[f64]) -> Matrix {
        match self {
            Outputs::Dense(v) => {
                let refs: Vec<&HermitianOperator> = v.iter().collect();
                weighted_sum(w, &refs)
            }
            Outputs::Product { sites, n } => product_mixture(sites, *n, w),
        }
    }

    /// `Re tr[ρ^x A]` for every `x`.
    fn traces(&self, a: MatRef<'_, c64>) -> Vec<f64> {
        match self {
            Outputs::Dense(v) => v.iter().map(|s| trace_product(s.matrix(), a)).collect(),
            Outputs::Product { sites, n } => {
                let mut out = Vec::with_capacity(self.len());
                product_traces(sites, *n, a, &mut out);
                out
            }
        }
    }
}

fn product_mixture(sites: &[HermitianOperator], n: usize, w: &[f64]) -> Matrix {
    let refs: Vec<&HermitianOperator> = sites.iter().collect();
    if n == 1 {
        return weighted_sum(w, &refs);
    }
    let block = w.len() / sites.len();
    let d = sites[0].dim().pow(n as u32);
    let mut acc = Matrix::zeros(d, d);
    for (a, site) in sites.iter().enumerate() {
        let wa = &w[a * block..(a + 1) * block];
        if wa.iter().all(|&v| v == 0.0) {
            continue;
        }
        let rest = product_mixture(sites, n - 1, wa);
        acc += kron(site.matrix(), rest.as_ref());
    }
    acc
}

fn product_traces(sites: &[HermitianOperator], n: usize, a: MatRef<'_, c64>, out: &mut Vec<f64>) {
    if n == 1 {
        out.extend(sites.iter().map(|s| trace_product(s.matrix(), a)));
        return;
    }
    let d = sites[0].dim();
    let r = a.nrows() / d;
    for site in sites {
        let rho = site.matrix();
        // tr_1[(ρ ⊗ 1) A]
        let reduced = Matrix::from_fn(r, r, |i, j| {
            let mut z = c64::new(0.0, 0.0);
            for k in 0..d {
                for l in 0..d {
                    z += rho.read(k, l) * a.read(l * r + i, k * r + j);
                }
            }
            z
        });
        product_traces(sites, n - 1, reduced.as_ref(), out);
    }
}

impl DeltaInstance {
    pub fn new(mu: Vec<f64>, channel: Vec<HermitianOperator>, nu: HermitianOperator, c: f64) -> Result<Self> {
        if let Some(i) = channel.iter().position(|s| s.dim() != nu.dim()) {
            return Err(Error::Dimension(format!("channel output {i} has dimension {}", channel[i].dim())));
        }
        DeltaInstance::build(mu, Outputs::Dense(channel), nu, c)
    }

    /// Instance over length-`n` sequences with product outputs `ρ^{x_1} ⊗ … ⊗ ρ^{x_n}`.
    pub fn product(mu: Vec<f64>, sites: &[DensityMatrix], n: usize, nu: HermitianOperator, c: f64) -> Result<Self> {
        if sites.is_empty() || n == 0 {
            return Err(Error::Dimension("product instance needs sites and n >= 1".into()));
        }
        let channel = Outputs::Product { sites: sites.iter().map(|s| s.op().clone()).collect(), n };
        if channel.dim() != nu.dim() {
            return Err(Error::Dimension(format!("product outputs have dimension {}", channel.dim())));
        }
        DeltaInstance::build(mu, channel, nu, c)
    }

    fn build(mu: Vec<f64>, channel: Outputs, nu: HermitianOperator, c: f64) -> Result<Self> {
        if mu.len() != channel.len() || mu.is_empty() {
            return Err(Error::Dimension(format!(
                "measure has {} entries for {} channel outputs",
                mu.len(),
                channel.len()
            )));
        }
        if let Some(i) = mu.iter().position(|&m| !(m >= 0.0)) {
            return Err(Error::Domain(format!("measure entry {i} = {} is negative", mu[i])));
        }
        let m = nu.min_eigenvalue();
        if m < REFERENCE_FLOOR {
            return Err(Error::Domain(format!("reference operator has eigenvalue {m:.3e} < {REFERENCE_FLOOR:.0e}")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Domain(format!("weight c = {c} must be positive")));
        }
        Ok(DeltaInstance { mu, channel, nu, c })
    }

    /// Instance with channel outputs taken from density matrices.
    pub fn from_states(mu: Vec<f64>, states: &[DensityMatrix], nu: HermitianOperator, c: f64) -> Result<Self> {
        DeltaInstance::new(mu, states.iter().map(|s| s.op().clone()).collect(), nu, c)
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn nu(&self) -> &HermitianOperator {
        &self.nu
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// Solver settings for `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaOptions {
    pub starts: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Simplex grid resolution for the cross-check (`1/resolution`).
    pub grid_resolution: usize,
    /// Grid cross-check runs only for alphabets up to this size.
    pub grid_max_alphabet: usize,
    pub seed: u64,
}

impl Default for DeltaOptions {
    fn default() -> Self {
        DeltaOptions { starts: 32, max_iter: 500, tol: 1e-10, grid_resolution: 64, grid_max_alphabet: 3, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct DeltaSolution {
    pub value: f64,
    pub gamma: Vec<f64>,
    /// Best value from fixed-point ascent alone.
    pub ascent_value: f64,
    /// Best grid value when the grid cross-check ran.
    pub grid_value: Option<f64>,
}

/// Precomputed pieces shared by every evaluation on one instance.
struct DeltaContext<'a> {
    inst: &'a DeltaInstance,
    nu_spec: Spectrum,
    /// `tr[ρ^x ln ν]`.
    log_ref: Vec<f64>,
    dims: Vec<usize>,
}

impl<'a> DeltaContext<'a> {
    fn new(inst: &'a DeltaInstance) -> Result<Self> {
        let nu_spec = inst.nu.eig();
        let ln_nu = nu_spec.reconstruct(f64::ln);
        let log_ref = inst.channel.traces(ln_nu.as_ref());
        Ok(DeltaContext { inst, nu_spec, log_ref, dims: inst.nu.subsystem_dims().to_vec() })
    }

    fn mixture(&self, gamma: &[f64]) -> Result<HermitianOperator> {
        HermitianOperator::new(self.inst.channel.mixture(gamma), self.dims.clone())
    }

    /// Objective and, optionally, the spectrum of `σ_γ`.
    fn objective_with(&self, gamma: &[f64]) -> Result<(f64, Spectrum)> {
        let sigma = self.mixture(gamma)?;
        let spec = sigma.eig();
        let entropy_term: f64 = spec.values.iter().filter(|&&l| l > SUPPORT_TOL).map(|&l| l * l.ln()).sum();
        let cross: f64 = gamma.iter().zip(&self.log_ref).map(|(g, a)| g * a).sum();
        let div = classical_kl(gamma, &self.inst.mu).nats;
        Ok((self.inst.c * (entropy_term - cross) - div, spec))
    }

    fn objective(&self, gamma: &[f64]) -> Result<f64> {
        Ok(self.objective_with(gamma)?.0)
    }

    /// `γ'(x) ∝ μ(x) exp(c·tr[ρ^x (ln σ_γ − ln ν)])`.
    fn update(&self, spec: &Spectrum) -> Vec<f64> {
        let ln_sigma = spec.reconstruct(|l| if l > SUPPORT_TOL { l.ln() } else { 0.0 });
        let kernel = spec.reconstruct(|l| if l > SUPPORT_TOL { 0.0 } else { 1.0 });
        let has_kernel = spec.values.iter().any(|&l| l <= SUPPORT_TOL);
        let overlap = if has_kernel { Some(self.inst.channel.traces(kernel.as_ref())) } else { None };
        let cross = self.inst.channel.traces(ln_sigma.as_ref());
        let logw: Vec<f64> = (0..self.inst.mu.len())
            .map(|x| {
                let m = self.inst.mu[x];
                if m <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                if overlap.as_ref().is_some_and(|o| o[x] > KERNEL_OVERLAP_TOL) {
                    return f64::NEG_INFINITY;
                }
                m.ln() + self.inst.c * (cross[x] - self.log_ref[x])
            })
            .collect();
        softmax(&logw)
    }

    fn ascend(&self, start: Vec<f64>, opts: &DeltaOptions) -> Result<(f64, Vec<f64>)> {
        let mut gamma = start;
        let (mut value, mut spec) = self.objective_with(&gamma)?;
        for _ in 0..opts.max_iter {
            let next = self.update(&spec);
            let (v, s) = self.objective_with(&next)?;
            let done = (v - value).abs() < opts.tol;
            if v >= value || !value.is_finite() {
                gamma = next;
                value = v;
                spec = s;
            } else {
                // Ascent is monotone in exact arithmetic; a drop is rounding.
                break;
            }
            if done {
                break;
            }
        }
        Ok((value, gamma))
    }
}

fn softmax(logw: &[f64]) -> Vec<f64> {
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return vec![0.0; logw.len()];
    }
    let w: Vec<f64> = logw.iter().map(|&l| (l - top).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// All points of the simplex `{γ : γ(x) = k_x/res}` restricted to `support`.
fn simplex_grid(k: usize, res: usize, support: &[bool]) -> Vec<Vec<f64>> {
    fn rec(pos: usize, left: usize, k: usize, res: usize, support: &[bool], cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if pos == k - 1 {
            if left > 0 && !support[pos] {
                return;
            }
            cur.push(left);
            out.push(cur.iter().map(|&v| v as f64 / res as f64).collect());
            cur.pop();
            return;
        }
        let top = if support[pos] { left } else { 0 };
        for v in 0..=top {
            cur.push(v);
            rec(pos + 1, left - v, k, res, support, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, res, k, res, support, &mut Vec::with_capacity(k), &mut out);
    out
}

fn pick_best(results: Vec<Result<(f64, Vec<f64>)>>) -> Result<(f64, Vec<f64>)> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in results {
        let (v, g) = r?;
        if best.as_ref().map_or(true, |(b, _)| v > *b) {
            best = Some((v, g));
        }
    }
    best.ok_or_else(|| Error::Numerical("no optimizer start produced a value".into()))
}

/// `Δ(μ, Λ, ν, c)` with its maximizer.
pub fn delta(inst: &DeltaInstance) -> Result<DeltaSolution> {
    delta_with(inst, &DeltaOptions::default())
}

pub fn delta_with(inst: &DeltaInstance, opts: &DeltaOptions) -> Result<DeltaSolution> {
    let k = inst.mu.len();
    let support: Vec<bool> = inst.mu.iter().map(|&m| m > 0.0).collect();
    let support_size = support.iter().filter(|&&s| s).count();
    if support_size == 0 {
        return Err(Error::Domain("measure has empty support".into()));
    }
    let ctx = DeltaContext::new(inst)?;

    let mass: f64 = inst.mu.iter().sum();
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.starts.max(2));
    starts.push(support.iter().map(|&s| if s { 1.0 / support_size as f64 } else { 0.0 }).collect());
    starts.push(inst.mu.iter().map(|m| m / mass).collect());
    for (x, _) in support.iter().enumerate().filter(|(_, &s)| s) {
        if starts.len() >= opts.starts.max(2) / 2 {
            break;
        }
        let mut v = vec![0.0; k];
        v[x] = 1.0;
        starts.push(v);
    }
    let mut rng = rng_from_seed(derive_seed(opts.seed, "delta-start", k as u64));
    while starts.len() < opts.starts.max(2) {
        let d = random_distribution(support_size, &mut rng);
        let mut it = d.into_iter();
        starts.push(support.iter().map(|&s| if s { it.next().unwrap_or(0.0) } else { 0.0 }).collect());
    }

    let results: Vec<Result<(f64, Vec<f64>)>> = starts.into_par_iter().map(|s| ctx.ascend(s, opts)).collect();
    let (mut value, mut gamma) = pick_best(results)?;
    let ascent_value = value;

    let mut grid_value = None;
    if k <= opts.grid_max_alphabet && opts.grid_resolution > 0 {
        let grid = simplex_grid(k, opts.grid_resolution, &support);
        let evals: Vec<Result<(f64, Vec<f64>)>> =
            grid.into_par_iter().map(|g| ctx.objective(&g).map(|v| (v, g))).collect();
        let (gv, gg) = pick_best(evals)?;
        grid_value = Some(gv);
        if gv > value {
            let (pv, pg) = ctx.ascend(gg.clone(), opts)?;
            if pv >= gv {
                value = pv;
                gamma = pg;
            } else {
                value = gv;
                gamma = gg;
            }
        }
    }
    Ok(DeltaSolution { value, gamma, ascent_value, grid_value })
}

/// Objective `c·D(σ_γ‖ν) − D(γ‖μ)` at a given distribution `γ`.
pub fn delta_objective(inst: &DeltaInstance, gamma: &[f64]) -> Result<f64> {
    if gamma.len() != inst.mu.len() {
        return Err(Error::Dimension("distribution length differs from the alphabet".into()));
    }
    DeltaContext::new(inst)?.objective(gamma)
}

/// `ln Σ μ(x) e^{c·tr[ρ^x ln T]} − c·ln tr e^{ln ν + ln T}` for positive `T`.
pub fn delta_variational_value(inst: &DeltaInstance, t: &HermitianOperator) -> Result<f64> {
    if t.dim() != inst.nu.dim() {
        return Err(Error::Dimension("test operator dimension differs from the instance".into()));
    }
    let spec = t.eig();
    let lo = spec.values.first().copied().unwrap_or(0.0);
    if lo <= SUPPORT_TOL {
        return Err(Error::Domain(format!("T must be positive, smallest eigenvalue {lo:.3e}")));
    }
    let ln_t = spec.reconstruct(f64::ln);
    let tr = inst.channel.traces(ln_t.as_ref());
    let logw: Vec<f64> = inst
        .mu
        .iter()
        .zip(&tr)
        .map(|(&m, t)| if m > 0.0 { m.ln() + inst.c * t } else { f64::NEG_INFINITY })
        .collect();
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::Domain("measure has empty support".into()));
    }
    let first = top + logw.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    let second = crate::entropy::log_trace_exp_on_support(&inst.nu, &ln_t)?;
    Ok(first - inst.c * second)
}

/// `T = exp(ln σ_γ − ln ν)` induced by a distribution `γ`.
pub fn induced_operator(inst: &DeltaInstance, gamma: &[f64]) -> Result<HermitianOperator> {
    let ctx = DeltaContext::new(inst)?;
    let sigma = ctx.mixture(gamma)?;
    let ln_sigma = sigma.apply(MatrixFunction::Log)?;
    let ln_nu = HermitianOperator::new(ctx.nu_spec.reconstruct(f64::ln), ctx.dims.clone())?;
    ln_sigma.sub(&ln_nu)?.apply(MatrixFunction::Exp)
}

/// Optimal kernel with its marginal, posteriors and conditional output states.
#[derive(Debug, Clone)]
pub struct ChannelWithPosterior {
    pub p_u_given_x: StochasticChannel,
    pub p_u: Vec<f64>,
    /// `P_{X|U}(·|u)`; `None` for outputs with negligible probability.
    pub p_x_given_u: Vec<Option<Vec<f64>>>,
    pub sigma_y_given_u: Vec<Option<DensityMatrix>>,
}

/// Solver settings for `delta_star` and `phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    pub starts: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions { starts: 64, max_iter: 2000, grad_tol: 1e-8, seed: 0 }
    }
}

struct KernelProblem<'a> {
    p: &'a [f64],
    states: &'a [DensityMatrix],
    log_ref: Vec<f64>,
    c: f64,
}

struct KernelEval {
    value: f64,
    /// `tr[ρ^x ln σ_u] − tr[ρ^x ln ν]`, indexed `[u][x]`.
    scores: Vec<Vec<f64>>,
    p_u: Vec<f64>,
}

impl<'a> KernelProblem<'a> {
    fn new(p: &'a [f64], states: &'a [DensityMatrix], nu: &HermitianOperator, c: f64) -> Result<Self> {
        let m = nu.min_eigenvalue();
        if m < REFERENCE_FLOOR {
            return Err(Error::Domain(format!("reference operator has eigenvalue {m:.3e} < {REFERENCE_FLOOR:.0e}")));
        }
        if p.len() != states.len() || p.is_empty() {
            return Err(Error::Dimension("distribution and channel differ in length".into()));
        }
        if let Some(i) = states.iter().position(|s| s.dim() != nu.dim()) {
            return Err(Error::Dimension(format!("channel output {i} has dimension {}", states[i].dim())));
        }
        if !(c > 0.0) {
            return Err(Error::Domain(format!("weight c = {c} must be positive")));
        }
        let ln_nu = nu.eig().reconstruct(f64::ln);
        let log_ref = states.iter().map(|s| trace_product(s.op().matrix(), ln_nu.as_ref())).collect();
        Ok(KernelProblem { p, states, log_ref, c })
    }

    fn evaluate(&self, kernel: &[Vec<f64>], with_scores: bool) -> Result<KernelEval> {
        let nx = self.p.len();
        let nu_size = kernel[0].len();
        let mut value = 0.0;
        let mut scores = Vec::new();
        let mut p_u = vec![0.0; nu_size];
        for u in 0..nu_size {
            let joint: Vec<f64> = (0..nx).map(|x| self.p[x] * kernel[x][u]).collect();
            let pu: f64 = joint.iter().sum();
            p_u[u] = pu;
            if pu <= NEGLIGIBLE_MASS {
                if with_scores {
                    scores.push(vec![0.0; nx]);
                }
                continue;
            }
            let refs: Vec<&HermitianOperator> = self.states.iter().map(|s| s.op()).collect();
            let post: Vec<f64> = joint.iter().map(|j| j / pu).collect();
            let sigma = HermitianOperator::new(weighted_sum(&post, &refs), self.states[0].op().subsystem_dims().to_vec())?;
            let spec = sigma.eig();
            let ent: f64 = spec.values.iter().filter(|&&l| l > SUPPORT_TOL).map(|&l| l * l.ln()).sum();
            let cross: f64 = post.iter().zip(&self.log_ref).map(|(q, a)| q * a).sum();
            let info: f64 = (0..nx)
                .filter(|&x| joint[x] > 0.0)
                .map(|x| joint[x] * (kernel[x][u] / pu).ln())
                .sum();
            value += pu * self.c * (ent - cross) - info;
            if with_scores {
                let ln_sigma = spec.reconstruct(|l| if l > SUPPORT_TOL { l.ln() } else { 0.0 });
                scores.push(
                    (0..nx)
                        .map(|x| trace_product(self.states[x].op().matrix(), ln_sigma.as_ref()) - self.log_ref[x])
                        .collect(),
                );
            }
        }
        Ok(KernelEval { value, scores, p_u })
    }

    /// Gradient rows `g_u(x)` scaled out of `∂F/∂P(u|x) = p(x)·g_u(x)`.
    fn gradient(&self, kernel: &[Vec<f64>], eval: &KernelEval) -> Vec<Vec<f64>> {
        let nx = self.p.len();
        let nu_size = kernel[0].len();
        (0..nx)
            .map(|x| {
                (0..nu_size)
                    .map(|u| {
                        let pk = kernel[x][u];
                        if pk <= 0.0 || eval.p_u[u] <= NEGLIGIBLE_MASS {
                            0.0
                        } else {
                            self.c * eval.scores[u][x] - (pk / eval.p_u[u]).ln()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn stationarity(&self, kernel: &[Vec<f64>], grad: &[Vec<f64>]) -> f64 {
        let mut acc = 0.0;
        for (x, row) in kernel.iter().enumerate() {
            let mean: f64 = row.iter().zip(&grad[x]).map(|(p, g)| p * g).sum();
            let var: f64 = row.iter().zip(&grad[x]).map(|(p, g)| p * (g - mean).powi(2)).sum();
            acc += self.p[x] * self.p[x] * var;
        }
        acc.sqrt()
    }

    fn ascend(&self, start: Vec<Vec<f64>>, opts: &KernelOptions) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut kernel = start;
        let mut eval = self.evaluate(&kernel, true)?;
        let mut step = 1.0;
        for _ in 0..opts.max_iter {
            let grad = self.gradient(&kernel, &eval);
            if self.stationarity(&kernel, &grad) < opts.grad_tol {
                break;
            }
            let mut accepted = false;
            while step > 1e-12 {
                let cand: Vec<Vec<f64>> = kernel
                    .iter()
                    .zip(&grad)
                    .map(|(row, g)| {
                        let logw: Vec<f64> = row
                            .iter()
                            .zip(g)
                            .map(|(&p, &gi)| if p > 0.0 { p.ln() + step * gi } else { f64::NEG_INFINITY })
                            .collect();
                        softmax(&logw)
                    })
                    .collect();
                let ce = self.evaluate(&cand, true)?;
                if ce.value >= eval.value {
                    kernel = cand;
                    eval = ce;
                    accepted = true;
                    step = (step * 2.0).min(1.0);
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok((eval.value, kernel))
    }
}

fn kernel_starts(nx: usize, u_size: usize, opts: &KernelOptions) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>) {
    let mut deterministic = Vec::new();
    let total = (u_size as f64).powi(nx as i32);
    if total <= opts.starts as f64 {
        for idx in 0..total as usize {
            let map = sequence_digits(idx, u_size, nx);
            deterministic.push(
                map.iter()
                    .map(|&w| (0..u_size).map(|u| if u == w { 1.0 } else { 0.0 }).collect())
                    .collect(),
            );
        }
    }
    let mut starts: Vec<Vec<Vec<f64>>> = deterministic
        .iter()
        .map(|k: &Vec<Vec<f64>>| {
            k.iter()
                .map(|row| row.iter().map(|&v| 0.9 * v + 0.1 / u_size as f64).collect())
                .collect()
        })
        .collect();
    let mut rng = rng_from_seed(derive_seed(opts.seed, "kernel-start", (nx * 1000 + u_size) as u64));
    while starts.len() < opts.starts.max(1) {
        let k: Vec<Vec<f64>> = (0..nx).map(|_| random_distribution(u_size, &mut rng)).collect();
        starts.push(k);
    }
    (starts, deterministic)
}

fn kernel_search(
    p: &[f64],
    states: &[DensityMatrix],
    nu: &HermitianOperator,
    c: f64,
    u_size: usize,
    opts: &KernelOptions,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if u_size == 0 {
        return Err(Error::Domain("output alphabet must be nonempty".into()));
    }
    let problem = KernelProblem::new(p, states, nu, c)?;
    let (starts, deterministic) = kernel_starts(p.len(), u_size, opts);
    let mut results: Vec<Result<(f64, Vec<Vec<f64>>)>> =
        starts.into_par_iter().map(|s| problem.ascend(s, opts)).collect();
    results.extend(deterministic.into_iter().map(|k| problem.evaluate(&k, false).map(|e| (e.value, k))));
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for r in results {
        let (v, k) = r?;
        if best.as_ref().map_or(true, |(b, _)| v > *b) {
            best = Some((v, k));
        }
    }
    best.ok_or_else(|| Error::Numerical("no kernel start produced a value".into()))
}

fn describe(p: &[f64], states: &[DensityMatrix], kernel: Vec<Vec<f64>>) -> Result<ChannelWithPosterior> {
    let nx = p.len();
    let u_size = kernel[0].len();
    let mut p_u = vec![0.0; u_size];
    let mut post = Vec::with_capacity(u_size);
    let mut sig = Vec::with_capacity(u_size);
    for (u, pu) in p_u.iter_mut().enumerate() {
        let joint: Vec<f64> = (0..nx).map(|x| p[x] * kernel[x][u]).collect();
        *pu = joint.iter().sum();
        if *pu <= NEGLIGIBLE_MASS {
            post.push(None);
            sig.push(None);
            continue;
        }
        let row: Vec<f64> = joint.iter().map(|j| j / *pu).collect();
        let refs: Vec<&DensityMatrix> = states.iter().collect();
        sig.push(Some(DensityMatrix::mixture(&row, &refs)?));
        post.push(Some(row));
    }
    // Rows are softmax outputs; renormalize to absorb rounding before validation.
    let kernel = kernel
        .into_iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.into_iter().map(|v| v / s).collect()
        })
        .collect();
    Ok(ChannelWithPosterior {
        p_u_given_x: StochasticChannel::from_kernel(kernel)?,
        p_u,
        p_x_given_u: post,
        sigma_y_given_u: sig,
    })
}

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    let s: f64 = p.iter().sum();
    if p.iter().any(|&v| !(v >= 0.0)) || (s - 1.0).abs() > crate::tolerance::DISTRIBUTION_TOL {
        return Err(Error::Domain(format!("{name} is not a probability distribution (sum {s})")));
    }
    Ok(())
}

/// `Δ*(Q, Λ, ν, c)` over kernels with `u_size` outputs.
pub fn delta_star(
    q: &[f64],
    channel: &[DensityMatrix],
    nu: &HermitianOperator,
    c: f64,
    u_size: usize,
) -> Result<(f64, ChannelWithPosterior)> {
    delta_star_with(q, channel, nu, c, u_size, &KernelOptions::default())
}

pub fn delta_star_with(
    q: &[f64],
    channel: &[DensityMatrix],
    nu: &HermitianOperator,
    c: f64,
    u_size: usize,
    opts: &KernelOptions,
) -> Result<(f64, ChannelWithPosterior)> {
    check_distribution(q, "input distribution")?;
    let (value, kernel) = kernel_search(q, channel, nu, c, u_size, opts)?;
    Ok((value, describe(q, channel, kernel)?))
}

/// Objective of `Δ*` at a fixed kernel.
pub fn delta_star_objective(q: &[f64], channel: &[DensityMatrix], nu: &HermitianOperator, c: f64, kernel: &StochasticChannel) -> Result<f64> {
    let problem = KernelProblem::new(q, channel, nu, c)?;
    if kernel.in_size() != q.len() {
        return Err(Error::Dimension("kernel input size differs from the alphabet".into()));
    }
    Ok(problem.evaluate(kernel.kernel(), false)?.value)
}

/// `c·I(U;Y) − I(U;X)` evaluated through entropies, for a kernel acting on `q`.
pub fn mutual_information_form(q: &[f64], channel: &[DensityMatrix], c: f64, best: &ChannelWithPosterior) -> Result<f64> {
    let refs: Vec<&DensityMatrix> = channel.iter().collect();
    let rho_y = DensityMatrix::mixture(q, &refs)?;
    let mut cond_y = 0.0;
    let mut i_ux = 0.0;
    for (u, pu) in best.p_u.iter().enumerate() {
        if let (Some(post), Some(sig)) = (&best.p_x_given_u[u], &best.sigma_y_given_u[u]) {
            cond_y += pu * von_neumann_entropy(sig).nats;
            i_ux += pu * classical_kl(post, q).nats;
        }
    }
    Ok(c * (von_neumann_entropy(&rho_y).nats - cond_y) - i_ux)
}

/// `φ(P̃) = sup Σ_u P̃_U(u)[c·D(σ̃_u‖ρ_Y) − D(P̃_{X|U=u}‖Q)]`.
pub fn phi(p_tilde: &[f64], q: &[f64], channel: &[DensityMatrix], rho_y: &DensityMatrix, c: f64, u_size: usize) -> Result<f64> {
    phi_with(p_tilde, q, channel, rho_y, c, u_size, &KernelOptions::default())
}

pub fn phi_with(
    p_tilde: &[f64],
    q: &[f64],
    channel: &[DensityMatrix],
    rho_y: &DensityMatrix,
    c: f64,
    u_size: usize,
    opts: &KernelOptions,
) -> Result<f64> {
    check_distribution(p_tilde, "p_tilde")?;
    check_distribution(q, "q")?;
    if p_tilde.len() != q.len() {
        return Err(Error::Dimension("p_tilde and q differ in length".into()));
    }
    // The penalty against Q splits into the one against P̃ plus the constant D(P̃‖Q).
    let shift = classical_kl(p_tilde, q).nats;
    if !shift.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    let (v, _) = kernel_search(p_tilde, channel, rho_y.op(), c, u_size, opts)?;
    Ok(v - shift)
}

/// `φ(Q) + (c+1)·ln(η)·ε − φ(P̃)` for `P̃ ≤ (1+ε)Q`.
pub fn continuity_margin(
    p_tilde: &[f64],
    q: &[f64],
    channel: &[DensityMatrix],
    rho_y: &DensityMatrix,
    c: f64,
    eps: f64,
    u_size: usize,
) -> Result<InequalityMargin> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps {eps} outside (0,1)")));
    }
    if p_tilde.len() != q.len() {
        return Err(Error::Dimension("p_tilde and q differ in length".into()));
    }
    if let Some(x) = (0..q.len()).find(|&x| p_tilde[x] > (1.0 + eps) * q[x] + 1e-12) {
        return Err(Error::Precondition(format!(
            "p_tilde[{x}] = {} exceeds (1+eps)·q[{x}] = {}",
            p_tilde[x],
            (1.0 + eps) * q[x]
        )));
    }
    let eta = q.iter().map(|v| 1.0 / v).fold(0.0, f64::max);
    let base = phi(q, q, channel, rho_y, c, u_size)?;
    let moved = phi(p_tilde, q, channel, rho_y, c, u_size)?;
    Ok(InequalityMargin::new(
        base + (c + 1.0) * eta.ln() * eps,
        moved,
        format!("continuity;c={c};eps={eps};u={u_size}"),
    ))
}

/// Sequences whose empirical distribution is dominated by `(1+ε_n)Q`.
#[derive(Debug, Clone)]
pub struct TypicalSet {
    pub n: usize,
    pub delta: f64,
    pub eps_n: f64,
    /// Lexicographic indices of members in `𝒳^n`.
    pub members: Vec<usize>,
    /// `Q^{⊗n}` restricted to the members, indexed over all of `𝒳^n`.
    pub mu_n: Vec<f64>,
    pub mass: f64,
}

pub fn typical_set(q: &[f64], n: usize, delta: f64) -> Result<TypicalSet> {
    typical_set_with_limits(q, n, delta, &Limits::default())
}

pub fn typical_set_with_limits(q: &[f64], n: usize, delta: f64, limits: &Limits) -> Result<TypicalSet> {
    check_distribution(q, "q")?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta {delta} outside (0,1)")));
    }
    if q.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain("q must have full support".into()));
    }
    let k = q.len();
    let eta = q.iter().map(|v| 1.0 / v).fold(0.0, f64::max);
    let log_term = (k as f64 / delta).ln();
    let threshold = 3.0 * eta * log_term;
    if !(n as f64 > threshold) {
        return Err(Error::Precondition(format!("n = {n} must exceed 3·η·ln(|X|/δ) = {threshold:.4}")));
    }
    let count = (k as f64).powi(n as i32);
    if count > limits.max_sequences as f64 {
        return Err(Error::ResourceCap(format!("{count} sequences exceed cap {}", limits.max_sequences)));
    }
    let eps_n = ((3.0 * eta / n as f64) * log_term).sqrt();
    let count = count as usize;
    let mut members = Vec::new();
    let mut mu_n = vec![0.0; count];
    let mut mass = 0.0;
    for idx in 0..count {
        let seq = sequence_digits(idx, k, n);
        let mut counts = vec![0usize; k];
        for &x in &seq {
            counts[x] += 1;
        }
        let typical = (0..k).all(|a| counts[a] as f64 / n as f64 <= (1.0 + eps_n) * q[a] + 1e-12);
        if typical {
            let p: f64 = seq.iter().map(|&x| q[x]).product();
            mu_n[idx] = p;
            mass += p;
            members.push(idx);
        }
    }
    if mass < 1.0 - delta - 1e-12 {
        return Err(Error::Numerical(format!("typical set mass {mass} below 1 − δ = {}", 1.0 - delta)));
    }
    Ok(TypicalSet { n, delta, eps_n, members, mu_n, mass })
}

/// Lexicographically ordered product states `ρ^{x^n}`.
pub fn product_states(states: &[DensityMatrix], n: usize) -> Vec<DensityMatrix> {
    let k = states.len();
    (0..k.pow(n as u32))
        .map(|idx| {
            let seq = sequence_digits(idx, k, n);
            seq[1..].iter().fold(states[seq[0]].clone(), |acc, &x| acc.tensor(&states[x]))
        })
        .collect()
}

/// Compares `Δ(μ_n, Λ^{⊗n}, ν^{⊗n}, c)` on the typical set with
/// `n·Δ*(Q, Λ, ν, c) + (c+1)·ln(η)·√(3nη ln(|𝒳|/δ))`.
///
/// The report's `total` is the right-hand side; `constants["lhs"]` and
/// `constants["margin"] = total − lhs` carry the comparison.
pub fn single_letter_gap(
    q: &[f64],
    channel: &[DensityMatrix],
    nu: &DensityMatrix,
    c: f64,
    n: usize,
    delta_param: f64,
    u_size: usize,
) -> Result<BoundReport> {
    single_letter_gap_with(q, channel, nu, c, n, delta_param, u_size, &DeltaOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn single_letter_gap_with(
    q: &[f64],
    channel: &[DensityMatrix],
    nu: &DensityMatrix,
    c: f64,
    n: usize,
    delta_param: f64,
    u_size: usize,
    opts: &DeltaOptions,
) -> Result<BoundReport> {
    let ts = typical_set(q, n, delta_param)?;
    let k = q.len();
    if k.pow(n as u32) > 256 {
        return Err(Error::ResourceCap(format!("|X|^n = {} exceeds 256", k.pow(n as u32))));
    }
    let eta = q.iter().map(|v| 1.0 / v).fold(0.0, f64::max);
    let nu_n = nu.tensor_power(n);
    let inst = DeltaInstance::product(ts.mu_n.clone(), channel, n, nu_n.into_op(), c)?;
    let lhs = delta_with(&inst, opts)?;
    let (star, _) = delta_star(q, channel, nu.op(), c, u_size)?;
    let second = (c + 1.0) * eta.ln() * (3.0 * n as f64 * eta * (k as f64 / delta_param).ln()).sqrt();
    let report = BoundReport::new("single_letter_gap", n as f64 * star, second, 0.0);
    let margin = report.total - lhs.value;
    Ok(report
        .with_constant("lhs", lhs.value)
        .with_constant("margin", margin)
        .with_constant("delta_star", star)
        .with_constant("eps_n", ts.eps_n)
        .with_constant("typical_mass", ts.mass)
        .with_constant("eta", eta)
        .with_witness("typical_members", ts.members.len().to_string()))
}

/// Random interior point of the simplex (for tests and sweeps).
pub fn random_kernel(nx: usize, u_size: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..nx).map(|_| random_distribution(u_size, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_density;

    fn ln2() -> f64 {
        std::f64::consts::LN_2
    }

    #[test]
    fn product_instance_matches_dense() {
        let sites = vec![random_density(2, 11, 0.05).unwrap(), random_density(2, 12, 0.05).unwrap()];
        let nu = random_density(2, 13, 0.2).unwrap();
        let mu = vec![0.1, 0.2, 0.3, 0.15, 0.05, 0.1, 0.05, 0.05];
        let nu3 = nu.tensor_power(3).into_op();
        let dense = DeltaInstance::from_states(mu.clone(), &product_states(&sites, 3), nu3.clone(), 1.3).unwrap();
        let prod = DeltaInstance::product(mu.clone(), &sites, 3, nu3, 1.3).unwrap();
        let g = vec![0.05, 0.1, 0.2, 0.1, 0.15, 0.2, 0.1, 0.1];
        let a = delta_objective(&dense, &g).unwrap();
        let b = delta_objective(&prod, &g).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        let t = random_density(8, 14, 0.05).unwrap().into_op();
        let a = delta_variational_value(&dense, &t).unwrap();
        let b = delta_variational_value(&prod, &t).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn delta_zero_at_channel_image() {
        let states = vec![random_density(2, 1, 0.05).unwrap(), random_density(2, 2, 0.05).unwrap()];
        let mu = vec![0.3, 0.7];
        let nu = DensityMatrix::mixture(&mu, &[&states[0], &states[1]]).unwrap();
        let inst = DeltaInstance::from_states(mu.clone(), &states, nu.into_op(), 1.0).unwrap();
        let sol = delta(&inst).unwrap();
        assert!(sol.value.abs() < 1e-8, "{}", sol.value);
        assert!((sol.gamma[0] - 0.3).abs() < 1e-3);
    }

    #[test]
    fn delta_orthogonal_outputs() {
        let states = vec![DensityMatrix::basis(2, 0), DensityMatrix::basis(2, 1)];
        let nu = DensityMatrix::maximally_mixed(2).into_op();
        let inst = DeltaInstance::from_states(vec![0.5, 0.5], &states, nu, 2.0).unwrap();
        let sol = delta(&inst).unwrap();
        assert!((sol.value - ln2()).abs() < 1e-9, "{}", sol.value);
        assert!(sol.gamma[0] > 1.0 - 1e-9 || sol.gamma[1] > 1.0 - 1e-9);
    }

    #[test]
    fn delta_constant_channel() {
        let nu = random_density(2, 5, 0.05).unwrap();
        let states = vec![nu.clone(), nu.clone(), nu.clone()];
        let inst = DeltaInstance::from_states(vec![0.2, 0.3, 0.5], &states, nu.into_op(), 1.5).unwrap();
        assert!(delta(&inst).unwrap().value.abs() < 1e-10);
    }

    #[test]
    fn delta_errors() {
        let states = vec![DensityMatrix::basis(2, 0)];
        let nu = DensityMatrix::maximally_mixed(2).into_op();
        let inst = DeltaInstance::from_states(vec![0.0], &states, nu.clone(), 1.0).unwrap();
        assert!(matches!(delta(&inst), Err(Error::Domain(_))));
        let singular = HermitianOperator::diagonal(&[1.0, 0.0]);
        assert!(DeltaInstance::from_states(vec![1.0], &states, singular, 1.0).is_err());
    }

    #[test]
    fn variational_identity_and_optimizer() {
        let states = vec![random_density(2, 7, 0.05).unwrap(), random_density(2, 8, 0.05).unwrap()];
        let nu = random_density(2, 9, 0.05).unwrap();
        let mu = vec![0.25, 0.5];
        let inst = DeltaInstance::from_states(mu.clone(), &states, nu.op().clone(), 1.5).unwrap();
        let v = delta_variational_value(&inst, &HermitianOperator::identity(&[2])).unwrap();
        assert!((v - 0.75f64.ln()).abs() < 1e-12);
        let sol = delta(&inst).unwrap();
        let t = induced_operator(&inst, &sol.gamma).unwrap();
        let vt = delta_variational_value(&inst, &t).unwrap();
        assert!((vt - sol.value).abs() < 1e-6, "{vt} {}", sol.value);
        assert!(matches!(
            delta_variational_value(&inst, &HermitianOperator::diagonal(&[1.0, 0.0])),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn delta_star_orthogonal_outputs() {
        let states = vec![DensityMatrix::basis(2, 0), DensityMatrix::basis(2, 1)];
        let rho_y = DensityMatrix::maximally_mixed(2);
        let (v, best) = delta_star(&[0.5, 0.5], &states, rho_y.op(), 2.0, 2).unwrap();
        assert!((v - ln2()).abs() < 1e-8, "{v}");
        let mi = mutual_information_form(&[0.5, 0.5], &states, 2.0, &best).unwrap();
        assert!((mi - v).abs() < 1e-9);
    }

    #[test]
    fn delta_star_constant_channel() {
        let s = random_density(2, 3, 0.05).unwrap();
        let states = vec![s.clone(), s.clone()];
        let (v, _) = delta_star(&[0.4, 0.6], &states, s.op(), 2.0, 3).unwrap();
        assert!(v.abs() < 1e-9, "{v}");
    }

    #[test]
    fn phi_matches_delta_star_at_q() {
        let states = vec![random_density(2, 11, 0.05).unwrap(), random_density(2, 12, 0.05).unwrap()];
        let q = [0.35, 0.65];
        let rho_y = DensityMatrix::mixture(&q, &[&states[0], &states[1]]).unwrap();
        let (ds, _) = delta_star(&q, &states, rho_y.op(), 1.5, 3).unwrap();
        let ph = phi(&q, &q, &states, &rho_y, 1.5, 3).unwrap();
        assert!((ds - ph).abs() < 1e-8);
    }

    #[test]
    fn continuity_examples() {
        let states = vec![random_density(2, 13, 0.05).unwrap(), random_density(2, 14, 0.05).unwrap()];
        let q = [0.4, 0.6];
        let rho_y = DensityMatrix::mixture(&q, &[&states[0], &states[1]]).unwrap();
        let m = continuity_margin(&q, &q, &states, &rho_y, 1.5, 1e-6, 3).unwrap();
        assert!(m.margin >= -1e-5);
        let pt = [0.46, 0.54];
        let m = continuity_margin(&pt, &q, &states, &rho_y, 1.5, 0.2, 3).unwrap();
        assert!(m.margin >= -1e-5, "{m:?}");
        let far = [0.7, 0.3];
        assert!(matches!(continuity_margin(&far, &q, &states, &rho_y, 1.5, 0.2, 3), Err(Error::Precondition(_))));
    }

    #[test]
    fn typical_set_examples() {
        let q = [0.5, 0.5];
        // Threshold 3·2·ln(2/0.9) ≈ 4.79.
        assert!(matches!(typical_set(&q, 4, 0.9), Err(Error::Precondition(_))));
        let ts = typical_set(&q, 8, 0.9).unwrap();
        assert_eq!(ts.members.len(), 254);
        assert!(ts.mass >= 0.1);
        let limit = (1.0 + ts.eps_n) / 2.0;
        for &m in &ts.members {
            let ones = sequence_digits(m, 2, 8).iter().filter(|&&x| x == 1).count() as f64 / 8.0;
            assert!(ones <= limit + 1e-12 && 1.0 - ones <= limit + 1e-12);
        }
    }

    #[test]
    fn grid_points() {
        let g = simplex_grid(3, 4, &[true, true, true]);
        assert_eq!(g.len(), 15);
        let g = simplex_grid(3, 4, &[true, false, true]);
        assert_eq!(g.len(), 5);
        assert!(g.iter().all(|p| p[1] == 0.0));
    }
}
