//! Binary quantum hypothesis testing: optimal Neyman-Pearson tests,
//! classical-quantum sources with classical encoders, brute-force distributed
//! type-II errors and expurgation of test families.

use rayon::prelude::*;

use crate::bounds::BoundReport;
use crate::error::{Error, Result};
use crate::linalg::{weighted_outer, DensityMatrix, HermitianOperator, Matrix, MatrixFunction};
use crate::tolerance::{
    Limits, CLIP_TOL, DISTRIBUTION_TOL, NEGLIGIBLE_MASS, STOCHASTIC_TOL, SUPPORT_TOL,
};

/// `max_x ‖ρ^x σ^{-1}‖_∞`, with the inverse taken on the support of `σ`.
pub fn output_ratio_constant(states: &[DensityMatrix], sigma: &DensityMatrix) -> Result<f64> {
    let inv = sigma.op().apply(MatrixFunction::Power(-1.0))?;
    let mut gamma: f64 = 0.0;
    for s in states {
        if s.dim() != sigma.dim() {
            return Err(Error::Dimension(format!("state of dimension {} against reference {}", s.dim(), sigma.dim())));
        }
        let sq = s.op().apply(MatrixFunction::Power(2.0))?;
        gamma = gamma.max(sq.sandwich(&inv)?.max_eigenvalue().max(0.0).sqrt());
    }
    Ok(gamma)
}

/// Ensemble `{Q(x), ρ^x}` with cached average state and constants `η`, `γ`.
#[derive(Debug, Clone)]
pub struct CQSource {
    alphabet: Vec<String>,
    q_x: Vec<f64>,
    states: Vec<DensityMatrix>,
    rho_y: DensityMatrix,
    eta: f64,
    gamma: f64,
}

impl CQSource {
    pub fn new(alphabet: Vec<String>, q_x: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        if alphabet.len() != q_x.len() || q_x.len() != states.len() || q_x.is_empty() {
            return Err(Error::Dimension(format!(
                "alphabet ({}), q_x ({}) and states ({}) must have equal nonzero length",
                alphabet.len(),
                q_x.len(),
                states.len()
            )));
        }
        let total: f64 = q_x.iter().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOL {
            return Err(Error::Validation(format!(
                "q_x sums to {total:.12}, not 1 within {DISTRIBUTION_TOL:.0e}"
            )));
        }
        if let Some(i) = q_x.iter().position(|&p| !(p > 0.0)) {
            return Err(Error::Validation(format!("q_x[{i}] = {} is not positive", q_x[i])));
        }
        let d = states[0].dim();
        if let Some(i) = states.iter().position(|s| s.dim() != d) {
            return Err(Error::Dimension(format!("state {i} has dimension {} not {d}", states[i].dim())));
        }
        let refs: Vec<&DensityMatrix> = states.iter().collect();
        let rho_y = DensityMatrix::mixture(&q_x, &refs)?;
        let eta = q_x.iter().map(|p| 1.0 / p).fold(0.0, f64::max);
        let gamma = output_ratio_constant(&states, &rho_y)?;
        Ok(CQSource { alphabet, q_x, states, rho_y, eta, gamma })
    }

    /// Source whose letters are labelled `0, 1, …`.
    pub fn unlabelled(q_x: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        let alphabet = (0..q_x.len()).map(|i| i.to_string()).collect();
        CQSource::new(alphabet, q_x, states)
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn q_x(&self) -> &[f64] {
        &self.q_x
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn rho_y(&self) -> &DensityMatrix {
        &self.rho_y
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn size(&self) -> usize {
        self.q_x.len()
    }

    pub fn d_y(&self) -> usize {
        self.rho_y.dim()
    }

    /// Rejects sources whose average output state is singular.
    pub fn require_full_rank_output(&self) -> Result<()> {
        if self.rho_y.is_full_rank() {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "average output state is singular (smallest eigenvalue {:.3e})",
                self.rho_y.min_eig()
            )))
        }
    }

    /// `Σ Q(x) |x⟩⟨x| ⊗ ρ^x` as a dense bipartite state.
    pub fn joint_state(&self) -> Result<DensityMatrix> {
        let k = self.size();
        let mut acc: Option<HermitianOperator> = None;
        for (x, (p, s)) in self.q_x.iter().zip(&self.states).enumerate() {
            let mut e = vec![0.0; k];
            e[x] = *p;
            let block = HermitianOperator::diagonal(&e).tensor(s.op());
            acc = Some(match acc {
                None => block,
                Some(a) => a.add(&block)?,
            });
        }
        DensityMatrix::new(acc.expect("nonempty alphabet"))
    }

    /// `ρ_X ⊗ ρ_Y` as a dense bipartite state.
    pub fn product_of_marginals(&self) -> Result<DensityMatrix> {
        Ok(DensityMatrix::diagonal(&self.q_x)?.tensor(&self.rho_y))
    }
}

/// `n`-fold memoryless extension over `𝒳^n`, sequences in lexicographic order.
pub fn product_source(src: &CQSource, n: usize) -> Result<CQSource> {
    product_source_with_limits(src, n, &Limits::default())
}

pub fn product_source_with_limits(src: &CQSource, n: usize, limits: &Limits) -> Result<CQSource> {
    if n == 0 {
        return Err(Error::Domain("block length must be positive".into()));
    }
    let k = src.size();
    let joint = (k as f64).powi(n as i32) * (src.d_y() as f64).powi(n as i32);
    if joint > limits.max_joint_dim as f64 {
        return Err(Error::ResourceCap(format!(
            "product source has |X|^n * d^n = {joint} > cap {}",
            limits.max_joint_dim
        )));
    }
    let count = k.pow(n as u32);
    let mut alphabet = Vec::with_capacity(count);
    let mut q = Vec::with_capacity(count);
    let mut states = Vec::with_capacity(count);
    for idx in 0..count {
        let seq = sequence_digits(idx, k, n);
        alphabet.push(seq.iter().map(|&x| src.alphabet[x].as_str()).collect::<Vec<_>>().join(","));
        q.push(seq.iter().map(|&x| src.q_x[x]).product::<f64>());
        let mut st = src.states[seq[0]].clone();
        for &x in &seq[1..] {
            st = st.tensor(&src.states[x]);
        }
        states.push(st);
    }
    let rho_y = src.rho_y.tensor_power(n);
    let eta = src.eta.powi(n as i32);
    let gamma = src.gamma.powi(n as i32);
    Ok(CQSource { alphabet, q_x: q, states, rho_y, eta, gamma })
}

/// Base-`k` digits of `idx`, most significant first.
pub fn sequence_digits(mut idx: usize, k: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = idx % k;
        idx /= k;
    }
    out
}

/// Row-stochastic kernel `P(u|x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticChannel {
    in_alphabet: Vec<String>,
    out_alphabet: Vec<String>,
    kernel: Vec<Vec<f64>>,
}

impl StochasticChannel {
    pub fn new(in_alphabet: Vec<String>, out_alphabet: Vec<String>, kernel: Vec<Vec<f64>>) -> Result<Self> {
        if kernel.len() != in_alphabet.len() {
            return Err(Error::Dimension(format!(
                "kernel has {} rows for {} inputs",
                kernel.len(),
                in_alphabet.len()
            )));
        }
        for (x, row) in kernel.iter().enumerate() {
            if row.len() != out_alphabet.len() {
                return Err(Error::Dimension(format!("kernel row {x} has length {}", row.len())));
            }
            if let Some(u) = row.iter().position(|&p| !(p >= 0.0)) {
                return Err(Error::Validation(format!("kernel entry ({x},{u}) = {} is negative", row[u])));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Validation(format!(
                    "kernel row {x} sums to {s:.15}, not 1 within {STOCHASTIC_TOL:.0e}"
                )));
            }
        }
        Ok(StochasticChannel { in_alphabet, out_alphabet, kernel })
    }

    /// Kernel over unlabelled alphabets `0..rows` and `0..cols`.
    pub fn from_kernel(kernel: Vec<Vec<f64>>) -> Result<Self> {
        let cols = kernel.first().map_or(0, |r| r.len());
        StochasticChannel::new(numbered(kernel.len()), numbered(cols), kernel)
    }

    pub fn identity(alphabet: &[String]) -> Self {
        let k = alphabet.len();
        let kernel = (0..k).map(|x| (0..k).map(|u| if u == x { 1.0 } else { 0.0 }).collect()).collect();
        StochasticChannel { in_alphabet: alphabet.to_vec(), out_alphabet: alphabet.to_vec(), kernel }
    }

    /// Deterministic map `x ↦ map[x]` into `0..out_size`.
    pub fn deterministic(in_alphabet: &[String], out_size: usize, map: &[usize]) -> Result<Self> {
        if map.len() != in_alphabet.len() || map.iter().any(|&u| u >= out_size) {
            return Err(Error::Dimension("deterministic map does not fit the alphabets".into()));
        }
        let kernel = map
            .iter()
            .map(|&w| (0..out_size).map(|u| if u == w { 1.0 } else { 0.0 }).collect())
            .collect();
        Ok(StochasticChannel { in_alphabet: in_alphabet.to_vec(), out_alphabet: numbered(out_size), kernel })
    }

    /// Every input mapped to the same output distribution.
    pub fn constant(in_alphabet: &[String], output: &[f64]) -> Result<Self> {
        let kernel = vec![output.to_vec(); in_alphabet.len()];
        StochasticChannel::new(in_alphabet.to_vec(), numbered(output.len()), kernel)
    }

    pub fn in_alphabet(&self) -> &[String] {
        &self.in_alphabet
    }

    pub fn out_alphabet(&self) -> &[String] {
        &self.out_alphabet
    }

    pub fn kernel(&self) -> &[Vec<f64>] {
        &self.kernel
    }

    pub fn in_size(&self) -> usize {
        self.kernel.len()
    }

    pub fn out_size(&self) -> usize {
        self.out_alphabet.len()
    }

    /// Output index for each input when the kernel is deterministic.
    pub fn as_map(&self) -> Option<Vec<usize>> {
        self.kernel
            .iter()
            .map(|row| row.iter().position(|&p| p == 1.0))
            .collect()
    }
}

fn numbered(k: usize) -> Vec<String> {
    (0..k).map(|i| i.to_string()).collect()
}

/// Per-message tests `T^w`, each with `0 ≤ T^w ≤ 𝟙`.
#[derive(Debug, Clone)]
pub struct TestFamily {
    messages: Vec<usize>,
    operators: Vec<HermitianOperator>,
}

impl TestFamily {
    pub fn new(messages: Vec<usize>, operators: Vec<HermitianOperator>) -> Result<Self> {
        if messages.len() != operators.len() {
            return Err(Error::Dimension("messages and operators differ in length".into()));
        }
        let operators = operators
            .into_iter()
            .enumerate()
            .map(|(w, t)| validate_test(&t).map_err(|e| Error::InvalidTest(format!("message {w}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(TestFamily { messages, operators })
    }

    pub fn messages(&self) -> &[usize] {
        &self.messages
    }

    pub fn operators(&self) -> &[HermitianOperator] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

/// Checks `0 ≤ T ≤ 𝟙` up to `1e−10` and clips the spectrum into `[0,1]`.
pub fn validate_test(t: &HermitianOperator) -> Result<HermitianOperator> {
    let spec = t.eig();
    let lo = spec.values.first().copied().unwrap_or(0.0);
    let hi = spec.values.last().copied().unwrap_or(0.0);
    if lo < -CLIP_TOL || hi > 1.0 + CLIP_TOL {
        return Err(Error::InvalidTest(format!("spectrum [{lo:.3e}, {hi:.3e}] outside [0,1]")));
    }
    if lo < 0.0 || hi > 1.0 {
        let m = spec.reconstruct(|l| l.clamp(0.0, 1.0));
        return HermitianOperator::new(m, t.subsystem_dims().to_vec());
    }
    Ok(t.clone())
}

/// Type-I error `α` and type-II error `β` of a test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPair {
    pub alpha: f64,
    pub beta: f64,
}

pub fn errors_of_test(t: &HermitianOperator, rho0: &DensityMatrix, rho1: &DensityMatrix) -> Result<ErrorPair> {
    let t = validate_test(t)?;
    if t.dim() != rho0.dim() || t.dim() != rho1.dim() {
        return Err(Error::Dimension("test and states differ in dimension".into()));
    }
    let alpha = (1.0 - rho0.op().trace_product(&t)).clamp(0.0, 1.0);
    let beta = rho1.op().trace_product(&t).clamp(0.0, 1.0);
    Ok(ErrorPair { alpha, beta })
}

/// One diagonal block of a block-diagonal testing problem (sub-normalized).
struct Block<'a> {
    null: &'a HermitianOperator,
    alt: &'a HermitianOperator,
}

struct BlockSpectrum {
    values: Vec<f64>,
    vectors: Matrix,
    null_weight: Vec<f64>,
}

fn block_spectrum(b: &Block<'_>, t: f64) -> Result<BlockSpectrum> {
    let a = b.null.combine(1.0, b.alt, -t)?;
    let spec = a.eig();
    let null_weight = spec.diagonal_in_basis(b.null.matrix());
    Ok(BlockSpectrum { values: spec.values, vectors: spec.vectors, null_weight })
}

fn positive_null_mass(blocks: &[Block<'_>], t: f64) -> Result<f64> {
    let mut acc = 0.0;
    for b in blocks {
        let s = block_spectrum(b, t)?;
        acc += s
            .values
            .iter()
            .zip(&s.null_weight)
            .filter(|(&l, _)| l > 0.0)
            .map(|(_, &w)| w)
            .sum::<f64>();
    }
    Ok(acc)
}

/// Minimum of `Σ tr[B_w T_w]` subject to `Σ tr[A_w T_w] ≥ 1−ε` over block tests.
fn neyman_pearson_blocks(blocks: &[Block<'_>], eps: f64) -> Result<(f64, Vec<HermitianOperator>)> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Domain(format!("type-I budget {eps} outside [0,1)")));
    }
    let target = 1.0 - eps;

    // Support of the null hypothesis outside the alternative's support is free.
    let mut kernel_tests = Vec::with_capacity(blocks.len());
    let mut kernel_mass = 0.0;
    for b in blocks {
        let s = b.alt.eig();
        let w: Vec<f64> = s.values.iter().map(|&l| if l <= SUPPORT_TOL { 1.0 } else { 0.0 }).collect();
        let k = HermitianOperator::new(weighted_outer(s.vectors.as_ref(), &w), b.alt.subsystem_dims().to_vec())?;
        kernel_mass += b.null.trace_product(&k);
        kernel_tests.push(k);
    }
    if kernel_mass >= target {
        let beta: f64 = blocks.iter().zip(&kernel_tests).map(|(b, k)| b.alt.trace_product(k)).sum();
        return Ok((beta.clamp(0.0, 1.0), kernel_tests));
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while positive_null_mass(blocks, hi)? >= target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1000 {
            return Err(Error::Numerical("threshold search diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if positive_null_mass(blocks, mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_star = 0.5 * (lo + hi);
    let tol = 1e-10 * t_star.max(1.0);

    let spectra = blocks.iter().map(|b| block_spectrum(b, t_star)).collect::<Result<Vec<_>>>()?;
    let mut above = 0.0;
    let mut boundary = 0.0;
    for s in &spectra {
        for (&l, &w) in s.values.iter().zip(&s.null_weight) {
            if l > tol {
                above += w;
            } else if l >= -tol {
                boundary += w;
            }
        }
    }
    // weights[block][k] ∈ [0,1] assigned to each eigenvector.
    let mut weights: Vec<Vec<f64>> = spectra
        .iter()
        .map(|s| s.values.iter().map(|&l| if l > tol { 1.0 } else { 0.0 }).collect())
        .collect();
    if above < target {
        if above + boundary >= target && boundary > 0.0 {
            let x = ((target - above) / boundary).clamp(0.0, 1.0);
            for (s, w) in spectra.iter().zip(weights.iter_mut()) {
                for (k, &l) in s.values.iter().enumerate() {
                    if l <= tol && l >= -tol {
                        w[k] = x;
                    }
                }
            }
        } else {
            // Misclassified boundary: fill greedily in decreasing eigenvalue order.
            let mut rest: Vec<(f64, usize, usize)> = Vec::new();
            for (bi, s) in spectra.iter().enumerate() {
                for (k, &l) in s.values.iter().enumerate() {
                    if l <= tol {
                        rest.push((l, bi, k));
                    }
                }
            }
            rest.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut mass = above;
            for (_, bi, k) in rest {
                if mass >= target {
                    break;
                }
                let w = spectra[bi].null_weight[k];
                let x = if w > 0.0 { ((target - mass) / w).min(1.0) } else { 0.0 };
                weights[bi][k] = x;
                mass += x * w;
            }
        }
    }
    let mut beta = 0.0;
    let mut tests = Vec::with_capacity(blocks.len());
    for ((b, s), w) in blocks.iter().zip(&spectra).zip(&weights) {
        let t = HermitianOperator::new(weighted_outer(s.vectors.as_ref(), w), b.alt.subsystem_dims().to_vec())?;
        beta += b.alt.trace_product(&t);
        tests.push(t);
    }
    Ok((beta.clamp(0.0, 1.0), tests))
}

/// Optimal type-II error under type-I budget `ε`, with an optimal test.
pub fn neyman_pearson_beta(rho0: &DensityMatrix, rho1: &DensityMatrix, eps: f64) -> Result<(f64, HermitianOperator)> {
    if rho0.dim() != rho1.dim() {
        return Err(Error::Dimension("hypotheses differ in dimension".into()));
    }
    let block = Block { null: rho0.op(), alt: rho1.op() };
    let (beta, mut tests) = neyman_pearson_blocks(&[block], eps)?;
    Ok((beta, tests.pop().expect("one block")))
}

/// One message of an encoded source.
#[derive(Debug, Clone)]
pub struct EncodedBlock {
    pub message: usize,
    pub prob: f64,
    pub state: DensityMatrix,
}

/// Message distribution and conditional output states after a classical encoder.
#[derive(Debug, Clone)]
pub struct EncodedSource {
    pub p_w: Vec<f64>,
    pub blocks: Vec<EncodedBlock>,
}

pub fn apply_encoder(src_n: &CQSource, enc: &StochasticChannel) -> Result<EncodedSource> {
    if enc.in_size() != src_n.size() || enc.in_alphabet() != src_n.alphabet() {
        return Err(Error::Dimension(format!(
            "encoder input alphabet ({} letters) does not match the source ({} letters)",
            enc.in_size(),
            src_n.size()
        )));
    }
    let w_size = enc.out_size();
    let mut p_w = vec![0.0; w_size];
    let mut blocks = Vec::new();
    for (w, p) in p_w.iter_mut().enumerate() {
        let weights: Vec<f64> = (0..src_n.size()).map(|x| src_n.q_x[x] * enc.kernel[x][w]).collect();
        *p = weights.iter().sum();
        if *p <= NEGLIGIBLE_MASS {
            continue;
        }
        let normalized: Vec<f64> = weights.iter().map(|v| v / *p).collect();
        let refs: Vec<&DensityMatrix> = src_n.states.iter().collect();
        let state = DensityMatrix::mixture(&normalized, &refs)?;
        blocks.push(EncodedBlock { message: w, prob: *p, state });
    }
    Ok(EncodedSource { p_w, blocks })
}

/// `max(1, ⌊e^{n r}⌋)` messages at rate `r` nats per letter.
pub fn message_count(n: usize, r: f64) -> usize {
    let v = (n as f64 * r).exp();
    if !v.is_finite() || v >= usize::MAX as f64 {
        return usize::MAX;
    }
    ((v + 1e-9).floor() as usize).max(1)
}

/// Outcome of the deterministic-encoder search.
#[derive(Debug, Clone)]
pub struct DistributedBeta {
    pub beta: f64,
    pub encoder: StochasticChannel,
    pub record: BoundReport,
}

/// Smallest Neyman-Pearson type-II error over deterministic encoders
/// `𝒳^n → 𝒲` for testing `ρ_XY^{⊗n}` against `ρ_X^{⊗n} ⊗ ρ_Y^{⊗n}`.
///
/// Restricting to deterministic encoders gives an upper bound on the
/// infimum over all classical encoders.
pub fn brute_force_beta_distributed(src: &CQSource, n: usize, r1: f64, eps: f64) -> Result<DistributedBeta> {
    brute_force_beta_with_limits(src, n, r1, eps, &Limits::default())
}

pub fn brute_force_beta_with_limits(
    src: &CQSource,
    n: usize,
    r1: f64,
    eps: f64,
    limits: &Limits,
) -> Result<DistributedBeta> {
    if !(r1 >= 0.0) {
        return Err(Error::Domain(format!("rate {r1} must be nonnegative")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("type-I budget {eps} outside (0,1)")));
    }
    let src_n = product_source_with_limits(src, n, limits)?;
    let seqs = src_n.size();
    let w = message_count(n, r1);
    let alt = src_n.rho_y.op().clone();

    let evaluate = |map: &[usize], w_size: usize| -> Result<f64> {
        let mut nulls: Vec<Option<Matrix>> = vec![None; w_size];
        let mut probs = vec![0.0; w_size];
        for (x, &m) in map.iter().enumerate() {
            let q = src_n.q_x[x];
            probs[m] += q;
            let add = faer::scale(crate::linalg::cplx(q, 0.0)) * src_n.states[x].op().matrix();
            nulls[m] = Some(match nulls[m].take() {
                None => add,
                Some(acc) => &acc + &add,
            });
        }
        let dims = alt.subsystem_dims().to_vec();
        let mut null_ops = Vec::new();
        let mut alt_ops = Vec::new();
        for (m, p) in probs.iter().enumerate() {
            if *p <= NEGLIGIBLE_MASS {
                continue;
            }
            null_ops.push(HermitianOperator::new(nulls[m].take().expect("mass implies block"), dims.clone())?);
            alt_ops.push(alt.scale(*p));
        }
        let blocks: Vec<Block<'_>> = null_ops.iter().zip(&alt_ops).map(|(a, b)| Block { null: a, alt: b }).collect();
        Ok(neyman_pearson_blocks(&blocks, eps)?.0)
    };

    if w >= seqs {
        // Any encoder is a post-processing of the identity.
        let map: Vec<usize> = (0..seqs).collect();
        let beta = evaluate(&map, seqs)?;
        let encoder = StochasticChannel::deterministic(&src_n.alphabet, seqs, &map)?;
        let record = distributed_record(n, beta, w, 1, "identity");
        return Ok(DistributedBeta { beta, encoder, record });
    }

    let count = (w as f64).powi(seqs as i32);
    if count > limits.max_encoders as f64 {
        return Err(Error::ResourceCap(format!(
            "{count} deterministic encoders exceed cap {}; need max_encoders >= {count}",
            limits.max_encoders
        )));
    }
    let count = count as u64;
    let results: Vec<Result<f64>> = (0..count)
        .into_par_iter()
        .map(|e| evaluate(&sequence_digits(e as usize, w, seqs), w))
        .collect();
    let mut best: Option<(u64, f64)> = None;
    for (e, r) in results.into_iter().enumerate() {
        let beta = r?;
        if best.map_or(true, |(_, b)| beta < b) {
            best = Some((e as u64, beta));
        }
    }
    let (idx, beta) = best.expect("at least one encoder");
    let map = sequence_digits(idx as usize, w, seqs);
    let encoder = StochasticChannel::deterministic(&src_n.alphabet, w, &map)?;
    let label = map.iter().map(|m| m.to_string()).collect::<Vec<_>>().join("");
    let record = distributed_record(n, beta, w, count, &label);
    Ok(DistributedBeta { beta, encoder, record })
}

fn distributed_record(n: usize, beta: f64, w: usize, encoders: u64, map: &str) -> BoundReport {
    let exponent = if beta > 0.0 { -beta.ln() / n as f64 } else { f64::INFINITY };
    BoundReport::new("brute_force_exponent", exponent, 0.0, 0.0)
        .with_constant("beta", beta)
        .with_constant("messages", w as f64)
        .with_constant("encoders_searched", encoders as f64)
        .with_witness("encoder_map", map)
}

/// Result of expurgating a test family.
#[derive(Debug, Clone)]
pub struct Expurgation {
    /// Family reordered by nondecreasing conditional type-II error, tail zeroed.
    pub family: TestFamily,
    /// Message probabilities in the new order.
    pub probs: Vec<f64>,
    /// Number of retained messages (positions `0..retained`).
    pub retained: usize,
    pub alpha_before: f64,
    pub alpha_after: f64,
    pub beta_before: f64,
    /// Largest `tr[ρ_Y^{⊗n} T̃^w]` over retained messages.
    pub worst_retained_beta: f64,
}

impl Expurgation {
    /// Violations of `α̃ ≤ α + ε'` and `max_w β̃_w ≤ β/ε'` (both ≤ 0 when they hold).
    pub fn postcondition_slack(&self, eps_prime: f64) -> (f64, f64) {
        (
            self.alpha_after - (self.alpha_before + eps_prime),
            self.worst_retained_beta - self.beta_before / eps_prime,
        )
    }
}

/// Zeroes the tests of the worst messages whose total probability is at most `ε'`.
pub fn expurgate(
    test: &TestFamily,
    encoded: &EncodedSource,
    rho1_block: &DensityMatrix,
    eps_prime: f64,
) -> Result<Expurgation> {
    if !(eps_prime > 0.0 && eps_prime < 1.0) {
        return Err(Error::Domain(format!("expurgation budget {eps_prime} outside (0,1)")));
    }
    if test.len() != encoded.blocks.len() {
        return Err(Error::Dimension(format!(
            "{} tests for {} encoded messages",
            test.len(),
            encoded.blocks.len()
        )));
    }
    let m = test.len();
    let cond_beta: Vec<f64> = test.operators.iter().map(|t| rho1_block.op().trace_product(t)).collect();
    let cond_alpha: Vec<f64> = test
        .operators
        .iter()
        .zip(&encoded.blocks)
        .map(|(t, b)| 1.0 - b.state.op().trace_product(t))
        .collect();
    let probs: Vec<f64> = encoded.blocks.iter().map(|b| b.prob).collect();
    let alpha_before: f64 = probs.iter().zip(&cond_alpha).map(|(p, a)| p * a).sum();
    let beta_before: f64 = probs.iter().zip(&cond_beta).map(|(p, b)| p * b).sum();

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| cond_beta[a].total_cmp(&cond_beta[b]));

    // Smallest position whose strict tail has mass at most ε'.
    let mut tail = 0.0;
    let mut cutoff = m.saturating_sub(1);
    for pos in (0..m).rev() {
        if tail > eps_prime {
            break;
        }
        cutoff = pos;
        tail += probs[order[pos]];
    }
    let retained = if m == 0 { 0 } else { cutoff + 1 };

    let mut messages = Vec::with_capacity(m);
    let mut operators = Vec::with_capacity(m);
    let mut new_probs = Vec::with_capacity(m);
    let mut alpha_after = 0.0;
    let mut worst: f64 = 0.0;
    for (pos, &i) in order.iter().enumerate() {
        messages.push(test.messages[i]);
        new_probs.push(probs[i]);
        if pos < retained {
            operators.push(test.operators[i].clone());
            alpha_after += probs[i] * cond_alpha[i];
            worst = worst.max(cond_beta[i]);
        } else {
            operators.push(HermitianOperator::zeros(test.operators[i].subsystem_dims()));
            alpha_after += probs[i];
        }
    }
    Ok(Expurgation {
        family: TestFamily { messages, operators },
        probs: new_probs,
        retained,
        alpha_before,
        alpha_after,
        beta_before,
        worst_retained_beta: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_pure_state, rng_from_seed};

    fn binary_source() -> CQSource {
        let s0 = DensityMatrix::diagonal(&[0.9, 0.1]).unwrap();
        let s1 = random_density(2, 17, 0.05).unwrap();
        CQSource::unlabelled(vec![0.4, 0.6], vec![s0, s1]).unwrap()
    }

    #[test]
    fn np_examples() {
        let rho = random_density(3, 2, 0.0).unwrap();
        let (beta, _) = neyman_pearson_beta(&rho, &rho, 0.3).unwrap();
        assert!((beta - 0.7).abs() < 1e-12);

        let a = DensityMatrix::basis(2, 0);
        let b = DensityMatrix::basis(2, 1);
        for &eps in &[0.0, 0.2, 0.7] {
            assert!(neyman_pearson_beta(&a, &b, eps).unwrap().0.abs() < 1e-15);
        }

        let r0 = DensityMatrix::diagonal(&[0.75, 0.25]).unwrap();
        let r1 = DensityMatrix::diagonal(&[0.25, 0.75]).unwrap();
        let (beta, test) = neyman_pearson_beta(&r0, &r1, 0.25).unwrap();
        assert!((beta - 0.25).abs() < 1e-12);
        let e = errors_of_test(&test, &r0, &r1).unwrap();
        assert!(e.alpha <= 0.25 + 1e-10);
        assert!(matches!(neyman_pearson_beta(&r0, &r1, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn errors_of_trivial_tests() {
        let r0 = random_density(2, 3, 0.0).unwrap();
        let r1 = random_density(2, 4, 0.0).unwrap();
        let id = HermitianOperator::identity(&[2]);
        let e = errors_of_test(&id, &r0, &r1).unwrap();
        assert!(e.alpha.abs() < 1e-15 && (e.beta - 1.0).abs() < 1e-15);
        let e = errors_of_test(&HermitianOperator::zeros(&[2]), &r0, &r1).unwrap();
        assert!((e.alpha - 1.0).abs() < 1e-15 && e.beta.abs() < 1e-15);
        let e = errors_of_test(&id.scale(0.5), &r0, &r1).unwrap();
        assert!((e.alpha - 0.5).abs() < 1e-15 && (e.beta - 0.5).abs() < 1e-15);
        let bad = HermitianOperator::diagonal(&[1.2, 0.0]);
        assert!(matches!(errors_of_test(&bad, &r0, &r1), Err(Error::InvalidTest(_))));
    }

    #[test]
    fn source_constants() {
        let src = binary_source();
        assert!((src.eta() - 2.5).abs() < 1e-15);
        assert!(src.gamma() >= 1.0 - 1e-12);
        let bad = CQSource::unlabelled(vec![0.5, 0.49], src.states().to_vec());
        assert!(matches!(bad, Err(Error::Validation(_))));
        let zero = CQSource::unlabelled(vec![1.0, 0.0], src.states().to_vec());
        assert!(matches!(zero, Err(Error::Validation(_))));
    }

    #[test]
    fn product_source_examples() {
        let src = binary_source();
        let one = product_source(&src, 1).unwrap();
        assert_eq!(one.q_x(), src.q_x());
        let two = product_source(&src, 2).unwrap();
        assert_eq!(two.size(), 4);
        assert!((two.q_x()[1] - 0.24).abs() < 1e-15);
        assert_eq!(two.alphabet()[2], "1,0");
        assert!((two.eta() - 6.25).abs() < 1e-12);

        // Independent operator-norm evaluation of γ on the product.
        let inv = two.rho_y().op().apply(MatrixFunction::Power(-1.0)).unwrap();
        let mut g: f64 = 0.0;
        for s in two.states() {
            let m = s.op().product(&inv).unwrap();
            let mm = m.adjoint() * &m;
            let h = HermitianOperator::from_matrix(mm).unwrap();
            g = g.max(h.max_eigenvalue().sqrt());
        }
        assert!((g - src.gamma().powi(2)).abs() < 1e-9);

        let tight = Limits { max_joint_dim: 8, ..Limits::default() };
        assert!(matches!(product_source_with_limits(&src, 2, &tight), Err(Error::ResourceCap(_))));
    }

    #[test]
    fn encoder_examples() {
        let src = binary_source();
        let id = StochasticChannel::identity(src.alphabet());
        let enc = apply_encoder(&src, &id).unwrap();
        assert_eq!(enc.p_w, src.q_x());
        assert!(enc.blocks[1].state.op().max_abs_diff(src.states()[1].op()) < 1e-15);

        let c = StochasticChannel::constant(src.alphabet(), &[1.0]).unwrap();
        let enc = apply_encoder(&src, &c).unwrap();
        assert_eq!(enc.blocks.len(), 1);
        assert!(enc.blocks[0].state.op().max_abs_diff(src.rho_y().op()) < 1e-15);

        let k = StochasticChannel::from_kernel(vec![vec![0.3, 0.7], vec![0.8, 0.2]]).unwrap();
        let enc = apply_encoder(&src, &k).unwrap();
        let p0 = 0.4 * 0.3 + 0.6 * 0.8;
        assert!((enc.p_w[0] - p0).abs() < 1e-15);
        let hand = src.states()[0].op().combine(0.4 * 0.3 / p0, src.states()[1].op(), 0.6 * 0.8 / p0).unwrap();
        assert!(enc.blocks[0].state.op().max_abs_diff(&hand) < 1e-15);

        let wrong = StochasticChannel::identity(&["a".into(), "b".into(), "c".into()]);
        assert!(matches!(apply_encoder(&src, &wrong), Err(Error::Dimension(_))));
    }

    #[test]
    fn channel_validation() {
        assert!(matches!(StochasticChannel::from_kernel(vec![vec![0.5, 0.4]]), Err(Error::Validation(_))));
        assert!(matches!(StochasticChannel::from_kernel(vec![vec![1.2, -0.2]]), Err(Error::Validation(_))));
    }

    #[test]
    fn message_counts() {
        assert_eq!(message_count(3, 0.0), 1);
        assert_eq!(message_count(1, 2f64.ln()), 2);
        assert_eq!(message_count(2, 0.3), 1);
        assert_eq!(message_count(2, 0.35), 2);
    }

    #[test]
    fn brute_force_limits() {
        let src = binary_source();
        let none = brute_force_beta_distributed(&src, 2, 0.0, 0.2).unwrap();
        assert!((none.beta - 0.8).abs() < 1e-10);

        let all = brute_force_beta_distributed(&src, 2, 2.0, 0.2).unwrap();
        let src2 = product_source(&src, 2).unwrap();
        let (direct, _) =
            neyman_pearson_beta(&src2.joint_state().unwrap(), &src2.product_of_marginals().unwrap(), 0.2).unwrap();
        assert!((all.beta - direct).abs() < 1e-9);

        let tight = Limits { max_encoders: 10, ..Limits::default() };
        let err = brute_force_beta_with_limits(&src, 2, 0.4, 0.2, &tight);
        assert!(matches!(err, Err(Error::ResourceCap(_))));
    }

    #[test]
    fn expurgation_examples() {
        let mut rng = rng_from_seed(31);
        let states: Vec<DensityMatrix> = (0..4).map(|_| random_pure_state(2, &mut rng)).collect();
        let src = CQSource::unlabelled(vec![0.1, 0.2, 0.3, 0.4], states).unwrap();
        let enc = apply_encoder(&src, &StochasticChannel::identity(src.alphabet())).unwrap();
        let tests: Vec<HermitianOperator> = (0..4).map(|_| crate::random::random_test(2, &mut rng)).collect();
        let fam = TestFamily::new((0..4).collect(), tests).unwrap();
        for &ep in &[0.05, 0.25, 0.5, 0.9] {
            let ex = expurgate(&fam, &enc, src.rho_y(), ep).unwrap();
            let (a, b) = ex.postcondition_slack(ep);
            assert!(a <= 1e-10 && b <= 1e-10, "eps'={ep}: {a} {b}");
        }
        // Small budget keeps everything when the last message carries more than ε'.
        let ex = expurgate(&fam, &enc, src.rho_y(), 0.05).unwrap();
        assert_eq!(ex.retained, 4);

        let one_src = CQSource::unlabelled(vec![1.0], vec![DensityMatrix::maximally_mixed(2)]).unwrap();
        let one_enc = apply_encoder(&one_src, &StochasticChannel::identity(one_src.alphabet())).unwrap();
        let one = TestFamily::new(vec![0], vec![HermitianOperator::identity(&[2]).scale(0.3)]).unwrap();
        let ex = expurgate(&one, &one_enc, one_src.rho_y(), 0.5).unwrap();
        assert_eq!(ex.retained, 1);
        assert!(ex.family.operators()[0].max_abs_diff(&one.operators()[0]) < 1e-15);
    }
}
