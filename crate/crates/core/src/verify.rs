//! Seeded verification suites.
//!
//! Each suite draws its instances from `derive_seed(seed, suite, i)`, evaluates
//! them as a parallel map and returns rows in instance order, so the output
//! depends only on the seed.

use rand::Rng;
use rayon::prelude::*;

use crate::bottleneck::{continuity_margin, delta_star, delta_with, random_kernel, single_letter_gap, DeltaInstance, DeltaOptions};
use crate::bounds::{bottleneck_sup_constrained, image_size_bound_i, sc_bound_stein_on_curve, theta_n_lower, DualCurve};
use crate::entropy::{relative_entropy, relative_entropy_variational_value, renyi_relative_entropy, shannon_entropy};
use crate::error::Result;
use crate::hypothesis::{
    apply_encoder, brute_force_beta_distributed, errors_of_test, expurgate, neyman_pearson_beta, product_source, CQSource,
    StochasticChannel, TestFamily,
};
use crate::linalg::{DensityMatrix, HermitianOperator, MatrixFunction};
use crate::random::{
    derive_seed, random_density_with, random_distribution, random_positive, random_psd, random_test, rng_from_seed,
    IsometricChannel,
};
use crate::semigroup::{check_alt, check_reverse_alt, check_reverse_holder, check_rhc, InequalityMargin};

/// One checked inequality or identity. The check passes when `margin ≥ −tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub suite: &'static str,
    pub check: &'static str,
    pub instance_id: usize,
    pub seed: u64,
    pub params: Vec<(&'static str, f64)>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.margin >= -self.tolerance
    }

    pub fn params_string(&self) -> String {
        self.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub seed: u64,
    pub rows: Vec<CheckRow>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(CheckRow::passed)
    }

    pub fn failures(&self) -> Vec<&CheckRow> {
        self.rows.iter().filter(|r| !r.passed()).collect()
    }

    /// Rows of one check kind.
    pub fn rows_of<'a>(&'a self, check: &'a str) -> impl Iterator<Item = &'a CheckRow> + 'a {
        self.rows.iter().filter(move |r| r.check == check)
    }

    /// Smallest margin of a check kind.
    pub fn worst(&self, check: &str) -> Option<&CheckRow> {
        self.rows.iter().filter(|r| r.check == check).min_by(|a, b| a.margin.total_cmp(&b.margin))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Functional,
    Entropy,
    NeymanPearson,
    Bottleneck,
    KeyInequality,
    SingleLetter,
    Soundness,
    Sandwich,
    Expurgation,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Functional,
        Suite::Entropy,
        Suite::NeymanPearson,
        Suite::Bottleneck,
        Suite::KeyInequality,
        Suite::SingleLetter,
        Suite::Soundness,
        Suite::Sandwich,
        Suite::Expurgation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Functional => "rhc",
            Suite::Entropy => "entropy",
            Suite::NeymanPearson => "np",
            Suite::Bottleneck => "delta",
            Suite::KeyInequality => "key",
            Suite::SingleLetter => "single-letter",
            Suite::Soundness => "soundness",
            Suite::Sandwich => "sandwich",
            Suite::Expurgation => "expurgation",
        }
    }

    pub fn from_name(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Instance count used when none is requested.
    pub fn default_instances(self) -> usize {
        match self {
            Suite::Functional => 500,
            Suite::Entropy => 1000,
            Suite::NeymanPearson => 200,
            Suite::Bottleneck => 100,
            Suite::KeyInequality => 500,
            Suite::SingleLetter => 1,
            Suite::Soundness => 3,
            Suite::Sandwich => 3,
            Suite::Expurgation => 200,
        }
    }
}

pub fn run_suite(suite: Suite, seed: u64, instances: Option<usize>) -> Result<SuiteOutcome> {
    let count = instances.unwrap_or_else(|| suite.default_instances());
    let per_instance: fn(u64, usize) -> Result<Vec<CheckRow>> = match suite {
        Suite::Functional => functional_instance,
        Suite::Entropy => entropy_instance,
        Suite::NeymanPearson => np_instance,
        Suite::Bottleneck => bottleneck_instance,
        Suite::KeyInequality => key_instance,
        Suite::SingleLetter => single_letter_instance,
        Suite::Soundness => soundness_instance,
        Suite::Sandwich => sandwich_instance,
        Suite::Expurgation => expurgation_instance,
    };
    let results: Vec<Result<Vec<CheckRow>>> = (0..count)
        .into_par_iter()
        .map(|i| per_instance(derive_seed(seed, suite.name(), i as u64), i))
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(SuiteOutcome { suite, seed, rows })
}

struct RowBuilder {
    suite: &'static str,
    instance_id: usize,
    seed: u64,
    rows: Vec<CheckRow>,
}

impl RowBuilder {
    fn new(suite: Suite, instance_id: usize, seed: u64) -> Self {
        RowBuilder { suite: suite.name(), instance_id, seed, rows: Vec::new() }
    }

    fn push(&mut self, check: &'static str, params: Vec<(&'static str, f64)>, lhs: f64, rhs: f64, margin: f64, tolerance: f64) {
        self.rows.push(CheckRow {
            suite: self.suite,
            check,
            instance_id: self.instance_id,
            seed: self.seed,
            params,
            lhs,
            rhs,
            margin,
            tolerance,
        });
    }

    fn inequality(&mut self, check: &'static str, params: Vec<(&'static str, f64)>, m: &InequalityMargin, tolerance: f64) {
        self.push(check, params, m.lhs, m.rhs, m.margin, tolerance);
    }

    /// `|lhs − rhs| ≤ tolerance`.
    fn equality(&mut self, check: &'static str, params: Vec<(&'static str, f64)>, lhs: f64, rhs: f64, tolerance: f64) {
        self.push(check, params, lhs, rhs, -(lhs - rhs).abs(), tolerance);
    }
}

fn nonzero_exponent(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let v = rng.gen_range(lo..hi);
        if v.abs() >= 0.05 {
            return v;
        }
    }
}

fn functional_instance(seed: u64, id: usize) -> Result<Vec<CheckRow>> {
    let mut rng = rng_from_seed(seed);
    let mut out = RowBuilder::new(Suite::Functional, id, seed);
    let d = rng.gen_range(2..=4usize);

    let a = random_psd(d, rng.gen_range(1..=d), &mut rng);
    let b = random_psd(d, rng.gen_range(1..=d), &mut rng);
    let r: f64 = rng.gen_range(0.0..=1.0);
    out.inequality("alt", vec![("d", d as f64), ("r", r)], &check_alt(&a, &b, r)?, 1e-10);

    let p = nonzero_exponent(&mut rng, -3.0, 0.95);
    // Negative exponents are defined only for strictly positive arguments.
    let a = if p < 0.0 { random_positive(d, 0.02, 1.0, &mut rng) } else { random_psd(d, rng.gen_range(1..=d), &mut rng) };
    let b = random_positive(d, 0.05, 1.0, &mut rng);
    let sigma = random_density_with(d, 0.02, &mut rng)?;
    out.inequality("reverse_holder", vec![("d", d as f64), ("p", p)], &check_reverse_holder(&a, &b, p, &sigma)?, 1e-10);

    let a = random_psd(d, rng.gen_range(1..=d), &mut rng);
    let b = random_psd(d, rng.gen_range(1..=d), &mut rng);
    let r: f64 = rng.gen_range(0.05..=1.0);
    let slack = 0.5 / r - 0.5;
    let split: f64 = rng.gen_range(0.05..0.95);
    let (ia, ib) = if slack <= 0.0 { (f64::INFINITY, f64::INFINITY) } else { (1.0 / (split * slack), 1.0 / ((1.0 - split) * slack)) };
    out.inequality(
        "reverse_alt",
        vec![("d", d as f64), ("r", r), ("a", ia), ("b", ib)],
        &check_reverse_alt(&a, &b, r, ia, ib)?,
        1e-10,
    );

    let n = rng.gen_range(1..=3usize);
    let sites: Vec<DensityMatrix> = (0..n).map(|_| random_density_with(d, 0.05, &mut rng)).collect::<Result<_>>()?;
    let g = random_positive(d.pow(n as u32), 0.01, 1.0, &mut rng).with_dims(vec![d; n])?;
    let p = nonzero_exponent(&mut rng, -3.0, 0.9);
    let q = loop {
        let q = nonzero_exponent(&mut rng, p, 0.95);
        if q >= p {
            break q;
        }
    };
    let threshold = ((p - 1.0) / (q - 1.0)).ln();
    for (check, t) in [("rhc_threshold", threshold), ("rhc_threshold_plus", threshold + 0.5)] {
        let m = check_rhc(&g, &sites, p, q, t)?;
        out.inequality(check, vec![("d", d as f64), ("n", n as f64), ("p", p), ("q", q), ("t", t)], &m, 1e-9);
    }
    Ok(out.rows)
}

fn entropy_instance(seed: u64, id: usize) -> Result<Vec<CheckRow>> {
    let mut rng = rng_from_seed(seed);
    let mut out = RowBuilder::new(Suite::Entropy, id, seed);
    let d_in = rng.gen_range(2..=3usize);
    let d_out = rng.gen_range(2..=3usize);
    let env = rng.gen_range(((d_in + d_out - 1) / d_out).max(1)..=3usize);
    let rho = random_density_with(d_in, 0.01, &mut rng)?;
    let sigma = random_density_with(d_in, 0.02, &mut rng)?;
    let chan = IsometricChannel::random(d_in, d_out, env, &mut rng);
    let (rho_out, sigma_out) = (chan.apply_state(&rho)?, chan.apply_state(&sigma)?);
    let params = vec![("d_in", d_in as f64), ("d_out", d_out as f64), ("env", env as f64)];

    let before = relative_entropy(&rho, sigma.op())?.nats;
    let after = relative_entropy(&rho_out, sigma_out.op())?.nats;
    out.push("dpi_relative_entropy", params.clone(), before, after, before - after, 1e-8);

    let alpha: f64 = rng.gen_range(0.05..0.95);
    let before_a = renyi_relative_entropy(&rho, sigma.op(), alpha)?.nats;
    let after_a = renyi_relative_entropy(&rho_out, sigma_out.op(), alpha)?.nats;
    let mut p = params.clone();
    p.push(("alpha", alpha));
    out.push("dpi_renyi", p, before_a, after_a, before_a - after_a, 1e-8);

    let g = rho.op().apply(MatrixFunction::Log)?.sub(&sigma.op().apply(MatrixFunction::Log)?)?.apply(MatrixFunction::Exp)?;
    let variational = relative_entropy_variational_value(&rho, sigma.op(), &g)?.nats;
    out.equality("variational_optimizer", params.clone(), variational, before, 1e-8);

    let rho_q = random_density_with(2, 0.01, &mut rng)?;
    let sigma_q = random_density_with(2, 0.02, &mut rng)?;
    let exact = relative_entropy(&rho_q, sigma_q.op())?.nats;
    let near_one = renyi_relative_entropy(&rho_q, sigma_q.op(), 0.999)?.nats;
    out.equality("renyi_limit", vec![("d", 2.0), ("alpha", 0.999)], near_one, exact, 1e-3);
    Ok(out.rows)
}

/// Number of qubit pairs in the Stein trend check.
pub const STEIN_TREND_PAIRS: usize = 4;
/// Block length and type-I budget of the Stein trend check.
pub const STEIN_TREND_N: usize = 6;
pub const STEIN_TREND_EPS: f64 = 0.5;

/// Fixed random qubit pairs `(ρ, σ)` with `D(ρ‖σ) ≤ 1`, independent of the suite seed.
pub fn stein_pairs() -> Result<Vec<(DensityMatrix, DensityMatrix)>> {
    let mut pairs = Vec::with_capacity(STEIN_TREND_PAIRS);
    let mut i = 0;
    while pairs.len() < STEIN_TREND_PAIRS {
        let mut rng = rng_from_seed(derive_seed(0, "stein-pair", i));
        i += 1;
        let rho = random_density_with(2, 0.0, &mut rng)?;
        let sigma = random_density_with(2, 0.0, &mut rng)?;
        if relative_entropy(&rho, sigma.op())?.nats <= 1.0 {
            pairs.push((rho, sigma));
        }
    }
    Ok(pairs)
}

fn np_instance(seed: u64, id: usize) -> Result<Vec<CheckRow>> {
    let mut rng = rng_from_seed(seed);
    let mut out = RowBuilder::new(Suite::NeymanPearson, id, seed);
    let d = rng.gen_range(2..=3usize);
    let rho0 = random_density_with(d, 0.0, &mut rng)?;
    let rho1 = random_density_with(d, 0.0, &mut rng)?;
    let eps: f64 = rng.gen_range(0.02..0.98);
    let params = vec![("d", d as f64), ("eps", eps)];

    let (beta, test) = neyman_pearson_beta(&rho0, &rho1, eps)?;
    let e = errors_of_test(&test, &rho0, &rho1)?;
    out.push("test_alpha_budget", params.clone(), e.alpha, eps, eps - e.alpha, 1e-10);
    out.equality("test_beta_consistent", params.clone(), e.beta, beta, 1e-10);

    let (beta_hi, _) = neyman_pearson_beta(&rho0, &rho1, (eps + 0.01).min(0.99))?;
    out.push("monotone_in_eps", params.clone(), beta, beta_hi, beta - beta_hi, 1e-10);

    let (same, _) = neyman_pearson_beta(&rho0, &rho0, eps)?;
    out.equality("identical_states", params, same, 1.0 - eps, 1e-12);

    if id == 0 {
        let n = STEIN_TREND_N;
        for (k, (rho, sigma)) in stein_pairs()?.iter().enumerate() {
            let (b, _) = neyman_pearson_beta(&rho.tensor_power(n), &sigma.tensor_power(n), STEIN_TREND_EPS)?;
            let exponent = -b.ln() / n as f64;
            let d = relative_entropy(rho, sigma.op())?.nats;
            let params = vec![("pair", k as f64), ("n", n as f64), ("eps", STEIN_TREND_EPS)];
            out.push("stein_trend", params, exponent, d, 0.25 * d - (exponent - d).abs(), 0.0);
        }
    }
    Ok(out.rows)
}

fn random_channel_states(k: usize, d: usize, floor: f64, rng: &mut impl Rng) -> Result<Vec<DensityMatrix>> {
    (0..k).map(|_| random_density_with(d, floor, rng)).collect()
}

/// Interior distribution with every entry at least `floor / k`.
fn random_interior(k: usize, floor: f64, rng: &mut impl Rng) -> Vec<f64> {
    random_distribution(k, rng).into_iter().map(|p| (1.0 - floor) * p + floor / k as f64).collect()
}

fn bottleneck_instance(seed: u64, id: usize) -> Result<Vec<CheckRow>> {
    let mut rng = rng_from_seed(seed);
    let mut out = RowBuilder::new(Suite::Bottleneck, id, seed);
    let k = rng.gen_range(2..=3usize);
    let d = rng.gen_range(2..=3usize);
    let c = [1.0, 1.5, 2.0][id % 3];
    let states = random_channel_states(k, d, 0.0, &mut rng)?;
    let q = random_interior(k, 0.2, &mut rng);
    let refs: Vec<&DensityMatrix> = states.iter().collect();
    let rho_y = DensityMatrix::mixture(&q, &refs)?;
    let nu = random_density_with(d, 0.05, &mut rng)?;
    let params = vec![("k", k as f64), ("d", d as f64), ("c", c)];

    let inst = DeltaInstance::from_states(q.clone(), &states, nu.op().clone(), c)?;
    let sol = delta_with(&inst, &DeltaOptions { seed, ..DeltaOptions::default() })?;
    let grid = sol.grid_value.unwrap_or(f64::NAN);
    out.equality("ascent_vs_grid", params.clone(), sol.ascent_value, grid, 1e-3);

    let u_size = k + 1;
    let (star, _) = delta_star(&q, &states, nu.op(), c, u_size)?;
    out.push("delta_star_below_delta", params.clone(), sol.value, star, sol.value - star, 1e-6);

    let (star_big, _) = delta_star(&q, &states, nu.op(), c, u_size + 1)?;
    out.equality("cardinality_stable", params.clone(), star, star_big, 1e-6);

    let eps: f64 = rng.gen_range(0.05..0.5);
    let mut z: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean: f64 = z.iter().zip(&q).map(|(a, b)| a * b).sum();
    z.iter_mut().for_each(|v| *v -= mean);
    let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let p_tilde: Vec<f64> = q.iter().zip(&z).map(|(p, v)| p * (1.0 + eps * v / scale)).collect();
    let m = continuity_margin(&p_tilde, &q, &states, &rho_y, c, eps, u_size)?;
    let mut p = params;
    p.push(("eps", eps));
    out.inequality("continuity", p, &m, 1e-5);
    Ok(out.rows)
}

fn key_instance(seed: u64, id: usize) -> Result<Vec<CheckRow>> {
    let mut rng = rng_from_seed(seed);
    let mut out = RowBuilder::new(Suite::KeyInequality, id, seed);
    let n = rng.gen_range(1..=2usize);
    let c = [1.5, 2.0][id % 2];
    let t = [0.1, 0.5, 1.0][(id / 2) % 3];
    let states = random_channel_states(2, 2, 0.02, &mut rng)?;
    let src = CQSource::unlabelled(random_interior(2, 0.2, &mut rng), states)?;
    let mass: f64 = rng.gen_range(0.3..=1.0);
    let mu: Vec<f64> = random_distribution(2usize.pow(n as u32), &mut rng).into_iter().map(|v| v * mass).collect();
    let test = random_test(2usize.pow(n as u32), &mut rng);
    let m = crate::bounds::verify_key_inequality(&mu, &src, &test, c, t)?;
    let rel = m.relative_margin();
    out.push("key_inequality", vec![("n", n as f64), ("c", c), ("t", t)], m.lhs, m.rhs, rel, 1e-6);
    Ok(out.rows)
}

/// Binary-qubit source of the single-letterization check (`η = 2`).
pub fn single_letter_source() -> Result<CQSource> {
    let s0 = DensityMatrix::diagonal(&[0.95, 0.05])?;
    let s1 = DensityMatrix::from_rows(&[vec![(0.1, 0.0), (0.2, 0.0)], vec![(0.2, 0.0), (0.9, 0.0)]])?;
    CQSource::unlabelled(vec![0.5, 0.5], vec![s0, s1])
}

fn single_letter_instance(seed: u64, id: usize) -> Result<Vec<CheckRow>> {
    let mut out = RowBuilder::new(Suite::SingleLetter, id, seed);
    let src = single_letter_source()?;
    let (c, n, delta) = (1.5, 8, 0.9);
    let report = single_letter_gap(src.q_x(), src.states(), src.rho_y(), c, n, delta, src.size() + 1)?;
    let lhs = report.constants["lhs"];
    out.push("single_letter_gap", vec![("n", n as f64), ("c", c), ("delta", delta)], lhs, report.total, report.total - lhs, 1e-4);
    Ok(out.rows)
}

/// Fixed binary-qubit sources for the soundness and sandwich checks.
pub fn reference_sources() -> Result<Vec<CQSource>> {
    let a = CQSource::unlabelled(
        vec![0.5, 0.5],
        vec![DensityMatrix::diagonal(&[0.9, 0.1])?, DensityMatrix::diagonal(&[0.2, 0.8])?],
    )?;
    let b = CQSource::unlabelled(
        vec![0.3, 0.7],
        vec![
            DensityMatrix::diagonal(&[0.95, 0.05])?,
            DensityMatrix::from_rows(&[vec![(0.5, 0.0), (0.3, 0.2)], vec![(0.3, -0.2), (0.5, 0.0)]])?,
        ],
    )?;
    let c = single_letter_source()?;
    Ok(vec![a, b, c])
}

/// Type-I budget of the soundness check.
pub const SOUNDNESS_EPS: f64 = 0.5;

fn soundness_instance(seed: u64, id: usize) -> Result<Vec<CheckRow>> {
    let mut out = RowBuilder::new(Suite::Soundness, id, seed);
    let sources = reference_sources()?;
    let src = &sources[id % sources.len()];
    let eps = SOUNDNESS_EPS;
    let curve = DualCurve::for_source(src, src.size() + 1)?;
    for n in 1..=3usize {
        for w in [1usize, 2] {
            let r = (w as f64).ln() / n as f64;
            let brute = brute_force_beta_distributed(src, n, r, eps)?;
            let exponent = -brute.beta.ln() / n as f64;
            let bound = sc_bound_stein_on_curve(&curve, src, r, eps, n)?;
            let params = vec![("source", id as f64), ("n", n as f64), ("messages", w as f64), ("eps", eps)];
            out.push("sc_bound_formal", params.clone(), bound.total, exponent, bound.total - exponent, 1e-6);

            let src_n = product_source(src, n)?;
            let mu: Vec<f64> = src_n.q_x().to_vec();
            let (_, test) = neyman_pearson_beta(&src_n.states()[0], src_n.rho_y(), eps)?;
            let m = image_size_bound_i(&mu, src, src.rho_y(), &test, 1.5, 0.5)?;
            out.push("image_size_i", params, m.lhs, m.rhs, m.margin, 1e-6);
        }
    }
    Ok(out.rows)
}

fn sandwich_instance(seed: u64, id: usize) -> Result<Vec<CheckRow>> {
    let mut out = RowBuilder::new(Suite::Sandwich, id, seed);
    let sources = reference_sources()?;
    let src = &sources[id % sources.len()];
    let joint = src.joint_state()?;
    let marginals = src.product_of_marginals()?;
    let info = relative_entropy(&joint, marginals.op())?.nats;
    let h_x = shannon_entropy(src.q_x()).nats;
    let (value, _) = bottleneck_sup_constrained(src, h_x, src.size() + 1)?;
    out.equality("bottleneck_high_rate", vec![("source", id as f64), ("r", h_x)], value, info, 1e-5);
    let alt = vec![src.rho_y().clone(); src.size()];
    let theta = theta_n_lower(src, &alt, 1, h_x + 1.0, true)?;
    out.equality("theta_identity", vec![("source", id as f64)], theta.first_order, info, 1e-9);
    Ok(out.rows)
}

fn expurgation_instance(seed: u64, id: usize) -> Result<Vec<CheckRow>> {
    let mut rng = rng_from_seed(seed);
    let mut out = RowBuilder::new(Suite::Expurgation, id, seed);
    let n = rng.gen_range(1..=2usize);
    let k = rng.gen_range(2..=3usize);
    let states = random_channel_states(k, 2, 0.0, &mut rng)?;
    let src = CQSource::unlabelled(random_interior(k, 0.2, &mut rng), states)?;
    let src_n = product_source(&src, n)?;
    let w = rng.gen_range(2..=4usize);
    let encoder = StochasticChannel::new(
        src_n.alphabet().to_vec(),
        (0..w).map(|m| m.to_string()).collect(),
        random_kernel(src_n.size(), w, &mut rng),
    )?;
    let encoded = apply_encoder(&src_n, &encoder)?;
    let dims = src_n.rho_y().op().subsystem_dims().to_vec();
    let messages: Vec<usize> = encoded.blocks.iter().map(|b| b.message).collect();
    let ops: Vec<HermitianOperator> = encoded
        .blocks
        .iter()
        .map(|_| random_test(src_n.d_y(), &mut rng).with_dims(dims.clone()))
        .collect::<Result<_>>()?;
    let family = TestFamily::new(messages, ops)?;
    let eps_prime: f64 = rng.gen_range(0.05..0.95);
    let ex = expurgate(&family, &encoded, src_n.rho_y(), eps_prime)?;
    let (alpha_slack, beta_slack) = ex.postcondition_slack(eps_prime);
    let params = vec![("n", n as f64), ("k", k as f64), ("messages", w as f64), ("eps_prime", eps_prime)];
    out.push("alpha_budget", params.clone(), ex.alpha_after, ex.alpha_before + eps_prime, -alpha_slack, 1e-10);
    out.push("beta_per_message", params, ex.worst_retained_beta, ex.beta_before / eps_prime, -beta_slack, 1e-10);
    Ok(out.rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_are_seed_deterministic() {
        let a = run_suite(Suite::Expurgation, 3, Some(5)).unwrap();
        let b = run_suite(Suite::Expurgation, 3, Some(5)).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 10);
        let c = run_suite(Suite::Expurgation, 4, Some(5)).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::from_name(s.name()), Some(s));
        }
        assert_eq!(Suite::from_name("nope"), None);
    }
}
