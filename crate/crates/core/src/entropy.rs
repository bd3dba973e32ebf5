//! Entropic functionals: von Neumann entropy, Umegaki and Petz-Rényi
//! relative entropies, mutual information, conditional entropy, fidelity and
//! the variational expression for the relative entropy.
//!
//! Every logarithm is natural. [`EntropyValue`] carries the value in nats and
//! converts to bits on request.

use faer::complex_native::c64;
use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{abs2, DensityMatrix, HermitianOperator, Matrix, MatrixFunction, Spectrum};
use crate::tolerance::{CLIP_TOL, KERNEL_OVERLAP_TOL, SUPPORT_TOL};

/// An entropic quantity in nats, possibly `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EntropyValue {
    pub nats: f64,
}

impl EntropyValue {
    pub const INFINITY: EntropyValue = EntropyValue { nats: f64::INFINITY };

    pub fn from_nats(nats: f64) -> Self {
        EntropyValue { nats }
    }

    pub fn bits(&self) -> f64 {
        self.nats / std::f64::consts::LN_2
    }

    pub fn is_finite(&self) -> bool {
        self.nats.is_finite()
    }
}

impl From<EntropyValue> for f64 {
    fn from(v: EntropyValue) -> f64 {
        v.nats
    }
}

#[inline]
fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Squared moduli `|⟨u_i|v_j⟩|²` between two eigenbases.
fn overlaps(a: &Spectrum, b: &Spectrum) -> Vec<Vec<f64>> {
    let o = a.vectors.adjoint() * &b.vectors;
    let n = a.dim();
    (0..n).map(|i| (0..n).map(|j| abs2(o.read(i, j))).collect()).collect()
}

fn clipped(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&l| if l < 0.0 { 0.0 } else { l }).collect()
}

fn check_psd(spec: &Spectrum, what: &str) -> Result<()> {
    match spec.values.first() {
        Some(&l) if l < -CLIP_TOL => Err(Error::Domain(format!(
            "{what} has eigenvalue {l:.3e} below -{CLIP_TOL:.0e}"
        ))),
        _ => Ok(()),
    }
}

/// `S(ρ) = −Σ λ ln λ` over eigenvalues above the support threshold.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> EntropyValue {
    spectral_entropy(&rho.op().eigenvalues())
}

pub(crate) fn spectral_entropy(values: &[f64]) -> EntropyValue {
    let s: f64 = values
        .iter()
        .filter(|&&l| l > SUPPORT_TOL)
        .map(|&l| -xlnx(l))
        .sum();
    EntropyValue::from_nats(s.max(0.0))
}

/// Shannon entropy of a probability vector.
pub fn shannon_entropy(p: &[f64]) -> EntropyValue {
    EntropyValue::from_nats(p.iter().map(|&x| -xlnx(x)).sum::<f64>())
}

/// `tr A ln B` from spectra, or `−∞` when the support of `A` leaves that of `B`.
pub(crate) fn log_overlap(a: &Spectrum, b: &Spectrum) -> f64 {
    let o = overlaps(a, b);
    let pa = clipped(&a.values);
    let qb = clipped(&b.values);
    let mut acc = 0.0;
    for (i, &p) in pa.iter().enumerate() {
        if p <= SUPPORT_TOL {
            continue;
        }
        let kernel: f64 = qb
            .iter()
            .enumerate()
            .filter(|(_, &q)| q <= SUPPORT_TOL)
            .map(|(j, _)| o[i][j])
            .sum();
        if kernel > KERNEL_OVERLAP_TOL {
            return f64::NEG_INFINITY;
        }
        for (j, &q) in qb.iter().enumerate() {
            if q > SUPPORT_TOL {
                acc += p * o[i][j] * q.ln();
            }
        }
    }
    acc
}

/// Generalized relative entropy `tr A(ln A − ln B)` for PSD `A`, `B`.
pub(crate) fn relative_entropy_psd(a: &HermitianOperator, b: &HermitianOperator) -> Result<EntropyValue> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "relative entropy of operators with dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let sa = a.eig();
    let sb = b.eig();
    check_psd(&sa, "first argument")?;
    check_psd(&sb, "second argument")?;
    Ok(relative_entropy_spectra(&sa, &sb))
}

pub(crate) fn relative_entropy_spectra(sa: &Spectrum, sb: &Spectrum) -> EntropyValue {
    let cross = log_overlap(sa, sb);
    if cross == f64::NEG_INFINITY {
        return EntropyValue::INFINITY;
    }
    let self_term: f64 = clipped(&sa.values).iter().map(|&l| if l > SUPPORT_TOL { xlnx(l) } else { 0.0 }).sum();
    EntropyValue::from_nats(self_term - cross)
}

/// Umegaki relative entropy `D(ρ‖σ) = tr ρ(ln ρ − ln σ)`.
///
/// Returns `+∞` when an eigenvector of `ρ` in its support has squared overlap
/// above `1e-9` with the kernel of `σ`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &HermitianOperator) -> Result<EntropyValue> {
    relative_entropy_psd(rho.op(), sigma)
}

fn petz_trace(a: &Spectrum, b: &Spectrum, alpha: f64) -> f64 {
    let o = overlaps(a, b);
    let pa = clipped(&a.values);
    let qb = clipped(&b.values);
    let mut acc = 0.0;
    for (i, &p) in pa.iter().enumerate() {
        if p <= SUPPORT_TOL {
            continue;
        }
        let pa_pow = p.powf(alpha);
        for (j, &q) in qb.iter().enumerate() {
            if q > SUPPORT_TOL {
                acc += pa_pow * q.powf(1.0 - alpha) * o[i][j];
            }
        }
    }
    acc
}

/// Petz-Rényi relative entropy `(1/(α−1)) ln tr ρ^α σ^{1−α}` for `α ∈ (0,1)`.
pub fn renyi_relative_entropy(rho: &DensityMatrix, sigma: &HermitianOperator, alpha: f64) -> Result<EntropyValue> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("Renyi order {alpha} outside (0,1)")));
    }
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension("Renyi divergence arguments differ in dimension".into()));
    }
    let sa = rho.op().eig();
    let sb = sigma.eig();
    check_psd(&sb, "second argument")?;
    let tr = petz_trace(&sa, &sb, alpha);
    if tr <= 0.0 {
        return Ok(EntropyValue::INFINITY);
    }
    Ok(EntropyValue::from_nats(tr.ln() / (alpha - 1.0)))
}

/// `D_{1−p}(A‖B) = −(1/p) ln tr[A^p B^{1−p}]` for PSD `A`, `B` and `p ∈ (0,1]`.
pub fn renyi_one_minus(a: &HermitianOperator, b: &HermitianOperator, p: f64) -> Result<EntropyValue> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("exponent {p} outside (0,1]")));
    }
    if a.dim() != b.dim() {
        return Err(Error::Dimension("arguments differ in dimension".into()));
    }
    let sa = a.eig();
    let sb = b.eig();
    check_psd(&sa, "first argument")?;
    check_psd(&sb, "second argument")?;
    let tr = if p == 1.0 {
        // B^0 is the support projector of B.
        let o = overlaps(&sa, &sb);
        clipped(&sa.values)
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                l * clipped(&sb.values)
                    .iter()
                    .enumerate()
                    .filter(|(_, &q)| q > SUPPORT_TOL)
                    .map(|(j, _)| o[i][j])
                    .sum::<f64>()
            })
            .sum()
    } else {
        petz_trace(&sa, &sb, p)
    };
    if tr <= 0.0 {
        return Ok(EntropyValue::INFINITY);
    }
    Ok(EntropyValue::from_nats(-tr.ln() / p))
}

fn complement(k: usize, sites: &[usize]) -> Vec<usize> {
    (0..k).filter(|i| !sites.contains(i)).collect()
}

/// `I(A;B)` where `a_sites` lists the subsystems forming `A` and the rest form `B`.
pub fn mutual_information(rho_ab: &DensityMatrix, a_sites: &[usize]) -> Result<EntropyValue> {
    let k = rho_ab.op().subsystem_dims().len();
    let mut a: Vec<usize> = a_sites.to_vec();
    a.sort_unstable();
    a.dedup();
    if a.len() != a_sites.len() || a.is_empty() || a.len() >= k || a.iter().any(|&i| i >= k) {
        return Err(Error::Dimension(format!(
            "cut {a_sites:?} is not a proper bipartition of {k} subsystems"
        )));
    }
    let b = complement(k, &a);
    let s_a = von_neumann_entropy(&rho_ab.partial_trace(&a)?);
    let s_b = von_neumann_entropy(&rho_ab.partial_trace(&b)?);
    let s_ab = von_neumann_entropy(rho_ab);
    Ok(EntropyValue::from_nats((s_a.nats + s_b.nats - s_ab.nats).max(0.0)))
}

/// `H(A|B) = S(AB) − S(B)` with `B` the subsystem at `conditioning`.
pub fn conditional_entropy(rho_ab: &DensityMatrix, conditioning: usize) -> Result<EntropyValue> {
    let k = rho_ab.op().subsystem_dims().len();
    if k < 2 || conditioning >= k {
        return Err(Error::Dimension(format!(
            "conditioning index {conditioning} invalid for {k} subsystems"
        )));
    }
    let s_b = von_neumann_entropy(&rho_ab.partial_trace(&[conditioning])?);
    let s_ab = von_neumann_entropy(rho_ab);
    Ok(EntropyValue::from_nats(s_ab.nats - s_b.nats))
}

pub fn binary_entropy(p: f64) -> Result<EntropyValue> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("binary entropy argument {p} outside [0,1]")));
    }
    Ok(EntropyValue::from_nats(-xlnx(p) - xlnx(1.0 - p)))
}

/// `Σ p ln(p/q)`, `+∞` if `p` charges a zero of `q`.
pub fn classical_kl(p: &[f64], q: &[f64]) -> EntropyValue {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return EntropyValue::INFINITY;
            }
            acc += a * (a / b).ln();
        }
    }
    EntropyValue::from_nats(acc)
}

/// Mutual information of a joint distribution given as rows `p(x, u)`.
pub fn classical_mutual_information(joint: &[Vec<f64>]) -> EntropyValue {
    let nx = joint.len();
    let nu = joint.first().map_or(0, |r| r.len());
    let px: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let pu: Vec<f64> = (0..nu).map(|u| (0..nx).map(|x| joint[x][u]).sum()).collect();
    let mut acc = 0.0;
    for x in 0..nx {
        for u in 0..nu {
            let p = joint[x][u];
            if p > 0.0 {
                acc += p * (p / (px[x] * pu[u])).ln();
            }
        }
    }
    EntropyValue::from_nats(acc.max(0.0))
}

/// `F(ρ,σ) = (tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension("fidelity arguments differ in dimension".into()));
    }
    let sqrt_rho = rho.op().apply(MatrixFunction::Power(0.5))?;
    let inner = sigma.op().sandwich(&sqrt_rho)?;
    let root_trace: f64 = inner.eigenvalues().iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// `tr[ρ ln G] − ln tr exp(ln σ + ln G)`, with `ln σ` taken on the support of `σ`.
pub fn relative_entropy_variational_value(
    rho: &DensityMatrix,
    sigma: &HermitianOperator,
    g: &HermitianOperator,
) -> Result<EntropyValue> {
    if rho.dim() != sigma.dim() || rho.dim() != g.dim() {
        return Err(Error::Dimension("variational formula arguments differ in dimension".into()));
    }
    let sg = g.eig();
    if let Some(&l) = sg.values.first() {
        if l <= SUPPORT_TOL {
            return Err(Error::Domain(format!("G has nonpositive eigenvalue {l:.3e}")));
        }
    }
    let ln_g = sg.reconstruct(f64::ln);
    let first = crate::linalg::trace_product(rho.op().matrix(), ln_g.as_ref());
    let log_trace = log_trace_exp_on_support(sigma, &ln_g)?;
    Ok(EntropyValue::from_nats(first - log_trace))
}

/// `ln tr exp(ln σ + L)` computed on the support of `σ`.
pub(crate) fn log_trace_exp_on_support(sigma: &HermitianOperator, l: &Matrix) -> Result<f64> {
    let ss = sigma.eig();
    check_psd(&ss, "sigma")?;
    let support: Vec<usize> = (0..ss.dim()).filter(|&k| ss.values[k] > SUPPORT_TOL).collect();
    if support.is_empty() {
        return Err(Error::Domain("sigma is the zero operator".into()));
    }
    let n = ss.dim();
    let k = support.len();
    let vs: Mat<c64> = Mat::from_fn(n, k, |i, j| ss.vectors.read(i, support[j]));
    let mut m = vs.adjoint() * l * &vs;
    for (j, &idx) in support.iter().enumerate() {
        let z = m.read(j, j);
        m.write(j, j, z + ss.values[idx].ln());
    }
    let m = crate::linalg::hermitize(m);
    let eig = crate::linalg::eigh(m.as_ref());
    let top = eig.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = eig.values.iter().map(|&x| (x - top).exp()).sum();
    Ok(top + s.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cplx;

    fn h2(p: f64) -> f64 {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(von_neumann_entropy(&DensityMatrix::basis(2, 0)).nats, 0.0);
        let mm = von_neumann_entropy(&DensityMatrix::maximally_mixed(2));
        assert!((mm.nats - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((mm.bits() - 1.0).abs() < 1e-15);
        let d = DensityMatrix::diagonal(&[0.75, 0.25]).unwrap();
        assert!((von_neumann_entropy(&d).nats - h2(0.25)).abs() < 1e-14);
    }

    #[test]
    fn relative_entropy_examples() {
        let rho = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        assert!(relative_entropy(&rho, rho.op()).unwrap().nats.abs() < 1e-14);
        let zero = DensityMatrix::basis(2, 0);
        let one = DensityMatrix::basis(2, 1);
        assert_eq!(relative_entropy(&zero, one.op()).unwrap(), EntropyValue::INFINITY);
        let d = DensityMatrix::diagonal(&[0.75, 0.25]).unwrap();
        let mm = DensityMatrix::maximally_mixed(2);
        let v = relative_entropy(&d, mm.op()).unwrap().nats;
        let expect = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert!((v - expect).abs() < 1e-14);
        assert!((v - 0.130812).abs() < 1e-6);
    }

    #[test]
    fn renyi_domain_and_identity() {
        let rho = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        assert!(renyi_relative_entropy(&rho, rho.op(), 0.5).unwrap().nats.abs() < 1e-14);
        assert!(matches!(renyi_relative_entropy(&rho, rho.op(), 1.0), Err(Error::Domain(_))));
        assert!(matches!(renyi_relative_entropy(&rho, rho.op(), 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn renyi_commuting_matches_classical() {
        let p = [0.2, 0.5, 0.3];
        let q = [0.4, 0.4, 0.2];
        let rho = DensityMatrix::diagonal(&p).unwrap();
        let sigma = DensityMatrix::diagonal(&q).unwrap();
        for &a in &[0.3, 0.5, 0.9] {
            let s: f64 = p.iter().zip(&q).map(|(x, y)| x.powf(a) * y.powf(1.0 - a)).sum();
            let expect = s.ln() / (a - 1.0);
            let got = renyi_relative_entropy(&rho, sigma.op(), a).unwrap().nats;
            assert!((got - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn mutual_information_examples() {
        let a = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        let b = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
        let prod = a.tensor(&b);
        assert!(mutual_information(&prod, &[0]).unwrap().nats.abs() < 1e-14);

        let copy = DensityMatrix::new(
            HermitianOperator::diagonal(&[0.5, 0.0, 0.0, 0.5]).with_dims(vec![2, 2]).unwrap(),
        )
        .unwrap();
        let i = mutual_information(&copy, &[0]).unwrap().nats;
        assert!((i - std::f64::consts::LN_2).abs() < 1e-14);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityMatrix::new(
            HermitianOperator::outer(&[cplx(s, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(s, 0.0)])
                .with_dims(vec![2, 2])
                .unwrap(),
        )
        .unwrap();
        let i = mutual_information(&bell, &[1]).unwrap().nats;
        assert!((i - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((conditional_entropy(&bell, 1).unwrap().nats + std::f64::consts::LN_2).abs() < 1e-12);
        assert!(conditional_entropy(&copy, 1).unwrap().nats.abs() < 1e-14);
        assert!(matches!(mutual_information(&bell, &[0, 1]), Err(Error::Dimension(_))));
        assert!(matches!(conditional_entropy(&bell, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn conditional_entropy_product() {
        let a = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        let b = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
        let h = conditional_entropy(&a.tensor(&b), 1).unwrap().nats;
        assert!((h - von_neumann_entropy(&a).nats).abs() < 1e-14);
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(binary_entropy(0.0).unwrap().nats, 0.0);
        assert!((binary_entropy(0.5).unwrap().nats - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((binary_entropy(0.25).unwrap().nats - 0.562335).abs() < 1e-6);
        assert!(binary_entropy(1.5).is_err());

        assert_eq!(classical_kl(&[0.2, 0.8], &[0.2, 0.8]).nats, 0.0);
        assert!((classical_kl(&[1.0, 0.0, 0.0], &[1.0 / 3.0; 3]).nats - 3f64.ln()).abs() < 1e-15);
        assert!((classical_kl(&[0.75, 0.25], &[0.5, 0.5]).nats - 0.130812).abs() < 1e-6);
        assert_eq!(classical_kl(&[0.5, 0.5], &[1.0, 0.0]), EntropyValue::INFINITY);
    }

    #[test]
    fn fidelity_examples() {
        let rho = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&DensityMatrix::basis(2, 0), &DensityMatrix::basis(2, 1)).unwrap() < 1e-15);
        let sigma = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
        let expect = ((0.3f64 * 0.6).sqrt() + (0.7f64 * 0.4).sqrt()).powi(2);
        assert!((fidelity(&rho, &sigma).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn variational_identity_g() {
        let rho = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        let sigma = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
        let v = relative_entropy_variational_value(&rho, sigma.op(), &HermitianOperator::identity(&[2])).unwrap();
        assert!(v.nats.abs() < 1e-14);
        let bad = HermitianOperator::diagonal(&[1.0, 0.0]);
        assert!(matches!(
            relative_entropy_variational_value(&rho, sigma.op(), &bad),
            Err(Error::Domain(_))
        ));
    }
}
