//! Closed-form τ-variations of the zeta function at the disk and their
//! spectral finite-difference counterparts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{make_alpha_tau, FourierFunction};
use crate::linalg::{CMatrix, HermitianEigen, ScalarFunction};
use crate::operators::{kernel_vector, lambda_matrix, phi_vector};
use crate::quadrature::{gauss_legendre_integrate, integrate};
use crate::spectrum::steklov_spectrum;
use crate::zeta::zeta_diff_from_spectrum;

/// Relative size of coefficients treated as outside the support of `β`.
const SUPPORT_TOL: f64 = 1e-14;
/// Default finite-difference step in τ.
pub const TAU_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `α_τ = (1 - 2τ cos((2r+1)θ))^{-1}`.
    SingleMode(u64),
    /// `α_τ = normalize((1 - τβ)^{-1})`.
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationFamily {
    pub kind: FamilyKind,
    /// `∂α_τ/∂τ` at `τ = 0`; zero mean.
    pub beta: FourierFunction,
}

fn check_zero_mean(beta: &FourierFunction) -> Result<()> {
    let peak = beta.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mean = beta.coeff(0).norm();
    if mean > 1e-12 * peak.max(1.0) {
        return Err(Error::NonzeroMean(mean));
    }
    Ok(())
}

fn support(beta: &FourierFunction) -> usize {
    let peak = beta.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    beta.bandwidth(SUPPORT_TOL * peak)
}

/// `2 cos(kθ)`.
pub fn cosine_mode(k: usize) -> FourierFunction {
    let mut coeffs = vec![num_complex::Complex64::new(0.0, 0.0); 2 * k + 1];
    coeffs[0] = num_complex::Complex64::new(1.0, 0.0);
    coeffs[2 * k] = num_complex::Complex64::new(1.0, 0.0);
    FourierFunction::new(k, coeffs).expect("odd length")
}

impl DeformationFamily {
    pub fn single_mode(r: u64) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidArgument(
                "mode index r must be positive".into(),
            ));
        }
        Ok(Self {
            kind: FamilyKind::SingleMode(r),
            beta: cosine_mode(2 * r as usize + 1),
        })
    }

    pub fn general(beta: FourierFunction) -> Result<Self> {
        if !beta.is_real(1e-12) {
            return Err(Error::NotReal(beta.hermitian_defect()));
        }
        check_zero_mean(&beta)?;
        Ok(Self {
            kind: FamilyKind::General,
            beta,
        })
    }

    /// The normalized weight `α_τ`.
    pub fn weight(&self, tau: f64) -> Result<FourierFunction> {
        match self.kind {
            FamilyKind::SingleMode(r) => make_alpha_tau(r, tau),
            FamilyKind::General => {
                let band = support(&self.beta);
                if tau == 0.0 {
                    return Ok(FourierFunction::constant_with_order(1.0, 4 * band.max(1)));
                }
                let lo = 1.0 - tau * self.beta.max_value();
                let hi = 1.0 - tau * self.beta.min_value();
                if !(lo.min(hi) > 0.0) {
                    return Err(Error::NotPositive {
                        index: 0,
                        theta: f64::NAN,
                        value: lo.min(hi),
                    });
                }
                let beta = self.beta.with_order(band);
                let raw = FourierFunction::from_fn_adaptive(4 * band.max(4), 4096, 1e-16, |t| {
                    1.0 / (1.0 - tau * beta.eval(t).re)
                })?;
                raw.normalize()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub closed_form: f64,
    pub finite_difference: f64,
    pub tau_step: f64,
    pub relative_error: f64,
}

impl VariationReport {
    pub fn new(closed_form: f64, finite_difference: f64, tau_step: f64) -> Self {
        Self {
            closed_form,
            finite_difference,
            tau_step,
            relative_error: (closed_form - finite_difference).abs() / closed_form.abs().max(1.0),
        }
    }
}

/// `|β̂_k|²`.
fn power(beta: &FourierFunction, k: usize) -> f64 {
    beta.coeff(k as i64).norm_sqr()
}

/// `(S(z), S'(z), T(z), T'(z))` with `S` the off-diagonal double sum of the
/// second variation and `T = Σ n^{-z}|β̂_{2n}|²`.
fn variation_sums(beta: &FourierFunction, z: f64) -> (f64, f64, f64, f64) {
    let band = support(beta);
    let (mut s, mut ds, mut t, mut dt) = (0.0, 0.0, 0.0, 0.0);
    for n in 1..band {
        let nf = n as f64;
        let nz = nf.powf(-z);
        for p in (1..=band - n).filter(|&p| p != n) {
            let w = power(beta, p + n);
            if w == 0.0 {
                continue;
            }
            let pf = p as f64;
            let pz = pf.powf(-z);
            let c = pf * nf * w / (pf * pf - nf * nf);
            s += (nz - pz) * c;
            ds += (pf.ln() * pz - nf.ln() * nz) * c;
        }
    }
    for n in (1..=band / 2).filter(|n| 2 * n <= band) {
        let nf = n as f64;
        let w = power(beta, 2 * n) * nf.powf(-z);
        t += w;
        dt -= nf.ln() * w;
    }
    (s, ds, t, dt)
}

/// `∂²ζ_{α_τ}(z)/∂τ²` at `τ = 0`:
/// `4z Σ_{p≠n} (n^{-z} - p^{-z})/(p² - n²) pn|β̂_{p+n}|² + 2z² Σ n^{-z}|β̂_{2n}|²`.
pub fn second_variation_zeta(beta: &FourierFunction, z: f64) -> Result<f64> {
    check_zero_mean(beta)?;
    let (s, _, t, _) = variation_sums(beta, z);
    Ok(4.0 * z * s + 2.0 * z * z * t)
}

/// Exact `z`-derivative of [`second_variation_zeta`].
pub fn second_variation_zeta_dz(beta: &FourierFunction, z: f64) -> Result<f64> {
    check_zero_mean(beta)?;
    let (s, ds, t, dt) = variation_sums(beta, z);
    Ok(4.0 * s + 4.0 * z * ds + 4.0 * z * t + 2.0 * z * z * dt)
}

/// `∂²ζ'_{α_τ}(s)/∂τ²` at `τ = 0` for `β = 2cos((2r+1)θ)`.
pub fn second_variation_zeta_prime(r: u64, s: f64) -> f64 {
    let big = (2 * r + 1) as f64;
    let bracket = |q: f64| q.powf(-s) * (-1.0 + s * q.ln());
    let sum: f64 = (r + 1..=2 * r)
        .map(|p| {
            let pf = p as f64;
            let qf = big - pf;
            pf * qf / (2.0 * pf - big) * (bracket(pf) - bracket(qf))
        })
        .sum();
    8.0 / big * sum
}

/// `s ∫_{1/2}^1 x(1-x)/(2x-1) (x^{-s} - (1-x)^{-s}) dx`, negative on `(0, 2)`.
pub fn asymptotic_coefficient(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 2.0) {
        return Err(Error::InvalidArgument(format!(
            "s = {s} must lie in (0, 2)"
        )));
    }
    const SPLIT: f64 = 1e-3;
    let inner = |x: f64| {
        let u = 1.0 - x;
        let t = 2.0 * x - 1.0;
        if t < 1e-12 {
            return -s * x * u.powf(-s);
        }
        // x^{-s} - u^{-s} = u^{-s} expm1(-s ln(1 + t/u))
        x * u / t * u.powf(-s) * (-s * (t / u).ln_1p()).exp_m1()
    };
    let main = integrate(inner, 0.5, 1.0 - SPLIT, 1e-15);
    // on u = 1 - x ∈ [0, δ]: u(1-u)^{1-s}/(1-2u) - u^{1-s}(1-u)/(1-2u)
    let smooth = gauss_legendre_integrate(
        |u| u * (1.0 - u).powf(1.0 - s) / (1.0 - 2.0 * u),
        0.0,
        SPLIT,
        20,
    );
    // (1-u)/(1-2u) = 1 + Σ_{k≥1} 2^{k-1} u^k, integrated against u^{1-s}
    let mut singular = SPLIT.powf(2.0 - s) / (2.0 - s);
    let mut coef = 1.0;
    for k in 1..=20 {
        let e = 2.0 - s + k as f64;
        singular += coef * SPLIT.powf(e) / e;
        coef *= 2.0;
    }
    Ok(s * (main + smooth - singular))
}

/// `γ(p, m) = pm(2 ln(p/m) mp + (p+m)(m-p)) / ((m-p)²(m+p)²)`.
pub fn coefficient_gamma(p: u64, m: u64) -> Result<f64> {
    if p == m {
        return Err(Error::EqualIndices(p));
    }
    if p == 0 || m == 0 {
        return Err(Error::InvalidArgument(
            "γ(p, m) needs positive indices".into(),
        ));
    }
    // with u = (p-m)/(p+m): γ = (1-u²)·g(u)/(4u²), g(u) = (1-u²)atanh(u) - u,
    // odd in u, so the antisymmetry is exact
    let (pf, mf) = (p as f64, m as f64);
    let u = (pf - mf) / (pf + mf);
    let one_minus_u2 = 4.0 * pf * mf / (pf + mf).powi(2);
    let g = if u.abs() < 0.5 {
        // -2 Σ_{k≥1} u^{2k+1}/(4k²-1), free of the cancellation near p = m
        let u2 = u * u;
        let mut term = u;
        let mut sum = 0.0;
        for k in 1..=40 {
            term *= u2;
            sum += term / (4.0 * (k * k) as f64 - 1.0);
        }
        -2.0 * sum
    } else {
        one_minus_u2 * 0.5 * (pf.ln() - mf.ln()) - u
    };
    Ok(one_minus_u2 * g / (4.0 * u * u))
}

fn floor_one(n: i64) -> f64 {
    n.unsigned_abs().max(1) as f64
}

/// `ρ(n, p, s) = ∫_0^s A^t B^{s-t} dt` with `A = max(|n|,1)`, `B = max(|p|,1)`.
pub fn coefficient_rho(n: i64, p: i64, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("s = {s} must be positive")));
    }
    let (a, b) = (floor_one(n), floor_one(p));
    if a == b {
        Ok(s * b.powf(s))
    } else {
        Ok((a.powf(s) - b.powf(s)) / (a.ln() - b.ln()))
    }
}

/// `h(m, p)`, with `P = max(|p|,1)`: `1/(2m²)` if `P = m`, else
/// `(ln m - ln P)/(m - P)² - 1/(m(m - P))`.
pub fn coefficient_h(m: u64, p: i64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("h(m, p) needs m ≥ 1".into()));
    }
    let mf = m as f64;
    let big = floor_one(p);
    if big == mf {
        return Ok(1.0 / (2.0 * mf * mf));
    }
    Ok((mf.ln() - big.ln()) / (mf - big).powi(2) - 1.0 / (mf * (mf - big)))
}

/// `(1/4) d²/dτ² ⟨ln(Λ+P_0)φ_m, φ_m⟩` at `τ = 0`: `Σ_{p>0, p≠m} γ(p,m)|β̂_{m+p}|²`.
pub fn log_diag_expansion(m: u64, beta: &FourierFunction) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be positive".into()));
    }
    check_zero_mean(beta)?;
    let band = support(beta) as u64;
    let mut total = 0.0;
    for p in (1..=band.saturating_sub(m)).filter(|&p| p != m) {
        let w = power(beta, (m + p) as usize);
        if w != 0.0 {
            total += coefficient_gamma(p, m)? * w;
        }
    }
    Ok(total)
}

/// `⟨f(Λ_a + P_0) φ_m, φ_m⟩`.
pub fn diag_function_numeric(
    a: &FourierFunction,
    m: u64,
    f: ScalarFunction,
    n: usize,
) -> Result<f64> {
    if m == 0 || 4 * m as usize > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 ≤ m ≤ N/4, got m = {m}, N = {n}"
        )));
    }
    let lambda = lambda_matrix(a, n)?;
    let kernel = kernel_vector(a, n)?;
    let shifted: CMatrix = &lambda + &kernel * kernel.adjoint();
    let eig = HermitianEigen::new(&shifted)?;
    let phi = phi_vector(a, m as i64, n)?;
    let value = eig.quadratic_form(f, &phi, &phi)?;
    if value.im.abs() > 1e-10 * value.re.abs().max(1.0) {
        log::warn!("diagonal matrix element has imaginary part {:e}", value.im);
    }
    Ok(value.re)
}

/// `⟨ln(Λ_a + P_0) φ_m, φ_m⟩`.
pub fn log_diag_numeric(a: &FourierFunction, m: u64, n: usize) -> Result<f64> {
    diag_function_numeric(a, m, ScalarFunction::Log, n)
}

/// `(ζ_a - 2ζ_R)(z)` on a weight.
fn zeta_diff_of(a: &FourierFunction, z: f64, m: u32, n: usize) -> Result<f64> {
    Ok(zeta_diff_from_spectrum(&steklov_spectrum(a, n)?, z, m)?.value)
}

/// Centered second τ-difference, Richardson-extrapolated over `h` and `h/2`.
fn second_difference(f: impl Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    let f0 = f(0.0)?;
    let d = |step: f64| -> Result<f64> { Ok((f(step)? - 2.0 * f0 + f(-step)?) / (step * step)) };
    let (coarse, fine) = (d(h)?, d(0.5 * h)?);
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Spectral check of [`second_variation_zeta`] along a family.
pub fn second_variation_report(
    family: &DeformationFamily,
    z: f64,
    n: usize,
    h: f64,
) -> Result<VariationReport> {
    let closed = second_variation_zeta(&family.beta, z)?;
    let fd = second_difference(|t| zeta_diff_of(&family.weight(t)?, z, 0, n), h)?;
    Ok(VariationReport::new(closed, fd, h))
}

/// Centered first τ-difference of `(ζ_{α_τ} - 2ζ_R)(z)`; zero at the disk.
pub fn first_variation_fd(family: &DeformationFamily, z: f64, n: usize, h: f64) -> Result<f64> {
    let plus = zeta_diff_of(&family.weight(h)?, z, 0, n)?;
    let minus = zeta_diff_of(&family.weight(-h)?, z, 0, n)?;
    Ok((plus - minus) / (2.0 * h))
}

/// Centered first τ-difference of `⟨ln(Λ+P_0)φ_m, φ_m⟩`.
pub fn log_diag_first_variation_fd(
    family: &DeformationFamily,
    m: u64,
    n: usize,
    h: f64,
) -> Result<f64> {
    let plus = log_diag_numeric(&family.weight(h)?, m, n)?;
    let minus = log_diag_numeric(&family.weight(-h)?, m, n)?;
    Ok((plus - minus) / (2.0 * h))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub s: f64,
    pub tau: f64,
    pub truncation: usize,
    pub r_found: u64,
    /// `∂²ζ'_{α_τ}(s)/∂τ²` at `τ = 0` for the witnessing mode.
    pub diff2_value: f64,
    /// Spectral `(ζ_{α_τ} - 2ζ_R)'(s)`.
    pub spectral_diff1: f64,
    /// Quadratic prediction `τ²/2 · diff2_value`.
    pub predicted_diff1: f64,
    /// Spectral `(ζ_{α_τ} - 2ζ_R)'(0)`.
    pub diff1_at_zero: f64,
}

/// Largest accepted relative mismatch between the spectral derivative and
/// its quadratic prediction.
pub const QUADRATIC_REGIME_TOL: f64 = 0.2;

/// Smallest `r ≤ r_max` with a negative second variation of `ζ'(s)`,
/// confirmed on the spectrum of `α_τ`.
pub fn counterexample_search(
    s: f64,
    r_max: u64,
    tau: f64,
    n: usize,
) -> Result<CounterexampleReport> {
    if !(s > 0.0 && s < 2.0) {
        return Err(Error::InvalidArgument(format!(
            "s = {s} must lie in (0, 2)"
        )));
    }
    if !(tau > 0.0 && tau < 0.5) {
        return Err(Error::TauOutOfRange(tau));
    }
    let (r, diff2) = (1..=r_max)
        .map(|r| (r, second_variation_zeta_prime(r, s)))
        .find(|&(_, v)| v < 0.0)
        .ok_or(Error::SearchExhausted(r_max))?;
    let spec = steklov_spectrum(&make_alpha_tau(r, tau)?, n)?;
    let spectral = zeta_diff_from_spectrum(&spec, s, 1)?.value;
    let at_zero = zeta_diff_from_spectrum(&spec, 0.0, 1)?.value;
    let predicted = 0.5 * tau * tau * diff2;
    if !(spectral < 0.0) || (spectral - predicted).abs() > QUADRATIC_REGIME_TOL * predicted.abs() {
        return Err(Error::QuadraticRegime {
            r,
            spectral,
            predicted,
        });
    }
    Ok(CounterexampleReport {
        s,
        tau,
        truncation: n,
        r_found: r,
        diff2_value: diff2,
        spectral_diff1: spectral,
        predicted_diff1: predicted,
        diff1_at_zero: at_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn second_variation_examples() {
        assert!((second_variation_zeta(&cosine_mode(2), 2.0).unwrap() - 8.0).abs() < 1e-14);
        assert!((second_variation_zeta(&cosine_mode(3), 1.0).unwrap() - 8.0 / 3.0).abs() < 1e-14);
        let mixed = cosine_mode(3).add_scaled(&cosine_mode(5), 0.5);
        assert_eq!(second_variation_zeta(&mixed, 0.0).unwrap(), 0.0);
        let biased = cosine_mode(2).add_scaled(&FourierFunction::constant(1.0), 1.0);
        assert!(matches!(
            second_variation_zeta(&biased, 1.0),
            Err(Error::NonzeroMean(_))
        ));
    }

    #[test]
    fn prime_examples() {
        assert_eq!(second_variation_zeta_prime(1, 0.0), 0.0);
        let expected = 16.0 / 3.0 * (1.0 + (LN_2 - 1.0) / 2.0);
        assert!((second_variation_zeta_prime(1, 1.0) - expected).abs() < 1e-14);
        assert!((expected - 4.515_059).abs() < 1e-6);
    }

    #[test]
    fn prime_matches_z_derivative() {
        for r in 1..=20u64 {
            let beta = cosine_mode(2 * r as usize + 1);
            for &s in &[0.5, 1.0, 1.5] {
                let exact = second_variation_zeta_dz(&beta, s).unwrap();
                let m53 = second_variation_zeta_prime(r, s);
                assert!(
                    (exact - m53).abs() < 1e-12 * m53.abs().max(1.0),
                    "r = {r}, s = {s}"
                );
            }
            let h = 1e-4;
            let fd = (second_variation_zeta(&beta, 1.0 + h).unwrap()
                - second_variation_zeta(&beta, 1.0 - h).unwrap())
                / (2.0 * h);
            let m53 = second_variation_zeta_prime(r, 1.0);
            assert!((fd - m53).abs() < 1e-6 * m53.abs().max(1.0));
        }
    }

    #[test]
    fn asymptotic_coefficient_values() {
        assert!((asymptotic_coefficient(1.0).unwrap() + 0.5).abs() < 1e-12);
        for k in 1..8 {
            assert!(asymptotic_coefficient(0.25 * k as f64).unwrap() < 0.0);
        }
        assert!(asymptotic_coefficient(1e-6).unwrap().abs() < 1e-5);
        assert!(asymptotic_coefficient(2.0).is_err());
        assert!(asymptotic_coefficient(0.0).is_err());
    }

    #[test]
    fn gamma_rho_h() {
        let g = coefficient_gamma(2, 1).unwrap();
        assert!((g - 2.0 * (4.0 * LN_2 - 3.0) / 9.0).abs() < 1e-15);
        assert!((g + 0.050_535_8).abs() < 1e-7);
        assert_eq!(coefficient_gamma(1, 2).unwrap(), -g);
        assert!((coefficient_gamma(999, 1).unwrap() + 1e-3).abs() < 1e-4);
        assert!(matches!(
            coefficient_gamma(3, 3),
            Err(Error::EqualIndices(3))
        ));
        // 40-digit references; close indices cancel in the textbook form
        for &(p, m, v) in &[
            (69, 67, -0.002_450_556_334_004_622_866),
            (1000, 999, -0.000_083_375_004_152_062_926_70),
            (10, 1, -0.054_023_363_065_114_872_28),
            (50, 49, -0.001_683_364_266_811_739_763),
        ] {
            let g = coefficient_gamma(p, m).unwrap();
            assert!((g - v).abs() < 4e-16 * v.abs(), "γ({p},{m}) = {g}");
        }

        assert_eq!(coefficient_rho(3, 3, 2.0).unwrap(), 18.0);
        assert_eq!(coefficient_rho(0, 0, 1.0).unwrap(), 1.0);
        assert!((coefficient_rho(2, 1, 1.0).unwrap() - 1.0 / LN_2).abs() < 1e-15);

        assert_eq!(coefficient_h(2, 2).unwrap(), 0.125);
        assert_eq!(coefficient_h(1, 0).unwrap(), 0.5);
        assert!((coefficient_h(2, 1).unwrap() - (LN_2 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn log_diag_expansion_examples() {
        let beta = cosine_mode(11);
        let g = coefficient_gamma(10, 1).unwrap();
        assert!((log_diag_expansion(1, &beta).unwrap() - g).abs() < 1e-15);
        assert!((g + 0.0540).abs() < 1e-4);
        assert!((log_diag_expansion(10, &beta).unwrap() + g).abs() < 1e-15);
        assert_eq!(log_diag_expansion(11, &beta).unwrap(), 0.0);
    }

    #[test]
    fn log_diag_numeric_at_disk() {
        let one = FourierFunction::constant(1.0);
        for m in 1..=4u64 {
            let v = log_diag_numeric(&one, m, 16).unwrap();
            assert!((v - (m as f64).ln()).abs() < 1e-13);
        }
        assert!(log_diag_numeric(&one, 5, 16).is_err());
    }

    #[test]
    fn general_family_matches_single_mode() {
        let single = DeformationFamily::single_mode(1).unwrap();
        let general = DeformationFamily::general(cosine_mode(3)).unwrap();
        let a = single.weight(0.1).unwrap();
        let b = general.weight(0.1).unwrap();
        for k in 0..=30 {
            assert!((a.coeff(k) - b.coeff(k)).norm() < 1e-14);
        }
        assert!(b.normalization_residual().unwrap() < 1e-14);
    }

    #[test]
    fn counterexample_preconditions() {
        assert!(counterexample_search(2.5, 20, 0.01, 64).is_err());
        assert!(matches!(
            counterexample_search(1.0, 5, 0.01, 64),
            Err(Error::SearchExhausted(5))
        ));
    }
}
