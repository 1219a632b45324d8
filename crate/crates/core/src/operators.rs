//! Fourier–Galerkin matrices of `Λ_a`, `D_a`, `|D_a|` and `P_0`.
//!
//! All matrices act on coefficient vectors in the orthonormal basis
//! `e_n = e^{inθ}/√(2π)`, `n = -N..=N` (row/column `i` is mode `i - N`).
//! `Λ_a` and `D_a` are compressions `P_N a^{1/2} Λ a^{1/2} P_N`: the inner
//! multiplication keeps every mode `a^{1/2}` can reach, so the Galerkin
//! eigenvalues are upper bounds of the true ones and no spurious eigenvalues
//! enter the low spectrum.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier::FourierFunction;
use crate::linalg::{symmetrize, CMatrix, CVector};

/// Largest accepted `|(1/2π)∫a^{-1} - 1|`.
pub const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SteklovDiscretization {
    order: usize,
    lambda_a: CMatrix,
    d_a: CMatrix,
    abs_da: CMatrix,
    p0: CMatrix,
    defect: CMatrix,
    kernel: CVector,
    phi_basis: CMatrix,
    diagnostics: Vec<String>,
}

/// Positivity and normalization check shared by every spectral entry point.
pub fn validate_weight(a: &FourierFunction) -> Result<()> {
    let residual = a.normalization_residual()?;
    if residual > NORMALIZATION_TOL {
        return Err(Error::NotNormalized(residual));
    }
    Ok(())
}

/// Effective bandwidth: last mode above `1e-14` relative to the mean.
pub fn effective_bandwidth(a: &FourierFunction) -> usize {
    a.bandwidth(1e-14 * a.mean().abs().max(f64::MIN_POSITIVE))
}

/// Warning for truncations below four times the bandwidth of `a`.
pub fn truncation_warning(a: &FourierFunction, n: usize) -> Option<String> {
    let band = effective_bandwidth(a);
    (n < 4 * band).then(|| {
        let msg = format!("truncation N = {n} is below 4x the weight bandwidth {band}");
        log::warn!("{msg}");
        msg
    })
}

/// Multiplication by `a^{1/2}` from modes `-M..=M` onto modes `-N..=N`,
/// with `M = N + bandwidth(a^{1/2})`. Stored by its band of coefficients.
pub struct SqrtWeightSection {
    order: usize,
    band: usize,
    coeffs: Vec<Complex64>,
}

/// Coefficients below this fraction of the mean are roundoff and dropped.
const SECTION_TOL: f64 = 1e-15;

pub fn sqrt_weight_section(a: &FourierFunction, n: usize) -> Result<SqrtWeightSection> {
    let s = a.pointwise_power_with_order(0.5, (2 * n).max(a.order()))?;
    let band = s.bandwidth(SECTION_TOL * s.mean().abs());
    let coeffs = (-(band as i64)..=band as i64).map(|k| s.coeff(k)).collect();
    Ok(SqrtWeightSection {
        order: n,
        band,
        coeffs,
    })
}

/// Fills a Hermitian matrix from its upper triangle, rows in parallel.
fn hermitian_from_rows(d: usize, entry: impl Fn(usize, usize) -> Complex64 + Sync) -> CMatrix {
    let rows: Vec<Vec<Complex64>> = (0..d)
        .into_par_iter()
        .map(|i| (i..d).map(|j| entry(i, j)).collect())
        .collect();
    let mut out = CMatrix::zeros(d, d);
    for (i, row) in rows.iter().enumerate() {
        for (off, &z) in row.iter().enumerate() {
            let j = i + off;
            out[(i, j)] = z;
            out[(j, i)] = z.conj();
        }
        out[(i, i)].im = 0.0;
    }
    out
}

impl SqrtWeightSection {
    /// Coefficient `c_k` of `a^{1/2}`, zero outside the band.
    fn c(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize <= self.band {
            self.coeffs[(k + self.band as i64) as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn inner_order(&self) -> usize {
        self.order + self.band
    }

    /// Compression of `a^{1/2} symbol(D) a^{1/2}`:
    /// `Σ_p c_{i-p} symbol(p) conj(c_{j-p})`.
    fn sandwich(&self, symbol: impl Fn(i64) -> f64 + Sync) -> CMatrix {
        let n = self.order as i64;
        let b = self.band as i64;
        hermitian_from_rows(2 * self.order + 1, |i, j| {
            let (mi, mj) = (i as i64 - n, j as i64 - n);
            if (mi - mj).abs() > 2 * b {
                return Complex64::new(0.0, 0.0);
            }
            (mi.max(mj) - b..=mi.min(mj) + b)
                .map(|p| self.c(mi - p) * self.c(mj - p).conj() * symbol(p))
                .sum()
        })
    }

    /// Compression of `a^{1/2}(ΛaΛ - DaD)a^{1/2}`. The middle kernel
    /// `a_{p-q}(|p||q| - pq)` lives on `pq < 0`, `|p| + |q| ≤ bandwidth(a)`,
    /// so only a central block of the result is nonzero.
    fn commutator_defect(&self, a: &FourierFunction) -> CMatrix {
        let n = self.order as i64;
        let d = 2 * self.order + 1;
        let ba = a.bandwidth(SECTION_TOL * a.mean().abs()) as i64;
        if ba == 0 {
            return CMatrix::zeros(d, d);
        }
        let reach = (ba + self.band as i64).min(n);
        let b = self.band as i64;
        let w = |p: i64, q: i64| {
            if p * q < 0 {
                a.coeff(p - q) * (2 * p.abs() * q.abs()) as f64
            } else {
                Complex64::new(0.0, 0.0)
            }
        };
        // G_{iq} = Σ_p c_{i-p} W_{pq}, for |i| ≤ reach, |q| ≤ ba
        let g: Vec<Vec<Complex64>> = (-reach..=reach)
            .into_par_iter()
            .map(|i| {
                (-ba..=ba)
                    .map(|q| {
                        ((i - b).max(-ba)..=(i + b).min(ba))
                            .map(|p| self.c(i - p) * w(p, q))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let block = hermitian_from_rows((2 * reach + 1) as usize, |i, j| {
            let mj = j as i64 - reach;
            ((mj - b).max(-ba)..=(mj + b).min(ba))
                .map(|q| g[i][(q + ba) as usize] * self.c(mj - q).conj())
                .sum()
        });
        let mut out = CMatrix::zeros(d, d);
        let off = (n - reach) as usize;
        out.view_mut((off, off), block.shape()).copy_from(&block);
        out
    }
}

/// `Λ_a = a^{1/2} Λ a^{1/2}` compressed to modes `-N..=N`.
pub fn lambda_matrix(a: &FourierFunction, n: usize) -> Result<CMatrix> {
    validate_weight(a)?;
    Ok(sqrt_weight_section(a, n)?.sandwich(|k| k.abs() as f64))
}

/// `D_a = a^{1/2} D a^{1/2}` compressed to modes `-N..=N`.
pub fn d_matrix(a: &FourierFunction, n: usize) -> Result<CMatrix> {
    validate_weight(a)?;
    Ok(sqrt_weight_section(a, n)?.sandwich(|k| k as f64))
}

/// `Λ_a² - D_a²` compressed to modes `-N..=N`.
pub fn commutator_defect_matrix(a: &FourierFunction, n: usize) -> Result<CMatrix> {
    validate_weight(a)?;
    Ok(sqrt_weight_section(a, n)?.commutator_defect(a))
}

/// Unit coefficient vector of the kernel function `(2πa)^{-1/2}`.
pub fn kernel_vector(a: &FourierFunction, n: usize) -> Result<CVector> {
    let g = a.pointwise_power_with_order(-0.5, n)?;
    let v = CVector::from_iterator(2 * n + 1, g.coeffs().iter().copied());
    let norm = v.norm();
    Ok(v / Complex64::new(norm, 0.0))
}

/// Samples of `a^{-1/2}` and of the periodic part of `Θ(θ) = ∫_0^θ a^{-1}`.
struct PhaseGrid {
    inv_sqrt: Vec<f64>,
    theta_periodic: Vec<f64>,
}

impl PhaseGrid {
    fn new(a: &FourierFunction, n: usize) -> Result<Self> {
        let len = 8 * n + 4 * a.order() + 33;
        let len = len | 1;
        let values = a.check_positive(len)?;
        let recip: Vec<f64> = values.iter().map(|v| v.recip()).collect();
        let b = FourierFunction::from_samples(&recip)?;
        // Θ̃ = Σ_{k≠0} b_k (e^{ikθ} - 1)/(ik)
        let m = b.order() as i64;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); b.coeffs().len()];
        let mut constant = Complex64::new(0.0, 0.0);
        for k in (-m..=m).filter(|&k| k != 0) {
            let c = b.coeff(k) / Complex64::new(0.0, k as f64);
            coeffs[(k + m) as usize] = c;
            constant -= c;
        }
        coeffs[m as usize] = constant;
        let theta = FourierFunction::new(b.order(), coeffs)?;
        Ok(Self {
            inv_sqrt: values.iter().map(|v| v.sqrt().recip()).collect(),
            theta_periodic: theta.real_samples(len),
        })
    }

    /// Coefficients of `φ_m` in the `e_n` basis, `n = -N..=N`.
    fn phi(&self, m: i64, n: usize) -> Result<CVector> {
        let samples: Vec<Complex64> = self
            .inv_sqrt
            .iter()
            .zip(&self.theta_periodic)
            .map(|(&w, &t)| Complex64::from_polar(w, m as f64 * t))
            .collect();
        let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
        let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
        let gr = FourierFunction::from_samples(&re)?;
        let gi = FourierFunction::from_samples(&im)?;
        let n = n as i64;
        Ok(CVector::from_iterator(
            (2 * n + 1) as usize,
            (-n..=n).map(|k| gr.coeff(k - m) + Complex64::new(0.0, 1.0) * gi.coeff(k - m)),
        ))
    }
}

/// Coefficient vector of `φ_m(θ) = (2πa)^{-1/2} e^{im∫_0^θ a^{-1}}`.
pub fn phi_vector(a: &FourierFunction, m: i64, n: usize) -> Result<CVector> {
    validate_weight(a)?;
    PhaseGrid::new(a, n)?.phi(m, n)
}

/// Columns are `φ_m`, `m = -N..=N`.
pub fn phi_basis(a: &FourierFunction, n: usize) -> Result<CMatrix> {
    validate_weight(a)?;
    let grid = PhaseGrid::new(a, n)?;
    let d = 2 * n + 1;
    let mut basis = CMatrix::zeros(d, d);
    for (j, m) in (-(n as i64)..=n as i64).enumerate() {
        basis.set_column(j, &grid.phi(m, n)?);
    }
    Ok(basis)
}

pub fn build_discretization(a: &FourierFunction, n: usize) -> Result<SteklovDiscretization> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "truncation order must be positive".into(),
        ));
    }
    validate_weight(a)?;
    let mut diagnostics = Vec::new();
    diagnostics.extend(truncation_warning(a, n));

    let t = sqrt_weight_section(a, n)?;
    let lambda_a = t.sandwich(|k| k.abs() as f64);
    let d_a = t.sandwich(|k| k as f64);
    let defect = t.commutator_defect(a);
    let kernel = kernel_vector(a, n)?;
    let p0 = &kernel * kernel.adjoint();
    let phi = phi_basis(a, n)?;
    let abs_da = weighted_diagonal_basis(&phi, |k| k.abs() as f64);

    Ok(SteklovDiscretization {
        order: n,
        lambda_a,
        d_a,
        abs_da,
        p0,
        defect,
        kernel,
        phi_basis: phi,
        diagnostics,
    })
}

/// `Φ diag(symbol) Φᴴ`.
fn weighted_diagonal_basis(phi: &CMatrix, symbol: impl Fn(i64) -> f64) -> CMatrix {
    let half = (phi.ncols() as i64 - 1) / 2;
    let mut scaled = phi.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new(symbol(j as i64 - half), 0.0);
    }
    symmetrize(&(&scaled * phi.adjoint()))
}

impl SteklovDiscretization {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        2 * self.order + 1
    }

    pub fn lambda_a(&self) -> &CMatrix {
        &self.lambda_a
    }

    pub fn d_a(&self) -> &CMatrix {
        &self.d_a
    }

    pub fn abs_da(&self) -> &CMatrix {
        &self.abs_da
    }

    pub fn p0(&self) -> &CMatrix {
        &self.p0
    }

    pub fn kernel(&self) -> &CVector {
        &self.kernel
    }

    pub fn phi_basis(&self) -> &CMatrix {
        &self.phi_basis
    }

    /// Column of `φ_m`.
    pub fn phi(&self, m: i64) -> CVector {
        self.phi_basis
            .column((m + self.order as i64) as usize)
            .into_owned()
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    /// `Λ_a + P_0`, invertible with the kernel lifted to eigenvalue one.
    pub fn shifted_lambda(&self) -> CMatrix {
        symmetrize(&(&self.lambda_a + &self.p0))
    }

    /// `|D_a| + P_0`.
    pub fn shifted_abs_da(&self) -> CMatrix {
        symmetrize(&(&self.abs_da + &self.p0))
    }

    /// `Λ_a² - D_a²`, a smoothing operator.
    pub fn commutator_defect(&self) -> &CMatrix {
        &self.defect
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::make_alpha_tau;
    use crate::linalg::{
        hermitian_defect, hermitian_eigenvalues, quadratic_form, HermitianEigen, ScalarFunction,
    };

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn constant_weight_is_diagonal() {
        let one = FourierFunction::constant(1.0);
        let disc = build_discretization(&one, 6).unwrap();
        let d = disc.dim();
        for i in 0..d {
            for j in 0..d {
                let n = i as f64 - 6.0;
                let expected = if i == j { n.abs() } else { 0.0 };
                assert!((disc.lambda_a()[(i, j)].re - expected).abs() < 1e-14);
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((disc.phi_basis()[(i, j)] - Complex64::new(id, 0.0)).norm() < 1e-14);
                let p = if i == 6 && j == 6 { 1.0 } else { 0.0 };
                assert!((disc.p0()[(i, j)].re - p).abs() < 1e-14);
            }
        }
        assert!(max_abs(disc.commutator_defect()) == 0.0);
    }

    #[test]
    fn alpha_tau_single_kernel() {
        let a = make_alpha_tau(1, 0.1).unwrap();
        let disc = build_discretization(&a, 64).unwrap();
        assert!(hermitian_defect(disc.lambda_a()) < 1e-12);
        let eig = HermitianEigen::new(disc.lambda_a()).unwrap();
        let v = eig.values();
        assert!(v[0].abs() < 1e-8);
        assert!(v[1] > 0.5);
        let overlap = eig.vectors().column(0).dotc(disc.kernel()).norm();
        assert!(overlap > 0.99, "overlap {overlap}");
    }

    #[test]
    fn phi_basis_diagonalizes_d_a() {
        let a = make_alpha_tau(1, 0.15).unwrap();
        let n = 48usize;
        let disc = build_discretization(&a, n).unwrap();
        let phi = disc.phi_basis();
        let h = n / 2;
        let cols: Vec<usize> = (n - h..=n + h).collect();
        let sub = CMatrix::from_fn(phi.nrows(), cols.len(), |r, c| phi[(r, cols[c])]);
        let gram = sub.adjoint() * &sub;
        let da = sub.adjoint() * disc.d_a() * &sub;
        for i in 0..cols.len() {
            for j in 0..cols.len() {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)].re - id).abs() < 1e-8 && gram[(i, j)].im.abs() < 1e-8);
                let m = if i == j { i as f64 - h as f64 } else { 0.0 };
                assert!((da[(i, j)] - Complex64::new(m, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn phi_zero_spans_kernel() {
        let a = make_alpha_tau(2, 0.2).unwrap();
        let n = 40;
        let phi0 = phi_vector(&a, 0, n).unwrap();
        let k = kernel_vector(&a, n).unwrap();
        assert!((phi0.dotc(&k).norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shifted_diagonal_bound() {
        let a = make_alpha_tau(1, 0.2).unwrap();
        let n = 64;
        let disc = build_discretization(&a, n).unwrap();
        let shifted = disc.shifted_lambda();
        let eig = HermitianEigen::new(&shifted).unwrap();
        for m in -(n as i64) / 4..=(n as i64) / 4 {
            let phi = disc.phi(m);
            let base = (m.unsigned_abs().max(1)) as f64;
            let v1 = quadratic_form(&shifted, &phi, &phi).unwrap().re;
            assert!(v1 >= base - 1e-6, "m = {m}: {v1}");
            let v2 = eig
                .quadratic_form(ScalarFunction::Power(2.0), &phi, &phi)
                .unwrap()
                .re;
            assert!(v2 >= base * base - 1e-6, "m = {m}: {v2}");
        }
    }

    #[test]
    fn disk_lambda_squared_equals_d_squared() {
        let one = FourierFunction::constant(1.0);
        let l = lambda_matrix(&one, 10).unwrap();
        let d = d_matrix(&one, 10).unwrap();
        assert_eq!(&l * &l, &d * &d);
    }

    #[test]
    fn rejects_unnormalized_weight() {
        let a = FourierFunction::constant(2.0);
        assert!(matches!(lambda_matrix(&a, 8), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn warns_on_small_truncation() {
        let a = make_alpha_tau(5, 0.1).unwrap();
        let disc = build_discretization(&a, 16).unwrap();
        assert_eq!(disc.diagnostics().len(), 1);
    }

    #[test]
    fn trusted_eigenvalues_stable_under_doubling() {
        let a = make_alpha_tau(1, 0.1).unwrap();
        let coarse = hermitian_eigenvalues(&lambda_matrix(&a, 32).unwrap()).unwrap();
        let fine = hermitian_eigenvalues(&lambda_matrix(&a, 64).unwrap()).unwrap();
        for k in 0..=16 {
            assert!((coarse[k] - fine[k]).abs() < 1e-8);
        }
    }
}
