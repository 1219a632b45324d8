//! Hermitian eigendecompositions and spectral functions of positive matrices.
//!
//! Galerkin matrices here act on the Fourier modes `n = -N..=N` of real
//! functions, so they satisfy `A[-j,-k] = conj(A[j,k])`. In the real basis
//! `{1, √2 cos nθ, √2 sin nθ}` such a matrix is real symmetric, which lets the
//! eigensolver run in real arithmetic. Other Hermitian input falls back to a
//! complex solve.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;
use std::path::Path;

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative Hermitian defect accepted by [`HermitianEigen::new`].
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues below `-PSD_TOL` make a matrix non-positive.
pub const PSD_TOL: f64 = 1e-8;
/// Floor applied to eigenvalues before logarithms and negative powers.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Scalar functions `x^s ln^m x` applied through the spectral theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarFunction {
    Power(f64),
    Log,
    PowerLog { power: f64, log_power: u32 },
}

impl ScalarFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalarFunction::Power(s) => x.powf(s),
            ScalarFunction::Log => x.ln(),
            ScalarFunction::PowerLog { power, log_power } => {
                x.powf(power) * x.ln().powi(log_power as i32)
            }
        }
    }

    /// Whether the function is singular at zero, so the kernel must be floored.
    fn needs_floor(&self) -> bool {
        match *self {
            ScalarFunction::Power(s) => s < 0.0,
            ScalarFunction::Log => true,
            ScalarFunction::PowerLog { power, log_power } => power < 0.0 || log_power > 0,
        }
    }
}

fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |A - Aᴴ|` divided by `max(1, max |A|)`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            defect = defect.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    defect / max_abs(a).max(1.0)
}

/// `(A + Aᴴ)/2`.
pub fn symmetrize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Real basis vector `i` as a combination of at most two Fourier modes.
/// Index 0 is the constant, `2n-1` is `√2 cos nθ`, `2n` is `√2 sin nθ`.
fn real_basis_entries(i: usize, half: usize) -> [(usize, Complex64); 2] {
    let zero = Complex64::new(0.0, 0.0);
    if i == 0 {
        return [(half, Complex64::new(1.0, 0.0)), (half, zero)];
    }
    let n = (i + 1) / 2;
    let (pos, neg) = (half + n, half - n);
    if i % 2 == 1 {
        let c = Complex64::new(FRAC_1_SQRT_2, 0.0);
        [(pos, c), (neg, c)]
    } else {
        [
            (pos, Complex64::new(0.0, -FRAC_1_SQRT_2)),
            (neg, Complex64::new(0.0, FRAC_1_SQRT_2)),
        ]
    }
}

fn has_real_structure(a: &CMatrix) -> bool {
    let d = a.nrows();
    if d.is_multiple_of(2) {
        return false;
    }
    let scale = max_abs(a).max(1.0);
    for i in 0..d {
        for j in 0..d {
            if (a[(d - 1 - i, d - 1 - j)] - a[(i, j)].conj()).norm() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

/// `Wᴴ A W` for the real basis `W`; real symmetric when `A` has real structure.
fn to_real_basis(a: &CMatrix) -> DMatrix<f64> {
    let d = a.nrows();
    let half = (d - 1) / 2;
    let mut aw = CMatrix::zeros(d, d);
    for j in 0..d {
        for (mode, c) in real_basis_entries(j, half) {
            if c.norm() == 0.0 {
                continue;
            }
            for r in 0..d {
                aw[(r, j)] += a[(r, mode)] * c;
            }
        }
    }
    let mut b = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let entries = real_basis_entries(i, half);
        for j in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for (mode, c) in entries {
                acc += c.conj() * aw[(mode, j)];
            }
            b[(i, j)] = acc.re;
        }
    }
    // exact symmetry for the solver
    let bt = b.transpose();
    (b + bt) * 0.5
}

/// Maps real-basis coordinates back to Fourier coefficients.
fn from_real_basis(y: &DMatrix<f64>) -> CMatrix {
    let d = y.nrows();
    let half = (d - 1) / 2;
    let mut x = CMatrix::zeros(d, y.ncols());
    for i in 0..d {
        for (mode, c) in real_basis_entries(i, half) {
            if c.norm() == 0.0 {
                continue;
            }
            for j in 0..y.ncols() {
                x[(mode, j)] += c * y[(i, j)];
            }
        }
    }
    x
}

fn check_hermitian(a: &CMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(a.nrows(), a.ncols()));
    }
    let defect = hermitian_defect(a);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>> {
    check_hermitian(a)?;
    let mut values: Vec<f64> = if has_real_structure(a) {
        to_real_basis(a)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    } else {
        SymmetricEigen::new(symmetrize(a))
            .eigenvalues
            .iter()
            .copied()
            .collect()
    };
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Ascending eigenvalues with the leading `count` refined by Rayleigh–Ritz on
/// clusters of the computed eigenvectors.
///
/// The dense solver errs by about `ε‖A‖` on every eigenvalue. The Ritz values
/// of a cluster at distance `g` from the rest err by `(ε‖A‖)²/g` plus the
/// rounding of `XᴴAX`, which scales with the eigenvalue itself when the
/// eigenvectors live on low modes. Clusters are runs with gaps below
/// `sqrt(ε)‖A‖`.
pub fn refined_eigenvalues(a: &CMatrix, count: usize) -> Result<Vec<f64>> {
    check_hermitian(a)?;
    Ok(if has_real_structure(a) {
        refine_leading(&to_real_basis(a), count)
    } else {
        refine_leading(&symmetrize(a), count)
    })
}

fn refine_leading<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, count: usize) -> Vec<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let norm = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let gap = f64::EPSILON.sqrt() * norm;
    let mut start = 0;
    while start < count.min(values.len()) {
        let mut end = start + 1;
        while end < values.len() && values[end] - values[end - 1] < gap {
            end += 1;
        }
        let x = DMatrix::from_fn(a.nrows(), end - start, |r, c| {
            eig.eigenvectors[(r, order[start + c])].clone()
        });
        let h = x.adjoint() * (a * &x);
        let h = (&h + h.adjoint()) * T::from_real(0.5);
        let mut ritz: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ritz.sort_by(f64::total_cmp);
        values[start..end].copy_from_slice(&ritz);
        start = end;
    }
    values.sort_by(f64::total_cmp);
    values
}

/// Eigenpairs `A x_j = λ_j x_j`, ascending, with orthonormal columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    values: Vec<f64>,
    vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(a: &CMatrix) -> Result<Self> {
        check_hermitian(a)?;
        let (values, vectors) = if has_real_structure(a) {
            let eig = SymmetricEigen::new(to_real_basis(a));
            (eig.eigenvalues, from_real_basis(&eig.eigenvectors))
        } else {
            let eig = SymmetricEigen::new(symmetrize(a));
            (eig.eigenvalues, eig.eigenvectors)
        };
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let sorted_values = order.iter().map(|&i| values[i]).collect();
        let sorted_vectors =
            CMatrix::from_fn(vectors.nrows(), order.len(), |r, c| vectors[(r, order[c])]);
        Ok(Self {
            values: sorted_values,
            vectors: sorted_vectors,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `f(λ_j)` with the PSD check and kernel floor applied.
    pub fn spectral_values(&self, f: ScalarFunction) -> Result<Vec<f64>> {
        if let Some(&low) = self.values.first() {
            if low < -PSD_TOL {
                return Err(Error::NotPositiveSemidefinite(low));
            }
        }
        Ok(self
            .values
            .iter()
            .map(|&x| {
                let x = if f.needs_floor() {
                    x.max(EIGEN_FLOOR)
                } else {
                    x.max(0.0)
                };
                f.eval(x)
            })
            .collect())
    }

    /// `X diag(f(λ)) Xᴴ`.
    pub fn function_matrix(&self, f: ScalarFunction) -> Result<CMatrix> {
        let fv = self.spectral_values(f)?;
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::new(fv[j], 0.0);
        }
        Ok(scaled * self.vectors.adjoint())
    }

    /// Coordinates `x_jᴴ u` of a vector in the eigenbasis.
    pub fn coordinates(&self, u: &CVector) -> Result<CVector> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch(u.len(), self.dim()));
        }
        Ok(self.vectors.adjoint() * u)
    }

    /// `⟨f(A) u, v⟩ = Σ_j f(λ_j) (x_jᴴ u) conj(x_jᴴ v)`.
    pub fn quadratic_form(&self, f: ScalarFunction, u: &CVector, v: &CVector) -> Result<Complex64> {
        let fv = self.spectral_values(f)?;
        let cu = self.coordinates(u)?;
        let cv = self.coordinates(v)?;
        Ok(fv
            .iter()
            .zip(cu.iter().zip(cv.iter()))
            .map(|(&w, (a, b))| a * b.conj() * w)
            .sum())
    }

    /// Per-eigenpair terms `f(λ_j) x_jᴴ M x_j` of `Tr(f(A) M)`.
    pub fn trace_terms(&self, f: ScalarFunction, m: &CMatrix) -> Result<Vec<f64>> {
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(m.nrows(), self.dim()));
        }
        let fv = self.spectral_values(f)?;
        let mx = m * &self.vectors;
        Ok((0..self.dim())
            .map(|j| {
                let diag: Complex64 = self
                    .vectors
                    .column(j)
                    .iter()
                    .zip(mx.column(j).iter())
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                fv[j] * diag.re
            })
            .collect())
    }
}

/// `f(A)` for Hermitian positive semidefinite `A`.
pub fn matrix_function(a: &CMatrix, f: ScalarFunction) -> Result<CMatrix> {
    HermitianEigen::new(a)?.function_matrix(f)
}

/// `⟨Op u, v⟩ = vᴴ (Op u)` in the coefficient inner product.
pub fn quadratic_form(op: &CMatrix, u: &CVector, v: &CVector) -> Result<Complex64> {
    if op.ncols() != u.len() {
        return Err(Error::DimensionMismatch(op.ncols(), u.len()));
    }
    if op.nrows() != v.len() {
        return Err(Error::DimensionMismatch(op.nrows(), v.len()));
    }
    Ok(v.dotc(&(op * u)))
}

/// Dense dump: row-major `(re, im)` pairs of little-endian `f64`.
pub fn write_matrix_le(path: &Path, a: &CMatrix) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.write_all(&a[(i, j)].re.to_le_bytes())?;
            out.write_all(&a[(i, j)].im.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Random-ish Hermitian matrix with real structure on modes -h..=h.
    fn structured(h: usize, seed: u64) -> CMatrix {
        let d = 2 * h + 1;
        let mut state = seed;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] = Complex64::new(next(), next());
            }
        }
        let mut b = a.clone();
        for i in 0..d {
            for j in 0..d {
                b[(i, j)] += a[(d - 1 - i, d - 1 - j)].conj();
            }
        }
        let h = symmetrize(&b);
        &h * h.adjoint() + CMatrix::identity(d, d) * c(0.1)
    }

    #[test]
    fn identity_power() {
        let a = structured(3, 7);
        let p = matrix_function(&a, ScalarFunction::Power(1.0)).unwrap();
        assert!((p - &a).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12 * max_abs(&a));
    }

    #[test]
    fn diagonal_log() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(2.0)]));
        let l = matrix_function(&a, ScalarFunction::Log).unwrap();
        assert_abs_diff_eq!(l[(0, 0)].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l[(1, 1)].re, 2f64.ln(), epsilon = 1e-15);
        assert!(l[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn real_and_complex_paths_agree() {
        let a = structured(4, 11);
        assert!(has_real_structure(&a));
        let real = hermitian_eigenvalues(&a).unwrap();
        let mut complex: Vec<f64> = SymmetricEigen::new(a.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        complex.sort_by(f64::total_cmp);
        for (x, y) in real.iter().zip(&complex) {
            assert!((x - y).abs() < 1e-10);
        }
        let eig = HermitianEigen::new(&a).unwrap();
        let recon = eig.function_matrix(ScalarFunction::Power(1.0)).unwrap();
        assert!((recon - &a).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-11);
    }

    #[test]
    fn general_hermitian_fallback() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[
                c(2.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                c(2.0),
            ],
        );
        let v = hermitian_eigenvalues(&a).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn exp_log_round_trip() {
        let a = structured(5, 3);
        let eig = HermitianEigen::new(&a).unwrap();
        let log = eig.function_matrix(ScalarFunction::Log).unwrap();
        let back = HermitianEigen::new(&symmetrize(&log)).unwrap();
        let exp_values: Vec<f64> = back.values().iter().map(|x| x.exp()).collect();
        for (x, y) in exp_values.iter().zip(eig.values()) {
            assert!((x - y).abs() < 1e-10 * y.abs());
        }
    }

    #[test]
    fn rejects_non_hermitian_and_indefinite() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)]);
        assert!(matches!(
            matrix_function(&a, ScalarFunction::Log),
            Err(Error::NotHermitian(_))
        ));
        let b = CMatrix::from_diagonal(&CVector::from_vec(vec![c(-1.0), c(2.0)]));
        assert!(matches!(
            matrix_function(&b, ScalarFunction::Log),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn quadratic_form_identity() {
        let id = CMatrix::identity(3, 3);
        let u = CVector::from_vec(vec![c(0.0), c(1.0), c(0.0)]);
        assert_eq!(quadratic_form(&id, &u, &u).unwrap(), c(1.0));
        let short = CVector::from_vec(vec![c(1.0)]);
        assert!(matches!(
            quadratic_form(&id, &short, &u),
            Err(Error::DimensionMismatch(3, 1))
        ));
    }

    #[test]
    fn matrix_dump_layout() {
        let a = CMatrix::from_row_slice(1, 2, &[Complex64::new(1.0, 2.0), c(3.0)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        write_matrix_le(&path, &a).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let vals: Vec<f64> = bytes
            .chunks(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        assert_eq!(vals, vec![1.0, 2.0, 3.0, 0.0]);
    }
}
