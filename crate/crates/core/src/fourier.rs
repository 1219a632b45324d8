//! Smooth real functions on the unit circle stored as truncated Fourier series.
//!
//! A [`FourierFunction`] of order `M` carries the coefficients `c_k`,
//! `k = -M..=M`, of `f(θ) = Σ c_k e^{ikθ}`. Nonlinear pointwise operations
//! (powers, composition with a disk automorphism) are evaluated on a uniform
//! grid oversampled by a factor of two and transformed back, which keeps the
//! aliasing error at the level of the discarded coefficients.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid values at or below this are treated as a loss of positivity.
pub const POSITIVITY_MARGIN: f64 = 1e-10;

/// Largest grid used to converge a mean of `1/a`.
const MAX_GRID: usize = 1 << 22;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let plan = if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        };
        plan.process(buf);
    });
}

fn grid_angle(j: usize, len: usize) -> f64 {
    2.0 * PI * j as f64 / len as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFourier", into = "RawFourier")]
pub struct FourierFunction {
    order: usize,
    coeffs: Vec<Complex64>,
}

/// Wire form: `{"grid_order": M, "coeffs": [[re, im], ...]}`, `k = -M..=M`.
#[derive(Serialize, Deserialize)]
struct RawFourier {
    grid_order: usize,
    coeffs: Vec<[f64; 2]>,
}

impl TryFrom<RawFourier> for FourierFunction {
    type Error = Error;

    fn try_from(raw: RawFourier) -> Result<Self> {
        let coeffs = raw
            .coeffs
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        FourierFunction::new(raw.grid_order, coeffs)
    }
}

impl From<FourierFunction> for RawFourier {
    fn from(f: FourierFunction) -> Self {
        RawFourier {
            grid_order: f.order,
            coeffs: f.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

impl FourierFunction {
    pub fn new(order: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 2 * order + 1 {
            return Err(Error::CoefficientLength {
                order,
                got: coeffs.len(),
            });
        }
        if let Some(i) = coeffs
            .iter()
            .position(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { order, coeffs })
    }

    pub fn constant(value: f64) -> Self {
        Self::constant_with_order(value, 0)
    }

    pub fn constant_with_order(value: f64, order: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * order + 1];
        coeffs[order] = Complex64::new(value, 0.0);
        Self { order, coeffs }
    }

    /// Build from samples at the `2M+1` uniform nodes `θ_j = 2πj/(2M+1)`.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut f = Self::from_complex_samples(buf)?;
        f.enforce_hermitian();
        Ok(f)
    }

    fn from_complex_samples(mut buf: Vec<Complex64>) -> Result<Self> {
        let len = buf.len();
        if len.is_multiple_of(2) {
            return Err(Error::EvenSampleCount(len));
        }
        let order = (len - 1) / 2;
        fft_in_place(&mut buf, false);
        let scale = 1.0 / len as f64;
        let coeffs = (-(order as i64)..=order as i64)
            .map(|k| buf[k.rem_euclid(len as i64) as usize] * scale)
            .collect();
        Ok(Self { order, coeffs })
    }

    /// Samples `f` at `2M+1` nodes; exact for trigonometric polynomials of degree ≤ M.
    pub fn from_fn(order: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let len = 2 * order + 1;
        let values: Vec<f64> = (0..len).map(|j| f(grid_angle(j, len))).collect();
        Self::from_samples(&values)
    }

    /// Doubles the order from `start` until the outer quarter of the spectrum
    /// falls below `tol` relative to the largest coefficient, capped at `max_order`.
    pub fn from_fn_adaptive(
        start: usize,
        max_order: usize,
        tol: f64,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        Self::from_grid_adaptive(start, max_order, tol, |len| {
            (0..len).map(|j| f(grid_angle(j, len))).collect()
        })
    }

    /// Same as [`Self::from_fn_adaptive`], with the sampler receiving the grid length.
    fn from_grid_adaptive(
        start: usize,
        max_order: usize,
        tol: f64,
        sampler: impl Fn(usize) -> Vec<f64>,
    ) -> Result<Self> {
        let mut order = start.max(8);
        loop {
            let g = Self::from_samples(&sampler(2 * order + 1))?;
            let resolved = g.is_resolved(tol);
            if resolved || order >= max_order {
                if !resolved {
                    log::warn!(
                        "adaptive sampling stopped at order {order} with tail {:e}",
                        g.outer_tail()
                    );
                }
                return Ok(g.trimmed(tol * 1e-3));
            }
            order = (2 * order).min(max_order);
        }
    }

    fn outer_tail(&self) -> f64 {
        let m = self.order as i64;
        let cut = (3 * m) / 4;
        (-m..=m)
            .filter(|k| k.abs() > cut)
            .map(|k| self.coeff(k).norm())
            .fold(0.0, f64::max)
    }

    fn is_resolved(&self, tol: f64) -> bool {
        let peak = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        self.outer_tail() <= tol * peak.max(f64::MIN_POSITIVE)
    }

    /// Drops trailing coefficients below `tol` relative to the peak.
    fn trimmed(&self, tol: f64) -> Self {
        let peak = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let keep = self.bandwidth(tol * peak.max(f64::MIN_POSITIVE));
        self.with_order(keep.max(1))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Coefficients in index order `k = -M..=M`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient `c_k`, zero outside the stored range.
    pub fn coeff(&self, k: i64) -> Complex64 {
        let m = self.order as i64;
        if k.abs() > m {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + m) as usize]
        }
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[self.order].re
    }

    /// Smallest `B` with `|c_k| <= abs_tol` for all `|k| > B`.
    pub fn bandwidth(&self, abs_tol: f64) -> usize {
        let m = self.order as i64;
        (0..=m)
            .rev()
            .find(|&k| self.coeff(k).norm() > abs_tol || self.coeff(-k).norm() > abs_tol)
            .unwrap_or(0) as usize
    }

    /// Pads with zeros or truncates to the requested order.
    pub fn with_order(&self, order: usize) -> Self {
        let coeffs = (-(order as i64)..=order as i64)
            .map(|k| self.coeff(k))
            .collect();
        Self { order, coeffs }
    }

    /// Largest violation of `c_{-k} = conj(c_k)`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..=self.order as i64)
            .map(|k| (self.coeff(-k) - self.coeff(k).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    fn enforce_hermitian(&mut self) {
        let m = self.order as i64;
        for k in 0..=m {
            let avg = (self.coeff(k) + self.coeff(-k).conj()) * 0.5;
            self.coeffs[(k + m) as usize] = avg;
            self.coeffs[(m - k) as usize] = avg.conj();
        }
        self.coeffs[self.order].im = 0.0;
    }

    pub fn eval(&self, theta: f64) -> Complex64 {
        let step = Complex64::from_polar(1.0, theta);
        let m = self.order as i64;
        let mut z = Complex64::from_polar(1.0, -(m as f64) * theta);
        let mut acc = Complex64::new(0.0, 0.0);
        for c in &self.coeffs {
            acc += c * z;
            z *= step;
        }
        acc
    }

    /// Values on the uniform grid of `len` nodes (folded if `len < 2M+1`).
    pub fn samples(&self, len: usize) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let m = self.order as i64;
        for k in -m..=m {
            buf[k.rem_euclid(len as i64) as usize] += self.coeff(k);
        }
        fft_in_place(&mut buf, true);
        buf
    }

    pub fn real_samples(&self, len: usize) -> Vec<f64> {
        self.samples(len).into_iter().map(|z| z.re).collect()
    }

    /// Odd grid length used for nonlinear maps producing order `out_order`.
    fn oversampled_len(&self, out_order: usize) -> usize {
        2 * (2 * self.order.max(out_order) + 1) + 1
    }

    /// Checks the grid minimum of the real part against [`POSITIVITY_MARGIN`].
    pub fn check_positive(&self, len: usize) -> Result<Vec<f64>> {
        let values = self.real_samples(len);
        let (index, &value) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is non-empty");
        if !(value > POSITIVITY_MARGIN) {
            return Err(Error::NotPositive {
                index,
                theta: grid_angle(index, len),
                value,
            });
        }
        Ok(values)
    }

    pub fn min_value(&self) -> f64 {
        self.extremum(1.0)
    }

    pub fn max_value(&self) -> f64 {
        -self.extremum(-1.0)
    }

    fn is_constant(&self) -> bool {
        let m = self.order as i64;
        (-m..=m).all(|k| k == 0 || self.coeff(k) == Complex64::new(0.0, 0.0))
            && self.coeff(0).im == 0.0
    }

    /// Minimum of `sign·f`: grid search, then golden section around the best node.
    fn extremum(&self, sign: f64) -> f64 {
        let len = self.oversampled_len(self.order);
        let values = self.real_samples(len);
        let (j, best) =
            values
                .iter()
                .map(|v| sign * v)
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (j, v)| if v < acc.1 { (j, v) } else { acc },
                );
        let f = |t: f64| sign * self.eval(t).re;
        let h = 2.0 * PI / len as f64;
        let (mut lo, mut hi) = (grid_angle(j, len) - h, grid_angle(j, len) + h);
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..80 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = f(x2);
            }
        }
        best.min(f1).min(f2)
    }

    /// `max_θ |f(θ) - c|`.
    pub fn sup_distance_to(&self, c: f64) -> f64 {
        (self.max_value() - c)
            .abs()
            .max((self.min_value() - c).abs())
    }

    /// Applies `g` pointwise to a positive function, result truncated to `out_order`.
    pub fn map_positive(&self, out_order: usize, g: impl Fn(f64) -> f64) -> Result<Self> {
        if self.is_constant() {
            let c = self.coeff(0).re;
            if !(c > POSITIVITY_MARGIN) {
                return Err(Error::NotPositive {
                    index: 0,
                    theta: 0.0,
                    value: c,
                });
            }
            return Ok(Self::constant_with_order(g(c), out_order));
        }
        let len = self.oversampled_len(out_order);
        let values = self.check_positive(len)?;
        let mapped: Vec<f64> = values.into_iter().map(g).collect();
        Ok(Self::from_samples(&mapped)?.with_order(out_order))
    }

    pub fn pointwise_power(&self, p: f64) -> Result<Self> {
        self.pointwise_power_with_order(p, self.order)
    }

    pub fn pointwise_power_with_order(&self, p: f64, out_order: usize) -> Result<Self> {
        self.map_positive(out_order, |v| v.powf(p))
    }

    /// Exact product of the two truncated series, truncated to `out_order`.
    pub fn mul(&self, other: &Self, out_order: usize) -> Self {
        let len = 2 * (self.order + other.order) + 1;
        let a = self.samples(len);
        let b = other.samples(len);
        let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Self::from_complex_samples(prod)
            .expect("odd grid")
            .with_order(out_order)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            order: self.order,
            coeffs: self.coeffs.iter().map(|z| z * c).collect(),
        }
    }

    /// `a + c·b`, at the larger of the two orders.
    pub fn add_scaled(&self, other: &Self, c: f64) -> Self {
        let order = self.order.max(other.order);
        let coeffs = (-(order as i64)..=order as i64)
            .map(|k| self.coeff(k) + other.coeff(k) * c)
            .collect();
        Self { order, coeffs }
    }

    /// Applies the multiplier `w(k)` to each coefficient.
    pub fn multiplier(&self, w: impl Fn(i64) -> Complex64) -> Self {
        let m = self.order as i64;
        let coeffs = (-m..=m).zip(&self.coeffs).map(|(k, c)| c * w(k)).collect();
        Self {
            order: self.order,
            coeffs,
        }
    }

    /// `ℋ e^{ikθ} = sgn(k) e^{ikθ}`, `ℋ 1 = 0`.
    pub fn hilbert_transform(&self) -> Self {
        self.multiplier(|k| Complex64::new(k.signum() as f64, 0.0))
    }

    /// `D = -i d/dθ`, symbol `k`.
    pub fn derivative(&self) -> Self {
        self.multiplier(|k| Complex64::new(k as f64, 0.0))
    }

    /// Dirichlet-to-Neumann operator of the disk, symbol `|k|`.
    pub fn dirichlet_to_neumann(&self) -> Self {
        self.multiplier(|k| Complex64::new(k.abs() as f64, 0.0))
    }

    /// Trapezoid mean of `1/a`, refining the grid until it is converged: `1/a`
    /// is not band-limited, and the aliasing error is its Fourier coefficient
    /// at the grid size. The aliasing error decays geometrically, so a change
    /// that stops shrinking is rounding.
    pub fn mean_reciprocal(&self) -> Result<f64> {
        let mean_on = |len: usize| -> Result<f64> {
            let values = self.check_positive(len)?;
            Ok(values.iter().map(|v| v.recip()).sum::<f64>() / len as f64)
        };
        let mut len = 2 * self.oversampled_len(self.order) + 1;
        let mut mean = mean_on(len)?;
        let mut last_change = f64::INFINITY;
        loop {
            let finer_len = 2 * len + 1;
            let finer = mean_on(finer_len)?;
            let change = (finer - mean).abs();
            if change <= 4.0 * f64::EPSILON * finer
                || change > 0.5 * last_change
                || finer_len > MAX_GRID
            {
                return Ok(finer);
            }
            (len, mean, last_change) = (finer_len, finer, change);
        }
    }

    /// `|(1/2π)∫ a^{-1} dθ - 1|`.
    pub fn normalization_residual(&self) -> Result<f64> {
        Ok((self.mean_reciprocal()? - 1.0).abs())
    }

    /// Rescales `a` so that `(1/2π)∫ a^{-1} dθ = 1`.
    pub fn normalize(&self) -> Result<Self> {
        let mu = self.mean_reciprocal()?;
        Ok(self.scale(mu))
    }

    /// Conformal reparametrization `b = |ψ'|^{-1} a∘ψ`, which preserves the
    /// Steklov spectrum and the normalization.
    pub fn mobius_pullback(&self, map: &MobiusMap) -> Result<Self> {
        self.check_positive(self.oversampled_len(self.order))?;
        let scale = 1.0 / (1.0 - map.w.norm_sqr());
        let b = Self::from_grid_adaptive(self.order.max(16), 4096, 1e-15, |len| {
            let psi = map.unwrapped_angles(len);
            psi.iter()
                .enumerate()
                .map(|(j, &angle)| {
                    let z = Complex64::from_polar(1.0, grid_angle(j, len));
                    let jac_inv = (Complex64::new(1.0, 0.0) - map.w.conj() * z).norm_sqr() * scale;
                    jac_inv * self.eval(angle).re
                })
                .collect()
        })?;
        b.check_positive(b.oversampled_len(b.order))?;
        Ok(b)
    }
}

/// Orientation of a disk automorphism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Conformal,
    Anticonformal,
}

/// `Ψ_w(z) = (z - w)/(1 - w̄ z)`, optionally composed with conjugation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusMap {
    w: Complex64,
    orientation: Orientation,
}

impl MobiusMap {
    pub fn new(w: Complex64, orientation: Orientation) -> Result<Self> {
        if !(w.norm() < 1.0) {
            return Err(Error::MobiusOutsideDisk(w.norm()));
        }
        Ok(Self { w, orientation })
    }

    pub fn conformal(w: Complex64) -> Result<Self> {
        Self::new(w, Orientation::Conformal)
    }

    pub fn w(&self) -> Complex64 {
        self.w
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let image = (z - self.w) / (one - self.w.conj() * z);
        match self.orientation {
            Orientation::Conformal => image,
            Orientation::Anticonformal => image.conj(),
        }
    }

    /// Boundary angle `ψ(θ)` with `e^{iψ} = Ψ(e^{iθ})`, principal branch.
    pub fn angle(&self, theta: f64) -> f64 {
        self.apply(Complex64::from_polar(1.0, theta)).arg()
    }

    /// `ψ` on the uniform grid, unwrapped continuously from `θ = 0`.
    pub fn unwrapped_angles(&self, len: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(len);
        let mut prev = self.angle(0.0);
        out.push(prev);
        for j in 1..len {
            let raw = self.angle(grid_angle(j, len));
            let mut next = raw;
            while next - prev > PI {
                next -= 2.0 * PI;
            }
            while next - prev < -PI {
                next += 2.0 * PI;
            }
            out.push(next);
            prev = next;
        }
        out
    }

    /// `|dψ/dθ| = (1 - |w|²)/|1 - w̄ e^{iθ}|²`.
    pub fn jacobian(&self, theta: f64) -> f64 {
        let z = Complex64::from_polar(1.0, theta);
        (1.0 - self.w.norm_sqr()) / (Complex64::new(1.0, 0.0) - self.w.conj() * z).norm_sqr()
    }
}

/// `α_τ(θ) = (1 - 2τ cos((2r+1)θ))^{-1}` from its closed-form Fourier series.
///
/// With `ρ = 2τ/(1 + √(1-4τ²))` the coefficient at `j(2r+1)` is
/// `ρ^{|j|}/√(1-4τ²)`; the mean of `α_τ^{-1}` is exactly one.
pub fn make_alpha_tau(r: u64, tau: f64) -> Result<FourierFunction> {
    alpha_mode(2 * r + 1, tau)
}

/// `(1 - 2τ cos(kθ))^{-1}` for an arbitrary mode `k ≥ 1`.
pub fn alpha_mode(mode: u64, tau: f64) -> Result<FourierFunction> {
    if !(tau.abs() < 0.5) {
        return Err(Error::TauOutOfRange(tau));
    }
    if mode == 0 {
        return Err(Error::InvalidArgument("mode must be positive".into()));
    }
    let k = mode as usize;
    let min_order = 4 * k;
    if tau == 0.0 {
        return Ok(FourierFunction::constant_with_order(1.0, min_order));
    }
    let root = (1.0 - 4.0 * tau * tau).sqrt();
    let rho = 2.0 * tau / (1.0 + root);
    let terms = (1e-18f64.ln() / rho.abs().ln()).ceil().max(1.0) as usize;
    let order = min_order.max(k * terms);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * order + 1];
    let mut power = 1.0 / root;
    for j in 0..=order / k {
        let c = Complex64::new(power, 0.0);
        coeffs[order + j * k] = c;
        coeffs[order - j * k] = c;
        power *= rho;
    }
    FourierFunction::new(order, coeffs)
}
