//! Steklov eigenvalues of a weight and their pairing with the disk spectrum.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::FourierFunction;
use crate::linalg::refined_eigenvalues;
use crate::operators::{lambda_matrix, truncation_warning};

/// Slack for the kernel eigenvalue and for Weinstock's bound.
pub const KERNEL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// `λ_0 ≤ λ_1 ≤ ...`, all `2N+1` Galerkin eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues `λ_1..λ_K` after the kernel confirmed as converged.
    pub trusted_count: usize,
    pub truncation_order: usize,
    /// `max |λ_k - ⌊(k+1)/2⌋|` over the last quarter of the trusted prefix.
    pub tail_residual: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// `λ_k(𝔻) = ⌊(k+1)/2⌋`.
pub fn disk_eigenvalue(k: usize) -> usize {
    (k + 1) / 2
}

/// Rounding unit of a Ritz-refined eigenvalue of a `dim × dim` Galerkin
/// matrix, `sqrt(dim)·ε·max(1, λ)`. Measured eigenvalue noise stays below 3
/// units and the noise of `λ_k(N) - λ_k(N')` below 6.
pub fn resolution(dim: usize, lambda: f64) -> f64 {
    (dim as f64).sqrt() * f64::EPSILON * lambda.abs().max(1.0)
}

/// Largest accepted `λ_k(N) - λ_k(N')` in the trusted prefix, in [`resolution`] units.
pub const TRUST_UNITS: f64 = 12.0;

fn tail_residual(eigenvalues: &[f64], trusted: usize) -> f64 {
    let start = trusted - trusted / 4;
    (start.max(1)..=trusted)
        .map(|k| (eigenvalues[k] - disk_eigenvalue(k) as f64).abs())
        .fold(0.0, f64::max)
}

impl SpectrumResult {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, truncation_order: usize) -> Result<Self> {
        eigenvalues.sort_by(f64::total_cmp);
        let low = eigenvalues.first().copied().unwrap_or(0.0);
        if low < -KERNEL_TOL {
            return Err(Error::NotPositiveSemidefinite(low));
        }
        // λ_0 is zero up to rounding; report it inside [0, tol]
        if let Some(first) = eigenvalues.first_mut() {
            *first = first.max(0.0);
        }
        let trusted_count = truncation_order.min(eigenvalues.len().saturating_sub(1));
        let tail_residual = tail_residual(&eigenvalues, trusted_count);
        Ok(Self {
            eigenvalues,
            trusted_count,
            truncation_order,
            tail_residual,
            diagnostics: Vec::new(),
        })
    }

    /// Shrinks the trusted prefix and recomputes the tail residual.
    pub fn set_trusted_count(&mut self, count: usize) {
        self.trusted_count = count.min(self.truncation_order);
        self.tail_residual = tail_residual(&self.eigenvalues, self.trusted_count);
    }

    /// Trusted eigenvalues `λ_1..λ_K`.
    pub fn trusted(&self) -> &[f64] {
        &self.eigenvalues[1..=self.trusted_count]
    }

    pub fn lambda(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    /// `d_k = λ_k - ⌊(k+1)/2⌋` for `k = 1..=K`.
    pub fn pair_differences(&self) -> Vec<f64> {
        (1..=self.trusted_count)
            .map(|k| self.eigenvalues[k] - disk_eigenvalue(k) as f64)
            .collect()
    }

    /// `1 - λ_1`; nonnegative by Weinstock's inequality.
    pub fn weinstock_gap(&self) -> f64 {
        1.0 - self.eigenvalues[1]
    }

    /// CSV with columns `k,lambda_k,disk_k,diff` over the trusted prefix.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "k,lambda_k,disk_k,diff")?;
        writeln!(
            out,
            "0,{:.17e},0,{:.17e}",
            self.eigenvalues[0], self.eigenvalues[0]
        )?;
        for k in 1..=self.trusted_count {
            let mu = disk_eigenvalue(k);
            writeln!(
                out,
                "{k},{:.17e},{mu},{:.17e}",
                self.eigenvalues[k],
                self.eigenvalues[k] - mu as f64
            )?;
        }
        Ok(())
    }
}

fn galerkin_eigenvalues(a: &FourierFunction, n: usize) -> Result<Vec<f64>> {
    refined_eigenvalues(&lambda_matrix(a, n)?, n + 1)
}

/// Order of the finer truncation used to confirm the trusted prefix.
pub fn check_order(n: usize) -> usize {
    n + (n / 4).max(8)
}

/// Galerkin spectrum at truncation `N`, with the trusted prefix confirmed
/// against truncation [`check_order`]`(N)`.
///
/// The truncation spaces are nested, so `λ_k(N) ≥ λ_k(N') ≥ λ_k(a)` and the
/// gap `λ_k(N) - λ_k(N')` bounds the error of `λ_k(N)` up to roundoff.
pub fn steklov_spectrum(a: &FourierFunction, n: usize) -> Result<SpectrumResult> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "truncation order must be positive".into(),
        ));
    }
    let coarse = galerkin_eigenvalues(a, n)?;
    let fine = galerkin_eigenvalues(a, check_order(n))?;
    let tol = |k: usize| TRUST_UNITS * resolution(coarse.len(), coarse[k]);
    let confirmed = (1..=n)
        .find(|&k| coarse[k] - fine[k] > tol(k))
        .map_or(n, |k| k - 1);
    let moved = (confirmed < n).then(|| tol(confirmed + 1));
    let mut result = SpectrumResult::from_eigenvalues(coarse, n)?;
    result.set_trusted_count(confirmed);
    result.diagnostics.extend(truncation_warning(a, n));
    if let Some(tol) = moved {
        result.diagnostics.push(format!(
            "trusted prefix {confirmed} < N = {n}: λ_{} moved by more than {tol:.1e} at N = {}",
            confirmed + 1,
            check_order(n)
        ));
    }
    Ok(result)
}

pub fn pair_differences(s: &SpectrumResult) -> Vec<f64> {
    s.pair_differences()
}

pub fn weinstock_gap(a: &FourierFunction, n: usize) -> Result<f64> {
    Ok(steklov_spectrum(a, n)?.weinstock_gap())
}
