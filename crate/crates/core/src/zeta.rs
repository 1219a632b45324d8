//! Riemann zeta and the paired spectral differences `(d/ds)^m (ζ_a - 2ζ_R)(s)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::FourierFunction;
use crate::spectrum::{disk_eigenvalue, resolution, steklov_spectrum, SpectrumResult};

/// Direct-sum cutoff; negative arguments use a shorter sum to limit cancellation
/// between `Σ n^{-x}` and `N^{1-x}/(x-1)`.
const EM_CUTOFF: u32 = 50;
const EM_CUTOFF_NEGATIVE: u32 = 6;
/// `B_2, B_4, ..., B_16`.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Accepted `tail_estimate / max(1, |value|)`.
pub const TAIL_TOL: f64 = 1e-6;
/// Weinstock gap below which a weight counts as a disk.
pub const CONFORMAL_TOL: f64 = 1e-6;

/// Second-order Taylor jet `(f, f', f'')`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Jet(f64, f64, f64);

impl Jet {
    fn constant(c: f64) -> Self {
        Jet(c, 0.0, 0.0)
    }

    fn linear(x: f64, shift: f64) -> Self {
        Jet(x + shift, 1.0, 0.0)
    }

    /// `b^{-x}` as a jet in `x`.
    fn neg_power(base: f64, x: f64) -> Self {
        let l = base.ln();
        let v = (-x * l).exp();
        Jet(v, -l * v, l * l * v)
    }

    fn recip(self) -> Self {
        let Jet(v, d1, d2) = self;
        let r = 1.0 / v;
        Jet(r, -d1 * r * r, (2.0 * d1 * d1 * r - d2) * r * r)
    }

    fn get(self, m: u32) -> f64 {
        match m {
            0 => self.0,
            1 => self.1,
            _ => self.2,
        }
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(self.0 + o.0, self.1 + o.1, self.2 + o.2)
    }
}

impl std::ops::Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet(
            self.0 * o.0,
            self.1 * o.0 + self.0 * o.1,
            self.2 * o.0 + 2.0 * self.1 * o.1 + self.0 * o.2,
        )
    }
}

impl std::ops::Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        Jet(self.0 * c, self.1 * c, self.2 * c)
    }
}

fn zeta_jet(x: f64) -> Jet {
    let cutoff = if x < 0.0 {
        EM_CUTOFF_NEGATIVE
    } else {
        EM_CUTOFF
    };
    let n = cutoff as f64;
    let mut acc = Jet::constant(0.0);
    for k in 1..cutoff {
        acc = acc + Jet::neg_power(k as f64, x);
    }
    let nx = Jet::neg_power(n, x);
    // N^{1-x}/(x-1)
    acc = acc + nx * n * Jet::linear(x, -1.0).recip();
    acc = acc + nx * 0.5;
    let mut poly = Jet::linear(x, 0.0);
    let mut factorial = 2.0;
    let mut npow = nx * (1.0 / n);
    for (j, b) in BERNOULLI.iter().enumerate() {
        acc = acc + poly * npow * (b / factorial);
        let i = 2 * j as u32 + 1;
        poly = poly * Jet::linear(x, i as f64) * Jet::linear(x, (i + 1) as f64);
        factorial *= ((i + 2) * (i + 3)) as f64;
        npow = npow * (1.0 / (n * n));
    }
    acc
}

/// `ζ_R^{(m)}(x)` for real `x ≠ 1`, `m ∈ {0, 1, 2}`.
pub fn riemann_zeta_deriv(x: f64, m: u32) -> Result<f64> {
    if m > 2 {
        return Err(Error::DerivativeOrder(m));
    }
    if x == 1.0 {
        return Err(Error::ZetaPole);
    }
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "zeta argument {x} is not finite"
        )));
    }
    Ok(zeta_jet(x).get(m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaEvaluation {
    pub s: f64,
    pub deriv_order: u32,
    pub value: f64,
    /// Number of paired terms summed.
    pub truncation_index: usize,
    /// Last index whose difference is above the eigenvalue noise floor.
    pub resolved_index: usize,
    /// Modelled size of everything beyond `resolved_index`.
    pub tail_estimate: f64,
}

/// `f(λ) - f(μ)` for `f(x) = x^{-s}(-ln x)^m`, cancellation-free when `λ ≈ μ`.
fn pair_term(lambda: f64, mu: f64, s: f64, m: u32) -> f64 {
    let lm = mu.ln();
    let delta = ((lambda - mu) / mu).ln_1p();
    let ll = lm + delta;
    let base = (-s * lm).exp();
    let scaled = (-s * delta).exp_m1() * (-ll).powi(m as i32);
    let logs = match m {
        0 => 0.0,
        1 => -delta,
        _ => delta * (ll + lm),
    };
    base * (scaled + logs)
}

/// `|f'(μ)|`, the sensitivity of a paired term to `λ - μ`.
fn sensitivity(mu: f64, s: f64, m: u32) -> f64 {
    let l = -mu.ln();
    let lead = -s * l.powi(m as i32);
    let sub = if m == 0 {
        0.0
    } else {
        -(m as f64) * l.powi(m as i32 - 1)
    };
    ((-s - 1.0) * mu.ln()).exp().abs() * (lead + sub).abs()
}

/// Consecutive sub-floor pairs that count as evidence of decay.
const SUBFLOOR_RUN: usize = 5;

/// Differences below this many [`resolution`] units are treated as noise.
const FLOOR_UNITS: f64 = 32.0;

/// Per-eigenvalue noise floor over the trusted prefix.
fn noise_floors(spec: &SpectrumResult) -> Vec<f64> {
    let dim = spec.eigenvalues.len();
    (1..=spec.trusted_count)
        .map(|k| FLOOR_UNITS * resolution(dim, spec.lambda(k)))
        .collect()
}

/// Least-squares slope of `ln q_j` against `j`.
fn decay_slope(points: &[(usize, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(j, q) in points {
        let dx = j as f64 - mx;
        sxy += dx * (q.ln() - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// First-order size of the pair `(λ_{2j-1}, λ_{2j})` around `μ = j`. A split
/// degenerate pair `j ∓ δ` cancels to first order and leaves `f''δ²`, bounded
/// through `|f''/f'| ≤ (|s| + 2)/j`.
fn pair_sizes(diffs: &[f64], s: f64) -> Vec<f64> {
    diffs
        .chunks(2)
        .enumerate()
        .map(|(i, pair)| {
            let first = pair.iter().sum::<f64>().abs();
            let second = pair.iter().map(|d| d * d).sum::<f64>() * (s.abs() + 2.0) / (i + 1) as f64;
            first + second
        })
        .collect()
}

/// Geometric extrapolation, in pairs, of everything beyond the last resolved pair.
fn tail_model(diffs: &[f64], floors: &[f64], s: f64, m: u32) -> f64 {
    if s == 0.0 && m == 0 {
        // every paired term is 1 - 1
        return 0.0;
    }
    if diffs.is_empty() {
        return f64::INFINITY;
    }
    let q = pair_sizes(diffs, s);
    let pair_floors: Vec<f64> = floors
        .chunks(2)
        .map(|f| f.iter().sum::<f64>() * 2.0 / f.len() as f64)
        .collect();
    let resolved = q
        .iter()
        .zip(&pair_floors)
        .rposition(|(x, f)| x > f)
        .map_or(0, |i| i + 1);
    let subfloor_run = q.len() - resolved >= SUBFLOOR_RUN;
    if resolved == 0 {
        return if subfloor_run { 0.0 } else { f64::INFINITY };
    }
    // still above the floor at the end of the trusted prefix: no slack for a guess
    let truncated = resolved == q.len();
    let window_start = resolved.saturating_sub(10).max(1);
    let points: Vec<(usize, f64)> = (window_start..=resolved)
        .filter(|&j| q[j - 1] > pair_floors[j - 1])
        .map(|j| (j, q[j - 1]))
        .collect();
    // a run of sub-floor pairs inside the trusted prefix is observed evidence:
    // the envelope is at most the floor right after `resolved` and reaches it
    // within SUBFLOOR_RUN pairs of the last resolved one, by at least a factor
    // 2 (a pair barely above the floor carries no rate)
    let next_floor = pair_floors
        .get(resolved)
        .copied()
        .unwrap_or(pair_floors[resolved - 1]);
    let run_slope = subfloor_run.then(|| {
        (next_floor / q[resolved - 1])
            .ln()
            .min(-std::f64::consts::LN_2)
            / SUBFLOOR_RUN as f64
    });
    let fitted = (points.len() >= 3).then(|| decay_slope(&points));
    let slope = match (fitted, run_slope) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) if truncated => return f64::INFINITY,
        (None, None) => -std::f64::consts::LN_2,
    };
    if slope >= -1e-3 {
        return f64::INFINITY;
    }
    let ratio = slope.exp();
    // size of the envelope at `resolved`
    let anchor = if subfloor_run {
        next_floor / ratio
    } else {
        points
            .iter()
            .map(|&(j, x)| x * (slope * (resolved as f64 - j as f64)).exp())
            .fold(pair_floors[resolved - 1], f64::max)
    };
    let mut tail = 0.0;
    let mut size = anchor;
    let mut j = resolved + 1;
    loop {
        size *= ratio;
        let term = size * sensitivity(j as f64, s, m);
        tail += term;
        if (term < 1e-300 || term < 1e-18 * tail) && j > resolved + 10 {
            break;
        }
        if j > resolved + 10_000_000 {
            return f64::INFINITY;
        }
        j += 1;
    }
    tail
}

fn check_order(m: u32) -> Result<()> {
    if m > 2 {
        Err(Error::DerivativeOrder(m))
    } else {
        Ok(())
    }
}

/// Evaluate the paired sum on precomputed eigenvalues, without tail rejection.
pub fn zeta_diff_unchecked(spec: &SpectrumResult, s: f64, m: u32) -> Result<ZetaEvaluation> {
    check_order(m)?;
    if !s.is_finite() {
        return Err(Error::InvalidArgument(format!("s = {s} is not finite")));
    }
    let diffs = spec.pair_differences();
    let floors = noise_floors(spec);
    let resolved = diffs
        .iter()
        .zip(&floors)
        .rposition(|(d, f)| d.abs() > *f)
        .map_or(0, |i| i + 1);
    let value: f64 = (1..=resolved)
        .map(|k| {
            let mu = disk_eigenvalue(k) as f64;
            let d = diffs[k - 1];
            if d.abs() > floors[k - 1] {
                pair_term(mu + d, mu, s, m)
            } else {
                0.0
            }
        })
        .sum();
    Ok(ZetaEvaluation {
        s,
        deriv_order: m,
        value,
        truncation_index: spec.trusted_count,
        resolved_index: resolved,
        tail_estimate: tail_model(&diffs, &floors, s, m),
    })
}

/// Like [`zeta_diff_unchecked`], rejecting evaluations whose tail is not negligible.
pub fn zeta_diff_from_spectrum(spec: &SpectrumResult, s: f64, m: u32) -> Result<ZetaEvaluation> {
    let eval = zeta_diff_unchecked(spec, s, m)?;
    if !(eval.tail_estimate <= TAIL_TOL * eval.value.abs().max(1.0)) {
        return Err(Error::TailTooLarge {
            s,
            value: eval.value,
            tail: eval.tail_estimate,
            trunc: spec.truncation_order,
        });
    }
    Ok(eval)
}

pub fn zeta_diff_deriv(a: &FourierFunction, s: f64, m: u32, n: usize) -> Result<ZetaEvaluation> {
    check_order(m)?;
    zeta_diff_from_spectrum(&steklov_spectrum(a, n)?, s, m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub s: f64,
    pub diff: f64,
    pub diff1: f64,
    pub diff2: f64,
    /// Largest tail estimate among the three columns.
    pub tail: f64,
}

/// Rows in grid order; computed in parallel, collected by index.
pub fn convexity_scan_spectrum(spec: &SpectrumResult, s_grid: &[f64]) -> Result<Vec<ScanRow>> {
    s_grid
        .par_iter()
        .map(|&s| {
            let e: Vec<ZetaEvaluation> = (0..3)
                .map(|m| zeta_diff_from_spectrum(spec, s, m))
                .collect::<Result<_>>()?;
            Ok(ScanRow {
                s,
                diff: e[0].value,
                diff1: e[1].value,
                diff2: e[2].value,
                tail: e.iter().map(|x| x.tail_estimate).fold(0.0, f64::max),
            })
        })
        .collect()
}

pub fn convexity_scan(a: &FourierFunction, s_grid: &[f64], n: usize) -> Result<Vec<ScanRow>> {
    convexity_scan_spectrum(&steklov_spectrum(a, n)?, s_grid)
}

pub fn write_scan_csv(rows: &[ScanRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "s,diff,diff1,diff2,tail")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.3e}",
            r.s, r.diff, r.diff1, r.diff2, r.tail
        )?;
    }
    Ok(())
}

/// `g(s) = ζ_R(s-1) + s ζ_R'(s-1)`.
pub fn s0_function(s: f64) -> Result<f64> {
    Ok(riemann_zeta_deriv(s - 1.0, 0)? + s * riemann_zeta_deriv(s - 1.0, 1)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S0Root {
    pub s0: f64,
    pub residual: f64,
}

pub fn s0_root() -> Result<S0Root> {
    let (mut lo, mut hi) = (2.5, 4.0);
    let (g_lo, g_hi) = (s0_function(lo)?, s0_function(hi)?);
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(Error::BracketFailure { lo, hi, g_lo, g_hi });
    }
    while hi - lo > 4.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if s0_function(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s0 = 0.5 * (lo + hi);
    let residual = s0_function(s0)?.abs();
    if residual >= 1e-10 {
        return Err(Error::BracketFailure {
            lo,
            hi,
            g_lo: s0_function(lo)?,
            g_hi: s0_function(hi)?,
        });
    }
    Ok(S0Root { s0, residual })
}

const S_A_STEP: f64 = 0.25;
const S_A_WINDOW: f64 = 10.0;
const S_A_MAX: f64 = 100.0;

/// Smallest grid point `s ≥ 0` with `diff''` positive on `[s, s + 10]`.
pub fn estimate_s_a_spectrum(spec: &SpectrumResult) -> Result<f64> {
    let gap = spec.weinstock_gap();
    if gap < CONFORMAL_TOL {
        return Err(Error::ConformallyTrivial(gap));
    }
    let steps = ((S_A_MAX + S_A_WINDOW) / S_A_STEP).round() as usize;
    let window = (S_A_WINDOW / S_A_STEP).round() as usize;
    let positive: Vec<bool> = (0..=steps)
        .into_par_iter()
        .map(|i| Ok(zeta_diff_unchecked(spec, i as f64 * S_A_STEP, 2)?.value > 0.0))
        .collect::<Result<_>>()?;
    (0..=steps - window)
        .find(|&i| positive[i..=i + window].iter().all(|&b| b))
        .map(|i| i as f64 * S_A_STEP)
        .ok_or(Error::ThresholdNotFound(S_A_MAX))
}

pub fn estimate_s_a(a: &FourierFunction, n: usize) -> Result<f64> {
    estimate_s_a_spectrum(&steklov_spectrum(a, n)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::make_alpha_tau;
    use std::f64::consts::PI;

    #[test]
    fn zeta_special_values() {
        assert!((riemann_zeta_deriv(2.0, 0).unwrap() - PI * PI / 6.0).abs() < 1e-13);
        assert!((riemann_zeta_deriv(0.0, 0).unwrap() + 0.5).abs() < 1e-13);
        assert!((riemann_zeta_deriv(4.0, 0).unwrap() - PI.powi(4) / 90.0).abs() < 1e-13);
        assert!((riemann_zeta_deriv(-1.0, 0).unwrap() + 1.0 / 12.0).abs() < 1e-12);
        assert!(riemann_zeta_deriv(-2.0, 0).unwrap().abs() < 1e-13);
        assert!((riemann_zeta_deriv(-2.5, 1).unwrap() + 0.006_265_736_372_189_758).abs() < 1e-13);
        // ζ'(0) = -ln(2π)/2
        assert!((riemann_zeta_deriv(0.0, 1).unwrap() + (2.0 * PI).ln() / 2.0).abs() < 1e-12);
        assert!((riemann_zeta_deriv(3.0, 1).unwrap() + 0.198_126_242_885_636_8).abs() < 1e-12);
        assert!((riemann_zeta_deriv(2.0, 1).unwrap() + 0.937_548_254_315_843_8).abs() < 1e-12);
        assert!(matches!(riemann_zeta_deriv(1.0, 0), Err(Error::ZetaPole)));
        assert!(matches!(
            riemann_zeta_deriv(2.0, 3),
            Err(Error::DerivativeOrder(3))
        ));
    }

    #[test]
    fn jet_matches_finite_differences() {
        for &x in &[-2.5, 0.3, 1.7, 2.5, 6.0] {
            let h = 1e-3;
            let f = |y: f64| riemann_zeta_deriv(y, 0).unwrap();
            let (p1, m1, p2, m2) = (f(x + h), f(x - h), f(x + 2.0 * h), f(x - 2.0 * h));
            let d1 = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            let d2 = (16.0 * (p1 + m1) - (p2 + m2) - 30.0 * f(x)) / (12.0 * h * h);
            let j1 = riemann_zeta_deriv(x, 1).unwrap();
            let j2 = riemann_zeta_deriv(x, 2).unwrap();
            assert!((d1 - j1).abs() < 1e-8 * j1.abs().max(1.0), "{x}: {d1} {j1}");
            assert!((d2 - j2).abs() < 1e-5 * j2.abs().max(1.0), "{x}: {d2} {j2}");
        }
    }

    #[test]
    fn pair_term_matches_direct() {
        for &(l, mu, s) in &[(0.9, 1.0, 2.0), (2.1, 2.0, -3.0), (3.0 - 1e-3, 3.0, 0.7)] {
            for m in 0..3 {
                let f = |x: f64| x.powf(-s) * (-x.ln()).powi(m as i32);
                let direct = f(l) - f(mu);
                assert!((pair_term(l, mu, s, m) - direct).abs() < 1e-12 * direct.abs().max(1.0));
            }
        }
    }

    #[test]
    fn disk_is_zero() {
        let spec = steklov_spectrum(&FourierFunction::constant(1.0), 32).unwrap();
        for &s in &[-3.0, 0.0, 1.0, 2.5] {
            for m in 0..3 {
                let e = zeta_diff_from_spectrum(&spec, s, m).unwrap();
                assert_eq!(e.value, 0.0);
                assert_eq!(e.tail_estimate, 0.0);
            }
        }
    }

    #[test]
    fn alpha_tau_values() {
        let a = make_alpha_tau(1, 0.1).unwrap();
        let spec = steklov_spectrum(&a, 96).unwrap();
        for &s in &[-2.0, 0.0, 1.5, 3.0] {
            let e = zeta_diff_from_spectrum(&spec, s, 0).unwrap();
            assert!(e.value >= -1e-8, "s = {s}: {}", e.value);
        }
        assert!(zeta_diff_from_spectrum(&spec, 0.0, 0).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn derivative_columns_match_finite_differences() {
        let spec = steklov_spectrum(&make_alpha_tau(1, 0.15).unwrap(), 96).unwrap();
        let h = 1e-3;
        for &s in &[-1.5, 0.5, 2.0] {
            let f = |x: f64| zeta_diff_from_spectrum(&spec, x, 0).unwrap().value;
            let d1 = zeta_diff_from_spectrum(&spec, s, 1).unwrap().value;
            let d2 = zeta_diff_from_spectrum(&spec, s, 2).unwrap().value;
            let fd1 = (f(s + h) - f(s - h)) / (2.0 * h);
            let fd2 = (f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h);
            assert!((fd1 - d1).abs() < 1e-5 * d1.abs().max(1e-3), "{fd1} {d1}");
            assert!((fd2 - d2).abs() < 1e-5 * d2.abs().max(1e-2), "{fd2} {d2}");
        }
    }

    #[test]
    fn undersized_truncation_is_rejected() {
        let spec = steklov_spectrum(&make_alpha_tau(4, 0.3).unwrap(), 16).unwrap();
        let err = zeta_diff_from_spectrum(&spec, -4.0, 2).unwrap_err();
        assert!(matches!(err, Error::TailTooLarge { .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn s0_bracket() {
        assert!(s0_function(3.0).unwrap() < 0.0);
        assert!(s0_function(4.0).unwrap() > 0.0);
        let root = s0_root().unwrap();
        assert!(root.s0 > 3.0 && root.s0 < 4.0);
        assert!(root.residual < 1e-10);
    }

    #[test]
    fn s_a_threshold() {
        let a = make_alpha_tau(1, 0.2).unwrap();
        let spec = steklov_spectrum(&a, 64).unwrap();
        let s_a = estimate_s_a_spectrum(&spec).unwrap();
        assert!(s_a.is_finite());
        let mut s = s_a;
        while s <= s_a + 10.0 {
            assert!(zeta_diff_unchecked(&spec, s, 2).unwrap().value > 0.0);
            s += 0.25;
        }
        let disk = steklov_spectrum(&FourierFunction::constant(1.0), 32).unwrap();
        assert!(matches!(
            estimate_s_a_spectrum(&disk),
            Err(Error::ConformallyTrivial(_))
        ));
    }
}
