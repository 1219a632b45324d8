//! The deformation flow `∂α/∂τ = -α·Λα + ℋα·Dα` toward the constant weight,
//! with the spectral monitors that are monotone along it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::FourierFunction;
use crate::linalg::{CMatrix, HermitianEigen, ScalarFunction};
use crate::operators::{commutator_defect_matrix, kernel_vector, lambda_matrix};
use crate::spectrum::{check_order, steklov_spectrum};
use crate::variation::VariationReport;
use crate::zeta::zeta_diff_from_spectrum;

/// Smallest accepted value of `α` after a step.
pub const POSITIVITY_FLOOR: f64 = 1e-6;
const MIN_STEP: f64 = 1e-10;
/// `tail ≤ TRACE_TAIL_TOL·|value| + TRACE_TAIL_ABS` for accepted traces.
pub const TRACE_TAIL_TOL: f64 = 1e-6;
const TRACE_TAIL_ABS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub tau: f64,
    pub alpha: FourierFunction,
    pub normalization_residual: f64,
    /// `(ζ_{α_τ} - 2ζ_R)''(0)`.
    pub zeta2_at_0: f64,
    pub sup_distance_to_one: f64,
    pub snd_der_trace: f64,
}

/// One line of the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub tau: f64,
    pub residual: f64,
    pub zeta2_at_0: f64,
    pub sup_dist: f64,
    pub snd_der_trace: f64,
}

impl From<&FlowState> for FlowRecord {
    fn from(s: &FlowState) -> Self {
        Self {
            tau: s.tau,
            residual: s.normalization_residual,
            zeta2_at_0: s.zeta2_at_0,
            sup_dist: s.sup_distance_to_one,
            snd_der_trace: s.snd_der_trace,
        }
    }
}

pub fn write_json_lines(states: &[FlowState], mut out: impl Write) -> Result<()> {
    for s in states {
        serde_json::to_writer(&mut out, &FlowRecord::from(s))?;
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Fourier order of the product grid; `α` keeps modes `|k| ≤ 2N/3`.
    pub order: usize,
    /// Galerkin truncation for the monitors.
    pub spectral_order: usize,
    pub dt: f64,
    /// Spacing in τ of the emitted states.
    pub sample_interval: f64,
}

fn active_band(n: usize) -> usize {
    (2 * n / 3).max(1)
}

/// `-α·Λα + ℋα·Dα` on the modes `|k| ≤ 2N/3`, products formed exactly and
/// truncated (the 2/3 rule).
pub fn flow_rhs(alpha: &FourierFunction, n: usize) -> Result<FourierFunction> {
    let band = active_band(n);
    let a = alpha.with_order(band);
    a.check_positive(2 * (2 * band) + 1)?;
    let transport = a.hilbert_transform().mul(&a.derivative(), band);
    Ok(a.mul(&a.dirichlet_to_neumann(), band)
        .scale(-1.0)
        .add_scaled(&transport, 1.0))
}

/// One classical RK4 step followed by re-normalization.
fn rk4_step(alpha: &FourierFunction, dt: f64, n: usize) -> Result<FourierFunction> {
    let k1 = flow_rhs(alpha, n)?;
    let k2 = flow_rhs(&alpha.add_scaled(&k1, 0.5 * dt), n)?;
    let k3 = flow_rhs(&alpha.add_scaled(&k2, 0.5 * dt), n)?;
    let k4 = flow_rhs(&alpha.add_scaled(&k3, dt), n)?;
    let incr = k1
        .add_scaled(&k2, 2.0)
        .add_scaled(&k3, 2.0)
        .add_scaled(&k4, 1.0);
    let next = alpha.add_scaled(&incr, dt / 6.0).with_order(active_band(n));
    if !(next.min_value() > POSITIVITY_FLOOR) {
        return Err(Error::NotPositive {
            index: 0,
            theta: f64::NAN,
            value: next.min_value(),
        });
    }
    next.normalize()
}

/// `Tr(ln(Λ_a+P_0)(Λ_a+P_0)^{-1}(Λ_a² - D_a²))` with its tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceValue {
    pub value: f64,
    /// Change against the trace at the larger truncation `check_order(N)`.
    pub tail: f64,
}

struct TraceOperators {
    eig: HermitianEigen,
    defect: CMatrix,
}

impl TraceOperators {
    fn new(a: &FourierFunction, n: usize) -> Result<Self> {
        let lambda = lambda_matrix(a, n)?;
        let kernel = kernel_vector(a, n)?;
        let shifted: CMatrix = &lambda + &kernel * kernel.adjoint();
        Ok(Self {
            eig: HermitianEigen::new(&shifted)?,
            defect: commutator_defect_matrix(a, n)?,
        })
    }

    fn trace(&self, f: ScalarFunction) -> Result<f64> {
        Ok(self.eig.trace_terms(f, &self.defect)?.iter().sum())
    }
}

/// `Tr(f(Λ_a+P_0)(Λ_a² - D_a²))` at `N`, with the change against `check_order(N)` as tail.
fn trace_with_tail(a: &FourierFunction, n: usize, f: ScalarFunction) -> Result<TraceValue> {
    let value = TraceOperators::new(a, n)?.trace(f)?;
    let refined = TraceOperators::new(a, check_order(n))?.trace(f)?;
    Ok(TraceValue {
        value,
        tail: (value - refined).abs(),
    })
}

pub fn snd_der_trace_with_tail(a: &FourierFunction, n: usize) -> Result<TraceValue> {
    trace_with_tail(
        a,
        n,
        ScalarFunction::PowerLog {
            power: -1.0,
            log_power: 1,
        },
    )
}

/// `Tr(ln(Λ_a+P_0)(Λ_a+P_0)^{-1}(Λ_a² - D_a²)) ≥ 0`, rejected if the tail is not negligible.
pub fn snd_der_trace(a: &FourierFunction, n: usize) -> Result<f64> {
    let t = snd_der_trace_with_tail(a, n)?;
    if t.tail > TRACE_TAIL_TOL * t.value.abs() + TRACE_TAIL_ABS {
        return Err(Error::TraceTail {
            value: t.value,
            tail: t.tail,
        });
    }
    Ok(t.value)
}

fn monitor(alpha: &FourierFunction, tau: f64, n: usize) -> Result<FlowState> {
    let spec = steklov_spectrum(alpha, n)?;
    Ok(FlowState {
        tau,
        alpha: alpha.clone(),
        normalization_residual: alpha.normalization_residual()?,
        zeta2_at_0: zeta_diff_from_spectrum(&spec, 0.0, 2)?.value,
        sup_distance_to_one: alpha.sup_distance_to(1.0),
        snd_der_trace: snd_der_trace(alpha, n)?,
    })
}

/// Integrates to `tau_end` and returns monitored states at `τ = 0`, every
/// `sample_interval`, and at the end.
pub fn flow_integrate_with(
    alpha0: &FourierFunction,
    tau_end: f64,
    config: &FlowConfig,
) -> Result<Vec<FlowState>> {
    if !(config.dt > 0.0 && tau_end >= 0.0 && config.sample_interval > 0.0) {
        return Err(Error::InvalidArgument(
            "dt, tau_end and sample interval must be positive".into(),
        ));
    }
    alpha0.normalization_residual()?;
    crate::operators::validate_weight(alpha0)?;
    let n = config.order;
    let mut alpha = alpha0.with_order(active_band(n));
    let mut tau = 0.0;
    let mut states = vec![monitor(&alpha, tau, config.spectral_order)?];
    let mut sample = 1u32;
    let mut dt = config.dt;
    while tau < tau_end - 1e-12 {
        // sample times as multiples, not sums, of the interval
        let target = (f64::from(sample) * config.sample_interval).min(tau_end);
        let step = dt.min(target - tau);
        match rk4_step(&alpha, step, n) {
            Ok(next) => {
                alpha = next;
                tau += step;
            }
            Err(Error::NotPositive { .. }) => {
                dt *= 0.5;
                log::debug!("positivity margin lost at tau = {tau}; dt -> {dt:e}");
                if dt < MIN_STEP {
                    return Err(Error::StepCollapse { tau, dt });
                }
                continue;
            }
            Err(e) => return Err(e),
        }
        if tau >= target - 1e-12 {
            tau = target;
            states.push(monitor(&alpha, tau, config.spectral_order)?);
            sample += 1;
        }
    }
    Ok(states)
}

/// [`flow_integrate_with`] using the same order for the flow and the monitors
/// and states every 0.1 in τ.
pub fn flow_integrate(
    alpha0: &FourierFunction,
    tau_end: f64,
    dt: f64,
    n: usize,
) -> Result<Vec<FlowState>> {
    flow_integrate_with(
        alpha0,
        tau_end,
        &FlowConfig {
            order: n,
            spectral_order: n,
            dt,
            sample_interval: 0.1,
        },
    )
}

/// Weight after a single RK4 step of signed size `h` (backward for `h < 0`).
pub fn flow_step(alpha: &FourierFunction, h: f64, n: usize) -> Result<FourierFunction> {
    rk4_step(&alpha.with_order(active_band(n)), h, n)
}

/// Compares the centered τ-difference of `(ζ_{α_τ} - 2ζ_R)(s)` along the flow
/// with `s·Tr((Λ+P_0)^{-s-1}(Λ² - D²))`.
pub fn trace_identity_check(a: &FourierFunction, s: f64, n: usize) -> Result<VariationReport> {
    const H: f64 = 1e-3;
    let flow_order = n.max(3 * a.bandwidth(1e-16 * a.mean()) / 2 + 1);
    let start = a.with_order(active_band(flow_order));
    let zeta_at = |h: f64| -> Result<f64> {
        let w = flow_step(&start, h, flow_order)?;
        Ok(zeta_diff_from_spectrum(&steklov_spectrum(&w, n)?, s, 0)?.value)
    };
    let centered = |h: f64| -> Result<f64> { Ok((zeta_at(h)? - zeta_at(-h)?) / (2.0 * h)) };
    let fd = (4.0 * centered(0.5 * H)? - centered(H)?) / 3.0;
    let trace = TraceOperators::new(&start, n)?.trace(ScalarFunction::Power(-s - 1.0))?;
    Ok(VariationReport::new(s * trace, fd, H))
}
