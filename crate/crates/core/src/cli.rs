//! Batch command-line front end. Every command writes one report, either a
//! JSON document `{version, config_echo, results, diagnostics}` or CSV.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{flow_integrate_with, FlowConfig, FlowRecord};
use crate::fourier::{make_alpha_tau, FourierFunction, MobiusMap, Orientation};
use crate::spectrum::steklov_spectrum;
use crate::variation::{
    cosine_mode, counterexample_search, second_variation_report, DeformationFamily,
};
use crate::zeta::{convexity_scan_spectrum, s0_root, write_scan_csv, zeta_diff_from_spectrum};

const WEIGHT_HELP: &str = "\
Weight specifications (--weight):
  constant                   the disk weight a = 1
  alpha-tau:R,TAU            normalized 1/(1 - 2 TAU cos((2R+1)θ)), |TAU| < 1/2
  file:PATH                  JSON {\"grid_order\": M, \"coeffs\": [[re, im], ...]}, k = -M..M
  mobius:RE,IM[,anti]:BASE   pullback of the weight BASE by the disk automorphism
                             z -> (z - w)/(1 - conj(w) z), w = RE + i IM, optionally
                             composed with conjugation

CSV headers:
  spectrum        k,lambda_k,disk_k,diff
  zeta            s,deriv_order,value,truncation_index,resolved_index,tail_estimate
  scan            s,diff,diff1,diff2,tail
  variation       closed_form,finite_difference,tau_step,relative_error
  counterexample  s,tau,truncation,r_found,diff2_value,spectral_diff1,predicted_diff1,diff1_at_zero
  flow            tau,residual,zeta2_at_0,sup_dist,snd_der_trace
  s0              s0,residual

Exit codes: 0 success, 2 invalid input, 3 numerical rejection.";

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "steklov", version, about, after_long_help = WEIGHT_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Report format.
    #[arg(long, value_enum, default_value_t = OutFormat::Json, global = true)]
    pub out: OutFormat,
    /// Report file; standard output when absent.
    #[arg(long, global = true)]
    pub out_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutFormat {
    Csv,
    Json,
    /// One JSON object per row (flow trajectory log).
    Jsonl,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WeightArgs {
    /// Weight specification, see --help.
    #[arg(long, default_value = "constant")]
    pub weight: String,
    /// Galerkin truncation N (matrices of size 2N+1).
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(16..=2048))]
    pub trunc: u64,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Steklov spectrum with paired differences against the disk.
    Spectrum(WeightArgs),
    /// `(ζ_a - 2ζ_R)^{(m)}(s)`.
    Zeta {
        #[command(flatten)]
        weight: WeightArgs,
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        /// Derivative order 0, 1 or 2.
        #[arg(long, default_value_t = 0)]
        deriv: u32,
    },
    /// Convexity table of `ζ_a - 2ζ_R` on a grid.
    Scan {
        #[command(flatten)]
        weight: WeightArgs,
        /// START:STOP:STEP, inclusive.
        #[arg(long, default_value = "-4:4:0.25", allow_hyphen_values = true)]
        grid: String,
    },
    /// Closed-form second variation at the disk against spectral finite differences.
    Variation {
        /// Deformation direction as K[:C],K[:C],... meaning Σ C·2cos(Kθ).
        #[arg(long, default_value = "3")]
        beta: String,
        /// Real evaluation point of the second variation of ζ.
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
        #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(16..=2048))]
        trunc: u64,
        #[arg(long, default_value_t = crate::variation::TAU_STEP)]
        step: f64,
    },
    /// Non-convexity witness on (0, 2).
    Counterexample {
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 200)]
        r_max: u64,
        #[arg(long, default_value_t = 0.01)]
        tau: f64,
        #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(16..=2048))]
        trunc: u64,
    },
    /// Integrate the deformation flow and log the monitors.
    Flow {
        #[command(flatten)]
        weight: WeightArgs,
        #[arg(long, default_value_t = 10.0)]
        tau_end: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Spacing in τ of the logged states.
        #[arg(long, default_value_t = 0.1)]
        sample: f64,
        /// Fourier order of the flow grid; defaults to --trunc.
        #[arg(long)]
        flow_order: Option<u64>,
    },
    /// Root of `ζ_R(s-1) + s ζ_R'(s-1)` in (3, 4).
    S0,
}

/// Parses the weight mini-language.
pub fn parse_weight(spec: &str) -> Result<FourierFunction> {
    let bad = || Error::InvalidArgument(format!("malformed weight specification {spec:?}"));
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match head {
        "constant" if rest.is_empty() => Ok(FourierFunction::constant(1.0)),
        "alpha-tau" => {
            let (r, tau) = rest.split_once(',').ok_or_else(bad)?;
            make_alpha_tau(
                r.trim().parse().map_err(|_| bad())?,
                tau.trim().parse().map_err(|_| bad())?,
            )
        }
        "file" if !rest.is_empty() => {
            let text = std::fs::read_to_string(rest)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidArgument(format!("weight file {rest}: {e}")))
        }
        "mobius" => {
            let (params, base) = rest.split_once(':').ok_or_else(bad)?;
            let fields: Vec<&str> = params.split(',').map(str::trim).collect();
            let orientation = match fields.get(2) {
                None => Orientation::Conformal,
                Some(&"anti") => Orientation::Anticonformal,
                Some(_) => return Err(bad()),
            };
            if !(2..=3).contains(&fields.len()) {
                return Err(bad());
            }
            let re: f64 = fields[0].parse().map_err(|_| bad())?;
            let im: f64 = fields[1].parse().map_err(|_| bad())?;
            parse_weight(base)?
                .mobius_pullback(&MobiusMap::new(Complex64::new(re, im), orientation)?)
        }
        _ => Err(bad()),
    }
}

/// Parses `START:STOP:STEP` into an inclusive grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad =
        || Error::InvalidArgument(format!("malformed grid {spec:?}, expected START:STOP:STEP"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && stop >= start && ((stop - start) / step) < 1e6) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

/// Parses `K[:C],...` into `Σ C·2cos(Kθ)`.
pub fn parse_beta(spec: &str) -> Result<FourierFunction> {
    let bad =
        || Error::InvalidArgument(format!("malformed direction {spec:?}, expected K[:C],..."));
    let mut beta = FourierFunction::constant_with_order(0.0, 1);
    for term in spec.split(',') {
        let (k, c) = term.split_once(':').unwrap_or((term, "1"));
        let k: usize = k.trim().parse().map_err(|_| bad())?;
        let c: f64 = c.trim().parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(Error::NonzeroMean(2.0 * c));
        }
        beta = beta.add_scaled(&cosine_mode(k), c);
    }
    Ok(beta)
}

/// Rendered outcome of one command.
pub struct Report {
    pub results: serde_json::Value,
    pub diagnostics: Vec<String>,
    pub csv: Vec<u8>,
    /// JSON lines, for commands that produce row sequences.
    pub jsonl: Option<Vec<u8>>,
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn single<T: Serialize>(value: &T, diagnostics: Vec<String>) -> Result<Report> {
    Ok(Report {
        results: serde_json::to_value(value)?,
        diagnostics,
        csv: csv_rows(std::slice::from_ref(value))?,
        jsonl: None,
    })
}

#[derive(Serialize)]
struct S0Row {
    s0: f64,
    residual: f64,
}

/// Runs the command and returns its report without writing it.
pub fn execute(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Spectrum(w) => {
            let spec = steklov_spectrum(&parse_weight(&w.weight)?, w.trunc as usize)?;
            let mut csv = Vec::new();
            spec.write_csv(&mut csv)?;
            Ok(Report {
                results: serde_json::to_value(&spec)?,
                diagnostics: spec.diagnostics.clone(),
                csv,
                jsonl: None,
            })
        }
        Command::Zeta { weight, s, deriv } => {
            let spec = steklov_spectrum(&parse_weight(&weight.weight)?, weight.trunc as usize)?;
            single(
                &zeta_diff_from_spectrum(&spec, *s, *deriv)?,
                spec.diagnostics.clone(),
            )
        }
        Command::Scan { weight, grid } => {
            let spec = steklov_spectrum(&parse_weight(&weight.weight)?, weight.trunc as usize)?;
            let rows = convexity_scan_spectrum(&spec, &parse_grid(grid)?)?;
            let mut csv = Vec::new();
            write_scan_csv(&rows, &mut csv)?;
            Ok(Report {
                results: serde_json::json!({
                    "truncation_order": spec.truncation_order,
                    "trusted_count": spec.trusted_count,
                    "rows": rows,
                }),
                diagnostics: spec.diagnostics.clone(),
                csv,
                jsonl: None,
            })
        }
        Command::Variation {
            beta,
            z,
            trunc,
            step,
        } => {
            let family = DeformationFamily::general(parse_beta(beta)?)?;
            single(
                &second_variation_report(&family, *z, *trunc as usize, *step)?,
                Vec::new(),
            )
        }
        Command::Counterexample {
            s,
            r_max,
            tau,
            trunc,
        } => single(
            &counterexample_search(*s, *r_max, *tau, *trunc as usize)?,
            Vec::new(),
        ),
        Command::Flow {
            weight,
            tau_end,
            dt,
            sample,
            flow_order,
        } => {
            let config = FlowConfig {
                order: flow_order.unwrap_or(weight.trunc) as usize,
                spectral_order: weight.trunc as usize,
                dt: *dt,
                sample_interval: *sample,
            };
            let states = flow_integrate_with(&parse_weight(&weight.weight)?, *tau_end, &config)?;
            let records: Vec<FlowRecord> = states.iter().map(FlowRecord::from).collect();
            let mut jsonl = Vec::new();
            crate::flow::write_json_lines(&states, &mut jsonl)?;
            Ok(Report {
                results: serde_json::to_value(&records)?,
                diagnostics: Vec::new(),
                csv: csv_rows(&records)?,
                jsonl: Some(jsonl),
            })
        }
        Command::S0 => {
            let root = s0_root()?;
            single(
                &S0Row {
                    s0: root.s0,
                    residual: root.residual,
                },
                Vec::new(),
            )
        }
    }
}

/// Serializes the report in the requested format.
pub fn render(cli: &Cli, report: &Report) -> Result<Vec<u8>> {
    match cli.out {
        OutFormat::Csv => Ok(report.csv.clone()),
        OutFormat::Jsonl => report.jsonl.clone().ok_or_else(|| {
            Error::InvalidArgument("jsonl output is only available for flow".into())
        }),
        OutFormat::Json => {
            let doc = serde_json::json!({
                "version": env!("CARGO_PKG_VERSION"),
                "config_echo": cli,
                "results": report.results,
                "diagnostics": report.diagnostics,
            });
            let mut bytes = serde_json::to_vec_pretty(&doc)?;
            bytes.push(b'\n');
            Ok(bytes)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let bytes = render(cli, &execute(cli)?)?;
    match &cli.out_path {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}

/// Process exit code for an outcome: 0, 2 for invalid input, 3 for numerical rejection.
pub fn exit_code(outcome: &Result<()>) -> i32 {
    match outcome {
        Ok(()) => 0,
        Err(e) if e.is_numerical() => 3,
        Err(_) => 2,
    }
}
