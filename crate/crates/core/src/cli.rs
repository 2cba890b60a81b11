//! Command-line front end.
//!
//! `run(argv)` parses, dispatches and writes the result to `--output` (or
//! stdout). Exit codes: 0 success, 1 numerical or validation failure,
//! 2 usage error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::json;

use crate::acceptance;
use crate::bargmann::{gram_matrix, orthonormalize, reproducing_kernel, BasisSpec, GramData, HoloState, KernelRep};
use crate::cylinder::{periodic_grid, CalibratedHeatKernel, CylinderBasis, HeatKernelParams};
use crate::error::{Error, Result};
use crate::geometry::FlatChart;
use crate::io::{
    complex_cell, complex_pair, fmt_f64, grid_csv, matrix_csv, matrix_json, read_state, write_atomic, Format,
    RunConfig,
};
use crate::operators::{adjointness_residual, hamiltonian_free, ladder_lower, ladder_raise};
use crate::propagator::{evolve_exact, evolve_trajectory, greens_table, PropagatorConfig};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Parser)]
#[command(name = "holoquant", version, about = "Holomorphic quantization on the cylinder and flat charts")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Basis truncation N (labels -N..=N).
    #[arg(long, global = true)]
    pub truncation: Option<usize>,
    /// Gauss-Hermite nodes per real dimension.
    #[arg(long = "quad-order", global = true)]
    pub quad_order: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gram matrix of the cylinder basis.
    Gram {
        /// Use phi~_k = e^{ikz - k^2/2} instead of e^{ikz}.
        #[arg(long)]
        normalized: bool,
        /// Integrate instead of using the closed forms.
        #[arg(long = "by-quadrature")]
        by_quadrature: bool,
    },
    /// Gram-Schmidt coefficients in the order 0, 1, -1, 2, -2, ...
    Orthonormalize,
    /// Reproducing kernel on a grid of real points.
    Kernel {
        #[arg(long, default_value_t = 5)]
        points: usize,
    },
    /// Calibrated heat-kernel formula on a grid of real points.
    Heatkernel {
        #[arg(long, default_value_t = 5)]
        points: usize,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long = "x-nodes")]
        x_nodes: Option<usize>,
    },
    /// Ladder matrices and their adjointness residual.
    Ladder {
        #[arg(long, default_value_t = 2)]
        buffer: usize,
    },
    /// Winding and spectral Green functions on a theta grid.
    Greens {
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta0: f64,
        #[arg(long = "T-real", default_value_t = 1.0, allow_negative_numbers = true)]
        t_real: f64,
        #[arg(long = "T-imag", default_value_t = 0.0, allow_negative_numbers = true)]
        t_imag: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = crate::defaults::GREENS_MODES)]
        modes: usize,
        #[arg(long, default_value_t = crate::defaults::GREENS_WINDINGS)]
        windings: usize,
        #[arg(long, default_value_t = 64)]
        points: usize,
    },
    /// Iterated short-time evolution under the free Hamiltonian.
    Evolve {
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Initial state JSON `{"N": .., "coeffs": [[re, im], ..]}`; default (phi~_0 + phi~_1)/norm.
        #[arg(long)]
        initial: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Validate,
}

/// Parses `argv` (including the program name) and runs it.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    chart: FlatChart,
    custom_chart: bool,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(n) = common.truncation {
            cfg.truncation = n;
        }
        if let Some(q) = common.quad_order {
            cfg.quad_order = q;
        }
        if let Some(o) = &common.output {
            cfg.output = Some(o.clone());
        }
        if let Some(f) = common.format {
            cfg.format = f;
        }
        cfg.validate()?;
        let (chart, custom_chart) = match &cfg.chart {
            Some(desc) => {
                let chart = desc.build()?;
                if chart.dim() != 1 {
                    return Err(Error::InvalidInput("the cylinder basis needs a one-dimensional chart".into()));
                }
                let custom = desc != &FlatChart::cylinder().to_desc();
                (chart, custom)
            }
            None => (FlatChart::cylinder(), false),
        };
        Ok(Self {
            cfg,
            chart,
            custom_chart,
        })
    }

    fn rule(&self) -> Result<QuadratureRule> {
        QuadratureRule::for_chart(&self.chart, self.cfg.quad_order)
    }

    /// Closed forms hold for the unit cylinder only; other charts integrate.
    fn basis(&self, normalized: bool, by_quadrature: bool) -> Result<BasisSpec> {
        let cb = CylinderBasis::new(self.cfg.truncation);
        let b = if normalized { cb.normalized() } else { cb.raw()? };
        Ok(if by_quadrature || self.custom_chart {
            b.without_closed_form()
        } else {
            b
        })
    }

    fn gram(&self, basis: &BasisSpec) -> Result<GramData> {
        gram_matrix(basis, &self.chart, &self.rule()?)
    }

    fn kernel(&self) -> Result<(BasisSpec, KernelRep)> {
        let basis = self.basis(true, false)?;
        let gram = self.gram(&basis)?;
        let k = reproducing_kernel(&gram, &basis)?;
        Ok((basis, k))
    }

    fn emit(&self, csv: String, json: serde_json::Value) -> Result<()> {
        let body = match self.cfg.format {
            Format::Csv => csv,
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&json)?;
                s.push('\n');
                s
            }
        };
        match &self.cfg.output {
            Some(path) => write_atomic(path, body.as_bytes()),
            None => {
                print!("{body}");
                Ok(())
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let ctx = Ctx::new(&cli.common)?;
    let n = ctx.cfg.truncation;
    match &cli.command {
        Command::Gram {
            normalized,
            by_quadrature,
        } => {
            let basis = ctx.basis(*normalized, *by_quadrature)?;
            let gram = ctx.gram(&basis)?;
            let json = json!({
                "truncation": n,
                "normalized": normalized,
                "labels": basis.labels(),
                "matrix": matrix_json(gram.matrix()),
            });
            ctx.emit(matrix_csv(gram.matrix()), json)?;
        }
        Command::Orthonormalize => {
            let basis = ctx.basis(true, false)?;
            let gram = ctx.gram(&basis)?;
            let on = orthonormalize(&gram)?;
            let order: Vec<i64> = on.ordering().iter().map(|&i| basis.labels()[i]).collect();
            let json = json!({
                "truncation": n,
                "labels": basis.labels(),
                "processing_order": order,
                "coefficients": matrix_json(on.coeffs()),
                "orthonormality_defect": on.orthonormality_defect(&gram),
            });
            ctx.emit(matrix_csv(on.coeffs()), json)?;
        }
        Command::Kernel { points } => {
            let (_, k) = ctx.kernel()?;
            let grid = periodic_grid(*points);
            let m = DMatrix::from_fn(grid.len(), grid.len(), |i, j| {
                k.eval(&[Complex64::from(grid[i])], &[Complex64::from(grid[j])])
            });
            let json = json!({"truncation": n, "z": grid, "w": grid, "values": matrix_json(&m)});
            ctx.emit(grid_csv(&grid, &grid, &m), json)?;
        }
        Command::Heatkernel {
            points,
            t,
            modes,
            x_nodes,
        } => {
            let mut params: HeatKernelParams = ctx.cfg.heat;
            if let Some(t) = t {
                params.t = *t;
            }
            if let Some(m) = modes {
                params.modes = *m;
            }
            if let Some(x) = x_nodes {
                params.x_nodes = *x;
            }
            let (_, k) = ctx.kernel()?;
            let cal = CalibratedHeatKernel::calibrate(params, &k)?;
            let grid = periodic_grid(*points);
            let mut m = DMatrix::zeros(grid.len(), grid.len());
            for (i, &z) in grid.iter().enumerate() {
                for (j, &w) in grid.iter().enumerate() {
                    m[(i, j)] = cal.eval(Complex64::from(z), Complex64::from(w))?;
                }
            }
            let json = json!({
                "params": params,
                "calibration": complex_pair(cal.scale()),
                "z": grid,
                "w": grid,
                "values": matrix_json(&m),
            });
            ctx.emit(grid_csv(&grid, &grid, &m), json)?;
        }
        Command::Ladder { buffer } => {
            let basis = ctx.basis(true, false)?;
            let gram = ctx.gram(&basis)?;
            let lower = ladder_lower(n);
            let raise = ladder_raise(&gram, n)?;
            let on = orthonormalize(&gram)?;
            let adj = adjointness_residual(&raise, &lower, &on, &gram, *buffer)?;
            let mut csv = String::from("matrix,row,col,value\n");
            for (name, m) in [("lower", lower.entries()), ("raise", raise.entries())] {
                for (i, l) in basis.labels().iter().enumerate() {
                    for (j, k) in basis.labels().iter().enumerate() {
                        csv.push_str(&format!("{name},{l},{k},{}\n", complex_cell(m[(i, j)])));
                    }
                }
            }
            csv.push_str(&format!("residual_central,,,{}\n", fmt_f64(adj.central)));
            csv.push_str(&format!("residual_full,,,{}\n", fmt_f64(adj.full)));
            let json = json!({
                "truncation": n,
                "labels": basis.labels(),
                "lower": matrix_json(lower.entries()),
                "raise": matrix_json(raise.entries()),
                "buffer": buffer,
                "central_block": adj.block,
                "residual_central": adj.central,
                "residual_full": adj.full,
            });
            ctx.emit(csv, json)?;
        }
        Command::Greens {
            theta0,
            t_real,
            t_imag,
            epsilon,
            modes,
            windings,
            points,
        } => {
            let eps = epsilon.unwrap_or(ctx.cfg.propagator.epsilon);
            if !(eps >= 0.0) {
                return Err(Error::InvalidInput("epsilon must be nonnegative".into()));
            }
            // T = T_real (1 - i eps) + i T_imag.
            let t = Complex64::new(*t_real, t_imag - t_real * eps);
            let rows = greens_table(*theta0, t, *modes, *windings, *points, crate::defaults::GREENS_TOLERANCE)?;
            let mut csv = String::from("theta,winding_re,winding_im,spectral_re,spectral_im,abs_difference\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt_f64(r.theta),
                    fmt_f64(r.winding.re),
                    fmt_f64(r.winding.im),
                    fmt_f64(r.spectral.re),
                    fmt_f64(r.spectral.im),
                    fmt_f64(r.difference)
                ));
            }
            let max = rows.iter().map(|r| r.difference).fold(0.0, f64::max);
            let json = json!({
                "T": complex_pair(t),
                "theta0": theta0,
                "modes": modes,
                "windings": windings,
                "max_abs_difference": max,
                "rows": rows.iter().map(|r| json!({
                    "theta": r.theta,
                    "winding": complex_pair(r.winding),
                    "spectral": complex_pair(r.spectral),
                    "abs_difference": r.difference,
                })).collect::<Vec<_>>(),
            });
            ctx.emit(csv, json)?;
        }
        Command::Evolve { t, steps, initial } => {
            let (basis, k) = ctx.kernel()?;
            let d = basis.len();
            let state = match initial {
                Some(p) => read_state(p)?,
                None => HoloState::basis_element(d, n)
                    .add(&HoloState::basis_element(d, n + 1))
                    .normalized(k.gram())?,
            };
            if state.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "initial state vs --truncation",
                    expected: d,
                    found: state.len(),
                });
            }
            let h = hamiltonian_free(n);
            let mut config = PropagatorConfig::new(
                h.clone(),
                t.unwrap_or(ctx.cfg.propagator.t),
                steps.unwrap_or(ctx.cfg.propagator.steps),
            );
            config.division_guard = ctx.cfg.propagator.division_guard;
            config.epsilon = ctx.cfg.propagator.epsilon;
            let traj = evolve_trajectory(&state, &config, &k, &ctx.chart, &ctx.rule()?)?;
            let dt = config.step_size();
            let mut csv = String::from("step,time,norm,exact_error");
            for l in basis.labels() {
                csv.push_str(&format!(",c[{l}]"));
            }
            csv.push('\n');
            let mut records = Vec::new();
            for (s, psi) in traj.iter().enumerate() {
                let time = dt * s as f64;
                let exact = evolve_exact(&state, &h, time)?;
                let err = psi.sub(&exact).norm_sq(k.gram()).max(0.0).sqrt();
                let norm = psi.norm_sq(k.gram()).max(0.0).sqrt();
                csv.push_str(&format!("{s},{},{},{}", fmt_f64(time), fmt_f64(norm), fmt_f64(err)));
                for c in psi.coeffs().iter() {
                    csv.push(',');
                    csv.push_str(&complex_cell(*c));
                }
                csv.push('\n');
                records.push(json!({
                    "step": s,
                    "time": time,
                    "norm": norm,
                    "exact_error": err,
                    "coeffs": psi.coeffs().iter().map(|c| complex_pair(*c)).collect::<Vec<_>>(),
                }));
            }
            let json = json!({"truncation": n, "t": config.t, "steps": config.n_steps, "trajectory": records});
            ctx.emit(csv, json)?;
        }
        Command::Validate => {
            let results = acceptance::run_all();
            let mut text = String::new();
            for r in &results {
                text.push_str(&format!("{r}\n"));
            }
            let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
            let json = json!({
                "criteria": results.iter().map(|r| json!({
                    "id": r.id, "name": r.name, "passed": r.passed, "detail": r.detail,
                })).collect::<Vec<_>>(),
                "failed": failed,
            });
            if ctx.cfg.output.is_some() {
                print!("{text}");
            }
            ctx.emit(text, json)?;
            if !failed.is_empty() {
                eprintln!("validation failed: criteria {failed:?}");
                return Ok(1);
            }
        }
    }
    Ok(0)
}
