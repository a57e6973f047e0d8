//! Command-line interface emitting machine-readable JSON reports.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure (domain,
//! parameter or convergence problems; the report carries a structured
//! `error` object), 3 verification failure (`verify` only). Every path,
//! including errors, prints valid JSON unless `--csv` was requested.
//!
//! Reports are deterministic: grid evaluations are aggregated in node
//! order and quadrature uses pairwise sums, so identical invocations on an
//! identical build produce byte-identical output regardless of the worker
//! pool size (`--threads`, or the `THREADS` environment variable).

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{surface_data, surface_data_grid, SurfaceData};
use crate::calculus::{gaussian_area, QuadratureGrid, Rule, DEFAULT_TRUNCATE_RADIUS};
use crate::catalog;
use crate::error::{Error, Result};
use crate::expr;
use crate::geometry::ImmersionSpec;
use crate::identities::{run_suite, SuiteConfig};
use crate::jet::ParamPoint;
use crate::lagrangian::{maslov_index, LoopCurve, LoopSpec};
use crate::shrinker::{find_critical, Family, OptimizerConfig};

const SCHEMA: &str = "kahler-report/1";

#[derive(Parser, Debug)]
#[command(
    name = "kahler",
    about = "Kähler-angle geometry of parametric surfaces in C^2",
    disable_help_subcommand = true
)]
struct Cli {
    /// Worker pool size for grid evaluation (default: available
    /// parallelism; the THREADS environment variable overrides that).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct GridOpts {
    /// Evaluation grid, e.g. 32x32.
    #[arg(long)]
    grid: Option<String>,
    /// Quadrature rule for the u direction: auto, trapezoid or gauss.
    #[arg(long, default_value = "auto")]
    rule_u: String,
    /// Quadrature rule for the v direction: auto, trapezoid or gauss.
    #[arg(long, default_value = "auto")]
    rule_v: String,
    /// Truncation radius for unbounded parameter directions.
    #[arg(long, default_value_t = DEFAULT_TRUNCATE_RADIUS)]
    truncate_radius: f64,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Pointwise geometry table: angles, curvatures, shrinker residual.
    Analyze {
        #[arg(long)]
        surface: String,
        /// Single evaluation point "u,v" (constant expressions allowed).
        #[arg(long)]
        at: Option<String>,
        #[command(flatten)]
        grid: GridOpts,
        /// Emit CSV instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Run the pointwise identity suite over a grid.
    Verify {
        #[arg(long)]
        surface: String,
        #[command(flatten)]
        grid: GridOpts,
        /// Absolute residual tolerance for every identity.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Pinching parameter in [0, 1).
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
    },
    /// Winding number of the Maslov form around a loop.
    Maslov {
        #[arg(long)]
        surface: String,
        /// u-loop[:v0], v-loop[:u0], circle:cu,cv,r or expr:u(t);v(t).
        #[arg(long = "loop")]
        loop_spec: String,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Gaussian-weighted area of a closed surface.
    Area {
        #[arg(long)]
        surface: String,
        #[command(flatten)]
        grid: GridOpts,
    },
    /// Search a parametric family for a self-shrinker.
    Shrink {
        /// product, scaling or fourier:k.
        #[arg(long)]
        family: String,
        /// Initial parameters, e.g. 1.5,0.7.
        #[arg(long)]
        init: String,
        /// Convergence threshold on the parameter gradient norm.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[command(flatten)]
        grid: GridOpts,
    },
    /// Catalog information.
    Catalog {
        /// Only `list` is supported.
        action: String,
    },
    /// Validate a surface definition file.
    ParseCheck {
        #[arg(long)]
        file: String,
    },
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    schema: &'static str,
    command: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    surface: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<serde_json::Value>,
    payload: T,
}

fn error_report(argv: &[String], err: &Error) -> String {
    let rep = Report {
        schema: SCHEMA,
        command: argv.to_vec(),
        surface: None,
        grid: None,
        error: Some(json!({ "kind": err.kind(), "message": err.to_string() })),
        payload: serde_json::Value::Null,
    };
    serde_json::to_string_pretty(&rep).expect("error report serialises")
}

fn parse_grid_dims(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Param(format!("grid must look like 32x32, got '{s}'")))?;
    let nu = a.trim().parse::<usize>();
    let nv = b.trim().parse::<usize>();
    match (nu, nv) {
        (Ok(nu), Ok(nv)) if nu > 0 && nv > 0 => Ok((nu, nv)),
        _ => Err(Error::Param(format!("grid must look like 32x32, got '{s}'"))),
    }
}

fn parse_rule(s: &str) -> Result<Option<Rule>> {
    match s {
        "auto" => Ok(None),
        "trapezoid" => Ok(Some(Rule::PeriodicTrapezoid)),
        "gauss" => Ok(Some(Rule::GaussLegendre)),
        other => Err(Error::Param(format!(
            "rule must be auto, trapezoid or gauss, got '{other}'"
        ))),
    }
}

fn build_grid(spec: &ImmersionSpec, opts: &GridOpts, default_dims: &str) -> Result<QuadratureGrid> {
    let (nu, nv) = parse_grid_dims(opts.grid.as_deref().unwrap_or(default_dims))?;
    QuadratureGrid::for_domain(
        &spec.domain,
        nu,
        nv,
        parse_rule(&opts.rule_u)?,
        parse_rule(&opts.rule_v)?,
        opts.truncate_radius,
    )
}

/// Parse a comma-separated list of constant expressions, `pi/6,0.3`.
fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    expr::split_top_level(s)
        .into_iter()
        .map(|part| expr::const_eval(&expr::parse(part.trim())?))
        .collect()
}

fn parse_loop(arg: &str, spec: &ImmersionSpec, samples: usize) -> Result<LoopSpec> {
    let (kind, rest) = match arg.split_once(':') {
        Some((k, r)) => (k, Some(r)),
        None => (arg, None),
    };
    let curve = match kind {
        "u-loop" => {
            let v = match rest {
                Some(r) => parse_numbers(r)?
                    .first()
                    .copied()
                    .ok_or_else(|| Error::Param("u-loop:v0 needs a value".into()))?,
                None => match spec.domain {
                    crate::geometry::Domain::Rect { v, .. } => 0.5 * (v.0 + v.1),
                    _ => 0.0,
                },
            };
            LoopCurve::ULoop { v }
        }
        "v-loop" => {
            let u = match rest {
                Some(r) => parse_numbers(r)?
                    .first()
                    .copied()
                    .ok_or_else(|| Error::Param("v-loop:u0 needs a value".into()))?,
                None => match spec.domain {
                    crate::geometry::Domain::Rect { u, .. } => 0.5 * (u.0 + u.1),
                    _ => 0.0,
                },
            };
            LoopCurve::VLoop { u }
        }
        "circle" => {
            let p = parse_numbers(rest.unwrap_or(""))?;
            if p.len() != 3 {
                return Err(Error::Param("circle loop needs cu,cv,r".into()));
            }
            LoopCurve::Circle { center: ParamPoint::new(p[0], p[1]), radius: p[2] }
        }
        "expr" => {
            let body =
                rest.ok_or_else(|| Error::Param("expr loop needs u(t);v(t)".into()))?;
            let (ut, vt) = body
                .split_once(';')
                .ok_or_else(|| Error::Param("expr loop needs two expressions split by ';'".into()))?;
            LoopCurve::Exprs {
                u: expr::parse_with_vars(ut.trim(), "t", None)?,
                v: expr::parse_with_vars(vt.trim(), "t", None)?,
            }
        }
        other => {
            return Err(Error::Param(format!(
                "unknown loop '{other}'; use u-loop, v-loop, circle or expr"
            )))
        }
    };
    LoopSpec::new(curve, samples)
}

fn csv_cell_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn to_csv(rows: &[SurfaceData]) -> String {
    let mut out = String::from(
        "u,v,cos_theta,beta,eta_re,eta_im,eta_abs,norm_h_sq,mean3,mean4,mean_norm,shrinker_residual,dbar_jm_sq,gauss_k,adapted_frame\n",
    );
    for d in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            d.u,
            d.v,
            d.cos_theta,
            csv_cell_opt(d.beta),
            d.eta_re,
            d.eta_im,
            d.eta_abs,
            d.norm_h_sq,
            d.mean3,
            d.mean4,
            d.mean_norm,
            d.shrinker_residual,
            csv_cell_opt(d.dbar_jm_sq),
            d.gauss_k,
            d.adapted_frame
        ));
    }
    out
}

/// Run the CLI on an argument vector; returns `(exit_code, stdout_text)`.
pub fn run<I, S>(argv: I) -> (i32, String)
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let err = Error::Param(e.to_string());
            return (1, error_report(&argv, &err));
        }
        Err(e) => {
            // --help / --version render to stdout and succeed
            return (0, e.to_string());
        }
    };

    let threads = cli
        .threads
        .or_else(|| std::env::var("THREADS").ok().and_then(|s| s.parse().ok()));
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let err = Error::Param(format!("cannot build worker pool: {e}"));
            return (1, error_report(&argv, &err));
        }
    };

    pool.install(|| dispatch(&argv, cli.cmd))
}

fn dispatch(argv: &[String], cmd: Cmd) -> (i32, String) {
    match execute(argv, cmd) {
        Ok((code, text)) => (code, text),
        Err(err) => (2, error_report(argv, &err)),
    }
}

fn report<T: Serialize>(
    argv: &[String],
    surface: Option<String>,
    grid: Option<String>,
    error: Option<serde_json::Value>,
    payload: T,
) -> String {
    let rep = Report { schema: SCHEMA, command: argv.to_vec(), surface, grid, error, payload };
    serde_json::to_string_pretty(&rep).expect("report serialises")
}

fn execute(argv: &[String], cmd: Cmd) -> Result<(i32, String)> {
    match cmd {
        Cmd::Analyze { surface, at, grid, csv } => {
            let spec = catalog::surface_from_arg(&surface)?;
            let (rows, grid_desc) = match (&at, &grid.grid) {
                (Some(point), None) => {
                    let p = parse_numbers(point)?;
                    if p.len() != 2 {
                        return Err(Error::Param(format!(
                            "--at needs 'u,v', got '{point}'"
                        )));
                    }
                    (vec![surface_data(&spec, ParamPoint::new(p[0], p[1]))?], None)
                }
                (None, Some(_)) => {
                    let g = build_grid(&spec, &grid, "16x16")?;
                    (surface_data_grid(&spec, &g)?, Some(g.desc))
                }
                _ => {
                    return Err(Error::Param(
                        "analyze needs exactly one of --at or --grid".into(),
                    ))
                }
            };
            if csv {
                return Ok((0, to_csv(&rows)));
            }
            Ok((
                0,
                report(argv, Some(spec.name.clone()), grid_desc, None, json!({ "points": rows })),
            ))
        }
        Cmd::Verify { surface, grid, tol, lambda } => {
            let spec = catalog::surface_from_arg(&surface)?;
            let g = build_grid(&spec, &grid, "32x32")?;
            let rep = run_suite(&spec, &g, &SuiteConfig { tol, lambda });
            let code = if rep.all_pass() { 0 } else { 3 };
            let grid_desc = rep.grid.clone();
            Ok((
                code,
                report(argv, Some(spec.name.clone()), Some(grid_desc), None, rep),
            ))
        }
        Cmd::Maslov { surface, loop_spec, samples } => {
            let spec = catalog::surface_from_arg(&surface)?;
            let lp = parse_loop(&loop_spec, &spec, samples)?;
            let idx = maslov_index(&spec, &lp)?;
            Ok((
                0,
                report(
                    argv,
                    Some(spec.name.clone()),
                    None,
                    None,
                    json!({
                        "winding": idx.winding,
                        "raw": idx.raw,
                        "samples_used": idx.samples_used,
                    }),
                ),
            ))
        }
        Cmd::Area { surface, grid } => {
            let spec = catalog::surface_from_arg(&surface)?;
            let g = build_grid(&spec, &grid, "64x64")?;
            let area = gaussian_area(&spec, &g)?;
            let desc = g.desc.clone();
            Ok((
                0,
                report(
                    argv,
                    Some(spec.name.clone()),
                    Some(desc),
                    None,
                    json!({ "gaussian_area": area }),
                ),
            ))
        }
        Cmd::Shrink { family, init, tol, max_iter, grid } => {
            let fam = Family::from_arg(&family)?;
            let pi0 = parse_numbers(&init)?;
            let (nu, nv) = parse_grid_dims(grid.grid.as_deref().unwrap_or("16x16"))?;
            let config = OptimizerConfig {
                max_iter,
                grad_tol: tol,
                grid_nu: nu,
                grid_nv: nv,
                ..OptimizerConfig::default()
            };
            let result = find_critical(fam, &pi0, &config)?;
            if result.converged {
                Ok((0, report(argv, None, None, None, result)))
            } else {
                let err = json!({
                    "kind": "non_convergence",
                    "message": format!(
                        "gradient norm {} above tolerance {tol} after {} iterations",
                        result.grad_norm, result.iterations
                    ),
                });
                Ok((2, report(argv, None, None, Some(err), result)))
            }
        }
        Cmd::Catalog { action } => {
            if action != "list" {
                return Err(Error::Param(format!(
                    "unknown catalog action '{action}'; try `catalog list`"
                )));
            }
            let entries: Vec<_> = catalog::entries()
                .iter()
                .map(|e| {
                    json!({
                        "id": e.id,
                        "alias": e.alias,
                        "params": e.params,
                        "summary": e.summary,
                        "ground_truth": e.ground_truth.iter().map(|(claim, provenance)| {
                            json!({ "claim": claim, "provenance": provenance })
                        }).collect::<Vec<_>>(),
                    })
                })
                .collect();
            Ok((0, report(argv, None, None, None, json!({ "entries": entries }))))
        }
        Cmd::ParseCheck { file } => {
            let text = std::fs::read_to_string(&file)
                .map_err(|e| Error::Param(format!("cannot read '{file}': {e}")))?;
            let def = expr::parse_surface_definition(&text)?;
            let spec = ImmersionSpec::from_definition(&def, &file);
            Ok((
                0,
                report(
                    argv,
                    Some(spec.name.clone()),
                    None,
                    None,
                    json!({
                        "valid": true,
                        "name": spec.name,
                        "domain": spec.domain.describe(),
                    }),
                ),
            ))
        }
    }
}
