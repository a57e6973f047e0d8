//! Built-in immersions with authoritative metadata.
//!
//! Every entry builds its components as expression trees, so catalog
//! surfaces and user-defined surface files run through the identical
//! evaluation pipeline; a file reproducing a catalog definition reproduces
//! its numbers bit for bit.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::expr::{self, BinOp, ExprAst, UnaryFn, Var};
use crate::geometry::{Domain, ImmersionSpec};

/// Human-facing catalog entry description.
#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub alias: &'static str,
    pub params: &'static str,
    pub summary: &'static str,
    /// Known ground truths as (claim, provenance) pairs.
    pub ground_truth: &'static [(&'static str, &'static str)],
}

pub fn entries() -> &'static [CatalogEntry] {
    &[
        CatalogEntry {
            id: "clifford_torus",
            alias: "clifford",
            params: "none",
            summary: "unit product torus (cos u, sin u, cos v, sin v)",
            ground_truth: &[
                ("cos(theta) = 0 (Lagrangian)", "closed form"),
                ("beta = u + v + pi up to 2*pi", "closed form"),
                ("|h|^2 = 2, |dbar J_M|^2 = 8", "hand computation"),
                ("self-shrinker: H = -x_perp", "classical"),
            ],
        },
        CatalogEntry {
            id: "product_torus",
            alias: "product",
            params: "r > 0, s > 0 (default 2,1)",
            summary: "torus of circle radii r and s; shrinker only at r = s = 1",
            ground_truth: &[
                ("Lagrangian and intrinsically flat", "closed form"),
                ("|H + x_perp| = sqrt((r - 1/r)^2 + (s - 1/s)^2)", "hand computation"),
            ],
        },
        CatalogEntry {
            id: "lagrangian_catenoid",
            alias: "catenoid",
            params: "0 < inner < outer annulus radii (default 0.5,2)",
            summary: "minimal Lagrangian annulus z = (u + i u/r^2, v + i v/r^2)",
            ground_truth: &[
                ("eta = 1 identically, beta = 0", "closed form"),
                ("minimal: H = 0", "classical"),
            ],
        },
        CatalogEntry {
            id: "constant_angle_plane",
            alias: "plane",
            params: "theta1, theta2 (default pi/6,pi/6)",
            summary: "flat plane of constant Kähler angle theta1 + theta2",
            ground_truth: &[
                ("cos(theta) = cos(theta1 + theta2) everywhere", "closed form"),
                ("beta = pi, totally geodesic (h = 0)", "closed form"),
            ],
        },
        CatalogEntry {
            id: "holomorphic_graph",
            alias: "graph",
            params: "re(f), im(f) expressions in u,v (default u*u-v*v, 2*u*v)",
            summary: "graph (u + iv, f(u + iv)) of a holomorphic polynomial",
            ground_truth: &[
                ("theta = 0: complex points everywhere, eta = 0", "closed form"),
                ("minimal, as any holomorphic curve", "classical"),
            ],
        },
        CatalogEntry {
            id: "perturbed_torus",
            alias: "perturbed",
            params: "up to 6 Fourier coefficients, |sum| < 0.2 (default 0.1)",
            summary: "unit torus displaced along its normals; generic non-shrinker",
            ground_truth: &[
                ("zero coefficients reproduce clifford_torus bit for bit", "construction"),
            ],
        },
    ]
}

// small AST builders
fn num(x: f64) -> ExprAst {
    ExprAst::Number(x)
}
fn u() -> ExprAst {
    ExprAst::Var(Var::U)
}
fn v() -> ExprAst {
    ExprAst::Var(Var::V)
}
fn cos(a: ExprAst) -> ExprAst {
    ExprAst::Un(UnaryFn::Cos, Box::new(a))
}
fn sin(a: ExprAst) -> ExprAst {
    ExprAst::Un(UnaryFn::Sin, Box::new(a))
}
fn add(a: ExprAst, b: ExprAst) -> ExprAst {
    ExprAst::Bin(BinOp::Add, Box::new(a), Box::new(b))
}
fn sub(a: ExprAst, b: ExprAst) -> ExprAst {
    ExprAst::Bin(BinOp::Sub, Box::new(a), Box::new(b))
}
fn mul(a: ExprAst, b: ExprAst) -> ExprAst {
    ExprAst::Bin(BinOp::Mul, Box::new(a), Box::new(b))
}
fn div(a: ExprAst, b: ExprAst) -> ExprAst {
    ExprAst::Bin(BinOp::Div, Box::new(a), Box::new(b))
}

fn torus_domain() -> Domain {
    Domain::Rect {
        u: (0.0, 2.0 * PI),
        v: (0.0, 2.0 * PI),
        periodic_u: true,
        periodic_v: true,
    }
}

fn full_plane() -> Domain {
    Domain::Rect {
        u: (f64::NEG_INFINITY, f64::INFINITY),
        v: (f64::NEG_INFINITY, f64::INFINITY),
        periodic_u: false,
        periodic_v: false,
    }
}

/// Build the unit torus.
pub fn clifford_torus() -> ImmersionSpec {
    ImmersionSpec {
        name: "clifford_torus".into(),
        components: [cos(u()), sin(u()), cos(v()), sin(v())],
        domain: torus_domain(),
    }
}

/// Product of circles of radii `r` and `s`.
pub fn product_torus(r: f64, s: f64) -> Result<ImmersionSpec> {
    if !(r > 0.0 && s > 0.0 && r.is_finite() && s.is_finite()) {
        return Err(Error::Param(format!("circle radii must be positive, got {r}, {s}")));
    }
    Ok(ImmersionSpec {
        name: format!("product_torus({r}, {s})"),
        components: [
            mul(num(r), cos(u())),
            mul(num(r), sin(u())),
            mul(num(s), cos(v())),
            mul(num(s), sin(v())),
        ],
        domain: torus_domain(),
    })
}

/// The minimal Lagrangian annulus; the chart keeps the whole punctured
/// plane formula and the domain restricts it to `inner <= |(u,v)| <= outer`.
pub fn lagrangian_catenoid(inner: f64, outer: f64) -> Result<ImmersionSpec> {
    if !(inner > 0.0 && inner < outer && outer.is_finite()) {
        return Err(Error::Param(format!(
            "annulus radii must satisfy 0 < inner < outer, got {inner}, {outer}"
        )));
    }
    let rho_sq = || add(mul(u(), u()), mul(v(), v()));
    Ok(ImmersionSpec {
        name: format!("lagrangian_catenoid({inner}, {outer})"),
        components: [u(), div(u(), rho_sq()), v(), div(v(), rho_sq())],
        domain: Domain::Annulus { inner, outer },
    })
}

/// Flat plane of constant Kähler angle `theta1 + theta2`, components
/// restated in the fixed `(x1, y1, x2, y2)` order.
pub fn constant_angle_plane(theta1: f64, theta2: f64) -> Result<ImmersionSpec> {
    if !(theta1.is_finite() && theta2.is_finite()) {
        return Err(Error::Param("plane angles must be finite".into()));
    }
    Ok(ImmersionSpec {
        name: format!("constant_angle_plane({theta1}, {theta2})"),
        components: [
            mul(u(), num(theta1.cos())),
            mul(v(), num(theta2.cos())),
            mul(ExprAst::Neg(Box::new(v())), num(theta2.sin())),
            mul(ExprAst::Neg(Box::new(u())), num(theta1.sin())),
        ],
        domain: full_plane(),
    })
}

/// Holomorphic graph `(u + iv, f(u + iv))` with `f` given by its real and
/// imaginary parts as expressions in `u, v`.
pub fn holomorphic_graph(re: ExprAst, im: ExprAst) -> ImmersionSpec {
    ImmersionSpec {
        name: "holomorphic_graph".into(),
        components: [u(), v(), re, im],
        domain: full_plane(),
    }
}

/// Maximum total perturbation amplitude accepted by [`perturbed_torus`].
pub const MAX_PERTURBATION: f64 = 0.2;

/// Unit torus displaced along its two radial normals by small Fourier
/// modes. Coefficients map to modes
/// `phi = c1 cos(u+v) + c2 sin(u) + c3 cos(v)` on the first normal and
/// `psi = c4 cos(u-v) + c5 sin(v) + c6 cos(u)` on the second.
pub fn perturbed_torus(coeffs: &[f64]) -> Result<ImmersionSpec> {
    if coeffs.len() > 6 {
        return Err(Error::Param(format!(
            "perturbed torus takes at most 6 coefficients, got {}",
            coeffs.len()
        )));
    }
    let total: f64 = coeffs.iter().map(|c| c.abs()).sum();
    if !(total < MAX_PERTURBATION) {
        return Err(Error::Param(format!(
            "perturbation amplitude {total} exceeds the {MAX_PERTURBATION} bound"
        )));
    }
    let mut c = [0.0; 6];
    c[..coeffs.len()].copy_from_slice(coeffs);
    let phi = add(
        add(mul(num(c[0]), cos(add(u(), v()))), mul(num(c[1]), sin(u()))),
        mul(num(c[2]), cos(v())),
    );
    let psi = add(
        add(mul(num(c[3]), cos(sub(u(), v()))), mul(num(c[4]), sin(v()))),
        mul(num(c[5]), cos(u())),
    );
    let one_phi = add(num(1.0), phi);
    let one_psi = add(num(1.0), psi);
    Ok(ImmersionSpec {
        name: format!("perturbed_torus({:?})", &coeffs),
        components: [
            mul(one_phi.clone(), cos(u())),
            mul(one_phi, sin(u())),
            mul(one_psi.clone(), cos(v())),
            mul(one_psi, sin(v())),
        ],
        domain: torus_domain(),
    })
}

/// Build a catalog surface from its id (or alias) and raw parameter
/// strings; numeric parameters accept constant expressions like `pi/6`.
pub fn build(id: &str, params: &[&str]) -> Result<ImmersionSpec> {
    let nums = |expect: std::ops::RangeInclusive<usize>| -> Result<Vec<f64>> {
        if !expect.contains(&params.len()) {
            return Err(Error::Param(format!(
                "'{id}' takes {:?} parameters, got {}",
                expect,
                params.len()
            )));
        }
        params
            .iter()
            .map(|s| expr::const_eval(&expr::parse(s.trim())?))
            .collect()
    };
    match id {
        "clifford_torus" | "clifford" => {
            nums(0..=0)?;
            Ok(clifford_torus())
        }
        "product_torus" | "product" => {
            let p = nums(0..=2)?;
            match p.len() {
                0 => product_torus(2.0, 1.0),
                2 => product_torus(p[0], p[1]),
                _ => Err(Error::Param("'product' takes 0 or 2 parameters".into())),
            }
        }
        "lagrangian_catenoid" | "catenoid" => {
            let p = nums(0..=2)?;
            match p.len() {
                0 => lagrangian_catenoid(0.5, 2.0),
                2 => lagrangian_catenoid(p[0], p[1]),
                _ => Err(Error::Param("'catenoid' takes 0 or 2 parameters".into())),
            }
        }
        "constant_angle_plane" | "plane" => {
            let p = nums(0..=2)?;
            match p.len() {
                0 => constant_angle_plane(PI / 6.0, PI / 6.0),
                2 => constant_angle_plane(p[0], p[1]),
                _ => Err(Error::Param("'plane' takes 0 or 2 parameters".into())),
            }
        }
        "holomorphic_graph" | "graph" => match params.len() {
            0 => Ok(holomorphic_graph(
                expr::parse("u*u - v*v").expect("default graph"),
                expr::parse("2*u*v").expect("default graph"),
            )),
            2 => Ok(holomorphic_graph(
                expr::parse(params[0].trim())?,
                expr::parse(params[1].trim())?,
            )),
            n => Err(Error::Param(format!("'graph' takes 0 or 2 parameters, got {n}"))),
        },
        "perturbed_torus" | "perturbed" => {
            let p = nums(0..=6)?;
            if p.is_empty() {
                perturbed_torus(&[0.1])
            } else {
                perturbed_torus(&p)
            }
        }
        other => Err(Error::Param(format!(
            "unknown surface '{other}'; try `catalog list`"
        ))),
    }
}

/// Resolve a CLI surface argument: a catalog id with optional `:p1,p2`
/// parameters, or `file:PATH` for a surface definition file.
pub fn surface_from_arg(arg: &str) -> Result<ImmersionSpec> {
    if let Some(path) = arg.strip_prefix("file:") {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Param(format!("cannot read surface file '{path}': {e}"))
        })?;
        let def = expr::parse_surface_definition(&text)?;
        let stem = std::path::Path::new(path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("user surface");
        return Ok(ImmersionSpec::from_definition(&def, stem));
    }
    match arg.split_once(':') {
        Some((id, rest)) => {
            let params: Vec<&str> = expr::split_top_level(rest).into_iter().collect();
            build(id, &params)
        }
        None => build(arg, &[]),
    }
}
