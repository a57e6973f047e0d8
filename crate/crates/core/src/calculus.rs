//! Intrinsic surface operators and Gaussian-weighted quadrature.
//!
//! Scalar fields are differentiated through the jet pipeline: the gradient,
//! the Laplace-Beltrami operator `(1/sqrt g) d_i(sqrt g g^ij d_j f)` and the
//! drift operator `L f = Lap f - <x, grad f>` are all assembled exactly from
//! order-2 field jets, so identities built from them hold to round-off on
//! closed-form surfaces.
//!
//! Integration uses a tensor-product rule per domain: periodic trapezoid on
//! periodic directions (spectrally accurate), Gauss-Legendre otherwise, and
//! a polar Gauss-Legendre x trapezoid grid on annuli with the chart
//! Jacobian folded into the weights. Unbounded rectangles are truncated at
//! a configurable radius; the Gaussian weight `exp(-|x|^2/2)` keeps the
//! truncation error far below quadrature accuracy at the default radius.
//! Quadrature sums are reduced by deterministic pairwise summation so
//! reports are byte-stable across thread counts.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{self, ExprAst};
use crate::geometry::{
    jv_dir_deriv, jv_value, AmbientVector, Domain, ImmersionSpec, JetFrame, JetSurface,
    SecondForms, EPS_ADAPT,
};
use crate::jet::{Jet3, ParamPoint};

/// Default truncation radius for unbounded directions; the discarded
/// Gaussian tail is below 1e-12 of the integral.
pub const DEFAULT_TRUNCATE_RADIUS: f64 = 8.0;

// --------------------------------------------------------------- fields --

/// Scalar fields the calculus operators accept.
#[derive(Debug, Clone)]
pub enum ScalarFieldId {
    CosTheta,
    Cos2Theta,
    /// The angle itself; only defined away from complex points because the
    /// arccos derivatives blow up at the ends.
    Theta,
    /// Squared distance from the origin of the ambient position.
    AbsXSq,
    /// An expression in the chart coordinates `u`, `v`.
    Custom(ExprAst),
}

/// Order-2 jet of a scalar field at a point (third-order slots carry no
/// information for the metric-dependent fields).
pub fn field_jet2(spec: &ImmersionSpec, id: &ScalarFieldId, p: ParamPoint) -> Result<Jet3> {
    let js = JetSurface::new(spec, p)?;
    field_jet(&js, id)
}

pub(crate) fn field_jet(js: &JetSurface, id: &ScalarFieldId) -> Result<Jet3> {
    match id {
        ScalarFieldId::CosTheta => Ok(js.cos_theta),
        ScalarFieldId::Cos2Theta => Ok(js.cos_theta * js.cos_theta),
        ScalarFieldId::Theta => {
            let c = js.cos_theta.value();
            let sin_theta = (1.0 - c * c).max(0.0).sqrt();
            if sin_theta < EPS_ADAPT {
                return Err(Error::NearComplex(format!(
                    "theta jets need sin(theta) > {EPS_ADAPT}, got {sin_theta}"
                )));
            }
            js.cos_theta.acos()
        }
        ScalarFieldId::AbsXSq => {
            Ok(js.x[0] * js.x[0] + js.x[1] * js.x[1] + js.x[2] * js.x[2] + js.x[3] * js.x[3])
        }
        ScalarFieldId::Custom(ast) => expr::eval_jet(ast, js.p),
    }
}

// ------------------------------------------------------------- gradient --

/// Tangential gradient of a scalar field.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceGradient {
    /// Components against the orthonormal tangent frame `(e1, e2)`.
    pub frame: [f64; 2],
    /// The same vector in ambient coordinates.
    pub ambient: AmbientVector,
    /// `|grad f|^2 = g^ij d_i f d_j f`.
    pub norm_sq: f64,
}

pub fn surface_gradient(
    spec: &ImmersionSpec,
    id: &ScalarFieldId,
    p: ParamPoint,
) -> Result<SurfaceGradient> {
    let js = JetSurface::new(spec, p)?;
    gradient_of(&js, &field_jet(&js, id)?)
}

pub(crate) fn gradient_of(js: &JetSurface, f: &Jet3) -> Result<SurfaceGradient> {
    let (fu, fv) = (f.deriv(1, 0), f.deriv(0, 1));
    let ginv = [
        [js.g_inv[0][0].value(), js.g_inv[0][1].value()],
        [js.g_inv[1][0].value(), js.g_inv[1][1].value()],
    ];
    let cu = ginv[0][0] * fu + ginv[0][1] * fv;
    let cv = ginv[1][0] * fu + ginv[1][1] * fv;
    let ambient = jv_value(&js.xu).scale(cu) + jv_value(&js.xv).scale(cv);
    let norm_sq = fu * cu + fv * cv;
    // frame components against the Gram-Schmidt tangent pair
    let ff = js.first_forms();
    let e1 = ff.x_u.scale(1.0 / ff.x_u.norm());
    let w = ff.x_v - e1.scale(ff.x_v.dot(&e1));
    let e2 = w.scale(1.0 / w.norm());
    Ok(SurfaceGradient {
        frame: [ambient.dot(&e1), ambient.dot(&e2)],
        ambient,
        norm_sq,
    })
}

// ------------------------------------------------------------ laplacian --

pub fn laplace_beltrami(spec: &ImmersionSpec, id: &ScalarFieldId, p: ParamPoint) -> Result<f64> {
    let js = JetSurface::new(spec, p)?;
    laplacian_of(&js, &field_jet(&js, id)?)
}

/// `(1/sqrt g) [d_u P_u + d_v P_v]` with `P_i = sqrt(g) g^ij d_j f`,
/// assembled from jets (the flux jets are valid to order 1, which is all
/// the outer derivative needs).
pub(crate) fn laplacian_of(js: &JetSurface, f: &Jet3) -> Result<f64> {
    let (fu, fv) = (f.d_du(), f.d_dv());
    let pu = js.sqrt_det_g * (js.g_inv[0][0] * fu + js.g_inv[0][1] * fv);
    let pv = js.sqrt_det_g * (js.g_inv[1][0] * fu + js.g_inv[1][1] * fv);
    Ok((pu.deriv(1, 0) + pv.deriv(0, 1)) / js.sqrt_det_g.value())
}

pub fn drift_laplacian(spec: &ImmersionSpec, id: &ScalarFieldId, p: ParamPoint) -> Result<f64> {
    let js = JetSurface::new(spec, p)?;
    drift_of(&js, &field_jet(&js, id)?)
}

/// Drift operator `L f = Lap f - <x, grad f>` with the ambient position.
pub(crate) fn drift_of(js: &JetSurface, f: &Jet3) -> Result<f64> {
    let lap = laplacian_of(js, f)?;
    let grad = gradient_of(js, f)?;
    Ok(lap - js.position().dot(&grad.ambient))
}

// ---------------------------------------------------------- J_M tensor --

/// Squared norm of the ambient derivative of the surface-aligned complex
/// structure, from second-form components in an adapted frame:
/// `4 sum_i ((h4_2i + h3_1i)^2 + (h4_1i - h3_2i)^2)`.
pub fn dbar_jm_norm_sq(sf: &SecondForms) -> Result<f64> {
    if !sf.adapted_frame {
        return Err(Error::Frame(
            "|dbar J_M|^2 requires second forms in an adapted frame".into(),
        ));
    }
    let mut acc = 0.0;
    for i in 0..2 {
        let a = sf.h4[1][i] + sf.h3[0][i];
        let b = sf.h4[0][i] - sf.h3[1][i];
        acc += a * a + b * b;
    }
    Ok(4.0 * acc)
}

// ----------------------------------------------------------- connection --

/// Ambient connection coefficients `Gamma[A][B][i] = <D_{e_i} e_A, e_B>` in
/// the adapted moving frame; antisymmetric in (A, B).
#[derive(Debug, Clone)]
pub struct ConnectionData {
    pub gamma: [[[f64; 2]; 4]; 4],
}

pub fn connection_data(spec: &ImmersionSpec, p: ParamPoint) -> Result<ConnectionData> {
    let js = JetSurface::new(spec, p)?;
    let jf = JetFrame::adapted(&js)?;
    Ok(connection_from(&js, &jf))
}

pub(crate) fn connection_from(js: &JetSurface, jf: &JetFrame) -> ConnectionData {
    let _ = js;
    let coord = [
        (jf.coord[0][0].value(), jf.coord[0][1].value()),
        (jf.coord[1][0].value(), jf.coord[1][1].value()),
    ];
    let e_values: Vec<AmbientVector> = jf.e.iter().map(jv_value).collect();
    let mut gamma = [[[0.0; 2]; 4]; 4];
    for a in 0..4 {
        for i in 0..2 {
            let d = jv_dir_deriv(&jf.e[a], coord[i].0, coord[i].1);
            for b in 0..4 {
                gamma[a][b][i] = d.dot(&e_values[b]);
            }
        }
    }
    ConnectionData { gamma }
}

// ------------------------------------------------------------ quadrature --

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    PeriodicTrapezoid,
    GaussLegendre,
}

/// Tensor-product quadrature nodes with weights; annulus grids fold the
/// polar Jacobian into the weight.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub nodes: Vec<(ParamPoint, f64)>,
    pub nu: usize,
    pub nv: usize,
    pub desc: String,
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
pub fn legendre_rule(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_eval(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_eval(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn line_rule(
    bounds: (f64, f64),
    periodic: bool,
    n: usize,
    rule: Option<Rule>,
    truncate: f64,
) -> Result<Vec<(f64, f64)>> {
    let rule = rule.unwrap_or(if periodic {
        Rule::PeriodicTrapezoid
    } else {
        Rule::GaussLegendre
    });
    let (mut lo, mut hi) = bounds;
    if !periodic {
        lo = lo.max(-truncate);
        hi = hi.min(truncate);
        if !(lo < hi) {
            return Err(Error::Domain(format!(
                "empty integration interval after truncation: [{lo}, {hi}]"
            )));
        }
    }
    match rule {
        Rule::PeriodicTrapezoid => {
            let h = (hi - lo) / n as f64;
            Ok((0..n).map(|k| (lo + k as f64 * h, h)).collect())
        }
        Rule::GaussLegendre => {
            let scale = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            Ok(legendre_rule(n)
                .into_iter()
                .map(|(x, w)| (mid + scale * x, scale * w))
                .collect())
        }
    }
}

impl QuadratureGrid {
    /// Build a grid adapted to the domain; `rule_u`/`rule_v` override the
    /// periodicity-driven default on rectangles.
    pub fn for_domain(
        domain: &Domain,
        nu: usize,
        nv: usize,
        rule_u: Option<Rule>,
        rule_v: Option<Rule>,
        truncate_radius: f64,
    ) -> Result<QuadratureGrid> {
        if nu == 0 || nv == 0 {
            return Err(Error::Param("grid node counts must be positive".into()));
        }
        match *domain {
            Domain::Rect { u, v, periodic_u, periodic_v } => {
                let us = line_rule(u, periodic_u, nu, rule_u, truncate_radius)?;
                let vs = line_rule(v, periodic_v, nv, rule_v, truncate_radius)?;
                let mut nodes = Vec::with_capacity(nu * nv);
                for &(uu, wu) in &us {
                    for &(vv, wv) in &vs {
                        nodes.push((ParamPoint::new(uu, vv), wu * wv));
                    }
                }
                Ok(QuadratureGrid {
                    nodes,
                    nu,
                    nv,
                    desc: format!("{nu}x{nv} on {}", domain.describe()),
                })
            }
            Domain::Annulus { inner, outer } => {
                let rs = line_rule((inner, outer), false, nu, Some(Rule::GaussLegendre), f64::INFINITY)?;
                let ps = line_rule(
                    (0.0, std::f64::consts::TAU),
                    true,
                    nv,
                    Some(Rule::PeriodicTrapezoid),
                    f64::INFINITY,
                )?;
                let mut nodes = Vec::with_capacity(nu * nv);
                for &(r, wr) in &rs {
                    for &(phi, wp) in &ps {
                        // polar chart Jacobian r dr dphi
                        nodes.push((ParamPoint::new(r * phi.cos(), r * phi.sin()), wr * wp * r));
                    }
                }
                Ok(QuadratureGrid {
                    nodes,
                    nu,
                    nv,
                    desc: format!("{nu}x{nv} polar on {}", domain.describe()),
                })
            }
        }
    }
}

/// Deterministic pairwise reduction.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Integrate a per-point functional against `exp(-|x|^2/2) dV` over the
/// grid. Node evaluations run in parallel; the reduction is deterministic.
pub fn weighted_integral_of<F>(spec: &ImmersionSpec, grid: &QuadratureGrid, f: F) -> Result<f64>
where
    F: Fn(&JetSurface) -> Result<f64> + Sync,
{
    let terms: Result<Vec<f64>> = grid
        .nodes
        .par_iter()
        .map(|&(p, w)| {
            let js = JetSurface::new(spec, p)?;
            let x = js.position();
            let weight = (-0.5 * x.norm_sq()).exp();
            Ok(w * f(&js)? * weight * js.sqrt_det_g.value())
        })
        .collect();
    Ok(pairwise_sum(&terms?))
}

/// Gaussian-weighted integral of a scalar field.
pub fn weighted_integral(
    spec: &ImmersionSpec,
    id: &ScalarFieldId,
    grid: &QuadratureGrid,
) -> Result<f64> {
    weighted_integral_of(spec, grid, |js| Ok(field_jet(js, id)?.value()))
}

/// Gaussian-weighted area `F = \int exp(-|x|^2/2) dV`.
pub fn gaussian_area(spec: &ImmersionSpec, grid: &QuadratureGrid) -> Result<f64> {
    weighted_integral_of(spec, grid, |_| Ok(1.0))
}

/// Integration-by-parts defect `|∫ u L v w dV + ∫ <grad u, grad v> w dV|`
/// for the Gaussian weight `w`; vanishes on closed surfaces for smooth
/// fields. Restricted to closed (doubly periodic) domains, where the
/// integrability hypothesis holds by compactness.
pub fn stokes_residual(
    spec: &ImmersionSpec,
    u_id: &ScalarFieldId,
    v_id: &ScalarFieldId,
    grid: &QuadratureGrid,
) -> Result<f64> {
    if !spec.domain.is_closed() {
        return Err(Error::UnsupportedDomain(format!(
            "integration-by-parts check needs a closed surface, domain is {}",
            spec.domain.describe()
        )));
    }
    let total = weighted_integral_of(spec, grid, |js| {
        let fu = field_jet(js, u_id)?;
        let fv = field_jet(js, v_id)?;
        let u_lv = fu.value() * drift_of(js, &fv)?;
        let ginv = [
            [js.g_inv[0][0].value(), js.g_inv[0][1].value()],
            [js.g_inv[1][0].value(), js.g_inv[1][1].value()],
        ];
        let (au, av) = (fu.deriv(1, 0), fu.deriv(0, 1));
        let (bu, bv) = (fv.deriv(1, 0), fv.deriv(0, 1));
        let grad_dot = ginv[0][0] * au * bu
            + ginv[0][1] * (au * bv + av * bu)
            + ginv[1][1] * av * bv;
        Ok(u_lv + grad_dot)
    })?;
    Ok(total.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geometry::test_surfaces::*;
    use crate::geometry::{adapted_frame, first_forms, immersion_jets, second_forms};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{PI, TAU};

    fn custom(text: &str) -> ScalarFieldId {
        ScalarFieldId::Custom(parse(text).unwrap())
    }

    #[test]
    fn field_jets_golden_values() {
        let j = field_jet2(&clifford(), &ScalarFieldId::CosTheta, ParamPoint::new(0.4, 2.0))
            .unwrap();
        for &c in j.coeffs() {
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-13);
        }

        let j = field_jet2(
            &product_torus(2.0, 1.0),
            &ScalarFieldId::AbsXSq,
            ParamPoint::new(1.0, 0.3),
        )
        .unwrap();
        assert_abs_diff_eq!(j.value(), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j.deriv(1, 0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j.deriv(0, 1), 0.0, epsilon = 1e-12);

        let j = field_jet2(&catenoid(), &ScalarFieldId::AbsXSq, ParamPoint::new(1.0, 0.0))
            .unwrap();
        assert_abs_diff_eq!(j.value(), 2.0, epsilon = 1e-12);

        // theta is rejected next to complex points
        assert!(matches!(
            field_jet2(&holomorphic_square(), &ScalarFieldId::Theta, ParamPoint::new(0.2, 0.2)),
            Err(Error::NearComplex(_))
        ));
    }

    #[test]
    fn gradient_golden_values() {
        let g = surface_gradient(&clifford(), &custom("3"), ParamPoint::new(0.1, 0.2)).unwrap();
        assert_abs_diff_eq!(g.norm_sq, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.ambient.norm(), 0.0, epsilon = 1e-15);

        let g = surface_gradient(&clifford(), &custom("u + v"), ParamPoint::new(0.1, 0.2)).unwrap();
        assert_abs_diff_eq!(g.frame[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.frame[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.norm_sq, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn gradient_of_cos_theta_matches_second_form_expression() {
        // grad(cos theta) = -sin(theta) * sum_i (h4_1i - h3_2i) e_i
        let surf = perturbed(0.1);
        for p in random_points(40, 41) {
            let jets = immersion_jets(&surf, p).unwrap();
            let ff = first_forms(&jets).unwrap();
            let frame = adapted_frame(&ff).unwrap();
            let sf = second_forms(&jets, &frame, &ff);
            let g = surface_gradient(&surf, &ScalarFieldId::CosTheta, p).unwrap();
            let expect = frame
                .e1
                .scale(sf.h4[0][0] - sf.h3[1][0])
                .scale(-frame.sin_theta)
                + frame
                    .e2
                    .scale(sf.h4[0][1] - sf.h3[1][1])
                    .scale(-frame.sin_theta);
            assert!((g.ambient - expect).norm() < 1e-8);
        }
    }

    #[test]
    fn laplacian_golden_values() {
        let flat = spec(
            "flat",
            ["u", "0", "v", "0"],
            Domain::Rect {
                u: (-10.0, 10.0),
                v: (-10.0, 10.0),
                periodic_u: false,
                periodic_v: false,
            },
        );
        let lap = laplace_beltrami(&flat, &custom("u^2 + v^2"), ParamPoint::new(0.7, -0.9))
            .unwrap();
        assert_abs_diff_eq!(lap, 4.0, epsilon = 1e-12);

        let p = ParamPoint::new(1.2, 0.5);
        let lap = laplace_beltrami(&clifford(), &custom("sin(u)"), p).unwrap();
        assert_abs_diff_eq!(lap, -p.u.sin(), epsilon = 1e-12);
    }

    #[test]
    fn laplacian_matches_fd_composite_on_catenoid() {
        // independent route: differentiate the flux P_i = sqrt(g) g^ij d_j f
        // by central differences instead of jets
        let surf = catenoid();
        let field = custom("u");
        let p = ParamPoint::new(1.0, 0.0);
        let flux = |q: ParamPoint, which: usize| -> f64 {
            let js = JetSurface::new(&surf, q).unwrap();
            let f = field_jet(&js, &field).unwrap();
            let (fu, fv) = (f.deriv(1, 0), f.deriv(0, 1));
            let row = [
                js.g_inv[which][0].value() * fu + js.g_inv[which][1].value() * fv,
            ];
            js.sqrt_det_g.value() * row[0]
        };
        let h = 1e-5;
        let dpu = (flux(ParamPoint::new(p.u + h, p.v), 0) - flux(ParamPoint::new(p.u - h, p.v), 0))
            / (2.0 * h);
        let dpv = (flux(ParamPoint::new(p.u, p.v + h), 1) - flux(ParamPoint::new(p.u, p.v - h), 1))
            / (2.0 * h);
        let js = JetSurface::new(&surf, p).unwrap();
        let fd = (dpu + dpv) / js.sqrt_det_g.value();
        let lap = laplace_beltrami(&surf, &field, p).unwrap();
        assert_abs_diff_eq!(lap, fd, epsilon = 1e-5);
    }

    #[test]
    fn drift_golden_values() {
        let d = drift_laplacian(&clifford(), &custom("42"), ParamPoint::new(0.3, 0.4)).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-14);

        let d = drift_laplacian(&clifford(), &ScalarFieldId::CosTheta, ParamPoint::new(0.3, 0.4))
            .unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-13);

        // product torus: position is normal so the drift term vanishes
        let p = ParamPoint::new(0.9, 0.1);
        let d = drift_laplacian(&product_torus(2.0, 1.0), &custom("sin(u)"), p).unwrap();
        assert_abs_diff_eq!(d, -p.u.sin() / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn drift_matches_divergence_form() {
        // L f = exp(|x|^2/2) div(exp(-|x|^2/2) grad f), both sides from jets
        let surf = perturbed(0.12);
        for p in random_points(30, 43) {
            let js = JetSurface::new(&surf, p).unwrap();
            let f = field_jet(&js, &custom("sin(u)*cos(v) + 0.3*u")).unwrap();
            let direct = drift_of(&js, &f).unwrap();

            let abs_x_sq = js.x[0] * js.x[0] + js.x[1] * js.x[1] + js.x[2] * js.x[2]
                + js.x[3] * js.x[3];
            let w = (abs_x_sq * (-0.5)).exp();
            let (fu, fv) = (f.d_du(), f.d_dv());
            let pu = w * js.sqrt_det_g * (js.g_inv[0][0] * fu + js.g_inv[0][1] * fv);
            let pv = w * js.sqrt_det_g * (js.g_inv[1][0] * fu + js.g_inv[1][1] * fv);
            let div_form = (pu.deriv(1, 0) + pv.deriv(0, 1))
                / (w.value() * js.sqrt_det_g.value());
            assert_abs_diff_eq!(direct, div_form, epsilon = 1e-8);
        }
    }

    #[test]
    fn dbar_jm_on_clifford_is_eight() {
        let jets = immersion_jets(&clifford(), ParamPoint::new(1.7, 0.6)).unwrap();
        let ff = first_forms(&jets).unwrap();
        let frame = adapted_frame(&ff).unwrap();
        let sf = second_forms(&jets, &frame, &ff);
        assert_abs_diff_eq!(dbar_jm_norm_sq(&sf).unwrap(), 8.0, epsilon = 1e-9);
    }

    #[test]
    fn dbar_jm_vanishes_on_plane_and_rejects_generic_frames() {
        let spec = plane(0.4, 0.7);
        let jets = immersion_jets(&spec, ParamPoint::new(0.3, 0.1)).unwrap();
        let ff = first_forms(&jets).unwrap();
        let frame = adapted_frame(&ff).unwrap();
        let sf = second_forms(&jets, &frame, &ff);
        assert_abs_diff_eq!(dbar_jm_norm_sq(&sf).unwrap(), 0.0, epsilon = 1e-12);

        let generic = crate::geometry::generic_normal_frame(&ff);
        let sf = second_forms(&jets, &generic, &ff);
        assert!(matches!(dbar_jm_norm_sq(&sf), Err(Error::Frame(_))));
    }

    #[test]
    fn dbar_jm_is_zero_exactly_on_the_parallel_condition() {
        // h4_1i = h3_2i and h4_2i = -h3_1i force the sum to vanish
        let sf = SecondForms {
            h3: [[0.3, -0.2], [-0.2, -0.3]],
            h4: [[-0.2, -0.3], [-0.3, 0.2]],
            mean3: 0.8,
            mean4: 0.0,
            mean_vector: AmbientVector::zero(),
            norm_h_sq: 0.0,
            gauss_k: 0.0,
            adapted_frame: true,
        };
        assert_abs_diff_eq!(dbar_jm_norm_sq(&sf).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dbar_jm_matches_brute_force_frame_derivative() {
        // oracle: J_M as an ambient matrix field from the adapted frame,
        // differentiated by central differences along e_1, e_2
        let jm_matrix = |surf: &ImmersionSpec, q: ParamPoint| -> [[f64; 4]; 4] {
            let jets = immersion_jets(surf, q).unwrap();
            let ff = first_forms(&jets).unwrap();
            let f = adapted_frame(&ff).unwrap();
            let mut m = [[0.0; 4]; 4];
            // maps e1 -> e2, e2 -> -e1, e3 -> -e4, e4 -> e3
            for r in 0..4 {
                for c in 0..4 {
                    m[r][c] = f.e2.0[r] * f.e1.0[c] - f.e1.0[r] * f.e2.0[c]
                        - f.e4.0[r] * f.e3.0[c]
                        + f.e3.0[r] * f.e4.0[c];
                }
            }
            m
        };
        for (surf, p) in [
            (catenoid(), ParamPoint::new(1.0, 0.0)),
            (perturbed(0.1), ParamPoint::new(0.8, 1.3)),
        ] {
            let jets = immersion_jets(&surf, p).unwrap();
            let ff = first_forms(&jets).unwrap();
            let frame = adapted_frame(&ff).unwrap();
            let sf = second_forms(&jets, &frame, &ff);
            let produced = dbar_jm_norm_sq(&sf).unwrap();

            let h = 1e-5;
            let du = {
                let a = jm_matrix(&surf, ParamPoint::new(p.u + h, p.v));
                let b = jm_matrix(&surf, ParamPoint::new(p.u - h, p.v));
                let mut m = [[0.0; 4]; 4];
                for r in 0..4 {
                    for c in 0..4 {
                        m[r][c] = (a[r][c] - b[r][c]) / (2.0 * h);
                    }
                }
                m
            };
            let dv = {
                let a = jm_matrix(&surf, ParamPoint::new(p.u, p.v + h));
                let b = jm_matrix(&surf, ParamPoint::new(p.u, p.v - h));
                let mut m = [[0.0; 4]; 4];
                for r in 0..4 {
                    for c in 0..4 {
                        m[r][c] = (a[r][c] - b[r][c]) / (2.0 * h);
                    }
                }
                m
            };
            let c1 = crate::geometry::tangent_coordinates(&ff, &frame.e1);
            let c2 = crate::geometry::tangent_coordinates(&ff, &frame.e2);
            let mut brute = 0.0;
            for (a, b) in [c1, c2] {
                for r in 0..4 {
                    for c in 0..4 {
                        let d = a * du[r][c] + b * dv[r][c];
                        brute += d * d;
                    }
                }
            }
            assert_abs_diff_eq!(produced, brute, epsilon = 1e-6);
        }
    }

    #[test]
    fn connection_golden_values() {
        let flat = spec(
            "flat",
            ["u", "0", "v", "0"],
            Domain::Rect {
                u: (-10.0, 10.0),
                v: (-10.0, 10.0),
                periodic_u: false,
                periodic_v: false,
            },
        );
        let cd = connection_data(&flat, ParamPoint::new(0.4, 0.5)).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                for i in 0..2 {
                    assert_abs_diff_eq!(cd.gamma[a][b][i], 0.0, epsilon = 1e-12);
                }
            }
        }

        // <D_{e1} e1, e3> equals h3_11 = 1 on the unit torus
        let cd = connection_data(&clifford(), ParamPoint::new(0.3, 1.1)).unwrap();
        assert_abs_diff_eq!(cd.gamma[0][2][0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn connection_is_antisymmetric() {
        for surf in [clifford(), product_torus(2.0, 1.0), perturbed(0.1)] {
            for p in random_points(20, 47) {
                let cd = connection_data(&surf, p).unwrap();
                for a in 0..4 {
                    for b in 0..4 {
                        for i in 0..2 {
                            assert!(
                                (cd.gamma[a][b][i] + cd.gamma[b][a][i]).abs() < 1e-9,
                                "Gamma[{a}][{b}][{i}] not antisymmetric"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = legendre_rule(6);
        let integral: f64 = rule.iter().map(|&(x, w)| w * x.powi(10)).sum();
        assert_abs_diff_eq!(integral, 2.0 / 11.0, epsilon = 1e-14);
        let odd: f64 = rule.iter().map(|&(x, w)| w * x.powi(5)).sum();
        assert_abs_diff_eq!(odd, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn weighted_area_golden_values() {
        let grid = QuadratureGrid::for_domain(
            &clifford().domain,
            64,
            64,
            None,
            None,
            DEFAULT_TRUNCATE_RADIUS,
        )
        .unwrap();
        let area = gaussian_area(&clifford(), &grid).unwrap();
        assert_abs_diff_eq!(area, 4.0 * PI * PI * (-1.0f64).exp(), epsilon = 1e-8);

        let (r, s) = (2.0, 1.0);
        let surf = product_torus(r, s);
        let area = gaussian_area(&surf, &grid).unwrap();
        let expect = 4.0 * PI * PI * r * s * (-0.5 * (r * r + s * s)).exp();
        assert_abs_diff_eq!(area, expect, epsilon = 1e-8);
    }

    #[test]
    fn weighted_integral_of_drift_cos_theta_vanishes_on_clifford() {
        let grid = QuadratureGrid::for_domain(
            &clifford().domain,
            64,
            64,
            None,
            None,
            DEFAULT_TRUNCATE_RADIUS,
        )
        .unwrap();
        let surf = clifford();
        let total = weighted_integral_of(&surf, &grid, |js| {
            let f = field_jet(js, &ScalarFieldId::CosTheta)?;
            drift_of(js, &f)
        })
        .unwrap();
        assert!(total.abs() < 1e-10, "integral = {total}");
    }

    #[test]
    fn stokes_residual_golden_values() {
        let grid64 = |d: &Domain| {
            QuadratureGrid::for_domain(d, 64, 64, None, None, DEFAULT_TRUNCATE_RADIUS).unwrap()
        };
        let surf = clifford();
        let r = stokes_residual(&surf, &custom("1"), &ScalarFieldId::CosTheta, &grid64(&surf.domain))
            .unwrap();
        assert!(r < 1e-10);

        let surf = perturbed(0.1);
        let grid = QuadratureGrid::for_domain(&surf.domain, 96, 96, None, None, 8.0).unwrap();
        let r = stokes_residual(&surf, &custom("sin(u)"), &custom("cos(v)"), &grid).unwrap();
        assert!(r < 1e-7, "residual = {r}");

        let surf = product_torus(2.0, 1.0);
        let r = stokes_residual(&surf, &custom("1"), &custom("sin(2*u)"), &grid64(&surf.domain))
            .unwrap();
        assert!(r < 1e-8, "residual = {r}");

        // non-closed domains are rejected
        let r = stokes_residual(
            &catenoid(),
            &custom("1"),
            &custom("u"),
            &grid64(&catenoid().domain),
        );
        assert!(matches!(r, Err(Error::UnsupportedDomain(_))));
    }

    #[test]
    fn trapezoid_doubling_is_converged_past_64_nodes() {
        let surf = perturbed(0.15);
        let a = gaussian_area(
            &surf,
            &QuadratureGrid::for_domain(&surf.domain, 64, 64, None, None, 8.0).unwrap(),
        )
        .unwrap();
        let b = gaussian_area(
            &surf,
            &QuadratureGrid::for_domain(&surf.domain, 128, 128, None, None, 8.0).unwrap(),
        )
        .unwrap();
        assert!((a - b).abs() < 1e-10, "diff = {}", (a - b).abs());
    }

    #[test]
    fn catenoid_weighted_area_converges_in_the_annulus_radius() {
        let area_for = |rad: f64| {
            let surf = spec(
                "catenoid",
                ["u", "u/(u*u+v*v)", "v", "v/(u*u+v*v)"],
                Domain::Annulus { inner: 1.0 / rad, outer: rad },
            );
            let grid =
                QuadratureGrid::for_domain(&surf.domain, 96, 96, None, None, f64::INFINITY)
                    .unwrap();
            gaussian_area(&surf, &grid).unwrap()
        };
        let a3 = area_for(3.0);
        let a5 = area_for(5.0);
        let a7 = area_for(7.0);
        // the weight decays in both annulus directions, so the areas grow
        // towards a limit with rapidly shrinking increments
        assert!(a5 > a3 && a7 > a5);
        assert!(a7 - a5 < (a5 - a3) / 100.0);
        assert!(a7 - a5 < 1e-4, "tail not decaying: {}", a7 - a5);
        let _ = TAU;
    }

    #[test]
    fn plane_gaussian_area_matches_closed_form() {
        // |x|^2 = u^2 + v^2 and sqrt(g) = 1 on the isometric chart, so the
        // weighted area is 2*pi
        let surf = plane(0.3, 0.8);
        let grid = QuadratureGrid::for_domain(&surf.domain, 64, 64, None, None, 8.0).unwrap();
        let area = gaussian_area(&surf, &grid).unwrap();
        assert_abs_diff_eq!(area, TAU, epsilon = 1e-10);
    }
}
