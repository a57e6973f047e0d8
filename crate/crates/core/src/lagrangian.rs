//! The complex density `eta`, the Lagrangian angle `beta`, the Maslov form
//! `alpha = -d(beta)`, and loop winding numbers.
//!
//! `eta` is the pullback of the holomorphic volume form divided by the area
//! density; its modulus equals `sin(theta)`, so it vanishes exactly at
//! complex points. `beta = arg(eta)` is multi-valued: it is exposed only as
//! a principal value and through path integrals of `d(beta)`, and the
//! winding of `alpha` around user-named loops is the well-defined
//! observable. `d(beta)` is computed as `Im(d(eta)/eta)` per coordinate
//! direction, which is branch-free wherever `eta != 0`.

use crate::error::{Error, Result};
use crate::expr::{self, ExprAst};
use crate::geometry::{
    AmbientVector, Domain, FirstForms, ImmersionSpec, JetSurface, SurfaceJets,
};
use crate::jet::ParamPoint;

/// Cutoff on |eta| below which the Lagrangian angle does not exist. Matches
/// the adapted-frame cutoff: the two degeneracies coincide because
/// `|eta| = sin(theta)`.
pub const EPS_ETA: f64 = 1e-8;

/// Refinement budget for loop unwrapping.
pub const MAX_LOOP_SAMPLES: usize = 1 << 20;

/// Value of the complex density at a point.
#[derive(Debug, Clone, Copy)]
pub struct EtaValue {
    pub re: f64,
    pub im: f64,
}

impl EtaValue {
    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Principal Kähler angle recovered from `|eta| = sin(theta)`; lands in
    /// `[0, pi/2]` (the modulus cannot tell `theta` from `pi - theta`).
    pub fn theta_from_eta(&self) -> f64 {
        self.abs().clamp(0.0, 1.0).asin()
    }
}

/// `eta = Omega(x_u, x_v) / sqrt(det g)` from component jets.
pub fn eta(jets: &SurfaceJets, ff: &FirstForms) -> EtaValue {
    let (re, im) = jets.x_u().omega_holo(&jets.x_v());
    EtaValue { re: re / ff.sqrt_det_g, im: im / ff.sqrt_det_g }
}

/// Principal value of the Lagrangian angle, in `(-pi, pi]`.
pub fn lagrangian_angle(eta: &EtaValue) -> Result<f64> {
    if eta.abs() < EPS_ETA {
        return Err(Error::UndefinedAngle(format!(
            "|eta| = {} below cutoff (complex point)",
            eta.abs()
        )));
    }
    Ok(principal_angle(eta.im, eta.re))
}

/// atan2 with the branch pinned to `(-pi, pi]` (IEEE atan2 returns -pi for
/// a negative-zero numerator).
fn principal_angle(y: f64, x: f64) -> f64 {
    let b = y.atan2(x);
    if b == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        b
    }
}

/// Coordinate components of the Maslov form at a point, plus the principal
/// angle value.
#[derive(Debug, Clone, Copy)]
pub struct MaslovSample {
    /// `alpha(d/du)` and `alpha(d/dv)` where `alpha = -d(beta)`.
    pub alpha_u: f64,
    pub alpha_v: f64,
    pub beta_principal: f64,
}

/// `d(beta) = Im(d(eta)/eta)` componentwise; `alpha = -d(beta)`.
pub fn maslov_form(js: &JetSurface) -> Result<MaslovSample> {
    let eta = EtaValue { re: js.eta_re.value(), im: js.eta_im.value() };
    let norm_sq = eta.re * eta.re + eta.im * eta.im;
    if norm_sq.sqrt() < EPS_ETA {
        return Err(Error::UndefinedAngle(format!(
            "|eta| = {} below cutoff (complex point)",
            norm_sq.sqrt()
        )));
    }
    // Im(eta' / eta) = (re * im' - im * re') / |eta|^2
    let dbeta_u =
        (eta.re * js.eta_im.deriv(1, 0) - eta.im * js.eta_re.deriv(1, 0)) / norm_sq;
    let dbeta_v =
        (eta.re * js.eta_im.deriv(0, 1) - eta.im * js.eta_re.deriv(0, 1)) / norm_sq;
    Ok(MaslovSample {
        alpha_u: -dbeta_u,
        alpha_v: -dbeta_v,
        beta_principal: principal_angle(eta.im, eta.re),
    })
}

/// Metric gradient of `beta` as an ambient vector, `sum_ij g^ij d_j(beta) x_i`.
pub fn beta_gradient(js: &JetSurface) -> Result<AmbientVector> {
    let m = maslov_form(js)?;
    let (du, dv) = (-m.alpha_u, -m.alpha_v);
    let ginv = [
        [js.g_inv[0][0].value(), js.g_inv[0][1].value()],
        [js.g_inv[1][0].value(), js.g_inv[1][1].value()],
    ];
    let cu = ginv[0][0] * du + ginv[0][1] * dv;
    let cv = ginv[1][0] * du + ginv[1][1] * dv;
    let xu = crate::geometry::jv_value(&js.xu);
    let xv = crate::geometry::jv_value(&js.xv);
    Ok(xu.scale(cu) + xv.scale(cv))
}

// ---------------------------------------------------------------- loops --

/// A closed curve in the parameter chart.
#[derive(Debug, Clone)]
pub enum LoopCurve {
    /// Once around the `u` period at fixed `v`.
    ULoop { v: f64 },
    /// Once around the `v` period at fixed `u`.
    VLoop { u: f64 },
    /// Chart circle of the given radius around a centre.
    Circle { center: ParamPoint, radius: f64 },
    /// Expression pair `(u(t), v(t))` over `t` in `[0, 1]`.
    Exprs { u: ExprAst, v: ExprAst },
}

/// A sampled closed loop; endpoints must coincide exactly or modulo the
/// declared periods.
#[derive(Debug, Clone)]
pub struct LoopSpec {
    pub curve: LoopCurve,
    /// Initial sample count, at least 16; unwrapping refines beyond it as
    /// needed.
    pub samples: usize,
}

impl LoopSpec {
    pub fn new(curve: LoopCurve, samples: usize) -> Result<LoopSpec> {
        if samples < 16 {
            return Err(Error::Param(format!("loop needs >= 16 samples, got {samples}")));
        }
        Ok(LoopSpec { curve, samples })
    }

    fn point_at(&self, t: f64, domain: &Domain) -> Result<ParamPoint> {
        match &self.curve {
            LoopCurve::ULoop { v } => {
                let (lo, hi) = match domain {
                    Domain::Rect { u, .. } => *u,
                    _ => (0.0, std::f64::consts::TAU),
                };
                Ok(ParamPoint::new(lo + t * (hi - lo), *v))
            }
            LoopCurve::VLoop { u } => {
                let (lo, hi) = match domain {
                    Domain::Rect { v, .. } => *v,
                    _ => (0.0, std::f64::consts::TAU),
                };
                Ok(ParamPoint::new(*u, lo + t * (hi - lo)))
            }
            LoopCurve::Circle { center, radius } => {
                let phi = std::f64::consts::TAU * t;
                Ok(ParamPoint::new(
                    center.u + radius * phi.cos(),
                    center.v + radius * phi.sin(),
                ))
            }
            LoopCurve::Exprs { u, v } => {
                let q = ParamPoint::new(t, 0.0);
                Ok(ParamPoint::new(expr::eval_value(u, q)?, expr::eval_value(v, q)?))
            }
        }
    }

    /// Endpoint closure check: exact or modulo declared periods.
    fn validate_closed(&self, domain: &Domain) -> Result<()> {
        let a = self.point_at(0.0, domain)?;
        let b = self.point_at(1.0, domain)?;
        let close = |da: f64, period: Option<f64>| -> bool {
            match period {
                Some(p) => {
                    let r = (da / p).round();
                    (da - r * p).abs() < 1e-9
                }
                None => da.abs() < 1e-9,
            }
        };
        if close(b.u - a.u, domain.period_u()) && close(b.v - a.v, domain.period_v()) {
            Ok(())
        } else {
            Err(Error::Param(format!(
                "loop endpoints ({}, {}) and ({}, {}) do not close",
                a.u, a.v, b.u, b.v
            )))
        }
    }

    /// Requirements on the loop kinds: u/v loops only close on periodic
    /// directions.
    fn validate_kind(&self, domain: &Domain) -> Result<()> {
        match self.curve {
            LoopCurve::ULoop { .. } if domain.period_u().is_none() => Err(Error::Param(
                "u-loop requires a u-periodic domain".into(),
            )),
            LoopCurve::VLoop { .. } if domain.period_v().is_none() => Err(Error::Param(
                "v-loop requires a v-periodic domain".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Winding result: the integer Maslov index plus the raw phase integral.
#[derive(Debug, Clone, Copy)]
pub struct MaslovIndex {
    pub winding: i64,
    pub raw: f64,
    pub samples_used: usize,
}

/// `(1/2pi) ∮ alpha` by phase unwrapping of `eta` along the loop.
///
/// Principal-branch increments of `arg(eta)` are accumulated over the
/// sampled cycle; the sample count doubles until every increment is below
/// `pi/2`, which pins the unwrapping for any continuous `eta`. The Maslov
/// index is minus the winding of `eta` since `alpha = -d(beta)`.
pub fn maslov_index(spec: &ImmersionSpec, loop_spec: &LoopSpec) -> Result<MaslovIndex> {
    loop_spec.validate_kind(&spec.domain)?;
    loop_spec.validate_closed(&spec.domain)?;

    let mut n = loop_spec.samples.max(16);
    loop {
        match try_unwrap(spec, loop_spec, n)? {
            Some(total) => {
                let raw = -total / std::f64::consts::TAU;
                let winding = raw.round();
                if (raw - winding).abs() > 1e-6 {
                    return Err(Error::NonConvergence(format!(
                        "phase integral {raw} not near an integer"
                    )));
                }
                return Ok(MaslovIndex { winding: winding as i64, raw, samples_used: n });
            }
            None => {
                n *= 2;
                if n > MAX_LOOP_SAMPLES {
                    return Err(Error::NonConvergence(format!(
                        "loop unwrapping exceeded {MAX_LOOP_SAMPLES} samples"
                    )));
                }
            }
        }
    }
}

/// One unwrapping pass; `None` when some increment reached pi/2.
fn try_unwrap(spec: &ImmersionSpec, loop_spec: &LoopSpec, n: usize) -> Result<Option<f64>> {
    let mut args = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / n as f64;
        let p = loop_spec.point_at(t, &spec.domain)?;
        let jets = crate::geometry::immersion_jets(spec, p)?;
        let ff = crate::geometry::first_forms(&jets)?;
        let e = eta(&jets, &ff);
        if e.abs() < EPS_ETA {
            return Err(Error::UndefinedAngle(format!(
                "|eta| = {} on the loop at t = {t}",
                e.abs()
            )));
        }
        args.push(e.im.atan2(e.re));
    }
    let mut total = 0.0;
    for k in 0..n {
        let next = args[(k + 1) % n];
        let mut d = next - args[k];
        // principal-branch increment
        if d > std::f64::consts::PI {
            d -= std::f64::consts::TAU;
        } else if d < -std::f64::consts::PI {
            d += std::f64::consts::TAU;
        }
        if d.abs() >= std::f64::consts::FRAC_PI_2 {
            return Ok(None);
        }
        total += d;
    }
    Ok(Some(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::test_surfaces::*;
    use crate::geometry::{first_forms, immersion_jets, kahler_cos};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn eta_on_clifford_is_a_unit_phase() {
        for p in random_points(50, 3) {
            let jets = immersion_jets(&clifford(), p).unwrap();
            let ff = first_forms(&jets).unwrap();
            let e = eta(&jets, &ff);
            let expect = (p.u + p.v + PI, 1.0);
            assert_abs_diff_eq!(e.abs(), expect.1, epsilon = 1e-12);
            assert_abs_diff_eq!(e.re, expect.0.cos(), epsilon = 1e-12);
            assert_abs_diff_eq!(e.im, expect.0.sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn eta_on_catenoid_is_one() {
        for p in random_annulus_points(50, 5) {
            let jets = immersion_jets(&catenoid(), p).unwrap();
            let ff = first_forms(&jets).unwrap();
            let e = eta(&jets, &ff);
            assert_abs_diff_eq!(e.re, 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(e.im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn eta_vanishes_on_holomorphic_graphs() {
        let jets = immersion_jets(&holomorphic_square(), ParamPoint::new(0.7, -0.2)).unwrap();
        let ff = first_forms(&jets).unwrap();
        assert!(eta(&jets, &ff).abs() < 1e-10);
        assert!(matches!(
            lagrangian_angle(&eta(&jets, &ff)),
            Err(Error::UndefinedAngle(_))
        ));
    }

    #[test]
    fn principal_angles_on_the_three_catalog_surfaces() {
        let jets = immersion_jets(&clifford(), ParamPoint::new(0.0, 0.0)).unwrap();
        let ff = first_forms(&jets).unwrap();
        assert_abs_diff_eq!(lagrangian_angle(&eta(&jets, &ff)).unwrap(), PI, epsilon = 1e-14);

        let spec = plane(std::f64::consts::FRAC_PI_6, std::f64::consts::FRAC_PI_6);
        let jets = immersion_jets(&spec, ParamPoint::new(0.3, 0.7)).unwrap();
        let ff = first_forms(&jets).unwrap();
        assert_abs_diff_eq!(lagrangian_angle(&eta(&jets, &ff)).unwrap(), PI, epsilon = 1e-14);

        let jets = immersion_jets(&catenoid(), ParamPoint::new(1.0, 0.3)).unwrap();
        let ff = first_forms(&jets).unwrap();
        assert_abs_diff_eq!(lagrangian_angle(&eta(&jets, &ff)).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn maslov_form_golden_values() {
        let js = JetSurface::new(&clifford(), ParamPoint::new(0.8, 1.4)).unwrap();
        let m = maslov_form(&js).unwrap();
        assert_abs_diff_eq!(m.alpha_u, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.alpha_v, -1.0, epsilon = 1e-12);

        let js = JetSurface::new(&catenoid(), ParamPoint::new(0.9, 0.4)).unwrap();
        let m = maslov_form(&js).unwrap();
        assert_abs_diff_eq!(m.alpha_u, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.alpha_v, 0.0, epsilon = 1e-10);

        let spec = plane(0.4, 0.9);
        let js = JetSurface::new(&spec, ParamPoint::new(-2.0, 3.0)).unwrap();
        let m = maslov_form(&js).unwrap();
        assert_abs_diff_eq!(m.alpha_u, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.alpha_v, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eta_norm_matches_sin_theta_everywhere() {
        let surfaces = [clifford(), product_torus(2.0, 1.0), plane(0.3, 0.5), perturbed(0.12)];
        for surf in &surfaces {
            for p in random_points(100, 7) {
                let jets = immersion_jets(surf, p).unwrap();
                let ff = first_forms(&jets).unwrap();
                let c = kahler_cos(&ff);
                let e = eta(&jets, &ff);
                assert!((e.abs().powi(2) + c * c - 1.0).abs() < 1e-9);
            }
        }
        for p in random_annulus_points(100, 9) {
            let jets = immersion_jets(&catenoid(), p).unwrap();
            let ff = first_forms(&jets).unwrap();
            let c = kahler_cos(&ff);
            let e = eta(&jets, &ff);
            assert!((e.abs().powi(2) + c * c - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn maslov_form_is_closed() {
        // d(alpha) = 0: mixed partials of (alpha_u, alpha_v) cancel.
        // alpha as a field is differentiated through the eta jets.
        let surf = perturbed(0.15);
        for p in random_points(40, 21) {
            let js = JetSurface::new(&surf, p).unwrap();
            let eta_abs = js.eta_re.value().hypot(js.eta_im.value());
            if eta_abs <= 0.1 {
                continue;
            }
            // d/dv of alpha_u minus d/du of alpha_v via second derivatives
            let (re, im) = (js.eta_re, js.eta_im);
            let norm_sq = re * re + im * im;
            let num_u = re * im.d_du() - im * re.d_du();
            let num_v = re * im.d_dv() - im * re.d_dv();
            let dbeta_u = num_u.div(&norm_sq).unwrap();
            let dbeta_v = num_v.div(&norm_sq).unwrap();
            let curl = dbeta_u.deriv(0, 1) - dbeta_v.deriv(1, 0);
            assert!(curl.abs() < 1e-6, "curl = {curl} at ({}, {})", p.u, p.v);
        }
    }

    #[test]
    fn winding_on_clifford_u_loop_is_minus_one() {
        let idx = maslov_index(
            &clifford(),
            &LoopSpec::new(LoopCurve::ULoop { v: 0.0 }, 64).unwrap(),
        )
        .unwrap();
        assert_eq!(idx.winding, -1);
        assert!((idx.raw + 1.0).abs() < 1e-6);
    }

    #[test]
    fn winding_on_contractible_loop_is_zero() {
        let idx = maslov_index(
            &clifford(),
            &LoopSpec::new(
                LoopCurve::Circle { center: ParamPoint::new(3.0, 3.0), radius: 0.1 },
                64,
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(idx.winding, 0);
    }

    #[test]
    fn winding_on_catenoid_loop_is_zero() {
        let idx = maslov_index(
            &catenoid(),
            &LoopSpec::new(
                LoopCurve::Circle { center: ParamPoint::new(0.0, 0.0), radius: 1.0 },
                64,
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(idx.winding, 0);
        assert!(idx.raw.abs() < 1e-9);
    }

    #[test]
    fn winding_is_reparametrization_invariant() {
        // same u-loop written as an expression pair with a non-uniform speed
        let u_expr = crate::expr::parse_with_vars(
            "2*pi*t + 0.3*sin(2*pi*t)",
            "t",
            None,
        )
        .unwrap();
        let v_expr = crate::expr::parse_with_vars("1.2", "t", None).unwrap();
        let idx = maslov_index(
            &clifford(),
            &LoopSpec::new(LoopCurve::Exprs { u: u_expr, v: v_expr }, 64).unwrap(),
        )
        .unwrap();
        assert_eq!(idx.winding, -1);

        // doubling the sample count does not change the answer
        let idx2 = maslov_index(
            &clifford(),
            &LoopSpec::new(LoopCurve::ULoop { v: 0.0 }, 128).unwrap(),
        )
        .unwrap();
        assert_eq!(idx2.winding, -1);
    }

    #[test]
    fn v_loop_matches_u_loop_on_clifford() {
        let idx = maslov_index(
            &clifford(),
            &LoopSpec::new(LoopCurve::VLoop { u: 1.0 }, 64).unwrap(),
        )
        .unwrap();
        assert_eq!(idx.winding, -1);
    }

    #[test]
    fn open_loops_are_rejected() {
        let u_expr = crate::expr::parse_with_vars("t", "t", None).unwrap();
        let v_expr = crate::expr::parse_with_vars("0.5", "t", None).unwrap();
        let r = maslov_index(
            &catenoid(),
            &LoopSpec::new(LoopCurve::Exprs { u: u_expr, v: v_expr }, 64).unwrap(),
        );
        assert!(matches!(r, Err(Error::Param(_))));
    }

    #[test]
    fn theta_consistency_on_constant_angle_surfaces() {
        // sin^2(theta) * grad(beta) + (J H)^T vanishes when theta is constant
        use crate::geometry::{adapted_frame, second_forms, tangent_normal_split};
        let surf = product_torus(2.0, 1.0);
        for p in random_points(30, 33) {
            let js = JetSurface::new(&surf, p).unwrap();
            let jets = immersion_jets(&surf, p).unwrap();
            let ff = first_forms(&jets).unwrap();
            let frame = adapted_frame(&ff).unwrap();
            let sf = second_forms(&jets, &frame, &ff);
            let grad_beta = beta_gradient(&js).unwrap();
            let jh = sf.mean_vector.j();
            let (t, _) = tangent_normal_split(&jh, &frame);
            let jh_tan = frame.e1.scale(t[0]) + frame.e2.scale(t[1]);
            let sin_sq = 1.0 - frame.cos_theta * frame.cos_theta;
            let resid = (grad_beta.scale(sin_sq) + jh_tan).norm();
            assert!(resid < 1e-10, "residual {resid}");
        }
    }

    #[test]
    fn loop_sample_floor_is_enforced() {
        assert!(LoopSpec::new(LoopCurve::ULoop { v: 0.0 }, 8).is_err());
        let _ = TAU;
    }
}
