//! Ambient structure of C^2 = R^4 and per-point surface geometry.
//!
//! Coordinates are fixed in the order `(x1, y1, x2, y2)`, so the complex
//! structure acts as `J(a, b, c, d) = (-b, a, -d, c)`. All golden values in
//! tests are stated in this order. The Kähler angle `theta` of a surface is
//! read off the pulled-back Kähler form, `cos(theta) = <J x_u, x_v> /
//! sqrt(det g)`, and the adapted normal frame solves
//!
//! ```text
//! J e1 =  cos(theta) e2 + sin(theta) e3
//! J e2 = -cos(theta) e1 + sin(theta) e4
//! ```
//!
//! which degenerates when `sin(theta)` vanishes; below [`EPS_ADAPT`] the
//! adapted construction reports [`Error::NearComplex`] and callers fall back
//! to [`generic_normal_frame`].

use crate::error::{Error, Result};
use crate::expr::{self, ExprAst};
use crate::jet::{Jet3, ParamPoint};

/// Cutoff on sin(theta) below which the adapted frame division is dominated
/// by round-off.
pub const EPS_ADAPT: f64 = 1e-8;

/// Gram-determinant threshold below which the differential is treated as
/// rank deficient.
pub const RANK_EPS: f64 = 1e-14;

// ------------------------------------------------------------- vectors --

/// A vector of R^4 in the fixed coordinate order `(x1, y1, x2, y2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientVector(pub [f64; 4]);

impl AmbientVector {
    pub fn zero() -> Self {
        AmbientVector([0.0; 4])
    }

    pub fn dot(&self, rhs: &AmbientVector) -> f64 {
        self.0.iter().zip(rhs.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// The complex structure: `J(a, b, c, d) = (-b, a, -d, c)`.
    pub fn j(&self) -> AmbientVector {
        let [a, b, c, d] = self.0;
        AmbientVector([-b, a, -d, c])
    }

    /// Kähler form `omega(self, rhs) = <J self, rhs>`.
    pub fn omega(&self, rhs: &AmbientVector) -> f64 {
        self.j().dot(rhs)
    }

    /// Holomorphic volume form `dz1 ^ dz2` on the pair, as `(re, im)`.
    pub fn omega_holo(&self, rhs: &AmbientVector) -> (f64, f64) {
        let (a1, a2) = (self.0[0], self.0[1]);
        let (a3, a4) = (self.0[2], self.0[3]);
        let (b1, b2) = (rhs.0[0], rhs.0[1]);
        let (b3, b4) = (rhs.0[2], rhs.0[3]);
        // (a1 + i a2)(b3 + i b4) - (b1 + i b2)(a3 + i a4)
        let re = a1 * b3 - a2 * b4 - (b1 * a3 - b2 * a4);
        let im = a1 * b4 + a2 * b3 - (b1 * a4 + b2 * a3);
        (re, im)
    }

    pub fn scale(&self, s: f64) -> AmbientVector {
        AmbientVector([self.0[0] * s, self.0[1] * s, self.0[2] * s, self.0[3] * s])
    }
}

impl std::ops::Add for AmbientVector {
    type Output = AmbientVector;
    fn add(self, rhs: AmbientVector) -> AmbientVector {
        AmbientVector([
            self.0[0] + rhs.0[0],
            self.0[1] + rhs.0[1],
            self.0[2] + rhs.0[2],
            self.0[3] + rhs.0[3],
        ])
    }
}

impl std::ops::Sub for AmbientVector {
    type Output = AmbientVector;
    fn sub(self, rhs: AmbientVector) -> AmbientVector {
        AmbientVector([
            self.0[0] - rhs.0[0],
            self.0[1] - rhs.0[1],
            self.0[2] - rhs.0[2],
            self.0[3] - rhs.0[3],
        ])
    }
}

impl std::ops::Neg for AmbientVector {
    type Output = AmbientVector;
    fn neg(self) -> AmbientVector {
        self.scale(-1.0)
    }
}

fn det4(cols: [AmbientVector; 4]) -> f64 {
    // cofactor expansion along the first column of the column matrix
    let m = |r: usize, c: usize| cols[c].0[r];
    let det3 = |r: [usize; 3], c: [usize; 3]| -> f64 {
        m(r[0], c[0]) * (m(r[1], c[1]) * m(r[2], c[2]) - m(r[1], c[2]) * m(r[2], c[1]))
            - m(r[0], c[1]) * (m(r[1], c[0]) * m(r[2], c[2]) - m(r[1], c[2]) * m(r[2], c[0]))
            + m(r[0], c[2]) * (m(r[1], c[0]) * m(r[2], c[1]) - m(r[1], c[1]) * m(r[2], c[0]))
    };
    let rows = [
        [1usize, 2, 3],
        [0, 2, 3],
        [0, 1, 3],
        [0, 1, 2],
    ];
    let mut acc = 0.0;
    let mut sign = 1.0;
    for r in 0..4 {
        acc += sign * m(r, 0) * det3(rows[r], [1, 2, 3]);
        sign = -sign;
    }
    acc
}

// -------------------------------------------------------------- domains --

/// Parameter domain of an immersion.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Rectangle, possibly unbounded, with per-direction periodicity.
    /// Periodic directions accept any parameter value (the chart repeats).
    Rect {
        u: (f64, f64),
        v: (f64, f64),
        periodic_u: bool,
        periodic_v: bool,
    },
    /// Annulus `inner <= sqrt(u^2 + v^2) <= outer` in the (u, v) chart.
    Annulus { inner: f64, outer: f64 },
}

impl Domain {
    pub fn contains(&self, p: ParamPoint) -> bool {
        if !(p.u.is_finite() && p.v.is_finite()) {
            return false;
        }
        match *self {
            Domain::Rect { u, v, periodic_u, periodic_v } => {
                let in_u = periodic_u || (p.u >= u.0 && p.u <= u.1);
                let in_v = periodic_v || (p.v >= v.0 && p.v <= v.1);
                in_u && in_v
            }
            Domain::Annulus { inner, outer } => {
                let r = (p.u * p.u + p.v * p.v).sqrt();
                r >= inner && r <= outer
            }
        }
    }

    pub fn period_u(&self) -> Option<f64> {
        match *self {
            Domain::Rect { u, periodic_u: true, .. } => Some(u.1 - u.0),
            _ => None,
        }
    }

    pub fn period_v(&self) -> Option<f64> {
        match *self {
            Domain::Rect { v, periodic_v: true, .. } => Some(v.1 - v.0),
            _ => None,
        }
    }

    /// Closed surfaces are exactly the doubly periodic rectangles.
    pub fn is_closed(&self) -> bool {
        matches!(
            self,
            Domain::Rect { periodic_u: true, periodic_v: true, .. }
        )
    }

    pub fn describe(&self) -> String {
        match *self {
            Domain::Rect { u, v, periodic_u, periodic_v } => format!(
                "u in [{}, {}]{}, v in [{}, {}]{}",
                u.0,
                u.1,
                if periodic_u { " (periodic)" } else { "" },
                v.0,
                v.1,
                if periodic_v { " (periodic)" } else { "" },
            ),
            Domain::Annulus { inner, outer } => {
                format!("annulus {inner} <= |(u,v)| <= {outer}")
            }
        }
    }
}

// ------------------------------------------------------------ immersion --

/// A parametric surface `(u, v) -> (x1, y1, x2, y2)` given by four
/// expressions plus domain metadata.
#[derive(Debug, Clone)]
pub struct ImmersionSpec {
    pub name: String,
    pub components: [ExprAst; 4],
    pub domain: Domain,
}

impl ImmersionSpec {
    pub fn from_definition(def: &expr::SurfaceDefinition, fallback_name: &str) -> Self {
        ImmersionSpec {
            name: def.name.clone().unwrap_or_else(|| fallback_name.to_string()),
            components: def.components.clone(),
            domain: Domain::Rect {
                u: def.domain_u,
                v: def.domain_v,
                periodic_u: def.periodic_u,
                periodic_v: def.periodic_v,
            },
        }
    }

    /// Ambient position by plain value evaluation.
    pub fn position(&self, p: ParamPoint) -> Result<AmbientVector> {
        if !self.domain.contains(p) {
            return Err(Error::Domain(format!(
                "point ({}, {}) outside domain of '{}'",
                p.u, p.v, self.name
            )));
        }
        let mut out = [0.0; 4];
        for (k, c) in self.components.iter().enumerate() {
            out[k] = expr::eval_value(c, p)?;
        }
        Ok(AmbientVector(out))
    }
}

/// Order-3 jets of the four ambient components at one parameter point.
#[derive(Debug, Clone)]
pub struct SurfaceJets {
    pub p: ParamPoint,
    pub x: [Jet3; 4],
}

/// Evaluate the component jets and check the immersion has rank 2.
pub fn immersion_jets(spec: &ImmersionSpec, p: ParamPoint) -> Result<SurfaceJets> {
    if !spec.domain.contains(p) {
        return Err(Error::Domain(format!(
            "point ({}, {}) outside domain of '{}'",
            p.u, p.v, spec.name
        )));
    }
    let mut x = [Jet3::zero(); 4];
    for (k, c) in spec.components.iter().enumerate() {
        x[k] = expr::eval_jet(c, p)?;
    }
    let jets = SurfaceJets { p, x };
    let (xu, xv) = (jets.x_u(), jets.x_v());
    let gram = xu.norm_sq() * xv.norm_sq() - xu.dot(&xv).powi(2);
    if !(gram.is_finite()) || gram < RANK_EPS {
        return Err(Error::Rank(format!(
            "differential of '{}' has Gram determinant {gram} at ({}, {})",
            spec.name, p.u, p.v
        )));
    }
    Ok(jets)
}

impl SurfaceJets {
    pub fn position(&self) -> AmbientVector {
        AmbientVector([self.x[0].value(), self.x[1].value(), self.x[2].value(), self.x[3].value()])
    }

    pub fn x_u(&self) -> AmbientVector {
        AmbientVector([
            self.x[0].deriv(1, 0),
            self.x[1].deriv(1, 0),
            self.x[2].deriv(1, 0),
            self.x[3].deriv(1, 0),
        ])
    }

    pub fn x_v(&self) -> AmbientVector {
        AmbientVector([
            self.x[0].deriv(0, 1),
            self.x[1].deriv(0, 1),
            self.x[2].deriv(0, 1),
            self.x[3].deriv(0, 1),
        ])
    }

    /// Coordinate Hessian vectors (x_uu, x_uv, x_vv).
    pub fn hessian(&self) -> [AmbientVector; 3] {
        let pick = |a: usize, b: usize| {
            AmbientVector([
                self.x[0].deriv(a, b),
                self.x[1].deriv(a, b),
                self.x[2].deriv(a, b),
                self.x[3].deriv(a, b),
            ])
        };
        [pick(2, 0), pick(1, 1), pick(0, 2)]
    }
}

// ---------------------------------------------------------- first forms --

/// Induced metric data at a point.
#[derive(Debug, Clone, Copy)]
pub struct FirstForms {
    pub x: AmbientVector,
    pub x_u: AmbientVector,
    pub x_v: AmbientVector,
    pub g: [[f64; 2]; 2],
    pub g_inv: [[f64; 2]; 2],
    pub det_g: f64,
    pub sqrt_det_g: f64,
}

pub fn first_forms(jets: &SurfaceJets) -> Result<FirstForms> {
    let (x_u, x_v) = (jets.x_u(), jets.x_v());
    let g11 = x_u.norm_sq();
    let g12 = x_u.dot(&x_v);
    let g22 = x_v.norm_sq();
    let det_g = g11 * g22 - g12 * g12;
    if !(det_g.is_finite()) || det_g < RANK_EPS {
        return Err(Error::Rank(format!("metric determinant {det_g} too small")));
    }
    Ok(FirstForms {
        x: jets.position(),
        x_u,
        x_v,
        g: [[g11, g12], [g12, g22]],
        g_inv: [[g22 / det_g, -g12 / det_g], [-g12 / det_g, g11 / det_g]],
        det_g,
        sqrt_det_g: det_g.sqrt(),
    })
}

/// Kähler angle cosine: the pulled-back Kähler form divided by the area
/// density, clamped into [-1, 1] against round-off.
pub fn kahler_cos(ff: &FirstForms) -> f64 {
    let raw = ff.x_u.omega(&ff.x_v) / ff.sqrt_det_g;
    debug_assert!(raw.abs() <= 1.0 + 1e-12, "cos(theta) = {raw} out of range");
    raw.clamp(-1.0, 1.0)
}

// --------------------------------------------------------------- frames --

/// Orthonormal frame `{e1, e2, e3, e4}` along the surface; `adapted` marks
/// frames whose normals solve the Kähler-angle relations.
#[derive(Debug, Clone, Copy)]
pub struct TangentFrame {
    pub e1: AmbientVector,
    pub e2: AmbientVector,
    pub e3: AmbientVector,
    pub e4: AmbientVector,
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub adapted: bool,
}

impl TangentFrame {
    pub fn e(&self, index: usize) -> &AmbientVector {
        match index {
            0 => &self.e1,
            1 => &self.e2,
            2 => &self.e3,
            _ => &self.e4,
        }
    }

    /// Rotate the tangent pair by `phi`. For adapted frames the normals are
    /// rebuilt from the frame relations (and come out rotated by `phi` as
    /// well); for generic frames they are rotated directly.
    pub fn rotated(&self, phi: f64) -> TangentFrame {
        let (s, c) = phi.sin_cos();
        let e1 = self.e1.scale(c) + self.e2.scale(s);
        let e2 = self.e2.scale(c) - self.e1.scale(s);
        let (e3, e4) = if self.adapted {
            (
                (e1.j() - e2.scale(self.cos_theta)).scale(1.0 / self.sin_theta),
                (e2.j() + e1.scale(self.cos_theta)).scale(1.0 / self.sin_theta),
            )
        } else {
            (
                self.e3.scale(c) + self.e4.scale(s),
                self.e4.scale(c) - self.e3.scale(s),
            )
        };
        TangentFrame { e1, e2, e3, e4, ..*self }
    }
}

fn gram_schmidt_tangent(ff: &FirstForms) -> (AmbientVector, AmbientVector) {
    let e1 = ff.x_u.scale(1.0 / ff.x_u.norm());
    let w = ff.x_v - e1.scale(ff.x_v.dot(&e1));
    let e2 = w.scale(1.0 / w.norm());
    (e1, e2)
}

/// Adapted frame: normals solving the Kähler-angle relations. Fails with
/// [`Error::NearComplex`] when `sin(theta) < EPS_ADAPT`.
pub fn adapted_frame(ff: &FirstForms) -> Result<TangentFrame> {
    let (e1, e2) = gram_schmidt_tangent(ff);
    let cos_theta = kahler_cos(ff);
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    if sin_theta < EPS_ADAPT {
        return Err(Error::NearComplex(format!(
            "sin(theta) = {sin_theta} below adapted-frame cutoff"
        )));
    }
    let e3 = (e1.j() - e2.scale(cos_theta)).scale(1.0 / sin_theta);
    let e4 = (e2.j() + e1.scale(cos_theta)).scale(1.0 / sin_theta);
    Ok(TangentFrame { e1, e2, e3, e4, cos_theta, sin_theta, adapted: true })
}

/// Fallback orthonormal normal frame via Gram-Schmidt against the ambient
/// axes, oriented so `det(e1, e2, e3, e4) = +1`. Valid at every regular
/// point, including complex ones.
pub fn generic_normal_frame(ff: &FirstForms) -> TangentFrame {
    let (e1, e2) = gram_schmidt_tangent(ff);
    let cos_theta = kahler_cos(ff);
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();

    let residual = |axis: usize, produced: &[AmbientVector]| {
        let mut w = AmbientVector::zero();
        w.0[axis] = 1.0;
        w = w - e1.scale(w.dot(&e1)) - e2.scale(w.dot(&e2));
        for q in produced {
            w = w - q.scale(w.dot(q));
        }
        w
    };

    let mut normals: Vec<AmbientVector> = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut best = (0.0_f64, AmbientVector::zero());
        for axis in 0..4 {
            let w = residual(axis, &normals);
            let n = w.norm();
            if n > best.0 {
                best = (n, w.scale(1.0 / n));
            }
        }
        normals.push(best.1);
    }
    let e3 = normals[0];
    let mut e4 = normals[1];
    if det4([e1, e2, e3, e4]) < 0.0 {
        e4 = -e4;
    }
    TangentFrame { e1, e2, e3, e4, cos_theta, sin_theta, adapted: false }
}

// ---------------------------------------------------------- second form --

/// Second fundamental form components in a given orthonormal frame, plus
/// derived curvature scalars.
#[derive(Debug, Clone, Copy)]
pub struct SecondForms {
    pub h3: [[f64; 2]; 2],
    pub h4: [[f64; 2]; 2],
    /// Mean curvature components `H^3 = h3_11 + h3_22`, `H^4` likewise.
    pub mean3: f64,
    pub mean4: f64,
    /// Mean curvature vector `H = H^3 e3 + H^4 e4` in ambient coordinates.
    pub mean_vector: AmbientVector,
    pub norm_h_sq: f64,
    pub gauss_k: f64,
    /// Whether the frame used for the components was adapted.
    pub adapted_frame: bool,
}

impl SecondForms {
    pub fn h(&self, a: usize, i: usize, j: usize) -> f64 {
        if a == 0 {
            self.h3[i][j]
        } else {
            self.h4[i][j]
        }
    }
}

/// Coordinate components `(a_i, b_i)` of a tangent vector: `w = a x_u + b x_v`.
pub fn tangent_coordinates(ff: &FirstForms, w: &AmbientVector) -> (f64, f64) {
    let p = w.dot(&ff.x_u);
    let q = w.dot(&ff.x_v);
    (
        ff.g_inv[0][0] * p + ff.g_inv[0][1] * q,
        ff.g_inv[1][0] * p + ff.g_inv[1][1] * q,
    )
}

/// Second fundamental form by contracting the coordinate Hessian with the
/// frame: `h^a_ij = sum_kl c_i^k c_j^l <x_kl, e_a>`.
pub fn second_forms(jets: &SurfaceJets, frame: &TangentFrame, ff: &FirstForms) -> SecondForms {
    let [x_uu, x_uv, x_vv] = jets.hessian();
    let c1 = tangent_coordinates(ff, &frame.e1);
    let c2 = tangent_coordinates(ff, &frame.e2);
    let coords = [c1, c2];

    let mut h = [[[0.0_f64; 2]; 2]; 2];
    for (a, normal) in [frame.e3, frame.e4].iter().enumerate() {
        let m = [
            [x_uu.dot(normal), x_uv.dot(normal)],
            [x_uv.dot(normal), x_vv.dot(normal)],
        ];
        for i in 0..2 {
            for j in 0..2 {
                let (ai, bi) = coords[i];
                let (aj, bj) = coords[j];
                h[a][i][j] = ai * aj * m[0][0]
                    + (ai * bj + bi * aj) * m[0][1]
                    + bi * bj * m[1][1];
            }
        }
    }

    let mean3 = h[0][0][0] + h[0][1][1];
    let mean4 = h[1][0][0] + h[1][1][1];
    let mean_vector = frame.e3.scale(mean3) + frame.e4.scale(mean4);
    let mut norm_h_sq = 0.0;
    for a in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                norm_h_sq += h[a][i][j] * h[a][i][j];
            }
        }
    }
    let gauss_k = h[0][0][0] * h[0][1][1] - h[0][0][1] * h[0][0][1]
        + h[1][0][0] * h[1][1][1] - h[1][0][1] * h[1][0][1];

    SecondForms {
        h3: h[0],
        h4: h[1],
        mean3,
        mean4,
        mean_vector,
        norm_h_sq,
        gauss_k,
        adapted_frame: frame.adapted,
    }
}

/// Decompose `vec = t1 e1 + t2 e2 + n3 e3 + n4 e4`.
pub fn tangent_normal_split(
    vec: &AmbientVector,
    frame: &TangentFrame,
) -> ([f64; 2], [f64; 2]) {
    (
        [vec.dot(&frame.e1), vec.dot(&frame.e2)],
        [vec.dot(&frame.e3), vec.dot(&frame.e4)],
    )
}

// ------------------------------------------------------------ jet level --

/// Componentwise jet vector helpers for the frame-field machinery.
pub(crate) type JetVec = [Jet3; 4];

pub(crate) fn jv_value(w: &JetVec) -> AmbientVector {
    AmbientVector([w[0].value(), w[1].value(), w[2].value(), w[3].value()])
}

pub(crate) fn jv_dot(a: &JetVec, b: &JetVec) -> Jet3 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

pub(crate) fn jv_j(w: &JetVec) -> JetVec {
    [-w[1], w[0], -w[3], w[2]]
}

pub(crate) fn jv_scale(w: &JetVec, s: &Jet3) -> JetVec {
    [w[0] * *s, w[1] * *s, w[2] * *s, w[3] * *s]
}

pub(crate) fn jv_add(a: &JetVec, b: &JetVec) -> JetVec {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

pub(crate) fn jv_sub(a: &JetVec, b: &JetVec) -> JetVec {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

/// Directional derivative value of a jet vector field along the coordinate
/// direction `(du, dv)` evaluated at the base point.
pub(crate) fn jv_dir_deriv(w: &JetVec, du: f64, dv: f64) -> AmbientVector {
    AmbientVector([
        du * w[0].deriv(1, 0) + dv * w[0].deriv(0, 1),
        du * w[1].deriv(1, 0) + dv * w[1].deriv(0, 1),
        du * w[2].deriv(1, 0) + dv * w[2].deriv(0, 1),
        du * w[3].deriv(1, 0) + dv * w[3].deriv(0, 1),
    ])
}

/// First-form data as jet fields: everything needed to differentiate the
/// metric, the Kähler angle and the complex density through order 2.
pub struct JetSurface {
    pub p: ParamPoint,
    pub x: JetVec,
    pub xu: JetVec,
    pub xv: JetVec,
    pub g11: Jet3,
    pub g12: Jet3,
    pub g22: Jet3,
    pub det_g: Jet3,
    pub sqrt_det_g: Jet3,
    pub g_inv: [[Jet3; 2]; 2],
    pub cos_theta: Jet3,
    pub eta_re: Jet3,
    pub eta_im: Jet3,
}

impl JetSurface {
    pub fn new(spec: &ImmersionSpec, p: ParamPoint) -> Result<JetSurface> {
        let jets = immersion_jets(spec, p)?;
        Self::from_jets(jets)
    }

    pub fn from_jets(jets: SurfaceJets) -> Result<JetSurface> {
        let x = jets.x;
        let xu = [x[0].d_du(), x[1].d_du(), x[2].d_du(), x[3].d_du()];
        let xv = [x[0].d_dv(), x[1].d_dv(), x[2].d_dv(), x[3].d_dv()];
        let g11 = jv_dot(&xu, &xu);
        let g12 = jv_dot(&xu, &xv);
        let g22 = jv_dot(&xv, &xv);
        let det_g = g11 * g22 - g12 * g12;
        if !(det_g.value().is_finite()) || det_g.value() < RANK_EPS {
            return Err(Error::Rank(format!(
                "metric determinant {} too small",
                det_g.value()
            )));
        }
        let sqrt_det_g = det_g.sqrt()?;
        let inv_det = det_g.recip()?;
        let g_inv = [
            [g22 * inv_det, -(g12 * inv_det)],
            [-(g12 * inv_det), g11 * inv_det],
        ];
        let cos_theta = jv_dot(&jv_j(&xu), &xv).div(&sqrt_det_g)?;

        // eta = Omega(x_u, x_v) / sqrt(det g), complex arithmetic on jets
        let (a1, a2, a3, a4) = (xu[0], xu[1], xu[2], xu[3]);
        let (b1, b2, b3, b4) = (xv[0], xv[1], xv[2], xv[3]);
        let omega_re = a1 * b3 - a2 * b4 - (b1 * a3 - b2 * a4);
        let omega_im = a1 * b4 + a2 * b3 - (b1 * a4 + b2 * a3);
        let eta_re = omega_re.div(&sqrt_det_g)?;
        let eta_im = omega_im.div(&sqrt_det_g)?;

        Ok(JetSurface {
            p: jets.p,
            x,
            xu,
            xv,
            g11,
            g12,
            g22,
            det_g,
            sqrt_det_g,
            g_inv,
            cos_theta,
            eta_re,
            eta_im,
        })
    }

    pub fn position(&self) -> AmbientVector {
        jv_value(&self.x)
    }

    pub fn first_forms(&self) -> FirstForms {
        FirstForms {
            x: jv_value(&self.x),
            x_u: jv_value(&self.xu),
            x_v: jv_value(&self.xv),
            g: [[self.g11.value(), self.g12.value()], [self.g12.value(), self.g22.value()]],
            g_inv: [
                [self.g_inv[0][0].value(), self.g_inv[0][1].value()],
                [self.g_inv[1][0].value(), self.g_inv[1][1].value()],
            ],
            det_g: self.det_g.value(),
            sqrt_det_g: self.sqrt_det_g.value(),
        }
    }
}

/// Adapted frame as jet fields, valid to order 2; carries the tangent
/// coordinate fields `e_i = coord[i][0] x_u + coord[i][1] x_v` alongside.
pub(crate) struct JetFrame {
    pub e: [JetVec; 4],
    pub coord: [[Jet3; 2]; 2],
    pub sin_theta: Jet3,
}

impl JetFrame {
    pub fn adapted(js: &JetSurface) -> Result<JetFrame> {
        let c0 = js.cos_theta.value();
        let sin_value = (1.0 - c0 * c0).max(0.0).sqrt();
        if sin_value < EPS_ADAPT {
            return Err(Error::NearComplex(format!(
                "sin(theta) = {sin_value} below adapted-frame cutoff"
            )));
        }
        let sin_theta = (Jet3::constant(1.0) - js.cos_theta * js.cos_theta).sqrt()?;

        let n1 = js.g11.sqrt()?;
        let inv_n1 = n1.recip()?;
        let e1 = jv_scale(&js.xu, &inv_n1);
        // e2 = (x_v - (g12/g11) x_u) * n1 / sqrt(det g)
        let w_coeff = js.g12.div(&js.g11)?;
        let scale2 = n1.div(&js.sqrt_det_g)?;
        let w = jv_sub(&js.xv, &jv_scale(&js.xu, &w_coeff));
        let e2 = jv_scale(&w, &scale2);
        let coord = [
            [inv_n1, Jet3::zero()],
            [-(w_coeff * scale2), scale2],
        ];

        let inv_sin = sin_theta.recip()?;
        let e3 = jv_scale(
            &jv_sub(&jv_j(&e1), &jv_scale(&e2, &js.cos_theta)),
            &inv_sin,
        );
        let e4 = jv_scale(
            &jv_add(&jv_j(&e2), &jv_scale(&e1, &js.cos_theta)),
            &inv_sin,
        );
        Ok(JetFrame { e: [e1, e2, e3, e4], coord, sin_theta })
    }

    pub fn frame(&self, cos_theta: f64) -> TangentFrame {
        TangentFrame {
            e1: jv_value(&self.e[0]),
            e2: jv_value(&self.e[1]),
            e3: jv_value(&self.e[2]),
            e4: jv_value(&self.e[3]),
            cos_theta,
            sin_theta: self.sin_theta.value(),
            adapted: true,
        }
    }
}
