//! Per-point summary bundle used by reports and the language bindings.

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{dbar_jm_norm_sq, QuadratureGrid};
use crate::error::Result;
use crate::geometry::{
    adapted_frame, first_forms, generic_normal_frame, immersion_jets, kahler_cos, second_forms,
    tangent_normal_split, ImmersionSpec,
};
use crate::jet::ParamPoint;
use crate::lagrangian::{eta, lagrangian_angle};

/// Everything the `analyze` command reports for one surface point.
///
/// `mean3`/`mean4` are components against the frame actually used: the
/// adapted one where it exists, otherwise the generic fallback (flagged by
/// `adapted_frame`; in that regime they are frame-relative). `beta` and
/// `dbar_jm_sq` are absent at complex points, where they do not exist.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceData {
    pub u: f64,
    pub v: f64,
    pub cos_theta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub eta_re: f64,
    pub eta_im: f64,
    pub eta_abs: f64,
    pub norm_h_sq: f64,
    pub mean3: f64,
    pub mean4: f64,
    pub mean_norm: f64,
    pub shrinker_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dbar_jm_sq: Option<f64>,
    pub gauss_k: f64,
    pub adapted_frame: bool,
}

pub fn surface_data(spec: &ImmersionSpec, p: ParamPoint) -> Result<SurfaceData> {
    let jets = immersion_jets(spec, p)?;
    let ff = first_forms(&jets)?;
    let frame = match adapted_frame(&ff) {
        Ok(f) => f,
        Err(_) => generic_normal_frame(&ff),
    };
    let sf = second_forms(&jets, &frame, &ff);
    let e = eta(&jets, &ff);
    let beta = lagrangian_angle(&e).ok();
    let dbar = dbar_jm_norm_sq(&sf).ok();
    let (t, _) = tangent_normal_split(&ff.x, &frame);
    let x_perp = ff.x - frame.e1.scale(t[0]) - frame.e2.scale(t[1]);
    Ok(SurfaceData {
        u: p.u,
        v: p.v,
        cos_theta: kahler_cos(&ff),
        beta,
        eta_re: e.re,
        eta_im: e.im,
        eta_abs: e.abs(),
        norm_h_sq: sf.norm_h_sq,
        mean3: sf.mean3,
        mean4: sf.mean4,
        mean_norm: sf.mean_vector.norm(),
        shrinker_residual: (sf.mean_vector + x_perp).norm(),
        dbar_jm_sq: dbar,
        gauss_k: sf.gauss_k,
        adapted_frame: frame.adapted,
    })
}

/// Evaluate the bundle at every grid node, in node order.
pub fn surface_data_grid(spec: &ImmersionSpec, grid: &QuadratureGrid) -> Result<Vec<SurfaceData>> {
    grid.nodes
        .par_iter()
        .map(|&(p, _)| surface_data(spec, p))
        .collect()
}
