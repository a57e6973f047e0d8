//! Self-shrinker residual, Gaussian-weighted area, its first variation,
//! and critical-point search over parametric families.
//!
//! The search minimises `G = |grad F|^2` rather than F itself: shrinkers
//! can be saddles or maxima of the weighted area (the unit torus maximises
//! it within the product family), so criticality, not minimisation, is the
//! right target. Parameter gradients are central differences through the
//! family builder; builders are arbitrary code over the parameter vector,
//! so nothing differentiates through them exactly.
//!
//! The classical first-variation identity
//! `dF/dt = -\int <H + x_perp, V> exp(-|x|^2/2) dV` links the optimiser to
//! the pointwise shrinker equation `H = -x_perp` and serves as the
//! independent oracle for the finite-difference gradients.

use serde::Serialize;

use crate::calculus::{gaussian_area as area_of_spec, pairwise_sum, QuadratureGrid};
use crate::catalog;
use crate::error::{Error, Result};
use crate::geometry::{
    first_forms, generic_normal_frame, immersion_jets, second_forms, tangent_normal_split,
    AmbientVector, ImmersionSpec,
};
use crate::jet::ParamPoint;

/// Shrinker defect `R = H + x_perp` at a point, in ambient coordinates,
/// with its Euclidean norm. Works at every regular point: the mean
/// curvature vector does not depend on the normal frame choice.
pub fn shrinker_residual(spec: &ImmersionSpec, p: ParamPoint) -> Result<(AmbientVector, f64)> {
    let jets = immersion_jets(spec, p)?;
    let ff = first_forms(&jets)?;
    let frame = generic_normal_frame(&ff);
    let sf = second_forms(&jets, &frame, &ff);
    let (t, _) = tangent_normal_split(&ff.x, &frame);
    let x_perp = ff.x - frame.e1.scale(t[0]) - frame.e2.scale(t[1]);
    let r = sf.mean_vector + x_perp;
    let norm = r.norm();
    Ok((r, norm))
}

// -------------------------------------------------------------- families --

/// Parametric family of closed surfaces searched for shrinkers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Product tori `(r, s)`.
    ProductTorus,
    /// One circle radius `r`, the other fixed at 1; the Gaussian length of
    /// a circle of radius `r` factors out, so the critical radius doubles
    /// as a round-circle cross-check.
    Scaling,
    /// Fourier perturbation coefficients of the unit torus.
    Fourier { dim: usize },
}

impl Family {
    pub fn dim(&self) -> usize {
        match *self {
            Family::ProductTorus => 2,
            Family::Scaling => 1,
            Family::Fourier { dim } => dim,
        }
    }

    /// Box the search is projected into; builders stay valid inside it.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match *self {
            Family::ProductTorus => vec![(0.05, 5.0); 2],
            Family::Scaling => vec![(0.05, 5.0)],
            Family::Fourier { dim } => {
                let a = 0.19 / dim as f64;
                vec![(-a, a); dim]
            }
        }
    }

    pub fn build(&self, pi: &[f64]) -> Result<ImmersionSpec> {
        if pi.len() != self.dim() {
            return Err(Error::Param(format!(
                "family takes {} parameters, got {}",
                self.dim(),
                pi.len()
            )));
        }
        match *self {
            Family::ProductTorus => catalog::product_torus(pi[0], pi[1]),
            Family::Scaling => catalog::product_torus(pi[0], 1.0),
            Family::Fourier { .. } => catalog::perturbed_torus(pi),
        }
    }

    /// Parse a CLI family argument: `product`, `scaling` or `fourier:k`.
    pub fn from_arg(arg: &str) -> Result<Family> {
        match arg.split_once(':') {
            None => match arg {
                "product" => Ok(Family::ProductTorus),
                "scaling" => Ok(Family::Scaling),
                "fourier" => Ok(Family::Fourier { dim: 2 }),
                other => Err(Error::Param(format!("unknown family '{other}'"))),
            },
            Some(("fourier", k)) => {
                let dim: usize = k
                    .parse()
                    .map_err(|_| Error::Param(format!("bad fourier dimension '{k}'")))?;
                if (1..=6).contains(&dim) {
                    Ok(Family::Fourier { dim })
                } else {
                    Err(Error::Param("fourier dimension must be 1..=6".into()))
                }
            }
            Some((other, _)) => Err(Error::Param(format!("unknown family '{other}'"))),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Family::ProductTorus => "product".into(),
            Family::Scaling => "scaling".into(),
            Family::Fourier { dim } => format!("fourier:{dim}"),
        }
    }

    fn project(&self, pi: &mut [f64]) {
        for (x, (lo, hi)) in pi.iter_mut().zip(self.bounds()) {
            *x = x.clamp(lo, hi);
        }
    }
}

/// Gaussian-weighted area of the family member at `pi`.
pub fn gaussian_area(family: Family, pi: &[f64], grid: &QuadratureGrid) -> Result<f64> {
    let spec = family.build(pi)?;
    if !spec.domain.is_closed() {
        return Err(Error::UnsupportedDomain(
            "weighted area without truncation needs a closed surface".into(),
        ));
    }
    area_of_spec(&spec, grid)
}

/// Default parameter step for finite differences through builders.
pub const DEFAULT_PARAM_STEP: f64 = 1e-5;

/// Cap on one line-search move in parameter space.
const MAX_STEP_LENGTH: f64 = 0.2;

/// Central-difference gradient of the weighted area in parameter space.
pub fn family_gradient(
    family: Family,
    pi: &[f64],
    grid: &QuadratureGrid,
    step: f64,
) -> Result<Vec<f64>> {
    let mut grad = Vec::with_capacity(pi.len());
    for k in 0..pi.len() {
        let mut hi = pi.to_vec();
        let mut lo = pi.to_vec();
        hi[k] += step;
        lo[k] -= step;
        let f_hi = gaussian_area(family, &hi, grid)?;
        let f_lo = gaussian_area(family, &lo, grid)?;
        grad.push((f_hi - f_lo) / (2.0 * step));
    }
    Ok(grad)
}

/// Defect between the finite-difference directional derivative of F and
/// the first-variation integral `-\int <H + x_perp, V> w dV`, where the
/// variation field V is itself a central difference of the builder.
pub fn first_variation_residual(
    family: Family,
    pi: &[f64],
    direction: &[f64],
    grid: &QuadratureGrid,
) -> Result<f64> {
    let norm: f64 = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Param("direction must be nonzero".into()));
    }
    let dir: Vec<f64> = direction.iter().map(|d| d / norm).collect();
    let h = DEFAULT_PARAM_STEP;
    let shift = |sign: f64| -> Vec<f64> {
        pi.iter().zip(&dir).map(|(x, d)| x + sign * h * d).collect()
    };
    let f_hi = gaussian_area(family, &shift(1.0), grid)?;
    let f_lo = gaussian_area(family, &shift(-1.0), grid)?;
    let lhs = (f_hi - f_lo) / (2.0 * h);

    let spec = family.build(pi)?;
    let spec_hi = family.build(&shift(1.0))?;
    let spec_lo = family.build(&shift(-1.0))?;
    let terms: Result<Vec<f64>> = grid
        .nodes
        .iter()
        .map(|&(p, w)| {
            let (r, _) = shrinker_residual(&spec, p)?;
            let x_hi = spec_hi.position(p)?;
            let x_lo = spec_lo.position(p)?;
            let variation = (x_hi - x_lo).scale(1.0 / (2.0 * h));
            let jets = immersion_jets(&spec, p)?;
            let ff = first_forms(&jets)?;
            let weight = (-0.5 * ff.x.norm_sq()).exp();
            Ok(-w * r.dot(&variation) * weight * ff.sqrt_det_g)
        })
        .collect();
    let rhs = pairwise_sum(&terms?);
    Ok((lhs - rhs).abs())
}

// -------------------------------------------------------------- optimiser --

#[derive(Debug, Clone, Copy)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    /// Convergence threshold on |grad F|.
    pub grad_tol: f64,
    /// Parameter step for the finite-difference gradients.
    pub fd_step: f64,
    /// Backtracking shrink factor, in (0, 1).
    pub shrink: f64,
    /// Sufficient-decrease constant for the line search.
    pub sufficient_decrease: f64,
    pub grid_nu: usize,
    pub grid_nv: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iter: 200,
            grad_tol: 1e-6,
            fd_step: DEFAULT_PARAM_STEP,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            grid_nu: 16,
            grid_nv: 16,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0
            || !(self.grad_tol > 0.0)
            || !(self.fd_step > 0.0)
            || !(self.shrink > 0.0 && self.shrink < 1.0)
            || !(self.sufficient_decrease > 0.0)
            || self.grid_nu == 0
            || self.grid_nv == 0
        {
            return Err(Error::Param("invalid optimiser configuration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub pi: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizerResult {
    pub family: String,
    pub pi: Vec<f64>,
    pub grad_norm: f64,
    /// Weighted area at the final parameters.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

/// Drive `|grad F|^2` to zero by damped gradient descent with a
/// backtracking line search, projecting into the family box.
///
/// A result is always returned; `converged = false` marks runs that hit
/// the iteration budget or a stalled line search.
pub fn find_critical(
    family: Family,
    pi0: &[f64],
    config: &OptimizerConfig,
) -> Result<OptimizerResult> {
    config.validate()?;
    let spec0 = family.build(pi0)?;
    let grid = QuadratureGrid::for_domain(
        &spec0.domain,
        config.grid_nu,
        config.grid_nv,
        None,
        None,
        crate::calculus::DEFAULT_TRUNCATE_RADIUS,
    )?;

    let grad_and_sq = |pi: &[f64]| -> Result<(Vec<f64>, f64)> {
        let g = family_gradient(family, pi, &grid, config.fd_step)?;
        let sq = g.iter().map(|x| x * x).sum::<f64>();
        Ok((g, sq))
    };
    let g_sq = |pi: &[f64]| -> Result<f64> { Ok(grad_and_sq(pi)?.1) };

    let mut pi = pi0.to_vec();
    family.project(&mut pi);
    let mut trace = Vec::new();
    let mut step = 1.0f64;

    for iter in 0..=config.max_iter {
        let (grad_f, g) = grad_and_sq(&pi)?;
        let grad_norm = g.sqrt();
        trace.push(TraceEntry {
            pi: pi.clone(),
            objective: gaussian_area(family, &pi, &grid)?,
            grad_norm,
        });
        if grad_norm < config.grad_tol {
            return Ok(OptimizerResult {
                family: family.name(),
                pi,
                grad_norm,
                objective: trace.last().unwrap().objective,
                iterations: iter,
                converged: true,
                trace,
            });
        }
        if iter == config.max_iter {
            break;
        }

        // descent direction for G = |grad F|^2 by central differences
        let mut dg = vec![0.0; pi.len()];
        for k in 0..pi.len() {
            let mut hi = pi.clone();
            let mut lo = pi.clone();
            hi[k] += config.fd_step;
            lo[k] -= config.fd_step;
            dg[k] = (g_sq(&hi)? - g_sq(&lo)?) / (2.0 * config.fd_step);
        }
        let dg_norm: f64 = dg.iter().map(|x| x * x).sum::<f64>().sqrt();
        if dg_norm == 0.0 {
            break; // flat to round-off; cannot improve
        }

        // Backtracking on the sufficient decrease of G along the unit
        // descent direction. The step is a length, capped so the discrete
        // walk tracks the continuous gradient flow instead of hopping over
        // ridges into the flat far field of G.
        let dir: Vec<f64> = dg.iter().map(|x| -x / dg_norm).collect();
        let mut t = (step * 2.0).clamp(1e-12, MAX_STEP_LENGTH);
        let mut accepted = false;
        while t >= 1e-14 {
            let mut cand: Vec<f64> =
                pi.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            family.project(&mut cand);
            let g_new = g_sq(&cand)?;
            if g_new <= g - config.sufficient_decrease * t * dg_norm {
                pi = cand;
                step = t;
                accepted = true;
                break;
            }
            t *= config.shrink;
        }
        if !accepted {
            break; // line search stalled at round-off scale
        }
        let _ = grad_f;
    }

    let (grad_f, g) = grad_and_sq(&pi)?;
    let _ = grad_f;
    Ok(OptimizerResult {
        family: family.name(),
        pi: pi.clone(),
        grad_norm: g.sqrt(),
        objective: gaussian_area(family, &pi, &grid)?,
        iterations: config.max_iter,
        converged: false,
        trace,
    })
}
