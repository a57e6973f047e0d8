//! Truncated forward-mode derivative arithmetic in two variables.
//!
//! A [`Jet3`] holds every partial derivative `d^(a+b) f / du^a dv^b` with
//! `a + b <= 3` of one scalar quantity at a base point. Arithmetic on jets
//! is exact truncation: for polynomial inputs of total degree <= 3 every
//! stored coefficient is exact to round-off, and for smooth composites the
//! coefficients are the true derivatives of the composite.
//!
//! The deepest consumer in the crate is the drift Laplacian of cos(theta),
//! which needs third derivatives of the immersion; order 3 is therefore
//! fixed and nothing ever asks for order 4.
//!
//! [`fd_oracle`] provides an independent central-difference estimate of the
//! same derivatives; it exists so jet results can be cross-checked against
//! an implementation that shares no code with the jet path.

use crate::error::{Error, Result};

/// Number of multi-indices `(a, b)` with `a + b <= 3`.
pub const COEFF_COUNT: usize = 10;

/// Flat index of the multi-index `(a, b)`, grouped by total order.
///
/// Layout: `(0,0) | (1,0) (0,1) | (2,0) (1,1) (0,2) | (3,0) (2,1) (1,2) (0,3)`.
#[inline]
pub fn coeff_index(a: usize, b: usize) -> usize {
    let k = a + b;
    debug_assert!(k <= 3);
    k * (k + 1) / 2 + b
}

/// A surface parameter point `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamPoint {
    pub u: f64,
    pub v: f64,
}

impl ParamPoint {
    pub fn new(u: f64, v: f64) -> Self {
        ParamPoint { u, v }
    }
}

/// Order-3 truncated expansion of one real quantity in two variables.
///
/// `c[coeff_index(a, b)]` stores the raw partial derivative, not the Taylor
/// coefficient; mixed-partial symmetry holds by construction because there
/// is a single slot per multi-index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet3 {
    c: [f64; COEFF_COUNT],
}

impl Jet3 {
    pub fn zero() -> Self {
        Jet3 { c: [0.0; COEFF_COUNT] }
    }

    /// Lift of a constant: only the value slot is set.
    pub fn constant(value: f64) -> Self {
        let mut j = Self::zero();
        j.c[0] = value;
        j
    }

    /// Lift of the first parameter: value plus du/du = 1.
    pub fn var_u(value: f64) -> Self {
        let mut j = Self::constant(value);
        j.c[coeff_index(1, 0)] = 1.0;
        j
    }

    /// Lift of the second parameter: value plus dv/dv = 1.
    pub fn var_v(value: f64) -> Self {
        let mut j = Self::constant(value);
        j.c[coeff_index(0, 1)] = 1.0;
        j
    }

    pub fn from_coeffs(c: [f64; COEFF_COUNT]) -> Self {
        Jet3 { c }
    }

    pub fn coeffs(&self) -> &[f64; COEFF_COUNT] {
        &self.c
    }

    /// The value at the base point.
    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// The partial derivative `d^(a+b) / du^a dv^b`.
    #[inline]
    pub fn deriv(&self, a: usize, b: usize) -> f64 {
        self.c[coeff_index(a, b)]
    }

    /// Jet of `df/du`. The result's third-order slots are zero-filled:
    /// they would need order-4 data, so the output is valid to order 2.
    pub fn d_du(&self) -> Jet3 {
        let mut out = Self::zero();
        for a in 0..3 {
            for b in 0..3 - a {
                out.c[coeff_index(a, b)] = self.c[coeff_index(a + 1, b)];
            }
        }
        out
    }

    /// Jet of `df/dv`; valid to order 2, like [`Jet3::d_du`].
    pub fn d_dv(&self) -> Jet3 {
        let mut out = Self::zero();
        for a in 0..3 {
            for b in 0..3 - a {
                out.c[coeff_index(a, b)] = self.c[coeff_index(a, b + 1)];
            }
        }
        out
    }

    /// Leibniz product truncated at order 3.
    pub fn mul(&self, rhs: &Jet3) -> Jet3 {
        // binom[n][k] for n <= 3
        const B: [[f64; 4]; 4] = [
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [1.0, 2.0, 1.0, 0.0],
            [1.0, 3.0, 3.0, 1.0],
        ];
        let mut out = Self::zero();
        for a in 0..=3 {
            for b in 0..=3 - a {
                let mut s = 0.0;
                for i in 0..=a {
                    for j in 0..=b {
                        s += B[a][i]
                            * B[b][j]
                            * self.c[coeff_index(i, j)]
                            * rhs.c[coeff_index(a - i, b - j)];
                    }
                }
                out.c[coeff_index(a, b)] = s;
            }
        }
        out
    }

    /// Composition with a univariate function given by `g(f0), g'(f0),
    /// g''(f0), g'''(f0)`: evaluates the order-3 series of `g` around the
    /// base value on the fluctuation part of `self`.
    fn compose(&self, g: [f64; 4]) -> Jet3 {
        let mut delta = *self;
        delta.c[0] = 0.0;
        let d2 = delta.mul(&delta);
        let d3 = d2.mul(&delta);
        let mut out = Jet3::constant(g[0]);
        for k in 0..COEFF_COUNT {
            out.c[k] += g[1] * delta.c[k] + g[2] / 2.0 * d2.c[k] + g[3] / 6.0 * d3.c[k];
        }
        out
    }

    pub fn sin(&self) -> Jet3 {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet3 {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn exp(&self) -> Jet3 {
        let e = self.value().exp();
        self.compose([e, e, e, e])
    }

    /// Square root; the base value must be strictly positive because the
    /// derivative blows up at zero.
    pub fn sqrt(&self) -> Result<Jet3> {
        let x = self.value();
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!("sqrt of non-positive value {x}")));
        }
        let s = x.sqrt();
        Ok(self.compose([s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x)]))
    }

    /// Reciprocal; fails on a base value of zero (a pole).
    pub fn recip(&self) -> Result<Jet3> {
        let x = self.value();
        if x == 0.0 || !x.is_finite() {
            return Err(Error::Domain(format!("division by {x}")));
        }
        let r = 1.0 / x;
        Ok(self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]))
    }

    pub fn div(&self, rhs: &Jet3) -> Result<Jet3> {
        Ok(self.mul(&rhs.recip()?))
    }

    /// Arc cosine; requires the base value strictly inside (-1, 1).
    pub fn acos(&self) -> Result<Jet3> {
        let x = self.value();
        if !(x.abs() < 1.0) {
            return Err(Error::Domain(format!("acos of {x} outside (-1, 1)")));
        }
        let q = 1.0 - x * x;
        let r = q.sqrt();
        // d/dx acos = -1/sqrt(1-x^2) and its first two derivatives.
        Ok(self.compose([
            x.acos(),
            -1.0 / r,
            -x / (q * r),
            -(1.0 + 2.0 * x * x) / (q * q * r),
        ]))
    }

    fn atan(&self) -> Jet3 {
        let x = self.value();
        let q = 1.0 + x * x;
        self.compose([
            x.atan(),
            1.0 / q,
            -2.0 * x / (q * q),
            (6.0 * x * x - 2.0) / (q * q * q),
        ])
    }

    /// Integer power. Negative exponents fail on a zero base value.
    pub fn powi(&self, n: i32) -> Result<Jet3> {
        if n < 0 {
            return Jet3::constant(1.0).div(&self.powi(-n)?);
        }
        let mut acc = Jet3::constant(1.0);
        let mut base = *self;
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        Ok(acc)
    }

    /// Two-argument arc tangent of jets `(y, x)`, principal value in
    /// `(-pi, pi]`. Fails when both base values vanish.
    pub fn atan2(y: &Jet3, x: &Jet3) -> Result<Jet3> {
        use std::f64::consts::{FRAC_PI_2, PI};
        let (y0, x0) = (y.value(), x.value());
        if y0 == 0.0 && x0 == 0.0 {
            return Err(Error::Domain("atan2 of (0, 0)".into()));
        }
        // Pick the branch-safe quotient: the derivative structure of
        // atan2(y, x) matches atan(y/x) up to an additive constant where
        // |x0| dominates, and pi/2*sign(y) - atan(x/y) elsewhere.
        if x0.abs() >= y0.abs() {
            let q = y.div(x)?.atan();
            let offset = if x0 > 0.0 {
                0.0
            } else if y0 >= 0.0 {
                PI
            } else {
                -PI
            };
            let mut out = q;
            out.c[0] += offset;
            Ok(out)
        } else {
            let q = x.div(y)?.atan();
            let offset = if y0 > 0.0 { FRAC_PI_2 } else { -FRAC_PI_2 };
            let mut out = Jet3::constant(offset);
            for k in 0..COEFF_COUNT {
                out.c[k] -= q.c[k];
            }
            Ok(out)
        }
    }
}

impl std::ops::Add for Jet3 {
    type Output = Jet3;
    fn add(self, rhs: Jet3) -> Jet3 {
        let mut out = self;
        for k in 0..COEFF_COUNT {
            out.c[k] += rhs.c[k];
        }
        out
    }
}

impl std::ops::Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, rhs: Jet3) -> Jet3 {
        let mut out = self;
        for k in 0..COEFF_COUNT {
            out.c[k] -= rhs.c[k];
        }
        out
    }
}

impl std::ops::Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        let mut out = self;
        for k in 0..COEFF_COUNT {
            out.c[k] = -out.c[k];
        }
        out
    }
}

impl std::ops::Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: Jet3) -> Jet3 {
        Jet3::mul(&self, &rhs)
    }
}

impl std::ops::Mul<f64> for Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: f64) -> Jet3 {
        let mut out = self;
        for k in 0..COEFF_COUNT {
            out.c[k] *= rhs;
        }
        out
    }
}

/// Default central-difference step for a derivative of the given total
/// order, balancing truncation against round-off in double precision.
pub fn default_fd_step(order: usize) -> f64 {
    match order {
        0 | 1 => 1e-6,
        2 => 1e-4,
        _ => 1e-3,
    }
}

/// Central-difference estimate of `d^(a+b) f / du^a dv^b` at `p`.
///
/// Error is O(step^2) for smooth `f`; the caller owns the step choice.
/// This is the independent oracle for the jet arithmetic above and shares
/// no code with it.
pub fn fd_oracle<F>(f: F, p: ParamPoint, multi_index: (usize, usize), step: f64) -> f64
where
    F: Fn(ParamPoint) -> f64,
{
    let (a, b) = multi_index;
    assert!(a + b <= 3, "fd_oracle supports orders up to 3");
    // 1-D central stencils: (offset multiplier, weight) pairs, to be
    // divided by step^order afterwards.
    fn stencil(order: usize) -> Vec<(f64, f64)> {
        match order {
            0 => vec![(0.0, 1.0)],
            1 => vec![(1.0, 0.5), (-1.0, -0.5)],
            2 => vec![(1.0, 1.0), (0.0, -2.0), (-1.0, 1.0)],
            3 => vec![(2.0, 0.5), (1.0, -1.0), (-1.0, 1.0), (-2.0, -0.5)],
            _ => unreachable!(),
        }
    }
    let su = stencil(a);
    let sv = stencil(b);
    let mut acc = 0.0;
    for &(du, wu) in &su {
        for &(dv, wv) in &sv {
            let q = ParamPoint::new(p.u + du * step, p.v + dv * step);
            acc += wu * wv * f(q);
        }
    }
    acc / step.powi((a + b) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lifts_set_expected_slots() {
        let c = Jet3::constant(5.0);
        assert_eq!(c.value(), 5.0);
        assert!(c.coeffs()[1..].iter().all(|&x| x == 0.0));

        let u = Jet3::var_u(2.0);
        assert_eq!(u.value(), 2.0);
        assert_eq!(u.deriv(1, 0), 1.0);
        assert_eq!(u.deriv(0, 1), 0.0);

        let v = Jet3::var_v(0.0);
        assert_eq!(v.value(), 0.0);
        assert_eq!(v.deriv(0, 1), 1.0);
        assert_eq!(v.deriv(1, 0), 0.0);
    }

    #[test]
    fn sin_jet_matches_taylor_derivatives() {
        let j = Jet3::var_u(0.0).sin();
        assert_abs_diff_eq!(j.value(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.deriv(1, 0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.deriv(2, 0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.deriv(3, 0), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn product_rule_on_u_times_v() {
        let j = Jet3::var_u(2.0) * Jet3::var_v(3.0);
        assert_eq!(j.value(), 6.0);
        assert_eq!(j.deriv(1, 0), 3.0);
        assert_eq!(j.deriv(0, 1), 2.0);
        assert_eq!(j.deriv(1, 1), 1.0);
        assert_eq!(j.deriv(2, 0), 0.0);
        assert_eq!(j.deriv(3, 0), 0.0);
    }

    #[test]
    fn division_by_zero_is_a_domain_error() {
        let r = Jet3::constant(1.0).div(&Jet3::var_u(0.0));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn sqrt_at_zero_is_a_domain_error() {
        assert!(Jet3::var_u(0.0).sqrt().is_err());
    }

    #[test]
    fn atan2_of_origin_is_a_domain_error() {
        let r = Jet3::atan2(&Jet3::constant(0.0), &Jet3::var_u(0.0));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn atan2_matches_fd_on_all_quadrants() {
        for &(y0, x0) in &[(0.7, 1.3), (0.7, -1.3), (-0.7, -1.3), (-2.0, 0.3), (1.9, 0.2)] {
            let f = |p: ParamPoint| (p.u + y0).atan2(p.v * p.v + x0);
            let y = Jet3::var_u(0.0) + Jet3::constant(y0);
            let x = (Jet3::var_v(0.0) * Jet3::var_v(0.0)) + Jet3::constant(x0);
            let j = Jet3::atan2(&y, &x).unwrap();
            let p = ParamPoint::new(0.0, 0.0);
            for (a, b) in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (2, 1)] {
                let fd = fd_oracle(f, p, (a, b), default_fd_step(a + b));
                assert_abs_diff_eq!(j.deriv(a, b), fd, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn fd_oracle_first_derivative_of_sin() {
        let d = fd_oracle(|p| p.u.sin(), ParamPoint::new(0.0, 0.0), (1, 0), 1e-4);
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn fd_oracle_mixed_partial_of_uv() {
        let d = fd_oracle(|p| p.u * p.v, ParamPoint::new(2.0, 3.0), (1, 1), 1e-3);
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn chain_rule_exactness_of_sin_u_plus_v_squared() {
        // d^k of sin^2(u+v) along any multi-index of total order k:
        // k=1 -> sin(2w), k=2 -> 2cos(2w), k=3 -> -4sin(2w), w = u+v.
        let mut rng = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for _ in 0..20 {
            let (u, v) = (next(), next());
            let s = (Jet3::var_u(u) + Jet3::var_v(v)).sin();
            let j = s * s;
            let w = 2.0 * (u + v);
            for a in 0..=3usize {
                for b in 0..=3 - a {
                    let expect = match a + b {
                        0 => (u + v).sin().powi(2),
                        1 => w.sin(),
                        2 => 2.0 * w.cos(),
                        _ => -4.0 * w.sin(),
                    };
                    assert_abs_diff_eq!(j.deriv(a, b), expect, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn construction_order_invariance() {
        // The same expression assembled in different association orders
        // agrees to a few ulps of the working magnitude.
        let mut rng = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for _ in 0..200 {
            let a = Jet3::var_u(next()).sin() + Jet3::constant(next());
            let b = Jet3::var_v(next()).cos() * Jet3::constant(next());
            let c = Jet3::var_u(next()) * Jet3::var_v(next());
            let left = (a * b) * c;
            let right = a * (b * c);
            let dist = (a * c) + (b * c);
            let dist2 = (a + b) * c;
            for k in 0..COEFF_COUNT {
                let scale = left.coeffs()[k].abs().max(1.0);
                assert!((left.coeffs()[k] - right.coeffs()[k]).abs() <= 8.0 * f64::EPSILON * scale);
                let scale2 = dist.coeffs()[k].abs().max(dist2.coeffs()[k].abs()).max(1.0);
                assert!((dist.coeffs()[k] - dist2.coeffs()[k]).abs() <= 8.0 * f64::EPSILON * scale2);
            }
        }
    }

    #[test]
    fn powi_handles_negative_exponents() {
        let j = Jet3::var_u(2.0).powi(-2).unwrap();
        assert_abs_diff_eq!(j.value(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(j.deriv(1, 0), -2.0 / 8.0, epsilon = 1e-15);
        assert!(Jet3::var_u(0.0).powi(-1).is_err());
    }

    #[test]
    fn acos_derivatives_match_fd() {
        let j = (Jet3::var_u(0.3) * Jet3::constant(0.5)).acos().unwrap();
        let f = |p: ParamPoint| (0.5 * p.u).acos();
        let p = ParamPoint::new(0.3, 0.0);
        for (a, b) in [(1, 0), (2, 0), (3, 0)] {
            let fd = fd_oracle(f, p, (a, b), default_fd_step(a + b));
            assert_abs_diff_eq!(j.deriv(a, b), fd, epsilon = 1e-4);
        }
        assert!(Jet3::constant(1.0).acos().is_err());
    }
}
