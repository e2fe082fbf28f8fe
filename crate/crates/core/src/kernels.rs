//! Rescaled time to maturity, optimal trading rates and the two averaging kernels.
//!
//! With `tau(t) = (T - t) / sqrt(kappa)`:
//!
//! ```text
//! K(t, u)  = cosh(tau(u)) / (sqrt(kappa) sinh(tau(t)))
//! KΞ(t, u) = sinh(tau(u)) / (sqrt(kappa) (cosh(tau(t)) - 1))
//! ```
//!
//! Both are probability densities on `[t, T]`. Interval masses are evaluated from their
//! antiderivatives in product form (`sinh a - sinh b = 2 cosh((a+b)/2) sinh((a-b)/2)` and
//! `cosh a - cosh b = 2 sinh((a+b)/2) sinh((a-b)/2)`) and in log space, so nothing cancels
//! near maturity and nothing overflows when `kappa` is small.

use std::f64::consts::LN_2;

use crate::error::{domain, Error, Result};
use crate::model::ModelParams;

pub(crate) fn ln_sinh(x: f64) -> f64 {
    if x < 20.0 {
        x.sinh().ln()
    } else {
        x - LN_2 + (-(-2.0 * x).exp()).ln_1p()
    }
}

pub(crate) fn ln_cosh(x: f64) -> f64 {
    if x < 20.0 {
        x.cosh().ln()
    } else {
        x - LN_2 + (-2.0 * x).exp().ln_1p()
    }
}

/// `ln(cosh(x) - 1) = ln 2 + 2 ln sinh(x/2)`.
pub(crate) fn ln_cosh_m1(x: f64) -> f64 {
    LN_2 + 2.0 * ln_sinh(0.5 * x)
}

pub fn tau(params: &ModelParams, t: f64) -> Result<f64> {
    params.check_time(t)?;
    Ok((params.horizon - t) / params.sqrt_kappa())
}

pub(crate) fn tau_unchecked(params: &ModelParams, t: f64) -> f64 {
    ((params.horizon - t) / params.sqrt_kappa()).max(0.0)
}

/// `tanh(tau(t)) / sqrt(kappa)`, the speed of the unconstrained optimum.
pub fn rate_unconstrained(params: &ModelParams, t: f64) -> Result<f64> {
    Ok(tau(params, t)?.tanh() / params.sqrt_kappa())
}

/// `coth(tau(t)) / sqrt(kappa)`, the speed of the terminal-constrained optimum.
///
/// Fails with [`Error::Singularity`] within the maturity guard of `T`.
pub fn rate_constrained(params: &ModelParams, t: f64) -> Result<f64> {
    let x = tau(params, t)?;
    let guard = params.guard();
    if params.horizon - t <= guard || x == 0.0 {
        return Err(Error::Singularity { t, guard });
    }
    Ok(1.0 / (x.tanh() * params.sqrt_kappa()))
}

fn check_kernel_args(params: &ModelParams, t: f64, u: f64) -> Result<()> {
    params.check_time(t)?;
    if !(u >= t && u < params.horizon) {
        return domain(format!("kernel needs t <= u < T, got t = {t}, u = {u}"));
    }
    Ok(())
}

fn check_interval(params: &ModelParams, t: f64, a: f64, b: f64) -> Result<()> {
    params.check_time(t)?;
    if t >= params.horizon {
        return domain("kernel mass is undefined at t = T");
    }
    if !(t <= a && a <= b && b <= params.horizon) {
        return domain(format!("need t <= a <= b <= T, got t = {t}, a = {a}, b = {b}"));
    }
    Ok(())
}

pub fn kernel_k(params: &ModelParams, t: f64, u: f64) -> Result<f64> {
    check_kernel_args(params, t, u)?;
    let sk = params.sqrt_kappa();
    let (xt, xu) = (tau_unchecked(params, t), tau_unchecked(params, u));
    Ok((ln_cosh(xu) - ln_sinh(xt)).exp() / sk)
}

/// `∫_a^b K(t, u) du = (sinh(tau(a)) - sinh(tau(b))) / sinh(tau(t))`.
pub fn kernel_k_integral(params: &ModelParams, t: f64, a: f64, b: f64) -> Result<f64> {
    check_interval(params, t, a, b)?;
    Ok(k_mass(params, t, a, b))
}

pub(crate) fn k_mass(params: &ModelParams, t: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let sk = params.sqrt_kappa();
    let half_width = 0.5 * (b - a) / sk;
    let mid = (params.horizon - 0.5 * (a + b)) / sk;
    let xt = tau_unchecked(params, t);
    (LN_2 + ln_cosh(mid) + ln_sinh(half_width) - ln_sinh(xt)).exp()
}

pub fn kernel_kxi(params: &ModelParams, t: f64, u: f64) -> Result<f64> {
    check_kernel_args(params, t, u)?;
    let sk = params.sqrt_kappa();
    let (xt, xu) = (tau_unchecked(params, t), tau_unchecked(params, u));
    if xu == 0.0 {
        return Ok(0.0);
    }
    Ok((ln_sinh(xu) - ln_cosh_m1(xt)).exp() / sk)
}

/// `∫_a^b KΞ(t, u) du = (cosh(tau(a)) - cosh(tau(b))) / (cosh(tau(t)) - 1)`.
pub fn kernel_kxi_integral(params: &ModelParams, t: f64, a: f64, b: f64) -> Result<f64> {
    check_interval(params, t, a, b)?;
    Ok(kxi_mass(params, t, a, b))
}

pub(crate) fn kxi_mass(params: &ModelParams, t: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let sk = params.sqrt_kappa();
    let half_width = 0.5 * (b - a) / sk;
    let mid = (params.horizon - 0.5 * (a + b)) / sk;
    let xt = tau_unchecked(params, t);
    (ln_sinh(mid) + ln_sinh(half_width) - 2.0 * ln_sinh(0.5 * xt)).exp()
}

/// `1 / cosh(tau(t))`, the weight the constrained signal puts on the terminal position.
pub fn cosh_weight(params: &ModelParams, t: f64) -> Result<f64> {
    Ok((-ln_cosh(tau(params, t)?)).exp())
}

/// `cosh(tau(t1)) / cosh(tau(t0))`.
pub(crate) fn cosh_ratio(params: &ModelParams, t1: f64, t0: f64) -> f64 {
    (ln_cosh(tau_unchecked(params, t1)) - ln_cosh(tau_unchecked(params, t0))).exp()
}

/// `sinh(tau(t1)) / sinh(tau(t0))`; zero when `t1 = T`.
pub(crate) fn sinh_ratio(params: &ModelParams, t1: f64, t0: f64) -> f64 {
    let x1 = tau_unchecked(params, t1);
    if x1 == 0.0 {
        return 0.0;
    }
    (ln_sinh(x1) - ln_sinh(tau_unchecked(params, t0))).exp()
}

/// Highest polynomial degree accepted by the exact moment routines.
pub const MAX_POLY_DEGREE: usize = 8;

/// `∫_a^b p(u) K(t, u) du` for a polynomial `p(u) = Σ coeffs[i] u^i`.
pub fn kernel_k_moment(params: &ModelParams, t: f64, a: f64, b: f64, coeffs: &[f64]) -> Result<f64> {
    check_interval(params, t, a, b)?;
    poly_moment(params, t, a, b, coeffs, Hyperbolic::Cosh)
}

/// `∫_a^b p(u) KΞ(t, u) du` for a polynomial `p(u) = Σ coeffs[i] u^i`.
pub fn kernel_kxi_moment(params: &ModelParams, t: f64, a: f64, b: f64, coeffs: &[f64]) -> Result<f64> {
    check_interval(params, t, a, b)?;
    poly_moment(params, t, a, b, coeffs, Hyperbolic::Sinh)
}

#[derive(Clone, Copy, PartialEq)]
enum Hyperbolic {
    Cosh,
    Sinh,
}

/// After the substitution `s = tau(u)` the moment becomes
/// `∫_{tau(b)}^{tau(a)} q(s) h(s) ds / norm(tau(t))` with `h` = cosh or sinh and the polynomial
/// `q(s) = p(T - sqrt(kappa) s)`. Every term is scaled by `exp(-tau(t))`.
fn poly_moment(
    params: &ModelParams,
    t: f64,
    a: f64,
    b: f64,
    coeffs: &[f64],
    kind: Hyperbolic,
) -> Result<f64> {
    if coeffs.len() > MAX_POLY_DEGREE + 1 {
        return domain(format!("polynomial degree above {MAX_POLY_DEGREE}"));
    }
    if b <= a || coeffs.is_empty() {
        return Ok(0.0);
    }
    let q = shift_polynomial(coeffs, params.horizon, -params.sqrt_kappa());
    let xt = tau_unchecked(params, t);
    let xa = tau_unchecked(params, a);
    let xb = tau_unchecked(params, b);
    let hi = scaled_antiderivatives(xa, q.len(), xt);
    let lo = scaled_antiderivatives(xb, q.len(), xt);
    let mut num = 0.0;
    for (j, qj) in q.iter().enumerate() {
        let (c_hi, s_hi) = hi[j];
        let (c_lo, s_lo) = lo[j];
        num += qj
            * match kind {
                Hyperbolic::Cosh => c_hi - c_lo,
                Hyperbolic::Sinh => s_hi - s_lo,
            };
    }
    let norm = match kind {
        Hyperbolic::Cosh => -0.5 * (-2.0 * xt).exp_m1(),
        Hyperbolic::Sinh => 0.5 * (-xt).exp_m1().powi(2),
    };
    Ok(num / norm)
}

/// Coefficients of `q(s) = p(shift + scale * s)`.
fn shift_polynomial(coeffs: &[f64], shift: f64, scale: f64) -> Vec<f64> {
    let n = coeffs.len();
    let mut q = vec![0.0; n];
    for (i, &pi) in coeffs.iter().enumerate() {
        let mut binom = 1.0;
        for j in 0..=i {
            q[j] += pi * binom * shift.powi((i - j) as i32) * scale.powi(j as i32);
            binom = binom * (i - j) as f64 / (j + 1) as f64;
        }
    }
    q
}

/// `(∫_0^x s^j cosh s ds, ∫_0^x s^j sinh s ds) * exp(-shift)` for `j < count`.
fn scaled_antiderivatives(x: f64, count: usize, shift: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(count);
    if x <= 20.0 {
        let scale = (-shift).exp();
        let x2 = x * x;
        for j in 0..count {
            // Σ_k x^{j+2k+1} / ((2k)! (j+2k+1)) and Σ_k x^{j+2k+2} / ((2k+1)! (j+2k+2)).
            let mut c_sum = 0.0;
            let mut s_sum = 0.0;
            let mut c_term = x.powi(j as i32 + 1);
            let mut s_term = x.powi(j as i32 + 2);
            let mut k = 0usize;
            loop {
                let c_add = c_term / (j + 2 * k + 1) as f64;
                let s_add = s_term / (j + 2 * k + 2) as f64;
                c_sum += c_add;
                s_sum += s_add;
                if (c_add <= 1e-17 * c_sum && s_add <= 1e-17 * s_sum) || k > 200 {
                    break;
                }
                let kk = (2 * k + 1) as f64;
                c_term *= x2 / (kk * (kk + 1.0));
                s_term *= x2 / ((kk + 1.0) * (kk + 2.0));
                k += 1;
            }
            out.push((c_sum * scale, s_sum * scale));
        }
    } else {
        let e_plus = (x - shift).exp();
        let e_minus = (-x - shift).exp();
        let sinh = 0.5 * (e_plus - e_minus);
        let cosh = 0.5 * (e_plus + e_minus);
        let mut c_prev = sinh;
        let mut s_prev = cosh - (-shift).exp();
        out.push((c_prev, s_prev));
        let mut xj = 1.0;
        for j in 1..count {
            xj *= x;
            let c = xj * sinh - j as f64 * s_prev;
            let s = xj * cosh - j as f64 * c_prev;
            out.push((c, s));
            c_prev = c;
            s_prev = s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ModelParams {
        ModelParams::new(1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn tau_values() {
        let p = unit();
        assert_eq!(tau(&p, 1.0).unwrap(), 0.0);
        assert_eq!(tau(&p, 0.0).unwrap(), 1.0);
        let q = ModelParams::new(0.25, 1.0, 0.0).unwrap();
        assert!((tau(&q, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(tau(&p, 1.5).is_err());
        assert!(tau(&p, -0.1).is_err());
    }

    #[test]
    fn rates_at_endpoints() {
        let p = unit();
        assert_eq!(rate_unconstrained(&p, 1.0).unwrap(), 0.0);
        assert!((rate_unconstrained(&p, 0.0).unwrap() - 0.761_594_155_955_764_9).abs() < 1e-15);
        assert!((rate_constrained(&p, 0.0).unwrap() - 1.313_035_285_499_331_3).abs() < 1e-14);
        assert!(matches!(rate_constrained(&p, 1.0), Err(Error::Singularity { .. })));
        assert!(matches!(
            rate_constrained(&p, 1.0 - 1e-10),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn constrained_rate_blows_up_like_inverse_distance() {
        let p = unit();
        for eps in [1e-2, 1e-4, 1e-6] {
            let r = rate_constrained(&p, 1.0 - eps).unwrap();
            assert!(r >= 1.0 / eps * (1.0 - 1e-9));
        }
    }

    #[test]
    fn kernel_point_values() {
        let p = unit();
        assert!((kernel_k(&p, 0.0, 0.0).unwrap() - 1.313_035_285_499_331_3).abs() < 1e-14);
        assert!(kernel_k(&p, 0.0, 1.0).is_err());
        assert!(kernel_k(&p, 0.5, 0.4).is_err());
        assert!(kernel_k(&p, 0.2, 0.3).unwrap() >= kernel_k(&p, 0.2, 0.8).unwrap());
        assert!(kernel_kxi(&p, 0.0, 1.0 - 1e-12).unwrap() < 1e-11);
    }

    #[test]
    fn kernel_interval_values() {
        let p = unit();
        assert!((kernel_k_integral(&p, 0.0, 0.5, 1.0).unwrap() - 0.443_409_441_985_036_95).abs() < 1e-15);
        assert!((kernel_kxi_integral(&p, 0.0, 0.5, 1.0).unwrap() - 0.235_003_712_201_594_5).abs() < 1e-15);
        assert_eq!(kernel_k_integral(&p, 0.3, 0.4, 0.4).unwrap(), 0.0);
        assert!(kernel_k_integral(&p, 0.5, 0.4, 0.6).is_err());
        assert!(kernel_kxi_integral(&p, 1.0, 1.0, 1.0).is_err());
        for t in [0.0, 0.3, 0.9] {
            assert!((kernel_k_integral(&p, t, t, 1.0).unwrap() - 1.0).abs() < 1e-12);
        }
        for t in [0.0, 0.5, 0.99] {
            assert!((kernel_kxi_integral(&p, t, t, 1.0).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_values() {
        let p = unit();
        assert_eq!(cosh_weight(&p, 1.0).unwrap(), 1.0);
        assert!((cosh_weight(&p, 0.0).unwrap() - 0.648_054_273_663_885_4).abs() < 1e-15);
    }

    #[test]
    fn small_kappa_does_not_overflow() {
        let p = ModelParams::new(1e-6, 1.0, 0.0).unwrap();
        let m = kernel_k_integral(&p, 0.0, 0.0, 1.0).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        let k = kernel_k(&p, 0.0, 0.0).unwrap();
        assert!((k - 1e3).abs() < 1e-9);
        assert!(kernel_kxi_integral(&p, 0.0, 0.0, 0.5).unwrap() < 1e-12 + 1.0);
        assert!(cosh_weight(&p, 0.0).unwrap() >= 0.0);
    }

    #[test]
    fn polynomial_moment_matches_hand_integral() {
        // ∫_0^1 u cosh(1-u) du / sinh(1) = (cosh(1) - 1) / sinh(1).
        let p = unit();
        let m = kernel_k_moment(&p, 0.0, 0.0, 1.0, &[0.0, 1.0]).unwrap();
        let exact = (1f64.cosh() - 1.0) / 1f64.sinh();
        assert!((m - exact).abs() < 1e-14, "{m} vs {exact}");
        let c = kernel_k_moment(&p, 0.2, 0.3, 0.7, &[2.0]).unwrap();
        assert!((c - 2.0 * kernel_k_integral(&p, 0.2, 0.3, 0.7).unwrap()).abs() < 1e-14);
    }
}
