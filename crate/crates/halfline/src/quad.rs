//! Adaptive quadrature and scalar root finding.
//!
//! The integrators here feed the phase-plane constructions, so the accuracy
//! target is close to machine precision. The workhorse is a 15-point
//! Gauss-Kronrod panel with recursive bisection; endpoint square-root
//! singularities are removed by the substitution s = c - w^2 before the
//! adaptive rule ever sees them.

use crate::{Error, Result};

// 15-point Kronrod abscissae (positive half), 7-point Gauss embedded.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod panel on [a, b]: returns (kronrod value, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    kronrod *= half;
    gauss *= half;
    let err = (kronrod - gauss).abs().max(50.0 * f64::EPSILON * kronrod.abs());
    (kronrod, err)
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
}

const MAX_PANELS: usize = 2048;

/// Adaptive integral of `f` over [a, b]: worst-panel-first global
/// subdivision with a hard panel cap, so noisy integrands terminate with a
/// plateaued error estimate instead of recursing forever.
///
/// The tolerance is `max(abs_tol, rel_tol * |I|)`; failure is reported only
/// when the final error estimate exceeds a thousand times the request.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, abs_err: 0.0 });
    }
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(64);
    let (v, e) = gk15(&f, a, b);
    panels.push((a, b, v, e));
    let mut value = v;
    let mut err = e;
    while panels.len() < MAX_PANELS {
        let tol = abs_tol.max(rel_tol * value.abs()).max(1e-300);
        if err <= tol {
            break;
        }
        let (mut wi, mut we) = (0, panels[0].3);
        for (i, p) in panels.iter().enumerate().skip(1) {
            if p.3 > we {
                wi = i;
                we = p.3;
            }
        }
        let (pa, pb, pv, pe) = panels.swap_remove(wi);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            panels.push((pa, pb, pv, pe)); // interval exhausted in f64
            break;
        }
        let (v1, e1) = gk15(&f, pa, mid);
        let (v2, e2) = gk15(&f, mid, pb);
        value += v1 + v2 - pv;
        err += e1 + e2 - pe;
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
    // Drift-free totals before judging convergence.
    value = panels.iter().map(|p| p.2).sum();
    err = panels.iter().map(|p| p.3).sum();
    let tol = abs_tol.max(rel_tol * value.abs()).max(1e-300);
    if !value.is_finite() || !err.is_finite() || err > 1e3 * tol {
        return Err(Error::QuadratureFailure { a, b, tol: abs_tol, err });
    }
    Ok(QuadResult { value, abs_err: err })
}

/// Integral of `g` over [a, c] where `g` blows up like 1/sqrt(c - s) at the
/// upper endpoint. Substituting s = c - w^2 gives the smooth integrand
/// 2 w g(c - w^2) on [0, sqrt(c - a)], which never evaluates `g` at s = c
/// because the Kronrod nodes are interior.
pub fn integrate_sqrt_upper<F: Fn(f64) -> f64>(g: F, a: f64, c: f64, abs_tol: f64, rel_tol: f64) -> Result<QuadResult> {
    debug_assert!(c > a);
    let w_max = (c - a).sqrt();
    integrate(|w| 2.0 * w * g(c - w * w), 0.0, w_max, abs_tol, rel_tol)
}

/// Bisection to a root of `f` in [lo, hi]; requires a sign change (or a zero
/// endpoint). Refines down to `tol_x` absolute in x.
pub fn bisect_root<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, tol_x: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol_x {
            return Some(mid);
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Some(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// All roots of `f` on (a, b): uniform scan with `n` cells, bisection in each
/// sign-change cell, duplicates within `merge_tol` collapsed.
pub fn scan_roots<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize, tol_x: f64, merge_tol: f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let h = (b - a) / n as f64;
    let mut x_prev = a;
    let mut f_prev = f(a);
    for i in 1..=n {
        let x = if i == n { b } else { a + i as f64 * h };
        let fx = f(x);
        if f_prev == 0.0 {
            roots.push(x_prev);
        } else if fx != 0.0 && f_prev.signum() != fx.signum() {
            if let Some(r) = bisect_root(&f, x_prev, x, tol_x) {
                roots.push(r);
            }
        }
        x_prev = x;
        f_prev = fx;
    }
    if f_prev == 0.0 {
        roots.push(b);
    }
    roots.dedup_by(|q, p| (*q - *p).abs() <= merge_tol);
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_near_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 1e-14, 1e-14).unwrap();
        // exact: x^4/4 - x^2 + x on [-1,3] = (81/4 - 9 + 3) - (1/4 - 1 - 1)
        let exact = (81.0 / 4.0 - 6.0) - (0.25 - 2.0);
        assert!((r.value - exact).abs() < 1e-12, "got {}", r.value);
    }

    #[test]
    fn needs_subdivision() {
        let r = integrate(|x| (50.0 * x).sin(), 0.0, std::f64::consts::PI, 1e-13, 1e-13).unwrap();
        let exact = (1.0 - (50.0 * std::f64::consts::PI).cos()) / 50.0;
        assert!((r.value - exact).abs() < 1e-11);
    }

    #[test]
    fn sqrt_singularity_removed() {
        // integral of 1/sqrt(1-s) over [0,1] = 2
        let r = integrate_sqrt_upper(|s| 1.0 / (1.0 - s).sqrt(), 0.0, 1.0, 1e-13, 1e-13).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn root_scan_finds_all() {
        let roots = scan_roots(|x| (x - 0.25) * (x - 0.5) * (x - 0.9), 0.0, 1.0, 1000, 1e-13, 1e-9);
        assert_eq!(roots.len(), 3);
        assert!((roots[0] - 0.25).abs() < 1e-12);
        assert!((roots[1] - 0.5).abs() < 1e-12);
        assert!((roots[2] - 0.9).abs() < 1e-12);
    }
}
