//! Bounded steady states by phase-plane quadrature.
//!
//! Every stationary solution of v'' + f(v) = 0 lives on a level set
//! v'^2 = F(v) - q. Three arcs matter here:
//!
//! * ground state: q = 0, even pulse with peak theta, exponential tail;
//! * active state: q = F(1), increasing connection from 0 to 1;
//! * compact bump: q = F(m) for m in (theta, 1), supported on [0, 2 L_m].
//!
//! Profiles are tabulated by inverting the arc-length map
//! x(v) = int dv / sqrt(F - q). The inversion uses Newton steps with the
//! analytic derivative; the square-root endpoint at the turning value v = c
//! (F(c) = q simple zero) is removed by the substitution s = c - w^2, and the
//! logarithmic divergences toward v = 0 resp. v = 1 are split off in closed
//! form so the remaining integrands stay smooth.

use crate::nonlinearity::{compute_constants, FKind, Nonlinearity};
use crate::quad;
use crate::{Error, Result};

const QUAD_ABS: f64 = 1e-14;
const QUAD_REL: f64 = 1e-13;
const NEWTON_TOL: f64 = 1e-13;

fn sqrt_pos(x: f64) -> f64 {
    if x > 0.0 {
        x.sqrt()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileKind {
    Ground,
    Active,
    CompactBump { m: f64 },
}

/// Analytic continuation beyond the tabulated grid.
#[derive(Debug, Clone)]
pub enum Tail {
    /// V(z) ~ amp e^{-rate z} - correction.1 e^{-correction.0 rate z}.
    Ground { amp: f64, rate: f64, correction: Option<(u32, f64)> },
    /// v(x) ~ 1 - amp e^{-rate x}.
    Active { amp: f64, rate: f64 },
    /// Identically zero outside [0, support_end].
    BumpSupport { support_end: f64 },
}

/// A tabulated steady state on a uniform grid with first-integral node
/// derivatives and an analytic tail.
#[derive(Debug, Clone)]
pub struct SteadyProfile {
    pub kind: ProfileKind,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Nodal derivative from the trajectory relation, not finite differences.
    pub node_derivs: Vec<f64>,
    pub dx: f64,
    pub tail: Tail,
    /// L_m for compact bumps.
    pub half_width: Option<f64>,
}

impl SteadyProfile {
    pub fn x_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Profile value; ground states are evaluated evenly in z, bumps vanish
    /// outside their support, the others use the analytic tail beyond the grid.
    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            ProfileKind::Ground => {
                let z = x.abs();
                if z <= self.x_max() {
                    self.interp(z)
                } else if let Tail::Ground { amp, rate, correction } = &self.tail {
                    let v = amp * (-rate * z).exp();
                    match correction {
                        Some((k, h)) => v - h * (-(*k as f64) * rate * z).exp(),
                        None => v,
                    }
                } else {
                    unreachable!()
                }
            }
            ProfileKind::Active => {
                if x <= 0.0 {
                    self.values[0]
                } else if x <= self.x_max() {
                    self.interp(x)
                } else if let Tail::Active { amp, rate } = &self.tail {
                    1.0 - amp * (-rate * x).exp()
                } else {
                    unreachable!()
                }
            }
            ProfileKind::CompactBump { .. } => {
                if x <= 0.0 || x >= self.x_max() {
                    0.0
                } else {
                    self.interp(x)
                }
            }
        }
    }

    /// First derivative via the trajectory relation v'^2 = F(v) - q.
    pub fn deriv(&self, x: f64, f: &Nonlinearity) -> f64 {
        match self.kind {
            ProfileKind::Ground => {
                if x == 0.0 {
                    return 0.0;
                }
                let v = self.eval(x);
                -x.signum() * sqrt_pos(f.big_f(v))
            }
            ProfileKind::Active => {
                let v = self.eval(x);
                sqrt_pos(f.d_to_one(v))
            }
            ProfileKind::CompactBump { m } => {
                if x <= 0.0 || x >= self.x_max() {
                    return 0.0;
                }
                let v = self.eval(x);
                let half = self.half_width.unwrap();
                let d = sqrt_pos(f.big_f_drop(m, m - v));
                if x <= half {
                    d
                } else {
                    -d
                }
            }
        }
    }

    /// Cubic Hermite interpolation between nodes (first-integral derivatives).
    fn interp(&self, x: f64) -> f64 {
        let n = self.values.len() - 1;
        let pos = (x / self.dx).min(n as f64 - 1e-12);
        let i = (pos.floor() as usize).min(n - 1);
        let t = pos - i as f64;
        let h = self.dx;
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.node_derivs[i], self.node_derivs[i + 1]);
        let (t2, t3) = (t * t, t * t * t);
        v0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + h * d0 * (t3 - 2.0 * t2 + t)
            + v1 * (-2.0 * t3 + 3.0 * t2)
            + h * d1 * (t3 - t2)
    }

    /// Max |v'' + f(v)| over interior nodes with the centered second
    /// difference; the standard discrete stationarity residual.
    pub fn residual_sup(&self, f: &Nonlinearity) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.values.len() - 1 {
            let d2 = (self.values[i - 1] - 2.0 * self.values[i] + self.values[i + 1]) / (self.dx * self.dx);
            worst = worst.max((d2 + f.f(self.values[i])).abs());
        }
        worst
    }

    /// Max |v'^2 - (F(v) - q)| over interior nodes, q from the kind.
    pub fn first_integral_sup(&self, f: &Nonlinearity) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.values.len() - 1 {
            let v = self.values[i];
            let gap = match self.kind {
                ProfileKind::Ground => f.big_f(v),
                ProfileKind::Active => f.d_to_one(v),
                ProfileKind::CompactBump { m } => f.big_f_drop(m, m - v),
            };
            let d = self.node_derivs[i];
            worst = worst.max((d * d - gap).abs());
        }
        worst
    }
}

impl Nonlinearity {
    /// F(s) - F(1), written so the double zero at s = 1 costs no precision
    /// for the builtin cubic.
    pub fn d_to_one(&self, s: f64) -> f64 {
        match &self.kind {
            FKind::Cubic { alpha } => {
                let p1 = 0.5 * s * s + (1.0 - 2.0 * alpha) * s / 3.0 + (1.0 - 2.0 * alpha) / 6.0;
                (1.0 - s) * (1.0 - s) * p1
            }
            FKind::Table(_) => self.big_f(s) - self.f_one,
        }
    }

    /// 1/sqrt(F(s)) - 1/(lambda s), the bounded part of the arc-length
    /// integrand toward s = 0; cancellation-free for the cubic.
    fn inv_sqrt_f_reg(&self, s: f64) -> f64 {
        let lam = self.lambda;
        match &self.kind {
            FKind::Cubic { alpha } => {
                let p = 0.5 * s * s - (2.0 * (1.0 + alpha) / 3.0) * s + alpha;
                let q = 0.5 * s - 2.0 * (1.0 + alpha) / 3.0;
                let sp = p.sqrt();
                -q / (lam * sp * (lam + sp))
            }
            FKind::Table(_) => 1.0 / self.big_f(s).sqrt() - 1.0 / (lam * s),
        }
    }
}

/// Arc length from the turning point c of the arc v'^2 = F(v) - F(c):
/// zeta(w) = int_0^w 2 o / sqrt(F(c - o^2) - F(c)) do, the substituted
/// distance between v = c and v = c - w^2. The potential drop under the
/// root goes through `big_f_drop`, so the integrand stays clean down to
/// w = 0 where the naive difference would cancel catastrophically.
fn cap_zeta(f: &Nonlinearity, c: f64, w_lo: f64, w_hi: f64) -> Result<f64> {
    let r = quad::integrate(
        |w| 2.0 * w / sqrt_pos(f.big_f_drop(c, w * w)).max(1e-300),
        w_lo,
        w_hi,
        QUAD_ABS,
        QUAD_REL,
    )?;
    Ok(r.value)
}

/// Newton inversion of zeta on the cap: find w with zeta(w) = target.
fn invert_cap(f: &Nonlinearity, c: f64, target: f64, w_init: f64, w_limit: f64) -> Result<f64> {
    let mut w = w_init.clamp(1e-14, w_limit);
    let mut zeta_anchor = cap_zeta(f, c, 0.0, w)?;
    for _ in 0..60 {
        let r = zeta_anchor - target;
        if r.abs() <= NEWTON_TOL {
            return Ok(w);
        }
        let slope = 2.0 * w / sqrt_pos(f.big_f_drop(c, w * w)).max(1e-300);
        let mut w_new = w - r / slope;
        if !w_new.is_finite() {
            return Err(Error::InversionFailure(target));
        }
        w_new = w_new.clamp(0.25 * w, (4.0 * w).min(w_limit));
        zeta_anchor += cap_zeta(f, c, w, w_new)?;
        w = w_new;
    }
    Err(Error::InversionFailure(target))
}

/// Inverter for the ground-state relation z = int_V^theta ds / sqrt(F).
struct GroundMap<'a> {
    f: &'a Nonlinearity,
    /// Below this value the map switches from the substituted cap to the
    /// log-split form.
    s_sing: f64,
    z_sing: f64,
}

impl<'a> GroundMap<'a> {
    fn new(f: &'a Nonlinearity) -> Result<Self> {
        let s_sing = 0.75 * f.theta;
        let w_sing = (f.theta - s_sing).sqrt();
        let z_sing = cap_zeta(f, f.theta, 0.0, w_sing)?;
        Ok(Self { f, s_sing, z_sing })
    }

    fn z_of_v(&self, v: f64) -> Result<f64> {
        let f = self.f;
        if v >= self.s_sing {
            cap_zeta(f, f.theta, 0.0, (f.theta - v).max(0.0).sqrt())
        } else {
            let reg = quad::integrate(|s| f.inv_sqrt_f_reg(s), v, self.s_sing, QUAD_ABS, QUAD_REL)?;
            Ok(self.z_sing + (self.s_sing / v).ln() / f.lambda + reg.value)
        }
    }

    /// Solve z(V) = z for V < s_sing by Newton with dz/dV = -1/sqrt(F).
    fn v_of_z(&self, z: f64, v_init: f64) -> Result<f64> {
        let f = self.f;
        let mut v = v_init.clamp(1e-300, self.s_sing);
        for _ in 0..60 {
            let r = self.z_of_v(v)? - z;
            if r.abs() <= NEWTON_TOL * z.max(1.0) {
                return Ok(v);
            }
            let step = r * sqrt_pos(f.big_f(v));
            let v_new = (v + step).clamp(0.25 * v, self.s_sing);
            if v_new == v {
                return Ok(v);
            }
            v = v_new;
        }
        Err(Error::InversionFailure(z))
    }
}

/// Build the even ground pulse V on [0, z_max]: V(0) = theta, V' < 0 on
/// (0, infinity), V'^2 = F(V), tail A e^{-lambda z}.
pub fn build_ground_state(f: &Nonlinearity, z_max: f64, n: usize) -> Result<SteadyProfile> {
    assert!(z_max >= 5.0 / f.lambda, "z_max must cover a few decay lengths");
    assert!(n >= 16);
    let dx = z_max / n as f64;
    let map = GroundMap::new(f)?;
    let consts = compute_constants(f)?;

    let mut values = Vec::with_capacity(n + 1);
    values.push(f.theta);
    let mut w_prev = 0.0;
    let w_limit = (f.theta - 1e-300).sqrt();
    let mut v_prev = f.theta;
    for i in 1..=n {
        let z = i as f64 * dx;
        let v = if z <= map.z_sing {
            // turning-point cap: invert in w = sqrt(theta - V)
            let slope0 = 2.0 / (2.0 * f.f(f.theta)).max(1e-300).sqrt();
            let w_init = if w_prev == 0.0 {
                z / slope0
            } else {
                w_prev + dx * sqrt_pos(f.big_f_drop(f.theta, w_prev * w_prev)) / (2.0 * w_prev)
            };
            let w = invert_cap(f, f.theta, z, w_init, w_limit)?;
            w_prev = w;
            f.theta - w * w
        } else {
            let guess = (v_prev - dx * sqrt_pos(f.big_f(v_prev))).max(0.25 * v_prev);
            let guess = if v_prev >= map.s_sing { v_prev.min(map.s_sing * 0.999999) } else { guess };
            map.v_of_z(z, guess)?
        };
        if !(v > 0.0 && v < v_prev) {
            return Err(Error::InversionFailure(z));
        }
        values.push(v);
        v_prev = v;
    }

    let node_derivs: Vec<f64> = values.iter().map(|&v| -sqrt_pos(f.big_f(v))).collect();
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 * dx).collect();
    Ok(SteadyProfile {
        kind: ProfileKind::Ground,
        grid,
        values,
        node_derivs,
        dx,
        tail: Tail::Ground {
            amp: consts.tail_amplitude,
            rate: f.lambda,
            correction: consts.tail_correction,
        },
        half_width: None,
    })
}

/// z-coordinate on the ground state for a given value v in (0, theta):
/// z = int_v^theta ds/sqrt(F(s)).
pub fn ground_z_of_value(f: &Nonlinearity, v: f64) -> Result<f64> {
    assert!(v > 0.0 && v < f.theta);
    GroundMap::new(f)?.z_of_v(v)
}

/// Build the increasing connection v_* on [0, x_max]: v_*(0) = 0,
/// v_*(inf) = 1, v_*'^2 = F(v_*) - F(1).
pub fn build_active_state(f: &Nonlinearity, x_max: f64, n: usize) -> Result<SteadyProfile> {
    assert!(n >= 16);
    let fp1 = f.fp(1.0);
    if !(fp1 < 0.0) {
        return Err(Error::NotBistable("f'(1) must be negative for the connecting profile".into()));
    }
    let mu = (-fp1).sqrt();
    let dx = x_max / n as f64;

    // Regularized arc length: x(v) = -ln(1-v)/mu + int_0^v G1, where
    // G1 = 1/sqrt(F - F(1)) - 1/(mu (1-s)) extends continuously to s = 1.
    let g1 = |s: f64| 1.0 / f.d_to_one(s).sqrt() - 1.0 / (mu * (1.0 - s));
    let x_of_v = |v: f64| -> Result<f64> {
        let reg = quad::integrate(g1, 0.0, v, QUAD_ABS, QUAD_REL)?;
        Ok(-(1.0 - v).ln() / mu + reg.value)
    };

    // Tabulated data stops resolving 1 - v near machine scale; beyond that
    // the analytic tail serves the nodes directly.
    let v_ceiling = match &f.kind {
        FKind::Cubic { .. } => 1.0 - 1e-11,
        FKind::Table(_) => 1.0 - 1e-5,
    };
    let j_full = quad::integrate(g1, 0.0, v_ceiling, QUAD_ABS, QUAD_REL)?.value
        + g1(v_ceiling) * (1.0 - v_ceiling);
    let tail_amp = (mu * j_full).exp();

    let mut values = vec![0.0];
    let mut v_prev = 0.0;
    let mut analytic_from = usize::MAX;
    for i in 1..=n {
        let x = i as f64 * dx;
        if v_prev >= v_ceiling || analytic_from != usize::MAX {
            if analytic_from == usize::MAX {
                analytic_from = i;
            }
            values.push(1.0 - tail_amp * (-mu * x).exp());
            continue;
        }
        let mut v = (v_prev + dx * f.d_to_one(v_prev).sqrt()).min(v_ceiling);
        let mut done = false;
        for _ in 0..60 {
            let r = x_of_v(v)? - x;
            if r.abs() <= NEWTON_TOL * x.max(1.0) {
                done = true;
                break;
            }
            let v_new = (v - r * f.d_to_one(v).sqrt()).clamp(v_prev, v_ceiling);
            if v_new == v {
                done = true;
                break;
            }
            v = v_new;
        }
        if !done {
            return Err(Error::InversionFailure(x));
        }
        values.push(v);
        v_prev = v;
    }

    let node_derivs: Vec<f64> = values.iter().map(|&v| sqrt_pos(f.d_to_one(v))).collect();
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 * dx).collect();
    Ok(SteadyProfile {
        kind: ProfileKind::Active,
        grid,
        values,
        node_derivs,
        dx,
        tail: Tail::Active { amp: tail_amp, rate: mu },
        half_width: None,
    })
}

/// L_m = int_0^m ds / sqrt(F(s) - F(m)), the half-width of the compact bump.
pub fn bump_half_width(f: &Nonlinearity, m: f64) -> Result<f64> {
    if !(m > f.theta && m < 1.0) {
        return Err(Error::InvalidM(m, "(theta, 1)"));
    }
    cap_zeta(f, m, 0.0, m.sqrt())
}

/// Build the compact bump v_m on [0, 2 L_m], peak value m at the midpoint,
/// extended by zero outside the support.
pub fn build_compact_bump(f: &Nonlinearity, m: f64, n: usize) -> Result<SteadyProfile> {
    let l_m = bump_half_width(f, m)?;
    let n = (n.max(16) / 2) * 2; // keep the midpoint on the grid
    let dx = 2.0 * l_m / n as f64;
    let half = n / 2;
    let drop_at = |s: f64| f.big_f_drop(m, m - s); // F(s) - F(m), stable

    let s_sing = 0.75 * m;
    let w_sing = (m - s_sing).sqrt();
    let zeta_sing = cap_zeta(f, m, 0.0, w_sing)?;
    let w_limit = m.sqrt() * (1.0 - 1e-12);

    // March the left half in x, anchored incremental Newton away from the
    // cap, substituted inversion inside it.
    let mut values = vec![0.0];
    let mut v_prev = 0.0;
    let mut x_prev = 0.0;
    let mut w_prev = 0.0;
    for i in 1..=half {
        let x = i as f64 * dx;
        let zeta = l_m - x; // distance to the peak
        let v = if zeta <= zeta_sing {
            let w_init = if w_prev == 0.0 { w_sing * 0.5 } else { w_prev };
            let w = invert_cap(f, m, zeta.max(0.0), w_init, w_limit)?;
            w_prev = w;
            m - w * w
        } else {
            let mut v = (v_prev + dx * sqrt_pos(drop_at(v_prev))).min(s_sing);
            let mut x_acc = x_prev
                + quad::integrate(|s| 1.0 / sqrt_pos(drop_at(s)).max(1e-300), v_prev, v, QUAD_ABS, QUAD_REL)?.value;
            let mut done = false;
            for _ in 0..60 {
                let r = x_acc - x;
                if r.abs() <= NEWTON_TOL * x.max(1.0) {
                    done = true;
                    break;
                }
                let v_new = (v - r * sqrt_pos(drop_at(v))).clamp(v_prev, s_sing);
                if v_new == v {
                    done = true;
                    break;
                }
                x_acc +=
                    quad::integrate(|s| 1.0 / sqrt_pos(drop_at(s)).max(1e-300), v, v_new, QUAD_ABS, QUAD_REL)?.value;
                v = v_new;
            }
            if !done {
                return Err(Error::InversionFailure(x));
            }
            v
        };
        values.push(v);
        if zeta > zeta_sing {
            v_prev = v;
            x_prev = x;
        }
    }

    // Mirror about the midpoint.
    for i in (0..half).rev() {
        let v = values[i];
        values.push(v);
    }
    let node_derivs: Vec<f64> = (0..=n)
        .map(|i| {
            let sign = if i < half {
                1.0
            } else if i > half {
                -1.0
            } else {
                0.0
            };
            sign * sqrt_pos(drop_at(values[i]))
        })
        .collect();
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 * dx).collect();
    Ok(SteadyProfile {
        kind: ProfileKind::CompactBump { m },
        grid,
        values,
        node_derivs,
        dx,
        tail: Tail::BumpSupport { support_end: 2.0 * l_m },
        half_width: Some(l_m),
    })
}

/// A ground shift: V(. - z) satisfies the Robin condition because
/// V(-z) = s0 with b sqrt(F(s0)) = s0.
#[derive(Debug, Clone, Copy)]
pub struct GroundShift {
    pub s0: f64,
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct ShiftSets {
    pub b: f64,
    /// Sorted by z; empty is a valid result.
    pub ground: Vec<GroundShift>,
    /// Shifts z <= 0 with v_*(-z) = b v_*'(-z); {0} for b = 0.
    pub active: Vec<f64>,
}

/// All Robin-compatible shifts of the ground and active states.
pub fn find_shift_sets(
    f: &Nonlinearity,
    ground: &SteadyProfile,
    active: &SteadyProfile,
    b: f64,
) -> Result<ShiftSets> {
    assert!(b >= 0.0);
    let mut ground_shifts = Vec::new();
    if b > 0.0 {
        let s_roots = quad::scan_roots(
            |s| b * f.big_f(s).sqrt() - s,
            f.theta * 1e-6,
            f.theta * (1.0 - 1e-12),
            10_000,
            1e-12,
            1e-9,
        );
        let map = GroundMap::new(f)?;
        for s0 in s_roots {
            let z = map.z_of_v(s0)?;
            ground_shifts.push(GroundShift { s0, z });
        }
        ground_shifts.sort_by(|a, b| a.z.partial_cmp(&b.z).unwrap());
    }
    let _ = ground; // ground profile is the object the shifts apply to

    let active_shifts = if b == 0.0 {
        vec![0.0]
    } else {
        let x_hi = active.x_max();
        let r = |x: f64| active.eval(x) - b * active.deriv(x, f);
        let roots = quad::scan_roots(r, x_hi * 1e-7, x_hi, 10_000, 1e-12, 1e-9);
        roots.into_iter().map(|x| -x).collect()
    };

    Ok(ShiftSets { b, ground: ground_shifts, active: active_shifts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> Nonlinearity {
        Nonlinearity::cubic(0.25).unwrap()
    }

    #[test]
    fn ground_peak_and_monotonicity() {
        let f = cubic();
        let v = build_ground_state(&f, 20.0, 2000).unwrap();
        assert_eq!(v.values[0], f.theta);
        assert!(v.values.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(v.eval(-3.7), v.eval(3.7)); // even by construction
    }

    #[test]
    fn ground_first_integral() {
        let f = cubic();
        let v = build_ground_state(&f, 20.0, 2000).unwrap();
        assert!(v.first_integral_sup(&f) < 1e-8, "gap {}", v.first_integral_sup(&f));
    }

    #[test]
    fn ground_residual_second_order() {
        let f = cubic();
        let coarse = build_ground_state(&f, 16.0, 800).unwrap();
        let fine = build_ground_state(&f, 16.0, 1600).unwrap();
        let (rc, rf) = (coarse.residual_sup(&f), fine.residual_sup(&f));
        assert!(rf < rc / 3.0, "no O(dx^2) reduction: {rc} -> {rf}");
    }

    #[test]
    fn ground_tail_matches_amplitude() {
        let f = cubic();
        let consts = compute_constants(&f).unwrap();
        let v = build_ground_state(&f, 28.0, 2800).unwrap();
        let z = 12.0 / f.lambda;
        let scaled = (f.lambda * z).exp() * v.eval(z);
        let rel = (scaled - consts.tail_amplitude).abs() / consts.tail_amplitude;
        assert!(rel < 1e-3, "e^(lambda z) V(z) = {scaled} vs A = {}", consts.tail_amplitude);
    }

    #[test]
    fn active_boundary_and_slope() {
        let f = cubic();
        let v = build_active_state(&f, 30.0, 3000).unwrap();
        assert_eq!(v.values[0], 0.0);
        let slope = v.deriv(0.0, &f);
        assert!((slope - (1.0f64 / 12.0).sqrt()).abs() < 1e-12, "v'(0) = {slope}");
        assert!(v.values.windows(2).all(|w| w[1] > w[0]));
        assert!(v.first_integral_sup(&f) < 1e-8);
        // approaches 1
        assert!((v.eval(40.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bump_shape() {
        let f = cubic();
        let m = 0.7;
        let v = build_compact_bump(&f, m, 1000).unwrap();
        let l = v.half_width.unwrap();
        assert!((v.eval(l) - m).abs() < 1e-10, "peak {} vs m {}", v.eval(l), m);
        assert_eq!(v.values[0], 0.0);
        assert_eq!(*v.values.last().unwrap(), 0.0);
        assert_eq!(v.eval(2.0 * l + 0.5), 0.0);
        let d0 = v.deriv(1e-9, &f);
        assert!((d0 - (-f.big_f(m)).sqrt()).abs() < 1e-9, "v'(0) = {d0}");
        assert!(v.first_integral_sup(&f) < 1e-8);
    }

    #[test]
    fn bump_width_grows_toward_theta() {
        let f = cubic();
        let t = f.theta;
        let l1 = bump_half_width(&f, t + 0.01).unwrap();
        let l2 = bump_half_width(&f, t + 0.1).unwrap();
        let l3 = bump_half_width(&f, t + 0.3).unwrap();
        assert!(l1 > l2 && l2 > l3, "{l1} {l2} {l3}");
        assert!(bump_half_width(&f, t - 0.01).is_err());
        assert!(bump_half_width(&f, 1.0).is_err());
    }

    #[test]
    fn shift_sets_dirichlet() {
        let f = cubic();
        let ground = build_ground_state(&f, 20.0, 2000).unwrap();
        let active = build_active_state(&f, 30.0, 3000).unwrap();
        let s = find_shift_sets(&f, &ground, &active, 0.0).unwrap();
        assert!(s.ground.is_empty());
        assert_eq!(s.active, vec![0.0]);
    }

    #[test]
    fn shift_sets_b3_unique_ground_pair() {
        let f = cubic();
        let ground = build_ground_state(&f, 20.0, 2000).unwrap();
        let active = build_active_state(&f, 30.0, 3000).unwrap();
        let s = find_shift_sets(&f, &ground, &active, 3.0).unwrap();
        assert_eq!(s.ground.len(), 1);
        let s0_exact = (7.5 - 33.75f64.sqrt()) / 9.0;
        assert!((s.ground[0].s0 - s0_exact).abs() < 1e-10);
        // Robin residual through the profile evaluators
        let z = s.ground[0].z;
        let resid = (ground.eval(-z) - 3.0 * ground.deriv(-z, &f)).abs();
        assert!(resid < 1e-8, "residual {resid}");
        assert!(!s.active.is_empty());
        for &za in &s.active {
            let x = -za;
            let r = (active.eval(x) - 3.0 * active.deriv(x, &f)).abs();
            assert!(r < 1e-8, "active residual {r} at z = {za}");
        }
    }

    #[test]
    fn shift_sets_empty_below_critical_b() {
        let f = cubic();
        let ground = build_ground_state(&f, 20.0, 2000).unwrap();
        let active = build_active_state(&f, 30.0, 3000).unwrap();
        let s = find_shift_sets(&f, &ground, &active, 1.5).unwrap();
        assert!(s.ground.is_empty(), "g > 2 on (0,theta) for this cubic");
    }

    #[test]
    fn ground_z_map_roundtrip() {
        let f = cubic();
        let v = build_ground_state(&f, 20.0, 2000).unwrap();
        for &val in &[0.3, 0.1, 0.01, 1e-4] {
            let z = ground_z_of_value(&f, val).unwrap();
            assert!((v.eval(z) - val).abs() < 1e-10, "roundtrip at {val}: V({z}) = {}", v.eval(z));
        }
    }
}
