//! Finite-difference evolution of u_t = u_xx + f(u) on a truncated,
//! growing half-line with the Robin condition u(0) = b u_x(0).
//!
//! One step is IMEX: diffusion by the theta-scheme (Crank-Nicolson by
//! default, tridiagonal solve), reaction explicit at the midpoint of the
//! step via a half-step Euler predictor, so the whole step is second order
//! at theta = 1/2. The Robin condition enters through a ghost node,
//! u_{-1} = u_1 - (2 dx / b) u_0, keeping the boundary flux second order;
//! b = 0 pins u_0 = 0. The right end is homogeneous Dirichlet behind a
//! far-field margin, and the domain doubles whenever the solution reaches
//! the sentinel node in front of that margin.

use crate::nonlinearity::Nonlinearity;
use crate::steady;
use crate::{Error, Result};

/// Discretized solution on x_i = i dx, i = 0..=n, at time t.
#[derive(Debug, Clone)]
pub struct Field {
    pub b: f64,
    pub dx: f64,
    pub values: Vec<f64>,
    pub t: f64,
}

impl Field {
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn x_max(&self) -> f64 {
        self.n() as f64 * self.dx
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    /// Index and refined position/value of the global maximum (parabolic
    /// interpolation through the three nodes around the argmax).
    pub fn argmax_refined(&self) -> (usize, f64, f64) {
        let mut i_max = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[i_max] {
                i_max = i;
            }
        }
        let (x, u) = refine_peak(&self.values, i_max, self.dx);
        (i_max, x, u)
    }

    /// |u_0 - b (-3u_0 + 4u_1 - u_2)/(2dx)|: second-order one-sided check of
    /// the Robin condition (|u_0| for b = 0).
    pub fn robin_residual(&self) -> f64 {
        let u = &self.values;
        if self.b == 0.0 {
            u[0].abs()
        } else {
            (u[0] - self.b * (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * self.dx)).abs()
        }
    }

    /// Append zero nodes, doubling the domain; existing values are untouched.
    pub fn grow(&mut self) {
        let n = self.values.len();
        self.values.resize(2 * n - 1, 0.0);
    }
}

/// Parabolic refinement of a grid peak; returns (x, value).
pub fn refine_peak(values: &[f64], i: usize, dx: f64) -> (f64, f64) {
    if i == 0 || i + 1 >= values.len() {
        return (i as f64 * dx, values[i]);
    }
    let (ym, y0, yp) = (values[i - 1], values[i], values[i + 1]);
    let denom = ym - 2.0 * y0 + yp;
    if denom.abs() < 1e-300 {
        return (i as f64 * dx, y0);
    }
    let delta = ((ym - yp) / (2.0 * denom)).clamp(-0.5, 0.5);
    let peak = y0 - 0.125 * (ym - yp) * delta;
    ((i as f64 + delta) * dx, peak)
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub dx: f64,
    pub dt: f64,
    /// Time weighting of the implicit diffusion term; 1/2 = Crank-Nicolson,
    /// 1 = fully implicit fallback for stiff tabulated reactions.
    pub theta_scheme: f64,
    /// Initial domain length (grown on demand).
    pub l0: f64,
    /// Solution values below this are treated as far field.
    pub far_field_tol: f64,
    /// Distance kept between the support of u and the truncation boundary.
    pub growth_margin: f64,
    pub max_t: f64,
}

impl SolverConfig {
    /// Defaults scaled by the decay length 1/lambda of the nonlinearity.
    pub fn for_nonlinearity(f: &Nonlinearity, dx: f64, dt: f64, max_t: f64) -> Self {
        SolverConfig {
            dx,
            dt,
            theta_scheme: 0.5,
            l0: 40.0 / f.lambda,
            far_field_tol: 1e-12,
            growth_margin: 20.0 / f.lambda,
            max_t,
        }
    }
}

// ---------------------------------------------------------------------------
// Initial data
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpShape {
    Triangle,
    Smooth,
    Plateau,
}

#[derive(Debug, Clone)]
pub enum DatumFamily {
    /// sigma * phi with phi a unit bump supported on [0, h].
    ScaledBump { shape: BumpShape, h: f64, sigma: f64 },
    /// Ground state V(x - z0) capped to zero over (2 z0, 2 z0 + rho].
    CappedGround { z0: f64, rho: f64 },
    /// Zero on the support [0, 2 L_m - x_m] of the shifted bump v_m(. + x_m),
    /// a unit bump just beyond it.
    BumpOffset { m: f64, x_m: f64 },
}

/// A rendered compactly supported nonnegative initial datum.
#[derive(Debug, Clone)]
pub struct InitialDatum {
    pub family: DatumFamily,
    /// Values on x_i = i dx covering the support.
    pub values: Vec<f64>,
    pub dx: f64,
    /// Support bound h: the datum vanishes on [h, infinity).
    pub support: f64,
}

fn smooth_unit_bump(r: f64) -> f64 {
    // exp(1 - 1/(1 - (2r-1)^2)) on (0,1), peak 1 at r = 1/2
    let s = 2.0 * r - 1.0;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn smooth_step(r: f64) -> f64 {
    // C-infinity step: 0 for r <= 0, 1 for r >= 1
    if r <= 0.0 {
        0.0
    } else if r >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / r).exp();
        let b = (-1.0 / (1.0 - r)).exp();
        a / (a + b)
    }
}

impl InitialDatum {
    pub fn render(family: DatumFamily, f: &Nonlinearity, dx: f64) -> Result<Self> {
        let (support, shape): (f64, Box<dyn Fn(f64) -> f64>) = match &family {
            DatumFamily::ScaledBump { shape, h, sigma } => {
                if !(*h > 0.0) || !(*sigma >= 0.0) {
                    return Err(Error::Config("bump needs h > 0 and sigma >= 0".into()));
                }
                let (h, sigma, shape) = (*h, *sigma, *shape);
                let g = move |x: f64| -> f64 {
                    if x <= 0.0 || x >= h {
                        return 0.0;
                    }
                    let r = x / h;
                    sigma
                        * match shape {
                            BumpShape::Triangle => 1.0 - (2.0 * r - 1.0).abs(),
                            BumpShape::Smooth => smooth_unit_bump(r),
                            BumpShape::Plateau => {
                                let w = 0.125; // ramp fraction
                                smooth_step(r / w) * smooth_step((1.0 - r) / w)
                            }
                        }
                };
                (h, Box::new(g) as Box<dyn Fn(f64) -> f64>)
            }
            DatumFamily::CappedGround { z0, rho } => {
                if !(*z0 > 0.0) || !(*rho > 0.0) {
                    return Err(Error::Config("capped ground needs z0 > 0, rho > 0".into()));
                }
                let (z0, rho) = (*z0, *rho);
                let z_need = z0 + rho + 8.0 / f.lambda;
                let n_gs = ((z_need * f.lambda / 0.01).ceil() as usize).max(64);
                let ground = steady::build_ground_state(f, z_need, n_gs)?;
                let g = move |x: f64| -> f64 {
                    if x >= 2.0 * z0 + rho {
                        0.0
                    } else if x <= 2.0 * z0 {
                        ground.eval(x - z0)
                    } else {
                        let r = (x - 2.0 * z0) / rho;
                        ground.eval(x - z0) * 0.5 * (1.0 + (std::f64::consts::PI * r).cos())
                    }
                };
                (2.0 * z0 + rho, Box::new(g) as Box<dyn Fn(f64) -> f64>)
            }
            DatumFamily::BumpOffset { m, x_m } => {
                let l_m = steady::bump_half_width(f, *m)?;
                if !(*x_m > 0.0 && *x_m < 2.0 * l_m) {
                    return Err(Error::Config(format!("x_m must lie in (0, 2 L_m) = (0, {})", 2.0 * l_m)));
                }
                let gap = 2.0 * l_m - x_m;
                let width = 2.0 / f.lambda;
                let g = move |x: f64| -> f64 {
                    if x <= gap || x >= gap + width {
                        0.0
                    } else {
                        smooth_unit_bump((x - gap) / width)
                    }
                };
                (gap + width, Box::new(g) as Box<dyn Fn(f64) -> f64>)
            }
        };
        let n = (support / dx).ceil() as usize + 1;
        let values: Vec<f64> = (0..=n).map(|i| shape(i as f64 * dx).max(0.0)).collect();
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::Config("initial datum is identically zero".into()));
        }
        Ok(InitialDatum { family, values, dx, support })
    }

    /// Field with u_0 = sigma * phi on a domain of at least cfg.l0, sized so
    /// the support sits well clear of the truncation boundary.
    pub fn make_field(&self, cfg: &SolverConfig, b: f64, sigma: f64) -> Field {
        assert!((self.dx - cfg.dx).abs() < 1e-12 * cfg.dx, "datum rendered at a different dx");
        let len = cfg.l0.max(self.support + cfg.growth_margin + 1.0);
        let n = (len / cfg.dx).ceil() as usize;
        let mut values = vec![0.0; n + 1];
        for (i, v) in self.values.iter().enumerate() {
            if i < values.len() - 1 {
                values[i] = sigma * v;
            }
        }
        Field { b, dx: cfg.dx, values, t: 0.0 }
    }
}

// ---------------------------------------------------------------------------
// Stepper
// ---------------------------------------------------------------------------

/// Owns the work buffers and the clipping/blowup policy for one run.
pub struct Solver<'a> {
    pub cfg: SolverConfig,
    f: &'a Nonlinearity,
    /// Reaction substeps so that (dt/substeps) max|f'| <= 0.5 on the range
    /// of the initial datum.
    substeps: usize,
    /// Remaining fully implicit startup substeps; damps the Crank-Nicolson
    /// oscillation that kinked initial data excite at dt/dx^2 >> 1.
    startup_left: u32,
    sup_bound: f64,
    running_sup: f64,
    pub clipped: u64,
    rhs: Vec<f64>,
    dp: Vec<f64>,
    cache: Option<TridiagCache>,
}

/// Precomputed Thomas factorization of (I - dt tw D2): the coefficients
/// depend only on the grid and the step, so the per-step sweep carries no
/// divisions in its serial dependency chain.
struct TridiagCache {
    n: usize,
    dt: f64,
    b: f64,
    tw: f64,
    rtw: f64,
    /// Upper-triangular factors c'_i of the sweep.
    cp: Vec<f64>,
    /// Reciprocals 1/(diag - lower c'_{i-1}).
    inv: Vec<f64>,
    first: usize,
}

impl TridiagCache {
    fn build(n: usize, dx: f64, dt: f64, tw: f64, b: f64) -> Self {
        let rtw = dt / (dx * dx) * tw;
        let dirichlet = b == 0.0;
        let first = if dirichlet { 1 } else { 0 };
        let diag = 1.0 + 2.0 * rtw;
        let mut cp = vec![0.0; n + 1];
        let mut inv = vec![0.0; n + 1];
        let mut prev_c = 0.0;
        if !dirichlet {
            let inv0 = 1.0 / (1.0 + 2.0 * rtw * (1.0 + dx / b));
            cp[0] = -2.0 * rtw * inv0;
            inv[0] = inv0;
            prev_c = cp[0];
        }
        for i in first.max(1)..n {
            let invd = 1.0 / (diag + rtw * prev_c);
            prev_c = -rtw * invd;
            cp[i] = prev_c;
            inv[i] = invd;
        }
        TridiagCache { n, dt, b, tw, rtw, cp, inv, first }
    }
}

/// Inner kernel of one substep, monomorphized over the reaction evaluator so
/// the cubic inlines into the hot loops.
fn substep_kernel<FEval: Fn(f64) -> f64>(
    field: &mut Field,
    rhs: &mut Vec<f64>,
    dp: &mut Vec<f64>,
    cache: &TridiagCache,
    dt: f64,
    tw: f64,
    feval: FEval,
) -> f64 {
    let n = field.values.len() - 1;
    let inv = 1.0 / (field.dx * field.dx);
    if rhs.len() != n + 1 {
        rhs.clear();
        rhs.resize(n + 1, 0.0);
        dp.clear();
        dp.resize(n + 1, 0.0);
    }

    // Single pass: laplacian, half-step reaction predictor, explicit rhs.
    {
        let u = &field.values;
        let rhs = &mut rhs[..];
        let half_dt = 0.5 * dt;
        let expl = dt * (1.0 - tw);
        let lap0 = if field.b > 0.0 {
            2.0 * (u[1] - (1.0 + field.dx / field.b) * u[0]) * inv
        } else {
            0.0
        };
        // The predictor only chooses where the reaction is sampled; clamping
        // it at 0 keeps f on its domain when rough data make the half-step
        // Euler estimate overshoot.
        let pred0 = (u[0] + half_dt * (lap0 + feval(u[0]))).max(0.0);
        rhs[0] = u[0] + expl * lap0 + dt * feval(pred0);
        for i in 1..n {
            let ui = u[i];
            let lap = (u[i - 1] - 2.0 * ui + u[i + 1]) * inv;
            let pred = (ui + half_dt * (lap + feval(ui))).max(0.0);
            rhs[i] = ui + expl * lap + dt * feval(pred);
        }
        rhs[n] = 0.0;
    }

    // Forward sweep with the cached factors, then backward substitution
    // fused with sup tracking.
    let first = cache.first;
    let rtw = cache.rtw;
    {
        let dp = &mut dp[..];
        let rhs = &rhs[..];
        let cinv = &cache.inv[..];
        let mut prev_d = 0.0;
        if first == 0 {
            prev_d = rhs[0] * cinv[0];
            dp[0] = prev_d;
        }
        for i in first.max(1)..n {
            prev_d = (rhs[i] + rtw * prev_d) * cinv[i];
            dp[i] = prev_d;
        }
    }
    field.values[n] = 0.0;
    if first == 1 {
        field.values[0] = 0.0;
    }
    let mut next = 0.0; // u_n = 0
    let mut sup: f64 = 0.0;
    {
        let u = &mut field.values[..];
        let cp = &cache.cp[..];
        let dp = &dp[..];
        for i in (first..n).rev() {
            let v = dp[i] - cp[i] * next;
            u[i] = v;
            next = v;
            sup = sup.max(v);
        }
    }
    sup
}

impl<'a> Solver<'a> {
    pub fn new(cfg: SolverConfig, f: &'a Nonlinearity, field: &Field) -> Solver<'a> {
        let sup0 = field.sup().max(1.0);
        let k_range = f.max_abs_fp_on(0.0, sup0 * 1.05);
        let substeps = (cfg.dt * k_range / 0.5).ceil().max(1.0) as usize;
        let startup_left = if field.t == 0.0 { 4 * substeps as u32 } else { 0 };
        Solver {
            cfg,
            f,
            substeps,
            startup_left,
            sup_bound: 10.0 * sup0,
            running_sup: field.sup(),
            clipped: 0,
            rhs: Vec::new(),
            dp: Vec::new(),
            cache: None,
        }
    }

    /// One IMEX step of size cfg.dt (internally substepped if the reaction
    /// demands it).
    pub fn step(&mut self, field: &mut Field) -> Result<()> {
        let dt = self.cfg.dt / self.substeps as f64;
        for _ in 0..self.substeps {
            self.substep(field, dt)?;
        }
        Ok(())
    }

    fn substep(&mut self, field: &mut Field, dt: f64) -> Result<()> {
        let tw = if self.startup_left > 0 {
            self.startup_left -= 1;
            1.0
        } else {
            self.cfg.theta_scheme
        };
        let n = field.values.len() - 1;
        let rebuild = match &self.cache {
            Some(c) => c.n != n || c.dt != dt || c.b != field.b || c.tw != tw,
            None => true,
        };
        if rebuild {
            self.cache = Some(TridiagCache::build(n, field.dx, dt, tw, field.b));
        }
        let cache = self.cache.as_ref().unwrap();
        let sup = match &self.f.kind {
            crate::nonlinearity::FKind::Cubic { alpha } => {
                let a = *alpha;
                let k = crate::nonlinearity::CUBIC_TAIL_KNEE;
                let fk = k * (k - a) * (1.0 - k);
                let fpk = -3.0 * k * k + 2.0 * (1.0 + a) * k - a;
                substep_kernel(field, &mut self.rhs, &mut self.dp, cache, dt, tw, move |u| {
                    if u < 0.0 {
                        -a * u
                    } else if u <= k {
                        u * (u - a) * (1.0 - u)
                    } else {
                        fk + fpk * (u - k)
                    }
                })
            }
            crate::nonlinearity::FKind::Table(_) => {
                let f = self.f;
                substep_kernel(field, &mut self.rhs, &mut self.dp, cache, dt, tw, |u| f.f(u))
            }
        };

        // Positivity and comparison-bound policing; the clip tolerance is
        // 10 machine epsilons relative to the solution scale.
        let t_now = field.t + dt;
        if sup > self.sup_bound {
            return Err(Error::NumericalBlowup { t: t_now, sup });
        }
        let clip_tol = 10.0 * f64::EPSILON * self.running_sup.max(1.0);
        let n = field.values.len() - 1;
        for i in 0..=n {
            let v = field.values[i];
            if v < 0.0 {
                if v >= -clip_tol {
                    field.values[i] = 0.0;
                    self.clipped += 1;
                } else {
                    return Err(Error::NegativeUndershoot { x: i as f64 * field.dx, t: t_now, value: v });
                }
            } else if v < 1e-280 {
                // flush the far-field Gaussian tail before it walks the grid
                // through subnormal territory (pathologically slow on x86)
                field.values[i] = 0.0;
            }
        }
        self.running_sup = sup;
        field.t = t_now;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Runs and hooks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HookAction {
    Continue,
    Stop,
}

/// Observers sampled at fixed time intervals along a run; they receive a
/// read-only view of the field.
pub trait RunHook {
    fn interval(&self) -> f64;
    fn on_sample(&mut self, field: &Field, f: &Nonlinearity) -> HookAction;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ReachedMaxT,
    HookRequest(usize),
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub final_t: f64,
    pub steps: u64,
    pub clipped: u64,
    pub growth_events: u32,
    pub stop: StopReason,
}

/// Advance the field to cfg.max_t or until a hook requests a stop.
///
/// Hooks are sampled at t = 0 (for a fresh field) and whenever t crosses a
/// multiple of their interval; resuming a run picks up at the next multiple.
pub fn run(
    field: &mut Field,
    solver: &mut Solver,
    f: &Nonlinearity,
    hooks: &mut [&mut dyn RunHook],
) -> Result<RunRecord> {
    let dt = solver.cfg.dt;
    let mut due: Vec<f64> = hooks
        .iter()
        .map(|h| {
            if field.t == 0.0 {
                0.0
            } else {
                (field.t / h.interval()).floor() * h.interval() + h.interval()
            }
        })
        .collect();

    let mut record = RunRecord {
        final_t: field.t,
        steps: 0,
        clipped: 0,
        growth_events: 0,
        stop: StopReason::ReachedMaxT,
    };

    if field.t == 0.0 {
        for (k, h) in hooks.iter_mut().enumerate() {
            due[k] = h.interval();
            if h.on_sample(field, f) == HookAction::Stop {
                record.stop = StopReason::HookRequest(k);
                record.clipped = solver.clipped;
                return Ok(record);
            }
        }
    }

    'time: while field.t < solver.cfg.max_t - 0.5 * dt {
        solver.step(field)?;
        record.steps += 1;

        let margin_nodes = (solver.cfg.growth_margin / field.dx).round() as usize;
        let n = field.n();
        if margin_nodes + 1 < n {
            let sentinel = n - margin_nodes;
            if field.values[sentinel] > solver.cfg.far_field_tol {
                field.grow();
                record.growth_events += 1;
            }
        }

        for (k, h) in hooks.iter_mut().enumerate() {
            if field.t >= due[k] - 0.5 * dt {
                let iv = h.interval();
                due[k] = due[k].max((field.t / iv).floor() * iv) + iv;
                if h.on_sample(field, f) == HookAction::Stop {
                    record.stop = StopReason::HookRequest(k);
                    break 'time;
                }
            }
        }
    }
    record.final_t = field.t;
    record.clipped = solver.clipped;
    Ok(record)
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Energy int [u_x^2 + F(u)] dx + u(0)^2 / b (boundary term only for b > 0):
/// trapezoidal in x with second-order one-sided gradients at the ends.
pub fn energy(field: &Field, f: &Nonlinearity) -> f64 {
    let u = &field.values;
    let n = u.len() - 1;
    let dx = field.dx;
    let ux = |i: usize| -> f64 {
        if i == 0 {
            (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx)
        } else if i == n {
            (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * dx)
        } else {
            (u[i + 1] - u[i - 1]) / (2.0 * dx)
        }
    };
    let w = |i: usize| -> f64 {
        let g = ux(i);
        g * g + f.big_f(u[i])
    };
    let mut total = 0.5 * (w(0) + w(n));
    for i in 1..n {
        total += w(i);
    }
    total *= dx;
    if field.b > 0.0 {
        total += u[0] * u[0] / field.b;
    }
    total
}

/// Number of strict sign alternations of the centered differences of u,
/// ignoring flat stretches below 1e-13. A single interior bump gives 1,
/// a monotone profile 0.
pub fn sign_changes_ux(field: &Field) -> usize {
    let u = &field.values;
    let n = u.len() - 1;
    let mut count = 0;
    let mut last_sign = 0i8;
    for i in 1..n {
        let c = (u[i + 1] - u[i - 1]) / 2.0;
        if c.abs() <= 1e-13 {
            continue;
        }
        let s: i8 = if c > 0.0 { 1 } else { -1 };
        if last_sign != 0 && s != last_sign {
            count += 1;
        }
        last_sign = s;
    }
    count
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub t: f64,
    pub points: usize,
    /// Gaussian envelope log u <= log C - x^2/(16 t) holds over x > 2h.
    pub pass: bool,
    /// Smallest slack of the envelope over the checked range (>= 0 passes).
    pub margin: f64,
    /// Rightmost x with u above 1e-3 of the sup (front proxy).
    pub front: f64,
    /// Same check restricted beyond the front (reported, not gated).
    pub pass_beyond_front: bool,
    pub margin_beyond_front: f64,
}

/// Check the far-field Gaussian envelope u(x,t) <= C(t) e^{-x^2/(16 t)} for
/// x > 2h, anchoring C at the first tail sample so only the decay rate is
/// tested; the prefactor is a fitted constant.
pub fn decay_check(field: &Field, h: f64) -> DecayReport {
    assert!(field.t > 0.0, "decay envelope needs t > 0");
    let u = &field.values;
    let sup = field.sup();
    let mut front = 0.0;
    for (i, &v) in u.iter().enumerate() {
        if v > 1e-3 * sup {
            front = i as f64 * field.dx;
        }
    }
    let gauge = |x: f64, v: f64| v.ln() + x * x / (16.0 * field.t);
    let collect = |x_min: f64| -> (usize, f64) {
        let mut anchor = f64::NAN;
        let mut worst = f64::INFINITY;
        let mut count = 0;
        for (i, &v) in u.iter().enumerate() {
            let x = i as f64 * field.dx;
            if x <= x_min || v < 1e-250 {
                continue;
            }
            let c = gauge(x, v);
            if anchor.is_nan() {
                anchor = c;
            } else {
                worst = worst.min(anchor - c);
            }
            count += 1;
        }
        if count < 2 {
            (count, f64::INFINITY)
        } else {
            (count, worst)
        }
    };
    let (points, margin) = collect(2.0 * h);
    let (_, margin_bf) = collect((2.0 * h).max(front));
    let tol = 1e-9;
    DecayReport {
        t: field.t,
        points,
        pass: margin >= -tol,
        margin,
        front,
        pass_beyond_front: margin_bf >= -tol,
        margin_beyond_front: margin_bf,
    }
}

// ---------------------------------------------------------------------------
// Stock hooks
// ---------------------------------------------------------------------------

/// Stores full copies of the field at each sample time.
pub struct SnapshotHook {
    pub every: f64,
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

impl SnapshotHook {
    pub fn new(every: f64) -> Self {
        SnapshotHook { every, snapshots: Vec::new() }
    }
}

impl RunHook for SnapshotHook {
    fn interval(&self) -> f64 {
        self.every
    }
    fn on_sample(&mut self, field: &Field, _f: &Nonlinearity) -> HookAction {
        self.snapshots.push((field.t, field.values.clone()));
        HookAction::Continue
    }
}

#[derive(Debug, Clone)]
pub struct LogRow {
    pub t: f64,
    pub umax: f64,
    pub argmax: f64,
    pub energy: f64,
    pub sign_changes: usize,
    pub domain_len: f64,
}

/// Scalar time series: sup, refined argmax, energy, sign changes, domain.
pub struct LogHook {
    pub every: f64,
    pub rows: Vec<LogRow>,
}

impl LogHook {
    pub fn new(every: f64) -> Self {
        LogHook { every, rows: Vec::new() }
    }
}

impl RunHook for LogHook {
    fn interval(&self) -> f64 {
        self.every
    }
    fn on_sample(&mut self, field: &Field, f: &Nonlinearity) -> HookAction {
        let (_, x, u) = field.argmax_refined();
        self.rows.push(LogRow {
            t: field.t,
            umax: u,
            argmax: x,
            energy: energy(field, f),
            sign_changes: sign_changes_ux(field),
            domain_len: field.x_max(),
        });
        HookAction::Continue
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady;

    fn cubic() -> Nonlinearity {
        Nonlinearity::cubic(0.25).unwrap()
    }

    fn triangle(f: &Nonlinearity, dx: f64) -> InitialDatum {
        InitialDatum::render(
            DatumFamily::ScaledBump { shape: BumpShape::Triangle, h: 1.0, sigma: 1.0 },
            f,
            dx,
        )
        .unwrap()
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let f = cubic();
        let cfg = SolverConfig::for_nonlinearity(&f, 0.05, 0.02, 1.0);
        let mut field = Field { b: 1.0, dx: 0.05, values: vec![0.0; 201], t: 0.0 };
        let mut solver = Solver::new(cfg, &f, &field);
        for _ in 0..50 {
            solver.step(&mut field).unwrap();
        }
        assert!(field.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn snapshot_count_on_unit_interval() {
        let f = cubic();
        let cfg = SolverConfig::for_nonlinearity(&f, 0.05, 0.01, 10.0);
        let datum = triangle(&f, 0.05);
        let mut field = datum.make_field(&cfg, 0.0, 1.0);
        let mut solver = Solver::new(cfg, &f, &field);
        let mut snap = SnapshotHook::new(1.0);
        let rec = run(&mut field, &mut solver, &f, &mut [&mut snap]).unwrap();
        assert_eq!(rec.stop, StopReason::ReachedMaxT);
        assert_eq!(snap.snapshots.len(), 11, "t = 0..=10 inclusive");
    }

    #[test]
    fn growth_preserves_existing_nodes() {
        let mut field = Field { b: 0.0, dx: 0.1, values: (0..=50).map(|i| i as f64).collect(), t: 0.0 };
        let before = field.values.clone();
        field.grow();
        assert_eq!(field.values.len(), 101);
        assert_eq!(&field.values[..51], &before[..]);
        assert!(field.values[51..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn subthreshold_bump_decays_monotonically() {
        // sigma small: sup u_0 < alpha, so the spatially uniform supersolution
        // eta' = f(eta) < 0 forces the sup down.
        let f = cubic();
        let cfg = SolverConfig::for_nonlinearity(&f, 0.05, 0.01, 5.0);
        let datum = triangle(&f, 0.05);
        let mut field = datum.make_field(&cfg, 0.0, 0.2);
        let mut solver = Solver::new(cfg, &f, &field);
        let mut log = LogHook::new(0.5);
        run(&mut field, &mut solver, &f, &mut [&mut log]).unwrap();
        for w in log.rows.windows(2) {
            assert!(w[1].umax < w[0].umax, "sup not decreasing: {} -> {}", w[0].umax, w[1].umax);
        }
    }

    #[test]
    fn comparison_bound_holds() {
        let f = cubic();
        let cfg = SolverConfig::for_nonlinearity(&f, 0.02, 0.01, 20.0);
        let datum = triangle(&f, 0.02);
        let mut field = datum.make_field(&cfg, 1.0, 4.0);
        let sup0 = field.sup().max(1.0);
        let mut solver = Solver::new(cfg, &f, &field);
        let mut log = LogHook::new(1.0);
        run(&mut field, &mut solver, &f, &mut [&mut log]).unwrap();
        for row in &log.rows {
            assert!(row.umax <= sup0 + 1e-8, "sup {} above bound {}", row.umax, sup0);
        }
    }

    #[test]
    fn ground_shift_is_discretely_stationary() {
        let f = cubic();
        let b = 3.0;
        let ground = steady::build_ground_state(&f, 24.0, 2400).unwrap();
        let active = steady::build_active_state(&f, 30.0, 1500).unwrap();
        let shifts = steady::find_shift_sets(&f, &ground, &active, b).unwrap();
        let z = shifts.ground[0].z;
        let (dx, dt) = (0.02, 0.01);
        let cfg = SolverConfig::for_nonlinearity(&f, dx, dt, 5.0);
        let n = (cfg.l0 / dx).ceil() as usize;
        let values: Vec<f64> = (0..=n).map(|i| ground.eval(i as f64 * dx - z)).collect();
        let mut field = Field { b, dx, values, t: 0.0 };
        let u0 = field.values.clone();
        let mut solver = Solver::new(cfg, &f, &field);
        while field.t < 5.0 - 1e-9 {
            solver.step(&mut field).unwrap();
        }
        let err = field
            .values
            .iter()
            .zip(&u0)
            .fold(0.0f64, |a, (&x, &y)| a.max((x - y).abs()));
        assert!(err < 5e-3, "stationary profile drifted by {err}");
    }

    #[test]
    fn energy_zero_and_dissipation() {
        let f = cubic();
        let zero = Field { b: 2.0, dx: 0.05, values: vec![0.0; 101], t: 0.0 };
        assert_eq!(energy(&zero, &f), 0.0);

        let cfg = SolverConfig::for_nonlinearity(&f, 0.02, 0.01, 15.0);
        let datum = triangle(&f, 0.02);
        let mut field = datum.make_field(&cfg, 1.0, 2.0);
        let mut solver = Solver::new(cfg, &f, &field);
        let mut log = LogHook::new(0.5);
        run(&mut field, &mut solver, &f, &mut [&mut log]).unwrap();
        let mut worst: f64 = 0.0;
        for w in log.rows.windows(2) {
            worst = worst.max(w[1].energy - w[0].energy);
        }
        assert!(worst < 1e-4, "energy increased by {worst}");
    }

    #[test]
    fn sign_change_counts() {
        let dx = 0.05;
        let n = 200;
        let bump: Vec<f64> = (0..=n)
            .map(|i| {
                let x = i as f64 * dx;
                (-(x - 5.0) * (x - 5.0)).exp()
            })
            .collect();
        let field = Field { b: 0.0, dx, values: bump, t: 0.1 };
        assert_eq!(sign_changes_ux(&field), 1);

        let mono: Vec<f64> = (0..=n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let field = Field { b: 0.0, dx, values: mono, t: 0.1 };
        assert_eq!(sign_changes_ux(&field), 0);

        let two: Vec<f64> = (0..=n)
            .map(|i| {
                let x = i as f64 * dx;
                (-(x - 3.0) * (x - 3.0)).exp() + (-(x - 7.0) * (x - 7.0)).exp()
            })
            .collect();
        let field = Field { b: 0.0, dx, values: two, t: 0.1 };
        assert_eq!(sign_changes_ux(&field), 3);
    }

    #[test]
    fn robin_residual_second_order() {
        let f = cubic();
        let run_at = |dx: f64| -> f64 {
            let cfg = SolverConfig::for_nonlinearity(&f, dx, dx * dx, 2.0);
            let datum = InitialDatum::render(
                DatumFamily::ScaledBump { shape: BumpShape::Smooth, h: 2.0, sigma: 1.5 },
                &f,
                dx,
            )
            .unwrap();
            let mut field = datum.make_field(&cfg, 1.5, 1.0);
            let mut solver = Solver::new(cfg, &f, &field);
            while field.t < 2.0 - 1e-9 {
                solver.step(&mut field).unwrap();
            }
            field.robin_residual()
        };
        let (coarse, fine) = (run_at(0.04), run_at(0.02));
        assert!(fine < coarse / 2.5, "no O(dx^2) boundary residual: {coarse} -> {fine}");
    }

    #[test]
    fn decay_envelope_early_time() {
        let f = cubic();
        let cfg = SolverConfig::for_nonlinearity(&f, 0.02, 0.01, 1.0);
        let datum = triangle(&f, 0.02);
        let mut field = datum.make_field(&cfg, 0.0, 1.5);
        let mut solver = Solver::new(cfg, &f, &field);
        while field.t < 0.5 - 1e-9 {
            solver.step(&mut field).unwrap();
        }
        let rep = decay_check(&field, 1.0);
        assert!(rep.pass, "margin {}", rep.margin);
        assert!(rep.points > 10);
    }

    #[test]
    fn capped_ground_and_bump_offset_render() {
        let f = cubic();
        let capped = InitialDatum::render(DatumFamily::CappedGround { z0: 2.0, rho: 0.5 }, &f, 0.02).unwrap();
        assert!(capped.values.iter().all(|&v| v >= 0.0));
        assert!(capped.values.iter().any(|&v| v > 0.0));
        assert_eq!(*capped.values.last().unwrap(), 0.0);

        let off = InitialDatum::render(DatumFamily::BumpOffset { m: 0.8, x_m: 1.0 }, &f, 0.02).unwrap();
        let l_m = steady::bump_half_width(&f, 0.8).unwrap();
        let gap = 2.0 * l_m - 1.0;
        let gap_idx = (gap / 0.02).floor() as usize;
        assert!(off.values[..=gap_idx].iter().all(|&v| v == 0.0), "must vanish on the bump support");
        assert!(off.values[gap_idx..].iter().any(|&v| v > 0.0));
    }
}
