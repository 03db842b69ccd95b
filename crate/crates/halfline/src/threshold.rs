//! Outcome classification with certificates and the sharp-threshold
//! bisection.
//!
//! A run is declared Spreading only when a snapshot dominates a compact bump
//! v_m: either u >= m on a window of length 2 L_m (which implies domination
//! since v_m <= m), or pointwise domination of the tabulated bump aligned
//! under the maximum. It is declared Vanishing only when sup u < alpha, after
//! which comparison with eta' = f(eta) < 0 forces decay. Both certificates
//! are facts about a single snapshot, so the classification is sound up to
//! discretization error; no heuristics are involved by default.

use crate::nonlinearity::Nonlinearity;
use crate::solver::{run, Field, HookAction, InitialDatum, RunHook, Solver, SolverConfig, StopReason};
use crate::steady::{self, SteadyProfile};
use crate::{Error, Result};
use serde::Serialize;

/// Evidence that a snapshot lies above a compact bump.
#[derive(Debug, Clone, Serialize)]
pub struct SpreadingCert {
    pub t: f64,
    pub m: f64,
    pub half_width: f64,
    /// u >= m held on [window_lo, window_lo + 2 half_width].
    pub window_lo: f64,
    /// Set when the certificate came from pointwise domination of the
    /// tabulated bump rather than the window rule.
    pub pointwise: bool,
}

/// Evidence that a snapshot dropped below the unstable zero.
#[derive(Debug, Clone, Serialize)]
pub struct VanishingCert {
    pub t: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub enum Outcome {
    Spreading(SpreadingCert),
    Vanishing(VanishingCert),
    Undecided { t_reached: f64 },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Spreading(_) => "spreading",
            Outcome::Vanishing(_) => "vanishing",
            Outcome::Undecided { .. } => "undecided",
        }
    }
}

/// L(m) for m in (alpha, 1): the window half-length that certifies spreading
/// when u >= m on a window of length 2 L(m).
///
/// For m > theta this is the bump half-width L_m. For m in (alpha, theta]
/// the constant comes from riding the uniform ODE eta' = f(eta) from m up
/// to theta + 2 eps against boundary leakage: with eps = (1-theta)/3,
/// T = int_m^{theta+2eps} ds/f(s), R = L_{theta+eps} and
/// Q = 2 + max_[0,1] f', take L = 1 + sqrt((1+R^2) e^{QT}/eps - 1).
pub fn compute_l_of_m(f: &Nonlinearity, m: f64) -> Result<f64> {
    if !(m > f.alpha && m < 1.0) {
        return Err(Error::InvalidM(m, "(alpha, 1)"));
    }
    if m > f.theta {
        return steady::bump_half_width(f, m);
    }
    let eps = (1.0 - f.theta) / 3.0;
    let t_ride = crate::quad::integrate(|s| 1.0 / f.f(s), m, f.theta + 2.0 * eps, 1e-12, 1e-11)?.value;
    let r = steady::bump_half_width(f, f.theta + eps)?;
    let q = 2.0 + f.max_fp_on(0.0, 1.0);
    Ok(1.0 + ((1.0 + r * r) * (q * t_ride).exp() / eps - 1.0).sqrt())
}

/// Classifier state shared by the hook and the offline API.
pub struct Classifier {
    alpha: f64,
    /// (m, L_m, tabulated bump) on a grid over (theta, 1).
    bumps: Vec<(f64, f64, SteadyProfile)>,
    pub outcome: Option<Outcome>,
}

impl Classifier {
    /// Default grid: round bump levels in (theta, 1), padded with a
    /// parametric grid when theta leaves too few of them.
    pub fn new(f: &Nonlinearity) -> Result<Self> {
        let mut levels: Vec<f64> = (9..=19)
            .map(|j| j as f64 * 0.05)
            .filter(|&m| m > f.theta + 0.02 * (1.0 - f.theta) && m < 0.97)
            .collect();
        while levels.len() < 6 {
            let j = levels.len() + 1;
            levels.push(f.theta + (0.97 - f.theta) * j as f64 / 12.0);
        }
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        levels.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let mut bumps = Vec::new();
        for m in levels {
            let l = steady::bump_half_width(f, m)?;
            let profile = steady::build_compact_bump(f, m, 400)?;
            bumps.push((m, l, profile));
        }
        Ok(Classifier { alpha: f.alpha, bumps, outcome: None })
    }

    /// Examine one snapshot; sets and returns the outcome when a certificate
    /// fires.
    pub fn examine(&mut self, field: &Field) -> Option<&Outcome> {
        if self.outcome.is_some() {
            return self.outcome.as_ref();
        }
        let sup = field.sup();
        if sup < self.alpha {
            self.outcome = Some(Outcome::Vanishing(VanishingCert { t: field.t, sup }));
            return self.outcome.as_ref();
        }
        // Window rule: u >= m on a stretch of length 2 L_m.
        for &(m, l, _) in &self.bumps {
            if sup < m {
                continue;
            }
            let need = (2.0 * l / field.dx).ceil() as usize + 1;
            let mut run_len = 0usize;
            for (i, &v) in field.values.iter().enumerate() {
                if v >= m {
                    run_len += 1;
                    if run_len >= need {
                        let lo = (i + 1 - run_len) as f64 * field.dx;
                        self.outcome = Some(Outcome::Spreading(SpreadingCert {
                            t: field.t,
                            m,
                            half_width: l,
                            window_lo: lo,
                            pointwise: false,
                        }));
                        return self.outcome.as_ref();
                    }
                } else {
                    run_len = 0;
                }
            }
        }
        // Pointwise domination of the tabulated bump aligned under the peak
        // (catches data like u_0 = v_m itself, where the window rule cannot
        // fire at t = 0). The peak estimate can be off by a node on flat
        // tops, so a few grid-aligned shifts are tried; the 1e-6 slack
        // absorbs interpolation error of the tabulated bump, far below the
        // discretization error the certificate already carries.
        let (_, x_peak, _) = field.argmax_refined();
        for (m, l, bump) in &self.bumps {
            // nodal sup of a dominating field can sit slightly below m when
            // the peak falls between nodes
            if sup < *m - 1e-3 {
                continue;
            }
            let r0 = ((x_peak - *l) / field.dx).round() * field.dx;
            for k in -3i32..=3 {
                let r = r0 + k as f64 * field.dx;
                if r < 0.0 {
                    continue;
                }
                let lo_idx = (r / field.dx).floor() as usize;
                let hi = r + 2.0 * l;
                let hi_idx = ((hi / field.dx).ceil() as usize).min(field.values.len() - 1);
                let mut dominated = true;
                for i in lo_idx..=hi_idx {
                    let x = i as f64 * field.dx;
                    if field.values[i] < bump.eval(x - r) - 1e-6 {
                        dominated = false;
                        break;
                    }
                }
                if dominated {
                    self.outcome = Some(Outcome::Spreading(SpreadingCert {
                        t: field.t,
                        m: *m,
                        half_width: *l,
                        window_lo: r,
                        pointwise: true,
                    }));
                    return self.outcome.as_ref();
                }
            }
        }
        None
    }

    /// Re-verify a spreading certificate against an independently built bump:
    /// pointwise domination of v_m(. - r) on its support.
    pub fn verify_spreading(f: &Nonlinearity, field: &Field, cert: &SpreadingCert) -> Result<bool> {
        let bump = steady::build_compact_bump(f, cert.m, 2000)?;
        let r = cert.window_lo;
        let n = field.values.len() - 1;
        for i in 0..=n {
            let x = i as f64 * field.dx;
            if field.values[i] < bump.eval(x - r) - 1e-6 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Hook wrapper: samples the classifier along a run and stops it as soon as
/// a certificate fires.
pub struct ClassifierHook {
    pub every: f64,
    pub classifier: Classifier,
}

impl ClassifierHook {
    pub fn new(f: &Nonlinearity, every: f64) -> Result<Self> {
        Ok(ClassifierHook { every, classifier: Classifier::new(f)? })
    }

    pub fn outcome(&self, t_reached: f64) -> Outcome {
        self.classifier
            .outcome
            .clone()
            .unwrap_or(Outcome::Undecided { t_reached })
    }
}

impl RunHook for ClassifierHook {
    fn interval(&self) -> f64 {
        self.every
    }
    fn on_sample(&mut self, field: &Field, _f: &Nonlinearity) -> HookAction {
        if self.classifier.examine(field).is_some() {
            HookAction::Stop
        } else {
            HookAction::Continue
        }
    }
}

/// Classify the run launched from sigma * phi. The Undecided policy follows
/// the retry rule: one continuation to 4x max_t, after which Undecided is
/// final for this sigma.
pub fn classify_sigma(
    phi: &InitialDatum,
    b: f64,
    cfg: &SolverConfig,
    f: &Nonlinearity,
    sigma: f64,
    retry: bool,
) -> Result<(Outcome, Field)> {
    let mut field = phi.make_field(cfg, b, sigma);
    let mut solver = Solver::new(cfg.clone(), f, &field);
    let mut hook = ClassifierHook::new(f, 0.5)?;
    let rec = run(&mut field, &mut solver, f, &mut [&mut hook])?;
    if matches!(rec.stop, StopReason::ReachedMaxT) && hook.classifier.outcome.is_none() && retry {
        let mut cfg4 = cfg.clone();
        cfg4.max_t *= 4.0;
        let mut solver = Solver::new(cfg4, f, &field);
        run(&mut field, &mut solver, f, &mut [&mut hook])?;
    }
    Ok((hook.outcome(field.t), field))
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdResult {
    pub b: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub iterations: u32,
    pub lo_certificate: VanishingCert,
    pub hi_certificate: SpreadingCert,
    /// Midpoint that stayed Undecided through the retry, ending the
    /// bisection early with the bracket as-is.
    pub undecided_at: Option<f64>,
    /// False when max_iter ran out before tol_rel was reached.
    pub converged: bool,
    pub phi_description: String,
    pub max_t: f64,
}

impl ThresholdResult {
    pub fn width_rel(&self) -> f64 {
        (self.sigma_hi - self.sigma_lo) / self.sigma_lo
    }
}

/// Certified bisection for sigma*.
///
/// The bracket is seeded from sigma = 1 by doubling until Spreading and
/// halving until Vanishing (capped at 2^30 either way; the doubling
/// terminates because inf f' > -infinity on the relevant range), then
/// bisected. Outcome monotonicity in sigma is the comparison principle.
pub fn bisect_sigma(
    phi: &InitialDatum,
    b: f64,
    cfg: &SolverConfig,
    f: &Nonlinearity,
    tol_rel: f64,
    max_iter: u32,
) -> Result<ThresholdResult> {
    let cap = (1u64 << 30) as f64;
    let mut lo: Option<(f64, VanishingCert)> = None;
    let mut hi: Option<(f64, SpreadingCert)> = None;

    match classify_sigma(phi, b, cfg, f, 1.0, true)?.0 {
        Outcome::Spreading(c) => hi = Some((1.0, c)),
        Outcome::Vanishing(c) => lo = Some((1.0, c)),
        Outcome::Undecided { .. } => {} // sigma = 1 sits inside the bracket
    }
    let mut probe = 1.0;
    while lo.is_none() {
        probe /= 2.0;
        if probe < 1.0 / cap {
            return Err(Error::BracketNotFound(cap));
        }
        match classify_sigma(phi, b, cfg, f, probe, true)?.0 {
            Outcome::Vanishing(c) => lo = Some((probe, c)),
            Outcome::Spreading(c) => hi = Some((probe, c)),
            Outcome::Undecided { .. } => {}
        }
    }
    let mut probe = hi.as_ref().map(|h| h.0).unwrap_or(1.0);
    while hi.is_none() {
        probe *= 2.0;
        if probe > cap {
            return Err(Error::BracketNotFound(cap));
        }
        match classify_sigma(phi, b, cfg, f, probe, true)?.0 {
            Outcome::Spreading(c) => hi = Some((probe, c)),
            Outcome::Vanishing(c) => lo = Some((probe, c)),
            Outcome::Undecided { .. } => {}
        }
    }
    let (mut lo, mut lo_cert) = {
        let l = lo.unwrap();
        (l.0, Some(l.1))
    };
    let (mut hi, mut hi_cert) = {
        let h = hi.unwrap();
        (h.0, Some(h.1))
    };
    debug_assert!(lo < hi);

    let mut iterations = 0;
    let mut undecided_at = None;
    let mut converged = false;
    while iterations < max_iter {
        if (hi - lo) / lo <= tol_rel {
            converged = true;
            break;
        }
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        let (o, _) = classify_sigma(phi, b, cfg, f, mid, true)?;
        match o {
            Outcome::Spreading(c) => {
                hi = mid;
                hi_cert = Some(c);
            }
            Outcome::Vanishing(c) => {
                lo = mid;
                lo_cert = Some(c);
            }
            Outcome::Undecided { .. } => {
                undecided_at = Some(mid);
                break;
            }
        }
    }
    if (hi - lo) / lo <= tol_rel {
        converged = true;
    }

    Ok(ThresholdResult {
        b,
        sigma_lo: lo,
        sigma_hi: hi,
        iterations,
        lo_certificate: lo_cert.expect("bracket search produced a vanishing endpoint"),
        hi_certificate: hi_cert.expect("bracket search produced a spreading endpoint"),
        undecided_at,
        converged,
        phi_description: format!("{:?}", phi.family),
        max_t: cfg.max_t,
    })
}

/// sigma*(b) over a list of b values, independent bisections distributed
/// across a rayon pool; results come back in b order.
pub fn sigma_star_curve(
    phi: &InitialDatum,
    b_list: &[f64],
    cfg: &SolverConfig,
    f: &Nonlinearity,
    tol_rel: f64,
    max_iter: u32,
) -> Result<Vec<ThresholdResult>> {
    use rayon::prelude::*;
    b_list
        .par_iter()
        .map(|&b| bisect_sigma(phi, b, cfg, f, tol_rel, max_iter))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{BumpShape, DatumFamily};

    fn cubic() -> Nonlinearity {
        Nonlinearity::cubic(0.25).unwrap()
    }

    #[test]
    fn l_of_m_branches() {
        let f = cubic();
        // above theta: the bump half-width
        let l = compute_l_of_m(&f, 0.7).unwrap();
        let l_direct = steady::bump_half_width(&f, 0.7).unwrap();
        assert_eq!(l, l_direct);
        assert!(l > 0.0 && l.is_finite());

        // just above theta: large but finite
        let l_near = compute_l_of_m(&f, f.theta + 1e-3).unwrap();
        assert!(l_near > l && l_near.is_finite(), "L = {l_near}");

        // below theta: the ODE-ride constant, positive and finite
        let l_low = compute_l_of_m(&f, 0.3).unwrap();
        assert!(l_low.is_finite() && l_low > 1.0, "L(0.3) = {l_low}");

        assert!(compute_l_of_m(&f, 0.2).is_err());
        assert!(compute_l_of_m(&f, 1.0).is_err());
    }

    #[test]
    fn tiny_sigma_vanishes_at_t0() {
        let f = cubic();
        let dx = 0.05;
        let phi = InitialDatum::render(
            DatumFamily::ScaledBump { shape: BumpShape::Triangle, h: 1.0, sigma: 1.0 },
            &f,
            dx,
        )
        .unwrap();
        let cfg = SolverConfig::for_nonlinearity(&f, dx, 0.02, 50.0);
        let sigma = 1e-6 * f.theta;
        let (o, _) = classify_sigma(&phi, 0.0, &cfg, &f, sigma, false).unwrap();
        match o {
            Outcome::Vanishing(c) => assert_eq!(c.t, 0.0, "certificate fires on the initial snapshot"),
            other => panic!("expected vanishing, got {other:?}"),
        }
    }

    #[test]
    fn bump_datum_spreads_at_t0() {
        let f = cubic();
        let dx = 0.02;
        // u_0 = v_m for m = 0.7: dominates itself, certificate at t = 0 via
        // the pointwise rule.
        let bump = steady::build_compact_bump(&f, 0.7, 2000).unwrap();
        let cfg = SolverConfig::for_nonlinearity(&f, dx, 0.01, 50.0);
        let n = (cfg.l0 / dx).ceil() as usize;
        let values: Vec<f64> = (0..=n).map(|i| bump.eval(i as f64 * dx)).collect();
        let field = Field { b: 1.0, dx, values, t: 0.0 };
        let mut cls = Classifier::new(&f).unwrap();
        match cls.examine(&field) {
            Some(Outcome::Spreading(c)) => {
                assert_eq!(c.t, 0.0);
                assert!(Classifier::verify_spreading(&f, &field, c).unwrap());
            }
            other => panic!("expected spreading at t=0, got {other:?}"),
        }
    }

    #[test]
    fn wide_plateau_spreads_by_window_rule() {
        let f = cubic();
        let dx = 0.02;
        let l07 = steady::bump_half_width(&f, 0.7).unwrap();
        let h = 4.0 * (2.0 * l07) / 0.75; // plateau holding 0.75 over several widths
        let phi = InitialDatum::render(
            DatumFamily::ScaledBump { shape: BumpShape::Plateau, h, sigma: 0.75 },
            &f,
            dx,
        )
        .unwrap();
        let cfg = SolverConfig::for_nonlinearity(&f, dx, 0.01, 200.0);
        let (o, field) = classify_sigma(&phi, 0.0, &cfg, &f, 1.0, false).unwrap();
        match o {
            Outcome::Spreading(c) => {
                assert!(Classifier::verify_spreading(&f, &field, &c).unwrap());
            }
            other => panic!("expected spreading, got {other:?}"),
        }
    }

    #[test]
    fn coarse_bisection_brackets_and_halves() {
        let f = cubic();
        let dx = 0.05;
        let phi = InitialDatum::render(
            DatumFamily::ScaledBump { shape: BumpShape::Triangle, h: 1.0, sigma: 1.0 },
            &f,
            dx,
        )
        .unwrap();
        let cfg = SolverConfig::for_nonlinearity(&f, dx, 0.02, 400.0);
        let r = bisect_sigma(&phi, 0.0, &cfg, &f, 1e-3, 40).unwrap();
        assert!(r.converged, "{r:?}");
        assert!(r.sigma_lo < r.sigma_hi);
        assert!(r.width_rel() <= 1e-3);
        assert!(r.undecided_at.is_none());
        // certified endpoints
        assert!(r.lo_certificate.sup < f.alpha);
        assert!(r.hi_certificate.m > f.theta);
    }
}
