use halfline::nonlinearity::{compute_constants, Nonlinearity};
use halfline::solver::{BumpShape, DatumFamily, Field, InitialDatum, Solver, SolverConfig};
use halfline::steady;
use std::time::Instant;

fn classify(field: &Field, alpha: f64, m_grid: &[(f64, f64)]) -> Option<&'static str> {
    let sup = field.sup();
    if sup < alpha {
        return Some("vanish");
    }
    for &(m, l2) in m_grid {
        let mut run_len = 0usize;
        let need = (l2 / field.dx).ceil() as usize;
        for &v in &field.values {
            if v >= m {
                run_len += 1;
                if run_len >= need {
                    return Some("spread");
                }
            } else {
                run_len = 0;
            }
        }
    }
    None
}

fn main() {
    let f = Nonlinearity::cubic(0.25).unwrap();
    let c = compute_constants(&f).unwrap();
    eprintln!(
        "theta={} lambda={} A={} I_F={} c(0)={} c_hat={:?}",
        f.theta,
        f.lambda,
        c.tail_amplitude,
        c.sqrt_f_integral,
        c.drift_coef(0.0),
        c.c_hat
    );

    let mut m_grid = Vec::new();
    for j in 1..=12 {
        let m = f.theta + (0.97 - f.theta) * j as f64 / 12.0;
        let l = steady::bump_half_width(&f, m).unwrap();
        m_grid.push((m, 2.0 * l));
    }
    eprintln!("m grid (m, 2L_m): {:?}", m_grid);

    let (dx, dt) = (0.02, 0.01);
    let max_t = 8000.0;
    let datum = InitialDatum::render(
        DatumFamily::ScaledBump { shape: BumpShape::Triangle, h: 1.0, sigma: 1.0 },
        &f,
        dx,
    )
    .unwrap();

    let eval = |sigma: f64| -> (&'static str, f64, u64) {
        let cfg = SolverConfig::for_nonlinearity(&f, dx, dt, max_t);
        let mut field = datum.make_field(&cfg, 0.0, sigma);
        let mut solver = Solver::new(cfg, &f, &field);
        let check_every = (0.5 / dt).round() as u64;
        loop {
            if let Some(o) = classify(&field, f.alpha, &m_grid) {
                return (o, field.t, solver.clipped);
            }
            if field.t >= max_t {
                return ("undecided", field.t, solver.clipped);
            }
            for _ in 0..check_every {
                solver.step(&mut field).unwrap();
            }
        }
    };

    for k in [0i32, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24] {
        let s = 2.0f64.powi(k);
        let t1 = Instant::now();
        let (o, t, _) = eval(s);
        eprintln!("probe sigma=2^{k} -> {o} at t={t:.1} [{:?}]", t1.elapsed());
        if o == "spread" { break; }
    }
    let t0 = Instant::now();
    let mut lo = 1.0f64;
    let mut hi = 1.0f64;
    let (o, t, _) = eval(1.0);
    eprintln!("sigma=1 -> {o} at t={t:.1}  [{:?}]", t0.elapsed());
    if o == "spread" {
        loop {
            lo /= 2.0;
            let (o, t, _) = eval(lo);
            eprintln!("sigma={lo} -> {o} at t={t:.1}");
            if o == "vanish" {
                break;
            }
        }
    } else {
        lo = if o == "vanish" { 1.0 } else { 0.5 };
        loop {
            hi *= 2.0;
            let (o, t, _) = eval(hi);
            eprintln!("sigma={hi} -> {o} at t={t:.1}");
            if o == "spread" {
                break;
            }
        }
    }
    eprintln!("bracket [{lo}, {hi}] after {:?}", t0.elapsed());

    for it in 0..45 {
        let mid = 0.5 * (lo + hi);
        let t1 = Instant::now();
        let (o, t, clip) = eval(mid);
        eprintln!("it {it}: sigma={mid:.15} -> {o} at t={t:.1} clip={clip} [{:?}]", t1.elapsed());
        match o {
            "spread" => hi = mid,
            "vanish" => lo = mid,
            _ => {
                eprintln!("UNDECIDED at midpoint");
                break;
            }
        }
    }
    eprintln!("final bracket [{lo:.15}, {hi:.15}], total {:?}", t0.elapsed());

    let sigma = 0.5 * (lo + hi);
    let cfg = SolverConfig::for_nonlinearity(&f, dx, dt, max_t);
    let mut field = datum.make_field(&cfg, 0.0, sigma);
    let mut solver = Solver::new(cfg, &f, &field);
    let lam = f.lambda;
    let c0 = c.drift_coef(0.0);
    eprintln!("t, xi, umax, xi_pred");
    let mut anchor: Option<(f64, f64)> = None;
    let sample_every = (1.0 / dt).round() as u64;
    loop {
        for _ in 0..sample_every {
            solver.step(&mut field).unwrap();
        }
        let (_, xi, umax) = field.argmax_refined();
        if field.t > 30.0 && anchor.is_none() {
            anchor = Some((field.t, xi));
        }
        let pred = anchor.map(|(ts, xs)| {
            (1.0 / (2.0 * lam)) * (2.0 * lam * c0 * (field.t - ts) + (2.0 * lam * xs).exp()).ln()
        });
        let tr = field.t.round() as u64;
        if tr.is_power_of_two() || tr % 500 == 0 {
            eprintln!("{:.0}, {:.4}, {:.6}, {:?}", field.t, xi, umax, pred);
        }
        if field.t >= max_t - 0.5 || umax < f.alpha {
            eprintln!("end at t={:.1} umax={umax:.6} xi={xi:.4}", field.t);
            break;
        }
    }
}
