use halfline::nonlinearity::Nonlinearity;
use halfline::solver::{BumpShape, DatumFamily, InitialDatum, Solver, SolverConfig};
use std::time::Instant;

fn main() {
    let f = Nonlinearity::cubic(0.25).unwrap();
    let (dx, dt) = (0.02, 0.01);
    let cfg = SolverConfig::for_nonlinearity(&f, dx, dt, 1e9);
    let datum = InitialDatum::render(
        DatumFamily::ScaledBump { shape: BumpShape::Triangle, h: 1.0, sigma: 1.0 },
        &f, dx,
    ).unwrap();
    let mut field = datum.make_field(&cfg, 0.0, 1.6);
    let n = field.values.len();
    let mut solver = Solver::new(cfg, &f, &field);
    for _ in 0..1000 { solver.step(&mut field).unwrap(); }
    let steps = 100_000u64;
    let t0 = Instant::now();
    for _ in 0..steps { solver.step(&mut field).unwrap(); }
    let el = t0.elapsed().as_secs_f64();
    println!("nodes = {n}, steps = {steps}, total {el:.3} s, {:.1} ns/node-step",
        el * 1e9 / (steps as f64 * n as f64));
    println!("sup after = {} (sanity)", field.sup());
}
