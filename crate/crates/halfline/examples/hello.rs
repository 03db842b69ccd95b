use halfline::nonlinearity::{compute_constants, Nonlinearity};
use halfline::steady;
use halfline::transition::boundary_amplitude;

fn main() {
    let f = Nonlinearity::cubic(0.25).unwrap();
    let c = compute_constants(&f).unwrap();
    let v = steady::build_ground_state(&f, 40.0, 4000).unwrap();
    let lam = f.lambda;
    let b = 0.0;
    // exact finite-xi drift: ydot(xi) = (R, Phi_xi) / ||Phi_xi||^2
    for &xi in &[5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 12.0, 14.0, 16.0, 20.0] {
        let bc = boundary_amplitude(&v, &f, b, xi);
        // B'(xi) for b=0 is V'(xi)
        let bprime = v.deriv(xi, &f);
        let dx = 0.005;
        let x_max = xi + 60.0;
        let n = (x_max / dx) as usize;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..=n {
            let x = i as f64 * dx;
            let w = bc * (-lam * x).exp();
            let r = f.linear_remainder(v.eval(xi - x), w);
            let phixi = -v.deriv(xi - x, &f) - bprime * (-lam * x).exp();
            // d/dxi V(xi - x) = V'(xi-x); careful: Phi(x,xi) = V(xi-x) - B e^{-lam x}
            // Phi_xi = V'(xi-x) - B'(xi) e^{-lam x}
            let phixi = -phixi; // fix sign: V'(xi-x) = deriv evaluated at (xi-x)
            let _ = phixi;
            let phixi = v.deriv(xi - x, &f) - bprime * (-lam * x).exp();
            let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
            num += wgt * r * phixi;
            den += wgt * phixi * phixi;
        }
        num *= dx;
        den *= dx;
        let ydot = num / den;
        let asym = c.drift_coef(b) * (-2.0 * lam * xi).exp();
        eprintln!(
            "xi = {xi:5.1}: ydot_exact = {ydot:12.5e}  asym = {asym:12.5e}  ratio = {:.4}  (num {num:.4e} den {den:.4e} 2I_F {:.4e})",
            ydot / asym, 2.0 * c.sqrt_f_integral
        );
    }
}
