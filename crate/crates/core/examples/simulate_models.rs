// Simulate the full system and its reduced and boundary-layer
// approximations, then compare them.

use std::error::Error;

use chi_spt::analysis::error_series;
use chi_spt::manifold::{solve_h, ManifoldSolverConfig};
use chi_spt::model::builtin::lin1;
use chi_spt::simulate::{
    compose_approximation, simulate_boundary_layer, simulate_full, simulate_reduced,
};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cfg = ManifoldSolverConfig::default();
    let sys = lin1().with_mu(0.05)?;
    let (x0, z0) = ([1.0], [1.0]);
    let n = 200;

    let (x, z) = simulate_full(&sys, &x0, &z0, n)?;
    let (xs, zs) = simulate_reduced(&sys, &x0, n, &cfg)?;
    let h0 = solve_h(&sys, &x0, &cfg)?;
    let y = simulate_boundary_layer(&sys, &xs, &[z0[0] - h0[0]], n, &cfg)?;
    let z_approx = compose_approximation(&zs, &y)?;

    println!(
        "{:>4} {:>10} {:>10} {:>10} {:>10}",
        "n", "x", "x_s", "z", "h(x_s)+y"
    );
    for k in [0, 1, 2, 5, 10, 50, 200] {
        println!(
            "{k:>4} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            x.get(k)[0],
            xs.get(k)[0],
            z.get(k)[0],
            z_approx.get(k)[0]
        );
    }
    let sup = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    println!(
        "sup |x - x_s|         = {:.3e}",
        sup(error_series(&x, &xs)?)
    );
    println!(
        "sup |z - h(x_s) - y|  = {:.3e}",
        sup(error_series(&z, &z_approx)?)
    );

    // The first rows of the CSV written by `chi-spt simulate`.
    print!("{}", x.prefix(3).to_csv());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
