// Sampled Lipschitz lower bounds for `f`, `g` and the slow manifold.

use std::error::Error;

use chi_spt::analysis::{estimate_lipschitz, estimate_lipschitz_h};
use chi_spt::manifold::ManifoldSolverConfig;
use chi_spt::model::builtin::sat1;
use chi_spt::model::BoxDomain;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let sys = sat1();
    let cfg = ManifoldSolverConfig::default();
    let w = BoxDomain::cube(1, -1.0, 1.0)?;
    for n in [10, 100, 1000, 10_000] {
        let l_f = estimate_lipschitz(|w| sys.eval_f(w), &w, n, 42)?;
        let l_h = estimate_lipschitz_h(&sys, &cfg, n, 42)?;
        println!("pairs {n:>6}: L_f >= {l_f:.6}  L_h >= {l_h:.6}");
    }
    let sq = BoxDomain::cube(2, -1.0, 1.0)?;
    let l = estimate_lipschitz(|u| Ok(vec![u[0] * u[0], u[1]]), &sq, 5000, 3)?;
    println!("(u1^2, u2) on [-1, 1]^2: L >= {l:.4} (exact 2)");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
