// Define systems from config text and from closures, then check the
// standing assumptions.

use std::error::Error;
use std::sync::Arc;

use chi_spt::manifold::ManifoldSolverConfig;
use chi_spt::model::{parse_config_document, validate_assumptions, BoxDomain, ChiSystem};

const CONFIG: &str = "
name = DAMPED
n_x = 1
m_z = 2
mu = 0.02
f1 = -w1 - 0.5*w2
g1 = 0.3*z1 - 0.1*z2 + 0.2*sin(x1) + w1
g2 = 0.2*tanh(z1) + 0.4*z2 - 0.1*x1
domain_x = [-1, 1]
domain_z = [-1.5, 1.5]
";

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cfg = parse_config_document(CONFIG)?;
    let sys = cfg.build()?;
    let r = validate_assumptions(&sys, 500, 1, &cfg.solver)?;
    println!(
        "{}: margin {:.4}, L_f {:.3}, L_g {:.3}, pass {}",
        r.system, r.invertibility.margin, r.lipschitz.l_f, r.lipschitz.l_g, r.all_pass
    );
    println!("round trip:\n{}", cfg.to_text());

    let sys = ChiSystem::new(
        "CLOSURE",
        1,
        1,
        0.1,
        Arc::new(|w: &[f64]| vec![-w[0]]),
        Arc::new(|x: &[f64], z: &[f64], w: &[f64]| vec![0.25 * x[0] + 0.5 * z[0].sin() + w[0]]),
        BoxDomain::cube(1, -2.0, 2.0)?,
        BoxDomain::cube(1, -2.0, 2.0)?,
    )?;
    let r = validate_assumptions(&sys, 500, 1, &ManifoldSolverConfig::default())?;
    println!(
        "{}: margin {:.4}, pass {}",
        r.system, r.invertibility.margin, r.all_pass
    );

    match parse_config_document("n_x = 1\nm_z = 1\nmu = 0.1\nf1 = -w1\ng1 = 0.5*q1\n") {
        Ok(_) => println!("unexpectedly parsed"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
