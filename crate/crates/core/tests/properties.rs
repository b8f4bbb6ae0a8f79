use chi_spt::analysis::{estimate_lipschitz, n1_threshold};
use chi_spt::lyapunov::{sandwich_bounds, solve_discrete_lyapunov};
use chi_spt::manifold::{solve_h, InitialGuess, ManifoldSolverConfig};
use chi_spt::model::builtin::{lin1, sat1};
use chi_spt::model::expr::Bindings;
use chi_spt::model::{parse_config_document, parse_expr, BoxDomain, VarScope};
use chi_spt::simulate::simulate_full;
use chi_spt::Trajectory;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Reference tree rendered to text and evaluated with plain Rust math.
#[derive(Debug, Clone)]
enum Tree {
    Num(f64),
    X(usize),
    Z(usize),
    W(usize),
    Neg(Box<Tree>),
    Add(Box<Tree>, Box<Tree>),
    Sub(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    Div(Box<Tree>, Box<Tree>),
    Sin(Box<Tree>),
    Cos(Box<Tree>),
    Tanh(Box<Tree>),
    Exp(Box<Tree>),
    Abs(Box<Tree>),
    Sat(Box<Tree>),
    Min(Box<Tree>, Box<Tree>),
    Max(Box<Tree>, Box<Tree>),
}

impl Tree {
    fn text(&self) -> String {
        match self {
            Tree::Num(v) => format!("{v:?}"),
            Tree::X(i) => format!("x{}", i + 1),
            Tree::Z(i) => format!("z{}", i + 1),
            Tree::W(i) => format!("w{}", i + 1),
            Tree::Neg(a) => format!("-({})", a.text()),
            Tree::Add(a, b) => format!("({}) + ({})", a.text(), b.text()),
            Tree::Sub(a, b) => format!("({}) - ({})", a.text(), b.text()),
            Tree::Mul(a, b) => format!("({}) * ({})", a.text(), b.text()),
            Tree::Div(a, b) => format!("({}) / ({})", a.text(), b.text()),
            Tree::Sin(a) => format!("sin({})", a.text()),
            Tree::Cos(a) => format!("cos({})", a.text()),
            Tree::Tanh(a) => format!("tanh({})", a.text()),
            Tree::Exp(a) => format!("exp({})", a.text()),
            Tree::Abs(a) => format!("abs({})", a.text()),
            Tree::Sat(a) => format!("sat({})", a.text()),
            Tree::Min(a, b) => format!("min({}, {})", a.text(), b.text()),
            Tree::Max(a, b) => format!("max({}, {})", a.text(), b.text()),
        }
    }

    fn eval(&self, x: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let e = |t: &Tree| t.eval(x, z, w);
        match self {
            Tree::Num(v) => *v,
            Tree::X(i) => x[*i],
            Tree::Z(i) => z[*i],
            Tree::W(i) => w[*i],
            Tree::Neg(a) => -e(a),
            Tree::Add(a, b) => e(a) + e(b),
            Tree::Sub(a, b) => e(a) - e(b),
            Tree::Mul(a, b) => e(a) * e(b),
            Tree::Div(a, b) => e(a) / e(b),
            Tree::Sin(a) => e(a).sin(),
            Tree::Cos(a) => e(a).cos(),
            Tree::Tanh(a) => e(a).tanh(),
            Tree::Exp(a) => e(a).exp(),
            Tree::Abs(a) => e(a).abs(),
            Tree::Sat(a) => e(a).clamp(-1.0, 1.0),
            Tree::Min(a, b) => e(a).min(e(b)),
            Tree::Max(a, b) => e(a).max(e(b)),
        }
    }
}

fn tree() -> impl Strategy<Value = Tree> {
    let leaf = prop_oneof![
        (0.0..100.0f64).prop_map(Tree::Num),
        (0..2usize).prop_map(Tree::X),
        (0..2usize).prop_map(Tree::Z),
        (0..2usize).prop_map(Tree::W),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        let b = || inner.clone().prop_map(Box::new);
        prop_oneof![
            b().prop_map(Tree::Neg),
            (b(), b()).prop_map(|(l, r)| Tree::Add(l, r)),
            (b(), b()).prop_map(|(l, r)| Tree::Sub(l, r)),
            (b(), b()).prop_map(|(l, r)| Tree::Mul(l, r)),
            (b(), b()).prop_map(|(l, r)| Tree::Div(l, r)),
            b().prop_map(Tree::Sin),
            b().prop_map(Tree::Cos),
            b().prop_map(Tree::Tanh),
            b().prop_map(Tree::Exp),
            b().prop_map(Tree::Abs),
            b().prop_map(Tree::Sat),
            (b(), b()).prop_map(|(l, r)| Tree::Min(l, r)),
            (b(), b()).prop_map(|(l, r)| Tree::Max(l, r)),
        ]
    })
}

const SCOPE: VarScope = VarScope {
    n_x: 2,
    m_z: 2,
    w: 2,
};

fn same(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b || (a - b).abs() <= 1e-15 * a.abs().max(b.abs())
}

fn vec2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parsed_expressions_match_reference(t in tree(), x in vec2(), z in vec2(), w in vec2()) {
        let e = parse_expr(&t.text(), SCOPE).unwrap();
        let got = e.eval(&Bindings { x: &x, z: &z, w: &w });
        let want = t.eval(&x, &z, &w);
        prop_assert!(same(got, want), "{} -> {got} vs {want}", t.text());
    }

    #[test]
    fn print_parse_fixed_point(t in tree(), x in vec2(), z in vec2(), w in vec2()) {
        let e1 = parse_expr(&t.text(), SCOPE).unwrap();
        let s1 = e1.to_string();
        let e2 = parse_expr(&s1, SCOPE).unwrap();
        prop_assert_eq!(&e1, &e2);
        prop_assert_eq!(e2.to_string(), s1);
        let b = Bindings { x: &x, z: &z, w: &w };
        prop_assert!(same(e1.eval(&b), e2.eval(&b)));
    }

    #[test]
    fn config_text_round_trip(
        f in tree(),
        mu in 1e-6..1.0f64,
        lo in -5.0..-0.1f64,
        hi in 0.1..5.0f64,
        seed in any::<u64>(),
    ) {
        // f may only read w; rewrite x and z references to w.
        let f_text = ["x1", "x2", "z1", "z2"]
            .iter()
            .zip(["w1", "w2", "w1", "w2"])
            .fold(f.text(), |t, (from, to)| t.replace(from, to));
        let text = format!(
            "name = P\nn_x = 1\nm_z = 2\nmu = {mu:?}\nf1 = ({f_text}) * 0\n\
             g1 = 0.5*z1 + 0.1*x1 + w2\ng2 = 0.25*tanh(z2) + w1\n\
             domain_x = [{lo:?}, {hi:?}]\nanalysis.seed = {seed}\n"
        );
        let cfg = parse_config_document(&text).unwrap();
        let again = parse_config_document(&cfg.to_text()).unwrap();
        prop_assert_eq!(&cfg, &again);
        prop_assert_eq!(cfg.to_text(), again.to_text());
    }

    #[test]
    fn simulate_full_matches_hand_coded(
        x0 in -2.0..2.0f64,
        z0 in -2.0..2.0f64,
        mu in 1e-4..0.3f64,
        n in 1..300usize,
    ) {
        let sys = lin1().with_mu(mu).unwrap();
        let (x, z) = simulate_full(&sys, &[x0], &[z0], n).unwrap();
        let (mut xr, mut zr) = (x0, z0);
        for k in 0..=n {
            prop_assert_eq!(x.get(k)[0], xr);
            prop_assert_eq!(z.get(k)[0], zr);
            let w = mu * zr;
            (xr, zr) = (xr + -w, 0.25 * xr + 0.5 * zr + w);
        }
        let (x2, z2) = simulate_full(&sys, &[x0], &[z0], n).unwrap();
        prop_assert_eq!(x, x2);
        prop_assert_eq!(z, z2);
    }

    #[test]
    fn trajectory_csv_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e300..1e300f64, 3), 1..40)) {
        let t = Trajectory::from_states(0, 3, &rows).unwrap();
        prop_assert_eq!(Trajectory::from_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn lipschitz_estimate_grows_with_pairs(n1 in 1..200usize, extra in 0..200usize, seed in any::<u64>()) {
        let d = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let map = |u: &[f64]| Ok(vec![u[0].sin() * u[1], (u[0] * u[1]).tanh()]);
        let small = estimate_lipschitz(map, &d, n1, seed).unwrap();
        let large = estimate_lipschitz(map, &d, n1 + extra, seed).unwrap();
        prop_assert!(small <= large);
        prop_assert!(large <= 2.0f64.sqrt() * 1.5);
    }

    #[test]
    fn n1_monotone(mu in 1e-8..1.0f64, factor in 1.0..100.0f64, theta in 1e-3..10.0f64, t2 in 1.0..10.0f64) {
        let base = n1_threshold(mu, theta).unwrap();
        prop_assert!(n1_threshold(mu / factor, theta).unwrap() >= base);
        prop_assert!(n1_threshold(mu, theta * t2).unwrap() <= base);
        // exp(-theta n1) <= mu, and n1 is the first such integer.
        prop_assert!((-theta * base as f64).exp() <= mu * (1.0 + 1e-12));
        if base > 0 {
            prop_assert!((-theta * (base - 1) as f64).exp() > mu * (1.0 - 1e-12));
        }
    }

    #[test]
    fn sandwich_scale_equivariance(entries in prop::collection::vec(-1.0..1.0f64, 9), c in 1e-3..1e3f64) {
        let b = DMatrix::from_row_slice(3, 3, &entries);
        let p = &b * b.transpose() + DMatrix::identity(3, 3) * 0.1;
        let p = (&p + p.transpose()) * 0.5;
        let (lo, hi) = sandwich_bounds(&p).unwrap();
        let (clo, chi) = sandwich_bounds(&(&p * c)).unwrap();
        prop_assert!((clo - c * lo).abs() <= 1e-12 * c * hi);
        prop_assert!((chi - c * hi).abs() <= 1e-12 * c * hi);
        prop_assert!(lo <= hi);
    }

    #[test]
    fn lyapunov_solution_certifies_itself(entries in prop::collection::vec(-1.0..1.0f64, 9), rho in 0.05..0.95f64) {
        let a = DMatrix::from_row_slice(3, 3, &entries);
        let r = chi_spt::linalg::spectral_radius(&a);
        prop_assume!(r > 1e-6);
        let a = a * (rho / r);
        let p = solve_discrete_lyapunov(&a).unwrap();
        let pm = p.matrix();
        let residual = (a.transpose() * pm * &a - pm + DMatrix::identity(3, 3)).norm();
        prop_assert!(residual <= 1e-10 * pm.norm().max(1.0));
        let (lo, _) = p.sandwich_bounds();
        prop_assert!(lo >= 1.0 - 1e-9, "P >= I because P = I + A'PA");
        // V decreases along u -> A u.
        for u in [[1.0, 0.0, 0.0], [0.3, -0.7, 0.2], [0.0, 1.0, 1.0]] {
            let au: Vec<f64> = (a.clone() * DMatrix::from_column_slice(3, 1, &u)).iter().copied().collect();
            prop_assert!(p.eval(&au) < p.eval(&u));
        }
    }

    #[test]
    fn warm_and_zero_starts_agree(x in -2.0..2.0f64) {
        let warm = ManifoldSolverConfig::default();
        let zero = ManifoldSolverConfig { initial_guess: InitialGuess::Zero, ..warm };
        for sys in [lin1(), sat1()] {
            let a = solve_h(&sys, &[x], &warm).unwrap();
            let b = solve_h(&sys, &[x], &zero).unwrap();
            prop_assert!((a[0] - b[0]).abs() <= 10.0 * warm.tol);
        }
    }
}
