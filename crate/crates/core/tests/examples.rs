//! Every runnable example must keep working.

macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $module() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(slow_manifold, "slow_manifold.rs");
example!(simulate_models, "simulate_models.rs");
example!(order_of_accuracy, "order_of_accuracy.rs");
example!(boundary_layer_tail, "boundary_layer_tail.rs");
example!(lyapunov_certificate, "lyapunov_certificate.rs");
example!(stability_threshold, "stability_threshold.rs");
example!(custom_system, "custom_system.rs");
example!(lipschitz_estimates, "lipschitz_estimates.rs");
