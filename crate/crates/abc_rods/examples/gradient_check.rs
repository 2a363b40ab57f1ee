//! Randomized finite-difference consistency suite over two-element contact
//! pairs: analytic stiffness against central differences, residual against
//! the potential gradient, and rigid-body force/torque balance.

use abc_rods::diagnostics::pair_consistency_suite;

fn main() {
    let summary = pair_consistency_suite(50, 2024).unwrap();
    println!("{} configurations:", summary.n_configs);
    println!(
        "  max stiffness-vs-FD error, force-based transition:     {:.3e}",
        summary.max_stiffness_err_force
    );
    println!(
        "  max stiffness-vs-FD error, potential-based transition: {:.3e}",
        summary.max_stiffness_err_potential
    );
    println!(
        "  max residual-vs-potential-gradient error:              {:.3e}",
        summary.max_gradient_err_potential
    );
    println!(
        "  min in-band gradient deviation of the force-based law: {:.3e}",
        summary.min_force_based_band_deviation
    );
    println!(
        "  rigid-body contractions: translation {:.3e}, rotation {:.3e}",
        summary.max_translation_contraction, summary.max_rotation_contraction
    );
}
