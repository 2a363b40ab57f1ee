//! Parameter estimation formulas: the penalty stiffness ratio that makes
//! point and line contact forces match at a reference angle, the shifting
//! angle for an admissible point-force error, and the Gauss-point density
//! needed to resolve a line contact.

use abc_rods::contact::abc::{
    choose_alpha1, min_gauss_points, penalty_ratio_analytic, penalty_ratio_numeric,
};
use abc_rods::penalty::PenaltyLaw;

fn main() {
    let radius = 0.01;
    for alpha in [10.0, 20.0, 30.0, 60.0] {
        let ratio = penalty_ratio_analytic(radius, alpha).unwrap();
        println!(
            "R = {radius}, angle {alpha:>4.1} deg: eps_perp/eps_par = {ratio:.5e} (eps_par/eps_perp = {:.1})",
            1.0 / ratio
        );
    }

    // The analytic ratio is the deep-penetration limit of the quadrature of
    // the distributed line force profile.
    let law = PenaltyLaw::linear(1.0).unwrap();
    let num = penalty_ratio_numeric(&law, -2.0 * radius + 1e-12, 20.0, radius).unwrap();
    let ana = penalty_ratio_analytic(radius, 20.0).unwrap();
    println!("numeric quadrature check at 20 deg: {num:.5e} vs analytic {ana:.5e}");

    for mu in [0.001, 0.01, 0.05] {
        let a1 = choose_alpha1(mu, 1.2).unwrap();
        println!("admissible point-force error {mu}: alpha1 = {a1:.2} deg");
    }

    for (g, alpha, rho) in [(-0.1, 11.0, 51.0), (-0.5, 30.0, 51.0), (-1.0, 90.0, 100.0)] {
        let n = min_gauss_points(g, alpha, rho, 1.0).unwrap();
        println!(
            "normalized gap {g}, angle {alpha} deg, slenderness {rho}: at least {n} Gauss points"
        );
    }
}
