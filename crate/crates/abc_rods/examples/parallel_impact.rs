//! Two free-free parallel beams: pulse loads spin one in-plane and fire the
//! other at it; after the pulses end, linear and angular momentum are
//! conserved through the oblique impact, and with the potential-based
//! transition the total energy stays constant as well.

use abc_rods::scenario;

fn main() {
    let s = scenario::load("example2_impact", &[]).unwrap();
    let built = scenario::build(&s).unwrap();
    let mut reports = Vec::new();
    built
        .run(None, &mut |r| {
            if r.step % 200 == 0 || r.n_point + r.n_line_gp > 0 {
                reports.push(r.clone());
            }
        })
        .unwrap();
    println!("{:>7} {:>12} {:>12} {:>12} {:>6}", "t", "E_total", "|L|", "|H|", "contact");
    for r in &reports {
        if r.step % 200 == 0 || r.n_point + r.n_line_gp > 0 {
            println!(
                "{:7.3} {:12.5e} {:12.5e} {:12.5e} {:>6}",
                r.t,
                r.e_kin + r.e_int + r.pi_c,
                r.linear_momentum.norm(),
                r.angular_momentum.norm(),
                r.n_point + r.n_line_gp + r.n_endpoint,
            );
        }
    }
    let contact_window: Vec<f64> = reports
        .iter()
        .filter(|r| r.n_point + r.n_line_gp > 0)
        .map(|r| r.t)
        .collect();
    if let (Some(first), Some(last)) = (contact_window.first(), contact_window.last()) {
        println!("impact window: t = {first:.3} .. {last:.3}");
    }
}
