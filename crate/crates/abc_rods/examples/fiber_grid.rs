//! Small deterministic two-layer fiber grid compressed quasi-statically;
//! a reduced analog of woven-fiber simulations showing the broadphase
//! search and multiple simultaneous contacts.

use abc_rods::scenario;

fn main() {
    let s = scenario::load("fiber_smoke", &[]).unwrap();
    let built = scenario::build(&s).unwrap();
    println!(
        "{} fibers, {} elements, {} dofs",
        4,
        built.mesh.elements.len(),
        built.mesh.n_dofs()
    );
    built
        .run(None, &mut |r| {
            println!(
                "step {:2}: contact potential {:.4e}, {} point / {} line contributions, {} Newton iterations",
                r.step, r.pi_c, r.n_point, r.n_line_gp, r.newton_iters
            );
        })
        .unwrap();
}
