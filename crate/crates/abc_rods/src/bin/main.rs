use abc_rods::contact::abc::{choose_alpha1, min_gauss_points, penalty_ratio_analytic};
use abc_rods::diagnostics::pair_consistency_suite;
use abc_rods::scenario;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "abc-rods",
    about = "Slender-rod contact dynamics: beam elements with all-angle beam-to-beam contact"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario or a scenario TOML file.
    Run {
        /// Built-in name (example1_arc, example2_impact, crossing_guard,
        /// fiber_smoke) or path to a scenario TOML file.
        scenario: String,
        /// Output directory for diagnostics CSV and VTK files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dotted-path parameter overrides, e.g. contact.eps_perp=2e4.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Finite-difference consistency suites on randomized contact pairs and
    /// on the scenario's assembled tangent.
    CheckGradients {
        scenario: String,
        /// Number of randomized pair configurations.
        #[arg(long, default_value_t = 50)]
        configs: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Penalty parameter estimates for a rod radius, expected minimal
    /// contact angle (degrees) and admissible point-force error fraction.
    Estimate {
        radius: f64,
        alpha_bar: f64,
        mu_max: f64,
    },
}

fn split_override(raw: &str) -> Result<(String, String), String> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("override '{raw}' is not of the form key=value"))
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            scenario: name,
            out,
            overrides,
        } => {
            let overrides = overrides
                .iter()
                .map(|o| split_override(o))
                .collect::<Result<Vec<_>, _>>()?;
            let s = scenario::load(&name, &overrides).map_err(|e| e.to_string())?;
            let built = scenario::build(&s).map_err(|e| e.to_string())?;
            let mut last = None;
            built
                .run(out.as_deref(), &mut |r| last = Some(r.clone()))
                .map_err(|e| e.to_string())?;
            if let Some(r) = last {
                println!(
                    "done: {} steps, t = {:.6}, E_kin = {:.6e}, E_int = {:.6e}, Pi_c = {:.6e}, W_con = {:.6e}",
                    r.step, r.t, r.e_kin, r.e_int, r.pi_c, r.w_con
                );
                println!(
                    "contact at last step: {} point, {} line Gauss, {} endpoint",
                    r.n_point, r.n_line_gp, r.n_endpoint
                );
            } else {
                println!("done: no steps taken");
            }
            if let Some(dir) = out {
                println!("results in {}", dir.display());
            }
            Ok(())
        }
        Command::CheckGradients {
            scenario: name,
            configs,
            seed,
        } => {
            // Validate the scenario definition even though the randomized
            // suite is scenario-independent.
            let s = scenario::load(&name, &[]).map_err(|e| e.to_string())?;
            scenario::build(&s).map_err(|e| e.to_string())?;
            let sum = pair_consistency_suite(configs, seed).map_err(|e| e.to_string())?;
            println!("pair consistency over {} random configurations:", sum.n_configs);
            println!(
                "  stiffness vs FD, force-based:      {:.3e} (tolerance 1e-5)",
                sum.max_stiffness_err_force
            );
            println!(
                "  stiffness vs FD, potential-based:  {:.3e} (tolerance 1e-4)",
                sum.max_stiffness_err_potential
            );
            println!(
                "  residual vs potential gradient:    {:.3e} (tolerance 1e-5)",
                sum.max_gradient_err_potential
            );
            println!(
                "  force-based in-band gradient gap:  {:.3e} (non-conservative by design)",
                sum.min_force_based_band_deviation
            );
            println!(
                "  rigid translation contraction:     {:.3e}",
                sum.max_translation_contraction
            );
            println!(
                "  rigid rotation contraction:        {:.3e}",
                sum.max_rotation_contraction
            );
            println!(
                "  contributions: {} point, {} line Gauss, {} endpoint, {} in-band",
                sum.n_point, sum.n_line_gp, sum.n_endpoint, sum.n_band
            );
            let ok = sum.max_stiffness_err_force < 1e-5
                && sum.max_stiffness_err_potential < 1e-4
                && sum.max_gradient_err_potential < 1e-5
                && sum.max_translation_contraction < 1e-12
                && sum.max_rotation_contraction < 1e-12;
            if ok {
                println!("all gradient checks passed");
                Ok(())
            } else {
                Err("gradient check tolerances exceeded".to_string())
            }
        }
        Command::Estimate {
            radius,
            alpha_bar,
            mu_max,
        } => {
            let ratio = penalty_ratio_analytic(radius, alpha_bar).map_err(|e| e.to_string())?;
            let alpha1 = choose_alpha1(mu_max, 1.2).map_err(|e| e.to_string())?;
            println!(
                "penalty ratio eps_perp/eps_par = 4R/(3 sin a) = {:.6e}  (eps_par/eps_perp = {:.3})",
                ratio,
                1.0 / ratio
            );
            println!(
                "shifting angle alpha1 for point-force error {mu_max}: {alpha1:.3} deg (safety factor 1.2)"
            );
            for (g, rho) in [(-0.1, 20.0), (-0.1, 51.0), (-0.5, 51.0)] {
                let n = min_gauss_points(g, alpha_bar, rho, 1.0).map_err(|e| e.to_string())?;
                println!(
                    "line Gauss points for normalized gap {g}, slenderness {rho}: {n} per slave element"
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
