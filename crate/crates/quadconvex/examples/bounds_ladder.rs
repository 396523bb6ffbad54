//! Computes the full ladder of Lipschitz bounds and the convexity radii
//! they certify, for the three bundled reference instances.
//!
//! ```bash
//! cargo run --example bounds_ladder
//! ```

use quadconvex::bounds::{compute_report, estimate_lf, LfSearchConfig};
use quadconvex::cli::{FIXTURE_E1, FIXTURE_E2, FIXTURE_POLYAK};
use quadconvex::quadmap::QuadraticMap;
use quadconvex::sdp;

fn main() -> quadconvex::Result<()> {
    for (name, text) in [
        ("polyak", FIXTURE_POLYAK),
        ("e1", FIXTURE_E1),
        ("e2", FIXTURE_E2),
    ] {
        let map = QuadraticMap::parse_problem(text)?;
        let mut report = compute_report(&map);
        report.l_tilde_new = Some(sdp::l_tilde(&map, 1e-6)?.l_tilde);
        report.lf_lower = Some(estimate_lf(&map, &LfSearchConfig::default())?.value);

        println!("== {name} (n={}, m={})", report.n, report.m);
        println!("   L           = {:.6}   (sqrt of summed squared spectral norms)", report.l);
        println!("   L_new       = {:.6}   (spectral norm of the summed Gram matrices)", report.l_new);
        println!("   L_bar_new   = {:.6}   (Gershgorin variant)", report.l_bar_new);
        println!("   L_tilde_new = {:.6}   (lifted relaxation)", report.l_tilde_new.unwrap());
        println!("   Lf_lower    = {:.6}   (sphere-search lower bound on the exact constant)", report.lf_lower.unwrap());
        println!("   nu          = {:.6}", report.nu);
        println!("   eps*(L)     = {:.6}", report.eps_star.value);
        println!("   eps*(L_new) = {:.6}", report.eps_star_new.value);
        println!();
    }
    Ok(())
}
