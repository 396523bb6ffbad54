//! The exact gradient-Lipschitz constant is the maximum of
//! `||[A_1 y ... A_m y]||` over the unit sphere - a nonconvex eigenvalue
//! optimization. This example runs the deterministic sphere-net search with
//! multistart ascent and compares the certified lower bound it returns
//! against the closed-form upper bounds.
//!
//! ```bash
//! cargo run --example exact_constant_search
//! ```

use quadconvex::bounds::{bound_l, bound_l_new, estimate_lf, LfSearchConfig};
use quadconvex::cli::{FIXTURE_E1, FIXTURE_POLYAK};
use quadconvex::quadmap::QuadraticMap;

fn main() -> quadconvex::Result<()> {
    // every unit direction of the tight example attains the constant
    let map = QuadraticMap::parse_problem(FIXTURE_POLYAK)?;
    let est = estimate_lf(&map, &LfSearchConfig::default())?;
    println!(
        "tight example: search -> {:.12} (closed form sqrt(2) = {:.12})",
        est.value,
        std::f64::consts::SQRT_2
    );

    let map = QuadraticMap::parse_problem(FIXTURE_E1)?;
    for net in [100, 1_000, 10_000] {
        let config = LfSearchConfig {
            net_size: Some(net),
            ..LfSearchConfig::default()
        };
        let est = estimate_lf(&map, &config)?;
        println!(
            "e1, net {net:>6}: lower bound {:.8}  argmax y = ({:+.5}, {:+.5}, {:+.5})",
            est.value, est.argmax[0], est.argmax[1], est.argmax[2]
        );
    }
    println!(
        "e1 upper bounds: L = {:.6}, L_new = {:.6} (the estimate must stay below both)",
        bound_l(&map),
        bound_l_new(&map)
    );
    Ok(())
}
