//! Ball-image convexity certificates: the origin-centered radius test and
//! the shifted-center test, including a radius the bounds decline to
//! certify.
//!
//! ```bash
//! cargo run --example certify_shifted_ball
//! ```

use nalgebra::DVector;
use quadconvex::bounds::{certify_ball, compute_report, BoundChoice};
use quadconvex::cli::FIXTURE_POLYAK;
use quadconvex::quadmap::{BallSpec, QuadraticMap};

fn main() -> quadconvex::Result<()> {
    let map = QuadraticMap::parse_problem(FIXTURE_POLYAK)?;
    let report = compute_report(&map);
    println!(
        "certified radius eps* = nu/(2 L) = {:.6} for the tight example",
        report.eps_star.value
    );

    let cases = [
        (DVector::zeros(2), 0.3),
        (DVector::from_column_slice(&[0.1, 0.0]), 0.2),
        (DVector::from_column_slice(&[0.4, 0.0]), 0.2),
        (DVector::zeros(2), 0.4),
    ];
    for (center, eps) in cases {
        let ball = BallSpec::new(center.clone(), eps)?;
        let cert = certify_ball(&report, &ball, BoundChoice::L)?;
        println!(
            "center ({:+.2}, {:+.2}), eps {:.2}: {:?} {} margin {:+.4}",
            center[0],
            center[1],
            eps,
            cert.status,
            cert.rule
                .map(|r| format!("via {r:?},"))
                .unwrap_or_default(),
            cert.margin
        );
    }
    Ok(())
}
