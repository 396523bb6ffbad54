//! Certified local-convexity radii for quadratic transformations.
//!
//! A quadratic map `f(x) = (1/2 x'A_1 x + a_1'x, ..., 1/2 x'A_m x + a_m'x)`
//! sends a small enough ball to a convex set whenever the ball radius stays
//! below `nu / (2 L_b)`, where `nu` is the smallest singular value of
//! `[a_1 ... a_m]` and `L_b` any Lipschitz bound on the gradient map. This
//! crate computes a ladder of such bounds — from the classical sum of
//! squared spectral norms down to a Kronecker-lifted semidefinite relaxation
//! solved by an embedded interior-point method — issues ball certificates,
//! and probes images numerically to exhibit nonconvexity beyond the
//! certified radius.
//!
//! Modules:
//! - [`quadmap`]: problem model, JSON schema, evaluation and recentering.
//! - [`spectral`]: dense symmetric-eigenvalue/singular-value kernels and the
//!   eigenvalue inclusion bounds.
//! - [`bounds`]: the Lipschitz bound ladder, the exact-constant sphere
//!   search, radii and certificates.
//! - [`conic`]: the embedded PSD x SOC interior-point solver.
//! - [`sdp`]: the lifted relaxation built on top of it.
//! - [`oracle`]: sampling-based convexity probing of 2-D images with
//!   continuous witness refinement.
//! - [`plot`]: self-contained SVG scatter output.
//! - [`cli`]: the command-line front end (see the `quadconvex` binary).
//!
//! The `examples/` directory walks through every capability; the
//! `acceptance` test target replays the reference results end to end.

pub mod bounds;
pub mod cli;
pub mod conic;
pub mod error;
pub mod oracle;
pub mod plot;
pub mod quadmap;
pub mod sdp;
pub mod spectral;

pub use bounds::{
    bound_l, bound_l_bar, bound_l_new, certify_ball, compute_report, eps_star, estimate_lf,
    BoundChoice, BoundsReport, CertStatus, ConvexityCertificate, LfSearchConfig,
};
pub use error::{Error, Result};
pub use quadmap::{BallSpec, QuadraticMap};
pub use sdp::{build_relaxation, rank_one_value, solve_relaxation, RelaxationProblem, RelaxationSolution};
