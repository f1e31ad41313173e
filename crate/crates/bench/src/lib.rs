//! Benchmark fixtures shared by the criterion targets.

use symlab::geometry::BoundaryCurve;

/// A nonconvex three-lobed star, the usual workload.
pub fn star() -> BoundaryCurve {
    BoundaryCurve::new(1.0, vec![0.0, 0.0, 0.12], vec![0.0, 0.04], [0.1, -0.05]).expect("valid curve")
}
