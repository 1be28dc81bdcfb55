//! Problems shared by the benchmarks.

use tspec_core::{validate_problem, Coefficients, PerturbationSpec, TransmissionProblem};

/// p = (1, 1), Dirichlet ends, no coupling.
pub fn decoupled() -> TransmissionProblem {
    validate_problem(Coefficients::dirichlet(1.0, 1.0), PerturbationSpec::Zero).expect("valid")
}

/// p = (-1, 1) with delta0 = 1, gamma1 = -1.
pub fn coupled() -> TransmissionProblem {
    validate_problem(
        Coefficients::dirichlet(-1.0, 1.0).with_coupling(1.0, -1.0),
        PerturbationSpec::Zero,
    )
    .expect("valid")
}

/// p = (1, 4) with p1 delta0 + p2 gamma1 = 0.
pub fn symmetric() -> TransmissionProblem {
    validate_problem(
        Coefficients::dirichlet(1.0, 4.0).with_coupling(2.0, -0.5),
        PerturbationSpec::Zero,
    )
    .expect("valid")
}
