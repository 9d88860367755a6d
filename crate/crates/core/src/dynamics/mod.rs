//! Hamiltonians, the reversible midpoint step and the dissipative stepper.

mod hamiltonian;
mod stepper;
mod trajectory;

pub use hamiltonian::{
    step_reversible, symplectic_gradient, Hamiltonian, HamiltonianDescriptor, DT_FD_STEP,
};
pub use stepper::{solve_gap, DissipativeProblem, GapScheme, GapStep, SolverOptions, NEGATIVE_TOL};
pub use trajectory::{fingerprint, hex, simulate, simulate_partial, SimulationOutcome, Trajectory};

