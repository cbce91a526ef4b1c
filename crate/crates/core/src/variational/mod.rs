//! Mixed classical/Caputo variational problems: action, Fréchet
//! differential, Euler-Lagrange residual and a direct-transcription solver.

mod lagrangian;
mod problem;
mod solver;
mod transcription;

pub use lagrangian::{Free, Harmonic, Lagrangian, LagrangianSpec, Partials, Polynomial, PotentialPolynomial, QuadraticForm};
pub use problem::{Sampled, VariationalProblem};
pub use solver::{solve_extremal, solve_extremal_with, ExtremalSolution, SolveOptions};
pub use transcription::TranscribedAction;
pub(crate) use transcription::MidpointCaputo;
