//! The quantile transformation `φ̂(z, x, u)`.

mod general;
mod map;
mod order;
mod stage;
mod triangular;

pub use general::{solve_general, GeneralOptions, GeneralSolution};
pub use map::{isotonic_increasing, phi_hat, QuantileMap, QuantileMapConfig, QuantileSlice, SolverMode};
pub use order::{detect_triangular, LevelOrder, MAX_TRIANGULAR_LEVELS};
pub use stage::{CellCdfBundle, FirstStage, FirstStageConfig};
pub use triangular::{eval_a, generalized_residual, solve_triangular, solve_triangular_partial};
