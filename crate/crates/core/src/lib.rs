//! Two-player racing games on a closed track: motion-primitive trajectory
//! enumeration, bimatrix payoff construction, exact pure-strategy equilibria,
//! viability-kernel pruning and seeded receding-horizon races.

pub mod collision;
pub mod error;
pub mod game;
pub mod kernel;
pub mod motion;
pub mod reference;
pub mod scenario;
pub mod sim;
pub mod solver;
pub mod track;

pub use error::{Error, Result};
