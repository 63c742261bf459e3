//! Structural impulse responses from local projections, identified through an
//! instrument for the conditional variance of one shock, with dependent wild
//! bootstrap inference and simultaneous bands.

pub mod cli;
pub mod error;
pub mod inference;
pub mod lp;
pub mod numeric;
pub mod pipeline;
pub mod serde_rows;
pub mod sim;
pub mod smoother;
pub mod structural;

pub use error::{Error, Result, Warning};
pub use lp::{IrfBundle, LpEstimate, ResidualSet, ThetaVector};
pub use numeric::{DesignSpec, Panel};
