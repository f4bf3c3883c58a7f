//! Time-uniform confidence sequences for the mean of bounded streams,
//! built from the wealth of betting strategies.

mod error;
pub mod game;
pub mod confseq;
pub mod hr;
pub mod lbup;
pub mod roots;
pub mod special;
pub mod up;

pub use error::{Error, Result};
pub use confseq::{ConfidenceState, Method};
pub use roots::Interval;
