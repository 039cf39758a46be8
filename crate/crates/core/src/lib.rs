pub mod birkhoff;
pub mod curve;
pub mod error;
pub mod families;
pub mod flow;
pub mod fourier;
pub mod frequencies;
pub mod hill;
pub mod oracle;
pub mod quad;
pub mod roots;
pub mod spectrum;
pub mod verify;

pub use error::{Error, Result};
pub use fourier::{Potential, SequenceVector};
