//! Numerical toolkit for the Gates-Lebowitz-Penrose (GLP) non-local free
//! energy on a periodic grid: constrained minimization over order-parameter
//! fields with fixed mean, the 1-D instanton and its surface tension, the
//! reduced volume-fraction model, and droplet diagnostics.

pub mod analysis;
pub mod constants;
pub mod field;
pub mod instanton;
pub mod kernel;
pub mod minimize;
mod numeric;
pub mod reduced;
pub mod thermo;
pub mod trial;

mod fft;

pub use field::{Field, ModelParams};
pub use kernel::{DiscreteKernel, KernelFamily, KernelSpec};
