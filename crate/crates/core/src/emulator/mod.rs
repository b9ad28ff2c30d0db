//! Gaussian-process emulator: kernels, polynomial means, exact inference and
//! maximum-likelihood training.

pub mod fit;
pub mod gp;
pub mod kernel;
pub mod linalg;
pub mod mean;
pub mod optimize;

pub use fit::{fit, fit_multioutput, EmulatorSpec, FitSettings, SearchBox};
pub use gp::{
    gram, lml_and_gradient, lml_gradient, log_marginal_likelihood, EmulatorDocument, Mean,
    Prediction, TrainedEmulator, Z95,
};
pub use kernel::{Kernel, KernelFamily, KernelKind};
pub use linalg::{Cholesky, Matrix};
pub use mean::{MeanBasis, MeanKind};
