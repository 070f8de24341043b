//! Learned parameter extrapolation for layered variational circuits on spin
//! chains: models and ansätze, a dense state-vector simulator, a free-fermion
//! simulator, a BFGS outer loop, the parameter-predicting networks, physics
//! fits and the collect/train/predict/evaluate pipeline.

pub mod error;
pub mod fermion;
pub mod fit;
pub mod model;
pub mod net;
pub mod optimizer;
pub mod pauli;
pub mod pipeline;
pub mod statevector;

pub use error::{Error, Result};
pub use model::{ansatz_spec, build_hamiltonian, AnsatzSpec, ModelKind, ModelSpec, ParamSet, ParamSource};
pub use pauli::{Pauli, PauliString, TermList};
