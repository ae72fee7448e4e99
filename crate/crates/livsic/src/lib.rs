//! Finite-dimensional toolkit for operator colligations and their
//! characteristic matrix functions.
//!
//! A colligation packages a bounded operator `A` on an internal space with a
//! channel map `Phi` into an external space carrying a signature `J`, tied
//! together by the identity `(A - A*)/i = Phi* J Phi`. The characteristic
//! function `S(z) = I - i Phi (A - zI)^{-1} Phi* J` is the transfer function
//! of the associated open system; it multiplies under coupling, its invariant
//! subspaces correspond to factorizations, and it admits multiplicative
//! (Blaschke-Potapov / product-integral) representations. This crate realizes
//! all of that at matrix scale:
//!
//! * [`numerics`] - dense complex kernels (Hermitian eigen, complex Schur with
//!   reordering, matrix exponential, Hermitian functional calculus, solves),
//! * [`colligation`] - the colligation type with embedding, products,
//!   projections, principal/redundant splitting and unitary-equivalence tests,
//! * [`charfn`] - evaluation and analysis of `S`, `Q`, `V`, Cayley transforms,
//!   J-form classification, the Potapov-Ginzburg transform and open-system
//!   time simulation,
//! * [`factorize`] - extraction of elementary Blaschke-Potapov factors from a
//!   Schur chain,
//! * [`multint`] - multiplicative Stieltjes/Lebesgue integrals with the
//!   associated bound suite and a Helly-type convergence harness,
//! * [`models`] - triangular model operators (discrete, continuous, combined),
//!   the spectral model, and dissipative-operator demonstrations.

pub mod charfn;
pub mod colligation;
pub mod factorize;
pub mod models;
pub mod multint;
pub mod numerics;

pub use charfn::{CharFnSample, JClass, OpenSystemTrace};
pub use colligation::{Colligation, Signature, SubspaceBasis, ValidationReport};
pub use factorize::{BlaschkeProduct, ElementaryFactor};
pub use models::{CombinedModel, ContinuousModelData, DiscreteModelData};
pub use multint::{IntermediatePointRule, ProductIntegralResult, StieltjesWeight};
pub use numerics::{CMatrix, CVector, C64};
