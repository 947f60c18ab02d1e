//! # dsgm
//!
//! A numerical laboratory for graphs sampled from kernel random graph models
//! at controlled sparsity. The crate provides:
//!
//! - probability kernels with closed-form and discretized spectra ([`kernels`]),
//! - random graph samplers (kernel-based and stochastic block model),
//!   Gaussian-mixture node features and edge-drop sparsification ([`graphs`]),
//! - symmetric eigendecomposition, spectral embeddings and the graph Fourier
//!   transform ([`spectra`]),
//! - eigenvalue/eigenvector concentration bounds and empirical gap
//!   measurements between sampled graphs and their generating kernel
//!   ([`concentration`]),
//! - graph-convolutional networks trained by full-batch gradient descent with
//!   exact analytic gradients, plus exact filter interpolation ([`gnn`]),
//! - a reproducible experiment harness behind the `dsgm` CLI ([`harness`]).
//!
//! All stochastic operations are deterministic given a seed; experiment trials
//! derive independent ChaCha streams from a master seed so results are
//! byte-reproducible regardless of scheduling.

pub mod concentration;
pub mod gnn;
pub mod graphs;
pub mod harness;
pub mod kernels;
pub mod rng;
pub mod spectra;
