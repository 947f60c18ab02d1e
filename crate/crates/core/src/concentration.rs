//! Concentration bounds for kernel graph spectra and empirical gap
//! measurements between sampled graphs and their generating kernel.
//!
//! The graph side of every comparison is the kernel induced by the graph:
//! its nonzero spectrum is `γ` times the spectrum of the leading
//! `(N-1)×(N-1)` adjacency block, and its eigenfunctions are the step
//! extensions of the block's eigenvectors scaled by `γ^{-1/2}`.

use std::sync::Arc;

use ndarray::Array2;
use thiserror::Error;

use crate::graphs::Graph;
use crate::kernels::KernelSpectrum;
use crate::spectra::{eig_sym, SpectraError};

#[derive(Debug, Error)]
pub enum ConcentrationError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("spectral separation must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("eigen index {k} out of range (kernel has {kernel}, induced has {induced})")]
    IndexOutOfRange {
        k: usize,
        kernel: usize,
        induced: usize,
    },
    #[error("graph carries no latent grid; sample it from the kernel model first")]
    MissingLatent,
    #[error("graph sparsity parameter {graph} does not match requested {requested}")]
    GammaMismatch { graph: f64, requested: f64 },
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

/// Sublinear correction term β(χ, N), supplied by the caller.
#[derive(Clone)]
pub enum BetaFn {
    /// β ≡ 0 (default): the bound reports only the resolvable terms.
    Zero,
    Constant(f64),
    Custom(Arc<dyn Fn(f64, usize) -> f64 + Send + Sync>),
}

impl BetaFn {
    pub fn eval(&self, chi: f64, n: usize) -> f64 {
        match self {
            BetaFn::Zero => 0.0,
            BetaFn::Constant(v) => *v,
            BetaFn::Custom(f) => f(chi, n),
        }
    }
}

impl std::fmt::Debug for BetaFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BetaFn::Zero => write!(f, "Zero"),
            BetaFn::Constant(v) => write!(f, "Constant({v})"),
            BetaFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Parameters of the concentration bounds.
#[derive(Debug, Clone)]
pub struct ConcentrationParams {
    /// Lipschitz constant of the kernel on `[-c, c]²`.
    pub a_w: f64,
    /// Truncation radius.
    pub c: f64,
    /// Sparsity parameter used at sampling.
    pub gamma: f64,
    /// Node count.
    pub n: usize,
    /// Failure probability in (0, 1).
    pub chi: f64,
    pub beta: BetaFn,
    /// Kernel tail mass ε(c).
    pub epsilon: f64,
}

impl ConcentrationParams {
    pub fn validate(&self) -> Result<(), ConcentrationError> {
        if self.a_w < 0.0 || !self.a_w.is_finite() {
            return Err(ConcentrationError::InvalidParams(format!(
                "a_w = {}",
                self.a_w
            )));
        }
        if self.c < 0.0 || self.gamma < 0.0 || self.epsilon < 0.0 {
            return Err(ConcentrationError::InvalidParams(
                "c, gamma and epsilon must be nonnegative".into(),
            ));
        }
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(ConcentrationError::InvalidParams(format!(
                "chi = {} outside (0, 1)",
                self.chi
            )));
        }
        if self.n == 0 {
            return Err(ConcentrationError::InvalidParams("n = 0".into()));
        }
        Ok(())
    }
}

/// The two algebraic forms of the eigenvalue concentration bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenvalueBounds {
    /// `4·A_w·c·γ + β(χ,N)/N + ε(c)`.
    pub first_form: f64,
    /// `2·A_w·N·γ² + β(χ,N)/N + ε(c)`.
    pub second_form: f64,
}

impl EigenvalueBounds {
    pub fn tighter(&self) -> f64 {
        self.first_form.min(self.second_form)
    }
}

/// Evaluates both eigenvalue-bound forms.
pub fn eigenvalue_bound(params: &ConcentrationParams) -> Result<EigenvalueBounds, ConcentrationError> {
    params.validate()?;
    let shared = params.beta.eval(params.chi, params.n) / params.n as f64 + params.epsilon;
    Ok(EigenvalueBounds {
        first_form: 4.0 * params.a_w * params.c * params.gamma + shared,
        second_form: 2.0 * params.a_w * params.n as f64 * params.gamma * params.gamma + shared,
    })
}

/// Eigenvector bound `(π / 2δ_k) · (4·A_w·c·γ + β/N + ε(c))`.
pub fn eigenvector_bound(
    params: &ConcentrationParams,
    delta_k: f64,
) -> Result<f64, ConcentrationError> {
    params.validate()?;
    if !(delta_k > 0.0) {
        return Err(ConcentrationError::NonPositiveDelta(delta_k));
    }
    let inner = 4.0 * params.a_w * params.c * params.gamma
        + params.beta.eval(params.chi, params.n) / params.n as f64
        + params.epsilon;
    Ok(std::f64::consts::PI / (2.0 * delta_k) * inner)
}

/// Spectral separation `δ_k = min_{i≠k} { |λ_k(W) − λ_i(W_N)|, |λ_k(W_N) − λ_i(W)| }`.
///
/// The minimum excludes `i = k`: including it would compare `λ_k(W)` with
/// `λ_k(W_N)` and collapse the separation to the very gap being bounded.
pub fn compute_delta_k(
    kernel_eigs: &[f64],
    induced_eigs: &[f64],
    k: usize,
) -> Result<f64, ConcentrationError> {
    if k >= kernel_eigs.len() || k >= induced_eigs.len() {
        return Err(ConcentrationError::IndexOutOfRange {
            k,
            kernel: kernel_eigs.len(),
            induced: induced_eigs.len(),
        });
    }
    let mut best = f64::INFINITY;
    for (i, &lam) in induced_eigs.iter().enumerate() {
        if i != k {
            best = best.min((kernel_eigs[k] - lam).abs());
        }
    }
    for (i, &lam) in kernel_eigs.iter().enumerate() {
        if i != k {
            best = best.min((induced_eigs[k] - lam).abs());
        }
    }
    Ok(best)
}

/// Gap measurement for one eigen index.
#[derive(Debug, Clone)]
pub struct GapReport {
    /// 0-based eigen index.
    pub k: usize,
    /// `|λ_k(W_N) − λ_k(W)|`.
    pub eigenvalue_gap: f64,
    /// L² distance between the kernel eigenfunction and the sign-aligned
    /// step extension of the graph eigenvector.
    pub eigenfunction_gap: f64,
    pub delta_k: f64,
    pub bound_eigenvalue: f64,
    pub bound_eigenvector: f64,
    /// Mass of the kernel eigenfunction outside the induced kernel's
    /// support, reported separately from the gap.
    pub kernel_tail_mass: f64,
}

/// Spectral side of a sampled graph, prepared once so several eigen indices
/// can be reported without repeating the decomposition.
#[derive(Debug)]
pub struct GapAnalysis {
    gamma: f64,
    /// γ-scaled eigenvalues of the induced kernel, |λ|-ordered.
    pub induced_eigenvalues: Vec<f64>,
    vectors: Array2<f64>,
    interval_mids: Vec<f64>,
    support: (f64, f64),
}

impl GapAnalysis {
    pub fn new(graph: &Graph, gamma: f64) -> Result<Self, ConcentrationError> {
        let grid = graph.latent().ok_or(ConcentrationError::MissingLatent)?;
        if let Some(g) = graph.gamma() {
            if (g - gamma).abs() > 1e-12 * gamma.abs().max(1.0) {
                return Err(ConcentrationError::GammaMismatch {
                    graph: g,
                    requested: gamma,
                });
            }
        }
        let n = graph.n();
        let blocks = n - 1;
        let mut sub = Array2::<f64>::zeros((blocks, blocks));
        for i in 0..blocks {
            for &j in graph.neighbors(i) {
                let j = j as usize;
                if j < blocks {
                    sub[(i, j)] = 1.0;
                }
            }
        }
        let decomp = eig_sym(&sub)?;
        let induced_eigenvalues = decomp.eigenvalues.iter().map(|l| l * gamma).collect();
        let interval_mids = (0..blocks).map(|i| (grid[i] + grid[i + 1]) / 2.0).collect();
        Ok(GapAnalysis {
            gamma,
            induced_eigenvalues,
            vectors: decomp.eigenvectors,
            interval_mids,
            support: (grid[0], grid[n - 1]),
        })
    }

    /// Gap report for eigen index `k` against a kernel spectrum.
    pub fn report(
        &self,
        spectrum: &KernelSpectrum,
        k: usize,
        params: &ConcentrationParams,
    ) -> Result<GapReport, ConcentrationError> {
        if k >= spectrum.eigenvalues.len() || k >= self.induced_eigenvalues.len() {
            return Err(ConcentrationError::IndexOutOfRange {
                k,
                kernel: spectrum.eigenvalues.len(),
                induced: self.induced_eigenvalues.len(),
            });
        }
        let eigenvalue_gap = (self.induced_eigenvalues[k] - spectrum.eigenvalues[k]).abs();
        let inv_sqrt_gamma = 1.0 / self.gamma.sqrt();
        // Quadrature on the interval midpoints: the step function is exact
        // there and the kernel eigenfunction is interpolated from its grid.
        let mut inner = 0.0;
        for (i, &mid) in self.interval_mids.iter().enumerate() {
            let phi = spectrum.eigenfunction_at(k, mid);
            let step = self.vectors[(i, k)] * inv_sqrt_gamma;
            inner += phi * step;
        }
        let sign = if inner >= 0.0 { 1.0 } else { -1.0 };
        let mut dist_sq = 0.0;
        for (i, &mid) in self.interval_mids.iter().enumerate() {
            let phi = spectrum.eigenfunction_at(k, mid);
            let step = sign * self.vectors[(i, k)] * inv_sqrt_gamma;
            dist_sq += (phi - step) * (phi - step) * self.gamma;
        }
        let delta_k = compute_delta_k(&spectrum.eigenvalues, &self.induced_eigenvalues, k)?;
        let bounds = eigenvalue_bound(params)?;
        let bound_eigenvector = eigenvector_bound(params, delta_k)?;
        let kernel_tail_mass = spectrum.tail_mass_outside(k, self.support.0, self.support.1);
        Ok(GapReport {
            k,
            eigenvalue_gap,
            eigenfunction_gap: dist_sq.sqrt(),
            delta_k,
            bound_eigenvalue: bounds.tighter(),
            bound_eigenvector,
            kernel_tail_mass,
        })
    }

    /// Distance without sign alignment, for the alignment invariant.
    pub fn unaligned_distance(&self, spectrum: &KernelSpectrum, k: usize) -> f64 {
        let inv_sqrt_gamma = 1.0 / self.gamma.sqrt();
        let mut dist_sq = 0.0;
        for (i, &mid) in self.interval_mids.iter().enumerate() {
            let phi = spectrum.eigenfunction_at(k, mid);
            let step = self.vectors[(i, k)] * inv_sqrt_gamma;
            dist_sq += (phi - step) * (phi - step) * self.gamma;
        }
        dist_sq.sqrt()
    }
}

/// One-shot gap measurement; prefer [`GapAnalysis`] when reporting several
/// indices for the same graph.
pub fn empirical_gap(
    spectrum: &KernelSpectrum,
    graph: &Graph,
    gamma: f64,
    k: usize,
    params: &ConcentrationParams,
) -> Result<GapReport, ConcentrationError> {
    GapAnalysis::new(graph, gamma)?.report(spectrum, k, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::sample_dsgm;
    use crate::kernels::{
        aligned_discretization, discretize_kernel_spectrum, induced_kernel, Kernel,
    };
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn zero_params(gamma: f64, n: usize) -> ConcentrationParams {
        ConcentrationParams {
            a_w: 1.0,
            c: 1.0,
            gamma,
            n,
            chi: 0.1,
            beta: BetaFn::Zero,
            epsilon: 0.0,
        }
    }

    #[test]
    fn bound_formulas() {
        let p = ConcentrationParams {
            a_w: 1.0,
            c: 1.0,
            gamma: 0.01,
            n: 1000,
            chi: 0.5,
            beta: BetaFn::Zero,
            epsilon: 0.0,
        };
        let b = eigenvalue_bound(&p).unwrap();
        assert_abs_diff_eq!(b.first_form, 0.04, epsilon = 1e-15);
        let p2 = ConcentrationParams {
            gamma: 0.002,
            ..p.clone()
        };
        let b2 = eigenvalue_bound(&p2).unwrap();
        assert_abs_diff_eq!(b2.second_form, 0.008, epsilon = 1e-15);
        // γ → 0 leaves β/N + ε.
        let p3 = ConcentrationParams {
            gamma: 0.0,
            beta: BetaFn::Constant(2.0),
            epsilon: 0.25,
            ..p.clone()
        };
        let b3 = eigenvalue_bound(&p3).unwrap();
        assert_abs_diff_eq!(b3.first_form, 2.0 / 1000.0 + 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(b3.second_form, b3.first_form, epsilon = 1e-15);
    }

    #[test]
    fn eigenvector_bound_scaling() {
        let p = zero_params(0.01, 1000);
        let b = eigenvector_bound(&p, std::f64::consts::PI / 2.0).unwrap();
        assert_abs_diff_eq!(b, 0.04, epsilon = 1e-15);
        let half = eigenvector_bound(&p, std::f64::consts::PI).unwrap();
        assert_abs_diff_eq!(half, 0.02, epsilon = 1e-15);
        assert!(matches!(
            eigenvector_bound(&p, 0.0),
            Err(ConcentrationError::NonPositiveDelta(_))
        ));
    }

    #[test]
    fn bounds_monotone_in_parameters() {
        let base = zero_params(0.002, 500);
        let gammas = [0.001, 0.002, 0.004, 0.01];
        let mut prev = (0.0, 0.0);
        for &g in &gammas {
            let b = eigenvalue_bound(&ConcentrationParams {
                gamma: g,
                ..base.clone()
            })
            .unwrap();
            assert!(b.first_form >= prev.0 && b.second_form >= prev.1);
            prev = (b.first_form, b.second_form);
        }
        for values in [[0.1, 0.5, 1.0, 2.0]] {
            let mut prev = (0.0, 0.0);
            for &a in &values {
                let b = eigenvalue_bound(&ConcentrationParams {
                    a_w: a,
                    ..base.clone()
                })
                .unwrap();
                assert!(b.first_form >= prev.0 && b.second_form >= prev.1);
                prev = (b.first_form, b.second_form);
            }
            let mut prev = (0.0, 0.0);
            for &eps in &values {
                let b = eigenvalue_bound(&ConcentrationParams {
                    epsilon: eps,
                    ..base.clone()
                })
                .unwrap();
                assert!(b.first_form >= prev.0 && b.second_form >= prev.1);
                prev = (b.first_form, b.second_form);
            }
        }
    }

    #[test]
    fn delta_k_examples() {
        let d = compute_delta_k(&[1.0, 0.5], &[0.9, 0.4], 0).unwrap();
        assert_abs_diff_eq!(d, 0.4, epsilon = 1e-15);
        // Identical spectra with distinct entries: distance to the nearest
        // other eigenvalue.
        let spec = [3.0, 2.0, 0.5];
        let d = compute_delta_k(&spec, &spec, 1).unwrap();
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-15);
        assert!(compute_delta_k(&spec, &spec, 5).is_err());
    }

    #[test]
    fn delta_k_matches_exhaustive_enumeration() {
        let mut rng = crate::rng::stream_rng(31, 0);
        for _ in 0..200 {
            let la: Vec<f64> = (0..rng.gen_range(2..=8))
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect();
            let lb: Vec<f64> = (0..rng.gen_range(2..=8))
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect();
            let kmax = la.len().min(lb.len());
            for k in 0..kmax {
                let got = compute_delta_k(&la, &lb, k).unwrap();
                let mut expect = f64::INFINITY;
                for i in 0..lb.len() {
                    if i != k {
                        expect = expect.min((la[k] - lb[i]).abs());
                    }
                }
                for i in 0..la.len() {
                    if i != k {
                        expect = expect.min((lb[k] - la[i]).abs());
                    }
                }
                assert_abs_diff_eq!(got, expect, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn self_comparison_has_zero_gaps() {
        let kernel = Kernel::synthetic_pq(0.9, 0.4).unwrap();
        let n = 12;
        let gamma = 0.25;
        let g = sample_dsgm(&kernel, n, gamma, 77).unwrap();
        let induced = induced_kernel(&g, gamma).unwrap();
        let (c, m) = aligned_discretization(n, gamma, 2);
        let spectrum = discretize_kernel_spectrum(&induced, c, m, 3).unwrap();
        let analysis = GapAnalysis::new(&g, gamma).unwrap();
        let params = zero_params(gamma, n);
        for k in 0..3 {
            let r = analysis.report(&spectrum, k, &params).unwrap();
            assert!(r.eigenvalue_gap < 1e-9, "k={k}: {}", r.eigenvalue_gap);
            assert!(r.eigenfunction_gap < 1e-9, "k={k}: {}", r.eigenfunction_gap);
            assert!(r.kernel_tail_mass < 1e-18);
        }
    }

    #[test]
    fn sign_alignment_never_increases_distance() {
        let kernel = Kernel::synthetic_pq(0.8, 0.2).unwrap();
        let g = sample_dsgm(&kernel, 40, 0.05, 5).unwrap();
        let spectrum = discretize_kernel_spectrum(&kernel, 2.0, 200, 3).unwrap();
        let analysis = GapAnalysis::new(&g, 0.05).unwrap();
        let params = zero_params(0.05, 40);
        for k in 0..3 {
            let aligned = analysis.report(&spectrum, k, &params).unwrap();
            let unaligned = analysis.unaligned_distance(&spectrum, k);
            assert!(aligned.eigenfunction_gap <= unaligned + 1e-12);
        }
    }
}

