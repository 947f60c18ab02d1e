//! Symmetric eigendecomposition, spectral embeddings, the graph Fourier
//! transform and filter frequency responses.

mod dense;
mod lanczos;

pub use lanczos::{lanczos_topk, LanczosError};

use ndarray::{s, Array1, Array2};
use thiserror::Error;

use crate::gnn::{gnn_forward, ForwardMode, GnnError, GnnModel};
use crate::graphs::Operator;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not symmetric: max |S - S^T| = {deviation}")]
    NotSymmetric { deviation: f64 },
    #[error("eigensolver failed to converge")]
    NoConvergence,
    #[error("embedding dimension {k} out of range 1..={n}")]
    DimensionOutOfRange { k: usize, n: usize },
    #[error("feature embedding dimension {kappa} exceeds min(n={n}, d={d})")]
    FeatureDimension { kappa: usize, n: usize, d: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Lanczos(#[from] LanczosError),
}

/// Full eigendecomposition of a symmetric operator.
///
/// Eigenvalues are ordered by decreasing |λ|; magnitude ties put the positive
/// eigenvalue first and then fall back to the solver's original index, so the
/// ordering is total and deterministic. Each eigenvector's largest-magnitude
/// entry is made positive.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the unit eigenvector paired with `eigenvalues[i]`.
    pub eigenvectors: Array2<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// A leading slice of a spectrum, as produced by the iterative top-K path.
#[derive(Debug, Clone)]
pub struct TopKSpectrum {
    pub eigenvalues: Vec<f64>,
    /// `n × k` matrix of unit eigenvectors.
    pub eigenvectors: Array2<f64>,
}

/// Node embedding: one row per node, one column per embedding dimension.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub values: Array2<f64>,
    /// Human-readable description of the operator and dimensions used.
    pub provenance: String,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

fn fix_signs(vecs: &mut Array2<f64>) {
    let (n, k) = vecs.dim();
    for c in 0..k {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for r in 0..n {
            let a = vecs[(r, c)].abs();
            if a > best_abs {
                best_abs = a;
                best = r;
            }
        }
        if vecs[(best, c)] < 0.0 {
            for r in 0..n {
                vecs[(r, c)] = -vecs[(r, c)];
            }
        }
    }
}

/// Dense symmetric eigendecomposition with the crate's ordering and sign
/// conventions. The input is symmetrized defensively; asymmetry beyond
/// `1e-10 · max|S|` is rejected.
pub fn eig_sym(matrix: &Array2<f64>) -> Result<SpectralDecomposition, SpectraError> {
    let (rows, cols) = matrix.dim();
    if rows != cols {
        return Err(SpectraError::NotSquare { rows, cols });
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(SpectraError::NonFinite);
    }
    let scale = matrix.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    let mut deviation = 0.0f64;
    for i in 0..rows {
        for j in (i + 1)..rows {
            deviation = deviation.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    if deviation > 1e-10 * scale {
        return Err(SpectraError::NotSymmetric { deviation });
    }
    let mut sym = matrix.clone();
    for i in 0..rows {
        for j in (i + 1)..rows {
            let v = 0.5 * (sym[(i, j)] + sym[(j, i)]);
            sym[(i, j)] = v;
            sym[(j, i)] = v;
        }
    }
    let (vals, vecs) = dense::symmetric_eig_raw(&sym).ok_or(SpectraError::NoConvergence)?;
    let order = lanczos::abs_order(&vals);
    let mut eigenvalues = Vec::with_capacity(rows);
    let mut eigenvectors = Array2::<f64>::zeros((rows, rows));
    for (c, &i) in order.iter().enumerate() {
        eigenvalues.push(vals[i]);
        for r in 0..rows {
            eigenvectors[(r, c)] = vecs[(r, i)];
        }
    }
    fix_signs(&mut eigenvectors);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Top-`k` eigenpairs of a symmetric operator given as a matvec closure,
/// with the same ordering and sign conventions as [`eig_sym`].
pub fn eig_topk<F>(n: usize, k: usize, apply: F) -> Result<TopKSpectrum, SpectraError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let (eigenvalues, mut eigenvectors) = lanczos_topk(n, k, 1e-9, apply)?;
    fix_signs(&mut eigenvectors);
    Ok(TopKSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// First `k` eigenvector columns, in decreasing-|λ| order.
pub fn spectral_embedding(
    decomp: &SpectralDecomposition,
    k: usize,
) -> Result<Embedding, SpectraError> {
    let n = decomp.dim();
    if k == 0 || k > n {
        return Err(SpectraError::DimensionOutOfRange { k, n });
    }
    Ok(Embedding {
        values: decomp.eigenvectors.slice(s![.., ..k]).to_owned(),
        provenance: format!("spectral:K={k}"),
    })
}

/// Top-`kappa` eigenvectors of the feature Gram matrix `X Xᵀ` (uncentered;
/// set `center` to subtract column means first).
pub fn feature_covariance_eigenvectors(
    features: &Array2<f64>,
    kappa: usize,
    center: bool,
) -> Result<TopKSpectrum, SpectraError> {
    let (n, d) = features.dim();
    if kappa == 0 || kappa > n.min(d) {
        return Err(SpectraError::FeatureDimension { kappa, n, d });
    }
    let x = if center {
        let means = features.mean_axis(ndarray::Axis(0)).unwrap();
        features - &means.insert_axis(ndarray::Axis(0))
    } else {
        features.clone()
    };
    if n <= 64 {
        let gram = x.dot(&x.t());
        let decomp = eig_sym(&gram)?;
        return Ok(TopKSpectrum {
            eigenvalues: decomp.eigenvalues[..kappa].to_vec(),
            eigenvectors: decomp.eigenvectors.slice(s![.., ..kappa]).to_owned(),
        });
    }
    let xt = x.t().to_owned();
    eig_topk(n, kappa, move |v, out| {
        let vv = ndarray::ArrayView1::from(v);
        let proj = xt.dot(&vv);
        let res = x.dot(&proj);
        out.copy_from_slice(res.as_slice().unwrap());
    })
}

/// Concatenation of the first `k` operator eigenvectors with the first
/// `kappa` eigenvectors of the feature Gram matrix `X Xᵀ`.
pub fn feature_aware_embedding(
    decomp: &SpectralDecomposition,
    features: &Array2<f64>,
    k: usize,
    kappa: usize,
) -> Result<Embedding, SpectraError> {
    let base = spectral_embedding(decomp, k)?;
    if kappa == 0 {
        return Ok(base);
    }
    let n = decomp.dim();
    if features.nrows() != n {
        return Err(SpectraError::DimensionMismatch {
            expected: n,
            got: features.nrows(),
        });
    }
    let cov = feature_covariance_eigenvectors(features, kappa, false)?;
    let mut values = Array2::<f64>::zeros((n, k + kappa));
    values.slice_mut(s![.., ..k]).assign(&base.values);
    values.slice_mut(s![.., k..]).assign(&cov.eigenvectors);
    Ok(Embedding {
        values,
        provenance: format!("spectral:K={k}+cov:kappa={kappa}"),
    })
}

/// Graph Fourier transform: coefficients `Vᵀ s` of a signal in the
/// orthonormal basis `V`.
pub fn gft(basis: &Array2<f64>, signal: &Array1<f64>) -> Result<Array1<f64>, SpectraError> {
    if basis.nrows() != signal.len() {
        return Err(SpectraError::DimensionMismatch {
            expected: basis.nrows(),
            got: signal.len(),
        });
    }
    Ok(basis.t().dot(signal))
}

/// Inverse transform `V c`.
pub fn inverse_gft(basis: &Array2<f64>, coeffs: &Array1<f64>) -> Result<Array1<f64>, SpectraError> {
    if basis.ncols() != coeffs.len() {
        return Err(SpectraError::DimensionMismatch {
            expected: basis.ncols(),
            got: coeffs.len(),
        });
    }
    Ok(basis.dot(coeffs))
}

/// Polynomial filter response `ĥ(λ) = Σ_k h_k λ^k` evaluated per eigenvalue.
pub fn filter_frequency_response(taps: &[f64], eigenvalues: &[f64]) -> Vec<f64> {
    eigenvalues
        .iter()
        .map(|&lam| taps.iter().rev().fold(0.0, |acc, &h| acc * lam + h))
        .collect()
}

/// Graph Fourier coefficients of a trained model's output logits: column `c`
/// holds `Vᵀ logits[·, c]`, the empirical frequency content per class channel.
pub fn model_frequency_response(
    model: &GnnModel,
    decomp: &SpectralDecomposition,
    operator: &Operator,
    features: &Array2<f64>,
) -> Result<Array2<f64>, GnnError> {
    if decomp.dim() != operator.dim() {
        return Err(SpectraError::DimensionMismatch {
            expected: operator.dim(),
            got: decomp.dim(),
        }
        .into());
    }
    let out = gnn_forward(model, operator, features, ForwardMode::Eval)?;
    Ok(decomp.eigenvectors.t().dot(&out.logits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::Graph;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn path_graph_eigenpairs() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let d = eig_sym(&a).unwrap();
        assert_abs_diff_eq!(d.eigenvalues[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.eigenvalues[1], -1.0, epsilon = 1e-12);
        let inv_sqrt2 = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(d.eigenvectors[(0, 0)], inv_sqrt2, epsilon = 1e-12);
        assert_abs_diff_eq!(d.eigenvectors[(1, 0)], inv_sqrt2, epsilon = 1e-12);
        assert_abs_diff_eq!(d.eigenvectors[(0, 1)].abs(), inv_sqrt2, epsilon = 1e-12);
        assert_abs_diff_eq!(
            d.eigenvectors[(0, 1)] * d.eigenvectors[(1, 1)],
            -0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn triangle_spectrum() {
        let a = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        let d = eig_sym(&a).unwrap();
        assert_abs_diff_eq!(d.eigenvalues[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.eigenvalues[1], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.eigenvalues[2], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn balanced_two_block_expected_adjacency() {
        // Rank-2 block structure: nonzero eigenvalues N(p+q)/2 and N(p-q)/2.
        let n = 10;
        let (p, q) = (0.5, 0.1);
        let mut m = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = if (i < n / 2) == (j < n / 2) { p } else { q };
            }
        }
        let d = eig_sym(&m).unwrap();
        assert_abs_diff_eq!(d.eigenvalues[0], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(d.eigenvalues[1], 2.0, epsilon = 1e-10);
        for k in 2..n {
            assert!(d.eigenvalues[k].abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_asymmetric_and_non_finite() {
        let a = array![[0.0, 1.0], [0.5, 0.0]];
        assert!(matches!(
            eig_sym(&a),
            Err(SpectraError::NotSymmetric { .. })
        ));
        let b = array![[f64::NAN, 0.0], [0.0, 0.0]];
        assert!(matches!(eig_sym(&b), Err(SpectraError::NonFinite)));
    }

    #[test]
    fn embedding_slices_and_errors() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let d = eig_sym(&a).unwrap();
        let full = spectral_embedding(&d, 2).unwrap();
        assert_eq!(full.values, d.eigenvectors);
        assert!(spectral_embedding(&d, 3).is_err());
        assert!(spectral_embedding(&d, 0).is_err());
    }

    #[test]
    fn embedding_scale_invariance() {
        let mut rng = crate::rng::stream_rng(3, 0);
        let g = Graph::sample_gnp(20, 0.4, 99);
        let a = g.adjacency_dense();
        let d1 = eig_sym(&a).unwrap();
        let alpha: f64 = rng.gen_range(0.1..5.0);
        let d2 = eig_sym(&(&a * alpha)).unwrap();
        let e1 = spectral_embedding(&d1, 4).unwrap();
        let e2 = spectral_embedding(&d2, 4).unwrap();
        for c in 0..4 {
            let dot: f64 = (0..20).map(|i| e1.values[(i, c)] * e2.values[(i, c)]).sum();
            assert!(dot.abs() > 1.0 - 1e-8, "column {c} dot {dot}");
        }
    }

    #[test]
    fn feature_aware_embedding_shapes_and_rank_one() {
        let a = array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        let d = eig_sym(&a).unwrap();
        // Single nonzero column: first covariance eigenvector ∝ x/‖x‖.
        let x = array![[2.0, 0.0], [1.0, 0.0], [-2.0, 0.0]];
        let emb = feature_aware_embedding(&d, &x, 2, 1).unwrap();
        assert_eq!(emb.values.dim(), (3, 3));
        let norm = 3.0;
        for i in 0..3 {
            assert_abs_diff_eq!(emb.values[(i, 2)], x[(i, 0)] / norm, epsilon = 1e-9);
        }
        assert!(feature_aware_embedding(&d, &x, 2, 3).is_err());
    }

    #[test]
    fn gft_isometry_and_one_hot() {
        let a = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        let d = eig_sym(&a).unwrap();
        let v1 = d.eigenvectors.column(1).to_owned();
        let c = gft(&d.eigenvectors, &v1).unwrap();
        assert_abs_diff_eq!(c[1], 1.0, epsilon = 1e-10);
        assert!(c[0].abs() < 1e-10 && c[2].abs() < 1e-10);
        let mut rng = crate::rng::stream_rng(5, 0);
        let s = Array1::from_shape_fn(3, |_| rng.gen_range(-1.0..1.0));
        let c = gft(&d.eigenvectors, &s).unwrap();
        let back = inverse_gft(&d.eigenvectors, &c).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(back[i], s[i], epsilon = 1e-10);
        }
        let ns: f64 = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nc: f64 = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert_abs_diff_eq!(ns, nc, epsilon = 1e-10);
    }

    #[test]
    fn constant_signal_on_regular_graph_concentrates_on_top_eigenvector() {
        // Cycle C6 is 2-regular and connected; its top eigenvector is constant.
        let edges: Vec<(usize, usize)> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
        let g = Graph::from_edges(6, &edges).unwrap();
        let d = eig_sym(&g.adjacency_dense()).unwrap();
        let s = Array1::from_elem(6, 1.0);
        let c = gft(&d.eigenvectors, &s).unwrap();
        let total: f64 = c.iter().map(|x| x * x).sum();
        assert!(c[0] * c[0] / total > 1.0 - 1e-10);
    }

    #[test]
    fn filter_response_basics() {
        let lambdas = [2.0, -1.0, 0.5];
        assert_eq!(
            filter_frequency_response(&[3.0], &lambdas),
            vec![3.0, 3.0, 3.0]
        );
        assert_eq!(
            filter_frequency_response(&[0.0, 1.0], &lambdas),
            vec![2.0, -1.0, 0.5]
        );
    }

    #[test]
    fn filter_response_pointwise_property() {
        // gft(filter output) == response ⊙ gft(input) for random instances.
        let mut rng = crate::rng::stream_rng(17, 0);
        for trial in 0..20 {
            let n = 6;
            let g = Graph::sample_gnp(n, 0.5, 100 + trial);
            let a = g.adjacency_dense();
            let d = eig_sym(&a).unwrap();
            let taps: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
            let mut y = Array1::<f64>::zeros(n);
            let mut power = x.clone();
            for (k, &h) in taps.iter().enumerate() {
                if k > 0 {
                    power = a.dot(&power);
                }
                y = &y + &(&power * h);
            }
            let lhs = gft(&d.eigenvectors, &y).unwrap();
            let resp = filter_frequency_response(&taps, &d.eigenvalues);
            let xc = gft(&d.eigenvectors, &x).unwrap();
            for i in 0..n {
                assert_abs_diff_eq!(lhs[i], resp[i] * xc[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn reconstruction_invariant_on_random_matrices() {
        let mut rng = crate::rng::stream_rng(23, 0);
        for _ in 0..100 {
            let n = rng.gen_range(2..=64);
            let mut m = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..=i {
                    let v = rng.gen_range(-2.0..2.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let d = eig_sym(&m).unwrap();
            let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
            let lam = Array2::from_diag(&Array1::from(d.eigenvalues.clone()));
            let rec = d.eigenvectors.dot(&lam).dot(&d.eigenvectors.t());
            let err = (&rec - &m).iter().fold(0.0f64, |a, x| a.max(x.abs()));
            assert!(err <= 1e-7 * scale, "n={n} err={err}");
            let gram = d.eigenvectors.t().dot(&d.eigenvectors);
            let mut gerr = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let e = if i == j { 1.0 } else { 0.0 };
                    gerr = gerr.max((gram[(i, j)] - e).abs());
                }
            }
            assert!(gerr <= 1e-8, "n={n} gram err={gerr}");
        }
    }
}
