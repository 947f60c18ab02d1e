//! Exact filter interpolation: given a symmetric operator with simple
//! spectrum and an input signal with no vanishing spectral coefficient,
//! there are at most N taps mapping the input onto any target signal. The
//! taps solve the Krylov system `[x, Ax, …, A^{N-1}x] h = y`, which is
//! solved directly by elimination with partial pivoting; the row-scaled
//! Vandermonde structure of the system guarantees invertibility exactly
//! when the preconditions hold, so violations are reported as diagnostics
//! rather than generic solver failures.

use ndarray::{Array1, Array2};

use super::GnnError;
use crate::spectra::{eig_sym, SpectralDecomposition};

/// Default tolerance below which a spectral coefficient or an eigenvalue
/// gap is treated as vanishing.
pub const PRECONDITION_TOL: f64 = 1e-8;

/// Outcome of the interpolation precondition check.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientCheck {
    pub ok: bool,
    /// `min_i |Vᵀx|_i`.
    pub min_abs_coefficient: f64,
    /// Smallest gap between two eigenvalues.
    pub min_eigenvalue_gap: f64,
}

/// Reports whether the interpolation preconditions hold at tolerance `tol`:
/// every spectral coefficient of `x` nonzero and all eigenvalues simple.
pub fn spectral_coefficient_check(
    decomp: &SpectralDecomposition,
    signal: &Array1<f64>,
    tol: f64,
) -> CoefficientCheck {
    let coeffs = decomp.eigenvectors.t().dot(signal);
    let min_abs_coefficient = coeffs.iter().fold(f64::INFINITY, |a, c| a.min(c.abs()));
    let mut sorted = decomp.eigenvalues.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min_eigenvalue_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    CoefficientCheck {
        ok: min_abs_coefficient > tol && min_eigenvalue_gap > tol,
        min_abs_coefficient,
        min_eigenvalue_gap,
    }
}

/// Applies the scalar filter `Σ h_k A^k x` by iterated products.
pub fn apply_scalar_filter(a: &Array2<f64>, x: &Array1<f64>, taps: &[f64]) -> Array1<f64> {
    let mut out = Array1::<f64>::zeros(x.len());
    let mut power = x.clone();
    for (k, &h) in taps.iter().enumerate() {
        if k > 0 {
            power = a.dot(&power);
        }
        out.scaled_add(h, &power);
    }
    out
}

/// Dense LU solve with partial pivoting.
fn solve_dense(mut a: Array2<f64>, mut b: Array1<f64>) -> Result<Array1<f64>, GnnError> {
    let n = a.nrows();
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[(col, col)].abs();
        for row in (col + 1)..n {
            let v = a[(row, col)].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best < 1e-300 {
            return Err(GnnError::SingularSystem { pivot: col });
        }
        if pivot != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(pivot, j)];
                a[(pivot, j)] = tmp;
            }
            b.swap(col, pivot);
        }
        let d = a[(col, col)];
        for row in (col + 1)..n {
            let factor = a[(row, col)] / d;
            if factor != 0.0 {
                for j in col..n {
                    a[(row, j)] -= factor * a[(col, j)];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = Array1::<f64>::zeros(n);
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in (row + 1)..n {
            acc -= a[(row, j)] * x[j];
        }
        x[row] = acc / a[(row, row)];
    }
    Ok(x)
}

/// [`interpolate_filter`] with an explicit precondition tolerance.
pub fn interpolate_filter_with_tol(
    a: &Array2<f64>,
    x: &Array1<f64>,
    y: &Array1<f64>,
    tol: f64,
) -> Result<Vec<f64>, GnnError> {
    let n = a.nrows();
    if x.len() != n || y.len() != n {
        return Err(GnnError::ShapeMismatch {
            context: "interpolate_filter",
            expected: format!("signals of length {n}"),
            got: format!("x: {}, y: {}", x.len(), y.len()),
        });
    }
    let decomp = eig_sym(a)?;
    let check = spectral_coefficient_check(&decomp, x, tol);
    if check.min_eigenvalue_gap <= tol {
        return Err(GnnError::RepeatedEigenvalue {
            gap: check.min_eigenvalue_gap,
            tol,
        });
    }
    if check.min_abs_coefficient <= tol {
        return Err(GnnError::VanishingCoefficient {
            min: check.min_abs_coefficient,
            tol,
        });
    }
    // Krylov matrix [x, Ax, ..., A^{N-1}x].
    let mut krylov = Array2::<f64>::zeros((n, n));
    let mut power = x.clone();
    for k in 0..n {
        if k > 0 {
            power = a.dot(&power);
        }
        for i in 0..n {
            krylov[(i, k)] = power[i];
        }
    }
    let taps = solve_dense(krylov, y.clone())?;
    let reproduced = apply_scalar_filter(a, x, taps.as_slice().unwrap());
    let residual = reproduced
        .iter()
        .zip(y.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let y_scale = y.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let res_tol = 1e-6 * y_scale;
    if residual > res_tol {
        return Err(GnnError::ResidualTooLarge {
            residual,
            tol: res_tol,
        });
    }
    Ok(taps.to_vec())
}

/// Filter taps `h` of length N with `Σ h_k A^k x = y`, provided the
/// operator has simple spectrum and `x` has no vanishing spectral
/// coefficient (both checked; violations produce the matching diagnostic).
pub fn interpolate_filter(
    a: &Array2<f64>,
    x: &Array1<f64>,
    y: &Array1<f64>,
) -> Result<Vec<f64>, GnnError> {
    interpolate_filter_with_tol(a, x, y, PRECONDITION_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::Graph;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn swap_example() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let x = array![1.0, 0.0];
        let y = array![0.0, 1.0];
        let h = interpolate_filter(&a, &x, &y).unwrap();
        assert_abs_diff_eq!(h[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_target_gives_identity_filter() {
        let a = array![[0.0, 2.0], [2.0, 1.0]];
        let x = array![1.0, 0.5];
        let h = interpolate_filter(&a, &x, &x).unwrap();
        assert_abs_diff_eq!(h[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(h[1], 0.0, epsilon = 1e-10);
    }

    fn random_simple_symmetric(n: usize, rng: &mut impl Rng) -> Array2<f64> {
        // A weighted random graph with continuous weights has simple
        // spectrum almost surely.
        let mut m = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v = rng.gen_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    #[test]
    fn random_instances_reproduce_targets() {
        let mut rng = crate::rng::stream_rng(91, 0);
        for trial in 0..50 {
            let n = rng.gen_range(3..=12);
            let a = random_simple_symmetric(n, &mut rng);
            let x = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
            let y = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
            let h = interpolate_filter(&a, &x, &y).unwrap();
            assert!(h.len() <= n);
            let reproduced = apply_scalar_filter(&a, &x, &h);
            let residual = reproduced
                .iter()
                .zip(y.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(residual <= 1e-8, "trial {trial}: residual {residual}");
        }
    }

    #[test]
    fn repeated_eigenvalue_is_diagnosed() {
        // K3 has eigenvalue -1 twice.
        let g = Graph::from_edges(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        let a = g.adjacency_dense();
        let x = array![1.0, 0.2, -0.4];
        let y = array![0.0, 1.0, 0.0];
        match interpolate_filter(&a, &x, &y) {
            Err(GnnError::RepeatedEigenvalue { gap, .. }) => assert!(gap < 1e-10),
            other => panic!("expected repeated-eigenvalue diagnostic, got {other:?}"),
        }
        let d = eig_sym(&a).unwrap();
        let check = spectral_coefficient_check(&d, &x, PRECONDITION_TOL);
        assert!(!check.ok);
        assert!(check.min_eigenvalue_gap < 1e-10);
    }

    #[test]
    fn eigenvector_input_is_diagnosed() {
        let a = array![[0.0, 2.0], [2.0, 1.0]];
        let d = eig_sym(&a).unwrap();
        let v1 = d.eigenvectors.column(0).to_owned();
        let y = array![1.0, 1.0];
        match interpolate_filter(&a, &v1, &y) {
            Err(GnnError::VanishingCoefficient { min, .. }) => assert!(min < 1e-10),
            other => panic!("expected vanishing-coefficient diagnostic, got {other:?}"),
        }
        let check = spectral_coefficient_check(&d, &v1, PRECONDITION_TOL);
        assert!(!check.ok);
    }

    #[test]
    fn random_gaussian_inputs_pass_the_check() {
        // Zero sets have measure zero: a Gaussian signal passes the check
        // with overwhelming probability.
        use rand_distr::StandardNormal;
        let mut rng = crate::rng::stream_rng(92, 0);
        let mut m = random_simple_symmetric(10, &mut rng);
        // Nudge away from accidental near-degeneracy.
        for i in 0..10 {
            m[(i, i)] += i as f64 * 0.1;
        }
        let d = eig_sym(&m).unwrap();
        let mut failures = 0;
        for _ in 0..1000 {
            let x = Array1::from_shape_fn(10, |_| rng.sample::<f64, _>(StandardNormal));
            if !spectral_coefficient_check(&d, &x, 1e-12).ok {
                failures += 1;
            }
        }
        assert_eq!(failures, 0);
    }

    #[test]
    fn nonzero_tap_filters_preserve_nonvanishing_coefficients() {
        // With all-positive taps on a shifted positive-semidefinite
        // operator, filtering never zeroes a spectral coefficient; the
        // identity filter h = (1, 0, ..) is the trivial witness.
        let mut rng = crate::rng::stream_rng(93, 0);
        for trial in 0..20 {
            let n = rng.gen_range(3..=10);
            let base = random_simple_symmetric(n, &mut rng);
            let d0 = eig_sym(&base).unwrap();
            let shift = d0.eigenvalues[0].abs() + 0.5;
            let a = &base + &(Array2::<f64>::eye(n) * shift);
            let d = eig_sym(&a).unwrap();
            let x = Array1::from_shape_fn(n, |_| rng.gen_range(0.5..1.5));
            let input_check = spectral_coefficient_check(&d, &x, 1e-10);
            if !input_check.ok {
                continue;
            }
            let taps: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
            let y = apply_scalar_filter(&a, &x, &taps);
            let out_check = spectral_coefficient_check(&d, &y, 1e-12);
            assert!(out_check.ok, "trial {trial}");
        }
    }
}
