//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! the implicit-shift QL iteration, with accumulated transformations.
//!
//! This is the classic tred2/tql2 pair. It is deterministic, needs no
//! external linear-algebra backend, and is accurate to a few ulps times the
//! matrix norm, which comfortably meets the reconstruction and orthonormality
//! tolerances required downstream.

use ndarray::Array2;

/// Householder reduction of a symmetric matrix to tridiagonal form.
///
/// On return `z` holds the accumulated orthogonal transformation, `d` the
/// diagonal and `e` the subdiagonal (in `e[1..]`).
fn tridiagonalize(z: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += z[(i, k)].abs();
            }
            if scale == 0.0 {
                e[i] = z[(i, l)];
            } else {
                for k in 0..=l {
                    z[(i, k)] /= scale;
                    h += z[(i, k)] * z[(i, k)];
                }
                let f = z[(i, l)];
                let mut g = h.sqrt();
                if f > 0.0 {
                    g = -g;
                }
                e[i] = scale * g;
                h -= f * g;
                z[(i, l)] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    z[(j, i)] = z[(i, j)] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z[(j, k)] * z[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g += z[(k, j)] * z[(i, k)];
                    }
                    e[j] = g / h;
                    f_acc += e[j] * z[(i, j)];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = z[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        z[(j, k)] -= f * e[k] + g * z[(i, k)];
                    }
                }
            }
        } else {
            e[i] = z[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    // Accumulate the transformations.
    for i in 0..n {
        let l = i;
        if d[i] != 0.0 {
            for j in 0..l {
                let mut g = 0.0;
                for k in 0..l {
                    g += z[(i, k)] * z[(k, j)];
                }
                for k in 0..l {
                    z[(k, j)] -= g * z[(k, i)];
                }
            }
        }
        d[i] = z[(i, i)];
        z[(i, i)] = 1.0;
        for j in 0..l {
            z[(j, i)] = 0.0;
            z[(i, j)] = 0.0;
        }
    }
}

fn hypot(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix, updating
/// the eigenvector accumulator `z`. `d` holds the diagonal, `e[1..]` the
/// subdiagonal on entry; on exit `d` holds the eigenvalues and the columns of
/// `z` the eigenvectors.
///
/// Returns `false` if an eigenvalue fails to converge in 60 iterations,
/// which in practice only happens on non-finite input.
pub(crate) fn tql2(d: &mut [f64], e: &mut [f64], z: &mut Array2<f64>) -> bool {
    let n = d.len();
    if n == 1 {
        return true;
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    // Deflation threshold scaled to the tridiagonal norm; a per-entry
    // relative test breaks down on exactly-zero eigenvalues.
    let mut tst1 = 0.0f64;
    for i in 0..n {
        tst1 = tst1.max(d[i].abs() + e[i].abs());
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                if e[m].abs() <= f64::EPSILON * tst1 {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return false;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = hypot(g, 1.0);
            let sign_r = if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * f;
                    z[(k, i)] = c * z[(k, i)] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    true
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Returns raw eigenvalues and an orthogonal matrix whose columns are the
/// matching eigenvectors, in the (roughly ascending) order produced by the QL
/// iteration; callers impose their own ordering and sign conventions.
pub(crate) fn symmetric_eig_raw(matrix: &Array2<f64>) -> Option<(Vec<f64>, Array2<f64>)> {
    let n = matrix.nrows();
    let mut z = matrix.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    if n == 0 {
        return Some((d, z));
    }
    if n == 1 {
        d[0] = z[(0, 0)];
        z[(0, 0)] = 1.0;
        return Some((d, z));
    }
    tridiagonalize(&mut z, &mut d, &mut e);
    if !tql2(&mut d, &mut e, &mut z) {
        return None;
    }
    Some((d, z))
}
