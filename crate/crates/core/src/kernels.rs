//! Probability kernels, their closed-form and discretized spectra, tail mass
//! and Lipschitz-constant estimates.
//!
//! A kernel is a symmetric map `W: ℝ² → [0, 1]`. Three families are
//! supported: the degree-corrected stochastic block kernel
//! `W(u,v) = θ(u)θ(v)·(p if uv ≥ 0 else q)`, its concrete instance with
//! `θ(u) = (|u|+1)^{-2}`, and piecewise-constant kernels on a breakpoint
//! grid (in particular the kernel induced by a sampled graph).

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use thiserror::Error;

use crate::graphs::{latent_grid, Graph};
use crate::spectra::{eig_sym, lanczos_topk, SpectraError};

/// Degree function handle for the block kernel.
pub type ThetaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("degree function leaves [0, 1]: theta({u}) = {value}")]
    ThetaOutOfRange { u: f64, value: f64 },
    #[error("degree function is not square-integrable on the truncated domain: {detail}")]
    NonIntegrableTheta { detail: String },
    #[error("breakpoints must be strictly increasing with at least two entries")]
    BadBreakpoints,
    #[error("values matrix must be square with one row per interval: got {rows}x{cols} for {intervals} intervals")]
    ValuesShape {
        rows: usize,
        cols: usize,
        intervals: usize,
    },
    #[error("values matrix is not symmetric")]
    ValuesAsymmetric,
    #[error("kernel value {0} outside [0, 1]")]
    ValueOutOfRange(f64),
    #[error("truncation radius must be positive, got {0}")]
    NonPositiveTruncation(f64),
    #[error("grid size {m} below the minimum {min}")]
    GridTooSmall { m: usize, min: usize },
    #[error("grid of {m} points cannot resolve {requested} eigenpairs")]
    TooManyPairs { requested: usize, m: usize },
    #[error("graph carries no latent coordinates and no sparsity parameter")]
    MissingLatent,
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

/// Symmetric probability kernel.
#[derive(Clone)]
pub enum Kernel {
    DegreeCorrectedSbk { p: f64, q: f64, theta: ThetaFn },
    SyntheticPq { p: f64, q: f64 },
    PiecewiseConstant { values: Array2<f64>, breakpoints: Vec<f64> },
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::DegreeCorrectedSbk { p, q, .. } => f
                .debug_struct("DegreeCorrectedSbk")
                .field("p", p)
                .field("q", q)
                .finish_non_exhaustive(),
            Kernel::SyntheticPq { p, q } => f
                .debug_struct("SyntheticPq")
                .field("p", p)
                .field("q", q)
                .finish(),
            Kernel::PiecewiseConstant { values, breakpoints } => f
                .debug_struct("PiecewiseConstant")
                .field("intervals", &(breakpoints.len() - 1))
                .field("values", &values.dim())
                .finish(),
        }
    }
}

fn check_probability(p: f64) -> Result<f64, KernelError> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(KernelError::InvalidProbability(p));
    }
    Ok(p)
}

/// Midpoint quadrature of `f` over `[a, b]` with `m` points.
fn midpoint_quadrature(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    (0..m).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Checks that `theta` maps into [0, 1] and that `∫θ²` converges on the
/// truncated domain (the value at radius 2R must agree with the value at R).
fn check_theta(theta: &ThetaFn, radius: f64) -> Result<(), KernelError> {
    let m = 4000;
    for i in 0..m {
        let u = -2.0 * radius + 4.0 * radius * (i as f64 + 0.5) / m as f64;
        let value = theta(u);
        if !(0.0..=1.0).contains(&value) || !value.is_finite() {
            return Err(KernelError::ThetaOutOfRange { u, value });
        }
    }
    let sq = |u: f64| {
        let t = theta(u);
        t * t
    };
    let at_r = midpoint_quadrature(&sq, -radius, radius, 20_000);
    let at_2r = midpoint_quadrature(&sq, -2.0 * radius, 2.0 * radius, 40_000);
    if (at_2r - at_r).abs() > 1e-2 * at_2r.max(1e-12) {
        return Err(KernelError::NonIntegrableTheta {
            detail: format!("∫θ² = {at_r:.6} at radius {radius}, {at_2r:.6} at radius {}", 2.0 * radius),
        });
    }
    Ok(())
}

fn locate_interval(breakpoints: &[f64], u: f64) -> Option<usize> {
    let last = breakpoints.len() - 1;
    if u < breakpoints[0] || u > breakpoints[last] {
        return None;
    }
    if u == breakpoints[last] {
        return Some(last - 1);
    }
    Some(breakpoints.partition_point(|&b| b <= u) - 1)
}

impl Kernel {
    /// Degree-corrected stochastic block kernel. The degree function is
    /// validated numerically on a truncated domain.
    pub fn degree_corrected_sbk(p: f64, q: f64, theta: ThetaFn) -> Result<Self, KernelError> {
        check_probability(p)?;
        check_probability(q)?;
        check_theta(&theta, 100.0)?;
        Ok(Kernel::DegreeCorrectedSbk { p, q, theta })
    }

    /// Block kernel with the power-law degree function `θ(u) = (|u|+1)^{-2}`.
    pub fn synthetic_pq(p: f64, q: f64) -> Result<Self, KernelError> {
        check_probability(p)?;
        check_probability(q)?;
        Ok(Kernel::SyntheticPq { p, q })
    }

    /// Piecewise-constant kernel: value `values[i, j]` on the cell
    /// `[b_i, b_{i+1}) × [b_j, b_{j+1})`, the last interval closed, zero
    /// outside the breakpoint range.
    pub fn piecewise_constant(
        values: Array2<f64>,
        breakpoints: Vec<f64>,
    ) -> Result<Self, KernelError> {
        if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(KernelError::BadBreakpoints);
        }
        let intervals = breakpoints.len() - 1;
        let (rows, cols) = values.dim();
        if rows != intervals || cols != intervals {
            return Err(KernelError::ValuesShape {
                rows,
                cols,
                intervals,
            });
        }
        for i in 0..rows {
            for j in 0..rows {
                let v = values[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(KernelError::ValueOutOfRange(v));
                }
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-12 {
                    return Err(KernelError::ValuesAsymmetric);
                }
            }
        }
        Ok(Kernel::PiecewiseConstant {
            values,
            breakpoints,
        })
    }

    /// Evaluates `W(u, v)`; symmetric in its arguments and total on reals.
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        match self {
            Kernel::DegreeCorrectedSbk { p, q, theta } => {
                let block = if u * v >= 0.0 { *p } else { *q };
                theta(u) * theta(v) * block
            }
            Kernel::SyntheticPq { p, q } => {
                let block = if u * v >= 0.0 { *p } else { *q };
                let tu = (u.abs() + 1.0).powi(-2);
                let tv = (v.abs() + 1.0).powi(-2);
                tu * tv * block
            }
            Kernel::PiecewiseConstant {
                values,
                breakpoints,
            } => match (locate_interval(breakpoints, u), locate_interval(breakpoints, v)) {
                (Some(i), Some(j)) => values[(i, j)],
                _ => 0.0,
            },
        }
    }
}

/// Quadrature controls for the kernel integrals.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOpts {
    /// Truncation radius: integrals over ℝ are cut to `[-radius, radius]`.
    pub radius: f64,
    /// Points per axis.
    pub points: usize,
}

impl Default for QuadratureOpts {
    fn default() -> Self {
        QuadratureOpts {
            radius: 100.0,
            points: 2048,
        }
    }
}

/// Closed-form top-two eigenpairs of the degree-corrected block kernel.
///
/// The operator preserves the span of `θ·1{u≥0}` and `θ·1{u<0}`; in that
/// orthonormalized basis it is the symmetric 2×2 matrix
/// `[[p·I₊, q√(I₊I₋)], [q√(I₊I₋), p·I₋]]` with `I± = ∫ θ² du` over each half
/// line, whose eigenpairs are computed exactly. For an even degree function
/// this gives `λ₁ = (p+q)·I`, `λ₂ = (p−q)·I` with eigenfunctions
/// proportional to `θ(u)` and `sign(u)·θ(u)`, each L²-normalized.
pub struct SbkClosedForm {
    pub lambda1: f64,
    pub lambda2: f64,
    theta: ThetaFn,
    /// Coefficients on the orthonormal half-line basis (e₊, e₋).
    coeffs: [(f64, f64); 2],
    inv_sqrt_mass: (f64, f64),
}

impl SbkClosedForm {
    pub fn phi1(&self, u: f64) -> f64 {
        self.phi(0, u)
    }

    pub fn phi2(&self, u: f64) -> f64 {
        self.phi(1, u)
    }

    fn phi(&self, which: usize, u: f64) -> f64 {
        let (alpha, beta) = self.coeffs[which];
        let t = (self.theta)(u);
        if u >= 0.0 {
            alpha * self.inv_sqrt_mass.0 * t
        } else {
            beta * self.inv_sqrt_mass.1 * t
        }
    }
}

/// Top-two eigenpairs of the degree-corrected block kernel, in closed form
/// up to two 1-D quadratures of `θ²`.
pub fn sbk_closed_form_spectrum(
    p: f64,
    q: f64,
    theta: ThetaFn,
    opts: &QuadratureOpts,
) -> Result<SbkClosedForm, KernelError> {
    check_probability(p)?;
    check_probability(q)?;
    let sq = |u: f64| {
        let t = theta(u);
        t * t
    };
    let radius = opts.radius;
    let m = opts.points.max(20_000);
    let i_pos = midpoint_quadrature(&sq, 0.0, radius, m);
    let i_neg = midpoint_quadrature(&sq, -radius, 0.0, m);
    let i_pos_2r = midpoint_quadrature(&sq, 0.0, 2.0 * radius, 2 * m);
    let i_neg_2r = midpoint_quadrature(&sq, -2.0 * radius, 0.0, 2 * m);
    let total = i_pos + i_neg;
    let total_2r = i_pos_2r + i_neg_2r;
    if (total_2r - total).abs() > 1e-2 * total_2r.max(1e-12) || total <= 0.0 {
        return Err(KernelError::NonIntegrableTheta {
            detail: format!("∫θ² = {total:.6e} at radius {radius}, {total_2r:.6e} at doubled radius"),
        });
    }
    let off = q * (i_pos * i_neg).sqrt();
    let m11 = p * i_pos;
    let m22 = p * i_neg;
    let trace = m11 + m22;
    let det = m11 * m22 - off * off;
    let disc = (trace * trace - 4.0 * det).max(0.0).sqrt();
    let hi = 0.5 * (trace + disc);
    let lo = 0.5 * (trace - disc);
    // Order by |λ|, positive first on ties.
    let (lambda1, lambda2) = if hi.abs() >= lo.abs() { (hi, lo) } else { (lo, hi) };
    let eigvec = |lam: f64| -> (f64, f64) {
        // (alpha, beta) solving (M - λI) v = 0; pick the numerically larger row.
        let (a, b) = if (m11 - lam).abs() > (m22 - lam).abs() {
            (off, lam - m11)
        } else {
            (lam - m22, off)
        };
        let n = (a * a + b * b).sqrt();
        if n < 1e-300 {
            // Degenerate (p = q = 0 or one-sided mass): fall back to e₊.
            (1.0, 0.0)
        } else {
            (a / n, b / n)
        }
    };
    let mut v1 = eigvec(lambda1);
    let mut v2 = eigvec(lambda2);
    // Sign convention: positive coefficient on the u ≥ 0 half line.
    if v1.0 < 0.0 {
        v1 = (-v1.0, -v1.1);
    }
    if v2.0 < 0.0 {
        v2 = (-v2.0, -v2.1);
    }
    Ok(SbkClosedForm {
        lambda1,
        lambda2,
        theta,
        coeffs: [v1, v2],
        inv_sqrt_mass: (1.0 / i_pos.sqrt(), 1.0 / i_neg.sqrt()),
    })
}

/// Grid discretization of a kernel spectrum.
#[derive(Debug, Clone)]
pub struct KernelSpectrum {
    /// Leading eigenvalues in decreasing |λ| order.
    pub eigenvalues: Vec<f64>,
    /// Eigenfunction samples on the grid, one column per eigenvalue,
    /// orthonormal under the quadrature inner product `Σ f g Δu`.
    pub eigenfunctions: Array2<f64>,
    /// Grid midpoints over `[-c, c]`.
    pub grid: Vec<f64>,
    pub spacing: f64,
    /// Truncation radius `c`.
    pub truncation: f64,
}

impl KernelSpectrum {
    /// Linear interpolation of eigenfunction `k` at `u`; zero outside the
    /// truncated domain, constant extension in the boundary half-cells.
    pub fn eigenfunction_at(&self, k: usize, u: f64) -> f64 {
        let m = self.grid.len();
        if u < self.grid[0] - 0.5 * self.spacing || u > self.grid[m - 1] + 0.5 * self.spacing {
            return 0.0;
        }
        if u <= self.grid[0] {
            return self.eigenfunctions[(0, k)];
        }
        if u >= self.grid[m - 1] {
            return self.eigenfunctions[(m - 1, k)];
        }
        let t = (u - self.grid[0]) / self.spacing;
        let i = (t.floor() as usize).min(m - 2);
        let frac = t - i as f64;
        self.eigenfunctions[(i, k)] * (1.0 - frac) + self.eigenfunctions[(i + 1, k)] * frac
    }

    /// Quadrature mass `∫ φ_k²` outside `[lo, hi]`, using the grid cells
    /// whose midpoints fall outside the interval.
    pub fn tail_mass_outside(&self, k: usize, lo: f64, hi: f64) -> f64 {
        self.grid
            .iter()
            .enumerate()
            .filter(|(_, &u)| u < lo || u > hi)
            .map(|(i, _)| self.eigenfunctions[(i, k)].powi(2) * self.spacing)
            .sum()
    }
}

/// Minimum grid size accepted by [`discretize_kernel_spectrum`].
pub const MIN_GRID: usize = 16;

/// Numerical eigenpairs of the kernel operator on `[-c, c]`: the spectrum of
/// the `m×m` Nyström matrix `W(u_i, u_j)·Δu` on the uniform midpoint grid,
/// ordered by |λ|. Eigenvector columns are rescaled by `Δu^{-1/2}` so they
/// sample L²-orthonormal eigenfunctions.
pub fn discretize_kernel_spectrum(
    kernel: &Kernel,
    c: f64,
    m: usize,
    num_pairs: usize,
) -> Result<KernelSpectrum, KernelError> {
    if !(c > 0.0) {
        return Err(KernelError::NonPositiveTruncation(c));
    }
    if m < MIN_GRID {
        return Err(KernelError::GridTooSmall { m, min: MIN_GRID });
    }
    if num_pairs == 0 || num_pairs > m {
        return Err(KernelError::TooManyPairs {
            requested: num_pairs,
            m,
        });
    }
    let spacing = 2.0 * c / m as f64;
    let grid: Vec<f64> = (0..m)
        .map(|i| -c + (i as f64 + 0.5) * spacing)
        .collect();
    let mut matrix = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in i..m {
            let w = kernel.eval(grid[i], grid[j]) * spacing;
            matrix[(i, j)] = w;
            matrix[(j, i)] = w;
        }
    }
    let (eigenvalues, mut vectors) = if m <= 512 {
        let decomp = eig_sym(&matrix)?;
        (
            decomp.eigenvalues[..num_pairs].to_vec(),
            decomp
                .eigenvectors
                .slice(ndarray::s![.., ..num_pairs])
                .to_owned(),
        )
    } else {
        let (vals, vecs) = lanczos_topk(m, num_pairs, 1e-10, |x, y| {
            let xv = ndarray::ArrayView1::from(x);
            let res = matrix.dot(&xv);
            y.copy_from_slice(res.as_slice().unwrap());
        })
        .map_err(SpectraError::from)?;
        (vals, vecs)
    };
    let inv_sqrt = 1.0 / spacing.sqrt();
    vectors.mapv_inplace(|v| v * inv_sqrt);
    // Deterministic sign: largest-|entry| sample positive.
    for c_idx in 0..vectors.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for r in 0..m {
            let a = vectors[(r, c_idx)].abs();
            if a > best_abs {
                best_abs = a;
                best = r;
            }
        }
        if vectors[(best, c_idx)] < 0.0 {
            for r in 0..m {
                vectors[(r, c_idx)] = -vectors[(r, c_idx)];
            }
        }
    }
    Ok(KernelSpectrum {
        eigenvalues,
        eigenfunctions: vectors,
        grid,
        spacing,
        truncation: c,
    })
}

/// Kernel tail mass `∫∫_{|u|≥c, |v|≥c} W(u,v) du dv`, computed by midpoint
/// quadrature truncated at `opts.radius`. Mass beyond the truncation radius
/// is not captured; the radius is part of the reported contract.
pub fn tail_mass(kernel: &Kernel, c: f64, opts: &QuadratureOpts) -> Result<f64, KernelError> {
    if !(c > 0.0) {
        return Err(KernelError::NonPositiveTruncation(c));
    }
    let radius = opts.radius;
    if c >= radius {
        return Ok(0.0);
    }
    let m = opts.points;
    let h = (radius - c) / m as f64;
    let pos: Vec<f64> = (0..m).map(|i| c + (i as f64 + 0.5) * h).collect();
    let neg: Vec<f64> = pos.iter().map(|&u| -u).collect();
    let cell = h * h;
    let quadrant = |us: &[f64], vs: &[f64]| -> f64 {
        let mut total = 0.0;
        for &u in us {
            for &v in vs {
                total += kernel.eval(u, v);
            }
        }
        total * cell
    };
    // (+,+), (−,−) and twice (+,−) by symmetry of W.
    Ok(quadrant(&pos, &pos) + quadrant(&neg, &neg) + 2.0 * quadrant(&pos, &neg))
}

/// Maximum finite-difference gradient magnitude of `f` over the grid on
/// `[-c, c]²` (central differences at interior points). A lower bound on the
/// true Lipschitz constant.
pub fn lipschitz_estimate_fn(
    f: impl Fn(f64, f64) -> f64,
    c: f64,
    m: usize,
) -> Result<f64, KernelError> {
    if !(c > 0.0) {
        return Err(KernelError::NonPositiveTruncation(c));
    }
    if m < 32 {
        return Err(KernelError::GridTooSmall { m, min: 32 });
    }
    let h = 2.0 * c / (m - 1) as f64;
    let grid: Vec<f64> = (0..m).map(|i| -c + i as f64 * h).collect();
    let mut worst = 0.0f64;
    for i in 1..(m - 1) {
        for j in 1..(m - 1) {
            let du = (f(grid[i + 1], grid[j]) - f(grid[i - 1], grid[j])) / (2.0 * h);
            let dv = (f(grid[i], grid[j + 1]) - f(grid[i], grid[j - 1])) / (2.0 * h);
            worst = worst.max((du * du + dv * dv).sqrt());
        }
    }
    Ok(worst)
}

/// [`lipschitz_estimate_fn`] applied to a kernel.
pub fn lipschitz_estimate(kernel: &Kernel, c: f64, m: usize) -> Result<f64, KernelError> {
    lipschitz_estimate_fn(|u, v| kernel.eval(u, v), c, m)
}

/// Piecewise-constant kernel induced by a sampled graph: value `A[i, j]` on
/// `I_i × I_j` for the intervals `I_i = [u_i, u_{i+1})`, `1 ≤ i ≤ N−1` (the
/// last interval closed). Note the construction uses the first `N−1` rows
/// and columns of the adjacency matrix.
pub fn induced_kernel(graph: &Graph, gamma: f64) -> Result<Kernel, KernelError> {
    if !(gamma > 0.0) {
        return Err(KernelError::NonPositiveTruncation(gamma));
    }
    let n = graph.n();
    if n < 2 {
        return Err(KernelError::MissingLatent);
    }
    let breakpoints: Vec<f64> = match graph.latent() {
        Some(grid) => grid.to_vec(),
        None => latent_grid(n, gamma),
    };
    let blocks = n - 1;
    let mut values = Array2::<f64>::zeros((blocks, blocks));
    for i in 0..blocks {
        for &j in graph.neighbors(i) {
            let j = j as usize;
            if j < blocks {
                values[(i, j)] = 1.0;
            }
        }
    }
    Kernel::piecewise_constant(values, breakpoints)
}

/// Exact operator matrix of a piecewise-constant kernel in its orthonormal
/// step basis: `M = diag(√w) · B · diag(√w)` with interval widths `w`. Its
/// eigenvalues are the exact nonzero kernel spectrum.
pub fn piecewise_operator_matrix(kernel: &Kernel) -> Option<Array2<f64>> {
    if let Kernel::PiecewiseConstant {
        values,
        breakpoints,
    } = kernel
    {
        let widths: Vec<f64> = breakpoints.windows(2).map(|w| w[1] - w[0]).collect();
        let b = values.nrows();
        let mut m = Array2::<f64>::zeros((b, b));
        for i in 0..b {
            for j in 0..b {
                m[(i, j)] = values[(i, j)] * (widths[i] * widths[j]).sqrt();
            }
        }
        Some(m)
    } else {
        None
    }
}

/// Discretization parameters aligned with a latent grid: every interval of
/// the grid spans exactly `cells_per_interval` quadrature cells, so
/// piecewise-constant kernels on that grid are represented exactly.
pub fn aligned_discretization(n: usize, gamma: f64, cells_per_interval: usize) -> (f64, usize) {
    let half = n / 2;
    let c = (half as f64 + 0.5) * gamma;
    let m = (2 * half + 1) * cells_per_interval;
    (c, m)
}
