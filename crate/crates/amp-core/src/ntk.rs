//! Neural tangent kernel analysis: the analytic two-layer ReLU dot-product
//! kernel, its Monte-Carlo estimate from random initializations, kernel
//! regression in the infinite-width limit, the anchored kernel with its
//! correction term, and gram-matrix spectra.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{AmpError, Result};
use crate::seeding;
use crate::tensor::{dot, Tensor2D};

const DOMAIN_TOL: f64 = 1e-12;

/// Closed-form NTK of a two-layer ReLU network on unit-norm inputs, as a
/// function of the input dot product:
/// `h(u) = u * (pi - arccos(u)) / (2 pi)`.
///
/// This is the trained-hidden-layer kernel: the hidden weights are standard
/// Gaussian rows acting directly on the (unit-norm) inputs and the output
/// layer carries the 1/sqrt(width) scaling, so `h(1) = 1/2`.
pub fn analytic_ntk(u: f64) -> Result<f64> {
    let u = clamp_unit(u, "analytic_ntk")?;
    Ok(u * (std::f64::consts::PI - u.acos()) / (2.0 * std::f64::consts::PI))
}

fn clamp_unit(u: f64, context: &str) -> Result<f64> {
    if !u.is_finite() || u.abs() > 1.0 + DOMAIN_TOL {
        return Err(AmpError::KernelDomain(format!(
            "{context}: |u| must be <= 1, got {u}"
        )));
    }
    Ok(u.clamp(-1.0, 1.0))
}

/// Cosine similarity `a . b / (|a| |b|)`, clamped to `[-1, 1]`.
///
/// Bitwise-equal (or bitwise-negated) inputs return exactly 1 (or -1):
/// `h_ntk` has an unbounded derivative at both ends of its domain, so
/// rounding in the dot product would otherwise turn exact +/-1 cosines into
/// O(sqrt(eps)) kernel errors.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let qa = dot(a, a);
    let qb = dot(b, b);
    if qa < 1e-24 || qb < 1e-24 {
        return Err(AmpError::KernelDomain(
            "cosine of a vector with (near-)zero norm".into(),
        ));
    }
    if a == b {
        return Ok(1.0);
    }
    if a.iter().zip(b).all(|(x, y)| *x == -*y) {
        return Ok(-1.0);
    }
    clamp_unit(dot(a, b) / (qa.sqrt() * qb.sqrt()), "cosine")
}

/// Vanilla NTK on arbitrary nonzero inputs: `h_ntk` of their cosine
/// similarity (inputs renormalized to the unit sphere).
pub fn ntk_kernel(a: &[f64], b: &[f64]) -> Result<f64> {
    analytic_ntk(cosine(a, b)?)
}

/// Architecture for the Monte-Carlo NTK estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmpiricalNtkSpec {
    pub width: usize,
    pub input_dim: usize,
}

/// Monte-Carlo estimate of the NTK: the gradient inner product of
/// `f(x) = a^T relu(V x) / sqrt(width)` with respect to the hidden weights
/// `V`, averaged over `num_seeds` random initializations (`V`, `a` standard
/// Gaussian). Converges to [`analytic_ntk`] of the input dot product as the
/// width grows.
pub fn empirical_ntk(
    spec: &EmpiricalNtkSpec,
    x_i: &[f64],
    x_j: &[f64],
    num_seeds: usize,
    seed: u64,
) -> Result<f64> {
    if spec.width == 0 || num_seeds == 0 {
        return Err(AmpError::InvalidArgument(
            "width and num_seeds must be >= 1".into(),
        ));
    }
    if x_i.len() != spec.input_dim || x_j.len() != spec.input_dim {
        return Err(AmpError::ShapeMismatch {
            context: "empirical_ntk",
            expected: format!("inputs of length {}", spec.input_dim),
            actual: format!("{} and {}", x_i.len(), x_j.len()),
        });
    }
    let u = dot(x_i, x_j);
    let mut total = 0.0;
    for s in 0..num_seeds {
        let mut rng = seeding::rng_for(seed, &[0x4e54_4b00, s as u64]);
        let mut acc = 0.0;
        for _ in 0..spec.width {
            let mut zi = 0.0;
            let mut zj = 0.0;
            for t in 0..spec.input_dim {
                let w: f64 = StandardNormal.sample(&mut rng);
                zi += w * x_i[t];
                zj += w * x_j[t];
            }
            let a: f64 = StandardNormal.sample(&mut rng);
            if zi > 0.0 && zj > 0.0 {
                acc += a * a;
            }
        }
        total += u * acc / spec.width as f64;
    }
    Ok(total / num_seeds as f64)
}

/// Random unit vectors (normalized Gaussian draws), one per row.
pub fn sample_unit_vectors(n: usize, dim: usize, seed: u64) -> Result<Tensor2D> {
    if dim == 0 {
        return Err(AmpError::InvalidArgument("dim must be >= 1".into()));
    }
    let mut rng = seeding::rng_for(seed, &[0x5556_4543]);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                rows.push(v.into_iter().map(|x| x / norm).collect::<Vec<_>>());
                break;
            }
        }
    }
    Tensor2D::from_rows(&rows)
}

/// Mean relative error of the Monte-Carlo NTK against the closed form, per
/// width, over one fixed set of random unit-vector pairs.
pub fn empirical_convergence(
    widths: &[usize],
    input_dim: usize,
    num_pairs: usize,
    num_seeds: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let xs = sample_unit_vectors(num_pairs, input_dim, seeding::derive(seed, &[1]))?;
    let ys = sample_unit_vectors(num_pairs, input_dim, seeding::derive(seed, &[2]))?;
    let mut out = Vec::with_capacity(widths.len());
    for &width in widths {
        let spec = EmpiricalNtkSpec { width, input_dim };
        let mut err_sum = 0.0;
        for p in 0..num_pairs {
            let (xi, xj) = (xs.row(p), ys.row(p));
            let exact = analytic_ntk(dot(xi, xj))?;
            let est = empirical_ntk(&spec, xi, xj, num_seeds, seeding::derive(seed, &[3, p as u64]))?;
            err_sum += (est - exact).abs() / exact.abs().max(1e-300);
        }
        out.push((width, err_sum / num_pairs as f64));
    }
    Ok(out)
}

/// Infinite-width kernel-regression predictor:
/// `f(x) = f0(x) - K_{x,X} (K_{X,X} + ridge I)^{-1} (f0(X) - Y)`.
pub struct NtkRegressor<'a> {
    train_x: Tensor2D,
    kernel: Box<dyn Fn(&[f64], &[f64]) -> Result<f64> + 'a>,
    f0: Box<dyn Fn(&[f64]) -> Result<f64> + 'a>,
    coeffs: Vec<f64>,
}

impl<'a> NtkRegressor<'a> {
    pub fn fit(
        train_x: Tensor2D,
        train_y: &[f64],
        f0: impl Fn(&[f64]) -> Result<f64> + 'a,
        kernel: impl Fn(&[f64], &[f64]) -> Result<f64> + 'a,
        ridge: f64,
    ) -> Result<Self> {
        let n = train_x.rows();
        if n == 0 || train_y.len() != n {
            return Err(AmpError::ShapeMismatch {
                context: "NtkRegressor::fit",
                expected: format!("{n} targets (nonzero)"),
                actual: format!("{} targets", train_y.len()),
            });
        }
        if ridge < 0.0 {
            return Err(AmpError::InvalidArgument(format!(
                "ridge must be >= 0, got {ridge}"
            )));
        }
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = kernel(train_x.row(i), train_x.row(j))?;
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        for i in 0..n {
            gram[(i, i)] += ridge;
        }
        let rhs_vec: Vec<f64> = (0..n)
            .map(|i| f0(train_x.row(i)).map(|v| v - train_y[i]))
            .collect::<Result<_>>()?;
        let rhs = DMatrix::from_column_slice(n, 1, &rhs_vec);

        let solution = match gram.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => gram
                .lu()
                .solve(&rhs)
                .ok_or_else(|| AmpError::SolveFailed("gram matrix is singular".into()))?,
        };
        Ok(Self {
            train_x,
            kernel: Box::new(kernel),
            f0: Box::new(f0),
            coeffs: solution.column(0).iter().cloned().collect(),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut correction = 0.0;
        for i in 0..self.train_x.rows() {
            correction += (self.kernel)(x, self.train_x.row(i))? * self.coeffs[i];
        }
        Ok((self.f0)(x)? - correction)
    }
}

/// Which route evaluates the anchored kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchoredKernelMode {
    /// `h_ntk` of the cosine of the anchored tuples `[c, x - c]` (tuples
    /// renormalized to unit norm).
    Exact,
    /// First-order expansion `K_{xi,xj} - gamma(xi, xj, c)` on the raw input
    /// dot product; valid for small anchor norms only.
    Approx,
}

/// The anchored tuple `[c, x - c]`.
fn anchored_tuple(c: &[f64], x: &[f64]) -> Vec<f64> {
    let mut t = Vec::with_capacity(2 * c.len());
    t.extend_from_slice(c);
    t.extend(x.iter().zip(c).map(|(xv, cv)| xv - cv));
    t
}

/// Anchored NTK between `x_i` and `x_j` for anchor `c`.
pub fn anchored_kernel(
    x_i: &[f64],
    x_j: &[f64],
    c: &[f64],
    mode: AnchoredKernelMode,
) -> Result<f64> {
    if x_i.len() != x_j.len() || x_i.len() != c.len() {
        return Err(AmpError::ShapeMismatch {
            context: "anchored_kernel",
            expected: format!("three vectors of length {}", x_i.len()),
            actual: format!("{}/{}/{}", x_i.len(), x_j.len(), c.len()),
        });
    }
    match mode {
        AnchoredKernelMode::Exact => {
            // With c = 0 the tuple dot products and norms reduce to the plain
            // input ones, so this route coincides with `ntk_kernel` bitwise.
            let ti = anchored_tuple(c, x_i);
            let tj = anchored_tuple(c, x_j);
            analytic_ntk(cosine(&ti, &tj)?)
        }
        AnchoredKernelMode::Approx => {
            let s = dot(x_i, x_j);
            Ok(analytic_ntk(s)? - gamma(x_i, x_j, c)?)
        }
    }
}

/// Anchor-dependent correction subtracted from the vanilla kernel in the
/// approximate anchored form. With `eps = c . (x_i + x_j - 2c)` and
/// `s = x_i . x_j`:
///
/// `gamma = eps (pi - arccos(s)) / (2 pi) + eps (s - eps) / (2 pi sqrt(1 - (s - eps)^2))`
///
/// The second term carries the arccos expansion evaluated at the shifted
/// argument, exactly as the derivation writes it (the standard expansion
/// would use `sqrt(1 - s^2)`); both agree to first order in `eps`. The
/// approximation is only validated for small anchor norms.
pub fn gamma(x_i: &[f64], x_j: &[f64], c: &[f64]) -> Result<f64> {
    if x_i.len() != x_j.len() || x_i.len() != c.len() {
        return Err(AmpError::ShapeMismatch {
            context: "gamma",
            expected: format!("three vectors of length {}", x_i.len()),
            actual: format!("{}/{}/{}", x_i.len(), x_j.len(), c.len()),
        });
    }
    let s = clamp_unit(dot(x_i, x_j), "gamma: x_i . x_j")?;
    let v: Vec<f64> = x_i
        .iter()
        .zip(x_j)
        .zip(c)
        .map(|((a, b), cv)| a + b - 2.0 * cv)
        .collect();
    let eps = dot(c, &v);
    if eps == 0.0 {
        return Ok(0.0);
    }
    let arg = s - eps;
    let under = 1.0 - arg * arg;
    if under <= DOMAIN_TOL {
        return Err(AmpError::KernelDomain(format!(
            "gamma: sqrt argument 1 - (s - eps)^2 = {under} is not positive"
        )));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let term1 = eps * (std::f64::consts::PI - s.acos()) / two_pi;
    let term2 = eps * arg / (two_pi * under.sqrt());
    Ok(term1 + term2)
}

/// Provenance tag for gram matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelProvenance {
    Analytic,
    Empirical,
    AnchoredExact,
    AnchoredApprox,
}

/// Symmetric kernel matrix with its provenance and (optional) anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub matrix: Tensor2D,
    pub provenance: KernelProvenance,
    pub anchor: Option<Vec<f64>>,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.matrix.rows()
    }
}

/// Evaluate a kernel on every pair of rows; the result is symmetric by
/// construction (each pair is computed once and mirrored).
pub fn build_gram(
    points: &Tensor2D,
    kernel: impl Fn(&[f64], &[f64]) -> Result<f64>,
    provenance: KernelProvenance,
    anchor: Option<Vec<f64>>,
) -> Result<GramMatrix> {
    let n = points.rows();
    let mut m = Tensor2D::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel(points.row(i), points.row(j))?;
            if !v.is_finite() {
                return Err(AmpError::NonFinite("build_gram"));
            }
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(GramMatrix {
        matrix: m,
        provenance,
        anchor,
    })
}

/// Eigenvalues of the gram matrix, descending.
pub fn kernel_spectrum(gram: &GramMatrix) -> Result<Vec<f64>> {
    let n = gram.size();
    if n < 2 {
        return Err(AmpError::InvalidArgument(format!(
            "spectrum needs n >= 2 points, got {n}"
        )));
    }
    let m = DMatrix::from_row_slice(n, n, gram.matrix.data());
    let eigen = m
        .try_symmetric_eigen(f64::EPSILON, 100_000)
        .ok_or_else(|| AmpError::EigenFailed("symmetric eigensolver did not converge".into()))?;
    let mut values: Vec<f64> = eigen.eigenvalues.iter().cloned().collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(values)
}

/// `n` evenly spaced points on the unit circle. For even `n` the second
/// half is stored as the exact negation of the first, so antipodal pairs
/// are bitwise negations (see [`cosine`]).
pub fn unit_circle_grid(n: usize) -> Tensor2D {
    let mut data = Vec::with_capacity(2 * n);
    let half = if n % 2 == 0 { n / 2 } else { n };
    for k in 0..half {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        data.push(theta.cos());
        data.push(theta.sin());
    }
    if n % 2 == 0 {
        for k in 0..half {
            data.push(-data[2 * k]);
            data.push(-data[2 * k + 1]);
        }
    }
    Tensor2D::from_raw(n, 2, data)
}

/// Row-major 2-D evaluation grid over `[x_lo, x_hi] x [y_lo, y_hi]`.
pub fn grid_2d(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, nx: usize, ny: usize) -> Tensor2D {
    let mut data = Vec::with_capacity(2 * nx * ny);
    for iy in 0..ny {
        let y = y_lo + (y_hi - y_lo) * iy as f64 / (ny - 1).max(1) as f64;
        for ix in 0..nx {
            let x = x_lo + (x_hi - x_lo) * ix as f64 / (nx - 1).max(1) as f64;
            data.push(x);
            data.push(y);
        }
    }
    Tensor2D::from_raw(nx * ny, 2, data)
}

/// Per-anchor decision maps over a grid plus the pointwise standard
/// deviation across anchors (population convention).
#[derive(Debug, Clone)]
pub struct DecisionMaps {
    pub grid: Tensor2D,
    pub per_anchor: Vec<Vec<f64>>,
    pub std_map: Vec<f64>,
}

/// Evaluate `predict(anchor_index, grid_point)` for every anchor and grid
/// point, and summarize anchor disagreement as the per-point standard
/// deviation.
pub fn toy_anchor_demo(
    num_anchors: usize,
    grid: &Tensor2D,
    predict: impl Fn(usize, &[f64]) -> Result<f64>,
) -> Result<DecisionMaps> {
    if num_anchors == 0 {
        return Err(AmpError::InvalidArgument("need >= 1 anchor".into()));
    }
    let mut per_anchor = Vec::with_capacity(num_anchors);
    for a in 0..num_anchors {
        let map: Vec<f64> = (0..grid.rows())
            .map(|g| predict(a, grid.row(g)))
            .collect::<Result<_>>()?;
        per_anchor.push(map);
    }
    let std_map = (0..grid.rows())
        .map(|g| {
            let vals: Vec<f64> = per_anchor.iter().map(|m| m[g]).collect();
            pop_std(&vals)
        })
        .collect();
    Ok(DecisionMaps {
        grid: grid.clone(),
        per_anchor,
        std_map,
    })
}

fn pop_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_ntk_reference_values() {
        assert_eq!(analytic_ntk(1.0).unwrap(), 0.5);
        assert_eq!(analytic_ntk(0.0).unwrap(), 0.0);
        assert!(analytic_ntk(-1.0).unwrap().abs() < 1e-16);
        // Clamping tolerance.
        assert!(analytic_ntk(1.0 + 5e-13).is_ok());
        assert!(analytic_ntk(1.0 + 1e-9).is_err());
        assert!(analytic_ntk(f64::NAN).is_err());
    }

    #[test]
    fn analytic_ntk_is_nondecreasing_on_unit_interval() {
        let mut last = analytic_ntk(0.0).unwrap();
        for k in 1..=100 {
            let u = k as f64 / 100.0;
            let v = analytic_ntk(u).unwrap();
            assert!(v >= last);
            last = v;
        }
        assert_eq!(last, 0.5);
    }

    #[test]
    fn empirical_ntk_self_kernel_is_nonnegative() {
        let spec = EmpiricalNtkSpec {
            width: 128,
            input_dim: 4,
        };
        let x = [0.5, -0.5, 0.5, 0.5];
        let v = empirical_ntk(&spec, &x, &x, 3, 7).unwrap();
        assert!(v >= 0.0);
        // Deterministic in the seed.
        assert_eq!(v, empirical_ntk(&spec, &x, &x, 3, 7).unwrap());
        assert_ne!(v, empirical_ntk(&spec, &x, &x, 3, 8).unwrap());
    }

    #[test]
    fn empirical_ntk_approaches_closed_form() {
        let spec = EmpiricalNtkSpec {
            width: 4096,
            input_dim: 6,
        };
        let xs = sample_unit_vectors(4, 6, 31).unwrap();
        let ys = sample_unit_vectors(4, 6, 32).unwrap();
        for p in 0..4 {
            let exact = analytic_ntk(dot(xs.row(p), ys.row(p))).unwrap();
            let est = empirical_ntk(&spec, xs.row(p), ys.row(p), 10, 100 + p as u64).unwrap();
            let rel = (est - exact).abs() / exact.abs().max(1e-300);
            assert!(rel < 0.10, "pair {p}: rel err {rel}");
        }
    }

    #[test]
    fn regression_interpolates_training_targets() {
        let x = sample_unit_vectors(20, 3, 5).unwrap();
        let y: Vec<f64> = (0..20).map(|i| ((i * 37 % 11) as f64) / 11.0 - 0.5).collect();
        let kernel = |a: &[f64], b: &[f64]| analytic_ntk(dot(a, b));
        let reg = NtkRegressor::fit(x.clone(), &y, |_| Ok(0.3), kernel, 0.0).unwrap();
        for i in 0..x.rows() {
            let p = reg.predict(x.row(i)).unwrap();
            assert!((p - y[i]).abs() < 1e-8, "row {i}: {p} vs {}", y[i]);
        }
    }

    #[test]
    fn regression_with_zero_f0_is_plain_kernel_regression() {
        let x = sample_unit_vectors(10, 3, 6).unwrap();
        let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.711).sin()).collect();
        let kernel = |a: &[f64], b: &[f64]| analytic_ntk(dot(a, b));
        let reg = NtkRegressor::fit(x.clone(), &y, |_| Ok(0.0), kernel, 1e-10).unwrap();
        // Compare against the direct formula K_tX K_XX^{-1} Y at a fresh point.
        let t = sample_unit_vectors(1, 3, 99).unwrap();
        let n = x.rows();
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] = kernel(x.row(i), x.row(j)).unwrap();
            }
        }
        for i in 0..n {
            gram[(i, i)] += 1e-10;
        }
        let yv = DMatrix::from_column_slice(n, 1, &y);
        let alpha = gram.lu().solve(&yv).unwrap();
        let mut direct = 0.0;
        for i in 0..n {
            direct += kernel(t.row(0), x.row(i)).unwrap() * alpha[(i, 0)];
        }
        let p = reg.predict(t.row(0)).unwrap();
        assert!((p - direct).abs() < 1e-10);
    }

    #[test]
    fn anchored_kernel_with_zero_anchor_matches_vanilla() {
        let xs = sample_unit_vectors(6, 4, 9).unwrap();
        let c = vec![0.0; 4];
        for i in 0..6 {
            for j in 0..6 {
                // Exact mode reduces bitwise to the renormalized vanilla
                // kernel; approx mode to the raw-dot closed form.
                let exact =
                    anchored_kernel(xs.row(i), xs.row(j), &c, AnchoredKernelMode::Exact).unwrap();
                let approx =
                    anchored_kernel(xs.row(i), xs.row(j), &c, AnchoredKernelMode::Approx).unwrap();
                assert_eq!(
                    exact.to_bits(),
                    ntk_kernel(xs.row(i), xs.row(j)).unwrap().to_bits()
                );
                assert_eq!(
                    approx.to_bits(),
                    analytic_ntk(dot(xs.row(i), xs.row(j))).unwrap().to_bits()
                );
                assert_eq!(gamma(xs.row(i), xs.row(j), &c).unwrap(), 0.0);
                if i != j {
                    // Away from the arccos cliff the two conventions agree
                    // to rounding.
                    assert!((exact - approx).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn anchored_kernel_hand_case_x_equals_c() {
        // x_i = x_j = c: tuples are [c, 0], renormalized to [c/|c|, 0], so
        // the tuple dot product is 1 and the kernel is h(1) = 1/2.
        let c = vec![0.3, -0.4];
        let v = anchored_kernel(&c, &c, &c, AnchoredKernelMode::Exact).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gamma_rejects_sqrt_domain_violations() {
        // s = 1 and eps = 0 would put (s - eps)^2 = 1 under the sqrt; with a
        // nonzero eps pushing the argument past the pole, gamma must reject.
        let x = vec![1.0, 0.0];
        let c = vec![1.0, 0.0];
        // eps = c.(2x - 2c) = 0 here, so gamma is 0 by the eps factor.
        assert_eq!(gamma(&x, &x, &c).unwrap(), 0.0);
        // Construct a genuine violation: s - eps = 1 exactly with eps != 0.
        let xi = vec![1.0, 0.0];
        let xj = vec![0.0, 1.0];
        // s = 0; choose c so that eps = -1 -> arg = 1.
        // eps = c.(xi + xj - 2c); with c = a*(1,1): eps = 2a - 4a^2... solve
        // 2a - 4a^2 = -1 -> a = (1 + sqrt(5))/4.
        let a = (1.0 + 5f64.sqrt()) / 4.0;
        let c = vec![a, a];
        assert!(matches!(
            gamma(&xi, &xj, &c),
            Err(AmpError::KernelDomain(_))
        ));
    }

    #[test]
    fn taylor_gap_shrinks_quadratically_for_tuples_on_the_sphere() {
        // Sample pairs whose anchored tuples are exactly unit norm:
        // x = c + sqrt(1 - |c|^2) * u with u a unit vector. Then the exact
        // mode's renormalization is the identity and the exact/approx gap is
        // the arccos Taylor remainder, O(|c|^2).
        let dim = 4;
        let us = sample_unit_vectors(40, dim, 17).unwrap();
        let dirs = sample_unit_vectors(1, dim, 18).unwrap();
        let mut max_ratio: f64 = 0.0;
        for &scale in &[0.05, 0.025, 0.0125] {
            let c: Vec<f64> = dirs.row(0).iter().map(|v| v * scale).collect();
            let shrink = (1.0 - scale * scale).sqrt();
            let mut max_gap: f64 = 0.0;
            for p in 0..20 {
                let xi: Vec<f64> = us.row(2 * p).iter().zip(&c).map(|(u, cv)| cv + shrink * u).collect();
                let xj: Vec<f64> =
                    us.row(2 * p + 1).iter().zip(&c).map(|(u, cv)| cv + shrink * u).collect();
                let exact = anchored_kernel(&xi, &xj, &c, AnchoredKernelMode::Exact).unwrap();
                let approx = anchored_kernel(&xi, &xj, &c, AnchoredKernelMode::Approx).unwrap();
                max_gap = max_gap.max((exact - approx).abs());
            }
            max_ratio = max_ratio.max(max_gap / (scale * scale));
        }
        // The ratio gap / |c|^2 stays bounded across magnitudes; with a
        // first-order error it would grow like 1/|c| (factor 4 over this sweep).
        assert!(max_ratio < 2.0, "gap/|c|^2 ratio {max_ratio}");
    }

    #[test]
    fn constant_kernel_spectrum_is_rank_one() {
        let pts = unit_circle_grid(8);
        let gram = build_gram(&pts, |_, _| Ok(1.0), KernelProvenance::Analytic, None).unwrap();
        let eig = kernel_spectrum(&gram).unwrap();
        assert!((eig[0] - 8.0).abs() < 1e-10);
        for &e in &eig[1..] {
            assert!(e.abs() < 1e-10);
        }
    }

    #[test]
    fn identity_like_kernel_has_unit_spectrum() {
        let pts = unit_circle_grid(6);
        let gram = build_gram(
            &pts,
            |a, b| Ok(if a == b { 1.0 } else { 0.0 }),
            KernelProvenance::Analytic,
            None,
        )
        .unwrap();
        let eig = kernel_spectrum(&gram).unwrap();
        for &e in &eig {
            assert!((e - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn analytic_gram_on_circle_is_psd() {
        let pts = unit_circle_grid(32);
        let gram = build_gram(&pts, ntk_kernel, KernelProvenance::Analytic, None).unwrap();
        // Symmetry by construction.
        for i in 0..32 {
            for j in 0..32 {
                assert_eq!(gram.matrix.get(i, j), gram.matrix.get(j, i));
            }
        }
        let eig = kernel_spectrum(&gram).unwrap();
        assert!(eig.iter().all(|&e| e >= -1e-10));
        assert!(eig.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn toy_demo_single_or_identical_anchors_give_zero_std() {
        let grid = grid_2d(-1.0, 1.0, -1.0, 1.0, 5, 5);
        let one = toy_anchor_demo(1, &grid, |_, p| Ok(p[0] + p[1])).unwrap();
        assert!(one.std_map.iter().all(|&v| v == 0.0));
        let two = toy_anchor_demo(2, &grid, |_, p| Ok(p[0] * p[1])).unwrap();
        assert!(two.std_map.iter().all(|&v| v == 0.0));
        let distinct = toy_anchor_demo(2, &grid, |a, p| Ok(p[0] + a as f64)).unwrap();
        assert!(distinct.std_map.iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }
}
