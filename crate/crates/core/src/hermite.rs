//! Hermite-function numerics on the real line.
//!
//! The basis is the orthonormal family
//! `h_d(v) = (2^d d! √π)^{-1/2} H_d(v) e^{-v²/2}`, evaluated with the
//! normalized three-term recurrence. Integrals are done with a Gauss–Hermite
//! rule whose weights are stored pre-multiplied by `e^{v²}`, so that
//! `∫ g(v) dv ≈ Σ_i w_i g(x_i)` for any Gaussian-decaying `g`.
//!
//! A basis has a *resolved degree* `D` and an optional *guard band*: matrices
//! are built on degrees `0..=D+guard`, and comparisons only look at degrees
//! `<= D - margin`. With `guard = 0` products of matrices are products of
//! plain truncations; a guard turns them into compressions of the true
//! operator products on the resolved interior.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

const RESCALE: f64 = 1e150;

/// Largest plane-wave frequency the default quadrature order is sized for.
pub const DEFAULT_MAX_KICK: f64 = 8.0 * PI;

/// Mantissa/exponent evaluation: returns `(h_n, h_{n-1})` mantissas and a log scale `s`
/// with `h_k(v) = mantissa · e^s`.
fn hermite_top_pair(n: usize, v: f64) -> (f64, f64, f64) {
    let mut s = -0.5 * v * v;
    let mut cur = PI.powf(-0.25);
    let mut prev = 0.0;
    for d in 1..=n {
        let d = d as f64;
        let next = (2.0 / d).sqrt() * v * cur - ((d - 1.0) / d).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            s += RESCALE.ln();
        }
    }
    (cur, prev, s)
}

fn descale(mantissa: f64, s: f64) -> f64 {
    if mantissa == 0.0 {
        0.0
    } else {
        mantissa.signum() * (mantissa.abs().ln() + s).exp()
    }
}

/// Values `h_0(v), …, h_max(v)`. Stable for large `|v|` (no premature underflow).
pub fn hermite_functions(max_degree: usize, v: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_degree + 1);
    hermite_functions_into(max_degree, v, &mut out);
    out
}

fn hermite_functions_into(max_degree: usize, v: f64, out: &mut Vec<f64>) {
    out.clear();
    let mut s = -0.5 * v * v;
    let mut cur = PI.powf(-0.25);
    let mut prev = 0.0;
    out.push(descale(cur, s));
    for d in 1..=max_degree {
        let df = d as f64;
        let next = (2.0 / df).sqrt() * v * cur - ((df - 1.0) / df).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            s += RESCALE.ln();
        }
        out.push(descale(cur, s));
    }
}

/// Derivatives `h_0'(v), …, h_max'(v)` from `h_d' = √(d/2) h_{d-1} − √((d+1)/2) h_{d+1}`.
pub fn hermite_derivatives(max_degree: usize, v: f64) -> Vec<f64> {
    let h = hermite_functions(max_degree + 1, v);
    (0..=max_degree)
        .map(|d| {
            let down = if d > 0 { (d as f64 / 2.0).sqrt() * h[d - 1] } else { 0.0 };
            down - ((d as f64 + 1.0) / 2.0).sqrt() * h[d + 1]
        })
        .collect()
}

/// Gauss–Hermite rule of order `q` for weight `e^{-v²}`.
///
/// Returns nodes and *scaled* weights `w_i e^{x_i²} = 1 / (q h_{q-1}(x_i)²)`.
pub fn gauss_hermite(q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if q == 0 {
        return Err(Error::Config("quadrature order must be positive".into()));
    }
    let jacobi = Mat::<f64>::from_fn(q, q, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes = jacobi
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("Gauss–Hermite eigenvalues: {e:?}")))?;
    let qf = q as f64;
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (hq, hq1, _) = hermite_top_pair(q, *x);
            let deriv = (2.0 * qf).sqrt() * hq1 - *x * hq;
            if deriv == 0.0 {
                break;
            }
            let step = hq / deriv;
            *x -= step;
            if step.abs() < 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // symmetrize: the exact rule is even
    for i in 0..q / 2 {
        let a = 0.5 * (nodes[q - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[q - 1 - i] = a;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (hq1, _, s) = hermite_top_pair(q - 1, x);
            (-2.0 * (hq1.abs().ln() + s)).exp() / qf
        })
        .collect();
    Ok((nodes, weights))
}

/// Minimum quadrature order for working degree `w`.
pub fn quadrature_floor(working_degree: usize) -> usize {
    2 * working_degree + 16
}

/// Default quadrature order: the floor, raised so that plane waves up to
/// [`DEFAULT_MAX_KICK`] applied to the top basis function are integrated exactly.
pub fn default_quadrature_order(working_degree: usize) -> usize {
    let w = working_degree as f64;
    let radius = (2.0 * w + 1.0).sqrt() + DEFAULT_MAX_KICK + 3.0;
    let content = 0.5 * radius * radius;
    let kick = ((w + content) / 2.0).ceil() as usize + 8;
    quadrature_floor(working_degree).max(kick)
}

/// Guard degrees needed so that an operator moving phase space by `reach`
/// maps the interior `degree - margin` into the working basis.
///
/// Uses the harmonic-oscillator picture: `h_d` lives inside the disk of
/// radius `√(2d+1)`; five extra units of radius cover the Gaussian tails.
pub fn dealias_guard(degree: usize, margin: usize, reach: f64) -> usize {
    let interior = degree.saturating_sub(margin) as f64;
    let radius = (2.0 * interior + 1.0).sqrt() + reach.abs() + 5.0;
    let needed = ((radius * radius - 1.0) / 2.0).ceil() as usize;
    needed.saturating_sub(degree)
}

/// Orthonormal Hermite basis with its quadrature rule.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    degree: usize,
    guard: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `h_d(x_i)`, degree-major: `(working + 2) × Q` (one extra row for derivatives).
    at_nodes: Mat<f64>,
}

impl HermiteBasis {
    /// Basis of resolved degree `degree`, no guard band, default quadrature.
    pub fn new(degree: usize) -> Result<Self> {
        Self::with_options(degree, 0, None)
    }

    pub fn with_guard(degree: usize, guard: usize) -> Result<Self> {
        Self::with_options(degree, guard, None)
    }

    /// Full constructor. `quad` must respect [`quadrature_floor`] of the working degree.
    pub fn with_options(degree: usize, guard: usize, quad: Option<usize>) -> Result<Self> {
        let working = degree + guard;
        let floor = quadrature_floor(working);
        let q = match quad {
            Some(q) if q < floor => {
                return Err(Error::QuadratureTooLow {
                    degree: working,
                    quad: q,
                    floor,
                })
            }
            Some(q) => q,
            None => default_quadrature_order(working),
        };
        let (nodes, weights) = gauss_hermite(q)?;
        let mut at_nodes = Mat::<f64>::zeros(working + 2, q);
        let mut buf = Vec::new();
        for (i, &x) in nodes.iter().enumerate() {
            hermite_functions_into(working + 1, x, &mut buf);
            for (d, &h) in buf.iter().enumerate() {
                at_nodes[(d, i)] = h;
            }
        }
        Ok(HermiteBasis {
            degree,
            guard,
            nodes,
            weights,
            at_nodes,
        })
    }

    /// Resolved degree `D`.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn guard(&self) -> usize {
        self.guard
    }

    /// `D + guard`: the top degree actually stored in matrices and sections.
    pub fn working_degree(&self) -> usize {
        self.degree + self.guard
    }

    /// Number of basis functions, `working_degree + 1`.
    pub fn dim(&self) -> usize {
        self.working_degree() + 1
    }

    pub fn quad_order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ g(v) dv` by the stored rule; `g` must decay like a Gaussian.
    pub fn integrate(&self, g: impl Fn(f64) -> Complex64) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| g(x) * w)
            .sum()
    }

    /// `h_0(v) … h_W(v)` for the working degree `W`.
    pub fn eval(&self, v: f64) -> Vec<f64> {
        hermite_functions(self.working_degree(), v)
    }

    /// `h_d(x_i)` at the quadrature nodes.
    pub fn node_value(&self, d: usize, i: usize) -> f64 {
        self.at_nodes[(d, i)]
    }

    /// Gram matrix `⟨h_a, h_b⟩` by quadrature.
    pub fn gram(&self) -> Mat<f64> {
        let n = self.dim();
        let weighted =
            Mat::<f64>::from_fn(n, self.quad_order(), |d, i| self.at_nodes[(d, i)] * self.weights[i]);
        let h = self.at_nodes.as_ref().subrows(0, n);
        &weighted * h.transpose()
    }

    /// `rows × Q` matrix of `w_i h_a(x_i)` for `a <= max_row`.
    pub(crate) fn weighted_rows(&self, max_row: usize) -> Mat<Complex64> {
        Mat::from_fn(max_row + 1, self.quad_order(), |a, i| {
            Complex64::new(self.at_nodes[(a, i)] * self.weights[i], 0.0)
        })
    }

    /// `⟨h_a, g_b⟩` for `a <= max_row`, given `g_b(x_i)` as a `Q × ncols` matrix.
    pub(crate) fn project(&self, max_row: usize, samples: MatRef<'_, Complex64>) -> Mat<Complex64> {
        self.weighted_rows(max_row) * samples
    }

    /// Builds one of the primitive line operators on the working basis.
    pub fn primitive(self: &Arc<Self>, kind: Primitive<'_>) -> LineOperator {
        let n = self.dim();
        let q = self.quad_order();
        let (label, matrix) = match kind {
            Primitive::Position => {
                let m = Mat::from_fn(n, n, |a, b| {
                    if a + 1 == b || b + 1 == a {
                        Complex64::new((a.max(b) as f64 / 2.0).sqrt(), 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                });
                ("position".to_string(), m)
            }
            Primitive::Derivative => {
                let m = Mat::from_fn(n, n, |a, b| {
                    if a + 1 == b {
                        Complex64::new((b as f64 / 2.0).sqrt(), 0.0)
                    } else if b + 1 == a {
                        Complex64::new(-(a as f64 / 2.0).sqrt(), 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                });
                ("derivative".to_string(), m)
            }
            Primitive::Shift(t) => {
                let mut samples = Mat::<Complex64>::zeros(q, n);
                let mut buf = Vec::new();
                for (i, &x) in self.nodes.iter().enumerate() {
                    hermite_functions_into(n - 1, x - t, &mut buf);
                    for (b, &h) in buf.iter().enumerate() {
                        samples[(i, b)] = Complex64::new(h, 0.0);
                    }
                }
                (format!("shift({t})"), self.project(n - 1, samples.as_ref()))
            }
            Primitive::PlaneWave(lambda) => {
                let samples = Mat::from_fn(q, n, |i, b| {
                    Complex64::cis(lambda * self.nodes[i]) * self.at_nodes[(b, i)]
                });
                (format!("plane_wave({lambda})"), self.project(n - 1, samples.as_ref()))
            }
            Primitive::Multiplier(f) => {
                let values: Vec<Complex64> = self.nodes.iter().map(|&x| f(x)).collect();
                let samples = Mat::from_fn(q, n, |i, b| values[i] * self.at_nodes[(b, i)]);
                ("multiplier".to_string(), self.project(n - 1, samples.as_ref()))
            }
        };
        LineOperator {
            matrix,
            label,
            basis: Arc::clone(self),
        }
    }
}

/// The primitive operators on `L²(R)` from which the prequantization
/// operators are assembled.
pub enum Primitive<'a> {
    /// Multiplication by `v`.
    Position,
    /// `d/dv`.
    Derivative,
    /// `ψ ↦ ψ(· − t)`.
    Shift(f64),
    /// Multiplication by `e^{iλv}`.
    PlaneWave(f64),
    /// Multiplication by a smooth function sampled at the quadrature nodes.
    Multiplier(&'a dyn Fn(f64) -> Complex64),
}

/// Anything stored as an `N × N` grid of Hermite blocks over a common basis.
pub trait Truncated {
    fn basis(&self) -> &HermiteBasis;
    fn blocks(&self) -> usize;
    fn matrix(&self) -> MatRef<'_, Complex64>;
}

/// Indices of the interior (degree `<= D - margin`) in each block.
pub fn interior_indices(basis: &HermiteBasis, blocks: usize, margin: usize) -> Result<Vec<usize>> {
    let d = basis.degree();
    if margin == 0 || margin > d {
        return Err(Error::InvalidMargin {
            margin,
            limit: d + 1,
        });
    }
    let top = d - margin;
    let dim = basis.dim();
    Ok((0..blocks)
        .flat_map(|r| (0..=top).map(move |k| r * dim + k))
        .collect())
}

/// Largest entry of `A − B` on the interior rows and columns.
pub fn interior_compare<T: Truncated>(a: &T, b: &T, margin: usize) -> Result<f64> {
    let (ma, mb) = (a.matrix(), b.matrix());
    if ma.nrows() != mb.nrows() || ma.ncols() != mb.ncols() || a.blocks() != b.blocks() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            ma.nrows(),
            ma.ncols(),
            mb.nrows(),
            mb.ncols()
        )));
    }
    if a.basis().degree() != b.basis().degree() || a.basis().dim() != b.basis().dim() {
        return Err(Error::ShapeMismatch("operators live on different bases".into()));
    }
    let idx = interior_indices(a.basis(), a.blocks(), margin)?;
    let mut worst = 0.0f64;
    for &j in &idx {
        for &i in &idx {
            worst = worst.max((ma[(i, j)] - mb[(i, j)]).norm());
        }
    }
    Ok(worst)
}

/// Largest entry of `A` on the interior.
pub fn interior_norm<T: Truncated>(a: &T, margin: usize) -> Result<f64> {
    let m = a.matrix();
    let idx = interior_indices(a.basis(), a.blocks(), margin)?;
    let mut worst = 0.0f64;
    for &j in &idx {
        for &i in &idx {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    Ok(worst)
}

/// A matrix on the Hermite basis of the real line.
#[derive(Clone, Debug)]
pub struct LineOperator {
    matrix: Mat<Complex64>,
    label: String,
    basis: Arc<HermiteBasis>,
}

impl LineOperator {
    pub fn new(basis: &Arc<HermiteBasis>, matrix: Mat<Complex64>, label: impl Into<String>) -> Result<Self> {
        let n = basis.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "line operator must be {n}x{n}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(LineOperator {
            matrix,
            label: label.into(),
            basis: Arc::clone(basis),
        })
    }

    pub fn identity(basis: &Arc<HermiteBasis>) -> Self {
        let n = basis.dim();
        LineOperator {
            matrix: Mat::from_fn(n, n, |i, j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)),
            label: "identity".into(),
            basis: Arc::clone(basis),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn into_matrix(self) -> Mat<Complex64> {
        self.matrix
    }

    pub fn basis_arc(&self) -> &Arc<HermiteBasis> {
        &self.basis
    }

    fn derive(&self, matrix: Mat<Complex64>, label: String) -> Self {
        LineOperator {
            matrix,
            label,
            basis: Arc::clone(&self.basis),
        }
    }

    pub fn compose(&self, rhs: &LineOperator) -> LineOperator {
        self.derive(&self.matrix * &rhs.matrix, format!("{}·{}", self.label, rhs.label))
    }

    pub fn add(&self, rhs: &LineOperator) -> LineOperator {
        self.derive(&self.matrix + &rhs.matrix, format!("{}+{}", self.label, rhs.label))
    }

    pub fn sub(&self, rhs: &LineOperator) -> LineOperator {
        self.derive(&self.matrix - &rhs.matrix, format!("{}-{}", self.label, rhs.label))
    }

    pub fn scale(&self, s: Complex64) -> LineOperator {
        let n = self.matrix.nrows();
        let m = Mat::from_fn(n, n, |i, j| self.matrix[(i, j)] * s);
        self.derive(m, format!("({s})·{}", self.label))
    }

    pub fn adjoint(&self) -> LineOperator {
        self.derive(self.matrix.adjoint().to_owned(), format!("{}†", self.label))
    }

    pub fn commutator(&self, rhs: &LineOperator) -> LineOperator {
        let m = &self.matrix * &rhs.matrix - &rhs.matrix * &self.matrix;
        self.derive(m, format!("[{},{}]", self.label, rhs.label))
    }
}

impl Truncated for LineOperator {
    fn basis(&self) -> &HermiteBasis {
        &self.basis
    }
    fn blocks(&self) -> usize {
        1
    }
    fn matrix(&self) -> MatRef<'_, Complex64> {
        self.matrix.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(d: usize) -> Arc<HermiteBasis> {
        Arc::new(HermiteBasis::new(d).unwrap())
    }

    #[test]
    fn quadrature_floor_enforced() {
        assert!(matches!(
            HermiteBasis::with_options(10, 0, Some(35)),
            Err(Error::QuadratureTooLow { floor: 36, .. })
        ));
        assert!(HermiteBasis::with_options(10, 0, Some(36)).is_ok());
    }

    #[test]
    fn gram_is_identity() {
        let b = basis(48);
        let g = b.gram();
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - e).abs() < 1e-12, "({i},{j}) {}", g[(i, j)]);
            }
        }
    }

    #[test]
    fn gaussian_moments() {
        let b = basis(8);
        let h0 = |v: f64| hermite_functions(0, v)[0];
        let norm = b.integrate(|v| Complex64::new(h0(v) * h0(v), 0.0));
        assert!((norm.re - 1.0).abs() < 1e-14);
        let second = b.integrate(|v| Complex64::new(v * v * h0(v) * h0(v), 0.0));
        assert!((second.re - 0.5).abs() < 1e-14);
        let cross = b.integrate(|v| Complex64::new(h0(v) * hermite_functions(1, v)[1], 0.0));
        assert!(cross.norm() < 1e-15);
    }

    #[test]
    fn large_argument_does_not_underflow_early() {
        // h_600 peaks near √1201 ≈ 34.7, where e^{-v²/2} alone underflows
        let h = hermite_functions(600, 34.0);
        assert!(h[600].abs() > 1e-3);
        assert!(h[0] == 0.0 || h[0].abs() < 1e-250);
    }

    #[test]
    fn derivative_of_ground_state() {
        let v = 0.7;
        let d = hermite_derivatives(1, v);
        let h = hermite_functions(1, v);
        assert!((d[0] + v * h[0]).abs() < 1e-15);
        assert!((d[0] + 0.5f64.sqrt() * h[1]).abs() < 1e-15);
    }

    #[test]
    fn primitive_entries() {
        let b = basis(12);
        let x = b.primitive(Primitive::Position);
        let d = b.primitive(Primitive::Derivative);
        assert!((x.matrix()[(0, 1)].re - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((d.matrix()[(1, 0)].re + 0.5f64.sqrt()).abs() < 1e-15);
        let via_quad = b.primitive(Primitive::Multiplier(&|v| Complex64::new(v, 0.0)));
        assert!(interior_compare(&x, &via_quad, 1).unwrap() < 1e-13);
        let id = LineOperator::identity(&b);
        assert!(interior_compare(&b.primitive(Primitive::Shift(0.0)), &id, 1).unwrap() < 1e-13);
        assert!(interior_compare(&b.primitive(Primitive::PlaneWave(0.0)), &id, 1).unwrap() < 1e-13);
    }

    #[test]
    fn tridiagonal_structure() {
        let b = basis(20);
        let x = b.primitive(Primitive::Position);
        let d = b.primitive(Primitive::Derivative);
        let (xm, dm) = (x.matrix(), d.matrix());
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                if i.abs_diff(j) != 1 {
                    assert_eq!(xm[(i, j)], Complex64::new(0.0, 0.0));
                    assert_eq!(dm[(i, j)], Complex64::new(0.0, 0.0));
                }
                assert_eq!(xm[(i, j)], xm[(j, i)]);
                assert_eq!(dm[(i, j)], -dm[(j, i)]);
                assert_eq!(xm[(i, j)].im, 0.0);
            }
        }
    }

    #[test]
    fn margin_validation() {
        let b = basis(10);
        let x = b.primitive(Primitive::Position);
        assert!(interior_compare(&x, &x, 0).is_err());
        assert!(interior_compare(&x, &x, 11).is_err());
        assert_eq!(interior_compare(&x, &x, 5).unwrap(), 0.0);
    }

    #[test]
    fn guard_rule_grows_with_reach() {
        assert_eq!(dealias_guard(48, 24, -100.0), dealias_guard(48, 24, 100.0));
        assert!(dealias_guard(48, 24, 4.0 * PI) > dealias_guard(48, 24, 2.0 * PI));
        let w = 48 + dealias_guard(48, 24, 2.0 * PI);
        assert!((2.0 * w as f64 + 1.0).sqrt() >= 7.0 + 2.0 * PI + 5.0 - 1e-9);
    }
}
