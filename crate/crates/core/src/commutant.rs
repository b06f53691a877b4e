//! Numerical commutants of finite operator sets.
//!
//! A self-adjoint set generates a `*`-algebra, so its commutant is spanned by
//! Hermitian matrices. The unknown `T` is written in a real orthonormal basis
//! of Hermitian `n × n` matrices and the map `T ↦ ([T, A_i])_i` is split into
//! real and imaginary rows. Singular values of that map below
//! `threshold · σ_max` count toward the commutant.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use faer::{Mat, MatRef};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermite::HermiteBasis;
use crate::prequant::{assemble_window, OperatorMatrix};
use crate::trigpoly::{ChernLevel, TrigPoly};

/// Default relative threshold for counting a singular value as zero.
pub const DEFAULT_THRESHOLD: f64 = 1e-6;
/// Minimum gap ratio for a confident dimension estimate.
pub const CONFIDENT_GAP: f64 = 10.0;
/// Number of smallest singular values kept in reports.
pub const PROFILE_LEN: usize = 8;

/// One commutant estimate at a fixed truncation.
#[derive(Clone, Debug, Serialize)]
pub struct CommutantEntry {
    /// Resolved Hermite degree `D`.
    pub degree: usize,
    /// Compressed matrix size `M'`.
    pub compressed_size: usize,
    /// Smallest singular values, descending.
    pub singular_values: Vec<f64>,
    pub estimated_dim: usize,
    /// `σ_{dim+1} / σ_dim` in ascending order; `None` when either side is missing or
    /// `σ_dim` is exactly zero.
    pub gap_ratio: Option<f64>,
    pub threshold: f64,
    pub confident: bool,
}

/// An entry together with the numerical kernel it was read from.
#[derive(Clone, Debug)]
pub struct CommutantAnalysis {
    pub entry: CommutantEntry,
    size: usize,
    /// Orthonormal kernel vectors in Hermitian coordinates, one per column.
    kernel: Mat<f64>,
}

/// The Hermitian basis element with index `k` in `0..n²`.
///
/// Diagonal units come first, then for each `i < j` the pair
/// `(E_ij + E_ji)/√2`, `i(E_ij − E_ji)/√2`.
pub fn hermitian_basis_element(n: usize, k: usize) -> Mat<Complex64> {
    let mut e = Mat::<Complex64>::zeros(n, n);
    if k < n {
        e[(k, k)] = Complex64::new(1.0, 0.0);
        return e;
    }
    let (i, j, anti) = off_diagonal_pair(n, k);
    let s = 1.0 / SQRT_2;
    if anti {
        e[(i, j)] = Complex64::new(0.0, s);
        e[(j, i)] = Complex64::new(0.0, -s);
    } else {
        e[(i, j)] = Complex64::new(s, 0.0);
        e[(j, i)] = Complex64::new(s, 0.0);
    }
    e
}

fn off_diagonal_pair(n: usize, k: usize) -> (usize, usize, bool) {
    let p = (k - n) / 2;
    let anti = (k - n) % 2 == 1;
    // p enumerates i < j row by row
    let mut i = 0;
    let mut rest = p;
    while rest >= n - 1 - i {
        rest -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + rest, anti)
}

/// Coordinates of the Hermitian part of `t` in the basis of [`hermitian_basis_element`].
pub fn hermitian_coordinates(t: MatRef<'_, Complex64>) -> Vec<f64> {
    let n = t.nrows();
    let mut theta = Vec::with_capacity(n * n);
    for i in 0..n {
        theta.push(t[(i, i)].re);
    }
    for i in 0..n {
        for j in i + 1..n {
            let avg = (t[(i, j)] + t[(j, i)].conj()) * 0.5;
            theta.push(SQRT_2 * avg.re);
            theta.push(SQRT_2 * avg.im);
        }
    }
    theta
}

/// The real `(2·|ops|·n²) × n²` matrix of `θ ↦ ([T(θ), A_i])_i`.
pub fn constraint_matrix(ops: &[MatRef<'_, Complex64>]) -> Result<Mat<f64>> {
    let n = check_square(ops)?;
    let nn = n * n;
    let mut c = Mat::<f64>::zeros(2 * ops.len() * nn, nn);
    let mut col = vec![Complex64::new(0.0, 0.0); nn];
    let s = 1.0 / SQRT_2;
    let i_unit = Complex64::new(0.0, 1.0);
    for (l, a) in ops.iter().enumerate() {
        let base = 2 * l * nn;
        for k in 0..nn {
            col.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            // entry (row, colm) of [E, A] lives at row + n·colm
            if k < n {
                for b in 0..n {
                    col[k + n * b] += a[(k, b)];
                    col[b + n * k] -= a[(b, k)];
                }
            } else {
                let (i, j, anti) = off_diagonal_pair(n, k);
                let (ci, cj) = if anti { (i_unit * s, -i_unit * s) } else { (Complex64::new(s, 0.0), Complex64::new(s, 0.0)) };
                // E = ci·e_i e_j^T + cj·e_j e_i^T
                for b in 0..n {
                    col[i + n * b] += ci * a[(j, b)];
                    col[j + n * b] += cj * a[(i, b)];
                    col[b + n * j] -= ci * a[(b, i)];
                    col[b + n * i] -= cj * a[(b, j)];
                }
            }
            for (p, v) in col.iter().enumerate() {
                c[(base + p, k)] = v.re;
                c[(base + nn + p, k)] = v.im;
            }
        }
    }
    Ok(c)
}

fn check_square(ops: &[MatRef<'_, Complex64>]) -> Result<usize> {
    let first = ops.first().ok_or(Error::EmptySet)?;
    let n = first.nrows();
    for a in ops {
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "commutant inputs must all be {n}x{n}, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
    }
    Ok(n)
}

/// Commutant estimate for explicit square matrices.
pub fn commutant_of_matrices(ops: &[MatRef<'_, Complex64>], degree: usize, threshold: f64) -> Result<CommutantAnalysis> {
    let n = check_square(ops)?;
    let c = constraint_matrix(ops)?;
    let r = c.qr().thin_R().to_owned();
    drop(c);
    let svd = r.thin_svd().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let nn = n * n;
    let sigma: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let sigma_max = sigma[0];
    let cut = threshold * sigma_max;
    let dim = sigma.iter().filter(|&&s| s <= cut).count();
    // ascending view: asc[k] = σ_{k+1}
    let asc: Vec<f64> = sigma.iter().rev().copied().collect();
    let gap_ratio = if dim == 0 || dim == nn || asc[dim - 1] == 0.0 {
        None
    } else {
        Some(asc[dim] / asc[dim - 1])
    };
    // an exactly zero kernel below a nonzero σ is an infinite gap
    let exact_kernel = dim > 0 && dim < nn && asc[dim - 1] == 0.0 && asc[dim] > 0.0;
    let confident = exact_kernel || gap_ratio.is_some_and(|g| g > CONFIDENT_GAP);
    let keep = PROFILE_LEN.min(nn);
    let singular_values = sigma[nn - keep..].to_vec();
    let v = svd.V();
    let kernel = Mat::from_fn(nn, dim, |i, j| v[(i, nn - dim + j)]);
    Ok(CommutantAnalysis {
        entry: CommutantEntry {
            degree,
            compressed_size: n,
            singular_values,
            estimated_dim: dim,
            gap_ratio,
            threshold,
            confident,
        },
        size: n,
        kernel,
    })
}

impl CommutantAnalysis {
    pub fn kernel_dim(&self) -> usize {
        self.kernel.ncols()
    }

    /// Distance of the normalized Hermitian part of `t` from the numerical kernel.
    pub fn kernel_distance(&self, t: MatRef<'_, Complex64>) -> Result<f64> {
        if t.nrows() != self.size || t.ncols() != self.size {
            return Err(Error::ShapeMismatch(format!(
                "expected a {0}x{0} matrix, got {1}x{2}",
                self.size,
                t.nrows(),
                t.ncols()
            )));
        }
        let theta = hermitian_coordinates(t);
        let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let mut resid: Vec<f64> = theta.iter().map(|x| x / norm).collect();
        for k in 0..self.kernel.ncols() {
            let dot: f64 = (0..resid.len()).map(|i| self.kernel[(i, k)] * theta[i] / norm).sum();
            for (i, r) in resid.iter_mut().enumerate() {
                *r -= dot * self.kernel[(i, k)];
            }
        }
        Ok(resid.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    /// The `k`-th kernel vector as a Hermitian matrix.
    pub fn kernel_matrix(&self, k: usize) -> Mat<Complex64> {
        let n = self.size;
        let mut t = Mat::<Complex64>::zeros(n, n);
        for p in 0..n * n {
            let w = self.kernel[(p, k)];
            if w != 0.0 {
                t += Mat::from_fn(n, n, |i, j| hermitian_basis_element(n, p)[(i, j)] * w);
            }
        }
        t
    }
}

/// Commutant of operators compressed to degrees `<= D − margin` in every block.
pub fn commutant_dimension(ops: &[OperatorMatrix], margin: usize, threshold: f64) -> Result<CommutantAnalysis> {
    let first = ops.first().ok_or(Error::EmptySet)?;
    for op in ops {
        if op.level() != first.level() {
            return Err(Error::LevelMismatch {
                left: first.level().get(),
                right: op.level().get(),
            });
        }
    }
    let compressed = ops.iter().map(|op| op.compressed(margin)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<MatRef<'_, Complex64>> = compressed.iter().map(|m| m.as_ref()).collect();
    commutant_of_matrices(&refs, first.basis_arc().degree(), threshold)
}

/// A named family of observables whose quantizations are tested for irreducibility.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorSet {
    /// `e^{±2πiNx}`, `e^{±2πiNy}`.
    Fn,
    /// User-supplied polynomials; adjoints are added automatically.
    Custom { label: String, polys: Vec<TrigPoly> },
}

impl OperatorSet {
    /// Parses `FN` or `custom:<path>`.
    pub fn from_arg(arg: &str) -> Result<Self> {
        if arg.eq_ignore_ascii_case("fn") {
            return Ok(OperatorSet::Fn);
        }
        let path = arg
            .strip_prefix("custom:")
            .ok_or_else(|| Error::Config(format!("unknown operator set `{arg}`; expected FN or custom:<file>")))?;
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_custom(path, &text)
    }

    /// Polynomials in TrigPoly text format, separated by blank lines.
    pub fn parse_custom(label: &str, text: &str) -> Result<Self> {
        let mut polys = Vec::new();
        let mut chunk = String::new();
        let mut start_line = 1;
        let flush = |chunk: &mut String, start: usize, polys: &mut Vec<TrigPoly>| -> Result<()> {
            if chunk.lines().any(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#')) {
                let p = TrigPoly::parse(chunk).map_err(|e| shift_line(e, start - 1))?;
                polys.push(p);
            }
            chunk.clear();
            Ok(())
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                flush(&mut chunk, start_line, &mut polys)?;
                start_line = i + 2;
            } else {
                chunk.push_str(line);
                chunk.push('\n');
            }
        }
        flush(&mut chunk, start_line, &mut polys)?;
        if polys.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(OperatorSet::Custom {
            label: format!("custom:{label}"),
            polys,
        })
    }

    pub fn label(&self) -> String {
        match self {
            OperatorSet::Fn => "FN".to_string(),
            OperatorSet::Custom { label, .. } => label.clone(),
        }
    }

    /// The observables of the set at level `N`, without adjoints.
    pub fn observables(&self, level: ChernLevel) -> Vec<TrigPoly> {
        match self {
            OperatorSet::Fn => {
                let n = level.get();
                vec![TrigPoly::monomial(n, 0), TrigPoly::monomial(0, n)]
            }
            OperatorSet::Custom { polys, .. } => polys.clone(),
        }
    }

    /// Interior compressions of `Q_N(f)` and their adjoints, for every `f` in the set.
    pub fn compressed_operators(&self, level: ChernLevel, basis: &HermiteBasis, margin: usize) -> Result<Vec<Mat<Complex64>>> {
        crate::hermite::interior_indices(basis, 1, margin)?;
        let k = basis.degree() - margin;
        let mut out = Vec::new();
        for f in self.observables(level) {
            let a = assemble_window(level, basis, &f, k, k);
            let adj = a.adjoint().to_owned();
            out.push(a);
            out.push(adj);
        }
        Ok(out)
    }
}

fn shift_line(e: Error, offset: usize) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse {
            line: line + offset,
            message,
        },
        Error::DuplicateMode { m, n, line } => Error::DuplicateMode { m, n, line: line + offset },
        other => other,
    }
}

/// Default commutant margin: `D/4`, at least 1.
pub fn default_margin(degree: usize) -> usize {
    (degree / 4).max(1)
}

/// Commutant estimate for a named set at one truncation.
pub fn set_commutant(set: &OperatorSet, level: ChernLevel, basis: &HermiteBasis, margin: usize, threshold: f64) -> Result<CommutantAnalysis> {
    let ops = set.compressed_operators(level, basis, margin)?;
    let refs: Vec<MatRef<'_, Complex64>> = ops.iter().map(|m| m.as_ref()).collect();
    commutant_of_matrices(&refs, basis.degree(), threshold)
}

/// Per-`D` commutant estimates, in the report schema.
#[derive(Clone, Debug, Serialize)]
pub struct CommutantReport {
    pub task: String,
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(rename = "D")]
    pub d: Vec<usize>,
    pub set: String,
    pub singular_values: Vec<Vec<f64>>,
    pub estimated_dim: Vec<usize>,
    pub gap_ratio: Vec<Option<f64>>,
    pub threshold: f64,
    pub confident: bool,
    pub margins: Vec<usize>,
    pub compressed_sizes: Vec<usize>,
    /// Same estimated dimension at every `D`.
    pub stable: bool,
    /// Gap ratio never decreases as `D` grows.
    pub gap_non_decreasing: bool,
}

/// Runs [`set_commutant`] for each `D` in increasing order.
///
/// `margin` maps `D` to the interior margin; `quad` overrides the quadrature order.
pub fn convergence_study(
    set: &OperatorSet,
    level: ChernLevel,
    d_list: &[usize],
    margin: impl Fn(usize) -> usize,
    threshold: f64,
    quad: Option<usize>,
) -> Result<CommutantReport> {
    if d_list.is_empty() {
        return Err(Error::Config("degree list is empty".into()));
    }
    if d_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("degree list {d_list:?} must be strictly increasing")));
    }
    let mut entries = Vec::new();
    let mut margins = Vec::new();
    for &d in d_list {
        let basis = HermiteBasis::with_options(d, 0, quad)?;
        let m = margin(d);
        entries.push(set_commutant(set, level, &basis, m, threshold)?.entry);
        margins.push(m);
    }
    let stable = entries.windows(2).all(|w| w[0].estimated_dim == w[1].estimated_dim);
    let gap_non_decreasing = entries.windows(2).all(|w| match (w[0].gap_ratio, w[1].gap_ratio) {
        (Some(a), Some(b)) => b >= a,
        _ => false,
    });
    Ok(CommutantReport {
        task: "commutant".into(),
        n: level.get(),
        d: d_list.to_vec(),
        set: set.label(),
        singular_values: entries.iter().map(|e| e.singular_values.clone()).collect(),
        estimated_dim: entries.iter().map(|e| e.estimated_dim).collect(),
        gap_ratio: entries.iter().map(|e| e.gap_ratio).collect(),
        threshold,
        confident: entries.iter().all(|e| e.confident),
        margins,
        compressed_sizes: entries.iter().map(|e| e.compressed_size).collect(),
        stable,
        gap_non_decreasing,
    })
}

/// Outcome of the reducibility check for `Q_N(F_N)`.
#[derive(Clone, Debug, Serialize)]
pub struct ReducibilityReport {
    #[serde(rename = "N")]
    pub n: i64,
    /// `max |[Q_N(f), P_N]|` per observable, on the full working matrices.
    pub projector_residuals: Vec<(String, f64)>,
    /// Every `Q_N(f)` is exactly block-diagonal over the Zak components.
    pub block_diagonal: bool,
    /// Distance of each block projector from the numerical commutant.
    pub block_projector_kernel_residuals: Vec<f64>,
    /// Distance of the identity from the numerical commutant.
    pub identity_kernel_residual: f64,
    pub commutant: CommutantEntry,
    pub commutant_margin: usize,
    /// Largest entry of each compressed `Q_N(f)`; tiny values mean the truncation
    /// cannot see that observable and the dimension estimate is truncation-limited.
    pub interior_coupling: Vec<(String, f64)>,
}

/// Largest `D` whose compressed commutant problem keeps `M' <= 40`.
pub fn reducibility_degree(level: ChernLevel) -> usize {
    let per_block = (40 / level.components()).max(2) as f64;
    (((per_block - 1.0) * 4.0 / 3.0).floor() as usize).max(4)
}

/// Checks that `Q_N(F_N)` commutes with `P_N` and with every block projector, and
/// estimates the commutant dimension at truncation `commutant_basis`.
pub fn reducibility_check(
    level: ChernLevel,
    basis: &Arc<HermiteBasis>,
    commutant_basis: &HermiteBasis,
    threshold: f64,
) -> Result<ReducibilityReport> {
    let set = OperatorSet::Fn;
    let pn = crate::zakspace::projector_pn(level, basis);
    let mut projector_residuals = Vec::new();
    let mut block_diagonal = true;
    for f in set.observables(level) {
        for g in [f.clone(), f.conj()] {
            let q = crate::prequant::assemble(level, basis, &g);
            block_diagonal &= q.is_block_diagonal();
            let c = q.commutator(&pn)?;
            projector_residuals.push((format!("{g}"), c.max_abs()));
        }
    }
    let margin = default_margin(commutant_basis.degree());
    let k = commutant_basis.degree() - margin;
    let interior_coupling = set
        .observables(level)
        .iter()
        .map(|f| {
            let w = assemble_window(level, commutant_basis, f, k, k);
            let mut worst = 0.0f64;
            for j in 0..w.ncols() {
                for i in 0..w.nrows() {
                    worst = worst.max(w[(i, j)].norm());
                }
            }
            (format!("{f}"), worst)
        })
        .collect();
    let analysis = set_commutant(&set, level, commutant_basis, margin, threshold)?;
    let per = k + 1;
    let size = level.components() * per;
    let block_projector_kernel_residuals = (0..level.components())
        .map(|r| {
            let p = Mat::from_fn(size, size, |i, j| {
                if i == j && i / per == r {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            analysis.kernel_distance(p.as_ref())
        })
        .collect::<Result<Vec<_>>>()?;
    let identity_kernel_residual = analysis.kernel_distance(Mat::<Complex64>::identity(size, size).as_ref())?;
    Ok(ReducibilityReport {
        n: level.get(),
        projector_residuals,
        block_diagonal,
        block_projector_kernel_residuals,
        identity_kernel_residual,
        commutant: analysis.entry,
        commutant_margin: margin,
        interior_coupling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn basis_elements_are_orthonormal_and_hermitian() {
        let n = 4;
        for k in 0..n * n {
            let e = hermitian_basis_element(n, k);
            let theta = hermitian_coordinates(e.as_ref());
            for (p, t) in theta.iter().enumerate() {
                assert!((t - if p == k { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(e[(i, j)], e[(j, i)].conj());
                }
            }
        }
    }

    #[test]
    fn constraint_matches_commutator() {
        let n = 3;
        let a = Mat::from_fn(n, n, |i, j| Complex64::new((i * 3 + j) as f64, (i as f64) - (j as f64) * 0.5));
        let cm = constraint_matrix(&[a.as_ref()]).unwrap();
        for k in 0..n * n {
            let e = hermitian_basis_element(n, k);
            let comm = &e * &a - &a * &e;
            for i in 0..n {
                for j in 0..n {
                    assert!((cm[(i + n * j, k)] - comm[(i, j)].re).abs() < 1e-14);
                    assert!((cm[(n * n + i + n * j, k)] - comm[(i, j)].im).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn identity_set_commutes_with_everything() {
        let id = Mat::<Complex64>::identity(3, 3);
        let a = commutant_of_matrices(&[id.as_ref()], 0, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(a.entry.estimated_dim, 9);
    }

    #[test]
    fn matrix_units_are_irreducible() {
        let n = 3;
        let mut ops = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut e = Mat::<Complex64>::zeros(n, n);
                e[(i, j)] = c(1.0);
                ops.push(e);
            }
        }
        let refs: Vec<_> = ops.iter().map(|m| m.as_ref()).collect();
        let a = commutant_of_matrices(&refs, 0, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(a.entry.estimated_dim, 1);
        assert!(a.entry.confident);
        assert!(a.kernel_distance(Mat::<Complex64>::identity(n, n).as_ref()).unwrap() < 1e-12);
    }

    #[test]
    fn diagonal_set_has_block_commutant() {
        // diag(1,1,2) commutes with the 2x2 block algebra plus the lone corner
        let mut d = Mat::<Complex64>::zeros(3, 3);
        d[(0, 0)] = c(1.0);
        d[(1, 1)] = c(1.0);
        d[(2, 2)] = c(2.0);
        let a = commutant_of_matrices(&[d.as_ref()], 0, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(a.entry.estimated_dim, 5);
        let k = a.kernel_matrix(0);
        let kd = a.kernel_distance(k.adjoint().to_owned().as_ref()).unwrap();
        assert!(kd < 1e-12);
    }

    #[test]
    fn empty_and_mismatched_sets() {
        assert!(matches!(commutant_of_matrices(&[], 0, 1e-6), Err(Error::EmptySet)));
        let a = Mat::<Complex64>::zeros(2, 2);
        let b = Mat::<Complex64>::zeros(3, 3);
        assert!(commutant_of_matrices(&[a.as_ref(), b.as_ref()], 0, 1e-6).is_err());
    }

    #[test]
    fn custom_set_parsing() {
        let text = "# A\n1 0 1 0\n\n0 1 1 0\n0 -1 1 0\n";
        let s = OperatorSet::parse_custom("t", text).unwrap();
        match &s {
            OperatorSet::Custom { polys, .. } => {
                assert_eq!(polys.len(), 2);
                assert_eq!(polys[1].len(), 2);
            }
            _ => unreachable!(),
        }
        let err = OperatorSet::parse_custom("t", "1 0 1 0\n\n0 1 1 0\n0 1 2 0\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateMode { line: 4, .. }));
        assert!(matches!(OperatorSet::parse_custom("t", "\n# nothing\n"), Err(Error::EmptySet)));
        assert!(OperatorSet::from_arg("bogus").is_err());
        assert_eq!(OperatorSet::from_arg("FN").unwrap(), OperatorSet::Fn);
    }

    #[test]
    fn small_go_theorem() {
        let lvl = ChernLevel::new(1).unwrap();
        let b = HermiteBasis::new(12).unwrap();
        let a = set_commutant(&OperatorSet::Fn, lvl, &b, 3, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(a.entry.estimated_dim, 1);
        assert!(a.kernel_distance(Mat::<Complex64>::identity(10, 10).as_ref()).unwrap() < 1e-12);
    }

    #[test]
    fn reducibility_at_level_two() {
        let lvl = ChernLevel::new(2).unwrap();
        let b = Arc::new(HermiteBasis::new(10).unwrap());
        let cb = HermiteBasis::new(12).unwrap();
        let rep = reducibility_check(lvl, &b, &cb, DEFAULT_THRESHOLD).unwrap();
        assert!(rep.block_diagonal);
        assert!(rep.projector_residuals.iter().all(|(_, r)| *r <= 1e-12));
        assert!(rep.commutant.estimated_dim >= 2);
        assert!(rep.block_projector_kernel_residuals.iter().all(|r| *r < 1e-12));
    }

    #[test]
    fn degree_rule_keeps_problem_small() {
        for n in [1, 2, 3, -3, 7] {
            let lvl = ChernLevel::new(n).unwrap();
            let d = reducibility_degree(lvl);
            let m = lvl.components() * (d - default_margin(d) + 1);
            assert!(m <= 40, "N={n} D={d} M'={m}");
        }
    }
}
