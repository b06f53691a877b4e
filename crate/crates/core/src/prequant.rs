//! The prequantization map `f ↦ Q_N(f)` on trigonometric polynomials.
//!
//! On the grid, `Q_N(f) = (1/2πiN)(f_x (∂_y − 2πiNx) − f_y ∂_x) + f`. In Zak
//! coordinates a monomial `e_{m,n}` moves component `r` to `r' = (r − n) mod |N|`
//! with an integer shift `t = (r − n − r')/N`, and acts on `ψ_r` as
//!
//! ```text
//! ψ ↦ e^{2πim(v−t)} [ (1 − 2πim(v − t + r/N)) ψ(v − t) − (n/N) ψ'(v − t) ]
//! ```
//!
//! Each block is projected onto the Hermite basis by Gauss-Hermite quadrature.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use faer::{Mat, MatRef};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermite::{hermite_functions, interior_indices, HermiteBasis, LineOperator, Primitive, Truncated};
use crate::trigpoly::{ChernLevel, FourierMode, TrigPoly};
use crate::zakspace::{GridSection, ZakSection};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// A truncated operator on `H_N`: `|N| × |N|` blocks over a shared Hermite basis.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    level: ChernLevel,
    basis: Arc<HermiteBasis>,
    matrix: Mat<Complex64>,
    label: String,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    #[serde(rename = "N")]
    n: i64,
    #[serde(rename = "D")]
    d: usize,
    working_degree: usize,
    #[serde(rename = "Q")]
    q: usize,
    f: &'a str,
}

impl OperatorMatrix {
    /// Wraps a matrix; panics if it is not `|N|·dim` square.
    pub fn from_parts(level: ChernLevel, basis: &Arc<HermiteBasis>, matrix: Mat<Complex64>, label: impl Into<String>) -> Self {
        let size = level.components() * basis.dim();
        assert!(
            matrix.nrows() == size && matrix.ncols() == size,
            "operator matrix must be {size}x{size}"
        );
        OperatorMatrix {
            level,
            basis: Arc::clone(basis),
            matrix,
            label: label.into(),
        }
    }

    pub fn identity(level: ChernLevel, basis: &Arc<HermiteBasis>) -> Self {
        let size = level.components() * basis.dim();
        OperatorMatrix::from_parts(level, basis, Mat::identity(size, size), "I")
    }

    /// The same line operator in every Zak component.
    pub fn block_diagonal(level: ChernLevel, basis: &Arc<HermiteBasis>, op: &LineOperator, label: impl Into<String>) -> Self {
        let dim = basis.dim();
        let line = op.matrix();
        let size = level.components() * dim;
        let m = Mat::from_fn(size, size, |i, j| if i / dim == j / dim { line[(i % dim, j % dim)] } else { ZERO });
        OperatorMatrix::from_parts(level, basis, m, label)
    }

    pub fn level(&self) -> ChernLevel {
        self.level
    }

    pub fn basis_arc(&self) -> &Arc<HermiteBasis> {
        &self.basis
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn matrix(&self) -> MatRef<'_, Complex64> {
        self.matrix.as_ref()
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    fn derive(&self, matrix: Mat<Complex64>, label: String) -> Self {
        OperatorMatrix {
            level: self.level,
            basis: Arc::clone(&self.basis),
            matrix,
            label,
        }
    }

    fn check(&self, rhs: &OperatorMatrix) -> Result<()> {
        if self.level != rhs.level {
            return Err(Error::LevelMismatch {
                left: self.level.get(),
                right: rhs.level.get(),
            });
        }
        if self.size() != rhs.size() || self.basis.degree() != rhs.basis.degree() {
            return Err(Error::ShapeMismatch(format!(
                "{} ({}x{}) vs {} ({}x{})",
                self.label,
                self.size(),
                self.size(),
                rhs.label,
                rhs.size(),
                rhs.size()
            )));
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Self {
        self.derive(self.matrix.adjoint().to_owned(), format!("{}†", self.label))
    }

    pub fn compose(&self, rhs: &OperatorMatrix) -> Result<Self> {
        self.check(rhs)?;
        Ok(self.derive(&self.matrix * &rhs.matrix, format!("{}·{}", self.label, rhs.label)))
    }

    pub fn add(&self, rhs: &OperatorMatrix) -> Result<Self> {
        self.check(rhs)?;
        Ok(self.derive(&self.matrix + &rhs.matrix, format!("{}+{}", self.label, rhs.label)))
    }

    pub fn sub(&self, rhs: &OperatorMatrix) -> Result<Self> {
        self.check(rhs)?;
        Ok(self.derive(&self.matrix - &rhs.matrix, format!("{}-{}", self.label, rhs.label)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let n = self.size();
        self.derive(Mat::from_fn(n, n, |i, j| self.matrix[(i, j)] * s), format!("({s})·{}", self.label))
    }

    pub fn commutator(&self, rhs: &OperatorMatrix) -> Result<Self> {
        self.check(rhs)?;
        let m = &self.matrix * &rhs.matrix - &rhs.matrix * &self.matrix;
        Ok(self.derive(m, format!("[{},{}]", self.label, rhs.label)))
    }

    pub fn apply(&self, s: &ZakSection) -> Result<ZakSection> {
        if s.level() != self.level {
            return Err(Error::LevelMismatch {
                left: self.level.get(),
                right: s.level().get(),
            });
        }
        if s.coeffs().len() != self.size() {
            return Err(Error::ShapeMismatch("section and operator live on different bases".into()));
        }
        let v = s.coeffs();
        let out = (0..self.size())
            .map(|i| (0..self.size()).map(|j| self.matrix[(i, j)] * v[j]).sum())
            .collect();
        ZakSection::from_coeffs(self.level, &self.basis, out)
    }

    /// True when every entry outside the diagonal `r` blocks is exactly zero.
    pub fn is_block_diagonal(&self) -> bool {
        let dim = self.basis.dim();
        let n = self.size();
        (0..n).all(|j| (0..n).all(|i| i / dim == j / dim || self.matrix[(i, j)] == ZERO))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        let n = self.size();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max(self.matrix[(i, j)].norm());
            }
        }
        worst
    }

    /// Compression onto degrees `<= D − margin` in every block.
    pub fn compressed(&self, margin: usize) -> Result<Mat<Complex64>> {
        let idx = interior_indices(&self.basis, self.level.components(), margin)?;
        Ok(Mat::from_fn(idx.len(), idx.len(), |i, j| self.matrix[(idx[i], idx[j])]))
    }

    /// Dense CSV with header `row,col,re,im`.
    pub fn to_csv(&self) -> String {
        let n = self.size();
        let mut out = String::from("row,col,re,im\n");
        for i in 0..n {
            for j in 0..n {
                let v = self.matrix[(i, j)];
                let _ = writeln!(out, "{i},{j},{},{}", v.re, v.im);
            }
        }
        out
    }

    pub fn sidecar_json(&self) -> String {
        let side = Sidecar {
            n: self.level.get(),
            d: self.basis.degree(),
            working_degree: self.basis.working_degree(),
            q: self.basis.quad_order(),
            f: &self.label,
        };
        serde_json::to_string_pretty(&side).expect("sidecar serializes")
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        std::fs::write(&json, self.sidecar_json()).map_err(|e| Error::io(&json, e))?;
        Ok(vec![csv, json])
    }
}

impl Truncated for OperatorMatrix {
    fn basis(&self) -> &HermiteBasis {
        &self.basis
    }
    fn blocks(&self) -> usize {
        self.level.components()
    }
    fn matrix(&self) -> MatRef<'_, Complex64> {
        self.matrix.as_ref()
    }
}

/// Target component and integer shift of column block `r` under `e_{m,n}`.
pub fn block_target(level: ChernLevel, n: i64, r: usize) -> (usize, i64) {
    let comps = level.components() as i64;
    let r = r as i64;
    let target = (r - n).rem_euclid(comps);
    (target as usize, (r - n - target) / level.get())
}

/// Rows `a <= max_row`, columns `b <= max_col` of every block of `Q_N(e_{m,n})`.
///
/// The result is `|N|(max_row+1) × |N|(max_col+1)`, block `(r', r)` at
/// offset `(r'(max_row+1), r(max_col+1))`.
pub fn monomial_window(level: ChernLevel, basis: &HermiteBasis, mode: FourierMode, max_row: usize, max_col: usize) -> Mat<Complex64> {
    let comps = level.components();
    let (rows, cols) = (max_row + 1, max_col + 1);
    let mut out = Mat::<Complex64>::zeros(comps * rows, comps * cols);
    if mode == FourierMode::CONSTANT {
        for r in 0..comps {
            for d in 0..rows.min(cols) {
                out[(r * rows + d, r * cols + d)] = ONE;
            }
        }
        return out;
    }
    let big_n = level.as_f64();
    let (m, n) = (mode.m as f64, mode.n as f64);
    let q = basis.quad_order();
    let mut samples = Mat::<Complex64>::zeros(q, cols);
    for r in 0..comps {
        let (target, t) = block_target(level, mode.n, r);
        let t = t as f64;
        let offset = r as f64 / big_n;
        for (i, &x) in basis.nodes().iter().enumerate() {
            let v = x - t;
            let h = hermite_functions(cols, v);
            let phase = Complex64::cis(2.0 * PI * m * v);
            let mult = phase * Complex64::new(1.0, -2.0 * PI * m * (v + offset));
            let dcoef = phase * (n / big_n);
            for b in 0..cols {
                let dh = (b as f64 / 2.0).sqrt() * if b > 0 { h[b - 1] } else { 0.0 } - ((b + 1) as f64 / 2.0).sqrt() * h[b + 1];
                samples[(i, b)] = mult * h[b] - dcoef * dh;
            }
        }
        let block = basis.project(max_row, samples.as_ref());
        for b in 0..cols {
            for a in 0..rows {
                out[(target * rows + a, r * cols + b)] = block[(a, b)];
            }
        }
    }
    out
}

/// The full matrix of `Q_N(e_{m,n})` on the working basis.
pub fn monomial_block(level: ChernLevel, basis: &Arc<HermiteBasis>, mode: FourierMode) -> OperatorMatrix {
    let w = basis.working_degree();
    OperatorMatrix::from_parts(level, basis, monomial_window(level, basis, mode, w, w), format!("Q(e{mode})"))
}

/// Window of `Q_N(f)`; terms are summed in mode order.
pub fn assemble_window(level: ChernLevel, basis: &HermiteBasis, f: &TrigPoly, max_row: usize, max_col: usize) -> Mat<Complex64> {
    let comps = level.components();
    let mut out = Mat::<Complex64>::zeros(comps * (max_row + 1), comps * (max_col + 1));
    for (mode, c) in f.terms() {
        let block = monomial_window(level, basis, mode, max_row, max_col);
        out += Mat::from_fn(block.nrows(), block.ncols(), |i, j| block[(i, j)] * c);
    }
    out
}

/// `Q_N(f)` on the working basis.
pub fn assemble(level: ChernLevel, basis: &Arc<HermiteBasis>, f: &TrigPoly) -> OperatorMatrix {
    let w = basis.working_degree();
    OperatorMatrix::from_parts(level, basis, assemble_window(level, basis, f, w, w), format!("Q({f})"))
}

/// The Heisenberg generators `(X̂, Ŷ, Ẑ)` in Zak coordinates.
///
/// Block `r` of `X̂` is `−(N v + r)`, `Ŷ = (i/2π) d/dv` in every block, and
/// `Ẑ = (iN/2π) I`.
pub fn heisenberg_ops(level: ChernLevel, basis: &Arc<HermiteBasis>) -> (OperatorMatrix, OperatorMatrix, OperatorMatrix) {
    let dim = basis.dim();
    let comps = level.components();
    let size = comps * dim;
    let big_n = level.as_f64();
    let pos = basis.primitive(Primitive::Position);
    let pos = pos.matrix();
    let x = Mat::from_fn(size, size, |i, j| {
        if i / dim != j / dim {
            return ZERO;
        }
        let (a, b) = (i % dim, j % dim);
        let diag = if a == b { (i / dim) as f64 } else { 0.0 };
        -(pos[(a, b)] * big_n + diag)
    });
    let deriv = basis.primitive(Primitive::Derivative);
    let y = OperatorMatrix::block_diagonal(level, basis, &deriv.scale(Complex64::new(0.0, 0.5 / PI)), "Y");
    let z = OperatorMatrix::identity(level, basis).scale(Complex64::new(0.0, big_n / (2.0 * PI)));
    (
        OperatorMatrix::from_parts(level, basis, x, "X"),
        y,
        z.with_label("Z"),
    )
}

/// Interior Dirac residual of one pair of monomials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairResidual {
    pub f: FourierMode,
    pub g: FourierMode,
    pub residual: f64,
}

/// Monomials `e_{m,n}` with `|m|, |n| <= max_freq`, in mode order.
pub fn monomials_up_to(max_freq: i64) -> Vec<FourierMode> {
    let mut out = Vec::new();
    for m in -max_freq..=max_freq {
        for n in -max_freq..=max_freq {
            out.push(FourierMode::new(m, n));
        }
    }
    out
}

/// Largest `Q(f)` reach in phase space for monomials of frequency `<= max_freq`.
pub fn monomial_reach(level: ChernLevel, max_freq: i64) -> f64 {
    let shift = (max_freq as f64 / level.as_f64().abs()).ceil() + 1.0;
    2.0 * PI * max_freq as f64 + shift
}

/// `max |Q({f,g}) − 2πi[Q(f),Q(g)]|` over the interior, for every unordered pair of
/// monomials with frequencies `<= max_freq`.
///
/// Only the interior rows of `Q(f)` and the interior columns of `Q(g)` enter the
/// product, so the working basis must carry a guard wide enough that `Q(g)` maps
/// the interior inside it (see [`crate::hermite::dealias_guard`]).
pub fn dirac_sweep(level: ChernLevel, basis: &HermiteBasis, max_freq: i64, margin: usize) -> Result<Vec<PairResidual>> {
    interior_indices(basis, 1, margin)?;
    let k = basis.degree() - margin;
    let w = basis.working_degree();
    let modes = monomials_up_to(max_freq);
    let rows: Vec<Mat<Complex64>> = modes.iter().map(|&md| monomial_window(level, basis, md, k, w)).collect();
    let cols: Vec<Mat<Complex64>> = modes.iter().map(|&md| monomial_window(level, basis, md, w, k)).collect();
    let mut bracket_cache: HashMap<FourierMode, Mat<Complex64>> = HashMap::new();
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let mut out = Vec::new();
    for i in 0..modes.len() {
        for j in i..modes.len() {
            let (f, g) = (modes[i], modes[j]);
            let comm = &rows[i] * &cols[j] - &rows[j] * &cols[i];
            let bracket = TrigPoly::monomial(f.m, f.n).poisson_bracket(&TrigPoly::monomial(g.m, g.n), level);
            let size = comm.nrows();
            let mut residual = 0.0f64;
            let coeff = bracket.coeff(f + g);
            let target = bracket_cache
                .entry(f + g)
                .or_insert_with(|| monomial_window(level, basis, f + g, k, k));
            for c in 0..size {
                for r in 0..size {
                    let lhs = if bracket.is_zero() { ZERO } else { target[(r, c)] * coeff };
                    residual = residual.max((lhs - two_pi_i * comm[(r, c)]).norm());
                }
            }
            out.push(PairResidual { f, g, residual });
        }
    }
    Ok(out)
}

/// Direct grid evaluation of `Q_N(f)φ`.
pub fn grid_apply(f: &TrigPoly, phi: &GridSection) -> GridSection {
    let n = phi.level().as_f64();
    let dy = phi.d_dy();
    let dx = phi.d_dx();
    let (fx, fy) = (f.dx(), f.dy());
    let (gx, gy) = phi.resolution();
    let mut vals = Vec::with_capacity((gx + 1) * (gy + 1));
    let pref = Complex64::new(0.0, -1.0 / (2.0 * PI * n));
    for i in 0..=gx {
        for j in 0..=gy {
            let (x, y) = (phi.x(i), phi.y(j));
            let v = phi.at(i, j);
            let cov_y = dy.at(i, j) - Complex64::new(0.0, 2.0 * PI * n * x) * v;
            let w = pref * (fx.evaluate(x, y) * cov_y - fy.evaluate(x, y) * dx.at(i, j)) + f.evaluate(x, y) * v;
            vals.push(w);
        }
    }
    phi.with_values(vals)
}

/// Direct grid evaluation of `(X̂φ, Ŷφ)`.
pub fn grid_heisenberg(phi: &GridSection) -> (GridSection, GridSection) {
    let n = phi.level().as_f64();
    let dy = phi.d_dy();
    let dx = phi.d_dx();
    let inv = Complex64::new(0.0, -0.5 / PI);
    let xphi = phi.map(|x, _, v| v * x);
    let x = dy.zip_with(&xphi, |d, xv| d * inv - xv * n).expect("same shape");
    let y = dx.map(|_, _, d| -d * inv);
    (x, y)
}

/// The two observables of the torus coordinates, which do not quantize on `L_N`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum BadOperator {
    /// `(1/2πiN) ∂_y`
    QX,
    /// `−(1/2πiN)(∂_x − 2πiNy)`
    QY,
}

/// Quasi-periodicity residual of the naive operator applied to the synthesized `sample`.
pub fn bad_operator_residual(sample: &ZakSection, which: BadOperator, grid: (usize, usize), window: usize) -> Result<f64> {
    let phi = crate::zakspace::synthesize(sample, grid.0, grid.1, window)?;
    let n = phi.level().as_f64();
    let pref = Complex64::new(0.0, -1.0 / (2.0 * PI * n));
    let out = match which {
        BadOperator::QX => phi.d_dy().map(|_, _, d| pref * d),
        BadOperator::QY => {
            let ny = phi.map(|_, y, v| v * Complex64::new(0.0, 2.0 * PI * n * y));
            phi.d_dx().zip_with(&ny, |d, c| -pref * (d - c))?
        }
    };
    Ok(crate::zakspace::quasiperiodicity_residual(&out))
}

/// `Q_N(f) s`, assembling only the columns up to the top nonzero degree of `s`.
pub fn apply_assembled(f: &TrigPoly, s: &ZakSection) -> Result<ZakSection> {
    let (level, basis) = (s.level(), s.basis());
    let top = s.effective_degree();
    let dim = basis.dim();
    let comps = level.components();
    let win = assemble_window(level, basis, f, dim - 1, top);
    let mut out = vec![ZERO; comps * dim];
    for r in 0..comps {
        for (b, &c) in s.component(r)[..=top].iter().enumerate() {
            if c == ZERO {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += win[(i, r * (top + 1) + b)] * c;
            }
        }
    }
    ZakSection::from_coeffs(level, basis, out)
}

/// Quasi-periodicity residual of `Q_N(f)` applied to `sample` through the matrix path.
pub fn assembled_output_residual(f: &TrigPoly, sample: &ZakSection, grid: (usize, usize), window: usize) -> Result<f64> {
    let out = apply_assembled(f, sample)?;
    let phi = crate::zakspace::synthesize(&out, grid.0, grid.1, window)?;
    Ok(crate::zakspace::quasiperiodicity_residual(&phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{interior_compare, interior_norm};
    use crate::zakspace::synthesize;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(n: i64, d: usize, guard: usize) -> (ChernLevel, Arc<HermiteBasis>) {
        (ChernLevel::new(n).unwrap(), Arc::new(HermiteBasis::with_guard(d, guard).unwrap()))
    }

    #[test]
    fn constant_is_identity_exactly() {
        let (lvl, b) = setup(2, 10, 0);
        let q = assemble(lvl, &b, &TrigPoly::one());
        assert_eq!(q.matrix(), OperatorMatrix::identity(lvl, &b).matrix());
    }

    #[test]
    fn n1_x_monomial_is_multiplier() {
        let (lvl, b) = setup(1, 20, 0);
        let q = monomial_block(lvl, &b, FourierMode::new(1, 0));
        let f = |v: f64| Complex64::cis(2.0 * PI * v) * Complex64::new(1.0, -2.0 * PI * v);
        let expected = b.primitive(Primitive::Multiplier(&f));
        let e = OperatorMatrix::block_diagonal(lvl, &b, &expected, "mult");
        assert!(interior_compare(&q, &e, 1).unwrap() < 1e-12);
    }

    #[test]
    fn n1_y_monomial_is_shifted_first_order() {
        let (lvl, b) = setup(1, 20, 0);
        let q = monomial_block(lvl, &b, FourierMode::new(0, 1));
        let shift = b.primitive(Primitive::Shift(-1.0));
        let deriv = b.primitive(Primitive::Derivative);
        let expected = LineOperator::identity(&b).sub(&deriv).compose(&shift);
        let e = OperatorMatrix::block_diagonal(lvl, &b, &expected, "e");
        // products of truncations are accurate only well inside the basis
        assert!(interior_compare(&q, &e, 8).unwrap() < 1e-9);
    }

    #[test]
    fn f_n_modes_are_block_diagonal() {
        let (lvl, b) = setup(3, 8, 0);
        for f in [TrigPoly::monomial(1, 3), TrigPoly::monomial(-2, -3), TrigPoly::cos(1, 0)] {
            assert!(assemble(lvl, &b, &f).is_block_diagonal());
        }
        assert!(!assemble(lvl, &b, &TrigPoly::monomial(0, 1)).is_block_diagonal());
    }

    #[test]
    fn linearity() {
        let (lvl, b) = setup(2, 10, 0);
        let (f, g) = (TrigPoly::monomial(1, -1), TrigPoly::cos(0, 2));
        let (alpha, beta) = (Complex64::new(0.5, -1.0), Complex64::new(2.0, 0.25));
        let lhs = assemble(lvl, &b, &(f.scale(alpha) + g.scale(beta)));
        let rhs = assemble(lvl, &b, &f).scale(alpha).add(&assemble(lvl, &b, &g).scale(beta)).unwrap();
        assert!(interior_compare(&lhs, &rhs, 1).unwrap() < 1e-13);
    }

    #[test]
    fn adjoint_of_conjugate() {
        let (lvl, b) = setup(2, 32, 0);
        for f in [TrigPoly::monomial(2, 0), TrigPoly::monomial(1, 1), TrigPoly::monomial(0, -2)] {
            let a = assemble(lvl, &b, &f);
            let ac = assemble(lvl, &b, &f.conj());
            assert!(interior_compare(&ac, &a.adjoint(), 16).unwrap() < 1e-8);
        }
    }

    #[test]
    fn heisenberg_relations() {
        for n in [1, 2, -3] {
            let (lvl, b) = setup(n, 24, 0);
            let (x, y, z) = heisenberg_ops(lvl, &b);
            let xy = x.commutator(&y).unwrap();
            assert!(interior_compare(&xy, &z, 1).unwrap() < 1e-12);
            assert!(interior_norm(&x.commutator(&z).unwrap(), 1).unwrap() < 1e-14);
        }
    }

    #[test]
    fn dirac_small_sweep() {
        let lvl = ChernLevel::new(2).unwrap();
        let reach = monomial_reach(lvl, 1);
        let guard = crate::hermite::dealias_guard(24, 12, reach);
        let b = HermiteBasis::with_guard(24, guard).unwrap();
        let worst = dirac_sweep(lvl, &b, 1, 12)
            .unwrap()
            .iter()
            .map(|p| p.residual)
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn grid_oracle_agrees() {
        let lvl = ChernLevel::new(2).unwrap();
        let guard = crate::hermite::dealias_guard(40, 32, monomial_reach(lvl, 2));
        let b = Arc::new(HermiteBasis::with_guard(40, guard).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = ZakSection::random_tail_light(lvl, &b, 8, &mut rng);
        let phi = synthesize(&s, 96, 96, 24).unwrap();
        for mode in [FourierMode::new(1, 0), FourierMode::new(0, 1), FourierMode::new(-1, 2)] {
            let f = TrigPoly::monomial(mode.m, mode.n);
            let direct = grid_apply(&f, &phi);
            let out = apply_assembled(&f, &s).unwrap();
            let full = assemble(lvl, &b, &f).apply(&s).unwrap();
            assert!(out.max_diff_upto(&full, b.working_degree()).unwrap() < 1e-13);
            let via = synthesize(&out, 96, 96, out.required_window()).unwrap();
            let err = direct.max_abs_diff(&via).unwrap();
            assert!(err < 1e-6, "{mode} {err}");
        }
    }

    #[test]
    fn heisenberg_intertwines_with_grid() {
        let (lvl, b) = setup(2, 32, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = ZakSection::random_tail_light(lvl, &b, 8, &mut rng);
        let phi = synthesize(&s, 96, 96, 12).unwrap();
        let (gx, gy) = grid_heisenberg(&phi);
        let (x, y, _) = heisenberg_ops(lvl, &b);
        let via_x = synthesize(&x.apply(&s).unwrap(), 96, 96, 12).unwrap();
        let via_y = synthesize(&y.apply(&s).unwrap(), 96, 96, 12).unwrap();
        assert!(gx.max_abs_diff(&via_x).unwrap() < 1e-8);
        assert!(gy.max_abs_diff(&via_y).unwrap() < 1e-8);
    }

    #[test]
    fn bad_operators_leave_the_space() {
        let lvl = ChernLevel::new(1).unwrap();
        let b = Arc::new(HermiteBasis::with_guard(24, crate::hermite::dealias_guard(24, 24, monomial_reach(lvl, 1))).unwrap());
        let h0 = ZakSection::basis_function(lvl, &b, 0, 0);
        for which in [BadOperator::QX, BadOperator::QY] {
            assert!(bad_operator_residual(&h0, which, (64, 64), 8).unwrap() > 0.1);
        }
        let ok = assembled_output_residual(&TrigPoly::monomial(1, 0), &h0, (64, 64), 20).unwrap();
        assert!(ok < 1e-8, "{ok}");
    }

    #[test]
    fn csv_shape() {
        let (lvl, b) = setup(1, 1, 0);
        let csv = OperatorMatrix::identity(lvl, &b).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "row,col,re,im");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "0,0,1,0");
    }
}
