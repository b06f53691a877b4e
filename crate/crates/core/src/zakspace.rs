//! The prequantum Hilbert space `H_N` of quasi-periodic sections.
//!
//! Sections satisfy `φ(x+m, y+n) = e^{2πiNmy} φ(x, y)`. Expanding in `y`,
//! `φ(x,y) = Σ_j c_j(x) e^{-2πijy}` with `c_{j}(x+1) = c_{j+N}(x)`, so every
//! section is determined by `|N|` functions on the line,
//! `ψ_r(x + k) = c_{r+kN}(x)` for `r = 0..|N|`. A [`ZakSection`] stores the
//! Hermite coefficients of those `ψ_r`; a [`GridSection`] stores samples of
//! `φ` on the unit square, including the `x = 1` column and `y = 1` row.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::hermite::{hermite_functions, HermiteBasis};
use crate::prequant::OperatorMatrix;
use crate::trigpoly::ChernLevel;

/// Hermite-coefficient representation of a section: `|N|` blocks of length `dim`.
#[derive(Clone, Debug)]
pub struct ZakSection {
    level: ChernLevel,
    basis: Arc<HermiteBasis>,
    coeffs: Vec<Complex64>,
}

impl ZakSection {
    pub fn zeros(level: ChernLevel, basis: &Arc<HermiteBasis>) -> Self {
        ZakSection {
            level,
            basis: Arc::clone(basis),
            coeffs: vec![Complex64::new(0.0, 0.0); level.components() * basis.dim()],
        }
    }

    pub fn from_coeffs(level: ChernLevel, basis: &Arc<HermiteBasis>, coeffs: Vec<Complex64>) -> Result<Self> {
        let expected = level.components() * basis.dim();
        if coeffs.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "section needs {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(ZakSection {
            level,
            basis: Arc::clone(basis),
            coeffs,
        })
    }

    /// Builds a section from per-component coefficient lists; shorter lists are zero-padded.
    pub fn from_components(level: ChernLevel, basis: &Arc<HermiteBasis>, components: &[Vec<Complex64>]) -> Result<Self> {
        if components.len() != level.components() {
            return Err(Error::ShapeMismatch(format!(
                "level {level} needs {} components, got {}",
                level.components(),
                components.len()
            )));
        }
        let dim = basis.dim();
        let mut s = ZakSection::zeros(level, basis);
        for (r, comp) in components.iter().enumerate() {
            if comp.len() > dim {
                return Err(Error::ShapeMismatch(format!(
                    "component {r} has {} coefficients, basis holds {dim}",
                    comp.len()
                )));
            }
            s.coeffs[r * dim..r * dim + comp.len()].copy_from_slice(comp);
        }
        Ok(s)
    }

    /// A single basis function `h_degree` in component `r`.
    pub fn basis_function(level: ChernLevel, basis: &Arc<HermiteBasis>, r: usize, degree: usize) -> Self {
        let mut s = ZakSection::zeros(level, basis);
        s.coeffs[r * basis.dim() + degree] = Complex64::new(1.0, 0.0);
        s
    }

    /// Random unit section with coefficients supported on degrees `<= max_degree`.
    pub fn random_tail_light(level: ChernLevel, basis: &Arc<HermiteBasis>, max_degree: usize, rng: &mut impl Rng) -> Self {
        let dim = basis.dim();
        let top = max_degree.min(dim - 1);
        let mut s = ZakSection::zeros(level, basis);
        for r in 0..level.components() {
            for d in 0..=top {
                s.coeffs[r * dim + d] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let norm = s.norm_sqr().sqrt();
        s.scale(Complex64::new(1.0 / norm, 0.0))
    }

    pub fn level(&self) -> ChernLevel {
        self.level
    }

    pub fn basis(&self) -> &Arc<HermiteBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn component(&self, r: usize) -> &[Complex64] {
        let dim = self.basis.dim();
        &self.coeffs[r * dim..(r + 1) * dim]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        ZakSection {
            level: self.level,
            basis: Arc::clone(&self.basis),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Largest coefficient difference over degrees `<= max_degree` in every component.
    pub fn max_diff_upto(&self, other: &ZakSection, max_degree: usize) -> Result<f64> {
        check_compatible(self, other)?;
        let dim = self.basis.dim();
        let top = max_degree.min(dim - 1);
        let mut worst = 0.0f64;
        for r in 0..self.level.components() {
            for d in 0..=top {
                let i = r * dim + d;
                worst = worst.max((self.coeffs[i] - other.coeffs[i]).norm());
            }
        }
        Ok(worst)
    }

    /// Fraction of the energy carried by degrees `> working − 8`.
    pub fn tail_fraction(&self) -> f64 {
        let dim = self.basis.dim();
        let cut = dim.saturating_sub(8);
        let total = self.norm_sqr();
        if total == 0.0 {
            return 0.0;
        }
        let tail: f64 = (0..self.level.components())
            .flat_map(|r| (cut..dim).map(move |d| r * dim + d))
            .map(|i| self.coeffs[i].norm_sqr())
            .sum();
        tail / total
    }

    /// Highest degree carrying a nonzero coefficient in any component.
    pub fn effective_degree(&self) -> usize {
        let dim = self.basis.dim();
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(i, _)| i % dim)
            .max()
            .unwrap_or(0)
    }

    /// Smallest synthesis window that captures the section to roundoff:
    /// `h_d` is negligible beyond `√(2d+1) + 8`.
    pub fn required_window(&self) -> usize {
        let d = self.effective_degree() as f64;
        ((2.0 * d + 1.0).sqrt() + 8.0).ceil() as usize
    }

    /// CSV with header `r,degree,re,im`.
    pub fn to_csv(&self) -> String {
        let dim = self.basis.dim();
        let mut out = String::from("r,degree,re,im\n");
        for (i, c) in self.coeffs.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", i / dim, i % dim, c.re, c.im);
        }
        out
    }
}

fn check_compatible(a: &ZakSection, b: &ZakSection) -> Result<()> {
    if a.level != b.level {
        return Err(Error::LevelMismatch {
            left: a.level.get(),
            right: b.level.get(),
        });
    }
    if a.coeffs.len() != b.coeffs.len() {
        return Err(Error::ShapeMismatch("sections live on different bases".into()));
    }
    Ok(())
}

/// `⟨a, b⟩ = Σ_r ⟨ψ_r^a, ψ_r^b⟩`, conjugate-linear in `a`.
pub fn inner_product(a: &ZakSection, b: &ZakSection) -> Result<Complex64> {
    check_compatible(a, b)?;
    Ok(a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x.conj() * y).sum())
}

/// Samples of a section on the unit square, endpoints included.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSection {
    level: ChernLevel,
    gx: usize,
    gy: usize,
    values: Vec<Complex64>,
}

/// Grid validity: `gy` a positive multiple of `4|N|`, `gx >= 4`.
pub fn validate_grid(level: ChernLevel, gx: usize, gy: usize) -> Result<()> {
    let quantum = 4 * level.components();
    if gy == 0 || gy % quantum != 0 {
        return Err(Error::InvalidGrid(format!(
            "G_y = {gy} must be a positive multiple of 4|N| = {quantum}"
        )));
    }
    if gx < 4 {
        return Err(Error::InvalidGrid(format!("G_x = {gx} is too small")));
    }
    Ok(())
}

impl GridSection {
    /// Samples `f(x, y)` at `x = i/gx`, `y = j/gy` for `i <= gx`, `j <= gy`.
    pub fn from_fn(level: ChernLevel, gx: usize, gy: usize, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        validate_grid(level, gx, gy)?;
        let mut values = Vec::with_capacity((gx + 1) * (gy + 1));
        for i in 0..=gx {
            for j in 0..=gy {
                values.push(f(i as f64 / gx as f64, j as f64 / gy as f64));
            }
        }
        Ok(GridSection { level, gx, gy, values })
    }

    pub fn level(&self) -> ChernLevel {
        self.level
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.gx, self.gy)
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.gx as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 / self.gy as f64
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * (self.gy + 1) + j]
    }

    fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.values[i * (self.gy + 1) + j] = v;
    }

    pub(crate) fn with_values(&self, values: Vec<Complex64>) -> GridSection {
        assert_eq!(values.len(), self.values.len());
        GridSection { values, ..self.clone() }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Pointwise map `(x, y, φ) ↦ g`.
    pub fn map(&self, f: impl Fn(f64, f64, Complex64) -> Complex64) -> GridSection {
        let mut out = self.clone();
        for i in 0..=self.gx {
            for j in 0..=self.gy {
                out.set(i, j, f(self.x(i), self.y(j), self.at(i, j)));
            }
        }
        out
    }

    /// Pointwise combination of two grids of the same shape.
    pub fn zip_with(&self, other: &GridSection, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<GridSection> {
        if self.level != other.level || self.gx != other.gx || self.gy != other.gy {
            return Err(Error::ShapeMismatch("grid sections differ in level or resolution".into()));
        }
        let mut out = self.clone();
        for (o, (a, b)) in out.values.iter_mut().zip(self.values.iter().zip(&other.values)) {
            *o = f(*a, *b);
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &GridSection) -> Result<f64> {
        let d = self.zip_with(other, |a, b| a - b)?;
        Ok(d.values.iter().map(|v| v.norm()).fold(0.0, f64::max))
    }

    /// `∂/∂y` by FFT along each `x` line (sections are 1-periodic in `y`).
    pub fn d_dy(&self) -> GridSection {
        let (gx, gy) = (self.gx, self.gy);
        let mut out = self.clone();
        let mut line = vec![Complex64::new(0.0, 0.0); gy];
        for i in 0..=gx {
            for (j, slot) in line.iter_mut().enumerate() {
                *slot = self.at(i, j);
            }
            spectral_derivative(&mut line);
            for (j, v) in line.iter().enumerate() {
                out.set(i, j, *v);
            }
            out.set(i, gy, line[0]);
        }
        out
    }

    /// `∂/∂x` of a quasi-periodic section.
    ///
    /// `χ = e^{-2πiNxy} φ` is 1-periodic in `x`, so it is differentiated
    /// spectrally and `∂_x φ = 2πiNy φ + e^{2πiNxy} ∂_x χ`.
    pub fn d_dx(&self) -> GridSection {
        let (gx, gy) = (self.gx, self.gy);
        let n = self.level.as_f64();
        let mut out = self.clone();
        let mut line = vec![Complex64::new(0.0, 0.0); gx];
        for j in 0..=gy {
            let y = self.y(j);
            for (i, slot) in line.iter_mut().enumerate() {
                *slot = Complex64::cis(-2.0 * PI * n * self.x(i) * y) * self.at(i, j);
            }
            spectral_derivative(&mut line);
            for i in 0..=gx {
                let x = self.x(i);
                let dchi = line[i % gx];
                let v = Complex64::new(0.0, 2.0 * PI * n * y) * self.at(i, j) + Complex64::cis(2.0 * PI * n * x * y) * dchi;
                out.set(i, j, v);
            }
        }
        out
    }

    /// CSV with header `x,y,re,im`, row-major in `x`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,re,im\n");
        for i in 0..=self.gx {
            for j in 0..=self.gy {
                let v = self.at(i, j);
                let _ = writeln!(out, "{},{},{},{}", self.x(i), self.y(j), v.re, v.im);
            }
        }
        out
    }
}

/// In-place spectral derivative of one period sampled at `n` equispaced points.
fn spectral_derivative(line: &mut [Complex64]) {
    let n = line.len();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(line);
    for (k, v) in line.iter_mut().enumerate() {
        let signed = if 2 * k < n {
            k as f64
        } else if 2 * k == n {
            0.0
        } else {
            k as f64 - n as f64
        };
        *v *= Complex64::new(0.0, 2.0 * PI * signed / n as f64);
    }
    planner.plan_fft_inverse(n).process(line);
}

/// `φ(x,y) = Σ_r Σ_{|k|<=K} ψ_r(x+k) e^{-2πi(r+kN)y}` sampled on a `gx × gy` grid.
pub fn synthesize(s: &ZakSection, gx: usize, gy: usize, window: usize) -> Result<GridSection> {
    validate_grid(s.level, gx, gy)?;
    if window == 0 {
        return Err(Error::InvalidGrid("window K must be at least 1".into()));
    }
    let comps = s.level.components();
    let n = s.level.get();
    let k_count = 2 * window + 1;
    let twiddle: Vec<Complex64> = (0..gy).map(|p| Complex64::cis(2.0 * PI * p as f64 / gy as f64)).collect();
    let mut values = Vec::with_capacity((gx + 1) * (gy + 1));
    let mut psi = vec![Complex64::new(0.0, 0.0); comps * k_count];
    for i in 0..=gx {
        let x = i as f64 / gx as f64;
        for (ki, k) in (-(window as i64)..=window as i64).enumerate() {
            let h = s.basis.eval(x + k as f64);
            for r in 0..comps {
                psi[r * k_count + ki] = s.component(r).iter().zip(&h).map(|(c, hv)| c * hv).sum();
            }
        }
        for j in 0..=gy {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..comps {
                for (ki, k) in (-(window as i64)..=window as i64).enumerate() {
                    let freq = r as i64 + k * n;
                    let p = (-freq * j as i64).rem_euclid(gy as i64) as usize;
                    acc += psi[r * k_count + ki] * twiddle[p];
                }
            }
            values.push(acc);
        }
    }
    Ok(GridSection {
        level: s.level,
        gx,
        gy,
        values,
    })
}

/// Inverse of [`synthesize`]: `ψ_r(x+k) = ∫₀¹ φ(x,y) e^{2πi(r+kN)y} dy`, then
/// Hermite projection by the trapezoid rule on the samples `v = x_i + k`.
pub fn analyze(g: &GridSection, basis: &Arc<HermiteBasis>, window: usize) -> Result<ZakSection> {
    let (gx, gy) = (g.gx, g.gy);
    let comps = g.level.components();
    let n = g.level.get();
    if window == 0 {
        return Err(Error::InvalidGrid("window K must be at least 1".into()));
    }
    if 2 * comps * (window + 1) > gy {
        return Err(Error::InvalidGrid(format!(
            "G_y = {gy} cannot resolve y-frequencies up to {}",
            comps * (window + 1)
        )));
    }
    let dim = basis.dim();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); comps * dim];
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(gy);
    let mut line = vec![Complex64::new(0.0, 0.0); gy];
    let dv = 1.0 / gx as f64;
    for i in 0..gx {
        for (j, slot) in line.iter_mut().enumerate() {
            *slot = g.at(i, j);
        }
        ifft.process(&mut line);
        let x = i as f64 / gx as f64;
        for k in -(window as i64)..=window as i64 {
            let h = hermite_functions(dim - 1, x + k as f64);
            for r in 0..comps {
                let freq = r as i64 + k * n;
                let sample = line[freq.rem_euclid(gy as i64) as usize] / gy as f64;
                let block = &mut coeffs[r * dim..(r + 1) * dim];
                for (c, hv) in block.iter_mut().zip(&h) {
                    *c += sample * (hv * dv);
                }
            }
        }
    }
    let s = ZakSection::from_coeffs(g.level, basis, coeffs)?;
    let tail = s.tail_fraction();
    if tail > 0.01 {
        return Err(Error::UnderResolved { tail_fraction: tail });
    }
    Ok(s)
}

/// `max_y |φ(1,y) − e^{2πiNy}φ(0,y)| + max_x |φ(x,1) − φ(x,0)|`.
pub fn quasiperiodicity_residual(g: &GridSection) -> f64 {
    let n = g.level.as_f64();
    let x_term = (0..=g.gy)
        .map(|j| (g.at(g.gx, j) - Complex64::cis(2.0 * PI * n * g.y(j)) * g.at(0, j)).norm())
        .fold(0.0, f64::max);
    let y_term = (0..=g.gx)
        .map(|i| (g.at(i, g.gy) - g.at(i, 0)).norm())
        .fold(0.0, f64::max);
    x_term + y_term
}

/// `∫∫_{[0,1)²} conj(a) b` by the trapezoid rule on the grid.
pub fn grid_inner_product(a: &GridSection, b: &GridSection) -> Result<Complex64> {
    if a.level != b.level || a.gx != b.gx || a.gy != b.gy {
        return Err(Error::ShapeMismatch("grid sections differ in level or resolution".into()));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.gx {
        for j in 0..a.gy {
            acc += a.at(i, j).conj() * b.at(i, j);
        }
    }
    Ok(acc / (a.gx * a.gy) as f64)
}

/// Orthogonal projector onto the Zak component `r`.
pub fn block_projector(level: ChernLevel, basis: &Arc<HermiteBasis>, r: usize) -> OperatorMatrix {
    let dim = basis.dim();
    let size = level.components() * dim;
    let m = faer::Mat::from_fn(size, size, |i, j| {
        if i == j && i / dim == r {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    OperatorMatrix::from_parts(level, basis, m, format!("P[r={r}]"))
}

/// Orthogonal projector `H_N → P_N` onto sections of period `1/N` in `y`: the `r = 0` component.
pub fn projector_pn(level: ChernLevel, basis: &Arc<HermiteBasis>) -> OperatorMatrix {
    block_projector(level, basis, 0).with_label("P_N")
}
