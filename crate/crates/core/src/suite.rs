//! Verification suites: configuration, execution and report files.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use faer::Mat;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::commutant::{self, OperatorSet};
use crate::error::{Error, Result};
use crate::hermite::{dealias_guard, quadrature_floor, HermiteBasis, LineOperator, Primitive, Truncated};
use crate::prequant::{self, monomial_reach, monomial_window, monomials_up_to, BadOperator};
use crate::trigpoly::{ChernLevel, FourierMode, TrigPoly};
use crate::zakspace::{self, ZakSection};

/// Run configuration. Every field is optional in a config file; unset fields take defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(rename = "D")]
    pub degree: usize,
    /// Quadrature order; automatic when unset.
    #[serde(rename = "Q")]
    pub quad: Option<usize>,
    /// Guard degrees for product checks; automatic when unset.
    pub guard: Option<usize>,
    /// `[G_x, G_y]`.
    pub grid: [usize; 2],
    /// Synthesis window `K`.
    pub window: usize,
    /// Interior margin for residuals; `D/2` when unset.
    pub margin: Option<usize>,
    /// Interior margin for commutants; `D/4` when unset.
    pub commutant_margin: Option<usize>,
    /// Commutant truncation for the reducibility suite; automatic when unset.
    pub commutant_degree: Option<usize>,
    /// Largest monomial frequency in sweeps.
    pub degree_max: i64,
    /// Truncations for the commutant convergence study.
    pub d_list: Vec<usize>,
    /// Random section pairs in the zak suite.
    pub samples: usize,
    pub seed: u64,
    /// Tolerance overrides, keyed by check family.
    pub thresholds: BTreeMap<String, f64>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 1,
            degree: 48,
            quad: None,
            guard: None,
            grid: [128, 128],
            window: 12,
            margin: None,
            commutant_margin: None,
            commutant_degree: None,
            degree_max: 2,
            d_list: vec![24, 32, 40],
            samples: 20,
            seed: 20240601,
            thresholds: BTreeMap::new(),
            out: PathBuf::from("out"),
        }
    }
}

/// Default tolerances. Keys double as the names accepted in `thresholds`.
pub fn default_thresholds() -> BTreeMap<String, f64> {
    [
        ("dirac", 1e-8),
        ("identity", 0.0),
        ("heisenberg", 1e-10),
        ("heisenberg_central", 1e-14),
        ("zak_isometry", 1e-6),
        ("zak_roundtrip", 1e-8),
        ("zak_intertwining", 1e-8),
        ("identities", 1e-8),
        ("adjoint", 1e-8),
        ("linearity", 1e-13),
        ("oracle", 1e-6),
        ("algebra", 1e-12),
        ("commutant_threshold", commutant::DEFAULT_THRESHOLD),
        ("go_gap", 1e3),
        ("projector", 1e-12),
        ("kernel", 1e-12),
        ("bad_min", 0.1),
        ("good_max", 1e-8),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// A configuration with every automatic value filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedConfig {
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(rename = "D")]
    pub degree: usize,
    #[serde(rename = "Q")]
    pub quad: Option<usize>,
    pub guard: Option<usize>,
    pub grid: [usize; 2],
    pub window: usize,
    pub margin: usize,
    pub commutant_margin: Option<usize>,
    pub commutant_degree: usize,
    pub degree_max: i64,
    pub d_list: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub thresholds: BTreeMap<String, f64>,
    pub out: PathBuf,
}

impl ResolvedConfig {
    pub fn level(&self) -> ChernLevel {
        ChernLevel::new(self.n).expect("validated")
    }

    pub fn tol(&self, key: &str) -> f64 {
        self.thresholds[key]
    }

    /// Basis at `D` with `guard` extra degrees and the configured quadrature.
    pub fn basis(&self, guard: usize) -> Result<Arc<HermiteBasis>> {
        Ok(Arc::new(HermiteBasis::with_options(self.degree, guard, self.quad)?))
    }

    /// Guard for products of monomials up to `degree_max`, or the configured value.
    pub fn product_guard(&self, level: ChernLevel) -> usize {
        self.guard
            .unwrap_or_else(|| dealias_guard(self.degree, self.margin, monomial_reach(level, self.degree_max)))
    }
}

impl RunConfig {
    /// Reads a flat JSON config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }

    /// Validates and fills defaults. `G_y` is rounded up to a multiple of `4|N|`.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let level = ChernLevel::new(self.n).map_err(|_| Error::Config("N must be nonzero".into()))?;
        if self.degree < 4 {
            return Err(Error::Config(format!("D = {} is too small (need at least 4)", self.degree)));
        }
        if let Some(q) = self.quad {
            let floor = quadrature_floor(self.degree);
            if q < floor {
                return Err(Error::QuadratureTooLow {
                    degree: self.degree,
                    quad: q,
                    floor,
                });
            }
        }
        let margin = self.margin.unwrap_or(self.degree / 2);
        if margin == 0 || margin > self.degree {
            return Err(Error::InvalidMargin {
                margin,
                limit: self.degree + 1,
            });
        }
        if let Some(m) = self.commutant_margin {
            if m == 0 || m > self.degree {
                return Err(Error::InvalidMargin {
                    margin: m,
                    limit: self.degree + 1,
                });
            }
        }
        if self.window == 0 {
            return Err(Error::Config("window K must be at least 1".into()));
        }
        if self.degree_max < 0 {
            return Err(Error::Config("degree_max must be nonnegative".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be positive".into()));
        }
        if self.d_list.is_empty() || self.d_list.windows(2).any(|w| w[0] >= w[1]) || self.d_list[0] < 4 {
            return Err(Error::Config(format!(
                "d_list {:?} must be strictly increasing with entries >= 4",
                self.d_list
            )));
        }
        let quantum = 4 * level.components();
        let [gx, gy] = self.grid;
        if gx < 4 || gy == 0 {
            return Err(Error::InvalidGrid(format!("{gx}x{gy}")));
        }
        let gy = gy.div_ceil(quantum) * quantum;
        let mut thresholds = default_thresholds();
        for (k, v) in &self.thresholds {
            if !thresholds.contains_key(k) {
                return Err(Error::Config(format!("unknown threshold `{k}`")));
            }
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::Config(format!("threshold `{k}` must be a nonnegative number")));
            }
            thresholds.insert(k.clone(), *v);
        }
        let commutant_degree = self.commutant_degree.unwrap_or_else(|| commutant::reducibility_degree(level));
        if commutant_degree < 4 {
            return Err(Error::Config("commutant_degree must be at least 4".into()));
        }
        Ok(ResolvedConfig {
            n: self.n,
            degree: self.degree,
            quad: self.quad,
            guard: self.guard,
            grid: [gx, gy],
            window: self.window,
            margin,
            commutant_margin: self.commutant_margin,
            commutant_degree,
            degree_max: self.degree_max,
            d_list: self.d_list.clone(),
            samples: self.samples,
            seed: self.seed,
            thresholds,
            out: self.out.clone(),
        })
    }
}

/// How a residual is compared with its tolerance.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    /// Passes when `value <= tolerance`.
    Le,
    /// Passes when `value >= tolerance`.
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Residual {
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
}

impl Residual {
    pub fn le(check: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Residual {
            check: check.into(),
            value,
            tolerance,
            comparison: Comparison::Le,
        }
    }

    pub fn ge(check: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Residual {
            check: check.into(),
            value,
            tolerance,
            comparison: Comparison::Ge,
        }
    }

    pub fn pass(&self) -> bool {
        match self.comparison {
            Comparison::Le => self.value <= self.tolerance,
            Comparison::Ge => self.value >= self.tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub pass: bool,
    pub residuals: Vec<Residual>,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
    /// Suite-specific structured output.
    pub details: serde_json::Value,
    #[serde(skip)]
    pub wall_time: f64,
}

/// Suite names accepted by [`run_suite`].
pub const SUITES: [&str; 8] = [
    "dirac",
    "heisenberg",
    "zak",
    "prequant-identities",
    "go-theorem",
    "reducibility",
    "bad-operator",
    "all",
];

struct Ctx<'a> {
    cfg: &'a ResolvedConfig,
    out: &'a Path,
    residuals: Vec<Residual>,
    artifacts: Vec<String>,
    details: serde_json::Map<String, serde_json::Value>,
}

impl Ctx<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details
            .insert(key.to_string(), serde_json::to_value(value).expect("details serialize"));
    }
}

/// Runs a suite, writing artifacts into `cfg.out`. Reports are written by [`emit_report`].
pub fn run_suite(name: &str, cfg: &ResolvedConfig) -> Result<SuiteResult> {
    if !SUITES.contains(&name) {
        return Err(Error::Config(format!("unknown suite `{name}`; expected one of {}", SUITES.join(", "))));
    }
    let start = Instant::now();
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let mut ctx = Ctx {
        cfg,
        out: &cfg.out,
        residuals: Vec::new(),
        artifacts: Vec::new(),
        details: serde_json::Map::new(),
    };
    let names: Vec<&str> = if name == "all" { SUITES[..7].to_vec() } else { vec![name] };
    for suite in names {
        match suite {
            "dirac" => dirac(&mut ctx)?,
            "heisenberg" => heisenberg(&mut ctx)?,
            "zak" => zak(&mut ctx)?,
            "prequant-identities" => identities(&mut ctx)?,
            "go-theorem" => go_theorem(&mut ctx)?,
            "reducibility" => reducibility(&mut ctx)?,
            "bad-operator" => bad_operator(&mut ctx)?,
            _ => unreachable!(),
        }
    }
    let pass = ctx.residuals.iter().all(Residual::pass);
    Ok(SuiteResult {
        suite: name.to_string(),
        pass,
        residuals: ctx.residuals,
        artifacts: ctx.artifacts,
        details: serde_json::Value::Object(ctx.details),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn max_entry(m: &Mat<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

fn leading(m: &Mat<Complex64>, k: usize) -> Mat<Complex64> {
    Mat::from_fn(k + 1, k + 1, |i, j| m[(i, j)])
}

fn dirac(ctx: &mut Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let level = cfg.level();
    let basis = cfg.basis(cfg.product_guard(level))?;
    let q1 = prequant::assemble(level, &basis, &TrigPoly::one());
    let size = q1.size();
    let id_defect = max_entry(&(q1.matrix().to_owned() - Mat::<Complex64>::identity(size, size)));
    ctx.residuals.push(Residual::le("q_one_is_identity", id_defect, cfg.tol("identity")));
    let pairs = prequant::dirac_sweep(level, &basis, cfg.degree_max, cfg.margin)?;
    let worst = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
    ctx.residuals.push(Residual::le("dirac_max", worst, cfg.tol("dirac")));
    let mut csv = String::from("f_m,f_n,g_m,g_n,residual\n");
    for p in &pairs {
        let _ = writeln!(csv, "{},{},{},{},{}", p.f.m, p.f.n, p.g.m, p.g.n, p.residual);
    }
    ctx.write("dirac_pairs.csv", &csv)?;
    ctx.detail(
        "dirac",
        serde_json::json!({
            "pairs": pairs.len(),
            "working_degree": basis.working_degree(),
            "quad_order": basis.quad_order(),
        }),
    );
    Ok(())
}

fn heisenberg(ctx: &mut Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let level = cfg.level();
    let basis = cfg.basis(0)?;
    let (x, y, z) = prequant::heisenberg_ops(level, &basis);
    let xy = x.commutator(&y)?;
    let xz = x.commutator(&z)?;
    let yz = y.commutator(&z)?;
    ctx.residuals.push(Residual::le(
        "xy_minus_z",
        crate::hermite::interior_compare(&xy, &z, cfg.margin)?,
        cfg.tol("heisenberg"),
    ));
    ctx.residuals.push(Residual::le(
        "xz",
        crate::hermite::interior_norm(&xz, cfg.margin)?,
        cfg.tol("heisenberg_central"),
    ));
    ctx.residuals.push(Residual::le(
        "yz",
        crate::hermite::interior_norm(&yz, cfg.margin)?,
        cfg.tol("heisenberg_central"),
    ));
    for (op, stem) in [(&x, "heisenberg_x"), (&y, "heisenberg_y"), (&z, "heisenberg_z")] {
        ctx.write(&format!("{stem}.csv"), &op.to_csv())?;
        ctx.write(&format!("{stem}.json"), &op.sidecar_json())?;
    }
    Ok(())
}

fn zak(ctx: &mut Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let level = cfg.level();
    let basis = cfg.basis(0)?;
    let [gx, gy] = cfg.grid;
    let top = cfg.degree - cfg.margin;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (x_op, y_op, _) = prequant::heisenberg_ops(level, &basis);
    let (mut iso, mut round, mut inter) = (0.0f64, 0.0f64, 0.0f64);
    for p in 0..cfg.samples {
        let s = ZakSection::random_tail_light(level, &basis, top.saturating_sub(1), &mut rng);
        let t = ZakSection::random_tail_light(level, &basis, top.saturating_sub(1), &mut rng);
        let ps = zakspace::synthesize(&s, gx, gy, cfg.window)?;
        let pt = zakspace::synthesize(&t, gx, gy, cfg.window)?;
        let grid_ip = zakspace::grid_inner_product(&ps, &pt)?;
        let coeff_ip = zakspace::inner_product(&s, &t)?;
        iso = iso.max((grid_ip - coeff_ip).norm());
        let grid_norm = zakspace::grid_inner_product(&ps, &ps)?;
        iso = iso.max((grid_norm.re - s.norm_sqr()).abs());
        let back = zakspace::analyze(&ps, &basis, cfg.window)?;
        round = round.max(back.max_diff_upto(&s, basis.working_degree())?);
        let (gxs, gys) = prequant::grid_heisenberg(&ps);
        let xs = zakspace::analyze(&gxs, &basis, cfg.window)?;
        let ys = zakspace::analyze(&gys, &basis, cfg.window)?;
        inter = inter.max(xs.max_diff_upto(&x_op.apply(&s)?, top)?);
        inter = inter.max(ys.max_diff_upto(&y_op.apply(&s)?, top)?);
        if p == 0 {
            ctx.write("zak_sample.csv", &s.to_csv())?;
            ctx.write("zak_sample_grid.csv", &ps.to_csv())?;
        }
    }
    ctx.residuals.push(Residual::le("isometry", iso, cfg.tol("zak_isometry")));
    ctx.residuals.push(Residual::le("round_trip", round, cfg.tol("zak_roundtrip")));
    ctx.residuals.push(Residual::le("intertwining", inter, cfg.tol("zak_intertwining")));
    Ok(())
}

/// Checks tied to the level-one operators `A = Q(e^{2πix})`, `B = Q(e^{2πiy})`,
/// plus adjoint, linearity, grid-oracle and bracket-algebra checks at level `N`.
fn identities(ctx: &mut Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let tol = cfg.tol("identities");
    let k = cfg.degree - cfg.margin;
    let one = ChernLevel::new(1)?;
    let basis = cfg.basis(cfg.guard.unwrap_or_else(|| dealias_guard(cfg.degree, cfg.margin, monomial_reach(one, 1))))?;
    let w = basis.working_degree();
    let pos = basis.primitive(Primitive::Position);
    let der = basis.primitive(Primitive::Derivative);
    let id = LineOperator::identity(&basis);
    let c = |v: f64| Complex64::new(v, 0.0);

    let a_cols = monomial_window(one, &basis, FourierMode::new(1, 0), w, k);
    let ata = a_cols.adjoint() * &a_cols;
    let expected = id.add(&pos.compose(&pos).scale(c(4.0 * PI * PI)));
    ctx.residuals.push(Residual::le(
        "a_dagger_a",
        max_entry(&(ata - leading(&expected.matrix().to_owned(), k))),
        tol,
    ));

    let b_cols = monomial_window(one, &basis, FourierMode::new(0, 1), w, k);
    let btb = b_cols.adjoint() * &b_cols;
    let expected = id.sub(&der.compose(&der));
    ctx.residuals.push(Residual::le(
        "b_dagger_b",
        max_entry(&(btb - leading(&expected.matrix().to_owned(), k))),
        tol,
    ));

    let d2 = der.compose(&der);
    let x2 = pos.compose(&pos);
    let lhs = d2.commutator(&x2);
    let rhs = pos.compose(&der).scale(c(4.0)).add(&id.scale(c(2.0)));
    ctx.residuals.push(Residual::le(
        "d2_x2_commutator",
        max_entry(&(leading(&lhs.matrix().to_owned(), k) - leading(&rhs.matrix().to_owned(), k))),
        tol,
    ));

    let a_int = monomial_window(one, &basis, FourierMode::new(1, 0), k, k);
    let skew = &a_int - a_int.adjoint();
    let f = |v: f64| Complex64::new(0.0, 2.0 * ((2.0 * PI * v).sin() - 2.0 * PI * v * (2.0 * PI * v).cos()));
    let mult = basis.primitive(Primitive::Multiplier(&f));
    ctx.residuals.push(Residual::le(
        "a_minus_a_dagger",
        max_entry(&(skew - leading(&mult.matrix().to_owned(), k))),
        tol,
    ));

    let level = cfg.level();
    let lbasis = cfg.basis(0)?;
    let modes = monomials_up_to(cfg.degree_max);
    let mut adj = 0.0f64;
    for &m in &modes {
        let q = monomial_window(level, &lbasis, m, k, k);
        let qc = monomial_window(level, &lbasis, -m, k, k);
        adj = adj.max(max_entry(&(qc - q.adjoint())));
    }
    ctx.residuals.push(Residual::le("adjoint_of_conjugate", adj, cfg.tol("adjoint")));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let f = TrigPoly::random(cfg.degree_max, &mut rng);
    let g = TrigPoly::random(cfg.degree_max, &mut rng);
    let (alpha, beta) = (Complex64::new(0.7, -1.3), Complex64::new(-0.2, 0.9));
    let lhs = prequant::assemble_window(level, &lbasis, &(f.scale(alpha) + g.scale(beta)), k, k);
    let qf = prequant::assemble_window(level, &lbasis, &f, k, k);
    let qg = prequant::assemble_window(level, &lbasis, &g, k, k);
    let rhs = Mat::from_fn(qf.nrows(), qf.ncols(), |i, j| qf[(i, j)] * alpha + qg[(i, j)] * beta);
    let lin = max_entry(&(&lhs - &rhs)) / max_entry(&rhs).max(f64::MIN_POSITIVE);
    ctx.residuals.push(Residual::le("linearity", lin, cfg.tol("linearity")));

    ctx.residuals.push(Residual::le("grid_oracle", oracle(cfg, &mut rng)?, cfg.tol("oracle")));

    let (anti, jac, leib) = algebra_defects(level, 100, 3, &mut rng);
    ctx.residuals.push(Residual::le("bracket_antisymmetry", anti, cfg.tol("algebra")));
    ctx.residuals.push(Residual::le("bracket_jacobi", jac, cfg.tol("algebra")));
    ctx.residuals.push(Residual::le("bracket_leibniz", leib, cfg.tol("algebra")));
    Ok(())
}

/// Largest grid difference between the matrix path and direct evaluation of
/// `Q_N(e_{m,n})` on a random tail-light section, over all monomials up to `degree_max`.
pub fn oracle(cfg: &ResolvedConfig, rng: &mut ChaCha8Rng) -> Result<f64> {
    let level = cfg.level();
    let [gx, gy] = cfg.grid;
    let basis = cfg.basis(dealias_guard(cfg.degree, cfg.degree.saturating_sub(8), monomial_reach(level, cfg.degree_max)))?;
    let s = ZakSection::random_tail_light(level, &basis, 8, rng);
    let phi = zakspace::synthesize(&s, gx, gy, cfg.window.max(s.required_window()))?;
    let mut worst = 0.0f64;
    for m in monomials_up_to(cfg.degree_max) {
        let f = TrigPoly::monomial(m.m, m.n);
        let direct = prequant::grid_apply(&f, &phi);
        let out = prequant::apply_assembled(&f, &s)?;
        let via = zakspace::synthesize(&out, gx, gy, cfg.window.max(out.required_window()))?;
        worst = worst.max(direct.max_abs_diff(&via)?);
    }
    Ok(worst)
}

/// Relative defects of antisymmetry, Jacobi and Leibniz on `count` random triples.
pub fn algebra_defects(level: ChernLevel, count: usize, max_freq: i64, rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    let rel = |defect: &TrigPoly, parts: &[&TrigPoly]| {
        let scale = parts.iter().map(|p| p.max_abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            defect.max_abs()
        } else {
            defect.max_abs() / scale
        }
    };
    let (mut anti, mut jac, mut leib) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..count {
        let f = TrigPoly::random(max_freq, rng);
        let g = TrigPoly::random(max_freq, rng);
        let h = TrigPoly::random(max_freq, rng);
        let fg = f.poisson_bracket(&g, level);
        let gf = g.poisson_bracket(&f, level);
        anti = anti.max(rel(&(&fg + &gf), &[&fg, &gf]));
        let t1 = f.poisson_bracket(&g.poisson_bracket(&h, level), level);
        let t2 = g.poisson_bracket(&h.poisson_bracket(&f, level), level);
        let t3 = h.poisson_bracket(&fg, level);
        jac = jac.max(rel(&(&(&t1 + &t2) + &t3), &[&t1, &t2, &t3]));
        let lhs = f.poisson_bracket(&(&g * &h), level);
        let r1 = &fg * &h;
        let r2 = &g * &f.poisson_bracket(&h, level);
        leib = leib.max(rel(&(&lhs - &(&r1 + &r2)), &[&lhs, &r1, &r2]));
    }
    (anti, jac, leib)
}

fn go_theorem(ctx: &mut Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let level = cfg.level();
    let threshold = cfg.tol("commutant_threshold");
    let margin_override = cfg.commutant_margin;
    let report = commutant::convergence_study(
        &OperatorSet::Fn,
        level,
        &cfg.d_list,
        |d| margin_override.unwrap_or_else(|| commutant::default_margin(d)),
        threshold,
        None,
    )?;
    for (i, d) in report.d.iter().enumerate() {
        ctx.residuals.push(Residual::le(format!("dim_D{d}"), report.estimated_dim[i] as f64, 1.0));
        ctx.residuals.push(Residual::ge(
            format!("gap_D{d}"),
            report.gap_ratio[i].unwrap_or(0.0),
            cfg.tol("go_gap"),
        ));
    }
    let last = *cfg.d_list.last().expect("validated");
    let basis = HermiteBasis::new(last)?;
    let margin = margin_override.unwrap_or_else(|| commutant::default_margin(last));
    let analysis = commutant::set_commutant(&OperatorSet::Fn, level, &basis, margin, threshold)?;
    let size = analysis.entry.compressed_size;
    let id_dist = analysis.kernel_distance(Mat::<Complex64>::identity(size, size).as_ref())?;
    ctx.residuals.push(Residual::le("identity_in_kernel", id_dist, cfg.tol("kernel")));
    ctx.write("commutant.json", &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    ctx.detail("go_theorem", &report);
    Ok(())
}

fn reducibility(ctx: &mut Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let level = cfg.level();
    let basis = cfg.basis(0)?;
    let cbasis = HermiteBasis::new(cfg.commutant_degree)?;
    let rep = commutant::reducibility_check(level, &basis, &cbasis, cfg.tol("commutant_threshold"))?;
    for (f, r) in &rep.projector_residuals {
        ctx.residuals.push(Residual::le(format!("projector_commutator[{f}]"), *r, cfg.tol("projector")));
    }
    ctx.residuals.push(Residual::le(
        "block_diagonal_defect",
        if rep.block_diagonal { 0.0 } else { 1.0 },
        0.0,
    ));
    for (r, d) in rep.block_projector_kernel_residuals.iter().enumerate() {
        ctx.residuals.push(Residual::le(format!("block_projector_{r}_in_kernel"), *d, cfg.tol("kernel")));
    }
    ctx.residuals.push(Residual::le("identity_in_kernel", rep.identity_kernel_residual, cfg.tol("kernel")));
    ctx.residuals.push(Residual::ge(
        "commutant_dim",
        rep.commutant.estimated_dim as f64,
        level.components() as f64,
    ));
    ctx.write("reducibility.json", &serde_json::to_string_pretty(&rep).expect("report serializes"))?;
    ctx.detail("reducibility", &rep);
    Ok(())
}

fn bad_operator(ctx: &mut Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let level = cfg.level();
    let [gx, gy] = cfg.grid;
    let basis = cfg.basis(dealias_guard(cfg.degree, cfg.degree, monomial_reach(level, cfg.degree_max)))?;
    let h0 = ZakSection::basis_function(level, &basis, 0, 0);
    for (which, name) in [(BadOperator::QX, "naive_qx"), (BadOperator::QY, "naive_qy")] {
        let r = prequant::bad_operator_residual(&h0, which, (gx, gy), cfg.window)?;
        ctx.residuals.push(Residual::ge(name, r, cfg.tol("bad_min")));
    }
    let mut worst = 0.0f64;
    for m in monomials_up_to(cfg.degree_max) {
        let f = TrigPoly::monomial(m.m, m.n);
        let out = prequant::apply_assembled(&f, &h0)?;
        let window = cfg.window.max(out.required_window());
        worst = worst.max(prequant::assembled_output_residual(&f, &h0, (gx, gy), window)?);
    }
    ctx.residuals.push(Residual::le("assembled_monomials", worst, cfg.tol("good_max")));
    Ok(())
}

#[derive(Serialize)]
struct Report<'a> {
    suite: &'a str,
    pass: bool,
    config: &'a ResolvedConfig,
    residuals: &'a [Residual],
    artifacts: &'a [String],
    details: &'a serde_json::Value,
}

/// Writes `report.json` and `residuals.csv` into `cfg.out`; returns their paths.
pub fn emit_report(result: &SuiteResult, cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let report = Report {
        suite: &result.suite,
        pass: result.pass,
        config: cfg,
        residuals: &result.residuals,
        artifacts: &result.artifacts,
        details: &result.details,
    };
    let json_path = cfg.out.join("report.json");
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Json {
        path: json_path.clone(),
        source: e,
    })?;
    std::fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
    let csv_path = cfg.out.join("residuals.csv");
    std::fs::write(&csv_path, residuals_csv(&result.residuals)).map_err(|e| Error::io(&csv_path, e))?;
    Ok(vec![json_path, csv_path])
}

/// `check,value,tolerance,pass` rows.
pub fn residuals_csv(residuals: &[Residual]) -> String {
    let mut out = String::from("check,value,tolerance,pass\n");
    for r in residuals {
        let check = if r.check.contains(',') || r.check.contains('"') {
            format!("\"{}\"", r.check.replace('"', "\"\""))
        } else {
            r.check.clone()
        };
        let _ = writeln!(out, "{check},{:e},{:e},{}", r.value, r.tolerance, r.pass());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let r = RunConfig::default().resolve().unwrap();
        assert_eq!(r.margin, 24);
        assert_eq!(r.grid, [128, 128]);
        let r = RunConfig { n: 3, ..RunConfig::default() }.resolve().unwrap();
        assert_eq!(r.grid, [128, 132]);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            RunConfig { n: 0, ..RunConfig::default() },
            RunConfig { quad: Some(50), ..RunConfig::default() },
            RunConfig { window: 0, ..RunConfig::default() },
            RunConfig { margin: Some(0), ..RunConfig::default() },
            RunConfig { d_list: vec![32, 24], ..RunConfig::default() },
            RunConfig {
                thresholds: [("nope".to_string(), 1.0)].into_iter().collect(),
                ..RunConfig::default()
            },
        ];
        for c in bad {
            assert!(c.resolve().is_err(), "{c:?}");
        }
    }

    #[test]
    fn config_json_is_flat_and_strict() {
        let c: RunConfig = serde_json::from_str(r#"{"N": 2, "D": 20, "grid": [64, 64]}"#).unwrap();
        assert_eq!((c.n, c.degree, c.window), (2, 20, 12));
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn empty_residuals_pass() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            out: dir.path().to_path_buf(),
            ..RunConfig::default()
        }
        .resolve()
        .unwrap();
        let res = SuiteResult {
            suite: "none".into(),
            pass: true,
            residuals: vec![],
            artifacts: vec![],
            details: serde_json::Value::Null,
            wall_time: 0.0,
        };
        emit_report(&res, &cfg).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("residuals.csv")).unwrap();
        assert_eq!(csv, "check,value,tolerance,pass\n");
    }

    #[test]
    fn residual_directions() {
        assert!(Residual::le("a", 1.0, 1.0).pass());
        assert!(!Residual::le("a", 1.1, 1.0).pass());
        assert!(Residual::ge("a", 1.0, 1.0).pass());
        assert!(!Residual::ge("a", 0.9, 1.0).pass());
        assert!(!Residual::le("a", f64::NAN, 1.0).pass());
    }

    #[test]
    fn algebra_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, j, l) = algebra_defects(ChernLevel::new(2).unwrap(), 5, 2, &mut rng);
        assert!(a < 1e-12 && j < 1e-12 && l < 1e-12, "{a} {j} {l}");
    }

    #[test]
    fn small_suites_pass() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            n: 2,
            degree: 16,
            grid: [64, 64],
            degree_max: 1,
            samples: 2,
            d_list: vec![8, 12],
            out: dir.path().to_path_buf(),
            ..RunConfig::default()
        }
        .resolve()
        .unwrap();
        for s in ["heisenberg", "bad-operator", "reducibility"] {
            let r = run_suite(s, &cfg).unwrap();
            assert!(r.pass, "{s}: {:?}", r.residuals);
        }
        assert!(run_suite("nope", &cfg).is_err());
    }
}
