use std::sync::Arc;

use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use torusq::hermite::{interior_compare, HermiteBasis};
use torusq::prequant::{assemble, assemble_window};
use torusq::trigpoly::{ChernLevel, FourierMode, TrigPoly};
use torusq::zakspace::{analyze, grid_inner_product, inner_product, quasiperiodicity_residual, synthesize, ZakSection};

fn poly(max_freq: i64, terms: usize) -> impl Strategy<Value = TrigPoly> {
    prop::collection::vec(((-max_freq..=max_freq), (-max_freq..=max_freq), -1.0..1.0f64, -1.0..1.0f64), 1..=terms)
        .prop_map(|ts| {
            let mut seen = std::collections::BTreeMap::new();
            for (m, n, re, im) in ts {
                seen.insert(FourierMode::new(m, n), Complex64::new(re, im));
            }
            TrigPoly::from_terms(seen)
        })
}

fn level() -> impl Strategy<Value = ChernLevel> {
    prop_oneof![Just(1i64), Just(2), Just(3), Just(-2)].prop_map(|n| ChernLevel::new(n).unwrap())
}

fn rel(defect: &TrigPoly, parts: &[&TrigPoly]) -> f64 {
    let scale = parts.iter().map(|p| p.max_abs()).fold(1e-300, f64::max);
    defect.max_abs() / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_round_trip_is_exact(p in poly(4, 12)) {
        let back: TrigPoly = p.to_text().parse().unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn bracket_is_antisymmetric(f in poly(3, 8), g in poly(3, 8), lvl in level()) {
        let fg = f.poisson_bracket(&g, lvl);
        let gf = g.poisson_bracket(&f, lvl);
        prop_assert!(rel(&(&fg + &gf), &[&fg, &gf]) <= 1e-12);
    }

    #[test]
    fn jacobi(f in poly(2, 6), g in poly(2, 6), h in poly(2, 6), lvl in level()) {
        let a = f.poisson_bracket(&g.poisson_bracket(&h, lvl), lvl);
        let b = g.poisson_bracket(&h.poisson_bracket(&f, lvl), lvl);
        let c = h.poisson_bracket(&f.poisson_bracket(&g, lvl), lvl);
        prop_assert!(rel(&(&(&a + &b) + &c), &[&a, &b, &c]) <= 1e-12);
    }

    #[test]
    fn leibniz(f in poly(2, 6), g in poly(2, 6), h in poly(2, 6), lvl in level()) {
        let lhs = f.poisson_bracket(&(&g * &h), lvl);
        let r1 = &f.poisson_bracket(&g, lvl) * &h;
        let r2 = &g * &f.poisson_bracket(&h, lvl);
        prop_assert!(rel(&(&lhs - &(&r1 + &r2)), &[&lhs, &r1, &r2]) <= 1e-12);
    }

    #[test]
    fn real_polynomials_close_under_bracket(f in poly(3, 6), g in poly(3, 6), lvl in level()) {
        let (fr, gr) = (&f + &f.conj(), &g + &g.conj());
        prop_assert!(fr.is_real() && gr.is_real());
        let b = fr.poisson_bracket(&gr, lvl);
        prop_assert!(b.reality_defect() <= 1e-12 * b.max_abs().max(1.0));
    }

    #[test]
    fn bracket_matches_finite_differences(f in poly(2, 5), g in poly(2, 5), lvl in level()) {
        // eighth-order centered differences on a 128 x 128 periodic grid
        let n = 128usize;
        let h = 1.0 / n as f64;
        let stencil = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        let deriv = |p: &TrigPoly, x: f64, y: f64, along_x: bool| -> Complex64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, a) in stencil.iter().enumerate() {
                let s = (k + 1) as f64 * h;
                let (fwd, bwd) = if along_x {
                    (p.evaluate(x + s, y), p.evaluate(x - s, y))
                } else {
                    (p.evaluate(x, y + s), p.evaluate(x, y - s))
                };
                acc += (fwd - bwd) * *a;
            }
            acc / h
        };
        let exact = f.poisson_bracket(&g, lvl);
        let mut worst = 0.0f64;
        let mut scale = 1e-300f64;
        for i in (0..n).step_by(7) {
            for j in (0..n).step_by(5) {
                let (x, y) = (i as f64 * h, j as f64 * h);
                let fd = (deriv(&f, x, y, true) * deriv(&g, x, y, false)
                    - deriv(&f, x, y, false) * deriv(&g, x, y, true))
                    / lvl.as_f64();
                let e = exact.evaluate(x, y);
                worst = worst.max((fd - e).norm());
                scale = scale.max(e.norm());
            }
        }
        prop_assert!(worst <= 1e-6 * scale.max(1.0), "{worst} vs {scale}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn zak_round_trip_and_isometry(seed in any::<u64>(), lvl in level()) {
        let basis = Arc::new(HermiteBasis::new(20).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = ZakSection::random_tail_light(lvl, &basis, 10, &mut rng);
        let t = ZakSection::random_tail_light(lvl, &basis, 10, &mut rng);
        let gy = 4 * lvl.components() * 16;
        let (ps, pt) = (synthesize(&s, 64, gy, 12).unwrap(), synthesize(&t, 64, gy, 12).unwrap());
        prop_assert!(quasiperiodicity_residual(&ps) < 1e-10);
        let d = grid_inner_product(&ps, &pt).unwrap() - inner_product(&s, &t).unwrap();
        prop_assert!(d.norm() < 1e-10);
        let back = analyze(&ps, &basis, 12).unwrap();
        prop_assert!(back.max_diff_upto(&s, 20).unwrap() < 1e-10);
    }

    #[test]
    fn assembly_is_linear(f in poly(2, 4), g in poly(2, 4), a in -2.0..2.0f64, b in -2.0..2.0f64, lvl in level()) {
        let basis = HermiteBasis::new(12).unwrap();
        let (alpha, beta) = (Complex64::new(a, 0.5), Complex64::new(-0.25, b));
        let lhs = assemble_window(lvl, &basis, &(f.scale(alpha) + g.scale(beta)), 12, 12);
        let qf = assemble_window(lvl, &basis, &f, 12, 12);
        let qg = assemble_window(lvl, &basis, &g, 12, 12);
        let mut worst = 0.0f64;
        let mut scale = 1e-300f64;
        for j in 0..lhs.ncols() {
            for i in 0..lhs.nrows() {
                let r = qf[(i, j)] * alpha + qg[(i, j)] * beta;
                worst = worst.max((lhs[(i, j)] - r).norm());
                scale = scale.max(r.norm());
            }
        }
        prop_assert!(worst <= 1e-13 * scale.max(1.0));
    }

    #[test]
    fn real_observables_are_symmetric_inside(f in poly(1, 4), lvl in level()) {
        let basis = Arc::new(HermiteBasis::new(32).unwrap());
        let real = &f + &f.conj();
        let q = assemble(lvl, &basis, &real);
        prop_assert!(interior_compare(&q, &q.adjoint(), 16).unwrap() < 1e-8);
    }
}

#[test]
fn hermite_gram_is_identity() {
    let b = HermiteBasis::new(60).unwrap();
    let g = b.gram();
    for i in 0..61 {
        for j in 0..61 {
            assert_abs_diff_eq!(g[(i, j)], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
        }
    }
}
