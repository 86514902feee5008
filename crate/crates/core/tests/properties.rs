//! Property tests for the invariants that hold exactly or to rounding.

use growthwave::growth::growth_norm;
use growthwave::oscillation::{conditional_block, vertical_average};
use growthwave::poisson::{bandlimited_random, bspline, poisson_extend, HarmonicField};
use growthwave::seqspace::{
    consistency_defect, max_abs, project_to_ell, random_sequence, sequence_levels, RefinementTable,
};
use growthwave::wavelet::{analyze, block_decompose, synthesize, WaveletBasis};
use growthwave::weight::{scale_sequence, ScalePlan, Weight};
use growthwave::GridFunction;
use proptest::prelude::*;

fn weight() -> impl Strategy<Value = Weight> {
    prop_oneof![
        (0.25f64..3.0).prop_map(|a| Weight::power(a).unwrap()),
        (0.5f64..3.0).prop_map(|b| Weight::logpow(b).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn poisson_semigroup(seed in any::<u64>(), s in 1e-4f64..1.0, t in 1e-4f64..1.0) {
        let f = bandlimited_random(9, 200, seed);
        let two = poisson_extend(&poisson_extend(&f, s).unwrap(), t).unwrap();
        let one = poisson_extend(&f, s + t).unwrap();
        prop_assert!(two.max_diff(&one) <= 1e-12 * f.sup_norm().max(1.0));
        // maximum principle
        prop_assert!(one.sup_norm() <= f.sup_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn wavelet_round_trip(seed in any::<u64>(), order in 1usize..=10) {
        let basis = WaveletBasis::with_order(order).unwrap();
        let f = bandlimited_random(9, 255, seed);
        let tree = analyze(&f, &basis).unwrap();
        prop_assert!(synthesize(&tree, &basis).max_diff(&f) <= 1e-10 * f.sup_norm().max(1.0));
        // orthogonality: energy is preserved
        prop_assert!((tree.energy() - f.l2_norm_sq()).abs() <= 1e-9 * f.l2_norm_sq().max(1.0));
    }

    #[test]
    fn blocks_partition_the_function(seed in any::<u64>(), v in weight()) {
        let plan = ScalePlan::build(&v, None, 6).unwrap();
        let basis = WaveletBasis::with_order(3).unwrap();
        let f = bandlimited_random(10, 400, seed);
        let blocks = block_decompose(&analyze(&f, &basis).unwrap(), &plan, &basis);
        prop_assert!(blocks.cumulative(blocks.len() - 1).max_diff(&f) <= 1e-9);
    }

    #[test]
    fn scale_sequence_bands(v in weight(), stretch in 1.0f64..2.0) {
        // any A at or above the default band base max(2, ⌈D²⌉ + 1)
        let a = ScalePlan::build(&v, None, 1).unwrap().band_base * stretch;
        let alphas = scale_sequence(&v, a, 6).unwrap();
        prop_assert_eq!(alphas[0], 0);
        for (l, &al) in alphas.iter().enumerate().skip(1) {
            prop_assert!(al > alphas[l - 1]);
            let ln_v = v.ln_eval_dyadic(al as f64);
            prop_assert!(ln_v >= l as f64 * a.ln() - 1e-9);
            prop_assert!(ln_v < (l + 1) as f64 * a.ln());
            // smallest such exponent
            prop_assert!(v.ln_eval_dyadic((al - 1) as f64) < l as f64 * a.ln() + 1e-9);
        }
    }

    #[test]
    fn conditioning_is_a_tower(seed in any::<u64>(), a in 0u64..=9, b in 0u64..=9) {
        let (lo, hi) = (a.min(b), a.max(b));
        let g = bandlimited_random(9, 100, seed);
        let fine = conditional_block(&g, hi).unwrap();
        let coarse = conditional_block(&g, lo).unwrap();
        prop_assert!(conditional_block(&fine, lo).unwrap().max_diff(&coarse) <= 1e-12);
        prop_assert!((coarse.integral() - g.integral()).abs() <= 1e-12);
        prop_assert!(coarse.sup_norm() <= g.sup_norm() + 1e-12);
    }

    #[test]
    fn constant_vertical_average(v in weight(), e in 0.01f64..40.0, c in -3.0f64..3.0) {
        let field = HarmonicField::new(GridFunction::constant(6, c));
        let s = 2f64.powf(-e);
        let i = vertical_average(&field, &v, s).unwrap();
        let exact = c * (1.0 - 1.0 / v.eval(s));
        prop_assert!(i.max_diff(&GridFunction::constant(6, exact)) <= 1e-12 * c.abs().max(1.0));
    }

    #[test]
    fn vertical_average_of_bounded_data(seed in any::<u64>(), e in 0.5f64..12.0) {
        // bounded data: |u| ≤ sup |U| against the unit mass of d(1/v)
        let v = Weight::power(1.0).unwrap();
        let f = bandlimited_random(8, 60, seed);
        let i = vertical_average(&HarmonicField::new(f.clone()), &v, 2f64.powf(-e)).unwrap();
        prop_assert!(i.sup_norm() <= f.sup_norm() * (1.0 - 2f64.powf(-e)) * (1.0 + 1e-9));
    }

    #[test]
    fn growth_norm_is_homogeneous(seed in any::<u64>(), c in -5.0f64..5.0) {
        let v = Weight::power(0.5).unwrap();
        let f = bandlimited_random(8, 100, seed);
        let k = growth_norm(&HarmonicField::new(f.clone()), &v);
        let kc = growth_norm(&HarmonicField::new(f.scaled(c)), &v);
        prop_assert!((kc - c.abs() * k).abs() <= 1e-12 * k.max(1.0) * c.abs().max(1.0));
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), order in 1usize..=6, level in 8u32..=11) {
        let v = Weight::power(1.0).unwrap();
        let plan = ScalePlan::build(&v, None, 8).unwrap();
        let basis = WaveletBasis::with_order(order).unwrap();
        let levels = sequence_levels(&plan, level);
        let table = RefinementTable::new(&basis, &levels);
        let a = random_sequence(&v, &levels, seed).unwrap();
        let p = project_to_ell(&a, &table);
        let scale = max_abs(&p).max(1.0);
        prop_assert!(max_abs(&consistency_defect(&p, &table)) <= 1e-10 * scale);
        prop_assert!(project_to_ell(&p, &table).max_diff(&p) <= 1e-10 * scale);
        prop_assert_eq!(&p.entries[0], &a.entries[0]);
    }

    #[test]
    fn defect_is_linear(s1 in any::<u64>(), s2 in any::<u64>(), c in -2.0f64..2.0) {
        let v = Weight::power(1.0).unwrap();
        let plan = ScalePlan::build(&v, Some(2.0), 9).unwrap();
        let basis = WaveletBasis::with_order(2).unwrap();
        let levels = sequence_levels(&plan, 8);
        let table = RefinementTable::new(&basis, &levels);
        let a = random_sequence(&v, &levels, s1).unwrap();
        let b = random_sequence(&v, &levels, s2).unwrap();
        let lhs = consistency_defect(&a.zip_with(&b, |x, y| x + c * y), &table);
        let rhs = consistency_defect(&a, &table).zip_with(&consistency_defect(&b, &table), |x, y| x + c * y);
        prop_assert!(lhs.max_diff(&rhs) <= 1e-12);
    }

    #[test]
    fn bspline_partition_of_unity(r in 1u32..=8, x in -0.5f64..0.5) {
        let total: f64 = (-10..=10).map(|k| bspline(r, x + k as f64)).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
        prop_assert!(bspline(r, x) >= 0.0);
    }
}
