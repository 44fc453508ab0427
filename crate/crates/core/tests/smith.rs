mod common;

use common::{abelian, abelian_model};
use iwasawa::group::Automorphism;
use iwasawa::iwasawa::{aut_extend, TruncatedSeries, TruncationSpec};
use iwasawa::smith::{
    determinant, fixed_vectors, moore_det_check, smith_matrix_poly, smith_matrix_series, zeta_convergence, zeta_eval, FpPolynomial,
    ValuedFraction, ZetaExperiment,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

fn random_linear(p: u32, n: usize, rng: &mut Pcg64) -> FpPolynomial {
    (0..n).fold(FpPolynomial::zero(p, n), |acc, i| acc.add(&FpPolynomial::var(p, n, i).mul(&FpPolynomial::constant(p, n, rng.random_range(0..p)))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn smith_entries_are_frobenius_powers(seed in any::<u64>(), r in 0u32..2) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let ys: Vec<_> = (0..3).map(|_| random_linear(3, 3, &mut rng)).collect();
        let m = smith_matrix_poly(&ys, r, 3).unwrap();
        for j in 0..3 {
            for (i, y) in ys.iter().enumerate() {
                let expect = (0..r + j as u32).fold(y.clone(), |a, _| a.frobenius());
                prop_assert_eq!(&m[j][i], &expect);
            }
        }
    }

    #[test]
    fn moore_determinant_vanishes_on_dependent_inputs(seed in any::<u64>()) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let p = 3;
        let y1 = random_linear(p, 2, &mut rng);
        let y2 = random_linear(p, 2, &mut rng);
        let c = FpPolynomial::constant(p, 2, rng.random_range(0..p));
        let y3 = y1.mul(&c).add(&y2);
        let m = smith_matrix_poly(&[y1, y2, y3], 0, 3).unwrap();
        prop_assert!(determinant(&m, &FpPolynomial::constant(p, 2, 1)).unwrap().is_zero());
    }

    #[test]
    fn fraction_arithmetic(seed in any::<u64>()) {
        let t = abelian(3, 1, 20, 4);
        let mut rng = Pcg64::seed_from_u64(seed);
        let a = TruncatedSeries::random(&t, 20, 4, &mut rng);
        let b = TruncatedSeries::one(&t).add(&TruncatedSeries::random(&t, 20, 3, &mut rng).mul(&TruncatedSeries::b(&t, 0)).unwrap()).unwrap();
        let x = ValuedFraction::new(a.clone(), b.clone()).unwrap();
        let back = x.mul(&ValuedFraction::from_series(b)).unwrap();
        prop_assert!(back.equals(&ValuedFraction::from_series(a)).unwrap());
    }
}

#[test]
fn moore_factorization_small_cases() {
    for (p, m, r) in [(2, 2, 0), (3, 2, 1), (5, 2, 0), (2, 3, 1), (3, 3, 0)] {
        let rep = moore_det_check(p, m, r, 1, 4096).unwrap();
        assert!(rep.factorization_holds, "{p} {m} {r}");
        assert_eq!(rep.valuation, Some(rep.expected_valuation));
        assert_eq!(rep.forms.len() as u32, (p.pow(m as u32) - 1) / (p - 1));
    }
    assert!(moore_det_check(4, 2, 0, 1, 4096).is_err());
}

#[test]
fn series_smith_matrix_needs_precision() {
    let t = abelian(3, 2, 6, 3);
    let ys = vec![TruncatedSeries::b(&t, 0), TruncatedSeries::b(&t, 1)];
    assert!(smith_matrix_series(&ys, 1, 0, 2).is_ok());
    assert!(smith_matrix_series(&ys, 1, 2, 2).is_err());
}

fn experiment(k: i64, w: i64) -> (std::sync::Arc<TruncationSpec>, ZetaExperiment) {
    let model = abelian_model(3, 1, 8);
    let t = TruncationSpec::new(model.clone(), w).unwrap();
    let phi = Automorphism::linear_on_log(&model, &[vec![k]]).unwrap();
    let tests = (1..=3).map(|e| TruncatedSeries::parse(&t, &format!("b1^{e}")).unwrap()).collect();
    let exp = ZetaExperiment::new(&t, phi, 2, vec![0, 1], tests).unwrap();
    (t, exp)
}

#[test]
fn zeta_kills_fixed_vectors() {
    for k in [4, 10, 19] {
        let (t, exp) = experiment(k, 45);
        let fixed = fixed_vectors(&t, &exp.phi).unwrap();
        assert!(!fixed.is_empty());
        for x in &fixed {
            assert_eq!(&aut_extend(&exp.phi, x).unwrap(), x);
            for r in [0, 1] {
                assert!(zeta_eval(&exp, 0, r, x).unwrap().is_exact_zero(), "k={k} r={r} x={x}");
            }
        }
        let rep = zeta_convergence(&exp).unwrap();
        assert!(rep.cramer_ok && rep.vdet_ok && rep.fixed_killed, "k={k}");
    }
}

#[test]
fn zeta_growth_is_monotone() {
    let (_, exp) = experiment(10, 60);
    let rep = zeta_convergence(&exp).unwrap();
    assert!(rep.monotone);
    let d: Vec<_> = rep.records.iter().map(|r| r.d_value).collect();
    assert!(d[0].unwrap() < d[1].unwrap());
}
