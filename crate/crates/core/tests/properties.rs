use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex;
use proptest::prelude::*;

use torus_ma::ctransform::{c_transform, project_cconvex, xi};
use torus_ma::ensemble::{hamiltonian, log_permanent, Background, Configuration, EnsembleSpec};
use torus_ma::theta::{theta_eval, ThetaSpec};
use torus_ma::torus::{torus_distance, wrap_unit, GridField, TorusPoint};
use torus_ma::transport::config_distance;

fn naive_log_permanent(l: &Array2<f64>) -> f64 {
    let n = l.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut terms = Vec::new();
    // Heap's algorithm
    let mut c = vec![0usize; n];
    terms.push((0..n).map(|i| l[[i, idx[i]]]).sum::<f64>());
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                idx.swap(0, i);
            } else {
                idx.swap(c[i], i);
            }
            terms.push((0..n).map(|r| l[[r, idx[r]]]).sum::<f64>());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn field(values: Vec<f64>) -> GridField<f64> {
    let res = values.len();
    GridField::new(1, res, values).unwrap()
}

fn points(xs: &[f64]) -> Configuration<f64> {
    Configuration::from_line(xs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permanent_matches_enumeration(v in prop::collection::vec(-50.0f64..50.0, 36)) {
        let l = Array2::from_shape_vec((6, 6), v).unwrap();
        let a = log_permanent(&l).unwrap();
        let b = naive_log_permanent(&l);
        prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn permanent_row_swap_invariant(v in prop::collection::vec(-5.0f64..5.0, 25), r in 0usize..5, s in 0usize..5) {
        let l = Array2::from_shape_vec((5, 5), v).unwrap();
        let mut m = l.clone();
        for j in 0..5 {
            m.swap([r, j], [s, j]);
        }
        prop_assert!((log_permanent(&l).unwrap() - log_permanent(&m).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn distance_symmetric_and_bounded(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..1.0) {
        let x = TorusPoint::wrap(&[a, b]).unwrap();
        let y = TorusPoint::wrap(&[c, d]).unwrap();
        let dxy = torus_distance(&x, &y).unwrap();
        prop_assert_eq!(dxy, torus_distance(&y, &x).unwrap());
        prop_assert!(dxy <= 2f64.sqrt() / 2.0 + 1e-15);
    }

    #[test]
    fn wrap_lands_in_unit_interval(x in -1e6f64..1e6) {
        let w = wrap_unit(x);
        prop_assert!((0.0..1.0).contains(&w));
    }

    #[test]
    fn ctransform_closure(v in prop::collection::vec(-0.3f64..0.3, 32)) {
        let phi = field(v);
        let cc = c_transform(&c_transform(&phi));
        let ccc = c_transform(&cc);
        prop_assert!(cc.sup_distance(&c_transform(&c_transform(&cc))).unwrap() <= 1e-15);
        prop_assert!(ccc.sup_distance(&c_transform(&phi)).unwrap() <= 1e-15);
    }

    #[test]
    fn projection_lies_below(v in prop::collection::vec(-0.3f64..0.3, 32)) {
        let phi = field(v);
        let p = project_cconvex(&phi);
        for (a, b) in p.values().iter().zip(phi.values()) {
            prop_assert!(*a <= *b + 1e-15);
        }
    }

    #[test]
    fn ctransform_order_reversing(v in prop::collection::vec(-0.3f64..0.3, 32), bump in prop::collection::vec(0.0f64..0.1, 32)) {
        let phi = field(v.clone());
        let psi = field(v.iter().zip(&bump).map(|(a, b)| a + b).collect());
        let (a, b) = (c_transform(&phi), c_transform(&psi));
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!(*y <= *x + 1e-15);
        }
    }

    #[test]
    fn ctransform_contraction(v in prop::collection::vec(-0.3f64..0.3, 32), w in prop::collection::vec(-0.3f64..0.3, 32)) {
        let (phi, psi) = (field(v), field(w));
        let lhs = c_transform(&phi).sup_distance(&c_transform(&psi)).unwrap();
        prop_assert!(lhs <= phi.sup_distance(&psi).unwrap() + 1e-15);
    }

    #[test]
    fn xi_shifts_with_constants(v in prop::collection::vec(-0.3f64..0.3, 32), c in -1.0f64..1.0) {
        let phi = field(v);
        prop_assert!((xi(&phi.add_scalar(c)) - xi(&phi) + c).abs() <= 1e-12);
    }

    #[test]
    fn config_distance_symmetric(xs in prop::collection::vec(0.0f64..1.0, 1..7), seed in prop::collection::vec(0.0f64..1.0, 7)) {
        let ys: Vec<f64> = seed[..xs.len()].to_vec();
        let (x, y) = (points(&xs), points(&ys));
        prop_assert_eq!(config_distance(&x, &y).unwrap(), config_distance(&y, &x).unwrap());
        prop_assert_eq!(config_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn hamiltonian_exchange_symmetric(xs in prop::collection::vec(0.0f64..1.0, 4), r in 0usize..4, s in 0usize..4) {
        let spec = EnsembleSpec::lattice(1, 4, 1.0, Background::Uniform).unwrap();
        let mut ys = xs.clone();
        ys.swap(r, s);
        prop_assert_eq!(
            hamiltonian(&points(&xs), &spec).unwrap(),
            hamiltonian(&points(&ys), &spec).unwrap()
        );
    }

    #[test]
    fn theta_symmetries(re in -10.0f64..10.0, im in -2.9f64..2.9) {
        let th = ThetaSpec::<f64>::classical(1);
        let z = Complex::new(re, im);
        let v = theta_eval(&th, &[z]).unwrap();
        let scale = theta_eval(&th, &[Complex::new(0.0, im)]).unwrap().norm();
        let per = theta_eval(&th, &[z + 4.0 * PI]).unwrap();
        prop_assert!((per - v).norm() <= 1e-12 * scale);
        let up = theta_eval(&th, &[z + Complex::i()]).unwrap();
        let factor = (Complex::<f64>::new(0.25, 0.0) - Complex::<f64>::i() * z / 2.0).exp();
        prop_assert!((up - v * factor).norm() <= 1e-12 * scale * factor.norm());
        let mirror = theta_eval(&th, &[-z.conj()]).unwrap();
        prop_assert!((mirror - v.conj()).norm() <= 1e-12 * scale);
    }
}
