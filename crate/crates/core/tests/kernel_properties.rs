use dtwin_core::emulator::{Kernel, KernelFamily, KernelKind};
use proptest::prelude::*;

fn kernel(family: usize, ard: bool, sf2: f64, ls: &[f64], alpha: f64) -> Kernel<f64> {
    let fam = KernelFamily::ALL[family];
    let kind = if ard { KernelKind::ard(fam) } else { KernelKind::iso(fam) };
    let scales = if ard { ls.to_vec() } else { vec![ls[0]] };
    Kernel::new(kind, sf2, scales, fam.has_shape().then_some(alpha)).unwrap()
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn symmetric_with_signal_variance_on_diagonal(
        f in 0usize..5, ard: bool, sf2 in 0.01f64..10.0,
        ls in prop::collection::vec(0.1f64..5.0, 3), alpha in 0.1f64..20.0,
        x in point(), y in point(),
    ) {
        let k = kernel(f, ard, sf2, &ls, alpha);
        prop_assert_eq!(k.eval(&x, &y), k.eval(&y, &x));
        prop_assert!((k.eval(&x, &x) - sf2).abs() <= 1e-15 * sf2);
        prop_assert!(k.eval(&x, &y) <= sf2 * (1.0 + 1e-15));
    }

    #[test]
    fn gram_matrices_are_positive_semidefinite(
        f in 0usize..5, ard: bool, sf2 in 0.01f64..10.0,
        ls in prop::collection::vec(0.1f64..5.0, 3), alpha in 0.1f64..20.0,
        xs in prop::collection::vec(point(), 2..8),
        v in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let k = kernel(f, ard, sf2, &ls, alpha);
        let n = xs.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += v[i] * v[j] * k.eval(&xs[i], &xs[j]);
            }
        }
        let norm2: f64 = v[..n].iter().map(|a| a * a).sum();
        prop_assert!(quad >= -1e-12 * sf2 * n as f64 * norm2.max(1.0), "{}", quad);
    }

    #[test]
    fn stationary_under_translation(
        f in 0usize..5, ard: bool,
        ls in prop::collection::vec(0.1f64..5.0, 3), alpha in 0.1f64..20.0,
        x in point(), y in point(), shift in point(),
    ) {
        let k = kernel(f, ard, 1.3, &ls, alpha);
        let xs: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let ys: Vec<f64> = y.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let (a, b) = (k.eval(&x, &y), k.eval(&xs, &ys));
        prop_assert!((a - b).abs() <= 1e-11, "{} vs {}", a, b);
    }

    #[test]
    fn ard_with_equal_scales_equals_isotropic(
        f in 0usize..5, sf2 in 0.01f64..10.0, l in 0.1f64..5.0, alpha in 0.1f64..20.0,
        x in point(), y in point(),
    ) {
        let iso = kernel(f, false, sf2, &[l, l, l], alpha);
        let ard = kernel(f, true, sf2, &[l, l, l], alpha);
        let (a, b) = (iso.eval(&x, &y), ard.eval(&x, &y));
        prop_assert!((a - b).abs() <= 1e-14 * sf2, "{} vs {}", a, b);
    }

    #[test]
    fn parameter_gradient_matches_differences(
        f in 0usize..5, ard: bool, sf2 in 0.1f64..3.0,
        ls in prop::collection::vec(0.3f64..3.0, 3), alpha in 0.3f64..5.0,
        x in point(), y in point(),
    ) {
        let k = kernel(f, ard, sf2, &ls, alpha);
        let p = k.log_params();
        let mut grad = vec![0.0; p.len()];
        k.eval_with_grad(&x, &y, &mut grad);
        let h = 1e-6;
        for i in 0..p.len() {
            let (mut up, mut down) = (p.clone(), p.clone());
            up[i] += h;
            down[i] -= h;
            let ku = Kernel::from_log_params(k.kind, 3, &up).unwrap().eval(&x, &y);
            let kd = Kernel::from_log_params(k.kind, 3, &down).unwrap().eval(&x, &y);
            let fd = (ku - kd) / (2.0 * h);
            prop_assert!((grad[i] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "param {}: {} vs {}", i, grad[i], fd);
        }
    }
}
