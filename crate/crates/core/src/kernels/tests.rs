use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::seeds::rng_from_seed;

const DX: usize = 3;
const DZ: usize = 2;

fn random_inputs(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    DMatrix::from_fn(n, DX + DZ, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn default_kernel(seed: u64) -> Kernel {
    let mut rng = rng_from_seed(seed);
    let mut sl = StateLinear::init(DX, DZ, 5, 0.7, 0.9, &mut rng);
    // make the output layers non-trivial
    for w in sl.bias_net.w2.iter_mut().chain(&mut sl.scale_net.w2).chain(&mut sl.centre_net.w2) {
        *w = rng.sample::<f64, _>(StandardNormal) * 0.5;
    }
    Kernel::product(
        Kernel::StateLinear(sl),
        Kernel::ArdRbf(ArdRbf::new(DX, &[0.8, 1.7], 1.3)),
    )
}

fn all_kernels(seed: u64) -> Vec<Kernel> {
    let prod = default_kernel(seed);
    let Kernel::Product(a, b) = prod.clone() else { unreachable!() };
    vec![
        Kernel::ArdRbf(ArdRbf::new(0, &[0.5, 1.0, 2.0, 1.5, 0.7], 2.0)),
        *a,
        *b,
        prod,
    ]
}

#[test]
fn ard_diagonal_is_signal_variance() {
    let k = Kernel::ArdRbf(ArdRbf::new(0, &[0.3, 2.0, 1.0, 1.0, 1.0], 1.7));
    let x = random_inputs(4, 1);
    let g = k.matrix(&x, &x).unwrap();
    for i in 0..4 {
        assert!((g[(i, i)] - 1.7).abs() < 1e-12);
    }
}

#[test]
fn ard_hand_value() {
    let k = Kernel::ArdRbf(ArdRbf::new(0, &[1.0], 1.0));
    let v = k.eval(&[0.0], &[1.0]);
    assert!((v - (-0.5f64).exp()).abs() < 1e-12);
    assert!((v - 0.60653).abs() < 1e-5);
}

#[test]
fn state_linear_reduces_to_dot_product() {
    let k = Kernel::StateLinear(StateLinear::constant(DX, DZ, 4, 0.0, 1.0));
    let x = random_inputs(5, 2);
    let g = k.matrix(&x, &x).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let dot: f64 = (0..DX).map(|d| x[(i, d)] * x[(j, d)]).sum();
            assert!((g[(i, j)] - dot).abs() < 1e-10);
        }
    }
}

#[test]
fn state_linear_bias_only() {
    // v = softplus(raw) cannot be exactly zero; a very negative raw output makes it vanish
    let mut sl = StateLinear::constant(DX, DZ, 4, 1.0, 1.0);
    sl.scale_net.b2[0] = -800.0;
    let k = Kernel::StateLinear(sl);
    let x = random_inputs(4, 3);
    let mut y = random_inputs(4, 4);
    for i in 0..4 {
        for d in DX..DX + DZ {
            y[(i, d)] = x[(i, d)];
        }
    }
    for i in 0..4 {
        let a: Vec<f64> = x.row(i).iter().copied().collect();
        let b: Vec<f64> = y.row(i).iter().copied().collect();
        assert!((k.eval(&a, &b) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn symmetric_and_psd() {
    for (s, k) in all_kernels(5).into_iter().enumerate() {
        let x = random_inputs(20, 10 + s as u64);
        let g = k.matrix(&x, &x).unwrap();
        assert!((&g - g.transpose()).amax() < 1e-12, "{}", k.variant_name());
        let eig = SymmetricEigen::new(g);
        let min = eig.eigenvalues.min();
        assert!(min >= -1e-8, "{} min eigenvalue {min}", k.variant_name());
    }
}

#[test]
fn diag_matches_matrix() {
    for k in all_kernels(6) {
        let x = random_inputs(7, 9);
        let g = k.matrix(&x, &x).unwrap();
        let d = k.diag(&x).unwrap();
        assert!((g.diagonal() - d).amax() < 1e-12);
    }
}

#[test]
fn product_is_elementwise_product_exactly() {
    let k = default_kernel(8);
    let Kernel::Product(a, b) = &k else { unreachable!() };
    let x = random_inputs(6, 1);
    let y = random_inputs(4, 2);
    let full = k.matrix(&x, &y).unwrap();
    let manual = a.matrix(&x, &y).unwrap().component_mul(&b.matrix(&x, &y).unwrap());
    assert_eq!(full, manual);
}

#[test]
fn dimension_mismatch_is_config_error() {
    let k = default_kernel(1);
    let x = DMatrix::zeros(2, DX + DZ - 1);
    assert!(matches!(k.matrix(&x, &x), Err(Error::Config(_))));
    let y = DMatrix::zeros(2, DX + DZ);
    assert!(matches!(k.matrix(&x, &y), Err(Error::Config(_))));
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1e-2)
}

/// Central finite differences of `L = Σ W ∘ K(a, b) + Σ w ∘ diag(a)` against
/// the analytic backward pass, for parameters and both inputs.
#[test]
fn gradients_match_finite_differences() {
    let h = 1e-6;
    for (s, k) in all_kernels(3).into_iter().enumerate() {
        let a = random_inputs(4, 20 + s as u64);
        let b = random_inputs(3, 30 + s as u64);
        let mut rng = rng_from_seed(40 + s as u64);
        let wm = DMatrix::from_fn(4, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let wd = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let loss = |k: &Kernel, a: &DMatrix<f64>, b: &DMatrix<f64>| {
            k.matrix(a, b).unwrap().component_mul(&wm).sum() + k.diag(a).unwrap().dot(&wd)
        };

        let mut grad = vec![0.0; k.n_params()];
        let mut da = DMatrix::zeros(4, DX + DZ);
        let mut db = DMatrix::zeros(3, DX + DZ);
        k.backward(&a, &b, &wm, &mut grad, Some(&mut da), Some(&mut db));
        k.backward_diag(&a, &wd, &mut grad, Some(&mut da));

        let raw = k.raw_params();
        for p in 0..raw.len() {
            let mut kp = k.clone();
            let mut r = raw.clone();
            r[p] += h;
            kp.set_raw_params(&r);
            let up = loss(&kp, &a, &b);
            r[p] -= 2.0 * h;
            kp.set_raw_params(&r);
            let down = loss(&kp, &a, &b);
            let fd = (up - down) / (2.0 * h);
            assert!(close(fd, grad[p]), "{} param {p}: fd {fd} vs {}", k.variant_name(), grad[p]);
        }
        for (input, analytic, is_a) in [(&a, &da, true), (&b, &db, false)] {
            for i in 0..input.nrows() {
                for c in 0..input.ncols() {
                    let mut plus = input.clone();
                    plus[(i, c)] += h;
                    let mut minus = input.clone();
                    minus[(i, c)] -= h;
                    let (up, down) = if is_a {
                        (loss(&k, &plus, &b), loss(&k, &minus, &b))
                    } else {
                        (loss(&k, &a, &plus), loss(&k, &a, &minus))
                    };
                    let fd = (up - down) / (2.0 * h);
                    assert!(
                        close(fd, analytic[(i, c)]),
                        "{} input ({i},{c}): fd {fd} vs {}",
                        k.variant_name(),
                        analytic[(i, c)]
                    );
                }
            }
        }
    }
}

#[test]
fn json_uses_natural_values_and_round_trips() {
    let k = default_kernel(4);
    let json = serde_json::to_string(&k).unwrap();
    assert!(json.contains(r#""variant":"product""#));
    assert!(json.contains(r#""lengthscales":[0.8"#), "{json}");
    let back: Kernel = serde_json::from_str(&json).unwrap();
    let x = random_inputs(5, 5);
    let d = back.matrix(&x, &x).unwrap() - k.matrix(&x, &x).unwrap();
    assert!(d.amax() < 1e-12);
}

#[test]
fn latent_factor_capability() {
    assert!(default_kernel(1).latent_factor(DX).is_ok());
    let ard = Kernel::ArdRbf(ArdRbf::new(0, &[1.0; 5], 1.0));
    assert!(matches!(ard.latent_factor(DX), Err(Error::Capability(_))));
}
