//! Kelvin transform algebra and the inversion change of measure for Brownian
//! motion killed at a small ball.

use std::sync::Arc;

use slm_core::kelvin::*;
use slm_core::mc::joint_z;
use slm_core::{McPlan, RandomSource};

fn field(f: fn(&[f64]) -> f64) -> ScalarField<f64> {
    ScalarField::new(3, Arc::new(f)).unwrap()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Uniform random point with norm in `[lo, hi]`.
fn random_point(src: &mut RandomSource, lo: f64, hi: f64) -> [f64; 3] {
    let dir = [src.gaussian(), src.gaussian(), src.gaussian()];
    let r = lo + (hi - lo) * src.uniform();
    let n = norm(&dir);
    [r * dir[0] / n, r * dir[1] / n, r * dir[2] / n]
}

#[test]
fn inversion_is_an_involution() {
    let mut src = RandomSource::new(501, 0);
    for _ in 0..200 {
        let x = random_point(&mut src, 1e-3, 1e3);
        let back = invert_point(&invert_point(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
        let star = invert_point(&x).unwrap();
        assert!((norm(&star) * norm(&x) - 1.0).abs() < 1e-14);
    }
    assert_eq!(invert_point(&[2.0, 0.0, 0.0]).unwrap(), vec![0.5, 0.0, 0.0]);
    for e in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        assert_eq!(invert_point(&e).unwrap(), e.to_vec());
    }
}

#[test]
fn kelvin_transform_is_an_involution() {
    let u = field(|x| x[0] * x[1]);
    let kk = kelvin_transform(&kelvin_transform(&u));
    let mut src = RandomSource::new(502, 0);
    for _ in 0..100 {
        let y = random_point(&mut src, 0.1, 10.0);
        let (a, b) = (u.eval(&y).unwrap(), kk.eval(&y).unwrap());
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{y:?}: {a} vs {b}");
    }
}

#[test]
fn transforms_of_simple_fields() {
    let k1 = kelvin_transform(&field(|_| 1.0));
    let kx = kelvin_transform(&field(|x| x[0]));
    let mut src = RandomSource::new(503, 0);
    for _ in 0..20 {
        let y = random_point(&mut src, 0.5, 3.0);
        let r = norm(&y);
        assert!((k1.eval(&y).unwrap() - 1.0 / r).abs() < 1e-14);
        assert!((kx.eval(&y).unwrap() - y[0] / r.powi(3)).abs() < 1e-14);
    }
}

#[test]
fn guards_follow_the_inversion() {
    let outside = field(|x| x[0]).with_guard(Arc::new(|x: &[f64]| norm(x) > 2.0));
    let k = kelvin_transform(&outside);
    assert!(k.contains(&[0.25, 0.0, 0.0]));
    assert!(!k.contains(&[1.0, 0.0, 0.0]));
    assert!(k.eval(&[1.0, 0.0, 0.0]).is_err());
    assert!(!k.contains(&[0.0, 0.0, 0.0]));
    assert!(!k.contains(&[0.25, 0.0]));
}

#[test]
fn commutation_residual_is_second_order() {
    let steps = [1e-2, 5e-3, 2.5e-3];
    let y = [0.7, -0.4, 0.5];
    for (name, u) in reference_fields::<f64>(3).unwrap() {
        let res: Vec<f64> = steps
            .iter()
            .map(|&h| laplacian_commutation_residual(&u, &y, h).unwrap())
            .collect();
        let order = observed_order(&steps, &res).unwrap();
        assert!(order >= 1.9, "{name}: order {order}, residuals {res:?}");
        let packaged = commutation_order(&u, &y, &steps).unwrap();
        assert_eq!(packaged.order, order);
    }
}

#[test]
fn laplacian_of_transformed_square_norm() {
    // K[|x|^2](y) = |y|^{-3} and Δ|y|^{-3} = 6 |y|^{-5}.
    let ku = kelvin_transform(&field(|x| x.iter().map(|v| v * v).sum()));
    let s = 2.0 / 3f64.sqrt();
    let y = [s, s, s];
    let fd = laplacian_fd(&ku, &y, 1e-3).unwrap();
    assert!((fd - 0.1875).abs() < 1e-3, "{fd}");
    assert!((6.0 * 2f64.powi(-5) - 0.1875).abs() < 1e-15);
}

#[test]
fn transformed_coordinate_is_harmonic() {
    let u = field(|x| x[0]);
    let mut src = RandomSource::new(504, 0);
    for _ in 0..20 {
        let y = random_point(&mut src, 2.0, 4.0);
        let r = laplacian_commutation_residual(&u, &y, 1e-3).unwrap();
        assert!(r <= 1e-6, "{y:?}: {r}");
    }
}

#[test]
fn f32_operator() {
    let u = ScalarField::<f32>::new(3, Arc::new(|x: &[f32]| x[0] * x[1])).unwrap();
    let kk = kelvin_transform(&kelvin_transform(&u));
    let y = [0.3f32, 1.2, -0.8];
    assert!((kk.eval(&y).unwrap() - u.eval(&y).unwrap()).abs() < 1e-5);
}

#[test]
fn constant_field_gives_unit_weight_mean() {
    let plan = McPlan::new(20_000, 505);
    let p = conformal_inversion_check(0.5, [1.0, 0.0, 0.0], &BoundedField::constant(1.0), 0.5, &plan).unwrap();
    assert_eq!(p.lhs.mean, 1.0);
    assert!(p.rhs.within(1.0, 3.0), "{p:?}");
    assert!(p.weight_mean.within(1.0, 3.0), "{p:?}");
}

#[test]
fn inversion_identity_and_reweighted_coordinates() {
    let u = BoundedField::new(5.0, Arc::new(|x: &[f64]| norm(x).min(5.0)));
    let ts = [0.25, 0.5, 1.0];
    let prof = conformal_inversion_profile(0.5, [1.0, 0.0, 0.0], &u, &ts, &McPlan::new(30_000, 506)).unwrap();
    let start = [1.0, 0.0, 0.0];
    for p in &prof {
        assert!(joint_z(&p.lhs, &p.rhs) < 3.0, "{p:?}");
        assert!(p.weight_mean.within(1.0, 3.0), "{p:?}");
        for i in 0..3 {
            assert!(p.inverted_mean[i].within(start[i], 3.0), "t={} i={i}: {:?}", p.t, p.inverted_mean[i]);
        }
    }
}

#[test]
fn inverted_coordinates_are_conformal() {
    let cov = inverted_covariation(0.5, [0.0, 1.0, 0.0], 0.5, &McPlan::new(10_000, 507)).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                assert!(joint_z(&cov[i][i], &cov[(i + 1) % 3][(i + 1) % 3]) < 3.0, "{cov:?}");
            } else {
                assert!(cov[i][j].within(0.0, 3.0), "({i},{j}): {:?}", cov[i][j]);
            }
        }
    }
}

#[test]
fn experiment_arguments() {
    let plan = McPlan::new(10, 1);
    let one = BoundedField::constant(1.0);
    assert!(conformal_inversion_check(1.5, [1.0, 0.0, 0.0], &one, 0.5, &plan).is_err());
    assert!(conformal_inversion_check(0.5, [2.0, 0.0, 0.0], &one, 0.5, &plan).is_err());
    let unbounded = BoundedField::new(f64::INFINITY, Arc::new(|x: &[f64]| x[0]));
    assert!(conformal_inversion_check(0.5, [1.0, 0.0, 0.0], &unbounded, 0.5, &plan).is_err());
    assert!(conformal_inversion_profile(0.5, [1.0, 0.0, 0.0], &one, &[1.0, 0.5], &plan).is_err());
}
