//! Pointwise 3D vector-calculus identities relating the impulse and velocity
//! forms of the equations.
//!
//! For smooth fields `v`, `z` with Jacobians `Tv`, `Tz` (`T[i][j] = ∂_j f_i`):
//!
//! 1. `(Tv)ᵀ z = (z·∇)v + z × curl v`
//! 2. `Tz(v) = (v·∇)z`
//! 3. `(v·∇)z + (z·∇)v + z × curl v = ∇(v·z) - v × curl z`
//!
//! Every term is assembled from exact, analytically supplied Jacobians, so the
//! residuals measure floating point error only.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::scalar::Real;

pub type Vec3<T> = [T; 3];
pub type Mat3<T> = [[T; 3]; 3];

type ValueFn<T> = Box<dyn Fn(Vec3<T>) -> Vec3<T> + Send + Sync>;
type JacobianFn<T> = Box<dyn Fn(Vec3<T>) -> Mat3<T> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdentityError {
    #[error("analytic jacobian disagrees with finite differences by {discrepancy:e} at {point:?}")]
    JacobianMismatch { discrepancy: f64, point: [f64; 3] },
}

/// Which identity to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IdentityItem {
    /// `(Tv)ᵀ z = (z·∇)v + z × curl v`
    TransposedJacobian = 1,
    /// `Tz(v) = (v·∇)z`
    DirectionalDerivative = 2,
    /// `(v·∇)z + (z·∇)v + z × curl v = ∇(v·z) - v × curl z`
    GradientOfDot = 3,
}

impl IdentityItem {
    pub const ALL: [IdentityItem; 3] = [
        Self::TransposedJacobian,
        Self::DirectionalDerivative,
        Self::GradientOfDot,
    ];

    pub fn number(self) -> usize {
        self as usize
    }

    pub fn from_number(n: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|it| it.number() == n)
    }
}

impl fmt::Display for IdentityItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "item {}", self.number())
    }
}

/// A vector field on ℝ³ together with its exact Jacobian.
pub struct AnalyticField3<T> {
    value: ValueFn<T>,
    jacobian: JacobianFn<T>,
}

impl<T: Real> fmt::Debug for AnalyticField3<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AnalyticField3")
    }
}

impl<T: Real> AnalyticField3<T> {
    pub fn new(
        value: impl Fn(Vec3<T>) -> Vec3<T> + Send + Sync + 'static,
        jacobian: impl Fn(Vec3<T>) -> Mat3<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            jacobian: Box::new(jacobian),
        }
    }

    pub fn constant(c: Vec3<T>) -> Self {
        Self::new(move |_| c, |_| [[T::zero(); 3]; 3])
    }

    /// `x ↦ A x + b`.
    pub fn affine(a: Mat3<T>, b: Vec3<T>) -> Self {
        Self::new(
            move |x| {
                let ax = mat_vec(&a, x);
                [ax[0] + b[0], ax[1] + b[1], ax[2] + b[2]]
            },
            move |_| a,
        )
    }

    /// Component `i` is `amp[i] sin(k[i]·x + phase[i])`.
    pub fn sinusoidal(amp: Vec3<T>, k: [Vec3<T>; 3], phase: Vec3<T>) -> Self {
        Self::new(
            move |x| std::array::from_fn(|i| amp[i] * (dot(k[i], x) + phase[i]).sin()),
            move |x| {
                std::array::from_fn(|i| {
                    let c = amp[i] * (dot(k[i], x) + phase[i]).cos();
                    [c * k[i][0], c * k[i][1], c * k[i][2]]
                })
            },
        )
    }

    pub fn value(&self, x: Vec3<T>) -> Vec3<T> {
        (self.value)(x)
    }

    pub fn jacobian(&self, x: Vec3<T>) -> Mat3<T> {
        (self.jacobian)(x)
    }

    /// Compares the supplied Jacobian with central differences at each probe.
    pub fn check_jacobian(&self, probes: &[Vec3<T>], h: T, tol: T) -> Result<(), IdentityError> {
        let two_h = T::lit(2.0) * h;
        for &p in probes {
            let exact = self.jacobian(p);
            let mut worst = T::zero();
            for j in 0..3 {
                let mut fwd = p;
                let mut back = p;
                fwd[j] = fwd[j] + h;
                back[j] = back[j] - h;
                let (vf, vb) = (self.value(fwd), self.value(back));
                for i in 0..3 {
                    let fd = (vf[i] - vb[i]) / two_h;
                    worst = worst.max((fd - exact[i][j]).abs());
                }
            }
            if !(worst <= tol) {
                return Err(IdentityError::JacobianMismatch {
                    discrepancy: worst.as_f64(),
                    point: p.map(|c| c.as_f64()),
                });
            }
        }
        Ok(())
    }
}

#[inline]
fn dot<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn add<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
fn sub<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn norm<T: Real>(a: Vec3<T>) -> T {
    dot(a, a).sqrt()
}

fn mat_vec<T: Real>(m: &Mat3<T>, x: Vec3<T>) -> Vec3<T> {
    [dot(m[0], x), dot(m[1], x), dot(m[2], x)]
}

fn mat_t_vec<T: Real>(m: &Mat3<T>, x: Vec3<T>) -> Vec3<T> {
    std::array::from_fn(|k| m[0][k] * x[0] + m[1][k] * x[1] + m[2][k] * x[2])
}

/// `curl f` from the antisymmetric part of its Jacobian.
pub fn curl_from_jacobian<T: Real>(j: &Mat3<T>) -> Vec3<T> {
    [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]]
}

/// `(a·∇)f = Σ_j a_j ∂_j f`, accumulated column by column.
fn directional<T: Real>(jf: &Mat3<T>, a: Vec3<T>) -> Vec3<T> {
    (0..3).fold([T::zero(); 3], |acc, j| {
        add(acc, [jf[0][j] * a[j], jf[1][j] * a[j], jf[2][j] * a[j]])
    })
}

/// `LHS - RHS` of the chosen identity at `p`.
pub fn identity_residual_vector<T: Real>(
    item: IdentityItem,
    v: &AnalyticField3<T>,
    z: &AnalyticField3<T>,
    p: Vec3<T>,
) -> Vec3<T> {
    let (vv, zv) = (v.value(p), z.value(p));
    let (jv, jz) = (v.jacobian(p), z.jacobian(p));
    match item {
        IdentityItem::TransposedJacobian => {
            let lhs = mat_t_vec(&jv, zv);
            let rhs = add(directional(&jv, zv), cross(zv, curl_from_jacobian(&jv)));
            sub(lhs, rhs)
        }
        IdentityItem::DirectionalDerivative => sub(mat_vec(&jz, vv), directional(&jz, vv)),
        IdentityItem::GradientOfDot => {
            let lhs = add(
                add(directional(&jz, vv), directional(&jv, zv)),
                cross(zv, curl_from_jacobian(&jv)),
            );
            // ∇(v·z) by the product rule.
            let grad_dot = add(mat_t_vec(&jv, zv), mat_t_vec(&jz, vv));
            let rhs = sub(grad_dot, cross(vv, curl_from_jacobian(&jz)));
            sub(lhs, rhs)
        }
    }
}

/// Euclidean norm of [`identity_residual_vector`].
pub fn identity_residual<T: Real>(
    item: IdentityItem,
    v: &AnalyticField3<T>,
    z: &AnalyticField3<T>,
    p: Vec3<T>,
) -> T {
    norm(identity_residual_vector(item, v, z, p))
}

/// Draws a random affine or sinusoidal field with O(1) coefficients.
pub fn random_field<T: Real, R: Rng + ?Sized>(rng: &mut R) -> AnalyticField3<T> {
    let affine = rng.gen_bool(0.5);
    let mut r = |lo: f64, hi: f64| T::lit(rng.gen_range(lo..hi));
    if affine {
        let a: Mat3<T> = std::array::from_fn(|_| std::array::from_fn(|_| r(-1.0, 1.0)));
        let b: Vec3<T> = std::array::from_fn(|_| r(-1.0, 1.0));
        AnalyticField3::affine(a, b)
    } else {
        let amp: Vec3<T> = std::array::from_fn(|_| r(-2.0, 2.0));
        let k: [Vec3<T>; 3] = std::array::from_fn(|_| std::array::from_fn(|_| r(-2.0, 2.0)));
        let phase: Vec3<T> = std::array::from_fn(|_| r(0.0, 6.3));
        AnalyticField3::sinusoidal(amp, k, phase)
    }
}

/// Largest residual per item over a batch of random draws.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport<T> {
    pub trials: usize,
    pub max_residual: [T; 3],
}

impl<T: Real> IdentityReport<T> {
    pub fn passes(&self, tol: T) -> bool {
        self.max_residual.iter().all(|&r| r <= tol)
    }
}

/// Evaluates all three identities on `trials` random field pairs, each at a
/// random point in `[-5, 5]³`.
pub fn check_identities<T: Real, R: Rng + ?Sized>(trials: usize, rng: &mut R) -> IdentityReport<T> {
    let mut max_residual = [T::zero(); 3];
    for _ in 0..trials {
        let v = random_field::<T, R>(rng);
        let z = random_field::<T, R>(rng);
        let p: Vec3<T> = std::array::from_fn(|_| T::lit(rng.gen_range(-5.0..5.0)));
        for item in IdentityItem::ALL {
            let r = identity_residual(item, &v, &z, p);
            let slot = &mut max_residual[item.number() - 1];
            *slot = slot.max(r);
        }
    }
    IdentityReport {
        trials,
        max_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trig_pair() -> (AnalyticField3<f64>, AnalyticField3<f64>) {
        // v = (sin y, sin z, sin x), z = (cos z, cos x, cos y)
        let v = AnalyticField3::new(
            |p: Vec3<f64>| [p[1].sin(), p[2].sin(), p[0].sin()],
            |p: Vec3<f64>| {
                [
                    [0.0, p[1].cos(), 0.0],
                    [0.0, 0.0, p[2].cos()],
                    [p[0].cos(), 0.0, 0.0],
                ]
            },
        );
        let z = AnalyticField3::new(
            |p: Vec3<f64>| [p[2].cos(), p[0].cos(), p[1].cos()],
            |p: Vec3<f64>| {
                [
                    [0.0, 0.0, -p[2].sin()],
                    [-p[0].sin(), 0.0, 0.0],
                    [0.0, -p[1].sin(), 0.0],
                ]
            },
        );
        (v, z)
    }

    #[test]
    fn constant_fields_have_zero_residual() {
        let v = AnalyticField3::constant([1.0, -2.0, 0.5]);
        let z = AnalyticField3::constant([0.3, 0.3, 4.0]);
        for item in IdentityItem::ALL {
            assert_eq!(identity_residual(item, &v, &z, [1.0, 2.0, 3.0]), 0.0);
        }
    }

    #[test]
    fn trigonometric_example_at_random_points() {
        let (v, z) = trig_pair();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let probes: Vec<Vec3<f64>> = (0..100)
            .map(|_| std::array::from_fn(|_| rng.gen_range(-10.0..10.0)))
            .collect();
        v.check_jacobian(&probes, 1e-5, 1e-6).unwrap();
        z.check_jacobian(&probes, 1e-5, 1e-6).unwrap();
        for &p in &probes {
            for item in IdentityItem::ALL {
                assert!(identity_residual(item, &v, &z, p) <= 1e-10);
            }
        }
    }

    #[test]
    fn jacobian_gate_catches_transcription_errors() {
        let wrong = AnalyticField3::new(
            |p: Vec3<f64>| [p[1].sin(), 0.0, 0.0],
            |p: Vec3<f64>| [[p[1].cos(), 0.0, 0.0], [0.0; 3], [0.0; 3]],
        );
        assert!(matches!(
            wrong.check_jacobian(&[[0.1, 0.2, 0.3]], 1e-5, 1e-6),
            Err(IdentityError::JacobianMismatch { .. })
        ));
    }

    #[test]
    fn wrong_identity_is_detected() {
        // Dropping the cross term from item 1 must leave a visible residual.
        let a = [[0.3, -1.2, 0.5], [0.9, 0.1, -0.4], [-0.7, 0.8, 0.2]];
        let v = AnalyticField3::affine(a, [0.0; 3]);
        let p = [0.4, -1.3, 2.2];
        let jv = v.jacobian(p);
        let zv = [1.0, 2.0, -0.5];
        assert!(norm(cross(zv, curl_from_jacobian(&jv))) > 0.1);
        let bogus = sub(mat_t_vec(&jv, zv), directional(&jv, zv));
        assert!(norm(bogus) > 0.1);
    }

    #[test]
    fn item_numbers_round_trip() {
        for item in IdentityItem::ALL {
            assert_eq!(IdentityItem::from_number(item.number()), Some(item));
        }
        assert_eq!(IdentityItem::from_number(4), None);
    }

    #[test]
    fn batch_check_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let report = check_identities::<f64, _>(500, &mut rng);
        assert_eq!(report.trials, 500);
        assert!(report.passes(1e-10), "{report:?}");
    }

    proptest! {
        #[test]
        fn affine_fields_satisfy_all_items(
            a in proptest::array::uniform3(proptest::array::uniform3(-3.0f64..3.0)),
            b in proptest::array::uniform3(proptest::array::uniform3(-3.0f64..3.0)),
            p in proptest::array::uniform3(-4.0f64..4.0),
        ) {
            let v = AnalyticField3::affine(a, [0.0; 3]);
            let z = AnalyticField3::affine(b, [0.0; 3]);
            for item in IdentityItem::ALL {
                prop_assert!(identity_residual(item, &v, &z, p) <= 1e-12);
            }
        }

        #[test]
        fn item_three_is_sum_of_item_one_both_ways(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_field::<f64, _>(&mut rng);
            let z = random_field::<f64, _>(&mut rng);
            let p: Vec3<f64> = std::array::from_fn(|_| rng.gen_range(-5.0..5.0));
            let r3 = identity_residual_vector(IdentityItem::GradientOfDot, &v, &z, p);
            let r1 = identity_residual_vector(IdentityItem::TransposedJacobian, &v, &z, p);
            let r1_swapped = identity_residual_vector(IdentityItem::TransposedJacobian, &z, &v, p);
            let combined = add(r1, r1_swapped);
            for k in 0..3 {
                prop_assert!((r3[k] + combined[k]).abs() <= 1e-12);
            }
        }

        #[test]
        fn random_fields_pass_the_jacobian_gate(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_field::<f64, _>(&mut rng);
            let p: Vec3<f64> = std::array::from_fn(|_| rng.gen_range(-5.0..5.0));
            prop_assert!(f.check_jacobian(&[p], 1e-5, 1e-6).is_ok());
        }
    }
}
