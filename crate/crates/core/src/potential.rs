//! Artificial obstacle potential `V = τ / ((x-a)² + (y-b)² - r²)`.

use thiserror::Error;

use crate::grid::{GridSpec, ScalarField, VectorField};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("obstacle radius must be positive, got {0}")]
    Radius(f64),
    #[error("potential strength must be non-negative, got {0}")]
    Strength(f64),
    #[error("regularization must be positive, got {0}")]
    Regularization(f64),
    #[error("obstacle center must be finite")]
    Center,
}

/// Circular obstacle barrier.
///
/// The denominator is floored at `regularization`: inside and on the circle the
/// potential is the constant `τ/ε` and its gradient vanishes. A strength of
/// zero switches the forcing off entirely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstaclePotential<T> {
    center: [T; 2],
    radius: T,
    strength: T,
    regularization: T,
}

impl<T: Real> ObstaclePotential<T> {
    pub const DEFAULT_REGULARIZATION: f64 = 1e-6;

    pub fn new(
        center: [T; 2],
        radius: T,
        strength: T,
        regularization: T,
    ) -> Result<Self, PotentialError> {
        if !(center[0].is_finite() && center[1].is_finite()) {
            return Err(PotentialError::Center);
        }
        if !(radius > T::zero() && radius.is_finite()) {
            return Err(PotentialError::Radius(radius.as_f64()));
        }
        if !(strength >= T::zero() && strength.is_finite()) {
            return Err(PotentialError::Strength(strength.as_f64()));
        }
        if !(regularization > T::zero() && regularization.is_finite()) {
            return Err(PotentialError::Regularization(regularization.as_f64()));
        }
        Ok(Self {
            center,
            radius,
            strength,
            regularization,
        })
    }

    /// Obstacle at (7, 7) with r = 0.5 and τ = 1.
    pub fn standard() -> Self {
        Self::new(
            [T::lit(7.0), T::lit(7.0)],
            T::lit(0.5),
            T::one(),
            T::lit(Self::DEFAULT_REGULARIZATION),
        )
        .expect("valid preset")
    }

    pub fn center(&self) -> [T; 2] {
        self.center
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn strength(&self) -> T {
        self.strength
    }

    pub fn regularization(&self) -> T {
        self.regularization
    }

    /// False when τ = 0; callers skip the forcing term entirely in that case.
    pub fn is_active(&self) -> bool {
        self.strength > T::zero()
    }

    #[inline]
    fn raw_denominator(&self, p: [T; 2]) -> T {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy - self.radius * self.radius
    }

    pub fn eval(&self, p: [T; 2]) -> T {
        let d = self.raw_denominator(p).max(self.regularization);
        self.strength / d
    }

    pub fn grad(&self, p: [T; 2]) -> [T; 2] {
        let d = self.raw_denominator(p);
        if d < self.regularization {
            return [T::zero(), T::zero()];
        }
        let k = -T::lit(2.0) * self.strength / (d * d);
        [k * (p[0] - self.center[0]), k * (p[1] - self.center[1])]
    }

    /// Samples `V` and `grad V` at every node.
    pub fn sample(&self, spec: GridSpec<T>) -> (ScalarField<T>, VectorField<T>) {
        let v = ScalarField::from_index_fn(spec, |i, j| self.eval(spec.node(i, j)));
        let g = VectorField::from_index_fn(spec, |i, j| self.grad(spec.node(i, j)));
        (v, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn standard() -> ObstaclePotential<f64> {
        ObstaclePotential::standard()
    }

    #[test]
    fn point_values() {
        assert_relative_eq!(standard().eval([7.0, 8.0]), 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(
            standard().eval([17.0, 7.0]),
            1.0 / 99.75,
            max_relative = 1e-15
        );
        assert_eq!(standard().eval([7.5, 7.0]), 1e6);
        assert_eq!(standard().eval([7.0, 7.0]), 1e6);
    }

    #[test]
    fn gradient_values() {
        assert_eq!(standard().grad([7.0, 7.0]), [0.0, 0.0]);
        let g = standard().grad([7.0, 8.0]);
        assert_eq!(g[0], 0.0);
        assert_relative_eq!(g[1], -2.0 / 0.5625, max_relative = 1e-15);
        assert!((g[1] + 3.5555).abs() < 1e-3);
        // Clamped region is flat.
        assert_eq!(standard().grad([7.2, 7.1]), [0.0, 0.0]);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ObstaclePotential::new([0.0, 0.0], 0.0, 1.0, 1e-6).is_err());
        assert!(ObstaclePotential::new([0.0, 0.0], 1.0, -1.0, 1e-6).is_err());
        assert!(ObstaclePotential::new([0.0, 0.0], 1.0, 1.0, 0.0).is_err());
        assert!(ObstaclePotential::new([f64::NAN, 0.0], 1.0, 1.0, 1e-6).is_err());
        assert!(!ObstaclePotential::new([0.0, 0.0], 1.0, 0.0, 1e-6)
            .unwrap()
            .is_active());
    }

    #[test]
    fn zero_strength_gives_zero_fields() {
        let p = ObstaclePotential::new([7.0, 7.0], 0.5, 0.0, 1e-6).unwrap();
        let (v, g) = p.sample(GridSpec::standard());
        assert_eq!(v.max_abs(), 0.0);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn sampled_fields_match_pointwise_calls() {
        let spec = GridSpec::<f64>::standard();
        let (v, g) = standard().sample(spec);
        for (i, j) in spec.indices() {
            let p = spec.node(i, j);
            assert_eq!(v.get(i, j), standard().eval(p));
            assert_eq!(g.get(i, j), standard().grad(p));
        }
    }

    #[test]
    fn grid_maximum_sits_at_node_nearest_the_circle() {
        // Small radius so that no node falls inside the circle.
        let pot = ObstaclePotential::new([7.0, 7.0], 0.1, 1.0, 1e-6).unwrap();
        let spec = GridSpec::<f64>::standard();
        let (v, _) = pot.sample(spec);
        let nearest = spec
            .indices()
            .min_by(|&(a, b), &(c, d)| {
                let dist = |p: [f64; 2]| ((p[0] - 7.0).hypot(p[1] - 7.0) - 0.1).abs();
                dist(spec.node(a, b)).total_cmp(&dist(spec.node(c, d)))
            })
            .unwrap();
        let argmax = spec
            .indices()
            .max_by(|&(a, b), &(c, d)| v.get(a, b).total_cmp(&v.get(c, d)))
            .unwrap();
        assert_eq!(argmax, nearest);
        assert_eq!(argmax, (17, 17));
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(x in 0.0f64..12.5, y in 0.0f64..12.5) {
            let pot = standard();
            let d = (x - 7.0).powi(2) + (y - 7.0).powi(2) - 0.25;
            prop_assume!(d >= 0.05);
            let h = 1e-6;
            let fd = [
                (pot.eval([x + h, y]) - pot.eval([x - h, y])) / (2.0 * h),
                (pot.eval([x, y + h]) - pot.eval([x, y - h])) / (2.0 * h),
            ];
            let g = pot.grad([x, y]);
            for k in 0..2 {
                prop_assert!((fd[k] - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0), "{:?} vs {:?}", fd, g);
            }
        }
    }
}
