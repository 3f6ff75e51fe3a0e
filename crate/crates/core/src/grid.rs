//! Periodic square grid, node-collocated field storage and interpolation.
//!
//! Node `(i, j)` sits at `(i * dx, j * dx)`. The border `x = L` is identified
//! with `x = 0` on both axes, so every index is taken modulo `n`.

use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid resolution must be even and at least 6, got {0}")]
    BadResolution(usize),
    #[error("domain length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("non-finite sample at node ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    SpecMismatch,
}

/// Maps a signed index onto `[0, n)`.
#[inline]
pub fn wrap_index(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    i.rem_euclid(n as isize) as usize
}

/// Geometry of the periodic square `[0, L)²` sampled with `n` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    n: usize,
    length: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(n: usize, length: T) -> Result<Self, GridError> {
        if n < 6 || !n.is_multiple_of(2) {
            return Err(GridError::BadResolution(n));
        }
        if !(length.is_finite() && length > T::zero()) {
            return Err(GridError::BadLength(length.as_f64()));
        }
        Ok(Self { n, length })
    }

    /// The 30×30 grid on `[0, 4π)²`.
    pub fn standard() -> Self {
        Self::new(30, T::lit(4.0) * T::PI()).expect("valid preset")
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn length(&self) -> T {
        self.length
    }

    #[inline]
    pub fn dx(&self) -> T {
        self.length / T::from_count(self.n)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Flat offset of node `(i, j)`; `i` is the slow axis.
    #[inline]
    pub fn offset(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Flat offset of a node given possibly out-of-range signed indices.
    #[inline]
    pub fn wrapped_offset(&self, i: isize, j: isize) -> usize {
        self.offset(wrap_index(i, self.n), wrap_index(j, self.n))
    }

    /// Physical position of node `(i, j)`.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> [T; 2] {
        let dx = self.dx();
        [T::from_count(i) * dx, T::from_count(j) * dx]
    }

    /// Wraps a coordinate into `[0, L)`.
    #[inline]
    pub fn wrap_coord(&self, x: T) -> T {
        let l = self.length;
        let w = x - l * (x / l).floor();
        if w >= l || w < T::zero() {
            T::zero()
        } else {
            w
        }
    }

    #[inline]
    pub fn wrap_point(&self, p: [T; 2]) -> [T; 2] {
        [self.wrap_coord(p[0]), self.wrap_coord(p[1])]
    }

    /// Iterator over all `(i, j)` pairs in storage order.
    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.n;
        (0..n).flat_map(move |i| (0..n).map(move |j| (i, j)))
    }

    /// Cell corner indices and fractional offsets used by bilinear interpolation.
    #[inline]
    fn cell(&self, p: [T; 2]) -> ([usize; 2], [usize; 2], [T; 2]) {
        let dx = self.dx();
        let mut lo = [0usize; 2];
        let mut hi = [0usize; 2];
        let mut frac = [T::zero(); 2];
        for axis in 0..2 {
            let s = self.wrap_coord(p[axis]) / dx;
            let f = s.floor();
            let base = f.to_isize().unwrap_or(0);
            lo[axis] = wrap_index(base, self.n);
            hi[axis] = wrap_index(base + 1, self.n);
            frac[axis] = s - f;
        }
        (lo, hi, frac)
    }
}

/// Scalar samples on every node of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    spec: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(spec: GridSpec<T>) -> Self {
        Self::constant(spec, T::zero())
    }

    pub fn constant(spec: GridSpec<T>, c: T) -> Self {
        Self {
            spec,
            values: vec![c; spec.len()],
        }
    }

    /// Wraps raw row-major samples, rejecting wrong lengths and non-finite entries.
    pub fn from_values(spec: GridSpec<T>, values: Vec<T>) -> Result<Self, GridError> {
        if values.len() != spec.len() {
            return Err(GridError::LengthMismatch {
                expected: spec.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|x| !x.is_finite()) {
            return Err(GridError::NonFinite {
                i: k / spec.n(),
                j: k % spec.n(),
            });
        }
        Ok(Self { spec, values })
    }

    /// Like [`ScalarField::from_values`] but keeps non-finite entries.
    pub fn from_raw_values(spec: GridSpec<T>, values: Vec<T>) -> Result<Self, GridError> {
        if values.len() != spec.len() {
            return Err(GridError::LengthMismatch {
                expected: spec.len(),
                got: values.len(),
            });
        }
        Ok(Self { spec, values })
    }

    /// Builds a field from a function of node indices.
    pub fn from_index_fn(spec: GridSpec<T>, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let values = spec.indices().map(|(i, j)| f(i, j)).collect();
        Self { spec, values }
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec<T> {
        &self.spec
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.spec.offset(i, j)]
    }

    /// Periodic access with signed indices.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> T {
        self.values[self.spec.wrapped_offset(i, j)]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.spec, other.spec);
        Self {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    pub fn min_max(&self) -> (T, T) {
        self.values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            })
    }

    pub fn sum(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &x| acc + x)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    /// Bilinear interpolation at an arbitrary point, wrapped into the domain.
    pub fn interpolate(&self, p: [T; 2]) -> T {
        let ([i0, j0], [i1, j1], [s, t]) = self.spec.cell(p);
        let one = T::one();
        let f00 = self.get(i0, j0);
        let f10 = self.get(i1, j0);
        let f01 = self.get(i0, j1);
        let f11 = self.get(i1, j1);
        (one - s) * (one - t) * f00 + s * (one - t) * f10 + (one - s) * t * f01 + s * t * f11
    }
}

impl<T> Index<(usize, usize)> for ScalarField<T>
where
    T: Real,
{
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.values[self.spec.offset(i, j)]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for ScalarField<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        let k = self.spec.offset(i, j);
        &mut self.values[k]
    }
}

/// Two-component field: `u` along x, `v` along y.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    u: ScalarField<T>,
    v: ScalarField<T>,
}

impl<T: Real> VectorField<T> {
    pub fn new(u: ScalarField<T>, v: ScalarField<T>) -> Result<Self, GridError> {
        if u.spec != v.spec {
            return Err(GridError::SpecMismatch);
        }
        Ok(Self { u, v })
    }

    pub fn zeros(spec: GridSpec<T>) -> Self {
        Self {
            u: ScalarField::zeros(spec),
            v: ScalarField::zeros(spec),
        }
    }

    pub fn constant(spec: GridSpec<T>, c: [T; 2]) -> Self {
        Self {
            u: ScalarField::constant(spec, c[0]),
            v: ScalarField::constant(spec, c[1]),
        }
    }

    pub fn from_index_fn(spec: GridSpec<T>, mut f: impl FnMut(usize, usize) -> [T; 2]) -> Self {
        let n = spec.len();
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for (i, j) in spec.indices() {
            let [a, b] = f(i, j);
            u.push(a);
            v.push(b);
        }
        Self {
            u: ScalarField { spec, values: u },
            v: ScalarField { spec, values: v },
        }
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec<T> {
        self.u.spec()
    }

    #[inline]
    pub fn u(&self) -> &ScalarField<T> {
        &self.u
    }

    #[inline]
    pub fn v(&self) -> &ScalarField<T> {
        &self.v
    }

    pub fn u_mut(&mut self) -> &mut ScalarField<T> {
        &mut self.u
    }

    pub fn v_mut(&mut self) -> &mut ScalarField<T> {
        &mut self.v
    }

    pub fn into_components(self) -> (ScalarField<T>, ScalarField<T>) {
        (self.u, self.v)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> [T; 2] {
        [self.u.get(i, j), self.v.get(i, j)]
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField<T>) -> ScalarField<T>) -> Self {
        Self {
            u: f(&self.u),
            v: f(&self.v),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            u: self.u.add(&other.u),
            v: self.v.add(&other.v),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            u: self.u.sub(&other.u),
            v: self.v.sub(&other.v),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            u: self.u.scale(s),
            v: self.v.scale(s),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        Self {
            u: self.u.zip_map(&other.u, |a, b| a + s * b),
            v: self.v.zip_map(&other.v, |a, b| a + s * b),
        }
    }

    /// Largest absolute component value.
    pub fn max_abs(&self) -> T {
        self.u.max_abs().max(self.v.max_abs())
    }

    /// Largest node speed `sqrt(u² + v²)`.
    pub fn max_speed(&self) -> T {
        self.u
            .values
            .iter()
            .zip(&self.v.values)
            .fold(T::zero(), |acc, (&a, &b)| acc.max(a.hypot(b)))
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn interpolate(&self, p: [T; 2]) -> [T; 2] {
        [self.u.interpolate(p), self.v.interpolate(p)]
    }
}

/// Per-node 2×2 Jacobian `[[∂u/∂x, ∂u/∂y], [∂v/∂x, ∂v/∂y]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField<T> {
    pub du_dx: ScalarField<T>,
    pub du_dy: ScalarField<T>,
    pub dv_dx: ScalarField<T>,
    pub dv_dy: ScalarField<T>,
}

impl<T: Real> TensorField<T> {
    pub fn zeros(spec: GridSpec<T>) -> Self {
        Self {
            du_dx: ScalarField::zeros(spec),
            du_dy: ScalarField::zeros(spec),
            dv_dx: ScalarField::zeros(spec),
            dv_dy: ScalarField::zeros(spec),
        }
    }

    pub fn spec(&self) -> &GridSpec<T> {
        self.du_dx.spec()
    }

    pub fn get(&self, i: usize, j: usize) -> [[T; 2]; 2] {
        [
            [self.du_dx.get(i, j), self.du_dy.get(i, j)],
            [self.dv_dx.get(i, j), self.dv_dy.get(i, j)],
        ]
    }

    pub fn interpolate(&self, p: [T; 2]) -> [[T; 2]; 2] {
        [
            [self.du_dx.interpolate(p), self.du_dy.interpolate(p)],
            [self.dv_dx.interpolate(p), self.dv_dy.interpolate(p)],
        ]
    }

    pub fn max_abs(&self) -> T {
        self.du_dx
            .max_abs()
            .max(self.du_dy.max_abs())
            .max(self.dv_dx.max_abs())
            .max(self.dv_dy.max_abs())
    }
}

/// Samples `f(x, y)` at every node.
pub fn sample_analytic<T: Real>(
    spec: GridSpec<T>,
    f: impl Fn(T, T) -> T,
) -> Result<ScalarField<T>, GridError> {
    let mut values = Vec::with_capacity(spec.len());
    for (i, j) in spec.indices() {
        let [x, y] = spec.node(i, j);
        let s = f(x, y);
        if !s.is_finite() {
            return Err(GridError::NonFinite { i, j });
        }
        values.push(s);
    }
    Ok(ScalarField { spec, values })
}

/// Samples the pair `(fu, fv)` at every node.
pub fn sample_analytic_vector<T: Real>(
    spec: GridSpec<T>,
    fu: impl Fn(T, T) -> T,
    fv: impl Fn(T, T) -> T,
) -> Result<VectorField<T>, GridError> {
    Ok(VectorField {
        u: sample_analytic(spec, fu)?,
        v: sample_analytic(spec, fv)?,
    })
}

/// Initial velocity `u = -sin y cos x`, `v = sin y cos x`.
pub fn demo_initial_velocity<T: Real>(spec: GridSpec<T>) -> VectorField<T> {
    sample_analytic_vector(spec, |x, y| -y.sin() * x.cos(), |x, y| y.sin() * x.cos())
        .expect("bounded trigonometric samples")
}

/// Taylor-Green vortex `u = sin x cos y`, `v = -cos x sin y`.
pub fn taylor_green_velocity<T: Real>(spec: GridSpec<T>) -> VectorField<T> {
    sample_analytic_vector(spec, |x, y| x.sin() * y.cos(), |x, y| -x.cos() * y.sin())
        .expect("bounded trigonometric samples")
}
