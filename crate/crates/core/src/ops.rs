//! Centered finite-difference operators on the periodic collocated grid.
//!
//! First derivatives use the ±1 neighbours; the Laplacian uses the ±2
//! composite stencil so that it equals `divergence(gradient(·))` exactly.

use crate::grid::{ScalarField, TensorField, VectorField};
use crate::scalar::Real;

/// Centered difference along x (the `i` axis).
pub fn diff_x<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let inv = T::one() / (T::lit(2.0) * f.spec().dx());
    ScalarField::from_index_fn(*f.spec(), |i, j| {
        let (i, j) = (i as isize, j as isize);
        (f.at(i + 1, j) - f.at(i - 1, j)) * inv
    })
}

/// Centered difference along y (the `j` axis).
pub fn diff_y<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let inv = T::one() / (T::lit(2.0) * f.spec().dx());
    ScalarField::from_index_fn(*f.spec(), |i, j| {
        let (i, j) = (i as isize, j as isize);
        (f.at(i, j + 1) - f.at(i, j - 1)) * inv
    })
}

/// `[u(i+1,j) - u(i-1,j) + v(i,j+1) - v(i,j-1)] / (2 dx)`.
pub fn divergence<T: Real>(x: &VectorField<T>) -> ScalarField<T> {
    let (u, v) = (x.u(), x.v());
    let two_dx = T::lit(2.0) * x.spec().dx();
    ScalarField::from_index_fn(*x.spec(), |i, j| {
        let (i, j) = (i as isize, j as isize);
        (u.at(i + 1, j) - u.at(i - 1, j) + v.at(i, j + 1) - v.at(i, j - 1)) / two_dx
    })
}

pub fn gradient<T: Real>(phi: &ScalarField<T>) -> VectorField<T> {
    VectorField::new(diff_x(phi), diff_y(phi)).expect("same grid")
}

/// `[φ(i+2,j) + φ(i-2,j) + φ(i,j+2) + φ(i,j-2) - 4φ(i,j)] / (4 dx²)`.
pub fn laplacian<T: Real>(phi: &ScalarField<T>) -> ScalarField<T> {
    let dx = phi.spec().dx();
    let denom = T::lit(4.0) * dx * dx;
    let four = T::lit(4.0);
    ScalarField::from_index_fn(*phi.spec(), |i, j| {
        let (i, j) = (i as isize, j as isize);
        (phi.at(i + 2, j) + phi.at(i - 2, j) + phi.at(i, j + 2) + phi.at(i, j - 2)
            - four * phi.at(i, j))
            / denom
    })
}

pub fn jacobian<T: Real>(x: &VectorField<T>) -> TensorField<T> {
    TensorField {
        du_dx: diff_x(x.u()),
        du_dy: diff_y(x.u()),
        dv_dx: diff_x(x.v()),
        dv_dy: diff_y(x.v()),
    }
}

/// Scalar vorticity `∂v/∂x - ∂u/∂y`.
pub fn curl2d<T: Real>(x: &VectorField<T>) -> ScalarField<T> {
    diff_x(x.v()).sub(&diff_y(x.u()))
}

/// `(w·∇)f` for a scalar `f`.
pub fn advect_scalar<T: Real>(w: &VectorField<T>, f: &ScalarField<T>) -> ScalarField<T> {
    debug_assert_eq!(w.spec(), f.spec());
    let fx = diff_x(f);
    let fy = diff_y(f);
    ScalarField::from_index_fn(*f.spec(), |i, j| {
        w.u().get(i, j) * fx.get(i, j) + w.v().get(i, j) * fy.get(i, j)
    })
}

/// `(w·∇)X` applied to each component of `X`.
pub fn advect<T: Real>(w: &VectorField<T>, x: &VectorField<T>) -> VectorField<T> {
    VectorField::new(advect_scalar(w, x.u()), advect_scalar(w, x.v())).expect("same grid")
}

/// Discretely divergence-free field `(D_y ψ, -D_x ψ)` built from a stream function.
pub fn stream_field<T: Real>(psi: &ScalarField<T>) -> VectorField<T> {
    VectorField::new(diff_y(psi), diff_x(psi).scale(-T::one())).expect("same grid")
}
