//! Discrete Poisson solve and Helmholtz projection.
//!
//! The ±2 Laplacian only couples nodes whose indices share parity on each
//! axis, so on an even periodic grid it splits into four decoupled subgrids.
//! Its nullspace is one constant per subgrid: right-hand sides are made
//! compatible by removing the per-class mean, and solutions are normalized to
//! zero per-class mean.

use std::fmt;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridSpec, ScalarField, VectorField};
use crate::ops::{divergence, gradient, laplacian};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoissonError {
    #[error(
        "poisson solve did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("invalid poisson configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    /// Conjugate gradients on the negated (positive semidefinite) Laplacian.
    #[default]
    ConjugateGradient,
    /// Diagonalization by discrete Fourier modes.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonConfig<T> {
    /// Bound on `max |Δφ - rhs|` after compatibility correction.
    pub tolerance: T,
    pub max_iterations: usize,
    pub method: SolverMethod,
}

impl<T: Real> PoissonConfig<T> {
    pub const DEFAULT_TOLERANCE: f64 = 1e-10;

    /// Defaults for a grid: tolerance 1e-10 and `20 n²` iterations.
    pub fn for_grid(spec: &GridSpec<T>) -> Self {
        Self {
            tolerance: T::lit(Self::DEFAULT_TOLERANCE),
            max_iterations: 20 * spec.len(),
            method: SolverMethod::ConjugateGradient,
        }
    }

    pub fn with_method(mut self, method: SolverMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_tolerance(mut self, tolerance: T) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<(), PoissonError> {
        if !(self.tolerance > T::zero()) {
            return Err(PoissonError::InvalidConfig("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(PoissonError::InvalidConfig(
                "max_iterations must be positive",
            ));
        }
        Ok(())
    }
}

/// Subgrid of nodes sharing `(i mod 2, j mod 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParityClass {
    EE,
    EO,
    OE,
    OO,
}

impl ParityClass {
    pub const ALL: [ParityClass; 4] = [Self::EE, Self::EO, Self::OE, Self::OO];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ParityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[inline]
pub fn parity_class(i: usize, j: usize) -> ParityClass {
    match (i % 2, j % 2) {
        (0, 0) => ParityClass::EE,
        (0, _) => ParityClass::EO,
        (_, 0) => ParityClass::OE,
        _ => ParityClass::OO,
    }
}

/// Mean of the field over each parity class, indexed by [`ParityClass::index`].
pub fn parity_means<T: Real>(f: &ScalarField<T>) -> [T; 4] {
    let spec = f.spec();
    let mut sums = [T::zero(); 4];
    for (i, j) in spec.indices() {
        let c = parity_class(i, j).index();
        sums[c] = sums[c] + f.get(i, j);
    }
    // Even n: every class holds exactly n²/4 nodes.
    let count = T::from_count(spec.len() / 4);
    sums.map(|s| s / count)
}

/// Subtracts the per-class mean, projecting onto the range of the Laplacian.
pub fn remove_parity_means<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let means = parity_means(f);
    ScalarField::from_index_fn(*f.spec(), |i, j| {
        f.get(i, j) - means[parity_class(i, j).index()]
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution<T> {
    pub phi: ScalarField<T>,
    /// `max |Δφ - r̃|` where `r̃` is the compatible right-hand side.
    pub residual: T,
    pub iterations: usize,
}

/// Solves `Δφ = rhs` up to the per-class compatibility correction.
pub fn poisson_solve<T: Real>(
    rhs: &ScalarField<T>,
    cfg: &PoissonConfig<T>,
) -> Result<PoissonSolution<T>, PoissonError> {
    cfg.validate()?;
    let target = remove_parity_means(rhs);
    let (phi, iterations) = match cfg.method {
        SolverMethod::ConjugateGradient => conjugate_gradient(&target, cfg)?,
        SolverMethod::Spectral => (spectral(&target), 0),
    };
    let phi = remove_parity_means(&phi);
    let residual = laplacian(&phi).sub(&target).max_abs();
    if !(residual <= cfg.tolerance) {
        return Err(PoissonError::NonConvergence {
            iterations,
            residual: residual.as_f64(),
        });
    }
    Ok(PoissonSolution {
        phi,
        residual,
        iterations,
    })
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn max_abs<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

/// CG on `-Δφ = -r̃`. The recursive residual is re-centred onto the range of
/// the operator every iteration; when it claims convergence the true residual
/// is recomputed and the iteration restarts if they disagree.
fn conjugate_gradient<T: Real>(
    target: &ScalarField<T>,
    cfg: &PoissonConfig<T>,
) -> Result<(ScalarField<T>, usize), PoissonError> {
    let spec = *target.spec();
    let mut phi = ScalarField::zeros(spec);
    let true_residual = |phi: &ScalarField<T>| {
        // r = b - Aφ = -r̃ + Δφ
        remove_parity_means(&laplacian(phi).sub(target))
    };

    let mut r = true_residual(&phi);
    let mut iterations = 0;
    'restart: loop {
        if max_abs(r.values()) <= cfg.tolerance {
            return Ok((phi, iterations));
        }
        let mut p = r.clone();
        let mut rr = dot(r.values(), r.values());
        loop {
            if iterations >= cfg.max_iterations {
                return Err(PoissonError::NonConvergence {
                    iterations,
                    residual: max_abs(true_residual(&phi).values()).as_f64(),
                });
            }
            iterations += 1;
            let ap = laplacian(&p).scale(-T::one());
            let pap = dot(p.values(), ap.values());
            if !(pap > T::zero()) {
                // Search direction fell into the nullspace; rebuild from the true residual.
                r = true_residual(&phi);
                continue 'restart;
            }
            let alpha = rr / pap;
            for (x, &d) in phi.values_mut().iter_mut().zip(p.values()) {
                *x = *x + alpha * d;
            }
            for (x, &d) in r.values_mut().iter_mut().zip(ap.values()) {
                *x = *x - alpha * d;
            }
            r = remove_parity_means(&r);
            if max_abs(r.values()) <= cfg.tolerance {
                r = true_residual(&phi);
                continue 'restart;
            }
            let rr_next = dot(r.values(), r.values());
            let beta = rr_next / rr;
            rr = rr_next;
            for (x, &d) in p.values_mut().iter_mut().zip(r.values()) {
                *x = d + beta * *x;
            }
        }
    }
}

/// Eigenvalue of the ±2 Laplacian for Fourier mode `(ki, kj)`.
pub fn laplacian_eigenvalue<T: Real>(spec: &GridSpec<T>, ki: usize, kj: usize) -> T {
    let n = T::from_count(spec.n());
    let two_pi = T::lit(2.0) * T::PI();
    let si = (two_pi * T::from_count(ki) / n).sin();
    let sj = (two_pi * T::from_count(kj) / n).sin();
    let dx = spec.dx();
    -(si * si + sj * sj) / (dx * dx)
}

fn is_null_mode(n: usize, k: usize) -> bool {
    k == 0 || 2 * k == n
}

fn spectral<T: Real>(target: &ScalarField<T>) -> ScalarField<T> {
    let spec = *target.spec();
    let n = spec.n();
    let mut buf: Vec<Complex<T>> = target
        .values()
        .iter()
        .map(|&x| Complex::new(x, T::zero()))
        .collect();
    fft2(&mut buf, n, false);
    for ki in 0..n {
        for kj in 0..n {
            let c = &mut buf[ki * n + kj];
            if is_null_mode(n, ki) && is_null_mode(n, kj) {
                *c = Complex::new(T::zero(), T::zero());
            } else {
                let lambda = laplacian_eigenvalue(&spec, ki, kj);
                *c = *c / lambda;
            }
        }
    }
    fft2(&mut buf, n, true);
    let norm = T::from_count(n * n);
    let values = buf.iter().map(|c| c.re / norm).collect();
    ScalarField::from_values(spec, values).expect("finite spectral solution")
}

fn fft2<T: Real>(buf: &mut [Complex<T>], n: usize, inverse: bool) {
    let mut planner = FftPlanner::<T>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    // Rows are contiguous along j; columns go through a transpose.
    fft.process(buf);
    let mut t = vec![Complex::new(T::zero(), T::zero()); n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = buf[i * n + j];
        }
    }
    fft.process(&mut t);
    for i in 0..n {
        for j in 0..n {
            buf[i * n + j] = t[j * n + i];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult<T> {
    /// `X₀ = X - ∇φ`.
    pub projected: VectorField<T>,
    /// The scalar `φ` solving `Δφ = ∇·X`.
    pub potential: ScalarField<T>,
    pub residual: T,
    pub iterations: usize,
}

/// Discrete Helmholtz projection onto discretely divergence-free fields.
pub fn helmholtz_project<T: Real>(
    x: &VectorField<T>,
    cfg: &PoissonConfig<T>,
) -> Result<ProjectionResult<T>, PoissonError> {
    let sol = poisson_solve(&divergence(x), cfg)?;
    let projected = x.sub(&gradient(&sol.phi));
    Ok(ProjectionResult {
        projected,
        potential: sol.phi,
        residual: sol.residual,
        iterations: sol.iterations,
    })
}
