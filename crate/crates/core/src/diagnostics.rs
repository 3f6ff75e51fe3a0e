//! Scalar functionals monitored during a run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::VectorField;
use crate::ops::divergence;
use crate::potential::ObstaclePotential;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("lattice quad ({i}, {j}) has degenerate reference area {area:e}")]
    DegenerateQuad { i: usize, j: usize, area: f64 },
    #[error("lattices differ in shape: {before} vs {after} points for m = {m}")]
    LatticeShape {
        before: usize,
        after: usize,
        m: usize,
    },
    #[error("the potential quadrature needs at least one tracer")]
    NoTracers,
}

/// One line of the diagnostics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub kinetic_energy: f64,
    pub divergence_max: f64,
    pub divergence_l2: f64,
    /// Running value of the cost functional up to `t`.
    pub cost_accumulator: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub area_error_max: Option<f64>,
    pub max_speed: f64,
    /// Relative L2 distance between velocity-form and impulse-form velocities.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub impulse_velocity_rel_l2: Option<f64>,
    /// `max |π - z∘φ|` over tracers.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub costate_impulse_gap: Option<f64>,
}

/// Riemann sum `Σ a·b dx²`.
pub fn inner_product<T: Real>(a: &VectorField<T>, b: &VectorField<T>) -> T {
    debug_assert_eq!(a.spec(), b.spec());
    let dx = a.spec().dx();
    let sum = a
        .u()
        .values()
        .iter()
        .zip(a.v().values())
        .zip(b.u().values().iter().zip(b.v().values()))
        .fold(T::zero(), |acc, ((&au, &av), (&bu, &bv))| {
            acc + (au * bu + av * bv)
        });
    sum * dx * dx
}

pub fn kinetic_energy<T: Real>(v: &VectorField<T>) -> T {
    T::lit(0.5) * inner_product(v, v)
}

/// Max-norm and `dx`-weighted L2 norm of the discrete divergence.
pub fn divergence_norms<T: Real>(v: &VectorField<T>) -> (T, T) {
    let div = divergence(v);
    let dx = v.spec().dx();
    let sq = div.values().iter().fold(T::zero(), |acc, &d| acc + d * d);
    (div.max_abs(), (sq * dx * dx).sqrt())
}

/// One left-endpoint rectangle of the cost integral:
/// `dt (½⟨v, v⟩ + Σᵢ V(φᵢ) wᵢ)` with uniform weights `wᵢ = L² / N`.
pub fn cost_step<T: Real>(
    v: &VectorField<T>,
    tracers: &[[T; 2]],
    potential: Option<&ObstaclePotential<T>>,
    dt: T,
) -> Result<T, DiagnosticsError> {
    if tracers.is_empty() {
        return Err(DiagnosticsError::NoTracers);
    }
    let mut total = kinetic_energy(v);
    if let Some(p) = potential.filter(|p| p.is_active()) {
        let l = v.spec().length();
        let w = l * l / T::from_count(tracers.len());
        let sum = tracers.iter().fold(T::zero(), |acc, &x| acc + p.eval(x));
        total = total + sum * w;
    }
    Ok(dt * total)
}

/// Signed shoelace area of a polygon.
pub fn shoelace_area<T: Real>(pts: &[[T; 2]]) -> T {
    let n = pts.len();
    let twice = (0..n).fold(T::zero(), |acc, k| {
        let a = pts[k];
        let b = pts[(k + 1) % n];
        acc + (a[0] * b[1] - b[0] * a[1])
    });
    twice / T::lit(2.0)
}

/// Largest relative change in quad area between two `m × m` tracer lattices.
///
/// Quads with an edge longer than half the period in either lattice straddle
/// the periodic seam and are skipped.
pub fn area_preservation_error<T: Real>(
    before: &[[T; 2]],
    after: &[[T; 2]],
    m: usize,
    period: T,
) -> Result<T, DiagnosticsError> {
    if before.len() != m * m || after.len() != m * m {
        return Err(DiagnosticsError::LatticeShape {
            before: before.len(),
            after: after.len(),
            m,
        });
    }
    let half = period / T::lit(2.0);
    let quad = |pts: &[[T; 2]], i: usize, j: usize| {
        [
            pts[i * m + j],
            pts[(i + 1) * m + j],
            pts[(i + 1) * m + j + 1],
            pts[i * m + j + 1],
        ]
    };
    let jumps = |q: &[[T; 2]; 4]| {
        (0..4).any(|k| {
            let a = q[k];
            let b = q[(k + 1) % 4];
            (a[0] - b[0]).abs() > half || (a[1] - b[1]).abs() > half
        })
    };

    let mut worst = T::zero();
    for i in 0..m.saturating_sub(1) {
        for j in 0..m.saturating_sub(1) {
            let qb = quad(before, i, j);
            let qa = quad(after, i, j);
            if jumps(&qb) || jumps(&qa) {
                continue;
            }
            let ab = shoelace_area(&qb).abs();
            if ab < T::lit(1e-12) {
                return Err(DiagnosticsError::DegenerateQuad {
                    i,
                    j,
                    area: ab.as_f64(),
                });
            }
            let aa = shoelace_area(&qa).abs();
            worst = worst.max((aa - ab).abs() / ab);
        }
    }
    Ok(worst)
}

/// Mean of `½|v|²` over nodes with `r_in < |x - center| < r_out`.
pub fn annulus_energy_density<T: Real>(v: &VectorField<T>, center: [T; 2], r_in: T, r_out: T) -> T {
    let spec = v.spec();
    let (sum, count) = spec
        .indices()
        .filter(|&(i, j)| {
            let p = spec.node(i, j);
            let rho = (p[0] - center[0]).hypot(p[1] - center[1]);
            rho > r_in && rho < r_out
        })
        .fold((T::zero(), 0usize), |(s, c), (i, j)| {
            let [a, b] = v.get(i, j);
            (s + T::lit(0.5) * (a * a + b * b), c + 1)
        });
    if count == 0 {
        T::zero()
    } else {
        sum / T::from_count(count)
    }
}

/// `‖a - b‖ / ‖b‖` in the discrete L2 norm.
pub fn relative_l2<T: Real>(a: &VectorField<T>, b: &VectorField<T>) -> T {
    let d = a.sub(b);
    (inner_product(&d, &d) / inner_product(b, b)).sqrt()
}
