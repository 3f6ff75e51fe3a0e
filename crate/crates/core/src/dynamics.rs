//! Time integration of the potential-forced Euler equations.
//!
//! Two equivalent formulations are provided:
//!
//! * velocity form: `∂v/∂t + (v·∇)v = -∇(p - V)`, with the pressure supplied by
//!   the Helmholtz projection;
//! * impulse form: `∂z/∂t + (z·∇)v + z × curl v - ∇V + (v·∇)z = 0` where the
//!   velocity is recovered as the divergence-free part of `z`.
//!
//! Tracers sample the flow map, and costates are carried along them by
//! `∂π/∂t = -(Tv∘φ)ᵀ π + ∇V∘φ`. At `t = 0` the costates equal the impulse at
//! the tracer positions, and they stay equal to `z∘φ` along an exact solution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridSpec, ScalarField, TensorField, VectorField};
use crate::ops::{advect, curl2d, jacobian};
use crate::poisson::{helmholtz_project, PoissonConfig, PoissonError};
use crate::potential::ObstaclePotential;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Projection(#[from] PoissonError),
    #[error("state diverged at t = {t}: max speed {max_speed:e} exceeds bound")]
    Diverged { t: f64, max_speed: f64 },
    #[error("impulse field required for the impulse-form step")]
    MissingImpulse,
    #[error("{tracers} tracers but {costates} costates")]
    MisalignedCostates { tracers: usize, costates: usize },
    #[error("time step must be positive and finite")]
    BadTimeStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionMode {
    /// Project after every step.
    PerStep,
    /// Integrate unprojected and project once when the run finishes.
    AtEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    ForwardEuler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig<T> {
    pub dt: T,
    pub projection_mode: ProjectionMode,
    pub time_scheme: TimeScheme,
    pub poisson: PoissonConfig<T>,
    /// A step fails with [`DynamicsError::Diverged`] once any node speed exceeds this.
    pub blowup_speed: T,
}

impl<T: Real> StepConfig<T> {
    pub const DEFAULT_DT: f64 = 1.5e-3;
    pub const DEFAULT_BLOWUP_SPEED: f64 = 1e6;

    pub fn for_grid(spec: &GridSpec<T>) -> Self {
        Self {
            dt: T::lit(Self::DEFAULT_DT),
            projection_mode: ProjectionMode::PerStep,
            time_scheme: TimeScheme::ForwardEuler,
            poisson: PoissonConfig::for_grid(spec),
            blowup_speed: T::lit(Self::DEFAULT_BLOWUP_SPEED),
        }
    }

    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_projection(mut self, mode: ProjectionMode) -> Self {
        self.projection_mode = mode;
        self
    }

    pub fn with_scheme(mut self, scheme: TimeScheme) -> Self {
        self.time_scheme = scheme;
        self
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            return Err(DynamicsError::BadTimeStep);
        }
        Ok(())
    }
}

/// Everything advanced by one step.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T> {
    pub t: T,
    pub velocity: VectorField<T>,
    /// Current positions of the tracers (flow map applied to reference labels).
    pub tracers: Vec<[T; 2]>,
    /// One costate per tracer, when tracked.
    pub costates: Option<Vec<[T; 2]>>,
    pub impulse: Option<VectorField<T>>,
    pub gauge_k: Option<ScalarField<T>>,
    /// Projection potential over the last step divided by `dt` (per-step mode only).
    pub pressure_estimate: Option<ScalarField<T>>,
}

impl<T: Real> SimState<T> {
    pub fn new(velocity: VectorField<T>) -> Self {
        Self {
            t: T::zero(),
            velocity,
            tracers: Vec::new(),
            costates: None,
            impulse: None,
            gauge_k: None,
            pressure_estimate: None,
        }
    }

    pub fn spec(&self) -> &GridSpec<T> {
        self.velocity.spec()
    }

    /// Seeds an `m × m` lattice of tracers at their reference positions.
    pub fn with_tracer_lattice(mut self, m: usize) -> Self {
        self.tracers = tracer_lattice(self.spec(), m);
        self
    }

    /// Starts the impulse at `z = v`, i.e. the gauge scalar `k` is zero.
    pub fn with_impulse(mut self) -> Self {
        self.impulse = Some(self.velocity.clone());
        self
    }

    /// Initializes costates from the impulse, or from the velocity if no impulse is tracked.
    pub fn with_costates(mut self) -> Self {
        let z = self.impulse.as_ref().unwrap_or(&self.velocity);
        self.costates = Some(init_costates_from_impulse(&self.tracers, z));
        self
    }

    pub fn with_gauge(mut self) -> Self {
        self.gauge_k = Some(ScalarField::zeros(*self.spec()));
        self
    }

    fn check_alignment(&self) -> Result<(), DynamicsError> {
        match &self.costates {
            Some(c) if c.len() != self.tracers.len() => Err(DynamicsError::MisalignedCostates {
                tracers: self.tracers.len(),
                costates: c.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// Reference positions `(i L/m, j L/m)` for `0 ≤ i, j < m`, `i` slow.
pub fn tracer_lattice<T: Real>(spec: &GridSpec<T>, m: usize) -> Vec<[T; 2]> {
    let h = spec.length() / T::from_count(m);
    (0..m)
        .flat_map(|i| (0..m).map(move |j| [T::from_count(i) * h, T::from_count(j) * h]))
        .collect()
}

/// Explicit part of the velocity equation: `-(v·∇)v + ∇V`.
pub fn velocity_rhs<T: Real>(v: &VectorField<T>, grad_v: &VectorField<T>) -> VectorField<T> {
    explicit_velocity_rhs(v, Some(grad_v))
}

fn explicit_velocity_rhs<T: Real>(
    v: &VectorField<T>,
    forcing: Option<&VectorField<T>>,
) -> VectorField<T> {
    let adv = advect(v, v);
    match forcing {
        Some(g) => g.sub(&adv),
        None => adv.scale(-T::one()),
    }
}

/// `-(z·∇)v - z × ω + ∇V - (v·∇)z`, with `z × ω = (z₂ ω, -z₁ ω)` in 2D.
pub fn impulse_rhs<T: Real>(
    z: &VectorField<T>,
    v: &VectorField<T>,
    forcing: Option<&VectorField<T>>,
) -> VectorField<T> {
    let zv = advect(z, v);
    let vz = advect(v, z);
    let omega = curl2d(v);
    let spec = *z.spec();
    let mut out = VectorField::from_index_fn(spec, |i, j| {
        let [z1, z2] = z.get(i, j);
        let w = omega.get(i, j);
        let [a1, a2] = zv.get(i, j);
        let [b1, b2] = vz.get(i, j);
        [-a1 - z2 * w - b1, -a2 + z1 * w - b2]
    });
    if let Some(g) = forcing {
        out = out.add(g);
    }
    out
}

fn forcing_field<T: Real>(
    spec: &GridSpec<T>,
    potential: Option<&ObstaclePotential<T>>,
) -> Option<VectorField<T>> {
    potential
        .filter(|p| p.is_active())
        .map(|p| p.sample(*spec).1)
}

fn active<T: Real>(potential: Option<&ObstaclePotential<T>>) -> Option<&ObstaclePotential<T>> {
    potential.filter(|p| p.is_active())
}

fn rk4_combine<T: Real>(y: &VectorField<T>, dt: T, k: [&VectorField<T>; 4]) -> VectorField<T> {
    let two = T::lit(2.0);
    let sum = k[0].add(&k[1].scale(two)).add(&k[2].scale(two)).add(k[3]);
    y.axpy(dt / T::lit(6.0), &sum)
}

fn check_speed<T: Real>(v: &VectorField<T>, t: T, bound: T) -> Result<(), DynamicsError> {
    let max_speed = v.max_speed();
    if !v.is_finite() || !(max_speed <= bound) {
        return Err(DynamicsError::Diverged {
            t: t.as_f64(),
            max_speed: if max_speed.is_finite() {
                max_speed.as_f64()
            } else {
                f64::INFINITY
            },
        });
    }
    Ok(())
}

/// Advances tracers and costates with the pre-step velocity.
fn advance_lagrangian<T: Real>(
    state: &SimState<T>,
    next: &mut SimState<T>,
    cfg: &StepConfig<T>,
    potential: Option<&ObstaclePotential<T>>,
) {
    if state.tracers.is_empty() {
        return;
    }
    if let Some(costates) = &state.costates {
        let tv = jacobian(&state.velocity);
        next.costates = Some(step_costate(
            costates,
            &state.tracers,
            &tv,
            potential,
            cfg.dt,
        ));
    }
    next.tracers = advect_tracers(&state.tracers, &state.velocity, cfg.dt, cfg.time_scheme);
}

/// One step of the velocity-form equation.
pub fn step_velocity<T: Real>(
    state: &SimState<T>,
    cfg: &StepConfig<T>,
    potential: Option<&ObstaclePotential<T>>,
) -> Result<SimState<T>, DynamicsError> {
    cfg.validate()?;
    state.check_alignment()?;
    let v = &state.velocity;
    let forcing = forcing_field(v.spec(), potential);
    let forcing = forcing.as_ref();
    let dt = cfg.dt;

    let mut v_next = match cfg.time_scheme {
        TimeScheme::ForwardEuler => v.axpy(dt, &explicit_velocity_rhs(v, forcing)),
        TimeScheme::Rk4 => {
            let half = dt / T::lit(2.0);
            let k1 = explicit_velocity_rhs(v, forcing);
            let k2 = explicit_velocity_rhs(&v.axpy(half, &k1), forcing);
            let k3 = explicit_velocity_rhs(&v.axpy(half, &k2), forcing);
            let k4 = explicit_velocity_rhs(&v.axpy(dt, &k3), forcing);
            rk4_combine(v, dt, [&k1, &k2, &k3, &k4])
        }
    };

    let mut pressure = None;
    if cfg.projection_mode == ProjectionMode::PerStep {
        let proj = helmholtz_project(&v_next, &cfg.poisson)?;
        v_next = proj.projected;
        pressure = Some(proj.potential.scale(T::one() / dt));
    }
    let t_next = state.t + dt;
    check_speed(&v_next, t_next, cfg.blowup_speed)?;

    let gauge_k = state.gauge_k.as_ref().map(|k| {
        let half = T::lit(0.5);
        ScalarField::from_index_fn(*k.spec(), |i, j| {
            let [a, b] = v.get(i, j);
            let p = pressure.as_ref().map_or(T::zero(), |p| p.get(i, j));
            k.get(i, j) + dt * (p - half * (a * a + b * b))
        })
    });

    let mut next = SimState {
        t: t_next,
        velocity: v_next,
        tracers: state.tracers.clone(),
        costates: state.costates.clone(),
        impulse: state.impulse.clone(),
        gauge_k,
        pressure_estimate: pressure,
    };
    advance_lagrangian(state, &mut next, cfg, active(potential));
    Ok(next)
}

/// One step of the impulse-form equation; the velocity is the projection of `z`.
pub fn step_impulse<T: Real>(
    state: &SimState<T>,
    cfg: &StepConfig<T>,
    potential: Option<&ObstaclePotential<T>>,
) -> Result<SimState<T>, DynamicsError> {
    cfg.validate()?;
    state.check_alignment()?;
    let z = state
        .impulse
        .as_ref()
        .ok_or(DynamicsError::MissingImpulse)?;
    let v = &state.velocity;
    let forcing = forcing_field(v.spec(), potential);
    let forcing = forcing.as_ref();
    let dt = cfg.dt;

    let z_next = match cfg.time_scheme {
        TimeScheme::ForwardEuler => z.axpy(dt, &impulse_rhs(z, v, forcing)),
        TimeScheme::Rk4 => {
            let half = dt / T::lit(2.0);
            let stage = |zs: &VectorField<T>| -> Result<VectorField<T>, DynamicsError> {
                let vs = helmholtz_project(zs, &cfg.poisson)?.projected;
                Ok(impulse_rhs(zs, &vs, forcing))
            };
            let k1 = impulse_rhs(z, v, forcing);
            let k2 = stage(&z.axpy(half, &k1))?;
            let k3 = stage(&z.axpy(half, &k2))?;
            let k4 = stage(&z.axpy(dt, &k3))?;
            rk4_combine(z, dt, [&k1, &k2, &k3, &k4])
        }
    };
    let proj = helmholtz_project(&z_next, &cfg.poisson)?;
    let t_next = state.t + dt;
    check_speed(&proj.projected, t_next, cfg.blowup_speed)?;
    check_speed(&z_next, t_next, cfg.blowup_speed)?;

    let mut next = SimState {
        t: t_next,
        velocity: proj.projected,
        tracers: state.tracers.clone(),
        costates: state.costates.clone(),
        impulse: Some(z_next),
        gauge_k: state.gauge_k.clone(),
        pressure_estimate: None,
    };
    advance_lagrangian(state, &mut next, cfg, active(potential));
    Ok(next)
}

/// Moves tracers through a velocity field frozen over the step.
pub fn advect_tracers<T: Real>(
    tracers: &[[T; 2]],
    v: &VectorField<T>,
    dt: T,
    scheme: TimeScheme,
) -> Vec<[T; 2]> {
    let spec = *v.spec();
    let shift = |p: [T; 2], k: [T; 2], s: T| [p[0] + s * k[0], p[1] + s * k[1]];
    tracers
        .iter()
        .map(|&p| {
            let moved = match scheme {
                TimeScheme::ForwardEuler => shift(p, v.interpolate(p), dt),
                TimeScheme::Rk4 => {
                    let half = dt / T::lit(2.0);
                    let k1 = v.interpolate(p);
                    let k2 = v.interpolate(shift(p, k1, half));
                    let k3 = v.interpolate(shift(p, k2, half));
                    let k4 = v.interpolate(shift(p, k3, dt));
                    let two = T::lit(2.0);
                    let six = T::lit(6.0);
                    [
                        p[0] + dt / six * (k1[0] + two * k2[0] + two * k3[0] + k4[0]),
                        p[1] + dt / six * (k1[1] + two * k2[1] + two * k3[1] + k4[1]),
                    ]
                }
            };
            spec.wrap_point(moved)
        })
        .collect()
}

/// Explicit step of `∂π/∂t = -(Tv∘φ)ᵀ π + ∇V∘φ` along each tracer.
pub fn step_costate<T: Real>(
    costates: &[[T; 2]],
    tracers: &[[T; 2]],
    tv: &TensorField<T>,
    potential: Option<&ObstaclePotential<T>>,
    dt: T,
) -> Vec<[T; 2]> {
    debug_assert_eq!(costates.len(), tracers.len());
    costates
        .iter()
        .zip(tracers)
        .map(|(&pi, &x)| {
            let m = tv.interpolate(x);
            // (Tv)ᵀπ
            let mt_pi = [
                m[0][0] * pi[0] + m[1][0] * pi[1],
                m[0][1] * pi[0] + m[1][1] * pi[1],
            ];
            let g = potential.map_or([T::zero(), T::zero()], |p| p.grad(x));
            [
                pi[0] + dt * (g[0] - mt_pi[0]),
                pi[1] + dt * (g[1] - mt_pi[1]),
            ]
        })
        .collect()
}

/// At `t = 0` the flow map is the identity, so `π = z` at each tracer.
pub fn init_costates_from_impulse<T: Real>(tracers: &[[T; 2]], z: &VectorField<T>) -> Vec<[T; 2]> {
    tracers.iter().map(|&p| z.interpolate(p)).collect()
}

/// Largest `|π_i - z(φ_i)|` over all tracers.
pub fn costate_impulse_gap<T: Real>(
    costates: &[[T; 2]],
    tracers: &[[T; 2]],
    z: &VectorField<T>,
) -> T {
    costates
        .iter()
        .zip(tracers)
        .fold(T::zero(), |acc, (&pi, &x)| {
            let zx = z.interpolate(x);
            acc.max((pi[0] - zx[0]).hypot(pi[1] - zx[1]))
        })
}

/// Projects the velocity in place and returns the projection potential.
pub fn project_state<T: Real>(
    state: &mut SimState<T>,
    poisson: &PoissonConfig<T>,
) -> Result<ScalarField<T>, DynamicsError> {
    let proj = helmholtz_project(&state.velocity, poisson)?;
    state.velocity = proj.projected;
    Ok(proj.potential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{demo_initial_velocity, sample_analytic_vector};
    use crate::ops::advect;

    fn spec() -> GridSpec<f64> {
        GridSpec::standard()
    }

    fn cfg() -> StepConfig<f64> {
        StepConfig::for_grid(&spec())
    }

    fn no_force() -> ObstaclePotential<f64> {
        ObstaclePotential::new([7.0, 7.0], 0.5, 0.0, 1e-6).unwrap()
    }

    #[test]
    fn rest_state_is_a_fixed_point() {
        let s = SimState::new(VectorField::zeros(spec()));
        let next = step_velocity(&s, &cfg(), Some(&no_force())).unwrap();
        assert_eq!(next.velocity.max_abs(), 0.0);
        assert_eq!(next.t, 1.5e-3);
    }

    #[test]
    fn single_step_from_rest_is_projected_forcing() {
        let pot = ObstaclePotential::standard();
        let s = SimState::new(VectorField::zeros(spec()));
        let next = step_velocity(&s, &cfg(), Some(&pot)).unwrap();
        let (_, grad_v) = pot.sample(spec());
        let expected = helmholtz_project(&grad_v.scale(1.5e-3), &cfg().poisson).unwrap();
        assert_eq!(next.velocity, expected.projected);
        let p = next.pressure_estimate.unwrap();
        assert_eq!(p, expected.potential.scale(1.0 / 1.5e-3));
    }

    #[test]
    fn uniform_flow_is_unchanged() {
        let c = VectorField::constant(spec(), [0.4, -0.3]);
        let s = SimState::new(c.clone());
        for scheme in [TimeScheme::ForwardEuler, TimeScheme::Rk4] {
            let next = step_velocity(&s, &cfg().with_scheme(scheme), None).unwrap();
            assert_eq!(next.velocity, c);
        }
    }

    #[test]
    fn velocity_rhs_examples() {
        let s = spec();
        let zero = VectorField::zeros(s);
        assert_eq!(velocity_rhs(&zero, &zero).max_abs(), 0.0);

        let c = VectorField::constant(s, [1.0, 2.0]);
        let (_, g) = ObstaclePotential::standard().sample(s);
        assert_eq!(velocity_rhs(&c, &g), g);

        let ic = demo_initial_velocity(s);
        let rhs = velocity_rhs(&ic, &zero);
        assert_eq!(rhs.add(&advect(&ic, &ic)).max_abs(), 0.0);
    }

    #[test]
    fn zero_strength_matches_unforced_path_bitwise() {
        let s = SimState::new(demo_initial_velocity(spec()))
            .with_tracer_lattice(10)
            .with_impulse()
            .with_costates();
        let c = cfg().with_dt(1e-3);
        let (mut a, mut b) = (s.clone(), s.clone());
        let (mut ia, mut ib) = (s.clone(), s);
        for _ in 0..5 {
            a = step_velocity(&a, &c, Some(&no_force())).unwrap();
            b = step_velocity(&b, &c, None).unwrap();
            ia = step_impulse(&ia, &c, Some(&no_force())).unwrap();
            ib = step_impulse(&ib, &c, None).unwrap();
        }
        assert_eq!(a, b);
        assert_eq!(ia, ib);
    }

    #[test]
    fn impulse_fixed_points() {
        let s = spec();
        let rest = SimState::new(VectorField::zeros(s)).with_impulse();
        let next = step_impulse(&rest, &cfg(), None).unwrap();
        assert_eq!(next.impulse.unwrap().max_abs(), 0.0);

        let c = VectorField::constant(s, [0.2, 0.9]);
        let uniform = SimState::new(c.clone()).with_impulse();
        let next = step_impulse(&uniform, &cfg(), None).unwrap();
        assert_eq!(next.impulse.unwrap(), c);
        assert_eq!(next.velocity, c);
    }

    #[test]
    fn impulse_step_needs_impulse() {
        let s = SimState::new(VectorField::zeros(spec()));
        assert_eq!(
            step_impulse(&s, &cfg(), None).unwrap_err(),
            DynamicsError::MissingImpulse
        );
    }

    #[test]
    fn misaligned_costates_rejected() {
        let mut s = SimState::new(VectorField::zeros(spec())).with_tracer_lattice(4);
        s.costates = Some(vec![[0.0, 0.0]; 3]);
        assert_eq!(
            step_velocity(&s, &cfg(), None).unwrap_err(),
            DynamicsError::MisalignedCostates {
                tracers: 16,
                costates: 3
            }
        );
    }

    #[test]
    fn blow_up_is_reported() {
        let mut c = cfg();
        c.blowup_speed = 0.5;
        let s = SimState::new(demo_initial_velocity(spec()));
        assert!(matches!(
            step_velocity(&s, &c, None),
            Err(DynamicsError::Diverged { .. })
        ));
        let bad = c.with_dt(-1.0);
        assert_eq!(
            step_velocity(&s, &bad, None).unwrap_err(),
            DynamicsError::BadTimeStep
        );
    }

    #[test]
    fn tracer_examples() {
        let s = spec();
        let pts = vec![[0.3, 1.2], [12.0, 0.1], [5.0, 5.0]];
        assert_eq!(
            advect_tracers(&pts, &VectorField::zeros(s), 1e-3, TimeScheme::ForwardEuler),
            pts
        );
        let moved = advect_tracers(
            &pts,
            &VectorField::constant(s, [1.0, 0.0]),
            0.5,
            TimeScheme::ForwardEuler,
        );
        let l = s.length();
        for (a, b) in pts.iter().zip(&moved) {
            assert!(((a[0] + 0.5) % l - b[0]).abs() < 1e-12);
            assert_eq!(a[1], b[1]);
        }
    }

    #[test]
    fn euler_tracers_drift_outward_on_rotation() {
        // Rigid rotation about the domain centre; bilinear interpolation is exact on it
        // away from the seam, so the only error is the forward-Euler radial drift.
        let s = spec();
        let c = s.length() / 2.0;
        let rot = sample_analytic_vector(s, |_, y| -(y - c), |x, _| x - c).unwrap();
        let dt = 1e-2;
        let r0 = 2.0;
        let mut p = vec![[c + r0, c]];
        for step in 1..=10 {
            p = advect_tracers(&p, &rot, dt, TimeScheme::ForwardEuler);
            let r = (p[0][0] - c).hypot(p[0][1] - c);
            let exact = r0 * (1.0 + dt * dt).powf(step as f64 / 2.0);
            assert!((r - exact).abs() < 1e-12, "step {step}: {r} vs {exact}");
        }
        let rk = advect_tracers(&[[c + r0, c]], &rot, dt, TimeScheme::Rk4);
        let r = (rk[0][0] - c).hypot(rk[0][1] - c);
        assert!((r - r0).abs() < 1e-10);
    }

    #[test]
    fn costate_examples() {
        let s = spec();
        let tracers = vec![[1.0, 2.0], [7.0, 8.0], [10.0, 3.0]];
        let pis = vec![[0.5, -0.5], [1.0, 2.0], [0.0, 3.0]];
        let flat = TensorField::zeros(s);
        assert_eq!(step_costate(&pis, &tracers, &flat, None, 1e-3), pis);

        let pot = ObstaclePotential::standard();
        let next = step_costate(&pis, &tracers, &flat, Some(&pot), 1e-3);
        for ((a, b), x) in pis.iter().zip(&next).zip(&tracers) {
            let g = pot.grad(*x);
            assert_eq!(b[0], a[0] + 1e-3 * g[0]);
            assert_eq!(b[1], a[1] + 1e-3 * g[1]);
        }
    }

    #[test]
    fn costate_initialization() {
        let s = spec();
        let tracers = tracer_lattice(&s, 30);
        assert!(init_costates_from_impulse(&tracers, &VectorField::zeros(s))
            .iter()
            .all(|p| *p == [0.0, 0.0]));
        assert!(
            init_costates_from_impulse(&tracers, &VectorField::constant(s, [1.5, -2.0]))
                .iter()
                .all(|p| (p[0] - 1.5).abs() < 1e-15 && (p[1] + 2.0).abs() < 1e-15)
        );
        let ic = demo_initial_velocity(s);
        let pis = init_costates_from_impulse(&tracers, &ic);
        for (k, (i, j)) in s.indices().enumerate() {
            let node = ic.get(i, j);
            assert!((pis[k][0] - node[0]).abs() < 1e-14);
            assert!((pis[k][1] - node[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn gauge_scalar_follows_pressure_minus_kinetic() {
        let s = SimState::new(demo_initial_velocity(spec())).with_gauge();
        let v0 = s.velocity.clone();
        let next = step_velocity(&s, &cfg(), None).unwrap();
        let p = next.pressure_estimate.as_ref().unwrap();
        let k = next.gauge_k.as_ref().unwrap();
        for (i, j) in spec().indices() {
            let [a, b] = v0.get(i, j);
            let expected = 1.5e-3 * (p.get(i, j) - 0.5 * (a * a + b * b));
            assert!((k.get(i, j) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn at_end_mode_skips_projection() {
        let s = SimState::new(demo_initial_velocity(spec()));
        let c = cfg().with_projection(ProjectionMode::AtEnd);
        let next = step_velocity(&s, &c, None).unwrap();
        assert!(next.pressure_estimate.is_none());
        let expected = s
            .velocity
            .axpy(1.5e-3, &advect(&s.velocity, &s.velocity).scale(-1.0));
        assert_eq!(next.velocity, expected);
    }

    #[test]
    fn steps_are_deterministic() {
        let s = SimState::new(demo_initial_velocity(spec()))
            .with_tracer_lattice(8)
            .with_costates();
        let pot = ObstaclePotential::standard();
        let run = || {
            let mut st = s.clone();
            for _ in 0..3 {
                st = step_velocity(&st, &cfg(), Some(&pot)).unwrap();
            }
            st
        };
        let (a, b) = (run(), run());
        let bits = |st: &SimState<f64>| -> Vec<u64> {
            st.velocity
                .u()
                .values()
                .iter()
                .chain(st.velocity.v().values())
                .map(|x| x.to_bits())
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a, b);
    }
}
