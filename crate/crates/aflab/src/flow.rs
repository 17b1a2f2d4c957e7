//! Time integration of the parabolic conformal-factor flow
//! `d_t e^f = lap_hat(u) - kappa u`, `u = e^f + (alpha'/2) kappa e^{-f}`,
//! in both the conformal-factor form and the `u` form, plus the intrinsic
//! right-hand side assembled from curvature quantities of the evolving
//! metric.
//!
//! Fields named `ef` hold pointwise values of `e^f`, never `f` itself.

use crate::error::{Error, Result};
use crate::field::{check_same_grid, ScalarField};
use crate::geometry::Geometry;
use crate::ops;

/// Threshold for declaring finite-time extinction: the minimum of `e^f`
/// falling below this fraction of its initial minimum.
pub const BLOWUP_EPS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FlowStatus {
    Running,
    Completed,
    /// the conformal factor collapsed at `t_sing`, first at grid node `loc`
    BlownUp { t_sing: f64, loc: (usize, usize) },
    /// non-finite values appeared
    Aborted,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub step: u64,
    /// dt used by the most recent step (0 before the first)
    pub dt: f64,
    pub ef: ScalarField,
    pub status: FlowStatus,
}

impl FlowState {
    pub fn new(ef: ScalarField) -> Result<Self> {
        if !ef.all_finite() || ef.min() <= 0.0 {
            return Err(Error::Domain(
                "initial conformal factor must be finite and positive".into(),
            ));
        }
        Ok(FlowState { t: 0.0, step: 0, dt: 0.0, ef, status: FlowStatus::Running })
    }
}

/// `u = e^f + (alpha'/2) kappa e^{-f}`.
pub fn u_from_ef(ef: &ScalarField, geom: &Geometry) -> Result<ScalarField> {
    check_same_grid(&ef.grid, &geom.grid)?;
    let half_ap = 0.5 * geom.alpha_prime;
    ef.zip(&geom.kappa, |e, k| e + half_ap * k / e)
}

/// Inverts `u = e^f + (alpha'/2) kappa e^{-f}` on the branch `e^f > 0`:
/// `e^f = (u + sqrt(u^2 - 2 alpha' kappa)) / 2`. With `kappa <= 0` the
/// discriminant is nonnegative; the branch degenerates exactly where
/// `u <= 0` and `kappa = 0`, which is reported as a domain error.
pub fn ef_from_u(u: &ScalarField, geom: &Geometry) -> Result<ScalarField> {
    check_same_grid(&u.grid, &geom.grid)?;
    let two_ap = 2.0 * geom.alpha_prime;
    let mut out = Vec::with_capacity(u.values.len());
    for (idx, (&uv, &k)) in u.values.iter().zip(&geom.kappa.values).enumerate() {
        let disc = uv * uv - two_ap * k;
        let ef = 0.5 * (uv + disc.max(0.0).sqrt());
        if !(ef > 0.0) || !ef.is_finite() {
            let (i, j) = (idx % u.grid.nx, idx / u.grid.nx);
            return Err(Error::Domain(format!(
                "conformal factor branch lost at node ({i},{j}): u = {uv:.6e}, kappa = {k:.6e}"
            )));
        }
        out.push(ef);
    }
    Ok(ScalarField { grid: u.grid, values: out })
}

/// `d_t e^f` in the conformal form `lap_hat(u) - kappa u`.
pub fn rhs_conformal(ef: &ScalarField, geom: &Geometry) -> Result<ScalarField> {
    let u = u_from_ef(ef, geom)?;
    let lap = ops::lap_hat(&u, geom)?;
    Ok(ScalarField {
        grid: ef.grid,
        values: lap
            .values
            .iter()
            .zip(&geom.kappa.values)
            .zip(&u.values)
            .map(|((&l, &k), &uv)| l - k * uv)
            .collect(),
    })
}

/// `d_t e^f` assembled from intrinsic quantities of the evolving metric
/// `omega = e^f omega_hat`: scalar curvature, the gradient of the dilaton
/// `log ||mu||^2 = -f`, and the harmonic-map energy density
/// `||grad phi||^2_omega = -2 kappa e^{-f}`. Analytically identical to
/// [`rhs_conformal`]; discretely they differ at second order because the
/// product rule is not exact for central differences.
pub fn rhs_intrinsic(ef: &ScalarField, geom: &Geometry) -> Result<ScalarField> {
    check_same_grid(&ef.grid, &geom.grid)?;
    if ef.min() <= 0.0 {
        return Err(Error::Domain("intrinsic form needs e^f > 0".into()));
    }
    let f = ef.map(f64::ln);
    let lap_f = ops::lap_hat(&f, geom)?;
    let grad_f = ops::grad_sq(&f, geom)?;
    // energy-density transport term: (alpha'/2) lap_hat(kappa e^{-f})
    let ke = ef.zip(&geom.kappa, |e, k| k / e)?;
    let lap_ke = ops::lap_hat(&ke, geom)?;
    let half_ap = 0.5 * geom.alpha_prime;
    let mut out = Vec::with_capacity(ef.values.len());
    for idx in 0..ef.values.len() {
        let e = ef.values[idx];
        let k = geom.kappa.values[idx];
        // e^f ( -R_omega / ||mu||^2 + |d log ||mu||^2|^2_omega / ||mu||^2 )
        //   = e^f (lap_hat f + grad_sq f - kappa)
        let leading = e * (lap_f.values[idx] + grad_f.values[idx] - k);
        // (alpha'/8) e^f ( -Delta_omega ||grad phi||^2 - ||grad phi||^4 )
        //   = (alpha'/2) (lap_hat(kappa e^{-f}) - kappa^2 e^{-f})
        let correction = half_ap * (lap_ke.values[idx] - k * k / e);
        out.push(leading + correction);
    }
    Ok(ScalarField { grid: ef.grid, values: out })
}

/// `d_t u` for the evolution written in `u` itself:
/// `d_t u = (1 - (alpha'/2) kappa e^{-2f}) (lap_hat u - kappa u)`.
pub fn rhs_u_form(u: &ScalarField, geom: &Geometry) -> Result<ScalarField> {
    let ef = ef_from_u(u, geom)?;
    let lap = ops::lap_hat(u, geom)?;
    let half_ap = 0.5 * geom.alpha_prime;
    let mut out = Vec::with_capacity(u.values.len());
    for idx in 0..u.values.len() {
        let k = geom.kappa.values[idx];
        let e = ef.values[idx];
        let factor = 1.0 - half_ap * k / (e * e);
        out.push(factor * (lap.values[idx] - k * u.values[idx]));
    }
    Ok(ScalarField { grid: u.grid, values: out })
}

/// Parabolic stability bound for explicit stepping. The diffusion
/// coefficient on `e^f` is `(1 + (alpha'/2)|kappa| e^{-2f}) / (4 ghat)`
/// against the Euclidean Laplacian.
pub fn cfl_dt(ef: &ScalarField, geom: &Geometry, safety: f64) -> Result<f64> {
    check_same_grid(&ef.grid, &geom.grid)?;
    let half_ap = 0.5 * geom.alpha_prime;
    let mut max_a = 0.0f64;
    for ((&e, &k), &g) in ef
        .values
        .iter()
        .zip(&geom.kappa.values)
        .zip(&geom.g_hat.values)
    {
        let a = (1.0 + half_ap * k.abs() / (e * e)) / (4.0 * g);
        if a > max_a {
            max_a = a;
        }
    }
    if !(max_a > 0.0) || !max_a.is_finite() {
        return Err(Error::Domain("non-finite diffusion coefficient".into()));
    }
    let h = ef.grid.hx().min(ef.grid.hy());
    Ok(safety * h * h / (4.0 * max_a))
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub scheme: Scheme,
    pub cfl_safety: f64,
    /// overrides the CFL estimate when set (refinement studies)
    pub fixed_dt: Option<f64>,
    /// extinction threshold as a fraction of the initial min of `e^f`
    pub blowup_eps: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { scheme: Scheme::Rk4, cfl_safety: 0.8, fixed_dt: None, blowup_eps: BLOWUP_EPS }
    }
}

fn advance(
    ef: &ScalarField,
    geom: &Geometry,
    dt: f64,
    scheme: Scheme,
    rhs: &dyn Fn(&ScalarField, &Geometry) -> Result<ScalarField>,
) -> Result<ScalarField> {
    match scheme {
        Scheme::Euler => {
            let k1 = rhs(ef, geom)?;
            ef.zip(&k1, |e, r| e + dt * r)
        }
        Scheme::Rk4 => {
            let k1 = rhs(ef, geom)?;
            let s2 = ef.zip(&k1, |e, r| e + 0.5 * dt * r)?;
            let k2 = rhs(&s2, geom)?;
            let s3 = ef.zip(&k2, |e, r| e + 0.5 * dt * r)?;
            let k3 = rhs(&s3, geom)?;
            let s4 = ef.zip(&k3, |e, r| e + dt * r)?;
            let k4 = rhs(&s4, geom)?;
            let mut out = ef.clone();
            for idx in 0..out.values.len() {
                out.values[idx] += dt / 6.0
                    * (k1.values[idx]
                        + 2.0 * k2.values[idx]
                        + 2.0 * k3.values[idx]
                        + k4.values[idx]);
            }
            Ok(out)
        }
    }
}

/// One explicit step of the conformal-form flow, with extinction and
/// non-finite detection. On extinction the singular time is refined by
/// bisection on the step fraction and recorded in the status.
pub fn step(
    state: &mut FlowState,
    geom: &Geometry,
    ctrl: &StepControl,
    threshold: f64,
) -> Result<()> {
    if state.status != FlowStatus::Running {
        return Err(Error::Domain("stepping a finished flow".into()));
    }
    let dt = match ctrl.fixed_dt {
        Some(dt) => dt,
        None => cfl_dt(&state.ef, geom, ctrl.cfl_safety)?,
    };
    let next = advance(&state.ef, geom, dt, ctrl.scheme, &rhs_conformal)?;
    state.dt = dt;
    state.step += 1;
    if !next.all_finite() {
        state.status = FlowStatus::Aborted;
        state.t += dt;
        state.ef = next;
        return Ok(());
    }
    if next.min() <= threshold {
        // bisect the step fraction for the earliest threshold crossing
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            let trial = advance(&state.ef, geom, mid * dt, ctrl.scheme, &rhs_conformal)?;
            if trial.all_finite() && trial.min() > threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t_sing = state.t + hi * dt;
        let loc = next.argmin();
        state.status = FlowStatus::BlownUp { t_sing, loc };
    }
    state.t += dt;
    state.ef = next;
    Ok(())
}

/// Extinction threshold for a given initial field.
pub fn extinction_threshold(ef0: &ScalarField, blowup_eps: f64) -> f64 {
    blowup_eps * ef0.min()
}

/// Evolves the `u`-form flow to `t_end` with a fixed step count strategy,
/// reconstructing `e^f` at every stage. Used for cross-validation of the
/// conformal-form integrator.
pub fn evolve_u_form(
    u0: &ScalarField,
    geom: &Geometry,
    t_end: f64,
    ctrl: &StepControl,
) -> Result<ScalarField> {
    let mut u = u0.clone();
    let mut t = 0.0;
    while t < t_end {
        let ef = ef_from_u(&u, geom)?;
        let dt_cfl = match ctrl.fixed_dt {
            Some(dt) => dt,
            None => cfl_dt(&ef, geom, ctrl.cfl_safety)?,
        };
        let dt = dt_cfl.min(t_end - t);
        u = advance(&u, geom, dt, ctrl.scheme, &rhs_u_form)?;
        if !u.all_finite() {
            return Err(Error::Solver("u-form evolution lost finiteness".into()));
        }
        t += dt;
    }
    Ok(u)
}

/// Evolves the conformal form to `t_end` (or a terminal status) and
/// returns the final state; convenience wrapper used by tests.
pub fn evolve_ef(
    ef0: &ScalarField,
    geom: &Geometry,
    t_end: f64,
    ctrl: &StepControl,
) -> Result<FlowState> {
    let mut state = FlowState::new(ef0.clone())?;
    let threshold = extinction_threshold(ef0, ctrl.blowup_eps);
    while state.status == FlowStatus::Running && state.t < t_end {
        let mut c = *ctrl;
        let dt = match c.fixed_dt {
            Some(dt) => dt,
            None => cfl_dt(&state.ef, geom, c.cfl_safety)?,
        };
        if state.t + dt > t_end {
            c.fixed_dt = Some(t_end - state.t);
        } else {
            c.fixed_dt = Some(dt);
        }
        step(&mut state, geom, &c, threshold)?;
    }
    if state.status == FlowStatus::Running {
        state.status = FlowStatus::Completed;
    }
    Ok(state)
}
