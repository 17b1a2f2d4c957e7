//! Scalar observables logged along the flow: energy and its exact
//! dissipation identity, mass and its balance law, modal projections onto
//! the low spectrum, the blow-up envelope, growth-rate fits, and the
//! pointwise curvature proxy. A CSV writer renders sampled records with
//! full-precision deterministic formatting.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::flow::u_from_ef;
use crate::geometry::Geometry;
use crate::operators::{apply_L, SpectralData};
use crate::ops;
use std::io::Write;

/// `I(u) = (1/2) <L u, u>_omega_hat`, evaluated through the quadratic form
/// of the symmetric stencil so the discrete dissipation identity is exact.
pub fn energy(u: &ScalarField, geom: &Geometry) -> Result<f64> {
    Ok(0.5 * ops::inner(&apply_L(u, geom)?, u, geom)?)
}

/// `dI/dt = -int (1 - (alpha'/2) kappa e^{-2f}) (L u)^2` over `omega_hat`;
/// exact for the continuous-in-time system and matched by centered
/// differences of the logged energy up to the scheme's order.
pub fn dissipation(ef: &ScalarField, geom: &Geometry) -> Result<f64> {
    let u = u_from_ef(ef, geom)?;
    let lu = apply_L(&u, geom)?;
    let half_ap = 0.5 * geom.alpha_prime;
    let cell = geom.grid.cell();
    Ok(-ops::compensated_sum(
        lu.values
            .iter()
            .zip(&geom.kappa.values)
            .zip(&ef.values)
            .zip(&geom.g_hat.values)
            .map(|(((&l, &k), &e), &g)| {
                let factor = 1.0 - half_ap * k / (e * e);
                factor * l * l * 2.0 * g * cell
            }),
    ))
}

/// total area `A = int e^f omega_hat`
pub fn mass(ef: &ScalarField, geom: &Geometry) -> Result<f64> {
    ops::integrate(ef, geom)
}

/// Exact balance law for the mass: `dA/dt = -int kappa u`, equivalently
/// `int (-kappa) e^f - (alpha'/2) int kappa^2 e^{-f}`.
pub fn mass_derivative_identity(ef: &ScalarField, geom: &Geometry) -> Result<f64> {
    let u = u_from_ef(ef, geom)?;
    let ku = u.zip(&geom.kappa, |uv, k| -k * uv)?;
    ops::integrate(&ku, geom)
}

/// `max e^f / min e^f`; infinite (flagged) once positivity is lost.
pub fn harnack_ratio(ef: &ScalarField) -> f64 {
    let min = ef.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        ef.max() / min
    }
}

/// `sup e^{-2f} (1 + |d f| + |Delta_hat f|)` with `Delta_hat = 2 lap_hat`;
/// the pointwise scale of the full curvature tensor of the evolving metric.
pub fn curvature_proxy(ef: &ScalarField, geom: &Geometry) -> Result<f64> {
    if ef.min() <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let f = ef.map(f64::ln);
    let lap_f = ops::lap_hat(&f, geom)?;
    let grad_f = ops::grad_sq(&f, geom)?;
    let mut sup = 0.0f64;
    for ((&e, &l), &g2) in ef.values.iter().zip(&lap_f.values).zip(&grad_f.values) {
        let v = (1.0 + g2.max(0.0).sqrt() + (2.0 * l).abs()) / (e * e);
        if v > sup {
            sup = v;
        }
    }
    Ok(sup)
}

/// Sign-aligned sup distance between the normalized profile
/// `e^f / ||e^f||_{L^2(omega_hat)}` and a unit-norm reference mode.
pub fn v_distance(ef: &ScalarField, q: &ScalarField, geom: &Geometry) -> Result<f64> {
    let norm = ops::l2_norm(ef, geom)?;
    if norm <= 0.0 {
        return Err(Error::Domain("v-distance of zero field".into()));
    }
    let plus = ef.zip(q, |e, qv| e / norm - qv)?.max_abs();
    let minus = ef.zip(q, |e, qv| e / norm + qv)?.max_abs();
    Ok(plus.min(minus))
}

/// Least-squares slope of `ln(values)` over the trailing `window` fraction
/// of the samples; `None` when fewer than 4 samples land in the window or a
/// value is non-positive.
pub fn growth_fit(times: &[f64], values: &[f64], window: f64) -> Option<f64> {
    debug_assert_eq!(times.len(), values.len());
    let n = times.len();
    let start = ((n as f64) * (1.0 - window.clamp(0.0, 1.0))).floor() as usize;
    let ts = &times[start..];
    let vs = &values[start..];
    if ts.len() < 4 || vs.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let m = ts.len() as f64;
    let mean_t = ts.iter().sum::<f64>() / m;
    let mean_l = vs.iter().map(|v| v.ln()).sum::<f64>() / m;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&t, &v) in ts.iter().zip(vs) {
        num += (t - mean_t) * (v.ln() - mean_l);
        den += (t - mean_t) * (t - mean_t);
    }
    if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

/// The a-priori extinction envelope `K A(t)^2 <= P - e^{2Kt} E` with
/// `K = sup(-kappa)`, `P = (alpha'/2) (int -kappa)^2`, `E = P - K A(0)^2`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BlowupBound {
    /// the bound only constrains the flow when `K > 0` and `E > 0`
    pub applies: bool,
    pub k_sup: f64,
    pub p: f64,
    pub e: f64,
    /// latest extinction time from `A -> 0`
    pub t_max: Option<f64>,
    /// sharper variant from a conserved-projection lower bound `|V|`
    pub t_max_v: Option<f64>,
}

pub fn blowup_bound(geom: &Geometry, a0: f64, v_norm: Option<f64>) -> BlowupBound {
    let k_sup = geom.sup_neg_kappa();
    let p = 0.5 * geom.alpha_prime * geom.kappa_l1 * geom.kappa_l1;
    let e = p - k_sup * a0 * a0;
    let applies = k_sup > 0.0 && e > 0.0;
    let t_max = applies.then(|| (p / e).ln() / (2.0 * k_sup));
    let t_max_v = match v_norm {
        Some(v) if applies && p - k_sup * v * v > 0.0 => {
            Some(((p - k_sup * v * v) / e).ln() / (2.0 * k_sup))
        }
        _ => None,
    };
    BlowupBound { applies, k_sup, p, e, t_max, t_max_v }
}

impl BlowupBound {
    /// Checks `K A(t)^2 <= (1 + inflation)(P - e^{2Kt} E)` pointwise over a
    /// logged series; returns the first violating index.
    pub fn check_envelope(&self, samples: &[(f64, f64)], inflation: f64) -> Option<usize> {
        if !self.applies {
            return None;
        }
        samples.iter().position(|&(t, a)| {
            let rhs = self.p - (2.0 * self.k_sup * t).exp() * self.e;
            self.k_sup * a * a > (1.0 + inflation) * rhs.max(0.0)
        })
    }
}

/// One sampled row of the time series.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt: f64,
    pub a: f64,
    pub i_u: f64,
    pub dissipation: f64,
    pub min_ef: f64,
    pub max_ef: f64,
    pub sup_einv_f: f64,
    pub v_dist: Option<f64>,
    pub harnack: f64,
    pub curv_proxy: f64,
    /// `m_k = <e^f, q_k>`
    pub modes: Vec<f64>,
    /// `p_k = <u, q_k>`; the balance law reads `dm_k/dt = -lambda_k p_k`
    pub mode_proj: Vec<f64>,
}

pub fn sample(
    ef: &ScalarField,
    t: f64,
    dt: f64,
    geom: &Geometry,
    spectral: Option<&SpectralData>,
) -> Result<DiagnosticsRecord> {
    let u = u_from_ef(ef, geom)?;
    let (mut modes, mut mode_proj, mut v_dist) = (Vec::new(), Vec::new(), None);
    if let Some(spec) = spectral {
        for q in &spec.eigenfunctions {
            modes.push(ops::inner(ef, q, geom)?);
            mode_proj.push(ops::inner(&u, q, geom)?);
        }
        v_dist = Some(v_distance(ef, spec.ground(), geom)?);
    }
    let min_ef = ef.min();
    Ok(DiagnosticsRecord {
        t,
        dt,
        a: mass(ef, geom)?,
        i_u: energy(&u, geom)?,
        dissipation: dissipation(ef, geom)?,
        min_ef,
        max_ef: ef.max(),
        sup_einv_f: if min_ef > 0.0 { 1.0 / min_ef } else { f64::INFINITY },
        v_dist,
        harnack: harnack_ratio(ef),
        curv_proxy: curvature_proxy(ef, geom)?,
        modes,
        mode_proj,
    })
}

/// Centered-difference residuals of the modal balance law
/// `dm_k/dt + lambda_k p_k = 0` at the interior samples; `None` at the
/// endpoints.
pub fn modal_residuals(
    records: &[DiagnosticsRecord],
    eigenvalues: &[f64],
) -> Vec<Vec<Option<f64>>> {
    let n = records.len();
    (0..n)
        .map(|i| {
            eigenvalues
                .iter()
                .enumerate()
                .map(|(k, &lam)| {
                    if i == 0 || i + 1 == n {
                        return None;
                    }
                    let span = records[i + 1].t - records[i - 1].t;
                    if span <= 0.0 {
                        return None;
                    }
                    let dm = (records[i + 1].modes[k] - records[i - 1].modes[k]) / span;
                    Some(dm + lam * records[i].mode_proj[k])
                })
                .collect()
        })
        .collect()
}

fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "inf".to_string()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// Renders the records as CSV. Mode columns appear only when eigendata was
/// attached; `eta_fit` is the running growth fit of `A` over the trailing
/// half of the samples seen so far (empty until enough samples exist).
pub fn write_csv(
    out: &mut dyn Write,
    records: &[DiagnosticsRecord],
    eigenvalues: &[f64],
) -> Result<()> {
    let k = eigenvalues.len();
    let mut header = String::from(
        "t,dt,A,I_u,dissipation,min_ef,max_ef,sup_einv_f,v_dist,harnack_ratio,eta_fit,curv_proxy",
    );
    for i in 0..k {
        header.push_str(&format!(",m_{i},residual_{i}"));
    }
    writeln!(out, "{header}")?;
    let residuals = modal_residuals(records, eigenvalues);
    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    let masses: Vec<f64> = records.iter().map(|r| r.a).collect();
    for (i, r) in records.iter().enumerate() {
        let eta_fit = if i >= 7 {
            growth_fit(&times[..=i], &masses[..=i], 0.5)
        } else {
            None
        };
        let mut line = format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt(r.t),
            fmt(r.dt),
            fmt(r.a),
            fmt(r.i_u),
            fmt(r.dissipation),
            fmt(r.min_ef),
            fmt(r.max_ef),
            fmt(r.sup_einv_f),
            fmt_opt(r.v_dist),
            fmt(r.harnack),
            fmt_opt(eta_fit),
            fmt(r.curv_proxy),
        );
        for j in 0..k {
            line.push_str(&format!(",{},{}", fmt(r.modes[j]), fmt_opt(residuals[i][j])));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
