//! Background geometry: the metric coefficient `ghat`, the prescribed
//! curvature `kappa <= 0`, and the preset catalog.
//!
//! The computational domain is a flat periodic chart carrying prescribed
//! `(ghat, kappa)` as independent data. On a periodic chart a non-constant
//! metric cannot have everywhere non-positive *consistent* curvature (the
//! discrete Gauss-Bonnet sum of `kappa ghat` vanishes), so presets other
//! than `consistent-neg` prescribe `kappa` freely; every structural
//! identity exercised downstream holds for arbitrary `ghat > 0`,
//! `kappa <= 0`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{check_same_grid, Grid, ScalarField};
use crate::ops;

/// Rounding slack allowed on the positive part of `kappa` before a
/// geometry is rejected outright.
pub const KAPPA_POSITIVE_TOL: f64 = 1e-10;
/// `|total_area - 1|` bound for the `normalized` flag.
pub const NORMALIZED_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Geometry {
    pub grid: Grid,
    pub g_hat: ScalarField,
    pub kappa: ScalarField,
    pub alpha_prime: f64,
    pub total_area: f64,
    /// integral of (-kappa) against omega_hat
    pub kappa_l1: f64,
    pub normalized: bool,
}

impl Geometry {
    /// Validate and assemble a geometry from raw fields. `kappa` values in
    /// `(0, KAPPA_POSITIVE_TOL]` are clamped to zero; larger positive parts
    /// are rejected.
    pub fn from_fields(
        g_hat: ScalarField,
        kappa: ScalarField,
        alpha_prime: f64,
        normalize: bool,
    ) -> Result<Geometry> {
        check_same_grid(&g_hat.grid, &kappa.grid)?;
        if !(alpha_prime > 0.0) {
            return Err(Error::Validation(format!(
                "alpha_prime must be positive, got {alpha_prime}"
            )));
        }
        if !g_hat.all_finite() || g_hat.min() <= 0.0 {
            return Err(Error::Validation(
                "ghat must be finite and strictly positive".into(),
            ));
        }
        if !kappa.all_finite() {
            return Err(Error::Validation("kappa must be finite".into()));
        }
        let pos = kappa.max();
        if pos > KAPPA_POSITIVE_TOL {
            return Err(Error::Validation(format!(
                "kappa has positive part {pos:.3e} > {KAPPA_POSITIVE_TOL:.0e}"
            )));
        }
        let kappa = if pos > 0.0 { kappa.map(|v| v.min(0.0)) } else { kappa };

        let grid = g_hat.grid;
        let mut geom = Geometry {
            grid,
            g_hat,
            kappa,
            alpha_prime,
            total_area: 0.0,
            kappa_l1: 0.0,
            normalized: false,
        };
        geom.total_area = ops::integrate(&ScalarField::constant(grid, 1.0), &geom)?;
        if normalize {
            let scale = 1.0 / geom.total_area;
            geom.g_hat = geom.g_hat.map(|v| v * scale);
            geom.total_area = ops::integrate(&ScalarField::constant(grid, 1.0), &geom)?;
        }
        geom.normalized = (geom.total_area - 1.0).abs() <= NORMALIZED_TOL;
        geom.kappa_l1 = -ops::integrate(&geom.kappa, &geom)?;
        Ok(geom)
    }

    pub fn sup_neg_kappa(&self) -> f64 {
        -self.kappa.min()
    }
}

/// Discrete curvature of a metric coefficient: `-lap_hat(log ghat)`,
/// evaluated with the same stencil the flow uses.
pub fn curvature_of_metric(g_hat: &ScalarField, grid: &Grid) -> Result<ScalarField> {
    check_same_grid(&g_hat.grid, grid)?;
    if !g_hat.all_finite() || g_hat.min() <= 0.0 {
        return Err(Error::Domain("curvature needs ghat > 0".into()));
    }
    let log_g = g_hat.map(f64::ln);
    // borrow the stencil with a throwaway zero-curvature wrapper
    let tmp = Geometry {
        grid: *grid,
        g_hat: g_hat.clone(),
        kappa: ScalarField::zeros(*grid),
        alpha_prime: 1.0,
        total_area: 1.0,
        kappa_l1: 0.0,
        normalized: false,
    };
    Ok(ops::lap_hat(&log_g, &tmp)?.map(|v| -v))
}

pub mod presets {
    use super::*;

    /// Normalized flat metric, zero curvature.
    pub fn flat_zero(grid: Grid, alpha_prime: f64) -> Result<Geometry> {
        let g = ScalarField::constant(grid, 1.0 / (2.0 * grid.lx * grid.ly));
        Geometry::from_fields(g, ScalarField::zeros(grid), alpha_prime, false)
    }

    /// Normalized flat metric, `kappa = -level`.
    pub fn constant_kappa(grid: Grid, level: f64, alpha_prime: f64) -> Result<Geometry> {
        if !(level >= 0.0) {
            return Err(Error::Validation(format!(
                "constant-kappa level must be >= 0, got {level}"
            )));
        }
        let g = ScalarField::constant(grid, 1.0 / (2.0 * grid.lx * grid.ly));
        Geometry::from_fields(g, ScalarField::constant(grid, -level), alpha_prime, false)
    }

    /// Normalized flat metric with
    /// `kappa = -c (1 - cos(2 pi x/lx) cos(2 pi y/ly)) / 2 <= 0`,
    /// vanishing on a discrete set of nodes.
    pub fn synthetic_bump(grid: Grid, amplitude: f64, alpha_prime: f64) -> Result<Geometry> {
        if !(amplitude > 0.0) {
            return Err(Error::Validation(format!(
                "synthetic-bump amplitude must be positive, got {amplitude}"
            )));
        }
        let g = ScalarField::constant(grid, 1.0 / (2.0 * grid.lx * grid.ly));
        let tau = std::f64::consts::TAU;
        let kappa = ScalarField::from_fn(grid, |x, y| {
            -amplitude * (1.0 - (tau * x / grid.lx).cos() * (tau * y / grid.ly).cos()) / 2.0
        });
        Geometry::from_fields(g, kappa, alpha_prime, false)
    }

    /// A metric whose *stored* curvature is the discrete curvature of its
    /// own `ghat`. Periodicity forces the consistent curvature to straddle
    /// zero, so the modulation is sized to keep the positive part inside
    /// the clamp tolerance; the preset is deliberately near-flat.
    pub fn consistent_neg(grid: Grid, alpha_prime: f64) -> Result<Geometry> {
        let tau = std::f64::consts::TAU;
        // peak discrete curvature is eps ((tau/lx)^2 + (tau/ly)^2) / (4 ghat);
        // keep it at a quarter of the clamp tolerance
        let peak = ((tau / grid.lx).powi(2) + (tau / grid.ly).powi(2)) * grid.lx * grid.ly / 2.0;
        let eps = 0.25 * KAPPA_POSITIVE_TOL / peak;
        let base = 1.0 / (2.0 * grid.lx * grid.ly);
        let g = ScalarField::from_fn(grid, |x, y| {
            base * (-eps * ((tau * x / grid.lx).cos() + (tau * y / grid.ly).cos())).exp()
        });
        let kappa = curvature_of_metric(&g, &grid)?.map(|v| v.min(0.0));
        Geometry::from_fields(g, kappa, alpha_prime, true)
    }

    /// Load `ghat` and `kappa` from binary field dumps.
    pub fn from_files(
        g_hat_path: &Path,
        kappa_path: &Path,
        alpha_prime: f64,
        normalize: bool,
    ) -> Result<Geometry> {
        let g = ScalarField::read_dump(g_hat_path)?;
        let kappa = ScalarField::read_dump(kappa_path)?;
        Geometry::from_fields(g, kappa, alpha_prime, normalize)
    }
}
