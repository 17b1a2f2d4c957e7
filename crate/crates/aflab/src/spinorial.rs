//! Stereographic parametrization of the Gauss map and the two pointwise
//! identities it satisfies: the curvature identity against the
//! Fubini-Study pullback, and membership of the components in the kernel
//! of the linearized operator.
//!
//! Holomorphic data cannot be doubly periodic and pole-free, so these
//! checks run on a centered rectangular patch and exclude a 2-node margin
//! where the periodic stencil wraps into garbage. The flow never consumes
//! this preset.

use crate::error::{Error, Result};
use crate::field::{check_same_grid, Grid, ScalarField};
use crate::geometry::Geometry;
use crate::ops;

/// Width of the excluded boundary margin, in nodes.
pub const PATCH_MARGIN: usize = 2;

/// Gauss-map components of a point `zeta` under stereographic projection.
pub fn stereographic(zeta_re: f64, zeta_im: f64) -> (f64, f64, f64) {
    let r2 = zeta_re * zeta_re + zeta_im * zeta_im;
    let d = 1.0 + r2;
    ((1.0 - r2) / d, 2.0 * zeta_re / d, 2.0 * zeta_im / d)
}

/// Samples of `zeta` on a grid together with the derived sphere-valued map.
#[derive(Debug, Clone)]
pub struct SpinorSample {
    pub grid: Grid,
    pub zeta_re: ScalarField,
    pub zeta_im: ScalarField,
    pub alpha: ScalarField,
    pub beta: ScalarField,
    pub gamma: ScalarField,
}

impl SpinorSample {
    pub fn new(zeta_re: ScalarField, zeta_im: ScalarField) -> Result<SpinorSample> {
        check_same_grid(&zeta_re.grid, &zeta_im.grid)?;
        let grid = zeta_re.grid;
        let mut alpha = ScalarField::zeros(grid);
        let mut beta = ScalarField::zeros(grid);
        let mut gamma = ScalarField::zeros(grid);
        for k in 0..grid.len() {
            let (a, b, g) = stereographic(zeta_re.values[k], zeta_im.values[k]);
            alpha.values[k] = a;
            beta.values[k] = b;
            gamma.values[k] = g;
        }
        Ok(SpinorSample { grid, zeta_re, zeta_im, alpha, beta, gamma })
    }

    pub fn from_fn(grid: Grid, zeta: impl Fn(f64, f64) -> (f64, f64)) -> Result<SpinorSample> {
        let re = ScalarField::from_fn(grid, |x, y| zeta(x, y).0);
        let im = ScalarField::from_fn(grid, |x, y| zeta(x, y).1);
        SpinorSample::new(re, im)
    }

    /// `max |alpha^2 + beta^2 + gamma^2 - 1|` over the grid.
    pub fn max_unit_norm_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.grid.len() {
            let n2 = self.alpha.values[k] * self.alpha.values[k]
                + self.beta.values[k] * self.beta.values[k]
                + self.gamma.values[k] * self.gamma.values[k];
            worst = worst.max((n2 - 1.0).abs());
        }
        worst
    }
}

/// Coefficient of the Fubini-Study pullback against `2 dx dy`.
#[derive(Debug, Clone)]
pub struct PullbackDensity {
    pub grid: Grid,
    pub density: ScalarField,
}

/// `2 |zeta_z|^2 / (1 + |zeta|^2)^2` with `zeta_z = (d_x - i d_y) zeta / 2`
/// by central differences.
pub fn fubini_study_pullback(sample: &SpinorSample) -> PullbackDensity {
    let grid = sample.grid;
    let (re, im) = (&sample.zeta_re.values, &sample.zeta_im.values);
    let mut density = ScalarField::zeros(grid);
    let (i2hx, i2hy) = (0.5 / grid.hx(), 0.5 / grid.hy());
    for j in 0..grid.ny {
        let jp = (j + 1) % grid.ny;
        let jm = (j + grid.ny - 1) % grid.ny;
        for i in 0..grid.nx {
            let ip = (i + 1) % grid.nx;
            let im_ = (i + grid.nx - 1) % grid.nx;
            let k = grid.idx(i, j);
            let rx = (re[grid.idx(ip, j)] - re[grid.idx(im_, j)]) * i2hx;
            let ry = (re[grid.idx(i, jp)] - re[grid.idx(i, jm)]) * i2hy;
            let ix = (im[grid.idx(ip, j)] - im[grid.idx(im_, j)]) * i2hx;
            let iy = (im[grid.idx(i, jp)] - im[grid.idx(i, jm)]) * i2hy;
            // zeta_z = ((rx + iy) + i (ix - ry)) / 2
            let zz2 = ((rx + iy) * (rx + iy) + (ix - ry) * (ix - ry)) / 4.0;
            let r2 = re[k] * re[k] + im[k] * im[k];
            density.values[k] = 2.0 * zz2 / ((1.0 + r2) * (1.0 + r2));
        }
    }
    PullbackDensity { grid, density }
}

fn interior_max<F: Fn(usize) -> f64>(grid: &Grid, f: F) -> f64 {
    let m = PATCH_MARGIN;
    let mut best = 0.0f64;
    for j in m..grid.ny - m {
        for i in m..grid.nx - m {
            best = best.max(f(grid.idx(i, j)));
        }
    }
    best
}

/// Residual of `kappa omega_hat = -phi^* omega_FS` over interior nodes,
/// normalized by the pullback's interior max. Both sides are compared as
/// coefficients against `dx dy`: `kappa 2 ghat + 2 density`.
pub fn verify_kappa_identity(sample: &SpinorSample, geom: &Geometry) -> Result<f64> {
    check_same_grid(&sample.grid, &geom.grid)?;
    let pb = fubini_study_pullback(sample);
    let scale = interior_max(&sample.grid, |k| 2.0 * pb.density.values[k]).max(f64::MIN_POSITIVE);
    let res = interior_max(&sample.grid, |k| {
        (geom.kappa.values[k] * 2.0 * geom.g_hat.values[k] + 2.0 * pb.density.values[k]).abs()
    });
    Ok(res / scale)
}

/// Interior max-norms of `lap_hat(c) - kappa c` for each component of the
/// Gauss map, each normalized by the component's interior max-norm.
pub fn verify_kernel_identity(sample: &SpinorSample, geom: &Geometry) -> Result<[f64; 3]> {
    check_same_grid(&sample.grid, &geom.grid)?;
    let mut out = [0.0f64; 3];
    for (slot, comp) in [&sample.alpha, &sample.beta, &sample.gamma].into_iter().enumerate() {
        let lap = ops::lap_hat(comp, geom)?;
        let res = interior_max(&sample.grid, |k| {
            (lap.values[k] - geom.kappa.values[k] * comp.values[k]).abs()
        });
        let scale = interior_max(&sample.grid, |k| comp.values[k].abs()).max(f64::MIN_POSITIVE);
        out[slot] = res / scale;
    }
    Ok(out)
}

/// The `spinorial-patch` preset: `zeta(z) = z + b z^2` on a centered patch,
/// with the geometry induced by `omega_hat = i sum mu_k ^ conj(mu_k)` in the
/// trivialization `h = 1`:
/// `ghat = (1 + |zeta|^2)^2 / 2`, `kappa = -4 |zeta'|^2 / (1 + |zeta|^2)^4`.
pub fn spinorial_patch(n: usize, alpha_prime: f64) -> Result<(SpinorSample, Geometry)> {
    const B: f64 = 0.3;
    const SIDE: f64 = 1.0;
    let grid = Grid::with_origin(n, n, SIDE, SIDE, -SIDE / 2.0, -SIDE / 2.0)?;
    let zeta = |x: f64, y: f64| {
        // z + B z^2
        (x + B * (x * x - y * y), y + B * 2.0 * x * y)
    };
    let sample = SpinorSample::from_fn(grid, zeta)?;
    let g_hat = ScalarField::from_fn(grid, |x, y| {
        let (zr, zi) = zeta(x, y);
        let r2 = zr * zr + zi * zi;
        (1.0 + r2) * (1.0 + r2) / 2.0
    });
    let kappa = ScalarField::from_fn(grid, |x, y| {
        let (zr, zi) = zeta(x, y);
        let r2 = zr * zr + zi * zi;
        // zeta'(z) = 1 + 2 B z
        let dr = 1.0 + 2.0 * B * x;
        let di = 2.0 * B * y;
        -4.0 * (dr * dr + di * di) / (1.0 + r2).powi(4)
    });
    let geom = Geometry::from_fields(g_hat, kappa, alpha_prime, false)?;
    Ok((sample, geom))
}

/// Load a sampled `zeta` from a pair of binary field dumps.
pub fn sample_from_files(re: &std::path::Path, im: &std::path::Path) -> Result<SpinorSample> {
    let zr = ScalarField::read_dump(re)?;
    let zi = ScalarField::read_dump(im)?;
    if !zr.all_finite() || !zi.all_finite() {
        return Err(Error::Domain("zeta samples must be finite".into()));
    }
    SpinorSample::new(zr, zi)
}
