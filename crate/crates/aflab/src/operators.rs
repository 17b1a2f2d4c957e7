//! The linear operator `L(w) = -lap_hat(w) + kappa w`, its symmetric
//! weighted discretization, and the low-end eigensolver.
//!
//! The discrete eigenproblem is `A q = lambda M q` with
//! `A = (-Delta_euclid/2 + 2 ghat kappa) hx hy` and `M = diag(2 ghat hx hy)`,
//! so that `A w = M L(w)` pointwise and `A` is exactly symmetric. The
//! solver runs Lanczos on the shift-inverted operator `(A - sigma M)^{-1} M`
//! in the `M` inner product, with conjugate-gradient inner solves on the
//! positive-definite shifted matrix (`sigma` below the Gershgorin-style
//! bound `-sup|kappa| - 1`) and deflated deterministic restarts so that
//! degenerate clusters are recovered with their full multiplicity.

use crate::error::{Error, Result};
use crate::field::{check_same_grid, ScalarField};
use crate::geometry::Geometry;
use crate::ops;

/// `L(w) = -lap_hat(w) + kappa w`.
#[allow(non_snake_case)]
pub fn apply_L(w: &ScalarField, geom: &Geometry) -> Result<ScalarField> {
    check_same_grid(&w.grid, &geom.grid)?;
    let lap = ops::lap_hat(w, geom)?;
    Ok(ScalarField {
        grid: w.grid,
        values: lap
            .values
            .iter()
            .zip(&geom.kappa.values)
            .zip(&w.values)
            .map(|((&l, &k), &wv)| -l + k * wv)
            .collect(),
    })
}

/// `(L w, w)_omega / (w, w)_omega`. The gradient term is evaluated through
/// the quadratic form of the symmetric stencil, so the quotient of a
/// returned eigenfunction reproduces its eigenvalue to rounding.
pub fn rayleigh_quotient(w: &ScalarField, geom: &Geometry) -> Result<f64> {
    let nn = ops::inner(w, w, geom)?;
    if nn <= 0.0 {
        return Err(Error::Domain("rayleigh quotient of zero field".into()));
    }
    Ok(ops::inner(&apply_L(w, geom)?, w, geom)? / nn)
}

/// Eigenvalue/eigenfunction pairs of `L` in the weighted inner product.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// ascending
    pub eigenvalues: Vec<f64>,
    /// omega_hat-orthonormal, same order
    pub eigenfunctions: Vec<ScalarField>,
    /// `||L q - lambda q||_{L^2(omega_hat)}` per pair
    pub residuals: Vec<f64>,
    /// growth rate `eta = -lambda_1`
    pub eta: f64,
    /// indices with `|lambda| <= kernel_tol`
    pub kernel_indices: Vec<usize>,
    /// set when the returned ground state changes sign (grid too coarse)
    pub ground_sign_change: bool,
    /// set when the ground eigenvalue is not simple at solver accuracy
    pub degenerate_ground: bool,
}

impl SpectralData {
    pub fn ground(&self) -> &ScalarField {
        &self.eigenfunctions[0]
    }

    pub fn spectrum_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue,residual\n");
        for (i, (ev, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            s.push_str(&format!("{i},{ev:.16e},{r:.16e}\n"));
        }
        s
    }
}

const EIG_RESIDUAL_TOL: f64 = 1e-9;
const CG_REL_TOL: f64 = 1e-12;
const CG_MAX_ITERS: usize = 40_000;
const LANCZOS_MAX_STEPS: usize = 120;

struct Discretization<'a> {
    geom: &'a Geometry,
    /// diag(M) = 2 ghat hx hy
    m_diag: Vec<f64>,
}

impl<'a> Discretization<'a> {
    fn new(geom: &'a Geometry) -> Self {
        let cell = geom.grid.cell();
        let m_diag = geom.g_hat.values.iter().map(|&g| 2.0 * g * cell).collect();
        Discretization { geom, m_diag }
    }

    fn n(&self) -> usize {
        self.geom.grid.len()
    }

    /// A v = M L(v), exploiting the pointwise identity.
    fn apply_a(&self, v: &[f64], out: &mut [f64]) {
        let f = ScalarField { grid: self.geom.grid, values: v.to_vec() };
        let lv = apply_L(&f, self.geom).expect("same grid");
        for ((o, &l), &m) in out.iter_mut().zip(&lv.values).zip(&self.m_diag) {
            *o = m * l;
        }
    }

    fn apply_shifted(&self, sigma: f64, v: &[f64], out: &mut [f64]) {
        self.apply_a(v, out);
        for ((o, &vi), &m) in out.iter_mut().zip(v).zip(&self.m_diag) {
            *o -= sigma * m * vi;
        }
    }

    fn m_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        ops::compensated_sum(
            a.iter().zip(b).zip(&self.m_diag).map(|((&x, &y), &m)| x * y * m),
        )
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        ops::compensated_sum(a.iter().zip(b).map(|(&x, &y)| x * y))
    }

    /// CG on (A - sigma M) x = b; returns iteration count.
    fn cg_solve(&self, sigma: f64, b: &[f64], x: &mut [f64], rel_tol: f64) -> Result<usize> {
        let n = self.n();
        x.fill(0.0);
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let b_norm2 = Self::dot(b, b);
        if b_norm2 == 0.0 {
            return Ok(0);
        }
        let mut rr = b_norm2;
        let target = rel_tol * rel_tol * b_norm2;
        for it in 0..CG_MAX_ITERS {
            if rr <= target {
                return Ok(it);
            }
            self.apply_shifted(sigma, &p, &mut ap);
            let pap = Self::dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::Solver(format!(
                    "shifted matrix lost definiteness (p'Sp = {pap:.3e})"
                )));
            }
            let alpha = rr / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new = Self::dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..n {
                p[k] = r[k] + beta * p[k];
            }
        }
        Err(Error::Solver(format!(
            "CG stalled at relative residual {:.3e}",
            (rr / b_norm2).sqrt()
        )))
    }
}

/// Deterministic start vector; SplitMix64 stream per restart index.
fn start_vector(n: usize, restart: usize) -> Vec<f64> {
    let mut state = 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(restart as u64 + 1);
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z = z ^ (z >> 31);
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    (0..n).map(|_| next()).collect()
}

/// Eigenvalues/eigenvectors of a symmetric tridiagonal matrix by the
/// implicit QL algorithm (classic tql2), returned unsorted.
fn tridiag_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    let mut z: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 50, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    // columns of z are eigenvectors; transpose into row vectors
    let vecs = (0..n)
        .map(|j| (0..n).map(|i| z[i][j]).collect())
        .collect();
    (d, vecs)
}

/// Lowest `k` eigenpairs of `L` on the given geometry.
///
/// `kernel_tol <= 0` selects the default `1e-8 * max|lambda|` over the
/// computed modes.
pub fn eigensolve(geom: &Geometry, k: usize, kernel_tol: f64) -> Result<SpectralData> {
    if k < 1 {
        return Err(Error::Domain("eigensolve needs k >= 1".into()));
    }
    let disc = Discretization::new(geom);
    let n = disc.n();
    if k >= n {
        return Err(Error::Domain(format!("k = {k} too large for grid of {n} nodes")));
    }
    let sigma = -geom.kappa.max_abs() - 1.0;

    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut residuals: Vec<f64> = Vec::new();

    let max_restarts = k + 4;
    'restarts: for restart in 0..max_restarts {
        if pairs.len() >= k {
            break;
        }
        // Lanczos basis in the M inner product, deflated against found pairs.
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();

        let mut v = start_vector(n, restart);
        orthogonalize(&disc, &mut v, &pairs, &basis);
        let norm = disc.m_dot(&v, &v).sqrt();
        if norm < 1e-300 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);

        let mut w = vec![0.0; n];
        for step in 0..LANCZOS_MAX_STEPS {
            // w = (A - sigma M)^{-1} M v
            let b: Vec<f64> = v.iter().zip(&disc.m_diag).map(|(&x, &m)| x * m).collect();
            disc.cg_solve(sigma, &b, &mut w, CG_REL_TOL)?;
            let alpha = disc.m_dot(&w, &v);
            // full reorthogonalization keeps the basis clean despite the
            // inexact inner solves
            basis.push(v.clone());
            alphas.push(alpha);
            let mut next = w.clone();
            orthogonalize(&disc, &mut next, &pairs, &basis);
            orthogonalize(&disc, &mut next, &pairs, &basis);
            let beta = disc.m_dot(&next, &next).sqrt();

            let done_growing = beta < 1e-13 || step + 1 == LANCZOS_MAX_STEPS;
            let check_now = done_growing || (step >= 9 && (step + 1) % 10 == 0);
            if check_now {
                let (mut accepted, mut res_acc) =
                    harvest(&disc, geom, sigma, &basis, &alphas, &betas, k - pairs.len())?;
                if done_growing || !accepted.is_empty() {
                    pairs.append(&mut accepted);
                    residuals.append(&mut res_acc);
                    if done_growing || pairs.len() >= k {
                        continue 'restarts;
                    }
                    // harvest consumed the run; restart with deflation
                    continue 'restarts;
                }
            }
            if beta < 1e-13 {
                continue 'restarts;
            }
            betas.push(beta);
            next.iter_mut().for_each(|x| *x /= beta);
            v = next;
        }
    }

    if pairs.len() < k {
        return Err(Error::Solver(format!(
            "found only {} of {k} eigenpairs after {max_restarts} deflated restarts",
            pairs.len()
        )));
    }

    // sort pairs (and their residuals) ascending by eigenvalue
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].0.total_cmp(&pairs[b].0));
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenfunctions = Vec::with_capacity(k);
    let mut res_sorted = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        eigenvalues.push(pairs[i].0);
        eigenfunctions.push(ScalarField { grid: geom.grid, values: pairs[i].1.clone() });
        res_sorted.push(residuals[i]);
    }

    // ground-state sign convention: positive mean, then positivity check
    let mean = ops::integrate(&eigenfunctions[0], geom)?;
    if mean < 0.0 {
        eigenfunctions[0].values.iter_mut().for_each(|x| *x = -*x);
    }
    let ground_sign_change = eigenfunctions[0].min() <= 0.0;

    let scale = eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let tol = if kernel_tol > 0.0 { kernel_tol } else { 1e-8 * scale.max(1.0) };
    let kernel_indices = eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &ev)| ev.abs() <= tol)
        .map(|(i, _)| i)
        .collect();

    let degenerate_ground =
        eigenvalues.len() > 1 && (eigenvalues[1] - eigenvalues[0]).abs() <= 1e-8 * scale.max(1.0);

    Ok(SpectralData {
        eta: -eigenvalues[0],
        eigenvalues,
        eigenfunctions,
        residuals: res_sorted,
        kernel_indices,
        ground_sign_change,
        degenerate_ground,
    })
}

fn orthogonalize(
    disc: &Discretization,
    v: &mut [f64],
    pairs: &[(f64, Vec<f64>)],
    basis: &[Vec<f64>],
) {
    for (_, q) in pairs {
        let c = disc.m_dot(v, q);
        v.iter_mut().zip(q).for_each(|(x, &qk)| *x -= c * qk);
    }
    for b in basis {
        let c = disc.m_dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, &bk)| *x -= c * bk);
    }
}

/// Rayleigh-Ritz on the current Lanczos run; returns converged pairs in
/// ascending eigenvalue order, at most `want`.
fn harvest(
    disc: &Discretization,
    geom: &Geometry,
    sigma: f64,
    basis: &[Vec<f64>],
    alphas: &[f64],
    betas: &[f64],
    want: usize,
) -> Result<(Vec<(f64, Vec<f64>)>, Vec<f64>)> {
    let m = alphas.len();
    if m == 0 || want == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let (thetas, svecs) = tridiag_eigen(alphas, betas);
    // largest theta of the inverted operator <-> smallest lambda
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| thetas[b].total_cmp(&thetas[a]));

    let n = disc.n();
    let mut out = Vec::new();
    let mut res_out = Vec::new();
    let mut scratch = vec![0.0; n];
    for &j in &order {
        if out.len() >= want {
            break;
        }
        if thetas[j] <= 0.0 {
            continue; // not a shift-inverted low mode
        }
        // assemble the Ritz vector
        let mut q = vec![0.0; n];
        for (s, b) in svecs[j].iter().zip(basis) {
            for (qk, &bk) in q.iter_mut().zip(b) {
                *qk += s * bk;
            }
        }
        let norm = disc.m_dot(&q, &q).sqrt();
        if norm < 1e-300 {
            continue;
        }
        q.iter_mut().for_each(|x| *x /= norm);
        // exact residual against L
        let f = ScalarField { grid: geom.grid, values: q.clone() };
        let lam = {
            disc.apply_a(&q, &mut scratch);
            Discretization::dot(&scratch, &q)
        };
        let lq = apply_L(&f, geom)?;
        let res2 = ops::compensated_sum(
            lq.values
                .iter()
                .zip(&q)
                .zip(&disc.m_diag)
                .map(|((&l, &qk), &mk)| {
                    let r = l - lam * qk;
                    r * r * mk
                }),
        );
        let res = res2.max(0.0).sqrt();
        if res <= EIG_RESIDUAL_TOL {
            out.push((lam, q));
            res_out.push(res);
        } else {
            // Ritz values come ordered by convergence priority; once one
            // misses, deeper ones will too
            break;
        }
    }
    let _ = sigma;
    Ok((out, res_out))
}
