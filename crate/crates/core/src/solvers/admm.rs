//! Residual-constrained l1 minimisation by ADMM on the real-stacked system.
//!
//! Splitting: minimise `f(z) + I(||u|| <= beta)` subject to `x = z` and
//! `A x - b = u`, with `f` the sum of group norms (pairs for complex
//! unknowns). Both constraints share one penalty, so the x-update matrix
//! `I + A^T A` never changes and is factorised once.
//!
//! Every few iterations the current support is handed to an active-set
//! solve that returns the exact minimiser for that support together with a
//! KKT check. A passing check ends the run with a certified solution.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::BpdnConfig;
use crate::error::{Error, Result};
use crate::model::{SolverDiagnostics, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownDomain {
    Complex,
    Real,
    NonnegReal,
}

impl UnknownDomain {
    fn group(self) -> usize {
        if self == UnknownDomain::Complex {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    pub domain: UnknownDomain,
    /// Real unknowns; complex entries are stored as (re, im) pairs.
    pub x: Vec<f64>,
    /// Lagrange multiplier of the residual constraint when certified.
    pub multiplier: Option<f64>,
    pub diagnostics: SolverDiagnostics,
}

impl AdmmOutcome {
    pub fn complex(&self) -> Vec<C64> {
        match self.domain {
            UnknownDomain::Complex => self.x.chunks(2).map(|p| C64::new(p[0], p[1])).collect(),
            _ => self.x.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }
}

fn real_stack(d: &DMatrix<C64>, y: &DVector<C64>, domain: UnknownDomain) -> (DMatrix<f64>, DVector<f64>) {
    let (m, n) = d.shape();
    let a = match domain {
        UnknownDomain::Complex => DMatrix::from_fn(2 * m, 2 * n, |i, j| {
            let z = d[(i % m, j / 2)];
            match (i < m, j % 2 == 0) {
                (true, true) => z.re,
                (false, true) => z.im,
                (true, false) => -z.im,
                (false, false) => z.re,
            }
        }),
        _ => DMatrix::from_fn(2 * m, n, |i, j| if i < m { d[(i, j)].re } else { d[(i - m, j)].im }),
    };
    let b = DVector::from_fn(2 * m, |i, _| if i < m { y[i].re } else { y[i - m].im });
    (a, b)
}

enum XSolver {
    /// rows <= cols: Cholesky of `I + A A^T`.
    Wide(Cholesky<f64, Dyn>),
    /// rows > cols: Cholesky of `I + A^T A`.
    Tall(Cholesky<f64, Dyn>),
}

/// Eigenvalues and vectors of the smaller Gram matrix.
fn small_gram_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>, bool) {
    let wide = a.nrows() <= a.ncols();
    let g = if wide { a * a.transpose() } else { a.transpose() * a };
    let e = g.symmetric_eigen();
    (e.eigenvalues, e.eigenvectors, wide)
}

/// Distance from `b` to the range of `a`.
fn range_residual(a: &DMatrix<f64>, b: &DVector<f64>, eig: &(DVector<f64>, DMatrix<f64>, bool)) -> f64 {
    let (vals, vecs, wide) = eig;
    let lmax = vals.iter().cloned().fold(0.0, f64::max);
    let mut proj_sq = 0.0;
    if *wide {
        for (i, &l) in vals.iter().enumerate() {
            if l > 1e-12 * lmax {
                proj_sq += vecs.column(i).dot(b).powi(2);
            }
        }
    } else {
        let atb = a.tr_mul(b);
        for (i, &l) in vals.iter().enumerate() {
            if l > 1e-12 * lmax {
                proj_sq += vecs.column(i).dot(&atb).powi(2) / l;
            }
        }
    }
    (b.norm_squared() - proj_sq).max(0.0).sqrt()
}

fn prox(v: &DVector<f64>, t: f64, domain: UnknownDomain) -> DVector<f64> {
    match domain {
        UnknownDomain::Complex => {
            let mut out = v.clone();
            for g in 0..v.len() / 2 {
                let (re, im) = (v[2 * g], v[2 * g + 1]);
                let nrm = re.hypot(im);
                let scale = if nrm > t { 1.0 - t / nrm } else { 0.0 };
                out[2 * g] = re * scale;
                out[2 * g + 1] = im * scale;
            }
            out
        }
        UnknownDomain::Real => v.map(|x| x.signum() * (x.abs() - t).max(0.0)),
        UnknownDomain::NonnegReal => v.map(|x| (x - t).max(0.0)),
    }
}

fn group_norm(x: &[f64], g: usize, j: usize) -> f64 {
    if g == 2 {
        x[2 * j].hypot(x[2 * j + 1])
    } else {
        x[j].abs()
    }
}

fn objective(x: &[f64], g: usize) -> f64 {
    (0..x.len() / g).map(|j| group_norm(x, g, j)).sum()
}

/// Candidate supports: groups of `z` above a ladder of relative thresholds.
fn candidate_supports(z: &DVector<f64>, g: usize, max_groups: usize) -> Vec<Vec<usize>> {
    let norms: Vec<f64> = (0..z.len() / g).map(|j| group_norm(z.as_slice(), g, j)).collect();
    let peak = norms.iter().cloned().fold(0.0, f64::max);
    let mut out: Vec<Vec<usize>> = Vec::new();
    if !(peak > 0.0) {
        return out;
    }
    for rel in [0.0, 1e-6, 1e-4, 1e-3, 1e-2, 1e-1] {
        let set: Vec<usize> = (0..norms.len()).filter(|&j| norms[j] > rel * peak).collect();
        if set.len() <= max_groups && !out.contains(&set) {
            out.push(set);
        }
    }
    out
}

struct Restricted {
    groups: Vec<usize>,
    /// Real unknowns of the kept groups, `g` per group.
    s: DVector<f64>,
    mu: f64,
}

fn kkt_residual(
    a_s: &DMatrix<f64>,
    b: &DVector<f64>,
    beta: f64,
    s: &DVector<f64>,
    mu: f64,
    g: usize,
) -> Option<(DVector<f64>, f64)> {
    let r = b - a_s * s;
    let corr = a_s.tr_mul(&r);
    let mut f = DVector::zeros(s.len() + 1);
    for k in 0..s.len() / g {
        let nrm = group_norm(s.as_slice(), g, k);
        if !(nrm > 0.0) {
            return None;
        }
        for t in 0..g {
            f[k * g + t] = mu * s[k * g + t] / nrm - corr[k * g + t];
        }
    }
    f[s.len()] = 0.5 * (r.norm_squared() - beta * beta);
    let n = f.norm();
    Some((f, n))
}

/// Exact minimiser of the l1 objective restricted to `groups`: damped Newton
/// on the optimality system `mu * s_k / |s_k| = (A^T r)_k`, `|r| = beta`,
/// starting from `s0`. Groups whose magnitude collapses are dropped.
fn restricted_solve(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    beta: f64,
    mut groups: Vec<usize>,
    mut s: DVector<f64>,
    mut mu: f64,
    domain: UnknownDomain,
) -> Option<Restricted> {
    let g = domain.group();
    'outer: loop {
        if groups.is_empty() {
            return None;
        }
        let cols: Vec<usize> = groups.iter().flat_map(|&j| (0..g).map(move |t| j * g + t)).collect();
        let a_s = a.select_columns(cols.iter());
        let gram = a_s.transpose() * &a_s;
        let n = s.len();
        let (mut f, mut fnorm) = kkt_residual(&a_s, b, beta, &s, mu, g)?;
        // Stationarity relative to mu, feasibility relative to beta^2.
        let rel = |f: &DVector<f64>, mu: f64| f.rows(0, n).amax() / mu + f[n].abs() / (beta * beta);
        for _ in 0..200 {
            if rel(&f, mu) <= 1e-13 {
                break;
            }
            let r = b - &a_s * &s;
            let corr = a_s.tr_mul(&r);
            let mut jac = DMatrix::zeros(n + 1, n + 1);
            jac.view_mut((0, 0), (n, n)).copy_from(&gram);
            for k in 0..n / g {
                let nrm = group_norm(s.as_slice(), g, k);
                for t in 0..g {
                    let ut = s[k * g + t] / nrm;
                    if g == 2 {
                        for w in 0..g {
                            let uw = s[k * g + w] / nrm;
                            let id = if t == w { 1.0 } else { 0.0 };
                            jac[(k * g + t, k * g + w)] += mu * (id - ut * uw) / nrm;
                        }
                    }
                    jac[(k * g + t, n)] = ut;
                    jac[(n, k * g + t)] = -corr[k * g + t];
                }
            }
            let step = jac.lu().solve(&(-&f))?;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let s_new = &s + step.rows(0, n) * t;
                let mu_new = mu + step[n] * t;
                if mu_new > 0.0 {
                    if let Some((f_new, n_new)) = kkt_residual(&a_s, b, beta, &s_new, mu_new, g) {
                        let signs_kept = domain == UnknownDomain::Complex || s_new.iter().zip(s.iter()).all(|(x, y)| x * y > 0.0);
                        if signs_kept && n_new < (1.0 - 1e-4 * t) * fnorm {
                            s = s_new;
                            mu = mu_new;
                            f = f_new;
                            fnorm = n_new;
                            accepted = true;
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            if !accepted && rel(&f, mu) <= 1e-8 {
                break;
            }
            if !accepted {
                // Drop the weakest group and restart on the smaller support.
                let k_min =
                    (0..n / g).min_by(|&x, &y| group_norm(s.as_slice(), g, x).total_cmp(&group_norm(s.as_slice(), g, y)))?;
                let peak = (0..n / g).map(|k| group_norm(s.as_slice(), g, k)).fold(0.0, f64::max);
                if group_norm(s.as_slice(), g, k_min) > 1e-3 * peak {
                    return None;
                }
                groups.remove(k_min);
                let keep: Vec<usize> = (0..n).filter(|i| i / g != k_min).collect();
                s = DVector::from_fn(keep.len(), |i, _| s[keep[i]]);
                continue 'outer;
            }
        }
        if rel(&f, mu) > 1e-8 {
            return None;
        }
        return Some(Restricted { groups, s, mu });
    }
}

/// Active-set refinement seeded with `groups`: solve the restricted problem,
/// add the worst violator of the optimality conditions, repeat. Returns the
/// minimiser and its multiplier only once every off-support group passes.
fn polish(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    beta: f64,
    z: &DVector<f64>,
    groups: &[usize],
    domain: UnknownDomain,
) -> Option<(DVector<f64>, f64)> {
    let g = domain.group();
    // Complex solutions can hold more groups than there are complex rows.
    let max_groups = a.nrows();
    if groups.is_empty() || groups.len() > max_groups {
        return None;
    }
    let cols: Vec<usize> = groups.iter().flat_map(|&j| (0..g).map(move |t| j * g + t)).collect();
    let a_s = a.select_columns(cols.iter());
    let mut current = match sphere_start(&a_s, b, beta, z, &cols, groups, g) {
        Some((s0, mu0)) => restricted_solve(a, b, beta, groups.to_vec(), s0, mu0, domain),
        None => None,
    };
    if current.is_none() {
        // Start from the iterate itself with the mean correlation level.
        let s0 = DVector::from_fn(cols.len(), |i, _| z[cols[i]]);
        let corr = a_s.tr_mul(&(b - &a_s * &s0));
        let mu0 = (0..groups.len()).map(|k| group_norm(corr.as_slice(), g, k)).sum::<f64>() / groups.len() as f64;
        if mu0 > 0.0 {
            current = restricted_solve(a, b, beta, groups.to_vec(), s0, mu0, domain);
        }
    }
    let mut current = current?;
    for _ in 0..=max_groups {
        let cols: Vec<usize> = current.groups.iter().flat_map(|&j| (0..g).map(move |t| j * g + t)).collect();
        let r = b - a.select_columns(cols.iter()) * &current.s;
        let corr = a.tr_mul(&r);
        let limit = current.mu * (1.0 + 1e-6);
        let mut worst: Option<(usize, f64)> = None;
        for j in 0..z.len() / g {
            if current.groups.binary_search(&j).is_ok() {
                continue;
            }
            let level = match domain {
                UnknownDomain::NonnegReal => corr[j],
                _ => group_norm(corr.as_slice(), g, j),
            };
            if level > limit && worst.map_or(true, |(_, w)| level > w) {
                worst = Some((j, level));
            }
        }
        let Some((j, level)) = worst else {
            let mut x = DVector::zeros(z.len());
            for (i, &c) in cols.iter().enumerate() {
                x[c] = current.s[i];
            }
            return Some((x, current.mu));
        };
        if current.groups.len() == max_groups {
            return None;
        }
        // Enter along the correlation direction with a small magnitude.
        let peak = (0..current.groups.len()).map(|k| group_norm(current.s.as_slice(), g, k)).fold(0.0, f64::max);
        let pos = current.groups.binary_search(&j).unwrap_err();
        let mut groups = current.groups.clone();
        groups.insert(pos, j);
        let mut s = Vec::with_capacity(groups.len() * g);
        s.extend_from_slice(&current.s.as_slice()[..pos * g]);
        s.extend((0..g).map(|t| 1e-6 * peak * corr[j * g + t] / level));
        s.extend_from_slice(&current.s.as_slice()[pos * g..]);
        current = restricted_solve(a, b, beta, groups, DVector::from_vec(s), current.mu, domain)?;
    }
    None
}

/// Least-squares fit on the support pulled back onto the residual sphere
/// along the directions of `z`, with the matching multiplier.
fn sphere_start(
    a_s: &DMatrix<f64>,
    b: &DVector<f64>,
    beta: f64,
    z: &DVector<f64>,
    cols: &[usize],
    groups: &[usize],
    g: usize,
) -> Option<(DVector<f64>, f64)> {
    if cols.len() > a_s.nrows() {
        return None;
    }
    let chol = (a_s.transpose() * a_s).cholesky()?;
    let s_ls = chol.solve(&a_s.tr_mul(b));
    let r_ls = (b - a_s * &s_ls).norm();
    if !(r_ls < beta) {
        return None;
    }
    let u = DVector::from_fn(cols.len(), |i, _| z[cols[i]] / group_norm(z.as_slice(), g, groups[i / g]));
    let q = chol.solve(&u);
    let uq = u.dot(&q);
    if !(uq > 0.0) {
        return None;
    }
    let mu0 = ((beta * beta - r_ls * r_ls) / uq).sqrt();
    Some((&s_ls - &q * mu0, mu0))
}

/// Minimise the l1 norm (sum of moduli for complex unknowns) subject to
/// `||y - D s|| <= beta`, with the unknown restricted to `domain`.
pub fn bpdn_admm(y: &DVector<C64>, d: &DMatrix<C64>, domain: UnknownDomain, cfg: &BpdnConfig) -> Result<AdmmOutcome> {
    cfg.validate()?;
    if y.len() != d.nrows() {
        return Err(Error::Data(format!("data has {} entries, dictionary has {} rows", y.len(), d.nrows())));
    }
    let g = domain.group();
    let n_real = d.ncols() * g;
    let method = match domain {
        UnknownDomain::Complex => "bpdn-admm-complex",
        UnknownDomain::Real => "bpdn-admm-real",
        UnknownDomain::NonnegReal => "bpdn-admm-nonneg",
    };
    let ynorm = y.norm();
    if ynorm <= cfg.beta {
        return Ok(AdmmOutcome {
            domain,
            x: vec![0.0; n_real],
            multiplier: None,
            diagnostics: SolverDiagnostics { method: method.into(), residual_norm: ynorm, ..Default::default() },
        });
    }

    let (a_raw, b_raw) = real_stack(d, y, domain);
    let eig = small_gram_eigen(&a_raw);
    let alpha = eig.0.iter().cloned().fold(0.0, f64::max).sqrt();
    if !(alpha > 0.0) {
        return Err(Error::Infeasible { beta: cfg.beta, min_residual: ynorm });
    }
    if domain != UnknownDomain::NonnegReal {
        let min_res = range_residual(&a_raw, &b_raw, &eig);
        if cfg.beta < min_res * (1.0 - 1e-9) {
            return Err(Error::Infeasible { beta: cfg.beta, min_residual: min_res });
        }
    }
    let gamma = ynorm;
    let a = &a_raw / alpha;
    let b = &b_raw / gamma;
    let beta = cfg.beta / gamma;
    let unscale = gamma / alpha;
    let rows = a.nrows();

    let solver = if rows <= n_real {
        let c = DMatrix::identity(rows, rows) + &a * a.transpose();
        XSolver::Wide(c.cholesky().ok_or_else(|| Error::Numeric("x-update factorisation failed".into()))?)
    } else {
        let c = DMatrix::identity(n_real, n_real) + a.transpose() * &a;
        XSolver::Tall(c.cholesky().ok_or_else(|| Error::Numeric("x-update factorisation failed".into()))?)
    };

    let mut rho = cfg.rho;
    let mut z = DVector::<f64>::zeros(n_real);
    let mut u = DVector::<f64>::zeros(rows);
    let mut l1 = DVector::<f64>::zeros(n_real);
    let mut l2 = DVector::<f64>::zeros(rows);
    let mut trace = Vec::new();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);

    let finish = |x: DVector<f64>, mu: Option<f64>, it: usize, trace: Vec<(usize, f64, f64)>, note: &str| -> AdmmOutcome {
        let x_out: Vec<f64> = x.iter().map(|v| v * unscale).collect();
        let resid = (&b_raw - &a_raw * DVector::from_column_slice(&x_out)).norm();
        AdmmOutcome {
            domain,
            multiplier: mu.map(|m| m * gamma),
            diagnostics: SolverDiagnostics {
                method: method.into(),
                iterations: it,
                residual_norm: resid,
                objective: objective(&x_out, g),
                trace,
                notes: vec![note.to_string()],
            },
            x: x_out,
        }
    };

    for it in 1..=cfg.max_iterations {
        let rhs = (&z - &l1) + a.tr_mul(&(&b + &u - &l2));
        let (x, ax) = match &solver {
            XSolver::Wide(c) => {
                let w = c.solve(&(&a * &rhs));
                (&rhs - a.tr_mul(&w), w)
            }
            XSolver::Tall(c) => {
                let x = c.solve(&rhs);
                let ax = &a * &x;
                (x, ax)
            }
        };
        let z_old = z.clone();
        let u_old = u.clone();
        z = prox(&(&x + &l1), 1.0 / rho, domain);
        let t = &ax - &b + &l2;
        let tn = t.norm();
        u = if tn <= beta { t } else { t * (beta / tn) };
        let r1 = &x - &z;
        let r2 = &ax - &b - &u;
        l1 += &r1;
        l2 += &r2;

        primal = (r1.norm_squared() + r2.norm_squared()).sqrt();
        let dual_vec = (&z - &z_old) + a.tr_mul(&(&u - &u_old));
        dual = rho * dual_vec.norm();
        let eps_pri = 1e-14 * ((n_real + rows) as f64).sqrt()
            + cfg.tol_primal
                * (x.norm_squared() + ax.norm_squared()).sqrt().max((z.norm_squared() + (&u + &b).norm_squared()).sqrt());
        let eps_dual = 1e-14 * (n_real as f64).sqrt() + cfg.tol_dual * rho * (&l1 + a.tr_mul(&l2)).norm();

        if it % 100 == 0 || it == 1 {
            let resid = (&a * &z - &b).norm() * gamma;
            trace.push((it, resid, objective(z.as_slice(), g) * unscale));
        }

        let converged = primal <= eps_pri && dual <= eps_dual;
        if converged || (cfg.polish_every > 0 && it % cfg.polish_every == 0) {
            for groups in candidate_supports(&z, g, rows) {
                if let Some((xs, mu)) = polish(&a, &b, beta, &z, &groups, domain) {
                    return Ok(finish(xs, Some(mu), it, trace, "certified by active-set check"));
                }
            }
        }
        if converged && (&a * &z - &b).norm() <= beta * (1.0 + 1e-6) {
            return Ok(finish(z, None, it, trace, "converged to tolerance"));
        }

        if cfg.rho_balance > 1.0 && it % 10 == 0 {
            if primal > cfg.rho_balance * dual {
                rho *= 2.0;
                l1 /= 2.0;
                l2 /= 2.0;
            } else if dual > cfg.rho_balance * primal {
                rho /= 2.0;
                l1 *= 2.0;
                l2 *= 2.0;
            }
        }
    }
    Err(Error::IterationLimit { iterations: cfg.max_iterations, primal, dual })
}
