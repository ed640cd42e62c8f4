//! Exact path-following solver for the nonnegative residual-constrained
//! problem `min sum s  s.t. ||y - D s|| <= beta, s >= 0` with real `s` and
//! complex `D`, `y`.
//!
//! The solution path of the penalised form is piecewise linear in the
//! penalty `lambda`. Starting from `lambda = max Re(D^H y)` the active set
//! changes one atom at a time; on each segment the residual is evaluated in
//! closed form and the walk stops exactly where it reaches `beta`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::dictionary::SensingMatrix;
use crate::error::{Error, Result};
use crate::model::{SolverDiagnostics, C64};

#[derive(Debug, Clone)]
pub struct HomotopyOutcome {
    pub coefficients: Vec<f64>,
    pub support: Vec<usize>,
    /// Penalty at the stopping point (the multiplier of the constraint).
    pub multiplier: f64,
    pub diagnostics: SolverDiagnostics,
}

enum Event {
    Enter(usize),
    Leave(usize),
    End,
}

struct Atoms<'a, D: SensingMatrix + ?Sized> {
    d: &'a D,
    gram: HashMap<usize, DVector<f64>>,
    columns: HashMap<usize, DVector<C64>>,
}

impl<'a, D: SensingMatrix + ?Sized> Atoms<'a, D> {
    fn gram(&mut self, j: usize) -> &DVector<f64> {
        let d = self.d;
        self.gram.entry(j).or_insert_with(|| d.gram_column(j).map(|z| z.re))
    }

    fn column(&mut self, j: usize) -> &DVector<C64> {
        let d = self.d;
        self.columns.entry(j).or_insert_with(|| d.column(j))
    }
}

pub fn nonneg_homotopy<D: SensingMatrix + ?Sized>(
    y: &DVector<C64>,
    d: &D,
    beta: f64,
    max_steps: usize,
) -> Result<HomotopyOutcome> {
    if y.len() != d.rows() {
        return Err(Error::Data(format!("data has {} entries, dictionary has {} rows", y.len(), d.rows())));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::config("method.beta", format!("must be nonnegative, got {beta}")));
    }
    let n = d.cols();
    let ynorm = y.norm();
    let zero = |steps: usize, notes: Vec<String>| HomotopyOutcome {
        coefficients: vec![0.0; n],
        support: Vec::new(),
        multiplier: 0.0,
        diagnostics: SolverDiagnostics {
            method: "bpdn-homotopy-nonneg".into(),
            iterations: steps,
            residual_norm: ynorm,
            notes,
            ..Default::default()
        },
    };
    if ynorm <= beta {
        return Ok(zero(0, Vec::new()));
    }
    let c: DVector<f64> = d.apply_adjoint(y.as_slice()).map(|z| z.re);
    let mut j0 = 0;
    for j in 0..n {
        if c[j] > c[j0] {
            j0 = j;
        }
    }
    let lambda0 = c[j0];
    if !(lambda0 > 0.0) {
        return Err(Error::Infeasible { beta, min_residual: ynorm });
    }
    let mut atoms = Atoms { d, gram: HashMap::new(), columns: HashMap::new() };
    let mut lambda = lambda0;
    let mut active = vec![j0];
    let mut excluded = vec![false; n];
    let mut last_removed: Option<usize> = None;
    let mut trace = vec![(0, ynorm, 0.0)];
    let mut notes = Vec::new();

    for step in 1..=max_steps {
        let k = active.len();
        for &j in &active {
            atoms.gram(j);
        }
        let g_ss = DMatrix::from_fn(k, k, |a, b| atoms.gram[&active[b]][active[a]]);
        let Some(chol) = g_ss.cholesky() else {
            let j = active.pop().expect("active set is nonempty");
            excluded[j] = true;
            notes.push(format!("atom {j} dropped: singular active Gram matrix"));
            continue;
        };
        let c_s = DVector::from_iterator(k, active.iter().map(|&j| c[j]));
        let p = chol.solve(&c_s);
        let dir = chol.solve(&DVector::from_element(k, 1.0));

        // Residual along the segment: r(l) = r0 + l v.
        let mut r0 = y.clone();
        let mut v = DVector::<C64>::zeros(y.len());
        for (i, &j) in active.iter().enumerate() {
            let col = atoms.column(j);
            r0.axpy(C64::new(-p[i], 0.0), col, C64::new(1.0, 0.0));
            v.axpy(C64::new(dir[i], 0.0), col, C64::new(1.0, 0.0));
        }

        // Correlations along the segment: corr(l) = e + l a.
        let precise = lambda < 1e-6 * lambda0;
        let e: DVector<f64> = if precise {
            d.apply_adjoint(r0.as_slice()).map(|z| z.re)
        } else {
            let mut e = c.clone();
            for (i, &j) in active.iter().enumerate() {
                e.axpy(-p[i], &atoms.gram[&j], 1.0);
            }
            e
        };
        let mut a = DVector::<f64>::zeros(n);
        for (i, &j) in active.iter().enumerate() {
            a.axpy(dir[i], &atoms.gram[&j], 1.0);
        }

        let mut next = 0.0;
        let mut event = Event::End;
        for j in 0..n {
            if excluded[j] || active.contains(&j) {
                continue;
            }
            let denom = 1.0 - a[j];
            if denom <= 1e-12 {
                continue;
            }
            let lj = (e[j] / denom).min(lambda);
            if Some(j) == last_removed && lj >= lambda * (1.0 - 1e-10) {
                continue;
            }
            if lj > next {
                next = lj;
                event = Event::Enter(j);
            }
        }
        for (i, &j) in active.iter().enumerate() {
            if dir[i] < 0.0 {
                let li = (p[i] / dir[i]).min(lambda);
                if li > next {
                    next = li;
                    event = Event::Leave(j);
                }
            }
        }

        let res = |l: f64| (&r0 + &v * C64::new(l, 0.0)).norm();
        if res(next) <= beta {
            // Residual decreases monotonically as the penalty drops; bisect
            // for the crossing and keep the feasible end.
            let (mut lo, mut hi) = (next, lambda);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if res(mid) <= beta {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let s = &p - &dir * lo;
            let mut coefficients = vec![0.0; n];
            let mut support = Vec::new();
            for (i, &j) in active.iter().enumerate() {
                let v = s[i].max(0.0);
                coefficients[j] = v;
                if v > 0.0 {
                    support.push(j);
                }
            }
            support.sort_unstable();
            let residual = res(lo);
            let objective = coefficients.iter().sum();
            trace.push((step, residual, objective));
            return Ok(HomotopyOutcome {
                coefficients,
                support,
                multiplier: lo,
                diagnostics: SolverDiagnostics {
                    method: "bpdn-homotopy-nonneg".into(),
                    iterations: step,
                    residual_norm: residual,
                    objective,
                    trace,
                    notes,
                },
            });
        }

        lambda = next;
        trace.push((step, res(lambda), (&p - &dir * lambda).sum()));
        match event {
            Event::End => return Err(Error::Infeasible { beta, min_residual: res(0.0) }),
            Event::Enter(j) => {
                active.push(j);
                last_removed = None;
            }
            Event::Leave(j) => {
                active.retain(|&x| x != j);
                last_removed = Some(j);
            }
        }
        if active.is_empty() {
            return Ok(zero(step, notes));
        }
    }
    Err(Error::IterationLimit { iterations: max_steps, primal: f64::NAN, dual: lambda })
}
