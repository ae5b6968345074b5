//! Exact active-set solver for the small dense projection QP
//!
//! ```text
//!     minimize   1/2 ||u - u_nom||^2
//!     subject to G u <= h
//! ```
//!
//! Problems here are tiny (a handful of rows and at most six decision
//! variables, one per joint), so the working-set linear systems are
//! solved exactly and the solution carries KKT certificates instead of
//! convergence tolerances. Starting from the unconstrained optimum
//! `u_nom`, the most violated row is added to the working set (lowest
//! index on ties), rows with negative multipliers are dropped, and a
//! dependent violated row either exposes infeasibility or swaps out a
//! working row.

use nalgebra::{DMatrix, DVector, RowDVector};
use thiserror::Error;

/// Absolute feasibility tolerance on G u <= h.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Threshold below which a multiplier counts as negative.
const DUAL_TOL: f64 = 1e-10;
/// Residual norm below which a row counts as dependent on the working set.
const DEPENDENCE_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum QpError {
    #[error("no point satisfies all constraints")]
    Infeasible,
    #[error("active-set iteration limit reached")]
    IterationLimit,
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
}

/// The projection QP data. `g` is m x n, `h` is length m; m = 0 means
/// unconstrained.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub u_nom: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
}

impl QpProblem {
    pub fn new(u_nom: DVector<f64>, g: DMatrix<f64>, h: DVector<f64>) -> Result<Self, QpError> {
        if g.nrows() != h.len() || g.ncols() != u_nom.len() {
            return Err(QpError::Dimensions(format!(
                "G is {}x{}, h has {}, u_nom has {}",
                g.nrows(),
                g.ncols(),
                h.len(),
                u_nom.len()
            )));
        }
        Ok(Self { u_nom, g, h })
    }

    fn residual(&self, u: &DVector<f64>, row: usize) -> f64 {
        self.g.row(row).dot(&u.transpose()) - self.h[row]
    }
}

/// Solution with multipliers and KKT certificates.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub u_star: DVector<f64>,
    /// One multiplier per constraint row, zero off the active set.
    pub lambda: DVector<f64>,
    /// Indices of rows active at the solution.
    pub active_set: Vec<usize>,
    /// Largest KKT residual (stationarity, feasibility, complementarity).
    pub kkt_residual: f64,
    /// Shared slack value when solved through [`solve_with_slack`].
    pub slack: Option<f64>,
}

/// KKT residuals of a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// inf-norm of (u - u_nom) + G^T lambda.
    pub stationarity: f64,
    /// Largest positive constraint violation max(0, G u - h).
    pub primal: f64,
    /// Largest negative multiplier max(0, -lambda).
    pub dual: f64,
    /// Largest |lambda_i * (G_i u - h_i)|.
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

/// Project `u_nom` onto the equality set of the working rows; returns
/// the projected point and the working-set multipliers.
fn project_onto_working_set(
    p: &QpProblem,
    working: &[usize],
) -> Option<(DVector<f64>, DVector<f64>)> {
    if working.is_empty() {
        return Some((p.u_nom.clone(), DVector::zeros(0)));
    }
    let k = working.len();
    let n = p.u_nom.len();
    let mut gw = DMatrix::zeros(k, n);
    let mut hw = DVector::zeros(k);
    for (i, &row) in working.iter().enumerate() {
        gw.row_mut(i).copy_from(&p.g.row(row));
        hw[i] = p.h[row];
    }
    let gram = &gw * gw.transpose();
    let rhs = &gw * &p.u_nom - hw;
    let lambda = gram.lu().solve(&rhs)?;
    let u = &p.u_nom - gw.transpose() * &lambda;
    Some((u, lambda))
}

/// Solve the projection QP exactly. With no rows the nominal input is
/// returned unchanged (bit for bit). Returns [`QpError::Infeasible`]
/// when the constraint rows admit no solution.
pub fn solve(p: &QpProblem) -> Result<QpSolution, QpError> {
    let m = p.g.nrows();
    let mut working: Vec<usize> = Vec::new();
    let max_iters = 50 * (m + 2);

    for _ in 0..max_iters {
        let (u, lambda_w) = project_onto_working_set(p, &working)
            .ok_or(QpError::IterationLimit)?;

        // Drop the most negative multiplier, if any.
        if let Some((drop_pos, _)) = lambda_w
            .iter()
            .enumerate()
            .filter(|(_, &l)| l < -DUAL_TOL)
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        {
            working.remove(drop_pos);
            continue;
        }

        // Most violated row outside the working set; lowest index on ties.
        let mut worst: Option<(usize, f64)> = None;
        for row in 0..m {
            if working.contains(&row) {
                continue;
            }
            let viol = p.residual(&u, row);
            if viol > FEASIBILITY_TOL && worst.map_or(true, |(_, w)| viol > w) {
                worst = Some((row, viol));
            }
        }
        let Some((j, _)) = worst else {
            return Ok(finish(p, u, &working, &lambda_w));
        };

        // Dependence of row j on the working rows.
        let gj = p.g.row(j).transpose();
        if working.is_empty() {
            working.push(j);
            continue;
        }
        let k = working.len();
        let n = p.u_nom.len();
        let mut gw = DMatrix::zeros(k, n);
        for (i, &row) in working.iter().enumerate() {
            gw.row_mut(i).copy_from(&p.g.row(row));
        }
        let gram = &gw * gw.transpose();
        let r = gram
            .lu()
            .solve(&(&gw * &gj))
            .ok_or(QpError::IterationLimit)?;
        let residual = &gj - gw.transpose() * &r;
        let scale = gj.norm().max(1.0);
        if residual.norm() <= DEPENDENCE_TOL * scale {
            // Row j lies in the span of the working rows. If no working
            // row can be traded against it the rows contradict.
            let mut best: Option<(usize, f64)> = None;
            for (i, &ri) in r.iter().enumerate() {
                if ri > DEPENDENCE_TOL {
                    let ratio = lambda_w[i] / ri;
                    if best.map_or(true, |(_, b)| ratio < b) {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                None => return Err(QpError::Infeasible),
                Some((i, _)) => {
                    working.remove(i);
                    continue;
                }
            }
        }
        working.push(j);
    }
    Err(QpError::IterationLimit)
}

fn finish(p: &QpProblem, u: DVector<f64>, working: &[usize], lambda_w: &DVector<f64>) -> QpSolution {
    let m = p.g.nrows();
    let mut lambda = DVector::zeros(m);
    for (i, &row) in working.iter().enumerate() {
        lambda[row] = lambda_w[i].max(0.0);
    }
    let mut sol = QpSolution {
        u_star: u,
        lambda,
        active_set: working.to_vec(),
        kkt_residual: 0.0,
        slack: None,
    };
    sol.kkt_residual = verify_kkt(p, &sol).max();
    sol
}

/// Evaluate all four KKT residuals of a candidate solution.
pub fn verify_kkt(p: &QpProblem, s: &QpSolution) -> KktReport {
    let grad = (&s.u_star - &p.u_nom) + p.g.transpose() * &s.lambda;
    let stationarity = grad.amax();
    let mut primal = 0.0f64;
    let mut complementarity = 0.0f64;
    for row in 0..p.g.nrows() {
        let res = p.residual(&s.u_star, row);
        primal = primal.max(res);
        complementarity = complementarity.max((s.lambda[row] * res).abs());
    }
    let dual = s.lambda.iter().fold(0.0f64, |acc, &l| acc.max(-l));
    KktReport { stationarity, primal: primal.max(0.0), dual, complementarity }
}

/// Relax all rows with one shared slack s >= 0 at quadratic cost
/// `penalty * s^2`; the relaxed problem is always feasible. Internally
/// the slack is rescaled so the augmented problem keeps the identity
/// Hessian the active-set method expects.
pub fn solve_with_slack(p: &QpProblem, penalty: f64) -> QpSolution {
    assert!(penalty > 0.0, "penalty must be positive");
    let n = p.u_nom.len();
    let m = p.g.nrows();
    let scale = (2.0 * penalty).sqrt();

    let mut u_nom_aug = DVector::zeros(n + 1);
    u_nom_aug.rows_mut(0, n).copy_from(&p.u_nom);
    let mut g_aug = DMatrix::zeros(m + 1, n + 1);
    let mut h_aug = DVector::zeros(m + 1);
    for row in 0..m {
        g_aug.view_mut((row, 0), (1, n)).copy_from(&p.g.row(row));
        g_aug[(row, n)] = -1.0 / scale;
        h_aug[row] = p.h[row];
    }
    // s >= 0 in the rescaled coordinate.
    g_aug[(m, n)] = -1.0;
    h_aug[m] = 0.0;

    let aug = QpProblem { u_nom: u_nom_aug, g: g_aug, h: h_aug };
    let sol = solve(&aug).expect("slack-relaxed problem is always feasible");

    let u_star = sol.u_star.rows(0, n).into_owned();
    let slack = sol.u_star[n] / scale;
    let lambda = sol.lambda.rows(0, m).into_owned();
    let active_set: Vec<usize> = sol.active_set.iter().cloned().filter(|&r| r < m).collect();
    let kkt_residual = sol.kkt_residual;
    QpSolution { u_star, lambda, active_set, kkt_residual, slack: Some(slack) }
}

/// Closed form for a single active row g u <= h: the halfspace
/// projection u* = u_nom - g^T (g u_nom - h) / (g g^T) with multiplier
/// (g u_nom - h) / (g g^T).
pub fn single_constraint_closed_form(
    u_nom: &DVector<f64>,
    g: &RowDVector<f64>,
    h: f64,
) -> (DVector<f64>, f64) {
    let violation = g.dot(&u_nom.transpose()) - h;
    let gg = g.dot(g);
    if violation <= 0.0 || gg == 0.0 {
        return (u_nom.clone(), 0.0);
    }
    let lambda = violation / gg;
    (u_nom - g.transpose() * lambda, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn problem(u_nom: &[f64], g: &[&[f64]], h: &[f64]) -> QpProblem {
        let n = u_nom.len();
        let m = g.len();
        let mut gm = DMatrix::zeros(m, n);
        for (i, row) in g.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                gm[(i, j)] = v;
            }
        }
        QpProblem::new(
            DVector::from_row_slice(u_nom),
            gm,
            DVector::from_row_slice(h),
        )
        .unwrap()
    }

    #[test]
    fn feasible_nominal_passes_through() {
        let p = problem(&[0.3, -0.2], &[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]);
        let s = solve(&p).unwrap();
        assert_eq!(s.u_star, p.u_nom);
        assert_eq!(s.lambda, DVector::zeros(2));
        assert!(s.active_set.is_empty());
        assert_eq!(verify_kkt(&p, &s).max(), 0.0);
    }

    #[test]
    fn empty_constraints_bitwise_nominal() {
        let p = QpProblem::new(
            DVector::from_row_slice(&[0.123456789, -0.987654321]),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.u_star, p.u_nom);
    }

    #[test]
    fn halfspace_projection_scalar() {
        // 200 u <= 2 from u_nom = 0.05: u* = 0.01, lambda = 8/200^2.
        let p = problem(&[0.05], &[&[200.0]], &[2.0]);
        let s = solve(&p).unwrap();
        assert_abs_diff_eq!(s.u_star[0], 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(s.lambda[0], 2e-4, epsilon = 1e-15);
        assert_eq!(s.active_set, vec![0]);
    }

    #[test]
    fn corner_projection() {
        let p = problem(&[1.0, 1.0], &[&[1.0, 0.0], &[0.0, 1.0]], &[0.0, 0.0]);
        let s = solve(&p).unwrap();
        assert_abs_diff_eq!(s.u_star[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.u_star[1], 0.0, epsilon = 1e-12);
        assert_eq!(s.active_set.len(), 2);
    }

    #[test]
    fn matches_single_constraint_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut hits = 0;
        while hits < 100 {
            let n = rng.random_range(1..=3usize);
            let u_nom = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let g_row = RowDVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0f64));
            if g_row.norm() < 0.1 {
                continue;
            }
            let h = rng.random_range(-1.0..1.0);
            let mut gm = DMatrix::zeros(1, n);
            gm.row_mut(0).copy_from(&g_row);
            let p = QpProblem::new(u_nom.clone(), gm, DVector::from_row_slice(&[h])).unwrap();
            let s = solve(&p).unwrap();
            let (u_cf, l_cf) = single_constraint_closed_form(&u_nom, &g_row, h);
            assert!((s.u_star - &u_cf).amax() <= 1e-10);
            assert!((s.lambda[0] - l_cf).abs() <= 1e-10);
            hits += 1;
        }
    }

    #[test]
    fn infeasible_rows_detected() {
        // u <= -1 and u >= 1 cannot both hold.
        let p = problem(&[0.0], &[&[1.0], &[-1.0]], &[-1.0, -1.0]);
        assert_eq!(solve(&p).unwrap_err(), QpError::Infeasible);
    }

    #[test]
    fn parallel_rows_keep_tightest() {
        let p = problem(&[2.0], &[&[1.0], &[1.0]], &[1.0, 0.5]);
        let s = solve(&p).unwrap();
        assert_abs_diff_eq!(s.u_star[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn kkt_detects_perturbation() {
        let p = problem(&[0.05], &[&[200.0]], &[2.0]);
        let mut s = solve(&p).unwrap();
        assert!(verify_kkt(&p, &s).max() <= 1e-12);
        s.u_star[0] += 1e-3;
        assert!(verify_kkt(&p, &s).stationarity > 1e-4);
    }

    #[test]
    fn slack_unused_on_feasible_problem() {
        let p = problem(&[0.05], &[&[200.0]], &[2.0]);
        let hard = solve(&p).unwrap();
        let soft = solve_with_slack(&p, 1e6);
        assert!((hard.u_star[0] - soft.u_star[0]).abs() <= 1e-8);
        assert!(soft.slack.unwrap().abs() <= 1e-8);
    }

    #[test]
    fn slack_resolves_contradiction() {
        let p = problem(&[0.0], &[&[1.0], &[-1.0]], &[-1.0, -1.0]);
        let s = solve_with_slack(&p, 1e6);
        // Symmetric contradiction: u stays near zero, slack near one.
        assert!(s.u_star[0].abs() < 1e-3);
        assert_abs_diff_eq!(s.slack.unwrap(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn slack_shrinks_with_penalty() {
        // Asymmetric contradiction: u <= -1, u >= 0.5.
        let p = problem(&[0.0], &[&[1.0], &[-1.0]], &[-1.0, -0.5]);
        let mut prev = f64::INFINITY;
        for penalty in [0.05, 0.1, 1000.0] {
            let s = solve_with_slack(&p, penalty);
            let slack = s.slack.unwrap();
            assert!(slack < prev, "slack {slack} did not shrink (prev {prev})");
            prev = slack;
        }
        // The limit point trades u to the least-infeasibility point.
        let s = solve_with_slack(&p, 1e9);
        assert_abs_diff_eq!(s.u_star[0], -0.25, epsilon = 1e-4);
        assert_abs_diff_eq!(s.slack.unwrap(), 0.75, epsilon = 1e-4);
    }

    #[test]
    fn projection_property_random_instances() {
        // u* is closer to u_nom than any sampled feasible point.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.random_range(1..=3usize);
            let m = rng.random_range(1..=3usize);
            let witness = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let g = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            let h = &g * &witness + DVector::from_fn(m, |_, _| rng.random_range(0.3..1.0));
            let u_nom = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let p = QpProblem::new(u_nom.clone(), g.clone(), h.clone()).unwrap();
            let s = solve(&p).unwrap();
            assert!(verify_kkt(&p, &s).max() <= 1e-8, "kkt {:?}", verify_kkt(&p, &s));
            let d_star = (&s.u_star - &u_nom).norm();
            for _ in 0..100 {
                // Sample feasible points by shrinking random points toward the witness.
                let mut candidate = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
                let mut t = 1.0;
                while (&g * &candidate - &h).amax() > 0.0 && t > 1e-6 {
                    t *= 0.5;
                    candidate = &witness + (&candidate - &witness) * t;
                }
                if (&g * &candidate - &h).amax() <= 0.0 {
                    assert!(d_star <= (&candidate - &u_nom).norm() + 1e-9);
                }
            }
        }
    }
}
