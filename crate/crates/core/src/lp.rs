//! Dense two-phase tableau simplex for small linear programs.
//!
//! Solves `min c·x  s.t.  rows (≤, ≥, =),  x ≥ 0`. Rows whose slack or a
//! singleton structural column can start in the basis need no artificial
//! variable, so well-posed problems with an obvious feasible point skip
//! phase one entirely.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("objective is unbounded below")]
    Unbounded,
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("row has {got} coefficients, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;
/// Degenerate pivots in a row before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Result<(), LpError> {
        if coeffs.len() != self.num_vars() {
            return Err(LpError::Dimension {
                expected: self.num_vars(),
                got: coeffs.len(),
            });
        }
        self.rows.push(Row { coeffs, relation, rhs });
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    m: usize,
    /// Columns excluding the right-hand side.
    cols: usize,
    /// Row-major `m × (cols + 1)`; last entry of each row is the rhs.
    data: Vec<f64>,
    basis: Vec<usize>,
    n_struct: usize,
    /// First artificial column; columns from here on never re-enter in phase two.
    first_artificial: usize,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.rows.len();

        // Normalize to non-negative rhs.
        let rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .rows
            .iter()
            .map(|r| {
                if r.rhs < 0.0 {
                    let rel = match r.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (r.coeffs.iter().map(|c| -c).collect(), rel, -r.rhs)
                } else {
                    (r.coeffs.clone(), r.relation, r.rhs)
                }
            })
            .collect();

        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();

        // Structural columns with a single positive entry can seed the basis.
        let mut singleton_row = vec![None; n];
        for j in 0..n {
            let mut nz = rows.iter().enumerate().filter(|(_, r)| r.0[j] != 0.0);
            if let (Some((i, r)), None) = (nz.next(), nz.next()) {
                if r.0[j] > 0.0 {
                    singleton_row[j] = Some(i);
                }
            }
        }

        let mut basis = vec![usize::MAX; m];
        let mut slack_col = vec![None; m];
        let mut next = n;
        for (i, r) in rows.iter().enumerate() {
            if r.1 != Relation::Eq {
                slack_col[i] = Some(next);
                if r.1 == Relation::Le {
                    basis[i] = next;
                }
                next += 1;
            }
        }
        for (j, row) in singleton_row.iter().enumerate() {
            if let Some(i) = *row {
                if basis[i] == usize::MAX {
                    basis[i] = j;
                }
            }
        }
        let first_artificial = n + n_slack;
        let n_art = basis.iter().filter(|&&b| b == usize::MAX).count();
        let cols = first_artificial + n_art;
        let width = cols + 1;
        let mut data = vec![0.0; m * width];
        let mut art = first_artificial;
        for (i, r) in rows.iter().enumerate() {
            let row = &mut data[i * width..(i + 1) * width];
            row[..n].copy_from_slice(&r.0);
            if let Some(s) = slack_col[i] {
                row[s] = if r.1 == Relation::Le { 1.0 } else { -1.0 };
            }
            row[cols] = r.2;
            if basis[i] == usize::MAX {
                row[art] = 1.0;
                basis[i] = art;
                art += 1;
            } else if basis[i] < n {
                let scale = row[basis[i]];
                row.iter_mut().for_each(|v| *v /= scale);
            }
        }

        Self {
            m,
            cols,
            data,
            basis,
            n_struct: n,
            first_artificial,
            pivots: 0,
        }
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    /// Reduced costs `c_j - c_B B^-1 A_j` and the objective value for a cost vector.
    fn price(&self, cost: &[f64]) -> (Vec<f64>, f64) {
        let w = self.width();
        let mut reduced = cost.to_vec();
        reduced.push(0.0);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                let row = &self.data[i * w..(i + 1) * w];
                reduced.iter_mut().zip(row).for_each(|(r, a)| *r -= cb * a);
            }
        }
        let obj = -reduced[self.cols];
        reduced.truncate(self.cols);
        (reduced, obj)
    }

    fn pivot(&mut self, r: usize, c: usize, reduced: &mut [f64]) {
        let w = self.width();
        let p = self.at(r, c);
        {
            let row = &mut self.data[r * w..(r + 1) * w];
            row.iter_mut().for_each(|v| *v /= p);
            row[c] = 1.0;
        }
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                row.iter_mut().zip(prow.iter()).for_each(|(v, pv)| *v -= f * pv);
                row[c] = 0.0;
            }
        }
        let f = reduced[c];
        if f != 0.0 {
            reduced.iter_mut().zip(prow.iter()).for_each(|(v, pv)| *v -= f * pv);
            reduced[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Primal simplex over columns `< col_limit`.
    fn optimize(&mut self, reduced: &mut [f64], col_limit: usize) -> Result<(), LpError> {
        let max_pivots = 50 * (self.m + self.cols) + 1000;
        let mut degenerate_run = 0usize;
        loop {
            let bland = degenerate_run >= DEGENERATE_LIMIT;
            let entering = if bland {
                (0..col_limit).find(|&j| reduced[j] < -COST_TOL)
            } else {
                (0..col_limit)
                    .filter(|&j| reduced[j] < -COST_TOL)
                    .min_by(|&a, &b| reduced[a].total_cmp(&reduced[b]))
            };
            let Some(c) = entering else {
                return Ok(());
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(LpError::Unbounded);
            };
            degenerate_run = if ratio <= 1e-12 { degenerate_run + 1 } else { 0 };
            self.pivot(r, c, reduced);
            if self.pivots > max_pivots {
                return Err(LpError::IterationLimit(max_pivots));
            }
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        if self.cols > self.first_artificial {
            let mut cost = vec![0.0; self.cols];
            cost[self.first_artificial..].iter_mut().for_each(|c| *c = 1.0);
            let (mut reduced, _) = self.price(&cost);
            self.optimize(&mut reduced, self.cols)?;
            let infeasibility: f64 = self
                .basis
                .iter()
                .enumerate()
                .filter(|(_, &b)| b >= self.first_artificial)
                .map(|(i, _)| self.rhs(i))
                .sum();
            if infeasibility > FEAS_TOL * (1.0 + self.m as f64) {
                return Err(LpError::Infeasible);
            }
            // Drive zero-level artificials out where a real column can replace them.
            for i in 0..self.m {
                if self.basis[i] >= self.first_artificial {
                    if let Some(c) = (0..self.first_artificial).find(|&j| self.at(i, j).abs() > PIVOT_TOL) {
                        let mut dummy = vec![0.0; self.cols + 1];
                        self.pivot(i, c, &mut dummy);
                    }
                }
            }
        }

        let mut cost = vec![0.0; self.cols];
        cost[..self.n_struct].copy_from_slice(&lp.objective);
        let (mut reduced, _) = self.price(&cost);
        self.optimize(&mut reduced, self.first_artificial)?;

        let mut x = vec![0.0; self.n_struct];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                x[b] = self.rhs(i).max(0.0);
            }
        }
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            objective,
            pivots: self.pivots,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.add_row(vec![1.0, 0.0], Relation::Le, 4.0).unwrap();
        lp.add_row(vec![0.0, 2.0], Relation::Le, 12.0).unwrap();
        lp.add_row(vec![3.0, 2.0], Relation::Le, 18.0).unwrap();
        let s = lp.solve().unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        assert!((s.objective + 36.0).abs() < 1e-9);
    }

    #[test]
    fn needs_phase_one() {
        // min x + y, x + y ≥ 2, x - y = 0 → (1, 1)
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 1.0], Relation::Ge, 2.0).unwrap();
        lp.add_row(vec![1.0, -1.0], Relation::Eq, 0.0).unwrap();
        let s = lp.solve().unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-9 && (s.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_row(vec![1.0], Relation::Le, 1.0).unwrap();
        lp.add_row(vec![1.0], Relation::Ge, 2.0).unwrap();
        assert_eq!(lp.solve(), Err(LpError::Infeasible));

        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_row(vec![1.0, -1.0], Relation::Le, 1.0).unwrap();
        assert_eq!(lp.solve(), Err(LpError::Unbounded));

        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        assert!(matches!(lp.add_row(vec![1.0], Relation::Le, 1.0), Err(LpError::Dimension { .. })));
    }

    #[test]
    fn negative_rhs_with_singleton_slack_variable() {
        // min 10 u + s, u + s ≥ 0.5, u ≤ 1 : s absorbs the deficit more cheaply.
        let mut lp = LinearProgram::new(vec![10.0, 1.0]);
        lp.add_row(vec![1.0, 1.0], Relation::Ge, 0.5).unwrap();
        lp.add_row(vec![1.0, 0.0], Relation::Le, 1.0).unwrap();
        let s = lp.solve().unwrap();
        assert!((s.objective - 0.5).abs() < 1e-12);
        assert_eq!(s.x[0], 0.0);
    }

    /// Brute force: enumerate every basis of the inequality form and keep the best feasible vertex.
    fn brute_force(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
        let n = c.len();
        // Constraints: a x ≤ b and -x ≤ 0. A vertex is fixed by n active constraints.
        let mut all: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().cloned()).collect();
        for j in 0..n {
            let mut row = vec![0.0; n];
            row[j] = -1.0;
            all.push((row, 0.0));
        }
        let mut best = f64::INFINITY;
        let k = all.len();
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            // Solve the n×n system by Gaussian elimination.
            let mut mat: Vec<Vec<f64>> = idx.iter().map(|&i| {
                let mut r = all[i].0.clone();
                r.push(all[i].1);
                r
            }).collect();
            let mut ok = true;
            for col in 0..n {
                let piv = (col..n).max_by(|&p, &q| mat[p][col].abs().total_cmp(&mat[q][col].abs())).unwrap();
                if mat[piv][col].abs() < 1e-10 {
                    ok = false;
                    break;
                }
                mat.swap(col, piv);
                for r in 0..n {
                    if r != col {
                        let f = mat[r][col] / mat[col][col];
                        for cc in col..=n {
                            mat[r][cc] -= f * mat[col][cc];
                        }
                    }
                }
            }
            if ok {
                let x: Vec<f64> = (0..n).map(|i| mat[i][n] / mat[i][i]).collect();
                let feasible = all.iter().all(|(row, rhs)| row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-9);
                if feasible {
                    best = best.min(c.iter().zip(&x).map(|(p, q)| p * q).sum());
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < k - n + i {
                    idx[i] += 1;
                    for j in i + 1..n {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn matches_vertex_enumeration_on_random_bounded_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let n = rng.random_range(2..5);
            let m = rng.random_range(1..5);
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..2.0)).collect()).collect();
            let mut b: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..3.0)).collect();
            // Box keeps everything bounded.
            for j in 0..n {
                let mut row = vec![0.0; n];
                row[j] = 1.0;
                a.push(row);
                b.push(5.0);
            }
            let mut lp = LinearProgram::new(c.clone());
            for (row, rhs) in a.iter().zip(&b) {
                lp.add_row(row.clone(), Relation::Le, *rhs).unwrap();
            }
            let oracle = brute_force(&c, &a, &b);
            match lp.solve() {
                Ok(s) => {
                    assert!((s.objective - oracle).abs() < 1e-7, "{} vs {oracle}", s.objective);
                    for (row, rhs) in a.iter().zip(&b) {
                        let lhs: f64 = row.iter().zip(&s.x).map(|(p, q)| p * q).sum();
                        assert!(lhs <= rhs + 1e-7);
                    }
                }
                Err(LpError::Infeasible) => assert!(oracle.is_infinite()),
                Err(e) => panic!("{e}"),
            }
        }
    }
}
