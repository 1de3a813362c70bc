//! Small dense linear programs with free variables.
//!
//! `solve_lp` maximises `cᵀz` subject to `Az ≤ b` with `z` unrestricted in
//! sign. It runs a two-phase revised simplex (Bland's rule) on the dual
//! `min bᵀy, Aᵀy = c, y ≥ 0`, whose basis has only `p + 1` rows. The primal
//! optimum is read off the simplex multipliers; when the dual is infeasible
//! the phase-one multipliers are a Farkas ray `d` with `Ad ≤ 0` and `cᵀd > 0`.
//!
//! `envelope_at_zero` is the one-covariate special case solved directly as
//! a lower convex hull.

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Absolute feasibility / optimality tolerance.
pub const LP_TOL: f64 = 1e-9;

const RC_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-11;

/// maximise `objective · z` subject to `constraints z ≤ rhs`, `z` free.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    n_vars: usize,
    matrix: Vec<f64>,
    rhs: Vec<f64>,
    objective: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            n_vars: objective.len(),
            matrix: Vec::new(),
            rhs: Vec::new(),
            objective,
        }
    }

    pub fn with_capacity(objective: Vec<f64>, rows: usize) -> Self {
        let n = objective.len();
        Self {
            n_vars: n,
            matrix: Vec::with_capacity(rows * n),
            rhs: Vec::with_capacity(rows),
            objective,
        }
    }

    /// Build from a row-major `m × n` matrix.
    pub fn from_parts(matrix: Vec<f64>, rhs: Vec<f64>, objective: Vec<f64>) -> Result<Self> {
        let n = objective.len();
        if n == 0 || matrix.len() != rhs.len() * n {
            return Err(invalid("constraint matrix shape does not match rhs/objective"));
        }
        Ok(Self {
            n_vars: n,
            matrix,
            rhs,
            objective,
        })
    }

    /// Append `row · z ≤ rhs`.
    pub fn push(&mut self, row: &[f64], rhs: f64) {
        assert_eq!(row.len(), self.n_vars, "constraint width");
        self.matrix.extend_from_slice(row);
        self.rhs.push(rhs);
    }

    pub fn num_vars(&self) -> usize {
        self.n_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n_vars..(i + 1) * self.n_vars]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    /// Largest constraint violation `max_i (a_iᵀz − b_i)`, or −∞ when m = 0.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        (0..self.num_constraints())
            .map(|i| dot(self.row(i), z) - self.rhs[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub point: Vec<f64>,
    pub value: f64,
    /// Constraints in the optimal basis (tight at `point`).
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    /// `ray` satisfies `A ray ≤ 0` and `c · ray > 0`, scaled to unit max-norm.
    Unbounded { ray: Vec<f64> },
    Infeasible,
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpOutcome::Optimal(_))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    let n = lp.n_vars;
    let m = lp.num_constraints();
    if n == 0 {
        return Err(invalid("linear program needs at least one variable"));
    }
    let finite = lp.matrix.iter().chain(&lp.rhs).chain(&lp.objective).all(|v| v.is_finite());
    if !finite {
        return Err(invalid("linear program has non-finite coefficients"));
    }
    if m == 0 {
        if lp.objective.iter().all(|&c| c == 0.0) {
            return Ok(LpOutcome::Optimal(LpSolution {
                point: vec![0.0; n],
                value: 0.0,
                active: Vec::new(),
            }));
        }
        return Ok(LpOutcome::Unbounded {
            ray: normalise(lp.objective.clone()),
        });
    }

    let cap = 50 * (m + n - 1);
    let mut budget = Budget { used: 0, cap };

    // Dual: columns are the rows of A.
    let dual = StandardForm {
        rows: n,
        cols: m,
        colmat: &lp.matrix,
        rhs: &lp.objective,
        cost: &lp.rhs,
    };
    match dual.solve(&mut budget)? {
        StdOutcome::Optimal { basis, duals } => {
            let point = duals;
            let value = dot(&lp.objective, &point);
            let mut active: Vec<usize> = basis.into_iter().filter(|&j| j < m).collect();
            active.sort_unstable();
            Ok(LpOutcome::Optimal(LpSolution {
                point,
                value,
                active,
            }))
        }
        StdOutcome::Unbounded => Ok(LpOutcome::Infeasible),
        StdOutcome::Infeasible { farkas } => {
            if primal_feasible(lp, &mut budget)? {
                Ok(LpOutcome::Unbounded {
                    ray: normalise(farkas),
                })
            } else {
                Ok(LpOutcome::Infeasible)
            }
        }
    }
}

fn normalise(mut v: Vec<f64>) -> Vec<f64> {
    let s = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

/// Az ≤ b is infeasible iff some y ≥ 0, Σy = 1 has Aᵀy = 0 and bᵀy < 0.
fn primal_feasible(lp: &LinearProgram, budget: &mut Budget) -> Result<bool> {
    let n = lp.n_vars;
    let m = lp.num_constraints();
    let mut colmat = Vec::with_capacity(m * (n + 1));
    for i in 0..m {
        colmat.extend_from_slice(lp.row(i));
        colmat.push(1.0);
    }
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = 1.0;
    let aux = StandardForm {
        rows: n + 1,
        cols: m,
        colmat: &colmat,
        rhs: &rhs,
        cost: &lp.rhs,
    };
    match aux.solve(budget)? {
        StdOutcome::Infeasible { .. } => Ok(true),
        StdOutcome::Optimal { basis, .. } => {
            // recover the objective value from the basic solution
            let value = aux.basic_value(&basis)?;
            Ok(value >= -LP_TOL)
        }
        StdOutcome::Unbounded => Ok(false),
    }
}

struct Budget {
    used: usize,
    cap: usize,
}

impl Budget {
    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.cap {
            Err(Error::NumericalFailure { cap: self.cap })
        } else {
            Ok(())
        }
    }
}

/// min costᵀy subject to M y = rhs, y ≥ 0, with column j of M stored
/// contiguously at `colmat[j*rows..(j+1)*rows]`.
struct StandardForm<'a> {
    rows: usize,
    cols: usize,
    colmat: &'a [f64],
    rhs: &'a [f64],
    cost: &'a [f64],
}

enum StdOutcome {
    Optimal { basis: Vec<usize>, duals: Vec<f64> },
    Infeasible { farkas: Vec<f64> },
    Unbounded,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Tableau<'a> {
    form: &'a StandardForm<'a>,
    sign: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    x_b: Vec<f64>,
}

impl<'a> Tableau<'a> {
    fn column(&self, j: usize, out: &mut [f64]) {
        let k = self.form.rows;
        if j < self.form.cols {
            let col = &self.form.colmat[j * k..(j + 1) * k];
            for r in 0..k {
                out[r] = self.sign[r] * col[r];
            }
        } else {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[j - self.form.cols] = 1.0;
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let k = self.form.rows;
        let mut bmat = vec![0.0; k * k];
        let mut col = vec![0.0; k];
        for (i, &j) in self.basis.iter().enumerate() {
            self.column(j, &mut col);
            for r in 0..k {
                bmat[r * k + i] = col[r];
            }
        }
        self.binv = linalg::invert(&bmat, k, 1e-13).ok_or(Error::NumericalFailure { cap: 0 })?;
        for i in 0..k {
            let v: f64 = (0..k).map(|r| self.binv[i * k + r] * self.rhs[r]).sum();
            self.x_b[i] = if v < 0.0 && v > -LP_TOL { 0.0 } else { v };
        }
        Ok(())
    }

    fn duals(&self, costs: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let k = self.form.rows;
        let mut pi = vec![0.0; k];
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = costs(j);
            if cb != 0.0 {
                for r in 0..k {
                    pi[r] += cb * self.binv[i * k + r];
                }
            }
        }
        pi
    }

    fn run(
        &mut self,
        costs: &dyn Fn(usize) -> f64,
        can_enter: &dyn Fn(usize) -> bool,
        budget: &mut Budget,
    ) -> Result<PhaseEnd> {
        let k = self.form.rows;
        let total = self.form.cols + k;
        let mut col = vec![0.0; k];
        let mut dir = vec![0.0; k];
        loop {
            let pi = self.duals(costs);
            let mut entering = None;
            for j in 0..total {
                if !can_enter(j) || self.basis.contains(&j) {
                    continue;
                }
                self.column(j, &mut col);
                let rc = costs(j) - dot(&pi, &col);
                if rc < -RC_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(q) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            self.column(q, &mut col);
            for i in 0..k {
                dir[i] = (0..k).map(|r| self.binv[i * k + r] * col[r]).sum();
            }
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..k {
                if dir[i] <= PIVOT_TOL {
                    continue;
                }
                let theta = self.x_b[i] / dir[i];
                leave = match leave {
                    None => Some((i, theta)),
                    Some((li, lt)) => {
                        if theta < lt - 1e-12 {
                            Some((i, theta))
                        } else if theta <= lt + 1e-12 && self.basis[i] < self.basis[li] {
                            Some((i, lt.min(theta)))
                        } else {
                            Some((li, lt))
                        }
                    }
                };
            }
            let Some((row, _)) = leave else {
                return Ok(PhaseEnd::Unbounded);
            };
            budget.tick()?;
            self.basis[row] = q;
            self.refactor()?;
        }
    }
}

impl<'a> StandardForm<'a> {
    fn basic_value(&self, basis: &[usize]) -> Result<f64> {
        let mut t = self.tableau();
        t.basis = basis.to_vec();
        t.refactor()?;
        Ok(basis
            .iter()
            .zip(&t.x_b)
            .map(|(&j, &x)| if j < self.cols { self.cost[j] * x } else { 0.0 })
            .sum())
    }

    fn tableau(&self) -> Tableau<'_> {
        let k = self.rows;
        let sign: Vec<f64> = self.rhs.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let rhs: Vec<f64> = self.rhs.iter().map(|v| v.abs()).collect();
        Tableau {
            form: self,
            sign,
            rhs,
            basis: (0..k).map(|r| self.cols + r).collect(),
            binv: vec![0.0; k * k],
            x_b: vec![0.0; k],
        }
    }

    fn solve(&self, budget: &mut Budget) -> Result<StdOutcome> {
        let k = self.rows;
        let m = self.cols;
        let mut t = self.tableau();
        t.refactor()?;

        // phase one: minimise the artificial sum
        let phase1 = |j: usize| if j >= m { 1.0 } else { 0.0 };
        t.run(&phase1, &|_| true, budget)?;
        let infeas: f64 = t
            .basis
            .iter()
            .zip(&t.x_b)
            .filter(|(&j, _)| j >= m)
            .map(|(_, &x)| x)
            .sum();
        let scale = t.rhs.iter().fold(1.0_f64, |a, v| a.max(*v));
        if infeas > LP_TOL * scale {
            let pi = t.duals(&phase1);
            let farkas = pi.iter().zip(&t.sign).map(|(p, s)| p * s).collect();
            return Ok(StdOutcome::Infeasible { farkas });
        }

        // pivot zero-level artificials out where a structural column allows
        let mut col = vec![0.0; k];
        for i in 0..k {
            if t.basis[i] < m {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..m {
                if t.basis.contains(&j) {
                    continue;
                }
                t.column(j, &mut col);
                let e: f64 = (0..k).map(|r| t.binv[i * k + r] * col[r]).sum();
                if e.abs() > 1e-9 && best.is_none_or(|(_, b)| e.abs() > b) {
                    best = Some((j, e.abs()));
                }
            }
            if let Some((j, _)) = best {
                t.basis[i] = j;
                t.refactor()?;
            }
        }

        let phase2 = |j: usize| if j < m { self.cost[j] } else { 0.0 };
        match t.run(&phase2, &|j| j < m, budget)? {
            PhaseEnd::Unbounded => Ok(StdOutcome::Unbounded),
            PhaseEnd::Optimal => {
                let pi = t.duals(&phase2);
                let duals = pi.iter().zip(&t.sign).map(|(p, s)| p * s).collect();
                Ok(StdOutcome::Optimal {
                    basis: t.basis.clone(),
                    duals,
                })
            }
        }
    }
}

/// Solution of `maximise α subject to α + β vᵢ ≤ yᵢ` for scalar `vᵢ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeFit {
    pub value: f64,
    pub slope: f64,
    /// Positions (into the input slices) of the supporting points; equal
    /// when a single point at v = 0 supports the optimum.
    pub support: [usize; 2],
}

/// Lower convex hull of the points `(vᵢ, yᵢ)` evaluated at v = 0.
///
/// `v` must be sorted ascending. Returns `None` when no point lies on one
/// side of zero, in which case the program is unbounded.
pub fn envelope_at_zero(v: &[f64], y: &[f64], hull: &mut Vec<usize>) -> Option<EnvelopeFit> {
    debug_assert_eq!(v.len(), y.len());
    let m = v.len();
    if m == 0 || v[0] > 0.0 || v[m - 1] < 0.0 {
        return None;
    }
    hull.clear();
    for i in 0..m {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (v[b] - v[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (v[i] - v[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }

    let mut at_zero: Option<usize> = None;
    for (pos, &i) in hull.iter().enumerate() {
        if v[i] == 0.0 && at_zero.is_none_or(|z| y[i] < y[hull[z]]) {
            at_zero = Some(pos);
        }
    }
    if let Some(pos) = at_zero {
        let i = hull[pos];
        let slope_to = |j: usize| (y[j] - y[i]) / (v[j] - v[i]);
        let slope = if pos + 1 < hull.len() && v[hull[pos + 1]] > 0.0 {
            slope_to(hull[pos + 1])
        } else if pos > 0 && v[hull[pos - 1]] < 0.0 {
            slope_to(hull[pos - 1])
        } else {
            0.0
        };
        return Some(EnvelopeFit {
            value: y[i],
            slope,
            support: [i, i],
        });
    }
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        if v[a] < 0.0 && v[b] > 0.0 {
            let slope = (y[b] - y[a]) / (v[b] - v[a]);
            return Some(EnvelopeFit {
                value: y[a] - slope * v[a],
                slope,
                support: [a, b],
            });
        }
    }
    None
}
