//! Dense two-phase primal simplex for desk-scale models.
//!
//! The model is brought to standard form (`A y = b`, `y >= 0`, `b >= 0`) by
//! shifting, mirroring or splitting variables and adding slacks. Phase 1
//! minimises the sum of artificials; phase 2 the original objective.
//! Pricing is Dantzig's rule, falling back to Bland's rule while the method
//! stalls on degenerate pivots so that it cannot cycle.

use std::time::Instant;

use thiserror::Error;

use super::model::{LpModel, Sense, Solution, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_rows: usize,
    /// Feasibility and optimality tolerance.
    pub tolerance: f64,
    /// Smallest admissible pivot magnitude.
    pub pivot_tolerance: f64,
    pub max_iterations: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_switch: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_rows: 5000,
            tolerance: 1e-9,
            pivot_tolerance: 1e-11,
            max_iterations: 500_000,
            degenerate_switch: 25,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimplexError {
    #[error("model has {rows} rows, over the reference solver cap of {cap}")]
    SizeLimit { rows: usize, cap: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// How an original variable is expressed through standard-form columns.
#[derive(Debug, Clone, Copy)]
enum ColumnMap {
    Fixed(f64),
    /// x = lower + y
    Shifted {
        col: usize,
        lower: f64,
    },
    /// x = upper - y
    Mirrored {
        col: usize,
        upper: f64,
    },
    /// x = y+ - y-
    Split {
        pos: usize,
        neg: usize,
    },
}

struct StandardForm {
    map: Vec<ColumnMap>,
    /// Dense rows of `A` (structural + slack columns), rhs made non-negative.
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    /// Slack column usable as initial basic variable, per row.
    unit_slack: Vec<Option<usize>>,
    num_cols: usize,
}

impl StandardForm {
    fn build(model: &LpModel) -> StandardForm {
        let mut map = Vec::with_capacity(model.num_vars());
        let mut cost = Vec::new();
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for v in model.variables() {
            let (lo, up) = (v.lower, v.upper);
            let entry = if lo == up {
                ColumnMap::Fixed(lo)
            } else if lo.is_finite() {
                cost.push(v.obj);
                let col = cost.len() - 1;
                if up.is_finite() {
                    bound_rows.push((col, up - lo));
                }
                ColumnMap::Shifted { col, lower: lo }
            } else if up.is_finite() {
                cost.push(-v.obj);
                ColumnMap::Mirrored {
                    col: cost.len() - 1,
                    upper: up,
                }
            } else {
                cost.push(v.obj);
                cost.push(-v.obj);
                ColumnMap::Split {
                    pos: cost.len() - 2,
                    neg: cost.len() - 1,
                }
            };
            map.push(entry);
        }
        let structural = cost.len();

        // (coefficients over structural columns, sense, rhs)
        let mut raw: Vec<(Vec<(usize, f64)>, Sense, f64)> = Vec::new();
        for row in model.rows() {
            let mut rhs = row.rhs;
            let mut coeffs = Vec::with_capacity(row.coeffs.len());
            for &(v, a) in &row.coeffs {
                match map[v.0] {
                    ColumnMap::Fixed(x) => rhs -= a * x,
                    ColumnMap::Shifted { col, lower } => {
                        rhs -= a * lower;
                        coeffs.push((col, a));
                    }
                    ColumnMap::Mirrored { col, upper } => {
                        rhs -= a * upper;
                        coeffs.push((col, -a));
                    }
                    ColumnMap::Split { pos, neg } => {
                        coeffs.push((pos, a));
                        coeffs.push((neg, -a));
                    }
                }
            }
            raw.push((coeffs, row.sense, rhs));
        }
        for (col, width) in bound_rows {
            raw.push((vec![(col, 1.0)], Sense::Le, width));
        }

        let slacks = raw.iter().filter(|r| r.1 != Sense::Eq).count();
        let num_cols = structural + slacks;
        cost.resize(num_cols, 0.0);
        let mut rows = Vec::with_capacity(raw.len());
        let mut rhs = Vec::with_capacity(raw.len());
        let mut unit_slack = Vec::with_capacity(raw.len());
        let mut next_slack = structural;
        for (coeffs, sense, b) in raw {
            let mut dense = vec![0.0; num_cols];
            for (c, a) in coeffs {
                dense[c] += a;
            }
            let slack = match sense {
                Sense::Le => Some((next_slack, 1.0)),
                Sense::Ge => Some((next_slack, -1.0)),
                Sense::Eq => None,
            };
            if let Some((c, s)) = slack {
                dense[c] = s;
                next_slack += 1;
            }
            let flip = b < 0.0;
            if flip {
                dense.iter_mut().for_each(|a| *a = -*a);
            }
            let unit = slack.and_then(|(c, _)| (dense[c] == 1.0).then_some(c));
            rows.push(dense);
            rhs.push(if flip { -b } else { b });
            unit_slack.push(unit);
        }
        StandardForm {
            map,
            rows,
            rhs,
            cost,
            unit_slack,
            num_cols,
        }
    }

    fn recover(&self, y: &[f64]) -> Vec<f64> {
        self.map
            .iter()
            .map(|m| match *m {
                ColumnMap::Fixed(x) => x,
                ColumnMap::Shifted { col, lower } => lower + y[col],
                ColumnMap::Mirrored { col, upper } => upper - y[col],
                ColumnMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }
}

struct Tableau {
    width: usize,
    /// m rows of `width + 1` entries; the last entry is the rhs.
    data: Vec<f64>,
    /// Reduced costs, last entry holds the current objective value.
    reduced: Vec<f64>,
    basis: Vec<usize>,
    /// Columns that may enter the basis.
    enterable: Vec<bool>,
    rows: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.width + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * (self.width + 1) + self.width]
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.reduced = cost.to_vec();
        self.reduced.push(0.0);
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let s = self.width + 1;
                let row = &self.data[i * s..(i + 1) * s];
                for (r, a) in self.reduced.iter_mut().zip(row) {
                    *r -= cb * a;
                }
            }
        }
        // reduced[last] = -c_B·b; keep it as +objective.
        let last = self.width;
        self.reduced[last] = -self.reduced[last];
    }

    fn objective(&self) -> f64 {
        self.reduced[self.width]
    }

    fn pivot(&mut self, r: usize, k: usize) {
        let s = self.width + 1;
        let p = self.data[r * s + k];
        let inv = 1.0 / p;
        for v in &mut self.data[r * s..(r + 1) * s] {
            *v *= inv;
        }
        self.data[r * s + k] = 1.0;
        let nz: Vec<usize> = (0..s).filter(|&j| self.data[r * s + j] != 0.0).collect();
        let pivot_row: Vec<f64> = nz.iter().map(|&j| self.data[r * s + j]).collect();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.data[i * s + k];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[i * s..(i + 1) * s];
            for (&j, &a) in nz.iter().zip(&pivot_row) {
                let v = row[j] - f * a;
                row[j] = if v.abs() < 1e-14 { 0.0 } else { v };
            }
            row[k] = 0.0;
            if row[self.width] < 0.0 && row[self.width] > -1e-11 {
                row[self.width] = 0.0;
            }
        }
        let f = self.reduced[k];
        if f != 0.0 {
            for (&j, &a) in nz.iter().zip(&pivot_row) {
                // objective slot is stored with the opposite sign convention
                if j == self.width {
                    self.reduced[j] += f * a;
                } else {
                    self.reduced[j] -= f * a;
                }
            }
            self.reduced[k] = 0.0;
        }
        self.basis[r] = k;
    }

    fn run(
        &mut self,
        opts: &SimplexOptions,
        opt_tol: f64,
        iterations: &mut usize,
    ) -> Result<PhaseEnd, SimplexError> {
        let mut degenerate_run = 0usize;
        loop {
            if *iterations >= opts.max_iterations {
                return Ok(PhaseEnd::IterationLimit);
            }
            let bland = degenerate_run >= opts.degenerate_switch;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.width {
                let d = self.reduced[j];
                if !self.enterable[j] || d >= -opt_tol {
                    continue;
                }
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d < best) {
                    entering = Some((j, d));
                }
            }
            let Some((k, _)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            let mut leaving: Option<(usize, f64, f64)> = None; // (row, ratio, pivot)
            for i in 0..self.rows {
                let a = self.at(i, k);
                if a <= opts.tolerance {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leaving = match leaving {
                    None => Some((i, ratio, a)),
                    Some((bi, br, ba)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        let better = if tie {
                            if bland {
                                self.basis[i] < self.basis[bi]
                            } else {
                                a > ba
                            }
                        } else {
                            ratio < br
                        };
                        if better {
                            Some((i, ratio, a))
                        } else {
                            Some((bi, br, ba))
                        }
                    }
                };
            }
            let Some((r, ratio, _)) = leaving else {
                return Ok(PhaseEnd::Unbounded);
            };
            if ratio <= opts.tolerance {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, k);
            *iterations += 1;
        }
    }
}

pub fn solve_reference(model: &LpModel, opts: &SimplexOptions) -> Result<Solution, SimplexError> {
    let start = Instant::now();
    if model.num_rows() > opts.max_rows {
        return Err(SimplexError::SizeLimit {
            rows: model.num_rows(),
            cap: opts.max_rows,
        });
    }
    let sf = StandardForm::build(model);
    let m = sf.rows.len();
    let n = sf.num_cols;

    let mut artificial_rows = Vec::new();
    for (i, s) in sf.unit_slack.iter().enumerate() {
        if s.is_none() {
            artificial_rows.push(i);
        }
    }
    let width = n + artificial_rows.len();
    let mut data = vec![0.0; m * (width + 1)];
    let mut basis = vec![0; m];
    for i in 0..m {
        let row = &mut data[i * (width + 1)..(i + 1) * (width + 1)];
        row[..n].copy_from_slice(&sf.rows[i]);
        row[width] = sf.rhs[i];
    }
    for (a, &i) in artificial_rows.iter().enumerate() {
        data[i * (width + 1) + n + a] = 1.0;
        basis[i] = n + a;
    }
    for (i, s) in sf.unit_slack.iter().enumerate() {
        if let Some(c) = s {
            basis[i] = *c;
        }
    }
    let mut tab = Tableau {
        width,
        data,
        reduced: Vec::new(),
        basis,
        enterable: vec![true; width],
        rows: m,
    };
    let mut iterations = 0usize;
    let rhs_scale = 1.0 + sf.rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));

    if !artificial_rows.is_empty() {
        let mut phase1 = vec![0.0; width];
        phase1[n..].iter_mut().for_each(|c| *c = 1.0);
        tab.set_costs(&phase1);
        match tab.run(opts, opts.tolerance, &mut iterations)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::IterationLimit => {
                return Ok(Solution::without_point(SolveStatus::Limit, start.elapsed()));
            }
            PhaseEnd::Unbounded => {
                return Err(SimplexError::Numerical("phase 1 reported unbounded".into()));
            }
        }
        if tab.objective() > opts.tolerance * rhs_scale {
            return Ok(Solution::without_point(
                SolveStatus::Infeasible,
                start.elapsed(),
            ));
        }
        tab.enterable[n..].iter_mut().for_each(|e| *e = false);
        // Drive remaining (zero-level) artificials out of the basis.
        for i in 0..m {
            if tab.basis[i] < n {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                let a = tab.at(i, j).abs();
                if a > opts.pivot_tolerance && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            // No candidate means the row is redundant; its artificial stays at zero.
            if let Some((j, _)) = best {
                tab.pivot(i, j);
            }
        }
    }

    let mut cost = sf.cost.clone();
    cost.resize(width, 0.0);
    tab.set_costs(&cost);
    let cost_scale = 1.0 + sf.cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let end = tab.run(opts, opts.tolerance * cost_scale, &mut iterations)?;
    let status = match end {
        PhaseEnd::Optimal => SolveStatus::Optimal,
        PhaseEnd::Unbounded => {
            return Ok(Solution::without_point(
                SolveStatus::Unbounded,
                start.elapsed(),
            ));
        }
        PhaseEnd::IterationLimit => SolveStatus::Limit,
    };

    let mut y = vec![0.0; width];
    for i in 0..m {
        y[tab.basis[i]] = tab.rhs(i).max(0.0);
    }
    let mut x = clamp_to_bounds(model, sf.recover(&y));
    if model.max_scaled_row_violation(&x) > 1e-7 {
        // Recompute the basic solution from the original matrix.
        let yb = refine(&sf, &tab.basis, n)
            .ok_or_else(|| SimplexError::Numerical("singular final basis".into()))?;
        x = clamp_to_bounds(model, sf.recover(&yb));
        let viol = model.max_scaled_row_violation(&x);
        if viol > 1e-7 {
            return Err(SimplexError::Numerical(format!(
                "final point violates rows by {viol:e}"
            )));
        }
    }
    Ok(Solution {
        status,
        objective: Some(model.objective_value(&x)),
        values: Some(x),
        wall_time: start.elapsed(),
    })
}

fn clamp_to_bounds(model: &LpModel, mut x: Vec<f64>) -> Vec<f64> {
    for (xi, v) in x.iter_mut().zip(model.variables()) {
        *xi = xi.clamp(v.lower, v.upper);
    }
    x
}

/// Solves `B y_B = b` with partial pivoting; artificial basics are held at zero.
fn refine(sf: &StandardForm, basis: &[usize], n: usize) -> Option<Vec<f64>> {
    let m = sf.rows.len();
    let cols: Vec<usize> = basis.to_vec();
    let mut a = vec![vec![0.0; m + 1]; m];
    for i in 0..m {
        for (c, &j) in cols.iter().enumerate() {
            a[i][c] = if j < n { sf.rows[i][j] } else { 0.0 };
        }
        a[i][m] = sf.rhs[i];
    }
    // Artificial basics: replace their column by a unit column on a redundant row.
    for (c, &j) in cols.iter().enumerate() {
        if j >= n {
            for (i, row) in a.iter_mut().enumerate() {
                row[c] = if i == c { 1.0 } else { 0.0 };
            }
        }
    }
    for c in 0..m {
        let p = (c..m).max_by(|&i, &k| a[i][c].abs().total_cmp(&a[k][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        for i in 0..m {
            if i != c && a[i][c] != 0.0 {
                let f = a[i][c] / a[c][c];
                for k in c..=m {
                    a[i][k] -= f * a[c][k];
                }
            }
        }
    }
    let mut y = vec![0.0; sf.num_cols + basis.len()];
    for (c, &j) in cols.iter().enumerate() {
        if j < n {
            y[j] = (a[c][m] / a[c][c]).max(0.0);
        }
    }
    Some(y)
}
