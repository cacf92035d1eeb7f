//! Exact rational linear programming (two-phase dense simplex, Bland's rule).

use std::fmt::Write as _;

use num_traits::{Signed, Zero};

use crate::error::{Result, SolverError};
use crate::rational::{format_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }

    fn flipped(self) -> Self {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Eq => Relation::Eq,
            Relation::Ge => Relation::Le,
        }
    }
}

pub type Var = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(Var, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// `maximize c·x` subject to linear constraints; variables are `>= 0` unless free.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinearProgram {
    names: Vec<String>,
    free: Vec<bool>,
    constraints: Vec<Constraint>,
    objective: Option<Vec<(Var, Rational)>>,
    minimizing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    /// No objective was set and a feasible point was found.
    Feasible,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// One value per declared variable; empty when infeasible.
    pub values: Vec<Rational>,
    pub objective: Option<Rational>,
}

impl LpSolution {
    pub fn value(&self, v: Var) -> &Rational {
        &self.values[v]
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self.status, LpStatus::Optimal | LpStatus::Feasible)
    }
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> Var {
        self.names.push(name.into());
        self.free.push(false);
        self.names.len() - 1
    }

    pub fn add_free_var(&mut self, name: impl Into<String>) -> Var {
        let v = self.add_var(name);
        self.free[v] = true;
        v
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn var_name(&self, v: Var) -> &str {
        &self.names[v]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(Var, Rational)>,
        relation: Relation,
        rhs: Rational,
    ) {
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn maximize(&mut self, coeffs: Vec<(Var, Rational)>) {
        self.objective = Some(coeffs);
        self.minimizing = false;
    }

    /// The reported objective value is the minimum itself.
    pub fn minimize(&mut self, coeffs: Vec<(Var, Rational)>) {
        self.objective = Some(coeffs.into_iter().map(|(v, c)| (v, -c)).collect());
        self.minimizing = true;
    }

    pub fn clear_objective(&mut self) {
        self.objective = None;
        self.minimizing = false;
    }

    /// Evaluates `coeffs·x`.
    pub fn eval(coeffs: &[(Var, Rational)], x: &[Rational]) -> Rational {
        coeffs.iter().map(|(v, c)| c * &x[*v]).sum()
    }

    /// True when `x` satisfies every constraint and sign restriction exactly.
    pub fn is_satisfied_by(&self, x: &[Rational]) -> bool {
        x.len() == self.num_vars()
            && x.iter().zip(&self.free).all(|(v, &f)| f || !v.is_negative())
            && self.constraints.iter().all(|c| {
                let lhs = Self::eval(&c.coeffs, x);
                match c.relation {
                    Relation::Le => lhs <= c.rhs,
                    Relation::Eq => lhs == c.rhs,
                    Relation::Ge => lhs >= c.rhs,
                }
            })
    }

    /// Human-readable listing, one constraint per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let term_list = |coeffs: &[(Var, Rational)]| {
            if coeffs.is_empty() {
                return "0/1".to_string();
            }
            coeffs
                .iter()
                .map(|(v, c)| format!("{} {}", format_rational(c), self.names[*v]))
                .collect::<Vec<_>>()
                .join(" + ")
        };
        match &self.objective {
            Some(obj) if self.minimizing => {
                let neg: Vec<_> = obj.iter().map(|(v, c)| (*v, -c)).collect();
                let _ = writeln!(out, "minimize: {}", term_list(&neg));
            }
            Some(obj) => {
                let _ = writeln!(out, "maximize: {}", term_list(obj));
            }
            None => out.push_str("feasibility\n"),
        }
        out.push_str("subject to\n");
        for c in &self.constraints {
            let _ = writeln!(
                out,
                "  {}: {} {} {}",
                c.name,
                term_list(&c.coeffs),
                c.relation.symbol(),
                format_rational(&c.rhs)
            );
        }
        let free: Vec<_> = (0..self.num_vars())
            .filter(|&v| self.free[v])
            .map(|v| self.names[v].as_str())
            .collect();
        if !free.is_empty() {
            let _ = writeln!(out, "free: {}", free.join(" "));
        }
        let _ = writeln!(out, "variables: {}", self.names.join(" "));
        out
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vars();
        let bad = |v: Var| v >= n;
        for c in &self.constraints {
            if let Some((v, _)) = c.coeffs.iter().find(|(v, _)| bad(*v)) {
                return Err(SolverError::MalformedLp(format!(
                    "constraint {} references undeclared variable #{v}",
                    c.name
                )));
            }
        }
        if let Some(obj) = &self.objective {
            if let Some((v, _)) = obj.iter().find(|(v, _)| bad(*v)) {
                return Err(SolverError::MalformedLp(format!(
                    "objective references undeclared variable #{v}"
                )));
            }
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.check()?;
        Ok(Simplex::build(self).run(self))
    }
}

/// Column kinds in the standard-form tableau.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Column {
    Plus(Var),
    Minus(Var),
    Slack,
    Artificial,
}

struct Simplex {
    columns: Vec<Column>,
    /// Row-major `m × (columns + 1)`; the last entry of each row is the right-hand side.
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
}

impl Simplex {
    fn build(lp: &LinearProgram) -> Self {
        let mut columns = Vec::new();
        let mut var_cols = Vec::with_capacity(lp.num_vars());
        for v in 0..lp.num_vars() {
            columns.push(Column::Plus(v));
            let plus = columns.len() - 1;
            let minus = if lp.free[v] {
                columns.push(Column::Minus(v));
                Some(columns.len() - 1)
            } else {
                None
            };
            var_cols.push((plus, minus));
        }
        // Normalize to non-negative right-hand sides first.
        let normalized: Vec<(Vec<Rational>, Relation, Rational)> = lp
            .constraints
            .iter()
            .map(|c| {
                let mut dense = vec![Rational::zero(); columns.len()];
                for (v, coef) in &c.coeffs {
                    let (p, m) = var_cols[*v];
                    dense[p] += coef;
                    if let Some(m) = m {
                        dense[m] -= coef;
                    }
                }
                if c.rhs.is_negative() {
                    for d in &mut dense {
                        *d = -&*d;
                    }
                    (dense, c.relation.flipped(), -&c.rhs)
                } else {
                    (dense, c.relation, c.rhs.clone())
                }
            })
            .collect();
        let structural = columns.len();
        let mut extra: Vec<(usize, Rational, Column)> = Vec::new();
        let mut basis = Vec::with_capacity(normalized.len());
        for (i, (_, rel, _)) in normalized.iter().enumerate() {
            let next = structural + extra.len();
            match rel {
                Relation::Le => {
                    extra.push((i, Rational::from_integer(1.into()), Column::Slack));
                    basis.push(next);
                }
                Relation::Ge => {
                    extra.push((i, Rational::from_integer((-1).into()), Column::Slack));
                    extra.push((i, Rational::from_integer(1.into()), Column::Artificial));
                    basis.push(next + 1);
                }
                Relation::Eq => {
                    extra.push((i, Rational::from_integer(1.into()), Column::Artificial));
                    basis.push(next);
                }
            }
        }
        columns.extend(extra.iter().map(|e| e.2));
        let width = columns.len();
        let rows = normalized
            .into_iter()
            .enumerate()
            .map(|(i, (mut dense, _, rhs))| {
                dense.resize(width, Rational::zero());
                for (k, (row, coef, _)) in extra.iter().enumerate() {
                    if *row == i {
                        dense[structural + k] = coef.clone();
                    }
                }
                dense.push(rhs);
                dense
            })
            .collect();
        Simplex {
            columns,
            rows,
            basis,
        }
    }

    fn width(&self) -> usize {
        self.columns.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c].clone();
        for x in self.rows[r].iter_mut() {
            if !x.is_zero() {
                *x /= &piv;
            }
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *x -= &f * p;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost·x` over columns allowed by `eligible`. Returns false when unbounded.
    fn optimize(&mut self, cost: &[Rational], eligible: &[bool]) -> bool {
        let w = self.width();
        loop {
            let entering = (0..w).find(|&j| {
                eligible[j] && !self.basis.contains(&j) && self.reduced_cost(cost, j).is_positive()
            });
            let Some(c) = entering else {
                return true;
            };
            let mut best: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                let ratio = &row[w] / &row[c];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }

    fn reduced_cost(&self, cost: &[Rational], j: usize) -> Rational {
        let mut r = cost[j].clone();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = &cost[self.basis[i]];
            if !cb.is_zero() && !row[j].is_zero() {
                r -= cb * &row[j];
            }
        }
        r
    }

    fn basic_value(&self, j: usize) -> Rational {
        let w = self.width();
        self.basis
            .iter()
            .position(|&b| b == j)
            .map_or_else(Rational::zero, |i| self.rows[i][w].clone())
    }

    fn run(mut self, lp: &LinearProgram) -> LpSolution {
        let w = self.width();
        let artificial: Vec<bool> = self.columns.iter().map(|c| *c == Column::Artificial).collect();
        let phase1: Vec<Rational> = artificial
            .iter()
            .map(|&a| if a { Rational::from_integer((-1).into()) } else { Rational::zero() })
            .collect();
        let all = vec![true; w];
        self.optimize(&phase1, &all);
        let infeasibility: Rational = (0..w)
            .filter(|&j| artificial[j])
            .map(|j| self.basic_value(j))
            .sum();
        if infeasibility.is_positive() {
            return LpSolution {
                status: LpStatus::Infeasible,
                values: Vec::new(),
                objective: None,
            };
        }
        // Drive zero-valued artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < self.rows.len() {
            if artificial[self.basis[i]] {
                match (0..w).find(|&j| !artificial[j] && !self.rows[i][j].is_zero()) {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.rows.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        let eligible: Vec<bool> = artificial.iter().map(|a| !a).collect();
        let mut cost = vec![Rational::zero(); w];
        if let Some(obj) = &lp.objective {
            for (v, c) in obj {
                for (j, col) in self.columns.iter().enumerate() {
                    match col {
                        Column::Plus(x) if x == v => cost[j] += c,
                        Column::Minus(x) if x == v => cost[j] -= c,
                        _ => {}
                    }
                }
            }
        }
        let bounded = self.optimize(&cost, &eligible);
        let mut values = vec![Rational::zero(); lp.num_vars()];
        for (j, col) in self.columns.iter().enumerate() {
            match col {
                Column::Plus(v) => values[*v] += self.basic_value(j),
                Column::Minus(v) => values[*v] -= self.basic_value(j),
                _ => {}
            }
        }
        let (status, objective) = match (&lp.objective, bounded) {
            (None, _) => (LpStatus::Feasible, None),
            (Some(_), false) => (LpStatus::Unbounded, None),
            (Some(obj), true) => {
                let best = LinearProgram::eval(obj, &values);
                (LpStatus::Optimal, Some(if lp.minimizing { -best } else { best }))
            }
        };
        LpSolution {
            status,
            values,
            objective,
        }
    }
}
