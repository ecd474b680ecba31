//! Exact rational linear programming: a dense two-phase tableau simplex with
//! Bland's rule, and the minimax problems built on it.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Q;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<Q>,
    pub relation: Relation,
    pub rhs: Q,
}

/// Minimize `objective · x` subject to the constraints and `x >= 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<Q>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub value: Q,
    pub x: Vec<Q>,
}

struct Tableau {
    /// `rows[i]` holds the coefficients followed by the right-hand side.
    rows: Vec<Vec<Q>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = self.rows[r][c].recip();
        for v in self.rows[r].iter_mut() {
            *v *= &inv;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &f * p;
                }
            }
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[Q], allowed: usize) -> Vec<Q> {
        (0..allowed)
            .map(|j| {
                let mut z = cost[j].clone();
                for (row, &b) in self.rows.iter().zip(&self.basis) {
                    if !row[j].is_zero() && !cost[b].is_zero() {
                        z -= &cost[b] * &row[j];
                    }
                }
                z
            })
            .collect()
    }

    /// Runs the simplex method on columns `0..allowed`; Bland's rule.
    fn optimize(&mut self, cost: &[Q], allowed: usize) -> Result<()> {
        loop {
            let reduced = self.reduced_costs(cost, allowed);
            let Some(enter) = (0..allowed).find(|&j| reduced[j].is_negative()) else {
                return Ok(());
            };
            let rhs = self.cols;
            let mut leave: Option<(usize, Q)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[enter].is_positive() {
                    let ratio = &row[rhs] / &row[enter];
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(r, enter);
        }
    }
}

impl LinearProgram {
    pub fn new(num_vars: usize, objective: Vec<Q>) -> Self {
        assert_eq!(objective.len(), num_vars);
        LinearProgram {
            num_vars,
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn add(&mut self, coeffs: Vec<Q>, relation: Relation, rhs: Q) {
        assert_eq!(coeffs.len(), self.num_vars);
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> Result<Solution> {
        let n = self.num_vars;
        let m = self.constraints.len();
        // normalize to nonnegative right-hand sides
        let normalized: Vec<(Vec<Q>, Relation, Q)> = self
            .constraints
            .iter()
            .map(|c| {
                if c.rhs.is_negative() {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|x| -x).collect(), rel, -&c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs.clone())
                }
            })
            .collect();
        let slacks = normalized.iter().filter(|c| c.1 != Relation::Eq).count();
        let artificials = normalized.iter().filter(|c| c.1 != Relation::Le).count();
        let real = n + slacks;
        let cols = real + artificials;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let (mut s, mut a) = (n, real);
        for (coeffs, rel, rhs) in &normalized {
            let mut row = vec![Q::zero(); cols + 1];
            row[..n].clone_from_slice(coeffs);
            row[cols] = rhs.clone();
            match rel {
                Relation::Le => {
                    row[s] = Q::one();
                    basis.push(s);
                    s += 1;
                }
                Relation::Ge => {
                    row[s] = -Q::one();
                    s += 1;
                    row[a] = Q::one();
                    basis.push(a);
                    a += 1;
                }
                Relation::Eq => {
                    row[a] = Q::one();
                    basis.push(a);
                    a += 1;
                }
            }
            rows.push(row);
        }
        let mut tab = Tableau { rows, basis, cols };

        if artificials > 0 {
            let mut phase1 = vec![Q::zero(); cols];
            for c in phase1.iter_mut().skip(real) {
                *c = Q::one();
            }
            tab.optimize(&phase1, cols)?;
            let infeasibility: Q = tab
                .rows
                .iter()
                .zip(&tab.basis)
                .filter(|(_, &b)| b >= real)
                .map(|(row, _)| row[cols].clone())
                .sum();
            if infeasibility.is_positive() {
                return Err(Error::Infeasible);
            }
            // drive remaining artificials out of the basis or drop their rows
            let mut i = 0;
            while i < tab.rows.len() {
                if tab.basis[i] >= real {
                    match (0..real).find(|&j| !tab.rows[i][j].is_zero()) {
                        Some(j) => {
                            tab.pivot(i, j);
                            i += 1;
                        }
                        None => {
                            tab.rows.remove(i);
                            tab.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
        }

        let mut cost = vec![Q::zero(); cols];
        cost[..n].clone_from_slice(&self.objective);
        tab.optimize(&cost, real)?;
        let mut x = vec![Q::zero(); n];
        for (row, &b) in tab.rows.iter().zip(&tab.basis) {
            if b < n {
                x[b] = row[cols].clone();
            }
        }
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Ok(Solution { value, x })
    }
}

/// `coeffs · g + constant`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Affine {
    pub coeffs: Vec<Q>,
    pub constant: Q,
}

impl Affine {
    pub fn eval(&self, g: &[Q]) -> Q {
        self.coeffs.iter().zip(g).map(|(a, x)| a * x).sum::<Q>() + &self.constant
    }
}

/// Minimize `max_j |rows[j](g)|` over the box `lower <= g <= upper` with one
/// coordinate pinned.
#[derive(Clone, Debug)]
pub struct MinimaxProblem {
    pub rows: Vec<Affine>,
    pub lower: Vec<Q>,
    pub upper: Vec<Q>,
    pub pinned: (usize, Q),
    /// Among optimal points, minimize `Σ |g_i - g_j|` over these pairs.
    pub tie_break: Vec<(usize, usize)>,
}

/// Exact minimax value and a deterministic minimizer.
pub fn lp_minimax(problem: &MinimaxProblem) -> Result<(Q, Vec<Q>)> {
    let n = problem.lower.len();
    assert_eq!(problem.upper.len(), n);
    let (pin, pin_value) = (&problem.pinned.0, &problem.pinned.1);
    if problem.rows.is_empty() {
        return Err(Error::Infeasible);
    }
    if problem.lower.iter().zip(&problem.upper).any(|(l, u)| l > u)
        || pin_value < &problem.lower[*pin]
        || pin_value > &problem.upper[*pin]
    {
        return Err(Error::Infeasible);
    }
    // free variables u_i = g_i - lower_i (pinned one removed), then t, then
    // tie-break slacks
    let free: Vec<usize> = (0..n).filter(|i| i != pin).collect();
    let col = |i: usize| free.iter().position(|&f| f == i);
    let nf = free.len();
    let t = nf;
    let pairs = problem.tie_break.len();

    // rows in u: a·g + c = a·u + (c + a·lower + a_pin·(pin_value - lower_pin))
    let shifted: Vec<(Vec<Q>, Q)> = problem
        .rows
        .iter()
        .map(|r| {
            let mut c = r.constant.clone();
            let mut coeffs = vec![Q::zero(); nf];
            for i in 0..n {
                if i == *pin {
                    c += &r.coeffs[i] * pin_value;
                } else {
                    c += &r.coeffs[i] * &problem.lower[i];
                    coeffs[col(i).unwrap()] = r.coeffs[i].clone();
                }
            }
            (coeffs, c)
        })
        .collect();

    let build = |vars: usize, fixed_t: Option<&Q>| {
        let mut objective = vec![Q::zero(); vars];
        if fixed_t.is_none() {
            objective[t] = Q::one();
        } else {
            for o in objective.iter_mut().skip(nf + 1) {
                *o = Q::one();
            }
        }
        let mut lp = LinearProgram::new(vars, objective);
        for (coeffs, c) in &shifted {
            // a·u + c <= t  and  -(a·u + c) <= t
            let mut up = vec![Q::zero(); vars];
            up[..nf].clone_from_slice(coeffs);
            up[t] = -Q::one();
            lp.add(up.clone(), Relation::Le, -c);
            let mut down: Vec<Q> = up.iter().map(|x| -x).collect();
            down[t] = -Q::one();
            lp.add(down, Relation::Le, c.clone());
        }
        for (j, &i) in free.iter().enumerate() {
            let mut row = vec![Q::zero(); vars];
            row[j] = Q::one();
            lp.add(row, Relation::Le, &problem.upper[i] - &problem.lower[i]);
        }
        if let Some(tv) = fixed_t {
            let mut row = vec![Q::zero(); vars];
            row[t] = Q::one();
            lp.add(row, Relation::Eq, tv.clone());
        }
        lp
    };

    let first = build(nf + 1, None).solve()?;
    let optimum = first.value.clone();
    let mut u = first.x;
    if pairs > 0 {
        let vars = nf + 1 + pairs;
        let mut lp = build(vars, Some(&optimum));
        for (p, &(i, j)) in problem.tie_break.iter().enumerate() {
            // s_p >= ±(g_i - g_j), written in u plus constants
            let (mut diff, mut c) = (vec![Q::zero(); vars], Q::zero());
            for (idx, sign) in [(i, Q::one()), (j, -Q::one())] {
                match col(idx) {
                    Some(k) => {
                        diff[k] += &sign;
                        c += &sign * &problem.lower[idx];
                    }
                    None => c += &sign * pin_value,
                }
            }
            let slack = nf + 1 + p;
            let mut plus = diff.clone();
            plus[slack] = -Q::one();
            lp.add(plus, Relation::Le, -&c);
            let mut minus: Vec<Q> = diff.iter().map(|x| -x).collect();
            minus[slack] = -Q::one();
            lp.add(minus, Relation::Le, c.clone());
        }
        u = lp.solve()?.x;
    }
    let mut g = vec![Q::zero(); n];
    for i in 0..n {
        g[i] = match col(i) {
            Some(k) => &u[k] + &problem.lower[i],
            None => pin_value.clone(),
        };
    }
    let achieved = problem.rows.iter().map(|r| r.eval(&g).abs()).max().unwrap();
    debug_assert_eq!(achieved, optimum);
    Ok((achieved, g))
}
