//! Exact rational linear algebra and linear programming.
//!
//! The simplex method runs on a dense tableau with Bland's rule, so output
//! is deterministic and cycling is impossible. Every terminal status comes
//! with a certificate that can be checked independently of the solver:
//! a dual bound at the optimum, a Farkas vector for infeasibility and a
//! ray for unboundedness.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::rational::{dot, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("vertex enumeration over {dim} variables exceeds the limit of {limit}")]
    DimensionLimitExceeded { dim: usize, limit: usize },
    #[error("point is not strictly interior: {0}")]
    PointNotStrictlyInterior(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// `opt c.x  s.t.  C x = d,  A x <= b,  x_j >= l_j` where `l_j` may be absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub vars: usize,
    pub sense: Sense,
    pub objective: Vec<Rational>,
    pub eq_rows: Vec<Vec<Rational>>,
    pub eq_rhs: Vec<Rational>,
    pub le_rows: Vec<Vec<Rational>>,
    pub le_rhs: Vec<Rational>,
    pub lower: Vec<Option<Rational>>,
}

impl LinearProgram {
    /// Zero objective, no constraints, all variables free.
    pub fn new(vars: usize, sense: Sense) -> Self {
        Self {
            vars,
            sense,
            objective: vec![Rational::zero(); vars],
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            le_rows: Vec::new(),
            le_rhs: Vec::new(),
            lower: vec![None; vars],
        }
    }

    pub fn set_objective(&mut self, c: Vec<Rational>) {
        self.objective = c;
    }

    pub fn add_eq(&mut self, row: Vec<Rational>, rhs: Rational) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, row: Vec<Rational>, rhs: Rational) {
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
    }

    pub fn add_ge(&mut self, row: Vec<Rational>, rhs: Rational) {
        self.add_le(row.into_iter().map(|v| -v).collect(), -rhs);
    }

    pub fn set_lower(&mut self, var: usize, bound: Rational) {
        self.lower[var] = Some(bound);
    }

    pub fn nonnegative(&mut self, var: usize) {
        self.lower[var] = Some(Rational::zero());
    }

    fn check_dimensions(&self) -> Result<(), LpError> {
        let n = self.vars;
        let bad = |what: &str| Err(LpError::DimensionMismatch(what.to_string()));
        if self.objective.len() != n || self.lower.len() != n {
            return bad("objective or bounds length");
        }
        if self.eq_rows.len() != self.eq_rhs.len() || self.le_rows.len() != self.le_rhs.len() {
            return bad("row count differs from rhs length");
        }
        if self
            .eq_rows
            .iter()
            .chain(&self.le_rows)
            .any(|r| r.len() != n)
        {
            return bad("row length differs from variable count");
        }
        Ok(())
    }

    /// True when `x` satisfies every constraint exactly.
    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        x.len() == self.vars
            && self
                .eq_rows
                .iter()
                .zip(&self.eq_rhs)
                .all(|(r, d)| &dot(r, x) == d)
            && self
                .le_rows
                .iter()
                .zip(&self.le_rhs)
                .all(|(r, b)| &dot(r, x) <= b)
            && self
                .lower
                .iter()
                .zip(x)
                .all(|(l, v)| l.as_ref().is_none_or(|l| v >= l))
    }

    fn min_objective(&self) -> Vec<Rational> {
        match self.sense {
            Sense::Minimize => self.objective.clone(),
            Sense::Maximize => self.objective.iter().map(|v| -v).collect(),
        }
    }
}

/// Multipliers for the equality rows (free) and the `<=` rows (`>= 0`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multipliers {
    pub eq: Vec<Rational>,
    pub le: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpOptimum {
    pub value: Rational,
    pub primal: Vec<Rational>,
    /// Dual solution proving no feasible point beats `value`.
    pub dual: Multipliers,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnboundedRay {
    pub point: Vec<Rational>,
    pub direction: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpResult {
    Optimal(LpOptimum),
    /// Farkas multipliers `(u, v >= 0)` with `g = C'u + A'v` zero on free
    /// variables, nonnegative on bounded ones and `sum g_j l_j > u.d + v.b`.
    Infeasible(Multipliers),
    Unbounded(UnboundedRay),
}

impl LpResult {
    pub fn optimum(&self) -> Option<&LpOptimum> {
        match self {
            LpResult::Optimal(o) => Some(o),
            _ => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            LpResult::Optimal(_) => "optimal",
            LpResult::Infeasible(_) => "infeasible",
            LpResult::Unbounded(_) => "unbounded",
        }
    }
}

/// `g = C'u + A'v`.
fn combine_rows(lp: &LinearProgram, cert: &Multipliers) -> Vec<Rational> {
    let mut g = vec![Rational::zero(); lp.vars];
    for (row, u) in lp
        .eq_rows
        .iter()
        .zip(&cert.eq)
        .chain(lp.le_rows.iter().zip(&cert.le))
    {
        if u.is_zero() {
            continue;
        }
        for (gj, a) in g.iter_mut().zip(row) {
            if !a.is_zero() {
                *gj += u * a;
            }
        }
    }
    g
}

/// Checks a Farkas certificate against the program alone.
pub fn verify_farkas(lp: &LinearProgram, cert: &Multipliers) -> bool {
    if cert.eq.len() != lp.eq_rows.len() || cert.le.len() != lp.le_rows.len() {
        return false;
    }
    if cert.le.iter().any(Signed::is_negative) {
        return false;
    }
    let g = combine_rows(lp, cert);
    let mut lhs = Rational::zero();
    for (gj, l) in g.iter().zip(&lp.lower) {
        match l {
            None if !gj.is_zero() => return false,
            Some(_) if gj.is_negative() => return false,
            Some(l) => lhs += gj * l,
            None => {}
        }
    }
    lhs > dot(&cert.eq, &lp.eq_rhs) + dot(&cert.le, &lp.le_rhs)
}

/// Checks that `cert` proves `value` is a bound on the optimum (lower bound
/// when minimizing, upper bound when maximizing) and that the bound is tight.
pub fn verify_dual(lp: &LinearProgram, cert: &Multipliers, value: &Rational) -> bool {
    if cert.eq.len() != lp.eq_rows.len() || cert.le.len() != lp.le_rows.len() {
        return false;
    }
    if cert.le.iter().any(Signed::is_negative) {
        return false;
    }
    // r = c - C'y + A'z must vanish on free variables and be >= 0 otherwise
    let c = lp.min_objective();
    let neg_le: Vec<Rational> = cert.le.iter().map(|v| -v).collect();
    let combined = combine_rows(
        lp,
        &Multipliers {
            eq: cert.eq.clone(),
            le: neg_le,
        },
    );
    let mut bound = dot(&cert.eq, &lp.eq_rhs) - dot(&cert.le, &lp.le_rhs);
    for ((cj, gj), l) in c.iter().zip(&combined).zip(&lp.lower) {
        let r = cj - gj;
        match l {
            None if !r.is_zero() => return false,
            Some(_) if r.is_negative() => return false,
            Some(l) => bound += &r * l,
            None => {}
        }
    }
    match lp.sense {
        Sense::Minimize => &bound == value,
        Sense::Maximize => -bound == *value,
    }
}

/// Checks that the ray starts at a feasible point and improves the objective
/// without bound.
pub fn verify_ray(lp: &LinearProgram, ray: &UnboundedRay) -> bool {
    let d = &ray.direction;
    if !lp.is_feasible(&ray.point) || d.len() != lp.vars {
        return false;
    }
    let improves = match lp.sense {
        Sense::Minimize => dot(&lp.objective, d).is_negative(),
        Sense::Maximize => dot(&lp.objective, d).is_positive(),
    };
    improves
        && lp.eq_rows.iter().all(|r| dot(r, d).is_zero())
        && lp.le_rows.iter().all(|r| !dot(r, d).is_positive())
        && lp
            .lower
            .iter()
            .zip(d)
            .all(|(l, v)| l.is_none() || !v.is_negative())
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    reduced: Vec<Rational>,
}

enum Phase {
    Optimal,
    Unbounded(usize),
}

impl Tableau {
    fn pivot(&mut self, r: usize, e: usize) {
        let p = self.rows[r][e].clone();
        if !p.is_one() {
            for v in self.rows[r].iter_mut().filter(|v| !v.is_zero()) {
                *v /= &p;
            }
            self.rhs[r] /= &p;
        }
        let support: Vec<usize> = (0..self.rows[r].len())
            .filter(|&j| !self.rows[r][j].is_zero())
            .collect();
        let (pivot_row, pivot_rhs) = (self.rows[r].clone(), self.rhs[r].clone());
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][e].is_zero() {
                continue;
            }
            let f = self.rows[i][e].clone();
            for &j in &support {
                let delta = &f * &pivot_row[j];
                self.rows[i][j] -= delta;
            }
            if !pivot_rhs.is_zero() {
                self.rhs[i] -= &f * &pivot_rhs;
            }
        }
        if !self.reduced[e].is_zero() {
            let f = self.reduced[e].clone();
            for &j in &support {
                let delta = &f * &pivot_row[j];
                self.reduced[j] -= delta;
            }
        }
        self.basis[r] = e;
    }

    fn price(&mut self, cost: &[Rational]) {
        let mut d = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (dj, a) in d.iter_mut().zip(&self.rows[r]) {
                if !a.is_zero() {
                    *dj -= cb * a;
                }
            }
        }
        self.reduced = d;
    }

    fn run(&mut self, allowed: &[bool]) -> Phase {
        loop {
            let Some(e) =
                (0..self.reduced.len()).find(|&j| allowed[j] && self.reduced[j].is_negative())
            else {
                return Phase::Optimal;
            };
            let mut best: Option<(usize, Rational)> = None;
            for r in 0..self.rows.len() {
                let a = &self.rows[r][e];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[r] / a;
                let better = match &best {
                    None => true,
                    Some((br, bv)) => {
                        ratio < *bv || (ratio == *bv && self.basis[r] < self.basis[*br])
                    }
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, e),
                None => return Phase::Unbounded(e),
            }
        }
    }

    fn value_of(&self, col: usize) -> Rational {
        self.basis
            .iter()
            .position(|&b| b == col)
            .map_or_else(Rational::zero, |r| self.rhs[r].clone())
    }
}

/// How an original variable maps onto nonnegative tableau columns.
#[derive(Clone, Copy)]
enum VarMap {
    Shifted(usize),
    Split(usize, usize),
}

/// Solves the program exactly.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpResult, LpError> {
    lp.check_dimensions()?;
    let n = lp.vars;
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    for l in &lp.lower {
        if l.is_some() {
            maps.push(VarMap::Shifted(ncols));
            ncols += 1;
        } else {
            maps.push(VarMap::Split(ncols, ncols + 1));
            ncols += 2;
        }
    }
    let structural = ncols;
    let m_eq = lp.eq_rows.len();
    let m = m_eq + lp.le_rows.len();
    let slack_base = ncols;
    ncols += lp.le_rows.len();

    let mut rows: Vec<Vec<Rational>> = Vec::with_capacity(m);
    let mut rhs: Vec<Rational> = Vec::with_capacity(m);
    for (k, (row, b)) in lp
        .eq_rows
        .iter()
        .zip(&lp.eq_rhs)
        .chain(lp.le_rows.iter().zip(&lp.le_rhs))
        .enumerate()
    {
        let mut t = vec![Rational::zero(); ncols];
        let mut shifted = b.clone();
        for (j, a) in row.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            match maps[j] {
                VarMap::Shifted(c) => {
                    t[c] = a.clone();
                    let l = lp.lower[j].as_ref().expect("bounded variable");
                    if !l.is_zero() {
                        shifted -= a * l;
                    }
                }
                VarMap::Split(p, q) => {
                    t[p] = a.clone();
                    t[q] = -a;
                }
            }
        }
        if k >= m_eq {
            t[slack_base + k - m_eq] = Rational::one();
        }
        rows.push(t);
        rhs.push(shifted);
    }

    // Normalize to nonnegative rhs; pick an identity column per row.
    let mut sign = vec![true; m];
    let mut identity = vec![0usize; m];
    let mut artificial_rows = Vec::new();
    for r in 0..m {
        if rhs[r].is_negative() {
            sign[r] = false;
            for v in rows[r].iter_mut().filter(|v| !v.is_zero()) {
                *v = -&*v;
            }
            rhs[r] = -&rhs[r];
        }
        if r >= m_eq && sign[r] {
            identity[r] = slack_base + r - m_eq;
        } else {
            artificial_rows.push(r);
        }
    }
    let art_base = ncols;
    for (k, &r) in artificial_rows.iter().enumerate() {
        identity[r] = art_base + k;
    }
    ncols += artificial_rows.len();
    for row in &mut rows {
        row.resize(ncols, Rational::zero());
    }
    for &r in &artificial_rows {
        rows[r][identity[r]] = Rational::one();
    }

    let mut tab = Tableau {
        rows,
        rhs,
        basis: identity.clone(),
        reduced: Vec::new(),
    };

    // Phase 1
    let mut cost1 = vec![Rational::zero(); ncols];
    for c in art_base..ncols {
        cost1[c] = Rational::one();
    }
    if !artificial_rows.is_empty() {
        tab.price(&cost1);
        let all = vec![true; ncols];
        tab.run(&all);
        let infeasibility: Rational = (0..m)
            .filter(|&r| tab.basis[r] >= art_base)
            .map(|r| tab.rhs[r].clone())
            .sum();
        if infeasibility.is_positive() {
            let y: Vec<Rational> = (0..m)
                .map(|r| {
                    let yr = &cost1[identity[r]] - &tab.reduced[identity[r]];
                    if sign[r] {
                        yr
                    } else {
                        -yr
                    }
                })
                .collect();
            let cert = Multipliers {
                eq: y[..m_eq].iter().map(|v| -v).collect(),
                le: y[m_eq..].iter().map(|v| -v).collect(),
            };
            debug_assert!(verify_farkas(lp, &cert));
            return Ok(LpResult::Infeasible(cert));
        }
        for r in 0..m {
            if tab.basis[r] < art_base {
                continue;
            }
            if let Some(j) = (0..art_base).find(|&j| !tab.rows[r][j].is_zero()) {
                tab.pivot(r, j);
            }
        }
    }

    // Phase 2
    let c = lp.min_objective();
    let mut cost2 = vec![Rational::zero(); ncols];
    for (j, map) in maps.iter().enumerate() {
        match *map {
            VarMap::Shifted(p) => cost2[p] = c[j].clone(),
            VarMap::Split(p, q) => {
                cost2[p] = c[j].clone();
                cost2[q] = -&c[j];
            }
        }
    }
    tab.price(&cost2);
    let allowed: Vec<bool> = (0..ncols).map(|j| j < art_base).collect();
    let phase = tab.run(&allowed);

    let recover = |values: &dyn Fn(usize) -> Rational, shift: bool| -> Vec<Rational> {
        maps.iter()
            .enumerate()
            .map(|(j, map)| match *map {
                VarMap::Shifted(p) => {
                    let v = values(p);
                    match (&lp.lower[j], shift) {
                        (Some(l), true) => v + l,
                        _ => v,
                    }
                }
                VarMap::Split(p, q) => values(p) - values(q),
            })
            .collect()
    };
    let point = recover(&|col| tab.value_of(col), true);

    match phase {
        Phase::Unbounded(e) => {
            let dir_col = |col: usize| -> Rational {
                if col == e {
                    return Rational::one();
                }
                match tab.basis.iter().position(|&b| b == col) {
                    Some(r) => -&tab.rows[r][e],
                    None => Rational::zero(),
                }
            };
            let direction = recover(&dir_col, false);
            let ray = UnboundedRay { point, direction };
            debug_assert!(verify_ray(lp, &ray));
            Ok(LpResult::Unbounded(ray))
        }
        Phase::Optimal => {
            let _ = structural;
            let value = dot(&lp.objective, &point);
            let y: Vec<Rational> = (0..m)
                .map(|r| {
                    let yr = &cost2[identity[r]] - &tab.reduced[identity[r]];
                    if sign[r] {
                        yr
                    } else {
                        -yr
                    }
                })
                .collect();
            let dual = Multipliers {
                eq: y[..m_eq].to_vec(),
                le: y[m_eq..].iter().map(|v| -v).collect(),
            };
            debug_assert!(verify_dual(lp, &dual, &value));
            Ok(LpResult::Optimal(LpOptimum {
                value,
                primal: point,
                dual,
            }))
        }
    }
}

// ---------------------------------------------------------------------------
// Fraction-free elimination

fn integer_rows(rows: &[Vec<Rational>]) -> (Vec<Vec<BigInt>>, Vec<BigInt>) {
    let mut scales = Vec::with_capacity(rows.len());
    let ints = rows
        .iter()
        .map(|row| {
            let scale = row.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
            let out = row
                .iter()
                .map(|v| v.numer() * (&scale / v.denom()))
                .collect();
            scales.push(scale);
            out
        })
        .collect();
    (ints, scales)
}

/// Bareiss elimination on the first `cols` columns of `m`, updating every
/// column. Returns the pivot columns and whether an odd number of row swaps
/// happened. Rows past the rank are zero in the eliminated columns.
fn bareiss(m: &mut [Vec<BigInt>], cols: usize) -> (Vec<usize>, bool) {
    let rows = m.len();
    let width = m.first().map_or(0, Vec::len);
    let mut prev = BigInt::one();
    let mut pivots = Vec::new();
    let mut odd = false;
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        if p != r {
            m.swap(p, r);
            odd = !odd;
        }
        let (head, tail) = m.split_at_mut(r + 1);
        let pivot_row = &head[r];
        let pv = &pivot_row[c];
        for row in tail.iter_mut() {
            let lead = row[c].clone();
            for j in 0..width {
                if j == c {
                    continue;
                }
                let num = pv * &row[j] - &lead * &pivot_row[j];
                row[j] = if prev.is_one() {
                    num
                } else {
                    debug_assert!((&num % &prev).is_zero());
                    num / &prev
                };
            }
            row[c] = BigInt::zero();
        }
        prev = pv.clone();
        pivots.push(c);
        r += 1;
    }
    (pivots, odd)
}

/// Exact determinant by fraction-free elimination.
pub fn determinant(matrix: &[Vec<Rational>]) -> Result<Rational, LpError> {
    let n = matrix.len();
    if let Some(row) = matrix.iter().find(|r| r.len() != n) {
        return Err(LpError::NotSquare {
            rows: n,
            cols: row.len(),
        });
    }
    if n == 0 {
        return Ok(Rational::one());
    }
    let (mut ints, scales) = integer_rows(matrix);
    let (pivots, odd) = bareiss(&mut ints, n);
    if pivots.len() < n {
        return Ok(Rational::zero());
    }
    let scale = scales.iter().fold(BigInt::one(), |acc, s| acc * s);
    let det = Rational::new(ints[n - 1][n - 1].clone(), scale);
    Ok(if odd { -det } else { det })
}

/// Rank of a rational matrix given by rows.
pub fn rank(rows: &[Vec<Rational>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let (mut ints, _) = integer_rows(rows);
    bareiss(&mut ints, cols).0.len()
}

/// Indices of a maximal linearly independent subset of `vectors`, chosen
/// greedily in order.
pub fn independent_subset(vectors: &[Vec<Rational>]) -> Vec<usize> {
    let mut basis: Vec<(usize, Vec<Rational>)> = Vec::new();
    let mut keep = Vec::new();
    for (k, v) in vectors.iter().enumerate() {
        let mut w = v.clone();
        for (p, b) in &basis {
            if !w[*p].is_zero() {
                let f = &w[*p] / &b[*p];
                for (wj, bj) in w.iter_mut().zip(b) {
                    if !bj.is_zero() {
                        *wj -= &f * bj;
                    }
                }
            }
        }
        if let Some(p) = w.iter().position(|x| !x.is_zero()) {
            basis.push((p, w));
            keep.push(k);
        }
    }
    keep
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinearSystem {
    /// Particular solution (free variables zero) and a nullspace basis.
    Feasible {
        particular: Vec<Rational>,
        nullspace: Vec<Vec<Rational>>,
    },
    /// Left-kernel vector `y` with `y M = 0` and `y . rhs != 0`.
    Infeasible { certificate: Vec<Rational> },
}

/// Solves `M x = rhs` exactly; `cols` is the number of unknowns.
pub fn solve_linear_system(
    matrix: &[Vec<Rational>],
    rhs: &[Rational],
    cols: usize,
) -> Result<LinearSystem, LpError> {
    let rows = matrix.len();
    if rhs.len() != rows || matrix.iter().any(|r| r.len() != cols) {
        return Err(LpError::DimensionMismatch("linear system shape".into()));
    }
    let augmented: Vec<Vec<Rational>> = matrix
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(b.clone());
            r
        })
        .collect();
    let (ints, scales) = integer_rows(&augmented);
    let mut work: Vec<Vec<BigInt>> = ints
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            r.extend((0..rows).map(|k| {
                if k == i {
                    BigInt::one()
                } else {
                    BigInt::zero()
                }
            }));
            r
        })
        .collect();
    let (pivots, _) = bareiss(&mut work, cols);
    let rank = pivots.len();
    if let Some(row) = work[rank..].iter().find(|r| !r[cols].is_zero()) {
        let mut y: Vec<BigInt> = (0..rows).map(|k| &row[cols + 1 + k] * &scales[k]).collect();
        let g = y.iter().fold(BigInt::zero(), |acc, v| acc.gcd(v));
        if !g.is_zero() && !g.is_one() {
            for v in &mut y {
                *v /= &g;
            }
        }
        return Ok(LinearSystem::Infeasible {
            certificate: y.into_iter().map(Rational::from_integer).collect(),
        });
    }
    let echelon: Vec<Vec<Rational>> = work[..rank]
        .iter()
        .map(|r| {
            r[..=cols]
                .iter()
                .cloned()
                .map(Rational::from_integer)
                .collect()
        })
        .collect();
    let back = |free_values: &[(usize, Rational)], with_rhs: bool| -> Vec<Rational> {
        let mut x = vec![Rational::zero(); cols];
        for (f, v) in free_values {
            x[*f] = v.clone();
        }
        for k in (0..rank).rev() {
            let p = pivots[k];
            let row = &echelon[k];
            let mut acc = if with_rhs {
                row[cols].clone()
            } else {
                Rational::zero()
            };
            for j in p + 1..cols {
                if !row[j].is_zero() && !x[j].is_zero() {
                    acc -= &row[j] * &x[j];
                }
            }
            x[p] = acc / &row[p];
        }
        x
    };
    let pivot_set: BTreeSet<usize> = pivots.iter().copied().collect();
    let particular = back(&[], true);
    let nullspace = (0..cols)
        .filter(|j| !pivot_set.contains(j))
        .map(|f| back(&[(f, Rational::one())], false))
        .collect();
    Ok(LinearSystem::Feasible {
        particular,
        nullspace,
    })
}

// ---------------------------------------------------------------------------
// Polytopes

/// Default bound on the number of variables for vertex enumeration.
pub const DEFAULT_VERTEX_DIM_LIMIT: usize = 24;

/// The vertex-enumeration guard, overridable by `COLMKT_MAX_VERTEX_DIM`.
pub fn vertex_dim_limit() -> usize {
    std::env::var("COLMKT_MAX_VERTEX_DIM")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_VERTEX_DIM_LIMIT)
}

/// `{x : C x = d, A x <= b, x_j >= 0 where flagged}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polytope {
    pub dim: usize,
    pub eq_rows: Vec<Vec<Rational>>,
    pub eq_rhs: Vec<Rational>,
    pub nonneg: Vec<bool>,
    pub le_rows: Vec<Vec<Rational>>,
    pub le_rhs: Vec<Rational>,
    vertices: Option<Vec<Vec<Rational>>>,
}

impl Polytope {
    /// The nonnegative orthant of dimension `dim`.
    pub fn nonnegative(dim: usize) -> Self {
        Self {
            dim,
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            nonneg: vec![true; dim],
            le_rows: Vec::new(),
            le_rhs: Vec::new(),
            vertices: None,
        }
    }

    pub fn add_eq(&mut self, row: Vec<Rational>, rhs: Rational) {
        self.vertices = None;
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, row: Vec<Rational>, rhs: Rational) {
        self.vertices = None;
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        x.len() == self.dim
            && self
                .eq_rows
                .iter()
                .zip(&self.eq_rhs)
                .all(|(r, d)| &dot(r, x) == d)
            && self
                .le_rows
                .iter()
                .zip(&self.le_rhs)
                .all(|(r, b)| &dot(r, x) <= b)
            && self
                .nonneg
                .iter()
                .zip(x)
                .all(|(&nn, v)| !nn || !v.is_negative())
    }

    /// The program `opt objective.x` over this polytope, with `extra` free
    /// variables appended after the polytope's own.
    pub fn to_lp(&self, objective: Vec<Rational>, sense: Sense, extra: usize) -> LinearProgram {
        let n = self.dim + extra;
        let pad = |row: &Vec<Rational>| {
            let mut r = row.clone();
            r.resize(n, Rational::zero());
            r
        };
        let mut lp = LinearProgram::new(n, sense);
        let mut c = objective;
        c.resize(n, Rational::zero());
        lp.set_objective(c);
        for (r, d) in self.eq_rows.iter().zip(&self.eq_rhs) {
            lp.add_eq(pad(r), d.clone());
        }
        for (r, b) in self.le_rows.iter().zip(&self.le_rhs) {
            lp.add_le(pad(r), b.clone());
        }
        for (j, &nn) in self.nonneg.iter().enumerate() {
            if nn {
                lp.nonnegative(j);
            }
        }
        lp
    }

    /// Enumerates and stores the vertices; later calls reuse them.
    pub fn cache_vertices(&mut self, limit: usize) -> Result<&[Vec<Rational>], LpError> {
        if self.vertices.is_none() {
            self.vertices = Some(enumerate_vertices(self, limit)?);
        }
        Ok(self.vertices.as_deref().expect("cached"))
    }

    pub fn cached_vertices(&self) -> Option<&[Vec<Rational>]> {
        self.vertices.as_deref()
    }
}

/// All vertices of a bounded polytope, in lexicographic order.
///
/// Adds a slack per inequality and tries every set of linearly independent
/// columns of size `rank` as a basis. Free variables are always basic.
pub fn enumerate_vertices(poly: &Polytope, limit: usize) -> Result<Vec<Vec<Rational>>, LpError> {
    if poly.dim > limit {
        return Err(LpError::DimensionLimitExceeded {
            dim: poly.dim,
            limit,
        });
    }
    let n = poly.dim;
    // Free variables keep one column each and must be basic; slacks follow.
    let width = n + poly.le_rows.len();
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    let mut rhs: Vec<Rational> = Vec::new();
    for (k, (row, b)) in poly
        .eq_rows
        .iter()
        .zip(&poly.eq_rhs)
        .chain(poly.le_rows.iter().zip(&poly.le_rhs))
        .enumerate()
    {
        let mut r = row.clone();
        r.resize(width, Rational::zero());
        if k >= poly.eq_rows.len() {
            r[n + k - poly.eq_rows.len()] = Rational::one();
        }
        rows.push(r);
        rhs.push(b.clone());
    }
    let free: Vec<bool> = (0..width).map(|c| c < n && !poly.nonneg[c]).collect();

    // Drop redundant rows; an inconsistent system has no vertices.
    let augmented: Vec<Vec<Rational>> = rows
        .iter()
        .zip(&rhs)
        .map(|(r, b)| {
            let mut a = r.clone();
            a.push(b.clone());
            a
        })
        .collect();
    let keep = independent_subset(&augmented);
    if rank(&rows) < keep.len() {
        return Ok(Vec::new());
    }
    let rows: Vec<Vec<Rational>> = keep.iter().map(|&k| rows[k].clone()).collect();
    let rhs: Vec<Rational> = keep.iter().map(|&k| rhs[k].clone()).collect();
    let m = rows.len();

    let column_vectors: Vec<Vec<Rational>> = (0..width)
        .map(|c| rows.iter().map(|r| r[c].clone()).collect())
        .collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    let mut reduced: Vec<(usize, Vec<Rational>)> = Vec::with_capacity(m);
    for c in (0..width).filter(|&c| free[c]) {
        match reduce_against(&reduced, &column_vectors[c]) {
            Some(entry) => {
                chosen.push(c);
                reduced.push(entry);
            }
            // a free direction in the kernel means a line, not a polytope
            None => return Ok(Vec::new()),
        }
    }
    let candidates: Vec<usize> = (0..width).filter(|&c| !free[c]).collect();
    let mut found: BTreeSet<Vec<Rational>> = BTreeSet::new();
    let mut emit = |basis: &[usize]| {
        let basis_matrix: Vec<Vec<Rational>> = rows
            .iter()
            .map(|r| basis.iter().map(|&c| r[c].clone()).collect())
            .collect();
        if let Ok(LinearSystem::Feasible { particular, .. }) =
            solve_linear_system(&basis_matrix, &rhs, basis.len())
        {
            if basis
                .iter()
                .zip(&particular)
                .all(|(&c, v)| free[c] || !v.is_negative())
            {
                let mut x = vec![Rational::zero(); n];
                for (&c, v) in basis.iter().zip(particular) {
                    if c < n {
                        x[c] = v;
                    }
                }
                found.insert(x);
            }
        }
    };
    search(
        &candidates,
        0,
        m,
        &column_vectors,
        &mut chosen,
        &mut reduced,
        &mut emit,
    );
    Ok(found.into_iter().collect())
}

fn reduce_against(
    reduced: &[(usize, Vec<Rational>)],
    column: &[Rational],
) -> Option<(usize, Vec<Rational>)> {
    let mut w = column.to_vec();
    for (p, b) in reduced {
        if !w[*p].is_zero() {
            let f = &w[*p] / &b[*p];
            for (wj, bj) in w.iter_mut().zip(b) {
                if !bj.is_zero() {
                    *wj -= &f * bj;
                }
            }
        }
    }
    w.iter().position(|x| !x.is_zero()).map(|p| (p, w))
}

fn search(
    candidates: &[usize],
    start: usize,
    m: usize,
    column_vectors: &[Vec<Rational>],
    chosen: &mut Vec<usize>,
    reduced: &mut Vec<(usize, Vec<Rational>)>,
    emit: &mut dyn FnMut(&[usize]),
) {
    if chosen.len() == m {
        emit(chosen);
        return;
    }
    let remaining = m - chosen.len();
    for idx in start..candidates.len() {
        if candidates.len() - idx < remaining {
            break;
        }
        let c = candidates[idx];
        let Some(entry) = reduce_against(reduced, &column_vectors[c]) else {
            continue;
        };
        chosen.push(c);
        reduced.push(entry);
        search(
            candidates,
            idx + 1,
            m,
            column_vectors,
            chosen,
            reduced,
            emit,
        );
        chosen.pop();
        reduced.pop();
    }
}

/// Dimension of the affine hull, given a point where no inequality is tight.
pub fn affine_dimension(poly: &Polytope, interior: &[Rational]) -> Result<usize, LpError> {
    if interior.len() != poly.dim {
        return Err(LpError::DimensionMismatch("interior point length".into()));
    }
    for (k, (r, d)) in poly.eq_rows.iter().zip(&poly.eq_rhs).enumerate() {
        if &dot(r, interior) != d {
            return Err(LpError::PointNotStrictlyInterior(format!(
                "equality {k} violated"
            )));
        }
    }
    for (j, (&nn, v)) in poly.nonneg.iter().zip(interior).enumerate() {
        if nn && !v.is_positive() {
            return Err(LpError::PointNotStrictlyInterior(format!(
                "coordinate {j} is not positive"
            )));
        }
    }
    for (k, (r, b)) in poly.le_rows.iter().zip(&poly.le_rhs).enumerate() {
        if &dot(r, interior) >= b {
            return Err(LpError::PointNotStrictlyInterior(format!(
                "inequality {k} is tight"
            )));
        }
    }
    Ok(poly.dim - rank(&poly.eq_rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn v(xs: &[i64]) -> Vec<Rational> {
        xs.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn min_x_with_lower_bound() {
        let mut lp = LinearProgram::new(1, Sense::Minimize);
        lp.set_objective(v(&[1]));
        lp.add_ge(v(&[1]), int(3));
        let opt = solve_lp(&lp).unwrap();
        let o = opt.optimum().unwrap();
        assert_eq!(o.value, int(3));
        assert_eq!(o.primal, v(&[3]));
        assert!(verify_dual(&lp, &o.dual, &o.value));
    }

    #[test]
    fn max_on_simplex_edge() {
        let mut lp = LinearProgram::new(2, Sense::Maximize);
        lp.set_objective(v(&[1, 1]));
        lp.add_eq(v(&[1, 1]), int(1));
        lp.nonnegative(0);
        lp.nonnegative(1);
        let o = solve_lp(&lp).unwrap();
        let o = o.optimum().unwrap();
        assert_eq!(o.value, int(1));
        assert!(verify_dual(&lp, &o.dual, &o.value));
    }

    #[test]
    fn infeasible_has_farkas_vector() {
        let mut lp = LinearProgram::new(1, Sense::Minimize);
        lp.add_le(v(&[1]), int(-1));
        lp.nonnegative(0);
        match solve_lp(&lp).unwrap() {
            LpResult::Infeasible(cert) => assert!(verify_farkas(&lp, &cert)),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_has_ray() {
        let mut lp = LinearProgram::new(2, Sense::Maximize);
        lp.set_objective(v(&[1, 0]));
        lp.add_le(v(&[-1, 1]), int(2));
        match solve_lp(&lp).unwrap() {
            LpResult::Unbounded(ray) => assert!(verify_ray(&lp, &ray)),
            other => panic!("expected unbounded, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mut lp = LinearProgram::new(2, Sense::Minimize);
        lp.add_eq(v(&[1]), int(0));
        assert!(matches!(solve_lp(&lp), Err(LpError::DimensionMismatch(_))));
    }

    #[test]
    fn linear_systems() {
        let id = vec![v(&[1, 0]), v(&[0, 1])];
        assert_eq!(
            solve_linear_system(&id, &v(&[3, -4]), 2).unwrap(),
            LinearSystem::Feasible {
                particular: v(&[3, -4]),
                nullspace: vec![]
            }
        );
        match solve_linear_system(&[v(&[1]), v(&[1])], &v(&[0, 1]), 1).unwrap() {
            LinearSystem::Infeasible { certificate } => {
                assert_eq!(&certificate[0] + &certificate[1], int(0));
                assert!(!certificate[1].is_zero());
            }
            other => panic!("{other:?}"),
        }
        let m = vec![
            vec![int(1), ratio(1, 2), int(0)],
            vec![int(2), int(1), int(1)],
        ];
        match solve_linear_system(&m, &v(&[1, 3]), 3).unwrap() {
            LinearSystem::Feasible {
                particular,
                nullspace,
            } => {
                assert_eq!(nullspace.len(), 1);
                for (row, b) in m.iter().zip(v(&[1, 3])) {
                    assert_eq!(dot(row, &particular), b);
                    assert!(dot(row, &nullspace[0]).is_zero());
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn determinants() {
        let id: Vec<Vec<Rational>> = (0..6)
            .map(|i| (0..6).map(|j| int((i == j) as i64)).collect())
            .collect();
        assert_eq!(determinant(&id).unwrap(), int(1));
        let rep = vec![v(&[1, 2, 3]), v(&[4, 5, 6]), v(&[1, 2, 3])];
        assert_eq!(determinant(&rep).unwrap(), int(0));
        let swapped = vec![v(&[0, 1]), v(&[1, 0])];
        assert_eq!(determinant(&swapped).unwrap(), int(-1));
        let frac = vec![vec![ratio(1, 2), int(1)], vec![int(3), ratio(2, 3)]];
        assert_eq!(determinant(&frac).unwrap(), ratio(1, 3) - int(3));
        assert!(matches!(
            determinant(&[v(&[1, 2])]),
            Err(LpError::NotSquare { .. })
        ));
    }

    #[test]
    fn simplex_vertices_and_dimension() {
        let mut p = Polytope::nonnegative(3);
        p.add_eq(v(&[1, 1, 1]), int(1));
        let verts = enumerate_vertices(&p, 24).unwrap();
        assert_eq!(verts, vec![v(&[0, 0, 1]), v(&[0, 1, 0]), v(&[1, 0, 0])]);
        let c = ratio(1, 3);
        assert_eq!(affine_dimension(&p, &[c.clone(), c.clone(), c]).unwrap(), 2);
        assert!(matches!(
            affine_dimension(&p, &v(&[1, 0, 0])),
            Err(LpError::PointNotStrictlyInterior(_))
        ));
    }

    #[test]
    fn single_point_polytope() {
        let mut p = Polytope::nonnegative(2);
        p.add_eq(v(&[1, 1]), int(1));
        p.add_eq(v(&[1, -1]), int(0));
        assert_eq!(
            enumerate_vertices(&p, 24).unwrap(),
            vec![vec![ratio(1, 2), ratio(1, 2)]]
        );
        assert!(matches!(
            enumerate_vertices(&p, 1),
            Err(LpError::DimensionLimitExceeded { dim: 2, limit: 1 })
        ));
    }

    #[test]
    fn box_with_free_variables() {
        let mut p = Polytope::nonnegative(2);
        p.nonneg = vec![false, false];
        for (r, b) in [
            (v(&[1, 0]), 1),
            (v(&[-1, 0]), 1),
            (v(&[0, 1]), 2),
            (v(&[0, -1]), 0),
        ] {
            p.add_le(r, int(b));
        }
        let verts = enumerate_vertices(&p, 24).unwrap();
        assert_eq!(
            verts,
            vec![v(&[-1, 0]), v(&[-1, 2]), v(&[1, 0]), v(&[1, 2])]
        );
    }
}
