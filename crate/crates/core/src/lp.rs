//! Dense two-phase simplex with Bland's rule, generic over the scalar
//! field so the same routine runs in `f64` and in exact rationals.

use num_traits::{Num, Signed};

/// Scalars the simplex can pivot on.
pub trait LpScalar: Num + Signed + Clone + PartialOrd {}
impl<T: Num + Signed + Clone + PartialOrd> LpScalar for T {}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { x: Vec<T>, value: T },
    Infeasible,
    Unbounded,
}

struct Tableau<T> {
    /// rows × (cols + 1); the last column is the right-hand side.
    t: Vec<Vec<T>>,
    basis: Vec<usize>,
    cols: usize,
}

impl<T: LpScalar> Tableau<T> {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col].clone();
        for v in self.t[row].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row || line[col].is_zero() {
                continue;
            }
            let f = line[col].clone();
            for (v, pv) in line.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * pv.clone();
            }
        }
        self.basis[row] = col;
    }

    /// Minimises `cost · x` over columns `< allowed`; `Err(())` when unbounded.
    fn run(&mut self, cost: &[T], allowed: usize, eps: &T) -> Result<(), ()> {
        loop {
            let reduced = |j: usize| {
                self.basis.iter().enumerate().fold(cost[j].clone(), |acc, (i, &b)| {
                    acc - cost[b].clone() * self.t[i][j].clone()
                })
            };
            let Some(enter) = (0..allowed)
                .filter(|j| !self.basis.contains(j))
                .find(|&j| reduced(j) < -eps.clone())
            else {
                return Ok(());
            };
            let rhs = self.cols;
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.t.len() {
                let a = &self.t[i][enter];
                if *a <= *eps {
                    continue;
                }
                let ratio = self.t[i][rhs].clone() / a.clone();
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr || (ratio == lr && self.basis[i] < self.basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
            let Some((row, _)) = leave else {
                return Err(());
            };
            self.pivot(row, enter);
        }
    }
}

/// Maximises `c · x` subject to `a x = b`, `x ≥ 0`.
///
/// `eps` is the pivot and feasibility threshold: zero for exact scalars.
pub fn maximize<T: LpScalar>(c: &[T], a: &[Vec<T>], b: &[T], eps: &T) -> LpOutcome<T> {
    let n = c.len();
    let rows = a.len();
    let width = n + rows;
    let mut t = Vec::with_capacity(rows);
    for (row, rhs) in a.iter().zip(b) {
        let flip = rhs.is_negative();
        let mut line: Vec<T> = row.iter().map(|v| if flip { -v.clone() } else { v.clone() }).collect();
        line.resize(width + 1, T::zero());
        line[width] = if flip { -rhs.clone() } else { rhs.clone() };
        t.push(line);
    }
    for (i, line) in t.iter_mut().enumerate() {
        line[n + i] = T::one();
    }
    let mut tab = Tableau {
        t,
        basis: (n..width).collect(),
        cols: width,
    };

    let mut phase1 = vec![T::zero(); width];
    for v in phase1.iter_mut().skip(n) {
        *v = T::one();
    }
    tab.run(&phase1, width, eps)
        .expect("phase one is bounded below by zero");
    let infeasibility = tab
        .basis
        .iter()
        .enumerate()
        .filter(|&(_, &b)| b >= n)
        .fold(T::zero(), |acc, (i, _)| acc + tab.t[i][width].clone());
    if infeasibility > *eps {
        return LpOutcome::Infeasible;
    }
    // move zero-level artificials out of the basis where possible
    for i in 0..rows {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.t[i][j].abs() > *eps && !tab.basis.contains(&j)) {
                tab.pivot(i, j);
            }
        }
    }

    let mut phase2 = vec![T::zero(); width];
    for (v, ci) in phase2.iter_mut().zip(c) {
        *v = -ci.clone();
    }
    if tab.run(&phase2, n, eps).is_err() {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![T::zero(); n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.t[i][width].clone();
        }
    }
    let value = x
        .iter()
        .zip(c)
        .fold(T::zero(), |acc, (xi, ci)| acc + xi.clone() * ci.clone());
    LpOutcome::Optimal { x, value }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Rational;

    #[test]
    fn small_lp() {
        // max x + y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let a = vec![vec![1.0, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]];
        let out = maximize(&[1.0, 1.0, 0.0, 0.0], &a, &[4.0, 6.0], &1e-12);
        match out {
            LpOutcome::Optimal { x, value } => {
                assert!((value - 2.8).abs() < 1e-12);
                assert!((x[0] - 1.6).abs() < 1e-12 && (x[1] - 1.2).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let a = vec![vec![1.0, 1.0]];
        assert_eq!(maximize(&[0.0, 0.0], &a, &[-1.0], &1e-12), LpOutcome::Infeasible);
        let a = vec![vec![1.0, -1.0]];
        assert_eq!(maximize(&[1.0, 0.0], &a, &[1.0], &1e-12), LpOutcome::Unbounded);
    }

    #[test]
    fn exact_with_redundant_rows() {
        let q = |n: i64| Rational::from_integer(n.into());
        // x + y = 1 twice, max x
        let a = vec![vec![q(1), q(1)], vec![q(1), q(1)]];
        match maximize(&[q(1), q(0)], &a, &[q(1), q(1)], &q(0)) {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, q(1)),
            other => panic!("{other:?}"),
        }
    }
}
