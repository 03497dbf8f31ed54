//! Exact integer linear algebra: Smith normal form, kernels and solving.
//!
//! All the quotient-group and kernel machinery of the dimension-group module
//! runs through here. Matrices are tiny (a handful of towers per level), so a
//! dense representation with `i128` entries and checked arithmetic is enough;
//! any overflow aborts with an error instead of silently wrapping.
//!
//! The Smith normal form carries both unimodular transforms and their
//! inverses, so results double as certificates: a checker only needs to
//! verify `S * A * T == D` and `S * Sinv == I`, `T * Tinv == I`.

use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Dense integer matrix, row major.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<i128>,
}

impl std::fmt::Debug for IMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "IMat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[r * self.cols..(r + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

impl IMat {
    pub fn zero(rows: usize, cols: usize) -> IMat {
        IMat { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> IMat {
        let mut m = IMat::zero(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<i128>>) -> IMat {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "jagged rows");
        IMat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn row(&self, r: usize) -> &[i128] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<i128> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn mul(&self, other: &IMat) -> Result<IMat> {
        if self.cols != other.rows {
            return Err(Error::contract(format!(
                "matrix shape mismatch: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = IMat::zero(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == 0 {
                    continue;
                }
                for c in 0..other.cols {
                    let term = a.checked_mul(other[(k, c)]).ok_or(Error::Overflow("matrix multiply"))?;
                    out[(r, c)] = out[(r, c)].checked_add(term).ok_or(Error::Overflow("matrix multiply"))?;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[i128]) -> Result<Vec<i128>> {
        if self.cols != v.len() {
            return Err(Error::contract("matrix/vector shape mismatch"));
        }
        let mut out = vec![0i128; self.rows];
        for r in 0..self.rows {
            let mut acc: i128 = 0;
            for c in 0..self.cols {
                let term = self[(r, c)].checked_mul(v[c]).ok_or(Error::Overflow("matrix apply"))?;
                acc = acc.checked_add(term).ok_or(Error::Overflow("matrix apply"))?;
            }
            out[r] = acc;
        }
        Ok(out)
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| (0..self.cols).all(|c| self[(r, c)] == i128::from(r == c)))
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|r| (0..self.cols).all(|c| r == c || self[(r, c)] == 0))
    }

    /// Strictly positive in every entry.
    pub fn is_strictly_positive(&self) -> bool {
        self.data.iter().all(|&x| x > 0)
    }
}

impl std::ops::Index<(usize, usize)> for IMat {
    type Output = i128;
    fn index(&self, (r, c): (usize, usize)) -> &i128 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut i128 {
        &mut self.data[r * self.cols + c]
    }
}

/// Smith normal form `S * A * T = D` with unimodular `S`, `T`.
///
/// `d` is diagonal with non-negative entries satisfying the divisibility
/// chain `d[0] | d[1] | ...`. The inverse transforms are carried so the
/// factorization can be re-verified without re-running the reduction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snf {
    pub d: IMat,
    pub s: IMat,
    pub s_inv: IMat,
    pub t: IMat,
    pub t_inv: IMat,
}

impl Snf {
    /// Diagonal entries, padded by zeros up to `min(rows, cols)`.
    pub fn diagonal(&self) -> Vec<i128> {
        (0..self.d.rows.min(self.d.cols)).map(|i| self.d[(i, i)]).collect()
    }

    /// Number of nonzero invariant factors.
    pub fn rank(&self) -> usize {
        self.diagonal().iter().filter(|&&x| x != 0).count()
    }

    /// Re-verify the factorization against the original matrix.
    pub fn verify(&self, a: &IMat) -> Result<bool> {
        let sat = self.s.mul(a)?.mul(&self.t)?;
        Ok(sat == self.d
            && self.s.mul(&self.s_inv)?.is_identity()
            && self.t.mul(&self.t_inv)?.is_identity()
            && self.d.is_diagonal())
    }
}

struct SnfCalc {
    a: IMat,
    s: IMat,
    s_inv: IMat,
    t: IMat,
    t_inv: IMat,
}

impl SnfCalc {
    fn new(a: IMat) -> SnfCalc {
        let (r, c) = (a.rows, a.cols);
        SnfCalc {
            a,
            s: IMat::identity(r),
            s_inv: IMat::identity(r),
            t: IMat::identity(c),
            t_inv: IMat::identity(c),
        }
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for c in 0..self.a.cols {
            let tmp = self.a[(i, c)];
            self.a[(i, c)] = self.a[(j, c)];
            self.a[(j, c)] = tmp;
        }
        for c in 0..self.s.cols {
            let tmp = self.s[(i, c)];
            self.s[(i, c)] = self.s[(j, c)];
            self.s[(j, c)] = tmp;
        }
        for r in 0..self.s_inv.rows {
            let tmp = self.s_inv[(r, i)];
            self.s_inv[(r, i)] = self.s_inv[(r, j)];
            self.s_inv[(r, j)] = tmp;
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for r in 0..self.a.rows {
            let tmp = self.a[(r, i)];
            self.a[(r, i)] = self.a[(r, j)];
            self.a[(r, j)] = tmp;
        }
        for r in 0..self.t.rows {
            let tmp = self.t[(r, i)];
            self.t[(r, i)] = self.t[(r, j)];
            self.t[(r, j)] = tmp;
        }
        for c in 0..self.t_inv.cols {
            let tmp = self.t_inv[(i, c)];
            self.t_inv[(i, c)] = self.t_inv[(j, c)];
            self.t_inv[(j, c)] = tmp;
        }
    }

    /// row_i += q * row_k
    fn add_row(&mut self, i: usize, k: usize, q: i128) -> Result<()> {
        for c in 0..self.a.cols {
            let term = q.checked_mul(self.a[(k, c)]).ok_or(Error::Overflow("snf row op"))?;
            self.a[(i, c)] = self.a[(i, c)].checked_add(term).ok_or(Error::Overflow("snf row op"))?;
        }
        for c in 0..self.s.cols {
            let term = q.checked_mul(self.s[(k, c)]).ok_or(Error::Overflow("snf row op"))?;
            self.s[(i, c)] = self.s[(i, c)].checked_add(term).ok_or(Error::Overflow("snf row op"))?;
        }
        // S_inv gets the inverse column operation: col_k -= q * col_i.
        for r in 0..self.s_inv.rows {
            let term = q.checked_mul(self.s_inv[(r, i)]).ok_or(Error::Overflow("snf row op"))?;
            self.s_inv[(r, k)] =
                self.s_inv[(r, k)].checked_sub(term).ok_or(Error::Overflow("snf row op"))?;
        }
        Ok(())
    }

    /// col_j += q * col_k
    fn add_col(&mut self, j: usize, k: usize, q: i128) -> Result<()> {
        for r in 0..self.a.rows {
            let term = q.checked_mul(self.a[(r, k)]).ok_or(Error::Overflow("snf col op"))?;
            self.a[(r, j)] = self.a[(r, j)].checked_add(term).ok_or(Error::Overflow("snf col op"))?;
        }
        for r in 0..self.t.rows {
            let term = q.checked_mul(self.t[(r, k)]).ok_or(Error::Overflow("snf col op"))?;
            self.t[(r, j)] = self.t[(r, j)].checked_add(term).ok_or(Error::Overflow("snf col op"))?;
        }
        // T_inv gets the inverse row operation: row_k -= q * row_j.
        for c in 0..self.t_inv.cols {
            let term = q.checked_mul(self.t_inv[(j, c)]).ok_or(Error::Overflow("snf col op"))?;
            self.t_inv[(k, c)] =
                self.t_inv[(k, c)].checked_sub(term).ok_or(Error::Overflow("snf col op"))?;
        }
        Ok(())
    }

    fn negate_row(&mut self, i: usize) {
        for c in 0..self.a.cols {
            self.a[(i, c)] = -self.a[(i, c)];
        }
        for c in 0..self.s.cols {
            self.s[(i, c)] = -self.s[(i, c)];
        }
        for r in 0..self.s_inv.rows {
            self.s_inv[(r, i)] = -self.s_inv[(r, i)];
        }
    }

    /// Smallest nonzero entry (by absolute value, then position) in the
    /// trailing submatrix starting at (k, k).
    fn find_pivot(&self, k: usize) -> Option<(usize, usize)> {
        let mut best: Option<(i128, usize, usize)> = None;
        for r in k..self.a.rows {
            for c in k..self.a.cols {
                let v = self.a[(r, c)].abs();
                if v != 0 && best.is_none_or(|(bv, _, _)| v < bv) {
                    best = Some((v, r, c));
                }
            }
        }
        best.map(|(_, r, c)| (r, c))
    }

    fn process(&mut self) -> Result<()> {
        let n = self.a.rows.min(self.a.cols);
        let mut k = 0;
        while k < n {
            let Some((pr, pc)) = self.find_pivot(k) else { break };
            self.swap_rows(k, pr);
            self.swap_cols(k, pc);
            // Clear row k and column k.
            loop {
                let mut dirty = false;
                for r in (k + 1)..self.a.rows {
                    if self.a[(r, k)] != 0 {
                        let q = self.a[(r, k)].div_euclid(self.a[(k, k)]);
                        self.add_row(r, k, -q)?;
                        if self.a[(r, k)] != 0 {
                            // Remainder became the smaller pivot candidate.
                            self.swap_rows(k, r);
                            dirty = true;
                        }
                    }
                }
                for c in (k + 1)..self.a.cols {
                    if self.a[(k, c)] != 0 {
                        let q = self.a[(k, c)].div_euclid(self.a[(k, k)]);
                        self.add_col(c, k, -q)?;
                        if self.a[(k, c)] != 0 {
                            self.swap_cols(k, c);
                            dirty = true;
                        }
                    }
                }
                if !dirty {
                    break;
                }
            }
            // Divisibility fix-up: pivot must divide the whole submatrix.
            let mut fixed = true;
            'scan: for r in (k + 1)..self.a.rows {
                for c in (k + 1)..self.a.cols {
                    if self.a[(r, c)] % self.a[(k, k)] != 0 {
                        self.add_row(k, r, 1)?;
                        fixed = false;
                        break 'scan;
                    }
                }
            }
            if !fixed {
                continue; // redo the same k with the new row
            }
            if self.a[(k, k)] < 0 {
                self.negate_row(k);
            }
            k += 1;
        }
        Ok(())
    }
}

/// Compute the Smith normal form of `a`.
pub fn smith_normal_form(a: &IMat) -> Result<Snf> {
    let mut calc = SnfCalc::new(a.clone());
    calc.process()?;
    let snf = Snf { d: calc.a, s: calc.s, s_inv: calc.s_inv, t: calc.t, t_inv: calc.t_inv };
    debug_assert!(snf.verify(a).unwrap_or(false));
    Ok(snf)
}

/// Basis of the integer kernel `{x : A x = 0}`, as column vectors.
pub fn kernel_basis(a: &IMat) -> Result<Vec<Vec<i128>>> {
    let snf = smith_normal_form(a)?;
    let diag = snf.diagonal();
    let mut basis = Vec::new();
    for j in 0..a.cols {
        let dj = if j < diag.len() { diag[j] } else { 0 };
        if dj == 0 {
            basis.push(snf.t.col(j));
        }
    }
    Ok(basis)
}

/// Solve `A x = b` over the integers. Returns `None` when no integer
/// solution exists.
pub fn solve(a: &IMat, b: &[i128]) -> Result<Option<Vec<i128>>> {
    if b.len() != a.rows {
        return Err(Error::contract("solve: rhs length mismatch"));
    }
    let snf = smith_normal_form(a)?;
    let z = snf.s.mul_vec(b)?;
    let diag = snf.diagonal();
    let mut y = vec![0i128; a.cols];
    for i in 0..a.rows {
        let di = if i < diag.len() { diag[i] } else { 0 };
        if di == 0 {
            if z[i] != 0 {
                return Ok(None);
            }
        } else {
            if z[i] % di != 0 {
                return Ok(None);
            }
            if i < a.cols {
                y[i] = z[i] / di;
            }
        }
    }
    let x = snf.t.mul_vec(&y)?;
    debug_assert_eq!(a.mul_vec(&x)?, b.to_vec());
    Ok(Some(x))
}

/// Invariant factors of the quotient `Z^n / L` where `L` is spanned by the
/// columns of `gens` (an `n x k` matrix). Returned as
/// `(torsion_factors > 1, free_rank)`.
pub fn quotient_invariant_factors(gens: &IMat) -> Result<(Vec<i128>, usize)> {
    let snf = smith_normal_form(gens)?;
    let diag = snf.diagonal();
    let torsion: Vec<i128> = diag.iter().copied().filter(|&d| d > 1).collect();
    let rank = diag.iter().filter(|&&d| d != 0).count();
    Ok((torsion, gens.rows - rank))
}
