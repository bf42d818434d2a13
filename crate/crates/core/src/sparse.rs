//! Compressed sparse row storage with a fixed, structurally symmetric
//! pattern, and the LU-backed linear solve used by Newton.
//!
//! Factorization is delegated to `faer`'s supernodal sparse LU with partial
//! pivoting. The symbolic analysis depends only on the pattern, so it is
//! computed once per pattern and reused for every Newton step.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, NumericLu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par};

use crate::error::{Error, Result};
use crate::Real;

/// Structurally symmetric CSR pattern including the full diagonal.
#[derive(Debug)]
pub struct SparsePattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// `transpose_slot[s]` is the slot of `(c, r)` when slot `s` holds `(r, c)`.
    transpose_slot: Vec<usize>,
    symbolic: OnceLock<std::result::Result<SymbolicLu<usize>, String>>,
}

impl SparsePattern {
    /// Builds the pattern from undirected couplings `(i, j)`; the diagonal is always present.
    pub fn from_couplings(n: usize, couplings: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for (i, j) in couplings {
            rows[i].push(j);
            rows[j].push(i);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let mut pattern = SparsePattern { n, row_ptr, col_idx, transpose_slot: Vec::new(), symbolic: OnceLock::new() };
        let transpose = (0..n)
            .flat_map(|r| (pattern.row_ptr[r]..pattern.row_ptr[r + 1]).map(move |s| (r, s)))
            .map(|(r, s)| pattern.slot(pattern.col_idx[s], r).expect("pattern is symmetric"))
            .collect();
        pattern.transpose_slot = transpose;
        pattern
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn slot(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_ptr[r];
        self.row(r).binary_search(&c).ok().map(|k| start + k)
    }

    fn symbolic_lu(&self) -> Result<&SymbolicLu<usize>> {
        let res = self.symbolic.get_or_init(|| {
            let sym = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.row_ptr, None, &self.col_idx);
            factorize_symbolic_lu(sym, Default::default()).map_err(|e| format!("{e:?}"))
        });
        res.as_ref().map_err(|e| Error::LinearSolveFailed(e.clone()))
    }
}

/// Scalars with a sparse LU backend.
pub trait LinearSolve: Sized + Copy {
    #[doc(hidden)]
    type Factor: Send;

    #[doc(hidden)]
    fn lu_factorize(
        symbolic: &SymbolicLu<usize>,
        csc: SparseColMatRef<'_, usize, Self>,
    ) -> std::result::Result<Self::Factor, String>;

    #[doc(hidden)]
    fn lu_solve_in_place(symbolic: &SymbolicLu<usize>, factor: &Self::Factor, rhs: &mut [Self]);
}

macro_rules! impl_linear_solve {
    ($t:ty) => {
        impl LinearSolve for $t {
            type Factor = NumericLu<usize, $t>;

            fn lu_factorize(
                symbolic: &SymbolicLu<usize>,
                csc: SparseColMatRef<'_, usize, $t>,
            ) -> std::result::Result<Self::Factor, String> {
                let mut numeric = NumericLu::<usize, $t>::new();
                let req = symbolic.factorize_numeric_lu_scratch::<$t>(Par::Seq, Default::default());
                let mut buf = MemBuffer::try_new(req).map_err(|e| format!("{e:?}"))?;
                symbolic
                    .factorize_numeric_lu(&mut numeric, csc, Par::Seq, MemStack::new(&mut buf), Default::default())
                    .map_err(|e| format!("{e:?}"))?;
                Ok(numeric)
            }

            fn lu_solve_in_place(symbolic: &SymbolicLu<usize>, factor: &Self::Factor, rhs: &mut [$t]) {
                let n = rhs.len();
                let req = symbolic.solve_in_place_scratch::<$t>(1, Par::Seq);
                let mut buf = MemBuffer::new(req);
                let lu = LuRef::<'_, usize, $t>::new_unchecked(symbolic, factor);
                let rhs = MatMut::from_column_major_slice_mut(rhs, n, 1);
                lu.solve_in_place_with_conj(Conj::No, rhs, Par::Seq, MemStack::new(&mut buf));
            }
        }
    };
}

impl_linear_solve!(f32);
impl_linear_solve!(f64);

/// Square sparse matrix over a shared [`SparsePattern`].
#[derive(Clone, Debug)]
pub struct CsrMatrix<T> {
    pattern: Arc<SparsePattern>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn zeros(pattern: Arc<SparsePattern>) -> Self {
        let values = vec![T::zero(); pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.pattern.slot(r, c).map_or(T::zero(), |s| self.values[s])
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.pattern.n)
            .map(|r| {
                let (a, b) = (self.pattern.row_ptr[r], self.pattern.row_ptr[r + 1]);
                (a..b).map(|s| self.values[s] * x[self.pattern.col_idx[s]]).sum()
            })
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `max |a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> T {
        self.values
            .iter()
            .zip(&self.pattern.transpose_slot)
            .fold(T::zero(), |m, (&v, &t)| m.max((v - self.values[t]).abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.pattern.n;
        let mut d = vec![vec![T::zero(); n]; n];
        for (r, row) in d.iter_mut().enumerate() {
            for s in self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1] {
                row[self.pattern.col_idx[s]] = self.values[s];
            }
        }
        d
    }

    /// Coordinate listing, one `row col value` triple per line (0-based).
    pub fn write_coordinate(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "% {} {} {}", self.pattern.n, self.pattern.n, self.pattern.nnz())?;
        for r in 0..self.pattern.n {
            for s in self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1] {
                writeln!(w, "{} {} {:e}", r, self.pattern.col_idx[s], self.values[s])?;
            }
        }
        Ok(())
    }

    /// `max_r Σ_c |a_rc|`.
    pub fn norm_inf(&self) -> T {
        (0..self.pattern.n)
            .map(|r| self.values[self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1]].iter().map(|v| v.abs()).sum())
            .fold(T::zero(), T::max)
    }

    /// Solves `A x = b` by sparse LU with iterative refinement until
    /// `‖b − A x‖₂ ≤ rel_tol · ‖b‖₂`.
    ///
    /// When refinement stagnates before that, the best iterate is accepted
    /// provided its normwise backward error
    /// `‖b − Ax‖_∞ / (‖A‖_∞‖x‖_∞ + ‖b‖_∞)` is within `BACKWARD_ERROR_ULPS`
    /// machine epsilons.
    pub fn solve(&self, b: &[T], rel_tol: T) -> Result<Vec<T>> {
        let n = self.pattern.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        let symbolic = self.pattern.symbolic_lu()?;
        let csc_values: Vec<T> = self.pattern.transpose_slot.iter().map(|&t| self.values[t]).collect();
        let csc = SparseColMatRef::new(
            SymbolicSparseColMatRef::new_checked(n, n, &self.pattern.row_ptr, None, &self.pattern.col_idx),
            &csc_values,
        );
        let factor = T::lu_factorize(symbolic, csc).map_err(Error::LinearSolveFailed)?;

        let b_norm = norm2(b);
        let mut x = b.to_vec();
        T::lu_solve_in_place(symbolic, &factor, &mut x);
        let mut best: Option<(T, Vec<T>, Vec<T>)> = None;
        for _ in 0..MAX_REFINEMENTS {
            let ax = self.mul_vec(&x);
            let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
            let r_norm = norm2(&r);
            if !r_norm.is_finite() {
                return Err(Error::LinearSolveFailed("non-finite solution".into()));
            }
            if r_norm <= rel_tol * b_norm {
                return Ok(x);
            }
            let improved = best.as_ref().is_none_or(|(b_res, _, _)| r_norm < T::lit(0.5) * *b_res);
            if !improved {
                break;
            }
            let mut d = r.clone();
            T::lu_solve_in_place(symbolic, &factor, &mut d);
            let next: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + di).collect();
            best = Some((r_norm, x, r));
            x = next;
        }
        let (r_norm, x, r) = best.expect("at least one refinement pass");
        let backward = norm_inf(&r) / (self.norm_inf() * norm_inf(&x) + norm_inf(b));
        if backward <= T::lit(BACKWARD_ERROR_ULPS) * T::epsilon() {
            return Ok(x);
        }
        Err(Error::LinearSolveFailed(format!(
            "relative residual {:e} above {:e} (backward error {:e})",
            (r_norm / b_norm).as_f64(),
            rel_tol.as_f64(),
            backward.as_f64()
        )))
    }
}

const MAX_REFINEMENTS: usize = 6;
const BACKWARD_ERROR_ULPS: f64 = 64.0;

pub fn norm2<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

pub fn norm_inf<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_pattern(n: usize) -> Arc<SparsePattern> {
        Arc::new(SparsePattern::from_couplings(n, (0..n - 1).map(|i| (i, i + 1))))
    }

    #[test]
    fn transpose_slots_are_involutive() {
        let p = path_pattern(6);
        for (s, &t) in p.transpose_slot.iter().enumerate() {
            assert_eq!(p.transpose_slot[t], s);
        }
        assert_eq!(p.nnz(), 6 + 2 * 5);
    }

    #[test]
    fn solves_nonsymmetric_tridiagonal() {
        let n = 50;
        let p = path_pattern(n);
        let mut a = CsrMatrix::<f64>::zeros(p.clone());
        for i in 0..n {
            a.values_mut()[p.slot(i, i).unwrap()] = 3.0;
            if i + 1 < n {
                a.values_mut()[p.slot(i, i + 1).unwrap()] = -1.3;
                a.values_mut()[p.slot(i + 1, i).unwrap()] = -0.6;
            }
        }
        assert!(a.max_asymmetry() > 0.5);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x_true);
        let x = a.solve(&b, 1e-12).unwrap();
        let err = x.iter().zip(&x_true).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        assert!(err < 1e-12, "err {err}");
    }

    #[test]
    fn single_precision_solve() {
        let n = 20;
        let p = path_pattern(n);
        let mut a = CsrMatrix::<f32>::zeros(p.clone());
        for i in 0..n {
            a.values_mut()[p.slot(i, i).unwrap()] = 2.5;
            if i + 1 < n {
                a.values_mut()[p.slot(i, i + 1).unwrap()] = -1.0;
                a.values_mut()[p.slot(i + 1, i).unwrap()] = -1.0;
            }
        }
        let b = vec![1.0f32; n];
        let x = a.solve(&b, f32::default_linear_tol()).unwrap();
        let r: Vec<f32> = a.mul_vec(&x).iter().zip(&b).map(|(u, v)| u - v).collect();
        assert!(norm2(&r) < 1e-4);
    }

    #[test]
    fn coordinate_dump_lists_every_entry() {
        let p = path_pattern(3);
        let a = CsrMatrix::<f64>::zeros(p);
        let mut out = Vec::new();
        a.write_coordinate(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + 7);
    }
}
