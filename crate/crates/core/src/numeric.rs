//! Small numeric kernels shared by the solver and the validators.

use nalgebra::{DMatrix, DVector};

/// Error-free transformation of a sum: `a + b = s + e` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free transformation of a product via FMA.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Compensated accumulator (Ogita, Rump and Oishi "Dot2").
#[derive(Default, Clone, Copy)]
pub(crate) struct Dot2 {
    sum: f64,
    err: f64,
}

impl Dot2 {
    #[inline]
    pub(crate) fn add_product(&mut self, a: f64, b: f64) {
        let (p, pe) = two_prod(a, b);
        let (s, se) = two_sum(self.sum, p);
        self.sum = s;
        self.err += pe + se;
    }

    #[inline]
    pub(crate) fn add(&mut self, a: f64) {
        let (s, se) = two_sum(self.sum, a);
        self.sum = s;
        self.err += se;
    }

    #[inline]
    pub(crate) fn value(self) -> f64 {
        self.sum + self.err
    }
}

/// `A' y - c`, evaluated with compensated sums.
pub(crate) fn dual_residual(a: &DMatrix<f64>, y: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(a.ncols(), |j, _| {
        let mut acc = Dot2::default();
        for i in 0..a.nrows() {
            acc.add_product(a[(i, j)], y[i]);
        }
        acc.add(-c[j]);
        acc.value()
    })
}

/// `A x + s - b`, evaluated with compensated sums.
pub(crate) fn primal_residual(a: &DMatrix<f64>, x: &DVector<f64>, s: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(a.nrows(), |i, _| {
        let mut acc = Dot2::default();
        for j in 0..a.ncols() {
            acc.add_product(a[(i, j)], x[j]);
        }
        acc.add(s[i]);
        acc.add(-b[i]);
        acc.value()
    })
}

/// `b - A x`, evaluated with compensated sums.
pub(crate) fn slacks(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(a.nrows(), |i, _| {
        let mut acc = Dot2::default();
        acc.add(b[i]);
        for j in 0..a.ncols() {
            acc.add_product(-a[(i, j)], x[j]);
        }
        acc.value()
    })
}

/// Iterator over all `k`-subsets of `0..n` in lexicographic order.
pub(crate) struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Binomial coefficient, saturating at `u64::MAX`.
pub(crate) fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}
