use std::ops::{Index, IndexMut};

use crate::Scalar;

/// Dense `n × n × n` array in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut t = Self::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    t[(a, b, c)] = f(a, b, c);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, &x| if x.abs() > m { x.abs() } else { m })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    #[inline]
    fn offset(&self, (a, b, c): (usize, usize, usize)) -> usize {
        debug_assert!(a < self.n && b < self.n && c < self.n);
        (a * self.n + b) * self.n + c
    }
}

impl<T: Scalar> Index<(usize, usize, usize)> for Tensor3<T> {
    type Output = T;

    fn index(&self, idx: (usize, usize, usize)) -> &T {
        &self.data[self.offset(idx)]
    }
}

impl<T: Scalar> IndexMut<(usize, usize, usize)> for Tensor3<T> {
    fn index_mut(&mut self, idx: (usize, usize, usize)) -> &mut T {
        let o = self.offset(idx);
        &mut self.data[o]
    }
}
