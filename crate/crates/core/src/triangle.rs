//! Dense storage over the triangular per-arm state space.
//!
//! Diagonal `d` holds the states with `alpha + beta - 2 == d`, ordered by
//! increasing `alpha`. A triangle with `extent` diagonals stores
//! `extent * (extent + 1) / 2` entries.

use crate::bandit::ArmPosterior;

#[derive(Debug, Clone, PartialEq)]
pub struct Triangle<T> {
    extent: usize,
    data: Vec<T>,
}

#[inline]
fn diag_start(d: usize) -> usize {
    d * (d + 1) / 2
}

impl<T: Clone> Triangle<T> {
    pub fn filled(extent: usize, value: T) -> Self {
        Triangle {
            extent,
            data: vec![value; diag_start(extent)],
        }
    }
}

impl<T> Triangle<T> {
    /// Number of diagonals (pull counts `0..extent`).
    pub fn extent(&self) -> usize {
        self.extent
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    fn offset(&self, alpha: u32, beta: u32) -> Option<usize> {
        if alpha == 0 || beta == 0 {
            return None;
        }
        let d = (alpha + beta - 2) as usize;
        (d < self.extent).then(|| diag_start(d) + (alpha as usize - 1))
    }

    pub fn contains(&self, arm: ArmPosterior) -> bool {
        self.offset(arm.alpha, arm.beta).is_some()
    }

    pub fn get(&self, arm: ArmPosterior) -> Option<&T> {
        self.offset(arm.alpha, arm.beta).map(|i| &self.data[i])
    }

    pub fn get_mut(&mut self, arm: ArmPosterior) -> Option<&mut T> {
        self.offset(arm.alpha, arm.beta).map(|i| &mut self.data[i])
    }

    /// Entries of diagonal `d`, ordered by increasing alpha.
    pub fn diagonal(&self, d: usize) -> &[T] {
        &self.data[diag_start(d)..diag_start(d + 1)]
    }

    pub fn diagonal_mut(&mut self, d: usize) -> &mut [T] {
        &mut self.data[diag_start(d)..diag_start(d + 1)]
    }

    /// Diagonal `d` (mutable) together with diagonal `d + 1`.
    pub fn diagonal_pair_mut(&mut self, d: usize) -> (&mut [T], &[T]) {
        let (head, tail) = self.data[diag_start(d)..diag_start(d + 2)].split_at_mut(d + 1);
        (head, tail)
    }

    /// States paired with values, sorted by `(alpha + beta, alpha)`.
    pub fn iter(&self) -> impl Iterator<Item = (ArmPosterior, &T)> {
        (0..self.extent).flat_map(move |d| {
            self.diagonal(d)
                .iter()
                .enumerate()
                .map(move |(i, v)| (ArmPosterior::on_diagonal(d as u32, i as u32), v))
        })
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn map<U>(&self, f: impl Fn(ArmPosterior, &T) -> U) -> Triangle<U> {
        Triangle {
            extent: self.extent,
            data: self.iter().map(|(s, v)| f(s, v)).collect(),
        }
    }

    pub(crate) fn from_vec(extent: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), diag_start(extent));
        Triangle { extent, data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_matches_sorted_order() {
        let t = Triangle::filled(4, 0u8);
        let states: Vec<(u32, u32)> = t.iter().map(|(s, _)| (s.alpha, s.beta)).collect();
        assert_eq!(states.len(), 10);
        assert_eq!(&states[..4], &[(1, 1), (1, 2), (2, 1), (1, 3)]);
        let mut sorted = states.clone();
        sorted.sort_by_key(|&(a, b)| (a + b, a));
        assert_eq!(states, sorted);
    }

    #[test]
    fn out_of_extent_is_none() {
        let t = Triangle::filled(3, 1.0);
        assert!(t.get(ArmPosterior::new(3, 1).unwrap()).is_some());
        assert!(t.get(ArmPosterior::new(3, 2).unwrap()).is_none());
    }
}
