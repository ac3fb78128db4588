//! Small shared helpers for grid searches: uniform price grids, float-robust
//! argmax, and a sparse table for leftmost range-maximum queries.

/// Absolute improvement a candidate must show over the incumbent before an
/// argmax moves. Shields plateau searches from last-bit float dust; ties and
/// near-ties resolve to the earliest (smallest) index.
pub const TIE_EPS: f64 = 1e-12;

/// Uniform grid `lo, lo + step, ...` covering `[lo, hi]`. The final point is
/// `hi` itself whenever the last stride falls measurably short of it.
pub fn price_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    debug_assert!(step > 0.0 && hi > lo);
    let n = ((hi - lo) / step).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    let last = *grid.last().expect("grid is nonempty");
    if hi - last > step * 1e-9 {
        grid.push(hi);
    } else if last > hi {
        *grid.last_mut().expect("grid is nonempty") = hi;
    }
    grid
}

/// Index of the first value that is within [`TIE_EPS`] of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] + TIE_EPS {
            best = i;
        }
    }
    best
}

/// Sparse table answering "leftmost index of the maximum of `values[l..=r]`"
/// in O(1) after O(n log n) construction.
pub struct RangeMax<'a> {
    values: &'a [f64],
    /// `table[k][i]` = argmax index over `values[i .. i + 2^k]`.
    table: Vec<Vec<u32>>,
}

impl<'a> RangeMax<'a> {
    pub fn new(values: &'a [f64]) -> Self {
        let n = values.len();
        let levels = if n <= 1 {
            1
        } else {
            (usize::BITS - (n - 1).leading_zeros()) as usize + 1
        };
        let mut table: Vec<Vec<u32>> = Vec::with_capacity(levels);
        table.push((0..n as u32).collect());
        let mut len = 1usize;
        for _ in 1..levels {
            let prev = table.last().expect("at least one level");
            let next_len = n.saturating_sub(len * 2 - 1);
            let mut row = Vec::with_capacity(next_len);
            for i in 0..next_len {
                let a = prev[i];
                let b = prev[i + len];
                // `>=` keeps the left candidate on ties.
                row.push(if values[a as usize] >= values[b as usize] {
                    a
                } else {
                    b
                });
            }
            table.push(row);
            len *= 2;
        }
        RangeMax { values, table }
    }

    /// Leftmost argmax index over the inclusive range `[l, r]`.
    pub fn query(&self, l: usize, r: usize) -> usize {
        debug_assert!(l <= r && r < self.values.len());
        if l == r {
            return l;
        }
        let k = (usize::BITS - 1 - (r - l + 1).leading_zeros()) as usize;
        let len = 1usize << k;
        let a = self.table[k][l] as usize;
        let b = self.table[k][r + 1 - len] as usize;
        // Strictly-greater on the right so the leftmost winner is preferred.
        if self.values[b] > self.values[a] {
            b
        } else {
            a
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_interval_and_ends_at_hi() {
        let g = price_grid(0.0, 5.0, 1e-3);
        assert_eq!(g.len(), 5001);
        assert_eq!(g[0], 0.0);
        assert!((g[5000] - 5.0).abs() < 1e-9);
        let g = price_grid(1.0, 2.0, 0.3);
        assert_eq!(g.len(), 5); // 1.0, 1.3, 1.6, 1.9, 2.0
        assert_eq!(*g.last().unwrap(), 2.0);
    }

    #[test]
    fn argmax_prefers_first_of_near_ties() {
        assert_eq!(argmax(&[1.0, 1.0 + 1e-15, 0.5]), 0);
        assert_eq!(argmax(&[1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn range_max_matches_linear_scan() {
        let vals: Vec<f64> = (0..257)
            .map(|i| ((i * 2654435761u64 % 1000) as f64) / 1000.0)
            .collect();
        let rm = RangeMax::new(&vals);
        for l in (0..vals.len()).step_by(17) {
            for r in (l..vals.len()).step_by(13) {
                let mut best = l;
                for i in l..=r {
                    if vals[i] > vals[best] {
                        best = i;
                    }
                }
                assert_eq!(rm.query(l, r), best, "range [{l}, {r}]");
            }
        }
    }
}
