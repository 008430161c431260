use super::GedError;

/// A dense square cost matrix. `f64::INFINITY` marks forbidden cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    size: usize,
    cells: Vec<f64>,
}

impl CostMatrix {
    pub fn new(size: usize, fill: f64) -> Self {
        CostMatrix {
            size,
            cells: vec![fill; size * size],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, GedError> {
        let size = rows.len();
        if let Some(row) = rows.iter().find(|r| r.len() != size) {
            return Err(GedError::NotSquare {
                rows: size,
                columns: row.len(),
            });
        }
        Ok(CostMatrix {
            size,
            cells: rows.concat(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.size + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.cells[row * self.size + col] = value;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `columns[row]` is the column assigned to `row`.
    pub columns: Vec<usize>,
    pub total: f64,
}

/// Minimum-cost perfect assignment by shortest augmenting paths with
/// potentials (Hungarian method), O(m³).
///
/// Infinite cells are replaced by a sentinel larger than any finite
/// assignment; a solution that still uses one is reported as infeasible.
pub fn assignment_solve(costs: &CostMatrix) -> Result<Assignment, GedError> {
    let n = costs.size();
    if n == 0 {
        return Ok(Assignment {
            columns: Vec::new(),
            total: 0.0,
        });
    }
    let mut finite_sum = 0.0;
    for (i, &c) in costs.cells.iter().enumerate() {
        if c.is_nan() || c < 0.0 {
            return Err(GedError::InvalidCost {
                row: i / n,
                col: i % n,
            });
        }
        if c.is_finite() {
            finite_sum += c;
        }
    }
    for r in 0..n {
        if (0..n).all(|c| costs.get(r, c).is_infinite()) {
            return Err(GedError::Infeasible);
        }
    }
    for c in 0..n {
        if (0..n).all(|r| costs.get(r, c).is_infinite()) {
            return Err(GedError::Infeasible);
        }
    }
    let big = finite_sum + 1.0;
    let cost = |r: usize, c: usize| {
        let v = costs.get(r, c);
        if v.is_finite() {
            v
        } else {
            big
        }
    };

    // 1-based potentials; column 0 is the virtual start of each path.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut columns = vec![0usize; n];
    for j in 1..=n {
        columns[row_of[j] - 1] = j - 1;
    }
    let mut total = 0.0;
    for (r, &c) in columns.iter().enumerate() {
        let value = costs.get(r, c);
        if value.is_infinite() {
            return Err(GedError::Infeasible);
        }
        total += value;
    }
    Ok(Assignment { columns, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn solve(rows: &[Vec<f64>]) -> Assignment {
        assignment_solve(&CostMatrix::from_rows(rows).unwrap()).unwrap()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn small_examples() {
        let a = solve(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!((a.columns, a.total), (vec![0, 1], 0.0));
        assert_eq!(solve(&[vec![1.0, 2.0], vec![2.0, 1.0]]).total, 2.0);
        assert_eq!(solve(&[vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]]).total, 5.0);
        assert_eq!(solve(&[]).total, 0.0);
    }

    #[test]
    fn matches_exhaustive_search_on_5x5() {
        let perms = permutations(5);
        assert_eq!(perms.len(), 120);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..300 {
            let rows: Vec<Vec<f64>> = (0..5)
                .map(|_| {
                    (0..5)
                        .map(|_| {
                            if trial % 3 == 0 {
                                rng.random_range(0..4) as f64
                            } else {
                                rng.random_range(0.0..10.0)
                            }
                        })
                        .collect()
                })
                .collect();
            let best = perms
                .iter()
                .map(|p| p.iter().enumerate().map(|(r, &c)| rows[r][c]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let got = solve(&rows);
            assert!((got.total - best).abs() < 1e-9, "{} vs {best}", got.total);
            let mut seen = got.columns.clone();
            seen.sort_unstable();
            assert_eq!(seen, [0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn forbidden_cells() {
        let inf = f64::INFINITY;
        let a = solve(&[vec![1.0, inf], vec![inf, 2.0]]);
        assert_eq!((a.columns, a.total), (vec![0, 1], 3.0));
        let rows = vec![vec![inf, inf], vec![1.0, 1.0]];
        let m = CostMatrix::from_rows(&rows).unwrap();
        assert_eq!(assignment_solve(&m), Err(GedError::Infeasible));
        // Every row and column has a finite cell, but no perfect matching avoids infinity.
        let rows = vec![vec![1.0, 1.0, inf], vec![inf, inf, 1.0], vec![inf, inf, 1.0]];
        let m = CostMatrix::from_rows(&rows).unwrap();
        assert_eq!(assignment_solve(&m), Err(GedError::Infeasible));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            CostMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]),
            Err(GedError::NotSquare { .. })
        ));
        let m = CostMatrix::from_rows(&[vec![-1.0]]).unwrap();
        assert_eq!(assignment_solve(&m), Err(GedError::InvalidCost { row: 0, col: 0 }));
    }
}
