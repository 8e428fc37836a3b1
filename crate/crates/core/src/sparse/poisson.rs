use super::CsrMatrix;
use crate::error::{Error, Result};

/// Five-point finite-difference Laplacian on a `grid x grid` mesh with
/// Dirichlet boundaries: 4 on the diagonal, -1 for each mesh neighbour, rows
/// in natural (row-major) mesh order.
pub fn gen_poisson(grid: usize) -> Result<CsrMatrix> {
    if grid < 2 {
        return Err(Error::InvalidConfig(format!("poisson grid must be at least 2, got {grid}")));
    }
    let n = grid * grid;
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(5 * n);
    let mut vals = Vec::with_capacity(5 * n);
    row_offsets.push(0);
    for r in 0..grid {
        for c in 0..grid {
            let i = r * grid + c;
            if r > 0 {
                cols.push(i - grid);
                vals.push(-1.0);
            }
            if c > 0 {
                cols.push(i - 1);
                vals.push(-1.0);
            }
            cols.push(i);
            vals.push(4.0);
            if c + 1 < grid {
                cols.push(i + 1);
                vals.push(-1.0);
            }
            if r + 1 < grid {
                cols.push(i + grid);
                vals.push(-1.0);
            }
            row_offsets.push(cols.len());
        }
    }
    CsrMatrix::new(n, n, row_offsets, cols, vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_two_by_hand() {
        // mesh nodes 0 1 / 2 3: each node has exactly two neighbours
        let a = gen_poisson(2).unwrap();
        assert_eq!(a.n_rows(), 4);
        assert_eq!(a.nnz(), 12);
        let dense: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                let mut row = vec![0.0; 4];
                for (j, v) in a.row(i) {
                    row[j] = v;
                }
                row
            })
            .collect();
        assert_eq!(
            dense,
            vec![
                vec![4.0, -1.0, -1.0, 0.0],
                vec![-1.0, 4.0, 0.0, -1.0],
                vec![-1.0, 0.0, 4.0, -1.0],
                vec![0.0, -1.0, -1.0, 4.0],
            ]
        );
        assert_eq!(a.spmv(&[1.0; 4]).unwrap(), vec![2.0; 4]);
    }

    #[test]
    fn grid_hundred_counts() {
        let a = gen_poisson(100).unwrap();
        assert_eq!(a.n_rows(), 10_000);
        assert_eq!(a.nnz(), 49_600);
        assert_eq!(a.explicit_zeros(), 0);
    }

    #[test]
    fn symmetric() {
        let a = gen_poisson(5).unwrap();
        let t: std::collections::HashMap<(usize, usize), f64> = a.triplets().map(|(i, j, v)| ((i, j), v)).collect();
        for (&(i, j), &v) in &t {
            assert_eq!(t.get(&(j, i)), Some(&v));
        }
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(gen_poisson(1).is_err());
    }
}
