//! Banded LU without pivoting for the diagonally dominant M-matrices that
//! arise from `μI + L`, `L` a monotone stencil.
//!
//! Periodic axes are renumbered `0, n−1, 1, n−2, 2, …` so that wrap-around
//! neighbours sit at most two positions apart and the bandwidth stays `O(n)`
//! per axis instead of `O(n^dim)`.

use crate::operators::{Grid, LinearStencil};

#[derive(Debug)]
pub(crate) struct SmallPivot {
    pub row: usize,
    pub pivot: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    /// Row-major band: entry (i, j) lives at `i * width + (j + kl - i)`.
    data: Vec<f64>,
    /// node index -> row of the permuted system
    pos: Vec<usize>,
}

fn interleaved(r: usize, n: usize) -> usize {
    if r < n.div_ceil(2) {
        2 * r
    } else {
        2 * (n - 1 - r) + 1
    }
}

pub(crate) fn ordering(grid: &Grid) -> Vec<usize> {
    let n = grid.n();
    let axis_pos = |r: usize| {
        if grid.is_periodic() {
            interleaved(r, n)
        } else {
            r
        }
    };
    (0..grid.node_count())
        .map(|node| {
            let [ix, iy] = grid.axis_indices(node);
            axis_pos(ix) + n * if grid.dim() == 2 { axis_pos(iy) } else { 0 }
        })
        .collect()
}

impl BandedLu {
    /// Factors `shift·I + diag + off` from `sys`, failing on any pivot whose
    /// magnitude is below `min_pivot`.
    pub fn factor(
        grid: &Grid,
        sys: &LinearStencil,
        shift: f64,
        min_pivot: f64,
    ) -> Result<Self, SmallPivot> {
        let n = grid.node_count();
        let pos = ordering(grid);
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, row) in sys.off.iter().enumerate() {
            for &(j, _) in row {
                let (pi, pj) = (pos[i], pos[j]);
                if pj < pi {
                    kl = kl.max(pi - pj);
                } else {
                    ku = ku.max(pj - pi);
                }
            }
        }
        let width = kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pos,
        };
        for i in 0..n {
            let pi = lu.pos[i];
            *lu.at_mut(pi, pi) += shift + sys.diag[i];
            for &(j, w) in &sys.off[i] {
                let pj = lu.pos[j];
                *lu.at_mut(pi, pj) += w;
            }
        }
        for k in 0..n {
            let pivot = lu.at(k, k);
            if !(pivot.abs() >= min_pivot) {
                return Err(SmallPivot { row: k, pivot });
            }
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku).min(n - 1);
            for i in k + 1..=last_row {
                let l = lu.at(i, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                *lu.at_mut(i, k) = l;
                for j in k + 1..=last_col {
                    let ukj = lu.at(k, j);
                    *lu.at_mut(i, j) -= l * ukj;
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + (j + self.kl - i)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.width + (j + self.kl - i)]
    }

    /// Solves `A x = rhs` (both in node order).
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for (node, &p) in self.pos.iter().enumerate() {
            y[p] = rhs[node];
        }
        for i in 0..n {
            let first = i.saturating_sub(self.kl);
            let mut acc = y[i];
            for j in first..i {
                acc -= self.at(i, j) * y[j];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let last = (i + self.ku).min(n - 1);
            let mut acc = y[i];
            for j in i + 1..=last {
                acc -= self.at(i, j) * y[j];
            }
            y[i] = acc / self.at(i, i);
        }
        self.pos.iter().map(|&p| y[p]).collect()
    }

    #[cfg(test)]
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::Boundary;

    fn dense_apply(sys: &LinearStencil, shift: f64, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                (shift + sys.diag[i]) * x[i]
                    + sys.off[i].iter().map(|&(j, w)| w * x[j]).sum::<f64>()
            })
            .collect()
    }

    fn random_stencil(grid: &Grid, seed: u64) -> LinearStencil {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = grid.node_count();
        let mut sys = LinearStencil {
            diag: vec![0.0; n],
            off: vec![vec![]; n],
            constant: vec![0.0; n],
        };
        for i in 0..n {
            for off in [[-1, 0], [1, 0], [0, -1], [0, 1]] {
                if grid.dim() == 1 && off[1] != 0 {
                    continue;
                }
                if let crate::operators::Neighbor::Node(j) = grid.neighbor(i, off) {
                    let w = -rng.gen_range(0.1..2.0);
                    sys.off[i].push((j, w));
                    sys.diag[i] -= w;
                }
            }
        }
        sys
    }

    #[test]
    fn solves_periodic_and_dirichlet_systems() {
        let grids = [
            Grid::new_1d(11, 0.0, 1.0, Boundary::Periodic).unwrap(),
            Grid::new_1d(10, 0.0, 1.0, Boundary::Dirichlet(None)).unwrap(),
            Grid::new_2d(7, [0.0; 2], [1.0; 2], Boundary::Periodic).unwrap(),
            Grid::new_2d(6, [0.0; 2], [1.0; 2], Boundary::Periodic).unwrap(),
            Grid::new_2d(5, [0.0; 2], [1.0; 2], Boundary::Dirichlet(None)).unwrap(),
        ];
        for (s, grid) in grids.iter().enumerate() {
            let sys = random_stencil(grid, s as u64);
            let x: Vec<f64> = (0..grid.node_count())
                .map(|i| (i as f64 * 0.37).sin())
                .collect();
            let b = dense_apply(&sys, 0.3, &x);
            let lu = BandedLu::factor(grid, &sys, 0.3, 1e-14).unwrap();
            let got = lu.solve(&b);
            for (a, e) in got.iter().zip(&x) {
                assert!((a - e).abs() < 1e-11, "grid {s}: {a} vs {e}");
            }
        }
    }

    #[test]
    fn periodic_bandwidth_is_linear_in_n() {
        let grid = Grid::new_2d(16, [0.0; 2], [1.0; 2], Boundary::Periodic).unwrap();
        let sys = random_stencil(&grid, 9);
        let lu = BandedLu::factor(&grid, &sys, 1.0, 1e-14).unwrap();
        let (kl, ku) = lu.bandwidth();
        assert!(kl <= 2 * 16 && ku <= 2 * 16, "{kl} {ku}");
        let line = Grid::new_1d(64, 0.0, 1.0, Boundary::Periodic).unwrap();
        let lu = BandedLu::factor(&line, &random_stencil(&line, 1), 1.0, 1e-14).unwrap();
        assert_eq!(lu.bandwidth(), (2, 2));
    }

    #[test]
    fn reports_small_pivot() {
        let grid = Grid::new_1d(4, 0.0, 1.0, Boundary::Periodic).unwrap();
        let sys = LinearStencil {
            diag: vec![0.0; 4],
            off: vec![vec![]; 4],
            constant: vec![0.0; 4],
        };
        assert!(BandedLu::factor(&grid, &sys, 0.0, 1e-14).is_err());
    }
}
