//! Exact transport via the network simplex on the bipartite transportation
//! graph.
//!
//! Rows are supply nodes, columns demand nodes. The basis is a spanning tree
//! of basic cells seeded by the northwest-corner rule; pivots pick an
//! entering arc by block search over reduced costs (falling back to Bland's
//! rule under sustained degeneracy, which guarantees termination) and rotate
//! flow around the unique tree cycle the arc closes.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{validate_marginals, CostMatrix, SolverTag, TransportResult};

#[derive(Debug, Clone, Copy)]
struct BasisCell<F> {
    row: usize,
    col: usize,
    flow: F,
}

struct Simplex<'a, F: Scalar> {
    cost: &'a Array2<F>,
    n: usize,
    m: usize,
    basis: Vec<BasisCell<F>>,
    // Dual potentials per row / column node.
    u: Vec<F>,
    v: Vec<F>,
    // Persistent scan position for the block search.
    scan_from: usize,
    enter_tol: F,
    degen_tol: F,
}

impl<'a, F: Scalar> Simplex<'a, F> {
    fn new(cost: &'a Array2<F>, a: &Array1<F>, b: &Array1<F>) -> Self {
        let n = cost.nrows();
        let m = cost.ncols();
        let cmax = cost.iter().copied().fold(F::zero(), |acc, v| acc.max(v));
        let scale = F::cast(((n + m).max(16)) as f64 * 1e-14);
        let total: F = a.iter().copied().sum();
        Self {
            cost,
            n,
            m,
            basis: northwest_corner(a, b),
            u: vec![F::zero(); n],
            v: vec![F::zero(); m],
            scan_from: 0,
            enter_tol: cmax * scale,
            degen_tol: total * F::cast(1e-14),
        }
    }

    // Adjacency of the basis tree over nodes 0..n (rows) and n..n+m (cols).
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n + self.m];
        for (idx, cell) in self.basis.iter().enumerate() {
            adj[cell.row].push((self.n + cell.col, idx));
            adj[self.n + cell.col].push((cell.row, idx));
        }
        adj
    }

    /// Solve `u_i + v_j = c_ij` on basic cells by walking the tree from
    /// node 0 with `u_0 = 0`.
    fn compute_duals(&mut self) {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n + self.m];
        let mut stack = vec![0usize];
        self.u[0] = F::zero();
        seen[0] = true;
        while let Some(node) = stack.pop() {
            for &(next, idx) in &adj[node] {
                if seen[next] {
                    continue;
                }
                let cell = &self.basis[idx];
                let c = self.cost[(cell.row, cell.col)];
                if next >= self.n {
                    self.v[next - self.n] = c - self.u[cell.row];
                } else {
                    self.u[next] = c - self.v[cell.col];
                }
                seen[next] = true;
                stack.push(next);
            }
        }
    }

    #[inline]
    fn reduced_cost(&self, i: usize, j: usize) -> F {
        self.cost[(i, j)] - self.u[i] - self.v[j]
    }

    /// Most negative reduced cost inside the first block (of roughly
    /// `sqrt(nm)` arcs) that contains any negative arc, scanning cyclically
    /// from where the previous search stopped.
    fn entering_block_search(&mut self) -> Option<(usize, usize)> {
        let arcs = self.n * self.m;
        let block = ((arcs as f64).sqrt().ceil() as usize).max(8);
        let mut best: Option<(usize, usize)> = None;
        let mut best_r = -self.enter_tol;
        let mut scanned = 0;
        let mut pos = self.scan_from;
        while scanned < arcs {
            let stop = (scanned + block).min(arcs);
            while scanned < stop {
                let i = pos / self.m;
                let j = pos % self.m;
                let r = self.reduced_cost(i, j);
                if r < best_r {
                    best_r = r;
                    best = Some((i, j));
                }
                pos = (pos + 1) % arcs;
                scanned += 1;
            }
            if best.is_some() {
                self.scan_from = pos;
                return best;
            }
        }
        None
    }

    /// Bland's rule: first arc in index order with negative reduced cost.
    fn entering_bland(&self) -> Option<(usize, usize)> {
        for i in 0..self.n {
            for j in 0..self.m {
                if self.reduced_cost(i, j) < -self.enter_tol {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Basic cells on the tree path between row `i` and column `j`, ordered
    /// from the column end; with the entering arc they close the pivot cycle.
    fn cycle_path(&self, i: usize, j: usize) -> Vec<usize> {
        let adj = self.adjacency();
        let target = self.n + j;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.n + self.m];
        let mut seen = vec![false; self.n + self.m];
        let mut queue = std::collections::VecDeque::new();
        seen[i] = true;
        queue.push_back(i);
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &(next, idx) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, idx));
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while let Some((prev, idx)) = parent[node] {
            path.push(idx);
            node = prev;
        }
        debug_assert_eq!(node, i, "basis must be a spanning tree");
        path
    }

    /// Rotate flow around the cycle closed by the entering arc `(i, j)`.
    /// Returns whether the pivot moved any mass.
    fn pivot(&mut self, i: usize, j: usize) -> bool {
        let path = self.cycle_path(i, j);
        // Walking from the column end, the first path cell loses flow and
        // signs alternate; the path has odd length, so the assignment agrees
        // with starting from the row end.
        let mut theta = F::infinity();
        let mut leaving: Option<usize> = None;
        for (k, &idx) in path.iter().enumerate() {
            if k % 2 == 0 {
                let cell = &self.basis[idx];
                // Ties break toward the smallest cell index, the leaving-arc
                // half of Bland's anti-cycling rule.
                let better = match leaving {
                    None => true,
                    Some(cur) => {
                        let cur_cell = &self.basis[cur];
                        cell.flow < theta
                            || (cell.flow == theta
                                && (cell.row, cell.col) < (cur_cell.row, cur_cell.col))
                    }
                };
                if better {
                    theta = cell.flow;
                    leaving = Some(idx);
                }
            }
        }
        let leaving = leaving.expect("cycle has at least one decreasing cell");
        for (k, &idx) in path.iter().enumerate() {
            if k % 2 == 0 {
                let f = self.basis[idx].flow - theta;
                self.basis[idx].flow = if f > F::zero() { f } else { F::zero() };
            } else {
                self.basis[idx].flow += theta;
            }
        }
        self.basis[leaving] = BasisCell {
            row: i,
            col: j,
            flow: theta,
        };
        theta > self.degen_tol
    }
}

fn northwest_corner<F: Scalar>(a: &Array1<F>, b: &Array1<F>) -> Vec<BasisCell<F>> {
    let n = a.len();
    let m = b.len();
    let mut remaining_a = a.to_vec();
    let mut remaining_b = b.to_vec();
    let mut cells = Vec::with_capacity(n + m - 1);
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let t = remaining_a[i].min(remaining_b[j]);
        cells.push(BasisCell {
            row: i,
            col: j,
            flow: if t > F::zero() { t } else { F::zero() },
        });
        remaining_a[i] -= t;
        remaining_b[j] -= t;
        if i == n - 1 && j == m - 1 {
            break;
        }
        // Advance one index per step so exactly n + m - 1 cells form the
        // staircase spanning tree.
        if j == m - 1 || (remaining_a[i] <= remaining_b[j] && i < n - 1) {
            i += 1;
        } else {
            j += 1;
        }
    }
    cells
}

/// Exact optimum of the transport linear program. The marginals must carry
/// equal total mass (within `1e-9` relative); the returned coupling is a
/// basic solution with at most `n + m - 1` nonzero entries.
pub fn solve_emd<F: Scalar>(
    cost: &CostMatrix<F>,
    a: &Array1<F>,
    b: &Array1<F>,
) -> Result<TransportResult<F>> {
    validate_marginals(cost, a, b)?;
    let n = cost.nrows();
    let m = cost.ncols();
    let mut simplex = Simplex::new(cost.matrix(), a, b);

    let max_pivots = 1000 + 50 * (n + m) * n.max(m);
    // Sustained degeneracy flips the entering rule to Bland's, which cannot
    // cycle; any mass-moving pivot flips it back.
    let degeneracy_limit = n + m;
    let mut degenerate_streak = 0usize;
    let mut pivots = 0usize;
    loop {
        simplex.compute_duals();
        let bland = degenerate_streak > degeneracy_limit;
        let entering = if bland {
            simplex.entering_bland()
        } else {
            simplex.entering_block_search()
        };
        let Some((i, j)) = entering else { break };
        let moved = simplex.pivot(i, j);
        degenerate_streak = if moved { 0 } else { degenerate_streak + 1 };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::NonConvergence(max_pivots));
        }
    }

    let mut plan = Array2::zeros((n, m));
    for cell in &simplex.basis {
        if cell.flow > F::zero() {
            plan[(cell.row, cell.col)] = cell.flow;
        }
    }
    TransportResult::from_plan(cost, plan, a, b, true, pivots, SolverTag::Emd)
}
