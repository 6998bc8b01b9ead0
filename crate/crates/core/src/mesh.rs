//! Uniform tensor grids on an interval or rectangle with homogeneous
//! Dirichlet boundary.
//!
//! Only interior nodes are stored; the boundary value is implicitly zero.
//! Primal quantities ([`GridFunction`]) hold nodal values. Dual quantities
//! ([`DualFunction`]) hold integrated loads, so a duality pairing is a plain
//! dot product and no mass matrix appears in any pairing. The negative
//! Laplacian is the standard 3-point (1D) or 5-point (2D) stencil scaled by
//! the inverse squared spacing per axis; it is symmetric positive definite
//! on the interior nodes.

use crate::error::Error;

/// Relative residual target for the conjugate-gradient solver.
pub const SOLVE_REL_TOL: f64 = 1e-12;

/// Uniform grid of interior nodes on a rectangle (or interval).
///
/// Nodes are ordered row-major: in 2D, node `(ix, iy)` has linear index
/// `iy * nx + ix` and coordinates `((ix + 1) h_x, (iy + 1) h_y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    nodes: [usize; 2],
    extent: [f64; 2],
    spacing: [f64; 2],
}

impl Grid {
    /// Interval `(0, extent)` with `nodes` interior nodes.
    pub fn line(extent: f64, nodes: usize) -> Grid {
        assert!(extent > 0.0 && extent.is_finite(), "extent must be positive");
        assert!(nodes >= 1, "need at least one interior node");
        let h = extent / (nodes + 1) as f64;
        Grid {
            dim: 1,
            nodes: [nodes, 1],
            extent: [extent, 0.0],
            spacing: [h, 1.0],
        }
    }

    /// Rectangle `(0, extent[0]) x (0, extent[1])` with `nodes[i]` interior
    /// nodes along axis `i`.
    pub fn rectangle(extent: [f64; 2], nodes: [usize; 2]) -> Grid {
        assert!(
            extent[0] > 0.0 && extent[0].is_finite() && extent[1] > 0.0 && extent[1].is_finite(),
            "extents must be positive"
        );
        assert!(nodes[0] >= 1 && nodes[1] >= 1, "need interior nodes on both axes");
        Grid {
            dim: 2,
            nodes,
            extent,
            spacing: [
                extent[0] / (nodes[0] + 1) as f64,
                extent[1] / (nodes[1] + 1) as f64,
            ],
        }
    }

    /// Unit square with `n` interior nodes per axis.
    pub fn square(n: usize) -> Grid {
        Grid::rectangle([1.0, 1.0], [n, n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Interior nodes along each axis (`[n, 1]` in 1D).
    pub fn nodes_per_axis(&self) -> [usize; 2] {
        self.nodes
    }

    /// Total number of interior nodes.
    pub fn node_count(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }

    /// Volume of one grid cell: `h_x` in 1D, `h_x * h_y` in 2D. This is the
    /// weight that turns nodal values into integrated loads.
    pub fn cell_volume(&self) -> f64 {
        if self.dim == 1 {
            self.spacing[0]
        } else {
            self.spacing[0] * self.spacing[1]
        }
    }

    /// Linear index of node `(ix, iy)`; `iy` must be 0 in 1D.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nodes[0] && iy < self.nodes[1]);
        iy * self.nodes[0] + ix
    }

    /// Coordinates of the node with linear index `k` (second entry 0 in 1D).
    pub fn coords(&self, k: usize) -> [f64; 2] {
        let ix = k % self.nodes[0];
        let iy = k / self.nodes[0];
        let x = (ix + 1) as f64 * self.spacing[0];
        let y = if self.dim == 2 {
            (iy + 1) as f64 * self.spacing[1]
        } else {
            0.0
        };
        [x, y]
    }

    /// Diagonal entry of the negative-Laplacian stencil (constant over nodes).
    pub fn stencil_diagonal(&self) -> f64 {
        let hx2 = self.spacing[0] * self.spacing[0];
        if self.dim == 1 {
            2.0 / hx2
        } else {
            let hy2 = self.spacing[1] * self.spacing[1];
            2.0 / hx2 + 2.0 / hy2
        }
    }
}

/// Nodal values of a function on the interior nodes of a grid.
///
/// Entries must not be NaN. `-inf` is admitted because obstacle entries use
/// it to mark unconstrained nodes; solver outputs are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> GridFunction {
        assert_eq!(values.len(), grid.node_count(), "value count must match grid");
        assert!(values.iter().all(|v| !v.is_nan()), "NaN entry in grid function");
        GridFunction { grid, values }
    }

    pub fn zeros(grid: Grid) -> GridFunction {
        GridFunction {
            values: vec![0.0; grid.node_count()],
            grid,
        }
    }

    pub fn constant(grid: Grid, value: f64) -> GridFunction {
        assert!(!value.is_nan());
        GridFunction {
            values: vec![value; grid.node_count()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &GridFunction) -> GridFunction {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + factor * b)
            .collect();
        GridFunction::new(self.grid, values)
    }

    pub fn scale(&self, factor: f64) -> GridFunction {
        GridFunction::new(self.grid, self.values.iter().map(|a| a * factor).collect())
    }

    /// Componentwise maximum, used for projections onto obstacle sets.
    pub fn max_with(&self, other: &GridFunction) -> GridFunction {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.max(*b))
            .collect();
        GridFunction::new(self.grid, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Integrated loads (right-hand sides, multipliers) on the interior nodes.
///
/// The pairing with a [`GridFunction`] is the plain dot product of loads
/// and values; integration weights are baked into the loads.
#[derive(Debug, Clone, PartialEq)]
pub struct DualFunction {
    grid: Grid,
    loads: Vec<f64>,
}

impl DualFunction {
    pub fn new(grid: Grid, loads: Vec<f64>) -> DualFunction {
        assert_eq!(loads.len(), grid.node_count(), "load count must match grid");
        assert!(loads.iter().all(|v| v.is_finite()), "loads must be finite");
        DualFunction { grid, loads }
    }

    pub fn zeros(grid: Grid) -> DualFunction {
        DualFunction {
            loads: vec![0.0; grid.node_count()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn into_loads(self) -> Vec<f64> {
        self.loads
    }

    /// Duality pairing with a primal function on the same grid.
    pub fn pairing(&self, v: &GridFunction) -> f64 {
        assert_eq!(self.grid, *v.grid(), "grid mismatch");
        dot(&self.loads, v.values())
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &DualFunction) -> DualFunction {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let loads = self
            .loads
            .iter()
            .zip(&other.loads)
            .map(|(a, b)| a + factor * b)
            .collect();
        DualFunction::new(self.grid, loads)
    }

    pub fn scale(&self, factor: f64) -> DualFunction {
        DualFunction::new(self.grid, self.loads.iter().map(|a| a * factor).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.loads.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Subset of the interior nodes of a grid, stored as a membership mask.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    grid: Grid,
    mask: Vec<bool>,
}

impl NodeSet {
    pub fn from_mask(grid: Grid, mask: Vec<bool>) -> NodeSet {
        assert_eq!(mask.len(), grid.node_count(), "mask length must match grid");
        NodeSet { grid, mask }
    }

    pub fn from_indices(grid: Grid, indices: &[usize]) -> NodeSet {
        let mut mask = vec![false; grid.node_count()];
        for &k in indices {
            assert!(k < mask.len(), "node index out of range");
            mask[k] = true;
        }
        NodeSet { grid, mask }
    }

    pub fn full(grid: Grid) -> NodeSet {
        NodeSet {
            mask: vec![true; grid.node_count()],
            grid,
        }
    }

    pub fn empty(grid: Grid) -> NodeSet {
        NodeSet {
            mask: vec![false; grid.node_count()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, k: usize) -> bool {
        self.mask[k]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_all_empty(&self) -> bool {
        self.mask.iter().all(|&b| !b)
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&k| self.mask[k]).collect()
    }

    pub fn complement(&self) -> NodeSet {
        NodeSet {
            grid: self.grid,
            mask: self.mask.iter().map(|b| !b).collect(),
        }
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        NodeSet {
            grid: self.grid,
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    pub fn intersection(&self, other: &NodeSet) -> NodeSet {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        NodeSet {
            grid: self.grid,
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    pub fn minus(&self, other: &NodeSet) -> NodeSet {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        NodeSet {
            grid: self.grid,
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a && !*b)
                .collect(),
        }
    }

    pub fn is_subset_of(&self, other: &NodeSet) -> bool {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        self.mask.iter().zip(&other.mask).all(|(a, b)| !*a || *b)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Applies the scaled negative-Laplacian stencil to nodal values, producing
/// integrated loads. Nodes outside the interior contribute zero (homogeneous
/// Dirichlet data).
pub fn apply_neg_laplacian(v: &GridFunction) -> DualFunction {
    let grid = *v.grid();
    let mut out = vec![0.0; grid.node_count()];
    stencil_apply(&grid, v.values(), &mut out);
    DualFunction::new(grid, out)
}

/// Raw stencil application on slices; `out` receives `A * values`.
pub(crate) fn stencil_apply(grid: &Grid, values: &[f64], out: &mut [f64]) {
    let [nx, ny] = grid.nodes_per_axis();
    let hx2inv = 1.0 / (grid.spacing()[0] * grid.spacing()[0]);
    if grid.dim() == 1 {
        for i in 0..nx {
            let left = if i > 0 { values[i - 1] } else { 0.0 };
            let right = if i + 1 < nx { values[i + 1] } else { 0.0 };
            out[i] = (2.0 * values[i] - left - right) * hx2inv;
        }
    } else {
        let hy2inv = 1.0 / (grid.spacing()[1] * grid.spacing()[1]);
        let diag = 2.0 * hx2inv + 2.0 * hy2inv;
        for iy in 0..ny {
            let row = iy * nx;
            for ix in 0..nx {
                let k = row + ix;
                let mut s = diag * values[k];
                if ix > 0 {
                    s -= values[k - 1] * hx2inv;
                }
                if ix + 1 < nx {
                    s -= values[k + 1] * hx2inv;
                }
                if iy > 0 {
                    s -= values[k - nx] * hy2inv;
                }
                if iy + 1 < ny {
                    s -= values[k + nx] * hy2inv;
                }
                out[k] = s;
            }
        }
    }
}

/// Turns nodal density values into integrated loads by multiplying with the
/// cell volume; this is the embedding of a nodal function into the duals.
pub fn embed_l2(f: &GridFunction) -> DualFunction {
    let vol = f.grid().cell_volume();
    DualFunction::new(*f.grid(), f.values().iter().map(|v| v * vol).collect())
}

/// Integrated unit load (the embedding of the constant one).
pub fn unit_load(grid: Grid) -> DualFunction {
    DualFunction::new(grid, vec![grid.cell_volume(); grid.node_count()])
}

/// Discrete H1_0 norm: square root of the stencil quadratic form.
pub fn norm_h1(v: &GridFunction) -> f64 {
    apply_neg_laplacian(v).pairing(v).max(0.0).sqrt()
}

/// Discrete L2 norm: cell volume times the sum of squared values.
pub fn norm_l2(v: &GridFunction) -> f64 {
    let vol = v.grid().cell_volume();
    (vol * v.values().iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Discrete H^{-1} norm of a load: pairing with the full-grid solution it
/// generates. Needs one linear solve.
pub fn norm_hminus1(f: &DualFunction) -> Result<f64, Error> {
    let y = solve_poisson(f, &NodeSet::full(*f.grid()))?;
    Ok(f.pairing(&y).max(0.0).sqrt())
}

/// Solves the Poisson problem restricted to `domain`: values are zero off
/// `domain` and the stencil equation holds with right-hand side `f` on it.
/// An empty domain is allowed and yields the zero function.
pub fn solve_poisson(f: &DualFunction, domain: &NodeSet) -> Result<GridFunction, Error> {
    assert_eq!(*f.grid(), *domain.grid(), "grid mismatch");
    let grid = *f.grid();
    let sys = LinearSystem {
        grid: &grid,
        free: domain.mask(),
        mass: None,
        pinned_values: None,
    };
    let (values, _) = pcg_solve(&sys, f.loads(), None)?;
    Ok(GridFunction::new(grid, values))
}

/// Restricted shifted system `(A + diag(mass)) y = f` with `y` pinned to
/// `pinned_values` (zero when absent) off the free set.
pub(crate) struct LinearSystem<'a> {
    pub grid: &'a Grid,
    pub free: &'a [bool],
    /// Extra nonnegative diagonal on free nodes.
    pub mass: Option<&'a [f64]>,
    /// Values held fixed on pinned nodes; defaults to zero.
    pub pinned_values: Option<&'a [f64]>,
}

pub(crate) struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients on the free-node subsystem.
///
/// Works on full-length vectors with pinned entries held fixed, so callers
/// never reindex. `warm` seeds the iteration when a nearby solution is
/// known. Deterministic: plain serial loops, no reductions reordered.
pub(crate) fn pcg_solve(
    sys: &LinearSystem<'_>,
    rhs_loads: &[f64],
    warm: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveStats), Error> {
    let grid = sys.grid;
    let n = grid.node_count();
    assert_eq!(rhs_loads.len(), n);
    assert_eq!(sys.free.len(), n);
    if let Some(m) = sys.mass {
        assert_eq!(m.len(), n);
    }

    let mut pinned_ext = vec![0.0; n];
    if let Some(pv) = sys.pinned_values {
        assert_eq!(pv.len(), n);
        for k in 0..n {
            if !sys.free[k] {
                let v = pv[k];
                assert!(v.is_finite(), "pinned values must be finite");
                pinned_ext[k] = v;
            }
        }
    }

    let n_free = sys.free.iter().filter(|&&b| b).count();
    if n_free == 0 {
        return Ok((
            pinned_ext,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }

    // Effective right-hand side on free nodes: loads minus the coupling of
    // the pinned boundary data through the stencil.
    let mut b = vec![0.0; n];
    stencil_apply(grid, &pinned_ext, &mut b);
    for k in 0..n {
        b[k] = if sys.free[k] { rhs_loads[k] - b[k] } else { 0.0 };
    }
    let b_norm = dot(&b, &b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            pinned_ext,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }

    let diag_base = grid.stencil_diagonal();
    let inv_diag: Vec<f64> = (0..n)
        .map(|k| {
            if !sys.free[k] {
                return 0.0;
            }
            let m = sys.mass.map_or(0.0, |m| m[k]);
            debug_assert!(m >= 0.0, "mass entries must be nonnegative");
            1.0 / (diag_base + m)
        })
        .collect();

    // x holds free entries of the shifted unknown (zero on pinned nodes).
    let mut x = vec![0.0; n];
    if let Some(w) = warm {
        assert_eq!(w.len(), n);
        for k in 0..n {
            if sys.free[k] && w[k].is_finite() {
                x[k] = w[k] - pinned_ext[k];
            }
        }
    }

    let apply = |v: &[f64], out: &mut [f64]| {
        stencil_apply(grid, v, out);
        if let Some(m) = sys.mass {
            for k in 0..n {
                if sys.free[k] {
                    out[k] += m[k] * v[k];
                }
            }
        }
        for k in 0..n {
            if !sys.free[k] {
                out[k] = 0.0;
            }
        }
    };

    let mut r = vec![0.0; n];
    apply(&x, &mut r);
    for k in 0..n {
        r[k] = b[k] - r[k];
    }
    let mut z: Vec<f64> = (0..n).map(|k| r[k] * inv_diag[k]).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];

    let max_iter = 100 + 10 * n_free;
    let target = SOLVE_REL_TOL * b_norm;
    let mut res_norm = dot(&r, &r).sqrt();
    let mut iterations = 0;

    while res_norm > target {
        if iterations >= max_iter {
            return Err(Error::SolverStall {
                solver: "pcg",
                iterations,
                residual: res_norm / b_norm,
            });
        }
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::SolverStall {
                solver: "pcg",
                iterations,
                residual: res_norm / b_norm,
            });
        }
        let alpha = rz / pq;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        res_norm = dot(&r, &r).sqrt();
        iterations += 1;
        if res_norm <= target {
            break;
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }

    for k in 0..n {
        if !sys.free[k] {
            x[k] = pinned_ext[k];
        }
    }
    Ok((
        x,
        SolveStats {
            iterations,
            relative_residual: res_norm / b_norm,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1() -> Grid {
        Grid::line(1.0, 1)
    }

    fn g3() -> Grid {
        Grid::line(1.0, 3)
    }

    #[test]
    fn one_node_stencil_matches_hand_value() {
        let v = GridFunction::new(g1(), vec![0.0625]);
        let av = apply_neg_laplacian(&v);
        assert_eq!(av.loads(), &[0.5]);
    }

    #[test]
    fn three_node_stencil_on_constant_leaves_boundary_rows() {
        let v = GridFunction::constant(g3(), 1.0);
        let av = apply_neg_laplacian(&v);
        assert_eq!(av.loads(), &[16.0, 0.0, 16.0]);
    }

    #[test]
    fn embedding_scales_by_cell_volume() {
        let f = GridFunction::constant(g1(), 1.0);
        assert_eq!(embed_l2(&f).loads(), &[0.5]);
        let f3 = GridFunction::constant(g3(), 1.0);
        assert_eq!(embed_l2(&f3).loads(), &[0.25, 0.25, 0.25]);
    }

    #[test]
    fn norms_match_hand_values_on_one_node_grid() {
        let v = GridFunction::new(g1(), vec![0.0625]);
        assert!((norm_h1(&v).powi(2) - 0.03125).abs() < 1e-15);
        assert!((norm_l2(&v).powi(2) - 0.5 * 0.0625 * 0.0625).abs() < 1e-18);
        let f = DualFunction::new(g1(), vec![0.5]);
        assert!((norm_hminus1(&f).unwrap().powi(2) - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn poisson_solve_on_three_nodes_matches_hand_solution() {
        let f = unit_load(g3());
        let y = solve_poisson(&f, &NodeSet::full(g3())).unwrap();
        let expect = [3.0 / 128.0, 1.0 / 32.0, 3.0 / 128.0];
        for (a, e) in y.values().iter().zip(expect) {
            assert!((a - e).abs() < 1e-14);
        }
    }

    #[test]
    fn restricted_solve_pins_excluded_nodes_to_zero() {
        let f = unit_load(g3());
        let dom = NodeSet::from_indices(g3(), &[0, 2]);
        let y = solve_poisson(&f, &dom).unwrap();
        assert!((y.values()[0] - 1.0 / 128.0).abs() < 1e-15);
        assert_eq!(y.values()[1], 0.0);
        assert!((y.values()[2] - 1.0 / 128.0).abs() < 1e-15);
    }

    #[test]
    fn empty_domain_yields_zero() {
        let f = unit_load(g3());
        let y = solve_poisson(&f, &NodeSet::empty(g3())).unwrap();
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_dim_solve_matches_single_node_hand_value() {
        let g = Grid::rectangle([1.0, 1.0], [1, 1]);
        let f = unit_load(g);
        assert!((f.loads()[0] - 0.25).abs() < 1e-15);
        let y = solve_poisson(&f, &NodeSet::full(g)).unwrap();
        assert!((y.values()[0] - 0.25 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_data_enters_through_the_stencil() {
        // Pin the middle node of the 3-node grid to 1 and solve the outer
        // nodes with zero load: each outer row reads 32 y = 16.
        let g = g3();
        let free = vec![true, false, true];
        let pinned = vec![0.0, 1.0, 0.0];
        let sys = LinearSystem {
            grid: &g,
            free: &free,
            mass: None,
            pinned_values: Some(&pinned),
        };
        let (y, _) = pcg_solve(&sys, &[0.0, 0.0, 0.0], None).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-13);
        assert_eq!(y[1], 1.0);
        assert!((y[2] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn node_set_algebra_roundtrips() {
        let g = g3();
        let a = NodeSet::from_indices(g, &[0, 1]);
        let b = NodeSet::from_indices(g, &[1, 2]);
        assert_eq!(a.intersection(&b).indices(), vec![1]);
        assert_eq!(a.union(&b).count(), 3);
        assert_eq!(a.minus(&b).indices(), vec![0]);
        assert!(a.intersection(&b).is_subset_of(&a));
        assert_eq!(a.complement().indices(), vec![2]);
    }
}
