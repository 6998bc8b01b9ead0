//! Nonnegative node measures, the relaxed problems they induce, and the
//! metric structure used to compare them.
//!
//! A measure assigns each interior node a mass in `[0, +inf]`. Infinite
//! masses eliminate their nodes: the relaxed system `(A + diag(m)) y = f`
//! is solved on the remaining nodes with the eliminated values pinned to
//! zero. The torsion function (relaxed solve of the unit load) metrizes
//! convergence of measures: the distance between two measures is the L2
//! distance of their torsion functions.

use crate::error::Error;
use crate::mesh::{
    apply_neg_laplacian, norm_l2, pcg_solve, unit_load, DualFunction, Grid, GridFunction,
    LinearSystem, NodeSet,
};

/// Values below this threshold count as zero when checking supports and
/// membership conditions on torsion functions.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Nodal mass entries this close to zero on eliminated nodes are treated as
/// exactly zero by the energy functional.
pub const ELIMINATION_TOL: f64 = 1e-12;

/// Nonnegative node measure; entries may be `+inf` (eliminated nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    grid: Grid,
    mass: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(grid: Grid, mass: Vec<f64>) -> DiscreteMeasure {
        assert_eq!(mass.len(), grid.node_count(), "mass count must match grid");
        assert!(
            mass.iter().all(|m| *m >= 0.0 && !m.is_nan()),
            "masses must be nonnegative and not NaN"
        );
        DiscreteMeasure { grid, mass }
    }

    pub fn zero(grid: Grid) -> DiscreteMeasure {
        DiscreteMeasure {
            mass: vec![0.0; grid.node_count()],
            grid,
        }
    }

    /// The measure that is `+inf` on `excluded` and zero elsewhere.
    pub fn from_node_set(excluded: &NodeSet) -> DiscreteMeasure {
        let mass = excluded
            .mask()
            .iter()
            .map(|&b| if b { f64::INFINITY } else { 0.0 })
            .collect();
        DiscreteMeasure {
            grid: *excluded.grid(),
            mass,
        }
    }

    /// Constant-density measure `c` per unit volume (nodal mass `c` times
    /// the cell volume).
    pub fn constant_density(grid: Grid, c: f64) -> DiscreteMeasure {
        assert!(c >= 0.0 && !c.is_nan());
        DiscreteMeasure {
            mass: vec![c * grid.cell_volume(); grid.node_count()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Nodes carrying infinite mass.
    pub fn eliminated(&self) -> NodeSet {
        NodeSet::from_mask(
            self.grid,
            self.mass.iter().map(|m| *m == f64::INFINITY).collect(),
        )
    }

    pub fn is_finite_everywhere(&self) -> bool {
        self.mass.iter().all(|m| m.is_finite())
    }

    /// Nodal sum of two measures; infinite mass absorbs.
    pub fn add(&self, other: &DiscreteMeasure) -> DiscreteMeasure {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        DiscreteMeasure {
            grid: self.grid,
            mass: self
                .mass
                .iter()
                .zip(&other.mass)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Nodal ordering, with `+inf` larger than everything finite.
    pub fn leq(&self, other: &DiscreteMeasure) -> bool {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        self.mass.iter().zip(&other.mass).all(|(a, b)| a <= b)
    }
}

/// Outcome of a relaxed solve, including solver diagnostics.
#[derive(Debug, Clone)]
pub struct RelaxedSolveReport {
    pub solution: GridFunction,
    pub eliminated: NodeSet,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `(A + diag(m)) y = f` with eliminated nodes pinned to zero.
pub fn solve_relaxed(mu: &DiscreteMeasure, f: &DualFunction) -> Result<GridFunction, Error> {
    Ok(solve_relaxed_report(mu, f)?.solution)
}

/// As [`solve_relaxed`], but returns solver diagnostics alongside the
/// solution.
pub fn solve_relaxed_report(
    mu: &DiscreteMeasure,
    f: &DualFunction,
) -> Result<RelaxedSolveReport, Error> {
    assert_eq!(*mu.grid(), *f.grid(), "grid mismatch");
    let grid = *mu.grid();
    let eliminated = mu.eliminated();
    let free: Vec<bool> = eliminated.mask().iter().map(|b| !b).collect();
    let mass: Vec<f64> = mu
        .mass()
        .iter()
        .map(|m| if m.is_finite() { *m } else { 0.0 })
        .collect();
    let sys = LinearSystem {
        grid: &grid,
        free: &free,
        mass: Some(&mass),
        pinned_values: None,
    };
    let (values, stats) = pcg_solve(&sys, f.loads(), None)?;
    Ok(RelaxedSolveReport {
        solution: GridFunction::new(grid, values),
        eliminated,
        iterations: stats.iterations,
        relative_residual: stats.relative_residual,
    })
}

/// Torsion function of a measure: the relaxed solution for the unit load.
/// It is strictly positive exactly on the non-eliminated nodes and zero on
/// the eliminated ones.
pub fn torsion(mu: &DiscreteMeasure) -> Result<GridFunction, Error> {
    solve_relaxed(mu, &unit_load(*mu.grid()))
}

/// Distance between two measures: L2 norm of the difference of their
/// torsion functions. Fails when the measures live on different grids.
pub fn gamma_distance(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64, Error> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let wa = torsion(a)?;
    let wb = torsion(b)?;
    Ok(norm_l2(&wa.add_scaled(-1.0, &wb)))
}

/// Quadratic energy of a function under a measure: the stencil form plus
/// the mass-weighted squared values. Returns `+inf` when the function fails
/// to vanish (beyond [`ELIMINATION_TOL`]) on an eliminated node.
pub fn energy(mu: &DiscreteMeasure, v: &GridFunction) -> f64 {
    assert_eq!(*mu.grid(), *v.grid(), "grid mismatch");
    let mut mass_term = 0.0;
    for (m, x) in mu.mass().iter().zip(v.values()) {
        if *m == f64::INFINITY {
            if x.abs() > ELIMINATION_TOL {
                return f64::INFINITY;
            }
        } else {
            mass_term += m * x * x;
        }
    }
    apply_neg_laplacian(v).pairing(v) + mass_term
}

/// Finite approximation of `mu` at sharpness `n >= 2`.
///
/// With `w` the torsion of `mu`, `w0` the torsion of the zero measure, and
/// `r = unit load - A w` the torsion residual, the approximation carries
/// nodal mass `r_i / (w_i + w0_i / (n - 1))`. Masses are finite, grow
/// monotonically in `n`, and never exceed the finite masses of `mu`.
pub fn radon_approximation(mu: &DiscreteMeasure, n: usize) -> Result<DiscreteMeasure, Error> {
    if n < 2 {
        return Err(Error::BadSchedule {
            detail: format!("approximation sharpness must be at least 2, got {n}"),
        });
    }
    let grid = *mu.grid();
    let w = torsion(mu)?;
    let w0 = torsion(&DiscreteMeasure::zero(grid))?;
    let aw = apply_neg_laplacian(&w);
    let load = unit_load(grid);
    let inv = 1.0 / (n - 1) as f64;
    let mass: Vec<f64> = (0..grid.node_count())
        .map(|k| {
            let r = load.loads()[k] - aw.loads()[k];
            let denom = w.values()[k] + w0.values()[k] * inv;
            // r is the finite mass times the torsion value, hence
            // nonnegative; clamp solver noise.
            (r / denom).max(0.0)
        })
        .collect();
    Ok(DiscreteMeasure::new(grid, mass))
}

/// Node set left after punching periodic holes into a grid, plus a flag
/// telling whether the grid resolves the holes at all.
#[derive(Debug, Clone)]
pub struct Perforation {
    /// Nodes outside every closed disk of the given radius centered at the
    /// period-lattice points.
    pub nodes: NodeSet,
    /// Set when the spacing exceeds the hole radius, so holes may fall
    /// between nodes; the result is still returned.
    pub unresolved: bool,
}

/// Removes every node within `radius` (inclusive) of a lattice of hole
/// centers with the given period. Centers sit at odd half-multiples of the
/// period per axis, so a period of at least twice the extent puts every
/// center outside the domain.
pub fn perforate(grid: Grid, period: f64, radius: f64) -> Perforation {
    assert!(period > 0.0 && period.is_finite(), "period must be positive");
    assert!(radius >= 0.0 && radius.is_finite(), "radius must be nonnegative");
    let h = grid.spacing();
    let unresolved = if grid.dim() == 1 {
        h[0] > radius
    } else {
        h[0].max(h[1]) > radius
    };

    let centers_axis = |extent: f64| -> Vec<f64> {
        // Centers at (i + 1/2) * period whose disks can clip [0, extent].
        let lo = ((-radius) / period - 0.5).floor() as i64;
        let hi = ((extent + radius) / period - 0.5).ceil() as i64;
        (lo..=hi).map(|i| (i as f64 + 0.5) * period).collect()
    };

    let xs = centers_axis(grid.extent()[0]);
    let ys = if grid.dim() == 2 {
        centers_axis(grid.extent()[1])
    } else {
        vec![0.0]
    };

    let r2 = radius * radius;
    let mut mask = vec![true; grid.node_count()];
    for (k, kept) in mask.iter_mut().enumerate() {
        let p = grid.coords(k);
        'outer: for &cy in &ys {
            let dy = p[1] - cy;
            if grid.dim() == 2 && dy.abs() > radius {
                continue;
            }
            for &cx in &xs {
                let dx = p[0] - cx;
                let d2 = if grid.dim() == 2 { dx * dx + dy * dy } else { dx * dx };
                if d2 <= r2 {
                    *kept = false;
                    break 'outer;
                }
            }
        }
    }
    Perforation {
        nodes: NodeSet::from_mask(grid, mask),
        unresolved,
    }
}

/// One row of a sum-convergence probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumProbeRow {
    pub index: usize,
    /// Distance of `mu_seq[index] + inf on c_seq[index]` to the limit sum.
    pub distance: f64,
}

/// Distances of the sums `mu_k + inf_{C_k}` to the limit sum
/// `mu_lim + inf_{C_lim}`, measured in the torsion metric.
pub fn gamma_sum_probe(
    mu_seq: &[DiscreteMeasure],
    c_seq: &[NodeSet],
    mu_lim: &DiscreteMeasure,
    c_lim: &NodeSet,
) -> Result<Vec<SumProbeRow>, Error> {
    if mu_seq.len() != c_seq.len() || mu_seq.is_empty() {
        return Err(Error::BadSchedule {
            detail: format!(
                "need matching nonempty sequences, got {} measures and {} sets",
                mu_seq.len(),
                c_seq.len()
            ),
        });
    }
    let limit = mu_lim.add(&DiscreteMeasure::from_node_set(c_lim));
    let w_lim = torsion(&limit)?;
    let mut rows = Vec::with_capacity(mu_seq.len());
    for (index, (mu, c)) in mu_seq.iter().zip(c_seq).enumerate() {
        if mu.grid() != mu_lim.grid() || c.grid() != mu_lim.grid() {
            return Err(Error::GridMismatch);
        }
        let sum = mu.add(&DiscreteMeasure::from_node_set(c));
        let w = torsion(&sum)?;
        rows.push(SumProbeRow {
            index,
            distance: norm_l2(&w.add_scaled(-1.0, &w_lim)),
        });
    }
    Ok(rows)
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
    fn relaxed_solve_with_finite_mass_matches_hand_value() {
        let mu = DiscreteMeasure::new(g1(), vec![8.0]);
        let f = DualFunction::new(g1(), vec![0.5]);
        let y = solve_relaxed(&mu, &f).unwrap();
        assert!((y.values()[0] - 0.03125).abs() < 1e-16);
    }

    #[test]
    fn eliminated_node_decouples_the_system() {
        let excluded = NodeSet::from_indices(g3(), &[1]);
        let mu = DiscreteMeasure::from_node_set(&excluded);
        let report = solve_relaxed_report(&mu, &unit_load(g3())).unwrap();
        let y = report.solution.values();
        assert!((y[0] - 1.0 / 128.0).abs() < 1e-15);
        assert_eq!(y[1], 0.0);
        assert!((y[2] - 1.0 / 128.0).abs() < 1e-15);
        assert_eq!(report.eliminated.indices(), vec![1]);
    }

    #[test]
    fn torsion_values_on_one_node_grid() {
        let w0 = torsion(&DiscreteMeasure::zero(g1())).unwrap();
        assert!((w0.values()[0] - 0.0625).abs() < 1e-16);
        let w8 = torsion(&DiscreteMeasure::new(g1(), vec![8.0])).unwrap();
        assert!((w8.values()[0] - 0.03125).abs() < 1e-16);
    }

    #[test]
    fn torsion_metric_matches_hand_values() {
        let zero = DiscreteMeasure::zero(g1());
        let wall = DiscreteMeasure::from_node_set(&NodeSet::full(g1()));
        let d = gamma_distance(&zero, &wall).unwrap();
        assert!((d - 0.0625 * 0.5f64.sqrt()).abs() < 1e-15);
        let m8 = DiscreteMeasure::new(g1(), vec![8.0]);
        let d8 = gamma_distance(&zero, &m8).unwrap();
        assert!((d8 - 0.03125 * 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn distance_between_grids_is_rejected() {
        let a = DiscreteMeasure::zero(g1());
        let b = DiscreteMeasure::zero(g3());
        assert_eq!(gamma_distance(&a, &b), Err(Error::GridMismatch));
    }

    #[test]
    fn energy_adds_the_mass_form_and_respects_elimination() {
        let mu = DiscreteMeasure::new(g1(), vec![8.0]);
        let v = GridFunction::new(g1(), vec![0.03125]);
        assert!((energy(&mu, &v) - 0.015625).abs() < 1e-16);

        let wall = DiscreteMeasure::from_node_set(&NodeSet::full(g1()));
        assert_eq!(energy(&wall, &v), f64::INFINITY);
        assert_eq!(energy(&wall, &GridFunction::zeros(g1())), 0.0);
    }

    #[test]
    fn radon_masses_follow_the_closed_form_on_one_node() {
        let mu = DiscreteMeasure::new(g1(), vec![8.0]);
        for n in 2..=6 {
            let approx = radon_approximation(&mu, n).unwrap();
            let expect = 8.0 * (n as f64 - 1.0) / (n as f64 + 1.0);
            assert!(
                (approx.mass()[0] - expect).abs() < 1e-12,
                "n = {n}: {} vs {expect}",
                approx.mass()[0]
            );
            let d = gamma_distance(&approx, &mu).unwrap();
            let expect_d = 0.5f64.sqrt() / (32.0 * n as f64);
            assert!((d - expect_d).abs() < 1e-13);
        }
    }

    #[test]
    fn radon_rejects_sharpness_below_two() {
        let mu = DiscreteMeasure::zero(g1());
        assert!(matches!(
            radon_approximation(&mu, 1),
            Err(Error::BadSchedule { .. })
        ));
    }

    #[test]
    fn radon_of_eliminated_node_grows_linearly() {
        let wall = DiscreteMeasure::from_node_set(&NodeSet::full(g1()));
        // w = 0, w0 = 1/16, r = 1/2: mass = (n - 1) * 8.
        for n in [2usize, 3, 5] {
            let approx = radon_approximation(&wall, n).unwrap();
            assert!((approx.mass()[0] - 8.0 * (n as f64 - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn perforation_keeps_everything_when_centers_miss_the_domain() {
        // Spacing is 1/9, so a radius of 0.12 is resolved; the nearest
        // center at 1.25 stays well clear of the domain.
        let g = Grid::square(8);
        let p = perforate(g, 2.5, 0.12);
        assert_eq!(p.nodes.count(), 64);
        assert!(!p.unresolved);
    }

    #[test]
    fn perforation_excludes_a_hand_counted_cross() {
        // 3x3 nodes at quarter points; one hole at the center with radius
        // exactly one spacing removes the middle node and its neighbors.
        let g = Grid::square(3);
        let p = perforate(g, 1.0, 0.25);
        let kept = p.nodes.indices();
        assert_eq!(kept, vec![0, 2, 6, 8]);
    }

    #[test]
    fn coarse_grid_sets_the_unresolved_flag() {
        // The center node sits exactly on the hole center at (0.5, 0.5)
        // and is removed even though the radius is below the spacing.
        let g = Grid::square(3);
        let p = perforate(g, 1.0, 0.1);
        assert!(p.unresolved);
        assert_eq!(p.nodes.count(), 8);
        assert!(!p.nodes.contains(4));
    }

    #[test]
    fn sum_probe_distances_shrink_for_nested_sets() {
        let g = g3();
        let mu_lim = DiscreteMeasure::zero(g);
        let c_lim = NodeSet::from_indices(g, &[1]);
        let c_seq = vec![NodeSet::from_indices(g, &[0, 1]), c_lim.clone()];
        let mu_seq = vec![DiscreteMeasure::zero(g), DiscreteMeasure::zero(g)];
        let rows = gamma_sum_probe(&mu_seq, &c_seq, &mu_lim, &c_lim).unwrap();
        assert!(rows[0].distance > rows[1].distance);
        assert!(rows[1].distance < 1e-13);
    }

    #[test]
    fn sum_probe_rejects_mismatched_sequences() {
        let g = g1();
        let rows = gamma_sum_probe(
            &[DiscreteMeasure::zero(g)],
            &[],
            &DiscreteMeasure::zero(g),
            &NodeSet::empty(g),
        );
        assert!(matches!(rows, Err(Error::BadSchedule { .. })));
    }

    #[test]
    fn ordered_masses_give_ordered_torsions() {
        let g = g3();
        let lo = DiscreteMeasure::new(g, vec![0.0, 2.0, 1.0]);
        let hi = DiscreteMeasure::new(g, vec![4.0, f64::INFINITY, 1.0]);
        assert!(lo.leq(&hi));
        let wl = torsion(&lo).unwrap();
        let wh = torsion(&hi).unwrap();
        for (a, b) in wl.values().iter().zip(wh.values()) {
            assert!(a >= b);
        }
    }
}
