//! The discrete obstacle problem, its contact-set classification, and the
//! directional derivative of its solution operator.
//!
//! For loads `u` and obstacle `psi`, the solution is the unique `y >= psi`
//! with multiplier `xi = A y - u` satisfying `xi >= 0` and `xi (y - psi) = 0`
//! componentwise, where `A` is the scaled negative-Laplacian stencil. The
//! primary solver is a primal-dual active-set iteration; a projected SOR
//! sweep serves as an independent second route and as fallback.

use crate::error::Error;
use crate::mesh::{
    apply_neg_laplacian, norm_h1, pcg_solve, solve_poisson, DualFunction, Grid, GridFunction,
    LinearSystem, NodeSet,
};

/// Threshold on `y - psi` for classifying a node as active, applied after
/// scaling by the dual norm of the load plus one.
pub const EPS_ACTIVE: f64 = 1e-8;
/// Threshold on the multiplier for classifying an active node as strictly
/// active, scaled the same way.
pub const EPS_MULTIPLIER: f64 = 1e-8;
/// Overrelaxation factor of the projected SOR fallback.
pub const PSOR_OMEGA: f64 = 1.5;
/// Natural-residual target of the projected SOR iteration.
pub const PSOR_TOL: f64 = 1e-12;

/// Obstacle problem data: a grid and the obstacle. Obstacle entries equal to
/// `-inf` mark unconstrained nodes; `+inf` entries are rejected at solve
/// time because they empty the constraint set.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleProblem {
    psi: GridFunction,
}

impl ObstacleProblem {
    pub fn new(psi: GridFunction) -> ObstacleProblem {
        ObstacleProblem { psi }
    }

    /// Problem without constraints (obstacle `-inf` everywhere).
    pub fn unconstrained(grid: Grid) -> ObstacleProblem {
        ObstacleProblem {
            psi: GridFunction::constant(grid, f64::NEG_INFINITY),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.psi.grid()
    }

    pub fn psi(&self) -> &GridFunction {
        &self.psi
    }
}

/// Solution of an obstacle problem together with the classified contact
/// sets and the thresholds that produced them.
#[derive(Debug, Clone)]
pub struct ObstacleResult {
    y: GridFunction,
    xi: DualFunction,
    active: NodeSet,
    strictly_active: NodeSet,
    biactive: NodeSet,
    inactive: NodeSet,
    eps_active_scaled: f64,
    eps_multiplier_scaled: f64,
    iterations: usize,
}

impl ObstacleResult {
    pub fn y(&self) -> &GridFunction {
        &self.y
    }

    /// Multiplier `A y - u`, exact up to the linear-solver residual.
    pub fn xi(&self) -> &DualFunction {
        &self.xi
    }

    pub fn active(&self) -> &NodeSet {
        &self.active
    }

    pub fn strictly_active(&self) -> &NodeSet {
        &self.strictly_active
    }

    pub fn biactive(&self) -> &NodeSet {
        &self.biactive
    }

    pub fn inactive(&self) -> &NodeSet {
        &self.inactive
    }

    /// Effective threshold used on `y - psi`.
    pub fn eps_active_scaled(&self) -> f64 {
        self.eps_active_scaled
    }

    /// Effective threshold used on the multiplier.
    pub fn eps_multiplier_scaled(&self) -> f64 {
        self.eps_multiplier_scaled
    }

    /// Outer active-set iterations of the solve.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn grid(&self) -> &Grid {
        self.y.grid()
    }

    /// Deterministic identity of this result, used to anchor derivative
    /// elements to the solve they were built from.
    pub fn fingerprint(&self) -> u64 {
        let mut f = Fnv::new();
        let g = self.y.grid();
        f.eat_u64(g.dim() as u64);
        f.eat_u64(g.nodes_per_axis()[0] as u64);
        f.eat_u64(g.nodes_per_axis()[1] as u64);
        f.eat_u64(g.extent()[0].to_bits());
        f.eat_u64(g.extent()[1].to_bits());
        for v in self.y.values() {
            f.eat_u64(v.to_bits());
        }
        for v in self.xi.loads() {
            f.eat_u64(v.to_bits());
        }
        for &b in self.active.mask() {
            f.eat_u64(b as u64);
        }
        for &b in self.strictly_active.mask() {
            f.eat_u64(b as u64);
        }
        f.finish()
    }
}

struct Fnv {
    state: u64,
}

impl Fnv {
    fn new() -> Fnv {
        Fnv {
            state: 0xcbf2_9ce4_8422_2325,
        }
    }

    fn eat_u64(&mut self, x: u64) {
        for shift in [0u32, 8, 16, 24, 32, 40, 48, 56] {
            self.state ^= (x >> shift) & 0xff;
            self.state = self.state.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.state
    }
}

fn check_feasible(prob: &ObstacleProblem) -> Result<(), Error> {
    if let Some(k) = prob.psi.values().iter().position(|v| *v == f64::INFINITY) {
        return Err(Error::Infeasible {
            detail: format!("obstacle is +inf at node {k}"),
        });
    }
    Ok(())
}

/// Solves the obstacle problem for the load `u` and classifies the contact
/// sets.
///
/// Classification thresholds are [`EPS_ACTIVE`] and [`EPS_MULTIPLIER`]
/// scaled by `1 +` the dual norm of `u`; nodes exactly on a threshold are
/// classified on the active (respectively strictly active) side's boundary
/// rule: active uses `<=`, strictly active uses `>`.
pub fn solve_obstacle(prob: &ObstacleProblem, u: &DualFunction) -> Result<ObstacleResult, Error> {
    check_feasible(prob)?;
    let grid = *prob.grid();
    assert_eq!(grid, *u.grid(), "grid mismatch");
    let n = grid.node_count();

    // Unconstrained solve: seeds the active set, provides the warm start,
    // and yields the dual norm of u as a byproduct.
    let y_unc = solve_poisson(u, &NodeSet::full(grid))?;
    let scale = u.pairing(&y_unc).max(0.0).sqrt() + 1.0;

    let psi = prob.psi.values();
    let constrained: Vec<bool> = psi.iter().map(|p| *p > f64::NEG_INFINITY).collect();
    let mut active: Vec<bool> = (0..n)
        .map(|k| constrained[k] && y_unc.values()[k] <= psi[k])
        .collect();

    let none_eliminated = vec![false; n];
    let outcome = pdas_iterate(
        &grid,
        &none_eliminated,
        &constrained,
        psi,
        u.loads(),
        &mut active,
        Some(y_unc.values()),
    );
    let (y_values, iterations) = match outcome {
        Ok(pair) => pair,
        Err(_) => psor_fallback(&grid, &constrained, psi, u.loads())?,
    };

    let y = GridFunction::new(grid, y_values);
    let xi = DualFunction::new(
        grid,
        apply_neg_laplacian(&y)
            .loads()
            .iter()
            .zip(u.loads())
            .map(|(a, b)| a - b)
            .collect(),
    );

    let eps_active_scaled = EPS_ACTIVE * scale;
    let eps_multiplier_scaled = EPS_MULTIPLIER * scale;
    let mut active_mask = vec![false; n];
    let mut strict_mask = vec![false; n];
    for k in 0..n {
        if constrained[k] && y.values()[k] - psi[k] <= eps_active_scaled {
            active_mask[k] = true;
            if xi.loads()[k] > eps_multiplier_scaled {
                strict_mask[k] = true;
            }
        }
    }
    let active = NodeSet::from_mask(grid, active_mask);
    let strictly_active = NodeSet::from_mask(grid, strict_mask);
    let biactive = active.minus(&strictly_active);
    let inactive = active.complement();

    Ok(ObstacleResult {
        y,
        xi,
        active,
        strictly_active,
        biactive,
        inactive,
        eps_active_scaled,
        eps_multiplier_scaled,
        iterations,
    })
}

/// One primal-dual active-set iteration loop. `eliminated` nodes are pinned
/// to zero throughout and never classified; `active` is the starting guess
/// and is updated in place. Returns the solution values and the number of
/// outer iterations.
fn pdas_iterate(
    grid: &Grid,
    eliminated: &[bool],
    constrained: &[bool],
    psi: &[f64],
    u: &[f64],
    active: &mut Vec<bool>,
    warm: Option<&[f64]>,
) -> Result<(Vec<f64>, usize), Error> {
    let n = grid.node_count();
    let diag = grid.stencil_diagonal();
    let max_outer = n + 50;

    let mut pinned_values = vec![0.0; n];
    let mut free = vec![false; n];
    let mut y: Vec<f64> = warm.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut xi = vec![0.0; n];
    let mut iterations = 0;

    loop {
        iterations += 1;
        for k in 0..n {
            free[k] = !eliminated[k] && !active[k];
            pinned_values[k] = if eliminated[k] {
                0.0
            } else if active[k] {
                psi[k]
            } else {
                0.0
            };
        }
        let sys = LinearSystem {
            grid,
            free: &free,
            mass: None,
            pinned_values: Some(&pinned_values),
        };
        let (y_new, _) = pcg_solve(&sys, u, Some(&y))?;
        y = y_new;

        crate::mesh::stencil_apply(grid, &y, &mut xi);
        for k in 0..n {
            xi[k] -= u[k];
        }

        // Natural residual in value units; accepting at noise level breaks
        // ties that would otherwise flip a grazing node forever.
        let mut scale_y = 1.0f64;
        for &v in &y {
            scale_y = scale_y.max(v.abs());
        }
        let mut residual = 0.0f64;
        for k in 0..n {
            if eliminated[k] || !constrained[k] {
                continue;
            }
            let target = psi[k].max(y[k] - xi[k] / diag);
            residual = residual.max((y[k] - target).abs());
        }
        if residual <= 1e-13 * scale_y {
            return Ok((y, iterations));
        }

        let mut changed = false;
        for k in 0..n {
            if eliminated[k] || !constrained[k] {
                continue;
            }
            let next = xi[k] + psi[k] - y[k] > 0.0;
            if next != active[k] {
                changed = true;
                active[k] = next;
            }
        }
        if !changed {
            return Ok((y, iterations));
        }
        if iterations >= max_outer {
            return Err(Error::NoConvergence {
                iterations,
                residual,
            });
        }
    }
}

/// PSOR rescue path: sweep to high accuracy, classify from the sweep, then
/// polish with one restricted solve.
fn psor_fallback(
    grid: &Grid,
    constrained: &[bool],
    psi: &[f64],
    u: &[f64],
) -> Result<(Vec<f64>, usize), Error> {
    let (y_sweep, sweeps) = psor_iterate(grid, psi, u, PSOR_OMEGA, PSOR_TOL, 200_000)?;
    let n = grid.node_count();
    let diag = grid.stencil_diagonal();
    let mut active = vec![false; n];
    for k in 0..n {
        active[k] = constrained[k] && y_sweep[k] - psi[k] <= 1e-9 * (1.0 + psi[k].abs());
    }
    let mut xi = vec![0.0; n];
    let mut free = vec![false; n];
    let mut pinned_values = vec![0.0; n];
    for k in 0..n {
        free[k] = !active[k];
        pinned_values[k] = if active[k] { psi[k] } else { 0.0 };
    }
    let sys = LinearSystem {
        grid,
        free: &free,
        mass: None,
        pinned_values: Some(&pinned_values),
    };
    let (y, _) = pcg_solve(&sys, u, Some(&y_sweep))?;
    crate::mesh::stencil_apply(grid, &y, &mut xi);
    let mut residual = 0.0f64;
    for k in 0..n {
        xi[k] -= u[k];
        if !constrained[k] {
            continue;
        }
        let target = psi[k].max(y[k] - xi[k] / diag);
        residual = residual.max((y[k] - target).abs());
    }
    if residual > 1e-10 {
        return Err(Error::NoConvergence {
            iterations: sweeps,
            residual,
        });
    }
    Ok((y, sweeps))
}

/// Projected SOR on the full complementarity system. Independent of the
/// active-set path: no restricted solves, no classification, just sweeps.
///
/// Returns the iterate and the number of sweeps once the natural residual
/// `max_k |y_k - max(psi_k, y_k - (A y - u)_k / A_kk)|` falls below
/// `tol * (1 + max |y|)`.
pub fn solve_obstacle_psor(
    prob: &ObstacleProblem,
    u: &DualFunction,
) -> Result<GridFunction, Error> {
    check_feasible(prob)?;
    let grid = *prob.grid();
    assert_eq!(grid, *u.grid(), "grid mismatch");
    let (y, _) = psor_iterate(&grid, prob.psi.values(), u.loads(), PSOR_OMEGA, PSOR_TOL, 200_000)?;
    Ok(GridFunction::new(grid, y))
}

fn psor_iterate(
    grid: &Grid,
    psi: &[f64],
    u: &[f64],
    omega: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<(Vec<f64>, usize), Error> {
    let n = grid.node_count();
    let [nx, ny] = grid.nodes_per_axis();
    let hx2inv = 1.0 / (grid.spacing()[0] * grid.spacing()[0]);
    let hy2inv = if grid.dim() == 2 {
        1.0 / (grid.spacing()[1] * grid.spacing()[1])
    } else {
        0.0
    };
    let diag = grid.stencil_diagonal();
    let mut y = vec![0.0; n];

    let neighbor_sum = |y: &[f64], ix: usize, iy: usize, k: usize| -> f64 {
        let mut s = 0.0;
        if ix > 0 {
            s += y[k - 1] * hx2inv;
        }
        if ix + 1 < nx {
            s += y[k + 1] * hx2inv;
        }
        if iy > 0 {
            s += y[k - nx] * hy2inv;
        }
        if iy + 1 < ny {
            s += y[k + nx] * hy2inv;
        }
        s
    };

    let mut sweeps = 0;
    loop {
        sweeps += 1;
        for iy in 0..ny {
            for ix in 0..nx {
                let k = iy * nx + ix;
                let gs = (u[k] + neighbor_sum(&y, ix, iy, k)) / diag;
                let cand = y[k] + omega * (gs - y[k]);
                y[k] = cand.max(psi[k]);
            }
        }
        // Natural residual, checked every sweep; the sweep itself is the
        // expensive part so this costs one extra pass.
        let mut res = 0.0f64;
        let mut scale = 1.0f64;
        for iy in 0..ny {
            for ix in 0..nx {
                let k = iy * nx + ix;
                scale = scale.max(y[k].abs());
                let unproj = (u[k] + neighbor_sum(&y, ix, iy, k)) / diag;
                let target = unproj.max(psi[k]);
                res = res.max((y[k] - target).abs());
            }
        }
        if res <= tol * scale {
            return Ok((y, sweeps));
        }
        if sweeps >= max_sweeps {
            return Err(Error::SolverStall {
                solver: "psor",
                iterations: sweeps,
                residual: res / scale,
            });
        }
    }
}

/// Directional derivative of the solution operator at the solved point in
/// direction `h`: the minimizer of `1/2 <A d, d> - <h, d>` over directions
/// that vanish on the strictly active set and are nonnegative on the
/// biactive set.
pub fn directional_derivative(
    res: &ObstacleResult,
    h: &DualFunction,
) -> Result<GridFunction, Error> {
    let grid = *res.grid();
    assert_eq!(grid, *h.grid(), "grid mismatch");
    let n = grid.node_count();

    let eliminated = res.strictly_active.mask();
    let biactive = res.biactive.mask();
    let psi_cone: Vec<f64> = (0..n)
        .map(|k| if biactive[k] { 0.0 } else { f64::NEG_INFINITY })
        .collect();
    let constrained: Vec<bool> = (0..n).map(|k| !eliminated[k] && biactive[k]).collect();
    let mut active = vec![false; n];
    let (delta, _) = pdas_iterate(
        &grid,
        eliminated,
        &constrained,
        &psi_cone,
        h.loads(),
        &mut active,
        None,
    )?;
    Ok(GridFunction::new(grid, delta))
}

/// A point is a differentiability point exactly when the biactive set is
/// empty; the derivative is then the restricted Poisson solve on the
/// inactive set.
pub fn is_gateaux_point(res: &ObstacleResult) -> bool {
    res.biactive.is_all_empty()
}

/// One row of a difference-quotient comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotientSample {
    pub t: f64,
    /// H1 distance between `(S(u + t h) - S(u)) / t` and the directional
    /// derivative at `u` in direction `h`.
    pub h1_error: f64,
}

/// Compares difference quotients of the solution operator against the
/// directional derivative for each positive step in `t_list`.
pub fn difference_quotient_probe(
    prob: &ObstacleProblem,
    u: &DualFunction,
    res: &ObstacleResult,
    h: &DualFunction,
    t_list: &[f64],
) -> Result<Vec<QuotientSample>, Error> {
    if t_list.is_empty() {
        return Err(Error::BadSchedule {
            detail: "empty step list".to_string(),
        });
    }
    if let Some(bad) = t_list.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::BadSchedule {
            detail: format!("steps must be positive and finite, got {bad}"),
        });
    }
    let delta = directional_derivative(res, h)?;
    let mut samples = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let shifted = u.add_scaled(t, h);
        let perturbed = solve_obstacle(prob, &shifted)?;
        let quotient = perturbed.y().add_scaled(-1.0, res.y()).scale(1.0 / t);
        let h1_error = norm_h1(&quotient.add_scaled(-1.0, &delta));
        samples.push(QuotientSample { t, h1_error });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{norm_hminus1, unit_load};

    fn g1() -> Grid {
        Grid::line(1.0, 1)
    }

    fn strict_problem() -> (ObstacleProblem, DualFunction) {
        let prob = ObstacleProblem::new(GridFunction::new(g1(), vec![-0.01]));
        let u = DualFunction::new(g1(), vec![-0.5]);
        (prob, u)
    }

    fn biactive_problem() -> (ObstacleProblem, DualFunction) {
        let prob = ObstacleProblem::new(GridFunction::new(g1(), vec![-0.0625]));
        let u = DualFunction::new(g1(), vec![-0.5]);
        (prob, u)
    }

    #[test]
    fn contact_with_positive_multiplier_is_strictly_active() {
        let (prob, u) = strict_problem();
        let res = solve_obstacle(&prob, &u).unwrap();
        assert_eq!(res.y().values(), &[-0.01]);
        assert!((res.xi().loads()[0] - 0.42).abs() < 1e-12);
        assert_eq!(res.active().indices(), vec![0]);
        assert_eq!(res.strictly_active().indices(), vec![0]);
        assert!(res.biactive().is_all_empty());
        assert!(is_gateaux_point(&res));
    }

    #[test]
    fn unconstrained_node_stays_inactive() {
        let prob = ObstacleProblem::unconstrained(g1());
        let u = DualFunction::new(g1(), vec![0.5]);
        let res = solve_obstacle(&prob, &u).unwrap();
        assert!((res.y().values()[0] - 0.0625).abs() < 1e-14);
        assert!(res.xi().loads()[0].abs() < 1e-12);
        assert_eq!(res.inactive().count(), 1);
        assert!(is_gateaux_point(&res));
    }

    #[test]
    fn grazing_contact_with_zero_multiplier_is_biactive() {
        let (prob, u) = biactive_problem();
        let res = solve_obstacle(&prob, &u).unwrap();
        assert_eq!(res.y().values(), &[-0.0625]);
        assert!(res.xi().loads()[0].abs() < 1e-12);
        assert_eq!(res.biactive().indices(), vec![0]);
        assert!(res.strictly_active().is_all_empty());
        assert!(!is_gateaux_point(&res));
    }

    #[test]
    fn infinite_obstacle_is_rejected() {
        let prob = ObstacleProblem::new(GridFunction::new(g1(), vec![f64::INFINITY]));
        let u = DualFunction::new(g1(), vec![0.0]);
        match solve_obstacle(&prob, &u) {
            Err(Error::Infeasible { .. }) => {}
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn derivative_vanishes_where_strictly_active() {
        let (prob, u) = strict_problem();
        let res = solve_obstacle(&prob, &u).unwrap();
        let h = DualFunction::new(g1(), vec![0.7]);
        let delta = directional_derivative(&res, &h).unwrap();
        assert_eq!(delta.values(), &[0.0]);
    }

    #[test]
    fn derivative_on_biactive_node_is_one_sided() {
        let (prob, u) = biactive_problem();
        let res = solve_obstacle(&prob, &u).unwrap();
        let up = directional_derivative(&res, &DualFunction::new(g1(), vec![0.8])).unwrap();
        assert!((up.values()[0] - 0.1).abs() < 1e-13);
        let down = directional_derivative(&res, &DualFunction::new(g1(), vec![-0.8])).unwrap();
        assert_eq!(down.values(), &[0.0]);
    }

    #[test]
    fn derivative_on_inactive_point_is_linear_solve() {
        let prob = ObstacleProblem::unconstrained(g1());
        let u = DualFunction::new(g1(), vec![0.5]);
        let res = solve_obstacle(&prob, &u).unwrap();
        let h = DualFunction::new(g1(), vec![0.8]);
        let delta = directional_derivative(&res, &h).unwrap();
        assert!((delta.values()[0] - 0.1).abs() < 1e-13);
    }

    #[test]
    fn quotient_probe_is_exact_in_the_piecewise_linear_regime() {
        let (prob, u) = biactive_problem();
        let res = solve_obstacle(&prob, &u).unwrap();
        let h = DualFunction::new(g1(), vec![0.8]);
        let samples = difference_quotient_probe(&prob, &u, &res, &h, &[0.1, 0.01]).unwrap();
        for s in samples {
            assert!(s.h1_error < 1e-10, "error {} at t {}", s.h1_error, s.t);
        }
    }

    #[test]
    fn quotient_probe_rejects_nonpositive_steps() {
        let (prob, u) = biactive_problem();
        let res = solve_obstacle(&prob, &u).unwrap();
        let h = DualFunction::new(g1(), vec![0.8]);
        match difference_quotient_probe(&prob, &u, &res, &h, &[0.0]) {
            Err(Error::BadSchedule { .. }) => {}
            other => panic!("expected schedule error, got {other:?}"),
        }
    }

    #[test]
    fn active_set_and_sweep_paths_agree_on_a_contact_rich_instance() {
        let grid = Grid::line(1.0, 15);
        let n = grid.node_count();
        let psi: Vec<f64> = (0..n)
            .map(|k| {
                let x = grid.coords(k)[0];
                -0.05 - 0.3 * (x - 0.5).abs()
            })
            .collect();
        let prob = ObstacleProblem::new(GridFunction::new(grid, psi));
        let u = DualFunction::new(grid, vec![-0.08; n]);
        let res = solve_obstacle(&prob, &u).unwrap();
        let sweep = solve_obstacle_psor(&prob, &u).unwrap();
        for (a, b) in res.y().values().iter().zip(sweep.values()) {
            assert!((a - b).abs() < 1e-9);
        }
        // Complementarity at the active-set solution.
        for k in 0..n {
            let gap = res.y().values()[k] - prob.psi().values()[k];
            assert!(gap >= -1e-12);
            assert!(res.xi().loads()[k] >= -1e-12);
            assert!((gap * res.xi().loads()[k]).abs() <= 1e-10);
        }
    }

    #[test]
    fn classification_scale_follows_the_load_norm() {
        let (prob, u) = strict_problem();
        let res = solve_obstacle(&prob, &u).unwrap();
        let expected = EPS_ACTIVE * (norm_hminus1(&u).unwrap() + 1.0);
        assert!((res.eps_active_scaled() - expected).abs() < 1e-20);
    }

    #[test]
    fn fingerprints_separate_different_solves() {
        let (prob, u) = strict_problem();
        let res = solve_obstacle(&prob, &u).unwrap();
        let res_again = solve_obstacle(&prob, &u).unwrap();
        assert_eq!(res.fingerprint(), res_again.fingerprint());
        let other = solve_obstacle(&prob, &unit_load(g1())).unwrap();
        assert_ne!(res.fingerprint(), other.fingerprint());
    }
}
