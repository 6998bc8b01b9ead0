//! Random obstacle instances with prescribed contact structure.
//!
//! Assigning each node a role, choosing the state and multiplier values
//! for that role, and assembling the load as `A y - xi` produces an
//! instance whose unique solution is the designed pair. The margins (0.1
//! minimum gap and multiplier) keep the roles far from the classification
//! tolerances.

use capax_core::mesh::{apply_neg_laplacian, DualFunction, Grid, GridFunction};
use capax_core::obstacle::{solve_obstacle, ObstacleProblem, ObstacleResult};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Node role counts requested from [`designed_instance`].
#[derive(Debug, Clone, Copy)]
pub(crate) enum ContactPlan {
    /// Strict contact or no contact per node, no biactivity.
    StrictOnly,
    /// Roughly a third of the nodes in each role.
    Mixed,
    /// Exactly this many biactive nodes, the rest split between strict
    /// and inactive.
    ExactBiactive(usize),
}

/// A designed instance: problem, load, and the roles that were assigned.
pub(crate) struct Designed {
    pub prob: ObstacleProblem,
    pub u: DualFunction,
    pub strict: Vec<usize>,
    pub biactive: Vec<usize>,
}

pub(crate) fn designed_instance(
    grid: Grid,
    plan: ContactPlan,
    rng: &mut ChaCha8Rng,
) -> Designed {
    let n = grid.node_count();
    let mut roles = vec![0u8; n];
    match plan {
        ContactPlan::StrictOnly => {
            for role in roles.iter_mut() {
                *role = if rng.gen_bool(0.5) { 0 } else { 2 };
            }
        }
        ContactPlan::Mixed => {
            for role in roles.iter_mut() {
                *role = rng.gen_range(0..3);
            }
        }
        ContactPlan::ExactBiactive(b) => {
            assert!(b <= n, "more biactive nodes requested than the grid has");
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            for &k in order.iter().take(b) {
                roles[k] = 1;
            }
            for &k in order.iter().skip(b) {
                roles[k] = if rng.gen_bool(0.5) { 0 } else { 2 };
            }
        }
    }

    let psi = GridFunction::new(grid, (0..n).map(|_| rng.gen_range(-1.0..-0.01)).collect());
    let mut y = psi.values().to_vec();
    let mut xi = vec![0.0; n];
    let mut strict = Vec::new();
    let mut biactive = Vec::new();
    for k in 0..n {
        match roles[k] {
            0 => {
                strict.push(k);
                xi[k] = rng.gen_range(0.1..1.0);
            }
            1 => biactive.push(k),
            _ => y[k] += rng.gen_range(0.1..1.0),
        }
    }
    let y = GridFunction::new(grid, y);
    let u = apply_neg_laplacian(&y).add_scaled(-1.0, &DualFunction::new(grid, xi));
    Designed {
        prob: ObstacleProblem::new(psi),
        u,
        strict,
        biactive,
    }
}

impl Designed {
    /// Solves the instance and checks that the assigned roles survived.
    pub(crate) fn solve(&self) -> Result<ObstacleResult, String> {
        let res = solve_obstacle(&self.prob, &self.u).map_err(|e| e.to_string())?;
        for &k in &self.strict {
            if !res.strictly_active().contains(k) {
                return Err(format!("designed strict node {k} was not classified strict"));
            }
        }
        for &k in &self.biactive {
            if !res.biactive().contains(k) {
                return Err(format!("designed biactive node {k} was not classified biactive"));
            }
        }
        if res.biactive().count() != self.biactive.len() {
            return Err("solve produced extra biactive nodes".to_string());
        }
        Ok(res)
    }
}
