//! The acceptance suite: ten named criteria with pinned tolerances,
//! shared by `capax verify` and the `acceptance` integration tests.
//!
//! Each criterion runs self-contained solver experiments and reports a
//! measured summary alongside its verdict, so a failure names the number
//! that broke, not just the fact.

use std::path::PathBuf;
use std::time::Instant;

use capax_core::control::{
    audit_stationarity, optimize, AuditId, AuditReport, ControlProblem, OptimizeOptions,
    StationarityPoint, AUDIT_TOL,
};
use capax_core::derivatives::{
    approach_sequence_pbss, pbss_element, weak_weak_example, WeakWeakConfig,
};
use capax_core::measures::{
    gamma_distance, gamma_sum_probe, radon_approximation, torsion, DiscreteMeasure,
};
use capax_core::mesh::{
    apply_neg_laplacian, embed_l2, norm_hminus1, solve_poisson, unit_load, DualFunction, Grid,
    GridFunction, NodeSet,
};
use capax_core::obstacle::{
    difference_quotient_probe, is_gateaux_point, solve_obstacle, solve_obstacle_psor,
    ObstacleProblem,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::design::{designed_instance, ContactPlan};
use crate::experiments::experiment_rng;

/// Criterion names in suite order.
pub const CRITERIA: [&str; 10] = [
    "oracle_equivalence",
    "gateaux_characterization",
    "pbss_characterization",
    "torsion_support",
    "radon_approximation",
    "sum_theorem",
    "strange_term",
    "control_path_audits",
    "comparison_principle",
    "determinism",
];

/// Per-criterion knobs a verify config may override.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    /// Replaces the criterion's headline tolerance.
    pub tol: Option<f64>,
    /// Replaces the criterion's instance count.
    pub instances: Option<usize>,
}

/// Verdict and measured summary of one criterion.
#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub summary: String,
}

/// Inputs shared by all criteria.
#[derive(Debug, Clone)]
pub struct VerifyContext {
    pub seed: u64,
    /// Path to the `capax` binary, needed only by `determinism`.
    pub binary: Option<PathBuf>,
    /// Scratch directory for criteria that write files.
    pub scratch: PathBuf,
}

/// Runs one criterion by name.
pub fn run_criterion(name: &str, ov: Overrides, ctx: &VerifyContext) -> CriterionOutcome {
    let rng = experiment_rng(ctx.seed, name);
    match name {
        "oracle_equivalence" => oracle_equivalence(ov, rng),
        "gateaux_characterization" => gateaux_characterization(ov, rng),
        "pbss_characterization" => pbss_characterization(ov, rng),
        "torsion_support" => torsion_support(ov, rng),
        "radon_approximation" => radon_criterion(ov, rng),
        "sum_theorem" => sum_theorem(ov, rng),
        "strange_term" => strange_term(ov),
        "control_path_audits" => control_path_audits(ov, rng),
        "comparison_principle" => comparison_principle(ov, rng),
        "determinism" => determinism(ctx),
        other => CriterionOutcome {
            name: "unknown",
            pass: false,
            summary: format!("unknown criterion '{other}'"),
        },
    }
}

fn outcome(name: &'static str, pass: bool, summary: String) -> CriterionOutcome {
    CriterionOutcome { name, pass, summary }
}

/// Least-squares slope of `ln y` against `ln x`.
fn fitted_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

fn oracle_equivalence(ov: Overrides, mut rng: ChaCha8Rng) -> CriterionOutcome {
    let tol = ov.tol.unwrap_or(1e-8);
    let comp_tol = 1e-10;
    let per_grid = ov.instances.unwrap_or(34);
    let budget_secs = 60.0;
    let start = Instant::now();
    let mut worst_diff = 0.0f64;
    let mut worst_comp = 0.0f64;
    let mut total = 0usize;
    let mut bound_nodes = 0usize;
    for grid in [Grid::line(1.0, 3), Grid::square(16), Grid::square(32)] {
        let n = grid.node_count();
        for _ in 0..per_grid {
            let density =
                GridFunction::new(grid, (0..n).map(|_| rng.gen_range(-8.0..4.0)).collect());
            let u = embed_l2(&density);
            // Obstacle drawn at the scale of the instance's own free
            // state, so a healthy share of nodes binds.
            let free = match solve_poisson(&u, &NodeSet::full(grid)) {
                Ok(y) => y,
                Err(e) => return outcome("oracle_equivalence", false, e.to_string()),
            };
            let dip = free.values().iter().cloned().fold(f64::MAX, f64::min);
            let psi = GridFunction::new(
                grid,
                (0..n).map(|_| dip * rng.gen_range(0.1..0.95)).collect(),
            );
            let prob = ObstacleProblem::new(psi.clone());
            let res = match solve_obstacle(&prob, &u) {
                Ok(r) => r,
                Err(e) => return outcome("oracle_equivalence", false, format!("solve failed: {e}")),
            };
            let psor = match solve_obstacle_psor(&prob, &u) {
                Ok(r) => r,
                Err(e) => return outcome("oracle_equivalence", false, format!("sweep failed: {e}")),
            };
            worst_diff = worst_diff.max(res.y().add_scaled(-1.0, &psor).max_abs());
            for k in 0..n {
                let gap = res.y().values()[k] - psi.values()[k];
                worst_comp = worst_comp.max((gap * res.xi().loads()[k]).abs());
            }
            bound_nodes += res.active().count();
            total += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_diff <= tol && worst_comp <= comp_tol && bound_nodes > 0 && elapsed <= budget_secs;
    outcome(
        "oracle_equivalence",
        pass,
        format!(
            "{total} instances ({bound_nodes} bound nodes), max route difference {worst_diff:.3e} (tol {tol:.1e}), max complementarity {worst_comp:.3e} (tol {comp_tol:.1e}), {elapsed:.1}s of {budget_secs:.0}s"
        ),
    )
}

fn gateaux_characterization(ov: Overrides, mut rng: ChaCha8Rng) -> CriterionOutcome {
    let strict_tol = ov.tol.unwrap_or(1e-6);
    let biactive_tol = 1e-8;
    let points = ov.instances.unwrap_or(20);
    let mut worst_strict = 0.0f64;
    let mut worst_biactive = 0.0f64;
    for i in 0..points {
        let grid = if i % 2 == 0 {
            Grid::line(1.0, 5 + (i % 12))
        } else {
            Grid::square(3 + (i % 4))
        };
        let n = grid.node_count();

        let strict = designed_instance(grid, ContactPlan::StrictOnly, &mut rng);
        let res = match strict.solve() {
            Ok(r) => r,
            Err(e) => return outcome("gateaux_characterization", false, e),
        };
        if !is_gateaux_point(&res) {
            return outcome(
                "gateaux_characterization",
                false,
                format!("strict point {i} was not a differentiability point"),
            );
        }
        let h = DualFunction::new(grid, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let h_norm = match norm_hminus1(&h) {
            Ok(v) => v,
            Err(e) => return outcome("gateaux_characterization", false, e.to_string()),
        };
        let samples =
            match difference_quotient_probe(&strict.prob, &strict.u, &res, &h, &[1e-4]) {
                Ok(s) => s,
                Err(e) => return outcome("gateaux_characterization", false, e.to_string()),
            };
        let rel = samples[0].h1_error / h_norm;
        worst_strict = worst_strict.max(rel);

        let biactive = designed_instance(grid, ContactPlan::ExactBiactive(1 + i % 3), &mut rng);
        let res_b = match biactive.solve() {
            Ok(r) => r,
            Err(e) => return outcome("gateaux_characterization", false, e),
        };
        if is_gateaux_point(&res_b) {
            return outcome(
                "gateaux_characterization",
                false,
                format!("biactive point {i} was reported differentiable"),
            );
        }
        let h_b = DualFunction::new(grid, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let samples_b =
            match difference_quotient_probe(&biactive.prob, &biactive.u, &res_b, &h_b, &[1e-2]) {
                Ok(s) => s,
                Err(e) => return outcome("gateaux_characterization", false, e.to_string()),
            };
        worst_biactive = worst_biactive.max(samples_b[0].h1_error);
    }
    let pass = worst_strict <= strict_tol && worst_biactive <= biactive_tol;
    outcome(
        "gateaux_characterization",
        pass,
        format!(
            "{points} strict points, worst relative quotient error {worst_strict:.3e} (tol {strict_tol:.1e}); {points} biactive points, worst one-sided mismatch {worst_biactive:.3e} (tol {biactive_tol:.1e})"
        ),
    )
}

fn pbss_characterization(ov: Overrides, mut rng: ChaCha8Rng) -> CriterionOutcome {
    let state_tol = ov.tol.unwrap_or(1e-9);
    let n_list = [1usize, 2, 4, 8];
    // Wide squares keep the restricted torsion at a selected node far
    // above the scaled classification thresholds even when the random
    // roles leave that node nearly isolated in its set.
    let wide = Grid::rectangle([12.0, 12.0], [16, 16]);
    let plans: [(Grid, usize); 5] = [
        (Grid::line(1.0, 3), 1),
        (Grid::line(1.0, 3), 2),
        (wide, 2),
        (wide, 3),
        (wide, 4),
    ];
    let mut worst_state = 0.0f64;
    let mut min_slope = f64::INFINITY;
    let mut checked = 0usize;
    for (grid, b) in plans {
        let designed = designed_instance(grid, ContactPlan::ExactBiactive(b), &mut rng);
        let res = match designed.solve() {
            Ok(r) => r,
            Err(e) => return outcome("pbss_characterization", false, e),
        };
        let b_nodes = res.biactive().indices();
        for bits in 0..(1usize << b_nodes.len()) {
            let chosen: Vec<usize> = b_nodes
                .iter()
                .enumerate()
                .filter(|(i, _)| bits & (1 << i) != 0)
                .map(|(_, &k)| k)
                .collect();
            let selection = NodeSet::from_indices(grid, &chosen);
            let element = match pbss_element(&res, &selection) {
                Ok(e) => e,
                Err(e) => return outcome("pbss_characterization", false, e.to_string()),
            };
            let omega = element.node_set().expect("restricted-solve element");
            let v = match solve_poisson(&unit_load(grid), omega) {
                Ok(v) => v,
                Err(e) => return outcome("pbss_characterization", false, e.to_string()),
            };
            let mut dists = Vec::with_capacity(n_list.len());
            for &n in &n_list {
                let u_n = match approach_sequence_pbss(&designed.u, &res, &element, n) {
                    Ok(u) => u,
                    Err(e) => return outcome("pbss_characterization", false, e.to_string()),
                };
                let res_n = match solve_obstacle(&designed.prob, &u_n) {
                    Ok(r) => r,
                    Err(e) => return outcome("pbss_characterization", false, e.to_string()),
                };
                if !is_gateaux_point(&res_n) {
                    return outcome(
                        "pbss_characterization",
                        false,
                        format!("approach point (subset {bits}, n {n}) is not differentiable"),
                    );
                }
                if res_n.inactive() != omega {
                    return outcome(
                        "pbss_characterization",
                        false,
                        format!("inactive set mismatch at subset {bits}, n {n}"),
                    );
                }
                let predicted = res.y().add_scaled(1.0 / n as f64, &v);
                worst_state =
                    worst_state.max(res_n.y().add_scaled(-1.0, &predicted).max_abs());
                match norm_hminus1(&u_n.add_scaled(-1.0, &designed.u)) {
                    Ok(d) => dists.push(d),
                    Err(e) => return outcome("pbss_characterization", false, e.to_string()),
                }
                checked += 1;
            }
            let ns: Vec<f64> = n_list.iter().map(|n| *n as f64).collect();
            if dists.iter().all(|d| *d > 0.0) {
                min_slope = min_slope.min(-fitted_slope(&ns, &dists));
            }
        }
    }
    let pass = worst_state <= state_tol && min_slope >= 0.99;
    outcome(
        "pbss_characterization",
        pass,
        format!(
            "{checked} approach points, worst state error {worst_state:.3e} (tol {state_tol:.1e}), min fitted decay slope {min_slope:.4} (need 0.99)"
        ),
    )
}

fn torsion_support(ov: Overrides, mut rng: ChaCha8Rng) -> CriterionOutcome {
    let tol = ov.tol.unwrap_or(1e-10);
    let per_grid = ov.instances.unwrap_or(50);
    let mut worst_wall = 0.0f64;
    let mut worst_free = 0.0f64;
    let mut worst_negative = 0.0f64;
    for grid in [Grid::line(1.0, 3), Grid::square(16), Grid::square(32)] {
        let n = grid.node_count();
        for _ in 0..per_grid {
            let mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
            let excluded = NodeSet::from_mask(grid, mask);
            let mu = DiscreteMeasure::from_node_set(&excluded);
            let w = match torsion(&mu) {
                Ok(w) => w,
                Err(e) => return outcome("torsion_support", false, e.to_string()),
            };
            let residual = unit_load(grid).add_scaled(-1.0, &apply_neg_laplacian(&w));
            for k in 0..n {
                worst_negative = worst_negative.max(-residual.loads()[k]);
                if excluded.contains(k) {
                    worst_wall = worst_wall.max(w.values()[k].abs());
                    if residual.loads()[k] <= tol {
                        return outcome(
                            "torsion_support",
                            false,
                            format!("reaction support misses an excluded node ({k})"),
                        );
                    }
                } else {
                    worst_free = worst_free.max(residual.loads()[k].abs());
                    if w.values()[k] <= tol {
                        return outcome(
                            "torsion_support",
                            false,
                            format!("torsion support misses a free node ({k})"),
                        );
                    }
                }
            }
        }
    }
    let pass = worst_wall <= tol && worst_free <= tol && worst_negative <= 1e-10;
    outcome(
        "torsion_support",
        pass,
        format!(
            "{per_grid} sets per grid, max torsion on walls {worst_wall:.3e}, max residual off walls {worst_free:.3e} (tol {tol:.1e}), worst negativity {worst_negative:.3e}"
        ),
    )
}

fn radon_criterion(ov: Overrides, mut rng: ChaCha8Rng) -> CriterionOutcome {
    let measures = ov.instances.unwrap_or(50);
    let slack = 1e-12;
    let n_list = [2usize, 4, 8, 16, 32, 64];
    let mut min_slope = f64::INFINITY;
    for i in 0..measures {
        let grid = if i % 2 == 0 {
            Grid::line(1.0, 3 + (i % 10))
        } else {
            Grid::square(3 + (i % 6))
        };
        let n = grid.node_count();
        let mut mass: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.25) {
                    f64::INFINITY
                } else {
                    rng.gen_range(0.0..50.0)
                }
            })
            .collect();
        mass[0] = f64::INFINITY;
        let mu = DiscreteMeasure::new(grid, mass);
        let mut prev: Option<DiscreteMeasure> = None;
        let mut dists = Vec::with_capacity(n_list.len());
        for &steps in &n_list {
            let approx = match radon_approximation(&mu, steps) {
                Ok(a) => a,
                Err(e) => return outcome("radon_approximation", false, e.to_string()),
            };
            for k in 0..n {
                if mu.mass()[k].is_finite() && approx.mass()[k] > mu.mass()[k] + slack {
                    return outcome(
                        "radon_approximation",
                        false,
                        format!("mass overshoots its target at node {k}"),
                    );
                }
                if let Some(p) = &prev {
                    if approx.mass()[k] < p.mass()[k] - slack {
                        return outcome(
                            "radon_approximation",
                            false,
                            format!("mass decreased at node {k}"),
                        );
                    }
                }
            }
            match gamma_distance(&approx, &mu) {
                Ok(d) => dists.push(d),
                Err(e) => return outcome("radon_approximation", false, e.to_string()),
            }
            prev = Some(approx);
        }
        let ns: Vec<f64> = n_list.iter().map(|v| *v as f64).collect();
        min_slope = min_slope.min(-fitted_slope(&ns, &dists));
    }

    // One interior node at extent 1: the approximation of the mass-8
    // measure obeys m(n) = 8 (n - 1) / (n + 1) exactly.
    let g1 = Grid::line(1.0, 1);
    let pinned = DiscreteMeasure::new(g1, vec![8.0]);
    let second = match radon_approximation(&pinned, 2) {
        Ok(a) => a.mass()[0],
        Err(e) => return outcome("radon_approximation", false, e.to_string()),
    };
    let closed_form = 8.0 / 3.0;
    let g1_err = (second - closed_form).abs();

    let pass = min_slope >= 0.9 && g1_err <= 1e-12;
    outcome(
        "radon_approximation",
        pass,
        format!(
            "{measures} measures, min fitted decay slope {min_slope:.4} (need 0.9), one-node closed form off by {g1_err:.3e} (tol 1e-12)"
        ),
    )
}

fn sum_theorem(ov: Overrides, mut rng: ChaCha8Rng) -> CriterionOutcome {
    let final_tol = ov.tol.unwrap_or(1e-3);
    let steps = ov.instances.unwrap_or(10);
    let grid = Grid::square(32);
    let n = grid.node_count();
    let mu = DiscreteMeasure::new(grid, (0..n).map(|_| rng.gen_range(0.0..20.0)).collect());
    let mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.25)).collect();
    let c_lim = NodeSet::from_mask(grid, mask);
    let c_indices = c_lim.indices();

    let mut mu_seq = Vec::with_capacity(steps);
    let mut c_seq = Vec::with_capacity(steps);
    for k in 1..=steps {
        match radon_approximation(&mu, 1 << k) {
            Ok(a) => mu_seq.push(a),
            Err(e) => return outcome("sum_theorem", false, e.to_string()),
        }
        let take = (c_indices.len() * k).div_ceil(steps);
        c_seq.push(NodeSet::from_indices(grid, &c_indices[..take]));
    }
    let rows = match gamma_sum_probe(&mu_seq, &c_seq, &mu, &c_lim) {
        Ok(r) => r,
        Err(e) => return outcome("sum_theorem", false, e.to_string()),
    };
    for pair in rows.windows(2) {
        if pair[1].distance > pair[0].distance + 1e-15 {
            return outcome(
                "sum_theorem",
                false,
                format!(
                    "distance increased between indices {} and {}",
                    pair[0].index, pair[1].index
                ),
            );
        }
    }
    let final_dist = rows.last().expect("nonempty probe").distance;
    let pass = final_dist <= final_tol;
    outcome(
        "sum_theorem",
        pass,
        format!(
            "{steps} sum terms on the 32x32 grid, nonincreasing distances, final {final_dist:.3e} (tol {final_tol:.1e})"
        ),
    )
}

fn strange_term(ov: Overrides) -> CriterionOutcome {
    let ratio_tol = ov.tol.unwrap_or(0.5);
    let budget_secs = 600.0;
    let start = Instant::now();
    let report = match weak_weak_example(&WeakWeakConfig::default()) {
        Ok(r) => r,
        Err(e) => return outcome("strange_term", false, e.to_string()),
    };
    let elapsed = start.elapsed().as_secs_f64();
    for level in &report.levels {
        if !level.gateaux_ok {
            return outcome(
                "strange_term",
                false,
                format!("level {} is not a verified differentiability point", level.resolution),
            );
        }
    }
    let last = report.levels.last().expect("levels");
    let prev = &report.levels[report.levels.len() - 2];
    let drift = (last.fitted_c - prev.fitted_c).abs() / prev.fitted_c.abs();
    let ratio = last.dist_fitted / last.dist_plain;
    let pass = drift <= 0.2 && ratio < ratio_tol && elapsed <= budget_secs;
    outcome(
        "strange_term",
        pass,
        format!(
            "levels {:?}, fitted c {:.4} vs {:.4} (drift {:.1}%), fitted/plain distance ratio {ratio:.3} (need < {ratio_tol}), {elapsed:.0}s of {budget_secs:.0}s",
            report.levels.iter().map(|l| l.resolution).collect::<Vec<_>>(),
            prev.fitted_c,
            last.fitted_c,
            100.0 * drift
        ),
    )
}

/// Dense Gaussian elimination with partial pivoting, the KKT oracle's
/// only numeric tool.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty column");
        a.swap(col, pivot);
        b.swap(col, pivot);
        assert!(a[col][col].abs() > 0.0, "singular system");
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Solves the linear-quadratic optimality system directly: with the
/// obstacle never active and no control bounds, the stationary control
/// satisfies `A y = M u`, `A p = M (y - y_d)`, `alpha u + p = 0` with
/// `M` the lumped mass matrix. Eliminating `u` leaves a symmetric
/// 2n-by-2n system in `(y, p)`.
fn lq_oracle(grid: Grid, y_d: &GridFunction, alpha: f64) -> GridFunction {
    let n = grid.node_count();
    let vol = grid.cell_volume();
    let mut stiffness = vec![vec![0.0; n]; n];
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let col = apply_neg_laplacian(&GridFunction::new(grid, e));
        for (row, v) in col.loads().iter().enumerate() {
            stiffness[row][k] = *v;
        }
    }
    let mut a = vec![vec![0.0; 2 * n]; 2 * n];
    let mut b = vec![0.0; 2 * n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = stiffness[i][j];
            a[n + i][n + j] = stiffness[i][j];
        }
        a[i][n + i] = vol / alpha;
        a[n + i][i] = -vol;
        b[n + i] = -vol * y_d.values()[i];
    }
    let yp = dense_solve(a, b);
    GridFunction::new(grid, yp[n..].iter().map(|p| -p / alpha).collect())
}

fn pass_pattern(report: &AuditReport) -> Vec<(AuditId, bool)> {
    report.items.iter().map(|i| (i.id, i.pass)).collect()
}

/// Checks one corrupted point: the items in `expected_failures` must
/// fail, every other item must still pass.
fn corruption_matches(
    report: &AuditReport,
    expected_failures: &[AuditId],
) -> Result<(), String> {
    for (id, pass) in pass_pattern(report) {
        let should_fail = expected_failures.contains(&id);
        if pass == should_fail {
            return Err(format!(
                "item {} {} after corruption targeting {:?}",
                id.label(),
                if pass { "passed" } else { "failed" },
                expected_failures,
            ));
        }
    }
    Ok(())
}

fn control_path_audits(ov: Overrides, mut rng: ChaCha8Rng) -> CriterionOutcome {
    let audit_tol = ov.tol.unwrap_or(AUDIT_TOL);

    // Part 1: the optimizer against the direct KKT oracle on an instance
    // whose obstacle never binds.
    let lq_grid = Grid::square(4);
    let lq_n = lq_grid.node_count();
    let y_d = GridFunction::new(
        lq_grid,
        (0..lq_n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    );
    let alpha = 1e-2;
    let lq_prob = ControlProblem::unbounded(
        ObstacleProblem::new(GridFunction::constant(lq_grid, -10.0)),
        y_d.clone(),
        alpha,
    );
    let lq_point = match optimize(&lq_prob, &OptimizeOptions::default()) {
        Ok(p) => p,
        Err(e) => return outcome("control_path_audits", false, format!("path solve failed: {e}")),
    };
    let oracle_u = lq_oracle(lq_grid, &y_d, alpha);
    let lq_err = lq_point.u.add_scaled(-1.0, &oracle_u).max_abs();
    if lq_err > 1e-6 {
        return outcome(
            "control_path_audits",
            false,
            format!("optimizer is {lq_err:.3e} from the KKT oracle (tol 1e-6)"),
        );
    }

    // Part 2: contact-rich fixed-control instances; every audit item the
    // stationarity system promises must pass, and the adjoint measures
    // must settle along the penalty path.
    // The extent puts the adjoint measure at spectral parity with the
    // stiffness near the head of the penalty schedule, so the measure
    // path is in its settling regime across the whole window and the
    // states are O(1): the unit-load response peaks around 1.4, pinned
    // controls of a few units reach obstacles at the same scale.
    let grid = Grid::rectangle([12.0, 12.0], [32, 32]);
    let instances: [(f64, f64, f64); 5] = [
        (-1.0, -3.0, -1.0),
        (-1.5, -2.0, -0.5),
        (-0.5, -4.0, -1.5),
        (-1.2, -2.5, -1.0),
        (-2.0, -3.5, -0.8),
    ];
    let mut min_contact = usize::MAX;
    let mut worst_item = 0.0f64;
    let mut tightest_drop = f64::INFINITY;
    for (psi_level, pin, target) in instances {
        let prob = ControlProblem::new(
            ObstacleProblem::new(GridFunction::constant(grid, psi_level)),
            GridFunction::constant(grid, target),
            1e-4,
            GridFunction::constant(grid, pin),
            GridFunction::constant(grid, pin),
        );
        // Two extra decades past the stock schedule: the smoothing band
        // must end below the quadratic liftoff of nodes near the free
        // boundary, or those nodes hold adjoint measure while
        // classifying as inactive under the exact solve.
        let opts = OptimizeOptions {
            c_schedule: (0..=8).map(|k| 10f64.powi(k)).collect(),
            ..OptimizeOptions::default()
        };
        let point = match optimize(&prob, &opts) {
            Ok(p) => p,
            Err(e) => {
                return outcome("control_path_audits", false, format!("path solve failed: {e}"))
            }
        };
        let res = match solve_obstacle(prob.obstacle(), &prob.load(&point.u)) {
            Ok(r) => r,
            Err(e) => {
                return outcome("control_path_audits", false, format!("state solve failed: {e}"))
            }
        };
        min_contact = min_contact.min(res.strictly_active().count());
        let report = audit_stationarity(&prob, &point, &res, audit_tol);
        for id in [AuditId::C1, AuditId::C2, AuditId::C3, AuditId::C4, AuditId::NuEqualsPMu] {
            let item = report.item(id);
            if id != AuditId::C4 {
                worst_item = worst_item.max(item.value / item.threshold.max(f64::MIN_POSITIVE));
            }
            if !item.pass {
                return outcome(
                    "control_path_audits",
                    false,
                    format!(
                        "audit item {} fails at psi = {psi_level}: value {:.3e} over threshold {:.3e}",
                        id.label(),
                        item.value,
                        item.threshold
                    ),
                );
            }
        }
        let mut prev_drop = f64::INFINITY;
        for pair in point.path.windows(2) {
            if pair[1].c > 1e6 {
                break;
            }
            let d = match gamma_distance(&pair[0].mu, &pair[1].mu) {
                Ok(d) => d,
                Err(e) => return outcome("control_path_audits", false, e.to_string()),
            };
            if d >= prev_drop {
                return outcome(
                    "control_path_audits",
                    false,
                    format!("adjoint-measure path step grew from {prev_drop:.3e} to {d:.3e}"),
                );
            }
            prev_drop = d;
        }
        tightest_drop = tightest_drop.min(prev_drop);
    }
    if min_contact == 0 {
        return outcome(
            "control_path_audits",
            false,
            "an instance ended with no strict contact".to_string(),
        );
    }

    // Part 3: hand-corrupted points must fail the targeted item together
    // with exactly the items the audit's implication structure couples to
    // it, and nothing else.
    let designed = designed_instance(grid, ContactPlan::Mixed, &mut rng);
    let res = match designed.solve() {
        Ok(r) => r,
        Err(e) => return outcome("control_path_audits", false, e),
    };
    let n = grid.node_count();
    let pin = GridFunction::constant(grid, -2.0);
    let cprob = ControlProblem::new(
        designed.prob.clone(),
        GridFunction::zeros(grid),
        1e-4,
        pin.clone(),
        pin.clone(),
    );
    // A consistent point: adjoint zero on strict contact, a small
    // measure density on the biactive set, dual residual nu = p times
    // that density, multiplier closing the stationarity equation.
    let mut p_vals = vec![0.0; n];
    let mut nu_vals = vec![0.0; n];
    for k in 0..n {
        if res.inactive().contains(k) {
            p_vals[k] = rng.gen_range(0.05..0.5);
        } else if res.biactive().contains(k) {
            p_vals[k] = rng.gen_range(0.05..0.5);
            nu_vals[k] = p_vals[k] * rng.gen_range(0.0..1e-6);
        }
    }
    let p = GridFunction::new(grid, p_vals);
    let nu = DualFunction::new(grid, nu_vals);
    let lambda = p.add_scaled(cprob.alpha(), &pin).scale(-1.0);
    let clean = StationarityPoint {
        u: pin.clone(),
        y: res.y().clone(),
        p,
        nu,
        lambda,
        mu: DiscreteMeasure::zero(grid),
        c_final: 1e6,
        objective: 0.0,
        path: Vec::new(),
    };
    let clean_report = audit_stationarity(&cprob, &clean, &res, audit_tol);
    if !clean_report.all_pass() {
        let bad = clean_report.items.iter().find(|i| !i.pass).expect("failing item");
        return outcome(
            "control_path_audits",
            false,
            format!("constructed clean point fails {} before corruption", bad.id.label()),
        );
    }
    let strict_node = res.strictly_active().indices()[0];
    let biactive_node = res.biactive().indices()[0];
    let inactive_node = res.inactive().indices()[0];

    let mut c1 = clean.clone();
    {
        let mut v = c1.lambda.values().to_vec();
        v[inactive_node] += 1.0 + c1.lambda.max_abs();
        c1.lambda = GridFunction::new(grid, v);
    }
    let mut c2 = clean.clone();
    {
        let bump = 1.0 + c2.p.max_abs();
        let mut pv = c2.p.values().to_vec();
        let mut lv = c2.lambda.values().to_vec();
        pv[strict_node] += bump;
        lv[strict_node] -= bump;
        c2.p = GridFunction::new(grid, pv);
        c2.lambda = GridFunction::new(grid, lv);
    }
    let mut c3 = clean.clone();
    {
        let mut v = c3.nu.loads().to_vec();
        v[inactive_node] = (1.0 + c3.nu.max_abs()) * c3.p.values()[inactive_node].signum();
        c3.nu = DualFunction::new(grid, v);
    }
    let mut c4 = clean.clone();
    {
        let mut v = c4.nu.loads().to_vec();
        v[biactive_node] = -(1.0 + c4.nu.max_abs());
        c4.nu = DualFunction::new(grid, v);
    }
    let cases: [(&StationarityPoint, &[AuditId]); 4] = [
        (&c1, &[AuditId::C1]),
        (&c2, &[AuditId::C2, AuditId::M]),
        (&c3, &[AuditId::C3, AuditId::M, AuditId::NuEqualsPMu]),
        (&c4, &[AuditId::C4, AuditId::M, AuditId::NuEqualsPMu]),
    ];
    for (point, expected) in cases {
        let report = audit_stationarity(&cprob, point, &res, audit_tol);
        if let Err(detail) = corruption_matches(&report, expected) {
            return outcome("control_path_audits", false, detail);
        }
    }

    outcome(
        "control_path_audits",
        true,
        format!(
            "KKT oracle gap {lq_err:.3e} (tol 1e-6); 5 contact instances pass C1-C4 and nu=p*mu (worst margin {:.3}), min strict contact {min_contact} nodes, measure path settles (last drop {tightest_drop:.3e}); 4 corruption patterns isolate as predicted",
            worst_item
        ),
    )
}

fn comparison_principle(ov: Overrides, mut rng: ChaCha8Rng) -> CriterionOutcome {
    let slack = ov.tol.unwrap_or(1e-10);
    let pairs = ov.instances.unwrap_or(100);
    let mut worst = 0.0f64;
    for i in 0..pairs {
        let grid = match i % 3 {
            0 => Grid::line(1.0, 3 + (i % 14)),
            1 => Grid::square(4 + (i % 6)),
            _ => Grid::square(16),
        };
        let n = grid.node_count();
        let m1: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.15) {
                    f64::INFINITY
                } else {
                    rng.gen_range(0.0..50.0)
                }
            })
            .collect();
        let m2: Vec<f64> = m1
            .iter()
            .map(|&m| {
                if rng.gen_bool(0.15) {
                    f64::INFINITY
                } else {
                    m + rng.gen_range(0.0..50.0)
                }
            })
            .collect();
        let w1 = match torsion(&DiscreteMeasure::new(grid, m1)) {
            Ok(w) => w,
            Err(e) => return outcome("comparison_principle", false, e.to_string()),
        };
        let w2 = match torsion(&DiscreteMeasure::new(grid, m2)) {
            Ok(w) => w,
            Err(e) => return outcome("comparison_principle", false, e.to_string()),
        };
        for k in 0..n {
            worst = worst.max(w2.values()[k] - w1.values()[k]);
        }
    }
    let pass = worst <= slack;
    outcome(
        "comparison_principle",
        pass,
        format!("{pairs} ordered pairs, worst ordering violation {worst:.3e} (slack {slack:.1e})"),
    )
}

const DETERMINISM_CONFIG: &str = "[obstacle]\ngrid = square:8\ninstances = 6\n\n[gateaux]\ngrid = line:7\n\n[radon]\ngrid = line:9\n\n[sum]\ngrid = square:6\nsteps = 4\n";

fn determinism(ctx: &VerifyContext) -> CriterionOutcome {
    let Some(binary) = ctx.binary.as_deref() else {
        return outcome(
            "determinism",
            false,
            "no capax binary available to re-run".to_string(),
        );
    };
    let base = ctx.scratch.join("determinism");
    let cfg_path = base.join("repeat.cfg");
    if let Err(e) = std::fs::create_dir_all(&base).and_then(|()| std::fs::write(&cfg_path, DETERMINISM_CONFIG)) {
        return outcome("determinism", false, format!("cannot stage config: {e}"));
    }
    let runs = [
        (base.join("first"), 1usize),
        (base.join("second"), 1),
        (base.join("threaded"), 3),
    ];
    for (dir, threads) in &runs {
        match std::process::Command::new(binary)
            .arg("run")
            .arg(&cfg_path)
            .arg("--out")
            .arg(dir)
            .arg("--seed")
            .arg("123")
            .arg("--threads")
            .arg(threads.to_string())
            .output()
        {
            Ok(out) if out.status.success() => {}
            Ok(out) => {
                return outcome(
                    "determinism",
                    false,
                    format!("run into {} exited with {}", dir.display(), out.status),
                )
            }
            Err(e) => return outcome("determinism", false, format!("cannot spawn capax: {e}")),
        }
    }
    let mut compared = 0usize;
    for name in ["obstacle", "gateaux", "radon", "sum"] {
        let reference = match std::fs::read(runs[0].0.join(format!("{name}.csv"))) {
            Ok(bytes) => bytes,
            Err(e) => return outcome("determinism", false, format!("missing {name}.csv: {e}")),
        };
        for (dir, _) in &runs[1..] {
            match std::fs::read(dir.join(format!("{name}.csv"))) {
                Ok(bytes) if bytes == reference => compared += 1,
                Ok(_) => {
                    return outcome(
                        "determinism",
                        false,
                        format!("{name}.csv differs between runs"),
                    )
                }
                Err(e) => return outcome("determinism", false, format!("missing {name}.csv: {e}")),
            }
        }
    }
    outcome(
        "determinism",
        true,
        format!("3 runs (one with 3 threads), {compared} byte-identical CSV comparisons"),
    )
}

/// Path helper for criteria that need scratch space.
pub fn default_scratch() -> PathBuf {
    std::env::temp_dir().join(format!("capax-verify-{}", std::process::id()))
}

/// Checks a suite config and returns every criterion in order with the
/// overrides its section supplies. The whole suite always runs; sections
/// only adjust knobs.
pub fn validate_suite(
    cfg: &crate::config::ConfigFile,
) -> Result<Vec<(&'static str, Overrides)>, crate::config::ConfigError> {
    use crate::config::ConfigError;
    let err = |line: usize, detail: String| ConfigError { line, detail };
    match cfg.preamble.get("suite") {
        Some(entry) if entry.value == "default" => {}
        Some(entry) => {
            return Err(err(
                entry.line,
                format!("unknown suite '{}', only 'default' exists", entry.value),
            ))
        }
        None => return Err(err(1, "a verify config must set suite = default".to_string())),
    }
    for entry in &cfg.preamble.entries {
        match entry.key.as_str() {
            "suite" | "out" => {}
            "seed" => {
                cfg.preamble.get_u64("seed")?;
            }
            "threads" => {
                let t = cfg.preamble.get_usize("threads")?.expect("key present");
                if t == 0 {
                    return Err(err(entry.line, "threads must be at least 1".to_string()));
                }
            }
            other => return Err(err(entry.line, format!("unknown key '{other}'"))),
        }
    }
    let mut plan: Vec<(&'static str, Overrides)> =
        CRITERIA.iter().map(|name| (*name, Overrides::default())).collect();
    for section in &cfg.sections {
        let Some(slot) = plan.iter_mut().find(|(name, _)| *name == section.name) else {
            return Err(err(
                section.line,
                format!("unknown criterion '{}'", section.name),
            ));
        };
        for entry in &section.entries {
            match entry.key.as_str() {
                "tol" => slot.1.tol = section.get_f64("tol")?,
                "instances" => slot.1.instances = section.get_usize("instances")?,
                other => return Err(err(entry.line, format!("unknown key '{other}'"))),
            }
        }
    }
    Ok(plan)
}
