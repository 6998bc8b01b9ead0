//! Textual recipes for grids, nodal fields, node sets, and measures.
//!
//! A recipe is a colon-separated spec such as `square:16`, `bowl:0.05`,
//! or `random:0:50:0.2`. Random recipes draw from the experiment's RNG,
//! so a fixed seed fixes every generated object.

use capax_core::measures::{perforate, DiscreteMeasure};
use capax_core::mesh::{Grid, GridFunction, NodeSet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn num(part: &str, spec: &str) -> Result<f64, String> {
    part.trim()
        .parse::<f64>()
        .map_err(|_| format!("recipe '{spec}' has a non-numeric part '{part}'"))
}

fn count(part: &str, spec: &str) -> Result<usize, String> {
    part.trim()
        .parse::<usize>()
        .map_err(|_| format!("recipe '{spec}' has a non-integer part '{part}'"))
}

fn parts_of(spec: &str) -> Vec<&str> {
    spec.split(':').collect()
}

fn arity(spec: &str, parts: &[&str], n: usize) -> Result<(), String> {
    if parts.len() == n {
        Ok(())
    } else {
        Err(format!(
            "recipe '{spec}' takes {} parameter(s), got {}",
            n - 1,
            parts.len() - 1
        ))
    }
}

/// `line:N` or `square:N` over the unit interval or square.
pub fn grid_recipe(spec: &str) -> Result<Grid, String> {
    let parts = parts_of(spec);
    match parts[0] {
        "line" => {
            arity(spec, &parts, 2)?;
            let n = count(parts[1], spec)?;
            if n == 0 {
                return Err(format!("recipe '{spec}' needs at least one node"));
            }
            Ok(Grid::line(1.0, n))
        }
        "square" => {
            arity(spec, &parts, 2)?;
            let n = count(parts[1], spec)?;
            if n == 0 {
                return Err(format!("recipe '{spec}' needs at least one node"));
            }
            Ok(Grid::square(n))
        }
        other => Err(format!("unknown grid recipe '{other}'")),
    }
}

/// Nodal field: `zero`, `constant:v`, `bowl:depth` (paraboloid, minimum
/// `-depth` at the center, zero at the edge midpoints), `sine:a` (product
/// of axis sines), or `random:lo:hi` (i.i.d. uniform).
pub fn field_recipe(
    grid: Grid,
    spec: &str,
    rng: &mut ChaCha8Rng,
) -> Result<GridFunction, String> {
    let parts = parts_of(spec);
    let n = grid.node_count();
    match parts[0] {
        "zero" => {
            arity(spec, &parts, 1)?;
            Ok(GridFunction::zeros(grid))
        }
        "constant" => {
            arity(spec, &parts, 2)?;
            Ok(GridFunction::constant(grid, num(parts[1], spec)?))
        }
        "bowl" => {
            arity(spec, &parts, 2)?;
            let depth = num(parts[1], spec)?;
            let extent = grid.extent();
            let values = (0..n)
                .map(|k| {
                    let xy = grid.coords(k);
                    let mut r2 = 0.0;
                    for d in 0..grid.dim() {
                        let rel = xy[d] / extent[d] - 0.5;
                        r2 += rel * rel;
                    }
                    depth * (4.0 * r2 - 1.0)
                })
                .collect();
            Ok(GridFunction::new(grid, values))
        }
        "sine" => {
            arity(spec, &parts, 2)?;
            let amp = num(parts[1], spec)?;
            let extent = grid.extent();
            let values = (0..n)
                .map(|k| {
                    let xy = grid.coords(k);
                    let mut v = amp;
                    for d in 0..grid.dim() {
                        v *= (std::f64::consts::PI * xy[d] / extent[d]).sin();
                    }
                    v
                })
                .collect();
            Ok(GridFunction::new(grid, values))
        }
        "random" => {
            arity(spec, &parts, 3)?;
            let lo = num(parts[1], spec)?;
            let hi = num(parts[2], spec)?;
            if !(lo < hi) {
                return Err(format!("recipe '{spec}' needs lo < hi"));
            }
            Ok(GridFunction::new(
                grid,
                (0..n).map(|_| rng.gen_range(lo..hi)).collect(),
            ))
        }
        other => Err(format!("unknown field recipe '{other}'")),
    }
}

/// Node set: `random:p` (i.i.d. membership) or `holes:period:radius`
/// (nodes inside a periodic lattice of disks).
pub fn node_set_recipe(
    grid: Grid,
    spec: &str,
    rng: &mut ChaCha8Rng,
) -> Result<NodeSet, String> {
    let parts = parts_of(spec);
    match parts[0] {
        "random" => {
            arity(spec, &parts, 2)?;
            let p = num(parts[1], spec)?;
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("recipe '{spec}' needs a probability in [0, 1]"));
            }
            let mask = (0..grid.node_count()).map(|_| rng.gen_bool(p)).collect();
            Ok(NodeSet::from_mask(grid, mask))
        }
        "holes" => {
            arity(spec, &parts, 3)?;
            let period = num(parts[1], spec)?;
            let radius = num(parts[2], spec)?;
            if period <= 0.0 || radius <= 0.0 {
                return Err(format!("recipe '{spec}' needs positive period and radius"));
            }
            Ok(perforate(grid, period, radius).nodes.complement())
        }
        other => Err(format!("unknown node-set recipe '{other}'")),
    }
}

/// Measure: `zero`, `density:c` (constant density), `random:lo:hi:pinf`
/// (uniform masses, each infinite with probability `pinf`), or
/// `holes:period:radius` (infinite on the disk lattice).
pub fn measure_recipe(
    grid: Grid,
    spec: &str,
    rng: &mut ChaCha8Rng,
) -> Result<DiscreteMeasure, String> {
    let parts = parts_of(spec);
    match parts[0] {
        "zero" => {
            arity(spec, &parts, 1)?;
            Ok(DiscreteMeasure::zero(grid))
        }
        "density" => {
            arity(spec, &parts, 2)?;
            let c = num(parts[1], spec)?;
            if c < 0.0 {
                return Err(format!("recipe '{spec}' needs a nonnegative density"));
            }
            Ok(DiscreteMeasure::constant_density(grid, c))
        }
        "random" => {
            arity(spec, &parts, 4)?;
            let lo = num(parts[1], spec)?;
            let hi = num(parts[2], spec)?;
            let pinf = num(parts[3], spec)?;
            if !(0.0 <= lo && lo < hi) {
                return Err(format!("recipe '{spec}' needs 0 <= lo < hi"));
            }
            if !(0.0..=1.0).contains(&pinf) {
                return Err(format!("recipe '{spec}' needs a probability in [0, 1]"));
            }
            let mass = (0..grid.node_count())
                .map(|_| {
                    if rng.gen_bool(pinf) {
                        f64::INFINITY
                    } else {
                        rng.gen_range(lo..hi)
                    }
                })
                .collect();
            Ok(DiscreteMeasure::new(grid, mass))
        }
        "holes" => {
            arity(spec, &parts, 3)?;
            let period = num(parts[1], spec)?;
            let radius = num(parts[2], spec)?;
            if period <= 0.0 || radius <= 0.0 {
                return Err(format!("recipe '{spec}' needs positive period and radius"));
            }
            Ok(DiscreteMeasure::from_node_set(
                &perforate(grid, period, radius).nodes.complement(),
            ))
        }
        other => Err(format!("unknown measure recipe '{other}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    #[test]
    fn grid_specs_round_trip() {
        assert_eq!(grid_recipe("line:3").unwrap(), Grid::line(1.0, 3));
        assert_eq!(grid_recipe("square:16").unwrap(), Grid::square(16));
        assert!(grid_recipe("cube:4").is_err());
        assert!(grid_recipe("line:0").is_err());
        assert!(grid_recipe("line:3:4").is_err());
    }

    #[test]
    fn bowl_hits_its_center_depth_and_edge_zero() {
        let grid = Grid::line(1.0, 3);
        let f = field_recipe(grid, "bowl:0.05", &mut rng()).unwrap();
        assert!((f.values()[1] + 0.05).abs() < 1e-15);
        assert!(f.values()[0] < 0.0);
    }

    #[test]
    fn random_recipes_are_seed_deterministic() {
        let grid = Grid::square(4);
        let a = field_recipe(grid, "random:-1:1", &mut rng()).unwrap();
        let b = field_recipe(grid, "random:-1:1", &mut rng()).unwrap();
        assert_eq!(a, b);
        let m = measure_recipe(grid, "random:0:5:0.3", &mut rng()).unwrap();
        let m2 = measure_recipe(grid, "random:0:5:0.3", &mut rng()).unwrap();
        assert_eq!(m.mass(), m2.mass());
    }

    #[test]
    fn malformed_specs_name_the_problem() {
        let grid = Grid::line(1.0, 2);
        assert!(field_recipe(grid, "random:1:0", &mut rng()).is_err());
        assert!(measure_recipe(grid, "density:-1", &mut rng()).is_err());
        assert!(measure_recipe(grid, "random:0:5:1.5", &mut rng()).is_err());
        assert!(node_set_recipe(grid, "blob", &mut rng()).is_err());
    }
}
