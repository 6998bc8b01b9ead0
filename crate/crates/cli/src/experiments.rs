//! Named experiments over one config file: each section drives a solver
//! pipeline and writes `<name>.csv` plus a gnuplot script `<name>.plt`;
//! the invocation writes one shared `manifest.txt`.
//!
//! Experiments draw all randomness from a per-experiment stream derived
//! from the invocation seed and the experiment name, so results do not
//! depend on execution order or thread count.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use capax_core::control::{
    audit_stationarity, optimize, ControlProblem, OptimizeOptions, AUDIT_TOL,
};
use capax_core::derivatives::{
    approach_sequence_pbss, pbss_element, pbsw_construct, pbsw_membership, weak_weak_example,
    WeakWeakConfig,
};
use capax_core::measures::{
    gamma_distance, gamma_sum_probe, radon_approximation, DiscreteMeasure,
};
use capax_core::mesh::{
    embed_l2, norm_hminus1, solve_poisson, unit_load, Grid, GridFunction, NodeSet,
};
use capax_core::obstacle::{
    difference_quotient_probe, is_gateaux_point, solve_obstacle, solve_obstacle_psor,
    ObstacleProblem,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigError, ConfigFile, Section};
use crate::design::{designed_instance, ContactPlan};
use crate::recipes;

/// Section names `run` accepts.
pub const EXPERIMENT_NAMES: [&str; 8] = [
    "obstacle", "gateaux", "pbss", "pbsw", "gamma", "radon", "sum", "control",
];

/// Invocation-level knobs, after flags have overridden the preamble.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

/// What happened to one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

fn known_keys(experiment: &str) -> &'static [&'static str] {
    match experiment {
        "obstacle" => &["grid", "psi", "u", "instances"],
        "gateaux" => &["grid", "psi", "u", "h", "t_list"],
        "pbss" => &["grid", "biactive", "n_list"],
        "pbsw" => &["grid", "scales"],
        "gamma" => &["resolutions", "extent", "period", "radius"],
        "radon" => &["grid", "measure", "n_list"],
        "sum" => &["grid", "measure", "set", "steps"],
        "control" => &["grid", "psi", "y_d", "alpha", "lower", "upper", "c_list"],
        _ => &[],
    }
}

fn cfg_err(line: usize, detail: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        detail: detail.into(),
    }
}

/// Checks everything that does not require running a solver: section and
/// key names, value types, and recipe resolvability. A config that passes
/// produces no surprises at run time short of solver failures.
pub fn validate(cfg: &ConfigFile) -> Result<(), ConfigError> {
    for entry in &cfg.preamble.entries {
        match entry.key.as_str() {
            "seed" => {
                cfg.preamble.get_u64("seed")?;
            }
            "threads" => {
                if cfg.preamble.get_usize("threads")? == Some(0) {
                    return Err(cfg_err(entry.line, "threads must be at least 1"));
                }
            }
            "out" => {}
            other => {
                return Err(cfg_err(entry.line, format!("unknown preamble key '{other}'")));
            }
        }
    }
    let mut probe_rng = ChaCha8Rng::seed_from_u64(0);
    for section in &cfg.sections {
        if !EXPERIMENT_NAMES.contains(&section.name.as_str()) {
            return Err(cfg_err(
                section.line,
                format!("unknown experiment '{}'", section.name),
            ));
        }
        let keys = known_keys(&section.name);
        for entry in &section.entries {
            if !keys.contains(&entry.key.as_str()) {
                return Err(cfg_err(
                    entry.line,
                    format!(
                        "unknown key '{}' in experiment [{}]",
                        entry.key, section.name
                    ),
                ));
            }
        }
        validate_section(section, &mut probe_rng)?;
    }
    Ok(())
}

fn recipe_check<T>(
    section: &Section,
    key: &str,
    mut build: impl FnMut(&str) -> Result<T, String>,
) -> Result<(), ConfigError> {
    if let Some(entry) = section.get(key) {
        build(&entry.value).map_err(|detail| cfg_err(entry.line, detail))?;
    }
    Ok(())
}

fn validate_section(section: &Section, rng: &mut ChaCha8Rng) -> Result<(), ConfigError> {
    let grid = match section.get("grid") {
        Some(entry) => recipes::grid_recipe(&entry.value)
            .map_err(|detail| cfg_err(entry.line, detail))?,
        None => Grid::square(4),
    };
    for key in ["psi", "u", "h", "y_d", "lower", "upper"] {
        recipe_check(section, key, |spec| {
            recipes::field_recipe(grid, spec, rng).map(|_| ())
        })?;
    }
    recipe_check(section, "measure", |spec| {
        recipes::measure_recipe(grid, spec, rng).map(|_| ())
    })?;
    recipe_check(section, "set", |spec| {
        recipes::node_set_recipe(grid, spec, rng).map(|_| ())
    })?;

    if let Some(v) = section.get_usize("instances")? {
        if v == 0 {
            return Err(cfg_err(section.get("instances").unwrap().line, "instances must be at least 1"));
        }
    }
    if let Some(list) = section.get_f64_list("t_list")? {
        if list.iter().any(|t| !(*t > 0.0)) {
            return Err(cfg_err(section.get("t_list").unwrap().line, "steps must be positive"));
        }
    }
    if let Some(b) = section.get_usize("biactive")? {
        if b > grid.node_count() {
            return Err(cfg_err(
                section.get("biactive").unwrap().line,
                "more biactive nodes than the grid has",
            ));
        }
    }
    if let Some(list) = section.get_f64_list("scales")? {
        if list.iter().any(|s| !(*s > 0.0)) {
            return Err(cfg_err(section.get("scales").unwrap().line, "scales must be positive"));
        }
    }
    if let Some(list) = section.get_usize_list("resolutions")? {
        if list.is_empty() {
            return Err(cfg_err(section.get("resolutions").unwrap().line, "need at least one level"));
        }
    }
    for key in ["period", "radius", "alpha"] {
        if let Some(v) = section.get_f64(key)? {
            if !(v > 0.0) {
                return Err(cfg_err(
                    section.get(key).unwrap().line,
                    format!("{key} must be positive"),
                ));
            }
        }
    }
    if let Some(list) = section.get_usize_list("n_list")? {
        let floor = if section.name == "radon" { 2 } else { 1 };
        if list.iter().any(|n| *n < floor) {
            return Err(cfg_err(
                section.get("n_list").unwrap().line,
                format!("entries must be at least {floor}"),
            ));
        }
    }
    if let Some(v) = section.get_usize("steps")? {
        if v == 0 {
            return Err(cfg_err(section.get("steps").unwrap().line, "steps must be at least 1"));
        }
    }
    if let Some(list) = section.get_f64_list("c_list")? {
        if list.is_empty() || list.iter().any(|c| !(*c > 0.0)) {
            return Err(cfg_err(
                section.get("c_list").unwrap().line,
                "penalty weights must be positive",
            ));
        }
    }
    Ok(())
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Stream for one experiment: the invocation seed folded with the
/// experiment name, independent of section order and thread schedule.
pub fn experiment_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut state = seed ^ h;
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Runs every section of a validated config. The manifest is written
/// first; each experiment then owns its two output files, so a failing
/// experiment cannot disturb the others.
pub fn run(cfg: &ConfigFile, raw_config: &str, opts: &RunOptions) -> Vec<ExperimentOutcome> {
    if let Err(e) = fs::create_dir_all(&opts.out) {
        return vec![ExperimentOutcome {
            name: "manifest".to_string(),
            ok: false,
            detail: format!("cannot create output directory: {e}"),
        }];
    }
    let names: Vec<&str> = cfg.sections.iter().map(|s| s.name.as_str()).collect();
    let manifest = format!(
        "capax {}\nseed = {}\nthreads = {}\nexperiments = {}\n--- config ---\n{}",
        env!("CARGO_PKG_VERSION"),
        opts.seed,
        opts.threads,
        if names.is_empty() {
            "(none)".to_string()
        } else {
            names.join(", ")
        },
        raw_config,
    );
    if let Err(e) = fs::write(opts.out.join("manifest.txt"), manifest) {
        return vec![ExperimentOutcome {
            name: "manifest".to_string(),
            ok: false,
            detail: format!("cannot write manifest: {e}"),
        }];
    }

    let jobs: Vec<&Section> = cfg.sections.iter().collect();
    let outcomes: Mutex<Vec<Option<ExperimentOutcome>>> =
        Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = opts.threads.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let section = jobs[i];
                let mut rng = experiment_rng(opts.seed, &section.name);
                let result = run_section(section, &opts.out, &mut rng);
                let outcome = ExperimentOutcome {
                    name: section.name.clone(),
                    ok: result.is_ok(),
                    detail: result.unwrap_or_else(|e| e),
                };
                outcomes.lock().expect("outcome lock")[i] = Some(outcome);
            });
        }
    });
    outcomes
        .into_inner()
        .expect("outcome lock")
        .into_iter()
        .map(|o| o.expect("every job ran"))
        .collect()
}

fn run_section(section: &Section, out: &Path, rng: &mut ChaCha8Rng) -> Result<String, String> {
    match section.name.as_str() {
        "obstacle" => run_obstacle(section, out, rng),
        "gateaux" => run_gateaux(section, out, rng),
        "pbss" => run_pbss(section, out, rng),
        "pbsw" => run_pbsw(section, out, rng),
        "gamma" => run_gamma(section, out),
        "radon" => run_radon(section, out, rng),
        "sum" => run_sum(section, out, rng),
        "control" => run_control(section, out, rng),
        other => Err(format!("unknown experiment '{other}'")),
    }
}

struct Table {
    writer: csv::Writer<fs::File>,
}

impl Table {
    fn create(out: &Path, name: &str, header: &[&str]) -> Result<Table, String> {
        let path = out.join(format!("{name}.csv"));
        let file = fs::File::create(&path)
            .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
        let mut writer = csv::Writer::from_writer(file);
        writer
            .write_record(header)
            .map_err(|e| format!("csv write failed: {e}"))?;
        Ok(Table { writer })
    }

    fn row(&mut self, cells: &[String]) -> Result<(), String> {
        self.writer
            .write_record(cells)
            .map_err(|e| format!("csv write failed: {e}"))
    }

    fn done(mut self) -> Result<(), String> {
        self.writer.flush().map_err(|e| format!("csv flush failed: {e}"))
    }
}

fn fnum(v: f64) -> String {
    format!("{v}")
}

fn flag(v: bool) -> String {
    usize::from(v).to_string()
}

fn write_plot(out: &Path, name: &str, body: &str) -> Result<(), String> {
    let path = out.join(format!("{name}.plt"));
    let text = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset terminal svg size 840,600\nset output '{name}.svg'\n{body}",
    );
    fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn grid_key(section: &Section, default: &str) -> Result<Grid, String> {
    let spec = section.get("grid").map_or(default, |e| e.value.as_str());
    recipes::grid_recipe(spec)
}

fn field_key(
    section: &Section,
    key: &str,
    default: &str,
    grid: Grid,
    rng: &mut ChaCha8Rng,
) -> Result<GridFunction, String> {
    let spec = section.get(key).map_or(default, |e| e.value.as_str());
    recipes::field_recipe(grid, spec, rng).map_err(|e| format!("key '{key}': {e}"))
}

fn f64_key(section: &Section, key: &str, default: f64) -> Result<f64, String> {
    section
        .get_f64(key)
        .map_err(|e| e.to_string())
        .map(|v| v.unwrap_or(default))
}

fn usize_key(section: &Section, key: &str, default: usize) -> Result<usize, String> {
    section
        .get_usize(key)
        .map_err(|e| e.to_string())
        .map(|v| v.unwrap_or(default))
}

fn usize_list_key(section: &Section, key: &str, default: &[usize]) -> Result<Vec<usize>, String> {
    section
        .get_usize_list(key)
        .map_err(|e| e.to_string())
        .map(|v| v.unwrap_or_else(|| default.to_vec()))
}

fn f64_list_key(section: &Section, key: &str, default: &[f64]) -> Result<Vec<f64>, String> {
    section
        .get_f64_list(key)
        .map_err(|e| e.to_string())
        .map(|v| v.unwrap_or_else(|| default.to_vec()))
}

fn run_obstacle(section: &Section, out: &Path, rng: &mut ChaCha8Rng) -> Result<String, String> {
    let grid = grid_key(section, "square:16")?;
    let instances = usize_key(section, "instances", 25)?;
    let mut table = Table::create(
        out,
        "obstacle",
        &[
            "instance",
            "pdas_iterations",
            "route_difference",
            "complementarity",
            "min_gap",
            "active",
            "strictly_active",
            "biactive",
            "inactive",
        ],
    )?;
    let mut worst_diff = 0.0f64;
    let mut worst_comp = 0.0f64;
    for instance in 0..instances {
        let psi = field_key(section, "psi", "bowl:0.05", grid, rng)?;
        let density = field_key(section, "u", "random:-3:1", grid, rng)?;
        let u = embed_l2(&density);
        let prob = ObstacleProblem::new(psi.clone());
        let res = solve_obstacle(&prob, &u).map_err(|e| e.to_string())?;
        let psor = solve_obstacle_psor(&prob, &u).map_err(|e| e.to_string())?;
        let diff = res.y().add_scaled(-1.0, &psor).max_abs();
        let mut comp = 0.0f64;
        let mut min_gap = f64::INFINITY;
        for k in 0..grid.node_count() {
            let gap = res.y().values()[k] - psi.values()[k];
            comp = comp.max((gap * res.xi().loads()[k]).abs());
            min_gap = min_gap.min(gap);
        }
        worst_diff = worst_diff.max(diff);
        worst_comp = worst_comp.max(comp);
        table.row(&[
            instance.to_string(),
            res.iterations().to_string(),
            fnum(diff),
            fnum(comp),
            fnum(min_gap),
            res.active().count().to_string(),
            res.strictly_active().count().to_string(),
            res.biactive().count().to_string(),
            res.inactive().count().to_string(),
        ])?;
    }
    table.done()?;
    write_plot(
        out,
        "obstacle",
        "set logscale y\nset xlabel 'instance'\nplot 'obstacle.csv' using 1:3 with linespoints, '' using 1:4 with linespoints\n",
    )?;
    Ok(format!(
        "{instances} instances, max route difference {worst_diff:.3e}, max complementarity {worst_comp:.3e}"
    ))
}

fn run_gateaux(section: &Section, out: &Path, rng: &mut ChaCha8Rng) -> Result<String, String> {
    let grid = grid_key(section, "line:9")?;
    let t_list = f64_list_key(section, "t_list", &[1e-1, 1e-2, 1e-3, 1e-4])?;
    let psi = field_key(section, "psi", "bowl:0.02", grid, rng)?;
    let u = embed_l2(&field_key(section, "u", "random:-3:0", grid, rng)?);
    let h = embed_l2(&field_key(section, "h", "random:-1:1", grid, rng)?);
    let prob = ObstacleProblem::new(psi);
    let res = solve_obstacle(&prob, &u).map_err(|e| e.to_string())?;
    let samples =
        difference_quotient_probe(&prob, &u, &res, &h, &t_list).map_err(|e| e.to_string())?;
    let mut table = Table::create(out, "gateaux", &["t", "error"])?;
    let mut worst = 0.0f64;
    for s in &samples {
        worst = worst.max(s.h1_error);
        table.row(&[fnum(s.t), fnum(s.h1_error)])?;
    }
    table.done()?;
    write_plot(
        out,
        "gateaux",
        "set logscale xy\nset xlabel 't'\nplot 'gateaux.csv' using 1:2 with linespoints\n",
    )?;
    Ok(format!(
        "gateaux point = {}, max quotient error {worst:.3e}",
        is_gateaux_point(&res)
    ))
}

fn run_pbss(section: &Section, out: &Path, rng: &mut ChaCha8Rng) -> Result<String, String> {
    let grid = grid_key(section, "line:8")?;
    let biactive = usize_key(section, "biactive", 2)?;
    let n_list = usize_list_key(section, "n_list", &[1, 2, 4, 8])?;
    let designed = designed_instance(grid, ContactPlan::ExactBiactive(biactive), rng);
    let res = designed.solve()?;
    let b_nodes = res.biactive().indices();
    let mut table = Table::create(
        out,
        "pbss",
        &[
            "subset",
            "subset_size",
            "n",
            "gateaux",
            "inactive_matches",
            "state_error",
            "load_distance",
        ],
    )?;
    let mut rows = 0usize;
    for bits in 0..(1usize << b_nodes.len()) {
        let chosen: Vec<usize> = b_nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| bits & (1 << i) != 0)
            .map(|(_, &k)| k)
            .collect();
        let selection = NodeSet::from_indices(grid, &chosen);
        let element = pbss_element(&res, &selection).map_err(|e| e.to_string())?;
        let omega = element.node_set().expect("restricted-solve element");
        let v = solve_poisson(&unit_load(grid), omega).map_err(|e| e.to_string())?;
        for &n in &n_list {
            let u_n = approach_sequence_pbss(&designed.u, &res, &element, n)
                .map_err(|e| e.to_string())?;
            let res_n = solve_obstacle(&designed.prob, &u_n).map_err(|e| e.to_string())?;
            let predicted = res.y().add_scaled(1.0 / n as f64, &v);
            let state_error = res_n.y().add_scaled(-1.0, &predicted).max_abs();
            let distance = norm_hminus1(&u_n.add_scaled(-1.0, &designed.u))
                .map_err(|e| e.to_string())?;
            table.row(&[
                bits.to_string(),
                chosen.len().to_string(),
                n.to_string(),
                flag(is_gateaux_point(&res_n)),
                flag(res_n.inactive() == omega),
                fnum(state_error),
                fnum(distance),
            ])?;
            rows += 1;
        }
    }
    table.done()?;
    write_plot(
        out,
        "pbss",
        "set logscale xy\nset xlabel 'n'\nplot 'pbss.csv' using 3:7 with points\n",
    )?;
    Ok(format!(
        "{} subsets of {} biactive nodes, {rows} approach points",
        1usize << b_nodes.len(),
        b_nodes.len()
    ))
}

fn run_pbsw(section: &Section, out: &Path, rng: &mut ChaCha8Rng) -> Result<String, String> {
    let grid = grid_key(section, "line:12")?;
    let scales = f64_list_key(section, "scales", &[0.5, 1.0, 2.0, 4.0, 8.0, 16.0])?;
    let designed = designed_instance(grid, ContactPlan::Mixed, rng);
    let res = designed.solve()?;
    let strict_elim = DiscreteMeasure::from_node_set(res.strictly_active());
    let full_elim =
        DiscreteMeasure::from_node_set(&res.strictly_active().union(res.biactive()));
    let mut table = Table::create(
        out,
        "pbsw",
        &["scale", "member", "dist_to_contact_elimination", "dist_to_full_elimination"],
    )?;
    let mut members = 0usize;
    for &scale in &scales {
        let mass = (0..grid.node_count())
            .map(|k| if res.biactive().contains(k) { scale } else { 0.0 })
            .collect();
        let finite = DiscreteMeasure::new(grid, mass);
        let element = pbsw_construct(&res, &finite).map_err(|e| e.to_string())?;
        let mu = element.measure().expect("measure element");
        let member = pbsw_membership(&res, mu).map_err(|e| e.to_string())?.member;
        members += usize::from(member);
        let d_contact = gamma_distance(mu, &strict_elim).map_err(|e| e.to_string())?;
        let d_full = gamma_distance(mu, &full_elim).map_err(|e| e.to_string())?;
        table.row(&[fnum(scale), flag(member), fnum(d_contact), fnum(d_full)])?;
    }
    table.done()?;
    write_plot(
        out,
        "pbsw",
        "set logscale x\nset xlabel 'biactive mass scale'\nplot 'pbsw.csv' using 1:3 with linespoints, '' using 1:4 with linespoints\n",
    )?;
    Ok(format!(
        "{} of {} scaled elements admissible, {} biactive nodes",
        members,
        scales.len(),
        res.biactive().count()
    ))
}

fn run_gamma(section: &Section, out: &Path) -> Result<String, String> {
    let resolutions = usize_list_key(section, "resolutions", &[32, 64, 128])?;
    let extent = f64_key(section, "extent", 12.0)?;
    let period = f64_key(section, "period", 3.0)?;
    let radius = f64_key(section, "radius", 0.42)?;
    let report = weak_weak_example(&WeakWeakConfig {
        resolutions,
        extent,
        period,
        radius,
    })
    .map_err(|e| e.to_string())?;
    let mut table = Table::create(
        out,
        "gamma",
        &[
            "resolution",
            "hole_nodes",
            "unresolved",
            "gateaux",
            "fitted_c",
            "saturated",
            "dist_fitted",
            "dist_plain",
        ],
    )?;
    for level in &report.levels {
        table.row(&[
            level.resolution.to_string(),
            level.hole_nodes.to_string(),
            flag(level.unresolved),
            flag(level.gateaux_ok),
            fnum(level.fitted_c),
            flag(level.saturated),
            fnum(level.dist_fitted),
            fnum(level.dist_plain),
        ])?;
    }
    table.done()?;
    write_plot(
        out,
        "gamma",
        "set logscale xy\nset xlabel 'resolution'\nplot 'gamma.csv' using 1:7 with linespoints, '' using 1:8 with linespoints\n",
    )?;
    let finest = report.levels.last().expect("at least one level");
    Ok(format!(
        "finest level {}: fitted c {:.4}, fitted/plain distance ratio {:.3}",
        finest.resolution,
        finest.fitted_c,
        finest.dist_fitted / finest.dist_plain
    ))
}

fn run_radon(section: &Section, out: &Path, rng: &mut ChaCha8Rng) -> Result<String, String> {
    let grid = grid_key(section, "square:8")?;
    let n_list = usize_list_key(section, "n_list", &[2, 4, 8, 16, 32, 64])?;
    let spec = section.get("measure").map_or("random:0:50:0.2", |e| e.value.as_str());
    let mu = recipes::measure_recipe(grid, spec, rng).map_err(|e| format!("key 'measure': {e}"))?;
    let mut table = Table::create(out, "radon", &["n", "distance", "finite_mass_total"])?;
    let mut last = f64::NAN;
    for &n in &n_list {
        let approx = radon_approximation(&mu, n).map_err(|e| e.to_string())?;
        let distance = gamma_distance(&approx, &mu).map_err(|e| e.to_string())?;
        let total: f64 = approx.mass().iter().sum();
        table.row(&[n.to_string(), fnum(distance), fnum(total)])?;
        last = distance;
    }
    table.done()?;
    write_plot(
        out,
        "radon",
        "set logscale xy\nset xlabel 'n'\nplot 'radon.csv' using 1:2 with linespoints\n",
    )?;
    Ok(format!("final distance {last:.3e} at n = {}", n_list.last().unwrap()))
}

fn run_sum(section: &Section, out: &Path, rng: &mut ChaCha8Rng) -> Result<String, String> {
    let grid = grid_key(section, "square:16")?;
    let steps = usize_key(section, "steps", 6)?;
    let mu_spec = section.get("measure").map_or("random:0:20:0", |e| e.value.as_str());
    let mu = recipes::measure_recipe(grid, mu_spec, rng).map_err(|e| format!("key 'measure': {e}"))?;
    let set_spec = section.get("set").map_or("random:0.25", |e| e.value.as_str());
    let c_lim = recipes::node_set_recipe(grid, set_spec, rng).map_err(|e| format!("key 'set': {e}"))?;

    let c_indices = c_lim.indices();
    let mut mu_seq = Vec::with_capacity(steps);
    let mut c_seq = Vec::with_capacity(steps);
    for k in 1..=steps {
        mu_seq.push(radon_approximation(&mu, 1 << k).map_err(|e| e.to_string())?);
        let take = (c_indices.len() * k).div_ceil(steps);
        c_seq.push(NodeSet::from_indices(grid, &c_indices[..take]));
    }
    let rows = gamma_sum_probe(&mu_seq, &c_seq, &mu, &c_lim).map_err(|e| e.to_string())?;

    let mut table = Table::create(out, "sum", &["index", "radon_n", "set_size", "distance"])?;
    for row in &rows {
        table.row(&[
            row.index.to_string(),
            (1usize << (row.index + 1)).to_string(),
            c_seq[row.index].count().to_string(),
            fnum(row.distance),
        ])?;
    }
    table.done()?;
    write_plot(
        out,
        "sum",
        "set logscale y\nset xlabel 'index'\nplot 'sum.csv' using 1:4 with linespoints\n",
    )?;
    Ok(format!(
        "distance {:.3e} at the final index",
        rows.last().expect("nonempty probe").distance
    ))
}

fn run_control(section: &Section, out: &Path, rng: &mut ChaCha8Rng) -> Result<String, String> {
    let grid = grid_key(section, "square:12")?;
    let psi = field_key(section, "psi", "constant:-0.0004", grid, rng)?;
    let y_d = field_key(section, "y_d", "constant:-1", grid, rng)?;
    let alpha = f64_key(section, "alpha", 1e-4)?;
    let lower = field_key(section, "lower", "constant:-3", grid, rng)?;
    let upper = field_key(section, "upper", "constant:-3", grid, rng)?;
    if !(alpha > 0.0) {
        return Err("alpha must be positive".to_string());
    }
    for k in 0..grid.node_count() {
        if lower.values()[k] > upper.values()[k] {
            return Err(format!("empty control box at node {k}"));
        }
    }
    let c_list = f64_list_key(
        section,
        "c_list",
        &capax_core::control::DEFAULT_C_SCHEDULE,
    )?;
    let prob = ControlProblem::new(ObstacleProblem::new(psi), y_d, alpha, lower, upper);
    let opts = OptimizeOptions {
        c_schedule: c_list,
        ..OptimizeOptions::default()
    };
    let point = optimize(&prob, &opts).map_err(|e| e.to_string())?;
    let res = solve_obstacle(prob.obstacle(), &prob.load(&point.u)).map_err(|e| e.to_string())?;
    let report = audit_stationarity(&prob, &point, &res, AUDIT_TOL);

    let mut table = Table::create(
        out,
        "control",
        &[
            "kind",
            "step",
            "c",
            "objective",
            "pg_residual",
            "pg_iterations",
            "gamma_to_prev",
            "audit_item",
            "audit_value",
            "audit_threshold",
            "audit_pass",
        ],
    )?;
    let blank = String::new();
    for (i, step) in point.path.iter().enumerate() {
        let gamma_to_prev = if i == 0 {
            blank.clone()
        } else {
            fnum(gamma_distance(&point.path[i - 1].mu, &step.mu).map_err(|e| e.to_string())?)
        };
        table.row(&[
            "path".to_string(),
            i.to_string(),
            fnum(step.c),
            fnum(step.objective),
            fnum(step.pg_residual),
            step.pg_iterations.to_string(),
            gamma_to_prev,
            blank.clone(),
            blank.clone(),
            blank.clone(),
            blank.clone(),
        ])?;
    }
    let mut passed = 0usize;
    for item in &report.items {
        passed += usize::from(item.pass);
        table.row(&[
            "audit".to_string(),
            blank.clone(),
            blank.clone(),
            blank.clone(),
            blank.clone(),
            blank.clone(),
            blank.clone(),
            item.id.label().to_string(),
            fnum(item.value),
            fnum(item.threshold),
            flag(item.pass),
        ])?;
    }
    table.done()?;
    write_plot(
        out,
        "control",
        "set logscale x\nset logscale y\nset xlabel 'penalty weight'\nplot 'control.csv' using 3:5 with linespoints\n",
    )?;
    Ok(format!(
        "objective {:.6e}, {passed}/{} audit items pass",
        point.objective,
        report.items.len()
    ))
}
