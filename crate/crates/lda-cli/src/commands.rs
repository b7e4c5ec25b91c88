//! Subcommand implementations and artifact writing.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use lda_core::algorithms::{make_algorithm, AlgorithmError, AlgorithmParams, Objective};
use lda_core::graph_core::{cage, cage_names, cycle_lengths_through, girth, parse_graph, ColouredGraph, Girth, GraphError, GraphFormat};
use lda_core::harness::{
    chunky_selection, run_trials, summarise, type_moments, z_scores, Backend, HarnessError, Mode, SimConfig, Summary,
};
use lda_core::lda::Trajectory;
use lda_core::ode::{
    cubic_is_base_closed_form, cubic_is_constant, cubic_is_system, cut_constants, cut_system, derive_check as run_derive_check,
    prioritised_fluid_limit, rk4_integrate, GenericField, IsVariant, OdeError, Rk4Options, Solution, CUBIC_IS_INITIAL,
    CUT_INITIAL, DEFAULT_STEP,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Table 1: `(r, alpha, gamma)`.
pub const TABLE_1: [(u32, f64, f64); 5] = [
    (3, 0.43475, 0.27942),
    (4, 0.39213, 0.24399),
    (5, 0.35930, 0.21852),
    (6, 0.33296, 0.19895),
    (7, 0.31068, 0.18329),
];

/// Table 2: `(r, beta)`; the `r = 4` entry is `1/3 + epsilon`.
pub const TABLE_2: [(u32, f64); 10] = [
    (3, 0.1741),
    (4, 1.0 / 3.0),
    (5, 0.5028),
    (6, 0.6674),
    (7, 0.8502),
    (8, 1.0386),
    (9, 1.2317),
    (10, 1.4278),
    (11, 1.624),
    (12, 1.823),
];

pub const TABLE_2_CAVEAT: &str = "reference only: the bisection type priority is a documented default \
(descending x+y, then descending max(x,y)), not the ordering behind the published values";

pub struct Context {
    pub out: PathBuf,
    pub argv: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Validation(_) | CliError::Algorithm(_) | CliError::Graph(_) => 2,
            CliError::Harness(HarnessError::InvalidConfig(_) | HarnessError::Unsupported { .. } | HarnessError::Algorithm(_)) => 2,
            CliError::Harness(_) | CliError::Ode(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Validation(_) => "validation",
            CliError::Algorithm(_) => "algorithm",
            CliError::Graph(_) => "graph",
            CliError::Harness(_) => "simulation",
            CliError::Ode(_) => "ode",
            CliError::Io { .. } => "io",
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io { path: path.to_path_buf(), message: e.to_string() }
}

impl Context {
    fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out).map_err(|e| io_err(&self.out, e))?;
        Ok(self.out.join(name))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name)?;
        let text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    fn write_csv(&self, name: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<PathBuf, CliError> {
        let path = self.path(name)?;
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        w.write_record(header).map_err(|e| io_err(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    fn write_solution(&self, name: &str, sol: &Solution) -> Result<PathBuf, CliError> {
        let path = self.path(name)?;
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        sol.write_csv(std::io::BufWriter::new(file)).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    /// Writes `manifest.json` listing the run parameters and artifacts.
    fn manifest(&self, command: &str, fields: Value, outputs: &[PathBuf]) -> Result<(), CliError> {
        let mut m = json!({
            "command": command,
            "argv": self.argv,
            "tool_version": VERSION,
            "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        });
        if let (Value::Object(m), Value::Object(f)) = (&mut m, fields) {
            m.extend(f);
        }
        self.write_json("manifest.json", &m)?;
        Ok(())
    }
}

fn print_json(v: &impl Serialize) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v).expect("serializable");
    // A closed pipe on stdout is not an error; the artifacts are on disk.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

// ============================================================================
// simulate
// ============================================================================

pub fn simulate(ctx: &Context, a: &crate::SimulateArgs) -> Result<(), CliError> {
    let cfg = SimConfig {
        algorithm: a.algorithm.clone(),
        params: AlgorithmParams { r: a.r, d: a.d, objective: a.objective },
        n: a.n,
        mode: a.mode,
        epsilon: a.epsilon,
        backend: a.backend,
        trials: a.trials,
        seed: a.seed,
        record_every: a.record_every,
        keep_trajectories: true,
        count_preclashes: a.preclashes,
        max_steps: a.max_steps,
    };
    let results = run_trials(&cfg)?;
    let mut outputs = Vec::new();
    for r in &results {
        let tr: &Trajectory = r.trajectory.as_ref().expect("trajectories kept");
        let rows = tr.rows.iter().map(Trajectory::fields);
        outputs.push(ctx.write_csv(&format!("trajectory_{:04}.csv", r.trial), &tr.header(), rows)?);
    }
    let summary = summarise(cfg.n, &results);
    let report = json!({ "config": cfg, "summary": summary, "trials": results });
    outputs.push(ctx.write_json("summary.json", &report)?);
    ctx.manifest(
        "simulate",
        json!({
            "algorithm": cfg.algorithm,
            "params": cfg.params,
            "n": cfg.n,
            "r": cfg.params.r,
            "mode": cfg.mode,
            "epsilon": cfg.epsilon,
            "backend": cfg.backend,
            "seed": cfg.seed,
            "stream_ids": (0..cfg.trials).collect::<Vec<_>>(),
            "trials": cfg.trials,
        }),
        &outputs,
    )?;
    print_json(&summary);
    if summary.validity_rate < 1.0 {
        return Err(CliError::Validation(format!("validity rate {} below 1", summary.validity_rate)));
    }
    Ok(())
}

// ============================================================================
// ode
// ============================================================================

pub fn ode(ctx: &Context, a: &crate::OdeArgs) -> Result<(), CliError> {
    let h = a.h.unwrap_or(DEFAULT_STEP);
    let (sol, extra) = match a.system.as_str() {
        "cut" => {
            let opts = Rk4Options { h, record_every: 1, stop_at_boundary: false };
            let sol = rk4_integrate(&cut_system(), 0.0, &CUT_INITIAL, a.x_max, &opts)?;
            let c = cut_constants(h)?;
            (sol, json!({ "constants": c }))
        }
        "cubic_is" | "cubic_is_improved" => {
            let variant = if a.system == "cubic_is" { IsVariant::Base } else { IsVariant::Improved };
            let opts = Rk4Options { h, record_every: 1, stop_at_boundary: true };
            let sol = rk4_integrate(&cubic_is_system(variant), 0.0, &CUBIC_IS_INITIAL, a.x_max, &opts)?;
            let (x, y) = sol.last();
            (sol.clone(), json!({ "x_end": x, "final_size": y[3] }))
        }
        "min_degree_is" | "min_degree_dom" | "dz_is" => {
            let field = GenericField::new(make_algorithm(&a.system, &AlgorithmParams { r: a.r, ..AlgorithmParams::default() })?);
            let fl = prioritised_fluid_limit(Arc::new(field), a.r, a.h.unwrap_or(1e-3), a.x_max)?;
            let extra = json!({ "phases": fl.phases, "outputs": fl.outputs, "remaining": fl.remaining });
            (fl.solution, extra)
        }
        other => return Err(CliError::Usage(format!("unknown system {other:?}"))),
    };
    let mut outputs = vec![ctx.write_solution("solution.csv", &sol)?];
    let report = json!({
        "system": a.system,
        "h": h,
        "termination": sol.termination,
        "events": sol.events,
        "details": extra,
    });
    outputs.push(ctx.write_json("events.json", &report)?);
    ctx.manifest("ode", json!({ "system": a.system, "h": h, "r": a.r, "x_max": a.x_max }), &outputs)?;
    print_json(&report);
    Ok(())
}

// ============================================================================
// constants
// ============================================================================

#[derive(Clone, Debug, Serialize)]
pub struct ConstantRow {
    pub name: String,
    pub value: f64,
    pub paper_value: f64,
    pub abs_err: f64,
}

fn row(name: &str, value: f64, paper_value: f64) -> ConstantRow {
    ConstantRow { name: name.into(), value, paper_value, abs_err: (value - paper_value).abs() }
}

/// Every reproduced constant next to its published value.
pub fn constant_rows(with_tables: bool) -> Result<Vec<ConstantRow>, CliError> {
    let base = cubic_is_constant(IsVariant::Base);
    let improved = cubic_is_constant(IsVariant::Improved);
    let cut = cut_constants(DEFAULT_STEP)?;
    let greedy = fluid_output("min_degree_is", 3)?;
    let mut rows = vec![
        row("cubic_is_base", base, 0.43520602),
        row("cubic_is_base_closed_form", cubic_is_base_closed_form(), 0.43520602),
        row("cubic_is_improved", improved, 0.43757463),
        row("fractional_chromatic_bound", 1.0 / improved, 2.285325),
        row("maxcut_x0", cut.x0, 0.8274171475),
        row("maxcut_c", cut.c, 1.330209040),
        row("maxcut_u", cut.u, 0.00279),
        row("maxcut_w", cut.w, 0.0511),
        row("min_degree_is_cubic", greedy, 0.4328),
    ];
    if with_tables {
        for &(r, alpha, gamma) in &TABLE_1[..2] {
            rows.push(row(&format!("dz_is_r{r}"), fluid_output("dz_is", r)?, alpha));
            rows.push(row(&format!("min_degree_dom_r{r}"), fluid_output("min_degree_dom", r)?, gamma));
        }
    }
    Ok(rows)
}

fn fluid_output(name: &str, r: u32) -> Result<f64, CliError> {
    let field = GenericField::new(make_algorithm(name, &AlgorithmParams { r, ..AlgorithmParams::default() })?);
    Ok(prioritised_fluid_limit(Arc::new(field), r, 1e-3, 10.0)?.outputs[0])
}

pub fn constants(ctx: &Context, a: &crate::ConstantsArgs) -> Result<(), CliError> {
    let rows = constant_rows(a.with_tables)?;
    let path = ctx.write_json("constants.json", &rows)?;
    ctx.manifest("constants", json!({ "with_tables": a.with_tables }), &[path])?;
    print_json(&rows);
    Ok(())
}

// ============================================================================
// derive-check
// ============================================================================

pub fn derive_check(ctx: &Context, a: &crate::DeriveCheckArgs) -> Result<(), CliError> {
    let cap = a.d.unwrap_or(if a.algorithm == "cubic_is_path_improved" { 12 } else { 30 });
    let report = run_derive_check(&a.algorithm, a.points, a.seed, cap)?;
    let path = ctx.write_json("derive_check.json", &report)?;
    ctx.manifest(
        "derive-check",
        json!({ "algorithm": a.algorithm, "points": a.points, "seed": a.seed, "d": cap }),
        &[path],
    )?;
    print_json(&report);
    if !report.pass {
        return Err(CliError::Validation(format!("fields differ by up to {}", report.max_error)));
    }
    Ok(())
}

// ============================================================================
// girth and compare
// ============================================================================

/// Reads a catalogue graph by name, or a file in edge-list or LCF form.
pub fn load_graph(spec: &str) -> Result<ColouredGraph, CliError> {
    if cage_names().contains(&spec) {
        return Ok(cage(spec)?);
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let format = if text.trim_start().starts_with('[') { GraphFormat::Lcf } else { GraphFormat::EdgeList };
    Ok(parse_graph(&text, format)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct GirthReport {
    pub n: usize,
    pub edges: usize,
    /// `null` for a forest.
    pub girth: Option<u32>,
    /// `(length, vertices whose shortest cycle has this length)`.
    pub census: Vec<(u32, usize)>,
    pub acyclic_vertices: usize,
}

pub fn girth_report(g: &ColouredGraph, max_len: Option<u32>) -> GirthReport {
    let gi = match girth(g) {
        Girth::Finite(k) => Some(k),
        Girth::Infinite => None,
    };
    let through = cycle_lengths_through(g);
    let top = max_len.unwrap_or(gi.map_or(3, |k| k + 2));
    let census = (1..=top).map(|len| (len, through.iter().filter(|&&c| c == Some(len)).count())).filter(|&(len, c)| c > 0 || len >= 3).collect();
    GirthReport {
        n: g.n(),
        edges: g.edge_count(),
        girth: gi,
        census,
        acyclic_vertices: through.iter().filter(|c| c.is_none()).count(),
    }
}

pub fn girth_cmd(ctx: &Context, a: &crate::GirthArgs) -> Result<(), CliError> {
    let spec = a.file.display().to_string();
    let g = load_graph(&spec)?;
    let report = girth_report(&g, a.max_len);
    let path = ctx.write_json("girth.json", &report)?;
    ctx.manifest("girth", json!({ "file": spec }), &[path])?;
    print_json(&report);
    Ok(())
}

pub fn compare(ctx: &Context, a: &crate::CompareArgs) -> Result<(), CliError> {
    if a.graphs.len() != 2 {
        return Err(CliError::Usage(format!("--graphs takes two graphs, got {}", a.graphs.len())));
    }
    let [ga, gb] = [&a.graphs[0], &a.graphs[1]].map(|s| load_graph(s));
    let (ga, gb) = (ga?, gb?);
    let r = ga.max_degree().max(gb.max_degree());
    let spec = make_algorithm(&a.algorithm, &AlgorithmParams { r, ..AlgorithmParams::default() })?;
    if !(a.epsilon > 0.0 && a.epsilon <= 1.0) {
        return Err(CliError::Usage(format!("epsilon {} must lie in (0, 1]", a.epsilon)));
    }
    let sel = chunky_selection(&spec, a.epsilon);
    let ma = type_moments(&spec, &ga, &sel, a.steps, a.trials, a.seed)?;
    let mb = type_moments(&spec, &gb, &sel, a.steps, a.trials, a.seed.wrapping_add(1))?;
    let z = z_scores(&ma, &mb);
    let max_abs_z = z.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let rows = ma.labels.iter().enumerate().map(|(i, l)| {
        vec![l.clone(), format!("{}", ma.mean[i]), format!("{}", mb.mean[i]), format!("{}", z[i])]
    });
    let header = ["type", "mean_a", "mean_b", "z"].map(String::from);
    let csv = ctx.write_csv("compare.csv", &header, rows)?;
    let report = json!({
        "algorithm": a.algorithm,
        "graphs": a.graphs,
        "steps": a.steps,
        "epsilon": a.epsilon,
        "trials": a.trials,
        "max_abs_z": max_abs_z,
        "types": ma.labels.iter().enumerate().map(|(i, l)| json!({
            "type": l, "mean_a": ma.mean[i], "mean_b": mb.mean[i], "z": z[i],
        })).collect::<Vec<_>>(),
    });
    let js = ctx.write_json("compare.json", &report)?;
    ctx.manifest(
        "compare",
        json!({ "algorithm": a.algorithm, "graphs": a.graphs, "steps": a.steps, "epsilon": a.epsilon, "trials": a.trials, "seed": a.seed }),
        &[csv, js],
    )?;
    print_json(&report);
    Ok(())
}

// ============================================================================
// table
// ============================================================================

fn sim_summary(alg: &str, params: AlgorithmParams, a: &crate::TableArgs) -> Result<Summary, CliError> {
    let cfg = SimConfig {
        algorithm: alg.into(),
        params,
        n: a.n,
        mode: Mode::Prioritised,
        backend: Backend::Pairing,
        trials: a.trials,
        seed: a.seed,
        ..SimConfig::default()
    };
    Ok(summarise(cfg.n, &run_trials(&cfg)?))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

pub fn table(ctx: &Context, a: &crate::TableArgs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let header: Vec<String>;
    let rs = a.rs.clone().unwrap_or_else(|| if a.which == 1 { (3..=7).collect() } else { (3..=6).collect() });
    if a.which == 1 {
        header = ["r", "alpha_paper", "alpha_ode", "alpha_sim", "gamma_paper", "gamma_ode", "gamma_sim"].map(String::from).to_vec();
        for &r in &rs {
            let &(_, alpha, gamma) = TABLE_1
                .iter()
                .find(|t| t.0 == r)
                .ok_or_else(|| CliError::Usage(format!("Table 1 has no row r={r}")))?;
            let params = AlgorithmParams { r, ..AlgorithmParams::default() };
            let alpha_ode = fluid_output("dz_is", r)?;
            let gamma_ode = fluid_output("min_degree_dom", r)?;
            let (alpha_sim, gamma_sim) = if a.no_sim {
                (None, None)
            } else {
                (
                    Some(sim_summary("dz_is", params.clone(), a)?.mean_ratio),
                    Some(sim_summary("min_degree_dom", params, a)?.mean_ratio),
                )
            };
            rows.push(json!({
                "r": r, "alpha_paper": alpha, "alpha_ode": alpha_ode, "alpha_sim": alpha_sim,
                "gamma_paper": gamma, "gamma_ode": gamma_ode, "gamma_sim": gamma_sim,
            }));
        }
    } else {
        header = ["r", "beta_paper", "beta_sim", "deviation"].map(String::from).to_vec();
        for &r in &rs {
            let &(_, beta) = TABLE_2
                .iter()
                .find(|t| t.0 == r)
                .ok_or_else(|| CliError::Usage(format!("Table 2 has no row r={r}")))?;
            let sim = if a.no_sim {
                None
            } else {
                let params = AlgorithmParams { r, objective: Objective::Min, ..AlgorithmParams::default() };
                Some(sim_summary("bisection", params, a)?.mean_ratio)
            };
            rows.push(json!({ "r": r, "beta_paper": beta, "beta_sim": sim, "deviation": sim.map(|s| s - beta) }));
        }
    }
    let csv_rows = rows.iter().map(|row| {
        header
            .iter()
            .map(|h| match &row[h] {
                Value::Number(x) if h == "r" => x.to_string(),
                v => fmt_opt(v.as_f64()),
            })
            .collect()
    });
    let csv = ctx.write_csv(&format!("table{}.csv", a.which), &header, csv_rows)?;
    let mut report = json!({ "table": a.which, "n": a.n, "trials": a.trials, "rows": rows });
    if a.which == 2 {
        report["note"] = json!(TABLE_2_CAVEAT);
    }
    let js = ctx.write_json(&format!("table{}.json", a.which), &report)?;
    ctx.manifest(
        "table",
        json!({ "which": a.which, "rs": rs, "n": a.n, "trials": a.trials, "seed": a.seed, "stream_ids": (0..a.trials).collect::<Vec<_>>() }),
        &[csv, js],
    )?;
    print_json(&report);
    Ok(())
}
