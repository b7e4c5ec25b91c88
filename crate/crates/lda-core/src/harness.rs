//! Simulation harness: builds the selection rule for a run mode, samples
//! input graphs, runs trials in parallel and repairs and validates their
//! outputs.

use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{
    default_chunky_weights, make_algorithm, maxcut_phase_one_done, repair_output, validate_output, AlgorithmError,
    AlgorithmParams, PairPalette, RepairReport, Validation,
};
use crate::graph_core::ColouredGraph;
use crate::lda::{
    constant_chunky, run_algorithm, AlgorithmSpec, LdaError, MixWeights, RunOptions, Selection, StopPredicate,
    StopReason, Trajectory,
};
use crate::ode::{
    cubic_is_schedule, cut_selection_weights, neutral_id, prioritised_fluid_limit, GenericField, IsVariant, OdeError,
    WeightSchedule, CUT_TYPES,
};
use crate::pairing::{sample_simple_regular, Pairing, PairingError, Rng, DEFAULT_SIMPLE_TRIES};

/// Step of the fluid limits that drive deprioritised runs.
pub const SCHEDULE_STEP: f64 = 1e-3;
/// Chunky runs stop after `CHUNKY_X_LIMIT / epsilon` steps at the latest.
pub const CHUNKY_X_LIMIT: f64 = 50.0;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Lda(#[from] LdaError),
    #[error(transparent)]
    Pairing(#[from] PairingError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("{mode:?} mode is not supported for {algorithm}")]
    Unsupported { algorithm: String, mode: Mode },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Where input graphs come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Lazily exposed pairing; the input is a pseudograph.
    Pairing,
    /// Uniform simple regular graph by rejection.
    Simple,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Prioritised,
    Chunky,
    Deprioritised,
}

impl FromStr for Backend {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pairing" => Ok(Backend::Pairing),
            "simple" => Ok(Backend::Simple),
            other => Err(HarnessError::InvalidConfig(format!("unknown backend {other:?}"))),
        }
    }
}

impl FromStr for Mode {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prioritised" | "prioritized" => Ok(Mode::Prioritised),
            "chunky" => Ok(Mode::Chunky),
            "deprioritised" | "deprioritized" => Ok(Mode::Deprioritised),
            other => Err(HarnessError::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub algorithm: String,
    pub params: AlgorithmParams,
    pub n: usize,
    pub mode: Mode,
    /// Chunky granularity.
    pub epsilon: f64,
    pub backend: Backend,
    pub trials: usize,
    pub seed: u64,
    /// Trajectory sampling interval in steps.
    pub record_every: u64,
    pub keep_trajectories: bool,
    pub count_preclashes: bool,
    pub max_steps: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            algorithm: "min_degree_is".into(),
            params: AlgorithmParams::default(),
            n: 10_000,
            mode: Mode::Prioritised,
            epsilon: 0.1,
            backend: Backend::Pairing,
            trials: 1,
            seed: 1,
            record_every: 1000,
            keep_trajectories: false,
            count_preclashes: false,
            max_steps: None,
        }
    }
}

// ============================================================================
// Selection rules per mode
// ============================================================================

/// Everything about a configuration that is shared by its trials.
#[derive(Clone)]
pub struct Prepared {
    pub spec: AlgorithmSpec,
    pub selection: Selection,
    pub options: RunOptions,
}

impl std::fmt::Debug for Prepared {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Prepared")
            .field("spec", &self.spec)
            .field("selection", &self.selection)
            .field("max_steps", &self.options.max_steps)
            .finish()
    }
}

/// Relative weights per type id that may be unavailable at some `x`.
pub type RawWeights = Arc<dyn Fn(f64, &[f64]) -> Option<Vec<f64>> + Send + Sync>;

/// Wraps raw weights so that empty types get weight zero; when nothing is
/// left, the best-ranked non-empty types are drawn in proportion to their
/// counts.
pub fn masked_weights(spec: &AlgorithmSpec, raw: RawWeights) -> MixWeights {
    let spec = spec.clone();
    Arc::new(move |x, y| {
        let types = y.len();
        let mut w = raw(x, y).filter(|w| w.len() == types).unwrap_or_else(|| vec![0.0; types]);
        for (id, wi) in w.iter_mut().enumerate() {
            if y[id] <= 0.0 || !wi.is_finite() || *wi < 0.0 || !spec.selectable(spec.type_of_id(id)) {
                *wi = 0.0;
            }
        }
        if w.iter().all(|&v| v == 0.0) {
            let rank = |id: usize| spec.rules.rank(spec.type_of_id(id));
            let best = (0..types).filter(|&id| y[id] > 0.0 && spec.selectable(spec.type_of_id(id))).filter_map(rank).min();
            if let Some(b) = best {
                for id in 0..types {
                    if y[id] > 0.0 && spec.selectable(spec.type_of_id(id)) && rank(id) == Some(b) {
                        w[id] = y[id];
                    }
                }
            }
        }
        w
    })
}

/// Schedule weights by degree, spread over the neutral type ids.
fn schedule_weights(spec: &AlgorithmSpec, schedule: WeightSchedule) -> RawWeights {
    let ids: Vec<usize> = (0..=spec.r).map(|d| neutral_id(spec, d)).collect();
    let types = spec.type_count();
    Arc::new(move |x, _y| {
        let by_degree = schedule.at(x)?;
        let mut w = vec![0.0; types];
        for (&id, &wd) in ids.iter().zip(by_degree) {
            w[id] = wd;
        }
        Some(w)
    })
}

/// Max-cut weights from the empirical densities of the six pair classes.
/// Uncoloured vertices get no weight; the masking fallback selects them
/// whenever nothing with a coloured neighbour is left.
fn maxcut_weights(spec: &AlgorithmSpec) -> RawWeights {
    let palette = PairPalette::new(3);
    let class: Vec<Option<usize>> = (0..spec.type_count())
        .map(|id| palette.pair(spec.type_of_id(id).colour).and_then(|p| CUT_TYPES.iter().position(|&c| c == p)))
        .collect();
    let forced: Vec<bool> =
        (0..spec.type_count()).map(|id| spec.rules.rank(spec.type_of_id(id)) == Some(0)).collect();
    let types = spec.type_count();
    Arc::new(move |_, y| {
        let mut agg = [0.0; 6];
        for (id, c) in class.iter().enumerate() {
            if let Some(c) = c {
                agg[*c] += y[id];
            }
        }
        let hand = cut_selection_weights(&agg);
        if hand.iter().any(|w| !w.is_finite()) {
            return None;
        }
        let top = hand.iter().cloned().fold(0.0, f64::max);
        Some(
            (0..types)
                .map(|id| match class[id] {
                    Some(c) if hand[c] > 0.0 => hand[c],
                    // Pairs the hand system never holds are cleared as they appear.
                    _ if forced[id] => top,
                    _ => 0.0,
                })
                .collect(),
        )
    })
}

/// Raw deprioritised weights for an algorithm, if it has a known schedule.
fn deprioritised_raw(
    spec: &AlgorithmSpec,
    params: &AlgorithmParams,
) -> Result<RawWeights, HarnessError> {
    match spec.name.as_str() {
        "min_degree_is" | "min_degree_dom" | "dz_is" => {
            let field = GenericField::new(make_algorithm(&spec.name, params)?);
            let fl = prioritised_fluid_limit(Arc::new(field), spec.r, SCHEDULE_STEP, 10.0)?;
            Ok(schedule_weights(spec, fl.schedule))
        }
        "cubic_is_path" => Ok(schedule_weights(spec, cubic_is_schedule(IsVariant::Base, SCHEDULE_STEP)?)),
        "cubic_is_path_improved" => Ok(schedule_weights(spec, cubic_is_schedule(IsVariant::Improved, SCHEDULE_STEP)?)),
        "cubic_maxcut" => Ok(maxcut_weights(spec)),
        other => Err(HarnessError::Unsupported { algorithm: other.to_string(), mode: Mode::Deprioritised }),
    }
}

/// Builds the algorithm, its selection rule and the run options.
pub fn prepare(cfg: &SimConfig) -> Result<Prepared, HarnessError> {
    if cfg.n == 0 || cfg.trials == 0 {
        return Err(HarnessError::InvalidConfig("n and trials must be positive".into()));
    }
    let spec = make_algorithm(&cfg.algorithm, &cfg.params)?;
    let mut options = RunOptions {
        max_steps: cfg.max_steps,
        stop_when: None,
        record_every: cfg.record_every.max(1),
        count_preclashes: cfg.count_preclashes,
        audit: false,
    };
    let selection = match cfg.mode {
        Mode::Prioritised => Selection::Prioritised,
        Mode::Chunky => {
            if !(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0) {
                return Err(HarnessError::InvalidConfig(format!("epsilon {} must lie in (0, 1]", cfg.epsilon)));
            }
            let probs: Vec<f64> = default_chunky_weights(&spec).iter().map(|w| (w * cfg.epsilon).min(1.0)).collect();
            options.max_steps.get_or_insert((CHUNKY_X_LIMIT / cfg.epsilon).ceil() as u64);
            constant_chunky(probs)
        }
        Mode::Deprioritised => {
            if spec.name == "cubic_maxcut" {
                let stop: StopPredicate = maxcut_phase_one_done();
                options.stop_when = Some(stop);
            }
            Selection::Deprioritised(masked_weights(&spec, deprioritised_raw(&spec, &cfg.params)?))
        }
    };
    Ok(Prepared { spec, selection, options })
}

// ============================================================================
// Trials
// ============================================================================

#[derive(Clone, Debug, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub steps: u64,
    pub stop: StopReason,
    /// Raw output-function values.
    pub outputs: Vec<f64>,
    pub clashes: u64,
    pub preclashes: u64,
    pub repair: RepairReport,
    pub validation: Validation,
    /// Validated value over `n`.
    pub ratio: f64,
    /// Whether the input graph had neither loops nor multiple edges.
    pub simple_input: bool,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

/// The input graph of a finished run with loops dropped.
fn loopless(g: &ColouredGraph) -> ColouredGraph {
    let edges: Vec<_> = g.edges().filter(|&(_, u, v)| u != v).map(|(_, u, v)| (u, v)).collect();
    ColouredGraph::from_edges(g.n(), &edges)
}

/// Runs trial `trial` on its own random stream.
pub fn run_trial(cfg: &SimConfig, prep: &Prepared, trial: usize) -> Result<TrialResult, HarnessError> {
    let mut rng = Rng::split(cfg.seed, trial as u64);
    let spec = &prep.spec;
    let mut host = match cfg.backend {
        Backend::Pairing => spec.survival_pairing(Pairing::new(&vec![spec.r; cfg.n])?),
        Backend::Simple => spec.survival_graph(sample_simple_regular(cfg.n, spec.r, &mut rng, DEFAULT_SIMPLE_TRIES)?),
    };
    let rec = run_algorithm(spec, &mut host, &prep.selection, &prep.options, &mut rng)?;
    host.reveal_all(&mut rng);
    let full = host.input_graph();
    let simple_input = full.is_simple();
    let input = loopless(&full);
    let (object, repair) = repair_output(&cfg.algorithm, &cfg.params, &input, &host, &mut rng)?;
    let validation = validate_output(&cfg.algorithm, &input, &object)?;
    Ok(TrialResult {
        trial,
        steps: rec.steps,
        stop: rec.stop,
        outputs: rec.outputs,
        clashes: rec.clashes,
        preclashes: rec.preclashes,
        repair,
        ratio: validation.value / cfg.n as f64,
        validation,
        simple_input,
        trajectory: cfg.keep_trajectories.then_some(rec.trajectory),
    })
}

/// Runs all trials of a configuration in parallel, in trial order.
pub fn run_trials(cfg: &SimConfig) -> Result<Vec<TrialResult>, HarnessError> {
    let prep = prepare(cfg)?;
    (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, &prep, t)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub n: usize,
    pub mean_ratio: f64,
    /// Sample standard deviation of the ratio.
    pub std_ratio: f64,
    /// Mean raw first output over `n`, before repair.
    pub mean_raw_ratio: f64,
    pub validity_rate: f64,
    pub mean_repair_fraction: f64,
    pub mean_steps: f64,
    pub mean_clashes: f64,
    pub preclashes_per_step: f64,
    pub simple_input_rate: f64,
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// # Panics
/// If `results` is empty.
pub fn summarise(n: usize, results: &[TrialResult]) -> Summary {
    assert!(!results.is_empty(), "no trials to summarise");
    let k = results.len() as f64;
    let ratios: Vec<f64> = results.iter().map(|r| r.ratio).collect();
    let (mean_ratio, std_ratio) = mean_std(&ratios);
    let avg = |f: &dyn Fn(&TrialResult) -> f64| results.iter().map(f).sum::<f64>() / k;
    let steps: u64 = results.iter().map(|r| r.steps).sum();
    let pre: u64 = results.iter().map(|r| r.preclashes).sum();
    Summary {
        trials: results.len(),
        n,
        mean_ratio,
        std_ratio,
        mean_raw_ratio: avg(&|r| r.outputs.first().copied().unwrap_or(0.0) / n as f64),
        validity_rate: avg(&|r| f64::from(u8::from(r.validation.pass))),
        mean_repair_fraction: avg(&|r| r.repair.added_fraction),
        mean_steps: avg(&|r| r.steps as f64),
        mean_clashes: avg(&|r| r.clashes as f64),
        preclashes_per_step: if steps == 0 { 0.0 } else { pre as f64 / steps as f64 },
        simple_input_rate: avg(&|r| f64::from(u8::from(r.simple_input))),
    }
}

// ============================================================================
// Fixed-graph comparisons
// ============================================================================

/// Per-type mean and variance of the density after a fixed number of steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeMoments {
    pub labels: Vec<String>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub trials: usize,
}

/// Runs `steps` steps of `selection` on fresh copies of `graph`, `trials`
/// times, and returns the moments of every type density.
pub fn type_moments(
    spec: &AlgorithmSpec,
    graph: &ColouredGraph,
    selection: &Selection,
    steps: u64,
    trials: usize,
    seed: u64,
) -> Result<TypeMoments, HarnessError> {
    let n = graph.n() as f64;
    let types = spec.type_count();
    let opts = RunOptions { max_steps: Some(steps), record_every: u64::MAX, count_preclashes: false, ..RunOptions::default() };
    let chunk = 4096;
    let sums = (0..trials.div_ceil(chunk))
        .into_par_iter()
        .map(|c| -> Result<(Vec<f64>, Vec<f64>), HarnessError> {
            let mut s1 = vec![0.0; types];
            let mut s2 = vec![0.0; types];
            for t in c * chunk..((c + 1) * chunk).min(trials) {
                let mut rng = Rng::split(seed, t as u64);
                let mut host = spec.survival_graph(graph.clone());
                run_algorithm(spec, &mut host, selection, &opts, &mut rng)?;
                for (id, &count) in host.counts().iter().enumerate() {
                    let y = count as f64 / n;
                    s1[id] += y;
                    s2[id] += y * y;
                }
            }
            Ok((s1, s2))
        })
        .try_reduce(
            || (vec![0.0; types], vec![0.0; types]),
            |(mut a1, mut a2), (b1, b2)| {
                a1.iter_mut().zip(&b1).for_each(|(a, b)| *a += b);
                a2.iter_mut().zip(&b2).for_each(|(a, b)| *a += b);
                Ok((a1, a2))
            },
        )?;
    let k = trials as f64;
    let mean: Vec<f64> = sums.0.iter().map(|s| s / k).collect();
    let var = sums.1.iter().zip(&mean).map(|(s2, m)| ((s2 / k - m * m) * k / (k - 1.0).max(1.0)).max(0.0)).collect();
    Ok(TypeMoments { labels: (0..types).map(|id| spec.type_label(id)).collect(), mean, var, trials })
}

/// Two-sample z-score per type; `0` where both variances vanish.
pub fn z_scores(a: &TypeMoments, b: &TypeMoments) -> Vec<f64> {
    a.mean
        .iter()
        .zip(&b.mean)
        .zip(a.var.iter().zip(&b.var))
        .map(|((ma, mb), (va, vb))| {
            let se = (va / a.trials as f64 + vb / b.trials as f64).sqrt();
            if se == 0.0 {
                if ma == mb { 0.0 } else { f64::INFINITY }
            } else {
                (ma - mb) / se
            }
        })
        .collect()
}

/// Default chunky selection of an algorithm at granularity `epsilon`.
pub fn chunky_selection(spec: &AlgorithmSpec, epsilon: f64) -> Selection {
    constant_chunky(default_chunky_weights(spec).iter().map(|w| (w * epsilon).min(1.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(alg: &str, mode: Mode) -> SimConfig {
        SimConfig { algorithm: alg.into(), n: 2000, mode, trials: 3, seed: 11, ..SimConfig::default() }
    }

    #[test]
    fn parses_modes_and_backends() {
        assert_eq!("chunky".parse::<Mode>().unwrap(), Mode::Chunky);
        assert_eq!("simple".parse::<Backend>().unwrap(), Backend::Simple);
        assert!("x".parse::<Mode>().is_err());
    }

    #[test]
    fn trials_are_reproducible_and_valid() {
        let c = cfg("min_degree_is", Mode::Prioritised);
        let a = run_trials(&c).unwrap();
        let b = run_trials(&c).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.validation, y.validation);
            assert!(x.validation.pass);
            assert!((0.40..0.46).contains(&x.ratio), "ratio {}", x.ratio);
        }
        let s = summarise(c.n, &a);
        assert_eq!(s.validity_rate, 1.0);
    }

    #[test]
    fn every_mode_runs_on_the_simple_backend() {
        for mode in [Mode::Prioritised, Mode::Chunky, Mode::Deprioritised] {
            let mut c = cfg("min_degree_is", mode);
            c.backend = Backend::Simple;
            c.epsilon = 0.2;
            let res = run_trials(&c).unwrap();
            assert!(res.iter().all(|r| r.validation.pass && r.simple_input), "{mode:?}");
        }
    }

    #[test]
    fn unsupported_and_invalid_configs() {
        let c = cfg("induced_forest", Mode::Deprioritised);
        assert!(matches!(prepare(&c), Err(HarnessError::Unsupported { .. })));
        let mut c = cfg("min_degree_is", Mode::Chunky);
        c.epsilon = 0.0;
        assert!(matches!(prepare(&c), Err(HarnessError::InvalidConfig(_))));
        c.n = 0;
        assert!(prepare(&c).is_err());
    }

    #[test]
    fn masking_falls_back_to_the_best_rank() {
        let spec = make_algorithm("min_degree_is", &AlgorithmParams::default()).unwrap();
        let w = masked_weights(&spec, Arc::new(|_, _| None));
        let mut y = vec![0.0; spec.type_count()];
        y[neutral_id(&spec, 2)] = 0.3;
        y[neutral_id(&spec, 3)] = 0.5;
        let out = w(0.0, &y);
        assert_eq!(out[neutral_id(&spec, 2)], 0.3);
        assert_eq!(out[neutral_id(&spec, 3)], 0.0);
    }

    #[test]
    fn identical_graphs_give_zero_z_scores() {
        let spec = make_algorithm("min_degree_is", &AlgorithmParams { r: 2, ..AlgorithmParams::default() }).unwrap();
        let g = crate::graph_core::families::cycle(12);
        let sel = chunky_selection(&spec, 0.3);
        let a = type_moments(&spec, &g, &sel, 1, 200, 5).unwrap();
        let b = type_moments(&spec, &g, &sel, 1, 200, 5).unwrap();
        assert_eq!(a.mean.len(), spec.type_count());
        assert!(z_scores(&a, &b).iter().all(|&z| z == 0.0));
        let total: f64 = a.mean.iter().sum();
        assert!(total < 1.0 && total > 0.0);
    }
}
