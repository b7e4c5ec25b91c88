//! The deterministic side: transition fields (hand-coded and generically
//! evaluated from an algorithm's rules), the Euler recurrence, the
//! differential equation systems, mixing weights for deprioritised
//! algorithms, fixed-step RK4 with event location, and closed-form
//! constants.
//!
//! State vectors hold one density per type followed by one value per output
//! function. Type draws during exploration pick a type with probability
//! proportional to `degree * density`, the pairing-model chance that a random
//! unexposed point lies in a vertex of that type.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{self, AlgorithmParams};
use crate::graph_core::{Colour, VertexType};
use crate::lda::{Action, AlgorithmSpec, ClashMask, Elem, Fate, QueryGraph, Target};

/// Default lower bound on `Σ degree * density` for evaluating a field.
pub const DOMAIN_EPSILON: f64 = 1e-6;
/// Query graphs less likely than this are dropped during enumeration.
pub const DEFAULT_PRUNE: f64 = 1e-16;
/// Default bound on the total dropped probability.
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-9;
/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 1e-4;
/// Event roots are bisected to this width.
pub const EVENT_TOLERANCE: f64 = 1e-12;

const MAX_LEVELS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("point outside the domain: degree-weighted mass {mass:.3e} < {epsilon:.1e}")]
    OutsideDomain { mass: f64, epsilon: f64 },
    #[error("Euler recurrence left the domain at step {step}")]
    OutsideDomainAt { step: usize },
    #[error("truncated probability mass {loss:.3e} exceeds tolerance {tolerance:.1e}")]
    TruncationLoss { loss: f64, tolerance: f64 },
    #[error("degenerate mix: alpha + beta = {sum:.3e}")]
    DegenerateMix { sum: f64 },
    #[error("integration left the domain at x = {x}")]
    LeftDomain { x: f64 },
    #[error("no event before x = {x_end}")]
    NoEventInRange { x_end: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

// ============================================================================
// Transition fields
// ============================================================================

/// Expected one-step changes: `eval(i, y)` is the expected change of every
/// type count and output function when a vertex of type `i` is processed in
/// a large random pairing with type densities `y`.
pub trait TransitionField: Send + Sync {
    /// Number of tracked types `R`.
    fn type_count(&self) -> usize;
    /// Number of output functions `s`.
    fn output_count(&self) -> usize;
    /// Degree of type `k`.
    fn degree(&self, k: usize) -> u32;
    /// Vector of length `R + s`.
    fn eval(&self, i: usize, y: &[f64]) -> Result<Vec<f64>, OdeError>;
    /// Label of type `k`.
    fn type_label(&self, k: usize) -> String {
        format!("t{k}")
    }

    fn dim(&self) -> usize {
        self.type_count() + self.output_count()
    }
}

/// `Σ degree(k) * y_k`, the density of unexposed points.
pub fn point_mass(field: &dyn TransitionField, y: &[f64]) -> f64 {
    (0..field.type_count()).map(|k| field.degree(k) as f64 * y[k]).sum()
}

fn check_domain(mass: f64, epsilon: f64) -> Result<(), OdeError> {
    if mass < epsilon || !mass.is_finite() {
        Err(OdeError::OutsideDomain { mass, epsilon })
    } else {
        Ok(())
    }
}

/// The transition field of an algorithm, evaluated by enumerating its tree
/// query graphs. Coordinates are the spec's type ids.
#[derive(Clone, Debug)]
pub struct GenericField {
    spec: AlgorithmSpec,
    pub epsilon: f64,
    pub prune: f64,
    pub tolerance: f64,
}

/// Result of one generic evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldEval {
    pub f: Vec<f64>,
    /// Probability of the query graphs that were dropped.
    pub residual: f64,
    pub graphs: usize,
}

/// Enumerated query graphs with their probabilities.
#[derive(Clone, Debug)]
pub struct QueryDistribution {
    pub graphs: Vec<(QueryGraph, f64)>,
    pub residual: f64,
}

impl GenericField {
    pub fn new(spec: AlgorithmSpec) -> Self {
        GenericField { spec, epsilon: DOMAIN_EPSILON, prune: DEFAULT_PRUNE, tolerance: DEFAULT_TRUNCATION_TOLERANCE }
    }

    pub fn spec(&self) -> &AlgorithmSpec {
        &self.spec
    }

    /// Type-draw probabilities, or `None` when no point is left.
    fn draws(&self, y: &[f64]) -> Option<Vec<(VertexType, f64)>> {
        let types = self.spec.type_count();
        let mass: f64 = (0..types).map(|k| self.spec.type_of_id(k).degree as f64 * y[k]).sum();
        if mass < self.epsilon || !mass.is_finite() {
            return None;
        }
        Some(
            (0..types)
                .map(|k| (self.spec.type_of_id(k), self.spec.type_of_id(k).degree as f64 * y[k] / mass))
                .filter(|&(_, q)| q > 0.0)
                .collect(),
        )
    }

    fn mass(&self, y: &[f64]) -> f64 {
        (0..self.spec.type_count()).map(|k| self.spec.type_of_id(k).degree as f64 * y[k]).sum()
    }

    /// Distribution of tree query graphs from a root of type `i`.
    pub fn enumerate(&self, i: usize, y: &[f64]) -> Result<QueryDistribution, OdeError> {
        self.check_len(y)?;
        let root = self.spec.type_of_id(i);
        let draws = self.draws(y);
        let mut frontier: BTreeMap<Vec<u32>, (QueryGraph, f64)> = BTreeMap::new();
        let q0 = QueryGraph::rooted(root);
        frontier.insert(q0.canonical_key(), (q0, 1.0));
        let mut done = Vec::new();
        let mut residual = 0.0;
        for _ in 0..MAX_LEVELS {
            if frontier.is_empty() {
                break;
            }
            let mut next: BTreeMap<Vec<u32>, (QueryGraph, f64)> = BTreeMap::new();
            let mut push = |q: QueryGraph, w: f64| {
                next.entry(q.canonical_key()).and_modify(|e| e.1 += w).or_insert((q, w));
            };
            for (_, (q, g)) in std::mem::take(&mut frontier) {
                for (action, pa) in self.spec.rules.explore(&q) {
                    let w = g * pa;
                    if w == 0.0 {
                        continue;
                    }
                    match action {
                        Action::Stop => done.push((q.clone(), w)),
                        Action::Query { target: Target::Diamond, .. } => {
                            let draws = draws
                                .as_ref()
                                .ok_or(OdeError::OutsideDomain { mass: self.mass(y), epsilon: self.epsilon })?;
                            for &(t, qt) in draws {
                                let mut q2 = q.clone();
                                q2.apply_abstract(action, Some(t));
                                push(q2, w * qt);
                            }
                        }
                        Action::Query { target: Target::Type(_), .. } => {
                            let mut q2 = q.clone();
                            q2.apply_abstract(action, None);
                            push(q2, w);
                        }
                    }
                }
            }
            next.retain(|_, (_, w)| {
                if *w < self.prune {
                    residual += *w;
                    false
                } else {
                    true
                }
            });
            frontier = next;
        }
        residual += frontier.values().map(|(_, w)| w).sum::<f64>();
        Ok(QueryDistribution { graphs: done, residual })
    }

    fn check_len(&self, y: &[f64]) -> Result<(), OdeError> {
        if y.len() < self.spec.type_count() {
            return Err(OdeError::InvalidInput(format!(
                "state has {} entries, field has {} types",
                y.len(),
                self.spec.type_count()
            )));
        }
        Ok(())
    }

    /// Expected changes from a root of type `i`, with the dropped mass.
    pub fn evaluate(&self, i: usize, y: &[f64]) -> Result<FieldEval, OdeError> {
        let dist = self.enumerate(i, y)?;
        let types = self.spec.type_count();
        let outs = self.spec.output_names.len();
        let draws = self.draws(y);
        let mut phi: Option<Vec<f64>> = None;
        let mut f = vec![0.0; types + outs];
        for (q, g) in &dist.graphs {
            for (mut rec, pr) in self.spec.rules.recolour(q) {
                rec.normalise(q);
                let w = g * pr;
                let mut apply_phi = |f: &mut [f64], times: f64| -> Result<(), OdeError> {
                    if times == 0.0 {
                        return Ok(());
                    }
                    if phi.is_none() {
                        let draws = draws
                            .as_ref()
                            .ok_or(OdeError::OutsideDomain { mass: self.mass(y), epsilon: self.epsilon })?;
                        let mut v = vec![0.0; types];
                        for &(t, qt) in draws {
                            v[self.spec.type_id(t)] -= qt;
                            v[self.spec.type_id(VertexType::new(t.colour, t.degree - 1))] += qt;
                        }
                        phi = Some(v);
                    }
                    for (fk, pk) in f.iter_mut().zip(phi.as_ref().expect("set above")) {
                        *fk += times * pk;
                    }
                    Ok(())
                };
                for (j, node) in q.nodes.iter().enumerate() {
                    f[self.spec.type_id(node.ty)] -= w;
                    let open = q.diamonds(j);
                    match rec.nodes[j] {
                        Fate::Keep => f[self.spec.type_id(VertexType::new(node.ty.colour, open as u32))] += w,
                        Fate::Transient(c) => f[self.spec.type_id(VertexType::new(c, open as u32))] += w,
                        Fate::Output(_) => apply_phi(&mut f, w * open as f64)?,
                    }
                    for (k, e) in node.ell.iter().enumerate() {
                        let Elem::Known(t) = e else { continue };
                        f[self.spec.type_id(*t)] -= w;
                        match rec.ell[j][k] {
                            Fate::Transient(c) => f[self.spec.type_id(VertexType::new(c, t.degree - 1))] += w,
                            Fate::Output(_) => apply_phi(&mut f, w * (t.degree - 1) as f64)?,
                            Fate::Keep => unreachable!("known elements are normalised"),
                        }
                    }
                }
                let mut acc = vec![0.0; outs];
                self.spec.rules.outputs(q, &rec, &ClashMask::none(q), &mut acc);
                for (fo, a) in f[types..].iter_mut().zip(acc) {
                    *fo += w * a;
                }
            }
        }
        Ok(FieldEval { f, residual: dist.residual, graphs: dist.graphs.len() })
    }
}

impl TransitionField for GenericField {
    fn type_count(&self) -> usize {
        self.spec.type_count()
    }

    fn output_count(&self) -> usize {
        self.spec.output_names.len()
    }

    fn degree(&self, k: usize) -> u32 {
        self.spec.type_of_id(k).degree
    }

    fn eval(&self, i: usize, y: &[f64]) -> Result<Vec<f64>, OdeError> {
        let e = self.evaluate(i, y)?;
        if e.residual > self.tolerance {
            return Err(OdeError::TruncationLoss { loss: e.residual, tolerance: self.tolerance });
        }
        Ok(e.f)
    }

    fn type_label(&self, k: usize) -> String {
        self.spec.type_label(k)
    }
}

/// The six max-cut types `rb` with `r + b <= 2`, in coordinate order.
pub const CUT_TYPES: [(u32, u32); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

/// Hand-coded max-cut field over [`CUT_TYPES`] plus the cut size.
///
/// An operation on a `rb` vertex with `r > b` colours it blue and adds one
/// blue neighbour to each of its `3 - r - b` neighbours; `r < b` colours it
/// red; `r = b` picks either with probability 1/2. A neighbour left with no
/// unexposed point is coloured in the same operation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CutField;

impl CutField {
    fn index(r: u32, b: u32) -> Option<usize> {
        CUT_TYPES.iter().position(|&t| t == (r, b))
    }

    /// Change vector when the root is coloured blue (`blue = true`) or red.
    fn coloured(i: usize, y: &[f64], blue: bool) -> Vec<f64> {
        let (ri, bi) = CUT_TYPES[i];
        let s: f64 = CUT_TYPES.iter().zip(y).map(|(&(r, b), &v)| (3 - r - b) as f64 * v).sum();
        let open = (3 - ri - bi) as f64;
        let mut f = vec![0.0; 7];
        f[i] -= 1.0;
        for (k, &(r, b)) in CUT_TYPES.iter().enumerate() {
            let deg = (3 - r - b) as f64;
            let source = if blue {
                b.checked_sub(1).and_then(|b0| CutField::index(r, b0))
            } else {
                r.checked_sub(1).and_then(|r0| CutField::index(r0, b))
            };
            let inflow = source.map_or(0.0, |src| (deg + 1.0) * y[src]);
            f[k] += open * (inflow - deg * y[k]) / s;
        }
        let root_cut = if blue { ri } else { bi } as f64;
        // Neighbours of degree 1 are coloured against their majority.
        let last: f64 = CUT_TYPES
            .iter()
            .zip(y)
            .filter(|(&(r, b), _)| r + b == 2)
            .map(|(&(r, b), &v)| {
                let (r2, b2) = if blue { (r, b + 1) } else { (r + 1, b) };
                r2.max(b2) as f64 * v / s
            })
            .sum();
        f[6] = root_cut + open * last;
        f
    }
}

impl TransitionField for CutField {
    fn type_count(&self) -> usize {
        6
    }

    fn output_count(&self) -> usize {
        1
    }

    fn degree(&self, k: usize) -> u32 {
        let (r, b) = CUT_TYPES[k];
        3 - r - b
    }

    fn eval(&self, i: usize, y: &[f64]) -> Result<Vec<f64>, OdeError> {
        check_domain(point_mass(self, y), DOMAIN_EPSILON)?;
        let (r, b) = CUT_TYPES[i];
        Ok(match r.cmp(&b) {
            std::cmp::Ordering::Greater => CutField::coloured(i, y, true),
            std::cmp::Ordering::Less => CutField::coloured(i, y, false),
            std::cmp::Ordering::Equal => {
                let blue = CutField::coloured(i, y, true);
                let red = CutField::coloured(i, y, false);
                blue.iter().zip(&red).map(|(a, c)| 0.5 * (a + c)).collect()
            }
        })
    }

    fn type_label(&self, k: usize) -> String {
        let (r, b) = CUT_TYPES[k];
        format!("{r}{b}")
    }
}

/// Which cubic independent-set path rule a hand field describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IsVariant {
    Base,
    Improved,
}

/// Hand-coded cubic independent-set field over degrees 1, 2, 3 plus the set
/// size, valid when no degree-1 vertices are present. Operation `i` is the
/// operation on a vertex of degree `i + 1`.
#[derive(Clone, Copy, Debug)]
pub struct CubicIsField {
    pub variant: IsVariant,
}

/// Chance that a random unexposed point lies in a degree-2 vertex.
pub fn degree_two_share(y: &[f64]) -> f64 {
    2.0 * y[1] / (y[0] + 2.0 * y[1] + 3.0 * y[2])
}

impl CubicIsField {
    /// Expected change from deleting a vertex of degree 1.
    pub fn op1(p: f64) -> [f64; 4] {
        [-1.0 + 2.0 * p - p * p, 2.0 - 6.0 * p + 2.0 * p * p, -3.0 + 4.0 * p - p * p, 1.0]
    }

    /// Expected change from the degree-2 path operation.
    pub fn op2_base(p: f64) -> [f64; 4] {
        [
            2.0 * p * (2.0 + p) / (1.0 + p),
            (3.0 - 12.0 * p + 3.0 * p * p + 4.0 * p.powi(3)) / (1.0 - p * p),
            2.0 * (-3.0 + p + p * p) / (1.0 + p),
            1.0 / (1.0 - p * p),
        ]
    }

    /// Expected change from the two-path operation: the sum of the odd-path
    /// case and the three parity cases of the second path.
    pub fn op2_improved(p: f64) -> [f64; 4] {
        let q = 1.0 + p;
        let m = 1.0 - p;
        let odd = [
            4.0 * p * (p * p + 1.0) / (q * q),
            (8.0 * p.powi(5) - 5.0 * p.powi(4) - 6.0 * p * p - 8.0 * p + 3.0) / (m * q.powi(3)),
            2.0 * (2.0 * p - 3.0) * (1.0 + p * p) / (q * q),
            (1.0 + 3.0 * p * p) / (m * q.powi(3)),
        ];
        let even_even = [
            12.0 * p * p / q.powi(4),
            8.0 * p * (3.0 * p.powi(3) - 3.0 * p * p - 3.0 * p + 1.0) / (q.powi(5) * m),
            4.0 * p * (3.0 * p - 5.0) / q.powi(4),
            4.0 * p * (p * p + 1.0) / (q.powi(5) * m),
        ];
        let mixed = [
            8.0 * p.powi(3) / q.powi(4),
            4.0 * p * p * (4.0 * p.powi(3) - 9.0 * p * p - 4.0 * p + 1.0) / (q.powi(5) * m),
            8.0 * p * p * (p - 3.0) / q.powi(4),
            8.0 * p * p * (p * p + 1.0) / (q.powi(5) * m),
        ];
        let odd_odd = [
            8.0 * p.powi(4) / q.powi(4),
            2.0 * p.powi(3) * (8.0 * p.powi(3) - 9.0 * p * p - 8.0 * p + 1.0) / (q.powi(5) * m),
            8.0 * p.powi(3) * (p - 2.0) / q.powi(4),
            2.0 * p.powi(3) * (p * p + 3.0) / (q.powi(5) * m),
        ];
        std::array::from_fn(|k| odd[k] + even_even[k] + mixed[k] + odd_odd[k])
    }

    /// Expected change from deleting a vertex of degree 3 with its neighbours.
    pub fn op3(p: f64) -> [f64; 4] {
        let phi = [p, 1.0 - 2.0 * p, p - 1.0];
        let mut f = [0.0, 0.0, -1.0, 1.0];
        for k in 0..3 {
            f[k] += 3.0 * (p * phi[k] + (1.0 - p) * 2.0 * phi[k]);
        }
        f[1] -= 3.0 * p;
        f[2] -= 3.0 * (1.0 - p);
        f
    }
}

impl TransitionField for CubicIsField {
    fn type_count(&self) -> usize {
        3
    }

    fn output_count(&self) -> usize {
        1
    }

    fn degree(&self, k: usize) -> u32 {
        k as u32 + 1
    }

    fn eval(&self, i: usize, y: &[f64]) -> Result<Vec<f64>, OdeError> {
        check_domain(point_mass(self, y), DOMAIN_EPSILON)?;
        let p = degree_two_share(y);
        let f = match (i, self.variant) {
            (0, _) => CubicIsField::op1(p),
            (1, IsVariant::Base) => CubicIsField::op2_base(p),
            (1, IsVariant::Improved) => CubicIsField::op2_improved(p),
            (2, _) => CubicIsField::op3(p),
            _ => return Err(OdeError::InvalidInput(format!("no operation {i}"))),
        };
        Ok(f.to_vec())
    }

    fn type_label(&self, k: usize) -> String {
        format!("d{}", k + 1)
    }
}

// ============================================================================
// Euler recurrence and right-hand sides
// ============================================================================

/// Per-step, per-type selection probabilities for step `t` (1-based).
pub type StepProbs = Arc<dyn Fn(usize) -> Vec<f64> + Send + Sync>;
/// Per-type functions of `x`.
pub type SelectionFns = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
/// Relative selection weights as functions of `x` and the state.
pub type RelativeWeights = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// `z(t) = z(t-1) + Σ_i p_{t,i} z_i(t-1) f(i, z(t-1))` for `t = 1..=steps`.
/// Returns `z(0..=steps)`.
pub fn euler_recurrence(
    probs: &StepProbs,
    field: &dyn TransitionField,
    z0: &[f64],
    steps: usize,
) -> Result<Vec<Vec<f64>>, OdeError> {
    let dim = field.dim();
    if z0.len() != dim {
        return Err(OdeError::InvalidInput(format!("initial state has {} entries, need {dim}", z0.len())));
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(z0.to_vec());
    for t in 1..=steps {
        let prev = out.last().expect("non-empty");
        let p = probs(t);
        let mut next = prev.clone();
        for (i, &pi) in p.iter().enumerate().take(field.type_count()) {
            let coeff = pi * prev[i];
            if coeff == 0.0 {
                continue;
            }
            let f = field.eval(i, prev).map_err(|e| match e {
                OdeError::OutsideDomain { .. } => OdeError::OutsideDomainAt { step: t },
                other => other,
            })?;
            for (nj, fj) in next.iter_mut().zip(&f) {
                *nj += coeff * fj;
            }
        }
        out.push(next);
    }
    Ok(out)
}

pub type Rhs = Arc<dyn Fn(f64, &[f64]) -> Result<Vec<f64>, OdeError> + Send + Sync>;
pub type EventFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
pub type DomainFn = Arc<dyn Fn(f64, &[f64]) -> bool + Send + Sync>;

/// `y' = rhs(x, y)` on a domain, with events whose sign change stops
/// integration.
#[derive(Clone)]
pub struct OdeSystem {
    pub names: Vec<String>,
    pub rhs: Rhs,
    pub domain: DomainFn,
    pub events: Vec<(String, EventFn)>,
}

impl std::fmt::Debug for OdeSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OdeSystem").field("names", &self.names).finish_non_exhaustive()
    }
}

impl OdeSystem {
    pub fn dim(&self) -> usize {
        self.names.len()
    }
}

fn field_names(field: &dyn TransitionField, outputs: &[String]) -> Vec<String> {
    let mut names: Vec<String> = (0..field.type_count()).map(|k| format!("y_{}", field.type_label(k))).collect();
    names.extend(outputs.iter().map(|o| format!("w_{o}")));
    names
}

fn default_outputs(field: &dyn TransitionField) -> Vec<String> {
    (0..field.output_count()).map(|k| format!("out{k}")).collect()
}

/// Point mass at least [`DOMAIN_EPSILON`] and no density below `-DOMAIN_EPSILON`.
fn mass_domain(field: Arc<dyn TransitionField>) -> DomainFn {
    Arc::new(move |_, y| {
        point_mass(field.as_ref(), y) >= DOMAIN_EPSILON && y[..field.type_count()].iter().all(|&v| v >= -DOMAIN_EPSILON)
    })
}

/// `y_j' = Σ_i p_i(x) y_i f_{j,i}(y)`.
pub fn chunky_rhs(p: SelectionFns, field: Arc<dyn TransitionField>) -> OdeSystem {
    let f2 = field.clone();
    let rhs: Rhs = Arc::new(move |x, y| {
        let weights = p(x);
        let mut out = vec![0.0; f2.dim()];
        for (i, &pi) in weights.iter().enumerate().take(f2.type_count()) {
            let c = pi * y[i];
            if c == 0.0 {
                continue;
            }
            for (o, fj) in out.iter_mut().zip(f2.eval(i, y)?) {
                *o += c * fj;
            }
        }
        Ok(out)
    });
    OdeSystem {
        names: field_names(field.as_ref(), &default_outputs(field.as_ref())),
        rhs,
        domain: mass_domain(field),
        events: Vec::new(),
    }
}

/// `y_j' = Σ_i w_i(x, y) f_{j,i}(y)` for relative selection weights `w`.
pub fn deprioritised_rhs(weights: RelativeWeights, field: Arc<dyn TransitionField>) -> OdeSystem {
    let f2 = field.clone();
    let rhs: Rhs = Arc::new(move |x, y| {
        let w = weights(x, y);
        let mut out = vec![0.0; f2.dim()];
        for (i, &wi) in w.iter().enumerate().take(f2.type_count()) {
            if wi == 0.0 {
                continue;
            }
            for (o, fj) in out.iter_mut().zip(f2.eval(i, y)?) {
                *o += wi * fj;
            }
        }
        Ok(out)
    });
    OdeSystem {
        names: field_names(field.as_ref(), &default_outputs(field.as_ref())),
        rhs,
        domain: mass_domain(field),
        events: Vec::new(),
    }
}

/// Weights of two operations that keep one coordinate constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mix {
    pub op1: f64,
    pub op2: f64,
    pub derivative: Vec<f64>,
}

/// Mixes the first operation (which consumes the held coordinate at rate
/// `β = -f1[held]`) with the second (which creates it at rate
/// `α = f2[held]`) so that the held coordinate has zero derivative.
pub fn deprioritised_mix(f1: &[f64], f2: &[f64], held: usize, epsilon: f64) -> Result<Mix, OdeError> {
    let alpha = f2[held];
    let beta = -f1[held];
    let sum = alpha + beta;
    if sum <= epsilon || !sum.is_finite() {
        return Err(OdeError::DegenerateMix { sum });
    }
    let (op1, op2) = (alpha / sum, beta / sum);
    let mut derivative: Vec<f64> = f1.iter().zip(f2).map(|(a, b)| op1 * a + op2 * b).collect();
    derivative[held] = 0.0;
    Ok(Mix { op1, op2, derivative })
}

/// Weights over `fs.len()` operations that hold every coordinate in `held`
/// constant and sum to 1; `None` if singular or some weight is negative.
pub fn holding_weights(fs: &[Vec<f64>], held: &[usize]) -> Option<Vec<f64>> {
    let w = solve_holding(fs, held)?;
    if w.iter().any(|&x| x < -1e-12) {
        return None;
    }
    Some(w.iter().map(|&x| x.max(0.0)).collect())
}

/// The linear solve behind [`holding_weights`], without the sign check.
fn solve_holding(fs: &[Vec<f64>], held: &[usize]) -> Option<Vec<f64>> {
    let k = fs.len();
    if held.len() + 1 != k {
        return None;
    }
    let a = DMatrix::from_fn(k, k, |row, col| if row < held.len() { fs[col][held[row]] } else { 1.0 });
    let mut b = DVector::zeros(k);
    b[k - 1] = 1.0;
    let w = a.lu().solve(&b)?;
    w.iter().all(|x| x.is_finite()).then(|| w.iter().copied().collect())
}

// ============================================================================
// RK4 integration
// ============================================================================

/// Why integration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    EndReached,
    /// The event with this index changed sign.
    Event(usize),
    /// The state reached the edge of the domain.
    LeftDomain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRoot {
    pub name: String,
    pub index: usize,
    pub x: f64,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub names: Vec<String>,
    pub xs: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    pub events: Vec<EventRoot>,
    pub termination: Termination,
}

impl Solution {
    pub fn last(&self) -> (f64, &[f64]) {
        (*self.xs.last().expect("non-empty"), self.ys.last().expect("non-empty"))
    }

    /// Linear interpolation at `x`, clamped to the sampled range.
    pub fn at(&self, x: f64) -> Vec<f64> {
        let i = self.xs.partition_point(|&v| v < x);
        if i == 0 {
            return self.ys[0].clone();
        }
        if i >= self.xs.len() {
            return self.ys.last().expect("non-empty").clone();
        }
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 1.0 };
        self.ys[i - 1].iter().zip(&self.ys[i]).map(|(a, b)| a + t * (b - a)).collect()
    }

    /// Writes `x, names...` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["x".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (x, y) in self.xs.iter().zip(&self.ys) {
            let mut row = vec![format!("{x}")];
            row.extend(y.iter().map(|v| format!("{v}")));
            w.write_record(&row)?;
        }
        w.flush()
    }

    /// The first event, or `NoEventInRange`.
    pub fn first_event(&self) -> Result<&EventRoot, OdeError> {
        self.events.first().ok_or(OdeError::NoEventInRange { x_end: self.last().0 })
    }
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// One classical RK4 step.
pub fn rk4_step(sys: &OdeSystem, x: f64, y: &[f64], h: f64) -> Result<Vec<f64>, OdeError> {
    let k1 = (sys.rhs)(x, y)?;
    let k2 = (sys.rhs)(x + h / 2.0, &axpy(y, h / 2.0, &k1))?;
    let k3 = (sys.rhs)(x + h / 2.0, &axpy(y, h / 2.0, &k2))?;
    let k4 = (sys.rhs)(x + h, &axpy(y, h, &k3))?;
    let out: Vec<f64> = (0..y.len()).map(|j| y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::LeftDomain { x: x + h });
    }
    Ok(out)
}

fn step_ok(sys: &OdeSystem, x: f64, y: &[f64], h: f64) -> Option<Vec<f64>> {
    let out = rk4_step(sys, x, y, h).ok()?;
    (sys.domain)(x + h, &out).then_some(out)
}

/// Integration controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rk4Options {
    pub h: f64,
    /// Keep every k-th grid point (the first and last are always kept).
    pub record_every: usize,
    /// Stop at the domain boundary (refined by bisection) instead of failing.
    pub stop_at_boundary: bool,
}

impl Default for Rk4Options {
    fn default() -> Self {
        Rk4Options { h: DEFAULT_STEP, record_every: 1, stop_at_boundary: false }
    }
}

/// Fixed-step RK4 from `x0` to `x_end`, stopping at the first event sign
/// change; fails with `LeftDomain` if the domain is left.
pub fn rk4_solve(sys: &OdeSystem, x0: f64, y0: &[f64], x_end: f64, h: f64) -> Result<Solution, OdeError> {
    rk4_integrate(sys, x0, y0, x_end, &Rk4Options { h, ..Rk4Options::default() })
}

/// As [`rk4_solve`] with explicit options.
pub fn rk4_integrate(sys: &OdeSystem, x0: f64, y0: &[f64], x_end: f64, opts: &Rk4Options) -> Result<Solution, OdeError> {
    if opts.h.is_nan() || opts.h <= 0.0 {
        return Err(OdeError::InvalidInput(format!("step {} must be positive", opts.h)));
    }
    if y0.len() != sys.dim() {
        return Err(OdeError::InvalidInput(format!("initial state has {} entries, need {}", y0.len(), sys.dim())));
    }
    if !(sys.domain)(x0, y0) {
        return Err(OdeError::LeftDomain { x: x0 });
    }
    let every = opts.record_every.max(1);
    let mut sol = Solution {
        names: sys.names.clone(),
        xs: vec![x0],
        ys: vec![y0.to_vec()],
        events: Vec::new(),
        termination: Termination::EndReached,
    };
    let sign = |v: f64| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 };
    let mut last_sign: Vec<i32> = sys.events.iter().map(|(_, e)| sign(e(x0, y0))).collect();
    let mut x = x0;
    let mut y = y0.to_vec();
    let mut count = 0usize;
    while x < x_end {
        let h = opts.h.min(x_end - x);
        let next = match step_ok(sys, x, &y, h) {
            Some(v) => v,
            None => {
                if !opts.stop_at_boundary {
                    return Err(OdeError::LeftDomain { x: x + h });
                }
                let (mut lo, mut hi) = (0.0, h);
                while hi - lo > EVENT_TOLERANCE {
                    let mid = 0.5 * (lo + hi);
                    if step_ok(sys, x, &y, mid).is_some() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if lo > 0.0 {
                    y = step_ok(sys, x, &y, lo).expect("checked");
                    x += lo;
                }
                sol.xs.push(x);
                sol.ys.push(y);
                sol.termination = Termination::LeftDomain;
                return Ok(sol);
            }
        };
        let x_next = if h == x_end - x { x_end } else { x + h };
        // Events: earliest sign change in this step wins.
        let mut fired: Option<(usize, f64, Vec<f64>)> = None;
        for (m, (name, e)) in sys.events.iter().enumerate() {
            let s_new = sign(e(x_next, &next));
            let changed = last_sign[m] != 0 && s_new != last_sign[m];
            if !changed {
                if s_new != 0 {
                    last_sign[m] = s_new;
                }
                continue;
            }
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > EVENT_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                let ym = rk4_step(sys, x, &y, mid)?;
                if sign(e(x + mid, &ym)) == last_sign[m] {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let theta = 0.5 * (lo + hi);
            let yr = rk4_step(sys, x, &y, theta)?;
            if fired.as_ref().is_none_or(|f| theta < f.1 - x) {
                let _ = name;
                fired = Some((m, x + theta, yr));
            }
        }
        if let Some((m, xr, yr)) = fired {
            sol.events.push(EventRoot { name: sys.events[m].0.clone(), index: m, x: xr, y: yr.clone() });
            sol.xs.push(xr);
            sol.ys.push(yr);
            sol.termination = Termination::Event(m);
            return Ok(sol);
        }
        x = x_next;
        y = next;
        count += 1;
        if count.is_multiple_of(every) || x >= x_end {
            sol.xs.push(x);
            sol.ys.push(y.clone());
        }
    }
    if *sol.xs.last().expect("non-empty") < x {
        sol.xs.push(x);
        sol.ys.push(y);
    }
    Ok(sol)
}

// ============================================================================
// The max-cut system and constants
// ============================================================================

/// The max-cut system over `(u, v, w, z)` with event `v = 0`.
pub fn cut_system() -> OdeSystem {
    let rhs: Rhs = Arc::new(|_, y| {
        let (u, v, w) = (y[0], y[1], y[2]);
        let s = 3.0 * u + 2.0 * v + w;
        let d = s * s + 6.0 * s * u + 12.0 * u * v;
        if d <= 0.0 {
            return Err(OdeError::OutsideDomain { mass: s, epsilon: 0.0 });
        }
        Ok(vec![
            -6.0 * u * (6.0 * u + s) / d,
            (36.0 * u * u - 12.0 * u * v - s * s - 4.0 * s * v) / d,
            2.0 * (-6.0 * u * w + 2.0 * s * v - s * w) / d,
            (6.0 * s * u + 24.0 * u * w + s * s + 4.0 * s * w + 36.0 * u * v) / d,
        ])
    });
    OdeSystem {
        names: ["u", "v", "w", "z"].map(String::from).to_vec(),
        rhs,
        domain: Arc::new(|_, y| {
            let s = 3.0 * y[0] + 2.0 * y[1] + y[2];
            s > 0.0 && s * s + 6.0 * s * y[0] + 12.0 * y[0] * y[1] > 0.0
        }),
        events: vec![("v".to_string(), Arc::new(|_, y| y[1]))],
    }
}

pub const CUT_INITIAL: [f64; 4] = [1.0, 0.0, 0.0, 0.0];

/// Values at the first positive root of `v`, and the resulting cut constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutConstants {
    pub x0: f64,
    pub u: f64,
    pub w: f64,
    pub z: f64,
    /// `z + 3u/2 + 3w/2`.
    pub c: f64,
}

pub fn cut_constants(h: f64) -> Result<CutConstants, OdeError> {
    let sol = rk4_integrate(&cut_system(), 0.0, &CUT_INITIAL, 5.0, &Rk4Options { h, record_every: usize::MAX, stop_at_boundary: false })?;
    let e = sol.first_event()?;
    let (u, w, z) = (e.y[0], e.y[2], e.y[3]);
    Ok(CutConstants { x0: e.x, u, w, z, c: z + 1.5 * u + 1.5 * w })
}

/// Relative selection weights over [`CUT_TYPES`] that hold the `10` and `02`
/// densities at zero.
pub fn cut_selection_weights(y: &[f64]) -> [f64; 6] {
    let (y00, y01, y11) = (y[0], y[2], y[4]);
    let s = 3.0 * y00 + 2.0 * y01 + y11;
    let d = s * s + 6.0 * s * y00 + 12.0 * y00 * y01;
    [0.0, 6.0 * s * y00 / d, (s * s - 12.0 * y00 * y01) / d, 0.0, 0.0, 24.0 * y00 * y01 / d]
}

/// `dy/dp` of the set size along the cubic path solution.
pub fn cubic_is_derivative(variant: IsVariant, p: f64) -> f64 {
    match variant {
        IsVariant::Base => 3.0 * (1.0 - p) * (2.0 * p * p + 3.0 * p + 1.0) / (2.0 * (p * p + 2.0 * p + 3.0)),
        IsVariant::Improved => {
            let num = 2.0 * p.powi(5) + 9.0 * p.powi(4) + 18.0 * p.powi(3) + 22.0 * p * p + 8.0 * p + 1.0;
            let den = p.powi(4) + 4.0 * p.powi(3) + 8.0 * p * p + 14.0 * p + 3.0;
            3.0 * (1.0 - p) * num / (2.0 * (1.0 + p) * den)
        }
    }
}

/// `3 + (3/2) ln 2 - (15/2) √2 arctan(√2/4)`.
pub fn cubic_is_base_closed_form() -> f64 {
    let r2 = std::f64::consts::SQRT_2;
    3.0 + 1.5 * std::f64::consts::LN_2 - 7.5 * r2 * (r2 / 4.0).atan()
}

/// Integral of [`cubic_is_derivative`] over `p ∈ [0, 1]` by RK4 quadrature.
pub fn cubic_is_constant(variant: IsVariant) -> f64 {
    let sys = OdeSystem {
        names: vec!["y".into()],
        rhs: Arc::new(move |p, _| Ok(vec![cubic_is_derivative(variant, p)])),
        domain: Arc::new(|_, _| true),
        events: Vec::new(),
    };
    let sol = rk4_integrate(&sys, 0.0, &[0.0], 1.0, &Rk4Options { h: 1e-3, record_every: usize::MAX, stop_at_boundary: false })
        .expect("quadrature of a bounded integrand");
    sol.last().1[0]
}

// ============================================================================
// Fluid limit of prioritised degree-greedy algorithms
// ============================================================================

/// Solution of the deprioritised system that mimics a min-degree
/// prioritised algorithm: in phase `k`, operations on degrees `0..=k` are
/// mixed so that every density below degree `k` stays at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidLimit {
    pub solution: Solution,
    /// `(x, k)` at the start of each phase.
    pub phases: Vec<(f64, u32)>,
    /// Output values at the end.
    pub outputs: Vec<f64>,
    /// Remaining vertex density at the end.
    pub remaining: f64,
    /// Mixing weights by degree over time.
    pub schedule: WeightSchedule,
}

/// Piecewise-constant relative selection weights: `weights[k]` applies on
/// `[xs[k], xs[k + 1])`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightSchedule {
    pub xs: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

impl WeightSchedule {
    pub fn push(&mut self, x: f64, w: Vec<f64>) {
        self.xs.push(x);
        self.weights.push(w);
    }

    /// The weights in force at `x`, or `None` past the last interval.
    pub fn at(&self, x: f64) -> Option<&[f64]> {
        match self.xs.partition_point(|&v| v <= x) {
            0 => self.weights.first().map(Vec::as_slice),
            k if k == self.xs.len() => None,
            k => Some(&self.weights[k - 1]),
        }
    }

    pub fn end(&self) -> f64 {
        self.xs.last().copied().unwrap_or(0.0)
    }
}

/// Fluid limit of a native min-degree algorithm whose operation on a vertex
/// of degree `i` is type `i` of `field` (neutral types `0..=r`), starting
/// from the all-degree-`r` state. Each RK4 step keeps the phase and its
/// weights fixed; integration stops when the point mass falls below
/// [`DOMAIN_EPSILON`], and remaining isolated vertices are then processed.
pub fn prioritised_fluid_limit(field: Arc<dyn TransitionField>, r: u32, h: f64, x_max: f64) -> Result<FluidLimit, OdeError> {
    let types = field.type_count();
    if types < r as usize + 1 || field.output_count() == 0 {
        return Err(OdeError::InvalidInput("field lacks degree types or outputs".into()));
    }
    if h.is_nan() || h <= 0.0 {
        return Err(OdeError::InvalidInput(format!("step {h} must be positive")));
    }
    let weights_for = |k: u32, y: &[f64]| -> Result<Option<Vec<f64>>, OdeError> {
        let fs: Vec<Vec<f64>> = (0..=k as usize).map(|i| field.eval(i, y)).collect::<Result<_, _>>()?;
        let held: Vec<usize> = (0..k as usize).collect();
        Ok(holding_weights(&fs, &held))
    };
    let rate = |w: &[f64], y: &[f64], coord: usize| -> Result<f64, OdeError> {
        let mut d = 0.0;
        for (i, &wi) in w.iter().enumerate() {
            if wi != 0.0 {
                d += wi * field.eval(i, y)?[coord];
            }
        }
        Ok(d)
    };
    let mut y = vec![0.0; field.dim()];
    y[r as usize] = 1.0;
    let mut x = 0.0;
    let mut k = r;
    let mut phases: Vec<(f64, u32)> = Vec::new();
    let mut schedule = WeightSchedule::default();
    let mut xs = vec![x];
    let mut ys = vec![y.clone()];
    let mut termination = Termination::EndReached;
    let domain = mass_domain(field.clone());
    'outer: while x < x_max {
        if !domain(x, &y) {
            termination = Termination::LeftDomain;
            break;
        }
        // Lowest-first: drop to a lower phase while the current one cannot
        // hold its low degrees at zero.
        let mut w = loop {
            match weights_for(k, &y)? {
                Some(w) => break w,
                None if k > 0 => k -= 1,
                None => {
                    termination = Termination::LeftDomain;
                    break 'outer;
                }
            }
        };
        // The top degree of the phase ran out: move up.
        while k < r && y[k as usize] <= 1e-12 && rate(&w, &y, k as usize)? < 0.0 {
            match weights_for(k + 1, &y)? {
                Some(w2) => {
                    k += 1;
                    w = w2;
                }
                None => break,
            }
        }
        if phases.last().is_none_or(|&(_, kk)| kk != k) {
            phases.push((x, k));
        }
        let mut padded = w.clone();
        padded.resize(r as usize + 1, 0.0);
        schedule.push(x, padded);
        let f2 = field.clone();
        let phase = k as usize;
        let sys = OdeSystem {
            names: Vec::new(),
            rhs: Arc::new(move |_, yy| {
                let fs: Vec<Vec<f64>> = (0..=phase).map(|i| f2.eval(i, yy)).collect::<Result<_, _>>()?;
                let held: Vec<usize> = (0..phase).collect();
                let w = solve_holding(&fs, &held).ok_or(OdeError::DegenerateMix { sum: 0.0 })?;
                let mut out = vec![0.0; f2.dim()];
                for (wi, f) in w.iter().zip(&fs) {
                    for (o, fj) in out.iter_mut().zip(f) {
                        *o += wi * fj;
                    }
                }
                Ok(out)
            }),
            domain: domain.clone(),
            events: Vec::new(),
        };
        let hh = h.min(x_max - x);
        if let Some(next) = step_ok(&sys, x, &y, hh) {
            x += hh;
            y = next;
        } else {
            let (mut lo, mut hi) = (0.0, hh);
            while hi - lo > EVENT_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                if step_ok(&sys, x, &y, mid).is_some() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if lo > 0.0 {
                y = step_ok(&sys, x, &y, lo).expect("checked");
                x += lo;
            }
            xs.push(x);
            ys.push(y.clone());
            termination = Termination::LeftDomain;
            break;
        }
        xs.push(x);
        ys.push(y.clone());
    }
    let mut outputs = y[types..].to_vec();
    for t in (0..types).filter(|&t| field.degree(t) == 0 && y[t] > 0.0) {
        let f = field.eval(t, &y)?;
        for (o, fo) in outputs.iter_mut().zip(&f[types..]) {
            *o += y[t] * fo;
        }
    }
    let remaining = y[..types].iter().sum();
    let names = field_names(field.as_ref(), &default_outputs(field.as_ref()));
    Ok(FluidLimit {
        solution: Solution { names, xs, ys, events: Vec::new(), termination },
        phases,
        outputs,
        remaining,
        schedule,
    })
}

/// The cubic independent-set path system over degrees 1, 2, 3 and the set
/// size: operations on degrees 1 and 2 mixed so the degree-1 density stays
/// at zero. Starts from the all-degree-3 state; the domain is
/// `y_3 >= DOMAIN_EPSILON` with `y_2 >= 0`.
pub fn cubic_is_system(variant: IsVariant) -> OdeSystem {
    let field = CubicIsField { variant };
    let rhs: Rhs = Arc::new(move |_, y| {
        let f1 = field.eval(0, y)?;
        let f2 = field.eval(1, y)?;
        Ok(deprioritised_mix(&f1, &f2, 0, 0.0)?.derivative)
    });
    OdeSystem {
        names: ["y1", "y2", "y3", "size"].map(String::from).to_vec(),
        rhs,
        domain: Arc::new(|_, y| y[2] >= DOMAIN_EPSILON && y[1] >= 0.0 && degree_two_share(y) < 1.0),
        events: Vec::new(),
    }
}

pub const CUBIC_IS_INITIAL: [f64; 4] = [0.0, 0.0, 1.0, 0.0];

/// Mixing weights of the cubic path system by degree `0..=3` (operations on
/// degrees 1 and 2), sampled along its solution with step `h`.
pub fn cubic_is_schedule(variant: IsVariant, h: f64) -> Result<WeightSchedule, OdeError> {
    let opts = Rk4Options { h, record_every: 1, stop_at_boundary: true };
    let sol = rk4_integrate(&cubic_is_system(variant), 0.0, &CUBIC_IS_INITIAL, 5.0, &opts)?;
    let field = CubicIsField { variant };
    let mut schedule = WeightSchedule::default();
    for (x, y) in sol.xs.iter().zip(&sol.ys) {
        let mix = deprioritised_mix(&field.eval(0, y)?, &field.eval(1, y)?, 0, 0.0)?;
        schedule.push(*x, vec![0.0, mix.op1, mix.op2, 0.0]);
    }
    Ok(schedule)
}

/// Generic field of a named algorithm with default parameters otherwise.
pub fn generic_field(name: &str, params: &AlgorithmParams) -> Result<GenericField, algorithms::AlgorithmError> {
    Ok(GenericField::new(algorithms::make_algorithm(name, params)?))
}

/// Type id of the neutral type of degree `d`, or of the max-cut pair type.
pub fn neutral_id(spec: &AlgorithmSpec, degree: u32) -> usize {
    spec.type_id(VertexType::new(Colour::NEUTRAL, degree))
}

// ============================================================================
// Generic-versus-hand checks
// ============================================================================

/// Largest degree-2 share sampled by [`derive_check`] for the path rules.
pub const DERIVE_CHECK_MAX_SHARE: f64 = 0.6;

/// Outcome of comparing the generic field with a hand-coded one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeriveCheck {
    pub algorithm: String,
    pub points: usize,
    /// Exploration cap used for the path rules.
    pub cap: Option<u32>,
    pub max_error: f64,
    /// Largest error minus its tolerance; non-positive when every point passes.
    pub worst_excess: f64,
    pub max_residual: f64,
    pub pass: bool,
}

/// Declared loss from capping a path exploration at `cap` vertices.
pub fn path_truncation_bound(cap: u32, p: f64) -> f64 {
    (cap + 1) as f64 * p.powi(cap as i32) / (1.0 - p)
}

/// Compares the generic field of `name` with its hand-coded field at
/// `points` random domain points. The tolerance at each point is `1e-10`
/// plus the enumeration residual plus, for the path rules, the truncation
/// bound of the exploration cap.
pub fn derive_check(name: &str, points: usize, seed: u64, cap: u32) -> Result<DeriveCheck, OdeError> {
    use rand::Rng as _;
    let params = AlgorithmParams { d: cap, ..AlgorithmParams::default() };
    let spec = algorithms::make_algorithm(name, &params).map_err(|e| OdeError::InvalidInput(e.to_string()))?;
    let generic = GenericField::new(spec.clone());
    let mut rng = crate::pairing::Rng::new(seed);
    let mut report = DeriveCheck {
        algorithm: name.to_string(),
        points,
        cap: name.starts_with("cubic_is_path").then_some(cap),
        max_error: 0.0,
        worst_excess: f64::NEG_INFINITY,
        max_residual: 0.0,
        pass: true,
    };
    let mut record = |err: f64, tol: f64, residual: f64| {
        report.max_error = report.max_error.max(err);
        report.worst_excess = report.worst_excess.max(err - tol);
        report.max_residual = report.max_residual.max(residual);
    };
    match name {
        "cubic_maxcut" => {
            let palette = algorithms::PairPalette::new(3);
            let ids: Vec<usize> = CUT_TYPES
                .iter()
                .map(|&(r, b)| spec.type_id(VertexType::new(palette.colour(r, b), 3 - r - b)))
                .collect();
            for _ in 0..points {
                let mut y: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
                y.push(0.0);
                let mut g = vec![0.0; spec.type_count()];
                for (k, &id) in ids.iter().enumerate() {
                    g[id] = y[k];
                }
                for (i, &id) in ids.iter().enumerate() {
                    let hand = CutField.eval(i, &y)?;
                    let e = generic.evaluate(id, &g)?;
                    let err = ids
                        .iter()
                        .enumerate()
                        .map(|(k, &idk)| (hand[k] - e.f[idk]).abs())
                        .chain([(hand[6] - e.f[spec.type_count()]).abs()])
                        .fold(0.0, f64::max);
                    record(err, 1e-10 + e.residual, e.residual);
                }
            }
        }
        "cubic_is_path" | "cubic_is_path_improved" => {
            let variant = if name == "cubic_is_path" { IsVariant::Base } else { IsVariant::Improved };
            let hand = CubicIsField { variant };
            let mut done = 0;
            while done < points {
                let y3 = rng.gen_range(0.05..1.0);
                let y2 = rng.gen_range(0.0..1.0 - y3);
                let y = [0.0, y2, y3, 0.0];
                let p = degree_two_share(&y);
                if p > DERIVE_CHECK_MAX_SHARE {
                    continue;
                }
                done += 1;
                let mut g = vec![0.0; spec.type_count()];
                g[neutral_id(&spec, 2)] = y2;
                g[neutral_id(&spec, 3)] = y3;
                for i in 0..2 {
                    let h = hand.eval(i, &y)?;
                    let e = generic.evaluate(neutral_id(&spec, i as u32 + 1), &g)?;
                    let err = (0..3)
                        .map(|k| (h[k] - e.f[neutral_id(&spec, k as u32 + 1)]).abs())
                        .chain([(h[3] - e.f[spec.type_count()]).abs()])
                        .fold(0.0, f64::max);
                    record(err, 1e-10 + e.residual + path_truncation_bound(cap, p), e.residual);
                }
            }
        }
        other => return Err(OdeError::InvalidInput(format!("no hand-coded field for {other}"))),
    }
    report.pass = report.worst_excess <= 0.0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_spec(name: &str) -> AlgorithmSpec {
        algorithms::make_algorithm(name, &AlgorithmParams::default()).unwrap()
    }

    #[test]
    fn min_degree_is_on_all_degree_three() {
        let field = GenericField::new(is_spec("min_degree_is"));
        let mut y = vec![0.0; field.type_count()];
        y[3] = 1.0;
        let f = field.eval(3, &y).unwrap();
        assert_eq!(&f[1..4], &[0.0, 6.0, -10.0]);
        assert_eq!(f[field.type_count()], 1.0);
    }

    #[test]
    fn outside_domain_is_reported() {
        let field = GenericField::new(is_spec("min_degree_is"));
        let y = vec![0.0; field.type_count()];
        assert!(matches!(field.eval(3, &y), Err(OdeError::OutsideDomain { .. })));
        // A degree-0 root needs no draws.
        assert_eq!(field.eval(0, &y).unwrap()[field.type_count()], 1.0);
    }

    #[test]
    fn mix_examples() {
        let m = deprioritised_mix(&[-1.0, 0.3], &[1.0, 0.7], 0, 1e-12).unwrap();
        assert_eq!((m.op1, m.op2), (0.5, 0.5));
        let m = deprioritised_mix(&[-2.0, 1.0], &[0.0, 3.0], 0, 1e-12).unwrap();
        assert_eq!((m.op1, m.op2), (0.0, 1.0));
        assert_eq!(m.derivative[0], 0.0);
        assert!(matches!(deprioritised_mix(&[0.0], &[0.0], 0, 1e-12), Err(OdeError::DegenerateMix { .. })));
    }

    #[test]
    fn exponential_benchmark() {
        let sys = OdeSystem {
            names: vec!["y".into()],
            rhs: Arc::new(|_, y| Ok(vec![y[0]])),
            domain: Arc::new(|_, _| true),
            events: Vec::new(),
        };
        let e = std::f64::consts::E;
        let err = |h: f64| (rk4_solve(&sys, 0.0, &[1.0], 1.0, h).unwrap().last().1[0] - e).abs();
        assert!(err(1e-3) < 1e-9);
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn cut_system_initial_derivative() {
        let d = (cut_system().rhs)(0.0, &CUT_INITIAL).unwrap();
        let want = [-2.0, 1.0, 0.0, 1.0];
        for (a, b) in d.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn events_and_domain_errors() {
        let sys = OdeSystem {
            names: vec!["y".into()],
            rhs: Arc::new(|_, _| Ok(vec![-1.0])),
            domain: Arc::new(|_, y| y[0] > -0.5),
            events: vec![("zero".into(), Arc::new(|_, y| y[0] - 0.25))],
        };
        let sol = rk4_solve(&sys, 0.0, &[1.0], 2.0, 0.01).unwrap();
        let e = sol.first_event().unwrap();
        assert!((e.x - 0.75).abs() < 1e-11);
        let mut quiet = sys.clone();
        quiet.events.clear();
        assert!(matches!(rk4_solve(&quiet, 0.0, &[1.0], 2.0, 0.01), Err(OdeError::LeftDomain { .. })));
        let opts = Rk4Options { h: 0.01, record_every: 1, stop_at_boundary: true };
        let sol = rk4_integrate(&quiet, 0.0, &[1.0], 2.0, &opts).unwrap();
        assert_eq!(sol.termination, Termination::LeftDomain);
        assert!((sol.last().0 - 1.5).abs() < 1e-9);
        assert!(matches!(sol.first_event(), Err(OdeError::NoEventInRange { .. })));
    }

    #[test]
    fn euler_trivial_cases() {
        let field: Arc<dyn TransitionField> = Arc::new(CutField);
        let z0 = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let zero: StepProbs = Arc::new(|_| vec![0.0; 6]);
        let zs = euler_recurrence(&zero, field.as_ref(), &z0, 5).unwrap();
        assert!(zs.iter().all(|z| z == &z0.to_vec()));
        let p = 0.1;
        let one: StepProbs = Arc::new(move |_| vec![p, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let zs = euler_recurrence(&one, field.as_ref(), &z0, 1).unwrap();
        let f = field.eval(0, &z0).unwrap();
        for j in 0..7 {
            assert_eq!(zs[1][j], z0[j] + p * z0[0] * f[j]);
        }
    }

    #[test]
    fn holding_weights_solve_small_system() {
        let fs = vec![vec![-1.0, 0.0], vec![1.0, 5.0]];
        assert_eq!(holding_weights(&fs, &[0]), Some(vec![0.5, 0.5]));
        let fs = vec![vec![1.0, 0.0], vec![1.0, 5.0]];
        assert_eq!(holding_weights(&fs, &[0]), None);
    }

    #[test]
    fn cut_constants_match_known_values() {
        let c = cut_constants(1e-4).unwrap();
        assert!((c.x0 - 0.8274171475).abs() < 1e-6, "{c:?}");
        assert!((c.c - 1.330209040).abs() < 1e-6, "{c:?}");
        assert!((c.u - 0.00279).abs() < 5e-5 && (c.w - 0.0511).abs() < 5e-4, "{c:?}");
    }

    #[test]
    fn cubic_constants() {
        let base = cubic_is_constant(IsVariant::Base);
        assert!((base - cubic_is_base_closed_form()).abs() < 1e-9);
        assert!((base - 0.43520602).abs() < 1e-7);
        let improved = cubic_is_constant(IsVariant::Improved);
        assert!((improved - 0.43757463).abs() < 1e-7, "{improved}");
    }

    /// Rebuilds dy/dp from the hand operations and the mix, at states on the
    /// curve `y_3 = (1-p)^3`, `s = 3(1-p)^2`.
    fn derivative_from_field(variant: IsVariant, p: f64) -> f64 {
        let y = [0.0, 1.5 * p * (1.0 - p).powi(2), (1.0 - p).powi(3), 0.0];
        let d = (cubic_is_system(variant).rhs)(0.0, &y).unwrap();
        let s = 2.0 * y[1] + 3.0 * y[2];
        let ds = 2.0 * d[1] + 3.0 * d[2];
        let dp = 2.0 * d[1] / s - ds * p / s;
        d[3] / dp
    }

    #[test]
    fn size_derivative_follows_from_the_operations() {
        for variant in [IsVariant::Base, IsVariant::Improved] {
            for k in 0..20 {
                let p = 0.01 + 0.049 * k as f64;
                let (a, b) = (derivative_from_field(variant, p), cubic_is_derivative(variant, p));
                assert!((a - b).abs() < 1e-12, "{variant:?} p={p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn cubic_system_identities() {
        let opts = Rk4Options { h: 1e-5, record_every: 10, stop_at_boundary: true };
        let sol = rk4_integrate(&cubic_is_system(IsVariant::Base), 0.0, &CUBIC_IS_INITIAL, 5.0, &opts).unwrap();
        assert_eq!(sol.termination, Termination::LeftDomain);
        for y in &sol.ys {
            let p = degree_two_share(y);
            let s = 2.0 * y[1] + 3.0 * y[2];
            assert!((s - 3.0 * (1.0 - p).powi(2)).abs() < 1e-6);
            assert!((y[2] - (1.0 - p).powi(3)).abs() < 1e-6);
        }
        assert!((sol.last().1[3] - 0.43520602).abs() < 1e-3);
    }

    fn random_cut_state(rng: &mut crate::pairing::Rng) -> Vec<f64> {
        use rand::Rng as _;
        let mut y: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
        y.push(0.0);
        y
    }

    #[test]
    fn generic_maxcut_matches_hand_field() {
        let spec = is_spec("cubic_maxcut");
        let palette = algorithms::PairPalette::new(3);
        let generic = GenericField::new(spec.clone());
        let mut rng = crate::pairing::Rng::new(11);
        for _ in 0..20 {
            let y = random_cut_state(&mut rng);
            let mut g = vec![0.0; spec.type_count()];
            let ids: Vec<usize> = CUT_TYPES
                .iter()
                .map(|&(r, b)| spec.type_id(VertexType::new(palette.colour(r, b), 3 - r - b)))
                .collect();
            for (k, &id) in ids.iter().enumerate() {
                g[id] = y[k];
            }
            for (i, &id) in ids.iter().enumerate() {
                let hand = CutField.eval(i, &y).unwrap();
                let gen = generic.eval(id, &g).unwrap();
                for (k, &idk) in ids.iter().enumerate() {
                    assert!((hand[k] - gen[idk]).abs() < 1e-10, "op {i} coord {k}: {} vs {}", hand[k], gen[idk]);
                }
                assert!((hand[6] - gen[spec.type_count()]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn generic_path_matches_hand_field() {
        use rand::Rng as _;
        let mut rng = crate::pairing::Rng::new(12);
        for (name, variant) in [("cubic_is_path", IsVariant::Base), ("cubic_is_path_improved", IsVariant::Improved)] {
            let spec = is_spec(name);
            let generic = GenericField::new(spec.clone());
            let hand = CubicIsField { variant };
            for _ in 0..5 {
                let (y2, y3) = (rng.gen_range(0.0..0.3), rng.gen_range(0.2..1.0));
                let y = [0.0, y2, y3, 0.0];
                let mut g = vec![0.0; spec.type_count()];
                g[2] = y2;
                g[3] = y3;
                let p = degree_two_share(&y);
                let trunc = 1e-10 + 100.0 * p.powi(spec.depth as i32 / 2);
                for i in 0..2 {
                    let e = generic.evaluate(i + 1, &g).unwrap();
                    let h = hand.eval(i, &y).unwrap();
                    for k in 0..3 {
                        assert!((h[k] - e.f[k + 1]).abs() < trunc, "{name} op {i} coord {k}: {} vs {}", h[k], e.f[k + 1]);
                    }
                    assert!((h[3] - e.f[spec.type_count()]).abs() < trunc);
                }
            }
        }
    }

    #[test]
    fn min_degree_fluid_limit_on_cubic() {
        let field: Arc<dyn TransitionField> = Arc::new(GenericField::new(is_spec("min_degree_is")));
        let fl = prioritised_fluid_limit(field, 3, 1e-3, 10.0).unwrap();
        let want = 6.0 * 1.5f64.ln() - 2.0;
        assert!((fl.outputs[0] - want).abs() < 1e-4, "{} vs {want}", fl.outputs[0]);
    }
}
