//! Concrete algorithms built on the framework, plus output repair and
//! validation.
//!
//! Independent-set style rules share one recolouring pattern: a set of
//! query-graph nodes goes into the output, the other nodes are deleted, the
//! known neighbours of output nodes are absorbed (deleted), and every other
//! known neighbour merely loses its exposed edge.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::graph_core::{Colour, ColouredGraph, OutputColour, VertexId, VertexState, VertexType};
use crate::lda::{
    Action, AlgorithmSpec, ClashMask, Elem, Fate, QueryGraph, Recolouring, Rules, StopPredicate,
    SurvivalGraph, Target, TieBreak,
};
use crate::pairing::Rng;

pub const ALGORITHM_NAMES: [&str; 8] = [
    "min_degree_is",
    "min_degree_dom",
    "dz_is",
    "cubic_is_path",
    "cubic_is_path_improved",
    "cubic_maxcut",
    "bisection",
    "induced_forest",
];

/// Output colour of the set of interest in native algorithms.
pub const IN_SET: OutputColour = OutputColour(1);
/// Output colour of the other deleted vertices in native algorithms.
pub const DELETED: OutputColour = OutputColour(2);
pub const RED: OutputColour = OutputColour(1);
pub const BLUE: OutputColour = OutputColour(2);
/// Transient colour of forest candidates (one neighbour in the forest).
pub const FOREST_BLUE: Colour = Colour(2);
pub const PURPLE: OutputColour = OutputColour(1);
pub const YELLOW: OutputColour = OutputColour(2);

pub const DEFAULT_PATH_CAP: u32 = 50;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgorithmError {
    #[error("unknown algorithm {0:?}")]
    UnknownName(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Min,
    Max,
}

/// Parameters accepted by [`make_algorithm`], deserializable from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmParams {
    /// Degree bound.
    pub r: u32,
    /// Exploration cap for the path rules.
    pub d: u32,
    /// Bisection objective.
    pub objective: Objective,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        AlgorithmParams { r: 3, d: DEFAULT_PATH_CAP, objective: Objective::Min }
    }
}

/// What kind of object an algorithm produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    IndependentSet,
    IndependentDominatingSet,
    InducedForest,
    Cut,
    Bisection,
}

pub fn problem_kind(name: &str) -> Result<ProblemKind, AlgorithmError> {
    Ok(match name {
        "min_degree_is" | "dz_is" | "cubic_is_path" | "cubic_is_path_improved" => ProblemKind::IndependentSet,
        "min_degree_dom" => ProblemKind::IndependentDominatingSet,
        "induced_forest" => ProblemKind::InducedForest,
        "cubic_maxcut" => ProblemKind::Cut,
        "bisection" => ProblemKind::Bisection,
        other => return Err(AlgorithmError::UnknownName(other.to_string())),
    })
}

/// Builds the named algorithm.
pub fn make_algorithm(name: &str, params: &AlgorithmParams) -> Result<AlgorithmSpec, AlgorithmError> {
    let r = params.r;
    if r == 0 {
        return Err(AlgorithmError::BadParams("r must be positive".into()));
    }
    let cubic_only = |what: &str| {
        if r != 3 {
            Err(AlgorithmError::BadParams(format!("{what} is defined for r = 3, got r = {r}")))
        } else {
            Ok(())
        }
    };
    let native = |name: &str, depth: u32, rules: Arc<dyn Rules>, out: &str| AlgorithmSpec {
        name: name.to_string(),
        r,
        depth,
        transient_colours: 2,
        output_colours: 3,
        output_names: vec![out.to_string()],
        tie_break: TieBreak::Vertex,
        rules,
    };
    let spec = match name {
        "min_degree_is" => native(name, 1, Arc::new(MinDegreeIs), "size"),
        "min_degree_dom" => native(name, 2, Arc::new(MinDegreeDom), "size"),
        "dz_is" => {
            if r < 3 {
                return Err(AlgorithmError::BadParams(format!("dz_is needs r >= 3, got {r}")));
            }
            native(name, 2, Arc::new(DzIs { r }), "size")
        }
        "cubic_is_path" => {
            cubic_only(name)?;
            if params.d == 0 {
                return Err(AlgorithmError::BadParams("path cap d must be positive".into()));
            }
            native(name, params.d + 1, Arc::new(CubicPath { cap: params.d }), "size")
        }
        "cubic_is_path_improved" => {
            cubic_only(name)?;
            if params.d < 2 {
                return Err(AlgorithmError::BadParams("path cap d must be at least 2".into()));
            }
            native(name, 2 * params.d + 2, Arc::new(CubicPathImproved { cap: params.d }), "size")
        }
        "cubic_maxcut" => {
            cubic_only(name)?;
            let palette = PairPalette::new(3);
            AlgorithmSpec {
                name: name.to_string(),
                r,
                depth: 1,
                transient_colours: palette.len(),
                output_colours: 3,
                output_names: vec!["cut".into()],
                tie_break: TieBreak::Vertex,
                rules: Arc::new(CubicMaxcut { palette }),
            }
        }
        "bisection" => {
            let palette = PairPalette::new(r);
            AlgorithmSpec {
                name: name.to_string(),
                r,
                depth: 1,
                transient_colours: palette.len(),
                output_colours: 3,
                output_names: vec!["red".into(), "blue".into(), "cut".into()],
                tie_break: TieBreak::Type,
                rules: Arc::new(Bisection { r, palette, objective: params.objective }),
            }
        }
        "induced_forest" => AlgorithmSpec {
            name: name.to_string(),
            r,
            depth: 1,
            transient_colours: 3,
            output_colours: 3,
            output_names: vec!["forest".into()],
            tie_break: TieBreak::Vertex,
            rules: Arc::new(InducedForest),
        },
        other => return Err(AlgorithmError::UnknownName(other.to_string())),
    };
    Ok(spec)
}

/// Machine-readable description of every algorithm and its parameters.
pub fn registry() -> serde_json::Value {
    let entries: Vec<_> = ALGORITHM_NAMES
        .iter()
        .map(|&name| {
            let (params, summary) = match name {
                "min_degree_is" => (json!({"r": "degree bound, default 3"}), "select a minimum-degree vertex, add it to the set, delete its closed neighbourhood"),
                "min_degree_dom" => (json!({"r": "degree bound, default 3"}), "select a minimum-degree vertex v, add a maximum-degree neighbour w to the set, delete w's closed neighbourhood"),
                "dz_is" => (json!({"r": "degree bound >= 3, default 3"}), "minimum-degree independent set with the neighbour-swap exception rules"),
                "cubic_is_path" => (json!({"d": "path exploration cap, default 50"}), "cubic independent set exploring one direction along degree-2 paths"),
                "cubic_is_path_improved" => (json!({"d": "exploration cap per path, default 50"}), "cubic independent set exploring the whole degree-2 path and the path beyond its end"),
                "cubic_maxcut" => (json!({}), "colour a vertex opposite to the majority of its coloured neighbours"),
                "bisection" => (json!({"r": "degree bound, default 3", "objective": "min | max, default min"}), "symmetric-type colouring for small or large bisections"),
                "induced_forest" => (json!({"r": "degree bound, default 3"}), "grow an induced forest from neutral and single-attachment vertices"),
                _ => unreachable!(),
            };
            json!({"name": name, "params": params, "summary": summary,
                   "kind": format!("{:?}", problem_kind(name).expect("known name"))})
        })
        .collect();
    json!({ "algorithms": entries })
}

// ============================================================================
// Shared rule pieces
// ============================================================================

fn query_diamond(node: usize) -> Vec<(Action, f64)> {
    vec![(Action::Query { node, target: Target::Diamond }, 1.0)]
}

fn stop() -> Vec<(Action, f64)> {
    vec![(Action::Stop, 1.0)]
}

/// Query every unexplored neighbour of the root, then stop.
fn explore_root(q: &QueryGraph) -> Vec<(Action, f64)> {
    if q.diamonds(0) > 0 {
        query_diamond(0)
    } else {
        stop()
    }
}

/// Merges equal actions of a distribution.
fn merged(items: Vec<(Action, f64)>) -> Vec<(Action, f64)> {
    let mut out: Vec<(Action, f64)> = Vec::new();
    for (a, p) in items {
        match out.iter_mut().find(|(b, _)| *b == a) {
            Some(slot) => slot.1 += p,
            None => out.push((a, p)),
        }
    }
    out
}

/// The independent-set recolouring: `in_set` nodes are output, other nodes
/// deleted, known neighbours of output nodes absorbed, the rest kept.
fn set_recolouring(q: &QueryGraph, in_set: &[bool]) -> Recolouring {
    debug_assert!(q.nodes.iter().all(|n| !n.ell.contains(&Elem::Diamond)), "nodes must be explored");
    debug_assert!(
        q.nodes.iter().enumerate().all(|(i, n)| !(in_set[i] && n.parent.is_some_and(|p| in_set[p]))),
        "adjacent nodes both in the set"
    );
    let mut rec = Recolouring::keep_all(q);
    for (i, node) in q.nodes.iter().enumerate() {
        rec.nodes[i] = Fate::Output(if in_set[i] { IN_SET } else { DELETED });
        if in_set[i] {
            for (k, e) in node.ell.iter().enumerate() {
                if matches!(e, Elem::Known(_)) {
                    rec.ell[i][k] = Fate::Output(DELETED);
                }
            }
        }
    }
    rec
}

/// Counts non-clash nodes and absorbed neighbours given `colour`.
fn count_output(rec: &Recolouring, clash: &ClashMask, colour: OutputColour) -> f64 {
    let nodes = rec
        .nodes
        .iter()
        .zip(&clash.nodes)
        .filter(|(f, c)| **f == Fate::Output(colour) && !**c)
        .count();
    let ell = rec
        .ell
        .iter()
        .zip(&clash.ell)
        .flat_map(|(fs, cs)| fs.iter().zip(cs))
        .filter(|(f, c)| **f == Fate::Output(colour) && !**c)
        .count();
    (nodes + ell) as f64
}

fn degree_rank(ty: VertexType) -> Option<u32> {
    (ty.colour == Colour::NEUTRAL).then_some(ty.degree)
}

// ============================================================================
// Native independent set and dominating set
// ============================================================================

/// Minimum-degree greedy independent set.
pub struct MinDegreeIs;

impl Rules for MinDegreeIs {
    fn explore(&self, q: &QueryGraph) -> Vec<(Action, f64)> {
        explore_root(q)
    }

    fn recolour(&self, q: &QueryGraph) -> Vec<(Recolouring, f64)> {
        vec![(set_recolouring(q, &[true]), 1.0)]
    }

    fn outputs(&self, _q: &QueryGraph, rec: &Recolouring, clash: &ClashMask, acc: &mut [f64]) {
        acc[0] += count_output(rec, clash, IN_SET);
    }

    fn rank(&self, ty: VertexType) -> Option<u32> {
        degree_rank(ty)
    }
}

/// Minimum-degree greedy independent dominating set: a root of degree 0 joins
/// the set, otherwise a maximum-degree neighbour does.
pub struct MinDegreeDom;

impl Rules for MinDegreeDom {
    fn explore(&self, q: &QueryGraph) -> Vec<(Action, f64)> {
        if q.diamonds(0) > 0 {
            return query_diamond(0);
        }
        if q.len() == 1 {
            let candidates: Vec<VertexType> = q.known(0).filter(|t| t.colour != Colour::BLOCKED).collect();
            let Some(best) = candidates.iter().map(|t| t.degree).max() else { return stop() };
            let top: Vec<VertexType> = candidates.into_iter().filter(|t| t.degree == best).collect();
            let w = 1.0 / top.len() as f64;
            return merged(
                top.into_iter()
                    .map(|t| (Action::Query { node: 0, target: Target::Type(t) }, w))
                    .collect(),
            );
        }
        if q.diamonds(1) > 0 {
            query_diamond(1)
        } else {
            stop()
        }
    }

    fn recolour(&self, q: &QueryGraph) -> Vec<(Recolouring, f64)> {
        if q.len() == 1 {
            let mut rec = Recolouring::keep_all(q);
            rec.nodes[0] = Fate::Output(IN_SET);
            return vec![(rec, 1.0)];
        }
        vec![(set_recolouring(q, &[false, true]), 1.0)]
    }

    fn outputs(&self, _q: &QueryGraph, rec: &Recolouring, clash: &ClashMask, acc: &mut [f64]) {
        acc[0] += count_output(rec, clash, IN_SET);
    }

    fn rank(&self, ty: VertexType) -> Option<u32> {
        degree_rank(ty)
    }
}

/// Minimum-degree independent set that may insert a neighbour `u` of the
/// selected vertex `v` instead of `v` itself.
pub struct DzIs {
    pub r: u32,
}

impl DzIs {
    fn min_degree(types: impl Iterator<Item = VertexType>) -> Option<u32> {
        types.filter(|t| t.colour != Colour::BLOCKED).map(|t| t.degree).min()
    }

    /// Whether the neighbour exception may apply, before looking at `u`'s
    /// neighbourhood; returns the candidate degree.
    fn candidate(&self, q: &QueryGraph) -> Option<u32> {
        let i = q.root().ty.degree;
        let j = DzIs::min_degree(q.known(0))?;
        if j > i {
            return None;
        }
        let count = q.known(0).filter(|t| t.colour != Colour::BLOCKED && t.degree == j).count();
        let two_a = i == 2;
        let two_b = 2 < i && i + 1 < self.r;
        (count >= 2 || two_a || two_b).then_some(j)
    }

    /// Whether `u` (node 1) is inserted instead of the root.
    fn insert_neighbour(&self, q: &QueryGraph) -> bool {
        let i = q.root().ty.degree;
        let j = q.nodes[1].ty.degree;
        let same_degree = q.known(0).filter(|t| t.colour != Colour::BLOCKED && t.degree == j).count();
        if same_degree >= 1 {
            // The root still has another neighbour of degree j.
            return true;
        }
        let nu: Vec<u32> = q.known(1).map(|t| t.degree).collect();
        let nv: Vec<u32> = q.known(0).map(|t| t.degree).collect();
        let min = |xs: &[u32]| xs.iter().copied().min().unwrap_or(u32::MAX);
        let sum = |xs: &[u32]| xs.iter().sum::<u32>();
        // Insert `u` when its other neighbours have larger minimum degree
        // than the root's other neighbours.
        if i == 2 {
            min(&nu) > min(&nv)
        } else if 2 < i && i + 1 < self.r {
            min(&nu) > i && sum(&nu) < sum(&nv)
        } else {
            false
        }
    }
}

impl Rules for DzIs {
    fn explore(&self, q: &QueryGraph) -> Vec<(Action, f64)> {
        if q.diamonds(0) > 0 {
            return query_diamond(0);
        }
        if q.len() == 1 {
            let Some(j) = self.candidate(q) else { return stop() };
            let types: Vec<VertexType> =
                q.known(0).filter(|t| t.colour != Colour::BLOCKED && t.degree == j).collect();
            let w = 1.0 / types.len() as f64;
            return merged(
                types
                    .into_iter()
                    .map(|t| (Action::Query { node: 0, target: Target::Type(t) }, w))
                    .collect(),
            );
        }
        if q.diamonds(1) > 0 {
            query_diamond(1)
        } else {
            stop()
        }
    }

    fn recolour(&self, q: &QueryGraph) -> Vec<(Recolouring, f64)> {
        if q.len() == 1 {
            return vec![(set_recolouring(q, &[true]), 1.0)];
        }
        let u_in = self.insert_neighbour(q);
        vec![(set_recolouring(q, &[!u_in, u_in]), 1.0)]
    }

    fn outputs(&self, _q: &QueryGraph, rec: &Recolouring, clash: &ClashMask, acc: &mut [f64]) {
        acc[0] += count_output(rec, clash, IN_SET);
    }

    fn rank(&self, ty: VertexType) -> Option<u32> {
        degree_rank(ty)
    }
}

// ============================================================================
// Cubic independent sets along degree-2 paths
// ============================================================================

fn is_path_type(t: VertexType) -> bool {
    t.colour == Colour::NEUTRAL && t.degree == 2
}

/// Cubic independent set: a degree-2 root explores a path of degree-2
/// vertices in a random direction, then inserts the last path vertex and
/// every second vertex back towards the root.
pub struct CubicPath {
    pub cap: u32,
}

impl Rules for CubicPath {
    fn explore(&self, q: &QueryGraph) -> Vec<(Action, f64)> {
        if q.diamonds(0) > 0 {
            return query_diamond(0);
        }
        if q.root().ty.degree != 2 {
            return stop();
        }
        if q.len() == 1 {
            let ends: Vec<VertexType> = q.known(0).collect();
            if ends.is_empty() {
                return stop();
            }
            let w = 1.0 / ends.len() as f64;
            return merged(
                ends.into_iter()
                    .map(|t| {
                        let a = if is_path_type(t) {
                            Action::Query { node: 0, target: Target::Type(t) }
                        } else {
                            Action::Stop
                        };
                        (a, w)
                    })
                    .collect(),
            );
        }
        let last = q.len() - 1;
        if q.diamonds(last) > 0 {
            return query_diamond(last);
        }
        match q.known(last).next() {
            Some(t) if is_path_type(t) && (last as u32) < self.cap => {
                vec![(Action::Query { node: last, target: Target::Type(t) }, 1.0)]
            }
            _ => stop(),
        }
    }

    fn recolour(&self, q: &QueryGraph) -> Vec<(Recolouring, f64)> {
        if q.root().ty.degree != 2 {
            return vec![(set_recolouring(q, &vec![true; q.len()]), 1.0)];
        }
        let x = q.len() - 1;
        let in_set: Vec<bool> = (0..q.len()).map(|k| (x - k).is_multiple_of(2)).collect();
        vec![(set_recolouring(q, &in_set), 1.0)]
    }

    fn outputs(&self, _q: &QueryGraph, rec: &Recolouring, clash: &ClashMask, acc: &mut [f64]) {
        acc[0] += count_output(rec, clash, IN_SET);
    }

    fn rank(&self, ty: VertexType) -> Option<u32> {
        degree_rank(ty)
    }
}

/// Structure recovered from an improved-path query graph.
#[derive(Debug, Default)]
struct PathParse {
    side_a: Vec<usize>,
    side_b: Vec<usize>,
    /// The node beyond one end of the path, and whether it hangs off side A.
    far: Option<(usize, bool)>,
    chain_c: Vec<usize>,
    chain_d: Vec<usize>,
}

type Pending = Vec<(Action, f64)>;

/// Cubic independent set exploring the whole degree-2 path through the root
/// and, when that path has even length, the path through the vertex beyond
/// one of its ends.
pub struct CubicPathImproved {
    pub cap: u32,
}

impl CubicPathImproved {
    /// Follows a chain of degree-2 nodes hanging off `from`, consuming node
    /// indices in exploration order.
    fn walk(&self, q: &QueryGraph, from: usize, next: &mut usize, count: &mut u32) -> Result<Vec<usize>, Pending> {
        let mut chain = Vec::new();
        let mut cur = from;
        loop {
            if *next < q.len()
                && q.nodes[*next].parent == Some(cur)
                && is_path_type(q.nodes[*next].ty)
                && *count < self.cap
            {
                chain.push(*next);
                cur = *next;
                *next += 1;
                *count += 1;
                continue;
            }
            if q.diamonds(cur) > 0 {
                return Err(query_diamond(cur));
            }
            let child_pending = *next < q.len() && q.nodes[*next].parent == Some(cur);
            if !child_pending && *count < self.cap {
                if let Some(t) = q.known(cur).find(|&t| is_path_type(t)) {
                    return Err(vec![(Action::Query { node: cur, target: Target::Type(t) }, 1.0)]);
                }
            }
            return Ok(chain);
        }
    }

    fn parse(&self, q: &QueryGraph) -> Result<PathParse, Pending> {
        if q.diamonds(0) > 0 {
            return Err(query_diamond(0));
        }
        let mut out = PathParse::default();
        if q.root().ty.degree != 2 {
            return Ok(out);
        }
        let mut next = 1;
        let mut count = 1;
        out.side_a = self.walk(q, 0, &mut next, &mut count)?;
        out.side_b = self.walk(q, 0, &mut next, &mut count)?;
        if count % 2 == 1 {
            return Ok(out);
        }
        let end_a = out.side_a.last().copied().unwrap_or(0);
        let end_b = out.side_b.last().copied().unwrap_or(0);
        let far = if next < q.len() {
            let parent = q.nodes[next].parent.expect("non-root node");
            next += 1;
            (next - 1, parent == end_a)
        } else {
            let mut options = Vec::new();
            for end in [end_a, end_b] {
                if let Some(t) = q.known(end).next() {
                    options.push(Action::Query { node: end, target: Target::Type(t) });
                }
            }
            if options.is_empty() {
                return Ok(out);
            }
            let w = 1.0 / options.len() as f64;
            return Err(merged(options.into_iter().map(|a| (a, w)).collect()));
        };
        out.far = Some(far);
        let w2 = far.0;
        if q.diamonds(w2) > 0 {
            return Err(query_diamond(w2));
        }
        let mut count2 = 0;
        out.chain_c = self.walk(q, w2, &mut next, &mut count2)?;
        out.chain_d = self.walk(q, w2, &mut next, &mut count2)?;
        Ok(out)
    }

    fn in_set(&self, q: &QueryGraph, parse: &PathParse) -> Vec<bool> {
        let mut in_set = vec![false; q.len()];
        if q.root().ty.degree != 2 {
            in_set[0] = true;
            return in_set;
        }
        let mut path: Vec<usize> = parse.side_a.iter().rev().copied().collect();
        path.push(0);
        path.extend(&parse.side_b);
        let Some((w2, at_a)) = parse.far else {
            for (i, &node) in path.iter().enumerate() {
                in_set[node] = i % 2 == 0;
            }
            return in_set;
        };
        if at_a {
            path.reverse();
        }
        let len = path.len();
        let (j, k) = (parse.chain_c.len(), parse.chain_d.len());
        if (j + k) % 2 == 0 {
            let far_in = j % 2 == 0;
            in_set[w2] = far_in;
            for (i, &node) in path.iter().enumerate() {
                let m = len - 1 - i;
                in_set[node] = (m % 2 == 1) == far_in;
            }
            for (chain, len) in [(&parse.chain_c, j), (&parse.chain_d, k)] {
                for (idx, &node) in chain.iter().enumerate() {
                    in_set[node] = (len - (idx + 1)) % 2 == 0;
                }
            }
        } else {
            for (i, &node) in path.iter().enumerate() {
                in_set[node] = (len - 1 - i).is_multiple_of(2);
            }
            for chain in [&parse.chain_c, &parse.chain_d] {
                for (idx, &node) in chain.iter().enumerate() {
                    in_set[node] = (idx + 1) % 2 == 1;
                }
            }
        }
        in_set
    }
}

impl Rules for CubicPathImproved {
    fn explore(&self, q: &QueryGraph) -> Vec<(Action, f64)> {
        match self.parse(q) {
            Ok(_) => stop(),
            Err(pending) => pending,
        }
    }

    fn recolour(&self, q: &QueryGraph) -> Vec<(Recolouring, f64)> {
        let parse = self.parse(q).unwrap_or_default();
        vec![(set_recolouring(q, &self.in_set(q, &parse)), 1.0)]
    }

    fn outputs(&self, _q: &QueryGraph, rec: &Recolouring, clash: &ClashMask, acc: &mut [f64]) {
        acc[0] += count_output(rec, clash, IN_SET);
    }

    fn rank(&self, ty: VertexType) -> Option<u32> {
        degree_rank(ty)
    }
}

// ============================================================================
// Cuts and bisections
// ============================================================================

/// Transient colours `(x, y)` with `x + y <= max`: `(0,0)` is neutral, index 1
/// is the blocked colour, and the remaining pairs follow by increasing sum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairPalette {
    max: u32,
    pairs: Vec<Option<(u32, u32)>>,
}

impl PairPalette {
    pub fn new(max: u32) -> Self {
        let mut pairs = vec![Some((0, 0)), None];
        for s in 1..=max {
            for x in (0..=s).rev() {
                pairs.push(Some((x, s - x)));
            }
        }
        PairPalette { max, pairs }
    }

    pub fn len(&self) -> u16 {
        self.pairs.len() as u16
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// # Panics
    /// If `x + y` exceeds the palette bound.
    pub fn colour(&self, x: u32, y: u32) -> Colour {
        assert!(x + y <= self.max, "pair ({x},{y}) outside palette");
        let i = self.pairs.iter().position(|p| *p == Some((x, y))).expect("pair present");
        Colour(i as u16)
    }

    /// The pair of a colour, or `None` for the blocked colour.
    pub fn pair(&self, c: Colour) -> Option<(u32, u32)> {
        self.pairs.get(c.0 as usize).copied().flatten()
    }

    pub fn label(&self, c: Colour) -> String {
        match self.pair(c) {
            None => "blocked".into(),
            Some((x, y)) if x < 10 && y < 10 => format!("{x}{y}"),
            Some((x, y)) => format!("{x}-{y}"),
        }
    }
}

/// Pair after gaining one neighbour of the given output colour.
fn bump((x, y): (u32, u32), c: OutputColour) -> (u32, u32) {
    if c == RED {
        (x + 1, y)
    } else {
        (x, y + 1)
    }
}

/// Colour opposite to the majority of coloured neighbours; `None` on a tie.
fn majority_opposite((r, b): (u32, u32)) -> Option<OutputColour> {
    match r.cmp(&b) {
        std::cmp::Ordering::Greater => Some(BLUE),
        std::cmp::Ordering::Less => Some(RED),
        std::cmp::Ordering::Equal => None,
    }
}

/// Edges to already coloured neighbours of the opposite colour.
fn cut_of((r, b): (u32, u32), c: OutputColour) -> u32 {
    if c == BLUE {
        r
    } else {
        b
    }
}

/// Cubic max cut: colour the root opposite to the majority of its coloured
/// neighbours (uniformly on ties); neighbours left with degree 0 are coloured
/// in the same operation.
pub struct CubicMaxcut {
    pub palette: PairPalette,
}

impl Rules for CubicMaxcut {
    fn explore(&self, q: &QueryGraph) -> Vec<(Action, f64)> {
        explore_root(q)
    }

    fn recolour(&self, q: &QueryGraph) -> Vec<(Recolouring, f64)> {
        let root = self.palette.pair(q.root().ty.colour).expect("blocked roots are never selected");
        let root_choices: Vec<(OutputColour, f64)> = match majority_opposite(root) {
            Some(c) => vec![(c, 1.0)],
            None => vec![(RED, 0.5), (BLUE, 0.5)],
        };
        let mut out = Vec::new();
        for (c, p) in root_choices {
            let mut base = Recolouring::keep_all(q);
            base.nodes[0] = Fate::Output(c);
            base.tag = if c == RED { 0 } else { 1 };
            let mut branches = vec![(base, p)];
            for (k, e) in q.nodes[0].ell.iter().enumerate() {
                let Elem::Known(t) = e else { continue };
                let Some(pair) = self.palette.pair(t.colour) else { continue };
                let bumped = bump(pair, c);
                if t.degree == 1 {
                    let options: Vec<(OutputColour, f64)> = match majority_opposite(bumped) {
                        Some(oc) => vec![(oc, 1.0)],
                        None => vec![(RED, 0.5), (BLUE, 0.5)],
                    };
                    let mut grown = Vec::new();
                    for (rec, pr) in branches {
                        for &(oc, po) in &options {
                            let mut r2 = rec.clone();
                            r2.ell[0][k] = Fate::Output(oc);
                            grown.push((r2, pr * po));
                        }
                    }
                    branches = grown;
                } else {
                    let colour = self.palette.colour(bumped.0, bumped.1);
                    for (rec, _) in branches.iter_mut() {
                        rec.ell[0][k] = Fate::Transient(colour);
                    }
                }
            }
            out.extend(branches);
        }
        out
    }

    fn outputs(&self, q: &QueryGraph, rec: &Recolouring, clash: &ClashMask, acc: &mut [f64]) {
        let Fate::Output(c) = rec.nodes[0] else { return };
        let root = self.palette.pair(q.root().ty.colour).unwrap_or((0, 0));
        if !clash.nodes[0] {
            acc[0] += cut_of(root, c) as f64;
        }
        for (k, e) in q.nodes[0].ell.iter().enumerate() {
            if let (Elem::Known(t), Fate::Output(oc)) = (e, rec.ell[0][k]) {
                if clash.ell[0][k] {
                    continue;
                }
                let pair = self.palette.pair(t.colour).unwrap_or((0, 0));
                acc[0] += cut_of(bump(pair, c), oc) as f64;
            }
        }
    }

    fn rank(&self, ty: VertexType) -> Option<u32> {
        let (r, b) = self.palette.pair(ty.colour)?;
        Some(match (r, b) {
            _ if r >= 2 || b >= 2 => 0,
            (1, 0) => 1,
            (0, 1) => 2,
            (1, 1) => 3,
            _ => 4,
        })
    }

    fn colour_label(&self, c: Colour) -> String {
        self.palette.label(c)
    }
}

/// Bisection by symmetric types: the root joins the class of the majority
/// of its coloured neighbours (minimum) or the minority (maximum).
pub struct Bisection {
    pub r: u32,
    pub palette: PairPalette,
    pub objective: Objective,
}

impl Rules for Bisection {
    fn explore(&self, q: &QueryGraph) -> Vec<(Action, f64)> {
        explore_root(q)
    }

    fn recolour(&self, q: &QueryGraph) -> Vec<(Recolouring, f64)> {
        let (x, y) = self.palette.pair(q.root().ty.colour).expect("blocked roots are never selected");
        let choices: Vec<(OutputColour, f64)> = match (x.cmp(&y), self.objective) {
            (std::cmp::Ordering::Equal, _) => vec![(RED, 0.5), (BLUE, 0.5)],
            (std::cmp::Ordering::Greater, Objective::Min) | (std::cmp::Ordering::Less, Objective::Max) => {
                vec![(RED, 1.0)]
            }
            _ => vec![(BLUE, 1.0)],
        };
        choices
            .into_iter()
            .map(|(c, p)| {
                let mut rec = Recolouring::keep_all(q);
                rec.nodes[0] = Fate::Output(c);
                rec.tag = if c == RED { 0 } else { 1 };
                for (k, e) in q.nodes[0].ell.iter().enumerate() {
                    if let Elem::Known(t) = e {
                        if let Some(pair) = self.palette.pair(t.colour) {
                            let (a, b) = bump(pair, c);
                            rec.ell[0][k] = Fate::Transient(self.palette.colour(a, b));
                        }
                    }
                }
                (rec, p)
            })
            .collect()
    }

    fn outputs(&self, q: &QueryGraph, rec: &Recolouring, clash: &ClashMask, acc: &mut [f64]) {
        if clash.nodes[0] {
            return;
        }
        let Fate::Output(c) = rec.nodes[0] else { return };
        let pair = self.palette.pair(q.root().ty.colour).unwrap_or((0, 0));
        if c == RED {
            acc[0] += 1.0;
        } else {
            acc[1] += 1.0;
        }
        acc[2] += cut_of(pair, c) as f64;
    }

    /// Larger `x + y` first, then larger `max(x, y)`; `xy` and `yx` tie.
    fn rank(&self, ty: VertexType) -> Option<u32> {
        let (x, y) = self.palette.pair(ty.colour)?;
        Some((self.r - (x + y)) * (self.r + 1) + (self.r - x.max(y)))
    }

    fn colour_label(&self, c: Colour) -> String {
        self.palette.label(c)
    }
}

// ============================================================================
// Induced forest
// ============================================================================

/// Induced forest: the root joins the forest, its neutral neighbours become
/// candidates, and candidate neighbours are deleted.
pub struct InducedForest;

impl Rules for InducedForest {
    fn explore(&self, q: &QueryGraph) -> Vec<(Action, f64)> {
        explore_root(q)
    }

    fn recolour(&self, q: &QueryGraph) -> Vec<(Recolouring, f64)> {
        let mut rec = Recolouring::keep_all(q);
        rec.nodes[0] = Fate::Output(PURPLE);
        for (k, e) in q.nodes[0].ell.iter().enumerate() {
            if let Elem::Known(t) = e {
                rec.ell[0][k] = if t.colour == FOREST_BLUE {
                    Fate::Output(YELLOW)
                } else {
                    Fate::Transient(FOREST_BLUE)
                };
            }
        }
        vec![(rec, 1.0)]
    }

    fn outputs(&self, _q: &QueryGraph, rec: &Recolouring, clash: &ClashMask, acc: &mut [f64]) {
        acc[0] += count_output(rec, clash, PURPLE);
    }

    fn rank(&self, ty: VertexType) -> Option<u32> {
        match ty.colour {
            FOREST_BLUE => Some(0),
            Colour::NEUTRAL => Some(1),
            _ => None,
        }
    }

    fn colour_label(&self, c: Colour) -> String {
        match c {
            Colour::NEUTRAL => "n".into(),
            Colour::BLOCKED => "blocked".into(),
            FOREST_BLUE => "blue".into(),
            Colour(k) => format!("c{k}"),
        }
    }
}

// ============================================================================
// Stop predicates and selection weights
// ============================================================================

/// Ends the first max-cut phase once only `00`, `11` and blocked vertices
/// remain and `11` vertices outnumber `00` vertices.
pub fn maxcut_phase_one_done() -> StopPredicate {
    let palette = PairPalette::new(3);
    Arc::new(move |host: &SurvivalGraph, step: u64| {
        if step == 0 {
            return false;
        }
        let mut zero = 0usize;
        let mut eleven = 0usize;
        for id in 0..host.type_count() {
            let n = host.count(id);
            if n == 0 {
                continue;
            }
            match palette.pair(host.type_of_id(id).colour) {
                Some((0, 0)) => zero += n,
                Some((1, 1)) => eleven += n,
                // Blocked vertices are never selected.
                None => {}
                _ => return false,
            }
        }
        eleven > zero
    })
}

/// Default per-type chunky weights (multiplied by the granularity).
pub fn default_chunky_weights(spec: &AlgorithmSpec) -> Vec<f64> {
    (0..spec.type_count())
        .map(|id| {
            let ty = spec.type_of_id(id);
            if !spec.selectable(ty) {
                return 0.0;
            }
            if spec.name == "cubic_maxcut" {
                match spec.rules.rank(ty) {
                    Some(0..=2) => 1.0,
                    Some(3) => 0.5,
                    _ => 0.25,
                }
            } else {
                1.0
            }
        })
        .collect()
}

// ============================================================================
// Repair and validation
// ============================================================================

/// A repaired output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepairedObject {
    /// Membership per vertex.
    VertexSet(Vec<bool>),
    /// Side per vertex: `true` is red.
    Partition(Vec<bool>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    /// Vertices added to the raw set or assigned a side.
    pub added: usize,
    /// Vertices moved between sides to restore balance.
    pub moved: usize,
    pub added_fraction: f64,
}

fn raw_members(state: &SurvivalGraph, colour: OutputColour) -> Vec<bool> {
    (0..state.n() as VertexId).map(|v| state.state(v) == VertexState::Dead(colour)).collect()
}

/// Repairs a raw output into a valid object, never removing raw members
/// (except the balancing moves of a bisection).
pub fn repair_output(
    name: &str,
    params: &AlgorithmParams,
    input: &ColouredGraph,
    state: &SurvivalGraph,
    rng: &mut Rng,
) -> Result<(RepairedObject, RepairReport), AlgorithmError> {
    let n = input.n();
    let mut report = RepairReport::default();
    let object = match problem_kind(name)? {
        ProblemKind::IndependentSet => RepairedObject::VertexSet(raw_members(state, IN_SET)),
        ProblemKind::InducedForest => RepairedObject::VertexSet(raw_members(state, PURPLE)),
        ProblemKind::IndependentDominatingSet => {
            let mut set = raw_members(state, IN_SET);
            for v in 0..n as VertexId {
                let dominated = set[v as usize] || input.neighbours(v).any(|(_, u)| set[u as usize]);
                if !dominated {
                    set[v as usize] = true;
                    report.added += 1;
                }
            }
            RepairedObject::VertexSet(set)
        }
        ProblemKind::Cut => {
            let side = cut_second_phase(input, state, rng, &mut report);
            RepairedObject::Partition(side)
        }
        ProblemKind::Bisection => {
            RepairedObject::Partition(balance_partition(input, state, params.objective, &mut report))
        }
    };
    report.added_fraction = report.added as f64 / n.max(1) as f64;
    Ok((object, report))
}

/// Gain in crossing edges from putting `v` on side `red`, against the
/// neighbours already assigned.
fn crossing_gain(input: &ColouredGraph, side: &[Option<bool>], v: VertexId, red: bool) -> i64 {
    input
        .neighbours(v)
        .filter(|&(_, u)| u != v)
        .filter_map(|(_, u)| side[u as usize])
        .map(|s| if s != red { 1 } else { 0 })
        .sum()
}

/// Second max-cut phase: properly 2-colour surviving tree components (with
/// the better of the two flips), greedily colour other survivors, then the
/// clash vertices.
fn cut_second_phase(input: &ColouredGraph, state: &SurvivalGraph, rng: &mut Rng, report: &mut RepairReport) -> Vec<bool> {
    let n = input.n();
    let mut side: Vec<Option<bool>> = (0..n as VertexId)
        .map(|v| match state.state(v) {
            VertexState::Dead(c) if c == RED => Some(true),
            VertexState::Dead(c) if c == BLUE => Some(false),
            _ => None,
        })
        .collect();
    let survivor = |v: VertexId| state.is_alive(v);
    let g = state.revealed();
    let mut seen = vec![false; n];
    for s in 0..n as VertexId {
        if !survivor(s) || seen[s as usize] {
            continue;
        }
        let mut comp = vec![s];
        let mut parity = vec![(s, false)];
        seen[s as usize] = true;
        let mut queue = VecDeque::from([(s, false)]);
        let mut edge_ends = 0usize;
        while let Some((x, px)) = queue.pop_front() {
            for (_, y) in g.neighbours(x) {
                edge_ends += 1;
                if !seen[y as usize] {
                    seen[y as usize] = true;
                    comp.push(y);
                    parity.push((y, !px));
                    queue.push_back((y, !px));
                }
            }
        }
        let is_tree = edge_ends / 2 + 1 == comp.len();
        if is_tree {
            let score = |flip: bool| -> i64 {
                let mut trial = side.clone();
                for &(v, p) in &parity {
                    trial[v as usize] = Some(p ^ flip);
                }
                parity.iter().map(|&(v, p)| crossing_gain(input, &trial, v, p ^ flip)).sum()
            };
            let flip = match score(false).cmp(&score(true)) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => rng.gen_bool(0.5),
            };
            for &(v, p) in &parity {
                side[v as usize] = Some(p ^ flip);
            }
        } else {
            for &v in &comp {
                let red = crossing_gain(input, &side, v, true) >= crossing_gain(input, &side, v, false);
                side[v as usize] = Some(red);
            }
        }
        report.added += comp.len();
    }
    for v in 0..n as VertexId {
        if side[v as usize].is_none() {
            let red = crossing_gain(input, &side, v, true) >= crossing_gain(input, &side, v, false);
            side[v as usize] = Some(red);
            report.added += 1;
        }
    }
    side.into_iter().map(|s| s.expect("every vertex assigned")).collect()
}

/// Assigns leftovers greedily within the capacity of each side, then moves
/// the cheapest vertices if the raw sides were already unbalanced.
fn balance_partition(
    input: &ColouredGraph,
    state: &SurvivalGraph,
    objective: Objective,
    report: &mut RepairReport,
) -> Vec<bool> {
    let n = input.n();
    let mut side: Vec<Option<bool>> = (0..n as VertexId)
        .map(|v| match state.state(v) {
            VertexState::Dead(c) if c == RED => Some(true),
            VertexState::Dead(c) if c == BLUE => Some(false),
            _ => None,
        })
        .collect();
    let cap_red = n.div_ceil(2);
    let cap_blue = n / 2;
    let mut reds = side.iter().filter(|s| **s == Some(true)).count();
    let mut blues = side.iter().filter(|s| **s == Some(false)).count();
    let sign = if objective == Objective::Min { -1 } else { 1 };
    for v in 0..n as VertexId {
        if side[v as usize].is_some() {
            continue;
        }
        let prefer_red = sign * crossing_gain(input, &side, v, true) >= sign * crossing_gain(input, &side, v, false);
        let red = if reds >= cap_red {
            false
        } else if blues >= cap_blue {
            true
        } else {
            prefer_red
        };
        side[v as usize] = Some(red);
        if red {
            reds += 1;
        } else {
            blues += 1;
        }
        report.added += 1;
    }
    let mut side: Vec<bool> = side.into_iter().map(|s| s.expect("assigned")).collect();
    while reds > cap_red || blues > cap_blue {
        let from_red = reds > cap_red;
        let opt: Vec<Option<bool>> = side.iter().map(|&s| Some(s)).collect();
        let best = (0..n as VertexId)
            .filter(|&v| side[v as usize] == from_red)
            .max_by_key(|&v| {
                let gain = crossing_gain(input, &opt, v, !from_red) - crossing_gain(input, &opt, v, from_red);
                (sign * gain, std::cmp::Reverse(v))
            })
            .expect("an overfull side is non-empty");
        side[best as usize] = !from_red;
        if from_red {
            reds -= 1;
            blues += 1;
        } else {
            blues -= 1;
            reds += 1;
        }
        report.moved += 1;
    }
    side
}

/// Evidence that an object is invalid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    /// An edge inside an independent set (a loop counts).
    InternalEdge(VertexId, VertexId),
    Undominated(VertexId),
    /// A vertex of a cycle inside the induced forest.
    CycleThrough(VertexId),
    /// Side sizes of an unbalanced bisection.
    Unbalanced(usize, usize),
    WrongLength(usize),
    WrongObject,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub pass: bool,
    /// Set size, or number of crossing edges for cuts and bisections.
    pub value: f64,
    pub certificate: Option<Certificate>,
}

fn internal_edge(input: &ColouredGraph, set: &[bool]) -> Option<Certificate> {
    input
        .edges()
        .find(|&(_, u, v)| set[u as usize] && set[v as usize])
        .map(|(_, u, v)| Certificate::InternalEdge(u, v))
}

fn forest_cycle(input: &ColouredGraph, set: &[bool]) -> Option<Certificate> {
    let mut parent: Vec<usize> = (0..input.n()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (_, u, v) in input.edges() {
        if !(set[u as usize] && set[v as usize]) {
            continue;
        }
        let (a, b) = (find(&mut parent, u as usize), find(&mut parent, v as usize));
        if a == b {
            return Some(Certificate::CycleThrough(u));
        }
        parent[a] = b;
    }
    None
}

/// Number of edges whose ends lie on different sides.
pub fn crossing_edges(input: &ColouredGraph, side: &[bool]) -> usize {
    input.edges().filter(|&(_, u, v)| side[u as usize] != side[v as usize]).count()
}

/// Checks the defining property of the object the algorithm is meant to produce.
pub fn validate_output(name: &str, input: &ColouredGraph, object: &RepairedObject) -> Result<Validation, AlgorithmError> {
    let kind = problem_kind(name)?;
    let n = input.n();
    let fail = |c: Certificate, value: f64| Validation { pass: false, value, certificate: Some(c) };
    let v = match (kind, object) {
        (_, RepairedObject::VertexSet(s) | RepairedObject::Partition(s)) if s.len() != n => {
            fail(Certificate::WrongLength(s.len()), 0.0)
        }
        (ProblemKind::IndependentSet, RepairedObject::VertexSet(set)) => {
            let size = set.iter().filter(|&&b| b).count() as f64;
            match internal_edge(input, set) {
                Some(c) => fail(c, size),
                None => Validation { pass: true, value: size, certificate: None },
            }
        }
        (ProblemKind::IndependentDominatingSet, RepairedObject::VertexSet(set)) => {
            let size = set.iter().filter(|&&b| b).count() as f64;
            if let Some(c) = internal_edge(input, set) {
                fail(c, size)
            } else if let Some(u) = (0..n as VertexId)
                .find(|&v| !set[v as usize] && !input.neighbours(v).any(|(_, u)| set[u as usize]))
            {
                fail(Certificate::Undominated(u), size)
            } else {
                Validation { pass: true, value: size, certificate: None }
            }
        }
        (ProblemKind::InducedForest, RepairedObject::VertexSet(set)) => {
            let size = set.iter().filter(|&&b| b).count() as f64;
            match forest_cycle(input, set) {
                Some(c) => fail(c, size),
                None => Validation { pass: true, value: size, certificate: None },
            }
        }
        (ProblemKind::Cut, RepairedObject::Partition(side)) => {
            Validation { pass: true, value: crossing_edges(input, side) as f64, certificate: None }
        }
        (ProblemKind::Bisection, RepairedObject::Partition(side)) => {
            let reds = side.iter().filter(|&&b| b).count();
            let cut = crossing_edges(input, side) as f64;
            if reds.abs_diff(n - reds) > n % 2 {
                fail(Certificate::Unbalanced(reds, n - reds), cut)
            } else {
                Validation { pass: true, value: cut, certificate: None }
            }
        }
        _ => fail(Certificate::WrongObject, 0.0),
    };
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_core::{cage, families};
    use crate::lda::{apply_step, run_algorithm, RunOptions, Selection};

    fn run_prioritised(name: &str, params: &AlgorithmParams, g: ColouredGraph, seed: u64) -> SurvivalGraph {
        let spec = make_algorithm(name, params).unwrap();
        let mut host = spec.survival_graph(g);
        let opts = RunOptions { audit: true, ..RunOptions::default() };
        run_algorithm(&spec, &mut host, &Selection::Prioritised, &opts, &mut Rng::new(seed)).unwrap();
        host
    }

    #[test]
    fn unknown_and_bad_parameters() {
        assert!(matches!(make_algorithm("nope", &AlgorithmParams::default()), Err(AlgorithmError::UnknownName(_))));
        let p = AlgorithmParams { r: 2, ..AlgorithmParams::default() };
        assert!(matches!(make_algorithm("dz_is", &p), Err(AlgorithmError::BadParams(_))));
        let spec = make_algorithm("min_degree_is", &AlgorithmParams::default()).unwrap();
        assert_eq!((spec.depth, spec.output_colours), (1, 3));
        let path = make_algorithm("cubic_is_path", &AlgorithmParams::default()).unwrap();
        assert_eq!(path.depth, 51);
    }

    #[test]
    fn maxcut_palette_census() {
        let spec = make_algorithm("cubic_maxcut", &AlgorithmParams::default()).unwrap();
        let palette = PairPalette::new(3);
        let labels: Vec<String> = (0..spec.transient_colours).map(|c| palette.label(Colour(c))).collect();
        assert_eq!(labels, ["00", "blocked", "10", "01", "20", "11", "02", "30", "21", "12", "03"]);
        // Colours reachable by a live vertex of positive degree have r + b <= 2.
        let live: Vec<_> = labels.iter().filter(|l| l.len() == 2 && l.chars().map(|c| c.to_digit(10).unwrap()).sum::<u32>() <= 2).collect();
        assert_eq!(live.len(), 6);
    }

    #[test]
    fn star_dominated_by_centre() {
        for seed in 0..10 {
            let host = run_prioritised("min_degree_dom", &AlgorithmParams::default(), families::star(3), seed);
            assert_eq!(host.state(0), VertexState::Dead(IN_SET));
            for leaf in 1..4 {
                assert_eq!(host.state(leaf), VertexState::Dead(DELETED));
            }
        }
    }

    #[test]
    fn c5_independent_set_has_size_two() {
        for seed in 0..30 {
            let host = run_prioritised("min_degree_is", &AlgorithmParams::default(), families::cycle(5), seed);
            let size = (0..5).filter(|&v| host.state(v) == VertexState::Dead(IN_SET)).count();
            assert_eq!(size, 2);
        }
    }

    #[test]
    fn c5_empty_raw_output_repairs_to_two() {
        let spec = make_algorithm("min_degree_dom", &AlgorithmParams::default()).unwrap();
        let g = families::cycle(5);
        let host = spec.survival_graph(g.clone());
        let (obj, rep) = repair_output("min_degree_dom", &AlgorithmParams::default(), &g, &host, &mut Rng::new(0)).unwrap();
        let RepairedObject::VertexSet(set) = &obj else { panic!() };
        assert_eq!(set.iter().filter(|&&b| b).count(), 2);
        assert_eq!(rep.added, 2);
        assert!(validate_output("min_degree_dom", &g, &obj).unwrap().pass);
    }

    #[test]
    fn maxcut_colours_root_and_absorbs_leaves() {
        let spec = make_algorithm("cubic_maxcut", &AlgorithmParams::default()).unwrap();
        let palette = PairPalette::new(3);
        // Root 0 already has one red neighbour; 2 ends with it, 1 goes on to 3.
        let mut g = ColouredGraph::from_edges(4, &[(0, 1), (0, 2), (1, 3)]);
        g.set_colour(0, palette.colour(1, 0));
        let mut host = spec.survival_graph(g);
        let (rep, _) = apply_step(&spec, &mut host, &[0], &mut Rng::new(3));
        assert_eq!(host.state(0), VertexState::Dead(BLUE));
        assert_eq!(host.state(2), VertexState::Dead(RED));
        assert_eq!(palette.pair(host.colour(1).unwrap()), Some((0, 1)));
        assert_eq!(host.degree(1), 1);
        assert_eq!(rep.outputs, vec![2.0]);
    }

    #[test]
    fn validation_witnesses() {
        let g = families::cycle(5);
        let mut set = vec![false; 5];
        set[0] = true;
        set[2] = true;
        assert!(validate_output("min_degree_is", &g, &RepairedObject::VertexSet(set.clone())).unwrap().pass);
        set[1] = true;
        let v = validate_output("min_degree_is", &g, &RepairedObject::VertexSet(set)).unwrap();
        assert!(!v.pass);
        assert!(matches!(v.certificate, Some(Certificate::InternalEdge(0, 1) | Certificate::InternalEdge(1, 2))));
        let all = RepairedObject::VertexSet(vec![true; 5]);
        let dom = validate_output("min_degree_dom", &g, &all).unwrap();
        assert!(matches!(dom.certificate, Some(Certificate::InternalEdge(..))));
    }

    #[test]
    fn path_algorithm_is_optimal_on_paths() {
        for k in 1..=20 {
            for seed in 0..5 {
                let host = run_prioritised("cubic_is_path", &AlgorithmParams::default(), families::path(k), seed);
                let size = (0..k as VertexId).filter(|&v| host.state(v) == VertexState::Dead(IN_SET)).count();
                assert_eq!(size, k.div_ceil(2), "path of {k} vertices");
            }
        }
    }

    #[test]
    fn every_algorithm_valid_on_cages() {
        for name in ALGORITHM_NAMES {
            for cage_name in ["petersen", "heawood", "mcgee", "tutte-coxeter"] {
                for seed in 0..5 {
                    let g = cage(cage_name).unwrap();
                    let host = run_prioritised(name, &AlgorithmParams::default(), g.clone(), seed);
                    let (obj, _) = repair_output(name, &AlgorithmParams::default(), &g, &host, &mut Rng::new(seed)).unwrap();
                    let v = validate_output(name, &g, &obj).unwrap();
                    assert!(v.pass, "{name} on {cage_name} seed {seed}: {:?}", v.certificate);
                }
            }
        }
    }
}
