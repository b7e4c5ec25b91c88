//! The local deletion algorithm framework: survival graphs on either backend,
//! query graphs and their copies, clash detection, recolouring, selection
//! rules and the step loop that records trajectories.
//!
//! A step selects a vertex set, explores a query copy around each selected
//! vertex, marks clashes, and then recolours and deletes. Exploration never
//! mutates the survival graph, so every copy of a step sees the same graph.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use rand_distr::Geometric;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph_core::{
    Colour, ColouredGraph, EdgeId, OutputColour, VertexId, VertexState, VertexType,
};
use crate::pairing::{Pairing, Rng};

const NONE: u32 = u32::MAX;
const MULTI: u32 = u32::MAX - 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdaError {
    #[error("deprioritised selection drew type {type_id} with no alive vertex at step {step}")]
    Stuck { step: u64, type_id: usize },
    #[error("chunky runs need a step limit or a stop predicate")]
    Unbounded,
    #[error("selection weights at step {step} are invalid: {reason}")]
    BadWeights { step: u64, reason: String },
    #[error("audit failed at step {step}: {reason}")]
    AuditFailed { step: u64, reason: String },
}

// ============================================================================
// Survival graph
// ============================================================================

/// Alive vertices bucketed by type id, with O(1) moves between buckets.
#[derive(Clone, Debug)]
struct TypeIndex {
    members: Vec<Vec<VertexId>>,
    pos: Vec<u32>,
    current: Vec<u32>,
}

impl TypeIndex {
    fn new(types: usize, n: usize) -> Self {
        TypeIndex { members: vec![Vec::new(); types], pos: vec![NONE; n], current: vec![NONE; n] }
    }

    fn remove(&mut self, v: VertexId) {
        let t = self.current[v as usize];
        if t == NONE {
            return;
        }
        let list = &mut self.members[t as usize];
        let i = self.pos[v as usize] as usize;
        let last = *list.last().expect("member list holds v");
        list[i] = last;
        self.pos[last as usize] = i as u32;
        list.pop();
        self.current[v as usize] = NONE;
    }

    fn insert(&mut self, v: VertexId, t: u32) {
        let list = &mut self.members[t as usize];
        self.pos[v as usize] = list.len() as u32;
        list.push(v);
        self.current[v as usize] = t;
    }
}

/// The survival graph of a run, backed either by a fixed graph or by a lazily
/// exposed pairing. On the pairing backend the revealed part is a
/// [`ColouredGraph`] whose edges are the exposed pairs; a vertex's degree is
/// its revealed degree plus its unexposed points.
#[derive(Clone, Debug)]
pub struct SurvivalGraph {
    graph: ColouredGraph,
    pairing: Option<Pairing>,
    r: u32,
    colours: u16,
    index: TypeIndex,
    dirty: Vec<VertexId>,
    is_dirty: Vec<bool>,
}

impl SurvivalGraph {
    /// # Panics
    /// If a vertex has degree above `r` or a colour outside `0..colours`.
    pub fn from_graph(graph: ColouredGraph, r: u32, colours: u16) -> Self {
        SurvivalGraph::assemble(graph, None, r, colours)
    }

    /// Survival graph over a pairing; already exposed pairs become edges.
    ///
    /// # Panics
    /// If a bucket holds more than `r` points.
    pub fn from_pairing(pairing: Pairing, r: u32, colours: u16) -> Self {
        let mut graph = ColouredGraph::new(pairing.buckets());
        for (p, q) in pairing.pairs() {
            graph.add_edge(pairing.bucket_of(p), pairing.bucket_of(q));
        }
        SurvivalGraph::assemble(graph, Some(pairing), r, colours)
    }

    fn assemble(graph: ColouredGraph, pairing: Option<Pairing>, r: u32, colours: u16) -> Self {
        let n = graph.n();
        let types = colours as usize * (r as usize + 1);
        let mut s = SurvivalGraph {
            graph,
            pairing,
            r,
            colours,
            index: TypeIndex::new(types, n),
            dirty: Vec::new(),
            is_dirty: vec![false; n],
        };
        for v in 0..n as VertexId {
            if let Some(ty) = s.vertex_type(v) {
                assert!(ty.degree <= r, "vertex {v} has degree {} > {r}", ty.degree);
                assert!(ty.colour.0 < colours, "vertex {v} has colour {} outside palette", ty.colour.0);
                let t = s.type_id(ty) as u32;
                s.index.insert(v, t);
            }
        }
        s
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn max_degree(&self) -> u32 {
        self.r
    }

    pub fn colour_count(&self) -> u16 {
        self.colours
    }

    pub fn type_count(&self) -> usize {
        self.colours as usize * (self.r as usize + 1)
    }

    pub fn type_id(&self, ty: VertexType) -> usize {
        ty.colour.0 as usize * (self.r as usize + 1) + ty.degree as usize
    }

    pub fn type_of_id(&self, id: usize) -> VertexType {
        let w = self.r as usize + 1;
        VertexType::new(Colour((id / w) as u16), (id % w) as u32)
    }

    pub fn is_pairing_backend(&self) -> bool {
        self.pairing.is_some()
    }

    pub fn degree(&self, v: VertexId) -> u32 {
        let free = self.pairing.as_ref().map_or(0, |p| p.free_in(v));
        self.graph.degree(v) + free
    }

    pub fn is_alive(&self, v: VertexId) -> bool {
        self.graph.is_alive(v)
    }

    pub fn state(&self, v: VertexId) -> VertexState {
        self.graph.state(v)
    }

    pub fn colour(&self, v: VertexId) -> Option<Colour> {
        self.graph.colour(v)
    }

    pub fn vertex_type(&self, v: VertexId) -> Option<VertexType> {
        self.colour(v).map(|c| VertexType::new(c, self.degree(v)))
    }

    /// Number of alive vertices of each type id.
    pub fn counts(&self) -> Vec<usize> {
        self.index.members.iter().map(Vec::len).collect()
    }

    pub fn count(&self, type_id: usize) -> usize {
        self.index.members[type_id].len()
    }

    pub fn members(&self, type_id: usize) -> &[VertexId] {
        &self.index.members[type_id]
    }

    pub fn alive_count(&self) -> usize {
        self.index.members.iter().map(Vec::len).sum()
    }

    /// The revealed part of the survival graph.
    pub fn revealed(&self) -> &ColouredGraph {
        &self.graph
    }

    /// Exposes every unexposed point of `v`.
    pub fn reveal(&mut self, v: VertexId, rng: &mut Rng) {
        let Some(p) = self.pairing.as_mut() else { return };
        while let Some(point) = p.unexposed_point_of(v) {
            let mate = p.expose_mate(point, rng).expect("an even number of points remains");
            let u = p.bucket_of(mate);
            self.graph.add_edge(v, u);
        }
    }

    /// Exposes every remaining pair.
    pub fn reveal_all(&mut self, rng: &mut Rng) {
        for v in 0..self.n() as VertexId {
            self.reveal(v, rng);
        }
    }

    /// Present incident edges of `v` with their far ends (revealing `v` first).
    pub fn neighbours(&mut self, v: VertexId, rng: &mut Rng) -> Vec<(EdgeId, VertexId)> {
        self.reveal(v, rng);
        self.graph.neighbours(v).collect()
    }

    /// The input graph: every edge ever present. On the pairing backend call
    /// [`SurvivalGraph::reveal_all`] first to obtain the whole pseudograph.
    pub fn input_graph(&self) -> ColouredGraph {
        let edges: Vec<_> = (0..self.graph.edge_capacity() as EdgeId)
            .map(|e| {
                let [u, v] = self.graph.ends(e);
                (u, v)
            })
            .collect();
        ColouredGraph::from_edges(self.n(), &edges)
    }

    fn mark(&mut self, v: VertexId) {
        if !self.is_dirty[v as usize] {
            self.is_dirty[v as usize] = true;
            self.dirty.push(v);
        }
    }

    fn delete_edge(&mut self, e: EdgeId) {
        if self.graph.delete_edge(e) {
            let [u, v] = self.graph.ends(e);
            self.mark(u);
            self.mark(v);
        }
    }

    fn kill(&mut self, v: VertexId, c: OutputColour, rng: &mut Rng) {
        self.reveal(v, rng);
        while let Some(&e) = self.graph.incident(v).last() {
            self.delete_edge(e);
        }
        self.graph.kill(v, c);
        self.mark(v);
    }

    fn set_colour(&mut self, v: VertexId, c: Colour) {
        self.graph.set_colour(v, c);
        self.mark(v);
    }

    fn sync(&mut self) {
        let dirty = std::mem::take(&mut self.dirty);
        for &v in &dirty {
            self.is_dirty[v as usize] = false;
            self.index.remove(v);
            if let Some(ty) = self.vertex_type(v) {
                let t = self.type_id(ty) as u32;
                self.index.insert(v, t);
            }
        }
        self.dirty = dirty;
        self.dirty.clear();
    }

    /// Structural audit: graph invariants, degree bound and index consistency.
    pub fn audit(&self) -> Result<(), String> {
        self.graph.audit()?;
        let mut alive = 0;
        for v in 0..self.n() as VertexId {
            match self.vertex_type(v) {
                Some(ty) => {
                    alive += 1;
                    if ty.degree > self.r {
                        return Err(format!("vertex {v} has degree {} > {}", ty.degree, self.r));
                    }
                    if self.index.current[v as usize] != self.type_id(ty) as u32 {
                        return Err(format!("vertex {v} indexed under a stale type"));
                    }
                }
                None => {
                    if self.degree(v) != 0 {
                        return Err(format!("dead vertex {v} keeps unexposed points"));
                    }
                }
            }
        }
        if alive != self.alive_count() {
            return Err(format!("index holds {} vertices, {alive} alive", self.alive_count()));
        }
        Ok(())
    }
}

// ============================================================================
// Query graphs
// ============================================================================

/// An element of a node's multiset: an unexplored neighbour, or a neighbour
/// whose type has been revealed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Elem {
    Diamond,
    Known(VertexType),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueryNode {
    pub parent: Option<usize>,
    pub ty: VertexType,
    pub depth: u32,
    pub ell: Vec<Elem>,
}

/// A rooted exploration record. Node 0 is the root; nodes are numbered in
/// the order they were added.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueryGraph {
    pub nodes: Vec<QueryNode>,
    /// Edges that closed a cycle inside the copy, as node pairs.
    pub cycle_edges: Vec<(usize, usize)>,
}

/// What to query next: an unexplored neighbour, or a known neighbour of the
/// given type, which then becomes a new node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    Diamond,
    Type(VertexType),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Stop,
    Query { node: usize, target: Target },
}

impl QueryGraph {
    /// A root of type `ty` with one unexplored neighbour per unit of degree.
    pub fn rooted(ty: VertexType) -> Self {
        QueryGraph {
            nodes: vec![QueryNode {
                parent: None,
                ty,
                depth: 0,
                ell: vec![Elem::Diamond; ty.degree as usize],
            }],
            cycle_edges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &QueryNode {
        &self.nodes[0]
    }

    pub fn diamonds(&self, node: usize) -> usize {
        self.nodes[node].ell.iter().filter(|e| **e == Elem::Diamond).count()
    }

    pub fn known(&self, node: usize) -> impl Iterator<Item = VertexType> + '_ {
        self.nodes[node].ell.iter().filter_map(|e| match e {
            Elem::Known(t) => Some(*t),
            Elem::Diamond => None,
        })
    }

    /// Slots of `node` matching `target`.
    pub fn slots(&self, node: usize, target: Target) -> Vec<usize> {
        let want = match target {
            Target::Diamond => Elem::Diamond,
            Target::Type(t) => Elem::Known(t),
        };
        (0..self.nodes[node].ell.len()).filter(|&k| self.nodes[node].ell[k] == want).collect()
    }

    pub fn is_tree(&self) -> bool {
        self.cycle_edges.is_empty()
    }

    /// Replaces the unexplored element at `slot` by a known type.
    ///
    /// # Panics
    /// If the slot is not [`Elem::Diamond`].
    pub fn reveal_slot(&mut self, node: usize, slot: usize, ty: VertexType) {
        let e = &mut self.nodes[node].ell[slot];
        assert_eq!(*e, Elem::Diamond, "slot {slot} of node {node} is already known");
        *e = Elem::Known(ty);
    }

    /// Removes the element at `slot` (swapping the last element into its place).
    pub fn take_slot(&mut self, node: usize, slot: usize) -> Elem {
        self.nodes[node].ell.swap_remove(slot)
    }

    /// Adds a child of type `ty` below `parent`, with one unexplored
    /// neighbour for each edge other than the one to `parent`.
    pub fn add_child(&mut self, parent: usize, ty: VertexType, diamonds: usize) -> usize {
        let depth = self.nodes[parent].depth + 1;
        self.nodes.push(QueryNode {
            parent: Some(parent),
            ty,
            depth,
            ell: vec![Elem::Diamond; diamonds],
        });
        self.nodes.len() - 1
    }

    /// Applies `action` to an abstract tree-shaped query graph: querying an
    /// unexplored neighbour reveals `revealed`; querying a type adds a child.
    ///
    /// # Panics
    /// If the action refers to a missing slot, or reveals with `revealed` unset.
    pub fn apply_abstract(&mut self, action: Action, revealed: Option<VertexType>) {
        match action {
            Action::Stop => {}
            Action::Query { node, target: Target::Diamond } => {
                let slot = self.slots(node, Target::Diamond)[0];
                self.reveal_slot(node, slot, revealed.expect("revealed type required"));
            }
            Action::Query { node, target: Target::Type(t) } => {
                let slot = self.slots(node, Target::Type(t))[0];
                self.take_slot(node, slot);
                self.add_child(node, t, t.degree.saturating_sub(1) as usize);
            }
        }
    }

    /// Canonical encoding: equal keys mean isomorphic labelled query graphs
    /// (multisets compared as sorted sequences).
    pub fn canonical_key(&self) -> Vec<u32> {
        let enc = |e: &Elem| match e {
            Elem::Diamond => u32::MAX,
            Elem::Known(t) => ((t.colour.0 as u32) << 16) | t.degree,
        };
        let mut key = Vec::with_capacity(8 * self.nodes.len());
        for node in &self.nodes {
            key.push(node.parent.map_or(u32::MAX, |p| p as u32));
            key.push(((node.ty.colour.0 as u32) << 16) | node.ty.degree);
            key.push(node.ell.len() as u32);
            let mut ell: Vec<u32> = node.ell.iter().map(enc).collect();
            ell.sort_unstable();
            key.extend(ell);
        }
        let mut cycles: Vec<_> = self.cycle_edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        cycles.sort_unstable();
        for (a, b) in cycles {
            key.push(a as u32);
            key.push(b as u32);
        }
        key
    }
}

// ============================================================================
// Recolouring and output functions
// ============================================================================

/// What the recolouring rule does to a node or to a known element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fate {
    /// Nodes keep their colour; known elements keep their colour but lose the
    /// exposed edge.
    Keep,
    Transient(Colour),
    /// For a known element: the neighbour is deleted with the given output
    /// colour (it is absorbed into the copy).
    Output(OutputColour),
}

/// One outcome of a recolouring rule, parallel to the query graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Recolouring {
    pub nodes: Vec<Fate>,
    pub ell: Vec<Vec<Fate>>,
    /// Identifies the random outcome, for output functions that need it.
    pub tag: u32,
}

impl Recolouring {
    pub fn keep_all(q: &QueryGraph) -> Self {
        Recolouring {
            nodes: vec![Fate::Keep; q.len()],
            ell: q.nodes.iter().map(|n| vec![Fate::Keep; n.ell.len()]).collect(),
            tag: 0,
        }
    }

    /// Terminal neighbours keep the blocked colour whatever the rule says;
    /// known neighbours left at `Keep` keep their own colour.
    pub fn normalise(&mut self, q: &QueryGraph) {
        for (node, fates) in q.nodes.iter().zip(self.ell.iter_mut()) {
            for (e, f) in node.ell.iter().zip(fates.iter_mut()) {
                match e {
                    Elem::Known(t) if t.colour == Colour::BLOCKED => *f = Fate::Transient(Colour::BLOCKED),
                    Elem::Known(t) if *f == Fate::Keep => *f = Fate::Transient(t.colour),
                    Elem::Diamond => *f = Fate::Keep,
                    _ => {}
                }
            }
        }
    }
}

/// Which parts of a copy were clashes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClashMask {
    pub nodes: Vec<bool>,
    pub ell: Vec<Vec<bool>>,
}

impl ClashMask {
    pub fn none(q: &QueryGraph) -> Self {
        ClashMask {
            nodes: vec![false; q.len()],
            ell: q.nodes.iter().map(|n| vec![false; n.ell.len()]).collect(),
        }
    }

    pub fn any(&self) -> bool {
        self.nodes.iter().any(|&b| b) || self.ell.iter().flatten().any(|&b| b)
    }
}

/// The rules of one algorithm. Distributions are lists of outcomes with
/// probabilities summing to 1.
pub trait Rules: Send + Sync {
    /// Distribution over the next exploration action.
    fn explore(&self, q: &QueryGraph) -> Vec<(Action, f64)>;

    /// Distribution over recolourings of a fully explored query graph.
    fn recolour(&self, q: &QueryGraph) -> Vec<(Recolouring, f64)>;

    /// Adds this copy's contribution to each output function.
    fn outputs(&self, q: &QueryGraph, rec: &Recolouring, clash: &ClashMask, acc: &mut [f64]);

    /// Priority of a type under prioritised selection (lower first); `None`
    /// means never selected.
    fn rank(&self, ty: VertexType) -> Option<u32>;

    /// Short name of a transient colour, for column labels.
    fn colour_label(&self, c: Colour) -> String {
        match c {
            Colour::NEUTRAL => "n".into(),
            Colour::BLOCKED => "blocked".into(),
            Colour(k) => format!("c{k}"),
        }
    }
}

/// How ties between equally ranked vertices are broken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieBreak {
    /// Uniform over all vertices of the best rank.
    Vertex,
    /// Uniform over non-empty types of the best rank, then uniform within.
    Type,
}

/// One named algorithm: its rules plus the palette and depth they need.
#[derive(Clone)]
pub struct AlgorithmSpec {
    pub name: String,
    /// Maximum degree of the graphs it runs on.
    pub r: u32,
    /// Depth: nodes lie within distance `depth - 1` of the root.
    pub depth: u32,
    /// Number of transient colours, including neutral and blocked.
    pub transient_colours: u16,
    /// Number of output colours, including the clash colour.
    pub output_colours: u16,
    pub output_names: Vec<String>,
    pub tie_break: TieBreak,
    pub rules: Arc<dyn Rules>,
}

impl std::fmt::Debug for AlgorithmSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AlgorithmSpec")
            .field("name", &self.name)
            .field("r", &self.r)
            .field("depth", &self.depth)
            .field("transient_colours", &self.transient_colours)
            .field("output_colours", &self.output_colours)
            .field("output_names", &self.output_names)
            .finish()
    }
}

impl AlgorithmSpec {
    pub fn type_count(&self) -> usize {
        self.transient_colours as usize * (self.r as usize + 1)
    }

    pub fn type_of_id(&self, id: usize) -> VertexType {
        let w = self.r as usize + 1;
        VertexType::new(Colour((id / w) as u16), (id % w) as u32)
    }

    pub fn type_id(&self, ty: VertexType) -> usize {
        ty.colour.0 as usize * (self.r as usize + 1) + ty.degree as usize
    }

    pub fn type_label(&self, id: usize) -> String {
        let ty = self.type_of_id(id);
        format!("{}_{}", self.rules.colour_label(ty.colour), ty.degree)
    }

    /// Whether vertices of this type may ever be selected.
    pub fn selectable(&self, ty: VertexType) -> bool {
        ty.colour != Colour::BLOCKED && self.rules.rank(ty).is_some()
    }

    /// A fresh survival graph over `graph`.
    pub fn survival_graph(&self, graph: ColouredGraph) -> SurvivalGraph {
        SurvivalGraph::from_graph(graph, self.r, self.transient_colours)
    }

    /// A fresh survival graph over a lazily exposed pairing.
    pub fn survival_pairing(&self, pairing: Pairing) -> SurvivalGraph {
        SurvivalGraph::from_pairing(pairing, self.r, self.transient_colours)
    }
}

/// Samples an index from a list of `(outcome, probability)` pairs. Draws no
/// randomness when there is a single outcome.
pub fn sample_outcome<T>(dist: &[(T, f64)], rng: &mut Rng) -> usize {
    assert!(!dist.is_empty(), "empty distribution");
    if dist.len() == 1 {
        return 0;
    }
    let total: f64 = dist.iter().map(|(_, p)| *p).sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, (_, p)) in dist.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    dist.iter().rposition(|(_, p)| *p > 0.0).unwrap_or(dist.len() - 1)
}

// ============================================================================
// Query copies
// ============================================================================

/// A query graph embedded in the survival graph.
#[derive(Clone, Debug)]
pub struct QueryCopy {
    pub graph: QueryGraph,
    /// Host vertex of each node.
    pub hosts: Vec<VertexId>,
    /// Host edge and far end of each element, parallel to the multisets.
    pub bindings: Vec<Vec<(EdgeId, VertexId)>>,
    /// Host edges of the query graph (tree and cycle edges).
    pub edges: Vec<EdgeId>,
    pub recolouring: Recolouring,
}

/// Explores a copy rooted at `v` under the spec's rules, then samples its
/// recolouring.
///
/// # Panics
/// If `v` is dead, or the rules query a missing element.
pub fn build_query_copy(
    spec: &AlgorithmSpec,
    host: &mut SurvivalGraph,
    v: VertexId,
    rng: &mut Rng,
) -> QueryCopy {
    let ty = host.vertex_type(v).expect("root must be alive");
    let nbrs = host.neighbours(v, rng);
    let mut copy = QueryCopy {
        graph: QueryGraph::rooted(ty),
        hosts: vec![v],
        bindings: vec![nbrs],
        edges: Vec::new(),
        recolouring: Recolouring { nodes: Vec::new(), ell: Vec::new(), tag: 0 },
    };
    loop {
        let dist = spec.rules.explore(&copy.graph);
        let (action, _) = dist[sample_outcome(&dist, rng)];
        let Action::Query { node, target } = action else { break };
        let slots = copy.graph.slots(node, target);
        assert!(!slots.is_empty(), "rules queried a missing element {target:?} at node {node}");
        let slot = slots[if slots.len() == 1 { 0 } else { rng.gen_range(0..slots.len()) }];
        let (e, x) = copy.bindings[node][slot];
        match target {
            Target::Diamond => {
                let t = host.vertex_type(x).expect("neighbours are alive");
                copy.graph.reveal_slot(node, slot, t);
            }
            Target::Type(t) => {
                copy.graph.take_slot(node, slot);
                copy.bindings[node].swap_remove(slot);
                copy.edges.push(e);
                if let Some(j) = copy.hosts.iter().position(|&h| h == x) {
                    copy.graph.cycle_edges.push((node, j));
                    if let Some(k) = copy.bindings[j].iter().position(|&(f, _)| f == e) {
                        copy.graph.take_slot(j, k);
                        copy.bindings[j].swap_remove(k);
                    }
                } else {
                    let mut nbrs = host.neighbours(x, rng);
                    let back = nbrs.iter().position(|&(f, _)| f == e).expect("edge is incident");
                    nbrs.swap_remove(back);
                    let child = copy.graph.add_child(node, t, nbrs.len());
                    debug_assert!(copy.graph.nodes[child].depth < spec.depth.max(1));
                    copy.hosts.push(x);
                    copy.bindings.push(nbrs);
                }
            }
        }
    }
    let dist = spec.rules.recolour(&copy.graph);
    let mut rec = dist[sample_outcome(&dist, rng)].0.clone();
    rec.normalise(&copy.graph);
    copy.recolouring = rec;
    copy
}

// ============================================================================
// Clash detection and the recolouring step
// ============================================================================

/// Per-step record of one applied step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    pub selected: usize,
    pub clashes: usize,
    pub blocked: usize,
    /// Output-function increments of this step.
    pub outputs: Vec<f64>,
}

fn absorbed(copy: &QueryCopy) -> impl Iterator<Item = (usize, usize, VertexId)> + '_ {
    copy.bindings.iter().enumerate().flat_map(move |(i, b)| {
        b.iter().enumerate().filter_map(move |(k, &(_, x))| {
            matches!(copy.recolouring.ell[i][k], Fate::Output(_)).then_some((i, k, x))
        })
    })
}

/// Clash vertices of a set of copies built on the same survival graph:
/// vertices of two copies or repeated within one, endpoints of cycle edges,
/// and vertices adjacent to another copy or to their own copy through an
/// edge outside it. Members are node hosts and absorbed neighbours.
pub fn detect_clashes(host: &mut SurvivalGraph, copies: &[QueryCopy], rng: &mut Rng) -> Vec<VertexId> {
    let mut owner: HashMap<VertexId, u32> = HashMap::new();
    let mut clash: Vec<VertexId> = Vec::new();
    let mut copy_edges: HashMap<EdgeId, u32> = HashMap::new();
    for (c, copy) in copies.iter().enumerate() {
        let c = c as u32;
        let members = copy.hosts.iter().copied().chain(absorbed(copy).map(|(_, _, x)| x));
        for x in members {
            match owner.get(&x) {
                None => {
                    owner.insert(x, c);
                }
                Some(_) => {
                    owner.insert(x, MULTI);
                }
            }
        }
        for (i, j) in &copy.graph.cycle_edges {
            clash.push(copy.hosts[*i]);
            clash.push(copy.hosts[*j]);
        }
        for &e in &copy.edges {
            copy_edges.insert(e, c);
        }
        for (i, k, _) in absorbed(copy) {
            copy_edges.insert(copy.bindings[i][k].0, c);
        }
    }
    let mut members: Vec<VertexId> = owner.keys().copied().collect();
    members.sort_unstable();
    for &x in &members {
        let cx = owner[&x];
        if cx == MULTI {
            clash.push(x);
            continue;
        }
        for (e, y) in host.neighbours(x, rng) {
            let Some(&cy) = owner.get(&y) else { continue };
            if cy != cx || copy_edges.get(&e) != Some(&cx) {
                clash.push(x);
                break;
            }
        }
    }
    clash.sort_unstable();
    clash.dedup();
    clash
}

/// Applies one step with the given selected vertices: builds copies, marks
/// clashes and recolours. Returns the copies for inspection.
pub fn apply_step(
    spec: &AlgorithmSpec,
    host: &mut SurvivalGraph,
    selected: &[VertexId],
    rng: &mut Rng,
) -> (StepReport, Vec<QueryCopy>) {
    let copies: Vec<QueryCopy> = selected.iter().map(|&v| build_query_copy(spec, host, v, rng)).collect();
    let clashes = detect_clashes(host, &copies, rng);
    let report = recolour_and_delete(spec, host, &copies, &clashes, rng);
    (report, copies)
}

/// The recolouring step: clashes get the clash colour, the rule's colours
/// are applied, neighbours reached twice become blocked, and every exposed
/// edge and output-coloured vertex is deleted.
pub fn recolour_and_delete(
    spec: &AlgorithmSpec,
    host: &mut SurvivalGraph,
    copies: &[QueryCopy],
    clashes: &[VertexId],
    rng: &mut Rng,
) -> StepReport {
    let mut report = StepReport {
        selected: copies.len(),
        clashes: clashes.len(),
        blocked: 0,
        outputs: vec![0.0; spec.output_names.len()],
    };
    let is_clash = |x: VertexId| clashes.binary_search(&x).is_ok();
    let mut member = HashMap::new();
    for copy in copies {
        for &x in &copy.hosts {
            member.insert(x, ());
        }
        for (_, _, x) in absorbed(copy) {
            member.insert(x, ());
        }
    }
    for copy in copies {
        let mask = ClashMask {
            nodes: copy.hosts.iter().map(|&x| is_clash(x)).collect(),
            ell: copy
                .bindings
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    b.iter()
                        .enumerate()
                        .map(|(k, &(_, x))| matches!(copy.recolouring.ell[i][k], Fate::Output(_)) && is_clash(x))
                        .collect()
                })
                .collect(),
        };
        spec.rules.outputs(&copy.graph, &copy.recolouring, &mask, &mut report.outputs);
    }
    for &x in clashes {
        host.kill(x, OutputColour::CLASH, rng);
    }
    let mut to_kill: Vec<(VertexId, OutputColour)> = Vec::new();
    let mut incoming: HashMap<VertexId, (u32, Colour)> = HashMap::new();
    for copy in copies {
        for (i, &x) in copy.hosts.iter().enumerate() {
            if is_clash(x) {
                continue;
            }
            match copy.recolouring.nodes[i] {
                Fate::Keep => {}
                Fate::Transient(c) => host.set_colour(x, c),
                Fate::Output(c) => to_kill.push((x, c)),
            }
        }
        for &e in &copy.edges {
            host.delete_edge(e);
        }
        for (i, node) in copy.graph.nodes.iter().enumerate() {
            for (k, elem) in node.ell.iter().enumerate() {
                if *elem == Elem::Diamond {
                    continue;
                }
                let (e, x) = copy.bindings[i][k];
                host.delete_edge(e);
                match copy.recolouring.ell[i][k] {
                    Fate::Output(c) => {
                        if !is_clash(x) {
                            to_kill.push((x, c));
                        }
                    }
                    Fate::Transient(c) => {
                        if !member.contains_key(&x) {
                            let slot = incoming.entry(x).or_insert((0, c));
                            slot.0 += 1;
                            slot.1 = c;
                        }
                    }
                    Fate::Keep => unreachable!("known elements are normalised"),
                }
            }
        }
    }
    for (x, c) in to_kill {
        if host.is_alive(x) {
            host.kill(x, c, rng);
        }
    }
    let mut incoming: Vec<_> = incoming.into_iter().collect();
    incoming.sort_unstable_by_key(|(x, _)| *x);
    for (x, (times, c)) in incoming {
        if !host.is_alive(x) {
            continue;
        }
        if times >= 2 {
            host.set_colour(x, Colour::BLOCKED);
            report.blocked += 1;
        } else {
            host.set_colour(x, c);
        }
    }
    host.sync();
    report
}

/// Unordered pairs of `selected` at distance at most `radius` in the
/// survival graph.
pub fn count_preclashes(host: &mut SurvivalGraph, selected: &[VertexId], radius: u32, rng: &mut Rng) -> u64 {
    if selected.len() < 2 {
        return 0;
    }
    let chosen: HashMap<VertexId, ()> = selected.iter().map(|&v| (v, ())).collect();
    let mut dist: HashMap<VertexId, u32> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut total = 0u64;
    for &s in selected {
        dist.clear();
        queue.clear();
        dist.insert(s, 0);
        queue.push_back(s);
        while let Some(x) = queue.pop_front() {
            let dx = dist[&x];
            if dx == radius {
                continue;
            }
            for (_, y) in host.neighbours(x, rng) {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(y) {
                    e.insert(dx + 1);
                    queue.push_back(y);
                    if y > s && chosen.contains_key(&y) {
                        total += 1;
                    }
                }
            }
        }
    }
    total
}

// ============================================================================
// Selection rules
// ============================================================================

/// Per-type inclusion probabilities for step `t` (1-based), indexed by type id.
pub type ChunkyProbs = Arc<dyn Fn(u64) -> Vec<f64> + Send + Sync>;
/// Relative selection weights per type id, given `x = t/n` and the type
/// densities.
pub type MixWeights = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum Selection {
    /// A single vertex of the best-ranked non-empty type.
    Prioritised,
    /// Every vertex independently, with a per-step, per-type probability.
    Chunky(ChunkyProbs),
    /// A single vertex whose type is drawn from relative weights.
    Deprioritised(MixWeights),
}

impl std::fmt::Debug for Selection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Selection::Prioritised => "Prioritised",
            Selection::Chunky(_) => "Chunky",
            Selection::Deprioritised(_) => "Deprioritised",
        })
    }
}

/// Chunky probabilities constant in time.
pub fn constant_chunky(probs: Vec<f64>) -> Selection {
    Selection::Chunky(Arc::new(move |_| probs.clone()))
}

/// Draws the selected set `S_t` for step `step` (1-based).
pub fn select_vertices(
    spec: &AlgorithmSpec,
    host: &SurvivalGraph,
    selection: &Selection,
    step: u64,
    rng: &mut Rng,
) -> Result<Vec<VertexId>, LdaError> {
    let types = host.type_count();
    match selection {
        Selection::Prioritised => {
            let mut best: Option<u32> = None;
            let mut pool: Vec<usize> = Vec::new();
            for id in 0..types {
                let ty = host.type_of_id(id);
                if host.count(id) == 0 || !spec.selectable(ty) {
                    continue;
                }
                let rank = spec.rules.rank(ty).expect("selectable types have a rank");
                match best {
                    Some(b) if rank > b => {}
                    Some(b) if rank == b => pool.push(id),
                    _ => {
                        best = Some(rank);
                        pool.clear();
                        pool.push(id);
                    }
                }
            }
            if pool.is_empty() {
                return Ok(Vec::new());
            }
            let id = match spec.tie_break {
                TieBreak::Type => pool[rng.gen_range(0..pool.len())],
                TieBreak::Vertex => {
                    let total: usize = pool.iter().map(|&id| host.count(id)).sum();
                    let mut k = rng.gen_range(0..total);
                    let mut pick = pool[0];
                    for &id in &pool {
                        if k < host.count(id) {
                            pick = id;
                            break;
                        }
                        k -= host.count(id);
                    }
                    let m = host.members(pick);
                    return Ok(vec![m[k]]);
                }
            };
            let m = host.members(id);
            Ok(vec![m[rng.gen_range(0..m.len())]])
        }
        Selection::Chunky(probs) => {
            let p = probs(step);
            if p.len() != types {
                return Err(LdaError::BadWeights { step, reason: format!("{} probabilities for {types} types", p.len()) });
            }
            let mut out = Vec::new();
            for (id, &pi) in p.iter().enumerate() {
                if !(0.0..=1.0).contains(&pi) {
                    return Err(LdaError::BadWeights { step, reason: format!("probability {pi} for type {id}") });
                }
                let m = host.members(id);
                if pi == 0.0 || m.is_empty() || !spec.selectable(host.type_of_id(id)) {
                    continue;
                }
                if pi == 1.0 {
                    out.extend_from_slice(m);
                    continue;
                }
                let geo = Geometric::new(pi).expect("probability in (0,1)");
                let mut i = geo.sample(rng) as usize;
                while i < m.len() {
                    out.push(m[i]);
                    i = i.saturating_add(1 + geo.sample(rng) as usize);
                }
            }
            Ok(out)
        }
        Selection::Deprioritised(weights) => {
            let n = host.n() as f64;
            let y: Vec<f64> = host.counts().iter().map(|&c| c as f64 / n).collect();
            let mut w = weights(step as f64 / n, &y);
            if w.len() != types {
                return Err(LdaError::BadWeights { step, reason: format!("{} weights for {types} types", w.len()) });
            }
            for (id, wi) in w.iter_mut().enumerate() {
                if !spec.selectable(host.type_of_id(id)) {
                    *wi = 0.0;
                }
            }
            let dist = WeightedIndex::new(&w)
                .map_err(|err| LdaError::BadWeights { step, reason: err.to_string() })?;
            let id = dist.sample(rng);
            let m = host.members(id);
            if m.is_empty() {
                return Err(LdaError::Stuck { step, type_id: id });
            }
            Ok(vec![m[rng.gen_range(0..m.len())]])
        }
    }
}

// ============================================================================
// Runs and trajectories
// ============================================================================

pub type StopPredicate = Arc<dyn Fn(&SurvivalGraph, u64) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct RunOptions {
    pub max_steps: Option<u64>,
    /// Stop before step `t + 1` once this holds after step `t`.
    pub stop_when: Option<StopPredicate>,
    /// Record every k-th step (the initial and final rows are always kept).
    pub record_every: u64,
    pub count_preclashes: bool,
    /// Audit the survival graph after every step.
    pub audit: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { max_steps: None, stop_when: None, record_every: 1, count_preclashes: true, audit: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: u64,
    /// Alive vertices per type id.
    pub counts: Vec<u32>,
    /// Cumulative output-function values.
    pub outputs: Vec<f64>,
    pub clashes: u32,
    pub preclashes: u64,
    pub selected: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub type_labels: Vec<String>,
    pub output_names: Vec<String>,
    pub rows: Vec<TrajectoryRow>,
}

impl Trajectory {
    /// CSV header: step, one column per type, one per output, clash columns.
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["step".to_string()];
        h.extend(self.type_labels.iter().map(|l| format!("Y_{l}")));
        h.extend(self.output_names.iter().map(|l| format!("W_{l}")));
        h.extend(["clashes", "preclashes", "selected"].map(String::from));
        h
    }

    pub fn fields(row: &TrajectoryRow) -> Vec<String> {
        let mut f = vec![row.step.to_string()];
        f.extend(row.counts.iter().map(|c| c.to_string()));
        f.extend(row.outputs.iter().map(|w| format!("{w}")));
        f.push(row.clashes.to_string());
        f.push(row.preclashes.to_string());
        f.push(row.selected.to_string());
        f
    }

    pub fn last(&self) -> &TrajectoryRow {
        self.rows.last().expect("a trajectory has an initial row")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxSteps,
    Exhausted,
    Predicate,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub trajectory: Trajectory,
    pub steps: u64,
    pub outputs: Vec<f64>,
    pub clashes: u64,
    pub preclashes: u64,
    pub stop: StopReason,
}

fn has_selectable(spec: &AlgorithmSpec, host: &SurvivalGraph) -> bool {
    (0..host.type_count()).any(|id| host.count(id) > 0 && spec.selectable(host.type_of_id(id)))
}

fn snapshot(host: &SurvivalGraph, step: u64, outputs: &[f64], rep: &StepReport, pre: u64) -> TrajectoryRow {
    TrajectoryRow {
        step,
        counts: host.counts().iter().map(|&c| c as u32).collect(),
        outputs: outputs.to_vec(),
        clashes: rep.clashes as u32,
        preclashes: pre,
        selected: rep.selected as u32,
    }
}

/// Runs the algorithm until the step limit, the stop predicate, or until no
/// selectable vertex remains.
pub fn run_algorithm(
    spec: &AlgorithmSpec,
    host: &mut SurvivalGraph,
    selection: &Selection,
    opts: &RunOptions,
    rng: &mut Rng,
) -> Result<RunRecord, LdaError> {
    assert_eq!(host.max_degree(), spec.r, "survival graph built for another degree bound");
    if matches!(selection, Selection::Chunky(_)) && opts.max_steps.is_none() && opts.stop_when.is_none() {
        return Err(LdaError::Unbounded);
    }
    let every = opts.record_every.max(1);
    let mut outputs = vec![0.0; spec.output_names.len()];
    let mut trajectory = Trajectory {
        type_labels: (0..spec.type_count()).map(|id| spec.type_label(id)).collect(),
        output_names: spec.output_names.clone(),
        rows: vec![snapshot(host, 0, &outputs, &StepReport::default(), 0)],
    };
    let mut step = 0u64;
    let mut clashes = 0u64;
    let mut preclashes = 0u64;
    let stop = loop {
        if opts.max_steps.is_some_and(|m| step >= m) {
            break StopReason::MaxSteps;
        }
        if opts.stop_when.as_ref().is_some_and(|p| p(host, step)) {
            break StopReason::Predicate;
        }
        if !has_selectable(spec, host) {
            break StopReason::Exhausted;
        }
        step += 1;
        let selected = select_vertices(spec, host, selection, step, rng)?;
        let pre = if opts.count_preclashes {
            count_preclashes(host, &selected, 2 * spec.depth, rng)
        } else {
            0
        };
        let (rep, _) = apply_step(spec, host, &selected, rng);
        for (acc, d) in outputs.iter_mut().zip(&rep.outputs) {
            *acc += d;
        }
        clashes += rep.clashes as u64;
        preclashes += pre;
        if opts.audit {
            host.audit().map_err(|reason| LdaError::AuditFailed { step, reason })?;
        }
        if step.is_multiple_of(every) {
            trajectory.rows.push(snapshot(host, step, &outputs, &rep, pre));
        }
    };
    if trajectory.last().step != step {
        let rep = StepReport::default();
        trajectory.rows.push(snapshot(host, step, &outputs, &rep, 0));
    }
    Ok(RunRecord { trajectory, steps: step, outputs, clashes, preclashes, stop })
}
