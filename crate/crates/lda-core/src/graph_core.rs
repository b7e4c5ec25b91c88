//! Coloured multigraphs, girth and short-cycle analysis, the cage catalogue
//! and the edge-list / LCF text formats.
//!
//! Vertex ids are dense and stable: deleting a vertex marks it dead instead
//! of reindexing. Loops contribute 2 to the degree of their vertex.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type VertexId = u32;
pub type EdgeId = u32;

const NONE: u32 = u32::MAX;

/// Transient colour of an alive vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Colour(pub u16);

impl Colour {
    pub const NEUTRAL: Colour = Colour(0);
    /// The reserved terminal colour: such vertices are never selected or explored.
    pub const BLOCKED: Colour = Colour(1);
}

/// Output colour of a deleted vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutputColour(pub u16);

impl OutputColour {
    /// The reserved colour given to clash vertices.
    pub const CLASH: OutputColour = OutputColour(0);
}

/// The type of an alive vertex: its transient colour and live degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexType {
    pub colour: Colour,
    pub degree: u32,
}

impl VertexType {
    pub fn new(colour: Colour, degree: u32) -> Self {
        VertexType { colour, degree }
    }

    pub fn neutral(degree: u32) -> Self {
        VertexType { colour: Colour::NEUTRAL, degree }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexState {
    Alive(Colour),
    Dead(OutputColour),
}

/// Length of a shortest cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Girth {
    Finite(u32),
    Infinite,
}

impl Girth {
    pub fn at_most(self, len: u32) -> bool {
        matches!(self, Girth::Finite(g) if g <= len)
    }
}

impl fmt::Display for Girth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Girth::Finite(g) => write!(f, "{g}"),
            Girth::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("malformed edge line {line}: {text:?}")]
    MalformedLine { line: usize, text: String },
    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: u64, n: usize },
    #[error("inconsistent LCF code: {0}")]
    OddLcfApplication(String),
    #[error("unknown graph name {0:?}")]
    UnknownName(String),
}

/// A multigraph with per-vertex colours and alive flags, used as the
/// survival graph of a run.
#[derive(Clone, Debug)]
pub struct ColouredGraph {
    ends: Vec<[VertexId; 2]>,
    present: Vec<bool>,
    // Incident present edges; a loop is listed twice.
    incidence: Vec<Vec<EdgeId>>,
    state: Vec<VertexState>,
    live_edges: usize,
}

impl ColouredGraph {
    /// `n` isolated neutral vertices.
    pub fn new(n: usize) -> Self {
        ColouredGraph {
            ends: Vec::new(),
            present: Vec::new(),
            incidence: vec![Vec::new(); n],
            state: vec![VertexState::Alive(Colour::NEUTRAL); n],
            live_edges: 0,
        }
    }

    pub fn from_edges(n: usize, edges: &[(VertexId, VertexId)]) -> Self {
        let mut g = ColouredGraph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    /// # Panics
    /// If either endpoint is out of range or dead.
    pub fn add_edge(&mut self, u: VertexId, v: VertexId) -> EdgeId {
        assert!(self.is_alive(u) && self.is_alive(v), "edge ({u},{v}) touches a dead vertex");
        let e = self.ends.len() as EdgeId;
        self.ends.push([u, v]);
        self.present.push(true);
        self.incidence[u as usize].push(e);
        self.incidence[v as usize].push(e);
        self.live_edges += 1;
        e
    }

    pub fn n(&self) -> usize {
        self.state.len()
    }

    /// Number of present edges.
    pub fn edge_count(&self) -> usize {
        self.live_edges
    }

    /// Number of edges ever added, present or not.
    pub fn edge_capacity(&self) -> usize {
        self.ends.len()
    }

    pub fn ends(&self, e: EdgeId) -> [VertexId; 2] {
        self.ends[e as usize]
    }

    pub fn is_present(&self, e: EdgeId) -> bool {
        self.present[e as usize]
    }

    pub fn other_end(&self, e: EdgeId, v: VertexId) -> VertexId {
        let [a, b] = self.ends[e as usize];
        if a == v {
            b
        } else {
            a
        }
    }

    pub fn degree(&self, v: VertexId) -> u32 {
        self.incidence[v as usize].len() as u32
    }

    pub fn incident(&self, v: VertexId) -> &[EdgeId] {
        &self.incidence[v as usize]
    }

    /// Present incident edges with their far endpoints; a loop appears twice.
    pub fn neighbours(&self, v: VertexId) -> impl Iterator<Item = (EdgeId, VertexId)> + '_ {
        self.incidence[v as usize].iter().map(move |&e| (e, self.other_end(e, v)))
    }

    /// Present edges in id order.
    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, VertexId, VertexId)> + '_ {
        self.ends
            .iter()
            .enumerate()
            .filter(|(e, _)| self.present[*e])
            .map(|(e, &[u, v])| (e as EdgeId, u, v))
    }

    pub fn state(&self, v: VertexId) -> VertexState {
        self.state[v as usize]
    }

    pub fn is_alive(&self, v: VertexId) -> bool {
        matches!(self.state[v as usize], VertexState::Alive(_))
    }

    pub fn colour(&self, v: VertexId) -> Option<Colour> {
        match self.state[v as usize] {
            VertexState::Alive(c) => Some(c),
            VertexState::Dead(_) => None,
        }
    }

    pub fn vertex_type(&self, v: VertexId) -> Option<VertexType> {
        self.colour(v).map(|c| VertexType::new(c, self.degree(v)))
    }

    /// # Panics
    /// If `v` is dead.
    pub fn set_colour(&mut self, v: VertexId, c: Colour) {
        assert!(self.is_alive(v), "recolouring dead vertex {v}");
        self.state[v as usize] = VertexState::Alive(c);
    }

    /// Removes a present edge; returns false if it was already gone.
    pub fn delete_edge(&mut self, e: EdgeId) -> bool {
        if !self.present[e as usize] {
            return false;
        }
        self.present[e as usize] = false;
        self.live_edges -= 1;
        let [u, v] = self.ends[e as usize];
        remove_one(&mut self.incidence[u as usize], e);
        remove_one(&mut self.incidence[v as usize], e);
        true
    }

    /// Deletes `v` with all its incident edges, giving it an output colour.
    pub fn kill(&mut self, v: VertexId, c: OutputColour) {
        while let Some(&e) = self.incidence[v as usize].last() {
            self.delete_edge(e);
        }
        self.state[v as usize] = VertexState::Dead(c);
    }

    pub fn alive_count(&self) -> usize {
        self.state.iter().filter(|s| matches!(s, VertexState::Alive(_))).count()
    }

    pub fn max_degree(&self) -> u32 {
        (0..self.n() as VertexId).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn is_regular(&self, r: u32) -> bool {
        (0..self.n() as VertexId).all(|v| self.degree(v) == r)
    }

    /// No loops and no parallel edges among present edges.
    pub fn is_simple(&self) -> bool {
        let mut mark = vec![NONE; self.n()];
        for v in 0..self.n() as VertexId {
            for (_, u) in self.neighbours(v) {
                if u == v || mark[u as usize] == v {
                    return false;
                }
                mark[u as usize] = v;
            }
        }
        true
    }

    /// Checks the structural invariants; returns a description of the first violation.
    pub fn audit(&self) -> Result<(), String> {
        let mut seen = vec![0u32; self.ends.len()];
        for v in 0..self.n() {
            if !self.is_alive(v as VertexId) && !self.incidence[v].is_empty() {
                return Err(format!("dead vertex {v} has present edges"));
            }
            for &e in &self.incidence[v] {
                if !self.present[e as usize] {
                    return Err(format!("vertex {v} lists deleted edge {e}"));
                }
                let [a, b] = self.ends[e as usize];
                if a as usize != v && b as usize != v {
                    return Err(format!("vertex {v} lists foreign edge {e}"));
                }
                seen[e as usize] += 1;
            }
        }
        let mut live = 0;
        for (e, &p) in self.present.iter().enumerate() {
            let want = if p { 2 } else { 0 };
            if seen[e] != want {
                return Err(format!("edge {e} listed {} times, expected {want}", seen[e]));
            }
            live += p as usize;
        }
        if live != self.live_edges {
            return Err(format!("live edge counter {} != {live}", self.live_edges));
        }
        Ok(())
    }

    /// Copy of the present edges on the same vertex set, all vertices neutral.
    pub fn skeleton(&self) -> ColouredGraph {
        let edges: Vec<_> = self.edges().map(|(_, u, v)| (u, v)).collect();
        ColouredGraph::from_edges(self.n(), &edges)
    }
}

fn remove_one(list: &mut Vec<EdgeId>, e: EdgeId) {
    if let Some(i) = list.iter().position(|&x| x == e) {
        list.swap_remove(i);
    }
}

// ============================================================================
// Girth and short cycles
// ============================================================================

/// Reusable BFS buffers for shortest-cycle queries.
struct CycleFinder {
    dist: Vec<u32>,
    branch: Vec<u32>,
    parent_edge: Vec<u32>,
    touched: Vec<VertexId>,
    queue: VecDeque<VertexId>,
}

impl CycleFinder {
    fn new(n: usize) -> Self {
        CycleFinder {
            dist: vec![NONE; n],
            branch: vec![NONE; n],
            parent_edge: vec![NONE; n],
            touched: Vec::new(),
            queue: VecDeque::new(),
        }
    }

    /// Length of a shortest cycle through `root`, searching only cycles of
    /// length at most `limit`.
    fn shortest_through(&mut self, g: &ColouredGraph, root: VertexId, limit: u32) -> Option<u32> {
        for &t in &self.touched {
            self.dist[t as usize] = NONE;
        }
        self.touched.clear();
        self.queue.clear();
        let depth_cap = limit / 2;
        self.dist[root as usize] = 0;
        self.branch[root as usize] = NONE;
        self.parent_edge[root as usize] = NONE;
        self.touched.push(root);
        self.queue.push_back(root);
        let mut best = u32::MAX;
        while let Some(x) = self.queue.pop_front() {
            let dx = self.dist[x as usize];
            // Every cycle still to be found from here has length at least 2*dx.
            if 2 * dx >= best {
                break;
            }
            for (e, y) in g.neighbours(x) {
                if y == x {
                    if x == root {
                        best = best.min(1);
                    }
                    continue;
                }
                if self.dist[y as usize] == NONE {
                    if dx < depth_cap {
                        self.dist[y as usize] = dx + 1;
                        self.branch[y as usize] = if x == root { e } else { self.branch[x as usize] };
                        self.parent_edge[y as usize] = e;
                        self.touched.push(y);
                        self.queue.push_back(y);
                    }
                    continue;
                }
                if self.parent_edge[y as usize] == e || self.parent_edge[x as usize] == e {
                    continue;
                }
                if self.branch[x as usize] != self.branch[y as usize] {
                    best = best.min(dx + self.dist[y as usize] + 1);
                }
            }
        }
        (best <= limit).then_some(best)
    }
}

/// Shortest cycle length over present edges; loops give 1, parallel edges 2.
pub fn girth(g: &ColouredGraph) -> Girth {
    let mut finder = CycleFinder::new(g.n());
    let mut best = u32::MAX;
    for v in 0..g.n() as VertexId {
        let limit = if best == u32::MAX { u32::MAX - 1 } else { best - 1 };
        if let Some(c) = finder.shortest_through(g, v, limit) {
            best = best.min(c);
        }
        if best == 1 {
            break;
        }
    }
    if best == u32::MAX {
        Girth::Infinite
    } else {
        Girth::Finite(best)
    }
}

/// True if some cycle has length at most `len`.
pub fn has_cycle_at_most(g: &ColouredGraph, len: u32) -> bool {
    let mut finder = CycleFinder::new(g.n());
    (0..g.n() as VertexId).any(|v| finder.shortest_through(g, v, len).is_some())
}

/// Number of vertices lying on at least one cycle of length at most `len`.
pub fn count_short_cycles(g: &ColouredGraph, len: u32) -> usize {
    let mut finder = CycleFinder::new(g.n());
    (0..g.n() as VertexId)
        .filter(|&v| finder.shortest_through(g, v, len).is_some())
        .count()
}

/// For each vertex, the length of a shortest cycle through it (if any).
pub fn cycle_lengths_through(g: &ColouredGraph) -> Vec<Option<u32>> {
    let mut finder = CycleFinder::new(g.n());
    (0..g.n() as VertexId)
        .map(|v| finder.shortest_through(g, v, u32::MAX - 1))
        .collect()
}

// ============================================================================
// Text formats
// ============================================================================

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphFormat {
    EdgeList,
    Lcf,
}

pub fn parse_graph(text: &str, format: GraphFormat) -> Result<ColouredGraph, GraphError> {
    match format {
        GraphFormat::EdgeList => parse_edge_list(text),
        GraphFormat::Lcf => parse_lcf(text),
    }
}

fn parse_edge_list(text: &str) -> Result<ColouredGraph, GraphError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| GraphError::MalformedHeader("empty input".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse_count = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| GraphError::MalformedHeader(header.to_string()))
    };
    if fields.len() != 2 {
        return Err(GraphError::MalformedHeader(header.to_string()));
    }
    let n = parse_count(fields[0])?;
    let m = parse_count(fields[1])?;
    if n > u32::MAX as usize - 1 {
        return Err(GraphError::MalformedHeader(header.to_string()));
    }
    let mut g = ColouredGraph::new(n);
    for (idx, line) in lines {
        let malformed = || GraphError::MalformedLine { line: idx + 1, text: line.to_string() };
        let ids: Vec<&str> = line.split_whitespace().collect();
        if ids.len() != 2 {
            return Err(malformed());
        }
        let mut ends = [0u32; 2];
        for (slot, s) in ends.iter_mut().zip(&ids) {
            let v: u64 = s.parse().map_err(|_| malformed())?;
            if v >= n as u64 {
                return Err(GraphError::VertexOutOfRange { vertex: v, n });
            }
            *slot = v as u32;
        }
        g.add_edge(ends[0], ends[1]);
    }
    if g.edge_count() != m {
        return Err(GraphError::MalformedHeader(format!(
            "header announces {m} edges but {} were listed",
            g.edge_count()
        )));
    }
    Ok(g)
}

/// Canonical edge-list text of the present edges, in edge id order.
pub fn serialize_edge_list(g: &ColouredGraph) -> String {
    let mut out = format!("{} {}\n", g.n(), g.edge_count());
    for (_, u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

/// Parses `[s_0,...,s_{k-1}]^m`: a Hamiltonian cycle on `k*m` vertices with
/// vertex `i` joined to `i + s_{i mod k}`.
fn parse_lcf(text: &str) -> Result<ColouredGraph, GraphError> {
    let bad = |why: &str| GraphError::OddLcfApplication(format!("{why}: {:?}", text.trim()));
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let open = t.find('[').ok_or_else(|| bad("missing '['"))?;
    let close = t.find(']').ok_or_else(|| bad("missing ']'"))?;
    if open != 0 || close < open {
        return Err(bad("malformed brackets"));
    }
    let shifts: Vec<i64> = t[1..close]
        .split(',')
        .map(|s| s.parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad("non-integer shift"))?;
    let rest = &t[close + 1..];
    let reps: usize = if rest.is_empty() {
        1
    } else {
        rest.strip_prefix('^')
            .ok_or_else(|| bad("expected '^'"))?
            .parse()
            .map_err(|_| bad("non-integer exponent"))?
    };
    let n = shifts.len() * reps;
    if n < 3 {
        return Err(bad("fewer than 3 vertices"));
    }
    let target = |i: usize| -> usize {
        let s = shifts[i % shifts.len()];
        (i as i64 + s).rem_euclid(n as i64) as usize
    };
    let mut g = ColouredGraph::new(n);
    for i in 0..n {
        g.add_edge(i as u32, ((i + 1) % n) as u32);
    }
    for i in 0..n {
        let j = target(i);
        if j == i {
            return Err(bad("shift is a multiple of the cycle length"));
        }
        if target(j) != i {
            return Err(bad("shifts do not pair up"));
        }
        if i < j {
            g.add_edge(i as u32, j as u32);
        }
    }
    Ok(g)
}

// ============================================================================
// Cage catalogue
// ============================================================================

struct CageEntry {
    name: &'static str,
    n: usize,
    girth: u32,
    lcf: Option<&'static str>,
}

const CAGES: &[CageEntry] = &[
    CageEntry { name: "petersen", n: 10, girth: 5, lcf: None },
    CageEntry { name: "heawood", n: 14, girth: 6, lcf: Some("[5,-5]^7") },
    CageEntry { name: "mcgee", n: 24, girth: 7, lcf: Some("[12,7,-7]^8") },
    CageEntry { name: "tutte-coxeter", n: 30, girth: 8, lcf: Some("[-13,-9,7,-7,9,13]^5") },
];

pub fn cage_names() -> Vec<&'static str> {
    CAGES.iter().map(|c| c.name).collect()
}

/// Recorded girth of a catalogue entry.
pub fn cage_girth(name: &str) -> Result<u32, GraphError> {
    CAGES
        .iter()
        .find(|c| c.name == name)
        .map(|c| c.girth)
        .ok_or_else(|| GraphError::UnknownName(name.to_string()))
}

/// Fresh copy of a catalogue graph, all vertices neutral.
///
/// # Panics
/// If a stored entry fails its simple / 3-regular / girth check.
pub fn cage(name: &str) -> Result<ColouredGraph, GraphError> {
    let entry = CAGES
        .iter()
        .find(|c| c.name == name)
        .ok_or_else(|| GraphError::UnknownName(name.to_string()))?;
    let g = match entry.lcf {
        Some(code) => parse_lcf(code)?,
        None => petersen(),
    };
    assert!(
        g.n() == entry.n && g.is_simple() && g.is_regular(3) && girth(&g) == Girth::Finite(entry.girth),
        "catalogue entry {name} is corrupt"
    );
    Ok(g)
}

fn petersen() -> ColouredGraph {
    let mut edges = Vec::new();
    for i in 0..5u32 {
        edges.push((i, (i + 1) % 5));
        edges.push((i, i + 5));
        edges.push((i + 5, (i + 2) % 5 + 5));
    }
    ColouredGraph::from_edges(10, &edges)
}

/// Simple graph families used by tests and the CLI.
pub mod families {
    use super::{ColouredGraph, VertexId};

    pub fn cycle(n: usize) -> ColouredGraph {
        let edges: Vec<_> = (0..n as VertexId).map(|i| (i, (i + 1) % n as VertexId)).collect();
        ColouredGraph::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> ColouredGraph {
        let edges: Vec<_> = (1..n as VertexId).map(|i| (i - 1, i)).collect();
        ColouredGraph::from_edges(n, &edges)
    }

    pub fn star(leaves: usize) -> ColouredGraph {
        let edges: Vec<_> = (1..=leaves as VertexId).map(|i| (0, i)).collect();
        ColouredGraph::from_edges(leaves + 1, &edges)
    }

    pub fn complete(n: usize) -> ColouredGraph {
        let mut edges = Vec::new();
        for i in 0..n as VertexId {
            for j in i + 1..n as VertexId {
                edges.push((i, j));
            }
        }
        ColouredGraph::from_edges(n, &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::families::*;
    use super::*;

    #[test]
    fn triangle_and_tree_girth() {
        assert_eq!(girth(&cycle(3)), Girth::Finite(3));
        assert_eq!(girth(&path(6)), Girth::Infinite);
        assert_eq!(girth(&star(4)), Girth::Infinite);
    }

    #[test]
    fn loops_and_parallel_edges() {
        let g = ColouredGraph::from_edges(3, &[(0, 1), (1, 2), (2, 2)]);
        assert_eq!(girth(&g), Girth::Finite(1));
        assert_eq!(g.degree(2), 3);
        let g = ColouredGraph::from_edges(3, &[(0, 1), (1, 0), (1, 2)]);
        assert_eq!(girth(&g), Girth::Finite(2));
        assert_eq!(count_short_cycles(&g, 2), 2);
    }

    #[test]
    fn cycle_counts() {
        assert_eq!(count_short_cycles(&path(8), 10), 0);
        assert_eq!(count_short_cycles(&cycle(5), 5), 5);
        assert_eq!(count_short_cycles(&cycle(5), 4), 0);
    }

    #[test]
    fn kill_removes_edges() {
        let mut g = complete(4);
        g.kill(0, OutputColour(1));
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.degree(1), 2);
        assert!(!g.is_alive(0));
        g.audit().unwrap();
        let mut g = ColouredGraph::from_edges(2, &[(0, 0), (0, 1)]);
        assert_eq!(g.degree(0), 3);
        g.kill(0, OutputColour(2));
        assert_eq!(g.degree(1), 0);
        g.audit().unwrap();
    }

    #[test]
    fn edge_list_examples() {
        let g = parse_graph("3 3\n0 1\n1 2\n2 0", GraphFormat::EdgeList).unwrap();
        assert_eq!(girth(&g), Girth::Finite(3));
        let g = parse_graph("2 0", GraphFormat::EdgeList).unwrap();
        assert_eq!((g.n(), g.edge_count()), (2, 0));
        assert!(matches!(
            parse_graph("3 x\n", GraphFormat::EdgeList),
            Err(GraphError::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_graph("3 1\n0 3\n", GraphFormat::EdgeList),
            Err(GraphError::VertexOutOfRange { vertex: 3, n: 3 })
        ));
        assert!(matches!(
            parse_graph("3 2\n0 1\n", GraphFormat::EdgeList),
            Err(GraphError::MalformedHeader(_))
        ));
    }

    #[test]
    fn lcf_codes() {
        let k33 = parse_graph("[3,-3]^3", GraphFormat::Lcf).unwrap();
        assert!(k33.is_simple() && k33.is_regular(3));
        assert_eq!(girth(&k33), Girth::Finite(4));
        // Shifts of +-5 on six vertices land on cycle neighbours: doubled edges.
        let doubled = parse_graph("[5,-5]^3", GraphFormat::Lcf).unwrap();
        assert!(doubled.is_regular(3));
        assert_eq!(girth(&doubled), Girth::Finite(2));
        assert!(matches!(
            parse_graph("[2]^5", GraphFormat::Lcf),
            Err(GraphError::OddLcfApplication(_))
        ));
    }

    #[test]
    fn catalogue_entries() {
        for name in cage_names() {
            let g = cage(name).unwrap();
            assert_eq!(girth(&g), Girth::Finite(cage_girth(name).unwrap()));
        }
        let p = cage("petersen").unwrap();
        assert_eq!((p.n(), p.edge_count()), (10, 15));
        assert_eq!(count_short_cycles(&p, 5), 10);
        assert_eq!(cage("mcgee").unwrap().n(), 24);
        assert_eq!(cage("tutte-coxeter").unwrap().n(), 30);
        assert!(matches!(cage("k4"), Err(GraphError::UnknownName(_))));
    }
}
