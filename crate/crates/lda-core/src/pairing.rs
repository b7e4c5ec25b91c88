//! The pairing (configuration) model: points in buckets, lazily or eagerly
//! matched, plus rejection sampling of simple and girth-constrained regular
//! graphs.
//!
//! Exposure has the independence property: the mate of a point is uniform
//! over the points still unexposed, whatever happened before.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph_core::{girth, has_cycle_at_most, ColouredGraph, Girth};

pub type PointId = u32;

const UNEXPOSED: u32 = u32::MAX;

/// Deterministic random stream: ChaCha8 keyed by `seed` (expanded through
/// `SeedableRng::seed_from_u64`) on stream `stream_id`. The output for a given
/// `(seed, stream_id)` is identical on every platform.
#[derive(Clone, Debug)]
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng::split(seed, 0)
    }

    /// Independent child stream `stream_id` of `seed`.
    pub fn split(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Rng(inner)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PairingError {
    #[error("total number of points {0} is odd")]
    OddPointCount(usize),
    #[error("point {0} is already exposed")]
    AlreadyExposed(PointId),
    #[error("no unexposed point is left to pair with {0}")]
    NoPointsLeft(PointId),
    /// `acceptance_rate` is the observed fraction of simple pseudographs.
    #[error("{tries} tries exhausted (simple rate {acceptance_rate:.3e})")]
    TriesExhausted { tries: usize, acceptance_rate: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

/// `M = Σ r_i` points in `n` buckets, with a partial perfect matching.
#[derive(Clone, Debug)]
pub struct Pairing {
    bucket_of: Vec<u32>,
    first_point: Vec<u32>,
    mate: Vec<u32>,
    pool: Vec<PointId>,
    pool_pos: Vec<u32>,
    free: Vec<u32>,
}

impl Pairing {
    /// Pairing with every point unexposed; pairs are generated on demand.
    pub fn new(degrees: &[u32]) -> Result<Pairing, PairingError> {
        let total: usize = degrees.iter().map(|&d| d as usize).sum();
        if total % 2 == 1 {
            return Err(PairingError::OddPointCount(total));
        }
        let mut bucket_of = Vec::with_capacity(total);
        let mut first_point = Vec::with_capacity(degrees.len() + 1);
        for (b, &d) in degrees.iter().enumerate() {
            first_point.push(bucket_of.len() as u32);
            bucket_of.extend(std::iter::repeat_n(b as u32, d as usize));
        }
        first_point.push(total as u32);
        Ok(Pairing {
            bucket_of,
            first_point,
            mate: vec![UNEXPOSED; total],
            pool: (0..total as u32).collect(),
            pool_pos: (0..total as u32).collect(),
            free: degrees.to_vec(),
        })
    }

    pub fn points(&self) -> usize {
        self.bucket_of.len()
    }

    pub fn buckets(&self) -> usize {
        self.free.len()
    }

    pub fn bucket_of(&self, p: PointId) -> u32 {
        self.bucket_of[p as usize]
    }

    pub fn points_of(&self, bucket: u32) -> std::ops::Range<PointId> {
        self.first_point[bucket as usize]..self.first_point[bucket as usize + 1]
    }

    /// Number of unexposed points in `bucket`.
    pub fn free_in(&self, bucket: u32) -> u32 {
        self.free[bucket as usize]
    }

    pub fn unexposed(&self) -> usize {
        self.pool.len()
    }

    pub fn mate(&self, p: PointId) -> Option<PointId> {
        let m = self.mate[p as usize];
        (m != UNEXPOSED).then_some(m)
    }

    fn take_from_pool(&mut self, p: PointId) {
        let i = self.pool_pos[p as usize] as usize;
        let last = *self.pool.last().expect("pool is non-empty");
        self.pool[i] = last;
        self.pool_pos[last as usize] = i as u32;
        self.pool.pop();
        self.free[self.bucket_of[p as usize] as usize] -= 1;
    }

    /// Pairs `point` with a uniformly random other unexposed point.
    pub fn expose_mate(&mut self, point: PointId, rng: &mut Rng) -> Result<PointId, PairingError> {
        if self.mate[point as usize] != UNEXPOSED {
            return Err(PairingError::AlreadyExposed(point));
        }
        if self.pool.len() < 2 {
            return Err(PairingError::NoPointsLeft(point));
        }
        self.take_from_pool(point);
        let q = self.pool[rng.gen_range(0..self.pool.len())];
        self.take_from_pool(q);
        self.mate[point as usize] = q;
        self.mate[q as usize] = point;
        Ok(q)
    }

    /// Some unexposed point of `bucket`, if any.
    pub fn unexposed_point_of(&self, bucket: u32) -> Option<PointId> {
        if self.free[bucket as usize] == 0 {
            return None;
        }
        self.points_of(bucket).find(|&p| self.mate[p as usize] == UNEXPOSED)
    }

    /// Exposes every remaining pair, lowest unexposed point first.
    pub fn expose_all(&mut self, rng: &mut Rng) {
        for p in 0..self.points() as PointId {
            if self.mate[p as usize] == UNEXPOSED {
                self.expose_mate(p, rng).expect("even number of points");
            }
        }
    }

    /// Exposed pairs `(p, q)` with `p < q`, ordered by `p`.
    pub fn pairs(&self) -> Vec<(PointId, PointId)> {
        (0..self.points() as PointId)
            .filter_map(|p| self.mate(p).filter(|&q| p < q).map(|q| (p, q)))
            .collect()
    }

    /// Pseudograph on the buckets with one edge per exposed pair, in the order of `pairs()`.
    pub fn to_pseudograph(&self) -> ColouredGraph {
        let edges: Vec<_> = self
            .pairs()
            .into_iter()
            .map(|(p, q)| (self.bucket_of(p), self.bucket_of(q)))
            .collect();
        ColouredGraph::from_edges(self.buckets(), &edges)
    }
}

/// Uniform perfect matching on the points, fully exposed.
pub fn random_pairing(degrees: &[u32], rng: &mut Rng) -> Result<Pairing, PairingError> {
    let mut p = Pairing::new(degrees)?;
    p.expose_all(rng);
    Ok(p)
}

fn check_regular_params(n: usize, r: u32) -> Result<(), PairingError> {
    if (n * r as usize) % 2 == 1 {
        return Err(PairingError::OddPointCount(n * r as usize));
    }
    if n <= r as usize {
        return Err(PairingError::InvalidParameters(format!("need n > r, got n={n}, r={r}")));
    }
    Ok(())
}

pub const DEFAULT_SIMPLE_TRIES: usize = 1000;
pub const DEFAULT_GIRTH_TRIES: usize = 1_000_000;

/// Uniform simple `r`-regular graph by rejection from the pairing model.
pub fn sample_simple_regular(
    n: usize,
    r: u32,
    rng: &mut Rng,
    max_tries: usize,
) -> Result<ColouredGraph, PairingError> {
    sample_with_min_girth_report(n, r, 3, rng, max_tries).map(|(g, _)| g)
}

/// Uniform simple `r`-regular graph with girth at least `g`, by rejection.
pub fn sample_with_min_girth(
    n: usize,
    r: u32,
    g: u32,
    rng: &mut Rng,
    max_tries: usize,
) -> Result<ColouredGraph, PairingError> {
    sample_with_min_girth_report(n, r, g, rng, max_tries).map(|(graph, _)| graph)
}

/// Counters from a rejection-sampling run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub tries: usize,
    /// Tries whose pseudograph was simple.
    pub simple: usize,
}

/// As [`sample_with_min_girth`], also reporting how many tries were needed.
pub fn sample_with_min_girth_report(
    n: usize,
    r: u32,
    g: u32,
    rng: &mut Rng,
    max_tries: usize,
) -> Result<(ColouredGraph, RejectionReport), PairingError> {
    check_regular_params(n, r)?;
    let degrees = vec![r; n];
    let mut report = RejectionReport::default();
    while report.tries < max_tries {
        report.tries += 1;
        let graph = random_pairing(&degrees, rng)?.to_pseudograph();
        if !graph.is_simple() {
            continue;
        }
        report.simple += 1;
        if g <= 3 || !has_cycle_at_most(&graph, g - 1) {
            debug_assert!(g <= 3 || girth(&graph) >= Girth::Finite(g));
            return Ok((graph, report));
        }
    }
    let acceptance_rate = report.simple as f64 / report.tries.max(1) as f64;
    Err(PairingError::TriesExhausted { tries: report.tries, acceptance_rate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| Rng::split(7, 3).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut x = Rng::split(7, 3);
        let mut y = Rng::split(7, 4);
        assert_ne!(x.next_u64(), y.next_u64());
    }

    #[test]
    fn odd_points_rejected() {
        assert_eq!(Pairing::new(&[3, 2]).unwrap_err(), PairingError::OddPointCount(5));
        assert_eq!(Pairing::new(&[]).unwrap().points(), 0);
    }

    #[test]
    fn exposure_errors() {
        let mut rng = Rng::new(1);
        let mut p = Pairing::new(&[1, 1]).unwrap();
        assert_eq!(p.expose_mate(0, &mut rng).unwrap(), 1);
        assert_eq!(p.expose_mate(1, &mut rng), Err(PairingError::AlreadyExposed(1)));
        let mut p = Pairing::new(&[2]).unwrap();
        p.expose_mate(0, &mut rng).unwrap();
        let mut q = Pairing::new(&[1, 1]).unwrap();
        q.take_from_pool(1);
        q.mate[1] = 1;
        assert_eq!(q.expose_mate(0, &mut rng), Err(PairingError::NoPointsLeft(0)));
        assert_eq!(p.pairs(), vec![(0, 1)]);
    }

    #[test]
    fn full_pairing_is_involution() {
        let mut rng = Rng::new(3);
        let p = random_pairing(&[3; 10], &mut rng).unwrap();
        for x in 0..30 {
            let m = p.mate(x).unwrap();
            assert_ne!(m, x);
            assert_eq!(p.mate(m), Some(x));
        }
        assert_eq!(p.unexposed(), 0);
        assert_eq!(p.to_pseudograph().edge_count(), 15);
    }

    #[test]
    fn k4_is_the_only_cubic_graph_on_four_vertices() {
        let mut rng = Rng::new(5);
        for _ in 0..20 {
            let g = sample_simple_regular(4, 3, &mut rng, DEFAULT_SIMPLE_TRIES).unwrap();
            assert!(g.is_simple() && g.is_regular(3) && g.edge_count() == 6);
        }
        assert!(matches!(
            sample_simple_regular(3, 3, &mut rng, 10),
            Err(PairingError::OddPointCount(9))
        ));
    }
}
