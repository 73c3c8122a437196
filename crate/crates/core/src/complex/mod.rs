//! Finite pieces of the self-similarity complex and its metric.
//!
//! Vertices are words. Horizontal edges join `w` and `w^s` for `s` in the
//! good generating set, vertical edges join `w` and `xw`. Geodesics can be
//! taken in normal form: down, across one level, up. So the distance of two
//! vertices is a minimum over the level of the horizontal part.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::automaton::Structure;
use crate::error::{Error, Result};
use crate::word::Word;

pub const DEFAULT_VERTEX_BUDGET: usize = 2_000_000;
/// Levels with at most this many vertices get an all-pairs distance table.
pub const APSP_LIMIT: usize = 2048;
const MAX_CACHED_LEVEL: usize = 64;

/// One level of the complex: the Schreier graph on `X^n`. Vertex `i` is the
/// word `Word::from_index(i, n, d)`.
#[derive(Clone, Debug)]
pub struct LevelGraph {
    pub level: usize,
    pub degree: usize,
    /// Generator names, indexed by edge label.
    pub labels: Vec<String>,
    /// Directed labelled edges `u -> u^s`, one per inverse pair of generators.
    pub edges: Vec<(u32, u32, u16)>,
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl LevelGraph {
    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn word(&self, i: usize) -> Word {
        Word::from_index(i, self.level, self.degree)
    }

    /// Distinct neighbors of `i`, loops removed.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn bfs(&self, from: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.vertex_count()];
        let mut queue = VecDeque::from([from]);
        dist[from] = 0;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if dist[v as usize] == u32::MAX {
                    dist[v as usize] = dist[u] + 1;
                    queue.push_back(v as usize);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.bfs(0).iter().all(|&d| d != u32::MAX)
    }

    pub fn to_dot(&self) -> String {
        let mut out = format!("digraph level_{} {{\n", self.level);
        for i in 0..self.vertex_count() {
            let _ = writeln!(out, "  \"{}\";", self.word(i));
        }
        for &(u, v, s) in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{}\"];",
                self.word(u as usize),
                self.word(v as usize),
                self.labels[s as usize]
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Drop levels of the distance-realizing normal-form geodesics between two
/// vertices, with the horizontal length used at each.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Geodesic {
    pub distance: usize,
    /// `(level, horizontal length)`, highest level first.
    pub realizing: Vec<(usize, usize)>,
}

impl Geodesic {
    pub fn max_level(&self) -> usize {
        self.realizing[0].0
    }

    pub fn min_level(&self) -> usize {
        self.realizing.last().unwrap().0
    }

    pub fn min_horizontal(&self) -> usize {
        self.realizing.iter().map(|r| r.1).min().unwrap()
    }

    pub fn max_horizontal(&self) -> usize {
        self.realizing.iter().map(|r| r.1).max().unwrap()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelHSigma {
    pub level: usize,
    pub pairs: u64,
    pub exhaustive: bool,
    /// Longest horizontal path at this level that is a geodesic of the complex.
    pub max_horizontal_geodesic: usize,
    /// Largest, over pairs, of the shortest horizontal part among the
    /// distance-realizing normal-form geodesics.
    pub max_min_horizontal: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct HSigmaReport {
    pub value: usize,
    pub min_horizontal_value: usize,
    pub stabilized: bool,
    pub per_level: Vec<LevelHSigma>,
    pub sampling: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaReport {
    pub delta: f64,
    pub samples: usize,
    pub max_level: usize,
    pub seed: u64,
}

pub struct Complex {
    st: Arc<Structure>,
    budget: usize,
    graphs: Vec<OnceLock<Arc<LevelGraph>>>,
    apsp: Vec<OnceLock<Arc<Vec<u16>>>>,
}

impl Complex {
    pub fn new(st: Arc<Structure>) -> Self {
        Self::with_budget(st, DEFAULT_VERTEX_BUDGET)
    }

    pub fn with_budget(st: Arc<Structure>, budget: usize) -> Self {
        Complex {
            st,
            budget,
            graphs: (0..MAX_CACHED_LEVEL).map(|_| OnceLock::new()).collect(),
            apsp: (0..MAX_CACHED_LEVEL).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn structure(&self) -> &Structure {
        &self.st
    }

    pub fn shared_structure(&self) -> Arc<Structure> {
        self.st.clone()
    }

    pub fn degree(&self) -> usize {
        self.st.degree()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn generator_names(&self) -> &[String] {
        &self.st.gens.names
    }

    /// Number of vertices on level `n`, if within the budget.
    pub fn level_size(&self, n: usize) -> Result<usize> {
        let size = (self.degree() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if size > self.budget as u128 {
            return Err(Error::LevelTooLarge { level: n, vertices: size, budget: self.budget });
        }
        Ok(size as usize)
    }

    /// `w^s` for generator `s` of the good generating set.
    pub fn image(&self, s: usize, w: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(w.len());
        self.st.automaton().act(s, w, &mut out);
        out
    }

    /// Distinct horizontal neighbors of `w`, excluding `w` itself.
    pub fn neighbors(&self, w: &[u8]) -> Vec<Vec<u8>> {
        let mut out: Vec<Vec<u8>> = Vec::with_capacity(self.st.gens.len());
        for s in 0..self.st.gens.len() {
            let img = self.image(s, w);
            if img != w && !out.contains(&img) {
                out.push(img);
            }
        }
        out
    }

    pub fn build_level_graph(&self, n: usize) -> Result<Arc<LevelGraph>> {
        let size = self.level_size(n)?;
        if n < MAX_CACHED_LEVEL {
            if let Some(g) = self.graphs[n].get() {
                return Ok(g.clone());
            }
        }
        let d = self.degree();
        let gens = &self.st.gens;
        let reps = gens.pair_representatives();
        let per_vertex: Vec<(Vec<(u32, u32, u16)>, Vec<u32>)> = (0..size)
            .into_par_iter()
            .map(|i| {
                let w = Word::from_index(i, n, d);
                let mut out = Vec::with_capacity(n);
                let mut edges = Vec::with_capacity(reps.len());
                let mut nbrs: Vec<u32> = Vec::with_capacity(gens.len());
                for s in 0..gens.len() {
                    self.st.automaton().act(s, w.letters(), &mut out);
                    let j = Word::new(out.clone()).index(d) as u32;
                    if reps.contains(&s) {
                        edges.push((i as u32, j, reps.iter().position(|&r| r == s).unwrap() as u16));
                    }
                    if j as usize != i {
                        nbrs.push(j);
                    }
                }
                nbrs.sort_unstable();
                nbrs.dedup();
                (edges, nbrs)
            })
            .collect();
        let mut edges = Vec::new();
        let mut offsets = Vec::with_capacity(size + 1);
        let mut targets = Vec::new();
        offsets.push(0u32);
        for (e, t) in per_vertex {
            edges.extend(e);
            targets.extend(t);
            offsets.push(targets.len() as u32);
        }
        let labels = reps.iter().map(|&s| gens.names[s].clone()).collect();
        let graph = Arc::new(LevelGraph { level: n, degree: d, labels, edges, offsets, targets });
        if n < MAX_CACHED_LEVEL {
            let _ = self.graphs[n].set(graph.clone());
        }
        Ok(graph)
    }

    /// All-pairs horizontal distances at level `n` when the level is small.
    fn apsp(&self, n: usize) -> Option<Arc<Vec<u16>>> {
        if n >= MAX_CACHED_LEVEL {
            return None;
        }
        let size = (self.degree() as u128).checked_pow(n as u32)?;
        if size > APSP_LIMIT as u128 {
            return None;
        }
        let table = self.apsp[n].get_or_init(|| {
            let g = self.build_level_graph(n).expect("small level fits the budget");
            let size = g.vertex_count();
            let rows: Vec<Vec<u16>> = (0..size)
                .into_par_iter()
                .map(|i| g.bfs(i).into_iter().map(|d| d.min(u16::MAX as u32) as u16).collect())
                .collect();
            Arc::new(rows.concat())
        });
        Some(table.clone())
    }

    /// Horizontal distance if it is at most `limit`.
    pub fn horizontal_distance_within(&self, u: &[u8], v: &[u8], limit: usize) -> Option<usize> {
        debug_assert_eq!(u.len(), v.len());
        if u == v {
            return Some(0);
        }
        if limit == 0 {
            return None;
        }
        let d = self.degree();
        if let Some(table) = self.apsp(u.len()) {
            let size = d.pow(u.len() as u32);
            let i = Word::new(u.to_vec()).index(d);
            let j = Word::new(v.to_vec()).index(d);
            let dist = table[i * size + j] as usize;
            return (dist <= limit).then_some(dist);
        }
        self.bidirectional_bfs(u, v, limit)
    }

    fn bidirectional_bfs(&self, u: &[u8], v: &[u8], limit: usize) -> Option<usize> {
        let mut dist_u: HashMap<Vec<u8>, usize> = HashMap::from([(u.to_vec(), 0)]);
        let mut dist_v: HashMap<Vec<u8>, usize> = HashMap::from([(v.to_vec(), 0)]);
        let mut front_u = vec![u.to_vec()];
        let mut front_v = vec![v.to_vec()];
        let (mut ru, mut rv) = (0usize, 0usize);
        while ru + rv < limit && !front_u.is_empty() && !front_v.is_empty() {
            let grow_u = front_u.len() <= front_v.len();
            let (front, own, other, r) = if grow_u {
                (&mut front_u, &mut dist_u, &dist_v, &mut ru)
            } else {
                (&mut front_v, &mut dist_v, &dist_u, &mut rv)
            };
            *r += 1;
            let mut next = Vec::new();
            let mut best: Option<usize> = None;
            for w in front.iter() {
                for x in self.neighbors(w) {
                    if own.contains_key(&x) {
                        continue;
                    }
                    if let Some(&o) = other.get(&x) {
                        let total = *r + o;
                        best = Some(best.map_or(total, |b: usize| b.min(total)));
                    }
                    own.insert(x.clone(), *r);
                    next.push(x);
                }
            }
            if let Some(b) = best {
                return (b <= limit).then_some(b);
            }
            *front = next;
        }
        None
    }

    pub fn horizontal_distance(&self, u: &Word, v: &Word) -> Result<usize> {
        if u.len() != v.len() {
            return Err(Error::DifferentLevels(u.len(), v.len()));
        }
        self.level_size(u.len())?;
        Ok(self.horizontal_distance_within(u.letters(), v.letters(), usize::MAX).expect("levels are connected"))
    }

    /// `B_hor(center, r)`: vertices of the same level within horizontal distance `r`.
    pub fn horizontal_ball(&self, center: &[u8], r: usize) -> BTreeSet<Word> {
        self.horizontal_ball_of_set(std::iter::once(center.to_vec()), r)
    }

    pub fn horizontal_ball_of_set(&self, centers: impl IntoIterator<Item = Vec<u8>>, r: usize) -> BTreeSet<Word> {
        let mut seen: BTreeSet<Vec<u8>> = BTreeSet::new();
        let mut frontier: Vec<Vec<u8>> = Vec::new();
        for c in centers {
            if seen.insert(c.clone()) {
                frontier.push(c);
            }
        }
        for _ in 0..r {
            let mut next = Vec::new();
            for w in &frontier {
                for x in self.neighbors(w) {
                    if seen.insert(x.clone()) {
                        next.push(x);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        seen.into_iter().map(Word::new).collect()
    }

    /// Normal-form geodesics between `u` and `v`. With `hcap`, horizontal
    /// parts longer than the cap are not considered; this is exact whenever
    /// the cap is at least the longest horizontal geodesic.
    pub fn geodesic(&self, u: &[u8], v: &[u8], hcap: Option<usize>) -> Geodesic {
        let (a, b) = (u.len(), v.len());
        let m = a.min(b);
        let mut best = a + b;
        let mut realizing: Vec<(usize, usize)> = Vec::new();
        for l in (0..=m).rev() {
            let vert = (a - l) + (b - l);
            if vert > best {
                break;
            }
            let limit = (best - vert).min(hcap.unwrap_or(usize::MAX));
            let (su, sv) = (&u[a - l..], &v[b - l..]);
            if let Some(h) = self.horizontal_distance_within(su, sv, limit) {
                let total = vert + h;
                if total < best {
                    best = total;
                    realizing.clear();
                }
                if total == best {
                    realizing.push((l, h));
                }
            }
        }
        Geodesic { distance: best, realizing }
    }

    pub fn graph_distance(&self, u: &Word, v: &Word) -> usize {
        self.geodesic(u.letters(), v.letters(), None).distance
    }

    /// Level of the horizontal part of a realizing normal-form geodesic;
    /// the highest such level is returned.
    pub fn level_product(&self, u: &Word, v: &Word) -> usize {
        self.geodesic(u.letters(), v.letters(), None).max_level()
    }

    pub fn gromov_product(&self, u: &Word, v: &Word) -> f64 {
        let d = self.graph_distance(u, v);
        (u.len() + v.len() - d) as f64 / 2.0
    }

    /// Estimates the longest horizontal geodesic over levels `0..=max_level`.
    /// Levels with an all-pairs table are scanned exhaustively; larger
    /// levels scan every pair within a horizontal ball around `samples`
    /// random centers.
    pub fn estimate_hsigma(&self, max_level: usize, samples: usize, seed: u64) -> Result<HSigmaReport> {
        let d = self.degree();
        let mut per_level = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut running = 0usize;
        let mut running_min = 0usize;
        let mut sampled_any = false;
        for n in 0..=max_level {
            let size = self.level_size(n)?;
            let (pairs, exhaustive, max_h, max_min) = if self.apsp(n).is_some() {
                let stats: Vec<(usize, usize)> = (0..size)
                    .into_par_iter()
                    .map(|i| {
                        let u = Word::from_index(i, n, d);
                        let mut acc = (0usize, 0usize);
                        for j in 0..size {
                            let v = Word::from_index(j, n, d);
                            let g = self.geodesic(u.letters(), v.letters(), None);
                            if g.realizing[0].0 == n {
                                acc.0 = acc.0.max(g.realizing[0].1);
                            }
                            acc.1 = acc.1.max(g.min_horizontal());
                        }
                        acc
                    })
                    .collect();
                let max_h = stats.iter().map(|s| s.0).max().unwrap_or(0);
                let max_min = stats.iter().map(|s| s.1).max().unwrap_or(0);
                ((size * size) as u64, true, max_h, max_min)
            } else {
                sampled_any = true;
                let radius = running + 2;
                let centers: Vec<Word> =
                    (0..samples).map(|_| Word::from_index(rng.gen_range(0..size), n, d)).collect();
                let stats: Vec<(u64, usize, usize)> = centers
                    .par_iter()
                    .map(|u| {
                        let mut acc = (0u64, 0usize, 0usize);
                        for v in self.horizontal_ball(u.letters(), radius) {
                            let g = self.geodesic(u.letters(), v.letters(), None);
                            acc.0 += 1;
                            if g.realizing[0].0 == n {
                                acc.1 = acc.1.max(g.realizing[0].1);
                            }
                            acc.2 = acc.2.max(g.min_horizontal());
                        }
                        acc
                    })
                    .collect();
                let pairs = stats.iter().map(|s| s.0).sum();
                let max_h = stats.iter().map(|s| s.1).max().unwrap_or(0);
                let max_min = stats.iter().map(|s| s.2).max().unwrap_or(0);
                (pairs, false, max_h, max_min)
            };
            running = running.max(max_h);
            running_min = running_min.max(max_min);
            per_level.push(LevelHSigma {
                level: n,
                pairs,
                exhaustive,
                max_horizontal_geodesic: max_h,
                max_min_horizontal: max_min,
            });
        }
        let tail: Vec<usize> = per_level.iter().rev().take(3).map(|l| l.max_horizontal_geodesic).collect();
        let stabilized = tail.len() == 3 && tail.iter().all(|&h| h == running);
        let sampling = if sampled_any {
            format!("exhaustive up to {APSP_LIMIT} vertices per level, then all pairs within horizontal radius HΣ+2 of {samples} seeded random centers")
        } else {
            "exhaustive".to_string()
        };
        Ok(HSigmaReport { value: running, min_horizontal_value: running_min, stabilized, per_level, sampling })
    }

    /// Largest four-point defect over random quadruples of vertices at
    /// levels up to `max_level`. A lower bound for the hyperbolicity constant.
    pub fn estimate_delta(&self, samples: usize, max_level: usize, hcap: Option<usize>, seed: u64) -> DeltaReport {
        let d = self.degree();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let quads: Vec<[Word; 4]> = (0..samples)
            .map(|_| {
                std::array::from_fn(|_| {
                    let n = rng.gen_range(0..=max_level);
                    let letters = (0..n).map(|_| rng.gen_range(0..d) as u8).collect();
                    Word::new(letters)
                })
            })
            .collect();
        let delta = quads
            .par_iter()
            .map(|q| {
                let dist = |i: usize, j: usize| self.geodesic(q[i].letters(), q[j].letters(), hcap).distance;
                four_point_defect(dist(0, 1) + dist(2, 3), dist(0, 2) + dist(1, 3), dist(0, 3) + dist(1, 2))
            })
            .reduce(|| 0.0, f64::max);
        DeltaReport { delta, samples, max_level, seed }
    }

    /// DOT text for levels `0..=n` with dashed vertical edges.
    pub fn slice_dot(&self, n: usize) -> Result<String> {
        let d = self.degree();
        let mut out = String::from("digraph complex {\n");
        for level in 0..=n {
            let g = self.build_level_graph(level)?;
            for i in 0..g.vertex_count() {
                let _ = writeln!(out, "  \"{}\";", g.word(i));
            }
            for &(u, v, s) in &g.edges {
                let _ = writeln!(
                    out,
                    "  \"{}\" -> \"{}\" [label=\"{}\"];",
                    g.word(u as usize),
                    g.word(v as usize),
                    g.labels[s as usize]
                );
            }
            if level > 0 {
                for w in Word::all(level, d) {
                    let below = w.push_down(1)?;
                    let _ = writeln!(out, "  \"{below}\" -> \"{w}\" [style=dashed, dir=none];");
                }
            }
        }
        out.push_str("}\n");
        Ok(out)
    }
}

/// Half the gap between the largest and second largest of three pair sums.
pub fn four_point_defect(s1: usize, s2: usize, s3: usize) -> f64 {
    let mut s = [s1, s2, s3];
    s.sort_unstable();
    (s[2] - s[1]) as f64 / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::builtin_group;

    fn complex(name: &str) -> Complex {
        Complex::new(Arc::new(Structure::new(builtin_group(name).unwrap()).unwrap()))
    }

    fn w(s: &str) -> Word {
        Word::parse(s).unwrap()
    }

    #[test]
    fn odometer_levels_are_cycles() {
        let c = complex("odometer");
        for n in 1..=6 {
            let g = c.build_level_graph(n).unwrap();
            assert_eq!(g.labels, vec!["a"]);
            assert_eq!(g.edges.len(), 1 << n);
            // Following the a-edges from 0 visits every vertex once.
            let next: HashMap<u32, u32> = g.edges.iter().map(|&(u, v, _)| (u, v)).collect();
            let mut seen = BTreeSet::new();
            let mut cur = 0u32;
            for _ in 0..(1 << n) {
                assert!(seen.insert(cur));
                cur = next[&cur];
            }
            assert_eq!(cur, 0);
        }
    }

    #[test]
    fn level_zero_has_only_loops() {
        let c = complex("grigorchuk");
        let g = c.build_level_graph(0).unwrap();
        assert_eq!(g.vertex_count(), 1);
        assert!(g.edges.iter().all(|&(u, v, _)| u == 0 && v == 0));
        assert_eq!(g.edges.len(), 4);
    }

    #[test]
    fn grigorchuk_level_one() {
        let c = complex("grigorchuk");
        let g = c.build_level_graph(1).unwrap();
        for &(u, v, s) in &g.edges {
            if g.labels[s as usize] == "a" {
                assert_ne!(u, v);
            } else {
                assert_eq!(u, v);
            }
        }
        assert_eq!(g.edges.iter().filter(|e| e.0 != e.1).count(), 2);
    }

    #[test]
    fn odometer_distances() {
        let c = complex("odometer");
        assert_eq!(c.horizontal_distance(&w("00"), &w("00")).unwrap(), 0);
        assert_eq!(c.horizontal_distance(&w("00"), &w("10")).unwrap(), 1);
        assert_eq!(c.horizontal_distance(&w("00"), &w("01")).unwrap(), 2);
        assert!(matches!(c.horizontal_distance(&w("0"), &w("01")), Err(Error::DifferentLevels(1, 2))));
        assert_eq!(c.graph_distance(&w("00"), &w("01")), 2);
        assert_eq!(c.graph_distance(&w("10"), &w("11")), 2);
        assert_eq!(c.graph_distance(&Word::root(), &w("0110")), 4);
        assert_eq!(c.level_product(&w("00"), &w("01")), 2);
        assert_eq!(c.gromov_product(&w("00"), &w("01")), 1.0);
    }

    #[test]
    fn bidirectional_search_matches_tables() {
        let c = complex("basilica");
        for u in Word::all(6, 2) {
            for v in Word::all(6, 2).step_by(7) {
                let table = c.horizontal_distance_within(u.letters(), v.letters(), usize::MAX);
                let search = c.bidirectional_bfs(u.letters(), v.letters(), usize::MAX);
                if u == v {
                    assert_eq!(table, Some(0));
                } else {
                    assert_eq!(table, search, "{u} {v}");
                }
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let c = Complex::with_budget(Arc::new(Structure::new(builtin_group("odometer").unwrap()).unwrap()), 100);
        assert!(matches!(c.build_level_graph(7), Err(Error::LevelTooLarge { level: 7, .. })));
    }

    #[test]
    fn degenerate_quadruple() {
        assert_eq!(four_point_defect(4, 4, 4), 0.0);
        assert_eq!(four_point_defect(2, 6, 4), 1.0);
    }
}
