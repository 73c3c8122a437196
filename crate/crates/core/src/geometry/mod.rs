//! Cones, shadows, umbrae and hulls, and their classification by canonical
//! forms of labelled subgraphs.
//!
//! The cone over `v` is every word ending in `v`. The shadow of a horizontal
//! set `V` is the union of the cones over its members; the umbra is the part
//! of the shadow at distance more than one from its complement. Shadows are
//! only ever handled through membership tests and truncated materializations.

pub mod canon;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

pub use canon::{canonical_form, CanonicalForm, LabelledGraph};

use crate::complex::Complex;
use crate::error::{Error, Result};
use crate::word::Word;

/// Label of vertical edges, which run from `xw` down to `w`.
pub const VERTICAL_LABEL: u32 = 1 << 16;

/// A nonempty set of words of one common length.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct HorizontalSet {
    level: usize,
    words: BTreeSet<Word>,
}

impl HorizontalSet {
    pub fn new(words: impl IntoIterator<Item = Word>) -> Result<Self> {
        let words: BTreeSet<Word> = words.into_iter().collect();
        let level = words.iter().next().ok_or(Error::InvalidHorizontalSet)?.len();
        if words.iter().any(|w| w.len() != level) {
            return Err(Error::InvalidHorizontalSet);
        }
        Ok(HorizontalSet { level, words })
    }

    pub fn singleton(w: Word) -> Self {
        HorizontalSet { level: w.len(), words: BTreeSet::from([w]) }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn words(&self) -> &BTreeSet<Word> {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.words.contains(w)
    }

    /// `V^{[-i]}`: every member with its first `i` letters removed.
    pub fn push_down(&self, i: usize) -> Result<HorizontalSet> {
        let words = self.words.iter().map(|w| w.push_down(i)).collect::<Result<BTreeSet<_>>>()?;
        Ok(HorizontalSet { level: self.level - i, words })
    }

    /// Largest horizontal distance between two members.
    pub fn diameter(&self, c: &Complex) -> Result<usize> {
        let mut best = 0;
        for u in &self.words {
            for v in &self.words {
                if u < v {
                    best = best.max(c.horizontal_distance(u, v)?);
                }
            }
        }
        Ok(best)
    }
}

/// `u ∈ S(V)`: the suffix of `u` of length `|V|` lies in `V`.
pub fn shadow_contains(v: &HorizontalSet, u: &Word) -> bool {
    u.len() >= v.level() && v.contains(&u.push_down(u.len() - v.level()).unwrap())
}

/// `u ∈ U(V)`: `u` is in the shadow strictly above `V` and so are all of
/// its horizontal neighbors. Vertical neighbors of such a vertex are in the
/// shadow automatically.
pub fn umbra_contains(c: &Complex, v: &HorizontalSet, u: &Word) -> bool {
    u.len() > v.level()
        && shadow_contains(v, u)
        && c.neighbors(u.letters()).into_iter().all(|w| shadow_contains(v, &Word::new(w)))
}

/// Shadow vertices on levels `|V|..=|V| + depth`.
pub fn shadow_vertices(v: &HorizontalSet, depth: usize, degree: usize) -> BTreeSet<Word> {
    let mut out = BTreeSet::new();
    for k in 0..=depth {
        for prefix in Word::all(k, degree) {
            for w in v.words() {
                out.insert(prefix.concat(w.letters()));
            }
        }
    }
    out
}

/// Graph distance from `x` to the nearest vertex accepted by `target`,
/// which returns the cost of climbing from a vertex into the set, if any.
/// Normal-form paths go down, then across, then up, so it suffices to scan
/// horizontal balls around the push-downs of `x`.
fn distance_to(c: &Complex, x: &Word, target: impl Fn(&Word) -> Option<usize>) -> usize {
    let mut best = usize::MAX;
    for l in (0..=x.len()).rev() {
        let down = x.len() - l;
        if down >= best {
            break;
        }
        let start = x.push_down(down).unwrap();
        let mut seen: BTreeSet<Vec<u8>> = BTreeSet::from([start.letters().to_vec()]);
        let mut frontier = vec![start.letters().to_vec()];
        let mut h = 0;
        while down + h < best && !frontier.is_empty() {
            let mut next = Vec::new();
            for w in &frontier {
                if let Some(up) = target(&Word::new(w.clone())) {
                    best = best.min(down + h + up);
                }
            }
            for w in &frontier {
                for n in c.neighbors(w) {
                    if seen.insert(n.clone()) {
                        next.push(n);
                    }
                }
            }
            frontier = next;
            h += 1;
        }
    }
    best
}

/// Graph distance from `x` to `S(V)`.
pub fn distance_to_shadow(c: &Complex, v: &HorizontalSet, x: &Word) -> usize {
    let n = v.level();
    distance_to(c, x, |z| {
        if z.len() >= n {
            shadow_contains(v, z).then_some(0)
        } else {
            v.words().iter().any(|w| w.has_suffix(z)).then(|| n - z.len())
        }
    })
}

/// Graph distance from `x` to the complement of `S(V)`.
pub fn distance_to_complement(c: &Complex, v: &HorizontalSet, x: &Word) -> usize {
    distance_to(c, x, |z| (!shadow_contains(v, z)).then_some(0))
}

/// Induced labelled subgraph on `vertices`: horizontal edges `u -> u^s`
/// labelled by the generator (one per inverse pair) and unlabelled vertical
/// edges `xw -> w`. `color` gives initial vertex colors.
pub fn induced_graph(c: &Complex, vertices: &[Word], color: impl Fn(&Word) -> u32) -> LabelledGraph {
    let index: HashMap<&Word, u32> = vertices.iter().enumerate().map(|(i, w)| (w, i as u32)).collect();
    let reps = c.structure().gens.pair_representatives();
    let mut g = LabelledGraph::new(vertices.len());
    let mut img = Vec::new();
    for (i, w) in vertices.iter().enumerate() {
        g.colors[i] = color(w);
        for (label, &s) in reps.iter().enumerate() {
            c.structure().automaton().act(s, w.letters(), &mut img);
            if let Some(&j) = index.get(&Word::new(img.clone())) {
                g.edges.push((i as u32, j, label as u32));
            }
        }
        if !w.is_empty() {
            if let Some(&j) = index.get(&w.push_down(1).unwrap()) {
                g.edges.push((i as u32, j, VERTICAL_LABEL));
            }
        }
    }
    g
}

/// Connected components of the induced subcomplex on `set`, in order of
/// their smallest member.
pub fn induced_components(c: &Complex, set: &BTreeSet<Word>) -> Vec<BTreeSet<Word>> {
    let mut seen: BTreeSet<&Word> = BTreeSet::new();
    let mut out = Vec::new();
    for start in set {
        if seen.contains(start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        seen.insert(start);
        while let Some(w) = queue.pop_front() {
            let mut nbrs: Vec<Word> = c.neighbors(w.letters()).into_iter().map(Word::new).collect();
            if !w.is_empty() {
                nbrs.push(w.push_down(1).unwrap());
            }
            for x in 0..c.degree() as u8 {
                nbrs.push(w.prepend(x));
            }
            for n in nbrs {
                if let Some(m) = set.get(&n) {
                    if seen.insert(m) {
                        queue.push_back(n);
                    }
                }
            }
            comp.insert(w);
        }
        out.push(comp);
    }
    out
}

/// The `D`-hull: layer `i` is the horizontal `HΣ`-neighborhood of `V^{[-i]}`
/// for `i = 0..=⌈D/2⌉`.
#[derive(Clone, Debug, Serialize)]
pub struct Hull {
    pub base: HorizontalSet,
    pub d: usize,
    pub hsigma: usize,
    /// `layers[i]` lies on level `|V| - i`.
    pub layers: Vec<BTreeSet<Word>>,
}

impl Hull {
    pub fn vertices(&self) -> Vec<Word> {
        self.layers.iter().flat_map(|l| l.iter().cloned()).collect()
    }

    pub fn contains(&self, w: &Word) -> bool {
        let top = self.base.level();
        w.len() <= top && top - w.len() < self.layers.len() && self.layers[top - w.len()].contains(w)
    }

    pub fn vertex_count(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelTypes {
    pub level: usize,
    pub count: usize,
    pub cumulative: usize,
    pub new_type_hashes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TypeEnumeration {
    pub hsigma: usize,
    pub levels: Vec<LevelTypes>,
}

impl TypeEnumeration {
    /// True when the last `k` levels added no new types.
    pub fn stable_over(&self, k: usize) -> bool {
        self.levels.len() >= k && self.levels.iter().rev().take(k).all(|l| l.new_type_hashes.is_empty())
    }
}

/// Geometry relative to a fixed `HΣ` parameter.
pub struct Geometry<'a> {
    pub complex: &'a Complex,
    pub hsigma: usize,
}

impl<'a> Geometry<'a> {
    pub fn new(complex: &'a Complex, hsigma: usize) -> Self {
        Geometry { complex, hsigma }
    }

    pub fn hull(&self, v: &HorizontalSet, d: usize) -> Result<Hull> {
        let depth = d.div_ceil(2);
        if v.level() < depth {
            return Err(Error::LevelTooSmall { needed: depth, level: v.level() });
        }
        let mut layers = Vec::with_capacity(depth + 1);
        for i in 0..=depth {
            let pushed = v.push_down(i)?;
            let centers = pushed.words().iter().map(|w| w.letters().to_vec());
            layers.push(self.complex.horizontal_ball_of_set(centers, self.hsigma));
        }
        Ok(Hull { base: v.clone(), d, hsigma: self.hsigma, layers })
    }

    /// The labelled ball `B_hor(v, HΣ)` pointed at `v`.
    pub fn cone_type(&self, v: &Word) -> CanonicalForm {
        let ball: Vec<Word> = self.complex.horizontal_ball(v.letters(), self.hsigma).into_iter().collect();
        canonical_form(&induced_graph(self.complex, &ball, |w| (w == v) as u32))
    }

    pub fn enumerate_cone_types(&self, levels: std::ops::RangeInclusive<usize>) -> Result<TypeEnumeration> {
        let d = self.complex.degree();
        let mut seen: BTreeMap<String, String> = BTreeMap::new();
        let mut out = Vec::new();
        for n in levels {
            self.complex.build_level_graph(n)?;
            let words: Vec<Word> = Word::all(n, d).collect();
            let forms: BTreeSet<CanonicalForm> = words.par_iter().map(|w| self.cone_type(w)).collect();
            let mut fresh = Vec::new();
            for f in &forms {
                if !seen.contains_key(&f.text) {
                    seen.insert(f.text.clone(), f.hash.clone());
                    fresh.push(f.hash.clone());
                }
            }
            fresh.sort();
            out.push(LevelTypes { level: n, count: forms.len(), cumulative: seen.len(), new_type_hashes: fresh });
        }
        Ok(TypeEnumeration { hsigma: self.hsigma, levels: out })
    }

    /// Canonical form of the hull's induced subgraph with `V` marked.
    pub fn shadow_type(&self, v: &HorizontalSet, d: usize) -> Result<CanonicalForm> {
        let hull = self.hull(v, d)?;
        Ok(canonical_form(&induced_graph(self.complex, &hull.vertices(), |w| v.contains(w) as u32)))
    }

    /// Shadow types of radius-`r` balls around every vertex of the given
    /// levels, with `D = 2r`.
    pub fn enumerate_shadow_types(&self, r: usize, levels: std::ops::RangeInclusive<usize>) -> Result<TypeEnumeration> {
        let d = self.complex.degree();
        let mut seen: BTreeMap<String, String> = BTreeMap::new();
        let mut out = Vec::new();
        for n in levels {
            self.complex.build_level_graph(n)?;
            let words: Vec<Word> = Word::all(n, d).collect();
            let forms = words
                .par_iter()
                .map(|w| {
                    let ball = HorizontalSet::new(self.complex.horizontal_ball(w.letters(), r))?;
                    self.shadow_type(&ball, 2 * r)
                })
                .collect::<Result<BTreeSet<CanonicalForm>>>()?;
            let mut fresh = Vec::new();
            for f in &forms {
                if !seen.contains_key(&f.text) {
                    seen.insert(f.text.clone(), f.hash.clone());
                    fresh.push(f.hash.clone());
                }
            }
            fresh.sort();
            out.push(LevelTypes { level: n, count: forms.len(), cumulative: seen.len(), new_type_hashes: fresh });
        }
        Ok(TypeEnumeration { hsigma: self.hsigma, levels: out })
    }

    pub fn hull_dot(&self, hull: &Hull) -> String {
        let verts = hull.vertices();
        let g = induced_graph(self.complex, &verts, |_| 0);
        let names = self.complex.structure().gens.pair_representatives();
        let mut out = String::from("digraph hull {\n");
        for w in &verts {
            if hull.base.contains(w) {
                let _ = writeln!(out, "  \"{w}\" [style=filled];");
            } else {
                let _ = writeln!(out, "  \"{w}\";");
            }
        }
        for &(u, v, l) in &g.edges {
            let (a, b) = (&verts[u as usize], &verts[v as usize]);
            if l >= VERTICAL_LABEL {
                let _ = writeln!(out, "  \"{b}\" -> \"{a}\" [style=dashed, dir=none];");
            } else {
                let name = &self.complex.structure().gens.names[names[l as usize]];
                let _ = writeln!(out, "  \"{a}\" -> \"{b}\" [label=\"{name}\"];");
            }
        }
        out.push_str("}\n");
        out
    }
}
