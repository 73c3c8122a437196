//! The shift map `F`, which deletes the last letter of a word, and the
//! finiteness statements about its iterates: pullbacks of balls, bounded
//! degree, stabilizer orbits, and the empirical catalogue of model maps.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::automaton::{ElemId, Structure};
use crate::complex::Complex;
use crate::error::{Error, Result};
use crate::geometry::{canonical_form, induced_graph, CanonicalForm, Geometry, HorizontalSet, LabelledGraph};
use crate::word::Word;

/// Label of the edges recording `u -> F^k(u)` in an encoded map.
pub const MAP_LABEL: u32 = 1 << 17;

/// `F^{-k}(v)`: every word `v w` with `|w| = k`.
pub fn vertex_preimages(v: &Word, k: usize, degree: usize) -> Vec<Word> {
    Word::all(k, degree).map(|w| v.concat(w.letters())).collect()
}

/// One connected piece of `F^{-k}(V)`.
#[derive(Clone, Debug, Serialize)]
pub struct PullbackComponent {
    pub vertices: BTreeSet<Word>,
    /// Preimages of the base points lying in this piece.
    pub marked: BTreeSet<Word>,
}

/// Components of the induced subcomplex on `F^{-k}(V)`, with the preimages
/// of `base ⊆ V` in each. Horizontal adjacency pushes down, so components
/// of the pulled-back shadow are determined on the level of `F^{-k}(V)`.
pub fn pullback_components(c: &Complex, v: &HorizontalSet, base: &HorizontalSet, k: usize) -> Vec<PullbackComponent> {
    let d = c.degree();
    let set: BTreeSet<Word> = v.words().iter().flat_map(|u| vertex_preimages(u, k, d)).collect();
    let mut seen: HashSet<&Word> = HashSet::new();
    let mut out = Vec::new();
    for start in &set {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(w) = queue.pop_front() {
            for n in c.neighbors(w.letters()) {
                if let Some(m) = set.get(&Word::new(n)) {
                    if seen.insert(m) {
                        queue.push_back(m.clone());
                    }
                }
            }
            comp.insert(w);
        }
        let marked = comp.iter().filter(|w| base.contains(&w.shift(k).unwrap())).cloned().collect();
        out.push(PullbackComponent { vertices: comp, marked });
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeCell {
    pub level: usize,
    pub k: usize,
    /// Largest number of preimages of a ball center in one component.
    pub max_marked: usize,
    /// Largest horizontal diameter of such a preimage set.
    pub max_marked_diameter: usize,
    pub max_components: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundedDegreeReport {
    pub r: usize,
    pub cells: Vec<DegreeCell>,
    /// First level from which the per-level maximum is constant over three
    /// consecutive levels.
    pub stable_from: Option<usize>,
    pub rule: String,
    /// `C` and `D` over the levels from `stable_from` on.
    pub c_observed: usize,
    pub d_observed: usize,
    /// `C` per iterate over the stable levels.
    pub c_by_k: Vec<(usize, usize)>,
    pub constant_in_k: bool,
    pub diameter_bound: usize,
    pub within_bound: bool,
}

/// `(2r+1)(C+1)`.
pub fn diameter_bound(r: usize, c: usize) -> usize {
    (2 * r + 1) * (c + 1)
}

fn cell(c: &Complex, r: usize, level: usize, k: usize) -> Result<DegreeCell> {
    let d = c.degree();
    c.level_size(level + k)?;
    let per_vertex = Word::all(level, d)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|v| {
            let ball = HorizontalSet::new(c.horizontal_ball(v.letters(), r))?;
            let comps = pullback_components(c, &ball, &HorizontalSet::singleton(v.clone()), k);
            let mut best = (0, 0, comps.len());
            for comp in &comps {
                let tilde: Vec<&Word> = comp.marked.iter().collect();
                let mut diam = 0;
                for (i, a) in tilde.iter().enumerate() {
                    for b in &tilde[i + 1..] {
                        diam = diam.max(c.horizontal_distance(a, b)?);
                    }
                }
                best.0 = best.0.max(tilde.len());
                best.1 = best.1.max(diam);
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = DegreeCell { level, k, max_marked: 0, max_marked_diameter: 0, max_components: 0 };
    for (m, diam, n) in per_vertex {
        out.max_marked = out.max_marked.max(m);
        out.max_marked_diameter = out.max_marked_diameter.max(diam);
        out.max_components = out.max_components.max(n);
    }
    Ok(out)
}

/// Pulls back every radius-`r` ball at the given levels by `F^k`.
pub fn bounded_degree_stats(
    c: &Complex,
    r: usize,
    levels: std::ops::RangeInclusive<usize>,
    ks: std::ops::RangeInclusive<usize>,
) -> Result<BoundedDegreeReport> {
    let mut cells = Vec::new();
    for n in levels.clone() {
        for k in ks.clone() {
            cells.push(cell(c, r, n, k)?);
        }
    }
    let per_level: Vec<(usize, usize)> = levels
        .clone()
        .map(|n| (n, cells.iter().filter(|x| x.level == n).map(|x| x.max_marked).max().unwrap_or(0)))
        .collect();
    let stable_from = per_level.windows(3).find(|w| w[0].1 == w[1].1 && w[1].1 == w[2].1).map(|w| w[0].0);
    let deep: Vec<&DegreeCell> = cells.iter().filter(|x| stable_from.is_some_and(|s| x.level >= s)).collect();
    let c_observed = deep.iter().map(|x| x.max_marked).max().unwrap_or(0);
    let d_observed = deep.iter().map(|x| x.max_marked_diameter).max().unwrap_or(0);
    let c_by_k: Vec<(usize, usize)> =
        ks.map(|k| (k, deep.iter().filter(|x| x.k == k).map(|x| x.max_marked).max().unwrap_or(0))).collect();
    // k = 0 always has a single preimage; constancy is asked of the iterates.
    let iterates: Vec<usize> = c_by_k.iter().filter(|(k, _)| *k > 0).map(|x| x.1).collect();
    let constant_in_k = stable_from.is_some() && iterates.windows(2).all(|w| w[0] == w[1]);
    let bound = diameter_bound(r, c_observed);
    let within_bound = stable_from.is_some() && deep.iter().all(|x| x.max_marked_diameter < bound);
    Ok(BoundedDegreeReport {
        r,
        cells,
        stable_from,
        rule: "first level after which the maximum over k is constant for 3 consecutive levels".into(),
        c_observed,
        d_observed,
        c_by_k,
        constant_in_k,
        diameter_bound: bound,
        within_bound,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitReport {
    pub v: Word,
    pub w: Word,
    pub radius: usize,
    /// `#(Stab(v) ∩ B_G(1, L))`.
    pub q: usize,
    pub nucleus_size: usize,
    pub orbit_size: usize,
    pub bound: u128,
    /// Whether `|v| ≥ m((N+1)L)` is certified, using the halving bound on
    /// the magic level when the ball is too large to enumerate.
    pub hypothesis: bool,
    pub magic_level: usize,
    pub magic_level_exact: bool,
    pub pass: bool,
}

/// `1 + q + ... + q^e`.
pub fn geometric_sum(q: usize, e: usize) -> u128 {
    let mut total: u128 = 0;
    let mut term: u128 = 1;
    for _ in 0..=e {
        total = total.saturating_add(term);
        term = term.saturating_mul(q as u128);
    }
    total
}

/// Elements of `B_G(1, L)` fixing `v`.
pub fn stabilizer_in_ball(st: &Structure, v: &Word, radius: usize) -> Result<Vec<ElemId>> {
    let ball = st.group_ball(radius)?;
    let mut out: Vec<ElemId> =
        ball.iter().filter(|(g, _)| st.group.act_id(g.id, v.letters()) == v.letters()).map(|(g, _)| g.id).collect();
    out.sort_unstable();
    Ok(out)
}

/// Orbit of `vw` under the subgroup generated by `Stab(v) ∩ B_G(1, L)`.
pub fn stabilizer_orbit(st: &Structure, v: &Word, radius: usize, w: &Word) -> Result<OrbitReport> {
    let h = stabilizer_in_ball(st, v, radius)?;
    let start = v.concat(w.letters());
    let mut seen: BTreeSet<Vec<u8>> = BTreeSet::from([start.letters().to_vec()]);
    let mut queue = VecDeque::from([start.letters().to_vec()]);
    while let Some(x) = queue.pop_front() {
        for &g in &h {
            let y = st.group.act_id(g, &x);
            if seen.insert(y.clone()) {
                queue.push_back(y);
            }
        }
    }
    let n = st.nucleus.len();
    let (magic, exact) = st.magic_level_bound((n + 1) * radius)?;
    let bound = geometric_sum(h.len(), n + 1);
    let hypothesis = radius >= 1 && v.len() >= magic;
    let orbit_size = seen.len();
    Ok(OrbitReport {
        v: v.clone(),
        w: w.clone(),
        radius,
        q: h.len(),
        nucleus_size: n,
        orbit_size,
        bound,
        hypothesis,
        magic_level: magic,
        magic_level_exact: exact,
        pass: !hypothesis || (orbit_size as u128) <= bound,
    })
}

/// Encodes `F^k: hull(Ṽ, D) -> hull(V, D)` as one labelled graph: the two
/// hulls side by side, colored by side and by membership in `Ṽ` or `V`, plus
/// an edge from each source vertex to its image.
pub fn iterate_graph(geom: &Geometry, tilde: &HorizontalSet, v: &HorizontalSet, k: usize, d: usize) -> Result<LabelledGraph> {
    if tilde.level() != v.level() + k {
        return Err(Error::NotAnIterate { k });
    }
    let image: BTreeSet<Word> = tilde.words().iter().map(|w| w.shift(k).unwrap()).collect();
    if &image != v.words() {
        return Err(Error::NotAnIterate { k });
    }
    let source = geom.hull(tilde, d)?.vertices();
    let target = geom.hull(v, d)?.vertices();
    let mut g = induced_graph(geom.complex, &source, |w| 2 + tilde.contains(w) as u32);
    let offset = g.append(&induced_graph(geom.complex, &target, |w| 4 + v.contains(w) as u32));
    let index: HashMap<&Word, u32> = target.iter().enumerate().map(|(i, w)| (w, i as u32 + offset)).collect();
    for (i, w) in source.iter().enumerate() {
        if let Some(&j) = index.get(&w.shift(k).unwrap()) {
            g.edges.push((i as u32, j, MAP_LABEL));
        }
    }
    Ok(g)
}

pub fn iterate_type(geom: &Geometry, tilde: &HorizontalSet, v: &HorizontalSet, k: usize, d: usize) -> Result<CanonicalForm> {
    Ok(canonical_form(&iterate_graph(geom, tilde, v, k, d)?))
}

/// Largest fiber of `F^k` restricted to `tilde`.
pub fn local_map_degree(tilde: &HorizontalSet, k: usize) -> usize {
    let mut fibers: BTreeMap<Word, usize> = BTreeMap::new();
    for w in tilde.words() {
        *fibers.entry(w.shift(k).unwrap()).or_default() += 1;
    }
    fibers.into_values().max().unwrap_or(0)
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelMap {
    pub hash: String,
    pub first_seen: (usize, usize),
    pub degree: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DynatlasCell {
    pub level: usize,
    pub k: usize,
    pub forms: usize,
    pub new_forms: usize,
    pub cumulative: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DynatlasReport {
    pub r: usize,
    pub hsigma: usize,
    pub hull_d: usize,
    pub bases: Bases,
    pub levels: (usize, usize),
    pub ks: (usize, usize),
    pub forms: Vec<ModelMap>,
    pub cells: Vec<DynatlasCell>,
    pub p: usize,
    /// No new forms during the final two values of `k`.
    pub stabilized: bool,
}

/// Base vertices of a dynatlas run: every vertex of the level, or a seeded
/// sample of them.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum Bases {
    All,
    Sample { count: usize, seed: u64 },
}

fn base_vertices(level: usize, degree: usize, bases: Bases) -> Vec<Word> {
    match bases {
        Bases::All => Word::all(level, degree).collect(),
        Bases::Sample { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ level as u64);
            let size = degree.pow(level as u32);
            let mut picked: BTreeSet<usize> = BTreeSet::new();
            while picked.len() < count.min(size) {
                picked.insert(rng.gen_range(0..size));
            }
            picked.into_iter().map(|i| Word::from_index(i, level, degree)).collect()
        }
    }
}

/// Catalogue of iterate forms over all pullback components of radius-`r`
/// balls, in the order `k` first, then level.
pub fn build_dynatlas(
    geom: &Geometry,
    r: usize,
    levels: std::ops::RangeInclusive<usize>,
    ks: std::ops::RangeInclusive<usize>,
    hull_d: usize,
    bases: Bases,
) -> Result<DynatlasReport> {
    let c = geom.complex;
    let d = c.degree();
    let mut known: BTreeMap<String, usize> = BTreeMap::new();
    let mut forms: Vec<ModelMap> = Vec::new();
    let mut cells = Vec::new();
    let mut new_by_k: BTreeMap<usize, usize> = BTreeMap::new();
    for k in ks.clone() {
        for n in levels.clone() {
            c.level_size(n + k)?;
            let found = base_vertices(n, d, bases)
                .par_iter()
                .map(|v| {
                    let ball = HorizontalSet::new(c.horizontal_ball(v.letters(), r))?;
                    pullback_components(c, &ball, &ball, k)
                        .into_iter()
                        .map(|comp| {
                            let tilde = HorizontalSet::new(comp.vertices)?;
                            let form = iterate_type(geom, &tilde, &ball, k, hull_d)?;
                            Ok((form, local_map_degree(&tilde, k)))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let mut here: BTreeMap<CanonicalForm, usize> = BTreeMap::new();
            for (form, deg) in found.into_iter().flatten() {
                let e = here.entry(form).or_default();
                *e = (*e).max(deg);
            }
            let mut fresh = 0;
            for (form, deg) in &here {
                match known.get(&form.text) {
                    Some(&i) => forms[i].degree = forms[i].degree.max(*deg),
                    None => {
                        known.insert(form.text.clone(), forms.len());
                        forms.push(ModelMap { hash: form.hash.clone(), first_seen: (n, k), degree: *deg });
                        fresh += 1;
                    }
                }
            }
            *new_by_k.entry(k).or_default() += fresh;
            cells.push(DynatlasCell { level: n, k, forms: here.len(), new_forms: fresh, cumulative: forms.len() });
        }
    }
    let last: Vec<usize> = new_by_k.values().rev().take(2).copied().collect();
    let stabilized = last.len() == 2 && last.iter().all(|&x| x == 0);
    let p = forms.iter().map(|f| f.degree).max().unwrap_or(0);
    Ok(DynatlasReport {
        r,
        hsigma: geom.hsigma,
        hull_d,
        bases,
        levels: (*levels.start(), *levels.end()),
        ks: (*ks.start(), *ks.end()),
        forms,
        cells,
        p,
        stabilized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preimages_append_letters() {
        let v = Word::parse("0").unwrap();
        let pre: Vec<String> = vertex_preimages(&v, 1, 2).iter().map(|w| w.to_string()).collect();
        assert_eq!(pre, ["00", "01"]);
        assert_eq!(vertex_preimages(&v, 0, 2), vec![v.clone()]);
        assert_eq!(vertex_preimages(&v, 3, 2).len(), 8);
    }

    #[test]
    fn geometric_sums() {
        assert_eq!(geometric_sum(1, 4), 5);
        assert_eq!(geometric_sum(2, 3), 15);
        assert_eq!(geometric_sum(0, 3), 1);
    }
}
