//! Boundary points as eventually periodic vertical rays, the products that
//! compare them, the visual quasi-metric, and the local degrees of the
//! boundary map.
//!
//! A ray with letter sequence `x_1 x_2 ...` passes through the vertices
//! `R(t) = x_t ... x_1`: each step up prepends the next letter. The shift
//! map `F` drops `x_1`, so the preimages of a ray are the rays `y x_1 x_2 ...`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::complex::Complex;
use crate::error::{Error, Result};
use crate::geometry::{umbra_contains, HorizontalSet};
use crate::word::Word;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ray {
    preperiod: Vec<u8>,
    period: Vec<u8>,
}

impl Ray {
    pub fn new(preperiod: Vec<u8>, period: Vec<u8>) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::InvalidRay("the period must be nonempty".into()));
        }
        Ok(Ray { preperiod, period })
    }

    /// Parses `pre;per`, e.g. `1;0` for the sequence `1 0 0 0 ...`.
    pub fn parse(text: &str) -> Result<Self> {
        let cleaned: String = text.chars().filter(|c| *c != '"' && !c.is_whitespace()).collect();
        let (pre, per) =
            cleaned.split_once(';').ok_or_else(|| Error::InvalidRay(format!("expected pre;per, got {text:?}")))?;
        Ray::new(Word::parse(pre)?.into_letters(), Word::parse(per)?.into_letters())
    }

    pub fn preperiod(&self) -> &[u8] {
        &self.preperiod
    }

    pub fn period(&self) -> &[u8] {
        &self.period
    }

    pub fn check_alphabet(&self, degree: usize) -> Result<()> {
        Word::new(self.preperiod.clone()).check_alphabet(degree)?;
        Word::new(self.period.clone()).check_alphabet(degree)
    }

    /// The letter `x_t`, for `t ≥ 1`.
    pub fn letter(&self, t: usize) -> u8 {
        let i = t - 1;
        if i < self.preperiod.len() {
            self.preperiod[i]
        } else {
            self.period[(i - self.preperiod.len()) % self.period.len()]
        }
    }

    /// The vertex `R(t) = x_t ... x_1`.
    pub fn vertex(&self, t: usize) -> Word {
        Word::new((1..=t).rev().map(|i| self.letter(i)).collect())
    }

    /// Position in the letter sequence after `t` letters; equal phases have
    /// equal futures.
    fn phase(&self, t: usize) -> usize {
        if t < self.preperiod.len() {
            t
        } else {
            self.preperiod.len() + (t - self.preperiod.len()) % self.period.len()
        }
    }

    /// The ray `y x_1 x_2 ...`, one of the preimages under `F`.
    pub fn preimage(&self, y: u8) -> Ray {
        let mut pre = vec![y];
        pre.extend_from_slice(&self.preperiod);
        Ray { preperiod: pre, period: self.period.clone() }
    }

    /// The ray `x_2 x_3 ...`.
    pub fn image(&self) -> Ray {
        if self.preperiod.is_empty() {
            let mut period = self.period[1..].to_vec();
            period.push(self.period[0]);
            Ray { preperiod: Vec::new(), period }
        } else {
            Ray { preperiod: self.preperiod[1..].to_vec(), period: self.period.clone() }
        }
    }

    /// A ray through `v`: the letters of `v` read from the root, then `tail`
    /// forever.
    pub fn through(v: &Word, tail: Vec<u8>) -> Result<Ray> {
        Ray::new(v.letters().iter().rev().copied().collect(), tail)
    }
}

fn digits(w: &[u8]) -> String {
    w.iter().map(|x| char::from_digit(*x as u32, 36).unwrap()).collect()
}

impl fmt::Display for Ray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};{}", digits(&self.preperiod), digits(&self.period))
    }
}

impl Serialize for Ray {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// `|R1(t) - R2(t)| > 1`.
    Inequivalent { t: usize },
    /// The pair state seen at `t` had already occurred at `first`.
    Equivalent { first: usize, t: usize },
    Unknown { depth: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Divergence {
    At(usize),
    Infinite,
    Undecided,
}

/// Decides whether two rays stay within distance one. `H_t` is the set of
/// automaton states (identity and good generators) carrying `R1(t)` to
/// `R2(t)`; a state sends `x R1(t)` to `x' R2(t)` exactly when it sends `x`
/// to `x'` and its restriction at `x` lies in `H_t`.
pub fn rays_equivalent(c: &Complex, r1: &Ray, r2: &Ray, max_depth: usize) -> Verdict {
    let a = c.structure().automaton();
    let n = a.state_count();
    let mut h: Vec<bool> = vec![true; n];
    let mut seen: HashMap<(usize, usize, Vec<bool>), usize> = HashMap::new();
    for t in 0..=max_depth {
        if !h.iter().any(|&x| x) {
            return Verdict::Inequivalent { t };
        }
        if let Some(&first) = seen.get(&(r1.phase(t), r2.phase(t), h.clone())) {
            return Verdict::Equivalent { first, t };
        }
        seen.insert((r1.phase(t), r2.phase(t), h.clone()), t);
        if t == max_depth {
            break;
        }
        let (x1, x2) = (r1.letter(t + 1), r2.letter(t + 1));
        h = (0..n)
            .map(|s| {
                let (y, next) = a.step(s, x1);
                y == x2 && h[next]
            })
            .collect();
    }
    Verdict::Unknown { depth: max_depth }
}

/// The last time the rays are within distance one.
pub fn divergence_product(c: &Complex, r1: &Ray, r2: &Ray, max_depth: usize) -> Divergence {
    match rays_equivalent(c, r1, r2, max_depth) {
        Verdict::Inequivalent { t } => Divergence::At(t - 1),
        Verdict::Equivalent { .. } => Divergence::Infinite,
        Verdict::Unknown { .. } => Divergence::Undecided,
    }
}

/// `min(0.1, 1/(4(1 + m(HΣ))))`.
pub fn default_epsilon(magic: usize) -> f64 {
    (1.0 / (4.0 * (1.0 + magic as f64))).min(0.1)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VisualParams {
    pub epsilon: f64,
    /// Level at which products of inequivalent rays are evaluated.
    pub depth: usize,
    pub delta: f64,
    /// `100(δ + m(HΣ))`.
    pub c0: f64,
}

impl VisualParams {
    pub fn new(epsilon: f64, depth: usize, delta: f64, magic: usize) -> Self {
        VisualParams { epsilon, depth, delta, c0: 100.0 * (delta + magic as f64) }
    }

    /// Multiplicative constant of the quasi-ultrametric inequality.
    pub fn ultrametric_constant(&self) -> f64 {
        (self.epsilon * (self.delta + self.c0)).exp()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalDegree {
    pub ray: Ray,
    pub levels: (usize, usize),
    /// Largest fiber of `F` on the unit ball around `R(n+1)`.
    pub under: Vec<usize>,
    /// The same on the radius-two ball.
    pub over: Vec<usize>,
    pub degree: Option<usize>,
}

impl LocalDegree {
    pub fn value(&self) -> Result<usize> {
        self.degree.ok_or(Error::NotStabilized { from: self.levels.0, to: self.levels.1 })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PreimageClass {
    pub members: Vec<Ray>,
    pub degree: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PreimageClasses {
    pub ray: Ray,
    pub classes: Vec<PreimageClass>,
    pub degree_sum: usize,
    pub d: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiameterRow {
    pub t: usize,
    pub samples: usize,
    pub shadow_diameter: f64,
    pub umbra_diameter: f64,
    /// `diameter · exp(εt)`.
    pub shadow_ratio: f64,
    pub umbra_ratio: f64,
    /// `S(R, t+c) ⊆ U(R, t)` on the materialized levels.
    pub inclusion: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiameterReport {
    pub ray: Ray,
    pub params: VisualParams,
    pub c: usize,
    pub rows: Vec<DiameterRow>,
    /// Largest over smallest positive shadow ratio.
    pub band: f64,
    pub inclusion: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct UltrametricReport {
    pub constant: f64,
    pub triples: usize,
    pub violations: usize,
    pub worst_ratio: f64,
}

/// Outradius over inradius of a sampled set around its center, given the
/// distances from the center to sampled points inside and outside the set.
/// The inradius is clamped to the outradius.
pub fn roundness(inside: &[f64], outside: &[f64]) -> Result<f64> {
    let outer = inside.iter().copied().fold(0.0, f64::max);
    let inner = outside.iter().copied().fold(outer, f64::min);
    if inner <= 0.0 {
        return Err(Error::ZeroInradius);
    }
    Ok(outer / inner)
}

/// Boundary computations relative to an `HΣ` value and its magic level.
pub struct Boundary<'a> {
    pub complex: &'a Complex,
    pub hsigma: usize,
    /// An upper bound for `m(HΣ)`.
    pub magic: usize,
    pub magic_exact: bool,
}

impl<'a> Boundary<'a> {
    pub fn new(complex: &'a Complex, hsigma: usize) -> Result<Self> {
        let (magic, magic_exact) = complex.structure().magic_level_bound(hsigma)?;
        Ok(Boundary { complex, hsigma, magic, magic_exact })
    }

    pub fn default_epsilon(&self) -> f64 {
        default_epsilon(self.magic)
    }

    /// Level of the horizontal segment of a realizing normal-form geodesic,
    /// the highest one when several realize the distance.
    pub fn level_product(&self, u: &Word, v: &Word) -> usize {
        self.complex.geodesic(u.letters(), v.letters(), Some(self.hsigma)).max_level()
    }

    pub fn gromov_product(&self, u: &Word, v: &Word) -> f64 {
        let d = self.complex.geodesic(u.letters(), v.letters(), Some(self.hsigma)).distance;
        (u.len() + v.len() - d) as f64 / 2.0
    }

    pub fn visual_distance(&self, r1: &Ray, r2: &Ray, params: &VisualParams) -> Result<f64> {
        match rays_equivalent(self.complex, r1, r2, params.depth) {
            Verdict::Equivalent { .. } => Ok(0.0),
            Verdict::Unknown { depth } => Err(Error::UndecidedEquivalence(depth)),
            Verdict::Inequivalent { .. } => {
                let t = params.depth;
                let level = self.level_product(&r1.vertex(t), &r2.vertex(t));
                Ok((-params.epsilon * level as f64).exp())
            }
        }
    }

    fn largest_fiber(&self, center: &Word, radius: usize) -> usize {
        let mut fibers: HashMap<Word, usize> = HashMap::new();
        for u in self.complex.horizontal_ball(center.letters(), radius) {
            *fibers.entry(u.shift(1).unwrap()).or_default() += 1;
        }
        fibers.into_values().max().unwrap_or(0)
    }

    /// Local degree of the boundary map at `ray`, bracketed by the largest
    /// fibers of `F` on balls of radius one and two around `R(n+1)`. It is
    /// accepted when both agree over the last three levels.
    pub fn local_degree(&self, ray: &Ray, levels: std::ops::RangeInclusive<usize>) -> LocalDegree {
        let under: Vec<usize> = levels.clone().map(|n| self.largest_fiber(&ray.vertex(n + 1), 1)).collect();
        let over: Vec<usize> = levels.clone().map(|n| self.largest_fiber(&ray.vertex(n + 1), 2)).collect();
        let k = under.len();
        let degree = (k >= 3 && (k - 3..k).all(|i| under[i] == over[i] && under[i] == under[k - 1])).then(|| under[k - 1]);
        LocalDegree { ray: ray.clone(), levels: (*levels.start(), *levels.end()), under, over, degree }
    }

    /// The `d` candidate preimages of `ray`, grouped by equivalence, with
    /// the local degree of each class.
    pub fn preimage_classes(
        &self,
        ray: &Ray,
        max_depth: usize,
        levels: std::ops::RangeInclusive<usize>,
    ) -> Result<PreimageClasses> {
        let d = self.complex.degree();
        let candidates: Vec<Ray> = (0..d as u8).map(|y| ray.preimage(y)).collect();
        let mut class: Vec<usize> = (0..d).collect();
        for i in 0..d {
            for j in i + 1..d {
                match rays_equivalent(self.complex, &candidates[i], &candidates[j], max_depth) {
                    Verdict::Equivalent { .. } => {
                        let (from, to) = (class[j], class[i]);
                        for c in class.iter_mut() {
                            if *c == from {
                                *c = to;
                            }
                        }
                    }
                    Verdict::Inequivalent { .. } => {}
                    Verdict::Unknown { depth } => return Err(Error::UndecidedEquivalence(depth)),
                }
            }
        }
        let mut classes = Vec::new();
        for root in class.iter().copied().collect::<BTreeSet<_>>() {
            let members: Vec<Ray> = (0..d).filter(|&i| class[i] == root).map(|i| candidates[i].clone()).collect();
            let degree = self.local_degree(&members[0], levels.clone()).value()?;
            classes.push(PreimageClass { members, degree });
        }
        let degree_sum = classes.iter().map(|c| c.degree).sum();
        Ok(PreimageClasses { ray: ray.clone(), classes, degree_sum, d })
    }

    /// Boundary points of `S(R, t)`: every vertex of the shadow `extra`
    /// levels above `R(t)`, continued by each constant tail.
    fn shadow_samples(&self, ray: &Ray, t: usize, extra: usize) -> Result<Vec<(Word, Ray)>> {
        let d = self.complex.degree();
        let base = self.complex.horizontal_ball(ray.vertex(t).letters(), 1);
        let mut out = Vec::new();
        for v in &base {
            for prefix in Word::all(extra, d) {
                let u = prefix.concat(v.letters());
                for tail in 0..d as u8 {
                    out.push((u.clone(), Ray::through(&u, vec![tail])?));
                }
            }
        }
        Ok(out)
    }

    fn diameter(&self, points: &[&Ray], params: &VisualParams) -> Result<f64> {
        let pairs: Vec<(usize, usize)> =
            (0..points.len()).flat_map(|i| (i + 1..points.len()).map(move |j| (i, j))).collect();
        pairs
            .par_iter()
            .map(|&(i, j)| self.visual_distance(points[i], points[j], params))
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
    }

    /// Diameter proxies of the boundaries of `S(R,t)` and `U(R,t)` against
    /// `exp(-εt)`, and the inclusion `S(R,t+c) ⊆ U(R,t)` with `c = m(HΣ)+3`.
    pub fn diameter_report(
        &self,
        ray: &Ray,
        ts: std::ops::RangeInclusive<usize>,
        params: &VisualParams,
        extra: usize,
    ) -> Result<DiameterReport> {
        let c = self.magic + 3;
        let d = self.complex.degree();
        let mut rows = Vec::new();
        for t in ts {
            let samples = self.shadow_samples(ray, t, extra)?;
            let v = HorizontalSet::new(self.complex.horizontal_ball(ray.vertex(t).letters(), 1))?;
            let all: Vec<&Ray> = samples.iter().map(|(_, r)| r).collect();
            let umbra: Vec<&Ray> =
                samples.iter().filter(|(u, _)| umbra_contains(self.complex, &v, u)).map(|(_, r)| r).collect();
            let shadow_diameter = self.diameter(&all, params)?;
            let umbra_diameter = self.diameter(&umbra, params)?;
            let deep = self.complex.horizontal_ball(ray.vertex(t + c).letters(), 1);
            let mut inclusion = true;
            for w in &deep {
                for k in 0..=extra {
                    for prefix in Word::all(k, d) {
                        inclusion &= umbra_contains(self.complex, &v, &prefix.concat(w.letters()));
                    }
                }
            }
            let scale = (params.epsilon * t as f64).exp();
            rows.push(DiameterRow {
                t,
                samples: all.len(),
                shadow_diameter,
                umbra_diameter,
                shadow_ratio: shadow_diameter * scale,
                umbra_ratio: umbra_diameter * scale,
                inclusion,
            });
        }
        let ratios: Vec<f64> = rows.iter().map(|r| r.shadow_ratio).filter(|&x| x > 0.0).collect();
        let band = if ratios.len() == rows.len() && !ratios.is_empty() {
            ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            f64::INFINITY
        };
        let inclusion = rows.iter().all(|r| r.inclusion);
        Ok(DiameterReport { ray: ray.clone(), params: *params, c, rows, band, inclusion })
    }

    /// Roundness of the boundary of `U(R,t)` about `R`, sampled through the
    /// vertices `extra` levels up within horizontal distance 3 of the ray.
    pub fn umbra_roundness(&self, ray: &Ray, t: usize, extra: usize, params: &VisualParams) -> Result<f64> {
        let d = self.complex.degree();
        let v = HorizontalSet::new(self.complex.horizontal_ball(ray.vertex(t).letters(), 1))?;
        let (mut inside, mut outside) = (Vec::new(), Vec::new());
        for u in self.complex.horizontal_ball(ray.vertex(t + extra).letters(), 3) {
            for tail in 0..d as u8 {
                let point = Ray::through(&u, vec![tail])?;
                let dist = self.visual_distance(ray, &point, params)?;
                if umbra_contains(self.complex, &v, &u) {
                    inside.push(dist);
                } else {
                    outside.push(dist);
                }
            }
        }
        roundness(&inside, &outside)
    }

    /// Checks `ρ(ξ1,ξ3) ≤ K max(ρ(ξ1,ξ2), ρ(ξ2,ξ3))` on random triples of
    /// the given points.
    pub fn check_ultrametric(&self, points: &[Ray], triples: usize, params: &VisualParams, seed: u64) -> Result<UltrametricReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks: Vec<[usize; 3]> =
            (0..triples).map(|_| std::array::from_fn(|_| rng.gen_range(0..points.len()))).collect();
        let k = params.ultrametric_constant();
        let results = picks
            .par_iter()
            .map(|&[a, b, c]| {
                let ac = self.visual_distance(&points[a], &points[c], params)?;
                let ab = self.visual_distance(&points[a], &points[b], params)?;
                let bc = self.visual_distance(&points[b], &points[c], params)?;
                let m = ab.max(bc);
                Ok(if ac == 0.0 { 0.0 } else if m == 0.0 { f64::INFINITY } else { ac / m })
            })
            .collect::<Result<Vec<f64>>>()?;
        let violations = results.iter().filter(|&&r| r > k).count();
        let worst_ratio = results.iter().copied().fold(0.0, f64::max);
        Ok(UltrametricReport { constant: k, triples, violations, worst_ratio })
    }
}

/// Random eventually periodic rays with short preperiods and periods.
pub fn random_rays(degree: usize, count: usize, seed: u64) -> Vec<Ray> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let pre = (0..rng.gen_range(0..=6)).map(|_| rng.gen_range(0..degree as u8)).collect();
            let per = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..degree as u8)).collect();
            Ray { preperiod: pre, period: per }
        })
        .collect()
}
