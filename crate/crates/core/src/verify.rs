//! The invariant suite run by `selfsim verify`.
//!
//! Every suite is sampled from seeds derived from the configured one and
//! reports only counts and verdicts, so the serialized report is identical
//! across runs with the same configuration.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::automaton::IDENTITY;
use crate::boundary::{random_rays, Boundary, Ray, VisualParams};
use crate::complex::Complex;
use crate::dynamics::{bounded_degree_stats, pullback_components, stabilizer_orbit, vertex_preimages};
use crate::error::Result;
use crate::geometry::{shadow_vertices, umbra_contains, Geometry, HorizontalSet};
use crate::word::Word;

/// Failure messages kept per suite; the rest are only counted.
const KEPT_FAILURES: usize = 8;

#[derive(Clone, Debug, Serialize)]
pub struct VerifyConfig {
    pub hsigma: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Depth for ray equivalence and visual distances.
    pub depth: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub checks: u64,
    pub failed: u64,
    pub failures: Vec<String>,
    /// Set when the suite could not run to completion.
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

#[derive(Default)]
struct Tally {
    checks: u64,
    failed: u64,
    failures: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failed += 1;
            if self.failures.len() < KEPT_FAILURES {
                self.failures.push(what());
            }
        }
    }
}

struct Ctx<'a> {
    c: &'a Complex,
    cfg: &'a VerifyConfig,
    boundary: Boundary<'a>,
}

impl Ctx<'_> {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt)
    }

    fn params(&self) -> VisualParams {
        VisualParams::new(self.cfg.epsilon, self.cfg.depth, self.cfg.delta, self.boundary.magic)
    }

    /// Largest level whose vertex count is at most `budget`, capped at `cap`.
    fn level_within(&self, budget: usize, cap: usize) -> usize {
        let d = self.c.degree();
        let mut n = 0;
        while n < cap && d.pow(n as u32 + 1) <= budget {
            n += 1;
        }
        n
    }

    fn random_vertex(&self, rng: &mut ChaCha8Rng, n: usize) -> Word {
        let d = self.c.degree() as u8;
        Word::new((0..n).map(|_| rng.gen_range(0..d)).collect())
    }

    fn ball(&self, v: &Word, r: usize) -> Result<HorizontalSet> {
        HorizontalSet::new(self.c.horizontal_ball(v.letters(), r))
    }
}

type Suite = fn(&Ctx, &mut Tally) -> Result<()>;

const SUITES: [(&str, Suite); 12] = [
    ("nucleus", nucleus),
    ("augmented_tree", augmented_tree),
    ("distance_oracle", distance_oracle),
    ("products_comparable", products_comparable),
    ("balls_map_to_balls", balls_map_to_balls),
    ("hull_and_umbra_naturality", naturality),
    ("pullback_separation", pullback_separation),
    ("bounded_degree", bounded_degree),
    ("stabilizer_orbits", stabilizer_orbits),
    ("degree_sum", degree_sum),
    ("shadows_in_umbrae", shadows_in_umbrae),
    ("quasi_ultrametric", quasi_ultrametric),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.0).collect()
}

pub fn run(c: &Complex, cfg: &VerifyConfig) -> Result<VerifyReport> {
    let ctx = Ctx { c, cfg, boundary: Boundary::new(c, cfg.hsigma)? };
    let suites: Vec<SuiteResult> = SUITES
        .iter()
        .map(|&(name, suite)| {
            let mut tally = Tally::default();
            let error = suite(&ctx, &mut tally).err().map(|e| e.to_string());
            SuiteResult {
                name,
                passed: error.is_none() && tally.failed == 0,
                checks: tally.checks,
                failed: tally.failed,
                failures: tally.failures,
                error,
            }
        })
        .collect();
    Ok(VerifyReport { passed: suites.iter().all(|s| s.passed), suites })
}

fn nucleus(ctx: &Ctx, t: &mut Tally) -> Result<()> {
    let st = ctx.c.structure();
    let n = &st.nucleus;
    t.check(n.contains(IDENTITY), || "identity missing".into());
    for g in &n.elements {
        let name = st.group.format(g);
        t.check(n.contains(st.group.inverse(g)?.id), || format!("inverse of {name} missing"));
        for x in 0..st.degree() as u8 {
            t.check(n.contains(st.group.restrict(g, &[x])?.id), || format!("{name}|_{x} missing"));
        }
    }
    if let Some(ball) = st.ball_within(3, 5000)? {
        for (g, _) in ball {
            let reached = st.element_magic_level(g.id).is_ok();
            t.check(reached, || format!("{} never restricts into the nucleus", st.group.format(&g)));
        }
    }
    Ok(())
}

fn augmented_tree(ctx: &Ctx, t: &mut Tally) -> Result<()> {
    let c = ctx.c;
    for n in 1..=ctx.level_within(4096, 10) {
        let g = c.build_level_graph(n)?;
        for &(u, v, _) in &g.edges {
            let (pu, pv) = (g.word(u as usize).push_down(1)?, g.word(v as usize).push_down(1)?);
            let ok = c.horizontal_distance_within(pu.letters(), pv.letters(), 1).is_some();
            t.check(ok, || format!("edge {} {} pushes down to a non-edge", g.word(u as usize), g.word(v as usize)));
        }
    }
    Ok(())
}

/// Every word up to `depth` with its vertical and horizontal neighbors.
fn truncated_complex(c: &Complex, depth: usize) -> (Vec<Word>, Vec<Vec<usize>>) {
    let words: Vec<Word> = (0..=depth).flat_map(|n| Word::all(n, c.degree())).collect();
    let index: HashMap<&Word, usize> = words.iter().enumerate().map(|(i, w)| (w, i)).collect();
    let adj = words
        .iter()
        .map(|w| {
            let mut out: Vec<usize> = c.neighbors(w.letters()).into_iter().map(|u| index[&Word::new(u)]).collect();
            if let Ok(x) = w.push_down(1) {
                out.push(index[&x]);
            }
            for y in 0..c.degree() as u8 {
                if let Some(&j) = index.get(&w.prepend(y)) {
                    out.push(j);
                }
            }
            out
        })
        .collect();
    (words, adj)
}

fn bfs(adj: &[Vec<usize>], from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[from] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn distance_oracle(ctx: &Ctx, t: &mut Tally) -> Result<()> {
    let (words, adj) = truncated_complex(ctx.c, ctx.level_within(32, 5));
    for (i, u) in words.iter().enumerate() {
        let dist = bfs(&adj, i);
        for (j, v) in words.iter().enumerate() {
            let got = ctx.c.graph_distance(u, v);
            t.check(got == dist[j], || format!("d({u}, {v}) = {got}, BFS gives {}", dist[j]));
        }
    }
    Ok(())
}

fn products_comparable(ctx: &Ctx, t: &mut Tally) -> Result<()> {
    let n = ctx.level_within(64, 6);
    let words: Vec<Word> = (0..=n).flat_map(|l| Word::all(l, ctx.c.degree())).collect();
    let half = ctx.cfg.hsigma as f64 / 2.0;
    for u in &words {
        for v in &words {
            let g = ctx.c.gromov_product(u, v);
            let l = ctx.c.level_product(u, v) as f64;
            t.check(l - half <= g && g <= l, || format!("({u}|{v}) = {g}, level product {l}"));
        }
    }
    Ok(())
}

fn balls_map_to_balls(ctx: &Ctx, t: &mut Tally) -> Result<()> {
    let c = ctx.c;
    let mut rng = ctx.rng(5);
    let n = ctx.level_within(256, 6);
    for _ in 0..12 {
        let v = ctx.random_vertex(&mut rng, n);
        for r in 1..=2 {
            let below = c.horizontal_ball(v.letters(), r);
            for k in 1..=2 {
                for tilde in vertex_preimages(&v, k, c.degree()) {
                    let image: BTreeSet<Word> =
                        c.horizontal_ball(tilde.letters(), r).iter().map(|u| u.shift(k)).collect::<Result<_>>()?;
                    t.check(image == below, || format!("F^{k} of the {r}-ball at {tilde} is not the ball at {v}"));
                }
            }
        }
    }
    Ok(())
}

fn naturality(ctx: &Ctx, t: &mut Tally) -> Result<()> {
    let c = ctx.c;
    let geom = Geometry::new(c, ctx.cfg.hsigma);
    let mut rng = ctx.rng(6);
    let n = ctx.level_within(64, 6);
    for _ in 0..6 {
        let center = ctx.random_vertex(&mut rng, n);
        let v = ctx.ball(&center, 1)?;
        for k in 1..=2 {
            for comp in pullback_components(c, &v, &v, k) {
                let tilde = HorizontalSet::new(comp.vertices)?;
                for d in [0, 2] {
                    let (up, down) = (geom.hull(&tilde, d)?, geom.hull(&v, d)?);
                    for (a, b) in up.layers.iter().zip(&down.layers) {
                        let image: BTreeSet<Word> = a.iter().map(|u| u.shift(k)).collect::<Result<_>>()?;
                        t.check(image == *b, || format!("hull layer at {center}, k={k}, D={d}"));
                    }
                }
                for depth in 1..=2 {
                    let umbra = |set: &HorizontalSet| -> BTreeSet<Word> {
                        shadow_vertices(set, depth, c.degree())
                            .into_iter()
                            .filter(|u| u.len() == set.level() + depth && umbra_contains(c, set, u))
                            .collect()
                    };
                    let image: BTreeSet<Word> = umbra(&tilde).iter().map(|u| u.shift(k)).collect::<Result<_>>()?;
                    t.check(image == umbra(&v), || format!("umbra at {center}, k={k}, depth {depth}"));
                }
            }
        }
    }
    Ok(())
}

fn pullback_separation(ctx: &Ctx, t: &mut Tally) -> Result<()> {
    let c = ctx.c;
    let mut rng = ctx.rng(7);
    let n = ctx.level_within(64, 5);
    for _ in 0..10 {
        let center = ctx.random_vertex(&mut rng, n);
        let v = ctx.ball(&center, 1)?;
        let k = rng.gen_range(0..=3);
        let comps = pullback_components(c, &v, &v, k);
        let marked: usize = comps.iter().map(|x| x.marked.len()).sum();
        t.check(marked == v.len() * c.degree().pow(k as u32), || format!("preimage count at {center}, k={k}"));
        for (i, a) in comps.iter().enumerate() {
            for b in &comps[i + 1..] {
                let close = a.vertices.iter().any(|x| b.vertices.iter().any(|y| c.graph_distance(x, y) < 2));
                t.check(!close, || format!("components closer than 2 at {center}, k={k}"));
            }
        }
    }
    Ok(())
}

fn bounded_degree(ctx: &Ctx, t: &mut Tally) -> Result<()> {
    let top = ctx.level_within(1024, 10);
    if top < 6 {
        return Ok(());
    }
    let report = bounded_degree_stats(ctx.c, 1, 2..=top - 3, 0..=3)?;
    t.check(report.stable_from.is_some(), || "no stable levels".into());
    t.check(report.constant_in_k, || format!("C varies with k: {:?}", report.c_by_k));
    t.check(report.within_bound, || format!("diameter {} reaches {}", report.d_observed, report.diameter_bound));
    Ok(())
}

fn stabilizer_orbits(ctx: &Ctx, t: &mut Tally) -> Result<()> {
    let st = ctx.c.structure();
    let mut rng = ctx.rng(9);
    for _ in 0..30 {
        let radius = rng.gen_range(1..=2);
        let (m, _) = st.magic_level_bound((st.nucleus.len() + 1) * radius)?;
        let n = rng.gen_range(m..=m + 2);
        let v = ctx.random_vertex(&mut rng, n);
        let len = rng.gen_range(0..=4);
        let w = ctx.random_vertex(&mut rng, len);
        let report = stabilizer_orbit(st, &v, radius, &w)?;
        t.check(report.hypothesis && report.pass, || {
            format!("orbit of {v}{w} has {} points, bound {}", report.orbit_size, report.bound)
        });
    }
    Ok(())
}

fn degree_sum(ctx: &Ctx, t: &mut Tally) -> Result<()> {
    let d = ctx.c.degree();
    let fixed = Ray::new(vec![], vec![0])?;
    for ray in random_rays(d, 6, ctx.cfg.seed ^ 10).into_iter().chain([fixed]) {
        match ctx.boundary.preimage_classes(&ray, ctx.cfg.depth.max(200), 4..=12) {
            Ok(pc) => t.check(pc.degree_sum == d, || format!("degrees at {ray} sum to {}", pc.degree_sum)),
            Err(e) => t.check(false, || format!("{ray}: {e}")),
        }
    }
    Ok(())
}

fn shadows_in_umbrae(ctx: &Ctx, t: &mut Tally) -> Result<()> {
    let c = ctx.c;
    let gap = ctx.boundary.magic + 3;
    for ray in random_rays(c.degree(), 3, ctx.cfg.seed ^ 11) {
        for step in 0..=6 {
            let v = ctx.ball(&ray.vertex(step), 1)?;
            for w in c.horizontal_ball(ray.vertex(step + gap).letters(), 1) {
                for y in 0..c.degree() as u8 {
                    for u in [w.clone(), w.prepend(y)] {
                        t.check(umbra_contains(c, &v, &u), || format!("{u} lies in S({ray}, {}) but not U({ray}, {step})", step + gap));
                    }
                }
            }
        }
    }
    Ok(())
}

fn quasi_ultrametric(ctx: &Ctx, t: &mut Tally) -> Result<()> {
    let points = random_rays(ctx.c.degree(), 40, ctx.cfg.seed ^ 12);
    let report = ctx.boundary.check_ultrametric(&points, 300, &ctx.params(), ctx.cfg.seed ^ 13)?;
    t.checks += report.triples as u64;
    t.failed += report.violations as u64;
    if report.violations > 0 {
        t.failures.push(format!("{} triples exceed K = {}", report.violations, report.constant));
    }
    Ok(())
}
