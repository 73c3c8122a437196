use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use selfsim::boundary::{default_epsilon, random_rays, Boundary, Ray, VisualParams};
use selfsim::complex::{Complex, APSP_LIMIT};
use selfsim::dynamics::{bounded_degree_stats, build_dynatlas, stabilizer_orbit, Bases, OrbitReport};
use selfsim::geometry::Geometry;
use selfsim::verify::{self, VerifyConfig};
use selfsim::Word;

use crate::config::{
    budgets, build_complex, load_group, write_output, BoundaryCommand, Cli, Command, Envelope, Failure, GroupInfo,
    HSigmaUsed, Range,
};

const HSIGMA_MAX_LEVEL: usize = 9;

struct Session<'a> {
    cli: &'a Cli,
    complex: Complex,
    group: GroupInfo,
}

impl Session<'_> {
    fn levels(&self, default: Range) -> Range {
        self.cli.global.levels.unwrap_or(default)
    }

    fn ks(&self, default: Range) -> Range {
        self.cli.global.k.unwrap_or(default)
    }

    fn depth(&self, default: usize) -> Result<usize, Failure> {
        match self.cli.global.depth {
            Some(0) => Err(Failure::Config(anyhow::anyhow!("--depth must be positive"))),
            Some(d) => Ok(d),
            None => Ok(default),
        }
    }

    fn hsigma(&self) -> Result<HSigmaUsed, Failure> {
        let st = self.complex.structure();
        let (value, source, levels, stabilized) = match self.cli.global.hsigma {
            Some(h) => (h, "override", None, None),
            None => {
                let d = self.complex.degree();
                let mut top = 0;
                while top < HSIGMA_MAX_LEVEL && d.pow(top as u32 + 1) <= APSP_LIMIT {
                    top += 1;
                }
                let report = self.complex.estimate_hsigma(top, 16, self.cli.global.seed)?;
                (report.value, "estimated", Some(top), Some(report.stabilized))
            }
        };
        let (magic_level, magic_level_exact) = st.magic_level_bound(value)?;
        Ok(HSigmaUsed {
            value,
            source,
            estimated_over_levels: levels,
            estimate_stabilized: stabilized,
            magic_level,
            magic_level_exact,
        })
    }

    fn epsilon(&self, hs: &HSigmaUsed) -> Result<f64, Failure> {
        match self.cli.global.epsilon {
            Some(e) if !(e > 0.0 && e.is_finite()) => Err(Failure::Config(anyhow::anyhow!("--epsilon must be positive"))),
            Some(e) => Ok(e),
            None => Ok(default_epsilon(hs.magic_level)),
        }
    }

    fn emit<T: Serialize>(
        self,
        command: &str,
        hsigma: Option<HSigmaUsed>,
        epsilon: Option<f64>,
        passed: Option<bool>,
        result: T,
    ) -> Result<(), Failure> {
        let g = &self.cli.global;
        let envelope = Envelope {
            tool: "selfsim",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            group: self.group,
            hsigma,
            epsilon,
            budgets: budgets(g),
            seed: g.seed,
            passed,
            result,
        };
        let mut text = serde_json::to_string_pretty(&envelope).map_err(|e| Failure::Config(e.into()))?;
        text.push('\n');
        write_output(g.json.as_deref(), &text)?;
        match passed {
            Some(false) => Err(Failure::Property(format!("{command} reported a failing check"))),
            _ => Ok(()),
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let (rec, source) = load_group(&cli.global)?;
    let group_hash = rec.content_hash();
    let complex = build_complex(&cli.global, rec)?;
    let group = GroupInfo {
        source,
        hash: group_hash,
        degree: complex.degree(),
        generators: complex.generator_names().to_vec(),
    };
    let s = Session { cli, complex, group };
    match &cli.command {
        Command::Nucleus => nucleus(s),
        Command::Graph { slice } => graph(s, *slice),
        Command::ConeTypes => cone_types(s),
        Command::ShadowTypes { radius } => shadow_types(s, *radius),
        Command::Dynatlas { radius, hull_d, sample } => dynatlas(s, *radius, *hull_d, *sample),
        Command::Orbits { samples, radius, tail } => orbits(s, *samples, *radius, *tail),
        Command::Boundary(BoundaryCommand::Degree { ray }) => boundary_degree(s, ray),
        Command::Boundary(BoundaryCommand::Metric { ray, triples }) => boundary_metric(s, ray, *triples),
        Command::Verify => verify(s),
    }
}

#[derive(Serialize)]
struct MagicLevel {
    radius: usize,
    level: usize,
    exact: bool,
}

#[derive(Serialize)]
struct NucleusResult {
    size: usize,
    nucleus: Vec<String>,
    good_generators: Vec<String>,
    nucleus_square_level: usize,
    magic_levels: Vec<MagicLevel>,
}

fn nucleus(s: Session) -> Result<(), Failure> {
    let st = s.complex.structure();
    let mut magic_levels = Vec::new();
    for radius in s.levels(Range(0, 4)).inclusive() {
        let (level, exact) = st.magic_level_bound(radius)?;
        magic_levels.push(MagicLevel { radius, level, exact });
    }
    let hsigma = match s.cli.global.hsigma {
        Some(_) => Some(s.hsigma()?),
        None => None,
    };
    let result = NucleusResult {
        size: st.nucleus.len(),
        nucleus: st.nucleus.elements.iter().map(|g| st.group.format(g)).collect(),
        good_generators: st.gens.names.clone(),
        nucleus_square_level: st.nucleus_square_level()?,
        magic_levels,
    };
    s.emit("nucleus", hsigma, None, None, result)
}

#[derive(Serialize)]
struct LevelSummary {
    level: usize,
    vertices: usize,
    edges: usize,
    connected: bool,
}

fn graph(s: Session, slice: bool) -> Result<(), Failure> {
    let levels = s.levels(Range(0, 4));
    let mut dot = String::new();
    let mut summary = Vec::new();
    for n in levels.inclusive() {
        let g = s.complex.build_level_graph(n)?;
        if !slice {
            dot.push_str(&g.to_dot());
        }
        summary.push(LevelSummary { level: n, vertices: g.vertex_count(), edges: g.edges.len(), connected: g.is_connected() });
    }
    if slice {
        dot = s.complex.slice_dot(levels.1)?;
    }
    write_output(s.cli.global.dot.as_deref(), &dot)?;
    // With DOT on standard output the summary is only written on request.
    if s.cli.global.dot.is_some() || s.cli.global.json.is_some() {
        s.emit("graph", None, None, None, summary)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TypesResult<T: Serialize> {
    stable_over_last_3: bool,
    enumeration: T,
}

fn cone_types(s: Session) -> Result<(), Failure> {
    let hs = s.hsigma()?;
    let eps = s.epsilon(&hs)?;
    let types = Geometry::new(&s.complex, hs.value).enumerate_cone_types(s.levels(Range(0, 8)).inclusive())?;
    let stable = types.stable_over(3);
    s.emit("cone-types", Some(hs), Some(eps), Some(stable), TypesResult { stable_over_last_3: stable, enumeration: types })
}

fn shadow_types(s: Session, radius: usize) -> Result<(), Failure> {
    let hs = s.hsigma()?;
    let eps = s.epsilon(&hs)?;
    let types = Geometry::new(&s.complex, hs.value).enumerate_shadow_types(radius, s.levels(Range(2, 8)).inclusive())?;
    let stable = types.stable_over(3);
    s.emit("shadow-types", Some(hs), Some(eps), Some(stable), TypesResult { stable_over_last_3: stable, enumeration: types })
}

#[derive(Serialize)]
struct DynatlasResult<T: Serialize> {
    c_observed: Option<usize>,
    hull_d: usize,
    atlas: T,
}

fn dynatlas(s: Session, radius: usize, hull_d: Option<usize>, sample: Option<usize>) -> Result<(), Failure> {
    let hs = s.hsigma()?;
    let eps = s.epsilon(&hs)?;
    let levels = s.levels(Range(5, 7));
    let ks = s.ks(Range(0, 5));
    let (c_observed, hull_d) = match hull_d {
        Some(d) => (None, d),
        None => {
            let stats = bounded_degree_stats(&s.complex, radius, levels.inclusive(), ks.inclusive())?;
            let c = match stats.stable_from {
                Some(_) => stats.c_observed,
                None => stats.cells.iter().map(|x| x.max_marked).max().unwrap_or(1),
            };
            (Some(c), (2 * radius + 1) * (c + 1) + 2 * radius)
        }
    };
    let bases = match sample {
        Some(count) => Bases::Sample { count, seed: s.cli.global.seed },
        None => Bases::All,
    };
    let geom = Geometry::new(&s.complex, hs.value);
    let atlas = build_dynatlas(&geom, radius, levels.inclusive(), ks.inclusive(), hull_d, bases)?;
    let passed = atlas.stabilized && atlas.p > 0;
    s.emit("dynatlas", Some(hs), Some(eps), Some(passed), DynatlasResult { c_observed, hull_d, atlas })
}

#[derive(Serialize)]
struct OrbitsResult {
    samples: usize,
    hypothesis_met: usize,
    violations: usize,
    reports: Vec<OrbitReport>,
}

fn orbits(s: Session, samples: usize, radius: usize, tail: usize) -> Result<(), Failure> {
    if radius == 0 {
        return Err(Failure::Config(anyhow::anyhow!("--radius must be positive")));
    }
    let st = s.complex.structure();
    let d = st.degree() as u8;
    let mut rng = ChaCha8Rng::seed_from_u64(s.cli.global.seed);
    let mut reports = Vec::with_capacity(samples);
    for _ in 0..samples {
        let l = rng.gen_range(1..=radius);
        let (m, _) = st.magic_level_bound((st.nucleus.len() + 1) * l)?;
        let n = rng.gen_range(m..=m + 2);
        let v = Word::new((0..n).map(|_| rng.gen_range(0..d)).collect());
        let len = rng.gen_range(0..=tail);
        let w = Word::new((0..len).map(|_| rng.gen_range(0..d)).collect());
        reports.push(stabilizer_orbit(st, &v, l, &w)?);
    }
    let result = OrbitsResult {
        samples,
        hypothesis_met: reports.iter().filter(|r| r.hypothesis).count(),
        violations: reports.iter().filter(|r| !r.pass).count(),
        reports,
    };
    let passed = result.violations == 0;
    s.emit("orbits", None, None, Some(passed), result)
}

fn parse_ray(s: &Session, text: &str) -> Result<Ray, Failure> {
    let ray = Ray::parse(text)?;
    ray.check_alphabet(s.complex.degree())?;
    Ok(ray)
}

fn boundary_degree(s: Session, ray: &str) -> Result<(), Failure> {
    let ray = parse_ray(&s, ray)?;
    let hs = s.hsigma()?;
    let eps = s.epsilon(&hs)?;
    let b = Boundary::new(&s.complex, hs.value)?;
    let classes = b.preimage_classes(&ray, s.depth(200)?, s.levels(Range(4, 12)).inclusive())?;
    let passed = classes.degree_sum == classes.d;
    s.emit("boundary degree", Some(hs), Some(eps), Some(passed), classes)
}

#[derive(Serialize)]
struct MetricResult<D: Serialize, U: Serialize> {
    delta_estimate: f64,
    diameters: D,
    ultrametric: U,
}

fn boundary_metric(s: Session, ray: &str, triples: usize) -> Result<(), Failure> {
    let ray = parse_ray(&s, ray)?;
    let hs = s.hsigma()?;
    let eps = s.epsilon(&hs)?;
    let seed = s.cli.global.seed;
    let b = Boundary::new(&s.complex, hs.value)?;
    let delta = s.complex.estimate_delta(2000, 8, Some(hs.value), seed).delta;
    let params = VisualParams::new(eps, s.depth(30)?, delta, b.magic);
    let diameters = b.diameter_report(&ray, s.levels(Range(0, 10)).inclusive(), &params, 2)?;
    let points = random_rays(s.complex.degree(), 60, seed);
    let ultrametric = b.check_ultrametric(&points, triples, &params, seed)?;
    let passed = diameters.inclusion && diameters.band.is_finite() && ultrametric.violations == 0;
    s.emit("boundary metric", Some(hs), Some(eps), Some(passed), MetricResult { delta_estimate: delta, diameters, ultrametric })
}

#[derive(Serialize)]
struct VerifyResult<T: Serialize> {
    config: VerifyConfig,
    report: T,
}

fn verify(s: Session) -> Result<(), Failure> {
    let hs = s.hsigma()?;
    let eps = s.epsilon(&hs)?;
    let seed = s.cli.global.seed;
    let delta = s.complex.estimate_delta(500, 7, Some(hs.value), seed).delta;
    let config = VerifyConfig { hsigma: hs.value, epsilon: eps, delta, depth: s.depth(30)?, seed };
    let report = verify::run(&s.complex, &config)?;
    let passed = report.passed;
    s.emit("verify", Some(hs), Some(eps), Some(passed), VerifyResult { config, report })
}
