use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use dskp_core::aztec::{self as az, AztecWeights, DevronKind};
use dskp_core::chi::{self, LeadingPolynomials, Side};
use dskp_core::cwgraph::{aztec, build_cw_graph, kasteleyn_orientation, CwGraph, Weights};
use dskp_core::dimer;
use dskp_core::field::{random_rational, Rational};
use dskp_core::forests::quadrangulate_aztec;
use dskp_core::lattice::{evolve, Cell, ChiVariant, HeightFunction, InitialData, LatticePoint, Recurrence};
use dskp_core::limitshape;
use dskp_core::poly::Var;
use dskp_core::projective::{parse_projective_rational, ProjectiveValue as PV};
use dskp_core::verify;

#[derive(Parser)]
#[command(name = "dskp-lab", version, about = "Experiments with the dSKP recurrence and its relatives")]
struct Cli {
    /// Worker threads for parallel sections (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve seeded initial data upwards with one of the recurrences.
    Evolve {
        #[arg(long, default_value = "dskp")]
        recurrence: String,
        #[arg(long, value_enum, default_value_t = Surface::Flat)]
        height: Surface,
        #[arg(long, default_value_t = 4)]
        radius: i32,
        #[arg(long, default_value_t = 3)]
        level: i32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the graph G_p and print it with a Kasteleyn orientation.
    Graph {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Oriented dimer partition function, symbolic or at given weights.
    Z {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Numeric)]
        mode: Mode,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The ratio function Y(G, a).
    Y {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Numeric)]
        mode: Mode,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Complementary tree/forest configurations of A_k.
    Forests {
        #[arg(long)]
        k: usize,
        /// Include every configuration in the output.
        #[arg(long)]
        emit: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aztec-diamond identities at seeded weights.
    Aztec {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Singular initial data and the level where the degeneracy appears.
    Devron {
        #[arg(long, value_enum)]
        kind: DevronArg,
        #[arg(long, default_value_t = 2)]
        m: i32,
        #[arg(long, default_value_t = 1)]
        p: i32,
        /// Periods `s,t,u,v` for the two-periodic kind.
        #[arg(long, default_value = "2,0,0,2")]
        periods: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan the rescaled solution of the linearised problem.
    Limitshape {
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 200)]
        k: i32,
        #[arg(long, default_value = "21x21")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leading polynomials for the chi recurrences.
    Chi {
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        counts: bool,
        #[arg(long)]
        emit_polys: bool,
        /// Also count configurations obeying the direction constraints.
        #[arg(long)]
        constrained: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance checks and print a summary.
    Verify {
        #[arg(long, default_value = "paper")]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Run only these criteria, e.g. `1,2,10`.
        #[arg(long)]
        only: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Surface {
    Flat,
    Bump,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Mode {
    Symbolic,
    Numeric,
}

#[derive(Clone, Copy, ValueEnum)]
enum DevronArg {
    Dodgson,
    Devron,
    TwoPeriodic,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Chi3,
    Chi4,
    Chi5,
}

impl From<VariantArg> for ChiVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Chi3 => ChiVariant::Chi3,
            VariantArg::Chi4 => ChiVariant::Chi4,
            VariantArg::Chi5 => ChiVariant::Chi5,
        }
    }
}

fn surface(s: Surface, r: i32) -> HeightFunction {
    match s {
        Surface::Flat => HeightFunction::flat(r),
        Surface::Bump => HeightFunction::bump(r),
    }
}

/// `aztec:k`, or `flat:r:i,j,k` / `bump:r:i,j,k` for the graph of a point
/// above a height function.
fn parse_graph(spec: &str) -> Result<CwGraph> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["aztec", k] => Ok(aztec(k.parse().context("aztec size")?)?),
        [kind @ ("flat" | "bump"), r, p] => {
            let r: i32 = r.parse().context("window radius")?;
            let c: Vec<i32> = p.split(',').map(|x| x.trim().parse()).collect::<std::result::Result<_, _>>()?;
            let [i, j, k] = c[..] else { bail!("point must be i,j,k") };
            let h = if *kind == "flat" { HeightFunction::flat(r) } else { HeightFunction::bump(r) };
            Ok(build_cw_graph(&h, LatticePoint::new(i, j, k))?)
        }
        _ => bail!("graph must be aztec:k, flat:r:i,j,k or bump:r:i,j,k"),
    }
}

fn parse_label(s: &str) -> Result<Var> {
    let (i, j) = s.trim_matches(|c| c == '(' || c == ')').split_once(',').ok_or_else(|| anyhow!("bad face `{s}`"))?;
    Ok((i.trim().parse()?, j.trim().parse()?))
}

/// Weights from a JSON object `{"i,j": "num/den" | "inf"}`, or seeded.
fn load_weights(g: &CwGraph, path: Option<&Path>, seed: u64) -> Result<Weights<PV<Rational>>> {
    let Some(path) = path else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok(g.faces.iter().map(|f| (f.label, PV::Finite(random_rational(&mut rng, 30, 4)))).collect());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw: BTreeMap<String, String> = serde_json::from_str(&text).context("weights must map \"i,j\" to strings")?;
    let mut w = Weights::new();
    for (k, v) in raw {
        w.insert(parse_label(&k)?, parse_projective_rational(&v)?);
    }
    for f in &g.faces {
        if !w.contains_key(&f.label) {
            bail!("weights file has no value for face {:?}", f.label);
        }
    }
    Ok(w)
}

fn finite(w: &Weights<PV<Rational>>) -> Result<Weights<Rational>> {
    w.iter()
        .map(|(&v, x)| x.as_finite().cloned().map(|x| (v, x)).ok_or_else(|| anyhow!("weight at {v:?} is inf")))
        .collect()
}

fn weights_json(w: &Weights<PV<Rational>>) -> Value {
    Value::Object(w.iter().map(|(v, x)| (format!("{},{}", v.0, v.1), json!(x.to_string()))).collect())
}

/// Writes through a temporary file so readers never see partial output.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            let written = stdout.write_all(text.as_bytes()).and_then(|_| {
                if text.ends_with('\n') {
                    Ok(())
                } else {
                    stdout.write_all(b"\n")
                }
            });
            match written {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
        Some(p) => {
            let tmp = p.with_extension("partial");
            std::fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
            std::fs::rename(&tmp, p).with_context(|| format!("renaming to {}", p.display()))?;
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, v: &Value) -> Result<()> {
    emit(out, &serde_json::to_string_pretty(v)?)
}

fn run_evolve(rec: &str, s: Surface, radius: i32, level: i32, seed: u64, out: Option<&Path>) -> Result<()> {
    let rec: Recurrence = rec.parse()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = InitialData::from_fn(surface(s, radius), |_, _| PV::Finite(random_rational(&mut rng, 30, 4)));
    let sol = evolve(&data, rec, level)?;
    let mut points = Vec::new();
    for k in 0..=level {
        for (p, cell) in sol.level(k) {
            let value = match cell {
                Cell::Value(v) => json!(v.to_string()),
                Cell::Singular => Value::Null,
            };
            points.push(json!({"i": p.i, "j": p.j, "k": p.k, "value": value}));
        }
    }
    emit_json(out, &json!({"recurrence": rec.to_string(), "seed": seed, "radius": radius, "points": points}))
}

fn run_z(graph: &str, weights: Option<&Path>, mode: Mode, seed: u64, out: Option<&Path>) -> Result<()> {
    let g = parse_graph(graph)?;
    let phi = kasteleyn_orientation(&g)?;
    let v = if mode == Mode::Symbolic {
        let z = dimer::z_oriented_symbolic(&g, &phi)?;
        json!({"graph": graph, "mode": "symbolic", "monomials": z.monomial_count(), "z": z.to_canonical_string()})
    } else {
        let w = load_weights(&g, weights, seed)?;
        let a = finite(&w)?;
        let z = dimer::z_det(&g, &a)?;
        let eps = dimer::epsilon(&g, &phi)?;
        json!({
            "graph": graph,
            "mode": "numeric",
            "weights": weights_json(&w),
            "det_k": PV::Finite(z).to_string(),
            "epsilon": eps,
        })
    };
    emit_json(out, &v)
}

fn run_y(graph: &str, weights: Option<&Path>, mode: Mode, seed: u64, out: Option<&Path>) -> Result<()> {
    let g = parse_graph(graph)?;
    let v = if mode == Mode::Symbolic {
        let y = dimer::ratio_function_symbolic(&g, &kasteleyn_orientation(&g)?)?;
        json!({
            "graph": graph,
            "mode": "symbolic",
            "numerator": y.numerator.to_canonical_string(),
            "denominator": y.denominator.to_canonical_string(),
        })
    } else {
        let w = load_weights(&g, weights, seed)?;
        let y = dimer::ratio_function_y(&g, &w)?;
        json!({"graph": graph, "mode": "numeric", "weights": weights_json(&w), "y": y.to_string()})
    };
    emit_json(out, &v)
}

fn run_forests(k: usize, emit_all: bool, out: Option<&Path>) -> Result<()> {
    let q = quadrangulate_aztec(k)?;
    let configs = q.enumerate_tree_forest()?;
    let p = q.tree_forest_polynomial(&configs);
    let mut v = json!({
        "k": k,
        "configurations": configs.len(),
        "monomials": p.monomial_count(),
        "spanning_trees": q.spanning_tree_count().to_string(),
    });
    if emit_all {
        v["list"] = Value::Array(configs.iter().map(|c| q.config_json(c)).collect());
    }
    emit_json(out, &v)
}

fn run_aztec(k: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = az::DistinctPool::default();
    let cols: Vec<Rational> = (0..k).map(|_| pool.fresh(&mut rng)).collect();
    let mut c = || PV::Finite(pool.fresh(&mut rng));
    let cs: Vec<Vec<PV<Rational>>> = (0..=k).map(|_| (0..=k).map(|_| c()).collect()).collect();
    let w = AztecWeights::from_cd(k, |i, j| cs[i][j].clone(), |i, _| PV::Finite(cols[i].clone()));
    let g = aztec(k)?;
    let det_k = dimer::z_det(&g, &w.finite_labels()?)?;
    let perm = az::z_perm_forest(&w)?;
    let shift = az::vertical_shift_check(&w)?;
    let y = dimer::ratio_function_y(&g, &w.to_labels())?;
    let v = json!({
        "k": k,
        "seed": seed,
        "det_k": PV::Finite(det_k.clone()).to_string(),
        "perm_forest": PV::Finite(perm.clone()).to_string(),
        "perm_forest_matches": det_k == perm || det_k == -perm,
        "shift_relation": shift.z_relation,
        "y": y.to_string(),
        "y_via_c_inverse": az::y_via_c_inverse(&w)?.to_string(),
        "y_kernel": az::kernel_formula_y(&w)?.to_string(),
    });
    emit_json(out, &v)
}

fn run_devron(kind: DevronArg, m: i32, p: i32, periods: &str, seed: u64, out: Option<&Path>) -> Result<()> {
    let kind = match kind {
        DevronArg::Dodgson => DevronKind::Dodgson { m },
        DevronArg::Devron => DevronKind::Devron { m, p },
        DevronArg::TwoPeriodic => {
            let v: Vec<i32> = periods.split(',').map(|x| x.trim().parse()).collect::<std::result::Result<_, _>>()?;
            let [s, t, u, w] = v[..] else { bail!("periods must be s,t,u,v") };
            DevronKind::TwoPeriodic { s, t, u, v: w }
        }
    };
    let r = az::devron_experiment(kind, seed)?;
    emit_json(out, &serde_json::to_value(&r)?)?;
    if r.holds_at_predicted {
        Ok(())
    } else {
        bail!("degeneracy not observed at the predicted level")
    }
}

fn run_limitshape(q: &str, k: i32, grid: &str, out: Option<&Path>) -> Result<()> {
    let q = dskp_core::field::parse_rational(q)?;
    let (nx, ny) = grid.split_once('x').ok_or_else(|| anyhow!("grid must look like 101x101"))?;
    let rows = limitshape::asymptotic_scan(&q, k, nx.parse()?, ny.parse()?)?;
    emit(out, &limitshape::scan_csv(&rows))
}

fn polys_json(lp: &LeadingPolynomials) -> Value {
    json!({
        "numerator": lp.numerator.to_canonical_string(),
        "denominator": lp.denominator.to_canonical_string(),
    })
}

fn run_chi(variant: VariantArg, k: usize, emit_polys: bool, constrained: bool, out: Option<&Path>) -> Result<()> {
    let v: ChiVariant = variant.into();
    let lp = chi::chi_leading_polynomials(v, k)?;
    let mut j = serde_json::to_value(lp.counts())?;
    if let Some((n, d)) = lp.rho_orders {
        j["rho_orders"] = json!({"numerator": n, "denominator": d});
    }
    if emit_polys {
        j["polynomials"] = polys_json(&lp);
    }
    if constrained {
        j["constrained"] = json!({
            "numerator": chi::constrained_forest_count(v, k, Side::Numerator)?,
            "denominator": chi::constrained_forest_count(v, k, Side::Denominator)?,
        });
    }
    emit_json(out, &j)
}

fn run_verify(suite: &str, seed: u64, only: Option<&str>, out: Option<&Path>) -> Result<bool> {
    if suite != "paper" {
        bail!("unknown suite `{suite}`; only `paper` exists");
    }
    let ids: Vec<u8> = match only {
        Some(s) => s.split(',').map(|x| x.trim().parse()).collect::<std::result::Result<_, _>>()?,
        None => verify::CRITERIA.iter().map(|c| c.0).collect(),
    };
    let mut checks = Vec::new();
    for id in ids {
        let c = verify::run(id, seed);
        eprintln!("[{}] {:>2} {} ({:.1} s)", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.seconds);
        checks.push(c);
    }
    let passed = checks.iter().all(|c| c.passed);
    emit_json(out, &json!({"suite": suite, "seed": seed, "passed": passed, "checks": checks}))?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global().ok();
    }
    let result = match &cli.command {
        Command::Evolve { recurrence, height, radius, level, seed, out } => {
            run_evolve(recurrence, *height, *radius, *level, *seed, out.as_deref())
        }
        Command::Graph { graph, out } => parse_graph(graph).and_then(|g| {
            let phi = kasteleyn_orientation(&g)?;
            emit_json(out.as_deref(), &g.to_json(Some(&phi)))
        }),
        Command::Z { graph, weights, mode, seed, out } => run_z(graph, weights.as_deref(), *mode, *seed, out.as_deref()),
        Command::Y { graph, weights, mode, seed, out } => run_y(graph, weights.as_deref(), *mode, *seed, out.as_deref()),
        Command::Forests { k, emit, out } => run_forests(*k, *emit, out.as_deref()),
        Command::Aztec { k, seed, out } => run_aztec(*k, *seed, out.as_deref()),
        Command::Devron { kind, m, p, periods, seed, out } => run_devron(*kind, *m, *p, periods, *seed, out.as_deref()),
        Command::Limitshape { q, k, grid, out } => run_limitshape(q, *k, grid, out.as_deref()),
        Command::Chi { variant, k, counts: _, emit_polys, constrained, out } => {
            run_chi(*variant, *k, *emit_polys, *constrained, out.as_deref())
        }
        Command::Verify { suite, seed, only, out } => match run_verify(suite, *seed, only.as_deref(), out.as_deref()) {
            Ok(true) => Ok(()),
            Ok(false) => Err(anyhow!("at least one check failed")),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
