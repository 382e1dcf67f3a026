use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use clap::Args;
use hcsplit_core::graph::{EdgeUpdate, Graph};
use hcsplit_core::hctree::{check_strong_consistency, check_weak_consistency, PartialHCTree};
use hcsplit_core::io;
use hcsplit_core::objectives::{dasgupta_cost, mw_revenue};
use hcsplit_core::partial::{build_strong_partial, build_weak_partial, BuildTrace};
use hcsplit_core::pipeline::{
    brute_force_opt, hc_das, hc_das_fast, hc_mw, Objective, StreamingState, BRUTE_FORCE_MAX,
};
use hcsplit_core::sparsest::{exact_sparsest_cut, heuristic_sparsest_cut, recursive_sparsest_tree};
use hcsplit_core::{Error, HCTree};
use rayon::prelude::*;

use crate::config::{config_error, Algo, Instance, InstanceArgs, OracleArgs, ParamArgs, Seeds};
use crate::report::{write_rows, Row};

/// A build aborted or produced an inconsistent tree; exits with status 3.
#[derive(Debug)]
pub struct AlgoFailure(pub String);

impl fmt::Display for AlgoFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for AlgoFailure {}

fn parse_objective(s: &str) -> anyhow::Result<Objective> {
    Objective::from_str(s).map_err(|e| config_error(e.to_string()))
}

fn objective_name(o: Objective) -> &'static str {
    match o {
        Objective::Das => "das",
        Objective::Mw => "mw",
    }
}

fn evaluate(g: &Graph, t: &HCTree, objective: Objective) -> anyhow::Result<f64> {
    Ok(match objective {
        Objective::Das => dasgupta_cost(g, t, None)?.value,
        Objective::Mw => mw_revenue(g, t, None)?.value,
    })
}

/// `value / reference`; two zeros count as exact.
fn ratio(value: f64, reference: f64) -> Option<f64> {
    if reference > 0.0 {
        Some(value / reference)
    } else {
        (value == 0.0).then_some(1.0)
    }
}

/// Fills value, proxy and ratio columns, plus the brute-force optimum when
/// asked and affordable.
fn score(row: &mut Row, g: &Graph, tree: &HCTree, planted: &HCTree, objective: Objective, brute: bool) -> anyhow::Result<()> {
    let value = evaluate(g, tree, objective)?;
    let proxy = evaluate(g, planted, objective)?;
    row.value = Some(value);
    row.opt_proxy = Some(proxy);
    row.ratio = ratio(value, proxy);
    if brute && g.n() <= BRUTE_FORCE_MAX {
        let opt = brute_force_opt(g, objective)?.value;
        row.opt_exact = Some(opt);
        row.ratio_exact = ratio(value, opt);
    }
    Ok(())
}

/// Output of one (seed, algorithm) run.
struct Job {
    row: Row,
    tree_json: Option<String>,
    trace: Option<BuildTrace>,
    failure: Option<String>,
}

struct RunPlan<'a> {
    algo: Algo,
    objective: Objective,
    oracle: &'a OracleArgs,
    params: &'a ParamArgs,
    brute: bool,
}

fn run_one(plan: &RunPlan<'_>, inst: &Instance, seed: u64, p: f64) -> anyhow::Result<Job> {
    let n = inst.tree.n();
    let algo = plan.algo;
    let mut row = Row {
        n,
        seed,
        algo: algo.name().into(),
        objective: objective_name(plan.objective).into(),
        ..Row::default()
    };
    let needs_graph = !matches!(algo, Algo::Strong | Algo::Weak);
    let graph = match (&inst.graph, needs_graph) {
        (Some(g), _) => Some(g.clone()),
        (None, true) => return Err(config_error(format!("{} needs --graph", algo.name()))),
        (None, false) => None,
    };
    let start = Instant::now();
    let mut partial: Option<(PartialHCTree, bool)> = None;
    let mut trace = None;
    let mut failure = None;
    let mut tree = None;
    let mut queries = None;

    if algo.uses_oracle() {
        row.p = Some(p);
        row.adversary = Some(plan.oracle.adversary.clone());
        let oracle = plan.oracle.oracle(inst.tree.clone(), seed, p)?;
        let params = plan.params.params(n, seed)?;
        let cuts = plan.params.cuts(seed);
        let vs = inst.tree.vertices();
        let g = graph.as_deref();
        let result = match algo {
            Algo::Strong => build_strong_partial(&vs, &oracle, &params).map(|(pt, tr)| (None, pt, tr, true)),
            Algo::Weak => build_weak_partial(&vs, &oracle, &params).map(|(pt, tr)| (None, pt, tr, false)),
            Algo::HcDas => hc_das(g.unwrap(), &oracle, &params, &cuts).map(|r| (Some(r.tree), r.partial, r.trace, true)),
            Algo::HcDasFast => {
                hc_das_fast(g.unwrap(), &oracle, &params, &cuts).map(|r| (Some(r.tree), r.partial, r.trace, true))
            }
            Algo::HcMw => hc_mw(g.unwrap(), &oracle, &params).map(|r| (Some(r.tree), r.partial, r.trace, false)),
            Algo::RecursiveSparsest | Algo::Planted => unreachable!(),
        };
        match result {
            Ok((full, pt, tr, strong)) => {
                tree = full;
                trace = Some(tr);
                partial = Some((pt, strong));
            }
            Err(Error::Fail { reason, trace: tr }) => {
                failure = Some(reason);
                trace = Some(*tr);
            }
            Err(e) => return Err(e.into()),
        }
        queries = Some(oracle.query_count().total);
    } else {
        let g = graph.as_deref().expect("checked above");
        tree = Some(match algo {
            Algo::Planted => (*inst.tree).clone(),
            _ => {
                let cuts = plan.params.cuts(seed);
                if n <= cuts.exact_limit {
                    recursive_sparsest_tree(g, &|sub: &Graph| exact_sparsest_cut(sub, cuts.exact_limit))?
                } else {
                    recursive_sparsest_tree(g, &|sub: &Graph| heuristic_sparsest_cut(sub, &cuts))?
                }
            }
        });
    }
    row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    row.queries = queries;
    row.depth = trace.as_ref().map(BuildTrace::max_depth);

    let mut tree_json = None;
    if let Some((pt, strong)) = &partial {
        let report = if *strong {
            check_strong_consistency(pt, &inst.tree)
        } else {
            check_weak_consistency(pt, &inst.tree)
        };
        let ok = report.is_consistent();
        row.consistency = Some(if ok { "pass" } else { "fail" }.into());
        if !ok {
            failure = Some(format!("{} consistency violations", report.violations.len()));
        }
        tree_json = Some(io::partial_to_json(pt));
    } else if failure.is_some() {
        row.consistency = Some("fail_signal".into());
    }
    if let Some(t) = &tree {
        tree_json = Some(io::tree_to_json(t));
        if let Some(g) = &graph {
            score(&mut row, g, t, &inst.tree, plan.objective, plan.brute)?;
        }
    }
    Ok(Job {
        row,
        tree_json,
        trace,
        failure,
    })
}

fn write_artifacts(out: &Path, tag: &str, job: &Job) -> anyhow::Result<()> {
    fs::create_dir_all(out)?;
    if let Some(json) = &job.tree_json {
        fs::write(out.join(format!("tree-{tag}.json")), json)?;
    }
    if let Some(trace) = &job.trace {
        fs::write(out.join(format!("trace-{tag}.jsonl")), trace.to_jsonl())?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value = "0")]
    pub seed: Seeds,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn generate(args: &GenerateArgs) -> anyhow::Result<()> {
    if args.instance.graph.is_some() || args.instance.tree.is_some() {
        return Err(config_error("generate takes --n, not input files"));
    }
    let load = args.instance.loader()?;
    fs::create_dir_all(&args.out)?;
    for &seed in &args.seed.0 {
        let inst = load(seed)?;
        let n = inst.tree.n();
        let graph_path = args.out.join(format!("graph-n{n}-s{seed}.json"));
        let tree_path = args.out.join(format!("tree-n{n}-s{seed}.json"));
        fs::write(&graph_path, io::graph_to_json(inst.graph.as_deref().expect("generated")))?;
        fs::write(&tree_path, io::tree_to_json(&inst.tree))?;
        println!("{}\n{}", graph_path.display(), tree_path.display());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value_t = Algo::HcMw)]
    pub algo: Algo,
    /// das or mw; defaults to the one the algorithm targets.
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long, default_value = "0")]
    pub seed: Seeds,
    /// Directory for tree and trace files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn default_objective(algo: Algo) -> Objective {
    match algo {
        Algo::Weak | Algo::HcMw => Objective::Mw,
        _ => Objective::Das,
    }
}

pub fn build(args: &BuildArgs) -> anyhow::Result<()> {
    args.oracle.validate()?;
    let objective = match &args.objective {
        Some(s) => parse_objective(s)?,
        None => default_objective(args.algo),
    };
    let load = args.instance.loader()?;
    let plan = RunPlan {
        algo: args.algo,
        objective,
        oracle: &args.oracle,
        params: &args.params,
        brute: false,
    };
    let jobs: Vec<anyhow::Result<Job>> = args
        .seed
        .0
        .par_iter()
        .map(|&seed| {
            let inst = load(seed)?;
            if args.algo == Algo::HcDas {
                args.params.check_exact_cuts(inst.tree.n())?;
            }
            run_one(&plan, &inst, seed, args.oracle.p)
        })
        .collect();
    let jobs = jobs.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    if let Some(out) = &args.out {
        for job in &jobs {
            write_artifacts(out, &format!("s{}", job.row.seed), job)?;
        }
    }
    let rows: Vec<Row> = jobs.iter().map(|j| j.row.clone()).collect();
    write_rows(&rows, args.csv.as_deref())?;
    let failures: Vec<String> = jobs
        .iter()
        .filter_map(|j| j.failure.as_ref().map(|f| format!("seed {}: {f}", j.row.seed)))
        .collect();
    if !failures.is_empty() {
        return Err(AlgoFailure(failures.join("; ")).into());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct StreamArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Update file; defaults to inserting every edge of the instance graph.
    #[arg(long)]
    pub stream: Option<PathBuf>,
    /// Also run the offline pipeline on the net graph and require equality.
    #[arg(long)]
    pub check_offline: bool,
    /// Directory for the tree and memory ledger.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Net weights after the whole stream; cancelled pairs drop out.
fn net_graph(n: usize, updates: &[EdgeUpdate]) -> anyhow::Result<Graph> {
    let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for up in updates {
        *acc.entry((up.u.min(up.v), up.u.max(up.v))).or_insert(0.0) += up.delta();
    }
    let edges = acc.into_iter().filter(|&(_, w)| w != 0.0).map(|((u, v), w)| (u, v, w));
    Graph::new(n, edges).map_err(|e| Error::Stream(e.to_string()).into())
}

pub fn stream(args: &StreamArgs) -> anyhow::Result<()> {
    args.oracle.validate()?;
    let inst = args.instance.loader()?(args.seed)?;
    let n = inst.tree.n();
    args.params.check_exact_cuts(n)?;
    let updates = match (&args.stream, &inst.graph) {
        (Some(path), _) => io::stream_from_text(&fs::read_to_string(path)?)?,
        (None, Some(g)) => g.edges().iter().map(|e| EdgeUpdate::insert(e.u, e.v, e.w)).collect(),
        (None, None) => return Err(config_error("give --stream or a graph")),
    };
    let oracle = args.oracle.oracle(inst.tree.clone(), args.seed, args.oracle.p)?;
    let params = args.params.params(n, args.seed)?;
    let cuts = args.params.cuts(args.seed);

    let start = Instant::now();
    let mut state = StreamingState::init(n, &oracle, &params, &cuts)?;
    for up in &updates {
        state.feed(up)?;
    }
    let memory = state.memory();
    let tree = state.finalize()?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    let net = net_graph(n, &updates)?;
    let mut row = Row {
        n,
        seed: args.seed,
        p: Some(args.oracle.p),
        adversary: Some(args.oracle.adversary.clone()),
        algo: "stream".into(),
        objective: "das".into(),
        queries: Some(oracle.query_count().total),
        depth: Some(state.trace().max_depth()),
        wall_ms,
        mem_bits: Some(memory.total_bits),
        ..Row::default()
    };
    score(&mut row, &net, &tree, &inst.tree, Objective::Das, false)?;
    let mut failure = None;
    if args.check_offline {
        let offline = hc_das(&net, &oracle, &params, &cuts)?;
        let same = offline.tree == tree;
        row.consistency = Some(if same { "pass" } else { "fail" }.into());
        if !same {
            failure = Some("streamed tree differs from the offline pipeline".to_string());
        }
    }
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        fs::write(out.join(format!("stream-tree-s{}.json", args.seed)), io::tree_to_json(&tree))?;
        fs::write(
            out.join(format!("memory-s{}.json", args.seed)),
            serde_json::to_string_pretty(&memory)?,
        )?;
    }
    write_rows(&[row], args.csv.as_deref())?;
    match failure {
        Some(f) => Err(AlgoFailure(f).into()),
        None => Ok(()),
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Tree to evaluate.
    #[arg(long)]
    pub tree: PathBuf,
    /// Planted tree used as the optimum proxy.
    #[arg(long)]
    pub planted: Option<PathBuf>,
    #[arg(long, default_value = "das")]
    pub objective: String,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn eval(args: &EvalArgs) -> anyhow::Result<()> {
    let objective = parse_objective(&args.objective)?;
    let g = io::read_graph(&args.graph)?;
    let tree = io::read_tree(&args.tree)?;
    let universe: Vec<usize> = (0..g.n()).collect();
    if tree.vertices() != universe {
        return Err(config_error("tree leaves differ from the graph's vertex set"));
    }
    let mut row = Row {
        n: g.n(),
        algo: "eval".into(),
        objective: objective_name(objective).into(),
        ..Row::default()
    };
    let start = Instant::now();
    match &args.planted {
        Some(path) => {
            let planted = io::read_tree(path)?;
            if planted.vertices() != universe {
                return Err(config_error("planted tree leaves differ from the graph's vertex set"));
            }
            score(&mut row, &g, &tree, &planted, objective, true)?;
        }
        None => {
            let value = evaluate(&g, &tree, objective)?;
            row.value = Some(value);
            if g.n() <= BRUTE_FORCE_MAX {
                let opt = brute_force_opt(&g, objective)?.value;
                row.opt_exact = Some(opt);
                row.ratio_exact = ratio(value, opt);
            }
        }
    }
    row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    write_rows(&[row], args.csv.as_deref())
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value = "das")]
    pub objective: String,
    /// Comma-separated algorithms; defaults to the objective's pipeline and
    /// the oracle-free baselines.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub algos: Vec<Algo>,
    /// Noise sweep.
    #[arg(long, value_delimiter = ',', default_value = "1,0.95,0.9,0.8,0.75")]
    pub p_list: Vec<f64>,
    #[arg(long, default_value = "0..9")]
    pub seed: Seeds,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Noise sweep. Aborted builds are reported in the consistency column and do
/// not change the exit status.
pub fn bench(args: &BenchArgs) -> anyhow::Result<()> {
    let objective = parse_objective(&args.objective)?;
    let algos = if args.algos.is_empty() {
        match objective {
            Objective::Das => vec![Algo::HcDasFast, Algo::RecursiveSparsest, Algo::Planted],
            Objective::Mw => vec![Algo::HcMw, Algo::RecursiveSparsest, Algo::Planted],
        }
    } else {
        args.algos.clone()
    };
    for &p in &args.p_list {
        OracleArgs {
            p,
            adversary: args.oracle.adversary.clone(),
        }
        .validate()?;
    }
    let load = args.instance.loader()?;
    let mut tasks = Vec::new();
    for &seed in &args.seed.0 {
        for &algo in &algos {
            if algo.uses_oracle() {
                tasks.extend(args.p_list.iter().map(|&p| (seed, algo, p)));
            } else {
                tasks.push((seed, algo, f64::NAN));
            }
        }
    }
    let instances: BTreeMap<u64, Arc<Instance>> = args
        .seed
        .0
        .iter()
        .map(|&s| load(s).map(|i| (s, Arc::new(i))))
        .collect::<anyhow::Result<_>>()?;
    if algos.contains(&Algo::HcDas) {
        if let Some(inst) = instances.values().next() {
            args.params.check_exact_cuts(inst.tree.n())?;
        }
    }
    let rows: Vec<anyhow::Result<Row>> = tasks
        .par_iter()
        .map(|&(seed, algo, p)| {
            let plan = RunPlan {
                algo,
                objective,
                oracle: &args.oracle,
                params: &args.params,
                brute: true,
            };
            run_one(&plan, &instances[&seed], seed, p).map(|j| j.row)
        })
        .collect();
    let rows = rows.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    write_rows(&rows, args.csv.as_deref())
}
