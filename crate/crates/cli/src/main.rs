use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use labelprop::augment::{augment, load_embeddings, node_embeddings};
use labelprop::eval::{run_protocol, EvalConfig};
use labelprop::labels::write_output_to;
use labelprop::synthetic::{generate, PlantedPartition};
use labelprop::{
    load_gold, load_graph, load_seeds, partition_stats, propagate, run_bsp, DeltaMode, Graph, Hyperparams, Method,
    Propagation,
};

mod config;

const SUBCOMMANDS: [&str; 5] = ["propagate", "augment", "evaluate", "gen-synthetic", "partition-stats"];

/// Graph-based semi-supervised label propagation.
#[derive(Debug, Parser)]
#[command(name = "labelprop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate seed labels over a graph and write per-node label weights.
    #[command(args_override_self = true)]
    Propagate(PropagateArgs),
    /// Add embedding-similarity edges to a graph.
    #[command(args_override_self = true)]
    Augment(AugmentArgs),
    /// Compare methods with MRR and precision@K over seeded rounds.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Write a planted-partition graph with gold and seed labels.
    #[command(name = "gen-synthetic", args_override_self = true)]
    GenSynthetic(SyntheticArgs),
    /// Report partition sizes and cut edges for hash partitioning.
    #[command(name = "partition-stats", args_override_self = true)]
    PartitionStats(PartitionArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Worker threads; 1 runs single-threaded. Defaults to all cores.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,
    /// File of `key=value` lines used as defaults for this subcommand's flags.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MethodArgs {
    /// Seed fidelity weight.
    #[arg(long, default_value_t = 1.0)]
    mu1: f64,
    /// Neighbor smoothness weight.
    #[arg(long, default_value_t = 0.01)]
    mu2: f64,
    /// Uniform prior weight.
    #[arg(long, default_value_t = 0.01)]
    mu3: f64,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// Labels kept per node by streaming, freq-thresh and cm-sketch.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Residual assumed for labels a neighbor does not store: adaptive or uniform.
    #[arg(long, default_value_t = DeltaMode::Adaptive)]
    delta_mode: DeltaMode,
    /// Scores below this are dropped by freq-thresh.
    #[arg(long, default_value_t = 0.001)]
    freq_threshold: f64,
    #[arg(long, default_value_t = 109)]
    cm_width: usize,
    #[arg(long, default_value_t = 3)]
    cm_depth: usize,
    /// Stop the exact method early once no entry changes by more than this.
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for hashing and sampling.
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
}

impl MethodArgs {
    fn params(&self, method: Method) -> Hyperparams {
        Hyperparams {
            mu1: self.mu1,
            mu2: self.mu2,
            mu3: self.mu3,
            iterations: self.iterations,
            k: self.k,
            method,
            delta_mode: self.delta_mode,
            freq_threshold: self.freq_threshold,
            cm_width: self.cm_width,
            cm_depth: self.cm_depth,
            tolerance: self.tol,
            rng_seed: self.rng_seed,
        }
    }
}

#[derive(Debug, Args)]
struct PropagateArgs {
    /// Edge list: `src<TAB>dst[<TAB>weight]`.
    #[arg(long)]
    graph: PathBuf,
    /// Seed labels: `node<TAB>label[<TAB>weight]`.
    #[arg(long)]
    seeds: PathBuf,
    /// Output TSV; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// exact, streaming, freq-thresh or cm-sketch.
    #[arg(long, default_value_t = Method::Streaming)]
    method: Method,
    /// Hash partitions for the superstep engine.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    partitions: u32,
    #[command(flatten)]
    method_args: MethodArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Word vectors: `token<TAB>v1,v2,...`.
    #[arg(long)]
    embeddings: PathBuf,
    /// Output edge list; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Minimum cosine similarity for a new edge.
    #[arg(long, default_value_t = 0.6)]
    theta_sim: f64,
    /// Number of LSH tables.
    #[arg(long, default_value_t = 12)]
    lsh_tables: usize,
    /// Signature bits per LSH table.
    #[arg(long, default_value_t = 10)]
    lsh_width: usize,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Gold labels: `node<TAB>label[<TAB>weight]`.
    #[arg(long)]
    gold: PathBuf,
    /// Comma-separated methods to compare.
    #[arg(long, value_delimiter = ',', default_value = "exact,streaming,freq-thresh,cm-sketch")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    seeds_per_label: u32,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    rounds: u32,
    /// Comma-separated cutoffs for precision@K.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20")]
    ks: Vec<usize>,
    /// Also write the report as TSV.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    method_args: MethodArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SyntheticArgs {
    #[arg(long, default_value_t = 2)]
    clusters: usize,
    #[arg(long, default_value_t = 50)]
    nodes_per_cluster: usize,
    /// Edge probability inside a cluster.
    #[arg(long, default_value_t = 0.3)]
    intra: f64,
    /// Edge probability across clusters.
    #[arg(long, default_value_t = 0.01)]
    inter: f64,
    #[arg(long, default_value_t = 10)]
    seeds_per_cluster: usize,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Directory for graph.tsv, gold.tsv and seeds.tsv.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct PartitionArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    partitions: u32,
    #[command(flatten)]
    common: Common,
}

fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> anyhow::Result<()> {
    match path {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut out = BufWriter::new(file);
            f(&mut out).and_then(|_| out.flush()).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let stdout = io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            f(&mut out).and_then(|_| out.flush()).context("writing standard output")
        }
    }
}

fn report_iterations(run: &Propagation) {
    for (i, secs) in run.stats.iteration_secs.iter().enumerate() {
        match run.objectives.get(i + 1) {
            Some(obj) => eprintln!("iteration={} objective={obj:.6e} secs={secs:.6}", i + 1),
            None => eprintln!("iteration={} secs={secs:.6}", i + 1),
        }
    }
    eprintln!(
        "total_secs={:.6} peak_entries={} max_entries_per_node={}",
        run.stats.total_secs(),
        run.stats.peak_entries,
        run.stats.max_entries_per_node
    );
}

fn cmd_propagate(args: &PropagateArgs) -> anyhow::Result<()> {
    let params = args.method_args.params(args.method);
    params.validate()?;
    let graph = load_graph(&args.graph)?;
    let seeds = load_seeds(&args.seeds, &graph)?;
    log::info!(
        "graph: {} nodes, {} edges; {} labels, {} seeds; method {}",
        graph.node_count(),
        graph.edge_count(),
        seeds.label_count(),
        seeds.seed_nodes().count(),
        params.label()
    );
    let run = if args.partitions == 1 {
        propagate(&graph, &seeds, &params)?
    } else {
        run_bsp(&graph, &seeds, &params, args.partitions as usize).propagation
    };
    report_iterations(&run);
    with_output(args.output.as_deref(), |out| write_output_to(&run.dists, &graph, &seeds, out))
}

fn cmd_augment(args: &AugmentArgs) -> anyhow::Result<()> {
    let graph = load_graph(&args.graph)?;
    let table = load_embeddings(&args.embeddings)?;
    let embeddings = node_embeddings(&graph, &table);
    let covered = embeddings.iter().flatten().count();
    log::info!("{covered} of {} nodes have embeddings (dim {})", graph.node_count(), table.dim());
    let augmented = augment(&graph, &embeddings, args.theta_sim, args.lsh_tables, args.lsh_width, args.rng_seed)?;
    eprintln!(
        "edges: {} -> {} ({} added)",
        graph.edge_count(),
        augmented.edge_count(),
        augmented.edge_count() - graph.edge_count()
    );
    with_output(args.output.as_deref(), |out| augmented.write_tsv_to(out))
}

fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<()> {
    let methods: Vec<Hyperparams> = args.methods.iter().map(|&m| args.method_args.params(m)).collect();
    let config = EvalConfig {
        seeds_per_label: args.seeds_per_label as usize,
        rounds: args.rounds as usize,
        ks: args.ks.clone(),
        rng_seed: args.method_args.rng_seed,
    };
    config.validate()?;
    for p in &methods {
        p.validate()?;
    }
    let graph = load_graph(&args.graph)?;
    let gold = load_gold(&args.gold, &graph)?;
    let report = run_protocol(&graph, &gold, &methods, &config)?;
    if let Some(path) = &args.output {
        std::fs::write(path, report.to_tsv()).with_context(|| format!("writing {}", path.display()))?;
    }
    with_output(None, |out| out.write_all(report.to_table().as_bytes()))
}

fn cmd_gen_synthetic(args: &SyntheticArgs) -> anyhow::Result<()> {
    let data = generate(&PlantedPartition {
        clusters: args.clusters,
        nodes_per_cluster: args.nodes_per_cluster,
        intra: args.intra,
        inter: args.inter,
        seeds_per_cluster: args.seeds_per_cluster,
        rng_seed: args.rng_seed,
    })?;
    data.write(&args.out_dir)?;
    eprintln!(
        "wrote {} nodes, {} edges, {} seeds to {}",
        data.graph.node_count(),
        data.graph.edge_count(),
        data.seed_nodes.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_partition_stats(args: &PartitionArgs) -> anyhow::Result<()> {
    let graph: Graph = load_graph(&args.graph)?;
    let stats = partition_stats(&graph, args.partitions as usize);
    with_output(None, |out| {
        writeln!(out, "partition\tnodes\tcross_edges")?;
        for p in &stats.partitions {
            writeln!(out, "{}\t{}\t{}", p.id, p.nodes, p.cross_edges)?;
        }
        writeln!(out, "cut\t{}\t{}", graph.edge_count(), stats.cut_edges)
    })
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Propagate(a) => &a.common,
            Command::Augment(a) => &a.common,
            Command::Evaluate(a) => &a.common,
            Command::GenSynthetic(a) => &a.common,
            Command::PartitionStats(a) => &a.common,
        }
    }

    fn run(&self) -> anyhow::Result<()> {
        match self {
            Command::Propagate(a) => cmd_propagate(a),
            Command::Augment(a) => cmd_augment(a),
            Command::Evaluate(a) => cmd_evaluate(a),
            Command::GenSynthetic(a) => cmd_gen_synthetic(a),
            Command::PartitionStats(a) => cmd_partition_stats(a),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let args = match config::expand(std::env::args_os().collect(), &SUBCOMMANDS) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    let result = match cli.command.common().workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .context("starting worker pool")
            .and_then(|pool| pool.install(|| cli.command.run())),
        None => cli.command.run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
