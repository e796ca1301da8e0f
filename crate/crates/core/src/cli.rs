//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 input error.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    balance_by_rejection, export_jsonl, filter_split, import_jsonl, preset, validate_pool,
    BinSpec, ProblemInstance, PRESET_NAMES,
};
use crate::encode::encode_graph;
use crate::engine::{solve, DEFAULT_REFINEMENT_CAP};
use crate::generator::{generate_story, harvest_instances, GenConfig};
use crate::metrics::refinement_graph;
use crate::parser::parse_program;
use crate::pathing::StoryGraph;
use crate::proofs::{minimal_proofs, ProofGoal, SearchLimits};
use crate::stitch::{recursive_expand, replay};
use crate::story::{GroundAtom, Story};
use crate::syntax::Program;

#[derive(Debug, Parser)]
#[command(name = "storybench", version, about = "Generate, solve, measure, and export relational-reasoning benchmark instances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a story and print the relations entailed between two entities.
    Solve {
        #[arg(long)]
        world: PathBuf,
        story: PathBuf,
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        /// Print a minimal derivation per entailed relation.
        #[arg(long)]
        traces: bool,
        /// Print the story graph in DOT format with off-path edges dashed.
        #[arg(long)]
        dot: bool,
    },
    /// Print a metric table for an instance file.
    Metrics {
        #[arg(long)]
        world: PathBuf,
        instances: PathBuf,
    },
    /// Generate stories and harvest a problem-instance pool.
    Generate {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// Bound worker parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Filter (and optionally balance) a pool into a named split.
    Split {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        preset: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run up to this many balancing passes after filtering.
        #[arg(long)]
        balance_passes: Option<usize>,
    },
    /// Synthesize harder instances by stitching, or replay a lineage plan.
    Stitch {
        #[arg(long)]
        world: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replay one recorded stitch plan (path to its JSON) instead of
        /// searching for new pairs.
        #[arg(long)]
        replay: Option<PathBuf>,
        #[arg(long)]
        allow_ambiguous: bool,
    },
    /// Encode a story + query as an anonymized labeled graph (JSON).
    Encode {
        #[arg(long)]
        world: PathBuf,
        story: PathBuf,
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute labels/metrics over an export and report violations.
    Validate {
        #[arg(long)]
        world: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        preset: Option<String>,
    },
}

/// Reproducibility manifest written next to every `--out` file.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub world: Option<String>,
    pub config: Option<String>,
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub out: String,
    pub version: String,
    pub instance_count: usize,
    pub wall_ms: u128,
}

fn load_world(path: &Path) -> anyhow::Result<Program> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    let program = parse_program(&text)?;
    for w in &program.warnings {
        eprintln!("warning: {w}");
    }
    Ok(program)
}

fn load_story_file(path: &Path, world: &Program) -> anyhow::Result<Story> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    Ok(Story::from_program(&parse_program(&text)?, world)?)
}

fn write_manifest(manifest: &RunManifest, out: &Path) -> anyhow::Result<()> {
    let path = out.with_extension(format!(
        "{}manifest.json",
        out.extension().map(|e| format!("{}.", e.to_string_lossy())).unwrap_or_default()
    ));
    std::fs::write(&path, serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

fn lookup_preset(name: &str) -> anyhow::Result<crate::dataset::SplitSpec> {
    preset(name).ok_or_else(|| {
        anyhow::anyhow!("unknown preset `{name}`; expected one of: {}", PRESET_NAMES.join(", "))
    })
}

/// Runs a parsed command line, returning the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    let started = Instant::now();
    let limits = SearchLimits::default();
    match cli.command {
        Command::Solve { world, story, source, target, traces, dot } => {
            let program = load_world(&world)?;
            let story = load_story_file(&story, &program)?;
            let result = solve(&program, &story, DEFAULT_REFINEMENT_CAP)?;
            let relations = result.relations_between(&source, &target)?;
            let shown: Vec<&str> = relations.iter().map(String::as_str).collect();
            println!("R({source}, {target}) = {{{}}}", shown.join(", "));
            println!(
                "answer sets: {}  inconsistent refinements: {}",
                result.answer_set_count(),
                result.ref_minus().count()
            );
            if traces {
                if let Some(outcome) = result.ref_plus().next() {
                    for rel in &relations {
                        let goal = ProofGoal::Atom(GroundAtom::new(rel.clone(), &[&source, &target]));
                        let proofs = minimal_proofs(&outcome.closure, &goal, &limits)?;
                        println!("--- {rel}({source}, {target})");
                        print!("{}", proofs[0].trace());
                    }
                }
            }
            if dot {
                let graph = match result.ref_plus().next() {
                    Some(outcome) => refinement_graph(outcome, &story),
                    None => StoryGraph::of_story(&story),
                };
                print!("{}", graph.to_dot(Some((&source, &target))));
            }
            Ok(0)
        }
        Command::Metrics { world, instances } => {
            let program = load_world(&world)?;
            let pool = import_jsonl(&instances, &program)?;
            println!("id\tsource\ttarget\tlabels\tdepth\twidth\tbl\topec\thard");
            for inst in &pool {
                let labels: Vec<&str> = inst.labels.iter().map(String::as_str).collect();
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    inst.id,
                    inst.source,
                    inst.target,
                    labels.join(","),
                    inst.metrics.depth,
                    inst.metrics.width,
                    inst.metrics.bl,
                    inst.metrics.opec,
                    inst.hard_ambiguous
                );
            }
            Ok(0)
        }
        Command::Generate { world, config, seed, count, out, jobs } => {
            let program = load_world(&world)?;
            let cfg = match &config {
                Some(path) => GenConfig::from_toml(&std::fs::read_to_string(path)?)?,
                None => GenConfig::default(),
            };
            let pool = run_in_pool(jobs, || -> anyhow::Result<Vec<ProblemInstance>> {
                use rayon::prelude::*;
                let per_story: Vec<anyhow::Result<Vec<ProblemInstance>>> = (0..count)
                    .into_par_iter()
                    .map(|i| {
                        let story_seed = derive_seed(seed, i as u64);
                        let record = generate_story(&program, &cfg, story_seed)?;
                        harvest_instances(&program, &record, &limits, 8)
                    })
                    .collect();
                let mut pool = Vec::new();
                for r in per_story {
                    pool.extend(r?);
                }
                Ok(pool)
            })?;
            export_jsonl(&pool, &out)?;
            write_manifest(
                &RunManifest {
                    subcommand: "generate".into(),
                    world: Some(world.display().to_string()),
                    config: config.map(|p| p.display().to_string()),
                    seed: Some(seed),
                    preset: None,
                    out: out.display().to_string(),
                    version: env!("CARGO_PKG_VERSION").into(),
                    instance_count: pool.len(),
                    wall_ms: started.elapsed().as_millis(),
                },
                &out,
            )?;
            println!("generated {} stories, {} instances -> {}", count, pool.len(), out.display());
            Ok(0)
        }
        Command::Split { world, preset: name, input, out, balance_passes } => {
            let program = load_world(&world)?;
            let spec = lookup_preset(&name)?;
            let pool = import_jsonl(&input, &program)?;
            let mut split = filter_split(&pool, &spec);
            if let Some(passes) = balance_passes {
                split = balance_by_rejection(&split, &BinSpec::default(), passes, 1.25);
            }
            if split.is_empty() {
                eprintln!("warning: split `{name}` is empty for this pool");
            }
            export_jsonl(&split, &out)?;
            write_manifest(
                &RunManifest {
                    subcommand: "split".into(),
                    world: Some(world.display().to_string()),
                    config: None,
                    seed: None,
                    preset: Some(name),
                    out: out.display().to_string(),
                    version: env!("CARGO_PKG_VERSION").into(),
                    instance_count: split.len(),
                    wall_ms: started.elapsed().as_millis(),
                },
                &out,
            )?;
            Ok(0)
        }
        Command::Stitch { world, input, out, preset: name, rounds, seed, replay: replay_path, allow_ambiguous } => {
            let program = load_world(&world)?;
            let pool = import_jsonl(&input, &program)?;
            let emitted = match replay_path {
                Some(path) => {
                    let plan_json = std::fs::read_to_string(&path)
                        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
                    vec![replay(&program, &pool, plan_json.trim(), allow_ambiguous, &limits)?]
                }
                None => {
                    let name = name
                        .ok_or_else(|| anyhow::anyhow!("--preset is required unless --replay is used"))?;
                    let spec = lookup_preset(&name)?;
                    recursive_expand(&program, &pool, &spec, rounds, seed, allow_ambiguous, &limits)
                }
            };
            export_jsonl(&emitted, &out)?;
            write_manifest(
                &RunManifest {
                    subcommand: "stitch".into(),
                    world: Some(world.display().to_string()),
                    config: None,
                    seed: Some(seed),
                    preset: None,
                    out: out.display().to_string(),
                    version: env!("CARGO_PKG_VERSION").into(),
                    instance_count: emitted.len(),
                    wall_ms: started.elapsed().as_millis(),
                },
                &out,
            )?;
            println!("emitted {} instances -> {}", emitted.len(), out.display());
            Ok(0)
        }
        Command::Encode { world, story, source, target, out } => {
            let program = load_world(&world)?;
            let story = load_story_file(&story, &program)?;
            let result = solve(&program, &story, DEFAULT_REFINEMENT_CAP)?;
            let labels = result
                .relations_between(&source, &target)
                .unwrap_or_else(|_| BTreeSet::new());
            let graph = encode_graph(&story, &source, &target, &labels);
            let json = serde_json::to_string_pretty(&graph)?;
            match out {
                Some(path) => std::fs::write(&path, json)?,
                None => println!("{json}"),
            }
            Ok(0)
        }
        Command::Validate { world, input, preset: name } => {
            let program = load_world(&world)?;
            let spec = name.map(|n| lookup_preset(&n)).transpose()?;
            let pool = import_jsonl(&input, &program)?;
            let violations = validate_pool(&program, &pool, spec.as_ref(), &limits);
            if violations.is_empty() {
                println!("{} instances: ok", pool.len());
                Ok(0)
            } else {
                for v in &violations {
                    println!("violation: {v}");
                }
                Ok(1)
            }
        }
    }
}

/// Derives a per-story seed from the run seed (splitmix64 step).
fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9e3779b97f4a7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn run_in_pool<T>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}
