//! The `psl` command line.
//!
//! Exit codes: 0 on success, 1 for invalid input (program, data or flag
//! values), 2 for usage errors, 3 when inference fails (infeasible hard
//! constraints or a solver failure).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use psl_core::inference::{map_inference_weighted, objective_value, L2Weighting};
use psl_core::learning::{learn_weights, LearningConfig};
use psl_core::{
    parse_program, DistanceMetric, FactSet, GroundingContext, InferenceConfig, InferenceError, Interpretation,
    Program, ProgramError, SimilarityRegistry, TruthValue, WeightVector,
};

use crate::desugar::desugar_sets;
use crate::metrics::{f1_score, DecisionSet};
use crate::noise::{generate_noise, NoiseSpec, NoiseTargets};
use crate::oracle::brute_force_map;

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFERENCE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "psl", version, about = "Probabilistic similarity logic: inference, learning and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Metric {
    L1,
    L2,
}

#[derive(clap::Args, Debug)]
struct Model {
    /// Rule program (.psl).
    #[arg(short, long)]
    program: PathBuf,
    /// Fact files (TSV); may be repeated.
    #[arg(short = 'd', long = "data", required = true)]
    data: Vec<PathBuf>,
    /// Evidence values for open atoms (TSV).
    #[arg(short, long)]
    evidence: Option<PathBuf>,
    /// Distance metric: l1 (linear program) or l2 (squared, quadratic program).
    #[arg(long, value_enum, default_value = "l1")]
    metric: Metric,
    /// Weight each squared distance by w instead of w^2.
    #[arg(long)]
    per_term_weights: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// MAP inference; writes the inferred query values.
    Infer {
        #[command(flatten)]
        model: Model,
        #[arg(short, long)]
        output: PathBuf,
        /// Rule weights file (`ruleIndex<TAB>weight`).
        #[arg(short, long)]
        weights: Option<PathBuf>,
        /// Also write evidence values to the output.
        #[arg(long)]
        full: bool,
        /// Write the run report here instead of stderr.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        activation_threshold: f64,
    },
    /// Learns soft rule weights from labeled open atoms.
    Learn {
        #[command(flatten)]
        model: Model,
        /// Observed values of the query atoms (TSV).
        #[arg(short, long)]
        labels: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
        /// Return the last iterate instead of the average.
        #[arg(long)]
        no_averaging: bool,
    },
    /// Compares thresholded predictions with gold atoms.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Program whose schema fixes predicate arities.
        #[arg(short, long)]
        program: Option<PathBuf>,
        /// Only score atoms of this predicate.
        #[arg(long)]
        predicate: Option<String>,
    },
    /// Writes a noisy copy of a fact file.
    GenNoise {
        #[arg(short, long)]
        program: PathBuf,
        #[arg(short = 'd', long = "data")]
        data: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        attr_noise: f64,
        #[arg(long, default_value_t = 0.0)]
        struct_noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Attribute predicates (default: closed predicates typed `string` last).
        #[arg(long, value_delimiter = ',')]
        attributes: Vec<String>,
        /// Relation predicates (default: other closed binary predicates).
        #[arg(long, value_delimiter = ',')]
        relations: Vec<String>,
    },
    /// Exhaustive grid MAP for programs with at most 8 query atoms.
    Oracle {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value_t = 0.05)]
        grid_step: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rewrites set-similarity rules into element-level rules.
    Desugar {
        #[arg(short, long)]
        program: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

struct Failure {
    code: i32,
    message: String,
}

fn input(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_INPUT, message: message.into() }
}

impl From<InferenceError> for Failure {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::Grounding(g) => input(g.to_string()),
            InferenceError::Config(c) => input(c),
            other => Failure { code: EXIT_INFERENCE, message: other.to_string() },
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    let text = read(path)?;
    parse_program(&text).map_err(|e| match e {
        ProgramError::Syntax(p) => input(format!("{}:{p}", path.display())),
        invalid => input(format!("{}: {invalid}", path.display())),
    })
}

fn load_facts(program: &Program, paths: &[PathBuf]) -> Result<FactSet, Failure> {
    let mut facts = FactSet::new(program);
    for path in paths {
        facts.load_str(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?;
    }
    Ok(facts)
}

/// Values of open atoms read from `path`, interned into `facts`.
fn open_values(program: &Program, facts: &mut FactSet, path: &Path) -> Result<Vec<(psl_core::GroundAtom, f64)>, Failure> {
    let mut scratch = FactSet::new(program);
    scratch.load_str(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for decl in scratch.schema().to_vec() {
        let pid = scratch.predicate_id(&decl.name).expect("declared");
        for (atom, value) in scratch.facts(pid) {
            if decl.closed {
                return Err(input(format!(
                    "{}: `{}` is closed; closed facts belong in a data file",
                    path.display(),
                    decl.name
                )));
            }
            let names: Vec<&str> = atom.args.iter().map(|e| scratch.entity_name(*e)).collect();
            out.push((facts.atom(&decl.name, &names).expect("same schema"), value));
        }
    }
    Ok(out)
}

fn config(model: &Model) -> InferenceConfig {
    InferenceConfig {
        metric: match model.metric {
            Metric::L1 => DistanceMetric::L1,
            Metric::L2 => DistanceMetric::SquaredL2,
        },
        l2_weighting: if model.per_term_weights { L2Weighting::PerTerm } else { L2Weighting::InsideNorm },
        ..InferenceConfig::default()
    }
}

struct Loaded {
    program: Program,
    facts: FactSet,
    evidence: Interpretation,
}

fn load_model(model: &Model) -> Result<Loaded, Failure> {
    let program = load_program(&model.program)?;
    let mut facts = load_facts(&program, &model.data)?;
    let extra = match &model.evidence {
        Some(path) => open_values(&program, &mut facts, path)?,
        None => Vec::new(),
    };
    let mut evidence = Interpretation::from_facts(&facts);
    for (atom, value) in extra {
        evidence.set_evidence(atom, TruthValue::saturating(value));
    }
    Ok(Loaded { program, facts, evidence })
}

fn context<'a>(loaded: &'a Loaded, registry: &'a SimilarityRegistry) -> Result<GroundingContext<'a>, Failure> {
    GroundingContext::new(&loaded.program, &loaded.facts, registry).map_err(|e| input(e.to_string()))
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    let registry = SimilarityRegistry::default();
    match command {
        Command::Infer { model, output, weights, full, report, activation_threshold } => {
            let loaded = load_model(&model)?;
            let ctx = context(&loaded, &registry)?;
            let config = InferenceConfig { activation_threshold, ..config(&model) };
            let rule_weights = match weights {
                Some(path) => WeightVector::from_tsv(&loaded.program, &read(&path)?)
                    .map_err(|e| input(format!("{}: {e}", path.display())))?,
                None => WeightVector::from_program(&loaded.program),
            }
            .rule_weights(&loaded.program);
            let result = map_inference_weighted(&ctx, &loaded.evidence, &config, &rule_weights)?;
            let text = if full {
                result.interpretation.full_tsv(&loaded.facts)
            } else {
                result.interpretation.query_tsv(&loaded.facts)
            };
            write(&output, &text)?;
            let summary = format!("{}objective {:.6}\n", result.report, result.objective);
            match report {
                Some(path) => write(&path, &summary)?,
                None => eprint!("{summary}"),
            }
        }
        Command::Learn { model, labels, output, iterations, learning_rate, no_averaging } => {
            let mut loaded = load_model(&model)?;
            let labels = open_values(&loaded.program, &mut loaded.facts, &labels)?;
            let mut observed = loaded.evidence.clone();
            for (atom, value) in labels {
                observed
                    .set_query(atom, TruthValue::saturating(value))
                    .map_err(|e| input(format!("label conflicts with evidence: {e}")))?;
            }
            let ctx = context(&loaded, &registry)?;
            let learning = LearningConfig {
                learning_rate,
                iterations,
                averaging: !no_averaging,
                inference: config(&model),
                ..LearningConfig::default()
            };
            let learned = learn_weights(&ctx, &loaded.evidence, &observed, &learning)?;
            write(&output, &learned.to_tsv(&loaded.program))?;
            writeln!(out, "{learned}").ok();
        }
        Command::Eval { predictions, gold, threshold, program, predicate } => {
            if !(threshold > 0.0 && threshold < 1.0) {
                return Err(input(format!("threshold must lie in (0, 1), found {threshold}")));
            }
            let program = program.map(|p| load_program(&p)).transpose()?;
            let arity = |name: &str| program.as_ref().and_then(|p| p.predicate(name)).map(|d| d.arity());
            let parse = |path: &Path, t: f64| {
                DecisionSet::from_tsv(&read(path)?, t, arity).map_err(|e| input(format!("{}: {e}", path.display())))
            };
            let mut predicted = parse(&predictions, threshold)?;
            let mut gold = parse(&gold, threshold)?;
            if let Some(p) = predicate {
                predicted = predicted.restrict(&p);
                gold = gold.restrict(&p);
            }
            writeln!(out, "precision\trecall\tf1").ok();
            writeln!(out, "{}", f1_score(&predicted, &gold)).ok();
        }
        Command::GenNoise { program, data, output, attr_noise, struct_noise, seed, attributes, relations } => {
            let program = load_program(&program)?;
            let facts = load_facts(&program, &[data])?;
            let spec = NoiseSpec { attribute_noise: attr_noise, structural_noise: struct_noise, seed };
            spec.validate().map_err(input)?;
            let inferred = NoiseTargets::infer(&program);
            let targets = NoiseTargets {
                attributes: if attributes.is_empty() { inferred.attributes } else { attributes },
                relations: if relations.is_empty() { inferred.relations } else { relations },
            };
            for name in targets.attributes.iter().chain(&targets.relations) {
                if program.predicate(name).is_none() {
                    return Err(input(format!("unknown predicate `{name}`")));
                }
            }
            let noisy = generate_noise(&program, &facts, &spec, &targets).map_err(|e| input(e.to_string()))?;
            write(&output, &noisy.to_tsv())?;
        }
        Command::Oracle { model, grid_step, output } => {
            let loaded = load_model(&model)?;
            let ctx = context(&loaded, &registry)?;
            let config = config(&model);
            let result = brute_force_map(&ctx, &loaded.evidence, grid_step, &config).map_err(|e| input(e.to_string()))?;
            let Some(interp) = result.interpretation else {
                return Err(Failure { code: EXIT_INFERENCE, message: "no grid point satisfies the hard constraints".into() });
            };
            debug_assert_eq!(objective_value(&ctx, &interp, &config).ok(), Some(result.objective));
            if let Some(path) = output {
                write(&path, &interp.query_tsv(&loaded.facts))?;
            }
            writeln!(out, "objective\t{:.6}", result.objective).ok();
        }
        Command::Desugar { program, output } => {
            let text = desugar_sets(&load_program(&program)?).to_string();
            match output {
                Some(path) => write(&path, &text)?,
                None => {
                    write!(out, "{text}").ok();
                }
            }
        }
    }
    Ok(())
}

/// Runs the command line with `args` (including the program name) and
/// returns the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                write!(out, "{rendered}").ok();
            } else {
                write!(err, "{rendered}").ok();
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(failure) => {
            writeln!(err, "error: {}", failure.message).ok();
            failure.code
        }
    }
}
