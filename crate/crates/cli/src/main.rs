use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use nl2erm::assemble::{
    emit_database, emit_stats, export_diagram, group_by_db, load_annotations, load_model, stats,
    AnnotationRecord, DatabaseOutput, DiagramFormat, OutputError, ANNOTATIONS_FILE, MODEL_FILE,
};
use nl2erm::eval::{load_gold, score, AttributeKey, EvalOptions};
use nl2erm::ingest::{load_examples_for, load_schemas_partitioned, IngestError};
use nl2erm::link::{Label, Linker, Stopwords, DEFAULT_MAX_NGRAM};
use nl2erm::model::{DatabaseSchema, Normalizer};
use nl2erm::sql::{extract_references, oracle_sweep};
use nl2erm::{process_database, transform_schema};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "nl2erm",
    version,
    about = "Build NL-to-ER-model datasets from text-to-SQL corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Annotate a corpus and write the dataset.
    Transform(TransformArgs),
    /// Annotate one utterance/query pair and print the result.
    Link(LinkArgs),
    /// Score a predicted ER model against a gold one.
    Eval(EvalArgs),
    /// Render an ER model as a diagram.
    Export(ExportArgs),
    /// Summarize a dataset written by `transform`.
    Stats(StatsArgs),
    /// Compare extracted tables and columns with the corpus's pre-parsed queries.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct LinkerArgs {
    /// Stopword list, one word per line.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Compare lowercased tokens without lemmatizing.
    #[arg(long)]
    no_lemmatize: bool,
    /// Longest n-gram tried.
    #[arg(long, default_value_t = DEFAULT_MAX_NGRAM, value_parser = clap::value_parser!(usize))]
    max_ngram: usize,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long)]
    schemas: PathBuf,
    #[arg(long)]
    examples: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    linker: LinkerArgs,
    /// Worker threads (0 picks one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value = "dot")]
    diagram: DiagramFormat,
}

#[derive(Args)]
struct LinkArgs {
    #[arg(long)]
    schemas: PathBuf,
    #[arg(long)]
    db_id: String,
    #[arg(long)]
    utterance: String,
    #[arg(long)]
    sql: String,
    #[command(flatten)]
    linker: LinkerArgs,
}

#[derive(Args)]
struct EvalArgs {
    gold: PathBuf,
    pred: PathBuf,
    /// Count inferred elements (the default).
    #[arg(long, overrides_with = "exclude_inferred")]
    include_inferred: bool,
    /// Ignore elements added only to repair the model.
    #[arg(long)]
    exclude_inferred: bool,
    /// `owner-and-name` or `name`.
    #[arg(long, default_value = "owner-and-name")]
    attribute_key: AttributeKey,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExportArgs {
    model: PathBuf,
    /// `dot` or `mermaid`.
    #[arg(long, default_value = "dot")]
    format: DiagramFormat,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    out_dir: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    schemas: PathBuf,
    #[arg(long)]
    examples: PathBuf,
    /// JSON file with an `indices` array selecting pairs by position.
    #[arg(long)]
    sample: Option<PathBuf>,
    /// Write the full report (with every disagreement) here.
    #[arg(long)]
    report: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        if e.is_missing_file() {
            Failure::usage(e.to_string())
        } else {
            Failure::input(e.to_string())
        }
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        if e.is_missing_file() {
            Failure::usage(e.to_string())
        } else {
            Failure::input(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Transform(args) => transform(args),
        Command::Link(args) => link(args),
        Command::Eval(args) => eval(args),
        Command::Export(args) => export(args),
        Command::Stats(args) => stats_cmd(args),
        Command::Oracle(args) => oracle(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn build_linker(args: &LinkerArgs) -> Result<Linker, Failure> {
    if args.max_ngram == 0 {
        return Err(Failure::usage("--max-ngram must be at least 1"));
    }
    let normalizer = if args.no_lemmatize {
        Normalizer::without_lemmatization()
    } else {
        Normalizer::default()
    };
    let stopwords = match &args.stopwords {
        Some(path) => Stopwords::load(path, &normalizer).map_err(|e| {
            let message = format!("{}: {e}", path.display());
            if e.kind() == std::io::ErrorKind::NotFound {
                Failure::usage(message)
            } else {
                Failure::input(message)
            }
        })?,
        None => Stopwords::default_for(&normalizer),
    };
    Ok(Linker::new(normalizer, stopwords, args.max_ngram))
}

fn transform(args: TransformArgs) -> Result<u8, Failure> {
    let linker = build_linker(&args.linker)?;
    let (schemas, bad_schemas) = load_schemas_partitioned(&args.schemas)?;
    let known: HashSet<&str> = schemas
        .iter()
        .map(|s| s.db_id())
        .chain(bad_schemas.iter().map(|(id, _)| id.as_str()))
        .collect();
    let examples = load_examples_for(&args.examples, &known)?;
    let by_id: HashMap<&str, &DatabaseSchema> = schemas.iter().map(|s| (s.db_id(), s)).collect();
    let bad: HashMap<&str, &IngestError> =
        bad_schemas.iter().map(|(id, e)| (id.as_str(), e)).collect();
    let groups: Vec<(&str, Vec<_>)> = group_by_db(&examples).into_iter().collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Failure::usage(e.to_string()))?;
    let results: Vec<(&str, Result<DatabaseOutput, String>)> = pool.install(|| {
        groups
            .par_iter()
            .map(|(db_id, pairs)| {
                let result = match (by_id.get(db_id), bad.get(db_id)) {
                    (Some(schema), _) => process_database(schema, pairs, &linker)
                        .map_err(|e| e.to_string())
                        .and_then(|out| {
                            emit_database(&args.out, &out, args.diagram)
                                .map(|()| out)
                                .map_err(|e| e.to_string())
                        }),
                    (None, Some(e)) => Err(e.to_string()),
                    (None, None) => Err(format!("no schema for {db_id}")),
                };
                (*db_id, result)
            })
            .collect()
    });

    fs::create_dir_all(&args.out)
        .map_err(|e| Failure::input(format!("{}: {e}", args.out.display())))?;
    let outputs: Vec<&DatabaseOutput> = results
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok())
        .collect();
    let failures: BTreeMap<&str, &String> = results
        .iter()
        .filter_map(|(id, r)| r.as_ref().err().map(|e| (*id, e)))
        .collect();
    let corpus = stats(outputs.iter().map(|o| (&o.records[..], &o.model)));
    emit_stats(&args.out, &corpus)?;
    let failures_path = args.out.join("failures.json");
    let failures_doc =
        serde_json::to_string_pretty(&failures).expect("plain data serializes") + "\n";
    fs::write(&failures_path, failures_doc)
        .map_err(|e| Failure::input(format!("{}: {e}", failures_path.display())))?;

    println!(
        "{:<32} {:>10} {:>7} {:>8} {:>10} {:>13}",
        "db_id", "utterances", "skipped", "entities", "attributes", "relationships"
    );
    for o in &outputs {
        println!(
            "{:<32} {:>10} {:>7} {:>8} {:>10} {:>13}",
            o.db_id,
            o.records.len(),
            o.diagnostics.skipped.len(),
            o.model.entities().count(),
            o.model.attributes().count(),
            o.model.relationships().count()
        );
    }
    for (id, e) in &failures {
        println!("{id:<32} FAILED: {e}");
    }
    let skipped: usize = outputs.iter().map(|o| o.diagnostics.skipped.len()).sum();
    println!(
        "{} models / {} utterances ({} pairs skipped, {} databases failed)",
        corpus.models,
        corpus.utterances,
        skipped,
        failures.len()
    );
    Ok(if failures.is_empty() { 0 } else { EXIT_PARTIAL })
}

fn link(args: LinkArgs) -> Result<u8, Failure> {
    let linker = build_linker(&args.linker)?;
    let (schemas, bad) = load_schemas_partitioned(&args.schemas)?;
    if let Some((_, e)) = bad.iter().find(|(id, _)| *id == args.db_id) {
        return Err(Failure::input(e.to_string()));
    }
    let schema = schemas
        .iter()
        .find(|s| s.db_id() == args.db_id)
        .ok_or_else(|| Failure::input(format!("unknown db_id {:?}", args.db_id)))?;
    let (raw, _) = transform_schema(schema).map_err(|e| Failure::input(e.to_string()))?;
    let refs = extract_references(&args.sql, schema).map_err(|e| Failure::input(e.to_string()))?;
    let ann = linker.annotate(&args.utterance, None, &refs, &raw, schema);

    println!("tokens:");
    for (i, (t, l)) in ann.tokens.iter().zip(&ann.labels).enumerate() {
        let label = match l {
            Label::Table => "Table",
            Label::Column => "Column",
            Label::Other => "Other",
        };
        println!("  {i:>3}  {:<20} {label}", t.text);
    }
    println!("spans:");
    for s in &ann.spans {
        let surface: Vec<&str> = ann.tokens[s.start..s.end]
            .iter()
            .map(|t| t.text.as_str())
            .collect();
        println!(
            "  [{}..{}) {:?} -> {:?} {} ({:?}, {:?})",
            s.start,
            s.end,
            surface.join(" "),
            s.kind,
            describe(&raw.model, s.element),
            s.match_kind,
            s.element
        );
    }
    let list = |ids: &std::collections::BTreeSet<nl2erm::ElementId>| {
        ids.iter()
            .map(|&id| describe(&raw.model, id))
            .collect::<Vec<_>>()
            .join(", ")
    };
    println!("e: {{{}}}", list(&ann.entities));
    println!("a: {{{}}}", list(&ann.attributes));
    println!("r: {{{}}}", list(&ann.relationships));
    Ok(0)
}

/// `teacher`, `teacher.name`, `teach(teacher, student)`.
fn describe(model: &nl2erm::ErModel, id: nl2erm::ElementId) -> String {
    let name = |id| {
        model
            .name_of(id)
            .map(|n| n.original.clone())
            .unwrap_or_default()
    };
    if let Some(a) = model.attribute(id) {
        return format!("{}.{}", name(a.owner), a.name);
    }
    if let Some(r) = model.relationship(id) {
        return format!(
            "{}({}, {})",
            r.name,
            name(r.endpoints.0),
            name(r.endpoints.1)
        );
    }
    name(id)
}

fn eval(args: EvalArgs) -> Result<u8, Failure> {
    let gold = load_gold(&args.gold)?;
    let pred = load_model(&args.pred)?;
    let options = EvalOptions {
        include_inferred: !args.exclude_inferred || args.include_inferred,
        attribute_key: args.attribute_key,
    };
    let report = score(&gold, &pred, &options);
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("plain data serializes")
        );
    } else {
        print!("{}", report.to_table());
    }
    Ok(0)
}

fn export(args: ExportArgs) -> Result<u8, Failure> {
    let model = load_model(&args.model)?;
    let text = export_diagram(&model, args.format);
    match &args.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
        }
        None => print!("{text}"),
    }
    Ok(0)
}

fn read_dataset(dir: &Path) -> Result<Vec<(Vec<AnnotationRecord>, nl2erm::ErModel)>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| {
        let message = format!("{}: {e}", dir.display());
        if e.kind() == std::io::ErrorKind::NotFound {
            Failure::usage(message)
        } else {
            Failure::input(message)
        }
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MODEL_FILE).is_file())
        .collect();
    dirs.sort();
    dirs.iter()
        .map(|d| {
            let model =
                load_model(d.join(MODEL_FILE)).map_err(|e| Failure::input(e.to_string()))?;
            let records = load_annotations(d.join(ANNOTATIONS_FILE))
                .map_err(|e| Failure::input(e.to_string()))?;
            Ok((records, model))
        })
        .collect()
}

fn stats_cmd(args: StatsArgs) -> Result<u8, Failure> {
    let dataset = read_dataset(&args.out_dir)?;
    let s = stats(dataset.iter().map(|(r, m)| (&r[..], m)));
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&s).expect("plain data serializes")
        );
        return Ok(0);
    }
    println!("models                   {}", s.models);
    println!("utterances               {}", s.utterances);
    println!("mean tokens              {:.1}", s.mean_tokens);
    println!("                         per-utterance  final models");
    println!(
        "entities                 {:>13}  {:>12}",
        s.utterance_entities, s.model_entities
    );
    println!(
        "attributes               {:>13}  {:>12}",
        s.utterance_attributes, s.model_attributes
    );
    println!(
        "relationships            {:>13}  {:>12}",
        s.utterance_relationships, s.model_relationships
    );
    println!(
        "  entity-attribute       {:>13}  {:>12}",
        s.utterance_containments, s.model_containments
    );
    println!(
        "  entity-entity          {:>13}  {:>12}",
        s.utterance_entity_entity, s.model_entity_entity
    );
    println!("inferred (final models)  {}", s.model_inferred);
    Ok(0)
}

fn oracle(args: OracleArgs) -> Result<u8, Failure> {
    let (schemas, _) = load_schemas_partitioned(&args.schemas)?;
    let by_id: HashMap<&str, &DatabaseSchema> = schemas.iter().map(|s| (s.db_id(), s)).collect();
    let known: HashSet<&str> = by_id.keys().copied().collect();
    let examples = load_examples_for(&args.examples, &known)?;
    let selected: Vec<_> = match &args.sample {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                let message = format!("{}: {e}", path.display());
                if e.kind() == std::io::ErrorKind::NotFound {
                    Failure::usage(message)
                } else {
                    Failure::input(message)
                }
            })?;
            let doc: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            let indices = doc
                .get("indices")
                .and_then(|v| v.as_array())
                .ok_or_else(|| {
                    Failure::input(format!("{}: missing \"indices\" array", path.display()))
                })?;
            let mut out = Vec::with_capacity(indices.len());
            for v in indices {
                let i = v
                    .as_u64()
                    .map(|i| i as usize)
                    .filter(|&i| i < examples.len())
                    .ok_or_else(|| Failure::input(format!("{}: bad index {v}", path.display())))?;
                out.push(&examples[i]);
            }
            out
        }
        None => examples.iter().collect(),
    };
    let sweep = oracle_sweep(selected.iter().copied(), &by_id);
    println!(
        "compared {}  tables agree {} ({:.1}%)  columns agree {} ({:.1}%)",
        sweep.compared,
        sweep.tables_agree,
        100.0 * sweep.table_agreement,
        sweep.columns_agree,
        100.0 * sweep.column_agreement
    );
    if let Some(path) = &args.report {
        let doc = serde_json::to_string_pretty(&sweep).expect("plain data serializes") + "\n";
        fs::write(path, doc).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }
    Ok(0)
}
