//! Batch command line.
//!
//! Every command that writes an output file also writes
//! `<out>.manifest.json` with the command line, SHA-256 digests of inputs,
//! configs and outputs, the seed, the tool version and timestamps. Output
//! files themselves never contain timestamps, so reruns with the same inputs
//! and seed produce identical bytes.
//!
//! Exit status: 0 on success, 1 on invalid usage or input (a JSON error
//! object is printed to stderr), 2 on internal failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::eval::{self, EvalReport, RandomForest};
use crate::features::{self, EmbeddingTable, FeatureSpec, Inputs};
use crate::forest::{self, ForestModel, ForestParams};
use crate::fpro;
use crate::ingest::{self, KindTable, MappingConfig, LoadOptions, ProductRecord, RequiredField};
use crate::ingredients::{self, AdditiveLexicon};
use crate::nova::NovaProbabilities;
use crate::nutrient::Nutrient;
use crate::profiler;
use crate::report::{self, MetricsTable};
use crate::scoring::{self, PointTables};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "fproxkit", version, about = "Food processing classification toolkit")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "FPROXKIT_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridChoice {
    /// 100/300 trees x depth 10/20/unbounded x min leaf 1/5.
    Default,
    /// 50 trees x depth 10/unbounded, for quick runs.
    Small,
}

#[derive(Debug, Args)]
pub struct ProductInput {
    /// Product table (CSV or TSV).
    #[arg(long)]
    pub input: PathBuf,
    /// Column mapping JSON; defaults to the canonical column names.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// nutrients11, nutrients11_plus_additives, ingredient_count_only,
    /// additive_count_only, embedding or embedding:<dim>.
    #[arg(long, default_value = "nutrients11")]
    pub spec: String,
    /// Additive lexicon CSV (code,name); defaults to the shipped lexicon.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Embedding CSV (`dim=<d>` line, then id,v0,...).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, clean and validate a product dump into canonical CSV.
    Ingest {
        #[command(flatten)]
        products: ProductInput,
        /// Category-to-kind rules JSON; defaults to the shipped table.
        #[arg(long)]
        kinds: Option<PathBuf>,
        /// Keep only rows with name, ingredients, NOVA label and all 11 nutrients.
        #[arg(long)]
        complete: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count ingredients and additives per product, or parse one `--text`.
    ParseIngredients {
        #[arg(long, conflicts_with = "text", required_unless_present = "text")]
        input: Option<PathBuf>,
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Parse a single ingredient string and print its tree as JSON.
        #[arg(long)]
        text: Option<String>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, required_unless_present = "text")]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Nutri-Score points and label per product.
    Nutriscore {
        #[command(flatten)]
        products: ProductInput,
        #[arg(long)]
        point_tables: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// SIGA class per product.
    Siga {
        #[command(flatten)]
        products: ProductInput,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Fit log10 nutrient statistics; CSV output gives per-product z-scores.
    Profile {
        #[command(flatten)]
        products: ProductInput,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Also write log-scale histograms to `<out>.histograms.csv`.
        #[arg(long)]
        histograms: bool,
    },
    /// Train a random forest on labelled products.
    Train {
        #[command(flatten)]
        products: ProductInput,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        n_trees: usize,
        /// Unbounded when omitted.
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long, default_value_t = 1)]
        min_samples_leaf: usize,
        /// Defaults to the ceiling of the square root of the feature count.
        #[arg(long)]
        features_per_split: Option<usize>,
        /// Model JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// NOVA probabilities per product.
    Predict {
        #[command(flatten)]
        products: ProductInput,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Rank products by FPro and write plot data with principal components.
    Fpro {
        #[command(flatten)]
        products: ProductInput,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Tuning holdout, grid search and five-fold evaluation.
    Evaluate {
        #[command(flatten)]
        products: ProductInput,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value = "default")]
        grid: GridChoice,
        /// Report JSON path; folds and curves go next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Comparison table from evaluation reports, and optional per-category FPro summaries.
    Report {
        /// Evaluation report JSON; repeat for several models.
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// FPro CSV from `fpro` (needs --products).
        #[arg(long, requires = "products")]
        scores: Option<PathBuf>,
        /// Product table supplying categories.
        #[arg(long)]
        products: Option<PathBuf>,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long, default_value_t = report::DEFAULT_MIN_N)]
        min_n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

/// Failure of a command, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, inputs or configuration (exit 1).
    Validation(String),
    /// Anything else (exit 2).
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    fn to_json(&self) -> String {
        let (kind, message) = match self {
            CliError::Validation(m) => ("validation", m),
            CliError::Internal(m) => ("internal", m),
        };
        serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Serialize)]
struct FileDigest {
    role: String,
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command_line: Vec<String>,
    digest_scheme: &'static str,
    seed: Option<u64>,
    threads: Option<usize>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    started_unix_ms: u128,
    finished_unix_ms: u128,
    elapsed_s: f64,
    notes: BTreeMap<String, serde_json::Value>,
}

fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Tracks what a run read and wrote.
struct Run {
    argv: Vec<String>,
    threads: Option<usize>,
    seed: Option<u64>,
    inputs: Vec<(String, PathBuf)>,
    outputs: Vec<(String, PathBuf)>,
    notes: BTreeMap<String, serde_json::Value>,
    started: u128,
    clock: Instant,
}

impl Run {
    fn input(&mut self, role: &str, path: &Path) {
        self.inputs.push((role.to_string(), path.to_path_buf()));
    }

    fn note(&mut self, key: &str, value: impl Serialize) {
        self.notes.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    fn write(&mut self, role: &str, path: &Path, bytes: &[u8]) -> CliResult<()> {
        std::fs::write(path, bytes).map_err(|e| internal(format!("writing {}: {e}", path.display())))?;
        self.outputs.push((role.to_string(), path.to_path_buf()));
        Ok(())
    }

    fn finish(self, primary: &Path) -> CliResult<()> {
        let digests = |files: &[(String, PathBuf)]| -> CliResult<Vec<FileDigest>> {
            files
                .iter()
                .map(|(role, p)| {
                    Ok(FileDigest { role: role.clone(), path: p.display().to_string(), sha256: sha256_file(p)? })
                })
                .collect()
        };
        let manifest = RunManifest {
            tool: "fproxkit",
            version: env!("CARGO_PKG_VERSION"),
            command_line: self.argv.clone(),
            digest_scheme: "sha256 of file bytes, lowercase hex",
            seed: self.seed,
            threads: self.threads,
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
            started_unix_ms: self.started,
            finished_unix_ms: unix_ms(),
            elapsed_s: self.clock.elapsed().as_secs_f64(),
            notes: self.notes,
        };
        let path = manifest_path(primary);
        let text = serde_json::to_vec_pretty(&manifest).map_err(internal)?;
        std::fs::write(&path, text).map_err(|e| internal(format!("writing {}: {e}", path.display())))
    }
}

/// `<out>.manifest.json`
pub fn manifest_path(out: &Path) -> PathBuf {
    sibling(out, "manifest.json")
}

/// `<out>.<suffix>`
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn load_mapping(run: &mut Run, path: Option<&Path>) -> CliResult<MappingConfig> {
    match path {
        Some(p) => {
            run.input("mapping", p);
            MappingConfig::from_path(p).map_err(invalid)
        }
        None => Ok(MappingConfig::canonical()),
    }
}

fn load_table(run: &mut Run, products: &ProductInput) -> CliResult<Vec<ProductRecord>> {
    load_table_from(run, &products.input, products.mapping.as_deref())
}

fn load_table_from(run: &mut Run, input: &Path, mapping: Option<&Path>) -> CliResult<Vec<ProductRecord>> {
    let mapping = load_mapping(run, mapping)?;
    run.input("products", input);
    let (records, report) = ingest::load_products(input, &mapping, &LoadOptions::builtin()).map_err(invalid)?;
    if report.rejected() > 0 {
        run.note("rows_rejected", &report.rejections);
    }
    Ok(records)
}

fn load_lexicon(run: &mut Run, path: Option<&Path>) -> CliResult<AdditiveLexicon> {
    match path {
        Some(p) => {
            run.input("lexicon", p);
            AdditiveLexicon::from_path(p).map_err(invalid)
        }
        None => Ok(AdditiveLexicon::builtin()),
    }
}

struct FeatureInputs {
    spec: FeatureSpec,
    lexicon: AdditiveLexicon,
    embeddings: Option<EmbeddingTable>,
}

fn feature_inputs(run: &mut Run, args: &FeatureArgs) -> CliResult<FeatureInputs> {
    let spec: FeatureSpec = args.spec.parse().map_err(invalid)?;
    let lexicon = load_lexicon(run, args.lexicon.as_deref())?;
    let embeddings = match &args.embeddings {
        Some(p) => {
            run.input("embeddings", p);
            Some(EmbeddingTable::load(p).map_err(invalid)?)
        }
        None if spec.needs_embeddings() => return Err(invalid("--spec embedding needs --embeddings")),
        None => None,
    };
    run.note("feature_spec", spec.name());
    Ok(FeatureInputs { spec, lexicon, embeddings })
}

fn assemble(run: &mut Run, table: &[ProductRecord], f: &FeatureInputs, require_label: bool) -> CliResult<features::Assembled> {
    let inputs = Inputs { lexicon: Some(&f.lexicon), embeddings: f.embeddings.as_ref(), require_label };
    let assembled = features::assemble(table, &f.spec, &inputs).map_err(invalid)?;
    if !assembled.dropped.is_empty() {
        run.note("rows_dropped", features::drop_summary(&assembled.dropped));
    }
    Ok(assembled)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(internal)?;
    for r in rows {
        w.write_record(&r).map_err(internal)?;
    }
    w.into_inner().map_err(internal)
}

fn json_bytes(value: &impl Serialize) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(internal)?;
    v.push(b'\n');
    Ok(v)
}

/// Rows as CSV or as a JSON array of objects keyed by the header.
fn table_bytes(format: Format, header: &[&str], rows: Vec<Vec<String>>) -> CliResult<Vec<u8>> {
    match format {
        Format::Csv => csv_bytes(header, rows),
        Format::Json => {
            let objs: Vec<BTreeMap<&str, String>> =
                rows.into_iter().map(|r| header.iter().copied().zip(r).collect()).collect();
            json_bytes(&objs)
        }
    }
}

fn load_model(run: &mut Run, path: &Path) -> CliResult<ForestModel> {
    run.input("model", path);
    forest::load_model(path).map_err(invalid)
}

fn probs_row(id: &str, p: &NovaProbabilities) -> Vec<String> {
    let a = p.as_array();
    let mut r = vec![id.to_string()];
    r.extend(a.iter().map(|v| v.to_string()));
    r.push(p.predict_class().to_string());
    r.push(fpro::fpro(p).value().to_string());
    r
}

fn execute(cli: Cli, run: &mut Run) -> CliResult<Option<PathBuf>> {
    match cli.command {
        Command::Ingest { products, kinds, complete, out } => {
            let mapping = load_mapping(run, products.mapping.as_deref())?;
            let mut options = LoadOptions::builtin();
            if let Some(k) = &kinds {
                run.input("kinds", k);
                options.kinds = KindTable::from_path(k).map_err(invalid)?;
            }
            run.input("products", &products.input);
            let (mut records, report) = ingest::load_products(&products.input, &mapping, &options).map_err(invalid)?;
            if complete {
                let before = records.len();
                records = ingest::filter_complete(&records, &RequiredField::case_study());
                run.note("incomplete_rows_removed", before - records.len());
            }
            let mut buf = Vec::new();
            ingest::write_products(&records, &mut buf).map_err(internal)?;
            run.write("products", &out, &buf)?;
            run.write("ingest_report", &sibling(&out, "report.json"), &json_bytes(&report)?)?;
            run.note("rows_written", records.len());
            Ok(Some(out))
        }
        Command::ParseIngredients { input, mapping, text, lexicon, out, format } => {
            let lexicon = load_lexicon(run, lexicon.as_deref())?;
            if let Some(text) = text {
                let tree = ingredients::parse_ingredients(&text);
                let additives: Vec<_> = ingredients::matched_additives(&tree, &lexicon)
                    .into_iter()
                    .map(|(name, code)| serde_json::json!({ "name": name, "code": code }))
                    .collect();
                let value = serde_json::json!({
                    "ingredient_count": ingredients::count_ingredients(&tree),
                    "additive_count": additives.len(),
                    "additives": additives,
                    "unbalanced": tree.unbalanced,
                    "tree": tree,
                });
                let bytes = json_bytes(&value)?;
                match out {
                    Some(out) => {
                        run.write("ingredients", &out, &bytes)?;
                        return Ok(Some(out));
                    }
                    None => {
                        std::io::stdout().write_all(&bytes).map_err(internal)?;
                        return Ok(None);
                    }
                }
            }
            let (input, out) = (input.expect("clap enforces --input"), out.expect("clap enforces --out"));
            let table = load_table_from(run, &input, mapping.as_deref())?;
            let rows = table
                .iter()
                .map(|r| {
                    let Some(text) = r.ingredients_text.as_deref() else {
                        return vec![r.id.clone(), String::new(), String::new(), String::new(), String::new()];
                    };
                    let tree = ingredients::parse_ingredients(text);
                    let matched = ingredients::matched_additives(&tree, &lexicon);
                    let codes: Vec<&str> = matched.iter().map(|(_, c)| *c).collect();
                    vec![
                        r.id.clone(),
                        ingredients::count_ingredients(&tree).to_string(),
                        matched.len().to_string(),
                        codes.join(";"),
                        tree.unbalanced.to_string(),
                    ]
                })
                .collect();
            let header = ["id", "ingredient_count", "additive_count", "additive_codes", "unbalanced"];
            run.write("ingredients", &out, &table_bytes(format, &header, rows)?)?;
            Ok(Some(out))
        }
        Command::Nutriscore { products, point_tables, out, format } => {
            let tables = match &point_tables {
                Some(p) => {
                    run.input("point_tables", p);
                    PointTables::from_path(p).map_err(invalid)?
                }
                None => PointTables::builtin(),
            };
            run.note("point_tables_version", &tables.version);
            let table = load_table(run, &products)?;
            let rows = table
                .iter()
                .map(|r| match scoring::nutriscore(r, &tables) {
                    Ok(s) => vec![
                        r.id.clone(),
                        s.scale.as_str().into(),
                        s.n_points.to_string(),
                        s.p_points.to_string(),
                        s.score.to_string(),
                        s.label.to_string(),
                        String::new(),
                    ],
                    Err(e) => {
                        let scale = scoring::Scale::for_kind(r.kind).as_str().to_string();
                        vec![r.id.clone(), scale, String::new(), String::new(), String::new(), String::new(), e.to_string()]
                    }
                })
                .collect();
            let header = ["id", "scale", "n_points", "p_points", "score", "label", "error"];
            run.write("nutriscore", &out, &table_bytes(format, &header, rows)?)?;
            Ok(Some(out))
        }
        Command::Siga { products, out, format } => {
            let table = load_table(run, &products)?;
            let rows = table
                .iter()
                .map(|r| {
                    let balanced = scoring::siga_balance(&r.panel, r.kind).map(|b| b.to_string()).unwrap_or_default();
                    match scoring::siga_for_record(r) {
                        Ok(c) => vec![r.id.clone(), c.to_string(), balanced, String::new()],
                        Err(e) => vec![r.id.clone(), String::new(), balanced, e.to_string()],
                    }
                })
                .collect();
            run.write("siga", &out, &table_bytes(format, &["id", "siga_class", "balanced", "error"], rows)?)?;
            Ok(Some(out))
        }
        Command::Profile { products, out, format, histograms } => {
            let table = load_table(run, &products)?;
            let stats = profiler::fit_stats(table.iter().map(|r| &r.panel)).map_err(invalid)?;
            let bytes = match format {
                Format::Json => json_bytes(&stats)?,
                Format::Csv => {
                    let mut header = vec!["id"];
                    header.extend(Nutrient::ALL.iter().map(|n| n.key()));
                    let rows: Vec<Vec<String>> = table
                        .iter()
                        .map(|r| {
                            let z = profiler::zscore(&r.panel, &stats);
                            let mut row = vec![r.id.clone()];
                            row.extend(Nutrient::ALL.iter().map(|&n| z.get(n).map(|v| v.to_string()).unwrap_or_default()));
                            row
                        })
                        .collect();
                    csv_bytes(&header, rows)?
                }
            };
            run.write("profile", &out, &bytes)?;
            if histograms {
                let panels: Vec<_> = table.iter().map(|r| &r.panel).collect();
                let mut buf = Vec::new();
                profiler::write_histograms(&panels, 10, &mut buf).map_err(internal)?;
                run.write("histograms", &sibling(&out, "histograms.csv"), &buf)?;
            }
            Ok(Some(out))
        }
        Command::Train { products, features, seed, n_trees, max_depth, min_samples_leaf, features_per_split, out } => {
            run.seed = Some(seed);
            let table = load_table(run, &products)?;
            let f = feature_inputs(run, &features)?;
            let (x, y) = assemble(run, &table, &f, true)?.labelled();
            let params = ForestParams { n_trees, max_depth, min_samples_leaf, features_per_split, seed };
            let model = forest::train(&x, &y, &params).map_err(invalid)?;
            if model.degenerate {
                run.note("warning", "all training labels are the same class");
            }
            run.note("training_rows", x.n_rows());
            run.write("model", &out, &model.to_json())?;
            Ok(Some(out))
        }
        Command::Predict { products, features, model, out, format } => {
            let table = load_table(run, &products)?;
            let f = feature_inputs(run, &features)?;
            let model = load_model(run, &model)?;
            let assembled = assemble(run, &table, &f, false)?;
            let probs = model.predict_matrix(&assembled.matrix).map_err(invalid)?;
            let rows = assembled.matrix.ids().iter().zip(&probs).map(|(id, p)| probs_row(id, p)).collect();
            let header = ["id", "p1", "p2", "p3", "p4", "predicted", "fpro"];
            run.write("predictions", &out, &table_bytes(format, &header, rows)?)?;
            Ok(Some(out))
        }
        Command::Fpro { products, features, model, out, format } => {
            let table = load_table(run, &products)?;
            let f = feature_inputs(run, &features)?;
            let model = load_model(run, &model)?;
            let assembled = assemble(run, &table, &f, false)?;
            let ranking = fpro::rank_by_fpro(&model, &assembled.matrix).map_err(invalid)?;
            if !ranking.rejects.is_empty() {
                run.note("rejects", &ranking.rejects);
            }
            let rows: Vec<[f64; 4]> = ranking.items.iter().map(|i| i.probs).collect();
            let pca = fpro::pca_decision_space(&rows).map_err(invalid)?;
            let bytes = match format {
                Format::Csv => {
                    let data = ranking.items.iter().zip(&pca.coords).map(|(item, c)| {
                        let mut r = vec![item.id.clone()];
                        r.extend(item.probs.iter().map(|v| v.to_string()));
                        r.extend([item.fpro.to_string(), c[0].to_string(), c[1].to_string()]);
                        r
                    });
                    csv_bytes(&["id", "p1", "p2", "p3", "p4", "fpro", "pc1", "pc2"], data)?
                }
                Format::Json => json_bytes(&serde_json::json!({ "ranking": ranking, "pca": pca }))?,
            };
            run.note("explained_variance", pca.explained_variance);
            run.write("fpro", &out, &bytes)?;
            Ok(Some(out))
        }
        Command::Evaluate { products, features, seed, grid, out } => {
            run.seed = Some(seed);
            let table = load_table(run, &products)?;
            let f = feature_inputs(run, &features)?;
            let (x, y) = assemble(run, &table, &f, true)?.labelled();
            let plan = eval::make_split_plan(&y, seed).map_err(invalid)?;
            let grid = match grid {
                GridChoice::Default => ForestParams::default_grid(seed),
                GridChoice::Small => [Some(10), None]
                    .into_iter()
                    .map(|max_depth| ForestParams { n_trees: 50, max_depth, seed, ..ForestParams::default() })
                    .collect(),
            };
            let outcome = eval::evaluate(&RandomForest, &f.spec.name(), &x, &y, &plan, &grid).map_err(invalid)?;
            run.note("timings", &outcome.timings);
            run.write("report", &out, &json_bytes(&outcome.report)?)?;
            let mut buf = Vec::new();
            plan.write_membership(x.ids(), &mut buf).map_err(internal)?;
            run.write("folds", &sibling(&out, "folds.csv"), &buf)?;
            let mut buf = Vec::new();
            eval::write_curves(&outcome.predictions, &mut buf).map_err(internal)?;
            run.write("curves", &sibling(&out, "curves.csv"), &buf)?;
            Ok(Some(out))
        }
        Command::Report { input, scores, products, mapping, min_n, out, format } => {
            let mut reports = Vec::new();
            for p in &input {
                run.input("eval_report", p);
                let text = std::fs::read(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
                let r: EvalReport = serde_json::from_slice(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
                reports.push(r);
            }
            let table: MetricsTable = report::metrics_table(&reports).map_err(invalid)?;
            let mut buf = Vec::new();
            match format {
                Format::Csv => table.write_csv(&mut buf).map_err(internal)?,
                Format::Json => table.write_json(&mut buf).map_err(internal)?,
            }
            run.write("metrics", &out, &buf)?;
            if let (Some(scores), Some(products)) = (scores, products) {
                let records = load_table_from(run, &products, mapping.as_deref())?;
                let categories: BTreeMap<&str, &str> = records
                    .iter()
                    .filter_map(|r| r.category.as_deref().map(|c| (r.id.as_str(), c)))
                    .collect();
                run.input("scores", &scores);
                let mut rdr = csv::Reader::from_path(&scores).map_err(invalid)?;
                let fpro_col = rdr
                    .headers()
                    .map_err(invalid)?
                    .iter()
                    .position(|h| h == "fpro")
                    .ok_or_else(|| invalid("scores file has no `fpro` column"))?;
                let mut scored = Vec::new();
                for rec in rdr.records() {
                    let rec = rec.map_err(invalid)?;
                    let v: f64 = rec[fpro_col].parse().map_err(|_| invalid(format!("bad fpro `{}`", &rec[fpro_col])))?;
                    if let Some(c) = categories.get(&rec[0]) {
                        scored.push((c.to_string(), v));
                    }
                }
                let summary = report::category_fpro_summary(scored.iter().map(|(c, v)| (c.as_str(), *v)), min_n);
                for w in &summary.warnings {
                    run.note("category_warning", w);
                }
                let (path, bytes) = match format {
                    Format::Csv => {
                        let mut buf = Vec::new();
                        report::write_category_csv(&summary.summaries, &mut buf).map_err(internal)?;
                        (sibling(&out, "categories.csv"), buf)
                    }
                    Format::Json => (sibling(&out, "categories.json"), json_bytes(&summary)?),
                };
                run.write("categories", &path, &bytes)?;
            }
            Ok(Some(out))
        }
    }
}

/// Runs one command. Returns the process exit status.
pub fn run<I, T>(args: I, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(stderr, "{e}");
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let mut run = Run {
        argv: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        threads: cli.threads,
        seed: None,
        inputs: Vec::new(),
        outputs: Vec::new(),
        notes: BTreeMap::new(),
        started: unix_ms(),
        clock: Instant::now(),
    };
    let result = match cli.threads {
        Some(0) => Err(invalid("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(internal)
            .and_then(|pool| pool.install(|| execute(cli, &mut run))),
        None => execute(cli, &mut run),
    };
    match result.and_then(|primary| match primary {
        Some(p) => run.finish(&p),
        None => Ok(()),
    }) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.exit_code()
        }
    }
}

/// Entry point for the binary: catches panics as internal errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    match std::panic::catch_unwind(|| run(args, &mut std::io::stderr())) {
        Ok(code) => code,
        Err(_) => {
            eprintln!("{}", CliError::Internal("unexpected panic".into()).to_json());
            2
        }
    }
}
