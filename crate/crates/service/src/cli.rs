//! Command-line interface. Exit codes: 0 success, 1 domain error, 2 usage error.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use uisim_core::dataset::{self, BuildConfig, FsFrameSource, DEFAULT_MAX_IN_FLIGHT};
use uisim_core::engine::{SimAction, TransitionEngine};
use uisim_core::fid::{self, BuiltinExtractor, FeatureExtractor, FidReport, SqrtMethod};
use uisim_core::layout::{parse_layout, ScreenLayout};
use uisim_core::raster::{self, Image};
use uisim_core::session::{self, NodeId, RolloutRequest, SessionError, SessionManager, SessionStore, SessionTree};
use uisim_remote::{EndpointConfig, RemoteActionAnnotator, RemoteEmbedder, RemoteLayoutAnnotator};

use crate::api;
use crate::config::{ConfigError, ConfigOverrides, PredictorSpec, RendererSpec, ServiceConfig};
use crate::views::{session_problem, Problem, RolloutView, SessionView, StepView};

#[derive(Debug, Parser)]
#[command(name = "uisim", version, about = "Two-stage mobile UI simulator")]
pub struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// TOML config file.
    #[arg(long, global = true, value_name = "FILE", env = "UISIM_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Rasterize a layout DSL file to PNG.
    Render(RenderArgs),
    /// One two-stage step from a screenshot, without a session.
    Step(StepArgs),
    /// A sequence of steps from a screenshot, without a session.
    Rollout(RolloutArgs),
    /// Persistent session trees in the store.
    #[command(subcommand)]
    Session(SessionCommand),
    /// Trajectory-to-training-data pipeline.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Fréchet distance between two image directories.
    Fid(FidArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// rule:demo, rule:<graph.json> or remote:<url>.
    #[arg(long, value_name = "SPEC")]
    pub predictor: Option<PredictorSpec>,
    /// builtin or remote:<url>.
    #[arg(long, value_name = "SPEC")]
    pub renderer: Option<RendererSpec>,
    #[arg(long)]
    pub theme: Option<String>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    /// Per-stage timeout in seconds.
    #[arg(long, value_name = "SECS")]
    pub timeout: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct StoreArgs {
    #[arg(long, value_name = "DIR")]
    pub store_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub max_sessions: Option<usize>,
    /// Allowed CORS origin; repeatable. `*` allows any.
    #[arg(long = "cors-origin", value_name = "ORIGIN")]
    pub cors_origins: Vec<String>,
    #[command(flatten)]
    pub store: StoreArgs,
    #[command(flatten)]
    pub backends: BackendArgs,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub layout: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub theme: Option<String>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
}

#[derive(Debug, Args)]
pub struct StepArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Layout of the input screen, if known.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Action text, or a JSON action object.
    #[arg(long)]
    pub action: String,
    /// Output path prefix; writes PREFIX.uil and PREFIX.png.
    #[arg(short, long, default_value = "next")]
    pub output: PathBuf,
    #[command(flatten)]
    pub backends: BackendArgs,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Repeatable; applied in order.
    #[arg(long = "action", required = true)]
    pub actions: Vec<String>,
    #[arg(long)]
    pub continue_on_error: bool,
    /// Output path prefix; writes PREFIX-NN.uil and PREFIX-NN.png.
    #[arg(short, long, default_value = "step")]
    pub output: PathBuf,
    #[command(flatten)]
    pub backends: BackendArgs,
}

#[derive(Debug, Subcommand)]
pub enum SessionCommand {
    /// Start a session from a screenshot.
    Create {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        backends: BackendArgs,
    },
    /// List stored sessions.
    List {
        #[command(flatten)]
        store: StoreArgs,
    },
    /// Print a session tree.
    Show {
        session: String,
        #[command(flatten)]
        store: StoreArgs,
    },
    /// Step from a node and append the result.
    Step {
        session: String,
        #[arg(long, default_value_t = 0)]
        from: NodeId,
        #[arg(long)]
        action: String,
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        backends: BackendArgs,
    },
    /// Apply actions in order from a node.
    Rollout {
        session: String,
        #[arg(long, default_value_t = 0)]
        from: NodeId,
        #[arg(long = "action", required = true)]
        actions: Vec<String>,
        #[arg(long)]
        continue_on_error: bool,
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        backends: BackendArgs,
    },
    /// Write a node's image as PNG.
    Image {
        session: String,
        node: NodeId,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        store: StoreArgs,
    },
    /// Print a node's layout DSL.
    Layout {
        session: String,
        node: NodeId,
        #[command(flatten)]
        store: StoreArgs,
    },
}

#[derive(Debug, Args)]
pub struct AnnotatorArgs {
    /// Annotation backend base URL.
    #[arg(long, env = "UISIM_ANNOTATOR_URL")]
    pub annotator_url: String,
    #[arg(long, default_value_t = DEFAULT_MAX_IN_FLIGHT)]
    pub max_in_flight: usize,
    #[arg(long, value_name = "SECS", default_value_t = 60.0)]
    pub timeout: f64,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// List keypoint pairs.
    Extract {
        #[arg(long)]
        episodes: PathBuf,
    },
    /// Annotate every pair and write example records as JSONL.
    Annotate {
        #[arg(long)]
        episodes: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        annotator: AnnotatorArgs,
    },
    /// Annotate, split and write train/eval JSONL plus a manifest.
    Build {
        #[arg(long)]
        episodes: PathBuf,
        #[arg(short, long)]
        out_dir: PathBuf,
        #[arg(long)]
        train_target: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        annotator: AnnotatorArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SqrtArg {
    Eigen,
    NewtonSchulz,
}

impl From<SqrtArg> for SqrtMethod {
    fn from(a: SqrtArg) -> Self {
        match a {
            SqrtArg::Eigen => SqrtMethod::SymmetricEigen,
            SqrtArg::NewtonSchulz => SqrtMethod::NewtonSchulz,
        }
    }
}

#[derive(Debug, Args)]
pub struct FidArgs {
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// Remote embedder base URL; the built-in extractor is used otherwise.
    #[arg(long, env = "UISIM_EMBEDDER_URL")]
    pub embedder_url: Option<String>,
    #[arg(long, default_value = "embedder")]
    pub embedder_name: String,
    #[arg(long, default_value_t = 2048)]
    pub embedder_dim: usize,
    #[arg(long, value_enum, default_value_t = SqrtArg::Eigen)]
    pub sqrt_method: SqrtArg,
    /// Earlier report to compare against; must use the same extractor.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Also write the report here.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain { message: String, problem: Option<Problem> },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain { .. } => 1,
        }
    }

    fn domain(message: impl Into<String>) -> Self {
        CliError::Domain {
            message: message.into(),
            problem: None,
        }
    }

    /// JSON form for `--json` error output.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Usage(m) => serde_json::json!({ "code": "usage", "message": m }),
            CliError::Domain { problem: Some(p), .. } => serde_json::to_value(p).expect("problem serializes"),
            CliError::Domain { message, .. } => serde_json::json!({ "code": "error", "message": message }),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Domain { message, .. } => f.write_str(message),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        CliError::Domain {
            message: e.to_string(),
            problem: Some(session_problem(&e).1),
        }
    }
}

/// What a command prints: text for people, JSON for `--json`.
#[derive(Debug)]
pub struct Output {
    pub text: String,
    pub json: serde_json::Value,
}

impl Output {
    fn new(text: impl Into<String>, json: impl Serialize) -> Self {
        Output {
            text: text.into(),
            json: serde_json::to_value(json).expect("output serializes"),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::domain(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::domain(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::domain(format!("{}: {e}", path.display())))
}

fn read_layout(path: &Path) -> Result<ScreenLayout, CliError> {
    let text = String::from_utf8(read(path)?).map_err(|e| CliError::domain(format!("{}: {e}", path.display())))?;
    parse_layout(&text).map_err(|e| CliError::domain(format!("{}: {e}", path.display())))
}

/// Text, or a JSON object when it starts with `{`.
pub fn parse_action(s: &str) -> Result<SimAction, CliError> {
    if s.trim_start().starts_with('{') {
        serde_json::from_str(s).map_err(|e| CliError::Usage(format!("action `{s}`: {e}")))
    } else {
        Ok(SimAction::new(s))
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn resolve(cli_config: Option<&Path>, overrides: ConfigOverrides) -> Result<ServiceConfig, CliError> {
    Ok(ServiceConfig::resolve(cli_config, |k| std::env::var(k).ok(), &overrides)?)
}

fn overrides(backends: &BackendArgs, store: Option<&StoreArgs>) -> ConfigOverrides {
    ConfigOverrides {
        predictor: backends.predictor.clone(),
        renderer: backends.renderer.clone(),
        theme: backends.theme.clone(),
        width: backends.width,
        height: backends.height,
        timeout_secs: backends.timeout,
        store_dir: store.and_then(|s| s.store_dir.clone()),
        ..Default::default()
    }
}

fn manager(config: &ServiceConfig) -> Result<SessionManager, CliError> {
    let engine = Arc::new(config.engine()?);
    Ok(SessionManager::new(engine, Some(SessionStore::new(&config.store_dir))))
}

pub async fn run(cli: Cli) -> Result<Output, CliError> {
    let config_file = cli.config.as_deref();
    match cli.command {
        Command::Serve(args) => serve(config_file, args).await,
        Command::Render(args) => render(config_file, args),
        Command::Step(args) => step(config_file, args).await,
        Command::Rollout(args) => rollout(config_file, args).await,
        Command::Session(cmd) => session_cmd(config_file, cmd).await,
        Command::Dataset(cmd) => dataset_cmd(cmd).await,
        Command::Fid(args) => fid_cmd(args).await,
    }
}

async fn serve(config_file: Option<&Path>, args: ServeArgs) -> Result<Output, CliError> {
    let mut o = overrides(&args.backends, Some(&args.store));
    o.listen = args.listen;
    o.port = args.port;
    o.max_sessions = args.max_sessions;
    if !args.cors_origins.is_empty() {
        o.cors_origins = Some(args.cors_origins);
    }
    let config = resolve(config_file, o)?;
    api::serve(config, api::shutdown_signal())
        .await
        .map_err(|e| CliError::domain(e.to_string()))?;
    Ok(Output::new("", serde_json::json!({ "status": "stopped" })))
}

fn render(config_file: Option<&Path>, args: RenderArgs) -> Result<Output, CliError> {
    let config = resolve(
        config_file,
        ConfigOverrides {
            theme: args.theme,
            width: args.width,
            height: args.height,
            ..Default::default()
        },
    )?;
    let layout = read_layout(&args.layout)?;
    let image = raster::render(&layout, &config.theme()?, config.width, config.height)
        .map_err(|e| CliError::domain(e.to_string()))?;
    let png = image.encode_png();
    write(&args.output, &png)?;
    Ok(Output::new(
        args.output.display().to_string(),
        serde_json::json!({
            "output": args.output,
            "width": config.width,
            "height": config.height,
            "png_sha256": sha256_hex(&png),
        }),
    ))
}

/// A throwaway in-memory tree rooted at the given screenshot.
fn scratch_tree(engine: &TransitionEngine, image: &Path, layout: Option<&Path>) -> Result<SessionTree, CliError> {
    let layout = layout.map(read_layout).transpose()?;
    Ok(session::create_session(&read(image)?, layout, engine.backend_info())?)
}

struct Written {
    layout_path: PathBuf,
    image_path: PathBuf,
    dsl: String,
}

fn write_node(tree: &SessionTree, id: NodeId, prefix: &Path) -> Result<Written, CliError> {
    let state = tree.node(id)?;
    let dsl = state.layout.to_dsl();
    let w = Written {
        layout_path: with_suffix(prefix, ".uil"),
        image_path: with_suffix(prefix, ".png"),
        dsl,
    };
    write(&w.layout_path, w.dsl.as_bytes())?;
    write(&w.image_path, &state.image.encode_png())?;
    Ok(w)
}

async fn step(config_file: Option<&Path>, args: StepArgs) -> Result<Output, CliError> {
    let config = resolve(config_file, overrides(&args.backends, None))?;
    let engine = config.engine()?;
    let action = parse_action(&args.action)?;
    let mut tree = scratch_tree(&engine, &args.image, args.layout.as_deref())?;
    let root = tree.root_id();
    let id = session::branch_step(&mut tree, &engine, root, &action).await?;
    let w = write_node(&tree, id, &args.output)?;
    let state = tree.node(id)?;
    let text = format!(
        "{}layout: {}\nimage: {}",
        w.dsl,
        w.layout_path.display(),
        w.image_path.display()
    );
    Ok(Output::new(
        text,
        serde_json::json!({
            "layout_dsl": w.dsl,
            "layout_path": w.layout_path,
            "image_path": w.image_path,
            "screen_id": state.layout.screen_id(),
            "latency_ms": state.latency_ms,
        }),
    ))
}

async fn rollout(config_file: Option<&Path>, args: RolloutArgs) -> Result<Output, CliError> {
    let config = resolve(config_file, overrides(&args.backends, None))?;
    let engine = config.engine()?;
    let actions = args.actions.iter().map(|a| parse_action(a)).collect::<Result<Vec<_>, _>>()?;
    let mut tree = scratch_tree(&engine, &args.image, args.layout.as_deref())?;
    let request = RolloutRequest {
        start_node: tree.root_id(),
        actions,
        stop_on_error: !args.continue_on_error,
    };
    let outcome = session::rollout(&mut tree, &engine, &request).await?;
    let mut lines = Vec::new();
    let mut steps = Vec::new();
    for (i, &id) in outcome.created.iter().enumerate() {
        let w = write_node(&tree, id, &with_suffix(&args.output, &format!("-{:02}", i + 1)))?;
        lines.push(format!("{}\t{}", w.layout_path.display(), w.image_path.display()));
        steps.push(serde_json::json!({
            "node_id": id,
            "screen_id": tree.node(id)?.layout.screen_id(),
            "layout_path": w.layout_path,
            "image_path": w.image_path,
        }));
    }
    let failures: Vec<serde_json::Value> = outcome
        .failures
        .iter()
        .map(|f| serde_json::json!({ "action_index": f.action_index, "problem": session_problem(&f.error).1 }))
        .collect();
    for f in &outcome.failures {
        lines.push(format!("action {} failed: {}", f.action_index, f.error));
    }
    let out = Output::new(lines.join("\n"), serde_json::json!({ "steps": steps, "failures": failures }));
    if outcome.created.is_empty() {
        let first = outcome.failures.into_iter().next().expect("an empty rollout has a failure");
        return Err(first.error.into());
    }
    Ok(out)
}

async fn session_cmd(config_file: Option<&Path>, cmd: SessionCommand) -> Result<Output, CliError> {
    let store_only = |store: &StoreArgs| overrides(&BackendArgs::default(), Some(store));
    match cmd {
        SessionCommand::Create {
            image,
            layout,
            store,
            backends,
        } => {
            let m = manager(&resolve(config_file, overrides(&backends, Some(&store)))?)?;
            let layout = layout.as_deref().map(read_layout).transpose()?;
            let tree = m.create(&read(&image)?, layout).await?;
            Ok(Output::new(tree.session_id(), SessionView::of(&tree)))
        }
        SessionCommand::List { store } => {
            let m = manager(&resolve(config_file, store_only(&store))?)?;
            let list = m.list().await?;
            let text = list
                .iter()
                .map(|s| format!("{}\t{} nodes\t{}", s.session_id, s.node_count, s.updated_at.to_rfc3339()))
                .collect::<Vec<_>>()
                .join("\n");
            Ok(Output::new(text, serde_json::json!({ "sessions": list })))
        }
        SessionCommand::Show { session, store } => {
            let m = manager(&resolve(config_file, store_only(&store))?)?;
            let tree = m.get(&session).await?;
            let view = SessionView::of(&tree);
            let text = view
                .nodes
                .iter()
                .map(|n| {
                    format!(
                        "{}{}\t{}\t{}",
                        "  ".repeat(n.depth),
                        n.node_id,
                        n.screen_id.as_deref().unwrap_or("-"),
                        n.action.as_ref().map_or("", |a| a.text.as_str())
                    )
                })
                .collect::<Vec<_>>()
                .join("\n");
            Ok(Output::new(text, view))
        }
        SessionCommand::Step {
            session,
            from,
            action,
            store,
            backends,
        } => {
            let m = manager(&resolve(config_file, overrides(&backends, Some(&store)))?)?;
            let action = parse_action(&action)?;
            let out = m.step(&session, from, &action).await?;
            let view = StepView {
                session_id: session,
                node: crate::views::NodeView::of(&out.tree, out.node_id)?,
            };
            Ok(Output::new(out.node_id.to_string(), view))
        }
        SessionCommand::Rollout {
            session,
            from,
            actions,
            continue_on_error,
            store,
            backends,
        } => {
            let m = manager(&resolve(config_file, overrides(&backends, Some(&store)))?)?;
            let request = RolloutRequest {
                start_node: from,
                actions: actions.iter().map(|a| parse_action(a)).collect::<Result<_, _>>()?,
                stop_on_error: !continue_on_error,
            };
            let (outcome, tree) = m.rollout(&session, &request).await?;
            let view = RolloutView::of(&tree, &outcome);
            let mut lines: Vec<String> = outcome.created.iter().map(|id| id.to_string()).collect();
            lines.extend(
                outcome
                    .failures
                    .iter()
                    .map(|f| format!("action {} failed: {}", f.action_index, f.error)),
            );
            Ok(Output::new(lines.join("\n"), view))
        }
        SessionCommand::Image {
            session,
            node,
            output,
            store,
        } => {
            let m = manager(&resolve(config_file, store_only(&store))?)?;
            let tree = m.get(&session).await?;
            let (png, hash) = api::encode_node_png(&tree, node)?;
            write(&output, &png)?;
            Ok(Output::new(
                output.display().to_string(),
                serde_json::json!({ "output": output, "png_sha256": hash }),
            ))
        }
        SessionCommand::Layout { session, node, store } => {
            let m = manager(&resolve(config_file, store_only(&store))?)?;
            let tree = m.get(&session).await?;
            let dsl = tree.node(node)?.layout.to_dsl();
            Ok(Output::new(dsl.trim_end(), serde_json::json!({ "layout_dsl": dsl })))
        }
    }
}

fn annotators(args: &AnnotatorArgs) -> Result<(RemoteActionAnnotator, RemoteLayoutAnnotator), CliError> {
    if !(args.timeout.is_finite() && args.timeout > 0.0) {
        return Err(CliError::Usage(format!("--timeout must be positive, got {}", args.timeout)));
    }
    if args.max_in_flight == 0 {
        return Err(CliError::Usage("--max-in-flight must be positive".into()));
    }
    let cfg = EndpointConfig::new(&args.annotator_url).with_timeout(Duration::from_secs_f64(args.timeout));
    Ok((RemoteActionAnnotator::new(cfg.clone()), RemoteLayoutAnnotator::new(cfg)))
}

fn dataset_error(e: dataset::DatasetError) -> CliError {
    CliError::domain(e.to_string())
}

async fn dataset_cmd(cmd: DatasetCommand) -> Result<Output, CliError> {
    match cmd {
        DatasetCommand::Extract { episodes } => {
            let eps = dataset::load_episodes(&episodes).map_err(dataset_error)?;
            let pairs: Vec<_> = eps.iter().flat_map(dataset::extract_pairs).collect();
            let text = pairs
                .iter()
                .map(|p| format!("{}\t{}\t{}\t{}", p.episode_id, p.pair_index, p.initial_frame, p.next_frame))
                .collect::<Vec<_>>()
                .join("\n");
            Ok(Output::new(
                text,
                serde_json::json!({ "total_pairs": pairs.len(), "pairs": pairs }),
            ))
        }
        DatasetCommand::Annotate {
            episodes,
            output,
            annotator,
        } => {
            let eps = dataset::load_episodes(&episodes).map_err(dataset_error)?;
            let (a, l) = annotators(&annotator)?;
            let frames = FsFrameSource { base: episodes.clone() };
            let run = dataset::annotate_all(&eps, &a, &l, &frames, annotator.max_in_flight).await;
            let mut jsonl = String::new();
            for ex in &run.examples {
                jsonl.push_str(&serde_json::to_string(&ex.to_record()).expect("records serialize"));
                jsonl.push('\n');
            }
            write(&output, jsonl.as_bytes())?;
            let text = format!(
                "{} examples, {} skipped -> {}",
                run.examples.len(),
                run.skipped.len(),
                output.display()
            );
            Ok(Output::new(
                text,
                serde_json::json!({
                    "output": output,
                    "examples": run.examples.len(),
                    "skipped": run.skipped,
                }),
            ))
        }
        DatasetCommand::Build {
            episodes,
            out_dir,
            train_target,
            seed,
            annotator,
        } => {
            let eps = dataset::load_episodes(&episodes).map_err(dataset_error)?;
            let (a, l) = annotators(&annotator)?;
            let frames = FsFrameSource { base: episodes.clone() };
            let config = BuildConfig {
                out_dir: out_dir.clone(),
                train_target,
                seed,
                max_in_flight: annotator.max_in_flight,
            };
            let manifest = dataset::build_dataset(&eps, &a, &l, &frames, &config)
                .await
                .map_err(dataset_error)?;
            let t = manifest.totals;
            let text = format!(
                "{} examples: {} train, {} eval, {} skipped -> {}",
                t.total_examples,
                t.train_examples,
                t.eval_examples,
                manifest.skipped.len(),
                out_dir.display()
            );
            Ok(Output::new(text, manifest))
        }
    }
}

fn load_images(dir: &Path) -> Result<Vec<Image>, CliError> {
    let io = |e: std::io::Error| CliError::domain(format!("{}: {e}", dir.display()));
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| Image::decode(&read(p)?).map_err(|e| CliError::domain(format!("{}: {e}", p.display()))))
        .collect()
}

async fn fid_cmd(args: FidArgs) -> Result<Output, CliError> {
    let generated = load_images(&args.generated)?;
    let reference = load_images(&args.reference)?;
    let extractor: Box<dyn FeatureExtractor> = match &args.embedder_url {
        Some(url) => Box::new(RemoteEmbedder::new(
            EndpointConfig::new(url),
            args.embedder_name.clone(),
            args.embedder_dim,
        )),
        None => Box::new(BuiltinExtractor),
    };
    let report = fid::evaluate_fid_with(&generated, &reference, extractor.as_ref(), args.sqrt_method.into())
        .await
        .map_err(|e| CliError::domain(e.to_string()))?;
    let mut json = serde_json::to_value(&report).expect("report serializes");
    let mut text = format!("FID {:.6} ({} vs {} images, {})", report.score, report.n_generated, report.n_reference, report.extractor.tag());
    if let Some(path) = &args.baseline {
        let baseline: FidReport = serde_json::from_slice(&read(path)?)
            .map_err(|e| CliError::domain(format!("{}: {e}", path.display())))?;
        let delta = report
            .improvement_over(&baseline)
            .map_err(|e| CliError::domain(e.to_string()))?;
        json["improvement_over_baseline"] = serde_json::json!(delta);
        text.push_str(&format!("\nimprovement over baseline: {delta:.6}"));
    }
    if let Some(path) = &args.output {
        write(path, serde_json::to_string_pretty(&report).expect("report serializes").as_bytes())?;
    }
    Ok(Output { text, json })
}
