//! `hyvid`: validate, convert, diff, merge and grade annotation set files,
//! replay revision logs, and run the HTTP service.
//!
//! Exit codes: 0 ok, 1 validation or domain error, 2 usage error, 3 I/O error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hyvid_core::canonical;
use hyvid_core::collab::{self, DiffReport, GradeReport, MergePolicy, DEFAULT_TOLERANCE_MS};
use hyvid_core::interchange::{
    export_csv, export_set_json, export_webvtt, import_log_json, import_set_json, ImportError,
    ImportedSet, SetDocument, DEFAULT_POINT_PADDING_MS, ENVELOPE_LEADING_KEYS,
};
use hyvid_core::model::{AnnotationSet, Millis, SetId, SourceRef, UserId, VideoReference};
use hyvid_server::{ServerConfig, DEFAULT_PORT};
use hyvid_store::{Role, Store, User};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "hyvid",
    version,
    about = "Hypervideo annotation sets: validate, convert, compare, consolidate"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a set file; violations go to standard error.
    Validate { set: PathBuf },
    /// Convert a set file to JSON, WebVTT or CSV on standard output.
    Export(ExportArgs),
    /// Align two sets by resource.
    Diff(DiffArgs),
    /// Consolidate several sets into one timeline.
    Merge(MergeArgs),
    /// Score a learner set against a teacher key.
    Grade(GradeArgs),
    /// Replay a revision log and print the resulting annotations.
    History {
        log: PathBuf,
        /// Number of entries to replay (default: all).
        #[arg(long)]
        at: Option<u64>,
    },
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Manage provisioned users in a data directory.
    #[command(subcommand)]
    Users(UsersCommand),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ExportFormat {
    Json,
    Webvtt,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Json,
    Text,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    pub set: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: ExportFormat,
    /// Indent JSON output for reading. Other formats are unaffected.
    #[arg(long)]
    pub pretty: bool,
    /// Cue length given to point annotations in WebVTT.
    #[arg(long, default_value_t = DEFAULT_POINT_PADDING_MS)]
    pub point_padding_ms: Millis,
}

#[derive(Args, Debug)]
pub struct DiffArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE_MS, allow_negative_numbers = true)]
    pub tolerance_ms: Millis,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
}

#[derive(Args, Debug)]
pub struct MergeArgs {
    /// union | majority:<quorum> | manual:<selection.json>
    #[arg(long)]
    pub policy: String,
    /// Write the consolidated set as a set file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Id of the written set.
    #[arg(long, default_value = "merged")]
    pub id: String,
    /// Owner of the written set (default: owner of the first input).
    #[arg(long)]
    pub owner: Option<String>,
    #[arg(required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GradeArgs {
    pub learner: PathBuf,
    pub key: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE_MS, allow_negative_numbers = true)]
    pub tolerance_ms: Millis,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, env = "HYVID_PORT", default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, env = "HYVID_DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,
    /// Learners read only their own and merged sets.
    #[arg(long)]
    pub private_sets: bool,
    /// Built web client to serve at `/`.
    #[arg(long, env = "HYVID_STATIC_DIR", default_value = "webapp/dist")]
    pub static_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum UsersCommand {
    /// Add a user with a bearer token.
    Add {
        #[arg(long, env = "HYVID_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        name: Option<String>,
        #[arg(long, value_parser = parse_role)]
        role: Role,
        #[arg(long)]
        token: String,
    },
    /// List users (tokens omitted).
    List {
        #[arg(long, env = "HYVID_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
    },
}

fn parse_role(s: &str) -> std::result::Result<Role, String> {
    s.parse()
}

/// Parses arguments and runs. Usage errors print clap's message and exit 2.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hyvid: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<()> {
    match cli.command {
        Command::Validate { set } => validate(&set),
        Command::Export(args) => export(&args, out),
        Command::Diff(args) => diff(&args, out),
        Command::Merge(args) => merge(&args, out),
        Command::Grade(args) => grade(&args, out),
        Command::History { log, at } => history(&log, at, out),
        Command::Serve(args) => serve(args),
        Command::Users(cmd) => users(cmd, out),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn emit(out: &mut dyn std::io::Write, bytes: &[u8]) -> Result<()> {
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

fn import_error(path: &Path, e: ImportError) -> CliError {
    let mut msg = format!("{}: ", path.display());
    match e {
        ImportError::Invalid(violations) => {
            msg.push_str("invalid annotation set");
            for v in &violations {
                let _ = write!(msg, "\n  {v}");
            }
        }
        other => msg.push_str(&other.to_string()),
    }
    CliError::Domain(msg)
}

fn load_set(path: &Path) -> Result<ImportedSet> {
    import_set_json(&read(path)?).map_err(|e| import_error(path, e))
}

fn canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    canonical::to_vec_with_leading(value, ENVELOPE_LEADING_KEYS).expect("values serialize")
}

fn validate(path: &Path) -> Result<()> {
    let imported = load_set(path)?;
    eprintln!(
        "{}: valid, {} annotation(s)",
        path.display(),
        imported.set.annotations.len()
    );
    Ok(())
}

fn export(args: &ExportArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let ImportedSet { set, video, .. } = load_set(&args.set)?;
    let domain = |e: hyvid_core::interchange::ExportError| CliError::Domain(e.to_string());
    let bytes = match args.format {
        ExportFormat::Json if args.pretty => {
            let doc = SetDocument::new(&set, &video);
            canonical::to_pretty_with_leading(&doc, ENVELOPE_LEADING_KEYS)
                .expect("values serialize")
                .into_bytes()
        }
        ExportFormat::Json => export_set_json(&set, &video).map_err(domain)?,
        ExportFormat::Webvtt => {
            if args.point_padding_ms <= 0 {
                return Err(CliError::Usage(
                    "--point-padding-ms must be positive".into(),
                ));
            }
            export_webvtt(&set, &video, args.point_padding_ms)
                .map_err(domain)?
                .into_bytes()
        }
        ExportFormat::Csv => export_csv(&set, &video).map_err(domain)?.into_bytes(),
    };
    emit(out, &bytes)
}

fn check_tolerance(t: Millis) -> Result<()> {
    if t < 0 {
        Err(CliError::Usage(
            "--tolerance-ms must not be negative".into(),
        ))
    } else {
        Ok(())
    }
}

fn diff(args: &DiffArgs, out: &mut dyn std::io::Write) -> Result<()> {
    check_tolerance(args.tolerance_ms)?;
    let a = load_set(&args.a)?;
    let b = load_set(&args.b)?;
    let report = collab::diff_pair(&a.set, &b.set, args.tolerance_ms)
        .map_err(|e| CliError::Domain(e.to_string()))?;
    match args.format {
        OutputFormat::Json => emit(out, &canonical_json(&report)),
        OutputFormat::Text => emit(
            out,
            diff_text(&a.set, &b.set, &report, args.tolerance_ms).as_bytes(),
        ),
    }
}

fn span(a: &hyvid_core::model::Annotation) -> String {
    format!("[{}, {}]", a.fragment.begin_ms, a.fragment.end_ms)
}

fn diff_text(a: &AnnotationSet, b: &AnnotationSet, r: &DiffReport, tol: Millis) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "diff {} vs {} (tolerance {tol} ms)", a.id, b.id);
    let _ = writeln!(s, "agreements: {}", r.agreements.len());
    for x in &r.agreements {
        let _ = writeln!(
            s,
            "  {}  {} {}  {} {}",
            x.resource_id,
            x.a.id,
            span(&x.a),
            x.b.id,
            span(&x.b)
        );
    }
    let _ = writeln!(s, "disagreements: {}", r.disagreements.len());
    for x in &r.disagreements {
        let _ = writeln!(
            s,
            "  {}  {} {}  {} {}  delta begin {:+} end {:+}",
            x.resource_id,
            x.a.id,
            span(&x.a),
            x.b.id,
            span(&x.b),
            x.delta_begin_ms,
            x.delta_end_ms
        );
    }
    for (label, list) in [(a.id.as_str(), &r.unique_a), (b.id.as_str(), &r.unique_b)] {
        let _ = writeln!(s, "only in {label}: {}", list.len());
        for x in list {
            let _ = writeln!(s, "  {} {} {}", x.id, span(x), x.body.kind_str());
        }
    }
    s
}

fn parse_policy(spec: &str) -> Result<MergePolicy> {
    let usage = || {
        CliError::Usage(format!(
            "bad --policy {spec:?}: expected union, majority:<q> or manual:<file>"
        ))
    };
    match spec.split_once(':') {
        None if spec == "union" => Ok(MergePolicy::Union),
        Some(("majority", q)) => {
            let quorum: usize = q.parse().map_err(|_| usage())?;
            Ok(MergePolicy::Majority { quorum })
        }
        Some(("manual", file)) => {
            let path = Path::new(file);
            let bytes = read(path)?;
            let selected: Vec<SourceRef> = serde_json::from_slice(&bytes).map_err(|e| {
                CliError::Domain(format!(
                    "{}: selection must be a list of {{set_id, annotation_id}}: {e}",
                    path.display()
                ))
            })?;
            Ok(MergePolicy::Manual { selected })
        }
        _ => Err(usage()),
    }
}

fn merge(args: &MergeArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let policy = parse_policy(&args.policy)?;
    let mut sets = Vec::new();
    let mut video: Option<VideoReference> = None;
    for path in &args.inputs {
        let imported = load_set(path)?;
        match &video {
            Some(v) if *v != imported.video => {
                return Err(CliError::Domain(format!(
                    "{}: video differs from the first input",
                    path.display()
                )))
            }
            Some(_) => {}
            None => video = Some(imported.video),
        }
        sets.push(imported.set);
    }
    let video = video.expect("at least one input");
    let result = collab::merge(&sets, &policy).map_err(|e| CliError::Domain(e.to_string()))?;
    if let Some(path) = &args.out {
        let id = SetId::new(&args.id);
        if !id.is_well_formed() {
            return Err(CliError::Usage(format!("malformed --id {:?}", args.id)));
        }
        let owner = args
            .owner
            .as_ref()
            .map(UserId::new)
            .unwrap_or_else(|| sets[0].owner.clone());
        let set = result.clone().into_set(id, video.id.clone(), owner);
        let bytes = export_set_json(&set, &video).map_err(|e| CliError::Domain(e.to_string()))?;
        std::fs::write(path, bytes).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
    }
    emit(out, &canonical_json(&result))
}

fn grade(args: &GradeArgs, out: &mut dyn std::io::Write) -> Result<()> {
    check_tolerance(args.tolerance_ms)?;
    let learner = load_set(&args.learner)?;
    let key = load_set(&args.key)?;
    let report = collab::grade(&learner.set, &key.set, args.tolerance_ms)
        .map_err(|e| CliError::Domain(e.to_string()))?;
    match args.format {
        OutputFormat::Json => emit(out, &canonical_json(&report)),
        OutputFormat::Text => emit(out, grade_text(&report).as_bytes()),
    }
}

fn grade_text(r: &GradeReport) -> String {
    let mut s = format!(
        "score {:.4} ({} of {} correct)\n",
        r.score, r.correct, r.total
    );
    for id in &r.missing {
        let _ = writeln!(s, "  missing {id}");
    }
    for m in &r.misplaced {
        let _ = writeln!(
            s,
            "  misplaced {} by {:+} ms",
            m.resource_id, m.delta_begin_ms
        );
    }
    s
}

#[derive(Serialize)]
struct Replayed {
    set_id: SetId,
    revision: u64,
    annotations: Vec<hyvid_core::model::Annotation>,
}

fn history(path: &Path, at: Option<u64>, out: &mut dyn std::io::Write) -> Result<()> {
    let log = import_log_json(&read(path)?)
        .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
    let n = at.unwrap_or(log.len());
    let annotations = log
        .replay(n)
        .map_err(|_| CliError::Usage(format!("--at {n} exceeds the log length {}", log.len())))?;
    emit(
        out,
        &canonical_json(&Replayed {
            set_id: log.set_id().clone(),
            revision: n,
            annotations,
        }),
    )
}

fn serve(args: ServeArgs) -> Result<()> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .try_init();
    let config = ServerConfig {
        port: args.port,
        data_dir: args.data_dir.clone(),
        private_sets: args.private_sets,
        static_dir: Some(args.static_dir),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io {
        path: PathBuf::from("<runtime>"),
        source,
    })?;
    runtime
        .block_on(hyvid_server::serve(config))
        .map_err(|e| match e {
            hyvid_server::ServeError::Store(e) => CliError::Domain(e.to_string()),
            hyvid_server::ServeError::Bind { source, .. }
            | hyvid_server::ServeError::Io(source) => CliError::Io {
                path: args.data_dir,
                source,
            },
        })
}

fn open_store(dir: &Path) -> Result<Store> {
    Store::open(dir).map_err(|e| CliError::Domain(e.to_string()))
}

fn users(cmd: UsersCommand, out: &mut dyn std::io::Write) -> Result<()> {
    match cmd {
        UsersCommand::Add {
            data_dir,
            id,
            name,
            role,
            token,
        } => {
            let store = open_store(&data_dir)?;
            let user = User {
                display_name: name.unwrap_or_else(|| id.clone()),
                id: id.into(),
                role,
                token,
            };
            store
                .put_user(user)
                .map_err(|e| CliError::Domain(e.to_string()))?;
            Ok(())
        }
        UsersCommand::List { data_dir } => {
            let store = open_store(&data_dir)?;
            #[derive(Serialize)]
            struct Row<'a> {
                id: &'a str,
                display_name: &'a str,
                role: &'a str,
            }
            let users = store.list_users();
            let rows: Vec<Row> = users
                .iter()
                .map(|u| Row {
                    id: u.id.as_str(),
                    display_name: &u.display_name,
                    role: u.role.as_str(),
                })
                .collect();
            emit(out, &canonical_json(&rows))
        }
    }
}
