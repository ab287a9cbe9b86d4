use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

use output::{CliError, Output};

#[derive(Parser, Debug)]
#[command(name = "agenturi", version, about = "agent:// URIs, attestations, DHT simulation and experiments")]
struct Cli {
    /// Machine-readable JSON on stdout instead of human text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a URI and print its components.
    Parse {
        uri: String,
        /// Require a version-7 UUID in the agent identifier.
        #[arg(long)]
        strict: bool,
    },
    /// Print the canonical form of one or more URIs.
    Canon {
        #[arg(required = true)]
        uris: Vec<String>,
        #[arg(long)]
        strict: bool,
    },
    /// Generate new agent identifiers.
    IdNew {
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Seed for the random bits; requires --now.
        #[arg(long, requires = "now")]
        seed: Option<u64>,
        #[arg(long)]
        now: Option<String>,
    },
    /// Derive the DHT keys for a trust root and capability path.
    KeyDerive(KeyDeriveArgs),
    /// Create an Ed25519 key pair and add it to a trust root's key document.
    Keygen(KeygenArgs),
    /// Sign attestation claims.
    AttestIssue(AttestIssueArgs),
    /// Verify an attestation for a URI against local key documents.
    AttestVerify(AttestVerifyArgs),
    /// Show a trust root's key document and key status.
    KeysShow {
        #[arg(long)]
        keys_dir: PathBuf,
        #[arg(long)]
        root: String,
        #[arg(long)]
        now: Option<String>,
    },
    /// Run a simulation scenario file.
    SimRun {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map tool corpora onto capability paths, hierarchical and flat.
    EvalExpressiveness {
        /// JSON Lines corpus; defaults to the bundled sample.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Corpus used for the flat-namespace comparison; defaults to the bundled collision set.
        #[arg(long)]
        collision_corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precision and recall of discovery against synthetic ground truth.
    EvalDiscovery {
        #[command(flatten)]
        common: DiscoveryArgs,
        /// Also run with keys that ignore the trust root.
        #[arg(long)]
        ablation: bool,
    },
    /// Recall under capability drift.
    EvalDrift {
        #[command(flatten)]
        common: DiscoveryArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.25, 0.5, 1.0])]
        fractions: Vec<f64>,
    },
    /// Lookup hop counts, migration and propagation.
    EvalHops(HopsArgs),
    /// Microbenchmarks of URI operations against fixed thresholds.
    EvalBench {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full agent lifecycle end to end.
    Walkthrough {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct KeyDeriveArgs {
    /// A full agent URI; alternative to --root and --path.
    #[arg(conflicts_with_all = ["root", "path"], required_unless_present_all = ["root", "path"])]
    uri: Option<String>,
    #[arg(long, requires = "path")]
    root: Option<String>,
    #[arg(long, requires = "root")]
    path: Option<String>,
    #[arg(long, value_enum, default_value_t = Scheme::Scoped)]
    scheme: Scheme,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Scheme {
    Scoped,
    Global,
}

#[derive(Args, Debug)]
struct KeygenArgs {
    #[arg(long)]
    root: String,
    #[arg(long)]
    kid: String,
    /// Directory receiving `<root>.agent-keys.json` and `<kid>.secret`.
    #[arg(long)]
    keys_dir: PathBuf,
    /// Start of validity (RFC 3339); defaults to --now.
    #[arg(long)]
    not_before: Option<String>,
    #[arg(long, default_value_t = 365)]
    valid_days: i64,
    #[arg(long)]
    now: Option<String>,
    /// Derive the key from a seed instead of the system RNG.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct AttestIssueArgs {
    /// JSON claims file; alternative to --uri.
    #[arg(long, conflicts_with_all = ["uri", "capabilities", "aud", "valid_days"], required_unless_present = "uri")]
    claims: Option<PathBuf>,
    #[arg(long)]
    uri: Option<String>,
    /// Claimed capability paths; defaults to the URI's own path.
    #[arg(long = "capability")]
    capabilities: Vec<String>,
    #[arg(long)]
    aud: Option<String>,
    #[arg(long)]
    valid_days: Option<i64>,
    #[arg(long)]
    now: Option<String>,
    /// File holding the hex Ed25519 secret key.
    #[arg(long)]
    secret_key: PathBuf,
    #[arg(long)]
    kid: String,
}

#[derive(Args, Debug)]
struct AttestVerifyArgs {
    #[arg(long, conflicts_with = "token_file", required_unless_present = "token_file")]
    token: Option<String>,
    #[arg(long)]
    token_file: Option<PathBuf>,
    #[arg(long)]
    uri: String,
    #[arg(long)]
    keys_dir: PathBuf,
    #[arg(long)]
    now: Option<String>,
    #[arg(long)]
    verifier_id: Option<String>,
}

#[derive(Args, Debug)]
struct DiscoveryArgs {
    /// Experiment config (JSON); defaults to the built-in full-scale setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides both the workload and network seeds.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trust_roots: Option<usize>,
    /// Keep per-query records in the JSON report.
    #[arg(long)]
    records: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HopsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    skip_migration: bool,
    #[arg(long)]
    skip_propagation: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cmd: Command) -> Result<Output, CliError> {
    use commands::*;
    match cmd {
        Command::Parse { uri, strict } => parse(&uri, strict),
        Command::Canon { uris, strict } => canon(&uris, strict),
        Command::IdNew { count, seed, now } => id_new(count, seed, now.as_deref()),
        Command::KeyDerive(a) => key_derive(a.uri.as_deref(), a.root.as_deref(), a.path.as_deref(), a.scheme == Scheme::Global),
        Command::Keygen(a) => keygen(&a.root, &a.kid, &a.keys_dir, a.not_before.as_deref(), a.valid_days, a.now.as_deref(), a.seed),
        Command::AttestIssue(a) => attest_issue(IssueInput {
            claims: a.claims,
            uri: a.uri,
            capabilities: a.capabilities,
            aud: a.aud,
            valid_days: a.valid_days,
            now: a.now,
            secret_key: a.secret_key,
            kid: a.kid,
        }),
        Command::AttestVerify(a) => {
            attest_verify(a.token, a.token_file.as_deref(), &a.uri, &a.keys_dir, a.now.as_deref(), a.verifier_id.as_deref())
        }
        Command::KeysShow { keys_dir, root, now } => keys_show(&keys_dir, &root, now.as_deref()),
        Command::SimRun { scenario, out } => sim_run(&scenario, out.as_deref()),
        Command::EvalExpressiveness { corpus, collision_corpus, out } => {
            eval_expressiveness(corpus.as_deref(), collision_corpus.as_deref(), out.as_deref())
        }
        Command::EvalDiscovery { common, ablation } => {
            eval_discovery(&discovery_options(&common), ablation, common.records, common.out.as_deref())
        }
        Command::EvalDrift { common, fractions } => eval_drift(&discovery_options(&common), &fractions, common.records, common.out.as_deref()),
        Command::EvalHops(a) => eval_hops(HopsInput {
            config: a.config,
            sizes: a.sizes,
            trials: a.trials,
            seed: a.seed,
            migration: !a.skip_migration,
            propagation: !a.skip_propagation,
            out: a.out,
        }),
        Command::EvalBench { samples, iterations, out } => eval_bench(samples, iterations, out.as_deref()),
        Command::Walkthrough { out } => walkthrough(out.as_deref()),
    }
}

fn discovery_options(a: &DiscoveryArgs) -> commands::DiscoveryInput {
    commands::DiscoveryInput { config: a.config.clone(), seed: a.seed, trust_roots: a.trust_roots }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli.command) {
        Ok(out) => out.emit(json),
        Err(e) => e.emit(json),
    }
}
