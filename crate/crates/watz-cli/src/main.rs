//! `watz`: operator CLI for the attestation stack.
//!
//! Subcommands: `verifier-serve`, `attester-run`, `measure`, `keygen`,
//! `identity-gen`, `quote`, `inspect`, `bench`. Every failure exits
//! non-zero with a single `error: ...` line on stderr.

use std::collections::HashSet;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::RngCore;

use watz_core::bench::{self, BenchOptions, BenchReport, Party};
use watz_core::crypto::SigningKeypair;
use watz_core::evidence::Evidence;
use watz_core::service::{AttestationService, RootOfTrust, CURRENT_VERSION};
use watz_core::timing::{CostCategory, ProtocolMessage};
use watz_core::verifier::{self, VerifierConfig};
use watz_host::{errno_name, WasmApp};

#[derive(Parser)]
#[command(name = "watz", version, about = "Attested WebAssembly runtime and verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the verifier: appraise evidence and provision the secret blob.
    VerifierServe {
        /// TOML configuration file (keys, policy, secret blob).
        #[arg(long)]
        config: PathBuf,
    },
    /// Load, measure and run a Wasm module that drives the attestation.
    AttesterRun {
        /// Path to the Wasm module.
        #[arg(long)]
        module: PathBuf,
        /// Verifier endpoint, host:port.
        #[arg(long)]
        verifier: String,
        /// Verifier identity public key, 130 hex characters.
        #[arg(long = "verifier-key")]
        verifier_key: String,
        /// File holding the 64-hex-character root-of-trust seed.
        #[arg(long = "seed-file")]
        seed_file: Option<PathBuf>,
        /// Write the received secret blob here instead of printing hex.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the claim (SHA-256) of a module file.
    Measure {
        module: PathBuf,
    },
    /// Print the public attestation key derived from a seed.
    Keygen {
        #[arg(long = "seed-file")]
        seed_file: Option<PathBuf>,
    },
    /// Generate a fresh verifier identity key pair.
    IdentityGen {
        /// File that receives the private scalar (hex).
        #[arg(long)]
        out: PathBuf,
    },
    /// Issue evidence for a fixed anchor and claim; prints hex.
    Quote {
        #[arg(long = "seed-file")]
        seed_file: Option<PathBuf>,
        /// Anchor, 64 hex characters.
        #[arg(long)]
        anchor: String,
        /// Claim, 64 hex characters.
        #[arg(long)]
        claim: String,
        #[arg(long, default_value_t = CURRENT_VERSION)]
        version: u32,
    },
    /// Decode evidence hex (inline or from a file) and print its fields.
    Inspect {
        evidence: String,
    },
    /// Micro-benchmark the protocol over loopback.
    Bench {
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        /// Secret blob sizes in bytes; repeatable. Defaults to 0.5-3 MiB.
        #[arg(long = "blob-size")]
        blob_size: Vec<usize>,
        /// Also write the raw table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::VerifierServe { config } => verifier_serve(&config),
        Command::AttesterRun {
            module,
            verifier,
            verifier_key,
            seed_file,
            out,
        } => attester_run(&module, &verifier, &verifier_key, seed_file.as_deref(), out.as_deref()),
        Command::Measure { module } => {
            let bytes = std::fs::read(&module)
                .with_context(|| format!("reading {}", module.display()))?;
            println!("{}", hex::encode(watz_core::crypto::sha256(&bytes)));
            Ok(())
        }
        Command::Keygen { seed_file } => {
            let root = load_root_of_trust(seed_file.as_deref())?;
            let service = AttestationService::new(&root, CURRENT_VERSION);
            println!("{}", hex::encode(service.public_attestation_key()));
            Ok(())
        }
        Command::IdentityGen { out } => identity_gen(&out),
        Command::Quote {
            seed_file,
            anchor,
            claim,
            version,
        } => {
            let root = load_root_of_trust(seed_file.as_deref())?;
            let service = AttestationService::new(&root, version);
            let anchor = parse_hex32(&anchor).context("--anchor")?;
            let claim = parse_hex32(&claim).context("--claim")?;
            println!("{}", service.issue_evidence(anchor, claim).to_hex());
            Ok(())
        }
        Command::Inspect { evidence } => inspect(&evidence),
        Command::Bench {
            iterations,
            blob_size,
            csv,
        } => run_bench(iterations, blob_size, csv.as_deref()),
    }
}

// --- verifier ---------------------------------------------------------------

#[derive(serde::Deserialize)]
struct VerifierConfigFile {
    listen_address: String,
    identity_private_key: String,
    endorsements: Vec<String>,
    reference_values: Vec<String>,
    min_version: u32,
    secret_blob_file: PathBuf,
}

fn verifier_serve(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let file: VerifierConfigFile = toml::from_str(&text).context("parsing config")?;

    let identity_scalar = parse_hex32(&file.identity_private_key)
        .context("config key identity_private_key")?;
    let identity = SigningKeypair::from_scalar_bytes(&identity_scalar)
        .map_err(|e| anyhow!("config key identity_private_key: {e}"))?;

    let mut endorsements = HashSet::new();
    for entry in &file.endorsements {
        endorsements.insert(parse_hex65(entry).context("config key endorsements")?);
    }
    let mut reference_values = HashSet::new();
    for entry in &file.reference_values {
        reference_values.insert(parse_hex32(entry).context("config key reference_values")?);
    }

    // secret blob path is relative to the config file
    let blob_path = if file.secret_blob_file.is_relative() {
        path.parent().unwrap_or(Path::new(".")).join(&file.secret_blob_file)
    } else {
        file.secret_blob_file.clone()
    };
    let secret_blob = std::fs::read(&blob_path)
        .with_context(|| format!("reading secret blob {}", blob_path.display()))?;

    let config = VerifierConfig {
        identity,
        endorsements,
        reference_values,
        min_version: file.min_version,
        secret_blob,
    };
    config.validate().map_err(|e| anyhow!("{e}"))?;

    let listener = TcpListener::bind(&file.listen_address)
        .with_context(|| format!("binding {}", file.listen_address))?;
    verifier::serve(Arc::new(config), listener).context("serving")?;
    Ok(())
}

// --- attester ---------------------------------------------------------------

fn attester_run(
    module: &Path,
    verifier: &str,
    verifier_key: &str,
    seed_file: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    parse_hex65(verifier_key).context("--verifier-key")?;
    let root = load_root_of_trust(seed_file)?;
    let service = Arc::new(AttestationService::new(&root, CURRENT_VERSION));

    let bytes =
        std::fs::read(module).with_context(|| format!("reading {}", module.display()))?;
    let args = vec![
        module.display().to_string(),
        verifier.to_string(),
        verifier_key.to_string(),
    ];
    let mut app = WasmApp::load(service, &bytes, args).map_err(|e| anyhow!("{e}"))?;
    log::info!("module claim={}", app.measurement().hex());

    app.run().map_err(|err| match err {
        watz_host::RunError::Exit(code) => {
            anyhow!("guest exited with code {code} ({})", errno_name(code))
        }
        other => anyhow!("{other}"),
    })?;

    match app.last_received_blob() {
        Some(blob) => {
            log::info!("attestation complete, received {} bytes", blob.len());
            match out {
                Some(path) => std::fs::write(path, blob)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => println!("{}", hex::encode(blob)),
            }
        }
        None => log::info!("guest finished without receiving a blob"),
    }
    Ok(())
}

// --- key management -----------------------------------------------------------

fn identity_gen(out: &Path) -> Result<()> {
    // rejection-sample a scalar; the private key never exists outside the file
    let mut scalar = [0u8; 32];
    let keypair = loop {
        rand::rngs::OsRng.fill_bytes(&mut scalar);
        if let Ok(keypair) = SigningKeypair::from_scalar_bytes(&scalar) {
            break keypair;
        }
    };
    std::fs::write(out, format!("{}\n", hex::encode(scalar)))
        .with_context(|| format!("writing {}", out.display()))?;
    println!("{}", hex::encode(keypair.public_point()));
    Ok(())
}

fn load_root_of_trust(seed_file: Option<&Path>) -> Result<RootOfTrust> {
    let text = match seed_file {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading seed file {}", path.display()))?,
        None => std::env::var("WATZ_ROOT_SEED")
            .context("no --seed-file given and WATZ_ROOT_SEED is unset")?,
    };
    RootOfTrust::from_hex(&text).map_err(|e| anyhow!("{e}"))
}

fn inspect(evidence: &str) -> Result<()> {
    // accept inline hex or a path to a file holding hex
    let text = if Path::new(evidence).exists() {
        std::fs::read_to_string(evidence)?
    } else {
        evidence.to_string()
    };
    let evidence = Evidence::from_hex(&text).map_err(|e| anyhow!("{e}"))?;
    println!("anchor:    {}", hex::encode(evidence.anchor));
    println!("version:   {}", evidence.version);
    println!("claim:     {}", hex::encode(evidence.claim));
    println!("key:       {}", hex::encode(evidence.attestation_public_key));
    println!("signature: {}", hex::encode(evidence.signature));
    println!(
        "valid:     {}",
        if evidence.verify_signature() { "yes" } else { "no" }
    );
    Ok(())
}

// --- bench --------------------------------------------------------------------

fn run_bench(iterations: usize, blob_size: Vec<usize>, csv: Option<&Path>) -> Result<()> {
    if iterations == 0 {
        bail!("--iterations must be at least 1");
    }
    let mut options = BenchOptions {
        iterations,
        ..BenchOptions::default()
    };
    if !blob_size.is_empty() {
        options.blob_sizes = blob_size;
    }
    let report = bench::run(&options).map_err(|e| anyhow!("{e}"))?;
    print!("{}", render_table(&report));
    if let Some(path) = csv {
        let mut file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        file.write_all(render_csv(&report).as_bytes())?;
        log::info!("wrote CSV to {}", path.display());
    }
    Ok(())
}

fn render_table(report: &BenchReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "protocol cost breakdown, median of {} iterations (±σ)\n\n",
        report.iterations
    ));
    for party in [Party::Attester, Party::Verifier] {
        out.push_str(&format!(
            "{:<28}{:>22}{:>22}{:>22}\n",
            heading(party),
            "msg0",
            "msg1",
            "msg2"
        ));
        for category in CostCategory::ALL {
            out.push_str(&format!("  {:<26}", category.label()));
            for message in [
                ProtocolMessage::Msg0,
                ProtocolMessage::Msg1,
                ProtocolMessage::Msg2,
            ] {
                let cell = report
                    .grid
                    .iter()
                    .find(|c| c.party == party && c.message == message && c.category == category)
                    .expect("grid is complete");
                out.push_str(&format!("{:>22}", fmt_cell(cell.stats.median_ns, cell.stats.std_dev_ns)));
            }
            out.push('\n');
        }
        out.push('\n');
    }

    out.push_str("msg3 secret-blob provisioning\n");
    out.push_str(&format!(
        "  {:<14}{:>22}{:>22}\n",
        "blob size", "verifier encrypt", "attester decrypt"
    ));
    for sample in &report.msg3 {
        out.push_str(&format!(
            "  {:<14}{:>22}{:>22}\n",
            fmt_size(sample.blob_len),
            fmt_cell(sample.encrypt.median_ns, sample.encrypt.std_dev_ns),
            fmt_cell(sample.decrypt.median_ns, sample.decrypt.std_dev_ns),
        ));
    }
    out
}

fn heading(party: Party) -> &'static str {
    match party {
        Party::Attester => "Attester",
        Party::Verifier => "Verifier",
    }
}

fn render_csv(report: &BenchReport) -> String {
    let mut out = String::from("section,party,message,category,blob_bytes,median_ns,stddev_ns\n");
    for cell in &report.grid {
        out.push_str(&format!(
            "grid,{},{},{},,{:.0},{:.0}\n",
            cell.party.label(),
            cell.message.label(),
            cell.category.label().replace(' ', "-"),
            cell.stats.median_ns,
            cell.stats.std_dev_ns,
        ));
    }
    for sample in &report.msg3 {
        out.push_str(&format!(
            "msg3,verifier,msg3,encrypt,{},{:.0},{:.0}\n",
            sample.blob_len, sample.encrypt.median_ns, sample.encrypt.std_dev_ns
        ));
        out.push_str(&format!(
            "msg3,attester,msg3,decrypt,{},{:.0},{:.0}\n",
            sample.blob_len, sample.decrypt.median_ns, sample.decrypt.std_dev_ns
        ));
    }
    out
}

fn fmt_cell(median_ns: f64, std_dev_ns: f64) -> String {
    if median_ns == 0.0 {
        return "-".into();
    }
    format!("{} ±{}", fmt_ns(median_ns), fmt_ns(std_dev_ns))
}

fn fmt_ns(ns: f64) -> String {
    if ns >= 1e9 {
        format!("{:.2} s", ns / 1e9)
    } else if ns >= 1e6 {
        format!("{:.2} ms", ns / 1e6)
    } else if ns >= 1e3 {
        format!("{:.1} µs", ns / 1e3)
    } else {
        format!("{ns:.0} ns")
    }
}

fn fmt_size(bytes: usize) -> String {
    if bytes >= 1024 * 1024 {
        format!("{:.1} MiB", bytes as f64 / (1024.0 * 1024.0))
    } else if bytes >= 1024 {
        format!("{:.1} KiB", bytes as f64 / 1024.0)
    } else {
        format!("{bytes} B")
    }
}

// --- small parsers --------------------------------------------------------------

fn parse_hex32(text: &str) -> Result<[u8; 32]> {
    let bytes = hex::decode(text.trim()).context("expected hex")?;
    bytes
        .try_into()
        .map_err(|_| anyhow!("expected 64 hex characters"))
}

fn parse_hex65(text: &str) -> Result<[u8; 65]> {
    let bytes = hex::decode(text.trim()).context("expected hex")?;
    let arr: [u8; 65] = bytes
        .try_into()
        .map_err(|_| anyhow!("expected 130 hex characters"))?;
    if arr[0] != 0x04 {
        bail!("expected an uncompressed SEC1 point (leading 0x04)");
    }
    Ok(arr)
}
