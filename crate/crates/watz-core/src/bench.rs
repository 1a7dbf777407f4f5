//! Loopback micro-benchmark of the protocol.
//!
//! Runs real sessions over 127.0.0.1, collecting the spans the protocol
//! code records, and reduces them into the per-message cost grid
//! (memory management, key generation, symmetric and asymmetric
//! cryptography for both parties) plus the msg3 time-vs-blob-size curve.

use std::collections::HashMap;
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;

use crate::attester::AttesterSession;
use crate::crypto::SigningKeypair;
use crate::service::{AttestationService, RootOfTrust, CURRENT_VERSION};
use crate::timing::{self, CostCategory, ProtocolMessage, Span};
use crate::verifier::{self, VerifierConfig};
use crate::wire::{self, Msg1Payload, Msg3Payload, MsgType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    Attester,
    Verifier,
}

impl Party {
    pub fn label(&self) -> &'static str {
        match self {
            Party::Attester => "attester",
            Party::Verifier => "verifier",
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub median_ns: f64,
    pub std_dev_ns: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GridCell {
    pub party: Party,
    pub message: ProtocolMessage,
    pub category: CostCategory,
    pub stats: Stats,
}

#[derive(Debug, Clone, Copy)]
pub struct Msg3Sample {
    pub blob_len: usize,
    /// Verifier-side encryption time.
    pub encrypt: Stats,
    /// Attester-side decryption time.
    pub decrypt: Stats,
}

#[derive(Debug)]
pub struct BenchReport {
    pub iterations: usize,
    /// All 2 parties x 3 messages x 4 categories cells, in render order.
    pub grid: Vec<GridCell>,
    /// One sample per requested blob size, ascending.
    pub msg3: Vec<Msg3Sample>,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub iterations: usize,
    pub blob_sizes: Vec<usize>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            iterations: 10,
            blob_sizes: vec![512 * 1024, 1024 * 1024, 2 * 1024 * 1024, 3 * 1024 * 1024],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("protocol failure during benchmark: {0}")]
    Protocol(String),
}

type CellSums = HashMap<(ProtocolMessage, CostCategory), f64>;

/// Runs the benchmark and reduces spans into medians and deviations.
pub fn run(options: &BenchOptions) -> Result<BenchReport, BenchError> {
    if options.iterations == 0 {
        return Err(BenchError::NoIterations);
    }
    let mut blob_sizes = options.blob_sizes.clone();
    blob_sizes.sort_unstable();
    blob_sizes.dedup();
    if blob_sizes.is_empty() {
        blob_sizes = BenchOptions::default().blob_sizes;
    }

    let service = Arc::new(AttestationService::new(
        &RootOfTrust::new([0xb7; 32]),
        CURRENT_VERSION,
    ));
    let claim = [0x6d; 32];

    // per-iteration cell sums for both parties, across all blob sizes
    let mut attester_runs: Vec<CellSums> = Vec::new();
    let mut verifier_runs: Vec<CellSums> = Vec::new();
    // per blob size: per-iteration msg3 times
    let mut msg3 = Vec::new();

    for &blob_len in &blob_sizes {
        let mut config = VerifierConfig {
            identity: SigningKeypair::generate(&mut rand::rngs::OsRng),
            endorsements: Default::default(),
            reference_values: Default::default(),
            min_version: CURRENT_VERSION,
            secret_blob: vec![0x5e; blob_len],
        };
        config.endorsements.insert(service.public_attestation_key());
        config.reference_values.insert(claim);
        let config = Arc::new(config);

        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let iterations = options.iterations;

        let verifier_config = Arc::clone(&config);
        let verifier_thread = std::thread::spawn(move || -> Result<Vec<Vec<Span>>, String> {
            let mut runs = Vec::with_capacity(iterations);
            for _ in 0..iterations {
                let (stream, _) = listener.accept().map_err(|e| e.to_string())?;
                timing::start_recording();
                let outcome = verifier::handle_connection(&verifier_config, stream);
                let spans = timing::stop_recording();
                outcome.map_err(|e| e.to_string())?;
                runs.push(spans);
            }
            Ok(runs)
        });

        let mut encrypts = Vec::with_capacity(options.iterations);
        let mut decrypts = Vec::with_capacity(options.iterations);
        for _ in 0..options.iterations {
            timing::start_recording();
            let outcome = run_attester_once(addr, &config, &service, claim);
            let spans = timing::stop_recording();
            outcome?;

            let sums = sum_spans(&spans);
            decrypts.push(
                sums.get(&(ProtocolMessage::Msg3, CostCategory::SymmetricCrypto))
                    .copied()
                    .unwrap_or(0.0),
            );
            attester_runs.push(sums);
        }

        let verifier_spans = verifier_thread
            .join()
            .map_err(|_| BenchError::Protocol("verifier thread panicked".into()))?
            .map_err(BenchError::Protocol)?;
        for spans in verifier_spans {
            let sums = sum_spans(&spans);
            encrypts.push(
                sums.get(&(ProtocolMessage::Msg3, CostCategory::SymmetricCrypto))
                    .copied()
                    .unwrap_or(0.0),
            );
            verifier_runs.push(sums);
        }

        msg3.push(Msg3Sample {
            blob_len,
            encrypt: stats(&encrypts),
            decrypt: stats(&decrypts),
        });
    }

    let mut grid = Vec::with_capacity(24);
    for (party, runs) in [
        (Party::Attester, &attester_runs),
        (Party::Verifier, &verifier_runs),
    ] {
        for message in [
            ProtocolMessage::Msg0,
            ProtocolMessage::Msg1,
            ProtocolMessage::Msg2,
        ] {
            for category in CostCategory::ALL {
                let values: Vec<f64> = runs
                    .iter()
                    .map(|sums| sums.get(&(message, category)).copied().unwrap_or(0.0))
                    .collect();
                grid.push(GridCell {
                    party,
                    message,
                    category,
                    stats: stats(&values),
                });
            }
        }
    }

    Ok(BenchReport {
        iterations: options.iterations,
        grid,
        msg3,
    })
}

fn run_attester_once(
    addr: std::net::SocketAddr,
    config: &VerifierConfig,
    service: &AttestationService,
    claim: [u8; 32],
) -> Result<(), BenchError> {
    let mut stream = TcpStream::connect(addr)?;
    let (mut session, msg0) = AttesterSession::start(
        *config.identity.public_point(),
        &mut rand::rngs::OsRng,
    )
    .map_err(|e| BenchError::Protocol(e.to_string()))?;
    wire::write_frame(&mut stream, MsgType::Msg0, &msg0.encode())
        .map_err(|e| BenchError::Protocol(e.to_string()))?;

    let msg1 = read_payload(&mut stream, MsgType::Msg1)?;
    let msg1 = Msg1Payload::decode(&msg1).map_err(|e| BenchError::Protocol(e.to_string()))?;
    let anchor = session
        .handle_msg1(&msg1)
        .map_err(|e| BenchError::Protocol(e.to_string()))?;

    let evidence = service.issue_evidence(anchor, claim);
    let msg2 = session
        .build_msg2(&evidence)
        .map_err(|e| BenchError::Protocol(e.to_string()))?;
    wire::write_frame(&mut stream, MsgType::Msg2, &msg2.encode())
        .map_err(|e| BenchError::Protocol(e.to_string()))?;

    let msg3 = read_payload(&mut stream, MsgType::Msg3)?;
    let msg3 = Msg3Payload::decode(&msg3).map_err(|e| BenchError::Protocol(e.to_string()))?;
    let blob = session
        .handle_msg3(&msg3)
        .map_err(|e| BenchError::Protocol(e.to_string()))?;
    if blob != config.secret_blob {
        return Err(BenchError::Protocol("provisioned blob mismatch".into()));
    }
    Ok(())
}

fn read_payload(stream: &mut TcpStream, expected: MsgType) -> Result<Vec<u8>, BenchError> {
    match wire::read_frame(stream) {
        Ok((msg_type, payload)) if msg_type == expected => Ok(payload),
        Ok((msg_type, _)) => Err(BenchError::Protocol(format!(
            "expected {expected:?}, got {msg_type:?}"
        ))),
        Err(err) => Err(BenchError::Protocol(err.to_string())),
    }
}

fn sum_spans(spans: &[Span]) -> CellSums {
    let mut sums = CellSums::new();
    for span in spans {
        *sums.entry((span.message, span.category)).or_default() += span.elapsed.as_nanos() as f64;
    }
    sums
}

fn stats(values: &[f64]) -> Stats {
    if values.is_empty() {
        return Stats::default();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = sorted.len() / 2;
    let median_ns = if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    };
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let variance = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / sorted.len() as f64;
    Stats {
        median_ns,
        std_dev_ns: variance.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_iterations() {
        let options = BenchOptions {
            iterations: 0,
            blob_sizes: vec![1024],
        };
        assert!(matches!(run(&options), Err(BenchError::NoIterations)));
    }

    #[test]
    fn single_iteration_produces_full_grid() {
        let options = BenchOptions {
            iterations: 1,
            blob_sizes: vec![4096, 1024],
        };
        let report = run(&options).unwrap();
        assert_eq!(report.grid.len(), 24);
        assert_eq!(report.msg3.len(), 2);
        // sizes come back sorted
        assert_eq!(report.msg3[0].blob_len, 1024);
        assert_eq!(report.msg3[1].blob_len, 4096);
        // signing shows up as asymmetric msg1 cost on the verifier
        let cell = report
            .grid
            .iter()
            .find(|c| {
                c.party == Party::Verifier
                    && c.message == ProtocolMessage::Msg1
                    && c.category == CostCategory::AsymmetricCrypto
            })
            .unwrap();
        assert!(cell.stats.median_ns > 0.0);
    }

    #[test]
    fn median_and_deviation() {
        let s = stats(&[3.0, 1.0, 2.0]);
        assert_eq!(s.median_ns, 2.0);
        assert!((s.std_dev_ns - 0.8164965809).abs() < 1e-6);
        let s = stats(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.median_ns, 2.5);
    }
}
