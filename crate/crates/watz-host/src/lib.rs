//! Trusted-runtime stand-in: loads a WebAssembly module, measures its
//! bytecode, and executes it with the `watz_ra` attestation host functions
//! plus a minimal WASI subset (args, stdout, clock, randomness).
//!
//! The measurement is taken over the exact bytes handed to the engine,
//! before any parsing, so the claim embedded in issued evidence always
//! describes what was loaded. Host functions validate every guest pointer
//! against the sandbox's linear memory and report errors as errno codes,
//! never as crashes.

use std::collections::HashMap;
use std::io::Write as _;
use std::net::TcpStream;
use std::sync::Arc;

use wasmi::core::Trap;
use wasmi::{Caller, Engine, Linker, Memory, Module, Store};
use watz_core::attester::{AttesterError, AttesterPhase, AttesterSession};
use watz_core::crypto::POINT_LEN;
use watz_core::evidence::Evidence;
use watz_core::service::AttestationService;
use watz_core::wire::{self, Msg1Payload, Msg3Payload, MsgType, WireError};

/// Import module name for the attestation API.
pub const RA_MODULE: &str = "watz_ra";
/// Import module name for the WASI subset.
pub const WASI_MODULE: &str = "wasi_snapshot_preview1";

/// Success.
pub const ERRNO_OK: i32 = 0;
/// Unknown or already-disposed handle.
pub const ERRNO_INVALID_HANDLE: i32 = 1;
/// Connection failed, closed early, or the address was unusable.
pub const ERRNO_NETWORK: i32 = 2;
/// Protocol violation: bad frame, failed MAC/signature/decryption, or an
/// operation out of protocol order.
pub const ERRNO_PROTOCOL: i32 = 3;
/// The verifier identity did not match the expected key.
pub const ERRNO_IDENTITY_MISMATCH: i32 = 4;
/// Guest buffer too small; the required size was written instead.
pub const ERRNO_SHORT_BUFFER: i32 = 5;
/// Guest pointer range left the sandbox's linear memory.
pub const ERRNO_MEMORY: i32 = 6;

/// Human-readable name for an attestation errno, for operator output.
pub fn errno_name(errno: i32) -> &'static str {
    match errno {
        ERRNO_OK => "ok",
        ERRNO_INVALID_HANDLE => "invalid-handle",
        ERRNO_NETWORK => "network-failure",
        ERRNO_PROTOCOL => "protocol-failure",
        ERRNO_IDENTITY_MISMATCH => "identity-mismatch",
        ERRNO_SHORT_BUFFER => "short-buffer",
        ERRNO_MEMORY => "memory-out-of-bounds",
        _ => "unknown",
    }
}

/// SHA-256 of a module's raw bytes; the claim that ends up in evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Measurement(pub [u8; 32]);

impl Measurement {
    pub fn hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Measures module bytes exactly as [`WasmApp::load`] would.
pub fn measure(module_bytes: &[u8]) -> Measurement {
    Measurement(watz_core::crypto::sha256(module_bytes))
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    /// The bytes were measured but do not form a loadable module.
    #[error("module rejected (claim {}): {reason}", measurement.hex())]
    Invalid {
        measurement: Measurement,
        reason: String,
    },
}

impl LoadError {
    /// The measurement is always computed, even for rejected modules.
    pub fn measurement(&self) -> Measurement {
        match self {
            LoadError::Invalid { measurement, .. } => *measurement,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("module does not export a \"_start\" function")]
    MissingStart,
    #[error("guest trapped: {0}")]
    Trap(String),
    #[error("guest exited with code {0}")]
    Exit(i32),
}

struct RaContext {
    session: AttesterSession,
    stream: TcpStream,
    /// Blob decrypted from msg3 but not yet delivered to the guest.
    pending_blob: Option<Vec<u8>>,
}

/// Host-side state shared with the guest through the `watz_ra` imports.
struct HostState {
    service: Arc<AttestationService>,
    measurement: Measurement,
    args: Vec<Vec<u8>>,
    contexts: HashMap<u32, RaContext>,
    anchors: HashMap<u32, [u8; 32]>,
    quotes: HashMap<u32, Evidence>,
    // handles count up and are never reused within one instance
    next_handle: u32,
    last_received_blob: Option<Vec<u8>>,
}

impl HostState {
    fn allocate_handle(&mut self) -> u32 {
        self.next_handle += 1;
        self.next_handle
    }
}

/// A loaded, measured, ready-to-run guest.
pub struct WasmApp {
    store: Store<HostState>,
    instance: wasmi::Instance,
}

impl WasmApp {
    /// Measures and instantiates a guest module. `args` become the WASI
    /// argument vector (by convention: module name, then parameters).
    pub fn load(
        service: Arc<AttestationService>,
        module_bytes: &[u8],
        args: Vec<String>,
    ) -> Result<WasmApp, LoadError> {
        let measurement = measure(module_bytes);
        log::debug!("loaded module claim={}", measurement.hex());

        let invalid = |reason: String| LoadError::Invalid {
            measurement,
            reason,
        };

        let engine = Engine::default();
        let module =
            Module::new(&engine, module_bytes).map_err(|err| invalid(err.to_string()))?;

        let mut store = Store::new(
            &engine,
            HostState {
                service,
                measurement,
                args: args
                    .into_iter()
                    .map(|a| {
                        let mut bytes = a.into_bytes();
                        bytes.push(0);
                        bytes
                    })
                    .collect(),
                contexts: HashMap::new(),
                anchors: HashMap::new(),
                quotes: HashMap::new(),
                next_handle: 0,
                last_received_blob: None,
            },
        );

        let mut linker = Linker::<HostState>::new(&engine);
        register_ra_functions(&mut linker).map_err(|err| invalid(err.to_string()))?;
        register_wasi_subset(&mut linker).map_err(|err| invalid(err.to_string()))?;

        let instance = linker
            .instantiate(&mut store, &module)
            .map_err(|err| invalid(err.to_string()))?
            .start(&mut store)
            .map_err(|err| invalid(err.to_string()))?;

        Ok(WasmApp { store, instance })
    }

    /// Invokes the guest's exported `_start`.
    pub fn run(&mut self) -> Result<(), RunError> {
        let start = self
            .instance
            .get_typed_func::<(), ()>(&self.store, "_start")
            .map_err(|_| RunError::MissingStart)?;
        match start.call(&mut self.store, ()) {
            Ok(()) => Ok(()),
            Err(trap) => match trap.i32_exit_status() {
                Some(0) => Ok(()),
                Some(code) => Err(RunError::Exit(code)),
                None => Err(RunError::Trap(trap.to_string())),
            },
        }
    }

    pub fn measurement(&self) -> Measurement {
        self.store.data().measurement
    }

    /// Bytes the guest handed to `watz_test_sink`, if any.
    pub fn last_received_blob(&self) -> Option<&[u8]> {
        self.store.data().last_received_blob.as_deref()
    }
}

fn register_ra_functions(linker: &mut Linker<HostState>) -> Result<(), wasmi::errors::LinkerError> {
    linker.func_wrap(RA_MODULE, "wasi_ra_net_handshake", ra_net_handshake)?;
    linker.func_wrap(RA_MODULE, "wasi_ra_collect_quote", ra_collect_quote)?;
    linker.func_wrap(RA_MODULE, "wasi_ra_dispose_quote", ra_dispose_quote)?;
    linker.func_wrap(RA_MODULE, "wasi_ra_net_send_quote", ra_net_send_quote)?;
    linker.func_wrap(RA_MODULE, "wasi_ra_net_receive_data", ra_net_receive_data)?;
    linker.func_wrap(RA_MODULE, "wasi_ra_net_dispose", ra_net_dispose)?;
    linker.func_wrap(RA_MODULE, "watz_test_sink", watz_test_sink)?;
    Ok(())
}

// --- guest memory access -------------------------------------------------

fn guest_memory(caller: &mut Caller<'_, HostState>) -> Result<Memory, i32> {
    caller
        .get_export("memory")
        .and_then(wasmi::Extern::into_memory)
        .ok_or(ERRNO_MEMORY)
}

fn read_guest(
    caller: &Caller<'_, HostState>,
    memory: Memory,
    ptr: u32,
    len: u32,
) -> Result<Vec<u8>, i32> {
    let mut buf = vec![0u8; len as usize];
    memory
        .read(caller, ptr as usize, &mut buf)
        .map_err(|_| ERRNO_MEMORY)?;
    Ok(buf)
}

fn write_guest(
    caller: &mut Caller<'_, HostState>,
    memory: Memory,
    ptr: u32,
    bytes: &[u8],
) -> Result<(), i32> {
    memory
        .write(caller, ptr as usize, bytes)
        .map_err(|_| ERRNO_MEMORY)
}

fn write_guest_u32(
    caller: &mut Caller<'_, HostState>,
    memory: Memory,
    ptr: u32,
    value: u32,
) -> Result<(), i32> {
    write_guest(caller, memory, ptr, &value.to_le_bytes())
}

// --- errno mapping -------------------------------------------------------

fn errno_from_wire(err: &WireError) -> i32 {
    match err {
        // a vanished peer is a network condition, not a protocol one
        WireError::Truncated | WireError::Io(_) => ERRNO_NETWORK,
        _ => ERRNO_PROTOCOL,
    }
}

fn errno_from_attester(err: &AttesterError) -> i32 {
    match err {
        AttesterError::IdentityMismatch | AttesterError::InvalidVerifierKey => {
            ERRNO_IDENTITY_MISMATCH
        }
        _ => ERRNO_PROTOCOL,
    }
}

fn read_expected_frame(stream: &mut TcpStream, expected: MsgType) -> Result<Vec<u8>, i32> {
    match wire::read_frame(stream) {
        Ok((msg_type, payload)) if msg_type == expected => Ok(payload),
        Ok(_) => Err(ERRNO_PROTOCOL),
        Err(err) => Err(errno_from_wire(&err)),
    }
}

// --- watz_ra host functions ----------------------------------------------

/// Connects to the verifier and runs msg0/msg1. Writes a context handle
/// and an anchor handle into guest memory on success.
fn ra_net_handshake(
    mut caller: Caller<'_, HostState>,
    addr_ptr: u32,
    addr_len: u32,
    vkey_ptr: u32,
    vkey_len: u32,
    out_ctx_ptr: u32,
    out_anchor_ptr: u32,
) -> i32 {
    let memory = match guest_memory(&mut caller) {
        Ok(memory) => memory,
        Err(errno) => return errno,
    };
    let addr_bytes = match read_guest(&caller, memory, addr_ptr, addr_len) {
        Ok(bytes) => bytes,
        Err(errno) => return errno,
    };
    let vkey_bytes = match read_guest(&caller, memory, vkey_ptr, vkey_len) {
        Ok(bytes) => bytes,
        Err(errno) => return errno,
    };

    let Ok(addr) = std::str::from_utf8(&addr_bytes) else {
        return ERRNO_NETWORK;
    };
    let Ok(expected_key) = <[u8; POINT_LEN]>::try_from(vkey_bytes.as_slice()) else {
        return ERRNO_IDENTITY_MISMATCH;
    };

    let (mut session, msg0) =
        match AttesterSession::start(expected_key, &mut rand::rngs::OsRng) {
            Ok(pair) => pair,
            Err(err) => return errno_from_attester(&err),
        };

    let mut stream = match TcpStream::connect(addr) {
        Ok(stream) => stream,
        Err(err) => {
            log::debug!("handshake connect {addr}: {err}");
            return ERRNO_NETWORK;
        }
    };
    if let Err(err) = wire::write_frame(&mut stream, MsgType::Msg0, &msg0.encode()) {
        return errno_from_wire(&err);
    }
    let msg1 = match read_expected_frame(&mut stream, MsgType::Msg1) {
        Ok(payload) => payload,
        Err(errno) => return errno,
    };
    let msg1 = match Msg1Payload::decode(&msg1) {
        Ok(msg1) => msg1,
        Err(err) => return errno_from_wire(&err),
    };
    let anchor = match session.handle_msg1(&msg1) {
        Ok(anchor) => anchor,
        Err(err) => return errno_from_attester(&err),
    };

    let state = caller.data_mut();
    let ctx_handle = state.allocate_handle();
    let anchor_handle = state.allocate_handle();
    state.contexts.insert(
        ctx_handle,
        RaContext {
            session,
            stream,
            pending_blob: None,
        },
    );
    state.anchors.insert(anchor_handle, anchor);

    let undo = |caller: &mut Caller<'_, HostState>| {
        let state = caller.data_mut();
        state.contexts.remove(&ctx_handle);
        state.anchors.remove(&anchor_handle);
        ERRNO_MEMORY
    };
    if write_guest_u32(&mut caller, memory, out_ctx_ptr, ctx_handle).is_err() {
        return undo(&mut caller);
    }
    if write_guest_u32(&mut caller, memory, out_anchor_ptr, anchor_handle).is_err() {
        return undo(&mut caller);
    }
    ERRNO_OK
}

/// Issues evidence for a previously returned anchor handle and stores it
/// behind a fresh quote handle.
fn ra_collect_quote(mut caller: Caller<'_, HostState>, anchor_handle: u32, out_quote_ptr: u32) -> i32 {
    let memory = match guest_memory(&mut caller) {
        Ok(memory) => memory,
        Err(errno) => return errno,
    };
    let state = caller.data_mut();
    let Some(anchor) = state.anchors.get(&anchor_handle).copied() else {
        return ERRNO_INVALID_HANDLE;
    };
    let evidence = state.service.issue_evidence(anchor, state.measurement.0);
    let quote_handle = state.allocate_handle();
    state.quotes.insert(quote_handle, evidence);

    if write_guest_u32(&mut caller, memory, out_quote_ptr, quote_handle).is_err() {
        caller.data_mut().quotes.remove(&quote_handle);
        return ERRNO_MEMORY;
    }
    ERRNO_OK
}

fn ra_dispose_quote(mut caller: Caller<'_, HostState>, quote_handle: u32) -> i32 {
    match caller.data_mut().quotes.remove(&quote_handle) {
        Some(_) => ERRNO_OK,
        None => ERRNO_INVALID_HANDLE,
    }
}

/// Sends a collected quote as msg2 over the context's connection.
fn ra_net_send_quote(mut caller: Caller<'_, HostState>, ctx_handle: u32, quote_handle: u32) -> i32 {
    let state = caller.data_mut();
    let Some(evidence) = state.quotes.get(&quote_handle).cloned() else {
        return ERRNO_INVALID_HANDLE;
    };
    let Some(ctx) = state.contexts.get_mut(&ctx_handle) else {
        return ERRNO_INVALID_HANDLE;
    };
    let msg2 = match ctx.session.build_msg2(&evidence) {
        Ok(msg2) => msg2,
        Err(err) => return errno_from_attester(&err),
    };
    match wire::write_frame(&mut ctx.stream, MsgType::Msg2, &msg2.encode()) {
        Ok(()) => ERRNO_OK,
        Err(err) => errno_from_wire(&err),
    }
}

/// Receives the secret blob. Supports the size-query pattern: when the
/// guest buffer is too small the needed length is reported, the blob is
/// retained, and a later call with a large enough buffer succeeds.
fn ra_net_receive_data(
    mut caller: Caller<'_, HostState>,
    ctx_handle: u32,
    buf_ptr: u32,
    buf_len: u32,
    out_written_ptr: u32,
) -> i32 {
    let memory = match guest_memory(&mut caller) {
        Ok(memory) => memory,
        Err(errno) => return errno,
    };

    let blob = {
        let state = caller.data_mut();
        let Some(ctx) = state.contexts.get_mut(&ctx_handle) else {
            return ERRNO_INVALID_HANDLE;
        };
        match ctx.pending_blob.take() {
            Some(blob) => blob,
            None => {
                if ctx.session.phase() != AttesterPhase::QuoteSent {
                    return ERRNO_PROTOCOL;
                }
                let payload = match read_expected_frame(&mut ctx.stream, MsgType::Msg3) {
                    Ok(payload) => payload,
                    Err(errno) => return errno,
                };
                let msg3 = match Msg3Payload::decode(&payload) {
                    Ok(msg3) => msg3,
                    Err(err) => return errno_from_wire(&err),
                };
                match ctx.session.handle_msg3(&msg3) {
                    Ok(blob) => blob,
                    Err(err) => return errno_from_attester(&err),
                }
            }
        }
    };

    let stash = |caller: &mut Caller<'_, HostState>, blob: Vec<u8>, errno: i32| {
        if let Some(ctx) = caller.data_mut().contexts.get_mut(&ctx_handle) {
            ctx.pending_blob = Some(blob);
        }
        errno
    };

    if blob.len() > buf_len as usize {
        let needed = blob.len() as u32;
        let errno = stash(&mut caller, blob, ERRNO_SHORT_BUFFER);
        if write_guest_u32(&mut caller, memory, out_written_ptr, needed).is_err() {
            return ERRNO_MEMORY;
        }
        return errno;
    }

    if write_guest(&mut caller, memory, buf_ptr, &blob).is_err() {
        return stash(&mut caller, blob, ERRNO_MEMORY);
    }
    let written = blob.len() as u32;
    if write_guest_u32(&mut caller, memory, out_written_ptr, written).is_err() {
        return stash(&mut caller, blob, ERRNO_MEMORY);
    }
    ERRNO_OK
}

fn ra_net_dispose(mut caller: Caller<'_, HostState>, ctx_handle: u32) -> i32 {
    match caller.data_mut().contexts.remove(&ctx_handle) {
        Some(_) => ERRNO_OK,
        None => ERRNO_INVALID_HANDLE,
    }
}

/// Test observability hook: copies guest bytes into host state so tests
/// and the CLI can inspect what the guest ended up with.
fn watz_test_sink(mut caller: Caller<'_, HostState>, ptr: u32, len: u32) -> i32 {
    let memory = match guest_memory(&mut caller) {
        Ok(memory) => memory,
        Err(errno) => return errno,
    };
    let bytes = match read_guest(&caller, memory, ptr, len) {
        Ok(bytes) => bytes,
        Err(errno) => return errno,
    };
    caller.data_mut().last_received_blob = Some(bytes);
    ERRNO_OK
}

// --- minimal WASI subset ---------------------------------------------------

const WASI_OK: i32 = 0;
const WASI_EBADF: i32 = 8;
const WASI_EFAULT: i32 = 21;

fn register_wasi_subset(linker: &mut Linker<HostState>) -> Result<(), wasmi::errors::LinkerError> {
    linker.func_wrap(
        WASI_MODULE,
        "args_sizes_get",
        |mut caller: Caller<'_, HostState>, argc_ptr: u32, buf_size_ptr: u32| -> i32 {
            let Ok(memory) = guest_memory(&mut caller) else {
                return WASI_EFAULT;
            };
            let argc = caller.data().args.len() as u32;
            let buf_size: usize = caller.data().args.iter().map(Vec::len).sum();
            if write_guest_u32(&mut caller, memory, argc_ptr, argc).is_err()
                || write_guest_u32(&mut caller, memory, buf_size_ptr, buf_size as u32).is_err()
            {
                return WASI_EFAULT;
            }
            WASI_OK
        },
    )?;

    linker.func_wrap(
        WASI_MODULE,
        "args_get",
        |mut caller: Caller<'_, HostState>, argv_ptr: u32, argv_buf_ptr: u32| -> i32 {
            let Ok(memory) = guest_memory(&mut caller) else {
                return WASI_EFAULT;
            };
            let args = caller.data().args.clone();
            let mut cursor = argv_buf_ptr;
            for (i, arg) in args.iter().enumerate() {
                if write_guest_u32(&mut caller, memory, argv_ptr + 4 * i as u32, cursor).is_err()
                    || write_guest(&mut caller, memory, cursor, arg).is_err()
                {
                    return WASI_EFAULT;
                }
                cursor += arg.len() as u32;
            }
            WASI_OK
        },
    )?;

    linker.func_wrap(
        WASI_MODULE,
        "fd_write",
        |mut caller: Caller<'_, HostState>, fd: u32, iovs: u32, iovs_len: u32, nwritten: u32| -> i32 {
            if fd != 1 && fd != 2 {
                return WASI_EBADF;
            }
            let Ok(memory) = guest_memory(&mut caller) else {
                return WASI_EFAULT;
            };
            let mut total = 0u32;
            for i in 0..iovs_len {
                let Ok(iov) = read_guest(&caller, memory, iovs + 8 * i, 8) else {
                    return WASI_EFAULT;
                };
                let ptr = u32::from_le_bytes(iov[..4].try_into().unwrap());
                let len = u32::from_le_bytes(iov[4..].try_into().unwrap());
                let Ok(bytes) = read_guest(&caller, memory, ptr, len) else {
                    return WASI_EFAULT;
                };
                if fd == 1 {
                    let _ = std::io::stdout().write_all(&bytes);
                } else {
                    let _ = std::io::stderr().write_all(&bytes);
                }
                total += len;
            }
            if write_guest_u32(&mut caller, memory, nwritten, total).is_err() {
                return WASI_EFAULT;
            }
            WASI_OK
        },
    )?;

    linker.func_wrap(
        WASI_MODULE,
        "clock_time_get",
        |mut caller: Caller<'_, HostState>, _id: u32, _precision: u64, time_ptr: u32| -> i32 {
            let Ok(memory) = guest_memory(&mut caller) else {
                return WASI_EFAULT;
            };
            let nanos = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_nanos() as u64)
                .unwrap_or(0);
            if write_guest(&mut caller, memory, time_ptr, &nanos.to_le_bytes()).is_err() {
                return WASI_EFAULT;
            }
            WASI_OK
        },
    )?;

    linker.func_wrap(
        WASI_MODULE,
        "random_get",
        |mut caller: Caller<'_, HostState>, buf_ptr: u32, len: u32| -> i32 {
            let Ok(memory) = guest_memory(&mut caller) else {
                return WASI_EFAULT;
            };
            let mut bytes = vec![0u8; len as usize];
            rand::RngCore::fill_bytes(&mut rand::rngs::OsRng, &mut bytes);
            if write_guest(&mut caller, memory, buf_ptr, &bytes).is_err() {
                return WASI_EFAULT;
            }
            WASI_OK
        },
    )?;

    linker.func_wrap(WASI_MODULE, "sched_yield", || -> i32 {
        std::thread::yield_now();
        WASI_OK
    })?;

    linker.func_wrap(
        WASI_MODULE,
        "proc_exit",
        |code: u32| -> Result<(), Trap> { Err(Trap::i32_exit(code as i32)) },
    )?;

    Ok(())
}

/// Compiled guest fixtures, checked in as WebAssembly text and built by
/// `build.rs`. Used by the test suites and the CLI examples.
pub mod fixtures {
    /// Full attestation flow driven by argv (see `fixtures/attest.wat`).
    pub const ATTEST: &[u8] = include_bytes!(concat!(env!("OUT_DIR"), "/attest.wasm"));
    /// Returns immediately.
    pub const RETURN: &[u8] = include_bytes!(concat!(env!("OUT_DIR"), "/return.wasm"));
    /// Executes `unreachable`.
    pub const TRAP: &[u8] = include_bytes!(concat!(env!("OUT_DIR"), "/trap.wasm"));
    /// Exports no `_start`.
    pub const NO_START: &[u8] = include_bytes!(concat!(env!("OUT_DIR"), "/no_start.wasm"));
    /// Hands a constant payload to the host sink.
    pub const SINK: &[u8] = include_bytes!(concat!(env!("OUT_DIR"), "/sink.wasm"));
}

#[cfg(test)]
mod tests {
    use super::*;
    use watz_core::service::{RootOfTrust, CURRENT_VERSION};

    fn service() -> Arc<AttestationService> {
        Arc::new(AttestationService::new(
            &RootOfTrust::new([0x21; 32]),
            CURRENT_VERSION,
        ))
    }

    #[test]
    fn measurement_is_hash_of_raw_bytes() {
        let a = measure(fixtures::RETURN);
        let b = measure(fixtures::RETURN);
        assert_eq!(a, b);

        let mut tampered = fixtures::RETURN.to_vec();
        *tampered.last_mut().unwrap() ^= 1;
        assert_ne!(measure(&tampered), a);

        assert_eq!(
            measure(b"").hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn malformed_module_still_reports_its_measurement() {
        let garbage = b"not a wasm module".to_vec();
        let Err(err) = WasmApp::load(service(), &garbage, vec![]) else {
            panic!("garbage must not load");
        };
        assert_eq!(err.measurement(), measure(&garbage));
    }

    #[test]
    fn run_paths() {
        let mut ok = WasmApp::load(service(), fixtures::RETURN, vec![]).unwrap();
        ok.run().unwrap();

        let mut trapping = WasmApp::load(service(), fixtures::TRAP, vec![]).unwrap();
        assert!(matches!(trapping.run(), Err(RunError::Trap(_))));

        let mut missing = WasmApp::load(service(), fixtures::NO_START, vec![]).unwrap();
        assert!(matches!(missing.run(), Err(RunError::MissingStart)));
    }

    #[test]
    fn sink_records_guest_bytes() {
        let mut app = WasmApp::load(service(), fixtures::SINK, vec![]).unwrap();
        app.run().unwrap();
        assert_eq!(app.last_received_blob(), Some(&b"fixture payload"[..]));
    }
}
