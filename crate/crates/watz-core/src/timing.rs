//! Lightweight span recording for the protocol micro-benchmark.
//!
//! Protocol code wraps its cost centres in [`span`], labelled by message
//! and cost category. Recording is off by default; the bench harness
//! enables it per thread, so instrumented code pays one thread-local
//! check when idle.

use std::cell::RefCell;
use std::time::{Duration, Instant};

/// Message a span belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProtocolMessage {
    Msg0,
    Msg1,
    Msg2,
    Msg3,
}

impl ProtocolMessage {
    pub const ALL: [ProtocolMessage; 4] = [
        ProtocolMessage::Msg0,
        ProtocolMessage::Msg1,
        ProtocolMessage::Msg2,
        ProtocolMessage::Msg3,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ProtocolMessage::Msg0 => "msg0",
            ProtocolMessage::Msg1 => "msg1",
            ProtocolMessage::Msg2 => "msg2",
            ProtocolMessage::Msg3 => "msg3",
        }
    }
}

/// Cost category within one message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CostCategory {
    MemoryManagement,
    KeyGeneration,
    SymmetricCrypto,
    AsymmetricCrypto,
}

impl CostCategory {
    pub const ALL: [CostCategory; 4] = [
        CostCategory::MemoryManagement,
        CostCategory::KeyGeneration,
        CostCategory::SymmetricCrypto,
        CostCategory::AsymmetricCrypto,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            CostCategory::MemoryManagement => "memory management",
            CostCategory::KeyGeneration => "key generation",
            CostCategory::SymmetricCrypto => "symmetric cryptography",
            CostCategory::AsymmetricCrypto => "asymmetric cryptography",
        }
    }
}

/// One timed region.
#[derive(Debug, Clone, Copy)]
pub struct Span {
    pub message: ProtocolMessage,
    pub category: CostCategory,
    pub elapsed: Duration,
}

thread_local! {
    static RECORDER: RefCell<Option<Vec<Span>>> = const { RefCell::new(None) };
}

/// Starts collecting spans on the current thread, discarding any
/// previously collected ones.
pub fn start_recording() {
    RECORDER.with(|r| *r.borrow_mut() = Some(Vec::new()));
}

/// Stops collecting and returns the spans recorded since
/// [`start_recording`]. Returns an empty list when recording was off.
pub fn stop_recording() -> Vec<Span> {
    RECORDER.with(|r| r.borrow_mut().take().unwrap_or_default())
}

/// Runs `f`, timing it under `(message, category)` when recording.
pub fn span<T>(message: ProtocolMessage, category: CostCategory, f: impl FnOnce() -> T) -> T {
    let recording = RECORDER.with(|r| r.borrow().is_some());
    if !recording {
        return f();
    }
    let started = Instant::now();
    let result = f();
    let elapsed = started.elapsed();
    RECORDER.with(|r| {
        if let Some(spans) = r.borrow_mut().as_mut() {
            spans.push(Span {
                message,
                category,
                elapsed,
            });
        }
    });
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_are_collected_only_while_recording() {
        let _ = span(ProtocolMessage::Msg0, CostCategory::KeyGeneration, || 1);
        assert!(stop_recording().is_empty());

        start_recording();
        let v = span(ProtocolMessage::Msg1, CostCategory::SymmetricCrypto, || 42);
        assert_eq!(v, 42);
        let spans = stop_recording();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].message, ProtocolMessage::Msg1);
        assert_eq!(spans[0].category, CostCategory::SymmetricCrypto);
        assert!(stop_recording().is_empty());
    }
}
