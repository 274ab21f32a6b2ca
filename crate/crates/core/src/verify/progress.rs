//! Optional per-sample progress reporting.
//!
//! The harness is sample-parallel; progress lines are emitted on completion
//! and may interleave in any order. Report files are unaffected.

use std::sync::{Arc, RwLock};

type Sink = Arc<dyn Fn(&str, u64) + Send + Sync>;

static SINK: RwLock<Option<Sink>> = RwLock::new(None);

pub fn set_sink(sink: Option<Sink>) {
    *SINK.write().expect("progress sink lock") = sink;
}

pub fn emit(experiment: &str, sample: u64) {
    if let Some(s) = SINK.read().expect("progress sink lock").as_ref() {
        s(experiment, sample);
    }
}
