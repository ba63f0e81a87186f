//! Query accounting shared by every search strategy.
//!
//! The ledger is the single source of truth for how many model invocations a
//! campaign and each example consumed, and for per-example wall-clock time.
//! It is internally synchronized so worker threads can share one instance.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

#[derive(Default)]
struct LedgerInner {
    total: u64,
    per_example: HashMap<String, u64>,
    started: HashMap<String, Instant>,
    wall_clock: HashMap<String, f64>,
}

#[derive(Default)]
pub struct QueryLedger {
    inner: Mutex<LedgerInner>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Marks the start of one example's search. The per-example counter is
    /// created (never reset) and the wall clock starts on first call.
    pub fn begin_example(&self, sample_id: &str) {
        let mut inner = self.inner.lock().unwrap();
        inner.per_example.entry(sample_id.to_string()).or_insert(0);
        inner
            .started
            .entry(sample_id.to_string())
            .or_insert_with(Instant::now);
    }

    /// Counts one model invocation against the campaign total and the
    /// example's counter.
    pub fn record_query(&self, sample_id: &str) {
        let mut inner = self.inner.lock().unwrap();
        inner.total += 1;
        *inner.per_example.entry(sample_id.to_string()).or_insert(0) += 1;
        inner
            .started
            .entry(sample_id.to_string())
            .or_insert_with(Instant::now);
    }

    pub fn total(&self) -> u64 {
        self.inner.lock().unwrap().total
    }

    pub fn per_example(&self, sample_id: &str) -> u64 {
        self.inner
            .lock()
            .unwrap()
            .per_example
            .get(sample_id)
            .copied()
            .unwrap_or(0)
    }

    /// Seconds elapsed for the example: the frozen value once finished,
    /// otherwise time since `begin_example`, otherwise zero.
    pub fn elapsed_seconds(&self, sample_id: &str) -> f64 {
        let inner = self.inner.lock().unwrap();
        if let Some(t) = inner.wall_clock.get(sample_id) {
            return *t;
        }
        inner
            .started
            .get(sample_id)
            .map(|s| s.elapsed().as_secs_f64())
            .unwrap_or(0.0)
    }

    /// Freezes the example's wall clock and returns `(queries, seconds)`.
    pub fn finish_example(&self, sample_id: &str) -> (u64, f64) {
        let mut inner = self.inner.lock().unwrap();
        let queries = inner.per_example.get(sample_id).copied().unwrap_or(0);
        let elapsed = match inner.wall_clock.get(sample_id) {
            Some(t) => *t,
            None => {
                let t = inner
                    .started
                    .get(sample_id)
                    .map(|s| s.elapsed().as_secs_f64())
                    .unwrap_or(0.0);
                inner.wall_clock.insert(sample_id.to_string(), t);
                t
            }
        };
        (queries, elapsed)
    }

    pub fn wall_clock(&self, sample_id: &str) -> Option<f64> {
        self.inner.lock().unwrap().wall_clock.get(sample_id).copied()
    }

    /// Shifts an example's start time into the past. Test hook for exercising
    /// time budgets without sleeping.
    #[doc(hidden)]
    pub fn backdate_start(&self, sample_id: &str, by: Duration) {
        let mut inner = self.inner.lock().unwrap();
        let now = Instant::now();
        inner
            .started
            .insert(sample_id.to_string(), now.checked_sub(by).unwrap_or(now));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_track_per_example_sums() {
        let ledger = QueryLedger::new();
        ledger.begin_example("a");
        ledger.record_query("a");
        ledger.record_query("a");
        ledger.record_query("b");
        assert_eq!(ledger.per_example("a"), 2);
        assert_eq!(ledger.per_example("b"), 1);
        assert_eq!(ledger.per_example("c"), 0);
        assert_eq!(ledger.total(), 3);
    }

    #[test]
    fn begin_is_idempotent_and_never_resets() {
        let ledger = QueryLedger::new();
        ledger.record_query("a");
        ledger.begin_example("a");
        assert_eq!(ledger.per_example("a"), 1);
    }

    #[test]
    fn finish_freezes_the_wall_clock() {
        let ledger = QueryLedger::new();
        ledger.begin_example("a");
        ledger.record_query("a");
        let (q, t1) = ledger.finish_example("a");
        assert_eq!(q, 1);
        let t2 = ledger.elapsed_seconds("a");
        assert_eq!(t1, t2);
        assert_eq!(ledger.wall_clock("a"), Some(t1));
    }

    #[test]
    fn backdating_moves_elapsed_time() {
        let ledger = QueryLedger::new();
        ledger.begin_example("a");
        ledger.backdate_start("a", Duration::from_secs(3601));
        assert!(ledger.elapsed_seconds("a") >= 3601.0);
    }

    #[test]
    fn shared_across_threads() {
        let ledger = std::sync::Arc::new(QueryLedger::new());
        let handles: Vec<_> = (0..4)
            .map(|w| {
                let ledger = ledger.clone();
                std::thread::spawn(move || {
                    let id = format!("s{w}");
                    for _ in 0..25 {
                        ledger.record_query(&id);
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(ledger.total(), 100);
    }
}
