//! Blocking rate limiter for the HTTP adapter.
//!
//! Two independent brakes: a cap on concurrent in-flight requests and a
//! minimum interval between request dispatches. Both are enforced across
//! threads; permits release their slot on drop.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

struct LimiterState {
    in_flight: usize,
    /// Dispatch time reserved by the most recent acquire.
    last_dispatch: Option<Instant>,
}

pub struct RateLimiter {
    max_in_flight: usize,
    min_interval: Duration,
    state: Mutex<LimiterState>,
    available: Condvar,
}

impl RateLimiter {
    /// `max_in_flight` is clamped to at least one.
    pub fn new(max_in_flight: usize, min_interval: Duration) -> Self {
        RateLimiter {
            max_in_flight: max_in_flight.max(1),
            min_interval,
            state: Mutex::new(LimiterState {
                in_flight: 0,
                last_dispatch: None,
            }),
            available: Condvar::new(),
        }
    }

    /// Blocks until a slot is free and the inter-request interval has
    /// passed, then reserves a dispatch slot.
    pub fn acquire(&self) -> RatePermit<'_> {
        let mut state = self.state.lock().unwrap();
        while state.in_flight >= self.max_in_flight {
            state = self.available.wait(state).unwrap();
        }
        state.in_flight += 1;
        let now = Instant::now();
        let dispatch_at = match state.last_dispatch {
            Some(prev) => (prev + self.min_interval).max(now),
            None => now,
        };
        state.last_dispatch = Some(dispatch_at);
        drop(state);
        let wait = dispatch_at.saturating_duration_since(Instant::now());
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
        RatePermit { limiter: self }
    }

    fn release(&self) {
        let mut state = self.state.lock().unwrap();
        state.in_flight -= 1;
        drop(state);
        self.available.notify_one();
    }
}

pub struct RatePermit<'a> {
    limiter: &'a RateLimiter,
}

impl Drop for RatePermit<'_> {
    fn drop(&mut self) {
        self.limiter.release();
    }
}
