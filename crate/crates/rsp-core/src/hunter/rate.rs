//! Per-adapter dispatch pacing: a sliding-window token budget over an
//! injectable clock so tests run on virtual time.

use std::cell::Cell;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// Time source for the governor. `wait` blocks (or advances) for at least
/// the given duration.
pub trait Clock {
    fn now(&self) -> Duration;
    fn wait(&self, d: Duration);
}

/// Virtual time: starts at zero, `wait` advances instantly. Shared by
/// reference so the governor and the test observe the same timeline.
#[derive(Debug, Default)]
pub struct VirtualClock {
    t: Cell<Duration>,
}

impl VirtualClock {
    pub fn new() -> VirtualClock {
        VirtualClock::default()
    }

    pub fn advance(&self, d: Duration) {
        self.t.set(self.t.get() + d);
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        self.t.get()
    }

    fn wait(&self, d: Duration) {
        self.advance(d);
    }
}

/// Wall-clock time relative to construction.
#[derive(Debug)]
pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> SystemClock {
        SystemClock {
            start: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }

    fn wait(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateLimitPolicy {
    pub tokens_per_interval: u32,
    pub interval: Duration,
    /// Minimum pause once the window is full, even if a token frees sooner.
    pub backoff_on_limit: Duration,
}

impl Default for RateLimitPolicy {
    fn default() -> Self {
        RateLimitPolicy {
            tokens_per_interval: 10,
            interval: Duration::from_secs(1),
            backoff_on_limit: Duration::from_millis(100),
        }
    }
}

/// Sliding-window governor: at most `tokens_per_interval` dispatches in any
/// window of length `interval`. The full dispatch log is kept so tests can
/// audit every window.
#[derive(Debug)]
pub struct RateGovernor {
    policy: RateLimitPolicy,
    log: Vec<Duration>,
}

impl RateGovernor {
    pub fn new(policy: RateLimitPolicy) -> RateGovernor {
        assert!(policy.tokens_per_interval > 0, "token budget must be positive");
        RateGovernor {
            policy,
            log: Vec::new(),
        }
    }

    pub fn policy(&self) -> &RateLimitPolicy {
        &self.policy
    }

    /// Timestamps of every dispatch so far, in order.
    pub fn dispatch_log(&self) -> &[Duration] {
        &self.log
    }

    /// Delay needed before a dispatch at `now` stays within the window
    /// budget. Zero means a token is free.
    pub fn required_delay(&self, now: Duration) -> Duration {
        // Log is monotone; in-window entries form a suffix. The window is
        // half-open (now - interval, now], tested as t + interval > now so
        // zero timestamps stay in-window while now < interval.
        let first_in = self
            .log
            .partition_point(|&t| t + self.policy.interval <= now);
        let in_window = self.log.len() - first_in;
        if (in_window as u32) < self.policy.tokens_per_interval {
            return Duration::ZERO;
        }
        let oldest = self.log[first_in];
        let frees_at = oldest + self.policy.interval;
        let natural = frees_at.saturating_sub(now);
        natural.max(self.policy.backoff_on_limit)
    }

    /// Waits on `clock` until a token is free, then consumes it.
    pub fn acquire(&mut self, clock: &dyn Clock) {
        loop {
            let now = clock.now();
            let delay = self.required_delay(now);
            if delay.is_zero() {
                if let Some(&last) = self.log.last() {
                    debug_assert!(now >= last, "clock moved backwards");
                }
                self.log.push(now);
                return;
            }
            clock.wait(delay);
        }
    }
}

/// True iff every window of length `interval` over `log` holds at most
/// `budget` dispatches. Brute-force oracle for tests.
pub fn window_budget_respected(log: &[Duration], interval: Duration, budget: u32) -> bool {
    for (i, &start) in log.iter().enumerate() {
        let in_window = log[i..].iter().take_while(|&&t| t < start + interval).count();
        if in_window as u32 > budget {
            return false;
        }
    }
    true
}
