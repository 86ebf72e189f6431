use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

pub trait Clock: Send + Sync {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, duration: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Manually driven clock; `sleep` advances time instantly.
#[derive(Default)]
pub struct FakeClock {
    now: Mutex<Duration>,
    slept: Mutex<Vec<Duration>>,
}

impl FakeClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }

    pub fn sleeps(&self) -> Vec<Duration> {
        self.slept.lock().unwrap().clone()
    }
}

impl Clock for FakeClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, duration: Duration) {
        self.slept.lock().unwrap().push(duration);
        self.advance(duration);
    }
}

const WINDOW: Duration = Duration::from_secs(60);

/// Requests-per-minute limiter over a sliding one-minute window.
///
/// Shared by all threads issuing requests to one backend.
pub struct RateLimiter {
    rpm: usize,
    clock: Arc<dyn Clock>,
    issued: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(rpm: usize, clock: Arc<dyn Clock>) -> Self {
        assert!(rpm > 0, "rate limit must be positive");
        Self {
            rpm,
            clock,
            issued: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks until a request may be issued, then records it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut issued = self.issued.lock().unwrap();
                let now = self.clock.now();
                while issued
                    .front()
                    .is_some_and(|t| now.saturating_sub(*t) >= WINDOW)
                {
                    issued.pop_front();
                }
                if issued.len() < self.rpm {
                    issued.push_back(now);
                    return;
                }
                WINDOW - now.saturating_sub(issued[0])
            };
            self.clock.sleep(wait);
        }
    }
}
