//! Time sources.
//!
//! Pipeline timings, trace timestamps and the per-host rate limiter all read
//! time through [`Clock`], so tests can substitute a [`ManualClock`] and get
//! byte-stable traces and exact politeness assertions.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use chrono::{DateTime, Utc};

#[async_trait]
pub trait Clock: Send + Sync + std::fmt::Debug {
    /// Wall-clock time, used for timestamps.
    fn now(&self) -> DateTime<Utc>;

    /// Monotonic time since the clock's origin.
    fn elapsed(&self) -> Duration;

    /// Suspend until `elapsed() >= deadline`.
    async fn sleep_until(&self, deadline: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

#[async_trait]
impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn elapsed(&self) -> Duration {
        self.origin.elapsed()
    }

    async fn sleep_until(&self, deadline: Duration) {
        let now = self.elapsed();
        if deadline > now {
            tokio::time::sleep(deadline - now).await;
        }
    }
}

/// Virtual clock. Time only moves when someone sleeps or calls [`advance`].
///
/// [`advance`]: ManualClock::advance
#[derive(Debug)]
pub struct ManualClock {
    epoch: DateTime<Utc>,
    offset: Mutex<Duration>,
}

impl ManualClock {
    pub fn new(epoch: DateTime<Utc>) -> Self {
        Self {
            epoch,
            offset: Mutex::new(Duration::ZERO),
        }
    }

    /// A clock frozen at 2024-04-01T00:00:00Z.
    pub fn fixed() -> Self {
        Self::new(
            DateTime::parse_from_rfc3339("2024-04-01T00:00:00Z")
                .expect("valid timestamp")
                .with_timezone(&Utc),
        )
    }

    pub fn advance(&self, by: Duration) {
        *self.offset.lock().unwrap() += by;
    }
}

#[async_trait]
impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        let offset = *self.offset.lock().unwrap();
        self.epoch + chrono::Duration::from_std(offset).unwrap_or_default()
    }

    fn elapsed(&self) -> Duration {
        *self.offset.lock().unwrap()
    }

    async fn sleep_until(&self, deadline: Duration) {
        let mut offset = self.offset.lock().unwrap();
        if deadline > *offset {
            *offset = deadline;
        }
    }
}
