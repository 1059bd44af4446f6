use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::clock::Clock;

pub const DEFAULT_RATE_LIMIT: Duration = Duration::from_millis(500);

const HISTORY_LEN: usize = 1024;

/// Minimum spacing between requests to the same host.
///
/// Slots are reserved under a lock before sleeping, so concurrent callers
/// queue up rather than racing for the same instant.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    clock: Arc<dyn Clock>,
    next_slot: Mutex<HashMap<String, Duration>>,
    history: Mutex<VecDeque<(String, Duration)>>,
}

impl RateLimiter {
    pub fn new(interval: Duration, clock: Arc<dyn Clock>) -> Self {
        Self {
            interval,
            clock,
            next_slot: Mutex::new(HashMap::new()),
            history: Mutex::new(VecDeque::new()),
        }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Waits for this host's next free slot and returns its clock time.
    pub async fn acquire(&self, host: &str) -> Duration {
        let slot = {
            let mut next = self.next_slot.lock().unwrap();
            let now = self.clock.elapsed();
            let slot = next.get(host).copied().map_or(now, |n| n.max(now));
            next.insert(host.to_string(), slot + self.interval);
            let mut history = self.history.lock().unwrap();
            if history.len() == HISTORY_LEN {
                history.pop_front();
            }
            history.push_back((host.to_string(), slot));
            slot
        };
        self.clock.sleep_until(slot).await;
        slot
    }

    /// Most recent granted slots, oldest first.
    pub fn history(&self) -> Vec<(String, Duration)> {
        self.history.lock().unwrap().iter().cloned().collect()
    }
}
