use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, TimeZone, Utc};

/// Source of timestamps for caches and transcripts.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Advances by a fixed step on every reading, so runs are reproducible.
#[derive(Debug)]
pub struct LogicalClock {
    next_ms: AtomicI64,
    step_ms: i64,
}

impl LogicalClock {
    pub fn new(start: DateTime<Utc>, step_ms: i64) -> Self {
        Self { next_ms: AtomicI64::new(start.timestamp_millis()), step_ms }
    }

    /// Starts at 2024-01-01T00:00:00Z and ticks one second per reading.
    pub fn fixed() -> Self {
        Self::new(Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(), 1000)
    }
}

impl Clock for LogicalClock {
    fn now(&self) -> DateTime<Utc> {
        let ms = self.next_ms.fetch_add(self.step_ms, Ordering::SeqCst);
        Utc.timestamp_millis_opt(ms).single().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logical_clock_ticks() {
        let c = LogicalClock::fixed();
        let a = c.now();
        let b = c.now();
        assert_eq!((b - a).num_milliseconds(), 1000);
        assert_eq!(a.to_rfc3339(), "2024-01-01T00:00:00+00:00");
    }
}
