//! Bounded retries with exponential backoff for remote calls.

use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_delay_ms: 500, max_delay_ms: 8_000 }
    }
}

impl RetryPolicy {
    pub fn delay_for(&self, retry: u32) -> Duration {
        let ms = self.base_delay_ms.saturating_mul(1u64 << retry.min(20));
        Duration::from_millis(ms.min(self.max_delay_ms))
    }
}

/// What a single attempt produced.
pub enum Attempt<T, E> {
    Done(T),
    /// Transient failure; try again if budget remains.
    Retry(E),
    /// Permanent failure; surface immediately.
    Fail(E),
}

/// Runs `op` until it succeeds, fails permanently, or the retry budget is
/// spent. Returns the last error in the latter cases along with the number
/// of attempts made.
pub fn with_retries<T, E>(policy: &RetryPolicy, mut op: impl FnMut(u32) -> Attempt<T, E>) -> (Result<T, E>, u32) {
    let mut attempt = 0;
    loop {
        match op(attempt) {
            Attempt::Done(v) => return (Ok(v), attempt + 1),
            Attempt::Fail(e) => return (Err(e), attempt + 1),
            Attempt::Retry(e) => {
                if attempt >= policy.max_retries {
                    return (Err(e), attempt + 1);
                }
                let delay = policy.delay_for(attempt);
                log::debug!("attempt {} failed, retrying in {:?}", attempt + 1, delay);
                std::thread::sleep(delay);
                attempt += 1;
            }
        }
    }
}
