use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::{BackendError, BackendRequest, CacheKey, ResponseCache, Role, Transport};

/// Exponential backoff: attempt `k` (0-based) waits `base * 2^(k-1)` first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, base_delay: Duration::from_millis(500) }
    }
}

/// Spaces request starts at least `1 / rate` seconds apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    /// `per_second` must be positive.
    pub fn new(per_second: f64) -> Self {
        assert!(per_second > 0.0, "rate limit must be positive");
        RateLimiter { interval: Duration::from_secs_f64(1.0 / per_second), next: Mutex::new(None) }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().expect("limiter lock");
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

struct Semaphore {
    available: Mutex<usize>,
    released: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore { available: Mutex::new(permits.max(1)), released: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().expect("semaphore lock");
        while *n == 0 {
            n = self.released.wait(n).expect("semaphore lock");
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("semaphore lock") += 1;
        self.0.released.notify_one();
    }
}

/// A shareable client for one backend role.
pub struct BackendClient {
    role: Role,
    transport: Box<dyn Transport>,
    cache: Option<ResponseCache>,
    limiter: Option<RateLimiter>,
    in_flight: Semaphore,
    retry: RetryPolicy,
    upstream_calls: AtomicU64,
    requests: AtomicU64,
}

impl std::fmt::Debug for BackendClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackendClient")
            .field("role", &self.role)
            .field("cache", &self.cache)
            .field("upstream_calls", &self.upstream_calls())
            .finish_non_exhaustive()
    }
}

impl BackendClient {
    pub fn new(role: Role, transport: impl Transport + 'static) -> Self {
        BackendClient {
            role,
            transport: Box::new(transport),
            cache: None,
            limiter: None,
            in_flight: Semaphore::new(usize::MAX),
            retry: RetryPolicy::default(),
            upstream_calls: AtomicU64::new(0),
            requests: AtomicU64::new(0),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_rate_limit(mut self, per_second: f64) -> Self {
        self.limiter = Some(RateLimiter::new(per_second));
        self
    }

    pub fn with_concurrency(mut self, bound: usize) -> Self {
        self.in_flight = Semaphore::new(bound);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    /// Requests that reached the transport (cache misses, including retries).
    pub fn upstream_calls(&self) -> u64 {
        self.upstream_calls.load(Ordering::SeqCst)
    }

    /// All calls to [`BackendClient::complete`].
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    /// Returns the cached completion or fetches, stores and returns a new one.
    pub fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        if request.prompt.trim().is_empty() && request.image.is_none() {
            return Err(BackendError::EmptyPrompt(request.role));
        }
        let key = CacheKey::of(request);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            log::debug!("{} cache hit {}", self.role, key.as_str());
            return Ok(hit);
        }
        let completion = self.fetch(request)?;
        if let Some(cache) = &self.cache {
            cache.put(&key, request, &completion)?;
        }
        Ok(completion)
    }

    /// Skips the cache lookup but stores the new completion.
    pub fn complete_fresh(&self, request: &BackendRequest) -> Result<String, BackendError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        if request.prompt.trim().is_empty() && request.image.is_none() {
            return Err(BackendError::EmptyPrompt(request.role));
        }
        let completion = self.fetch(request)?;
        if let Some(cache) = &self.cache {
            cache.put(&CacheKey::of(request), request, &completion)?;
        }
        Ok(completion)
    }

    fn fetch(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let _permit = self.in_flight.acquire();
        let attempts = self.retry.attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.retry.base_delay * 2u32.pow(attempt - 1);
                log::warn!("{} retry {attempt} after {delay:?}: {last}", self.role);
                std::thread::sleep(delay);
            }
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            self.upstream_calls.fetch_add(1, Ordering::SeqCst);
            match self.transport.send(request) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_transient() => last = e.to_string(),
                Err(e) => return Err(e),
            }
        }
        Err(BackendError::Unavailable { role: self.role, attempts, message: last })
    }
}
