use std::sync::{Condvar, Mutex};

/// Counting semaphore bounding in-flight requests to one endpoint.
#[derive(Debug)]
pub struct Limiter {
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    pub fn new(limit: usize) -> Self {
        assert!(limit >= 1, "limit must be at least 1");
        Self {
            limit,
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    /// Blocks until a slot is free.
    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("limiter lock poisoned");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("limiter lock poisoned");
        }
        *n += 1;
        Permit { limiter: self }
    }

    pub fn in_flight(&self) -> usize {
        *self.in_flight.lock().expect("limiter lock poisoned")
    }
}

/// Releases its slot on drop.
#[derive(Debug)]
pub struct Permit<'a> {
    limiter: &'a Limiter,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.limiter.in_flight.lock().expect("limiter lock poisoned");
        *n -= 1;
        self.limiter.freed.notify_one();
    }
}
