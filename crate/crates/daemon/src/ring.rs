use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use crossbeam_queue::ArrayQueue;
use tokio::sync::Notify;

/// Bounded multi-producer queue that never blocks the producer.
///
/// When full, the oldest item is evicted and counted in [`dropped`].
/// Consumers may wait synchronously ([`pop_timeout`]) or asynchronously
/// ([`pop_async`]).
///
/// [`dropped`]: RingBuffer::dropped
/// [`pop_timeout`]: RingBuffer::pop_timeout
/// [`pop_async`]: RingBuffer::pop_async
#[derive(Debug)]
pub struct RingBuffer<T> {
    queue: ArrayQueue<T>,
    dropped: AtomicU64,
    pushed: AtomicU64,
    lock: Mutex<()>,
    ready: Condvar,
    notify: Notify,
}

impl<T> RingBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            queue: ArrayQueue::new(capacity.max(1)),
            dropped: AtomicU64::new(0),
            pushed: AtomicU64::new(0),
            lock: Mutex::new(()),
            ready: Condvar::new(),
            notify: Notify::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.queue.capacity()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Items evicted because the consumer fell behind.
    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    pub fn pushed(&self) -> u64 {
        self.pushed.load(Ordering::Relaxed)
    }

    /// Pushes `item`, evicting the oldest entry when full. Returns the
    /// evicted item, if any.
    pub fn push(&self, item: T) -> Option<T> {
        let evicted = self.queue.force_push(item);
        if evicted.is_some() {
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
        self.pushed.fetch_add(1, Ordering::Relaxed);
        {
            let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
            self.ready.notify_all();
        }
        self.notify.notify_one();
        evicted
    }

    /// Wakes waiting consumers without pushing, e.g. at end of stream.
    pub fn wake(&self) {
        {
            let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
            self.ready.notify_all();
        }
        self.notify.notify_waiters();
        self.notify.notify_one();
    }

    pub fn pop(&self) -> Option<T> {
        self.queue.pop()
    }

    pub fn pop_timeout(&self, timeout: Duration) -> Option<T> {
        if let Some(v) = self.queue.pop() {
            return Some(v);
        }
        let guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        // re-check under the lock so a push between pop and wait is not missed
        if let Some(v) = self.queue.pop() {
            return Some(v);
        }
        let _unused = self
            .ready
            .wait_timeout(guard, timeout)
            .unwrap_or_else(|e| e.into_inner());
        self.queue.pop()
    }

    /// Waits for the next item; `None` when woken by [`wake`](Self::wake)
    /// with nothing queued.
    pub async fn pop_async(&self) -> Option<T> {
        if let Some(v) = self.queue.pop() {
            return Some(v);
        }
        self.notify.notified().await;
        self.queue.pop()
    }
}
