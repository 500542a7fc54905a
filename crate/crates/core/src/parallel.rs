//! Shared worker pool sized by `CODIM2_THREADS`.

use std::sync::OnceLock;

use rayon::{ThreadPool, ThreadPoolBuilder};

/// Environment variable that fixes the number of worker threads.
pub const THREADS_ENV: &str = "CODIM2_THREADS";

pub fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse::<usize>().ok()).filter(|&t| t > 0);
        let mut b = ThreadPoolBuilder::new();
        if let Some(t) = threads {
            b = b.num_threads(t);
        }
        b.build().expect("worker pool")
    })
}

/// Runs `f` inside the shared pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    pool().install(f)
}
