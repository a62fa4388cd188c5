use std::sync::Arc;

use async_trait::async_trait;
use tokio::sync::Semaphore;

use super::{BackendError, PerceptionBackend, RawObservation};
use crate::types::Frame;

/// Enforces a backend's declared max-in-flight; callers beyond the limit
/// wait in FIFO order.
pub struct Limited {
    inner: Arc<dyn PerceptionBackend>,
    permits: Option<Semaphore>,
}

impl Limited {
    pub fn new(inner: Arc<dyn PerceptionBackend>) -> Self {
        let permits = inner.max_in_flight().map(|n| Semaphore::new(n.max(1)));
        Limited { inner, permits }
    }
}

#[async_trait]
impl PerceptionBackend for Limited {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn max_in_flight(&self) -> Option<usize> {
        self.inner.max_in_flight()
    }

    async fn analyze(&self, frame: &Frame, questions: &[String]) -> Result<RawObservation, BackendError> {
        let _permit = match &self.permits {
            Some(s) => Some(s.acquire().await.expect("semaphore never closed")),
            None => None,
        };
        self.inner.analyze(frame, questions).await
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::time::Duration;
    use uuid::Uuid;

    struct Probe {
        live: AtomicUsize,
        peak: AtomicUsize,
    }

    #[async_trait]
    impl PerceptionBackend for Probe {
        fn name(&self) -> &str {
            "probe"
        }
        fn max_in_flight(&self) -> Option<usize> {
            Some(1)
        }
        async fn analyze(&self, frame: &Frame, _q: &[String]) -> Result<RawObservation, BackendError> {
            let now = self.live.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            tokio::time::sleep(Duration::from_millis(10)).await;
            self.live.fetch_sub(1, Ordering::SeqCst);
            Ok(RawObservation::empty(frame.seq, "probe"))
        }
    }

    #[tokio::test]
    async fn queues_beyond_capacity() {
        let probe = Arc::new(Probe {
            live: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        let limited = Arc::new(Limited::new(probe.clone()));
        let tasks: Vec<_> = (0..5)
            .map(|i| {
                let l = limited.clone();
                tokio::spawn(async move {
                    l.analyze(&Frame::new(Uuid::nil(), i, 0, vec![0xFF, 0xD8]), &[])
                        .await
                        .unwrap()
                })
            })
            .collect();
        for t in tasks {
            t.await.unwrap();
        }
        assert_eq!(probe.peak.load(Ordering::SeqCst), 1);
    }
}
