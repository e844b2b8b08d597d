//! Black-box classifier abstraction with atomic query counting, a built-in
//! desk-scale softmax model, and a bridge to external oracle processes.

mod oracle;
mod toy;

pub use oracle::OracleClassifier;
pub use toy::{train, ToyModel, TrainConfig, HIDDEN_WIDTH, INPUT_SIZE};

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Per-class confidences; entries lie in [0, 1] and sum to 1 within 1e-6.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector(Vec<f64>);

impl ConfidenceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfidences("empty vector".into()));
        }
        if values.iter().any(|&v| !(0.0..=1.0).contains(&v) || v.is_nan()) {
            return Err(Error::InvalidConfidences(format!(
                "entry outside [0,1] in {values:?}"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidConfidences(format!("sum {sum} != 1")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, class: usize) -> f64 {
        self.0[class]
    }

    /// Index of the highest confidence; first index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// Monotone query counter shared by concurrent callers.
#[derive(Debug, Default)]
pub struct QueryCounter(AtomicU64);

impl QueryCounter {
    pub fn new() -> Self {
        Self(AtomicU64::new(0))
    }

    pub fn increment(&self) -> u64 {
        self.0.fetch_add(1, Ordering::Relaxed) + 1
    }

    pub fn count(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// A black-box query target: images in, confidence vectors out, one counter
/// tick per query. Implementations must tolerate concurrent `predict` calls.
pub trait Classifier: Sync {
    fn classes(&self) -> usize;

    /// Classify an image, incrementing the query counter by exactly one.
    fn predict(&self, image: &RasterImage) -> Result<ConfidenceVector>;

    /// Total queries served so far.
    fn queries(&self) -> u64;
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn classes(&self) -> usize {
        (**self).classes()
    }
    fn predict(&self, image: &RasterImage) -> Result<ConfidenceVector> {
        (**self).predict(image)
    }
    fn queries(&self) -> u64 {
        (**self).queries()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confidence_vector_validation() {
        assert!(ConfidenceVector::new(vec![0.5, 0.5]).is_ok());
        assert!(ConfidenceVector::new(vec![0.6, 0.6]).is_err());
        assert!(ConfidenceVector::new(vec![-0.1, 1.1]).is_err());
        assert!(ConfidenceVector::new(vec![]).is_err());
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        let v = ConfidenceVector::new(vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        assert_eq!(v.argmax(), 0);
    }

    #[test]
    fn counter_is_exact_under_contention() {
        let counter = std::sync::Arc::new(QueryCounter::new());
        let mut handles = Vec::new();
        for _ in 0..8 {
            let c = counter.clone();
            handles.push(std::thread::spawn(move || {
                for _ in 0..125 {
                    c.increment();
                }
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(counter.count(), 1000);
    }
}
