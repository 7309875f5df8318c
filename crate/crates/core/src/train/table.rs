use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class mean vision-only loss from the latest vision-only epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClasswiseLossTable {
    sums: Vec<f64>,
    counts: Vec<usize>,
}

impl ClasswiseLossTable {
    pub fn new(num_classes: usize) -> Self {
        ClasswiseLossTable {
            sums: vec![0.0; num_classes],
            counts: vec![0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.sums.len()
    }

    /// Adds one sample loss to every class present in the sample, once per class.
    pub fn record(&mut self, classes: &[usize], loss: f64) {
        for &c in classes {
            self.sums[c] += loss;
            self.counts[c] += 1;
        }
    }

    pub fn count(&self, class: usize) -> usize {
        self.counts[class]
    }

    pub fn mean(&self, class: usize) -> Result<f64> {
        match self.counts.get(class) {
            Some(&n) if n > 0 => Ok(self.sums[class] / n as f64),
            _ => Err(Error::Schedule(format!(
                "class {class} has no vision-only loss in the table"
            ))),
        }
    }

    pub fn means(&self) -> Vec<Option<f64>> {
        (0..self.num_classes()).map(|c| self.mean(c).ok()).collect()
    }

    /// Shifts the stored mean of `class` by `delta`.
    pub fn perturb(&mut self, class: usize, delta: f64) {
        self.sums[class] += delta * self.counts[class] as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn means_count_each_sample_once_per_class() {
        let mut t = ClasswiseLossTable::new(3);
        t.record(&[0, 2], 1.0);
        t.record(&[0], 3.0);
        assert_eq!(t.count(0), 2);
        assert_eq!(t.mean(0).unwrap(), 2.0);
        assert_eq!(t.mean(2).unwrap(), 1.0);
        assert!(t.mean(1).is_err());
        assert!(t.mean(7).is_err());
        assert_eq!(t.means(), vec![Some(2.0), None, Some(1.0)]);
        t.perturb(0, 0.5);
        assert_eq!(t.mean(0).unwrap(), 2.5);
    }
}
