use crate::error::Error;

/// Observed series x_1..x_n. Construction guarantees n >= 2 and every value
/// finite, so downstream code never re-validates.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    /// Fewest observations that make a split point possible.
    pub const MIN_LEN: usize = 2;

    pub fn new(values: Vec<f64>) -> Result<Self, Error> {
        if values.len() < Self::MIN_LEN {
            return Err(Error::SeriesTooShort {
                got: values.len(),
                min: Self::MIN_LEN,
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self { values })
    }

    /// For internal producers whose output already satisfies the invariants.
    pub(crate) fn from_validated(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= Self::MIN_LEN);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept so `len` has its conventional companion.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}
