use serde::{Deserialize, Serialize};

use super::{init_weights, train_on, Dataset, DlError, Model, TrainingParams};
use crate::chain::Digest;

/// One stretch of SGD at a fixed learning rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSegment {
    pub learning_rate: f64,
    pub epochs: u32,
}

/// Everything needed to rebuild a model from the training set alone: the
/// architecture and init seed, how many leading training records are used,
/// and every SGD segment applied since initialisation. Successive blocks
/// extend their parent's lineage by one segment; `start_model` names the
/// model the last segment started from so a verifier holding that model can
/// replay just the last segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingLineage {
    pub layer_sizes: Vec<usize>,
    pub init_seed: u64,
    pub train_records: usize,
    pub segments: Vec<TrainingSegment>,
    pub start_model: Option<Digest>,
}

impl TrainingLineage {
    pub fn fresh(layer_sizes: Vec<usize>, init_seed: u64, train_records: usize) -> Self {
        TrainingLineage { layer_sizes, init_seed, train_records, segments: Vec::new(), start_model: None }
    }

    /// This lineage followed by `segment`, recording `start` as the model the
    /// new segment begins from.
    pub fn extended(&self, segment: TrainingSegment, start: Option<Digest>) -> Self {
        let mut next = self.clone();
        next.segments.push(segment);
        next.start_model = start;
        next
    }

    /// The lineage without its last segment, i.e. the parent model's.
    pub fn parent(&self) -> Option<TrainingLineage> {
        let (_, rest) = self.segments.split_last()?;
        Some(TrainingLineage {
            layer_sizes: self.layer_sizes.clone(),
            init_seed: self.init_seed,
            train_records: self.train_records,
            segments: rest.to_vec(),
            start_model: None,
        })
    }

    pub fn total_epochs(&self) -> u64 {
        self.segments.iter().map(|s| s.epochs as u64).sum()
    }

    pub fn last_segment(&self) -> Option<&TrainingSegment> {
        self.segments.last()
    }

    fn init_params(&self) -> TrainingParams {
        TrainingParams::new(self.layer_sizes.clone(), 1.0, 0, self.init_seed)
    }

    fn fit_records<'a>(&self, train_set: &'a Dataset) -> Result<&'a [crate::dl::Record], DlError> {
        if self.train_records == 0 || self.train_records > train_set.len() {
            return Err(DlError::BadDataset(format!(
                "lineage uses {} training records, set has {}",
                self.train_records,
                train_set.len()
            )));
        }
        if train_set.input_dim() != self.layer_sizes[0] || train_set.num_classes() != *self.layer_sizes.last().unwrap() {
            return Err(DlError::BadArchitecture("lineage does not fit the training set".into()));
        }
        Ok(&train_set.records()[..self.train_records])
    }

    fn check_segment(s: &TrainingSegment) -> Result<(), DlError> {
        if !(s.learning_rate.is_finite() && s.learning_rate > 0.0) {
            return Err(DlError::BadArchitecture(format!("segment learning rate {}", s.learning_rate)));
        }
        Ok(())
    }

    /// Rebuilds the model from initialisation through every segment.
    pub fn replay(&self, train_set: &Dataset) -> Result<Model, DlError> {
        let records = self.fit_records(train_set)?;
        let mut model = init_weights(&self.init_params())?;
        for s in &self.segments {
            Self::check_segment(s)?;
            train_on(&mut model, records, s.learning_rate, s.epochs)?;
        }
        Ok(model)
    }

    /// Applies only the last segment to `start`, which must be the parent
    /// model. With no segments this returns `start` unchanged.
    pub fn replay_last_from(&self, start: &Model, train_set: &Dataset) -> Result<Model, DlError> {
        let records = self.fit_records(train_set)?;
        if start.layer_sizes != self.layer_sizes {
            return Err(DlError::BadArchitecture("start model does not match lineage".into()));
        }
        let mut model = start.clone();
        if let Some(s) = self.segments.last() {
            Self::check_segment(s)?;
            train_on(&mut model, records, s.learning_rate, s.epochs)?;
        }
        Ok(model)
    }
}
