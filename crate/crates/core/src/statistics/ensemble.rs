//! Monte-Carlo ensembles of scene realizations.
//!
//! Realizations are generated lazily inside the parallel map and results are
//! returned in realization order, so reductions that sum them sequentially
//! give the same bits for any number of worker threads.

use std::sync::Arc;

use rayon::prelude::*;

use super::StatsError;
use crate::channel::ChannelError;
use crate::rng::StreamSeed;
use crate::scene::{Scene, SceneError, SceneParams};

impl From<SceneError> for StatsError {
    fn from(e: SceneError) -> Self {
        StatsError::Simulation(e.to_string())
    }
}

impl From<ChannelError> for StatsError {
    fn from(e: ChannelError) -> Self {
        StatsError::Simulation(e.to_string())
    }
}

/// One realization: shared parameters plus its seed.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub params: Arc<SceneParams>,
    pub seed: StreamSeed,
}

impl RunSpec {
    pub fn scene(&self) -> Result<Scene, StatsError> {
        Ok(Scene::generate(self.params.clone(), self.seed)?)
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    runs: Vec<RunSpec>,
}

impl Ensemble {
    /// Realizations `0..size` of `params` under one master seed.
    pub fn new(params: Arc<SceneParams>, master_seed: u64, size: usize) -> Self {
        let runs = (0..size as u64)
            .map(|r| RunSpec {
                params: params.clone(),
                seed: StreamSeed::new(master_seed, r),
            })
            .collect();
        Self { runs }
    }

    /// Ensemble from explicit runs, which must share one parameter set.
    pub fn from_runs(runs: Vec<RunSpec>) -> Result<Self, StatsError> {
        let first = runs.first().ok_or(StatsError::EmptyEnsemble)?;
        if runs
            .iter()
            .any(|r| !Arc::ptr_eq(&r.params, &first.params) && *r.params != *first.params)
        {
            return Err(StatsError::ConfigMismatch);
        }
        Ok(Self { runs })
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn runs(&self) -> &[RunSpec] {
        &self.runs
    }

    pub fn params(&self) -> &Arc<SceneParams> {
        &self.runs[0].params
    }

    /// Apply `f` to every realization in parallel; results are in
    /// realization order.
    pub fn map<T, F>(&self, f: F) -> Result<Vec<T>, StatsError>
    where
        T: Send,
        F: Fn(&Scene) -> Result<T, StatsError> + Sync + Send,
    {
        if self.runs.is_empty() {
            return Err(StatsError::EmptyEnsemble);
        }
        self.runs
            .par_iter()
            .map(|run| f(&run.scene()?))
            .collect()
    }
}
