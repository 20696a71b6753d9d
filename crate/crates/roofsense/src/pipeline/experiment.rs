//! In-memory fusion evaluation shared by `fuse-eval` and the tests.

use roofsense_core::downstream::{
    fit_downstream_logged, Classifier, Family, SearchOutcome, SearchProtocol, SearchSpace,
};
use roofsense_core::fusion::{
    argmax, concat_features, concat_softmax, mean_softmax, FusionSource, IdRows, VectorLayout,
};
use roofsense_core::metrics::{confusion_matrix, macro_metrics, MetricsReport};
use roofsense_core::rng::derive_seed;
use roofsense_core::{BuildingSample, PixelGrid, Task};

use super::config::Strategy;
use super::guard::LeakageGuard;
use crate::models::{Modality, Model};
use crate::{Error, Result};

/// Models feeding a strategy; only the ones it needs must be present.
#[derive(Clone, Copy, Default)]
pub struct ModelPair<'a> {
    pub rgb: Option<&'a Model>,
    pub lidar: Option<&'a Model>,
}

impl<'a> ModelPair<'a> {
    fn get(&self, m: Modality) -> Result<&'a Model> {
        match m {
            Modality::Rgb => self.rgb,
            Modality::Lidar => self.lidar,
        }
        .ok_or_else(|| Error::Invalid(format!("no {} model", m.as_str())))
    }
}

fn patches(samples: &[BuildingSample], m: Modality) -> Vec<PixelGrid> {
    samples.iter().map(|s| m.patch(s).clone()).collect()
}

fn ids(samples: &[BuildingSample]) -> Vec<String> {
    samples.iter().map(|s| s.building_id.clone()).collect()
}

/// Labels for `task`; every sample must carry one.
pub fn labels(samples: &[BuildingSample], task: Task) -> Result<Vec<usize>> {
    samples
        .iter()
        .map(|s| s.label(task).ok_or_else(|| Error::Invalid(format!("{} has no {} label", s.building_id, task.as_str()))))
        .collect()
}

pub fn softmax_rows(model: &Model, samples: &[BuildingSample], m: Modality) -> Result<IdRows> {
    Ok(IdRows::new(ids(samples), model.predict_softmax(&patches(samples, m))?)?)
}

pub fn embedding_rows(model: &Model, samples: &[BuildingSample], m: Modality) -> Result<IdRows> {
    Ok(IdRows::new(ids(samples), model.extract_embeddings(&patches(samples, m))?)?)
}

/// The vectors `strategy` works on, with their block layout.
pub fn fused_rows(strategy: Strategy, models: ModelPair<'_>, samples: &[BuildingSample]) -> Result<(IdRows, VectorLayout)> {
    let block = |m: Modality, what: &str, w: usize| -> Result<(String, usize)> {
        Ok((format!("{}:{}:{what}", m.as_str(), models.get(m)?.spec.arch.as_str()), w))
    };
    let (rgb, lidar) = (Modality::Rgb, Modality::Lidar);
    Ok(match strategy {
        Strategy::RgbOnly | Strategy::LidarOnly => {
            let m = strategy.modalities()[0];
            let rows = softmax_rows(models.get(m)?, samples, m)?;
            let layout = VectorLayout { source: FusionSource::SoftmaxMean, blocks: vec![block(m, "softmax", rows.width())?] };
            (rows, layout)
        }
        Strategy::FeatureConcat => {
            let a = embedding_rows(models.get(rgb)?, samples, rgb)?;
            let b = embedding_rows(models.get(lidar)?, samples, lidar)?;
            let blocks = vec![block(rgb, "embedding", a.width())?, block(lidar, "embedding", b.width())?];
            (concat_features(&a, &b)?, VectorLayout { source: FusionSource::FeatureConcat, blocks })
        }
        Strategy::SoftmaxMean | Strategy::SoftmaxConcat => {
            let a = softmax_rows(models.get(rgb)?, samples, rgb)?;
            let b = softmax_rows(models.get(lidar)?, samples, lidar)?;
            if strategy == Strategy::SoftmaxMean {
                let blocks = vec![(format!("mean({}, {})", block(rgb, "softmax", 0)?.0, block(lidar, "softmax", 0)?.0), a.width())];
                (mean_softmax(&a, &b)?, VectorLayout { source: FusionSource::SoftmaxMean, blocks })
            } else {
                let blocks = vec![block(rgb, "softmax", a.width())?, block(lidar, "softmax", b.width())?];
                (concat_softmax(&a, &b)?, VectorLayout { source: FusionSource::SoftmaxConcat, blocks })
            }
        }
    })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub strategy: Strategy,
    /// Set for strategies with a downstream classifier.
    pub family: Option<Family>,
    pub task: Task,
    pub layout: VectorLayout,
    pub metrics: MetricsReport,
    pub test_ids: Vec<String>,
    pub predictions: Vec<usize>,
    pub search: Option<SearchOutcome>,
}

impl Evaluation {
    pub fn classifier(&self) -> Option<&Classifier> {
        self.search.as_ref().map(|s| &s.classifier)
    }
}

/// Fits `strategy` on `train` and scores it on the samples returned by
/// `load_test`, which is only called once fitting is done.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    strategy: Strategy,
    family: Family,
    task: Task,
    seed: u64,
    models: ModelPair<'_>,
    train: &[BuildingSample],
    load_test: impl FnOnce() -> Result<Vec<BuildingSample>>,
    guard: &mut LeakageGuard,
) -> Result<Evaluation> {
    for m in strategy.modalities() {
        let model = models.get(*m)?;
        if model.task != task {
            return Err(Error::Invalid(format!("{} model was trained for {}", m.as_str(), model.task.as_str())));
        }
    }
    let k = task.num_classes();
    let train_ids = ids(train);
    guard.load_train(&train_ids);
    let search = if strategy.uses_downstream() {
        let (rows, _) = fused_rows(strategy, models, train)?;
        let y = labels(train, task)?;
        let space = SearchSpace::paper(family);
        let protocol = SearchProtocol::for_family(family, derive_seed(seed, "search"));
        let outcome = fit_downstream_logged(&rows.values, &y, k, &space, &protocol, guard)?;
        guard.check()?;
        Some(outcome)
    } else {
        None
    };

    let test = load_test()?;
    if test.is_empty() {
        return Err(Error::Invalid("test split is empty".into()));
    }
    let test_ids = ids(&test);
    guard.open_test(&test_ids);
    let truth = labels(&test, task)?;
    let (rows, layout) = fused_rows(strategy, models, &test)?;
    let predictions = match &search {
        Some(s) => s.classifier.predict(&rows.values)?,
        None => rows.values.iter_rows().map(argmax).collect(),
    };
    guard.evaluate(predictions.len());
    let metrics = macro_metrics(&confusion_matrix(&truth, &predictions, k)?);
    Ok(Evaluation {
        strategy,
        family: strategy.uses_downstream().then_some(family),
        task,
        layout,
        metrics,
        test_ids,
        predictions,
        search,
    })
}
