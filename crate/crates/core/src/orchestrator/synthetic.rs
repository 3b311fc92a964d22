//! Latent-factor generator for multi-party tabular data with a known
//! label rule.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMatrix, LabelVector, PartyState, SampleId};
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, seeded_rng, Matrix, Rng};

/// Elementwise map applied to the task party's noiseless features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Linear,
    Tanh,
    Sin,
    Cube,
}

impl Link {
    fn apply(self, v: f64) -> f64 {
        match self {
            Link::Linear => v,
            Link::Tanh => (2.0 * v).tanh(),
            Link::Sin => (2.0 * v).sin(),
            Link::Cube => v * v * v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    /// Samples held by the task party and every data party.
    pub n_overlap: usize,
    /// Samples held only by the task party.
    pub n_local: usize,
    /// Samples held only by the data parties.
    pub n_data_only: usize,
    pub task_features: usize,
    pub data_features: usize,
    pub num_data_parties: usize,
    /// Dimension of the shared latent factor `z`.
    pub latent_dim: usize,
    /// The task party's features load only on the first `k` coordinates of `z`.
    pub task_latent: Option<usize>,
    /// Extra latent factors seen only by the task party and unrelated to the label.
    pub nuisance_dim: usize,
    pub task_link: Link,
    /// Standard deviation of the task party's feature noise.
    pub noise: f64,
    /// Standard deviation of the data parties' feature noise (defaults to `noise`).
    pub data_noise: Option<f64>,
    /// Every data party gets the same loading matrix and noise draw.
    pub redundant_data: bool,
    pub num_classes: usize,
    /// Label functional `z·beta`; drawn at random when absent.
    pub label_weights: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_overlap: 1000,
            n_local: 3000,
            n_data_only: 200,
            task_features: 20,
            data_features: 20,
            num_data_parties: 1,
            latent_dim: 4,
            task_latent: None,
            nuisance_dim: 0,
            task_link: Link::Linear,
            noise: 0.5,
            data_noise: None,
            redundant_data: false,
            num_classes: 2,
            label_weights: None,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("dataset.synthetic.{m}")));
        if self.n_overlap == 0 {
            return bad("n_overlap must be positive");
        }
        if self.n_local < 2 {
            return bad("n_local must be at least 2");
        }
        if self.task_features == 0 || self.data_features == 0 || self.num_data_parties == 0 || self.latent_dim == 0 {
            return bad("feature counts, num_data_parties and latent_dim must be positive");
        }
        if self.task_latent.is_some_and(|k| k == 0 || k > self.latent_dim) {
            return bad("task_latent must lie in 1..=latent_dim");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite())
            || self.data_noise.is_some_and(|s| !(s >= 0.0 && s.is_finite()))
        {
            return bad("noise levels must be finite and non-negative");
        }
        if self.num_classes < 2 {
            return bad("num_classes must be at least 2");
        }
        if let Some(w) = &self.label_weights {
            if w.len() != self.latent_dim || w.iter().all(|&x| x == 0.0) {
                return bad("label_weights must have latent_dim entries, not all zero");
            }
        }
        Ok(())
    }

    pub fn n_total(&self) -> usize {
        self.n_overlap + self.n_local + self.n_data_only
    }
}

fn gaussian(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Labels from the empirical quantiles of `score`, so classes are balanced.
fn quantile_labels(score: &[f64], num_classes: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
    let mut labels = vec![0; score.len()];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * num_classes / score.len();
    }
    labels
}

/// Draw a task party `"task"` and data parties `"data1"`, `"data2"`, ...
///
/// Every sample has a latent `z ~ N(0, I)`. The task party observes
/// `[z_task | u] W_t + noise`, where `z_task` is the first `task_latent`
/// coordinates and `u` the nuisance factors; data party `k` observes
/// `z W_k + noise`. The label thresholds `z·beta`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n_total();
    let latent_rng = &mut seeded_rng(derive_seed(spec.seed, 1));
    let z = gaussian(latent_rng, n, spec.latent_dim, 1.0);
    let u = gaussian(latent_rng, n, spec.nuisance_dim, 1.0);

    let beta = match &spec.label_weights {
        Some(w) => w.clone(),
        None => {
            let mut rng = seeded_rng(derive_seed(spec.seed, 2));
            (0..spec.latent_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
        }
    };
    let score = z.matvec(&beta)?;
    let labels = quantile_labels(&score, spec.num_classes);

    // id assignment and role membership: [overlap | local | data-only]
    let mut rng = seeded_rng(derive_seed(spec.seed, 3));
    let width = n.to_string().len();
    let mut numbers: Vec<usize> = (0..n).collect();
    numbers.shuffle(&mut rng);
    let ids: Vec<SampleId> = numbers.iter().map(|k| SampleId(format!("s{k:0width$}"))).collect();
    let by_id = |rows: std::ops::Range<usize>| {
        let mut r: Vec<usize> = rows.collect();
        r.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
        r
    };
    let task_rows = by_id(0..spec.n_overlap + spec.n_local);
    let mut data_rows = by_id(0..spec.n_overlap);
    data_rows.extend(spec.n_overlap + spec.n_local..n);
    data_rows.sort_by(|&a, &b| ids[a].cmp(&ids[b]));

    let k_task = spec.task_latent.unwrap_or(spec.latent_dim);
    let task_latent = Matrix::hstack(&[&z.col_range(0, k_task), &u])?;
    let mut rng = seeded_rng(derive_seed(spec.seed, 4));
    let w_t = gaussian(&mut rng, task_latent.cols(), spec.task_features, 1.0 / (task_latent.cols() as f64).sqrt());
    let x_t = task_latent.matmul(&w_t)?.map(|v| spec.task_link.apply(v)).add(&gaussian(
        &mut rng,
        n,
        spec.task_features,
        spec.noise,
    ))?;
    let task_ids: Vec<SampleId> = task_rows.iter().map(|&i| ids[i].clone()).collect();
    let t_cols: Vec<String> = (0..spec.task_features).map(|j| format!("t{j}")).collect();
    let task_features = FeatureMatrix::new(task_ids.clone(), t_cols, x_t.select_rows(&task_rows))?;
    let y = LabelVector::new(task_ids, task_rows.iter().map(|&i| labels[i]).collect(), spec.num_classes)?;
    let task = PartyState::task("task", task_features, y)?;

    let data_noise = spec.data_noise.unwrap_or(spec.noise);
    let data_ids: Vec<SampleId> = data_rows.iter().map(|&i| ids[i].clone()).collect();
    let mut data = Vec::with_capacity(spec.num_data_parties);
    for k in 0..spec.num_data_parties {
        let stream = if spec.redundant_data { 0 } else { k as u64 };
        let mut rng = seeded_rng(derive_seed(spec.seed, 100 + stream));
        let w_d = gaussian(&mut rng, spec.latent_dim, spec.data_features, 1.0 / (spec.latent_dim as f64).sqrt());
        let x_d = z.matmul(&w_d)?.add(&gaussian(&mut rng, n, spec.data_features, data_noise))?;
        let cols: Vec<String> = (0..spec.data_features).map(|j| format!("d{}_{j}", k + 1)).collect();
        let fm = FeatureMatrix::new(data_ids.clone(), cols, x_d.select_rows(&data_rows))?;
        data.push(PartyState::data(format!("data{}", k + 1), fm));
    }
    Dataset::new(task, data)
}
