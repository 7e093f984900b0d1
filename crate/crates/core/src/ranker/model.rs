//! User tower (sparse bag embeddings, dense latent, MLP) and podcast output matrix.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::loss::{self, dot};
use super::{Architecture, Objective, RankerConfig};
use crate::data::Dataset;
use crate::features::{FeatureSelection, SparseGroup, UserFeatures};
use crate::{Error, Result, Rng};

/// Sizes the model needs from the data: sparse vocabularies, latent width, catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    /// Enabled sparse groups with their vocabulary sizes.
    pub groups: Vec<(SparseGroup, usize)>,
    /// 0 when latent features are off.
    pub latent_dim: usize,
    pub n_podcasts: usize,
}

impl ModelShape {
    pub fn for_dataset(dataset: &Dataset, selection: &FeatureSelection, latent_dim: usize) -> Self {
        ModelShape {
            groups: SparseGroup::ALL
                .iter()
                .filter(|g| g.enabled(selection))
                .map(|&g| (g, g.cardinality(dataset)))
                .collect(),
            latent_dim: if selection.use_latent { latent_dim } else { 0 },
            n_podcasts: dataset.n_podcasts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// All parameters in one flat buffer, addressed by named row-major tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub data: Vec<f64>,
    pub specs: Vec<TensorSpec>,
}

impl ParamStore {
    fn with_specs(shapes: &[(String, usize, usize)]) -> Self {
        let mut specs = Vec::with_capacity(shapes.len());
        let mut offset = 0;
        for (name, rows, cols) in shapes {
            specs.push(TensorSpec {
                name: name.clone(),
                offset,
                rows: *rows,
                cols: *cols,
            });
            offset += rows * cols;
        }
        ParamStore {
            data: vec![0.0; offset],
            specs,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn spec(&self, name: &str) -> Option<&TensorSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.spec(name).map(|s| &self.data[s.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let r = self.spec(name)?.range();
        Some(&mut self.data[r])
    }
}

/// Tensor indices into `ParamStore::specs`.
#[derive(Debug, Clone, PartialEq)]
struct Layout {
    /// Per sparse group: (tensor, embedding width).
    embeds: Vec<(usize, usize)>,
    /// Hidden layers then the output projection: (weight, bias).
    layers: Vec<(usize, usize)>,
    podcasts: usize,
    input_dim: usize,
}

fn tensor_shapes(config: &RankerConfig, shape: &ModelShape) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut input_dim = shape.latent_dim;
    for &(g, card) in &shape.groups {
        let dim = if g.is_demographic() {
            config.demographic_embed_dim
        } else {
            config.metadata_embed_dim
        };
        out.push((format!("embed.{}", g.as_str()), card, dim));
        input_dim += dim;
    }
    let hidden = match config.architecture {
        Architecture::Mlp => config.hidden_layers,
        Architecture::LogisticRegression => 0,
    };
    let mut width = input_dim;
    for l in 0..hidden {
        out.push((format!("hidden.{l}.weight"), config.hidden_dim, width));
        out.push((format!("hidden.{l}.bias"), config.hidden_dim, 1));
        width = config.hidden_dim;
    }
    out.push(("output.weight".into(), config.user_embed_dim, width));
    out.push(("output.bias".into(), config.user_embed_dim, 1));
    out.push(("podcasts".into(), shape.n_podcasts, config.user_embed_dim));
    out
}

fn layout(config: &RankerConfig, shape: &ModelShape, store: &ParamStore) -> Layout {
    let n_groups = shape.groups.len();
    let embeds = (0..n_groups).map(|i| (i, store.specs[i].cols)).collect();
    let n_layers = (store.specs.len() - n_groups - 1) / 2;
    let layers = (0..n_layers).map(|l| (n_groups + 2 * l, n_groups + 2 * l + 1)).collect();
    let input_dim = shape.latent_dim + store.specs[..n_groups].iter().map(|s| s.cols).sum::<usize>();
    debug_assert_eq!(n_layers, if config.architecture == Architecture::Mlp { config.hidden_layers + 1 } else { 1 });
    Layout {
        embeds,
        layers,
        podcasts: store.specs.len() - 1,
        input_dim,
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    entries: Vec<Vec<u32>>,
    /// Input of each layer (index 0 is the concatenated features).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Vec<f64>>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankerModel {
    pub config: RankerConfig,
    pub shape: ModelShape,
    pub params: ParamStore,
    layout: Layout,
}

impl RankerModel {
    /// All parameters zero.
    pub fn zeros(config: &RankerConfig, shape: &ModelShape) -> Result<Self> {
        config.validate()?;
        if shape.n_podcasts == 0 {
            return Err(Error::config("ranker needs at least one podcast"));
        }
        let params = ParamStore::with_specs(&tensor_shapes(config, shape));
        let layout = layout(config, shape, &params);
        if layout.input_dim == 0 {
            return Err(Error::config("model input is empty: enable at least one feature group"));
        }
        Ok(RankerModel {
            config: config.clone(),
            shape: shape.clone(),
            params,
            layout,
        })
    }

    /// Xavier-uniform weight matrices and podcast rows, U(-1, 1) embeddings,
    /// zero biases. Smaller embeddings leave bag means of ten entries too
    /// faint next to dense inputs and training stalls.
    pub fn initialize(config: &RankerConfig, shape: &ModelShape, rng: &mut Rng) -> Result<Self> {
        let mut model = RankerModel::zeros(config, shape)?;
        for spec in &model.params.specs {
            let r = spec.range();
            let bound = if spec.name.ends_with(".bias") {
                continue;
            } else if spec.name.starts_with("embed.") {
                1.0
            } else {
                (6.0 / (spec.rows + spec.cols) as f64).sqrt()
            };
            for x in &mut model.params.data[r] {
                *x = rng.random_range(-bound..bound);
            }
        }
        Ok(model)
    }

    /// Rebuilds a model around existing parameter values (checkpoint loading).
    pub fn from_parts(config: &RankerConfig, shape: &ModelShape, specs: &[TensorSpec], data: Vec<f64>) -> Result<Self> {
        let mut model = RankerModel::zeros(config, shape)?;
        if model.params.specs != specs || model.params.data.len() != data.len() {
            return Err(Error::Dimension("parameter tensors do not match the model configuration".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        model.params.data = data;
        Ok(model)
    }

    pub fn n_podcasts(&self) -> usize {
        self.shape.n_podcasts
    }

    pub fn input_dim(&self) -> usize {
        self.layout.input_dim
    }

    pub fn podcast_row(&self, p: usize) -> &[f64] {
        let spec = &self.params.specs[self.layout.podcasts];
        let start = spec.offset + p * spec.cols;
        &self.params.data[start..start + spec.cols]
    }

    fn spec(&self, i: usize) -> &TensorSpec {
        &self.params.specs[i]
    }

    /// Concatenated bag-mean embeddings followed by the latent vector.
    fn input(&self, f: &UserFeatures) -> Result<(Vec<f64>, Vec<Vec<u32>>)> {
        let mut x = Vec::with_capacity(self.layout.input_dim);
        let mut all_entries = Vec::with_capacity(self.shape.groups.len());
        for (&(group, card), &(t, dim)) in self.shape.groups.iter().zip(&self.layout.embeds) {
            let entries = f.sparse.entries(group);
            if let Some(bad) = entries.iter().find(|&&e| e as usize >= card) {
                return Err(Error::Dimension(format!("{} id {bad} outside vocabulary of {card}", group.as_str())));
            }
            let start = x.len();
            x.resize(start + dim, 0.0);
            if !entries.is_empty() {
                let spec = self.spec(t);
                let w = 1.0 / entries.len() as f64;
                for &e in &entries {
                    let row = &self.params.data[spec.offset + e as usize * dim..][..dim];
                    for (xi, r) in x[start..].iter_mut().zip(row) {
                        *xi += w * r;
                    }
                }
            }
            all_entries.push(entries);
        }
        if self.shape.latent_dim > 0 {
            let v = f
                .dense
                .latent
                .as_ref()
                .ok_or_else(|| Error::Dimension("model expects a latent vector".into()))?;
            if v.v.len() != self.shape.latent_dim {
                return Err(Error::Dimension(format!(
                    "latent vector has {} entries, model expects {}",
                    v.v.len(),
                    self.shape.latent_dim
                )));
            }
            x.extend(v.v.iter().map(|&a| f64::from(a)));
        }
        Ok((x, all_entries))
    }

    pub fn forward_cached(&self, f: &UserFeatures) -> Result<ForwardCache> {
        let (x, entries) = self.input(f)?;
        let n_layers = self.layout.layers.len();
        let mut inputs = vec![x];
        let mut pre = Vec::with_capacity(n_layers - 1);
        let mut u = Vec::new();
        for (l, &(wi, bi)) in self.layout.layers.iter().enumerate() {
            let w = self.spec(wi);
            let b = &self.params.data[self.spec(bi).range()];
            let h = inputs.last().expect("layer input");
            let mut z: Vec<f64> = (0..w.rows)
                .map(|r| b[r] + dot(&self.params.data[w.offset + r * w.cols..][..w.cols], h))
                .collect();
            if l + 1 < n_layers {
                pre.push(z.clone());
                z.iter_mut().for_each(|v| *v = v.max(0.0));
                inputs.push(z);
            } else {
                u = z;
            }
        }
        Ok(ForwardCache { entries, inputs, pre, u })
    }

    /// The user vector `u`.
    pub fn forward(&self, f: &UserFeatures) -> Result<Vec<f64>> {
        self.forward_cached(f).map(|c| c.u)
    }

    /// `u · d_i` for every podcast.
    pub fn scores(&self, f: &UserFeatures) -> Result<Vec<f64>> {
        let u = self.forward(f)?;
        Ok((0..self.n_podcasts()).map(|p| dot(&u, self.podcast_row(p))).collect())
    }

    /// Accumulates the gradient of the user tower given `du` into `grad`.
    pub fn backward(&self, cache: &ForwardCache, du: &[f64], grad: &mut [f64]) {
        let mut delta = du.to_vec();
        for (l, &(wi, bi)) in self.layout.layers.iter().enumerate().rev() {
            let w = self.spec(wi);
            let b = self.spec(bi);
            let h = &cache.inputs[l];
            for r in 0..w.rows {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                grad[b.offset + r] += d;
                let row = &mut grad[w.offset + r * w.cols..][..w.cols];
                for (g, x) in row.iter_mut().zip(h) {
                    *g += d * x;
                }
            }
            let mut below = vec![0.0; w.cols];
            for r in 0..w.rows {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                let row = &self.params.data[w.offset + r * w.cols..][..w.cols];
                for (a, x) in below.iter_mut().zip(row) {
                    *a += d * x;
                }
            }
            if l > 0 {
                for (a, z) in below.iter_mut().zip(&cache.pre[l - 1]) {
                    if *z <= 0.0 {
                        *a = 0.0;
                    }
                }
            }
            delta = below;
        }
        // delta is now d loss / d input; scatter group slices into embedding rows.
        let mut start = 0;
        for (entries, &(t, dim)) in cache.entries.iter().zip(&self.layout.embeds) {
            if !entries.is_empty() {
                let spec = self.spec(t);
                let w = 1.0 / entries.len() as f64;
                for &e in entries {
                    let row = &mut grad[spec.offset + e as usize * dim..][..dim];
                    for (g, d) in row.iter_mut().zip(&delta[start..start + dim]) {
                        *g += w * d;
                    }
                }
            }
            start += dim;
        }
    }

    /// Loss of one training instance; adds its gradient to `grad`.
    pub fn loss_and_grad(
        &self,
        f: &UserFeatures,
        positive: usize,
        negatives: &[usize],
        objective: Objective,
        grad: &mut [f64],
    ) -> Result<f64> {
        let n = self.n_podcasts();
        if positive >= n || negatives.iter().any(|&j| j >= n || j == positive) {
            return Err(Error::Dimension("negatives must be catalog ids distinct from the positive".into()));
        }
        let cache = self.forward_cached(f)?;
        let (result, rows): (loss::LossGrad, Vec<usize>) = match objective {
            Objective::Sampled => {
                let negs: Vec<&[f64]> = negatives.iter().map(|&j| self.podcast_row(j)).collect();
                let r = loss::sampled_loss(&cache.u, self.podcast_row(positive), &negs)?;
                (r, std::iter::once(positive).chain(negatives.iter().copied()).collect())
            }
            Objective::FullSoftmax => {
                let all: Vec<&[f64]> = (0..n).map(|j| self.podcast_row(j)).collect();
                (loss::softmax_loss(&cache.u, &all, positive)?, (0..n).collect())
            }
        };
        let d = self.spec(self.layout.podcasts);
        for (&p, g) in rows.iter().zip(&result.d_rows) {
            let row = &mut grad[d.offset + p * d.cols..][..d.cols];
            for (a, b) in row.iter_mut().zip(g) {
                *a += b;
            }
        }
        self.backward(&cache, &result.du, grad);
        Ok(result.loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AgeBucket, CountryId, Gender, UserId};
    use crate::embedding::UserLatentVector;
    use crate::features::{DenseFeatureBundle, SparseFeatureBundle};
    use crate::seeded_rng;

    fn latent_features(v: &[f32]) -> UserFeatures {
        UserFeatures {
            user: UserId(0),
            sparse: SparseFeatureBundle::default(),
            dense: DenseFeatureBundle {
                latent: Some(UserLatentVector { user: UserId(0), v: v.to_vec() }),
            },
        }
    }

    fn latent_only() -> FeatureSelection {
        FeatureSelection {
            use_demographics: false,
            use_metadata: false,
            use_latent: true,
        }
    }

    #[test]
    fn zero_parameters_give_zero_user_vector() {
        let config = RankerConfig {
            selection: latent_only(),
            hidden_dim: 4,
            user_embed_dim: 3,
            ..RankerConfig::desk()
        };
        let shape = ModelShape { groups: vec![], latent_dim: 2, n_podcasts: 2 };
        let m = RankerModel::zeros(&config, &shape).unwrap();
        assert_eq!(m.forward(&latent_features(&[1.0, -2.0])).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn logistic_regression_on_one_hot_selects_a_row() {
        let config = RankerConfig {
            selection: FeatureSelection::new(true, false, false).unwrap(),
            demographic_embed_dim: 2,
            user_embed_dim: 2,
            ..RankerConfig::desk()
        }
        .logistic();
        let shape = ModelShape {
            groups: vec![(SparseGroup::Country, 3)],
            latent_dim: 0,
            n_podcasts: 2,
        };
        let mut m = RankerModel::zeros(&config, &shape).unwrap();
        m.params.tensor_mut("embed.country").unwrap().copy_from_slice(&[1.0, 0.0, 0.0, 1.0, 0.5, 0.5]);
        m.params.tensor_mut("output.weight").unwrap().copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let f = UserFeatures {
            user: UserId(0),
            sparse: SparseFeatureBundle {
                country: Some(CountryId(1)),
                ..Default::default()
            },
            dense: DenseFeatureBundle::default(),
        };
        assert_eq!(m.forward(&f).unwrap(), vec![0.0, 1.0]);
        let f = UserFeatures {
            sparse: SparseFeatureBundle {
                country: Some(CountryId(7)),
                ..Default::default()
            },
            ..f
        };
        assert!(matches!(m.forward(&f), Err(Error::Dimension(_))));
    }

    #[test]
    fn hand_computed_two_unit_network() {
        let config = RankerConfig {
            selection: latent_only(),
            hidden_layers: 1,
            hidden_dim: 2,
            user_embed_dim: 1,
            ..RankerConfig::desk()
        };
        let shape = ModelShape { groups: vec![], latent_dim: 3, n_podcasts: 1 };
        let mut m = RankerModel::zeros(&config, &shape).unwrap();
        m.params.tensor_mut("hidden.0.weight").unwrap().copy_from_slice(&[0.1, -0.2, 0.3, -0.4, 0.5, -0.6]);
        m.params.tensor_mut("hidden.0.bias").unwrap().copy_from_slice(&[0.05, -0.05]);
        m.params.tensor_mut("output.weight").unwrap().copy_from_slice(&[0.7, -0.8]);
        m.params.tensor_mut("output.bias").unwrap().copy_from_slice(&[0.01]);
        // x = (1, 2, 3): z0 = 0.1 - 0.4 + 0.9 + 0.05 = 0.65, z1 = -0.4 + 1.0 - 1.8 - 0.05 = -1.25
        // u = 0.7 * 0.65 - 0.8 * 0 + 0.01 = 0.465
        let u = m.forward(&latent_features(&[1.0, 2.0, 3.0])).unwrap();
        assert!((u[0] - 0.465).abs() < 1e-6, "{u:?}");
    }

    fn random_features(shape: &ModelShape, rng: &mut Rng) -> UserFeatures {
        let mut sparse = SparseFeatureBundle::default();
        for &(g, card) in &shape.groups {
            match g {
                SparseGroup::Country => sparse.country = Some(CountryId(rng.random_range(0..card as u32))),
                SparseGroup::Gender => sparse.gender = Some(Gender::ALL[rng.random_range(0..card)]),
                SparseGroup::AgeBucket => sparse.age_bucket = Some(AgeBucket::ALL[rng.random_range(0..card)]),
                SparseGroup::Artists => {
                    sparse.top_artists = (0..rng.random_range(0..3)).map(|_| crate::domain::ArtistId(rng.random_range(0..card as u32))).collect()
                }
                _ => {
                    let ids = (0..rng.random_range(1..3)).map(|_| crate::domain::GenreId(rng.random_range(0..card as u32))).collect();
                    match g {
                        SparseGroup::MetaGenres => sparse.top_meta_genres = ids,
                        SparseGroup::Genres => sparse.top_genres = ids,
                        _ => sparse.top_micro_genres = ids,
                    }
                }
            }
        }
        let latent = (shape.latent_dim > 0).then(|| UserLatentVector {
            user: UserId(0),
            v: (0..shape.latent_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        });
        UserFeatures {
            user: UserId(0),
            sparse,
            dense: DenseFeatureBundle { latent },
        }
    }

    /// Worst gradient error over every parameter in units of the tolerance.
    fn gradient_error(config: &RankerConfig, objective: Objective, seed: u64) -> f64 {
        let mut rng = seeded_rng(seed);
        let shape = ModelShape {
            groups: vec![(SparseGroup::Country, 3), (SparseGroup::Gender, 4), (SparseGroup::Artists, 5), (SparseGroup::Genres, 4)],
            latent_dim: 3,
            n_podcasts: 6,
        };
        let mut model = RankerModel::initialize(config, &shape, &mut rng).unwrap();
        // Larger weights make the loss less flat without changing the check.
        model.params.data.iter_mut().for_each(|x| *x *= 3.0);
        let f = random_features(&shape, &mut rng);
        let negatives = [1, 3, 4];
        let mut grad = vec![0.0; model.params.len()];
        model.loss_and_grad(&f, 0, &negatives, objective, &mut grad).unwrap();
        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..model.params.len() {
            let mut plus = model.clone();
            plus.params.data[i] += eps;
            let mut minus = model.clone();
            minus.params.data[i] -= eps;
            let mut sink = vec![0.0; model.params.len()];
            let lp = plus.loss_and_grad(&f, 0, &negatives, objective, &mut sink).unwrap();
            let lm = minus.loss_and_grad(&f, 0, &negatives, objective, &mut sink).unwrap();
            let fd = (lp - lm) / (2.0 * eps);
            // Relative 1e-3 with an absolute floor at finite-difference roundoff level.
            let err = (fd - grad[i]).abs() / (1e-3 * fd.abs().max(grad[i].abs()) + 1e-7);
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mlp = RankerConfig {
            demographic_embed_dim: 3,
            metadata_embed_dim: 2,
            hidden_layers: 2,
            hidden_dim: 5,
            user_embed_dim: 4,
            ..RankerConfig::desk()
        };
        for seed in 0..10 {
            for objective in [Objective::Sampled, Objective::FullSoftmax] {
                assert!(gradient_error(&mlp, objective, seed) <= 1.0, "mlp seed {seed}");
                assert!(gradient_error(&mlp.clone().logistic(), objective, seed) <= 1.0, "logreg seed {seed}");
            }
        }
    }

    #[test]
    fn invalid_negatives_rejected() {
        let config = RankerConfig { selection: latent_only(), ..RankerConfig::desk() };
        let shape = ModelShape { groups: vec![], latent_dim: 2, n_podcasts: 3 };
        let m = RankerModel::zeros(&config, &shape).unwrap();
        let mut g = vec![0.0; m.params.len()];
        let f = latent_features(&[0.0, 0.0]);
        assert!(m.loss_and_grad(&f, 0, &[0], Objective::Sampled, &mut g).is_err());
        assert!(m.loss_and_grad(&f, 0, &[3], Objective::Sampled, &mut g).is_err());
    }
}
