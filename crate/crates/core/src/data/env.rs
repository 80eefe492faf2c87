//! Environments generated by `X = rotate(Z, ε)` with one fixed ε per environment.

use serde::{Deserialize, Serialize};

use crate::data::glyph::Glyph;
use crate::data::transform::{apply_augmentation, rotate_image, AugmentationSpec};
use crate::error::{Error, Result};
use crate::linalg::RealMatrix;
use crate::nn::Batch;
use crate::rng::RngStream;

/// One observation. `glyph_id` points back at the bank entry it was rendered from.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub pixels: RealMatrix,
    pub label: usize,
    pub glyph_id: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvRole {
    TrainClient,
    OodTest,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    pub env_id: usize,
    pub epsilon_deg: f64,
    pub role: EnvRole,
    pub samples: Vec<Sample>,
}

impl Environment {
    pub fn new(env_id: usize, epsilon_deg: f64, role: EnvRole, samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("environment samples"));
        }
        let side = samples[0].pixels.rows();
        if samples
            .iter()
            .any(|s| s.pixels.rows() != side || s.pixels.cols() != side)
        {
            return Err(Error::dim("environment samples differ in shape"));
        }
        Ok(Self {
            env_id,
            epsilon_deg,
            role,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn side(&self) -> usize {
        self.samples[0].pixels.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.side() * self.side()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Indices of samples grouped by label, labels ascending.
    pub fn indices_by_label(&self) -> Vec<(usize, Vec<usize>)> {
        let max = self.samples.iter().map(|s| s.label).max().unwrap_or(0);
        let mut groups = vec![Vec::new(); max + 1];
        for (i, s) in self.samples.iter().enumerate() {
            groups[s.label].push(i);
        }
        groups.into_iter().enumerate().filter(|(_, g)| !g.is_empty()).collect()
    }

    /// Full, un-augmented batch of every sample.
    pub fn to_batch(&self) -> Result<Batch> {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.batch(&idx, &AugmentationSpec::None {}, &mut RngStream::new(0, 0))
    }

    /// Batch of the given samples, each passed through `aug` with fresh randomness.
    pub fn batch(&self, indices: &[usize], aug: &AugmentationSpec, rng: &mut RngStream) -> Result<Batch> {
        if indices.is_empty() {
            return Err(Error::Empty("batch indices"));
        }
        let dim = self.input_dim();
        let mut inputs = Vec::with_capacity(indices.len() * dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let sample = self
                .samples
                .get(i)
                .ok_or_else(|| Error::invalid(format!("sample index {i} out of range")))?;
            if aug.is_identity() {
                inputs.extend_from_slice(sample.pixels.as_slice());
            } else {
                inputs.extend(apply_augmentation(aug, &sample.pixels, rng)?.into_inner());
            }
            labels.push(sample.label);
        }
        Batch::new(RealMatrix::new(indices.len(), dim, inputs)?, labels)
    }

    /// Stratified hold-out: from each class, `round(fraction * count)` samples go to
    /// the second environment. Both halves keep this environment's id, angle and role.
    pub fn split_holdout(&self, fraction: f64, rng: &mut RngStream) -> Result<(Environment, Environment)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::invalid(format!(
                "holdout fraction must be in [0, 1), got {fraction}"
            )));
        }
        let mut keep = Vec::new();
        let mut hold = Vec::new();
        for (_, mut idx) in self.indices_by_label() {
            rng.shuffle(&mut idx);
            let n_hold = (fraction * idx.len() as f64).round() as usize;
            hold.extend_from_slice(&idx[..n_hold]);
            keep.extend_from_slice(&idx[n_hold..]);
        }
        keep.sort_unstable();
        hold.sort_unstable();
        let pick = |idx: &[usize]| idx.iter().map(|&i| self.samples[i].clone()).collect::<Vec<_>>();
        Ok((
            Environment::new(self.env_id, self.epsilon_deg, self.role, pick(&keep))?,
            Environment::new(self.env_id, self.epsilon_deg, self.role, pick(&hold))?,
        ))
    }

    /// Concatenation of several environments (used for the centralized baseline).
    pub fn merge(env_id: usize, parts: &[Environment]) -> Result<Environment> {
        let samples: Vec<Sample> = parts.iter().flat_map(|e| e.samples.iter().cloned()).collect();
        let epsilon = parts.first().map_or(0.0, |e| e.epsilon_deg);
        Environment::new(env_id, epsilon, EnvRole::TrainClient, samples)
    }
}

/// Partitions the bank across one environment per training angle plus one OOD
/// environment, then rotates every sample by its environment's angle.
///
/// The partition uses only `rng` and the labels, so the assignment of glyphs
/// to environments does not depend on the angles.
pub fn make_environments(
    bank: &[Glyph],
    angles_deg: &[f64],
    ood_angle_deg: f64,
    rng: &mut RngStream,
) -> Result<Vec<Environment>> {
    if angles_deg.is_empty() {
        return Err(Error::Empty("training angles"));
    }
    for (i, a) in angles_deg.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::invalid("angles must be finite"));
        }
        if angles_deg[..i].contains(a) {
            return Err(Error::invalid(format!("duplicate training angle {a}")));
        }
    }
    if !ood_angle_deg.is_finite() {
        return Err(Error::invalid("ood angle must be finite"));
    }
    let n_env = angles_deg.len() + 1;
    if bank.len() < n_env {
        return Err(Error::InsufficientSamples(format!(
            "{} glyphs cannot fill {n_env} environments",
            bank.len()
        )));
    }

    let max_label = bank.iter().map(|g| g.label).max().unwrap_or(0);
    let mut by_label = vec![Vec::new(); max_label + 1];
    for (i, g) in bank.iter().enumerate() {
        by_label[g.label].push(i);
    }
    let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); n_env];
    for (label, mut idx) in by_label.into_iter().enumerate() {
        rng.shuffle(&mut idx);
        for (j, i) in idx.into_iter().enumerate() {
            assignment[(label + j) % n_env].push(i);
        }
    }

    assignment
        .into_iter()
        .enumerate()
        .map(|(env_id, mut ids)| {
            ids.sort_unstable();
            let (angle, role) = if env_id < angles_deg.len() {
                (angles_deg[env_id], EnvRole::TrainClient)
            } else {
                (ood_angle_deg, EnvRole::OodTest)
            };
            let samples = ids
                .into_iter()
                .map(|i| {
                    Ok(Sample {
                        pixels: rotate_image(&bank[i].pixels, angle)?,
                        label: bank[i].label,
                        glyph_id: i,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Environment::new(env_id, angle, role, samples)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::glyph::make_glyph_bank;

    fn bank() -> Vec<Glyph> {
        make_glyph_bank(10, 12, 30, 0.1, &mut RngStream::new(1, 1)).unwrap()
    }

    #[test]
    fn six_environments_with_roles() {
        let envs = make_environments(&bank(), &[0.0, 15.0, 30.0, 45.0, 60.0], 75.0, &mut RngStream::new(2, 0)).unwrap();
        assert_eq!(envs.len(), 6);
        assert!(envs[..5].iter().all(|e| e.role == EnvRole::TrainClient));
        assert_eq!(envs[5].role, EnvRole::OodTest);
        assert_eq!(envs[5].epsilon_deg, 75.0);
        let total: usize = envs.iter().map(Environment::len).sum();
        assert_eq!(total, 300);
        let mut ids: Vec<usize> = envs.iter().flat_map(|e| e.samples.iter().map(|s| s.glyph_id)).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..300).collect::<Vec<_>>());
    }

    #[test]
    fn sanity_mode_single_domain() {
        let b = bank();
        let envs = make_environments(&b, &[0.0], 0.0, &mut RngStream::new(3, 0)).unwrap();
        assert_eq!(envs.len(), 2);
        for env in &envs {
            assert_eq!(env.epsilon_deg, 0.0);
            for s in &env.samples {
                assert_eq!(s.pixels, b[s.glyph_id].pixels);
            }
        }
    }

    #[test]
    fn duplicate_angles_rejected() {
        assert!(make_environments(&bank(), &[0.0, 15.0, 0.0], 75.0, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn semantic_partition_is_independent_of_angles() {
        let b = bank();
        let a = make_environments(&b, &[0.0, 15.0], 30.0, &mut RngStream::new(4, 0)).unwrap();
        let c = make_environments(&b, &[50.0, 10.0], 80.0, &mut RngStream::new(4, 0)).unwrap();
        for (x, y) in a.iter().zip(&c) {
            let ix: Vec<usize> = x.samples.iter().map(|s| s.glyph_id).collect();
            let iy: Vec<usize> = y.samples.iter().map(|s| s.glyph_id).collect();
            assert_eq!(ix, iy);
        }
        // Undoing nothing at ε = 0: pre-rotation glyphs are pixel-identical to the bank.
        for s in &a[0].samples {
            assert_eq!(s.pixels, b[s.glyph_id].pixels);
        }
    }

    #[test]
    fn holdout_is_stratified_partition() {
        let envs = make_environments(&bank(), &[0.0], 10.0, &mut RngStream::new(5, 0)).unwrap();
        let env = &envs[0];
        let (train, val) = env.split_holdout(0.1, &mut RngStream::new(6, 0)).unwrap();
        assert_eq!(train.len() + val.len(), env.len());
        for (label, idx) in env.indices_by_label() {
            let expected = (0.1 * idx.len() as f64).round() as usize;
            assert_eq!(val.samples.iter().filter(|s| s.label == label).count(), expected);
        }
        assert!(env.split_holdout(1.0, &mut RngStream::new(6, 0)).is_err());
    }

    #[test]
    fn augmented_batches_keep_labels() {
        let envs = make_environments(&bank(), &[0.0], 10.0, &mut RngStream::new(5, 0)).unwrap();
        let idx: Vec<usize> = (0..envs[0].len()).collect();
        let aug = AugmentationSpec::Compose {
            steps: vec![
                AugmentationSpec::RandomRotation { alpha_deg: 60.0 },
                AugmentationSpec::GaussianBlur { sigma: 1.0, kernel: 5 },
            ],
        };
        let batch = envs[0].batch(&idx, &aug, &mut RngStream::new(7, 0)).unwrap();
        assert_eq!(batch.labels, envs[0].labels());
    }
}
