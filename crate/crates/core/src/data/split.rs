//! Non-IID client splits driven by a symmetric Dirichlet distribution per class.

use serde::{Deserialize, Serialize};

use crate::data::env::Environment;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub dirichlet_alpha: f64,
    pub num_clients_per_domain: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            dirichlet_alpha: 200.0,
            num_clients_per_domain: 1,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dirichlet_alpha > 0.0) || !self.dirichlet_alpha.is_finite() {
            return Err(Error::invalid(format!(
                "dirichlet_alpha must be > 0, got {}",
                self.dirichlet_alpha
            )));
        }
        if self.num_clients_per_domain == 0 {
            return Err(Error::invalid("num_clients_per_domain must be >= 1"));
        }
        Ok(())
    }
}

/// Draws `p ~ Dir(alpha · 1_k)` through normalised Gamma variates.
pub fn sample_dirichlet(alpha: f64, k: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let draws = (0..k).map(|_| rng.gamma(alpha)).collect::<Result<Vec<_>>>()?;
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        return Ok(draws.into_iter().map(|g| g / total).collect());
    }
    // Every variate underflowed (tiny alpha): the limit puts all mass on one client.
    let mut p = vec![0.0; k];
    p[rng.next_index(k)] = 1.0;
    Ok(p)
}

/// Integer counts summing to `total` by largest-remainder rounding; ties go to
/// the lower index.
pub fn largest_remainder(proportions: &[f64], total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Splits one environment into `split.num_clients_per_domain` clients.
pub fn dirichlet_split(env: &Environment, split: &SplitSpec, rng: &mut RngStream) -> Result<Vec<Environment>> {
    split.validate()?;
    let n = split.num_clients_per_domain;
    let groups = env.indices_by_label();
    if let Some((label, idx)) = groups.iter().find(|(_, idx)| idx.len() < n) {
        return Err(Error::InsufficientSamples(format!(
            "class {label} has {} samples for {n} clients",
            idx.len()
        )));
    }
    if n == 1 {
        return Ok(vec![env.clone()]);
    }

    // assignment[client][class] = sample indices
    let mut assignment: Vec<Vec<Vec<usize>>> = vec![Vec::with_capacity(groups.len()); n];
    for (_, mut idx) in groups {
        let p = sample_dirichlet(split.dirichlet_alpha, n, rng)?;
        let counts = largest_remainder(&p, idx.len());
        rng.shuffle(&mut idx);
        let mut start = 0;
        for (client, &c) in counts.iter().enumerate() {
            assignment[client].push(idx[start..start + c].to_vec());
            start += c;
        }
    }

    // Every class has at least n samples, so a donor with >= 2 samples always exists.
    loop {
        let sizes: Vec<usize> = assignment.iter().map(|c| c.iter().map(Vec::len).sum()).collect();
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            break;
        };
        let donor = (0..n)
            .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
            .expect("n >= 2");
        let class = (0..assignment[donor].len())
            .max_by(|&a, &b| {
                assignment[donor][a]
                    .len()
                    .cmp(&assignment[donor][b].len())
                    .then(b.cmp(&a))
            })
            .expect("donor has classes");
        let moved = assignment[donor][class].pop().expect("donor class non-empty");
        assignment[empty][class].push(moved);
    }

    assignment
        .into_iter()
        .map(|classes| {
            let mut idx: Vec<usize> = classes.into_iter().flatten().collect();
            idx.sort_unstable();
            let samples = idx.into_iter().map(|i| env.samples[i].clone()).collect();
            Environment::new(env.env_id, env.epsilon_deg, env.role, samples)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::env::{EnvRole, Sample};
    use crate::linalg::RealMatrix;
    use proptest::prelude::*;

    fn env_with(per_class: usize, classes: usize) -> Environment {
        let samples = (0..per_class * classes)
            .map(|i| Sample {
                pixels: RealMatrix::new(1, 1, vec![(i % 7) as f64 / 7.0]).unwrap(),
                label: i % classes,
                glyph_id: i,
            })
            .collect();
        Environment::new(0, 0.0, EnvRole::TrainClient, samples).unwrap()
    }

    fn ids(envs: &[Environment]) -> Vec<usize> {
        let mut all: Vec<usize> = envs.iter().flat_map(|e| e.samples.iter().map(|s| s.glyph_id)).collect();
        all.sort_unstable();
        all
    }

    #[test]
    fn single_client_is_identity() {
        let env = env_with(5, 3);
        let out = dirichlet_split(&env, &SplitSpec::default(), &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(out, vec![env]);
    }

    #[test]
    fn huge_alpha_balances_clients() {
        let env = env_with(400, 3);
        let spec = SplitSpec {
            dirichlet_alpha: 1e6,
            num_clients_per_domain: 4,
        };
        let out = dirichlet_split(&env, &spec, &mut RngStream::new(1, 0)).unwrap();
        for client in &out {
            for label in 0..3 {
                let c = client.samples.iter().filter(|s| s.label == label).count();
                assert!((95..=105).contains(&c), "client got {c}");
            }
        }
    }

    #[test]
    fn insufficient_samples_is_an_error() {
        let env = env_with(2, 2);
        let spec = SplitSpec {
            dirichlet_alpha: 1.0,
            num_clients_per_domain: 3,
        };
        assert!(matches!(
            dirichlet_split(&env, &spec, &mut RngStream::new(0, 0)),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn largest_remainder_examples() {
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[0.2, 0.3, 0.5], 10), vec![2, 3, 5]);
        assert_eq!(largest_remainder(&[0.34, 0.33, 0.33], 2), vec![1, 1, 0]);
    }

    #[test]
    fn invalid_spec() {
        assert!(SplitSpec {
            dirichlet_alpha: 0.0,
            num_clients_per_domain: 2
        }
        .validate()
        .is_err());
        assert!(SplitSpec {
            dirichlet_alpha: 1.0,
            num_clients_per_domain: 0
        }
        .validate()
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn split_is_a_partition_without_empty_clients(
            alpha in prop_oneof![0.01f64..1.0, 1.0f64..1000.0],
            clients in 2usize..6,
            classes in 1usize..5,
            seed in any::<u64>(),
        ) {
            let env = env_with(5 * clients, classes);
            let spec = SplitSpec { dirichlet_alpha: alpha, num_clients_per_domain: clients };
            let out = dirichlet_split(&env, &spec, &mut RngStream::new(seed, 0)).unwrap();
            prop_assert_eq!(out.len(), clients);
            prop_assert!(out.iter().all(|c| !c.is_empty()));
            prop_assert_eq!(ids(&out), (0..env.len()).collect::<Vec<_>>());
        }
    }
}
