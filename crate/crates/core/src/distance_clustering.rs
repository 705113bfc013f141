//! Normalized Euclidean distance over mixed numeric/nominal attributes, and
//! Lloyd's k-means under that distance.
//!
//! Numeric attributes are min-max normalized with constants taken from the
//! training data (test values are clamped to `[0, 1]`); nominal attributes
//! contribute 0 when equal and 1 otherwise. Numeric centroid components are
//! means of normalized values, nominal ones are modes.

use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Instance, Schema};
use crate::error::{Error, Result};
use crate::{par, seeding};

pub const DEFAULT_MAX_ITER: usize = 100;

/// Per-attribute normalization: `Some((min, max))` for numeric attributes,
/// `None` for nominal ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub ranges: Vec<Option<(f64, f64)>>,
}

impl FeatureScaler {
    pub fn fit(data: &Dataset) -> Self {
        let ranges = data
            .schema
            .attributes
            .iter()
            .enumerate()
            .map(|(a, attr)| {
                attr.is_numeric().then(|| {
                    data.instances.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), inst| {
                        (lo.min(inst.values[a]), hi.max(inst.values[a]))
                    })
                })
                .map(|(lo, hi)| if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) })
            })
            .collect();
        Self { ranges }
    }

    /// Normalized copy of `values`: numeric components in `[0, 1]`, nominal
    /// components unchanged.
    pub fn normalize(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.ranges.len() {
            return Err(Error::SchemaMismatch {
                expected: self.ranges.len(),
                found: values.len(),
            });
        }
        Ok(values
            .iter()
            .zip(&self.ranges)
            .map(|(&v, range)| match *range {
                None => v,
                Some((lo, hi)) if hi > lo => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
                Some(_) => 0.0,
            })
            .collect())
    }

    fn is_numeric(&self, a: usize) -> bool {
        self.ranges[a].is_some()
    }
}

/// Squared distance between two already-normalized points.
fn normalized_sq_distance(scaler: &FeatureScaler, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (&x, &y))| {
            if scaler.is_numeric(i) {
                (x - y) * (x - y)
            } else if x == y {
                0.0
            } else {
                1.0
            }
        })
        .sum()
}

/// Distance between two instances (class attribute excluded).
pub fn mixed_distance(a: &Instance, b: &Instance, scaler: &FeatureScaler) -> Result<f64> {
    let na = scaler.normalize(&a.values)?;
    let nb = scaler.normalize(&b.values)?;
    Ok(normalized_sq_distance(scaler, &na, &nb).sqrt())
}

/// Distance between an instance and a centroid.
pub fn centroid_distance(a: &Instance, c: &Centroid, scaler: &FeatureScaler) -> Result<f64> {
    let na = scaler.normalize(&a.values)?;
    if c.values.len() != na.len() {
        return Err(Error::SchemaMismatch {
            expected: na.len(),
            found: c.values.len(),
        });
    }
    Ok(normalized_sq_distance(scaler, &na, &c.values).sqrt())
}

/// Cluster center in normalized space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Centroid>,
    pub scaler: FeatureScaler,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    /// Sum of squared distances to the assigned centroid, after each update.
    pub objective_trace: Vec<f64>,
    /// Training assignment of every instance.
    pub assignments: Vec<usize>,
}

impl ClusterModel {
    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn assign(&self, x: &Instance) -> Result<usize> {
        let nx = self.scaler.normalize(&x.values)?;
        Ok(nearest(&self.scaler, &self.centroids, &nx).0)
    }

    pub fn assign_all(&self, data: &Dataset) -> Result<Vec<usize>> {
        par::map_slice(&data.instances, |x| self.assign(x))
            .into_iter()
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cluster model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        if m.k == 0 || m.centroids.len() != m.k {
            return Err(Error::Model(format!("{} centroids for k = {}", m.centroids.len(), m.k)));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// `assign_cluster` as a free function.
pub fn assign_cluster(x: &Instance, model: &ClusterModel) -> Result<usize> {
    model.assign(x)
}

fn nearest(scaler: &FeatureScaler, centroids: &[Centroid], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = normalized_sq_distance(scaler, x, &c.values);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn compute_centroid(schema: &Schema, points: &[Vec<f64>], members: &[usize]) -> Centroid {
    let values = schema
        .attributes
        .iter()
        .enumerate()
        .map(|(a, attr)| match attr.arity() {
            None => members.iter().map(|&i| points[i][a]).sum::<f64>() / members.len() as f64,
            Some(n) => {
                let mut counts = vec![0usize; n];
                for &i in members {
                    counts[points[i][a] as usize] += 1;
                }
                // first maximum wins
                let mut best = 0;
                for (c, &cnt) in counts.iter().enumerate() {
                    if cnt > counts[best] {
                        best = c;
                    }
                }
                best as f64
            }
        })
        .collect();
    Centroid { values }
}

/// Lloyd's k-means with seeded initialization from `k` distinct instances.
///
/// Iterates until no assignment changes or `max_iter` updates. An empty
/// cluster is reseeded with the point farthest from its own centroid.
pub fn kmeans_fit(data: &Dataset, k: usize, seed: u64, max_iter: usize) -> Result<ClusterModel> {
    let n = data.len();
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the {n} instances")));
    }
    let scaler = FeatureScaler::fit(data);
    let points: Vec<Vec<f64>> = data
        .instances
        .iter()
        .map(|x| scaler.normalize(&x.values))
        .collect::<Result<_>>()?;

    let mut rng = seeding::rng(seed);
    let mut init: Vec<usize> = sample(&mut rng, n, k).into_vec();
    init.sort_unstable();
    let mut centroids: Vec<Centroid> = init
        .iter()
        .map(|&i| Centroid {
            values: points[i].clone(),
        })
        .collect();

    let mut assignments = vec![usize::MAX; n];
    let mut objective_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let nearest_all = par::map_slice(&points, |p| nearest(&scaler, &centroids, p));
        let changed = nearest_all
            .iter()
            .zip(&assignments)
            .filter(|((j, _), &old)| *j != old)
            .count();
        for (slot, (j, _)) in assignments.iter_mut().zip(&nearest_all) {
            *slot = *j;
        }
        if changed == 0 {
            converged = true;
            break;
        }

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &j) in assignments.iter().enumerate() {
            members[j].push(i);
        }
        repair_empty(&scaler, &points, &centroids, &mut assignments, &mut members);
        centroids = members
            .iter()
            .map(|m| compute_centroid(&data.schema, &points, m))
            .collect();
        objective_trace.push(objective(&scaler, &points, &centroids, &assignments));
    }

    Ok(ClusterModel {
        k,
        centroids,
        scaler,
        seed,
        iterations,
        converged,
        objective_trace,
        assignments,
    })
}

/// Moves, for each empty cluster, the point farthest from its current
/// centroid (among clusters with more than one member) into it.
fn repair_empty(
    scaler: &FeatureScaler,
    points: &[Vec<f64>],
    centroids: &[Centroid],
    assignments: &mut [usize],
    members: &mut [Vec<usize>],
) {
    for empty in 0..members.len() {
        if !members[empty].is_empty() {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let j = assignments[i];
            if members[j].len() < 2 {
                continue;
            }
            let d = normalized_sq_distance(scaler, p, &centroids[j].values);
            if far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        if let Some((i, _)) = far {
            let from = assignments[i];
            members[from].retain(|&m| m != i);
            members[empty].push(i);
            assignments[i] = empty;
        }
    }
}

fn objective(scaler: &FeatureScaler, points: &[Vec<f64>], centroids: &[Centroid], assignments: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &j)| normalized_sq_distance(scaler, p, &centroids[j].values))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AttributeSpec, ClassLabel};

    fn two_numeric(rows: &[(f64, f64)]) -> Dataset {
        let schema = Schema::new(
            vec![AttributeSpec::numeric("a"), AttributeSpec::numeric("b")],
            "y",
            "n",
            "p",
        )
        .unwrap();
        Dataset::from_rows(
            schema,
            rows.iter().map(|&(a, b)| (vec![a, b], ClassLabel::Negative)).collect(),
        )
        .unwrap()
    }

    fn mixed() -> Dataset {
        let schema = Schema::new(
            vec![AttributeSpec::numeric("x"), AttributeSpec::nominal("c", ["u", "v", "w"])],
            "y",
            "n",
            "p",
        )
        .unwrap();
        let rows = vec![
            (vec![0.0, 0.0], ClassLabel::Negative),
            (vec![2.0, 1.0], ClassLabel::Negative),
            (vec![4.0, 1.0], ClassLabel::Positive),
            (vec![10.0, 2.0], ClassLabel::Negative),
        ];
        Dataset::from_rows(schema, rows).unwrap()
    }

    #[test]
    fn distance_examples() {
        let d = two_numeric(&[(0.0, 0.0), (10.0, 10.0)]);
        let s = FeatureScaler::fit(&d);
        assert_eq!(mixed_distance(&d.instances[0], &d.instances[0], &s).unwrap(), 0.0);
        let corner = mixed_distance(&d.instances[0], &d.instances[1], &s).unwrap();
        assert!((corner - 2f64.sqrt()).abs() < 1e-12);

        let m = mixed();
        let s = FeatureScaler::fit(&m);
        let mut a = m.instances[1].clone();
        let b = m.instances[1].clone();
        a.values[1] = 2.0;
        assert_eq!(mixed_distance(&a, &b, &s).unwrap(), 1.0);
    }

    #[test]
    fn unseen_values_clamp() {
        let d = two_numeric(&[(0.0, 0.0), (10.0, 10.0)]);
        let s = FeatureScaler::fit(&d);
        assert_eq!(s.normalize(&[-5.0, 25.0]).unwrap(), vec![0.0, 1.0]);
        assert!(s.normalize(&[1.0]).is_err());
    }

    #[test]
    fn k_one_is_mean_and_mode() {
        let m = mixed();
        let model = kmeans_fit(&m, 1, 9, DEFAULT_MAX_ITER).unwrap();
        let c = &model.centroids[0].values;
        assert!((c[0] - 0.4).abs() < 1e-12); // normalized mean of 0, .2, .4, 1
        assert_eq!(c[1], 1.0);
        assert!(model.converged);
    }

    #[test]
    fn k_bounds() {
        let m = mixed();
        assert!(kmeans_fit(&m, 0, 0, 10).is_err());
        assert!(kmeans_fit(&m, 5, 0, 10).is_err());
        let all = kmeans_fit(&m, 4, 0, 10).unwrap();
        let mut a = all.assignments.clone();
        a.sort_unstable();
        assert_eq!(a, vec![0, 1, 2, 3]);
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let d = two_numeric(&[(0.0, 0.0), (10.0, 10.0)]);
        let model = ClusterModel {
            k: 2,
            centroids: vec![
                Centroid { values: vec![0.0, 0.0] },
                Centroid { values: vec![1.0, 1.0] },
            ],
            scaler: FeatureScaler::fit(&d),
            seed: 0,
            iterations: 0,
            converged: true,
            objective_trace: vec![],
            assignments: vec![],
        };
        let mid = Instance::new(vec![5.0, 5.0], ClassLabel::Negative);
        assert_eq!(assign_cluster(&mid, &model).unwrap(), 0);
        assert_eq!(assign_cluster(&d.instances[1], &model).unwrap(), 1);
    }

    #[test]
    fn model_json_round_trip() {
        let m = mixed();
        let model = kmeans_fit(&m, 2, 4, DEFAULT_MAX_ITER).unwrap();
        let back = ClusterModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        assert!(ClusterModel::from_json("{}").is_err());
    }
}
