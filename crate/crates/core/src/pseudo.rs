//! Pseudo labels for unlabeled target samples, restricted to detected
//! shared classes: probability-weighted initial centroids, cosine
//! nearest-centroid assignment, then exactly one hard-mean refinement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detector::SharedClassSet;
use crate::error::{Error, Result};
use crate::model::{forward, ModelParams};
use crate::numkernel::{cosine_similarity, norm, Matrix};

/// Class index to centroid in feature space.
pub type Centroids = BTreeMap<usize, Vec<f64>>;

/// Classes whose total soft weight falls below this are dropped.
const MIN_CLASS_WEIGHT: f64 = 1e-12;

/// Cosine similarities closer than this count as tied.
const COSINE_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabeling {
    pub centroids: Centroids,
    pub assignments: Vec<usize>,
    pub restricted_to: SharedClassSet,
}

impl PseudoLabeling {
    /// Indices of samples assigned to class `k`, ascending.
    pub fn members(&self, k: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|&(_, &a)| a == k)
            .map(|(i, _)| i)
            .collect()
    }
}

fn usable(c: &[f64]) -> bool {
    c.iter().all(|v| v.is_finite()) && norm(c) > 0.0
}

/// `c_k = sum_i p_i[k] q_i / sum_i p_i[k]` for every shared class `k`.
pub fn initial_centroids(q: &Matrix, probs: &Matrix, shared: &SharedClassSet) -> Result<Centroids> {
    if q.rows() != probs.rows() {
        return Err(Error::InvalidShape(format!(
            "{} feature rows vs {} probability rows",
            q.rows(),
            probs.rows()
        )));
    }
    if shared.is_empty() {
        return Err(Error::NoSharedClasses);
    }
    let mut out = Centroids::new();
    for &k in &shared.classes {
        if k >= probs.cols() {
            return Err(Error::InvalidLabel {
                label: k,
                classes: probs.cols(),
            });
        }
        let mut weight = 0.0;
        let mut c = vec![0.0; q.cols()];
        for (i, row) in q.iter_rows().enumerate() {
            let w = probs.get(i, k);
            weight += w;
            for (cv, &qv) in c.iter_mut().zip(row) {
                *cv += w * qv;
            }
        }
        if weight < MIN_CLASS_WEIGHT {
            continue;
        }
        c.iter_mut().for_each(|v| *v /= weight);
        if usable(&c) {
            out.insert(k, c);
        }
    }
    if out.is_empty() {
        return Err(Error::NoUsableCentroids);
    }
    Ok(out)
}

/// Nearest centroid by cosine similarity; ties go to the smallest class index.
pub fn assign_labels(q: &Matrix, centroids: &Centroids) -> Result<Vec<usize>> {
    if centroids.is_empty() {
        return Err(Error::NoUsableCentroids);
    }
    q.iter_rows()
        .enumerate()
        .map(|(i, row)| {
            if norm(row) == 0.0 {
                return Err(Error::ZeroVector(format!("feature row {i}")));
            }
            let mut best: Option<(usize, f64)> = None;
            // BTreeMap iterates in ascending class order
            for (&k, c) in centroids {
                let s = cosine_similarity(row, c)?;
                if best.map_or(true, |(_, b)| s > b + COSINE_TIE_TOL) {
                    best = Some((k, s));
                }
            }
            Ok(best.expect("centroids non-empty").0)
        })
        .collect()
}

/// Hard per-class means of `q` under `assignments`, restricted to `shared`.
pub fn hard_centroids(q: &Matrix, assignments: &[usize], shared: &SharedClassSet) -> Result<Centroids> {
    if assignments.len() != q.rows() {
        return Err(Error::InvalidShape(format!(
            "{} assignments for {} rows",
            assignments.len(),
            q.rows()
        )));
    }
    let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
    for (row, &a) in q.iter_rows().zip(assignments) {
        if !shared.contains(a) {
            continue;
        }
        let e = sums.entry(a).or_insert_with(|| (vec![0.0; q.cols()], 0));
        for (s, &v) in e.0.iter_mut().zip(row) {
            *s += v;
        }
        e.1 += 1;
    }
    let out: Centroids = sums
        .into_iter()
        .map(|(k, (s, n))| (k, s.into_iter().map(|v| v / n as f64).collect::<Vec<_>>()))
        .filter(|(_, c)| usable(c))
        .collect();
    if out.is_empty() {
        return Err(Error::NoUsableCentroids);
    }
    Ok(out)
}

/// One round of hard-mean centroid update followed by reassignment.
pub fn refine_once(
    q: &Matrix,
    assignments: &[usize],
    shared: &SharedClassSet,
) -> Result<(Centroids, Vec<usize>)> {
    let centroids = hard_centroids(q, assignments, shared)?;
    let next = assign_labels(q, &centroids)?;
    Ok((centroids, next))
}

/// Forward pass, soft centroids, assignment, and one refinement.
pub fn pseudo_label_pipeline(
    params: &ModelParams,
    x_target: &Matrix,
    shared: &SharedClassSet,
) -> Result<PseudoLabeling> {
    if shared.is_empty() {
        return Err(Error::NoSharedClasses);
    }
    let trace = forward(params, x_target)?;
    let centroids = initial_centroids(&trace.features, &trace.probs, shared)?;
    let first = assign_labels(&trace.features, &centroids)?;
    let (centroids, assignments) = refine_once(&trace.features, &first, shared)?;
    Ok(PseudoLabeling {
        centroids,
        assignments,
        restricted_to: shared.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(classes: &[usize]) -> SharedClassSet {
        SharedClassSet::from_classes(classes.iter().copied())
    }

    #[test]
    fn initial_centroid_examples() {
        let q = Matrix::from_rows(&[[3.0, -1.0]]).unwrap();
        let p = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
        let c = initial_centroids(&q, &p, &set(&[1])).unwrap();
        assert_eq!(c[&1], vec![3.0, -1.0]);

        let q = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let p = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        let c = initial_centroids(&q, &p, &set(&[0])).unwrap();
        assert_eq!(c[&0], vec![0.5, 0.5]);

        let q = Matrix::from_rows(&[[2.0, 0.0], [0.0, 2.0]]).unwrap();
        let p = Matrix::from_rows(&[[0.9, 0.1], [0.1, 0.9]]).unwrap();
        let c = initial_centroids(&q, &p, &set(&[0])).unwrap();
        assert!((c[&0][0] - 1.8).abs() < 1e-12);
        assert!((c[&0][1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_classes_are_dropped() {
        let q = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let p = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let c = initial_centroids(&q, &p, &set(&[0, 1])).unwrap();
        assert_eq!(c.keys().copied().collect::<Vec<_>>(), vec![0]);
        assert!(matches!(
            initial_centroids(&q, &p, &set(&[1])),
            Err(Error::NoUsableCentroids)
        ));
    }

    #[test]
    fn assignment_examples() {
        let mut c = Centroids::new();
        c.insert(0, vec![1.0, 0.0]);
        c.insert(3, vec![0.0, 3.0]);
        let q = Matrix::from_rows(&[[0.0, 3.0], [1.0, 0.0]]).unwrap();
        assert_eq!(assign_labels(&q, &c).unwrap(), vec![3, 0]);

        // cos([1,1],[1,0]) == cos([1,1],[0,3]) == 1/sqrt(2)
        let q = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let a = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        let b = cosine_similarity(&[1.0, 1.0], &[0.0, 3.0]).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert_eq!(assign_labels(&q, &c).unwrap(), vec![0]);

        let mut same = Centroids::new();
        same.insert(2, vec![1.0, 2.0]);
        same.insert(5, vec![1.0, 2.0]);
        let q = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 4.0], [0.3, 0.3]]).unwrap();
        assert_eq!(assign_labels(&q, &same).unwrap(), vec![2, 2, 2]);

        let q = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        assert!(matches!(assign_labels(&q, &c), Err(Error::ZeroVector(_))));
    }

    #[test]
    fn refinement_fixed_point_and_single_class() {
        let q = Matrix::from_rows(&[[1.0, 0.1], [1.0, -0.1], [0.1, 1.0], [-0.1, 1.0]]).unwrap();
        let a = vec![0, 0, 1, 1];
        let (_, next) = refine_once(&q, &a, &set(&[0, 1])).unwrap();
        assert_eq!(next, a);

        let (c, next) = refine_once(&q, &[4, 4, 4, 4], &set(&[4])).unwrap();
        assert_eq!(next, vec![4; 4]);
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn refinement_flips_a_mislabeled_boundary_point() {
        // Cluster A around +x, cluster B around +y. Point 4 lies in A but starts labeled B.
        let q = Matrix::from_rows(&[
            [1.0, 0.05],
            [1.0, -0.05],
            [0.95, 0.0],
            [0.05, 1.0],
            [0.9, 0.3],
            [-0.05, 1.0],
            [0.0, 0.95],
        ])
        .unwrap();
        let a = vec![0, 0, 0, 1, 1, 1, 1];
        // direct k-means-style oracle step
        let mean = |idx: &[usize]| -> Vec<f64> {
            let mut m = vec![0.0; 2];
            for &i in idx {
                m[0] += q.get(i, 0) / idx.len() as f64;
                m[1] += q.get(i, 1) / idx.len() as f64;
            }
            m
        };
        let ca = mean(&[0, 1, 2]);
        let cb = mean(&[3, 4, 5, 6]);
        let p4 = q.row(4);
        assert!(cosine_similarity(p4, &ca).unwrap() > cosine_similarity(p4, &cb).unwrap());
        let (_, next) = refine_once(&q, &a, &set(&[0, 1])).unwrap();
        assert_eq!(next, vec![0, 0, 0, 1, 0, 1, 1]);
    }

    #[test]
    fn refinement_rejects_empty_shared_support() {
        let q = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(matches!(
            refine_once(&q, &[3], &set(&[0])),
            Err(Error::NoUsableCentroids)
        ));
    }

    #[test]
    fn zero_weight_network_ties_to_smallest_shared_class() {
        let mut p = ModelParams::zeros(2, 3, 4);
        p.b2 = Matrix::row_vector(&[0.5, -0.2, 0.1]);
        let x = Matrix::from_rows(&[[1.0, 2.0], [-3.0, 0.5], [0.0, 0.0]]).unwrap();
        let shared = set(&[1, 3]);
        let t = forward(&p, &x).unwrap();
        let c = initial_centroids(&t.features, &t.probs, &shared).unwrap();
        let mean: Vec<f64> = (0..3)
            .map(|j| t.features.iter_rows().map(|r| r[j]).sum::<f64>() / 3.0)
            .collect();
        for k in [1, 3] {
            for (a, b) in c[&k].iter().zip(&mean) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        let pl = pseudo_label_pipeline(&p, &x, &shared).unwrap();
        assert_eq!(pl.assignments, vec![1, 1, 1]);
    }

    #[test]
    fn restriction_excludes_missing_classes() {
        let mut rng = crate::numkernel::RngStream::new(4, "pl");
        let p = ModelParams::init(3, 5, 4, &mut rng).unwrap();
        let x = Matrix::from_vec(20, 3, (0..60).map(|i| ((i * 37) % 11) as f64 - 5.0).collect())
            .unwrap();
        let shared = set(&[0, 2]);
        let pl = pseudo_label_pipeline(&p, &x, &shared).unwrap();
        assert!(pl.assignments.iter().all(|a| shared.contains(*a)));
        assert!(pl.members(1).is_empty() && pl.members(3).is_empty());
    }

    proptest! {
        #[test]
        fn assignments_ignore_row_scaling(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 4..10),
            scale in 0.01f64..50.0,
            which in 0usize..4,
        ) {
            prop_assume!(rows.iter().all(|r| norm(r) > 1e-3));
            let q = Matrix::from_rows(&rows).unwrap();
            let mut c = Centroids::new();
            c.insert(0, vec![1.0, 0.2, -0.3]);
            c.insert(1, vec![-0.5, 1.0, 0.1]);
            c.insert(2, vec![0.1, -0.4, 1.0]);
            let before = assign_labels(&q, &c).unwrap();
            let mut scaled = rows.clone();
            let idx = which % scaled.len();
            scaled[idx].iter_mut().for_each(|v| *v *= scale);
            let after = assign_labels(&Matrix::from_rows(&scaled).unwrap(), &c).unwrap();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn refine_never_leaves_shared_set(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 3..12),
            labels in prop::collection::vec(0usize..5, 12),
        ) {
            prop_assume!(rows.iter().all(|r| norm(r) > 1e-3));
            let q = Matrix::from_rows(&rows).unwrap();
            let a: Vec<usize> = labels[..rows.len()].to_vec();
            let shared = set(&[0, 2, 4]);
            if let Ok((_, next)) = refine_once(&q, &a, &shared) {
                prop_assert!(next.iter().all(|k| shared.contains(*k)));
            }
        }
    }
}
