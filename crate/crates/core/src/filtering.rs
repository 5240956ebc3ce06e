//! Source-video filters: embedding near-duplicate removal and trajectory motion
//! scoring.
//!
//! Both consume numeric outputs only. Feature vectors and point trajectories come
//! from an encoder and a point tracker (see [`crate::backends::analysis`] for the
//! in-process ones), or from line-delimited JSON records written by external tools:
//!
//! ```text
//! {"asset_id":"a1","features":[0.1,0.2,...]}
//! {"asset_id":"a1","trajectories":[{"point_id":0,"positions":[[1.0,2.0],[1.5,2.0]]}]}
//! ```

use serde::{Deserialize, Serialize};

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.95;
pub const DEFAULT_MOTION_THRESHOLD: f64 = 5.0;
pub const DEFAULT_FEATURE_DIM: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("feature vector for {asset_id} has zero norm")]
    ZeroNorm { asset_id: String },
    #[error("non-finite value in {what} for {asset_id}")]
    NonFinite { asset_id: String, what: &'static str },
    #[error("empty trajectory for point {point_id}")]
    EmptyTrajectory { point_id: u32 },
    #[error("motion score needs at least one trajectory")]
    EmptyTrajectorySet,
    #[error("threshold {0} out of range")]
    InvalidThreshold(f64),
    #[error("record on line {line}: {message}")]
    Record { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub asset_id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    /// Validates finiteness and a nonzero norm.
    pub fn new(asset_id: impl Into<String>, values: Vec<f64>) -> Result<Self, FilterError> {
        let asset_id = asset_id.into();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FilterError::NonFinite {
                asset_id,
                what: "features",
            });
        }
        let v = Self { asset_id, values };
        if v.norm() == 0.0 {
            return Err(FilterError::ZeroNorm {
                asset_id: v.asset_id,
            });
        }
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn cosine_similarity(a: &FeatureVector, b: &FeatureVector) -> Result<f64, FilterError> {
    if a.dim() != b.dim() {
        return Err(FilterError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    for (v, n) in [(a, na), (b, nb)] {
        if n == 0.0 {
            return Err(FilterError::ZeroNorm {
                asset_id: v.asset_id.clone(),
            });
        }
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FilterReason {
    Kept,
    DuplicateOf { asset_id: String, similarity: f64 },
    LowMotion { score: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub asset_id: String,
    pub reason: FilterReason,
}

impl FilterDecision {
    pub fn kept(&self) -> bool {
        matches!(self.reason, FilterReason::Kept)
    }
}

/// Greedy near-duplicate sweep in ingestion order.
///
/// An asset is a duplicate of the earliest already-kept asset whose similarity is
/// strictly greater than `threshold`; otherwise it is kept.
pub fn dedup(vectors: &[FeatureVector], threshold: f64) -> Result<Vec<FilterDecision>, FilterError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(FilterError::InvalidThreshold(threshold));
    }
    let mut kept: Vec<&FeatureVector> = Vec::new();
    let mut out = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut dup = None;
        for k in &kept {
            let sim = cosine_similarity(v, k)?;
            if sim > threshold {
                dup = Some((k.asset_id.clone(), sim));
                break;
            }
        }
        let reason = match dup {
            Some((asset_id, similarity)) => FilterReason::DuplicateOf {
                asset_id,
                similarity,
            },
            None => {
                kept.push(v);
                FilterReason::Kept
            }
        };
        out.push(FilterDecision {
            asset_id: v.asset_id.clone(),
            reason,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub point_id: u32,
    pub positions: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn new(point_id: u32, positions: Vec<(f64, f64)>) -> Result<Self, FilterError> {
        let t = Self {
            point_id,
            positions,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if self.positions.is_empty() {
            return Err(FilterError::EmptyTrajectory {
                point_id: self.point_id,
            });
        }
        if self
            .positions
            .iter()
            .any(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(FilterError::NonFinite {
                asset_id: format!("point {}", self.point_id),
                what: "trajectory",
            });
        }
        Ok(())
    }
}

/// Path length: sum of Euclidean steps between consecutive positions.
pub fn cumulative_displacement(t: &Trajectory) -> f64 {
    t.positions
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        .sum()
}

/// Mean cumulative displacement over all tracked points.
pub fn motion_score(ts: &[Trajectory]) -> Result<f64, FilterError> {
    if ts.is_empty() {
        return Err(FilterError::EmptyTrajectorySet);
    }
    let total: f64 = ts.iter().map(cumulative_displacement).sum();
    Ok(total / ts.len() as f64)
}

/// Keeps an asset iff its score is at least `threshold`.
pub fn motion_filter(
    scores: &[(String, f64)],
    threshold: f64,
) -> Result<Vec<FilterDecision>, FilterError> {
    if !threshold.is_finite() || threshold < 0.0 {
        return Err(FilterError::InvalidThreshold(threshold));
    }
    Ok(scores
        .iter()
        .map(|(asset_id, score)| FilterDecision {
            asset_id: asset_id.clone(),
            reason: if *score >= threshold {
                FilterReason::Kept
            } else {
                FilterReason::LowMotion { score: *score }
            },
        })
        .collect())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureRecord {
    asset_id: String,
    features: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackRecord {
    asset_id: String,
    trajectories: Vec<Trajectory>,
}

fn records<'a, T: serde::de::DeserializeOwned>(
    input: &'a str,
) -> impl Iterator<Item = Result<(usize, T), FilterError>> + 'a {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|r| (i + 1, r))
                .map_err(|e| FilterError::Record {
                    line: i + 1,
                    message: e.to_string(),
                })
        })
}

/// Parses line-delimited feature records, in file order.
pub fn parse_feature_records(input: &str) -> Result<Vec<FeatureVector>, FilterError> {
    records::<FeatureRecord>(input)
        .map(|r| {
            let (line, rec) = r?;
            FeatureVector::new(rec.asset_id, rec.features).map_err(|e| FilterError::Record {
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Parses line-delimited trajectory records into `(asset_id, trajectories)` pairs.
pub fn parse_track_records(input: &str) -> Result<Vec<(String, Vec<Trajectory>)>, FilterError> {
    records::<TrackRecord>(input)
        .map(|r| {
            let (line, rec) = r?;
            for t in &rec.trajectories {
                t.validate().map_err(|e| FilterError::Record {
                    line,
                    message: e.to_string(),
                })?;
            }
            Ok((rec.asset_id, rec.trajectories))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(id: &str, v: &[f64]) -> FeatureVector {
        FeatureVector::new(id, v.to_vec()).unwrap()
    }

    fn traj(p: &[(f64, f64)]) -> Trajectory {
        Trajectory::new(0, p.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&fv("a", &[1., 0.]), &fv("b", &[0., 1.])).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&fv("a", &[1., 0.]), &fv("b", &[1., 0.])).unwrap(), 1.0);
        let s = cosine_similarity(&fv("a", &[3., 4.]), &fv("b", &[4., 3.])).unwrap();
        assert!((s - 0.96).abs() < 1e-15);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&fv("a", &[1.]), &fv("b", &[1., 2.])),
            Err(FilterError::DimensionMismatch { left: 1, right: 2 })
        ));
        assert!(matches!(
            FeatureVector::new("z", vec![0.0, 0.0]),
            Err(FilterError::ZeroNorm { .. })
        ));
        let zero = FeatureVector {
            asset_id: "z".into(),
            values: vec![0.0, 0.0],
        };
        assert!(matches!(
            cosine_similarity(&zero, &fv("b", &[1., 2.])),
            Err(FilterError::ZeroNorm { .. })
        ));
        assert!(FeatureVector::new("n", vec![f64::NAN]).is_err());
    }

    #[test]
    fn dedup_orthogonal_all_kept() {
        let vs = [
            fv("a", &[1., 0., 0.]),
            fv("b", &[0., 1., 0.]),
            fv("c", &[0., 0., 1.]),
        ];
        assert!(dedup(&vs, 0.95).unwrap().iter().all(FilterDecision::kept));
    }

    #[test]
    fn dedup_identical_points_to_first() {
        let vs = [fv("a", &[1., 2.]), fv("b", &[1., 2.]), fv("c", &[1., 2.])];
        let d = dedup(&vs, 0.95).unwrap();
        assert!(d[0].kept());
        for x in &d[1..] {
            assert!(
                matches!(&x.reason, FilterReason::DuplicateOf { asset_id, .. } if asset_id == "a")
            );
        }
    }

    #[test]
    fn dedup_boundary_is_strict() {
        // similarity exactly 1.0 with threshold 1.0 is not "greater than".
        let vs = [fv("a", &[1., 0.]), fv("b", &[2., 0.])];
        assert!(dedup(&vs, 1.0).unwrap().iter().all(FilterDecision::kept));
        assert!(dedup(&vs, 0.0).is_err());
        assert!(dedup(&vs, 1.5).is_err());
    }

    #[test]
    fn displacement_examples() {
        assert_eq!(cumulative_displacement(&traj(&[(0., 0.), (3., 4.), (3., 4.)])), 5.0);
        assert_eq!(cumulative_displacement(&traj(&[(2., 2.); 7])), 0.0);
        assert_eq!(cumulative_displacement(&traj(&[(0., 0.), (1., 0.), (1., 1.)])), 2.0);
        assert_eq!(cumulative_displacement(&traj(&[(5., 5.)])), 0.0);
    }

    #[test]
    fn motion_score_examples() {
        let a = traj(&[(0., 0.), (3., 4.)]);
        let b = traj(&[(0., 0.), (1., 0.)]);
        assert_eq!(motion_score(&[a.clone(), b]).unwrap(), 3.0);
        assert_eq!(motion_score(std::slice::from_ref(&a)).unwrap(), cumulative_displacement(&a));
        assert_eq!(motion_score(&[traj(&[(1., 1.); 4]), traj(&[(3., 1.); 4])]).unwrap(), 0.0);
        assert_eq!(motion_score(&[]), Err(FilterError::EmptyTrajectorySet));
    }

    #[test]
    fn motion_filter_boundaries() {
        let d = motion_filter(&[("a".into(), 0.0)], 0.0).unwrap();
        assert!(d[0].kept());
        let d = motion_filter(&[("a".into(), 0.0)], 0.5).unwrap();
        assert_eq!(d[0].reason, FilterReason::LowMotion { score: 0.0 });
        assert!(motion_filter(&[], -1.0).is_err());
    }

    #[test]
    fn motion_filter_matches_comparison() {
        let scores: Vec<(String, f64)> = [0.0, 4.99, 5.0, 5.01, 100.0, 2.5]
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("a{i}"), *s))
            .collect();
        let d = motion_filter(&scores, 5.0).unwrap();
        let kept: Vec<bool> = d.iter().map(FilterDecision::kept).collect();
        assert_eq!(kept, vec![false, false, true, true, true, false]);
    }

    #[test]
    fn parses_records() {
        let feats = "{\"asset_id\":\"a\",\"features\":[1,0]}\n\n{\"asset_id\":\"b\",\"features\":[0,1]}\n";
        let v = parse_feature_records(feats).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[1].asset_id, "b");

        let tracks = r#"{"asset_id":"a","trajectories":[{"point_id":3,"positions":[[0,0],[3,4]]}]}"#;
        let t = parse_track_records(tracks).unwrap();
        assert_eq!(motion_score(&t[0].1).unwrap(), 5.0);

        let err = parse_feature_records("{\"asset_id\":\"a\",\"features\":[0,0]}").unwrap_err();
        assert!(matches!(err, FilterError::Record { line: 1, .. }));
        let err =
            parse_track_records(r#"{"asset_id":"a","trajectories":[{"point_id":1,"positions":[]}]}"#)
                .unwrap_err();
        assert!(matches!(err, FilterError::Record { line: 1, .. }));
    }

    fn vectors(n: usize, dim: usize) -> impl Strategy<Value = Vec<FeatureVector>> {
        proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, dim), n).prop_map(|vs| {
            vs.into_iter()
                .enumerate()
                .map(|(i, mut v)| {
                    v[0] += 2.0; // keeps norms away from zero
                    FeatureVector::new(format!("a{i}"), v).unwrap()
                })
                .collect()
        })
    }

    fn trajectories() -> impl Strategy<Value = Vec<Trajectory>> {
        proptest::collection::vec(
            proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..12),
            1..6,
        )
        .prop_map(|ts| {
            ts.into_iter()
                .enumerate()
                .map(|(i, p)| Trajectory::new(i as u32, p).unwrap())
                .collect()
        })
    }

    proptest! {
        #[test]
        fn dedup_partitions_and_points_backwards(vs in vectors(12, 3), thr in 0.5f64..0.99) {
            let d = dedup(&vs, thr).unwrap();
            prop_assert_eq!(d.len(), vs.len());
            for (i, dec) in d.iter().enumerate() {
                prop_assert_eq!(&dec.asset_id, &vs[i].asset_id);
                if let FilterReason::DuplicateOf { asset_id, .. } = &dec.reason {
                    let j = d.iter().position(|x| &x.asset_id == asset_id).unwrap();
                    prop_assert!(j < i);
                    prop_assert!(d[j].kept());
                }
            }
        }

        #[test]
        fn dedup_ignores_dropped_items(vs in vectors(12, 3), thr in 0.5f64..0.99) {
            let d = dedup(&vs, thr).unwrap();
            if let Some(drop) = d.iter().position(|x| !x.kept()) {
                let mut fewer = vs.clone();
                fewer.remove(drop);
                let mut expected = d.clone();
                expected.remove(drop);
                prop_assert_eq!(dedup(&fewer, thr).unwrap(), expected);
            }
        }

        #[test]
        fn motion_score_translation_and_scale(
            ts in trajectories(), dx in -50.0f64..50.0, dy in -50.0f64..50.0, lambda in 0.1f64..10.0,
        ) {
            let base = motion_score(&ts).unwrap();
            let moved: Vec<Trajectory> = ts.iter().map(|t| Trajectory {
                point_id: t.point_id,
                positions: t.positions.iter().map(|(x, y)| (x + dx, y + dy)).collect(),
            }).collect();
            let scaled: Vec<Trajectory> = ts.iter().map(|t| Trajectory {
                point_id: t.point_id,
                positions: t.positions.iter().map(|(x, y)| (x * lambda, y * lambda)).collect(),
            }).collect();
            let tol = 1e-9 * (1.0 + base);
            prop_assert!((motion_score(&moved).unwrap() - base).abs() <= tol * 100.0);
            prop_assert!((motion_score(&scaled).unwrap() - lambda * base).abs() <= tol * lambda * 10.0);
        }

        #[test]
        fn displacement_at_least_net(ts in trajectories()) {
            for t in &ts {
                let first = t.positions[0];
                let last = *t.positions.last().unwrap();
                let net = (last.0 - first.0).hypot(last.1 - first.1);
                prop_assert!(cumulative_displacement(t) >= net - 1e-9);
            }
        }
    }
}
