//! Image-wise and object-wise train/test splits.

use super::{DataError, SampleRecord, SplitMode};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::path::Path;

/// A disjoint, exhaustive train/test partition of sample ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Partitions records into train and test sets.
///
/// Image-wise mode partitions sample ids uniformly at random; object-wise
/// mode partitions object ids and lets every sample follow its object.
/// The test count is `floor(fraction * n + 0.5)` clamped to leave both
/// sides non-empty. Deterministic under `seed`.
pub fn make_splits(
    records: &[SampleRecord],
    mode: SplitMode,
    test_fraction: f64,
    seed: u64,
) -> Result<Split, DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::Split(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if records.len() < 2 {
        return Err(DataError::Split(
            "need at least 2 samples to split".into(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    match mode {
        SplitMode::ImageWise => {
            let mut ids: Vec<String> = records.iter().map(|r| r.sample_id.clone()).collect();
            ids.sort();
            ids.shuffle(&mut rng);
            let n_test = rounded_count(test_fraction, ids.len());
            let (test, train) = ids.split_at(n_test);
            Ok(sorted_split(train.to_vec(), test.to_vec()))
        }
        SplitMode::ObjectWise => {
            let mut objects: Vec<String> = records.iter().map(|r| r.object_id.clone()).collect();
            objects.sort();
            objects.dedup();
            if objects.len() < 2 {
                return Err(DataError::Split(format!(
                    "object-wise split needs at least 2 objects, found {}",
                    objects.len()
                )));
            }
            objects.shuffle(&mut rng);
            let n_test = rounded_count(test_fraction, objects.len());
            let test_objects: std::collections::HashSet<&String> =
                objects[..n_test].iter().collect();
            let mut train = Vec::new();
            let mut test = Vec::new();
            for r in records {
                if test_objects.contains(&r.object_id) {
                    test.push(r.sample_id.clone());
                } else {
                    train.push(r.sample_id.clone());
                }
            }
            Ok(sorted_split(train, test))
        }
    }
}

fn rounded_count(fraction: f64, n: usize) -> usize {
    let raw = (fraction * n as f64 + 0.5).floor() as usize;
    raw.clamp(1, n - 1)
}

fn sorted_split(mut train: Vec<String>, mut test: Vec<String>) -> Split {
    train.sort();
    test.sort();
    Split {
        train_ids: train,
        test_ids: test,
    }
}

/// Writes a line-oriented split file, one sample id per line.
pub fn write_split_file(path: &Path, ids: &[String]) -> Result<(), DataError> {
    let mut text = ids.join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_split_file(path: &Path) -> Result<Vec<String>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::DatasetKind;
    use super::*;
    use crate::grasp::GraspRectangle;

    fn records(n: usize, objects: usize) -> Vec<SampleRecord> {
        (0..n)
            .map(|i| SampleRecord {
                sample_id: format!("s{i:04}"),
                object_id: format!("o{:03}", i % objects),
                rgb_path: None,
                depth_path: std::path::PathBuf::from("unused"),
                grasp_rects: vec![GraspRectangle::new(1.0, 1.0, 0.0, 2.0, 1.0).unwrap()],
                source: DatasetKind::Cornell,
            })
            .collect()
    }

    #[test]
    fn image_wise_is_disjoint_exhaustive_deterministic() {
        let recs = records(885, 240);
        let a = make_splits(&recs, SplitMode::ImageWise, 0.1, 7).unwrap();
        let b = make_splits(&recs, SplitMode::ImageWise, 0.1, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train_ids.len() + a.test_ids.len(), 885);
        // floor(0.1 * 885 + 0.5) = 89
        assert!(a.test_ids.len() == 88 || a.test_ids.len() == 89);
        let overlap = a
            .train_ids
            .iter()
            .filter(|id| a.test_ids.contains(id))
            .count();
        assert_eq!(overlap, 0);
    }

    #[test]
    fn object_wise_keeps_objects_together() {
        let recs = records(10, 2);
        let split = make_splits(&recs, SplitMode::ObjectWise, 0.5, 3).unwrap();
        assert_eq!(split.test_ids.len(), 5);
        assert_eq!(split.train_ids.len(), 5);
        let object_of = |id: &String| {
            recs.iter()
                .find(|r| &r.sample_id == id)
                .unwrap()
                .object_id
                .clone()
        };
        let test_objects: std::collections::HashSet<String> =
            split.test_ids.iter().map(object_of).collect();
        let train_objects: std::collections::HashSet<String> =
            split.train_ids.iter().map(object_of).collect();
        assert_eq!(test_objects.len(), 1);
        assert!(test_objects.is_disjoint(&train_objects));
    }

    #[test]
    fn object_wise_needs_two_objects() {
        let recs = records(5, 1);
        assert!(make_splits(&recs, SplitMode::ObjectWise, 0.5, 0).is_err());
    }

    #[test]
    fn different_seeds_differ() {
        let recs = records(100, 10);
        let a = make_splits(&recs, SplitMode::ImageWise, 0.2, 1).unwrap();
        let b = make_splits(&recs, SplitMode::ImageWise, 0.2, 2).unwrap();
        assert_ne!(a.test_ids, b.test_ids);
    }

    #[test]
    fn bad_fraction_rejected() {
        let recs = records(10, 2);
        assert!(make_splits(&recs, SplitMode::ImageWise, 0.0, 0).is_err());
        assert!(make_splits(&recs, SplitMode::ImageWise, 1.0, 0).is_err());
    }

    #[test]
    fn split_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("split.txt");
        let ids = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        write_split_file(&path, &ids).unwrap();
        assert_eq!(read_split_file(&path).unwrap(), ids);
    }
}
