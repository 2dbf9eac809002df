//! Jacquard-format dataset parsing.
//!
//! Expected per-scene layout (searched recursively): `<scene>_grasps.txt`
//! with one grasp per line `x;y;theta_degrees;opening;jaw_size`, a depth
//! render `<scene>_depth.png` (required) and an RGB render
//! `<scene>_RGB.png` (optional). The object identity is the part of the
//! scene id after its first underscore (Jacquard scene ids are
//! `<view>_<object-hash>`), falling back to the full scene id.

use super::{DataError, DatasetKind, ParseReport, SampleRecord};
use crate::grasp::GraspRectangle;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub fn parse_jacquard(dir: &Path) -> Result<ParseReport, DataError> {
    let mut grasp_files: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut depth_files: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut rgb_files: BTreeMap<String, PathBuf> = BTreeMap::new();
    visit_files(dir, &mut |path| {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            return;
        };
        if let Some(stem) = name.strip_suffix("_grasps.txt") {
            grasp_files.insert(stem.to_string(), path.to_path_buf());
        } else if let Some(stem) = name.strip_suffix("_depth.png") {
            depth_files.insert(stem.to_string(), path.to_path_buf());
        } else if let Some(stem) = name.strip_suffix("_RGB.png") {
            rgb_files.insert(stem.to_string(), path.to_path_buf());
        }
    })?;

    if grasp_files.is_empty() {
        return Err(DataError::EmptyDataset(dir.to_path_buf()));
    }

    let mut report = ParseReport::default();
    for (id, ann_path) in grasp_files {
        let Some(depth_path) = depth_files.get(&id) else {
            report.skipped_samples += 1;
            report.warnings.push(format!("{id}: missing depth render"));
            continue;
        };
        let (rects, skipped) = parse_grasp_lines(&ann_path)?;
        report.skipped_rectangles += skipped;
        if skipped > 0 {
            report
                .warnings
                .push(format!("{id}: skipped {skipped} malformed grasp line(s)"));
        }
        if rects.is_empty() {
            report.skipped_samples += 1;
            report
                .warnings
                .push(format!("{id}: no valid grasp lines"));
            continue;
        }
        let object_id = id
            .split_once('_')
            .map(|(_, obj)| obj.to_string())
            .unwrap_or_else(|| id.clone());
        report.records.push(SampleRecord {
            sample_id: id.clone(),
            object_id,
            rgb_path: rgb_files.get(&id).cloned(),
            depth_path: depth_path.clone(),
            grasp_rects: rects,
            source: DatasetKind::Jacquard,
        });
    }
    if report.records.is_empty() {
        return Err(DataError::EmptyDataset(dir.to_path_buf()));
    }
    Ok(report)
}

fn visit_files(dir: &Path, visit: &mut impl FnMut(&Path)) -> Result<(), DataError> {
    let entries = std::fs::read_dir(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| DataError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        paths.push(entry.path());
    }
    paths.sort();
    for path in paths {
        if path.is_dir() {
            visit_files(&path, visit)?;
        } else {
            visit(&path);
        }
    }
    Ok(())
}

/// Parses `x;y;theta_degrees;opening;jaw_size` lines. Duplicate lines are
/// deduplicated; malformed lines are skipped and counted.
fn parse_grasp_lines(path: &Path) -> Result<(Vec<GraspRectangle>, usize), DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut seen = std::collections::HashSet::new();
    let mut rects = Vec::new();
    let mut skipped = 0;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !seen.insert(line.to_string()) {
            continue;
        }
        let fields: Vec<&str> = line.split(';').collect();
        if fields.len() != 5 {
            skipped += 1;
            continue;
        }
        let parsed: Option<Vec<f64>> = fields
            .iter()
            .map(|f| f.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        let Some(v) = parsed else {
            skipped += 1;
            continue;
        };
        match GraspRectangle::new(v[0], v[1], v[2].to_radians(), v[3], v[4]) {
            Ok(r) => rects.push(r),
            Err(_) => skipped += 1,
        }
    }
    Ok((rects, skipped))
}
