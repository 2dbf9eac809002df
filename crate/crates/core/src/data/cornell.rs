//! Cornell-format dataset parsing.
//!
//! Expected per-sample layout (searched recursively under the dataset
//! root): `pcdNNNNr.png` RGB image, a depth source (`pcdNNNNd.png` raster
//! or `pcdNNNN.txt` ASCII point cloud), and `pcdNNNNcpos.txt` holding the
//! positive rectangles as groups of four "x y" vertex lines. An optional
//! `object_ids.txt` at the root maps `sample_id object_id` per line; when
//! absent every sample is its own object.

use super::{DataError, DatasetKind, ParseReport, SampleRecord};
use crate::grasp::GraspRectangle;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub fn parse_cornell(dir: &Path) -> Result<ParseReport, DataError> {
    let mut annotation_files: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut rgb_files: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut depth_png: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut clouds: BTreeMap<String, PathBuf> = BTreeMap::new();
    visit_files(dir, &mut |path| {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            return;
        };
        if let Some(stem) = name.strip_suffix("cpos.txt") {
            annotation_files.insert(stem.to_string(), path.to_path_buf());
        } else if let Some(stem) = name.strip_suffix("r.png") {
            rgb_files.insert(stem.to_string(), path.to_path_buf());
        } else if let Some(stem) = name.strip_suffix("d.png") {
            depth_png.insert(stem.to_string(), path.to_path_buf());
        } else if let Some(stem) = name.strip_suffix(".txt") {
            if !stem.ends_with("cpos") && !stem.ends_with("cneg") && stem != "object_ids" {
                clouds.insert(stem.to_string(), path.to_path_buf());
            }
        }
    })?;

    let object_ids = read_object_ids(&dir.join("object_ids.txt"))?;

    let mut ids: Vec<String> = annotation_files
        .keys()
        .chain(rgb_files.keys())
        .cloned()
        .collect();
    ids.sort();
    ids.dedup();
    if ids.is_empty() {
        return Err(DataError::EmptyDataset(dir.to_path_buf()));
    }

    let mut report = ParseReport::default();
    for id in ids {
        let Some(ann_path) = annotation_files.get(&id) else {
            report.skipped_samples += 1;
            report
                .warnings
                .push(format!("{id}: missing positive-rectangle annotation file"));
            continue;
        };
        let depth_path = match depth_png.get(&id).or_else(|| clouds.get(&id)) {
            Some(p) => p.clone(),
            None => {
                report.skipped_samples += 1;
                report.warnings.push(format!("{id}: missing depth source"));
                continue;
            }
        };
        let (rects, skipped) = parse_cpos(ann_path)?;
        report.skipped_rectangles += skipped;
        if skipped > 0 {
            report
                .warnings
                .push(format!("{id}: skipped {skipped} malformed rectangle(s)"));
        }
        if rects.is_empty() {
            report.skipped_samples += 1;
            report
                .warnings
                .push(format!("{id}: no valid rectangles in annotation file"));
            continue;
        }
        let object_id = object_ids.get(&id).cloned().unwrap_or_else(|| id.clone());
        report.records.push(SampleRecord {
            sample_id: id.clone(),
            object_id,
            rgb_path: rgb_files.get(&id).cloned(),
            depth_path,
            grasp_rects: rects,
            source: DatasetKind::Cornell,
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

fn read_object_ids(path: &Path) -> Result<BTreeMap<String, String>, DataError> {
    let mut map = BTreeMap::new();
    if !path.exists() {
        return Ok(map);
    }
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        if let (Some(sample), Some(object)) = (parts.next(), parts.next()) {
            map.insert(sample.to_string(), object.to_string());
        }
    }
    Ok(map)
}

/// Parses groups of four "x y" vertex lines. Rectangles containing
/// non-finite vertices are skipped and counted.
fn parse_cpos(path: &Path) -> Result<(Vec<GraspRectangle>, usize), DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut vertices: Vec<[f64; 2]> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let x = parts.next().map(parse_coord).unwrap_or(f64::NAN);
        let y = parts.next().map(parse_coord).unwrap_or(f64::NAN);
        vertices.push([x, y]);
    }
    if vertices.len() % 4 != 0 {
        return Err(DataError::Parse {
            path: path.to_path_buf(),
            message: format!(
                "annotation has {} vertex lines, expected a multiple of 4",
                vertices.len()
            ),
        });
    }
    let mut rects = Vec::new();
    let mut skipped = 0;
    for quad in vertices.chunks_exact(4) {
        let quad: [[f64; 2]; 4] = [quad[0], quad[1], quad[2], quad[3]];
        match GraspRectangle::from_vertices(&quad, false) {
            Ok(r) => rects.push(r),
            Err(_) => skipped += 1,
        }
    }
    Ok((rects, skipped))
}

fn parse_coord(s: &str) -> f64 {
    s.parse::<f64>().unwrap_or(f64::NAN)
}
