//! Plain-text landmark files: one point per line, three whitespace-separated
//! voxel coordinates, correspondence by line order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::LandmarkSet;

/// Parses landmark text. With `one_based`, 1 is subtracted from every
/// coordinate (DIR-Lab files count voxels from 1).
pub fn parse_landmarks(text: &str, spacing: [f64; 3], one_based: bool) -> Result<LandmarkSet> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::format(format!(
                "landmark line {}: expected 3 coordinates, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let mut p = [0.0; 3];
        for (a, f) in fields.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::format(format!("landmark line {}: malformed number '{f}'", lineno + 1)))?;
            p[a] = if one_based { v - 1.0 } else { v };
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(Error::format("no landmarks"));
    }
    LandmarkSet::new(points, spacing)
}

pub fn read_landmarks(path: impl AsRef<Path>, spacing: [f64; 3], one_based: bool) -> Result<LandmarkSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_landmarks(&text, spacing, one_based)
}

/// Writes 0-based coordinates with enough digits to read back exactly.
pub fn write_landmarks(set: &LandmarkSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for p in &set.points {
        writeln!(out, "{} {} {}", p[0], p[1], p[2]).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points() {
        let s = parse_landmarks("0 0 0\n3 4 0", [1.0; 3], false).unwrap();
        assert_eq!(s.points, vec![[0.0; 3], [3.0, 4.0, 0.0]]);
    }

    #[test]
    fn empty_is_error() {
        let err = parse_landmarks("", [1.0; 3], false).unwrap_err();
        assert!(err.to_string().contains("no landmarks"));
    }

    #[test]
    fn arity_and_number_errors() {
        assert!(parse_landmarks("1 2\n", [1.0; 3], false).is_err());
        assert!(parse_landmarks("1 2 x\n", [1.0; 3], false).is_err());
    }

    #[test]
    fn three_hundred_points_keep_order() {
        let text: String = (0..300).map(|i| format!("{i} {} {}\n", i * 2, i % 7)).collect();
        let s = parse_landmarks(&text, [1.0; 3], false).unwrap();
        assert_eq!(s.len(), 300);
        for (i, p) in s.points.iter().enumerate() {
            assert_eq!(p[0], i as f64);
        }
    }

    #[test]
    fn one_based_shift() {
        let s = parse_landmarks("1 1 1", [1.0; 3], true).unwrap();
        assert_eq!(s.points[0], [0.0; 3]);
    }
}
