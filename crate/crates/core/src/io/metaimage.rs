//! MetaImage (`.mha` / `.mhd`) subset reader and writer.
//!
//! Supported header keys, one `Key = Value` per line:
//! `ObjectType = Image`, `NDims = 3` (2 is accepted as depth 1),
//! `DimSize`, `ElementType` (`MET_UCHAR`, `MET_SHORT`, `MET_FLOAT`,
//! `MET_DOUBLE`), `ElementSpacing`, optional `Offset`, and
//! `ElementDataFile` which must come last. `LOCAL` means the raw payload
//! follows the header in the same file. Payloads are little-endian with x
//! varying fastest.
//!
//! A handful of keys ITK writes by default are tolerated when they carry
//! their neutral value (no compression, little-endian, identity direction).

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::volume::{Geometry, LabelVolume, ScalarVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    UChar,
    Short,
    Float,
    Double,
}

impl ElementType {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "MET_UCHAR" => Ok(Self::UChar),
            "MET_SHORT" => Ok(Self::Short),
            "MET_FLOAT" => Ok(Self::Float),
            "MET_DOUBLE" => Ok(Self::Double),
            other => Err(Error::format(format!("unsupported ElementType {other}"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::UChar => "MET_UCHAR",
            Self::Short => "MET_SHORT",
            Self::Float => "MET_FLOAT",
            Self::Double => "MET_DOUBLE",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Self::UChar => 1,
            Self::Short => 2,
            Self::Float => 4,
            Self::Double => 8,
        }
    }

    /// Smallest type that stores every value exactly.
    fn smallest_for(values: &[f64]) -> Self {
        let integral = values.iter().all(|v| v.fract() == 0.0);
        if integral && values.iter().all(|&v| (0.0..=255.0).contains(&v)) {
            Self::UChar
        } else if integral && values.iter().all(|&v| (-32768.0..=32767.0).contains(&v)) {
            Self::Short
        } else if values.iter().all(|&v| (v as f32) as f64 == v) {
            Self::Float
        } else {
            Self::Double
        }
    }

    fn decode(self, bytes: &[u8]) -> Vec<f64> {
        match self {
            Self::UChar => bytes.iter().map(|&b| b as f64).collect(),
            Self::Short => bytes
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64)
                .collect(),
            Self::Float => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect(),
            Self::Double => bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        }
    }

    fn encode(self, values: &[f64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(values.len() * self.size());
        for &v in values {
            match self {
                Self::UChar => out.push(v as u8),
                Self::Short => out.extend_from_slice(&(v as i16).to_le_bytes()),
                Self::Float => out.extend_from_slice(&(v as f32).to_le_bytes()),
                Self::Double => out.extend_from_slice(&v.to_le_bytes()),
            }
        }
        out
    }
}

#[derive(Default)]
struct Header {
    ndims: Option<usize>,
    dims: Option<Vec<usize>>,
    element_type: Option<ElementType>,
    spacing: Option<Vec<f64>>,
    offset: Option<Vec<f64>>,
    data_file: Option<String>,
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| Error::format(format!("bad value '{t}' for {key}")))
        })
        .collect()
}

fn expect_flag(key: &str, value: &str, neutral: &str) -> Result<()> {
    if value.eq_ignore_ascii_case(neutral) {
        Ok(())
    } else {
        Err(Error::format(format!("unsupported {key} = {value}")))
    }
}

/// Parses header lines; returns the header and the byte offset of the payload.
fn parse_header(bytes: &[u8]) -> Result<(Header, usize)> {
    let mut header = Header::default();
    let mut pos = 0;
    while pos < bytes.len() {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|e| pos + e)
            .unwrap_or(bytes.len());
        let line = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| Error::format("non-UTF-8 header line"))?
            .trim();
        pos = (end + 1).min(bytes.len());
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(format!("malformed header line '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "ObjectType" => expect_flag(key, value, "Image")?,
            "NDims" => {
                header.ndims = Some(
                    value
                        .parse()
                        .map_err(|_| Error::format(format!("bad NDims '{value}'")))?,
                )
            }
            "DimSize" => header.dims = Some(parse_list(key, value)?),
            "ElementType" => header.element_type = Some(ElementType::parse(value)?),
            "ElementSpacing" => header.spacing = Some(parse_list(key, value)?),
            "Offset" | "Origin" | "Position" => header.offset = Some(parse_list(key, value)?),
            "BinaryData" => expect_flag(key, value, "True")?,
            "BinaryDataByteOrderMSB" | "ElementByteOrderMSB" | "CompressedData" => expect_flag(key, value, "False")?,
            "ElementNumberOfChannels" => expect_flag(key, value, "1")?,
            "TransformMatrix" | "Orientation" | "Rotation" => {
                let m: Vec<f64> = parse_list(key, value)?;
                let n = (m.len() as f64).sqrt() as usize;
                let identity = n * n == m.len()
                    && m.iter()
                        .enumerate()
                        .all(|(i, &v)| v == if i / n == i % n { 1.0 } else { 0.0 });
                if !identity {
                    return Err(Error::format("non-identity direction cosines are not supported"));
                }
            }
            "CenterOfRotation" | "AnatomicalOrientation" | "Comment" => {}
            "ElementDataFile" => {
                header.data_file = Some(value.to_string());
                return Ok((header, pos));
            }
            other => return Err(Error::format(format!("unknown header key '{other}'"))),
        }
    }
    Err(Error::format("missing header key ElementDataFile"))
}

fn triple<T: Copy>(v: &[T], pad: T, key: &str, ndims: usize) -> Result<[T; 3]> {
    if v.len() != ndims {
        return Err(Error::format(format!("{key} has {} values, expected {ndims}", v.len())));
    }
    Ok([v[0], v[1], if ndims == 3 { v[2] } else { pad }])
}

/// Reads a MetaImage file into its geometry, stored element type and values.
pub fn read_metaimage(path: impl AsRef<Path>) -> Result<(Geometry, ElementType, Vec<f64>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, payload_at) = parse_header(&bytes)?;
    let missing = |k: &str| Error::format(format!("missing header key {k}"));
    let ndims = header.ndims.ok_or_else(|| missing("NDims"))?;
    if ndims != 2 && ndims != 3 {
        return Err(Error::format(format!("NDims must be 2 or 3, got {ndims}")));
    }
    let dims = triple(&header.dims.ok_or_else(|| missing("DimSize"))?, 1, "DimSize", ndims)?;
    let spacing = triple(
        &header.spacing.ok_or_else(|| missing("ElementSpacing"))?,
        1.0,
        "ElementSpacing",
        ndims,
    )?;
    let offset = match header.offset {
        Some(o) => triple(&o, 0.0, "Offset", ndims)?,
        None => [0.0; 3],
    };
    let element_type = header.element_type.ok_or_else(|| missing("ElementType"))?;
    let geom = Geometry::new(dims, spacing, offset)?;
    let data_file = header.data_file.expect("parse_header returns ElementDataFile");

    let external;
    let payload: &[u8] = if data_file == "LOCAL" {
        &bytes[payload_at..]
    } else {
        let raw: PathBuf = path.parent().unwrap_or(Path::new(".")).join(&data_file);
        external = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
        &external
    };
    let expected = geom.len() * element_type.size();
    if payload.len() != expected {
        return Err(Error::PayloadSize {
            expected,
            found: payload.len(),
        });
    }
    Ok((geom, element_type, element_type.decode(payload)))
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    let (geom, _, data) = read_metaimage(path)?;
    ScalarVolume::new(geom, data)
}

/// Reads a label map; every stored value must be a non-negative integer.
pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    let (geom, _, data) = read_metaimage(path)?;
    let labels = data
        .iter()
        .map(|&v| {
            if v.fract() == 0.0 && (0.0..=u16::MAX as f64).contains(&v) {
                Ok(v as u16)
            } else {
                Err(Error::format(format!("label value {v} is not a non-negative integer")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    LabelVolume::from_data(geom, labels)
}

fn write_metaimage(path: &Path, geom: &Geometry, element_type: ElementType, values: &[f64]) -> Result<()> {
    let g = geom;
    let separate = path.extension().map(|e| e.eq_ignore_ascii_case("mhd")).unwrap_or(false);
    let raw_name = path
        .with_extension("raw")
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data.raw".into());
    let header = format!(
        "ObjectType = Image\nNDims = 3\nDimSize = {} {} {}\nElementType = {}\n\
         ElementSpacing = {} {} {}\nOffset = {} {} {}\nElementDataFile = {}\n",
        g.dims[0],
        g.dims[1],
        g.dims[2],
        element_type.name(),
        g.spacing[0],
        g.spacing[1],
        g.spacing[2],
        g.origin[0],
        g.origin[1],
        g.origin[2],
        if separate { raw_name.as_str() } else { "LOCAL" },
    );
    let payload = element_type.encode(values);
    if separate {
        let raw = path.with_extension("raw");
        fs::write(&raw, &payload).map_err(|e| Error::io(&raw, e))?;
        fs::write(path, header.as_bytes()).map_err(|e| Error::io(path, e))
    } else {
        let mut bytes = header.into_bytes();
        bytes.extend_from_slice(&payload);
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

/// Writes a scalar volume using the smallest element type that holds every
/// value exactly, so reading it back is lossless.
pub fn write_volume(vol: &ScalarVolume, path: impl AsRef<Path>) -> Result<()> {
    let et = ElementType::smallest_for(vol.data());
    write_metaimage(path.as_ref(), vol.geometry(), et, vol.data())
}

pub fn write_labels(labels: &LabelVolume, path: impl AsRef<Path>) -> Result<()> {
    let max = labels.data().iter().copied().max().unwrap_or(0);
    let et = if max <= 255 {
        ElementType::UChar
    } else if max <= i16::MAX as u16 {
        ElementType::Short
    } else {
        return Err(Error::invalid(format!("label {max} exceeds MET_SHORT range")));
    };
    let values: Vec<f64> = labels.data().iter().map(|&v| v as f64).collect();
    write_metaimage(path.as_ref(), labels.geometry(), et, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn local_file(dir: &Path, name: &str, header: &str, payload: &[u8]) -> PathBuf {
        let p = dir.join(name);
        let mut bytes = header.as_bytes().to_vec();
        bytes.extend_from_slice(payload);
        fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn decodes_uchar_payload() {
        let dir = tempfile::tempdir().unwrap();
        let p = local_file(
            dir.path(),
            "a.mha",
            "ObjectType = Image\nNDims = 3\nDimSize = 2 2 1\nElementType = MET_UCHAR\n\
             ElementSpacing = 1 1 1\nElementDataFile = LOCAL\n",
            &[0, 1, 2, 3],
        );
        let v = read_volume(&p).unwrap();
        assert_eq!(v.data(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(v.geometry().origin, [0.0; 3]);
    }

    #[test]
    fn short_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = local_file(
            dir.path(),
            "a.mha",
            "ObjectType = Image\nNDims = 3\nDimSize = 4 4 4\nElementType = MET_UCHAR\n\
             ElementSpacing = 1 1 1\nElementDataFile = LOCAL\n",
            &[0u8; 63],
        );
        let err = read_volume(&p).unwrap_err();
        assert!(err.to_string().contains("payload size mismatch"), "{err}");
    }

    #[test]
    fn header_errors() {
        let dir = tempfile::tempdir().unwrap();
        let unknown = local_file(
            dir.path(),
            "u.mha",
            "ObjectType = Image\nNDims = 3\nDimSize = 1 1 1\nFancyKey = 3\n\
             ElementType = MET_UCHAR\nElementSpacing = 1 1 1\nElementDataFile = LOCAL\n",
            &[0],
        );
        assert!(read_volume(&unknown)
            .unwrap_err()
            .to_string()
            .contains("unknown header key"));
        let missing = local_file(
            dir.path(),
            "m.mha",
            "ObjectType = Image\nNDims = 3\nDimSize = 1 1 1\nElementSpacing = 1 1 1\n\
             ElementDataFile = LOCAL\n",
            &[0],
        );
        assert!(read_volume(&missing).unwrap_err().to_string().contains("ElementType"));
        let zero_spacing = local_file(
            dir.path(),
            "s.mha",
            "ObjectType = Image\nNDims = 3\nDimSize = 1 1 1\nElementType = MET_UCHAR\n\
             ElementSpacing = 1 0 1\nElementDataFile = LOCAL\n",
            &[0],
        );
        assert!(matches!(read_volume(&zero_spacing), Err(Error::Geometry(_))));
    }

    #[test]
    fn zero_volume_writes_one_byte_payload() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.mhd");
        write_volume(&ScalarVolume::filled(Geometry::unit([1, 1, 1]), 0.0), &p).unwrap();
        assert_eq!(fs::metadata(dir.path().join("z.raw")).unwrap().len(), 1);
        assert_eq!(read_volume(&p).unwrap().data(), &[0.0]);
    }

    #[test]
    fn small_labels_use_uchar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.mha");
        let l = LabelVolume::new(Geometry::unit([2, 2, 1]), vec![0, 1, 2, 3], 4).unwrap();
        write_labels(&l, &p).unwrap();
        let text = fs::read(&p).unwrap();
        let s = String::from_utf8_lossy(&text);
        assert!(s.contains("ElementType = MET_UCHAR"));
        assert_eq!(read_labels(&p).unwrap(), l);
    }

    #[test]
    fn random_volume_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = SplitMix64::new(11);
        let geom = Geometry::new([8, 8, 8], [0.7, 1.1, 2.5], [-3.25, 0.5, 10.0]).unwrap();
        let data: Vec<f64> = (0..geom.len()).map(|_| rng.normal() * 100.0).collect();
        let vol = ScalarVolume::new(geom, data).unwrap();
        for name in ["r.mha", "r.mhd"] {
            let p = dir.path().join(name);
            write_volume(&vol, &p).unwrap();
            let back = read_volume(&p).unwrap();
            assert_eq!(back, vol);
        }
    }
}
