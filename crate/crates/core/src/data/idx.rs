use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw IDX3 image tensor, one byte per pixel, row-major per image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Data(format!("{}: truncated header", path.display())))
}

fn check_magic(bytes: &[u8], want: u32, path: &Path) -> Result<()> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != want {
        return Err(Error::Data(format!("{}: magic number {magic:#010x}, expected {want:#010x}", path.display())));
    }
    Ok(())
}

fn check_len(bytes: &[u8], header: usize, body: usize, path: &Path) -> Result<()> {
    let want = header + body;
    if bytes.len() < want {
        return Err(Error::Data(format!("{}: truncated, {} bytes but header promises {want}", path.display(), bytes.len())));
    }
    Ok(())
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    check_magic(&bytes, IMAGES_MAGIC, path)?;
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let body = count * rows * cols;
    check_len(&bytes, 16, body, path)?;
    Ok(IdxImages { count, rows, cols, pixels: bytes[16..16 + body].to_vec() })
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    check_magic(&bytes, LABELS_MAGIC, path)?;
    let count = be_u32(&bytes, 4, path)? as usize;
    check_len(&bytes, 8, count, path)?;
    Ok(bytes[8..8 + count].to_vec())
}

pub fn write_idx_images(path: impl AsRef<Path>, images: &IdxImages) -> Result<()> {
    let path = path.as_ref();
    if images.pixels.len() != images.count * images.rows * images.cols {
        return Err(Error::DimensionMismatch { expected: images.count * images.rows * images.cols, got: images.pixels.len() });
    }
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGES_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    fs::write(path, out).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

/// MNIST images whose label is in `keep_classes`, pixels scaled to `[0, 1]`.
/// Classes are renumbered by ascending digit: keeping `{1, 7}` gives labels 0 and 1.
pub fn load_mnist_idx<T: Real>(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    keep_classes: &[u8],
) -> Result<Dataset<T>> {
    let mut keep: Vec<u8> = keep_classes.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Err(Error::Data("no MNIST classes selected".into()));
    }
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.count != labels.len() {
        return Err(Error::Data(format!("{} images but {} labels", images.count, labels.len())));
    }
    let dim = images.rows * images.cols;
    let scale = T::one() / T::lit(255.0);
    let mut features = Vec::new();
    let mut out_labels = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if let Ok(c) = keep.binary_search(&l) {
            out_labels.push(c);
            features.extend(images.pixels[i * dim..(i + 1) * dim].iter().map(|&p| T::lit(p as f64) * scale));
        }
    }
    if out_labels.is_empty() {
        return Err(Error::Data(format!("no MNIST samples with labels {keep:?}")));
    }
    Dataset::new(features, dim, out_labels, keep.iter().map(|d| d.to_string()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("trvqc-idx-{}-{name}", std::process::id()))
    }

    fn sample() -> (IdxImages, Vec<u8>) {
        let pixels: Vec<u8> = (0..5 * 2 * 3).map(|i| (i * 37 % 256) as u8).collect();
        (IdxImages { count: 5, rows: 2, cols: 3, pixels }, vec![0, 1, 2, 1, 0])
    }

    #[test]
    fn roundtrip() {
        let (img, lab) = sample();
        let (pi, pl) = (tmp("rt-img"), tmp("rt-lab"));
        write_idx_images(&pi, &img).unwrap();
        write_idx_labels(&pl, &lab).unwrap();
        assert_eq!(read_idx_images(&pi).unwrap(), img);
        assert_eq!(read_idx_labels(&pl).unwrap(), lab);
    }

    #[test]
    fn filtering_and_scaling() {
        let (img, lab) = sample();
        let (pi, pl) = (tmp("f-img"), tmp("f-lab"));
        write_idx_images(&pi, &img).unwrap();
        write_idx_labels(&pl, &lab).unwrap();
        let ds: Dataset<f64> = load_mnist_idx(&pi, &pl, &[1, 0]).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.num_features(), 6);
        assert_eq!(ds.labels(), &[0, 1, 1, 0]);
        assert_eq!(ds.sample(1)[0], img.pixels[6] as f64 / 255.0);
        let three: Dataset<f64> = load_mnist_idx(&pi, &pl, &[0, 1, 2]).unwrap();
        assert_eq!(three.class_count(), 3);
        assert!(load_mnist_idx::<f64>(&pi, &pl, &[]).is_err());
        assert!(load_mnist_idx::<f64>(&pi, &pl, &[9]).is_err());
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let (img, lab) = sample();
        let (pi, pl) = (tmp("b-img"), tmp("b-lab"));
        write_idx_images(&pi, &img).unwrap();
        write_idx_labels(&pl, &lab).unwrap();
        assert!(read_idx_labels(&pi).unwrap_err().to_string().contains("magic"));
        let mut bytes = fs::read(&pi).unwrap();
        bytes.truncate(bytes.len() - 1);
        fs::write(&pi, &bytes).unwrap();
        assert!(read_idx_images(&pi).unwrap_err().to_string().contains("truncated"));
        fs::write(&pi, [0u8, 0, 8]).unwrap();
        assert!(read_idx_images(&pi).is_err());
    }
}
