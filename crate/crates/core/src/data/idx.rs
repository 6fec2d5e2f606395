//! Big-endian IDX files (the MNIST container format) for small grayscale images.

use std::fs;
use std::path::Path;

use super::{Dataset, LabeledSample, Layout};
use crate::error::{DadaError, Result};

/// Unsigned-byte, three-dimensional (`n x h x w`).
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
/// Unsigned-byte, one-dimensional.
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    name: &'a str,
}

impl<'a> Reader<'a> {
    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or_else(|| {
            DadaError::Format(format!(
                "{}: truncated, wanted {n} bytes at offset {} of {}",
                self.name,
                self.pos,
                self.bytes.len()
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

fn pixel_to_unit(p: u8) -> f64 {
    f64::from(p) / 127.5 - 1.0
}

fn unit_to_pixel(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// Loads an image file and its label file. Pixels map to `[-1, 1]` via
/// `p / 127.5 - 1`; raw labels `0..k` become classes `1..=k`, with `k` one
/// more than the largest raw label.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let img_bytes = fs::read(images)?;
    let lbl_bytes = fs::read(labels)?;
    let mut img = Reader { bytes: &img_bytes, pos: 0, name: "images" };
    let mut lbl = Reader { bytes: &lbl_bytes, pos: 0, name: "labels" };

    let magic = img.u32()?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(DadaError::Format(format!("images: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let (n, h, w) = (img.u32()? as usize, img.u32()? as usize, img.u32()? as usize);

    let magic = lbl.u32()?;
    if magic != IDX_LABELS_MAGIC {
        return Err(DadaError::Format(format!("labels: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let n_labels = lbl.u32()? as usize;
    if n_labels != n {
        return Err(DadaError::Format(format!("{n} images but {n_labels} labels")));
    }
    let pixels = img.take(n.checked_mul(h * w).ok_or_else(|| DadaError::Format("image count overflow".into()))?)?;
    let raw_labels = lbl.take(n)?;
    if img.pos != img_bytes.len() || lbl.pos != lbl_bytes.len() {
        return Err(DadaError::Format("trailing bytes after IDX payload".into()));
    }
    let k = raw_labels.iter().copied().max().map_or(0, |m| usize::from(m) + 1);
    let samples = pixels
        .chunks(h * w)
        .zip(raw_labels)
        .map(|(px, &y)| LabeledSample { x: px.iter().map(|&p| pixel_to_unit(p)).collect(), y: usize::from(y) + 1 })
        .collect();
    Dataset::new(samples, k, Layout::Grid { h, w, c: 1 })
}

/// Writes a single-channel grid dataset as an IDX image/label pair.
pub fn save_idx(d: &Dataset, images: &Path, labels: &Path) -> Result<()> {
    let Layout::Grid { h, w, c: 1 } = d.layout() else {
        return Err(DadaError::Config("IDX output needs single-channel grid data".into()));
    };
    if d.k() > 256 {
        return Err(DadaError::Config("IDX labels are single bytes".into()));
    }
    let mut img = Vec::with_capacity(16 + d.len() * h * w);
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for v in [d.len(), h, w] {
        img.extend_from_slice(&(v as u32).to_be_bytes());
    }
    img.extend(d.samples().iter().flat_map(|s| s.x.iter().map(|&v| unit_to_pixel(v))));
    let mut lbl = Vec::with_capacity(8 + d.len());
    lbl.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lbl.extend_from_slice(&(d.len() as u32).to_be_bytes());
    lbl.extend(d.samples().iter().map(|s| (s.y - 1) as u8));
    fs::write(images, img)?;
    fs::write(labels, lbl)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(dir: &Path, pixels: &[u8], labels: &[u8], h: u32, w: u32) -> (std::path::PathBuf, std::path::PathBuf) {
        let mut img = vec![0, 0, 8, 3];
        for v in [labels.len() as u32, h, w] {
            img.extend_from_slice(&v.to_be_bytes());
        }
        img.extend_from_slice(pixels);
        let mut lbl = vec![0, 0, 8, 1];
        lbl.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        lbl.extend_from_slice(labels);
        let (ip, lp) = (dir.join("img.idx"), dir.join("lbl.idx"));
        fs::write(&ip, img).unwrap();
        fs::write(&lp, lbl).unwrap();
        (ip, lp)
    }

    #[test]
    fn rescale_endpoints() {
        assert_eq!(pixel_to_unit(0), -1.0);
        assert_eq!(pixel_to_unit(255), 1.0);
        for p in 0..=255u8 {
            assert_eq!(unit_to_pixel(pixel_to_unit(p)), p);
        }
    }

    #[test]
    fn two_image_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let pixels = [0, 255, 17, 128, 3, 4, 250, 1];
        let (ip, lp) = fixture(dir.path(), &pixels, &[2, 0], 2, 2);
        let d = load_idx(&ip, &lp).unwrap();
        assert_eq!(d.k(), 3);
        assert_eq!(d.labels(), vec![3, 1]);
        assert_eq!(d.layout(), Layout::Grid { h: 2, w: 2, c: 1 });
        let back: Vec<u8> = d.samples().iter().flat_map(|s| s.x.iter().map(|&v| unit_to_pixel(v))).collect();
        assert_eq!(back, pixels);

        let (ip2, lp2) = (dir.path().join("a"), dir.path().join("b"));
        save_idx(&d, &ip2, &lp2).unwrap();
        assert_eq!(fs::read(&ip2).unwrap(), fs::read(&ip).unwrap());
        assert_eq!(fs::read(&lp2).unwrap(), fs::read(&lp).unwrap());
    }

    #[test]
    fn wrong_magic_reports_observed_value() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path(), &[0; 4], &[0], 2, 2);
        let err = load_idx(&lp, &ip).unwrap_err();
        assert!(matches!(&err, DadaError::Format(m) if m.contains("0x00000801")), "{err}");
    }

    #[test]
    fn truncated_and_mismatched_files() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path(), &[0; 8], &[0, 1], 2, 2);
        let bytes = fs::read(&ip).unwrap();
        fs::write(&ip, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(DadaError::Format(_))));
        fs::write(&ip, &bytes[..6]).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(DadaError::Format(_))));

        let (ip, lp) = fixture(dir.path(), &[0; 8], &[0, 1], 2, 2);
        let mut lbl = fs::read(&lp).unwrap();
        lbl[7] = 3;
        lbl.push(0);
        fs::write(&lp, lbl).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(DadaError::Format(_))));
    }
}
