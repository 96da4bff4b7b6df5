//! Binary PGM (P5) and PPM (P6) readers and a PGM heatmap writer.
//!
//! Eight-bit channels are normalized to `[0,1]` on load. Heatmaps render an
//! [`ImportanceMap`] with intensity proportional to importance: the
//! max-importance pixel maps to full white and zero importance to black,
//! so the relative distribution survives the quantization.

use std::path::Path;

use crate::attribution::ImportanceMap;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

struct HeaderScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderScanner<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        HeaderScanner { bytes, pos: 0 }
    }

    /// Next whitespace-delimited token, skipping `#` comment lines.
    fn token(&mut self) -> Result<&'a str> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedImage("unexpected end of header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::MalformedImage("non-ASCII header".into()))
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.token()?;
        t.parse::<usize>()
            .map_err(|_| Error::MalformedImage(format!("expected a number, got '{t}'")))
    }

    /// Consume the single whitespace byte separating header and raster.
    fn raster(&mut self) -> Result<&'a [u8]> {
        if self.pos >= self.bytes.len() || !self.bytes[self.pos].is_ascii_whitespace() {
            return Err(Error::MalformedImage("missing raster separator".into()));
        }
        self.pos += 1;
        Ok(&self.bytes[self.pos..])
    }
}

fn read_netpbm(path: &Path, magic: &str, channels: usize) -> Result<Tensor> {
    let bytes = std::fs::read(path)?;
    let mut scan = HeaderScanner::new(&bytes);
    let found = scan.token()?;
    if found != magic {
        return Err(Error::MalformedImage(format!(
            "expected {magic} file, found magic '{found}'"
        )));
    }
    let width = scan.number()?;
    let height = scan.number()?;
    let maxval = scan.number()?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::MalformedImage(format!(
            "unsupported maxval {maxval}; this reader handles 8-bit images"
        )));
    }
    let raster = scan.raster()?;
    let expected = width * height * channels;
    if raster.len() < expected {
        return Err(Error::MalformedImage(format!(
            "raster holds {} bytes, expected {expected}",
            raster.len()
        )));
    }
    let scale = 1.0 / maxval as f64;
    let data: Vec<f64> = raster[..expected].iter().map(|&b| b as f64 * scale).collect();
    Tensor::new(vec![height, width, channels], data)
}

/// Read a binary PGM (P5) as an `[H, W, 1]` tensor in `[0, 1]`.
pub fn read_pgm(path: &Path) -> Result<Tensor> {
    read_netpbm(path, "P5", 1)
}

/// Read a binary PPM (P6) as an `[H, W, 3]` tensor in `[0, 1]`.
pub fn read_ppm(path: &Path) -> Result<Tensor> {
    read_netpbm(path, "P6", 3)
}

/// Read either format by magic number.
pub fn read_image(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path)?;
    let mut scan = HeaderScanner::new(&bytes);
    match scan.token()? {
        "P5" => read_pgm(path),
        "P6" => read_ppm(path),
        other => Err(Error::MalformedImage(format!(
            "unsupported image magic '{other}'"
        ))),
    }
}

/// Write an `[H, W]` or `[H, W, 1]` tensor of values in `[0, 1]` as binary PGM.
/// Values are clamped and quantized to 8 bits.
pub fn write_pgm(path: &Path, image: &Tensor) -> Result<()> {
    let (h, w) = match image.shape() {
        [h, w] => (*h, *w),
        [h, w, 1] => (*h, *w),
        other => {
            return Err(Error::InvalidShape(format!(
                "write_pgm expects [H,W] or [H,W,1], got {other:?}"
            )))
        }
    };
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(
        image
            .data()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Importance map as a grayscale image with intensity proportional to
/// score; an all-zero map renders black.
pub fn render_heatmap(map: &ImportanceMap) -> Tensor {
    let max = map.scores().iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    Tensor::new(
        vec![map.height(), map.width()],
        map.scores().iter().map(|s| s * scale).collect(),
    )
    .expect("heatmap shape")
}

/// Render and write a heatmap PGM in one step.
pub fn write_heatmap(path: &Path, map: &ImportanceMap) -> Result<()> {
    write_pgm(path, &render_heatmap(map))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("pathgrad-img-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn pgm_roundtrip() {
        let img = Tensor::new(vec![2, 3, 1], vec![0.0, 0.5, 1.0, 0.25, 0.75, 0.1]).unwrap();
        let path = tmp("roundtrip.pgm");
        write_pgm(&path, &img).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back.shape(), &[2, 3, 1]);
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-9, "{a} vs {b}");
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn pgm_header_comments_are_skipped() {
        let path = tmp("comment.pgm");
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0u8, 255u8]);
        std::fs::write(&path, bytes).unwrap();
        let img = read_pgm(&path).unwrap();
        assert_eq!(img.shape(), &[1, 2, 1]);
        assert_eq!(img.data(), &[0.0, 1.0]);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn short_raster_is_malformed() {
        let path = tmp("short.pgm");
        std::fs::write(&path, b"P5\n4 4\n255\n\x00\x01").unwrap();
        assert!(matches!(
            read_pgm(&path),
            Err(Error::MalformedImage(_))
        ));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn heatmap_scales_max_to_white() {
        let map = ImportanceMap::from_scores(1, 3, vec![0.0, 1.0, 4.0]).unwrap();
        let img = render_heatmap(&map);
        assert_eq!(img.data(), &[0.0, 0.25, 1.0]);
        let zero = ImportanceMap::from_scores(1, 2, vec![0.0, 0.0]).unwrap();
        assert_eq!(render_heatmap(&zero).data(), &[0.0, 0.0]);
    }

    #[test]
    fn ppm_reads_three_channels() {
        let path = tmp("rgb.ppm");
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 255, 0]);
        std::fs::write(&path, bytes).unwrap();
        let img = read_ppm(&path).unwrap();
        assert_eq!(img.shape(), &[1, 2, 3]);
        assert_eq!(img.get(&[0, 0, 0]), 1.0);
        assert_eq!(img.get(&[0, 1, 1]), 1.0);
        std::fs::remove_file(&path).ok();
    }
}
