//! IDX-format readers and writers (big-endian, magic 2051 for image
//! files and 2049 for label files).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

const IMAGE_MAGIC: u32 = 2051;
const LABEL_MAGIC: u32 = 2049;

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_be_bytes(b))
}

/// Loads paired image/label files; pixels scaled to [0,1], images
/// returned as h x w x 1 tensors.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Vec<(Tensor, u8)>> {
    let mut ir = BufReader::new(File::open(images_path)?);
    let magic = read_u32(&mut ir)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "bad image magic {magic} in {} (expected {IMAGE_MAGIC})",
            images_path.display()
        )));
    }
    let count = read_u32(&mut ir)? as usize;
    let h = read_u32(&mut ir)? as usize;
    let w = read_u32(&mut ir)? as usize;

    let mut lr = BufReader::new(File::open(labels_path)?);
    let lmagic = read_u32(&mut lr)?;
    if lmagic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "bad label magic {lmagic} in {} (expected {LABEL_MAGIC})",
            labels_path.display()
        )));
    }
    let lcount = read_u32(&mut lr)? as usize;
    if lcount != count {
        return Err(Error::Consistency(format!(
            "{count} images but {lcount} labels"
        )));
    }
    let mut pixels = vec![0u8; count * h * w];
    ir.read_exact(&mut pixels)?;
    let mut labels = vec![0u8; count];
    lr.read_exact(&mut labels)?;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let data: Vec<f64> = pixels[i * h * w..(i + 1) * h * w]
            .iter()
            .map(|&p| p as f64 / 255.0)
            .collect();
        out.push((Tensor::new(vec![h, w, 1], data)?, labels[i]));
    }
    Ok(out)
}

/// Writes images (values in [0,1], quantized to bytes) and labels as a
/// matching IDX pair.
pub fn write_idx(
    samples: &[(Tensor, u8)],
    images_path: &Path,
    labels_path: &Path,
) -> Result<()> {
    let (h, w) = match samples.first().map(|(t, _)| t.shape()) {
        Some([h, w, 1]) => (*h, *w),
        Some(s) => return Err(Error::Shape(format!("expected h x w x 1 images, got {s:?}"))),
        None => (0, 0),
    };
    let mut iw = BufWriter::new(File::create(images_path)?);
    iw.write_all(&IMAGE_MAGIC.to_be_bytes())?;
    iw.write_all(&(samples.len() as u32).to_be_bytes())?;
    iw.write_all(&(h as u32).to_be_bytes())?;
    iw.write_all(&(w as u32).to_be_bytes())?;
    for (t, _) in samples {
        for &v in t.data() {
            iw.write_all(&[(v * 255.0).round().clamp(0.0, 255.0) as u8])?;
        }
    }
    iw.flush()?;
    let mut lw = BufWriter::new(File::create(labels_path)?);
    lw.write_all(&LABEL_MAGIC.to_be_bytes())?;
    lw.write_all(&(samples.len() as u32).to_be_bytes())?;
    for (_, d) in samples {
        lw.write_all(&[*d])?;
    }
    lw.flush()?;
    Ok(())
}
