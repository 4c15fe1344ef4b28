use std::io::Write;

use crate::imageio::RgbImage;

use super::{psnr, rcir, rgb_to_y, ssim, FeatureExtractor, MetricError};

/// Quality of one super-resolved image against its reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub psnr_db: f64,
    pub ssim: f64,
    pub rcir: f64,
}

/// Luma PSNR and SSIM of `sr` after cropping `border`, and RCIR against `bicubic`.
pub fn score(
    hr: &RgbImage,
    sr: &RgbImage,
    bicubic: &RgbImage,
    phi: &dyn FeatureExtractor,
    border: usize,
) -> Result<Scores, MetricError> {
    let (y_hr, y_sr) = (rgb_to_y(hr), rgb_to_y(sr));
    Ok(Scores {
        psnr_db: psnr(&y_hr, &y_sr, border)?,
        ssim: ssim(&y_hr, &y_sr, border)?,
        rcir: rcir(hr, sr, bicubic, phi)?,
    })
}

/// Component-wise mean; `None` for an empty slice.
pub fn mean_scores(all: &[Scores]) -> Option<Scores> {
    if all.is_empty() {
        return None;
    }
    let n = all.len() as f64;
    Some(Scores {
        psnr_db: all.iter().map(|s| s.psnr_db).sum::<f64>() / n,
        ssim: all.iter().map(|s| s.ssim).sum::<f64>() / n,
        rcir: all.iter().map(|s| s.rcir).sum::<f64>() / n,
    })
}

/// CSV with columns `image, psnr_db, ssim, rcir`.
pub fn write_report<W: Write>(out: W, rows: &[(String, Scores)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["image", "psnr_db", "ssim", "rcir"])?;
    for (name, s) in rows {
        w.write_record([name.clone(), s.psnr_db.to_string(), s.ssim.to_string(), s.rcir.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
