use super::{BinaryImage, NormalizedSlice};
use crate::error::{Error, Result};

pub fn histogram(image: &NormalizedSlice) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &p in image.pixels() {
        hist[usize::from(p)] += 1;
    }
    hist
}

/// Maximum-entropy (Kapur) threshold of an 8-bit image.
///
/// Background is `0..=t`, foreground `t+1..=255`. Returns the `t` maximizing
/// the sum of both class entropies (natural log); ties go to the smallest `t`.
pub fn kapur_threshold(image: &NormalizedSlice) -> Result<u8> {
    kapur_threshold_from_histogram(&histogram(image))
}

pub fn kapur_threshold_from_histogram(hist: &[u64; 256]) -> Result<u8> {
    let total: u64 = hist.iter().sum();
    let occupied = hist.iter().filter(|&&c| c > 0).count();
    if occupied < 2 {
        return Err(Error::DegenerateInput(
            "maximum-entropy threshold needs at least two distinct gray levels".into(),
        ));
    }
    let n = total as f64;
    let plogp = |c: u64| {
        if c == 0 {
            0.0
        } else {
            let p = c as f64 / n;
            p * p.ln()
        }
    };
    let total_plogp: f64 = hist.iter().map(|&c| plogp(c)).sum();

    // H_b(t) = ln P(t) - S(t)/P(t), H_f(t) = ln(1-P(t)) - (S_total - S(t))/(1-P(t))
    // where P and S are cumulative sums of p and p ln p.
    let mut best: Option<(u8, f64)> = None;
    let mut cum_count = 0u64;
    let mut cum_plogp = 0.0;
    for (t, &c) in hist.iter().enumerate().take(255) {
        cum_count += c;
        cum_plogp += plogp(c);
        if cum_count == 0 || cum_count == total {
            continue;
        }
        let pb = cum_count as f64 / n;
        let pf = (total - cum_count) as f64 / n;
        let h = pb.ln() - cum_plogp / pb + pf.ln() - (total_plogp - cum_plogp) / pf;
        if best.is_none_or(|(_, b)| h > b) {
            best = Some((t as u8, h));
        }
    }
    Ok(best.expect("two occupied bins guarantee a split").0)
}

/// Foreground where the pixel is strictly brighter than `threshold`.
pub fn binarize(image: &NormalizedSlice, threshold: u8) -> BinaryImage {
    let mask = image.pixels().iter().map(|&p| p > threshold).collect();
    BinaryImage::new(image.width(), image.height(), mask).expect("same dimensions")
}
