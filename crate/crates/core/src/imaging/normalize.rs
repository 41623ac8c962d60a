use super::NormalizedSlice;
use crate::volume::GrayscaleSlice;

/// Linear min-max stretch of a 16-bit slice onto `0..=255`.
///
/// Rounds half up in exact integer arithmetic. A constant slice maps to zero.
pub fn normalize_slice(slice: &GrayscaleSlice) -> NormalizedSlice {
    let px = slice.pixels();
    let (lo, hi) = px
        .iter()
        .fold((u16::MAX, u16::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let out = if hi <= lo {
        vec![0u8; px.len()]
    } else {
        let den = u64::from(hi - lo);
        // Lookup over the occupied range is cheaper than a division per pixel.
        let lut: Vec<u8> = (0..=den)
            .map(|d| ((2 * 255 * d + den) / (2 * den)) as u8)
            .collect();
        px.iter().map(|&v| lut[usize::from(v - lo)]).collect()
    };
    NormalizedSlice::new(slice.width(), slice.height(), out)
        .expect("dimensions come from a valid slice")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn slice(pixels: Vec<u16>) -> GrayscaleSlice {
        GrayscaleSlice::new(16, 16, pixels).unwrap()
    }

    #[test]
    fn half_rounds_up() {
        let mut px = vec![100u16; 256];
        px[1] = 1100;
        px[2] = 600;
        let n = normalize_slice(&slice(px));
        assert_eq!(n.pixels()[2], 128);
        assert_eq!(n.pixels()[0], 0);
        assert_eq!(n.pixels()[1], 255);
    }

    #[test]
    fn constant_slice_is_black() {
        let n = normalize_slice(&slice(vec![4000; 256]));
        assert!(n.pixels().iter().all(|&p| p == 0));
    }

    proptest! {
        #[test]
        fn order_preserving(px in prop::collection::vec(any::<u16>(), 256)) {
            let n = normalize_slice(&slice(px.clone()));
            let lo = *px.iter().min().unwrap();
            let hi = *px.iter().max().unwrap();
            for i in 0..px.len() {
                for j in 0..px.len() {
                    if px[i] <= px[j] {
                        prop_assert!(n.pixels()[i] <= n.pixels()[j]);
                    }
                }
                if hi > lo {
                    // Matches the floating-point form of the stretch.
                    let exact = 255.0 * f64::from(px[i] - lo) / f64::from(hi - lo);
                    prop_assert!((f64::from(n.pixels()[i]) - exact).abs() <= 0.5 + 1e-9);
                }
            }
            if hi > lo {
                prop_assert_eq!(*n.pixels().iter().min().unwrap(), 0);
                prop_assert_eq!(*n.pixels().iter().max().unwrap(), 255);
            }
        }
    }
}
