use super::BinaryImage;

/// Which pixels form the components being labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Foreground,
    Background,
}

/// An 8-connected region.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub label: u32,
    pub area_px: usize,
    /// Mean (x, y) of the member pixels.
    pub centroid: (f64, f64),
    /// Inclusive `(x_min, y_min, x_max, y_max)`.
    pub bbox: (usize, usize, usize, usize),
    pub pixels: Vec<(u32, u32)>,
}

impl Blob {
    fn from_pixels(label: u32, pixels: Vec<(u32, u32)>) -> Self {
        let n = pixels.len() as f64;
        let (mut sx, mut sy) = (0.0, 0.0);
        let mut bbox = (usize::MAX, usize::MAX, 0, 0);
        for &(x, y) in &pixels {
            sx += f64::from(x);
            sy += f64::from(y);
            let (x, y) = (x as usize, y as usize);
            bbox = (bbox.0.min(x), bbox.1.min(y), bbox.2.max(x), bbox.3.max(y));
        }
        Self {
            label,
            area_px: pixels.len(),
            centroid: (sx / n, sy / n),
            bbox,
            pixels,
        }
    }
}

const NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Labels 8-connected components of the pixels selected by `selected`.
/// Components are found in raster order of their first pixel.
fn label_components(width: usize, height: usize, selected: &[bool]) -> Vec<Vec<(u32, u32)>> {
    let mut seen = vec![false; width * height];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..width * height {
        if !selected[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            let (x, y) = (i % width, i / width);
            members.push((x as u32, y as u32));
            for (dx, dy) in NEIGHBORS {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                    continue;
                }
                let j = ny as usize * width + nx as usize;
                if selected[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        out.push(members);
    }
    out
}

fn into_blobs(components: Vec<Vec<(u32, u32)>>) -> Vec<Blob> {
    let mut blobs: Vec<Blob> = components
        .into_iter()
        .enumerate()
        .map(|(i, px)| Blob::from_pixels(i as u32 + 1, px))
        .collect();
    blobs.sort_by_key(|b| std::cmp::Reverse(b.area_px));
    blobs
}

/// 8-connected components, largest first.
pub fn connected_components(image: &BinaryImage, polarity: Polarity) -> Vec<Blob> {
    let selected: Vec<bool> = match polarity {
        Polarity::Foreground => image.mask().to_vec(),
        Polarity::Background => image.mask().iter().map(|&m| !m).collect(),
    };
    into_blobs(label_components(image.width(), image.height(), &selected))
}

/// Background pixels that cannot reach the image border through background.
pub fn hole_mask(image: &BinaryImage) -> BinaryImage {
    let (w, h) = (image.width(), image.height());
    let mask = image.mask();
    let mut reached = vec![false; w * h];
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let on_border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            let i = y * w + x;
            if on_border && !mask[i] && !reached[i] {
                reached[i] = true;
                stack.push(i);
            }
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = (i % w, i / w);
        for (dx, dy) in NEIGHBORS {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if !mask[j] && !reached[j] {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    let holes = mask
        .iter()
        .zip(&reached)
        .map(|(&fg, &r)| !fg && !r)
        .collect();
    BinaryImage::new(w, h, holes).expect("same shape")
}

/// Enclosed dark regions, largest first.
pub fn extract_holes(image: &BinaryImage) -> Vec<Blob> {
    connected_components(&hole_mask(image), Polarity::Foreground)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring(cx: f64, cy: f64, r_in: f64, r_out: f64) -> impl Fn(usize, usize) -> bool {
        move |x, y| {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            d >= r_in && d <= r_out
        }
    }

    #[test]
    fn two_squares() {
        let img = BinaryImage::from_fn(40, 30, |x, y| {
            ((2..12).contains(&x) || (20..30).contains(&x)) && (5..15).contains(&y)
        });
        let blobs = connected_components(&img, Polarity::Foreground);
        assert_eq!(blobs.len(), 2);
        assert!(blobs.iter().all(|b| b.area_px == 100));
        assert_eq!(blobs[0].centroid, (6.5, 9.5));
        assert_eq!(blobs[0].bbox, (2, 5, 11, 14));
    }

    #[test]
    fn empty_and_diagonal() {
        assert!(connected_components(&BinaryImage::empty(16, 16), Polarity::Foreground).is_empty());
        let diag = BinaryImage::from_fn(16, 16, |x, y| x == y);
        assert_eq!(connected_components(&diag, Polarity::Foreground).len(), 1);
    }

    #[test]
    fn ring_encloses_one_hole() {
        let f = ring(32.0, 32.0, 10.0, 14.0);
        let img = BinaryImage::from_fn(64, 64, f);
        let holes = extract_holes(&img);
        assert_eq!(holes.len(), 1);
        let (cx, cy) = holes[0].centroid;
        assert!((cx - 32.0).abs() < 1e-9 && (cy - 32.0).abs() < 1e-9);
    }

    #[test]
    fn edge_touching_region_is_not_a_hole() {
        // A U shape open to the top edge.
        let img = BinaryImage::from_fn(32, 32, |x, y| {
            (y <= 20 && (x == 5 || x == 25)) || (y == 20 && (5..=25).contains(&x))
        });
        assert!(extract_holes(&img).is_empty());
    }

    #[test]
    fn two_rings_two_holes() {
        let a = ring(15.0, 15.0, 5.0, 8.0);
        let b = ring(45.0, 20.0, 5.0, 8.0);
        let img = BinaryImage::from_fn(64, 40, |x, y| a(x, y) || b(x, y));
        let mut holes = extract_holes(&img);
        assert_eq!(holes.len(), 2);
        holes.sort_by(|p, q| p.centroid.0.total_cmp(&q.centroid.0));
        assert!((holes[0].centroid.0 - 15.0).abs() < 1e-9);
        assert!((holes[1].centroid.0 - 45.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn component_and_hole_invariants(m in prop::collection::vec(prop::bool::weighted(0.55), 20 * 18)) {
            let img = BinaryImage::new(20, 18, m).unwrap();
            let blobs = connected_components(&img, Polarity::Foreground);
            prop_assert_eq!(blobs.iter().map(|b| b.area_px).sum::<usize>(), img.count());
            for w in blobs.windows(2) {
                prop_assert!(w[0].area_px >= w[1].area_px);
            }
            for b in &blobs {
                let (x0, y0, x1, y1) = b.bbox;
                prop_assert!(b.centroid.0 >= x0 as f64 && b.centroid.0 <= x1 as f64);
                prop_assert!(b.centroid.1 >= y0 as f64 && b.centroid.1 <= y1 as f64);
            }

            let holes = hole_mask(&img);
            for y in 0..18 {
                for x in 0..20 {
                    if holes.get(x, y) {
                        prop_assert!(!img.get(x, y));
                        prop_assert!(x > 0 && y > 0 && x < 19 && y < 17);
                        // No 8-neighbor is border-reachable background.
                        for (dx, dy) in NEIGHBORS {
                            let (nx, ny) = ((x as isize + dx) as usize, (y as isize + dy) as usize);
                            prop_assert!(img.get(nx, ny) || holes.get(nx, ny));
                        }
                    }
                }
            }
        }
    }
}
