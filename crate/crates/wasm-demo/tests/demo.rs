use mandible_cad_wasm::{DemoState, ObStage};

const PIXELS: usize = 256 * 256;

fn white(rgba: &[u8]) -> Vec<bool> {
    rgba.chunks(4).map(|p| p[0] == 255).collect()
}

#[test]
fn images_are_rgba_and_reproducible() {
    let a = DemoState::new(7, 10.0, 15.0, 0.02).unwrap();
    let b = DemoState::new(7, 10.0, 15.0, 0.02).unwrap();
    assert_eq!(a.image().len(), 4 * PIXELS);
    assert_eq!(a.image(), b.image());
    assert!(a.image().chunks(4).all(|p| p[3] == 255));
    let c = DemoState::new(8, 10.0, 15.0, 0.02).unwrap();
    assert_ne!(a.image(), c.image());
}

#[test]
fn candidate_view_finds_the_close_border_lesion() {
    let demo = DemoState::new(1, 10.0, 15.0, 0.02).unwrap();
    let (rgba, n) = demo.cb_candidates(5.0).unwrap();
    assert_eq!(n, 1);
    assert_ne!(rgba, demo.image());
    // A closing wider than the lesion fills it in.
    let (_, n) = demo.cb_candidates(15.0).unwrap();
    assert_eq!(n, 0);
}

#[test]
fn open_border_stages() {
    let demo = DemoState::new(2, 10.0, 15.0, 0.02).unwrap();
    let (det, n) = demo.ob_stage(ObStage::Detections, 30.0).unwrap();
    assert_eq!(n, 1);
    assert_ne!(det, demo.image());

    let (binary, _) = demo.ob_stage(ObStage::Binary, 30.0).unwrap();
    assert!(binary
        .chunks(4)
        .all(|p| p[..3] == [0, 0, 0] || p[..3] == [255, 255, 255]));
    let small = white(&demo.ob_stage(ObStage::SmallClosed, 30.0).unwrap().0);
    let large = white(&demo.ob_stage(ObStage::LargeClosed, 30.0).unwrap().0);
    assert!(small.iter().zip(&large).all(|(&s, &l)| !s || l));
    assert!(large.iter().filter(|&&l| l).count() > small.iter().filter(|&&s| s).count());

    // A 3 mm closing cannot bridge a 15 mm gap.
    let (_, n) = demo.ob_stage(ObStage::Detections, 3.0).unwrap();
    assert_eq!(n, 0);
}

#[test]
fn lesion_free_demo_and_far_slices_show_nothing() {
    let demo = DemoState::new(3, 0.0, 0.0, 0.02).unwrap();
    assert_eq!(demo.cb_candidates(5.0).unwrap().1, 0);
    assert_eq!(demo.ob_stage(ObStage::Detections, 30.0).unwrap().1, 0);

    let mut demo = DemoState::new(3, 8.0, 12.0, 0.02).unwrap();
    demo.set_slice(0).unwrap();
    assert_eq!(demo.slice_index(), 0);
    assert_eq!(demo.cb_candidates(5.0).unwrap().1, 0);
    assert_eq!(demo.ob_stage(ObStage::Detections, 30.0).unwrap().1, 0);
}

#[test]
fn bad_requests_are_errors() {
    let mut demo = DemoState::new(0, 10.0, 15.0, 0.02).unwrap();
    assert!(demo.set_slice(demo.n_slices()).is_err());
    assert!(ObStage::parse("closing").is_err());
    assert_eq!(
        ObStage::parse("large-closed").unwrap(),
        ObStage::LargeClosed
    );
    assert!(demo.cb_candidates(-1.0).is_err());
    assert!(DemoState::new(0, 60.0, 15.0, 0.02).is_err());
    assert!(DemoState::new(0, 10.0, 15.0, -0.5).is_err());
}
