//! Library-level composition: depth and detections to a ranked shortlist.

use dropzone_core::agents::{
    build_agent1_request, consult_agent1, rank_zones, refine_vocabulary, Agent1Mode, AgentRole, CallContext,
    RankingSource, ScriptedVlm,
};
use dropzone_core::flatness::{flatness_mask, gradient_unsafe, normalize_depth};
use dropzone_core::fusion::{fuse_map, render_overlay, Provenance};
use dropzone_core::semantic::{detect_and_binarize, BBox, FrameRef, StubDetection, StubShape};
use dropzone_core::zones::generate_candidates;
use dropzone_core::{FlatnessParams, PromptVocabulary, ScalarGrid, ZoneParams};
use image::{GrayImage, Luma, Rgb, RgbImage};

const W: usize = 160;
const H: usize = 120;

fn shape(class: &str, rect: [f64; 4]) -> StubShape {
    StubShape { class: class.into(), rect, confidence: 0.9, frames: None }
}

/// Gentle ramp with a deep pit in the lower right quadrant.
fn depth() -> ScalarGrid {
    ScalarGrid::from_fn(W, H, |x, y| {
        let pit = (110..150).contains(&x) && (70..110).contains(&y);
        0.2 * y as f64 + if pit { 80.0 } else { 0.0 }
    })
    .unwrap()
}

#[test]
fn refined_vocabulary_shrinks_the_safe_area_and_ranking_respects_it() {
    let params = FlatnessParams { grad_threshold: 0.02, ..FlatnessParams::default() };
    let flat = flatness_mask(&normalize_depth(&depth(), params.epsilon).unwrap(), &params).unwrap();
    let geometric = gradient_unsafe(&flat);
    assert!((100..120).any(|x| geometric.get(x, 90)), "pit edge should be unsafe");
    assert!(!geometric.get(40, 40));

    let detector = StubDetection {
        shapes: vec![shape("car", [0.0, 0.0, 40.0, 30.0]), shape("tree", [60.0, 0.0, 100.0, 50.0])],
        hpad: Some(BBox { x: 10.0, y: 60.0, w: 12.0, h: 16.0 }),
    };
    let rgb = RgbImage::from_pixel(W as u32, H as u32, Rgb([90, 110, 90]));
    let frame = FrameRef { id: "00004", image: &rgb };

    let prior = PromptVocabulary::new(["car"]);
    let semantic = detect_and_binarize(&detector, frame, &prior, 0.5).unwrap();
    let initial = fuse_map(&semantic, &geometric, Provenance::Initial).unwrap();
    assert!(initial.unsafe_mask.get(5, 5) && !initial.unsafe_mask.get(80, 20));

    let frames = vec![rgb.clone(); 5];
    let depths = vec![GrayImage::from_pixel(W as u32, H as u32, Luma([128])); 5];
    let overlay = render_overlay(&rgb, &initial).unwrap();
    let request = build_agent1_request(&frames, &depths, &overlay, &prior, Agent1Mode::MultiFrame).unwrap();
    let vlm = ScriptedVlm::new(
        r#"{"landing_pad_safe": true, "reasoning": "clear", "future_prediction": "stays clear",
            "updated_prompt_list": ["car", "tree"]}"#.to_string(),
        r#"{"ranked": [{"index": 1, "reason": "near the pad"}]}"#.to_string(),
    );
    let outcome = consult_agent1(&vlm, &CallContext::new("batch_000", AgentRole::Agent1, 0), &request);
    assert!(outcome.error.is_none(), "{:?}", outcome.error);
    let refined_vocab = refine_vocabulary(&prior, outcome.verdict.as_ref());
    assert_eq!(refined_vocab.classes(), ["car", "tree"]);

    let semantic = detect_and_binarize(&detector, frame, &refined_vocab, 0.5).unwrap();
    let refined = fuse_map(&semantic, &geometric, Provenance::Refined).unwrap();
    assert!(refined.unsafe_mask.count_ones() > initial.unsafe_mask.count_ones());
    assert!(initial.unsafe_mask.and(&refined.unsafe_mask).unwrap() == initial.unsafe_mask);

    let zp = ZoneParams::default();
    let candidates = generate_candidates(&refined, &zp, detector.hpad).unwrap();
    assert!(!candidates.is_empty());
    // H pad 12x16 gives radius 10.
    assert!(candidates.iter().all(|c| c.radius == 10.0 && c.safe_ratio >= zp.eta));
    assert!(candidates.windows(2).all(|p| p[0].safe_ratio >= p[1].safe_ratio));
    assert_eq!(candidates.iter().map(|c| c.index).collect::<Vec<_>>(), (0..candidates.len()).collect::<Vec<_>>());

    let ctx = CallContext::new("batch_000", AgentRole::Agent2, 0);
    let ranking = rank_zones(&vlm, &ctx, &candidates, "near the pad", &frames, &overlay, zp.top_n).unwrap();
    assert_eq!(ranking.zones.len(), zp.top_n.min(candidates.len()));
    assert_eq!(ranking.zones[0].index, 1);
    assert_eq!(ranking.source, RankingSource::Mixed);
}
