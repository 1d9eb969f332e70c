//! Deterministic synthetic dataset: three 5-frame batches over a tilted
//! lawn with an H pad.
//!
//! - `batch_000`: a rubble patch (rough depth) and a person walking towards
//!   the pad. The rubble is only named after vocabulary refinement.
//! - `batch_001`: empty flat lawn.
//! - `batch_002`: a truck covering the whole view, so no zone is feasible.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use dropzone_core::agents::ScriptedVlm;
use dropzone_core::imgcore::save_png;
use dropzone_core::semantic::{BBox, StubDetection, StubShape};
use dropzone_core::BinaryMask;
use image::{ImageBuffer, Luma, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backends::StubScene;

pub const WIDTH: u32 = 96;
pub const HEIGHT: u32 = 72;
pub const FRAMES: usize = 15;

const PAD: [u32; 4] = [16, 40, 32, 56];
const RUBBLE: [u32; 4] = [60, 8, 84, 28];

fn inside(r: [u32; 4], x: u32, y: u32) -> bool {
    x >= r[0] && x < r[2] && y >= r[1] && y < r[3]
}

fn person_rect(frame: usize) -> [u32; 4] {
    let x = 70 - 6 * frame as u32;
    [x, 10, x + 8, 30]
}

fn frame_id(i: usize) -> String {
    format!("{i:05}")
}

fn rubble_frame(i: usize) -> bool {
    i < 5
}

fn truck_frame(i: usize) -> bool {
    i >= 10
}

fn rgb_frame(i: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    let mut img = RgbImage::from_fn(WIDTH, HEIGHT, |_, _| {
        let n: u8 = rng.random_range(0..24);
        Rgb([40 + n, 120 + n, 40 + n / 2])
    });
    for (x, y, p) in img.enumerate_pixels_mut() {
        if inside(PAD, x, y) {
            let (px, py) = (x - PAD[0], y - PAD[1]);
            let stroke = (3..13).contains(&py) && ((3..5).contains(&px) || (11..13).contains(&px))
                || (7..9).contains(&py) && (3..13).contains(&px);
            *p = if stroke { Rgb([30, 30, 30]) } else { Rgb([235, 235, 235]) };
        }
        if rubble_frame(i) && inside(RUBBLE, x, y) {
            let n: u8 = rng.random_range(0..60);
            *p = Rgb([90 + n, 80 + n, 70 + n]);
        }
        if i < 5 && inside(person_rect(i), x, y) {
            *p = Rgb([200, 60, 60]);
        }
        if truck_frame(i) {
            *p = Rgb([110, 110, 120]);
        }
    }
    img
}

fn depth_frame(i: usize, rng: &mut ChaCha8Rng) -> ImageBuffer<Luma<u16>, Vec<u16>> {
    ImageBuffer::from_fn(WIDTH, HEIGHT, |x, y| {
        let base = 20_000 + 40 * y as i32;
        let noise = if rubble_frame(i) && inside(RUBBLE, x, y) {
            rng.random_range(-3000..=3000)
        } else {
            0
        };
        Luma([(base + noise) as u16])
    })
}

fn gt_mask(i: usize) -> BinaryMask {
    BinaryMask::from_fn(WIDTH as usize, HEIGHT as usize, |x, y| {
        let (x, y) = (x as u32, y as u32);
        truck_frame(i) || rubble_frame(i) && (inside(RUBBLE, x, y) || inside(person_rect(i), x, y))
    })
    .expect("fixed non-zero size")
}

fn rect(r: [u32; 4]) -> [f64; 4] {
    r.map(f64::from)
}

/// Stub scene matching the generated frames.
pub fn stub_scene() -> StubScene {
    let mut shapes: Vec<StubShape> = (0..5)
        .map(|i| StubShape {
            class: "person".into(),
            rect: rect(person_rect(i)),
            confidence: 0.9,
            frames: Some(vec![frame_id(i)]),
        })
        .collect();
    shapes.push(StubShape {
        class: "rubble pile".into(),
        rect: rect(RUBBLE),
        confidence: 0.8,
        frames: Some((0..5).map(frame_id).collect()),
    });
    shapes.push(StubShape {
        class: "truck".into(),
        rect: [0.0, 0.0, WIDTH as f64, HEIGHT as f64],
        confidence: 0.95,
        frames: Some((10..15).map(frame_id).collect()),
    });
    let agent1 = vec![
        Some(
            r#"{"landing_pad_safe": true, "reasoning": "The pad is clear; a person walks towards it from the right and a rubble pile lies upper right.", "future_prediction": "The person may reach the pad soon.", "updated_prompt_list": ["person", "truck", "rubble pile"]}"#
                .to_string(),
        ),
        Some(
            "```json\n{\"landing_pad_safe\": false, \"reasoning\": \"Motion near the pad.\", \"future_prediction\": \"\", \"updated_prompt_list\": [\"person\", \"rubble pile\", \"truck\", \"Person\"]}\n```"
                .to_string(),
        ),
    ];
    let agent2 = vec![
        Some(r#"{"ranked": [{"index": 2, "reason": "Matches the preference and is fully safe."}, {"index": 40, "reason": "stale"}]}"#.to_string()),
        Some("I would pick the circle near the pad.".to_string()),
    ];
    StubScene {
        detection: StubDetection {
            shapes,
            hpad: Some(BBox {
                x: PAD[0] as f64,
                y: PAD[1] as f64,
                w: (PAD[2] - PAD[0]) as f64,
                h: (PAD[3] - PAD[1]) as f64,
            }),
        },
        vlm: ScriptedVlm { agent1, agent2 },
    }
}

pub const CONFIG_TOML: &str = r#"# Settings for the synthetic dataset. Depth gradients are measured on
# normalized depth, so the lawn tilt needs a tighter threshold than the
# default.
stride = 1
runs = 2
workers = 2
backend = "stub"
default_preference = "closest to the landing pad"

[flatness]
grad_threshold = 0.05
"#;

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data");
    s.push('\n');
    s
}

/// Writes the dataset into `root` (created if needed).
pub fn generate(root: &Path) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..FRAMES {
        let id = frame_id(i);
        save_png(&rgb_frame(i, &mut rng), &root.join("rgb").join(format!("{id}.png")))?;
        save_png(&depth_frame(i, &mut rng), &root.join("depth").join(format!("{id}.png")))?;
        if i % 5 == 4 {
            save_png(&gt_mask(i).to_gray_image(), &root.join("gt").join(format!("{id}.png")))?;
        }
    }
    let write = |name: &str, text: String| {
        fs::write(root.join(name), text).with_context(|| format!("writing {name}"))
    };
    write("stub.json", pretty(&stub_scene()))?;
    write(
        "prefs.json",
        pretty(&serde_json::json!({
            "batch_000": "top-right corner of the scene",
            "batch_001": "as far from the landing pad as possible",
        })),
    )?;
    write(
        "pad_truth.json",
        pretty(&serde_json::json!({"00004": true, "00009": true, "00014": false})),
    )?;
    write("config.toml", CONFIG_TOML.to_string())?;
    Ok(())
}
