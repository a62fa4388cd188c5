//! Regenerates the bundled synthetic walkthrough:
//!
//! ```text
//! cargo run -p wayfinder-core --example make_corpus -- crates/core/corpus/synthetic-walk
//! ```
//!
//! Writes 20 grey 640×480 JPEG frames 500 ms apart with coloured sign
//! plates, the stub script describing what a detector would report for
//! each, the manifest, and the labels. Script and labels come from the same
//! table below so they cannot drift apart.

use std::fs;
use std::path::PathBuf;

use image::{Rgb, RgbImage};
use serde_json::{json, Value};
use wayfinder_core::config::CalibrationConfig;
use wayfinder_core::eval::recording::{frame_file_name, Manifest, ManifestFrame, FRAMES_DIR};
use wayfinder_core::interpret::ImageDims;
use wayfinder_core::perception::{EXIT_SIGN_QUESTION, SUMMARY_QUESTION};

const FRAMES: u64 = 20;
const PERIOD_MS: u64 = 500;
const W: u32 = 640;
const H: u32 = 480;

struct Plate {
    text: &'static str,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    colour: [u8; 3],
}

struct Scene {
    seq: u64,
    plates: Vec<Plate>,
    answers: Vec<(&'static str, &'static str, f64)>,
    /// (class, direction) ground truth
    cues: Vec<(&'static str, &'static str)>,
    caution: bool,
    expected_texts: Vec<&'static str>,
}

fn plate(text: &'static str, x0: f64, y0: f64, x1: f64, y1: f64, colour: [u8; 3]) -> Plate {
    Plate {
        text,
        x0,
        y0,
        x1,
        y1,
        colour,
    }
}

const GREEN: [u8; 3] = [20, 140, 60];
const BLUE: [u8; 3] = [30, 70, 170];
const YELLOW: [u8; 3] = [220, 180, 20];
const BROWN: [u8; 3] = [120, 80, 40];

fn scenes() -> Vec<Scene> {
    let stairs = |seq, h: f64, first: bool| Scene {
        seq,
        plates: vec![plate("STAIRS", 260.0, 120.0, 380.0, 120.0 + h, YELLOW)],
        answers: vec![],
        cues: vec![("STAIRS", "ahead")],
        caution: first,
        expected_texts: if first {
            vec!["Caution: stairs approaching in 5 steps"]
        } else {
            vec![]
        },
    };
    vec![
        // exit in the right third, 50 px tall: 800 * 0.19 / 50 = 3.04 m
        Scene {
            seq: 3,
            plates: vec![plate("EXIT", 480.0, 150.0, 600.0, 200.0, GREEN)],
            answers: vec![(EXIT_SIGN_QUESTION, "yes", 0.9)],
            cues: vec![("EXIT_DOOR", "right")],
            caution: false,
            expected_texts: vec!["There's an exit door 10 feet ahead on your right"],
        },
        // same sign one step closer: a repeat, not spoken again
        Scene {
            seq: 4,
            plates: vec![plate("EXIT", 470.0, 148.0, 600.0, 200.0, GREEN)],
            answers: vec![(EXIT_SIGN_QUESTION, "yes", 0.9)],
            cues: vec![("EXIT_DOOR", "right")],
            caution: false,
            expected_texts: vec![],
        },
        Scene {
            seq: 7,
            plates: vec![plate("ELEVATOR", 40.0, 200.0, 180.0, 230.0, BLUE)],
            answers: vec![],
            cues: vec![("ELEVATOR", "left")],
            caution: false,
            expected_texts: vec!["There's an elevator 13 feet ahead on your left"],
        },
        // 800 * 0.15 / 35 = 3.43 m = 4.9 steps; later frames stay within 20%
        stairs(9, 35.0, true),
        stairs(10, 37.0, false),
        stairs(11, 39.0, false),
        stairs(12, 41.0, false),
        // the VQA model misreads the exit as a stop sign with less
        // confidence than the exact text match
        Scene {
            seq: 15,
            plates: vec![plate("EXIT", 60.0, 160.0, 160.0, 200.0, GREEN)],
            answers: vec![(EXIT_SIGN_QUESTION, "no, it is a stop sign", 0.6)],
            cues: vec![("EXIT_DOOR", "left")],
            caution: false,
            expected_texts: vec!["There's an exit door 12 feet ahead on your left"],
        },
        Scene {
            seq: 16,
            plates: vec![],
            answers: vec![(SUMMARY_QUESTION, "a person standing in a hallway", 0.8)],
            cues: vec![("OBSTACLE", "ahead")],
            caution: true,
            expected_texts: vec!["Caution: obstacle straight ahead"],
        },
        Scene {
            seq: 20,
            plates: vec![plate("DOOR", 500.0, 220.0, 580.0, 250.0, BROWN)],
            answers: vec![],
            cues: vec![("DOOR", "right")],
            caution: false,
            expected_texts: vec!["There's a door 13 feet ahead on your right"],
        },
    ]
}

fn render(scene: Option<&Scene>, seq: u64) -> Vec<u8> {
    let shade = 90 + (seq as u8 % 5) * 6;
    let mut img = RgbImage::from_pixel(W, H, Rgb([shade, shade, shade]));
    // floor
    for y in 360..H {
        for x in 0..W {
            img.put_pixel(x, y, Rgb([70, 60, 55]));
        }
    }
    if let Some(s) = scene {
        for p in &s.plates {
            for y in p.y0 as u32..p.y1 as u32 {
                for x in p.x0 as u32..p.x1 as u32 {
                    img.put_pixel(x, y, Rgb(p.colour));
                }
            }
        }
        if s.cues.iter().any(|c| c.0 == "OBSTACLE") {
            for y in 200..360 {
                for x in 290..350 {
                    img.put_pixel(x, y, Rgb([30, 30, 30]));
                }
            }
        }
    }
    let mut buf = Vec::new();
    image::codecs::jpeg::JpegEncoder::new_with_quality(&mut buf, 80)
        .encode_image(&img)
        .expect("jpeg encoding");
    buf
}

fn quad(p: &Plate) -> Value {
    json!([[p.x0, p.y0], [p.x1, p.y0], [p.x1, p.y1], [p.x0, p.y1]])
}

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/corpus/synthetic-walk".into())
        .into();
    fs::create_dir_all(out.join(FRAMES_DIR)).expect("create corpus dir");
    let scenes = scenes();

    let mut manifest = Manifest::empty(ImageDims { width: W, height: H }, CalibrationConfig::default());
    let mut labels = String::new();
    for seq in 1..=FRAMES {
        let scene = scenes.iter().find(|s| s.seq == seq);
        let file = frame_file_name(seq as usize);
        fs::write(out.join(&file), render(scene, seq)).expect("write frame");
        manifest.frames.push(ManifestFrame {
            file,
            timestamp_ms: (seq - 1) * PERIOD_MS,
        });
        let mut label = json!({
            "frame": seq,
            "cues": scene.map_or(vec![], |s| s.cues.iter().map(|(c, d)| json!({"class": c, "direction": d})).collect()),
            "caution": scene.is_some_and(|s| s.caution),
        });
        if let Some(s) = scene.filter(|s| !s.expected_texts.is_empty()) {
            label["expected_texts"] = json!(s.expected_texts);
        }
        labels.push_str(&label.to_string());
        labels.push('\n');
    }

    let entries: Vec<Value> = scenes
        .iter()
        .map(|s| {
            json!({
                "seq": s.seq,
                "text_regions": s.plates.iter().map(|p| json!({"quad": quad(p), "score": 0.95, "text": p.text})).collect::<Vec<_>>(),
                "vqa_answers": s.answers.iter().map(|(q, a, c)| json!({"question": q, "answer": a, "confidence": c})).collect::<Vec<_>>(),
            })
        })
        .collect();
    let script = json!({ "latency_ms": 0, "entries": entries });

    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).unwrap() + "\n",
    )
    .unwrap();
    fs::write(out.join("labels.jsonl"), labels).unwrap();
    fs::write(
        out.join("stub_script.json"),
        serde_json::to_string_pretty(&script).unwrap() + "\n",
    )
    .unwrap();
    println!("wrote {FRAMES} frames to {}", out.display());
}
