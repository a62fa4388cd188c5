//! Turns raw perception output into navigational cues.

mod lexicon;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::perception::geometry::Quad;
use crate::perception::{RawObservation, TextRegion};
use crate::types::{Direction, SignClass};

pub use lexicon::{classify_signage, Lexicon, EXACT_CONFIDENCE, NEAR_CONFIDENCE};

/// Regions shorter than this many pixels give no distance estimate.
pub const MIN_TRUSTED_HEIGHT_PX: f64 = 4.0;

pub const DEFAULT_OBSTACLE_KEYWORDS: [&str; 3] = ["person", "chair", "cart"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

impl Default for ImageDims {
    fn default() -> Self {
        ImageDims {
            width: 640,
            height: 480,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CueSource {
    Text,
    Vqa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavCue {
    pub sign_class: SignClass,
    pub direction: Direction,
    pub distance_m: Option<f64>,
    pub hazard: bool,
    pub confidence: f64,
    pub source_region: Option<TextRegion>,
    pub source: CueSource,
}

impl NavCue {
    pub fn new(sign_class: SignClass, direction: Direction, distance_m: Option<f64>, confidence: f64) -> Self {
        NavCue {
            sign_class,
            direction,
            distance_m,
            hazard: sign_class.is_hazard(),
            confidence,
            source_region: None,
            source: CueSource::Text,
        }
    }
}

/// Pinhole camera model: `distance = focal_length_px * real_height / pixel_height`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub focal_length_px: f64,
    pub real_heights_m: BTreeMap<SignClass, f64>,
}

impl Default for Calibration {
    /// 640×480 phone camera at 800 px focal length; US exit-sign lettering
    /// is 0.19 m, other sign lettering assumed 0.15 m.
    fn default() -> Self {
        let mut h = BTreeMap::new();
        h.insert(SignClass::ExitDoor, 0.19);
        for c in [
            SignClass::Stairs,
            SignClass::Elevator,
            SignClass::Restroom,
            SignClass::Door,
        ] {
            h.insert(c, 0.15);
        }
        Calibration {
            focal_length_px: 800.0,
            real_heights_m: h,
        }
    }
}

impl Calibration {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.focal_length_px > 0.0 && self.focal_length_px.is_finite()) {
            return Err(format!("focal_length_px {} must be > 0", self.focal_length_px));
        }
        for (c, h) in &self.real_heights_m {
            if !(*h > 0.0 && h.is_finite()) {
                return Err(format!("real height for {c} is {h}, must be > 0"));
            }
        }
        Ok(())
    }
}

/// Thirds rule on the quad centroid; both boundaries belong to AHEAD.
pub fn estimate_direction(quad: &Quad, image_width: u32) -> Direction {
    let w = f64::from(image_width);
    let cx = quad.centroid().x;
    if cx < w / 3.0 {
        Direction::Left
    } else if cx > 2.0 * w / 3.0 {
        Direction::Right
    } else {
        Direction::Ahead
    }
}

pub fn distance_from_height(h_px: f64, sign_class: SignClass, cal: &Calibration) -> Option<f64> {
    let real = *cal.real_heights_m.get(&sign_class)?;
    if h_px.is_nan() || h_px < MIN_TRUSTED_HEIGHT_PX {
        return None;
    }
    Some(cal.focal_length_px * real / h_px)
}

pub fn estimate_distance(quad: &Quad, sign_class: SignClass, cal: &Calibration) -> Option<f64> {
    distance_from_height(quad.pixel_height(), sign_class, cal)
}

enum Answer {
    Yes,
    No,
}

fn yes_no(answer: &str) -> Option<Answer> {
    let first = answer
        .trim()
        .split(|c: char| !c.is_alphanumeric())
        .find(|w| !w.is_empty())?
        .to_lowercase();
    match first.as_str() {
        "yes" | "yeah" | "yep" | "true" => Some(Answer::Yes),
        "no" | "nope" | "false" => Some(Answer::No),
        _ => None,
    }
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// Stateless interpreter holding the read-only lexicon, calibration, and
/// obstacle trigger words.
#[derive(Debug, Clone)]
pub struct Interpreter {
    pub lexicon: Lexicon,
    pub calibration: Calibration,
    pub obstacle_keywords: Vec<String>,
}

impl Default for Interpreter {
    fn default() -> Self {
        Interpreter {
            lexicon: Lexicon::default(),
            calibration: Calibration::default(),
            obstacle_keywords: DEFAULT_OBSTACLE_KEYWORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Interpreter {
    pub fn new(lexicon: Lexicon, calibration: Calibration, obstacle_keywords: Vec<String>) -> Self {
        Interpreter {
            lexicon,
            calibration,
            obstacle_keywords: obstacle_keywords.into_iter().map(|k| k.to_lowercase()).collect(),
        }
    }

    /// Sign class a "Is this a(n) X sign?" question asks about.
    pub fn question_class(&self, question: &str) -> Option<SignClass> {
        let q = question.trim().to_lowercase();
        let rest = q.strip_prefix("is this ")?;
        let rest = rest
            .strip_prefix("an ")
            .or_else(|| rest.strip_prefix("a "))
            .unwrap_or(rest);
        let subject = rest.trim_end_matches('?').trim().strip_suffix("sign")?.trim();
        match self.lexicon.classify(subject) {
            (c, conf) if conf == EXACT_CONFIDENCE => Some(c),
            _ => None,
        }
    }

    fn cue_at(
        &self,
        class: SignClass,
        region: Option<&TextRegion>,
        dims: ImageDims,
        confidence: f64,
        source: CueSource,
    ) -> NavCue {
        let (direction, distance_m) = match region {
            Some(r) => (
                estimate_direction(&r.quad, dims.width),
                estimate_distance(&r.quad, class, &self.calibration),
            ),
            None => (Direction::Ahead, None),
        };
        NavCue {
            sign_class: class,
            direction,
            distance_m,
            hazard: class.is_hazard(),
            confidence,
            source_region: region.cloned(),
            source,
        }
    }

    /// One cue per classified text region, plus cues from affirmative VQA
    /// answers and obstacle words in free-form answers. Contradicting
    /// evidence is settled by confidence; on a tie text evidence wins.
    pub fn interpret(&self, obs: &RawObservation, dims: ImageDims) -> Vec<NavCue> {
        // (region index, cue)
        let mut text_cues: Vec<(usize, NavCue)> = Vec::new();
        for (i, region) in obs.text_regions.iter().enumerate() {
            let Some(text) = &region.text else { continue };
            let (class, conf) = self.lexicon.classify(text);
            if class == SignClass::UnknownSign {
                continue;
            }
            text_cues.push((i, self.cue_at(class, Some(region), dims, conf, CueSource::Text)));
        }

        let dominant =
            obs.text_regions
                .iter()
                .enumerate()
                .fold(None::<(usize, &TextRegion)>, |best, (i, r)| match best {
                    Some((_, b)) if b.score >= r.score => best,
                    _ => Some((i, r)),
                });

        let mut negative: BTreeMap<SignClass, f64> = BTreeMap::new();
        let mut vqa_cues: Vec<NavCue> = Vec::new();
        let mut obstacle: Option<f64> = None;

        for a in &obs.vqa_answers {
            if let Some(class) = self.question_class(&a.question) {
                let affirmative = match yes_no(&a.answer) {
                    Some(Answer::Yes) => true,
                    Some(Answer::No) => false,
                    // a named answer ("stop sign") affirms only its own class
                    None => self.lexicon.classify(&a.answer).0 == class,
                };
                if affirmative {
                    if let Some(existing) = vqa_cues.iter_mut().find(|c| c.sign_class == class) {
                        existing.confidence = existing.confidence.max(a.confidence);
                        continue;
                    }
                    let region = dominant.map(|(_, r)| r);
                    vqa_cues.push(self.cue_at(class, region, dims, a.confidence, CueSource::Vqa));
                } else {
                    let n = negative.entry(class).or_insert(0.0);
                    *n = n.max(a.confidence);
                }
            } else if yes_no(&a.answer).is_none() && words(&a.answer).any(|w| self.obstacle_keywords.contains(&w)) {
                obstacle = Some(obstacle.map_or(a.confidence, |o: f64| o.max(a.confidence)));
            }
        }

        // VQA claims about the dominant region against what its text says
        let mut kept_vqa = Vec::new();
        for cue in vqa_cues {
            let on_region = dominant.and_then(|(d, _)| text_cues.iter().position(|(i, _)| *i == d));
            match on_region {
                Some(pos) if text_cues[pos].1.sign_class == cue.sign_class => {}
                Some(pos) => {
                    if cue.confidence > text_cues[pos].1.confidence {
                        text_cues.remove(pos);
                        kept_vqa.push(cue);
                    }
                }
                None => {
                    if !text_cues.iter().any(|(_, t)| t.sign_class == cue.sign_class) {
                        kept_vqa.push(cue);
                    }
                }
            }
        }

        let survives = |cue: &NavCue| match negative.get(&cue.sign_class) {
            Some(&n) if n > cue.confidence => false,
            Some(&n) if n == cue.confidence => cue.source == CueSource::Text,
            _ => true,
        };

        let mut cues: Vec<NavCue> = text_cues
            .into_iter()
            .map(|(_, c)| c)
            .chain(kept_vqa)
            .filter(|c| survives(c))
            .collect();
        if let Some(conf) = obstacle {
            let mut c = self.cue_at(SignClass::Obstacle, None, dims, conf, CueSource::Vqa);
            c.direction = Direction::Ahead;
            cues.push(c);
        }
        cues
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::VqaAnswer;

    fn region(x0: f64, y0: f64, x1: f64, y1: f64, text: &str) -> TextRegion {
        TextRegion {
            quad: Quad::axis_aligned(x0, y0, x1, y1),
            score: 0.95,
            text: Some(text.to_string()),
        }
    }

    fn obs(regions: Vec<TextRegion>, answers: Vec<(&str, &str, f64)>) -> RawObservation {
        RawObservation {
            frame_seq: 1,
            text_regions: regions,
            vqa_answers: answers
                .into_iter()
                .map(|(q, a, c)| VqaAnswer {
                    question: q.into(),
                    answer: a.into(),
                    confidence: c,
                })
                .collect(),
            backend_name: "test".into(),
            inference_ms: 0.0,
        }
    }

    #[test]
    fn thirds_rule_with_boundaries() {
        let at = |x: f64| Quad::axis_aligned(x - 1.0, 0.0, x + 1.0, 10.0);
        assert_eq!(estimate_direction(&at(300.0), 600), Direction::Ahead);
        assert_eq!(estimate_direction(&at(540.0), 600), Direction::Right);
        assert_eq!(estimate_direction(&at(200.0), 600), Direction::Ahead);
        assert_eq!(estimate_direction(&at(400.0), 600), Direction::Ahead);
        assert_eq!(estimate_direction(&at(199.0), 600), Direction::Left);
        assert_eq!(estimate_direction(&at(401.0), 600), Direction::Right);
    }

    #[test]
    fn pinhole_distance() {
        let mut cal = Calibration::default();
        cal.real_heights_m.insert(SignClass::ExitDoor, 0.25);
        let q = Quad::axis_aligned(0.0, 0.0, 10.0, 40.0);
        assert_eq!(estimate_distance(&q, SignClass::ExitDoor, &cal), Some(5.0));
        let tiny = Quad::axis_aligned(0.0, 0.0, 10.0, 2.0);
        assert_eq!(estimate_distance(&tiny, SignClass::ExitDoor, &cal), None);
        assert_eq!(estimate_distance(&q, SignClass::Obstacle, &cal), None);
    }

    #[test]
    fn question_classes() {
        let i = Interpreter::default();
        assert_eq!(i.question_class("Is this an exit sign?"), Some(SignClass::ExitDoor));
        assert_eq!(i.question_class("is this a stairs sign"), Some(SignClass::Stairs));
        assert_eq!(i.question_class("Give a summary of the image"), None);
    }

    #[test]
    fn exit_region_on_the_right() {
        let i = Interpreter::default();
        // 800 * 0.19 / 50 = 3.04 m
        let o = obs(vec![region(500.0, 100.0, 560.0, 150.0, "EXIT")], vec![]);
        let cues = i.interpret(&o, ImageDims::default());
        assert_eq!(cues.len(), 1);
        let c = &cues[0];
        assert_eq!(c.sign_class, SignClass::ExitDoor);
        assert_eq!(c.direction, Direction::Right);
        assert!((c.distance_m.unwrap() - 3.04).abs() < 1e-9);
        assert!(!c.hazard);
    }

    #[test]
    fn misread_stop_sign_loses_to_text() {
        let i = Interpreter::default();
        let o = obs(
            vec![region(500.0, 100.0, 560.0, 150.0, "EXIT")],
            vec![("Is this an exit sign?", "stop sign", 0.6)],
        );
        let cues = i.interpret(&o, ImageDims::default());
        assert_eq!(cues.len(), 1);
        assert_eq!(cues[0].sign_class, SignClass::ExitDoor);
        assert_eq!(cues[0].source, CueSource::Text);
    }

    #[test]
    fn confident_denial_beats_fuzzy_text() {
        let i = Interpreter::default();
        let o = obs(
            vec![region(500.0, 100.0, 560.0, 150.0, "EX1T")],
            vec![("Is this an exit sign?", "no", 0.9)],
        );
        assert!(i.interpret(&o, ImageDims::default()).is_empty());
        // tie goes to the text
        let tie = obs(
            vec![region(500.0, 100.0, 560.0, 150.0, "EX1T")],
            vec![("Is this an exit sign?", "no", 0.7)],
        );
        assert_eq!(i.interpret(&tie, ImageDims::default()).len(), 1);
    }

    #[test]
    fn affirmative_vqa_without_regions() {
        let i = Interpreter::default();
        let o = obs(vec![], vec![("Is this an exit sign?", "yes", 0.8)]);
        let cues = i.interpret(&o, ImageDims::default());
        assert_eq!(cues.len(), 1);
        assert_eq!(cues[0].direction, Direction::Ahead);
        assert_eq!(cues[0].distance_m, None);
        assert_eq!(cues[0].source, CueSource::Vqa);
    }

    #[test]
    fn affirmative_vqa_uses_dominant_region() {
        let i = Interpreter::default();
        let mut r = region(20.0, 100.0, 80.0, 150.0, "");
        r.text = None;
        let o = obs(vec![r], vec![("Is this an exit sign?", "Yes.", 0.8)]);
        let cues = i.interpret(&o, ImageDims::default());
        assert_eq!(cues.len(), 1);
        assert_eq!(cues[0].direction, Direction::Left);
        assert!(cues[0].distance_m.is_some());
    }

    #[test]
    fn obstacle_from_summary() {
        let i = Interpreter::default();
        let o = obs(
            vec![],
            vec![("Give a summary of the image", "A person standing in a hallway", 0.7)],
        );
        let cues = i.interpret(&o, ImageDims::default());
        assert_eq!(cues.len(), 1);
        assert_eq!(cues[0].sign_class, SignClass::Obstacle);
        assert!(cues[0].hazard);
        assert_eq!(cues[0].distance_m, None);
        // "personal" is not "person"
        let o = obs(vec![], vec![("Give a summary of the image", "personal items", 0.7)]);
        assert!(i.interpret(&o, ImageDims::default()).is_empty());
    }

    #[test]
    fn empty_observation() {
        let i = Interpreter::default();
        assert!(i.interpret(&obs(vec![], vec![]), ImageDims::default()).is_empty());
        let unknown = obs(vec![region(0.0, 0.0, 10.0, 10.0, "CAFE")], vec![]);
        assert!(i.interpret(&unknown, ImageDims::default()).is_empty());
    }
}
