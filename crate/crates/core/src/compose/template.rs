use serde::{Deserialize, Serialize};

use crate::interpret::NavCue;
use crate::protocol::InstructionPayload;
use crate::types::{Direction, Priority, SignClass, Units};

pub const STEP_LENGTH_M: f64 = 0.7;
pub const FEET_PER_METER: f64 = 3.2808;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub text: String,
    pub priority: Priority,
    pub dedup_key: String,
    pub sign_class: SignClass,
    pub direction: Direction,
    pub distance_m: Option<f64>,
    pub hazard: bool,
    pub frame_seq: u64,
    pub rewritten: bool,
    /// Substrings any rephrasing must keep: class phrase, the direction
    /// word when the template states one, and the spoken quantity.
    pub required_terms: Vec<String>,
}

impl Instruction {
    pub fn to_payload(&self) -> InstructionPayload {
        InstructionPayload {
            text: self.text.clone(),
            priority: self.priority as u8,
            direction: Some(self.direction),
            distance_m: self.distance_m,
            dedup_key: self.dedup_key.clone(),
            frame_seq: self.frame_seq,
        }
    }
}

pub fn dedup_key(class: SignClass, direction: Direction) -> String {
    format!("{}:{}", class.code().to_lowercase(), direction.as_str())
}

fn article(phrase: &str) -> &'static str {
    match phrase.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

fn rounded_whole(x: f64) -> u64 {
    (x.round() as u64).max(1)
}

/// Whole feet or meters, never zero.
pub fn spoken_quantity(distance_m: f64, units: Units) -> (u64, &'static str, &'static str) {
    match units {
        Units::Feet => (rounded_whole(distance_m * FEET_PER_METER), "foot", "feet"),
        Units::Meters => (rounded_whole(distance_m), "meter", "meters"),
    }
}

pub fn steps_for(distance_m: f64) -> u64 {
    rounded_whole(distance_m / STEP_LENGTH_M)
}

fn plural(n: u64, one: &str, many: &str) -> String {
    if n == 1 {
        format!("{n} {one}")
    } else {
        format!("{n} {many}")
    }
}

fn direction_phrase(d: Direction) -> &'static str {
    match d {
        Direction::Left => "on your left",
        Direction::Right => "on your right",
        Direction::Ahead => "straight ahead",
    }
}

pub fn priority_for(cue: &NavCue) -> Priority {
    if cue.hazard {
        Priority::Caution
    } else if cue.sign_class == SignClass::UnknownSign {
        Priority::Info
    } else {
        Priority::Guidance
    }
}

fn render(cue: &NavCue, units: Units) -> (String, Vec<String>) {
    let phrase = cue.sign_class.phrase();
    let mut terms = vec![phrase.to_string()];
    let dir = cue.direction.as_str();
    let text = match (cue.sign_class, cue.distance_m) {
        (SignClass::Stairs, Some(d)) => {
            let n = steps_for(d);
            terms.push(n.to_string());
            let mut t = format!("Caution: stairs approaching in {}", plural(n, "step", "steps"));
            if cue.direction != Direction::Ahead {
                t.push(' ');
                t.push_str(direction_phrase(cue.direction));
                terms.push(dir.to_string());
            }
            t
        }
        (SignClass::Stairs, None) => {
            terms.push(dir.to_string());
            match cue.direction {
                Direction::Ahead => "Caution: stairs approaching straight ahead".to_string(),
                d => format!("Caution: stairs approaching {}", direction_phrase(d)),
            }
        }
        (class, distance) => {
            let lead = if class == SignClass::Obstacle {
                format!("Caution: {phrase}")
            } else {
                format!("There's {} {phrase}", article(phrase))
            };
            match (distance, cue.direction) {
                (Some(d), direction) => {
                    let (n, one, many) = spoken_quantity(d, units);
                    terms.push(n.to_string());
                    terms.push(dir.to_string());
                    let mut t = format!("{lead} {} ahead", plural(n, one, many));
                    if direction != Direction::Ahead {
                        t.push(' ');
                        t.push_str(direction_phrase(direction));
                    }
                    t
                }
                (None, direction) => {
                    terms.push(dir.to_string());
                    format!("{lead} {}", direction_phrase(direction))
                }
            }
        }
    };
    (text, terms)
}

/// One candidate instruction per cue, in cue order.
pub fn compose(cues: &[NavCue], units: Units, frame_seq: u64) -> Vec<Instruction> {
    cues.iter()
        .map(|cue| {
            let (text, required_terms) = render(cue, units);
            Instruction {
                text,
                priority: priority_for(cue),
                dedup_key: dedup_key(cue.sign_class, cue.direction),
                sign_class: cue.sign_class,
                direction: cue.direction,
                distance_m: cue.distance_m,
                hazard: cue.hazard,
                frame_seq,
                rewritten: false,
                required_terms,
            }
        })
        .collect()
}
