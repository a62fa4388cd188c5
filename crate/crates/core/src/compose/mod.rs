//! From cues to spoken instructions: templates, de-duplication and pacing,
//! optional LLM rephrasing.

mod rewrite;
mod schedule;
mod template;

pub use rewrite::{guard_accepts, HttpRewriter, RewriteFacts, Rewriter, DEFAULT_REWRITE_TIMEOUT};
pub use schedule::{
    filter_and_schedule, DedupMemory, Emission, Schedule, ScheduleConfig, DEFAULT_DEDUP_WINDOW_MS,
    DEFAULT_MIN_UTTERANCE_GAP_MS, DISTANCE_CHANGE_RATIO,
};
pub use template::{
    compose, dedup_key, priority_for, spoken_quantity, steps_for, Instruction, FEET_PER_METER, STEP_LENGTH_M,
};
