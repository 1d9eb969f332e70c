//! The two VLM agents: Agent 1 judges landing-pad safety and rewrites the
//! detector vocabulary; Agent 2 ranks candidate zones against a user
//! preference, with a deterministic heuristic filling any gap.

mod backends;
pub mod prompts;

use std::collections::BTreeSet;

use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use backends::{LiveVlm, LiveVlmConfig, RecordingVlm, ReplayVlm, ScriptedVlm};

use crate::error::{BackendError, Error, Result};
use crate::imgcore::encode_png;
use crate::semantic::PromptVocabulary;
use crate::zones::{compare_candidates, image_center, normalize_candidates, CandidateZone};

/// Images per Agent-1 request in multi-frame mode: (RGB, depth) × 5 + overlay.
pub const AGENT1_MULTI_IMAGES: usize = 11;
/// Images per Agent-1 request in single-frame mode: RGB, depth, overlay.
pub const AGENT1_SINGLE_IMAGES: usize = 3;
/// Images per Agent-2 request: 5 RGB frames + annotated overlay.
pub const AGENT2_IMAGES: usize = 6;
/// Frames per batch.
pub const BATCH_FRAMES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PadSafety {
    Safe,
    Unsafe,
    /// The agent answered `null`, i.e. it could not find the pad.
    Unknown,
}

impl PadSafety {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            PadSafety::Safe => Some(true),
            PadSafety::Unsafe => Some(false),
            PadSafety::Unknown => None,
        }
    }
}

impl From<Option<bool>> for PadSafety {
    fn from(v: Option<bool>) -> Self {
        match v {
            Some(true) => PadSafety::Safe,
            Some(false) => PadSafety::Unsafe,
            None => PadSafety::Unknown,
        }
    }
}

/// Parsed Agent-1 reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentVerdict {
    pub landing_pad_safe: PadSafety,
    pub reasoning: String,
    pub future_prediction: String,
    pub updated_vocabulary: PromptVocabulary,
}

impl AgentVerdict {
    /// The verdict in the agent's own reply format.
    pub fn to_reply_json(&self) -> String {
        json!({
            "landing_pad_safe": self.landing_pad_safe.as_bool(),
            "reasoning": self.reasoning,
            "future_prediction": self.future_prediction,
            "updated_prompt_list": self.updated_vocabulary.classes(),
        })
        .to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedZone {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Agent1Mode {
    #[default]
    MultiFrame,
    SingleFrame,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attachment {
    pub label: String,
    pub png: Vec<u8>,
}

/// A single-turn request: optional system text, user text, ordered images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VlmRequest {
    pub system: Option<String>,
    pub user: String,
    pub attachments: Vec<Attachment>,
}

impl VlmRequest {
    /// Texts plus label, size and SHA-256 of each image, as pretty JSON.
    /// Two requests with equal manifests are byte-identical.
    pub fn manifest_json(&self) -> String {
        let attachments: Vec<Value> = self
            .attachments
            .iter()
            .map(|a| {
                let digest: String = Sha256::digest(&a.png).iter().map(|b| format!("{b:02x}")).collect();
                json!({"label": a.label, "bytes": a.png.len(), "sha256": digest})
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&json!({
            "system": self.system,
            "user": self.user,
            "attachments": attachments,
        }))
        .expect("manifest is plain JSON");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Agent1,
    Agent2,
}

impl AgentRole {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Agent1 => "agent1",
            AgentRole::Agent2 => "agent2",
        }
    }
}

/// Identifies one call for replay and recording.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallContext {
    pub batch_id: String,
    pub agent: AgentRole,
    pub run: usize,
    /// Agent-1 refinement round; 0 for the first (and usually only) round.
    pub iteration: usize,
}

impl CallContext {
    pub fn new(batch_id: impl Into<String>, agent: AgentRole, run: usize) -> Self {
        Self {
            batch_id: batch_id.into(),
            agent,
            run,
            iteration: 0,
        }
    }

    pub fn with_iteration(mut self, iteration: usize) -> Self {
        self.iteration = iteration;
        self
    }
}

/// Anything that turns a request into raw reply text.
pub trait VlmBackend: Send + Sync {
    fn complete(&self, ctx: &CallContext, request: &VlmRequest) -> Result<String, BackendError>;
}

impl<T: VlmBackend + ?Sized> VlmBackend for &T {
    fn complete(&self, ctx: &CallContext, request: &VlmRequest) -> Result<String, BackendError> {
        (**self).complete(ctx, request)
    }
}

impl<T: VlmBackend + ?Sized> VlmBackend for Box<T> {
    fn complete(&self, ctx: &CallContext, request: &VlmRequest) -> Result<String, BackendError> {
        (**self).complete(ctx, request)
    }
}

impl<T: VlmBackend + ?Sized> VlmBackend for std::sync::Arc<T> {
    fn complete(&self, ctx: &CallContext, request: &VlmRequest) -> Result<String, BackendError> {
        (**self).complete(ctx, request)
    }
}

/// Replaces `{key}` placeholders in one left-to-right pass, so substituted
/// values are never themselves re-expanded.
fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'scan: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        for (key, value) in vars {
            let token_len = key.len() + 2;
            if tail.len() >= token_len && tail[1..].starts_with(key) && tail[1 + key.len()..].starts_with('}') {
                out.push_str(value);
                rest = &tail[token_len..];
                continue 'scan;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

fn attach_rgb(label: String, img: &RgbImage) -> Result<Attachment> {
    Ok(Attachment {
        label,
        png: encode_png(img)?,
    })
}

fn attach_gray(label: String, img: &GrayImage) -> Result<Attachment> {
    Ok(Attachment {
        label,
        png: encode_png(img)?,
    })
}

/// Agent-1 request for one batch. `rgb` and `depth` hold the batch frames in
/// order; single-frame mode only sends the last pair.
pub fn build_agent1_request(
    rgb: &[RgbImage],
    depth: &[GrayImage],
    overlay: &RgbImage,
    vocab: &PromptVocabulary,
    mode: Agent1Mode,
) -> Result<VlmRequest> {
    if rgb.len() != depth.len() {
        return Err(Error::param(format!(
            "{} RGB frames but {} depth maps",
            rgb.len(),
            depth.len()
        )));
    }
    let (template, frames) = match mode {
        Agent1Mode::MultiFrame => {
            if rgb.len() != BATCH_FRAMES {
                return Err(Error::param(format!(
                    "multi-frame mode needs {BATCH_FRAMES} frame pairs, got {}",
                    rgb.len()
                )));
            }
            (prompts::AGENT1_MULTI_FRAME, 0..rgb.len())
        }
        Agent1Mode::SingleFrame => {
            if rgb.is_empty() {
                return Err(Error::param("single-frame mode needs at least one frame pair"));
            }
            (prompts::AGENT1_SINGLE_FRAME, rgb.len() - 1..rgb.len())
        }
    };
    let mut attachments = Vec::new();
    for i in frames {
        attachments.push(attach_rgb(format!("rgb[{i}]"), &rgb[i])?);
        attachments.push(attach_gray(format!("depth[{i}]"), &depth[i])?);
    }
    attachments.push(attach_rgb("overlay".into(), overlay)?);
    Ok(VlmRequest {
        system: None,
        user: fill(template, &[("prompt_list", &vocab.to_json_list())]),
        attachments,
    })
}

/// Agent-2 request. Candidate coordinates are normalized by the overlay
/// size.
pub fn build_agent2_request(
    candidates: &[CandidateZone],
    preference: &str,
    frames: &[RgbImage],
    annotated_overlay: &RgbImage,
    top_n: usize,
) -> Result<VlmRequest> {
    if candidates.is_empty() {
        return Err(Error::param("ranking needs at least one candidate"));
    }
    if frames.len() + 1 != AGENT2_IMAGES {
        return Err(Error::param(format!(
            "ranking needs {} RGB frames, got {}",
            AGENT2_IMAGES - 1,
            frames.len()
        )));
    }
    let (w, h) = annotated_overlay.dimensions();
    let listing = serde_json::to_string_pretty(&normalize_candidates(candidates, w as usize, h as usize))
        .expect("plain numbers always serialize");
    let mut attachments = frames
        .iter()
        .enumerate()
        .map(|(i, f)| attach_rgb(format!("rgb[{i}]"), f))
        .collect::<Result<Vec<_>>>()?;
    attachments.push(attach_rgb("annotated_overlay".into(), annotated_overlay)?);
    Ok(VlmRequest {
        system: Some(prompts::AGENT2_SYSTEM.to_string()),
        user: fill(
            prompts::AGENT2_USER,
            &[
                ("user_pref_text", preference),
                ("top_n", &top_n.to_string()),
                ("candidates", &listing),
            ],
        ),
        attachments,
    })
}

/// The outermost `{...}` of a reply, which drops code fences and any prose
/// around the object.
fn json_object_slice(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| &text[start..=end])
}

fn parse_error(reason: impl Into<String>, raw: &str) -> Error {
    Error::Parse {
        reason: reason.into(),
        raw: raw.to_string(),
    }
}

pub fn parse_agent1_response(text: &str) -> Result<AgentVerdict> {
    let body = json_object_slice(text).ok_or_else(|| parse_error("no JSON object in reply", text))?;
    let value: Value = serde_json::from_str(body).map_err(|e| parse_error(format!("malformed JSON: {e}"), text))?;
    let obj = value.as_object().ok_or_else(|| parse_error("reply is not an object", text))?;
    let field = |key: &str| obj.get(key).ok_or_else(|| parse_error(format!("missing key `{key}`"), text));

    let landing_pad_safe = match field("landing_pad_safe")? {
        Value::Bool(b) => PadSafety::from(Some(*b)),
        Value::Null => PadSafety::Unknown,
        other => return Err(parse_error(format!("landing_pad_safe is {other}, expected a boolean or null"), text)),
    };
    let text_field = |key: &str| -> Result<String> {
        match field(key)? {
            Value::String(s) => Ok(s.clone()),
            Value::Null => Ok(String::new()),
            other => Err(parse_error(format!("{key} is {other}, expected a string"), text)),
        }
    };
    let reasoning = text_field("reasoning")?;
    let future_prediction = text_field("future_prediction")?;
    let list = field("updated_prompt_list")?
        .as_array()
        .ok_or_else(|| parse_error("updated_prompt_list is not an array", text))?;
    let classes = list
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| parse_error(format!("prompt {v} is not a string"), text))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AgentVerdict {
        landing_pad_safe,
        reasoning,
        future_prediction,
        updated_vocabulary: PromptVocabulary::new(classes),
    })
}

/// The next vocabulary: the agent's list when it parsed and is non-empty,
/// otherwise the prior one.
pub fn refine_vocabulary(prior: &PromptVocabulary, verdict: Option<&AgentVerdict>) -> PromptVocabulary {
    match verdict {
        Some(v) if !v.updated_vocabulary.is_empty() => v.updated_vocabulary.clone(),
        _ => prior.clone(),
    }
}

/// Valid ranked entries of an Agent-2 reply: indices must name a candidate,
/// repeats are dropped and at most `top_n` are kept. Unparseable replies
/// give an empty list.
pub fn parse_agent2_response(text: &str, candidates: &[CandidateZone], top_n: usize) -> Vec<RankedZone> {
    let known: BTreeSet<usize> = candidates.iter().map(|c| c.index).collect();
    let Some(value) = json_object_slice(text).and_then(|b| serde_json::from_str::<Value>(b).ok()) else {
        log::warn!("ranking reply is not JSON");
        return Vec::new();
    };
    let Some(entries) = value.get("ranked").and_then(Value::as_array) else {
        log::warn!("ranking reply has no `ranked` array");
        return Vec::new();
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for entry in entries {
        if out.len() == top_n {
            break;
        }
        let Some(index) = entry.get("index").and_then(Value::as_u64).map(|i| i as usize) else {
            log::warn!("ranking entry without a valid index: {entry}");
            continue;
        };
        if !known.contains(&index) || !seen.insert(index) {
            log::warn!("ranking entry {index} is unknown or repeated");
            continue;
        }
        let reason = entry.get("reason").and_then(Value::as_str).unwrap_or_default();
        out.push(RankedZone {
            index,
            reason: reason.to_string(),
        });
    }
    out
}

/// Candidate indices in fallback order: safe ratio desc, area desc,
/// distance to image centre asc, index asc.
pub fn heuristic_rank(candidates: &[CandidateZone], width: usize, height: usize) -> Vec<usize> {
    let center = image_center(width, height);
    let mut sorted: Vec<&CandidateZone> = candidates.iter().collect();
    sorted.sort_by(|a, b| compare_candidates(a, b, center));
    sorted.into_iter().map(|c| c.index).collect()
}

/// Where the entries of a [`Ranking`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankingSource {
    Vlm,
    /// Agent entries followed by heuristic fills.
    Mixed,
    Heuristic,
}

pub const HEURISTIC_REASON: &str = "heuristic fallback: highest safe ratio, then area, then proximity to centre";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub zones: Vec<RankedZone>,
    pub source: RankingSource,
    /// Backend error that forced the fallback, if any.
    pub backend_error: Option<String>,
    /// Raw agent reply, when one arrived.
    pub raw_reply: Option<String>,
}

/// Asks Agent 2 for a ranking and tops it up from [`heuristic_rank`] to
/// `min(top_n, |candidates|)` entries.
#[allow(clippy::too_many_arguments)]
pub fn rank_zones<B: VlmBackend + ?Sized>(
    backend: &B,
    ctx: &CallContext,
    candidates: &[CandidateZone],
    preference: &str,
    frames: &[RgbImage],
    annotated_overlay: &RgbImage,
    top_n: usize,
) -> Result<Ranking> {
    let request = build_agent2_request(candidates, preference, frames, annotated_overlay, top_n)?;
    let (mut zones, backend_error, raw_reply) = match backend.complete(ctx, &request) {
        Ok(raw) => (parse_agent2_response(&raw, candidates, top_n), None, Some(raw)),
        Err(e) => {
            log::warn!("{}: ranking backend failed, using heuristic: {e}", ctx.batch_id);
            (Vec::new(), Some(e.to_string()), None)
        }
    };
    let from_agent = zones.len();
    let want = top_n.min(candidates.len());
    let (w, h) = annotated_overlay.dimensions();
    for index in heuristic_rank(candidates, w as usize, h as usize) {
        if zones.len() >= want {
            break;
        }
        if zones.iter().all(|z| z.index != index) {
            zones.push(RankedZone {
                index,
                reason: HEURISTIC_REASON.to_string(),
            });
        }
    }
    let source = match from_agent {
        0 => RankingSource::Heuristic,
        n if n >= want => RankingSource::Vlm,
        _ => RankingSource::Mixed,
    };
    Ok(Ranking {
        zones,
        source,
        backend_error,
        raw_reply,
    })
}

/// Outcome of one Agent-1 call. The verdict is absent when the backend
/// failed or the reply did not parse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent1Outcome {
    pub verdict: Option<AgentVerdict>,
    pub raw_reply: Option<String>,
    pub error: Option<String>,
}

pub fn consult_agent1<B: VlmBackend + ?Sized>(backend: &B, ctx: &CallContext, request: &VlmRequest) -> Agent1Outcome {
    match backend.complete(ctx, request) {
        Ok(raw) => match parse_agent1_response(&raw) {
            Ok(verdict) => Agent1Outcome {
                verdict: Some(verdict),
                raw_reply: Some(raw),
                error: None,
            },
            Err(e) => {
                log::warn!("{}: unusable safety reply: {e}", ctx.batch_id);
                Agent1Outcome {
                    verdict: None,
                    raw_reply: Some(raw),
                    error: Some(e.to_string()),
                }
            }
        },
        Err(e) => {
            log::warn!("{}: safety agent backend failed: {e}", ctx.batch_id);
            Agent1Outcome {
                verdict: None,
                raw_reply: None,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Mean over frames of the per-frame fraction of correct runs.
pub fn pad_safety_success_rate(runs: &[Vec<bool>]) -> Result<f64> {
    if runs.is_empty() {
        return Err(Error::param("no frames to score"));
    }
    let mut total = 0.0;
    for (i, frame) in runs.iter().enumerate() {
        if frame.is_empty() {
            return Err(Error::param(format!("frame {i} has no runs")));
        }
        total += frame.iter().filter(|&&ok| ok).count() as f64 / frame.len() as f64;
    }
    Ok(total / runs.len() as f64)
}

#[cfg(test)]
mod tests;
