//! Prompt templates for both agents. Placeholders in braces are filled at
//! request time.

pub const AGENT1_MULTI_FRAME: &str = "\
You are analyzing a package delivery drone drop safety using 5 consecutive RGB frames, \
their depth maps, and a gradient-based safety overlay (green = safe, red = unsafe) for the last frame.

Current DINO-X prompt list: {prompt_list}

Tasks:
1. Determine if the landing pad is safe for the current frame (true/false). \
Decide based on the final frame and the previous 5 frames: if there are objects on the landing pad, \
or there will be objects on the landing pad, declare unsafe, otherwise declare safe.
2. Provide reasoning using temporal cues and depth information.
3. Predict future safety (will conditions remain safe/unsafe?).
4. Provide a single updated prompt list: include ALL unsafe objects/surfaces; remove safe ones \
(e.g. landing pad if confirmed safe, bushes, ...). The list must reflect the most recent scene. \
Unsafe objects include any moving or static objects that are not flat, or are moving and not safe \
for a package drop. If the drop zone with H sign is unsafe, also add it to the updated list. \
Provide the most complete prompt list for the unsafe zones. Avoid ambiguous prompts. \
Rule: streets and rooftops are always unsafe; bushes and grass are safe as long as they are free \
of objects and flat. Each entity must be specific and detectable, e.g. person, black asphalt road, \
white soccer ball, tree, white stairs, brown rooftop, ... For people, avoid additional details. \
For roads, stairs, decks, and ambiguous objects, specify the object. Include your reasoning for \
each hazardous prompt in the reasoning field.

Output strictly in JSON with keys: landing_pad_safe, reasoning (includes reasoning for choosing \
unsafe objects), future_prediction, updated_prompt_list (only text prompts such as rooftop, \
street road, person, landing pad with H).";

pub const AGENT1_SINGLE_FRAME: &str = "\
You are evaluating package drop safety for a drone.

Inputs:
- ONE RGB frame (the final frame)
- Its depth map
- A safety overlay for the same frame (green = safe, red = unsafe)

Current DINO-X prompt list: {prompt_list}

Task (STRICT RULES):
1. Determine whether the primary landing pad with an 'H' marking is safe for a drop. \
Set landing_pad_safe = false only if you can see any object(s) inside the landing pad area. \
Otherwise, set landing_pad_safe = true. If you cannot locate the landing pad, set it to null and explain.
2. reasoning: 1-3 short sentences describing what you see on the pad.
3. future_prediction: one sentence (may be empty).
4. updated_prompt_list: if safe, return only clearly unsafe objects in this frame; \
if unsafe, also include landing pad with H. Keep prompts concrete and detectable.

Output STRICT JSON with keys: landing_pad_safe, reasoning, future_prediction, updated_prompt_list.";

pub const AGENT2_SYSTEM: &str = r#"You are selecting circular landing zones for a drone from indexed candidates. PRIORITIZE user's preference over safe ratio where they conflict.

Return STRICT JSON ONLY:
{
  "ranked": [
    {
      "index": <int>,
      "reason": "<1-2 sentences>"
    },
    ...  // up to N entries
  ]
}"#;

pub const AGENT2_USER: &str = "\
User preference: {user_pref_text}

Select top {top_n} indices by preference (ties broken by higher safe_ratio). Return STRICT JSON ONLY.

Candidates (normalized coordinates and safe ratios):
{candidates}";
