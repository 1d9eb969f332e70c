use super::*;
use proptest::prelude::*;

fn cand(index: usize, center: (f64, f64), radius: f64, safe_ratio: f64, area: usize) -> CandidateZone {
    CandidateZone {
        index,
        center,
        radius,
        safe_ratio,
        area,
    }
}

fn frames(n: usize) -> Vec<RgbImage> {
    (0..n).map(|i| RgbImage::from_pixel(8, 6, image::Rgb([i as u8 * 20, 0, 0]))).collect()
}

fn depths(n: usize) -> Vec<GrayImage> {
    (0..n).map(|i| GrayImage::from_pixel(8, 6, image::Luma([i as u8 * 30]))).collect()
}

fn ctx(agent: AgentRole) -> CallContext {
    CallContext::new("batch_000", agent, 0)
}

const GOOD_REPLY: &str =
    r#"{"landing_pad_safe":true,"reasoning":"r","future_prediction":"f","updated_prompt_list":["person"]}"#;

#[test]
fn fill_is_single_pass() {
    assert_eq!(fill("a {x} b {y}", &[("x", "{y}"), ("y", "2")]), "a {y} b 2");
    assert_eq!(fill("{unknown} {", &[("x", "1")]), "{unknown} {");
}

#[test]
fn agent1_multi_frame_request() {
    let vocab = PromptVocabulary::new(["person", "car"]);
    let req = build_agent1_request(&frames(5), &depths(5), &frames(1)[0], &vocab, Agent1Mode::MultiFrame).unwrap();
    assert_eq!(req.attachments.len(), AGENT1_MULTI_IMAGES);
    assert!(req.user.contains(r#"Current DINO-X prompt list: ["person","car"]"#));
    assert!(req.system.is_none());
    let labels: Vec<&str> = req.attachments.iter().map(|a| a.label.as_str()).collect();
    assert_eq!(&labels[..3], ["rgb[0]", "depth[0]", "rgb[1]"]);
    assert_eq!(labels[10], "overlay");
    assert!(build_agent1_request(&frames(4), &depths(4), &frames(1)[0], &vocab, Agent1Mode::MultiFrame).is_err());
    assert!(build_agent1_request(&frames(5), &depths(4), &frames(1)[0], &vocab, Agent1Mode::MultiFrame).is_err());
}

#[test]
fn agent1_single_frame_request() {
    let vocab = PromptVocabulary::visdrone();
    let req = build_agent1_request(&frames(5), &depths(5), &frames(1)[0], &vocab, Agent1Mode::SingleFrame).unwrap();
    assert_eq!(req.attachments.len(), AGENT1_SINGLE_IMAGES);
    assert_eq!(req.attachments[0].label, "rgb[4]");
    assert!(req.user.contains("Task (STRICT RULES):"));
    assert!(req.user.contains("set it to null and explain"));
}

#[test]
fn agent1_empty_vocabulary() {
    let req = build_agent1_request(&frames(5), &depths(5), &frames(1)[0], &PromptVocabulary::default(), Agent1Mode::MultiFrame).unwrap();
    assert!(req.user.contains("prompt list: []\n"));
}

#[test]
fn requests_are_deterministic() {
    let vocab = PromptVocabulary::visdrone();
    let a = build_agent1_request(&frames(5), &depths(5), &frames(1)[0], &vocab, Agent1Mode::MultiFrame).unwrap();
    let b = build_agent1_request(&frames(5), &depths(5), &frames(1)[0], &vocab, Agent1Mode::MultiFrame).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.manifest_json(), b.manifest_json());
    let body = LiveVlm::chat_body("m", &a).to_string();
    assert_eq!(body, LiveVlm::chat_body("m", &b).to_string());
}

#[test]
fn agent2_request_normalizes_candidates() {
    let overlay = RgbImage::new(1000, 800);
    let c = [cand(0, (500.0, 400.0), 100.0, 0.98765, 31_417)];
    let req = build_agent2_request(&c, "top-right corner of the scene", &frames(5), &overlay, 3).unwrap();
    assert_eq!(req.attachments.len(), AGENT2_IMAGES);
    assert!(req.user.contains("User preference: top-right corner of the scene\n"));
    assert!(req.user.contains("Select top 3 indices"));
    for needle in [r#""cx_norm": 0.5"#, r#""cy_norm": 0.5"#, r#""r_norm_w": 0.1"#, r#""r_norm_h": 0.125"#, r#""safe_ratio": 0.9877"#] {
        assert!(req.user.contains(needle), "missing {needle}");
    }
    assert!(req.system.as_deref().unwrap().starts_with("You are selecting circular landing zones"));
    assert!(build_agent2_request(&[], "x", &frames(5), &overlay, 3).is_err());
    assert!(build_agent2_request(&c, "x", &frames(4), &overlay, 3).is_err());
}

#[test]
fn agent2_request_lists_all_candidates() {
    let overlay = RgbImage::new(640, 480);
    let cs: Vec<_> = (0..30).map(|i| cand(i, (10.0 * i as f64, 20.0), 15.0, 0.99, 700)).collect();
    let req = build_agent2_request(&cs, "anywhere", &frames(5), &overlay, 3).unwrap();
    for i in 0..30 {
        assert!(req.user.contains(&format!("\"index\": {i},")));
    }
    assert!(!req.user.contains("\"index\": 30,"));
}

#[test]
fn agent1_parsing() {
    let v = parse_agent1_response(GOOD_REPLY).unwrap();
    assert_eq!(v.landing_pad_safe, PadSafety::Safe);
    assert_eq!(v.updated_vocabulary.classes(), ["person"]);
    assert_eq!((v.reasoning.as_str(), v.future_prediction.as_str()), ("r", "f"));

    let null = GOOD_REPLY.replace("true", "null");
    assert_eq!(parse_agent1_response(&null).unwrap().landing_pad_safe, PadSafety::Unknown);
    let unsafe_ = GOOD_REPLY.replace("true", "false");
    assert_eq!(parse_agent1_response(&unsafe_).unwrap().landing_pad_safe, PadSafety::Unsafe);

    let fenced = format!("Here you go:\n```json\n{GOOD_REPLY}\n```\nThanks");
    assert_eq!(parse_agent1_response(&fenced).unwrap(), v);

    let missing = r#"{"landing_pad_safe":true,"reasoning":"r","updated_prompt_list":[]}"#;
    match parse_agent1_response(missing) {
        Err(Error::Parse { reason, raw }) => {
            assert!(reason.contains("future_prediction"));
            assert_eq!(raw, missing);
        }
        other => panic!("expected parse error, got {other:?}"),
    }
    assert!(parse_agent1_response("not json").is_err());
    assert!(parse_agent1_response(&GOOD_REPLY.replace("true", "\"yes\"")).is_err());
}

#[test]
fn vocabulary_refinement() {
    let prior = PromptVocabulary::visdrone();
    let reply = r#"{"landing_pad_safe":false,"reasoning":"","future_prediction":"",
        "updated_prompt_list":["person","black asphalt road"," Person ","person"]}"#;
    let v = parse_agent1_response(reply).unwrap();
    assert_eq!(refine_vocabulary(&prior, Some(&v)).classes(), ["person", "black asphalt road"]);
    assert_eq!(refine_vocabulary(&prior, None), prior);
    let empty = parse_agent1_response(&GOOD_REPLY.replace(r#"["person"]"#, "[]")).unwrap();
    assert_eq!(refine_vocabulary(&prior, Some(&empty)), prior);
}

#[test]
fn agent2_parsing() {
    let cs: Vec<_> = (0..5).map(|i| cand(i, (0.0, 0.0), 1.0, 1.0, 1)).collect();
    let r = parse_agent2_response(r#"{"ranked":[{"index":2,"reason":"x"}]}"#, &cs[..3], 3);
    assert_eq!(r, vec![RankedZone { index: 2, reason: "x".into() }]);
    let r = parse_agent2_response(r#"{"ranked":[{"index":99},{"index":1},{"index":1},{"index":-1},{"index":4}]}"#, &cs, 3);
    assert_eq!(r.iter().map(|z| z.index).collect::<Vec<_>>(), [1, 4]);
    assert!(parse_agent2_response("garbage", &cs, 3).is_empty());
    let r = parse_agent2_response(r#"{"ranked":[{"index":0},{"index":1},{"index":2},{"index":3}]}"#, &cs, 3);
    assert_eq!(r.len(), 3);
}

#[test]
fn heuristic_examples() {
    // Image 200×200, centre (100, 100).
    let cs = [
        cand(0, (110.0, 100.0), 10.0, 0.99, 300),
        cand(1, (105.0, 100.0), 10.0, 0.97, 300),
        cand(2, (140.0, 100.0), 10.0, 0.99, 300),
    ];
    assert_eq!(heuristic_rank(&cs, 200, 200), [0, 2, 1]);
    assert_eq!(heuristic_rank(&cs[..1], 200, 200), [0]);
    let same: Vec<_> = (0..4).rev().map(|i| cand(i, (50.0, 50.0), 5.0, 1.0, 80)).collect();
    assert_eq!(heuristic_rank(&same, 200, 200), [0, 1, 2, 3]);
}

#[test]
fn ranking_fills_from_heuristic() {
    let overlay = RgbImage::new(100, 100);
    let cs: Vec<_> = (0..5).map(|i| cand(i, (20.0 * i as f64, 50.0), 10.0, 1.0 - 0.01 * i as f64, 300)).collect();
    let vlm = ScriptedVlm::new(None, Some(r#"{"ranked":[{"index":3,"reason":"matches"}]}"#.to_string()));
    let r = rank_zones(&vlm, &ctx(AgentRole::Agent2), &cs, "pref", &frames(5), &overlay, 3).unwrap();
    assert_eq!(r.zones.iter().map(|z| z.index).collect::<Vec<_>>(), [3, 0, 1]);
    assert_eq!(r.source, RankingSource::Mixed);

    let failed = rank_zones(&ScriptedVlm::failing(), &ctx(AgentRole::Agent2), &cs, "pref", &frames(5), &overlay, 3).unwrap();
    assert_eq!(failed.zones.iter().map(|z| z.index).collect::<Vec<_>>(), heuristic_rank(&cs, 100, 100)[..3]);
    assert_eq!(failed.source, RankingSource::Heuristic);
    assert!(failed.backend_error.is_some());

    let two = rank_zones(&ScriptedVlm::failing(), &ctx(AgentRole::Agent2), &cs[..2], "pref", &frames(5), &overlay, 3).unwrap();
    assert_eq!(two.zones.len(), 2);

    let full = ScriptedVlm::new(None, Some(r#"{"ranked":[{"index":4},{"index":2},{"index":0}]}"#.to_string()));
    let r = rank_zones(&full, &ctx(AgentRole::Agent2), &cs, "pref", &frames(5), &overlay, 3).unwrap();
    assert_eq!(r.source, RankingSource::Vlm);
    assert_eq!(r.zones.iter().map(|z| z.index).collect::<Vec<_>>(), [4, 2, 0]);
}

#[test]
fn success_rate_examples() {
    assert_eq!(pad_safety_success_rate(&[vec![true; 5], vec![true; 5]]).unwrap(), 1.0);
    let r = pad_safety_success_rate(&[vec![true; 5], vec![true, true, true, false, false]]).unwrap();
    assert!((r - 0.8).abs() < 1e-15);
    assert_eq!(pad_safety_success_rate(&[vec![false; 5]]).unwrap(), 0.0);
    assert!(pad_safety_success_rate(&[]).is_err());
    assert!(pad_safety_success_rate(&[vec![]]).is_err());
}

#[test]
fn replay_and_recording_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let req = VlmRequest {
        system: None,
        user: "u".into(),
        attachments: vec![],
    };
    let replay = ReplayVlm::new(dir.path());
    assert!(matches!(
        replay.complete(&ctx(AgentRole::Agent1), &req),
        Err(BackendError::MissingFixture(_))
    ));
    let recorder = RecordingVlm::new(ScriptedVlm::new(Some(GOOD_REPLY.to_string()), None), dir.path());
    assert_eq!(recorder.complete(&ctx(AgentRole::Agent1), &req).unwrap(), GOOD_REPLY);
    assert!(dir.path().join("batch_000/agent1_run0.txt").exists());
    assert_eq!(replay.complete(&ctx(AgentRole::Agent1), &req).unwrap(), GOOD_REPLY);
    assert!(recorder.complete(&ctx(AgentRole::Agent2), &req).is_err());
}

#[test]
fn consult_agent1_paths() {
    let req = VlmRequest {
        system: None,
        user: "u".into(),
        attachments: vec![],
    };
    let ok = consult_agent1(&ScriptedVlm::new(Some(GOOD_REPLY.to_string()), None), &ctx(AgentRole::Agent1), &req);
    assert!(ok.verdict.is_some() && ok.error.is_none());
    let bad = consult_agent1(&ScriptedVlm::new(Some("nope".to_string()), None), &ctx(AgentRole::Agent1), &req);
    assert!(bad.verdict.is_none() && bad.raw_reply.is_some());
    let failed = consult_agent1(&ScriptedVlm::failing(), &ctx(AgentRole::Agent1), &req);
    assert!(failed.verdict.is_none() && failed.raw_reply.is_none());
}

#[test]
fn chat_wire_format() {
    let req = VlmRequest {
        system: Some("sys".into()),
        user: "hello".into(),
        attachments: vec![Attachment {
            label: "a".into(),
            png: vec![1, 2, 3],
        }],
    };
    let body = LiveVlm::chat_body("o3-2025-04-16", &req);
    assert_eq!(body["model"], "o3-2025-04-16");
    assert_eq!(body["messages"][0]["content"], "sys");
    assert_eq!(body["messages"][1]["content"][0]["text"], "hello");
    assert_eq!(body["messages"][1]["content"][1]["image_url"]["url"], "data:image/png;base64,AQID");
    let reply = json!({"choices": [{"message": {"content": "hi"}}]});
    assert_eq!(LiveVlm::reply_text(&reply).unwrap(), "hi");
    assert!(LiveVlm::reply_text(&json!({})).is_err());
}

fn arb_text() -> impl Strategy<Value = String> {
    "[ -~]{0,40}"
}

proptest! {
    #[test]
    fn verdict_round_trips(
        safe in proptest::option::of(any::<bool>()),
        reasoning in arb_text(),
        future in arb_text(),
        classes in proptest::collection::vec("[a-z ]{1,12}", 0..6),
    ) {
        let v = AgentVerdict {
            landing_pad_safe: safe.into(),
            reasoning,
            future_prediction: future,
            updated_vocabulary: PromptVocabulary::new(classes),
        };
        prop_assert_eq!(parse_agent1_response(&v.to_reply_json()).unwrap(), v);
    }

    #[test]
    fn heuristic_is_permutation_invariant(
        specs in proptest::collection::vec((0u8..4, 0u8..3, 0u8..10, 0u8..10), 1..15),
        seed in any::<u64>(),
    ) {
        let cs: Vec<_> = specs.iter().enumerate().map(|(i, s)| {
            cand(i, (s.2 as f64 * 10.0, s.3 as f64 * 10.0), 5.0, 0.9 + s.0 as f64 * 0.02, 50 + s.1 as usize)
        }).collect();
        let mut shuffled = cs.clone();
        // Deterministic Fisher-Yates driven by the seed.
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13; state ^= state >> 7; state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(heuristic_rank(&cs, 100, 100), heuristic_rank(&shuffled, 100, 100));
    }

    #[test]
    fn ranking_never_exceeds_top_n(n in 1usize..8, top_n in 0usize..5, reply in proptest::collection::vec(0u64..12, 0..8)) {
        let cs: Vec<_> = (0..n).map(|i| cand(i, (i as f64, 0.0), 2.0, 1.0, 10)).collect();
        let entries: Vec<Value> = reply.iter().map(|i| json!({"index": i})).collect();
        let vlm = ScriptedVlm::new(None, Some(json!({"ranked": entries}).to_string()));
        let r = rank_zones(&vlm, &ctx(AgentRole::Agent2), &cs, "p", &frames(5), &RgbImage::new(10, 10), top_n).unwrap();
        let idx: BTreeSet<usize> = r.zones.iter().map(|z| z.index).collect();
        prop_assert_eq!(idx.len(), r.zones.len());
        prop_assert_eq!(r.zones.len(), top_n.min(n));
    }
}
