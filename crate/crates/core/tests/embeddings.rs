//! Separation and alignment of the synthetic encoder over the full event
//! vocabulary of the task suite.

use std::collections::BTreeSet;

use vlreward_core::embedding::{Embedding, Encoder, FrameFeature, SyntheticEncoder};
use vlreward_core::env::{event_vocabulary, TaskId};

/// Margin between distinct events. The largest pairwise anchor cosine over
/// the vocabulary below is about 0.4 at D = 64, leaving room under 1 − δ.
const DELTA: f64 = 0.3;

fn vocabulary() -> Vec<String> {
    let set: BTreeSet<String> = TaskId::ALL.into_iter().flat_map(event_vocabulary).collect();
    set.into_iter().collect()
}

fn prompt_for(event: &str) -> String {
    format!("a video of: {event}")
}

fn encoder(vocab: &[String]) -> SyntheticEncoder {
    SyntheticEncoder::with_table(vocab.iter().map(|e| (prompt_for(e), e.clone()))).unwrap()
}

fn cos(a: &Embedding, b: &Embedding) -> f64 {
    let (x, y) = (a.as_slice(), b.as_slice());
    let d: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
    let n = |v: &[f64]| v.iter().map(|p| p * p).sum::<f64>().sqrt();
    d / (n(x) * n(y))
}

fn window_of(event: &str, w: usize) -> Vec<FrameFeature> {
    vec![FrameFeature { values: vec![], event_tags: [event.to_string()].into() }; w]
}

#[test]
fn distinct_events_are_separated_by_the_margin() {
    let vocab = vocabulary();
    assert!(vocab.len() > 30);
    let enc = encoder(&vocab);
    let texts: Vec<Embedding> = vocab.iter().map(|e| enc.encode_text(&prompt_for(e)).unwrap()).collect();
    let mut worst: f64 = -1.0;
    for i in 0..texts.len() {
        assert!((cos(&texts[i], &texts[i]) - 1.0).abs() < 1e-6);
        for j in 0..i {
            let c = cos(&texts[i], &texts[j]);
            worst = worst.max(c);
            assert!(c <= 1.0 - DELTA, "{} / {}: {c}", vocab[i], vocab[j]);
        }
    }
    assert!(worst < 0.5, "largest pairwise cosine {worst}");
}

#[test]
fn single_event_windows_align_with_their_prompt() {
    let vocab = vocabulary();
    let enc = encoder(&vocab);
    let texts: Vec<Embedding> = vocab.iter().map(|e| enc.encode_text(&prompt_for(e)).unwrap()).collect();
    for (i, e) in vocab.iter().enumerate() {
        for w in [1, 4, 16] {
            let seg = enc.encode_segment(&window_of(e, w)).unwrap();
            let own = cos(&seg, &texts[i]);
            for (j, other) in vocab.iter().enumerate() {
                if j != i {
                    let c = cos(&seg, &texts[j]);
                    assert!(own - c >= DELTA, "{e} vs {other}: {own} - {c}");
                }
            }
        }
    }
}

#[test]
fn approach_window_is_nearest_to_the_approach_subgoal() {
    let table = [
        ("the robot hand approaches the door's handle", "door-approach"),
        ("the robot hand grasps the door's handle", "door-grasp"),
        ("the robot hand pulls the door's handle back", "door-pull"),
        ("the robot hand opens the door", "door-open"),
        ("the robot hand moves away from the door", "door-retreat"),
        ("the robot hand closes on nothing", "grip-miss"),
    ];
    let enc = SyntheticEncoder::with_table(table.map(|(p, e)| (p.to_string(), e.to_string()))).unwrap();
    for (prompt, event) in table {
        let seg = enc.encode_segment(&window_of(event, 16)).unwrap();
        let nearest = table
            .iter()
            .map(|(p, _)| (cos(&seg, &enc.encode_text(p).unwrap()), *p))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        assert_eq!(nearest.1, prompt);
    }
}

#[test]
fn evenly_mixed_windows_prefer_present_events() {
    // Two events sharing a window evenly: each beats every absent event. With
    // random anchors this is not guaranteed for lopsided mixtures, where a
    // rare event's share can fall below the chance overlap of the dominant
    // one with some unrelated anchor.
    let vocab = vocabulary();
    let enc = encoder(&vocab);
    let door: Vec<&String> = vocab.iter().filter(|e| e.starts_with("door-")).collect();
    for a in &door {
        for b in &door {
            if a >= b {
                continue;
            }
            let mut frames = window_of(a, 8);
            frames.extend(window_of(b, 8));
            let seg = enc.encode_segment(&frames).unwrap();
            let present = [a, b].map(|e| cos(&seg, &enc.encode_text(&prompt_for(e)).unwrap()));
            for c in vocab.iter().filter(|c| c != a && c != b) {
                let absent = cos(&seg, &enc.encode_text(&prompt_for(c)).unwrap());
                assert!(present.iter().all(|p| *p > absent), "{a}+{b} vs {c}");
            }
        }
    }
}

#[test]
fn all_embeddings_are_unit_norm() {
    let vocab = vocabulary();
    let enc = encoder(&vocab);
    for e in &vocab {
        for z in [enc.encode_text(&prompt_for(e)).unwrap(), enc.encode_segment(&window_of(e, 3)).unwrap()] {
            let n: f64 = z.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
            assert_eq!(z.dim(), enc.dim());
        }
    }
}
