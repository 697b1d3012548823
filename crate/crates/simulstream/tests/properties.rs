//! Cross-module invariants driven by randomized inputs.

use proptest::prelude::*;

use simulstream::asr::{AudioTimeline, FixtureAsr, TimedWord, TranscriptState};
use simulstream::llm::{ScriptedLlm, END_OF_TURN_MARKER};
use simulstream::metrics::{
    average_lagging, corpus_bleu, length_aware_average_lagging, DelaySequence,
};
use simulstream::policy::{Action, Session, SessionConfig, StepOutcome};
use simulstream::prompt::{load_background, render_prompt, ChatTemplate, PromptSpec};

fn fixture_strategy() -> impl Strategy<Value = Vec<TimedWord>> {
    proptest::collection::vec(50u64..=500, 1..10).prop_map(|gaps| {
        let mut end = 0;
        gaps.iter()
            .enumerate()
            .map(|(i, gap)| {
                end += gap;
                TimedWord::new(format!("w{i}"), end)
            })
            .collect()
    })
}

fn script_strategy() -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec(
        prop_oneof![
            3 => prop_oneof![
                Just("Ja"), Just(" und"), Just("xyz"), Just(" kurz."),
                Just("Wort "), Just(" zwei Worte"),
            ].prop_map(str::to_string),
            1 => Just(END_OF_TURN_MARKER.to_string()),
        ],
        0..24,
    )
}

proptest! {
    /// Committed words only ever grow; availability stamps never decrease
    /// along committed ++ pending; replays are identical.
    #[test]
    fn asr_prefix_stability_and_monotone_stamps(
        words in fixture_strategy(),
        chunk in 100u64..=450,
    ) {
        let timeline = AudioTimeline::from_fixture(words).unwrap()
            .with_chunk_duration(chunk).unwrap();
        let mut state = TranscriptState::new();
        let mut committed_history: Vec<Vec<String>> = Vec::new();
        let mut step = 0u32;
        while !state.audio_finished() {
            state.ingest_chunk(&timeline, &FixtureAsr).unwrap();
            if step % 2 == 0 {
                state.drain_word();
            }
            step += 1;
            let committed: Vec<String> =
                state.committed().iter().map(|w| w.word.clone()).collect();
            if let Some(prev) = committed_history.last() {
                prop_assert!(committed.starts_with(prev));
            }
            committed_history.push(committed);
            let stamps: Vec<u64> = state
                .committed()
                .iter()
                .map(|w| w.available_at_ms)
                .chain(state.pending().map(|w| w.available_at_ms))
                .collect();
            prop_assert!(stamps.windows(2).all(|p| p[0] <= p[1]));
        }
    }

    /// Same fixture and chunking, same transcript history.
    #[test]
    fn asr_simulated_determinism(words in fixture_strategy(), chunk in 100u64..=450) {
        let run = || {
            let timeline = AudioTimeline::from_fixture(words.clone()).unwrap()
                .with_chunk_duration(chunk).unwrap();
            let mut state = TranscriptState::new();
            let mut history = Vec::new();
            while !state.audio_finished() {
                state.ingest_chunk(&timeline, &FixtureAsr).unwrap();
                history.push((
                    state.audio_cursor_ms(),
                    state.pending().map(|w| w.word.clone()).collect::<Vec<_>>(),
                ));
            }
            history
        };
        prop_assert_eq!(run(), run());
    }

    /// Session invariants: the gate, monotone WRITE stamps, causality
    /// against availability stamps, conservation, and output prefix
    /// stability, observed step by step.
    #[test]
    fn session_step_invariants(
        words in fixture_strategy(),
        script in script_strategy(),
        min_read in 0u64..=2000,
    ) {
        let cfg = SessionConfig {
            min_read_time_ms: min_read,
            chunk_duration_ms: 200,
            background_enabled: false,
            ..SessionConfig::default()
        };
        let timeline = AudioTimeline::from_fixture(words).unwrap();
        let llm = ScriptedLlm::from_markers(script);
        let mut session =
            Session::new(&cfg, timeline, &FixtureAsr, &llm, None).unwrap();
        let mut writes_seen = 0usize;
        let mut reads_seen = 0usize;
        let mut last_at = 0u64;
        let mut prev_written: Vec<String> = Vec::new();
        for _ in 0..10_000 {
            match session.step().unwrap() {
                StepOutcome::Finalize => break,
                StepOutcome::Acted(action) => {
                    prop_assert!(action.at_source_ms() >= last_at);
                    last_at = action.at_source_ms();
                    match action {
                        Action::Write { at_source_ms, word } => {
                            prop_assert!(at_source_ms >= min_read);
                            writes_seen += 1;
                            let written: Vec<String> = prev_written
                                .iter()
                                .cloned()
                                .chain(std::iter::once(word))
                                .collect();
                            prop_assert!(written.starts_with(&prev_written));
                            prev_written = written;
                        }
                        Action::Read { .. } => reads_seen += 1,
                    }
                }
            }
        }
        let record = session.run("s", "ref").unwrap();
        let trace_writes = record.trace.iter().filter(|a| a.is_write()).count();
        let trace_reads = record.trace.len() - trace_writes;
        prop_assert_eq!(trace_writes, writes_seen);
        prop_assert_eq!(trace_reads, reads_seen);
        // Conservation: every source word entered by exactly one READ, and
        // WRITEs plus finalization words make up the hypothesis.
        let hyp_words: Vec<&str> = record.hypothesis.split_whitespace().collect();
        prop_assert_eq!(record.delays.len(), hyp_words.len());
        prop_assert!(trace_writes <= hyp_words.len());
        prop_assert!(record.delays.windows(2).all(|p| p[0] <= p[1]));
        prop_assert!(record
            .delays
            .iter()
            .all(|&d| d <= record.source_duration_ms));
        // The words written during stepping are a prefix of the final
        // hypothesis.
        prop_assert_eq!(
            &hyp_words[..prev_written.len()],
            &prev_written.iter().map(String::as_str).collect::<Vec<_>>()[..]
        );
    }

    /// Scaling delays and duration by c scales AL and LAAL by exactly c
    /// (within floating-point tolerance).
    #[test]
    fn lagging_rescaling_invariance(
        gaps in proptest::collection::vec(0u64..500, 1..20),
        ref_len in 1usize..20,
        scale in 2u64..=16,
    ) {
        let duration: u64 = gaps.iter().sum::<u64>() + 1;
        let mut acc = 0u64;
        let delays: Vec<f64> = gaps.iter().map(|g| { acc += g; acc as f64 }).collect();
        let seq = DelaySequence::new(delays.clone(), duration as f64, ref_len).unwrap();
        let scaled = DelaySequence::new(
            delays.iter().map(|d| d * scale as f64).collect(),
            (duration * scale) as f64,
            ref_len,
        ).unwrap();
        let al = average_lagging(&seq).unwrap();
        let al_scaled = average_lagging(&scaled).unwrap();
        prop_assert!((al_scaled - al * scale as f64).abs() < 1e-6);
        let laal = length_aware_average_lagging(&seq).unwrap();
        let laal_scaled = length_aware_average_lagging(&scaled).unwrap();
        prop_assert!((laal_scaled - laal * scale as f64).abs() < 1e-6);
        prop_assert!(laal >= al - 1e-9);
    }

    /// BLEU stays in bounds and only a perfect corpus reaches 100.
    #[test]
    fn bleu_bounds(
        pairs in proptest::collection::vec(
            (
                proptest::collection::vec(0usize..6, 1..10),
                proptest::collection::vec(0usize..6, 1..10),
            ),
            1..8,
        ),
    ) {
        let vocab = ["der", "Hund", "läuft", "schnell,", "heute", "3.14"];
        let to_text = |ids: &Vec<usize>| {
            ids.iter().map(|&i| vocab[i]).collect::<Vec<_>>().join(" ")
        };
        let hyps: Vec<String> = pairs.iter().map(|(h, _)| to_text(h)).collect();
        let refs: Vec<String> = pairs.iter().map(|(_, r)| to_text(r)).collect();
        let score = corpus_bleu(&hyps, &refs).unwrap();
        prop_assert!((0.0..=100.0).contains(&score));
        if score == 100.0 {
            prop_assert_eq!(&hyps, &refs);
        }
    }

    /// Exactly one user and one assistant header; the system header comes
    /// first; a serialized background document reloads to itself.
    #[test]
    fn prompt_structure_and_background_round_trip(
        source in proptest::collection::vec("[a-zA-Z]{1,8}", 1..6),
        target in proptest::collection::vec("[a-zA-Z]{1,8}", 0..6),
        priming in any::<bool>(),
        entities in proptest::collection::btree_set("[a-zA-Z]{1,6}", 0..4),
    ) {
        let entities: Vec<serde_json::Value> = entities
            .into_iter()
            .map(|e| serde_json::json!({"entity": e, "description": "d"}))
            .collect();
        let doc = serde_json::json!({"topic": "T", "named_entities": entities}).to_string();
        let background = load_background(&doc).unwrap();
        prop_assert_eq!(
            load_background(&background.to_compact_json()).unwrap(),
            background.clone()
        );

        let mut spec = PromptSpec::new("English", "German", Some(background));
        spec.partial_source = source;
        spec.partial_target = target;
        spec.priming_enabled = priming;
        let template = ChatTemplate::default();
        let rendered = render_prompt(&spec, &template).unwrap();
        let sys = format!("{}system{}", template.header_open, template.header_close);
        let user = format!("{}user{}", template.header_open, template.header_close);
        let assistant = format!(
            "{}assistant{}",
            template.header_open, template.header_close
        );
        prop_assert_eq!(rendered.matches(&sys).count(), 1);
        prop_assert_eq!(rendered.matches(&user).count(), 1);
        prop_assert_eq!(rendered.matches(&assistant).count(), 1);
        let sys_at = rendered.find(&sys).unwrap();
        prop_assert!(sys_at < rendered.find(&user).unwrap());
        prop_assert!(rendered.find(&user).unwrap() < rendered.find(&assistant).unwrap());
    }
}
