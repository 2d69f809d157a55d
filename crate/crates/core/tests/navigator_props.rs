mod common;

use otr_core::call_tree::EventOwner;
use otr_core::demos::{run_demo, ClockMode, DemoName};
use otr_core::navigator::{location_at, stack, step, StepError, StepOp};
use otr_core::wire::TruncationFlag;
use otr_core::Trace;
use proptest::prelude::*;

fn generated(seed: u64, close_all: bool) -> (Vec<common::Op>, Trace) {
    let mut rng = common::rng(seed);
    let ops = common::gen_ops(&mut rng, 60, close_all);
    let events = common::ops_to_events(&mut rng, &ops);
    let trace = Trace::new(common::stream_schema(), events, TruncationFlag::default()).unwrap();
    (ops, trace)
}

fn demo(name: DemoName) -> Trace {
    let out = run_demo(name, ClockMode::Logical).unwrap();
    Trace::from_bytes(&out.trace, out.schema).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stack_matches_open_interval(seed in any::<u64>(), close_all in any::<bool>()) {
        let (ops, trace) = generated(seed, close_all);
        let profile = common::depth_profile(&ops);
        let n = trace.forest.len();
        for (c, depth) in profile.iter().enumerate().take(n + 1) {
            let view = stack(&trace, c).unwrap();
            prop_assert_eq!(view.frames.len(), *depth);
            let expected: Vec<_> = trace
                .forest
                .frames()
                .iter()
                .filter(|f| f.begin_event < c && c <= trace.forest.end_or_len(f))
                .map(|f| f.id)
                .collect();
            let got: Vec<_> = view.frames.iter().map(|f| f.frame_id).collect();
            prop_assert_eq!(got, expected);
        }
    }

    #[test]
    fn steps_are_pure_and_in_range(seed in any::<u64>(), close_all in any::<bool>()) {
        let (_, trace) = generated(seed, close_all);
        let f = &trace.forest;
        for c in 0..=f.len() {
            for op in StepOp::ALL {
                let a = step(f, c, op);
                prop_assert_eq!(&a, &step(f, c, op));
                match a {
                    Ok(to) => prop_assert!(to <= f.len()),
                    Err(StepError::NoEnclosingFrame(_)) => {
                        prop_assert!(matches!(op, StepOp::Out | StepOp::BackOut));
                        prop_assert!(stack(&trace, c).unwrap().frames.is_empty());
                    }
                    Err(e) => prop_assert!(false, "{}", e),
                }
            }
        }
        prop_assert!(step(f, f.len() + 1, StepOp::Next).is_err());
    }

    #[test]
    fn inverse_pairs(seed in any::<u64>()) {
        let (_, trace) = generated(seed, true);
        let f = &trace.forest;
        let n = f.len();
        for c in 0..=n {
            if c < n {
                prop_assert_eq!(step(f, step(f, c, StepOp::Next).unwrap(), StepOp::Prev), Ok(c));
                if matches!(f.owner(c), Some(EventOwner::Open(_))) {
                    prop_assert_eq!(step(f, step(f, c, StepOp::Over).unwrap(), StepOp::BackOver), Ok(c));
                }
            }
            if c > 0 && f.events()[c - 1].is_close() {
                prop_assert_eq!(step(f, step(f, c, StepOp::BackOver).unwrap(), StepOp::Over), Ok(c));
            }
            if let (Ok(out), Ok(back)) = (step(f, c, StepOp::Out), step(f, c, StepOp::BackOut)) {
                prop_assert_eq!(step(f, out, StepOp::BackOver), Ok(back));
                prop_assert_eq!(step(f, back, StepOp::Over), Ok(out));
            }
        }
    }
}

#[test]
fn over_a_leaf_call_skips_its_match_and_return() {
    let trace = demo(DemoName::Depth);
    let f = &trace.forest;
    let leaf = f
        .frames()
        .iter()
        .find(|fr| trace.fn_name(fr.fn_id) == "depth" && fr.child_frames().next().is_none())
        .unwrap();
    let c = leaf.begin_event;
    assert_eq!(step(f, c, StepOp::Over), Ok(c + 3));
    assert_eq!(step(f, c, StepOp::Next), Ok(c + 1));
}

#[test]
fn stack_after_the_innermost_raise() {
    let trace = demo(DemoName::Exception);
    // Events: call f, call g, call h, raise (h), raise (g), return (f).
    let view = stack(&trace, 4).unwrap();
    let names: Vec<_> = view.frames.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["f", "g"]);
    let g = &view.frames[1];
    assert_eq!(g.args, ["3"]);
    let h = g.last_closed_child.as_ref().unwrap();
    assert_eq!(h.name, "h");
    assert_eq!(h.outcome.value.as_deref(), Some("Failure \"boom\""));
    assert!(view.frames[0].last_closed_child.is_none());
    assert_eq!(location_at(&trace, 4).unwrap().line, 2);
}

#[test]
fn empty_stack_at_the_ends() {
    let trace = demo(DemoName::Depth);
    assert!(stack(&trace, 0).unwrap().frames.is_empty());
    assert!(stack(&trace, trace.forest.len()).unwrap().frames.is_empty());
    assert_eq!(location_at(&trace, trace.forest.len()), None);
    let at_match = location_at(&trace, 1).unwrap();
    assert_eq!((at_match.file.as_str(), at_match.line), ("lib.ml", 2));
}

#[test]
fn stack_view_serializes() {
    let trace = demo(DemoName::Exception);
    let json = serde_json::to_value(stack(&trace, 4).unwrap()).unwrap();
    assert_eq!(json[1]["last_closed_child"]["outcome"]["kind"], "raised");
    assert_eq!(json[0]["location"]["file"], "exn.ml");
}
