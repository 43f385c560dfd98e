//! The shipped fixture scripts, checked end to end: each file parses,
//! replays to its documented converged text, and carries exactly the
//! ordering evidence it exists to demonstrate.

use fugue::oracle::{
    check_forward_noninterleaving, check_maximal_noninterleaving, check_predicted_order,
    check_strong_list, extract_origins,
};
use fugue::script_text::{parse_script, render_script};
use fugue::sim::{run_script, snapshot_text, ExecutionLog, Script};
use fugue::{ElementId, LeftOrigin, ReplicaId, RightOrigin, Variant, Violation};

const FORCED_WEDGE: &str = include_str!("../fixtures/forced_wedge.script");
const DOUBLE_WEDGE: &str = include_str!("../fixtures/double_wedge.script");
const DOUBLE_WEDGE_LOW_ID: &str = include_str!("../fixtures/double_wedge_low_id.script");
const SHOPPING_LIST: &str = include_str!("../fixtures/shopping_list.script");
const FORWARD_RUNS: &str = include_str!("../fixtures/forward_runs.script");
const BACKWARD_PREPEND: &str = include_str!("../fixtures/backward_prepend.script");

const ALL: [(&str, &str); 6] = [
    ("forced_wedge", FORCED_WEDGE),
    ("double_wedge", DOUBLE_WEDGE),
    ("double_wedge_low_id", DOUBLE_WEDGE_LOW_ID),
    ("shopping_list", SHOPPING_LIST),
    ("forward_runs", FORWARD_RUNS),
    ("backward_prepend", BACKWARD_PREPEND),
];

fn fixture(text: &str) -> Script {
    parse_script(text).expect("shipped fixtures parse")
}

fn run(text: &str, variant: Variant) -> ExecutionLog {
    run_script(&fixture(text), variant).expect("shipped fixtures replay")
}

fn converged_text(log: &ExecutionLog) -> String {
    let first = snapshot_text(log.final_snapshot(&log.replicas[0]).unwrap());
    for replica in &log.replicas {
        assert_eq!(
            snapshot_text(log.final_snapshot(replica).unwrap()),
            first,
            "fixture replicas converge"
        );
    }
    first
}

fn eid(name: &str, counter: u64) -> ElementId {
    ElementId::new(ReplicaId::new(name).unwrap(), counter)
}

#[test]
fn every_fixture_parses_validates_and_rerenders_canonically() {
    for (name, text) in ALL {
        let script = fixture(text);
        assert!(!script.steps.is_empty(), "{name} has steps");
        // Rendering strips comments but preserves the script; a second
        // round trip is a fixed point.
        let rendered = render_script(&script);
        assert_eq!(parse_script(&rendered).unwrap(), script, "{name}");
        assert_eq!(render_script(&parse_script(&rendered).unwrap()), rendered, "{name}");

        for variant in [Variant::Fugue, Variant::FugueMax] {
            let log = run(text, variant);
            log.validate().expect("fixture logs are consistent");
            let strong = check_strong_list(&log).unwrap();
            assert!(strong.is_pass(), "{name} under {variant}: {strong}");
            let forward = check_forward_noninterleaving(&log).unwrap();
            assert!(forward.is_pass(), "{name} under {variant}: {forward}");
            let predicted = check_predicted_order(&log).unwrap();
            assert!(predicted.is_pass(), "{name} under {variant}: {predicted}");
        }
    }
}

#[test]
fn forced_wedge_converges_to_the_wedged_text() {
    for variant in [Variant::Fugue, Variant::FugueMax] {
        let log = run(FORCED_WEDGE, variant);
        assert_eq!(converged_text(&log), "AXBC", "{variant}");
    }
    let log = run(FORCED_WEDGE, Variant::FugueMax);
    assert!(check_maximal_noninterleaving(&log).unwrap().is_pass());
}

#[test]
fn double_wedge_honors_both_wedges_and_its_origin_trees() {
    let log = run(DOUBLE_WEDGE, Variant::FugueMax);
    assert_eq!(converged_text(&log), "AXYBC");
    assert!(check_maximal_noninterleaving(&log).unwrap().is_pass());

    // The recorded origins pin every element of the two wedges: A, B, C
    // anchor at the ends, X saw A_C, Y saw A_B.
    let origins = extract_origins(&log).unwrap();
    let (a, b, c) = (eid("1", 0), eid("2", 0), eid("3", 0));
    let (x, y) = (eid("1", 1), eid("2", 1));
    assert_eq!(
        origins.left_children(&LeftOrigin::Start),
        vec![a.clone(), b.clone(), c.clone()]
    );
    assert_eq!(
        origins.left_children(&LeftOrigin::Element(a.clone())),
        vec![x.clone(), y.clone()]
    );
    assert_eq!(
        origins.right_cohort(&RightOrigin::End),
        vec![a.clone(), b.clone(), c.clone()]
    );
    assert_eq!(origins.right_cohort(&RightOrigin::Element(b)), vec![y]);
    assert_eq!(origins.right_cohort(&RightOrigin::Element(c)), vec![x.clone()]);
    assert!(origins.is_left_descendant(&x, &LeftOrigin::Element(a)));
}

#[test]
fn low_id_double_wedge_separates_the_merge_rules() {
    let max_log = run(DOUBLE_WEDGE_LOW_ID, Variant::FugueMax);
    assert_eq!(converged_text(&max_log), "AXYBC");
    assert!(check_maximal_noninterleaving(&max_log).unwrap().is_pass());

    // Plain id order flips the wedges and the maximal oracle catches it.
    let fugue_log = run(DOUBLE_WEDGE_LOW_ID, Variant::Fugue);
    assert_eq!(converged_text(&fugue_log), "AYXBC");
    let maximal = check_maximal_noninterleaving(&fugue_log).unwrap();
    assert!(!maximal.is_pass());
    assert!(
        maximal.violations.iter().any(|v| matches!(
            v,
            Violation::BackwardAdjacency { element, anchor, .. }
                if *element == eid("4", 0) && *anchor == eid("2", 0)
        )),
        "{maximal}"
    );
}

#[test]
fn shopping_list_keeps_each_users_line_contiguous() {
    for variant in [Variant::Fugue, Variant::FugueMax] {
        let log = run(SHOPPING_LIST, variant);
        let text = converged_text(&log);
        assert_eq!(text, "milk\neggs\nbread\n", "{variant}");
        assert!(text.contains("\neggs"), "{variant}: A's line intact");
        assert!(text.contains("\nbread"), "{variant}: B's line intact");
    }
}

#[test]
fn scenario_fixtures_keep_each_users_run_contiguous() {
    for (name, text) in [("forward_runs", FORWARD_RUNS), ("backward_prepend", BACKWARD_PREPEND)] {
        for variant in [Variant::Fugue, Variant::FugueMax] {
            let log = run(text, variant);
            let merged = converged_text(&log);
            assert_eq!(merged, "abx", "{name} under {variant}");
            assert!(merged.contains("ab"), "{name} under {variant}: run contiguous");
        }
    }
}
