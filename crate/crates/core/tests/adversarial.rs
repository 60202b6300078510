use spwin::analysis::{generate_confusion_string, generate_long_edge_case, min_confusable_l, CaseKind, ConfusionCase};
use spwin::engine::replay_adversarial;
use spwin::geometry::GraphType;
use spwin::graph::NodeCoord;
use spwin::Error;

#[test]
fn short_strings_fool_windowed_only() {
    for (w, l) in [(3, 4), (9, 6)] {
        let case = generate_confusion_string(15, w, CaseKind::Short).unwrap();
        assert_eq!(case.l, l);
        let r = replay_adversarial(&case).unwrap();
        assert!(r.windowed_can_fail(), "w={w}: {r:?}");
        assert!(r.global_never_fails(), "w={w}: {r:?}");
        assert_eq!(replay_adversarial(&case).unwrap(), r);
    }
}

#[test]
fn wide_buffers_are_infeasible() {
    for w in 13..=15 {
        assert!(matches!(generate_confusion_string(15, w, CaseKind::Short), Err(Error::Infeasible { .. })));
    }
}

#[test]
fn long_edge_string_fools_windowed_only() {
    let case = generate_long_edge_case(6, 7, 7, 2).unwrap();
    assert_eq!((case.l, case.wrong_weight), (5, 4));
    let r = replay_adversarial(&case).unwrap();
    assert!(r.windowed_can_fail(), "{r:?}");
    assert!(r.global_never_fails(), "{r:?}");
}

fn diagonal(d: u32, w: u32, start: (i32, i32), step: i32, l: u32) -> ConfusionCase {
    ConfusionCase {
        kind: CaseKind::Short,
        a: d,
        b: d,
        height: d,
        w,
        l,
        wrong_weight: 0,
        path: (0..=l as i32).map(|s| (start.0 + s, start.1 + step * s)).collect(),
        graph_type: GraphType::X,
        cut: "short".into(),
    }
}

/// Shortest straight diagonal string, left end in the first window, that the
/// windowed decoder can get wrong while the global decoder gets it right.
fn brute_min_l(d: u32, w: u32) -> Option<u32> {
    let probe = diagonal(d, w, (0, 0), 1, 1);
    let (_, g) = probe.build().unwrap();
    let exists = |(col, row): (i32, i32)| g.node_id(NodeCoord { col, row, round: 0 }).is_some();
    for l in 1..d.div_ceil(2) {
        for col in 0..=d as i32 {
            for row in 0..=d as i32 {
                for step in [1, -1] {
                    let case = diagonal(d, w, (col, row), step, l);
                    if !case.path.iter().all(|&c| exists(c)) {
                        continue;
                    }
                    let r = replay_adversarial(&case).unwrap();
                    if r.windowed_can_fail() && r.global_never_fails() {
                        return Some(l);
                    }
                }
            }
        }
    }
    None
}

#[test]
fn min_confusable_l_matches_geometric_search() {
    for d in [3u32, 5, 7, 9, 11] {
        for w in 0..=d {
            assert_eq!(brute_min_l(d, w), min_confusable_l(d, w), "d={d} w={w}");
        }
    }
}
