use labelprop::eval::{run_protocol, EvalConfig};
use labelprop::synthetic::{generate, PlantedPartition};
use labelprop::{Hyperparams, Method};

fn sketch(width: usize, depth: usize) -> Hyperparams {
    Hyperparams {
        cm_width: width,
        cm_depth: depth,
        ..Hyperparams::with_method(Method::CmSketch)
    }
}

fn streaming_k5() -> Hyperparams {
    Hyperparams {
        k: 5,
        ..Hyperparams::with_method(Method::Streaming)
    }
}

fn config() -> EvalConfig {
    EvalConfig {
        seeds_per_label: 10,
        rounds: 3,
        ks: vec![1, 5],
        rng_seed: 11,
    }
}

#[test]
fn streaming_at_least_matches_sketch_on_two_clusters() {
    let d = generate(&PlantedPartition {
        clusters: 2,
        nodes_per_cluster: 500,
        intra: 0.05,
        inter: 0.002,
        seeds_per_cluster: 10,
        rng_seed: 1,
    })
    .unwrap();
    let report = run_protocol(&d.graph, &d.gold, &[streaming_k5(), sketch(20, 3)], &config()).unwrap();
    let p1 = |i: usize| report.methods[i].precision[0].unwrap();
    assert!(p1(0) >= p1(1), "streaming {} vs sketch {}", p1(0), p1(1));
}

#[test]
fn undersized_sketch_loses_precision_with_many_labels() {
    // 20 labels into 4 buckets per row: every estimate mixes several labels.
    let d = generate(&PlantedPartition {
        clusters: 20,
        nodes_per_cluster: 50,
        intra: 0.2,
        inter: 0.002,
        seeds_per_cluster: 10,
        rng_seed: 2,
    })
    .unwrap();
    let methods = [streaming_k5(), sketch(4, 2), sketch(109, 3)];
    let report = run_protocol(&d.graph, &d.gold, &methods, &config()).unwrap();
    for r in 0..3 {
        let p1 = |i: usize| report.methods[i].rounds[r].precision[0].unwrap();
        assert!(p1(0) >= 0.9, "streaming round {r}: {}", p1(0));
        assert!(p1(1) < p1(0), "round {r}: sketch(4,2) {} vs streaming {}", p1(1), p1(0));
        assert!(p1(2) >= p1(1), "round {r}: wider sketch {} vs narrow {}", p1(2), p1(1));
    }
}
