use std::collections::BTreeSet;
use std::fs;

use dynsample::io::{load_edge_list, load_labels, write_edge_list, write_labels, write_vertex_map};
use dynsample_core::nalgebra::DMatrix;
use dynsample_core::sbm::{make_block_model, sample_sbm};

#[test]
fn sampled_graph_round_trips_through_an_edge_list() {
    let m = make_block_model(DMatrix::from_row_slice(2, 2, &[0.3, 0.05, 0.05, 0.25]), vec![0.4, 0.6]).unwrap();
    let (g, tau) = sample_sbm(&m, 300, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.tsv");
    write_edge_list(&path, &g).unwrap();
    let list = load_edge_list(&path).unwrap();
    assert_eq!((list.duplicates, list.self_loops), (0, 0));
    let original = |v: usize| list.ids[v].parse::<usize>().unwrap();
    let back: BTreeSet<(usize, usize)> =
        list.graph.edges().iter().map(|(i, j)| (original(i).min(original(j)), original(i).max(original(j)))).collect();
    let want: BTreeSet<(usize, usize)> = g.edges().iter().collect();
    assert_eq!(back, want);

    let labels_path = dir.path().join("labels.tsv");
    let names: Vec<String> = (0..300).map(|v| v.to_string()).collect();
    write_labels(&labels_path, &names, &tau).unwrap();
    let labels = load_labels(&labels_path, &list).unwrap();
    // Same partition, possibly renamed.
    for v in 0..list.ids.len() {
        for w in 0..list.ids.len() {
            assert_eq!(labels[v] == labels[w], tau[original(v)] == tau[original(w)]);
        }
    }

    let map_path = dir.path().join("vertices.map");
    write_vertex_map(&map_path, &list).unwrap();
    let map = fs::read_to_string(map_path).unwrap();
    assert!(map.lines().enumerate().all(|(i, l)| l == format!("{},{i}", list.ids[i])));
}
