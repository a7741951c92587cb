//! Diagnostics against Floyd–Warshall, exhaustive enumeration and metric
//! properties.

mod common;

use achgnn::diagnostics::{citation_distances, jaccard_ngram};
use achgnn::graph::HeteroGraph;
use achgnn::linalg::Matrix;
use common::{checks, random_graph};

#[test]
fn diagnostics_criterion() {
    let outcome = checks::diagnostics_oracle();
    assert!(outcome.is_ok(), "{outcome:?}");
}

#[test]
fn jaccard_exact_value() {
    assert_eq!(jaccard_ngram("a b c", "b c d", 2), 1.0 / 3.0);
}

#[test]
fn distances_satisfy_triangle_inequality() {
    let g = random_graph(30, 0, 2, 1, 0.07, 41);
    let d: Vec<Vec<Option<usize>>> = (0..30).map(|s| citation_distances(&g, s)).collect();
    for i in 0..30 {
        assert_eq!(d[i][i], Some(0));
        for j in 0..30 {
            assert_eq!(d[i][j], d[j][i]);
            for m in 0..30 {
                if let (Some(a), Some(b), Some(c)) = (d[i][j], d[i][m], d[m][j]) {
                    assert!(a <= b + c);
                }
            }
        }
    }
}

#[test]
fn adding_an_edge_never_lengthens_paths() {
    let g = random_graph(30, 0, 2, 1, 0.05, 42);
    let mut cites = g.citation_edges();
    cites.push((0, 29));
    let h = HeteroGraph::build(g.paper_features().clone(), Matrix::zeros(0, 2), &cites, &[], g.aspect_edges(), g.aspect_names().to_vec())
        .unwrap()
        .0;
    for s in 0..30 {
        for (before, after) in citation_distances(&g, s).into_iter().zip(citation_distances(&h, s)) {
            match (before, after) {
                (Some(b), Some(a)) => assert!(a <= b),
                (Some(_), None) => panic!("path disappeared"),
                _ => {}
            }
        }
    }
}
