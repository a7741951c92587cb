//! One check per acceptance criterion. Each returns `Ok(detail)` on success
//! and `Err(detail)` on failure so callers can report both.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use achgnn::diagnostics::{citation_path_stats, coupling_recall, jaccard_ngram, CouplingMode, PairCategory, PairSample};
use achgnn::evaluation::{
    aspect_accuracy, evaluate_knn, evaluate_training, precision_at_k, rank_candidates, recall_at_k, mrr_at_k,
    run_fold, run_variant, split_folds, AspectSel, EvalOptions, EvalReport, ExperimentConfig, GeneralRule,
    RankedList, Variant,
};
use achgnn::graph::{generate_synthetic, AspectEdge, AspectId, HeteroGraph, NodeId, Relation, SynthConfig};
use achgnn::model::ModelParams;
use achgnn::sampling::{build_layered_sample, sample_neighbors, stream, FanoutConfig, InferencePolicy};
use achgnn::training::{
    aspect_ce_loss, bpr_loss, gradients_on_sample, loss_on_sample, train_from, TrainConfig, TrainExample,
};
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::*;

pub type Check = std::result::Result<String, String>;

fn require(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Four training examples over a random 10-node graph (7 papers, 3 authors).
pub fn gradient_fixture(seed: u64) -> (HeteroGraph, Vec<TrainExample>) {
    let g = random_graph(7, 3, 4, 2, 0.4, seed);
    let mut r = rng(seed + 1);
    let batch = g
        .aspect_edges()
        .iter()
        .take(4)
        .map(|e| {
            let negative = loop {
                let n = r.random_range(0..g.num_papers());
                if n != e.a && n != e.b {
                    break n;
                }
            };
            TrainExample {
                query: e.a,
                positive: e.b,
                negative,
                aspect: e.aspect,
            }
        })
        .collect::<Vec<_>>();
    assert_eq!(batch.len(), 4, "fixture needs four aspect edges");
    (g, batch)
}

/// Criterion 1: analytic gradients against central differences.
pub fn gradient_gate() -> Check {
    const STEP: f64 = 1e-5;
    const TOL: f64 = 1e-4;
    const FLOOR: f64 = 1e-6;
    let started = Instant::now();
    let (g, batch) = gradient_fixture(11);
    let params = random_params(&small_model(2, 5, 3, 6), &g, 12);
    let lambda = 0.2;
    let seeds = achgnn::training::batch_seeds(&batch);
    let sample = build_layered_sample(&g, &seeds, &FanoutConfig::unbounded(2), &mut stream(0, 0)).unwrap();
    let (_, grads) = gradients_on_sample(&g, &params, &batch, lambda, &sample).unwrap();
    let numeric = finite_differences(&params, STEP, |p| {
        loss_on_sample(&g, p, &batch, lambda, &sample).unwrap().total
    });
    let analytic: Vec<(String, Vec<f64>)> = grads.0.tensors().iter().map(|t| (t.name.clone(), t.data.to_vec())).collect();
    let mut worst = (0.0f64, String::new());
    let mut tensors_with_signal = BTreeSet::new();
    for (name, i, fd) in &numeric {
        let a = analytic.iter().find(|(n, _)| n == name).unwrap().1[*i];
        let e = rel_diff(a, *fd, FLOOR);
        if e > worst.0 {
            worst = (e, format!("{name}[{i}] analytic {a:e} numeric {fd:e}"));
        }
        if a.abs() > 1e-8 {
            tensors_with_signal.insert(name.clone());
        }
    }
    // BPR sees only score differences, so the scorer output bias cancels.
    let silent: Vec<&String> = analytic
        .iter()
        .map(|(n, _)| n)
        .filter(|n| *n != "scorer.out_bias" && !tensors_with_signal.contains(*n))
        .collect();
    let shift_grad = analytic.iter().find(|(n, _)| n == "scorer.out_bias").map_or(0.0, |(_, g)| g[0]);
    let elapsed = started.elapsed();
    require(
        worst.0 <= TOL && silent.is_empty() && shift_grad == 0.0 && elapsed < Duration::from_secs(30),
        format!(
            "{} entries in {} tensors, max rel err {:.2e} (tol {TOL:e}, step {STEP:e}, floor {FLOOR:e}) at {}; tensors without signal {:?}; scorer.out_bias gradient {:e} (expected exactly 0); {:.2}s",
            numeric.len(),
            analytic.len(),
            worst.0,
            worst.1,
            silent,
            shift_grad,
            elapsed.as_secs_f64()
        ),
    )
}

/// Criterion 2: sampled encoder and ranking against the dense oracle.
pub fn dense_oracle() -> Check {
    const TOL: f64 = 1e-10;
    const FLOOR: f64 = 1e-12;
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut order_mismatch = Vec::new();
    let mut cases = 0;
    for (case, &(np, na, layers)) in [(5, 2, 1), (12, 5, 2), (20, 10, 2), (30, 20, 2), (35, 15, 3), (50, 0, 2)]
        .iter()
        .enumerate()
    {
        let g = random_graph(np, na, 5, 3, 0.15, 100 + case as u64);
        let params = random_params(&small_model(layers, 6, 3, 7), &g, 200 + case as u64);
        let fanout = FanoutConfig {
            paper_fanout: 1000,
            author_fanout: 1000,
            num_layers: layers,
        };
        let seeds: Vec<NodeId> = (0..np).map(NodeId::paper).chain((0..na).map(NodeId::author)).collect();
        let sample = build_layered_sample(&g, &seeds, &fanout, &mut stream(case as u64, 0)).unwrap();
        let emb = achgnn::model::encode(&g, &params, &sample).unwrap();
        let (dp, da) = dense_encode(&g, &params);
        for (node, h) in emb.iter() {
            let want = if node.is_paper() { &dp[node.index] } else { &da[node.index] };
            for (x, y) in h.iter().zip(want) {
                worst = worst.max(rel_diff(*x, *y, FLOOR));
            }
        }
        // Rankings for every aspect and the general rule.
        let policy = InferencePolicy {
            full_neighborhood_max_papers: 0,
            seed: 0,
        };
        let query = np / 2;
        let candidates: Vec<usize> = (0..np).filter(|&c| c != query).collect();
        let mut sels: Vec<AspectSel> = (0..g.num_aspects()).map(|k| AspectSel::Aspect(AspectId(k))).collect();
        sels.push(AspectSel::General);
        for sel in sels {
            let list = rank_candidates(&g, &params, query, sel, &candidates, &fanout, &policy, GeneralRule::Max).unwrap();
            let mut want: Vec<(usize, f64)> = candidates
                .iter()
                .map(|&c| {
                    let s = match sel {
                        AspectSel::Aspect(k) => dense_score(&params, &dp[query], &dp[c], k.0),
                        AspectSel::General => (0..g.num_aspects())
                            .map(|k| dense_score(&params, &dp[query], &dp[c], k))
                            .fold(f64::NEG_INFINITY, f64::max),
                    };
                    (c, s)
                })
                .collect();
            want.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            for ((c1, s1), (c2, s2)) in list.entries.iter().zip(&want) {
                worst = worst.max(rel_diff(*s1, *s2, FLOOR));
                if c1 != c2 {
                    order_mismatch.push((case, sel));
                    break;
                }
            }
        }
        cases += 1;
    }
    let elapsed = started.elapsed();
    require(
        worst <= TOL && order_mismatch.is_empty() && elapsed < Duration::from_secs(10),
        format!(
            "{cases} graphs up to 50 nodes, max rel err {worst:.2e} (tol {TOL:e}, floor {FLOOR:e}), ranking order mismatches {order_mismatch:?}; {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// The planted graph and splits shared by the learning criteria.
pub struct Planted {
    pub graph: HeteroGraph,
    pub folds: Vec<achgnn::evaluation::FoldSplit>,
}

pub fn planted() -> Planted {
    let (graph, pairs) = generate_synthetic(&SynthConfig::default(), 1).unwrap();
    let folds = split_folds(&pairs, 5, 0.75, 1).unwrap();
    Planted { graph, folds }
}

pub fn experiment(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        train: quick_train_config(seed),
        ..ExperimentConfig::default()
    }
}

fn general_recall(r: &EvalReport) -> f64 {
    r.general.as_ref().map_or(0.0, |m| m.recall_at_k)
}

/// Criterion 3 plus the trained base model reused by criterion 4.
pub fn learning_check(p: &Planted) -> (Check, Option<(ModelParams, EvalReport)>) {
    let started = Instant::now();
    let cfg = experiment(1);
    let split = &p.folds[0];
    let (params, log, report) = match run_fold(&p.graph, split, &cfg) {
        Ok(v) => v,
        Err(e) => return (Err(format!("training failed: {e}")), None),
    };
    let opts = EvalOptions {
        fanout: cfg.train.fanout,
        ..EvalOptions::default()
    };
    let train = evaluate_training(&p.graph, &params, &split.train, 10, cfg.mode, &opts).unwrap();
    let knn = evaluate_knn(&p.graph, split, 10, cfg.mode, 1).unwrap();
    let elapsed = started.elapsed();
    let ok = report.macro_recall() > knn.macro_recall()
        && general_recall(&report) > general_recall(&knn)
        && train.macro_recall() >= 0.9
        && log.epochs.len() <= 30
        && elapsed < Duration::from_secs(300);
    let detail = format!(
        "held-out R@10 macro {:.3} / general {:.3} vs kNN {:.3} / {:.3}; training macro R@10 {:.3} (>= 0.9) after {} epochs; {:.1}s",
        report.macro_recall(),
        general_recall(&report),
        knn.macro_recall(),
        general_recall(&knn),
        train.macro_recall(),
        log.epochs.len(),
        elapsed.as_secs_f64()
    );
    (require(ok, detail), Some((params, report)))
}

/// Criterion 4: classifier accuracy and aspect-removal selectivity.
pub fn disentanglement_check(p: &Planted, base: &(ModelParams, EvalReport)) -> Check {
    let started = Instant::now();
    let cfg = experiment(1);
    let split = &p.folds[0];
    let (params, base_report) = base;
    let opts = EvalOptions {
        fanout: cfg.train.fanout,
        ..EvalOptions::default()
    };
    let acc = aspect_accuracy(&p.graph, params, &split.test, &opts).map_err(|e| e.to_string())?;
    let na = p.graph.num_aspects();
    let mut rows = Vec::new();
    let mut selective = true;
    for k in 0..na {
        let ablated = run_variant(&cfg, Variant::RemoveAspect(AspectId(k)), &p.graph, split, 1).map_err(|e| e.to_string())?;
        let drops: Vec<f64> = (0..na)
            .map(|j| base_report.per_aspect[j].recall_at_k - ablated.per_aspect[j].recall_at_k)
            .collect();
        let own = drops[k];
        let other = (0..na).filter(|&j| j != k).map(|j| drops[j]).fold(f64::NEG_INFINITY, f64::max);
        selective &= own > other;
        rows.push(format!("k={k}: own drop {own:.3}, max other {other:.3}"));
    }
    let elapsed = started.elapsed();
    require(
        acc >= 0.9 && selective && elapsed < Duration::from_secs(600),
        format!(
            "held-out aspect accuracy {acc:.3} (>= 0.9); {}; {:.1}s for 4 retrains (+1 shared base)",
            rows.join("; "),
            elapsed.as_secs_f64()
        ),
    )
}

/// Training seeds averaged by criterion 5; run `r` uses fold `r`.
pub const LINEAGE_SEEDS: [u64; 3] = [100, 101, 102];

/// Criterion 5: full > remove-authorship > randomize-authorship on general
/// R@10, averaged over `LINEAGE_SEEDS`.
pub fn lineage_check(p: &Planted) -> Check {
    let started = Instant::now();
    let mut sums = [0.0; 3];
    let mut runs = Vec::new();
    for (r, &seed) in LINEAGE_SEEDS.iter().enumerate() {
        let split = &p.folds[r];
        let cfg = experiment(seed);
        let (_, _, full) = run_fold(&p.graph, split, &cfg).map_err(|e| e.to_string())?;
        let removed = run_variant(&cfg, Variant::RemoveAuthorship, &p.graph, split, seed).map_err(|e| e.to_string())?;
        let random = run_variant(&cfg, Variant::RandomizeAuthorship, &p.graph, split, seed).map_err(|e| e.to_string())?;
        let v = [general_recall(&full), general_recall(&removed), general_recall(&random)];
        runs.push(format!("{:.3}/{:.3}/{:.3}", v[0], v[1], v[2]));
        for i in 0..3 {
            sums[i] += v[i];
        }
    }
    let n = LINEAGE_SEEDS.len() as f64;
    let [full, removed, random] = sums.map(|s| s / n);
    let elapsed = started.elapsed();
    require(
        random < removed && removed < full && elapsed < Duration::from_secs(600),
        format!(
            "mean general R@10 over {} seeds: full {full:.3} > remove-authorship {removed:.3} > randomize-authorship {random:.3} (per run full/remove/randomize: {}); {:.1}s",
            LINEAGE_SEEDS.len(),
            runs.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

/// Criterion 6: metrics against exact rational arithmetic.
pub fn metric_oracle() -> Check {
    let mut r = rng(6);
    let mut mismatches = 0;
    let cases = 1000;
    for _ in 0..cases {
        let universe = r.random_range(2..40usize);
        let mut ids: Vec<usize> = (0..universe).collect();
        ids.shuffle(&mut r);
        let n = r.random_range(1..=universe);
        let ranked: Vec<usize> = ids[..n].to_vec();
        let relevant: BTreeSet<usize> = (0..universe).filter(|_| r.random::<f64>() < 0.25).collect();
        let k = r.random_range(1..=15usize);
        let list = RankedList {
            query: usize::MAX,
            aspect: AspectSel::General,
            entries: ranked.iter().enumerate().map(|(i, &c)| (c, -(i as f64))).collect(),
        };
        let (p, rc, m) = rational_metrics(&relevant, &ranked, k);
        let ok = precision_at_k(&relevant, &list, k) == ratio_f64(p)
            && recall_at_k(&relevant, &list, k) == rc.map(ratio_f64)
            && mrr_at_k(&relevant, &list, k) == ratio_f64(m);
        mismatches += usize::from(!ok);
    }
    require(
        mismatches == 0,
        format!("{cases} random cases, {mismatches} differ from exact rationals (bitwise comparison)"),
    )
}

/// Criterion 7: loss closed forms and the lambda = 0 invariant.
pub fn loss_closed_forms() -> Check {
    let ln2 = std::f64::consts::LN_2;
    let ln4 = 4f64.ln();
    let bpr_err = [-3.0, 0.0, 0.5, 17.0].iter().map(|&s| (bpr_loss(s, s) - ln2).abs()).fold(0.0, f64::max);
    let ce_err = [0.0, 1.0, -2.5, 40.0]
        .iter()
        .map(|&v| (aspect_ce_loss(&[v; 4], AspectId(1)).unwrap() - ln4).abs())
        .fold(0.0, f64::max);

    let cfg_synth = SynthConfig {
        num_papers: 40,
        num_authors: 12,
        ..SynthConfig::default()
    };
    let (g, pairs) = generate_synthetic(&cfg_synth, 3).unwrap();
    let mut cfg = TrainConfig {
        lambda: 0.0,
        num_epochs: 3,
        batch_size: 32,
        learning_rate: 1e-2,
        seed: 5,
        ..TrainConfig::default()
    };
    cfg.model = small_model(2, 8, 4, 8);
    let init = ModelParams::init(&cfg.model, g.feature_dim(), g.num_aspects(), &mut rng(9)).unwrap();
    let (trained, _) = train_from(&g, &achgnn::evaluation::training_pairs(&pairs), &cfg, init.clone()).unwrap();
    let classifier_bits = |p: &ModelParams| -> Vec<u64> {
        p.tensors()
            .iter()
            .filter(|t| t.name.starts_with("classifier."))
            .flat_map(|t| t.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect()
    };
    let unchanged = classifier_bits(&init) == classifier_bits(&trained);
    let scorer_moved = trained.scorer != init.scorer;
    require(
        bpr_err <= 1e-12 && ce_err <= 1e-12 && unchanged && scorer_moved,
        format!(
            "|bpr(s,s) - ln2| max {bpr_err:.1e}, |CE(uniform 4) - ln4| max {ce_err:.1e} (tol 1e-12); classifier bitwise unchanged after lambda=0 training: {unchanged} (scorer updated: {scorer_moved})"
        ),
    )
}

/// Criterion 8: diagnostics against Floyd–Warshall and exhaustive
/// enumeration.
pub fn diagnostics_oracle() -> Check {
    let mut path_mismatch = 0;
    let mut pairs_checked = 0;
    for s in 0..20u64 {
        let g = random_graph(40, 0, 2, 1, 0.05, 500 + s);
        let fw = floyd_warshall(&g);
        let pairs: Vec<PairSample> = (0..40)
            .flat_map(|i| (0..40).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| PairSample::papers(i, j, PairCategory::Global).unwrap())
            .collect();
        let stats = citation_path_stats(&g, &pairs);
        for (p, l) in pairs.iter().zip(&stats.lengths) {
            pairs_checked += 1;
            path_mismatch += usize::from(*l != fw[p.seed.index][p.other.index]);
        }
    }
    let mut coupling_mismatch = 0;
    for s in 0..5u64 {
        let g = random_graph(20, 0, 2, 1, 0.12, 900 + s);
        let pairs: Vec<(usize, usize)> = (0..20).flat_map(|i| (i + 1..20).map(move |j| (i, j))).collect();
        let want = pairs.iter().filter(|&&(a, b)| share_citation_neighbor(&g, a, b)).count() as f64 / pairs.len() as f64;
        for mode in [CouplingMode::BibliographicCoupling, CouplingMode::CoCitation] {
            if coupling_recall(&g, &pairs, mode).unwrap() != want {
                coupling_mismatch += 1;
            }
        }
    }
    let jac = jaccard_ngram("a b c", "b c d", 2);
    require(
        path_mismatch == 0 && coupling_mismatch == 0 && jac == 1.0 / 3.0,
        format!(
            "20 graphs x 40 nodes: {path_mismatch}/{pairs_checked} path lengths differ from Floyd–Warshall; coupling recall mismatches vs exhaustive enumeration on 5 toy graphs: {coupling_mismatch}; jaccard_ngram(\"a b c\",\"b c d\",2) = {jac:?}"
        ),
    )
}

fn run_cli(bin: &Path, args: &[&str]) -> std::result::Result<Vec<u8>, String> {
    let out = Command::new(bin)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| format!("spawn failed: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} exited with {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn read(path: &Path) -> std::result::Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// A small run configuration for CLI tests.
pub const CLI_CONFIG: &str = r#"{
  "k": 5,
  "folds": 2,
  "train": {
    "num_epochs": 2,
    "batch_size": 32,
    "learning_rate": 0.005,
    "model": {"hidden_dims": [8, 8], "aspect_dim": 4, "scorer_hidden": 8, "classifier_hidden": 8}
  },
  "synth": {"num_papers": 40, "num_authors": 12},
  "diagnostics": {"sample_cap": 30}
}"#;

/// Criterion 9: every command twice with the same configuration.
pub fn cli_determinism(bin: &Path) -> Check {
    let started = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let cfg = root.join("run.json");
    std::fs::write(&cfg, CLI_CONFIG).map_err(|e| e.to_string())?;
    let cfg = cfg.to_str().unwrap().to_string();
    let dir = |name: &str| root.join(name).to_str().unwrap().to_string();
    let mut compared = Vec::new();
    let mut differing = Vec::new();
    let mut check = |what: &str, a: Vec<u8>, b: Vec<u8>| {
        compared.push(what.to_string());
        if a != b || a.is_empty() {
            differing.push(what.to_string());
        }
    };

    for run in ["a", "b"] {
        run_cli(bin, &["synth", "--config", &cfg, "--seed", "4", "--out", &dir(&format!("data_{run}"))])?;
    }
    for file in ["papers.txt", "authors.txt", "citations.txt", "authorship.txt", "aspects.txt", "manifest.json"] {
        check(
            &format!("synth/{file}"),
            read(&root.join("data_a").join(file))?,
            read(&root.join("data_b").join(file))?,
        );
    }
    let manifest = dir("data_a/manifest.json");
    let ingest = || run_cli(bin, &["ingest", &manifest]);
    check("ingest stdout", ingest()?, ingest()?);

    for run in ["a", "b"] {
        run_cli(bin, &["train", "--config", &cfg, "--manifest", &manifest, "--seed", "4", "--out", &dir(&format!("train_{run}"))])?;
    }
    check("train/checkpoint.bin", read(&root.join("train_a/checkpoint.bin"))?, read(&root.join("train_b/checkpoint.bin"))?);

    let ckpt = dir("train_a/checkpoint.bin");
    let recommend = || {
        run_cli(bin, &["recommend", "--config", &cfg, "--manifest", &manifest, "--seed", "4", "--checkpoint", &ckpt, "--query", "3", "--aspect", "general"])
    };
    check("recommend stdout", recommend()?, recommend()?);

    for (run, threads) in [("a", "1"), ("b", "1"), ("c", "2")] {
        run_cli(bin, &["evaluate", "--config", &cfg, "--manifest", &manifest, "--seed", "4", "--threads", threads, "--out", &dir(&format!("eval_{run}"))])?;
    }
    check("evaluate/eval.json", read(&root.join("eval_a/eval.json"))?, read(&root.join("eval_b/eval.json"))?);
    check("evaluate/eval.json threads 1 vs 2", read(&root.join("eval_a/eval.json"))?, read(&root.join("eval_c/eval.json"))?);

    for run in ["a", "b"] {
        run_cli(bin, &["ablate", "--config", &cfg, "--manifest", &manifest, "--seed", "4", "--variant", "randomize-authorship", "--out", &dir(&format!("ablate_{run}"))])?;
    }
    check("ablate/eval.json", read(&root.join("ablate_a/eval.json"))?, read(&root.join("ablate_b/eval.json"))?);

    for run in ["a", "b"] {
        run_cli(bin, &["diagnose", "--config", &cfg, "--manifest", &manifest, "--seed", "4", "--csv", "--out", &dir(&format!("diag_{run}"))])?;
    }
    check("diagnose/diagnostics.json", read(&root.join("diag_a/diagnostics.json"))?, read(&root.join("diag_b/diagnostics.json"))?);
    check("diagnose/pairs.csv", read(&root.join("diag_a/pairs.csv"))?, read(&root.join("diag_b/pairs.csv"))?);

    require(
        differing.is_empty(),
        format!(
            "{} primary outputs compared byte-for-byte across repeated runs, differing: {:?}; {:.1}s",
            compared.len(),
            differing,
            started.elapsed().as_secs_f64()
        ),
    )
}

/// A star whose centre cites `degree` leaves.
pub fn star(degree: usize) -> HeteroGraph {
    let n = degree + 1;
    let cites: Vec<(usize, usize)> = (1..n).map(|i| (0, i)).collect();
    let feats = achgnn::linalg::Matrix::zeros(n, 1);
    let empty: [AspectEdge; 0] = [];
    HeteroGraph::build(feats, achgnn::linalg::Matrix::zeros(0, 1), &cites, &[], &empty, vec!["a".into()])
        .unwrap()
        .0
}

/// Criterion 10: sampler uniformity and below-cap completeness.
pub fn sampler_statistics() -> Check {
    const DRAWS: usize = 10_000;
    const ALPHA: f64 = 0.001;
    let g = star(30);
    let mut r = stream(10, 0);
    let mut counts = vec![0usize; 31];
    for _ in 0..DRAWS {
        let s = sample_neighbors(&g, NodeId::paper(0), Relation::Citation, 15, &mut r);
        for n in s {
            counts[n.index] += 1;
        }
    }
    let expected = (DRAWS * 15) as f64 / 30.0;
    let chi2: f64 = counts[1..].iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p_value = ChiSquared::new(29.0).unwrap().sf(chi2);

    let mut below_cap_failures = Vec::new();
    for degree in 0..=20 {
        let g = star(degree);
        let want: Vec<NodeId> = (1..=degree).map(NodeId::paper).collect();
        for fanout in [degree.max(1), degree + 1, 20] {
            if fanout < degree {
                continue;
            }
            let mut r = stream(degree as u64, 1);
            let before: u64 = r.clone().random();
            let got = sample_neighbors(&g, NodeId::paper(0), Relation::Citation, fanout, &mut r);
            let distinct: BTreeSet<NodeId> = got.iter().copied().collect();
            let after: u64 = r.random();
            if got != want || distinct.len() != got.len() || before != after {
                below_cap_failures.push((degree, fanout));
            }
        }
    }
    require(
        p_value > ALPHA && below_cap_failures.is_empty(),
        format!(
            "chi-square {chi2:.2} on 29 dof over {DRAWS} draws of 15 from 30, p = {p_value:.4} (> {ALPHA}); below-cap failures on degrees 0..=20: {below_cap_failures:?}"
        ),
    )
}
