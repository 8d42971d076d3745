use std::path::Path;

use proptest::prelude::*;
use rbc_morph::classify::{CellClass, CellCounts, CellOrigin};
use rbc_morph::imaging::GrayImage;
use rbc_morph::pipeline::{
    annotate, evaluate, load_truth, match_cells, parse_truth_csv, run_batch, run_image,
    BatchOptions, GroundTruthRecord, ImageReport, PipelineConfig, TruthEntry,
};
use rbc_morph::synth::{smear_fixture, Shape};
use rbc_morph::Error;

fn to_bytes(img: &GrayImage) -> GrayImage {
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        (img.get(x, y) * 255.0).round()
    })
    .unwrap()
}

fn fixture_truth(image: &str, shapes: &[Shape]) -> GroundTruthRecord {
    GroundTruthRecord {
        image: image.into(),
        entries: shapes
            .iter()
            .map(|s| {
                let (x, y) = s.center();
                let class = if matches!(s, Shape::Rect { .. }) {
                    CellClass::Elongated
                } else {
                    CellClass::Normal
                };
                TruthEntry { x, y, class }
            })
            .collect(),
    }
}

fn named(mut r: ImageReport, id: &str) -> ImageReport {
    r.image = id.into();
    r
}

fn write_pgm(path: &Path, img: &GrayImage) {
    let mut bytes = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    bytes.extend(img.data().iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
    std::fs::write(path, bytes).unwrap();
}

#[test]
fn smear_fixture_counts() {
    let (img, _) = smear_fixture(false);
    let r = run_image(&to_bytes(&img), &PipelineConfig::default()).unwrap();
    assert_eq!(
        r.counts,
        CellCounts {
            normal: 10,
            elongated: 3,
            other: 0
        }
    );
    assert_eq!(r.clusters_detected, 0);
    assert!(r.iterations_used > 0 && r.iterations_used <= 1000);
}

#[test]
fn engineered_overlap_is_resolved() {
    let (img, _) = smear_fixture(true);
    let r = run_image(&to_bytes(&img), &PipelineConfig::default()).unwrap();
    assert_eq!(r.clusters_detected, 1);
    assert_eq!(r.counts.total(), 13);
    assert_eq!(
        r.cells
            .iter()
            .filter(|c| c.origin() == CellOrigin::FromCluster)
            .count(),
        2
    );
}

#[test]
fn blank_image_reports_nothing() {
    let img = GrayImage::filled(64, 48, 128.0).unwrap();
    let r = run_image(&img, &PipelineConfig::default()).unwrap();
    assert_eq!(r.counts.total(), 0);
    assert_eq!(r.iterations_used, 0);
    assert_eq!((r.width, r.height), (64, 48));
}

#[test]
fn report_is_deterministic() {
    let (img, _) = smear_fixture(true);
    let img = to_bytes(&img);
    let a = run_image(&img, &PipelineConfig::default()).unwrap();
    let b = run_image(&img, &PipelineConfig::default()).unwrap();
    assert_eq!(a.cells, b.cells);
}

#[test]
fn evaluation_of_fixture_is_perfect() {
    let (img, shapes) = smear_fixture(false);
    let r = named(
        run_image(&to_bytes(&img), &PipelineConfig::default()).unwrap(),
        "smear",
    );
    let e = evaluate(&[r], &[fixture_truth("smear", &shapes)], 15.0).unwrap();
    assert_eq!((e.tally.dc, e.tally.ndc, e.tally.nc), (13, 0, 0));
    assert_eq!(e.performance_index, Some(1.0));
    assert_eq!(e.matrix().n, [[10, 0, 0], [0, 3, 0], [0, 0, 0]]);
}

#[test]
fn evaluation_counts_misses_and_spurious() {
    let (img, _) = smear_fixture(false);
    let r = named(
        run_image(&to_bytes(&img), &PipelineConfig::default()).unwrap(),
        "smear",
    );
    let far = GroundTruthRecord {
        image: "smear".into(),
        entries: vec![
            TruthEntry {
                x: 250.0,
                y: 250.0,
                class: CellClass::Normal
            };
            2
        ],
    };
    let e = evaluate(std::slice::from_ref(&r), &[far], 15.0).unwrap();
    assert_eq!((e.tally.dc, e.tally.ndc, e.tally.nc), (0, 2, 13));
    assert_eq!(e.performance_index, Some(0.0));
    assert_eq!(e.matrix().total(), 0);

    assert!(matches!(
        evaluate(std::slice::from_ref(&r), &[], 15.0),
        Err(Error::InvalidArgument(_))
    ));
    let outside = GroundTruthRecord {
        image: "smear".into(),
        entries: vec![TruthEntry {
            x: 400.0,
            y: 10.0,
            class: CellClass::Normal,
        }],
    };
    assert!(matches!(
        evaluate(&[r], &[outside], 15.0),
        Err(Error::Truth(_))
    ));
}

/// Largest number of disjoint pairs within `radius`, by exhaustive search.
fn max_matching(
    pred: &[(f64, f64)],
    truth: &[(f64, f64)],
    radius: f64,
    used: &mut Vec<bool>,
    i: usize,
) -> usize {
    if i == pred.len() {
        return 0;
    }
    let mut best = max_matching(pred, truth, radius, used, i + 1);
    for j in 0..truth.len() {
        if !used[j] && (pred[i].0 - truth[j].0).hypot(pred[i].1 - truth[j].1) <= radius {
            used[j] = true;
            best = best.max(1 + max_matching(pred, truth, radius, used, i + 1));
            used[j] = false;
        }
    }
    best
}

fn points(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..60.0, 0.0f64..60.0), 0..n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_matching_is_valid_and_maximal(pred in points(7), truth in points(7), radius in 3.0f64..20.0) {
        let pairs = match_cells(&pred, &truth, radius);
        let mut seen_p = vec![false; pred.len()];
        let mut seen_t = vec![false; truth.len()];
        for &(i, j) in &pairs {
            prop_assert!(!seen_p[i] && !seen_t[j]);
            seen_p[i] = true;
            seen_t[j] = true;
            prop_assert!((pred[i].0 - truth[j].0).hypot(pred[i].1 - truth[j].1) <= radius);
        }
        for (i, p) in pred.iter().enumerate() {
            for (j, t) in truth.iter().enumerate() {
                if !seen_p[i] && !seen_t[j] {
                    prop_assert!((p.0 - t.0).hypot(p.1 - t.1) > radius);
                }
            }
        }
        let best = max_matching(&pred, &truth, radius, &mut vec![false; truth.len()], 0);
        prop_assert!(pairs.len() <= best && 2 * pairs.len() >= best);
    }

    #[test]
    fn separated_cells_match_optimally(offsets in prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0, any::<bool>()), 1..7)) {
        // One truth centre per grid cell; predictions jitter around some of them.
        let truth: Vec<(f64, f64)> = (0..offsets.len()).map(|k| (40.0 * k as f64, 0.0)).collect();
        let pred: Vec<(f64, f64)> = offsets.iter().enumerate().filter(|o| o.1 .2).map(|(k, o)| (truth[k].0 + o.0, o.1)).collect();
        let pairs = match_cells(&pred, &truth, 15.0);
        prop_assert_eq!(pairs.len(), max_matching(&pred, &truth, 15.0, &mut vec![false; truth.len()], 0));
        prop_assert_eq!(pairs.len(), pred.len());
    }

    #[test]
    fn config_text_round_trip(
        mu in 0.01f64..2.0, dt in 0.05f64..1.0, iters in 1usize..5000, cell in 4usize..64,
        min_area in 0usize..500, border in any::<bool>(), k in 1.0f64..3.0,
        window in 1usize..9, support in 2usize..15, turn in 0.01f64..1.0,
        t1 in 0.05f64..1.0, t2 in 0.05f64..1.0, esf in 0.05f64..0.95, csf in 0.05f64..0.95, radius in 1.0f64..50.0,
    ) {
        let mut c = PipelineConfig::default();
        c.chanvese.mu = mu;
        c.chanvese.dt = dt;
        c.chanvese.max_iters = iters;
        c.chanvese.hole_cell = cell;
        c.cleanup.min_area = min_area;
        c.cleanup.drop_border = border;
        c.split.k = k;
        c.concave.smoothing_window = window;
        c.concave.k_support = support;
        c.concave.min_turn = turn;
        c.validity.tau_e1 = t1;
        c.validity.tau_e2 = t2;
        c.classify.esf_elongated = esf;
        c.classify.csf_normal = csf;
        c.evaluate.match_radius = radius;
        prop_assert_eq!(PipelineConfig::from_text(&c.to_text()).unwrap(), c);
    }
}

#[test]
fn truth_csv_parsing() {
    let r = parse_truth_csv("a", "x,y,class\n10,20,normal\n 3.5 , 4 , elongated\n").unwrap();
    assert_eq!(r.entries.len(), 2);
    assert_eq!(
        r.entries[1],
        TruthEntry {
            x: 3.5,
            y: 4.0,
            class: CellClass::Elongated
        }
    );
    assert!(matches!(
        parse_truth_csv("a", "x,y,class\n1,2,round\n"),
        Err(Error::Truth(_))
    ));
    assert!(matches!(
        parse_truth_csv("a", "x,y\n1,2\n"),
        Err(Error::Truth(_))
    ));

    let dir = tempfile::tempdir().unwrap();
    let combined = dir.path().join("all.csv");
    std::fs::write(
        &combined,
        "image,x,y,class\nb,1,1,other\na,2,2,normal\nb,3,3,normal\n",
    )
    .unwrap();
    let t = load_truth(&combined).unwrap();
    assert_eq!(
        t.iter()
            .map(|r| (r.image.as_str(), r.entries.len()))
            .collect::<Vec<_>>(),
        [("a", 1), ("b", 2)]
    );
    let per = dir.path().join("per");
    std::fs::create_dir(&per).unwrap();
    std::fs::write(per.join("img1.csv"), "x,y,class\n5,5,other\n").unwrap();
    assert_eq!(load_truth(&per).unwrap()[0].image, "img1");
}

#[test]
fn annotation_of_nothing_is_the_gray_image() {
    let img = GrayImage::from_fn(20, 10, |x, y| (x * 10 + y) as f64).unwrap();
    let out = annotate(&img, &[]);
    for (x, y, p) in out.enumerate_pixels() {
        let v = img.get(x as usize, y as usize) as u8;
        assert_eq!(p.0, [v, v, v]);
    }
}

#[test]
fn annotation_marks_normal_cells_red() {
    let (img, _) = smear_fixture(false);
    let img = to_bytes(&img);
    let r = run_image(&img, &PipelineConfig::default()).unwrap();
    let out = annotate(&img, &r.cells);
    assert!(out.pixels().any(|p| p.0 == [255, 0, 0]));
    assert!(out.pixels().any(|p| p.0 == [0, 0, 255]));
    assert!(!out.pixels().any(|p| p.0 == [0, 255, 0]));
}

#[test]
fn batch_on_empty_directory() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let s = run_batch(&BatchOptions {
        input_dir: input.path().into(),
        out_dir: out.path().into(),
        ..Default::default()
    })
    .unwrap();
    assert_eq!(s.processed, 0);
    assert_eq!(s.exit_code(), 0);
    let agg: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&s.aggregate_path).unwrap()).unwrap();
    assert_eq!(agg["totals"]["normal"], 0);
}

fn batch_inputs() -> (tempfile::TempDir, tempfile::TempDir) {
    let input = tempfile::tempdir().unwrap();
    let truth = tempfile::tempdir().unwrap();
    for (name, overlap) in [("a", false), ("b", true)] {
        let (img, shapes) = smear_fixture(overlap);
        write_pgm(&input.path().join(format!("{name}.pgm")), &to_bytes(&img));
        let mut csv = String::from("x,y,class\n");
        for e in fixture_truth(name, &shapes).entries {
            csv.push_str(&format!("{},{},{}\n", e.x, e.y, e.class.name()));
        }
        std::fs::write(truth.path().join(format!("{name}.csv")), csv).unwrap();
    }
    write_pgm(
        &input.path().join("c.pgm"),
        &GrayImage::filled(32, 32, 200.0).unwrap(),
    );
    std::fs::write(input.path().join("notes.txt"), "ignored").unwrap();
    (input, truth)
}

#[test]
fn batch_with_truth_writes_reports() {
    let (input, truth) = batch_inputs();
    let out = tempfile::tempdir().unwrap();
    let opts = BatchOptions {
        input_dir: input.path().into(),
        truth: Some(truth.path().into()),
        out_dir: out.path().into(),
        jobs: Some(2),
        debug: true,
        ..Default::default()
    };
    let s = run_batch(&opts).unwrap();
    assert_eq!(s.processed, 3);
    // Image c has no labels.
    assert_eq!(s.failures.len(), 1);
    assert_eq!(s.failures[0].image, "c");
    assert_eq!(s.exit_code(), 1);
    let e = s.evaluation.as_ref().unwrap();
    assert_eq!(e.matrix().n, [[20, 0, 0], [0, 6, 0], [0, 0, 0]]);
    for f in [
        "a.json",
        "a.png",
        "a.energy.csv",
        "a.clusters.json",
        "b.mask.png",
        "c.json",
        "confusion.csv",
        "aggregate.json",
    ] {
        assert!(out.path().join(f).is_file(), "missing {f}");
    }
    let conf = std::fs::read(out.path().join("confusion.csv")).unwrap();
    assert_eq!(
        &rbc_morph::metrics::ConfusionMatrix3::read_csv(conf.as_slice()).unwrap(),
        e.matrix()
    );
    let agg: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&s.aggregate_path).unwrap()).unwrap();
    assert_eq!(agg["totals"]["normal"], 20);
    assert_eq!(agg["images"].as_array().unwrap().len(), 3);
    assert_eq!(agg["evaluation"]["folds"].as_array().unwrap().len(), 2);
    let b: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.path().join("b.json")).unwrap()).unwrap();
    assert_eq!(b["clusters_detected"], 1);
    assert_eq!(b["cells"].as_array().unwrap().len(), 13);
}

#[test]
fn batch_output_is_deterministic() {
    let (input, _truth) = batch_inputs();
    let strip = |dir: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.join("b.json")).unwrap()).unwrap();
        v["wall_time"] = 0.into();
        v
    };
    let mut seen = Vec::new();
    for jobs in [1, 4] {
        let out = tempfile::tempdir().unwrap();
        run_batch(&BatchOptions {
            input_dir: input.path().into(),
            out_dir: out.path().into(),
            jobs: Some(jobs),
            ..Default::default()
        })
        .unwrap();
        seen.push((
            strip(out.path()),
            std::fs::read(out.path().join("b.png")).unwrap(),
        ));
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn bad_config_is_fatal() {
    let (input, _truth) = batch_inputs();
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("bad.toml");
    std::fs::write(&cfg, "chanvese.dt = -1\n").unwrap();
    let opts = BatchOptions {
        input_dir: input.path().into(),
        config: Some(cfg),
        out_dir: out.path().join("o"),
        ..Default::default()
    };
    assert!(matches!(run_batch(&opts), Err(Error::Config(_))));
    let missing = BatchOptions {
        input_dir: input.path().join("nope"),
        out_dir: out.path().join("o"),
        ..Default::default()
    };
    assert!(matches!(run_batch(&missing), Err(Error::Io { .. })));
}
