use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rbc_morph::classify::{
    classify_cluster_object, classify_isolated, compute_csf, compute_esf, count_cells, csf,
    CellClass, CellOrigin, ClassifiedCell, ClassifyThresholds, Outline, ShapeDescriptors,
};
use rbc_morph::cluster::{CanonicalEllipse, ResolvedObject};
use rbc_morph::imaging::Contour;
use rbc_morph::regions::{label_components, Region};
use rbc_morph::synth::{render_mask, Shape};

fn region_of(shape: Shape, size: usize) -> Region {
    let mut r = label_components(&render_mask(size, size, &[shape]));
    assert_eq!(r.len(), 1);
    r.remove(0)
}

fn descriptors(csf: f64, esf: f64) -> ShapeDescriptors {
    ShapeDescriptors {
        area: 1.0,
        perimeter: 1.0,
        minor_extent: esf,
        major_extent: 1.0,
        csf,
        esf,
    }
}

fn object(esf: f64) -> ResolvedObject {
    ResolvedObject {
        ellipse: CanonicalEllipse {
            center: (0.0, 0.0),
            alpha1: esf * 10.0,
            alpha2: 10.0,
            rotation: 0.0,
        },
        source_arc: Some((0, 1)),
        esf_cluster: esf,
    }
}

#[test]
fn csf_identities() {
    let r = 7.5;
    let pi = std::f64::consts::PI;
    assert!((csf(pi * r * r, 2.0 * pi * r).unwrap() - 1.0).abs() < 1e-12);
    assert!((csf(9.0, 12.0).unwrap() - pi / 4.0).abs() < 1e-12);
    assert!(csf(10.0, 0.0).is_err());
}

#[test]
fn digital_disk_csf_near_one() {
    let r = region_of(
        Shape::Disk {
            cx: 40.0,
            cy: 40.0,
            r: 20.0,
        },
        80,
    );
    let v = compute_csf(&r).unwrap();
    assert!((0.95..=1.05).contains(&v), "{v}");
}

#[test]
fn digital_disk_esf_near_one() {
    let r = region_of(
        Shape::Disk {
            cx: 40.0,
            cy: 40.0,
            r: 20.0,
        },
        80,
    );
    assert!((compute_esf(&r).unwrap() - 1.0).abs() <= 0.02);
}

#[test]
fn rectangle_esf_and_rotation() {
    let axis = region_of(
        Shape::Rect {
            cx: 40.5,
            cy: 40.5,
            w: 30.0,
            h: 10.0,
            angle: 0.0,
        },
        80,
    );
    let e0 = compute_esf(&axis).unwrap();
    assert!((e0 - 1.0 / 3.0).abs() <= 0.02, "{e0}");
    let rot = region_of(
        Shape::Rect {
            cx: 40.0,
            cy: 40.0,
            w: 30.0,
            h: 10.0,
            angle: 37f64.to_radians(),
        },
        80,
    );
    let e37 = compute_esf(&rot).unwrap();
    assert!((e37 - e0).abs() <= 0.02, "{e37} vs {e0}");
}

#[test]
fn esf_of_single_pixel_is_an_error() {
    let r = region_of(
        Shape::Disk {
            cx: 5.0,
            cy: 5.0,
            r: 0.3,
        },
        10,
    );
    assert!(compute_esf(&r).is_err());
}

#[test]
fn shape_factors_are_scale_invariant() {
    let mut csfs = Vec::new();
    let mut esfs = Vec::new();
    for r in [15.0, 30.0, 60.0] {
        let size = (2.0 * r + 10.0) as usize;
        // Off-lattice centre: integer centre and radius leave one-pixel spurs at the axis tips.
        let c = size as f64 / 2.0 + 0.3;
        let reg = region_of(
            Shape::Disk {
                cx: c,
                cy: c - 0.2,
                r,
            },
            size,
        );
        csfs.push(compute_csf(&reg).unwrap());
        esfs.push(compute_esf(&reg).unwrap());
    }
    for v in [&csfs, &esfs] {
        let (lo, hi) = v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        assert!(hi - lo <= 0.03, "{v:?}");
    }
}

#[test]
fn esf_is_rotation_invariant() {
    let base = compute_esf(&region_of(
        Shape::Rect {
            cx: 50.5,
            cy: 50.5,
            w: 45.0,
            h: 15.0,
            angle: 0.0,
        },
        100,
    ))
    .unwrap();
    for deg in (0..360).step_by(15) {
        let reg = region_of(
            Shape::Rect {
                cx: 50.0,
                cy: 50.0,
                w: 45.0,
                h: 15.0,
                angle: (deg as f64).to_radians(),
            },
            100,
        );
        let e = compute_esf(&reg).unwrap();
        assert!((e - base).abs() <= 0.02, "{deg} deg: {e} vs {base}");
    }
}

#[test]
fn isolated_rule_examples() {
    let t = ClassifyThresholds::default();
    assert_eq!(
        classify_isolated(&descriptors(0.9, 0.4), &t),
        CellClass::Elongated
    );
    assert_eq!(
        classify_isolated(&descriptors(0.7, 0.6), &t),
        CellClass::OtherDeformation
    );
    assert_eq!(
        classify_isolated(&descriptors(0.9, 0.9), &t),
        CellClass::Normal
    );
}

#[test]
fn cluster_rule_examples() {
    let t = ClassifyThresholds::default();
    assert_eq!(
        classify_cluster_object(&object(0.55), &t),
        CellClass::Elongated
    );
    assert_eq!(
        classify_cluster_object(&object(0.60), &t),
        CellClass::Elongated
    );
    assert_eq!(
        classify_cluster_object(&object(0.61), &t),
        CellClass::Normal
    );
}

#[test]
fn counting() {
    assert_eq!(count_cells(&[]).total(), 0);
    let outline = || Outline::Contour(Contour::from_points(vec![]));
    let cells: Vec<ClassifiedCell> = [
        CellClass::Normal,
        CellClass::Normal,
        CellClass::Normal,
        CellClass::Elongated,
        CellClass::Elongated,
    ]
    .iter()
    .enumerate()
    .map(|(i, &c)| ClassifiedCell::new(i, CellOrigin::Isolated, c, (0.0, 0.0), outline()).unwrap())
    .collect();
    let c = count_cells(&cells);
    assert_eq!((c.normal, c.elongated, c.other), (3, 2, 0));
}

#[test]
fn counting_matches_rescan() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let cells: Vec<ClassifiedCell> = (0..400)
        .map(|i| {
            let class = CellClass::ALL[rng.random_range(0..3)];
            let origin = if class == CellClass::OtherDeformation || rng.random_bool(0.5) {
                CellOrigin::Isolated
            } else {
                CellOrigin::FromCluster
            };
            ClassifiedCell::new(
                i,
                origin,
                class,
                (0.0, 0.0),
                Outline::Contour(Contour::from_points(vec![])),
            )
            .unwrap()
        })
        .collect();
    let c = count_cells(&cells);
    let mut tally = [0usize; 3];
    for cell in &cells {
        tally[cell.class().index()] += 1;
    }
    assert_eq!([c.normal, c.elongated, c.other], tally);
    assert_eq!(c.total(), 400);
}

#[test]
fn from_cluster_never_other() {
    let t = ClassifyThresholds::default();
    for esf in [0.05, 0.3, 0.6, 0.61, 0.99, 1.0] {
        let cell = ClassifiedCell::from_cluster(1, &object(esf), &t);
        assert_ne!(cell.class(), CellClass::OtherDeformation);
        assert_eq!(cell.origin(), CellOrigin::FromCluster);
    }
}

proptest! {
    #[test]
    fn isolated_rule_is_total(esf in 1e-6f64..=1.0, csf_v in 1e-6f64..10.0) {
        let t = ClassifyThresholds::default();
        let class = classify_isolated(&descriptors(csf_v, esf), &t);
        let expected = if esf <= 0.5 { CellClass::Elongated } else if csf_v >= 0.8 { CellClass::Normal } else { CellClass::OtherDeformation };
        prop_assert_eq!(class, expected);
    }
}
