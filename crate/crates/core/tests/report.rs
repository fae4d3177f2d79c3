mod common;

use facspeed::measures::{speedup_curves, CurveSet};
use facspeed::report::{
    diagnose, emit_csv, emit_svg, parse_csv, Curve, FindingCode, PlotSpec, ReportError, CSV_HEADER,
};
use proptest::prelude::*;

use common::{lossy_curves, perfect_curves, polyline, rel_close, summary, summary_from_losses, Transform};

fn assert_csv_round_trip(curves: &CurveSet) {
    let back = parse_csv(&emit_csv(curves)).unwrap();
    assert_eq!(back.len(), curves.len());
    for (a, b) in curves.points().iter().zip(back.points()) {
        assert_eq!(a.p, b.p);
        for (x, y) in [
            (a.linear, b.linear),
            (a.maximal, b.maximal),
            (a.idle_specific, b.idle_specific),
            (a.inflation_specific, b.inflation_specific),
            (a.actual, b.actual),
            (a.work_inflation, b.work_inflation),
            (a.parallel_work, b.parallel_work),
        ] {
            assert!(rel_close(x, y, 1e-9), "{x} vs {y}");
        }
        assert_eq!(a.elision_bound.is_some(), b.elision_bound.is_some());
        if let (Some(x), Some(y)) = (a.elision_bound, b.elision_bound) {
            assert!(rel_close(x, y, 1e-9));
        }
    }
}

#[test]
fn csv_single_perfect_point() {
    let curves = speedup_curves(&summary(2.5, 2.5, None, &[(1, 2.5, 0.0)])).unwrap();
    let text = emit_csv(&curves);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.next(), Some("1,1,1,1,1,1,,0,2.5"));
    assert_eq!(lines.next(), None);
}

#[test]
fn csv_column_order_is_fixed() {
    let text = emit_csv(&lossy_curves());
    assert_eq!(
        text.lines().next().unwrap().split(',').collect::<Vec<_>>(),
        [
            "p",
            "linear",
            "maximal",
            "idle_specific",
            "inflation_specific",
            "actual",
            "elision_bound",
            "work_inflation",
            "parallel_work"
        ]
    );
}

#[test]
fn csv_round_trip_lossy() {
    assert_csv_round_trip(&lossy_curves());
    assert_csv_round_trip(&perfect_curves(&[1, 2, 3, 7, 40]));
}

#[test]
fn csv_rebuilds_sched_estimate() {
    let curves = lossy_curves();
    let back = parse_csv(&emit_csv(&curves)).unwrap();
    for (a, b) in curves.points().iter().zip(back.points()) {
        let (x, y) = (a.sched_work_estimate.unwrap(), b.sched_work_estimate.unwrap());
        assert_eq!(x.noisy, y.noisy);
        assert!((x.value - y.value).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, ..ProptestConfig::default() })]

    #[test]
    fn csv_round_trip_random(
        t_s in 1e-4f64..1e4,
        k1 in 0.5f64..3.0,
        elision in prop::option::of(0.5f64..1.0),
        per in prop::collection::btree_map(1usize..=128, (0.0f64..3.0, -0.3f64..2.0), 1..10),
    ) {
        let t_1 = t_s * k1;
        let losses: Vec<(usize, f64, f64)> = per.into_iter().map(|(p, (i, f))| (p, i * t_1, f * t_1)).collect();
        let curves = speedup_curves(&summary_from_losses(t_s, t_1, elision.map(|e| e * t_1), &losses)).unwrap();
        assert_csv_round_trip(&curves);
    }
}

#[test]
fn svg_is_well_formed_with_expected_curves() {
    let spec = PlotSpec::new("fig <2> & co", lossy_curves()).with_elision(true).with_gaps(true);
    let svg = emit_svg(&spec).unwrap();
    let doc = roxmltree::Document::parse(&svg).expect("well-formed XML");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let polylines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
    assert_eq!(polylines, 6);
    for gap in ["A", "B", "C", "D"] {
        let id = format!("gap-{gap}");
        assert!(doc.descendants().any(|n| n.attribute("id") == Some(id.as_str())));
    }
    assert!(doc.descendants().any(|n| n.attribute("id") == Some("legend")));
    let without = emit_svg(&PlotSpec::new("t", lossy_curves())).unwrap();
    let doc = roxmltree::Document::parse(&without).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 5);
}

#[test]
fn svg_is_byte_stable() {
    let spec = PlotSpec::new("t", lossy_curves()).with_gaps(true);
    assert_eq!(emit_svg(&spec).unwrap(), emit_svg(&spec).unwrap());
}

#[test]
fn svg_coordinates_recoverable() {
    let curves = lossy_curves();
    let svg = emit_svg(&PlotSpec::new("t", curves.clone()).with_elision(true)).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let t = Transform::read(&doc);
    for curve in Curve::FIVE.into_iter().chain([Curve::Elision]) {
        let pts = polyline(&doc, curve).unwrap();
        assert_eq!(pts.len(), curves.len());
        for (c, &(x, y)) in curves.points().iter().zip(&pts) {
            let (ex, ey) = t.px(c.p as f64, curve.value(c).unwrap());
            assert!((ex - x).abs() <= 0.5 && (ey - y).abs() <= 0.5, "{curve:?} P={}", c.p);
        }
    }
}

#[test]
fn svg_vertical_order_matches_values() {
    let curves = lossy_curves();
    let svg = emit_svg(&PlotSpec::new("t", curves.clone())).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let rendered: Vec<Vec<(f64, f64)>> = Curve::FIVE.iter().map(|&c| polyline(&doc, c).unwrap()).collect();
    for (i, point) in curves.points().iter().enumerate() {
        for (a, ca) in Curve::FIVE.iter().enumerate() {
            for (b, cb) in Curve::FIVE.iter().enumerate() {
                let (va, vb) = (ca.value(point).unwrap(), cb.value(point).unwrap());
                let (ya, yb) = (rendered[a][i].1, rendered[b][i].1);
                if va > vb {
                    assert!(ya < yb, "P={} {ca:?}={va} above {cb:?}={vb} but y {ya} >= {yb}", point.p);
                }
            }
        }
    }
    // The intended shape: linear > maximal > idle-specific, actual lowest.
    for p in curves.points() {
        assert!(p.linear > p.maximal && p.maximal > p.idle_specific);
        assert!(p.actual < p.idle_specific.min(p.inflation_specific));
    }
}

#[test]
fn svg_perfect_scaling_lies_on_diagonal() {
    let curves = perfect_curves(&[1, 2, 4, 8]);
    let svg = emit_svg(&PlotSpec::new("t", curves)).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let linear = polyline(&doc, Curve::Linear).unwrap();
    for curve in Curve::FIVE {
        assert_eq!(polyline(&doc, curve).unwrap(), linear, "{curve:?}");
    }
}

#[test]
fn svg_single_point_has_no_polylines() {
    let curves = perfect_curves(&[4]);
    let svg = emit_svg(&PlotSpec::new("t", curves)).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 0);
    assert!(doc.descendants().any(|n| n.attribute("id") == Some("points-maximal")));
}

#[test]
fn diagnose_healthy_diagonal() {
    let d = diagnose(&perfect_curves(&[1, 2, 3, 4, 5, 6, 7, 8])).unwrap();
    assert_eq!(d.codes(), [FindingCode::Healthy]);
}

#[test]
fn diagnose_starvation() {
    // I_P = (P - 4) T_P beyond 4 cores, no inflation: idle-specific = min(P, 4).
    let t_1 = 1.0;
    let pts: Vec<(usize, f64, f64)> = (1..=8)
        .map(|p| {
            if p <= 4 {
                (p, t_1 / p as f64, 0.0)
            } else {
                let t_p = t_1 / 4.0;
                (p, t_p, (p as f64 - 4.0) * t_p)
            }
        })
        .collect();
    let curves = speedup_curves(&summary(1.0, t_1, None, &pts)).unwrap();
    for c in curves.points() {
        assert!(rel_close(c.idle_specific, (c.p as f64).min(4.0), 1e-12));
    }
    let d = diagnose(&curves).unwrap();
    assert_eq!(d.codes(), [FindingCode::ParallelismStarved]);
}

#[test]
fn diagnose_slowdown() {
    let losses: Vec<(usize, f64, f64)> = (1..=8)
        .map(|p| {
            let f = if p <= 4 { 0.0 } else { (p as f64 / 4.0).powi(3) };
            (p, 0.0, f)
        })
        .collect();
    let curves = speedup_curves(&summary_from_losses(1.0, 1.0, None, &losses)).unwrap();
    let infl: Vec<f64> = curves.points().iter().map(|c| c.inflation_specific).collect();
    assert!(infl[4..].windows(2).all(|w| w[1] < w[0]));
    let d = diagnose(&curves).unwrap();
    assert_eq!(d.codes(), [FindingCode::Slowdown]);
}

#[test]
fn diagnose_overhead_and_sched() {
    // Adaptive T_1 that grows with P flattens the maximal curve.
    let mut s = summary(1.0, 1.0, Some(0.5), &[]);
    let mut t1 = std::collections::BTreeMap::new();
    for p in [1usize, 2, 4, 8, 16, 32] {
        let t_1 = 1.0 + 0.5 * p as f64;
        t1.insert(p, t_1);
        s.per_p.insert(
            p,
            facspeed::measures::PerPMeasure { parallel_time: t_1 / p as f64, idle_time: 0.0, sample_count: 1 },
        );
    }
    s.one_core_time = facspeed::measures::OneCoreTime::PerP(t1);
    let d = diagnose(&speedup_curves(&s).unwrap()).unwrap();
    assert!(d.has(FindingCode::OverheadGrowth), "{:?}", d.codes());
    assert!(d.has(FindingCode::SchedOverhead), "{:?}", d.codes());
}

#[test]
fn diagnose_needs_three_points() {
    assert_eq!(diagnose(&perfect_curves(&[1, 2])).unwrap_err(), ReportError::TooFewPoints(2));
}

#[test]
fn diagnose_is_pure() {
    let c = lossy_curves();
    assert_eq!(diagnose(&c).unwrap(), diagnose(&c).unwrap());
    let json = serde_json::to_value(diagnose(&c).unwrap()).unwrap();
    assert!(json["findings"].as_array().is_some_and(|f| !f.is_empty()));
}

#[test]
fn gap_identities() {
    let curves = lossy_curves();
    for (g, c) in curves.gaps().iter().zip(curves.points()) {
        assert!(rel_close(g.a + (c.maximal - c.actual), c.linear - c.actual, 1e-12));
        assert!(rel_close(g.d, c.maximal - c.actual, 1e-12));
    }
}
