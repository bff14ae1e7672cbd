use cachecast_web::{frontier, frontier_curves, latency, latency_curves, waterfill, waterfill_view};

#[test]
fn frontier_curves_are_concave_and_extended() {
    let curves = frontier_curves(3, 4.0, 20_000, 1).unwrap();
    assert_eq!(curves.len(), 4);
    for c in &curves {
        assert_eq!(c.points.len(), 3);
        assert_eq!(c.points[0].0, 0.0);
        let f = &c.frontier;
        // Concave over the hull vertices; the ray is appended afterwards.
        for w in f[..f.len() - 1].windows(3) {
            let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
            assert!(s2 <= s1 + 1e-12);
        }
        let (a, b) = (f[f.len() - 2], f[f.len() - 1]);
        assert!(((b.1 - a.1) - (b.0 - a.0)).abs() < 1e-12);
    }
}

#[test]
fn waterfill_closed_forms() {
    let v = waterfill_view(&[1.0], 0.2).unwrap();
    assert!((v.x - 4.0).abs() < 1e-10);
    assert!((v.rates[0] - 5f64.log2()).abs() < 1e-10);
    assert!(v.kkt_residual < 1e-10);
    let v = waterfill_view(&[1.0, 1.0], 0.4).unwrap();
    assert!((v.power - 4.0).abs() < 1e-10);
    // Power falls as the water level multiplier grows.
    assert!(v.sweep.windows(2).all(|w| w[1].1 <= w[0].1));
    assert_eq!(waterfill_view(&[1.0], 5.0).unwrap().power, 0.0);
}

#[test]
fn latency_curves_reach_the_file() {
    let curves = latency_curves(3, 1, 4.0, 200, 400, 20_000, 3).unwrap();
    assert_eq!(curves.len(), 3);
    for c in &curves {
        assert!(c.decoded.windows(2).all(|w| w[1] >= w[0]));
        assert!(*c.decoded.last().unwrap() > 0.9, "{:?}", c.scheme);
    }
    let ergodic = &curves[2];
    assert_eq!(ergodic.rho, 1.0);
    // Nothing is decodable before the last block.
    assert_eq!(ergodic.decoded[ergodic.decoded.len() - 2], 0.0);
}

#[test]
fn json_exports() {
    let v: serde_json::Value = serde_json::from_str(&frontier(2, 1.0, 5_000, 2)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);
    let v: serde_json::Value = serde_json::from_str(&waterfill(&[4.0, 1.0], 1.0)).unwrap();
    assert!((v["x"].as_f64().unwrap() - 1.443_000_468_164_691_3).abs() < 1e-9);
    let v: serde_json::Value = serde_json::from_str(&latency(3, 3, 4.0, 100, 50, 5_000, 1)).unwrap();
    assert!(v["error"].as_str().unwrap().contains("t = 3"), "{v}");
    let v: serde_json::Value = serde_json::from_str(&waterfill(&[1.0], -1.0)).unwrap();
    assert!(v.get("error").is_some());
}
