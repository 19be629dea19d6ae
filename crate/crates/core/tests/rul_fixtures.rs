use semas_core::metrics::regression_metrics;
use semas_core::rul::{build_sequences, rul_predict, rul_train, RulConfig, RulModel};

// Episodes of 40 rows whose single severity feature ramps 0 -> 1; the label
// is the linear degradation map 100 - 95 s.
fn ramp(n_episodes: usize) -> (Vec<Vec<f64>>, Vec<Option<f64>>) {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for e in 0..n_episodes {
        for k in 0..40 {
            let s = k as f64 / 39.0;
            rows.push(vec![s, 1.0 - s, ((e + k) % 3) as f64 * 0.1]);
            labels.push(Some(100.0 - 95.0 * s));
        }
    }
    (rows, labels)
}

#[test]
fn linear_degradation_is_learned() {
    let cfg = RulConfig { epochs: 10, seed: 7, max_train_sequences: None, ..RulConfig::default() };
    let (rows, labels) = ramp(12);
    let (xs, ys) = build_sequences(&rows, &labels, cfg.window);
    let mut model = RulModel::new(3, &cfg);
    let report = rul_train(&mut model, &xs, &ys, &cfg).unwrap();
    assert!(model.validation_mae_hours().unwrap().is_finite());
    assert!(report.epochs_run >= 1);

    let (test_rows, test_labels) = ramp(2);
    let (tx, ty) = build_sequences(&test_rows, &test_labels, cfg.window);
    let preds: Vec<f64> = tx.iter().map(|w| rul_predict(&model, w).unwrap()).collect();
    let m = regression_metrics(&preds, &ty).unwrap();
    assert!(m.mae < 5.0, "mae {}", m.mae);
    assert!(preds.iter().all(|p| p.is_finite() && *p >= 0.0));
    // a held-out window near the middle of an episode
    let mid = 20;
    assert!((preds[mid] - ty[mid]).abs() < 10.0);
}

#[test]
fn mae_matches_hand_sum() {
    let preds = [10.0, 20.0, 35.0, 50.0, 99.0];
    let truth = [12.0, 20.0, 30.0, 55.5, 100.0];
    let hand = (2.0 + 0.0 + 5.0 + 5.5 + 1.0) / 5.0;
    let m = regression_metrics(&preds, &truth).unwrap();
    assert!((m.mae - hand).abs() < 1e-12);
}
