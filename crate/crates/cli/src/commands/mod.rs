pub mod classify;
pub mod ln_impact;
pub mod reparam_demo;
pub mod simulate;
pub mod spectrum;
pub mod verify;

use smoothlab_core::attention::AttentionMatrix;
use smoothlab_core::dynamics::TrajectoryRecord;
use smoothlab_core::metrics::SmoothingMetrics;

use crate::config::Thresholds;

/// Largest metric discrepancy, with `hfc_lfc` measured relative to
/// `max(1, |predicted|)`.
pub fn metric_discrepancy(empirical: &SmoothingMetrics, predicted: &SmoothingMetrics, fields: MetricFields) -> f64 {
    let hfc = if empirical.hfc_lfc == predicted.hfc_lfc {
        0.0
    } else {
        (empirical.hfc_lfc - predicted.hfc_lfc).abs() / predicted.hfc_lfc.abs().max(1.0)
    };
    let cos = (empirical.mean_cosine - predicted.mean_cosine).abs();
    let erank = (empirical.effective_rank - predicted.effective_rank).abs();
    match fields {
        MetricFields::All => hfc.max(cos).max(erank),
        MetricFields::HfcAndCosine => hfc.max(cos),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricFields {
    All,
    HfcAndCosine,
}

/// Whether the metrics have reached identical-token limits (HFC/LFC 0,
/// cosine 1, effective rank 1).
pub fn collapsed(m: &SmoothingMetrics, th: &Thresholds) -> bool {
    m.hfc_lfc <= th.collapse_hfc_lfc
        && m.mean_cosine >= 1.0 - th.collapse_cosine
        && m.effective_rank <= 1.0 + th.collapse_effective_rank
}

/// Whether the eigenvector of `λ^A_1` has entries of both signs.
pub fn lambda1_vector_mixed_signs(a: &AttentionMatrix) -> bool {
    let v = a.spectrum().vector(0);
    let scale = v.iter().fold(0.0f64, |m, z| m.max(z.re.abs()));
    let eps = 1e-12 * scale;
    v.iter().any(|z| z.re > eps) && v.iter().any(|z| z.re < -eps)
}

/// Least-squares slope of `ln(hfc_lfc)` against layer over rows with a finite logarithm.
pub fn log_hfc_slope(records: &[TrajectoryRecord]) -> Option<f64> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.layer as f64, r.metrics.hfc_lfc.ln()))
        .filter(|(_, y)| y.is_finite())
        .collect();
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(layer: usize, hfc: f64) -> TrajectoryRecord {
        TrajectoryRecord {
            layer,
            metrics: SmoothingMetrics {
                hfc_lfc: hfc,
                mean_cosine: 0.0,
                effective_rank: 1.0,
            },
            frobenius_log: 0.0,
            direction_delta: 0.0,
        }
    }

    #[test]
    fn slope_of_exponential_decay() {
        let r: Vec<_> = (1..=20).map(|l| rec(l, (-0.3 * l as f64).exp() * 2.0)).collect();
        assert!((log_hfc_slope(&r).unwrap() + 0.3).abs() < 1e-12);
        let with_zero = vec![rec(1, 0.0), rec(2, 1.0), rec(3, std::f64::consts::E)];
        assert!((log_hfc_slope(&with_zero).unwrap() - 1.0).abs() < 1e-12);
        assert!(log_hfc_slope(&[rec(1, 1.0)]).is_none());
    }

    #[test]
    fn discrepancy_is_relative_for_large_ratios() {
        let a = SmoothingMetrics {
            hfc_lfc: 1000.0,
            mean_cosine: 0.5,
            effective_rank: 1.0,
        };
        let b = SmoothingMetrics { hfc_lfc: 1000.001, ..a };
        assert!((metric_discrepancy(&a, &b, MetricFields::All) - 1e-6).abs() < 1e-9);
        let inf = SmoothingMetrics {
            hfc_lfc: f64::INFINITY,
            ..a
        };
        assert_eq!(metric_discrepancy(&inf, &inf, MetricFields::HfcAndCosine), 0.0);
    }
}
