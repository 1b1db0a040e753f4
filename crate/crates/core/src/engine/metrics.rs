use super::EngineError;

pub fn accuracy(predictions: &[usize], gold: &[usize]) -> Result<f64, EngineError> {
    check_lengths(predictions, gold)?;
    let correct = predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(correct as f64 / gold.len() as f64)
}

/// Unweighted mean of per-class F1 over `0..num_classes`. A class that
/// never occurs in either sequence scores 0 and still counts.
pub fn macro_f1(predictions: &[usize], gold: &[usize], num_classes: usize) -> Result<f64, EngineError> {
    check_lengths(predictions, gold)?;
    if num_classes == 0 {
        return Err(EngineError::Metric("empty tagset".into()));
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&p, &g) in predictions.iter().zip(gold) {
        if p == g {
            if p < num_classes {
                tp[p] += 1;
            }
        } else {
            if p < num_classes {
                fp[p] += 1;
            }
            if g < num_classes {
                fn_[g] += 1;
            }
        }
    }
    let total: f64 = (0..num_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / num_classes as f64)
}

fn check_lengths(predictions: &[usize], gold: &[usize]) -> Result<(), EngineError> {
    if predictions.len() != gold.len() {
        return Err(EngineError::Metric(format!("{} predictions for {} gold labels", predictions.len(), gold.len())));
    }
    if gold.is_empty() {
        return Err(EngineError::Metric("no predictions".into()));
    }
    Ok(())
}

/// Trapezoid area under `(budget, value)` divided by the budget span.
pub fn auc(points: &[(usize, f64)]) -> Result<f64, EngineError> {
    if points.len() < 2 {
        return Err(EngineError::Metric(format!("AUC needs at least 2 points, got {}", points.len())));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(EngineError::Metric("budgets must be strictly increasing".into()));
    }
    let area: f64 = points.windows(2).map(|w| (w[1].0 - w[0].0) as f64 * (w[0].1 + w[1].1) / 2.0).sum();
    Ok(area / (points[points.len() - 1].0 - points[0].0) as f64)
}
