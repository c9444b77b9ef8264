use super::NumError;

/// Area under the ROC curve via the Mann–Whitney U statistic.
///
/// `labels[i]` marks positives. Tied scores count one half, which falls out
/// of using mid-ranks.
pub fn mann_whitney_auc(scores: &[f64], labels: &[bool]) -> Result<f64, NumError> {
    if scores.len() != labels.len() {
        return Err(NumError::DimensionMismatch {
            expected: format!("{} labels for {} scores", labels.len(), scores.len()),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(NumError::NonFinite);
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(NumError::DegenerateLabels);
    }
    let ranks = mid_ranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    let np = n_pos as f64;
    let u = rank_sum - np * (np + 1.0) / 2.0;
    Ok((u / (np * n_neg as f64)).clamp(0.0, 1.0))
}

/// 1-based ranks with ties replaced by their average rank.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
