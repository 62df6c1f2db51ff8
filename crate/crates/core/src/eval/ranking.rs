use crate::error::{Error, Result};

/// Ranking quality, both in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankMetrics {
    pub auc: f64,
    pub ap: f64,
}

fn validate(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!("score {s} is not comparable")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument(
            "ranking metrics need at least one positive and one negative".into(),
        ));
    }
    Ok((pos, neg))
}

/// AUC as the Mann–Whitney win rate over positive/negative pairs (ties earn
/// half credit) and AP as the mean precision at each positive's rank, where
/// the ranking is by descending score with ties broken by index.
pub fn rank_metrics(scores: &[f64], labels: &[bool]) -> Result<RankMetrics> {
    let (pos, neg) = validate(scores, labels)?;

    let mut ascending: Vec<usize> = (0..scores.len()).collect();
    ascending.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the number of won pairs plus the number of tied pairs.
    let mut credit: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut start = 0;
    while start < ascending.len() {
        let s = scores[ascending[start]];
        let end = start + ascending[start..].iter().take_while(|&&i| scores[i] == s).count();
        let group_pos = ascending[start..end].iter().filter(|&&i| labels[i]).count() as u128;
        let group_neg = (end - start) as u128 - group_pos;
        credit += 2 * group_pos * neg_below + group_pos * group_neg;
        neg_below += group_neg;
        start = end;
    }
    let auc = 100.0 * credit as f64 / (2 * pos as u128 * neg as u128) as f64;

    let mut ranked: Vec<usize> = (0..scores.len()).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    for (k, &i) in ranked.iter().enumerate() {
        if labels[i] {
            hits += 1;
            precision_sum += hits as f64 / (k + 1) as f64;
        }
    }
    let ap = 100.0 * precision_sum / pos as f64;
    Ok(RankMetrics { auc, ap })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ranking() {
        let m = rank_metrics(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!((m.auc, m.ap), (100.0, 100.0));
    }

    #[test]
    fn worked_example() {
        let m = rank_metrics(&[0.9, 0.8, 0.3, 0.1], &[true, false, true, false]).unwrap();
        assert_eq!(m.auc, 75.0);
        assert_eq!(m.ap, 100.0 * (1.0 + 2.0 / 3.0) / 2.0);
        assert!((m.ap - 83.33).abs() < 0.005);
    }

    #[test]
    fn all_ties() {
        let m = rank_metrics(&[0.5; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(m.auc, 50.0);
    }

    #[test]
    fn errors() {
        assert!(rank_metrics(&[0.1, 0.2], &[true, true]).is_err());
        assert!(rank_metrics(&[0.1], &[true, false]).is_err());
        assert!(rank_metrics(&[f64::NAN, 0.2], &[true, false]).is_err());
    }
}
