use super::IndicatorReport;

/// 1-based ranks with ties sharing the mean of the positions they span.
pub fn average_ranks(values: &[f64], descending: bool) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let o = values[a].total_cmp(&values[b]);
        if descending {
            o.reverse()
        } else {
            o
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Sum of per-indicator ranks: κ̂ ascending, R̂ descending, MSE ascending.
/// Lower is better.
pub fn rank_sums(reports: &[&IndicatorReport]) -> Vec<f64> {
    let k: Vec<f64> = reports.iter().map(|r| r.kappa).collect();
    let reg: Vec<f64> = reports.iter().map(|r| r.regions).collect();
    let m: Vec<f64> = reports.iter().map(|r| r.mse).collect();
    let (rk, rr, rm) = (
        average_ranks(&k, false),
        average_ranks(&reg, true),
        average_ranks(&m, false),
    );
    (0..reports.len()).map(|i| rk[i] + rr[i] + rm[i]).collect()
}

/// Index of the best report by rank-sum; ties go to lower κ̂, then to the
/// lexicographically smaller architecture string.
pub fn best_by_rank_sum(reports: &[&IndicatorReport]) -> Option<usize> {
    let sums = rank_sums(reports);
    (0..reports.len()).min_by(|&a, &b| {
        sums[a]
            .total_cmp(&sums[b])
            .then(reports[a].kappa.total_cmp(&reports[b].kappa))
            .then_with(|| reports[a].arch.cmp(&reports[b].arch))
    })
}
