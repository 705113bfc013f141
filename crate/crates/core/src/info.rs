//! Weighted Shannon entropy (base 2) over contingency tables.

pub fn entropy(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            -p * p.log2()
        })
        .sum()
}

/// Information gain and split information of a split whose branches carry
/// the per-class weights in `branches` (`[negative, positive]` per branch).
pub fn gain_and_split_info(branches: &[[f64; 2]]) -> (f64, f64) {
    let mut class = [0.0; 2];
    let mut sizes = Vec::with_capacity(branches.len());
    for b in branches {
        class[0] += b[0];
        class[1] += b[1];
        sizes.push(b[0] + b[1]);
    }
    let total = class[0] + class[1];
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    let conditional: f64 = branches
        .iter()
        .zip(&sizes)
        .map(|(b, &s)| s / total * entropy(b))
        .sum();
    let gain = (entropy(&class) - conditional).max(0.0);
    (gain, entropy(&sizes))
}

/// Gain ratio of a split, `None` when the split information is zero.
pub fn gain_ratio_of_branches(branches: &[[f64; 2]]) -> Option<f64> {
    let (gain, split_info) = gain_and_split_info(branches);
    (split_info > 1e-12).then(|| gain / split_info)
}

/// Joint-count table of two discrete variables.
pub fn mutual_information(table: &[Vec<f64>]) -> f64 {
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols_n = table.first().map_or(0, Vec::len);
    let cols: Vec<f64> = (0..cols_n).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let flat: Vec<f64> = table.iter().flatten().copied().collect();
    (entropy(&rows) + entropy(&cols) - entropy(&flat)).max(0.0)
}

/// Symmetrical uncertainty `2 I(X;Y) / (H(X) + H(Y))`, 0 when both are constant.
pub fn symmetrical_uncertainty(table: &[Vec<f64>]) -> f64 {
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols_n = table.first().map_or(0, Vec::len);
    let cols: Vec<f64> = (0..cols_n).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let denom = entropy(&rows) + entropy(&cols);
    if denom <= 1e-12 {
        return 0.0;
    }
    (2.0 * mutual_information(table) / denom).clamp(0.0, 1.0)
}
