//! Pure reference implementations of the vector stages: Haar patient
//! vectors, TF-IDF weighting and the cosine k-NN vote. The engine-backed
//! workload reuses the vote and the idf formula; the rest serves as the
//! oracle the workload results are tested against.

use atoll_engines::array::{bin_edges, haar};

use super::cohort::Label;
use super::AnalyticsError;

/// Per-scale histogram vector of a signal's Haar coefficients,
/// concatenated DC scale first, then detail scales coarse → fine. The
/// bin edges come from a training pass and are supplied per scale as
/// `(lo, hi)`.
pub fn haar_patient_vector(
    signal: &[f64],
    bins: usize,
    scale_bounds: &[(f64, f64)],
) -> Result<Vec<f64>, AnalyticsError> {
    if !signal.len().is_power_of_two() {
        return Err(AnalyticsError::Config(
            "signal length must be a power of two".into(),
        ));
    }
    let ranges = haar::scale_ranges(signal.len());
    if ranges.len() != scale_bounds.len() {
        return Err(AnalyticsError::Config(format!(
            "{} scale bounds supplied for {} scales",
            scale_bounds.len(),
            ranges.len()
        )));
    }
    let mut coeff = signal.to_vec();
    haar::forward(&mut coeff);

    let mut out = Vec::with_capacity(ranges.len() * bins);
    for (range, &(lo, hi)) in ranges.iter().zip(scale_bounds) {
        let edges = bin_edges(lo, hi, bins);
        let mut counts = vec![0.0; bins];
        for &v in &coeff[range.clone()] {
            if v < lo || v > hi {
                continue;
            }
            let idx = edges[..bins].partition_point(|e| *e <= v) - 1;
            counts[idx] += 1.0;
        }
        out.extend(counts);
    }
    Ok(out)
}

/// Smoothed inverse document frequency:
/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
pub fn idf_vector(dfs: &[usize], n_docs: usize) -> Vec<f64> {
    dfs.iter()
        .map(|&df| ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0)
        .collect()
}

/// TF-IDF weighting of a count matrix (rows are documents).
/// `weight(d, t) = count(d, t) · idf(t)` with df counted over the rows.
pub fn tfidf_weight(counts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if counts.is_empty() {
        return Vec::new();
    }
    let terms = counts[0].len();
    let dfs: Vec<usize> = (0..terms)
        .map(|t| counts.iter().filter(|row| row[t] > 0.0).count())
        .collect();
    let idf = idf_vector(&dfs, counts.len());
    counts
        .iter()
        .map(|row| row.iter().zip(&idf).map(|(c, w)| c * w).collect())
        .collect()
}

/// Cosine distance `1 − a·b / (‖a‖‖b‖)`; all-zero vectors sit at
/// distance 1 from everything.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - dot / (na * nb)
}

/// Majority vote over the k nearest training vectors under cosine
/// distance. Distance ties break deterministically by patient position.
/// Returns the label and the neighbor indices in vote order.
pub fn knn_classify(
    train: &[Vec<f64>],
    labels: &[Label],
    test: &[f64],
    k: usize,
) -> Result<(Label, Vec<usize>), AnalyticsError> {
    if k > train.len() {
        return Err(AnalyticsError::Config(format!(
            "k = {k} exceeds the {} training vectors",
            train.len()
        )));
    }
    let distances: Vec<(usize, f64)> = train
        .iter()
        .enumerate()
        .map(|(i, v)| (i, cosine_distance(v, test)))
        .collect();
    Ok(vote_from_distances(&distances, labels, k))
}

/// Shared vote: sort by `(distance, index)`, take k, majority label.
pub fn vote_from_distances(
    distances: &[(usize, f64)],
    labels: &[Label],
    k: usize,
) -> (Label, Vec<usize>) {
    let mut sorted = distances.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let neighbors: Vec<usize> = sorted.iter().take(k).map(|(i, _)| *i).collect();
    let deteriorating = neighbors
        .iter()
        .filter(|&&i| labels[i] == Label::Deteriorating)
        .count();
    let label = if 2 * deteriorating > neighbors.len() {
        Label::Deteriorating
    } else {
        Label::Stable
    };
    (label, neighbors)
}
