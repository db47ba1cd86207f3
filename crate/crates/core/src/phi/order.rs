use crate::data::Dataset;
use crate::scalar::Scalar;

/// Relabelling of treatment and instrument levels: position `k` holds
/// treatment level `z[k]` and instrument level `w[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LevelOrder {
    pub z: Vec<usize>,
    pub w: Vec<usize>,
}

impl LevelOrder {
    pub fn identity(levels: usize) -> Self {
        Self { z: (0..levels).collect(), w: (0..levels).collect() }
    }

    pub fn levels(&self) -> usize {
        self.z.len()
    }

    pub fn is_identity(&self) -> bool {
        self.z.iter().enumerate().all(|(i, &z)| i == z) && self.w.iter().enumerate().all(|(i, &w)| i == w)
    }
}

/// Largest `L` searched exhaustively.
pub const MAX_TRIANGULAR_LEVELS: usize = 6;

/// Finds orders making the system triangular: with levels relabelled,
/// `P̂(Z = z_l | W = w_k) ≤ tol` whenever `l > k`.
///
/// Treatment orders are enumerated lexicographically from the identity. For a
/// fixed treatment order an instrument fits position `k` iff its support only
/// uses treatment positions `≤ k`, so sorting instruments by the last
/// position they use (stable, keeping the natural order on ties) decides
/// feasibility.
pub fn detect_triangular<T: Scalar>(data: &Dataset<T>, tol: f64) -> Option<LevelOrder> {
    let l = data.levels();
    if l > MAX_TRIANGULAR_LEVELS {
        return None;
    }
    let counts = data.cell_counts();
    let w_totals: Vec<usize> = (0..l).map(|w| (0..l).map(|z| counts[z][w]).sum()).collect();
    let support = |z: usize, w: usize| -> bool {
        w_totals[w] > 0 && counts[z][w] as f64 / w_totals[w] as f64 > tol
    };
    let mut perm: Vec<usize> = (0..l).collect();
    loop {
        let mut position = vec![0; l];
        for (pos, &z) in perm.iter().enumerate() {
            position[z] = pos;
        }
        let mut last_used: Vec<(usize, usize)> = (0..l)
            .map(|w| {
                let last = (0..l).filter(|&z| support(z, w)).map(|z| position[z]).max().unwrap_or(0);
                (last, w)
            })
            .collect();
        last_used.sort_by_key(|&(last, _)| last);
        if last_used.iter().enumerate().all(|(k, &(last, _))| last <= k) {
            return Some(LevelOrder { z: perm, w: last_used.into_iter().map(|(_, w)| w).collect() });
        }
        if !next_permutation(&mut perm) {
            return None;
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;

    fn from_counts(counts: &[Vec<usize>]) -> Dataset<f64> {
        let l = counts.len();
        let mut obs = Vec::new();
        for (z, row) in counts.iter().enumerate() {
            for (w, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    obs.push(Observation { y: 1.0, delta: true, z, x: 0.0, w });
                }
            }
        }
        let codebook: Vec<Vec<f64>> = (0..l)
            .map(|z| (1..l).map(|j| if j == z { 1.0 } else { 0.0 }).collect())
            .collect();
        let labels: Vec<String> = (0..l).map(|i| i.to_string()).collect();
        Dataset::new(obs, codebook, labels.clone(), labels).unwrap()
    }

    #[test]
    fn one_sided_noncompliance_is_identity() {
        let d = from_counts(&[vec![50, 20], vec![0, 30]]);
        assert_eq!(detect_triangular(&d, 0.0), Some(LevelOrder::identity(2)));
    }

    #[test]
    fn illinois_zero_pattern_is_triangular() {
        // rows Z = (0,0), (1,0), (0,1); columns W = 0, 1, 2
        let d = from_counts(&[vec![527, 104, 176], vec![0, 408, 0], vec![0, 0, 328]]);
        let order = detect_triangular(&d, 0.0).unwrap();
        assert!(order.is_identity());
    }

    #[test]
    fn relabelling_is_found() {
        // treated-only arm listed first
        let d = from_counts(&[vec![0, 30], vec![20, 50]]);
        let order = detect_triangular(&d, 0.0).unwrap();
        assert_eq!(order.z, vec![1, 0]);
        assert_eq!(order.w, vec![0, 1]);
    }

    #[test]
    fn full_support_has_no_order() {
        let d = from_counts(&[vec![10, 20], vec![5, 30]]);
        assert_eq!(detect_triangular(&d, 0.0), None);
        // but a loose tolerance accepts near-compliance
        assert!(detect_triangular(&d, 0.4).is_some());
    }

    #[test]
    fn permutations_enumerate_all() {
        let mut p = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 24);
    }
}
