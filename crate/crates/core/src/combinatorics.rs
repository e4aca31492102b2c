//! Integer partitions, Stirling numbers and truncated exp/log of power series.
//!
//! These are the building blocks for the approximation-scheme coefficients:
//! each coefficient is a sum over integer partitions weighted by `1 / z_λ`,
//! and the moment-based route goes through Stirling numbers of both kinds.

use crate::error::{Error, Result};

/// An integer partition stored as a non-increasing list of positive parts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IntegerPartition {
    parts: Vec<u32>,
}

impl IntegerPartition {
    /// Builds a partition from parts in any order. Zero parts are rejected.
    pub fn new(mut parts: Vec<u32>) -> Result<Self> {
        if parts.iter().any(|&p| p == 0) {
            return Err(Error::invalid("partition parts must be positive"));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// The integer being partitioned.
    pub fn size(&self) -> u32 {
        self.parts.iter().sum()
    }

    /// Number of parts, `ℓ(λ)`.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn min_part(&self) -> Option<u32> {
        self.parts.last().copied()
    }

    /// `(part, multiplicity)` pairs in decreasing part order.
    pub fn multiplicities(&self) -> Vec<(u32, u32)> {
        let mut out: Vec<(u32, u32)> = Vec::new();
        for &p in &self.parts {
            match out.last_mut() {
                Some((q, m)) if *q == p => *m += 1,
                _ => out.push((p, 1)),
            }
        }
        out
    }

    /// `z_λ = Π_k k^{m_k} m_k!`, with overflow reported as an error.
    pub fn z_lambda(&self) -> Result<u128> {
        let overflow = || Error::Overflow("z_lambda");
        let mut z: u128 = 1;
        for (part, mult) in self.multiplicities() {
            for i in 1..=mult {
                z = z
                    .checked_mul(part as u128)
                    .and_then(|z| z.checked_mul(i as u128))
                    .ok_or_else(overflow)?;
            }
        }
        Ok(z)
    }
}

/// Ascending compositions of `n` in lexicographic order.
///
/// Each yielded slice is non-decreasing and sums to `n`; the first element is
/// the smallest part.
fn for_each_ascending_composition(n: usize, mut visit: impl FnMut(&[u32])) {
    if n == 0 {
        return;
    }
    let mut a = vec![0u32; n + 1];
    let mut k = 1usize;
    let mut y = n as u32 - 1;
    while k != 0 {
        let mut x = a[k - 1] + 1;
        k -= 1;
        while 2 * x <= y {
            a[k] = x;
            y -= x;
            k += 1;
        }
        let l = k + 1;
        while x <= y {
            a[k] = x;
            a[l] = y;
            visit(&a[..k + 2]);
            x += 1;
            y -= 1;
        }
        a[k] = x + y;
        y = x + y - 1;
        visit(&a[..k + 1]);
    }
}

/// All partitions of `k` whose parts are all at least `min_part`.
///
/// Partitions are produced through the ascending-composition encoding and
/// filtered on their smallest part. The result is sorted lexicographically on
/// the non-increasing part lists.
pub fn partitions_with_min_part(k: u32, min_part: u32) -> Vec<IntegerPartition> {
    if k == 0 || min_part == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for_each_ascending_composition(k as usize, |asc| {
        if asc[0] >= min_part {
            let parts: Vec<u32> = asc.iter().rev().copied().collect();
            out.push(IntegerPartition { parts });
        }
    });
    out.sort();
    out
}

/// Stirling numbers of both kinds up to a fixed size, exact in `u128`.
#[derive(Debug, Clone)]
pub struct StirlingTable {
    max_size: usize,
    first: Vec<Vec<u128>>,
    second: Vec<Vec<u128>>,
}

impl StirlingTable {
    /// Fills both triangles up to `max_size` with the two-term recurrences.
    pub fn new(max_size: usize) -> Result<Self> {
        if max_size == 0 {
            return Err(Error::invalid("Stirling table size must be at least 1"));
        }
        let overflow = || Error::Overflow("Stirling numbers");
        let mut first = vec![vec![0u128; max_size + 1]; max_size + 1];
        let mut second = vec![vec![0u128; max_size + 1]; max_size + 1];
        first[0][0] = 1;
        second[0][0] = 1;
        for n in 0..max_size {
            for k in 1..=n + 1 {
                // c(n+1, k) = n c(n, k) + c(n, k-1)
                let c = first[n][k]
                    .checked_mul(n as u128)
                    .and_then(|v| v.checked_add(first[n][k - 1]))
                    .ok_or_else(overflow)?;
                first[n + 1][k] = c;
                // S(n+1, k) = k S(n, k) + S(n, k-1)
                let s = second[n][k]
                    .checked_mul(k as u128)
                    .and_then(|v| v.checked_add(second[n][k - 1]))
                    .ok_or_else(overflow)?;
                second[n + 1][k] = s;
            }
        }
        Ok(Self {
            max_size,
            first,
            second,
        })
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    /// Unsigned Stirling number of the first kind `[n k]` (permutations of
    /// `n` elements with `k` cycles).
    pub fn first_kind(&self, n: usize, k: usize) -> u128 {
        if n > self.max_size || k > n {
            return 0;
        }
        self.first[n][k]
    }

    /// Stirling number of the second kind `{n k}` (set partitions of `n`
    /// elements into `k` blocks).
    pub fn second_kind(&self, n: usize, k: usize) -> u128 {
        if n > self.max_size || k > n {
            return 0;
        }
        self.second[n][k]
    }
}

/// Coefficients `a_0..a_R` of a power series truncated at degree `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCoefficients(Vec<f64>);

impl SeriesCoefficients {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("a truncated series needs at least a_0"));
        }
        Ok(Self(coeffs))
    }

    /// The zero series of the given degree.
    pub fn zeros(degree: usize) -> Self {
        Self(vec![0.0; degree + 1])
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Product truncated at the degree of `self`.
    pub fn mul_truncated(&self, other: &SeriesCoefficients) -> SeriesCoefficients {
        let r = self.degree();
        let mut out = vec![0.0; r + 1];
        for (i, &a) in self.0.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.0.iter().enumerate().take(r + 1 - i) {
                out[i + j] += a * b;
            }
        }
        SeriesCoefficients(out)
    }
}

impl std::ops::Index<usize> for SeriesCoefficients {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

const NORMALIZATION_TOL: f64 = 1e-14;

/// `exp(g)` truncated at the degree of `g`. Requires `g_0 = 0`.
///
/// Uses `n h_n = Σ_{k=1}^n k g_k h_{n-k}`, from `h' = g' h`.
pub fn series_exp(g: &SeriesCoefficients) -> Result<SeriesCoefficients> {
    if g[0].abs() > NORMALIZATION_TOL {
        return Err(Error::invalid(format!(
            "series_exp requires a zero constant term, got {}",
            g[0]
        )));
    }
    let r = g.degree();
    let mut h = vec![0.0; r + 1];
    h[0] = 1.0;
    for n in 1..=r {
        let mut acc = 0.0;
        for k in 1..=n {
            acc += k as f64 * g[k] * h[n - k];
        }
        h[n] = acc / n as f64;
    }
    Ok(SeriesCoefficients(h))
}

/// `log(h)` truncated at the degree of `h`. Requires `h_0 = 1`.
pub fn series_log(h: &SeriesCoefficients) -> Result<SeriesCoefficients> {
    if (h[0] - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::invalid(format!(
            "series_log requires a unit constant term, got {}",
            h[0]
        )));
    }
    let r = h.degree();
    let mut g = vec![0.0; r + 1];
    for n in 1..=r {
        let mut acc = n as f64 * h[n];
        for k in 1..n {
            acc -= k as f64 * g[k] * h[n - k];
        }
        g[n] = acc / n as f64;
    }
    Ok(SeriesCoefficients(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Partition numbers from Euler's pentagonal recurrence.
    fn euler_partition_numbers(max: usize) -> Vec<u64> {
        let mut p = vec![0i64; max + 1];
        p[0] = 1;
        for n in 1..=max {
            let mut acc = 0i64;
            let mut k = 1i64;
            loop {
                let g1 = (k * (3 * k - 1) / 2) as usize;
                if g1 > n {
                    break;
                }
                let sign = if k % 2 == 1 { 1 } else { -1 };
                acc += sign * p[n - g1];
                let g2 = (k * (3 * k + 1) / 2) as usize;
                if g2 <= n {
                    acc += sign * p[n - g2];
                }
                k += 1;
            }
            p[n] = acc;
        }
        p.into_iter().map(|v| v as u64).collect()
    }

    /// All set partitions of {0..n-1} as block-label vectors.
    fn set_partitions(n: usize) -> Vec<Vec<usize>> {
        fn rec(i: usize, n: usize, labels: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
            if i == n {
                out.push(labels.clone());
                return;
            }
            for b in 0..=max {
                labels.push(b);
                rec(i + 1, n, labels, if b == max { max + 1 } else { max }, out);
                labels.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, n, &mut Vec::new(), 0, &mut out);
        out
    }

    fn block_sizes(labels: &[usize]) -> Vec<usize> {
        let nblocks = labels.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0; nblocks];
        for &l in labels {
            sizes[l] += 1;
        }
        sizes
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn partitions_of_four_with_min_two() {
        let got: Vec<Vec<u32>> = partitions_with_min_part(4, 2)
            .into_iter()
            .map(|p| p.parts().to_vec())
            .collect();
        assert_eq!(got, vec![vec![2, 2], vec![4]]);
    }

    #[test]
    fn no_partition_of_one_with_min_two() {
        assert!(partitions_with_min_part(1, 2).is_empty());
        assert!(partitions_with_min_part(0, 1).is_empty());
    }

    #[test]
    fn seven_partitions_of_five() {
        let all = partitions_with_min_part(5, 1);
        assert_eq!(all.len(), 7);
        for p in &all {
            assert_eq!(p.size(), 5);
            assert!(p.parts().windows(2).all(|w| w[0] >= w[1]));
        }
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn partition_counts_match_euler_recurrence() {
        let p = euler_partition_numbers(30);
        for k in 1..=30u32 {
            assert_eq!(
                partitions_with_min_part(k, 1).len() as u64,
                p[k as usize],
                "k = {k}"
            );
        }
    }

    #[test]
    fn min_part_filter_matches_brute_force() {
        for k in 1..=16u32 {
            for m in 1..=4u32 {
                let filtered: Vec<_> = partitions_with_min_part(k, 1)
                    .into_iter()
                    .filter(|p| p.min_part().unwrap() >= m)
                    .collect();
                assert_eq!(partitions_with_min_part(k, m), filtered);
            }
        }
    }

    #[test]
    fn z_lambda_examples() {
        assert_eq!(IntegerPartition::new(vec![3]).unwrap().z_lambda().unwrap(), 3);
        assert_eq!(IntegerPartition::new(vec![2, 2]).unwrap().z_lambda().unwrap(), 8);
        assert_eq!(IntegerPartition::new(vec![1, 1, 1]).unwrap().z_lambda().unwrap(), 6);
    }

    #[test]
    fn z_lambda_reports_overflow() {
        let huge = IntegerPartition::new(vec![1; 40]).unwrap();
        assert!(matches!(huge.z_lambda(), Err(Error::Overflow(_))));
    }

    #[test]
    fn class_sizes_sum_to_one() {
        for k in 1..=12u32 {
            let total: f64 = partitions_with_min_part(k, 1)
                .iter()
                .map(|p| 1.0 / p.z_lambda().unwrap() as f64)
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "k = {k}: {total}");
        }
    }

    #[test]
    fn stirling_small_values_match_enumeration() {
        let t = StirlingTable::new(8).unwrap();
        assert_eq!(t.second_kind(3, 2), 3);
        assert_eq!(t.first_kind(3, 2), 3);
        // Set partitions of n elements into k blocks, by enumeration.
        for n in 1..=7 {
            let parts = set_partitions(n);
            for k in 1..=n {
                let count = parts.iter().filter(|l| block_sizes(l).len() == k).count();
                assert_eq!(t.second_kind(n, k), count as u128);
            }
        }
        // Permutations of n elements with k cycles, by enumeration (n <= 6).
        fn cycles(perm: &[usize]) -> usize {
            let mut seen = vec![false; perm.len()];
            let mut c = 0;
            for s in 0..perm.len() {
                if !seen[s] {
                    c += 1;
                    let mut i = s;
                    while !seen[i] {
                        seen[i] = true;
                        i = perm[i];
                    }
                }
            }
            c
        }
        fn permutations(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in permutations(n - 1) {
                for pos in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(pos, n - 1);
                    out.push(q);
                }
            }
            out
        }
        for n in 1..=6 {
            let perms = permutations(n);
            for k in 1..=n {
                let count = perms.iter().filter(|p| cycles(p) == k).count();
                assert_eq!(t.first_kind(n, k), count as u128, "c({n},{k})");
            }
        }
    }

    #[test]
    fn stirling_diagonal_and_zero_column() {
        let t = StirlingTable::new(20).unwrap();
        for r in 1..=20 {
            assert_eq!(t.first_kind(r, r), 1);
            assert_eq!(t.second_kind(r, r), 1);
            assert_eq!(t.first_kind(r, 0), 0);
            assert_eq!(t.second_kind(r, 0), 0);
        }
    }

    #[test]
    fn stirling_inversion_identity() {
        let t = StirlingTable::new(20).unwrap();
        for r in 0..=20usize {
            for k in 0..=20usize {
                let mut acc: i128 = 0;
                for s in 0..=r {
                    let term = t.first_kind(r, s) as i128 * t.second_kind(s, k) as i128;
                    if (r - s) % 2 == 0 {
                        acc += term;
                    } else {
                        acc -= term;
                    }
                }
                assert_eq!(acc, i128::from(r == k), "r={r} k={k}");
            }
        }
    }

    #[test]
    fn stirling_up_to_thirty_fits() {
        let t = StirlingTable::new(30).unwrap();
        assert_eq!(t.first_kind(30, 30), 1);
        assert!(t.first_kind(30, 1) > 0);
    }

    #[test]
    fn exp_of_linear_series_is_exponential() {
        let lam = 1.7;
        let mut g = SeriesCoefficients::zeros(10);
        g.coeffs_mut()[1] = lam;
        let h = series_exp(&g).unwrap();
        for k in 0..=10 {
            let expected = lam.powi(k as i32) / factorial(k);
            assert!((h[k] - expected).abs() < 1e-14 * expected.max(1.0));
        }
    }

    #[test]
    fn exp_of_quadratic_term() {
        let a = 0.3;
        let g = SeriesCoefficients::new(vec![0.0, 0.0, a, 0.0, 0.0]).unwrap();
        let h = series_exp(&g).unwrap();
        let expected = [1.0, 0.0, a, 0.0, a * a / 2.0];
        for (x, y) in h.coeffs().iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn normalization_violations_are_errors() {
        let bad = SeriesCoefficients::new(vec![0.5, 1.0]).unwrap();
        assert!(series_exp(&bad).is_err());
        assert!(series_log(&bad).is_err());
    }

    /// exp via the recurrence equals the set-partition sum over blocks, when
    /// coefficients are written in exponential-generating form.
    #[test]
    fn exp_recurrence_matches_set_partition_sum() {
        let g_egf = [0.0, 0.4, -0.7, 1.3, 0.25, -0.9, 0.6, 0.11];
        let r = g_egf.len() - 1;
        let g: Vec<f64> = g_egf
            .iter()
            .enumerate()
            .map(|(n, &c)| c / factorial(n))
            .collect();
        let h = series_exp(&SeriesCoefficients::new(g).unwrap()).unwrap();
        for n in 1..=r {
            let sum: f64 = set_partitions(n)
                .iter()
                .map(|l| block_sizes(l).iter().map(|&b| g_egf[b]).product::<f64>())
                .sum();
            assert!((h[n] - sum / factorial(n)).abs() < 1e-12, "n = {n}");
        }
    }

    /// log via the recurrence equals the Möbius-weighted set-partition sum.
    #[test]
    fn log_recurrence_matches_mobius_sum() {
        let h_egf = [1.0, 0.3, 0.8, -0.5, 1.1, 0.2, -0.4];
        let r = h_egf.len() - 1;
        let h: Vec<f64> = h_egf
            .iter()
            .enumerate()
            .map(|(n, &c)| c / factorial(n))
            .collect();
        let g = series_log(&SeriesCoefficients::new(h).unwrap()).unwrap();
        for n in 1..=r {
            let sum: f64 = set_partitions(n)
                .iter()
                .map(|l| {
                    let sizes = block_sizes(l);
                    let nb = sizes.len();
                    let mobius = if nb % 2 == 1 { 1.0 } else { -1.0 } * factorial(nb - 1);
                    mobius * sizes.iter().map(|&b| h_egf[b]).product::<f64>()
                })
                .sum();
            assert!((g[n] - sum / factorial(n)).abs() < 1e-12, "n = {n}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn exp_log_round_trip(coeffs in proptest::collection::vec(-1.0f64..1.0, 1..=12)) {
            let mut g = vec![0.0];
            g.extend(coeffs);
            let g = SeriesCoefficients::new(g).unwrap();
            let back = series_log(&series_exp(&g).unwrap()).unwrap();
            for (a, b) in g.coeffs().iter().zip(back.coeffs()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
