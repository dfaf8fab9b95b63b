//! Largest-remainder apportionment with caps.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quotas {
    pub per_class: Vec<usize>,
    /// `K - Σ quotas` when the budget exceeds the confident pool.
    pub shortfall: usize,
}

impl Quotas {
    pub fn total(&self) -> usize {
        self.per_class.iter().sum()
    }
}

/// Apportion `k` seats among `active` classes proportional to `weights`.
/// Remainders are compared exactly as integers over the common denominator.
fn largest_remainder(weights: &[usize], active: &[usize], k: usize) -> Vec<usize> {
    let total: u128 = active.iter().map(|&c| weights[c] as u128).sum();
    let mut seats = vec![0usize; weights.len()];
    if total == 0 || k == 0 {
        return seats;
    }
    let mut rem: Vec<(u128, usize)> = Vec::with_capacity(active.len());
    let mut given = 0usize;
    for &c in active {
        let num = k as u128 * weights[c] as u128;
        seats[c] = (num / total) as usize;
        given += seats[c];
        rem.push((num % total, c));
    }
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in rem.iter().take(k - given) {
        seats[c] += 1;
    }
    seats
}

pub fn allocate_quotas(counts: &[usize], k: usize) -> Quotas {
    let available: usize = counts.iter().sum();
    if k >= available {
        return Quotas {
            per_class: counts.to_vec(),
            shortfall: k - available,
        };
    }
    let mut quotas = vec![0usize; counts.len()];
    let mut capped = vec![false; counts.len()];
    for (c, &n) in counts.iter().enumerate() {
        capped[c] = n == 0;
    }
    loop {
        let fixed: usize = (0..counts.len()).filter(|&c| capped[c]).map(|c| counts[c]).sum();
        let active: Vec<usize> = (0..counts.len()).filter(|&c| !capped[c]).collect();
        let seats = largest_remainder(counts, &active, k - fixed);
        let over: Vec<usize> = active.iter().copied().filter(|&c| seats[c] > counts[c]).collect();
        for &c in &active {
            quotas[c] = seats[c];
        }
        if over.is_empty() {
            break;
        }
        for c in over {
            capped[c] = true;
            quotas[c] = counts[c];
        }
    }
    for c in 0..counts.len() {
        if capped[c] {
            quotas[c] = counts[c];
        }
    }
    Quotas {
        per_class: quotas,
        shortfall: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_cases() {
        assert_eq!(allocate_quotas(&[5, 3, 2], 5).per_class, vec![3, 1, 1]);
        assert_eq!(allocate_quotas(&[1, 9], 4).per_class, vec![0, 4]);
        assert_eq!(allocate_quotas(&[0, 4, 4], 2).per_class, vec![0, 1, 1]);
    }

    #[test]
    fn budget_above_pool_reports_shortfall() {
        let q = allocate_quotas(&[2, 1], 5);
        assert_eq!(q.per_class, vec![2, 1]);
        assert_eq!(q.shortfall, 2);
    }
}
