use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::indicators::{best_by_rank_sum, IndicatorReport};
use crate::netgen::{Architecture, SearchSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub arch: Architecture,
    pub report: IndicatorReport,
    /// Evaluation index at which the member was born; strictly increasing
    /// from front (oldest) to back.
    pub born: usize,
}

/// Aging population: the oldest member leaves whenever a child enters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub members: VecDeque<Member>,
    pub capacity: usize,
    pub tournament: usize,
}

impl Population {
    pub fn new(capacity: usize, tournament: usize) -> Self {
        Population {
            members: VecDeque::with_capacity(capacity + 1),
            capacity,
            tournament,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Appends `member`; once over capacity the oldest is removed and returned.
    pub fn push(&mut self, member: Member) -> Option<Member> {
        self.members.push_back(member);
        if self.members.len() > self.capacity {
            self.members.pop_front()
        } else {
            None
        }
    }

    /// Index of the best member among `indices` by rank-sum within that group.
    pub fn best_of(&self, indices: &[usize]) -> Option<usize> {
        let reports: Vec<&IndicatorReport> =
            indices.iter().map(|&i| &self.members[i].report).collect();
        best_by_rank_sum(&reports).map(|k| indices[k])
    }

    pub fn best(&self) -> Option<&Member> {
        let all: Vec<usize> = (0..self.members.len()).collect();
        self.best_of(&all).map(|i| &self.members[i])
    }

    /// Mean of member one-hot encodings.
    pub fn mean_one_hot(&self, space: &SearchSpace) -> Vec<f64> {
        let mut acc: Vec<f64> = Vec::new();
        for m in &self.members {
            let v = m.arch.one_hot(space);
            if acc.is_empty() {
                acc = v;
            } else {
                acc.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
            }
        }
        let n = self.members.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// Mean pairwise Hamming distance between member decision vectors.
pub fn diversity(archs: &[&Architecture], space: &SearchSpace) -> f64 {
    let n = archs.len();
    if n < 2 {
        return 0.0;
    }
    let choices: Vec<Vec<usize>> = archs.iter().map(|a| a.choices(space)).collect();
    let mut differing: u64 = 0;
    for d in 0..space.num_choices() {
        let mut counts = vec![0u64; space.choice_arity(d)];
        for c in &choices {
            counts[c[d]] += 1;
        }
        let same: u64 = counts.iter().map(|c| c * c).sum();
        differing += ((n * n) as u64 - same) / 2;
    }
    differing as f64 / ((n * (n - 1) / 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diversity_examples() {
        let space = SearchSpace::cell201();
        let a = Architecture::cell(vec![0, 1, 2, 3, 4, 0]);
        let b = Architecture::cell(vec![0, 1, 2, 3, 1, 1]);
        assert_eq!(diversity(&[&a, &a, &a], &space), 0.0);
        assert_eq!(diversity(&[&a, &b], &space), 2.0);
    }

    #[test]
    fn diversity_matches_pairwise() {
        let space = SearchSpace::toy();
        let archs: Vec<Architecture> = (0..9)
            .map(|i| Architecture::cell(vec![i % 3, i / 3, (i * 2) % 3]))
            .collect();
        let refs: Vec<&Architecture> = archs.iter().collect();
        let mut total = 0;
        let mut pairs = 0;
        for i in 0..9 {
            for j in (i + 1)..9 {
                total += archs[i]
                    .ops()
                    .iter()
                    .zip(archs[j].ops())
                    .filter(|(x, y)| x != y)
                    .count();
                pairs += 1;
            }
        }
        assert!((diversity(&refs, &space) - total as f64 / pairs as f64).abs() < 1e-12);
    }

    #[test]
    fn push_pops_oldest() {
        let mut p = Population::new(2, 1);
        let m = |born| Member {
            arch: Architecture::cell(vec![0, 0, 0]),
            report: IndicatorReport::fixed(String::new(), 1.0, 1.0, 1.0),
            born,
        };
        assert!(p.push(m(0)).is_none());
        assert!(p.push(m(1)).is_none());
        assert_eq!(p.push(m(2)).unwrap().born, 0);
        assert_eq!(p.len(), 2);
    }
}
