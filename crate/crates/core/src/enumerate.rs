//! Lexicographic enumeration of product policy sets.

use crate::error::Result;
use crate::feasibility::{induced_policy_set_size, ActionSetMap};
use crate::model::{CmdpInstance, Policy};

/// Yields every policy of an induced set exactly once, state 0 most significant.
#[derive(Clone, Debug)]
pub struct PolicyEnumerator {
    sets: Vec<Vec<usize>>,
    cursor: Option<Vec<usize>>,
    remaining: u64,
}

impl PolicyEnumerator {
    fn new(map: &ActionSetMap, count: u64) -> Self {
        let sets = map.sets().to_vec();
        let cursor = Some(vec![0; sets.len()]);
        PolicyEnumerator { sets, cursor, remaining: count }
    }
}

impl Iterator for PolicyEnumerator {
    type Item = Policy;

    fn next(&mut self) -> Option<Policy> {
        let digits = self.cursor.as_mut()?;
        let policy = Policy(digits.iter().zip(&self.sets).map(|(&d, s)| s[d]).collect());
        self.remaining -= 1;
        // odometer increment, last state fastest
        let mut carry = true;
        for x in (0..digits.len()).rev() {
            digits[x] += 1;
            if digits[x] < self.sets[x].len() {
                carry = false;
                break;
            }
            digits[x] = 0;
        }
        if carry {
            self.cursor = None;
        }
        Some(policy)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

impl ExactSizeIterator for PolicyEnumerator {}

/// Every policy of `allowed` (all of `Π` when `None`), refused above `cap`.
pub fn enumerate_policies(inst: &CmdpInstance, allowed: Option<&ActionSetMap>, cap: u64) -> Result<PolicyEnumerator> {
    let full;
    let map = match allowed {
        Some(m) => m,
        None => {
            full = ActionSetMap::full(inst);
            &full
        }
    };
    let count = induced_policy_set_size(map, cap)?;
    Ok(PolicyEnumerator::new(map, count))
}

/// Position of `pi` in the lexicographic enumeration of all of `Π`.
pub fn policy_rank(inst: &CmdpInstance, pi: &Policy) -> usize {
    pi.iter().enumerate().fold(0usize, |acc, (x, &a)| acc * inst.num_actions(x) + a)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::error::CmdpError;
    use crate::generate::{gen_instance, GenOptions};

    #[test]
    fn two_by_two_lexicographic() {
        let inst = gen_instance(&GenOptions::new(2, 2, 3)).unwrap();
        let all: Vec<_> = enumerate_policies(&inst, None, 10).unwrap().map(|p| p.0).collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn singleton_map_yields_one() {
        let inst = gen_instance(&GenOptions::new(3, 3, 3)).unwrap();
        let map = ActionSetMap::singleton(&Policy(vec![2, 0, 1]));
        let all: Vec<_> = enumerate_policies(&inst, Some(&map), 10).unwrap().collect();
        assert_eq!(all, vec![Policy(vec![2, 0, 1])]);
    }

    #[test]
    fn three_by_three_distinct_and_ranked() {
        let inst = gen_instance(&GenOptions::new(3, 3, 3)).unwrap();
        let all: Vec<_> = enumerate_policies(&inst, None, 100).unwrap().collect();
        assert_eq!(all.len(), 27);
        assert_eq!(all.iter().collect::<HashSet<_>>().len(), 27);
        for (i, p) in all.iter().enumerate() {
            assert_eq!(policy_rank(&inst, p), i);
        }
    }

    #[test]
    fn sparse_map_order() {
        let inst = gen_instance(&GenOptions::new(2, 3, 3)).unwrap();
        let map = ActionSetMap::new(&inst, vec![vec![0, 2], vec![1, 2]]).unwrap();
        let all: Vec<_> = enumerate_policies(&inst, Some(&map), 10).unwrap().map(|p| p.0).collect();
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![2, 1], vec![2, 2]]);
    }

    #[test]
    fn refuses_above_cap() {
        let inst = gen_instance(&GenOptions::new(4, 3, 3)).unwrap();
        assert!(matches!(enumerate_policies(&inst, None, 80), Err(CmdpError::CountTooLarge { .. })));
        assert_eq!(enumerate_policies(&inst, None, 81).unwrap().len(), 81);
    }
}
