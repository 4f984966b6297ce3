//! Union-find with the weighted union rule, constant-time find and LIFO
//! deunion.
//!
//! Every element keeps a stack of set pointers. A union pushes the larger
//! set's id onto the stack of each element of the smaller set; deunion pops
//! those entries again. No pointer is ever overwritten, which is what makes
//! rollback cheap.

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetId(usize);

impl SetId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct UnionToken(usize);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DsuError {
    #[error("element {0} out of range")]
    OutOfRange(usize),
    #[error("element {0} already belongs to a set")]
    Duplicate(usize),
    #[error("element {0} belongs to no set")]
    Unknown(usize),
    #[error("cannot union a set with itself")]
    SameSet,
    #[error("set {0:?} is not live")]
    DeadSet(SetId),
    #[error("union token already reverted")]
    TokenUsed,
    #[error("deunion out of LIFO order")]
    NotLifo,
}

#[derive(Clone, Debug)]
struct SetRecord<P> {
    members: Vec<usize>,
    live: bool,
    payload: P,
    unions: Vec<usize>,
}

#[derive(Clone, Debug)]
struct UnionRecord<P> {
    winner: SetId,
    loser: SetId,
    old_payload: Option<P>,
    reverted: bool,
}

/// Disjoint sets over elements `0..capacity` carrying a payload per set.
#[derive(Clone, Debug)]
pub struct DisjointSets<P> {
    history: Vec<Vec<SetId>>,
    sets: Vec<SetRecord<P>>,
    unions: Vec<UnionRecord<P>>,
    entries: usize,
}

impl<P: Clone> DisjointSets<P> {
    pub fn new(capacity: usize) -> Self {
        DisjointSets {
            history: vec![Vec::new(); capacity],
            sets: Vec::new(),
            unions: Vec::new(),
            entries: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.history.len()
    }

    /// Creates the singleton `{element}`.
    pub fn make_set(&mut self, element: usize, payload: P) -> Result<SetId, DsuError> {
        let h = self.history.get_mut(element).ok_or(DsuError::OutOfRange(element))?;
        if !h.is_empty() {
            return Err(DsuError::Duplicate(element));
        }
        let id = SetId(self.sets.len());
        h.push(id);
        self.entries += 1;
        self.sets.push(SetRecord {
            members: vec![element],
            live: true,
            payload,
            unions: Vec::new(),
        });
        Ok(id)
    }

    /// Current set of `element`, in O(1).
    #[inline]
    pub fn find(&self, element: usize) -> Result<SetId, DsuError> {
        self.history
            .get(element)
            .ok_or(DsuError::OutOfRange(element))?
            .last()
            .copied()
            .ok_or(DsuError::Unknown(element))
    }

    #[inline]
    pub fn contains(&self, element: usize) -> bool {
        self.history.get(element).is_some_and(|h| !h.is_empty())
    }

    /// Unchecked find for hot loops; `element` must have been inserted.
    #[inline]
    pub fn find_fast(&self, element: usize) -> SetId {
        *self.history[element].last().expect("element not inserted")
    }

    /// Merges `a` and `b`. The merged set keeps the id of the larger input
    /// and receives `payload`.
    pub fn union(&mut self, a: SetId, b: SetId, payload: P) -> Result<(SetId, UnionToken), DsuError> {
        if a == b {
            return Err(DsuError::SameSet);
        }
        for s in [a, b] {
            if !self.sets.get(s.0).is_some_and(|r| r.live) {
                return Err(DsuError::DeadSet(s));
            }
        }
        let (winner, loser) = if self.sets[a.0].members.len() >= self.sets[b.0].members.len() {
            (a, b)
        } else {
            (b, a)
        };
        let moved = std::mem::take(&mut self.sets[loser.0].members);
        for &x in &moved {
            self.history[x].push(winner);
        }
        self.entries += moved.len();
        self.sets[winner.0].members.extend_from_slice(&moved);
        self.sets[loser.0].members = moved;
        let w = &mut self.sets[winner.0];
        let old_payload = Some(std::mem::replace(&mut w.payload, payload));
        let token = self.unions.len();
        w.unions.push(token);
        self.sets[loser.0].live = false;
        self.unions.push(UnionRecord {
            winner,
            loser,
            old_payload,
            reverted: false,
        });
        Ok((winner, UnionToken(token)))
    }

    /// Reverts a union. Must be the most recent live union of its set.
    /// Returns `(winner, loser)`, both live again with their old payloads.
    pub fn deunion(&mut self, token: UnionToken) -> Result<(SetId, SetId), DsuError> {
        let rec = self.unions.get(token.0).ok_or(DsuError::TokenUsed)?;
        if rec.reverted {
            return Err(DsuError::TokenUsed);
        }
        let (winner, loser) = (rec.winner, rec.loser);
        if self.sets[winner.0].unions.last() != Some(&token.0) || !self.sets[winner.0].live {
            return Err(DsuError::NotLifo);
        }
        let k = self.sets[loser.0].members.len();
        let w = &mut self.sets[winner.0];
        w.unions.pop();
        let keep = w.members.len() - k;
        for &x in &w.members[keep..] {
            let top = self.history[x].pop();
            debug_assert_eq!(top, Some(winner));
        }
        w.members.truncate(keep);
        let rec = &mut self.unions[token.0];
        rec.reverted = true;
        if let Some(p) = rec.old_payload.take() {
            self.sets[winner.0].payload = p;
        }
        self.sets[loser.0].live = true;
        Ok((winner, loser))
    }

    pub fn payload(&self, s: SetId) -> &P {
        &self.sets[s.0].payload
    }

    pub fn payload_mut(&mut self, s: SetId) -> &mut P {
        &mut self.sets[s.0].payload
    }

    pub fn members(&self, s: SetId) -> &[usize] {
        &self.sets[s.0].members
    }

    pub fn size(&self, s: SetId) -> usize {
        self.sets[s.0].members.len()
    }

    pub fn is_live(&self, s: SetId) -> bool {
        self.sets.get(s.0).is_some_and(|r| r.live)
    }

    /// Length of an element's pointer stack.
    pub fn depth(&self, element: usize) -> usize {
        self.history[element].len()
    }

    /// Total pointer entries ever created.
    pub fn history_entries(&self) -> usize {
        self.entries
    }

    pub fn live_sets(&self) -> impl Iterator<Item = SetId> + '_ {
        self.sets
            .iter()
            .enumerate()
            .filter(|(_, r)| r.live)
            .map(|(i, _)| SetId(i))
    }
}

/// `⌈log₂ n⌉` for `n ≥ 1`.
pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn make_set_and_find() {
        let mut d = DisjointSets::new(4);
        let a = d.make_set(1, 'a').unwrap();
        let b = d.make_set(2, 'b').unwrap();
        assert_ne!(a, b);
        assert_eq!(d.find(1), Ok(a));
        assert_eq!(*d.payload(d.find(1).unwrap()), 'a');
        assert_eq!(d.make_set(1, 'c'), Err(DsuError::Duplicate(1)));
        assert_eq!(d.find(3), Err(DsuError::Unknown(3)));
    }

    #[test]
    fn union_then_deunion() {
        let mut d = DisjointSets::new(3);
        let a = d.make_set(0, 0).unwrap();
        let b = d.make_set(1, 1).unwrap();
        let (s, tok) = d.union(a, b, 9).unwrap();
        assert_eq!(d.find(0), d.find(1));
        assert_eq!(*d.payload(s), 9);
        d.deunion(tok).unwrap();
        assert_ne!(d.find(0), d.find(1));
        assert_eq!(*d.payload(d.find(0).unwrap()), 0);
        assert_eq!(*d.payload(d.find(1).unwrap()), 1);
        assert_eq!(d.deunion(tok), Err(DsuError::TokenUsed));
    }

    #[test]
    fn weighted_rule_moves_smaller_side() {
        let mut d = DisjointSets::new(4);
        let s: Vec<SetId> = (0..4).map(|i| d.make_set(i, ()).unwrap()).collect();
        let (ab, _) = d.union(s[0], s[1], ()).unwrap();
        let (abc, _) = d.union(ab, s[2], ()).unwrap();
        let before: Vec<usize> = (0..3).map(|i| d.depth(i)).collect();
        d.union(abc, s[3], ()).unwrap();
        let after: Vec<usize> = (0..3).map(|i| d.depth(i)).collect();
        assert_eq!(before, after);
        assert_eq!(d.depth(3), 2);
    }

    #[test]
    fn nested_deunion_restores_inner_union() {
        let mut d = DisjointSets::new(3);
        let s: Vec<SetId> = (0..3).map(|i| d.make_set(i, i).unwrap()).collect();
        let (ab, _) = d.union(s[0], s[1], 10).unwrap();
        let (_, outer) = d.union(ab, s[2], 20).unwrap();
        d.deunion(outer).unwrap();
        assert_eq!(d.find(0), d.find(1));
        assert_ne!(d.find(0), d.find(2));
        assert_eq!(*d.payload(d.find(0).unwrap()), 10);
    }

    #[test]
    fn non_lifo_deunion_rejected() {
        let mut d = DisjointSets::new(3);
        let s: Vec<SetId> = (0..3).map(|i| d.make_set(i, ()).unwrap()).collect();
        let (ab, inner) = d.union(s[0], s[1], ()).unwrap();
        let (_, _outer) = d.union(ab, s[2], ()).unwrap();
        assert_eq!(d.deunion(inner), Err(DsuError::NotLifo));
    }

    #[test]
    fn history_bound_for_chain_of_unions() {
        for n in [1usize, 2, 3, 7, 8, 100, 1000] {
            let mut d = DisjointSets::new(n);
            let mut cur = d.make_set(0, ()).unwrap();
            for i in 1..n {
                let s = d.make_set(i, ()).unwrap();
                cur = d.union(cur, s, ()).unwrap().0;
            }
            assert!(d.history_entries() <= n * (ceil_log2(n) + 1));
        }
    }

    proptest! {
        #[test]
        fn depth_stays_logarithmic(pairs in proptest::collection::vec((0usize..64, 0usize..64), 0..200)) {
            let n = 64;
            let mut d = DisjointSets::new(n);
            for i in 0..n {
                d.make_set(i, ()).unwrap();
            }
            for (a, b) in pairs {
                let (sa, sb) = (d.find(a).unwrap(), d.find(b).unwrap());
                if sa != sb {
                    d.union(sa, sb, ()).unwrap();
                }
            }
            for i in 0..n {
                prop_assert!(d.depth(i) <= ceil_log2(n) + 1);
            }
        }
    }
}
