//! Constrained set partitions for moment formulas and M-term integrals.
//!
//! Labels are grouped (one group per factor of a product of multiple
//! integrals). A partition is admissible when
//!
//! 1. two labels from the same group never share a block, and
//! 2. every block has at least two elements.
//!
//! [`filter_connected`] keeps the sub-family whose group graph — an edge
//! for every pair of groups meeting in a block, plus caller-supplied fixed
//! edges for shared outer variables — is connected. Connectedness of that
//! graph is equivalent to the every-bipartition-crossed condition; the
//! brute-force equivalence over all bipartitions is pinned down in the
//! tests.
//!
//! Shared outer variables are deliberately *not* merged into partition
//! blocks: they enter connectivity only through fixed edges. This keeps
//! the admissible family on the large side, so partition-sum upper bounds
//! stay upper bounds.

use serde::Serialize;

use crate::error::{Error, Result};

/// One kernel-argument label: `index`-th partitioned variable of `group`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarLabel {
    pub group: usize,
    pub index: usize,
}

/// A partition of grouped labels in canonical form: each block sorted,
/// blocks ordered by their smallest label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Partition {
    blocks: Vec<Vec<VarLabel>>,
}

impl Partition {
    pub fn blocks(&self) -> &[Vec<VarLabel>] {
        &self.blocks
    }

    /// Number of blocks, `|π|`.
    pub fn size(&self) -> usize {
        self.blocks.len()
    }

    pub fn from_blocks(mut blocks: Vec<Vec<VarLabel>>) -> Self {
        for b in &mut blocks {
            b.sort();
        }
        blocks.sort_by_key(|b| b[0]);
        Partition { blocks }
    }
}

fn labels_for(group_sizes: &[usize]) -> Vec<VarLabel> {
    let mut labels = Vec::new();
    for (group, &size) in group_sizes.iter().enumerate() {
        for index in 0..size {
            labels.push(VarLabel { group, index });
        }
    }
    labels
}

/// All partitions of the grouped labels with same-group separation and
/// block size ≥ 2, in canonical order, without duplicates.
///
/// The empty label set yields exactly one (empty) partition, which makes
/// level-1 chaos cases well-defined downstream.
pub fn enumerate_pi(group_sizes: &[usize]) -> Vec<Partition> {
    enumerate_with_min_block(group_sizes, 2)
}

/// Same enumeration with a configurable minimum block size. The selftest
/// uses `min_block = 1` as a fault-injection hook: the corrupted predicate
/// must be caught by the brute-force oracle comparison.
#[doc(hidden)]
pub fn enumerate_with_min_block(group_sizes: &[usize], min_block: usize) -> Vec<Partition> {
    let labels = labels_for(group_sizes);
    let n = labels.len();
    if n == 0 {
        return vec![Partition { blocks: vec![] }];
    }
    let mut out = Vec::new();
    // Restricted-growth search: label i joins an existing block or opens a
    // new one; blocks indexed by creation order = order of smallest label.
    // `deficit` counts how many more labels undersized blocks still need.
    let mut block_of = vec![usize::MAX; n];
    let mut block_sizes: Vec<usize> = Vec::new();
    let mut block_groups: Vec<Vec<usize>> = Vec::new();

    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        labels: &[VarLabel],
        min_block: usize,
        block_of: &mut Vec<usize>,
        block_sizes: &mut Vec<usize>,
        block_groups: &mut Vec<Vec<usize>>,
        deficit: usize,
        out: &mut Vec<Partition>,
    ) {
        let n = labels.len();
        if i == n {
            debug_assert_eq!(deficit, 0);
            let mut blocks = vec![Vec::new(); block_sizes.len()];
            for (idx, &b) in block_of.iter().enumerate() {
                blocks[b].push(labels[idx]);
            }
            out.push(Partition { blocks });
            return;
        }
        let remaining_after = n - i - 1;
        let group = labels[i].group;
        for b in 0..=block_sizes.len() {
            let (new_deficit, opening) = if b == block_sizes.len() {
                (deficit + min_block.saturating_sub(1), true)
            } else {
                if block_groups[b].contains(&group) {
                    continue; // same-group separation
                }
                let gain = if block_sizes[b] < min_block { 1 } else { 0 };
                (deficit - gain, false)
            };
            // undersized blocks must be fillable by the remaining labels
            if new_deficit > remaining_after {
                continue;
            }
            if opening {
                block_sizes.push(1);
                block_groups.push(vec![group]);
            } else {
                block_sizes[b] += 1;
                block_groups[b].push(group);
            }
            block_of[i] = b;
            rec(i + 1, labels, min_block, block_of, block_sizes, block_groups, new_deficit, out);
            block_of[i] = usize::MAX;
            if opening {
                block_sizes.pop();
                block_groups.pop();
            } else {
                block_sizes[b] -= 1;
                block_groups[b].pop();
            }
        }
    }

    rec(0, &labels, min_block, &mut block_of, &mut block_sizes, &mut block_groups, 0, &mut out);
    out
}

/// Keeps the partitions whose group graph (block co-occurrence edges plus
/// `fixed_edges`) connects all `num_groups` groups.
pub fn filter_connected(
    parts: &[Partition],
    fixed_edges: &[(usize, usize)],
    num_groups: usize,
) -> Vec<Partition> {
    parts
        .iter()
        .filter(|p| is_connected(p, fixed_edges, num_groups))
        .cloned()
        .collect()
}

pub(crate) fn is_connected(
    part: &Partition,
    fixed_edges: &[(usize, usize)],
    num_groups: usize,
) -> bool {
    if num_groups <= 1 {
        return true;
    }
    let mut parent: Vec<usize> = (0..num_groups).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = num_groups;
    let union = |parent: &mut Vec<usize>, a: usize, b: usize, components: &mut usize| {
        let ra = find(parent, a);
        let rb = find(parent, b);
        if ra != rb {
            parent[ra] = rb;
            *components -= 1;
        }
    };
    for &(a, b) in fixed_edges {
        union(&mut parent, a, b, &mut components);
    }
    for block in part.blocks() {
        for w in block.windows(2) {
            union(&mut parent, w[0].group, w[1].group, &mut components);
        }
    }
    components == 1
}

/// Describes the argument structure of a product of kernel copies: each
/// copy has leading shared slots (fixed identifications like the outer
/// `z`, `y`), then its partitioned group slots, then free slots integrated
/// independently per copy.
#[derive(Debug, Clone)]
pub struct WiringSpec {
    /// Shared-variable ids (0..num_shared) taken by each copy's leading slots.
    pub shared_slots: Vec<Vec<usize>>,
    /// Partitioned slots per copy (the group sizes).
    pub group_sizes: Vec<usize>,
    /// Trailing free slots per copy.
    pub free_counts: Vec<usize>,
    /// Number of distinct shared variables.
    pub num_shared: usize,
}

impl WiringSpec {
    pub fn num_copies(&self) -> usize {
        self.group_sizes.len()
    }

    /// Fixed connectivity edges induced by shared variables: every pair of
    /// copies holding the same shared id.
    pub fn fixed_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for s in 0..self.num_shared {
            let holders: Vec<usize> = (0..self.num_copies())
                .filter(|&c| self.shared_slots[c].contains(&s))
                .collect();
            for i in 0..holders.len() {
                for j in (i + 1)..holders.len() {
                    edges.push((holders[i], holders[j]));
                }
            }
        }
        edges
    }
}

/// Total map from every kernel-argument slot to an outer integration
/// variable. Outer variables are ordered: shared ids, then partition
/// blocks (canonical order), then free variables copy-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wiring {
    /// `slot_map[copy][slot]` = outer variable index.
    pub slot_map: Vec<Vec<usize>>,
    pub num_outer: usize,
    pub num_shared: usize,
    pub num_blocks: usize,
}

/// Builds the argument map for one partition of the spec's group labels.
pub fn build_wiring(spec: &WiringSpec, partition: &Partition) -> Result<Wiring> {
    let copies = spec.num_copies();
    if spec.shared_slots.len() != copies || spec.free_counts.len() != copies {
        return Err(Error::config("wiring spec: per-copy lists have inconsistent lengths"));
    }
    // block id per (group, index)
    let mut block_of: Vec<Vec<usize>> =
        spec.group_sizes.iter().map(|&g| vec![usize::MAX; g]).collect();
    for (b, block) in partition.blocks().iter().enumerate() {
        for label in block {
            let slot = block_of
                .get_mut(label.group)
                .and_then(|v| v.get_mut(label.index))
                .ok_or_else(|| {
                    Error::config(format!(
                        "partition label (group {}, index {}) outside the wiring spec",
                        label.group, label.index
                    ))
                })?;
            *slot = b;
        }
    }
    let num_blocks = partition.size();
    let mut next_free = spec.num_shared + num_blocks;
    let mut slot_map = Vec::with_capacity(copies);
    for c in 0..copies {
        let mut slots =
            Vec::with_capacity(spec.shared_slots[c].len() + spec.group_sizes[c] + spec.free_counts[c]);
        for &s in &spec.shared_slots[c] {
            if s >= spec.num_shared {
                return Err(Error::config("wiring spec: shared id out of range"));
            }
            slots.push(s);
        }
        for idx in 0..spec.group_sizes[c] {
            let b = block_of[c][idx];
            if b == usize::MAX {
                return Err(Error::config(format!(
                    "slot (copy {c}, group index {idx}) left unmapped by the partition"
                )));
            }
            slots.push(spec.num_shared + b);
        }
        for _ in 0..spec.free_counts[c] {
            slots.push(next_free);
            next_free += 1;
        }
        slot_map.push(slots);
    }
    Ok(Wiring {
        slot_map,
        num_outer: next_free,
        num_shared: spec.num_shared,
        num_blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    /// Independent admissibility predicate used to re-check enumerator output.
    fn admissible(p: &Partition) -> bool {
        p.blocks().iter().all(|b| {
            b.len() >= 2 && {
                let groups: HashSet<usize> = b.iter().map(|l| l.group).collect();
                groups.len() == b.len()
            }
        })
    }

    /// Brute-force oracle: enumerate ALL set partitions, filter.
    fn brute_force_pi(group_sizes: &[usize]) -> Vec<Partition> {
        let labels = labels_for(group_sizes);
        let n = labels.len();
        if n == 0 {
            return vec![Partition { blocks: vec![] }];
        }
        let mut out = Vec::new();
        let mut assign = vec![0usize; n];
        fn rec(
            i: usize,
            max_used: usize,
            assign: &mut Vec<usize>,
            labels: &[VarLabel],
            out: &mut Vec<Partition>,
        ) {
            if i == labels.len() {
                let blocks_n = max_used;
                let mut blocks = vec![Vec::new(); blocks_n];
                for (idx, &b) in assign.iter().enumerate() {
                    blocks[b].push(labels[idx]);
                }
                out.push(Partition::from_blocks(blocks));
                return;
            }
            for b in 0..=max_used {
                assign[i] = b;
                rec(i + 1, max_used.max(b + 1), assign, labels, out);
            }
        }
        rec(0, 0, &mut assign, &labels, &mut out);
        out.into_iter().filter(admissible).collect()
    }

    /// Literal every-bipartition-crossed predicate over groups `0..g`.
    fn bipartition_predicate(p: &Partition, fixed: &[(usize, usize)], g: usize) -> bool {
        let mut edges: Vec<(usize, usize)> = fixed.to_vec();
        for block in p.blocks() {
            for i in 0..block.len() {
                for j in (i + 1)..block.len() {
                    edges.push((block[i].group, block[j].group));
                }
            }
        }
        // all 2^(g-1) − 1 bipartitions: M1 ranges over proper nonempty
        // subsets containing group 0
        for mask in 0..(1u32 << (g - 1)) {
            let m1: HashSet<usize> = (0..g)
                .filter(|&v| v == 0 || (mask >> (v - 1)) & 1 == 1)
                .collect();
            if m1.len() == g {
                continue;
            }
            let crossed = edges
                .iter()
                .any(|&(a, b)| m1.contains(&a) != m1.contains(&b));
            if !crossed {
                return false;
            }
        }
        true
    }

    #[test]
    fn four_singleton_groups_give_four_partitions() {
        let parts = enumerate_pi(&[1, 1, 1, 1]);
        assert_eq!(parts.len(), 4);
        let sizes: Vec<usize> = parts.iter().map(|p| p.size()).collect();
        // one 4-block partition and the three pair-pairings
        assert_eq!(sizes.iter().filter(|&&s| s == 1).count(), 1);
        assert_eq!(sizes.iter().filter(|&&s| s == 2).count(), 3);
        for p in &parts {
            assert!(admissible(p));
        }
    }

    #[test]
    fn two_singleton_groups_give_single_pair() {
        let parts = enumerate_pi(&[1, 1]);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].size(), 1);
        assert_eq!(parts[0].blocks()[0].len(), 2);
    }

    #[test]
    fn two_groups_of_two_give_two_pairings() {
        let parts = enumerate_pi(&[2, 2]);
        assert_eq!(parts.len(), 2);
        for p in &parts {
            assert_eq!(p.size(), 2);
            assert!(admissible(p));
        }
    }

    #[test]
    fn empty_groups_single_empty_partition() {
        let parts = enumerate_pi(&[]);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].size(), 0);
        let parts = enumerate_pi(&[0, 0, 0, 0]);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].size(), 0);
    }

    #[test]
    fn enumerator_matches_brute_force() {
        // oracle equivalence on every group-size vector up to (2,2,2,2)
        for a in 0..=2 {
            for b in 0..=2 {
                for c in 0..=2 {
                    for d in 0..=2 {
                        let sizes = [a, b, c, d];
                        let fast: HashSet<Partition> =
                            enumerate_pi(&sizes).into_iter().collect();
                        let slow: HashSet<Partition> =
                            brute_force_pi(&sizes).into_iter().collect();
                        assert_eq!(fast, slow, "sizes {sizes:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_form_and_size_bound() {
        for sizes in [[2, 2, 2, 2], [2, 1, 2, 1], [1, 1, 1, 1]] {
            let total: usize = sizes.iter().sum();
            for p in enumerate_pi(&sizes) {
                assert!(p.size() <= total / 2, "block-size ≥ 2 forces |π| ≤ n/2");
                for block in p.blocks() {
                    assert!(block.windows(2).all(|w| w[0] < w[1]), "blocks sorted");
                }
                assert!(
                    p.blocks().windows(2).all(|w| w[0][0] < w[1][0]),
                    "blocks ordered by smallest label"
                );
            }
        }
    }

    #[test]
    fn connectivity_no_fixed_edges() {
        let parts = enumerate_pi(&[1, 1, 1, 1]);
        let kept = filter_connected(&parts, &[], 4);
        // only the 4-block connects all groups; each pairing leaves 2+2
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].size(), 1);
    }

    #[test]
    fn connectivity_with_cross_fixed_edges() {
        let parts = enumerate_pi(&[1, 1, 1, 1]);
        let kept = filter_connected(&parts, &[(0, 2), (1, 3)], 4);
        // 4-block plus the pairings {12}{34} and {14}{23}; the pairing
        // {13}{24} duplicates the fixed edges and stays disconnected
        assert_eq!(kept.len(), 3);
        for p in &kept {
            let dup = p.size() == 2
                && p.blocks().iter().all(|b| {
                    let gs: Vec<usize> = b.iter().map(|l| l.group).collect();
                    gs == vec![0, 2] || gs == vec![1, 3]
                });
            assert!(!dup, "the duplicated pairing must be rejected");
        }
        assert!(filter_connected(&[], &[], 4).is_empty());
    }

    #[test]
    fn connectivity_equals_bipartition_predicate() {
        let fixed_sets: [&[(usize, usize)]; 4] =
            [&[], &[(0, 2), (1, 3)], &[(0, 1), (2, 3)], &[(0, 1), (0, 2), (0, 3)]];
        for a in 0..=2 {
            for b in 0..=2 {
                for c in 0..=2 {
                    for d in 0..=2 {
                        let sizes = [a, b, c, d];
                        for p in enumerate_pi(&sizes) {
                            for fixed in fixed_sets {
                                assert_eq!(
                                    is_connected(&p, fixed, 4),
                                    bipartition_predicate(&p, fixed, 4),
                                    "sizes {sizes:?} fixed {fixed:?} partition {p:?}"
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn wiring_single_block_and_two_blocks() {
        let spec = WiringSpec {
            shared_slots: vec![vec![0], vec![1], vec![0], vec![1]],
            group_sizes: vec![1, 1, 1, 1],
            free_counts: vec![0, 0, 0, 0],
            num_shared: 2,
        };
        assert_eq!(spec.fixed_edges(), vec![(0, 2), (1, 3)]);
        let parts = enumerate_pi(&[1, 1, 1, 1]);
        let four_block = parts.iter().find(|p| p.size() == 1).unwrap();
        let w = build_wiring(&spec, four_block).unwrap();
        assert_eq!(w.num_outer, 3); // z, y, x1
        for c in 0..4 {
            assert_eq!(w.slot_map[c][1], 2, "all partitioned slots map to x1");
        }
        let pairing_13 = parts
            .iter()
            .find(|p| {
                p.size() == 2
                    && p.blocks()[0].iter().map(|l| l.group).collect::<Vec<_>>() == vec![0, 2]
            })
            .unwrap();
        let w = build_wiring(&spec, pairing_13).unwrap();
        assert_eq!(w.num_outer, 4);
        assert_eq!(w.slot_map[0][1], w.slot_map[2][1]);
        assert_eq!(w.slot_map[1][1], w.slot_map[3][1]);
        assert_ne!(w.slot_map[0][1], w.slot_map[1][1]);
    }

    #[test]
    fn wiring_counts_outer_variables() {
        // 2 fixed ids, empty groups, 4 free slots of one each → 6 outer vars
        let spec = WiringSpec {
            shared_slots: vec![vec![0], vec![1], vec![0], vec![1]],
            group_sizes: vec![0, 0, 0, 0],
            free_counts: vec![1, 1, 1, 1],
            num_shared: 2,
        };
        let empty = &enumerate_pi(&[0, 0, 0, 0])[0];
        let w = build_wiring(&spec, empty).unwrap();
        assert_eq!(w.num_outer, 6);
        // free variables are fresh per copy
        let frees: HashSet<usize> = (0..4).map(|c| w.slot_map[c][1]).collect();
        assert_eq!(frees.len(), 4);
    }

    #[test]
    fn wiring_rejects_mismatched_partition() {
        let spec = WiringSpec {
            shared_slots: vec![vec![0], vec![0]],
            group_sizes: vec![1, 1],
            free_counts: vec![0, 0],
            num_shared: 1,
        };
        // partition over larger groups than the spec declares
        let bad = enumerate_pi(&[2, 2]).into_iter().next().unwrap();
        assert!(build_wiring(&spec, &bad).is_err());
        // partition leaving a slot unmapped
        let empty = Partition::from_blocks(vec![]);
        assert!(build_wiring(&spec, &empty).is_err());
    }
}
