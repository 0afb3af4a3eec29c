//! Region reorganization: partition the token grid into mutually exclusive
//! regions keyed by the set of objects covering each token.
//!
//! Tokens with the same covering set form one region even when they are not
//! spatially connected, since the attention inputs of a region depend only on
//! its covering set. Regions are ordered lexicographically by covering set
//! with the background (empty set) last.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::layout::{rasterize_box, DescriptionTuple, Layout, TokenGrid};
use crate::{Error, Result};

/// Sorted, duplicate-free object ids covering a token. Empty means background.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoveringSet(Vec<usize>);

impl CoveringSet {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self(ids)
    }

    pub fn background() -> Self {
        Self(Vec::new())
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn is_background(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Ord for CoveringSet {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_background(), other.is_background()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for CoveringSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub covering_set: CoveringSet,
    /// Ascending token indices; never empty.
    pub tokens: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionPartition {
    pub grid: TokenGrid,
    pub regions: Vec<Region>,
    pub token_to_region: Vec<usize>,
}

impl RegionPartition {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn region(&self, index: usize) -> Result<&Region> {
        self.regions.get(index).ok_or(Error::OutOfRange {
            what: "region",
            index,
            len: self.regions.len(),
        })
    }

    /// Checks cover, disjointness and index consistency. Returns a description
    /// of the first broken invariant.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.grid.len();
        if self.token_to_region.len() != n {
            return Err(format!(
                "token_to_region has {} entries for {n} tokens",
                self.token_to_region.len()
            ));
        }
        let mut hits = vec![0u32; n];
        for (ri, region) in self.regions.iter().enumerate() {
            if region.tokens.is_empty() {
                return Err(format!("region {ri} is empty"));
            }
            for &t in &region.tokens {
                let Some(h) = hits.get_mut(t) else {
                    return Err(format!("region {ri} has token {t} outside the grid"));
                };
                *h += 1;
                if self.token_to_region[t] != ri {
                    return Err(format!("token {t} maps to {} not {ri}", self.token_to_region[t]));
                }
            }
        }
        if let Some(t) = hits.iter().position(|&h| h != 1) {
            return Err(format!("token {t} is covered {} times", hits[t]));
        }
        for pair in self.regions.windows(2) {
            if pair[0].covering_set >= pair[1].covering_set {
                return Err("covering sets not unique and ordered".into());
            }
        }
        Ok(())
    }
}

/// Per-token covering sets from rasterized boxes.
pub fn covering_sets(layout: &Layout, grid: &TokenGrid) -> Vec<CoveringSet> {
    let mut per_token: Vec<Vec<usize>> = vec![Vec::new(); grid.len()];
    let mut objects: Vec<&DescriptionTuple> = layout.objects.iter().collect();
    objects.sort_by_key(|o| o.id);
    for obj in objects {
        let mask = rasterize_box(&obj.bbox, grid);
        if mask.is_empty() {
            log::warn!(
                "object {} rasterizes to zero tokens on a {}x{} grid; skipped",
                obj.id,
                grid.height(),
                grid.width()
            );
        }
        for t in mask {
            per_token[t].push(obj.id);
        }
    }
    // Ids were pushed in ascending order.
    per_token.into_iter().map(CoveringSet).collect()
}

pub fn reorganize(layout: &Layout, grid: &TokenGrid) -> RegionPartition {
    let sets = covering_sets(layout, grid);
    let mut groups: BTreeMap<CoveringSet, Vec<usize>> = BTreeMap::new();
    for (token, set) in sets.into_iter().enumerate() {
        groups.entry(set).or_default().push(token);
    }
    let mut token_to_region = vec![0; grid.len()];
    let regions: Vec<Region> = groups
        .into_iter()
        .enumerate()
        .map(|(ri, (covering_set, tokens))| {
            for &t in &tokens {
                token_to_region[t] = ri;
            }
            Region {
                covering_set,
                tokens,
            }
        })
        .collect();
    RegionPartition {
        grid: *grid,
        regions,
        token_to_region,
    }
}

/// Visual tokens located in the region.
pub fn select_visual(partition: &RegionPartition, region_index: usize) -> Result<&[usize]> {
    Ok(&partition.region(region_index)?.tokens)
}

/// Objects attached to the region, ascending by id. Empty for background.
pub fn select_descriptions<'a>(
    layout: &'a Layout,
    partition: &RegionPartition,
    region_index: usize,
) -> Result<Vec<&'a DescriptionTuple>> {
    let region = partition.region(region_index)?;
    region
        .covering_set
        .ids()
        .iter()
        .map(|&id| {
            layout.object(id).ok_or(Error::OutOfRange {
                what: "object id",
                index: id,
                len: layout.objects.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::layout::BoundingBox;
    use crate::testutil::{arb_layout, random_layout, two_box_layout};

    /// Per-token covering sets straight from the center-in-box predicate.
    fn brute_labels(layout: &Layout, grid: &TokenGrid) -> Vec<Vec<usize>> {
        (0..grid.len())
            .map(|t| {
                let (x, y) = grid.center(t);
                let mut ids: Vec<usize> = layout
                    .objects
                    .iter()
                    .filter(|o| o.bbox.contains_point(x, y))
                    .map(|o| o.id)
                    .collect();
                ids.sort_unstable();
                ids
            })
            .collect()
    }

    #[test]
    fn two_overlapping_boxes_give_four_regions() {
        let grid = TokenGrid::new(8, 8).unwrap();
        let p = reorganize(&two_box_layout(), &grid);
        let sets: Vec<&[usize]> = p.regions.iter().map(|r| r.covering_set.ids()).collect();
        assert_eq!(sets, vec![&[0][..], &[0, 1], &[1], &[]]);
        p.check_invariants().unwrap();
    }

    #[test]
    fn overlap_region_is_intersection_of_masks() {
        let layout = two_box_layout();
        let grid = TokenGrid::new(8, 8).unwrap();
        let p = reorganize(&layout, &grid);
        let a: BTreeSet<_> = rasterize_box(&layout.objects[0].bbox, &grid).into_iter().collect();
        let b: BTreeSet<_> = rasterize_box(&layout.objects[1].bbox, &grid).into_iter().collect();
        let both: Vec<usize> = a.intersection(&b).copied().collect();
        assert_eq!(select_visual(&p, 1).unwrap(), both.as_slice());
        let ds = select_descriptions(&layout, &p, 1).unwrap();
        assert_eq!(ds.iter().map(|d| d.id).collect::<Vec<_>>(), vec![0, 1]);
        assert!(select_descriptions(&layout, &p, 3).unwrap().is_empty());
    }

    #[test]
    fn empty_layout_single_background() {
        let grid = TokenGrid::new(5, 3).unwrap();
        let p = reorganize(&Layout::new(10, 10), &grid);
        assert_eq!(p.regions.len(), 1);
        assert!(p.regions[0].covering_set.is_background());
        assert_eq!(p.regions[0].tokens.len(), 15);
    }

    #[test]
    fn full_cover_single_region() {
        let grid = TokenGrid::new(4, 4).unwrap();
        let layout = Layout::new(10, 10).with_object(BoundingBox::FULL, "sky");
        let p = reorganize(&layout, &grid);
        assert_eq!(p.regions.len(), 1);
        assert_eq!(select_visual(&p, 0).unwrap(), (0..16).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn out_of_range_region() {
        let grid = TokenGrid::new(2, 2).unwrap();
        let layout = Layout::new(10, 10);
        let p = reorganize(&layout, &grid);
        assert!(matches!(select_visual(&p, 1), Err(Error::OutOfRange { .. })));
        assert!(select_descriptions(&layout, &p, 5).is_err());
    }

    #[test]
    fn labels_match_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let grid = TokenGrid::new(16, 16).unwrap();
        for _ in 0..200 {
            let layout = random_layout(&mut rng, 5);
            let p = reorganize(&layout, &grid);
            let brute = brute_labels(&layout, &grid);
            for (t, ids) in brute.iter().enumerate() {
                assert_eq!(p.regions[p.token_to_region[t]].covering_set.ids(), ids.as_slice());
            }
        }
    }

    #[test]
    fn selected_descriptions_match_intersection_test() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let grid = TokenGrid::new(rng.random_range(1..24), rng.random_range(1..24)).unwrap();
            let layout = random_layout(&mut rng, 8);
            let p = reorganize(&layout, &grid);
            for ri in 0..p.len() {
                let tokens: BTreeSet<usize> = select_visual(&p, ri).unwrap().iter().copied().collect();
                let expected: Vec<usize> = layout
                    .objects
                    .iter()
                    .filter(|o| {
                        let mask = rasterize_box(&o.bbox, &grid);
                        mask.iter().any(|t| tokens.contains(t))
                    })
                    .map(|o| o.id)
                    .collect();
                let got: Vec<usize> =
                    select_descriptions(&layout, &p, ri).unwrap().iter().map(|d| d.id).collect();
                assert_eq!(got, expected);
            }
        }
    }

    proptest! {
        #[test]
        fn partition_invariants(layout in arb_layout(20), h in 1usize..=64, w in 1usize..=64) {
            let grid = TokenGrid::new(h, w).unwrap();
            let p = reorganize(&layout, &grid);
            prop_assert_eq!(p.check_invariants(), Ok(()));
            let bound = grid.len().min(1usize << layout.len().min(20));
            prop_assert!(p.len() <= bound);
        }

        #[test]
        fn permutation_equivariant(layout in arb_layout(8), seed in any::<u64>()) {
            let grid = TokenGrid::new(12, 10).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = layout.len();
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            // Object at new position k is old object perm[k].
            let mut permuted = Layout::new(256, 256);
            for &old in &perm {
                permuted = permuted.with_object(layout.objects[old].bbox, "o");
            }
            let a = reorganize(&layout, &grid);
            let b = reorganize(&permuted, &grid);
            for t in 0..grid.len() {
                let mapped: Vec<usize> = b.regions[b.token_to_region[t]]
                    .covering_set
                    .ids()
                    .iter()
                    .map(|&k| perm[k])
                    .collect();
                prop_assert_eq!(CoveringSet::new(mapped), a.regions[a.token_to_region[t]].covering_set.clone());
            }
            // Same token partition: two tokens share a region in one iff in the other.
            for t in 0..grid.len() {
                for u in (t + 1)..grid.len() {
                    prop_assert_eq!(
                        a.token_to_region[t] == a.token_to_region[u],
                        b.token_to_region[t] == b.token_to_region[u]
                    );
                }
            }
        }
    }
}
