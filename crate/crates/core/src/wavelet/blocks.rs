use crate::grid::GridFunction;
use crate::weight::ScalePlan;

use super::basis::WaveletBasis;
use super::transform::{synthesize, CoeffTree};

/// Weight-adapted blocks `g_l` of one grid function.
///
/// `g_0` holds the scaling part and any generations `j ≤ α_0`; `g_l` holds
/// generations `α_{l-1} < j ≤ α_l`. When the plan runs past the grid, the
/// last block is cut at generation `J − 1` so that the blocks sum to the
/// full function.
#[derive(Debug, Clone)]
pub struct BlockSeq {
    pub blocks: Vec<GridFunction>,
    /// `(first, last)` detail generation of each block, `None` when empty.
    pub generations: Vec<Option<(u32, u32)>>,
    /// Whether the last block was cut at the grid resolution.
    pub truncated: bool,
}

impl BlockSeq {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `∑_{l ≤ upto} g_l`.
    pub fn cumulative(&self, upto: usize) -> GridFunction {
        let mut acc = GridFunction::zeros(self.blocks[0].level());
        for b in &self.blocks[..=upto] {
            acc.add_assign(b);
        }
        acc
    }
}

/// Generation ranges `(lo, hi]` of each block for a grid of level `level`.
pub fn block_ranges(plan: &ScalePlan, j0: u32, level: u32) -> (Vec<Option<(u32, u32)>>, bool) {
    let top = level - 1;
    let mut ranges = Vec::new();
    let mut truncated = false;
    for (l, &alpha) in plan.alphas.iter().enumerate() {
        let lo = if l == 0 { j0 } else { (plan.alphas[l - 1] + 1).max(j0 as u64) as u32 };
        let hi = alpha.min(top as u64) as u32;
        ranges.push((lo <= hi && hi >= j0).then_some((lo, hi)));
        if alpha >= top as u64 {
            truncated = alpha > top as u64;
            break;
        }
    }
    (ranges, truncated)
}

/// Split a coefficient tree into weight-adapted blocks.
pub fn block_decompose(tree: &CoeffTree, plan: &ScalePlan, basis: &WaveletBasis) -> BlockSeq {
    let (generations, truncated) = block_ranges(plan, tree.j0, tree.level);
    let blocks = generations
        .iter()
        .enumerate()
        .map(|(l, range)| {
            let mut part = CoeffTree::zeros(tree.j0, tree.level);
            if l == 0 {
                part.scaling.clone_from(&tree.scaling);
            }
            if let Some((lo, hi)) = *range {
                for j in lo..=hi {
                    part.detail_mut(j).copy_from_slice(tree.detail(j));
                }
            }
            if l == 0 || range.is_some() {
                synthesize(&part, basis)
            } else {
                GridFunction::zeros(tree.level)
            }
        })
        .collect();
    BlockSeq {
        blocks,
        generations,
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::wavelet::transform::{analyze, atom, partial_sum};
    use crate::weight::Weight;

    fn plan(a: f64, band: f64) -> ScalePlan {
        ScalePlan::build(&Weight::power(a).unwrap(), Some(band), 10).unwrap()
    }

    #[test]
    fn ranges_follow_the_plan() {
        let p = plan(1.0, 5.0); // alphas 0, 3, 5, 7, 10, 12, 14, ...
        let (r, truncated) = block_ranges(&p, 3, 12);
        assert_eq!(
            r,
            vec![None, Some((3, 3)), Some((4, 5)), Some((6, 7)), Some((8, 10)), Some((11, 11))]
        );
        assert!(truncated);
        let (r, truncated) = block_ranges(&p, 3, 11);
        assert_eq!(r.len(), 5);
        assert!(!truncated);
    }

    #[test]
    fn telescoping_partial_sums() {
        let b = WaveletBasis::with_order(3).unwrap();
        let p = plan(1.0, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = GridFunction::new((0..1 << 12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let tree = analyze(&f, &b).unwrap();
        let blocks = block_decompose(&tree, &p, &b);
        for (l, &alpha) in p.alphas.iter().enumerate().skip(1).take(4) {
            let s = partial_sum(&tree, alpha as u32, &b).unwrap();
            assert!(blocks.cumulative(l).max_diff(&s) < 1e-8);
        }
        assert!(blocks.cumulative(blocks.len() - 1).max_diff(&f) < 1e-8);
    }

    #[test]
    fn single_wavelet_lands_in_one_block() {
        let b = WaveletBasis::with_order(4).unwrap();
        let p = plan(1.0, 5.0);
        let f = atom(&b, true, 6, 17, 11);
        let tree = analyze(&f, &b).unwrap();
        let blocks = block_decompose(&tree, &p, &b);
        // generation 6 lies in (5, 7]
        for (l, g) in blocks.blocks.iter().enumerate() {
            if l == 3 {
                assert!(g.max_diff(&f) < 1e-10);
            } else {
                assert!(g.sup_norm() < 1e-10, "block {l}");
            }
        }
    }
}
