//! Gray-code scan over the subsets of a domain with incremental volume,
//! perimeter and per-state interaction bookkeeping. One element flips per
//! visited subset, so a full scan costs O(2^k * max-degree).

use crate::space::RandomWalkSpace;

pub struct SubsetView<'a> {
    /// Global membership mask (length n of the space).
    pub members: &'a [bool],
    /// Bitmask over the domain ordering (bit i = domain[i] selected).
    pub mask: u64,
    pub volume: f64,
    /// Perimeter of the current subset within the whole space.
    pub perimeter: f64,
    /// For every state x: sum of conductances from x into the subset
    /// (self-loops excluded).
    pub cut_to_set: &'a [f64],
}

/// Visits every nonempty subset of `domain`. Flip order follows the binary
/// reflected Gray code over the domain indices.
pub fn scan_subsets(
    space: &RandomWalkSpace,
    domain: &[u32],
    mut visit: impl FnMut(&SubsetView<'_>),
) {
    let k = domain.len();
    assert!(k <= 30, "exhaustive scan limited to 30 elements");
    let n = space.len();
    let mut members = vec![false; n];
    let mut cut_to_set = vec![0.0; n];
    let boundary: Vec<f64> = (0..n as u32)
        .map(|x| {
            space
                .incident(x)
                .iter()
                .map(|&e| space.edges()[e as usize].cond)
                .sum()
        })
        .collect();
    let mut volume = 0.0;
    let mut perimeter = 0.0;

    let total: u64 = 1u64 << k;
    let mut gray_prev: u64 = 0;
    for counter in 1..total {
        let gray = counter ^ (counter >> 1);
        let flipped = (gray ^ gray_prev).trailing_zeros() as usize;
        gray_prev = gray;
        let x = domain[flipped];
        let xi = x as usize;
        if members[xi] {
            members[xi] = false;
            volume -= space.nu(x);
            perimeter -= boundary[xi] - 2.0 * cut_to_set[xi];
            for &e in space.incident(x) {
                let y = space.other_end(e, x);
                cut_to_set[y as usize] -= space.edges()[e as usize].cond;
            }
        } else {
            members[xi] = true;
            volume += space.nu(x);
            perimeter += boundary[xi] - 2.0 * cut_to_set[xi];
            for &e in space.incident(x) {
                let y = space.other_end(e, x);
                cut_to_set[y as usize] += space.edges()[e as usize].cond;
            }
        }
        visit(&SubsetView {
            members: &members,
            mask: gray,
            volume,
            perimeter,
            cut_to_set: &cut_to_set,
        });
    }
}

/// True when the subset is connected in the support graph (loops ignored).
pub fn is_connected_subset(space: &RandomWalkSpace, members: &[bool]) -> bool {
    let Some(start) = members.iter().position(|&m| m) else {
        return false;
    };
    let mut seen = vec![false; space.len()];
    let mut stack = vec![start as u32];
    seen[start] = true;
    let mut count = 1usize;
    let total = members.iter().filter(|&&m| m).count();
    while let Some(x) = stack.pop() {
        for &e in space.incident(x) {
            let y = space.other_end(e, x);
            if members[y as usize] && !seen[y as usize] {
                seen[y as usize] = true;
                count += 1;
                stack.push(y);
            }
        }
    }
    count == total
}
