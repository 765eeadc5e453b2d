//! Strided line access on `side^d` cubes stored last axis fastest.

use rayon::prelude::*;

use crate::Complex64;

/// Calls `f` on every line along `axis` of length `len` whose other
/// coordinates are all below `extent`. Slabs above `axis` run in parallel.
pub(crate) fn for_each_line<F>(data: &mut [Complex64], d: usize, side: usize, axis: usize, len: usize, extent: usize, f: F)
where
    F: Fn(&mut [Complex64]) + Sync,
{
    let stride = side.pow((d - 1 - axis) as u32);
    let slab = stride * side;
    let inner = extent.pow((d - 1 - axis) as u32);
    let outer_used = extent.pow(axis as u32);
    let slab_ids: Vec<usize> = (0..outer_used)
        .map(|o| {
            // coordinates above `axis` limited to `extent`
            let mut idx = o;
            let mut id = 0;
            for b in (0..axis).rev() {
                id += (idx % extent) * side.pow((axis - 1 - b) as u32);
                idx /= extent;
            }
            id
        })
        .collect();
    let mut chunks: Vec<(usize, &mut [Complex64])> = data.chunks_mut(slab).enumerate().collect();
    let wanted: std::collections::HashSet<usize> = slab_ids.into_iter().collect();
    chunks.retain(|(i, _)| wanted.contains(i));
    chunks.into_par_iter().for_each(|(_, chunk)| {
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for t in 0..inner {
            let mut base = 0;
            let mut idx = t;
            for b in (axis + 1..d).rev() {
                base += (idx % extent) * side.pow((d - 1 - b) as u32);
                idx /= extent;
            }
            if stride == 1 {
                f(&mut chunk[base..base + len]);
                continue;
            }
            for (i, v) in buf.iter_mut().enumerate() {
                *v = chunk[base + i * stride];
            }
            f(&mut buf);
            for (i, v) in buf.iter().enumerate() {
                chunk[base + i * stride] = *v;
            }
        }
    });
}
