use std::collections::VecDeque;

use crate::image::{BinaryImage, NEIGHBORS};

/// Labels 8-connected components in raster order of their first pixel.
/// Returns the label image (`usize::MAX` for background) and the size of
/// each component.
pub(crate) fn label_components(b: &BinaryImage) -> (Vec<usize>, Vec<usize>) {
    let (w, h) = (b.width, b.height);
    let mut labels = vec![usize::MAX; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !b.data[start] || labels[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        labels[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in NEIGHBORS {
                let (nx, ny) = (x + dx, y + dy);
                if b.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if labels[j] == usize::MAX {
                        labels[j] = id;
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Sizes of the 8-connected components, sorted ascending.
pub fn component_sizes(b: &BinaryImage) -> Vec<usize> {
    let mut sizes = label_components(b).1;
    sizes.sort_unstable();
    sizes
}

/// Deletes every 8-connected component with fewer than `min_size` pixels.
pub fn remove_small_components(b: &BinaryImage, min_size: usize) -> BinaryImage {
    let (labels, sizes) = label_components(b);
    BinaryImage {
        width: b.width,
        height: b.height,
        data: labels
            .iter()
            .map(|&l| l != usize::MAX && sizes[l] >= min_size)
            .collect(),
    }
}

/// Rank-order erosion: an edge pixel survives iff at least `k` of its eight
/// neighbours are edge pixels. `k = 0` is the identity.
pub fn erode_threshold(b: &BinaryImage, k: usize) -> BinaryImage {
    BinaryImage::from_fn(b.width, b.height, |x, y| {
        b.get(x, y) && b.neighbor_count(x, y) >= k
    })
}

/// A stroke tip: an isolated pixel, or one whose edge neighbours form a
/// single contiguous arc of at most three pixels. The arc form catches tips
/// that touch a stroke diagonally, where a plain neighbour count sees three.
fn is_endpoint(b: &BinaryImage, x: usize, y: usize) -> bool {
    let mut ring = [false; 8];
    for (slot, (dx, dy)) in ring.iter_mut().zip(NEIGHBORS) {
        *slot = b.get_signed(x as isize + dx, y as isize + dy);
    }
    let count = ring.iter().filter(|&&v| v).count();
    let arcs = (0..8).filter(|&i| !ring[i] && ring[(i + 1) % 8]).count();
    count == 0 || (arcs == 1 && count <= 3)
}

fn adjacent(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
}

/// Prunes dead-end branches of up to `max_len` pixels.
///
/// Endpoints are peeled simultaneously `max_len` times. Peeling also
/// shortens the free ends of longer strokes, so those are regrown: from each
/// endpoint of what is left, removed pixels are restored for up to `max_len`
/// steps, but only where the restored pixel touches the kept set next to
/// the growing tip. That stops regrowth from turning into a stub that hangs
/// off the middle of a stroke. Strokes that vanish entirely stay gone, and
/// closed loops have no endpoints and are untouched.
pub fn remove_spurs(b: &BinaryImage, max_len: usize) -> BinaryImage {
    let mut img = b.clone();
    let mut doomed = Vec::new();
    for _ in 0..max_len {
        doomed.clear();
        doomed.extend(
            img.edge_pixels()
                .filter(|&(x, y)| is_endpoint(&img, x, y))
                .map(|(x, y)| y * img.width + x),
        );
        if doomed.is_empty() {
            break;
        }
        for &i in &doomed {
            img.data[i] = false;
        }
    }

    let mut tips: Vec<(usize, usize)> = img
        .edge_pixels()
        .filter(|&(x, y)| is_endpoint(&img, x, y))
        .collect();
    for _ in 0..max_len {
        let mut grown = Vec::new();
        for &tip in &tips {
            for (dx, dy) in NEIGHBORS {
                let (nx, ny) = (tip.0 as isize + dx, tip.1 as isize + dy);
                if !b.get_signed(nx, ny) || img.get_signed(nx, ny) {
                    continue;
                }
                let p = (nx as usize, ny as usize);
                let local = NEIGHBORS.iter().all(|(ex, ey)| {
                    let (qx, qy) = (nx + ex, ny + ey);
                    !img.get_signed(qx, qy) || adjacent((qx as usize, qy as usize), tip)
                });
                if local {
                    img.set(p.0, p.1, true);
                    grown.push(p);
                }
            }
        }
        if grown.is_empty() {
            break;
        }
        tips = grown;
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_diagonal_chain_as_one_component() {
        let b = BinaryImage::from_ascii(&["#..", ".#.", "..#"]);
        assert_eq!(component_sizes(&b), vec![3]);
    }

    #[test]
    fn long_isolated_stroke_survives_pruning() {
        let b = BinaryImage::from_ascii(&["............", ".##########.", "............"]);
        assert_eq!(remove_spurs(&b, 4), b);
    }
}
