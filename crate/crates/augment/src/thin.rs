use crate::image::{BinaryImage, NEIGHBORS};

/// Zhang–Suen skeletonization, iterated until neither sub-pass deletes a
/// pixel. Pixels outside the image count as background.
pub fn thin(b: &BinaryImage) -> BinaryImage {
    let mut img = b.clone();
    let mut doomed = Vec::new();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            doomed.clear();
            for (x, y) in img.edge_pixels() {
                if deletable(&img, x, y, pass) {
                    doomed.push(y * img.width + x);
                }
            }
            changed |= !doomed.is_empty();
            for &i in &doomed {
                img.data[i] = false;
            }
        }
        if !changed {
            return img;
        }
    }
}

fn deletable(img: &BinaryImage, x: usize, y: usize, pass: usize) -> bool {
    // p[0..8] = P2..P9: N, NE, E, SE, S, SW, W, NW.
    let mut p = [false; 8];
    for (slot, (dx, dy)) in p.iter_mut().zip(NEIGHBORS) {
        *slot = img.get_signed(x as isize + dx, y as isize + dy);
    }
    let b = p.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let [n, _, e, _, s, _, w, _] = p;
    if pass == 0 {
        !(n && e && s) && !(e && s && w)
    } else {
        !(n && e && w) && !(n && s && w)
    }
}
