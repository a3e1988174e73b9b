//! Marker-controlled watershed by priority flooding.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy)]
struct Entry {
    level: f64,
    order: u64,
    index: usize,
    label: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.level
            .total_cmp(&other.level)
            .then(self.order.cmp(&other.order))
    }
}

/// Floods `surface` from `markers` (0 = unlabeled) over 4-connected
/// neighbors, lowest level first with FIFO order among equal levels. Every
/// pixel reachable from a marker receives the label of the front that
/// reaches it first.
pub fn watershed(surface: &[f64], width: usize, height: usize, markers: &[u32]) -> Vec<u32> {
    assert_eq!(surface.len(), width * height);
    assert_eq!(markers.len(), width * height);
    let mut labels = markers.to_vec();
    let mut heap = BinaryHeap::new();
    let mut order = 0u64;

    let neighbors = |i: usize| {
        let (x, y) = (i % width, i / width);
        let mut out = [usize::MAX; 4];
        if x + 1 < width {
            out[0] = i + 1;
        }
        if x > 0 {
            out[1] = i - 1;
        }
        if y + 1 < height {
            out[2] = i + width;
        }
        if y > 0 {
            out[3] = i - width;
        }
        out
    };

    for i in 0..labels.len() {
        if labels[i] == 0 {
            continue;
        }
        for j in neighbors(i) {
            if j != usize::MAX && labels[j] == 0 {
                heap.push(Reverse(Entry { level: surface[j], order, index: j, label: labels[i] }));
                order += 1;
            }
        }
    }

    while let Some(Reverse(e)) = heap.pop() {
        if labels[e.index] != 0 {
            continue;
        }
        labels[e.index] = e.label;
        for j in neighbors(e.index) {
            if j != usize::MAX && labels[j] == 0 {
                // A pixel is never flooded below the level of the front reaching it.
                let level = surface[j].max(e.level);
                heap.push(Reverse(Entry { level, order, index: j, label: e.label }));
                order += 1;
            }
        }
    }
    labels
}
