//! Binary masks and the morphology used by marker construction.

use std::collections::VecDeque;

/// Binary grid over a patch; `true` marks defect pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

const CROSS: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const SQUARE: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

impl SegmentationMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    pub(crate) fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn complement(&self) -> Self {
        Self {
            data: self.data.iter().map(|v| !v).collect(),
            ..self.clone()
        }
    }

    fn neighbor(&self, x: usize, y: usize, d: (isize, isize)) -> Option<(usize, usize)> {
        let nx = x as isize + d.0;
        let ny = y as isize + d.1;
        (nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height)
            .then_some((nx as usize, ny as usize))
    }

    fn erode_with(&self, offsets: &[(isize, isize)]) -> Self {
        // Pixels beyond the border count as foreground so objects touching
        // the edge are not eaten from outside.
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(x, y)
                && offsets
                    .iter()
                    .all(|&d| self.neighbor(x, y, d).is_none_or(|(nx, ny)| self.get(nx, ny)))
        })
    }

    fn dilate_with(&self, offsets: &[(isize, isize)]) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(x, y)
                || offsets
                    .iter()
                    .any(|&d| self.neighbor(x, y, d).is_some_and(|(nx, ny)| self.get(nx, ny)))
        })
    }

    /// Erosion followed by dilation with the 3×3 cross.
    pub fn open_cross(&self) -> Self {
        self.erode_with(&CROSS).dilate_with(&CROSS)
    }

    /// `iterations` dilations with the 3×3 square.
    pub fn dilate_square(&self, iterations: usize) -> Self {
        (0..iterations).fold(self.clone(), |m, _| m.dilate_with(&SQUARE))
    }

    /// 8-connected component labels (0 = background, components from 1) and
    /// the number of components. Labels follow raster order of first pixel.
    pub fn label_components(&self) -> (Vec<u32>, u32) {
        let mut labels = vec![0u32; self.data.len()];
        let mut next = 0u32;
        let mut queue = VecDeque::new();
        for start in 0..self.data.len() {
            if !self.data[start] || labels[start] != 0 {
                continue;
            }
            next += 1;
            labels[start] = next;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                let (x, y) = (i % self.width, i / self.width);
                for d in SQUARE {
                    if let Some((nx, ny)) = self.neighbor(x, y, d) {
                        let j = ny * self.width + nx;
                        if self.data[j] && labels[j] == 0 {
                            labels[j] = next;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        (labels, next)
    }

    /// The largest 8-connected component (ties go to the lowest label).
    pub fn largest_component(&self) -> Self {
        let (labels, n) = self.label_components();
        if n == 0 {
            return self.clone();
        }
        let mut sizes = vec![0usize; n as usize + 1];
        for &l in &labels {
            sizes[l as usize] += 1;
        }
        let best = (1..=n as usize)
            .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
            .unwrap() as u32;
        Self {
            data: labels.iter().map(|&l| l == best).collect(),
            ..self.clone()
        }
    }

    /// Fills background regions not 4-connected to the patch border.
    pub fn fill_holes(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut outside = vec![false; w * h];
        let mut queue = VecDeque::new();
        for y in 0..h {
            for x in 0..w {
                let on_border = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
                if on_border && !self.get(x, y) {
                    outside[y * w + x] = true;
                    queue.push_back((x, y));
                }
            }
        }
        while let Some((x, y)) = queue.pop_front() {
            for d in CROSS {
                if let Some((nx, ny)) = self.neighbor(x, y, d) {
                    let j = ny * w + nx;
                    if !self.data[j] && !outside[j] {
                        outside[j] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
        }
        Self {
            data: outside.iter().map(|o| !o).collect(),
            ..self.clone()
        }
    }

    /// Midpoints of the pixel edges separating foreground from everything
    /// else, in continuous coordinates where pixel `(x, y)` spans
    /// `[x, x+1) × [y, y+1)`.
    pub fn boundary_points(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    continue;
                }
                let (fx, fy) = (x as f64, y as f64);
                for (d, mid) in [
                    ((1, 0), (fx + 1.0, fy + 0.5)),
                    ((-1, 0), (fx, fy + 0.5)),
                    ((0, 1), (fx + 0.5, fy + 1.0)),
                    ((0, -1), (fx + 0.5, fy)),
                ] {
                    let open = self.neighbor(x, y, d).is_none_or(|(nx, ny)| !self.get(nx, ny));
                    if open {
                        pts.push(mid);
                    }
                }
            }
        }
        pts
    }
}

/// Exact Euclidean distance from each foreground pixel to the nearest
/// background pixel; zero on background. Returns `None` when the mask has
/// no background pixel at all.
pub fn distance_transform(mask: &SegmentationMask) -> Option<Vec<f64>> {
    let (w, h) = (mask.width(), mask.height());
    if !mask.data().iter().any(|&v| !v) {
        return None;
    }
    let inf = 1e20;
    let mut grid: Vec<f64> = mask.data().iter().map(|&v| if v { inf } else { 0.0 }).collect();

    let mut f = vec![0.0; w.max(h)];
    let mut out = vec![0.0; w.max(h)];
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        squared_edt_1d(&f[..h], &mut out[..h]);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        squared_edt_1d(&f[..w], &mut out[..w]);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    Some(grid.into_iter().map(f64::sqrt).collect())
}

/// Lower envelope of parabolas (Felzenszwalb–Huttenlocher).
fn squared_edt_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let sect = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    for q in 1..n {
        let mut s = sect(q, v[k]);
        // z[0] is -inf, so k never underflows.
        while s <= z[k] {
            k -= 1;
            s = sect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        *dq = (q as f64 - p as f64).powi(2) + f[p];
    }
}
