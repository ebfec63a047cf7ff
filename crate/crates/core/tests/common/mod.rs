//! Reference implementations used as test oracles. Each one takes a
//! different route from the library code it checks.

#![allow(dead_code)]

use std::collections::VecDeque;

/// Diagonal zigzag by sorting cells on `(i + j, ±i)`.
pub fn diagonal_by_sort(h: usize, w: usize) -> Vec<i64> {
    let mut cells: Vec<(usize, usize)> = (0..h).flat_map(|i| (0..w).map(move |j| (i, j))).collect();
    cells.sort_by_key(|&(i, j)| {
        let s = i + j;
        let tie = if s % 2 == 0 { i as i64 } else { -(i as i64) };
        (s, tie)
    });
    cells.into_iter().map(|(i, j)| (i * w + j) as i64).collect()
}

/// Anti-diagonal zigzag by sorting cells on `(i + (W-1-j), ±i)`.
pub fn antidiagonal_by_sort(h: usize, w: usize) -> Vec<i64> {
    let mut cells: Vec<(usize, usize)> = (0..h).flat_map(|i| (0..w).map(move |j| (i, j))).collect();
    cells.sort_by_key(|&(i, j)| {
        let s = i + (w - 1 - j);
        let tie = if s % 2 == 0 { i as i64 } else { -(i as i64) };
        (s, tie)
    });
    cells.into_iter().map(|(i, j)| (i * w + j) as i64).collect()
}

/// `y_k = sum_{j<=k} C Abar^{k-j} Bbar x_j + D x_k`, evaluated directly.
pub fn unrolled_ssm(x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: f64, delta: f64) -> Vec<f64> {
    let abar: Vec<f64> = a.iter().map(|&an| (delta * an).exp()).collect();
    let bbar: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&an, &bn)| ((delta * an).exp() - 1.0) / an * bn)
        .collect();
    (0..x.len())
        .map(|k| {
            let mut y = d * x[k];
            for (j, &xj) in x.iter().enumerate().take(k + 1) {
                for n in 0..a.len() {
                    y += c[n] * abar[n].powi((k - j) as i32) * bbar[n] * xj;
                }
            }
            y
        })
        .collect()
}

type Mat = Vec<Vec<f64>>;

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let m = b[0].len();
    let inner = b.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..inner).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// `Tr(Kc H Kt H) / (C - 1)^2` with an explicit centering matrix.
pub fn hsic_trace_form(kc: &Mat, kt: &Mat) -> f64 {
    let c = kc.len();
    let h: Mat = (0..c)
        .map(|i| {
            (0..c)
                .map(|j| if i == j { 1.0 } else { 0.0 } - 1.0 / c as f64)
                .collect()
        })
        .collect();
    let prod = matmul(&matmul(&matmul(kc, &h), kt), &h);
    let trace: f64 = (0..c).map(|i| prod[i][i]).sum();
    trace / ((c - 1) * (c - 1)) as f64
}

fn flood(grid: &[bool], h: usize, w: usize, seen: &mut [bool], start: usize, value: bool, eight: bool) {
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(p) = stack.pop() {
        let (r, c) = ((p / w) as i64, (p % w) as i64);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if (dr == 0 && dc == 0) || (!eight && dr != 0 && dc != 0) {
                    continue;
                }
                let (rr, cc) = (r + dr, c + dc);
                if rr < 0 || cc < 0 || rr >= h as i64 || cc >= w as i64 {
                    continue;
                }
                let q = rr as usize * w + cc as usize;
                if !seen[q] && grid[q] == value {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
    }
}

/// 8-connected foreground components by flood fill.
pub fn components_by_flood(grid: &[bool], h: usize, w: usize) -> usize {
    let mut seen = vec![false; h * w];
    let mut count = 0;
    for p in 0..h * w {
        if grid[p] && !seen[p] {
            flood(grid, h, w, &mut seen, p, true, true);
            count += 1;
        }
    }
    count
}

/// Floods the background from the border (4-connected), then counts the
/// remaining background components.
pub fn holes_by_border_flood(grid: &[bool], h: usize, w: usize) -> usize {
    let mut seen = vec![false; h * w];
    for p in 0..h * w {
        let (r, c) = (p / w, p % w);
        let border = r == 0 || c == 0 || r + 1 == h || c + 1 == w;
        if border && !grid[p] && !seen[p] {
            flood(grid, h, w, &mut seen, p, false, false);
        }
    }
    let mut count = 0;
    for p in 0..h * w {
        if !grid[p] && !seen[p] {
            flood(grid, h, w, &mut seen, p, false, false);
            count += 1;
        }
    }
    count
}

/// Euler characteristic `V - E + F` of the union of closed foreground pixels.
pub fn euler_by_cells(grid: &[bool], h: usize, w: usize) -> i64 {
    let fg = |r: i64, c: i64| {
        r >= 0 && c >= 0 && r < h as i64 && c < w as i64 && grid[r as usize * w + c as usize]
    };
    let faces = grid.iter().filter(|&&v| v).count() as i64;
    let mut vertices = 0i64;
    for r in 0..=h as i64 {
        for c in 0..=w as i64 {
            if fg(r - 1, c - 1) || fg(r - 1, c) || fg(r, c - 1) || fg(r, c) {
                vertices += 1;
            }
        }
    }
    let mut edges = 0i64;
    // horizontal edges between rows r-1 and r, spanning column c
    for r in 0..=h as i64 {
        for c in 0..w as i64 {
            if fg(r - 1, c) || fg(r, c) {
                edges += 1;
            }
        }
    }
    for r in 0..h as i64 {
        for c in 0..=w as i64 {
            if fg(r, c - 1) || fg(r, c) {
                edges += 1;
            }
        }
    }
    vertices - edges + faces
}

/// True if two foreground pixels touch only at a corner somewhere.
pub fn has_diagonal_only_contact(grid: &[bool], h: usize, w: usize) -> bool {
    for r in 0..h.saturating_sub(1) {
        for c in 0..w.saturating_sub(1) {
            let a = grid[r * w + c];
            let b = grid[r * w + c + 1];
            let d = grid[(r + 1) * w + c];
            let e = grid[(r + 1) * w + c + 1];
            if (a && e && !b && !d) || (b && d && !a && !e) {
                return true;
            }
        }
    }
    false
}

/// Textbook LRU over a recency queue (front = least recent).
pub struct ReferenceLru<K: PartialEq + Clone> {
    capacity: usize,
    order: VecDeque<K>,
}

impl<K: PartialEq + Clone> ReferenceLru<K> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            order: VecDeque::new(),
        }
    }

    /// Returns `(hit, evicted)`.
    pub fn access(&mut self, key: &K) -> (bool, Option<K>) {
        if let Some(pos) = self.order.iter().position(|k| k == key) {
            let k = self.order.remove(pos).unwrap();
            self.order.push_back(k);
            return (true, None);
        }
        self.order.push_back(key.clone());
        let evicted = if self.order.len() > self.capacity {
            self.order.pop_front()
        } else {
            None
        };
        (false, evicted)
    }
}

/// Relative closeness scaled by `max(|expected|, floor)`.
pub fn rel_close(actual: f64, expected: f64, tol: f64, floor: f64) -> bool {
    (actual - expected).abs() <= tol * expected.abs().max(floor)
}
