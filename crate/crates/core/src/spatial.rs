//! Uniform grid over ℝᵈ for fixed-radius neighbour queries.

use std::collections::HashMap;

use crate::pointcloud::PointCloud;

pub struct GridIndex<'a> {
    cloud: &'a PointCloud,
    cell: f64,
    cells: HashMap<Vec<i64>, Vec<u32>>,
}

impl<'a> GridIndex<'a> {
    pub fn new(cloud: &'a PointCloud, cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell size must be positive");
        let mut cells: HashMap<Vec<i64>, Vec<u32>> = HashMap::new();
        for (i, p) in cloud.iter().enumerate() {
            cells.entry(key(p, cell)).or_default().push(i as u32);
        }
        GridIndex { cloud, cell, cells }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Calls `f(j, squared_distance)` for every point within `radius` of `q`.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, q: &[f64], radius: f64, mut f: F) {
        let r2 = radius * radius;
        let reach = (radius / self.cell).ceil() as i64;
        let dim = q.len();
        let cells_to_visit = ((2 * reach + 1) as f64).powi(dim as i32);
        let center = key(q, self.cell);
        if cells_to_visit > self.cells.len() as f64 {
            // fewer occupied cells than cells in the search window
            for (cell, members) in &self.cells {
                if cell.iter().zip(&center).any(|(a, b)| (a - b).abs() > reach) {
                    continue;
                }
                for &j in members {
                    let d2 = crate::geometry::squared_distance(q, self.cloud.point(j as usize));
                    if d2 <= r2 {
                        f(j as usize, d2);
                    }
                }
            }
            return;
        }
        let mut offset = vec![-reach; dim];
        let mut probe = center.clone();
        loop {
            for k in 0..dim {
                probe[k] = center[k] + offset[k];
            }
            if let Some(members) = self.cells.get(&probe) {
                for &j in members {
                    let d2 = crate::geometry::squared_distance(q, self.cloud.point(j as usize));
                    if d2 <= r2 {
                        f(j as usize, d2);
                    }
                }
            }
            // odometer over the (2·reach+1)^d neighbouring cells
            let mut k = 0;
            loop {
                if k == dim {
                    return;
                }
                offset[k] += 1;
                if offset[k] > reach {
                    offset[k] = -reach;
                    k += 1;
                } else {
                    break;
                }
            }
        }
    }

    /// Indices of the `k` nearest other points of point `i`, searching out to `max_radius`.
    pub fn nearest(&self, i: usize, k: usize, max_radius: f64) -> Vec<usize> {
        let q = self.cloud.point(i);
        let mut radius = self.cell;
        loop {
            let mut found: Vec<(f64, usize)> = Vec::new();
            self.for_each_within(q, radius, |j, d2| {
                if j != i {
                    found.push((d2, j));
                }
            });
            if found.len() >= k || radius >= max_radius {
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                return found.into_iter().take(k).map(|(_, j)| j).collect();
            }
            radius *= 2.0;
        }
    }
}

fn key(p: &[f64], cell: f64) -> Vec<i64> {
    p.iter().map(|x| (x / cell).floor() as i64).collect()
}
