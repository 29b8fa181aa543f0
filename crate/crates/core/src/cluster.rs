//! Exact single-linkage components, cluster diameters and inter-cluster gaps on
//! a kd-tree. Every quantity equals its all-pairs definition; the tree only
//! prunes node pairs whose bounding boxes already decide the answer.

use crate::pointcloud::PointCloud;

const LEAF_SIZE: usize = 16;
const NONE: u32 = u32::MAX;

struct Node {
    lo: usize,
    hi: usize,
    left: u32,
    right: u32,
}

pub struct KdTree {
    dim: usize,
    /// Points in tree order.
    pts: Vec<f64>,
    /// `order[k]` is the original index of the k-th point in tree order.
    order: Vec<u32>,
    nodes: Vec<Node>,
    /// `2 · dim` values per node: mins then maxes.
    boxes: Vec<f64>,
}

impl KdTree {
    pub fn new(cloud: &PointCloud) -> Self {
        Self::from_cloud(cloud.clone())
    }

    /// Builds the tree in the cloud's own storage, so no second copy is held.
    pub fn from_cloud(cloud: PointCloud) -> Self {
        let dim = cloud.dim();
        let n = cloud.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut tree = KdTree {
            dim,
            pts: Vec::new(),
            order: Vec::new(),
            nodes: Vec::new(),
            boxes: Vec::new(),
        };
        if n > 0 {
            tree.build(&cloud, &mut order, 0, n);
        }
        let mut pts = cloud.into_flat();
        gather_in_place(&mut pts, dim, &order);
        tree.pts = pts;
        tree.order = order;
        tree
    }

    fn build(&mut self, cloud: &PointCloud, order: &mut [u32], lo: usize, hi: usize) -> u32 {
        let d = self.dim;
        let id = self.nodes.len() as u32;
        let mut bmin = vec![f64::INFINITY; d];
        let mut bmax = vec![f64::NEG_INFINITY; d];
        for &i in &order[lo..hi] {
            for (k, &x) in cloud.point(i as usize).iter().enumerate() {
                bmin[k] = bmin[k].min(x);
                bmax[k] = bmax[k].max(x);
            }
        }
        self.nodes.push(Node { lo, hi, left: NONE, right: NONE });
        self.boxes.extend_from_slice(&bmin);
        self.boxes.extend_from_slice(&bmax);
        if hi - lo <= LEAF_SIZE {
            return id;
        }
        let axis = (0..d)
            .max_by(|&a, &b| (bmax[a] - bmin[a]).total_cmp(&(bmax[b] - bmin[b])))
            .unwrap_or(0);
        if bmax[axis] == bmin[axis] {
            // all points coincide
            return id;
        }
        let mid = (lo + hi) / 2;
        order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            cloud.point(a as usize)[axis]
                .total_cmp(&cloud.point(b as usize)[axis])
                .then(a.cmp(&b))
        });
        let left = self.build(cloud, order, lo, mid);
        let right = self.build(cloud, order, mid, hi);
        self.nodes[id as usize].left = left;
        self.nodes[id as usize].right = right;
        id
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    #[inline]
    fn point(&self, k: usize) -> &[f64] {
        &self.pts[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    fn bbox(&self, node: u32) -> (&[f64], &[f64]) {
        let b = &self.boxes[node as usize * 2 * self.dim..(node as usize + 1) * 2 * self.dim];
        b.split_at(self.dim)
    }

    #[inline]
    fn is_leaf(&self, node: u32) -> bool {
        self.nodes[node as usize].left == NONE
    }

    /// Squared extent of a node's box.
    fn diag2(&self, node: u32) -> f64 {
        let (lo, hi) = self.bbox(node);
        lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a)).sum()
    }

    fn min_dist2(&self, a: u32, b: u32) -> f64 {
        let (alo, ahi) = self.bbox(a);
        let (blo, bhi) = self.bbox(b);
        let mut s = 0.0;
        for k in 0..self.dim {
            let g = (blo[k] - ahi[k]).max(alo[k] - bhi[k]).max(0.0);
            s += g * g;
        }
        s
    }

    fn max_dist2(&self, a: u32, b: u32) -> f64 {
        let (alo, ahi) = self.bbox(a);
        let (blo, bhi) = self.bbox(b);
        let mut s = 0.0;
        for k in 0..self.dim {
            let g = (bhi[k] - alo[k]).max(ahi[k] - blo[k]);
            s += g * g;
        }
        s
    }

    fn dist2(&self, i: usize, j: usize) -> f64 {
        crate::geometry::squared_distance(self.point(i), self.point(j))
    }

    /// Splits whichever of `a`, `b` is larger (and not a leaf).
    fn split_pair(&self, a: u32, b: u32) -> Option<[(u32, u32); 2]> {
        let a_leaf = self.is_leaf(a);
        let b_leaf = self.is_leaf(b);
        if a_leaf && b_leaf {
            return None;
        }
        let split_a = !a_leaf && (b_leaf || self.diag2(a) >= self.diag2(b));
        Some(if split_a {
            let n = &self.nodes[a as usize];
            [(n.left, b), (n.right, b)]
        } else {
            let n = &self.nodes[b as usize];
            [(a, n.left), (a, n.right)]
        })
    }
}

/// Rearranges `dim`-blocks so that block `k` becomes old block `order[k]`,
/// following the permutation's cycles.
fn gather_in_place(data: &mut [f64], dim: usize, order: &[u32]) {
    let mut done = vec![false; order.len()];
    let mut saved = vec![0.0; dim];
    for start in 0..order.len() {
        if done[start] {
            continue;
        }
        saved.copy_from_slice(&data[start * dim..(start + 1) * dim]);
        let mut k = start;
        loop {
            done[k] = true;
            let src = order[k] as usize;
            if src == start {
                data[k * dim..(k + 1) * dim].copy_from_slice(&saved);
                break;
            }
            data.copy_within(src * dim..(src + 1) * dim, k * dim);
            k = src;
        }
    }
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (ka, kb) = (self.rank[ra as usize], self.rank[rb as usize]);
        if ka < kb {
            self.parent[ra as usize] = rb;
        } else {
            self.parent[rb as usize] = ra;
            if ka == kb {
                self.rank[ra as usize] += 1;
            }
        }
    }
}

/// Connected components of the graph joining points at distance `≤ threshold`,
/// as lists of original indices. Each list is sorted and the lists are ordered
/// by their smallest member.
pub fn components(tree: &KdTree, threshold: f64) -> Vec<Vec<usize>> {
    let n = tree.len();
    if n == 0 {
        return Vec::new();
    }
    let h2 = threshold * threshold;
    let mut uf = UnionFind::new(n);
    // nodes whose box fits inside the threshold are internally connected
    let mut whole = vec![false; tree.nodes.len()];
    let mut stack = vec![0u32];
    while let Some(v) = stack.pop() {
        if tree.diag2(v) <= h2 {
            whole[v as usize] = true;
            let node = &tree.nodes[v as usize];
            for k in node.lo + 1..node.hi {
                uf.union(node.lo as u32, k as u32);
            }
            mark_subtree(tree, v, &mut whole);
        } else if !tree.is_leaf(v) {
            let node = &tree.nodes[v as usize];
            stack.push(node.right);
            stack.push(node.left);
        }
    }

    let mut pairs = vec![(0u32, 0u32)];
    while let Some((a, b)) = pairs.pop() {
        if a == b {
            if whole[a as usize] {
                continue;
            }
            if tree.is_leaf(a) {
                let node = &tree.nodes[a as usize];
                for i in node.lo..node.hi {
                    for j in i + 1..node.hi {
                        if tree.dist2(i, j) <= h2 {
                            uf.union(i as u32, j as u32);
                        }
                    }
                }
            } else {
                let node = &tree.nodes[a as usize];
                pairs.push((node.left, node.right));
                pairs.push((node.right, node.right));
                pairs.push((node.left, node.left));
            }
            continue;
        }
        if tree.min_dist2(a, b) > h2 {
            continue;
        }
        let (na, nb) = (&tree.nodes[a as usize], &tree.nodes[b as usize]);
        let (ra, rb) = (na.lo as u32, nb.lo as u32);
        if whole[a as usize] && whole[b as usize] {
            if uf.find(ra) == uf.find(rb) {
                continue;
            }
            if tree.max_dist2(a, b) <= h2 {
                uf.union(ra, rb);
                continue;
            }
        }
        match tree.split_pair(a, b) {
            Some(children) => pairs.extend(children),
            None => {
                for i in na.lo..na.hi {
                    for j in nb.lo..nb.hi {
                        if tree.dist2(i, j) <= h2 {
                            uf.union(i as u32, j as u32);
                        }
                    }
                }
            }
        }
    }

    let mut by_root: std::collections::HashMap<u32, Vec<usize>> = std::collections::HashMap::new();
    for k in 0..n {
        let r = uf.find(k as u32);
        by_root.entry(r).or_default().push(tree.order[k] as usize);
    }
    let mut out: Vec<Vec<usize>> = by_root.into_values().collect();
    for c in &mut out {
        c.sort_unstable();
    }
    out.sort_unstable_by_key(|c| c[0]);
    out
}

fn mark_subtree(tree: &KdTree, v: u32, whole: &mut [bool]) {
    if tree.is_leaf(v) {
        return;
    }
    let node = &tree.nodes[v as usize];
    for c in [node.left, node.right] {
        whole[c as usize] = true;
        mark_subtree(tree, c, whole);
    }
}

/// Per-node label: the common cluster of all its points, if there is one.
fn node_labels(tree: &KdTree, label_of: &[u32]) -> Vec<u32> {
    let mut labels = vec![NONE; tree.nodes.len()];
    // children are always created after their parent
    for v in (0..tree.nodes.len()).rev() {
        let node = &tree.nodes[v];
        labels[v] = if node.left == NONE {
            let first = label_of[node.lo];
            if (node.lo..node.hi).all(|k| label_of[k] == first) {
                first
            } else {
                NONE
            }
        } else {
            let (l, r) = (labels[node.left as usize], labels[node.right as usize]);
            if l == r {
                l
            } else {
                NONE
            }
        };
    }
    labels
}

/// Cluster index of each point in tree order.
fn tree_labels(tree: &KdTree, clusters: &[Vec<usize>]) -> Vec<u32> {
    let mut by_original = vec![0u32; tree.len()];
    for (c, members) in clusters.iter().enumerate() {
        for &i in members {
            by_original[i] = c as u32;
        }
    }
    tree.order.iter().map(|&i| by_original[i as usize]).collect()
}

/// Largest pairwise distance inside each cluster.
pub fn diameters(tree: &KdTree, clusters: &[Vec<usize>]) -> Vec<f64> {
    if clusters.is_empty() {
        return Vec::new();
    }
    let label_of = tree_labels(tree, clusters);
    let labels = node_labels(tree, &label_of);
    let mut best2 = vec![0.0f64; clusters.len()];
    seed_diameters(tree, &label_of, &mut best2);

    let mut pairs = vec![(0u32, 0u32)];
    while let Some((a, b)) = pairs.pop() {
        let (la, lb) = (labels[a as usize], labels[b as usize]);
        if la != NONE && lb != NONE {
            if la != lb || tree.max_dist2(a, b) <= best2[la as usize] {
                continue;
            }
        }
        if a == b {
            if tree.is_leaf(a) {
                let node = &tree.nodes[a as usize];
                for i in node.lo..node.hi {
                    for j in i + 1..node.hi {
                        let c = label_of[i];
                        if c == label_of[j] {
                            let d = tree.dist2(i, j);
                            if d > best2[c as usize] {
                                best2[c as usize] = d;
                            }
                        }
                    }
                }
            } else {
                let node = &tree.nodes[a as usize];
                pairs.push((node.left, node.right));
                pairs.push((node.right, node.right));
                pairs.push((node.left, node.left));
            }
            continue;
        }
        if la == NONE || lb == NONE {
            // the bound must hold for every label present; use the smallest
            let floor = best2.iter().copied().fold(f64::INFINITY, f64::min);
            if tree.max_dist2(a, b) <= floor {
                continue;
            }
        }
        match tree.split_pair(a, b) {
            Some(children) => pairs.extend(children),
            None => {
                let (na, nb) = (&tree.nodes[a as usize], &tree.nodes[b as usize]);
                for i in na.lo..na.hi {
                    for j in nb.lo..nb.hi {
                        let c = label_of[i];
                        if c == label_of[j] {
                            let d = tree.dist2(i, j);
                            if d > best2[c as usize] {
                                best2[c as usize] = d;
                            }
                        }
                    }
                }
            }
        }
    }
    best2.into_iter().map(f64::sqrt).collect()
}

/// Lower bounds on the squared diameters from a few farthest-point sweeps.
fn seed_diameters(tree: &KdTree, label_of: &[u32], best2: &mut [f64]) {
    let k = best2.len();
    let mut start: Vec<usize> = vec![usize::MAX; k];
    for (i, &c) in label_of.iter().enumerate() {
        if start[c as usize] == usize::MAX {
            start[c as usize] = i;
        }
    }
    for _ in 0..3 {
        let mut far = start.clone();
        let mut far2 = vec![0.0f64; k];
        for (i, &c) in label_of.iter().enumerate() {
            let d = tree.dist2(i, start[c as usize]);
            if d > far2[c as usize] {
                far2[c as usize] = d;
                far[c as usize] = i;
            }
        }
        for c in 0..k {
            best2[c] = best2[c].max(far2[c]);
        }
        start = far;
    }
}

/// Smallest distance between points of different clusters; infinite with fewer than two.
pub fn min_gap(tree: &KdTree, clusters: &[Vec<usize>]) -> f64 {
    if clusters.len() < 2 {
        return f64::INFINITY;
    }
    let label_of = tree_labels(tree, clusters);
    let labels = node_labels(tree, &label_of);
    let mut best2 = f64::INFINITY;
    let mut pairs = vec![(0u32, 0u32)];
    while let Some((a, b)) = pairs.pop() {
        let (la, lb) = (labels[a as usize], labels[b as usize]);
        if la != NONE && la == lb {
            continue;
        }
        if a != b && tree.min_dist2(a, b) >= best2 {
            continue;
        }
        if a == b {
            if tree.is_leaf(a) {
                let node = &tree.nodes[a as usize];
                for i in node.lo..node.hi {
                    for j in i + 1..node.hi {
                        if label_of[i] != label_of[j] {
                            best2 = best2.min(tree.dist2(i, j));
                        }
                    }
                }
            } else {
                let node = &tree.nodes[a as usize];
                pairs.push((node.left, node.right));
                pairs.push((node.right, node.right));
                pairs.push((node.left, node.left));
            }
            continue;
        }
        match tree.split_pair(a, b) {
            Some(children) => pairs.extend(children),
            None => {
                let (na, nb) = (&tree.nodes[a as usize], &tree.nodes[b as usize]);
                for i in na.lo..na.hi {
                    for j in nb.lo..nb.hi {
                        if label_of[i] != label_of[j] {
                            best2 = best2.min(tree.dist2(i, j));
                        }
                    }
                }
            }
        }
    }
    best2.sqrt()
}
