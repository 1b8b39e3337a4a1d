use nalgebra::Vector3;

const LEAF_SIZE: usize = 4;
const BOX_PAD: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Aabb {
    pub lo: Vector3<f64>,
    pub hi: Vector3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: Vector3::repeat(f64::INFINITY),
            hi: Vector3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vector3<f64>) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_sq(&self, p: &Vector3<f64>) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.lo[i] {
                self.lo[i] - p[i]
            } else if p[i] > self.hi[i] {
                p[i] - self.hi[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Slab test; entry distance along the ray if it meets the box within `t_max`.
    pub fn ray_entry(&self, origin: &Vector3<f64>, inv_dir: &Vector3<f64>, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for i in 0..3 {
            if !inv_dir[i].is_finite() {
                // Ray parallel to this slab.
                if origin[i] < self.lo[i] || origin[i] > self.hi[i] {
                    return None;
                }
                continue;
            }
            let a = (self.lo[i] - origin[i]) * inv_dir[i];
            let b = (self.hi[i] - origin[i]) * inv_dir[i];
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { bounds: Aabb, start: usize, len: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

/// Bounding-volume hierarchy over triangle ids, median split on the longest centroid axis.
#[derive(Clone, Debug)]
pub(crate) struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

pub(crate) enum Visit {
    Leaf(std::ops::Range<usize>),
    Children(usize, usize),
}

impl Bvh {
    pub fn build(vertices: &[Vector3<f64>], triangles: &[[usize; 3]]) -> Self {
        let centroids: Vec<Vector3<f64>> = triangles
            .iter()
            .map(|t| (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0)
            .collect();
        let boxes: Vec<Aabb> = triangles
            .iter()
            .map(|t| {
                let mut b = Aabb::empty();
                for &i in t {
                    b.grow(&vertices[i]);
                }
                // Padding keeps grazing hits that the exact triangle test accepts.
                b.lo.add_scalar_mut(-BOX_PAD);
                b.hi.add_scalar_mut(BOX_PAD);
                b
            })
            .collect();
        let mut bvh = Self {
            nodes: Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1),
            order: (0..triangles.len()).collect(),
        };
        bvh.split(0, triangles.len(), &centroids, &boxes);
        bvh
    }

    fn split(&mut self, start: usize, end: usize, centroids: &[Vector3<f64>], boxes: &[Aabb]) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbox = Aabb::empty();
        for &t in &self.order[start..end] {
            bounds.grow(&boxes[t].lo);
            bounds.grow(&boxes[t].hi);
            cbox.grow(&centroids[t]);
        }
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                bounds,
                start,
                len: end - start,
            });
            return id;
        }
        let extent = cbox.hi - cbox.lo;
        let axis = extent.imax();
        self.order[start..end].sort_by(|&a, &b| {
            centroids[a][axis]
                .total_cmp(&centroids[b][axis])
                .then(a.cmp(&b))
        });
        let mid = (start + end) / 2;
        self.nodes.push(Node::Leaf {
            bounds,
            start,
            len: 0,
        });
        let left = self.split(start, mid, centroids, boxes);
        let right = self.split(mid, end, centroids, boxes);
        self.nodes[id] = Node::Inner {
            bounds,
            left,
            right,
        };
        id
    }

    pub fn bounds(&self, node: usize) -> &Aabb {
        match &self.nodes[node] {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }

    pub fn visit(&self, node: usize) -> Visit {
        match self.nodes[node] {
            Node::Leaf { start, len, .. } => Visit::Leaf(start..start + len),
            Node::Inner { left, right, .. } => Visit::Children(left, right),
        }
    }

    /// Triangle id at a position of the leaf ordering.
    pub fn triangle_at(&self, slot: usize) -> usize {
        self.order[slot]
    }
}
