use crate::geometry::Vec3;

const LEAF_SIZE: usize = 8;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Static kd-tree answering exact nearest-point queries. Ties go to the
/// lowest point index, matching a linear scan with strict `<`.
pub struct KdTree<'a> {
    points: &'a [Vec3],
    order: Vec<usize>,
    root: Node,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Vec3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = build(points, &mut order, 0);
        KdTree { points, order, root }
    }

    /// Index of the nearest point, or `None` for an empty set.
    pub fn nearest(&self, query: &Vec3) -> Option<usize> {
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(&self.root, query, &mut best);
        (best.1 != usize::MAX).then_some(best.1)
    }

    fn search(&self, node: &Node, q: &Vec3, best: &mut (f64, usize)) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let d = (self.points[i] - q).norm_squared();
                    if d < best.0 || (d == best.0 && i < best.1) {
                        *best = (d, i);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let delta = q[*axis] - value;
                let (near, far) = if delta <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if delta * delta <= best.0 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build(points: &[Vec3], order: &mut [usize], offset: usize) -> Node {
    if order.len() <= LEAF_SIZE {
        return Node::Leaf { start: offset, end: offset + order.len() };
    }
    let (lo, hi) = order.iter().fold(
        (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), &i| (lo.inf(&points[i]), hi.sup(&points[i])),
    );
    let axis = (hi - lo).imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[order[mid]][axis];
    let (left, right) = order.split_at_mut(mid);
    Node::Split {
        axis,
        value,
        left: Box::new(build(points, left, offset)),
        right: Box::new(build(points, right, offset + mid)),
    }
}
