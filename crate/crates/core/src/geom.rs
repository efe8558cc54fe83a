//! Small geometric helpers shared by the rasterizers and the mesh code.

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Vec2 = nalgebra::Vector2<f64>;

/// Twice the signed area of (a, b, p); positive when p lies left of a→b.
#[inline]
pub fn edge_function(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Fill-rule ownership for a sample lying exactly on an edge.
///
/// For a positively oriented triangle exactly one of the two directed edges
/// `d` and `-d` owns the boundary, so a sample on an edge shared by two
/// triangles is claimed by exactly one of them.
#[inline]
pub fn owns_edge(a: Vec2, b: Vec2) -> bool {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    dy > 0.0 || (dy == 0.0 && dx < 0.0)
}

/// A 2D triangle prepared for coverage tests, always positively oriented.
#[derive(Debug, Clone, Copy)]
pub struct Triangle2 {
    pts: [Vec2; 3],
    /// `order[k]` is the caller's corner index stored at slot k.
    order: [usize; 3],
    area2: f64,
}

impl Triangle2 {
    /// Returns `None` for zero-area triangles.
    pub fn new(a: Vec2, b: Vec2, c: Vec2) -> Option<Self> {
        let area2 = edge_function(a, b, c);
        if area2 == 0.0 || !area2.is_finite() {
            return None;
        }
        if area2 > 0.0 {
            Some(Self {
                pts: [a, b, c],
                order: [0, 1, 2],
                area2,
            })
        } else {
            Some(Self {
                pts: [a, c, b],
                order: [0, 2, 1],
                area2: -area2,
            })
        }
    }

    pub fn bounds(&self) -> (Vec2, Vec2) {
        let [a, b, c] = self.pts;
        (
            Vec2::new(a.x.min(b.x).min(c.x), a.y.min(b.y).min(c.y)),
            Vec2::new(a.x.max(b.x).max(c.x), a.y.max(b.y).max(c.y)),
        )
    }

    /// Barycentric weights of `p` in the caller's corner order, or `None`
    /// when the fill rule says the sample is outside.
    pub fn cover(&self, p: Vec2) -> Option<[f64; 3]> {
        let [a, b, c] = self.pts;
        let w = [edge_function(b, c, p), edge_function(c, a, p), edge_function(a, b, p)];
        let edges = [(b, c), (c, a), (a, b)];
        for (wi, (e0, e1)) in w.iter().zip(edges) {
            if *wi < 0.0 || (*wi == 0.0 && !owns_edge(e0, e1)) {
                return None;
            }
        }
        let sum = w[0] + w[1] + w[2];
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[self.order[k]] = w[k] / sum;
        }
        Some(out)
    }

    pub fn area(&self) -> f64 {
        0.5 * self.area2
    }
}

#[inline]
pub fn lerp3(bary: [f64; 3], v: [Vec3; 3]) -> Vec3 {
    v[0] * bary[0] + v[1] * bary[1] + v[2] * bary[2]
}

#[inline]
pub fn lerp2(bary: [f64; 3], v: [Vec2; 3]) -> Vec2 {
    v[0] * bary[0] + v[1] * bary[1] + v[2] * bary[2]
}

/// Barycentric coordinates of the orthogonal projection of `p` onto the
/// plane of triangle `t`, clamped onto the triangle.
pub fn barycentric_3d(p: Vec3, t: [Vec3; 3]) -> [f64; 3] {
    let e0 = t[1] - t[0];
    let e1 = t[2] - t[0];
    let d = p - t[0];
    let d00 = e0.dot(&e0);
    let d01 = e0.dot(&e1);
    let d11 = e1.dot(&e1);
    let d20 = d.dot(&e0);
    let d21 = d.dot(&e1);
    let denom = d00 * d11 - d01 * d01;
    if denom.abs() < 1e-300 {
        return [1.0, 0.0, 0.0];
    }
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    let mut b = [1.0 - v - w, v, w];
    for x in &mut b {
        *x = x.max(0.0);
    }
    let s = b[0] + b[1] + b[2];
    [b[0] / s, b[1] / s, b[2] / s]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_edge_sample_claimed_once() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(1.0, 0.0);
        let c = Vec2::new(1.0, 1.0);
        let d = Vec2::new(0.0, 1.0);
        let t0 = Triangle2::new(a, b, c).unwrap();
        let t1 = Triangle2::new(a, c, d).unwrap();
        let p = Vec2::new(0.5, 0.5);
        assert!(t0.cover(p).is_some() != t1.cover(p).is_some());
        // Reversed winding must not change ownership semantics.
        let t0r = Triangle2::new(a, c, b).unwrap();
        let t1r = Triangle2::new(a, d, c).unwrap();
        assert!(t0r.cover(p).is_some() != t1r.cover(p).is_some());
    }

    #[test]
    fn barycentrics_follow_caller_order() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(2.0, 0.0);
        let c = Vec2::new(0.0, 2.0);
        let p = Vec2::new(0.5, 0.25);
        let fwd = Triangle2::new(a, b, c).unwrap().cover(p).unwrap();
        let rev = Triangle2::new(a, c, b).unwrap().cover(p).unwrap();
        assert!((fwd[0] - rev[0]).abs() < 1e-12);
        assert!((fwd[1] - rev[2]).abs() < 1e-12);
        let q = lerp2(fwd, [a, b, c]);
        assert!((q - p).norm() < 1e-12);
    }

    #[test]
    fn zero_area_rejected() {
        let a = Vec2::new(0.0, 0.0);
        assert!(Triangle2::new(a, Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)).is_none());
    }
}
