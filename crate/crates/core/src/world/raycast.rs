//! Grid traversal (Amanatides–Woo) and ray/disc intersection.

use super::{Cell, Vec2, WorldMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Material {
    Wall,
    Furniture,
    Pedestrian,
}

/// Which cell face a ray entered through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    /// A face of constant x; `sign` is the outward normal's x sign.
    X { sign: i8 },
    /// A face of constant y.
    Y { sign: i8 },
    /// Curved pedestrian surface, or a ray starting inside an obstacle.
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub material: Material,
    pub face: Face,
    /// Cosine between the ray and the surface normal, in `[0, 1]`.
    pub incidence_cos: f64,
    /// Bottom-up cell indices of the struck cell (meaningless for pedestrians).
    pub cell: (i64, i64),
}

/// First occupied cell along the ray within `max_range`.
pub fn cast_static(world: &WorldMap, origin: Vec2, angle: f64, max_range: f64) -> Option<Hit> {
    let cs = world.cell_size;
    let (dx, dy) = (libm::cos(angle), libm::sin(angle));
    let (mut ix, mut iy) = world.cell_index(origin);
    let material = |c: Cell| if c == Cell::Furniture { Material::Furniture } else { Material::Wall };

    let start = world.grid.at_xy_index(ix, iy);
    if start.is_occupied() {
        return Some(Hit {
            distance: 0.0,
            material: material(start),
            face: Face::Other,
            incidence_cos: 1.0,
            cell: (ix, iy),
        });
    }

    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    let inf = f64::INFINITY;
    let (mut t_max_x, t_delta_x) = if dx == 0.0 {
        (inf, inf)
    } else {
        let edge = if dx > 0.0 { (ix + 1) as f64 * cs } else { ix as f64 * cs };
        ((edge - origin.x) / dx, cs / libm::fabs(dx))
    };
    let (mut t_max_y, t_delta_y) = if dy == 0.0 {
        (inf, inf)
    } else {
        let edge = if dy > 0.0 { (iy + 1) as f64 * cs } else { iy as f64 * cs };
        ((edge - origin.y) / dy, cs / libm::fabs(dy))
    };

    loop {
        let (t, face, cos) = if t_max_x < t_max_y {
            let t = t_max_x;
            ix += step_x;
            t_max_x += t_delta_x;
            (t, Face::X { sign: -step_x as i8 }, libm::fabs(dx))
        } else {
            let t = t_max_y;
            iy += step_y;
            t_max_y += t_delta_y;
            (t, Face::Y { sign: -step_y as i8 }, libm::fabs(dy))
        };
        if t > max_range {
            return None;
        }
        let c = world.grid.at_xy_index(ix, iy);
        if c.is_occupied() {
            return Some(Hit {
                distance: t.max(0.0),
                material: material(c),
                face,
                incidence_cos: cos,
                cell: (ix, iy),
            });
        }
    }
}

/// Nearest positive intersection of a ray with a disc.
pub fn ray_disc(origin: Vec2, angle: f64, center: Vec2, radius: f64) -> Option<f64> {
    let (dx, dy) = (libm::cos(angle), libm::sin(angle));
    let (ox, oy) = (origin.x - center.x, origin.y - center.y);
    let b = ox * dx + oy * dy;
    let c = ox * ox + oy * oy - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - libm::sqrt(disc);
    (t >= 0.0).then_some(t)
}

/// Nearest hit against the grid and every pedestrian.
pub fn cast(world: &WorldMap, origin: Vec2, angle: f64, max_range: f64) -> Option<Hit> {
    let mut best = cast_static(world, origin, angle, max_range);
    for p in &world.pedestrians {
        if let Some(t) = ray_disc(origin, angle, p.position, p.spec.radius) {
            if t <= max_range && best.is_none_or(|h| t < h.distance) {
                let hx = origin.x + t * libm::cos(angle) - p.position.x;
                let hy = origin.y + t * libm::sin(angle) - p.position.y;
                let cos = libm::fabs(hx * libm::cos(angle) + hy * libm::sin(angle)) / p.spec.radius;
                best = Some(Hit {
                    distance: t,
                    material: Material::Pedestrian,
                    face: Face::Other,
                    incidence_cos: cos.min(1.0),
                    cell: (0, 0),
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Grid, Pose};
    use alloc::vec::Vec;
    use core::f64::consts::PI;

    fn boxed(n: usize, cs: f64) -> WorldMap {
        let mut g = Grid::filled(n, n, Cell::Free);
        for i in 0..n {
            g.set(0, i, Cell::Wall);
            g.set(n - 1, i, Cell::Wall);
            g.set(i, 0, Cell::Wall);
            g.set(i, n - 1, Cell::Wall);
        }
        let c = n as f64 * cs / 2.0;
        WorldMap::new("box", g, cs, Pose::new(c, c, 0.0), Vec::new(), Vec::new()).unwrap()
    }

    /// Marches in tiny steps until the point enters an occupied cell.
    fn march(world: &WorldMap, o: Vec2, a: f64) -> f64 {
        let h = 1e-5;
        let mut t = 0.0;
        while t < 50.0 {
            let p = Vec2::new(o.x + t * libm::cos(a), o.y + t * libm::sin(a));
            if world.cell_at(p).is_occupied() {
                return t;
            }
            t += h;
        }
        f64::INFINITY
    }

    #[test]
    fn axis_aligned_distances() {
        let w = boxed(10, 1.0);
        let o = Vec2::new(5.0, 5.0);
        assert_eq!(cast_static(&w, o, 0.0, 100.0).unwrap().distance, 4.0);
        assert!((cast_static(&w, o, PI / 2.0, 100.0).unwrap().distance - 4.0).abs() < 1e-12);
        assert!((cast_static(&w, o, -PI, 100.0).unwrap().distance - 4.0).abs() < 1e-12);
        let h = cast_static(&w, o, 0.0, 100.0).unwrap();
        assert_eq!(h.face, Face::X { sign: -1 });
        assert!((h.incidence_cos - 1.0).abs() < 1e-12);
        assert!(cast_static(&w, o, 0.0, 3.9).is_none());
    }

    #[test]
    fn matches_marching_oracle() {
        let mut w = boxed(12, 0.5);
        w.grid.set(4, 7, Cell::Furniture);
        w.grid.set(8, 3, Cell::Furniture);
        let o = Vec2::new(2.61, 3.17);
        for k in 0..72 {
            let a = -PI + k as f64 * PI / 36.0 + 0.013;
            let d = cast_static(&w, o, a, 100.0).unwrap().distance;
            assert!((d - march(&w, o, a)).abs() < 2e-5, "angle {a}");
        }
    }

    #[test]
    fn disc_intersection() {
        let t = ray_disc(Vec2::new(0.0, 0.0), 0.0, Vec2::new(3.0, 0.0), 0.5).unwrap();
        assert!((t - 2.5).abs() < 1e-12);
        assert!(ray_disc(Vec2::new(0.0, 0.0), PI, Vec2::new(3.0, 0.0), 0.5).is_none());
        assert!(ray_disc(Vec2::new(0.0, 0.0), 0.0, Vec2::new(3.0, 1.0), 0.5).is_none());
    }
}
