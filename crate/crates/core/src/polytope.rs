//! Exact lattice-polytope combinatorics in dimension at most 3.
//!
//! Polytopes are built from integer vertices; facet inequalities
//! `<a, x> >= -c` with primitive integer normals are recovered by an exact
//! convex hull. Everything here is integer or rational arithmetic.

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::poly;
use crate::rational::{self, factorial, int, Rational};

pub const MAX_DIM: usize = 3;

/// Facet inequality `<normal, x> >= -offset`, normal primitive and inward.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Facet {
    pub normal: Vec<i64>,
    pub offset: i64,
}

impl Facet {
    fn slack(&self, x: &[i64]) -> i64 {
        dot(&self.normal, x) + self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticePolytope {
    dim: usize,
    vertices: Vec<Vec<i64>>,
    facets: Vec<Facet>,
    /// Vertex indices on each facet, cyclically ordered for 3-d facets.
    facet_vertices: Vec<Vec<usize>>,
}

/// JSON form: `{"vertices": [[int, ...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolytopeSpec {
    pub vertices: Vec<Vec<i64>>,
}

fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn cross(a: &[i64], b: &[i64]) -> [i64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn cross2(o: &[i64], a: &[i64], b: &[i64]) -> i64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn primitive(v: &[i64]) -> Vec<i64> {
    let g = v.iter().fold(0i64, |g, &x| g.gcd(&x));
    if g == 0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / g).collect()
    }
}

/// Counter-clockwise convex hull of planar points (monotone chain), dropping
/// collinear boundary points. Returns indices into `pts`.
fn hull_2d(pts: &[[i64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by_key(|&i| (pts[i][0], pts[i][1]));
    idx.dedup_by_key(|i| pts[*i]);
    if idx.len() < 3 {
        return idx;
    }
    let turn = |o: usize, a: usize, b: usize| cross2(&pts[o], &pts[a], &pts[b]);
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for &i in &idx {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], i) <= 0 {
            hull.pop();
        }
        hull.push(i);
    }
    let lower = hull.len() + 1;
    for &i in idx.iter().rev().skip(1) {
        while hull.len() >= lower && turn(hull[hull.len() - 2], hull[hull.len() - 1], i) <= 0 {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    hull
}

fn shoelace2(pts: &[[i64; 2]]) -> i64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum()
}

impl LatticePolytope {
    pub fn from_spec(spec: &PolytopeSpec) -> Result<Self> {
        Self::from_vertices(spec.vertices.clone())
    }

    /// Build from a point set; the polytope is its convex hull.
    pub fn from_vertices(points: Vec<Vec<i64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(|p| p.len())
            .ok_or_else(|| LabError::Invalid("polytope has no vertices".into()))?;
        if dim == 0 {
            return Err(LabError::Invalid("zero-dimensional coordinates".into()));
        }
        if dim > MAX_DIM {
            return Err(LabError::UnsupportedDimension(dim));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(LabError::Invalid("vertices of mixed dimension".into()));
        }
        const BOUND: i64 = 1 << 20;
        if points.iter().flatten().any(|c| c.abs() > BOUND) {
            return Err(LabError::Invalid(format!("coordinates exceed {BOUND}")));
        }
        let mut pts = points;
        pts.sort();
        pts.dedup();
        match dim {
            1 => Self::hull_1(pts),
            2 => Self::hull_2(pts),
            _ => Self::hull_3(pts),
        }
    }

    fn hull_1(pts: Vec<Vec<i64>>) -> Result<Self> {
        let lo = pts.first().unwrap()[0];
        let hi = pts.last().unwrap()[0];
        if lo == hi {
            return Err(LabError::Degenerate("segment has zero length".into()));
        }
        Ok(Self {
            dim: 1,
            vertices: vec![vec![lo], vec![hi]],
            facets: vec![
                Facet { normal: vec![1], offset: -lo },
                Facet { normal: vec![-1], offset: hi },
            ],
            facet_vertices: vec![vec![0], vec![1]],
        })
    }

    fn hull_2(pts: Vec<Vec<i64>>) -> Result<Self> {
        let flat: Vec<[i64; 2]> = pts.iter().map(|p| [p[0], p[1]]).collect();
        let hull = hull_2d(&flat);
        if hull.len() < 3 {
            return Err(LabError::Degenerate(
                "points are collinear; affine hull is not 2-dimensional".into(),
            ));
        }
        let vertices: Vec<Vec<i64>> = hull.iter().map(|&i| pts[i].clone()).collect();
        let m = vertices.len();
        let mut facets = Vec::with_capacity(m);
        let mut facet_vertices = Vec::with_capacity(m);
        for i in 0..m {
            let (p, q) = (&vertices[i], &vertices[(i + 1) % m]);
            // Interior lies to the left of a counter-clockwise edge.
            let normal = primitive(&[-(q[1] - p[1]), q[0] - p[0]]);
            let offset = -dot(&normal, p);
            facets.push(Facet { normal, offset });
            facet_vertices.push(vec![i, (i + 1) % m]);
        }
        Ok(Self { dim: 2, vertices, facets, facet_vertices })
    }

    fn hull_3(pts: Vec<Vec<i64>>) -> Result<Self> {
        let m = pts.len();
        // Full dimensionality: find a non-degenerate tetrahedron.
        let p0 = &pts[0];
        let mut witness = false;
        'outer: for i in 1..m {
            for j in i + 1..m {
                let c = cross(&sub(&pts[i], p0), &sub(&pts[j], p0));
                if c == [0, 0, 0] {
                    continue;
                }
                for k in j + 1..m {
                    if dot(&c, &sub(&pts[k], p0)) != 0 {
                        witness = true;
                        break 'outer;
                    }
                }
            }
        }
        if !witness {
            return Err(LabError::Degenerate(
                "points are coplanar; affine hull is not 3-dimensional".into(),
            ));
        }

        let mut facets: Vec<Facet> = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                for k in j + 1..m {
                    let c = cross(&sub(&pts[j], &pts[i]), &sub(&pts[k], &pts[i]));
                    if c == [0, 0, 0] {
                        continue;
                    }
                    let n = primitive(&c);
                    let side: Vec<i64> = pts.iter().map(|x| dot(&n, &sub(x, &pts[i]))).collect();
                    let normal = if side.iter().all(|&s| s >= 0) {
                        n
                    } else if side.iter().all(|&s| s <= 0) {
                        n.iter().map(|x| -x).collect()
                    } else {
                        continue;
                    };
                    let offset = -dot(&normal, &pts[i]);
                    let f = Facet { normal, offset };
                    if !facets.contains(&f) {
                        facets.push(f);
                    }
                }
            }
        }
        facets.sort_by(|a, b| (&a.normal, a.offset).cmp(&(&b.normal, b.offset)));

        let on: Vec<Vec<usize>> = facets
            .iter()
            .map(|f| (0..m).filter(|&v| f.slack(&pts[v]) == 0).collect())
            .collect();
        // Extreme points lie on at least three facets.
        let keep: Vec<usize> = (0..m)
            .filter(|&v| on.iter().filter(|l| l.contains(&v)).count() >= 3)
            .collect();
        let vertices: Vec<Vec<i64>> = keep.iter().map(|&v| pts[v].clone()).collect();

        let mut facet_vertices = Vec::with_capacity(facets.len());
        for f in &facets {
            let members: Vec<usize> = (0..vertices.len())
                .filter(|&v| f.slack(&vertices[v]) == 0)
                .collect();
            // Project along the largest normal component and order by 2-d hull.
            let drop = (0..3).max_by_key(|&c| f.normal[c].abs()).unwrap();
            let proj: Vec<[i64; 2]> = members
                .iter()
                .map(|&v| {
                    let p: Vec<i64> = (0..3).filter(|&c| c != drop).map(|c| vertices[v][c]).collect();
                    [p[0], p[1]]
                })
                .collect();
            let order = hull_2d(&proj);
            facet_vertices.push(order.into_iter().map(|i| members[i]).collect());
        }
        Ok(Self { dim: 3, vertices, facets, facet_vertices })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<i64>] {
        &self.vertices
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn spec(&self) -> PolytopeSpec {
        PolytopeSpec { vertices: self.vertices.clone() }
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.facets.iter().all(|f| f.slack(x) >= 0)
    }

    /// `k P` contains `x` iff `<a, x> + k c >= 0` for every facet.
    fn dilate_contains(&self, x: &[i64], k: i64) -> bool {
        self.facets.iter().all(|f| dot(&f.normal, x) + k * f.offset >= 0)
    }

    /// Dilation `k P` as a polytope.
    pub fn dilate(&self, k: i64) -> Result<Self> {
        if k < 1 {
            return Err(LabError::Invalid(format!("dilation factor must be >= 1, got {k}")));
        }
        Self::from_vertices(
            self.vertices
                .iter()
                .map(|v| v.iter().map(|c| c * k).collect())
                .collect(),
        )
    }

    fn bounds(&self) -> (Vec<i64>, Vec<i64>) {
        let lo = (0..self.dim)
            .map(|c| self.vertices.iter().map(|v| v[c]).min().unwrap())
            .collect();
        let hi = (0..self.dim)
            .map(|c| self.vertices.iter().map(|v| v[c]).max().unwrap())
            .collect();
        (lo, hi)
    }

    /// All points of `k P ∩ Z^n` in lexicographic order.
    pub fn lattice_points(&self, k: i64, exec: Exec) -> Result<Vec<Vec<i64>>> {
        if k < 1 {
            return Err(LabError::Invalid(format!("k must be >= 1, got {k}")));
        }
        let (lo, hi) = self.bounds();
        let first: Vec<i64> = (k * lo[0]..=k * hi[0]).collect();
        let slabs = exec.map(&first, |&x0| {
            let mut out = Vec::new();
            let mut x = vec![x0; self.dim];
            self.scan(&mut x, 1, k, &lo, &hi, &mut out);
            out
        });
        Ok(slabs.into_iter().flatten().collect())
    }

    fn scan(&self, x: &mut Vec<i64>, axis: usize, k: i64, lo: &[i64], hi: &[i64], out: &mut Vec<Vec<i64>>) {
        if axis == self.dim {
            if self.dilate_contains(x, k) {
                out.push(x.clone());
            }
            return;
        }
        for c in k * lo[axis]..=k * hi[axis] {
            x[axis] = c;
            self.scan(x, axis + 1, k, lo, hi, out);
        }
    }

    /// `#(k P ∩ Z^n)` by bounding-box scan.
    pub fn lattice_point_count(&self, k: i64) -> Result<u64> {
        self.lattice_point_count_with(k, Exec::default())
    }

    pub fn lattice_point_count_with(&self, k: i64, exec: Exec) -> Result<u64> {
        Ok(self.lattice_points(k, exec)?.len() as u64)
    }

    /// Simplices of a triangulation (as vertex coordinate lists).
    fn simplices(&self) -> Vec<Vec<&[i64]>> {
        let v = &self.vertices;
        match self.dim {
            1 => vec![vec![&v[0][..], &v[1][..]]],
            2 => (1..v.len() - 1).map(|i| vec![&v[0][..], &v[i][..], &v[i + 1][..]]).collect(),
            _ => {
                let mut out = Vec::new();
                for fv in &self.facet_vertices {
                    if fv.contains(&0) {
                        continue;
                    }
                    for i in 1..fv.len() - 1 {
                        out.push(vec![&v[0][..], &v[fv[0]][..], &v[fv[i]][..], &v[fv[i + 1]][..]]);
                    }
                }
                out
            }
        }
    }

    /// `n! vol` of a simplex (a nonnegative integer).
    fn simplex_det(s: &[&[i64]]) -> i64 {
        match s.len() {
            2 => (s[1][0] - s[0][0]).abs(),
            3 => cross2(s[0], s[1], s[2]).abs(),
            _ => dot(&cross(&sub(s[1], s[0]), &sub(s[2], s[0])), &sub(s[3], s[0])).abs(),
        }
    }

    /// Exact euclidean volume.
    pub fn volume(&self) -> Rational {
        let total: i64 = self.simplices().iter().map(|s| Self::simplex_det(s)).sum();
        int(total) / factorial(self.dim)
    }

    /// Exact centroid through the triangulation.
    pub fn barycenter(&self) -> Result<Vec<Rational>> {
        let mut weight = 0i64;
        let mut moment = vec![Rational::zero(); self.dim];
        for s in self.simplices() {
            let w = Self::simplex_det(&s);
            weight += w;
            for (c, m) in moment.iter_mut().enumerate() {
                let sum: i64 = s.iter().map(|p| p[c]).sum();
                *m += int(w * sum);
            }
        }
        if weight == 0 {
            return Err(LabError::Degenerate("zero volume".into()));
        }
        let denom = int(weight * (self.dim as i64 + 1));
        Ok(moment.into_iter().map(|m| m / &denom).collect())
    }

    /// Relative lattice volume of each facet (1 for the endpoints of a segment,
    /// lattice length for polygon edges, lattice area for 3-d facets).
    pub fn facet_lattice_measures(&self) -> Vec<Rational> {
        self.facets
            .iter()
            .zip(&self.facet_vertices)
            .map(|(f, fv)| match self.dim {
                1 => Rational::one(),
                2 => {
                    let d = sub(&self.vertices[fv[1]], &self.vertices[fv[0]]);
                    int(d[0].gcd(&d[1]))
                }
                _ => {
                    let c = f.normal.iter().position(|&a| a != 0).unwrap();
                    let base = &self.vertices[fv[0]];
                    let twice: i64 = (1..fv.len() - 1)
                        .map(|i| {
                            let x = cross(
                                &sub(&self.vertices[fv[i]], base),
                                &sub(&self.vertices[fv[i + 1]], base),
                            );
                            (x[c] / f.normal[c]).abs()
                        })
                        .sum();
                    rational::frac(twice, 2)
                }
            })
            .collect()
    }

    /// Total lattice measure of the boundary.
    pub fn boundary_measure(&self) -> Rational {
        self.facet_lattice_measures().into_iter().sum()
    }

    /// Exact Ehrhart polynomial fitted from `k = 1..=n+1` and checked at `n + 2`.
    pub fn ehrhart(&self) -> Result<EhrhartPolynomial> {
        let ks: Vec<i64> = (1..=self.dim as i64 + 1).collect();
        ehrhart_fit(self, &ks)
    }

    /// `L^n = n! vol(P)` and `(-K_X) . L^{n-1} = (n-1)! |∂P|_lattice`.
    pub fn toric_degrees(&self) -> ToricDegrees {
        let n = self.dim;
        ToricDegrees {
            l_degree: factorial(n) * self.volume(),
            anticanonical_degree: factorial(n - 1) * self.boundary_measure(),
        }
    }
}

/// Ehrhart polynomial with ascending exact coefficients `c_0, ..., c_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EhrhartPolynomial {
    #[serde(with = "crate::rational::serde_vec")]
    pub coefficients: Vec<Rational>,
}

impl EhrhartPolynomial {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, k: i64) -> Rational {
        poly::eval(&self.coefficients, &int(k))
    }

    pub fn leading(&self) -> &Rational {
        self.coefficients.last().unwrap()
    }

    pub fn subleading(&self) -> &Rational {
        &self.coefficients[self.coefficients.len() - 2]
    }
}

/// Exact interpolation of lattice counts at the supplied `k`, verified at
/// every supplied value and one held-out `k = max + 1`.
pub fn ehrhart_fit(p: &LatticePolytope, k_range: &[i64]) -> Result<EhrhartPolynomial> {
    let n = p.dim();
    let mut ks = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.len() < n + 1 {
        return Err(LabError::Invalid(format!(
            "need at least {} distinct k values, got {}",
            n + 1,
            ks.len()
        )));
    }
    if ks[0] < 1 {
        return Err(LabError::Invalid("k values must be positive".into()));
    }
    let held_out = ks[ks.len() - 1] + 1;
    let mut samples = Vec::with_capacity(ks.len() + 1);
    for &k in ks.iter().chain(std::iter::once(&held_out)) {
        samples.push((k, int(p.lattice_point_count(k)? as i64)));
    }
    let coefficients = poly::fit_exact(&samples, n)?;
    Ok(EhrhartPolynomial { coefficients })
}

/// Toric intersection degrees; conventions are `L^n` and `(-K).L^{n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToricDegrees {
    #[serde(with = "crate::rational::serde_str")]
    pub l_degree: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub anticanonical_degree: Rational,
}

fn hull_area_2x(pts: &[[i64; 2]]) -> i64 {
    let h = hull_2d(pts);
    if h.len() < 3 {
        return 0;
    }
    let ordered: Vec<[i64; 2]> = h.iter().map(|&i| pts[i]).collect();
    shoelace2(&ordered).abs()
}

/// Mixed area `MV(P, Q) = area(P + Q) - area(P) - area(Q)` of two planar
/// lattice point sets, possibly degenerate. For nef toric divisors on a
/// surface this is the intersection number `D_P . D_Q`.
pub fn mixed_area(p: &[[i64; 2]], q: &[[i64; 2]]) -> Rational {
    let sum: Vec<[i64; 2]> = p
        .iter()
        .flat_map(|a| q.iter().map(move |b| [a[0] + b[0], a[1] + b[1]]))
        .collect();
    rational::frac(hull_area_2x(&sum) - hull_area_2x(p) - hull_area_2x(q), 2)
}

/// Convenience constructors for the stock polytopes used throughout.
pub mod stock {
    use super::LatticePolytope;

    fn build(v: &[&[i64]]) -> LatticePolytope {
        LatticePolytope::from_vertices(v.iter().map(|p| p.to_vec()).collect())
            .expect("stock polytope is valid")
    }

    pub fn segment(len: i64) -> LatticePolytope {
        build(&[&[0], &[len]])
    }

    pub fn unit_square() -> LatticePolytope {
        build(&[&[0, 0], &[1, 0], &[0, 1], &[1, 1]])
    }

    pub fn standard_simplex_2() -> LatticePolytope {
        build(&[&[0, 0], &[1, 0], &[0, 1]])
    }

    /// Anticanonical polytope of the projective plane.
    pub fn p2_anticanonical() -> LatticePolytope {
        build(&[&[-1, -1], &[2, -1], &[-1, 2]])
    }

    /// Anticanonical polytope of the plane blown up in one point.
    pub fn blowup_p2() -> LatticePolytope {
        build(&[&[-1, -1], &[2, -1], &[-1, 1], &[0, 1]])
    }

    /// Anticanonical polytope of `P^1 x P^1`.
    pub fn p1xp1_anticanonical() -> LatticePolytope {
        build(&[&[-1, -1], &[1, -1], &[-1, 1], &[1, 1]])
    }

    pub fn unit_cube() -> LatticePolytope {
        let mut v = Vec::new();
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    v.push(vec![x, y, z]);
                }
            }
        }
        LatticePolytope::from_vertices(v).unwrap()
    }

    pub fn standard_simplex_3() -> LatticePolytope {
        build(&[&[0, 0, 0], &[1, 0, 0], &[0, 1, 0], &[0, 0, 1]])
    }
}

#[cfg(test)]
mod tests {
    use super::stock::*;
    use super::*;
    use crate::rational::frac;

    #[test]
    fn counts_from_examples() {
        assert_eq!(unit_square().lattice_point_count(1).unwrap(), 4);
        assert_eq!(standard_simplex_2().lattice_point_count(3).unwrap(), 10);
        assert_eq!(segment(2).lattice_point_count(5).unwrap(), 11);
    }

    #[test]
    fn ehrhart_examples() {
        let e = standard_simplex_2().ehrhart().unwrap();
        assert_eq!(e.coefficients, vec![int(1), frac(3, 2), frac(1, 2)]);
        assert_eq!(unit_square().ehrhart().unwrap().coefficients, vec![int(1), int(2), int(1)]);
        assert_eq!(segment(1).ehrhart().unwrap().coefficients, vec![int(1), int(1)]);
    }

    #[test]
    fn ehrhart_needs_enough_k() {
        assert!(matches!(
            ehrhart_fit(&unit_square(), &[1, 2, 2]),
            Err(LabError::Invalid(_))
        ));
    }

    #[test]
    fn barycenters() {
        assert_eq!(p2_anticanonical().barycenter().unwrap(), vec![int(0), int(0)]);
        assert_eq!(segment(1).barycenter().unwrap(), vec![frac(1, 2)]);
        let b = blowup_p2().barycenter().unwrap();
        assert!(b.iter().any(|c| !c.is_zero()));
        assert_eq!(unit_cube().barycenter().unwrap(), vec![frac(1, 2); 3]);
    }

    #[test]
    fn blowup_barycenter_by_hand() {
        // Split into the rectangle [-1,0]x[-1,1] and the triangle
        // conv{(0,-1),(2,-1),(0,1)}.
        let rect_area = frac(2, 1);
        let rect_c = [frac(-1, 2), int(0)];
        let tri_area = frac(2, 1);
        let tri_c = [frac(2, 3), frac(-1, 3)];
        let total = &rect_area + &tri_area;
        let expect: Vec<Rational> = (0..2)
            .map(|i| (&rect_area * &rect_c[i] + &tri_area * &tri_c[i]) / &total)
            .collect();
        assert_eq!(blowup_p2().volume(), total);
        assert_eq!(blowup_p2().barycenter().unwrap(), expect);
    }

    #[test]
    fn degrees() {
        let d = segment(1).toric_degrees();
        assert_eq!((d.l_degree, d.anticanonical_degree), (int(1), int(2)));
        let d = standard_simplex_2().toric_degrees();
        assert_eq!((d.l_degree, d.anticanonical_degree), (int(1), int(3)));
        let d = standard_simplex_3().toric_degrees();
        assert_eq!((d.l_degree, d.anticanonical_degree), (int(1), int(4)));
        let d = unit_cube().toric_degrees();
        assert_eq!((d.l_degree, d.anticanonical_degree), (int(6), int(12)));
    }

    #[test]
    fn dilation_scales_degrees() {
        for p in [standard_simplex_2(), blowup_p2(), segment(3), standard_simplex_3()] {
            let n = p.dim() as u32;
            let d1 = p.toric_degrees();
            let d2 = p.dilate(2).unwrap().toric_degrees();
            assert_eq!(d2.l_degree, d1.l_degree * rational::pow2(n));
            assert_eq!(d2.anticanonical_degree, d1.anticanonical_degree * rational::pow2(n - 1));
        }
    }

    #[test]
    fn subleading_is_half_boundary() {
        for p in [blowup_p2(), unit_cube(), standard_simplex_3(), p2_anticanonical()] {
            let e = p.ehrhart().unwrap();
            assert_eq!(e.leading(), &p.volume());
            assert_eq!(e.subleading() * int(2), p.boundary_measure());
        }
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            LatticePolytope::from_vertices(vec![vec![0, 0], vec![1, 1], vec![2, 2]]),
            Err(LabError::Degenerate(_))
        ));
        assert!(matches!(
            LatticePolytope::from_vertices(vec![vec![0, 0, 0, 0], vec![1, 0, 0, 0]]),
            Err(LabError::UnsupportedDimension(4))
        ));
        assert!(matches!(
            LatticePolytope::from_vertices(vec![
                vec![0, 0, 0],
                vec![1, 0, 0],
                vec![0, 1, 0],
                vec![1, 1, 0]
            ]),
            Err(LabError::Degenerate(_))
        ));
    }

    #[test]
    fn interior_points_are_dropped() {
        let p = LatticePolytope::from_vertices(vec![
            vec![0, 0],
            vec![2, 0],
            vec![0, 2],
            vec![1, 1],
            vec![1, 0],
            vec![0, 0],
        ])
        .unwrap();
        assert_eq!(p.vertices().len(), 3);
        for v in p.vertices() {
            let tight = p.facets().iter().filter(|f| f.slack(v) == 0).count();
            assert!(tight >= 2);
        }
    }

    #[test]
    fn p1xp1_intersections_vanish_on_fiber_class() {
        // Fiber class H1 <-> horizontal unit segment.
        let seg = [[0, 0], [1, 0]];
        assert_eq!(mixed_area(&seg, &seg), int(0));
        let other = [[0, 0], [0, 1]];
        assert_eq!(mixed_area(&seg, &other), int(1));
        let tri = [[0, 0], [1, 0], [0, 1]];
        assert_eq!(mixed_area(&tri, &tri), int(1));
    }
}
