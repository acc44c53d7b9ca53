use ndarray::{Array1, ArrayView1, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::minitrain::{Dataset, Network, Split};

const COLLINEARITY_TOLERANCE: f64 = 1e-8;

/// The head weight vector `w_k` of every class (biases excluded).
pub fn template_vectors(net: &Network) -> Vec<Array1<f64>> {
    let (w, _) = net.head();
    w.axis_iter(Axis(1)).map(|col| col.to_owned()).collect()
}

/// Orthonormal basis of the plane through three templates, obtained by
/// Gram-Schmidt on `w_b - w_a` and `w_c - w_a`.
pub fn plane_basis(
    w_a: ArrayView1<f64>,
    w_b: ArrayView1<f64>,
    w_c: ArrayView1<f64>,
) -> Result<[Array1<f64>; 2]> {
    if w_a.len() != w_b.len() || w_a.len() != w_c.len() {
        return Err(Error::Shape("templates differ in length".into()));
    }
    let u = &w_b - &w_a;
    let v = &w_c - &w_a;
    let (nu, nv) = (norm(u.view()), norm(v.view()));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::DegenerateTemplates("two templates coincide".into()));
    }
    let e1 = &u / nu;
    let mut r = v.clone();
    // two passes keep orthogonality at the 1e-16 level
    for _ in 0..2 {
        let proj = r.dot(&e1);
        r = &r - &(&e1 * proj);
    }
    let nr = norm(r.view());
    if nr <= COLLINEARITY_TOLERANCE * nv {
        return Err(Error::DegenerateTemplates(format!(
            "templates are collinear (sine of angle {:e})",
            nr / nv
        )));
    }
    Ok([e1, r / nr])
}

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// `WCSS / BCSS` of labelled points.
pub fn wcss_bcss(points: &[[f64; 2]], labels: &[usize]) -> Result<f64> {
    let geometry = cluster_geometry(points, labels)?;
    if geometry.bcss == 0.0 {
        return Err(Error::ZeroBetweenClusterScatter);
    }
    Ok(geometry.wcss / geometry.bcss)
}

/// Per-cluster summary of a labelled 2-D point set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterGeometry {
    /// Cluster labels in ascending order.
    pub labels: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
    /// Mean distance of a cluster's points to its centroid.
    pub mean_radii: Vec<f64>,
    pub wcss: f64,
    pub bcss: f64,
}

impl ClusterGeometry {
    /// Every pair of centroids is farther apart than either cluster's mean radius.
    pub fn separated(&self) -> bool {
        let n = self.centroids.len();
        (0..n).all(|a| {
            (a + 1..n).all(|b| {
                let d = dist(self.centroids[a], self.centroids[b]);
                d > self.mean_radii[a].max(self.mean_radii[b])
            })
        })
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn cluster_geometry(points: &[[f64; 2]], labels: &[usize]) -> Result<ClusterGeometry> {
    if points.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} points but {} labels",
            points.len(),
            labels.len()
        )));
    }
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two non-empty clusters".into(),
        ));
    }
    let members = |c: usize| points.iter().zip(labels).filter(move |(_, &l)| l == c).map(|(p, _)| *p);
    let mean_of = |it: &mut dyn Iterator<Item = [f64; 2]>| {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for p in it {
            sx += p[0];
            sy += p[1];
            n += 1;
        }
        ([sx / n as f64, sy / n as f64], n)
    };
    let (grand, _) = mean_of(&mut points.iter().copied());
    let mut centroids = Vec::with_capacity(ids.len());
    let mut mean_radii = Vec::with_capacity(ids.len());
    let (mut wcss, mut bcss) = (0.0, 0.0);
    for &c in &ids {
        let (mu, n) = mean_of(&mut members(c));
        let mut radius = 0.0;
        for p in members(c) {
            let d = dist(p, mu);
            wcss += d * d;
            radius += d;
        }
        let g = dist(mu, grand);
        bcss += n as f64 * g * g;
        centroids.push(mu);
        mean_radii.push(radius / n as f64);
    }
    Ok(ClusterGeometry {
        labels: ids,
        centroids,
        mean_radii,
        wcss,
        bcss,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectedPoint {
    pub split: &'static str,
    pub class: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationReport {
    pub class_triple: [usize; 3],
    pub basis: [Array1<f64>; 2],
    /// Train points followed by test points, class by class.
    pub points: Vec<ProjectedPoint>,
    pub wcss_bcss_train: f64,
    pub wcss_bcss_test: f64,
}

impl RepresentationReport {
    pub fn split_points(&self, split: &str) -> (Vec<[f64; 2]>, Vec<usize>) {
        self.points
            .iter()
            .filter(|p| p.split == split)
            .map(|p| ([p.x, p.y], p.class))
            .unzip()
    }
}

/// Projects penultimate activations of the first `n_per_class` samples of
/// each class in the triple, in both splits, onto the template plane
/// anchored at `w_a`.
pub fn project_representation(
    net: &Network,
    split: &Split,
    class_triple: [usize; 3],
    n_per_class: usize,
) -> Result<RepresentationReport> {
    let [a, b, c] = class_triple;
    if a == b || a == c || b == c {
        return Err(Error::InvalidParameter(format!(
            "classes must be distinct, got {class_triple:?}"
        )));
    }
    if n_per_class == 0 {
        return Err(Error::InvalidParameter("n_per_class must be >= 1".into()));
    }
    let templates = template_vectors(net);
    if let Some(&bad) = class_triple.iter().find(|&&k| k >= templates.len()) {
        return Err(Error::MissingClass(bad));
    }
    let anchor = templates[a].clone();
    let basis = plane_basis(anchor.view(), templates[b].view(), templates[c].view())?;

    let mut points = Vec::with_capacity(6 * n_per_class);
    let mut ratios = [0.0; 2];
    for (s, (name, data)) in [("train", &split.train), ("test", &split.test)]
        .into_iter()
        .enumerate()
    {
        let start = points.len();
        for &class in &class_triple {
            let rows = first_rows_of(data, class, n_per_class)?;
            let z = net.penultimate(&data.features.select(Axis(0), &rows))?;
            for row in z.rows() {
                let centered = &row - &anchor;
                points.push(ProjectedPoint {
                    split: name,
                    class,
                    x: centered.dot(&basis[0]),
                    y: centered.dot(&basis[1]),
                });
            }
        }
        let (xy, labels): (Vec<[f64; 2]>, Vec<usize>) =
            points[start..].iter().map(|p| ([p.x, p.y], p.class)).unzip();
        ratios[s] = wcss_bcss(&xy, &labels)?;
    }
    Ok(RepresentationReport {
        class_triple,
        basis,
        points,
        wcss_bcss_train: ratios[0],
        wcss_bcss_test: ratios[1],
    })
}

fn first_rows_of(data: &Dataset, class: usize, n: usize) -> Result<Vec<usize>> {
    let rows: Vec<usize> = data
        .labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == class)
        .map(|(i, _)| i)
        .take(n)
        .collect();
    if rows.is_empty() {
        return Err(Error::MissingClass(class));
    }
    if rows.len() < n {
        return Err(Error::InvalidParameter(format!(
            "class {class} has {} samples, {n} requested",
            rows.len()
        )));
    }
    Ok(rows)
}
