use serde::{Deserialize, Serialize};

use super::{sym_eig, Matrix, NumError};

/// Total variance at or below this (relative to the squared coordinate scale)
/// counts as a degenerate cloud.
const DEGENERATE_REL: f64 = 1e-24;

/// A fitted principal-component basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// One row per component, unit length, sign-canonical.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// All points coincide; components are zero and every projection is the origin.
    pub degenerate: bool,
}

/// Fits PCA on `points` and returns the basis together with the projections.
pub fn pca_project(points: &[Vec<f64>], dims: usize) -> Result<(Pca, Vec<Vec<f64>>), NumError> {
    let pca = Pca::fit(points, dims)?;
    let projected = points.iter().map(|p| pca.project(p)).collect();
    Ok((pca, projected))
}

impl Pca {
    pub fn fit(points: &[Vec<f64>], dims: usize) -> Result<Pca, NumError> {
        if points.len() < dims + 1 {
            return Err(NumError::TooFewPoints {
                needed: dims + 1,
                found: points.len(),
            });
        }
        let d = points[0].len();
        if let Some(bad) = points.iter().find(|p| p.len() != d) {
            return Err(NumError::ShapeMismatch {
                expected: (points.len(), d),
                found: (points.len(), bad.len()),
            });
        }
        let dims = dims.min(d);
        let n = points.len() as f64;
        let mut mean = vec![0.0; d];
        for p in points {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let mut cov = Matrix::zeros(d, d);
        for p in points {
            let c: Vec<f64> = p.iter().zip(&mean).map(|(x, m)| x - m).collect();
            for i in 0..d {
                if c[i] == 0.0 {
                    continue;
                }
                for j in 0..=i {
                    cov[(i, j)] += c[i] * c[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..=i {
                let v = cov[(i, j)] / (n - 1.0);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }

        let total: f64 = cov.trace();
        let scale = points
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(1.0);
        if total <= DEGENERATE_REL * scale * scale {
            return Ok(Pca {
                mean,
                components: vec![vec![0.0; d]; dims],
                explained_variance: vec![0.0; dims],
                explained_variance_ratio: vec![0.0; dims],
                degenerate: true,
            });
        }

        let eig = sym_eig(&cov)?;
        let mut components = Vec::with_capacity(dims);
        let mut explained_variance = Vec::with_capacity(dims);
        for k in 0..dims {
            let mut v = eig.eigenvectors.column(k);
            canonicalize_sign(&mut v);
            components.push(v);
            explained_variance.push(eig.eigenvalues[k].max(0.0));
        }
        let explained_variance_ratio = explained_variance
            .iter()
            .map(|v| (v / total).clamp(0.0, 1.0))
            .collect();
        Ok(Pca {
            mean,
            components,
            explained_variance,
            explained_variance_ratio,
            degenerate: false,
        })
    }

    pub fn project(&self, point: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(point.iter().zip(&self.mean))
                    .map(|(ci, (x, m))| ci * (x - m))
                    .sum()
            })
            .collect()
    }
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() * (1.0 + 1e-9) {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn collinear_cloud_is_rank_one() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64; 3]).collect();
        let (pca, _) = pca_project(&pts, 2).unwrap();
        assert!((pca.explained_variance_ratio[0] - 1.0).abs() < 1e-10);
        assert!(pca.explained_variance_ratio[1].abs() < 1e-10);
    }

    #[test]
    fn planar_points_keep_distances() {
        let mut rng = Rng::new(9);
        let pts: Vec<Vec<f64>> = (0..12)
            .map(|_| vec![rng.normal(0.0, 2.0), rng.normal(1.0, 0.5)])
            .collect();
        let (_, proj) = pca_project(&pts, 2).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert!((dist(&pts[i], &pts[j]) - dist(&proj[i], &proj[j])).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn variance_matches_covariance_eigenvalues() {
        let mut rng = Rng::new(17);
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..5).map(|_| rng.standard_normal()).collect())
            .collect();
        let (pca, proj) = pca_project(&pts, 2).unwrap();
        // variance of the projected coordinates equals the leading eigenvalues
        for k in 0..2 {
            let var = proj.iter().map(|p| p[k] * p[k]).sum::<f64>() / 9.0;
            assert!((var - pca.explained_variance[k]).abs() < 1e-10);
        }
        let r = &pca.explained_variance_ratio;
        assert!(r[0] >= r[1] && r.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn identical_points_are_flagged() {
        let pts = vec![vec![1.0, 2.0]; 4];
        let (pca, proj) = pca_project(&pts, 2).unwrap();
        assert!(pca.degenerate);
        assert!(proj.iter().all(|p| p.iter().all(|&x| x == 0.0)));
        assert_eq!(pca.explained_variance_ratio, vec![0.0, 0.0]);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            pca_project(&pts, 2),
            Err(NumError::TooFewPoints { .. })
        ));
    }
}
