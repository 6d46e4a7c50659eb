//! PCA of embedding rows via a one-sided Jacobi SVD of the centred matrix.
//!
//! Each component's sign is fixed so that its largest-magnitude loading
//! (first one on ties) is positive.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::text::Vocab;

/// Default number of most frequent tokens to project.
pub const DEFAULT_TOP_TOKENS: usize = 1000;

const MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// `N × k` projected coordinates.
    pub coords: Tensor,
    /// `k × d` unit principal directions.
    pub components: Tensor,
    pub singular_values: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Numerical rank of the centred matrix.
    pub rank: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoints {
    pub tokens: Vec<String>,
    pub coords: Tensor,
    pub explained_variance_ratio: Vec<f64>,
    pub warnings: Vec<String>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Columns of `a` rotated to mutual orthogonality, and the accumulated
/// rotation. Columns of the result are `U Σ`, the rotation is `V`.
fn jacobi_svd(mut cols: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d = cols.len();
    let mut v: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut cols, &mut v] {
                    let (lo, hi) = m.split_at_mut(q);
                    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let (a, b) = (*x, *y);
                        *x = c * a - s * b;
                        *y = s * a + c * b;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (cols, v)
}

/// Projects the rows of `x` (`N × d`) onto their top `k` principal
/// components. Requires `1 ≤ k ≤ d` and `k < N`.
pub fn pca_project(x: &Tensor, k: usize) -> Result<Pca> {
    if x.ndim() != 2 {
        return Err(Error::shape(
            "pca_project",
            format!("expected a matrix, got {:?}", x.shape()),
        ));
    }
    let (n, d) = (x.shape()[0], x.shape()[1]);
    if k == 0 || k > d || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} needs 1 <= k <= {d} (columns) and k < {n} (rows)"
        )));
    }
    let data = x.data();
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let col: Vec<f64> = (0..n).map(|i| data[i * d + j]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            col.into_iter().map(|v| v - mean).collect()
        })
        .collect();
    let (us, v) = jacobi_svd(cols);
    let sigma: Vec<f64> = us.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));

    let total: f64 = sigma.iter().map(|s| s * s).sum();
    let s_max = sigma[order[0]];
    let rank = sigma
        .iter()
        .filter(|&&s| s > s_max * 1e-12 * n.max(d) as f64 && s > 0.0)
        .count();
    let mut warnings = Vec::new();
    if rank < k {
        warnings.push(format!(
            "centred data has rank {rank}, fewer than the {k} requested components"
        ));
    }

    let mut coords = Tensor::zeros(&[n, k]);
    let mut components = Tensor::zeros(&[k, d]);
    let mut singular_values = Vec::with_capacity(k);
    let mut ratios = Vec::with_capacity(k);
    for (c, &j) in order.iter().take(k).enumerate() {
        let lead = v[j]
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &x)| {
                if x.abs() > best.1 {
                    (i, x.abs())
                } else {
                    best
                }
            })
            .0;
        let sign = if v[j][lead] < 0.0 { -1.0 } else { 1.0 };
        for (i, x) in v[j].iter().enumerate() {
            components.data_mut()[c * d + i] = sign * x;
        }
        for (i, x) in us[j].iter().enumerate() {
            coords.data_mut()[i * k + c] = sign * x;
        }
        singular_values.push(sigma[j]);
        ratios.push(if total > 0.0 {
            sigma[j] * sigma[j] / total
        } else {
            0.0
        });
    }
    Ok(Pca {
        coords,
        components,
        singular_values,
        explained_variance_ratio: ratios,
        rank,
        warnings,
    })
}

/// Projects the `top` most frequent vocabulary tokens' embedding rows.
pub fn project_vocab(
    table: &Tensor,
    vocab: &Vocab,
    top: usize,
    k: usize,
) -> Result<ProjectedPoints> {
    if table.ndim() != 2 || table.shape()[0] != vocab.len() {
        return Err(Error::shape(
            "project_vocab",
            format!(
                "table {:?} does not match a vocabulary of {}",
                table.shape(),
                vocab.len()
            ),
        ));
    }
    let d = table.shape()[1];
    let ids: Vec<usize> = (2..vocab.len()).take(top).collect();
    let rows: Vec<f64> = ids
        .iter()
        .flat_map(|&i| table.data()[i * d..(i + 1) * d].to_vec())
        .collect();
    let pca = pca_project(&Tensor::new(vec![ids.len(), d], rows)?, k)?;
    Ok(ProjectedPoints {
        tokens: ids
            .iter()
            .map(|&i| vocab.token(i).unwrap_or_default().to_string())
            .collect(),
        coords: pca.coords,
        explained_variance_ratio: pca.explained_variance_ratio,
        warnings: pca.warnings,
    })
}

const AXES: [&str; 3] = ["x", "y", "z"];

/// CSV `token,x,y[,z]` with shortest round-trip decimals.
pub fn export_points(points: &ProjectedPoints, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let k = points.coords.shape().get(1).copied().unwrap_or(0);
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "can export 1 to 3 coordinates, not {k}"
        )));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["token"];
    header.extend_from_slice(&AXES[..k]);
    w.write_record(&header)?;
    for (i, token) in points.tokens.iter().enumerate() {
        let mut row = vec![token.clone()];
        row.extend((0..k).map(|c| points.coords.data()[i * k + c].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`export_points`].
pub fn read_points(path: impl AsRef<Path>) -> Result<ProjectedPoints> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let k = r.headers()?.len().saturating_sub(1);
    let mut tokens = Vec::new();
    let mut data = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        tokens.push(rec.get(0).unwrap_or_default().to_string());
        for c in 1..=k {
            let v = rec.get(c).unwrap_or_default();
            data.push(v.parse::<f64>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: n + 2,
                msg: format!("`{v}`: {e}"),
            })?);
        }
    }
    Ok(ProjectedPoints {
        coords: Tensor::new(vec![tokens.len(), k], data)?,
        tokens,
        explained_variance_ratio: vec![],
        warnings: vec![],
    })
}
