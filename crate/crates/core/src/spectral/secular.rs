//! Eigensystem of `diag(d) + z z^T` through the secular equation.
//!
//! Coordinates with negligible coupling are deflated outright. Coordinates
//! sharing a pole are rotated pairwise until only one of them couples to `z`;
//! the others are exact eigenvectors at that pole and form a degenerate block.
//! Each remaining root of `1 = sum z_i^2 / (lambda - d_i)` is bracketed
//! between adjacent poles and located in coordinates shifted to the nearer
//! pole, so the distances `d_i - lambda` used for the eigenvectors never
//! suffer cancellation. Eigenvectors are assembled from a coupling vector
//! recomputed from the roots (Löwner), which keeps them orthogonal even when
//! roots crowd a pole.

use nalgebra::DMatrix;

use super::SpectralTolerances;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Ascending.
    pub values: Vec<f64>,
    /// Unit eigenvectors as columns, same order as `values`.
    pub vectors: DMatrix<f64>,
    /// For each column, the degenerate block it belongs to (blocks of at
    /// least two deflated vectors at a shared pole), otherwise `None`.
    pub blocks: Vec<Option<usize>>,
}

/// A coordinate of the reduced problem, expressed in the original basis.
struct Active {
    pole: f64,
    coupling: f64,
    support: Vec<(usize, f64)>,
}

struct Deflated {
    value: f64,
    vector: Vec<f64>,
    block: usize,
}

#[derive(Debug, Clone, Copy)]
struct Root {
    /// Index of the pole the root was located relative to.
    origin: usize,
    /// `lambda - pole[origin]`.
    tau: f64,
}

fn same_pole(a: f64, b: f64, tol: &SpectralTolerances, norm: f64) -> bool {
    let diff = (a - b).abs();
    diff <= tol.repeated_pole * a.abs().max(b.abs()) || diff <= f64::EPSILON * norm
}

pub fn diag_plus_rank_one(
    d: &[f64],
    z: &[f64],
    tol: &SpectralTolerances,
    exec: Execution,
) -> Result<EigenSystem> {
    let n = d.len();
    assert_eq!(z.len(), n, "pole and coupling lengths differ");
    let norm = d.iter().fold(0.0f64, |m, x| m.max(x.abs())) + z.iter().map(|x| x * x).sum::<f64>();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));

    let mut deflated: Vec<Deflated> = Vec::new();
    let mut active: Vec<Active> = Vec::new();
    let mut block_sizes: Vec<usize> = Vec::new();

    let unit = |i: usize| {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    };

    let mut start = 0;
    while start < n {
        let anchor = d[order[start]];
        let mut end = start + 1;
        while end < n && same_pole(anchor, d[order[end]], tol, norm) {
            end += 1;
        }
        let block = block_sizes.len();
        let before = deflated.len();
        let mut kept: Option<Active> = None;
        for &m in &order[start..end] {
            if z[m].abs() < tol.coupling {
                deflated.push(Deflated {
                    value: d[m],
                    vector: unit(m),
                    block,
                });
                continue;
            }
            let Some(k) = kept.as_mut() else {
                kept = Some(Active {
                    pole: d[m],
                    coupling: z[m],
                    support: vec![(m, 1.0)],
                });
                continue;
            };
            // Rotate (kept, e_m) so that e_m' no longer couples.
            let r = k.coupling.hypot(z[m]);
            let c = k.coupling / r;
            let s = z[m] / r;
            let mut v = vec![0.0; n];
            for &(i, x) in &k.support {
                v[i] = s * x;
            }
            v[m] = -c;
            deflated.push(Deflated {
                value: s * s * k.pole + c * c * d[m],
                vector: v,
                block,
            });
            k.pole = c * c * k.pole + s * s * d[m];
            for e in k.support.iter_mut() {
                e.1 *= c;
            }
            k.support.push((m, s));
            k.coupling = r;
        }
        if let Some(k) = kept {
            active.push(k);
        }
        block_sizes.push(deflated.len() - before);
        start = end;
    }

    let poles: Vec<f64> = active.iter().map(|a| a.pole).collect();
    let w2: Vec<f64> = active.iter().map(|a| a.coupling * a.coupling).collect();
    let k = active.len();

    let roots: Vec<Root> = par::try_map_indexed(k, exec, |j| secular_root(&poles, &w2, j, tol))?;

    // Coupling vector consistent with the computed roots.
    let z_hat: Vec<f64> = par::map_indexed(k, exec, |i| {
        let gap = |j: usize| (poles[roots[j].origin] - poles[i]) + roots[j].tau;
        let mut prod = gap(k - 1);
        for j in 0..k - 1 {
            let denom = if j < i {
                poles[j] - poles[i]
            } else {
                poles[j + 1] - poles[i]
            };
            prod *= gap(j) / denom;
        }
        prod.abs().sqrt().copysign(active[i].coupling)
    });

    let active_vectors: Vec<Vec<f64>> = par::map_indexed(k, exec, |j| {
        let root = roots[j];
        let origin = poles[root.origin];
        let x: Vec<f64> = (0..k)
            .map(|i| z_hat[i] / ((poles[i] - origin) - root.tau))
            .collect();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = vec![0.0; n];
        for (xi, a) in x.iter().zip(&active) {
            for &(idx, c) in &a.support {
                v[idx] += xi / nx * c;
            }
        }
        v
    });

    let mut columns: Vec<(f64, Vec<f64>, Option<usize>)> = Vec::with_capacity(n);
    for (j, v) in active_vectors.into_iter().enumerate() {
        columns.push((poles[roots[j].origin] + roots[j].tau, v, None));
    }
    for dv in deflated {
        let block = (block_sizes[dv.block] >= 2).then_some(dv.block);
        columns.push((dv.value, dv.vector, block));
    }
    columns.sort_by(|a, b| a.0.total_cmp(&b.0));

    let values = columns.iter().map(|c| c.0).collect();
    let blocks = columns.iter().map(|c| c.2).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (j, (_, v, _)) in columns.into_iter().enumerate() {
        vectors.column_mut(j).copy_from_slice(&v);
    }
    Ok(EigenSystem {
        values,
        vectors,
        blocks,
    })
}

/// Root of the secular equation in the `j`-th interval.
///
/// Newton iteration runs on `F(tau) = tau * g(tau)`, which is analytic at the
/// origin pole, with a bisection fallback whenever a step leaves the current
/// bracket.
fn secular_root(poles: &[f64], w2: &[f64], j: usize, tol: &SpectralTolerances) -> Result<Root> {
    let k = poles.len();
    let (origin, mut lo, mut hi) = if j + 1 < k {
        let half = 0.5 * (poles[j + 1] - poles[j]);
        let g_mid = 1.0
            - poles
                .iter()
                .zip(w2)
                .map(|(p, w)| w / (half - (p - poles[j])))
                .sum::<f64>();
        if g_mid >= 0.0 {
            (j, 0.0, half)
        } else {
            (j + 1, -half, 0.0)
        }
    } else {
        (k - 1, 0.0, w2.iter().sum::<f64>())
    };
    let delta: Vec<f64> = poles.iter().map(|p| p - poles[origin]).collect();
    let w_o = w2[origin];

    // psi(tau) = sum over non-origin poles; also its derivative and the
    // absolute term sum used to scale the residual test.
    let eval = |tau: f64| {
        let mut psi = 0.0;
        let mut dpsi = 0.0;
        let mut abs_sum = 0.0;
        for i in 0..k {
            if i == origin {
                continue;
            }
            let t = w2[i] / (tau - delta[i]);
            psi += t;
            dpsi += t / (tau - delta[i]);
            abs_sum += t.abs();
        }
        (psi, dpsi, abs_sum)
    };

    if j + 1 == k {
        // The upper end of the last interval may itself be the root.
        let (psi, _, _) = eval(hi);
        if 1.0 - w_o / hi - psi <= 0.0 {
            return Ok(Root { origin, tau: hi });
        }
    }

    let (psi0, _, _) = eval(0.0);
    let guess = w_o / (1.0 - psi0);
    let mut tau = if guess.is_finite() && guess > lo && guess < hi && guess != 0.0 {
        guess
    } else {
        0.5 * (lo + hi)
    };

    for _ in 0..tol.max_iterations {
        let (psi, dpsi, abs_sum) = eval(tau);
        let g = 1.0 - w_o / tau - psi;
        if g == 0.0 || g.abs() <= tol.secular * (1.0 + w_o / tau.abs() + abs_sum) {
            return Ok(Root { origin, tau });
        }
        if g < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        let f = tau * (1.0 - psi) - w_o;
        let fp = 1.0 - psi + tau * dpsi;
        let mut next = tau - f / fp;
        if !(next.is_finite() && next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - tau).abs() <= tol.secular * tau.abs() || next == tau {
            return Ok(Root { origin, tau: next });
        }
        if hi - lo <= 2.0 * f64::EPSILON * tau.abs() {
            return Ok(Root { origin, tau: next });
        }
        tau = next;
    }
    Err(Error::ConvergenceFailure {
        interval: j,
        iterations: tol.max_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn solve(d: &[f64], z: &[f64]) -> EigenSystem {
        diag_plus_rank_one(d, z, &SpectralTolerances::default(), Execution::Sequential).unwrap()
    }

    fn residual(d: &[f64], z: &[f64], sys: &EigenSystem) -> f64 {
        let n = d.len();
        let mut worst = 0.0f64;
        for j in 0..n {
            let v = sys.vectors.column(j);
            let proj: f64 = z.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            let r: f64 = (0..n)
                .map(|i| {
                    let e = d[i] * v[i] + z[i] * proj - sys.values[j] * v[i];
                    e * e
                })
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        worst
    }

    #[test]
    fn two_by_two() {
        // diag(0.01, 0.04) + (0.6, 0.8)(0.6, 0.8)^T; trace 1.05, det 0.0212.
        let sys = solve(&[0.01, 0.04], &[0.6, 0.8]);
        let disc = (1.05f64 * 1.05 - 4.0 * 0.0212).sqrt();
        assert_relative_eq!(sys.values[0], 0.5 * (1.05 - disc), max_relative = 1e-13);
        assert_relative_eq!(sys.values[1], 0.5 * (1.05 + disc), max_relative = 1e-13);
        assert!(residual(&[0.01, 0.04], &[0.6, 0.8], &sys) < 1e-14);
    }

    #[test]
    fn all_poles_equal() {
        let z = [0.5, 1.0, 1.5].map(|b: f64| b / 3.5f64.sqrt());
        let d = [0.3; 3];
        let sys = solve(&d, &z);
        for (v, want) in sys.values.iter().zip([0.3, 0.3, 1.3]) {
            assert_relative_eq!(*v, want, max_relative = 1e-15);
        }
        assert_eq!(sys.blocks[0], sys.blocks[1]);
        assert!(sys.blocks[0].is_some());
        assert!(sys.blocks[2].is_none());
        assert!(residual(&d, &z, &sys) < 1e-15);
        let orth = sys.vectors.transpose() * &sys.vectors;
        assert_relative_eq!(orth, DMatrix::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn zero_coupling_is_deflated() {
        let d = [0.2, 0.1, 0.05];
        let z = [0.0, 0.6, 0.8];
        let sys = solve(&d, &z);
        let idx = sys.values.iter().position(|&v| v == 0.2).unwrap();
        assert_eq!(sys.vectors[(0, idx)].abs(), 1.0);
        assert!(residual(&d, &z, &sys) < 1e-14);
    }

    #[test]
    fn tiny_coupling_near_pole() {
        let d = [0.0, 1e-3, 2e-3, 3e-3];
        let z = [1e-9, 0.5, 0.5, (0.5f64 - 1e-18).sqrt()];
        let sys = solve(&d, &z);
        assert!(residual(&d, &z, &sys) < 1e-13);
        let orth = sys.vectors.transpose() * &sys.vectors;
        assert_relative_eq!(orth, DMatrix::identity(4, 4), epsilon = 1e-12);
        for w in sys.values.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn clustered_poles_stay_orthogonal() {
        let n = 40;
        let d: Vec<f64> = (0..n).map(|i| 1e-3 + i as f64 * 1e-11).collect();
        let raw: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
        let nz = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let z: Vec<f64> = raw.iter().map(|x| x / nz).collect();
        let sys = solve(&d, &z);
        assert!(residual(&d, &z, &sys) < 1e-12);
        let orth = sys.vectors.transpose() * &sys.vectors;
        assert_relative_eq!(orth, DMatrix::identity(n, n), epsilon = 1e-12);
    }
}
