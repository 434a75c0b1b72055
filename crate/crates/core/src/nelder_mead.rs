//! Derivative-free simplex minimizer.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop once the largest vertex distance from the best vertex drops below this.
    pub diameter_tol: f64,
    pub max_iters: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            diameter_tol: 0.1,
            max_iters: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(v, _)| {
            v.iter()
                .zip(best)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t * (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Minimizes `f` from an initial point; the starting simplex offsets each
/// coordinate by `step`.
pub fn minimize<F>(f: F, start: &[f64], step: f64, opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut vertices = vec![start.to_vec()];
    for i in 0..start.len() {
        let mut v = start.to_vec();
        v[i] += step;
        vertices.push(v);
    }
    minimize_from_simplex(f, vertices, opts)
}

pub fn minimize_from_simplex<F>(
    mut f: F,
    vertices: Vec<Vec<f64>>,
    opts: &NelderMeadOptions,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = vertices[0].len();
    assert_eq!(vertices.len(), n + 1, "simplex needs n + 1 vertices");
    let mut simplex: Vec<(Vec<f64>, f64)> = vertices
        .into_iter()
        .map(|v| {
            let fv = f(&v);
            (v, fv)
        })
        .collect();
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut iterations = 0;
    let mut converged = false;
    order(&mut simplex);
    while iterations < opts.max_iters {
        if diameter(&simplex) < opts.diameter_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let best_val = simplex[0].1;
        let second_worst_val = simplex[n - 1].1;

        let reflected = affine(&centroid, &worst.0, -opts.reflection);
        let f_r = f(&reflected);
        if f_r < best_val {
            let expanded = affine(&centroid, &worst.0, -opts.expansion);
            let f_e = f(&expanded);
            simplex[n] = if f_e < f_r {
                (expanded, f_e)
            } else {
                (reflected, f_r)
            };
        } else if f_r < second_worst_val {
            simplex[n] = (reflected, f_r);
        } else {
            let (candidate, f_c) = if f_r < worst.1 {
                // outside contraction
                let c = affine(&centroid, &reflected, opts.contraction);
                let fc = f(&c);
                (c, fc)
            } else {
                let c = affine(&centroid, &worst.0, opts.contraction);
                let fc = f(&c);
                (c, fc)
            };
            if f_c < worst.1.min(f_r) {
                simplex[n] = (candidate, f_c);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let v = affine(&best, &vertex.0, opts.shrink);
                    let fv = f(&v);
                    *vertex = (v, fv);
                }
            }
        }
        order(&mut simplex);
    }
    if !converged && diameter(&simplex) < opts.diameter_tol {
        converged = true;
    }
    let (point, value) = simplex.swap_remove(0);
    NelderMeadResult {
        point,
        value,
        iterations,
        converged,
    }
}
