//! Derivative-free minimisation.

/// Settings for [`nelder_mead`].
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Stop once every vertex lies within this distance (infinity norm) of
    /// the best vertex.
    pub tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Standard Nelder-Mead with reflection 1, expansion 2, contraction 0.5 and
/// shrink 0.5. The initial simplex is `x0` plus `x0 + step[j] * e_j`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: &[f64], opts: NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), step.len(), "step must match dimension");
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for j in 0..n {
        let mut x = x0.to_vec();
        x[j] += step[j];
        let v = eval(&x);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        // Stable sort keeps the ordering deterministic on ties.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter <= opts.tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let toward = |coef: f64, worst: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst)
                .map(|(c, w)| c + coef * (w - c))
                .collect()
        };

        let worst = simplex[n].0.clone();
        let f_worst = simplex[n].1;
        let f_best = simplex[0].1;
        let f_second = simplex[n - 1].1;

        let reflected = toward(-1.0, &worst);
        let f_reflected = eval(&reflected);
        if f_reflected < f_best {
            let expanded = toward(-2.0, &worst);
            let f_expanded = eval(&expanded);
            simplex[n] = if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            };
            continue;
        }
        if f_reflected < f_second {
            simplex[n] = (reflected, f_reflected);
            continue;
        }
        let (contracted, f_contracted) = if f_reflected < f_worst {
            let x = toward(-0.5, &worst);
            let v = eval(&x);
            (x, v)
        } else {
            let x = toward(0.5, &worst);
            let v = eval(&x);
            (x, v)
        };
        if f_contracted < f_worst.min(f_reflected) {
            simplex[n] = (contracted, f_contracted);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            for (xi, a) in x.iter_mut().zip(&anchor) {
                *xi = a + 0.5 * (*xi - a);
            }
            *v = eval(x);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        value,
        iterations,
        evaluations,
        converged,
    }
}
