//! Central finite-difference gradient checking.

/// Step used for central differences.
pub const GRAD_STEP: f64 = 1e-5;
/// Largest acceptable relative error between analytic and numeric gradients.
pub const GRAD_TOL: f64 = 1e-4;

/// `|a − b| / max(|a|, |b|, 1e-6)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Perturbs every parameter of `model` by ±[`GRAD_STEP`] and returns the
/// worst relative error against `analytic` (same layout as `params`).
pub fn check_gradients<M>(
    model: &mut M,
    params: impl for<'a> Fn(&'a mut M) -> Vec<&'a mut [f64]>,
    loss: impl Fn(&M) -> f64,
    analytic: &[Vec<f64>],
) -> f64 {
    let sizes: Vec<usize> = params(model).iter().map(|p| p.len()).collect();
    assert_eq!(sizes.len(), analytic.len(), "parameter group count");
    let mut worst: f64 = 0.0;
    for (g, &size) in sizes.iter().enumerate() {
        assert_eq!(size, analytic[g].len(), "parameter group {g} size");
        for i in 0..size {
            let orig = params(model)[g][i];
            params(model)[g][i] = orig + GRAD_STEP;
            let plus = loss(model);
            params(model)[g][i] = orig - GRAD_STEP;
            let minus = loss(model);
            params(model)[g][i] = orig;
            let numeric = (plus - minus) / (2.0 * GRAD_STEP);
            worst = worst.max(relative_error(analytic[g][i], numeric));
        }
    }
    worst
}

/// Same check for the gradient with respect to an input vector.
pub fn check_input_gradient(x: &mut [f64], loss: impl Fn(&[f64]) -> f64, analytic: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + GRAD_STEP;
        let plus = loss(x);
        x[i] = orig - GRAD_STEP;
        let minus = loss(x);
        x[i] = orig;
        worst = worst.max(relative_error(analytic[i], (plus - minus) / (2.0 * GRAD_STEP)));
    }
    worst
}
