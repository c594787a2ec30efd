use super::Parameters;

/// Below this magnitude a gradient entry is judged by absolute error: with
/// `h = 1e-5` and an O(1) loss, differencing noise alone is around 1e-11.
pub const DENOM_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient returned by `loss_fn` against central
/// differences `(f(θ+h) − f(θ−h)) / 2h`, one coordinate at a time.
///
/// Returns the maximum relative error, each term using the denominator
/// `max(|analytic|, |numeric|, DENOM_FLOOR)`.
pub fn grad_check<P, F>(loss_fn: F, params: &P, h: f64) -> f64
where
    P: Parameters + Clone,
    F: Fn(&P) -> (f64, P),
{
    let analytic = loss_fn(params).1.flat();
    let theta = params.flat();
    let mut probe = params.clone();
    let mut shifted = theta.clone();
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        shifted[i] = theta[i] + h;
        probe.set_flat(&shifted).expect("same parameter layout");
        let plus = loss_fn(&probe).0;
        shifted[i] = theta[i] - h;
        probe.set_flat(&shifted).expect("same parameter layout");
        let minus = loss_fn(&probe).0;
        shifted[i] = theta[i];

        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(DENOM_FLOOR);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact_up_to_rounding() {
        let w = vec![0.3, -1.7, 2.2, 0.05, -0.9];
        let err = grad_check(
            |p: &Vec<f64>| {
                let loss = p.iter().map(|v| v * v).sum();
                (loss, p.iter().map(|v| 2.0 * v).collect())
            },
            &w,
            1e-5,
        );
        assert!(err <= 1e-7, "max relative error {err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let w = vec![1.0, 2.0];
        let err = grad_check(
            |p: &Vec<f64>| (p.iter().map(|v| v * v).sum(), p.clone()),
            &w,
            1e-5,
        );
        assert!(err > 0.4);
    }
}
