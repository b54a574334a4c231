use crate::{DiffError, Mat, Result, Tape, Var};

fn evaluate<F>(f: &F, params: &[Mat]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.constant(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let value = tape.scalar(out)?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(DiffError::NonFinite {
            op: "finite_diff probe",
        })
    }
}

/// Central-difference gradient of `f` at `params`.
pub fn finite_diff_gradient<F>(f: F, params: &[Mat], eps: f64) -> Result<Vec<Mat>>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(DiffError::Structural(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let mut probe: Vec<Mat> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let mut g = Mat::zeros(params[k].dim());
        for idx in 0..params[k].len() {
            let (r, c) = (idx / params[k].ncols(), idx % params[k].ncols());
            let orig = probe[k][[r, c]];
            probe[k][[r, c]] = orig + eps;
            let hi = evaluate(&f, &probe)?;
            probe[k][[r, c]] = orig - eps;
            let lo = evaluate(&f, &probe)?;
            probe[k][[r, c]] = orig;
            g[[r, c]] = (hi - lo) / (2.0 * eps);
        }
        out.push(g);
    }
    Ok(out)
}

/// Compares reverse-mode adjoints of `f` against central differences.
///
/// Returns `max |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)` over every
/// parameter entry.
pub fn finite_diff_check<F>(f: F, params: &[Mat], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p)).collect();
    let out = f(&mut tape, &vars)?;
    if !tape.scalar(out)?.is_finite() {
        return Err(DiffError::NonFinite {
            op: "finite_diff probe",
        });
    }
    let grads = tape.backward(out)?;
    let numeric = finite_diff_gradient(&f, params, eps)?;

    let mut worst = 0.0f64;
    for (v, fd) in vars.iter().zip(&numeric) {
        let ad = grads.get(*v);
        for (a, n) in ad.iter().zip(fd.iter()) {
            let err = (a - n).abs() / (a.abs() + n.abs()).max(1e-8);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
