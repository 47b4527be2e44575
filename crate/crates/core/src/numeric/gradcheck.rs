use super::{NumericError, ParamStore, Tape, Var};

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is ~0 are judged on absolute error instead.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// Outcome of comparing tape gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_parameter: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Checks every coordinate of every parameter in `store`.
///
/// `loss` must be deterministic: it builds the scalar loss on a fresh tape
/// from the current parameter values.
pub fn finite_difference_check<F>(
    store: &mut ParamStore,
    h: f64,
    mut loss: F,
) -> Result<GradCheckReport, NumericError>
where
    F: FnMut(&ParamStore, &mut Tape) -> Result<Var, NumericError>,
{
    if h <= 0.0 {
        return Err(NumericError::Degenerate(
            "finite difference step must be positive",
        ));
    }
    store.zero_grads();
    let mut tape = Tape::new();
    let root = loss(store, &mut tape)?;
    tape.backward(root, store)?;
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad().data().to_vec()).collect();

    let mut eval = |store: &ParamStore| -> Result<f64, NumericError> {
        let mut tape = Tape::new();
        let root = loss(store, &mut tape)?;
        Ok(tape.value(root).item())
    };

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_parameter: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    let ids: Vec<_> = store.ids().collect();
    for (pi, id) in ids.into_iter().enumerate() {
        for i in 0..store.value(id).len() {
            let original = store.value(id).data()[i];
            store.get_mut(id).value_mut().data_mut()[i] = original + h;
            let plus = eval(store)?;
            store.get_mut(id).value_mut().data_mut()[i] = original - h;
            let minus = eval(store)?;
            store.get_mut(id).value_mut().data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[pi][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
            report.coordinates += 1;
            if rel > report.max_relative_error || !rel.is_finite() {
                report.max_relative_error = rel;
                report.worst_parameter = store.get(id).name().to_string();
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
