use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MAPE, RMSE and residual standard deviation over `n` samples.
///
/// `mape` is `None` when some target is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mape: Option<f64>,
    pub rmse: f64,
    pub std: f64,
    pub n: usize,
}

fn check(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::Dimension(format!(
            "{} targets vs {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset("no samples to evaluate".into()));
    }
    Ok(())
}

/// Mean residual `ē = mean(y − ŷ)`.
pub fn residual_mean(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| a - b).sum::<f64>() / y.len() as f64)
}

pub fn compute_metrics(y: &[f64], yhat: &[f64]) -> Result<MetricsReport> {
    let ebar = residual_mean(y, yhat)?;
    let n = y.len() as f64;
    let mut sq = 0.0;
    let mut centered = 0.0;
    let mut pct = 0.0;
    let mut zero_target = false;
    for (&t, &p) in y.iter().zip(yhat) {
        let e = t - p;
        sq += e * e;
        centered += (e - ebar) * (e - ebar);
        if t == 0.0 {
            zero_target = true;
        } else {
            pct += (e / t).abs();
        }
    }
    Ok(MetricsReport {
        mape: (!zero_target).then(|| pct / n),
        rmse: (sq / n).sqrt(),
        std: (centered / n).sqrt(),
        n: y.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_example() {
        let m = compute_metrics(&[2.0, 4.0], &[1.0, 5.0]).unwrap();
        assert!((m.mape.unwrap() - 0.375).abs() < 1e-15);
        assert!((m.rmse - 1.0).abs() < 1e-15);
        assert!((m.std - 1.0).abs() < 1e-15);
        assert_eq!(m.n, 2);
    }

    #[test]
    fn perfect_prediction() {
        let y = [3.0, -1.0, 8.5];
        let m = compute_metrics(&y, &y).unwrap();
        assert_eq!((m.mape, m.rmse, m.std), (Some(0.0), 0.0, 0.0));
    }

    #[test]
    fn constant_residual() {
        let m = compute_metrics(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(m.mape, Some(1.0));
        assert_eq!(m.rmse, 1.0);
        assert_eq!(m.std, 0.0);
    }

    #[test]
    fn zero_target_omits_mape() {
        let m = compute_metrics(&[0.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(m.mape, None);
        assert!((m.rmse - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(compute_metrics(&[1.0], &[1.0, 2.0]).is_err());
        assert!(compute_metrics(&[], &[]).is_err());
    }

    #[test]
    fn json_shape() {
        let m = compute_metrics(&[2.0, 4.0], &[1.0, 5.0]).unwrap();
        let v: serde_json::Value = serde_json::to_value(m).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 4);
        for k in ["mape", "rmse", "std", "n"] {
            assert!(v.get(k).is_some());
        }
    }
}
