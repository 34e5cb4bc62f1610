use serde::{Deserialize, Serialize};
use std::path::Path;

use super::csv::write_rows;
use crate::envs::Trajectory;
use crate::error::{check_dim, Result};
use crate::scalar::Scalar;
use crate::worldmodel::{no_change_baseline, one_step_errors, OneStepPredictor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioStatus {
    Ok,
    /// The stateful model predicts this feature exactly, so the ratio is undefined.
    Saturated,
    /// The feature never changes in the dataset.
    Static,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRatioRow {
    pub feature: String,
    pub stateless_error: f64,
    pub stateful_error: f64,
    /// `stateless / stateful`, present only when the status is `Ok`.
    pub ratio: Option<f64>,
    pub status: RatioStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRatioTable {
    pub rows: Vec<ErrorRatioRow>,
}

impl ErrorRatioTable {
    pub fn row(&self, feature: &str) -> Option<&ErrorRatioRow> {
        self.rows.iter().find(|r| r.feature == feature)
    }

    /// Feature with the largest defined ratio.
    pub fn max_row(&self) -> Option<&ErrorRatioRow> {
        self.rows
            .iter()
            .filter(|r| r.ratio.is_some())
            .max_by(|a, b| a.ratio.unwrap().total_cmp(&b.ratio.unwrap()))
    }
}

/// Per-feature one-step errors of a stateless and a stateful predictor on a
/// held-out dataset, and their ratio. Ratios above one mark features whose
/// dynamics depend on something the stateless model cannot see.
pub fn error_ratio_table<T, S, R>(dataset: &[Trajectory<T>], stateful: &S, stateless: &R, feature_names: &[&str]) -> Result<ErrorRatioTable>
where
    T: Scalar,
    S: OneStepPredictor<T> + ?Sized,
    R: OneStepPredictor<T> + ?Sized,
{
    let full = one_step_errors(stateful, dataset)?;
    let flat = one_step_errors(stateless, dataset)?;
    let change = no_change_baseline(dataset)?;
    check_dim("feature names", full.len(), feature_names.len())?;
    let rows = feature_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let (sl, sf) = (flat[i].to_f64_lossy(), full[i].to_f64_lossy());
            let status = if change[i] == T::zero() {
                RatioStatus::Static
            } else if sf == 0.0 {
                RatioStatus::Saturated
            } else {
                RatioStatus::Ok
            };
            ErrorRatioRow {
                feature: name.to_string(),
                stateless_error: sl,
                stateful_error: sf,
                ratio: (status == RatioStatus::Ok).then(|| sl / sf),
                status,
            }
        })
        .collect();
    Ok(ErrorRatioTable { rows })
}

/// `feature,stateless_error,stateful_error,ratio,status`; undefined ratios are left empty.
pub fn write_error_ratio_csv(path: &Path, table: &ErrorRatioTable) -> Result<()> {
    let header: Vec<String> = ["feature", "stateless_error", "stateful_error", "ratio", "status"].iter().map(|s| s.to_string()).collect();
    let rows = table.rows.iter().map(|r| {
        let status = match r.status {
            RatioStatus::Ok => "ok",
            RatioStatus::Saturated => "saturated",
            RatioStatus::Static => "static",
        };
        [
            r.feature.clone(),
            r.stateless_error.to_string(),
            r.stateful_error.to_string(),
            r.ratio.map(|x| x.to_string()).unwrap_or_default(),
            status.to_string(),
        ]
    });
    write_rows(path, &header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{generate_dataset, EnvId};
    use crate::error::Result;

    struct Fixed(Vec<f64>);

    impl OneStepPredictor<f64> for Fixed {
        fn one_step_predictions(&self, traj: &Trajectory<f64>) -> Result<Vec<Vec<f64>>> {
            Ok((1..traj.len()).map(|t| traj.states[t].iter().zip(&self.0).map(|(s, o)| s + o).collect()).collect())
        }
    }

    #[test]
    fn ratios_and_flags() {
        let d = generate_dataset::<f64>(EnvId::DronePayload, 3, 8, 0).unwrap();
        let names = EnvId::DronePayload.feature_names();
        let stateful = Fixed(vec![0.1, 0.0, 0.2, 0.2, 0.2, 0.2, 0.2]);
        let stateless = Fixed(vec![0.2, 0.3, 0.2, -0.4, 0.2, 0.2, 0.2]);
        let t = error_ratio_table(&d, &stateful, &stateless, names).unwrap();
        assert!((t.rows[0].ratio.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(t.rows[1].status, RatioStatus::Saturated);
        assert_eq!(t.rows[1].ratio, None);
        assert!((t.rows[3].ratio.unwrap() - 2.0).abs() < 1e-12);
        assert!((t.rows[2].ratio.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(t.rows[6].status, RatioStatus::Static);
        assert!(t.rows.iter().all(|r| r.stateful_error >= 0.0 && r.stateless_error >= 0.0));
        assert!(matches!(t.max_row().unwrap().feature.as_str(), "x" | "vz"));
    }

    #[test]
    fn identical_predictors_give_unit_ratios() {
        let d = generate_dataset::<f64>(EnvId::Arm, 4, 10, 1).unwrap();
        let p = Fixed(vec![0.01, -0.02, 0.03, 0.5]);
        let t = error_ratio_table(&d, &p, &p, EnvId::Arm.feature_names()).unwrap();
        assert!(t.rows.iter().all(|r| r.ratio == Some(1.0)));
    }

    #[test]
    fn csv_leaves_undefined_ratios_empty() {
        let table = ErrorRatioTable {
            rows: vec![ErrorRatioRow { feature: "b".into(), stateless_error: 0.5, stateful_error: 0.0, ratio: None, status: RatioStatus::Saturated }],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_error_ratio_csv(&p, &table).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "feature,stateless_error,stateful_error,ratio,status\nb,0.5,0,,saturated\n");
    }
}
