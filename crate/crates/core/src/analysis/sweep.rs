use serde::{Deserialize, Serialize};
use std::path::Path;

use super::csv::write_rows;
use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::worldmodel::{imagine_rollout, Rollout, WorldModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SweepSeries<T: Scalar> {
    pub hidden: f64,
    pub rollout: Rollout<T>,
}

/// Imagined rollouts from one start state and action sequence, once per
/// conditioning trajectory. Each trajectory's hidden value tags its series.
pub fn imagine_sweep<T: Scalar>(model: &WorldModel<T>, start: &[T], actions: &[Vec<T>], conditioning: &[Trajectory<T>]) -> Result<Vec<SweepSeries<T>>> {
    if conditioning.is_empty() {
        return Err(Error::InsufficientData("no conditioning trajectories".into()));
    }
    conditioning
        .iter()
        .map(|traj| {
            Ok(SweepSeries {
                hidden: traj.hidden.to_f64_lossy(),
                rollout: imagine_rollout(model, start, actions, traj)?,
            })
        })
        .collect()
}

/// Long-format rows `hidden,source,step,<features...>`, steps aligned across
/// series. `source` is `imagined` for model rollouts and `simulated` for the
/// optional ground-truth trajectories.
pub fn write_sweep_csv<T: Scalar>(path: &Path, series: &[SweepSeries<T>], simulated: &[Trajectory<T>], feature_names: &[&str]) -> Result<()> {
    let mut header = vec!["hidden".to_string(), "source".into(), "step".into()];
    header.extend(feature_names.iter().map(|s| s.to_string()));
    let row = |hidden: f64, source: &str, t: usize, x: &[T]| {
        let mut row = vec![hidden.to_string(), source.to_string(), t.to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        row
    };
    let imagined = series
        .iter()
        .flat_map(|s| s.rollout.states.iter().enumerate().map(move |(t, x)| row(s.hidden, "imagined", t, x)));
    let truth = simulated
        .iter()
        .flat_map(|tr| tr.states.iter().enumerate().map(move |(t, x)| row(tr.hidden.to_f64_lossy(), "simulated", t, x)));
    write_rows(path, &header, imagined.chain(truth))
}
