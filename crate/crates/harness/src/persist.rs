//! File formats written and read by the CLI. Every file starts with `#`
//! comment lines holding the command and the resolved configuration, so a
//! result can always be traced back to the settings that produced it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hev_core::driver_cycle::{load_cycle, CycleError, DriveCycle};
use hev_core::qlearning::{Episode, LearningRecord, QTable};
use hev_core::units::mps_to_mph;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// Comment preamble text (without the `# ` prefixes).
pub fn preamble(command: &str, cfg: &ExperimentConfig) -> String {
    format!("hevq {command}\nresolved config:\n{}", cfg.to_toml())
}

pub fn comment_block(preamble: &str) -> String {
    preamble.lines().map(|l| if l.is_empty() { "#\n".to_string() } else { format!("# {l}\n") }).collect()
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// Missing or unreadable files are I/O failures; malformed contents are
/// validation failures.
pub fn read_cycle(path: &Path) -> Result<DriveCycle> {
    load_cycle(path).map_err(|e| match e {
        CycleError::Io { message, .. } => {
            HarnessError::io(path, std::io::Error::new(std::io::ErrorKind::Other, message))
        }
        other => HarnessError::Validation(format!("{}: {other}", path.display())),
    })
}

pub fn read_qtable(path: &Path) -> Result<QTable> {
    let text = read_file(path)?;
    QTable::from_text(&text).map_err(|e| HarnessError::Validation(format!("{}: {e}", path.display())))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| format!("{x:?}"))
}

pub fn curve_csv(records: &[LearningRecord], preamble: &str) -> String {
    let mut out = comment_block(preamble);
    out.push_str("iteration,exploratory_reward_sum,greedy_reward_sum,greedy_mpg,updated\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{},{}",
            r.iteration,
            r.exploratory_reward_sum,
            r.greedy_reward_sum,
            fmt_opt(r.greedy_mpg),
            u8::from(r.updated)
        );
    }
    out
}

/// Column-wise mean over seeds. `updated` becomes the fraction of seeds
/// that updated in that iteration; mpg is averaged over seeds that have one.
pub fn mean_curve_csv(runs: &[&[LearningRecord]], preamble: &str) -> String {
    let mut out = comment_block(preamble);
    out.push_str("iteration,exploratory_reward_sum,greedy_reward_sum,greedy_mpg,updated\n");
    let len = runs.iter().map(|r| r.len()).min().unwrap_or(0);
    let n = runs.len() as f64;
    for i in 0..len {
        let mean = |f: &dyn Fn(&LearningRecord) -> f64| runs.iter().map(|r| f(&r[i])).sum::<f64>() / n;
        let mpgs: Vec<f64> = runs.iter().filter_map(|r| r[i].greedy_mpg).collect();
        let mpg = (!mpgs.is_empty()).then(|| mpgs.iter().sum::<f64>() / mpgs.len() as f64);
        let _ = writeln!(
            out,
            "{},{:?},{:?},{},{:?}",
            i + 1,
            mean(&|r| r.exploratory_reward_sum),
            mean(&|r| r.greedy_reward_sum),
            fmt_opt(mpg),
            mean(&|r| f64::from(u8::from(r.updated)))
        );
    }
    out
}

pub fn episode_csv(ep: &Episode, preamble: &str) -> String {
    let mut out = comment_block(preamble);
    out.push_str(
        "time_s,ref_speed_mps,speed_mps,soc,gear,speed_idx,torque_idx,action_idx,total_demand_nm,\
brake_torque_nm,engine_torque_nm,em_torque_nm,fuel_rate_kg_s,battery_power_w,reward\n",
    );
    for s in &ep.steps {
        let action = s.action.map_or(-1, |a| a as i64);
        let _ = writeln!(
            out,
            "{:?},{:?},{:?},{:?},{},{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            s.time,
            s.ref_speed,
            s.speed,
            s.soc,
            s.gear,
            s.state.speed,
            s.state.torque,
            action,
            s.total_demand,
            s.brake_torque,
            s.engine_torque,
            s.em_torque,
            s.fuel_rate,
            s.battery_power,
            s.reward
        );
    }
    out
}

/// Header of the one-line episode summaries.
pub const SUMMARY_HEADER: &str =
    "cycle,controller,mpg,final_soc,reward_sum,fuel_kg,distance_m,max_tracking_error_mph,rms_tracking_error_mph\n";

pub fn summary_row(cycle: &str, controller: &str, ep: &Episode) -> String {
    format!(
        "{cycle},{controller},{},{:?},{:?},{:?},{:?},{:?},{:?}\n",
        fmt_opt(ep.mpg),
        ep.final_soc,
        ep.reward_sum,
        ep.fuel_mass,
        ep.distance,
        mps_to_mph(ep.max_tracking_error),
        mps_to_mph(ep.rms_tracking_error)
    )
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: usize, ex: f64, g: f64, mpg: Option<f64>, up: bool) -> LearningRecord {
        LearningRecord { iteration: i, exploratory_reward_sum: ex, greedy_reward_sum: g, greedy_mpg: mpg, updated: up }
    }

    #[test]
    fn curve_layout() {
        let text = curve_csv(&[rec(1, 2.5, 3.0, Some(40.0), true), rec(2, 1.0, 3.0, None, false)], "a\n\nb");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[..3], ["# a", "#", "# b"]);
        assert_eq!(lines[3], "iteration,exploratory_reward_sum,greedy_reward_sum,greedy_mpg,updated");
        assert_eq!(lines[4], "1,2.5,3.0,40.0,1");
        assert_eq!(lines[5], "2,1.0,3.0,NaN,0");
    }

    #[test]
    fn mean_curve_averages_columns() {
        let a = [rec(1, 1.0, 2.0, Some(10.0), true)];
        let b = [rec(1, 3.0, 4.0, None, false)];
        let text = mean_curve_csv(&[&a, &b], "x");
        assert_eq!(text.lines().last().unwrap(), "1,2.0,3.0,10.0,0.5");
    }
}
