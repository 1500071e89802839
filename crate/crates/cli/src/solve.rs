use std::fs;

use anyhow::{Context, Result};
use forage_core::optimal::{discounted_mvt_leave_step, mvt_leave_step, PatchSchedule};

use crate::manifest::write_json;
use crate::{SolveArgs, SolverKind};

pub fn run(args: &SolveArgs) -> Result<()> {
    let schedule = PatchSchedule::new(args.n0, args.lambda);
    match args.kind {
        SolverKind::Mvt => {
            let sol = mvt_leave_step(args.tau, &schedule, args.t_max);
            println!(
                "mvt tau={} leave_step={} average_rate={:.6}",
                sol.travel_steps, sol.leave_step, sol.average_rate
            );
            if let Some(dir) = &args.out {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let stem = format!("mvt_tau{}", args.tau);
                write_json(&dir.join(format!("{stem}.json")), &sol)?;
                let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
                w.write_record(["patch_steps", "average_rate"])?;
                for (t, r) in &sol.rate_curve {
                    w.write_record([t.to_string(), format!("{r:?}")])?;
                }
                w.flush()?;
            }
        }
        SolverKind::Dmvt => {
            let sol = discounted_mvt_leave_step(args.tau, args.gamma, args.horizon, &schedule, args.t_max)?;
            println!(
                "dmvt tau={} gamma={} horizon={} leave_step={}",
                sol.travel_steps, sol.gamma, sol.horizon, sol.leave_step
            );
            if let Some(dir) = &args.out {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let stem = format!("dmvt_tau{}_g{}", args.tau, args.gamma);
                write_json(&dir.join(format!("{stem}.json")), &sol)?;
                let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
                w.write_record(["patch_steps", "indifference_step"])?;
                for (p, m) in &sol.indifference_curve {
                    w.write_record([p.to_string(), m.map_or_else(String::new, |m| m.to_string())])?;
                }
                w.flush()?;
            }
        }
    }
    Ok(())
}
