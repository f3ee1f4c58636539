//! CSV producers, one per subcommand. Every number is written in scientific
//! notation with 17 significant digits.

use npfusion::fast::{sweep_q00, FastFusionExport};
use npfusion::oracle::oracle_asymptote;
use npfusion::sim::{monte_carlo, AnyRule, FusionRule, GaussianSensorModel, MonteCarloReport};
use npfusion::{Alpha, FastFusionParams, Fleet, InitialThreshold, OracleFusion, OutcomeTable};
use serde::Serialize;

use crate::config::{Algorithm, ExperimentConfig};
use crate::error::CliError;
use crate::manifest::Manifest;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn memoryless_detection(fleet: &Fleet, alpha: Alpha) -> Result<f64, CliError> {
    let table = OutcomeTable::for_fleet(fleet)?;
    Ok(table.operating_point(&table.solve_threshold(alpha)).p0)
}

/// Fused ROC and each sensor's own two-segment ROC.
pub fn roc(cfg: &ExperimentConfig) -> Result<Vec<u8>, CliError> {
    let mut w = writer();
    w.write_record(["detector", "segment_index", "q0", "p0", "slope"])?;
    let mut emit = |name: &str, table: &OutcomeTable| -> Result<(), CliError> {
        let curve = table.roc_curve();
        for (i, v) in curve.vertices.iter().enumerate() {
            let slope = if i == 0 { String::new() } else { num(curve.slopes[i - 1]) };
            w.write_record([name, &i.to_string(), &num(v.q0), &num(v.p0), &slope])?;
        }
        Ok(())
    };
    emit("fusion", &OutcomeTable::for_fleet(&cfg.fleet)?)?;
    for (i, s) in cfg.fleet.sensors().iter().enumerate() {
        emit(&format!("sensor_{}", i + 1), &OutcomeTable::enumerate(std::slice::from_ref(s))?)?;
    }
    finish(w)
}

/// Steady-state detection of the three rules for homogeneous fleets of
/// growing size built from the first configured sensor.
pub fn sweep_n(cfg: &ExperimentConfig, n_min: usize, n_max: usize) -> Result<Vec<u8>, CliError> {
    if n_min == 0 || n_min > n_max {
        return Err(CliError::Config(format!("invalid sensor-count range {n_min}..={n_max}")));
    }
    let sensor = cfg.fleet.sensors()[0];
    let mut w = writer();
    w.write_record(["n", "algorithm", "p_steady"])?;
    for n in n_min..=n_max {
        let fleet = Fleet::homogeneous(sensor, n)?;
        let rows = [
            ("memoryless", memoryless_detection(&fleet, cfg.alpha)?),
            ("oracle", oracle_asymptote(&fleet, cfg.alpha)),
            ("fast", FastFusionParams::design(&fleet, cfg.alpha)?.asymptote().p0),
        ];
        for (name, p) in rows {
            w.write_record([&n.to_string(), name, &num(p)])?;
        }
    }
    finish(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrSweep {
    pub amplitude: f64,
    pub y_star: f64,
    pub count: usize,
    pub min_db: f64,
    pub max_db: f64,
    pub step_db: f64,
}

impl Default for SnrSweep {
    fn default() -> Self {
        Self { amplitude: 2.0, y_star: 1.0, count: 4, min_db: -10.0, max_db: 8.0, step_db: 2.0 }
    }
}

/// Steady-state detection versus SNR with `alpha` set to each sensor's `q`.
pub fn sweep_snr(sweep: &SnrSweep) -> Result<Vec<u8>, CliError> {
    if sweep.step_db.is_nan() || sweep.step_db <= 0.0 || sweep.min_db > sweep.max_db || sweep.count == 0 {
        return Err(CliError::Config("invalid SNR sweep range".into()));
    }
    let mut w = writer();
    w.write_record(["snr_db", "algorithm", "p_steady"])?;
    let steps = ((sweep.max_db - sweep.min_db) / sweep.step_db + 1e-9).floor() as usize;
    for i in 0..=steps {
        let snr = sweep.min_db + i as f64 * sweep.step_db;
        let model = GaussianSensorModel::from_snr(sweep.amplitude, snr, sweep.y_star)?;
        let sensor = model.profile()?;
        let fleet = Fleet::homogeneous(sensor, sweep.count)?;
        let alpha = Alpha::new(sensor.q())?;
        let rows = [
            ("sensor", sensor.p()),
            ("memoryless", memoryless_detection(&fleet, alpha)?),
            ("oracle", oracle_asymptote(&fleet, alpha)),
            ("fast", FastFusionParams::design(&fleet, alpha)?.asymptote().p0),
        ];
        for (name, p) in rows {
            w.write_record([&num(snr), name, &num(p)])?;
        }
    }
    finish(w)
}

/// Analytic per-stage trajectories of the oracle rule and of the fast rule
/// from both initial thresholds, optionally with Monte Carlo estimates.
pub fn converge(cfg: &ExperimentConfig, stages: usize, mc: Option<(u64, u64)>) -> Result<Vec<u8>, CliError> {
    let fleet = &cfg.fleet;
    let limit = oracle_asymptote(fleet, cfg.alpha);
    let rules = [
        ("oracle", "none", AnyRule::oracle(fleet, cfg.alpha, stages)?),
        ("fast", "t0", AnyRule::fast(fleet, cfg.alpha, InitialThreshold::T0)?),
        ("fast", "t1", AnyRule::fast(fleet, cfg.alpha, InitialThreshold::T1)?),
    ];
    let mut w = writer();
    let mut header = vec!["stage", "algorithm", "init", "p0", "q0", "abs_err_to_limit"];
    if mc.is_some() {
        header.extend(["p_hat", "q_hat", "p_half_width", "q_half_width"]);
    }
    w.write_record(&header)?;
    for (name, init, rule) in &rules {
        let analytic = rule.analytic(stages)?;
        let report = match mc {
            Some((trials, seed)) => Some(monte_carlo(rule, fleet, stages, trials, seed)?),
            None => None,
        };
        for (i, rec) in analytic.stages.iter().enumerate() {
            let mut row = vec![
                rec.stage.to_string(),
                name.to_string(),
                init.to_string(),
                num(rec.point.p0),
                num(rec.point.q0),
                num((rec.point.p0 - limit).abs()),
            ];
            if let Some(r) = &report {
                let e = &r.stages[i];
                row.extend([num(e.p_hat), num(e.q_hat), num(e.p_half_width), num(e.q_half_width)]);
            }
            w.write_record(&row)?;
        }
    }
    finish(w)
}

/// Default `q00` grid: `points` evenly spaced values inside `(0, alpha)`
/// together with `q_star / 2`, `q_star` and `1.1 q_star`.
pub fn q00_grid(alpha: f64, q_star: f64, points: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = (1..=points).map(|i| alpha * i as f64 / (points + 1) as f64).collect();
    grid.extend([0.5 * q_star, q_star, 1.1 * q_star]);
    grid.retain(|&q| q > 0.0 && q < alpha);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

pub struct Q00Sweep {
    pub csv: Vec<u8>,
    pub skipped: Vec<(f64, npfusion::Error)>,
}

pub fn sweep_q00_csv(cfg: &ExperimentConfig, points: usize) -> Result<Q00Sweep, CliError> {
    let q_star = FastFusionParams::design(&cfg.fleet, cfg.alpha)?.q_star;
    let grid = q00_grid(cfg.alpha.value(), q_star, points);
    let report = sweep_q00(&cfg.fleet, cfg.alpha, &grid);
    let mut w = writer();
    w.write_record(["q00", "p_steady"])?;
    for p in &report.points {
        w.write_record([num(p.q00), num(p.p_infinity)])?;
    }
    Ok(Q00Sweep { csv: finish(w)?, skipped: report.skipped })
}

pub fn build_rule(cfg: &ExperimentConfig, algo: Algorithm, stages: usize) -> Result<AnyRule, CliError> {
    Ok(match algo {
        Algorithm::Oracle => AnyRule::oracle(&cfg.fleet, cfg.alpha, stages)?,
        Algorithm::Fast => AnyRule::fast(&cfg.fleet, cfg.alpha, InitialThreshold::T0)?,
        Algorithm::Memoryless => AnyRule::memoryless(&cfg.fleet, cfg.alpha)?,
    })
}

/// Monte Carlo report preceded by a `# manifest:` comment line.
pub fn montecarlo(
    cfg: &ExperimentConfig,
    algo: Algorithm,
    stages: usize,
    trials: u64,
    seed: u64,
) -> Result<(Vec<u8>, MonteCarloReport), CliError> {
    if trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    let rule = build_rule(cfg, algo, stages)?;
    let report = monte_carlo(&rule, &cfg.fleet, stages, trials, seed)?;
    let analytic = rule.analytic(stages)?;
    let manifest = Manifest::new("montecarlo", cfg).with_run(algo, stages, trials, seed);
    let mut out = format!("# manifest: {}\n", manifest.to_json_line()?).into_bytes();
    let mut w = writer();
    w.write_record(["stage", "p_hat", "q_hat", "trials", "p_half_width", "q_half_width", "p_analytic", "q_analytic"])?;
    for (e, a) in report.stages.iter().zip(&analytic.stages) {
        w.write_record([
            e.stage.to_string(),
            num(e.p_hat),
            num(e.q_hat),
            trials.to_string(),
            num(e.p_half_width),
            num(e.q_half_width),
            num(a.point.p0),
            num(a.point.q0),
        ])?;
    }
    out.extend(finish(w)?);
    Ok((out, report))
}

#[derive(Serialize)]
struct DesignFile {
    fast: FastFusionExport,
    oracle_limit: f64,
}

/// Offline parameters of the fast rule as TOML.
pub fn design(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let params = FastFusionParams::design(&cfg.fleet, cfg.alpha)?;
    let file = DesignFile { fast: params.export(), oracle_limit: oracle_asymptote(&cfg.fleet, cfg.alpha) };
    toml::to_string(&file).map_err(|e| CliError::Serialize(e.to_string()))
}

/// Oracle ordering freeze stage for the configured fleet.
pub fn oracle_freeze_stage(cfg: &ExperimentConfig, stages: usize) -> Result<usize, CliError> {
    Ok(OracleFusion::new(cfg.fleet.clone(), cfg.alpha)?.run(stages)?.freeze_stage)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn number_format_has_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn grid_contains_q_star() {
        let g = q00_grid(0.39, 0.023, 10);
        assert!(g.contains(&0.023));
        assert!(g.iter().all(|&q| q > 0.0 && q < 0.39));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn roc_rows_for_single_sensor() {
        let out = roc(&cfg("[[sensors]]\np = 0.67\nq = 0.33\n")).unwrap();
        let text = String::from_utf8(out).unwrap();
        let fusion_rows = text.lines().filter(|l| l.starts_with("fusion,")).count();
        assert_eq!(fusion_rows, 3);
    }

    #[test]
    fn design_is_valid_toml() {
        let text = design(&cfg("alpha = 0.39\n[[sensors]]\np = 0.61\nq = 0.39\n")).unwrap();
        let value: toml::Table = toml::from_str(&text).unwrap();
        assert!(value["fast"]["lambda0"].as_float().is_some());
    }
}
