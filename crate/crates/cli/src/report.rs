//! Run summary and gnuplot script.

use std::fmt::Write;

use multirotor::simkit::trace::column_names;
use multirotor::simkit::{SimConfig, SimTrace};
use multirotor::{Config, Error, Result};

/// Torsion RMS windows: the step response before switch-on and a window of
/// equal length starting 5 s after it.
pub fn windows(cfg: &Config, sim: &SimConfig) -> ([f64; 2], [f64; 2]) {
    let on = sim.mitigation_enable_time;
    let before = [cfg.fig7.step_time.min(on), on];
    let len = before[1] - before[0];
    (before, [on + 5.0, on + 5.0 + len])
}

fn rms(trace: &SimTrace, w: [f64; 2]) -> Result<Option<f64>> {
    match trace.rms_phi_z(w[0], w[1]) {
        Ok(x) => Ok(Some(x)),
        Err(Error::EmptyWindow) => Ok(None),
        Err(e) => Err(e),
    }
}

fn value(x: Option<f64>) -> String {
    x.map_or_else(|| "\"absent\"".to_string(), |x| format!("{x:e}"))
}

pub fn metrics(scenario: &str, cfg: &Config, sim: &SimConfig, trace: &SimTrace) -> Result<String> {
    let on_off = |b: bool| if b { "on" } else { "off" };
    let (before, after) = windows(cfg, sim);
    let full = trace.rms_phi_z(f64::NEG_INFINITY, f64::INFINITY)?;
    let rms_before = rms(trace, before)?;
    let rms_after = if sim.mitigation { rms(trace, after)? } else { None };
    let ratio = match (rms_before, rms_after) {
        (Some(b), Some(a)) if b > 0.0 => Some(a / b),
        _ => None,
    };

    let mut s = String::new();
    writeln!(s, "scenario = \"{scenario}\"").unwrap();
    writeln!(s, "seed = {}", sim.wind.rng_seed).unwrap();
    writeln!(s, "turbulence_intensity = {}", sim.wind.turbulence_intensity).unwrap();
    writeln!(s, "mitigation = \"{}\"", on_off(sim.mitigation)).unwrap();
    writeln!(s, "observer = \"{}\"", on_off(sim.observer)).unwrap();
    writeln!(s, "t_end = {}", sim.t_end).unwrap();
    writeln!(s, "rms_phi_z = {full:e}").unwrap();
    writeln!(s, "window_before = [{}, {}]", before[0], before[1]).unwrap();
    writeln!(s, "rms_phi_z_before = {}", value(rms_before)).unwrap();
    writeln!(s, "window_mitigated = [{}, {}]", after[0], after[1]).unwrap();
    writeln!(s, "rms_phi_z_mitigated = {}", value(rms_after)).unwrap();
    writeln!(s, "rms_ratio = {}", value(ratio)).unwrap();

    let p_rated = cfg.operation.p_rated;
    for i in 0..3 {
        let err: Vec<f64> = trace
            .rows
            .iter()
            .map(|r| r.rotors[i].p_g - (p_rated + r.rotors[i].dp_ref))
            .collect();
        let n = err.len() as f64;
        let mean_abs = err.iter().map(|e| e.abs()).sum::<f64>() / n;
        let rms = (err.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
        let max_abs = err.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        writeln!(s, "\n[power_tracking.rotor{}]", i + 1).unwrap();
        writeln!(s, "mean_abs_error = {mean_abs:e}").unwrap();
        writeln!(s, "rms_error = {rms:e}").unwrap();
        writeln!(s, "max_abs_error = {max_abs:e}").unwrap();
    }
    Ok(s)
}

/// Three stacked panels: rotor winds, tower torsion, generator powers.
pub fn plot_script(sim: &SimConfig, p_rated: f64) -> String {
    let names = column_names();
    let col = |name: &str| names.iter().position(|n| n == name).expect("known column") + 1;
    let series = |prefix: &str, scale: &str, style: &str| {
        (1..=3)
            .map(|i| {
                format!(
                    "'trace.csv' using {}:(${}{scale}) with lines {style} title '{prefix} {i}'",
                    col("time"),
                    col(&format!("{prefix}_{i}"))
                )
            })
            .collect::<Vec<_>>()
    };
    let t = col("time");
    let mut s = String::new();
    writeln!(s, "# gnuplot -p plot.gp").unwrap();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set termoption noenhanced").unwrap();
    writeln!(s, "set multiplot layout 3,1").unwrap();
    writeln!(s, "set grid").unwrap();
    writeln!(s, "set key outside right").unwrap();
    writeln!(s, "set arrow 1 from {0}, graph 0 to {0}, graph 1 nohead dashtype 2", sim.mitigation_enable_time).unwrap();

    writeln!(s, "\nset ylabel 'wind (m/s)'").unwrap();
    writeln!(s, "plot {}", series("v", "", "lw 1").join(", \\\n     ")).unwrap();

    writeln!(s, "\nset ylabel 'phi_z (rad)'").unwrap();
    writeln!(s, "plot 'trace.csv' using {t}:{} with lines lw 1 title 'phi_z'", col("phi_z")).unwrap();

    writeln!(s, "\nset ylabel 'power (MW)'").unwrap();
    writeln!(s, "set xlabel 'time (s)'").unwrap();
    let mut power = series("p_g", "/1e6", "lw 1");
    power.extend((1..=3).map(|i| {
        format!(
            "'trace.csv' using {t}:(({p}+${d})/1e6) with lines dashtype 2 title 'ref {i}'",
            p = format!("{p_rated:e}"),
            d = col(&format!("dp_ref_{i}"))
        )
    }));
    writeln!(s, "plot {}", power.join(", \\\n     ")).unwrap();
    writeln!(s, "\nunset multiplot").unwrap();
    s
}
