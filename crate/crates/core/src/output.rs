//! CSV and SVG serialization of simulation runs. Lanes are written 1-based.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::wrap_position;

pub const TRAJECTORY_HEADER: &str = "t,vehicle_id,lane,x_mod_L,v";
pub const EVENT_HEADER: &str = "t,vehicle_id,from,to,margin";

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const LANE_COUNT_FILE: &str = "lane_counts.csv";
pub const EVENT_FILE: &str = "events.csv";
pub const PLOT_FILE: &str = "trajectory.svg";

/// Most points drawn per vehicle track in the plot.
const PLOT_POINTS: usize = 1500;

pub fn lane_count_header(lanes: usize) -> String {
    let mut s = String::from("t");
    for j in 1..=lanes {
        write!(s, ",N_{j}").unwrap();
    }
    s
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut s = String::from(TRAJECTORY_HEADER);
    s.push('\n');
    for sample in &traj.samples {
        for v in &sample.vehicles {
            let x = wrap_position(v.x, traj.length);
            writeln!(s, "{},{},{},{},{}", sample.time, v.id, v.lane + 1, x, v.v).unwrap();
        }
    }
    s
}

pub fn lane_count_csv(traj: &Trajectory) -> String {
    let mut s = lane_count_header(traj.lane_count);
    s.push('\n');
    for sample in &traj.samples {
        write!(s, "{}", sample.time).unwrap();
        for c in &sample.lane_counts {
            write!(s, ",{c}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Rejected candidates are not logged, so every row is an accepted move.
/// A move into an empty lane has no incentive margin and leaves it blank.
pub fn event_csv(traj: &Trajectory) -> String {
    let mut s = String::from(EVENT_HEADER);
    s.push('\n');
    for e in &traj.events {
        write!(s, "{},{},{},{},", e.time, e.vehicle_id, e.from + 1, e.to + 1).unwrap();
        if let Some(m) = e.margin {
            write!(s, "{m}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// One panel per lane of `x mod L` against time, then a panel of lane
/// occupancy. A vehicle's track is broken where it wraps around the ring
/// and where it leaves the lane.
pub fn trajectory_svg(traj: &Trajectory) -> String {
    const WIDTH: f64 = 900.0;
    const PANEL: f64 = 220.0;
    const MARGIN: f64 = 50.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

    let lanes = traj.lane_count;
    let height = (lanes + 1) as f64 * (PANEL + MARGIN) + MARGIN;
    let (t0, t1) = match (traj.samples.first(), traj.samples.last()) {
        (Some(a), Some(b)) => (a.time, b.time),
        _ => (0.0, 0.0),
    };
    let span = if t1 > t0 { t1 - t0 } else { 1.0 };
    let plot_w = WIDTH - 2.0 * MARGIN;
    let px = |t: f64| MARGIN + (t - t0) / span * plot_w;
    let top = |panel: usize| MARGIN + panel as f64 * (PANEL + MARGIN);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for panel in 0..=lanes {
        let y = top(panel);
        writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{y}" width="{plot_w}" height="{PANEL}" fill="none" stroke="black"/>"#
        )
        .unwrap();
        let title = if panel < lanes { format!("lane {}: x mod L [m]", panel + 1) } else { "vehicles per lane".into() };
        writeln!(s, r#"<text x="{MARGIN}" y="{}">{title}</text>"#, y - 6.0).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">t = {t1} s</text>"#,
            WIDTH - MARGIN,
            y + PANEL + 16.0
        )
        .unwrap();
    }

    let every = traj.samples.len().div_ceil(PLOT_POINTS).max(1);
    let picked: Vec<_> = traj.samples.iter().step_by(every).collect();
    let length = traj.length;
    let py = |lane: usize, x: f64| top(lane) + PANEL - x / length * PANEL;

    let mut ids: Vec<usize> = picked.iter().flat_map(|s| s.vehicles.iter().map(|v| v.id)).collect();
    ids.sort_unstable();
    ids.dedup();
    for id in ids {
        let mut track: Vec<(f64, f64)> = Vec::new();
        let mut last: Option<(usize, f64)> = None;
        let flush = |track: &mut Vec<(f64, f64)>, s: &mut String| {
            if track.len() > 1 {
                s.push_str(r##"<polyline fill="none" stroke="#555" stroke-width="0.6" points=""##);
                for (i, (x, y)) in track.iter().enumerate() {
                    if i > 0 {
                        s.push(' ');
                    }
                    write!(s, "{x:.2},{y:.2}").unwrap();
                }
                s.push_str("\"/>\n");
            }
            track.clear();
        };
        for sample in &picked {
            let Some(v) = sample.vehicles.iter().find(|v| v.id == id) else {
                flush(&mut track, &mut s);
                last = None;
                continue;
            };
            let x = wrap_position(v.x, length);
            if let Some((lane, prev_x)) = last {
                if lane != v.lane || x < prev_x - 0.5 * length {
                    flush(&mut track, &mut s);
                }
            }
            track.push((px(sample.time), py(v.lane, x)));
            last = Some((v.lane, x));
        }
        flush(&mut track, &mut s);
    }

    let total = picked.first().map_or(1, |s| s.lane_counts.iter().sum::<usize>().max(1)) as f64;
    let max_count = picked
        .iter()
        .flat_map(|s| s.lane_counts.iter().copied())
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let scale = max_count.max(total / lanes.max(1) as f64);
    for lane in 0..lanes {
        let color = COLORS[lane % COLORS.len()];
        write!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points=""#).unwrap();
        for (i, sample) in picked.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let y = top(lanes) + PANEL - sample.lane_counts[lane] as f64 / scale * PANEL;
            write!(s, "{:.2},{:.2}", px(sample.time), y).unwrap();
        }
        s.push_str("\"/>\n");
        writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">N_{}</text>"#,
            WIDTH - MARGIN + 6.0,
            top(lanes) + 14.0 * (lane + 1) as f64,
            lane + 1
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub trajectory: PathBuf,
    pub lane_counts: PathBuf,
    pub events: PathBuf,
    pub plot: Option<PathBuf>,
}

/// Writes the three CSV files, and the plot if `svg`, into `dir`
/// (created if missing).
pub fn write_outputs(traj: &Trajectory, dir: &Path, svg: bool) -> Result<OutputPaths> {
    if traj.samples.is_empty() {
        return Err(Error::Config("nothing to write: trajectory has no samples".into()));
    }
    fs::create_dir_all(dir)?;
    let paths = OutputPaths {
        trajectory: dir.join(TRAJECTORY_FILE),
        lane_counts: dir.join(LANE_COUNT_FILE),
        events: dir.join(EVENT_FILE),
        plot: svg.then(|| dir.join(PLOT_FILE)),
    };
    fs::write(&paths.trajectory, trajectory_csv(traj))?;
    fs::write(&paths.lane_counts, lane_count_csv(traj))?;
    fs::write(&paths.events, event_csv(traj))?;
    if let Some(p) = &paths.plot {
        fs::write(p, trajectory_svg(traj))?;
    }
    Ok(paths)
}
