//! Per-trial records, their CSV form, and the NMSE-versus-P plot.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ChannelRealization;

/// One trial of one scheme. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scheme: String,
    pub kernel_kind: String,
    #[serde(rename = "N")]
    pub num_ports: usize,
    #[serde(rename = "M")]
    pub antennas_per_slot: usize,
    #[serde(rename = "P")]
    pub num_timeslots: usize,
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub nmse: f64,
    pub wall_time_stage2_ns: u64,
}

pub const CSV_HEADER: &str = "scheme,kernel_kind,N,M,P,snr_db,trial,seed,nmse,wall_time_stage2_ns";

/// `||h - h_hat||^2 / ||h||^2` for a single trial.
pub fn nmse(truth: &ChannelRealization, estimate: &ChannelRealization) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            what: "estimate length",
            expected: truth.len(),
            found: estimate.len(),
        });
    }
    let denom = truth.power();
    if !(denom > 0.0) {
        return Err(Error::ZeroNormTruth);
    }
    Ok((&truth.values - &estimate.values).norm_squared() / denom)
}

pub fn write_csv<W: std::io::Write>(records: &[ResultRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[ResultRecord], path: &Path) -> Result<()> {
    write_csv(records, fs::File::create(path)?)
}

pub fn parse_csv<R: std::io::Read>(input: R) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<&str> = r.headers()?.iter().collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::InvalidArgument(format!(
            "unexpected CSV header `{}`",
            header.join(",")
        )));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    parse_csv(fs::File::open(path)?)
}

/// Mean NMSE of one series at one `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryPoint {
    pub num_timeslots: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; 0 for a single trial.
    pub std_err: f64,
    pub count: usize,
}

/// All points sharing scheme, kernel and SNR, sorted by `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub scheme: String,
    pub kernel_kind: String,
    pub snr_db: f64,
    pub points: Vec<SummaryPoint>,
}

impl Series {
    pub fn label(&self, with_snr: bool) -> String {
        let mut s = if self.kernel_kind == "none" {
            self.scheme.clone()
        } else {
            format!("{} ({})", self.scheme, self.kernel_kind)
        };
        if with_snr {
            write!(s, " @ {} dB", self.snr_db).unwrap();
        }
        s
    }
}

/// Groups records into series in order of first appearance.
pub fn summarize(records: &[ResultRecord]) -> Vec<Series> {
    let mut series: Vec<(Series, Vec<(usize, Vec<f64>)>)> = Vec::new();
    for r in records {
        let idx = match series.iter().position(|(s, _)| {
            s.scheme == r.scheme && s.kernel_kind == r.kernel_kind && s.snr_db.to_bits() == r.snr_db.to_bits()
        }) {
            Some(i) => i,
            None => {
                series.push((
                    Series {
                        scheme: r.scheme.clone(),
                        kernel_kind: r.kernel_kind.clone(),
                        snr_db: r.snr_db,
                        points: Vec::new(),
                    },
                    Vec::new(),
                ));
                series.len() - 1
            }
        };
        let groups = &mut series[idx].1;
        match groups.iter_mut().find(|(p, _)| *p == r.num_timeslots) {
            Some((_, v)) => v.push(r.nmse),
            None => groups.push((r.num_timeslots, vec![r.nmse])),
        }
    }
    series
        .into_iter()
        .map(|(mut s, mut groups)| {
            groups.sort_by_key(|(p, _)| *p);
            s.points = groups
                .into_iter()
                .map(|(p, v)| {
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let std_err = if v.len() > 1 {
                        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
                    } else {
                        0.0
                    };
                    SummaryPoint {
                        num_timeslots: p,
                        mean,
                        std_err,
                        count: v.len(),
                    }
                })
                .collect();
            s
        })
        .collect()
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
/// Means below this are drawn at this value.
const NMSE_FLOOR: f64 = 1e-12;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Mean NMSE against `P`, log-10 y axis, one polyline per series.
///
/// Every data point is a `<circle>` carrying `data-series`, `data-p` and
/// `data-nmse` attributes.
pub fn render_svg(records: &[ResultRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let series = summarize(records);
    let with_snr = series
        .iter()
        .any(|s| s.snr_db.to_bits() != series[0].snr_db.to_bits());

    let all = series.iter().flat_map(|s| s.points.iter());
    let p_min = all.clone().map(|p| p.num_timeslots).min().unwrap() as f64;
    let p_max = all.clone().map(|p| p.num_timeslots).max().unwrap() as f64;
    let y_lo = all.clone().map(|p| p.mean.max(NMSE_FLOOR).log10()).fold(f64::INFINITY, f64::min);
    let y_hi = all.map(|p| p.mean.max(NMSE_FLOOR).log10()).fold(f64::NEG_INFINITY, f64::max);
    let (dec_lo, dec_hi) = (y_lo.floor(), y_hi.ceil().max(y_lo.floor() + 1.0));
    let (x_lo, x_hi) = if p_max > p_min { (p_min, p_max) } else { (p_min - 1.0, p_max + 1.0) };

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |p: f64| LEFT + (p - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |v: f64| TOP + (dec_hi - v.max(NMSE_FLOOR).log10()) / (dec_hi - dec_lo) * plot_h;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    )
    .unwrap();

    let mut decade = dec_lo as i32;
    while decade as f64 <= dec_hi {
        let y = sy(10f64.powi(decade));
        writeln!(
            s,
            r##"<line class="grid" x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##,
            LEFT + plot_w
        )
        .unwrap();
        writeln!(
            s,
            r#"<text class="ytick" x="{:.2}" y="{:.2}" text-anchor="end">1e{decade}</text>"#,
            LEFT - 6.0,
            y + 4.0
        )
        .unwrap();
        decade += 1;
    }
    let mut ticks: Vec<usize> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.num_timeslots))
        .collect();
    ticks.sort_unstable();
    ticks.dedup();
    for p in ticks {
        let x = sx(p as f64);
        writeln!(
            s,
            r#"<text class="xtick" x="{x:.2}" y="{:.2}" text-anchor="middle">{p}</text>"#,
            TOP + plot_h + 18.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">number of pilot timeslots P</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">NMSE (log scale)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    )
    .unwrap();

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let label = escape(&ser.label(with_snr));
        let points: Vec<String> = ser
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.num_timeslots as f64), sy(p.mean)))
            .collect();
        writeln!(
            s,
            r#"<polyline data-series="{label}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        )
        .unwrap();
        for p in &ser.points {
            writeln!(
                s,
                r#"<circle data-series="{label}" data-p="{}" data-nmse="{:e}" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                p.num_timeslots,
                p.mean,
                sx(p.num_timeslots as f64),
                sy(p.mean)
            )
            .unwrap();
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        writeln!(
            s,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{label}</text></g>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_svg(records: &[ResultRecord], path: &Path) -> Result<()> {
    fs::write(path, render_svg(records)?)?;
    Ok(())
}
