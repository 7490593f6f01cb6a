//! Report, CSV and SVG writers.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::sim::{SimulationTrace, Trajectory};

/// Formats finite floats with 17 significant digits, trailing zeros
/// trimmed; positional notation for decimal exponents in [-5, 17).
pub fn format_f64(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = mantissa.strip_prefix('-').map_or(("", mantissa), |m| ("-", m));
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    if (-5..17).contains(&exp) {
        let point = exp + 1;
        let body = if point <= 0 {
            format!("0.{}{}", "0".repeat((-point) as usize), digits)
        } else if (point as usize) >= digits.len() {
            format!("{}{}.0", digits, "0".repeat(point as usize - digits.len()))
        } else {
            format!("{}.{}", &digits[..point as usize], &digits[point as usize..])
        };
        format!("{sign}{body}")
    } else {
        let (head, tail) = digits.split_at(1);
        let tail = if tail.is_empty() { "0" } else { tail };
        format!("{sign}{head}.{tail}e{exp}")
    }
}

/// Pretty JSON with fixed float formatting; non-finite values become null.
struct FixedFloats<'a>(serde_json::ser::PrettyFormatter<'a>);

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format_f64(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON is UTF-8")
}

fn csv_bytes(rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("in-memory CSV");
    }
    w.into_inner().expect("in-memory CSV")
}

/// Columns `t, v, vprime`.
pub fn trajectory_csv(tr: &Trajectory) -> Vec<u8> {
    let header = std::iter::once(vec!["t".to_string(), "v".into(), "vprime".into()]);
    let body = (0..tr.len()).map(|i| vec![format_f64(tr.t[i]), format_f64(tr.v[i]), format_f64(tr.vprime[i])]);
    csv_bytes(header.chain(body))
}

/// Wide layout: column `t`, then one column of `u` per grid point, headed
/// by its `x` value.
pub fn trace_csv(tr: &SimulationTrace) -> Vec<u8> {
    let header = std::iter::once(std::iter::once("t".to_string()).chain(tr.x.iter().map(|x| format_f64(*x))).collect());
    let body = tr.t.iter().zip(&tr.u).map(|(t, row)| std::iter::once(format_f64(*t)).chain(row.iter().map(|u| format_f64(*u))).collect());
    csv_bytes(header.chain(body))
}

#[derive(Debug, thiserror::Error)]
pub enum TraceCsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("trace CSV: {0}")]
    Format(String),
}

/// Reads a trace written by [`trace_csv`]; scheme metadata is left at its
/// defaults.
pub fn read_trace_csv(bytes: &[u8]) -> Result<SimulationTrace, TraceCsvError> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers()?.clone();
    if header.get(0) != Some("t") || header.len() < 2 {
        return Err(TraceCsvError::Format("first column must be `t` followed by x values".into()));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| TraceCsvError::Format(format!("not a number: `{s}`")));
    let x = header.iter().skip(1).map(num).collect::<Result<Vec<_>, _>>()?;
    let (mut t, mut u) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let vals = rec.iter().map(num).collect::<Result<Vec<_>, _>>()?;
        t.push(vals[0]);
        u.push(vals[1..].to_vec());
    }
    Ok(SimulationTrace { x, t, u, scheme: Default::default() })
}

/// Line plot of `v(t)` with markers at the crossings.
pub fn svg_plot(title: &str, t: &[f64], v: &[f64], crossings: &[f64]) -> String {
    let (w, h, pad) = (800.0, 420.0, 50.0);
    let (t0, t1) = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(1.0));
    let (mut lo, mut hi) = v.iter().filter(|v| v.is_finite()).fold((0.0f64, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    if hi - lo <= 0.0 {
        lo -= 1.0;
        hi += 1.0;
    }
    let span_t = if t1 > t0 { t1 - t0 } else { 1.0 };
    let sx = |x: f64| pad + (x - t0) / span_t * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - lo) / (hi - lo) * (h - 2.0 * pad);
    let step = (t.len() / 4000).max(1);
    let points: Vec<String> = t
        .iter()
        .zip(v)
        .step_by(step)
        .filter(|(_, v)| v.is_finite())
        .map(|(t, v)| format!("{:.2},{:.2}", sx(*t), sy(*v)))
        .collect();
    let mut s = String::new();
    s += &format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n");
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += &format!("<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n", w / 2.0, escape(title));
    s += &format!("<line x1=\"{pad}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", h - pad, w - pad, h - pad);
    s += &format!("<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{}\" stroke=\"black\"/>\n", h - pad);
    if lo < 0.0 && hi > 0.0 {
        s += &format!("<line x1=\"{pad}\" y1=\"{0:.2}\" x2=\"{1}\" y2=\"{0:.2}\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n", sy(0.0), w - pad);
    }
    for (val, x, y, anchor) in [
        (t0, pad, h - pad + 18.0, "start"),
        (t1, w - pad, h - pad + 18.0, "end"),
    ] {
        s += &format!("<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"{anchor}\">t = {}</text>\n", short(val));
    }
    for (val, y) in [(hi, pad), (lo, h - pad)] {
        s += &format!("<text x=\"{}\" y=\"{y:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">{}</text>\n", pad - 4.0, short(val));
    }
    s += &format!("<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{}\"/>\n", points.join(" "));
    for c in crossings {
        s += &format!("<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"crimson\"/>\n", sx(*c), sy(0.0));
    }
    s += "</svg>\n";
    s
}

fn short(v: f64) -> String {
    format!("{v:.4}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
