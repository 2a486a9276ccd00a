use std::io::Write;

use densekrp::Breakdown;

use crate::error::Result;

/// Column order of every CSV the harness writes.
pub const HEADER: [&str; 19] = [
    "kind",
    "dims",
    "rank",
    "mode",
    "algo",
    "order",
    "threads",
    "trials",
    "stat",
    "iteration",
    "fit",
    "matmul",
    "krp_full",
    "krp_partial",
    "matvec",
    "reduce",
    "reorder",
    "other",
    "total",
];

/// One CSV row. Text fields that do not apply are left empty.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    /// `mttkrp`, `cp` or `krp`.
    pub kind: &'static str,
    pub dims: Vec<usize>,
    pub rank: usize,
    /// Mode number, `all` for CP summary rows, empty for KRP rows.
    pub mode: String,
    pub algo: String,
    pub order: String,
    pub threads: usize,
    pub trials: usize,
    pub stat: String,
    pub iteration: Option<usize>,
    pub fit: Option<f64>,
    pub times: Breakdown,
}

impl BenchRecord {
    pub fn fields(&self) -> Vec<String> {
        let t = &self.times;
        let mut out = vec![
            self.kind.to_string(),
            format_dims(&self.dims),
            self.rank.to_string(),
            self.mode.clone(),
            self.algo.clone(),
            self.order.clone(),
            self.threads.to_string(),
            self.trials.to_string(),
            self.stat.clone(),
            self.iteration.map(|i| i.to_string()).unwrap_or_default(),
            self.fit.map(format_g9).unwrap_or_default(),
        ];
        out.extend(t.categories().iter().chain([&t.total]).map(|&v| format_g9(v)));
        out
    }
}

pub fn format_dims(dims: &[usize]) -> String {
    dims.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

/// Nine significant digits in the style of C's `%.9g`.
pub fn format_g9(v: f64) -> String {
    const DIGITS: i32 = 9;
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV output with the fixed header written up front.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(HEADER)?;
        Ok(CsvSink { writer })
    }

    pub fn write(&mut self, record: &BenchRecord) -> Result<()> {
        self.writer.write_record(record.fields())?;
        Ok(())
    }

    pub fn write_all(&mut self, records: &[BenchRecord]) -> Result<()> {
        records.iter().try_for_each(|r| self.write(r))
    }

    pub fn finish(mut self) -> Result<W> {
        self.writer.flush()?;
        self.writer
            .into_inner()
            .map_err(|e| crate::error::BenchError::Io(e.into_error()))
    }
}
