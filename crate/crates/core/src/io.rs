//! Plain-text file formats.
//!
//! Every file starts with a `# <kind> key=value ...` header followed by CSV
//! lines. Floats are written with Rust's shortest round-trip formatting, so
//! reading a written file reproduces the values exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimation::TransitionCounts;
use crate::jump::{JumpModel, Trajectory};
use crate::markov::{DistributionVector, Partition, StochasticMatrix};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate() }
    }

    /// Next non-blank line with its 1-based number.
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        self.inner.by_ref().map(|(i, l)| (i + 1, l.trim())).find(|(_, l)| !l.is_empty())
    }

    fn expect_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_line().ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected {what}")))
    }
}

struct Header {
    line: usize,
    fields: HashMap<String, String>,
}

impl Header {
    fn parse(lines: &mut Lines, kind: &str) -> Result<Self> {
        let (line, text) = lines.expect_line("a header")?;
        let body = text.strip_prefix('#').ok_or_else(|| Error::parse(line, format!("expected a `# {kind}` header")))?;
        let mut parts = body.split_whitespace();
        match parts.next() {
            Some(k) if k == kind => {}
            other => {
                return Err(Error::parse(
                    line,
                    format!("expected header kind `{kind}`, found `{}`", other.unwrap_or("")),
                ))
            }
        }
        let mut fields = HashMap::new();
        for p in parts {
            let (k, v) =
                p.split_once('=').ok_or_else(|| Error::parse(line, format!("malformed header field `{p}`")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        Ok(Self { line, fields })
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let v = self.fields.get(key).ok_or_else(|| Error::parse(self.line, format!("header is missing `{key}`")))?;
        v.parse().map_err(|_| Error::parse(self.line, format!("header field `{key}` is not an integer: `{v}`")))
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.trim().parse().map_err(|_| Error::parse(line, format!("not a number: `{}`", tok.trim())))
}

fn parse_row_f64(text: &str, line: usize, expected: usize) -> Result<Vec<f64>> {
    let row: Vec<f64> = text.split(',').map(|t| parse_f64(t, line)).collect::<Result<_>>()?;
    if row.len() != expected {
        return Err(Error::parse(line, format!("expected {expected} values, found {}", row.len())));
    }
    Ok(row)
}

fn parse_row_usize(text: &str, line: usize, expected: usize) -> Result<Vec<usize>> {
    let row: Vec<usize> = text
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::parse(line, format!("not a nonnegative integer: `{}`", t.trim()))))
        .collect::<Result<_>>()?;
    if row.len() != expected {
        return Err(Error::parse(line, format!("expected {expected} values, found {}", row.len())));
    }
    Ok(row)
}

fn join<T: std::fmt::Display>(xs: impl IntoIterator<Item = T>) -> String {
    let mut s = String::new();
    for (i, x) in xs.into_iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{x}").unwrap();
    }
    s
}

fn matrix_body(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for row in m.row_iter() {
        s.push_str(&join(row.iter()));
        s.push('\n');
    }
    s
}

fn read_rows(lines: &mut Lines, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let (line, text) = lines.expect_line("a matrix row")?;
        data.extend(parse_row_f64(text, line, cols)?);
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

fn read_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

pub fn format_stochastic(p: &StochasticMatrix) -> String {
    format!("# stochastic n={}\n{}", p.n(), matrix_body(p.matrix()))
}

/// Rows within `1e-6` of unit sum are renormalized; others are rejected.
pub fn parse_stochastic(text: &str) -> Result<StochasticMatrix> {
    let mut lines = Lines::new(text);
    let h = Header::parse(&mut lines, "stochastic")?;
    let n = h.usize("n")?;
    StochasticMatrix::repaired(read_rows(&mut lines, n, n)?)
}

pub fn write_stochastic(path: &Path, p: &StochasticMatrix) -> Result<()> {
    Ok(fs::write(path, format_stochastic(p))?)
}

pub fn read_stochastic(path: &Path) -> Result<StochasticMatrix> {
    parse_stochastic(&read_text(path)?)
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    format!("# matrix rows={} cols={}\n{}", m.nrows(), m.ncols(), matrix_body(m))
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = Lines::new(text);
    let h = Header::parse(&mut lines, "matrix")?;
    read_rows(&mut lines, h.usize("rows")?, h.usize("cols")?)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    Ok(fs::write(path, format_matrix(m))?)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&read_text(path)?)
}

pub fn format_distribution(pi: &DistributionVector) -> String {
    format!("{}\n", join(pi.as_slice()))
}

/// A single CSV line; a leading `#` comment line is ignored.
pub fn parse_distribution(text: &str) -> Result<DistributionVector> {
    let mut lines = Lines::new(text);
    let (mut line, mut body) = lines.expect_line("a distribution")?;
    if body.starts_with('#') {
        (line, body) = lines.expect_line("a distribution")?;
    }
    let probs: Vec<f64> = body.split(',').map(|t| parse_f64(t, line)).collect::<Result<_>>()?;
    let s: f64 = probs.iter().sum();
    if (s - 1.0).abs() < crate::markov::REPAIR_TOL && s > 0.0 {
        return DistributionVector::new(probs.iter().map(|p| p / s).collect());
    }
    DistributionVector::new(probs)
}

pub fn write_distribution(path: &Path, pi: &DistributionVector) -> Result<()> {
    Ok(fs::write(path, format_distribution(pi))?)
}

pub fn read_distribution(path: &Path) -> Result<DistributionVector> {
    parse_distribution(&read_text(path)?)
}

/// Rows with negative `t` carry the pre-history `y_t, u_t`.
pub fn format_trajectory(traj: &Trajectory, n_a: usize, n_c: usize) -> String {
    let mut s = format!("# trajectory N={} n_a={n_a} n_c={n_c}\nt,y,u,mode\n", traj.horizon());
    let pre = traj.pre_y.len().max(traj.pre_u.len());
    for k in (0..pre).rev() {
        let y = traj.pre_y.get(k).copied().unwrap_or(0.0);
        let u = traj.pre_u.get(k).copied().unwrap_or(0.0);
        writeln!(s, "{},{y},{u},", -(k as i64) - 1).unwrap();
    }
    for t in 0..traj.len() {
        let mode = traj.modes.as_ref().map(|m| m[t].to_string()).unwrap_or_default();
        writeln!(s, "{t},{},{},{mode}", traj.y[t], traj.u[t]).unwrap();
    }
    s
}

/// Returns the trajectory with the header's `(n_a, n_c)`.
pub fn parse_trajectory(text: &str) -> Result<(Trajectory, usize, usize)> {
    let mut lines = Lines::new(text);
    let h = Header::parse(&mut lines, "trajectory")?;
    let horizon = h.usize("N")?;
    let (n_a, n_c) = (h.usize("n_a")?, h.usize("n_c")?);
    let (line, cols) = lines.expect_line("the column line")?;
    let names: Vec<&str> = cols.split(',').map(str::trim).collect();
    if names.len() < 3 || names[..3] != ["t", "y", "u"] || (names.len() == 4 && names[3] != "mode") || names.len() > 4 {
        return Err(Error::parse(line, "expected columns `t,y,u` or `t,y,u,mode`"));
    }
    let mut pre: Vec<(i64, f64, f64)> = Vec::new();
    let (mut y, mut u, mut modes) = (Vec::new(), Vec::new(), Vec::new());
    let mut any_mode = false;
    let mut all_modes = true;
    while let Some((line, text)) = lines.next_line() {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(Error::parse(line, format!("expected 3 or 4 fields, found {}", fields.len())));
        }
        let t: i64 = fields[0].parse().map_err(|_| Error::parse(line, format!("bad time index `{}`", fields[0])))?;
        let (yv, uv) = (parse_f64(fields[1], line)?, parse_f64(fields[2], line)?);
        if t < 0 {
            pre.push((t, yv, uv));
            continue;
        }
        if t as usize != y.len() {
            return Err(Error::parse(line, format!("expected t = {}, found {t}", y.len())));
        }
        y.push(yv);
        u.push(uv);
        match fields.get(3).filter(|m| !m.is_empty()) {
            Some(m) => {
                any_mode = true;
                modes.push(m.parse().map_err(|_| Error::parse(line, format!("bad mode `{m}`")))?);
            }
            None => all_modes = false,
        }
    }
    if y.len() != horizon + 1 {
        return Err(Error::parse(0, format!("header says N={horizon} but found {} samples", y.len())));
    }
    if any_mode && !all_modes {
        return Err(Error::parse(0, "mode column is only partially filled"));
    }
    let mut traj = Trajectory::new(y, u, if any_mode { Some(modes) } else { None })?;
    pre.sort_by_key(|&(t, _, _)| std::cmp::Reverse(t));
    for (idx, &(t, yv, uv)) in pre.iter().enumerate() {
        if t != -(idx as i64) - 1 {
            return Err(Error::parse(0, "pre-history rows must be contiguous from t = -1"));
        }
        traj.pre_y.push(yv);
        traj.pre_u.push(uv);
    }
    Ok((traj, n_a, n_c))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory, n_a: usize, n_c: usize) -> Result<()> {
    Ok(fs::write(path, format_trajectory(traj, n_a, n_c))?)
}

pub fn read_trajectory(path: &Path) -> Result<(Trajectory, usize, usize)> {
    parse_trajectory(&read_text(path)?)
}

pub fn format_counts(c: &TransitionCounts) -> String {
    let mut s = format!("# counts n={} N={}\n", c.n(), c.total());
    for row in c.pairs().chunks(c.n()) {
        s.push_str(&join(row));
        s.push('\n');
    }
    s
}

pub fn parse_counts(text: &str) -> Result<TransitionCounts> {
    let mut lines = Lines::new(text);
    let h = Header::parse(&mut lines, "counts")?;
    let (n, total) = (h.usize("n")?, h.usize("N")?);
    let mut pairs = Vec::with_capacity(n * n);
    for _ in 0..n {
        let (line, text) = lines.expect_line("a count row")?;
        pairs.extend(parse_row_usize(text, line, n)?.into_iter().map(|x| x as u64));
    }
    let c = TransitionCounts::from_pairs(n, pairs)?;
    if c.total() != total as u64 {
        return Err(Error::parse(h.line, format!("header says N={total} but counts sum to {}", c.total())));
    }
    Ok(c)
}

pub fn write_counts(path: &Path, c: &TransitionCounts) -> Result<()> {
    Ok(fs::write(path, format_counts(c))?)
}

pub fn read_counts(path: &Path) -> Result<TransitionCounts> {
    parse_counts(&read_text(path)?)
}

pub fn format_partition(p: &Partition) -> String {
    format!("# partition n={} r={}\n{}\n", p.n(), p.r(), join(p.assignment()))
}

pub fn parse_partition(text: &str) -> Result<Partition> {
    let mut lines = Lines::new(text);
    let h = Header::parse(&mut lines, "partition")?;
    let (n, r) = (h.usize("n")?, h.usize("r")?);
    let (line, body) = lines.expect_line("the cluster ids")?;
    Partition::new(parse_row_usize(body, line, n)?, r)
}

pub fn write_partition(path: &Path, p: &Partition) -> Result<()> {
    Ok(fs::write(path, format_partition(p))?)
}

pub fn read_partition(path: &Path) -> Result<Partition> {
    parse_partition(&read_text(path)?)
}

pub fn format_cluster_rows(rows: &DMatrix<f64>) -> String {
    format!("# cluster_rows r={} n={}\n{}", rows.nrows(), rows.ncols(), matrix_body(rows))
}

pub fn parse_cluster_rows(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = Lines::new(text);
    let h = Header::parse(&mut lines, "cluster_rows")?;
    read_rows(&mut lines, h.usize("r")?, h.usize("n")?)
}

pub fn write_cluster_rows(path: &Path, rows: &DMatrix<f64>) -> Result<()> {
    Ok(fs::write(path, format_cluster_rows(rows))?)
}

pub fn read_cluster_rows(path: &Path) -> Result<DMatrix<f64>> {
    parse_cluster_rows(&read_text(path)?)
}

pub fn format_modes(modes: &[usize], n: usize) -> String {
    format!("# modes N={} n={n}\n{}\n", modes.len().saturating_sub(1), join(modes))
}

/// Returns the sequence and the mode count `n`.
pub fn parse_modes(text: &str) -> Result<(Vec<usize>, usize)> {
    let mut lines = Lines::new(text);
    let h = Header::parse(&mut lines, "modes")?;
    let (horizon, n) = (h.usize("N")?, h.usize("n")?);
    let (line, body) = lines.expect_line("the mode sequence")?;
    let modes = parse_row_usize(body, line, horizon + 1)?;
    if let Some(bad) = modes.iter().find(|&&m| m >= n) {
        return Err(Error::parse(line, format!("mode {bad} is out of range for n = {n}")));
    }
    Ok((modes, n))
}

pub fn write_modes(path: &Path, modes: &[usize], n: usize) -> Result<()> {
    Ok(fs::write(path, format_modes(modes, n))?)
}

pub fn read_modes(path: &Path) -> Result<(Vec<usize>, usize)> {
    parse_modes(&read_text(path)?)
}

/// Models are stored as JSON.
pub fn write_model(path: &Path, m: &JumpModel) -> Result<()> {
    Ok(fs::write(path, serde_json::to_string_pretty(m)?)?)
}

pub fn read_model(path: &Path) -> Result<JumpModel> {
    let raw: JumpModel = serde_json::from_str(&read_text(path)?)?;
    // Re-run validation on the deserialized fields.
    JumpModel::new(raw.n_a(), raw.n_c(), raw.params().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stochastic_roundtrip_and_repair() {
        let p = StochasticMatrix::from_row_slice(2, &[0.1, 0.9, 1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert_eq!(parse_stochastic(&format_stochastic(&p)).unwrap(), p);
        let near = "# stochastic n=2\n0.5,0.5000004\n0.25,0.75\n";
        assert!(parse_stochastic(near).is_ok());
        let far = "# stochastic n=2\n0.5,0.51\n0.25,0.75\n";
        assert!(parse_stochastic(far).is_err());
        assert!(matches!(parse_stochastic("# stochastic n=2\n0.5,x\n0.25,0.75\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn header_errors() {
        assert!(parse_partition("# counts n=2 r=1\n0,0\n").is_err());
        assert!(parse_partition("partition n=2 r=1\n0,0\n").is_err());
        assert!(parse_partition("# partition n=2\n0,0\n").is_err());
    }

    #[test]
    fn small_formats_roundtrip() {
        let part = Partition::new(vec![1, 0, 1], 2).unwrap();
        assert_eq!(parse_partition(&format_partition(&part)).unwrap(), part);
        let pi = DistributionVector::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(parse_distribution(&format_distribution(&pi)).unwrap(), pi);
        assert_eq!(parse_distribution("# pi\n0.5,0.5\n").unwrap().as_slice(), &[0.5, 0.5]);
        let modes = vec![0, 2, 1, 1];
        assert_eq!(parse_modes(&format_modes(&modes, 3)).unwrap(), (modes, 3));
        let c = TransitionCounts::from_pairs(2, vec![3, 1, 0, 2]).unwrap();
        assert_eq!(parse_counts(&format_counts(&c)).unwrap(), c);
        let rows = DMatrix::from_row_slice(1, 3, &[0.2, 0.3, 0.5]);
        assert_eq!(parse_cluster_rows(&format_cluster_rows(&rows)).unwrap(), rows);
        let m = DMatrix::from_row_slice(2, 1, &[-1e-300, 3.5]);
        assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
    }

    #[test]
    fn trajectory_roundtrip() {
        let mut t = Trajectory::new(vec![0.1, -2.5, 1e-17], vec![1.0, 0.0, -0.3], Some(vec![0, 1, 1])).unwrap();
        t.pre_y = vec![0.7, 0.2];
        t.pre_u = vec![0.4];
        let (back, n_a, n_c) = parse_trajectory(&format_trajectory(&t, 2, 1)).unwrap();
        assert_eq!((n_a, n_c), (2, 1));
        assert_eq!(back.y, t.y);
        assert_eq!(back.u, t.u);
        assert_eq!(back.modes, t.modes);
        assert_eq!(back.pre_y, t.pre_y);
        assert_eq!(back.pre_u, vec![0.4, 0.0]);

        let bare = "# trajectory N=1 n_a=1 n_c=0\nt,y,u\n0,1,0\n1,2,0\n";
        let (b, _, _) = parse_trajectory(bare).unwrap();
        assert!(b.modes.is_none());
        assert!(parse_trajectory("# trajectory N=2 n_a=1 n_c=0\nt,y,u\n0,1,0\n1,2,0\n").is_err());
    }
}
