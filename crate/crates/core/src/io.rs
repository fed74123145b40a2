//! File formats: system definitions (TOML or JSON) and CSV/JSON exports.
//!
//! A system file lists the derivation, the control vectors and `Ω`, and
//! names an algebra or gives its brackets with 1-based indices:
//!
//! ```toml
//! derivation = [[0, 1, 0], [0, 0, 0], [0, 0, 0]]
//! controls = [[0, 1, 0]]
//! omega = [[-1, 1]]
//!
//! [algebra]
//! dim = 3
//! step = 2
//! brackets = [{ i = 1, j = 2, coeffs = [0, 0, 1] }]
//! ```
//!
//! Named algebras are `heisenberg`, `heisenberg-opposite`, `engel`,
//! `filiform-<n>` and `abelian-<n>`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{GroupPoint, LieAlgebra};
use crate::dynamics::{
    ControlRange, ControlSystem, LinearControlSystem, PiecewiseControl, Trajectory,
};
use crate::error::{Error, Result};
use crate::heisenberg::SteeringPlan;
use crate::reach::{ControlSetEstimate, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    /// `.json` is JSON, anything else TOML.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub brackets: Vec<BracketEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub derivation: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub omega: Vec<[f64; 2]>,
    pub algebra: AlgebraSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn named_algebra(name: &str) -> Result<LieAlgebra> {
    let sized = |prefix: &str| {
        name.strip_prefix(prefix)
            .and_then(|n| n.parse::<usize>().ok())
    };
    match name {
        "heisenberg" => Ok(LieAlgebra::heisenberg()),
        "heisenberg-opposite" => Ok(LieAlgebra::heisenberg_opposite()),
        "engel" => Ok(LieAlgebra::engel()),
        _ => {
            if let Some(n) = sized("filiform-") {
                LieAlgebra::filiform(n)
            } else if let Some(n) = sized("abelian-") {
                LieAlgebra::abelian(n)
            } else {
                Err(Error::Parse(format!("unknown algebra name `{name}`")))
            }
        }
    }
}

impl AlgebraSection {
    pub fn build(&self) -> Result<LieAlgebra> {
        if let Some(name) = &self.name {
            if self.dim.is_some() || self.step.is_some() || !self.brackets.is_empty() {
                return Err(Error::Parse(
                    "algebra: give either `name` or `dim`/`step`/`brackets`, not both".into(),
                ));
            }
            return named_algebra(name);
        }
        let dim = self
            .dim
            .ok_or_else(|| Error::Parse("algebra: missing `dim`".into()))?;
        let step = self
            .step
            .ok_or_else(|| Error::Parse("algebra: missing `step`".into()))?;
        let mut entries = Vec::with_capacity(self.brackets.len());
        for b in &self.brackets {
            if b.i == 0 || b.j == 0 || b.i > dim || b.j > dim {
                return Err(Error::Parse(format!(
                    "algebra: bracket indices ({}, {}) must lie in 1..={dim}",
                    b.i, b.j
                )));
            }
            entries.push((b.i - 1, b.j - 1, b.coeffs.clone()));
        }
        LieAlgebra::from_brackets(dim, step, &entries)
    }
}

impl SystemFile {
    pub fn build(&self) -> Result<LinearControlSystem> {
        let algebra = self.algebra.build()?;
        let n = algebra.dim();
        if self.derivation.len() != n || self.derivation.iter().any(|r| r.len() != n) {
            return Err(Error::Parse(format!(
                "derivation: expected a {n}x{n} matrix"
            )));
        }
        let a = DMatrix::from_fn(n, n, |i, j| self.derivation[i][j]);
        let controls = self
            .controls
            .iter()
            .map(|c| DVector::from_column_slice(c))
            .collect();
        let omega = ControlRange::new(self.omega.iter().map(|&[lo, hi]| (lo, hi)).collect())?;
        LinearControlSystem::new(algebra, a, controls, omega)
    }

    /// Inverse of [`SystemFile::build`]; the algebra is written out as
    /// brackets.
    pub fn from_system(sys: &LinearControlSystem) -> Self {
        let g = sys.algebra();
        let n = g.dim();
        let mut brackets = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let coeffs: Vec<f64> = (0..n).map(|k| g.constant(i, j, k)).collect();
                if coeffs.iter().any(|&v| v != 0.0) {
                    brackets.push(BracketEntry {
                        i: i + 1,
                        j: j + 1,
                        coeffs,
                    });
                }
            }
        }
        let a = sys.derivation();
        SystemFile {
            derivation: (0..n)
                .map(|i| (0..n).map(|j| a[(i, j)]).collect())
                .collect(),
            controls: sys
                .controls()
                .iter()
                .map(|c| c.as_slice().to_vec())
                .collect(),
            omega: sys
                .omega()
                .bounds()
                .iter()
                .map(|&(lo, hi)| [lo, hi])
                .collect(),
            algebra: AlgebraSection {
                name: None,
                dim: Some(n),
                step: Some(g.step()),
                brackets,
            },
        }
    }
}

/// Parses a system file. Syntax and type errors carry the line number.
pub fn parse_system(text: &str, format: Format) -> Result<LinearControlSystem> {
    let file: SystemFile = match format {
        Format::Toml => toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
            Error::Parse(format!("line {line}: {}", e.message().trim()))
        })?,
        Format::Json => serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {}: {e}", e.line())))?,
    };
    file.build()
}

pub fn load_system(path: &Path) -> Result<LinearControlSystem> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_system(&text, Format::from_path(path)).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn system_to_string(sys: &LinearControlSystem, format: Format) -> String {
    let file = SystemFile::from_system(sys);
    match format {
        Format::Toml => toml::to_string(&file).expect("system files serialize"),
        Format::Json => serde_json::to_string_pretty(&file).expect("system files serialize"),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e
        .position()
        .map(|p| format!("line {}: ", p.line()))
        .unwrap_or_default();
    Error::Parse(format!("{line}{e}"))
}

fn io_err(e: std::io::Error) -> Error {
    Error::Parse(e.to_string())
}

fn header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// `t,x1..xn,u1..um`, one row per recorded time. The control column holds
/// the value in force from that time on.
pub fn write_trajectory_csv<W: Write>(w: W, tr: &Trajectory) -> Result<()> {
    let n = tr.points.first().map_or(0, |p| p.len());
    let m = tr.control.num_channels();
    let mut out = csv::Writer::from_writer(w);
    let mut head = vec!["t".to_string()];
    head.extend(header("x", n));
    head.extend(header("u", m));
    out.write_record(&head).map_err(csv_err)?;
    for (t, p) in tr.times.iter().zip(&tr.points) {
        let mut row = vec![t.to_string()];
        row.extend(p.iter().map(f64::to_string));
        row.extend(tr.control.value_at(*t).iter().map(f64::to_string));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush().map_err(io_err)
}

/// Rows of a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub times: Vec<f64>,
    pub points: Vec<GroupPoint>,
    pub controls: Vec<DVector<f64>>,
}

fn numeric_rows(text: &str) -> Result<(Vec<String>, Vec<(u64, Vec<f64>)>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let head: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {line}: `{f}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, vals));
    }
    Ok((head, rows))
}

pub fn read_trajectory_csv(text: &str) -> Result<TrajectoryTable> {
    let (head, rows) = numeric_rows(text)?;
    let n = head.iter().filter(|h| h.starts_with('x')).count();
    let m = head.iter().filter(|h| h.starts_with('u')).count();
    if head.first().map(String::as_str) != Some("t") || head.len() != 1 + n + m {
        return Err(Error::Parse(
            "line 1: expected header t,x1..xn,u1..um".into(),
        ));
    }
    let mut table = TrajectoryTable {
        times: Vec::new(),
        points: Vec::new(),
        controls: Vec::new(),
    };
    for (_, r) in rows {
        table.times.push(r[0]);
        table.points.push(DVector::from_column_slice(&r[1..1 + n]));
        table.controls.push(DVector::from_column_slice(&r[1 + n..]));
    }
    Ok(table)
}

/// `duration,u1..um`, one row per segment.
pub fn read_control_csv(text: &str) -> Result<PiecewiseControl> {
    let (head, rows) = numeric_rows(text)?;
    if head.first().map(String::as_str) != Some("duration") || head.len() < 2 {
        return Err(Error::Parse(
            "line 1: expected header duration,u1..um".into(),
        ));
    }
    if rows.is_empty() {
        return Err(Error::Parse("control file has no segments".into()));
    }
    let segments = rows
        .into_iter()
        .map(|(_, r)| (r[0], DVector::from_column_slice(&r[1..])))
        .collect();
    PiecewiseControl::new(segments)
}

pub fn write_control_csv<W: Write>(w: W, u: &PiecewiseControl) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut head = vec!["duration".to_string()];
    head.extend(header("u", u.num_channels()));
    out.write_record(&head).map_err(csv_err)?;
    for (d, v) in u.segments() {
        let mut row = vec![d.to_string()];
        row.extend(v.iter().map(f64::to_string));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush().map_err(io_err)
}

/// `x1..xn`, one row per point.
pub fn write_points_csv<W: Write>(w: W, points: &[GroupPoint]) -> Result<()> {
    let n = points.first().map_or(0, |p| p.len());
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header("x", n)).map_err(csv_err)?;
    for p in points {
        out.write_record(p.iter().map(f64::to_string))
            .map_err(csv_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_points_csv(text: &str) -> Result<Vec<GroupPoint>> {
    let (_, rows) = numeric_rows(text)?;
    Ok(rows
        .into_iter()
        .map(|(_, r)| DVector::from_vec(r))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateFile {
    pub cells: Vec<Vec<usize>>,
    pub window: Vec<[f64; 2]>,
    pub resolution: Vec<usize>,
    pub contains_identity_closure: bool,
    pub diameter: f64,
}

impl EstimateFile {
    pub fn new(est: &ControlSetEstimate, spec: &GridSpec) -> Self {
        Self {
            cells: est.multi_indices(spec),
            window: spec.window.iter().map(|&(lo, hi)| [lo, hi]).collect(),
            resolution: spec.resolution.clone(),
            contains_identity_closure: est.contains_identity_closure,
            diameter: est.diameter,
        }
    }
}

pub fn estimate_to_json(est: &ControlSetEstimate, spec: &GridSpec) -> String {
    serde_json::to_string(&EstimateFile::new(est, spec)).expect("estimates serialize")
}

/// `leg,label,duration,u1`, one row per control segment.
pub fn write_plan_csv<W: Write>(w: W, plan: &SteeringPlan) -> Result<()> {
    let m = plan.legs.first().map_or(1, |l| l.control.num_channels());
    let mut out = csv::Writer::from_writer(w);
    let mut head = vec![
        "leg".to_string(),
        "label".to_string(),
        "duration".to_string(),
    ];
    head.extend(header("u", m));
    out.write_record(&head).map_err(csv_err)?;
    for (k, leg) in plan.legs.iter().enumerate() {
        for (d, v) in leg.control.segments() {
            let mut row = vec![(k + 1).to_string(), leg.label.clone(), d.to_string()];
            row.extend(v.iter().map(f64::to_string));
            out.write_record(&row).map_err(csv_err)?;
        }
    }
    out.flush().map_err(io_err)
}

/// The concatenated control of a plan CSV.
pub fn read_plan_csv(text: &str) -> Result<PiecewiseControl> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut segments = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |f: &str| {
            f.parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {line}: `{f}` is not a number")))
        };
        if rec.len() < 4 {
            return Err(Error::Parse(format!(
                "line {line}: expected leg,label,duration,u1.."
            )));
        }
        let d = num(&rec[2])?;
        let v = (3..rec.len())
            .map(|i| num(&rec[i]))
            .collect::<Result<Vec<f64>>>()?;
        segments.push((d, DVector::from_vec(v)));
    }
    PiecewiseControl::new(segments)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub leg: usize,
    pub label: String,
    pub duration: f64,
    pub point: Vec<f64>,
}

pub fn plan_waypoints_json(plan: &SteeringPlan) -> String {
    let wps: Vec<Waypoint> = plan
        .legs
        .iter()
        .enumerate()
        .map(|(k, l)| Waypoint {
            leg: k + 1,
            label: l.label.clone(),
            duration: l.duration(),
            point: l.waypoint.as_slice().to_vec(),
        })
        .collect();
    serde_json::to_string_pretty(&wps).expect("waypoints serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, DEFAULT_STEP};
    use nalgebra::dvector;

    const EXAMPLE1: &str = r#"
derivation = [[0, 1, 0], [0, 0, 0], [0, 0, 0]]
controls = [[0, 1, 0]]
omega = [[-1, 1]]

[algebra]
dim = 3
step = 2
brackets = [{ i = 1, j = 2, coeffs = [0, 0, 1] }]
"#;

    #[test]
    fn toml_system() {
        let sys = parse_system(EXAMPLE1, Format::Toml).unwrap();
        let reference =
            LinearControlSystem::example1(ControlRange::interval(-1.0, 1.0).unwrap()).unwrap();
        assert_eq!(sys.derivation(), reference.derivation());
        assert_eq!(
            sys.algebra().structure_constants(),
            reference.algebra().structure_constants()
        );
    }

    #[test]
    fn named_algebra_and_json() {
        let json = r#"{"derivation": [[0,-1,0],[1,0,0],[0,0,0]], "controls": [[0,1,0]],
            "omega": [[-2, 2]], "algebra": {"name": "heisenberg-opposite"}}"#;
        let sys = parse_system(json, Format::Json).unwrap();
        assert_eq!(sys.algebra(), &LieAlgebra::heisenberg_opposite());
        assert!(named_algebra("filiform-5").is_ok());
        assert!(named_algebra("lorentz").is_err());
    }

    #[test]
    fn system_round_trip() {
        let sys = LinearControlSystem::regular_heisenberg();
        for f in [Format::Toml, Format::Json] {
            let back = parse_system(&system_to_string(&sys, f), f).unwrap();
            assert_eq!(back.derivation(), sys.derivation());
            assert_eq!(back.controls(), sys.controls());
            assert_eq!(back.omega(), sys.omega());
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let broken = EXAMPLE1.replace("omega = [[-1, 1]]", "omega = [[-1, oops]]");
        let err = parse_system(&broken, Format::Toml).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        let err =
            parse_system("{\n\"derivation\": [[0]],\n\"bogus\": 1\n}", Format::Json).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let bad_index = EXAMPLE1.replace("i = 1, j = 2", "i = 0, j = 2");
        assert!(matches!(
            parse_system(&bad_index, Format::Toml),
            Err(Error::Parse(_))
        ));
        let not_derivation = EXAMPLE1.replace(
            "[[0, 1, 0], [0, 0, 0], [0, 0, 0]]",
            "[[1, 0, 0], [0, 1, 0], [0, 0, 1]]",
        );
        assert!(matches!(
            parse_system(&not_derivation, Format::Toml),
            Err(Error::NotADerivation { .. })
        ));
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let sys =
            LinearControlSystem::example2(ControlRange::interval(-1.0, 1.0).unwrap()).unwrap();
        let u = PiecewiseControl::new(vec![(0.5, dvector![1.0]), (0.25, dvector![-0.5])]).unwrap();
        let tr = integrate(&sys, &dvector![0.1, 0.2, 0.3], &u, 0.75, DEFAULT_STEP).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &tr).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x1,x2,x3,u1\n"));
        let table = read_trajectory_csv(&text).unwrap();
        assert_eq!(table.times, tr.times);
        assert_eq!(table.points, tr.points);
        assert_eq!(table.controls[0], dvector![1.0]);
        assert_eq!(table.controls.last().unwrap(), &dvector![-0.5]);
        let err = read_trajectory_csv("t,x1,u1\n0,1,2\n0.1,abc,2\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn control_and_points_csv() {
        let u = read_control_csv("duration,u1\n1.5,0.25\n0.5,-1\n").unwrap();
        assert_eq!(u.segments().len(), 2);
        let mut buf = Vec::new();
        write_control_csv(&mut buf, &u).unwrap();
        assert_eq!(
            read_control_csv(std::str::from_utf8(&buf).unwrap()).unwrap(),
            u
        );
        assert!(read_control_csv("duration,u1\n").is_err());

        let pts = vec![dvector![1.0, 2.0, 3.5], dvector![-0.1, 0.0, 1e-17]];
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x1,x2,x3\n"));
        assert_eq!(read_points_csv(&text).unwrap(), pts);
    }
}
