//! CSV and JSON writers. Every number is printed in plain decimal notation
//! with 17 significant digits, which reads back to the same `f64`.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::basins::{BasinGrid, Separatrix};
use crate::bifurcation::BranchDiagram;
use crate::dynamics::{FullState, Trajectory};
use crate::planar::PlanarState;

/// `v` in plain decimal with 17 significant digits.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.16e}", v.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let mut out = String::with_capacity(digits.len() + exp.unsigned_abs() as usize + 3);
    if v < 0.0 {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&digits);
    } else if (exp as usize) + 1 >= digits.len() {
        out.push_str(&digits);
        out.extend(std::iter::repeat_n('0', exp as usize + 1 - digits.len()));
    } else {
        let split = exp as usize + 1;
        out.push_str(&digits[..split]);
        out.push('.');
        out.push_str(&digits[split..]);
    }
    out
}

/// Pretty JSON whose floats go through [`format_number`].
struct DecimalFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for DecimalFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_number(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

/// Serialises `value` as indented JSON followed by a newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, DecimalFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON output is UTF-8"))
}

fn row<W: Write>(w: &mut W, values: &[f64], tail: Option<&str>) -> io::Result<()> {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            w.write_all(b",")?;
        }
        w.write_all(format_number(*v).as_bytes())?;
    }
    if let Some(t) = tail {
        write!(w, ",{t}")?;
    }
    w.write_all(b"\n")
}

/// Header `t,s1,x1,s2,x2`.
pub fn write_full_trajectory<W: Write>(
    w: &mut W,
    trajectory: &Trajectory<FullState>,
) -> io::Result<()> {
    writeln!(w, "t,s1,x1,s2,x2")?;
    for (t, s) in trajectory.times.iter().zip(&trajectory.states) {
        row(w, &[*t, s.s1, s.x1, s.s2, s.x2], None)?;
    }
    Ok(())
}

/// Header `t,x1,x2`.
pub fn write_reduced_trajectory<W: Write>(
    w: &mut W,
    trajectory: &Trajectory<PlanarState>,
) -> io::Result<()> {
    writeln!(w, "t,x1,x2")?;
    for (t, s) in trajectory.times.iter().zip(&trajectory.states) {
        row(w, &[*t, s.x1, s.x2], None)?;
    }
    Ok(())
}

/// Header `x1,x2,branch`; one polyline per named branch.
pub fn write_polylines<W: Write>(w: &mut W, lines: &[(&str, &[PlanarState])]) -> io::Result<()> {
    writeln!(w, "x1,x2,branch")?;
    for (name, points) in lines {
        for p in *points {
            row(w, &[p.x1, p.x2], Some(name))?;
        }
    }
    Ok(())
}

/// Header `x1,x2,branch`, branches `plus` and `minus`, each starting at
/// the saddle.
pub fn write_separatrix<W: Write>(w: &mut W, separatrix: &Separatrix) -> io::Result<()> {
    let lines: Vec<(&str, &[PlanarState])> = separatrix
        .branches
        .iter()
        .map(|b| (b.branch.as_str(), b.points.as_slice()))
        .collect();
    write_polylines(w, &lines)
}

/// Header `x1,x2,label`, one row per cell centre.
pub fn write_basins<W: Write>(w: &mut W, grid: &BasinGrid) -> io::Result<()> {
    writeln!(w, "x1,x2,label")?;
    for (p, label) in grid.cells() {
        row(w, &[p.x1, p.x2], Some(&grid.label_name(label)))?;
    }
    Ok(())
}

/// Header `D,kind,x1,x2,stability`, one row per equilibrium per sample.
pub fn write_branches<W: Write>(w: &mut W, diagram: &BranchDiagram) -> io::Result<()> {
    writeln!(w, "D,kind,x1,x2,stability")?;
    for sample in &diagram.samples {
        for e in &sample.equilibria {
            write!(w, "{},{}", format_number(sample.dilution), e.kind)?;
            write!(
                w,
                ",{},{}",
                format_number(e.location.x1),
                format_number(e.location.x2)
            )?;
            writeln!(w, ",{}", e.stability)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::Termination;

    #[test]
    fn decimal_forms() {
        assert_eq!(format_number(0.5), "0.50000000000000000");
        assert_eq!(format_number(-2.5), "-2.5000000000000000");
        assert_eq!(format_number(3.0), "3.0000000000000000");
        assert_eq!(format_number(1e-5), "0.000010000000000000001");
        assert_eq!(format_number(1e20), "100000000000000000000");
        assert_eq!(format_number(12345678901234567.0), "12345678901234568");
        assert_eq!(format_number(0.0), "0.0000000000000000");
        assert_eq!(format_number(-0.0), "0.0000000000000000");
        assert_eq!(format_number(f64::NAN), "NaN");
    }

    #[test]
    fn decimal_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            2f64.sqrt() * 1e-12,
            6.0 * 2f64.sqrt() - 3.0,
            -7.25e9,
            f64::MIN_POSITIVE,
            f64::MAX,
            5e-324,
        ] {
            let s = format_number(v);
            assert!(!s.contains('e'), "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn json_uses_decimal_numbers() {
        let json = to_json(&serde_json::json!({"a": 0.1, "b": [1e-7, 3], "c": null})).unwrap();
        assert!(json.contains("\"a\": 0.10000000000000001"));
        assert!(json.contains("0.000000099999999999999995"));
        assert!(json.contains("3\n") || json.contains("3,"));
        let back: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        assert!(json.ends_with("}\n"));
    }

    #[test]
    fn trajectory_csv() {
        let traj = Trajectory {
            times: vec![0.0, 0.5],
            states: vec![PlanarState::new(1.0, 2.0), PlanarState::new(0.25, 0.125)],
            termination: Termination::TEnd,
        };
        let mut buf = Vec::new();
        write_reduced_trajectory(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2");
        assert_eq!(
            lines[2],
            "0.50000000000000000,0.25000000000000000,0.12500000000000000"
        );
    }
}
