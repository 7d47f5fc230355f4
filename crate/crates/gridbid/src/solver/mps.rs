//! Free-format MPS writer and parser.
//!
//! The writer emits NAME / ROWS / COLUMNS (with INTORG-INTEND integrality
//! markers) / RHS / BOUNDS / ENDATA, one coefficient per line, using Rust's
//! shortest round-tripping decimal formatting, so write -> parse reproduces a
//! model bit-for-bit. Every column gets at least one COLUMNS entry (a zero on
//! the objective row if nothing else) and an explicit bound line whenever its
//! bounds differ from the plain `[0, +inf)` default, which sidesteps the
//! integer-default-bound ambiguity between MPS dialects.
//!
//! A constant objective offset is stored, per MPS convention, as a negated
//! RHS entry on the objective row.
//!
//! The parser handles the same sections plus OBJSENSE (MIN only). RANGES is
//! deliberately rejected: range rows have no single dual sign, and nothing in
//! this crate ever emits them.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::lp::{Model, Sense};

#[derive(Debug)]
pub struct MpsError {
    pub line: usize,
    pub msg: String,
}

impl std::fmt::Display for MpsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line > 0 {
            write!(f, "MPS line {}: {}", self.line, self.msg)
        } else {
            write!(f, "MPS: {}", self.msg)
        }
    }
}

impl std::error::Error for MpsError {}

fn werr(msg: impl Into<String>) -> MpsError {
    MpsError { line: 0, msg: msg.into() }
}

fn perr(line: usize, msg: impl Into<String>) -> MpsError {
    MpsError { line, msg: msg.into() }
}

/// Serialize `model` as free-format MPS.
pub fn write_mps(model: &Model) -> Result<String, MpsError> {
    let check_name = |name: &str| -> Result<(), MpsError> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            Err(werr(format!("name {:?} is empty or contains whitespace", name)))
        } else {
            Ok(())
        }
    };
    let check_num = |v: f64, what: &str| -> Result<(), MpsError> {
        if v.is_nan() {
            Err(werr(format!("{} is NaN", what)))
        } else {
            Ok(())
        }
    };

    let mut out = String::new();
    let _ = writeln!(out, "NAME {}", model.name);

    out.push_str("ROWS\n");
    let _ = writeln!(out, " N OBJ");
    for r in model.rows() {
        let name = model.row_name(r);
        check_name(name)?;
        let tag = match model.row_sense(r) {
            Sense::Le => 'L',
            Sense::Eq => 'E',
            Sense::Ge => 'G',
        };
        let _ = writeln!(out, " {} {}", tag, name);
    }

    out.push_str("COLUMNS\n");
    // Row entries grouped per column.
    let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_cols()];
    for r in model.rows() {
        for &(j, v) in model.row_coeffs(r) {
            per_col[j].push((r.0, v));
        }
    }
    let mut in_int = false;
    let mut marker_no = 0usize;
    for j in model.cols() {
        let name = model.col_name(j);
        check_name(name)?;
        let is_int = model.is_integer(j);
        if is_int != in_int {
            let kind = if is_int { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, "    M{} 'MARKER' '{}'", marker_no, kind);
            marker_no += 1;
            in_int = is_int;
        }
        let c = model.col_obj(j);
        check_num(c, &format!("objective coefficient of {}", name))?;
        let mut wrote_any = false;
        if c != 0.0 {
            let _ = writeln!(out, "    {} OBJ {}", name, c);
            wrote_any = true;
        }
        for &(r, v) in &per_col[j.0] {
            check_num(v, &format!("coefficient of {}", name))?;
            let _ = writeln!(out, "    {} {} {}", name, model.row_name(crate::lp::Row(r)), v);
            wrote_any = true;
        }
        if !wrote_any {
            // Declare the column even if it touches nothing.
            let _ = writeln!(out, "    {} OBJ 0", name);
        }
    }
    if in_int {
        let _ = writeln!(out, "    M{} 'MARKER' 'INTEND'", marker_no);
    }

    out.push_str("RHS\n");
    if model.obj_offset != 0.0 {
        check_num(model.obj_offset, "objective offset")?;
        let _ = writeln!(out, "    RHS OBJ {}", -model.obj_offset);
    }
    for r in model.rows() {
        let b = model.row_rhs(r);
        check_num(b, &format!("rhs of {}", model.row_name(r)))?;
        if b != 0.0 {
            let _ = writeln!(out, "    RHS {} {}", model.row_name(r), b);
        }
    }

    out.push_str("BOUNDS\n");
    for j in model.cols() {
        let (lo, up) = model.col_bounds(j);
        let name = model.col_name(j);
        check_num(lo, &format!("lower bound of {}", name))?;
        check_num(up, &format!("upper bound of {}", name))?;
        if lo == 0.0 && up == f64::INFINITY {
            continue; // MPS default
        }
        if lo == up {
            let _ = writeln!(out, " FX BND {} {}", name, lo);
            continue;
        }
        if lo == f64::NEG_INFINITY && up == f64::INFINITY {
            let _ = writeln!(out, " FR BND {}", name);
            continue;
        }
        if lo == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND {}", name);
        } else if lo != 0.0 {
            let _ = writeln!(out, " LO BND {} {}", name, lo);
        }
        if up != f64::INFINITY {
            let _ = writeln!(out, " UP BND {} {}", name, up);
        }
    }

    out.push_str("ENDATA\n");
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Start,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Done,
}

/// Parse free-format MPS text into a [`Model`].
pub fn parse_mps(text: &str) -> Result<Model, MpsError> {
    let mut name = String::from("unnamed");
    let mut obj_row: Option<String> = None;
    let mut rows: Vec<(String, Sense)> = Vec::new();
    let mut row_ix: HashMap<String, usize> = HashMap::new();
    // Column order, (obj coeff, integer flag, row entries).
    let mut col_order: Vec<String> = Vec::new();
    let mut cols: HashMap<String, (f64, bool, Vec<(usize, f64)>)> = HashMap::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut obj_offset = 0.0f64;
    let mut bounds: Vec<(String, String, f64, usize)> = Vec::new(); // (type, col, value, line)

    let mut section = Section::Start;
    let mut in_int = false;

    for (ix, raw) in text.lines().enumerate() {
        let lineno = ix + 1;
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        let starts_flush = !raw.starts_with(' ') && !raw.starts_with('\t');
        let toks: Vec<&str> = line.split_whitespace().collect();

        if starts_flush {
            // Section header.
            match toks[0] {
                "NAME" => {
                    if let Some(n) = toks.get(1) {
                        name = (*n).to_string();
                    }
                    continue;
                }
                "OBJSENSE" => {
                    section = Section::ObjSense;
                    if let Some(&s) = toks.get(1) {
                        check_objsense(lineno, s)?;
                    }
                    continue;
                }
                "ROWS" => {
                    section = Section::Rows;
                    continue;
                }
                "COLUMNS" => {
                    section = Section::Columns;
                    continue;
                }
                "RHS" => {
                    section = Section::Rhs;
                    continue;
                }
                "RANGES" => {
                    return Err(perr(
                        lineno,
                        "RANGES section is not supported; emit two explicit rows instead",
                    ));
                }
                "BOUNDS" => {
                    section = Section::Bounds;
                    continue;
                }
                "ENDATA" => {
                    section = Section::Done;
                    break;
                }
                other => return Err(perr(lineno, format!("unknown section {:?}", other))),
            }
        }

        match section {
            Section::Start => {
                return Err(perr(lineno, "data before any section header"));
            }
            Section::ObjSense => {
                check_objsense(lineno, toks[0])?;
            }
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(perr(lineno, "ROWS entries need a type and a name"));
                }
                let sense = match toks[0] {
                    "N" => {
                        if obj_row.is_some() {
                            return Err(perr(lineno, "second N row; only one objective row is supported"));
                        }
                        obj_row = Some(toks[1].to_string());
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => return Err(perr(lineno, format!("unknown row type {:?}", other))),
                };
                if row_ix.insert(toks[1].to_string(), rows.len()).is_some() {
                    return Err(perr(lineno, format!("duplicate row {:?}", toks[1])));
                }
                rows.push((toks[1].to_string(), sense));
                rhs.push(0.0);
            }
            Section::Columns => {
                if toks.iter().any(|t| *t == "'INTORG'" || *t == "INTORG") {
                    in_int = true;
                    continue;
                }
                if toks.iter().any(|t| *t == "'INTEND'" || *t == "INTEND") {
                    in_int = false;
                    continue;
                }
                if toks.len() < 3 || toks.len() % 2 == 0 {
                    return Err(perr(lineno, "COLUMNS entries are `column row value [row value]`"));
                }
                let col = toks[0];
                let entry = cols.entry(col.to_string()).or_insert_with(|| {
                    col_order.push(col.to_string());
                    (0.0, false, Vec::new())
                });
                entry.1 |= in_int;
                let mut k = 1;
                while k + 1 < toks.len() {
                    let row_name = toks[k];
                    let val: f64 = parse_num(lineno, toks[k + 1])?;
                    if Some(row_name) == obj_row.as_deref() {
                        entry.0 += val;
                    } else {
                        let Some(&r) = row_ix.get(row_name) else {
                            return Err(perr(lineno, format!("unknown row {:?}", row_name)));
                        };
                        entry.2.push((r, val));
                    }
                    k += 2;
                }
            }
            Section::Rhs => {
                if toks.len() < 3 || toks.len() % 2 == 0 {
                    return Err(perr(lineno, "RHS entries are `set row value [row value]`"));
                }
                let mut k = 1;
                while k + 1 < toks.len() {
                    let row_name = toks[k];
                    let val: f64 = parse_num(lineno, toks[k + 1])?;
                    if Some(row_name) == obj_row.as_deref() {
                        obj_offset = -val;
                    } else {
                        let Some(&r) = row_ix.get(row_name) else {
                            return Err(perr(lineno, format!("unknown row {:?}", row_name)));
                        };
                        rhs[r] = val;
                    }
                    k += 2;
                }
            }
            Section::Bounds => {
                let bt = toks[0];
                let needs_value = !matches!(bt, "FR" | "MI" | "PL" | "BV");
                let min_len = if needs_value { 4 } else { 3 };
                if toks.len() < min_len {
                    return Err(perr(lineno, "BOUNDS entries are `type set column [value]`"));
                }
                let val = if needs_value { parse_num(lineno, toks[3])? } else { 0.0 };
                bounds.push((bt.to_string(), toks[2].to_string(), val, lineno));
            }
            Section::Done => unreachable!(),
        }
    }

    if section != Section::Done {
        return Err(perr(0, "missing ENDATA"));
    }
    if obj_row.is_none() {
        return Err(perr(0, "no N (objective) row declared"));
    }

    let mut model = Model::new(&name);
    model.obj_offset = obj_offset;
    let mut col_of: HashMap<&str, crate::lp::Col> = HashMap::new();
    for cname in &col_order {
        let (obj, int, _) = &cols[cname];
        let j = model.add_col(cname, 0.0, f64::INFINITY, *obj);
        if *int {
            model.set_integer(j, true);
        }
        col_of.insert(cname.as_str(), j);
    }
    for (bt, cname, val, lineno) in &bounds {
        let Some(&j) = col_of.get(cname.as_str()) else {
            return Err(perr(*lineno, format!("bound on unknown column {:?}", cname)));
        };
        let (lo, up) = model.col_bounds(j);
        let (lo, up) = match bt.as_str() {
            "LO" => (*val, up),
            "UP" => (lo, *val),
            "FX" => (*val, *val),
            "FR" => (f64::NEG_INFINITY, f64::INFINITY),
            "MI" => (f64::NEG_INFINITY, up),
            "PL" => (lo, f64::INFINITY),
            "BV" => {
                model.set_integer(j, true);
                (0.0, 1.0)
            }
            other => return Err(perr(*lineno, format!("unsupported bound type {:?}", other))),
        };
        model.set_bounds(j, lo, up);
    }
    // Rows, in declaration order, gathering each row's coefficients.
    let mut row_coeffs: Vec<Vec<(crate::lp::Col, f64)>> = vec![Vec::new(); rows.len()];
    for cname in &col_order {
        let (_, _, entries) = &cols[cname];
        let j = col_of[cname.as_str()];
        for &(r, v) in entries {
            row_coeffs[r].push((j, v));
        }
    }
    for (i, (rname, sense)) in rows.iter().enumerate() {
        model.add_row(rname, *sense, rhs[i], &row_coeffs[i]);
    }
    Ok(model)
}

fn check_objsense(line: usize, tok: &str) -> Result<(), MpsError> {
    match tok {
        "MIN" | "MINIMIZE" | "MINIMISE" => Ok(()),
        "MAX" | "MAXIMIZE" | "MAXIMISE" => {
            Err(perr(line, "OBJSENSE MAX is not supported; negate the objective"))
        }
        other => Err(perr(line, format!("unknown OBJSENSE {:?}", other))),
    }
}

fn parse_num(line: usize, tok: &str) -> Result<f64, MpsError> {
    tok.parse::<f64>().map_err(|_| perr(line, format!("bad number {:?}", tok)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{Model, Sense};

    fn sample_model() -> Model {
        let mut m = Model::new("sample");
        let x = m.add_col("x", 0.0, 10.5, 2.5);
        let y = m.add_free_col("y", -1.0);
        let u = m.add_binary("u[0]");
        let z = m.add_col("z", -3.25, f64::INFINITY, 0.0);
        m.add_obj(u, 100.0);
        m.add_row("r_le", Sense::Le, 7.0, &[(x, 1.0), (y, 2.0)]);
        m.add_row("r_ge", Sense::Ge, -2.5, &[(y, 1.0), (u, -4.0)]);
        m.add_row("r_eq", Sense::Eq, 0.125, &[(x, 0.1), (z, -1.0)]);
        m.obj_offset = 42.0;
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let m = sample_model();
        let text = write_mps(&m).unwrap();
        let back = parse_mps(&text).unwrap();
        assert_eq!(back.name, m.name);
        assert_eq!(back.num_cols(), m.num_cols());
        assert_eq!(back.num_rows(), m.num_rows());
        assert_eq!(back.obj_offset, m.obj_offset);
        for j in m.cols() {
            assert_eq!(back.col_name(j), m.col_name(j));
            assert_eq!(back.col_bounds(j), m.col_bounds(j));
            assert_eq!(back.col_obj(j), m.col_obj(j));
            assert_eq!(back.is_integer(j), m.is_integer(j));
        }
        for r in m.rows() {
            assert_eq!(back.row_name(r), m.row_name(r));
            assert_eq!(back.row_sense(r), m.row_sense(r));
            assert_eq!(back.row_rhs(r), m.row_rhs(r));
            let mut a: Vec<_> = m.row_coeffs(r).to_vec();
            let mut b: Vec<_> = back.row_coeffs(r).to_vec();
            a.sort_by_key(|e| e.0);
            b.sort_by_key(|e| e.0);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn round_trip_survives_awkward_floats() {
        let mut m = Model::new("awkward");
        let x = m.add_col("x", 1.0 / 3.0, 1e9 + 0.1, -0.1);
        let y = m.add_col("y", -1e-12, 2.0_f64.powi(-40), 0.3 - 0.1);
        m.add_row("r", Sense::Eq, 0.1 + 0.2, &[(x, 1.0 / 7.0), (y, -1e-17)]);
        let back = parse_mps(&write_mps(&m).unwrap()).unwrap();
        assert_eq!(back.col_bounds(x), m.col_bounds(x));
        assert_eq!(back.col_bounds(y), m.col_bounds(y));
        assert_eq!(back.col_obj(x), m.col_obj(x));
        assert_eq!(back.col_obj(y), m.col_obj(y));
        assert_eq!(back.row_rhs(crate::lp::Row(0)), m.row_rhs(crate::lp::Row(0)));
        assert_eq!(back.row_coeffs(crate::lp::Row(0)), m.row_coeffs(crate::lp::Row(0)));
    }

    #[test]
    fn integer_markers_round_trip() {
        let mut m = Model::new("ints");
        let _a = m.add_col("a", 0.0, 5.0, 1.0);
        let b = m.add_binary("b");
        let c = m.add_binary("c");
        let _d = m.add_col("d", 0.0, 1.0, 0.0);
        let text = write_mps(&m).unwrap();
        assert!(text.contains("INTORG"));
        assert!(text.contains("INTEND"));
        let back = parse_mps(&text).unwrap();
        assert!(back.is_integer(b) && back.is_integer(c));
        assert!(!back.is_integer(crate::lp::Col(0)) && !back.is_integer(crate::lp::Col(3)));
    }

    #[test]
    fn ranges_section_is_rejected() {
        let text = "NAME t\nROWS\n N OBJ\n L r\nCOLUMNS\n    x r 1\nRANGES\n    RNG r 4\nENDATA\n";
        let err = parse_mps(text).unwrap_err();
        assert!(err.to_string().contains("RANGES"));
    }

    #[test]
    fn objsense_max_is_rejected() {
        let text = "NAME t\nOBJSENSE\n MAX\nROWS\n N OBJ\nENDATA\n";
        let err = parse_mps(text).unwrap_err();
        assert!(err.to_string().contains("MAX"));
    }

    #[test]
    fn two_pairs_per_line_accepted() {
        let text = "NAME t\nROWS\n N OBJ\n G r1\n L r2\nCOLUMNS\n    x OBJ 2 r1 1\n    x r2 3\nRHS\n    RHS r1 1 r2 9\nENDATA\n";
        let m = parse_mps(text).unwrap();
        assert_eq!(m.num_cols(), 1);
        assert_eq!(m.col_obj(crate::lp::Col(0)), 2.0);
        assert_eq!(m.row_rhs(crate::lp::Row(0)), 1.0);
        assert_eq!(m.row_rhs(crate::lp::Row(1)), 9.0);
    }

    #[test]
    fn objective_offset_round_trips() {
        let mut m = Model::new("off");
        let _x = m.add_col("x", 0.0, 1.0, 1.0);
        m.obj_offset = -7.25;
        let text = write_mps(&m).unwrap();
        let back = parse_mps(&text).unwrap();
        assert_eq!(back.obj_offset, -7.25);
    }

    #[test]
    fn whitespace_in_names_rejected_by_writer() {
        let mut m = Model::new("bad");
        m.add_col("x y", 0.0, 1.0, 0.0);
        assert!(write_mps(&m).is_err());
    }
}
