//! Free-format MPS writer and reader.
//!
//! Sections: NAME, OBJSENSE, ROWS, COLUMNS (with INTORG/INTEND markers),
//! RHS, RANGES, BOUNDS, SOS, ENDATA. The writer emits the model in
//! declaration order so identical models serialize byte-identically; the
//! reader accepts the writer's dialect plus RANGES and the usual bound keys.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::model::{MilpModel, ObjSense, RowSense, VarId, VarKind};
use crate::error::MilpError;

const OBJ_ROW: &str = "OBJ";

fn sanitize(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect();
    if s.is_empty() {
        s.push('_');
    }
    s
}

/// Serialize `model` as free-format MPS.
pub fn export_mps(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME {}", sanitize(&model.name));
    if model.sense == ObjSense::Maximize {
        out.push_str("OBJSENSE\n MAX\n");
    }
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N {OBJ_ROW}");
    let mut row_names = Vec::with_capacity(model.rows.len());
    for (i, r) in model.rows.iter().enumerate() {
        let tag = match r.sense {
            RowSense::Le => 'L',
            RowSense::Ge => 'G',
            RowSense::Eq => 'E',
        };
        let name = unique_name(&sanitize(&r.name), i, &mut row_names);
        let _ = writeln!(out, " {tag} {name}");
    }
    // Column-major entries: collect per variable.
    let mut per_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.vars.len()];
    for (i, r) in model.rows.iter().enumerate() {
        for &(v, c) in &r.coeffs {
            per_var[v.0].push((i, c));
        }
    }
    let mut col_names = Vec::with_capacity(model.vars.len());
    for (j, v) in model.vars.iter().enumerate() {
        unique_name(&sanitize(&v.name), j, &mut col_names);
    }
    out.push_str("COLUMNS\n");
    let mut integer_open = false;
    let mut marker = 0usize;
    for (j, v) in model.vars.iter().enumerate() {
        let is_int = v.kind == VarKind::Binary;
        if is_int && !integer_open {
            let _ = writeln!(out, " MARKER{marker} 'MARKER' 'INTORG'");
            marker += 1;
            integer_open = true;
        } else if !is_int && integer_open {
            let _ = writeln!(out, " MARKER{marker} 'MARKER' 'INTEND'");
            marker += 1;
            integer_open = false;
        }
        let cname = &col_names[j];
        if v.obj != 0.0 {
            let _ = writeln!(out, " {cname} {OBJ_ROW} {}", fmt_num(v.obj));
        }
        for &(i, c) in &per_var[j] {
            let _ = writeln!(out, " {cname} {} {}", row_names[i], fmt_num(c));
        }
        if v.obj == 0.0 && per_var[j].is_empty() {
            // Variables outside every row still need a COLUMNS mention so the
            // reader learns of their existence.
            let _ = writeln!(out, " {cname} {OBJ_ROW} 0");
        }
    }
    if integer_open {
        let _ = writeln!(out, " MARKER{marker} 'MARKER' 'INTEND'");
    }
    out.push_str("RHS\n");
    for (i, r) in model.rows.iter().enumerate() {
        if r.rhs != 0.0 {
            let _ = writeln!(out, " RHS1 {} {}", row_names[i], fmt_num(r.rhs));
        }
    }
    out.push_str("BOUNDS\n");
    for (j, v) in model.vars.iter().enumerate() {
        let cname = &col_names[j];
        let default_lo = 0.0;
        match (v.lower, v.upper) {
            (lo, hi) if lo == hi => {
                let _ = writeln!(out, " FX BND1 {cname} {}", fmt_num(lo));
            }
            (lo, hi) => {
                if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                    let _ = writeln!(out, " FR BND1 {cname}");
                } else {
                    if lo == f64::NEG_INFINITY {
                        let _ = writeln!(out, " MI BND1 {cname}");
                    } else if lo != default_lo {
                        let _ = writeln!(out, " LO BND1 {cname} {}", fmt_num(lo));
                    }
                    if hi != f64::INFINITY {
                        let _ = writeln!(out, " UP BND1 {cname} {}", fmt_num(hi));
                    }
                }
            }
        }
    }
    if !model.sos1.is_empty() {
        out.push_str("SOS\n");
        for (k, set) in model.sos1.iter().enumerate() {
            let _ = writeln!(out, " S1 {} {}", sanitize(&set.name), k + 1);
            for (ord, v) in set.members.iter().enumerate() {
                let _ = writeln!(out, "    {} {}", col_names[v.0], ord + 1);
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

fn unique_name(base: &str, idx: usize, taken: &mut Vec<String>) -> String {
    let mut name = base.to_string();
    if taken.contains(&name) {
        name = format!("{base}#{idx}");
    }
    taken.push(name.clone());
    taken.last().unwrap().clone()
}

fn fmt_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        let s = format!("{x:.12}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    Sos,
    ObjSense,
    Done,
}

/// Parse free-format MPS text into a model.
pub fn import_mps(text: &str) -> Result<MilpModel, MilpError> {
    let mut model = MilpModel::new("", ObjSense::Minimize);
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut row_sense: Vec<RowSense> = Vec::new();
    let mut row_names: Vec<String> = Vec::new();
    let mut rows_coeffs: Vec<Vec<(VarId, f64)>> = Vec::new();
    let mut rows_rhs: Vec<f64> = Vec::new();
    let mut ranges: Vec<Option<f64>> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut integer_mode = false;
    // Bounds bookkeeping: which variables already saw an explicit lower bound.
    let mut saw_lower: Vec<bool> = Vec::new();
    let mut current_sos: Option<usize> = None;

    let err = |line_no: usize, msg: &str| MilpError::MpsParse {
        line: line_no + 1,
        message: msg.to_string(),
    };

    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        let header = !raw.starts_with(' ') && !raw.starts_with('\t');
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if header {
            section = match tokens[0] {
                "NAME" => {
                    if tokens.len() > 1 {
                        model.name = tokens[1].to_string();
                    }
                    Section::None
                }
                "OBJSENSE" => Section::ObjSense,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "SOS" => Section::Sos,
                "ENDATA" => Section::Done,
                other => return Err(err(ln, &format!("unknown section '{other}'"))),
            };
            if tokens[0] == "OBJSENSE" && tokens.len() > 1 {
                set_objsense(&mut model, tokens[1]);
                section = Section::None;
            }
            continue;
        }
        match section {
            Section::ObjSense => {
                set_objsense(&mut model, tokens[0]);
                section = Section::None;
            }
            Section::Rows => {
                if tokens.len() < 2 {
                    return Err(err(ln, "ROWS entry needs a type and a name"));
                }
                let name = tokens[1].to_string();
                match tokens[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(name);
                        }
                    }
                    t => {
                        let sense = match t {
                            "L" => RowSense::Le,
                            "G" => RowSense::Ge,
                            "E" => RowSense::Eq,
                            _ => return Err(err(ln, &format!("unknown row type '{t}'"))),
                        };
                        row_index.insert(name.clone(), row_names.len());
                        row_names.push(name);
                        row_sense.push(sense);
                        rows_coeffs.push(Vec::new());
                        rows_rhs.push(0.0);
                        ranges.push(None);
                    }
                }
            }
            Section::Columns => {
                if tokens.len() >= 3 && tokens[1] == "'MARKER'" {
                    match tokens[2] {
                        "'INTORG'" => integer_mode = true,
                        "'INTEND'" => integer_mode = false,
                        _ => return Err(err(ln, "unknown marker")),
                    }
                    continue;
                }
                if tokens.len() < 3 || tokens.len() % 2 == 0 {
                    return Err(err(ln, "COLUMNS entry needs name and (row, value) pairs"));
                }
                let cname = tokens[0];
                let j = *col_index.entry(cname.to_string()).or_insert_with(|| {
                    let id = if integer_mode {
                        model.add_binary(cname, 0.0)
                    } else {
                        model.add_var(cname, 0.0, f64::INFINITY, 0.0)
                    };
                    saw_lower.push(false);
                    id.0
                });
                for pair in tokens[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| err(ln, &format!("bad number '{}'", pair[1])))?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        model.vars[j].obj += value;
                    } else {
                        let &ri = row_index
                            .get(pair[0])
                            .ok_or_else(|| err(ln, &format!("unknown row '{}'", pair[0])))?;
                        rows_coeffs[ri].push((VarId(j), value));
                    }
                }
            }
            Section::Rhs => {
                if tokens.len() < 3 {
                    return Err(err(ln, "RHS entry needs set, row, value"));
                }
                for pair in tokens[1..].chunks(2) {
                    if pair.len() < 2 {
                        return Err(err(ln, "dangling RHS pair"));
                    }
                    if Some(pair[0]) == obj_row.as_deref() {
                        continue; // objective constant ignored
                    }
                    let &ri = row_index
                        .get(pair[0])
                        .ok_or_else(|| err(ln, &format!("unknown row '{}'", pair[0])))?;
                    rows_rhs[ri] = pair[1]
                        .parse()
                        .map_err(|_| err(ln, &format!("bad number '{}'", pair[1])))?;
                }
            }
            Section::Ranges => {
                if tokens.len() < 3 {
                    return Err(err(ln, "RANGES entry needs set, row, value"));
                }
                for pair in tokens[1..].chunks(2) {
                    if pair.len() < 2 {
                        return Err(err(ln, "dangling RANGES pair"));
                    }
                    let &ri = row_index
                        .get(pair[0])
                        .ok_or_else(|| err(ln, &format!("unknown row '{}'", pair[0])))?;
                    ranges[ri] = Some(
                        pair[1]
                            .parse()
                            .map_err(|_| err(ln, &format!("bad number '{}'", pair[1])))?,
                    );
                }
            }
            Section::Bounds => {
                if tokens.len() < 3 {
                    return Err(err(ln, "BOUNDS entry needs type, set, column"));
                }
                let (btype, cname) = (tokens[0], tokens[2]);
                let &j = col_index
                    .get(cname)
                    .ok_or_else(|| err(ln, &format!("unknown column '{cname}'")))?;
                let val = || -> Result<f64, MilpError> {
                    tokens
                        .get(3)
                        .ok_or_else(|| err(ln, "bound needs a value"))?
                        .parse()
                        .map_err(|_| err(ln, "bad bound value"))
                };
                match btype {
                    "UP" => {
                        model.vars[j].upper = val()?;
                        // Classic MPS quirk: a negative upper bound with no
                        // explicit lower bound pulls the lower to -inf.
                        if model.vars[j].upper < 0.0 && !saw_lower[j] {
                            model.vars[j].lower = f64::NEG_INFINITY;
                        }
                    }
                    "LO" => {
                        model.vars[j].lower = val()?;
                        saw_lower[j] = true;
                    }
                    "FX" => {
                        let v = val()?;
                        model.vars[j].lower = v;
                        model.vars[j].upper = v;
                        saw_lower[j] = true;
                    }
                    "FR" => {
                        model.vars[j].lower = f64::NEG_INFINITY;
                        model.vars[j].upper = f64::INFINITY;
                        saw_lower[j] = true;
                    }
                    "MI" => {
                        model.vars[j].lower = f64::NEG_INFINITY;
                        saw_lower[j] = true;
                    }
                    "PL" => model.vars[j].upper = f64::INFINITY,
                    "BV" => {
                        model.vars[j].kind = VarKind::Binary;
                        model.vars[j].lower = 0.0;
                        model.vars[j].upper = 1.0;
                    }
                    other => return Err(err(ln, &format!("unknown bound type '{other}'"))),
                }
            }
            Section::Sos => {
                if tokens[0] == "S1" {
                    if tokens.len() < 2 {
                        return Err(err(ln, "S1 header needs a set name"));
                    }
                    current_sos = Some(model.sos1.len());
                    model.add_sos1(tokens[1], Vec::new());
                } else {
                    let Some(si) = current_sos else {
                        return Err(err(ln, "SOS member outside a set"));
                    };
                    let &j = col_index
                        .get(tokens[0])
                        .ok_or_else(|| err(ln, &format!("unknown column '{}'", tokens[0])))?;
                    model.sos1[si].members.push(VarId(j));
                }
            }
            Section::Done => {}
            Section::None => return Err(err(ln, "data before any section header")),
        }
    }

    // Materialize rows, applying RANGES by splitting into the vanilla
    // interpretation: for L rows [rhs-|r|, rhs], G rows [rhs, rhs+|r|],
    // E rows [rhs, rhs+r] (sign of r decides the side).
    for (i, name) in row_names.iter().enumerate() {
        let coeffs = rows_coeffs[i].clone();
        match ranges[i] {
            None => {
                model.add_row(name.clone(), coeffs, row_sense[i], rows_rhs[i]);
            }
            Some(r) => {
                let (lo, hi) = match row_sense[i] {
                    RowSense::Le => (rows_rhs[i] - r.abs(), rows_rhs[i]),
                    RowSense::Ge => (rows_rhs[i], rows_rhs[i] + r.abs()),
                    RowSense::Eq => {
                        if r >= 0.0 {
                            (rows_rhs[i], rows_rhs[i] + r)
                        } else {
                            (rows_rhs[i] + r, rows_rhs[i])
                        }
                    }
                };
                model.add_row(format!("{name}.lo"), coeffs.clone(), RowSense::Ge, lo);
                model.add_row(format!("{name}.hi"), coeffs, RowSense::Le, hi);
            }
        }
    }
    Ok(model)
}

fn set_objsense(model: &mut MilpModel, token: &str) {
    model.sense = match token {
        "MAX" | "MAXIMIZE" => ObjSense::Maximize,
        _ => ObjSense::Minimize,
    };
}
