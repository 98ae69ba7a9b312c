use std::io::Write;

use serde::{Deserialize, Serialize};

use super::PatchError;

/// One line of the patch report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchReportRow {
    pub patch_id: usize,
    pub center_x: f64,
    pub center_y: f64,
    pub center_t: f64,
    pub beta: f64,
    pub kept_by_sobolev: bool,
    pub kept_by_variation: bool,
    pub condition_ratio: f64,
    /// Outcome of the identifiability inequality, when a coefficient floor was given.
    #[serde(default)]
    pub identifiable: Option<bool>,
}

/// CSV with one row per patch. `center_y` is written only for 2D data and
/// `identifiable` only when some row carries it.
pub fn write_patch_report<W: Write>(w: &mut W, rows: &[PatchReportRow], space_dim: usize) -> Result<(), PatchError> {
    let two_d = space_dim > 1;
    let ident = rows.iter().any(|r| r.identifiable.is_some());
    write!(w, "patch_id,center_x")?;
    if two_d {
        write!(w, ",center_y")?;
    }
    write!(w, ",center_t,beta,kept_by_sobolev,kept_by_variation,condition_ratio")?;
    writeln!(w, "{}", if ident { ",identifiable" } else { "" })?;
    for r in rows {
        write!(w, "{},{}", r.patch_id, r.center_x)?;
        if two_d {
            write!(w, ",{}", r.center_y)?;
        }
        write!(w, ",{},{},{},{},{}", r.center_t, r.beta, r.kept_by_sobolev, r.kept_by_variation, r.condition_ratio)?;
        if ident {
            write!(w, ",{}", r.identifiable.map_or(String::new(), |b| b.to_string()))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let row = PatchReportRow {
            patch_id: 3,
            center_x: 0.5,
            center_y: 0.0,
            center_t: 1.25,
            beta: 2.0,
            kept_by_sobolev: true,
            kept_by_variation: false,
            condition_ratio: 0.125,
            identifiable: None,
        };
        let mut out = Vec::new();
        write_patch_report(&mut out, &[row.clone()], 1).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s.lines().next(), Some("patch_id,center_x,center_t,beta,kept_by_sobolev,kept_by_variation,condition_ratio"));
        assert_eq!(s.lines().nth(1), Some("3,0.5,1.25,2,true,false,0.125"));
        let mut out = Vec::new();
        write_patch_report(&mut out, &[PatchReportRow { identifiable: Some(true), ..row }], 2).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("patch_id,center_x,center_y,center_t,"));
        assert_eq!(s.lines().nth(1), Some("3,0.5,0,1.25,2,true,false,0.125,true"));
    }
}
