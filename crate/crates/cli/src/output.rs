//! File naming, CSV tables and the single output writer.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use motorlab::analysis::ConvergenceTable;
use motorlab::hj_limit::{BranchLabel, LimitProfile, VanishingBounds};
use motorlab::steady::{DensityField, PhaseField, SolvePath};

use crate::error::{CliError, CliResult};

/// 17 significant digits: round-trips every `f64`.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}").to_lowercase()
    }
}

/// `σ` as it appears in file names, e.g. `5e-3`.
pub fn sigma_tag(sigma: f64) -> String {
    format!("{sigma:e}")
}

/// `<command>_<name>_<hash>_<suffix>.<ext>`, with the config name reduced to
/// ASCII alphanumerics, `-` and `_`.
pub fn file_name(command: &str, name: &str, hash: &str, suffix: &str, ext: &str) -> String {
    let name: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{command}_{name}_{hash}_{suffix}.{ext}")
}

/// Which artifact kinds to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Formats {
    pub const ALL: Formats = Formats {
        csv: true,
        json: true,
        svg: true,
    };
}

/// Collects artifacts in memory and writes them in one pass at the end.
#[derive(Debug)]
pub struct Writer {
    dir: PathBuf,
    formats: Formats,
    pending: Vec<(String, String)>,
}

impl Writer {
    pub fn new(dir: &Path, formats: Formats) -> Self {
        Self {
            dir: dir.to_path_buf(),
            formats,
            pending: Vec::new(),
        }
    }

    fn wants(&self, name: &str) -> bool {
        match name.rsplit('.').next() {
            Some("csv") => self.formats.csv,
            Some("json") => self.formats.json,
            Some("svg") => self.formats.svg,
            _ => true,
        }
    }

    /// Queues a file; ignored when its format is not selected.
    pub fn add(&mut self, name: String, content: String) {
        if self.wants(&name) {
            self.pending.push((name, content));
        }
    }

    /// Creates the directory and writes everything queued.
    pub fn flush(self) -> CliResult<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let mut written = Vec::with_capacity(self.pending.len());
        for (name, content) in self.pending {
            let path = self.dir.join(name);
            fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn header(out: &mut String, cols: impl IntoIterator<Item = String>) {
    let cols: Vec<String> = cols.into_iter().collect();
    out.push_str(&cols.join(","));
    out.push('\n');
}

fn species_cols(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

/// One row per node: `x, n_1..n_I, R_1..R_I, S`, plus `R_limit` when a
/// limit profile on the same grid is given. Densities of a phase-path
/// solution are `e^{−R_i/σ}` and may underflow to zero.
pub fn solution_csv(
    phase: &PhaseField,
    density: Option<&DensityField>,
    limit: Option<&LimitProfile>,
) -> String {
    let ni = phase.species_count();
    let fallback;
    let density = match density {
        Some(d) => d,
        None => {
            fallback = phase.to_density();
            &fallback
        }
    };
    let mut out = String::new();
    header(
        &mut out,
        std::iter::once("x".to_string())
            .chain(species_cols("n", ni))
            .chain(species_cols("R", ni))
            .chain(["S".to_string()])
            .chain(limit.map(|_| "R_limit".to_string())),
    );
    for m in 0..phase.grid.node_count() {
        out.push_str(&num(phase.grid.x(m)));
        for v in &density.values {
            let _ = write!(out, ",{}", num(v[m]));
        }
        for r in &phase.r_values {
            let _ = write!(out, ",{}", num(r[m]));
        }
        let _ = write!(out, ",{}", num(phase.s_values[m]));
        if let Some(l) = limit {
            let _ = write!(out, ",{}", num(l.r_values[m]));
        }
        out.push('\n');
    }
    out
}

fn branch_name(b: BranchLabel) -> &'static str {
    match b {
        BranchLabel::MinPlus => "min_plus",
        BranchLabel::MaxNeg => "max_neg",
        BranchLabel::Zero => "zero",
        BranchLabel::StrongRoot => "strong_root",
        BranchLabel::VanishingBound => "vanishing_bound",
    }
}

/// A limit profile in the phase-field column layout: every `R_i` and `S`
/// equal the common limit `R`, followed by `R′` and the branch label.
pub fn profile_csv(profile: &LimitProfile, species: usize) -> String {
    let mut out = String::new();
    header(
        &mut out,
        std::iter::once("x".to_string())
            .chain(species_cols("R", species))
            .chain(["S".to_string(), "slope".to_string(), "branch".to_string()]),
    );
    for m in 0..profile.grid.node_count() {
        let r = num(profile.r_values[m]);
        out.push_str(&num(profile.grid.x(m)));
        for _ in 0..=species {
            out.push(',');
            out.push_str(&r);
        }
        let _ = writeln!(
            out,
            ",{},{}",
            num(profile.slope_values[m]),
            branch_name(profile.branch_labels[m])
        );
    }
    out
}

/// Vanishing-rate constraint arrays: per species the admissible slope range
/// (`upper` empty when unbounded) and membership in its negative sets.
pub fn constraints_csv(bounds: &VanishingBounds) -> String {
    let ni = bounds.constraints.len();
    let mut out = String::new();
    let mut cols = vec!["x".to_string()];
    for i in 1..=ni {
        cols.extend([
            format!("lower_{i}"),
            format!("upper_{i}"),
            format!("on_negative_set_{i}"),
        ]);
    }
    cols.push("j_target".into());
    header(&mut out, cols);
    for m in 0..bounds.grid.node_count() {
        out.push_str(&num(bounds.grid.x(m)));
        for c in &bounds.constraints {
            let c = c[m];
            let _ = write!(
                out,
                ",{},{},{}",
                num(c.lower),
                c.upper.map(num).unwrap_or_default(),
                u8::from(c.on_negative_set)
            );
        }
        let _ = writeln!(out, ",{}", bounds.j_target[m].map(num).unwrap_or_default());
    }
    out
}

fn path_name(p: SolvePath) -> &'static str {
    match p {
        SolvePath::Density => "density",
        SolvePath::PhaseNewton => "phase_newton",
    }
}

/// One row per solved `σ`; a truncated sweep ends with a `failed` row.
pub fn convergence_csv(table: &ConvergenceTable, species: usize) -> String {
    let mut out = String::new();
    header(
        &mut out,
        ["sigma".to_string(), "path".to_string()]
            .into_iter()
            .chain(species_cols("error", species))
            .chain(
                [
                    "max_error",
                    "gap_integral",
                    "gap_over_sigma",
                    "far_mass",
                    "status",
                ]
                .map(String::from),
            ),
    );
    for r in &table.rows {
        let _ = write!(out, "{},{}", num(r.sigma), path_name(r.path));
        for e in &r.errors {
            let _ = write!(out, ",{}", num(*e));
        }
        let _ = writeln!(
            out,
            ",{},{},{},{},ok",
            num(r.max_error),
            num(r.gap_integral),
            num(r.gap_integral / r.sigma),
            num(r.far_mass)
        );
    }
    if let Some((sigma, _)) = &table.failure {
        let _ = writeln!(out, "{},{}failed", num(*sigma), ",".repeat(species + 5));
    }
    out
}
