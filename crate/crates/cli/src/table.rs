//! Result tables: a `#`-commented preamble (schema version, tool version,
//! timestamp, full config echo) followed by plain CSV.

use std::path::{Path, PathBuf};

use spinwire_core::chain::Protocol;
use spinwire_core::ensemble::SweepCell;

use crate::config::{extract_echo, ExperimentConfig, CONFIG_MARKER};
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// 17 significant digits: enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn preamble(command: &str, config: &ExperimentConfig) -> String {
    let mut out = String::new();
    out.push_str("# spinwire result table\n");
    out.push_str(&format!("# schema_version = {SCHEMA_VERSION}\n"));
    out.push_str(&format!("# tool_version = {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("# command = {command}\n"));
    out.push_str(&format!(
        "# created = {}\n",
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    ));
    out.push_str(CONFIG_MARKER);
    out.push('\n');
    for line in config.to_toml().lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

pub fn render_csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is utf-8")
}

pub fn write_table(
    path: &Path,
    command: &str,
    config: &ExperimentConfig,
    header: &[String],
    rows: &[Vec<String>],
) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let text = preamble(command, config) + &render_csv(header, rows);
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn sweep_header(beta_grid: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = [
        "protocol",
        "N",
        "sigma_J",
        "sigma_eps",
        "R",
        "seed",
        "mean_favg",
        "var_favg",
        "mean_fmin",
        "var_fmin",
        "mean_conc",
        "var_conc",
        "mean_B",
        "pr_favg_gt_cl",
        "pr_fmin_gt_cl",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(beta_grid.iter().map(|b| format!("mean_fpsi@{b}")));
    h
}

pub fn sweep_row(protocol: Protocol, cell: &SweepCell, seed: u64) -> Vec<String> {
    let s = &cell.stats;
    let mut row = vec![
        protocol.name().to_string(),
        cell.n.to_string(),
        fmt_f64(cell.sigma_j),
        fmt_f64(cell.sigma_eps),
        s.n_realizations.to_string(),
        seed.to_string(),
        fmt_f64(s.f_avg.mean),
        fmt_f64(s.f_avg.variance),
        fmt_f64(s.f_min.mean),
        fmt_f64(s.f_min.variance),
        fmt_f64(s.concurrence.mean),
        fmt_f64(s.concurrence.variance),
        fmt_f64(s.b_worst.mean),
        fmt_f64(s.pr_favg_above_cl),
        fmt_f64(s.pr_fmin_above_cl),
    ];
    row.extend(s.f_psi.iter().map(|(_, m)| fmt_f64(m.mean)));
    row
}

/// A parsed result table.
#[derive(Debug, Clone)]
pub struct TableData {
    pub path: PathBuf,
    pub schema_version: Option<u32>,
    pub config: Option<ExperimentConfig>,
    pub header: Vec<String>,
    pub rows: Vec<csv::StringRecord>,
}

impl TableData {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> CliResult<Self> {
        let table_err = |reason: String| CliError::Table {
            path: path.to_path_buf(),
            reason,
        };
        let schema_version = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .find_map(|l| l.strip_prefix("# schema_version = "))
            .map(|v| {
                v.trim()
                    .parse::<u32>()
                    .map_err(|_| table_err(format!("bad schema_version `{v}`")))
            })
            .transpose()?;
        if let Some(v) = schema_version.filter(|&v| v != SCHEMA_VERSION) {
            return Err(table_err(format!(
                "schema_version {v} is not supported (expected {SCHEMA_VERSION})"
            )));
        }
        let config = match extract_echo(text) {
            Some(echo) => {
                Some(ExperimentConfig::from_toml(&echo).map_err(|e| table_err(e.to_string()))?)
            }
            None => None,
        };

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| table_err(e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let rows = reader
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| table_err(e.to_string()))?;
        Ok(Self {
            path: path.to_path_buf(),
            schema_version,
            config,
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::MissingColumn {
                path: self.path.clone(),
                column: name.to_string(),
            })
    }

    pub fn parse_cell<T: std::str::FromStr>(&self, row: usize, col: usize) -> CliResult<T> {
        let raw = self.rows[row].get(col).unwrap_or("");
        raw.trim().parse().map_err(|_| CliError::Table {
            path: self.path.clone(),
            reason: format!(
                "row {}: column `{}`: cannot parse `{raw}`",
                row + 1,
                self.header[col]
            ),
        })
    }
}

/// The CSV body of a table, without its preamble.
pub fn numeric_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}
