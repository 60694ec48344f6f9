use std::fs;
use std::path::{Path, PathBuf};

use anisolab::io::write_field;
use anisolab::parabolic::write_checkpoint;
use anisolab::verify::BoundCheckReport;
use anisolab::Trajectory;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::plot::render_svg;
use crate::recipes::RecipeOutput;
use crate::CliError;

pub const MANIFEST: &str = "manifest.txt";
pub const REPORT: &str = "report.csv";
const MANIFEST_MAGIC: &str = "# anisolab manifest v1";

pub const REPORT_HEADER: [&str; 8] =
    ["estimate", "window_lo", "window_hi", "fitted_C", "fitted_h", "expected_h", "passed", "margin"];

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn report_row(r: &BoundCheckReport) -> [String; 8] {
    [
        r.name.clone(),
        num(r.window.0),
        num(r.window.1),
        num(r.fitted_constant),
        opt(r.fitted_exponent),
        opt(r.expected_exponent),
        r.passed.to_string(),
        num(r.margin),
    ]
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>, CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| CliError::Other(e.to_string()))
}

pub fn report_csv(reports: &[BoundCheckReport]) -> Result<Vec<u8>, CliError> {
    csv_bytes(&REPORT_HEADER, reports.iter().map(report_row))
}

pub fn norm_log_csv(traj: &Trajectory) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &["t", "l1", "l2", "sup", "energy"],
        traj.times.iter().zip(&traj.norm_log).map(|(&t, n)| [num(t), num(n.l1), num(n.l2), num(n.sup), num(n.energy)]),
    )
}

struct Writer {
    root: PathBuf,
    listed: Vec<(String, String)>,
}

impl Writer {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.listed.push((sha256_hex(bytes), name.to_string()));
        Ok(())
    }

    fn adopt_file(&mut self, rel: &str) -> Result<(), CliError> {
        let bytes = fs::read(self.root.join(rel))?;
        self.listed.push((sha256_hex(&bytes), rel.to_string()));
        Ok(())
    }

    fn adopt_dir(&mut self, sub: &str) -> Result<(), CliError> {
        let mut names: Vec<String> = fs::read_dir(self.root.join(sub))?
            .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
            .collect::<Result<_, _>>()?;
        names.sort();
        for n in names {
            let rel = format!("{sub}/{n}");
            let bytes = fs::read(self.root.join(&rel))?;
            self.listed.push((sha256_hex(&bytes), rel));
        }
        Ok(())
    }
}

/// Write every artifact of a finished recipe under `root` and return the
/// listed relative paths.
pub fn write_artifacts(cfg: &ExperimentConfig, out: &RecipeOutput, root: &Path) -> Result<Vec<String>, CliError> {
    fs::create_dir_all(root)?;
    let mut w = Writer { root: root.to_path_buf(), listed: Vec::new() };
    let canonical: String = cfg.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    w.put("config.txt", canonical.as_bytes())?;
    w.put(REPORT, &report_csv(&out.reports)?)?;
    for (name, traj) in &out.runs {
        w.put(&format!("norms_{name}.csv"), &norm_log_csv(traj)?)?;
        let state = format!("state_{name}.field");
        write_field(&root.join(&state), traj.final_state())?;
        w.adopt_file(&state)?;
        if cfg.verify.checkpoint {
            let sub = format!("checkpoint_{name}");
            write_checkpoint(traj, &root.join(&sub))?;
            w.adopt_dir(&sub)?;
        }
    }
    for plot in &out.plots {
        w.put(&format!("{}.svg", plot.name), render_svg(plot).as_bytes())?;
    }
    let mut manifest = format!("{MANIFEST_MAGIC}\nconfig_hash {}\nrecipe {}\nseed {}\nversion {}\n", cfg.hash(), cfg.experiment, cfg.seed, env!("CARGO_PKG_VERSION"));
    for (hash, name) in &w.listed {
        manifest.push_str(&format!("artifact {hash} {name}\n"));
    }
    fs::write(root.join(MANIFEST), manifest)?;
    Ok(w.listed.into_iter().map(|(_, n)| n).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InspectReport {
    pub root: PathBuf,
    pub config_hash: String,
    pub recipe: String,
    pub verified: Vec<String>,
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
    /// False when `config.txt` no longer hashes to the manifest entry.
    pub config_ok: bool,
}

impl InspectReport {
    pub fn ok(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty() && self.config_ok
    }
}

fn is_run_manifest(path: &Path) -> bool {
    fs::read_to_string(path).is_ok_and(|t| t.lines().next() == Some(MANIFEST_MAGIC))
}

/// Check artifact hashes against the manifest. `path` is a run directory,
/// its manifest, or a single artifact inside it.
pub fn inspect(path: &Path) -> Result<InspectReport, CliError> {
    let (root, only) = if path.is_dir() {
        (path.to_path_buf(), None)
    } else if path.file_name().is_some_and(|n| n == MANIFEST) && is_run_manifest(path) {
        (path.parent().unwrap_or(Path::new(".")).to_path_buf(), None)
    } else {
        // nearest enclosing run directory; checkpoints nest one level down
        let mut dir = path.parent().unwrap_or(Path::new("."));
        loop {
            if is_run_manifest(&dir.join(MANIFEST)) {
                break;
            }
            dir = dir.parent().ok_or_else(|| CliError::Manifest(format!("no run manifest above {}", path.display())))?;
        }
        let rel = path.strip_prefix(dir).unwrap_or(path);
        let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        (dir.to_path_buf(), Some(rel))
    };
    let text = fs::read_to_string(root.join(MANIFEST))
        .map_err(|e| CliError::Manifest(format!("cannot read {}: {e}", root.join(MANIFEST).display())))?;
    let mut lines = text.lines();
    if lines.next() != Some(MANIFEST_MAGIC) {
        return Err(CliError::Manifest("not an anisolab manifest".into()));
    }
    let mut report = InspectReport {
        root: root.clone(),
        config_hash: String::new(),
        recipe: String::new(),
        verified: Vec::new(),
        mismatched: Vec::new(),
        missing: Vec::new(),
        config_ok: true,
    };
    let mut found_only = false;
    for line in lines {
        let mut parts = line.splitn(3, ' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some("config_hash"), Some(h), None) => report.config_hash = h.to_string(),
            (Some("recipe"), Some(r), None) => report.recipe = r.to_string(),
            (Some("seed" | "version"), Some(_), None) => {}
            (Some("artifact"), Some(hash), Some(name)) => {
                if only.as_deref().is_some_and(|o| o != name) {
                    continue;
                }
                found_only = true;
                match fs::read(root.join(name)) {
                    Ok(bytes) if sha256_hex(&bytes) == hash => report.verified.push(name.to_string()),
                    Ok(_) => report.mismatched.push(name.to_string()),
                    Err(_) => report.missing.push(name.to_string()),
                }
            }
            _ => return Err(CliError::Manifest(format!("malformed manifest line `{line}`"))),
        }
    }
    if let Some(o) = &only {
        if !found_only {
            return Err(CliError::Manifest(format!("`{o}` is not listed in the manifest")));
        }
    }
    // the canonical config must still produce the recorded hash
    match fs::read_to_string(root.join("config.txt")) {
        Ok(c) => match ExperimentConfig::parse(&c) {
            Ok(cfg) => report.config_ok = cfg.hash() == report.config_hash,
            Err(_) => report.config_ok = false,
        },
        Err(_) => report.config_ok = false,
    }
    Ok(report)
}
