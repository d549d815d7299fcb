use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pcvstream::sim::{correlation_report, FrameMetrics, Policy, Summary};

/// Per-policy mean and variance of every metric, one block per metric, plus
/// the accuracy/quality correlation of each progressive policy when a
/// nonprogressive run is present.
pub fn comparison_table(runs: &[(String, Vec<FrameMetrics>)]) -> String {
    let summaries: Vec<(&str, Summary)> = runs.iter().map(|(p, f)| (p.as_str(), Summary::of(f))).collect();
    let width = runs.iter().map(|r| r.0.len()).max().unwrap_or(0).max(6);
    let mut s = String::from("# pcvstream-comparison v1\n");
    for i in 0..4 {
        let metric = summaries.first().map(|x| x.1.rows()[i].0).unwrap_or_default();
        writeln!(s, "\n{metric}\n{:width$} {:>16} {:>16}", "policy", "mean", "variance").unwrap();
        for (policy, sum) in &summaries {
            let st = sum.rows()[i].1;
            writeln!(s, "{policy:width$} {:>16.6} {:>16.6}", st.mean, st.variance).unwrap();
        }
    }
    writeln!(s, "\nframes").unwrap();
    for (policy, sum) in &summaries {
        writeln!(
            s,
            "{policy:width$} {} scored, {} with empty FoV",
            sum.frames, sum.empty_frames
        )
        .unwrap();
    }

    let baseline = runs.iter().find(|r| r.0 == Policy::Nonprogressive.name());
    if let Some((_, base)) = baseline {
        let mut lines = String::new();
        for (policy, frames) in runs {
            let progressive = policy.parse::<Policy>().map(Policy::is_progressive).unwrap_or(false);
            if let (true, Ok(rho)) = (progressive, correlation_report(frames, base)) {
                writeln!(lines, "{policy:width$} {rho:>16.6}").unwrap();
            }
        }
        if !lines.is_empty() {
            writeln!(s, "\nfov_gain_correlation (vs nonprogressive)\n{lines}").unwrap();
        }
    }
    s
}

/// Files written by a command. Unless committed, they are removed again
/// when the guard drops, together with the output directory if the guard
/// created it.
pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Outputs> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
            committed: false,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.path(name);
        self.files.push(path.clone());
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    /// Registers a file written by someone else.
    pub fn track(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.files)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
