//! Flat `key = value` reports and atomic file output.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// A value printable in a flat report. Floats use the shortest round-trip
/// form, switching to exponent notation for very small or large magnitudes.
pub trait ReportValue {
    fn render(&self) -> String;
}

impl ReportValue for f64 {
    fn render(&self) -> String {
        format!("{self:?}")
    }
}

macro_rules! display_value {
    ($($t:ty),*) => {
        $(impl ReportValue for $t {
            fn render(&self) -> String {
                self.to_string()
            }
        })*
    };
}

display_value!(usize, u64, i32, bool, str, String);

impl<T: ReportValue + ?Sized> ReportValue for &T {
    fn render(&self) -> String {
        (**self).render()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatReport {
    lines: Vec<(String, String)>,
}

impl FlatReport {
    pub fn new() -> FlatReport {
        FlatReport::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ReportValue) -> &mut FlatReport {
        self.lines.push((key.into(), value.render()));
        self
    }

    /// Comma-joined list value.
    pub fn push_list<T: ReportValue>(&mut self, key: impl Into<String>, values: &[T]) -> &mut FlatReport {
        let joined = values.iter().map(ReportValue::render).collect::<Vec<_>>().join(",");
        self.push(key, joined)
    }

    pub fn push_opt<T: ReportValue>(&mut self, key: impl Into<String>, value: Option<T>) -> &mut FlatReport {
        match value {
            Some(v) => self.push(key, v),
            None => self.push(key, "none"),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn lines(&self) -> &[(String, String)] {
        &self.lines
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// Path of the machine-readable sibling: same stem, `.report` suffix.
pub fn sibling_report_path(path: &Path) -> Option<PathBuf> {
    let sibling = path.with_extension("report");
    (sibling != path).then_some(sibling)
}

/// Write via a temporary file in the target directory and rename over the
/// destination, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(contents)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_in_insertion_order() {
        let mut r = FlatReport::new();
        r.push("b", 1)
            .push_list("point", &[0.5, -1.0])
            .push_opt::<f64>("slope", None);
        r.push("tol", 1e-12);
        assert_eq!(r.render(), "b = 1\npoint = 0.5,-1.0\nslope = none\ntol = 1e-12\n");
        assert_eq!(r.get("point"), Some("0.5,-1.0"));
    }

    #[test]
    fn sibling_path() {
        assert_eq!(
            sibling_report_path(Path::new("out/a.txt")),
            Some(PathBuf::from("out/a.report"))
        );
        assert_eq!(sibling_report_path(Path::new("a")), Some(PathBuf::from("a.report")));
        assert_eq!(sibling_report_path(Path::new("a.report")), None);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/x.csv"), b"z").is_err());
    }
}
