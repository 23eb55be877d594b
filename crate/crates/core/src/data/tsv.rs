use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// One labeled example.
pub type Record = (usize, String);

/// Reads `label<TAB>text` lines. Blank lines are skipped.
pub fn load_tsv(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `label<TAB>text`".into()))?;
        let label = label
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err(format!("bad label {label:?}: {e}")))?;
        out.push((label, text.to_string()));
    }
    Ok(out)
}

pub fn write_tsv(path: impl AsRef<Path>, records: &[Record]) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for (label, text) in records {
        writeln!(f, "{label}\t{text}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_records() {
        let f = write("1\tgreat film\n0\tdull, boring\n");
        let r = load_tsv(f.path()).unwrap();
        assert_eq!(r, vec![(1, "great film".into()), (0, "dull, boring".into())]);
    }

    #[test]
    fn empty_file() {
        let f = write("");
        assert!(load_tsv(f.path()).unwrap().is_empty());
    }

    #[test]
    fn missing_tab_names_line() {
        let f = write("1\tok\nno tab here\n");
        match load_tsv(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_label_names_line() {
        let f = write("x\ttext\n");
        assert!(matches!(load_tsv(f.path()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_tsv("/nonexistent/claqs.tsv"), Err(Error::Io { .. })));
    }

    #[test]
    fn write_then_read() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let records = vec![(0, "a b".to_string()), (1, "c".to_string())];
        write_tsv(f.path(), &records).unwrap();
        assert_eq!(load_tsv(f.path()).unwrap(), records);
    }
}
