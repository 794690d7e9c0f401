use std::path::Path;

use super::KbError;

/// Whether a string names a module source rather than being clause text.
pub fn is_locator(s: &str) -> bool {
    let s = s.trim();
    s.starts_with("http://")
        || s.starts_with("https://")
        || s.starts_with("file:")
        || ((s.starts_with("./") || s.starts_with("../") || s.starts_with('/'))
            && !s.contains(":-"))
        || ((s.ends_with(".rr") || s.ends_with(".prova")) && !s.contains(char::is_whitespace))
}

/// Fetch the text of a module from a file path or an http(s) URL.
pub fn resolve_import(locator: &str) -> Result<String, KbError> {
    let loc = locator.trim();
    if loc.starts_with("http://") || loc.starts_with("https://") {
        let mut resp = ureq::get(loc).call().map_err(|e| match e {
            ureq::Error::StatusCode(404) => KbError::NotFound(loc.to_string()),
            other => KbError::Fetch { locator: loc.to_string(), reason: other.to_string() },
        })?;
        return resp
            .body_mut()
            .read_to_string()
            .map_err(|e| KbError::Fetch { locator: loc.to_string(), reason: e.to_string() });
    }
    let path = loc.strip_prefix("file://").or_else(|| loc.strip_prefix("file:")).unwrap_or(loc);
    let path = Path::new(path);
    if !path.exists() {
        return Err(KbError::NotFound(loc.to_string()));
    }
    std::fs::read_to_string(path)
        .map_err(|e| KbError::Fetch { locator: loc.to_string(), reason: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locator_detection() {
        assert!(is_locator("./examples/test/test.prova"));
        assert!(is_locator("http://host/x.rr"));
        assert!(is_locator("rules.rr"));
        assert!(!is_locator("r(1) :- f(1). f(1)."));
    }

    #[test]
    fn reads_files_and_reports_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.rr");
        std::fs::write(&p, "a.").unwrap();
        assert_eq!(resolve_import(p.to_str().unwrap()).unwrap(), "a.");
        assert!(matches!(resolve_import("./does/not/exist.rr"), Err(KbError::NotFound(_))));
    }
}
