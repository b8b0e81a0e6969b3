//! Flat `key = value` configuration files and flag resolution.
//!
//! Every subcommand option can come from the command line or from a config
//! file key named `<subcommand>.<flag>`. Command-line flags win. Whatever a
//! run actually used is echoed to `resolved.config` in the output directory,
//! and that file is itself a valid `--config` input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

/// A failure with its process exit code already decided.
#[derive(Debug)]
pub enum AppError {
    /// Bad invocation: unknown or unparsable option, missing required flag.
    Usage(String),
    /// Bad input data: unreadable or malformed files, invalid shapes.
    Data(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Data(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Data(m) => m,
        }
    }
}

impl From<multiway::Error> for AppError {
    fn from(e: multiway::Error) -> Self {
        AppError::Data(e.to_string())
    }
}

pub type AppResult<T> = Result<T, AppError>;

/// Parses `key = value` lines. `#` starts a comment, blank lines are
/// skipped, duplicate keys are rejected.
pub fn parse_config(src: &str, origin: &str) -> AppResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in src.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(AppError::Data(format!(
                "{origin}:{}: expected `key = value`, got {line:?}",
                i + 1
            )));
        };
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(AppError::Data(format!("{origin}:{}: empty key", i + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(AppError::Data(format!(
                "{origin}:{}: duplicate key {key:?}",
                i + 1
            )));
        }
    }
    Ok(map)
}

pub fn read_config(path: &Path) -> AppResult<BTreeMap<String, String>> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
    parse_config(&src, &path.display().to_string())
}

/// Merges command-line flags with config-file keys for one subcommand and
/// records everything that was used.
pub struct Resolver {
    prefix: &'static str,
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
    known: BTreeSet<String>,
}

impl Resolver {
    pub fn new(prefix: &'static str, config: Option<&str>) -> AppResult<Self> {
        let file = match config {
            Some(path) => read_config(Path::new(path))?,
            None => BTreeMap::new(),
        };
        Ok(Resolver {
            prefix,
            file,
            resolved: BTreeMap::new(),
            known: BTreeSet::new(),
        })
    }

    fn key(&mut self, name: &str) -> String {
        let key = format!("{}.{name}", self.prefix);
        self.known.insert(key.clone());
        key
    }

    fn from_file<T: FromStr>(&self, key: &str) -> AppResult<Option<T>> {
        match self.file.get(key) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|_| {
                AppError::Usage(format!("config key {key}: cannot parse value {s:?}"))
            }),
        }
    }

    /// Required option: command line, then config file, then `default`;
    /// usage error if all three are absent.
    pub fn value<T>(&mut self, name: &str, cli: Option<T>, default: Option<T>) -> AppResult<T>
    where
        T: FromStr + Display,
    {
        let key = self.key(name);
        let v = match cli {
            Some(v) => v,
            None => match self.from_file(&key)? {
                Some(v) => v,
                None => default.ok_or_else(|| {
                    AppError::Usage(format!("missing --{name} (or config key {key})"))
                })?,
            },
        };
        self.resolved.insert(key, v.to_string());
        Ok(v)
    }

    /// Option without a default; absent everywhere is fine.
    pub fn optional<T>(&mut self, name: &str, cli: Option<T>) -> AppResult<Option<T>>
    where
        T: FromStr + Display,
    {
        let key = self.key(name);
        let v = match cli {
            Some(v) => Some(v),
            None => self.from_file(&key)?,
        };
        if let Some(v) = &v {
            self.resolved.insert(key, v.to_string());
        }
        Ok(v)
    }

    /// Boolean switch: true on the command line wins, otherwise the config
    /// value, otherwise false.
    pub fn flag(&mut self, name: &str, cli: bool) -> AppResult<bool> {
        let key = self.key(name);
        let v = if cli {
            true
        } else {
            self.from_file::<bool>(&key)?.unwrap_or(false)
        };
        self.resolved.insert(key, v.to_string());
        Ok(v)
    }

    /// Rejects config keys under this subcommand's prefix that no option
    /// consumed. Keys for other subcommands are left alone so one file can
    /// drive a whole pipeline.
    pub fn reject_unknown(&self) -> AppResult<()> {
        let prefix = format!("{}.", self.prefix);
        let stray: Vec<&str> = self
            .file
            .keys()
            .filter(|k| k.starts_with(&prefix) && !self.known.contains(*k))
            .map(|k| k.as_str())
            .collect();
        if stray.is_empty() {
            Ok(())
        } else {
            Err(AppError::Usage(format!(
                "unknown config keys: {}",
                stray.join(", ")
            )))
        }
    }

    /// The `resolved.config` echo: every option the run used, sorted.
    pub fn echo(&self) -> String {
        let mut out = String::from("# resolved configuration\n");
        for (k, v) in &self.resolved {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// Comma-separated usize list; empty input means an empty list.
pub fn parse_usize_list(s: &str, what: &str) -> AppResult<Vec<usize>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| AppError::Usage(format!("{what}: {p:?} is not a nonnegative integer")))
        })
        .collect()
}

/// Comma-separated f64 list; empty input means an empty list.
pub fn parse_f64_list(s: &str, what: &str) -> AppResult<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| AppError::Usage(format!("{what}: {p:?} is not a number")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let map = parse_config("a.x = 1\n\n# note\nb.y = two # trailing\n", "t").unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map["a.x"], "1");
        assert_eq!(map["b.y"], "two");
    }

    #[test]
    fn rejects_duplicates_and_bad_lines() {
        let err = parse_config("a = 1\na = 2\n", "cfg").unwrap_err();
        assert!(err.message().contains("cfg:2"), "{}", err.message());
        let err = parse_config("just words\n", "cfg").unwrap_err();
        assert!(err.message().contains("key = value"));
    }

    #[test]
    fn precedence_cli_config_default() {
        let mut r = Resolver {
            prefix: "demo",
            file: parse_config("demo.n = 7\n", "t").unwrap(),
            resolved: BTreeMap::new(),
            known: BTreeSet::new(),
        };
        assert_eq!(r.value("n", Some(3usize), Some(1)).unwrap(), 3);
        assert_eq!(r.value("m", None::<usize>, Some(1)).unwrap(), 1);
        let mut r = Resolver {
            prefix: "demo",
            file: parse_config("demo.n = 7\n", "t").unwrap(),
            resolved: BTreeMap::new(),
            known: BTreeSet::new(),
        };
        assert_eq!(r.value("n", None::<usize>, Some(1)).unwrap(), 7);
        assert!(r.value("k", None::<usize>, None).is_err());
    }

    #[test]
    fn echo_is_sorted_and_reparsable() {
        let mut r = Resolver::new("demo", None).unwrap();
        r.value("z", Some(1usize), None).unwrap();
        r.value("a", Some("x".to_string()), None).unwrap();
        let echo = r.echo();
        assert_eq!(echo, "# resolved configuration\ndemo.a = x\ndemo.z = 1\n");
        let back = parse_config(&echo, "echo").unwrap();
        assert_eq!(back["demo.z"], "1");
    }

    #[test]
    fn unknown_keys_under_prefix_rejected() {
        let mut r = Resolver {
            prefix: "demo",
            file: parse_config("demo.used = 1\ndemo.stray = 2\nother.x = 3\n", "t").unwrap(),
            resolved: BTreeMap::new(),
            known: BTreeSet::new(),
        };
        r.value("used", None::<usize>, Some(0)).unwrap();
        let err = r.reject_unknown().unwrap_err();
        assert!(err.message().contains("demo.stray"));
        assert!(!err.message().contains("other.x"));
    }

    #[test]
    fn lists_parse_and_reject() {
        assert_eq!(parse_usize_list("2, 3,4", "dims").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_usize_list("", "dims").unwrap(), Vec::<usize>::new());
        assert!(parse_usize_list("2,-1", "dims").is_err());
        assert_eq!(parse_f64_list("0.5,1e3", "w").unwrap(), vec![0.5, 1000.0]);
    }
}
