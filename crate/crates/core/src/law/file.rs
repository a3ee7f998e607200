//! Law files.
//!
//! A law file is TOML with a top-level number `p0` and an array of tables
//! `atoms`, each holding a number `prob` and an array `ages` of positive,
//! nondecreasing integers:
//!
//! ```toml
//! p0 = 0.25
//!
//! [[atoms]]
//! prob = 0.75
//! ages = [1, 1]
//! ```
//!
//! `p0` defaults to 0 and `atoms` to the empty list. Unknown keys are
//! rejected. Errors carry the line of the offending value.

use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use toml::{Spanned, Value};

use super::{check_ages, validate_law, LawError, RawLaw, ReproductionLaw};

#[derive(Debug, Clone, PartialEq)]
pub enum LawFileError {
    Io { path: String, message: String },
    Syntax { line: usize, message: String },
    Field { line: usize, field: String, message: String },
    Law { line: Option<usize>, source: LawError },
    UnknownBuiltin(String),
}

impl fmt::Display for LawFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io { path, message } => write!(f, "cannot read {path}: {message}"),
            Self::Syntax { line, message } => write!(f, "line {line}: {message}"),
            Self::Field {
                line,
                field,
                message,
            } => write!(f, "line {line}, field `{field}`: {message}"),
            Self::Law {
                line: Some(line),
                source,
            } => write!(f, "line {line}: {source}"),
            Self::Law { line: None, source } => write!(f, "{source}"),
            Self::UnknownBuiltin(name) => write!(
                f,
                "unknown built-in law `{name}` (known: {})",
                BUILTIN_NAMES.join(", ")
            ),
        }
    }
}

impl std::error::Error for LawFileError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileLaw {
    #[serde(default)]
    p0: Option<Spanned<Value>>,
    #[serde(default)]
    atoms: Vec<Spanned<FileAtom>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileAtom {
    prob: Spanned<Value>,
    ages: Spanned<Vec<Spanned<Value>>>,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    let end = span.start.min(text.len());
    text[..end].bytes().filter(|&b| b == b'\n').count() + 1
}

fn number(text: &str, field: &str, value: &Spanned<Value>) -> Result<f64, LawFileError> {
    match value.get_ref() {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(LawFileError::Field {
            line: line_of(text, value.span()),
            field: field.to_string(),
            message: format!("expected a number, found {}", other.type_str()),
        }),
    }
}

/// Parses and validates a law from TOML text.
pub fn parse_law(text: &str) -> Result<ReproductionLaw, LawFileError> {
    let file: FileLaw = toml::from_str(text).map_err(|e| LawFileError::Syntax {
        line: e.span().map(|s| line_of(text, s)).unwrap_or(1),
        message: e.message().to_string(),
    })?;
    let p0 = match &file.p0 {
        Some(v) => number(text, "p0", v)?,
        None => 0.0,
    };
    let mut raw = RawLaw {
        p0,
        atoms: Vec::with_capacity(file.atoms.len()),
    };
    for (index, atom) in file.atoms.iter().enumerate() {
        let atom_ref = atom.get_ref();
        let prob = number(text, &format!("atoms[{index}].prob"), &atom_ref.prob)?;
        let mut ages = Vec::with_capacity(atom_ref.ages.get_ref().len());
        for age in atom_ref.ages.get_ref() {
            match age.get_ref() {
                Value::Integer(i) => ages.push(*i),
                other => {
                    return Err(LawFileError::Field {
                        line: line_of(text, age.span()),
                        field: format!("atoms[{index}].ages"),
                        message: format!("expected an integer age, found {}", other.type_str()),
                    })
                }
            }
        }
        let line = Some(line_of(text, atom_ref.ages.span()));
        if !(0.0..=1.0).contains(&prob) {
            return Err(LawFileError::Law {
                line,
                source: LawError::NonProbability(format!("atom mass {prob} is outside [0, 1]")),
            });
        }
        check_ages(&ages, false).map_err(|source| LawFileError::Law { line, source })?;
        raw.atoms.push((prob, ages));
    }
    validate_law(&raw).map_err(|source| LawFileError::Law { line: None, source })
}

/// Reads a law from `path`; `builtin:NAME` selects a built-in law instead.
pub fn load_law(source: &str) -> Result<ReproductionLaw, LawFileError> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return builtin(name);
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).map_err(|e| LawFileError::Io {
        path: source.to_string(),
        message: e.to_string(),
    })?;
    parse_law(&text)
}

pub const BUILTIN_NAMES: [&str; 4] = ["LAW-A", "LAW-B", "LAW-D", "LAW-E"];

/// Built-in laws.
///
/// * `LAW-A`: Galton-Watson, no children w.p. 1/4, two at age 1 w.p. 3/4.
/// * `LAW-B`: deterministic, daughters at ages 1 and 2.
/// * `LAW-D`: deterministic delayed law, two daughters at age 2 (period 2).
/// * `LAW-E`: mixed ages, p0 = 0.2, (0.3, [1]), (0.5, [1, 3]).
pub fn builtin(name: &str) -> Result<ReproductionLaw, LawFileError> {
    let law = match name {
        "LAW-A" => ReproductionLaw::new(0.25, &[(0.75, &[1, 1])]),
        "LAW-B" => ReproductionLaw::new(0.0, &[(1.0, &[1, 2])]),
        "LAW-D" => ReproductionLaw::new(0.0, &[(1.0, &[2, 2])]),
        "LAW-E" => ReproductionLaw::new(0.2, &[(0.3, &[1]), (0.5, &[1, 3])]),
        _ => return Err(LawFileError::UnknownBuiltin(name.to_string())),
    };
    Ok(law.expect("built-in laws are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_array_of_tables() {
        let law = parse_law("p0 = 0.25\n\n[[atoms]]\nprob = 0.75\nages = [1, 1]\n").unwrap();
        assert_eq!(law, builtin("LAW-A").unwrap());
    }

    #[test]
    fn parses_inline_atoms_and_integer_masses() {
        let law = parse_law("atoms = [{ prob = 1, ages = [1, 2] }]").unwrap();
        assert_eq!(law, builtin("LAW-B").unwrap());
    }

    #[test]
    fn reports_line_of_bad_ages() {
        let text = "p0 = 0.5\n[[atoms]]\nprob = 0.25\nages = [1]\n[[atoms]]\nprob = 0.25\nages = [3, 2]\n";
        match parse_law(text).unwrap_err() {
            LawFileError::Law {
                line: Some(7),
                source: LawError::BadAges { .. },
            } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reports_field_of_non_number() {
        let text = "p0 = 0.5\n[[atoms]]\nprob = \"half\"\nages = [1]\n";
        match parse_law(text).unwrap_err() {
            LawFileError::Field { line, field, .. } => {
                assert_eq!(line, 3);
                assert_eq!(field, "atoms[0].prob");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reports_syntax_and_unknown_keys() {
        let err = parse_law("p0 = 0.5\natoms = [\n").unwrap_err();
        assert!(matches!(err, LawFileError::Syntax { .. }), "{err:?}");
        let err = parse_law("p0 = 1\nq = 2\n").unwrap_err();
        match err {
            LawFileError::Syntax { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains('q'), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_probability_is_reported() {
        let err = parse_law("p0 = 0.5\n[[atoms]]\nprob = 0.6\nages = [1]\n").unwrap_err();
        assert!(matches!(
            err,
            LawFileError::Law {
                source: LawError::NonProbability(_),
                ..
            }
        ));
    }

    #[test]
    fn builtins_resolve() {
        for name in BUILTIN_NAMES {
            load_law(&format!("builtin:{name}")).unwrap();
        }
        assert!(matches!(
            load_law("builtin:LAW-Z"),
            Err(LawFileError::UnknownBuiltin(_))
        ));
        assert!(matches!(
            load_law("/nonexistent/x.law"),
            Err(LawFileError::Io { .. })
        ));
    }
}
