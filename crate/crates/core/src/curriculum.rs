//! Read-only curriculum catalogue loaded from a CSV fixture.
//!
//! The fixture format is strict: header `code,title,units,level,elective`,
//! one course per line, and a single bad row rejects the whole file.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{Course, Level};

pub const FIXTURE_HEADER: [&str; 5] = ["code", "title", "units", "level", "elective"];

/// The shipped transcription of the 100 to 400 level course tables.
pub const SHIPPED_FIXTURE: &str = include_str!("../../../fixtures/bmas_csc.csv");

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: ParseReason },
    #[error("duplicate course code {0:?}")]
    DuplicateCode(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseReason {
    #[error("bad_header: expected code,title,units,level,elective")]
    BadHeader,
    #[error("wrong_field_count: expected 5 fields, found {0}")]
    WrongFieldCount(usize),
    #[error("empty_code")]
    EmptyCode,
    #[error("bad_title")]
    BadTitle,
    #[error("bad_units: {0:?}")]
    BadUnits(String),
    #[error("bad_level: {0:?}")]
    BadLevel(String),
    #[error("bad_elective: {0:?}")]
    BadElective(String),
    #[error("malformed csv: {0}")]
    Malformed(String),
}

fn parse_err(line: u64, reason: ParseReason) -> FixtureError {
    FixtureError::Parse { line, reason }
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<Vec<Course>, FixtureError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_fixture(file)
}

pub fn parse_fixture(input: impl Read) -> Result<Vec<Course>, FixtureError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);

    let mut courses = Vec::new();
    let mut seen = HashSet::new();
    let mut header_seen = false;

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, ParseReason::Malformed(e.to_string()))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);

        if !header_seen {
            if record.iter().ne(FIXTURE_HEADER) {
                return Err(parse_err(line, ParseReason::BadHeader));
            }
            header_seen = true;
            continue;
        }

        let course = parse_row(&record).map_err(|reason| parse_err(line, reason))?;
        if !seen.insert(course.code.clone()) {
            return Err(FixtureError::DuplicateCode(course.code));
        }
        courses.push(course);
    }

    if !header_seen {
        return Err(parse_err(1, ParseReason::BadHeader));
    }
    Ok(courses)
}

fn parse_row(record: &csv::StringRecord) -> Result<Course, ParseReason> {
    if record.len() != FIXTURE_HEADER.len() {
        return Err(ParseReason::WrongFieldCount(record.len()));
    }
    let code = record[0].trim();
    if code.is_empty() {
        return Err(ParseReason::EmptyCode);
    }
    let title = record[1].trim();
    if title.is_empty() || title.chars().count() > crate::model::NAME_MAX_CHARS {
        return Err(ParseReason::BadTitle);
    }
    let units = record[2]
        .trim()
        .parse::<u8>()
        .ok()
        .filter(|u| (1..=6).contains(u))
        .ok_or_else(|| ParseReason::BadUnits(record[2].to_owned()))?;
    let level = record[3]
        .trim()
        .parse::<u16>()
        .ok()
        .and_then(|l| Level::try_from(l).ok())
        .ok_or_else(|| ParseReason::BadLevel(record[3].to_owned()))?;
    let elective = match record[4].trim() {
        "true" => true,
        "false" => false,
        other => return Err(ParseReason::BadElective(other.to_owned())),
    };
    Ok(Course {
        code: code.to_owned(),
        title: title.to_owned(),
        units,
        level,
        elective,
    })
}

/// Serialize courses back into fixture form, in the given order.
pub fn write_fixture(courses: &[Course], out: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(FIXTURE_HEADER)?;
    for c in courses {
        w.write_record([
            c.code.as_str(),
            c.title.as_str(),
            &c.units.to_string(),
            &c.level.number().to_string(),
            if c.elective { "true" } else { "false" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn shipped_courses() -> Vec<Course> {
    parse_fixture(SHIPPED_FIXTURE.as_bytes()).expect("shipped fixture is valid")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalogue {
    courses: Vec<Course>,
}

impl Catalogue {
    pub fn new(mut courses: Vec<Course>) -> Result<Catalogue, FixtureError> {
        let mut seen = HashSet::new();
        for c in &courses {
            if !seen.insert(c.code.as_str()) {
                return Err(FixtureError::DuplicateCode(c.code.clone()));
            }
        }
        courses.sort_by(|a, b| a.code.cmp(&b.code));
        Ok(Catalogue { courses })
    }

    pub fn shipped() -> Catalogue {
        Catalogue::new(shipped_courses()).expect("shipped fixture has unique codes")
    }

    pub fn len(&self) -> usize {
        self.courses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.courses.is_empty()
    }

    /// Sorted by code.
    pub fn list_courses(&self, level: Option<Level>) -> Vec<&Course> {
        self.courses
            .iter()
            .filter(|c| level.is_none_or(|l| c.level == l))
            .collect()
    }

    pub fn find(&self, code: &str) -> Option<&Course> {
        self.courses.iter().find(|c| c.code == code)
    }

    /// Sum of units over the non-elective courses at `level`.
    pub fn total_units(&self, level: Level) -> u32 {
        self.courses
            .iter()
            .filter(|c| c.level == level && !c.elective)
            .map(|c| u32::from(c.units))
            .sum()
    }
}
