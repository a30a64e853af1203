//! Versioned schema migrations.
//!
//! Column layout follows the original `admin`, `users`, `messages` and
//! `report` tables with three changes: passwords are stored as salted
//! digests, the message read flag is called `read_state`, and timestamps
//! are integer microseconds since the Unix epoch.

use chrono::{DateTime, Utc};
use rusqlite::{Connection, OptionalExtension};

use super::{from_micros, StoreError};

pub(super) struct Migration {
    pub version: u32,
    pub steps: &'static [(&'static str, &'static str)],
}

pub(super) const MIGRATIONS: &[Migration] = &[Migration {
    version: 1,
    steps: &[
        (
            "create admin",
            "CREATE TABLE admin (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                email TEXT NOT NULL UNIQUE COLLATE NOCASE CHECK (length(email) BETWEEN 1 AND 1024),
                password_digest TEXT NOT NULL
            )",
        ),
        (
            "create users",
            "CREATE TABLE users (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                name TEXT NOT NULL CHECK (length(name) BETWEEN 1 AND 200),
                email TEXT NOT NULL UNIQUE COLLATE NOCASE CHECK (length(email) BETWEEN 1 AND 1024),
                phone TEXT NOT NULL,
                password_digest TEXT NOT NULL,
                role TEXT NOT NULL CHECK (role IN ('S', 'C')),
                status TEXT NOT NULL DEFAULT 'Not Verified'
                    CHECK (status IN ('Verified', 'Not Verified')),
                created_at INTEGER NOT NULL
            )",
        ),
        (
            "create messages",
            "CREATE TABLE messages (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                from_user INTEGER NOT NULL REFERENCES users(id),
                to_user INTEGER NOT NULL REFERENCES users(id),
                body TEXT NOT NULL CHECK (length(body) BETWEEN 1 AND 65535),
                read_state INTEGER NOT NULL DEFAULT 0 CHECK (read_state IN (0, 1)),
                created_at INTEGER NOT NULL,
                CHECK (from_user <> to_user)
            )",
        ),
        (
            "index messages by recipient",
            "CREATE INDEX messages_to_user ON messages (to_user, created_at DESC, id DESC)",
        ),
        (
            "create reports",
            "CREATE TABLE reports (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                company_id INTEGER NOT NULL REFERENCES users(id),
                school_id INTEGER NOT NULL REFERENCES users(id),
                student_name TEXT NOT NULL CHECK (length(student_name) BETWEEN 1 AND 200),
                period TEXT NOT NULL CHECK (length(period) BETWEEN 1 AND 100),
                body TEXT NOT NULL CHECK (length(body) BETWEEN 1 AND 65535),
                created_at INTEGER NOT NULL
            )",
        ),
        (
            "index reports by school",
            "CREATE INDEX reports_school ON reports (school_id, created_at DESC, id DESC)",
        ),
        (
            "create sessions",
            "CREATE TABLE sessions (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                token TEXT NOT NULL UNIQUE,
                kind TEXT NOT NULL CHECK (kind IN ('user', 'admin')),
                principal_id INTEGER NOT NULL,
                issued_at INTEGER NOT NULL,
                expires_at INTEGER NOT NULL
            )",
        ),
        (
            "create courses",
            "CREATE TABLE courses (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                code TEXT NOT NULL UNIQUE,
                title TEXT NOT NULL CHECK (length(title) BETWEEN 1 AND 200),
                units INTEGER NOT NULL CHECK (units BETWEEN 1 AND 6),
                level INTEGER NOT NULL CHECK (level IN (100, 200, 300, 400)),
                elective INTEGER NOT NULL CHECK (elective IN (0, 1))
            )",
        ),
        (
            "guard read_state monotonicity",
            "CREATE TRIGGER messages_read_state_monotone
                BEFORE UPDATE OF read_state ON messages
                WHEN OLD.read_state = 1 AND NEW.read_state <> 1
             BEGIN SELECT RAISE(ABORT, 'read_state cannot go from read to unread'); END",
        ),
        (
            "guard verification monotonicity",
            "CREATE TRIGGER users_status_monotone
                BEFORE UPDATE OF status ON users
                WHEN OLD.status = 'Verified' AND NEW.status <> 'Verified'
             BEGIN SELECT RAISE(ABORT, 'verified accounts cannot be unverified'); END",
        ),
        (
            "freeze reports",
            "CREATE TRIGGER reports_immutable BEFORE UPDATE ON reports
             BEGIN SELECT RAISE(ABORT, 'reports are immutable'); END",
        ),
    ],
}];

pub const LATEST_VERSION: u32 = 1;

/// A migration that has been applied to the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemaVersion {
    pub version: u32,
    pub applied_at: DateTime<Utc>,
}

fn ensure_version_table(conn: &Connection) -> rusqlite::Result<()> {
    conn.execute(
        "CREATE TABLE IF NOT EXISTS schema_version (
            version INTEGER PRIMARY KEY,
            applied_at INTEGER NOT NULL
        )",
        [],
    )?;
    Ok(())
}

pub(super) fn current(conn: &Connection) -> Result<Option<SchemaVersion>, StoreError> {
    ensure_version_table(conn)?;
    let row: Option<(i64, i64)> = conn
        .query_row(
            "SELECT version, applied_at FROM schema_version ORDER BY version DESC LIMIT 1",
            [],
            |r| Ok((r.get(0)?, r.get(1)?)),
        )
        .optional()?;
    Ok(row.map(|(v, at)| SchemaVersion {
        version: v as u32,
        applied_at: from_micros(at),
    }))
}

pub(super) fn migrate(conn: &mut Connection, now_micros: i64) -> Result<SchemaVersion, StoreError> {
    ensure_version_table(conn)?;

    let applied: Vec<u32> = {
        let mut stmt = conn.prepare("SELECT version FROM schema_version ORDER BY version")?;
        let rows = stmt.query_map([], |r| r.get::<_, i64>(0))?;
        rows.map(|v| v.map(|v| v as u32)).collect::<Result<_, _>>()?
    };
    // Versions must be exactly 1..=n.
    if applied.iter().enumerate().any(|(i, &v)| v != i as u32 + 1) {
        return Err(StoreError::Corrupt(format!(
            "schema_version has gaps: {applied:?}"
        )));
    }
    let have = applied.len() as u32;
    if have > LATEST_VERSION {
        return Err(StoreError::Corrupt(format!(
            "store is at schema version {have}, newer than supported {LATEST_VERSION}"
        )));
    }

    for migration in MIGRATIONS.iter().filter(|m| m.version > have) {
        let tx = conn.transaction()?;
        for (step, sql) in migration.steps {
            tx.execute_batch(sql).map_err(|source| StoreError::MigrationFailed {
                version: migration.version,
                step,
                source,
            })?;
        }
        tx.execute(
            "INSERT INTO schema_version (version, applied_at) VALUES (?1, ?2)",
            (migration.version, now_micros),
        )?;
        tx.commit()?;
        tracing::info!(version = migration.version, "applied schema migration");
    }

    current(conn)?.ok_or_else(|| StoreError::Corrupt("schema_version is empty".into()))
}
