//! Persistence over an embedded SQLite database.
//!
//! A [`Store`] is a cheap, cloneable handle around one connection guarded
//! by a mutex. Every public method takes the lock once, so each operation
//! is atomic and callers never see a half-applied change.
//!
//! Queries return rows newest first (`created_at` descending, then `id`
//! descending). The only mutations besides inserts are the whitelisted
//! [`UserUpdate`] and [`MessageUpdate`] changes.

mod schema;

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use rusqlite::types::Value;
use rusqlite::{Connection, ErrorCode, OpenFlags, OptionalExtension, Row};
use thiserror::Error;

use crate::clock::{Clock, SystemClock};
use crate::model::{
    AdminAccount, Course, Level, Message, MessageId, NewMessage, NewReport, NewUser,
    PasswordDigest, PrincipalKind, ReadState, Report, Role, Session, Status, UserAccount, UserId,
};

pub use schema::{SchemaVersion, LATEST_VERSION};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot open store at {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("store is corrupt or not a database: {0}")]
    Corrupt(String),
    #[error("migration to version {version} failed at step '{step}': {source}")]
    MigrationFailed {
        version: u32,
        step: &'static str,
        #[source]
        source: rusqlite::Error,
    },
    #[error("duplicate {0}")]
    UniqueViolation(&'static str),
    #[error("{entity} {id} not found")]
    NotFound { entity: &'static str, id: String },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("database error: {0}")]
    Sqlite(rusqlite::Error),
}

impl From<rusqlite::Error> for StoreError {
    fn from(e: rusqlite::Error) -> Self {
        if let rusqlite::Error::SqliteFailure(err, ref msg) = e {
            match err.code {
                ErrorCode::NotADatabase | ErrorCode::DatabaseCorrupt => {
                    return StoreError::Corrupt(err.to_string());
                }
                ErrorCode::ConstraintViolation => {
                    // SQLITE_CONSTRAINT_UNIQUE / _PRIMARYKEY
                    if matches!(err.extended_code, 2067 | 1555) {
                        let what = match msg.as_deref() {
                            Some(m) if m.contains("email") => "email",
                            Some(m) if m.contains("code") => "course code",
                            Some(m) if m.contains("token") => "session token",
                            _ => "key",
                        };
                        return StoreError::UniqueViolation(what);
                    }
                    return StoreError::InvariantViolation(
                        msg.clone().unwrap_or_else(|| err.to_string()),
                    );
                }
                _ => {}
            }
        }
        StoreError::Sqlite(e)
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreConfig {
    InMemory,
    FileBacked(PathBuf),
}

impl StoreConfig {
    /// `":memory:"` selects an in-memory store, anything else is a file path.
    pub fn from_db_arg(arg: &str) -> StoreConfig {
        if arg == ":memory:" {
            StoreConfig::InMemory
        } else {
            StoreConfig::FileBacked(PathBuf::from(arg))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserUpdate {
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageUpdate {
    MarkRead,
}

/// Result of [`Store::update_message`]. `changed` is true only for the
/// call that performed the Unread to Read transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageUpdated {
    pub message: Message,
    pub changed: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UserFilter {
    pub role: Option<Role>,
    pub status: Option<Status>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MessageFilter {
    pub from_user: Option<UserId>,
    pub to_user: Option<UserId>,
    pub read_state: Option<ReadState>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportFilter {
    pub company_id: Option<UserId>,
    pub school_id: Option<UserId>,
}

#[derive(Clone)]
pub struct Store {
    inner: Arc<Inner>,
}

struct Inner {
    conn: Mutex<Connection>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").finish_non_exhaustive()
    }
}

pub(crate) fn to_micros(t: DateTime<Utc>) -> i64 {
    t.timestamp_micros()
}

pub(crate) fn from_micros(us: i64) -> DateTime<Utc> {
    DateTime::from_timestamp_micros(us).unwrap_or_default()
}

const USER_COLUMNS: &str = "id, name, email, phone, password_digest, role, status, created_at";
const MESSAGE_COLUMNS: &str = "id, from_user, to_user, body, read_state, created_at";
const REPORT_COLUMNS: &str = "id, company_id, school_id, student_name, period, body, created_at";
const NEWEST_FIRST: &str = "ORDER BY created_at DESC, id DESC";

fn bad_column(idx: usize, what: &str) -> rusqlite::Error {
    rusqlite::Error::FromSqlConversionFailure(
        idx,
        rusqlite::types::Type::Text,
        format!("unexpected {what}").into(),
    )
}

fn user_from_row(r: &Row<'_>) -> rusqlite::Result<UserAccount> {
    let role: String = r.get(5)?;
    let status: String = r.get(6)?;
    Ok(UserAccount {
        id: r.get(0)?,
        name: r.get(1)?,
        email: r.get(2)?,
        phone: r.get(3)?,
        password_digest: PasswordDigest::new(r.get::<_, String>(4)?),
        role: Role::from_code(&role).ok_or_else(|| bad_column(5, "role"))?,
        status: Status::from_db(&status).ok_or_else(|| bad_column(6, "status"))?,
        created_at: from_micros(r.get(7)?),
    })
}

fn message_from_row(r: &Row<'_>) -> rusqlite::Result<Message> {
    Ok(Message {
        id: r.get(0)?,
        from_user: r.get(1)?,
        to_user: r.get(2)?,
        body: r.get(3)?,
        read_state: ReadState::from_flag(r.get(4)?).ok_or_else(|| bad_column(4, "read_state"))?,
        created_at: from_micros(r.get(5)?),
    })
}

fn report_from_row(r: &Row<'_>) -> rusqlite::Result<Report> {
    Ok(Report {
        id: r.get(0)?,
        company_id: r.get(1)?,
        school_id: r.get(2)?,
        student_name: r.get(3)?,
        period: r.get(4)?,
        body: r.get(5)?,
        created_at: from_micros(r.get(6)?),
    })
}

fn session_from_row(r: &Row<'_>) -> rusqlite::Result<Session> {
    let kind: String = r.get(1)?;
    Ok(Session {
        token: r.get(0)?,
        kind: PrincipalKind::from_db(&kind).ok_or_else(|| bad_column(1, "kind"))?,
        principal_id: r.get(2)?,
        issued_at: from_micros(r.get(3)?),
        expires_at: from_micros(r.get(4)?),
    })
}

fn course_from_row(r: &Row<'_>) -> rusqlite::Result<Course> {
    let level: i64 = r.get(3)?;
    let level = u16::try_from(level)
        .ok()
        .and_then(|l| Level::try_from(l).ok())
        .ok_or_else(|| bad_column(3, "level"))?;
    Ok(Course {
        code: r.get(0)?,
        title: r.get(1)?,
        units: r.get(2)?,
        level,
        elective: r.get(4)?,
    })
}

/// Accumulates `col = ?` conditions for the filtered queries.
#[derive(Default)]
struct Where {
    clauses: Vec<&'static str>,
    params: Vec<Value>,
}

impl Where {
    fn add(&mut self, clause: &'static str, value: Option<Value>) {
        if let Some(v) = value {
            self.clauses.push(clause);
            self.params.push(v);
        }
    }

    fn sql(&self) -> String {
        if self.clauses.is_empty() {
            String::new()
        } else {
            format!("WHERE {}", self.clauses.join(" AND "))
        }
    }
}

impl Store {
    /// Open (creating if needed) and migrate to the latest schema.
    pub fn open(config: &StoreConfig) -> Result<Store> {
        Store::open_with_clock(config, Arc::new(SystemClock))
    }

    pub fn open_with_clock(config: &StoreConfig, clock: Arc<dyn Clock>) -> Result<Store> {
        let conn = match config {
            StoreConfig::InMemory => Connection::open_in_memory()?,
            StoreConfig::FileBacked(path) => open_file(path)?,
        };
        conn.pragma_update(None, "foreign_keys", true)?;
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        let store = Store {
            inner: Arc::new(Inner {
                conn: Mutex::new(conn),
                clock,
            }),
        };
        store.migrate()?;
        Ok(store)
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        // A panic while holding the lock cannot leave a half-applied
        // transaction behind, so a poisoned lock is still usable.
        self.inner.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.inner.clock
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.inner.clock.now()
    }

    /// Apply any pending migrations. Idempotent.
    pub fn migrate(&self) -> Result<SchemaVersion> {
        let now = to_micros(self.now());
        schema::migrate(&mut self.conn(), now)
    }

    pub fn schema_version(&self) -> Result<Option<SchemaVersion>> {
        schema::current(&self.conn())
    }

    pub fn table_names(&self) -> Result<Vec<String>> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name",
        )?;
        let names = stmt
            .query_map([], |r| r.get(0))?
            .collect::<rusqlite::Result<Vec<String>>>()?;
        Ok(names)
    }

    /// True when no user or admin account exists.
    pub fn has_no_accounts(&self) -> Result<bool> {
        let conn = self.conn();
        let n: i64 = conn.query_row(
            "SELECT (SELECT count(*) FROM users) + (SELECT count(*) FROM admin)",
            [],
            |r| r.get(0),
        )?;
        Ok(n == 0)
    }

    /// Remove every account, message, report and session and restart id
    /// sequences. Courses and schema history are kept. Only the demo
    /// seeder calls this.
    pub fn wipe_accounts(&self) -> Result<()> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        tx.execute_batch(
            "DELETE FROM sessions;
             DELETE FROM reports;
             DELETE FROM messages;
             DELETE FROM users;
             DELETE FROM admin;
             DELETE FROM sqlite_sequence WHERE name IN ('sessions', 'reports', 'messages', 'users', 'admin');",
        )?;
        tx.commit()?;
        Ok(())
    }

    // ---- users ----

    pub fn insert_user(&self, user: &NewUser) -> Result<UserAccount> {
        let now = self.now();
        let conn = self.conn();
        conn.execute(
            "INSERT INTO users (name, email, phone, password_digest, role, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            (
                &user.name,
                crate::model::normalize_email(&user.email),
                &user.phone,
                user.password_digest.as_str(),
                user.role.code().to_string(),
                to_micros(now),
            ),
        )?;
        let id = conn.last_insert_rowid();
        find_user(&conn, id)?.ok_or_else(|| not_found("user", id))
    }

    pub fn find_user(&self, id: UserId) -> Result<Option<UserAccount>> {
        find_user(&self.conn(), id)
    }

    pub fn find_user_by_email(&self, email: &str) -> Result<Option<UserAccount>> {
        let conn = self.conn();
        let user = conn
            .query_row(
                &format!("SELECT {USER_COLUMNS} FROM users WHERE email = ?1"),
                [crate::model::normalize_email(email)],
                user_from_row,
            )
            .optional()?;
        Ok(user)
    }

    pub fn query_users(&self, filter: &UserFilter) -> Result<Vec<UserAccount>> {
        let mut w = Where::default();
        w.add("role = ?", filter.role.map(|r| Value::Text(r.code().to_string())));
        w.add("status = ?", filter.status.map(|s| Value::Text(s.as_db().into())));
        let sql = format!("SELECT {USER_COLUMNS} FROM users {} {NEWEST_FIRST}", w.sql());
        let conn = self.conn();
        let mut stmt = conn.prepare(&sql)?;
        let rows = stmt
            .query_map(rusqlite::params_from_iter(w.params), user_from_row)?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(rows)
    }

    pub fn update_user(&self, id: UserId, change: UserUpdate) -> Result<UserAccount> {
        let conn = self.conn();
        match change {
            UserUpdate::Verify => {
                conn.execute(
                    "UPDATE users SET status = 'Verified' WHERE id = ?1 AND status <> 'Verified'",
                    [id],
                )?;
            }
        }
        find_user(&conn, id)?.ok_or_else(|| not_found("user", id))
    }

    // ---- admins ----

    pub fn insert_admin(&self, email: &str, digest: &PasswordDigest) -> Result<AdminAccount> {
        let conn = self.conn();
        conn.execute(
            "INSERT INTO admin (email, password_digest) VALUES (?1, ?2)",
            (crate::model::normalize_email(email), digest.as_str()),
        )?;
        let id = conn.last_insert_rowid();
        find_admin(&conn, "id = ?1", Value::Integer(id))?.ok_or_else(|| not_found("admin", id))
    }

    pub fn find_admin(&self, id: i64) -> Result<Option<AdminAccount>> {
        find_admin(&self.conn(), "id = ?1", Value::Integer(id))
    }

    pub fn find_admin_by_email(&self, email: &str) -> Result<Option<AdminAccount>> {
        find_admin(
            &self.conn(),
            "email = ?1",
            Value::Text(crate::model::normalize_email(email)),
        )
    }

    pub fn list_admins(&self) -> Result<Vec<AdminAccount>> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT id, email, password_digest FROM admin ORDER BY id")?;
        let rows = stmt
            .query_map([], admin_from_row)?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(rows)
    }

    // ---- messages ----

    /// Insert after checking that both ends exist, differ, and have
    /// opposite roles.
    pub fn insert_message(&self, msg: &NewMessage) -> Result<Message> {
        let now = self.now();
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        check_opposite_pair(&tx, msg.from_user, msg.to_user)?;
        tx.execute(
            "INSERT INTO messages (from_user, to_user, body, created_at) VALUES (?1, ?2, ?3, ?4)",
            (msg.from_user, msg.to_user, &msg.body, to_micros(now)),
        )?;
        let id = tx.last_insert_rowid();
        let message = find_message(&tx, id)?.ok_or_else(|| not_found("message", id))?;
        tx.commit()?;
        Ok(message)
    }

    pub fn find_message(&self, id: MessageId) -> Result<Option<Message>> {
        find_message(&self.conn(), id)
    }

    pub fn query_messages(&self, filter: &MessageFilter) -> Result<Vec<Message>> {
        let mut w = Where::default();
        w.add("from_user = ?", filter.from_user.map(Value::Integer));
        w.add("to_user = ?", filter.to_user.map(Value::Integer));
        w.add("read_state = ?", filter.read_state.map(|s| Value::Integer(s as i64)));
        let sql = format!("SELECT {MESSAGE_COLUMNS} FROM messages {} {NEWEST_FIRST}", w.sql());
        let conn = self.conn();
        let mut stmt = conn.prepare(&sql)?;
        let rows = stmt
            .query_map(rusqlite::params_from_iter(w.params), message_from_row)?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(rows)
    }

    pub fn count_messages(&self, filter: &MessageFilter) -> Result<u64> {
        let mut w = Where::default();
        w.add("from_user = ?", filter.from_user.map(Value::Integer));
        w.add("to_user = ?", filter.to_user.map(Value::Integer));
        w.add("read_state = ?", filter.read_state.map(|s| Value::Integer(s as i64)));
        let sql = format!("SELECT count(*) FROM messages {}", w.sql());
        let n: i64 = self
            .conn()
            .query_row(&sql, rusqlite::params_from_iter(w.params), |r| r.get(0))?;
        Ok(n as u64)
    }

    pub fn update_message(&self, id: MessageId, change: MessageUpdate) -> Result<MessageUpdated> {
        let conn = self.conn();
        let changed = match change {
            MessageUpdate::MarkRead => conn.execute(
                "UPDATE messages SET read_state = 1 WHERE id = ?1 AND read_state = 0",
                [id],
            )?,
        };
        let message = find_message(&conn, id)?.ok_or_else(|| not_found("message", id))?;
        Ok(MessageUpdated {
            message,
            changed: changed == 1,
        })
    }

    // ---- reports ----

    pub fn insert_report(&self, report: &NewReport) -> Result<Report> {
        let now = self.now();
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let company = find_user(&tx, report.company_id)?
            .ok_or_else(|| invariant(format!("unknown company {}", report.company_id)))?;
        let school = find_user(&tx, report.school_id)?
            .ok_or_else(|| invariant(format!("unknown school {}", report.school_id)))?;
        if company.role != Role::Company || school.role != Role::School {
            return Err(invariant("reports go from a company to a school".into()));
        }
        tx.execute(
            "INSERT INTO reports (company_id, school_id, student_name, period, body, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            (
                report.company_id,
                report.school_id,
                &report.student_name,
                &report.period,
                &report.body,
                to_micros(now),
            ),
        )?;
        let id = tx.last_insert_rowid();
        let stored = tx
            .query_row(
                &format!("SELECT {REPORT_COLUMNS} FROM reports WHERE id = ?1"),
                [id],
                report_from_row,
            )
            .optional()?
            .ok_or_else(|| not_found("report", id))?;
        tx.commit()?;
        Ok(stored)
    }

    pub fn find_report(&self, id: i64) -> Result<Option<Report>> {
        let report = self
            .conn()
            .query_row(
                &format!("SELECT {REPORT_COLUMNS} FROM reports WHERE id = ?1"),
                [id],
                report_from_row,
            )
            .optional()?;
        Ok(report)
    }

    pub fn query_reports(&self, filter: &ReportFilter) -> Result<Vec<Report>> {
        let mut w = Where::default();
        w.add("company_id = ?", filter.company_id.map(Value::Integer));
        w.add("school_id = ?", filter.school_id.map(Value::Integer));
        let sql = format!("SELECT {REPORT_COLUMNS} FROM reports {} {NEWEST_FIRST}", w.sql());
        let conn = self.conn();
        let mut stmt = conn.prepare(&sql)?;
        let rows = stmt
            .query_map(rusqlite::params_from_iter(w.params), report_from_row)?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(rows)
    }

    // ---- sessions ----

    pub fn insert_session(&self, session: &Session) -> Result<()> {
        self.conn().execute(
            "INSERT INTO sessions (token, kind, principal_id, issued_at, expires_at)
             VALUES (?1, ?2, ?3, ?4, ?5)",
            (
                &session.token,
                session.kind.as_db(),
                session.principal_id,
                to_micros(session.issued_at),
                to_micros(session.expires_at),
            ),
        )?;
        Ok(())
    }

    pub fn find_session(&self, token: &str) -> Result<Option<Session>> {
        let session = self
            .conn()
            .query_row(
                "SELECT token, kind, principal_id, issued_at, expires_at FROM sessions WHERE token = ?1",
                [token],
                session_from_row,
            )
            .optional()?;
        Ok(session)
    }

    /// Returns whether a row was removed.
    pub fn delete_session(&self, token: &str) -> Result<bool> {
        let n = self
            .conn()
            .execute("DELETE FROM sessions WHERE token = ?1", [token])?;
        Ok(n > 0)
    }

    pub fn delete_expired_sessions(&self, now: DateTime<Utc>) -> Result<usize> {
        let n = self
            .conn()
            .execute("DELETE FROM sessions WHERE expires_at <= ?1", [to_micros(now)])?;
        Ok(n)
    }

    // ---- courses ----

    pub fn insert_course(&self, course: &Course) -> Result<()> {
        insert_course(&self.conn(), course)
    }

    /// Replace the whole catalogue in one transaction.
    pub fn replace_courses(&self, courses: &[Course]) -> Result<usize> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        tx.execute("DELETE FROM courses", [])?;
        for course in courses {
            insert_course(&tx, course)?;
        }
        tx.commit()?;
        Ok(courses.len())
    }

    /// Courses sorted by code, optionally restricted to one level.
    pub fn query_courses(&self, level: Option<Level>) -> Result<Vec<Course>> {
        let mut w = Where::default();
        w.add("level = ?", level.map(|l| Value::Integer(l.number().into())));
        let sql = format!(
            "SELECT code, title, units, level, elective FROM courses {} ORDER BY code",
            w.sql()
        );
        let conn = self.conn();
        let mut stmt = conn.prepare(&sql)?;
        let rows = stmt
            .query_map(rusqlite::params_from_iter(w.params), course_from_row)?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(rows)
    }
}

fn open_file(path: &Path) -> Result<Connection> {
    let io = |reason: String| StoreError::Io {
        path: path.to_path_buf(),
        reason,
    };
    let conn = Connection::open_with_flags(
        path,
        OpenFlags::SQLITE_OPEN_READ_WRITE
            | OpenFlags::SQLITE_OPEN_CREATE
            | OpenFlags::SQLITE_OPEN_NO_MUTEX
            | OpenFlags::SQLITE_OPEN_URI,
    )
    .map_err(|e| match e {
        rusqlite::Error::SqliteFailure(err, _) if err.code == ErrorCode::NotADatabase => {
            StoreError::Corrupt(err.to_string())
        }
        other => io(other.to_string()),
    })?;
    // SQLite opens lazily; touch the header so a non-database file fails
    // here rather than on first use.
    conn.query_row("PRAGMA schema_version", [], |r| r.get::<_, i64>(0))
        .map_err(|e| match StoreError::from(e) {
            StoreError::Sqlite(inner) => io(inner.to_string()),
            other => other,
        })?;
    Ok(conn)
}

fn not_found(entity: &'static str, id: i64) -> StoreError {
    StoreError::NotFound {
        entity,
        id: id.to_string(),
    }
}

fn invariant(msg: String) -> StoreError {
    StoreError::InvariantViolation(msg)
}

fn find_user(conn: &Connection, id: UserId) -> Result<Option<UserAccount>> {
    let user = conn
        .query_row(
            &format!("SELECT {USER_COLUMNS} FROM users WHERE id = ?1"),
            [id],
            user_from_row,
        )
        .optional()?;
    Ok(user)
}

fn admin_from_row(r: &Row<'_>) -> rusqlite::Result<AdminAccount> {
    Ok(AdminAccount {
        id: r.get(0)?,
        email: r.get(1)?,
        password_digest: PasswordDigest::new(r.get::<_, String>(2)?),
    })
}

fn find_admin(conn: &Connection, cond: &str, value: Value) -> Result<Option<AdminAccount>> {
    let admin = conn
        .query_row(
            &format!("SELECT id, email, password_digest FROM admin WHERE {cond}"),
            [value],
            admin_from_row,
        )
        .optional()?;
    Ok(admin)
}

fn find_message(conn: &Connection, id: MessageId) -> Result<Option<Message>> {
    let message = conn
        .query_row(
            &format!("SELECT {MESSAGE_COLUMNS} FROM messages WHERE id = ?1"),
            [id],
            message_from_row,
        )
        .optional()?;
    Ok(message)
}

fn check_opposite_pair(conn: &Connection, from: UserId, to: UserId) -> Result<()> {
    if from == to {
        return Err(invariant("sender and recipient are the same account".into()));
    }
    let sender = find_user(conn, from)?.ok_or_else(|| invariant(format!("unknown sender {from}")))?;
    let recipient =
        find_user(conn, to)?.ok_or_else(|| invariant(format!("unknown recipient {to}")))?;
    if sender.role == recipient.role {
        return Err(invariant(format!(
            "sender and recipient are both {}",
            sender.role
        )));
    }
    Ok(())
}

fn insert_course(conn: &Connection, course: &Course) -> Result<()> {
    conn.execute(
        "INSERT INTO courses (code, title, units, level, elective) VALUES (?1, ?2, ?3, ?4, ?5)",
        (
            &course.code,
            &course.title,
            course.units,
            course.level.number(),
            course.elective,
        ),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PrincipalKind;

    fn user(name: &str, email: &str, role: Role) -> NewUser {
        NewUser {
            name: name.into(),
            email: email.into(),
            phone: "08035550101".into(),
            password_digest: PasswordDigest::new("$argon2id$v=19$m=8,t=1,p=1$c2FsdHNhbHQ$aGFzaGhhc2g"),
            role,
        }
    }

    fn mem() -> Store {
        Store::open(&StoreConfig::InMemory).unwrap()
    }

    #[test]
    fn fresh_store_has_all_tables() {
        let store = mem();
        let mut tables = store.table_names().unwrap();
        tables.retain(|t| t != "schema_version");
        assert_eq!(
            tables,
            ["admin", "courses", "messages", "reports", "sessions", "users"]
        );
        assert_eq!(store.schema_version().unwrap().unwrap().version, 1);
    }

    #[test]
    fn migrate_is_idempotent() {
        let store = mem();
        let first = store.migrate().unwrap();
        let second = store.migrate().unwrap();
        assert_eq!(first, second);
        assert_eq!(second.version, LATEST_VERSION);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = Store::open(&StoreConfig::FileBacked("/nonexistent-dir/db".into())).unwrap_err();
        assert!(matches!(err, StoreError::Io { .. }), "{err:?}");
    }

    #[test]
    fn garbage_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.db");
        std::fs::write(&path, b"this is definitely not an sqlite database, just some bytes....").unwrap();
        let err = Store::open(&StoreConfig::FileBacked(path)).unwrap_err();
        assert!(matches!(err, StoreError::Corrupt(_)), "{err:?}");
    }

    #[test]
    fn status_defaults_to_not_verified() {
        let store = mem();
        let u = store.insert_user(&user("Redwood", "dept@redwood.edu", Role::School)).unwrap();
        assert_eq!(u.status, Status::NotVerified);
        // Raw insert without a status column also gets the default.
        store
            .conn()
            .execute(
                "INSERT INTO users (name, email, phone, password_digest, role, created_at)
                 VALUES ('x', 'x@y.z', '1234567', 'd', 'C', 0)",
                [],
            )
            .unwrap();
        let raw = store.find_user_by_email("x@y.z").unwrap().unwrap();
        assert_eq!(raw.status, Status::NotVerified);
    }

    #[test]
    fn duplicate_email_is_unique_violation_case_insensitive() {
        let store = mem();
        store.insert_user(&user("A", "dept@school.edu", Role::School)).unwrap();
        let err = store
            .insert_user(&user("B", " DEPT@School.edu ", Role::Company))
            .unwrap_err();
        assert!(matches!(err, StoreError::UniqueViolation("email")), "{err:?}");
    }

    #[test]
    fn message_round_trip_starts_unread() {
        let store = mem();
        let s = store.insert_user(&user("S", "s@s.edu", Role::School)).unwrap();
        let c = store.insert_user(&user("C", "c@c.com", Role::Company)).unwrap();
        let m = store
            .insert_message(&NewMessage { from_user: c.id, to_user: s.id, body: "hi".into() })
            .unwrap();
        assert_eq!(m.read_state, ReadState::Unread);
        assert_eq!(store.find_message(m.id).unwrap(), Some(m));
    }

    #[test]
    fn same_role_and_self_messages_rejected() {
        let store = mem();
        let a = store.insert_user(&user("A", "a@s.edu", Role::School)).unwrap();
        let b = store.insert_user(&user("B", "b@s.edu", Role::School)).unwrap();
        for (from, to) in [(a.id, b.id), (a.id, a.id), (a.id, 999)] {
            let err = store
                .insert_message(&NewMessage { from_user: from, to_user: to, body: "x".into() })
                .unwrap_err();
            assert!(matches!(err, StoreError::InvariantViolation(_)), "{err:?}");
        }
    }

    #[test]
    fn read_state_cannot_regress_even_with_raw_sql() {
        let store = mem();
        let s = store.insert_user(&user("S", "s@s.edu", Role::School)).unwrap();
        let c = store.insert_user(&user("C", "c@c.com", Role::Company)).unwrap();
        let m = store
            .insert_message(&NewMessage { from_user: s.id, to_user: c.id, body: "x".into() })
            .unwrap();
        let first = store.update_message(m.id, MessageUpdate::MarkRead).unwrap();
        assert!(first.changed);
        let second = store.update_message(m.id, MessageUpdate::MarkRead).unwrap();
        assert!(!second.changed);
        assert_eq!(second.message.read_state, ReadState::Read);
        let err = store
            .conn()
            .execute("UPDATE messages SET read_state = 0 WHERE id = ?1", [m.id])
            .map_err(StoreError::from)
            .unwrap_err();
        assert!(matches!(err, StoreError::InvariantViolation(_)), "{err:?}");
    }

    #[test]
    fn verify_is_idempotent_and_monotone() {
        let store = mem();
        let u = store.insert_user(&user("S", "s@s.edu", Role::School)).unwrap();
        let v1 = store.update_user(u.id, UserUpdate::Verify).unwrap();
        let v2 = store.update_user(u.id, UserUpdate::Verify).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(v2.status, Status::Verified);
        assert!(store
            .conn()
            .execute("UPDATE users SET status = 'Not Verified' WHERE id = ?1", [u.id])
            .is_err());
        assert!(matches!(
            store.update_user(42, UserUpdate::Verify),
            Err(StoreError::NotFound { .. })
        ));
    }

    #[test]
    fn reports_require_company_to_school_and_are_immutable() {
        let store = mem();
        let s = store.insert_user(&user("S", "s@s.edu", Role::School)).unwrap();
        let c = store.insert_user(&user("C", "c@c.com", Role::Company)).unwrap();
        let form = |company_id, school_id| NewReport {
            company_id,
            school_id,
            student_name: "Ada".into(),
            period: "2024 SIWES".into(),
            body: "Good".into(),
        };
        assert!(store.insert_report(&form(s.id, c.id)).is_err());
        let r = store.insert_report(&form(c.id, s.id)).unwrap();
        assert_eq!(store.find_report(r.id).unwrap(), Some(r.clone()));
        assert!(store
            .conn()
            .execute("UPDATE reports SET body = 'changed' WHERE id = ?1", [r.id])
            .is_err());
    }

    #[test]
    fn sessions_insert_find_delete() {
        let store = mem();
        let now = store.now();
        let session = Session {
            token: "tok".into(),
            kind: PrincipalKind::Admin,
            principal_id: 1,
            issued_at: now,
            expires_at: now + chrono::Duration::hours(24),
        };
        store.insert_session(&session).unwrap();
        assert!(matches!(
            store.insert_session(&session),
            Err(StoreError::UniqueViolation("session token"))
        ));
        assert_eq!(store.find_session("tok").unwrap(), Some(session));
        assert!(store.delete_session("tok").unwrap());
        assert!(!store.delete_session("tok").unwrap());
        assert_eq!(store.find_session("tok").unwrap(), None);
    }

    #[test]
    fn courses_sorted_and_unique() {
        let store = mem();
        let c = |code: &str, level| Course {
            code: code.into(),
            title: "T".into(),
            units: 3,
            level,
            elective: false,
        };
        store.insert_course(&c("CSC 201", Level::L200)).unwrap();
        store.insert_course(&c("CSC 101", Level::L100)).unwrap();
        assert!(matches!(
            store.insert_course(&c("CSC 101", Level::L100)),
            Err(StoreError::UniqueViolation("course code"))
        ));
        let all: Vec<_> = store.query_courses(None).unwrap().into_iter().map(|c| c.code).collect();
        assert_eq!(all, ["CSC 101", "CSC 201"]);
        assert_eq!(store.query_courses(Some(Level::L200)).unwrap().len(), 1);
        store.replace_courses(&[c("MAT 101", Level::L100)]).unwrap();
        assert_eq!(store.query_courses(None).unwrap().len(), 1);
    }

    #[test]
    fn wipe_restarts_sequences() {
        let store = mem();
        store.insert_user(&user("S", "s@s.edu", Role::School)).unwrap();
        store.insert_admin("a@a.com", &PasswordDigest::new("d")).unwrap();
        assert!(!store.has_no_accounts().unwrap());
        store.wipe_accounts().unwrap();
        assert!(store.has_no_accounts().unwrap());
        let again = store.insert_user(&user("S", "s@s.edu", Role::School)).unwrap();
        assert_eq!(again.id, 1);
    }
}
