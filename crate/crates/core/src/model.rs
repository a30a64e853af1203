//! Entities, enumerations and field-level validation shared by every other
//! module.
//!
//! Everything here is a plain value type. Persistence lives in
//! [`crate::store`], workflow rules in [`crate::auth`] and
//! [`crate::exchange`].

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub const NAME_MAX_CHARS: usize = 200;
pub const EMAIL_MAX_CHARS: usize = 1024;
pub const PHONE_MIN_DIGITS: usize = 7;
pub const PHONE_MAX_DIGITS: usize = 15;
pub const PASSWORD_MIN_CHARS: usize = 8;
pub const BODY_MAX_CHARS: usize = 65_535;
pub const STUDENT_NAME_MAX_CHARS: usize = 200;
pub const PERIOD_MAX_CHARS: usize = 100;

pub type UserId = i64;
pub type AdminId = i64;
pub type MessageId = i64;
pub type ReportId = i64;

/// Which side of the liaison an account represents.
///
/// Stored as the single characters `S` / `C`; serialized as
/// `"school"` / `"company"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    School,
    Company,
}

impl Role {
    pub fn code(self) -> char {
        match self {
            Role::School => 'S',
            Role::Company => 'C',
        }
    }

    pub fn from_code(code: &str) -> Option<Role> {
        match code {
            "S" => Some(Role::School),
            "C" => Some(Role::Company),
            _ => None,
        }
    }

    /// Messages and reports only ever flow between opposite roles.
    pub fn opposite(self) -> Role {
        match self {
            Role::School => Role::Company,
            Role::Company => Role::School,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::School => "school",
            Role::Company => "company",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Verified,
    #[default]
    NotVerified,
}

impl Status {
    /// Column value, matching the original enum('Verified','Not Verified').
    pub fn as_db(self) -> &'static str {
        match self {
            Status::Verified => "Verified",
            Status::NotVerified => "Not Verified",
        }
    }

    pub fn from_db(s: &str) -> Option<Status> {
        match s {
            "Verified" => Some(Status::Verified),
            "Not Verified" => Some(Status::NotVerified),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadState {
    #[default]
    Unread = 0,
    Read = 1,
}

impl ReadState {
    pub fn from_flag(flag: i64) -> Option<ReadState> {
        match flag {
            0 => Some(ReadState::Unread),
            1 => Some(ReadState::Read),
            _ => None,
        }
    }
}

/// Salted password hash in PHC string form. Never serialized, redacted in
/// debug output.
#[derive(Clone, PartialEq, Eq)]
pub struct PasswordDigest(String);

impl PasswordDigest {
    pub fn new(phc: impl Into<String>) -> Self {
        PasswordDigest(phc.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for PasswordDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PasswordDigest(..)")
    }
}

/// A school or company principal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserAccount {
    pub id: UserId,
    pub name: String,
    pub email: String,
    pub phone: String,
    pub password_digest: PasswordDigest,
    pub role: Role,
    pub status: Status,
    pub created_at: DateTime<Utc>,
}

impl UserAccount {
    pub fn is_verified(&self) -> bool {
        self.status == Status::Verified
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdminAccount {
    pub id: AdminId,
    pub email: String,
    pub password_digest: PasswordDigest,
}

/// A directed suggestion from one account to an account of the opposite
/// role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: MessageId,
    pub from_user: UserId,
    pub to_user: UserId,
    pub body: String,
    pub read_state: ReadState,
    pub created_at: DateTime<Utc>,
}

/// A student industrial-training report sent by a company to a school.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub id: ReportId,
    pub company_id: UserId,
    pub school_id: UserId,
    pub student_name: String,
    pub period: String,
    pub body: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewMessage {
    pub from_user: UserId,
    pub to_user: UserId,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewReport {
    pub company_id: UserId,
    pub school_id: UserId,
    pub student_name: String,
    pub period: String,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrincipalKind {
    User,
    Admin,
}

impl PrincipalKind {
    pub fn as_db(self) -> &'static str {
        match self {
            PrincipalKind::User => "user",
            PrincipalKind::Admin => "admin",
        }
    }

    pub fn from_db(s: &str) -> Option<PrincipalKind> {
        match s {
            "user" => Some(PrincipalKind::User),
            "admin" => Some(PrincipalKind::Admin),
            _ => None,
        }
    }
}

/// A login session. `principal_id` points into `users` or `admin`
/// depending on `kind`.
#[derive(Clone, PartialEq, Eq)]
pub struct Session {
    pub token: String,
    pub kind: PrincipalKind,
    pub principal_id: i64,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

impl Session {
    pub fn is_live(&self, now: DateTime<Utc>) -> bool {
        now < self.expires_at
    }
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("kind", &self.kind)
            .field("principal_id", &self.principal_id)
            .field("issued_at", &self.issued_at)
            .field("expires_at", &self.expires_at)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum Level {
    L100,
    L200,
    L300,
    L400,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::L100, Level::L200, Level::L300, Level::L400];

    pub fn number(self) -> u16 {
        match self {
            Level::L100 => 100,
            Level::L200 => 200,
            Level::L300 => 300,
            Level::L400 => 400,
        }
    }
}

impl TryFrom<u16> for Level {
    type Error = String;

    fn try_from(n: u16) -> Result<Level, String> {
        match n {
            100 => Ok(Level::L100),
            200 => Ok(Level::L200),
            300 => Ok(Level::L300),
            400 => Ok(Level::L400),
            other => Err(format!("level {other} is not one of 100, 200, 300, 400")),
        }
    }
}

impl From<Level> for u16 {
    fn from(l: Level) -> u16 {
        l.number()
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// One curriculum row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Course {
    pub code: String,
    pub title: String,
    pub units: u8,
    pub level: Level,
    pub elective: bool,
}

/// Raw input of the registration page. Nothing here has been checked.
#[derive(Clone, Default, Deserialize)]
pub struct RegistrationForm {
    pub name: String,
    pub email: String,
    pub phone: String,
    pub password: String,
    pub password_confirm: String,
    pub role: String,
}

impl fmt::Debug for RegistrationForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegistrationForm")
            .field("name", &self.name)
            .field("email", &self.email)
            .field("phone", &self.phone)
            .field("role", &self.role)
            .finish_non_exhaustive()
    }
}

/// One offending field, as reported by the validators in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldError {
    NameEmpty,
    NameTooLong,
    EmailInvalid,
    EmailTooLong,
    PhoneInvalid,
    PasswordTooShort,
    PasswordMismatch,
    RoleInvalid,
    BodyEmpty,
    BodyTooLong,
    StudentNameEmpty,
    StudentNameTooLong,
    PeriodEmpty,
    PeriodTooLong,
}

impl FieldError {
    pub fn field(self) -> &'static str {
        use FieldError::*;
        match self {
            NameEmpty | NameTooLong => "name",
            EmailInvalid | EmailTooLong => "email",
            PhoneInvalid => "phone",
            PasswordTooShort => "password",
            PasswordMismatch => "password_confirm",
            RoleInvalid => "role",
            BodyEmpty | BodyTooLong => "body",
            StudentNameEmpty | StudentNameTooLong => "student_name",
            PeriodEmpty | PeriodTooLong => "period",
        }
    }

    pub fn code(self) -> &'static str {
        use FieldError::*;
        match self {
            NameEmpty => "name_empty",
            NameTooLong => "name_too_long",
            EmailInvalid => "email_invalid",
            EmailTooLong => "email_too_long",
            PhoneInvalid => "phone_invalid",
            PasswordTooShort => "password_too_short",
            PasswordMismatch => "password_mismatch",
            RoleInvalid => "role_invalid",
            BodyEmpty => "body_empty",
            BodyTooLong => "body_too_long",
            StudentNameEmpty => "student_name_empty",
            StudentNameTooLong => "student_name_too_long",
            PeriodEmpty => "period_empty",
            PeriodTooLong => "period_too_long",
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmailInvalid {
    Empty,
    Format,
    TooLong,
}

/// Trim surrounding whitespace and lowercase. Applied at every boundary
/// that accepts an email so uniqueness is case-insensitive.
pub fn normalize_email(raw: &str) -> String {
    raw.trim().to_lowercase()
}

pub fn validate_email(e: &str) -> Result<(), EmailInvalid> {
    if e.is_empty() {
        return Err(EmailInvalid::Empty);
    }
    if e.chars().count() > EMAIL_MAX_CHARS {
        return Err(EmailInvalid::TooLong);
    }
    let Some((local, domain)) = e.split_once('@') else {
        return Err(EmailInvalid::Format);
    };
    let well_formed = !local.is_empty()
        && !domain.is_empty()
        && !domain.contains('@')
        && domain.contains('.')
        && !domain.starts_with('.')
        && !domain.ends_with('.')
        && !e.chars().any(char::is_whitespace);
    if well_formed {
        Ok(())
    } else {
        Err(EmailInvalid::Format)
    }
}

/// Strip spaces, `+` and `-`, then require 7 to 15 ASCII digits.
pub fn normalize_phone(raw: &str) -> Option<String> {
    let digits: String = raw
        .chars()
        .filter(|c| !matches!(c, ' ' | '+' | '-'))
        .collect();
    let ok = (PHONE_MIN_DIGITS..=PHONE_MAX_DIGITS).contains(&digits.len())
        && digits.bytes().all(|b| b.is_ascii_digit());
    ok.then_some(digits)
}

/// Returns one error per offending field; empty means the form is valid.
pub fn validate_registration(form: &RegistrationForm) -> Vec<FieldError> {
    let mut errors = Vec::new();

    let name = form.name.trim();
    if name.is_empty() {
        errors.push(FieldError::NameEmpty);
    } else if name.chars().count() > NAME_MAX_CHARS {
        errors.push(FieldError::NameTooLong);
    }

    match validate_email(&normalize_email(&form.email)) {
        Ok(()) => {}
        Err(EmailInvalid::TooLong) => errors.push(FieldError::EmailTooLong),
        Err(_) => errors.push(FieldError::EmailInvalid),
    }

    if normalize_phone(&form.phone).is_none() {
        errors.push(FieldError::PhoneInvalid);
    }

    if form.password.chars().count() < PASSWORD_MIN_CHARS {
        errors.push(FieldError::PasswordTooShort);
    } else if form.password != form.password_confirm {
        errors.push(FieldError::PasswordMismatch);
    }

    if Role::from_code(form.role.trim()).is_none() {
        errors.push(FieldError::RoleInvalid);
    }

    errors
}

/// Validated registration data ready for insertion. The password has
/// already been replaced by its digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewUser {
    pub name: String,
    pub email: String,
    pub phone: String,
    pub password_digest: PasswordDigest,
    pub role: Role,
}

impl NewUser {
    /// Build from a form that has passed [`validate_registration`].
    pub fn from_form(
        form: &RegistrationForm,
        password_digest: PasswordDigest,
    ) -> Result<NewUser, Vec<FieldError>> {
        let errors = validate_registration(form);
        if !errors.is_empty() {
            return Err(errors);
        }
        Ok(NewUser {
            name: form.name.trim().to_owned(),
            email: normalize_email(&form.email),
            // Both unwraps guarded by validate_registration above.
            phone: normalize_phone(&form.phone).expect("validated phone"),
            password_digest,
            role: Role::from_code(form.role.trim()).expect("validated role"),
        })
    }
}

pub(crate) fn check_body(body: &str) -> Result<(), FieldError> {
    if body.trim().is_empty() {
        Err(FieldError::BodyEmpty)
    } else if body.chars().count() > BODY_MAX_CHARS {
        Err(FieldError::BodyTooLong)
    } else {
        Ok(())
    }
}
