//! Core of the industry curriculum liaison service.
//!
//! Schools and companies register, an administrator verifies them, and
//! verified accounts exchange curriculum suggestions and student
//! industrial-training reports. A read-only course catalogue lets feedback
//! point at concrete courses.
//!
//! * [`model`]: entities and field validation
//! * [`store`]: SQLite persistence and migrations
//! * [`auth`]: registration, sessions, admin verification
//! * [`exchange`]: messages, inbox, reports
//! * [`curriculum`]: course fixture loading and catalogue queries
//! * [`api`]: the JSON-over-HTTP surface
//! * [`seed`]: deterministic demo data

pub mod api;
pub mod auth;
pub mod clock;
pub mod curriculum;
pub mod error;
pub mod exchange;
pub mod model;
pub mod seed;
pub mod store;

pub use auth::{AuthService, Credentials, PasswordHasher, Principal};
pub use clock::{Clock, ManualClock, SystemClock};
pub use curriculum::Catalogue;
pub use error::{Error, Result};
pub use exchange::{ExchangeService, InboxEntry, OpenedMessage, Recipient, ReportForm};
pub use model::{
    AdminAccount, Course, FieldError, Level, Message, PrincipalKind, ReadState, RegistrationForm,
    Report, Role, Session, Status, UserAccount,
};
pub use store::{Store, StoreConfig, StoreError};
