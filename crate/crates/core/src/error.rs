use thiserror::Error;

use crate::model::FieldError;
use crate::store::StoreError;

/// Failures of the account, messaging and report workflows.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {}", join(.0))]
    ValidationFailed(Vec<FieldError>),
    #[error("email address is already registered")]
    EmailTaken,
    #[error("invalid email or password")]
    AuthFailed,
    #[error("authentication required")]
    Unauthorized,
    #[error("not permitted for this account")]
    Forbidden,
    #[error("not found")]
    NotFound,
    #[error("sender account is not verified")]
    SenderNotVerified,
    #[error("recipient is missing, unverified, or has the same role")]
    RecipientInvalid,
    #[error("invalid message body: {0}")]
    BodyInvalid(FieldError),
    #[error("invalid report form: {}", join(.0))]
    FormInvalid(Vec<FieldError>),
    #[error(transparent)]
    Store(#[from] StoreError),
}

fn join(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| e.code())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// Stable machine-readable code used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ValidationFailed(_) => "validation_failed",
            Error::EmailTaken => "email_taken",
            Error::AuthFailed => "auth_failed",
            Error::Unauthorized => "unauthorized",
            Error::Forbidden => "forbidden",
            Error::NotFound => "not_found",
            Error::SenderNotVerified => "sender_not_verified",
            Error::RecipientInvalid => "recipient_invalid",
            Error::BodyInvalid(_) => "body_invalid",
            Error::FormInvalid(_) => "form_invalid",
            Error::Store(StoreError::UniqueViolation(_)) => "duplicate",
            Error::Store(StoreError::NotFound { .. }) => "not_found",
            Error::Store(_) => "internal",
        }
    }

    pub fn field_errors(&self) -> &[FieldError] {
        match self {
            Error::ValidationFailed(v) | Error::FormInvalid(v) => v,
            Error::BodyInvalid(e) => std::slice::from_ref(e),
            _ => &[],
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
