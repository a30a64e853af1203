use std::collections::BTreeMap;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::store::StoreError;

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip, default = "default_status")]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<BTreeMap<String, String>>,
}

fn default_status() -> StatusCode {
    StatusCode::INTERNAL_SERVER_ERROR
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.into(),
            message: message.into(),
            fields: None,
        }
    }

    pub fn unauthorized() -> Self {
        Error::Unauthorized.into()
    }

    pub fn not_found() -> Self {
        Error::NotFound.into()
    }

    pub fn internal() -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error")
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "validation_failed", message)
    }

    pub fn with_field(mut self, field: &str, reason: &str) -> Self {
        self.fields
            .get_or_insert_with(BTreeMap::new)
            .insert(field.into(), reason.into());
        self
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let status = match &err {
            Error::ValidationFailed(_)
            | Error::BodyInvalid(_)
            | Error::FormInvalid(_)
            | Error::RecipientInvalid => StatusCode::BAD_REQUEST,
            Error::AuthFailed | Error::Unauthorized => StatusCode::UNAUTHORIZED,
            Error::Forbidden | Error::SenderNotVerified => StatusCode::FORBIDDEN,
            Error::NotFound | Error::Store(StoreError::NotFound { .. }) => StatusCode::NOT_FOUND,
            Error::EmailTaken | Error::Store(StoreError::UniqueViolation(_)) => StatusCode::CONFLICT,
            Error::Store(e) => {
                tracing::error!(error = %e, "store failure");
                return ApiError::internal();
            }
        };
        let fields = err.field_errors();
        let fields = (!fields.is_empty()).then(|| {
            fields
                .iter()
                .map(|f| (f.field().to_owned(), f.code().to_owned()))
                .collect()
        });
        ApiError {
            status,
            code: err.code().into(),
            message: err.to_string(),
            fields,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}
