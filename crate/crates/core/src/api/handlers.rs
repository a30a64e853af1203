use axum::extract::{Path, Query, State};
use axum::http::header::SET_COOKIE;
use axum::http::{Method, StatusCode};
use axum::response::{AppendHeaders, IntoResponse, Response};
use axum::Json;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::extract::{ApiJson, Caller, MaybeToken, SESSION_COOKIE};
use super::{ApiError, AppState};
use crate::auth::{Credentials, SESSION_LIFETIME_HOURS};
use crate::error::Error;
use crate::exchange::{InboxEntry, Recipient, ReportForm};
use crate::model::{
    Course, Level, Message, PrincipalKind, RegistrationForm, Report, Role, Session, Status,
    UserAccount, UserId,
};

type ApiResult<T> = Result<T, ApiError>;

pub(super) async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> Result<T, Error> + Send + 'static,
    T: Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(result) => result.map_err(ApiError::from),
        Err(join) => {
            tracing::error!(error = %join, "handler task failed");
            Err(ApiError::internal())
        }
    }
}

/// Public account fields. Password material never leaves the store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountView {
    pub id: UserId,
    pub name: String,
    pub email: String,
    pub phone: String,
    pub role: Role,
    pub status: Status,
    pub created_at: DateTime<Utc>,
}

impl From<UserAccount> for AccountView {
    fn from(u: UserAccount) -> Self {
        AccountView {
            id: u.id,
            name: u.name,
            email: u.email,
            phone: u.phone,
            role: u.role,
            status: u.status,
            created_at: u.created_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub token: String,
    pub kind: PrincipalKind,
    pub principal_id: i64,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeView {
    pub kind: PrincipalKind,
    pub id: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub account: Option<AccountView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SendMessageRequest {
    pub to_user: UserId,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnreadCount {
    pub unread: u64,
}

#[derive(Debug, Deserialize)]
pub(super) struct CourseQuery {
    level: Option<String>,
}

fn session_cookie(token: &str) -> String {
    format!(
        "{SESSION_COOKIE}={token}; Path=/; HttpOnly; SameSite=Strict; Max-Age={}",
        SESSION_LIFETIME_HOURS * 3600
    )
}

fn clear_cookie() -> String {
    format!("{SESSION_COOKIE}=; Path=/; HttpOnly; SameSite=Strict; Max-Age=0")
}

fn session_response(session: Session) -> Response {
    let cookie = session_cookie(&session.token);
    let view = SessionView {
        token: session.token,
        kind: session.kind,
        principal_id: session.principal_id,
        expires_at: session.expires_at,
    };
    (AppendHeaders([(SET_COOKIE, cookie)]), Json(view)).into_response()
}

fn parse_id(raw: &str) -> ApiResult<i64> {
    raw.parse::<i64>()
        .ok()
        .filter(|id| *id > 0)
        .ok_or_else(ApiError::not_found)
}

pub(super) async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

pub(super) async fn not_found() -> ApiError {
    ApiError::not_found()
}

pub(super) async fn method_not_allowed(method: Method) -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "method_not_allowed",
        format!("{method} is not supported on this route"),
    )
}

pub(super) async fn register(
    State(state): State<AppState>,
    ApiJson(form): ApiJson<RegistrationForm>,
) -> ApiResult<(StatusCode, Json<AccountView>)> {
    let auth = state.auth.clone();
    let user = blocking(move || auth.register(&form)).await?;
    Ok((StatusCode::CREATED, Json(user.into())))
}

pub(super) async fn login(
    State(state): State<AppState>,
    ApiJson(creds): ApiJson<Credentials>,
) -> ApiResult<Response> {
    let auth = state.auth.clone();
    let session = blocking(move || auth.login(&creds)).await?;
    Ok(session_response(session))
}

pub(super) async fn admin_login(
    State(state): State<AppState>,
    ApiJson(creds): ApiJson<Credentials>,
) -> ApiResult<Response> {
    let auth = state.auth.clone();
    let session = blocking(move || auth.admin_login(&creds)).await?;
    Ok(session_response(session))
}

/// Acknowledges any token, including unknown and already-revoked ones.
pub(super) async fn logout(
    State(state): State<AppState>,
    MaybeToken(token): MaybeToken,
) -> ApiResult<Response> {
    if let Some(token) = token {
        let auth = state.auth.clone();
        blocking(move || auth.logout(&token)).await?;
    }
    Ok((
        AppendHeaders([(SET_COOKIE, clear_cookie())]),
        Json(json!({ "status": "ok" })),
    )
        .into_response())
}

pub(super) async fn me(State(state): State<AppState>, Caller(p): Caller) -> ApiResult<Json<MeView>> {
    let account = match p.kind() {
        PrincipalKind::User => {
            let store = state.auth.store().clone();
            let id = p.id();
            blocking(move || Ok(store.find_user(id)?))
                .await?
                .map(AccountView::from)
        }
        PrincipalKind::Admin => None,
    };
    Ok(Json(MeView {
        kind: p.kind(),
        id: p.id(),
        role: p.role(),
        account,
    }))
}

pub(super) async fn list_pending(
    State(state): State<AppState>,
    Caller(p): Caller,
) -> ApiResult<Json<Vec<AccountView>>> {
    let auth = state.auth.clone();
    let users = blocking(move || auth.list_pending(&p)).await?;
    Ok(Json(users.into_iter().map(Into::into).collect()))
}

pub(super) async fn verify_user(
    State(state): State<AppState>,
    Caller(p): Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<AccountView>> {
    if !p.is_admin() {
        return Err(Error::Forbidden.into());
    }
    let id = parse_id(&id)?;
    let auth = state.auth.clone();
    let user = blocking(move || auth.verify_user(&p, id)).await?;
    Ok(Json(user.into()))
}

pub(super) async fn list_recipients(
    State(state): State<AppState>,
    Caller(p): Caller,
) -> ApiResult<Json<Vec<Recipient>>> {
    let ex = state.exchange.clone();
    Ok(Json(blocking(move || ex.list_recipients(&p)).await?))
}

pub(super) async fn send_message(
    State(state): State<AppState>,
    Caller(p): Caller,
    ApiJson(req): ApiJson<SendMessageRequest>,
) -> ApiResult<(StatusCode, Json<Message>)> {
    let ex = state.exchange.clone();
    let message = blocking(move || ex.send_message(&p, req.to_user, &req.body)).await?;
    Ok((StatusCode::CREATED, Json(message)))
}

pub(super) async fn inbox(
    State(state): State<AppState>,
    Caller(p): Caller,
) -> ApiResult<Json<Vec<InboxEntry>>> {
    let ex = state.exchange.clone();
    Ok(Json(blocking(move || ex.inbox(&p)).await?))
}

pub(super) async fn open_message(
    State(state): State<AppState>,
    Caller(p): Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<Message>> {
    let id = parse_id(&id)?;
    let ex = state.exchange.clone();
    Ok(Json(blocking(move || ex.open_message(&p, id)).await?))
}

pub(super) async fn unread_count(
    State(state): State<AppState>,
    Caller(p): Caller,
) -> ApiResult<Json<UnreadCount>> {
    let ex = state.exchange.clone();
    let unread = blocking(move || ex.unread_count(&p)).await?;
    Ok(Json(UnreadCount { unread }))
}

pub(super) async fn submit_report(
    State(state): State<AppState>,
    Caller(p): Caller,
    ApiJson(form): ApiJson<ReportForm>,
) -> ApiResult<(StatusCode, Json<Report>)> {
    let ex = state.exchange.clone();
    let report = blocking(move || ex.submit_report(&p, &form)).await?;
    Ok((StatusCode::CREATED, Json(report)))
}

pub(super) async fn list_reports(
    State(state): State<AppState>,
    Caller(p): Caller,
) -> ApiResult<Json<Vec<Report>>> {
    let ex = state.exchange.clone();
    Ok(Json(blocking(move || ex.list_reports(&p)).await?))
}

pub(super) async fn list_courses(
    State(state): State<AppState>,
    Query(q): Query<CourseQuery>,
) -> ApiResult<Json<Vec<Course>>> {
    let level = match q.level.as_deref().map(str::trim) {
        None | Some("") => None,
        Some(raw) => Some(
            raw.parse::<u16>()
                .ok()
                .and_then(|n| Level::try_from(n).ok())
                .ok_or_else(|| {
                    ApiError::bad_request("level must be one of 100, 200, 300, 400")
                        .with_field("level", "level_invalid")
                })?,
        ),
    };
    Ok(Json(
        state.catalogue.list_courses(level).into_iter().cloned().collect(),
    ))
}
