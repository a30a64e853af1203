//! JSON-over-HTTP surface.
//!
//! Sessions are carried in the `liaison_session` HTTP-only cookie or an
//! `Authorization: Bearer` header. Handlers hold no state of their own;
//! blocking store and hashing work runs on the blocking thread pool.

mod error;
mod extract;
mod handlers;

use std::path::Path;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use tower_http::services::{ServeDir, ServeFile};

use crate::auth::{AuthService, PasswordHasher};
use crate::curriculum::Catalogue;
use crate::exchange::ExchangeService;
use crate::store::Store;

pub use error::ApiError;
pub use extract::{bearer_or_cookie_token, SESSION_COOKIE};
pub use handlers::{AccountView, MeView, SendMessageRequest, SessionView, UnreadCount};

#[derive(Clone)]
pub struct AppState {
    pub auth: AuthService,
    pub exchange: ExchangeService,
    pub catalogue: Arc<Catalogue>,
}

impl AppState {
    pub fn new(store: Store, hasher: PasswordHasher, catalogue: Catalogue) -> Self {
        AppState {
            auth: AuthService::new(store.clone(), hasher),
            exchange: ExchangeService::new(store),
            catalogue: Arc::new(catalogue),
        }
    }
}

fn api_routes() -> Router<AppState> {
    use handlers::*;
    Router::new()
        .route("/health", get(health))
        .route("/register", post(register))
        .route("/login", post(login))
        .route("/admin/login", post(admin_login))
        .route("/logout", post(logout))
        .route("/me", get(me))
        .route("/admin/pending", get(list_pending))
        .route("/admin/verify/{id}", post(verify_user))
        .route("/recipients", get(list_recipients))
        .route("/messages", get(inbox).post(send_message))
        .route("/messages/unread_count", get(unread_count))
        .route("/messages/{id}", get(open_message))
        .route("/reports", get(list_reports).post(submit_report))
        .route("/courses", get(list_courses))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
}

/// The API alone, mounted under `/api`.
pub fn router(state: AppState) -> Router {
    Router::new()
        .nest("/api", api_routes())
        .fallback(handlers::not_found)
        .with_state(state)
}

/// The API plus a single-page web client served from `static_dir`.
pub fn router_with_static(state: AppState, static_dir: &Path) -> Router {
    let index = static_dir.join("index.html");
    Router::new()
        .nest("/api", api_routes())
        .fallback_service(ServeDir::new(static_dir).fallback(ServeFile::new(index)))
        .with_state(state)
}
