//! Registration, login and logout, session handling, and the admin
//! verification queue.

use std::fmt;
use std::sync::{Arc, OnceLock};

use argon2::password_hash::SaltString;
use argon2::{Algorithm, Argon2, Params, PasswordHash, PasswordHasher as _, PasswordVerifier, Version};
use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use chrono::Duration;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{
    normalize_email, validate_email, AdminAccount, EmailInvalid, FieldError, NewUser,
    PasswordDigest, PrincipalKind, RegistrationForm, Role, Session, Status, UserAccount, UserId,
    PASSWORD_MIN_CHARS,
};
use crate::store::{Store, StoreError, UserFilter, UserUpdate};

pub const SESSION_LIFETIME_HOURS: i64 = 24;
/// 256 random bits per session token.
pub const TOKEN_BYTES: usize = 32;
pub const SALT_BYTES: usize = 16;

#[derive(Clone, Deserialize)]
pub struct Credentials {
    pub email: String,
    pub password: String,
}

impl Credentials {
    pub fn new(email: impl Into<String>, password: impl Into<String>) -> Self {
        Credentials {
            email: email.into(),
            password: password.into(),
        }
    }
}

impl fmt::Debug for Credentials {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Credentials")
            .field("email", &self.email)
            .finish_non_exhaustive()
    }
}

/// Random URL-safe session token.
pub fn generate_token() -> String {
    let bytes: [u8; TOKEN_BYTES] = rand::random();
    URL_SAFE_NO_PAD.encode(bytes)
}

/// Argon2id hashing with a fresh random salt per call.
///
/// Verification cost depends on the parameters embedded in the stored
/// digest, not on how long the password is.
#[derive(Clone)]
pub struct PasswordHasher {
    params: Params,
    decoy: Arc<OnceLock<PasswordDigest>>,
}

impl fmt::Debug for PasswordHasher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PasswordHasher")
            .field("m_cost", &self.params.m_cost())
            .field("t_cost", &self.params.t_cost())
            .finish()
    }
}

impl Default for PasswordHasher {
    fn default() -> Self {
        PasswordHasher::new(Params::default())
    }
}

impl PasswordHasher {
    pub fn new(params: Params) -> Self {
        PasswordHasher {
            params,
            decoy: Arc::new(OnceLock::new()),
        }
    }

    /// Minimal-cost parameters. For tests and benchmarks only.
    pub fn fast() -> Self {
        PasswordHasher::new(Params::new(Params::MIN_M_COST, 1, 1, None).expect("valid params"))
    }

    fn argon2(&self) -> Argon2<'static> {
        Argon2::new(Algorithm::Argon2id, Version::V0x13, self.params.clone())
    }

    pub fn hash(&self, password: &str) -> PasswordDigest {
        let salt: [u8; SALT_BYTES] = rand::random();
        self.hash_with_salt(password, &salt)
    }

    /// Hash with a caller-supplied salt. Only the demo seeder uses this,
    /// to get reproducible rows.
    pub fn hash_with_salt(&self, password: &str, salt: &[u8; SALT_BYTES]) -> PasswordDigest {
        let salt = SaltString::encode_b64(salt).expect("16 bytes is a valid salt length");
        let hash = self
            .argon2()
            .hash_password(password.as_bytes(), &salt)
            .expect("argon2 hashing with valid params cannot fail");
        PasswordDigest::new(hash.to_string())
    }

    pub fn verify(&self, password: &str, digest: &PasswordDigest) -> bool {
        match PasswordHash::new(digest.as_str()) {
            Ok(parsed) => Argon2::default()
                .verify_password(password.as_bytes(), &parsed)
                .is_ok(),
            Err(_) => false,
        }
    }

    /// Burn the same work as a real verification so an unknown email is
    /// not distinguishable by timing.
    fn verify_decoy(&self, password: &str) {
        let decoy = self
            .decoy
            .get_or_init(|| self.hash("decoy password for unknown accounts"));
        let _ = self.verify(password, decoy);
    }
}

/// Who is behind a live session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Principal {
    kind: PrincipalKind,
    id: i64,
    role: Option<Role>,
}

impl Principal {
    pub fn kind(&self) -> PrincipalKind {
        self.kind
    }

    pub fn id(&self) -> i64 {
        self.id
    }

    /// `None` for admins.
    pub fn role(&self) -> Option<Role> {
        self.role
    }

    pub fn is_admin(&self) -> bool {
        self.kind == PrincipalKind::Admin
    }

    /// The user id, or `Forbidden` for admin sessions.
    pub(crate) fn user_id(&self) -> Result<UserId> {
        match self.kind {
            PrincipalKind::User => Ok(self.id),
            PrincipalKind::Admin => Err(Error::Forbidden),
        }
    }

    fn require_admin(&self) -> Result<()> {
        if self.is_admin() {
            Ok(())
        } else {
            Err(Error::Forbidden)
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuthService {
    store: Store,
    hasher: PasswordHasher,
}

impl AuthService {
    pub fn new(store: Store, hasher: PasswordHasher) -> Self {
        AuthService { store, hasher }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn hasher(&self) -> &PasswordHasher {
        &self.hasher
    }

    pub fn register(&self, form: &RegistrationForm) -> Result<UserAccount> {
        let errors = crate::model::validate_registration(form);
        if !errors.is_empty() {
            return Err(Error::ValidationFailed(errors));
        }
        if self.store.find_user_by_email(&form.email)?.is_some() {
            return Err(Error::EmailTaken);
        }
        let digest = self.hasher.hash(&form.password);
        let new_user = NewUser::from_form(form, digest).map_err(Error::ValidationFailed)?;
        match self.store.insert_user(&new_user) {
            Ok(user) => {
                tracing::info!(user_id = user.id, role = %user.role, "registered account");
                Ok(user)
            }
            // Lost a race with a concurrent registration.
            Err(StoreError::UniqueViolation("email")) => Err(Error::EmailTaken),
            Err(e) => Err(e.into()),
        }
    }

    pub fn login(&self, credentials: &Credentials) -> Result<Session> {
        match self.store.find_user_by_email(&credentials.email)? {
            Some(user) if self.hasher.verify(&credentials.password, &user.password_digest) => {
                self.issue_session(PrincipalKind::User, user.id)
            }
            Some(_) => Err(Error::AuthFailed),
            None => {
                self.hasher.verify_decoy(&credentials.password);
                Err(Error::AuthFailed)
            }
        }
    }

    pub fn admin_login(&self, credentials: &Credentials) -> Result<Session> {
        match self.store.find_admin_by_email(&credentials.email)? {
            Some(admin) if self.hasher.verify(&credentials.password, &admin.password_digest) => {
                self.issue_session(PrincipalKind::Admin, admin.id)
            }
            Some(_) => Err(Error::AuthFailed),
            None => {
                self.hasher.verify_decoy(&credentials.password);
                Err(Error::AuthFailed)
            }
        }
    }

    /// Always succeeds; unknown and already-removed tokens are fine.
    pub fn logout(&self, token: &str) -> Result<()> {
        self.store.delete_session(token)?;
        Ok(())
    }

    pub fn issue_session(&self, kind: PrincipalKind, principal_id: i64) -> Result<Session> {
        let issued_at = self.store.now();
        let session = Session {
            token: generate_token(),
            kind,
            principal_id,
            issued_at,
            expires_at: issued_at + Duration::hours(SESSION_LIFETIME_HOURS),
        };
        self.store.insert_session(&session)?;
        Ok(session)
    }

    pub fn authenticate(&self, token: &str) -> Result<Principal> {
        if token.is_empty() {
            return Err(Error::Unauthorized);
        }
        let session = self.store.find_session(token)?.ok_or(Error::Unauthorized)?;
        if !session.is_live(self.store.now()) {
            self.store.delete_session(token)?;
            return Err(Error::Unauthorized);
        }
        let role = match session.kind {
            PrincipalKind::User => Some(
                self.store
                    .find_user(session.principal_id)?
                    .ok_or(Error::Unauthorized)?
                    .role,
            ),
            PrincipalKind::Admin => {
                self.store
                    .find_admin(session.principal_id)?
                    .ok_or(Error::Unauthorized)?;
                None
            }
        };
        Ok(Principal {
            kind: session.kind,
            id: session.principal_id,
            role,
        })
    }

    /// Unverified accounts, oldest first.
    pub fn list_pending(&self, caller: &Principal) -> Result<Vec<UserAccount>> {
        caller.require_admin()?;
        let mut pending = self.store.query_users(&UserFilter {
            status: Some(Status::NotVerified),
            ..Default::default()
        })?;
        pending.reverse();
        Ok(pending)
    }

    pub fn verify_user(&self, caller: &Principal, user_id: UserId) -> Result<UserAccount> {
        caller.require_admin()?;
        self.verify_user_unchecked(user_id)
    }

    /// Verification without a session, for operator tooling.
    pub fn verify_user_unchecked(&self, user_id: UserId) -> Result<UserAccount> {
        match self.store.update_user(user_id, UserUpdate::Verify) {
            Ok(user) => {
                tracing::info!(user_id, "account verified");
                Ok(user)
            }
            Err(StoreError::NotFound { .. }) => Err(Error::NotFound),
            Err(e) => Err(e.into()),
        }
    }

    /// Provision an administrator. There is no self-service path for this.
    pub fn create_admin(&self, email: &str, password: &str) -> Result<AdminAccount> {
        let email = normalize_email(email);
        let mut errors = Vec::new();
        match validate_email(&email) {
            Ok(()) => {}
            Err(EmailInvalid::TooLong) => errors.push(FieldError::EmailTooLong),
            Err(_) => errors.push(FieldError::EmailInvalid),
        }
        if password.chars().count() < PASSWORD_MIN_CHARS {
            errors.push(FieldError::PasswordTooShort);
        }
        if !errors.is_empty() {
            return Err(Error::ValidationFailed(errors));
        }
        if self.store.find_admin_by_email(&email)?.is_some() {
            return Err(Error::EmailTaken);
        }
        let digest = self.hasher.hash(password);
        match self.store.insert_admin(&email, &digest) {
            Ok(admin) => Ok(admin),
            Err(StoreError::UniqueViolation(_)) => Err(Error::EmailTaken),
            Err(e) => Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use crate::store::StoreConfig;
    use chrono::TimeZone;

    fn service() -> (AuthService, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::new(
            chrono::Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        ));
        let store = Store::open_with_clock(&StoreConfig::InMemory, clock.clone()).unwrap();
        (AuthService::new(store, PasswordHasher::fast()), clock)
    }

    fn form(email: &str, role: &str) -> RegistrationForm {
        RegistrationForm {
            name: "Redwood University".into(),
            email: email.into(),
            phone: "08035550101".into(),
            password: "s3cret-pass".into(),
            password_confirm: "s3cret-pass".into(),
            role: role.into(),
        }
    }

    #[test]
    fn register_school_starts_unverified() {
        let (auth, _) = service();
        let u = auth.register(&form("dept@redwood.edu", "S")).unwrap();
        assert_eq!(u.role, Role::School);
        assert_eq!(u.status, Status::NotVerified);
        assert_ne!(u.password_digest.as_str(), "s3cret-pass");
        assert!(u.password_digest.as_str().starts_with("$argon2id$"));
    }

    #[test]
    fn register_twice_is_email_taken() {
        let (auth, _) = service();
        auth.register(&form("dept@redwood.edu", "S")).unwrap();
        let err = auth.register(&form("Dept@Redwood.edu", "C")).unwrap_err();
        assert!(matches!(err, Error::EmailTaken));
    }

    #[test]
    fn register_mismatch_is_validation_failed() {
        let (auth, _) = service();
        let mut f = form("hr@corp.com", "C");
        f.password_confirm = "different-pass".into();
        match auth.register(&f).unwrap_err() {
            Error::ValidationFailed(v) => assert_eq!(v, vec![FieldError::PasswordMismatch]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn salts_differ_per_account() {
        let h = PasswordHasher::fast();
        assert_ne!(h.hash("same password"), h.hash("same password"));
        let fixed = [7u8; SALT_BYTES];
        assert_eq!(h.hash_with_salt("pw", &fixed), h.hash_with_salt("pw", &fixed));
    }

    #[test]
    fn login_paths() {
        let (auth, _) = service();
        let u = auth.register(&form("dept@redwood.edu", "S")).unwrap();
        let s = auth.login(&Credentials::new(" DEPT@redwood.edu", "s3cret-pass")).unwrap();
        assert_eq!((s.kind, s.principal_id), (PrincipalKind::User, u.id));
        assert!(matches!(
            auth.login(&Credentials::new("dept@redwood.edu", "wrong-pass")),
            Err(Error::AuthFailed)
        ));
        assert!(matches!(
            auth.login(&Credentials::new("nobody@redwood.edu", "s3cret-pass")),
            Err(Error::AuthFailed)
        ));
    }

    #[test]
    fn admin_login_is_separate_from_users() {
        let (auth, _) = service();
        auth.register(&form("dept@redwood.edu", "S")).unwrap();
        auth.create_admin("root@liaison.test", "admin-pass-1").unwrap();
        let s = auth
            .admin_login(&Credentials::new("root@liaison.test", "admin-pass-1"))
            .unwrap();
        assert_eq!(s.kind, PrincipalKind::Admin);
        assert!(matches!(
            auth.admin_login(&Credentials::new("dept@redwood.edu", "s3cret-pass")),
            Err(Error::AuthFailed)
        ));
        assert!(matches!(
            auth.admin_login(&Credentials::new("root@liaison.test", "")),
            Err(Error::AuthFailed)
        ));
        assert!(matches!(
            auth.login(&Credentials::new("root@liaison.test", "admin-pass-1")),
            Err(Error::AuthFailed)
        ));
    }

    #[test]
    fn logout_is_idempotent() {
        let (auth, _) = service();
        auth.register(&form("dept@redwood.edu", "S")).unwrap();
        let s = auth.login(&Credentials::new("dept@redwood.edu", "s3cret-pass")).unwrap();
        assert!(auth.authenticate(&s.token).is_ok());
        auth.logout(&s.token).unwrap();
        assert!(matches!(auth.authenticate(&s.token), Err(Error::Unauthorized)));
        auth.logout(&s.token).unwrap();
        auth.logout("garbage").unwrap();
    }

    #[test]
    fn authenticate_rejects_empty_unknown_and_expired() {
        let (auth, clock) = service();
        let u = auth.register(&form("dept@redwood.edu", "S")).unwrap();
        let s = auth.login(&Credentials::new("dept@redwood.edu", "s3cret-pass")).unwrap();
        let p = auth.authenticate(&s.token).unwrap();
        assert_eq!((p.kind(), p.id(), p.role()), (PrincipalKind::User, u.id, Some(Role::School)));
        assert!(matches!(auth.authenticate(""), Err(Error::Unauthorized)));
        assert!(matches!(auth.authenticate("nope"), Err(Error::Unauthorized)));

        clock.advance(Duration::hours(SESSION_LIFETIME_HOURS) - Duration::seconds(1));
        assert!(auth.authenticate(&s.token).is_ok());
        clock.advance(Duration::seconds(1));
        assert!(matches!(auth.authenticate(&s.token), Err(Error::Unauthorized)));
    }

    #[test]
    fn pending_queue_and_verification() {
        let (auth, clock) = service();
        let a = auth.register(&form("a@school.edu", "S")).unwrap();
        clock.advance(Duration::seconds(1));
        let b = auth.register(&form("b@corp.com", "C")).unwrap();
        clock.advance(Duration::seconds(1));
        let c = auth.register(&form("c@corp.com", "C")).unwrap();
        auth.create_admin("root@liaison.test", "admin-pass-1").unwrap();
        let admin = auth
            .authenticate(
                &auth
                    .admin_login(&Credentials::new("root@liaison.test", "admin-pass-1"))
                    .unwrap()
                    .token,
            )
            .unwrap();

        auth.verify_user(&admin, b.id).unwrap();
        let pending: Vec<_> = auth.list_pending(&admin).unwrap().iter().map(|u| u.id).collect();
        assert_eq!(pending, vec![a.id, c.id]);

        let again = auth.verify_user(&admin, b.id).unwrap();
        assert_eq!(again.status, Status::Verified);
        assert!(matches!(auth.verify_user(&admin, 999), Err(Error::NotFound)));

        let user = auth
            .authenticate(&auth.login(&Credentials::new("a@school.edu", "s3cret-pass")).unwrap().token)
            .unwrap();
        assert!(matches!(auth.list_pending(&user), Err(Error::Forbidden)));
        assert!(matches!(auth.verify_user(&user, c.id), Err(Error::Forbidden)));
    }

    #[test]
    fn empty_store_has_no_pending() {
        let (auth, _) = service();
        auth.create_admin("root@liaison.test", "admin-pass-1").unwrap();
        let s = auth.issue_session(PrincipalKind::Admin, 1).unwrap();
        let admin = auth.authenticate(&s.token).unwrap();
        assert!(auth.list_pending(&admin).unwrap().is_empty());
    }

    #[test]
    fn create_admin_rejects_bad_and_duplicate() {
        let (auth, _) = service();
        assert!(matches!(
            auth.create_admin("not-an-email", "admin-pass-1"),
            Err(Error::ValidationFailed(_))
        ));
        auth.create_admin("root@liaison.test", "admin-pass-1").unwrap();
        assert!(matches!(
            auth.create_admin("ROOT@liaison.test", "admin-pass-2"),
            Err(Error::EmailTaken)
        ));
    }

    #[test]
    fn tokens_are_long_and_url_safe() {
        let t = generate_token();
        assert_eq!(t.len(), 43);
        assert!(t.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_'));
    }

    #[test]
    fn concurrent_verify_single_outcome() {
        let (auth, _) = service();
        let u = auth.register(&form("a@school.edu", "S")).unwrap();
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..16)
                .map(|_| s.spawn(|| auth.verify_user_unchecked(u.id).unwrap()))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(results.iter().all(|r| r == &results[0] && r.status == Status::Verified));
    }
}
