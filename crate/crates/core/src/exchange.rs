//! Suggestion messages and student reports between verified schools and
//! companies.
//!
//! Both flows follow the opposite-role rule: a school only ever talks to
//! companies and a company only to schools. Only verified accounts appear
//! as recipients and only verified accounts may send.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::auth::Principal;
use crate::error::{Error, Result};
use crate::model::{
    check_body, FieldError, Message, MessageId, NewMessage, NewReport, ReadState, Report, Role,
    Status, UserAccount, UserId, PERIOD_MAX_CHARS, STUDENT_NAME_MAX_CHARS,
};
use crate::store::{MessageFilter, MessageUpdate, ReportFilter, Store, StoreError, UserFilter};

pub const EXCERPT_CHARS: usize = 120;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipient {
    pub id: UserId,
    pub name: String,
    pub role: Role,
}

/// One row of the inbox list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InboxEntry {
    pub message_id: MessageId,
    pub from_user: UserId,
    pub from_name: String,
    pub excerpt: String,
    pub read_state: ReadState,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportForm {
    pub school_id: UserId,
    pub student_name: String,
    pub period: String,
    pub body: String,
}

/// A message together with whether this particular open performed the
/// Unread to Read transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenedMessage {
    pub message: Message,
    pub newly_read: bool,
}

/// First `EXCERPT_CHARS` characters of `body`.
pub fn excerpt(body: &str) -> &str {
    match body.char_indices().nth(EXCERPT_CHARS) {
        Some((cut, _)) => &body[..cut],
        None => body,
    }
}

pub fn validate_report_form(form: &ReportForm) -> Vec<FieldError> {
    let mut errors = Vec::new();
    let name = form.student_name.trim();
    if name.is_empty() {
        errors.push(FieldError::StudentNameEmpty);
    } else if name.chars().count() > STUDENT_NAME_MAX_CHARS {
        errors.push(FieldError::StudentNameTooLong);
    }
    let period = form.period.trim();
    if period.is_empty() {
        errors.push(FieldError::PeriodEmpty);
    } else if period.chars().count() > PERIOD_MAX_CHARS {
        errors.push(FieldError::PeriodTooLong);
    }
    if let Err(e) = check_body(&form.body) {
        errors.push(e);
    }
    errors
}

#[derive(Debug, Clone)]
pub struct ExchangeService {
    store: Store,
}

impl ExchangeService {
    pub fn new(store: Store) -> Self {
        ExchangeService { store }
    }

    fn caller(&self, principal: &Principal) -> Result<UserAccount> {
        let id = principal.user_id()?;
        self.store.find_user(id)?.ok_or(Error::Unauthorized)
    }

    /// Verified accounts of the opposite role, sorted by name.
    pub fn list_recipients(&self, principal: &Principal) -> Result<Vec<Recipient>> {
        let me = self.caller(principal)?;
        let mut recipients: Vec<Recipient> = self
            .store
            .query_users(&UserFilter {
                role: Some(me.role.opposite()),
                status: Some(Status::Verified),
            })?
            .into_iter()
            .map(|u| Recipient {
                id: u.id,
                name: u.name,
                role: u.role,
            })
            .collect();
        recipients.sort_by(|a, b| a.name.cmp(&b.name).then(a.id.cmp(&b.id)));
        Ok(recipients)
    }

    pub fn send_message(&self, principal: &Principal, to_user: UserId, body: &str) -> Result<Message> {
        let me = self.caller(principal)?;
        if !me.is_verified() {
            return Err(Error::SenderNotVerified);
        }
        check_body(body).map_err(Error::BodyInvalid)?;
        let recipient = self.store.find_user(to_user)?.ok_or(Error::RecipientInvalid)?;
        if !recipient.is_verified() || recipient.role != me.role.opposite() {
            return Err(Error::RecipientInvalid);
        }
        let message = self
            .store
            .insert_message(&NewMessage {
                from_user: me.id,
                to_user,
                body: body.to_owned(),
            })
            .map_err(|e| match e {
                StoreError::InvariantViolation(_) => Error::RecipientInvalid,
                other => other.into(),
            })?;
        tracing::debug!(message_id = message.id, from = me.id, to = to_user, "message sent");
        Ok(message)
    }

    /// Messages addressed to the caller, newest first.
    pub fn inbox(&self, principal: &Principal) -> Result<Vec<InboxEntry>> {
        let me = self.caller(principal)?;
        let messages = self.store.query_messages(&MessageFilter {
            to_user: Some(me.id),
            ..Default::default()
        })?;
        let mut names: HashMap<UserId, String> = HashMap::new();
        messages
            .into_iter()
            .map(|m| {
                let from_name = match names.get(&m.from_user) {
                    Some(n) => n.clone(),
                    None => {
                        let n = self
                            .store
                            .find_user(m.from_user)?
                            .map(|u| u.name)
                            .unwrap_or_default();
                        names.insert(m.from_user, n.clone());
                        n
                    }
                };
                Ok(InboxEntry {
                    message_id: m.id,
                    from_user: m.from_user,
                    from_name,
                    excerpt: excerpt(&m.body).to_owned(),
                    read_state: m.read_state,
                    created_at: m.created_at,
                })
            })
            .collect()
    }

    pub fn open_message(&self, principal: &Principal, id: MessageId) -> Result<Message> {
        self.open_message_receipt(principal, id).map(|o| o.message)
    }

    /// Recipient-only read that marks the message as read.
    pub fn open_message_receipt(&self, principal: &Principal, id: MessageId) -> Result<OpenedMessage> {
        let me = self.caller(principal)?;
        let message = self.store.find_message(id)?.ok_or(Error::NotFound)?;
        if message.to_user != me.id {
            return Err(Error::Forbidden);
        }
        let updated = self.store.update_message(id, MessageUpdate::MarkRead)?;
        Ok(OpenedMessage {
            message: updated.message,
            newly_read: updated.changed,
        })
    }

    pub fn unread_count(&self, principal: &Principal) -> Result<u64> {
        let me = self.caller(principal)?;
        Ok(self.store.count_messages(&MessageFilter {
            to_user: Some(me.id),
            read_state: Some(ReadState::Unread),
            ..Default::default()
        })?)
    }

    pub fn submit_report(&self, principal: &Principal, form: &ReportForm) -> Result<Report> {
        let me = self.caller(principal)?;
        if me.role != Role::Company {
            return Err(Error::Forbidden);
        }
        if !me.is_verified() {
            return Err(Error::SenderNotVerified);
        }
        let errors = validate_report_form(form);
        if !errors.is_empty() {
            return Err(Error::FormInvalid(errors));
        }
        let school = self
            .store
            .find_user(form.school_id)?
            .ok_or(Error::RecipientInvalid)?;
        if school.role != Role::School || !school.is_verified() {
            return Err(Error::RecipientInvalid);
        }
        let report = self
            .store
            .insert_report(&NewReport {
                company_id: me.id,
                school_id: school.id,
                student_name: form.student_name.trim().to_owned(),
                period: form.period.trim().to_owned(),
                body: form.body.clone(),
            })
            .map_err(|e| match e {
                StoreError::InvariantViolation(_) => Error::RecipientInvalid,
                other => other.into(),
            })?;
        tracing::debug!(report_id = report.id, company = me.id, school = school.id, "report submitted");
        Ok(report)
    }

    /// Reports addressed to the calling school, newest first.
    pub fn list_reports(&self, principal: &Principal) -> Result<Vec<Report>> {
        let me = self.caller(principal)?;
        if me.role != Role::School {
            return Err(Error::Forbidden);
        }
        Ok(self.store.query_reports(&ReportFilter {
            school_id: Some(me.id),
            ..Default::default()
        })?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::{AuthService, PasswordHasher};
    use crate::clock::ManualClock;
    use crate::model::{NewUser, PasswordDigest, PrincipalKind};
    use crate::store::{StoreConfig, UserUpdate};
    use chrono::{Duration, TimeZone};
    use std::sync::Arc;

    struct World {
        auth: AuthService,
        ex: ExchangeService,
        clock: Arc<ManualClock>,
    }

    impl World {
        fn new() -> World {
            let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()));
            let store = Store::open_with_clock(&StoreConfig::InMemory, clock.clone()).unwrap();
            World {
                auth: AuthService::new(store.clone(), PasswordHasher::fast()),
                ex: ExchangeService::new(store),
                clock,
            }
        }

        fn user(&self, name: &str, role: Role, verified: bool) -> UserAccount {
            let store = self.auth.store();
            let u = store
                .insert_user(&NewUser {
                    name: name.into(),
                    email: format!("{}@example.org", name.to_lowercase().replace(' ', ".")),
                    phone: "08035550101".into(),
                    password_digest: PasswordDigest::new("unused"),
                    role,
                })
                .unwrap();
            self.clock.advance(Duration::milliseconds(1));
            if verified {
                store.update_user(u.id, UserUpdate::Verify).unwrap()
            } else {
                u
            }
        }

        fn login(&self, u: &UserAccount) -> Principal {
            let s = self.auth.issue_session(PrincipalKind::User, u.id).unwrap();
            self.auth.authenticate(&s.token).unwrap()
        }

        fn send(&self, from: &UserAccount, to: &UserAccount, body: &str) -> Message {
            let m = self.ex.send_message(&self.login(from), to.id, body).unwrap();
            self.clock.advance(Duration::milliseconds(1));
            m
        }
    }

    #[test]
    fn recipients_are_verified_opposite_role_sorted() {
        let w = World::new();
        let school = w.user("Redwood", Role::School, true);
        w.user("Zeta Corp", Role::Company, true);
        w.user("Alpha Corp", Role::Company, true);
        w.user("Pending Corp", Role::Company, false);
        w.user("Other School", Role::School, true);
        let names: Vec<_> = w
            .ex
            .list_recipients(&w.login(&school))
            .unwrap()
            .into_iter()
            .map(|r| r.name)
            .collect();
        assert_eq!(names, ["Alpha Corp", "Zeta Corp"]);
    }

    #[test]
    fn company_sees_schools_only() {
        let w = World::new();
        let c = w.user("Corp", Role::Company, true);
        w.user("Other Corp", Role::Company, true);
        w.user("Lakeside", Role::School, true);
        w.user("Unverified School", Role::School, false);
        let r = w.ex.list_recipients(&w.login(&c)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].name.as_str(), r[0].role), ("Lakeside", Role::School));
    }

    #[test]
    fn lonely_caller_has_no_recipients() {
        let w = World::new();
        let c = w.user("Corp", Role::Company, false);
        assert!(w.ex.list_recipients(&w.login(&c)).unwrap().is_empty());
    }

    #[test]
    fn send_rules() {
        let w = World::new();
        let c = w.user("Corp", Role::Company, true);
        let s = w.user("School", Role::School, true);
        let s2 = w.user("School Two", Role::School, true);
        let pending = w.user("Pending", Role::Company, false);
        let pending_school = w.user("Pending School", Role::School, false);

        let m = w.ex.send_message(&w.login(&c), s.id, "Add containers to syllabus").unwrap();
        assert_eq!(m.read_state, ReadState::Unread);
        assert_eq!((m.from_user, m.to_user), (c.id, s.id));

        assert!(matches!(
            w.ex.send_message(&w.login(&s), s2.id, "hi"),
            Err(Error::RecipientInvalid)
        ));
        assert!(matches!(
            w.ex.send_message(&w.login(&pending), s.id, "hi"),
            Err(Error::SenderNotVerified)
        ));
        assert!(matches!(
            w.ex.send_message(&w.login(&c), pending_school.id, "hi"),
            Err(Error::RecipientInvalid)
        ));
        assert!(matches!(
            w.ex.send_message(&w.login(&c), 9999, "hi"),
            Err(Error::RecipientInvalid)
        ));
        assert!(matches!(
            w.ex.send_message(&w.login(&c), s.id, ""),
            Err(Error::BodyInvalid(FieldError::BodyEmpty))
        ));
        // school -> company works the same way
        assert!(w.ex.send_message(&w.login(&s), c.id, "Thanks").is_ok());
    }

    #[test]
    fn inbox_newest_first_and_scoped() {
        let w = World::new();
        let s = w.user("School", Role::School, true);
        let other = w.user("Other", Role::School, true);
        let c = w.user("Corp", Role::Company, true);
        let ids: Vec<_> = (0..3).map(|i| w.send(&c, &s, &format!("to s {i}")).id).collect();
        w.send(&c, &other, "x");
        w.send(&c, &other, "y");
        let inbox = w.ex.inbox(&w.login(&s)).unwrap();
        let got: Vec<_> = inbox.iter().map(|e| e.message_id).collect();
        assert_eq!(got, ids.iter().rev().copied().collect::<Vec<_>>());
        assert!(inbox.windows(2).all(|p| p[0].created_at >= p[1].created_at));
        assert!(inbox.iter().all(|e| e.from_name == "Corp"));
    }

    #[test]
    fn empty_inbox() {
        let w = World::new();
        let s = w.user("School", Role::School, true);
        assert!(w.ex.inbox(&w.login(&s)).unwrap().is_empty());
        assert_eq!(w.ex.unread_count(&w.login(&s)).unwrap(), 0);
    }

    #[test]
    fn excerpt_is_prefix() {
        assert_eq!(excerpt("0123456789"), "0123456789");
        let long = "é".repeat(300);
        assert_eq!(excerpt(&long).chars().count(), EXCERPT_CHARS);
        assert!(long.starts_with(excerpt(&long)));
    }

    #[test]
    fn open_marks_read_once_and_is_recipient_only() {
        let w = World::new();
        let s = w.user("School", Role::School, true);
        let c = w.user("Corp", Role::Company, true);
        let m = w.send(&c, &s, "Please cover Kubernetes");
        assert_eq!(w.ex.unread_count(&w.login(&s)).unwrap(), 1);

        let first = w.ex.open_message_receipt(&w.login(&s), m.id).unwrap();
        assert!(first.newly_read);
        assert_eq!(first.message.read_state, ReadState::Read);
        assert_eq!(first.message.body, "Please cover Kubernetes");
        let second = w.ex.open_message_receipt(&w.login(&s), m.id).unwrap();
        assert!(!second.newly_read);
        assert_eq!(second.message, first.message);
        assert_eq!(w.ex.unread_count(&w.login(&s)).unwrap(), 0);

        assert!(matches!(w.ex.open_message(&w.login(&c), m.id), Err(Error::Forbidden)));
        assert!(matches!(w.ex.open_message(&w.login(&s), 999), Err(Error::NotFound)));
    }

    #[test]
    fn unread_count_brute_force() {
        let w = World::new();
        let s = w.user("School", Role::School, true);
        let c = w.user("Corp", Role::Company, true);
        let msgs: Vec<_> = (0..7).map(|i| w.send(&c, &s, &format!("m{i}"))).collect();
        for m in &msgs[..2] {
            w.ex.open_message(&w.login(&s), m.id).unwrap();
        }
        let inbox = w.ex.inbox(&w.login(&s)).unwrap();
        let brute = inbox.iter().filter(|e| e.read_state == ReadState::Unread).count() as u64;
        assert_eq!(brute, 5);
        assert_eq!(w.ex.unread_count(&w.login(&s)).unwrap(), brute);
    }

    #[test]
    fn reports_company_to_school_only() {
        let w = World::new();
        let s = w.user("School", Role::School, true);
        let s2 = w.user("School Two", Role::School, true);
        let c = w.user("Corp", Role::Company, true);
        let form = |school_id| ReportForm {
            school_id,
            student_name: "Ada Obi".into(),
            period: "2024 SIWES".into(),
            body: "Excellent attendance.".into(),
        };
        let r1 = w.ex.submit_report(&w.login(&c), &form(s.id)).unwrap();
        w.clock.advance(Duration::milliseconds(1));
        let r2 = w.ex.submit_report(&w.login(&c), &form(s.id)).unwrap();
        w.ex.submit_report(&w.login(&c), &form(s2.id)).unwrap();
        assert_eq!(r1.created_at, Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap() + Duration::milliseconds(3));

        let listed = w.ex.list_reports(&w.login(&s)).unwrap();
        assert_eq!(listed, vec![r2, r1]);

        assert!(matches!(
            w.ex.submit_report(&w.login(&s), &form(s2.id)),
            Err(Error::Forbidden)
        ));
        assert!(matches!(w.ex.list_reports(&w.login(&c)), Err(Error::Forbidden)));
        let mut bad = form(s.id);
        bad.student_name = " ".into();
        match w.ex.submit_report(&w.login(&c), &bad) {
            Err(Error::FormInvalid(v)) => assert_eq!(v, vec![FieldError::StudentNameEmpty]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            w.ex.submit_report(&w.login(&c), &form(c.id)),
            Err(Error::RecipientInvalid)
        ));
    }

    #[test]
    fn school_without_reports() {
        let w = World::new();
        let s = w.user("School", Role::School, true);
        assert!(w.ex.list_reports(&w.login(&s)).unwrap().is_empty());
    }

    #[test]
    fn admin_sessions_cannot_use_exchange() {
        let w = World::new();
        w.auth.create_admin("root@liaison.test", "admin-pass-1").unwrap();
        let s = w.auth.issue_session(PrincipalKind::Admin, 1).unwrap();
        let admin = w.auth.authenticate(&s.token).unwrap();
        assert!(matches!(w.ex.inbox(&admin), Err(Error::Forbidden)));
        assert!(matches!(w.ex.list_recipients(&admin), Err(Error::Forbidden)));
    }
}
