//! Deterministic demo dataset.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::auth::{PasswordHasher, SALT_BYTES};
use crate::model::{NewMessage, NewReport, NewUser, Role};
use crate::store::{MessageUpdate, Store, StoreError, UserUpdate};

pub const DEMO_ADMIN_EMAIL: &str = "admin@liaison.test";
pub const DEMO_ADMIN_PASSWORD: &str = "admin-demo-pass";
pub const DEMO_USER_PASSWORD: &str = "demo-password";

const SALT_SEED: u64 = 0x5EED_0001;

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("store already contains accounts; pass --force to wipe and reseed")]
    NotEmpty,
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoAccount {
    pub id: i64,
    /// `None` for the administrator.
    pub role: Option<Role>,
    pub name: String,
    pub email: String,
    pub password: String,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedSummary {
    pub accounts: Vec<DemoAccount>,
    pub messages: usize,
    pub read_messages: usize,
    pub reports: usize,
}

struct DemoUser {
    name: &'static str,
    email: &'static str,
    phone: &'static str,
    role: Role,
    verified: bool,
}

const USERS: [DemoUser; 5] = [
    DemoUser {
        name: "Redwood University Computer Science",
        email: "cs@redwood.edu",
        phone: "+234 801 555 0101",
        role: Role::School,
        verified: true,
    },
    DemoUser {
        name: "Lakeside Polytechnic Computing",
        email: "computing@lakeside.edu",
        phone: "+234 801 555 0102",
        role: Role::School,
        verified: true,
    },
    DemoUser {
        name: "Brightwire Systems",
        email: "hr@brightwire.com",
        phone: "+234 802 555 0201",
        role: Role::Company,
        verified: true,
    },
    DemoUser {
        name: "Northgate Analytics",
        email: "talent@northgate.com",
        phone: "+234 802 555 0202",
        role: Role::Company,
        verified: true,
    },
    DemoUser {
        name: "Pending Labs",
        email: "hello@pendinglabs.com",
        phone: "+234 802 555 0203",
        role: Role::Company,
        verified: false,
    },
];

/// (from index, to index, body, read)
const MESSAGES: [(usize, usize, &str, bool); 3] = [
    (
        2,
        0,
        "Graduates we hire struggle with version control and CI. Please consider covering Git workflows in CSC 403 Software Engineering.",
        true,
    ),
    (
        3,
        0,
        "Our analysts use statistics daily; CSC 335 Statistical Computing would be more useful as a core course than an elective.",
        false,
    ),
    (
        0,
        2,
        "Thank you for the feedback. We will table it at the next curriculum review meeting.",
        false,
    ),
];

/// (company index, school index, student, period, body)
const REPORTS: [(usize, usize, &str, &str, &str); 2] = [
    (
        2,
        0,
        "Ada Obi",
        "2024 SIWES",
        "Ada worked on the internal deployment tooling team. Punctual, quick to learn Docker, needs more practice writing tests.",
    ),
    (
        3,
        1,
        "Tunde Bakare",
        "2024 SIWES",
        "Tunde built dashboards in SQL and Python. Strong analytical skills; communication in meetings improved steadily.",
    ),
];

/// Populate a store with one admin, five accounts, three messages (one
/// read) and two reports. Salts come from a fixed-seed generator so two
/// runs produce identical rows apart from timestamps.
pub fn seed_demo(store: &Store, hasher: &PasswordHasher, force: bool) -> Result<SeedSummary, SeedError> {
    if !store.has_no_accounts()? {
        if !force {
            return Err(SeedError::NotEmpty);
        }
        store.wipe_accounts()?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(SALT_SEED);
    let mut salt = move || {
        let mut s = [0u8; SALT_BYTES];
        rng.fill_bytes(&mut s);
        s
    };

    let admin = store.insert_admin(
        DEMO_ADMIN_EMAIL,
        &hasher.hash_with_salt(DEMO_ADMIN_PASSWORD, &salt()),
    )?;
    let mut accounts = vec![DemoAccount {
        id: admin.id,
        role: None,
        name: "Administrator".into(),
        email: admin.email,
        password: DEMO_ADMIN_PASSWORD.into(),
        verified: true,
    }];

    let mut ids = Vec::with_capacity(USERS.len());
    for u in &USERS {
        let created = store.insert_user(&NewUser {
            name: u.name.into(),
            email: u.email.into(),
            phone: crate::model::normalize_phone(u.phone).expect("demo phone is valid"),
            password_digest: hasher.hash_with_salt(DEMO_USER_PASSWORD, &salt()),
            role: u.role,
        })?;
        if u.verified {
            store.update_user(created.id, UserUpdate::Verify)?;
        }
        ids.push(created.id);
        accounts.push(DemoAccount {
            id: created.id,
            role: Some(u.role),
            name: created.name,
            email: created.email,
            password: DEMO_USER_PASSWORD.into(),
            verified: u.verified,
        });
    }

    let mut read_messages = 0;
    for (from, to, body, read) in MESSAGES {
        let m = store.insert_message(&NewMessage {
            from_user: ids[from],
            to_user: ids[to],
            body: body.into(),
        })?;
        if read {
            store.update_message(m.id, MessageUpdate::MarkRead)?;
            read_messages += 1;
        }
    }

    for (company, school, student, period, body) in REPORTS {
        store.insert_report(&NewReport {
            company_id: ids[company],
            school_id: ids[school],
            student_name: student.into(),
            period: period.into(),
            body: body.into(),
        })?;
    }

    tracing::info!(accounts = accounts.len(), "seeded demo data");
    Ok(SeedSummary {
        accounts,
        messages: MESSAGES.len(),
        read_messages,
        reports: REPORTS.len(),
    })
}
