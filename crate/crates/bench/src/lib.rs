//! Shared setup for the benchmarks.

use liaison_core::model::{NewMessage, NewUser, PasswordDigest};
use liaison_core::store::UserUpdate;
use liaison_core::{Role, Store, StoreConfig, UserAccount};

/// An in-memory store with `n` accounts alternating School/Company, every
/// third one left unverified.
pub fn population(n: usize) -> (Store, Vec<UserAccount>) {
    let store = Store::open(&StoreConfig::InMemory).expect("in-memory store");
    let users = (0..n)
        .map(|i| {
            let role = if i % 2 == 0 { Role::School } else { Role::Company };
            let u = store
                .insert_user(&NewUser {
                    name: format!("Account {i:04}"),
                    email: format!("acct{i}@bench.test"),
                    phone: "08035550101".into(),
                    password_digest: PasswordDigest::new("bench"),
                    role,
                })
                .expect("insert");
            if i % 3 == 2 {
                u
            } else {
                store.update_user(u.id, UserUpdate::Verify).expect("verify")
            }
        })
        .collect();
    (store, users)
}

/// Sends `per_pair` messages from each company to the first school.
pub fn fill_inbox(store: &Store, users: &[UserAccount], per_pair: usize) -> i64 {
    let school = users[0].id;
    for u in users.iter().filter(|u| u.role == Role::Company) {
        for k in 0..per_pair {
            store
                .insert_message(&NewMessage { from_user: u.id, to_user: school, body: format!("msg {k}") })
                .expect("insert message");
        }
    }
    school
}
