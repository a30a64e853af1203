use std::fmt;
use std::path::PathBuf;

use liaison_core::StoreConfig;

pub const DEFAULT_DB: &str = ":memory:";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ListenError {
    MissingPort(String),
    EmptyHost(String),
    BadPort(String),
}

impl fmt::Display for ListenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ListenError::MissingPort(a) => write!(f, "listen address {a:?} has no port"),
            ListenError::EmptyHost(a) => write!(f, "listen address {a:?} has no host"),
            ListenError::BadPort(a) => write!(f, "listen address {a:?}: port must be 1-65535"),
        }
    }
}

impl std::error::Error for ListenError {}

/// A validated `host:port`. The host may be a name, IPv4, or bracketed IPv6.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListenAddr {
    host: String,
    port: u16,
}

impl ListenAddr {
    pub fn parse(raw: &str) -> Result<ListenAddr, ListenError> {
        let raw = raw.trim();
        let (host, port) = raw
            .rsplit_once(':')
            .ok_or_else(|| ListenError::MissingPort(raw.to_owned()))?;
        if host.is_empty() || host == "[]" {
            return Err(ListenError::EmptyHost(raw.to_owned()));
        }
        if host.contains(':') && !(host.starts_with('[') && host.ends_with(']')) {
            return Err(ListenError::MissingPort(raw.to_owned()));
        }
        let port = port
            .parse::<u16>()
            .ok()
            .filter(|p| *p != 0)
            .ok_or_else(|| ListenError::BadPort(raw.to_owned()))?;
        Ok(ListenAddr { host: host.to_owned(), port })
    }
}

impl fmt::Display for ListenAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.host, self.port)
    }
}

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub db: StoreConfig,
    pub listen: ListenAddr,
    pub fixture: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

impl CliConfig {
    pub fn new(
        db: &str,
        listen: &str,
        fixture: Option<PathBuf>,
        static_dir: Option<PathBuf>,
    ) -> Result<CliConfig, ListenError> {
        Ok(CliConfig {
            db: StoreConfig::from_db_arg(db),
            listen: ListenAddr::parse(listen)?,
            fixture,
            static_dir,
        })
    }
}
