//! Persisted user settings (the remembered server URL).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const CONFIG_ENV: &str = "PROMPTSEG_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_url: Option<String>,
}

/// Where the config file lives; `None` disables persistence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigStore {
    path: Option<PathBuf>,
}

impl ConfigStore {
    /// `$PROMPTSEG_CONFIG`, else `<user config dir>/promptseg/config.toml`.
    pub fn user_default() -> Self {
        let path = std::env::var_os(CONFIG_ENV)
            .map(PathBuf::from)
            .or_else(|| dirs::config_dir().map(|d| d.join("promptseg").join("config.toml")));
        ConfigStore { path }
    }

    pub fn at(path: impl Into<PathBuf>) -> Self {
        ConfigStore { path: Some(path.into()) }
    }

    pub fn disabled() -> Self {
        ConfigStore { path: None }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// A missing file reads as the default config.
    pub fn load(&self) -> std::io::Result<ClientConfig> {
        let Some(path) = &self.path else { return Ok(ClientConfig::default()) };
        match std::fs::read_to_string(path) {
            Ok(s) => toml::from_str(&s).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(ClientConfig::default()),
            Err(e) => Err(e),
        }
    }

    pub fn save(&self, cfg: &ClientConfig) -> std::io::Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let text = toml::to_string(cfg).map_err(std::io::Error::other)?;
        std::fs::write(path, text)
    }

    pub fn remember_server(&self, url: &str) -> std::io::Result<()> {
        let mut cfg = self.load()?;
        cfg.server_url = Some(url.to_string());
        self.save(&cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let store = ConfigStore::at(dir.path().join("nested").join("config.toml"));
        assert_eq!(store.load().unwrap(), ClientConfig::default());
        store.remember_server("http://example.test:1527").unwrap();
        assert_eq!(store.load().unwrap().server_url.as_deref(), Some("http://example.test:1527"));
        let text = std::fs::read_to_string(store.path().unwrap()).unwrap();
        assert!(text.contains("server_url"));
    }

    #[test]
    fn disabled_store_is_inert() {
        let store = ConfigStore::disabled();
        store.remember_server("http://x").unwrap();
        assert_eq!(store.load().unwrap(), ClientConfig::default());
    }
}
