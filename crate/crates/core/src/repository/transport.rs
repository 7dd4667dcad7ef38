use std::fs;
use std::io;
use std::time::Duration;

use super::RepositorySource;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("not found")]
    NotFound,
    #[error("unavailable: {0}")]
    Unavailable(String),
}

/// Retrieves files relative to a repository's base URL.
pub trait Transport: Send + Sync {
    fn get(&self, source: &RepositorySource, relative: &str) -> Result<Vec<u8>, TransportError>;
}

/// Dispatches on the URL scheme: `http`/`https` over the network, `file` from
/// a local directory with the same layout.
pub struct DefaultTransport {
    agent: ureq::Agent,
}

impl Default for DefaultTransport {
    fn default() -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build();
        DefaultTransport {
            agent: config.into(),
        }
    }
}

impl Transport for DefaultTransport {
    fn get(&self, source: &RepositorySource, relative: &str) -> Result<Vec<u8>, TransportError> {
        match source.base_url().scheme() {
            "file" => get_file(source, relative),
            "http" | "https" => self.get_http(&source.join(relative)),
            other => Err(TransportError::Unavailable(format!(
                "unsupported scheme {other}"
            ))),
        }
    }
}

impl DefaultTransport {
    fn get_http(&self, url: &str) -> Result<Vec<u8>, TransportError> {
        let mut response = self
            .agent
            .get(url)
            .call()
            .map_err(|e| TransportError::Unavailable(e.to_string()))?;
        let status = response.status();
        if status == 404 {
            return Err(TransportError::NotFound);
        }
        if !status.is_success() {
            return Err(TransportError::Unavailable(format!("HTTP {status}")));
        }
        response
            .body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_to_vec()
            .map_err(|e| TransportError::Unavailable(e.to_string()))
    }
}

fn get_file(source: &RepositorySource, relative: &str) -> Result<Vec<u8>, TransportError> {
    let base = source
        .base_url()
        .to_file_path()
        .map_err(|_| TransportError::Unavailable("file URL is not a local path".into()))?;
    if !base.is_dir() {
        return Err(TransportError::Unavailable(format!(
            "{} is not a directory",
            base.display()
        )));
    }
    match fs::read(base.join(relative)) {
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(TransportError::NotFound),
        Err(e) => Err(TransportError::Unavailable(e.to_string())),
    }
}
