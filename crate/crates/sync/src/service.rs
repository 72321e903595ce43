//! The set of open projects plus sessions and the assist backend.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use rta_assist::{build_provider, Assistant, Provider, ProviderError};
use rta_core::{
    validate, CoderId, Event, EventBody, ProjectId, ProjectSettings, ProjectState,
    ProposedEvent,
};
use rta_core::provenance::{export_audit, import_audit, AuditError};
use thiserror::Error;

use crate::config::Config;
use crate::project::{Advisor, Project, ProjectOptions, SubmitError};
use crate::sessions::SessionStore;
use crate::storage::{self, ensure_writable, project_dirs, valid_project_id, EventLog, StorageError, PROJECTS_DIR};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("data directory unusable: {0}")]
    Storage(#[from] StorageError),
    #[error("session store: {0}")]
    Sessions(std::io::Error),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Submit(#[from] SubmitError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error("project {0} already exists")]
    Exists(ProjectId),
    #[error("no project {0}")]
    NotFound(String),
    #[error("invalid project id {0:?}")]
    InvalidId(String),
}

pub struct Service {
    pub config: Config,
    pub sessions: SessionStore,
    pub assistant: Arc<Assistant>,
    advisor: Arc<Advisor>,
    projects: RwLock<BTreeMap<ProjectId, Arc<Project>>>,
    create: tokio::sync::Mutex<()>,
}

impl Service {
    /// Opens every project under the data directory. Must run inside a tokio runtime.
    pub fn open(config: Config) -> Result<Arc<Service>, ServiceError> {
        let provider = build_provider(&config.provider)?;
        Service::with_provider(config, provider)
    }

    pub fn with_provider(config: Config, provider: Arc<dyn Provider>) -> Result<Arc<Service>, ServiceError> {
        ensure_writable(&config.data_dir)?;
        ensure_writable(&config.data_dir.join(PROJECTS_DIR))?;
        let sessions = SessionStore::open(&config.data_dir, config.session_ttl_secs).map_err(ServiceError::Sessions)?;
        let assistant = Arc::new(Assistant::new(provider, config.provider.max_retries));
        let advisor = Arc::new(Advisor {
            assistant: assistant.clone(),
            policy: config.drift,
            rule: config.overlap_rule,
            discussion: config.discussion,
            exemplar_limit: config.exemplar_limit,
        });
        let service = Service {
            config,
            sessions,
            assistant,
            advisor,
            projects: RwLock::new(BTreeMap::new()),
            create: tokio::sync::Mutex::new(()),
        };
        for dir in project_dirs(&service.config.data_dir)? {
            let project = Project::open(&dir, service.options(), Some(service.advisor.clone()))?;
            if project.head_seq() == 0 {
                // a creation that never committed
                continue;
            }
            service.projects.write().unwrap().insert(project.id().clone(), project);
        }
        tracing::info!(projects = service.projects.read().unwrap().len(), "service ready");
        Ok(Arc::new(service))
    }

    fn options(&self) -> ProjectOptions {
        ProjectOptions { snapshot_every: self.config.snapshot_every, broadcast_capacity: self.config.broadcast_capacity }
    }

    pub fn project(&self, id: &str) -> Option<Arc<Project>> {
        self.projects.read().unwrap().get(&ProjectId::new(id)).cloned()
    }

    pub fn projects(&self) -> Vec<Arc<Project>> {
        self.projects.read().unwrap().values().cloned().collect()
    }

    /// Creates a project with a server-issued id. Its first event is `ProjectCreated` by `actor`.
    pub async fn create_project(
        &self,
        actor: &CoderId,
        name: &str,
        settings: ProjectSettings,
        blind_mode: bool,
    ) -> Result<(Arc<Project>, Event), ServiceError> {
        let id = ProjectId::new(format!("p-{}", uuid::Uuid::new_v4().simple()));
        let proposal = ProposedEvent::new(
            actor.clone(),
            EventBody::ProjectCreated { project_id: id.clone(), name: name.to_owned(), settings, blind_mode },
        );
        validate(&ProjectState::default(), &proposal).map_err(|violations| SubmitError::Rejected { index: 0, violations })?;
        let _guard = self.create.lock().await;
        let dir = self.config.data_dir.join(PROJECTS_DIR).join(id.as_str());
        let project = Project::open(&dir, self.options(), Some(self.advisor.clone()))?;
        let event = project.submit(vec![proposal]).await?.remove(0);
        self.projects.write().unwrap().insert(id, project.clone());
        Ok((project, event))
    }
}

/// Reads a project's log without modifying it (a torn tail is ignored).
pub fn read_project(data_dir: &Path, project: &str) -> Result<Vec<Event>, ServiceError> {
    if !valid_project_id(project) {
        return Err(ServiceError::InvalidId(project.to_owned()));
    }
    let path = data_dir.join(PROJECTS_DIR).join(project).join(storage::LOG_FILE);
    let bytes = std::fs::read(&path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            ServiceError::NotFound(project.to_owned())
        } else {
            ServiceError::Storage(StorageError::Io { path: path.clone(), source })
        }
    })?;
    Ok(storage::scan(&path, &bytes)?.events)
}

/// Audit export of a stored project.
pub fn export_project(data_dir: &Path, project: &str) -> Result<Vec<u8>, ServiceError> {
    let events = read_project(data_dir, project)?;
    let state = ProjectState::replay(&events).map_err(AuditError::from)?;
    Ok(export_audit(&events, &state)?)
}

/// Verifies an audit trail and stores it as a new project with the same id, seqs and timestamps.
pub fn import_project(data_dir: &Path, bytes: &[u8]) -> Result<ProjectId, ServiceError> {
    let events = import_audit(bytes)?;
    let state = ProjectState::replay(&events).map_err(AuditError::from)?;
    let id = state.project_id.clone().ok_or_else(|| ServiceError::InvalidId(String::new()))?;
    if !valid_project_id(id.as_str()) {
        return Err(ServiceError::InvalidId(id.to_string()));
    }
    ensure_writable(&data_dir.join(PROJECTS_DIR))?;
    let dir = data_dir.join(PROJECTS_DIR).join(id.as_str());
    if dir.join(storage::LOG_FILE).metadata().is_ok_and(|m| m.len() > 0) {
        return Err(ServiceError::Exists(id));
    }
    let (mut log, _) = EventLog::open(&dir)?;
    log.append(&events)?;
    Ok(id)
}
