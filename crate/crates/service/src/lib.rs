//! HTTP session service for live verification campaigns.
//!
//! A session tracks one campaign: the current verification state, the result
//! history and a recommendation computed in the background by the tempering
//! engine. Clients poll the recommendation, execute the activity and post the
//! observed result. Every accepted submission is appended to a JSON-lines log
//! under the data directory; on startup the logs are replayed through the same
//! transition code, so a restarted service holds identical sessions.
//!
//! Endpoints (all JSON, errors as `{code, message}`):
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/scenarios` | presets, rules and defaults |
//! | POST | `/sessions` | `{scenario, config?, seed?}` |
//! | GET | `/sessions/{id}` | session view |
//! | POST | `/sessions/{id}/results` | `{activity, result?, override?}` |
//! | GET | `/sessions/{id}/recommendation` | recommendation with status |
//! | GET | `/sessions/{id}/tree` | foresight tree of the recommendation |

mod api;
mod error;
mod scenario_ref;
mod session;
mod store;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

pub use api::{router, CreateRequest, SubmitRequest};
pub use error::ApiError;
pub use scenario_ref::ScenarioRef;
pub use session::{
    Event, JobStatus, LogRecord, Recommendation, Session, SessionView, Status, Totals, TreeView,
};
use store::Store;
use verispace_core::treespace::Action;
use verispace_core::PtConfig;

#[derive(Clone, Debug, Default)]
pub struct ServiceOptions {
    /// Directory of session logs; sessions are memory-only without one.
    pub data_dir: Option<PathBuf>,
}

type SessionRef = Arc<Mutex<Session>>;

pub struct Service {
    sessions: RwLock<BTreeMap<String, SessionRef>>,
    next_id: AtomicU64,
    store: Option<Store>,
    catalogue: serde_json::Value,
}

impl Service {
    /// Opens the service, replaying every log in the data directory and
    /// restarting recommendation jobs for active sessions.
    pub fn open(options: ServiceOptions) -> std::io::Result<Arc<Self>> {
        let store = options.data_dir.map(Store::open).transpose()?;
        let mut sessions = BTreeMap::new();
        let mut max_id = 0;
        if let Some(store) = &store {
            for (id, records) in store.load_all()? {
                let session = Session::replay(&records).map_err(|e| {
                    std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        format!("session {id}: {}", e.message),
                    )
                })?;
                max_id = max_id.max(parse_id(&id).unwrap_or(0));
                sessions.insert(id, Arc::new(Mutex::new(session)));
            }
        }
        let service = Arc::new(Service {
            sessions: RwLock::new(sessions),
            next_id: AtomicU64::new(max_id + 1),
            store,
            catalogue: api::catalogue(),
        });
        for s in service.sessions.read().expect("session map").values() {
            launch(s);
        }
        Ok(service)
    }

    pub fn create(
        &self,
        scenario: ScenarioRef,
        config: PtConfig,
        seed: u64,
    ) -> Result<SessionView, ApiError> {
        let id = format!("s{:06}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let session = Session::create(id.clone(), scenario, config, seed)?;
        if let Some(store) = &self.store {
            store
                .create(&id, &session.log()[0])
                .map_err(|e| ApiError::internal(format!("cannot persist session: {e}")))?;
        }
        let view = session.view();
        let session = Arc::new(Mutex::new(session));
        self.sessions
            .write()
            .expect("session map")
            .insert(id, session.clone());
        Ok(launch(&session).unwrap_or(view))
    }

    pub fn get(&self, id: &str) -> Result<SessionRef, ApiError> {
        self.sessions
            .read()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    pub fn submit(
        &self,
        id: &str,
        activity: &Action,
        result: Option<bool>,
        override_: bool,
    ) -> Result<SessionView, ApiError> {
        let session = self.get(id)?;
        let persisted = {
            let mut s = session.lock().expect("session lock");
            s.check_recommended(activity, override_)?;
            let log_len = s.log().len();
            s.apply(activity, result, override_)?;
            match &self.store {
                // The log line is the commit point; roll back if it fails.
                Some(store) => store.append(id, &s.log()[log_len]).map_err(|e| {
                    let records = s.log()[..log_len].to_vec();
                    match Session::replay(&records) {
                        Ok(previous) => *s = previous,
                        Err(r) => return r,
                    }
                    ApiError::internal(format!("cannot persist result: {e}"))
                }),
                None => Ok(()),
            }
        };
        let view = launch(&session);
        persisted?;
        Ok(view.unwrap_or_else(|| session.lock().expect("session lock").view()))
    }

    pub fn catalogue(&self) -> &serde_json::Value {
        &self.catalogue
    }
}

/// Starts the session's next recommendation job, if any, on its own thread.
/// Returns the session view taken right after the job was registered.
fn launch(session: &SessionRef) -> Option<SessionView> {
    let mut s = session.lock().expect("session lock");
    let job = s.begin_job()?;
    let view = s.view();
    drop(s);
    let session = session.clone();
    std::thread::Builder::new()
        .name("recommendation".into())
        .spawn(move || {
            let outcome = job.run();
            session
                .lock()
                .expect("session lock")
                .finish_job(job.generation, outcome);
        })
        .expect("spawn recommendation thread");
    Some(view)
}

fn parse_id(id: &str) -> Option<u64> {
    id.strip_prefix('s')?.parse().ok()
}

/// Serves the API on `listener` until ctrl-c.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Arc<Service>,
) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
