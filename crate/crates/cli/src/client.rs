//! Blocking client for the `/api/v1` endpoints the CLI needs.

use std::fmt;

use chrono::{DateTime, Utc};
use reqwest::blocking::{Client, RequestBuilder, Response};
use reqwest::Method;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use studyu_core::analysis::ReportBundle;
use studyu_core::enrollment::Enrollment;
use studyu_core::model::{serialize_study, Study, StudyMetadata};
use studyu_server::ApiError;
use studyu_store::{AnonymousUser, EnrollmentRequest, NewTaskResult, StoredStudy};

/// A failed call: either an API error body or a transport problem.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientError {
    Api(ApiError),
    Transport(String),
}

impl ClientError {
    pub fn code(&self) -> &str {
        match self {
            ClientError::Api(e) => &e.code,
            ClientError::Transport(_) => "transport_error",
        }
    }
}

impl fmt::Display for ClientError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClientError::Api(e) => write!(f, "{}: {}", e.code, e.message),
            ClientError::Transport(m) => write!(f, "transport_error: {m}"),
        }
    }
}

pub struct ApiClient {
    base: String,
    token: Option<String>,
    http: Client,
}

impl ApiClient {
    pub fn new(server: &str, token: Option<String>) -> Self {
        Self {
            base: format!("{}/api/v1", server.trim_end_matches('/')),
            token,
            http: Client::new(),
        }
    }

    fn request(&self, method: Method, path: &str, designer: bool) -> RequestBuilder {
        let req = self.http.request(method, format!("{}{path}", self.base));
        match (&self.token, designer) {
            (Some(token), true) => req.bearer_auth(token),
            _ => req,
        }
    }

    fn send(req: RequestBuilder) -> Result<Response, ClientError> {
        let res = req.send().map_err(|e| ClientError::Transport(e.to_string()))?;
        if res.status().is_success() {
            return Ok(res);
        }
        let status = res.status().as_u16();
        let text = res.text().unwrap_or_default();
        let mut err: ApiError = serde_json::from_str(&text).unwrap_or_else(|_| ApiError {
            status,
            code: format!("http_{status}"),
            message: text,
            details: None,
        });
        err.status = status;
        Err(ClientError::Api(err))
    }

    fn json<T: DeserializeOwned>(req: RequestBuilder) -> Result<T, ClientError> {
        Self::send(req)?.json().map_err(|e| ClientError::Transport(e.to_string()))
    }

    fn call<T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        designer: bool,
        body: Option<&impl Serialize>,
    ) -> Result<T, ClientError> {
        let mut req = self.request(method, path, designer);
        if let Some(b) = body {
            req = req.json(b);
        }
        Self::json(req)
    }

    // ---- participant ----

    pub fn create_user(&self) -> Result<AnonymousUser, ClientError> {
        self.call(Method::POST, "/users", false, Some(&json!({ "termsAccepted": true })))
    }

    pub fn published_study(&self, id: &str) -> Result<Study, ClientError> {
        self.call(Method::GET, &format!("/studies/{id}"), false, None::<&()>)
    }

    pub fn list_published(&self) -> Result<Vec<StudyMetadata>, ClientError> {
        self.call(Method::GET, "/studies", false, None::<&()>)
    }

    pub fn enroll(&self, request: &EnrollmentRequest) -> Result<Enrollment, ClientError> {
        self.call(Method::POST, "/enrollments", false, Some(request))
    }

    pub fn record(&self, enrollment: &str, result: &NewTaskResult) -> Result<Value, ClientError> {
        self.call(Method::POST, &format!("/enrollments/{enrollment}/results"), false, Some(result))
    }

    pub fn enrollment(&self, enrollment: &str) -> Result<Enrollment, ClientError> {
        self.call(Method::GET, &format!("/enrollments/{enrollment}"), false, None::<&()>)
    }

    pub fn opt_out(&self, enrollment: &str) -> Result<(), ClientError> {
        Self::send(self.request(Method::POST, &format!("/enrollments/{enrollment}/opt-out"), false)).map(drop)
    }

    pub fn delete_user(&self, user: &str) -> Result<(), ClientError> {
        Self::send(self.request(Method::DELETE, &format!("/users/{user}"), false)).map(drop)
    }

    pub fn report(&self, enrollment: &str) -> Result<ReportBundle, ClientError> {
        self.call(Method::GET, &format!("/enrollments/{enrollment}/report"), false, None::<&()>)
    }

    // ---- designer ----

    pub fn designer_study(&self, id: &str) -> Result<Option<StoredStudy>, ClientError> {
        match self.call(Method::GET, &format!("/designer/studies/{id}"), true, None::<&()>) {
            Ok(s) => Ok(Some(s)),
            Err(ClientError::Api(e)) if e.code == "not_found" => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Save a draft expected to be at `expected_revision`; returns the stored metadata.
    pub fn save_draft(&self, study: &Study, expected_revision: u64) -> Result<StudyMetadata, ClientError> {
        let mut body: Value =
            serde_json::from_slice(&serialize_study(&study.metadata, &study.details)).expect("canonical JSON");
        body["expectedRevision"] = json!(expected_revision);
        if expected_revision == 0 {
            self.call(Method::POST, "/designer/studies", true, Some(&body))
        } else {
            let path = format!("/designer/studies/{}", study.metadata.study_id);
            self.call(Method::PUT, &path, true, Some(&body))
        }
    }

    pub fn publish(&self, id: &str, expected_revision: u64) -> Result<StudyMetadata, ClientError> {
        self.call(
            Method::POST,
            &format!("/designer/studies/{id}/publish"),
            true,
            Some(&json!({ "expectedRevision": expected_revision })),
        )
    }

    /// Save `study` over whatever draft exists, then publish it.
    pub fn save_and_publish(&self, study: &Study) -> Result<StudyMetadata, ClientError> {
        let id = study.metadata.study_id.as_str();
        let current = self.designer_study(id)?.map_or(0, |s| s.metadata.revision);
        let saved = self.save_draft(study, current)?;
        self.publish(id, saved.revision)
    }

    pub fn export_csv(&self, id: &str) -> Result<Vec<u8>, ClientError> {
        let res = Self::send(self.request(Method::GET, &format!("/designer/studies/{id}/export.csv"), true))?;
        res.bytes()
            .map(|b| b.to_vec())
            .map_err(|e| ClientError::Transport(e.to_string()))
    }

    pub fn set_clock(&self, now: DateTime<Utc>) -> Result<(), ClientError> {
        let _: Value = self.call(Method::PUT, "/designer/clock", true, Some(&json!({ "now": now })))?;
        Ok(())
    }
}
