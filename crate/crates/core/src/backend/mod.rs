//! Model backends behind a fixed wire contract.
//!
//! Each task has its own trait so callers can plug in any implementation;
//! [`ModelClient`] covers the two stock ones (built-in mock and HTTP).

pub mod http;
pub mod mock;
pub mod wire;

pub use http::HttpBackend;
pub use mock::MockBackend;
pub use wire::*;

use crate::error::Result;

pub trait QaBackend: Send + Sync {
    fn backend_id(&self) -> String;
    fn answer(&self, req: &QaRequest) -> Result<QaResponse>;
    fn answer_batch(&self, reqs: &[QaRequest]) -> Result<Vec<QaResponse>> {
        reqs.iter().map(|r| self.answer(r)).collect()
    }
}

pub trait ConvertBackend: Send + Sync {
    fn backend_id(&self) -> String;
    fn convert(&self, req: &ConvertRequest) -> Result<ConvertResponse>;
    fn convert_batch(&self, reqs: &[ConvertRequest]) -> Result<Vec<ConvertResponse>> {
        reqs.iter().map(|r| self.convert(r)).collect()
    }
}

pub trait DecontextBackend: Send + Sync {
    fn backend_id(&self) -> String;
    fn decontext(&self, req: &DecontextRequest) -> Result<DecontextResponse>;
    fn decontext_batch(&self, reqs: &[DecontextRequest]) -> Result<Vec<DecontextResponse>> {
        reqs.iter().map(|r| self.decontext(r)).collect()
    }
}

pub trait NliBackend: Send + Sync {
    fn backend_id(&self) -> String;
    fn nli(&self, req: &NliRequest) -> Result<NliResponse>;
    fn nli_batch(&self, reqs: &[NliRequest]) -> Result<Vec<NliResponse>> {
        reqs.iter().map(|r| self.nli(r)).collect()
    }
}

#[derive(Debug, Clone)]
pub enum ModelClient {
    Mock(MockBackend),
    Http(HttpBackend),
}

impl ModelClient {
    pub fn from_spec(spec: &BackendSpec) -> Result<Self> {
        Ok(match spec {
            BackendSpec::Mock => ModelClient::Mock(MockBackend),
            BackendSpec::Http(url) => ModelClient::Http(HttpBackend::new(url)?),
        })
    }
}

macro_rules! delegate {
    ($trait:ident, $method:ident, $batch:ident, $req:ty, $resp:ty) => {
        impl $trait for ModelClient {
            fn backend_id(&self) -> String {
                match self {
                    ModelClient::Mock(m) => $trait::backend_id(m),
                    ModelClient::Http(h) => $trait::backend_id(h),
                }
            }
            fn $method(&self, req: &$req) -> Result<$resp> {
                match self {
                    ModelClient::Mock(m) => m.$method(req),
                    ModelClient::Http(h) => h.$method(req),
                }
            }
            fn $batch(&self, reqs: &[$req]) -> Result<Vec<$resp>> {
                match self {
                    ModelClient::Mock(m) => m.$batch(reqs),
                    ModelClient::Http(h) => h.$batch(reqs),
                }
            }
        }
    };
}

delegate!(QaBackend, answer, answer_batch, QaRequest, QaResponse);
delegate!(ConvertBackend, convert, convert_batch, ConvertRequest, ConvertResponse);
delegate!(DecontextBackend, decontext, decontext_batch, DecontextRequest, DecontextResponse);
delegate!(NliBackend, nli, nli_batch, NliRequest, NliResponse);
