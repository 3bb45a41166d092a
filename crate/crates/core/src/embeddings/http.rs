//! Remote encoder over HTTP.
//!
//! `POST {base}/embed_text {"text": s}` and
//! `POST {base}/embed_image {"png_or_ppm_base64": b64}` both answer `{"vec": [...]}`.
//! Crops are sent as binary PPM.

use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{check_visual_index, Embedding, Encoder};
use crate::raster::{crop_raster, encode_ppm, read_ppm};
use crate::scene::Scene;
use crate::{Error, Result};

pub const ENCODER_URL_ENV: &str = "PLACE_ENCODER_URL";

#[derive(Debug, Clone)]
pub struct HttpEncoder {
    base: String,
    dim: usize,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct TextRequest<'a> {
    text: &'a str,
}

#[derive(Serialize)]
struct ImageRequest {
    png_or_ppm_base64: String,
}

#[derive(Deserialize)]
struct VecResponse {
    vec: Vec<f32>,
}

impl HttpEncoder {
    pub fn new(base: impl Into<String>, dim: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            dim,
            agent,
        }
    }

    pub fn from_env(dim: usize) -> Result<Self> {
        std::env::var(ENCODER_URL_ENV)
            .map(|u| Self::new(u, dim))
            .map_err(|_| Error::ProviderUnavailable(format!("{ENCODER_URL_ENV} is not set")))
    }

    fn call(&self, route: &str, body: impl Serialize) -> Result<Embedding> {
        let url = format!("{}/{route}", self.base);
        let unavailable = |m: String| Error::ProviderUnavailable(format!("{url}: {m}"));
        let mut resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(unavailable(format!("status {}", resp.status())));
        }
        let r: VecResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| unavailable(format!("malformed response: {e}")))?;
        if r.vec.len() != self.dim {
            return Err(Error::Shape(format!(
                "encoder returned {} components, expected {}",
                r.vec.len(),
                self.dim
            )));
        }
        Embedding::from_f32(r.vec)
    }
}

impl Encoder for HttpEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Embedding> {
        self.call("embed_text", TextRequest { text })
    }

    fn embed_visual(&self, scene: &Scene, index: usize) -> Result<Embedding> {
        check_visual_index(scene, index)?;
        let raster_ref = scene
            .raster
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("scene has no raster to crop".into()))?;
        let img = read_ppm(&raster_ref.path)?;
        let crop = match scene.objects.get(index) {
            Some(o) => {
                let rect = o.raster_bbox.unwrap_or_else(|| raster_ref.rect_for(&o.aabb));
                crop_raster(&img, rect)?
            }
            None => img,
        };
        let b64 = base64::engine::general_purpose::STANDARD.encode(encode_ppm(&crop));
        self.call("embed_image", ImageRequest { png_or_ppm_base64: b64 })
    }
}
