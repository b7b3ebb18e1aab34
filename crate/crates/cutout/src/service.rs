//! HTTP front end: `GET /cutout` and `GET /cutout/info`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use skyquery_core::sphere::SkyPos;
use tokio::net::TcpListener;

use crate::render::{self, parse_opt, CutoutRequest, MAX_SIZE};
use crate::tiles::TileSet;
use crate::CutoutError;

pub const CONTENT_TYPE: &str = "image/x-portable-graymap";

/// Tile-set metadata served at `/cutout/info`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoutInfo {
    pub tangent_ra: f64,
    pub tangent_dec: f64,
    pub native_scale: f64,
    pub default_scale: f64,
    pub min_scale: f64,
    pub max_scale: f64,
    pub max_size: usize,
    /// Cap enclosing every tile, degrees.
    pub footprint_radius: f64,
    pub tiles: usize,
    pub objects: usize,
}

impl CutoutInfo {
    pub fn of(tiles: &TileSet) -> Self {
        Self {
            tangent_ra: tiles.tangent.ra(),
            tangent_dec: tiles.tangent.dec(),
            native_scale: tiles.native_scale,
            default_scale: tiles.native_scale,
            min_scale: render::min_scale(tiles.native_scale),
            max_scale: render::max_scale(tiles.native_scale),
            max_size: MAX_SIZE,
            footprint_radius: tiles.footprint().1,
            tiles: tiles.tiles.len(),
            objects: tiles.objects.len(),
        }
    }
}

struct ApiError(CutoutError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0 {
            CutoutError::InvalidParam { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut detail = json!({ "code": self.0.code(), "message": self.0.to_string() });
        if let CutoutError::InvalidParam { name, .. } = &self.0 {
            detail["parameter"] = json!(name);
        }
        (status, Json(json!({ "error": detail }))).into_response()
    }
}

/// Builds a request from query parameters. `opt` is optional.
pub fn request_from_params(params: &HashMap<String, String>) -> Result<(CutoutRequest, String), CutoutError> {
    let get = |name: &str| params.get(name).ok_or_else(|| CutoutError::invalid(name, "missing"));
    let num = |name: &str| -> Result<f64, CutoutError> {
        let v = get(name)?;
        v.trim().parse::<f64>().map_err(|_| CutoutError::invalid(name, format!("'{v}' is not a number")))
    };
    let int = |name: &str| -> Result<usize, CutoutError> {
        let v = get(name)?;
        v.trim().parse::<usize>().map_err(|_| CutoutError::invalid(name, format!("'{v}' is not a pixel count")))
    };
    let (ra, dec) = (num("ra")?, num("dec")?);
    let center = SkyPos::new(ra, dec).map_err(|e| CutoutError::invalid(if (-90.0..=90.0).contains(&dec) { "ra" } else { "dec" }, e.to_string()))?;
    let opt = params.get("opt").cloned().unwrap_or_default();
    let (invert, overlay) = parse_opt(&opt)?;
    let req = CutoutRequest { center, scale: num("scale")?, width: int("width")?, height: int("height")?, invert, overlay };
    Ok((req, opt))
}

async fn info(State(tiles): State<Arc<TileSet>>) -> Json<CutoutInfo> {
    Json(CutoutInfo::of(&tiles))
}

async fn cutout(State(tiles): State<Arc<TileSet>>, Query(params): Query<HashMap<String, String>>) -> Response {
    let (req, opt) = match request_from_params(&params) {
        Ok(r) => r,
        Err(e) => return ApiError(e).into_response(),
    };
    let rendered = tokio::task::spawn_blocking(move || render::render(&tiles, &req)).await;
    let img = match rendered {
        Ok(Ok(img)) => img,
        Ok(Err(e)) => return ApiError(e).into_response(),
        Err(e) => return ApiError(CutoutError::Io(e.to_string())).into_response(),
    };
    let mut resp = (StatusCode::OK, img.to_p5()).into_response();
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static(CONTENT_TYPE));
    let echo = [
        ("x-cutout-ra", req.center.ra().to_string()),
        ("x-cutout-dec", req.center.dec().to_string()),
        ("x-cutout-scale", req.scale.to_string()),
        ("x-cutout-width", req.width.to_string()),
        ("x-cutout-height", req.height.to_string()),
        ("x-cutout-opt", opt),
    ];
    for (name, value) in echo {
        if let Ok(v) = HeaderValue::from_str(&value) {
            h.insert(HeaderName::from_static(name), v);
        }
    }
    resp
}

pub fn router(tiles: Arc<TileSet>) -> Router {
    Router::new().route("/cutout", get(cutout)).route("/cutout/info", get(info)).with_state(tiles)
}

pub struct RunningCutout {
    pub url: String,
    pub addr: SocketAddr,
    pub handle: tokio::task::JoinHandle<()>,
}

impl Drop for RunningCutout {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

pub async fn serve(listener: TcpListener, tiles: Arc<TileSet>) -> std::io::Result<()> {
    axum::serve(listener, router(tiles)).await
}

/// Binds `addr` (port 0 picks a free port) and serves in the background.
pub async fn spawn(tiles: Arc<TileSet>, addr: SocketAddr) -> std::io::Result<RunningCutout> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        if let Err(e) = serve(listener, tiles).await {
            tracing::error!("cutout server stopped: {e}");
        }
    });
    Ok(RunningCutout { url: format!("http://{addr}"), addr, handle })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params() {
        let p = |s: &[(&str, &str)]| s.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let (r, opt) =
            request_from_params(&p(&[("ra", "181.3"), ("dec", "-0.76"), ("scale", "900"), ("width", "256"), ("height", "128"), ("opt", "io")]))
                .unwrap();
        assert_eq!((r.width, r.height, r.invert, r.overlay, opt.as_str()), (256, 128, true, render::Overlay::Objects, "io"));
        let e = request_from_params(&p(&[("ra", "181.3"), ("dec", "-0.76"), ("scale", "900"), ("width", "256")])).unwrap_err();
        assert_eq!(e, CutoutError::invalid("height", "missing"));
        let e = request_from_params(&p(&[("ra", "1"), ("dec", "91"), ("scale", "1"), ("width", "1"), ("height", "1")])).unwrap_err();
        assert!(matches!(e, CutoutError::InvalidParam { ref name, .. } if name == "dec"));
        assert!(request_from_params(&p(&[("ra", "x"), ("dec", "0"), ("scale", "1"), ("width", "1"), ("height", "1")])).is_err());
    }
}
