//! Browser bindings: plan a level map for a synthetic scene, plot the
//! distortion curve, and push the quantized scene through a noisy channel.

pub mod scene;

use wasm_bindgen::prelude::*;

pub use scene::{distortion_curve, plan, transmit_scene, Plan, SceneParams, SIDE};

#[wasm_bindgen(js_name = SceneParams)]
pub struct JsSceneParams(SceneParams);

#[wasm_bindgen(js_class = SceneParams)]
impl JsSceneParams {
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(rho: f64, gamma: f64, mu: f64, solver: &str, cx: f64, cy: f64, spread: f64, seed: u64) -> Result<JsSceneParams, JsError> {
        Ok(Self(SceneParams {
            rho,
            gamma,
            mu,
            solver: solver.parse()?,
            center: (cx, cy),
            spread,
            seed,
        }))
    }
}

#[wasm_bindgen(js_name = Plan)]
pub struct JsPlan(Plan);

#[wasm_bindgen(js_class = Plan)]
impl JsPlan {
    /// Per-patch bit depths, row-major on the 14×14 grid.
    #[wasm_bindgen(getter)]
    pub fn bits(&self) -> Vec<u8> {
        self.0.bits.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn rho(&self) -> f64 {
        self.0.rho
    }

    #[wasm_bindgen(getter)]
    pub fn objective(&self) -> f64 {
        self.0.objective
    }

    #[wasm_bindgen(getter, js_name = payloadBits)]
    pub fn payload_bits(&self) -> f64 {
        self.0.payload_bits as f64
    }
}

#[wasm_bindgen(js_name = planLevels)]
pub fn plan_levels(params: &JsSceneParams) -> Result<JsPlan, JsError> {
    Ok(JsPlan(plan(&params.0)?))
}

/// D(2^M; μ)/D0 for M = 0..=8.
#[wasm_bindgen(js_name = distortionCurve)]
pub fn distortion_curve_js(mu: f64) -> Result<Vec<f64>, JsError> {
    Ok(distortion_curve(mu)?)
}

/// RGBA pixels of the scene before and after the channel, concatenated.
#[wasm_bindgen(js_name = transmitScene)]
pub fn transmit_scene_js(params: &JsSceneParams) -> Result<Vec<u8>, JsError> {
    let (original, received) = transmit_scene(&params.0)?;
    Ok([original, received].concat())
}
