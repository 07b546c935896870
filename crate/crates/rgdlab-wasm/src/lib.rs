//! Browser bindings for the gradient-descent laboratory demo page.
//!
//! Three interactive operations, each taking and returning JSON strings so
//! the page needs no generated TypeScript:
//!
//! - `run_plane`: descent on the interpolated plane cost from a chosen start
//!   point, plus the determinant curve of the iteration-map differential at
//!   that point.
//! - `run_sphere`: descent for the Rayleigh quotient on S^2 with limit
//!   classification.
//! - `bounds_curve`: guaranteed step-size intervals across a curvature sweep.
//!
//! The JSON plumbing lives in [`demo`] and is exercised by host-side tests;
//! the `#[wasm_bindgen]` wrappers only convert errors to JS exceptions.

pub mod demo;

use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub fn run_plane(config: &str) -> Result<String, JsValue> {
    demo::run_plane(config).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn run_sphere(config: &str) -> Result<String, JsValue> {
    demo::run_sphere(config).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn bounds_curve(config: &str) -> Result<String, JsValue> {
    demo::bounds_curve(config).map_err(|e| JsValue::from_str(&e))
}
