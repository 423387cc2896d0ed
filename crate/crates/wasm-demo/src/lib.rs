//! Browser bindings. The plain functions hold the logic; the exported
//! wrappers only flatten their results into `Float64Array`-friendly vectors.

use tlblock::kernels::channel_kernel;
use tlblock::network::{magnitude_db, Network};
use tlblock::topology::{parse, CableLibrary};
use wasm_bindgen::prelude::*;

fn network(text: &str) -> Result<Network, String> {
    let doc = parse(text, &CableLibrary::builtin()).map_err(|e| e.to_string())?;
    Network::new(doc).map_err(|e| e.to_string())
}

/// `(frequency in Hz, |H| in dB)` over the synthesis grid.
pub fn magnitude_response(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let net = network(text)?;
    let grid = net.grid(net.initial_fft_len()).map_err(|e| e.to_string())?;
    let (h, _) = net.transfer_function(&grid).map_err(|e| e.to_string())?;
    Ok(h.values().iter().enumerate().map(|(k, v)| (grid.freq(k), magnitude_db(*v))).collect())
}

/// Real part of the sampled channel impulse response against time, with the
/// alignment delay at negative times.
pub fn impulse_response(text: &str, threshold: f64) -> Result<Vec<(f64, f64)>, String> {
    let net = network(text)?.with_threshold(threshold).map_err(|e| e.to_string())?;
    let (_, grid) = net.chain_kernels().map_err(|e| e.to_string())?;
    let (tp, _) = net.fd_chain(&grid).map_err(|e| e.to_string())?;
    let h = channel_kernel(&tp, &net.termination(), &net.cfg).map_err(|e| e.to_string())?;
    Ok(h.taps
        .iter()
        .enumerate()
        .map(|(l, v)| ((l as f64 - h.delay as f64) * h.ts, v.re))
        .collect())
}

pub fn canonical(text: &str) -> Result<String, String> {
    let doc = parse(text, &CableLibrary::builtin()).map_err(|e| e.to_string())?;
    doc.serialize().map_err(|e| e.to_string())
}

fn flatten(points: Vec<(f64, f64)>) -> Vec<f64> {
    points.into_iter().flat_map(|(x, y)| [x, y]).collect()
}

#[wasm_bindgen(js_name = magnitudeResponse)]
pub fn magnitude_response_js(text: &str) -> Result<Vec<f64>, String> {
    magnitude_response(text).map(flatten)
}

#[wasm_bindgen(js_name = impulseResponse)]
pub fn impulse_response_js(text: &str, threshold: f64) -> Result<Vec<f64>, String> {
    impulse_response(text, threshold).map(flatten)
}

#[wasm_bindgen(js_name = canonicalTopology)]
pub fn canonical_js(text: &str) -> Result<String, String> {
    canonical(text)
}
