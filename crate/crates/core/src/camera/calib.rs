use std::collections::BTreeMap;
use std::path::Path;

use super::{CameraError, PalCamera, RadialLaw};

/// Parses `key = value` lines. Keys: width, height, cx, cy, theta_min_deg,
/// theta_max_deg and either `k` (ideal F-Theta) or `poly` (comma or
/// whitespace separated odd-polynomial coefficients a0 a1 …). `#` starts a
/// comment.
pub fn parse_calibration(text: &str) -> Result<PalCamera, CameraError> {
    const KEYS: [&str; 8] = ["width", "height", "cx", "cy", "k", "poly", "theta_min_deg", "theta_max_deg"];
    let err = |m: String| CameraError::Calibration(m);
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(err(format!("line {}: unknown key '{key}'", lineno + 1)));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(err(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    let get = |k: &str| map.get(k).ok_or_else(|| err(format!("missing key '{k}'")));
    let num = |k: &str| -> Result<f64, CameraError> {
        get(k)?
            .parse::<f64>()
            .map_err(|e| err(format!("key '{k}': {e}")))
    };
    let int = |k: &str| -> Result<u32, CameraError> {
        get(k)?
            .parse::<u32>()
            .map_err(|e| err(format!("key '{k}': {e}")))
    };
    let law = match (map.contains_key("k"), map.contains_key("poly")) {
        (true, false) => RadialLaw::FTheta { k: num("k")? },
        (false, true) => {
            let coeffs = get("poly")?
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|e| err(format!("key 'poly': {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            RadialLaw::OddPolynomial { coeffs }
        }
        _ => return Err(err("exactly one of 'k' or 'poly' is required".into())),
    };
    PalCamera::new(
        int("width")?,
        int("height")?,
        num("cx")?,
        num("cy")?,
        law,
        num("theta_min_deg")?.to_radians(),
        num("theta_max_deg")?.to_radians(),
    )
}

pub fn load_calibration(path: &Path) -> Result<PalCamera, CameraError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CameraError::Calibration(format!("{}: {e}", path.display())))?;
    parse_calibration(&text)
}
