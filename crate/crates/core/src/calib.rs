//! Fitting the radial polynomial from (θ, r) samples, and profile files.
//!
//! Profile JSON:
//!
//! ```json
//! {
//!   "kind": "polynomial",
//!   "coeffs": [0.0, 176.0, 0.3, -7.8, 0.36],
//!   "focal_length": 176.0,
//!   "center": [255.5, 255.5],
//!   "fov_deg": 185.0
//! }
//! ```
//!
//! `coeffs` is low order first and is omitted for `"kind": "equisolid"`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::Value;

use crate::projection::{CalibrationProfile, RadialModel};
use crate::{Error, Result};

/// One (incident angle, image radius) correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibSample {
    pub theta: f64,
    pub radius: f64,
}

impl CalibSample {
    pub fn new(theta: f64, radius: f64) -> Result<Self> {
        if !(0.0..std::f64::consts::PI).contains(&theta) {
            return Err(Error::Fit(format!("sample angle {theta} outside [0, π)")));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Fit(format!("sample radius {radius} must be non-negative")));
        }
        Ok(CalibSample { theta, radius })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// `a_0 .. a_n`.
    pub coeffs: Vec<f64>,
    /// Root-mean-square radius residual, pixels.
    pub rms_residual: f64,
}

/// Least-squares fit of a degree-`degree` polynomial, constant term free.
pub fn fit_polynomial(samples: &[CalibSample], degree: usize) -> Result<PolyFit> {
    fit(samples, degree, false)
}

/// Same fit with `a_0` pinned to zero, so the center maps to the center.
pub fn fit_polynomial_through_origin(samples: &[CalibSample], degree: usize) -> Result<PolyFit> {
    if degree == 0 {
        return Err(Error::Fit("a fit through the origin needs degree ≥ 1".into()));
    }
    fit(samples, degree, true)
}

fn fit(samples: &[CalibSample], degree: usize, through_origin: bool) -> Result<PolyFit> {
    let first = usize::from(through_origin);
    let unknowns = degree + 1 - first;
    let mut thetas: Vec<f64> = samples.iter().map(|s| s.theta).collect();
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    if thetas.len() < unknowns {
        return Err(Error::Fit(format!(
            "degree {degree} needs {unknowns} distinct angles, got {} ({} samples)",
            thetas.len(),
            samples.len()
        )));
    }
    // scale angles to [0, 1] to keep the Vandermonde columns comparable
    let scale = thetas.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(samples.len(), unknowns, |i, j| {
        (samples[i].theta / scale).powi((j + first) as i32)
    });
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.radius));

    let qr = a.qr();
    let r = qr.r();
    let diag_max = (0..unknowns).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if let Some(i) = (0..unknowns).find(|&i| r[(i, i)].abs() <= 1e-12 * diag_max) {
        return Err(Error::Fit(format!(
            "rank-deficient design matrix: column θ^{} is dependent on the others",
            i + first
        )));
    }
    let qtb = qr.q().transpose() * &b;
    let x = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Fit("singular triangular factor".into()))?;

    let mut coeffs = vec![0.0; degree + 1];
    for (j, c) in x.iter().enumerate() {
        coeffs[j + first] = c / scale.powi((j + first) as i32);
    }
    let rms_residual = rms(&coeffs, samples);
    Ok(PolyFit {
        coeffs,
        rms_residual,
    })
}

/// RMS of `p(θ_i) − r_i` for low-order-first `coeffs`.
pub fn rms(coeffs: &[f64], samples: &[CalibSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sq: f64 = samples
        .iter()
        .map(|s| {
            let p = coeffs.iter().rev().fold(0.0, |acc, &a| acc * s.theta + a);
            (p - s.radius).powi(2)
        })
        .sum();
    (sq / samples.len() as f64).sqrt()
}

/// Read a `theta_rad,radius_px` CSV.
pub fn read_samples_csv(path: &Path) -> Result<Vec<CalibSample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_samples_csv(&text).map_err(|m| Error::format(path, m))
}

pub fn parse_samples_csv(text: &str) -> std::result::Result<Vec<CalibSample>, String> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    if headers.len() != 2 || &headers[0] != "theta_rad" || &headers[1] != "radius_px" {
        return Err("header must be `theta_rad,radius_px`".into());
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = i + 2;
        let parse = |k: usize, name: &str| -> std::result::Result<f64, String> {
            rec.get(k)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| format!("line {line}: bad {name}"))
        };
        let s = CalibSample::new(parse(0, "theta_rad")?, parse(1, "radius_px")?)
            .map_err(|e| format!("line {line}: {e}"))?;
        out.push(s);
    }
    Ok(out)
}

pub fn samples_to_csv(samples: &[CalibSample]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["theta_rad", "radius_px"]).expect("in-memory write");
    for s in samples {
        w.write_record([s.theta.to_string(), s.radius.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[derive(Serialize)]
struct ProfileFile<'a> {
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    coeffs: Option<&'a [f64]>,
    focal_length: f64,
    center: [f64; 2],
    fov_deg: f64,
}

/// Canonical JSON for a profile. Loading and re-saving it yields the same bytes.
pub fn profile_to_json(profile: &CalibrationProfile) -> String {
    let file = ProfileFile {
        kind: if profile.is_equisolid() { "equisolid" } else { "polynomial" },
        coeffs: (!profile.is_equisolid()).then(|| profile.coeffs()),
        focal_length: profile.focal_length(),
        center: [profile.center().0, profile.center().1],
        fov_deg: profile.fov_deg(),
    };
    serde_json::to_string_pretty(&file).expect("profile serializes") + "\n"
}

fn number(obj: &serde_json::Map<String, Value>, field: &str) -> Result<f64> {
    match obj.get(field) {
        None => Err(Error::Profile(format!("field `{field}` is missing"))),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::Profile(format!("field `{field}` must be a number"))),
    }
}

/// Parse and validate profile JSON. Errors name the offending field or invariant.
pub fn parse_profile(text: &str) -> Result<CalibrationProfile> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::Profile(format!("not valid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Profile("top level must be an object".into()))?;
    let kind = obj
        .get("kind")
        .ok_or_else(|| Error::Profile("field `kind` is missing".into()))?
        .as_str()
        .ok_or_else(|| Error::Profile("field `kind` must be a string".into()))?;
    let model = match kind {
        "equisolid" => RadialModel::Equisolid,
        "polynomial" => {
            let arr = obj
                .get("coeffs")
                .ok_or_else(|| Error::Profile("field `coeffs` is missing".into()))?
                .as_array()
                .ok_or_else(|| Error::Profile("field `coeffs` must be an array".into()))?;
            let coeffs = arr
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v.as_f64()
                        .ok_or_else(|| Error::Profile(format!("field `coeffs[{i}]` must be a number")))
                })
                .collect::<Result<Vec<_>>>()?;
            RadialModel::Polynomial(coeffs)
        }
        other => {
            return Err(Error::Profile(format!(
                "field `kind` must be \"polynomial\" or \"equisolid\", got \"{other}\""
            )))
        }
    };
    let focal_length = number(obj, "focal_length")?;
    let center = match obj.get("center") {
        None => return Err(Error::Profile("field `center` is missing".into())),
        Some(Value::Array(a)) if a.len() == 2 => {
            let c = |i: usize| {
                a[i].as_f64()
                    .ok_or_else(|| Error::Profile(format!("field `center[{i}]` must be a number")))
            };
            (c(0)?, c(1)?)
        }
        Some(_) => return Err(Error::Profile("field `center` must be [c_x, c_y]".into())),
    };
    let fov_deg = number(obj, "fov_deg")?;
    CalibrationProfile::new(model, focal_length, center, fov_deg)
}

pub fn load_profile(path: &Path) -> Result<CalibrationProfile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_profile(&text).map_err(|e| match e {
        Error::Profile(m) => Error::Profile(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_profile(path: &Path, profile: &CalibrationProfile) -> Result<()> {
    fs::write(path, profile_to_json(profile)).map_err(|e| Error::io(path, e))
}
