//! Radial fisheye lens models and the fisheye <-> perspective coordinate maps.
//!
//! A lens is described by its forward projection `p(θ)`, mapping the incident
//! angle of a ray to its distance from the calibrated image center. Fisheye
//! pixel positions are carried over to a pinhole image with `r_p = f·tan(θ)`,
//! shifted there, and mapped back with `θ = atan(r_p / f)`, `r_f = p(θ)`.
//!
//! Rays beyond 90° give a negative `tan(θ)`. Those coordinates are tagged at
//! projection time and, in wide mode, are re-mapped on the way back: the
//! candidate shift is negated, the polar angle is rotated by π, and the radius
//! is mirrored about `p(π/2)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::{Error, Result};

/// Entries in the default inverse lookup table.
pub const DEFAULT_TABLE_SIZE: usize = 16384;

/// Grid size of the monotonicity probe run when a profile is accepted.
pub const MONOTONICITY_PROBES: usize = 4096;

/// Relative bound on `|a_0|` against `p(theta_max)`.
pub const CENTER_TOLERANCE: f64 = 1e-6;

/// Half-width of the band around π/2 where `tan` is not evaluated.
pub const TAN_GUARD: f64 = 1e-6;

/// Forward radial model `p(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialModel {
    /// `Σ a_i θ^i`, coefficients low order first, in pixels per radian^i.
    Polynomial(Vec<f64>),
    /// `2f·sin(θ/2)`.
    Equisolid,
}

/// A validated lens description: forward model, focal length, image center, FOV.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationProfile {
    model: RadialModel,
    focal_length: f64,
    center: (f64, f64),
    fov_deg: f64,
}

impl CalibrationProfile {
    /// Build a polynomial profile, checking every invariant.
    pub fn polynomial(
        coeffs: Vec<f64>,
        focal_length: f64,
        center: (f64, f64),
        fov_deg: f64,
    ) -> Result<Self> {
        Self::new(RadialModel::Polynomial(coeffs), focal_length, center, fov_deg)
    }

    pub fn equisolid(focal_length: f64, center: (f64, f64), fov_deg: f64) -> Result<Self> {
        Self::new(RadialModel::Equisolid, focal_length, center, fov_deg)
    }

    pub fn new(
        model: RadialModel,
        focal_length: f64,
        center: (f64, f64),
        fov_deg: f64,
    ) -> Result<Self> {
        let profile = CalibrationProfile {
            model,
            focal_length,
            center,
            fov_deg,
        };
        profile.validate()?;
        Ok(profile)
    }

    fn validate(&self) -> Result<()> {
        if !(self.focal_length.is_finite() && self.focal_length > 0.0) {
            return Err(Error::Profile(format!(
                "focal_length must be positive, got {}",
                self.focal_length
            )));
        }
        if !(self.center.0.is_finite() && self.center.1.is_finite()) {
            return Err(Error::Profile("center must be finite".into()));
        }
        let theta_max = self.theta_max();
        if !(theta_max > 0.0 && theta_max < PI) {
            return Err(Error::Profile(format!(
                "fov_deg must lie in (0, 360), got {}",
                self.fov_deg
            )));
        }
        if let RadialModel::Polynomial(coeffs) = &self.model {
            if coeffs.len() < 2 {
                return Err(Error::Profile(
                    "coeffs needs at least a constant and a linear term".into(),
                ));
            }
            if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
                return Err(Error::Profile(format!("coeffs[{i}] is not finite")));
            }
        }
        let mut prev = self.radius(0.0);
        for i in 1..MONOTONICITY_PROBES {
            let theta = theta_max * i as f64 / (MONOTONICITY_PROBES - 1) as f64;
            let r = self.radius(theta);
            // also rejects NaN
            if r.partial_cmp(&prev) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::Profile(format!(
                    "monotonicity violated: p({theta:.6}) = {r} does not exceed the previous probe {prev}"
                )));
            }
            prev = r;
        }
        let r0 = self.radius(0.0);
        let r_max = self.radius(theta_max);
        if r0.abs() > CENTER_TOLERANCE * r_max {
            return Err(Error::Profile(format!(
                "center radius violated: |a_0| = {} exceeds {CENTER_TOLERANCE}·p(theta_max) = {}",
                r0.abs(),
                CENTER_TOLERANCE * r_max
            )));
        }
        Ok(())
    }

    pub fn model(&self) -> &RadialModel {
        &self.model
    }

    pub fn is_equisolid(&self) -> bool {
        matches!(self.model, RadialModel::Equisolid)
    }

    /// Polynomial coefficients; empty for the equisolid model.
    pub fn coeffs(&self) -> &[f64] {
        match &self.model {
            RadialModel::Polynomial(c) => c,
            RadialModel::Equisolid => &[],
        }
    }

    pub fn focal_length(&self) -> f64 {
        self.focal_length
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn fov_deg(&self) -> f64 {
        self.fov_deg
    }

    /// Full field of view in radians.
    pub fn fov(&self) -> f64 {
        self.fov_deg.to_radians()
    }

    pub fn theta_max(&self) -> f64 {
        self.fov() / 2.0
    }

    /// True when the lens sees rays beyond 90°.
    pub fn is_ultra_wide(&self) -> bool {
        self.theta_max() > FRAC_PI_2
    }

    /// `p(θ)` with a domain check against `[0, theta_max]`.
    pub fn evaluate(&self, theta: f64) -> Result<f64> {
        let theta_max = self.theta_max();
        if !(0.0..=theta_max).contains(&theta) {
            return Err(Error::Domain(format!(
                "incident angle {theta} outside [0, {theta_max}]"
            )));
        }
        Ok(self.radius(theta))
    }

    /// `p(θ)` without a domain check. Polynomials extrapolate past `theta_max`.
    #[inline]
    pub fn radius(&self, theta: f64) -> f64 {
        match &self.model {
            RadialModel::Polynomial(coeffs) => {
                coeffs.iter().rev().fold(0.0, |acc, &a| acc * theta + a)
            }
            RadialModel::Equisolid => 2.0 * self.focal_length * (theta / 2.0).sin(),
        }
    }

    /// Radius of the valid image circle, `p(theta_max)`.
    pub fn valid_radius(&self) -> f64 {
        self.radius(self.theta_max())
    }

    /// Mirror pivot `r_{f,π} = p(π/2)`; `2f·sin(π/4)` for the equisolid model.
    pub fn right_angle_radius(&self) -> f64 {
        match self.model {
            RadialModel::Equisolid => 2.0 * self.focal_length * FRAC_PI_4.sin(),
            RadialModel::Polynomial(_) => self.radius(FRAC_PI_2),
        }
    }
}

/// Equisolid profile `r = 2f·sin(θ/2)`.
pub fn make_equisolid(focal_length: f64, center: (f64, f64), fov_deg: f64) -> Result<CalibrationProfile> {
    CalibrationProfile::equisolid(focal_length, center, fov_deg)
}

/// Uniform-θ lookup table realizing `p⁻¹`.
#[derive(Debug, Clone)]
pub struct InverseTable {
    step: f64,
    theta_max: f64,
    radii: Vec<f64>,
}

impl InverseTable {
    pub fn new(profile: &CalibrationProfile, entries: usize) -> Self {
        assert!(entries >= 2, "inverse table needs at least two entries");
        let theta_max = profile.theta_max();
        let step = theta_max / (entries - 1) as f64;
        let radii = (0..entries)
            .map(|i| profile.radius(Self::grid_theta(i, entries, theta_max)))
            .collect();
        InverseTable {
            step,
            theta_max,
            radii,
        }
    }

    #[inline]
    fn grid_theta(i: usize, entries: usize, theta_max: f64) -> f64 {
        if i + 1 == entries {
            theta_max
        } else {
            theta_max * i as f64 / (entries - 1) as f64
        }
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn theta(&self, i: usize) -> f64 {
        Self::grid_theta(i, self.radii.len(), self.theta_max)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Angular spacing of the grid.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// θ for a fisheye radius, by binary search and linear interpolation.
    pub fn invert(&self, r_f: f64) -> Result<f64> {
        let first = self.radii[0];
        let last = *self.radii.last().unwrap();
        if !(r_f >= first.min(0.0) && r_f <= last) {
            return Err(Error::Domain(format!(
                "fisheye radius {r_f} outside [0, {last}]"
            )));
        }
        if r_f <= first {
            return Ok(0.0);
        }
        let hi = self.radii.partition_point(|&r| r <= r_f);
        if hi >= self.radii.len() {
            return Ok(self.theta_max);
        }
        let lo = hi - 1;
        let (r_lo, r_hi) = (self.radii[lo], self.radii[hi]);
        let t = (r_f - r_lo) / (r_hi - r_lo);
        let (t_lo, t_hi) = (self.theta(lo), self.theta(hi));
        Ok(t_lo + t * (t_hi - t_lo))
    }
}

/// Polar coordinates with the angle normalized to (−π, π].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub phi: f64,
}

impl PolarPoint {
    pub fn new(r: f64, phi: f64) -> Self {
        PolarPoint {
            r,
            phi: normalize_angle(phi),
        }
    }

    pub fn from_cartesian(x: f64, y: f64) -> Self {
        PolarPoint {
            r: x.hypot(y),
            phi: normalize_angle(y.atan2(x)),
        }
    }

    pub fn to_cartesian(self) -> (f64, f64) {
        let (s, c) = self.phi.sin_cos();
        (self.r * c, self.r * s)
    }

    /// Angle rotated by −π, renormalized.
    pub fn rotated_half_turn(self) -> Self {
        PolarPoint::new(self.r, self.phi - PI)
    }
}

/// Wrap an angle into (−π, π].
pub fn normalize_angle(phi: f64) -> f64 {
    let mut a = phi % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Mirror a back-projected radius about the 90° radius: `r + 2(r_π − r)`.
#[inline]
pub fn mirror_radius(r_fm: f64, r_f_pi: f64) -> f64 {
    2.0 * r_f_pi - r_fm
}

/// Perspective coordinates of a block, relative to the image center.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProjectedBlock {
    pub perspective_coords: Vec<(f64, f64)>,
    /// `true` where `r_p < 0`, i.e. the source ray lies beyond 90°.
    pub wide_flags: Vec<bool>,
}

impl ProjectedBlock {
    pub fn len(&self) -> usize {
        self.perspective_coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perspective_coords.is_empty()
    }

    pub fn any_wide(&self) -> bool {
        self.wide_flags.iter().any(|&f| f)
    }
}

#[derive(Debug, Clone)]
enum Inverse {
    ClosedForm,
    Table(InverseTable),
}

/// A profile together with its inverse, ready for coordinate mapping.
///
/// Immutable once built and cheap to share between worker threads.
#[derive(Debug, Clone)]
pub struct LensModel {
    profile: CalibrationProfile,
    inverse: Inverse,
    valid_radius: f64,
    right_angle_radius: f64,
}

impl LensModel {
    /// Equisolid profiles invert in closed form, polynomials through a
    /// [`DEFAULT_TABLE_SIZE`]-entry table.
    pub fn new(profile: CalibrationProfile) -> Self {
        let inverse = match profile.model {
            RadialModel::Equisolid => Inverse::ClosedForm,
            RadialModel::Polynomial(_) => {
                Inverse::Table(InverseTable::new(&profile, DEFAULT_TABLE_SIZE))
            }
        };
        Self::with_inverse(profile, inverse)
    }

    /// Force a lookup table, whatever the model.
    pub fn with_table(profile: CalibrationProfile, entries: usize) -> Self {
        let table = InverseTable::new(&profile, entries);
        Self::with_inverse(profile, Inverse::Table(table))
    }

    fn with_inverse(profile: CalibrationProfile, inverse: Inverse) -> Self {
        let valid_radius = profile.valid_radius();
        let right_angle_radius = profile.right_angle_radius();
        LensModel {
            profile,
            inverse,
            valid_radius,
            right_angle_radius,
        }
    }

    pub fn profile(&self) -> &CalibrationProfile {
        &self.profile
    }

    pub fn table(&self) -> Option<&InverseTable> {
        match &self.inverse {
            Inverse::Table(t) => Some(t),
            Inverse::ClosedForm => None,
        }
    }

    pub fn valid_radius(&self) -> f64 {
        self.valid_radius
    }

    pub fn right_angle_radius(&self) -> f64 {
        self.right_angle_radius
    }

    /// True when `(x, y)` lies inside the valid image circle.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (cx, cy) = self.profile.center;
        (x - cx).hypot(y - cy) <= self.valid_radius
    }

    /// `θ = p⁻¹(r_f)`, for `r_f` in `[0, p(theta_max)]`.
    pub fn invert_radius(&self, r_f: f64) -> Result<f64> {
        match &self.inverse {
            Inverse::Table(t) => t.invert(r_f),
            Inverse::ClosedForm => {
                if !(0.0..=self.valid_radius).contains(&r_f) {
                    return Err(Error::Domain(format!(
                        "fisheye radius {r_f} outside [0, {}]",
                        self.valid_radius
                    )));
                }
                let s = (r_f / (2.0 * self.profile.focal_length)).min(1.0);
                Ok((2.0 * s.asin()).min(self.profile.theta_max()))
            }
        }
    }

    /// Incident angle of a fisheye pixel. Errors outside the valid circle.
    pub fn incident_angle(&self, x: f64, y: f64) -> Result<f64> {
        let (cx, cy) = self.profile.center;
        let r_f = (x - cx).hypot(y - cy);
        if r_f > self.valid_radius {
            return Err(Error::Domain(format!(
                "pixel ({x}, {y}) lies outside the image circle of radius {}",
                self.valid_radius
            )));
        }
        self.invert_radius(r_f)
    }

    /// Map one fisheye pixel to signed perspective coordinates.
    ///
    /// Returns the Cartesian perspective point relative to the center and
    /// whether `r_p` came out negative.
    pub fn to_perspective(&self, x: f64, y: f64) -> Result<((f64, f64), bool)> {
        let (cx, cy) = self.profile.center;
        let polar = PolarPoint::from_cartesian(x - cx, y - cy);
        if polar.r > self.valid_radius {
            return Err(Error::Domain(format!(
                "pixel ({x}, {y}) lies outside the image circle of radius {}",
                self.valid_radius
            )));
        }
        let mut theta = self.invert_radius(polar.r)?;
        if (theta - FRAC_PI_2).abs() < TAN_GUARD {
            theta = if theta < FRAC_PI_2 {
                FRAC_PI_2 - TAN_GUARD
            } else {
                FRAC_PI_2 + TAN_GUARD
            };
        }
        let r_p = self.profile.focal_length * theta.tan();
        let point = PolarPoint { r: r_p, ..polar }.to_cartesian();
        Ok((point, r_p < 0.0))
    }

    /// Project fisheye pixel positions to the perspective domain.
    pub fn fisheye_to_perspective(&self, coords: &[(f64, f64)]) -> Result<ProjectedBlock> {
        let mut block = ProjectedBlock {
            perspective_coords: Vec::with_capacity(coords.len()),
            wide_flags: Vec::with_capacity(coords.len()),
        };
        for &(x, y) in coords {
            let (p, wide) = self.to_perspective(x, y)?;
            block.perspective_coords.push(p);
            block.wide_flags.push(wide);
        }
        Ok(block)
    }

    /// Shift one perspective point by `(dx, dy)` and map it back to fisheye
    /// image coordinates.
    ///
    /// With `wide_mode`, flagged points get the negated shift, the half-turn
    /// angle and the mirrored radius. Without it they are shifted like any
    /// other point, which lands them on the wrong side of the image.
    #[inline]
    pub fn back_project(&self, xp: f64, yp: f64, wide: bool, dx: f64, dy: f64, wide_mode: bool) -> (f64, f64) {
        let remap = wide && wide_mode;
        let (sx, sy) = if remap { (xp - dx, yp - dy) } else { (xp + dx, yp + dy) };
        let (cx, cy) = self.profile.center;
        let f = self.profile.focal_length;
        let rho2 = sx * sx + sy * sy;
        if rho2 == 0.0 {
            let r = self.profile.radius(0.0);
            let r = if remap { -mirror_radius(r, self.right_angle_radius) } else { r };
            return (cx + r, cy);
        }
        let rho = rho2.sqrt();
        // gain = r_fm / rho, so the shifted vector itself carries the polar
        // angle and the half-turn is a sign flip
        let gain = match self.profile.model {
            // 2f·sin(atan(x)/2) / (f·x) = sqrt(2 / (s·(s + 1))), s = sqrt(1 + x²)
            RadialModel::Equisolid => {
                let s = (1.0 + rho2 / (f * f)).sqrt();
                (2.0 / (s * (s + 1.0))).sqrt()
            }
            RadialModel::Polynomial(_) => self.profile.radius((rho / f).atan()) / rho,
        };
        if remap {
            let k = mirror_radius(gain * rho, self.right_angle_radius) / rho;
            (cx - k * sx, cy - k * sy)
        } else {
            (cx + gain * sx, cy + gain * sy)
        }
    }

    /// Shift a projected block by the candidate `m` and return fisheye image
    /// coordinates (absolute, center added back).
    pub fn perspective_to_fisheye(
        &self,
        block: &ProjectedBlock,
        m: (f64, f64),
        wide_mode: bool,
    ) -> Vec<(f64, f64)> {
        block
            .perspective_coords
            .iter()
            .zip(&block.wide_flags)
            .map(|(&(xp, yp), &wide)| self.back_project(xp, yp, wide, m.0, m.1, wide_mode))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linear(f: f64, fov_deg: f64) -> CalibrationProfile {
        CalibrationProfile::polynomial(vec![0.0, 2.0 * f / PI], f, (0.0, 0.0), fov_deg).unwrap()
    }

    #[test]
    fn equisolid_right_angle_radius() {
        let p = make_equisolid(376.18, (0.0, 0.0), 185.0).unwrap();
        let r = p.evaluate(FRAC_PI_2).unwrap();
        assert!((r - 531.99).abs() < 0.01, "{r}");
        assert_eq!(r, p.right_angle_radius());
    }

    #[test]
    fn equisolid_unit_focal() {
        let p = make_equisolid(1.0, (0.0, 0.0), 359.0).unwrap();
        assert_eq!(p.evaluate(0.0).unwrap(), 0.0);
        // θ = π itself is outside the accepted domain, so use the closed form
        assert!((p.radius(PI) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn horner_evaluation() {
        let p = CalibrationProfile::polynomial(vec![0.0, 300.0], 100.0, (0.0, 0.0), 180.0).unwrap();
        assert_eq!(p.evaluate(0.0).unwrap(), 0.0);
        let p = CalibrationProfile::polynomial(vec![0.0, 300.0, -20.0], 100.0, (0.0, 0.0), 180.0)
            .unwrap();
        assert_eq!(p.evaluate(0.5).unwrap(), 145.0);
    }

    #[test]
    fn evaluate_rejects_out_of_domain() {
        let p = linear(100.0, 180.0);
        assert!(matches!(p.evaluate(-0.1), Err(Error::Domain(_))));
        assert!(matches!(p.evaluate(FRAC_PI_2 + 0.01), Err(Error::Domain(_))));
    }

    #[test]
    fn profile_invariants() {
        let dec = CalibrationProfile::polynomial(vec![0.0, -300.0], 100.0, (0.0, 0.0), 180.0);
        assert!(matches!(dec, Err(Error::Profile(m)) if m.contains("monotonicity")));
        let off = CalibrationProfile::polynomial(vec![1.0, 300.0], 100.0, (0.0, 0.0), 180.0);
        assert!(matches!(off, Err(Error::Profile(m)) if m.contains("center")));
        let f0 = CalibrationProfile::equisolid(0.0, (0.0, 0.0), 180.0);
        assert!(matches!(f0, Err(Error::Profile(m)) if m.contains("focal_length")));
        let fov = CalibrationProfile::equisolid(100.0, (0.0, 0.0), 360.0);
        assert!(matches!(fov, Err(Error::Profile(m)) if m.contains("fov_deg")));
        // turning point inside the domain
        let bend = CalibrationProfile::polynomial(vec![0.0, 300.0, -200.0], 100.0, (0.0, 0.0), 180.0);
        assert!(bend.is_err());
    }

    #[test]
    fn table_inverts_linear_exactly() {
        let p = CalibrationProfile::polynomial(vec![0.0, 300.0], 100.0, (0.0, 0.0), 180.0).unwrap();
        let lens = LensModel::new(p);
        assert!((lens.invert_radius(150.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(lens.invert_radius(0.0).unwrap(), 0.0);
        assert!(lens.invert_radius(-1.0).is_err());
        assert!(lens.invert_radius(lens.valid_radius() + 1e-9).is_err());
    }

    #[test]
    fn equisolid_table_matches_closed_form() {
        let p = make_equisolid(376.18, (0.0, 0.0), 185.0).unwrap();
        let lens = LensModel::with_table(p.clone(), DEFAULT_TABLE_SIZE);
        let r = p.radius(FRAC_PI_2);
        let theta = lens.invert_radius(r).unwrap();
        let oracle = 2.0 * (r / (2.0 * 376.18)).asin();
        assert!((theta - FRAC_PI_2).abs() < 1e-4);
        assert!((theta - oracle).abs() < 1e-9);
    }

    #[test]
    fn round_trip_bound_on_grid() {
        let p = CalibrationProfile::polynomial(vec![0.0, 300.0, -20.0, 5.0, -1.0], 190.0, (0.0, 0.0), 185.0)
            .unwrap();
        let table = InverseTable::new(&p, 1024);
        let bound = 2.0 * p.theta_max() / 1024.0;
        for i in 0..table.len() {
            let t = table.theta(i);
            let back = table.invert(p.radius(t)).unwrap();
            assert!((back - t).abs() <= bound);
        }
        for w in table.radii().windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn center_pixel_maps_to_origin() {
        let lens = LensModel::new(make_equisolid(200.0, (50.0, 40.0), 185.0).unwrap());
        let ((x, y), wide) = lens.to_perspective(50.0, 40.0).unwrap();
        assert_eq!((x, y), (0.0, 0.0));
        assert!(!wide);
    }

    #[test]
    fn linear_profile_perspective_radius() {
        let lens = LensModel::new(linear(100.0, 200.0));
        let ((x, y), wide) = lens.to_perspective(50.0, 0.0).unwrap();
        assert!((x - 100.0).abs() < 1e-9 && y.abs() < 1e-12);
        assert!(!wide);

        let r_f = 0.55 * PI * 200.0 / PI;
        assert!((r_f - 110.0f64).abs() < 1e-12);
        let ((x, y), wide) = lens.to_perspective(r_f, 0.0).unwrap();
        let oracle = 100.0 * (0.55 * PI).tan();
        assert!((oracle + 631.375).abs() < 1e-3, "{oracle}");
        assert!((x - oracle).abs() < 1e-6, "{x} vs {oracle}");
        assert!(y.abs() < 1e-9);
        assert!(wide);
    }

    #[test]
    fn outside_circle_is_a_domain_error() {
        let lens = LensModel::new(make_equisolid(100.0, (0.0, 0.0), 180.0).unwrap());
        let r = lens.valid_radius();
        assert!(matches!(lens.to_perspective(r + 0.5, 0.0), Err(Error::Domain(_))));
        assert!(lens.fisheye_to_perspective(&[(0.0, 0.0), (0.0, r * 1.01)]).is_err());
    }

    #[test]
    fn right_angle_ray_is_nudged_to_its_side() {
        let lens = LensModel::new(linear(100.0, 200.0));
        let r90 = lens.right_angle_radius();
        let ((x, _), wide) = lens.to_perspective(r90, 0.0).unwrap();
        assert!(x.is_finite());
        // p⁻¹(p(π/2)) through the table may fall on either side of π/2;
        // exactly π/2 goes to the wide side
        let theta = lens.invert_radius(r90).unwrap();
        assert_eq!(wide, theta >= FRAC_PI_2);
        assert!(x.abs() > 1e7);
    }

    #[test]
    fn mirror_arithmetic() {
        assert_eq!(mirror_radius(500.0, 516.0), 532.0);
    }

    #[test]
    fn zero_shift_identity_below_right_angle() {
        let lens = LensModel::new(make_equisolid(180.0, (255.5, 254.0), 185.0).unwrap());
        let coords: Vec<_> = (0..40).map(|i| (100.0 + i as f64 * 3.7, 90.0 + i as f64 * 2.1)).collect();
        let block = lens.fisheye_to_perspective(&coords).unwrap();
        assert!(!block.any_wide());
        let back = lens.perspective_to_fisheye(&block, (0.0, 0.0), true);
        for (a, b) in coords.iter().zip(&back) {
            assert!((a.0 - b.0).abs() < 1e-3 && (a.1 - b.1).abs() < 1e-3);
        }
    }

    #[test]
    fn linear_wide_round_trip_is_identity() {
        let lens = LensModel::new(linear(100.0, 200.0));
        let r_f = 110.0;
        let pts = [(r_f, 0.0), (0.0, -r_f), (r_f * 0.6, r_f * 0.8)];
        let block = lens.fisheye_to_perspective(&pts).unwrap();
        assert!(block.wide_flags.iter().all(|&f| f));
        let back = lens.perspective_to_fisheye(&block, (0.0, 0.0), true);
        for (a, b) in pts.iter().zip(&back) {
            assert!((a.0 - b.0).abs() < 1e-3 && (a.1 - b.1).abs() < 1e-3, "{a:?} {b:?}");
        }
        // without the re-mapping the point lands across the center
        let naive = lens.perspective_to_fisheye(&block, (0.0, 0.0), false);
        assert!(naive[0].0 < 0.0);
    }

    #[test]
    fn polar_half_turn_stays_normalized() {
        let p = PolarPoint::new(2.0, -3.0).rotated_half_turn();
        assert!(p.phi > -PI && p.phi <= PI);
        assert!((p.phi - (-3.0 - PI + 2.0 * PI)).abs() < 1e-12);
        assert_eq!(normalize_angle(-PI), PI);
        assert_eq!(normalize_angle(PI), PI);
    }

    proptest! {
        #[test]
        fn flag_matches_incident_angle(r in 0.0f64..1.0, phi in -3.1f64..3.1) {
            let lens = LensModel::new(make_equisolid(150.0, (10.0, -4.0), 190.0).unwrap());
            let r_f = r * lens.valid_radius();
            let (x, y) = (10.0 + r_f * phi.cos(), -4.0 + r_f * phi.sin());
            prop_assume!(lens.contains(x, y));
            let theta = lens.incident_angle(x, y).unwrap();
            prop_assume!((theta - FRAC_PI_2).abs() > 1e-5);
            let (_, wide) = lens.to_perspective(x, y).unwrap();
            prop_assert_eq!(wide, theta > FRAC_PI_2);
        }

        #[test]
        fn polynomial_round_trip(a2 in -20.0f64..0.0, a3 in -3.0f64..3.0, frac in 0.0f64..1.0, phi in -3.1f64..3.1) {
            let prof = CalibrationProfile::polynomial(vec![0.0, 180.0, a2, a3], 180.0, (300.0, 290.0), 185.0);
            prop_assume!(prof.is_ok());
            let lens = LensModel::new(prof.unwrap());
            let theta = frac * (FRAC_PI_2 - 0.01);
            let r_f = lens.profile().radius(theta);
            let pt = (300.0 + r_f * phi.cos(), 290.0 + r_f * phi.sin());
            let block = lens.fisheye_to_perspective(&[pt]).unwrap();
            let back = lens.perspective_to_fisheye(&block, (0.0, 0.0), true)[0];
            prop_assert!((back.0 - pt.0).abs() < 1e-3 && (back.1 - pt.1).abs() < 1e-3);
        }
    }
}
