//! Synthetic absorbers, scan geometry, and the admissibility check that
//! decides which reconstruction formulas apply to a configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::stage1::Stage1Method;

/// Radial profile of an absorber.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Constant amplitude inside the ball, zero outside.
    UniformBall,
    /// `(1 - (rho/radius)^2)^2` inside the ball; continuously differentiable.
    SmoothBump,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::UniformBall => write!(f, "uniform"),
            Profile::SmoothBump => write!(f, "smooth"),
        }
    }
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Profile::UniformBall),
            "smooth" => Ok(Profile::SmoothBump),
            other => Err(Error::Config(format!("unknown profile '{other}'"))),
        }
    }
}

/// One radially symmetric absorber.
#[derive(Debug, Clone, Copy)]
pub struct Absorber {
    pub center: [f64; 3],
    pub radius: f64,
    pub amplitude: f64,
    pub profile: Profile,
}

impl Absorber {
    /// Radial profile value at distance `rho` from the center.
    pub fn value(&self, rho: f64) -> f64 {
        if rho >= self.radius {
            return 0.0;
        }
        match self.profile {
            Profile::UniformBall => self.amplitude,
            Profile::SmoothBump => {
                let u = rho / self.radius;
                let w = 1.0 - u * u;
                self.amplitude * w * w
            }
        }
    }

    /// Derivative of the radial profile; only meaningful for `SmoothBump`.
    pub(crate) fn value_derivative(&self, rho: f64) -> f64 {
        if rho >= self.radius {
            return 0.0;
        }
        match self.profile {
            Profile::UniformBall => 0.0,
            Profile::SmoothBump => {
                let a2 = self.radius * self.radius;
                let w = 1.0 - rho * rho / a2;
                self.amplitude * 2.0 * w * (-2.0 * rho / a2)
            }
        }
    }

    /// Distance of the support ball from the vertical axis through the origin.
    fn axis_distance(&self) -> f64 {
        (self.center[0] * self.center[0] + self.center[1] * self.center[1]).sqrt()
    }
}

/// Superposition of absorbers defining the initial pressure.
#[derive(Debug, Clone, Default)]
pub struct Phantom {
    pub absorbers: Vec<Absorber>,
}

impl Phantom {
    pub fn new(absorbers: Vec<Absorber>) -> Self {
        Phantom { absorbers }
    }

    /// Initial pressure at a point.
    pub fn value_at(&self, x: [f64; 3]) -> f64 {
        self.absorbers
            .iter()
            .map(|a| {
                let dx = x[0] - a.center[0];
                let dy = x[1] - a.center[1];
                let dz = x[2] - a.center[2];
                a.value((dx * dx + dy * dy + dz * dz).sqrt())
            })
            .sum()
    }

    /// Parse the flat text format: one absorber per line,
    /// `cx cy cz radius amplitude profile`. Blank lines and `#` comments
    /// are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut absorbers = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(Error::Config(format!(
                    "phantom line {}: expected 6 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i]
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("phantom line {}: {e}", lineno + 1)))
            };
            let radius = num(3)?;
            if !(radius > 0.0) {
                return Err(Error::Config(format!(
                    "phantom line {}: radius must be > 0",
                    lineno + 1
                )));
            }
            absorbers.push(Absorber {
                center: [num(0)?, num(1)?, num(2)?],
                radius,
                amplitude: num(4)?,
                profile: fields[5].parse()?,
            });
        }
        Ok(Phantom { absorbers })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for a in &self.absorbers {
            out.push_str(&format!(
                "{} {} {} {} {} {}\n",
                a.center[0], a.center[1], a.center[2], a.radius, a.amplitude, a.profile
            ));
        }
        out
    }
}

/// All physical and discretization parameters of a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGeometry {
    /// Radius of the scanning circle the detector centers move on.
    pub r_scan: f64,
    /// Radius of each circular integrating detector (0 = point detectors).
    pub r_det: f64,
    /// Height of the detector stack; z samples cover `[0, H)`.
    pub height: f64,
    /// Recording duration; chosen so the data vanish at the final time.
    pub duration: f64,
    pub n_sigma: usize,
    pub n_z: usize,
    pub n_t: usize,
    pub n_r: usize,
    /// Quadrature nodes for the angular average over each detector circle.
    pub n_alpha: usize,
}

impl ScanGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_scan > 0.0) || !(self.height > 0.0) || !(self.duration > 0.0) {
            return Err(Error::Config("R, H, T must all be positive".into()));
        }
        if self.r_det < 0.0 {
            return Err(Error::Config("r_det must be >= 0".into()));
        }
        if self.n_sigma == 0 || self.n_z == 0 || self.n_t == 0 || self.n_r == 0 || self.n_alpha == 0
        {
            return Err(Error::Config("all grid sizes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn sigma(&self, l: usize) -> f64 {
        2.0 * std::f64::consts::PI * l as f64 / self.n_sigma as f64
    }

    pub fn z(&self, m: usize) -> f64 {
        self.height * m as f64 / self.n_z as f64
    }

    pub fn t(&self, n: usize) -> f64 {
        self.duration * n as f64 / self.n_t as f64
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.n_t as f64
    }

    /// Radial sample `n` of a grid covering `[0, r_max)`.
    pub fn r(&self, r_max: f64, n: usize) -> f64 {
        r_max * n as f64 / self.n_r as f64
    }

    /// Center of detector circle `l` at height `z`.
    pub fn detector_center(&self, l: usize) -> [f64; 2] {
        let s = self.sigma(l);
        [self.r_scan * s.cos(), self.r_scan * s.sin()]
    }
}

/// Which of the two admissible layouts a configuration realizes.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryClass {
    /// Object enclosed by the detector circles: `r_det >= 2R`,
    /// support inside `B_R x R`.
    Enclosing,
    /// Detector circles strictly outside the object: `r_det < R`,
    /// support inside `B_{R - r_det} x R`.
    Outside,
    Invalid { reason: String },
}

/// Result of the admissibility check.
#[derive(Debug, Clone)]
pub struct GeometryReport {
    pub class: GeometryClass,
    pub admissible: Vec<Stage1Method>,
}

impl GeometryReport {
    pub fn is_valid(&self) -> bool {
        !matches!(self.class, GeometryClass::Invalid { .. })
    }

    /// Error if the configuration is invalid.
    pub fn require_valid(&self) -> Result<()> {
        match &self.class {
            GeometryClass::Invalid { reason } => Err(Error::InvalidGeometry(reason.clone())),
            _ => Ok(()),
        }
    }

    /// Error if `method` is not admissible for this configuration.
    pub fn require(&self, method: Stage1Method) -> Result<()> {
        self.require_valid()?;
        if self.admissible.contains(&method) {
            Ok(())
        } else {
            Err(Error::MethodRefusal(format!(
                "{method:?} is not admissible for {:?} geometry",
                self.class
            )))
        }
    }
}

/// Classify a configuration and list the admissible stage-1 formulas.
///
/// The series formulas need the object enclosed by the detector circles; the
/// point-detector formula needs small detectors strictly outside the object.
/// The guarded quotient formula is total and admissible in both layouts.
pub fn geometry_check(phantom: &Phantom, geometry: &ScanGeometry) -> GeometryReport {
    if let Err(e) = geometry.validate() {
        return GeometryReport {
            class: GeometryClass::Invalid { reason: e.to_string() },
            admissible: vec![],
        };
    }
    let r = geometry.r_scan;
    let rd = geometry.r_det;

    let class = if rd >= 2.0 * r {
        let mut bad = None;
        for (i, a) in phantom.absorbers.iter().enumerate() {
            if a.axis_distance() + a.radius > r {
                bad = Some((i, r));
                break;
            }
        }
        match bad {
            None => GeometryClass::Enclosing,
            Some((i, bound)) => GeometryClass::Invalid {
                reason: format!(
                    "enclosing layout requires absorber support inside the cylinder of \
                     radius {bound}; absorber {i} sticks out"
                ),
            },
        }
    } else if rd < r {
        let bound = r - rd;
        let mut bad = None;
        for (i, a) in phantom.absorbers.iter().enumerate() {
            if a.axis_distance() + a.radius > bound {
                bad = Some(i);
                break;
            }
        }
        match bad {
            None => GeometryClass::Outside,
            Some(i) => GeometryClass::Invalid {
                reason: format!(
                    "outside layout requires absorber support inside the cylinder of \
                     radius {bound}; absorber {i} sticks out"
                ),
            },
        }
    } else {
        GeometryClass::Invalid {
            reason: format!(
                "r_det = {rd} is neither < R = {r} (outside) nor >= 2R = {} (enclosing)",
                2.0 * r
            ),
        }
    };

    let admissible = match class {
        GeometryClass::Enclosing => vec![
            Stage1Method::SineSeries,
            Stage1Method::HankelSeries,
            Stage1Method::NaiveQuotient,
        ],
        GeometryClass::Outside => {
            let mut m = vec![Stage1Method::NaiveQuotient];
            if rd == 0.0 || rd <= r / 10.0 {
                m.push(Stage1Method::PointDetector);
            }
            m
        }
        GeometryClass::Invalid { .. } => vec![],
    };

    GeometryReport { class, admissible }
}
