//! Procedural glyph prototypes standing in for the semantic content of an image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;
use crate::rng::RngStream;

/// Square greyscale image in `[0, 1]` with its class label.
#[derive(Clone, Debug, PartialEq)]
pub struct Glyph {
    pub pixels: RealMatrix,
    pub label: usize,
}

impl Glyph {
    pub fn new(pixels: RealMatrix, label: usize) -> Result<Self> {
        if pixels.rows() != pixels.cols() {
            return Err(Error::invalid(format!(
                "glyphs must be square, got {}x{}",
                pixels.rows(),
                pixels.cols()
            )));
        }
        if pixels.as_slice().iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("glyph pixels must lie in [0, 1]"));
        }
        Ok(Self { pixels, label })
    }

    pub fn side(&self) -> usize {
        self.pixels.rows()
    }
}

#[derive(Clone, Copy, Debug)]
enum Stroke {
    Segment { from: (f64, f64), to: (f64, f64) },
    Circle { center: (f64, f64), radius: f64 },
}

impl Stroke {
    fn distance(&self, (x, y): (f64, f64)) -> f64 {
        match *self {
            Stroke::Segment { from, to } => {
                let (dx, dy) = (to.0 - from.0, to.1 - from.1);
                let len2 = dx * dx + dy * dy;
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    (((x - from.0) * dx + (y - from.1) * dy) / len2).clamp(0.0, 1.0)
                };
                let (px, py) = (from.0 + t * dx, from.1 + t * dy);
                ((x - px).powi(2) + (y - py).powi(2)).sqrt()
            }
            Stroke::Circle { center, radius } => {
                (((x - center.0).powi(2) + (y - center.1).powi(2)).sqrt() - radius).abs()
            }
        }
    }
}

const fn seg(a: (f64, f64), b: (f64, f64)) -> Stroke {
    Stroke::Segment { from: a, to: b }
}

const fn circle(center: (f64, f64), radius: f64) -> Stroke {
    Stroke::Circle { center, radius }
}

/// Prototype catalog in normalised coordinates (`[-1, 1]²`, y pointing down).
/// No entry is a small rotation of another, so rotation is a nuisance factor
/// rather than a label change.
const CATALOG: &[(&str, &[Stroke])] = &[
    ("ring", &[circle((0.0, 0.0), 0.6)]),
    ("bar", &[seg((0.0, -0.7), (0.0, 0.7))]),
    ("ell", &[seg((-0.4, -0.7), (-0.4, 0.6)), seg((-0.4, 0.6), (0.5, 0.6))]),
    ("tee", &[seg((-0.6, -0.6), (0.6, -0.6)), seg((0.0, -0.6), (0.0, 0.7))]),
    ("plus", &[seg((-0.6, 0.0), (0.6, 0.0)), seg((0.0, -0.6), (0.0, 0.6))]),
    (
        "triangle",
        &[
            seg((0.0, -0.65), (0.6, 0.5)),
            seg((0.6, 0.5), (-0.6, 0.5)),
            seg((-0.6, 0.5), (0.0, -0.65)),
        ],
    ),
    ("six", &[circle((0.0, 0.3), 0.35), seg((0.25, -0.7), (-0.33, 0.2))]),
    (
        "seven",
        &[seg((-0.5, -0.6), (0.5, -0.6)), seg((0.5, -0.6), (-0.1, 0.7))],
    ),
    ("eight", &[circle((0.0, -0.35), 0.3), circle((0.0, 0.35), 0.32)]),
    (
        "zed",
        &[
            seg((-0.5, -0.6), (0.5, -0.6)),
            seg((0.5, -0.6), (-0.5, 0.6)),
            seg((-0.5, 0.6), (0.5, 0.6)),
        ],
    ),
    (
        "square",
        &[
            seg((-0.5, -0.5), (0.5, -0.5)),
            seg((0.5, -0.5), (0.5, 0.5)),
            seg((0.5, 0.5), (-0.5, 0.5)),
            seg((-0.5, 0.5), (-0.5, -0.5)),
        ],
    ),
    (
        "arrow",
        &[
            seg((-0.6, 0.0), (0.6, 0.0)),
            seg((0.6, 0.0), (0.25, -0.35)),
            seg((0.6, 0.0), (0.25, 0.35)),
        ],
    ),
    ("corner", &[seg((0.1, -0.6), (0.6, -0.6)), seg((0.6, -0.6), (0.6, 0.0))]),
    ("dot_ring", &[circle((-0.4, -0.4), 0.25)]),
];

/// Default stroke width (Gaussian profile σ) in normalised units.
pub const STROKE_WIDTH: f64 = 0.11;

pub fn catalog_size() -> usize {
    CATALOG.len()
}

pub fn catalog_name(label: usize) -> Option<&'static str> {
    CATALOG.get(label).map(|(name, _)| *name)
}

fn pixel_center(index: usize, side: usize) -> f64 {
    (index as f64 + 0.5) / side as f64 * 2.0 - 1.0
}

fn render(strokes: &[Stroke], side: usize, width: f64) -> Vec<Vec<f64>> {
    (0..side)
        .map(|r| {
            (0..side)
                .map(|c| {
                    let p = (pixel_center(c, side), pixel_center(r, side));
                    strokes
                        .iter()
                        .map(|s| {
                            let d = s.distance(p);
                            (-d * d / (2.0 * width * width)).exp()
                        })
                        .fold(0.0, f64::max)
                })
                .collect()
        })
        .collect()
}

/// Centered ring with a Gaussian radial profile; `radius` and `width` in pixels.
pub fn draw_ring(side: usize, radius: f64, width: f64) -> Result<RealMatrix> {
    let scale = 2.0 / side as f64;
    let rows = render(&[circle((0.0, 0.0), radius * scale)], side, width * scale);
    RealMatrix::from_rows(&rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassPrototype {
    pub label: usize,
    pub prototype: Vec<Vec<f64>>,
}

/// JSON-serialisable set of class prototypes: `{side, classes: [{label, prototype}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrototypeSet {
    pub side: usize,
    pub classes: Vec<ClassPrototype>,
}

impl PrototypeSet {
    pub fn catalog(num_classes: usize, side: usize) -> Result<Self> {
        Self::catalog_with_width(num_classes, side, STROKE_WIDTH)
    }

    /// Catalog rendered with stroke width `width` (normalised units).
    pub fn catalog_with_width(num_classes: usize, side: usize, width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::invalid(format!("stroke width must be > 0, got {width}")));
        }
        if num_classes > CATALOG.len() {
            return Err(Error::invalid(format!(
                "{num_classes} classes requested but the prototype catalog has {}",
                CATALOG.len()
            )));
        }
        if num_classes < 2 || side < 4 {
            return Err(Error::invalid("need at least 2 classes and side >= 4"));
        }
        let classes = CATALOG[..num_classes]
            .iter()
            .enumerate()
            .map(|(label, (_, strokes))| ClassPrototype {
                label,
                prototype: render(strokes, side, width),
            })
            .collect();
        Ok(Self { side, classes })
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Empty("prototype set"));
        }
        for (i, class) in self.classes.iter().enumerate() {
            if class.label != i {
                return Err(Error::invalid("prototype labels must be 0..n in order"));
            }
            if class.prototype.len() != self.side || class.prototype.iter().any(|r| r.len() != self.side) {
                return Err(Error::dim(format!("prototype {i} is not {0}x{0}", self.side)));
            }
            if class.prototype.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!("prototype {i} has pixels outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn prototype(&self, label: usize) -> Result<RealMatrix> {
        let class = self
            .classes
            .get(label)
            .ok_or_else(|| Error::invalid(format!("no prototype for label {label}")))?;
        RealMatrix::from_rows(&class.prototype)
    }

    /// Class-major bank: every prototype plus clipped Gaussian pixel noise.
    pub fn sample_bank(&self, samples_per_class: usize, noise_std: f64, rng: &mut RngStream) -> Result<Vec<Glyph>> {
        self.validate()?;
        if !(noise_std >= 0.0) {
            return Err(Error::invalid("noise_std must be >= 0"));
        }
        let mut bank = Vec::with_capacity(self.classes.len() * samples_per_class);
        for class in &self.classes {
            let proto = RealMatrix::from_rows(&class.prototype)?;
            for _ in 0..samples_per_class {
                let mut pixels = proto.clone();
                if noise_std > 0.0 {
                    for p in pixels.as_mut_slice() {
                        *p = (*p + noise_std * rng.normal()).clamp(0.0, 1.0);
                    }
                }
                bank.push(Glyph {
                    pixels,
                    label: class.label,
                });
            }
        }
        Ok(bank)
    }
}

pub fn make_glyph_bank(
    num_classes: usize,
    side: usize,
    samples_per_class: usize,
    noise_std: f64,
    rng: &mut RngStream,
) -> Result<Vec<Glyph>> {
    PrototypeSet::catalog(num_classes, side)?.sample_bank(samples_per_class, noise_std, rng)
}
