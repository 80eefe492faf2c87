//! Input-space transformations: rotation, Gaussian blur and their random compositions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;
use crate::rng::RngStream;

/// Rotates a square image about its center with bilinear resampling.
/// Positive angles turn the content counter-clockwise as displayed (rows down).
/// Pixels that map outside the frame read as 0.
pub fn rotate_image(pixels: &RealMatrix, angle_deg: f64) -> Result<RealMatrix> {
    if pixels.rows() != pixels.cols() {
        return Err(Error::invalid(format!(
            "rotation needs a square image, got {}x{}",
            pixels.rows(),
            pixels.cols()
        )));
    }
    if !angle_deg.is_finite() {
        return Err(Error::invalid("rotation angle must be finite"));
    }
    let angle = angle_deg.rem_euclid(360.0);
    if angle == 0.0 {
        return Ok(pixels.clone());
    }
    let side = pixels.rows();
    let center = (side as f64 - 1.0) / 2.0;
    let (sin, cos) = angle.to_radians().sin_cos();
    let read = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= side as isize || c >= side as isize {
            0.0
        } else {
            pixels.get(r as usize, c as usize)
        }
    };
    let mut out = vec![0.0; side * side];
    for r in 0..side {
        let y = r as f64 - center;
        for c in 0..side {
            let x = c as f64 - center;
            // Inverse map: with rows pointing down, a counter-clockwise turn on
            // screen is a clockwise turn in (x, y) coordinates.
            let sx = cos * x - sin * y + center;
            let sy = sin * x + cos * y + center;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let v = (1.0 - fy) * ((1.0 - fx) * read(y0, x0) + fx * read(y0, x0 + 1))
                + fy * ((1.0 - fx) * read(y0 + 1, x0) + fx * read(y0 + 1, x0 + 1));
            out[r * side + c] = v.clamp(0.0, 1.0);
        }
    }
    RealMatrix::new(side, side, out)
}

/// Index into `0..n` under reflect-101 padding (`d c b | a b c d | c b a`).
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

pub fn gaussian_kernel(sigma: f64, size: usize) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("blur sigma must be > 0, got {sigma}")));
    }
    if size < 3 || size.is_multiple_of(2) {
        return Err(Error::invalid(format!("blur kernel must be odd and >= 3, got {size}")));
    }
    let radius = (size / 2) as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Separable Gaussian blur with reflect padding.
pub fn gaussian_blur(pixels: &RealMatrix, sigma: f64, size: usize) -> Result<RealMatrix> {
    let kernel = gaussian_kernel(sigma, size)?;
    let radius = (size / 2) as isize;
    let (rows, cols) = (pixels.rows(), pixels.cols());
    let mut horizontal = vec![0.0; rows * cols];
    for r in 0..rows {
        let row = pixels.row(r);
        for c in 0..cols {
            horizontal[r * cols + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * row[reflect(c as isize + k as isize - radius, cols)])
                .sum();
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let v: f64 = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * horizontal[reflect(r as isize + k as isize - radius, rows) * cols + c])
                .sum();
            out[r * cols + c] = v.clamp(0.0, 1.0);
        }
    }
    RealMatrix::new(rows, cols, out)
}

/// Declarative augmentation applied to client inputs each time a sample is drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AugmentationSpec {
    None {},
    /// Rotation by an angle drawn from `U(-alpha_deg, alpha_deg)`.
    RandomRotation {
        alpha_deg: f64,
    },
    GaussianBlur {
        sigma: f64,
        kernel: usize,
    },
    /// Applied left to right.
    Compose {
        steps: Vec<AugmentationSpec>,
    },
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        AugmentationSpec::None {}
    }
}

impl AugmentationSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            AugmentationSpec::None {} => Ok(()),
            AugmentationSpec::RandomRotation { alpha_deg } => {
                if *alpha_deg >= 0.0 && alpha_deg.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("alpha_deg must be >= 0, got {alpha_deg}")))
                }
            }
            AugmentationSpec::GaussianBlur { sigma, kernel } => gaussian_kernel(*sigma, *kernel).map(|_| ()),
            AugmentationSpec::Compose { steps } => steps.iter().try_for_each(AugmentationSpec::validate),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            AugmentationSpec::None {} => true,
            AugmentationSpec::RandomRotation { alpha_deg } => *alpha_deg == 0.0,
            AugmentationSpec::GaussianBlur { .. } => false,
            AugmentationSpec::Compose { steps } => steps.iter().all(AugmentationSpec::is_identity),
        }
    }

    /// Short label used in tables, e.g. `rotation(45)`.
    pub fn label(&self) -> String {
        match self {
            AugmentationSpec::None {} => "none".into(),
            AugmentationSpec::RandomRotation { alpha_deg } => format!("rotation({alpha_deg})"),
            AugmentationSpec::GaussianBlur { sigma, kernel } => format!("blur({sigma},{kernel})"),
            AugmentationSpec::Compose { steps } => {
                steps.iter().map(AugmentationSpec::label).collect::<Vec<_>>().join("+")
            }
        }
    }
}

/// Draws the rotation angle β ~ U(−α, α).
pub fn draw_rotation_angle(alpha_deg: f64, rng: &mut RngStream) -> Result<f64> {
    rng.uniform(-alpha_deg, alpha_deg)
}

pub fn apply_augmentation(spec: &AugmentationSpec, pixels: &RealMatrix, rng: &mut RngStream) -> Result<RealMatrix> {
    match spec {
        AugmentationSpec::None {} => Ok(pixels.clone()),
        AugmentationSpec::RandomRotation { alpha_deg } => {
            spec.validate()?;
            let beta = draw_rotation_angle(*alpha_deg, rng)?;
            rotate_image(pixels, beta)
        }
        AugmentationSpec::GaussianBlur { sigma, kernel } => gaussian_blur(pixels, *sigma, *kernel),
        AugmentationSpec::Compose { steps } => {
            let mut current = pixels.clone();
            for step in steps {
                current = apply_augmentation(step, &current, rng)?;
            }
            Ok(current)
        }
    }
}
