//! PPM rendering of relevance maps and heat images, and the MNIST heat
//! pipeline.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::mlp::MlpModel;
use crate::relevance::{pattern_relevance, Family, FeaturePartition, FeatureRelevance, OutputSpec, RelevanceMap};

pub type Rgb = [u8; 3];

pub const ACTIVE: Rgb = [255, 0, 0];
pub const INACTIVE: Rgb = [0, 0, 255];
pub const UNDEFINED: Rgb = [255, 255, 0];
pub const BACKGROUND: Rgb = [0, 0, 0];

/// Raster width of relevance maps.
pub const MAP_WIDTH: usize = 1000;

pub fn family_color(f: Family) -> Rgb {
    match f {
        Family::Active => ACTIVE,
        Family::Inactive => INACTIVE,
        Family::Undefined => UNDEFINED,
    }
}

/// Black-red-yellow-white colormap over `[0, 1]`.
pub fn heat(t: f64) -> Rgb {
    let channel = |v: f64| (255.0 * v.clamp(0.0, 1.0)).round() as u8;
    [channel(3.0 * t), channel(3.0 * t - 1.0), channel(3.0 * t - 2.0)]
}

/// 8-bit RGB raster, row 0 at the top.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        Image {
            width,
            height,
            pixels: fill.repeat(width * height),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        let i = 3 * (y * self.width + x);
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    /// Binary PPM (P6, maxval 255).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Option<Image> {
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while bytes.get(pos)?.is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while !bytes.get(pos)?.is_ascii_whitespace() {
                pos += 1;
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
        }
        pos += 1;
        if fields[0] != "P6" || fields[3] != "255" {
            return None;
        }
        let width: usize = fields[1].parse().ok()?;
        let height: usize = fields[2].parse().ok()?;
        let pixels = bytes.get(pos..)?.to_vec();
        (pixels.len() == 3 * width * height).then_some(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_ppm()).map_err(|e| Error::io(path, e))
    }
}

/// Paint one row: pixel `c` takes the family of the segment containing the
/// midpoint of its sub-interval of the queried feature range.
pub fn paint_partition(img: &mut Image, y: usize, p: &FeaturePartition) {
    let range = p.query.feature_range;
    let w = img.width();
    for c in 0..w {
        let t = range.lo() + (c as f64 + 0.5) * range.width() / w as f64;
        let color = p.family_at(t).map_or(BACKGROUND, family_color);
        img.set(c, y, color);
    }
}

/// Stacked partitions of feature `k`: one row per pattern, the first
/// pattern at the bottom.
pub fn relevance_map_image(map: &RelevanceMap, k: usize, width: usize) -> Image {
    let h = map.rows.len();
    let mut img = Image::new(width, h, BACKGROUND);
    for (i, row) in map.rows.iter().enumerate() {
        paint_partition(&mut img, h - 1 - i, &row.features[k].partition);
    }
    img
}

/// Heat image of per-pixel scores laid out row-major.
pub fn heat_image(scores: &[f64], width: usize, height: usize) -> Image {
    assert_eq!(scores.len(), width * height, "score count must match the raster");
    let mut img = Image::new(width, height, BACKGROUND);
    for (i, &s) in scores.iter().enumerate() {
        img.set(i % width, i / width, heat(s));
    }
    img
}

/// Threshold below which the gap `1 - v` of a saturated output is replaced
/// by the target `[0.9999, 1]`.
pub const SATURATED_GAP: f64 = 1e-4;

/// SIVIA accuracy for heat-image queries with target `[v, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsPolicy {
    /// Interpolates the two published settings geometrically in the target
    /// width `w = 1 - v`: `w = 5e-3` gives `1e-5` and `w = 1e-4` gives `1e-6`.
    Literal,
    /// `0.1 * w`.
    Proportional,
    Fixed(f64),
}

pub const EPS_FLOOR: f64 = 1e-6;

impl EpsPolicy {
    pub fn eps(self, target: Interval) -> f64 {
        let w = target.width();
        match self {
            EpsPolicy::Literal => {
                let slope = 10f64.ln() / 50f64.ln();
                (EPS_FLOOR * (w / SATURATED_GAP).powf(slope)).max(EPS_FLOOR)
            }
            EpsPolicy::Proportional => (0.1 * w).max(EPS_FLOOR),
            EpsPolicy::Fixed(e) => e,
        }
    }
}

impl fmt::Display for EpsPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsPolicy::Literal => f.write_str("literal"),
            EpsPolicy::Proportional => f.write_str("proportional"),
            EpsPolicy::Fixed(e) => write!(f, "{e}"),
        }
    }
}

impl FromStr for EpsPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(EpsPolicy::Literal),
            "proportional" => Ok(EpsPolicy::Proportional),
            other => match other.parse::<f64>() {
                Ok(e) if e > 0.0 && e.is_finite() => Ok(EpsPolicy::Fixed(e)),
                _ => Err(Error::InvalidConfig(format!(
                    "eps policy must be \"literal\", \"proportional\" or a positive number, got {other:?}"
                ))),
            },
        }
    }
}

/// Lower end of the heat target for an output value `v`.
pub fn heat_target_lo(v: f64) -> f64 {
    if 1.0 - v < SATURATED_GAP {
        1.0 - SATURATED_GAP
    } else {
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeatAnalysis {
    pub class: usize,
    pub output: f64,
    pub target: Interval,
    pub eps: f64,
    pub features: Vec<FeatureRelevance>,
}

impl HeatAnalysis {
    pub fn scores(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.score.value).collect()
    }
}

/// Relevance of every input of `pattern` for keeping output `class` in
/// `[v, 1]`, where `v` is the current output. The pattern must be
/// classified as `class`.
pub fn heat_analysis(
    model: &MlpModel,
    pattern: &[f64],
    class: usize,
    policy: EpsPolicy,
) -> Result<HeatAnalysis> {
    let out = model.forward(pattern)?;
    if class >= out.len() {
        return Err(Error::IndexOutOfRange {
            what: "class",
            index: class,
            limit: out.len(),
        });
    }
    let predicted = crate::mlp::argmax(&out);
    if predicted != class {
        return Err(Error::MisclassifiedInput {
            predicted,
            expected: class,
        });
    }
    let spec = OutputSpec::at_least(class, heat_target_lo(out[class]));
    let target = spec.target(model.output_activation().range())?;
    let eps = policy.eps(target);
    let features = pattern_relevance(model, pattern, spec, eps)?;
    Ok(HeatAnalysis {
        class,
        output: out[class],
        target,
        eps,
        features,
    })
}
