//! Set inversion via interval analysis.
//!
//! Given an inclusion function `[f]`, a target box `[y]` and an initial box
//! `[x]`, [`sivia`] paves `[x]` into boxes proven to map inside `[y]`
//! (feasible, the inner approximation K⁻), boxes proven to map outside it
//! (infeasible, N), and undecided boxes narrower than `eps` (the boundary
//! ΔK). The outer approximation is K⁺ = K⁻ ∪ ΔK.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::interval::IvBox;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoxLabel {
    Feasible,
    Infeasible,
    Undefined,
}

impl BoxLabel {
    pub fn name(self) -> &'static str {
        match self {
            BoxLabel::Feasible => "feasible",
            BoxLabel::Infeasible => "infeasible",
            BoxLabel::Undefined => "boundary",
        }
    }
}

/// Output of [`sivia`]. The three lists have pairwise disjoint interiors and
/// together tile `initial_box`.
#[derive(Clone, Debug, PartialEq)]
pub struct Paving {
    pub feasible: Vec<IvBox>,
    pub boundary: Vec<IvBox>,
    pub infeasible: Vec<IvBox>,
    pub eps: f64,
    pub initial_box: IvBox,
    pub target: IvBox,
}

impl Paving {
    /// Boxes of the outer approximation K⁺ = K⁻ ∪ ΔK.
    pub fn outer(&self) -> impl Iterator<Item = &IvBox> {
        self.feasible.iter().chain(&self.boundary)
    }

    /// Every box with its label, in the order feasible, boundary, infeasible.
    pub fn labeled(&self) -> impl Iterator<Item = (BoxLabel, &IvBox)> {
        self.feasible
            .iter()
            .map(|b| (BoxLabel::Feasible, b))
            .chain(self.boundary.iter().map(|b| (BoxLabel::Undefined, b)))
            .chain(self.infeasible.iter().map(|b| (BoxLabel::Infeasible, b)))
    }

    pub fn feasible_measure(&self) -> f64 {
        self.feasible.iter().map(IvBox::measure).sum()
    }

    pub fn boundary_measure(&self) -> f64 {
        self.boundary.iter().map(IvBox::measure).sum()
    }

    pub fn infeasible_measure(&self) -> f64 {
        self.infeasible.iter().map(IvBox::measure).sum()
    }

    /// CSV with one row per box: `label,lo0,hi0,lo1,hi1,...`. Reals use 17
    /// significant digits so the file round-trips exactly.
    pub fn to_csv(&self) -> String {
        let n = self.initial_box.dim();
        let mut out = String::from("label");
        for d in 0..n {
            let _ = write!(out, ",lo{d},hi{d}");
        }
        out.push('\n');
        for (label, bx) in self.labeled() {
            out.push_str(label.name());
            for c in bx.components() {
                let _ = write!(out, ",{},{}", fmt_real(c.lo()), fmt_real(c.hi()));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// Decimal with 17 significant digits (exact round trip for `f64`).
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SiviaStats {
    pub boxes_examined: usize,
    pub inclusion_evals: usize,
    pub max_depth: usize,
}

/// Feasible iff `[f](bx) ⊆ target`, infeasible iff `[f](bx) ∩ target = ∅`,
/// otherwise undefined.
pub fn classify_box<F>(inclusion: &F, bx: &IvBox, target: &IvBox) -> Result<BoxLabel>
where
    F: Fn(&IvBox) -> Result<IvBox> + ?Sized,
{
    let image = inclusion(bx)?;
    classify_image(&image, target)
}

fn classify_image(image: &IvBox, target: &IvBox) -> Result<BoxLabel> {
    if image.is_subset(target)? {
        Ok(BoxLabel::Feasible)
    } else if !image.intersects(target)? {
        Ok(BoxLabel::Infeasible)
    } else {
        Ok(BoxLabel::Undefined)
    }
}

/// Pave `x0` with respect to the preimage of `target` under `inclusion`.
///
/// Boxes are processed from an explicit LIFO stack with the left half on
/// top, which reproduces the depth-first order of the recursive algorithm
/// and makes the output deterministic. Undecided boxes are bisected along
/// their widest component (lowest index on ties) until narrower than `eps`.
pub fn sivia<F>(inclusion: &F, target: &IvBox, eps: f64, x0: &IvBox) -> Result<(Paving, SiviaStats)>
where
    F: Fn(&IvBox) -> Result<IvBox> + ?Sized,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")));
    }
    let mut paving = Paving {
        feasible: Vec::new(),
        boundary: Vec::new(),
        infeasible: Vec::new(),
        eps,
        initial_box: x0.clone(),
        target: target.clone(),
    };
    let mut stats = SiviaStats::default();
    let mut stack = vec![(x0.clone(), 0usize)];
    while let Some((bx, depth)) = stack.pop() {
        stats.boxes_examined += 1;
        stats.max_depth = stats.max_depth.max(depth);
        stats.inclusion_evals += 1;
        let image = inclusion(&bx)?;
        match classify_image(&image, target)? {
            BoxLabel::Feasible => paving.feasible.push(bx),
            BoxLabel::Infeasible => paving.infeasible.push(bx),
            BoxLabel::Undefined => {
                // Degenerate components have zero width, so this is the
                // width over the bisectable components.
                if bx.width() < eps {
                    paving.boundary.push(bx);
                    continue;
                }
                let dim = bx.bisectable_dim().ok_or(Error::NoBisectableDimension)?;
                let (left, right) = bx.bisect(dim)?;
                // Adjacent floats: the midpoint coincides with an endpoint
                // and the box cannot shrink any further.
                if left[dim].is_degenerate() || right[dim].is_degenerate() {
                    paving.boundary.push(bx);
                    continue;
                }
                stack.push((right, depth + 1));
                stack.push((left, depth + 1));
            }
        }
    }
    Ok((paving, stats))
}
