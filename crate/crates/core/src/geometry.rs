//! Convex cells: axis-aligned boxes and half-space polytopes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// `lower <= x <= upper` per dimension, except that a lower face produced by
/// a cut is open: points on a cut belong to the lower side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub open_lower: Vec<bool>,
}

impl<T: Scalar> AxisBox<T> {
    /// A closed box. Every side must have positive extent.
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid(
                "box bounds must have the same positive length",
            ));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::invalid(format!(
                "box side {i} is empty: [{}, {}]",
                lower[i], upper[i]
            )));
        }
        let open_lower = vec![false; lower.len()];
        Ok(AxisBox {
            lower,
            upper,
            open_lower,
        })
    }

    pub fn unit(dim: usize) -> Self {
        AxisBox {
            lower: vec![T::zero(); dim],
            upper: vec![T::one(); dim],
            open_lower: vec![false; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn extent(&self, dim: usize) -> T {
        self.upper[dim] - self.lower[dim]
    }

    pub fn volume(&self) -> T {
        (0..self.dim()).fold(T::one(), |v, i| v * self.extent(i))
    }

    pub fn center(&self) -> Vec<T> {
        let half = T::lit(0.5);
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| l + half * (u - l))
            .collect()
    }

    /// Sum of side lengths, the L1 diameter.
    pub fn l1_diameter(&self) -> T {
        (0..self.dim()).fold(T::zero(), |s, i| s + self.extent(i))
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter().enumerate().all(|(i, &v)| {
            let above = if self.open_lower[i] {
                v > self.lower[i]
            } else {
                v >= self.lower[i]
            };
            above && v <= self.upper[i]
        })
    }

    fn contains_closed(&self, x: &[T]) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
    }

    /// Nearest point of the closed box.
    pub fn clamp(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| v.max(self.lower[i]).min(self.upper[i]))
            .collect()
    }

    /// Cuts at `cut` in `dim`, returning `(lower part, upper part)`.
    pub(crate) fn cut(&self, dim: usize, cut: T) -> (Self, Self) {
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[dim] = cut;
        right.lower[dim] = cut;
        right.open_lower[dim] = true;
        (left, right)
    }

    /// Range of `normal . x + offset` over the box.
    pub fn affine_range(&self, normal: &[T], offset: T) -> (T, T) {
        let mut lo = offset;
        let mut hi = offset;
        for i in 0..self.dim() {
            let a = normal[i] * self.lower[i];
            let b = normal[i] * self.upper[i];
            lo += a.min(b);
            hi += a.max(b);
        }
        (lo, hi)
    }

    /// Shrinks the box towards `{normal . x + offset <= 0}` by bounding each
    /// coordinate with the extreme values of the others. The result still
    /// contains the intersection.
    fn tighten(&mut self, normal: &[T], offset: T) {
        let d = self.dim();
        let mins: Vec<T> = (0..d)
            .map(|i| (normal[i] * self.lower[i]).min(normal[i] * self.upper[i]))
            .collect();
        let total = mins.iter().fold(offset, |s, &v| s + v);
        for i in 0..d {
            let w = normal[i];
            if w == T::zero() {
                continue;
            }
            // w * x_i <= -(total - mins[i])
            let rest = -(total - mins[i]);
            let limit = rest / w;
            if w > T::zero() {
                if limit < self.upper[i] && limit > self.lower[i] {
                    self.upper[i] = limit;
                }
            } else if limit > self.lower[i] && limit < self.upper[i] {
                self.lower[i] = limit;
            }
        }
    }
}

/// `normal . x + offset <= 0`, or `< 0` when `strict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace<T> {
    pub normal: Vec<T>,
    pub offset: T,
    pub strict: bool,
}

impl<T: Scalar> HalfSpace<T> {
    #[inline]
    pub fn contains(&self, x: &[T]) -> bool {
        let v = dot(&self.normal, x) + self.offset;
        if self.strict {
            v < T::zero()
        } else {
            v <= T::zero()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellGeometry<T> {
    AxisBox(AxisBox<T>),
    /// Intersection of half-spaces with the closed box `domain`. `bounds`
    /// is a bounding box of that intersection, used for sampling and for
    /// placing cuts; membership never consults it.
    Polytope {
        halfspaces: Vec<HalfSpace<T>>,
        domain: AxisBox<T>,
        bounds: AxisBox<T>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell<T> {
    pub id: usize,
    pub geometry: CellGeometry<T>,
}

impl<T: Scalar> Cell<T> {
    pub fn boxed(id: usize, b: AxisBox<T>) -> Self {
        Cell {
            id,
            geometry: CellGeometry::AxisBox(b),
        }
    }

    /// A polytope with no faces yet, bounded by `b`.
    pub fn polytope(id: usize, b: AxisBox<T>) -> Self {
        Cell {
            id,
            geometry: CellGeometry::Polytope {
                halfspaces: Vec::new(),
                domain: b.clone(),
                bounds: b,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds().dim()
    }

    /// The box itself, or the polytope's bounding box.
    pub fn bounds(&self) -> &AxisBox<T> {
        match &self.geometry {
            CellGeometry::AxisBox(b) => b,
            CellGeometry::Polytope { bounds, .. } => bounds,
        }
    }

    pub fn as_box(&self) -> Option<&AxisBox<T>> {
        match &self.geometry {
            CellGeometry::AxisBox(b) => Some(b),
            CellGeometry::Polytope { .. } => None,
        }
    }

    pub fn is_box(&self) -> bool {
        self.as_box().is_some()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        match &self.geometry {
            CellGeometry::AxisBox(b) => b.contains(x),
            CellGeometry::Polytope {
                halfspaces, domain, ..
            } => domain.contains_closed(x) && halfspaces.iter().all(|h| h.contains(x)),
        }
    }

    /// Splits by the hyperplane `normal . x + offset = 0`. The first part
    /// keeps the closed side `<= 0`. Box cells become polytopes.
    pub(crate) fn cut_oblique(&self, normal: &[T], offset: T) -> (Self, Self) {
        let (halfspaces, domain, bounds) = match &self.geometry {
            CellGeometry::AxisBox(b) => {
                // Boxes produced by axis cuts have open faces; oblique
                // geometry never mixes with axis cuts, so only closed boxes
                // reach this point.
                debug_assert!(!b.open_lower.iter().any(|&o| o));
                (Vec::new(), b.clone(), b.clone())
            }
            CellGeometry::Polytope {
                halfspaces,
                domain,
                bounds,
            } => (halfspaces.clone(), domain.clone(), bounds.clone()),
        };
        let neg: Vec<T> = normal.iter().map(|&w| -w).collect();
        let mut left_h = halfspaces.clone();
        left_h.push(HalfSpace {
            normal: normal.to_vec(),
            offset,
            strict: false,
        });
        let mut right_h = halfspaces;
        right_h.push(HalfSpace {
            normal: neg.clone(),
            offset: -offset,
            strict: true,
        });
        let mut left_b = bounds.clone();
        left_b.tighten(normal, offset);
        let mut right_b = bounds;
        right_b.tighten(&neg, -offset);
        (
            Cell {
                id: self.id,
                geometry: CellGeometry::Polytope {
                    halfspaces: left_h,
                    domain: domain.clone(),
                    bounds: left_b,
                },
            },
            Cell {
                id: self.id,
                geometry: CellGeometry::Polytope {
                    halfspaces: right_h,
                    domain,
                    bounds: right_b,
                },
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_validation() {
        assert!(AxisBox::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(AxisBox::<f64>::new(vec![], vec![]).is_err());
        let b = AxisBox::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(b.volume(), 4.0);
        assert_eq!(b.center(), vec![1.0, 0.0]);
        assert_eq!(b.l1_diameter(), 4.0);
    }

    #[test]
    fn cut_assigns_boundary_to_lower_side() {
        let b = AxisBox::<f64>::unit(2);
        let (l, r) = b.cut(0, 0.3);
        assert!(l.contains(&[0.3, 0.5]));
        assert!(!r.contains(&[0.3, 0.5]));
        assert!(r.contains(&[0.30001, 0.5]));
        assert_eq!(l.volume() + r.volume(), 1.0);
    }

    #[test]
    fn clamp_projects_onto_box() {
        let b = AxisBox::<f64>::unit(2);
        assert_eq!(b.clamp(&[-1.0, 0.5]), vec![0.0, 0.5]);
        assert_eq!(b.clamp(&[2.0, 3.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn oblique_cut_sides() {
        let c = Cell::boxed(0, AxisBox::<f64>::unit(2));
        // x + y - 1 = 0
        let (l, r) = c.cut_oblique(&[1.0, 1.0], -1.0);
        assert!(l.contains(&[0.1, 0.1]) && !r.contains(&[0.1, 0.1]));
        assert!(r.contains(&[0.9, 0.9]) && !l.contains(&[0.9, 0.9]));
        assert!(l.contains(&[0.5, 0.5]) && !r.contains(&[0.5, 0.5]));
    }

    #[test]
    fn tightening_keeps_the_region() {
        // x - 0.25 <= 0 on the unit square: left bounds shrink to x <= 0.25.
        let c = Cell::boxed(0, AxisBox::<f64>::unit(2));
        let (l, r) = c.cut_oblique(&[1.0, 0.0], -0.25);
        assert_eq!(l.bounds().upper[0], 0.25);
        assert_eq!(r.bounds().lower[0], 0.25);
        assert_eq!(l.bounds().upper[1], 1.0);
    }
}
