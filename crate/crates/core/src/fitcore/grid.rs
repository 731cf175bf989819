//! Exhaustive minimization over a Cartesian grid.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    axes: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridMin {
    pub index: Vec<usize>,
    pub point: Vec<f64>,
    pub cost: f64,
}

impl GridSpec {
    /// Every axis must be non-empty and strictly increasing.
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidArgument("grid has no axes".into()));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.is_empty() {
                return Err(Error::InvalidArgument(format!("grid axis {i} is empty")));
            }
            if a.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidArgument(format!("grid axis {i} is not strictly increasing")));
            }
        }
        Ok(Self { axes })
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, index: &[usize]) -> Vec<f64> {
        index.iter().zip(&self.axes).map(|(&i, a)| a[i]).collect()
    }

    /// Multi-index of the `flat`-th point in lexicographic order (last axis fastest).
    fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for (slot, axis) in out.iter_mut().zip(&self.axes).rev() {
            *slot = flat % axis.len();
            flat /= axis.len();
        }
    }
}

/// Keeps the strictly smaller cost, so the lexicographically first minimizer wins.
fn better(candidate: (f64, usize), best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((c, i)) => candidate.0 < c || (candidate.0 == c && candidate.1 < i),
    }
}

fn finish(spec: &GridSpec, best: Option<(f64, usize)>) -> Result<GridMin> {
    let (cost, flat) = best.ok_or_else(|| Error::Numerical("every grid cost was non-finite".into()))?;
    let mut index = vec![0; spec.axes.len()];
    spec.unflatten(flat, &mut index);
    Ok(GridMin {
        point: spec.point(&index),
        index,
        cost,
    })
}

/// Evaluates `cost(index, point)` at every grid point and returns the arg-min.
/// Non-finite costs are skipped; ties go to the lexicographically first index.
pub fn grid_minimize<F>(spec: &GridSpec, mut cost: F) -> Result<GridMin>
where
    F: FnMut(&[usize], &[f64]) -> f64,
{
    let mut index = vec![0; spec.axes.len()];
    let mut point = spec.point(&index);
    let mut best: Option<(f64, usize)> = None;
    for flat in 0..spec.len() {
        spec.unflatten(flat, &mut index);
        for ((p, &i), a) in point.iter_mut().zip(&index).zip(&spec.axes) {
            *p = a[i];
        }
        let c = cost(&index, &point);
        if c.is_finite() && better((c, flat), best) {
            best = Some((c, flat));
        }
    }
    finish(spec, best)
}

/// Parallel [`grid_minimize`] with the same result, including the tie rule.
pub fn par_grid_minimize<F>(spec: &GridSpec, cost: F) -> Result<GridMin>
where
    F: Fn(&[usize], &[f64]) -> f64 + Sync,
{
    let best = (0..spec.len())
        .into_par_iter()
        .map_init(
            || (vec![0; spec.axes.len()], vec![0.0; spec.axes.len()]),
            |(index, point), flat| {
                spec.unflatten(flat, index);
                for ((p, &i), a) in point.iter_mut().zip(index.iter()).zip(&spec.axes) {
                    *p = a[i];
                }
                let c = cost(index, point);
                c.is_finite().then_some((c, flat))
            },
        )
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) | (x, None) => x,
                (Some(x), Some(y)) => Some(if better(y, Some(x)) { y } else { x }),
            },
        );
    finish(spec, best)
}
