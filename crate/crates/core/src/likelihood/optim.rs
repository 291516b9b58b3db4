//! Derivative-free minimisation with the Nelder-Mead simplex.
//!
//! Box constraints are handled by a coordinate-wise logistic change of
//! variables, so the simplex itself always moves through an unconstrained
//! space and every point handed to the objective satisfies the bounds.

use super::LikelihoodError;

/// Settings for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct NelderMeadConfig {
    /// Offset along each coordinate used to build the initial simplex.
    pub scale: Vec<f64>,
    /// Terminate once the objective spread across the simplex drops below this.
    pub tolerance: f64,
    /// The simplex must also collapse geometrically before the search stops:
    /// its largest coordinate spread in the working space must fall below
    /// this.  A simplex straddling the minimum of an even function has zero
    /// objective spread at any size, so the value criterion alone is not safe.
    pub x_tolerance: f64,
    /// Iteration cap; the best vertex found so far is returned when it is hit.
    pub max_iters: usize,
    /// Optional `(lo, hi)` box, one pair per coordinate.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl NelderMeadConfig {
    /// Defaults for a problem with `dim` coordinates.
    pub fn new(dim: usize) -> Self {
        NelderMeadConfig {
            scale: vec![0.1; dim],
            tolerance: 1e-8,
            x_tolerance: 1e-6,
            max_iters: 5000,
            bounds: None,
        }
    }

    /// Attaches box constraints, one `(lo, hi)` pair per coordinate.
    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn validate(&self) -> Result<(), LikelihoodError> {
        if self.scale.is_empty() {
            return Err(LikelihoodError::Domain(
                "simplex scale must name at least one coordinate".into(),
            ));
        }
        if !self.scale.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(LikelihoodError::Domain(
                "simplex scale entries must be positive and finite".into(),
            ));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0)
            || !(self.x_tolerance.is_finite() && self.x_tolerance > 0.0)
        {
            return Err(LikelihoodError::Domain(
                "tolerances must be positive and finite".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(LikelihoodError::Domain(
                "iteration cap must be at least one".into(),
            ));
        }
        if let Some(bounds) = &self.bounds {
            if bounds.len() != self.scale.len() {
                return Err(LikelihoodError::Domain(
                    "bounds and simplex scale disagree on dimension".into(),
                ));
            }
            for (lo, hi) in bounds {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(LikelihoodError::Domain(
                        "each bound must be a finite interval with lo < hi".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Overflow-safe logistic function.
fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// Minimises `objective` starting from `x0`.
///
/// Returns the best point found and its objective value.  The best value
/// never exceeds the smallest value over the initial simplex, the search
/// stops once the simplex is tight in both objective value and position
/// (or the iteration cap is reached), and a NaN objective value is treated
/// as positive infinity so the simplex backs away from the region that
/// produced it.
pub fn nelder_mead(
    mut objective: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    cfg: &NelderMeadConfig,
) -> Result<(Vec<f64>, f64), LikelihoodError> {
    cfg.validate()?;
    let n = x0.len();
    if n != cfg.scale.len() {
        return Err(LikelihoodError::Domain(
            "starting point and simplex scale disagree on dimension".into(),
        ));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(LikelihoodError::Domain(
            "starting point must be finite".into(),
        ));
    }
    if let Some(bounds) = &cfg.bounds {
        for (v, (lo, hi)) in x0.iter().zip(bounds) {
            if !(v > lo && v < hi) {
                return Err(LikelihoodError::Domain(
                    "starting point must lie strictly inside the bounds".into(),
                ));
            }
        }
    }
    let f0 = objective(x0);
    if !f0.is_finite() {
        return Err(LikelihoodError::Domain(
            "objective is not finite at the starting point".into(),
        ));
    }

    let to_x = |y: &[f64]| -> Vec<f64> {
        match &cfg.bounds {
            None => y.to_vec(),
            Some(bounds) => y
                .iter()
                .zip(bounds)
                .map(|(yi, (lo, hi))| lo + (hi - lo) * sigmoid(*yi))
                .collect(),
        }
    };
    let y0: Vec<f64> = match &cfg.bounds {
        None => x0.to_vec(),
        Some(bounds) => x0
            .iter()
            .zip(bounds)
            .map(|(xi, (lo, hi))| {
                let t = (xi - lo) / (hi - lo);
                (t / (1.0 - t)).ln()
            })
            .collect(),
    };
    let mut eval = |y: &[f64]| -> f64 {
        let f = objective(&to_x(y));
        if f.is_nan() {
            f64::INFINITY
        } else {
            f
        }
    };

    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    verts.push(y0.clone());
    for i in 0..n {
        let mut v = y0.clone();
        v[i] += cfg.scale[i];
        verts.push(v);
    }
    let mut fvals: Vec<f64> = Vec::with_capacity(n + 1);
    for v in &verts {
        fvals.push(eval(v));
    }

    let mut iters = 0usize;
    loop {
        // Keep the simplex sorted so index 0 is best and index n is worst.
        let mut pairs: Vec<(f64, Vec<f64>)> =
            fvals.drain(..).zip(verts.drain(..)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (f, v) in pairs {
            fvals.push(f);
            verts.push(v);
        }
        if fvals[n] - fvals[0] < cfg.tolerance {
            let mut diameter = 0.0f64;
            for v in &verts[1..] {
                for (a, b) in v.iter().zip(&verts[0]) {
                    diameter = diameter.max((a - b).abs());
                }
            }
            if diameter < cfg.x_tolerance {
                break;
            }
        }
        if iters >= cfg.max_iters {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| verts[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let reflected: Vec<f64> = centroid
            .iter()
            .zip(&verts[n])
            .map(|(c, w)| c + (c - w))
            .collect();
        let f_r = eval(&reflected);
        if f_r < fvals[0] {
            let expanded: Vec<f64> = centroid
                .iter()
                .zip(&verts[n])
                .map(|(c, w)| c + 2.0 * (c - w))
                .collect();
            let f_e = eval(&expanded);
            if f_e < f_r {
                verts[n] = expanded;
                fvals[n] = f_e;
            } else {
                verts[n] = reflected;
                fvals[n] = f_r;
            }
        } else if f_r < fvals[n - 1] {
            verts[n] = reflected;
            fvals[n] = f_r;
        } else {
            // Contract outside when the reflection at least beat the worst
            // vertex, inside otherwise; shrink when even that fails.
            let (candidate, threshold) = if f_r < fvals[n] {
                let point: Vec<f64> = centroid
                    .iter()
                    .zip(&reflected)
                    .map(|(c, r)| c + 0.5 * (r - c))
                    .collect();
                (point, f_r)
            } else {
                let point: Vec<f64> = centroid
                    .iter()
                    .zip(&verts[n])
                    .map(|(c, w)| c + 0.5 * (w - c))
                    .collect();
                (point, fvals[n])
            };
            let f_c = eval(&candidate);
            if f_c <= threshold {
                verts[n] = candidate;
                fvals[n] = f_c;
            } else {
                for i in 1..=n {
                    let v: Vec<f64> = verts[0]
                        .iter()
                        .zip(&verts[i])
                        .map(|(b, w)| b + 0.5 * (w - b))
                        .collect();
                    fvals[i] = eval(&v);
                    verts[i] = v;
                }
            }
        }
        iters += 1;
    }

    Ok((to_x(&verts[0]), fvals[0]))
}
