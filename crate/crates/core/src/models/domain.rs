//! Spatial domains: finite location sets with an optional conditioning site.

use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDomain {
    locations: Vec<[f64; 2]>,
    s0: Option<usize>,
}

impl SpatialDomain {
    pub fn new(locations: Vec<[f64; 2]>, s0: Option<usize>) -> Result<Self, ModelError> {
        if locations.is_empty() {
            return Err(ModelError::Domain("domain requires at least one location".into()));
        }
        if let Some(bad) = locations
            .iter()
            .find(|s| !s[0].is_finite() || !s[1].is_finite())
        {
            return Err(ModelError::Domain(format!(
                "non-finite coordinate in location {bad:?}"
            )));
        }
        if let Some(i) = s0 {
            if i >= locations.len() {
                return Err(ModelError::Domain(format!(
                    "conditioning site index {i} out of range for {} locations",
                    locations.len()
                )));
            }
        }
        Ok(SpatialDomain { locations, s0 })
    }

    /// Regular grid of unit-square cells over [0, nx] x [0, ny], with
    /// locations at the cell centres, row major.
    pub fn unit_grid(nx: usize, ny: usize) -> Self {
        let mut locations = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                locations.push([ix as f64 + 0.5, iy as f64 + 0.5]);
            }
        }
        SpatialDomain { locations, s0: None }
    }

    /// Sets the conditioning site to the location nearest the bounding-box
    /// centre; ties go to the first such location in storage order.
    pub fn with_centre_site(mut self) -> Self {
        let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.locations {
            min_x = min_x.min(s[0]);
            max_x = max_x.max(s[0]);
            min_y = min_y.min(s[1]);
            max_y = max_y.max(s[1]);
        }
        let centre = [0.5 * (min_x + max_x), 0.5 * (min_y + max_y)];
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, s) in self.locations.iter().enumerate() {
            let d = (s[0] - centre[0]).hypot(s[1] - centre[1]);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        self.s0 = Some(best);
        self
    }

    /// Desk-scale default: 8x8 unit grid with the conditioning site at the
    /// cell nearest the centre.
    pub fn default_grid() -> Self {
        SpatialDomain::unit_grid(8, 8).with_centre_site()
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn location(&self, i: usize) -> [f64; 2] {
        self.locations[i]
    }

    pub fn locations(&self) -> &[[f64; 2]] {
        &self.locations
    }

    pub fn s0(&self) -> Option<usize> {
        self.s0
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let a = self.locations[i];
        let b = self.locations[j];
        (a[0] - b[0]).hypot(a[1] - b[1])
    }
}
