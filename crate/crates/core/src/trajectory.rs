use crate::operator::DensityMatrix;

/// A density-matrix time series on a uniform grid starting at `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DensityMatrix>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<DensityMatrix>) -> Self {
        assert_eq!(times.len(), states.len());
        Self { times, states }
    }

    /// Times `k·dt` for each state.
    pub fn uniform(dt: f64, states: Vec<DensityMatrix>) -> Self {
        let times = (0..states.len()).map(|k| k as f64 * dt).collect();
        Self { times, states }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, DensityMatrix::dim)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &DensityMatrix)> {
        self.times.iter().copied().zip(&self.states)
    }

    /// Population of level `i` along the trajectory.
    pub fn populations(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|r| r.population(i)).collect()
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<DensityMatrix>) {
        (self.times, self.states)
    }

    /// Largest entrywise deviation between two trajectories on the same grid.
    pub fn max_deviation(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| crate::linalg::max_abs(&(a.matrix() - b.matrix())))
            .fold(0.0, f64::max)
    }

    /// Largest deviation of any population between two trajectories.
    pub fn max_population_deviation(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .flat_map(|(a, b)| (0..a.dim()).map(move |i| (a.population(i) - b.population(i)).abs()))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn time_grid(dt: f64, ntimes: usize) -> Vec<f64> {
    (0..=ntimes).map(|k| k as f64 * dt).collect()
}

/// Builds a trajectory from row-major flattened `d × d` states.
pub(crate) fn from_flat_states(dt: f64, d: usize, states: &[Vec<num_complex::Complex64>]) -> Trajectory {
    let states = states
        .iter()
        .map(|v| DensityMatrix::from_matrix_unchecked(crate::linalg::from_row_major(d, &v[..d * d])))
        .collect();
    Trajectory::uniform(dt, states)
}
