use statrs::distribution::{ContinuousCDF, StudentsT};

/// A point value of the average age, with a 95% confidence half-width when it
/// comes from simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AaoiEstimate {
    pub value: f64,
    /// Zero for closed-form results.
    pub half_width: f64,
    /// Number of independent replications (or batches) behind the interval; zero for closed forms.
    pub replications: u32,
    pub seed: Option<u64>,
}

impl AaoiEstimate {
    pub fn exact(value: f64) -> Self {
        AaoiEstimate { value, half_width: 0.0, replications: 0, seed: None }
    }

    /// Aggregates independent replicate values into a mean and a Student-t 95% half-width.
    pub fn from_replicates(values: &[f64], seed: u64) -> Self {
        let (mean, half_width) = mean_and_half_width(values);
        AaoiEstimate { value: mean, half_width, replications: values.len() as u32, seed: Some(seed) }
    }

    /// True when `other` lies inside this estimate's interval widened by `k`.
    pub fn covers(&self, other: f64, k: f64) -> bool {
        (self.value - other).abs() <= k * self.half_width
    }
}

/// Sample mean and 95% Student-t half-width. A single value has half-width 0.
pub fn mean_and_half_width(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, t_quantile_975(n - 1) * (var / n as f64).sqrt())
}

pub(crate) fn t_quantile_975(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(1.959_963_984_540_054)
}

/// Running first and second sample moments with a standard error for each.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SampleMoments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
    pub sum_cube: f64,
    pub sum_quad: f64,
}

impl SampleMoments {
    pub fn push(&mut self, x: f64) {
        let x2 = x * x;
        self.count += 1;
        self.sum += x;
        self.sum_sq += x2;
        self.sum_cube += x2 * x;
        self.sum_quad += x2 * x2;
    }

    pub fn merge(&mut self, other: &SampleMoments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.sum_cube += other.sum_cube;
        self.sum_quad += other.sum_quad;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    pub fn mean_sq(&self) -> f64 {
        self.sum_sq / self.count as f64
    }

    pub fn mean_se(&self) -> f64 {
        let n = self.count as f64;
        ((self.mean_sq() - self.mean().powi(2)).max(0.0) / n).sqrt()
    }

    pub fn mean_sq_se(&self) -> f64 {
        let n = self.count as f64;
        ((self.sum_quad / n - self.mean_sq().powi(2)).max(0.0) / n).sqrt()
    }
}
