/// Record of one predictor–corrector step `t_k → t_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    /// `t_{k+1}`.
    pub t: f64,
    pub eta: Vec<f64>,
    pub theta: Vec<f64>,
    /// `‖mean φ(x_{k+1}) − m_{t_{k+1}}‖∞` after the corrector.
    pub moment_residual: f64,
    /// `θ̂_kᵀ (m_{t_{k+1}} − m_{t_k})`.
    pub entropy_increment: f64,
    /// Sum of increments up to and including this step.
    pub entropy_partial_sum: f64,
    /// The corrector had to take the opposite sign to reduce the residual.
    pub corrector_flipped: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverTrace {
    pub h0_entropy: f64,
    pub steps: Vec<StepRecord>,
    /// False when no multiplier was available for the entropy bound (σ = 0
    /// with a moment function lacking a Laplacian).
    pub bound_valid: bool,
}

impl SolverTrace {
    pub(crate) fn new(h0_entropy: f64) -> Self {
        Self {
            h0_entropy,
            steps: Vec::new(),
            bound_valid: true,
        }
    }

    pub(crate) fn push(&mut self, mut rec: StepRecord) {
        let prev = self.steps.last().map_or(0.0, |s| s.entropy_partial_sum);
        rec.entropy_partial_sum = prev + rec.entropy_increment;
        self.steps.push(rec);
    }

    /// `H(p_0)` plus all increments.
    pub fn h_star(&self) -> f64 {
        self.h0_entropy + self.steps.last().map_or(0.0, |s| s.entropy_partial_sum)
    }

    pub fn max_moment_residual(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.moment_residual))
    }

    pub fn final_moment_residual(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.moment_residual)
    }

    pub fn corrector_flips(&self) -> usize {
        self.steps.iter().filter(|s| s.corrector_flipped).count()
    }
}

/// `h0_entropy + Σ_k θ̂_kᵀ (m_{t_{k+1}} − m_{t_k})`.
pub fn entropy_lower_bound(trace: &SolverTrace, h0_entropy: f64) -> f64 {
    let mut s = 0.0;
    for st in &trace.steps {
        s += st.entropy_increment;
    }
    h0_entropy + s
}

/// Entropy of `N(0, Id_d)`: `(d/2) log(2πe)`.
pub fn gaussian_entropy(d: usize) -> f64 {
    0.5 * d as f64 * (std::f64::consts::TAU * std::f64::consts::E).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: usize, inc: f64) -> StepRecord {
        StepRecord {
            k,
            t: 0.0,
            eta: vec![],
            theta: vec![],
            moment_residual: k as f64,
            entropy_increment: inc,
            entropy_partial_sum: f64::NAN,
            corrector_flipped: false,
        }
    }

    #[test]
    fn accumulator_telescopes() {
        let mut t = SolverTrace::new(1.5);
        let incs = [0.1, -0.03, 0.7, 1e-9];
        let mut s = 0.0;
        for (k, &i) in incs.iter().enumerate() {
            t.push(rec(k, i));
            s += i;
            assert_eq!(t.h_star(), 1.5 + s);
        }
        assert_eq!(entropy_lower_bound(&t, 1.5), t.h_star());
        assert_eq!(t.max_moment_residual(), 3.0);
    }

    #[test]
    fn empty_trace_is_initial_entropy() {
        let t = SolverTrace::new(gaussian_entropy(1));
        assert!((t.h_star() - 1.4189385332046727).abs() < 1e-15);
    }
}
