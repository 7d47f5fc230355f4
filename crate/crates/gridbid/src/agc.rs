//! Regulation (AGC) signal preparation and dispatch.
//!
//! Raw regulation setpoint traces are normalized per market interval so that
//! (a) the interval mean is zero — regulation moves no net energy — and
//! (b) the interval mileage, the accumulated absolute setpoint change
//! `Σ_z |AGC_z − AGC_{z−1}|`, equals the system mileage requirement exactly.
//! The first sub-interval's change is measured against the previous
//! interval's last prepared setpoint (zero before the horizon), which keeps
//! mileage continuous across interval boundaries.
//!
//! That boundary step makes scaling non-linear: with zero-meaned shape `s`,
//! boundary `b`, and tail mileage `M₂ = Σ_{z≥2}|Δs|`, the scale `x` solves
//! `|x·s₁ − b| + x·M₂ = R`. For a zero-mean non-constant interval
//! `|s₁| < M₂`, so the left side is strictly increasing in `x` and the two
//! linear branches of the absolute value yield exactly one valid root —
//! provided `R` exceeds the unavoidable boundary mileage `|b|`.
//!
//! The mileage-to-capacity multiplier bound keeps a unit's dispatched signal
//! within its cleared regulation capacity: any feasible mileage award is at
//! most `m_t` times the capacity award, with
//! `m_t = (1−ε)·R_t / max_z|ΔAGC|` slightly inside the critical ratio.

#[derive(Debug, Clone, PartialEq)]
pub enum AgcError {
    BadShape(String),
    /// Interval is constant after zero-meaning: no mileage to scale.
    ConstantInterval { t: usize },
    NonPositiveTarget { t: usize, target: f64 },
    /// Target mileage does not cover the boundary step from the previous
    /// interval's last setpoint.
    UnreachableTarget { t: usize, boundary: f64, target: f64 },
    ZeroMaxStep { t: usize },
}

impl std::fmt::Display for AgcError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AgcError::BadShape(m) => write!(f, "{}", m),
            AgcError::ConstantInterval { t } => {
                write!(f, "interval {}: constant signal has zero mileage, cannot scale", t + 1)
            }
            AgcError::NonPositiveTarget { t, target } => {
                write!(f, "interval {}: mileage target must be positive, got {}", t + 1, target)
            }
            AgcError::UnreachableTarget { t, boundary, target } => write!(
                f,
                "interval {}: target mileage {} is below the unavoidable boundary step |{}|",
                t + 1,
                target,
                boundary
            ),
            AgcError::ZeroMaxStep { t } => {
                write!(f, "interval {}: no setpoint change, multiplier bound undefined", t + 1)
            }
        }
    }
}

impl std::error::Error for AgcError {}

/// Regulation setpoints, `setpoints[t][z]` in MW, rectangular.
#[derive(Debug, Clone, PartialEq)]
pub struct AgcTrace {
    setpoints: Vec<Vec<f64>>,
}

impl AgcTrace {
    pub fn new(setpoints: Vec<Vec<f64>>) -> Result<Self, AgcError> {
        if setpoints.is_empty() {
            return Err(AgcError::BadShape("trace has no intervals".into()));
        }
        let z = setpoints[0].len();
        if z == 0 {
            return Err(AgcError::BadShape("trace has no sub-intervals".into()));
        }
        if let Some(t) = setpoints.iter().position(|i| i.len() != z) {
            return Err(AgcError::BadShape(format!(
                "interval {} has {} sub-intervals, expected {}",
                t + 1,
                setpoints[t].len(),
                z
            )));
        }
        Ok(AgcTrace { setpoints })
    }

    pub fn intervals(&self) -> usize {
        self.setpoints.len()
    }

    /// Sub-intervals per interval.
    pub fn steps(&self) -> usize {
        self.setpoints[0].len()
    }

    pub fn interval(&self, t: usize) -> &[f64] {
        &self.setpoints[t]
    }

    pub fn setpoint(&self, t: usize, z: usize) -> f64 {
        self.setpoints[t][z]
    }

    /// Setpoint the interval's first change is measured against: the last
    /// setpoint of the previous interval, zero before the horizon.
    pub fn boundary(&self, t: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            *self.setpoints[t - 1].last().unwrap()
        }
    }
}

/// Accumulated absolute setpoint change over interval `t`, including the
/// step from the previous interval's last setpoint.
pub fn mileage_requirement(trace: &AgcTrace, t: usize) -> f64 {
    let mut prev = trace.boundary(t);
    let mut total = 0.0;
    for &s in trace.interval(t) {
        total += (s - prev).abs();
        prev = s;
    }
    total
}

/// Largest single setpoint change in interval `t` (boundary step included).
pub fn max_step(trace: &AgcTrace, t: usize) -> f64 {
    let mut prev = trace.boundary(t);
    let mut largest = 0.0f64;
    for &s in trace.interval(t) {
        largest = largest.max((s - prev).abs());
        prev = s;
    }
    largest
}

/// Zero-mean and mileage-rescale every interval of `raw` so that
/// `mileage_requirement(result, t) == mileage_targets[t]` exactly.
pub fn prepare_trace(raw: &AgcTrace, mileage_targets: &[f64]) -> Result<AgcTrace, AgcError> {
    if mileage_targets.len() != raw.intervals() {
        return Err(AgcError::BadShape(format!(
            "{} mileage targets for {} intervals",
            mileage_targets.len(),
            raw.intervals()
        )));
    }
    let mut prepared: Vec<Vec<f64>> = Vec::with_capacity(raw.intervals());
    let mut boundary = 0.0f64;
    for (t, interval) in raw.setpoints.iter().enumerate() {
        let target = mileage_targets[t];
        if target <= 0.0 {
            return Err(AgcError::NonPositiveTarget { t, target });
        }
        let mean = interval.iter().sum::<f64>() / interval.len() as f64;
        let s: Vec<f64> = interval.iter().map(|v| v - mean).collect();

        let tail: f64 = s.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let s1 = s[0];
        if tail + s1.abs() == 0.0 {
            return Err(AgcError::ConstantInterval { t });
        }
        // Solve |x·s1 − b| + x·tail = target for x ≥ 0. `|s1| < tail` for a
        // non-constant zero-mean interval, so both branch slopes are
        // positive and exactly one root lands in its branch's region.
        let b = boundary;
        if target <= b.abs() {
            return Err(AgcError::UnreachableTarget { t, boundary: b, target });
        }
        let x_hi = (target + b) / (s1 + tail); // x·s1 ≥ b branch
        let x_lo = (target - b) / (tail - s1); // x·s1 < b branch
        let x = if x_hi >= 0.0 && x_hi * s1 >= b {
            x_hi
        } else {
            x_lo
        };
        debug_assert!(x >= 0.0, "scale must be non-negative, got {}", x);

        let scaled: Vec<f64> = s.iter().map(|v| v * x).collect();
        boundary = *scaled.last().unwrap();
        prepared.push(scaled);
    }
    AgcTrace::new(prepared)
}

/// Mileage-to-capacity multiplier `m_t = (1−ε)·mileage / max step`, sitting
/// just inside the ratio at which a unit's dispatched signal could exceed
/// its regulation capacity award.
pub fn multiplier_bound(trace: &AgcTrace, t: usize, epsilon: f64) -> Result<f64, AgcError> {
    let step = max_step(trace, t);
    if step <= 0.0 {
        return Err(AgcError::ZeroMaxStep { t });
    }
    Ok((1.0 - epsilon) * mileage_requirement(trace, t) / step)
}

/// Per-unit regulation setpoints: the system signal pro-rated by the unit's
/// participation factor in each interval.
pub fn dispatch_unit_signal(pf_per_interval: &[f64], trace: &AgcTrace) -> Vec<Vec<f64>> {
    pf_per_interval
        .iter()
        .zip(&trace.setpoints)
        .map(|(&pf, interval)| interval.iter().map(|&s| pf * s).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_near(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{} vs {} (tol {})", a, b, tol);
    }

    #[test]
    fn mileage_sums_absolute_steps() {
        let tr = AgcTrace::new(vec![vec![0.0, 10.0, -5.0, 5.0]]).unwrap();
        assert_eq!(mileage_requirement(&tr, 0), 35.0);
        assert_eq!(max_step(&tr, 0), 15.0);
        let flat = AgcTrace::new(vec![vec![3.0, 3.0, 3.0]]).unwrap();
        assert_eq!(mileage_requirement(&flat, 0), 3.0); // boundary step only
    }

    #[test]
    fn constant_interval_cannot_be_scaled() {
        let tr = AgcTrace::new(vec![vec![5.0, 5.0, 5.0]]).unwrap();
        let err = prepare_trace(&tr, &[10.0]).unwrap_err();
        assert!(matches!(err, AgcError::ConstantInterval { t: 0 }));
    }

    #[test]
    fn doubles_a_zero_mean_interval() {
        let tr = AgcTrace::new(vec![vec![0.0, 10.0, -10.0, 0.0]]).unwrap();
        let out = prepare_trace(&tr, &[80.0]).unwrap();
        assert_eq!(out.interval(0), &[0.0, 20.0, -20.0, 0.0]);
        assert_near(mileage_requirement(&out, 0), 80.0, 1e-12);
    }

    #[test]
    fn zero_means_then_scales() {
        // [2,4,2,4] centers to [-1,1,-1,1]; with a zero boundary its mileage
        // is 1+2+2+2 = 7, so hitting 6 scales by 6/7.
        let tr = AgcTrace::new(vec![vec![2.0, 4.0, 2.0, 4.0]]).unwrap();
        let out = prepare_trace(&tr, &[6.0]).unwrap();
        let x = 6.0 / 7.0;
        for (got, want) in out.interval(0).iter().zip([-x, x, -x, x]) {
            assert_near(*got, want, 1e-12);
        }
        assert_near(mileage_requirement(&out, 0), 6.0, 1e-12);
        let mean: f64 = out.interval(0).iter().sum();
        assert_near(mean, 0.0, 1e-12);
    }

    #[test]
    fn boundary_step_enters_the_scaling() {
        // First interval ends at -10; second interval must reach mileage 28
        // including the 16 MW boundary jump: [5,-5,5,-5]×2 then [3,3,-3,-3]×2.
        let tr =
            AgcTrace::new(vec![vec![5.0, -5.0, 5.0, -5.0], vec![3.0, 3.0, -3.0, -3.0]]).unwrap();
        let out = prepare_trace(&tr, &[70.0, 28.0]).unwrap();
        assert_eq!(out.interval(0), &[10.0, -10.0, 10.0, -10.0]);
        for (got, want) in out.interval(1).iter().zip([6.0, 6.0, -6.0, -6.0]) {
            assert_near(*got, want, 1e-12);
        }
        assert_near(mileage_requirement(&out, 1), 28.0, 1e-12);
    }

    #[test]
    fn scaling_picks_the_other_branch_when_target_is_small() {
        // Boundary +10; a small target keeps x·s1 below the boundary.
        let tr =
            AgcTrace::new(vec![vec![-5.0, 5.0, -5.0, 5.0], vec![3.0, 3.0, -3.0, -3.0]]).unwrap();
        let out = prepare_trace(&tr, &[70.0, 14.0]).unwrap();
        assert_eq!(out.boundary(1), 10.0);
        for (got, want) in out.interval(1).iter().zip([4.0, 4.0, -4.0, -4.0]) {
            assert_near(*got, want, 1e-12);
        }
        assert_near(mileage_requirement(&out, 1), 14.0, 1e-12);
    }

    #[test]
    fn unreachable_target_is_an_error() {
        let tr = AgcTrace::new(vec![vec![5.0, -5.0], vec![1.0, -1.0]]).unwrap();
        // First interval scales to [10,-10]; boundary step into the second
        // is 10, so a target of 5 cannot be met.
        let err = prepare_trace(&tr, &[30.0, 5.0]).unwrap_err();
        assert!(matches!(err, AgcError::UnreachableTarget { t: 1, .. }));
    }

    #[test]
    fn prepared_traces_hold_both_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let t_n = rng.gen_range(1..=6);
            let z_n = rng.gen_range(2..=12);
            let raw: Vec<Vec<f64>> = (0..t_n)
                .map(|_| (0..z_n).map(|_| rng.gen_range(-30.0..30.0)).collect())
                .collect();
            let targets: Vec<f64> = (0..t_n).map(|_| rng.gen_range(50.0..200.0)).collect();
            let tr = AgcTrace::new(raw).unwrap();
            let out = match prepare_trace(&tr, &targets) {
                Ok(o) => o,
                Err(AgcError::ConstantInterval { .. }) => continue,
                Err(e) => panic!("unexpected error: {}", e),
            };
            for t in 0..t_n {
                let peak = out.interval(t).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let mean = out.interval(t).iter().sum::<f64>() / z_n as f64;
                assert!(mean.abs() <= 1e-9 * peak.max(1e-300), "interval {} mean {}", t, mean);
                let got = mileage_requirement(&out, t);
                assert!(
                    (got - targets[t]).abs() <= 1e-9 * targets[t],
                    "interval {} mileage {} target {}",
                    t,
                    got,
                    targets[t]
                );
            }
        }
    }

    #[test]
    fn multiplier_bound_published_arithmetic() {
        let tr = AgcTrace::new(vec![vec![0.0, 10.0, -5.0, 5.0]]).unwrap();
        // Mileage 35, max step 15.
        let m = multiplier_bound(&tr, 0, 1e-3).unwrap();
        assert_near(m, 0.999 * 35.0 / 15.0, 1e-12);
        assert_near(m, 2.331, 1e-3);
    }

    #[test]
    fn multiplier_bound_edge_shapes() {
        // One step carrying all the mileage: ratio 1.
        let tr = AgcTrace::new(vec![vec![12.0, 12.0, 12.0]]).unwrap();
        let m = multiplier_bound(&tr, 0, 1e-3).unwrap();
        assert_near(m, 1.0 - 1e-3, 1e-12);
        // Z equal steps: ratio Z.
        let tr = AgcTrace::new(vec![vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let m = multiplier_bound(&tr, 0, 1e-3).unwrap();
        assert_near(m, 4.0 * 0.999, 1e-12);
        // No movement at all.
        let tr = AgcTrace::new(vec![vec![0.0, 0.0]]).unwrap();
        assert!(matches!(multiplier_bound(&tr, 0, 1e-3), Err(AgcError::ZeroMaxStep { .. })));
    }

    #[test]
    fn unit_dispatch_is_proportional() {
        let tr = AgcTrace::new(vec![vec![0.0, 20.0, -20.0, 0.0], vec![25.0, -25.0, 5.0, -5.0]])
            .unwrap();
        let zero = dispatch_unit_signal(&[0.0, 0.0], &tr);
        assert!(zero.iter().flatten().all(|&v| v == 0.0));
        let ident = dispatch_unit_signal(&[1.0, 1.0], &tr);
        assert_eq!(ident[0], tr.interval(0));
        let scaled = dispatch_unit_signal(&[0.5, 0.4], &tr);
        assert_eq!(scaled[1][0], 10.0);
    }

    #[test]
    fn ragged_traces_are_rejected() {
        assert!(AgcTrace::new(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(AgcTrace::new(vec![]).is_err());
        assert!(AgcTrace::new(vec![vec![]]).is_err());
    }
}
