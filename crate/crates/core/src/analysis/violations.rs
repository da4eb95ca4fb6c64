use super::soc::SocTrajectory;

/// Violation tolerance relative to `max(1, C*)`.
pub const VIOLATION_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    pub storage: String,
    pub tolerance: f64,
    /// 0-based steps with `SOC > C* + tol`.
    pub over: Vec<usize>,
    /// 0-based steps with `SOC < -tol`.
    pub under: Vec<usize>,
    /// Largest excursion outside `[0, C*]`, or 0.
    pub worst: f64,
}

impl ViolationReport {
    pub fn count(&self) -> usize {
        self.over.len() + self.under.len()
    }
}

/// Audits the in-horizon steps of `trajectory` against `[0, C*]`.
pub fn count_violations(trajectory: &SocTrajectory) -> ViolationReport {
    let cap = trajectory.capacity;
    let tolerance = VIOLATION_REL_TOL * cap.max(1.0);
    let mut report = ViolationReport {
        storage: trajectory.storage.clone(),
        tolerance,
        over: Vec::new(),
        under: Vec::new(),
        worst: 0.0,
    };
    for (h, &soc) in trajectory.horizon().iter().enumerate() {
        if soc > cap + tolerance {
            report.over.push(h);
            report.worst = report.worst.max(soc - cap);
        } else if soc < -tolerance {
            report.under.push(h);
            report.worst = report.worst.max(-soc);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(values: Vec<f64>, capacity: f64) -> SocTrajectory {
        SocTrajectory {
            storage: "s".into(),
            capacity,
            values,
        }
    }

    #[test]
    fn counts_both_sides_and_skips_wrap() {
        let r = count_violations(&traj(vec![0.0, 5.0, 10.5, -0.2, 3.0, 99.0], 10.0));
        assert_eq!(r.over, vec![2]);
        assert_eq!(r.under, vec![3]);
        assert_eq!(r.count(), 2);
        assert!((r.worst - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tolerance_scales_with_capacity() {
        let r = count_violations(&traj(vec![1000.0005, 0.0, 0.0], 1000.0));
        assert_eq!(r.count(), 0);
        let r = count_violations(&traj(vec![0.5 + 2e-6, -5e-7, 0.0], 0.5));
        assert_eq!(r.over, vec![0]);
        assert!(r.under.is_empty());
    }
}
