use serde::{Deserialize, Serialize};

use super::lm::{least_squares_fit, DataPoint, FitResult, LmOptions, Model};
use super::FitError;
use crate::simulate::{simulate_g2, BackgroundModel, TwoLevelParams};

/// One measured correlation curve. `relative_power` scales the drive
/// intensity against the reference curve, so its Rabi frequency is
/// `rabi · √relative_power`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Curve {
    /// ns, sorted, starting at or near zero.
    pub tau: Vec<f64>,
    pub g2: Vec<f64>,
    pub sigma: Vec<f64>,
    pub relative_power: f64,
}

impl G2Curve {
    pub fn new(tau: Vec<f64>, g2: Vec<f64>, sigma: Vec<f64>) -> Self {
        Self {
            tau,
            g2,
            sigma,
            relative_power: 1.0,
        }
    }

    pub fn with_power(mut self, relative_power: f64) -> Self {
        self.relative_power = relative_power;
        self
    }
}

/// Parameters listed here are held at their initial values.
///
/// On resonance one curve only fixes `1/T1 + 1/T2` and `1/(T1 T2) + Ω²`, so
/// a single-curve fit needs the Rabi frequency fixed. Curves at two or more
/// powers separate all three.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct G2FitOptions {
    pub fix_t1: bool,
    pub fix_t2: bool,
    pub fix_rabi: bool,
    pub fix_purity: bool,
    pub lm: LmOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Fit {
    pub params: TwoLevelParams,
    /// Standard errors of `[t1, t2, rabi, signal_purity]`; zero for fixed ones.
    pub sigmas: [f64; 4],
    pub fit: FitResult,
}

struct JointModel<'a> {
    curves: &'a [G2Curve],
    base: [f64; 4],
    free: Vec<usize>,
    background: BackgroundModel,
}

impl JointModel<'_> {
    fn full(&self, p: &[f64]) -> [f64; 4] {
        let mut all = self.base;
        for (slot, &i) in self.free.iter().enumerate() {
            all[i] = p[slot];
        }
        all
    }
}

impl Model for JointModel<'_> {
    fn n_params(&self) -> usize {
        self.free.len()
    }

    fn predict(&self, _xs: &[f64], p: &[f64]) -> Option<Vec<f64>> {
        let [t1, t2, rabi, purity] = self.full(p);
        let mut out = Vec::new();
        for c in self.curves {
            let params = TwoLevelParams {
                t1,
                t2,
                rabi: rabi * c.relative_power.sqrt(),
                signal_purity: purity,
                background: self.background,
            };
            out.extend(simulate_g2(&params, &c.tau).ok()?);
        }
        Some(out)
    }
}

/// Least-squares fit of the Bloch-equation correlation to one or more
/// curves sharing `t1`, `t2` and signal purity.
pub fn fit_g2(curves: &[G2Curve], init: &TwoLevelParams, options: &G2FitOptions) -> Result<G2Fit, FitError> {
    if curves.is_empty() {
        return Err(FitError::InvalidInput("no g2 curves given".into()));
    }
    for c in curves {
        if c.tau.len() != c.g2.len() || c.tau.len() != c.sigma.len() {
            return Err(FitError::InvalidInput("tau, g2 and sigma lengths differ".into()));
        }
        if !(c.relative_power > 0.0) {
            return Err(FitError::InvalidInput(format!(
                "relative power must be positive, got {}",
                c.relative_power
            )));
        }
        let span = c.tau.last().copied().unwrap_or(0.0) - c.tau.first().copied().unwrap_or(0.0);
        if span < 5.0 * init.t1 {
            return Err(FitError::InvalidInput(format!(
                "curve spans {span} ns, need at least 5 t1 = {} ns",
                5.0 * init.t1
            )));
        }
    }
    init.validate()?;
    let fixed = [options.fix_t1, options.fix_t2, options.fix_rabi, options.fix_purity];
    let free: Vec<usize> = (0..4).filter(|&i| !fixed[i]).collect();
    if free.is_empty() {
        return Err(FitError::InvalidInput("all parameters fixed".into()));
    }
    if curves.len() == 1 && !options.fix_rabi && !options.fix_t1 && !options.fix_t2 {
        return Err(FitError::RankDeficient(
            "a single curve cannot separate t1, t2 and rabi; fix one or add a curve at another power".into(),
        ));
    }
    let base = [init.t1, init.t2, init.rabi, init.signal_purity];
    let model = JointModel {
        curves,
        base,
        free: free.clone(),
        background: init.background,
    };
    let data: Vec<DataPoint> = curves
        .iter()
        .flat_map(|c| {
            c.tau
                .iter()
                .zip(&c.g2)
                .zip(&c.sigma)
                .map(|((&t, &g), &s)| DataPoint::new(t, g, s))
        })
        .collect();
    let start: Vec<f64> = free.iter().map(|&i| base[i]).collect();
    let fit = least_squares_fit(&model, &data, &start, &options.lm)?;
    let [t1, t2, rabi, signal_purity] = model.full(&fit.params);
    let mut sigmas = [0.0; 4];
    for (slot, s) in fit.sigmas().into_iter().enumerate() {
        sigmas[free[slot]] = s;
    }
    Ok(G2Fit {
        params: TwoLevelParams {
            t1,
            t2,
            rabi,
            signal_purity,
            background: init.background,
        },
        sigmas,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::PointModel;
    use crate::simulate::excited_population;

    fn grid(end: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| end * i as f64 / (n - 1) as f64).collect()
    }

    fn curve(p: &TwoLevelParams, tau: &[f64]) -> G2Curve {
        let g = simulate_g2(p, tau).unwrap();
        G2Curve::new(tau.to_vec(), g, vec![0.01; tau.len()])
    }

    #[test]
    fn single_curve_with_known_drive() {
        let truth = TwoLevelParams::default();
        let tau = grid(40.0, 161);
        let init = TwoLevelParams {
            t1: 7.0,
            t2: 3.5,
            signal_purity: 0.95,
            ..truth
        };
        let opts = G2FitOptions {
            fix_rabi: true,
            ..Default::default()
        };
        let fit = fit_g2(&[curve(&truth, &tau)], &init, &opts).unwrap();
        assert!((fit.params.t1 / 6.0 - 1.0).abs() < 1e-4, "{:?}", fit.params);
        assert!((fit.params.t2 / 4.0 - 1.0).abs() < 1e-4, "{:?}", fit.params);
        assert_eq!(fit.sigmas[2], 0.0);
    }

    #[test]
    fn single_curve_all_free_is_rejected() {
        let tau = grid(40.0, 41);
        let p = TwoLevelParams::default();
        assert!(matches!(
            fit_g2(&[curve(&p, &tau)], &p, &G2FitOptions::default()),
            Err(FitError::RankDeficient(_))
        ));
    }

    #[test]
    fn short_curve_is_rejected() {
        let p = TwoLevelParams::default();
        let opts = G2FitOptions {
            fix_rabi: true,
            ..Default::default()
        };
        assert!(fit_g2(&[curve(&p, &grid(10.0, 41))], &p, &opts).is_err());
    }

    #[test]
    fn low_drive_matches_exponential_recovery() {
        // weak drive with fast dephasing: recovery is close to 1 − exp(−τ/T)
        let t1 = 6.0;
        let p = TwoLevelParams {
            t1,
            t2: 0.05,
            rabi: 0.01 / t1 * 1e3 / (2.0 * std::f64::consts::PI),
            signal_purity: 1.0,
            background: BackgroundModel::PuritySquared,
        };
        let tau = grid(60.0, 241);
        let pe = excited_population(&p, &tau, None).unwrap();
        let pss = p.steady_state_excited();
        let oracle_data: Vec<DataPoint> = tau
            .iter()
            .zip(&pe)
            .map(|(&t, &e)| DataPoint::new(t, e / pss, 1.0))
            .collect();
        let mono = PointModel::new(1, |t: f64, q: &[f64]| 1.0 - (-t / q[0]).exp());
        let oracle = least_squares_fit(&mono, &oracle_data, &[5.0], &LmOptions::default()).unwrap();

        let opts = G2FitOptions {
            fix_t2: true,
            fix_rabi: true,
            fix_purity: true,
            ..Default::default()
        };
        let init = TwoLevelParams { t1: 5.0, ..p };
        let fit = fit_g2(&[curve(&p, &tau)], &init, &opts).unwrap();
        let rel = (fit.params.t1 / oracle.params[0] - 1.0).abs();
        assert!(rel < 0.02, "{} vs {}", fit.params.t1, oracle.params[0]);
    }
}
