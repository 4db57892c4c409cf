//! Controller-side state estimation: a Kalman filter update masked by the
//! set of successfully received sensor packets, plus the one-step prediction
//! used for control.
//!
//! The controller acts on a prediction built from the previous slot's
//! posterior, because sensing packets for the current slot arrive only at
//! the slot's end. The masked update is implemented in reduced form: only
//! the measurement rows whose packets arrived enter the innovation system,
//! which is algebraically identical to masking with a diagonal success
//! matrix while avoiding singular innovation matrices when few sensors get
//! through.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::plant::SystemMatrices;

/// Posterior estimate and covariance together with the derived one-step
/// prediction the controller acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    /// Posterior state estimate.
    pub x_est: DVector<f64>,
    /// Posterior error covariance, kept symmetric.
    pub p_est: DMatrix<f64>,
    /// One-step prediction of the current state.
    pub x_pred: DVector<f64>,
    /// Error covariance of the prediction, kept symmetric.
    pub p_pred: DMatrix<f64>,
    /// How many innovation solves needed diagonal jitter.
    pub jitter_events: u64,
    /// Norm of the last update's innovation (zero when no packets arrived);
    /// a per-slot diagnostic for rollout traces.
    pub last_innovation_norm: f64,
}

impl EstimatorState {
    /// Reset convention: zero estimate with covariance equal to the process
    /// noise, so the first prediction carries `A W Aᵀ + W`.
    pub fn init(sys: &SystemMatrices) -> Self {
        let k = sys.state_dim();
        let x_est = DVector::zeros(k);
        let p_est = sys.w.clone();
        let (x_pred, p_pred) = predict_from(sys, &x_est, &p_est, &DVector::zeros(sys.actuator_count()));
        EstimatorState {
            x_est,
            p_est,
            x_pred,
            p_pred,
            jitter_events: 0,
            last_innovation_norm: 0.0,
        }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn predict_from(
    sys: &SystemMatrices,
    x_est: &DVector<f64>,
    p_est: &DMatrix<f64>,
    u_rx_prev: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let x_pred = &sys.a * x_est + &sys.b * u_rx_prev;
    let mut p_pred = &sys.a * p_est * sys.a.transpose() + &sys.w;
    symmetrize(&mut p_pred);
    (x_pred, p_pred)
}

/// One-step prediction from a posterior: `x̂ = A x_est + B u_rx_prev`,
/// `P = A P_est Aᵀ + W`.
pub fn predict_current(
    sys: &SystemMatrices,
    est: &EstimatorState,
    u_rx_prev: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    predict_from(sys, &est.x_est, &est.p_est, u_rx_prev)
}

/// Runs the packet-masked Kalman update for one slot.
///
/// `psi` flags which sensor measurements arrived; `u_rx_prev` is the control
/// input realized in the previous slot, which drives the prior. With no
/// successful packets the posterior equals the prior.
pub fn mkf_update(
    sys: &SystemMatrices,
    est: &EstimatorState,
    y_rx: &DVector<f64>,
    psi: &[bool],
    u_rx_prev: &DVector<f64>,
) -> Result<EstimatorState> {
    let m = sys.sensor_count();
    if psi.len() != m || y_rx.len() != m {
        return Err(Error::Dimension("measurement and mask must have one entry per sensor".into()));
    }
    if u_rx_prev.len() != sys.actuator_count() {
        return Err(Error::Dimension("previous control input has wrong length".into()));
    }

    let (prior_x, prior_p) = predict_from(sys, &est.x_est, &est.p_est, u_rx_prev);

    let received: Vec<usize> = (0..m).filter(|&i| psi[i]).collect();
    if received.is_empty() {
        return Ok(EstimatorState {
            x_est: prior_x.clone(),
            p_est: prior_p.clone(),
            x_pred: prior_x,
            p_pred: prior_p,
            jitter_events: est.jitter_events,
            last_innovation_norm: 0.0,
        });
    }

    let s = received.len();
    let k = sys.state_dim();
    let c_r = DMatrix::from_fn(s, k, |i, j| sys.c[(received[i], j)]);
    let y_r = DVector::from_fn(s, |i, _| y_rx[received[i]]);
    let v_r = DMatrix::from_fn(s, s, |i, j| sys.v[(received[i], received[j])]);

    let mut innovation_cov = &c_r * &prior_p * c_r.transpose() + v_r;
    symmetrize(&mut innovation_cov);

    let mut jitter_events = est.jitter_events;
    let cross = &c_r * &prior_p; // (C_r P⁻), the transposed gain numerator
    let solved = match well_conditioned_solve(&innovation_cov, &cross) {
        Some(sol) => sol,
        None => {
            jitter_events += 1;
            let jittered = &innovation_cov + DMatrix::<f64>::identity(s, s) * 1e-9;
            well_conditioned_solve(&jittered, &cross).ok_or_else(|| {
                Error::Numerical("innovation matrix singular even after jitter".into())
            })?
        }
    };
    let gain = solved.transpose(); // K = P⁻ C_rᵀ (C_r P⁻ C_rᵀ + V_r)⁻¹

    let innovation = y_r - &c_r * &prior_x;
    let x_est = &prior_x + &gain * &innovation;
    let mut p_est = (DMatrix::identity(k, k) - &gain * &c_r) * &prior_p;
    symmetrize(&mut p_est);

    Ok(EstimatorState {
        x_est,
        p_est,
        // Prediction fields are refreshed by the caller once the slot's own
        // control input is known; carry the prior meanwhile.
        x_pred: prior_x,
        p_pred: prior_p,
        jitter_events,
        last_innovation_norm: innovation.norm(),
    })
}

/// Cholesky solve that refuses ill-conditioned systems. The condition
/// estimate is the squared ratio of extreme Cholesky diagonal entries, a
/// cheap lower bound on the true condition number.
fn well_conditioned_solve(spd: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = spd.clone().cholesky()?;
    let diag = chol.l_dirty().diagonal();
    let dmax = diag.max();
    let dmin = diag.min();
    if dmin <= 0.0 || (dmax / dmin).powi(2) > 1e12 {
        return None;
    }
    Some(chol.solve(rhs))
}
