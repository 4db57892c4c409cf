//! Linear discrete-time plant: state evolution, sensing, actuation under
//! packet outcomes, and random system generation.
//!
//! The plant is `x(t+1) = A x(t) + B u_rx(t) + w(t)` with measurements
//! `y_tx(t) = C x(t) + v(t)`. Packet outcomes mask the transmitted control
//! inputs and measurements: an actuator that misses its packet applies zero
//! input, a sensor packet that is lost contributes nothing downstream.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Per-coordinate saturation bound on the plant state.
pub const STATE_BOUND: f64 = 100.0;

/// Immutable description of the controlled system: dynamics, sensing,
/// noise covariances and cost weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    /// State matrix, K×K. Every eigenvalue magnitude exceeds 1 for
    /// generated systems (open-loop unstable).
    pub a: DMatrix<f64>,
    /// Input matrix, K×N.
    pub b: DMatrix<f64>,
    /// Measurement matrix, M×K.
    pub c: DMatrix<f64>,
    /// Process-noise covariance, K×K, symmetric PSD.
    pub w: DMatrix<f64>,
    /// Measurement-noise covariance, M×M, symmetric PSD.
    pub v: DMatrix<f64>,
    /// State penalty, K×K, symmetric PSD.
    pub q: DMatrix<f64>,
    /// Input penalty, N×N, symmetric PSD.
    pub r: DMatrix<f64>,
}

impl SystemMatrices {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn sensor_count(&self) -> usize {
        self.c.nrows()
    }

    pub fn actuator_count(&self) -> usize {
        self.b.ncols()
    }

    /// Validates dimension consistency of all products in the plant update.
    pub fn validate(&self) -> Result<()> {
        let (k, m, n) = (self.state_dim(), self.sensor_count(), self.actuator_count());
        let checks = [
            (self.a.shape() == (k, k), "A must be K×K"),
            (self.b.shape() == (k, n), "B must be K×N"),
            (self.c.shape() == (m, k), "C must be M×K"),
            (self.w.shape() == (k, k), "W must be K×K"),
            (self.v.shape() == (m, m), "V must be M×M"),
            (self.q.shape() == (k, k), "Q must be K×K"),
            (self.r.shape() == (n, n), "R must be N×N"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Dimension(msg.into()));
            }
        }
        Ok(())
    }
}

/// Plant state vector together with its slot index.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub x: DVector<f64>,
    pub t: u64,
}

impl PlantState {
    /// Zero state at slot 0 (the episode reset convention).
    pub fn zero(state_dim: usize) -> Self {
        PlantState {
            x: DVector::zeros(state_dim),
            t: 0,
        }
    }
}

/// Success flags of the slot's sensor and actuator packets. A device that
/// was not scheduled always carries flag `false`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketOutcomes {
    /// One flag per sensor (diagonal of the sensing success matrix).
    pub psi: Vec<bool>,
    /// One flag per actuator (diagonal of the control success matrix).
    pub lambda: Vec<bool>,
}

impl PacketOutcomes {
    pub fn none(sensors: usize, actuators: usize) -> Self {
        PacketOutcomes {
            psi: vec![false; sensors],
            lambda: vec![false; actuators],
        }
    }

    pub fn all(sensors: usize, actuators: usize) -> Self {
        PacketOutcomes {
            psi: vec![true; sensors],
            lambda: vec![true; actuators],
        }
    }
}

/// Draws zero-mean Gaussian vectors with a fixed covariance.
///
/// The factor is a Cholesky root when the covariance is positive definite;
/// singular PSD covariances fall back to an eigendecomposition root with
/// negative eigenvalues (floating-point dust) clamped to zero.
#[derive(Debug, Clone)]
pub struct CovSampler {
    factor: DMatrix<f64>,
}

impl CovSampler {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() {
            return Err(Error::Dimension("covariance must be square".into()));
        }
        let sym = (cov + cov.transpose()) * 0.5;
        let factor = match sym.clone().cholesky() {
            Some(chol) => chol.l(),
            None => {
                let eig = sym.symmetric_eigen();
                let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
                &eig.eigenvectors * DMatrix::from_diagonal(&roots)
            }
        };
        if factor.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("covariance factorization produced non-finite entries".into()));
        }
        Ok(CovSampler { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample(StandardNormal));
        &self.factor * z
    }
}

/// Generates a random system: `A` is built as `S Λ S⁻¹` with eigenvalue
/// magnitudes drawn uniformly from `(eig_low, eig_high)` under random signs,
/// and `S` a random matrix resampled until its condition number stays below
/// 100, so the stated spectrum holds exactly. `B` and `C` are standard
/// normal i.i.d.; `W`, `V`, `Q`, `R` are identity.
pub fn generate_system(
    state_dim: usize,
    sensors: usize,
    actuators: usize,
    eig_low: f64,
    eig_high: f64,
    rng_seed: u64,
) -> Result<SystemMatrices> {
    if state_dim == 0 || sensors == 0 || actuators == 0 {
        return Err(Error::parameter("dimensions K, M, N must all be at least 1"));
    }
    if !(1.0 <= eig_low && eig_low < eig_high) || !eig_high.is_finite() {
        return Err(Error::parameter(format!(
            "eigenvalue range must satisfy 1.0 <= low < high, got ({eig_low}, {eig_high})"
        )));
    }

    let mut rng = crate::rng::stream_rng(rng_seed, 0);
    let k = state_dim;

    // random_range is half-open at the top; rejecting the lower endpoint
    // keeps every magnitude strictly inside the interval.
    let magnitudes = DVector::from_fn(k, |_, _| loop {
        let m = rng.random_range(eig_low..eig_high);
        if m > eig_low {
            break m;
        }
    });
    let signs = DVector::from_fn(k, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
    let eigenvalues = magnitudes.component_mul(&signs);

    const MAX_CONDITION: f64 = 100.0;
    let a = loop {
        let s = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let svd = s.clone().svd(false, false);
        let s_max = svd.singular_values.max();
        let s_min = svd.singular_values.min();
        if s_min <= 0.0 || s_max / s_min > MAX_CONDITION {
            continue;
        }
        let s_inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("similarity transform not invertible".into()))?;
        break &s * DMatrix::from_diagonal(&eigenvalues) * s_inv;
    };

    let b = DMatrix::from_fn(k, actuators, |_, _| rng.sample::<f64, _>(StandardNormal));
    let c = DMatrix::from_fn(sensors, k, |_, _| rng.sample::<f64, _>(StandardNormal));

    let sys = SystemMatrices {
        a,
        b,
        c,
        w: DMatrix::identity(k, k),
        v: DMatrix::identity(sensors, sensors),
        q: DMatrix::identity(k, k),
        r: DMatrix::identity(actuators, actuators),
    };
    sys.validate()?;
    Ok(sys)
}

/// Advances the plant one slot: `saturate(A x + B u_rx + w)` with
/// `w ~ N(0, W)` drawn from `rng` via `noise`.
pub fn step_plant<R: Rng + ?Sized>(
    sys: &SystemMatrices,
    state: &PlantState,
    u_rx: &DVector<f64>,
    noise: &CovSampler,
    rng: &mut R,
) -> Result<PlantState> {
    if u_rx.len() != sys.actuator_count() {
        return Err(Error::Dimension(format!(
            "control input has length {}, expected {}",
            u_rx.len(),
            sys.actuator_count()
        )));
    }
    if u_rx.iter().any(|x| !x.is_finite()) || state.x.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite plant input or state".into()));
    }
    let w = noise.sample(rng);
    let mut x = &sys.a * &state.x + &sys.b * u_rx + w;
    saturate(&mut x);
    Ok(PlantState { x, t: state.t + 1 })
}

/// Clamps each coordinate to the saturation bound.
pub fn saturate(x: &mut DVector<f64>) {
    for xi in x.iter_mut() {
        *xi = xi.clamp(-STATE_BOUND, STATE_BOUND);
    }
}

/// Sensor measurements of the current state: `C x + v`, `v ~ N(0, V)`.
pub fn measure<R: Rng + ?Sized>(
    sys: &SystemMatrices,
    state: &PlantState,
    noise: &CovSampler,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if state.x.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite plant state".into()));
    }
    let v = noise.sample(rng);
    Ok(&sys.c * &state.x + v)
}

/// Masks transmitted signals by the slot's packet outcomes: an actuator
/// without a successful packet applies zero input, a lost sensor packet is
/// zeroed (its value is ignored downstream anyway).
pub fn apply_outcomes(
    u_tx: &DVector<f64>,
    y_tx: &DVector<f64>,
    outcomes: &PacketOutcomes,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if u_tx.len() != outcomes.lambda.len() || y_tx.len() != outcomes.psi.len() {
        return Err(Error::Dimension(
            "packet outcome flags do not match signal dimensions".into(),
        ));
    }
    let u_rx = DVector::from_fn(u_tx.len(), |i, _| if outcomes.lambda[i] { u_tx[i] } else { 0.0 });
    let y_rx = DVector::from_fn(y_tx.len(), |i, _| if outcomes.psi[i] { y_tx[i] } else { 0.0 });
    Ok((u_rx, y_rx))
}
