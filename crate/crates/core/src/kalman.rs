//! Constant-velocity Kalman filter over center-format boxes.
//!
//! The state is `(x, y, w, h, vx, vy, vw, vh)`; the observation is the box
//! `(x, y, w, h)`. Velocities are in pixels per frame and `dt` is one frame.

use nalgebra::{Cholesky, SMatrix, SVector, SymmetricEigen};
use thiserror::Error;

use crate::geometry::{BoundingBox, GeometryError, Measurement};

pub const STATE_DIM: usize = 8;
pub const MEASUREMENT_DIM: usize = 4;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type MeasurementVector = SVector<f64, MEASUREMENT_DIM>;
pub type MeasurementMatrix = SMatrix<f64, MEASUREMENT_DIM, MEASUREMENT_DIM>;
pub type ObservationMatrix = SMatrix<f64, MEASUREMENT_DIM, STATE_DIM>;

/// Innovation covariances with a worse condition number than this are
/// treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KalmanError {
    #[error("state became non-finite")]
    NonFinite,
    #[error("box height {0} is not positive; height-scaled noise is undefined")]
    NonPositiveHeight(f64),
    #[error("innovation covariance is singular (condition number {0:e})")]
    SingularInnovation(f64),
}

/// Mean and covariance of one track's state.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanTrackState {
    pub mean: StateVector,
    pub covariance: StateMatrix,
}

impl KalmanTrackState {
    /// The position/size part of the mean as a box, if it is a valid one.
    pub fn to_box(&self) -> Result<BoundingBox, GeometryError> {
        BoundingBox::new(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite()) && self.covariance.iter().all(|v| v.is_finite())
    }
}

/// How `Q` and `R` are obtained for a given state.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Diagonal noise whose standard deviations are proportional to the
    /// current box height.
    HeightScaled {
        std_weight_position: f64,
        std_weight_velocity: f64,
    },
    /// Constant `Q` and `R`.
    Fixed {
        process: StateMatrix,
        measurement: MeasurementMatrix,
    },
}

/// `F`, `H` and the noise model of the constant-velocity filter.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    transition: StateMatrix,
    observation: ObservationMatrix,
    noise: NoiseModel,
    init_std_weight_position: f64,
    init_std_weight_velocity: f64,
}

impl Default for MotionModel {
    fn default() -> Self {
        Self::with_noise(NoiseModel::HeightScaled {
            std_weight_position: 0.05,
            std_weight_velocity: 0.00625,
        })
    }
}

impl MotionModel {
    pub fn with_noise(noise: NoiseModel) -> Self {
        let dt = 1.0;
        let mut transition = StateMatrix::identity();
        for i in 0..MEASUREMENT_DIM {
            transition[(i, MEASUREMENT_DIM + i)] = dt;
        }
        let mut observation = ObservationMatrix::zeros();
        for i in 0..MEASUREMENT_DIM {
            observation[(i, i)] = 1.0;
        }
        Self {
            transition,
            observation,
            noise,
            init_std_weight_position: 0.1,
            init_std_weight_velocity: 0.0125,
        }
    }

    /// Constant process and measurement noise.
    pub fn with_fixed_noise(process: StateMatrix, measurement: MeasurementMatrix) -> Self {
        Self::with_noise(NoiseModel::Fixed {
            process,
            measurement,
        })
    }

    pub fn transition(&self) -> &StateMatrix {
        &self.transition
    }

    pub fn observation(&self) -> &ObservationMatrix {
        &self.observation
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// `Q` for a step starting from `state`.
    pub fn process_noise(&self, state: &KalmanTrackState) -> Result<StateMatrix, KalmanError> {
        match &self.noise {
            NoiseModel::Fixed { process, .. } => Ok(*process),
            NoiseModel::HeightScaled {
                std_weight_position,
                std_weight_velocity,
            } => {
                let h = positive_height(state.mean[3])?;
                let pos = (std_weight_position * h).powi(2);
                let vel = (std_weight_velocity * h).powi(2);
                Ok(StateMatrix::from_diagonal(&StateVector::from([
                    pos, pos, pos, pos, vel, vel, vel, vel,
                ])))
            }
        }
    }

    /// `R` for an observation of `state`.
    pub fn measurement_noise(
        &self,
        state: &KalmanTrackState,
    ) -> Result<MeasurementMatrix, KalmanError> {
        match &self.noise {
            NoiseModel::Fixed { measurement, .. } => Ok(*measurement),
            NoiseModel::HeightScaled {
                std_weight_position,
                ..
            } => {
                let h = positive_height(state.mean[3])?;
                Ok(MeasurementMatrix::from_diagonal_element(
                    (std_weight_position * h).powi(2),
                ))
            }
        }
    }

    /// Start a track at `m` with zero velocity.
    pub fn initiate(&self, m: &Measurement) -> KalmanTrackState {
        let z = m.as_array();
        let h = z[3];
        let pos = (self.init_std_weight_position * h).powi(2);
        let vel = (self.init_std_weight_velocity * h).powi(2);
        KalmanTrackState {
            mean: StateVector::from([z[0], z[1], z[2], z[3], 0.0, 0.0, 0.0, 0.0]),
            covariance: StateMatrix::from_diagonal(&StateVector::from([
                pos, pos, pos, pos, vel, vel, vel, vel,
            ])),
        }
    }

    /// Advance one frame: `x ← F x`, `P ← F P Fᵀ + Q`. There is no control input.
    pub fn predict(&self, s: &KalmanTrackState) -> Result<KalmanTrackState, KalmanError> {
        let q = self.process_noise(s)?;
        let f = &self.transition;
        let mean = f * s.mean;
        let covariance = symmetrize(f * s.covariance * f.transpose() + q);
        let out = KalmanTrackState { mean, covariance };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(KalmanError::NonFinite)
        }
    }

    /// Project the state into measurement space and factor `S = H P Hᵀ + R`.
    pub fn project(&self, s: &KalmanTrackState) -> Result<Innovation, KalmanError> {
        let r = self.measurement_noise(s)?;
        let h = &self.observation;
        let mean = h * s.mean;
        let covariance = symmetrize(h * s.covariance * h.transpose() + r);
        Innovation::new(mean, covariance)
    }

    /// Correct a predicted state with the observation `z`.
    pub fn update(
        &self,
        s: &KalmanTrackState,
        z: &Measurement,
    ) -> Result<KalmanTrackState, KalmanError> {
        let innovation = self.project(s)?;
        let h = &self.observation;
        let residual = MeasurementVector::from(*z.as_array()) - innovation.mean;
        // K = P Hᵀ S⁻¹ = (S⁻¹ H P)ᵀ since P and S are symmetric.
        let hp = h * s.covariance;
        let gain = innovation.factor.solve(&hp).transpose();
        let mean = s.mean + gain * residual;
        let covariance = symmetrize((StateMatrix::identity() - gain * h) * s.covariance);
        let out = KalmanTrackState { mean, covariance };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(KalmanError::NonFinite)
        }
    }

    /// Squared Mahalanobis distance `yᵀ S⁻¹ y` of the residual `y = z − H x`.
    pub fn gating_distance(
        &self,
        s: &KalmanTrackState,
        z: &Measurement,
    ) -> Result<f64, KalmanError> {
        Ok(self.project(s)?.distance(z))
    }
}

/// Projected measurement distribution with a cached factorization of `S`.
#[derive(Debug, Clone)]
pub struct Innovation {
    pub mean: MeasurementVector,
    pub covariance: MeasurementMatrix,
    factor: Cholesky<f64, nalgebra::Const<MEASUREMENT_DIM>>,
}

impl Innovation {
    pub fn new(
        mean: MeasurementVector,
        covariance: MeasurementMatrix,
    ) -> Result<Self, KalmanError> {
        let factor = factor_spd(&covariance)?;
        Ok(Self {
            mean,
            covariance,
            factor,
        })
    }

    /// `yᵀ S⁻¹ y` for `y = z − mean`.
    pub fn distance(&self, z: &Measurement) -> f64 {
        let residual = MeasurementVector::from(*z.as_array()) - self.mean;
        quadratic_form(&self.factor, &residual)
    }
}

/// `yᵀ S⁻¹ y` for an arbitrary residual and symmetric positive-definite `S`.
pub fn mahalanobis_sq(
    residual: &MeasurementVector,
    covariance: &MeasurementMatrix,
) -> Result<f64, KalmanError> {
    let factor = factor_spd(covariance)?;
    Ok(quadratic_form(&factor, residual))
}

fn quadratic_form(
    factor: &Cholesky<f64, nalgebra::Const<MEASUREMENT_DIM>>,
    residual: &MeasurementVector,
) -> f64 {
    // ‖L⁻¹ y‖² with S = L Lᵀ.
    let l = factor.l_dirty();
    let w = l
        .solve_lower_triangular(residual)
        .expect("cholesky factor has a positive diagonal");
    w.norm_squared()
}

fn factor_spd(
    covariance: &MeasurementMatrix,
) -> Result<Cholesky<f64, nalgebra::Const<MEASUREMENT_DIM>>, KalmanError> {
    if !covariance.iter().all(|v| v.is_finite()) {
        return Err(KalmanError::NonFinite);
    }
    let eig = SymmetricEigen::new(*covariance);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 || max / min > MAX_CONDITION {
        let condition = if min <= 0.0 { f64::INFINITY } else { max / min };
        return Err(KalmanError::SingularInnovation(condition));
    }
    Cholesky::new(*covariance).ok_or(KalmanError::SingularInnovation(max / min))
}

fn positive_height(h: f64) -> Result<f64, KalmanError> {
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(KalmanError::NonPositiveHeight(h))
    }
}

fn symmetrize<const N: usize>(m: SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meas(x: f64, y: f64, w: f64, h: f64) -> Measurement {
        BoundingBox::new(x, y, w, h).unwrap().to_measurement()
    }

    fn state(mean: [f64; 8], covariance: StateMatrix) -> KalmanTrackState {
        KalmanTrackState {
            mean: StateVector::from(mean),
            covariance,
        }
    }

    fn min_eigenvalue(p: &StateMatrix) -> f64 {
        SymmetricEigen::new(*p).eigenvalues.min()
    }

    #[test]
    fn initiate_zero_velocity() {
        let model = MotionModel::default();
        let s = model.initiate(&meas(10.0, 20.0, 4.0, 8.0));
        assert_eq!(
            s.mean.as_slice(),
            &[10.0, 20.0, 4.0, 8.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert!(min_eigenvalue(&s.covariance) > 0.0);
    }

    #[test]
    fn initiate_scales_with_height() {
        let model = MotionModel::default();
        let s = model.initiate(&meas(0.0, 0.0, 1.0, 1.0));
        // h = 1: position std 0.1, velocity std 0.0125
        for i in 0..4 {
            assert!((s.covariance[(i, i)] - 0.01).abs() < 1e-15);
            assert!((s.covariance[(i + 4, i + 4)] - 0.0125f64.powi(2)).abs() < 1e-15);
        }
        let big = model.initiate(&meas(0.0, 0.0, 1.0, 10.0));
        assert!((big.covariance[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn predict_moves_by_velocity() {
        let model = MotionModel::default();
        let s = state(
            [0.0, 0.0, 2.0, 2.0, 1.0, 2.0, 0.0, 0.0],
            StateMatrix::identity(),
        );
        let p = model.predict(&s).unwrap();
        assert_eq!(&p.mean.as_slice()[..4], &[1.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn predict_stationary_fixed_point() {
        let model =
            MotionModel::with_fixed_noise(StateMatrix::zeros(), MeasurementMatrix::identity());
        let s = state(
            [5.0, 6.0, 7.0, 8.0, 0.0, 0.0, 0.0, 0.0],
            StateMatrix::identity(),
        );
        assert_eq!(model.predict(&s).unwrap().mean, s.mean);
    }

    #[test]
    fn predict_covariance_sub_block() {
        // F P Fᵀ with F = [[1,1],[0,1]] and P = I is [[2,1],[1,1]].
        let model =
            MotionModel::with_fixed_noise(StateMatrix::zeros(), MeasurementMatrix::identity());
        let s = state(
            [0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            StateMatrix::identity(),
        );
        let p = model.predict(&s).unwrap().covariance;
        assert_eq!(p[(0, 0)], 2.0);
        assert_eq!(p[(0, 4)], 1.0);
        assert_eq!(p[(4, 0)], 1.0);
        assert_eq!(p[(4, 4)], 1.0);
    }

    #[test]
    fn predict_reports_blow_up() {
        let model =
            MotionModel::with_fixed_noise(StateMatrix::zeros(), MeasurementMatrix::identity());
        let s = state(
            [0.0, 0.0, 1.0, 1.0, f64::MAX, 0.0, 0.0, 0.0],
            StateMatrix::identity() * f64::MAX,
        );
        assert_eq!(model.predict(&s), Err(KalmanError::NonFinite));
    }

    #[test]
    fn update_with_exact_measurement_tracks_z() {
        let model = MotionModel::with_fixed_noise(
            StateMatrix::identity(),
            MeasurementMatrix::identity() * 1e-12,
        );
        let s = model
            .predict(&model.initiate(&meas(10.0, 10.0, 5.0, 5.0)))
            .unwrap();
        let z = meas(13.0, 8.0, 6.0, 4.0);
        let post = model.update(&s, &z).unwrap();
        for (got, want) in post.mean.iter().zip(z.as_array()) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn update_with_uninformative_measurement_keeps_prediction() {
        let model = MotionModel::with_fixed_noise(
            StateMatrix::identity(),
            MeasurementMatrix::identity() * 1e12,
        );
        let s = model
            .predict(&model.initiate(&meas(10.0, 10.0, 5.0, 5.0)))
            .unwrap();
        let post = model.update(&s, &meas(30.0, -8.0, 9.0, 2.0)).unwrap();
        for i in 0..8 {
            let scale = s.mean[i].abs().max(1.0);
            assert!((post.mean[i] - s.mean[i]).abs() / scale < 1e-6);
        }
    }

    #[test]
    fn zero_residual_keeps_mean_shrinks_covariance() {
        let model = MotionModel::default();
        let s = model
            .predict(&model.initiate(&meas(100.0, 50.0, 30.0, 60.0)))
            .unwrap();
        let z = s.to_box().unwrap().to_measurement();
        let post = model.update(&s, &z).unwrap();
        assert_eq!(post.mean, s.mean);
        assert!(post.covariance.trace() < s.covariance.trace());
    }

    #[test]
    fn gating_distance_cases() {
        let model = MotionModel::default();
        let s = model
            .predict(&model.initiate(&meas(100.0, 50.0, 30.0, 60.0)))
            .unwrap();
        let z = s.to_box().unwrap().to_measurement();
        assert_eq!(model.gating_distance(&s, &z).unwrap(), 0.0);

        let y = MeasurementVector::from([1.0, 2.0, 0.0, 0.0]);
        let d = mahalanobis_sq(&y, &MeasurementMatrix::identity()).unwrap();
        assert!((d - 5.0).abs() < 1e-12);

        let y = MeasurementVector::from([2.0, 0.0, 0.0, 0.0]);
        let cov = MeasurementMatrix::from_diagonal(&MeasurementVector::from([4.0, 1.0, 1.0, 1.0]));
        let d = mahalanobis_sq(&y, &cov).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_innovation_rejected() {
        let model = MotionModel::with_fixed_noise(StateMatrix::zeros(), MeasurementMatrix::zeros());
        let s = state(
            [0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            StateMatrix::zeros(),
        );
        let z = meas(0.0, 0.0, 1.0, 1.0);
        assert!(matches!(
            model.update(&s, &z),
            Err(KalmanError::SingularInnovation(_))
        ));
        let bad = MeasurementMatrix::from_diagonal(&MeasurementVector::from([1e13, 1.0, 1.0, 1.0]));
        assert!(matches!(
            mahalanobis_sq(&MeasurementVector::zeros(), &bad),
            Err(KalmanError::SingularInnovation(_))
        ));
    }

    #[test]
    fn noise_free_target_converges() {
        // Q = 0 and measurements with negligible noise.
        let model = MotionModel::with_fixed_noise(
            StateMatrix::zeros(),
            MeasurementMatrix::identity() * 1e-8,
        );
        let truth = |t: f64| meas(200.0 + 3.0 * t, 100.0 - 2.0 * t, 40.0, 80.0 + 0.5 * t);
        let mut s = model.initiate(&truth(0.0));
        let mut last = f64::INFINITY;
        for t in 1..=5 {
            let predicted = model.predict(&s).unwrap();
            last = model.gating_distance(&predicted, &truth(t as f64)).unwrap();
            s = model.update(&predicted, &truth(t as f64)).unwrap();
        }
        assert!(last < 1e-6, "gating distance after 5 steps: {last}");
    }

    fn arb_state() -> impl Strategy<Value = KalmanTrackState> {
        (
            prop::array::uniform4(-500.0..500.0f64),
            10.0..200.0f64,
            10.0..200.0f64,
            prop::array::uniform4(-10.0..10.0f64),
        )
            .prop_map(|(pos, w, h, vel)| {
                let model = MotionModel::default();
                let mut s = model.initiate(&meas(pos[0], pos[1], w, h));
                for i in 0..4 {
                    s.mean[4 + i] = vel[i];
                }
                s
            })
    }

    proptest! {
        #[test]
        fn update_never_increases_trace(s in arb_state(), dz in prop::array::uniform4(-30.0..30.0f64)) {
            let model = MotionModel::default();
            let p = model.predict(&s).unwrap();
            let b = p.to_box().unwrap();
            let z = meas(b.x() + dz[0], b.y() + dz[1], (b.w() + dz[2]).max(1.0), (b.h() + dz[3]).max(1.0));
            let post = model.update(&p, &z).unwrap();
            prop_assert!(post.covariance.trace() <= p.covariance.trace());
            prop_assert_eq!(post.covariance, post.covariance.transpose());
            prop_assert!(min_eigenvalue(&post.covariance) >= -1e-9 * post.covariance.trace());
        }

        #[test]
        fn mahalanobis_congruence_invariant(
            y in prop::array::uniform4(-5.0..5.0f64),
            a in prop::array::uniform16(-2.0..2.0f64),
            d in prop::array::uniform4(0.5..5.0f64),
        ) {
            let transform = SMatrix::<f64, 4, 4>::from_row_slice(&a) + MeasurementMatrix::identity() * 3.0;
            prop_assume!(transform.determinant().abs() > 0.5);
            let y = MeasurementVector::from(y);
            let s = MeasurementMatrix::from_diagonal(&MeasurementVector::from(d));
            let base = mahalanobis_sq(&y, &s).unwrap();
            let s2 = symmetrize(transform * s * transform.transpose());
            let moved = mahalanobis_sq(&(transform * y), &s2).unwrap();
            prop_assert!((base - moved).abs() <= 1e-8 * base.max(1.0));
        }
    }
}
