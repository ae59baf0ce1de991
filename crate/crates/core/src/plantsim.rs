//! Simplified tethered-buoyant-body simulator used as the benchmark
//! co-design objective.
//!
//! The model is a reduced damped-restoring surrogate of a lighter-than-air
//! tethered platform: zenith/azimuth pendulum dynamics under the tether,
//! first-order heading dynamics toward the apparent flow, pitch and roll
//! dynamics restored toward the tether-induced angles plus an aerodynamic
//! trim, three lead-filtered PD loops mapped to tether-winch speeds
//! through a fixed mixing matrix, and a sinusoidal vortex-shedding wind
//! disturbance. The coefficients preserve the qualitative couplings that
//! the co-design optimizer exploits: the trim pitch (and hence the optimal
//! pitch set-point) shifts with the center-of-mass offset and stabilizer
//! area, while heading stiffness scales with stabilizer area.
//!
//! Integration is fixed-step RK4 at `dt = 0.01 s` with the controller
//! updated at 10 Hz (zero-order hold on winch speeds).

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::codesign::{ControlParams, PlantParams};

/// Fixed integrator step, seconds.
pub const DEFAULT_DT: f64 = 0.01;
/// Controller update period, seconds (10 Hz).
pub const CONTROL_PERIOD: f64 = 0.1;
/// Any state magnitude beyond this is treated as numerical divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("simulation diverged at t = {0:.3} s")]
    Diverged(f64),
}

/// Sinusoidal wind disturbance: a steady streamwise base flow plus a
/// single-frequency vortex-shedding oscillation on all three components.
#[derive(Debug, Clone, PartialEq)]
pub struct WindModel {
    /// Steady streamwise speed, m/s.
    pub v_base: f64,
    /// Streamwise oscillation amplitude, m/s.
    pub v_x0: f64,
    /// Lateral oscillation amplitude, m/s.
    pub v_y0: f64,
    /// Vertical oscillation amplitude, m/s.
    pub v_z0: f64,
    /// Shedding frequency, rad/s.
    pub omega_dist: f64,
    /// Phase offset, rad (derived from the episode seed).
    pub phase: f64,
}

impl Default for WindModel {
    /// Water-channel-scale defaults; the 1 Hz shedding frequency is taken
    /// as 2π rad/s.
    fn default() -> Self {
        Self {
            v_base: 0.606,
            v_x0: 0.0866,
            v_y0: 0.065,
            v_z0: 0.0087,
            omega_dist: 2.0 * std::f64::consts::PI,
            phase: 0.0,
        }
    }
}

impl WindModel {
    /// Still air: every component identically zero.
    pub fn disabled() -> Self {
        Self {
            v_base: 0.0,
            v_x0: 0.0,
            v_y0: 0.0,
            v_z0: 0.0,
            omega_dist: 0.0,
            phase: 0.0,
        }
    }
}

/// Wind velocity components at time `t`.
pub fn wind_velocity(t: f64, model: &WindModel) -> (f64, f64, f64) {
    let s = (model.omega_dist * t + model.phase).sin();
    (
        model.v_base + model.v_x0 * s,
        model.v_y0 * s,
        model.v_z0 * s,
    )
}

/// Bridle-joint angles induced by differential tether lengths:
/// roll from the starboard/port difference, pitch from the fore tether
/// against the aft pair.
pub fn induced_angles(l1: f64, l2: f64, l3: f64, long_sep: f64, lat_sep: f64) -> (f64, f64) {
    let induced_roll = ((l3 - l2) / lat_sep).atan();
    let induced_pitch = ((l1 - 0.5 * (l2 + l3)) / long_sep).atan();
    (induced_roll, induced_pitch)
}

/// Physical plant description: the two design variables plus every derived
/// coefficient of the reduced dynamics. Stiffness, damping and trim pitch
/// are affine in `(cm_offset, stab_area)`; the fields are public so tests
/// can probe special configurations (e.g. undamped).
#[derive(Debug, Clone, PartialEq)]
pub struct PlantPhysical {
    pub cm_offset: f64,
    pub stab_area: f64,
    /// Pitch restoring stiffness, 1/s².
    pub pitch_stiffness: f64,
    /// Pitch damping, 1/s.
    pub pitch_damping: f64,
    /// Aerodynamic trim pitch, rad: the pitch the body settles to with
    /// symmetric tethers and steady flow. This is the main coupling
    /// channel between plant design and the optimal pitch set-point.
    pub trim_pitch: f64,
    pub roll_stiffness: f64,
    pub roll_damping: f64,
    pub zenith_stiffness: f64,
    pub zenith_damping: f64,
    pub azimuth_stiffness: f64,
    pub azimuth_damping: f64,
    /// Heading relaxation rate per unit stabilizer area, 1/s.
    pub heading_gain: f64,
    /// Streamwise gust to pitch forcing, rad·s/m.
    pub gust_pitch: f64,
    /// Lateral gust to roll forcing, rad·s/m.
    pub gust_roll: f64,
    /// Dynamic-pressure blow-down of the zenith angle, rad·s²/m².
    pub blowdown: f64,
    /// Extra zenith blow-down from off-trim pitch, rad⁻¹.
    pub pitch_drag: f64,
    /// Lateral wind to azimuth equilibrium, rad·s/m.
    pub side_gain: f64,
    /// Steady streamwise speed subtracted before the gust-to-pitch term
    /// so the steady wind does not bias the trim; set from the wind model
    /// when a simulator is built, zero in still air.
    pub wind_reference: f64,
    /// Fore/aft bridle separation, m.
    pub long_sep: f64,
    /// Starboard/port bridle separation, m.
    pub lat_sep: f64,
    /// Nominal tether length, m.
    pub tether_nominal: f64,
}

impl PlantPhysical {
    pub fn from_params(params: &PlantParams) -> Result<Self, SimError> {
        let cm = params.cm_offset;
        let a_h = params.stab_area;
        if !(a_h > 0.0 && a_h.is_finite()) {
            return Err(SimError::InvalidParameter("stab_area must be positive"));
        }
        if !cm.is_finite() {
            return Err(SimError::InvalidParameter("cm_offset must be finite"));
        }
        Ok(Self {
            cm_offset: cm,
            stab_area: a_h,
            pitch_stiffness: 2.0 + 1.5 * a_h - 1.2 * cm,
            pitch_damping: 1.2 + 0.8 * a_h,
            trim_pitch: 0.08 + 0.25 * cm - 0.05 * (a_h - 1.25),
            roll_stiffness: 3.0,
            roll_damping: 1.5,
            zenith_stiffness: 0.5,
            zenith_damping: 0.6,
            azimuth_stiffness: 0.5,
            azimuth_damping: 0.6,
            heading_gain: 0.8,
            gust_pitch: 0.3,
            gust_roll: 0.5,
            blowdown: 0.4,
            pitch_drag: 0.5,
            side_gain: 0.5,
            wind_reference: 0.0,
            long_sep: 1.5,
            lat_sep: 1.0,
            tether_nominal: 10.0,
        })
    }
}

/// One lead-filtered PD loop `(k_d s + k_p)/(τ s + 1)`. Gains carry their
/// loop sign: the pitch and roll loops use negative gains because
/// lengthening the aft tethers (positive speed command) *reduces* the
/// induced angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadGains {
    pub kp: f64,
    pub kd: f64,
    pub tau: f64,
}

impl LeadGains {
    /// Exact zero-order-hold discretization over `dt`: output
    /// `y = (k_d/τ)e + w` with internal state
    /// `w⁺ = e^{−dt/τ} w + (k_p − k_d/τ)(1 − e^{−dt/τ}) e`.
    pub fn step(&self, error: f64, state: &mut f64, dt: f64) -> f64 {
        let y = self.kd / self.tau * error + *state;
        let decay = (-dt / self.tau).exp();
        *state = decay * *state + (self.kp - self.kd / self.tau) * (1.0 - decay) * error;
        y
    }
}

/// Gains for the altitude, pitch and roll loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSet {
    pub altitude: LeadGains,
    pub pitch: LeadGains,
    pub roll: LeadGains,
}

impl Default for GainSet {
    /// Closed-loop time constants of a few seconds at the default plant,
    /// with the geometric sign convention folded into the pitch/roll
    /// gains.
    fn default() -> Self {
        Self {
            altitude: LeadGains {
                kp: 0.2,
                kd: 0.4,
                tau: 1.0,
            },
            pitch: LeadGains {
                kp: -0.2,
                kd: -0.4,
                tau: 1.0,
            },
            roll: LeadGains {
                kp: -0.2,
                kd: -0.4,
                tau: 1.0,
            },
        }
    }
}

/// Tether-speed mixing: `u = M v̄` with rows (center, starboard, port).
pub fn mixing_matrix() -> Matrix3<f64> {
    Matrix3::new(1.0, -1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0)
}

/// Map filter outputs `(v̄_z, v̄_θ, v̄_φ)` to tether speeds.
pub fn mix_controls(vbar: [f64; 3]) -> [f64; 3] {
    let u = mixing_matrix() * Vector3::new(vbar[0], vbar[1], vbar[2]);
    [u[0], u[1], u[2]]
}

/// Recover filter outputs from tether speeds (matrix inverse).
pub fn unmix_controls(u: [f64; 3]) -> [f64; 3] {
    let inv = mixing_matrix()
        .try_inverse()
        .expect("mixing matrix is invertible");
    let v = inv * Vector3::new(u[0], u[1], u[2]);
    [v[0], v[1], v[2]]
}

/// Complete simulator state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub sim_time: f64,
    /// Zenith angle Φ, rad.
    pub zenith: f64,
    pub zenith_rate: f64,
    /// Azimuth angle Θ, rad.
    pub azimuth: f64,
    pub azimuth_rate: f64,
    /// Twist/heading Ψ, rad (first-order dynamics).
    pub heading: f64,
    /// Body pitch θ, rad.
    pub pitch: f64,
    pub pitch_rate: f64,
    /// Body roll φ, rad.
    pub roll: f64,
    pub roll_rate: f64,
    /// Tether lengths (center, starboard, port), m.
    pub tether: [f64; 3],
    /// Lead-filter internal states (altitude, pitch, roll loops).
    pub filter_states: [f64; 3],
    /// Pitch set-point applied while this sample was taken, rad.
    pub theta_sp: f64,
    /// Instantaneous flow heading atan2(v_y, v_x), rad.
    pub psi_flow: f64,
}

impl SimState {
    /// Equilibrium at rest: symmetric tethers, pitch at the aerodynamic
    /// trim, everything else zero.
    pub fn equilibrium(plant: &PlantPhysical) -> Self {
        Self {
            sim_time: 0.0,
            zenith: 0.0,
            zenith_rate: 0.0,
            azimuth: 0.0,
            azimuth_rate: 0.0,
            heading: 0.0,
            pitch: plant.trim_pitch,
            pitch_rate: 0.0,
            roll: 0.0,
            roll_rate: 0.0,
            tether: [plant.tether_nominal; 3],
            filter_states: [0.0; 3],
            theta_sp: plant.trim_pitch,
            psi_flow: 0.0,
        }
    }

    /// Mean tether length, the altitude surrogate tracked by the z loop.
    pub fn tether_length(&self) -> f64 {
        (self.tether[0] + self.tether[1] + self.tether[2]) / 3.0
    }

    pub fn induced(&self, plant: &PlantPhysical) -> (f64, f64) {
        induced_angles(
            self.tether[0],
            self.tether[1],
            self.tether[2],
            plant.long_sep,
            plant.lat_sep,
        )
    }

    fn is_finite_and_bounded(&self) -> bool {
        let vals = [
            self.zenith,
            self.zenith_rate,
            self.azimuth,
            self.azimuth_rate,
            self.heading,
            self.pitch,
            self.pitch_rate,
            self.roll,
            self.roll_rate,
            self.tether[0],
            self.tether[1],
            self.tether[2],
            self.filter_states[0],
            self.filter_states[1],
            self.filter_states[2],
        ];
        vals.iter()
            .all(|v| v.is_finite() && v.abs() < DIVERGENCE_LIMIT)
            && self.zenith.abs() < std::f64::consts::FRAC_PI_2
            && self.tether.iter().all(|&l| l > 0.0)
    }
}

/// One lead-filter controller update at the control rate. Mutates the
/// filter states inside `state` and returns the tether speed commands
/// (center, starboard, port). The roll set-point is always zero.
pub fn controller_step(
    state: &mut SimState,
    setpoints: (f64, f64, f64),
    gains: &GainSet,
    dt: f64,
) -> [f64; 3] {
    assert!(dt > 0.0, "control period must be positive");
    let (z_sp, theta_sp, _phi_sp_ignored) = setpoints;
    let phi_sp = 0.0;
    let z_err = z_sp - state.tether_length();
    let theta_err = theta_sp - state.pitch;
    let phi_err = phi_sp - state.roll;
    let vbar = [
        gains
            .altitude
            .step(z_err, &mut state.filter_states[0], dt),
        gains.pitch.step(theta_err, &mut state.filter_states[1], dt),
        gains.roll.step(phi_err, &mut state.filter_states[2], dt),
    ];
    mix_controls(vbar)
}

/// Continuous coordinates advanced by RK4 (tether lengths included; winch
/// speeds are constant over a step).
const N_CONT: usize = 12;

fn pack(state: &SimState) -> [f64; N_CONT] {
    [
        state.zenith,
        state.zenith_rate,
        state.azimuth,
        state.azimuth_rate,
        state.heading,
        state.pitch,
        state.pitch_rate,
        state.roll,
        state.roll_rate,
        state.tether[0],
        state.tether[1],
        state.tether[2],
    ]
}

fn unpack(y: &[f64; N_CONT], state: &mut SimState) {
    state.zenith = y[0];
    state.zenith_rate = y[1];
    state.azimuth = y[2];
    state.azimuth_rate = y[3];
    state.heading = y[4];
    state.pitch = y[5];
    state.pitch_rate = y[6];
    state.roll = y[7];
    state.roll_rate = y[8];
    state.tether = [y[9], y[10], y[11]];
}

fn derivatives(
    y: &[f64; N_CONT],
    plant: &PlantPhysical,
    controls: [f64; 3],
    wind: (f64, f64, f64),
) -> [f64; N_CONT] {
    let (vx, vy, _vz) = wind;
    let (induced_roll, induced_pitch) =
        induced_angles(y[9], y[10], y[11], plant.long_sep, plant.lat_sep);
    let v_h2 = vx * vx + vy * vy;
    let psi_flow = if v_h2 > 1e-12 { vy.atan2(vx) } else { 0.0 };

    // Aerodynamic forcing terms.
    let pitch_forcing = plant.trim_pitch + plant.gust_pitch * (vx - plant.wind_reference);
    let roll_forcing = plant.gust_roll * vy;
    let zenith_eq = plant.blowdown * v_h2
        + plant.pitch_drag * (y[5] - pitch_forcing) * (y[5] - pitch_forcing);
    let azimuth_eq = plant.side_gain * vy;

    [
        y[1],
        -plant.zenith_stiffness * (y[0] - zenith_eq) - plant.zenith_damping * y[1],
        y[3],
        -plant.azimuth_stiffness * (y[2] - azimuth_eq) - plant.azimuth_damping * y[3],
        -plant.heading_gain * plant.stab_area * (y[4] - psi_flow),
        y[6],
        -plant.pitch_stiffness * (y[5] - induced_pitch - pitch_forcing)
            - plant.pitch_damping * y[6],
        y[8],
        -plant.roll_stiffness * (y[7] - induced_roll - roll_forcing) - plant.roll_damping * y[8],
        controls[0],
        controls[1],
        controls[2],
    ]
}

/// One fixed RK4 step with frozen winch speeds and frozen wind.
pub fn step_dynamics(
    state: &SimState,
    plant: &PlantPhysical,
    controls: [f64; 3],
    wind: (f64, f64, f64),
    dt: f64,
) -> Result<SimState, SimError> {
    rk4_step(state, plant, controls, &|_| wind, dt)
}

/// RK4 step with the wind sampled at the substage times, preserving
/// fourth-order accuracy under the sinusoidal disturbance.
pub fn step_dynamics_with_wind(
    state: &SimState,
    plant: &PlantPhysical,
    controls: [f64; 3],
    wind: &WindModel,
    dt: f64,
) -> Result<SimState, SimError> {
    rk4_step(state, plant, controls, &|t| wind_velocity(t, wind), dt)
}

fn rk4_step(
    state: &SimState,
    plant: &PlantPhysical,
    controls: [f64; 3],
    wind_at: &dyn Fn(f64) -> (f64, f64, f64),
    dt: f64,
) -> Result<SimState, SimError> {
    assert!(dt > 0.0 && dt <= 0.05, "dt must be in (0, 0.05]");
    let t = state.sim_time;
    let y0 = pack(state);
    let k1 = derivatives(&y0, plant, controls, wind_at(t));
    let mut y = [0.0; N_CONT];
    for i in 0..N_CONT {
        y[i] = y0[i] + 0.5 * dt * k1[i];
    }
    let wind_mid = wind_at(t + 0.5 * dt);
    let k2 = derivatives(&y, plant, controls, wind_mid);
    for i in 0..N_CONT {
        y[i] = y0[i] + 0.5 * dt * k2[i];
    }
    let k3 = derivatives(&y, plant, controls, wind_mid);
    for i in 0..N_CONT {
        y[i] = y0[i] + dt * k3[i];
    }
    let wind_end = wind_at(t + dt);
    let k4 = derivatives(&y, plant, controls, wind_end);
    let mut y1 = [0.0; N_CONT];
    for i in 0..N_CONT {
        y1[i] = y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let mut next = state.clone();
    unpack(&y1, &mut next);
    next.sim_time = t + dt;
    let (vx, vy, _) = wind_end;
    next.psi_flow = if vx * vx + vy * vy > 1e-12 {
        vy.atan2(vx)
    } else {
        0.0
    };
    if !next.is_finite_and_bounded() {
        return Err(SimError::Diverged(next.sim_time));
    }
    Ok(next)
}

/// A persistent closed-loop simulator: the state survives across
/// successive windows so control parameters can be adapted mid-experiment.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub plant: PlantPhysical,
    pub wind: WindModel,
    pub gains: GainSet,
    pub state: SimState,
    pub z_setpoint: f64,
    pub dt: f64,
    pub control_period: f64,
    diverged: bool,
}

impl Simulator {
    /// New simulator at the plant's equilibrium, with the wind phase
    /// derived from the seed.
    pub fn new(params: &PlantParams, wind: WindModel, seed: u64) -> Result<Self, SimError> {
        let mut plant = PlantPhysical::from_params(params)?;
        let mut wind = wind;
        wind.phase = seed_phase(seed);
        plant.wind_reference = wind.v_base;
        let state = SimState::equilibrium(&plant);
        let z_setpoint = state.tether_length();
        Ok(Self {
            plant,
            wind,
            gains: GainSet::default(),
            state,
            z_setpoint,
            dt: DEFAULT_DT,
            control_period: CONTROL_PERIOD,
            diverged: false,
        })
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    /// Advance the closed loop for `duration` seconds under the given
    /// pitch set-point, sampling the state at the control rate. Returns
    /// the sampled history (empty after divergence).
    pub fn run_window(&mut self, theta_sp: f64, duration: f64) -> Result<Vec<SimState>, SimError> {
        assert!(duration > 0.0, "window duration must be positive");
        if self.diverged {
            return Err(SimError::Diverged(self.state.sim_time));
        }
        let steps_per_control = (self.control_period / self.dt).round() as usize;
        let n_controls = (duration / self.control_period).round().max(1.0) as usize;
        let mut history = Vec::with_capacity(n_controls + 1);
        self.state.theta_sp = theta_sp;
        history.push(self.state.clone());
        for _ in 0..n_controls {
            let controls = controller_step(
                &mut self.state,
                (self.z_setpoint, theta_sp, 0.0),
                &self.gains,
                self.control_period,
            );
            for _ in 0..steps_per_control {
                match step_dynamics_with_wind(&self.state, &self.plant, controls, &self.wind, self.dt)
                {
                    Ok(next) => self.state = next,
                    Err(e) => {
                        self.diverged = true;
                        return Err(e);
                    }
                }
            }
            history.push(self.state.clone());
        }
        Ok(history)
    }
}

fn seed_phase(seed: u64) -> f64 {
    let mixed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 11;
    mixed as f64 / (1u64 << 53) as f64 * 2.0 * std::f64::consts::PI
}

/// Run a standalone closed-loop episode at a fixed pitch set-point and
/// return the state history sampled at the control rate.
pub fn run_episode(
    plant: &PlantParams,
    control: &ControlParams,
    wind: WindModel,
    duration: f64,
    seed: u64,
) -> Result<Vec<SimState>, SimError> {
    let mut sim = Simulator::new(plant, wind, seed)?;
    sim.run_window(control.pitch_setpoint, duration)
}

/// Export a state history as tab-separated text with a one-line header.
pub fn history_to_delimited(history: &[SimState], plant: &PlantPhysical) -> String {
    let mut out = String::from(
        "time\tzenith\tazimuth\theading\tpitch\troll\tinduced_pitch\tinduced_roll\tl_center\tl_stbd\tl_port\ttheta_sp\tpsi_flow\n",
    );
    for s in history {
        let (ir, ip) = s.induced(plant);
        out.push_str(&format!(
            "{:.3}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\n",
            s.sim_time,
            s.zenith,
            s.azimuth,
            s.heading,
            s.pitch,
            s.roll,
            ip,
            ir,
            s.tether[0],
            s.tether[1],
            s.tether[2],
            s.theta_sp,
            s.psi_flow,
        ));
    }
    out
}
