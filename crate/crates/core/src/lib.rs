//! Heat-pump control for residential buildings: a 2R2C thermal model, a
//! heat-pump COP model, an episodic control environment, weather and price
//! data handling, a PPO agent and a model predictive controller.

pub mod data;
pub mod environment;
pub mod error;
pub mod evaluation;
pub mod heat_pump;
pub mod lp;
pub mod mpc;
pub mod normalizer;
pub mod par;
pub mod ppo;
pub mod thermal;
pub mod trace;

pub use error::{Error, Result};
