use std::sync::{Arc, Mutex};

use crate::discretization::{Grid, ScalarField};
use crate::energy::i_bar;
use crate::error::Result;
use crate::profile::{
    discrete_ground_state, ground_state_lambda_derivative, ground_state_newton, GroundStateReport,
    RadialProfile,
};

/// Discrete ground state `Û_λ` on the reference box, with `∂_λÛ`.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub lambda: f64,
    pub values: Vec<f64>,
    pub dlambda: Vec<f64>,
    /// `Ī_λ(Û_λ)`
    pub ibar: f64,
    /// `½ Σ m Û²`, which is `dĪ_λ(Û_λ)/d(λ²)`.
    pub half_mass: f64,
    pub report: GroundStateReport,
}

/// Ground states keyed by `λ`; misses are warm-started from the nearest
/// cached `λ` by a first-order step.
pub struct GroundStateCache {
    prof: Arc<RadialProfile>,
    grid: Arc<Grid>,
    tol: f64,
    entries: Mutex<Vec<Arc<GroundState>>>,
}

const CAPACITY: usize = 64;
/// Largest `|Δλ|` bridged by a warm start.
const WARM_RANGE: f64 = 0.15;

impl GroundStateCache {
    pub fn new(prof: Arc<RadialProfile>, grid: Arc<Grid>, tol: f64) -> Self {
        Self {
            prof,
            grid,
            tol,
            entries: Mutex::new(Vec::new()),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn get(&self, lambda: f64) -> Result<Arc<GroundState>> {
        let nearest = {
            let entries = self.entries.lock().expect("cache lock");
            if let Some(hit) = entries.iter().find(|e| e.lambda == lambda) {
                return Ok(hit.clone());
            }
            entries
                .iter()
                .min_by(|a, b| (a.lambda - lambda).abs().total_cmp(&(b.lambda - lambda).abs()))
                .filter(|e| (e.lambda - lambda).abs() <= WARM_RANGE)
                .cloned()
        };
        let p = self.prof.p;
        let (u, report) = match nearest {
            Some(near) => {
                let d = lambda - near.lambda;
                let start = near.values.iter().zip(&near.dlambda).map(|(u, du)| u + d * du).collect();
                match ground_state_newton(p, lambda, &self.grid, start, self.tol) {
                    Ok(r) => r,
                    Err(_) => discrete_ground_state(&self.prof, lambda, &self.grid, self.tol)?,
                }
            }
            None => discrete_ground_state(&self.prof, lambda, &self.grid, self.tol)?,
        };
        let (du, _) = ground_state_lambda_derivative(p, lambda, &u, 1e-10)?;
        let mass: f64 = u.values().iter().enumerate().map(|(i, v)| self.grid.mass(i) * v * v).sum();
        let state = Arc::new(GroundState {
            lambda,
            ibar: i_bar(&u, lambda, p),
            half_mass: 0.5 * mass,
            values: u.into_values(),
            dlambda: du.into_values(),
            report,
        });
        let mut entries = self.entries.lock().expect("cache lock");
        if entries.len() == CAPACITY {
            entries.remove(0);
        }
        entries.push(state.clone());
        Ok(state)
    }

    /// The cached state as a field on the reference grid.
    pub fn field(&self, state: &GroundState) -> ScalarField {
        ScalarField::new(self.grid.clone(), state.values.clone()).expect("finite ground state")
    }
}
