//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Everything runs on a small grid so each call returns in well under a
//! second in the browser.

use doublewell::grid::{solve_1p, Grid1D, PotentialSpec, SingleParticleBasis};
use doublewell::linalg::C64;
use doublewell::observables::{pair_detection_probabilities, ModalSeries};
use doublewell::twobody::{
    assemble_h2p, diagonalize_2p, evolve_spectral, grid_density, interaction_tensor, localized_initial_state,
    TwoBodySpectrum, TwoBodyState,
};
use wasm_bindgen::prelude::*;

const X_MAX: f64 = 8.0;
const N_GRID: usize = 121;

fn err(e: doublewell::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn basis(a_max: f64, n_cut: usize) -> Result<SingleParticleBasis, doublewell::Error> {
    let grid = Grid1D::new(X_MAX, N_GRID)?;
    solve_1p(&grid, &PotentialSpec::fixed(a_max)?, n_cut, 0.0)
}

/// Lowest `n_levels` one-particle energies at each of `steps` barrier
/// heights between 0 and `a_top`, flattened row by row.
#[wasm_bindgen]
pub fn one_body_sweep(a_top: f64, steps: usize, n_levels: usize) -> Result<Vec<f64>, JsError> {
    let mut out = Vec::with_capacity(steps * n_levels);
    for k in 0..steps {
        let a = if steps > 1 { a_top * k as f64 / (steps - 1) as f64 } else { a_top };
        let b = basis(a, n_levels).map_err(err)?;
        out.extend_from_slice(b.energies());
    }
    Ok(out)
}

/// Two interacting particles started together in the right well.
#[wasm_bindgen]
pub struct PairDemo {
    b1: SingleParticleBasis,
    spectrum: TwoBodySpectrum,
    start: TwoBodyState,
    series: ModalSeries,
}

#[wasm_bindgen]
impl PairDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(a_max: f64, lambda: f64, n_cut: usize, level: usize) -> Result<PairDemo, JsError> {
        let b1 = basis(a_max, n_cut).map_err(err)?;
        let w = interaction_tensor(&b1, lambda, n_cut).map_err(err)?;
        let spectrum = diagonalize_2p(&assemble_h2p(&b1, &w).map_err(err)?).map_err(err)?;
        let start = localized_initial_state(spectrum.basis(), level).map_err(err)?;
        let series = ModalSeries::new(&spectrum, &b1, &start.to_eigen(&spectrum), 1e-12).map_err(err)?;
        Ok(PairDemo { b1, spectrum, start, series })
    }

    /// Grid points along each axis of [`PairDemo::density`].
    pub fn grid_size(&self) -> usize {
        N_GRID
    }

    pub fn x_max(&self) -> f64 {
        X_MAX
    }

    /// Grid spacing; points sit at cell centres.
    pub fn dx(&self) -> f64 {
        self.b1.grid().dx()
    }

    /// Pair density `|psi(x1, x2, t)|^2`, row-major over `x1`.
    pub fn density(&self, t: f64) -> Result<Vec<f64>, JsError> {
        let c = self.state_at(t);
        let d = grid_density(&TwoBodyState::pair(c, t), self.spectrum.basis(), &self.b1).map_err(err)?;
        let n = d.nrows();
        Ok((0..n * n).map(|k| d[(k / n, k % n)]).collect())
    }

    /// `[P_LL, P_RR, P_LR]` at time `t`.
    pub fn probabilities(&self, t: f64) -> Result<Vec<f64>, JsError> {
        let p = pair_detection_probabilities(&self.state_at(t), self.spectrum.basis(), &self.b1).map_err(err)?;
        Ok(vec![p.p_ll, p.p_rr, p.p_lr])
    }

    /// `samples` rows of `[t, P_LL, P_RR, P_LR]` on `[0, t_end]`, flattened.
    pub fn series(&self, t_end: f64, samples: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * samples);
        for k in 0..samples {
            let t = if samples > 1 { t_end * k as f64 / (samples - 1) as f64 } else { 0.0 };
            let p = self.series.probabilities(t);
            out.extend_from_slice(&[t, p.p_ll, p.p_rr, p.p_lr]);
        }
        out
    }

    /// The lowest two-particle energies.
    pub fn energies(&self, count: usize) -> Vec<f64> {
        self.spectrum.energies().iter().take(count).copied().collect()
    }
}

impl PairDemo {
    fn state_at(&self, t: f64) -> Vec<C64> {
        evolve_spectral(&self.start, &self.spectrum, t).to_pair(&self.spectrum)
    }
}
