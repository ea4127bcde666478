//! Observation layout: which latent function values each game touches.
//!
//! A game between row member `m` and column member `n` at side information `x`
//! contributes two matrix entries: `Y_mn(x)` and `Y_nm(x')`, where `x'` is `x`
//! seen from `n` (home indicator flipped). Function values are stored once per
//! unique input point of each member.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{DpmfError, Result};
use crate::kernels::{InputSpace, SideInfoPoint};
use crate::latent::{softplus, LatentState, ModelParams, ModelShape, Side, MAX_FEATURES};
use crate::likelihood::{bivariate_logpdf, GameObservation};

/// Indices into members' input lists for both entries of one game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameSlots {
    /// Row member's U input for `Y_mn`.
    pub fwd_u: usize,
    /// Column member's V input for `Y_mn`.
    pub fwd_v: usize,
    /// Column member's U input for `Y_nm`.
    pub rev_u: usize,
    /// Row member's V input for `Y_nm`.
    pub rev_v: usize,
}

#[derive(Debug, Clone)]
pub struct Design {
    pub shape: ModelShape,
    pub space: InputSpace,
    pub games: Vec<GameObservation>,
    pub u_inputs: Arc<Vec<Vec<SideInfoPoint>>>,
    pub v_inputs: Arc<Vec<Vec<SideInfoPoint>>>,
    pub slots: Vec<GameSlots>,
    /// Games each member takes part in.
    pub member_games: Vec<Vec<usize>>,
}

/// Candidate function values replacing one member's stored values on one side.
#[derive(Debug, Clone, Copy)]
pub struct Override<'a> {
    pub side: Side,
    pub member: usize,
    pub f: &'a [DVector<f64>],
}

struct InputIndex {
    points: Vec<Vec<SideInfoPoint>>,
    lookup: Vec<HashMap<Vec<u64>, usize>>,
}

impl InputIndex {
    fn new(members: usize) -> Self {
        Self {
            points: vec![Vec::new(); members],
            lookup: vec![HashMap::new(); members],
        }
    }

    fn insert(&mut self, member: usize, x: &SideInfoPoint) -> usize {
        let next = self.points[member].len();
        let idx = *self.lookup[member].entry(x.key()).or_insert(next);
        if idx == next {
            self.points[member].push(x.clone());
        }
        idx
    }
}

impl Design {
    pub fn new(shape: ModelShape, space: InputSpace, games: Vec<GameObservation>) -> Result<Self> {
        if shape.rows != shape.cols {
            return Err(DpmfError::InvalidParameter(format!(
                "paired observations need M = N, got M={} N={}",
                shape.rows, shape.cols
            )));
        }
        if shape.dim != space.dim {
            return Err(DpmfError::DimensionMismatch {
                context: "model shape vs input space dimension",
                expected: space.dim,
                actual: shape.dim,
            });
        }
        let members = shape.rows;
        let mut u_idx = InputIndex::new(members);
        let mut v_idx = InputIndex::new(members);
        let mut slots = Vec::with_capacity(games.len());
        let mut member_games = vec![Vec::new(); members];
        for (g, obs) in games.iter().enumerate() {
            let (m, n) = (obs.row_member, obs.col_member);
            if m >= members || n >= members {
                return Err(DpmfError::UnknownMember(format!(
                    "game {g} references member {} but M = {members}",
                    m.max(n)
                )));
            }
            if m == n {
                return Err(DpmfError::InvalidParameter(format!(
                    "game {g} pairs member {m} with itself"
                )));
            }
            if obs.side_info.dim() != space.dim {
                return Err(DpmfError::DimensionMismatch {
                    context: "observation side information",
                    expected: space.dim,
                    actual: obs.side_info.dim(),
                });
            }
            if !(obs.score_mn.is_finite() && obs.score_nm.is_finite()) {
                return Err(DpmfError::InvalidParameter(format!("game {g} has non-finite scores")));
            }
            let x = &obs.side_info;
            let xr = space.mirror(x);
            slots.push(GameSlots {
                fwd_u: u_idx.insert(m, x),
                fwd_v: v_idx.insert(n, x),
                rev_u: u_idx.insert(n, &xr),
                rev_v: v_idx.insert(m, &xr),
            });
            member_games[m].push(g);
            member_games[n].push(g);
        }
        Ok(Self {
            shape,
            space,
            games,
            u_inputs: Arc::new(u_idx.points),
            v_inputs: Arc::new(v_idx.points),
            slots,
            member_games,
        })
    }

    pub fn inputs(&self, side: Side) -> &Arc<Vec<Vec<SideInfoPoint>>> {
        match side {
            Side::U => &self.u_inputs,
            Side::V => &self.v_inputs,
        }
    }

    pub fn features(&self) -> usize {
        self.shape.features
    }

    /// Latent means `(Y_mn, Y_nm)` for game `g`.
    pub fn y_pair(&self, latent: &LatentState, params: &ModelParams, g: usize) -> (f64, f64) {
        self.y_pair_with(latent, params, g, None)
    }

    pub fn y_pair_with(
        &self,
        latent: &LatentState,
        params: &ModelParams,
        g: usize,
        ov: Option<Override<'_>>,
    ) -> (f64, f64) {
        let obs = &self.games[g];
        let s = self.slots[g];
        let (m, n) = (obs.row_member, obs.col_member);
        let y_mn = entry_y(latent, params, (m, s.fwd_u), (n, s.fwd_v), ov);
        let y_nm = entry_y(latent, params, (n, s.rev_u), (m, s.rev_v), ov);
        (y_mn, y_nm)
    }

    pub fn y_pairs(&self, latent: &LatentState, params: &ModelParams) -> Vec<(f64, f64)> {
        (0..self.games.len())
            .map(|g| self.y_pair(latent, params, g))
            .collect()
    }

    pub fn game_loglik(&self, latent: &LatentState, params: &ModelParams, g: usize, ov: Option<Override<'_>>) -> f64 {
        let (a, b) = self.y_pair_with(latent, params, g, ov);
        let o = &self.games[g];
        bivariate_logpdf(a, b, o.score_mn, o.score_nm, params.lik.sigma, params.lik.rho)
    }

    /// Log likelihood of the games `member` takes part in.
    pub fn member_loglik(
        &self,
        latent: &LatentState,
        params: &ModelParams,
        member: usize,
        ov: Option<Override<'_>>,
    ) -> f64 {
        self.member_games[member]
            .iter()
            .map(|&g| self.game_loglik(latent, params, g, ov))
            .sum()
    }

    pub fn total_loglik(&self, latent: &LatentState, params: &ModelParams) -> f64 {
        (0..self.games.len())
            .map(|g| self.game_loglik(latent, params, g, None))
            .sum()
    }
}

#[inline]
fn raw_value(latent: &LatentState, side: Side, member: usize, k: usize, idx: usize, ov: Option<Override<'_>>) -> f64 {
    match ov {
        Some(o) if o.side == side && o.member == member => o.f[k][idx],
        _ => latent.side(side).blocks[member][k].f[idx],
    }
}

/// Assembled feature vector `L f + mu` for one member at one input, written into `out`.
#[inline]
fn assemble_into(
    latent: &LatentState,
    params: &ModelParams,
    side: Side,
    member: usize,
    idx: usize,
    ov: Option<Override<'_>>,
    out: &mut [f64],
) {
    let k = out.len();
    let mut raw = [0.0; MAX_FEATURES];
    for (j, r) in raw.iter_mut().enumerate().take(k) {
        *r = raw_value(latent, side, member, j, idx, ov);
    }
    let l = params.cross_cov(side).chol();
    let mu = &params.mean(side).mu;
    for i in 0..k {
        let mut s = mu[i];
        for j in 0..=i {
            s += l[(i, j)] * raw[j];
        }
        out[i] = s;
    }
}

#[inline]
fn entry_y(
    latent: &LatentState,
    params: &ModelParams,
    (row, u_idx): (usize, usize),
    (col, v_idx): (usize, usize),
    ov: Option<Override<'_>>,
) -> f64 {
    let k = params.features();
    let mut u = [0.0; MAX_FEATURES];
    let mut v = [0.0; MAX_FEATURES];
    assemble_into(latent, params, Side::U, row, u_idx, ov, &mut u[..k]);
    assemble_into(latent, params, Side::V, col, v_idx, ov, &mut v[..k]);
    (0..k).map(|i| u[i] * softplus(v[i])).sum()
}
