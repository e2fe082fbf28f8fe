//! Bachelier market `S_t = S_0 + sigma W_t` and the two-fixing Asian call
//! `H = ((S_{T/2} + S_T)/2 - K)^+`.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::normal;
use crate::rng::PathRng;

/// Market and contract data of the discrete Asian call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BachelierAsianSpec {
    pub s0: f64,
    pub sigma: f64,
    pub strike: f64,
    pub horizon: f64,
}

impl BachelierAsianSpec {
    pub fn new(s0: f64, sigma: f64, strike: f64, horizon: f64) -> Result<Self> {
        let s = Self { s0, sigma, strike, horizon };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return domain(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return domain("horizon must be positive");
        }
        if !(self.s0.is_finite() && self.strike.is_finite()) {
            return domain("spot and strike must be finite");
        }
        Ok(())
    }

    pub fn fixing_time(&self) -> f64 {
        0.5 * self.horizon
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t < self.horizon) {
            return domain(format!("Asian analytics need 0 <= t < T, got {t}"));
        }
        Ok(())
    }

    fn fixing(&self, t: f64, s_half: Option<f64>) -> Result<f64> {
        s_half.ok_or_else(|| {
            Error::State(format!("S at the fixing date T/2 is required at t = {t}"))
        })
    }

    /// Option price at `t`; `s_half` is required once the first fixing has happened.
    pub fn price(&self, t: f64, s: f64, s_half: Option<f64>) -> Result<f64> {
        self.check_time(t)?;
        if t < self.fixing_time() {
            let vol = self.sigma * (0.625 * self.horizon - t).sqrt();
            let d = (s - self.strike) / vol;
            Ok(vol * normal::pdf(d) + (s - self.strike) * normal::cdf(d))
        } else {
            let fix = self.fixing(t, s_half)?;
            let vol = self.sigma * (self.horizon - t).sqrt();
            let d = (fix + s - 2.0 * self.strike) / vol;
            Ok(0.5 * vol * normal::pdf(d) + (0.5 * (fix + s) - self.strike) * normal::cdf(d))
        }
    }

    /// Frictionless delta: `Φ((S-K)/(σ√(5T/8-t)))` up to `T/2`, `½Φ((S_{T/2}+S-2K)/(σ√(T-t)))` after.
    pub fn delta(&self, t: f64, s: f64, s_half: Option<f64>) -> Result<f64> {
        self.check_time(t)?;
        if t <= self.fixing_time() {
            Ok(self.delta_before_fixing(t, s))
        } else {
            let fix = self.fixing(t, s_half)?;
            Ok(self.delta_after_fixing(t, s, fix))
        }
    }

    /// Value held on `(t, t + dt)`: equals [`delta`](Self::delta) except at `t = T/2`,
    /// where it is the post-fixing branch with `S_{T/2} = s`.
    pub fn delta_right(&self, t: f64, s: f64, s_half: Option<f64>) -> Result<f64> {
        if t == self.fixing_time() {
            return Ok(self.delta_after_fixing(t, s, s));
        }
        self.delta(t, s, s_half)
    }

    pub(crate) fn delta_before_fixing(&self, t: f64, s: f64) -> f64 {
        normal::cdf((s - self.strike) / (self.sigma * (0.625 * self.horizon - t).sqrt()))
    }

    pub(crate) fn delta_after_fixing(&self, t: f64, s: f64, fix: f64) -> f64 {
        let vol = self.sigma * (self.horizon - t).sqrt();
        0.5 * normal::cdf((fix + s - 2.0 * self.strike) / vol)
    }

    /// `ξ_{T/2+} - ξ_{T/2-} = -½ Φ((S_{T/2} - K)/(σ√(T/8)))`.
    pub fn delta_jump(&self, s_half: f64) -> f64 {
        -0.5 * normal::cdf((s_half - self.strike) / (self.sigma * (0.125 * self.horizon).sqrt()))
    }

    pub fn payoff(&self, s_half: f64, s_end: f64) -> f64 {
        (0.5 * (s_half + s_end) - self.strike).max(0.0)
    }
}

/// Row-major block of simulated paths sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub seed: u64,
    pub n_paths: usize,
    values: Vec<f64>,
}

impl PathEnsemble {
    pub fn new(grid: TimeGrid, seed: u64, n_paths: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * n_paths {
            return Err(Error::Input(format!(
                "expected {} values for {n_paths} paths on {} nodes, got {}",
                grid.len() * n_paths,
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, seed, n_paths, values })
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.grid.len())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Binary layout (little endian): magic `IHENS001`, `u32` version 1, `u64` node count,
    /// `u64` path count, `u64` seed, node times as `f64`, then the paths row by row as `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(ENSEMBLE_MAGIC)?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.grid.len() as u64).to_le_bytes())?;
        w.write_all(&(self.n_paths as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for t in self.grid.nodes() {
            w.write_all(&t.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != ENSEMBLE_MAGIC {
            return Err(Error::Input("not an ensemble file".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != 1 {
            return Err(Error::Input("unsupported ensemble file version".into()));
        }
        let read_u64 = |r: &mut R| -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        };
        let n_nodes = read_u64(&mut r)? as usize;
        let n_paths = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; count * 8];
            r.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        };
        let grid = TimeGrid::from_nodes(read_f64s(n_nodes)?)?;
        let values = read_f64s(n_nodes * n_paths)?;
        Self::new(grid, seed, n_paths, values)
    }

    /// CSV with a `t` column followed by one column per path.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for i in 0..self.n_paths {
            write!(w, ",path_{i}")?;
        }
        writeln!(w)?;
        for (k, t) in self.grid.nodes().iter().enumerate() {
            write!(w, "{t}")?;
            for p in self.paths() {
                write!(w, ",{}", p[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

const ENSEMBLE_MAGIC: &[u8; 8] = b"IHENS001";

/// Price paths on `grid`; path `i` uses stream `i` of `seed`.
pub fn simulate_paths(
    spec: &BachelierAsianSpec,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if n_paths == 0 {
        return Err(Error::Input("need at least one path".into()));
    }
    let n = grid.len();
    let mut values = vec![0.0; n * n_paths];
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let mut rng = PathRng::new(seed, i as u64);
        fill_path(spec.s0, spec.sigma, grid, &mut rng, row);
    });
    PathEnsemble::new(grid.clone(), seed, n_paths, values)
}

pub(crate) fn fill_path(s0: f64, sigma: f64, grid: &TimeGrid, rng: &mut PathRng, row: &mut [f64]) {
    row[0] = s0;
    for (k, (a, b)) in grid.cells().enumerate() {
        row[k + 1] = row[k] + sigma * (b - a).sqrt() * rng.normal();
    }
}
