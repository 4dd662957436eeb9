use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use super::{measure, Backend, JetOrder, JetProvider, MeasurementJet, ModelConfig};
use crate::error::{Error, Result};
use crate::motion::Motion;
use crate::numerics::fornberg_weights;
use crate::phantom::Spectral;

type C = Complex64;

/// Finite-difference jets from re-measuring the object at stencil points
/// around `(t, k)`: three time levels (one-sided at the grid ends) and
/// fourth-order tensor stencils in `k`.
pub struct StencilJets<'a> {
    pub object: &'a dyn Spectral,
    pub motion: &'a Motion,
    pub config: ModelConfig,
    dt: f64,
    dk: f64,
}

/// Unit-spacing weights `w[n]` for `n`-th derivatives, with their offsets.
fn unit_stencils() -> &'static [(Vec<i32>, Vec<f64>); 4] {
    static S: OnceLock<[(Vec<i32>, Vec<f64>); 4]> = OnceLock::new();
    S.get_or_init(|| {
        let make = |n: usize, half: i32| {
            let offs: Vec<i32> = (-half..=half).collect();
            let nodes: Vec<f64> = offs.iter().map(|&o| o as f64).collect();
            let w = fornberg_weights(0.0, &nodes, n)[n].clone();
            (offs, w)
        };
        [(vec![0], vec![1.0]), make(1, 2), make(2, 2), make(3, 3)]
    })
}

impl<'a> StencilJets<'a> {
    pub fn new(object: &'a dyn Spectral, motion: &'a Motion, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let Backend::FiniteDifference { dt, dk } = config.backend else {
            return Err(Error::invalid("stencil jets need a finite-difference backend"));
        };
        if motion.times().len() < 2 || 2.0 * dt > motion.grid.t_end - motion.grid.t_start {
            return Err(Error::InsufficientStencil(
                "time step exceeds the sampled interval".into(),
            ));
        }
        Ok(StencilJets {
            object,
            motion,
            config,
            dt,
            dk,
        })
    }

    /// Time offsets and weights for derivative orders 0..=2.
    fn time_stencil(&self, t: f64) -> (Vec<i32>, [Vec<f64>; 3]) {
        let (a, b) = (self.motion.grid.t_start, self.motion.grid.t_end);
        let slack = 1e-12 * (b - a);
        let offs: Vec<i32> = if t - self.dt >= a - slack && t + self.dt <= b + slack {
            vec![-1, 0, 1]
        } else if t + 2.0 * self.dt <= b + slack {
            vec![0, 1, 2]
        } else {
            vec![-2, -1, 0]
        };
        let nodes: Vec<f64> = offs.iter().map(|&o| o as f64 * self.dt).collect();
        let w = fornberg_weights(0.0, &nodes, 2);
        (offs, [w[0].clone(), w[1].clone(), w[2].clone()])
    }
}

impl JetProvider for StencilJets<'_> {
    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn times(&self) -> &[f64] {
        self.motion.times()
    }

    fn jet(&self, t_index: usize, k: &Vector2<f64>, order: JetOrder) -> Result<MeasurementJet> {
        let times = self.motion.times();
        let t = *times
            .get(t_index)
            .ok_or_else(|| Error::OutOfGrid(format!("time index {t_index}")))?;
        let (toffs, tw) = self.time_stencil(t);
        let sp = unit_stencils();
        let mut rot = HashMap::new();
        let mut cache: HashMap<(i32, i32, i32), C> = HashMap::new();
        let mut sample = |i: i32, a: i32, b: i32| -> Result<C> {
            if let Some(v) = cache.get(&(i, a, b)) {
                return Ok(*v);
            }
            let r = match rot.get(&i) {
                Some(r) => *r,
                None => {
                    let r = self.motion.state_at(t + i as f64 * self.dt)?.r;
                    rot.insert(i, r);
                    r
                }
            };
            let kk = k + Vector2::new(a as f64, b as f64) * self.dk;
            let v = measure(self.object, &r, &self.config, &kk)?;
            cache.insert((i, a, b), v);
            Ok(v)
        };
        let mut deriv = |nt: usize, na: usize, nb: usize| -> Result<C> {
            let (ao, aw) = &sp[na];
            let (bo, bw) = &sp[nb];
            let mut s = C::new(0.0, 0.0);
            for (ti, wt) in toffs.iter().zip(&tw[nt]) {
                if *wt == 0.0 {
                    continue;
                }
                for (ai, wa) in ao.iter().zip(aw) {
                    if *wa == 0.0 {
                        continue;
                    }
                    for (bi, wb) in bo.iter().zip(bw) {
                        if *wb == 0.0 {
                            continue;
                        }
                        s += sample(*ti, *ai, *bi)? * (wt * wa * wb);
                    }
                }
            }
            Ok(s / self.dk.powi((na + nb) as i32))
        };
        let mut j = MeasurementJet {
            value: deriv(0, 0, 0)?,
            dt: deriv(1, 0, 0)?,
            grad_k: Vector2::new(deriv(0, 1, 0)?, deriv(0, 0, 1)?),
            ..Default::default()
        };
        if order == JetOrder::First {
            return Ok(j);
        }
        let mixed = deriv(0, 1, 1)?;
        j.hess_k = Matrix2::new(deriv(0, 2, 0)?, mixed, mixed, deriv(0, 0, 2)?);
        let (aaa, aab, abb, bbb) = (deriv(0, 3, 0)?, deriv(0, 2, 1)?, deriv(0, 1, 2)?, deriv(0, 0, 3)?);
        j.third_k = [Matrix2::new(aaa, aab, aab, abb), Matrix2::new(aab, abb, abb, bbb)];
        j.dt_grad_k = Vector2::new(deriv(1, 1, 0)?, deriv(1, 0, 1)?);
        let tm = deriv(1, 1, 1)?;
        j.dt_hess_k = Matrix2::new(deriv(1, 2, 0)?, tm, tm, deriv(1, 0, 2)?);
        j.dtt_grad_k = Vector2::new(deriv(2, 1, 0)?, deriv(2, 0, 1)?);
        Ok(j)
    }
}
