//! Binary snapshot of a [`RepresentationModel`], laid out like the posterior
//! snapshot: little-endian header followed by flat `f64` arrays.
//!
//! | type          | field                                   |
//! |---------------|-----------------------------------------|
//! | [u8; 8]       | magic `NLBMODL1`                        |
//! | u32           | user feature width                      |
//! | u32           | content feature width                   |
//! | u32           | activation (0 = tanh, 1 = identity)     |
//! | u32           | number of hidden layers `L`             |
//! | u32 x L       | hidden widths                           |
//! | f64           | learning rate                           |
//! | u64           | initialization seed                     |
//! | u64           | parameter count `P`                     |
//! | f64 x P       | per layer: row-major weights then biases; then head |

use std::io::{Read, Write};

use super::{Activation, NetworkConfig, RepresentationModel};
use crate::binio::*;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NLBMODL1";

impl RepresentationModel {
    pub fn write_snapshot<W: Write>(&self, w: &mut W) -> Result<()> {
        let cfg = self.config();
        w.write_all(MAGIC)?;
        write_u32(w, cfg.user_dim as u32)?;
        write_u32(w, cfg.content_dim as u32)?;
        write_u32(
            w,
            match cfg.activation {
                Activation::Tanh => 0,
                Activation::Identity => 1,
            },
        )?;
        write_u32(w, cfg.hidden.len() as u32)?;
        for &h in &cfg.hidden {
            write_u32(w, h as u32)?;
        }
        write_f64(w, cfg.learning_rate)?;
        write_u64(w, cfg.init_seed)?;
        write_u64(w, self.num_params() as u64)?;
        write_f64s(w, self.params())?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(r: &mut R) -> Result<Self> {
        expect_magic(r, MAGIC)?;
        let user_dim = read_u32(r)? as usize;
        let content_dim = read_u32(r)? as usize;
        let activation = match read_u32(r)? {
            0 => Activation::Tanh,
            1 => Activation::Identity,
            other => return Err(Error::Snapshot(format!("unknown activation {other}"))),
        };
        let n_layers = read_u32(r)? as usize;
        if n_layers > 64 {
            return Err(Error::Snapshot(format!("implausible layer count {n_layers}")));
        }
        let hidden = (0..n_layers)
            .map(|_| read_u32(r).map(|h| h as usize))
            .collect::<Result<Vec<_>>>()?;
        let learning_rate = read_f64(r)?;
        let init_seed = read_u64(r)?;
        let config = NetworkConfig {
            user_dim,
            content_dim,
            hidden,
            activation,
            learning_rate,
            init_seed,
        };
        config.validate().map_err(|e| Error::Snapshot(e.to_string()))?;
        let n = read_u64(r)? as usize;
        let params = read_f64s(r, n)?;
        RepresentationModel::from_raw(config, params)
    }
}
