//! Small-scale channel draws for one Monte Carlo trial.

use std::io::{self, Write};

use rand::Rng;

use crate::rng::complex_normal_matrix;
use crate::{CMat, Scenario, SystemConfig};

#[allow(non_snake_case)]
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// M×K user channels, unit-variance entries.
    pub H: CMat,
    /// M×N_t radar-transmit → BS channel, known part (variance η_I − η_e).
    pub G_rb_hat: CMat,
    /// Unknown part of the same channel (variance η_e).
    pub G_rb_err: CMat,
    /// N_r×M BS → radar-receive channel, known part.
    pub G_br_hat: CMat,
    pub G_br_err: CMat,
    /// N_t×K, column k is the radar → user k channel (variance η_rk).
    pub g_rk: CMat,
    /// N_r×K, column k is the user k → radar channel (variance η_rk).
    pub g_kr: CMat,
}

#[allow(non_snake_case)]
impl ChannelRealization {
    pub fn G_rb(&self) -> CMat {
        &self.G_rb_hat + &self.G_rb_err
    }

    pub fn G_br(&self) -> CMat {
        &self.G_br_hat + &self.G_br_err
    }

    /// Debug dump: 8-byte magic, then for each block a little-endian
    /// `u32 rows, u32 cols` header followed by row-major interleaved
    /// `re, im` f64 pairs. Block order is H, G_rb_hat, G_rb_err, G_br_hat,
    /// G_br_err, g_rk, g_kr.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(DUMP_MAGIC)?;
        for m in self.blocks() {
            w.write_all(&(m.nrows() as u32).to_le_bytes())?;
            w.write_all(&(m.ncols() as u32).to_le_bytes())?;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    w.write_all(&m[(i, j)].re.to_le_bytes())?;
                    w.write_all(&m[(i, j)].im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    fn blocks(&self) -> [&CMat; 7] {
        [
            &self.H,
            &self.G_rb_hat,
            &self.G_rb_err,
            &self.G_br_hat,
            &self.G_br_err,
            &self.g_rk,
            &self.g_kr,
        ]
    }
}

pub const DUMP_MAGIC: &[u8; 8] = b"JRCREAL1";

/// Read back the blocks written by [`ChannelRealization::write_binary`].
pub fn read_binary_blocks(bytes: &[u8]) -> io::Result<Vec<CMat>> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    if bytes.len() < 8 || &bytes[..8] != DUMP_MAGIC {
        return Err(bad("missing realization magic"));
    }
    let mut pos = 8;
    let mut take = |n: usize| -> io::Result<&[u8]> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| bad("truncated dump"))?;
        pos += n;
        Ok(s)
    };
    let mut out = Vec::new();
    while out.len() < 7 {
        let rows = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let re = f64::from_le_bytes(take(8)?.try_into().unwrap());
                let im = f64::from_le_bytes(take(8)?.try_into().unwrap());
                m[(i, j)] = crate::C64::new(re, im);
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// Draw every small-scale channel for one trial. Stream order is fixed:
/// H, Ĝ_rb, G̃_rb, Ĝ_br, G̃_br, g_rk, g_kr.
#[allow(non_snake_case)]
pub fn draw_channels<R: Rng + ?Sized>(
    scenario: &Scenario,
    config: &SystemConfig,
    rng: &mut R,
) -> ChannelRealization {
    let (m, k, nt, nr) = (config.M, config.K, config.N_t, config.N_r);
    let H = complex_normal_matrix(rng, m, k, 1.0);
    let G_rb_hat = complex_normal_matrix(rng, m, nt, scenario.eta_hat());
    let G_rb_err = complex_normal_matrix(rng, m, nt, scenario.eta_e);
    let G_br_hat = complex_normal_matrix(rng, nr, m, scenario.eta_hat());
    let G_br_err = complex_normal_matrix(rng, nr, m, scenario.eta_e);
    let mut g_rk = complex_normal_matrix(rng, nt, k, 1.0);
    let mut g_kr = complex_normal_matrix(rng, nr, k, 1.0);
    for (j, &eta) in scenario.eta_rk.iter().enumerate() {
        let s = eta.sqrt();
        g_rk.column_mut(j).scale_mut(s);
        g_kr.column_mut(j).scale_mut(s);
    }
    ChannelRealization {
        H,
        G_rb_hat,
        G_rb_err,
        G_br_hat,
        G_br_err,
        g_rk,
        g_kr,
    }
}
