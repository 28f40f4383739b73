//! Shared flags for choosing the eigenfunction an experiment runs on.

use std::path::PathBuf;

use clap::Args;
use toral_nodal::eigenfun::{
    make_geodesic_vanisher, two_frequency_nodal, Eigenfunction, EigenfunctionDoc,
};
use toral_nodal::lattice::{enumerate_shell, LatticePoint};
use toral_nodal::Error;

#[derive(Debug, Args)]
pub struct PhiSource {
    /// Read the eigenfunction from a JSON file ({d, r2, coeffs}).
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,

    /// Squared frequency radius for a randomly sampled eigenfunction.
    #[arg(long)]
    pub r2: Option<i64>,

    /// Number of frequencies kept in the random sample (0 = full shell).
    #[arg(long, default_value_t = 0)]
    pub support: usize,

    /// RNG seed for the random sample.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Make the random sample real-valued (conjugate pairs).
    #[arg(long, default_value_t = false)]
    pub real: bool,

    /// Geodesic vanisher sin(2 pi n (<xi, x> - c)): frequency as "p,q".
    #[arg(long, value_name = "P,Q")]
    pub vanisher: Option<String>,

    /// Offset c of the vanisher hyperplane.
    #[arg(long, default_value_t = 0.0)]
    pub offset: f64,

    /// Multiplier n of the vanisher.
    #[arg(long, default_value_t = 1)]
    pub vn: u32,

    /// Two-frequency eigenfunction: "p,q;r,s" on a common shell.
    #[arg(long, value_name = "P,Q;R,S")]
    pub two_freq: Option<String>,

    /// Phase offset alpha of the two-frequency family.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
}

fn parse_point(text: &str, d: usize) -> Result<LatticePoint, Error> {
    let coords: Result<Vec<i64>, _> = text.split(',').map(|s| s.trim().parse::<i64>()).collect();
    let coords =
        coords.map_err(|e| Error::InvalidArgument(format!("bad frequency '{text}': {e}")))?;
    if coords.len() != d {
        return Err(Error::InvalidArgument(format!(
            "frequency '{text}' has {} entries, expected {d}",
            coords.len()
        )));
    }
    Ok(LatticePoint::new(coords))
}

impl PhiSource {
    /// Materialize the eigenfunction in dimension `d`.
    pub fn resolve(&self, d: usize) -> Result<Eigenfunction, Error> {
        if let Some(path) = &self.input {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidArgument(format!("cannot read {path:?}: {e}")))?;
            let doc: EigenfunctionDoc = serde_json::from_str(&text)?;
            return Eigenfunction::from_document(&doc);
        }
        if let Some(spec) = &self.two_freq {
            let (a, b) = spec.split_once(';').ok_or_else(|| {
                Error::InvalidArgument("two-freq wants 'p,q;r,s'".into())
            })?;
            let (_, phi) = two_frequency_nodal(&parse_point(a, d)?, &parse_point(b, d)?, self.alpha)?;
            return Ok(phi);
        }
        if let Some(spec) = &self.vanisher {
            return make_geodesic_vanisher(&parse_point(spec, d)?, self.offset, self.vn);
        }
        if let Some(r2) = self.r2 {
            let shell = enumerate_shell(d, r2)?;
            return Eigenfunction::random(&shell, self.seed, self.support, self.real);
        }
        Err(Error::InvalidArgument(
            "no eigenfunction source: pass --input, --r2, --vanisher or --two-freq".into(),
        ))
    }
}
