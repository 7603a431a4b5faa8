use crate::error::{Result, SdfError};
use crate::model::LatentCode;
use crate::rng;

use super::optim::MomentBuffer;

/// One latent code per training shape together with its optimiser moments.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBank {
    pub(crate) ids: Vec<String>,
    pub(crate) codes: Vec<LatentCode>,
    pub(crate) moments: Vec<MomentBuffer>,
}

impl LatentBank {
    /// Codes drawn from `N(0, std²)`, one independent stream per shape.
    pub fn new(ids: Vec<String>, dim: usize, std: f64, seed: u64) -> Result<Self> {
        let codes = (0..ids.len())
            .map(|i| LatentCode::random(dim, std, &mut rng::stream(seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let moments = (0..ids.len()).map(|_| MomentBuffer::zeros(dim)).collect();
        Ok(LatentBank { ids, codes, moments })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn codes(&self) -> &[LatentCode] {
        &self.codes
    }

    pub fn code(&self, index: usize) -> &LatentCode {
        &self.codes[index]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|i| i == id)
            .ok_or_else(|| SdfError::UnknownShape(id.to_owned()))
    }

    pub fn get(&self, id: &str) -> Result<&LatentCode> {
        Ok(&self.codes[self.index_of(id)?])
    }

    pub fn set_code(&mut self, index: usize, code: LatentCode) -> Result<()> {
        if code.dim() != self.codes[index].dim() {
            return Err(SdfError::DimensionMismatch {
                expected: self.codes[index].dim(),
                actual: code.dim(),
            });
        }
        self.codes[index] = code;
        Ok(())
    }
}
