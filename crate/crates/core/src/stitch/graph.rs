use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::StitchError;
use crate::registration::Homography;

/// Pairwise transforms of a frame sequence. The link stored under `i` maps
/// pixels of frame `i + 1` into frame `i`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameGraph {
    pub frame_count: usize,
    pub reference_index: usize,
    pub links: BTreeMap<usize, Homography>,
}

impl FrameGraph {
    pub fn new(frame_count: usize) -> Self {
        Self {
            frame_count,
            reference_index: 0,
            links: BTreeMap::new(),
        }
    }

    pub fn with_reference(mut self, reference_index: usize) -> Self {
        self.reference_index = reference_index;
        self
    }

    pub fn link(&mut self, i: usize, next_to_this: Homography) {
        self.links.insert(i, next_to_this);
    }

    fn pair(&self, i: usize) -> Result<&Homography, StitchError> {
        self.links
            .get(&i)
            .ok_or(StitchError::BrokenChain { from: i, to: i + 1 })
    }
}

/// Maps every frame into reference-frame pixel coordinates.
pub fn chain_transforms(graph: &FrameGraph) -> Result<Vec<Homography>, StitchError> {
    let n = graph.frame_count;
    if n == 0 {
        return Err(StitchError::EmptyInput);
    }
    let r = graph.reference_index;
    if r >= n {
        return Err(StitchError::InvalidReference { index: r, frames: n });
    }
    let mut globals = vec![Homography::identity(); n];
    for i in r + 1..n {
        globals[i] = globals[i - 1].compose(graph.pair(i - 1)?)?;
    }
    for i in (0..r).rev() {
        globals[i] = globals[i + 1].compose(&graph.pair(i)?.inverse()?)?;
    }
    Ok(globals)
}
