//! Ordering constraints and narration masks.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{Label, NarrationConstraints, Region, Segmentation, TaskDefinition, VideoInstance};
use crate::error::{Error, Result};
use crate::model::lattice::EmissionMask;
use crate::model::params::{ModelParams, StateSpace};

/// Expanded states `bkg_0, s_1, bkg_1, ..., s_S, bkg_S`.
///
/// State `2j` is `bkg_j`, state `2j - 1` is `s_j` (1-based step `j`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedStateSpace {
    pub n_steps: usize,
    /// Base label of each expanded state.
    pub base: Vec<Label>,
    pub initial: Vec<bool>,
    pub transitions: Vec<Vec<bool>>,
    pub terminal: Vec<bool>,
}

impl OrderedStateSpace {
    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn state_name(&self, state: usize) -> String {
        if state % 2 == 0 {
            format!("bkg{}", state / 2)
        } else {
            format!("s{}", state.div_ceil(2))
        }
    }

    /// State space over a model whose slots are `labels`.
    pub fn to_state_space(&self, labels: &[Label]) -> Result<StateSpace> {
        let slots = self
            .base
            .iter()
            .map(|l| {
                labels
                    .iter()
                    .position(|x| x == l)
                    .ok_or_else(|| Error::Validation(format!("model has no slot for {l}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StateSpace {
            slots,
            initial: self.initial.clone(),
            transitions: self.transitions.clone(),
            terminal: self.terminal.clone(),
            max_regions: Some(self.len()),
        })
    }
}

pub fn build_ordered_space(task: &TaskDefinition) -> OrderedStateSpace {
    let s = task.n_steps();
    let n = 2 * s + 1;
    let base: Vec<Label> = (0..n)
        .map(|i| if i % 2 == 0 { Label::Background } else { Label::Step(i / 2) })
        .collect();
    let mut transitions = vec![vec![false; n]; n];
    for j in 1..=s {
        let step = 2 * j - 1;
        transitions[step][step + 1] = true;
        if j < s {
            transitions[step][step + 2] = true;
        }
        transitions[step - 1][step] = true;
    }
    let mut initial = vec![false; n];
    initial[0] = true;
    initial[1] = true;
    let mut terminal = vec![false; n];
    terminal[n - 1] = true;
    terminal[n - 2] = true;
    OrderedStateSpace {
        n_steps: s,
        base,
        initial,
        transitions,
        terminal,
    }
}

/// Restricts `params` to the ordered state space. Every background state
/// reads the single background slot.
pub fn constrain_params(params: &ModelParams, space: &OrderedStateSpace) -> Result<ModelParams> {
    let mut out = params.clone();
    out.space = space.to_state_space(&params.labels)?;
    out.validate()?;
    Ok(out)
}

/// Mask that penalizes step `j` outside its allowed intervals. Steps with
/// no entry, and every background state, stay allowed.
///
/// With `space` the columns are its expanded states; otherwise they follow
/// `labels`.
pub fn narration_mask(
    video: &VideoInstance,
    constraints: &NarrationConstraints,
    labels: &[Label],
    space: Option<&OrderedStateSpace>,
    penalty: f64,
) -> Result<EmissionMask> {
    let t_len = video.len();
    let columns: Vec<Label> = match space {
        Some(s) => s.base.clone(),
        None => labels.to_vec(),
    };
    let mut allowed = Array2::from_elem((t_len, columns.len()), true);
    for (&step, intervals) in constraints {
        if let Some(iv) = intervals.iter().find(|iv| !iv.fits(t_len)) {
            return Err(Error::Validation(format!(
                "video {}: constraint [{}, {}) for step {step} outside [0, {t_len})",
                video.id, iv.start, iv.end
            )));
        }
        for (c, label) in columns.iter().enumerate() {
            if *label != Label::Step(step) {
                continue;
            }
            for t in 0..t_len {
                allowed[[t, c]] = intervals.iter().any(|iv| iv.contains(t));
            }
        }
    }
    Ok(EmissionMask { allowed, penalty })
}

/// Replaces expanded states by base labels and merges equal neighbours.
pub fn merge_background(seg: &Segmentation<usize>, space: &OrderedStateSpace) -> Segmentation<Label> {
    seg.map(|state| space.base[state]).coalesce()
}

/// True iff the region labels contain every step exactly once, in order.
pub fn is_canonical_order(seg: &Segmentation<Label>, n_steps: usize) -> bool {
    let steps: Vec<usize> = seg.regions.iter().filter_map(|r: &Region<Label>| r.label.step()).collect();
    steps == (0..n_steps).collect::<Vec<_>>()
}
