use serde::{Deserialize, Serialize};

/// Role of one cached position in the joint sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    Visual,
    SystemPrompt,
    TextInput,
    Generated,
}

/// Per-position segment labels for the joint visual + text sequence.
///
/// Layout is always `[Visual.., SystemPrompt.., TextInput.., Generated..]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SegmentMap {
    labels: Vec<Segment>,
}

impl SegmentMap {
    pub fn for_prompt(n_visual: usize, n_system: usize, n_input: usize) -> Self {
        let mut labels = Vec::with_capacity(n_visual + n_system + n_input);
        labels.extend(std::iter::repeat_n(Segment::Visual, n_visual));
        labels.extend(std::iter::repeat_n(Segment::SystemPrompt, n_system));
        labels.extend(std::iter::repeat_n(Segment::TextInput, n_input));
        Self { labels }
    }

    /// Labels a new trailing position as generated output.
    pub fn push_generated(&mut self) {
        self.labels.push(Segment::Generated);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Segment] {
        &self.labels
    }

    pub fn get(&self, pos: usize) -> Option<Segment> {
        self.labels.get(pos).copied()
    }

    pub fn indices(&self, segment: Segment) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, s)| **s == segment)
            .map(|(i, _)| i)
    }

    pub fn visual(&self) -> Vec<usize> {
        self.indices(Segment::Visual).collect()
    }

    pub fn system_prompt(&self) -> Vec<usize> {
        self.indices(Segment::SystemPrompt).collect()
    }

    pub fn text_input(&self) -> Vec<usize> {
        self.indices(Segment::TextInput).collect()
    }

    pub fn generated(&self) -> Vec<usize> {
        self.indices(Segment::Generated).collect()
    }

    pub fn n_visual(&self) -> usize {
        self.labels
            .iter()
            .take_while(|s| **s == Segment::Visual)
            .count()
    }

    /// Checks the ordering invariant. Only fails for maps built by hand.
    pub fn is_well_formed(&self) -> bool {
        let rank = |s: &Segment| match s {
            Segment::Visual => 0,
            Segment::SystemPrompt => 1,
            Segment::TextInput => 2,
            Segment::Generated => 3,
        };
        self.labels.windows(2).all(|w| rank(&w[0]) <= rank(&w[1]))
    }

    #[cfg(test)]
    pub(crate) fn from_labels(labels: Vec<Segment>) -> Self {
        Self { labels }
    }
}
