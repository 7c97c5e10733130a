use std::fmt;

use serde::{Deserialize, Serialize};

/// Topic identifier as exported by a topic model; `-1` is the outlier topic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicId(pub i32);

impl TopicId {
    pub const OUTLIER: TopicId = TopicId(-1);

    pub fn is_outlier(self) -> bool {
        self.0 == -1
    }
}

impl fmt::Display for TopicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<i32> for TopicId {
    fn from(id: i32) -> Self {
        TopicId(id)
    }
}

/// Position of `id` in an ascending, duplicate-free id list.
pub(crate) fn index_of(ids: &[TopicId], id: TopicId) -> Option<usize> {
    ids.binary_search(&id).ok()
}
