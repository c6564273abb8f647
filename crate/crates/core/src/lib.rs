//! Corpus analytics for location descriptors in crisis-event posts.

pub mod authors;
pub mod corpus;
pub mod descriptors;
pub mod features;
pub mod gazetteer;
pub mod glm;
pub mod mentions;
pub mod pipeline;
pub mod simulate;
pub mod timeline;
