//! Online event clustering over pivot-language TF-IDF vectors.

mod board;
mod cluster;

pub use board::{event_board, BoardColumn, BoardError, BoardRow, EventMember};
pub use cluster::{
    extract_hashtags, rebuild, Assignment, ClusterError, Clusterer, ClustererConfig, EventCluster, EventId, Rebuilt,
};
