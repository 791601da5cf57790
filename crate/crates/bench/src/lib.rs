//! Fixtures shared by the benchmarks.

use persona_core::corpus::{generate_synthetic, synthetic_table, SyntheticConfig};
use persona_core::{EmbeddingTable, UserRecord};

/// A seeded table and corpus of the given size.
pub fn fixture(n_users: usize, tweets_per_user: usize, dim: usize) -> (EmbeddingTable, Vec<UserRecord>) {
    let table = synthetic_table(2000, dim, 1).expect("table");
    let users = generate_synthetic(
        &table,
        &SyntheticConfig {
            n_users,
            tweets_per_user,
            seed: 2,
            ..Default::default()
        },
    )
    .expect("corpus");
    (table, users)
}
