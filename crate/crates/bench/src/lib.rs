//! Shared benchmark inputs.

use rearrange_core::{sample_instance, Instance, WorldSpec};

/// Seeded instances on the default shelf, `count` per object count.
pub fn instances(n: usize, count: usize) -> Vec<Instance> {
    (0..count as u64)
        .map(|s| sample_instance(&WorldSpec::default(), n, 9_000 + s).expect("sampling"))
        .collect()
}
