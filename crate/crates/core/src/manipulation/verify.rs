use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use super::{EdgePaths, PickPlaceOracle, PickPlaceQuery};
use crate::world::{Arrangement, Instance, ObjectId, Placement};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("edge endpoints differ in {differing} objects, expected exactly one")]
pub struct MalformedEdge {
    pub differing: usize,
}

/// Path-verification instrumentation for one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MotionStats {
    pub planner_calls: u64,
    pub collision_checks: u64,
    pub cache_hits: u64,
    pub verify_time: Duration,
}

type EdgeKey = (Arrangement, ObjectId, Placement);

/// Runs every path verification of one planning run, with an optional cache
/// keyed by (parent arrangement, object, target).
pub struct EdgeVerifier<'a> {
    instance: &'a Instance,
    oracle: &'a dyn PickPlaceOracle,
    cache: Option<HashMap<EdgeKey, Option<Arc<EdgePaths>>>>,
    stats: MotionStats,
}

impl<'a> EdgeVerifier<'a> {
    pub fn new(instance: &'a Instance, oracle: &'a dyn PickPlaceOracle) -> Self {
        EdgeVerifier {
            instance,
            oracle,
            cache: Some(HashMap::new()),
            stats: MotionStats::default(),
        }
    }

    /// A verifier that re-plans every query.
    pub fn uncached(instance: &'a Instance, oracle: &'a dyn PickPlaceOracle) -> Self {
        EdgeVerifier {
            instance,
            oracle,
            cache: None,
            stats: MotionStats::default(),
        }
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn stats(&self) -> MotionStats {
        self.stats
    }

    pub fn set_caching(&mut self, on: bool) {
        match (on, self.cache.is_some()) {
            (true, false) => self.cache = Some(HashMap::new()),
            (false, true) => self.cache = None,
            _ => {}
        }
    }

    pub fn verify_edge(
        &mut self,
        parent: &Arrangement,
        child: &Arrangement,
    ) -> Result<Option<Arc<EdgePaths>>, MalformedEdge> {
        let diff = parent.diff(child);
        if diff.len() != 1 {
            return Err(MalformedEdge {
                differing: diff.len(),
            });
        }
        let o = diff[0];
        Ok(self.verify_move(parent, o, child.get(o)))
    }

    pub fn verify_move(
        &mut self,
        parent: &Arrangement,
        o: ObjectId,
        to: Placement,
    ) -> Option<Arc<EdgePaths>> {
        let key = (parent.clone(), o, to);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            self.stats.cache_hits += 1;
            return hit.clone();
        }
        let started = Instant::now();
        let query = PickPlaceQuery {
            arrangement: key.0.clone(),
            object: o,
            place_at: to,
        };
        let mut checks = 0;
        let result = self
            .oracle
            .plan(self.instance, &query, &mut checks)
            .map(Arc::new);
        self.stats.planner_calls += 1;
        self.stats.collision_checks += checks;
        self.stats.verify_time += started.elapsed();
        if let Some(cache) = self.cache.as_mut() {
            cache.insert(key, result.clone());
        }
        result
    }
}
