use crate::nn::StateBatch;
use crate::perception::{Observation, EGO_DIM, OBJECT_DIM};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Divisors bringing observation entries to roughly unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub position_scale: f64,
    pub velocity_scale: f64,
    pub yaw_rate_scale: f64,
    pub thrust_scale: f64,
    pub radius_scale: f64,
}

impl FeatureScaling {
    pub fn ego(&self, obs: &Observation) -> [f64; EGO_DIM] {
        let e = obs.ego.to_array();
        [
            e[0] / self.position_scale,
            e[1] / self.position_scale,
            e[2] / self.velocity_scale,
            e[3] / self.velocity_scale,
            e[4] / self.yaw_rate_scale,
            e[5] / self.thrust_scale,
            e[6] / self.thrust_scale,
        ]
    }

    pub fn object(&self, row: &[f64; OBJECT_DIM]) -> [f64; OBJECT_DIM] {
        [
            row[0] / self.position_scale,
            row[1] / self.position_scale,
            row[2] / self.velocity_scale,
            row[3] / self.velocity_scale,
            row[4] / self.radius_scale,
        ]
    }

    pub fn batch<'a>(&self, observations: impl IntoIterator<Item = &'a Observation>, slots: usize) -> StateBatch {
        let mut ego = Vec::new();
        let mut objects = Vec::new();
        let mut mask = Vec::new();
        let mut n = 0;
        for obs in observations {
            ego.extend(self.ego(obs));
            let (rows, valid) = obs.slots(slots);
            for (row, ok) in rows.iter().zip(valid) {
                objects.extend(if ok { self.object(row) } else { [0.0; OBJECT_DIM] });
                mask.push(ok);
            }
            n += 1;
        }
        StateBatch {
            ego: Array2::from_shape_vec((n, EGO_DIM), ego).expect("ego rows"),
            objects: Array2::from_shape_vec((n * slots, OBJECT_DIM), objects).expect("object rows"),
            mask,
            slots,
        }
    }
}
