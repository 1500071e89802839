use serde::{Deserialize, Serialize};

use super::world::{patch_color, Action, WorldState};
use super::WorldConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Patch,
    Boundary,
    None,
}

impl ObjectKind {
    pub fn one_hot(self) -> [f64; 3] {
        match self {
            ObjectKind::Patch => [1.0, 0.0, 0.0],
            ObjectKind::Boundary => [0.0, 1.0, 0.0],
            ObjectKind::None => [0.0, 0.0, 1.0],
        }
    }
}

/// What one ray saw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayReading {
    pub kind: ObjectKind,
    /// Which patch was hit; not part of the flattened encoding.
    pub patch: Option<usize>,
    pub color: [f64; 3],
    /// Hit distance divided by the sensor range, 1 when nothing was hit.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub rays: Vec<RayReading>,
    pub prev_reward: f64,
    pub prev_action: Action,
}

impl Observation {
    /// Channels per ray in the flattened encoding: 3 one-hot, 3 color, 1 distance.
    pub const RAY_CHANNELS: usize = 7;

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rays.len() * Self::RAY_CHANNELS + 1 + Action::DIM);
        for ray in &self.rays {
            out.extend_from_slice(&ray.kind.one_hot());
            out.extend_from_slice(&ray.color);
            out.push(ray.distance);
        }
        out.push(self.prev_reward);
        out.extend_from_slice(&self.prev_action.components());
        out
    }

    /// Color level of the patch the sensor sits in. Every ray cast from
    /// inside a disc hits it at distance zero.
    pub fn enclosing_patch(&self) -> Option<(usize, f64)> {
        self.rays
            .iter()
            .find(|r| r.kind == ObjectKind::Patch && r.distance == 0.0)
            .and_then(|r| r.patch.map(|p| (p, r.color[0])))
    }
}

/// Azimuths (radians, relative to heading) of the sensor fan.
pub fn ray_azimuths(config: &WorldConfig) -> Vec<f64> {
    let s = &config.sensor;
    let (lo, hi) = (s.azimuth_min.to_radians(), s.azimuth_max.to_radians());
    if s.rays == 1 {
        return vec![(lo + hi) / 2.0];
    }
    let span = hi - lo;
    (0..s.rays)
        .map(|i| lo + span * i as f64 / (s.rays - 1) as f64)
        .collect()
}

/// Entry distance of a ray into a closed disc; zero when the origin is inside.
pub fn ray_disc_distance(
    origin: [f64; 2],
    dir: [f64; 2],
    center: [f64; 2],
    radius: f64,
) -> Option<f64> {
    let f = [origin[0] - center[0], origin[1] - center[1]];
    let b = f[0] * dir[0] + f[1] * dir[1];
    let c = f[0] * f[0] + f[1] * f[1] - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t1 = -b + sq;
    if t1 < 0.0 {
        return None;
    }
    Some((-b - sq).max(0.0))
}

/// Distance along a ray from a point inside the square `[-half, half]^2` to its edge.
pub fn ray_boundary_distance(origin: [f64; 2], dir: [f64; 2], half: f64) -> f64 {
    let mut best = f64::INFINITY;
    for axis in 0..2 {
        let d = dir[axis];
        if d.abs() < 1e-300 {
            continue;
        }
        let wall = if d > 0.0 { half } else { -half };
        let t = ((wall - origin[axis]) / d).max(0.0);
        best = best.min(t);
    }
    best
}

pub fn lidar_scan(
    state: &WorldState,
    config: &WorldConfig,
    prev_reward: f64,
    prev_action: Action,
) -> Observation {
    let max_range = config.sensor.max_range;
    let centers = config.patch_centers();
    let rays = ray_azimuths(config)
        .into_iter()
        .map(|az| {
            let (s, c) = (state.heading + az).sin_cos();
            let dir = [c, s];
            let mut best: Option<(f64, Option<usize>)> = None;
            for (p, center) in centers.iter().enumerate() {
                if let Some(t) =
                    ray_disc_distance(state.position, dir, *center, config.patch_radius)
                {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, Some(p)));
                    }
                }
            }
            let wall = ray_boundary_distance(state.position, dir, config.half_size());
            if best.is_none_or(|(bt, _)| wall < bt) {
                best = Some((wall, None));
            }
            match best {
                Some((t, hit)) if t <= max_range => {
                    let (kind, color) = match hit {
                        Some(p) => (
                            ObjectKind::Patch,
                            patch_color(state.depletion[p], config.n0, config.lambda),
                        ),
                        None => (ObjectKind::Boundary, [0.0; 3]),
                    };
                    RayReading {
                        kind,
                        patch: hit,
                        color,
                        distance: t / max_range,
                    }
                }
                _ => RayReading {
                    kind: ObjectKind::None,
                    patch: None,
                    color: [0.0; 3],
                    distance: 1.0,
                },
            }
        })
        .collect();
    Observation {
        rays,
        prev_reward,
        prev_action,
    }
}
